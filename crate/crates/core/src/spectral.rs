//! Dirichlet eigenpairs of the Anderson Hamiltonian `κΔ_h + V` on a box and the spectral
//! representation of the boxed PAM solution.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::error::{Error, Result};
use crate::fourier::DirichletLaplacian;
use crate::grid::{dot, Field, Grid};
use crate::noise::{replica_rng, rescale_noise, RescaledNoiseParams};

/// Largest operator size handled by a dense eigensolve.
const DENSE_LIMIT: usize = 2048;

/// Top eigenpairs in decreasing order, eigenfunctions orthonormal in `L²(Q_r)`.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub kappa: f64,
    pub eigenvalues: Vec<f64>,
    pub eigenfunctions: Vec<Field>,
}

impl SpectralDecomposition {
    pub fn grid(&self) -> &Grid {
        self.eigenfunctions[0].grid()
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues_csv(&self) -> String {
        let mut out = String::from("index,eigenvalue\n");
        for (i, l) in self.eigenvalues.iter().enumerate() {
            let _ = writeln!(out, "{},{:e}", i + 1, l);
        }
        out
    }

    /// `‖(κΔ+V)e_k − λ_k e_k‖₂` for every pair.
    pub fn residuals(&self, v: &Field) -> Vec<f64> {
        let op = Hamiltonian::new(v, self.kappa);
        self.eigenfunctions
            .iter()
            .zip(&self.eigenvalues)
            .map(|(e, l)| {
                let mut out = vec![0.0; e.values().len()];
                op.apply(e.values(), &mut out);
                let r: Vec<f64> = out.iter().zip(e.values()).map(|(a, b)| a - l * b).collect();
                (op.grid.cell_volume() * dot(&r, &r)).sqrt()
            })
            .collect()
    }
}

/// `κΔ_h + V` with zero Dirichlet data.
pub(crate) struct Hamiltonian<'a> {
    pub grid: Grid,
    pub kappa: f64,
    pub v: &'a [f64],
    pub lap: DirichletLaplacian,
}

impl<'a> Hamiltonian<'a> {
    pub fn new(v: &'a Field, kappa: f64) -> Self {
        Self { grid: *v.grid(), kappa, v: v.values(), lap: DirichletLaplacian::new(*v.grid()) }
    }

    pub fn apply(&self, f: &[f64], out: &mut [f64]) {
        self.lap.apply(f, out);
        for ((o, fv), vv) in out.iter_mut().zip(f).zip(self.v) {
            *o = self.kappa * *o + vv * fv;
        }
    }

    /// Solves `(s − κΔ_h − V) u = b` by conjugate gradients preconditioned with
    /// `(s − mean V − κΔ_h)^{-1}`. Requires `s > max V`.
    pub fn solve_shifted(&self, s: f64, b: &[f64], u: &mut [f64], tol: f64) -> Result<usize> {
        let n = b.len();
        let mean_v = self.v.iter().sum::<f64>() / n as f64;
        let shift = (s - mean_v).max(1e-12);
        let apply = |x: &[f64], out: &mut [f64]| {
            self.apply(x, out);
            for (o, xv) in out.iter_mut().zip(x) {
                *o = s * xv - *o;
            }
        };
        let precond = |r: &[f64]| {
            let mut z = r.to_vec();
            self.lap.solve_shifted(&mut z, shift, self.kappa);
            z
        };
        let mut au = vec![0.0; n];
        apply(u, &mut au);
        let mut r: Vec<f64> = b.iter().zip(&au).map(|(a, b)| a - b).collect();
        let bnorm = dot(b, b).sqrt().max(1e-300);
        let mut z = precond(&r);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![0.0; n];
        for it in 0..10_000 {
            if dot(&r, &r).sqrt() <= tol * bnorm {
                return Ok(it);
            }
            apply(&p, &mut ap);
            let alpha = rz / dot(&p, &ap);
            for i in 0..n {
                u[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            z = precond(&r);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(Error::EigensolveFailure("inner conjugate-gradient solve did not converge".into()))
    }
}

/// Top `k` eigenpairs of `κΔ_h + V` with Dirichlet boundary conditions on the grid of `V`.
///
/// Small operators are diagonalized densely; larger ones use block shift-and-invert subspace
/// iteration with Rayleigh–Ritz extraction.
pub fn dirichlet_eigens(v: &Field, kappa: f64, k: usize) -> Result<SpectralDecomposition> {
    let big_n = v.values().len();
    if k == 0 || k > big_n {
        return Err(Error::InvalidParameter(format!("need 1 ≤ k ≤ {big_n}, got {k}")));
    }
    if !(kappa > 0.0) {
        return Err(Error::InvalidParameter(format!("kappa must be positive, got {kappa}")));
    }
    if big_n <= DENSE_LIMIT {
        dense_eigens(v, kappa, k)
    } else {
        subspace_eigens(v, kappa, k)
    }
}

fn dense_eigens(v: &Field, kappa: f64, k: usize) -> Result<SpectralDecomposition> {
    let grid = *v.grid();
    let op = Hamiltonian::new(v, kappa);
    let big_n = grid.len();
    let mut mat = DMatrix::<f64>::zeros(big_n, big_n);
    let mut unit = vec![0.0; big_n];
    let mut col = vec![0.0; big_n];
    for j in 0..big_n {
        unit[j] = 1.0;
        op.apply(&unit, &mut col);
        unit[j] = 0.0;
        for (i, c) in col.iter().enumerate() {
            if *c != 0.0 {
                mat[(i, j)] = *c;
            }
        }
    }
    let a = mat.clone();
    let eig = SymmetricEigen::try_new(mat, 1e-14, 0)
        .ok_or_else(|| Error::EigensolveFailure("dense symmetric eigensolve did not converge".into()))?;
    let mut order: Vec<usize> = (0..big_n).collect();
    order.sort_by(|a, b| eig.eigenvalues[*b].partial_cmp(&eig.eigenvalues[*a]).expect("finite eigenvalues"));
    let eigenvalues: Vec<f64> = order.iter().take(k).map(|&j| eig.eigenvalues[j]).collect();
    let mut vectors: Vec<DVector<f64>> = order.iter().take(k).map(|&j| eig.eigenvectors.column(j).into_owned()).collect();
    // The QR sweep occasionally returns an inaccurate vector for an accurate eigenvalue.
    let norm = a.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    let tol = 1e-10 * norm.max(1.0);
    let accurate = |x: &DVector<f64>, l: f64| (&a * x - x * l).norm() <= tol;
    let mut good: Vec<bool> = vectors.iter().zip(&eigenvalues).map(|(x, l)| accurate(x, *l)).collect();
    for j in 0..k {
        if good[j] {
            continue;
        }
        let mut x = inverse_iteration(&a, eigenvalues[j], &vectors[j], norm)?;
        for i in (0..k).filter(|&i| i != j && good[i]) {
            let c = vectors[i].dot(&x);
            x.axpy(-c, &vectors[i], 1.0);
        }
        x /= x.norm();
        if !accurate(&x, eigenvalues[j]) {
            return Err(Error::EigensolveFailure(format!("eigenvector {} did not reach the residual tolerance", j + 1)));
        }
        vectors[j] = x;
        good[j] = true;
    }
    let scale = grid.cell_volume().sqrt();
    let eigenfunctions = vectors
        .iter()
        .map(|col| canonical_sign(Field::from_raw(grid, col.iter().map(|x| x / scale).collect())))
        .collect();
    Ok(SpectralDecomposition { kappa, eigenvalues, eigenfunctions })
}

/// A few steps of `x ← (A − σ)^{-1} x` with `σ` just above `lambda`.
fn inverse_iteration(a: &DMatrix<f64>, lambda: f64, start: &DVector<f64>, norm: f64) -> Result<DVector<f64>> {
    let n = a.nrows();
    let sigma = lambda + 1e-12 * norm.max(1.0);
    let lu = (a - DMatrix::<f64>::identity(n, n) * sigma).lu();
    let mut x = start.clone();
    for _ in 0..3 {
        x = lu.solve(&x).ok_or_else(|| Error::EigensolveFailure("singular shifted operator".into()))?;
        let nx = x.norm();
        if !(nx.is_finite() && nx > 0.0) {
            return Err(Error::EigensolveFailure("inverse iteration broke down".into()));
        }
        x /= nx;
    }
    Ok(x)
}

fn subspace_eigens(v: &Field, kappa: f64, k: usize) -> Result<SpectralDecomposition> {
    let grid = *v.grid();
    let op = Hamiltonian::new(v, kappa);
    let big_n = grid.len();
    let block = (k + 8).min(big_n);
    let vmax = v.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s = vmax + 1.0;
    let mut rng = replica_rng(0x5eed, 0);
    let mut x = DMatrix::<f64>::from_fn(big_n, block, |_, _| rng.gen::<f64>() - 0.5);
    let mut ritz = vec![0.0; block];
    let vol = grid.cell_volume();
    let mut col = vec![0.0; big_n];
    let mut out = vec![0.0; big_n];
    for _ in 0..500 {
        // Y = (s − A)^{-1} X, then orthonormalize.
        let mut y = DMatrix::<f64>::zeros(big_n, block);
        for j in 0..block {
            let b: Vec<f64> = x.column(j).iter().cloned().collect();
            let mut u = b.iter().map(|v| v / (s - vmax + 1.0)).collect::<Vec<_>>();
            op.solve_shifted(s, &b, &mut u, 1e-12)?;
            y.set_column(j, &DVector::from_vec(u));
        }
        let q = y.qr().q();
        // Rayleigh–Ritz on A.
        let mut aq = DMatrix::<f64>::zeros(big_n, block);
        for j in 0..block {
            col.iter_mut().zip(q.column(j).iter()).for_each(|(c, v)| *c = *v);
            op.apply(&col, &mut out);
            aq.set_column(j, &DVector::from_column_slice(&out));
        }
        let h = q.transpose() * &aq;
        let h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|a, b| eig.eigenvalues[*b].partial_cmp(&eig.eigenvalues[*a]).expect("finite Ritz values"));
        let mut rot = DMatrix::<f64>::zeros(block, block);
        for (newj, &j) in order.iter().enumerate() {
            rot.set_column(newj, &eig.eigenvectors.column(j));
            ritz[newj] = eig.eigenvalues[j];
        }
        x = &q * &rot;
        let ax = &aq * &rot;
        let converged = (0..k).all(|j| {
            let r = ax.column(j) - x.column(j) * ritz[j];
            (vol * r.norm_squared()).sqrt() / vol.sqrt() <= 1e-7 * ritz[j].abs().max(1.0)
        });
        if converged {
            let scale = vol.sqrt();
            let eigenfunctions = (0..k)
                .map(|j| canonical_sign(Field::from_raw(grid, x.column(j).iter().map(|v| v / scale).collect())))
                .collect();
            return Ok(SpectralDecomposition { kappa, eigenvalues: ritz[..k].to_vec(), eigenfunctions });
        }
    }
    Err(Error::EigensolveFailure(format!("subspace iteration did not converge for k = {k}")))
}

/// Fixes the sign so that the largest-magnitude entry is positive.
fn canonical_sign(mut f: Field) -> Field {
    let pivot = f.values().iter().cloned().fold(0.0, |m: f64, v| if v.abs() > m.abs() { v } else { m });
    if pivot < 0.0 {
        f.scale(-1.0);
    }
    f
}

/// `Σ_k e^{tλ_k}(e_k, 𝟙) e_k` together with the truncation bound.
#[derive(Clone, Debug)]
pub struct SpectralSolution {
    pub field: Field,
    /// `e^{tλ_k} ‖𝟙 − Σ_j (e_j,𝟙) e_j‖₂` for the last retained `k`.
    pub truncation_bound: f64,
}

pub fn spectral_solution(dec: &SpectralDecomposition, t: f64) -> Result<SpectralSolution> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("t must be nonnegative, got {t}")));
    }
    let grid = *dec.grid();
    let vol = grid.cell_volume();
    let mut u = vec![0.0; grid.len()];
    let mut captured = 0.0;
    for (e, l) in dec.eigenfunctions.iter().zip(&dec.eigenvalues) {
        let c = vol * e.values().iter().sum::<f64>();
        captured += c * c;
        let w = (t * l).exp() * c;
        for (u, ev) in u.iter_mut().zip(e.values()) {
            *u += w * ev;
        }
    }
    let total = vol * grid.len() as f64;
    let remaining = (total - captured).max(0.0).sqrt();
    let last = *dec.eigenvalues.last().expect("nonempty decomposition");
    let truncation_bound = (t * last).exp() * remaining;
    let field = Field::from_raw(grid, u);
    let norm = field.l2_norm();
    if truncation_bound > 0.01 * norm {
        return Err(Error::TruncationDominates { bound: truncation_bound, norm });
    }
    Ok(SpectralSolution { field, truncation_bound })
}

/// Number of modes to keep at time `t`: at most 64, fewer once `e^{t(λ_k − λ_1)} < 1e-12`.
pub fn default_mode_count(dec: &SpectralDecomposition, t: f64) -> usize {
    let l1 = dec.eigenvalues[0];
    let cut = dec.eigenvalues.iter().position(|l| (t * (l - l1)).exp() < 1e-12).map(|i| i + 1);
    cut.unwrap_or(dec.len()).min(64)
}

/// `(pt·λ₁^{ξ}(Q_{Rα}), H + β·λ₁^{Ξ}(Q_R))` for the same draw, with `Ξ` the rescaled field on the
/// matched grid over `Q_R`.
pub fn eigen_rescaling_check(xi_eps: &Field, params: &RescaledNoiseParams, radius: f64, kappa: f64) -> Result<(f64, f64)> {
    let src = xi_eps.grid();
    let n = src.points_per_dim();
    let d = src.dim();
    let inner = Grid::new(d, n, radius * params.alpha)?;
    if inner.radius() > src.radius() * (1.0 + 1e-12) {
        return Err(Error::DomainTooSmall(format!(
            "box radius {} exceeds the sampled radius {}",
            inner.radius(),
            src.radius()
        )));
    }
    let xi = Field::from_fn(inner, |x| xi_eps.interpolate(x));
    let lam = dirichlet_eigens(&xi, kappa, 1)?.eigenvalues[0];
    let target = Grid::new(d, n, radius)?;
    let big_xi = rescale_noise(xi_eps, params, target)?;
    let lam_r = dirichlet_eigens(&big_xi, kappa, 1)?.eigenvalues[0];
    Ok((params.p * params.t * lam, params.h + params.beta() * lam_r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn free_dirichlet_spectrum() {
        let g = Grid::new(1, 200, PI / 2.0).unwrap();
        let dec = dirichlet_eigens(&Field::zeros(g), 1.0, 3).unwrap();
        for (j, l) in dec.eigenvalues.iter().enumerate() {
            let exact = -((j + 1) as f64).powi(2);
            assert!((l - exact).abs() < 1e-3 * exact.abs(), "{l} vs {exact}");
        }
        for r in dec.residuals(&Field::zeros(g)) {
            assert!(r < 1e-8);
        }
    }

    #[test]
    fn constant_shift_and_completeness() {
        let g = Grid::new(1, 40, 2.0).unwrap();
        let v = Field::from_fn(g, |x| (3.0 * x[0]).sin());
        let a = dirichlet_eigens(&v, 0.7, 40).unwrap();
        let b = dirichlet_eigens(&v.map(|x| x + 2.5), 0.7, 40).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            assert!((y - x - 2.5).abs() < 1e-10);
        }
        let one = spectral_solution(&a, 0.0).unwrap();
        assert!(one.field.l2_distance(&Field::constant(g, 1.0)) < 1e-8);
        for i in 0..5 {
            for j in 0..5 {
                let ip = a.eigenfunctions[i].inner(&a.eigenfunctions[j]);
                assert!((ip - if i == j { 1.0 } else { 0.0 }).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn subspace_matches_dense() {
        let g = Grid::new(2, 48, 3.0).unwrap();
        let v = Field::from_fn(g, |x| 2.0 * (-(x[0] * x[0] + 2.0 * x[1] * x[1])).exp() + 0.3 * x[0].sin());
        let sub = subspace_eigens(&v, 1.0, 4).unwrap();
        let small = Grid::new(2, 32, 3.0).unwrap();
        let vs = Field::from_fn(small, |x| 2.0 * (-(x[0] * x[0] + 2.0 * x[1] * x[1])).exp() + 0.3 * x[0].sin());
        let dense_small = dense_eigens(&vs, 1.0, 4).unwrap();
        // Different resolutions agree to discretization accuracy; same-resolution residuals are tight.
        assert!((sub.eigenvalues[0] - dense_small.eigenvalues[0]).abs() < 2e-2);
        for (r, l) in sub.residuals(&v).iter().zip(&sub.eigenvalues) {
            assert!(*r <= 1e-6 * l.abs().max(1.0), "{r}");
        }
    }

    #[test]
    fn survival_probability_bounds() {
        let g = Grid::new(1, 64, 1.0).unwrap();
        let dec = dirichlet_eigens(&Field::zeros(g), 1.0, 64).unwrap();
        let u = spectral_solution(&dec, 0.3).unwrap();
        assert!(u.field.values().iter().all(|v| *v > 0.0 && *v <= 1.0 + 1e-10));
    }

    #[test]
    fn identity_rescaling() {
        let g = Grid::new(1, 64, 2.0).unwrap();
        let xi = Field::from_fn(g, |x| (2.0 * x[0]).cos());
        let params = RescaledNoiseParams { p: 1.0, t: 1.0, epsilon: 1.0, alpha: 1.0, h: 0.0 };
        let (a, b) = eigen_rescaling_check(&xi, &params, 2.0, 1.0).unwrap();
        assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
    }
}
