//! FFT plumbing: multi-dimensional transforms on cubic arrays and the sine transform that
//! diagonalizes the Dirichlet finite-difference Laplacian.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid;

/// In-place d-dimensional FFT over a cubic array with `m` points per axis (row-major).
pub struct CubicFft {
    dim: usize,
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl CubicFft {
    pub fn new(dim: usize, m: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { dim, m, forward: planner.plan_fft_forward(m), inverse: planner.plan_fft_inverse(m) }
    }

    pub fn len(&self) -> usize {
        self.m.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn points_per_axis(&self) -> usize {
        self.m
    }

    /// Unnormalized forward transform `X_k = Σ_j x_j e^{-2πi j·k/m}`.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward);
    }

    /// Inverse transform including the `1/m^d` factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse);
        let scale = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }

    fn run(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.len());
        let m = self.m;
        let mut line = vec![Complex64::new(0.0, 0.0); m];
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        for axis in 0..self.dim {
            let stride = m.pow((self.dim - 1 - axis) as u32);
            if stride == 1 {
                for chunk in data.chunks_exact_mut(m) {
                    plan.process_with_scratch(chunk, &mut scratch);
                }
                continue;
            }
            let block = stride * m;
            for outer in (0..data.len()).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for (j, z) in line.iter_mut().enumerate() {
                        *z = data[base + j * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (j, z) in line.iter().enumerate() {
                        data[base + j * stride] = *z;
                    }
                }
            }
        }
    }
}

/// Signed integer frequency index of FFT bin `k` out of `m`.
#[inline]
pub fn signed_index(k: usize, m: usize) -> i64 {
    if k <= m / 2 {
        k as i64
    } else {
        k as i64 - m as i64
    }
}

/// Dirichlet finite-difference Laplacian on a cell-centered grid. The ghost value across the
/// box wall is `-f`, so the field vanishes exactly on the wall. Diagonalized by the type-II
/// sine transform along each axis.
pub struct DirichletLaplacian {
    grid: Grid,
    plan: Arc<dyn Fft<f64>>,
    /// Eigenvalues of the 1-D second-difference operator, `-(4/h²) sin²(π (k+1) / 2n)`.
    symbol: Vec<f64>,
}

impl DirichletLaplacian {
    pub fn new(grid: Grid) -> Self {
        let n = grid.points_per_dim();
        let h = grid.spacing();
        let mut planner = FftPlanner::new();
        let plan = planner.plan_fft_forward(2 * n);
        let symbol = (1..=n)
            .map(|q| {
                let s = (std::f64::consts::PI * q as f64 / (2.0 * n as f64)).sin();
                -4.0 * s * s / (h * h)
            })
            .collect();
        Self { grid, plan, symbol }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `Δ_h f` by the `2d+1`-point stencil.
    pub fn apply(&self, f: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        let n = g.points_per_dim();
        let inv_h2 = 1.0 / (g.spacing() * g.spacing());
        let dim = g.dim();
        for (k, o) in out.iter_mut().enumerate() {
            let idx = g.multi_index(k);
            let mut acc = -2.0 * dim as f64 * f[k];
            for axis in 0..dim {
                let s = g.stride(axis);
                acc += if idx[axis] > 0 { f[k - s] } else { -f[k] };
                acc += if idx[axis] + 1 < n { f[k + s] } else { -f[k] };
            }
            *o = acc * inv_h2;
        }
    }

    /// `∫|∇_h f|²` with forward differences; each wall edge contributes `2f²/h²` per cell face.
    /// Equals `-⟨f, Δ_h f⟩` exactly.
    pub fn gradient_energy(&self, f: &[f64]) -> f64 {
        let g = &self.grid;
        let n = g.points_per_dim();
        let h = g.spacing();
        let dim = g.dim();
        let mut acc = 0.0;
        for (k, &v) in f.iter().enumerate() {
            let idx = g.multi_index(k);
            for axis in 0..dim {
                let s = g.stride(axis);
                if idx[axis] + 1 < n {
                    let next = f[k + s];
                    acc += (next - v) * (next - v);
                } else {
                    acc += 2.0 * v * v;
                }
                if idx[axis] == 0 {
                    acc += 2.0 * v * v;
                }
            }
        }
        acc * g.cell_volume() / (h * h)
    }

    /// Applies `m(λ)` to `f` where `λ` runs over eigenvalues of `Δ_h`.
    pub fn apply_spectral(&self, f: &mut [f64], multiplier: impl Fn(f64) -> f64) {
        let dim = self.grid.dim();
        let n = self.grid.points_per_dim();
        self.sine_transform(f, false);
        let weight = |q: usize| if q + 1 == n { 1.0 / n as f64 } else { 2.0 / n as f64 };
        for (k, v) in f.iter_mut().enumerate() {
            let idx = self.grid.multi_index(k);
            let lam: f64 = (0..dim).map(|a| self.symbol[idx[a]]).sum();
            let norm: f64 = (0..dim).map(|a| weight(idx[a])).product();
            *v *= multiplier(lam) * norm;
        }
        self.sine_transform(f, true);
    }

    /// Solves `(a - b Δ_h) u = f` in place, `a > 0`, `b ≥ 0`.
    pub fn solve_shifted(&self, f: &mut [f64], a: f64, b: f64) {
        self.apply_spectral(f, |lam| 1.0 / (a - b * lam));
    }

    /// Eigenvalues of `Δ_h` in increasing magnitude order along one axis.
    pub fn axis_symbol(&self) -> &[f64] {
        &self.symbol
    }

    /// Along every axis, the unnormalized DST-II `S_k = Σ_j x_j sin(π (j+½)(k+1)/n)`, or with
    /// `inverse` its transpose (DST-III).
    fn sine_transform(&self, f: &mut [f64], inverse: bool) {
        let g = &self.grid;
        let n = g.points_per_dim();
        let m = 2 * n;
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.plan.get_inplace_scratch_len()];
        let mut line = vec![0.0; n];
        let twiddle: Vec<Complex64> =
            (0..=n).map(|q| Complex64::from_polar(1.0, std::f64::consts::PI * q as f64 / m as f64)).collect();
        for axis in 0..g.dim() {
            let stride = g.stride(axis);
            let block = stride * n;
            for outer in (0..f.len()).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for (j, l) in line.iter_mut().enumerate() {
                        *l = f[base + j * stride];
                    }
                    buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
                    if inverse {
                        // x_j = Im Σ_q a_q e^{iπq/2n} e^{2πi jq/2n} with a_q = S_{q-1}
                        for q in 1..=n {
                            buf[q % m] = (twiddle[q] * line[q - 1]).conj();
                        }
                        self.plan.process_with_scratch(&mut buf, &mut scratch);
                        for j in 0..n {
                            f[base + j * stride] = -buf[j].im;
                        }
                    } else {
                        // S_{q-1} = Im[e^{iπq/2n} conj(X_q)]
                        for j in 0..n {
                            buf[j] = Complex64::new(line[j], 0.0);
                        }
                        self.plan.process_with_scratch(&mut buf, &mut scratch);
                        for q in 1..=n {
                            f[base + (q - 1) * stride] = (twiddle[q] * buf[q % m].conj()).im;
                        }
                    }
                }
            }
        }
    }
}
