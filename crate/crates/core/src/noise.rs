//! Sampling the mollified Gaussian field, rescaling it, and exact Gaussian moment generating
//! functions.
//!
//! Samples are drawn by spectral synthesis on a periodic box twice as wide as the analysis box,
//! then cropped, so every lag inside the analysis box is represented without wrap-around.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{signed_index, CubicFft};
use crate::grid::{Field, Grid, MAX_DIM};
use crate::kernels::{riesz_fourier_constant, KernelFamily, MollifiedKernelSpec};
use crate::quadrature::gauss_legendre;

/// Counter-style generator for replica `replica` of experiment `seed`.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// Precomputed spectral synthesis plan for one kernel and one analysis grid.
pub struct NoiseSampler {
    kernel: MollifiedKernelSpec,
    grid: Grid,
    torus_points: usize,
    fft: CubicFft,
    /// `sqrt(λ_k / N^d)` for every torus mode `k`.
    amplitude: Vec<f64>,
}

impl NoiseSampler {
    pub fn new(kernel: &MollifiedKernelSpec, grid: Grid) -> Result<Self> {
        let d = kernel.dimension();
        if grid.dim() != d {
            return Err(Error::InvalidParameter(format!(
                "grid dimension {} does not match kernel dimension {d}",
                grid.dim()
            )));
        }
        let n = grid.points_per_dim();
        if !n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "noise sampling needs a power-of-two resolution, got {n}"
            )));
        }
        let m = 2 * n;
        let h = grid.spacing();
        let period = m as f64 * h;
        let eigen = torus_eigenvalues(kernel, d, m, h, period)?;
        let total = (m as f64).powi(d as i32);
        let amplitude = eigen.iter().map(|l| (l / total).sqrt()).collect();
        Ok(Self { kernel: kernel.clone(), grid, torus_points: m, fft: CubicFft::new(d, m), amplitude })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn kernel(&self) -> &MollifiedKernelSpec {
        &self.kernel
    }

    /// Two independent draws from one complex synthesis.
    pub fn sample_pair(&self, seed: u64, replica: u64) -> (Field, Field) {
        let mut rng = replica_rng(seed, replica);
        let mut data: Vec<Complex64> = self
            .amplitude
            .iter()
            .map(|a| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(a * re, a * im)
            })
            .collect();
        self.fft.forward(&mut data);
        let (re, im) = self.crop(&data);
        (Field::from_raw(self.grid, re), Field::from_raw(self.grid, im))
    }

    pub fn sample(&self, seed: u64, replica: u64) -> Field {
        self.sample_pair(seed, replica).0
    }

    fn crop(&self, data: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.grid.points_per_dim();
        let m = self.torus_points;
        let d = self.grid.dim();
        let offset = n / 2;
        let mut re = Vec::with_capacity(self.grid.len());
        let mut im = Vec::with_capacity(self.grid.len());
        for k in 0..self.grid.len() {
            let idx = self.grid.multi_index(k);
            let flat = (0..d).fold(0, |acc, a| acc * m + idx[a] + offset);
            re.push(data[flat].re);
            im.push(data[flat].im);
        }
        (re, im)
    }
}

/// One draw of the mollified field on `grid`.
pub fn sample_noise(kernel: &MollifiedKernelSpec, grid: Grid, seed: u64) -> Result<Field> {
    Ok(NoiseSampler::new(kernel, grid)?.sample(seed, 0))
}

/// Eigenvalues of the torus covariance: `h^{-d} Σ_m S((k + m N)/L)`, with `S = γ̂ p̂_ε`.
///
/// Near the origin `S` is singular for Riesz and fractional kernels, so the `m = 0` term of
/// low modes is replaced by the average of `S` over the frequency cell. Summed over all modes
/// this makes the pointwise variance equal to `∫ S = γ_ε(0)`.
fn torus_eigenvalues(kernel: &MollifiedKernelSpec, d: usize, m: usize, h: f64, period: f64) -> Result<Vec<f64>> {
    let eps = kernel.epsilon;
    let sigma2 = kernel.base.sigma2();
    let df = 1.0 / period;
    // Aliases beyond this frequency shift are below 1e-18 relative.
    let alias_reach = {
        let nyquist = 0.5 / h;
        let mut reach = 0i64;
        while (-2.0 * PI * PI * eps * eps * ((2 * reach + 1) as f64 * nyquist).powi(2)).exp() > 1e-18 && reach < 8 {
            reach += 1;
        }
        reach
    };
    let total = m.pow(d as u32);
    let hd = h.powi(d as i32);

    let eigen: Vec<f64> = match &kernel.base.family {
        KernelFamily::White | KernelFamily::Fractional { .. } => {
            // Product form: S(ξ) = σ² Π_i s_i(ξ_i).
            let omegas: Vec<Option<f64>> = match &kernel.base.family {
                KernelFamily::Fractional { omegas } => omegas.iter().map(|w| Some(*w)).collect(),
                _ => vec![None; d],
            };
            let axes: Vec<Vec<f64>> = omegas
                .iter()
                .map(|w| {
                    (0..m)
                        .map(|k| {
                            let k = signed_index(k, m);
                            (-alias_reach..=alias_reach)
                                .map(|a| {
                                    let j = k + a * m as i64;
                                    axis_density(*w, eps, j, df)
                                })
                                .sum::<f64>()
                        })
                        .collect()
                })
                .collect();
            (0..total)
                .map(|flat| {
                    let mut rem = flat;
                    let mut v = sigma2;
                    for axis in (0..d).rev() {
                        v *= axes[axis][rem % m];
                        rem /= m;
                    }
                    v / hd
                })
                .collect()
        }
        KernelFamily::Riesz { omega } => {
            let omega = *omega;
            let df_d = d as f64;
            let c = riesz_fourier_constant(df_d, omega);
            let s = df_d - omega;
            let density = |xi2: f64| c * xi2.powf(-0.5 * s) * (-2.0 * PI * PI * eps * eps * xi2).exp();
            let (gl_x, gl_w) = gauss_legendre(8);
            (0..total)
                .map(|flat| {
                    let mut rem = flat;
                    let mut k = [0i64; MAX_DIM];
                    for axis in (0..d).rev() {
                        k[axis] = signed_index(rem % m, m);
                        rem /= m;
                    }
                    let near = (0..d).all(|a| k[a].abs() <= 6);
                    let mut acc = 0.0;
                    for_each_alias(d, alias_reach, |shift| {
                        let mut xi2 = 0.0;
                        for a in 0..d {
                            let j = k[a] + shift[a] * m as i64;
                            xi2 += (j as f64 * df).powi(2);
                        }
                        let is_base = shift[..d].iter().all(|s| *s == 0);
                        if is_base && near {
                            acc += riesz_cell_average(d, &k[..d], df, s, c, eps, &gl_x, &gl_w);
                        } else {
                            acc += density(xi2);
                        }
                    });
                    sigma2 * acc / hd
                })
                .collect()
        }
    };
    if let Some(bad) = eigen.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        return Err(Error::NonPositiveSpectrum(*bad));
    }
    Ok(eigen)
}

fn for_each_alias(d: usize, reach: i64, mut f: impl FnMut(&[i64; MAX_DIM])) {
    let width = (2 * reach + 1) as usize;
    let count = width.pow(d as u32);
    let mut shift = [0i64; MAX_DIM];
    for c in 0..count {
        let mut rem = c;
        for s in shift.iter_mut().take(d) {
            *s = (rem % width) as i64 - reach;
            rem /= width;
        }
        f(&shift);
    }
}

/// One-dimensional spectral factor on lattice frequency `j·df`: the fractional factor
/// `c(1,ω)|ξ|^{ω-1} e^{-2π²ε²ξ²}` averaged over the frequency cell, or the white Gaussian factor.
fn axis_density(omega: Option<f64>, eps: f64, j: i64, df: f64) -> f64 {
    let g = |xi: f64| (-2.0 * PI * PI * eps * eps * xi * xi).exp();
    match omega {
        None => g(j as f64 * df),
        Some(w) => {
            // Exact power integral plus a Gauss–Legendre correction for the Gaussian factor.
            let c = riesz_fourier_constant(1.0, w);
            let lo = (j as f64 - 0.5) * df;
            let hi = (j as f64 + 0.5) * df;
            let power = |x: f64| x.signum() * x.abs().powf(w) / w;
            let base = (power(hi) - power(lo)) / df;
            let (x, wt) = gauss_legendre(8);
            let corr: f64 = x
                .iter()
                .zip(&wt)
                .map(|(t, wt)| {
                    let xi = 0.5 * (lo + hi) + 0.5 * df * t;
                    0.5 * wt * xi.abs().powf(w - 1.0) * (g(xi) - 1.0)
                })
                .sum();
            c * (base + corr)
        }
    }
}

/// Average of `c|ξ|^{-s} e^{-2π²ε²|ξ|²}` over the frequency cell of side `df` centered at `k·df`.
#[allow(clippy::too_many_arguments)]
fn riesz_cell_average(d: usize, k: &[i64], df: f64, s: f64, c: f64, eps: f64, gl_x: &[f64], gl_w: &[f64]) -> f64 {
    let gauss = |xi2: f64| (-2.0 * PI * PI * eps * eps * xi2).exp();
    let q = gl_x.len();
    let count = q.pow(d as u32);
    let center: Vec<f64> = k.iter().map(|k| *k as f64 * df).collect();
    let mut singular_part = 0.0;
    let mut correction = 0.0;
    let is_zero = k.iter().all(|k| *k == 0);
    for idx in 0..count {
        let mut rem = idx;
        let mut xi2 = 0.0;
        let mut w = 1.0;
        for cc in center.iter() {
            let j = rem % q;
            rem /= q;
            xi2 += (cc + 0.5 * df * gl_x[j]).powi(2);
            w *= 0.5 * gl_w[j];
        }
        let p = xi2.powf(-0.5 * s);
        if is_zero {
            correction += w * p * (gauss(xi2) - 1.0);
        } else {
            singular_part += w * p * gauss(xi2);
        }
    }
    if is_zero {
        singular_part = crate::kernels::power_cube_average(d, s, df);
    }
    c * (singular_part + correction)
}

/// Parameters of the rescaled field `Ξ(x) = α²(ξ_ε(αx) − H/(pt))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RescaledNoiseParams {
    pub p: f64,
    pub t: f64,
    pub epsilon: f64,
    pub alpha: f64,
    #[serde(rename = "H")]
    pub h: f64,
}

impl RescaledNoiseParams {
    /// Parameters read off the scaling table for `regime` at time `p·t`.
    pub fn from_regime(
        regime: &crate::scaling::Regime,
        p: f64,
        t: f64,
        epsilon: f64,
        gamma1_at_0: f64,
        omega: f64,
    ) -> Self {
        let tr = crate::scaling::scaling_functions(regime, epsilon, p * t, gamma1_at_0, omega);
        Self { p, t, epsilon, alpha: tr.alpha, h: tr.h }
    }

    pub fn beta(&self) -> f64 {
        self.p * self.t / (self.alpha * self.alpha)
    }
}

/// `x ↦ α²(ξ(αx) − H/(pt))` sampled on `target`, with multilinear interpolation of `sample`.
pub fn rescale_noise(sample: &Field, params: &RescaledNoiseParams, target: Grid) -> Result<Field> {
    let src = sample.grid();
    if target.dim() != src.dim() {
        return Err(Error::InvalidParameter("target grid dimension differs from the sample".into()));
    }
    let reach = params.alpha * target.radius();
    if reach > src.radius() * (1.0 + 1e-12) {
        return Err(Error::DomainTooSmall(format!(
            "dilated box radius {reach} exceeds the sampled radius {}",
            src.radius()
        )));
    }
    let a2 = params.alpha * params.alpha;
    let shift = params.h / (params.p * params.t);
    let d = target.dim();
    Ok(Field::from_fn(target, |x| {
        let mut y = [0.0; MAX_DIM];
        for i in 0..d {
            y[i] = params.alpha * x[i];
        }
        a2 * (sample.interpolate(&y[..d]) - shift)
    }))
}

/// `⟨exp(λ Σ_i w_i ξ_ε(x_i))⟩ = exp(λ²/2 Σ_ij w_i w_j γ_ε(x_i − x_j))`.
pub fn mgf_linear_functional(kernel: &MollifiedKernelSpec, points: &[Vec<f64>], weights: &[f64], lambda: f64) -> f64 {
    (0.5 * lambda * lambda * quadratic_form(kernel, points, weights)).exp()
}

/// `Σ_ij w_i w_j γ_ε(x_i − x_j)`, the variance of `(ξ_ε, μ)`.
pub fn quadratic_form(kernel: &MollifiedKernelSpec, points: &[Vec<f64>], weights: &[f64]) -> f64 {
    let d = kernel.dimension();
    let mut diff = [0.0; MAX_DIM];
    let mut acc = 0.0;
    for (xi, wi) in points.iter().zip(weights) {
        for (xj, wj) in points.iter().zip(weights) {
            for a in 0..d {
                diff[a] = xi[a] - xj[a];
            }
            acc += wi * wj * kernel.covariance(&diff[..d]);
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;

    fn white(d: usize, eps: f64) -> MollifiedKernelSpec {
        MollifiedKernelSpec::new(KernelSpec::white(d, 1.0).unwrap(), eps).unwrap()
    }

    #[test]
    fn samples_are_reproducible_and_replicas_differ() {
        let k = white(1, 0.5);
        let g = Grid::new(1, 32, 4.0).unwrap();
        let s = NoiseSampler::new(&k, g).unwrap();
        assert_eq!(s.sample(7, 3), s.sample(7, 3));
        assert_ne!(s.sample(7, 3), s.sample(7, 4));
        assert_ne!(s.sample(7, 3), s.sample(8, 3));
    }

    #[test]
    fn rejects_non_power_of_two() {
        let g = Grid::new(1, 48, 4.0).unwrap();
        assert!(NoiseSampler::new(&white(1, 1.0), g).is_err());
    }

    #[test]
    fn eigenvalues_sum_to_pointwise_variance() {
        // Σ_k λ_k / N^d is the variance at a node.
        for k in [
            white(2, 0.4),
            MollifiedKernelSpec::new(KernelSpec::riesz(1, 1.0, 0.5).unwrap(), 0.25).unwrap(),
            MollifiedKernelSpec::new(KernelSpec::riesz(2, 1.0, 1.2).unwrap(), 0.5).unwrap(),
            MollifiedKernelSpec::new(KernelSpec::fractional(1.0, vec![0.4, 0.6]).unwrap(), 0.5).unwrap(),
        ] {
            let d = k.dimension();
            let n = if d == 1 { 128 } else { 32 };
            let g = Grid::new(d, n, 4.0).unwrap();
            let s = NoiseSampler::new(&k, g).unwrap();
            let var: f64 = s.amplitude.iter().map(|a| a * a).sum();
            let exact = k.at_origin();
            assert!((var - exact).abs() < 2e-3 * exact, "{:?}: {var} vs {exact}", k.base.family);
        }
    }

    #[test]
    fn rescale_identity_and_centering() {
        let g = Grid::new(1, 16, 2.0).unwrap();
        let f = Field::from_fn(g, |x| x[0].sin());
        let id = RescaledNoiseParams { p: 1.0, t: 1.0, epsilon: 1.0, alpha: 1.0, h: 0.0 };
        let out = rescale_noise(&f, &id, g).unwrap();
        for (a, b) in out.values().iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-14);
        }
        let c = Field::constant(g, 1.5);
        let p = RescaledNoiseParams { p: 2.0, t: 0.5, epsilon: 1.0, alpha: 2.0, h: 1.5 };
        let small = Grid::new(1, 16, 1.0).unwrap();
        let z = rescale_noise(&c, &p, small).unwrap();
        assert!(z.max_abs() < 1e-14);
        assert!(matches!(rescale_noise(&c, &p, g), Err(Error::DomainTooSmall(_))));
    }

    #[test]
    fn mgf_basics() {
        let k = white(1, 1.0);
        let pts = vec![vec![0.3]];
        assert_eq!(mgf_linear_functional(&k, &pts, &[1.0], 0.0), 1.0);
        let v = mgf_linear_functional(&k, &pts, &[1.0], 1.0);
        assert!((v - (0.5 * k.at_origin()).exp()).abs() < 1e-14);
        let pts = vec![vec![0.0], vec![0.7]];
        let w = [0.4, -1.1];
        assert_eq!(mgf_linear_functional(&k, &pts, &w, 0.8), mgf_linear_functional(&k, &pts, &w, -0.8));
    }
}
