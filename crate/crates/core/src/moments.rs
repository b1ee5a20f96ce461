//! Moments `⟨u_ε(t,x)^p⟩` over noise realizations, their normalized logarithms, and the
//! finite-`t` intermittency scan.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, MAX_DIM};
use crate::kernels::MollifiedKernelSpec;
use crate::noise::{replica_rng, NoiseSampler};
use crate::pam::{mean_and_stderr, per_path, solve_at, BrownianPath, McEstimate, PamSolveConfig};
use crate::scaling::{scaling_functions, Regime};

/// Offset separating solver streams from noise streams of the same seed.
const SOLVER_STREAM: u64 = 1 << 40;
const BOOTSTRAP_STREAM: u64 = 1 << 41;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub p: f64,
    pub t: f64,
    pub epsilon: f64,
    pub value: f64,
    pub log_value: f64,
    /// Jackknife standard error of `log_value`.
    pub stderr_log: f64,
    pub n_noise: usize,
    pub n_paths: usize,
}

/// Where and how each noise draw is solved.
#[derive(Clone, Debug)]
pub struct MomentSetup {
    /// Grid on which the noise is sampled and the equation solved.
    pub grid: Grid,
    pub x: Vec<f64>,
    pub n_noise: usize,
    pub solver: PamSolveConfig,
    pub seed: u64,
}

/// `u(t, x)` for every noise draw `0..n_noise`.
pub fn solution_samples(kernel: &MollifiedKernelSpec, t: f64, setup: &MomentSetup) -> Result<Vec<f64>> {
    if setup.n_noise < 2 {
        return Err(Error::InvalidParameter("need at least two noise draws".into()));
    }
    let sampler = NoiseSampler::new(kernel, setup.grid)?;
    let mut inner = setup.solver.clone();
    let workers = inner.workers.max(1);
    inner.workers = 1;
    per_path(setup.n_noise, workers, |i| {
        let v = sampler.sample(setup.seed, i as u64);
        solve_at(&v, t, &setup.x, &inner, setup.seed.wrapping_add(SOLVER_STREAM + i as u64))
    })
    .into_iter()
    .collect()
}

/// `⟨u^p⟩` from solution samples with a jackknife error on its logarithm.
pub fn moment_from_samples(samples: &[f64], p: f64, t: f64, epsilon: f64, n_paths: usize) -> MomentEstimate {
    let powered: Vec<f64> = samples.iter().map(|u| u.powf(p)).collect();
    let n = powered.len() as f64;
    let total: f64 = powered.iter().sum();
    let value = total / n;
    let loo: Vec<f64> = powered.iter().map(|x| ((total - x) / (n - 1.0)).ln()).collect();
    let mean_loo = loo.iter().sum::<f64>() / n;
    let var = (n - 1.0) / n * loo.iter().map(|l| (l - mean_loo).powi(2)).sum::<f64>();
    MomentEstimate { p, t, epsilon, value, log_value: value.ln(), stderr_log: var.sqrt(), n_noise: samples.len(), n_paths }
}

/// `⟨u_ε(t,x)^p⟩` over `n_noise` independent draws.
pub fn estimate_moment(kernel: &MollifiedKernelSpec, t: f64, p: f64, setup: &MomentSetup) -> Result<MomentEstimate> {
    if !(p > 0.0) {
        return Err(Error::InvalidParameter(format!("p must be positive, got {p}")));
    }
    let samples = solution_samples(kernel, t, setup)?;
    Ok(moment_from_samples(&samples, p, t, kernel.epsilon, paths_of(&setup.solver)))
}

fn paths_of(solver: &PamSolveConfig) -> usize {
    match solver.method {
        crate::pam::Method::MonteCarlo => solver.n_paths,
        _ => 0,
    }
}

/// `E[exp(½ Σ_{j,k} ∬_{[0,t]²} γ_ε(W^j_u − W^k_v) du dv)]` over `p` independent paths from the
/// origin. The double integrals use the trapezoidal rule at spacing `dt`.
pub fn replica_moment(kernel: &MollifiedKernelSpec, t: f64, p: usize, n_paths: usize, dt: f64, seed: u64, workers: usize) -> Result<McEstimate> {
    if p == 0 {
        return Err(Error::InvalidParameter("replica moments need an integer p ≥ 1".into()));
    }
    if n_paths == 0 || !(t > 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidParameter("need n_paths ≥ 1, t > 0 and dt > 0".into()));
    }
    let d = kernel.dimension();
    let origin = vec![0.0; d];
    let samples = per_path(n_paths, workers, |i| {
        let paths: Vec<BrownianPath> = (0..p)
            .map(|j| {
                let mut rng = replica_rng(seed, (i * p + j) as u64);
                BrownianPath::sample(&origin, t, dt, 1.0, &mut rng)
            })
            .collect();
        replica_exponent(kernel, &paths).exp()
    });
    let (estimate, stderr) = mean_and_stderr(&samples);
    Ok(McEstimate { estimate, stderr, n_paths, seed })
}

/// Paths for [`replica_moment`] use generator `κΔ` with `κ = 1`; this variant takes `κ`.
pub fn replica_moment_kappa(
    kernel: &MollifiedKernelSpec,
    kappa: f64,
    t: f64,
    p: usize,
    n_paths: usize,
    dt: f64,
    seed: u64,
    workers: usize,
) -> Result<McEstimate> {
    if p == 0 {
        return Err(Error::InvalidParameter("replica moments need an integer p ≥ 1".into()));
    }
    let origin = vec![0.0; kernel.dimension()];
    let samples = per_path(n_paths, workers, |i| {
        let paths: Vec<BrownianPath> = (0..p)
            .map(|j| {
                let mut rng = replica_rng(seed, (i * p + j) as u64);
                BrownianPath::sample(&origin, t, dt, kappa, &mut rng)
            })
            .collect();
        replica_exponent(kernel, &paths).exp()
    });
    let (estimate, stderr) = mean_and_stderr(&samples);
    Ok(McEstimate { estimate, stderr, n_paths, seed })
}

/// `½ Σ_{j,k} ∬ γ_ε(W^j_u − W^k_v) du dv` by the trapezoidal rule.
pub fn replica_exponent(kernel: &MollifiedKernelSpec, paths: &[BrownianPath]) -> f64 {
    let d = kernel.dimension();
    let steps = paths[0].steps();
    let dt = paths[0].dt;
    let w = |i: usize| if i == 0 || i == steps { 0.5 * dt } else { dt };
    let mut diff = [0.0; MAX_DIM];
    let mut total = 0.0;
    for (j, pj) in paths.iter().enumerate() {
        for (k, pk) in paths.iter().enumerate().skip(j) {
            let mut acc = 0.0;
            for a in 0..=steps {
                let xa = pj.position(a);
                let start = if j == k { a } else { 0 };
                for b in start..=steps {
                    let xb = pk.position(b);
                    for c in 0..d {
                        diff[c] = xa[c] - xb[c];
                    }
                    let g = kernel.covariance(&diff[..d]) * w(a) * w(b);
                    // Off-diagonal time pairs of one path appear twice in the double integral.
                    acc += if j == k && b != a { 2.0 * g } else { g };
                }
            }
            // Distinct path pairs (j,k) and (k,j) contribute equally.
            total += if j == k { acc } else { 2.0 * acc };
        }
    }
    0.5 * total
}

/// `(log⟨u^p⟩ − H_ε(pt)) / β_ε(pt)`.
pub fn normalized_log_moment(est: &MomentEstimate, regime: &Regime, omega: f64, gamma1_at_0: f64) -> f64 {
    let tr = scaling_functions(regime, est.epsilon, est.p * est.t, gamma1_at_0, omega);
    (est.log_value - tr.h) / tr.beta
}

/// Resources for [`intermittency_scan`].
#[derive(Clone, Debug)]
pub struct ScanBudget {
    pub grid: Grid,
    pub n_noise: usize,
    pub solver: PamSolveConfig,
    pub seed: u64,
    pub n_bootstrap: usize,
    /// `A(ε) = ε^{-rate_exponent}`.
    pub rate_exponent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub epsilon: f64,
    pub t: f64,
    pub p: f64,
    pub log_moment: f64,
    pub stderr: f64,
    #[serde(rename = "A")]
    pub a: f64,
    pub ell_hat: f64,
    pub ell_hat_over_p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Monotonicity {
    /// `ℓ̂_p/p` strictly increasing, with the bootstrap fraction of resamples that agree.
    Increasing { confidence: f64 },
    /// All `ℓ̂_p` vanish (no noise).
    Flat,
    NotIncreasing { confidence: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanTable {
    pub rows: Vec<ScanRow>,
    /// Verdict at the smallest `ε`.
    pub monotonicity: Monotonicity,
    /// Bootstrap standard errors of the consecutive gaps of `ℓ̂_p/p` at the smallest `ε`.
    pub gap_stderr: Vec<f64>,
}

impl ScanTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epsilon,t,p,log_moment,stderr,A,ell_hat,ell_hat_over_p\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.epsilon, r.t, r.p, r.log_moment, r.stderr, r.a, r.ell_hat, r.ell_hat_over_p
            );
        }
        out
    }
}

/// Estimates `ℓ̂_p(ε) = log⟨u_ε(t,0)^p⟩ / A(ε)` on common noise draws for every `p`, and tests
/// whether `p ↦ ℓ̂_p/p` is strictly increasing at the smallest `ε` by bootstrap over draws.
pub fn intermittency_scan(kernel: &MollifiedKernelSpec, t: f64, epsilons: &[f64], ps: &[f64], budget: &ScanBudget) -> Result<ScanTable> {
    if ps.len() < 3 {
        return Err(Error::InvalidParameter("the scan needs at least three p values".into()));
    }
    if ps.windows(2).any(|w| w[1] <= w[0]) || epsilons.windows(2).any(|w| w[1] >= w[0]) || epsilons.is_empty() {
        return Err(Error::InvalidParameter("p values must increase and epsilons must decrease".into()));
    }
    let mut rows = Vec::new();
    let mut last_samples = Vec::new();
    for &eps in epsilons {
        let mk = kernel.with_epsilon(eps)?;
        let setup = MomentSetup {
            grid: budget.grid,
            x: vec![0.0; kernel.dimension()],
            n_noise: budget.n_noise,
            solver: budget.solver.clone(),
            seed: budget.seed,
        };
        let samples = solution_samples(&mk, t, &setup)?;
        let a = eps.powf(-budget.rate_exponent);
        for &p in ps {
            let est = moment_from_samples(&samples, p, t, eps, paths_of(&budget.solver));
            let ell = est.log_value / a;
            rows.push(ScanRow { epsilon: eps, t, p, log_moment: est.log_value, stderr: est.stderr_log, a, ell_hat: ell, ell_hat_over_p: ell / p });
        }
        last_samples = samples;
    }
    let eps = *epsilons.last().expect("nonempty");
    let a = eps.powf(-budget.rate_exponent);
    let ratios = |s: &[f64]| -> Vec<f64> {
        ps.iter().map(|p| (s.iter().map(|u| u.powf(*p)).sum::<f64>() / s.len() as f64).ln() / (a * p)).collect()
    };
    let point = ratios(&last_samples);
    if point.iter().all(|r| r.abs() < 1e-14) {
        return Ok(ScanTable { rows, monotonicity: Monotonicity::Flat, gap_stderr: vec![0.0; ps.len() - 1] });
    }
    let mut rng = replica_rng(budget.seed, BOOTSTRAP_STREAM);
    let n = last_samples.len();
    let mut agree = 0usize;
    let mut gaps: Vec<Vec<f64>> = vec![Vec::with_capacity(budget.n_bootstrap); ps.len() - 1];
    let mut resample = vec![0.0; n];
    for _ in 0..budget.n_bootstrap {
        for r in resample.iter_mut() {
            *r = last_samples[rng.gen_range(0..n)];
        }
        let rr = ratios(&resample);
        if rr.windows(2).all(|w| w[1] > w[0]) {
            agree += 1;
        }
        for (g, w) in gaps.iter_mut().zip(rr.windows(2)) {
            g.push(w[1] - w[0]);
        }
    }
    let gap_stderr: Vec<f64> = gaps
        .iter()
        .map(|g| {
            let m = g.iter().sum::<f64>() / g.len() as f64;
            (g.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (g.len() as f64 - 1.0)).sqrt()
        })
        .collect();
    for (w, se) in point.windows(2).zip(&gap_stderr) {
        if *se > (w[1] - w[0]).abs() {
            return Err(Error::InsufficientBudget(format!(
                "bootstrap error {se:e} exceeds the gap {:e} between consecutive ell_p/p",
                w[1] - w[0]
            )));
        }
    }
    let confidence = agree as f64 / budget.n_bootstrap as f64;
    let increasing = point.windows(2).all(|w| w[1] > w[0]);
    let monotonicity = if increasing { Monotonicity::Increasing { confidence } } else { Monotonicity::NotIncreasing { confidence } };
    Ok(ScanTable { rows, monotonicity, gap_stderr })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use crate::pam::Boundary;

    fn setup(n_noise: usize) -> MomentSetup {
        MomentSetup {
            grid: Grid::new(1, 64, 4.0).unwrap(),
            x: vec![0.0],
            n_noise,
            solver: PamSolveConfig { dt: 1e-3, boundary: Boundary::DirichletBox, ..Default::default() },
            seed: 3,
        }
    }

    #[test]
    fn zero_noise_moments_are_one() {
        let mk = MollifiedKernelSpec::new(KernelSpec::white(1, 0.0).unwrap(), 0.5).unwrap();
        let s = MomentSetup { solver: PamSolveConfig { boundary: Boundary::LargeBoxApprox, ..setup(4).solver }, ..setup(4) };
        let est = estimate_moment(&mk, 0.3, 2.0, &s).unwrap();
        assert!((est.value - 1.0).abs() < 1e-8);
        let r = replica_moment(&mk, 0.3, 2, 10, 0.05, 1, 1).unwrap();
        assert_eq!(r.estimate, 1.0);
        let rn = normalized_log_moment(&est, &Regime::Crt2 { limit_t: 0.3 }, 2.0, 1.0);
        assert!(rn.abs() < 1e-8);
    }

    #[test]
    fn short_time_moment_is_one() {
        let mk = MollifiedKernelSpec::new(KernelSpec::white(1, 1.0).unwrap(), 0.5).unwrap();
        let s = MomentSetup { solver: PamSolveConfig { dt: 1e-7, boundary: Boundary::LargeBoxApprox, ..setup(8).solver }, ..setup(8) };
        let est = estimate_moment(&mk, 1e-6, 1.0, &s).unwrap();
        assert!((est.value - 1.0).abs() < 1e-5);
    }

    #[test]
    fn replica_exponent_is_bounded_by_the_peak_covariance() {
        let mk = MollifiedKernelSpec::new(KernelSpec::white(1, 1.0).unwrap(), 0.5).unwrap();
        let t = 0.5;
        let bound = t * t * mk.at_origin() / 2.0;
        for i in 0..20 {
            let mut rng = replica_rng(11, i);
            let path = BrownianPath::sample(&[0.0], t, 0.01, 1.0, &mut rng);
            let e = replica_exponent(&mk, std::slice::from_ref(&path));
            assert!(e <= bound * (1.0 + 1e-12), "{e} > {bound}");
        }
    }

    #[test]
    fn replica_double_integral_matches_brute_force() {
        let mk = MollifiedKernelSpec::new(KernelSpec::white(1, 1.0).unwrap(), 0.5).unwrap();
        let paths: Vec<BrownianPath> = (0..2).map(|j| BrownianPath::sample(&[0.0], 0.2, 0.05, 1.0, &mut replica_rng(2, j))).collect();
        let steps = paths[0].steps();
        let w = |i: usize| if i == 0 || i == steps { 0.025 } else { 0.05 };
        let mut brute = 0.0;
        for pj in &paths {
            for pk in &paths {
                for a in 0..=steps {
                    for b in 0..=steps {
                        brute += w(a) * w(b) * mk.covariance(&[pj.position(a)[0] - pk.position(b)[0]]);
                    }
                }
            }
        }
        assert!((replica_exponent(&mk, &paths) - 0.5 * brute).abs() < 1e-12);
    }

    #[test]
    fn scan_requires_three_p_values() {
        let mk = MollifiedKernelSpec::new(KernelSpec::white(1, 1.0).unwrap(), 0.5).unwrap();
        let budget = ScanBudget { grid: Grid::new(1, 32, 2.0).unwrap(), n_noise: 4, solver: PamSolveConfig::default(), seed: 1, n_bootstrap: 10, rate_exponent: 2.0 };
        assert!(intermittency_scan(&mk, 0.1, &[0.5], &[1.0, 2.0], &budget).is_err());
    }

    #[test]
    fn zero_noise_scan_is_flat() {
        let mk = MollifiedKernelSpec::new(KernelSpec::white(1, 0.0).unwrap(), 0.5).unwrap();
        let budget = ScanBudget {
            grid: Grid::new(1, 32, 2.0).unwrap(),
            n_noise: 4,
            solver: PamSolveConfig { dt: 1e-2, boundary: Boundary::LargeBoxApprox, ..Default::default() },
            seed: 1,
            n_bootstrap: 10,
            rate_exponent: 2.0,
        };
        let table = intermittency_scan(&mk, 0.1, &[0.5, 0.25], &[1.0, 2.0, 3.0], &budget).unwrap();
        assert_eq!(table.monotonicity, Monotonicity::Flat);
        assert!(table.rows.iter().all(|r| r.ell_hat.abs() < 1e-12));
    }
}
