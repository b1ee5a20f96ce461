//! The acceptance suite: twelve oracle and property checks across all modules, each reporting
//! one pass/fail line.

use std::fmt;
use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use crate::error::Result;
use crate::grid::{Field, Grid};
use crate::kernels::{KernelSpec, MollifiedKernelSpec};
use crate::moments::{estimate_moment, intermittency_scan, replica_moment, MomentSetup, Monotonicity, ScanBudget};
use crate::noise::{mgf_linear_functional, quadratic_form, replica_rng, NoiseSampler};
use crate::pam::{feynman_kac, solve_pde, solve_spectral, PamSolveConfig};
use crate::scaling::{classify_regime, scaling_functions, PowerLaw, Regime};
use crate::variational::{
    chi_scaled, crt_threshold, f_coord, hessian_sigma, objective, solve_maximizer, steiner_symmetrize, tail_exponent,
    tail_exponent_numeric, FunctionalKind, FunctionalSpec, Init, SolveOptions,
};

pub const CRITERIA: [(usize, &str); 12] = [
    (1, "white-hartree"),
    (2, "gk-constant"),
    (3, "scaling-identity"),
    (4, "monotone-convergence"),
    (5, "critical-threshold"),
    (6, "tail-exponent"),
    (7, "solver-cross-validation"),
    (8, "gaussian-mgf"),
    (9, "replica-consistency"),
    (10, "finite-t-intermittency"),
    (11, "rearrangement"),
    (12, "regime-table"),
];

#[derive(Clone, Debug, Serialize)]
pub struct CriterionReport {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {:>2} {:<24} {} ({:.1} s)", self.id, self.name, self.detail, self.seconds)
    }
}

/// Outcome of one check before timing is attached.
struct Check {
    passed: bool,
    detail: String,
}

impl Check {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self { passed, detail: detail.into() }
    }
}

/// Runs criterion `id` (1..=12). `workers` bounds the threads of the Monte Carlo stages.
pub fn run_criterion(id: usize, workers: usize, seed: u64) -> CriterionReport {
    let name = CRITERIA.iter().find(|c| c.0 == id).map_or("unknown", |c| c.1);
    let start = Instant::now();
    let outcome = match id {
        1 => white_hartree(),
        2 => gk_constant(),
        3 => scaling_identity(),
        4 => monotone_convergence(),
        5 => critical_threshold(),
        6 => tail_exponent_identity(),
        7 => solver_cross_validation(workers, seed),
        8 => gaussian_mgf(seed),
        9 => replica_consistency(workers, seed),
        10 => finite_t_intermittency(workers, seed),
        11 => rearrangement(seed),
        12 => regime_table(),
        _ => Ok(Check::new(false, format!("no criterion {id}"))),
    };
    let seconds = start.elapsed().as_secs_f64();
    let (mut passed, mut detail) = match outcome {
        Ok(c) => (c.passed, c.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    if let Some(limit) = time_limit(id) {
        if seconds > limit {
            passed = false;
            detail.push_str(&format!("; exceeded {limit} s"));
        }
    }
    CriterionReport { id, name, passed, detail, seconds }
}

pub fn run_all(workers: usize, seed: u64) -> Vec<CriterionReport> {
    CRITERIA.iter().map(|(id, _)| run_criterion(*id, workers, seed)).collect()
}

fn time_limit(id: usize) -> Option<f64> {
    match id {
        1 | 2 => Some(30.0),
        6 => Some(1.0),
        7 => Some(120.0),
        _ => None,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn white_hartree() -> Result<Check> {
    let grid = Grid::new(1, 512, 20.0)?;
    let spec = FunctionalSpec::new(FunctionalKind::SubM, KernelSpec::white(1, 1.0)?, 1.0)?;
    let r = solve_maximizer(&spec, grid, &SolveOptions::default())?;
    let exact = Field::from_fn(grid, |x| 1.0 / (2.0 * 2f64.sqrt()) / (x[0] / 4.0).cosh());
    let dist = r.maximizer.centered().l2_distance(&exact) / exact.l2_norm();
    let err = rel(r.value, 1.0 / 48.0);
    Ok(Check::new(err <= 0.01 && dist <= 0.02, format!("M = {:.6} (rel err {err:.2e}), L2 dist to sech {dist:.2e}", r.value)))
}

fn gk_constant() -> Result<Check> {
    let grid = Grid::new(1, 512, 20.0)?;
    let mk = MollifiedKernelSpec::new(KernelSpec::white(1, 1.0)?, 1.0)?;
    let sigma = hessian_sigma(&mk)?;
    let exact_sigma = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let spec = FunctionalSpec::new(FunctionalKind::ChiGK { sigma: sigma.clone() }, KernelSpec::white(1, 1.0)?, 1.0)?;
    let r = solve_maximizer(&spec, grid, &SolveOptions::default())?;
    let target = (exact_sigma / 2.0).sqrt();
    let err = rel(r.value, target);
    let sigma_err = rel(sigma[0][0], exact_sigma);
    Ok(Check::new(
        err <= 0.01 && sigma_err <= 0.01,
        format!("chi = {:.6} vs {target:.6} (rel err {err:.2e}), Sigma rel err {sigma_err:.2e}", r.value),
    ))
}

fn scaling_identity() -> Result<Check> {
    let grid = Grid::new(1, 2048, 40.0)?;
    let spec = FunctionalSpec::new(FunctionalKind::SubM, KernelSpec::riesz(1, 1.0, 0.5)?, 1.0)?;
    let opts = SolveOptions::default();
    let base = chi_scaled(&spec, 1.0, grid, &opts)?;
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for c in [0.5f64, 2.0] {
        let ratio = chi_scaled(&spec, c, grid, &opts)? / base;
        let err = rel(ratio, c.powf(4.0 / 1.5));
        worst = worst.max(err);
        detail.push(format!("c={c}: ratio {ratio:.6} (rel err {err:.2e})"));
    }
    Ok(Check::new(worst <= 0.01, detail.join(", ")))
}

fn monotone_convergence() -> Result<Check> {
    let grid = Grid::new(1, 2048, 40.0)?;
    let kernel = KernelSpec::riesz(1, 1.0, 0.5)?;
    let opts = SolveOptions::default();
    let m = solve_maximizer(&FunctionalSpec::new(FunctionalKind::SubM, kernel.clone(), 1.0)?, grid, &opts)?.value;
    // Optimizer tolerance on the value: residual tol times a unit-norm perturbation.
    let slack = 1e-6;
    let mut values = Vec::new();
    for frak_c in [0.8, 0.4, 0.2, 0.1, 0.05] {
        let spec = FunctionalSpec::new(FunctionalKind::SubMc { frak_c, p: 1.0 }, kernel.clone(), 1.0)?;
        values.push(solve_maximizer(&spec, grid, &opts)?.value);
    }
    let gaps: Vec<f64> = values.iter().map(|v| m - v).collect();
    let nondecreasing = values.windows(2).all(|w| w[1] >= w[0] - slack);
    let shrinking = gaps.windows(2).all(|w| w[1] < w[0]);
    let below = gaps.iter().all(|g| *g >= -slack);
    let list: Vec<String> = gaps.iter().map(|g| format!("{g:.2e}")).collect();
    Ok(Check::new(nondecreasing && shrinking && below, format!("M = {m:.6}, gaps [{}]", list.join(", "))))
}

fn critical_threshold() -> Result<Check> {
    let kernel = KernelSpec::white(2, 1.0)?;
    let g_opts = SolveOptions { tol: 1e-10, max_iter: 2000, ..Default::default() };
    let threshold = crt_threshold(&kernel, 1.0, 1.0, Grid::new(2, 128, 12.0)?, &g_opts)?;
    let grid = Grid::new(2, 128, 16.0)?;
    let opts = SolveOptions { init: Init::Gaussian { width: 2.0 }, ..Default::default() };
    let value = |p: f64| -> Result<f64> {
        let spec = FunctionalSpec::new(FunctionalKind::CrtM { t: 1.0, p }, kernel.clone(), 1.0)?;
        Ok(solve_maximizer(&spec, grid, &opts)?.value)
    };
    let below = value(0.5 * threshold)?;
    let q = 2.0 * threshold;
    let above = value(q)?;
    let above2 = value(2.0 * q)?;
    let increase = above2 - above - (above - 1e-3);
    let passed = below <= 1e-3 && above >= 10.0 * 1e-3 && increase >= 0.0;
    Ok(Check::new(
        passed,
        format!("threshold p = {threshold:.4}; M at 0.5x {below:.3e}, 2x {above:.4}, 4x {above2:.4}"),
    ))
}

fn tail_exponent_identity() -> Result<Check> {
    let mut worst = 0.0f64;
    for &theta in &[0.1, 0.5, 1.0, 3.0, 10.0] {
        for &omega in &[0.1, 0.5, 1.0, 1.5, 1.9] {
            for &m in &[0.05, 0.3, 1.0, 4.0] {
                let closed = tail_exponent(theta, omega, m)?;
                let numeric = tail_exponent_numeric(theta, omega, m);
                worst = worst.max((closed - numeric).abs() / closed.abs().max(1.0));
            }
        }
    }
    Ok(Check::new(worst <= 1e-8, format!("100 points, max error {worst:.2e}")))
}

fn solver_cross_validation(workers: usize, seed: u64) -> Result<Check> {
    let mk = MollifiedKernelSpec::new(KernelSpec::white(1, 1.0)?, 0.5)?;
    let grid = Grid::new(1, 256, 8.0)?;
    let sampler = NoiseSampler::new(&mk, grid)?;
    let config = PamSolveConfig { dt: 1e-3, n_paths: 10_000, workers, ..Default::default() };
    let mut worst_rel = 0.0f64;
    let mut worst_z = 0.0f64;
    for i in 0..10 {
        let v = sampler.sample(seed, i);
        let pde = solve_pde(&v, 1.0, &config)?;
        let spectral = solve_spectral(&v, 1.0, 1.0)?;
        worst_rel = worst_rel.max(pde.l2_distance(&spectral) / spectral.l2_norm());
        let fk = feynman_kac(&v, 1.0, &[0.0], &config, seed.wrapping_add(1000 + i), Some(8.0))?;
        let u0 = pde.interpolate(&[0.0]);
        worst_z = worst_z.max((fk.estimate - u0).abs() / fk.stderr);
    }
    Ok(Check::new(
        worst_rel <= 1e-4 && worst_z <= 3.0,
        format!("PDE vs spectral max rel err {worst_rel:.2e}, Feynman-Kac max |z| {worst_z:.2}"),
    ))
}

fn gaussian_mgf(seed: u64) -> Result<Check> {
    let mk = MollifiedKernelSpec::new(KernelSpec::white(1, 1.0)?, 0.5)?;
    let grid = Grid::new(1, 64, 4.0)?;
    let sampler = NoiseSampler::new(&mk, grid)?;
    let n_samples = 100_000u64;
    let mut rng = replica_rng(seed, u64::MAX);
    let mut measures = Vec::new();
    for _ in 0..5 {
        let atoms = rng.gen_range(2..6);
        let nodes: Vec<usize> = (0..atoms).map(|_| rng.gen_range(8..56)).collect();
        let weights: Vec<f64> = (0..atoms).map(|_| rng.gen_range(0.1..1.0)).collect();
        measures.push((nodes, weights));
    }
    let mut sums = vec![(0.0, 0.0); measures.len()];
    let mut lambdas = Vec::new();
    for (nodes, weights) in &measures {
        let points: Vec<Vec<f64>> = nodes.iter().map(|&k| vec![grid.coord(k)]).collect();
        // Unit variance of the exponent keeps the estimator's relative error near 1/√n.
        lambdas.push(1.0 / quadratic_form(&mk, &points, weights).sqrt());
    }
    for s in 0..n_samples {
        let xi = sampler.sample(seed, s);
        for (((nodes, weights), acc), lambda) in measures.iter().zip(sums.iter_mut()).zip(&lambdas) {
            let pairing: f64 = nodes.iter().zip(weights).map(|(&k, w)| w * xi.values()[k]).sum();
            let e = (lambda * pairing).exp();
            acc.0 += e;
            acc.1 += e * e;
        }
    }
    let n = n_samples as f64;
    let mut worst_z = 0.0f64;
    for (((nodes, weights), acc), lambda) in measures.iter().zip(&sums).zip(&lambdas) {
        let points: Vec<Vec<f64>> = nodes.iter().map(|&k| vec![grid.coord(k)]).collect();
        let exact = mgf_linear_functional(&mk, &points, weights, *lambda);
        let mean = acc.0 / n;
        let se = ((acc.1 / n - mean * mean) / (n - 1.0)).sqrt();
        worst_z = worst_z.max((mean - exact).abs() / se);
    }
    Ok(Check::new(worst_z <= 3.0, format!("5 measures, 1e5 samples, max |z| {worst_z:.2}")))
}

fn replica_consistency(workers: usize, seed: u64) -> Result<Check> {
    let mk = MollifiedKernelSpec::new(KernelSpec::white(2, 1.0)?, 0.5)?;
    let t = 1.0;
    let h = t * t * mk.at_origin() / 2.0;
    let setup = MomentSetup {
        grid: Grid::new(2, 32, 5.0)?,
        x: vec![0.0, 0.0],
        n_noise: 1000,
        solver: PamSolveConfig { dt: 0.02, workers, ..Default::default() },
        seed,
    };
    let direct = estimate_moment(&mk, t, 1.0, &setup)?;
    let direct_se = direct.value * direct.stderr_log;
    let replica = replica_moment(&mk, t, 1, 10_000, 0.01, seed.wrapping_add(1), workers)?;
    let combined = (direct_se.powi(2) + replica.stderr.powi(2)).sqrt();
    let z = (direct.value - replica.estimate).abs() / combined;
    Ok(Check::new(
        z <= 3.0 && h <= 5.0,
        format!("cumulant {h:.3}; noise average {:.4} ± {direct_se:.4}, replica {:.4} ± {:.4}, |z| {z:.2}", direct.value, replica.estimate, replica.stderr),
    ))
}

fn finite_t_intermittency(workers: usize, seed: u64) -> Result<Check> {
    let mk = MollifiedKernelSpec::new(KernelSpec::white(2, 1.0)?, 0.5)?;
    let kappa = 0.05;
    let t = 1.0;
    let threshold = crt_threshold(
        &KernelSpec::white(2, 1.0)?,
        kappa,
        t,
        Grid::new(2, 64, 10.0)?,
        &SolveOptions { tol: 1e-10, max_iter: 2000, ..Default::default() },
    )?;
    let budget = ScanBudget {
        grid: Grid::new(2, 32, 1.5)?,
        n_noise: 1000,
        solver: PamSolveConfig { dt: 0.02, kappa, workers, ..Default::default() },
        seed,
        n_bootstrap: 1000,
        rate_exponent: 2.0,
    };
    let table = intermittency_scan(&mk, t, &[0.5, 0.35, 0.25], &[1.0, 2.0, 3.0], &budget)?;
    let smallest: Vec<String> =
        table.rows.iter().filter(|r| r.epsilon == 0.25).map(|r| format!("{:.4}", r.ell_hat_over_p)).collect();
    let (passed, confidence) = match table.monotonicity {
        Monotonicity::Increasing { confidence } => (confidence >= 0.95 && threshold < 1.0, confidence),
        Monotonicity::NotIncreasing { confidence } => (false, confidence),
        Monotonicity::Flat => (false, 0.0),
    };
    Ok(Check::new(
        passed,
        format!("p threshold {threshold:.3} < 1; ell/p at eps=0.25 [{}], confidence {confidence:.3}", smallest.join(", ")),
    ))
}

/// Smooth nonnegative unit-norm field: a few Gaussian bumps at random centers.
fn random_bumps(grid: Grid, rng: &mut impl Rng) -> Result<Field> {
    let r = grid.radius();
    let bumps: Vec<(f64, f64, f64, f64)> = (0..rng.gen_range(2..5))
        .map(|_| (rng.gen_range(-0.5 * r..0.5 * r), rng.gen_range(-0.5 * r..0.5 * r), rng.gen_range(0.5..1.5), rng.gen_range(0.2..1.0)))
        .collect();
    Field::from_fn(grid, |x| {
        bumps.iter().map(|(cx, cy, w, a)| a * (-((x[0] - cx).powi(2) + (x[1] - cy).powi(2)) / (w * w)).exp()).sum()
    })
    .normalized()
}

fn rearrangement(seed: u64) -> Result<Check> {
    let kernel = KernelSpec::fractional(1.0, vec![0.5, 0.7])?;
    let spec = FunctionalSpec::new(FunctionalKind::SubM, kernel, 1.0)?;
    // Slack per unit spacing; the slack halves with the spacing.
    let slack_per_h = 0.05;
    let mut norm_err = 0.0f64;
    let mut violations = Vec::new();
    for n in [32usize, 64] {
        let grid = Grid::new(2, n, 6.0)?;
        let delta = slack_per_h * grid.spacing();
        let mut rng = replica_rng(seed, n as u64);
        let mut worst = 0.0f64;
        for _ in 0..50 {
            let f = random_bumps(grid, &mut rng)?;
            for axis in 0..2 {
                let s = steiner_symmetrize(&f, axis)?;
                norm_err = norm_err.max((s.l2_norm() - f.l2_norm()).abs()).max((s.lp_norm(4.0) - f.lp_norm(4.0)).abs());
            }
            let g = f_coord(&f)?;
            worst = worst.max(objective(&spec, &f)? - objective(&spec, &g)?);
        }
        violations.push((n, worst, delta));
    }
    let within = violations.iter().all(|(_, v, d)| *v <= *d);
    let list: Vec<String> = violations.iter().map(|(n, v, d)| format!("n={n}: loss {v:.2e} <= {d:.2e}")).collect();
    Ok(Check::new(norm_err <= 1e-12 && within, format!("norm err {norm_err:.1e}; {}", list.join(", "))))
}

/// Scale functions for `(ε, t) = (2^a, 2^b)` from exact rational exponents of two; `ω = w/4`.
fn table_oracle(row: usize, a: i32, b: i32, w: i32, g: i32) -> (f64, f64, f64) {
    let two = |num: i32, den: i32| -> f64 {
        assert_eq!(num % den, 0, "lattice point must give an integer power of two");
        2f64.powi(num / den)
    };
    match row {
        // Sub-1 and Sup: α = ε^{(2+ω)/4} t^{-1/4}, β = ε^{-(2+ω)/2} t^{3/2}, H = ε^{-ω} t² γ₁(0)/2
        0 | 5 => (two(a * (8 + w) - 4 * b, 16), two(-a * (8 + w) + 12 * b, 8), two(-w * a + 8 * b + 4 * g - 4, 4)),
        // Sub-2, Sub-3: α = t^{-1/(2-ω)}, β = t^{(4-ω)/(2-ω)}, H = 0
        1 | 2 => (two(-4 * b, 8 - w), two(b * (16 - w), 8 - w), 0.0),
        // Crt-1: α = ε t^{-1/4}, β = ε^{-2} t^{3/2}, H = ε^{-2} t² γ₁(0)/2
        3 => (two(4 * a - b, 4), two(-4 * a + 3 * b, 2), two(-2 * a + 2 * b + g - 1, 1)),
        // Crt-2: α = ε, β = ε^{-2} t, H = 0
        _ => (two(a, 1), two(-2 * a + b, 1), 0.0),
    }
}

fn regime_table() -> Result<Check> {
    // (row, ω in quarters, e descriptor, t descriptor, exponent lattice (a, b))
    type Case = (usize, i32, PowerLaw, PowerLaw, [(i32, i32); 5]);
    let cases: [Case; 6] = [
        (0, 4, PowerLaw::constant(1.0), PowerLaw::new(1.0, 1.0), [(0, 4), (-4, 8), (-8, 4), (-4, 12), (-12, 16)]),
        (1, 4, PowerLaw::new(0.5, -1.0), PowerLaw::new(2.0, 1.0), [(0, 1), (0, 2), (0, 3), (-1, 5), (-2, 8)]),
        (2, 2, PowerLaw::new(1.0, -1.0), PowerLaw::new(1.0, 0.5), [(0, 3), (0, 6), (-1, 9), (-2, 12), (-4, 15)]),
        (3, 8, PowerLaw::new(1.0, -1.0), PowerLaw::new(3.0, 2.0), [(0, 4), (-1, 4), (-2, 8), (-3, 0), (-5, 12)]),
        (4, 8, PowerLaw::new(0.25, -0.5), PowerLaw::constant(2.0), [(0, 1), (-1, 1), (-2, 0), (-3, 2), (-4, 1)]),
        (5, 12, PowerLaw::new(1.0, -1.0), PowerLaw::constant(1.0), [(0, 4), (-4, 4), (-8, 8), (-4, 0), (-12, 12)]),
    ];
    let mut failures = Vec::new();
    let mut count = 0;
    for (row, wq, e, t, lattice) in cases {
        let omega = wq as f64 / 4.0;
        let regime = classify_regime(omega, e, t)?;
        let expected_tag = match row {
            0 => Regime::Sub1,
            1 => Regime::Sub2 { frak_c: 0.5 * 2f64.powf(1.0 / (2.0 - omega)) },
            2 => Regime::Sub3,
            3 => Regime::Crt1,
            4 => Regime::Crt2 { limit_t: 2.0 },
            _ => Regime::Sup,
        };
        for (k, (a, b)) in lattice.into_iter().enumerate() {
            count += 1;
            let gamma_exp = (k % 2) as i32;
            let (eps, time, gamma1) = (2f64.powi(a), 2f64.powi(b), 2f64.powi(gamma_exp));
            let got = scaling_functions(&regime, eps, time, gamma1, omega);
            let want = table_oracle(row, a, b, wq, gamma_exp);
            if regime != expected_tag || got.alpha != want.0 || got.beta != want.1 || got.h != want.2 {
                failures.push(format!("{} at (2^{a}, 2^{b})", regime.name()));
            }
        }
    }
    let detail = if failures.is_empty() { format!("{count} cases exact") } else { format!("mismatches: {}", failures.join("; ")) };
    Ok(Check::new(failures.is_empty() && count == 30, detail))
}
