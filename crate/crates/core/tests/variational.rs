use pamlab::variational::{
    dirichlet_energy, f_coord, gk_interaction, interaction, objective, solve_maximizer, FunctionalKind, FunctionalSpec,
    Init, SolveOptions,
};
use pamlab::{Field, Grid, KernelSpec, MollifiedKernelSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn white1() -> KernelSpec {
    KernelSpec::white(1, 1.0).unwrap()
}

fn grid1() -> Grid {
    Grid::new(1, 256, 12.0).unwrap()
}

/// A smooth positive unit vector: a random mixture of Gaussian bumps.
fn random_profile(grid: Grid, rng: &mut impl Rng) -> Field {
    let bumps: Vec<(f64, f64, f64)> =
        (0..3).map(|_| (rng.gen_range(0.2..1.0), rng.gen_range(-2.0..2.0), rng.gen_range(0.5..2.5))).collect();
    Field::from_fn(grid, |x| {
        bumps
            .iter()
            .map(|(a, c, w)| a * (-x.iter().map(|v| (v - c) * (v - c)).sum::<f64>() / (2.0 * w * w)).exp())
            .sum()
    })
    .normalized()
    .unwrap()
}

#[test]
fn objective_is_interaction_minus_dirichlet_energy() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let spec = FunctionalSpec::new(FunctionalKind::SubM, white1(), 0.7).unwrap();
    for _ in 0..5 {
        let f = random_profile(grid1(), &mut rng);
        let want = interaction(&f, &white1(), 0.0).unwrap() - dirichlet_energy(&f, 0.7);
        assert!((objective(&spec, &f).unwrap() - want).abs() <= 1e-12);
    }
}

#[test]
fn interaction_decreases_with_mollification_and_is_bounded_by_the_peak() {
    let kernel = KernelSpec::riesz(1, 1.0, 0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..5 {
        let f = random_profile(grid1(), &mut rng);
        let values: Vec<f64> = [0.0, 0.25, 0.5, 1.0, 2.0].iter().map(|&c| interaction(&f, &kernel, c).unwrap()).collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
        let peak = MollifiedKernelSpec::new(kernel.clone(), 1.0).unwrap().at_origin();
        assert!(values[3] <= 0.5 * peak);
    }
}

#[test]
fn white_hartree_maximizer_is_a_positive_symmetric_unit_vector() {
    let spec = FunctionalSpec::new(FunctionalKind::SubM, white1(), 1.0).unwrap();
    let r = solve_maximizer(&spec, Grid::new(1, 512, 20.0).unwrap(), &SolveOptions::default()).unwrap();
    let f = &r.maximizer;
    assert!((f.l2_norm() - 1.0).abs() <= 1e-10);
    assert!(f.values().iter().all(|v| *v >= 0.0));
    assert!((objective(&spec, f).unwrap() - r.value).abs() <= 1e-10 * r.value);
    assert!((r.value - 1.0 / 48.0).abs() <= 0.01 / 48.0, "M = {}", r.value);
    assert!(f_coord(f).unwrap().l2_distance(f) <= 0.01);
}

#[test]
fn maximizer_saturates_the_interpolation_inequality() {
    // With J(f_λ) = λ^ω J(f) and S(f_λ) = λ² S(f) along L²-preserving dilations,
    // M = sup(J − S) forces J(f) ≤ C S(f)^{ω/2} for every unit f, with equality at the maximizer.
    let kernel = KernelSpec::riesz(1, 1.0, 0.5).unwrap();
    let omega = 0.5;
    let grid = Grid::new(1, 256, 12.0).unwrap();
    let spec = FunctionalSpec::new(FunctionalKind::SubM, kernel.clone(), 1.0).unwrap();
    let r = solve_maximizer(&spec, grid, &SolveOptions::default()).unwrap();
    let k = (omega / 2.0f64).powf(omega / (2.0 - omega)) * (1.0 - omega / 2.0);
    let c = (r.value / k).powf((2.0 - omega) / 2.0);
    let ratio = |f: &Field| interaction(f, &kernel, 0.0).unwrap() / dirichlet_energy(f, 1.0).powf(omega / 2.0);
    let at_max = ratio(&r.maximizer);
    assert!((at_max - c).abs() <= 1e-3 * c, "{at_max} vs {c}");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let f = random_profile(grid, &mut rng);
        assert!(ratio(&f) <= c * (1.0 + 1e-6));
    }
}

#[test]
fn restricted_infimum_decreases_to_the_full_one() {
    let grid = Grid::new(1, 512, 30.0).unwrap();
    let full = solve_maximizer(&FunctionalSpec::new(FunctionalKind::SubM, white1(), 1.0).unwrap(), grid, &SolveOptions::default())
        .unwrap()
        .value;
    let chi: Vec<f64> = [4.0, 8.0, 16.0, 24.0]
        .iter()
        .map(|&radius| {
            let kind = FunctionalKind::ChiR { radius, base: Box::new(FunctionalKind::SubM) };
            solve_maximizer(&FunctionalSpec::new(kind, white1(), 1.0).unwrap(), grid, &SolveOptions::default()).unwrap().value
        })
        .collect();
    assert!(chi.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{chi:?}");
    assert!(chi[0] > -full);
    assert!((chi[3] + full).abs() <= 1e-3 * full, "{chi:?} vs {}", -full);
}

#[test]
fn quadratic_interaction_gradient_matches_finite_differences() {
    let grid = Grid::new(2, 16, 4.0).unwrap();
    let sigma = vec![vec![1.3, 0.2], vec![0.2, 0.7]];
    let vol = grid.cell_volume();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let f = random_profile(grid, &mut rng);
        // δ/δf(x) of ¼∬f²(x)(x−y)ᵀΣ(x−y)f²(y) is f(x)∫(x−y)ᵀΣ(x−y)f²(y)dy.
        let grad: Vec<f64> = (0..grid.len())
            .map(|i| {
                let x = grid.point(i);
                let s: f64 = (0..grid.len())
                    .map(|j| {
                        let y = grid.point(j);
                        let z = [x[0] - y[0], x[1] - y[1]];
                        let q: f64 = (0..2).map(|a| (0..2).map(|b| z[a] * sigma[a][b] * z[b]).sum::<f64>()).sum();
                        q * f.values()[j].powi(2) * vol
                    })
                    .sum();
                f.values()[i] * s
            })
            .collect();
        // A direction tangent to the unit sphere at f.
        let mut dir: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let along: f64 = dir.iter().zip(f.values()).map(|(d, v)| d * v).sum::<f64>() * vol;
        dir.iter_mut().zip(f.values()).for_each(|(d, v)| *d -= along * v);
        let h = 1e-5;
        let shifted = |s: f64| {
            let v: Vec<f64> = f.values().iter().zip(&dir).map(|(a, b)| a + s * b).collect();
            gk_interaction(&Field::new(grid, v).unwrap(), &sigma)
        };
        let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
        let an: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum::<f64>() * vol;
        assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-3), "{fd} vs {an}");
    }
}

#[test]
fn fractional_maximizer_is_coordinatewise_symmetric() {
    let kernel = KernelSpec::fractional(1.0, vec![0.5, 0.7]).unwrap();
    let spec = FunctionalSpec::new(FunctionalKind::SubM, kernel, 1.0).unwrap();
    let opts = SolveOptions { init: Init::Gaussian { width: 1.5 }, symmetrize_every: None, ..Default::default() };
    let r = solve_maximizer(&spec, Grid::new(2, 32, 6.0).unwrap(), &opts).unwrap();
    let dist = f_coord(&r.maximizer).unwrap().l2_distance(&r.maximizer);
    assert!(dist <= 0.01, "distance to rearrangement {dist}");
}

#[test]
fn invalid_functionals_are_rejected() {
    let riesz_crit = KernelSpec::riesz(3, 1.0, 2.0).unwrap();
    assert!(FunctionalSpec::new(FunctionalKind::SubM, riesz_crit.clone(), 1.0).is_err());
    assert!(FunctionalSpec::new(FunctionalKind::CrtM { t: 1.0, p: 1.0 }, white1(), 1.0).is_err());
    assert!(FunctionalSpec::new(FunctionalKind::CrtM { t: 1.0, p: 1.0 }, riesz_crit, 1.0).is_ok());
    assert!(FunctionalSpec::new(FunctionalKind::SubM, white1(), 0.0).is_err());
    assert!(FunctionalSpec::new(FunctionalKind::ChiGK { sigma: vec![vec![1.0]; 2] }, white1(), 1.0).is_err());
}
