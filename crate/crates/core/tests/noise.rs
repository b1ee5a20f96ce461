use pamlab::noise::{mgf_linear_functional, quadratic_form, rescale_noise, NoiseSampler, RescaledNoiseParams};
use pamlab::scaling::Regime;
use pamlab::{Grid, KernelSpec, MollifiedKernelSpec};

/// Empirical covariance of the centre node with nodes `lags` cells to the right.
fn empirical_covariance(sampler: &NoiseSampler, pairs: usize, lags: &[usize], seed: u64) -> (usize, Vec<f64>) {
    let n = sampler.grid().points_per_dim();
    let c = n / 2;
    let mut acc = vec![0.0; lags.len()];
    for r in 0..pairs {
        let (a, b) = sampler.sample_pair(seed, r as u64);
        for f in [a, b] {
            let v = f.values();
            for (s, &l) in acc.iter_mut().zip(lags) {
                *s += v[c] * v[c + l];
            }
        }
    }
    let count = 2 * pairs;
    (count, acc.into_iter().map(|s| s / count as f64).collect())
}

#[test]
fn riesz_noise_covariance_matches_kernel() {
    let mk = MollifiedKernelSpec::new(KernelSpec::riesz(1, 1.0, 0.5).unwrap(), 0.25).unwrap();
    let grid = Grid::new(1, 64, 4.0).unwrap();
    let sampler = NoiseSampler::new(&mk, grid).unwrap();
    let lags = [0, 1, 2, 4, 8, 16];
    let (count, cov) = empirical_covariance(&sampler, 5000, &lags, 11);
    let g0 = mk.at_origin();
    let tol = 5.0 / (count as f64).sqrt() * g0;
    for (&l, c) in lags.iter().zip(&cov) {
        let want = mk.covariance(&[l as f64 * grid.spacing()]);
        assert!((c - want).abs() <= tol, "lag {l}: {c} vs {want} (tol {tol})");
    }
}

#[test]
fn white_noise_covariance_matches_kernel_in_two_dimensions() {
    let mk = MollifiedKernelSpec::new(KernelSpec::white(2, 1.0).unwrap(), 0.5).unwrap();
    let grid = Grid::new(2, 16, 2.0).unwrap();
    let sampler = NoiseSampler::new(&mk, grid).unwrap();
    let n = grid.points_per_dim();
    let c = grid.flat_index(&[n / 2, n / 2]);
    let others = [(0usize, 0usize), (1, 0), (0, 1), (1, 1), (2, 1), (3, 0)];
    let mut acc = vec![0.0; others.len()];
    let pairs = 5000;
    for r in 0..pairs {
        let (a, b) = sampler.sample_pair(3, r);
        for f in [a, b] {
            for (s, &(i, j)) in acc.iter_mut().zip(&others) {
                *s += f.values()[c] * f.values()[grid.flat_index(&[n / 2 + i, n / 2 + j])];
            }
        }
    }
    let count = 2.0 * pairs as f64;
    let tol = 5.0 / count.sqrt() * mk.at_origin();
    for (s, &(i, j)) in acc.iter().zip(&others) {
        let want = mk.covariance(&[i as f64 * grid.spacing(), j as f64 * grid.spacing()]);
        assert!((s / count - want).abs() <= tol, "offset ({i},{j}): {} vs {want}", s / count);
    }
}

#[test]
fn noise_draws_are_centred() {
    let mk = MollifiedKernelSpec::new(KernelSpec::riesz(1, 1.0, 0.5).unwrap(), 0.25).unwrap();
    let sampler = NoiseSampler::new(&mk, Grid::new(1, 64, 4.0).unwrap()).unwrap();
    let draws = 4000;
    let mean: f64 = (0..draws).map(|r| sampler.sample(5, r).values()[20]).sum::<f64>() / draws as f64;
    let sd = mk.at_origin().sqrt();
    assert!(mean.abs() <= 4.0 * sd / (draws as f64).sqrt(), "mean {mean}");
}

#[test]
fn rescaled_field_has_dilated_variance() {
    let eps = 0.25;
    let mk = MollifiedKernelSpec::new(KernelSpec::riesz(1, 1.0, 0.5).unwrap(), eps).unwrap();
    let sampler = NoiseSampler::new(&mk, Grid::new(1, 64, 4.0).unwrap()).unwrap();
    let params = RescaledNoiseParams::from_regime(&Regime::Sub1, 1.0, 1.0, eps, 1.720035, 0.5);
    let target = Grid::new(1, 8, 1.0).unwrap();
    let draws = 4000;
    let shift = params.alpha.powi(2) * params.h / (params.p * params.t);
    let mut second = 0.0;
    for r in 0..draws {
        let x = rescale_noise(&sampler.sample(9, r), &params, target).unwrap();
        // Node next to the origin, with the deterministic shift undone.
        let v = x.values()[3] + shift;
        second += v * v;
    }
    let var = second / draws as f64;
    let want = params.alpha.powi(4) * mk.covariance(&[0.0]);
    // Interpolation between source nodes lowers the variance a little.
    let tol = 5.0 * want * (2.0 / draws as f64).sqrt() + 0.05 * want;
    assert!((var - want).abs() <= tol, "{var} vs {want}");
}

#[test]
fn linear_functional_mgf_is_even_and_log_quadratic() {
    let mk = MollifiedKernelSpec::new(KernelSpec::riesz(2, 1.0, 1.0).unwrap(), 0.5).unwrap();
    let points = vec![vec![0.0, 0.0], vec![0.3, -0.2], vec![1.0, 0.5], vec![-0.7, 0.1]];
    let weights = [0.4, 0.1, 0.3, 0.2];
    let q = quadratic_form(&mk, &points, &weights);
    assert!(q > 0.0);
    let log_mgf = |l: f64| mgf_linear_functional(&mk, &points, &weights, l).ln();
    for l in [0.1, 0.5, 1.0, 2.0] {
        assert!((log_mgf(l) - log_mgf(-l)).abs() <= 1e-14 * log_mgf(l));
        assert!((log_mgf(l) - 0.5 * l * l * q).abs() <= 1e-12 * log_mgf(l));
        let h = 0.05;
        assert!(log_mgf(l + h) + log_mgf(l - h) - 2.0 * log_mgf(l) > 0.0);
    }
}
