use std::f64::consts::PI;

use pamlab::kernels::{mollifier, mollifier_hat, riesz_fourier_constant};
use pamlab::{KernelSpec, MollifiedKernelSpec};
use proptest::prelude::*;
use statrs::function::gamma::gamma;

/// `E|εZ|^{-ω}` for a standard Gaussian `Z` in `R^d`.
fn gaussian_negative_moment(d: f64, omega: f64, eps: f64) -> f64 {
    eps.powf(-omega) * 2f64.powf(-omega / 2.0) * gamma((d - omega) / 2.0) / gamma(d / 2.0)
}

/// Composite Simpson rule with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// `∫ γ̂(ξ) p̂_ε(ξ) e^{2πixξ} dξ` for the 1-D Riesz kernel, after `ξ = v^{1/ω}`.
fn riesz_1d_by_inverse_transform(omega: f64, eps: f64, x: f64) -> f64 {
    let c = riesz_fourier_constant(1.0, omega);
    let vmax = (40.0 / (2.0 * PI * PI * eps * eps)).powf(omega / 2.0);
    let g = |v: f64| {
        let xi = v.powf(1.0 / omega);
        (-2.0 * PI * PI * eps * eps * xi * xi).exp() * (2.0 * PI * x * xi).cos()
    };
    2.0 * c / omega * simpson(g, 0.0, vmax, 20_000)
}

#[test]
fn riesz_mollified_value_at_origin_matches_gaussian_moment() {
    for (d, omega) in [(1usize, 0.5), (2, 1.0), (3, 1.0), (3, 2.5)] {
        for eps in [0.25, 1.0, 3.0] {
            let mk = MollifiedKernelSpec::new(KernelSpec::riesz(d, 1.0, omega).unwrap(), eps).unwrap();
            let got = mk.mollified_gamma(&vec![0.0; d]).unwrap();
            let want = gaussian_negative_moment(d as f64, omega, eps);
            assert!((got - want).abs() <= 1e-8 * want, "d={d} omega={omega} eps={eps}: {got} vs {want}");
        }
    }
}

#[test]
fn riesz_fourier_constant_reproduces_kernel_through_inverse_transform() {
    let mk = MollifiedKernelSpec::new(KernelSpec::riesz(1, 1.0, 0.5).unwrap(), 1.0).unwrap();
    for x in [0.0, 0.3, 1.0, 2.5] {
        let got = mk.mollified_gamma(&[x]).unwrap();
        let want = riesz_1d_by_inverse_transform(0.5, 1.0, x);
        assert!((got - want).abs() <= 1e-6 * want.abs().max(1e-3), "x={x}: {got} vs {want}");
    }
}

#[test]
fn white_mollified_kernel_is_the_mollifier() {
    for d in 1..=3 {
        let eps = 0.7;
        let mk = MollifiedKernelSpec::new(KernelSpec::white(d, 1.3).unwrap(), eps).unwrap();
        let x: Vec<f64> = (0..d).map(|a| 0.2 + 0.3 * a as f64).collect();
        let r2: f64 = x.iter().map(|c| c * c).sum();
        let want = 1.69 * (2.0 * PI * eps * eps).powf(-(d as f64) / 2.0) * (-r2 / (2.0 * eps * eps)).exp();
        let got = mk.mollified_gamma(&x).unwrap();
        assert!((got - want).abs() <= 1e-12 * want, "d={d}: {got} vs {want}");
    }
}

#[test]
fn fractional_mollified_kernel_factorizes() {
    let eps = 0.5;
    let mk = MollifiedKernelSpec::new(KernelSpec::fractional(1.0, vec![0.3, 0.6]).unwrap(), eps).unwrap();
    let a = MollifiedKernelSpec::new(KernelSpec::riesz(1, 1.0, 0.3).unwrap(), eps).unwrap();
    let b = MollifiedKernelSpec::new(KernelSpec::riesz(1, 1.0, 0.6).unwrap(), eps).unwrap();
    for x in [[0.0, 0.0], [0.4, -1.1], [2.0, 0.7]] {
        let got = mk.mollified_gamma(&x).unwrap();
        let want = a.mollified_gamma(&x[..1]).unwrap() * b.mollified_gamma(&x[1..]).unwrap();
        assert!((got - want).abs() <= 1e-8 * want, "{x:?}: {got} vs {want}");
    }
}

#[test]
fn mollifier_transform_pair() {
    let eps = 0.4;
    let xi = [0.3, -0.2];
    // ∫ p_ε(x) cos(2πxξ) dx factorizes; one-dimensional Simpson in each coordinate.
    let one = |k: f64| simpson(|x| mollifier(eps, &[x]) * (2.0 * PI * x * k).cos(), -6.0, 6.0, 4000);
    let want = one(xi[0]) * one(xi[1]);
    assert!((mollifier_hat(eps, &xi) - want).abs() < 1e-12);
    assert!((mollifier_hat(eps, &[0.0, 0.0]) - 1.0).abs() < 1e-15);
}

#[test]
fn constructors_reject_out_of_range_parameters() {
    assert!(KernelSpec::riesz(2, 1.0, 2.0).is_err());
    assert!(KernelSpec::riesz(1, 1.0, 0.0).is_err());
    assert!(KernelSpec::fractional(1.0, vec![0.5, 1.0]).is_err());
    assert!(KernelSpec::white(4, 1.0).is_err());
    assert!(MollifiedKernelSpec::new(KernelSpec::white(1, 1.0).unwrap(), 0.0).is_err());
}

fn kernel_strategy() -> impl Strategy<Value = KernelSpec> {
    prop_oneof![
        (1usize..=3, 0.05f64..0.95).prop_map(|(d, f)| KernelSpec::riesz(d, 1.0, f * d as f64).unwrap()),
        proptest::collection::vec(0.05f64..0.95, 1..=3).prop_map(|w| KernelSpec::fractional(1.0, w).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_and_transform_are_homogeneous(k in kernel_strategy(), lambda in 0.1f64..10.0, seed in proptest::collection::vec(0.1f64..3.0, 3)) {
        let d = k.dimension;
        let x = &seed[..d];
        let w = k.scaling_exponent();
        let sx: Vec<f64> = x.iter().map(|c| lambda * c).collect();
        let g = k.gamma_value(x).unwrap();
        prop_assert!((k.gamma_value(&sx).unwrap() - lambda.powf(-w) * g).abs() <= 1e-10 * lambda.powf(-w) * g);
        let h = k.gamma_hat(x).unwrap();
        let want = lambda.powf(w - d as f64) * h;
        prop_assert!((k.gamma_hat(&sx).unwrap() - want).abs() <= 1e-10 * want);
    }

    #[test]
    fn mollified_kernel_scales_with_epsilon(k in kernel_strategy(), eps in 0.1f64..5.0, seed in proptest::collection::vec(-2.0f64..2.0, 3)) {
        let d = k.dimension;
        let x = &seed[..d];
        let w = k.scaling_exponent();
        let m1 = MollifiedKernelSpec::new(k.clone(), 1.0).unwrap();
        let me = MollifiedKernelSpec::new(k, eps).unwrap();
        let y: Vec<f64> = x.iter().map(|c| c / eps).collect();
        let want = eps.powf(-w) * m1.mollified_gamma(&y).unwrap();
        let got = me.mollified_gamma(x).unwrap();
        prop_assert!((got - want).abs() <= 1e-7 * want, "{} vs {}", got, want);
    }

    #[test]
    fn spectral_density_is_nonnegative_and_decreasing_in_epsilon(k in kernel_strategy(), e1 in 0.1f64..2.0, de in 0.01f64..2.0, seed in proptest::collection::vec(-3.0f64..3.0, 3)) {
        let d = k.dimension;
        let xi = &seed[..d];
        let a = MollifiedKernelSpec::new(k.clone(), e1).unwrap().spectral_density(xi).unwrap();
        let b = MollifiedKernelSpec::new(k, e1 + de).unwrap().spectral_density(xi).unwrap();
        prop_assert!(a >= 0.0 && b >= 0.0);
        prop_assert!(b <= a);
    }

    #[test]
    fn mollified_value_at_origin_decreases_in_epsilon(k in kernel_strategy(), e1 in 0.1f64..2.0, de in 0.01f64..2.0) {
        let d = k.dimension;
        let a = MollifiedKernelSpec::new(k.clone(), e1).unwrap().mollified_gamma(&vec![0.0; d]).unwrap();
        let b = MollifiedKernelSpec::new(k, e1 + de).unwrap().mollified_gamma(&vec![0.0; d]).unwrap();
        prop_assert!(b < a);
    }
}
