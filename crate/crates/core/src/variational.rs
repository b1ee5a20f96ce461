//! Variational constants on the `L²` unit sphere: Hartree-type suprema, the Gaussian
//! (harmonic) infimum, box-restricted and rescaled infima, and the best constant `G`.
//!
//! All problems are written as `sup_{‖f‖₂=1} Φ(f)` with `Φ(f) = N(f) − κ∫|∇f|²`, where `N` is
//! either a weighted interaction `w·𝒥_c(f) = (w/2)∬f²γ_c f²` or `−J_∞(f²)`. Infimum-type
//! constants are reported as `−sup Φ`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{CubicFft, DirichletLaplacian};
use crate::grid::{dot, Field, Grid, MAX_DIM};
use crate::kernels::{KernelFamily, KernelSpec, MollifiedKernelSpec};
use crate::quadrature::{gauss_legendre, golden_max};

/// Which constant is being computed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum FunctionalKind {
    /// `M = sup(𝒥₀ − S)`.
    SubM,
    /// `M_{𝔠,p} = sup(𝒥_c − S)` with `c = p^{1/(2−ω)} 𝔠`.
    SubMc { frak_c: f64, p: f64 },
    /// `M^crt_{t,p} = sup(pt 𝒥₁ − S)`.
    CrtM { t: f64, p: f64 },
    /// `χ = inf(S + J_∞)` with `J_∞(f²) = ¼∬f²(x−y)ᵀΣ(x−y)f²`.
    ChiGK { sigma: Vec<Vec<f64>> },
    /// The infimum of `base` over functions supported in `Q_R`.
    ChiR { radius: f64, base: Box<FunctionalKind> },
    /// `χ(c) = inf(S − c² 𝒥₀)`.
    ChiScaled { c: f64 },
    /// `G = sup ∬f²γf² / ∫|∇f|²`.
    BestG,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSpec {
    pub kind: FunctionalKind,
    pub kernel: KernelSpec,
    pub kappa: f64,
}

impl FunctionalSpec {
    pub fn new(kind: FunctionalKind, kernel: KernelSpec, kappa: f64) -> Result<Self> {
        let spec = Self { kind, kernel, kappa };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!("kappa must be positive, got {}", self.kappa)));
        }
        check_kind(&self.kind, &self.kernel)
    }

    /// Whether the reported value is an infimum (`−sup Φ`).
    pub fn is_infimum(&self) -> bool {
        matches!(self.kind, FunctionalKind::ChiGK { .. } | FunctionalKind::ChiR { .. } | FunctionalKind::ChiScaled { .. })
    }

    fn energy(&self) -> Result<Energy> {
        energy_of(&self.kind, &self.kernel)
    }

    fn support_radius(&self) -> Option<f64> {
        match &self.kind {
            FunctionalKind::ChiR { radius, .. } => Some(*radius),
            _ => None,
        }
    }
}

fn check_kind(kind: &FunctionalKind, kernel: &KernelSpec) -> Result<()> {
    let omega = kernel.scaling_exponent();
    let need = |ok: bool, what: &str| {
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("{what} (kernel has omega = {omega})")))
        }
    };
    match kind {
        FunctionalKind::SubM => need(omega < 2.0, "M needs omega < 2"),
        FunctionalKind::SubMc { frak_c, p } => {
            need(omega < 2.0, "M_{c,p} needs omega < 2")?;
            need(*frak_c > 0.0 && *p > 0.0, "M_{c,p} needs c > 0 and p > 0")
        }
        FunctionalKind::ChiScaled { c } => {
            need(omega < 2.0, "chi(c) needs omega < 2")?;
            need(*c > 0.0, "chi(c) needs c > 0")
        }
        FunctionalKind::CrtM { t, p } => {
            need(omega == 2.0, "M^crt needs omega = 2")?;
            need(*t > 0.0 && *p > 0.0, "M^crt needs t > 0 and p > 0")
        }
        FunctionalKind::BestG => need(omega == 2.0, "G needs omega = 2"),
        FunctionalKind::ChiGK { sigma } => {
            let d = kernel.dimension;
            if sigma.len() != d || sigma.iter().any(|r| r.len() != d) {
                return Err(Error::InvalidParameter(format!("Sigma must be {d}x{d}")));
            }
            Ok(())
        }
        FunctionalKind::ChiR { radius, base } => {
            need(*radius > 0.0, "chi_R needs R > 0")?;
            if matches!(**base, FunctionalKind::ChiR { .. } | FunctionalKind::BestG) {
                return Err(Error::InvalidParameter("chi_R base must be a Hartree or Gaussian functional".into()));
            }
            check_kind(base, kernel)
        }
    }
}

#[derive(Clone, Debug)]
enum Energy {
    Hartree { c: f64, weight: f64 },
    Quadratic { sigma: [[f64; MAX_DIM]; MAX_DIM] },
}

fn energy_of(kind: &FunctionalKind, kernel: &KernelSpec) -> Result<Energy> {
    let omega = kernel.scaling_exponent();
    Ok(match kind {
        FunctionalKind::SubM => Energy::Hartree { c: 0.0, weight: 1.0 },
        FunctionalKind::SubMc { frak_c, p } => Energy::Hartree { c: p.powf(1.0 / (2.0 - omega)) * frak_c, weight: 1.0 },
        FunctionalKind::CrtM { t, p } => Energy::Hartree { c: 1.0, weight: p * t },
        FunctionalKind::ChiScaled { c } => Energy::Hartree { c: 0.0, weight: c * c },
        FunctionalKind::ChiGK { sigma } => {
            let mut s = [[0.0; MAX_DIM]; MAX_DIM];
            for (a, row) in sigma.iter().enumerate() {
                for (b, v) in row.iter().enumerate() {
                    s[a][b] = *v;
                }
            }
            Energy::Quadratic { sigma: s }
        }
        FunctionalKind::ChiR { base, .. } => energy_of(base, kernel)?,
        FunctionalKind::BestG => Energy::Hartree { c: 0.0, weight: 1.0 },
    })
}

/// Starting point of the optimizer.
#[derive(Clone, Debug)]
pub enum Init {
    /// `e^{-|x|²/2w²}`, normalized.
    Gaussian { width: f64 },
    /// `Π sech(x_i / w)`, normalized.
    Sech { width: f64 },
    Field(Field),
}

impl Init {
    pub fn build(&self, grid: Grid) -> Result<Field> {
        let f = match self {
            Init::Gaussian { width } => Field::from_fn(grid, |x| (-x.iter().map(|c| c * c).sum::<f64>() / (2.0 * width * width)).exp()),
            Init::Sech { width } => Field::from_fn(grid, |x| x.iter().map(|c| 1.0 / (c / width).cosh()).product()),
            Init::Field(f) => {
                if f.grid() != &grid {
                    return Err(Error::InvalidParameter("initial field lives on a different grid".into()));
                }
                f.clone()
            }
        };
        f.normalized()
    }
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub init: Init,
    /// Initial line-search step.
    pub step: f64,
    /// Target for the sphere-projected gradient norm.
    pub tol: f64,
    pub max_iter: usize,
    /// Try a coordinatewise Steiner symmetrization of the iterate this often.
    pub symmetrize_every: Option<usize>,
    /// Allow the lattice quadrature of unmollified singular kernels.
    pub singular_quadrature: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            init: Init::Gaussian { width: 1.0 },
            step: 1.0,
            tol: 1e-6,
            max_iter: 20_000,
            symmetrize_every: Some(50),
            singular_quadrature: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub residual: f64,
    pub step: f64,
}

#[derive(Clone, Debug)]
pub struct MaximizerResult {
    pub value: f64,
    pub maximizer: Field,
    pub iterations: usize,
    pub residual: f64,
    pub trace: Vec<TraceRow>,
}

impl MaximizerResult {
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,objective,residual,step\n");
        for r in &self.trace {
            let _ = writeln!(out, "{},{:e},{:e},{:e}", r.iteration, r.objective, r.residual, r.step);
        }
        out
    }
}

/// `κ ∫|∇f|²` with forward differences and zero exterior values.
pub fn dirichlet_energy(f: &Field, kappa: f64) -> f64 {
    kappa * DirichletLaplacian::new(*f.grid()).gradient_energy(f.values())
}

/// Lattice representation of `ρ ↦ γ_c * ρ`.
///
/// The lag weights are averages of `γ_c` against the tent function `Π(1 − |s_i|/h)₊ / h^d`,
/// which is what `∬ρ(x)γ_c(x−y)ρ(y)` becomes for cellwise-constant `ρ`. The singular part at
/// the origin is integrated exactly.
pub struct LatticeKernel {
    grid: Grid,
    inner: LatticeInner,
}

enum LatticeInner {
    /// `γ_c * ρ = w ρ` (white noise, `c = 0`).
    Local(f64),
    Convolution { fft: CubicFft, transfer: Vec<f64> },
}

impl LatticeKernel {
    pub fn new(grid: Grid, kernel: &KernelSpec, c: f64) -> Result<Self> {
        if grid.dim() != kernel.dimension {
            return Err(Error::InvalidParameter("grid and kernel dimensions differ".into()));
        }
        if c < 0.0 {
            return Err(Error::InvalidParameter(format!("mollification scale must be nonnegative, got {c}")));
        }
        if c == 0.0 && matches!(kernel.family, KernelFamily::White) {
            let h = grid.spacing();
            return Ok(Self { grid, inner: LatticeInner::Local(kernel.sigma2() / h.powi(grid.dim() as i32) * grid.cell_volume()) });
        }
        let n = grid.points_per_dim();
        let m = 2 * n;
        let d = grid.dim();
        let h = grid.spacing();
        let lags = tent_kernel(kernel, c, d, n, h)?;
        // Place lag k at circular position k mod m.
        let mut data = vec![Complex64::new(0.0, 0.0); m.pow(d as u32)];
        let width = 2 * n - 1;
        for (idx, v) in lags.iter().enumerate() {
            let mut rem = idx;
            let mut flat = 0;
            let mut stride = 1;
            for _ in (0..d).rev() {
                let k = (rem % width) as i64 - (n as i64 - 1);
                rem /= width;
                let pos = k.rem_euclid(m as i64) as usize;
                flat += pos * stride;
                stride *= m;
            }
            data[flat] = Complex64::new(*v * grid.cell_volume(), 0.0);
        }
        let fft = CubicFft::new(d, m);
        fft.forward(&mut data);
        let transfer = data.iter().map(|z| z.re).collect();
        Ok(Self { grid, inner: LatticeInner::Convolution { fft, transfer } })
    }

    /// `(γ_c * ρ)` at every node.
    pub fn potential(&self, rho: &[f64]) -> Vec<f64> {
        match &self.inner {
            LatticeInner::Local(w) => rho.iter().map(|r| w * r).collect(),
            LatticeInner::Convolution { fft, transfer } => {
                let n = self.grid.points_per_dim();
                let d = self.grid.dim();
                let m = 2 * n;
                let mut buf = vec![Complex64::new(0.0, 0.0); m.pow(d as u32)];
                for (k, r) in rho.iter().enumerate() {
                    buf[padded_index(&self.grid, k, m)] = Complex64::new(*r, 0.0);
                }
                fft.forward(&mut buf);
                for (z, t) in buf.iter_mut().zip(transfer) {
                    *z *= *t;
                }
                fft.inverse(&mut buf);
                (0..rho.len()).map(|k| buf[padded_index(&self.grid, k, m)].re).collect()
            }
        }
    }
}

fn padded_index(grid: &Grid, k: usize, m: usize) -> usize {
    let idx = grid.multi_index(k);
    (0..grid.dim()).fold(0, |acc, a| acc * m + idx[a])
}

/// Tent-averaged kernel on lags `-(n-1)..=(n-1)` per axis, row-major (last axis fastest).
fn tent_kernel(kernel: &KernelSpec, c: f64, d: usize, n: usize, h: f64) -> Result<Vec<f64>> {
    let width = 2 * n - 1;
    let total = width.pow(d as u32);
    let lag = |i: usize| i as i64 - (n as i64 - 1);
    let sigma2 = kernel.sigma2();
    let separable: Option<Vec<Vec<f64>>> = match &kernel.family {
        KernelFamily::White => {
            // c > 0 here.
            let gauss = |x: f64| (-x * x / (2.0 * c * c)).exp() / (2.0 * PI * c * c).sqrt();
            let profile: Vec<f64> = (0..width).map(|i| tent_average_1d(lag(i) as f64 * h, h, 8, &gauss)).collect();
            Some(vec![profile; d])
        }
        KernelFamily::Fractional { omegas } => Some(
            omegas
                .iter()
                .map(|w| {
                    (0..width)
                        .map(|i| {
                            let x = lag(i) as f64 * h;
                            if c == 0.0 {
                                tent_power_1d(lag(i), h, *w)
                            } else {
                                let prof = |y: f64| mollified_power_1d(*w, y, c);
                                tent_average_1d(x, h, 8, &prof)
                            }
                        })
                        .collect()
                })
                .collect(),
        ),
        KernelFamily::Riesz { omega } if d == 1 => {
            let w = *omega;
            Some(vec![(0..width)
                .map(|i| {
                    if c == 0.0 {
                        tent_power_1d(lag(i), h, w)
                    } else {
                        let prof = |y: f64| mollified_power_1d(w, y, c);
                        tent_average_1d(lag(i) as f64 * h, h, 8, &prof)
                    }
                })
                .collect()])
        }
        KernelFamily::Riesz { .. } => None,
    };
    if let Some(axes) = separable {
        let mut out = vec![0.0; total];
        for (flat, o) in out.iter_mut().enumerate() {
            let mut rem = flat;
            let mut v = sigma2;
            for axis in axes.iter().take(d).rev() {
                v *= axis[rem % width];
                rem /= width;
            }
            *o = v;
        }
        return Ok(out);
    }
    let KernelFamily::Riesz { omega } = kernel.family else { unreachable!() };
    let mollified = if c > 0.0 { Some(MollifiedKernelSpec::new(kernel.clone(), c)?) } else { None };
    let rules: Vec<(Vec<f64>, Vec<f64>)> = [12usize, 3, 1].iter().map(|q| tent_rule(*q, h)).collect();
    let mut out = vec![0.0; total];
    let mut k = [0i64; MAX_DIM];
    for (flat, o) in out.iter_mut().enumerate() {
        let mut rem = flat;
        for kk in k.iter_mut().take(d).rev() {
            *kk = lag(rem % width);
            rem /= width;
        }
        let reach = k[..d].iter().map(|v| v.abs()).max().unwrap_or(0);
        let center: Vec<f64> = k[..d].iter().map(|v| *v as f64 * h).collect();
        *o = match &mollified {
            None if reach == 0 => sigma2 * tent_power_center(d, omega, h),
            None => {
                let rule = if reach <= 1 { &rules[0] } else if reach <= 4 { &rules[1] } else { &rules[2] };
                sigma2 * tensor_rule(&center, rule, &|y| crate::kernels::norm(y).powf(-omega))
            }
            Some(mk) => {
                let rule = if reach <= 8 { &rules[1] } else { &rules[2] };
                tensor_rule(&center, rule, &|y| mk.covariance(y))
            }
        };
    }
    Ok(out)
}

/// Nodes and weights on `[-h, h]` for the tent weight `(1 − |s|/h)/h`, `q` Gauss points per half.
fn tent_rule(q: usize, h: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(q);
    let mut nodes = Vec::with_capacity(2 * q);
    let mut weights = Vec::with_capacity(2 * q);
    for (t, wt) in x.iter().zip(&w) {
        // s ∈ [0, h]
        let s = 0.5 * h * (t + 1.0);
        let weight = 0.5 * h * wt * (1.0 - s / h) / h;
        nodes.push(s);
        weights.push(weight);
        nodes.push(-s);
        weights.push(weight);
    }
    (nodes, weights)
}

fn tensor_rule(center: &[f64], rule: &(Vec<f64>, Vec<f64>), f: &dyn Fn(&[f64]) -> f64) -> f64 {
    let d = center.len();
    let q = rule.0.len();
    let count = q.pow(d as u32);
    let mut y = [0.0; MAX_DIM];
    let mut acc = 0.0;
    for idx in 0..count {
        let mut rem = idx;
        let mut w = 1.0;
        for a in 0..d {
            let j = rem % q;
            rem /= q;
            y[a] = center[a] + rule.0[j];
            w *= rule.1[j];
        }
        acc += w * f(&y[..d]);
    }
    acc
}

fn tent_average_1d(x: f64, h: f64, q: usize, f: &dyn Fn(f64) -> f64) -> f64 {
    let rule = tent_rule(q, h);
    rule.0.iter().zip(&rule.1).map(|(s, w)| w * f(x + s)).sum()
}

/// Exact tent average of `|y|^{-ω}` at lag `k h` via the second antiderivative
/// `|y|^{2−ω} / ((1−ω)(2−ω))`.
fn tent_power_1d(k: i64, h: f64, omega: f64) -> f64 {
    let f2 = |j: i64| (j.abs() as f64).powf(2.0 - omega);
    let second = f2(k + 1) - 2.0 * f2(k) + f2(k - 1);
    second * h.powf(-omega) / ((1.0 - omega) * (2.0 - omega))
}

/// `(|·|^{-ω} * p_c)(y)` in one dimension.
fn mollified_power_1d(omega: f64, y: f64, c: f64) -> f64 {
    let a = 0.5 * omega;
    let z = y * y / (2.0 * c * c);
    let pre = (2.0 * c * c).powf(-a) * (statrs::function::gamma::ln_gamma(0.5 - a) - statrs::function::gamma::ln_gamma(0.5)).exp();
    pre * crate::kernels::kummer_m_negative(a, 0.5, z)
}

/// Tent average of `|s|^{-ω}` at lag zero in dimension 2 or 3.
///
/// By symmetry this is `2^d d h^{-ω} ∫_{[0,1]^{d-1}} (1+|z|²)^{-ω/2} Q(z) dz`, where the radial
/// factor of the pyramid `{s₁ = max}` has been integrated exactly:
/// `Q(z) = ∫_0^1 v^{d−1−ω} (1−v) Π(1−v z_i) dv`.
fn tent_power_center(d: usize, omega: f64, h: f64) -> f64 {
    let a = d as f64 - omega;
    let (x, w) = gauss_legendre(24);
    let nodes: Vec<f64> = x.iter().map(|t| 0.5 * (t + 1.0)).collect();
    let weights: Vec<f64> = w.iter().map(|w| 0.5 * w).collect();
    let integral = match d {
        2 => nodes
            .iter()
            .zip(&weights)
            .map(|(z, wz)| {
                // (1−v)(1−vz) = 1 − (1+z) v + z v²
                let q = 1.0 / a - (1.0 + z) / (a + 1.0) + z / (a + 2.0);
                wz * (1.0 + z * z).powf(-0.5 * omega) * q
            })
            .sum::<f64>(),
        3 => {
            let mut s = 0.0;
            for (z1, w1) in nodes.iter().zip(&weights) {
                for (z2, w2) in nodes.iter().zip(&weights) {
                    // (1−v)(1−v z1)(1−v z2)
                    let c1 = 1.0 + z1 + z2;
                    let c2 = z1 + z2 + z1 * z2;
                    let c3 = z1 * z2;
                    let q = 1.0 / a - c1 / (a + 1.0) + c2 / (a + 2.0) - c3 / (a + 3.0);
                    s += w1 * w2 * (1.0 + z1 * z1 + z2 * z2).powf(-0.5 * omega) * q;
                }
            }
            s
        }
        _ => unreachable!("lag-zero tent average is only needed for d = 2, 3"),
    };
    2f64.powi(d as i32) * d as f64 * h.powf(-omega) * integral
}

/// `𝒥_c(f) = ½∬f(x)²γ_c(x−y)f(y)²dxdy` on the lattice.
pub fn interaction(f: &Field, kernel: &KernelSpec, c: f64) -> Result<f64> {
    interaction_with(f, kernel, c, true)
}

/// As [`interaction`], refusing `c = 0` for singular kernels unless `singular_quadrature`.
pub fn interaction_with(f: &Field, kernel: &KernelSpec, c: f64, singular_quadrature: bool) -> Result<f64> {
    if c == 0.0 && !singular_quadrature {
        return Err(Error::SingularQuadratureDisabled);
    }
    let lk = LatticeKernel::new(*f.grid(), kernel, c)?;
    let rho: Vec<f64> = f.values().iter().map(|v| v * v).collect();
    let w = lk.potential(&rho);
    Ok(0.5 * f.grid().cell_volume() * dot(&rho, &w))
}

/// `¼∬f²(x)(x−y)ᵀΣ(x−y)f²(y)` from the first two moments of `f²`.
pub fn gk_interaction(f: &Field, sigma: &[Vec<f64>]) -> f64 {
    let m = Moments::of(f);
    m.gk(sigma)
}

struct Moments {
    mass: f64,
    first: [f64; MAX_DIM],
    second: [[f64; MAX_DIM]; MAX_DIM],
}

impl Moments {
    fn of(f: &Field) -> Self {
        let g = f.grid();
        let d = g.dim();
        let vol = g.cell_volume();
        let mut mass = 0.0;
        let mut first = [0.0; MAX_DIM];
        let mut second = [[0.0; MAX_DIM]; MAX_DIM];
        for (k, v) in f.values().iter().enumerate() {
            let r = v * v * vol;
            let x = g.point(k);
            mass += r;
            for a in 0..d {
                first[a] += r * x[a];
                for b in 0..d {
                    second[a][b] += r * x[a] * x[b];
                }
            }
        }
        Self { mass, first, second }
    }

    /// `½(mass·tr(ΣS) − mᵀΣm)`.
    fn gk(&self, sigma: &[Vec<f64>]) -> f64 {
        let d = sigma.len();
        let mut tr = 0.0;
        let mut quad = 0.0;
        for a in 0..d {
            for b in 0..d {
                tr += sigma[a][b] * self.second[b][a];
                quad += self.first[a] * sigma[a][b] * self.first[b];
            }
        }
        0.5 * (self.mass * tr - quad)
    }
}

/// `Σ = −Hess γ_ε(0)` by Richardson-extrapolated central differences of the closed-form
/// covariance.
pub fn hessian_sigma(kernel: &MollifiedKernelSpec) -> Result<Vec<Vec<f64>>> {
    let d = kernel.dimension();
    let gamma = |x: &[f64]| kernel.covariance(x);
    let second = |a: usize, b: usize, h: f64| -> f64 {
        let mut x = vec![0.0; d];
        if a == b {
            let g0 = gamma(&x);
            x[a] = h;
            let gp = gamma(&x);
            x[a] = -h;
            let gm = gamma(&x);
            (gp - 2.0 * g0 + gm) / (h * h)
        } else {
            let mut eval = |sa: f64, sb: f64| {
                x[a] = sa * h;
                x[b] = sb * h;
                gamma(&x)
            };
            (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0)) / (4.0 * h * h)
        }
    };
    let h = 1e-3 * kernel.epsilon;
    let mut sigma = vec![vec![0.0; d]; d];
    for a in 0..d {
        for b in a..d {
            let v = -(4.0 * second(a, b, 0.5 * h) - second(a, b, h)) / 3.0;
            sigma[a][b] = v;
            sigma[b][a] = v;
        }
    }
    let mat = DMatrix::from_fn(d, d, |i, j| sigma[i][j]);
    let eig = SymmetricEigen::new(mat);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    if min < -1e-8 * max.max(1e-300) {
        return Err(Error::NonPsd(min));
    }
    Ok(sigma)
}

/// Evaluates `Φ`, the potential `W = δN/δρ`, and `Δ_h f` at `f`.
struct Problem {
    grid: Grid,
    kappa: f64,
    energy: Energy,
    lattice: Option<LatticeKernel>,
    lap: DirichletLaplacian,
    mask: Option<Vec<bool>>,
}

struct Eval {
    phi: f64,
    /// `|nonlinear| + kinetic`, the size of the terms that cancel in `phi`.
    scale: f64,
    w: Vec<f64>,
    lap_f: Vec<f64>,
}

impl Problem {
    fn new(spec: &FunctionalSpec, grid: Grid, singular_quadrature: bool) -> Result<Self> {
        let energy = spec.energy()?;
        let lattice = match &energy {
            Energy::Hartree { c, .. } => {
                if *c == 0.0 && !singular_quadrature {
                    return Err(Error::SingularQuadratureDisabled);
                }
                Some(LatticeKernel::new(grid, &spec.kernel, *c)?)
            }
            Energy::Quadratic { .. } => None,
        };
        let mask = spec.support_radius().map(|r| (0..grid.len()).map(|k| grid.point(k)[..grid.dim()].iter().all(|c| c.abs() < r)).collect());
        Ok(Self { grid, kappa: spec.kappa, energy, lattice, lap: DirichletLaplacian::new(grid), mask })
    }

    fn eval(&self, f: &[f64]) -> Eval {
        let vol = self.grid.cell_volume();
        let mut lap_f = vec![0.0; f.len()];
        self.lap.apply(f, &mut lap_f);
        let kinetic = -self.kappa * vol * dot(f, &lap_f);
        let rho: Vec<f64> = f.iter().map(|v| v * v).collect();
        let (nonlinear, w) = match &self.energy {
            Energy::Hartree { weight, .. } => {
                let pot = self.lattice.as_ref().expect("Hartree lattice").potential(&rho);
                let w: Vec<f64> = pot.iter().map(|p| weight * p).collect();
                (0.5 * vol * dot(&rho, &w), w)
            }
            Energy::Quadratic { sigma } => {
                let field = Field::from_raw(self.grid, f.to_vec());
                let m = Moments::of(&field);
                let d = self.grid.dim();
                let sig: Vec<Vec<f64>> = (0..d).map(|a| sigma[a][..d].to_vec()).collect();
                let j = m.gk(&sig);
                // δJ/δρ = ½[xᵀΣx·mass − 2xᵀΣm + tr(ΣS)]
                let mut tr = 0.0;
                for a in 0..d {
                    for b in 0..d {
                        tr += sigma[a][b] * m.second[b][a];
                    }
                }
                let w = (0..f.len())
                    .map(|k| {
                        let x = self.grid.point(k);
                        let mut q = 0.0;
                        let mut lin = 0.0;
                        for a in 0..d {
                            for b in 0..d {
                                q += x[a] * sigma[a][b] * x[b];
                                lin += x[a] * sigma[a][b] * m.first[b];
                            }
                        }
                        -0.5 * (q * m.mass - 2.0 * lin + tr)
                    })
                    .collect();
                (-j, w)
            }
        };
        Eval { phi: nonlinear - kinetic, scale: nonlinear.abs() + kinetic.abs(), w, lap_f }
    }

    fn normalize(&self, f: &mut [f64]) -> bool {
        if let Some(mask) = &self.mask {
            for (v, inside) in f.iter_mut().zip(mask) {
                if !inside {
                    *v = 0.0;
                }
            }
        }
        let norm = (self.grid.cell_volume() * dot(f, f)).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return false;
        }
        f.iter_mut().for_each(|v| *v /= norm);
        true
    }
}

/// Value reported for `f` (normalized internally): `Φ(f)`, `−Φ(f)` for infima, or the ratio for `G`.
pub fn objective(spec: &FunctionalSpec, f: &Field) -> Result<f64> {
    let mut values = f.values().to_vec();
    if matches!(spec.kind, FunctionalKind::BestG) {
        let g = f.clone().normalized()?;
        let b = 2.0 * interaction(&g, &spec.kernel, 0.0)?;
        return Ok(b / DirichletLaplacian::new(*f.grid()).gradient_energy(g.values()));
    }
    let problem = Problem::new(spec, *f.grid(), true)?;
    if !problem.normalize(&mut values) {
        return Err(Error::InvalidParameter("cannot evaluate the objective at a zero field".into()));
    }
    let phi = problem.eval(&values).phi;
    Ok(if spec.is_infimum() { -phi } else { phi })
}

/// Maximizes `Φ` over the unit sphere by preconditioned nonlinear conjugate gradients with a
/// backtracking line search. The preconditioner is `(a − κΔ_h)^{-1}` with `a` tracking the
/// Lagrange multiplier.
pub fn solve_maximizer(spec: &FunctionalSpec, grid: Grid, opts: &SolveOptions) -> Result<MaximizerResult> {
    spec.validate()?;
    if matches!(spec.kind, FunctionalKind::BestG) {
        return best_constant(&spec.kernel, grid, opts);
    }
    if grid.dim() != spec.kernel.dimension {
        return Err(Error::InvalidParameter("grid and kernel dimensions differ".into()));
    }
    let problem = Problem::new(spec, grid, opts.singular_quadrature)?;
    let vol = grid.cell_volume();
    let mut f = opts.init.build(grid)?.into_values();
    if !problem.normalize(&mut f) {
        return Err(Error::InvalidParameter("initial field vanishes on the admissible box".into()));
    }
    let sign = if spec.is_infimum() { -1.0 } else { 1.0 };
    let a_floor = spec.kappa * grid.dim() as f64 * (PI / (2.0 * grid.radius())).powi(2);

    let mut ev = problem.eval(&f);
    let mut tau = opts.step;
    let mut dir: Vec<f64> = vec![0.0; f.len()];
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None; // (g, P^{-1} g)
    let mut trace = Vec::new();
    let mut residual = f64::INFINITY;
    let mut iterations = 0;

    // Projected gradient g = Wf + κΔf − μf, with μ = ⟨g₀, f⟩.
    let projected_gradient = |ev: &Eval, f: &[f64]| -> (Vec<f64>, f64) {
        let mut g: Vec<f64> = (0..f.len()).map(|k| ev.w[k] * f[k] + spec.kappa * ev.lap_f[k]).collect();
        let mu = vol * dot(&g, f);
        for (gk, fk) in g.iter_mut().zip(f) {
            *gk -= mu * fk;
        }
        if let Some(mask) = &problem.mask {
            for (gk, inside) in g.iter_mut().zip(mask) {
                if !inside {
                    *gk = 0.0;
                }
            }
        }
        (g, mu)
    };

    for iter in 0..=opts.max_iter {
        iterations = iter;
        let (g, mu) = projected_gradient(&ev, &f);
        residual = 2.0 * (vol * dot(&g, &g)).sqrt();
        trace.push(TraceRow { iteration: iter, objective: sign * ev.phi, residual, step: tau });
        if residual <= opts.tol || iter == opts.max_iter {
            break;
        }

        if let Some(every) = opts.symmetrize_every {
            if iter > 0 && iter % every == 0 {
                let abs = Field::from_raw(grid, f.iter().map(|v| v.abs()).collect());
                let mut cand = f_coord(&abs)?.into_values();
                if problem.normalize(&mut cand) {
                    let ec = problem.eval(&cand);
                    if ec.phi > ev.phi + 1e-14 * ev.phi.abs() {
                        f = cand;
                        ev = ec;
                        prev = None;
                        continue;
                    }
                }
            }
        }

        let mean_w = vol * f.iter().zip(&ev.w).map(|(x, w)| x * x * w.abs()).sum::<f64>();
        let a = (mu.abs() + mean_w).max(a_floor);
        let mut pg = g.clone();
        problem.lap.solve_shifted(&mut pg, a, spec.kappa);
        if let Some(mask) = &problem.mask {
            for (v, inside) in pg.iter_mut().zip(mask) {
                if !inside {
                    *v = 0.0;
                }
            }
        }
        let beta = match &prev {
            Some((g0, pg0)) => {
                let num: f64 = g.iter().zip(g0).zip(&pg).map(|((a, b), c)| (a - b) * c).sum();
                let den = dot(g0, pg0);
                if den > 0.0 { (num / den).max(0.0) } else { 0.0 }
            }
            None => 0.0,
        };
        for k in 0..f.len() {
            dir[k] = pg[k] + beta * dir[k];
        }
        // Keep the direction tangent to the sphere.
        let along = vol * dot(&dir, &f);
        for (dk, fk) in dir.iter_mut().zip(&f) {
            *dk -= along * fk;
        }
        let mut slope = vol * dot(&g, &dir);
        if slope <= 0.0 {
            dir.copy_from_slice(&pg);
            let along = vol * dot(&dir, &f);
            for (dk, fk) in dir.iter_mut().zip(&f) {
                *dk -= along * fk;
            }
            slope = vol * dot(&g, &dir);
        }
        prev = Some((g, pg));

        // Objective changes below this are round-off; steps are then judged by the residual.
        let resolution = 1e-13 * ev.scale.max(1e-3);
        let search = |dir: &[f64], slope: f64, mut tau: f64| -> Option<(Vec<f64>, Eval, f64)> {
            while tau > 1e-16 {
                let mut cand: Vec<f64> = f.iter().zip(dir).map(|(a, b)| a + tau * b).collect();
                if problem.normalize(&mut cand) {
                    let ec = problem.eval(&cand);
                    let gain = ec.phi - ev.phi;
                    if gain >= 1e-4 * tau * 2.0 * slope && gain > resolution {
                        return Some((cand, ec, tau));
                    }
                    if gain.abs() <= resolution {
                        let (gc, _) = projected_gradient(&ec, &cand);
                        if 2.0 * (vol * dot(&gc, &gc)).sqrt() < residual {
                            return Some((cand, ec, tau));
                        }
                    }
                }
                tau *= 0.5;
            }
            None
        };
        let start = (tau * 2.0).min(1e6);
        let mut accepted = search(&dir, slope, start);
        if accepted.is_none() && beta > 0.0 {
            // The conjugate direction lost descent; retry along the preconditioned gradient.
            dir.copy_from_slice(&prev.as_ref().expect("just stored").1);
            let along = vol * dot(&dir, &f);
            for (dk, fk) in dir.iter_mut().zip(&f) {
                *dk -= along * fk;
            }
            let slope = vol * dot(&prev.as_ref().expect("just stored").0, &dir);
            prev = None;
            accepted = search(&dir, slope, start);
        }
        match accepted {
            Some((cand, ec, step)) => {
                f = cand;
                ev = ec;
                tau = step;
            }
            None => break,
        }
    }

    if residual > opts.tol {
        return Err(Error::NoConvergence { iterations, residual });
    }
    f.iter_mut().for_each(|v| *v = v.abs());
    let ev = problem.eval(&f);
    let value = sign * ev.phi;
    if let FunctionalKind::SubMc { .. } = spec.kind {
        if ev.phi < 0.0 {
            return Err(Error::NegativeObjectiveStall(ev.phi));
        }
    }
    Ok(MaximizerResult { value, maximizer: Field::from_raw(grid, f), iterations, residual, trace })
}

/// `G` from the ground state `Q` of `−Δ_h Q + Q = (γ * Q²) Q`.
///
/// The ratio `∬f²γf² / ∫|∇f|²` is invariant under `f ↦ λ^{d/2} f(λ·)` when `ω = 2`, so a
/// gradient method on it has a flat direction and, on a lattice, is maximized by a single-site
/// spike. The maximizer is instead characterized through `Q`, found by Petviashvili iteration;
/// the reported value is the lattice ratio at `Q/‖Q‖₂`, which equals `2/‖Q‖₂²` in the continuum.
pub fn best_constant(kernel: &KernelSpec, grid: Grid, opts: &SolveOptions) -> Result<MaximizerResult> {
    if kernel.scaling_exponent() != 2.0 {
        return Err(Error::InvalidParameter("G needs omega = 2".into()));
    }
    if !opts.singular_quadrature {
        return Err(Error::SingularQuadratureDisabled);
    }
    let lk = LatticeKernel::new(grid, kernel, 0.0)?;
    let lap = DirichletLaplacian::new(grid);
    let vol = grid.cell_volume();
    let mut q = opts.init.build(grid)?.into_values();
    // Scale the initial guess so that the nonlinearity is of order one.
    q.iter_mut().for_each(|v| *v *= 2.0);
    let mut trace = Vec::new();
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let nonlinear = |q: &[f64]| -> Vec<f64> {
        let rho: Vec<f64> = q.iter().map(|v| v * v).collect();
        let w = lk.potential(&rho);
        w.iter().zip(q).map(|(w, q)| w * q).collect()
    };
    let mut lq = vec![0.0; q.len()];
    for iter in 0..=opts.max_iter {
        iterations = iter;
        let nq = nonlinear(&q);
        lap.apply(&q, &mut lq);
        // L Q = Q − ΔQ
        let lqv: Vec<f64> = q.iter().zip(&lq).map(|(a, b)| a - b).collect();
        let res: Vec<f64> = lqv.iter().zip(&nq).map(|(a, b)| a - b).collect();
        let qnorm = dot(&q, &q).sqrt();
        residual = dot(&res, &res).sqrt() / qnorm.max(1e-300);
        let ratio = dot(&q, &lqv) / dot(&q, &nq);
        trace.push(TraceRow { iteration: iter, objective: 2.0 / (vol * dot(&q, &q)), residual, step: ratio });
        if residual <= opts.tol || iter == opts.max_iter {
            break;
        }
        let mut next = nq;
        lap.solve_shifted(&mut next, 1.0, 1.0);
        let factor = ratio.powf(1.5);
        q = next.into_iter().map(|v| factor * v).collect();
        if !q.iter().all(|v| v.is_finite()) || dot(&q, &q) == 0.0 {
            return Err(Error::NoConvergence { iterations: iter, residual });
        }
    }
    if residual > opts.tol {
        return Err(Error::NoConvergence { iterations, residual });
    }
    let f = Field::from_raw(grid, q.iter().map(|v| v.abs()).collect()).normalized()?;
    let rho: Vec<f64> = f.values().iter().map(|v| v * v).collect();
    let b = vol * dot(&rho, &lk.potential(&rho));
    let value = b / lap.gradient_energy(f.values());
    Ok(MaximizerResult { value, maximizer: f, iterations, residual, trace })
}

/// Symmetric decreasing rearrangement of every 1-D slice along `axis`.
///
/// The largest value goes to the central node (left of center for even `n`), then values
/// alternate right and left outward, so symmetric decreasing slices are fixed points.
pub fn steiner_symmetrize(f: &Field, axis: usize) -> Result<Field> {
    let g = f.grid();
    if axis >= g.dim() {
        return Err(Error::InvalidParameter(format!("axis {axis} out of range for dimension {}", g.dim())));
    }
    if let Some(v) = f.values().iter().find(|v| **v < 0.0) {
        return Err(Error::NegativeInput(*v));
    }
    let n = g.points_per_dim();
    let stride = g.stride(axis);
    let block = stride * n;
    let order = placement_order(n);
    let mut out = f.values().to_vec();
    let mut slice = vec![0.0; n];
    for outer in (0..out.len()).step_by(block) {
        for inner in 0..stride {
            let base = outer + inner;
            for (j, s) in slice.iter_mut().enumerate() {
                *s = out[base + j * stride];
            }
            slice.sort_by(|a, b| b.partial_cmp(a).expect("finite field values"));
            for (rank, pos) in order.iter().enumerate() {
                out[base + pos * stride] = slice[rank];
            }
        }
    }
    Ok(Field::from_raw(*g, out))
}

/// Node positions in the order they receive decreasing values.
fn placement_order(n: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(n);
    let start = (n - 1) / 2;
    order.push(start);
    let (mut left, mut right) = (start as i64 - 1, start + 1);
    while order.len() < n {
        if right < n {
            order.push(right);
            right += 1;
        }
        if order.len() < n && left >= 0 {
            order.push(left as usize);
            left -= 1;
        }
    }
    order
}

/// Steiner symmetrization along every axis in order.
pub fn f_coord(f: &Field) -> Result<Field> {
    let mut out = f.clone();
    for axis in 0..f.grid().dim() {
        out = steiner_symmetrize(&out, axis)?;
    }
    Ok(out)
}

/// `χ(c) = inf(S − c²𝒥₀)` for the kernel of `spec`.
pub fn chi_scaled(spec: &FunctionalSpec, c: f64, grid: Grid, opts: &SolveOptions) -> Result<f64> {
    let scaled = FunctionalSpec::new(FunctionalKind::ChiScaled { c }, spec.kernel.clone(), spec.kappa)?;
    Ok(solve_maximizer(&scaled, grid, opts)?.value)
}

/// `−2 θ^{(4−ω)/2} (4−ω)^{−(4−ω)/2} (M/(2−ω))^{−(2−ω)/2}`.
pub fn tail_exponent(theta: f64, omega: f64, m: f64) -> Result<f64> {
    if !(theta > 0.0 && m > 0.0 && omega > 0.0 && omega < 2.0) {
        return Err(Error::InvalidParameter(format!(
            "tail exponent needs theta, M > 0 and 0 < omega < 2 (got {theta}, {m}, {omega})"
        )));
    }
    let a = 4.0 - omega;
    Ok(-2.0 * theta.powf(a / 2.0) * a.powf(-a / 2.0) * (m / (2.0 - omega)).powf(-(2.0 - omega) / 2.0))
}

/// `−sup_{p>0}(θp − p^{(4−ω)/(2−ω)} M)` by golden-section search.
pub fn tail_exponent_numeric(theta: f64, omega: f64, m: f64) -> f64 {
    let q = (4.0 - omega) / (2.0 - omega);
    let f = |p: f64| theta * p - p.powf(q) * m;
    let mut hi = 1.0;
    while f(2.0 * hi) > f(hi) {
        hi *= 2.0;
    }
    while hi > 1e-300 && f(hi / 2.0) >= f(hi) && f(hi) <= 0.0 {
        hi /= 2.0;
    }
    let (_, best) = golden_max(f, 0.0, 2.0 * hi, 1e-15);
    -best
}

/// `2κ / (t G)` with `G` estimated on `grid`.
pub fn crt_threshold(kernel: &KernelSpec, kappa: f64, t: f64, grid: Grid, opts: &SolveOptions) -> Result<f64> {
    let g = best_constant(kernel, grid, opts)?.value;
    Ok(2.0 * kappa / (t * g))
}
