//! The smoothed PAM `∂_t u = (κΔ + V)u`, `u(0,·) = 𝟙`, solved by time stepping, by spectral
//! expansion, and by Feynman–Kac Monte Carlo.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, MAX_DIM};
use crate::noise::replica_rng;
use crate::spectral::{dirichlet_eigens, spectral_solution, Hamiltonian};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Pde,
    Spectral,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Zero Dirichlet data on the box of `V`.
    DirichletBox,
    /// Absorbing box four times wider, `V` extended by its boundary values.
    LargeBoxApprox,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeScheme {
    CrankNicolson,
    ExplicitEuler,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PamSolveConfig {
    pub method: Method,
    pub kappa: f64,
    pub dt: f64,
    pub boundary: Boundary,
    pub scheme: TimeScheme,
    /// Paths per Monte Carlo estimate.
    pub n_paths: usize,
    pub workers: usize,
}

impl Default for PamSolveConfig {
    fn default() -> Self {
        Self {
            method: Method::Pde,
            kappa: 1.0,
            dt: 1e-3,
            boundary: Boundary::DirichletBox,
            scheme: TimeScheme::CrankNicolson,
            n_paths: 10_000,
            workers: 1,
        }
    }
}

/// Padding factor of [`Boundary::LargeBoxApprox`].
pub const PADDING: usize = 4;

/// `V` on the box `PADDING` times wider with the same spacing, extended by nearest values.
pub fn padded_potential(v: &Field) -> Result<Field> {
    let g = v.grid();
    if g.points_per_dim() % 2 != 0 {
        return Err(Error::InvalidParameter("padding needs an even number of points per axis".into()));
    }
    let big = Grid::new(g.dim(), PADDING * g.points_per_dim(), PADDING as f64 * g.radius())?;
    Ok(Field::from_fn(big, |x| v.values()[g.cell_of(x)]))
}

fn crop(big: &Field, small: Grid) -> Field {
    let n = small.points_per_dim();
    let offset = (big.grid().points_per_dim() - n) / 2;
    let d = small.dim();
    let mut idx = [0usize; MAX_DIM];
    let values = (0..small.len())
        .map(|k| {
            let s = small.multi_index(k);
            for a in 0..d {
                idx[a] = s[a] + offset;
            }
            big.at(&idx[..d])
        })
        .collect();
    Field::from_raw(small, values)
}

/// `u(t,·)` by Crank–Nicolson in time (two backward-Euler half steps at the start to damp
/// stiff modes), or by explicit Euler when requested.
pub fn solve_pde(v: &Field, t: f64, config: &PamSolveConfig) -> Result<Field> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("t must be positive, got {t}")));
    }
    if !(config.dt > 0.0 && config.kappa > 0.0) {
        return Err(Error::InvalidParameter("dt and kappa must be positive".into()));
    }
    match config.boundary {
        Boundary::DirichletBox => evolve(v, t, config),
        Boundary::LargeBoxApprox => Ok(crop(&evolve(&padded_potential(v)?, t, config)?, *v.grid())),
    }
}

fn evolve(v: &Field, t: f64, config: &PamSolveConfig) -> Result<Field> {
    let grid = *v.grid();
    let op = Hamiltonian::new(v, config.kappa);
    let steps = (t / config.dt).ceil().max(1.0) as usize;
    let dt = t / steps as f64;
    let mut u = vec![1.0; grid.len()];
    let mut au = vec![0.0; grid.len()];
    match config.scheme {
        TimeScheme::ExplicitEuler => {
            let h = grid.spacing();
            let vmax = v.values().iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let bound = 1.0 / (4.0 * grid.dim() as f64 * config.kappa / (h * h) + vmax);
            if dt > bound {
                return Err(Error::StabilityViolation { dt, bound });
            }
            for _ in 0..steps {
                op.apply(&u, &mut au);
                u.iter_mut().zip(&au).for_each(|(x, a)| *x += dt * a);
            }
        }
        TimeScheme::CrankNicolson => {
            let mut solver = ImplicitSolver::new(&op);
            for _ in 0..2 {
                let rhs = u.clone();
                solver.solve(0.5 * dt, &rhs, &mut u)?;
            }
            for _ in 1..steps {
                op.apply(&u, &mut au);
                let rhs: Vec<f64> = u.iter().zip(&au).map(|(x, a)| x + 0.5 * dt * a).collect();
                solver.solve(0.5 * dt, &rhs, &mut u)?;
            }
        }
    }
    Ok(Field::from_raw(grid, u))
}

/// Solves `(I − θ(κΔ_h + V)) u = b`.
struct ImplicitSolver<'a, 'b> {
    op: &'b Hamiltonian<'a>,
    /// Thomas workspace for `d = 1`.
    c_prime: Vec<f64>,
}

impl<'a, 'b> ImplicitSolver<'a, 'b> {
    fn new(op: &'b Hamiltonian<'a>) -> Self {
        Self { op, c_prime: vec![0.0; op.grid.len()] }
    }

    fn solve(&mut self, theta: f64, b: &[f64], u: &mut [f64]) -> Result<()> {
        let g = self.op.grid;
        if g.dim() == 1 {
            let n = g.points_per_dim();
            let k = self.op.kappa / (g.spacing() * g.spacing());
            let off = -theta * k;
            let diag = |i: usize| {
                let walls = (i == 0) as usize + (i + 1 == n) as usize;
                1.0 + theta * (2.0 + walls as f64) * k - theta * self.op.v[i]
            };
            // Forward sweep.
            let mut denom = diag(0);
            self.c_prime[0] = off / denom;
            u[0] = b[0] / denom;
            for i in 1..n {
                denom = diag(i) - off * self.c_prime[i - 1];
                self.c_prime[i] = off / denom;
                u[i] = (b[i] - off * u[i - 1]) / denom;
            }
            for i in (0..n - 1).rev() {
                u[i] -= self.c_prime[i] * u[i + 1];
            }
            return Ok(());
        }
        let s = 1.0 / theta;
        let vmax = self.op.v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if s <= vmax {
            return Err(Error::InvalidParameter(format!(
                "time step too large for the potential: need dt/2 < 1/max V = {:e}",
                1.0 / vmax
            )));
        }
        let rhs: Vec<f64> = b.iter().map(|x| x * s).collect();
        self.op.solve_shifted(s, &rhs, u, 1e-13).map(|_| ())
    }
}

/// `u_r(t,·)` from the Dirichlet eigenpairs on the box of `V`.
pub fn solve_spectral(v: &Field, t: f64, kappa: f64) -> Result<Field> {
    let total = v.grid().len();
    let k = if total <= 2048 { total } else { 64 };
    let dec = dirichlet_eigens(v, kappa, k)?;
    Ok(spectral_solution(&dec, t)?.field)
}

/// Discretized path `W_{i dt}`, `i = 0..=steps`, of the diffusion with generator `κΔ`
/// (increments `N(0, 2κ dt I)`).
#[derive(Clone, Debug, PartialEq)]
pub struct BrownianPath {
    pub dim: usize,
    pub dt: f64,
    pub kappa: f64,
    positions: Vec<f64>,
}

impl BrownianPath {
    pub fn sample(start: &[f64], t: f64, dt: f64, kappa: f64, rng: &mut impl Rng) -> Self {
        let dim = start.len();
        let steps = (t / dt).ceil().max(1.0) as usize;
        let dt = t / steps as f64;
        let scale = (2.0 * kappa * dt).sqrt();
        let mut positions = Vec::with_capacity((steps + 1) * dim);
        positions.extend_from_slice(start);
        for i in 0..steps {
            for a in 0..dim {
                let z: f64 = rng.sample(StandardNormal);
                let prev = positions[i * dim + a];
                positions.push(prev + scale * z);
            }
        }
        Self { dim, dt, kappa, positions }
    }

    /// A path with the given positions at spacing `dt`.
    pub fn from_positions(dim: usize, dt: f64, kappa: f64, positions: Vec<f64>) -> Result<Self> {
        if dim == 0 || positions.len() % dim != 0 || positions.len() < 2 * dim {
            return Err(Error::InvalidParameter("path needs at least two points of the given dimension".into()));
        }
        Ok(Self { dim, dt, kappa, positions })
    }

    /// Number of time steps.
    pub fn steps(&self) -> usize {
        self.positions.len() / self.dim - 1
    }

    pub fn duration(&self) -> f64 {
        self.steps() as f64 * self.dt
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    /// Left-point Riemann sum `Σ_{i<steps} V(W_{i dt}) dt`, with `V` constant on grid cells.
    pub fn integrate(&self, v: &Field) -> f64 {
        let g = v.grid();
        (0..self.steps()).map(|i| v.values()[g.cell_of(self.position(i))]).sum::<f64>() * self.dt
    }
}

/// `L_t` as cell masses on `grid` (left-point times, positions clamped to the box).
pub fn occupation_measure(path: &BrownianPath, grid: Grid) -> Field {
    let mut mass = vec![0.0; grid.len()];
    let w = 1.0 / path.steps() as f64;
    for i in 0..path.steps() {
        mass[grid.cell_of(path.position(i))] += w;
    }
    Field::from_raw(grid, mass)
}

/// First grid time at which `|W|_∞ ≥ r`.
pub fn exit_time(path: &BrownianPath, r: f64) -> Option<f64> {
    (0..=path.steps()).find(|&i| path.position(i).iter().any(|c| c.abs() >= r)).map(|i| i as f64 * path.dt)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub seed: u64,
}

/// Runs `f(path_index)` for every path on `workers` threads and returns the values in path
/// order, so the reduction is independent of the worker count.
pub(crate) fn per_path<T, F>(n_paths: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = workers.max(1).min(n_paths.max(1));
    if workers == 1 {
        return (0..n_paths).map(&f).collect();
    }
    let chunk = n_paths.div_ceil(workers);
    let mut out: Vec<Option<T>> = (0..n_paths).map(|_| None).collect();
    std::thread::scope(|s| {
        for (c, slot) in out.chunks_mut(chunk).enumerate() {
            let f = &f;
            s.spawn(move || {
                for (j, o) in slot.iter_mut().enumerate() {
                    *o = Some(f(c * chunk + j));
                }
            });
        }
    });
    out.into_iter().map(|o| o.expect("every path evaluated")).collect()
}

pub(crate) fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `E_x[exp(∫_0^t V(W_s) ds) 𝟙{τ_r > t}]` over `n_paths` paths; path `i` uses the random
/// stream `(seed, i)`.
#[derive(Clone, Debug)]
pub struct FeynmanKac {
    pub kappa: f64,
    pub t: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Kill paths that leave `Q_r`.
    pub box_radius: Option<f64>,
    pub workers: usize,
}

impl FeynmanKac {
    pub fn estimate(&self, v: &Field, x: &[f64]) -> Result<McEstimate> {
        if x.len() != v.grid().dim() {
            return Err(Error::InvalidParameter("start point has the wrong dimension".into()));
        }
        if self.n_paths == 0 {
            return Err(Error::InvalidParameter("need at least one path".into()));
        }
        let samples = per_path(self.n_paths, self.workers, |i| {
            let mut rng = replica_rng(self.seed, i as u64);
            let path = BrownianPath::sample(x, self.t, self.dt, self.kappa, &mut rng);
            if let Some(r) = self.box_radius {
                if exit_time(&path, r).is_some() {
                    return 0.0;
                }
            }
            path.integrate(v).exp()
        });
        let (estimate, stderr) = mean_and_stderr(&samples);
        Ok(McEstimate { estimate, stderr, n_paths: self.n_paths, seed: self.seed })
    }
}

pub fn feynman_kac(v: &Field, t: f64, x: &[f64], config: &PamSolveConfig, seed: u64, box_radius: Option<f64>) -> Result<McEstimate> {
    FeynmanKac { kappa: config.kappa, t, dt: config.dt, n_paths: config.n_paths, seed, box_radius, workers: config.workers }
        .estimate(v, x)
}

/// `u(t, x)` by the configured method.
pub fn solve_at(v: &Field, t: f64, x: &[f64], config: &PamSolveConfig, seed: u64) -> Result<f64> {
    let field = match config.method {
        Method::Pde => solve_pde(v, t, config)?,
        Method::Spectral => solve_spectral(v, t, config.kappa)?,
        Method::MonteCarlo => {
            let box_radius = match config.boundary {
                Boundary::DirichletBox => Some(v.grid().radius()),
                Boundary::LargeBoxApprox => Some(PADDING as f64 * v.grid().radius()),
            };
            return Ok(feynman_kac(v, t, x, config, seed, box_radius)?.estimate);
        }
    };
    Ok(field.interpolate(x))
}
