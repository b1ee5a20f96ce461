//! Batch experiment runner: reads a sectioned config, runs one command with fixed seeds, and
//! writes a CSV or JSON artifact stamped with the config hash.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::acceptance::{run_criterion, CRITERIA};
use crate::config::{kernel_from_section, Document, Section};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::io::read_field;
use crate::kernels::{KernelSpec, MollifiedKernelSpec};
use crate::moments::{
    estimate_moment, intermittency_scan, moment_from_samples, normalized_log_moment, replica_moment_kappa,
    solution_samples, MomentSetup, ScanBudget,
};
use crate::noise::NoiseSampler;
use crate::pam::{feynman_kac, solve_pde, solve_spectral, Boundary, Method, PamSolveConfig, TimeScheme, PADDING};
use crate::scaling::{classify_regime, PowerLaw, Regime, RegimeRecord};
use crate::variational::{hessian_sigma, solve_maximizer, FunctionalKind, FunctionalSpec, Init, SolveOptions};

/// Largest predicted cumulant `H_ε(pt)` the moments command accepts.
pub const MAX_CUMULANT: f64 = 20.0;

#[derive(Parser, Debug, Clone)]
#[command(name = "pamlab", version, about = "Moment asymptotics of the parabolic Anderson model with mollified Gaussian noise")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Sectioned `key = value` config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config's seed list with a single seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Solve one variational problem.
    Variational,
    /// Sample mollified noise fields.
    NoiseSample,
    /// Solve the PAM for sampled or stored potentials.
    PamSolve,
    /// Estimate moments, replica moments, or run an intermittency scan.
    Moments,
    /// Classify a regime and tabulate its scale functions.
    RegimeTable,
    /// Run the acceptance criteria.
    Acceptance,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Variational => "variational",
            Command::NoiseSample => "noise-sample",
            Command::PamSolve => "pam-solve",
            Command::Moments => "moments",
            Command::RegimeTable => "regime-table",
            Command::Acceptance => "acceptance",
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn extension(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// A validated run: the parsed document, effective seeds, and output settings.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub command: Command,
    pub doc: Document,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub workers: usize,
    pub format: Format,
}

impl ExperimentConfig {
    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let text = match &cli.config {
            Some(path) => std::fs::read_to_string(path)?,
            None => String::new(),
        };
        Self::from_text(cli.command, &text, cli)
    }

    pub fn from_text(command: Command, text: &str, cli: &Cli) -> Result<Self> {
        let mut doc = Document::parse(text)?;
        let seeds = match cli.seed {
            Some(s) => {
                doc.set("", "seeds", s.to_string());
                vec![s]
            }
            None if doc.root().contains("seeds") => doc.root().list("seeds")?,
            None => vec![0],
        };
        if seeds.is_empty() {
            return Err(Error::config("seeds", "empty seed list"));
        }
        if cli.workers == 0 {
            return Err(Error::config("--workers", "must be at least 1"));
        }
        Ok(Self { command, doc, seeds, out: cli.out.clone(), workers: cli.workers, format: cli.format })
    }

    /// SHA-256 of the canonical config with the effective seeds; independent of workers.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.command.name().as_bytes());
        h.update(b"\n");
        h.update(self.doc.canonical().as_bytes());
        h.finalize().iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    fn section(&self, name: &str) -> Result<&Section> {
        self.doc.require_section(name)
    }

    fn optional_section(&self, name: &str) -> Section {
        self.doc.section(name).cloned().unwrap_or_default()
    }
}

/// Rows of a result table; CSV renders `header` and `rows`, JSON renders `records`.
struct Table {
    module: &'static str,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
    summary: Value,
}

impl Table {
    fn new(module: &'static str, header: Vec<&'static str>) -> Self {
        Self { module, header, rows: Vec::new(), summary: Value::Null }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn render(&self, cfg: &ExperimentConfig) -> String {
        match cfg.format {
            Format::Csv => {
                let mut out = format!(
                    "# pamlab {} module={} command={} config_sha256={}\n",
                    env!("CARGO_PKG_VERSION"),
                    self.module,
                    cfg.command.name(),
                    cfg.hash()
                );
                out.push_str(&self.header.join(","));
                out.push('\n');
                for row in &self.rows {
                    out.push_str(&row.join(","));
                    out.push('\n');
                }
                out
            }
            Format::Json => {
                let records: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let obj = self.header.iter().zip(row).map(|(k, v)| (k.to_string(), cell_value(v))).collect();
                        Value::Object(obj)
                    })
                    .collect();
                let doc = json!({
                    "pamlab_version": env!("CARGO_PKG_VERSION"),
                    "module": self.module,
                    "command": cfg.command.name(),
                    "config_sha256": cfg.hash(),
                    "seeds": cfg.seeds,
                    "records": records,
                    "summary": self.summary,
                });
                let mut s = serde_json::to_string_pretty(&doc).expect("json values serialize");
                s.push('\n');
                s
            }
        }
    }
}

fn cell_value(s: &str) -> Value {
    if let Ok(i) = s.parse::<i64>() {
        return Value::from(i);
    }
    if let Ok(x) = s.parse::<f64>() {
        if let Some(n) = serde_json::Number::from_f64(x) {
            return Value::Number(n);
        }
    }
    if s.is_empty() {
        Value::Null
    } else {
        Value::String(s.to_string())
    }
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("serializable")
}

/// Parses argv, runs the command and maps failures to a nonzero status.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(path) => {
            println!("wrote {}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. } => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

/// Runs the command and returns the path of the artifact written.
pub fn run(cli: &Cli) -> Result<PathBuf> {
    let cfg = ExperimentConfig::from_cli(cli)?;
    run_config(&cfg)
}

pub fn run_config(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let table = match cfg.command {
        Command::Variational => variational(cfg)?,
        Command::NoiseSample => noise_sample(cfg)?,
        Command::PamSolve => pam_solve(cfg)?,
        Command::Moments => moments(cfg)?,
        Command::RegimeTable => regime_table(cfg)?,
        Command::Acceptance => acceptance(cfg)?,
    };
    let failed = table.summary.get("failed").and_then(Value::as_u64).unwrap_or(0);
    let path = write_artifact(cfg, &table)?;
    if failed > 0 {
        return Err(Error::InvalidParameter(format!("{failed} acceptance criteria failed; see {}", path.display())));
    }
    Ok(path)
}

fn write_artifact(cfg: &ExperimentConfig, table: &Table) -> Result<PathBuf> {
    std::fs::create_dir_all(&cfg.out)?;
    let path = cfg.out.join(format!("{}.{}", cfg.command.name(), cfg.format.extension()));
    std::fs::write(&path, table.render(cfg))?;
    Ok(path)
}

fn kernel(cfg: &ExperimentConfig) -> Result<KernelSpec> {
    kernel_from_section(cfg.section("kernel")?)
}

fn mollified(cfg: &ExperimentConfig) -> Result<MollifiedKernelSpec> {
    let s = cfg.section("kernel")?;
    let eps: f64 = s.required("epsilon")?;
    MollifiedKernelSpec::new(kernel(cfg)?, eps).map_err(|e| Error::config("kernel.epsilon", e.to_string()))
}

fn grid(cfg: &ExperimentConfig, dim: usize) -> Result<Grid> {
    let s = cfg.section("grid")?;
    let n: usize = s.required("n")?;
    let radius: f64 = s.required("radius")?;
    Grid::new(dim, n, radius).map_err(|e| Error::config("grid", e.to_string()))
}

fn point(s: &Section, key: &str, dim: usize) -> Result<Vec<f64>> {
    if !s.contains(key) {
        return Ok(vec![0.0; dim]);
    }
    let x: Vec<f64> = s.list(key)?;
    if x.len() != dim {
        return Err(Error::config(format!("{}.{key}", s.name()), format!("expected {dim} coordinates")));
    }
    Ok(x)
}

fn solver_config(cfg: &ExperimentConfig) -> Result<PamSolveConfig> {
    let s = cfg.optional_section("solver");
    let d = PamSolveConfig::default();
    let method = match s.or("method", "pde".to_string())?.as_str() {
        "pde" => Method::Pde,
        "spectral" => Method::Spectral,
        "monte_carlo" | "feynman_kac" => Method::MonteCarlo,
        other => return Err(Error::config("solver.method", format!("unknown method `{other}`"))),
    };
    let boundary = match s.or("boundary", "dirichlet_box".to_string())?.as_str() {
        "dirichlet_box" => Boundary::DirichletBox,
        "large_box" => Boundary::LargeBoxApprox,
        other => return Err(Error::config("solver.boundary", format!("unknown boundary `{other}`"))),
    };
    let scheme = match s.or("scheme", "crank_nicolson".to_string())?.as_str() {
        "crank_nicolson" => TimeScheme::CrankNicolson,
        "explicit_euler" => TimeScheme::ExplicitEuler,
        other => return Err(Error::config("solver.scheme", format!("unknown scheme `{other}`"))),
    };
    Ok(PamSolveConfig {
        method,
        kappa: s.or("kappa", d.kappa)?,
        dt: s.or("dt", d.dt)?,
        boundary,
        scheme,
        n_paths: s.or("n_paths", d.n_paths)?,
        workers: cfg.workers,
    })
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Pde => "pde",
        Method::Spectral => "spectral",
        Method::MonteCarlo => "monte_carlo",
    }
}

fn functional_kind(s: &Section, name: &str, cfg: &ExperimentConfig) -> Result<FunctionalKind> {
    let path = |k: &str| format!("variational.{k}");
    Ok(match name {
        "sub_m" => FunctionalKind::SubM,
        "sub_mc" => FunctionalKind::SubMc { frak_c: s.required("frak_c")?, p: s.or("p", 1.0)? },
        "crt_m" => FunctionalKind::CrtM { t: s.required("t")?, p: s.or("p", 1.0)? },
        "chi_gk" => FunctionalKind::ChiGK { sigma: hessian_sigma(&mollified(cfg)?)? },
        "chi_r" => {
            let base: String = s.or("base", "sub_m".to_string())?;
            if base == "chi_r" {
                return Err(Error::config(path("base"), "cannot nest chi_r"));
            }
            FunctionalKind::ChiR { radius: s.required("radius")?, base: Box::new(functional_kind(s, &base, cfg)?) }
        }
        "chi_scaled" => FunctionalKind::ChiScaled { c: s.required("c")? },
        "best_g" => FunctionalKind::BestG,
        other => return Err(Error::config(path("kind"), format!("unknown kind `{other}`"))),
    })
}

fn variational(cfg: &ExperimentConfig) -> Result<Table> {
    let s = cfg.section("variational")?;
    let k = kernel(cfg)?;
    let kind_name: String = s.required("kind")?;
    let kind = functional_kind(s, &kind_name, cfg)?;
    let spec = FunctionalSpec::new(kind, k.clone(), s.or("kappa", 1.0)?)
        .map_err(|e| Error::config("variational", e.to_string()))?;
    let g = grid(cfg, k.dimension)?;
    let defaults = SolveOptions::default();
    let width: f64 = s.or("init_width", 1.0)?;
    let init = match s.or("init", "gaussian".to_string())?.as_str() {
        "gaussian" => Init::Gaussian { width },
        "sech" => Init::Sech { width },
        other => return Err(Error::config("variational.init", format!("unknown init `{other}`"))),
    };
    let opts = SolveOptions {
        init,
        tol: s.or("tol", defaults.tol)?,
        max_iter: s.or("max_iter", defaults.max_iter)?,
        ..defaults
    };
    let r = solve_maximizer(&spec, g, &opts)?;
    let mut table = Table::new("variational", vec!["kind", "kappa", "n", "radius", "value", "iterations", "residual"]);
    table.push(vec![
        kind_name,
        num(spec.kappa),
        g.points_per_dim().to_string(),
        num(g.radius()),
        num(r.value),
        r.iterations.to_string(),
        num(r.residual),
    ]);
    table.summary = json!({ "kind": spec.kind, "kernel": k, "value": r.value, "infimum": spec.is_infimum() });
    Ok(table)
}

fn noise_sample(cfg: &ExperimentConfig) -> Result<Table> {
    let mk = mollified(cfg)?;
    let g = grid(cfg, mk.dimension())?;
    let sampler = NoiseSampler::new(&mk, g)?;
    let d = g.dim();
    let mut header = vec!["seed"];
    header.extend(["x1", "x2", "x3"].iter().take(d));
    header.push("value");
    let mut table = Table::new("noise", header);
    for &seed in &cfg.seeds {
        let field = sampler.sample(seed, 0);
        for (k, v) in field.values().iter().enumerate() {
            let p = g.point(k);
            let mut row = vec![seed.to_string()];
            row.extend(p[..d].iter().map(|c| num(*c)));
            row.push(num(*v));
            table.push(row);
        }
    }
    table.summary = json!({ "kernel": mk.base, "epsilon": mk.epsilon, "n": g.points_per_dim(), "radius": g.radius() });
    Ok(table)
}

fn pam_solve(cfg: &ExperimentConfig) -> Result<Table> {
    let s = cfg.section("solver")?;
    let solver = solver_config(cfg)?;
    let t: f64 = s.required("t")?;
    let stored = match s.raw("potential") {
        Some(path) => Some(read_field(Path::new(path))?.0),
        None => None,
    };
    let mut table = Table::new("pam", vec!["seed", "method", "t", "u", "stderr"]);
    for &seed in &cfg.seeds {
        let v = match &stored {
            Some(f) => f.clone(),
            None => {
                let mk = mollified(cfg)?;
                NoiseSampler::new(&mk, grid(cfg, mk.dimension())?)?.sample(seed, 0)
            }
        };
        let x = point(s, "x", v.grid().dim())?;
        let (u, se) = match solver.method {
            Method::Pde => (solve_pde(&v, t, &solver)?.interpolate(&x), 0.0),
            Method::Spectral => (solve_spectral(&v, t, solver.kappa)?.interpolate(&x), 0.0),
            Method::MonteCarlo => {
                let r = v.grid().radius();
                let box_radius = match solver.boundary {
                    Boundary::DirichletBox => r,
                    Boundary::LargeBoxApprox => PADDING as f64 * r,
                };
                let e = feynman_kac(&v, t, &x, &solver, seed, Some(box_radius))?;
                (e.estimate, e.stderr)
            }
        };
        table.push(vec![seed.to_string(), method_name(solver.method).to_string(), num(t), num(u), num(se)]);
    }
    table.summary = json!({ "method": method_name(solver.method).to_string(), "kappa": solver.kappa, "dt": solver.dt });
    Ok(table)
}

fn moments(cfg: &ExperimentConfig) -> Result<Table> {
    let s = cfg.section("moments")?;
    let mk = mollified(cfg)?;
    let mode: String = s.or("mode", "estimate".to_string())?;
    let t: f64 = s.required("t")?;
    let ps: Vec<f64> = s.list("p")?;
    let pmax = ps.iter().cloned().fold(0.0, f64::max);
    let epsilons: Vec<f64> = if mode == "scan" { s.list("epsilons")? } else { vec![mk.epsilon] };
    for &eps in &epsilons {
        let h = (pmax * t).powi(2) * mk.with_epsilon(eps)?.at_origin() / 2.0;
        if h > MAX_CUMULANT {
            return Err(Error::config(
                "moments",
                format!("predicted cumulant H = {h:.3} at eps = {eps} exceeds the guard {MAX_CUMULANT}"),
            ));
        }
    }
    match mode.as_str() {
        "estimate" => moments_estimate(cfg, s, &mk, t, &ps),
        "replica" => moments_replica(cfg, s, &mk, t, &ps),
        "scan" => moments_scan(cfg, s, &mk, t, &ps, &epsilons),
        other => Err(Error::config("moments.mode", format!("unknown mode `{other}`"))),
    }
}

fn moments_estimate(cfg: &ExperimentConfig, s: &Section, mk: &MollifiedKernelSpec, t: f64, ps: &[f64]) -> Result<Table> {
    let g = grid(cfg, mk.dimension())?;
    let solver = solver_config(cfg)?;
    let n_noise: usize = s.required("n_noise")?;
    let x = point(s, "x", g.dim())?;
    let regime = regime_from(cfg)?;
    let gamma1 = mk.with_epsilon(1.0)?.at_origin();
    let omega = mk.base.scaling_exponent();
    let mut table = Table::new(
        "moments",
        vec!["seed", "p", "t", "epsilon", "value", "log_value", "stderr_log", "n_noise", "n_paths", "normalized"],
    );
    for &seed in &cfg.seeds {
        let setup = MomentSetup { grid: g, x: x.clone(), n_noise, solver: solver.clone(), seed };
        let samples = if ps.len() > 1 { Some(solution_samples(mk, t, &setup)?) } else { None };
        for &p in ps {
            let est = match &samples {
                Some(sm) => moment_from_samples(sm, p, t, mk.epsilon, if solver.method == Method::MonteCarlo { solver.n_paths } else { 0 }),
                None => estimate_moment(mk, t, p, &setup)?,
            };
            let normalized = regime.map(|r| num(normalized_log_moment(&est, &r, omega, gamma1))).unwrap_or_default();
            table.push(vec![
                seed.to_string(),
                num(p),
                num(t),
                num(est.epsilon),
                num(est.value),
                num(est.log_value),
                num(est.stderr_log),
                est.n_noise.to_string(),
                est.n_paths.to_string(),
                normalized,
            ]);
        }
    }
    Ok(table)
}

fn moments_replica(cfg: &ExperimentConfig, s: &Section, mk: &MollifiedKernelSpec, t: f64, ps: &[f64]) -> Result<Table> {
    let n_paths: usize = s.required("n_paths")?;
    let dt: f64 = s.or("dt", 0.01)?;
    let kappa: f64 = cfg.optional_section("solver").or("kappa", 1.0)?;
    let mut table = Table::new("moments", vec!["seed", "p", "t", "epsilon", "estimate", "stderr", "n_paths"]);
    for &seed in &cfg.seeds {
        for &p in ps {
            if p.fract() != 0.0 || p < 1.0 {
                return Err(Error::config("moments.p", "replica moments need integer p ≥ 1"));
            }
            let r = replica_moment_kappa(mk, kappa, t, p as usize, n_paths, dt, seed, cfg.workers)?;
            table.push(vec![seed.to_string(), num(p), num(t), num(mk.epsilon), num(r.estimate), num(r.stderr), n_paths.to_string()]);
        }
    }
    Ok(table)
}

fn moments_scan(cfg: &ExperimentConfig, s: &Section, mk: &MollifiedKernelSpec, t: f64, ps: &[f64], epsilons: &[f64]) -> Result<Table> {
    let mut table = Table::new(
        "moments",
        vec!["seed", "epsilon", "t", "p", "log_moment", "stderr", "A", "ell_hat", "ell_hat_over_p"],
    );
    let mut verdicts = Vec::new();
    for &seed in &cfg.seeds {
        let budget = ScanBudget {
            grid: grid(cfg, mk.dimension())?,
            n_noise: s.required("n_noise")?,
            solver: solver_config(cfg)?,
            seed,
            n_bootstrap: s.or("n_bootstrap", 1000)?,
            rate_exponent: s.or("rate_exponent", 2.0)?,
        };
        let scan = intermittency_scan(mk, t, epsilons, ps, &budget)?;
        for r in &scan.rows {
            table.push(vec![
                seed.to_string(),
                num(r.epsilon),
                num(r.t),
                num(r.p),
                num(r.log_moment),
                num(r.stderr),
                num(r.a),
                num(r.ell_hat),
                num(r.ell_hat_over_p),
            ]);
        }
        verdicts.push(json!({ "seed": seed, "monotonicity": scan.monotonicity, "gap_stderr": scan.gap_stderr }));
    }
    table.summary = Value::Array(verdicts);
    Ok(table)
}

/// The `[regime]` section: either `tag` with its parameter, or power-law sequence descriptors.
fn regime_from(cfg: &ExperimentConfig) -> Result<Option<Regime>> {
    let Some(s) = cfg.doc.section("regime") else { return Ok(None) };
    if let Some(tag) = s.raw("tag") {
        return Ok(Some(match tag {
            "sub1" => Regime::Sub1,
            "sub2" => Regime::Sub2 { frak_c: s.required("frak_c")? },
            "sub3" => Regime::Sub3,
            "crt1" => Regime::Crt1,
            "crt2" => Regime::Crt2 { limit_t: s.required("limit_t")? },
            "sup" => Regime::Sup,
            other => return Err(Error::config("regime.tag", format!("unknown regime `{other}`"))),
        }));
    }
    let omega = regime_omega(cfg, s)?;
    let e = PowerLaw::new(s.required("e_coefficient")?, s.required("e_exponent")?);
    let t = PowerLaw::new(s.required("t_coefficient")?, s.required("t_exponent")?);
    classify_regime(omega, e, t).map(Some)
}

fn regime_omega(cfg: &ExperimentConfig, s: &Section) -> Result<f64> {
    match s.optional("omega")? {
        Some(w) => Ok(w),
        None => Ok(kernel(cfg)?.scaling_exponent()),
    }
}

fn regime_table(cfg: &ExperimentConfig) -> Result<Table> {
    let s = cfg.section("regime")?;
    let regime = regime_from(cfg)?.expect("regime section present");
    let omega = regime_omega(cfg, s)?;
    if !regime.admits(omega) {
        return Err(Error::config("regime.omega", format!("{} is not defined for omega = {omega}", regime.name())));
    }
    let gamma1: f64 = match s.optional("gamma1_at_0")? {
        Some(g) => g,
        None => MollifiedKernelSpec::new(kernel(cfg)?, 1.0)?.at_origin(),
    };
    let epsilons: Vec<f64> = s.list("epsilon")?;
    let times: Vec<f64> = s.list("t")?;
    let ps: Vec<f64> = if s.contains("p") { s.list("p")? } else { vec![1.0] };
    let chi: Option<f64> = s.optional("chi_p")?;
    let mut table = Table::new("scaling", RegimeRecord::csv_header().split(',').collect());
    for &eps in &epsilons {
        for &t in &times {
            for &p in &ps {
                let rec = RegimeRecord::new(regime, eps, t, p, omega, gamma1, chi);
                table.push(rec.csv_row().split(',').map(str::to_string).collect());
            }
        }
    }
    table.summary = to_value(&regime);
    Ok(table)
}

fn acceptance(cfg: &ExperimentConfig) -> Result<Table> {
    let s = cfg.optional_section("acceptance");
    let ids: Vec<usize> = if s.contains("criteria") { s.list("criteria")? } else { CRITERIA.iter().map(|c| c.0).collect() };
    let seed = cfg.seeds[0];
    let mut table = Table::new("acceptance", vec!["id", "name", "passed", "detail"]);
    let mut failed = 0u64;
    for id in ids {
        let report = run_criterion(id, cfg.workers, seed);
        println!("{report}");
        if !report.passed {
            failed += 1;
        }
        // Runtime is left out so the artifact is reproducible.
        table.push(vec![id.to_string(), report.name.to_string(), report.passed.to_string(), csv_quote(&report.detail)]);
    }
    table.summary = json!({ "failed": failed });
    Ok(table)
}

fn csv_quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(command: Command, out: &Path, format: Format) -> Cli {
        Cli { command, config: None, seed: None, out: out.to_path_buf(), workers: 1, format }
    }

    fn run_text(command: Command, text: &str, out: &Path, format: Format) -> Result<String> {
        let c = cli(command, out, format);
        let cfg = ExperimentConfig::from_text(command, text, &c)?;
        let path = run_config(&cfg)?;
        Ok(std::fs::read_to_string(path)?)
    }

    #[test]
    fn regime_table_sub1_row() {
        let dir = std::env::temp_dir().join("pamlab-cli-regime");
        let text = "[regime]\nomega = 1\ne_coefficient = 1\ne_exponent = 0\nt_coefficient = 1\nt_exponent = 1\nepsilon = 1\nt = 16\ngamma1_at_0 = 1\n";
        let out = run_text(Command::RegimeTable, text, &dir, Format::Json).unwrap();
        let v: Value = serde_json::from_str(&out).unwrap();
        let rec = &v["records"][0];
        assert_eq!(rec["regime"], "Sub-1");
        assert_eq!(rec["alpha"], 0.5);
        assert_eq!(rec["beta"], 64.0);
        assert_eq!(rec["H"], 128.0);
    }

    #[test]
    fn malformed_kernel_names_the_field() {
        let dir = std::env::temp_dir().join("pamlab-cli-bad");
        let text = "[kernel]\nfamily = riesz\nsigma = one\ndimension = 1\nomega = 0.5\n[grid]\nn = 64\nradius = 4\n[variational]\nkind = sub_m\n";
        let err = run_text(Command::Variational, text, &dir, Format::Json).unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
        assert!(err.to_string().contains("kernel.sigma"), "{err}");
    }

    #[test]
    fn hash_ignores_workers_and_layout() {
        let a = Cli { workers: 3, ..cli(Command::Moments, Path::new("."), Format::Csv) };
        let b = cli(Command::Moments, Path::new("."), Format::Csv);
        let x = ExperimentConfig::from_text(Command::Moments, "[k]\na = 1\nb = 2\n", &a).unwrap();
        let y = ExperimentConfig::from_text(Command::Moments, "[k]\nb = 2\n\na = 1 # c\n", &b).unwrap();
        assert_eq!(x.hash(), y.hash());
        let z = ExperimentConfig::from_text(Command::Moments, "[k]\na = 1\nb = 3\n", &b).unwrap();
        assert_ne!(x.hash(), z.hash());
    }

    #[test]
    fn moment_guard_rejects_large_cumulants() {
        let dir = std::env::temp_dir().join("pamlab-cli-guard");
        let text = "[kernel]\nfamily = white\nsigma = 1\ndimension = 1\nepsilon = 0.01\n[grid]\nn = 32\nradius = 2\n[moments]\nt = 1\np = 2\nn_noise = 4\n";
        let err = run_text(Command::Moments, text, &dir, Format::Csv).unwrap_err();
        assert!(err.to_string().contains("guard"), "{err}");
    }
}
