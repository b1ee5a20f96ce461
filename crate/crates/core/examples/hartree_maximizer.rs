//! Hartree-type variational constants: the white-noise ground state, the Riesz maximizer and
//! the harmonic-oscillator problem of the small-time regime.
use pamlab::variational::{f_coord, hessian_sigma, solve_maximizer, FunctionalKind, FunctionalSpec, SolveOptions};
use pamlab::{Grid, KernelSpec, MollifiedKernelSpec};

fn main() -> pamlab::Result<()> {
    let opts = SolveOptions::default();

    let white = KernelSpec::white(1, 1.0)?;
    let spec = FunctionalSpec::new(FunctionalKind::SubM, white.clone(), 1.0)?;
    let r = solve_maximizer(&spec, Grid::new(1, 512, 20.0)?, &opts)?;
    println!("white d=1: M = {:.7} (1/48 = {:.7}), {} iterations", r.value, 1.0 / 48.0, r.iterations);

    let riesz = KernelSpec::riesz(2, 1.0, 1.0)?;
    let spec = FunctionalSpec::new(FunctionalKind::SubM, riesz, 1.0)?;
    let r = solve_maximizer(&spec, Grid::new(2, 64, 8.0)?, &opts)?;
    let asym = f_coord(&r.maximizer)?.l2_distance(&r.maximizer);
    println!("riesz d=2 omega=1: M = {:.6}, distance to its rearrangement {asym:.2e}", r.value);

    let sigma = hessian_sigma(&MollifiedKernelSpec::new(white.clone(), 1.0)?)?;
    let spec = FunctionalSpec::new(FunctionalKind::ChiGK { sigma: sigma.clone() }, white, 1.0)?;
    let r = solve_maximizer(&spec, Grid::new(1, 512, 20.0)?, &opts)?;
    println!("harmonic problem: chi = {:.6}, oscillator value {:.6}", r.value, (sigma[0][0] / 2.0).sqrt());

    print!("{}", r.trace_csv().lines().take(6).collect::<Vec<_>>().join("\n"));
    println!("\n...");
    Ok(())
}
