//! One noise draw, three solvers: Crank-Nicolson, the Dirichlet spectral expansion and
//! Feynman-Kac Monte Carlo.
use pamlab::noise::sample_noise;
use pamlab::pam::{feynman_kac, solve_pde, solve_spectral, PamSolveConfig};
use pamlab::spectral::dirichlet_eigens;
use pamlab::{Grid, KernelSpec, MollifiedKernelSpec};

fn main() -> pamlab::Result<()> {
    let kernel = MollifiedKernelSpec::new(KernelSpec::white(1, 1.0)?, 0.25)?;
    let grid = Grid::new(1, 128, 4.0)?;
    let v = sample_noise(&kernel, grid, 3)?;
    let t = 0.5;

    let cfg = PamSolveConfig { dt: 1e-4, n_paths: 20_000, workers: 4, ..Default::default() };
    let pde = solve_pde(&v, t, &cfg)?;
    let spectral = solve_spectral(&v, t, cfg.kappa)?;
    let dec = dirichlet_eigens(&v, cfg.kappa, 4)?;
    println!("top eigenvalues {:?}", dec.eigenvalues);

    println!("x        pde        spectral   feynman-kac");
    for x in [-1.0, 0.0, 0.5, 2.0] {
        let mc = feynman_kac(&v, t, &[x], &cfg, 11, Some(grid.radius()))?;
        println!(
            "{x:<8} {:<10.5} {:<10.5} {:.5} ± {:.5}",
            pde.interpolate(&[x]),
            spectral.interpolate(&[x]),
            mc.estimate,
            mc.stderr
        );
    }
    Ok(())
}
