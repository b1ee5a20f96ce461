//! Annealed moments by averaging solutions over noise draws, checked against the replica
//! representation, then a small intermittency scan.
use pamlab::moments::{estimate_moment, intermittency_scan, replica_moment, MomentSetup, ScanBudget};
use pamlab::pam::PamSolveConfig;
use pamlab::{Grid, KernelSpec, MollifiedKernelSpec};

fn main() -> pamlab::Result<()> {
    let kernel = MollifiedKernelSpec::new(KernelSpec::white(1, 1.0)?, 0.5)?;
    let t = 0.5;
    let setup = MomentSetup {
        grid: Grid::new(1, 64, 4.0)?,
        x: vec![0.0],
        n_noise: 1000,
        solver: PamSolveConfig { dt: 2e-3, workers: 4, ..Default::default() },
        seed: 1,
    };
    for p in [1usize, 2, 3] {
        let est = estimate_moment(&kernel, t, p as f64, &setup)?;
        let rep = replica_moment(&kernel, t, p, 20_000, 0.005, 2, 4)?;
        println!(
            "p = {p}: noise average {:.4} (log se {:.3}), replica {:.4} ± {:.4}",
            est.value, est.stderr_log, rep.estimate, rep.stderr
        );
    }

    let budget = ScanBudget {
        grid: Grid::new(1, 64, 4.0)?,
        n_noise: 200,
        solver: PamSolveConfig { dt: 2e-3, workers: 4, ..Default::default() },
        seed: 3,
        n_bootstrap: 200,
        rate_exponent: 1.0,
    };
    match intermittency_scan(&kernel, 2.0, &[0.5, 0.25], &[1.0, 2.0, 3.0], &budget) {
        Ok(table) => {
            print!("{}", table.to_csv());
            println!("{:?}", table.monotonicity);
        }
        Err(e) => println!("scan: {e}"),
    }
    Ok(())
}
