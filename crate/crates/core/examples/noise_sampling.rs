//! Draws mollified Riesz noise in 2-D and compares the empirical covariance with the kernel.
use pamlab::noise::NoiseSampler;
use pamlab::{Grid, KernelSpec, MollifiedKernelSpec};

fn main() -> pamlab::Result<()> {
    let kernel = MollifiedKernelSpec::new(KernelSpec::riesz(2, 1.0, 1.0)?, 0.25)?;
    let grid = Grid::new(2, 32, 2.0)?;
    let sampler = NoiseSampler::new(&kernel, grid)?;
    let n = grid.points_per_dim();
    let centre = grid.flat_index(&[n / 2, n / 2]);

    let draws = 2000;
    let lags = [0usize, 1, 2, 4, 8];
    let mut acc = vec![0.0; lags.len()];
    for r in 0..draws {
        let (a, b) = sampler.sample_pair(42, r);
        for f in [a, b] {
            for (s, &l) in acc.iter_mut().zip(&lags) {
                *s += f.values()[centre] * f.values()[grid.flat_index(&[n / 2 + l, n / 2])];
            }
        }
    }
    println!("lag      empirical   kernel");
    for (s, &l) in acc.iter().zip(&lags) {
        let x = l as f64 * grid.spacing();
        println!("{x:<8.4} {:<11.5} {:.5}", s / (2 * draws) as f64, kernel.covariance(&[x, 0.0]));
    }

    let field = sampler.sample(7, 0);
    println!("one draw: min {:.3}, max {:.3}", field.values().iter().cloned().fold(f64::INFINITY, f64::min), field.max_abs());
    Ok(())
}
