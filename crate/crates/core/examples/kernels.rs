//! Values of the three covariance families and their mollifications.
use pamlab::kernels::riesz_fourier_constant;
use pamlab::{KernelSpec, MollifiedKernelSpec};

fn main() -> pamlab::Result<()> {
    let kernels = [
        KernelSpec::white(2, 1.0)?,
        KernelSpec::riesz(1, 1.0, 0.5)?,
        KernelSpec::riesz(3, 1.0, 2.0)?,
        KernelSpec::fractional(1.0, vec![0.5, 0.7])?,
    ];
    println!("{:<40} {:>8} {:>14} {:>14} {:>14}", "kernel", "omega", "gamma_1(0)", "gamma_.25(0)", "gamma_1(e1)");
    for k in kernels {
        let d = k.dimension;
        let m = MollifiedKernelSpec::new(k.clone(), 1.0)?;
        let fine = m.with_epsilon(0.25)?;
        let mut e1 = vec![0.0; d];
        e1[0] = 1.0;
        println!(
            "{:<40} {:>8} {:>14.6} {:>14.6} {:>14.6}",
            format!("{:?}", k.family),
            k.scaling_exponent(),
            m.at_origin(),
            fine.at_origin(),
            m.mollified_gamma(&e1)?
        );
    }

    // Fourier constant of |x|^{-omega}: the transform is c |xi|^{omega - d}.
    for (d, w) in [(1.0, 0.5), (2.0, 1.0), (3.0, 2.0)] {
        println!("c(d = {d}, omega = {w}) = {:.8}", riesz_fourier_constant(d, w));
    }
    Ok(())
}
