//! Memory kernels: evaluation, moments and norms for each family.

use memlab::kernels::{ExpSum, MemoryKernel};

fn main() -> memlab::Result<()> {
    let kernels = [
        ("expsum", MemoryKernel::expsum(vec![1.0, -0.5], vec![1.0, 3.0])?),
        ("composite", MemoryKernel::composite(ExpSum::new(vec![1.0], vec![1.0])?, 1.0, 0.1, 2.0)?),
        ("power law", MemoryKernel::power_law(2.0, 1.0)?),
        ("truncated", MemoryKernel::truncated(MemoryKernel::power_law(1.5, 1.0)?, 50.0)?),
    ];
    println!("{:<10} {:>12} {:>12} {:>12} {:>12}", "kernel", "rho(1)", "M0(1)", "M1(1)", "||rho||^2");
    for (name, k) in &kernels {
        println!(
            "{name:<10} {:>12.6} {:>12.6} {:>12.6} {:>12.6}",
            k.eval(1.0),
            k.moment(0, 1.0)?,
            k.moment(1, 1.0)?,
            k.l2_norm_sq()?
        );
    }
    Ok(())
}
