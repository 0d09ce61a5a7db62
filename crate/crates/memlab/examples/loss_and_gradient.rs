//! Closed-form loss, gradient and Hessian of an exponential-sum model.

use memlab::expsum::{report, ExpSumModel};
use memlab::kernels::MemoryKernel;

fn main() -> memlab::Result<()> {
    let model = ExpSumModel::new(vec![1.0], vec![1.0])?;
    let target = MemoryKernel::expsum(vec![2.0], vec![2.0])?;
    let r = report(&model, &target, true)?;
    println!("loss     {:.17} (exact 1/6)", r.value);
    println!("gradient {:?} (exact -1/3, -1/18)", r.gradient);
    println!("hessian  {}", r.hessian.unwrap());
    Ok(())
}
