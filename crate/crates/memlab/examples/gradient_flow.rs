//! Gradient flow from a point that fits the exponential part of a target
//! with a late Gaussian bump: the flow sits still for a long time before
//! the bump is noticed.

use memlab::dynamics::{gradient_flow, linearized_escape_prediction, FlowConfig};
use memlab::expsum::ExpSumModel;
use memlab::kernels::{ExpSum, MemoryKernel};

fn main() -> memlab::Result<()> {
    let init = ExpSumModel::new(vec![0.1; 10], vec![0.4; 10])?;
    for inverse_omega in [5.0, 10.0, 15.0] {
        let target = MemoryKernel::composite(ExpSum::new(vec![1.0], vec![0.4])?, 1.0, 1.0 / inverse_omega, 2.0)?;
        let mut cfg = FlowConfig::new(target.clone(), init.clone(), 1e9, 1e-3);
        cfg.stop_after_escape = true;
        let traj = gradient_flow(&cfg)?;
        let pred = linearized_escape_prediction(&init, &target, 1e-3)?;
        println!(
            "1/omega {inverse_omega:>4}: loss escape {:>12.4e}  parameter escape {:>12.4e}  linearized bound {:>12.4e}",
            traj.hits.tau0_loss.unwrap_or(f64::NAN),
            traj.hits.tau0_param.unwrap_or(f64::NAN),
            pred.time
        );
    }
    Ok(())
}
