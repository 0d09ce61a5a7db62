//! Monte Carlo white-noise loss against the closed-form finite-horizon loss.

use memlab::kernels::MemoryKernel;
use memlab::rnnsim::{closedform_finite_loss, mc_loss, random_rnn, Generator, PathEnsemble};

fn main() -> memlab::Result<()> {
    let target = MemoryKernel::expsum(vec![1.0, -0.5], vec![0.5, 2.0])?;
    let rnn = random_rnn(4, (0.5, 2.0), 0.3, 11, 0)?;
    let exact = closedform_finite_loss(&rnn, &target, 6.4)?;
    for n_paths in [250, 1000, 4000] {
        let ens = PathEnsemble { dt: 0.01, horizon: 6.4, n_paths, generator: Generator::WhiteNoise, seed: 5 };
        let mc = mc_loss(&rnn, &target, &ens)?;
        println!("{n_paths:>5} paths: {:.5} +- {:.5} (closed form {exact:.5})", mc.mean, mc.std_error);
    }
    Ok(())
}
