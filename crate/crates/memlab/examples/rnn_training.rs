//! A small full-matrix linear RNN trained on the discrete loss.

use memlab::kernels::{ExpSum, MemoryKernel};
use memlab::rnnsim::{gd_train, random_rnn, Optimizer, TrainLoss};

fn main() -> memlab::Result<()> {
    let target = MemoryKernel::composite(ExpSum::new(vec![2.0], vec![1.0])?, 1.0, 0.2, 1.0)?;
    let rnn = random_rnn(4, (0.5, 2.0), 0.05, 1, 0)?;
    let loss = TrainLoss::Discrete { dt: 0.1, horizon: 16.0 };
    for (name, opt) in [("gd", Optimizer::Gd), ("heavy ball", Optimizer::HeavyBall { momentum: 0.5 })] {
        let rec = gd_train(&rnn, &target, loss, 0.01, 4000, opt, Some(1.0))?;
        println!(
            "{name:<10} loss {:.4e} -> {:.4e}, plateau {:?}, flat stretch {} steps",
            rec.losses[0],
            rec.losses.last().unwrap(),
            rec.plateau,
            rec.plateau_duration()
        );
    }
    Ok(())
}
