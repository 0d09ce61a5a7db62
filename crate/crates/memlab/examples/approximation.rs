//! Explicit width-m construction and the width needed for power-law memory.

use memlab::approx::{l1_error, min_width, rate_construct};
use memlab::kernels::MemoryKernel;

fn main() -> memlab::Result<()> {
    let smooth = MemoryKernel::expsum(vec![1.0, 1.0], vec![1.0, 3.0])?;
    for m in [4, 8, 16, 32] {
        let con = rate_construct(&smooth, 1, 1.5, m)?;
        println!("m {m:>2}: L1 error {:.3e}", l1_error(&con, &smooth)?);
    }
    for omega in [1.0, 0.75] {
        let k = MemoryKernel::power_law(1.0 + omega, 1.0)?;
        let r = min_width(&k, 0.1, 64, 1)?;
        println!("power law, omega {omega}: smallest width for eps 0.1 is {:?}", r.m_min);
    }
    Ok(())
}
