//! Critical affine spaces of an over-parameterised fit and the two-mode
//! saddle / degenerate-minimum classification.

use memlab::kernels::MemoryKernel;
use memlab::landscape::{classify_2d, count_critical_spaces, enumerate_spaces, find_nondegenerate_min};

fn main() -> memlab::Result<()> {
    let target = MemoryKernel::expsum(vec![1.0, 0.5], vec![0.5, 3.0])?;
    let anchors = vec![find_nondegenerate_min(&target, 1, 16, 1)?, find_nondegenerate_min(&target, 2, 16, 2)?];
    let spaces = enumerate_spaces(&target, 4, &anchors, 7)?;
    println!("width 4: {} spaces (expected {})", spaces.len(), count_critical_spaces(4, 2)?);
    for s in spaces.iter().take(6) {
        println!("  labels {:?} d={} |grad| {:.1e} rank {} zeros {}", s.labels, s.d, s.grad_norm, s.rank, s.zero_count);
    }

    let grid: Vec<f64> = (0..=8).map(|k| -0.5 + 0.375 * k as f64).collect();
    let c = classify_2d(&MemoryKernel::expsum(vec![1.0, 1.0], vec![1.0, 2.0])?, &grid)?;
    println!("critical line a1 + a2 = {:.4}, rate {:.4}", c.anchor.b[0], c.anchor.v[0]);
    for p in &c.points {
        println!("  a1 {:>6.3}: {:?} (min transverse eigenvalue {:.3e})", p.a1, p.label, p.min_transverse);
    }
    Ok(())
}
