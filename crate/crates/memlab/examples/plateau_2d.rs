//! Two-mode flow started almost on the symmetric line: the plateau length
//! grows like ln(1/delta) / W.

use memlab::dynamics::{flow_2d_symmetric, PlanarOptions};

fn main() -> memlab::Result<()> {
    for delta in [1e-4, 1e-6, 1e-8] {
        let r = flow_2d_symmetric((1.0, 2.0), 0.5, delta, 1e5, PlanarOptions::default())?;
        println!(
            "delta {delta:e}: plateau ends at {:>9.3}, ln(1/delta)/W = {:>9.3}, v_limit {:.6}",
            r.t_plateau.unwrap_or(f64::NAN),
            (1.0 / delta).ln() / r.gap_rate,
            r.v_limit
        );
    }
    Ok(())
}
