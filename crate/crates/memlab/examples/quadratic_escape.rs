//! Escape from a quadratic saddle: gradient descent needs ~1/eps time,
//! heavy-ball momentum ~1/sqrt(eps).

use memlab::dynamics::{predicted_escape, quadratic_escape, QuadraticMethod};

fn main() -> memlab::Result<()> {
    let gap = 0.01;
    for eps in [1e-3, 1e-4, 1e-5] {
        let gd = quadratic_escape(eps, eps, gap, QuadraticMethod::Gd)?;
        let hb = quadratic_escape(eps, eps, gap, QuadraticMethod::Momentum)?;
        println!(
            "eps {eps:e}: gd {gd:>10.2} (formula {:>10.2})  momentum {hb:>8.2} (formula {:>8.2})  ratio {:.1}",
            predicted_escape(eps, gap, QuadraticMethod::Gd),
            predicted_escape(eps, gap, QuadraticMethod::Momentum),
            gd / hb
        );
    }
    Ok(())
}
