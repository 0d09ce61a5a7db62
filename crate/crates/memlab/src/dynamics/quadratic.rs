//! Escape from the saddle of `f(x) = (x1^2 - eps x2^2)/2` under gradient
//! flow and the undamped heavy-ball flow `x'' = -grad f`.

use crate::error::{Error, Result};
use crate::numerics::ode::{solve_ode, Event, Method, OdeOptions};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadraticMethod {
    Gd,
    Momentum,
}

pub fn quadratic_loss(x: &[f64], eps: f64) -> f64 {
    0.5 * (x[0] * x[0] - eps * x[1] * x[1])
}

/// Closed-form state at time `tau` from `x(0) = (delta, 1)`;
/// momentum starts with `x'(0) = -grad f(x(0))`.
pub fn quadratic_exact(eps: f64, delta: f64, method: QuadraticMethod, tau: f64) -> [f64; 2] {
    match method {
        QuadraticMethod::Gd => [delta * (-tau).exp(), (eps * tau).exp()],
        QuadraticMethod::Momentum => {
            let r = eps.sqrt();
            [delta * (tau.cos() - tau.sin()), 0.5 * (1.0 + r) * (r * tau).exp() + 0.5 * (1.0 - r) * (-r * tau).exp()]
        }
    }
}

/// `(1/(2 eps)) ln(gap/eps)` for gradient flow, `(1/(2 sqrt eps)) ln(4 gap/eps)`
/// for momentum.
pub fn predicted_escape(eps: f64, gap: f64, method: QuadraticMethod) -> f64 {
    match method {
        QuadraticMethod::Gd => (gap / eps).ln() / (2.0 * eps),
        QuadraticMethod::Momentum => (4.0 * gap / eps).ln() / (2.0 * eps.sqrt()),
    }
}

/// First time the loss falls to `-gap/2`, integrating the flow numerically.
/// That level is where both predicted times place the loss.
pub fn quadratic_escape(eps: f64, delta: f64, gap: f64, method: QuadraticMethod) -> Result<f64> {
    if !(eps > 0.0 && delta > 0.0 && gap > 0.0) {
        return Err(Error::DomainError("eps, delta and gap must be positive".into()));
    }
    let level = -0.5 * gap;
    // The escape happens well before the GD time with a large safety factor.
    let tau_max = 20.0 * (1.0 / eps).max(1.0) * (1.0 + (gap / eps).abs().ln().abs());
    let opts = OdeOptions { method: Method::Rk45 { rtol: 1e-11, atol: 1e-14 }, ..Default::default() };
    let sol = match method {
        QuadraticMethod::Gd => {
            let ev = [Event::new(move |_, y: &[f64]| quadratic_loss(y, eps) - level, true)];
            solve_ode(
                |_, y, dy| {
                    dy[0] = -y[0];
                    dy[1] = eps * y[1];
                },
                &[delta, 1.0],
                tau_max,
                &opts,
                &ev,
                None,
            )?
        }
        QuadraticMethod::Momentum => {
            let ev = [Event::new(move |_, y: &[f64]| quadratic_loss(y, eps) - level, true)];
            solve_ode(
                |_, y, dy| {
                    dy[0] = y[2];
                    dy[1] = y[3];
                    dy[2] = -y[0];
                    dy[3] = eps * y[1];
                },
                &[delta, 1.0, -delta, eps],
                tau_max,
                &opts,
                &ev,
                None,
            )?
        }
    };
    sol.events
        .first()
        .map(|e| e.t)
        .ok_or_else(|| Error::DomainError(format!("no escape within tau={tau_max}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numerical_flow_matches_closed_form() {
        let (eps, delta) = (1e-3, 1e-3);
        let t = quadratic_escape(eps, delta, 0.01, QuadraticMethod::Gd).unwrap();
        let x = quadratic_exact(eps, delta, QuadraticMethod::Gd, t);
        assert!((quadratic_loss(&x, eps) + 0.005).abs() < 1e-8);
        let t = quadratic_escape(eps, delta, 0.01, QuadraticMethod::Momentum).unwrap();
        let x = quadratic_exact(eps, delta, QuadraticMethod::Momentum, t);
        assert!((quadratic_loss(&x, eps) + 0.005).abs() < 1e-8);
    }

    #[test]
    fn small_eps_matches_predictions() {
        let (eps, gap) = (1e-4, 0.01);
        for m in [QuadraticMethod::Gd, QuadraticMethod::Momentum] {
            let t = quadratic_escape(eps, eps, gap, m).unwrap();
            let p = predicted_escape(eps, gap, m);
            assert!((t - p).abs() <= 0.15 * p, "{m:?}: {t} vs {p}");
        }
    }
}
