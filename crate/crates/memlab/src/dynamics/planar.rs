//! Two-rate flow with coefficients frozen at `(1, 1)` against the target
//! `e^{-w1* t} + e^{-w2* t}`, and its symmetric one-dimensional reduction.
//!
//! The pair is integrated as `(w1, ln(w2 - w1), v)` where `v` follows the
//! symmetric flow from the same start; the gap equation carries an exact
//! factor `(w2 - w1)`, so tiny gaps are resolved without cancellation.

use crate::error::{Error, Result};
use crate::numerics::ode::{solve_ode, Event, Method, OdeOptions};
use crate::numerics::poly::real_roots;
use serde::Serialize;

/// `J(w1, w2)` with unit coefficients on both sides.
pub fn loss_2d(w1: f64, w2: f64, ws: (f64, f64)) -> f64 {
    let (s1, s2) = ws;
    let model = 1.0 / (2.0 * w1) + 1.0 / (2.0 * w2) + 2.0 / (w1 + w2);
    let cross = 1.0 / (w1 + s1) + 1.0 / (w1 + s2) + 1.0 / (w2 + s1) + 1.0 / (w2 + s2);
    let target = 1.0 / (2.0 * s1) + 1.0 / (2.0 * s2) + 2.0 / (s1 + s2);
    model - 2.0 * cross + target
}

/// Right-hand side of the symmetric flow `v' = 1/v^2 - 2/(v+w1*)^2 - 2/(v+w2*)^2`.
pub fn symmetric_rhs(v: f64, ws: (f64, f64)) -> f64 {
    1.0 / (v * v) - 2.0 / (v + ws.0).powi(2) - 2.0 / (v + ws.1).powi(2)
}

/// Ascending coefficients of
/// `p(v) = (v+a)^2 (v+b)^2 - 2 v^2 [(v+a)^2 + (v+b)^2]`, whose positive roots
/// are the equilibria of the symmetric flow.
pub fn equilibrium_polynomial(ws: (f64, f64)) -> Vec<f64> {
    let (a, b) = ws;
    let mul = |p: &[f64], q: &[f64]| {
        let mut r = vec![0.0; p.len() + q.len() - 1];
        for (i, x) in p.iter().enumerate() {
            for (j, y) in q.iter().enumerate() {
                r[i + j] += x * y;
            }
        }
        r
    };
    let pa = mul(&[a, 1.0], &[a, 1.0]);
    let pb = mul(&[b, 1.0], &[b, 1.0]);
    let mut p = mul(&pa, &pb);
    let inner: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x + y).collect();
    let sub = mul(&[0.0, 0.0, 2.0], &inner);
    for (i, s) in sub.iter().enumerate() {
        p[i] -= s;
    }
    p
}

/// Growth rate of the gap near the symmetric line:
/// `W(w) = -1/w^3 + 4/(w+w1*)^3 + 4/(w+w2*)^3`.
pub fn gap_rate(w: f64, ws: (f64, f64)) -> f64 {
    -1.0 / w.powi(3) + 4.0 / (w + ws.0).powi(3) + 4.0 / (w + ws.1).powi(3)
}

/// `(d/dtau)(w2 - w1) / (w2 - w1)` for the frozen-coefficient flow.
fn gap_factor(w1: f64, d: f64, ws: (f64, f64)) -> f64 {
    let w2 = w1 + d;
    let term = |c: f64| 2.0 * (w1 + w2 + 2.0 * c) / ((w1 + c).powi(2) * (w2 + c).powi(2));
    -(2.0 * w1 + d) / (2.0 * w1 * w1 * w2 * w2) + term(ws.0) + term(ws.1)
}

fn w1_rhs(w1: f64, w2: f64, ws: (f64, f64)) -> f64 {
    1.0 / (2.0 * w1 * w1) + 2.0 / (w1 + w2).powi(2) - 2.0 / (w1 + ws.0).powi(2) - 2.0 / (w1 + ws.1).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanarOptions {
    /// Gap tolerance defining the separation time.
    pub eps_sep: f64,
    /// Loss-gap tolerance defining the plateau exit time.
    pub eps_loss: f64,
    pub rtol: f64,
    /// Absolute tolerance. `ln(w2 - w1)` passes through zero, so this cannot
    /// be negligibly small.
    pub atol: f64,
}

impl Default for PlanarOptions {
    fn default() -> Self {
        PlanarOptions { eps_sep: 1e-2, eps_loss: 1e-4, rtol: 1e-11, atol: 1e-14 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanarResult {
    /// First tau with `|w2 - w1| >= eps_sep`.
    pub t_separation: Option<f64>,
    /// First tau with `|J(w1, w2) - J(u, u)| >= eps_loss`, `u = (w1 + w2)/2`,
    /// counted only after the difference has first dropped below
    /// `eps_loss` (the early transient from a tiny `xi` is excluded).
    pub t_plateau: Option<f64>,
    /// Positive root of the equilibrium polynomial the symmetric flow approaches.
    pub v_limit: f64,
    /// Symmetric-flow value at the end of integration.
    pub v_end: f64,
    /// `W(v_limit)`.
    pub gap_rate: f64,
    /// Samples `(tau, w1, w2, v, J(w1,w2), J(v,v))`.
    pub samples: Vec<[f64; 6]>,
    /// Samples `(tau, gap, predicted gap)` with the prediction
    /// `delta exp(int_0^tau W(v(s)) ds)`.
    pub gap_check: Vec<[f64; 3]>,
}

/// Integrates the frozen-coefficient pair from `(xi, xi + delta)` together
/// with the symmetric flow from `xi`. `delta = 0` integrates the symmetric
/// line only (no separation can occur).
pub fn flow_2d_symmetric(ws: (f64, f64), xi: f64, delta: f64, tau_max: f64, opts: PlanarOptions) -> Result<PlanarResult> {
    if !(0.0 < ws.0 && ws.0 < ws.1) {
        return Err(Error::DomainError("need 0 < w1* < w2*".into()));
    }
    if !(xi > 0.0 && delta >= 0.0) {
        return Err(Error::DomainError("need xi > 0 and delta >= 0".into()));
    }
    let separated = delta > 0.0;
    // state: w1, ln gap, v, int_0^tau W(v)
    let log_d0 = if separated { delta.ln() } else { 0.0 };
    let y0 = [xi, log_d0, xi, 0.0];
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
        let (w1, v) = (y[0], y[2]);
        if separated {
            let d = y[1].exp();
            dy[0] = w1_rhs(w1, w1 + d, ws);
            dy[1] = gap_factor(w1, d, ws);
        } else {
            dy[0] = symmetric_rhs(w1, ws);
            dy[1] = 0.0;
        }
        dy[2] = symmetric_rhs(v, ws);
        dy[3] = gap_rate(v, ws);
    };
    let ln_eps = opts.eps_sep.ln();
    let events = [Event::new(move |_, y: &[f64]| if separated { y[1] - ln_eps } else { -1.0 }, false)];
    let admissible = |y: &[f64]| y[0] > 0.0 && y[2] > 0.0;
    let ode_opts = OdeOptions { method: Method::Rk45 { rtol: opts.rtol, atol: opts.atol }, ..Default::default() };
    let sol = solve_ode(rhs, &y0, tau_max, &ode_opts, &events, Some(&admissible))?;

    let v_end = sol.last_state()[2];
    let roots: Vec<f64> = real_roots(&equilibrium_polynomial(ws))?.into_iter().filter(|r| *r > 0.0).collect();
    let v_limit = roots
        .iter()
        .copied()
        .min_by(|a, b| (a - v_end).abs().total_cmp(&(b - v_end).abs()))
        .ok_or_else(|| Error::DomainError("equilibrium polynomial has no positive root".into()))?;

    let loss_gap = |y: &[f64]| {
        let d = y[1].exp();
        let u = y[0] + 0.5 * d;
        (loss_2d(y[0], y[0] + d, ws) - loss_2d(u, u, ws)).abs()
    };
    let t_plateau = if separated {
        let armed = sol.knots.iter().zip(&sol.states).find(|(_, y)| loss_gap(y) < opts.eps_loss).map(|(t, _)| *t);
        armed.and_then(|ta| {
            sol.first_crossing(|t, y| if t <= ta { -1.0 } else { loss_gap(y) - opts.eps_loss }, 1e-12 * tau_max)
        })
    } else {
        None
    };
    let mut samples = Vec::new();
    let mut gap_check = Vec::new();
    for (t, y) in sol.knots.iter().zip(&sol.states) {
        let w2 = if separated { y[0] + y[1].exp() } else { y[0] };
        samples.push([*t, y[0], w2, y[2], loss_2d(y[0], w2, ws), loss_2d(y[2], y[2], ws)]);
        if separated {
            gap_check.push([*t, y[1].exp(), delta * y[3].exp()]);
        }
    }
    Ok(PlanarResult {
        t_separation: sol.events.first().map(|e| e.t),
        t_plateau,
        v_limit,
        v_end,
        gap_rate: gap_rate(v_limit, ws),
        samples,
        gap_check,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::poly::horner;

    #[test]
    fn polynomial_signs() {
        let p = equilibrium_polynomial((1.0, 2.0));
        assert!((horner(&p, 1.0) - 10.0).abs() < 1e-12);
        assert!((horner(&p, 2.0) + 56.0).abs() < 1e-12);
    }

    #[test]
    fn polynomial_matches_rhs_numerator() {
        let ws = (1.3, 4.0);
        let p = equilibrium_polynomial(ws);
        for &v in &[0.2, 0.9, 2.5] {
            let scale = v * v * (v + ws.0).powi(2) * (v + ws.1).powi(2);
            assert!((symmetric_rhs(v, ws) * scale - horner(&p, v)).abs() < 1e-10);
        }
    }

    #[test]
    fn gap_factor_limit_is_gap_rate() {
        let ws = (1.0, 2.0);
        for &w in &[0.1, 0.7, 1.5] {
            assert!((gap_factor(w, 1e-9, ws) - gap_rate(w, ws)).abs() < 1e-6 * gap_rate(w, ws).abs().max(1.0));
        }
    }

    #[test]
    fn symmetric_flow_reaches_root() {
        let r = flow_2d_symmetric((1.0, 2.0), 0.5, 0.0, 200.0, PlanarOptions::default()).unwrap();
        assert!(r.v_limit > 1.0 && r.v_limit < 2.0);
        assert!((r.v_end - r.v_limit).abs() < 1e-6);
        assert!(horner(&equilibrium_polynomial((1.0, 2.0)), r.v_limit).abs() < 1e-8);
        assert!(r.t_separation.is_none() && r.t_plateau.is_none());
        for s in &r.samples {
            assert_eq!(s[1], s[2]);
        }
    }

    #[test]
    fn gap_follows_linearisation_while_small() {
        let delta = 1e-6;
        let r = flow_2d_symmetric((1.0, 2.0), 10.0 * delta, delta, 3000.0, PlanarOptions::default()).unwrap();
        for g in r.gap_check.iter().filter(|g| g[1] < 10.0 * delta) {
            assert!((g[1] - g[2]).abs() <= 0.05 * g[2], "{g:?}");
        }
        assert!(r.t_separation.is_some());
    }
}
