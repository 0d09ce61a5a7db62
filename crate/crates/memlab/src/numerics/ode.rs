//! Explicit ODE integration: Dormand-Prince 5(4) with its continuous
//! extension, and fixed-step Adams-Bashforth-Moulton 4 (PECE) with cubic
//! Hermite dense output. Events are located by bisection on the interpolant.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Rk45 { rtol: f64, atol: f64 },
    Abm4 { h: f64 },
}

impl Default for Method {
    fn default() -> Self {
        Method::Rk45 { rtol: 1e-9, atol: 1e-12 }
    }
}

/// Scalar event function `g(t, y)`; an event fires at the first sign change.
pub struct Event<'a> {
    pub g: Box<dyn Fn(f64, &[f64]) -> f64 + 'a>,
    pub terminal: bool,
}

impl<'a> Event<'a> {
    pub fn new(g: impl Fn(f64, &[f64]) -> f64 + 'a, terminal: bool) -> Self {
        Event { g: Box::new(g), terminal }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventHit {
    pub index: usize,
    pub t: f64,
    pub state: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

#[derive(Debug, Clone)]
enum Dense {
    /// Dormand-Prince continuous extension coefficients.
    Dopri([Vec<f64>; 5]),
    /// Cubic Hermite from endpoint values and slopes.
    Hermite { y0: Vec<f64>, y1: Vec<f64>, f0: Vec<f64>, f1: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub knots: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    dense: Vec<Dense>,
    pub events: Vec<EventHit>,
    pub stats: StepStats,
    /// Index of the terminal event that stopped integration, if any.
    pub terminated_by: Option<usize>,
}

#[derive(Clone)]
pub struct OdeOptions {
    pub method: Method,
    pub h_init: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { method: Method::default(), h_init: None, max_steps: 5_000_000 }
    }
}

impl OdeSolution {
    pub fn t_end(&self) -> f64 {
        *self.knots.last().expect("solution has at least one knot")
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("solution has at least one knot")
    }

    /// Dense-output evaluation; `t` is clamped to the integrated span.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let n = self.knots.len();
        if n == 1 || t <= self.knots[0] {
            return self.states[0].clone();
        }
        if t >= self.knots[n - 1] {
            return self.states[n - 1].clone();
        }
        let k = self.knots.partition_point(|&x| x <= t) - 1;
        self.eval_in(k, t)
    }

    fn eval_in(&self, k: usize, t: f64) -> Vec<f64> {
        let t0 = self.knots[k];
        let h = self.knots[k + 1] - t0;
        interpolate(&self.dense[k], (t - t0) / h, h)
    }

    /// First time in the span where `g` changes sign relative to its value at
    /// the initial state, refined by bisection to `t_tol`.
    pub fn first_crossing(&self, g: impl Fn(f64, &[f64]) -> f64, t_tol: f64) -> Option<f64> {
        let mut g_prev = g(self.knots[0], &self.states[0]);
        for k in 0..self.knots.len().saturating_sub(1) {
            let g_next = g(self.knots[k + 1], &self.states[k + 1]);
            if crosses(g_prev, g_next) {
                return Some(self.bisect(k, &g, g_prev, t_tol));
            }
            g_prev = g_next;
        }
        None
    }

    fn bisect(&self, k: usize, g: &dyn Fn(f64, &[f64]) -> f64, g_left: f64, t_tol: f64) -> f64 {
        let mut lo = self.knots[k];
        let mut hi = self.knots[k + 1];
        let s_left = g_left.signum();
        for _ in 0..200 {
            // Bisect to (near) machine resolution: the time tolerance is a
            // floor, and the event value itself should end up tiny.
            if hi - lo <= t_tol * 1e-6 {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let y = self.eval_in(k, mid);
            if (g(mid, &y)).signum() == s_left && g(mid, &y) != 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

fn crosses(a: f64, b: f64) -> bool {
    (a < 0.0 && b >= 0.0) || (a > 0.0 && b <= 0.0)
}

fn interpolate(d: &Dense, theta: f64, h: f64) -> Vec<f64> {
    match d {
        Dense::Dopri(r) => {
            let t1 = 1.0 - theta;
            (0..r[0].len())
                .map(|i| r[0][i] + theta * (r[1][i] + t1 * (r[2][i] + theta * (r[3][i] + t1 * r[4][i]))))
                .collect()
        }
        Dense::Hermite { y0, y1, f0, f1 } => {
            let t2 = theta * theta;
            let t3 = t2 * theta;
            let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
            let h10 = t3 - 2.0 * t2 + theta;
            let h01 = -2.0 * t3 + 3.0 * t2;
            let h11 = t3 - t2;
            (0..y0.len())
                .map(|i| h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i])
                .collect()
        }
    }
}

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn axpy_into(out: &mut [f64], y: &[f64], h: f64, terms: &[(f64, &[f64])]) {
    for i in 0..y.len() {
        let mut s = 0.0;
        for (c, k) in terms {
            s += c * k[i];
        }
        out[i] = y[i] + h * s;
    }
}

/// Integrates `y' = rhs(t, y)` from `t = 0` to `t_end`.
///
/// `admissible` lets the caller reject trial states (the step is retried with
/// a smaller size); a non-finite derivative is treated the same way.
pub fn solve_ode<F>(
    mut rhs: F,
    y0: &[f64],
    t_end: f64,
    opts: &OdeOptions,
    events: &[Event<'_>],
    admissible: Option<&dyn Fn(&[f64]) -> bool>,
) -> Result<OdeSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let mut sol = OdeSolution {
        knots: vec![0.0],
        states: vec![y0.to_vec()],
        dense: Vec::new(),
        events: Vec::new(),
        stats: StepStats::default(),
        terminated_by: None,
    };
    let mut g_prev: Vec<f64> = events.iter().map(|e| (e.g)(0.0, y0)).collect();
    let mut fired = vec![false; events.len()];
    let t_tol = 1e-9 * t_end.abs().max(1e-300);
    let ok = |y: &[f64], f: &[f64]| {
        y.iter().chain(f.iter()).all(|v| v.is_finite()) && admissible.is_none_or(|a| a(y))
    };

    let n = y0.len();
    let mut t = 0.0;
    let mut y = y0.to_vec();
    let mut f0 = vec![0.0; n];
    rhs(t, &y, &mut f0);
    sol.stats.rhs_evals += 1;
    if !f0.iter().all(|v| v.is_finite()) {
        return Err(Error::StepSizeUnderflow { t, h: 0.0 });
    }

    match opts.method {
        Method::Rk45 { rtol, atol } => {
            let mut h = opts.h_init.unwrap_or_else(|| initial_step(&y, &f0, rtol, atol, t_end));
            let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
                (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
            let mut ys = vec![0.0; n];
            let mut y1 = vec![0.0; n];
            let mut steps = 0;
            while t < t_end {
                if steps >= opts.max_steps {
                    return Err(Error::StepBudget { t, steps });
                }
                steps += 1;
                let last = t + h >= t_end;
                if last {
                    h = t_end - t;
                }
                if h <= 4.0 * f64::EPSILON * t.abs() || h < 1e-280 {
                    return Err(Error::StepSizeUnderflow { t, h });
                }
                let k1 = &f0;
                axpy_into(&mut ys, &y, h, &[(A21, k1)]);
                rhs(t + C2 * h, &ys, &mut k2);
                axpy_into(&mut ys, &y, h, &[(A31, k1), (A32, &k2)]);
                rhs(t + C3 * h, &ys, &mut k3);
                axpy_into(&mut ys, &y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]);
                rhs(t + C4 * h, &ys, &mut k4);
                axpy_into(&mut ys, &y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
                rhs(t + C5 * h, &ys, &mut k5);
                axpy_into(&mut ys, &y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
                rhs(t + h, &ys, &mut k6);
                axpy_into(&mut y1, &y, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
                rhs(t + h, &y1, &mut k7);
                sol.stats.rhs_evals += 6;

                let stages_finite = [&k2, &k3, &k4, &k5, &k6].iter().all(|k| k.iter().all(|v| v.is_finite()));
                if !stages_finite || !ok(&y1, &k7) {
                    sol.stats.rejected += 1;
                    h *= 0.25;
                    continue;
                }
                let mut err = 0.0;
                for i in 0..n {
                    let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                    let sc = atol + rtol * y[i].abs().max(y1[i].abs());
                    err += (e / sc).powi(2);
                }
                let err = (err / n as f64).sqrt();
                if err > 1.0 {
                    sol.stats.rejected += 1;
                    h *= (0.9 * err.powf(-0.2)).max(0.2);
                    continue;
                }
                let r1 = y.clone();
                let r2: Vec<f64> = (0..n).map(|i| y1[i] - y[i]).collect();
                let r3: Vec<f64> = (0..n).map(|i| h * k1[i] - r2[i]).collect();
                let r4: Vec<f64> = (0..n).map(|i| r2[i] - h * k7[i] - r3[i]).collect();
                let r5: Vec<f64> = (0..n)
                    .map(|i| h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]))
                    .collect();
                let t_new = if last { t_end } else { t + h };
                sol.stats.accepted += 1;
                sol.knots.push(t_new);
                sol.states.push(y1.clone());
                sol.dense.push(Dense::Dopri([r1, r2, r3, r4, r5]));
                y.copy_from_slice(&y1);
                f0.copy_from_slice(&k7);
                t = t_new;
                if check_events(&mut sol, events, &mut g_prev, &mut fired, t_tol) {
                    break;
                }
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                h *= fac;
            }
        }
        Method::Abm4 { h } => {
            if h <= 0.0 {
                return Err(Error::StepSizeUnderflow { t, h });
            }
            let nsteps = (t_end / h).ceil() as usize;
            // f history, newest last
            let mut hist: Vec<Vec<f64>> = vec![f0.clone()];
            let mut ys = vec![0.0; n];
            let mut fs = vec![0.0; n];
            for step in 0..nsteps {
                let hh = if step + 1 == nsteps { t_end - t } else { h };
                let y1: Vec<f64>;
                if hist.len() < 4 {
                    // Classical RK4 start-up.
                    let k1 = hist.last().unwrap().clone();
                    let mut k2 = vec![0.0; n];
                    let mut k3 = vec![0.0; n];
                    let mut k4 = vec![0.0; n];
                    axpy_into(&mut ys, &y, hh, &[(0.5, &k1)]);
                    rhs(t + 0.5 * hh, &ys, &mut k2);
                    axpy_into(&mut ys, &y, hh, &[(0.5, &k2)]);
                    rhs(t + 0.5 * hh, &ys, &mut k3);
                    axpy_into(&mut ys, &y, hh, &[(1.0, &k3)]);
                    rhs(t + hh, &ys, &mut k4);
                    sol.stats.rhs_evals += 3;
                    y1 = (0..n)
                        .map(|i| y[i] + hh / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                        .collect();
                } else {
                    let l = hist.len();
                    let (f3, f2, f1, f0_) = (&hist[l - 1], &hist[l - 2], &hist[l - 3], &hist[l - 4]);
                    let pred: Vec<f64> = (0..n)
                        .map(|i| y[i] + hh / 24.0 * (55.0 * f3[i] - 59.0 * f2[i] + 37.0 * f1[i] - 9.0 * f0_[i]))
                        .collect();
                    rhs(t + hh, &pred, &mut fs);
                    sol.stats.rhs_evals += 1;
                    y1 = (0..n)
                        .map(|i| y[i] + hh / 24.0 * (9.0 * fs[i] + 19.0 * f3[i] - 5.0 * f2[i] + f1[i]))
                        .collect();
                }
                let mut f1 = vec![0.0; n];
                rhs(t + hh, &y1, &mut f1);
                sol.stats.rhs_evals += 1;
                if !ok(&y1, &f1) {
                    return Err(Error::StepSizeUnderflow { t, h: hh });
                }
                let t_new = if step + 1 == nsteps { t_end } else { t + hh };
                sol.stats.accepted += 1;
                sol.knots.push(t_new);
                sol.states.push(y1.clone());
                sol.dense.push(Dense::Hermite {
                    y0: y.clone(),
                    y1: y1.clone(),
                    f0: hist.last().unwrap().clone(),
                    f1: f1.clone(),
                });
                y = y1;
                t = t_new;
                hist.push(f1);
                if hist.len() > 4 {
                    hist.remove(0);
                }
                if check_events(&mut sol, events, &mut g_prev, &mut fired, t_tol) {
                    break;
                }
            }
        }
    }
    Ok(sol)
}

/// Returns true when a terminal event fired; the solution is then truncated
/// at the event time.
fn check_events(
    sol: &mut OdeSolution,
    events: &[Event<'_>],
    g_prev: &mut [f64],
    fired: &mut [bool],
    t_tol: f64,
) -> bool {
    let k = sol.knots.len() - 2;
    let mut hits: Vec<EventHit> = Vec::new();
    for (i, ev) in events.iter().enumerate() {
        let g_new = (ev.g)(sol.knots[k + 1], &sol.states[k + 1]);
        if !fired[i] && crosses(g_prev[i], g_new) {
            let tc = sol.bisect(k, &*ev.g, g_prev[i], t_tol);
            hits.push(EventHit { index: i, t: tc, state: sol.eval_in(k, tc) });
        }
        g_prev[i] = g_new;
    }
    hits.sort_by(|a, b| a.t.total_cmp(&b.t));
    let mut stop = None;
    for hit in hits {
        if stop.is_some() {
            break;
        }
        fired[hit.index] = true;
        if events[hit.index].terminal {
            stop = Some((hit.index, hit.t, hit.state.clone()));
        }
        sol.events.push(hit);
    }
    if let Some((idx, tc, state)) = stop {
        // Shrink the final interval to end at the event; the interpolant on
        // the shortened interval is the restriction of the old one.
        let t0 = sol.knots[k];
        let h_old = sol.knots[k + 1] - t0;
        let h_new = tc - t0;
        if h_new > 0.0 {
            let d = sol.dense.pop().unwrap();
            let s = h_new / h_old;
            // Refit as cubic Hermite through the restricted curve.
            let y0 = interpolate(&d, 0.0, h_old);
            let f0 = derivative_at(&d, 0.0, h_old);
            let f1 = derivative_at(&d, s, h_old);
            sol.dense.push(Dense::Hermite { y0, y1: state.clone(), f0, f1 });
            sol.knots[k + 1] = tc;
            sol.states[k + 1] = state;
        } else {
            sol.dense.pop();
            sol.knots.pop();
            sol.states.pop();
        }
        sol.terminated_by = Some(idx);
        return true;
    }
    false
}

fn derivative_at(d: &Dense, theta: f64, h: f64) -> Vec<f64> {
    let eps = 1e-6;
    let lo = (theta - eps).max(0.0);
    let hi = (theta + eps).min(1.0);
    let a = interpolate(d, lo, h);
    let b = interpolate(d, hi, h);
    (0..a.len()).map(|i| (b[i] - a[i]) / ((hi - lo) * h)).collect()
}

fn initial_step(y: &[f64], f: &[f64], rtol: f64, atol: f64, t_end: f64) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..y.len() {
        let sc = atol + rtol * y[i].abs();
        d0 += (y[i] / sc).powi(2);
        d1 += (f[i] / sc).powi(2);
    }
    let d0 = (d0 / y.len() as f64).sqrt();
    let d1 = (d1 / y.len() as f64).sqrt();
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(t_end).max(1e-250)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(_: f64, y: &[f64], dy: &mut [f64]) {
        dy[0] = -y[0];
    }

    fn oscillator(_: f64, y: &[f64], dy: &mut [f64]) {
        dy[0] = y[1];
        dy[1] = -y[0];
    }

    #[test]
    fn exponential_decay() {
        let sol = solve_ode(decay, &[1.0], 1.0, &OdeOptions::default(), &[], None).unwrap();
        assert!((sol.last_state()[0] - (-1.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn dense_output_between_knots() {
        let opts = OdeOptions { method: Method::Rk45 { rtol: 1e-10, atol: 1e-13 }, ..Default::default() };
        let sol = solve_ode(decay, &[1.0], 5.0, &opts, &[], None).unwrap();
        for i in 0..100 {
            let t = 0.05 * i as f64 + 0.013;
            assert!((sol.eval(t)[0] - (-t).exp()).abs() < 1e-9, "t={t}");
        }
        for (k, &t) in sol.knots.iter().enumerate() {
            let v = sol.eval(t)[0];
            assert!((v - sol.states[k][0]).abs() <= 1e-12 * v.abs().max(1e-300));
        }
    }

    #[test]
    fn oscillator_energy() {
        let opts = OdeOptions { method: Method::Rk45 { rtol: 1e-9, atol: 1e-12 }, ..Default::default() };
        let sol = solve_ode(oscillator, &[1.0, 0.0], 100.0, &opts, &[], None).unwrap();
        for s in &sol.states {
            assert!((s[0] * s[0] + s[1] * s[1] - 1.0).abs() < 1e-6);
        }
        assert!((sol.last_state()[0] - 100f64.cos()).abs() < 1e-6);
    }

    #[test]
    fn abm4_is_fourth_order() {
        let exact = (-2.0f64).exp();
        let err = |h: f64| {
            let sol = solve_ode(decay, &[1.0], 2.0, &OdeOptions { method: Method::Abm4 { h }, ..Default::default() }, &[], None)
                .unwrap();
            (sol.last_state()[0] - exact).abs()
        };
        let ratio = err(0.02) / err(0.01);
        assert!(ratio > 12.0, "ratio {ratio}");
    }

    #[test]
    fn terminal_event_located() {
        let ev = [Event::new(|_, y: &[f64]| y[0] - 0.5, true)];
        let sol = solve_ode(decay, &[1.0], 10.0, &OdeOptions::default(), &ev, None).unwrap();
        assert_eq!(sol.terminated_by, Some(0));
        let t = sol.events[0].t;
        assert!((t - 2f64.ln()).abs() < 1e-8);
        assert!((sol.t_end() - t).abs() < 1e-14);
        assert!((sol.eval(t)[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn missing_event_reported_as_none() {
        let ev = [Event::new(|_, y: &[f64]| y[0] + 1.0, false)];
        let sol = solve_ode(decay, &[1.0], 3.0, &OdeOptions::default(), &ev, None).unwrap();
        assert!(sol.events.is_empty());
        assert!(sol.first_crossing(|_, y| y[0] - 0.1, 1e-10).is_some());
        assert!(sol.first_crossing(|_, y| y[0] - 0.01, 1e-10).is_none());
    }

    #[test]
    fn inadmissible_states_are_avoided() {
        // y' = -1 drives y through zero at t = 1; forbid y < 0.5 steps overshooting
        let adm = |y: &[f64]| y[0] > 0.25;
        let ev = [Event::new(|_, y: &[f64]| y[0] - 0.5, true)];
        let sol = solve_ode(|_, _, dy| dy[0] = -1.0, &[1.0], 5.0, &OdeOptions::default(), &ev, Some(&adm)).unwrap();
        assert!((sol.t_end() - 0.5).abs() < 1e-8);
    }
}
