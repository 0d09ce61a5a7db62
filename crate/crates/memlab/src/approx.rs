//! Constructive exponential-sum approximation through the substitution
//! `s = exp(-beta t/(alpha+1))`: the kernel becomes `s q(s)` on `(0, 1]` and a
//! polynomial fit of `q` gives a sum of exponentials with rates that are
//! multiples of `beta/(alpha+1)`.

use crate::error::{Error, Result};
use crate::kernels::MemoryKernel;
use crate::numerics::poly::{chebyshev_nodes, clenshaw_shifted, poly_fit};
use crate::numerics::quad::integrate_with_breaks;
use rayon::prelude::*;
use serde::Serialize;

pub const MAX_WIDTH: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateConstruction {
    pub alpha: u32,
    pub beta: f64,
    pub m: usize,
    /// Readout, all ones.
    pub c: Vec<f64>,
    /// Diagonal recurrent rates `-k beta/(alpha+1)`, `k = 1..m`.
    pub rates: Vec<f64>,
    /// Input weights: monomial coefficients of `Q`. These lose accuracy
    /// quickly with `m`; [`RateConstruction::eval`] uses `cheb` instead.
    pub u: Vec<f64>,
    /// `Q` in the shifted Chebyshev basis on `[0, 1]`.
    pub cheb: Vec<f64>,
    /// Sampled `max_k sup_t beta^{-k} |e^{beta t} rho^{(k)}(t)|`, `k <= alpha`.
    pub gamma_estimate: f64,
}

impl RateConstruction {
    fn step(&self) -> f64 {
        self.beta / (self.alpha as f64 + 1.0)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let s = (-self.step() * t).exp();
        s * clenshaw_shifted(&self.cheb, s)
    }

    /// `c^T e^{W t} U` with the diagonal `W`.
    pub fn eval_rnn(&self, t: f64) -> f64 {
        self.c.iter().zip(&self.rates).zip(&self.u).map(|((c, r), u)| c * (r * t).exp() * u).sum()
    }

    /// `q(s) - Q(s)`; the L1 error in `t` is `(alpha+1)/beta` times its L1
    /// norm on `[0, 1]`.
    fn mismatch(&self, target: &MemoryKernel, s: f64) -> f64 {
        q_of(target, self.step(), s) - clenshaw_shifted(&self.cheb, s)
    }
}

fn q_of(target: &MemoryKernel, step: f64, s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let t = -s.ln() / step;
    target.eval(t) / s
}

fn nth_derivative(target: &MemoryKernel, k: u32, t: f64) -> f64 {
    match k {
        0 => target.eval(t),
        1 => target.derivative(t),
        _ => {
            let h = 1e-3 * (1.0 + t);
            let lo = (t - h).max(0.0);
            (nth_derivative(target, k - 1, lo + 2.0 * h) - nth_derivative(target, k - 1, lo)) / (2.0 * h)
        }
    }
}

/// Fits `q` at Chebyshev nodes by a degree `m - 1` polynomial.
pub fn rate_construct(target: &MemoryKernel, alpha: u32, beta: f64, m: usize) -> Result<RateConstruction> {
    target.validate()?;
    if m == 0 || m > MAX_WIDTH {
        return Err(Error::DomainError(format!("width {m} outside 1..={MAX_WIDTH}")));
    }
    if !(beta > 0.0) {
        return Err(Error::DomainError("beta must be positive".into()));
    }
    let step = beta / (alpha as f64 + 1.0);
    // q must stay bounded as s -> 0, i.e. rho(t) e^{step t} bounded
    let t_hi = 20.0 * (alpha as f64 + 1.0) / beta;
    let grid: Vec<f64> = (0..=400).map(|i| t_hi * i as f64 / 400.0).collect();
    let env: Vec<f64> = grid.iter().map(|&t| target.eval(t).abs() * (step * t).exp()).collect();
    let head = env[..300].iter().fold(0.0f64, |a, &b| a.max(b));
    let tail = env[300..].iter().fold(0.0f64, |a, &b| a.max(b));
    if !(tail <= 1.5 * head + 1e-300) {
        return Err(Error::DecayViolation(format!(
            "rho(t) e^({step} t) grows from {head:e} to {tail:e} on [0, {t_hi}]"
        )));
    }
    let mut gamma_estimate: f64 = 0.0;
    for k in 0..=alpha {
        for &t in &grid {
            gamma_estimate = gamma_estimate.max(beta.powi(-(k as i32)) * (beta * t).exp() * nth_derivative(target, k, t).abs());
        }
    }
    let nodes = chebyshev_nodes((4 * m).max(16));
    let samples: Vec<(f64, f64)> = nodes.iter().map(|&s| (s, q_of(target, step, s))).collect();
    let fit = poly_fit(&samples, m - 1, false)?;
    Ok(RateConstruction {
        alpha,
        beta,
        m,
        c: vec![1.0; m],
        rates: (1..=m).map(|k| -(k as f64) * step).collect(),
        u: fit.monomial,
        cheb: fit.cheb,
        gamma_estimate,
    })
}

/// `int_0^inf |rho - phi| dt`, computed as `(alpha+1)/beta int_0^1 |q - Q| ds`
/// with the sign changes of `q - Q` located first and used as panel breaks.
pub fn l1_error(con: &RateConstruction, target: &MemoryKernel) -> Result<f64> {
    let f = |s: f64| con.mismatch(target, s);
    let n = 32 * con.m.max(4);
    let mut breaks = vec![0.0];
    let mut prev = (1e-300_f64, f(1e-300));
    let mut scale: f64 = 0.0;
    for i in 1..=n {
        let s = i as f64 / n as f64;
        let v = f(s);
        scale = scale.max(v.abs());
        if v != 0.0 && prev.1 != 0.0 && v.signum() != prev.1.signum() {
            let (mut lo, mut hi, flo) = (prev.0, s, prev.1);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if f(mid).signum() == flo.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            breaks.push(0.5 * (lo + hi));
        }
        prev = (s, v);
    }
    breaks.push(1.0);
    let tol = (1e-9 * scale).max(1e-16);
    let mut g = |s: f64| f(s).abs();
    let r = integrate_with_breaks(&mut g, &breaks, tol)?;
    Ok((con.alpha as f64 + 1.0) / con.beta * r.value)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Truncation {
    pub kernel: MemoryKernel,
    /// `int_T^inf rho`.
    pub tail_bound: f64,
}

/// Cuts a power law at `T`; the tail is `scale (1+T)^{-omega}/omega` with
/// `omega = exponent - 1`.
pub fn truncate_and_bound(target: &MemoryKernel, cutoff: f64) -> Result<Truncation> {
    let MemoryKernel::PowerLaw { exponent, scale } = *target else {
        return Err(Error::InvalidKernel("truncation bound needs a power law".into()));
    };
    if !(cutoff >= 1.0) {
        return Err(Error::DomainError(format!("cutoff {cutoff} < 1")));
    }
    let omega = exponent - 1.0;
    Ok(Truncation {
        kernel: MemoryKernel::truncated(target.clone(), cutoff)?,
        tail_bound: scale * (1.0 + cutoff).powf(-omega) / omega,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WidthPoint {
    pub m: usize,
    pub cutoff: Option<f64>,
    pub beta: f64,
    pub l1_error: f64,
    pub tail_bound: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WidthResult {
    pub m_min: Option<usize>,
    /// Running minimum of the certified error over widths `1..=m`.
    pub curve: Vec<WidthPoint>,
}

/// Certified total error `tail + l1` for a power law at width `m` and cutoff
/// `T`, using `beta = 2/T`.
pub fn truncated_bound(target: &MemoryKernel, alpha: u32, m: usize, cutoff: f64) -> Result<WidthPoint> {
    let tr = truncate_and_bound(target, cutoff)?;
    let beta = 2.0 / cutoff;
    let con = rate_construct(&tr.kernel, alpha, beta, m)?;
    let e = l1_error(&con, &tr.kernel)?;
    Ok(WidthPoint { m, cutoff: Some(cutoff), beta, l1_error: e, tail_bound: tr.tail_bound, total: e + tr.tail_bound })
}

/// Golden-section search over `ln T` in `[0, ln t_max]`.
fn best_cutoff(target: &MemoryKernel, alpha: u32, m: usize, t_max: f64) -> Result<WidthPoint> {
    let f = |x: f64| truncated_bound(target, alpha, m, x.exp());
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.0, t_max.ln());
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    let mut best = if f1.total <= f2.total { f1.clone() } else { f2.clone() };
    for _ in 0..40 {
        if b - a < 1e-3 {
            break;
        }
        if f1.total <= f2.total {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2)?;
        }
        for p in [&f1, &f2] {
            if p.total < best.total {
                best = p.clone();
            }
        }
    }
    Ok(best)
}

/// Smallest width whose certified L1 error is at most `eps`. Power laws are
/// truncated with the cutoff chosen by golden-section search; exponential
/// sums use `beta = (alpha+1) min rate` directly.
pub fn min_width(target: &MemoryKernel, eps: f64, m_cap: usize, alpha: u32) -> Result<WidthResult> {
    if !(eps > 1e-3 && eps < 1.0) {
        return Err(Error::DomainError(format!("eps={eps} outside (1e-3, 1)")));
    }
    if m_cap == 0 || m_cap > MAX_WIDTH {
        return Err(Error::DomainError(format!("m_cap {m_cap} outside 1..={MAX_WIDTH}")));
    }
    let points: Vec<WidthPoint> = match target {
        MemoryKernel::PowerLaw { exponent, scale } => {
            let omega = exponent - 1.0;
            // beyond this cutoff the tail alone is below eps/1000
            let t_max = ((1000.0 * scale / (omega * eps)).powf(1.0 / omega)).clamp(10.0, 1e8);
            (1..=m_cap).into_par_iter().map(|m| best_cutoff(target, alpha, m, t_max)).collect::<Result<_>>()?
        }
        MemoryKernel::ExpSum(es) => {
            let wmin = es.rates.iter().copied().fold(f64::INFINITY, f64::min);
            let beta = (alpha as f64 + 1.0) * wmin;
            (1..=m_cap)
                .into_par_iter()
                .map(|m| {
                    let con = rate_construct(target, alpha, beta, m)?;
                    let e = l1_error(&con, target)?;
                    Ok(WidthPoint { m, cutoff: None, beta, l1_error: e, tail_bound: 0.0, total: e })
                })
                .collect::<Result<_>>()?
        }
        _ => return Err(Error::InvalidKernel("min_width supports power laws and exponential sums".into())),
    };
    // a wider model can always reproduce a narrower one, so report the
    // running minimum
    let mut curve = Vec::with_capacity(points.len());
    let mut best: Option<WidthPoint> = None;
    for p in points {
        if best.as_ref().is_none_or(|b| p.total < b.total) {
            best = Some(p.clone());
        }
        let b = best.clone().expect("set above");
        curve.push(WidthPoint { m: p.m, ..b });
    }
    let m_min = curve.iter().find(|p| p.total <= eps).map(|p| p.m);
    if m_min.is_none() {
        let best = curve.last().map_or(f64::INFINITY, |p| p.total);
        return Err(Error::CapExceeded { m: m_cap, best });
    }
    Ok(WidthResult { m_min, curve })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_exponential_is_exact() {
        let t = MemoryKernel::expsum(vec![1.0], vec![1.0]).unwrap();
        for m in [1, 3, 8] {
            let c = rate_construct(&t, 1, 2.0, m).unwrap();
            assert!(l1_error(&c, &t).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn packaged_form_matches() {
        let t = MemoryKernel::expsum(vec![1.0, 0.5], vec![1.0, 2.3]).unwrap();
        let c = rate_construct(&t, 1, 1.0, 8).unwrap();
        for i in 0..50 {
            let x = 0.2 * i as f64;
            assert!((c.eval(x) - c.eval_rnn(x)).abs() <= 1e-10, "{x}");
        }
        assert!(c.rates.windows(2).all(|p| p[1] < p[0] && p[0] < 0.0));
    }

    #[test]
    fn error_bounds_functional_probe() {
        // |int rho(s) x(t-s) ds - int phi(s) x(t-s) ds| <= L1 for |x| <= 1
        let t = MemoryKernel::expsum(vec![1.0, 1.0], vec![1.0, 2.7]).unwrap();
        let c = rate_construct(&t, 1, 1.0, 4).unwrap();
        let e = l1_error(&c, &t).unwrap();
        for k in 0..5 {
            let x = |u: f64| ((k as f64 + 1.0) * u).sin();
            let g = |s: f64| (t.eval(s) - c.eval(s)) * x(3.0 - s);
            let v = crate::numerics::quad::integrate(g, 0.0, 3.0, 1e-12).unwrap().value;
            assert!(v.abs() <= e);
        }
    }

    #[test]
    fn error_shrinks_with_width() {
        let t = MemoryKernel::expsum(vec![1.0, 1.0], vec![1.0, 2.7]).unwrap();
        let e = |m| l1_error(&rate_construct(&t, 1, 1.0, m).unwrap(), &t).unwrap();
        for m in [4, 8, 16] {
            assert!(e(m + 8) <= e(m));
        }
    }

    #[test]
    fn decay_violation() {
        let t = MemoryKernel::expsum(vec![1.0], vec![1.0]).unwrap();
        assert!(matches!(rate_construct(&t, 1, 3.0, 4), Err(Error::DecayViolation(_))));
    }

    #[test]
    fn truncation_tail() {
        let p = MemoryKernel::power_law(2.0, 1.0).unwrap();
        let tr = truncate_and_bound(&p, 9.0).unwrap();
        assert!((tr.tail_bound - 0.1).abs() < 1e-15);
        assert!(truncate_and_bound(&p, 20.0).unwrap().tail_bound < tr.tail_bound);
        let con = rate_construct(&tr.kernel, 1, 2.0 / 9.0, 8).unwrap();
        assert!(l1_error(&con, &tr.kernel).unwrap().is_finite());
    }

    #[test]
    fn width_one_for_single_exponential() {
        let t = MemoryKernel::expsum(vec![1.0], vec![1.0]).unwrap();
        assert_eq!(min_width(&t, 0.5, 4, 1).unwrap().m_min, Some(1));
    }
}
