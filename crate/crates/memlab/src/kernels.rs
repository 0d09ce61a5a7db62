//! Target memory kernels `rho(t)` on `[0, inf)`: evaluation, Laplace
//! transforms and their derivatives (the moments `int t^n e^{-st} rho(t) dt`),
//! and squared L2 norms.

use crate::error::{Error, Result};
use crate::numerics::quad::{integrate_semiinf_from, integrate_with_breaks, TailHint};
use crate::numerics::special::{erfc, erfcx};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Absolute tolerance used whenever a kernel integral falls back to quadrature.
pub const QUAD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpSum {
    pub coeffs: Vec<f64>,
    pub rates: Vec<f64>,
}

impl ExpSum {
    pub fn new(coeffs: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        let k = ExpSum { coeffs, rates };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if self.coeffs.len() != self.rates.len() || self.coeffs.is_empty() {
            return Err(Error::InvalidKernel("expsum needs equally many (>= 1) coeffs and rates".into()));
        }
        if !self.rates.iter().all(|&w| w > 0.0 && w.is_finite()) {
            return Err(Error::InvalidKernel("expsum rates must be positive".into()));
        }
        if !self.coeffs.iter().all(|a| a.is_finite()) {
            return Err(Error::InvalidKernel("expsum coeffs must be finite".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// All coefficients nonzero and all rates pairwise distinct (exact comparison).
    pub fn is_nondegenerate(&self) -> bool {
        self.coeffs.iter().all(|&a| a != 0.0)
            && (0..self.rates.len()).all(|i| (i + 1..self.rates.len()).all(|j| self.rates[i] != self.rates[j]))
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().zip(&self.rates).map(|(a, w)| a * (-w * t).exp()).sum()
    }

    fn derivative(&self, t: f64) -> f64 {
        self.coeffs.iter().zip(&self.rates).map(|(a, w)| -a * w * (-w * t).exp()).sum()
    }

    /// `n! sum a_j / (s + w_j)^(n+1)`.
    pub fn moment(&self, n: u32, s: f64) -> f64 {
        let fact: f64 = (1..=n).map(|k| k as f64).product();
        fact * self.coeffs.iter().zip(&self.rates).map(|(a, w)| a / (s + w).powi(n as i32 + 1)).sum::<f64>()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        let mut acc = 0.0;
        for (ai, wi) in self.coeffs.iter().zip(&self.rates) {
            for (aj, wj) in self.coeffs.iter().zip(&self.rates) {
                acc += ai * aj / (wi + wj);
            }
        }
        acc
    }
}

/// `c0 exp(-(t - mu)^2 / (2 sigma^2))` restricted to `t >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianBump {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

impl GaussianBump {
    pub fn new(amplitude: f64, center: f64, width: f64) -> Result<Self> {
        let b = GaussianBump { amplitude, center, width };
        b.validate()?;
        Ok(b)
    }

    /// Bump centred at `1/omega`.
    pub fn with_memory(amplitude: f64, omega: f64, width: f64) -> Result<Self> {
        Self::new(amplitude, 1.0 / omega, width)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.center > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidKernel("gaussian bump needs width > 0 and center > 0".into()));
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        let z = (t - self.center) / self.width;
        self.amplitude * (-0.5 * z * z).exp()
    }

    fn derivative(&self, t: f64) -> f64 {
        -self.eval(t) * (t - self.center) / (self.width * self.width)
    }

    /// `int_0^inf t^n e^{-st} exp(-(t-mu)^2/(2 sigma^2)) dt` for unit amplitude.
    fn unit_moment(&self, n: u32, s: f64) -> Result<f64> {
        let (mu, sig) = (self.center, self.width);
        let sig2 = sig * sig;
        let shift = mu - s * sig2;
        if n > 3 {
            return Err(Error::DomainError(format!("bump moment order {n} > 3")));
        }
        // For a strongly negative shift the binomial sum cancels; the
        // integrand is then monotone on [0, inf) and quadrature is cheap.
        if n >= 1 && shift < -2.0 * sig {
            let b = self.clone();
            let f = move |t: f64| t.powi(n as i32) * (-s * t).exp() * b.eval(t) / b.amplitude;
            let r = integrate_semiinf_from(f, QUAD_TOL, TailHint::Exp(s), 0.0)?;
            return Ok(r.value);
        }
        // e^{C} with C = s^2 sigma^2/2 - s mu, combined with the Gaussian
        // factors so nothing overflows: e^{C} exp(-shift^2/(2 sigma^2)) = exp(-mu^2/(2 sigma^2)).
        let f = (-mu * mu / (2.0 * sig2)).exp();
        let z = -shift / (sig * 2f64.sqrt());
        let ec_erfc = if z > 0.0 {
            f * erfcx(z)
        } else {
            (0.5 * s * s * sig2 - s * mu).exp() * erfc(z)
        };
        let g0 = sig * (PI / 2.0).sqrt() * ec_erfc;
        let g = [g0, sig2 * f, -sig2 * shift * f + sig2 * g0, sig2 * shift * shift * f + 2.0 * sig2 * sig2 * f];
        let binom = |n: u32, k: u32| -> f64 {
            let mut b = 1.0;
            for i in 0..k {
                b = b * (n - i) as f64 / (i + 1) as f64;
            }
            b
        };
        let mut acc = 0.0;
        for k in 0..=n {
            acc += binom(n, k) * shift.powi((n - k) as i32) * g[k as usize];
        }
        Ok(acc)
    }

    /// Signed moment `int t^n e^{-st} bump(t) dt`, n <= 3.
    pub fn moment(&self, n: u32, s: f64) -> Result<f64> {
        if self.amplitude == 0.0 {
            return Ok(0.0);
        }
        Ok(self.amplitude * self.unit_moment(n, s)?)
    }

    /// Memory moment `int t^n e^{-wt} |bump(t)| dt`, n <= 3.
    pub fn delta_moment(&self, n: u32, w: f64) -> Result<f64> {
        if n > 3 {
            return Err(Error::DomainError(format!("delta moment order {n} > 3")));
        }
        if w <= 0.0 {
            return Err(Error::DomainError("delta moment needs w > 0".into()));
        }
        if self.amplitude == 0.0 {
            return Ok(0.0);
        }
        Ok(self.amplitude.abs() * self.unit_moment(n, w)?)
    }

    pub fn l2_norm_sq(&self) -> f64 {
        let (mu, sig) = (self.center, self.width);
        self.amplitude * self.amplitude * sig * PI.sqrt() / 2.0 * erfc(-mu / sig)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MemoryKernel {
    #[serde(rename = "expsum")]
    ExpSum(ExpSum),
    GaussianBump(GaussianBump),
    Composite {
        base: ExpSum,
        bump: GaussianBump,
    },
    /// `scale (1 + t)^(-exponent)`.
    PowerLaw {
        exponent: f64,
        scale: f64,
    },
    /// Equal to `inner` on `[0, cutoff]`, cubic Hermite blend to zero on
    /// `[cutoff, cutoff + 1]`, zero beyond.
    Truncated {
        inner: Box<MemoryKernel>,
        cutoff: f64,
    },
}

impl MemoryKernel {
    pub fn expsum(coeffs: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        Ok(MemoryKernel::ExpSum(ExpSum::new(coeffs, rates)?))
    }

    pub fn gaussian_bump(amplitude: f64, center: f64, width: f64) -> Result<Self> {
        Ok(MemoryKernel::GaussianBump(GaussianBump::new(amplitude, center, width)?))
    }

    /// Short-memory exponential sum plus a bump centred at `1/omega`.
    pub fn composite(base: ExpSum, amplitude: f64, omega: f64, width: f64) -> Result<Self> {
        base.validate()?;
        Ok(MemoryKernel::Composite { base, bump: GaussianBump::with_memory(amplitude, omega, width)? })
    }

    pub fn power_law(exponent: f64, scale: f64) -> Result<Self> {
        let k = MemoryKernel::PowerLaw { exponent, scale };
        k.validate()?;
        Ok(k)
    }

    pub fn truncated(inner: MemoryKernel, cutoff: f64) -> Result<Self> {
        let k = MemoryKernel::Truncated { inner: Box::new(inner), cutoff };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MemoryKernel::ExpSum(e) => e.validate(),
            MemoryKernel::GaussianBump(b) => b.validate(),
            MemoryKernel::Composite { base, bump } => base.validate().and(bump.validate()),
            MemoryKernel::PowerLaw { exponent, scale } => {
                if *exponent > 1.0 && scale.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidKernel("power law needs exponent > 1".into()))
                }
            }
            MemoryKernel::Truncated { inner, cutoff } => {
                if !(*cutoff > 0.0 && cutoff.is_finite()) {
                    return Err(Error::InvalidKernel("truncation cutoff must be positive".into()));
                }
                inner.validate()
            }
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            MemoryKernel::ExpSum(e) => e.eval(t),
            MemoryKernel::GaussianBump(b) => b.eval(t),
            MemoryKernel::Composite { base, bump } => base.eval(t) + bump.eval(t),
            MemoryKernel::PowerLaw { exponent, scale } => scale * (1.0 + t).powf(-exponent),
            MemoryKernel::Truncated { inner, cutoff } => {
                if t <= *cutoff {
                    inner.eval(t)
                } else if t >= cutoff + 1.0 {
                    0.0
                } else {
                    let (y0, d0) = blend_ends(inner, *cutoff);
                    let u = t - cutoff;
                    let h00 = (1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u);
                    let h10 = u * (1.0 - u) * (1.0 - u);
                    y0 * h00 + d0 * h10
                }
            }
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            MemoryKernel::ExpSum(e) => e.derivative(t),
            MemoryKernel::GaussianBump(b) => b.derivative(t),
            MemoryKernel::Composite { base, bump } => base.derivative(t) + bump.derivative(t),
            MemoryKernel::PowerLaw { exponent, scale } => -scale * exponent * (1.0 + t).powf(-exponent - 1.0),
            MemoryKernel::Truncated { inner, cutoff } => {
                if t <= *cutoff {
                    inner.derivative(t)
                } else if t >= cutoff + 1.0 {
                    0.0
                } else {
                    let (y0, d0) = blend_ends(inner, *cutoff);
                    let u = t - cutoff;
                    y0 * (6.0 * u * u - 6.0 * u) + d0 * (3.0 * u * u - 4.0 * u + 1.0)
                }
            }
        }
    }

    /// Signed moment `int_0^inf t^n e^{-st} rho(t) dt`; `n = 0` is the
    /// Laplace transform and `(-1)^n` times the n-th derivative of it.
    pub fn moment(&self, n: u32, s: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(Error::DomainError(format!("transform variable must be positive, got {s}")));
        }
        match self {
            MemoryKernel::ExpSum(e) => Ok(e.moment(n, s)),
            MemoryKernel::GaussianBump(b) => b.moment(n, s),
            MemoryKernel::Composite { base, bump } => Ok(base.moment(n, s) + bump.moment(n, s)?),
            MemoryKernel::PowerLaw { .. } => {
                let f = |t: f64| t.powi(n as i32) * (-s * t).exp() * self.eval(t);
                Ok(integrate_semiinf_from(f, QUAD_TOL, TailHint::Exp(s), 0.0)?.value)
            }
            MemoryKernel::Truncated { cutoff, .. } => {
                let mut f = |t: f64| t.powi(n as i32) * (-s * t).exp() * self.eval(t);
                Ok(integrate_with_breaks(&mut f, &truncation_breaks(*cutoff), QUAD_TOL)?.value)
            }
        }
    }

    pub fn laplace(&self, s: f64) -> Result<f64> {
        self.moment(0, s)
    }

    pub fn l2_norm_sq(&self) -> Result<f64> {
        match self {
            MemoryKernel::ExpSum(e) => Ok(e.l2_norm_sq()),
            MemoryKernel::GaussianBump(b) => Ok(b.l2_norm_sq()),
            MemoryKernel::Composite { base, bump } => {
                let mut cross = 0.0;
                for (a, w) in base.coeffs.iter().zip(&base.rates) {
                    cross += a * bump.moment(0, *w)?;
                }
                Ok(base.l2_norm_sq() + 2.0 * cross + bump.l2_norm_sq())
            }
            MemoryKernel::PowerLaw { exponent, scale } => Ok(scale * scale / (2.0 * exponent - 1.0)),
            MemoryKernel::Truncated { cutoff, .. } => {
                let mut f = |t: f64| self.eval(t).powi(2);
                Ok(integrate_with_breaks(&mut f, &truncation_breaks(*cutoff), QUAD_TOL)?.value)
            }
        }
    }

    /// `int_0^inf |rho(t)| dt`, used for tail and operator-norm bounds.
    pub fn l1_norm(&self) -> Result<f64> {
        match self {
            MemoryKernel::PowerLaw { exponent, scale } => Ok(scale.abs() / (exponent - 1.0)),
            MemoryKernel::Truncated { cutoff, .. } => {
                let mut f = |t: f64| self.eval(t).abs();
                Ok(integrate_with_breaks(&mut f, &truncation_breaks(*cutoff), QUAD_TOL)?.value)
            }
            _ => {
                let t_min = self.bump().map_or(0.0, |b| b.center + 10.0 * b.width);
                let f = |t: f64| self.eval(t).abs();
                Ok(integrate_semiinf_from(f, QUAD_TOL, TailHint::Exp(self.slowest_rate()), t_min)?.value)
            }
        }
    }

    /// The bump component, if any.
    pub fn bump(&self) -> Option<&GaussianBump> {
        match self {
            MemoryKernel::GaussianBump(b) => Some(b),
            MemoryKernel::Composite { bump, .. } => Some(bump),
            _ => None,
        }
    }

    /// Smallest exponential rate bounding the decay (a loose value for
    /// kernels without one), used only as a quadrature tail hint.
    fn slowest_rate(&self) -> f64 {
        match self {
            MemoryKernel::ExpSum(e) => e.rates.iter().copied().fold(f64::INFINITY, f64::min),
            MemoryKernel::Composite { base, .. } => base.rates.iter().copied().fold(1.0, f64::min),
            _ => 1.0,
        }
    }

    /// True for families that are completely monotonic by construction.
    pub fn is_completely_monotonic(&self) -> bool {
        match self {
            MemoryKernel::ExpSum(e) => e.coeffs.iter().all(|&a| a >= 0.0),
            MemoryKernel::PowerLaw { scale, .. } => *scale >= 0.0,
            _ => false,
        }
    }
}

fn truncation_breaks(cutoff: f64) -> Vec<f64> {
    let mut b: Vec<f64> = (0..=8).map(|i| cutoff * i as f64 / 8.0).collect();
    b.push(cutoff + 1.0);
    b
}

/// Value and slope the blend starts from. The slope follows the inner
/// kernel (C1 joint) but is clamped so the blend stays monotone.
fn blend_ends(inner: &MemoryKernel, cutoff: f64) -> (f64, f64) {
    let y0 = inner.eval(cutoff);
    let d = inner.derivative(cutoff);
    let (lo, hi) = if y0 >= 0.0 { (-3.0 * y0, 0.0) } else { (0.0, -3.0 * y0) };
    (y0, d.clamp(lo, hi))
}

/// Envelope `prefactor * omega^{-n} e^{-w/omega} (c2^{w^2} + c3^w)` for the
/// memory moments of a bump with sub-Gaussian tail
/// `|rho0(t)| <= c0 e^{-c1 t^2}` outside `[-t0, t0]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubGaussianTail {
    pub c0: f64,
    pub c1: f64,
    pub t0: f64,
}

pub fn subgaussian_bound(n: u32, w: f64, omega: f64, tail: SubGaussianTail, prefactor: f64) -> Result<f64> {
    let upper = 0.5f64.min(1.0 / tail.t0).min(2.0 * tail.c1 / w);
    if !(omega > 0.0 && omega < upper) {
        return Err(Error::DomainError(format!("omega={omega} outside (0, {upper})")));
    }
    if prefactor == 0.0 {
        return Ok(0.0);
    }
    let c2_pow = (w * w / (4.0 * tail.c1)).exp();
    let c3_pow = (tail.t0 * w).exp();
    Ok(prefactor * omega.powi(-(n as i32)) * (-w / omega).exp() * (c2_pow + c3_pow))
}

/// `int_0^inf t^n e^{-wt} |bump(t)| dt` for a bump or the bump part of a
/// composite kernel.
pub fn delta_moment(kernel: &MemoryKernel, n: u32, w: f64) -> Result<f64> {
    kernel
        .bump()
        .ok_or_else(|| Error::DomainError("kernel has no bump component".into()))?
        .delta_moment(n, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quad::integrate_semiinf;

    fn quad_moment(k: &MemoryKernel, n: u32, s: f64, t_min: f64) -> f64 {
        let f = |t: f64| t.powi(n as i32) * (-s * t).exp() * k.eval(t);
        integrate_semiinf_from(f, 1e-13, TailHint::Exp(s), t_min).unwrap().value
    }

    #[test]
    fn eval_examples() {
        assert_eq!(MemoryKernel::expsum(vec![1.0], vec![1.0]).unwrap().eval(0.0), 1.0);
        assert_eq!(MemoryKernel::gaussian_bump(1.0, 10.0, 1.0).unwrap().eval(10.0), 1.0);
        assert_eq!(MemoryKernel::power_law(2.0, 1.0).unwrap().eval(1.0), 0.25);
    }

    #[test]
    fn laplace_examples() {
        let k = MemoryKernel::expsum(vec![1.0], vec![1.0]).unwrap();
        assert_eq!(k.laplace(1.0).unwrap(), 0.5);
        let k = MemoryKernel::expsum(vec![2.0, -1.0], vec![1.0, 3.0]).unwrap();
        assert!((k.laplace(2.0).unwrap() - 7.0 / 15.0).abs() < 1e-15);
    }

    #[test]
    fn gaussian_laplace_matches_quadrature() {
        let k = MemoryKernel::gaussian_bump(1.0, 10.0, 1.0).unwrap();
        let closed = k.laplace(1.0).unwrap();
        let oracle = quad_moment(&k, 0, 1.0, 30.0);
        assert!((closed - oracle).abs() < 1e-12 * oracle.abs().max(1e-300) + 1e-16);
        let full_line = (2.0 * PI).sqrt() * (0.5f64 - 10.0).exp();
        assert!((closed - full_line).abs() / full_line < 1e-12);
        assert!((closed - 1.876e-4).abs() < 1e-7);
    }

    #[test]
    fn gaussian_moments_match_quadrature() {
        for &(c0, mu, sig) in &[(1.0, 10.0, 1.0), (-0.7, 5.0, 0.5), (2.0, 1.0, 1.5), (1.0, 0.3, 1.0)] {
            let b = GaussianBump::new(c0, mu, sig).unwrap();
            let k = MemoryKernel::GaussianBump(b.clone());
            for n in 0..=3 {
                for &s in &[0.05, 0.5, 1.0, 3.0, 10.0, 40.0] {
                    let closed = b.moment(n, s).unwrap();
                    let oracle = quad_moment(&k, n, s, mu + 12.0 * sig);
                    let scale = oracle.abs().max(1e-14);
                    assert!((closed - oracle).abs() <= 1e-9 * scale + 1e-15, "n={n} s={s} {closed} {oracle} (mu={mu})");
                }
            }
        }
    }

    #[test]
    fn l2_examples() {
        let k = MemoryKernel::expsum(vec![1.0], vec![1.0]).unwrap();
        assert_eq!(k.l2_norm_sq().unwrap(), 0.5);
        let k = MemoryKernel::expsum(vec![1.0, 1.0], vec![1.0, 2.0]).unwrap();
        assert!((k.l2_norm_sq().unwrap() - 17.0 / 12.0).abs() < 1e-15);
        let k = MemoryKernel::gaussian_bump(1.0, 10.0, 1.0).unwrap();
        assert!((k.l2_norm_sq().unwrap() - PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn composite_norm_matches_quadrature() {
        let base = ExpSum::new(vec![1.0, -0.5], vec![1.0, 2.5]).unwrap();
        let k = MemoryKernel::composite(base, 0.8, 0.2, 1.0).unwrap();
        let oracle = integrate_semiinf_from(|t| k.eval(t).powi(2), 1e-13, TailHint::Exp(1.0), 20.0).unwrap().value;
        assert!((k.l2_norm_sq().unwrap() - oracle).abs() < 1e-11);
    }

    #[test]
    fn power_law_transform_and_norm() {
        let k = MemoryKernel::power_law(2.0, 1.0).unwrap();
        let oracle = integrate_semiinf(|t| (1.0 + t).powi(-4), 1e-12, TailHint::Poly(4.0)).unwrap().value;
        assert!((k.l2_norm_sq().unwrap() - oracle).abs() < 1e-11);
        // L[(1+t)^-2](1) = 1 - e E1(1)
        let e1 = 0.219_383_934_395_520_27;
        assert!((k.laplace(1.0).unwrap() - (1.0 - std::f64::consts::E * e1)).abs() < 1e-11);
        assert!(MemoryKernel::power_law(1.0, 1.0).is_err());
    }

    #[test]
    fn truncated_kernel_joins() {
        let inner = MemoryKernel::power_law(2.0, 1.0).unwrap();
        let k = MemoryKernel::truncated(inner.clone(), 9.0).unwrap();
        for i in 0..=90 {
            let t = i as f64 * 0.1;
            assert_eq!(k.eval(t).to_bits(), inner.eval(t).to_bits());
        }
        assert!((k.eval(9.0 + 1e-13) - inner.eval(9.0)).abs() < 1e-12);
        assert!(k.eval(10.0 - 1e-13).abs() < 1e-12);
        assert_eq!(k.eval(10.0), 0.0);
        assert_eq!(k.eval(50.0), 0.0);
        let mut prev = k.eval(9.0);
        for i in 1..=100 {
            let v = k.eval(9.0 + i as f64 / 100.0);
            assert!(v <= prev);
            prev = v;
        }
        // C1 at the cutoff
        assert!((k.derivative(9.0 + 1e-9) - inner.derivative(9.0)).abs() < 1e-9);
    }

    #[test]
    fn delta_moment_behaviour() {
        let zero = MemoryKernel::gaussian_bump(0.0, 10.0, 1.0).unwrap();
        assert_eq!(delta_moment(&zero, 2, 1.0).unwrap(), 0.0);
        let b10 = MemoryKernel::gaussian_bump(1.0, 10.0, 1.0).unwrap();
        let b20 = MemoryKernel::gaussian_bump(1.0, 20.0, 1.0).unwrap();
        assert!((delta_moment(&b10, 0, 1.0).unwrap() - b10.laplace(1.0).unwrap()).abs() < 1e-18);
        assert!(delta_moment(&b20, 0, 1.0).unwrap() < delta_moment(&b10, 0, 1.0).unwrap());
        let neg = MemoryKernel::gaussian_bump(-2.0, 10.0, 1.0).unwrap();
        assert!(delta_moment(&neg, 1, 0.5).unwrap() > 0.0);
        assert!(neg.moment(1, 0.5).unwrap() < 0.0);
    }

    #[test]
    fn delta_moment_monotone_in_w_and_memory() {
        for n in 0..=3 {
            let b = MemoryKernel::gaussian_bump(1.0, 8.0, 1.0).unwrap();
            let mut prev = f64::INFINITY;
            for i in 1..=60 {
                let v = delta_moment(&b, n, 0.1 * i as f64).unwrap();
                assert!(v <= prev, "n={n}");
                prev = v;
            }
        }
        let mut prev = f64::INFINITY;
        for k in 1..=5 {
            let omega = 0.5f64.powi(k);
            let b = MemoryKernel::gaussian_bump(1.0, 1.0 / omega, 1.0).unwrap();
            let v = delta_moment(&b, 0, 1.0).unwrap();
            assert!(v < prev);
            prev = v;
        }
        assert!(prev < 1e-12);
    }

    #[test]
    fn envelope() {
        let tail = SubGaussianTail { c0: 1.0, c1: 0.5, t0: 1.0 };
        assert_eq!(subgaussian_bound(0, 1.0, 0.1, tail, 0.0).unwrap(), 0.0);
        assert!(subgaussian_bound(0, 1.0, 0.6, tail, 1.0).is_err());
        let l1 = subgaussian_bound(0, 1.0, 0.1, tail, 1.0).unwrap().ln();
        let l2 = subgaussian_bound(0, 1.0, 0.05, tail, 1.0).unwrap().ln();
        assert!(((l2 - l1) / (20.0 - 10.0) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn serde_tagging() {
        let k: MemoryKernel = serde_json::from_str(r#"{"kind":"expsum","coeffs":[1.0],"rates":[2.0]}"#).unwrap();
        assert_eq!(k, MemoryKernel::expsum(vec![1.0], vec![2.0]).unwrap());
        let k: MemoryKernel =
            serde_json::from_str(r#"{"kind":"truncated","cutoff":9.0,"inner":{"kind":"power_law","exponent":2.0,"scale":1.0}}"#)
                .unwrap();
        assert!(matches!(k, MemoryKernel::Truncated { .. }));
    }
}
