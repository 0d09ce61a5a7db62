//! Least-squares polynomial fits on `[0, 1]` and companion-matrix roots.

use crate::error::{Error, Result};
use nalgebra::{Complex, DMatrix, DVector};

/// Condition estimate (of the normal equations) above which a fit is refused.
pub const MAX_CONDITION: f64 = 1e12;

/// A polynomial fitted on `[0, 1]`, stored in the shifted Chebyshev basis
/// `T_k(2s - 1)` (optionally multiplied by `s`). The monomial coefficients are
/// derived from it and lose accuracy at high degree, so evaluation goes
/// through the Chebyshev form.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyFit {
    pub cheb: Vec<f64>,
    /// Ascending monomial coefficients of the full fitted polynomial.
    pub monomial: Vec<f64>,
    /// True when the fit has the form `s * Q(s)`.
    pub through_origin: bool,
    pub condition: f64,
}

impl PolyFit {
    pub fn eval(&self, s: f64) -> f64 {
        let q = clenshaw_shifted(&self.cheb, s);
        if self.through_origin {
            s * q
        } else {
            q
        }
    }
}

/// Evaluates `sum c_k T_k(2s - 1)`.
pub fn clenshaw_shifted(c: &[f64], s: f64) -> f64 {
    let x = 2.0 * s - 1.0;
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &ck in c.iter().skip(1).rev() {
        let b0 = 2.0 * x * b1 - b2 + ck;
        b2 = b1;
        b1 = b0;
    }
    c.first().copied().unwrap_or(0.0) + x * b1 - b2
}

/// Monomial coefficients (in `s`) of `sum c_k T_k(2s - 1)`.
pub fn shifted_cheb_to_monomial(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    let mut out = vec![0.0; n];
    // T_{k}(2s-1) as monomials via T_{k+1} = 2(2s-1) T_k - T_{k-1}.
    let mut t_prev = vec![0.0; n];
    let mut t_cur = vec![0.0; n];
    if n == 0 {
        return out;
    }
    t_cur[0] = 1.0;
    for (k, &ck) in c.iter().enumerate() {
        if k == 1 {
            t_prev.copy_from_slice(&t_cur);
            t_cur = vec![0.0; n];
            t_cur[0] = -1.0;
            t_cur[1] = 2.0;
        } else if k > 1 {
            let mut next = vec![0.0; n];
            for i in 0..n {
                let mut v = -2.0 * t_cur[i] - t_prev[i];
                if i > 0 {
                    v += 4.0 * t_cur[i - 1];
                }
                next[i] = v;
            }
            t_prev = std::mem::replace(&mut t_cur, next);
        }
        for i in 0..n {
            out[i] += ck * t_cur[i];
        }
    }
    out
}

/// Chebyshev nodes of the first kind mapped to `[0, 1]`.
pub fn chebyshev_nodes(count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| {
            let x = ((2 * k + 1) as f64 * std::f64::consts::PI / (2 * count) as f64).cos();
            0.5 * (x + 1.0)
        })
        .collect()
}

/// Least-squares fit of degree `degree` to `(s, y)` samples on `[0, 1]`.
/// With `through_origin`, fits `y ~ s Q(s)` with `deg Q = degree`, so the
/// fitted polynomial vanishes at zero.
pub fn poly_fit(samples: &[(f64, f64)], degree: usize, through_origin: bool) -> Result<PolyFit> {
    let ncoef = degree + 1;
    if samples.len() < ncoef {
        return Err(Error::DomainError(format!("{} samples for {} coefficients", samples.len(), ncoef)));
    }
    let a = DMatrix::from_fn(samples.len(), ncoef, |r, k| {
        let s = samples[r].0;
        let mut e = vec![0.0; ncoef];
        e[k] = 1.0;
        let v = clenshaw_shifted(&e, s);
        if through_origin {
            s * v
        } else {
            v
        }
    });
    let y = DVector::from_iterator(samples.len(), samples.iter().map(|p| p.1));
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { (smax / smin).powi(2) } else { f64::INFINITY };
    if condition > MAX_CONDITION {
        return Err(Error::IllConditioned(condition));
    }
    let coef = svd.solve(&y, 0.0).map_err(|e| Error::DomainError(e.to_string()))?;
    let cheb: Vec<f64> = coef.iter().copied().collect();
    let mut monomial = shifted_cheb_to_monomial(&cheb);
    if through_origin {
        monomial.insert(0, 0.0);
    }
    Ok(PolyFit { cheb, monomial, through_origin, condition })
}

/// Evaluates ascending-order coefficients by Horner's rule.
pub fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Roots of `sum coeffs[k] x^k` from the eigenvalues of the companion matrix.
/// Roots with imaginary part below `1e-9` are returned as real.
pub fn poly_roots(coeffs: &[f64]) -> Result<Vec<Complex<f64>>> {
    let mut c = coeffs.to_vec();
    while c.len() > 1 && *c.last().unwrap() == 0.0 {
        c.pop();
    }
    let deg = c.len().saturating_sub(1);
    if deg == 0 {
        return Err(Error::DegreeZero);
    }
    let lead = c[deg];
    let mut comp = DMatrix::<f64>::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -c[i] / lead;
    }
    let mut roots: Vec<Complex<f64>> = comp
        .complex_eigenvalues()
        .iter()
        .map(|z| if z.im.abs() < 1e-9 { Complex::new(z.re, 0.0) } else { *z })
        .collect();
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(roots)
}

/// Real roots only, ascending.
pub fn real_roots(coeffs: &[f64]) -> Result<Vec<f64>> {
    Ok(poly_roots(coeffs)?.into_iter().filter(|z| z.im == 0.0).map(|z| z.re).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_fit(f: impl Fn(f64) -> f64, deg: usize) -> PolyFit {
        let s: Vec<(f64, f64)> = chebyshev_nodes(4 * (deg + 1)).into_iter().map(|x| (x, f(x))).collect();
        poly_fit(&s, deg, false).unwrap()
    }

    #[test]
    fn quadratic_exact() {
        let fit = grid_fit(|s| s * s, 2);
        for (got, want) in fit.monomial.iter().zip([0.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn constant() {
        let fit = grid_fit(|_| 1.0, 0);
        assert!((fit.monomial[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn through_origin_vanishes_at_zero() {
        let s: Vec<(f64, f64)> = chebyshev_nodes(40).into_iter().map(|x| (x, x.sin())).collect();
        let fit = poly_fit(&s, 6, true).unwrap();
        assert_eq!(fit.eval(0.0), 0.0);
        assert_eq!(fit.monomial[0], 0.0);
        assert!((fit.eval(0.3) - 0.3f64.sin()).abs() < 1e-9);
        assert!((horner(&fit.monomial, 0.7) - fit.eval(0.7)).abs() < 1e-12);
    }

    #[test]
    fn transformed_two_exponential_target_improves_with_degree() {
        // rho = e^{-t} + e^{-3t}, alpha = beta = 1: s = e^{-t/2}, q(s) = rho(-2 ln s)/s = s + s^5.
        let q = |s: f64| s + s.powi(5);
        let sup = |fit: &PolyFit| (0..=1000).map(|i| i as f64 / 1000.0).map(|s| (fit.eval(s) - q(s)).abs()).fold(0.0, f64::max);
        assert!(sup(&grid_fit(q, 7)) < sup(&grid_fit(q, 3)));
    }

    #[test]
    fn cheb_monomial_roundtrip() {
        let c = [0.3, -1.2, 0.5, 2.0, -0.7];
        let m = shifted_cheb_to_monomial(&c);
        for i in 0..=10 {
            let s = i as f64 / 10.0;
            assert!((horner(&m, s) - clenshaw_shifted(&c, s)).abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_roots() {
        let r = real_roots(&[2.0, -3.0, 1.0]).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-12 && (r[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn scale_invariant() {
        let p = [2.0, -3.0, 1.0];
        let p2: Vec<f64> = p.iter().map(|c| 2.0 * c).collect();
        assert_eq!(real_roots(&p).unwrap(), real_roots(&p2).unwrap());
    }

    #[test]
    fn degree_zero_rejected() {
        assert_eq!(poly_roots(&[3.0, 0.0]), Err(Error::DegreeZero));
    }

    #[test]
    fn complex_pair() {
        let r = poly_roots(&[1.0, 0.0, 1.0]).unwrap();
        assert!(r.iter().all(|z| (z.im.abs() - 1.0).abs() < 1e-12));
    }
}
