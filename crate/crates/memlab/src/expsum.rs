//! The exponential-sum model `sum a_i e^{-w_i t}` and its L2 loss against a
//! memory kernel, with analytic gradient and Hessian.
//!
//! Parameter vectors are ordered `(a_1..a_m, w_1..w_m)` throughout.

use crate::error::{Error, Result};
use crate::kernels::MemoryKernel;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpSumModel {
    pub a: Vec<f64>,
    pub w: Vec<f64>,
}

impl ExpSumModel {
    pub fn new(a: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        let m = ExpSumModel { a, w };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.is_empty() || self.a.len() != self.w.len() {
            return Err(Error::InvalidModel(format!("a has {} entries, w has {}", self.a.len(), self.w.len())));
        }
        if let Some(w) = self.w.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidModel(format!("rate {w} is not positive")));
        }
        if !self.a.iter().all(|a| a.is_finite()) {
            return Err(Error::InvalidModel("non-finite coefficient".into()));
        }
        Ok(())
    }

    /// Builds a model from a stacked `(a, w)` vector.
    pub fn from_params(theta: &[f64]) -> Result<Self> {
        if !theta.len().is_multiple_of(2) {
            return Err(Error::InvalidModel("parameter vector has odd length".into()));
        }
        let m = theta.len() / 2;
        Self::new(theta[..m].to_vec(), theta[m..].to_vec())
    }

    pub fn params(&self) -> Vec<f64> {
        self.a.iter().chain(self.w.iter()).copied().collect()
    }

    pub fn width(&self) -> usize {
        self.a.len()
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.a.iter().zip(&self.w).map(|(a, w)| a * (-w * t).exp()).sum()
    }

    pub fn as_kernel(&self) -> MemoryKernel {
        MemoryKernel::expsum(self.a.clone(), self.w.clone()).expect("model rates are positive")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Option<DMatrix<f64>>,
}

/// Target moments `M_n(w_k) = int t^n e^{-w_k t} rho(t) dt` at the model rates.
struct Moments {
    m0: Vec<f64>,
    m1: Vec<f64>,
    m2: Vec<f64>,
}

fn moments(model: &ExpSumModel, target: &MemoryKernel, order: u32) -> Result<Moments> {
    let m = model.width();
    let mut out = Moments { m0: vec![0.0; m], m1: vec![0.0; m], m2: vec![0.0; m] };
    for k in 0..m {
        let s = model.w[k];
        out.m0[k] = target.moment(0, s)?;
        if order >= 1 {
            out.m1[k] = target.moment(1, s)?;
        }
        if order >= 2 {
            out.m2[k] = target.moment(2, s)?;
        }
    }
    Ok(out)
}

/// `sum_i a_i / (w_k + w_i)^p` for each k.
fn kernel_sums(model: &ExpSumModel, p: i32) -> Vec<f64> {
    let m = model.width();
    (0..m)
        .map(|k| (0..m).map(|i| model.a[i] / (model.w[k] + model.w[i]).powi(p)).sum())
        .collect()
}

fn loss_from(model: &ExpSumModel, mo: &Moments, norm: f64) -> f64 {
    let m = model.width();
    let mut quad = 0.0;
    for i in 0..m {
        for j in 0..m {
            quad += model.a[i] * model.a[j] / (model.w[i] + model.w[j]);
        }
    }
    let cross: f64 = (0..m).map(|i| model.a[i] * mo.m0[i]).sum();
    (quad - 2.0 * cross + norm).max(0.0)
}

fn grad_from(model: &ExpSumModel, mo: &Moments) -> Vec<f64> {
    let m = model.width();
    let s1 = kernel_sums(model, 1);
    let s2 = kernel_sums(model, 2);
    let mut g = vec![0.0; 2 * m];
    for k in 0..m {
        g[k] = 2.0 * (s1[k] - mo.m0[k]);
        g[m + k] = -2.0 * model.a[k] * (s2[k] - mo.m1[k]);
    }
    g
}

fn hessian_from(model: &ExpSumModel, mo: &Moments) -> DMatrix<f64> {
    let m = model.width();
    let (a, w) = (&model.a, &model.w);
    let s2 = kernel_sums(model, 2);
    let s3 = kernel_sums(model, 3);
    let mut h = DMatrix::zeros(2 * m, 2 * m);
    for k in 0..m {
        for j in 0..m {
            let d = w[k] + w[j];
            h[(k, j)] = 2.0 / d;
            if j != k {
                h[(k, m + j)] = -2.0 * a[j] / (d * d);
                h[(m + k, m + j)] = 4.0 * a[k] * a[j] / (d * d * d);
            }
        }
        h[(k, m + k)] = -2.0 * (s2[k] - mo.m1[k]) - a[k] / (2.0 * w[k] * w[k]);
        h[(m + k, m + k)] = 4.0 * a[k] * s3[k] + a[k] * a[k] / (2.0 * w[k].powi(3)) - 2.0 * a[k] * mo.m2[k];
    }
    for k in 0..m {
        for j in 0..m {
            h[(m + j, k)] = h[(k, m + j)];
        }
    }
    h
}

/// `J(a, w) = int_0^inf (sum a_i e^{-w_i t} - rho(t))^2 dt`.
pub fn loss(model: &ExpSumModel, target: &MemoryKernel) -> Result<f64> {
    let mo = moments(model, target, 0)?;
    Ok(loss_from(model, &mo, target.l2_norm_sq()?))
}

pub fn grad(model: &ExpSumModel, target: &MemoryKernel) -> Result<Vec<f64>> {
    let mo = moments(model, target, 1)?;
    Ok(grad_from(model, &mo))
}

pub fn hessian(model: &ExpSumModel, target: &MemoryKernel) -> Result<DMatrix<f64>> {
    let mo = moments(model, target, 2)?;
    Ok(hessian_from(model, &mo))
}

/// Loss, gradient and (optionally) Hessian sharing one set of target moments.
pub fn report(model: &ExpSumModel, target: &MemoryKernel, with_hessian: bool) -> Result<LossReport> {
    let mo = moments(model, target, if with_hessian { 2 } else { 1 })?;
    Ok(LossReport {
        value: loss_from(model, &mo, target.l2_norm_sq()?),
        gradient: grad_from(model, &mo),
        hessian: with_hessian.then(|| hessian_from(model, &mo)),
    })
}

pub fn residual(model: &ExpSumModel, target: &MemoryKernel, t: f64) -> f64 {
    model.eval(t) - target.eval(t)
}

/// Loss evaluator for repeated calls against one target: the target norm is
/// computed once.
#[derive(Debug, Clone)]
pub struct Objective {
    pub target: MemoryKernel,
    norm: f64,
}

impl Objective {
    pub fn new(target: MemoryKernel) -> Result<Self> {
        target.validate()?;
        let norm = target.l2_norm_sq()?;
        Ok(Objective { target, norm })
    }

    pub fn norm_sq(&self) -> f64 {
        self.norm
    }

    pub fn loss(&self, model: &ExpSumModel) -> Result<f64> {
        Ok(loss_from(model, &moments(model, &self.target, 0)?, self.norm))
    }

    pub fn grad(&self, model: &ExpSumModel) -> Result<Vec<f64>> {
        Ok(grad_from(model, &moments(model, &self.target, 1)?))
    }

    pub fn hessian(&self, model: &ExpSumModel) -> Result<DMatrix<f64>> {
        Ok(hessian_from(model, &moments(model, &self.target, 2)?))
    }

    pub fn loss_and_grad(&self, model: &ExpSumModel) -> Result<(f64, Vec<f64>)> {
        let mo = moments(model, &self.target, 1)?;
        Ok((loss_from(model, &mo, self.norm), grad_from(model, &mo)))
    }

    /// Loss and gradient on raw stacked parameters; rates need not be
    /// positive-checked (callers guard them).
    pub fn loss_and_grad_raw(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let m = theta.len() / 2;
        let model = ExpSumModel { a: theta[..m].to_vec(), w: theta[m..].to_vec() };
        self.loss_and_grad(&model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::ExpSum;
    use crate::numerics::quad::{integrate_semiinf, TailHint};

    fn model(a: &[f64], w: &[f64]) -> ExpSumModel {
        ExpSumModel::new(a.to_vec(), w.to_vec()).unwrap()
    }

    fn target(a: &[f64], w: &[f64]) -> MemoryKernel {
        MemoryKernel::expsum(a.to_vec(), w.to_vec()).unwrap()
    }

    #[test]
    fn exact_fit_has_zero_loss_and_gradient() {
        let t = target(&[1.0, -0.5, 2.0], &[0.3, 1.0, 4.0]);
        let m = model(&[1.0, -0.5, 2.0], &[0.3, 1.0, 4.0]);
        assert!(loss(&m, &t).unwrap() < 1e-14);
        assert!(grad(&m, &t).unwrap().iter().all(|g| g.abs() < 1e-10));
    }

    #[test]
    fn regression_value() {
        let m = model(&[1.0], &[1.0]);
        let t = target(&[2.0], &[2.0]);
        assert!((loss(&m, &t).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        let g = grad(&m, &t).unwrap();
        assert!((g[0] + 1.0 / 3.0).abs() < 1e-15);
        assert!((g[1] + 1.0 / 18.0).abs() < 1e-15);
        assert_eq!(residual(&m, &t, 0.0), -1.0);
    }

    #[test]
    fn two_mode_loss_matches_expanded_form() {
        // a = a* = (1, 1): J = 1/(2w1) + 1/(2w2) + 2/(w1+w2) - 2 sum_ij 1/(w_i + w*_j) + c*
        let (w1, w2, s1, s2) = (0.7, 1.9, 1.0, 3.0);
        let m = model(&[1.0, 1.0], &[w1, w2]);
        let t = target(&[1.0, 1.0], &[s1, s2]);
        let cstar = 1.0 / (2.0 * s1) + 1.0 / (2.0 * s2) + 2.0 / (s1 + s2);
        let expected = 1.0 / (2.0 * w1) + 1.0 / (2.0 * w2) + 2.0 / (w1 + w2)
            - 2.0 * (1.0 / (w1 + s1) + 1.0 / (w1 + s2) + 1.0 / (w2 + s1) + 1.0 / (w2 + s2))
            + cstar;
        assert!((loss(&m, &t).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn residual_integral_equals_loss() {
        let m = model(&[0.4, 1.3], &[0.5, 2.0]);
        let t = target(&[1.0, -0.2, 0.5], &[0.8, 1.5, 6.0]);
        let q = integrate_semiinf(|x| residual(&m, &t, x).powi(2), 1e-13, TailHint::Exp(1.0)).unwrap();
        assert!((q.value - loss(&m, &t).unwrap()).abs() < 1e-9 * q.value);
    }

    #[test]
    fn one_by_one_hessian_block() {
        let h = hessian(&model(&[1.0], &[1.0]), &target(&[1.0], &[2.0])).unwrap();
        assert_eq!(h[(0, 0)], 1.0);
    }

    #[test]
    fn hessian_matches_finite_difference_on_composite() {
        let base = ExpSum::new(vec![1.0], vec![1.0]).unwrap();
        let t = MemoryKernel::composite(base, 0.7, 0.25, 1.0).unwrap();
        let m = model(&[0.6, 0.5], &[0.8, 1.4]);
        let h = hessian(&m, &t).unwrap();
        let th = m.params();
        let eps = 1e-5;
        for j in 0..4 {
            let mut p = th.clone();
            let mut q = th.clone();
            p[j] += eps;
            q[j] -= eps;
            let gp = grad(&ExpSumModel::from_params(&p).unwrap(), &t).unwrap();
            let gq = grad(&ExpSumModel::from_params(&q).unwrap(), &t).unwrap();
            for i in 0..4 {
                let fd = (gp[i] - gq[i]) / (2.0 * eps);
                assert!((fd - h[(i, j)]).abs() <= 1e-6 * (1.0 + h[(i, j)].abs()), "({i},{j}) {fd} {}", h[(i, j)]);
            }
        }
    }

    #[test]
    fn permutation_invariance() {
        let t = target(&[1.0, 0.5], &[0.5, 2.0]);
        let m = model(&[0.3, -0.8, 1.1], &[0.4, 1.2, 3.0]);
        let p = model(&[1.1, 0.3, -0.8], &[3.0, 0.4, 1.2]);
        assert_eq!(loss(&m, &t).unwrap().to_bits(), loss(&p, &t).unwrap().to_bits());
        let gm = grad(&m, &t).unwrap();
        let gp = grad(&p, &t).unwrap();
        let perm = [2, 0, 1];
        for (k, &src) in perm.iter().enumerate() {
            assert!((gp[k] - gm[src]).abs() < 1e-15);
            assert!((gp[3 + k] - gm[3 + src]).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_nonpositive_rates() {
        assert!(ExpSumModel::new(vec![1.0], vec![0.0]).is_err());
        assert!(ExpSumModel::new(vec![1.0, 2.0], vec![1.0]).is_err());
    }
}
