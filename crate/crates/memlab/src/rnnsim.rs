//! Linear RNNs `h' = W h + U x`, `y = c^T h` with a scalar input: Euler
//! simulation, the finite-horizon kernel loss, its white-noise Monte Carlo
//! counterpart, and discrete gradient training with exact reverse mode.

use crate::dynamics::plateau::{detect_plateau, Plateau, PlateauRule};
use crate::error::{Error, Result};
use crate::expsum::ExpSumModel;
use crate::kernels::MemoryKernel;
use crate::numerics::mat_exp;
use crate::numerics::quad::integrate_with_breaks;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearRNN {
    pub c: DVector<f64>,
    pub w: DMatrix<f64>,
    pub u: DVector<f64>,
    pub hurwitz: bool,
}

impl LinearRNN {
    pub fn new(c: Vec<f64>, w: DMatrix<f64>, u: Vec<f64>) -> Result<Self> {
        let m = c.len();
        if w.nrows() != m || w.ncols() != m || u.len() != m || m == 0 {
            return Err(Error::InvalidModel(format!("shapes c={m}, W={}x{}, U={}", w.nrows(), w.ncols(), u.len())));
        }
        let hurwitz = max_real_eig(&w) < -1e-10;
        Ok(LinearRNN { c: DVector::from_vec(c), w, u: DVector::from_vec(u), hurwitz })
    }

    /// Diagonal embedding `W = -diag(w)`, `U = a`, `c = 1`, whose kernel is
    /// the exponential sum itself.
    pub fn from_expsum(model: &ExpSumModel) -> Result<Self> {
        let m = model.width();
        let w = DMatrix::from_diagonal(&DVector::from_iterator(m, model.w.iter().map(|x| -x)));
        Self::new(vec![1.0; m], w, model.a.clone())
    }

    pub fn width(&self) -> usize {
        self.c.len()
    }

    /// `c^T e^{W t} U`.
    pub fn kernel(&self, t: f64) -> f64 {
        let e = mat_exp(&self.w, t);
        (self.c.transpose() * e * &self.u)[(0, 0)]
    }

    fn params(&self) -> Vec<f64> {
        let m = self.width();
        let mut p = Vec::with_capacity(m * (m + 2));
        p.extend(self.c.iter());
        for i in 0..m {
            for j in 0..m {
                p.push(self.w[(i, j)]);
            }
        }
        p.extend(self.u.iter());
        p
    }

    fn set_params(&mut self, p: &[f64]) {
        let m = self.width();
        for i in 0..m {
            self.c[i] = p[i];
            self.u[i] = p[m + m * m + i];
            for j in 0..m {
                self.w[(i, j)] = p[m + i * m + j];
            }
        }
    }
}

fn max_real_eig(w: &DMatrix<f64>) -> f64 {
    w.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Euler recursion `h_{k+1} = h_k + dt (W h_k + U x_k)` from `h_0 = 0`;
/// returns `y_k = c^T h_k` for `k = 0..=n`.
pub fn simulate(rnn: &LinearRNN, x: &[f64], dt: f64) -> Vec<f64> {
    let mut h = DVector::zeros(rnn.width());
    let mut y = Vec::with_capacity(x.len() + 1);
    y.push(0.0);
    for &xk in x {
        h = &h + (&rnn.w * &h + &rnn.u * xk) * dt;
        y.push(rnn.c.dot(&h));
    }
    y
}

/// True when `dt ||W||_2 < 1`, a rough guard for Euler stability.
pub fn euler_stable(rnn: &LinearRNN, dt: f64) -> bool {
    dt * rnn.w.norm() < 1.0
}

/// `int_0^T (c^T e^{Wt} U - rho(t))^2 dt`.
pub fn closedform_finite_loss(rnn: &LinearRNN, target: &MemoryKernel, horizon: f64) -> Result<f64> {
    let n = (horizon.ceil() as usize).clamp(1, 256);
    let breaks: Vec<f64> = (0..=n).map(|i| horizon * i as f64 / n as f64).collect();
    let mut f = |t: f64| (rnn.kernel(t) - target.eval(t)).powi(2);
    Ok(integrate_with_breaks(&mut f, &breaks, 1e-12)?.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    /// Brownian increments, variance `dt` per step.
    WhiteNoise,
    /// `x_t = sum_j alpha_j cos(lambda_j t)` with `lambda_j ~ U[0, 10]` and
    /// `alpha_j ~ N(0, 1)`.
    CosineMixture { terms: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub generator: Generator,
    pub seed: u64,
}

impl PathEnsemble {
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    fn rng(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng
    }

    /// Path `index`: increments for white noise, input values for the
    /// cosine mixture. Depends only on `(seed, index)`.
    pub fn path(&self, index: usize) -> Vec<f64> {
        let n = self.steps();
        let mut rng = self.rng(index);
        match self.generator {
            Generator::WhiteNoise => {
                let sd = self.dt.sqrt();
                (0..n).map(|_| { let z: f64 = StandardNormal.sample(&mut rng); sd * z }).collect::<Vec<f64>>()
            }
            Generator::CosineMixture { terms } => {
                let modes: Vec<(f64, f64)> =
                    (0..terms).map(|_| (StandardNormal.sample(&mut rng), rng.random_range(0.0..10.0))).collect();
                (0..n)
                    .map(|k| {
                        let t = k as f64 * self.dt;
                        modes.iter().map(|(a, l)| a * (l * t).cos()).sum()
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// White-noise estimate of `E |H_T - Hhat_T|^2`: both outputs are driven by
/// the same increments, the model through its Euler recursion and the
/// target through the left-point sum `sum_j rho(j dt) dB_{n-1-j}`.
pub fn mc_loss(rnn: &LinearRNN, target: &MemoryKernel, ens: &PathEnsemble) -> Result<McEstimate> {
    if ens.generator != Generator::WhiteNoise {
        return Err(Error::DomainError("the Monte Carlo loss needs white-noise paths".into()));
    }
    if ens.n_paths < 2 {
        return Err(Error::DomainError("need at least two paths".into()));
    }
    let n = ens.steps();
    let rho: Vec<f64> = (0..n).map(|j| target.eval(j as f64 * ens.dt)).collect();
    let sq: Vec<f64> = (0..ens.n_paths)
        .into_par_iter()
        .map(|p| {
            let db = ens.path(p);
            let mut h = DVector::zeros(rnn.width());
            for &d in &db {
                h = &h + &rnn.w * &h * ens.dt + &rnn.u * d;
            }
            let model = rnn.c.dot(&h);
            let truth: f64 = (0..n).map(|j| rho[j] * db[n - 1 - j]).sum();
            (model - truth).powi(2)
        })
        .collect();
    let k = sq.len() as f64;
    let mean = sq.iter().sum::<f64>() / k;
    let var = sq.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (k - 1.0);
    Ok(McEstimate { mean, std_error: (var / k).sqrt() })
}

/// Which loss the trainer descends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainLoss {
    /// `dt sum_{j<n} (c^T (I + dt W)^j U - rho(j dt))^2`: the white-noise
    /// loss of the Euler-discretised model in closed form.
    Discrete { dt: f64, horizon: f64 },
    /// Sample mean of `(y_T - H_T)^2` over a fixed ensemble.
    Ensemble(PathEnsemble),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Gd,
    HeavyBall { momentum: f64 },
}

/// Discrete kernel loss and its exact gradient with respect to
/// `(c, W row-major, U)`.
pub fn discrete_loss_grad(rnn: &LinearRNN, target: &MemoryKernel, dt: f64, horizon: f64) -> (f64, Vec<f64>) {
    let rho: Vec<f64> = (0..(horizon / dt).round() as usize).map(|j| target.eval(j as f64 * dt)).collect();
    discrete_loss_grad_with(rnn, &rho, dt)
}

fn discrete_loss_grad_with(rnn: &LinearRNN, rho: &[f64], dt: f64) -> (f64, Vec<f64>) {
    let m = rnn.width();
    let n = rho.len();
    let a = DMatrix::identity(m, m) + &rnn.w * dt;
    let mut g = Vec::with_capacity(n);
    g.push(rnn.u.clone());
    for j in 1..n {
        let next = &a * &g[j - 1];
        g.push(next);
    }
    let r: Vec<f64> = (0..n).map(|j| rnn.c.dot(&g[j]) - rho[j]).collect();
    let loss = dt * r.iter().map(|x| x * x).sum::<f64>();
    let mut dc = DVector::zeros(m);
    let mut dw = DMatrix::zeros(m, m);
    let mut mu = DVector::zeros(m);
    for j in (0..n).rev() {
        dc += &g[j] * (2.0 * dt * r[j]);
        if j + 1 < n {
            // mu holds dL/dg_{j+1}
            dw += &mu * g[j].transpose() * dt;
            mu = a.transpose() * &mu;
        }
        mu += &rnn.c * (2.0 * dt * r[j]);
    }
    let mut grad = Vec::with_capacity(m * (m + 2));
    grad.extend(dc.iter());
    for i in 0..m {
        for k in 0..m {
            grad.push(dw[(i, k)]);
        }
    }
    grad.extend(mu.iter());
    (loss, grad)
}

/// Ensemble loss and gradient by reverse mode through each path's recursion.
fn ensemble_loss_grad(rnn: &LinearRNN, target: &MemoryKernel, ens: &PathEnsemble, paths: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let m = rnn.width();
    let n = ens.steps();
    let dt = ens.dt;
    let white = ens.generator == Generator::WhiteNoise;
    let rho: Vec<f64> = (0..n).map(|j| target.eval(j as f64 * dt)).collect();
    let a = DMatrix::identity(m, m) + &rnn.w * dt;
    let per: Vec<(f64, Vec<f64>)> = paths
        .par_iter()
        .map(|x| {
            // input drive per step: dB for white noise, x dt otherwise
            let drive: Vec<f64> = if white { x.clone() } else { x.iter().map(|v| v * dt).collect() };
            let mut hs = Vec::with_capacity(n + 1);
            hs.push(DVector::zeros(m));
            for k in 0..n {
                let next = &a * &hs[k] + &rnn.u * drive[k];
                hs.push(next);
            }
            let truth: f64 = (0..n).map(|j| rho[j] * drive[n - 1 - j]).sum();
            let e = rnn.c.dot(&hs[n]) - truth;
            let dc = &hs[n] * (2.0 * e);
            let mut lam = &rnn.c * (2.0 * e);
            let mut dw = DMatrix::zeros(m, m);
            let mut du = DVector::zeros(m);
            for k in (0..n).rev() {
                dw += &lam * hs[k].transpose() * dt;
                du += &lam * drive[k];
                lam = a.transpose() * &lam;
            }
            let mut grad = Vec::with_capacity(m * (m + 2));
            grad.extend(dc.iter());
            for i in 0..m {
                for k in 0..m {
                    grad.push(dw[(i, k)]);
                }
            }
            grad.extend(du.iter());
            (e * e, grad)
        })
        .collect();
    let k = per.len() as f64;
    let mut grad = vec![0.0; m * (m + 2)];
    let mut loss = 0.0;
    for (l, g) in &per {
        loss += l / k;
        for (acc, gi) in grad.iter_mut().zip(g) {
            *acc += gi / k;
        }
    }
    (loss, grad)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainRecord {
    pub losses: Vec<f64>,
    pub grad_norms: Vec<f64>,
    pub plateau: Option<Plateau>,
    #[serde(skip)]
    pub final_rnn: Option<LinearRNN>,
}

impl TrainRecord {
    pub fn plateau_len(&self) -> usize {
        self.plateau.map_or(0, |p| p.len())
    }

    /// Length of the longest flat stretch after the first drop, with no
    /// minimum length and a run still flat at the end censored there.
    pub fn plateau_duration(&self) -> usize {
        let mut l = self.losses.clone();
        l.push(0.0);
        let rule = PlateauRule { min_frac: 0.0, ..PlateauRule::default() };
        detect_plateau(&l, rule).map_or(0, |p| p.len().min(self.losses.len()))
    }
}

pub fn gd_train(
    rnn0: &LinearRNN,
    target: &MemoryKernel,
    loss: TrainLoss,
    lr: f64,
    steps: usize,
    optimizer: Optimizer,
    clip: Option<f64>,
) -> Result<TrainRecord> {
    let mut rnn = rnn0.clone();
    let mut theta = rnn.params();
    let mut vel = vec![0.0; theta.len()];
    let paths: Vec<Vec<f64>> = match loss {
        TrainLoss::Ensemble(ens) => (0..ens.n_paths).map(|p| ens.path(p)).collect(),
        TrainLoss::Discrete { .. } => Vec::new(),
    };
    let rho: Vec<f64> = match loss {
        TrainLoss::Discrete { dt, horizon } => (0..(horizon / dt).round() as usize).map(|j| target.eval(j as f64 * dt)).collect(),
        TrainLoss::Ensemble(_) => Vec::new(),
    };
    let mut losses = Vec::with_capacity(steps + 1);
    let mut grad_norms = Vec::with_capacity(steps + 1);
    for step in 0..=steps {
        let (l, g) = match loss {
            TrainLoss::Discrete { dt, .. } => discrete_loss_grad_with(&rnn, &rho, dt),
            TrainLoss::Ensemble(ens) => ensemble_loss_grad(&rnn, target, &ens, &paths),
        };
        if !l.is_finite() || losses.first().is_some_and(|&l0: &f64| l > 1e6 * l0) {
            return Err(Error::Diverged(step));
        }
        losses.push(l);
        grad_norms.push(g.iter().map(|x| x * x).sum::<f64>().sqrt());
        if step == steps {
            break;
        }
        // rescale to norm `clip`; never active while the gradient is small
        let scale = match clip {
            Some(cn) if *grad_norms.last().unwrap() > cn => cn / grad_norms.last().unwrap(),
            _ => 1.0,
        };
        let g: Vec<f64> = g.iter().map(|x| x * scale).collect();
        match optimizer {
            Optimizer::Gd => {
                for (t, gi) in theta.iter_mut().zip(&g) {
                    *t -= lr * gi;
                }
            }
            Optimizer::HeavyBall { momentum } => {
                for ((t, v), gi) in theta.iter_mut().zip(vel.iter_mut()).zip(&g) {
                    *v = momentum * *v - lr * gi;
                    *t += *v;
                }
            }
        }
        rnn.set_params(&theta);
    }
    let plateau = detect_plateau(&losses, PlateauRule::default());
    rnn.hurwitz = max_real_eig(&rnn.w) < -1e-10;
    Ok(TrainRecord { losses, grad_norms, plateau, final_rnn: Some(rnn) })
}

/// Seeded full-matrix initialisation: `W = -diag(d) + s N(0,1)/sqrt(m)`
/// with `d` evenly spaced on `[d_lo, d_hi]`, `c = ±1/sqrt(m)`, `U = ±1` with random signs.
pub fn random_rnn(m: usize, d_range: (f64, f64), offdiag: f64, seed: u64, index: u64) -> Result<LinearRNN> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let sm = (m as f64).sqrt();
    let mut w = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let z: f64 = StandardNormal.sample(&mut rng);
            w[(i, j)] = offdiag * z / sm;
        }
    }
    for i in 0..m {
        let f = if m > 1 { i as f64 / (m - 1) as f64 } else { 0.0 };
        w[(i, i)] -= d_range.0 + f * (d_range.1 - d_range.0);
    }
    let mut sign = || if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let c: Vec<f64> = (0..m).map(|_| sign() / sm).collect();
    let u: Vec<f64> = (0..m).map(|_| sign()).collect();
    LinearRNN::new(c, w, u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quad::integrate;

    fn small_rnn() -> LinearRNN {
        let w = DMatrix::from_row_slice(2, 2, &[-1.0, 0.3, -0.2, -2.0]);
        LinearRNN::new(vec![1.0, -0.5], w, vec![0.7, 1.1]).unwrap()
    }

    #[test]
    fn zero_input_zero_output() {
        let y = simulate(&small_rnn(), &[0.0; 50], 0.1);
        assert!(y.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn scalar_fixed_point() {
        let r = LinearRNN::new(vec![1.0], DMatrix::from_element(1, 1, -1.0), vec![1.0]).unwrap();
        assert!(r.hurwitz);
        let y = simulate(&r, &vec![1.0; 4000], 0.01);
        assert!((y.last().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn euler_converges_to_convolution() {
        let r = small_rnn();
        let x = |t: f64| (1.3 * t).sin();
        let tt = 3.0;
        let exact = integrate(|s| r.kernel(s) * x(tt - s), 0.0, tt, 1e-12).unwrap().value;
        let err = |dt: f64| {
            let n = (tt / dt).round() as usize;
            let xs: Vec<f64> = (0..n).map(|k| x(k as f64 * dt)).collect();
            (simulate(&r, &xs, dt)[n] - exact).abs()
        };
        let (e1, e2) = (err(0.01), err(0.005));
        assert!(e1 < 0.05);
        let ratio = e1 / e2;
        assert!((ratio - 2.0).abs() < 0.5, "{ratio}");
    }

    #[test]
    fn closed_form_matches_expsum_loss() {
        let model = ExpSumModel::new(vec![0.8], vec![1.2]).unwrap();
        let target = MemoryKernel::expsum(vec![1.0], vec![0.7]).unwrap();
        let rnn = LinearRNN::from_expsum(&model).unwrap();
        let j = closedform_finite_loss(&rnn, &target, 200.0).unwrap();
        let k = crate::expsum::loss(&model, &target).unwrap();
        assert!((j - k).abs() < 1e-6);
        assert!(closedform_finite_loss(&rnn, &target, 2.0).unwrap() <= j);
        let same = LinearRNN::from_expsum(&ExpSumModel::new(vec![1.0], vec![0.7]).unwrap()).unwrap();
        assert!(closedform_finite_loss(&same, &target, 10.0).unwrap() < 1e-20);
    }

    #[test]
    fn reverse_mode_matches_finite_differences() {
        let target = MemoryKernel::expsum(vec![1.0, -0.3], vec![0.5, 2.0]).unwrap();
        let rnn = small_rnn();
        let (_, g) = discrete_loss_grad(&rnn, &target, 0.1, 6.4);
        let p = rnn.params();
        for i in 0..p.len() {
            let h = 1e-6;
            let mut r1 = rnn.clone();
            let mut q = p.clone();
            q[i] += h;
            r1.set_params(&q);
            let mut r2 = rnn.clone();
            q[i] -= 2.0 * h;
            r2.set_params(&q);
            let fd = (discrete_loss_grad(&r1, &target, 0.1, 6.4).0 - discrete_loss_grad(&r2, &target, 0.1, 6.4).0) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-5 * g[i].abs().max(1e-3), "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn ensemble_gradient_matches_finite_differences() {
        let target = MemoryKernel::expsum(vec![1.0], vec![0.5]).unwrap();
        let rnn = small_rnn();
        for generator in [Generator::WhiteNoise, Generator::CosineMixture { terms: 3 }] {
            let ens = PathEnsemble { dt: 0.1, horizon: 3.2, n_paths: 5, generator, seed: 9 };
            let paths: Vec<Vec<f64>> = (0..5).map(|i| ens.path(i)).collect();
            let (_, g) = ensemble_loss_grad(&rnn, &target, &ens, &paths);
            let p = rnn.params();
            for i in 0..p.len() {
                let h = 1e-6;
                let mut q = p.clone();
                q[i] += h;
                let mut r1 = rnn.clone();
                r1.set_params(&q);
                q[i] -= 2.0 * h;
                let mut r2 = rnn.clone();
                r2.set_params(&q);
                let fd = (ensemble_loss_grad(&r1, &target, &ens, &paths).0 - ensemble_loss_grad(&r2, &target, &ens, &paths).0)
                    / (2.0 * h);
                assert!((fd - g[i]).abs() <= 1e-5 * g[i].abs().max(1e-3), "{i}: {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn monte_carlo_matches_closed_form() {
        let target = MemoryKernel::expsum(vec![1.0], vec![0.5]).unwrap();
        let rnn = small_rnn();
        let ens = PathEnsemble { dt: 0.01, horizon: 6.4, n_paths: 4000, generator: Generator::WhiteNoise, seed: 3 };
        let mc = mc_loss(&rnn, &target, &ens).unwrap();
        let exact = closedform_finite_loss(&rnn, &target, 6.4).unwrap();
        assert!((mc.mean - exact).abs() <= 3.0 * mc.std_error + 5.0 * ens.dt, "{mc:?} {exact}");
        let same = LinearRNN::from_expsum(&ExpSumModel::new(vec![1.0], vec![0.5]).unwrap()).unwrap();
        let z = mc_loss(&same, &target, &ens).unwrap();
        assert!(z.mean <= 3.0 * z.std_error + 5.0 * ens.dt);
    }

    #[test]
    fn paths_depend_only_on_seed_and_index() {
        let ens = PathEnsemble { dt: 0.1, horizon: 1.0, n_paths: 10, generator: Generator::WhiteNoise, seed: 5 };
        assert_eq!(ens.path(7), ens.path(7));
        assert_ne!(ens.path(7), ens.path(8));
    }

    #[test]
    fn training_converges_near_truth() {
        let target = MemoryKernel::expsum(vec![1.0, 0.5], vec![0.5, 1.5]).unwrap();
        let rnn0 = LinearRNN::from_expsum(&ExpSumModel::new(vec![0.9, 0.6], vec![0.6, 1.4]).unwrap()).unwrap();
        let rec = gd_train(&rnn0, &target, TrainLoss::Discrete { dt: 0.1, horizon: 6.4 }, 0.05, 400, Optimizer::Gd, None).unwrap();
        assert!(rec.losses.last().unwrap() < &(0.1 * rec.losses[0]));
        assert!(rec.plateau.is_none());
    }
}
