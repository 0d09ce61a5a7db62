//! Critical affine spaces of the exponential-sum loss: Stirling counts,
//! enumeration of rate-sharing partitions, anchor solves on the reduced
//! problem, lifting, and Hessian degeneracy checks.

use crate::error::{Error, Result};
use crate::expsum::{ExpSumModel, Objective};
use crate::kernels::MemoryKernel;
use crate::numerics::sym_eig;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Rank threshold relative to the largest eigenvalue magnitude.
pub const ZERO_EIG_REL: f64 = 1e-8;
/// Aigrain-Williams residual accepted for an anchor.
pub const ANCHOR_TOL: f64 = 1e-7;

/// Stirling number of the second kind by the recurrence
/// `S(m, d) = d S(m-1, d) + S(m-1, d-1)`.
pub fn stirling2(m: usize, d: usize) -> Result<u64> {
    if m > 20 {
        return Err(Error::Overflow(format!("stirling2 supports m <= 20, got {m}")));
    }
    if d > m {
        return Ok(0);
    }
    let mut row = vec![0u64; d + 1];
    row[0] = 1;
    for i in 1..=m {
        for k in (1..=d.min(i)).rev() {
            row[k] = (k as u64)
                .checked_mul(row[k])
                .and_then(|x| x.checked_add(row[k - 1]))
                .ok_or_else(|| Error::Overflow(format!("S({i},{k})")))?;
        }
        row[0] = 0;
    }
    Ok(row[d])
}

fn factorial(n: usize) -> Result<u64> {
    (1..=n as u64).try_fold(1u64, |acc, k| acc.checked_mul(k)).ok_or_else(|| Error::Overflow(format!("{n}!")))
}

/// `sum_{d=1}^{d_max} d! S(m, d)`: the number of labelled partitions of `m`
/// modes into `d` rate groups.
pub fn count_critical_spaces(m: usize, d_max: usize) -> Result<u64> {
    if d_max > m.min(20) {
        return Err(Error::DomainError(format!("d_max={d_max} exceeds min(m, 20)")));
    }
    (1..=d_max).try_fold(0u64, |acc, d| {
        let term = factorial(d)?.checked_mul(stirling2(m, d)?).ok_or_else(|| Error::Overflow(format!("{d}! S({m},{d})")))?;
        acc.checked_add(term).ok_or_else(|| Error::Overflow("count".into()))
    })
}

/// All surjections `{0..m} -> {0..d}` as label vectors, in lexicographic order.
pub fn surjections(m: usize, d: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if d == 0 || d > m {
        return out;
    }
    let mut lab = vec![0usize; m];
    loop {
        let mut seen = vec![false; d];
        for &l in &lab {
            seen[l] = true;
        }
        if seen.iter().all(|&s| s) {
            out.push(lab.clone());
        }
        // odometer increment
        let mut i = m;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            lab[i] += 1;
            if lab[i] < d {
                break;
            }
            lab[i] = 0;
        }
    }
}

/// Unlabelled set partitions of `{0..m}` into `d` blocks (restricted growth
/// strings). Their count is `S(m, d)`.
pub fn set_partitions(m: usize, d: usize) -> Vec<Vec<usize>> {
    fn rec(i: usize, m: usize, d: usize, used: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == m {
            if used == d {
                out.push(cur.clone());
            }
            return;
        }
        if used + (m - i) < d {
            return;
        }
        for l in 0..=used.min(d - 1) {
            cur.push(l);
            rec(i + 1, m, d, used.max(l + 1), cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if d >= 1 && d <= m {
        rec(0, m, d, 0, &mut Vec::with_capacity(m), &mut out);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Partition {
    /// Block `j` shares the anchor rate `v_j`; its coefficients sum to `b_j`.
    pub blocks: Vec<Vec<usize>>,
    /// Blocks whose coefficients sum to zero, each at its own rate.
    pub zero_blocks: Vec<Vec<usize>>,
    pub universe: usize,
}

impl Partition {
    /// From a surjective label vector (`labels[i]` = block of mode `i`).
    pub fn from_labels(labels: &[usize], d: usize) -> Result<Self> {
        let mut blocks = vec![Vec::new(); d];
        for (i, &l) in labels.iter().enumerate() {
            if l >= d {
                return Err(Error::DomainError(format!("label {l} >= {d}")));
            }
            blocks[l].push(i);
        }
        let p = Partition { blocks, zero_blocks: Vec::new(), universe: labels.len() };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = vec![false; self.universe];
        for b in self.blocks.iter().chain(&self.zero_blocks) {
            if b.is_empty() {
                return Err(Error::DomainError("empty block".into()));
            }
            for &i in b {
                if i >= self.universe || seen[i] {
                    return Err(Error::DomainError(format!("index {i} repeated or out of range")));
                }
                seen[i] = true;
            }
        }
        if !seen.iter().all(|&s| s) {
            return Err(Error::DomainError("blocks do not cover all modes".into()));
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.blocks.len()
    }
}

/// A stationary point `(b, v)` of the width-`d` loss.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Anchor {
    pub b: Vec<f64>,
    pub v: Vec<f64>,
    pub loss: f64,
    /// Largest Aigrain-Williams mismatch: Laplace transforms of model and
    /// target and their first derivatives, compared at each `v_j`.
    pub residual: f64,
    pub grad_norm: f64,
    pub degenerate: bool,
}

impl Anchor {
    pub fn model(&self) -> ExpSumModel {
        ExpSumModel { a: self.b.clone(), w: self.v.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalSpace {
    pub partition: Partition,
    pub anchor_b: Vec<f64>,
    pub anchor_v: Vec<f64>,
    /// Rates of the zero blocks, one per block.
    pub zero_rates: Vec<f64>,
}

impl CriticalSpace {
    pub fn new(partition: Partition, anchor: &Anchor) -> Result<Self> {
        partition.validate()?;
        if partition.d() != anchor.b.len() {
            return Err(Error::DomainError(format!("partition has {} blocks, anchor has {}", partition.d(), anchor.b.len())));
        }
        let mut vs = anchor.v.clone();
        vs.sort_by(f64::total_cmp);
        if vs.windows(2).any(|p| p[0] == p[1]) || vs.first().is_some_and(|&v| v <= 0.0) {
            return Err(Error::DomainError("anchor rates must be positive and distinct".into()));
        }
        Ok(CriticalSpace { partition, anchor_b: anchor.b.clone(), anchor_v: anchor.v.clone(), zero_rates: Vec::new() })
    }

    /// Number of free coefficient coordinates.
    pub fn dimension(&self) -> usize {
        self.partition.blocks.iter().chain(&self.partition.zero_blocks).map(|b| b.len() - 1).sum()
    }
}

/// Residual of the stationarity equations of a width-`d` model, scaled as
/// Laplace-transform mismatches.
pub fn aigrain_williams_residual(model: &ExpSumModel, obj: &Objective) -> Result<f64> {
    let g = obj.grad(model)?;
    let d = model.width();
    let mut r: f64 = 0.0;
    for j in 0..d {
        r = r.max(0.5 * g[j].abs());
        if model.a[j] != 0.0 {
            r = r.max(0.5 * g[d + j].abs() / model.a[j].abs());
        }
    }
    Ok(r)
}

/// Least-squares coefficients for fixed rates: `G b = L[rho](v)` with the
/// Gram matrix `G_ij = 1/(v_i + v_j)`.
fn project_coeffs(v: &[f64], target: &MemoryKernel) -> Option<Vec<f64>> {
    let d = v.len();
    let g = DMatrix::from_fn(d, d, |i, j| 1.0 / (v[i] + v[j]));
    let rhs = DVector::from_iterator(d, v.iter().map(|&s| target.moment(0, s).unwrap_or(f64::NAN)));
    let b = g.svd(true, true).solve(&rhs, 1e-14).ok()?;
    b.iter().all(|x| x.is_finite()).then(|| b.iter().copied().collect())
}

/// Damped Newton with Levenberg regularisation on the full Hessian.
fn newton_polish(obj: &Objective, mut theta: Vec<f64>, max_iter: usize) -> Result<Vec<f64>> {
    let n = theta.len();
    let d = n / 2;
    let (mut f, mut g) = obj.loss_and_grad_raw(&theta)?;
    let mut mu = 1e-6;
    for _ in 0..max_iter {
        let gn = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if gn < 1e-15 {
            break;
        }
        let model = ExpSumModel { a: theta[..d].to_vec(), w: theta[d..].to_vec() };
        let h = obj.hessian(&model)?;
        let scale = h.diagonal().iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
        let mut improved = false;
        for _ in 0..40 {
            let mut hm = h.clone();
            for i in 0..n {
                hm[(i, i)] += mu * scale;
            }
            let step = match hm.lu().solve(&DVector::from_column_slice(&g)) {
                Some(s) => s,
                None => {
                    mu *= 10.0;
                    continue;
                }
            };
            let cand: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, s)| t - s).collect();
            if cand[d..].iter().any(|&w| !(w > 0.0)) {
                mu *= 10.0;
                continue;
            }
            match obj.loss_and_grad_raw(&cand) {
                Ok((fc, gc)) if fc.is_finite() && (fc < f || (fc <= f && gc.iter().map(|x| x * x).sum::<f64>().sqrt() < gn)) => {
                    theta = cand;
                    f = fc;
                    g = gc;
                    mu = (mu * 0.1).max(1e-16);
                    improved = true;
                    break;
                }
                _ => mu *= 10.0,
            }
        }
        if !improved {
            break;
        }
    }
    Ok(theta)
}

/// Multi-start search for a non-degenerate global minimiser of the width-`d`
/// loss. Starts draw rates log-uniformly in `[0.05, 20]`, solve for the
/// coefficients by least squares, then polish with damped Newton.
pub fn find_nondegenerate_min(target: &MemoryKernel, d: usize, starts: usize, seed: u64) -> Result<Anchor> {
    if d == 0 {
        return Err(Error::DomainError("d must be positive".into()));
    }
    let obj = Objective::new(target.clone())?;
    let candidates: Vec<Option<Anchor>> = (0..starts)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let (lo, hi) = (0.05f64.ln(), 20f64.ln());
            let mut v: Vec<f64> = (0..d).map(|_| rng.random_range(lo..hi).exp()).collect();
            v.sort_by(f64::total_cmp);
            let b = project_coeffs(&v, target)?;
            let theta: Vec<f64> = b.into_iter().chain(v).collect();
            let theta = newton_polish(&obj, theta, 300).ok()?;
            let mut pairs: Vec<(f64, f64)> = (0..d).map(|j| (theta[j], theta[d + j])).collect();
            pairs.sort_by(|x, y| x.1.total_cmp(&y.1));
            let model = ExpSumModel { a: pairs.iter().map(|p| p.0).collect(), w: pairs.iter().map(|p| p.1).collect() };
            let (loss, g) = obj.loss_and_grad(&model).ok()?;
            let residual = aigrain_williams_residual(&model, &obj).ok()?;
            let bmax = model.a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let degenerate = model.a.iter().any(|b| b.abs() <= 1e-8 * bmax)
                || model.w.windows(2).any(|p| (p[1] - p[0]).abs() <= 1e-6 * p[1].abs())
                || {
                    // padded fits (split rates, vanishing terms) pass the
                    // tests above by a hair but have a singular Hessian
                    let eig = sym_eig(&obj.hessian(&model).ok()?).ok()?;
                    eig.min() <= ZERO_EIG_REL * eig.max_abs()
                };
            Some(Anchor {
                b: model.a,
                v: model.w,
                loss,
                residual,
                grad_norm: g.iter().map(|x| x * x).sum::<f64>().sqrt(),
                degenerate,
            })
        })
        .collect();
    candidates
        .into_iter()
        .flatten()
        .filter(|a| !a.degenerate && a.residual <= ANCHOR_TOL && a.loss.is_finite())
        .min_by(|x, y| x.loss.total_cmp(&y.loss))
        .ok_or(Error::NoNondegeneratePointFound(starts))
}

/// Places a width-`m` model on the space: block `j` gets rate `v_j`, and its
/// coefficients are the next `|I_j| - 1` free coordinates with the last one
/// fixed by the block sum.
pub fn lift(space: &CriticalSpace, free: &[f64]) -> Result<ExpSumModel> {
    if free.len() != space.dimension() {
        return Err(Error::DomainError(format!("expected {} free coordinates, got {}", space.dimension(), free.len())));
    }
    let p = &space.partition;
    if space.zero_rates.len() != p.zero_blocks.len() {
        return Err(Error::DomainError("one rate per zero block required".into()));
    }
    let mut a = vec![0.0; p.universe];
    let mut w = vec![0.0; p.universe];
    let mut it = free.iter();
    let targets = space.anchor_b.iter().zip(&space.anchor_v).map(|(&b, &v)| (b, v));
    let zeros = space.zero_rates.iter().map(|&v| (0.0, v));
    for (block, (sum, rate)) in p.blocks.iter().chain(&p.zero_blocks).zip(targets.chain(zeros)) {
        let mut acc = 0.0;
        for &i in &block[..block.len() - 1] {
            a[i] = *it.next().expect("length checked");
            acc += a[i];
            w[i] = rate;
        }
        let last = block[block.len() - 1];
        a[last] = sum - acc;
        w[last] = rate;
    }
    ExpSumModel::new(a, w)
}

/// Lifts and checks that the lifted point is stationary, relative to the
/// anchor's own gradient.
pub fn lift_checked(space: &CriticalSpace, free: &[f64], obj: &Objective) -> Result<(ExpSumModel, f64)> {
    let anchor = ExpSumModel { a: space.anchor_b.clone(), w: space.anchor_v.clone() };
    let res = aigrain_williams_residual(&anchor, obj)?;
    if res > ANCHOR_TOL {
        return Err(Error::AnchorNotCritical(res));
    }
    let anchor_g = obj.grad(&anchor)?.iter().map(|x| x * x).sum::<f64>().sqrt();
    let model = lift(space, free)?;
    let g = obj.grad(&model)?.iter().map(|x| x * x).sum::<f64>().sqrt();
    if g > 1e-7 * (1.0 + anchor_g) {
        return Err(Error::AnchorNotCritical(g));
    }
    Ok((model, g))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HessianSummary {
    /// Descending.
    pub eigenvalues: Vec<f64>,
    pub rank: usize,
    pub zero_count: usize,
    pub threshold: f64,
    /// `rank <= m + d` and `zero_count >= m - d`.
    pub bound_holds: bool,
}

pub fn hessian_on_space(space: &CriticalSpace, free: &[f64], target: &MemoryKernel) -> Result<HessianSummary> {
    let obj = Objective::new(target.clone())?;
    let model = lift(space, free)?;
    summarize_hessian(&obj.hessian(&model)?, space.partition.universe, space.partition.d())
}

fn summarize_hessian(h: &DMatrix<f64>, m: usize, d: usize) -> Result<HessianSummary> {
    let eig = sym_eig(h)?;
    let threshold = ZERO_EIG_REL * eig.max_abs();
    let rank = eig.eigenvalues.iter().filter(|l| l.abs() > threshold).count();
    let zero_count = eig.eigenvalues.len() - rank;
    Ok(HessianSummary {
        eigenvalues: eig.eigenvalues.to_vec(),
        rank,
        zero_count,
        threshold,
        bound_holds: rank <= m + d && zero_count + d >= m,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointLabel {
    Saddle,
    DegenerateStable,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classified {
    pub a1: f64,
    /// Smallest Hessian eigenvalue transverse to the critical line.
    pub min_transverse: f64,
    pub threshold: f64,
    pub label: PointLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub anchor: Anchor,
    pub points: Vec<Classified>,
}

/// Labels points `(a1, b - a1, v, v)` on the critical line of a width-2
/// model fitted to a two-term target. The line direction is always a null
/// direction of the Hessian, so the sign test uses the Hessian restricted to
/// its orthogonal complement. Targets with same-sign coefficients and rate
/// ratio at least `2 + sqrt(3)` get `Indeterminate` everywhere.
pub fn classify_2d(target: &MemoryKernel, a1_grid: &[f64]) -> Result<Classification> {
    let MemoryKernel::ExpSum(es) = target else {
        return Err(Error::InvalidKernel("classification needs a two-term exponential sum".into()));
    };
    if es.coeffs.len() != 2 || !es.is_nondegenerate() {
        return Err(Error::InvalidKernel("classification needs a non-degenerate two-term exponential sum".into()));
    }
    // same-sign coefficients with a rate ratio of at least 2 + sqrt(3) are
    // not covered by the sign analysis
    let (lo, hi) = (es.rates[0].min(es.rates[1]), es.rates[0].max(es.rates[1]));
    let unclassified = es.coeffs[0] * es.coeffs[1] > 0.0 && hi / lo >= 2.0 + 3f64.sqrt();
    let anchor = find_nondegenerate_min(target, 1, 32, 0)?;
    let obj = Objective::new(target.clone())?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // orthonormal basis of the complement of (1, -1, 0, 0)/sqrt(2)
    let q = DMatrix::from_row_slice(4, 3, &[s, 0.0, 0.0, s, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    let points = a1_grid
        .iter()
        .map(|&a1| {
            let model = ExpSumModel::new(vec![a1, anchor.b[0] - a1], vec![anchor.v[0]; 2])?;
            let h = obj.hessian(&model)?;
            let full = sym_eig(&h)?;
            let threshold = ZERO_EIG_REL * full.max_abs();
            let min_transverse = sym_eig(&(q.transpose() * &h * &q))?.min();
            let label = if unclassified {
                PointLabel::Indeterminate
            } else if min_transverse < -10.0 * threshold {
                PointLabel::Saddle
            } else if min_transverse > 10.0 * threshold {
                PointLabel::DegenerateStable
            } else {
                PointLabel::Indeterminate
            };
            Ok(Classified { a1, min_transverse, threshold, label })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Classification { anchor, points })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpaceReport {
    pub m: usize,
    pub d: usize,
    pub labels: Vec<usize>,
    pub grad_norm: f64,
    pub rank: usize,
    pub zero_count: usize,
    pub bound_holds: bool,
}

/// Every labelled partition of `m` modes into `d <= m` groups, lifted at a
/// seeded random split and checked for stationarity and Hessian rank.
/// `anchors[d-1]` is the anchor for width `d`.
pub fn enumerate_spaces(target: &MemoryKernel, m: usize, anchors: &[Anchor], seed: u64) -> Result<Vec<SpaceReport>> {
    let obj = Objective::new(target.clone())?;
    let mut jobs = Vec::new();
    for d in 1..=m.min(anchors.len()) {
        for labels in surjections(m, d) {
            jobs.push((d, labels));
        }
    }
    jobs.into_par_iter()
        .enumerate()
        .map(|(k, (d, labels))| {
            let space = CriticalSpace::new(Partition::from_labels(&labels, d)?, &anchors[d - 1])?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let free: Vec<f64> = (0..space.dimension()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (model, grad_norm) = lift_checked(&space, &free, &obj)?;
            let hs = summarize_hessian(&obj.hessian(&model)?, m, d)?;
            Ok(SpaceReport { m, d, labels, grad_norm, rank: hs.rank, zero_count: hs.zero_count, bound_holds: hs.bound_holds })
        })
        .collect()
}
