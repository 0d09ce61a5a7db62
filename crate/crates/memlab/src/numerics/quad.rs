//! Adaptive Gauss-Kronrod (10/21) quadrature on finite intervals and on
//! `[0, inf)` with a caller-declared tail shape.

use crate::error::{Error, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_600_270_330,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];
// Gauss weights for the odd-indexed Kronrod nodes 1, 3, 5, 7, 9.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

const MAX_PANELS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_bound: f64,
    pub evaluations: usize,
}

/// Decay class of an integrand on `[0, inf)`, used to bound the part of the
/// integral beyond the last panel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailHint {
    /// `|f(t)|` decays at least like `exp(-rate t)`.
    Exp(f64),
    /// `|f(t)|` decays at least like `t^(-power)`, `power > 1`.
    Poly(f64),
}

fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[10] * fc;
    let mut g = 0.0;
    for i in 0..10 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    let k = k * h;
    let g = g * h;
    (k, (k - g).abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Adaptive bisection on `[a, b]` until the summed Kronrod-Gauss difference
/// drops below `tol`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<QuadratureResult> {
    integrate_with_breaks(&mut f, &[a, b], tol)
}

/// Like [`integrate`] but starts from the panels delimited by `breaks`
/// (sorted), which should include known kinks of the integrand.
pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(f: &mut F, breaks: &[f64], tol: f64) -> Result<QuadratureResult> {
    let mut heap = BinaryHeap::new();
    let mut evals = 0;
    for win in breaks.windows(2) {
        if win[1] > win[0] {
            let (v, e) = gk21(f, win[0], win[1]);
            evals += 21;
            heap.push(Panel { a: win[0], b: win[1], value: v, err: e });
        }
    }
    loop {
        let total_err: f64 = heap.iter().map(|p| p.err).sum();
        let value: f64 = heap.iter().map(|p| p.value).sum();
        if !value.is_finite() || !total_err.is_finite() {
            return Err(Error::QuadratureFailure { tol, achieved: f64::INFINITY });
        }
        if total_err <= tol {
            return Ok(QuadratureResult { value, error_bound: total_err, evaluations: evals });
        }
        if heap.len() >= MAX_PANELS {
            return Err(Error::QuadratureFailure { tol, achieved: total_err });
        }
        let worst = heap.pop().expect("non-empty panel set");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval below resolution: keep it and give up refining.
            heap.push(worst);
            let total_err: f64 = heap.iter().map(|p| p.err).sum();
            return Err(Error::QuadratureFailure { tol, achieved: total_err });
        }
        let (v1, e1) = gk21(f, worst.a, mid);
        let (v2, e2) = gk21(f, mid, worst.b);
        evals += 42;
        heap.push(Panel { a: worst.a, b: mid, value: v1, err: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, err: e2 });
    }
}

fn tail_estimate(hint: TailHint, t: f64, ft: f64) -> f64 {
    match hint {
        TailHint::Exp(rate) => ft.abs() / rate,
        TailHint::Poly(p) => ft.abs() * (1.0 + t) / (p - 1.0),
    }
}

/// Integrates over `[0, inf)`. Panels `[0, t0], [t0, 2 t0], ...` double in
/// length until the last panel and the hinted remainder are both negligible;
/// the remainder estimate is added to the error bound.
pub fn integrate_semiinf<F: FnMut(f64) -> f64>(f: F, tol: f64, hint: TailHint) -> Result<QuadratureResult> {
    integrate_semiinf_from(f, tol, hint, 0.0)
}

/// Variant of [`integrate_semiinf`] that never stops before `t_min`, for
/// integrands whose mass sits far from the origin.
pub fn integrate_semiinf_from<F: FnMut(f64) -> f64>(
    mut f: F,
    tol: f64,
    hint: TailHint,
    t_min: f64,
) -> Result<QuadratureResult> {
    let t0 = match hint {
        TailHint::Exp(rate) => (1.0 / rate).max(1e-3),
        TailHint::Poly(_) => 1.0,
    };
    let mut a = 0.0;
    let mut b = t0;
    let mut value = 0.0;
    let mut err = 0.0;
    let mut evals = 0;
    for _ in 0..200 {
        let budget = (tol * 0.5 - err).max(tol * 1e-3);
        let panel = integrate(&mut f, a, b, budget * 0.5)?;
        value += panel.value;
        err += panel.error_bound;
        evals += panel.evaluations;
        let fb = f(b);
        evals += 1;
        let tail = tail_estimate(hint, b, fb);
        if !tail.is_finite() {
            return Err(Error::QuadratureFailure { tol, achieved: f64::INFINITY });
        }
        // The last panel must itself be small, otherwise the integrand may
        // still be ramping up (e.g. a bump far from the origin).
        if b >= t_min && tail + err <= tol && panel.value.abs() <= tol.max(1e-300) * 4.0 {
            return Ok(QuadratureResult { value, error_bound: err + tail, evaluations: evals });
        }
        a = b;
        b *= 2.0;
    }
    Err(Error::QuadratureFailure { tol, achieved: err })
}
