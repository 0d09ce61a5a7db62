//! Plateau detection on loss series. Plateaus have no formal definition in
//! the theory; these detectors are diagnostics with explicit thresholds.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Plateau {
    pub start: usize,
    pub end: usize,
}

impl Plateau {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlateauRule {
    /// Maximum relative loss decrease inside the window.
    pub flat_tol: f64,
    /// Minimum window length as a fraction of the series length.
    pub min_frac: f64,
    /// Minimum relative drop required before and after the window.
    pub drop: f64,
}

impl Default for PlateauRule {
    fn default() -> Self {
        PlateauRule { flat_tol: 0.01, min_frac: 0.3, drop: 0.1 }
    }
}

/// Longest window `[i, j]` over which the loss decreases by less than
/// `flat_tol` (relative to `loss[i]`), preceded by a drop of at least `drop`
/// from the start of the series and followed by a further drop of at least
/// `drop` after `j`. Returns `None` if that window is shorter than
/// `min_frac` of the series.
pub fn detect_plateau(loss: &[f64], rule: PlateauRule) -> Option<Plateau> {
    let n = loss.len();
    if n < 3 {
        return None;
    }
    let l0 = loss[0];
    // suffix minima, to test "drops further after j" in O(1)
    let mut suffix_min = vec![f64::INFINITY; n + 1];
    for k in (0..n).rev() {
        suffix_min[k] = suffix_min[k + 1].min(loss[k]);
    }
    let mut best: Option<Plateau> = None;
    let mut i = 0;
    while i < n {
        if !(loss[i] <= (1.0 - rule.drop) * l0) {
            i += 1;
            continue;
        }
        let floor = (1.0 - rule.flat_tol) * loss[i];
        let mut j = i;
        while j + 1 < n && loss[j + 1] >= floor {
            j += 1;
        }
        if suffix_min[j + 1] <= (1.0 - rule.drop) * loss[j] && best.is_none_or(|b| j - i > b.len()) {
            best = Some(Plateau { start: i, end: j });
        }
        i += 1;
    }
    best.filter(|b| (b.len() as f64) >= rule.min_frac * n as f64)
}

/// Index intervals where `|dJ/dtau| < rel * J(0) / tau_char`, from finite
/// differences on a (possibly non-uniform) time grid.
pub fn flat_intervals(tau: &[f64], loss: &[f64], rel: f64, tau_char: f64) -> Vec<(f64, f64)> {
    let thr = rel * loss.first().copied().unwrap_or(0.0).abs() / tau_char;
    let mut out = Vec::new();
    let mut open: Option<f64> = None;
    for k in 0..tau.len().saturating_sub(1) {
        let slope = (loss[k + 1] - loss[k]) / (tau[k + 1] - tau[k]);
        let flat = slope.abs() < thr;
        match (flat, open) {
            (true, None) => open = Some(tau[k]),
            (false, Some(s)) => {
                out.push((s, tau[k]));
                open = None;
            }
            _ => {}
        }
    }
    if let (Some(s), Some(&e)) = (open, tau.last()) {
        out.push((s, e));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn staircase() -> Vec<f64> {
        let mut v = Vec::new();
        for k in 0..100 {
            v.push(1.0 - 0.005 * k as f64); // drop to 0.5
        }
        for _ in 0..400 {
            v.push(0.5);
        }
        for k in 0..100 {
            v.push(0.5 - 0.004 * k as f64);
        }
        v
    }

    #[test]
    fn finds_bracketed_plateau() {
        let p = detect_plateau(&staircase(), PlateauRule::default()).unwrap();
        assert!(p.len() >= 400 && p.len() < 420, "{p:?}");
    }

    #[test]
    fn monotone_decay_has_no_plateau() {
        let v: Vec<f64> = (0..500).map(|k| (-0.01 * k as f64).exp()).collect();
        assert!(detect_plateau(&v, PlateauRule::default()).is_none());
    }

    #[test]
    fn needs_a_later_drop() {
        let mut v = staircase();
        v.truncate(500);
        assert!(detect_plateau(&v, PlateauRule::default()).is_none());
    }

    #[test]
    fn flat_interval_detection() {
        let tau: Vec<f64> = (0..300).map(|k| k as f64).collect();
        let loss: Vec<f64> = tau.iter().map(|&t| if t < 100.0 { 1.0 - t / 200.0 } else if t < 200.0 { 0.5 } else { 0.5 - (t - 200.0) / 400.0 }).collect();
        let iv = flat_intervals(&tau, &loss, 1e-3, 1.0);
        assert_eq!(iv.len(), 1);
        assert!((iv[0].0 - 99.0).abs() <= 1.0 && (iv[0].1 - 200.0).abs() <= 1.0);
    }
}
