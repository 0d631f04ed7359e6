//! Closed-form contour-sum bounds and thresholds.
//!
//! The probability that a given time-0 point is on or inside a long loop
//! is bounded by a sum over contours: contours with k bars contribute at
//! most `(k+1) 4^k q^(1 - k/2) / 12` for `k >= 7`, while the k = 5 and
//! k = 6 families have limited entropy and contribute at most
//! `2^(k+1) q^(1 - k/2)`. The geometric series converges for
//! `4 / sqrt(q) < 1`, i.e. S > 15/2. The module treats S as a real
//! parameter: the formulas are analytic and the threshold is a real root.

use crate::error::{Error, Result};

/// A bound value that may be divergent below the convergence threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundValue {
    Finite(f64),
    Divergent,
}

impl BoundValue {
    pub fn finite(&self) -> Option<f64> {
        match self {
            BoundValue::Finite(v) => Some(*v),
            BoundValue::Divergent => None,
        }
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self, BoundValue::Divergent)
    }
}

/// The three pieces of the contour-sum bound.
#[derive(Debug, Clone, Copy)]
pub struct PeierlsBreakdown {
    /// Five-bar contours: `64 q^(-3/2)`.
    pub k5: f64,
    /// Six-bar contours: `128 q^(-2)`.
    pub k6: f64,
    /// All larger contours via the differentiated geometric series.
    pub tail: f64,
}

impl PeierlsBreakdown {
    pub fn total(&self) -> f64 {
        self.k5 + self.k6 + self.tail
    }
}

fn fugacity(s: f64) -> f64 {
    2.0 * s + 1.0
}

/// `sum_{k >= m} (k+1) rho^k`, closed form of the differentiated
/// geometric series: `rho^m ((m+1) - m rho) / (1 - rho)^2`.
fn weighted_tail(m: u32, rho: f64) -> f64 {
    let mf = m as f64;
    rho.powi(m as i32) * ((mf + 1.0) - mf * rho) / ((1.0 - rho) * (1.0 - rho))
}

/// Contour-sum bound split into its pieces; requires S > 15/2.
pub fn peierls_breakdown(s: f64) -> Result<PeierlsBreakdown> {
    if s <= 7.5 {
        return Err(Error::DivergentSeries(s));
    }
    let q = fugacity(s);
    let r = 4.0 / q.sqrt();
    Ok(PeierlsBreakdown {
        k5: 64.0 * q.powf(-1.5),
        k6: 128.0 / (q * q),
        tail: q / 12.0 * weighted_tail(7, r),
    })
}

/// Upper bound on the probability that a fixed time-0 point is on or
/// inside a long loop, as a function of real S > 15/2.
pub fn peierls_bound(s: f64) -> BoundValue {
    match peierls_breakdown(s) {
        Ok(b) => BoundValue::Finite(b.total()),
        Err(_) => BoundValue::Divergent,
    }
}

/// Same bound evaluated by explicit partial summation; used as the second
/// route in tests. Terms are added until they fall below `1e-18` of zero.
pub fn peierls_bound_truncated(s: f64) -> BoundValue {
    if s <= 7.5 {
        return BoundValue::Divergent;
    }
    let q = fugacity(s);
    let r = 4.0 / q.sqrt();
    let mut tail = 0.0f64;
    let mut k = 7u32;
    loop {
        let term = (k as f64 + 1.0) * r.powi(k as i32);
        tail += term;
        if term < 1e-18 {
            break;
        }
        k += 1;
        if k > 1_000_000 {
            break;
        }
    }
    BoundValue::Finite(64.0 * q.powf(-1.5) + 128.0 / (q * q) + q / 12.0 * tail)
}

/// Guaranteed dimerization amplitude
/// `c(S) = (1 - 1/q^2)(1 - 2 * peierls_bound(S))`; positive once the
/// bound drops below one half.
pub fn dimerization_constant(s: f64) -> BoundValue {
    match peierls_bound(s) {
        BoundValue::Finite(b) => {
            let q = fugacity(s);
            BoundValue::Finite((1.0 - 1.0 / (q * q)) * (1.0 - 2.0 * b))
        }
        BoundValue::Divergent => BoundValue::Divergent,
    }
}

/// The spin value where the contour-sum bound crosses one half, found by
/// bisection on (15/2, 100]; the bound is strictly decreasing there.
pub fn dimerization_threshold() -> f64 {
    let mut lo = 7.5 + 1e-9;
    let mut hi = 100.0;
    debug_assert!(peierls_bound(hi).finite().unwrap() < 0.5);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let b = peierls_bound(mid).finite().unwrap_or(f64::INFINITY);
        if b > 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-7 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest decay length for which the reweighted contour series
/// converges: `eta_min = 1 / ln(sqrt(q) / 4)`, finite for S > 15/2.
pub fn decay_length_min(s: f64) -> BoundValue {
    if s <= 7.5 {
        return BoundValue::Divergent;
    }
    let q = fugacity(s);
    BoundValue::Finite(1.0 / (q.sqrt() / 4.0).ln())
}

/// Tail of the reweighted contour sum bounding
/// `e^(m/eta) P(two points at distance m are connected)`:
/// `(q/12) sum_{k >= m} (k+1) (4 e^(1/eta) / sqrt(q))^k`.
pub fn decay_tail_bound(s: f64, eta: f64, m: u32) -> Result<f64> {
    if s <= 7.5 {
        return Err(Error::DivergentSeries(s));
    }
    let q = fugacity(s);
    let rho = 4.0 * (1.0 / eta).exp() / q.sqrt();
    if rho >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "eta = {eta} below the convergent range (rho = {rho:.4})"
        )));
    }
    Ok(q / 12.0 * weighted_tail(m, rho))
}

/// One row of the bounds table for the CLI.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub s: f64,
    pub q: f64,
    pub peierls: BoundValue,
    pub c: BoundValue,
    pub eta_min: BoundValue,
}

pub fn bound_report(s: f64) -> BoundReport {
    BoundReport {
        s,
        q: fugacity(s),
        peierls: peierls_bound(s),
        c: dimerization_constant(s),
        eta_min: decay_length_min(s),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_at_forty() {
        // q = 81, r = 4/9: pieces are 64/729, 128/6561 and
        // (81/12) * (4/9)^7 * (44/9) / (25/81) = 0.36625292...
        let b = peierls_breakdown(40.0).unwrap();
        assert!((b.k5 - 64.0 / 729.0).abs() < 1e-15);
        assert!((b.k6 - 128.0 / 6561.0).abs() < 1e-15);
        assert!((b.tail - 0.366_253_11).abs() < 1e-7);
        let total = b.total();
        assert!((total - 0.473_553_83).abs() < 1e-7);
        assert!(total < 0.5);
    }

    #[test]
    fn closed_form_matches_truncated_sum() {
        for s in [8.0, 10.0, 20.0, 39.2, 40.0, 100.0] {
            let a = peierls_bound(s).finite().unwrap();
            let b = peierls_bound_truncated(s).finite().unwrap();
            assert!((a - b).abs() <= 1e-12 * a.max(1.0), "S={s}: {a} vs {b}");
        }
    }

    #[test]
    fn divergence_at_and_below_threshold() {
        assert!(peierls_bound(7.5).is_divergent());
        assert!(peierls_bound(5.0).is_divergent());
        assert!(dimerization_constant(7.0).is_divergent());
        assert!(decay_length_min(7.5).is_divergent());
        assert!(!peierls_bound(7.5000001).is_divergent());
    }

    #[test]
    fn threshold_location() {
        let s_star = dimerization_threshold();
        assert!((s_star - 39.2).abs() <= 0.1, "threshold {s_star}");
        // bracketing
        assert!(peierls_bound(s_star - 1.0).finite().unwrap() > 0.5);
        assert!(peierls_bound(s_star + 1.0).finite().unwrap() < 0.5);
    }

    #[test]
    fn threshold_agrees_with_grid_scan() {
        let s_star = dimerization_threshold();
        let mut crossing = None;
        let mut s = 38.5;
        while s < 40.0 {
            let here = peierls_bound(s).finite().unwrap();
            let next = peierls_bound(s + 1e-5).finite().unwrap();
            if here > 0.5 && next <= 0.5 {
                crossing = Some(s + 0.5e-5);
                break;
            }
            s += 1e-5;
        }
        let grid = crossing.expect("crossing in scan range");
        assert!((grid - s_star).abs() < 1e-4, "grid {grid} vs bisection {s_star}");
    }

    #[test]
    fn amplitude_signs() {
        let c40 = dimerization_constant(40.0).finite().unwrap();
        assert!((c40 - 0.0529).abs() < 5e-4, "c(40) = {c40}");
        assert!(c40 > 0.0);
        for s in [40.0, 45.0, 60.0, 100.0, 200.0] {
            assert!(dimerization_constant(s).finite().unwrap() > 0.0, "S={s}");
        }
        assert!(dimerization_constant(30.0).finite().unwrap() < 0.0);
    }

    #[test]
    fn monotone_in_s() {
        let mut prev_b = f64::INFINITY;
        let mut prev_c = f64::NEG_INFINITY;
        let mut s = 7.6;
        while s <= 200.0 {
            let b = peierls_bound(s).finite().unwrap();
            let c = dimerization_constant(s).finite().unwrap();
            assert!(b < prev_b, "bound not decreasing at S={s}");
            assert!(c > prev_c, "amplitude not increasing at S={s}");
            // exact algebraic relation between the two
            let q = 2.0 * s + 1.0;
            assert!((c - (1.0 - 1.0 / (q * q)) * (1.0 - 2.0 * b)).abs() < 1e-14);
            prev_b = b;
            prev_c = c;
            s += 0.5;
        }
    }

    #[test]
    fn decay_lengths() {
        let eta8 = decay_length_min(8.0).finite().unwrap();
        assert!((eta8 - 33.0).abs() < 0.1, "eta_min(8) = {eta8}");
        let eta40 = decay_length_min(40.0).finite().unwrap();
        assert!((eta40 - 1.2331517).abs() < 1e-6);
        // the reweighted tail converges just above eta_min and not below
        assert!(decay_tail_bound(40.0, 1.3, 7).is_ok());
        assert!(decay_tail_bound(40.0, 1.2, 7).is_err());
        // larger separation gives a smaller tail
        let t7 = decay_tail_bound(40.0, 2.0, 7).unwrap();
        let t12 = decay_tail_bound(40.0, 2.0, 12).unwrap();
        assert!(t12 < t7);
    }
}
