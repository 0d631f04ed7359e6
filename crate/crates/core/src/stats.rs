//! Error analysis for Monte Carlo series and small numerical utilities.

use crate::error::{Error, Result};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Compensated (Kahan) accumulator. Loop weights span many orders of
/// magnitude, so plain summation loses digits on big enumerations.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn add(&mut self, v: f64) {
        let y = v - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    /// Folds another accumulator in (sum first, then its compensation).
    pub fn merge(&mut self, other: &Kahan) {
        self.add(other.sum);
        self.add(-other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Blocked standard-error analysis of a (possibly autocorrelated) series.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    pub mean: f64,
    /// Naive standard error at bin size 1.
    pub naive_error: f64,
    /// Plateau (largest) blocked standard error.
    pub error: f64,
    /// Integrated autocorrelation time estimate; 0.5 for independent data.
    pub tau_int: f64,
    /// (bin size, blocked standard error) pairs.
    pub curve: Vec<(usize, f64)>,
}

fn blocked_error(series: &[f64], bin: usize) -> Option<f64> {
    let n_blocks = series.len() / bin;
    if n_blocks < 2 {
        return None;
    }
    let means: Vec<f64> = (0..n_blocks)
        .map(|b| series[b * bin..(b + 1) * bin].iter().sum::<f64>() / bin as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / n_blocks as f64;
    let var = means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>()
        / (n_blocks as f64 - 1.0);
    Some((var / n_blocks as f64).sqrt())
}

/// Blocked standard errors at the given bin sizes; the reported error is the
/// plateau (maximum) of the curve.
pub fn binned_error(series: &[f64], bin_sizes: &[usize]) -> Result<ErrorReport> {
    let max_bin = bin_sizes.iter().copied().max().unwrap_or(1).max(1);
    if series.len() < 2 * max_bin {
        return Err(Error::SeriesTooShort { len: series.len(), need: 2 * max_bin });
    }
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let mut curve = Vec::new();
    for &bin in bin_sizes {
        if bin == 0 {
            continue;
        }
        if let Some(err) = blocked_error(series, bin) {
            curve.push((bin, err));
        }
    }
    if curve.is_empty() {
        return Err(Error::SeriesTooShort { len: series.len(), need: 2 * max_bin });
    }
    let naive = blocked_error(series, 1).unwrap();
    let plateau = curve.iter().map(|&(_, e)| e).fold(0.0f64, f64::max);
    let tau_int = if naive > 0.0 { 0.5 * (plateau / naive) * (plateau / naive) } else { 0.5 };
    Ok(ErrorReport { mean, naive_error: naive, error: plateau, tau_int, curve })
}

/// Geometrically growing bin sizes keeping at least `min_blocks` blocks.
pub fn auto_bin_sizes(len: usize, min_blocks: usize) -> Vec<usize> {
    let mut sizes = Vec::new();
    let mut bin = 1;
    while len / bin >= min_blocks.max(2) {
        sizes.push(bin);
        bin *= 2;
    }
    if sizes.is_empty() {
        sizes.push(1);
    }
    sizes
}

/// Blocked analysis with automatic bin sizes (at least 64 blocks per size).
pub fn binned_error_auto(series: &[f64]) -> Result<ErrorReport> {
    binned_error(series, &auto_bin_sizes(series.len(), 64))
}

/// Binned jackknife of an arbitrary statistic of several aligned series.
///
/// `f` maps the vector of per-series means to the statistic. Returns the
/// full-sample estimate and the jackknife standard error over `n_bins`
/// leave-one-out blocks.
pub fn jackknife<F>(series: &[&[f64]], n_bins: usize, f: F) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> f64,
{
    let len = series.first().map(|s| s.len()).unwrap_or(0);
    if len < 2 * n_bins.max(2) {
        return Err(Error::SeriesTooShort { len, need: 2 * n_bins.max(2) });
    }
    for s in series {
        if s.len() != len {
            return Err(Error::InvalidParameter("jackknife series lengths differ".into()));
        }
    }
    let bin = len / n_bins;
    let used = bin * n_bins;
    let totals: Vec<f64> = series.iter().map(|s| s[..used].iter().sum()).collect();
    let full_means: Vec<f64> = totals.iter().map(|t| t / used as f64).collect();
    let full = f(&full_means);

    let mut jack = Vec::with_capacity(n_bins);
    for b in 0..n_bins {
        let means: Vec<f64> = series
            .iter()
            .zip(&totals)
            .map(|(s, &total)| {
                let block: f64 = s[b * bin..(b + 1) * bin].iter().sum();
                (total - block) / (used - bin) as f64
            })
            .collect();
        jack.push(f(&means));
    }
    let jmean = jack.iter().sum::<f64>() / n_bins as f64;
    let var = jack.iter().map(|j| (j - jmean) * (j - jmean)).sum::<f64>()
        * (n_bins as f64 - 1.0)
        / n_bins as f64;
    Ok((full, var.sqrt()))
}

/// Pearson chi-square goodness-of-fit test of observed counts against a
/// discrete distribution. Cells with expected count below 5 are pooled
/// (smallest expectations first) before computing the statistic.
pub fn chi_square_pvalue(counts: &[u64], probs: &[f64]) -> Result<(f64, usize, f64)> {
    if counts.len() != probs.len() || counts.is_empty() {
        return Err(Error::InvalidParameter("counts/probs length mismatch".into()));
    }
    let total: u64 = counts.iter().sum();
    let n = total as f64;
    let mut cells: Vec<(f64, f64)> = counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| (c as f64, n * p))
        .collect();
    cells.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (obs, exp) in cells {
        acc.0 += obs;
        acc.1 += exp;
        if acc.1 >= 5.0 {
            pooled.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.1 > 0.0 {
        if let Some(last) = pooled.last_mut() {
            last.0 += acc.0;
            last.1 += acc.1;
        } else {
            pooled.push(acc);
        }
    }
    if pooled.len() < 2 {
        return Err(Error::InvalidParameter("chi-square needs at least two cells".into()));
    }
    let stat: f64 = pooled.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let dof = pooled.len() - 1;
    let dist = ChiSquared::new(dof as f64)
        .map_err(|e| Error::InvalidParameter(format!("chi-square dof: {e}")))?;
    let p = 1.0 - dist.cdf(stat);
    Ok((stat, dof, p))
}

/// Least-squares straight line `y = a + b x`. Returns (a, b).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidParameter("linear fit needs >= 2 points".into()));
    }
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    if denom == 0.0 {
        return Err(Error::InvalidParameter("degenerate abscissae".into()));
    }
    let b = (n * sxy - sx * sy) / denom;
    let a = (sy - b * sx) / n;
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_series_has_zero_error() {
        let series = vec![0.37; 4096];
        let rep = binned_error_auto(&series).unwrap();
        assert!(rep.error < 1e-12, "error {}", rep.error);
        assert!((rep.mean - 0.37).abs() < 1e-12);
    }

    #[test]
    fn iid_series_error_matches_sigma_over_sqrt_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 1 << 16;
        let series: Vec<f64> =
            (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
        let rep = binned_error_auto(&series).unwrap();
        let expected = 1.0 / (n as f64).sqrt();
        assert!(
            (rep.error - expected).abs() / expected < 0.2,
            "plateau {} vs {}",
            rep.error,
            expected
        );
    }

    #[test]
    fn duplicated_pairs_double_the_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 1 << 15;
        let mut series = Vec::with_capacity(2 * n);
        for _ in 0..n {
            let v = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            series.push(v);
            series.push(v);
        }
        let rep = binned_error_auto(&series).unwrap();
        let ratio = rep.error / rep.naive_error;
        assert!(
            (ratio - std::f64::consts::SQRT_2).abs() < 0.2,
            "ratio {ratio}"
        );
        assert!((rep.tau_int - 1.0).abs() < 0.3, "tau {}", rep.tau_int);
    }

    #[test]
    fn too_short_series_is_rejected() {
        let err = binned_error(&[1.0, 2.0], &[4]).unwrap_err();
        assert!(matches!(err, crate::error::Error::SeriesTooShort { .. }));
    }

    #[test]
    fn jackknife_ratio_of_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 4096;
        let num: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let den: Vec<f64> = (0..n).map(|_| 0.5 + rng.gen::<f64>()).collect();
        let (est, err) = jackknife(&[&num, &den], 32, |m| m[0] / m[1]).unwrap();
        let direct = num.iter().sum::<f64>() / den.iter().sum::<f64>();
        assert!((est - direct).abs() < 1e-12);
        assert!(err > 0.0 && err < 0.05);
    }

    #[test]
    fn chi_square_uniform_counts() {
        // perfectly uniform observations: statistic 0, p-value 1
        let counts = vec![100u64; 8];
        let probs = vec![0.125; 8];
        let (stat, dof, p) = chi_square_pvalue(&counts, &probs).unwrap();
        assert!(stat < 1e-12);
        assert_eq!(dof, 7);
        assert!(p > 0.999);
    }

    #[test]
    fn chi_square_detects_bias() {
        let counts = vec![200u64, 50, 50, 100];
        let probs = vec![0.25; 4];
        let (_, _, p) = chi_square_pvalue(&counts, &probs).unwrap();
        assert!(p < 1e-6);
    }

    #[test]
    fn linear_fit_recovers_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.7 * x).collect();
        let (a, b) = linear_fit(&xs, &ys).unwrap();
        assert!((a - 3.0).abs() < 1e-12);
        assert!((b + 0.7).abs() < 1e-12);
    }

    #[test]
    fn kahan_handles_wide_magnitudes() {
        let mut k = Kahan::default();
        k.add(1e16);
        for _ in 0..10_000 {
            k.add(1.0);
        }
        k.add(-1e16);
        assert_eq!(k.value(), 10_000.0);
    }
}
