//! Rescaling of discrete series to their limit coordinates and the small set
//! of statistics used to compare ensembles against limit objects.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use libm::{cbrt, floor, log, round, sqrt};
use serde::{Deserialize, Serialize};

use crate::{CriticalWindow, Error, Result};

/// 95% two-sample Kolmogorov–Smirnov constant.
pub const KS_95: f64 = 1.36;

/// What a discrete series counts; determines its scaling exponents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    /// Height profile `Z(h)`, indexed by height.
    Profile,
    /// Cumulative profile `C(h)`, indexed by height.
    CumulativeProfile,
    /// Cousin statistic `csn(w(j))`, indexed by label.
    Cousin,
    /// Cumulative cousin process `K(j)`, indexed by label.
    CumulativeCousin,
    /// Breadth-first walk `X(i)`, indexed by step.
    Walk,
}

impl SeriesKind {
    pub fn name(&self) -> &'static str {
        match self {
            SeriesKind::Profile => "height profile",
            SeriesKind::CumulativeProfile => "cumulative profile",
            SeriesKind::Cousin => "cousin statistic",
            SeriesKind::CumulativeCousin => "cumulative cousin process",
            SeriesKind::Walk => "breadth-first walk",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeTag {
    Aldous,
    General,
}

/// Space and time scale factors for one series kind in one regime.
///
/// A rescaled value is `space * value(index)` at time `index / index_rate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub kind: SeriesKind,
    pub regime: RegimeTag,
    pub space: f64,
    pub index_rate: f64,
}

impl Scaling {
    /// | kind | Aldous space, index | general space, index |
    /// |---|---|---|
    /// | `Z(h)` | `n^-1/3`, `n^1/3` | `1/(eps^2 n)`, `1/eps` |
    /// | `C(h)` | `n^-2/3`, `n^1/3` | `1/(eps n)`, `1/eps` |
    /// | `csn` | `n^-1/3`, `n^2/3` | `1/(eps^2 n)`, `eps n` |
    /// | `K` | `n^-1`, `n^2/3` | `1/(eps^3 n^2)`, `eps n` |
    /// | `X` | `n^-1/3`, `n^2/3` | `1/(eps^2 n)`, `eps n` |
    pub fn new(kind: SeriesKind, window: &CriticalWindow, n: u64) -> Self {
        let nf = n as f64;
        let n13 = cbrt(nf);
        let n23 = n13 * n13;
        match window.epsilon() {
            None => {
                let (space, index_rate) = match kind {
                    SeriesKind::Profile => (1.0 / n13, n13),
                    SeriesKind::CumulativeProfile => (1.0 / n23, n13),
                    SeriesKind::Cousin | SeriesKind::Walk => (1.0 / n13, n23),
                    SeriesKind::CumulativeCousin => (1.0 / nf, n23),
                };
                Scaling {
                    kind,
                    regime: RegimeTag::Aldous,
                    space,
                    index_rate,
                }
            }
            Some(eps) => {
                let (space, index_rate) = match kind {
                    SeriesKind::Profile => (1.0 / (eps * eps * nf), 1.0 / eps),
                    SeriesKind::CumulativeProfile => (1.0 / (eps * nf), 1.0 / eps),
                    SeriesKind::Cousin | SeriesKind::Walk => (1.0 / (eps * eps * nf), eps * nf),
                    SeriesKind::CumulativeCousin => (1.0 / (eps * eps * eps * nf * nf), eps * nf),
                };
                Scaling {
                    kind,
                    regime: RegimeTag::General,
                    space,
                    index_rate,
                }
            }
        }
    }

    /// Discrete index read at limit time `t`: `floor(index_rate * t)`.
    pub fn index_at(&self, t: f64) -> u64 {
        floor(self.index_rate * t).max(0.0) as u64
    }

    pub fn time_of(&self, index: u64) -> f64 {
        index as f64 / self.index_rate
    }
}

/// A right-continuous step path on a real time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaledPath {
    pub t: Vec<f64>,
    pub values: Vec<f64>,
    pub scaling: Scaling,
}

impl RescaledPath {
    /// Value at time `t`: the last grid point at or before `t`. Times before
    /// the first grid point read the first value.
    pub fn value_at(&self, t: f64) -> f64 {
        let idx = self.t.partition_point(|&s| s <= t);
        self.values[idx.saturating_sub(1)]
    }

    /// Recovers the integer series.
    pub fn unscale(&self) -> Vec<i64> {
        self.values
            .iter()
            .map(|&v| round(v / self.scaling.space) as i64)
            .collect()
    }
}

/// Maps `values[j]` to `(j / index_rate, space * values[j])`.
pub fn rescale(values: &[f64], kind: SeriesKind, scaling: &Scaling) -> Result<RescaledPath> {
    if kind != scaling.kind {
        return Err(Error::SeriesMismatch {
            series: kind.name(),
            expected: scaling.kind.name(),
        });
    }
    if values.is_empty() {
        return Err(Error::InvalidArgument("cannot rescale an empty series".into()));
    }
    Ok(RescaledPath {
        t: (0..values.len()).map(|j| scaling.time_of(j as u64)).collect(),
        values: values.iter().map(|v| v * scaling.space).collect(),
        scaling: *scaling,
    })
}

/// Largest `|path(t) - reference(t)|` over the path's grid points in
/// `[t_min, t_max]`.
pub fn sup_distance<F: Fn(f64) -> f64>(path: &RescaledPath, reference: F, t_range: (f64, f64)) -> f64 {
    path.t
        .iter()
        .zip(&path.values)
        .filter(|(&t, _)| t >= t_range.0 && t <= t_range.1)
        .map(|(&t, &v)| (v - reference(t)).abs())
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("KS needs two non-empty samples".into()));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("KS sample contains NaN".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable_by(f64::total_cmp);
    b.sort_unstable_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let v = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] == v {
            i += 1;
        }
        while j < b.len() && b[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    // once one sample is exhausted the gap only shrinks
    Ok(d)
}

/// 95% critical value of the two-sample statistic.
pub fn ks_noise_floor(na: usize, nb: usize) -> f64 {
    KS_95 * sqrt((na + nb) as f64 / (na as f64 * nb as f64))
}

/// Mean and standard error of the mean.
pub fn mean_se(sample: &[f64]) -> (f64, f64) {
    let n = sample.len() as f64;
    if sample.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = sample.iter().sum::<f64>() / n;
    if sample.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = sample.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, sqrt(var / n))
}

/// Outcome of one statistical comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub test_name: String,
    pub statistic: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Population size of the discrete model, when there is one.
    pub n: Option<u64>,
    /// Monte Carlo sample size.
    #[serde(rename = "N")]
    pub samples: Option<u64>,
    pub seed: Option<u64>,
    pub sample_sizes: Vec<usize>,
    /// Monte Carlo part of the tolerance, if the tolerance was split.
    pub noise_floor: Option<f64>,
    /// Discretization part of the tolerance, if the tolerance was split.
    pub allowance: Option<f64>,
    pub mean_delta: Option<f64>,
    pub mean_delta_se: Option<f64>,
    pub details: BTreeMap<String, f64>,
}

impl ComparisonReport {
    /// A report that passes iff `statistic <= tolerance`.
    pub fn upper_bound(test_name: impl Into<String>, statistic: f64, tolerance: f64) -> Self {
        ComparisonReport {
            test_name: test_name.into(),
            statistic,
            tolerance,
            pass: statistic <= tolerance,
            n: None,
            samples: None,
            seed: None,
            sample_sizes: Vec::new(),
            noise_floor: None,
            allowance: None,
            mean_delta: None,
            mean_delta_se: None,
            details: BTreeMap::new(),
        }
    }

    /// A report that passes iff `statistic >= threshold`.
    pub fn lower_bound(test_name: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        let mut r = Self::upper_bound(test_name, statistic, threshold);
        r.pass = statistic >= threshold;
        r
    }

    /// Re-derives the verdict against `noise_floor + allowance`.
    pub fn with_allowance(mut self, allowance: f64) -> Self {
        let floor = self.noise_floor.unwrap_or(0.0);
        self.allowance = Some(allowance);
        self.tolerance = floor + allowance;
        self.pass = self.statistic <= self.tolerance;
        self
    }

    pub fn with_context(mut self, n: Option<u64>, samples: Option<u64>, seed: Option<u64>) -> Self {
        self.n = n;
        self.samples = samples;
        self.seed = seed;
        self
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.test_name = name.into();
        self
    }

    pub fn detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.into(), value);
        self
    }
}

/// Two-sample KS comparison with the 95% noise floor as tolerance, plus the
/// difference of means and its combined standard error.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<ComparisonReport> {
    let d = ks_statistic(a, b)?;
    let floor = ks_noise_floor(a.len(), b.len());
    let (ma, sa) = mean_se(a);
    let (mb, sb) = mean_se(b);
    let mut r = ComparisonReport::upper_bound("ks_two_sample", d, floor);
    r.sample_sizes = alloc::vec![a.len(), b.len()];
    r.noise_floor = Some(floor);
    r.mean_delta = Some(ma - mb);
    r.mean_delta_se = Some(sqrt(sa * sa + sb * sb));
    Ok(r)
}

/// Least-squares fit of `log(value)` against `log(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; NaN with only two points.
    pub stderr: f64,
}

pub fn fit_loglog_slope(pairs: &[(f64, f64)]) -> Result<SlopeFit> {
    if pairs.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "slope fit needs at least two points, got {}",
            pairs.len()
        )));
    }
    if let Some(&(n, v)) = pairs.iter().find(|&&(n, v)| !(v > 0.0) || !(n > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "log-log fit needs positive values, got ({n}, {v})"
        )));
    }
    let m = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|&(n, _)| log(n)).collect();
    let ys: Vec<f64> = pairs.iter().map(|&(_, v)| log(v)).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("slope fit needs distinct n values".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if pairs.len() > 2 {
        let ssr: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| {
                let e = y - intercept - slope * x;
                e * e
            })
            .sum();
        sqrt(ssr / (m - 2.0) / sxx)
    } else {
        f64::NAN
    };
    Ok(SlopeFit {
        slope,
        intercept,
        stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;

    #[test]
    fn aldous_cousin_example() {
        let s = Scaling::new(SeriesKind::Cousin, &CriticalWindow::aldous(0.0), 1_000_000);
        // n^{2/3} = 10^4
        assert_relative_eq!(s.time_of(10_000), 1.0, max_relative = 1e-12);
        assert_relative_eq!(s.time_of(1_000), 0.1, max_relative = 1e-12);
        assert_relative_eq!(100.0 * s.space, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn general_cumulative_example() {
        let w = CriticalWindow::general(0.0, 0.1).unwrap();
        let s = Scaling::new(SeriesKind::CumulativeCousin, &w, 1_000_000);
        assert_relative_eq!(s.time_of(100_000), 1.0, max_relative = 1e-12);
        assert_relative_eq!(1e7 * s.space, 0.01, max_relative = 1e-12);
    }

    #[test]
    fn unit_population_is_identity() {
        let values = [3.0, 1.0, 4.0];
        for window in [CriticalWindow::aldous(0.3), CriticalWindow::general(0.0, 1.0).unwrap()] {
            for kind in [SeriesKind::Profile, SeriesKind::Cousin, SeriesKind::CumulativeCousin] {
                let s = Scaling::new(kind, &window, 1);
                let p = rescale(&values, kind, &s).unwrap();
                assert_eq!(p.values, values);
                assert_eq!(p.t, vec![0.0, 1.0, 2.0]);
            }
        }
    }

    #[test]
    fn mismatched_series_is_rejected() {
        let s = Scaling::new(SeriesKind::Cousin, &CriticalWindow::aldous(0.0), 1000);
        assert!(matches!(
            rescale(&[1.0], SeriesKind::Profile, &s),
            Err(Error::SeriesMismatch { .. })
        ));
    }

    #[test]
    fn ks_examples() {
        assert_eq!(ks_statistic(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(ks_statistic(&[0.0], &[1.0]).unwrap(), 1.0);
        assert_relative_eq!(ks_statistic(&[1.0, 2.0, 3.0], &[1.5, 2.5]).unwrap(), 1.0 / 3.0, max_relative = 1e-15);
        assert!(ks_statistic(&[], &[1.0]).is_err());
    }

    #[test]
    fn ks_handles_ties_across_samples() {
        // atoms at zero in both samples; the gap opens only at 1
        assert_relative_eq!(ks_statistic(&[0.0, 0.0, 1.0, 2.0], &[0.0, 1.0]).unwrap(), 0.25);
        assert_relative_eq!(ks_statistic(&[0.0, 0.0, 1.0, 1.0], &[0.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn ks_report_carries_noise_floor() {
        let r = ks_two_sample(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert!(r.pass);
        assert_relative_eq!(r.tolerance, KS_95);
        let r = r.with_allowance(0.5);
        assert_relative_eq!(r.tolerance, KS_95 + 0.5);
    }

    #[test]
    fn sup_distance_examples() {
        let s = Scaling {
            kind: SeriesKind::Profile,
            regime: RegimeTag::Aldous,
            space: 1.0,
            index_rate: 2.0,
        };
        let step = rescale(&[0.0, 1.0], SeriesKind::Profile, &s).unwrap();
        assert_relative_eq!(sup_distance(&step, |t| t, (0.0, 1.0)), 0.5);
        let flat = rescale(&[1.0, 1.0, 1.0], SeriesKind::Profile, &s).unwrap();
        assert_eq!(sup_distance(&flat, |_| 0.0, (0.0, 1.0)), 1.0);
        assert_eq!(sup_distance(&step, |t| step.value_at(t), (0.0, 1.0)), 0.0);
    }

    #[test]
    fn slope_examples() {
        let pairs: Vec<(f64, f64)> = [1e3, 1e4, 1e5, 1e6].iter().map(|&n| (n, 7.0 * libm::pow(n, -1.0 / 3.0))).collect();
        assert!((fit_loglog_slope(&pairs).unwrap().slope + 1.0 / 3.0).abs() < 1e-12);
        let flat = [(10.0, 2.0), (100.0, 2.0), (1000.0, 2.0)];
        assert!(fit_loglog_slope(&flat).unwrap().slope.abs() < 1e-15);
        let two = fit_loglog_slope(&[(10.0, 1.0), (100.0, 0.1)]).unwrap();
        assert_relative_eq!(two.slope, -1.0, max_relative = 1e-12);
        assert!(two.stderr.is_nan());
        assert!(fit_loglog_slope(&[(10.0, 0.0), (100.0, 1.0), (1000.0, 1.0)]).is_err());
    }

    #[test]
    fn value_at_is_right_continuous() {
        let s = Scaling::new(SeriesKind::Profile, &CriticalWindow::aldous(0.0), 1);
        let p = rescale(&[5.0, 6.0, 7.0], SeriesKind::Profile, &s).unwrap();
        assert_eq!(p.value_at(0.0), 5.0);
        assert_eq!(p.value_at(0.999), 5.0);
        assert_eq!(p.value_at(1.0), 6.0);
        assert_eq!(p.value_at(10.0), 7.0);
    }
}
