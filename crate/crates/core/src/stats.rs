//! Monte Carlo bookkeeping: estimates, streaming moments, block jackknife
//! and empirical distribution helpers.

use serde::{Deserialize, Serialize};

/// A Monte Carlo estimate with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub method: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n: Option<usize>,
}

impl Estimate {
    pub fn new(method: impl Into<String>, value: f64, stderr: f64, n_samples: u64, seed: u64) -> Self {
        Estimate { value, stderr, n_samples, method: method.into(), seed, n: None }
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    /// Multiplies value and standard error by a deterministic factor.
    pub fn scaled(mut self, factor: f64) -> Self {
        self.value *= factor;
        self.stderr *= factor.abs();
        self
    }

    /// `|a - b| / sqrt(se_a^2 + se_b^2)`; infinite when both errors vanish
    /// and the values differ.
    pub fn z_score(&self, other: &Estimate) -> f64 {
        let diff = (self.value - other.value).abs();
        let se = self.stderr.hypot(other.stderr);
        if diff == 0.0 {
            0.0
        } else if se == 0.0 {
            f64::INFINITY
        } else {
            diff / se
        }
    }

    pub fn agrees_with(&self, other: &Estimate, sigmas: f64) -> bool {
        self.z_score(other) <= sigmas
    }
}

/// Streaming mean and variance with an exact pairwise merge.
#[derive(Debug, Default, Clone, Copy, PartialEq)]
pub struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero for fewer than two observations.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::default();
        iter.into_iter().for_each(|x| m.push(x));
        m
    }
}

/// Merges per-block moments in block order.
pub fn merge_moments<'a, I: IntoIterator<Item = &'a Moments>>(blocks: I) -> Moments {
    let mut total = Moments::default();
    for b in blocks {
        total.merge(b);
    }
    total
}

/// Delete-one-block jackknife of a smooth statistic of summed block
/// statistics. Each block contributes a vector of sums; `stat` maps the
/// total vector to the estimate. Returns `(stat(total), stderr)`.
pub fn jackknife<F>(blocks: &[Vec<f64>], stat: F) -> (f64, f64)
where
    F: Fn(&[f64]) -> f64,
{
    assert!(!blocks.is_empty(), "jackknife needs at least one block");
    let dim = blocks[0].len();
    let mut total = vec![0.0; dim];
    for b in blocks {
        for (t, v) in total.iter_mut().zip(b) {
            *t += v;
        }
    }
    let value = stat(&total);
    let g = blocks.len();
    if g < 2 {
        return (value, 0.0);
    }
    let mut leave_out = vec![0.0; dim];
    let replicates: Vec<f64> = blocks
        .iter()
        .map(|b| {
            for ((l, t), v) in leave_out.iter_mut().zip(&total).zip(b) {
                *l = t - v;
            }
            stat(&leave_out)
        })
        .collect();
    let mean = replicates.iter().sum::<f64>() / g as f64;
    let ss: f64 = replicates.iter().map(|r| (r - mean).powi(2)).sum();
    (value, ((g - 1) as f64 / g as f64 * ss).sqrt())
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Empirical CDF of a weighted sample.
#[derive(Debug, Clone, Serialize)]
pub struct WeightedEcdf {
    points: Vec<(f64, f64)>,
}

impl WeightedEcdf {
    pub fn new(values: &[f64], weights: &[f64]) -> Self {
        assert_eq!(values.len(), weights.len());
        let mut pairs: Vec<(f64, f64)> = values.iter().copied().zip(weights.iter().copied()).collect();
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let mut acc = 0.0;
        let points = pairs
            .into_iter()
            .map(|(v, w)| {
                acc += w;
                (v, acc / total)
            })
            .collect();
        WeightedEcdf { points }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let idx = self.points.partition_point(|p| p.0 <= x);
        if idx == 0 {
            0.0
        } else {
            self.points[idx - 1].1
        }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }
}

/// Kish effective sample size `(Σw)^2 / Σw^2`.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    if s2 == 0.0 {
        0.0
    } else {
        s * s / s2
    }
}
