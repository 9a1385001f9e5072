//! Reference limit laws and comparison statistics.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Mutex, OnceLock};

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::sampling::{derive_stream, sample_stable, SeedSpec, StableLawRef};

/// Confidence level for every verdict.
pub const CONFIDENCE: f64 = 0.999;

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LimitLaw {
    Normal { variance: f64 },
    Stable(StableLawRef),
    /// `3 P' - P''` with `P', P''` independent Poisson with mean `c^2 / 4`.
    PoissonDiff { c: f64 },
}

impl LimitLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LimitLaw::Normal { variance } if !(variance > 0.0 && variance.is_finite()) => {
                Err(Error::param(format!("normal variance must be positive, got {variance}")))
            }
            LimitLaw::Stable(s) => StableLawRef::new(s.alpha, s.scale).map(|_| ()),
            LimitLaw::PoissonDiff { c } if !(c > 0.0 && c.is_finite()) => {
                Err(Error::param(format!("poisson parameter c must be positive, got {c}")))
            }
            _ => Ok(()),
        }
    }

    /// Closed-form CDF where one is available.
    pub fn cdf(&self, x: f64) -> Option<f64> {
        match *self {
            LimitLaw::Normal { variance } => Some(normal_cdf(x / variance.sqrt())),
            _ => None,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        self.validate()?;
        Ok(match *self {
            LimitLaw::Normal { variance } => variance.sqrt() * rng.sample::<f64, _>(StandardNormal),
            LimitLaw::Stable(s) => sample_stable(&s, rng),
            LimitLaw::PoissonDiff { c } => {
                let p = Poisson::new(c * c / 4.0).map_err(|e| Error::param(e.to_string()))?;
                3.0 * p.sample(rng) - p.sample(rng)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestVerdict {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    pub sample_size: usize,
}

impl TestVerdict {
    pub fn new(name: impl Into<String>, statistic: f64, threshold: f64, sample_size: usize) -> Self {
        Self {
            name: name.into(),
            statistic,
            threshold,
            pass: statistic <= threshold,
            sample_size,
        }
    }
}

fn check_sorted(xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if xs.iter().any(|x| x.is_nan()) || xs.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Contract("sample must be sorted ascending".into()));
    }
    Ok(())
}

pub fn sorted(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    xs
}

/// One-sample Kolmogorov-Smirnov distance against `cdf`.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    check_sorted(sample)?;
    let n = sample.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sample.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

/// `sup |F_a - F_b|` by a linear merge.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    check_sorted(a)?;
    check_sorted(b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Pmf of `3 P' - P''` on `lo..lo + probs.len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonDiffPmf {
    pub c: f64,
    pub lo: i64,
    pub probs: Vec<f64>,
}

impl PoissonDiffPmf {
    pub fn pmf(&self, k: i64) -> f64 {
        let idx = k - self.lo;
        if idx < 0 {
            return 0.0;
        }
        self.probs.get(idx as usize).copied().unwrap_or(0.0)
    }

    pub fn support(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.probs.iter().enumerate().map(|(i, &p)| (self.lo + i as i64, p))
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.support().map(|(k, p)| k as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.support().map(|(k, p)| (k as f64 - m).powi(2) * p).sum()
    }
}

fn poisson_pmf(lambda: f64, j: u64) -> f64 {
    let jf = j as f64;
    (jf * lambda.ln() - lambda - ln_gamma(jf + 1.0)).exp()
}

/// Smallest `J` with `P(Poisson(lambda) > J) < tol`.
fn poisson_cutoff(lambda: f64, tol: f64) -> u64 {
    let mut cdf = 0.0;
    let mut j = 0;
    loop {
        cdf += poisson_pmf(lambda, j);
        if 1.0 - cdf < tol || j > 10_000 {
            return j;
        }
        j += 1;
    }
}

/// Exact pmf of `3 P' - P''` with both Poisson tails cut below `1e-12` in total.
pub fn poisson_diff_pmf(c: f64) -> Result<PoissonDiffPmf> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::param(format!("c must be positive, got {c}")));
    }
    let lambda = c * c / 4.0;
    // Cutoff well inside the 1e-12 budget so that moments are accurate too.
    let bound = poisson_cutoff(lambda, 1e-16).max(1);
    poisson_diff_pmf_bounded(c, bound as usize)
}

/// Pmf on `{-B, ..., 3B}` from Poisson values truncated at `B`.
pub fn poisson_diff_pmf_bounded(c: f64, support_bound: usize) -> Result<PoissonDiffPmf> {
    weighted_difference(c, 3, 1, support_bound)
}

/// Law of `2P' - 2P''`, `P', P''` independent Poisson(c^2/4): the exact
/// bookkeeping of a doubly occupied box (`+2` or `-2` against its two unit
/// steps). Reported beside the 3P' - P'' comparison.
pub fn even_poisson_diff_pmf(c: f64) -> Result<PoissonDiffPmf> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::param(format!("c must be positive, got {c}")));
    }
    let bound = poisson_cutoff(c * c / 4.0, 1e-16).max(1);
    weighted_difference(c, 2, 2, bound as usize)
}

fn weighted_difference(c: f64, a: i64, b: i64, support_bound: usize) -> Result<PoissonDiffPmf> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::param(format!("c must be positive, got {c}")));
    }
    let lambda = c * c / 4.0;
    let bb = support_bound as i64;
    let w: Vec<f64> = (0..=support_bound as u64).map(|j| poisson_pmf(lambda, j)).collect();
    let mut probs = vec![0.0; ((a + b) * bb + 1) as usize];
    for (j1, &p1) in w.iter().enumerate() {
        for (j2, &p2) in w.iter().enumerate() {
            let k = a * j1 as i64 - b * j2 as i64;
            probs[(k + b * bb) as usize] += p1 * p2;
        }
    }
    Ok(PoissonDiffPmf { c, lo: -b * bb, probs })
}

/// `(1/2) sum |p_hat(k) - p(k)|` between integer-valued data and a pmf.
pub fn total_variation(sample: &[i64], pmf: &PoissonDiffPmf) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut counts: BTreeMap<i64, u64> = BTreeMap::new();
    for &k in sample {
        *counts.entry(k).or_default() += 1;
    }
    let n = sample.len() as f64;
    let mut tv = 0.0;
    for (k, p) in pmf.support() {
        let e = counts.remove(&k).unwrap_or(0) as f64 / n;
        tv += (e - p).abs();
    }
    tv += counts.values().map(|&c| c as f64 / n).sum::<f64>();
    Ok(0.5 * tv)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    /// Excess kurtosis.
    pub kurtosis: f64,
    pub se_mean: f64,
    pub se_variance: f64,
}

pub fn moment_summary(sample: &[f64]) -> Result<MomentSummary> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let nf = n as f64;
    let mean = sample.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in sample {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
    let variance = m2 * nf / (nf - 1.0);
    let (skewness, kurtosis) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };
    let var_of_var = (m4 - (nf - 3.0) / (nf - 1.0) * variance * variance) / nf;
    Ok(MomentSummary {
        count: n,
        mean,
        variance,
        skewness,
        kurtosis,
        se_mean: (variance / nf).sqrt(),
        se_variance: var_of_var.max(0.0).sqrt(),
    })
}

/// Sample variance of `Q_n` against `2 n (n - 1) / d`, within 5 standard errors.
pub fn variance_identity_check(q_samples: &[f64], n: usize, d: usize) -> Result<TestVerdict> {
    const MIN_SAMPLES: usize = 1000;
    if q_samples.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_SAMPLES,
            got: q_samples.len(),
        });
    }
    if d == 0 {
        return Err(Error::InvalidDimension(0));
    }
    let target = crate::walk::off_diagonal_variance(n, d);
    let s = moment_summary(q_samples)?;
    let statistic = (s.variance - target).abs();
    let threshold = if target == 0.0 { 0.0 } else { 5.0 * s.se_variance };
    Ok(TestVerdict::new("variance_identity", statistic, threshold, q_samples.len()))
}

/// Quantile by linear interpolation on a sorted sample.
pub fn quantile(sorted_sample: &[f64], p: f64) -> f64 {
    let n = sorted_sample.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted_sample[lo] + (h - lo as f64) * (sorted_sample[hi] - sorted_sample[lo])
}

pub fn median(values: &[f64]) -> f64 {
    quantile(&sorted(values.to_vec()), 0.5)
}

/// Seed reserved for null calibrations, disjoint from experiment streams by index.
const NULL_SEED: u64 = 0x6b73_6e75_6c6c;
pub const NULL_REPLICATES: usize = 4000;

type NullKey = (usize, usize, u64);

fn null_cache() -> &'static Mutex<HashMap<NullKey, f64>> {
    static CACHE: OnceLock<Mutex<HashMap<NullKey, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn uniform_sample(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    sorted((0..n).map(|_| rng.random::<f64>()).collect())
}

/// Monte Carlo quantile of the one-sample KS statistic under a continuous null.
/// With `m > 0` it is the two-sample statistic for sizes `n` and `m`.
pub fn ks_null_quantile(n: usize, m: usize, level: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let key = (n, m, level.to_bits());
    if let Some(&q) = null_cache().lock().expect("cache poisoned").get(&key) {
        return Ok(q);
    }
    let mut rng = derive_stream(SeedSpec::new(NULL_SEED, (n as u64) << 32 | m as u64));
    let mut stats = Vec::with_capacity(NULL_REPLICATES);
    for _ in 0..NULL_REPLICATES {
        let a = uniform_sample(n, &mut rng);
        let d = if m == 0 {
            ks_one_sample(&a, |x| x)?
        } else {
            ks_two_sample(&a, &uniform_sample(m, &mut rng))?
        };
        stats.push(d);
    }
    let q = quantile(&sorted(stats), level);
    null_cache().lock().expect("cache poisoned").insert(key, q);
    Ok(q)
}

/// Sorted reference draws from a limit law.
pub fn reference_sample(law: &LimitLaw, size: usize, seed: u64) -> Result<Vec<f64>> {
    law.validate()?;
    let mut rng = derive_stream(SeedSpec::new(seed, u64::MAX));
    let xs = (0..size).map(|_| law.sample(&mut rng)).collect::<Result<Vec<_>>>()?;
    Ok(sorted(xs))
}
