//! Increment generators for the three walk models and an empirical checker
//! for the centering, decorrelation, uniform integrability and negligibility
//! conditions on a single increment.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::sampling::{
    check_pareto_alpha, pareto_scale, draw_radial, fill_unit_sphere, random_sign, sample_pareto_squared,
    RadialLaw, Stream,
};

/// Law of one component `xi` in the i.i.d.-components model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ComponentLaw {
    Rademacher,
    StandardGaussian,
    /// `xi = s * sqrt(W)` with a uniform sign `s` and `W` Pareto-squared.
    SymmetricParetoSquared { alpha: f64 },
}

impl ComponentLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ComponentLaw::SymmetricParetoSquared { alpha } => check_pareto_alpha(alpha),
            _ => Ok(()),
        }
    }

    #[inline]
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ComponentLaw::Rademacher => random_sign(rng),
            ComponentLaw::StandardGaussian => rng.sample(StandardNormal),
            ComponentLaw::SymmetricParetoSquared { alpha } => {
                random_sign(rng) * sample_pareto_squared(alpha, rng).sqrt()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    /// `X = (xi_1, ..., xi_d) / sqrt(d)`.
    IidComponents { law: ComponentLaw },
    /// `X = R U` with `U` uniform on the sphere.
    RotInvariant { radial: RadialLaw },
    /// `X = R e_J` with `J` uniform. The magnitude `|R|` follows `radial` and
    /// carries an independent uniform sign, so `E R = 0` for every radial law.
    AxisJumps { radial: RadialLaw },
}

impl ModelSpec {
    pub fn validate(&self, d: usize) -> Result<()> {
        if d == 0 {
            return Err(Error::InvalidDimension(0));
        }
        match self {
            ModelSpec::IidComponents { law } => law.validate(),
            ModelSpec::RotInvariant { radial } | ModelSpec::AxisJumps { radial } => {
                radial.validate()
            }
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, ModelSpec::AxisJumps { .. })
    }

    /// Tail index when the squared increment norm is in a stable domain.
    pub fn stable_alpha(&self) -> Option<f64> {
        match self {
            ModelSpec::IidComponents {
                law: ComponentLaw::SymmetricParetoSquared { alpha },
            } => Some(*alpha),
            ModelSpec::RotInvariant { radial } | ModelSpec::AxisJumps { radial } => {
                radial.stable_alpha()
            }
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::IidComponents { .. } => "iid",
            ModelSpec::RotInvariant { .. } => "rotinv",
            ModelSpec::AxisJumps { .. } => "axis",
        }
    }
}

/// One increment, dense for the first two models and sparse for axis jumps.
#[derive(Debug, Clone, PartialEq)]
pub enum Increment {
    Dense(Vec<f64>),
    Sparse { axis: usize, value: f64 },
}

impl Increment {
    pub fn dot_with(&self, v: &[f64]) -> f64 {
        match self {
            Increment::Dense(x) => dot(x, v),
            Increment::Sparse { axis, value } => value * v[*axis],
        }
    }

    pub fn norm_sq(&self) -> f64 {
        match self {
            Increment::Dense(x) => dot(x, x),
            Increment::Sparse { value, .. } => value * value,
        }
    }

    pub fn to_dense(&self, d: usize) -> Vec<f64> {
        match self {
            Increment::Dense(x) => x.clone(),
            Increment::Sparse { axis, value } => {
                let mut v = vec![0.0; d];
                v[*axis] = *value;
                v
            }
        }
    }
}

pub fn sample_increment(model: &ModelSpec, d: usize, rng: &mut Stream) -> Result<Increment> {
    model.validate(d)?;
    Ok(match model {
        ModelSpec::AxisJumps { radial } => {
            let (axis, value) = draw_axis_jump(radial, d, rng);
            Increment::Sparse { axis, value }
        }
        _ => {
            let mut buf = vec![0.0; d];
            fill_dense(model, &mut buf, rng);
            Increment::Dense(buf)
        }
    })
}

#[inline]
pub(crate) fn draw_axis_jump<R: Rng + ?Sized>(radial: &RadialLaw, d: usize, rng: &mut R) -> (usize, f64) {
    let axis = rng.random_range(0..d);
    let value = match radial {
        RadialLaw::SymmetricSign => random_sign(rng),
        other => random_sign(rng) * draw_radial(other, rng).abs(),
    };
    (axis, value)
}

/// Writes a dense increment into `buf` (whose length is the dimension).
/// Panics on the sparse model.
pub(crate) fn fill_dense<R: Rng + ?Sized>(model: &ModelSpec, buf: &mut [f64], rng: &mut R) {
    let d = buf.len();
    match model {
        ModelSpec::IidComponents { law } => {
            let c = 1.0 / (d as f64).sqrt();
            match law {
                ComponentLaw::Rademacher => fill_signs(buf, c, rng),
                ComponentLaw::SymmetricParetoSquared { alpha } => fill_pareto_roots(buf, c, *alpha, rng),
                other => buf.iter_mut().for_each(|x| *x = c * other.draw(rng)),
            }
        }
        ModelSpec::RotInvariant { radial } => {
            fill_unit_sphere(buf, rng);
            let r = draw_radial(radial, rng);
            buf.iter_mut().for_each(|x| *x *= r);
        }
        ModelSpec::AxisJumps { .. } => unreachable!("axis jumps are sparse"),
    }
}

/// Fills `buf` with `+-c`, 64 signs per random word.
fn fill_signs<R: Rng + ?Sized>(buf: &mut [f64], c: f64, rng: &mut R) {
    let cb = c.to_bits();
    for chunk in buf.chunks_mut(64) {
        let bits: u64 = rng.random();
        for (k, x) in chunk.iter_mut().enumerate() {
            *x = f64::from_bits(cb | (((bits >> k) & 1) << 63));
        }
    }
}

/// Fills `buf` with `c * s * sqrt(W)`. One word per entry: the low bit is the
/// sign and the top 53 bits give `u` in `(0, 1]`, so `sqrt(W) = sqrt(x_m) u^(-1/(2 alpha))`.
fn fill_pareto_roots<R: Rng + ?Sized>(buf: &mut [f64], c: f64, alpha: f64, rng: &mut R) {
    let scale = c * pareto_scale(alpha).sqrt();
    let e = -0.5 / alpha;
    let unit = |bits: u64| ((bits >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
    let signed = |v: f64, bits: u64| f64::from_bits(v.to_bits() | ((bits & 1) << 63));
    if alpha == 1.5 {
        for x in buf.iter_mut() {
            let bits: u64 = rng.random();
            *x = signed(scale * inv_cbrt(unit(bits)), bits);
        }
    } else {
        for x in buf.iter_mut() {
            let bits: u64 = rng.random();
            *x = signed(scale * unit(bits).powf(e), bits);
        }
    }
}

/// `u^(-1/3)` for positive normal `u`, to within a few ulps: an exponent-bit
/// guess refined by four Newton steps. About twice as fast as `powf` here.
#[inline]
fn inv_cbrt(u: f64) -> f64 {
    let mut y = f64::from_bits(0x553e_f0ff_289d_d796_u64.wrapping_sub(u.to_bits() / 3));
    for _ in 0..4 {
        y = y * (4.0 - u * y * y * y) * (1.0 / 3.0);
    }
    y
}

/// Tail-mass levels for the uniform integrability spot check.
pub const UI_LEVELS: [f64; 2] = [10.0, 100.0];
/// Largest tail mass `E[|X|^2; |X|^2 > 100]` accepted as "small".
pub const UI_TAIL_BUDGET: f64 = 0.1;

/// Tail-mass budget at level `a`, scaled like an index-1.5 tail: `0.1 * sqrt(100 / a)`.
pub fn ui_budget(a: f64) -> f64 {
    UI_TAIL_BUDGET * (100.0 / a).sqrt()
}
/// Pass/fail bands for all conditions, in standard errors.
pub const CONDITION_Z: f64 = 5.0;
const MAX_PAIRS: usize = 100;
const ABS_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckItem {
    pub name: String,
    pub statistic: f64,
    pub reference: f64,
    pub standard_error: f64,
    /// Worst ratio of deviation to allowed band; `pass` iff `score <= 1`.
    pub score: f64,
    pub pass: bool,
}

impl CheckItem {
    fn settle(mut self) -> Self {
        self.pass = self.score <= 1.0;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub dim: usize,
    pub samples: usize,
    /// (a) largest absolute coordinate mean.
    pub centered: CheckItem,
    /// (a) `E |X|^2 = 1`.
    pub normalized: CheckItem,
    /// (b) largest absolute correlation over the sampled coordinate pairs.
    pub uncorrelated: CheckItem,
    /// (c) tail masses at [`UI_LEVELS`].
    pub uniformly_integrable: Vec<CheckItem>,
    /// (d) largest coordinate second moment against `1/d`.
    pub negligible: CheckItem,
}

impl ConditionReport {
    pub fn condition_a(&self) -> bool {
        self.centered.pass && self.normalized.pass
    }
    pub fn condition_b(&self) -> bool {
        self.uncorrelated.pass
    }
    pub fn condition_c(&self) -> bool {
        self.uniformly_integrable.iter().all(|c| c.pass)
    }
    pub fn condition_d(&self) -> bool {
        self.negligible.pass
    }
    pub fn all_pass(&self) -> bool {
        self.condition_a() && self.condition_b() && self.condition_c() && self.condition_d()
    }
}

pub fn check_conditions(
    model: &ModelSpec,
    d: usize,
    sample_count: usize,
    rng: &mut Stream,
) -> Result<ConditionReport> {
    model.validate(d)?;
    let model = *model;
    check_conditions_with(d, sample_count, rng, move |r, buf| match &model {
        ModelSpec::AxisJumps { radial } => {
            buf.iter_mut().for_each(|x| *x = 0.0);
            let (axis, value) = draw_axis_jump(radial, buf.len(), r);
            buf[axis] = value;
        }
        m => fill_dense(m, buf, r),
    })
}

/// Runs the condition diagnostics on an arbitrary dense generator.
pub fn check_conditions_with<F>(
    d: usize,
    sample_count: usize,
    rng: &mut Stream,
    mut generate: F,
) -> Result<ConditionReport>
where
    F: FnMut(&mut Stream, &mut [f64]),
{
    if d == 0 {
        return Err(Error::InvalidDimension(0));
    }
    if sample_count < 1000 {
        return Err(Error::InsufficientData {
            needed: 1000,
            got: sample_count,
        });
    }
    let pairs = choose_pairs(d, rng);
    let mut s1 = vec![0.0; d];
    let mut s2 = vec![0.0; d];
    let mut s4 = vec![0.0; d];
    let mut pxy = vec![0.0; pairs.len()];
    let (mut n1, mut n2) = (0.0, 0.0);
    let mut tail = [(0.0, 0.0); UI_LEVELS.len()];
    let mut buf = vec![0.0; d];
    for _ in 0..sample_count {
        generate(rng, &mut buf);
        let mut norm = 0.0;
        for k in 0..d {
            let x = buf[k];
            let x2 = x * x;
            s1[k] += x;
            s2[k] += x2;
            s4[k] += x2 * x2;
            norm += x2;
        }
        n1 += norm;
        n2 += norm * norm;
        for (level, acc) in UI_LEVELS.iter().zip(tail.iter_mut()) {
            if norm > *level {
                acc.0 += norm;
                acc.1 += norm * norm;
            }
        }
        for (p, &(j, k)) in pairs.iter().enumerate() {
            pxy[p] += buf[j] * buf[k];
        }
    }
    let n = sample_count as f64;
    let se_of = |sum: f64, sumsq: f64| {
        let m = sum / n;
        ((sumsq / n - m * m).max(0.0) / (n - 1.0)).sqrt()
    };
    let ratio = |stat: f64, reference: f64, se: f64| (stat - reference).abs() / (CONDITION_Z * se + ABS_FLOOR);

    // (a) centering, judged coordinate by coordinate.
    let mut centered = CheckItem {
        name: "centered".into(),
        statistic: 0.0,
        reference: 0.0,
        standard_error: 0.0,
        score: 0.0,
        pass: true,
    };
    for k in 0..d {
        let m = s1[k] / n;
        let se = se_of(s1[k], s2[k]);
        centered.score = centered.score.max(ratio(m, 0.0, se));
        if m.abs() >= centered.statistic {
            centered.statistic = m.abs();
            centered.standard_error = se;
        }
    }
    let norm_mean = n1 / n;
    let norm_se = se_of(n1, n2);
    let normalized = CheckItem {
        name: "normalized".into(),
        statistic: norm_mean,
        reference: 1.0,
        standard_error: norm_se,
        score: ratio(norm_mean, 1.0, norm_se),
        pass: true,
    }
    .settle();

    // (b) correlations on the sampled pairs.
    let corr_se = 1.0 / n.sqrt();
    let mut max_corr = 0.0f64;
    for (p, &(j, k)) in pairs.iter().enumerate() {
        let (mj, mk) = (s1[j] / n, s1[k] / n);
        let vj = s2[j] / n - mj * mj;
        let vk = s2[k] / n - mk * mk;
        let cov = pxy[p] / n - mj * mk;
        let r = if vj > 0.0 && vk > 0.0 {
            cov / (vj * vk).sqrt()
        } else {
            0.0
        };
        max_corr = max_corr.max(r.abs());
    }
    let uncorrelated = CheckItem {
        name: "uncorrelated".into(),
        statistic: max_corr,
        reference: 0.0,
        standard_error: corr_se,
        score: max_corr / (CONDITION_Z * corr_se),
        pass: true,
    }
    .settle();

    // (c) tail masses must be small and nonincreasing in the level.
    let mut uniformly_integrable = Vec::with_capacity(UI_LEVELS.len());
    let mut prev: Option<(f64, f64)> = None;
    for (level, &(sum, sumsq)) in UI_LEVELS.iter().zip(tail.iter()) {
        let mass = sum / n;
        let se = se_of(sum, sumsq);
        let mut score = mass / (ui_budget(*level) + CONDITION_Z * se);
        if let Some((pm, pse)) = prev {
            score = score.max(mass / (pm + CONDITION_Z * se.max(pse) + ABS_FLOOR));
        }
        prev = Some((mass, se));
        uniformly_integrable.push(CheckItem {
            name: format!("tail_mass_{level}"),
            statistic: mass,
            reference: 0.0,
            standard_error: se,
            score,
            pass: true,
        }
        .settle());
    }

    // (d) every coordinate carries second moment 1/d.
    let target = 1.0 / d as f64;
    let mut negligible = CheckItem {
        name: "negligible".into(),
        statistic: 0.0,
        reference: target,
        standard_error: 0.0,
        score: 0.0,
        pass: true,
    };
    for k in 0..d {
        let m2 = s2[k] / n;
        let se = se_of(s2[k], s4[k]);
        negligible.score = negligible.score.max(ratio(m2, target, se));
        if m2 >= negligible.statistic {
            negligible.statistic = m2;
            negligible.standard_error = se;
        }
    }

    let centered = centered.settle();
    let negligible = negligible.settle();
    Ok(ConditionReport {
        dim: d,
        samples: sample_count,
        centered,
        normalized,
        uncorrelated,
        uniformly_integrable,
        negligible,
    })
}

/// Neighbouring pairs `(k, k+1)` first, then random distinct pairs, at most
/// [`MAX_PAIRS`] in total.
fn choose_pairs(d: usize, rng: &mut Stream) -> Vec<(usize, usize)> {
    if d < 2 {
        return Vec::new();
    }
    let total = d * (d - 1) / 2;
    if total <= MAX_PAIRS {
        return (0..d).flat_map(|j| (j + 1..d).map(move |k| (j, k))).collect();
    }
    let mut pairs: Vec<(usize, usize)> = (0..(d - 1).min(MAX_PAIRS / 2)).map(|k| (k, k + 1)).collect();
    while pairs.len() < MAX_PAIRS {
        let j = rng.random_range(0..d);
        let k = rng.random_range(0..d);
        if j != k {
            let p = (j.min(k), j.max(k));
            if !pairs.contains(&p) {
                pairs.push(p);
            }
        }
    }
    pairs
}
