//! Reproducible random sources.
//!
//! Every replicate owns a [`Stream`] derived from `(master_seed, replicate_index)`
//! alone, so results do not depend on which worker ran which replicate or in
//! what order.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::VectorD;

/// Random stream handed to every sampler.
pub type Stream = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub replicate_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, replicate_index: u64) -> Self {
        Self {
            master_seed,
            replicate_index,
        }
    }
}

/// The ChaCha key comes from the master seed and the replicate selects one of
/// the 2^64 independent stream counters.
pub fn derive_stream(spec: SeedSpec) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.master_seed);
    rng.set_stream(spec.replicate_index);
    rng
}

/// Law of the radial factor `R`. All variants have `E R^2 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadialLaw {
    Constant,
    /// `R^2` uniform on `{1 - a, 1 + a}`, `0 < a <= 1`.
    TwoPoint { a: f64 },
    /// `R` uniform on `{-1, +1}`.
    SymmetricSign,
    /// `R^2 = x_m U^(-1/alpha)` with `x_m = (alpha - 1)/alpha`, `1 < alpha < 2`.
    ParetoSquared { alpha: f64 },
}

impl RadialLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RadialLaw::TwoPoint { a } if !(a > 0.0 && a <= 1.0) => {
                Err(Error::param(format!("two-point parameter a = {a} must lie in (0, 1]")))
            }
            RadialLaw::ParetoSquared { alpha } => check_pareto_alpha(alpha),
            _ => Ok(()),
        }
    }

    /// `Var(R^2)`, infinite for the Pareto law.
    pub fn variance_of_square(&self) -> f64 {
        match *self {
            RadialLaw::Constant | RadialLaw::SymmetricSign => 0.0,
            RadialLaw::TwoPoint { a } => a * a,
            RadialLaw::ParetoSquared { .. } => f64::INFINITY,
        }
    }

    pub fn is_deterministic_square(&self) -> bool {
        matches!(self, RadialLaw::Constant | RadialLaw::SymmetricSign)
    }

    pub fn stable_alpha(&self) -> Option<f64> {
        match *self {
            RadialLaw::ParetoSquared { alpha } => Some(alpha),
            _ => None,
        }
    }
}

pub(crate) fn check_pareto_alpha(alpha: f64) -> Result<()> {
    if alpha > 1.0 && alpha < 2.0 {
        Ok(())
    } else {
        Err(Error::param(format!("Pareto tail index alpha = {alpha} must lie in (1, 2)")))
    }
}

/// Pareto scale giving `E W = 1`.
pub fn pareto_scale(alpha: f64) -> f64 {
    (alpha - 1.0) / alpha
}

/// One draw of `W = x_m U^(-1/alpha)`.
#[inline]
pub fn sample_pareto_squared<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u = 1.0 - rng.random::<f64>();
    pareto_scale(alpha) * u.powf(-1.0 / alpha)
}

#[inline]
pub(crate) fn random_sign<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

pub fn sample_radial<R: Rng + ?Sized>(law: &RadialLaw, rng: &mut R) -> Result<f64> {
    law.validate()?;
    Ok(draw_radial(law, rng))
}

#[inline]
pub(crate) fn draw_radial<R: Rng + ?Sized>(law: &RadialLaw, rng: &mut R) -> f64 {
    match *law {
        RadialLaw::Constant => 1.0,
        RadialLaw::TwoPoint { a } => {
            if rng.random::<bool>() {
                (1.0 + a).sqrt()
            } else {
                (1.0 - a).sqrt()
            }
        }
        RadialLaw::SymmetricSign => random_sign(rng),
        RadialLaw::ParetoSquared { alpha } => sample_pareto_squared(alpha, rng).sqrt(),
    }
}

/// Uniform direction on the unit sphere by normalizing a Gaussian vector.
pub fn sample_unit_sphere<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<VectorD> {
    if d == 0 {
        return Err(Error::InvalidDimension(0));
    }
    let mut buf = vec![0.0; d];
    fill_unit_sphere(&mut buf, rng);
    VectorD::new(buf)
}

/// In-place variant of [`sample_unit_sphere`]; `buf` must be nonempty.
pub fn fill_unit_sphere<R: Rng + ?Sized>(buf: &mut [f64], rng: &mut R) {
    loop {
        let mut sq = 0.0;
        for x in buf.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *x = z;
            sq += z * z;
        }
        if sq > 0.0 {
            let inv = 1.0 / sq.sqrt();
            buf.iter_mut().for_each(|x| *x *= inv);
            return;
        }
    }
}

/// Zero-mean, totally right-skewed stable law `S_alpha(scale, 1, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableLawRef {
    pub alpha: f64,
    pub scale: f64,
}

impl StableLawRef {
    pub fn new(alpha: f64, scale: f64) -> Result<Self> {
        if !(alpha > 1.0 && alpha <= 2.0) {
            return Err(Error::param(format!(
                "stable index alpha = {alpha} unsupported: zero-mean centering needs 1 < alpha <= 2"
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::param(format!("stable scale {scale} must be positive and finite")));
        }
        Ok(Self { alpha, scale })
    }

    /// The limit law of `(W_1 + ... + W_m - m) / m^(1/alpha)` for Pareto `W`.
    pub fn pareto_limit(alpha: f64) -> Result<Self> {
        Self::new(alpha, stable_scale_for_pareto(alpha)?)
    }
}

/// Chambers-Mallows-Stuck draw with skewness +1.
pub fn sample_stable<R: Rng + ?Sized>(law: &StableLawRef, rng: &mut R) -> f64 {
    let a = law.alpha;
    let v = PI * rng.random::<f64>() - FRAC_PI_2;
    let w: f64 = rng.sample(Exp1);
    let tan = (FRAC_PI_2 * a).tan();
    let b = tan.atan() / a;
    let s = (1.0 + tan * tan).powf(1.0 / (2.0 * a));
    let x = s * (a * (v + b)).sin() / v.cos().powf(1.0 / a)
        * ((v - a * (v + b)).cos() / w).powf((1.0 - a) / a);
    law.scale * x
}

/// Scale of the stable limit of centered Pareto sums.
///
/// With tail `P(W > x) = C x^(-alpha)`, `C = x_m^alpha`, the normalized sum
/// converges to `S_alpha(sigma, 1, 0)` where
/// `sigma^alpha = C * Gamma(2 - alpha) * |cos(pi alpha / 2)| / (alpha - 1)`.
pub fn stable_scale_for_pareto(alpha: f64) -> Result<f64> {
    check_pareto_alpha(alpha)?;
    let tail = pareto_scale(alpha).powf(alpha);
    let g = statrs::function::gamma::gamma(2.0 - alpha);
    let sigma_alpha = tail * g * (FRAC_PI_2 * alpha).cos().abs() / (alpha - 1.0);
    Ok(sigma_alpha.powf(1.0 / alpha))
}
