//! Pilot-calibrated thresholds.
//!
//! KS allowances are added to the Monte Carlo null quantile at the exact
//! sample size and cover the finite-`(n, d)` distance between the simulated
//! law and its limit. Each value was measured on seeds 1001 to 1008, disjoint
//! from the acceptance seed, as `max(0.010, ceil_0.005(worst KS - null + 0.005))`.
//! The Model 3 small-`n` allowance is large because `T_n - n` lives on a
//! lattice with step `0.2` standard deviations there, so KS against a
//! continuous law sits near half a lattice jump.
//!
//! Ladder bounds are `1.25` times the worst pilot median, rounded up to `0.005`.

use super::config::{ExperimentKind, Regime};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// Added to the null quantile.
    Allowance(f64),
    /// Used as is.
    Absolute(f64),
}

pub struct KsFixture {
    pub experiment: ExperimentKind,
    pub regime: Option<Regime>,
    pub law: &'static str,
    pub n: usize,
    pub d: usize,
    pub threshold: Threshold,
}

use ExperimentKind as E;

pub const KS_FIXTURES: &[KsFixture] = &[
    KsFixture {
        experiment: E::CltModel1,
        regime: None,
        law: "rademacher",
        n: 500,
        d: 500,
        threshold: Threshold::Allowance(0.010),
    },
    KsFixture {
        experiment: E::CltModel2,
        regime: Some(Regime::A),
        law: "twopoint:0.5",
        n: 100,
        d: 10_000,
        threshold: Threshold::Allowance(0.010),
    },
    KsFixture {
        experiment: E::CltModel2,
        regime: Some(Regime::B),
        law: "twopoint:0.5",
        n: 10_000,
        d: 100,
        threshold: Threshold::Allowance(0.015),
    },
    KsFixture {
        experiment: E::CltModel2,
        regime: Some(Regime::C),
        law: "twopoint:0.5",
        n: 2000,
        d: 2000,
        threshold: Threshold::Allowance(0.010),
    },
    KsFixture {
        experiment: E::CltModel3,
        regime: Some(Regime::A),
        law: "twopoint:0.5",
        n: 100,
        d: 10_000,
        threshold: Threshold::Allowance(0.030),
    },
    KsFixture {
        experiment: E::CltModel3,
        regime: Some(Regime::B),
        law: "twopoint:0.5",
        n: 10_000,
        d: 100,
        threshold: Threshold::Allowance(0.020),
    },
    KsFixture {
        experiment: E::CltModel3,
        regime: Some(Regime::C),
        law: "twopoint:0.5",
        n: 2000,
        d: 2000,
        threshold: Threshold::Allowance(0.010),
    },
    KsFixture {
        experiment: E::PoissonSimpleRw,
        regime: Some(Regime::C),
        law: "sign",
        n: 10_000,
        d: 100,
        threshold: Threshold::Allowance(0.010),
    },
    KsFixture {
        experiment: E::StableModel1,
        regime: Some(Regime::B),
        law: "pareto:1.5",
        n: 20,
        d: 40_000,
        threshold: Threshold::Absolute(0.05),
    },
    KsFixture {
        experiment: E::StableModel2,
        regime: Some(Regime::B),
        law: "pareto:1.5",
        n: 200,
        d: 100,
        threshold: Threshold::Absolute(0.05),
    },
    KsFixture {
        experiment: E::StableModel3,
        regime: Some(Regime::B),
        law: "pareto:1.5",
        n: 200,
        d: 100,
        threshold: Threshold::Absolute(0.05),
    },
    KsFixture {
        experiment: E::StableModel2,
        regime: Some(Regime::A),
        law: "pareto:1.5",
        n: 10_000,
        d: 100,
        threshold: Threshold::Allowance(0.050),
    },
];

pub fn ks_fixture(experiment: ExperimentKind, regime: Option<Regime>, law: &str, n: usize, d: usize) -> Option<Threshold> {
    KS_FIXTURES
        .iter()
        .find(|f| f.experiment == experiment && f.regime == regime && f.law == law && f.n == n && f.d == d)
        .map(|f| f.threshold)
}

/// Median bound at one ladder rung.
pub struct LadderFixture {
    pub experiment: ExperimentKind,
    pub model: &'static str,
    pub law: &'static str,
    pub n: usize,
    pub d: usize,
    pub median_bound: f64,
}

pub const LADDER_FIXTURES: &[LadderFixture] = &[
    LadderFixture {
        experiment: E::Fwlln,
        model: "iid",
        law: "rademacher",
        n: 4096,
        d: 4096,
        median_bound: 0.035,
    },
    LadderFixture {
        experiment: E::Fwlln,
        model: "rotinv",
        law: "twopoint:0.5",
        n: 4096,
        d: 4096,
        median_bound: 0.035,
    },
    LadderFixture {
        experiment: E::DistortionLadder,
        model: "iid",
        law: "rademacher",
        n: 4096,
        d: 4096,
        median_bound: 0.050,
    },
    LadderFixture {
        experiment: E::DistortionLadder,
        model: "rotinv",
        law: "twopoint:0.5",
        n: 4096,
        d: 4096,
        median_bound: 0.055,
    },
];

pub fn ladder_fixture(experiment: ExperimentKind, model: &str, law: &str, n: usize, d: usize) -> Option<f64> {
    LADDER_FIXTURES
        .iter()
        .find(|f| f.experiment == experiment && f.model == model && f.law == law && f.n == n && f.d == d)
        .map(|f| f.median_bound)
}

/// `K * max |(|w_t - w_s|^2) - |t - s||` stays below this on every grid tried.
pub const SPIRAL_TRUNCATION_CONSTANT: f64 = 0.6;
pub const SPIRAL_TRUNCATION_TERMS: [usize; 3] = [100, 1000, 10_000];

/// Total variation bound for the Poisson-difference regime.
pub const TV_THRESHOLD: f64 = 0.02;
/// Allowed fraction of replicates with `|S_n|^2 != n` below `sqrt(d)`.
pub const COLLISION_FRACTION: f64 = 0.001;
/// `max_i |X_i| / sqrt(n)` at the top rung.
pub const STEP_BOUND: f64 = 0.05;
/// Alignment of an exact isometric copy, relative to the diameter.
pub const ISOMETRY_RATIO: f64 = 1e-6;
/// Relative band for the off-diagonal variance identity.
pub const VARIANCE_RELATIVE: f64 = 0.05;
