//! Regime table: which statistic and which limit law belong to each
//! `(experiment, regime)` pair, and how a config selects its regime.

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentKind, Regime};
use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::sampling::{stable_scale_for_pareto, RadialLaw, StableLawRef};
use crate::stats::LimitLaw;
use crate::walk::{off_diagonal_scale, DiagonalScale, WalkSummary};

/// How the per-replicate statistic is built from `|S_n|^2 - n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Statistic {
    /// Divided by `sqrt(2 n^2 / d)`.
    OffDiagonal,
    /// Divided by `sqrt(n)`.
    SqrtN,
    /// Divided by the stable normalizer of the diagonal sum.
    Stable { scale: DiagonalScale },
    /// `|S_n|^2 - n` itself.
    Excess,
}

impl Statistic {
    pub fn evaluate(&self, s: &WalkSummary) -> Result<f64> {
        let excess = s.norm_sq_final - s.n as f64;
        Ok(match self {
            Statistic::OffDiagonal => excess / off_diagonal_scale(s.n, s.d),
            Statistic::SqrtN => excess / (s.n as f64).sqrt(),
            Statistic::Stable { scale } => excess / scale.tau(s.n, s.d)?,
            Statistic::Excess => excess,
        })
    }
}

/// What the statistic is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    Law(LimitLaw),
    /// `P(|S_n|^2 = n) -> 1`.
    NoCollisions,
    /// `N + zeta / gamma`, reported without a verdict.
    NormalPlusStable { gamma: f64, stable: StableLawRef },
}

/// One row of the regime table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegimeEntry {
    pub part: &'static str,
    pub experiment: ExperimentKind,
    pub regime: Option<Regime>,
    pub statistic: &'static str,
    pub limit: &'static str,
}

const fn entry(
    part: &'static str,
    experiment: ExperimentKind,
    regime: Option<Regime>,
    statistic: &'static str,
    limit: &'static str,
) -> RegimeEntry {
    RegimeEntry {
        part,
        experiment,
        regime,
        statistic,
        limit,
    }
}

use ExperimentKind as E;
use Regime as R;

/// Every limit statement for the squared norm, one row each.
pub const REGIME_TABLE: [RegimeEntry; 17] = [
    entry("iid_fourth_moment", E::CltModel1, None, "off_diagonal", "N(0,1)"),
    entry("iid_stable_many_steps", E::StableModel1, Some(R::A), "off_diagonal", "N(0,1)"),
    entry("iid_stable_few_steps", E::StableModel1, Some(R::B), "stable_components", "zeta_alpha"),
    entry("rotinv_n_small_vs_d", E::CltModel2, Some(R::A), "sqrt_n", "N(0,Var R^2)"),
    entry("rotinv_n_large_vs_d", E::CltModel2, Some(R::B), "off_diagonal", "N(0,1)"),
    entry("rotinv_n_proportional_d", E::CltModel2, Some(R::C), "sqrt_n", "N(0,2 gamma + Var R^2)"),
    entry("rotinv_stable_many_steps", E::StableModel2, Some(R::A), "off_diagonal", "N(0,1)"),
    entry("rotinv_stable_few_steps", E::StableModel2, Some(R::B), "stable_radial", "zeta_alpha"),
    entry("rotinv_stable_critical", E::CriticalConjectureProbe, None, "off_diagonal", "N + zeta_alpha / gamma (conjectured)"),
    entry("axis_n_small_vs_d", E::CltModel3, Some(R::A), "sqrt_n", "N(0,Var R^2)"),
    entry("axis_n_large_vs_d", E::CltModel3, Some(R::B), "off_diagonal", "N(0,1)"),
    entry("axis_n_proportional_d", E::CltModel3, Some(R::C), "sqrt_n", "N(0,2 gamma + Var R^2)"),
    entry("axis_stable_many_steps", E::StableModel3, Some(R::A), "off_diagonal", "N(0,1)"),
    entry("axis_stable_few_steps", E::StableModel3, Some(R::B), "stable_radial", "zeta_alpha"),
    entry("simple_walk_below_sqrt_d", E::PoissonSimpleRw, Some(R::A), "excess", "P(excess = 0) -> 1"),
    entry("simple_walk_at_sqrt_d", E::PoissonSimpleRw, Some(R::B), "excess", "3P' - P''"),
    entry("simple_walk_above_sqrt_d", E::PoissonSimpleRw, Some(R::C), "off_diagonal", "N(0,1)"),
];

/// Ratio bands for `n/d` (models 2, 3) and `n/sqrt(d)` (simple walk).
pub const SMALL_RATIO: f64 = 0.1;
pub const LARGE_RATIO: f64 = 10.0;
/// Stable regimes need `n` this far from the threshold `d^e` on either side.
pub const STABLE_MARGIN: f64 = 2.0;
/// Relative slack allowed between a configured `gamma` or `c` and `n, d`.
pub const PARAM_SLACK: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub part: &'static str,
    pub regime: Option<Regime>,
    pub statistic: Statistic,
    pub target: Target,
}

fn lookup(experiment: ExperimentKind, regime: Option<Regime>) -> &'static RegimeEntry {
    REGIME_TABLE
        .iter()
        .find(|e| e.experiment == experiment && e.regime == regime)
        .expect("regime table covers every resolved pair")
}

fn plan(experiment: ExperimentKind, regime: Option<Regime>, statistic: Statistic, target: Target) -> Plan {
    Plan {
        part: lookup(experiment, regime).part,
        regime,
        statistic,
        target,
    }
}

fn normal(variance: f64) -> Target {
    Target::Law(LimitLaw::Normal { variance })
}

fn radial_of(model: &ModelSpec) -> Option<RadialLaw> {
    match model {
        ModelSpec::RotInvariant { radial } | ModelSpec::AxisJumps { radial } => Some(*radial),
        ModelSpec::IidComponents { .. } => None,
    }
}

fn check_forced(forced: Option<Regime>, auto: Regime, rule: &str) -> Result<Regime> {
    match forced {
        Some(r) if r != auto => Err(Error::config(format!("regime {r} requested but {rule} selects regime {auto}"))),
        _ => Ok(auto),
    }
}

fn check_slack(name: &str, configured: Option<f64>, actual: f64) -> Result<()> {
    if let Some(v) = configured {
        if ((actual - v) / v).abs() > PARAM_SLACK {
            return Err(Error::config(format!(
                "{name} = {v} is inconsistent with n and d, which give {actual:.6}"
            )));
        }
    }
    Ok(())
}

/// Stable threshold exponent `e` so that the regimes split at `n = d^e`.
pub fn stable_threshold(model: &ModelSpec, d: usize) -> Option<f64> {
    let alpha = model.stable_alpha()?;
    let e = match model {
        ModelSpec::IidComponents { .. } => (2.0 - alpha) / (2.0 * alpha - 2.0),
        _ => alpha / (2.0 * alpha - 2.0),
    };
    Some((d as f64).powf(e))
}

/// `gamma` with `sqrt(2 n^2 / d) = gamma n^(1/alpha) sigma(alpha)`.
pub fn critical_gamma(n: usize, d: usize, alpha: f64) -> Result<f64> {
    Ok(off_diagonal_scale(n, d) / ((n as f64).powf(1.0 / alpha) * stable_scale_for_pareto(alpha)?))
}

/// Step count that puts `(n, d)` on the critical curve for `gamma`.
pub fn critical_n(gamma: f64, d: usize, alpha: f64) -> Result<usize> {
    let sigma = stable_scale_for_pareto(alpha)?;
    let base = gamma * sigma * (d as f64 / 2.0).sqrt();
    Ok(base.powf(alpha / (alpha - 1.0)).round().max(2.0) as usize)
}

/// Resolves the regime and reference law of a walk-statistic experiment.
/// Returns `None` for experiments without a squared-norm limit.
pub fn resolve(cfg: &ExperimentConfig) -> Result<Option<Plan>> {
    let (n, d) = (cfg.n, cfg.d);
    let nf = n as f64;
    let df = d as f64;
    let need_n = || {
        if n < 2 {
            Err(Error::config(format!("{} needs n >= 2", cfg.experiment)))
        } else {
            Ok(())
        }
    };
    Ok(Some(match cfg.experiment {
        E::CltModel1 => {
            need_n()?;
            if cfg.alpha().is_some() {
                return Err(Error::config("clt_model1 needs a component law with finite fourth moment"));
            }
            plan(E::CltModel1, None, Statistic::OffDiagonal, normal(1.0))
        }
        E::CltModel2 | E::CltModel3 => {
            need_n()?;
            let radial = radial_of(&cfg.model).expect("model 2 or 3");
            if radial.stable_alpha().is_some() {
                return Err(Error::config(format!(
                    "{} needs a radial law with finite fourth moment; use the stable experiment",
                    cfg.experiment
                )));
            }
            let ratio = nf / df;
            let by_ratio = if ratio <= SMALL_RATIO {
                Regime::A
            } else if ratio >= LARGE_RATIO {
                Regime::B
            } else {
                Regime::C
            };
            let rule = format!("n/d = {ratio} with bands {SMALL_RATIO} and {LARGE_RATIO}");
            let deterministic = radial.is_deterministic_square();
            let regime = if cfg.experiment == E::CltModel2 && deterministic {
                // A deterministic radius always gives the off-diagonal limit.
                if matches!(cfg.regime, Some(Regime::A | Regime::C)) {
                    return Err(Error::config("a deterministic radius only has regime b in clt_model2"));
                }
                Regime::B
            } else {
                check_forced(cfg.regime, by_ratio, &rule)?
            };
            if cfg.experiment == E::CltModel3 && deterministic && regime == Regime::A {
                return Err(Error::config(
                    "clt_model3 regime a is degenerate for a deterministic radius; use poisson_simple_rw",
                ));
            }
            let var_r2 = radial.variance_of_square();
            match regime {
                Regime::A => plan(cfg.experiment, Some(regime), Statistic::SqrtN, normal(var_r2)),
                Regime::B => plan(cfg.experiment, Some(regime), Statistic::OffDiagonal, normal(1.0)),
                Regime::C => {
                    check_slack("gamma", cfg.gamma, ratio)?;
                    plan(cfg.experiment, Some(regime), Statistic::SqrtN, normal(2.0 * ratio + var_r2))
                }
            }
        }
        E::StableModel1 | E::StableModel2 | E::StableModel3 => {
            need_n()?;
            let alpha = cfg.alpha().ok_or_else(|| Error::config(format!("{} needs law pareto:alpha", cfg.experiment)))?;
            let threshold = stable_threshold(&cfg.model, d).expect("stable law");
            let auto = if nf >= STABLE_MARGIN * threshold {
                Regime::A
            } else if nf <= threshold / STABLE_MARGIN {
                Regime::B
            } else {
                return Err(Error::config(format!(
                    "n = {n} is within a factor {STABLE_MARGIN} of the threshold {threshold:.3}; \
                     no limit theorem covers the critical band"
                )));
            };
            let regime = check_forced(
                cfg.regime,
                auto,
                &format!("n = {n} against threshold {threshold:.3}"),
            )?;
            match regime {
                Regime::A => plan(cfg.experiment, Some(regime), Statistic::OffDiagonal, normal(1.0)),
                _ => {
                    let scale = if cfg.experiment == E::StableModel1 {
                        DiagonalScale::StableComponents { alpha }
                    } else {
                        DiagonalScale::StableRadial { alpha }
                    };
                    let stable = StableLawRef::new(alpha, 1.0)?;
                    plan(cfg.experiment, Some(regime), Statistic::Stable { scale }, Target::Law(LimitLaw::Stable(stable)))
                }
            }
        }
        E::PoissonSimpleRw => {
            let radial = radial_of(&cfg.model).expect("axis model");
            if !radial.is_deterministic_square() {
                return Err(Error::config("poisson_simple_rw needs law sign or constant"));
            }
            if n == 0 {
                return Err(Error::config("poisson_simple_rw needs n >= 1"));
            }
            let ratio = nf / df.sqrt();
            let auto = if cfg.c.is_some() {
                Regime::B
            } else if ratio <= SMALL_RATIO {
                Regime::A
            } else if ratio >= LARGE_RATIO {
                Regime::C
            } else {
                Regime::B
            };
            let regime = check_forced(
                cfg.regime,
                auto,
                &format!("n/sqrt(d) = {ratio} with bands {SMALL_RATIO} and {LARGE_RATIO}"),
            )?;
            match regime {
                Regime::A => plan(E::PoissonSimpleRw, Some(regime), Statistic::Excess, Target::NoCollisions),
                Regime::B => {
                    check_slack("c", cfg.c, ratio)?;
                    plan(
                        E::PoissonSimpleRw,
                        Some(regime),
                        Statistic::Excess,
                        Target::Law(LimitLaw::PoissonDiff { c: ratio }),
                    )
                }
                Regime::C => {
                    need_n()?;
                    plan(E::PoissonSimpleRw, Some(regime), Statistic::OffDiagonal, normal(1.0))
                }
            }
        }
        E::CriticalConjectureProbe => {
            need_n()?;
            let alpha = cfg
                .alpha()
                .ok_or_else(|| Error::config("critical_conjecture_probe needs law pareto:alpha"))?;
            let gamma = critical_gamma(n, d, alpha)?;
            check_slack("gamma", cfg.gamma, gamma)?;
            plan(
                E::CriticalConjectureProbe,
                None,
                Statistic::OffDiagonal,
                Target::NormalPlusStable {
                    gamma,
                    stable: StableLawRef::new(alpha, 1.0)?,
                },
            )
        }
        _ => return Ok(None),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{BTreeMap, BTreeSet};

    fn cfg(items: &[(&str, &str)]) -> Result<ExperimentConfig> {
        let p: BTreeMap<String, String> = items.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        ExperimentConfig::from_pairs(&p)
    }

    #[test]
    fn table_is_one_to_one() {
        let parts: BTreeSet<_> = REGIME_TABLE.iter().map(|e| e.part).collect();
        assert_eq!(parts.len(), REGIME_TABLE.len());
        let keys: BTreeSet<_> = REGIME_TABLE.iter().map(|e| (e.experiment, e.regime)).collect();
        assert_eq!(keys.len(), REGIME_TABLE.len());
    }

    #[test]
    fn every_entry_is_reachable() {
        let configs: Vec<Vec<(&str, &str)>> = vec![
            vec![("experiment", "clt_model1"), ("n", "500"), ("d", "500")],
            vec![("experiment", "stable_model1"), ("alpha", "1.5"), ("n", "2000"), ("d", "400")],
            vec![("experiment", "stable_model1"), ("alpha", "1.5"), ("n", "20"), ("d", "40000")],
            vec![("experiment", "clt_model2"), ("n", "100"), ("d", "10000")],
            vec![("experiment", "clt_model2"), ("n", "10000"), ("d", "100")],
            vec![("experiment", "clt_model2"), ("n", "2000"), ("d", "2000"), ("gamma", "1")],
            vec![("experiment", "stable_model2"), ("alpha", "1.5"), ("n", "10000"), ("d", "100")],
            vec![("experiment", "stable_model2"), ("alpha", "1.5"), ("n", "200"), ("d", "100")],
            vec![("experiment", "critical_conjecture_probe"), ("alpha", "1.5"), ("n", "1000"), ("d", "100")],
            vec![("experiment", "clt_model3"), ("law", "twopoint:0.5"), ("n", "100"), ("d", "10000")],
            vec![("experiment", "clt_model3"), ("law", "twopoint:0.5"), ("n", "10000"), ("d", "100")],
            vec![("experiment", "clt_model3"), ("law", "twopoint:0.5"), ("n", "2000"), ("d", "2000")],
            vec![("experiment", "stable_model3"), ("alpha", "1.5"), ("n", "10000"), ("d", "100")],
            vec![("experiment", "stable_model3"), ("alpha", "1.5"), ("n", "200"), ("d", "100")],
            vec![("experiment", "poisson_simple_rw"), ("n", "10"), ("d", "1000000")],
            vec![("experiment", "poisson_simple_rw"), ("n", "100"), ("d", "10000")],
            vec![("experiment", "poisson_simple_rw"), ("n", "10000"), ("d", "100")],
        ];
        let mut seen = BTreeSet::new();
        for items in &configs {
            let p = resolve(&cfg(items).unwrap()).unwrap().unwrap();
            seen.insert(p.part);
        }
        assert_eq!(seen.len(), REGIME_TABLE.len());
    }

    #[test]
    fn limits_match_regimes() {
        let p = resolve(&cfg(&[("experiment", "clt_model2"), ("n", "2000"), ("d", "2000")]).unwrap())
            .unwrap()
            .unwrap();
        assert_eq!(p.target, normal(2.25));
        let p = resolve(&cfg(&[("experiment", "clt_model2"), ("n", "100"), ("d", "10000")]).unwrap())
            .unwrap()
            .unwrap();
        assert_eq!(p.target, normal(0.25));
        let p = resolve(&cfg(&[("experiment", "poisson_simple_rw"), ("n", "100"), ("d", "10000")]).unwrap())
            .unwrap()
            .unwrap();
        assert_eq!(p.target, Target::Law(LimitLaw::PoissonDiff { c: 1.0 }));
    }

    #[test]
    fn invalid_combinations_name_the_constraint() {
        let bad = [
            vec![("experiment", "clt_model2"), ("n", "100"), ("d", "10000"), ("regime", "b")],
            vec![("experiment", "clt_model2"), ("n", "2000"), ("d", "2000"), ("gamma", "2")],
            vec![("experiment", "clt_model2"), ("law", "constant"), ("n", "10"), ("d", "1000"), ("regime", "a")],
            vec![("experiment", "clt_model3"), ("n", "10"), ("d", "1000")],
            vec![("experiment", "stable_model2"), ("alpha", "1.5"), ("n", "1000"), ("d", "100")],
            vec![("experiment", "poisson_simple_rw"), ("law", "twopoint:0.5"), ("n", "100"), ("d", "10000")],
            vec![("experiment", "poisson_simple_rw"), ("n", "100"), ("d", "10000"), ("c", "3")],
            vec![("experiment", "clt_model1"), ("alpha", "1.5"), ("n", "10"), ("d", "10")],
            vec![("experiment", "clt_model1"), ("n", "1"), ("d", "10")],
        ];
        for items in &bad {
            let r = cfg(items).and_then(|c| resolve(&c));
            assert!(matches!(r, Err(Error::Config(_))), "{items:?} gave {r:?}");
        }
    }

    #[test]
    fn critical_curve_round_trip() {
        let n = critical_n(1.0, 400, 1.5).unwrap();
        let g = critical_gamma(n, 400, 1.5).unwrap();
        assert!((g - 1.0).abs() < 0.02, "{n} {g}");
    }

    #[test]
    fn deterministic_radius_defaults_to_regime_b() {
        let p = resolve(&cfg(&[("experiment", "clt_model2"), ("law", "constant"), ("n", "10"), ("d", "1000")]).unwrap())
            .unwrap()
            .unwrap();
        assert_eq!(p.regime, Some(Regime::B));
    }
}
