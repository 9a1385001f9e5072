//! Experiment configuration and the flat `key = value` format shared with CLI flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ComponentLaw, ModelSpec};
use crate::sampling::RadialLaw;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Simulate,
    CheckConditions,
    CltModel1,
    CltModel2,
    CltModel3,
    StableModel1,
    StableModel2,
    StableModel3,
    PoissonSimpleRw,
    Fwlln,
    DistortionLadder,
    SpiralCheck,
    AlignCheck,
    BrownianInstance,
    CriticalConjectureProbe,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 15] = [
        ExperimentKind::Simulate,
        ExperimentKind::CheckConditions,
        ExperimentKind::CltModel1,
        ExperimentKind::CltModel2,
        ExperimentKind::CltModel3,
        ExperimentKind::StableModel1,
        ExperimentKind::StableModel2,
        ExperimentKind::StableModel3,
        ExperimentKind::PoissonSimpleRw,
        ExperimentKind::Fwlln,
        ExperimentKind::DistortionLadder,
        ExperimentKind::SpiralCheck,
        ExperimentKind::AlignCheck,
        ExperimentKind::BrownianInstance,
        ExperimentKind::CriticalConjectureProbe,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::CheckConditions => "check_conditions",
            ExperimentKind::CltModel1 => "clt_model1",
            ExperimentKind::CltModel2 => "clt_model2",
            ExperimentKind::CltModel3 => "clt_model3",
            ExperimentKind::StableModel1 => "stable_model1",
            ExperimentKind::StableModel2 => "stable_model2",
            ExperimentKind::StableModel3 => "stable_model3",
            ExperimentKind::PoissonSimpleRw => "poisson_simple_rw",
            ExperimentKind::Fwlln => "fwlln",
            ExperimentKind::DistortionLadder => "distortion_ladder",
            ExperimentKind::SpiralCheck => "spiral_check",
            ExperimentKind::AlignCheck => "align_check",
            ExperimentKind::BrownianInstance => "brownian_instance",
            ExperimentKind::CriticalConjectureProbe => "critical_conjecture_probe",
        }
    }

    /// Model family the experiment is tied to, if any.
    pub fn fixed_model(&self) -> Option<ModelKind> {
        match self {
            ExperimentKind::CltModel1 | ExperimentKind::StableModel1 | ExperimentKind::BrownianInstance => {
                Some(ModelKind::Iid)
            }
            ExperimentKind::CltModel2 | ExperimentKind::StableModel2 | ExperimentKind::CriticalConjectureProbe => {
                Some(ModelKind::RotInv)
            }
            ExperimentKind::CltModel3 | ExperimentKind::StableModel3 | ExperimentKind::PoissonSimpleRw => {
                Some(ModelKind::Axis)
            }
            _ => None,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().replace('-', "_");
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == key)
            .ok_or_else(|| Error::config(format!("unknown experiment '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Iid,
    RotInv,
    Axis,
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "iid" => Ok(ModelKind::Iid),
            "rotinv" => Ok(ModelKind::RotInv),
            "axis" => Ok(ModelKind::Axis),
            other => Err(Error::config(format!("unknown model '{other}' (expected iid, rotinv or axis)"))),
        }
    }
}

/// Law named on the command line, before it is attached to a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LawSpec {
    Rademacher,
    Gaussian,
    Constant,
    TwoPoint { a: f64 },
    Pareto { alpha: f64 },
    Sign,
}

impl FromStr for LawSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let num = |what: &str| -> Result<f64> {
            let a = arg.ok_or_else(|| Error::config(format!("law '{name}' needs a parameter, as in {name}:{what}")))?;
            a.parse()
                .map_err(|_| Error::config(format!("law '{name}': cannot parse '{a}' as a number")))
        };
        let law = match name {
            "rademacher" => LawSpec::Rademacher,
            "gaussian" => LawSpec::Gaussian,
            "constant" => LawSpec::Constant,
            "sign" => LawSpec::Sign,
            "twopoint" => LawSpec::TwoPoint { a: num("a")? },
            "pareto" => LawSpec::Pareto { alpha: num("alpha")? },
            other => return Err(Error::config(format!("unknown law '{other}'"))),
        };
        if arg.is_some() && !matches!(law, LawSpec::TwoPoint { .. } | LawSpec::Pareto { .. }) {
            return Err(Error::config(format!("law '{name}' takes no parameter")));
        }
        Ok(law)
    }
}

impl fmt::Display for LawSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LawSpec::Rademacher => f.write_str("rademacher"),
            LawSpec::Gaussian => f.write_str("gaussian"),
            LawSpec::Constant => f.write_str("constant"),
            LawSpec::Sign => f.write_str("sign"),
            LawSpec::TwoPoint { a } => write!(f, "twopoint:{a}"),
            LawSpec::Pareto { alpha } => write!(f, "pareto:{alpha}"),
        }
    }
}

impl LawSpec {
    pub fn with_alpha(self, alpha: Option<f64>) -> Result<Self> {
        match (self, alpha) {
            (LawSpec::Pareto { alpha: a }, Some(b)) if a != b => Err(Error::config(format!(
                "alpha = {b} conflicts with law pareto:{a}"
            ))),
            _ => Ok(self),
        }
    }

    pub fn into_model(self, kind: ModelKind) -> Result<ModelSpec> {
        let bad = || Error::config(format!("law '{self}' is not available for model {kind:?}"));
        Ok(match kind {
            ModelKind::Iid => ModelSpec::IidComponents {
                law: match self {
                    LawSpec::Rademacher => ComponentLaw::Rademacher,
                    LawSpec::Gaussian => ComponentLaw::StandardGaussian,
                    LawSpec::Pareto { alpha } => ComponentLaw::SymmetricParetoSquared { alpha },
                    _ => return Err(bad()),
                },
            },
            ModelKind::RotInv | ModelKind::Axis => {
                let radial = match self {
                    LawSpec::Constant => RadialLaw::Constant,
                    LawSpec::TwoPoint { a } => RadialLaw::TwoPoint { a },
                    LawSpec::Sign => RadialLaw::SymmetricSign,
                    LawSpec::Pareto { alpha } => RadialLaw::ParetoSquared { alpha },
                    _ => return Err(bad()),
                };
                if kind == ModelKind::RotInv {
                    ModelSpec::RotInvariant { radial }
                } else {
                    ModelSpec::AxisJumps { radial }
                }
            }
        })
    }

    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Iid => LawSpec::Rademacher,
            ModelKind::RotInv => LawSpec::TwoPoint { a: 0.5 },
            ModelKind::Axis => LawSpec::Sign,
        }
    }
}

/// Regime label inside one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    A,
    B,
    C,
}

impl FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "a" => Ok(Regime::A),
            "b" => Ok(Regime::B),
            "c" => Ok(Regime::C),
            other => Err(Error::config(format!("unknown regime '{other}' (expected a, b or c)"))),
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::A => "a",
            Regime::B => "b",
            Regime::C => "c",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::config(format!("unknown format '{other}' (expected csv or json)"))),
        }
    }
}

pub const DEFAULT_LADDER: [(usize, usize); 3] = [(256, 256), (1024, 1024), (4096, 4096)];

/// Everything that determines a report. `threads`, `output` and `format`
/// only affect execution and delivery, so they are left out of the echo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub model: ModelSpec,
    pub regime: Option<Regime>,
    pub n: usize,
    pub d: usize,
    pub ladder: Vec<(usize, usize)>,
    pub gamma: Option<f64>,
    pub c: Option<f64>,
    pub replicates: usize,
    pub master_seed: u64,
    pub grid: usize,
    #[serde(skip)]
    pub threads: usize,
    #[serde(skip)]
    pub output: Option<PathBuf>,
    #[serde(skip)]
    pub format: Format,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind, model: ModelSpec) -> Self {
        Self {
            experiment,
            model,
            regime: None,
            n: 0,
            d: 1,
            ladder: Vec::new(),
            gamma: None,
            c: None,
            replicates: 1,
            master_seed: 0,
            grid: crate::walk::DEFAULT_GRID,
            threads: 1,
            output: None,
            format: Format::Csv,
        }
    }

    /// Builds a config from `key = value` pairs. Keys match the CLI flags.
    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self> {
        const KNOWN: [&str; 17] = [
            "experiment", "model", "law", "regime", "n", "d", "ladder", "gamma", "c", "alpha", "reps", "seed",
            "threads", "grid", "out", "format", "config",
        ];
        if let Some(k) = pairs.keys().find(|k| !KNOWN.contains(&k.as_str())) {
            return Err(Error::config(format!("unknown key '{k}'")));
        }
        let get = |k: &str| pairs.get(k).map(|s| s.trim()).filter(|s| !s.is_empty());
        fn num<T: FromStr>(key: &str, v: Option<&str>) -> Result<Option<T>> {
            v.map(|s| {
                s.parse::<T>()
                    .map_err(|_| Error::config(format!("{key}: cannot parse '{s}'")))
            })
            .transpose()
        }

        let experiment: ExperimentKind = get("experiment")
            .ok_or_else(|| Error::config("missing key 'experiment'"))?
            .parse()?;
        let named_model = get("model").map(ModelKind::from_str).transpose()?;
        let model_kind = match (experiment.fixed_model(), named_model) {
            (Some(fixed), Some(named)) if fixed != named => {
                return Err(Error::config(format!(
                    "experiment {experiment} runs model {fixed:?}, not {named:?}"
                )))
            }
            (Some(fixed), _) => fixed,
            (None, Some(named)) => named,
            (None, None) => ModelKind::Iid,
        };
        let alpha: Option<f64> = num("alpha", get("alpha"))?;
        let law = match get("law") {
            Some(s) => s.parse::<LawSpec>()?.with_alpha(alpha)?,
            None => match (alpha, experiment) {
                (Some(alpha), _) => LawSpec::Pareto { alpha },
                (None, ExperimentKind::BrownianInstance) => LawSpec::Gaussian,
                _ => LawSpec::default_for(model_kind),
            },
        };
        let model = law.into_model(model_kind)?;

        let mut cfg = ExperimentConfig::new(experiment, model);
        cfg.regime = get("regime").map(Regime::from_str).transpose()?;
        cfg.n = num("n", get("n"))?.unwrap_or(0);
        cfg.d = num("d", get("d"))?.unwrap_or(0);
        cfg.ladder = get("ladder").map(parse_ladder).transpose()?.unwrap_or_default();
        cfg.gamma = num("gamma", get("gamma"))?;
        cfg.c = num("c", get("c"))?;
        cfg.replicates = num("reps", get("reps"))?.unwrap_or(1);
        cfg.master_seed = num("seed", get("seed"))?.unwrap_or(0);
        cfg.threads = num("threads", get("threads"))?.unwrap_or(1);
        cfg.grid = num("grid", get("grid"))?.unwrap_or(crate::walk::DEFAULT_GRID);
        cfg.output = get("out").map(PathBuf::from);
        cfg.format = get("format").map(Format::from_str).transpose()?.unwrap_or_default();
        cfg.fill_defaults();
        cfg.validate()?;
        Ok(cfg)
    }

    fn fill_defaults(&mut self) {
        use ExperimentKind::*;
        match self.experiment {
            Fwlln | DistortionLadder | AlignCheck if self.ladder.is_empty() => self.ladder = DEFAULT_LADDER.to_vec(),
            BrownianInstance if self.ladder.is_empty() => self.ladder = vec![(64, 64), (64, 4096)],
            PoissonSimpleRw if self.n == 0 => {
                if let Some(c) = self.c {
                    self.n = (c * (self.d as f64).sqrt()).round() as usize;
                }
            }
            CltModel2 | CltModel3 if self.n == 0 => {
                if let Some(g) = self.gamma {
                    self.n = (g * self.d as f64).round() as usize;
                }
            }
            _ => {}
        }
    }

    pub fn validate(&self) -> Result<()> {
        use ExperimentKind::*;
        if self.replicates == 0 {
            return Err(Error::config("reps must be at least 1"));
        }
        if self.grid == 0 {
            return Err(Error::config("grid must be at least 1"));
        }
        match self.experiment {
            Fwlln | DistortionLadder | AlignCheck | BrownianInstance => {
                if self.ladder.is_empty() {
                    return Err(Error::config("ladder must have at least one rung"));
                }
                if self.ladder.iter().any(|&(_, d)| d == 0) {
                    return Err(Error::config("every ladder rung needs d >= 1"));
                }
            }
            SpiralCheck => {}
            _ => {
                if self.d == 0 {
                    return Err(Error::config("d must be at least 1"));
                }
            }
        }
        self.model
            .validate(self.d.max(1))
            .map_err(|e| Error::config(e.to_string()))?;
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::config(format!("gamma must be positive, got {g}")));
            }
        }
        if let Some(c) = self.c {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::config(format!("c must be positive, got {c}")));
            }
        }
        Ok(())
    }

    pub fn alpha(&self) -> Option<f64> {
        self.model.stable_alpha()
    }

    /// Short label of the model law, matching the CLI spelling.
    pub fn law_label(&self) -> String {
        use crate::models::ComponentLaw as C;
        use RadialLaw as R;
        let law = match self.model {
            ModelSpec::IidComponents { law } => match law {
                C::Rademacher => LawSpec::Rademacher,
                C::StandardGaussian => LawSpec::Gaussian,
                C::SymmetricParetoSquared { alpha } => LawSpec::Pareto { alpha },
            },
            ModelSpec::RotInvariant { radial } | ModelSpec::AxisJumps { radial } => match radial {
                R::Constant => LawSpec::Constant,
                R::TwoPoint { a } => LawSpec::TwoPoint { a },
                R::SymmetricSign => LawSpec::Sign,
                R::ParetoSquared { alpha } => LawSpec::Pareto { alpha },
            },
        };
        law.to_string()
    }
}

pub fn parse_ladder(s: &str) -> Result<Vec<(usize, usize)>> {
    s.split(',')
        .map(|rung| {
            let (n, d) = rung
                .trim()
                .split_once('x')
                .ok_or_else(|| Error::config(format!("ladder rung '{rung}' is not of the form NxD")))?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::config(format!("ladder rung '{rung}': bad integer '{v}'")))
            };
            Ok((parse(n)?, parse(d)?))
        })
        .collect()
}

/// Parses a flat `key = value` document. `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}: expected key = value", lineno + 1)))?;
        let key = k.trim().trim_start_matches("--").replace('-', "_");
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::config(format!("line {}: duplicate key '{key}'", lineno + 1)));
        }
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_text(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(items: &[(&str, &str)]) -> BTreeMap<String, String> {
        items.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn laws_parse() {
        assert_eq!("twopoint:0.5".parse::<LawSpec>().unwrap(), LawSpec::TwoPoint { a: 0.5 });
        assert_eq!("pareto:1.5".parse::<LawSpec>().unwrap(), LawSpec::Pareto { alpha: 1.5 });
        assert!("pareto".parse::<LawSpec>().is_err());
        assert!("sign:2".parse::<LawSpec>().is_err());
        assert!("cauchy".parse::<LawSpec>().is_err());
    }

    #[test]
    fn config_text_round_trip() {
        let text = "# clt run\nexperiment = clt_model1\nn = 500\n--d = 500 # trailing\nreps=10\n";
        let p = parse_config_text(text).unwrap();
        let cfg = ExperimentConfig::from_pairs(&p).unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::CltModel1);
        assert_eq!((cfg.n, cfg.d, cfg.replicates), (500, 500, 10));
        assert!(parse_config_text("n = 1\nn = 2").is_err());
        assert!(parse_config_text("just words").is_err());
    }

    #[test]
    fn conflicting_model_is_rejected() {
        let p = pairs(&[("experiment", "clt_model2"), ("model", "iid"), ("d", "4")]);
        assert!(matches!(ExperimentConfig::from_pairs(&p), Err(Error::Config(_))));
        let p = pairs(&[("experiment", "clt_model1"), ("law", "sign"), ("d", "4")]);
        assert!(ExperimentConfig::from_pairs(&p).is_err());
        let p = pairs(&[("experiment", "simulate"), ("bogus", "1")]);
        assert!(ExperimentConfig::from_pairs(&p).is_err());
    }

    #[test]
    fn defaults_and_derived_sizes() {
        let p = pairs(&[("experiment", "poisson_simple_rw"), ("d", "10000"), ("c", "1")]);
        let cfg = ExperimentConfig::from_pairs(&p).unwrap();
        assert_eq!(cfg.n, 100);
        let p = pairs(&[("experiment", "fwlln")]);
        let cfg = ExperimentConfig::from_pairs(&p).unwrap();
        assert_eq!(cfg.ladder, DEFAULT_LADDER.to_vec());
        let p = pairs(&[("experiment", "stable_model2"), ("alpha", "1.5"), ("d", "100"), ("n", "200")]);
        let cfg = ExperimentConfig::from_pairs(&p).unwrap();
        assert_eq!(cfg.alpha(), Some(1.5));
        assert_eq!(cfg.law_label(), "pareto:1.5");
    }

    #[test]
    fn ladder_parse() {
        assert_eq!(parse_ladder("8x4, 16x32").unwrap(), vec![(8, 4), (16, 32)]);
        assert!(parse_ladder("8by4").is_err());
    }
}
