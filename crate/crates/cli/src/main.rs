use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hdwalk::harness::{emit_report, read_config_file, run_experiment, ExperimentConfig, Report};
use hdwalk::Error;

#[derive(Parser)]
#[command(name = "hdwalk", version, about = "Random walks in growing dimension: Monte Carlo checks of path and norm limits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate walks and report the norm decomposition and its variance identities.
    Simulate(Common),
    /// Normal limit of the squared norm (model chosen by --model).
    Clt(Common),
    /// Stable-domain regimes (model chosen by --model).
    Stable(Common),
    /// Simple symmetric walk around n ~ c sqrt(d).
    Poisson(Common),
    /// Uniform deviation of |S_k|^2 / n from k / n along a ladder.
    Fwlln(Common),
    /// Distortion of the path against the spiral metric along a ladder.
    Distortion(Common),
    /// Truncation error of the spiral embedding.
    Spiral(Common),
    /// Gram alignment of path snapshots with the spiral along a ladder.
    Align(Common),
    /// Scaled Brownian motion in growing dimension.
    Brownian(Common),
    /// Critical stable case against the conjectured mixture; no verdict.
    ProbeConjecture(Common),
    /// Empirical checks of the increment conditions.
    CheckConditions(Common),
}

#[derive(Args, Default)]
struct Common {
    /// iid | rotinv | axis
    #[arg(long)]
    model: Option<String>,
    /// rademacher | gaussian | constant | twopoint:a | pareto:alpha | sign
    #[arg(long)]
    law: Option<String>,
    /// a | b | c; chosen from n and d when omitted
    #[arg(long)]
    regime: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    /// Comma-separated rungs, e.g. 256x256,1024x1024
    #[arg(long)]
    ladder: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    grid: Option<usize>,
    /// Report path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv | json
    #[arg(long)]
    format: Option<String>,
    /// Flat key = value file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Common {
    fn overlay(&self, pairs: &mut BTreeMap<String, String>) {
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                pairs.insert(k.to_string(), v);
            }
        };
        put("model", self.model.clone());
        put("law", self.law.clone());
        put("regime", self.regime.clone());
        put("n", self.n.map(|v| v.to_string()));
        put("d", self.d.map(|v| v.to_string()));
        put("ladder", self.ladder.clone());
        put("gamma", self.gamma.map(|v| v.to_string()));
        put("c", self.c.map(|v| v.to_string()));
        put("alpha", self.alpha.map(|v| v.to_string()));
        put("reps", self.reps.map(|v| v.to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        put("threads", self.threads.map(|v| v.to_string()));
        put("grid", self.grid.map(|v| v.to_string()));
        put("out", self.out.as_ref().map(|p| p.display().to_string()));
        put("format", self.format.clone());
    }
}

fn experiment_for(command: &Command, model: Option<&str>) -> Result<&'static str, Error> {
    let by_model = |names: [&'static str; 3]| match model.unwrap_or("iid") {
        "iid" => Ok(names[0]),
        "rotinv" => Ok(names[1]),
        "axis" => Ok(names[2]),
        other => Err(Error::Config(format!("unknown model '{other}'"))),
    };
    Ok(match command {
        Command::Simulate(_) => "simulate",
        Command::Clt(_) => by_model(["clt_model1", "clt_model2", "clt_model3"])?,
        Command::Stable(_) => by_model(["stable_model1", "stable_model2", "stable_model3"])?,
        Command::Poisson(_) => "poisson_simple_rw",
        Command::Fwlln(_) => "fwlln",
        Command::Distortion(_) => "distortion_ladder",
        Command::Spiral(_) => "spiral_check",
        Command::Align(_) => "align_check",
        Command::Brownian(_) => "brownian_instance",
        Command::ProbeConjecture(_) => "critical_conjecture_probe",
        Command::CheckConditions(_) => "check_conditions",
    })
}

fn common(command: &Command) -> &Common {
    match command {
        Command::Simulate(c)
        | Command::Clt(c)
        | Command::Stable(c)
        | Command::Poisson(c)
        | Command::Fwlln(c)
        | Command::Distortion(c)
        | Command::Spiral(c)
        | Command::Align(c)
        | Command::Brownian(c)
        | Command::ProbeConjecture(c)
        | Command::CheckConditions(c) => c,
    }
}

fn build_config(command: &Command) -> Result<ExperimentConfig, Error> {
    let flags = common(command);
    let mut pairs = match &flags.config {
        Some(path) => read_config_file(path)?,
        None => BTreeMap::new(),
    };
    flags.overlay(&mut pairs);
    let experiment = experiment_for(command, pairs.get("model").map(String::as_str))?;
    if let Some(named) = pairs.get("experiment") {
        if named.replace('-', "_") != experiment {
            return Err(Error::Config(format!(
                "config file names experiment '{named}' but the subcommand runs '{experiment}'"
            )));
        }
    }
    pairs.insert("experiment".into(), experiment.into());
    // Experiments tied to one model reject a conflicting model key.
    ExperimentConfig::from_pairs(&pairs)
}

fn summarize(report: &Report) {
    let mut err = std::io::stderr().lock();
    if let Some(part) = &report.regime_part {
        let _ = writeln!(err, "regime: {part}");
    }
    for v in &report.verdicts {
        let _ = writeln!(
            err,
            "{} {}: statistic {:.6} threshold {:.6} (n = {})",
            if v.pass { "PASS" } else { "FAIL" },
            v.name,
            v.statistic,
            v.threshold,
            v.sample_size
        );
    }
    for o in &report.observations {
        let _ = writeln!(err, "{}: {:.6}", o.name, o.value);
    }
    let _ = writeln!(err, "wall clock: {:.2} s", report.wall_clock_seconds);
}

fn run(cfg: &ExperimentConfig) -> Result<bool, Error> {
    let report = run_experiment(cfg)?;
    match &cfg.output {
        Some(path) => emit_report(&report, cfg.format, path)?,
        None => {
            let text = report.render(cfg.format)?;
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|source| Error::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })?;
        }
    }
    summarize(&report);
    Ok(report.all_pass())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    // Anything wrong with the flags or the config file, bad values included.
    let cfg = match build_config(&cli.command) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&cfg) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
