//! Replicate execution and per-experiment verdicts.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use super::config::{ExperimentConfig, ExperimentKind};
use super::fixtures::{self, Threshold};
use super::regime::{self, Plan, Statistic, Target};
use super::report::{histogram, qq_pairs, should_elide, Aggregate, Observation, Provenance, Report};
use crate::error::{Error, Result};
use crate::geometry::{
    align_and_hausdorff, align_path_to_spiral, path_distortion, truncation_sweep, Correspondence, PreparedNet,
    SpiralRef, DEFAULT_TRUNCATION,
};
use crate::linalg::PointCloud;
use crate::models::{check_conditions, ModelSpec};
use crate::sampling::{derive_stream, sample_stable, SeedSpec, StableLawRef, Stream};
use crate::stats::{
    ks_null_quantile, ks_one_sample, ks_two_sample, median, moment_summary, normal_cdf, poisson_diff_pmf, sorted,
    even_poisson_diff_pmf,
    total_variation, variance_identity_check, LimitLaw, TestVerdict, CONFIDENCE,
};
use crate::walk::{grid_points, run_walk, simulate_summary, WalkScratch, WalkSummary};

/// Draws in each cached stable reference sample.
pub const REFERENCE_SIZE: usize = 1_000_000;
const REFERENCE_SEED: u64 = 0x7374_6162_6c65;
/// Ladder rung `r`, replicate `i` uses stream `(r << 32) | i`.
const RUNG_SHIFT: u32 = 32;
const STREAM_NAME: &str = "chacha8(seed).set_stream(index)";

pub fn replicate_stream(master_seed: u64, rung: usize, replicate: usize) -> Stream {
    derive_stream(SeedSpec::new(master_seed, ((rung as u64) << RUNG_SHIFT) | replicate as u64))
}

fn build_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Contract(format!("thread pool: {e}")))
}

/// Runs `f` once per replicate; results come back in replicate order.
fn replicates<T, F>(pool: &rayon::ThreadPool, cfg: &ExperimentConfig, rung: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut Stream, &mut WalkScratch) -> Result<T> + Sync,
{
    pool.install(|| {
        (0..cfg.replicates)
            .into_par_iter()
            .map_init(WalkScratch::default, |scratch, i| {
                let mut rng = replicate_stream(cfg.master_seed, rung, i);
                f(&mut rng, scratch)
            })
            .collect()
    })
}

/// Sorted draws of `law`, shared across experiments.
pub fn stable_reference(law: &StableLawRef) -> Arc<Vec<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, u64), Arc<Vec<f64>>>>> = OnceLock::new();
    let key = (law.alpha.to_bits(), law.scale.to_bits());
    let cache = CACHE.get_or_init(Default::default);
    if let Some(v) = cache.lock().expect("cache poisoned").get(&key) {
        return Arc::clone(v);
    }
    let mut rng = derive_stream(SeedSpec::new(REFERENCE_SEED, key.0));
    let xs = Arc::new(sorted((0..REFERENCE_SIZE).map(|_| sample_stable(law, &mut rng)).collect()));
    cache.lock().expect("cache poisoned").insert(key, Arc::clone(&xs));
    xs
}

fn conjecture_reference(gamma: f64, law: &StableLawRef) -> Vec<f64> {
    let mut rng = derive_stream(SeedSpec::new(REFERENCE_SEED, u64::MAX));
    sorted(
        (0..REFERENCE_SIZE)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                z + sample_stable(law, &mut rng) / gamma
            })
            .collect(),
    )
}

#[derive(Default)]
struct Builder {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
    aggregates: Vec<Aggregate>,
    verdicts: Vec<TestVerdict>,
    observations: Vec<Observation>,
    histogram_column: Option<(String, Vec<f64>)>,
    qq: Vec<(f64, f64)>,
    plan: Option<Plan>,
}

impl Builder {
    fn observe(&mut self, name: impl Into<String>, value: f64) {
        self.observations.push(Observation {
            name: name.into(),
            value,
        });
    }

    fn aggregate(&mut self, name: impl Into<String>, values: &[f64]) -> Result<()> {
        if values.len() >= 2 {
            self.aggregates.push(Aggregate {
                name: name.into(),
                summary: moment_summary(values)?,
            });
        }
        Ok(())
    }

    fn aggregate_all_columns(&mut self) -> Result<()> {
        for j in 0..self.columns.len() {
            let col: Vec<f64> = self.rows.iter().map(|r| r[j]).collect();
            self.aggregate(self.columns[j].clone(), &col)?;
        }
        Ok(())
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let start = Instant::now();
    let pool = build_pool(cfg.threads)?;
    let mut b = Builder {
        plan: regime::resolve(cfg)?,
        ..Builder::default()
    };
    use ExperimentKind as E;
    match cfg.experiment {
        E::Simulate
        | E::CltModel1
        | E::CltModel2
        | E::CltModel3
        | E::StableModel1
        | E::StableModel2
        | E::StableModel3
        | E::PoissonSimpleRw
        | E::CriticalConjectureProbe => walk_statistics(cfg, &pool, &mut b)?,
        E::CheckConditions => conditions(cfg, &mut b)?,
        E::Fwlln => fwlln(cfg, &pool, &mut b)?,
        E::DistortionLadder => distortion_ladder(cfg, &pool, &mut b)?,
        E::AlignCheck => align_check(cfg, &pool, &mut b)?,
        E::BrownianInstance => brownian(cfg, &pool, &mut b)?,
        E::SpiralCheck => spiral_check(cfg, &mut b)?,
    }
    let histogram = b.histogram_column.as_ref().and_then(|(name, v)| histogram(name, v));
    let rows_elided = should_elide(b.rows.len(), b.columns.len());
    Ok(Report {
        config: cfg.clone(),
        regime_part: b.plan.map(|p| p.part.to_string()),
        limit: b.plan.map(|p| p.target),
        columns: b.columns,
        rows: if rows_elided { Vec::new() } else { b.rows },
        rows_elided,
        aggregates: b.aggregates,
        verdicts: b.verdicts,
        observations: b.observations,
        histogram,
        qq: b.qq,
        provenance: Provenance {
            master_seed: cfg.master_seed,
            replicates: cfg.replicates,
            stream: STREAM_NAME.to_string(),
        },
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}

fn ks_threshold(cfg: &ExperimentConfig, plan: &Plan, sample: usize, reference: Option<usize>) -> Result<(f64, f64)> {
    let effective = match reference {
        // Two-sample null approximated by the one-sample null at n m / (n + m).
        Some(m) => ((sample as f64 * m as f64) / (sample + m) as f64).round().max(1.0) as usize,
        None => sample,
    };
    let fixture = fixtures::ks_fixture(cfg.experiment, plan.regime, &cfg.law_label(), cfg.n, cfg.d);
    if let Some(Threshold::Absolute(t)) = fixture {
        return Ok((t, f64::NAN));
    }
    let null = ks_null_quantile(effective, 0, CONFIDENCE)?;
    Ok(match fixture {
        Some(Threshold::Allowance(a)) => (null + a, null),
        _ => (null, null),
    })
}

fn walk_statistics(cfg: &ExperimentConfig, pool: &rayon::ThreadPool, b: &mut Builder) -> Result<()> {
    let (n, d) = (cfg.n, cfg.d);
    let summaries: Vec<WalkSummary> = replicates(pool, cfg, 0, |rng, scratch| {
        simulate_summary(&cfg.model, n, d, rng, scratch)
    })?;
    let statistic = match b.plan {
        Some(p) => Some(p.statistic),
        None if n >= 2 => Some(Statistic::OffDiagonal),
        None => None,
    };
    let with_occupancy = cfg.model.is_sparse();
    b.columns = [
        "norm_sq",
        "t",
        "q",
        "sup_deviation",
        "max_step_norm",
        "conditional_variance_sum",
    ]
    .map(String::from)
    .to_vec();
    if with_occupancy {
        b.columns.extend(["mu1", "mu2", "mu_ge3"].map(String::from));
    }
    if statistic.is_some() {
        b.columns.push("stat".into());
    }
    let mut stats = Vec::with_capacity(summaries.len());
    for s in &summaries {
        let mut row = vec![
            s.norm_sq_final,
            s.t_final,
            s.q_final,
            s.sup_deviation,
            s.max_step_norm,
            s.conditional_variance_sum,
        ];
        if with_occupancy {
            let o = s.occupancy.unwrap_or_default();
            row.extend([o.mu1 as f64, o.mu2 as f64, o.mu_ge3 as f64]);
        }
        if let Some(st) = statistic {
            let v = st.evaluate(s)?;
            stats.push(v);
            row.push(v);
        }
        b.rows.push(row);
    }
    b.aggregate_all_columns()?;
    if !stats.is_empty() {
        b.histogram_column = Some(("stat".into(), stats.clone()));
    }

    if cfg.experiment == ExperimentKind::Simulate {
        return lemma_verdicts(cfg, &summaries, b);
    }
    let plan = b.plan.expect("walk experiments resolve a plan");
    let xs = sorted(stats);
    let count = xs.len();
    match plan.target {
        Target::Law(LimitLaw::Normal { variance }) => {
            let ks = ks_one_sample(&xs, |x| normal_cdf(x / variance.sqrt()))?;
            let (threshold, null) = ks_threshold(cfg, &plan, count, None)?;
            b.observe("ks_null_quantile", null);
            b.verdicts.push(TestVerdict::new("ks", ks, threshold, count));
            let reference = Normal::new(0.0, variance.sqrt()).map_err(|e| Error::param(e.to_string()))?;
            b.qq = qq_pairs(&xs, |p| reference.inverse_cdf(p));
        }
        Target::Law(LimitLaw::Stable(law)) => {
            let reference = stable_reference(&law);
            let ks = ks_two_sample(&xs, &reference)?;
            let (threshold, null) = ks_threshold(cfg, &plan, count, Some(reference.len()))?;
            if null.is_finite() {
                b.observe("ks_null_quantile", null);
            }
            b.verdicts.push(TestVerdict::new("ks_two_sample", ks, threshold, count));
            b.qq = qq_pairs(&xs, |p| crate::stats::quantile(&reference, p));
        }
        Target::Law(LimitLaw::PoissonDiff { c }) => {
            let pmf = poisson_diff_pmf(c)?;
            let ints: Vec<i64> = xs.iter().map(|v| v.round() as i64).collect();
            let tv = total_variation(&ints, &pmf)?;
            b.verdicts.push(TestVerdict::new("total_variation", tv, fixtures::TV_THRESHOLD, count));
            b.observe("total_variation_even_difference", total_variation(&ints, &even_poisson_diff_pmf(c)?)?);
            let cdf: Vec<(i64, f64)> = pmf
                .support()
                .scan(0.0, |acc, (k, p)| {
                    *acc += p;
                    Some((k, *acc))
                })
                .collect();
            b.qq = qq_pairs(&xs, |p| {
                cdf.iter().find(|(_, f)| *f >= p).map_or(cdf[cdf.len() - 1].0, |(k, _)| *k) as f64
            });
        }
        Target::NoCollisions => {
            let clean = xs.iter().filter(|v| v.abs() < 0.5).count() as f64 / count as f64;
            b.observe("no_collision_fraction", clean);
            b.verdicts.push(TestVerdict::new(
                "collision_fraction",
                1.0 - clean,
                fixtures::COLLISION_FRACTION,
                count,
            ));
        }
        Target::NormalPlusStable { gamma, stable } => {
            let reference = conjecture_reference(gamma, &stable);
            b.observe("gamma", gamma);
            b.observe("ks_two_sample", ks_two_sample(&xs, &reference)?);
            b.qq = qq_pairs(&xs, |p| crate::stats::quantile(&reference, p));
        }
    }
    Ok(())
}

/// Exact mean and variance identities for `Q_n` and the conditional variance sum.
fn lemma_verdicts(cfg: &ExperimentConfig, summaries: &[WalkSummary], b: &mut Builder) -> Result<()> {
    if summaries.len() < 1000 {
        return Ok(());
    }
    let (n, d) = (cfg.n, cfg.d);
    let count = summaries.len();
    let q: Vec<f64> = summaries.iter().map(|s| s.q_final).collect();
    b.verdicts.push(variance_identity_check(&q, n, d)?);
    let qs = moment_summary(&q)?;
    let target = crate::walk::off_diagonal_variance(n, d);
    if target > 0.0 {
        b.verdicts.push(TestVerdict::new(
            "q_variance_relative",
            (qs.variance / target - 1.0).abs(),
            fixtures::VARIANCE_RELATIVE,
            count,
        ));
    }
    b.verdicts.push(TestVerdict::new("q_mean", qs.mean.abs(), 5.0 * qs.se_mean, count));
    let dn: Vec<f64> = summaries.iter().map(|s| s.conditional_variance_sum).collect();
    let ds = moment_summary(&dn)?;
    let dn_target = n as f64 * (n as f64 - 1.0) / (2.0 * d as f64);
    b.observe("conditional_variance_target", dn_target);
    b.verdicts.push(TestVerdict::new(
        "conditional_variance_mean",
        (ds.mean - dn_target).abs(),
        5.0 * ds.se_mean,
        count,
    ));
    Ok(())
}

fn conditions(cfg: &ExperimentConfig, b: &mut Builder) -> Result<()> {
    let mut rng = replicate_stream(cfg.master_seed, 0, 0);
    let rep = check_conditions(&cfg.model, cfg.d, cfg.replicates, &mut rng)?;
    b.columns = ["score", "statistic", "reference", "standard_error"].map(String::from).to_vec();
    let items = [&rep.centered, &rep.normalized, &rep.uncorrelated]
        .into_iter()
        .chain(rep.uniformly_integrable.iter())
        .chain([&rep.negligible]);
    for item in items {
        b.rows
            .push(vec![item.score, item.statistic, item.reference, item.standard_error]);
        b.verdicts
            .push(TestVerdict::new(item.name.clone(), item.score, 1.0, rep.samples));
    }
    Ok(())
}

/// Strictly decreasing medians: the largest step `m_{r+1} - m_r` must be negative.
fn decreasing_verdict(name: &str, medians: &[f64], per_rung: usize) -> Option<TestVerdict> {
    if medians.len() < 2 {
        return None;
    }
    let worst = medians.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    Some(TestVerdict::new(name, worst, -f64::MIN_POSITIVE, per_rung))
}

struct Ladder<'a> {
    metrics: &'a [&'a str],
    values: Vec<Vec<Vec<f64>>>,
}

impl<'a> Ladder<'a> {
    fn new(metrics: &'a [&'a str]) -> Self {
        Self {
            metrics,
            values: Vec::new(),
        }
    }

    fn push_rung(&mut self, rows: Vec<Vec<f64>>) {
        self.values.push(rows);
    }

    fn medians(&self, metric: usize) -> Vec<f64> {
        self.values
            .iter()
            .map(|rung| median(&rung.iter().map(|r| r[metric]).collect::<Vec<_>>()))
            .collect()
    }

    /// Writes rows, per-rung aggregates and medians, and returns the medians of metric 0.
    fn finish(self, cfg: &ExperimentConfig, b: &mut Builder) -> Result<Vec<f64>> {
        b.columns = ["rung", "n", "d"].iter().chain(self.metrics).map(|s| s.to_string()).collect();
        for (r, rung) in self.values.iter().enumerate() {
            let (n, d) = cfg.ladder[r];
            for row in rung {
                let mut full = vec![r as f64, n as f64, d as f64];
                full.extend(row);
                b.rows.push(full);
            }
        }
        for (j, name) in self.metrics.iter().enumerate() {
            let medians = self.medians(j);
            for (r, m) in medians.iter().enumerate() {
                b.observe(format!("median.{name}.rung{r}"), *m);
                let col: Vec<f64> = self.values[r].iter().map(|row| row[j]).collect();
                b.aggregate(format!("{name}.rung{r}"), &col)?;
            }
        }
        if let Some(top) = self.values.last() {
            b.histogram_column = Some((self.metrics[0].to_string(), top.iter().map(|r| r[0]).collect()));
        }
        Ok(self.medians(0))
    }
}

fn top_rung_fixture(cfg: &ExperimentConfig, medians: &[f64], b: &mut Builder) {
    let (n, d) = *cfg.ladder.last().expect("nonempty ladder");
    if let Some(bound) = fixtures::ladder_fixture(cfg.experiment, cfg.model.name(), &cfg.law_label(), n, d) {
        b.verdicts.push(TestVerdict::new(
            "top_rung_median",
            *medians.last().expect("nonempty"),
            bound,
            cfg.replicates,
        ));
    }
}

fn fwlln(cfg: &ExperimentConfig, pool: &rayon::ThreadPool, b: &mut Builder) -> Result<()> {
    let mut ladder = Ladder::new(&["sup_deviation", "max_step_over_sqrt_n"]);
    for (r, &(n, d)) in cfg.ladder.iter().enumerate() {
        let rows = replicates(pool, cfg, r, |rng, scratch| {
            let s = simulate_summary(&cfg.model, n, d, rng, scratch)?;
            Ok(vec![s.sup_deviation, s.max_step_norm / (n.max(1) as f64).sqrt()])
        })?;
        ladder.push_rung(rows);
    }
    let medians = ladder.finish(cfg, b)?;
    b.verdicts
        .extend(decreasing_verdict("median_decreasing", &medians, cfg.replicates));
    top_rung_fixture(cfg, &medians, b);
    Ok(())
}

fn distortion_ladder(cfg: &ExperimentConfig, pool: &rayon::ThreadPool, b: &mut Builder) -> Result<()> {
    let mut ladder = Ladder::new(&["gh_upper", "sup_deviation", "max_step_over_sqrt_n"]);
    for (r, &(n, d)) in cfg.ladder.iter().enumerate() {
        let rows = replicates(pool, cfg, r, |rng, _| {
            let run = run_walk(&cfg.model, n, d, cfg.grid, rng)?;
            Ok(vec![
                2.0 * path_distortion(&run.path)?,
                run.summary.sup_deviation,
                run.summary.max_step_norm / (n.max(1) as f64).sqrt(),
            ])
        })?;
        ladder.push_rung(rows);
    }
    let top_steps: Vec<f64> = ladder.values.last().map_or(Vec::new(), |rung| rung.iter().map(|r| r[2]).collect());
    let medians = ladder.finish(cfg, b)?;
    b.verdicts
        .extend(decreasing_verdict("median_decreasing", &medians, cfg.replicates));
    top_rung_fixture(cfg, &medians, b);
    if cfg.model.stable_alpha().is_none() {
        let worst = top_steps.iter().copied().fold(0.0, f64::max);
        b.verdicts.push(TestVerdict::new(
            "max_step_over_sqrt_n",
            worst,
            fixtures::STEP_BOUND,
            top_steps.len(),
        ));
    }
    Ok(())
}

/// Reverses coordinates, flips every other sign and shifts.
fn isometric_copy(a: &PointCloud) -> Result<PointCloud> {
    let dim = a.dim();
    let shift: Vec<f64> = (0..dim).map(|k| (k + 1) as f64 / dim as f64).collect();
    a.map_points(|p| {
        (0..dim)
            .map(|k| {
                let v = p[dim - 1 - k];
                (if k % 2 == 0 { v } else { -v }) + shift[k]
            })
            .collect()
    })
}

fn align_check(cfg: &ExperimentConfig, pool: &rayon::ThreadPool, b: &mut Builder) -> Result<()> {
    let mut ladder = Ladder::new(&["hausdorff_upper"]);
    for (r, &(n, d)) in cfg.ladder.iter().enumerate() {
        let times: Vec<f64> = grid_points(n, cfg.grid)
            .iter()
            .map(|&k| k as f64 / n.max(1) as f64)
            .collect();
        let spiral = SpiralRef::new(DEFAULT_TRUNCATION, times)?.cloud()?;
        let prepared = PreparedNet::new(&spiral, 0.0)?;
        let rows = replicates(pool, cfg, r, |rng, _| {
            let run = run_walk(&cfg.model, n, d, cfg.grid, rng)?;
            Ok(vec![align_path_to_spiral(&run.path, &prepared)?])
        })?;
        ladder.push_rung(rows);
    }
    let medians = ladder.finish(cfg, b)?;
    b.verdicts
        .extend(decreasing_verdict("median_decreasing", &medians, cfg.replicates));
    top_rung_fixture(cfg, &medians, b);

    let (n, d) = cfg.ladder[0];
    let run = run_walk(&cfg.model, n, d, cfg.grid, &mut replicate_stream(cfg.master_seed, 0, 0))?;
    let a = &run.path.snapshots;
    let diam = a.diameter();
    if diam > 0.0 {
        let copy = isometric_copy(a)?;
        let res = align_and_hausdorff(a, &copy, 1e-12 * diam, Correspondence::ByIndex)?;
        b.verdicts.push(TestVerdict::new(
            "isometric_copy",
            res.hausdorff_upper / diam,
            fixtures::ISOMETRY_RATIO,
            1,
        ));
    }
    Ok(())
}

fn brownian(cfg: &ExperimentConfig, pool: &rayon::ThreadPool, b: &mut Builder) -> Result<()> {
    if !matches!(
        cfg.model,
        ModelSpec::IidComponents {
            law: crate::models::ComponentLaw::StandardGaussian
        }
    ) {
        return Err(Error::config("brownian_instance needs law gaussian"));
    }
    let mut ladder = Ladder::new(&["distortion"]);
    for (r, &(n, d)) in cfg.ladder.iter().enumerate() {
        // Gaussian increments on an n-point grid, every point kept.
        let rows = replicates(pool, cfg, r, |rng, _| {
            let run = run_walk(&cfg.model, n, d, n.max(1), rng)?;
            Ok(vec![path_distortion(&run.path)?])
        })?;
        ladder.push_rung(rows);
    }
    let medians = ladder.finish(cfg, b)?;
    b.verdicts
        .extend(decreasing_verdict("median_decreasing", &medians, cfg.replicates));
    Ok(())
}

fn spiral_check(cfg: &ExperimentConfig, b: &mut Builder) -> Result<()> {
    let g = cfg.grid;
    let grid: Vec<f64> = (0..=g).map(|j| j as f64 / g as f64).collect();
    b.columns = ["terms", "max_error", "scaled_error"].map(String::from).to_vec();
    let sweep = truncation_sweep(&grid, &fixtures::SPIRAL_TRUNCATION_TERMS)?;
    for &(k, err) in &sweep {
        b.rows.push(vec![k as f64, err, k as f64 * err]);
        b.verdicts.push(TestVerdict::new(
            format!("truncation_{k}"),
            k as f64 * err,
            fixtures::SPIRAL_TRUNCATION_CONSTANT,
            grid.len(),
        ));
    }
    let errors: Vec<f64> = sweep.iter().map(|s| s.1).collect();
    b.verdicts
        .extend(decreasing_verdict("error_decreasing", &errors, grid.len()));
    let w1 = crate::geometry::spiral_embedding(1.0, DEFAULT_TRUNCATION)?;
    b.verdicts.push(TestVerdict::new(
        "unit_endpoint",
        (w1.norm().powi(2) - 1.0).abs(),
        1e-3,
        1,
    ));
    Ok(())
}
