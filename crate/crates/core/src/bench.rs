//! Benchmark commands: calibration, single runs, δ sweeps and trajectory dumps.
//!
//! Every command is a pure function of its config; rows are sorted before they
//! are written so outputs are byte-identical across reruns.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::baselines::{oracle_schedule, run_reduced_timesteps, run_uniform, ScheduleSet};
use crate::calibration::{fit_polynomial, fit_residual, record_trace, DiffTrace, PolyRescaler};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::metrics::{schedule_jaccard, speedup_ratio, QualityReport};
use crate::model::{gaussian_latent, reference_cond, ModelWeights};
use crate::policy::{IndicatorMode, NoCachePolicy, PolicyConfig, TeaCachePolicy};
use crate::sampler::{run_sampler, trajectory_csv, NoiseSchedule, RunStats, SamplerConfig};
use crate::svg::{LinePlot, Series};
use crate::tensor::Tensor;

pub const REPORT_HEADER: &str =
    "seed,method,delta,mode,order,computed_steps,speedup,psnr_db,ssim,rel_l1,jaccard_oracle";

pub const SWEEP_HEADER: &str = "delta,runs,mean_computed_steps,std_computed_steps,mean_speedup,std_speedup,mean_psnr_db,std_psnr_db,mean_ssim,std_ssim,mean_rel_l1,std_rel_l1,mean_jaccard_oracle,std_jaccard_oracle";

/// A loaded model plus everything derived from the config.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub model: ModelWeights,
    pub cond: Tensor,
    pub schedule: NoiseSchedule,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let model = match &config.weights_path {
            Some(path) => {
                let w = ModelWeights::load(path)?;
                if *w.config() != config.model {
                    return Err(Error::Config {
                        line: 0,
                        message: format!(
                            "weights in {} were built for {:?}, config asks for {:?}",
                            path.display(),
                            w.config(),
                            config.model
                        ),
                    });
                }
                w
            }
            None => ModelWeights::new(config.model)?,
        };
        let schedule = config.schedule.build()?;
        let cond = reference_cond(&config.model);
        Ok(Self {
            config,
            model,
            cond,
            schedule,
        })
    }

    pub fn sampler_config(&self, seed: u64) -> SamplerConfig {
        SamplerConfig::new(self.schedule.clone(), seed)
    }

    pub fn steps(&self) -> usize {
        self.schedule.len()
    }

    /// The configured rescaler, if any. A configured path that does not exist is
    /// an error rather than a silent fallback to the identity.
    pub fn load_rescaler(&self) -> Result<Option<PolyRescaler>> {
        let Some(path) = &self.config.rescaler_path else {
            return Ok(None);
        };
        if !path.exists() {
            return Err(Error::MissingRescaler(path.clone()));
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        PolyRescaler::from_text(&text).map(Some)
    }

    pub fn policy_config(&self, delta: f64, rescaler: Option<&PolyRescaler>) -> PolicyConfig {
        PolicyConfig {
            delta,
            mode: self.config.mode,
            rescaler: rescaler.cloned(),
        }
    }

    fn grid(&self) -> (usize, usize) {
        (self.config.model.token_count, self.config.model.channel_dim)
    }
}

#[derive(Debug, Clone)]
pub struct CalibrationResult {
    pub rescaler: PolyRescaler,
    pub traces: Vec<DiffTrace>,
    pub fit_rmse: f64,
    pub identity_rmse: f64,
}

pub fn calibrate(exp: &Experiment) -> Result<CalibrationResult> {
    let traces = record_trace(
        &exp.model,
        &exp.sampler_config(0),
        exp.config.mode,
        &exp.config.calibration_seeds,
        &exp.cond,
    )?;
    let rescaler = fit_polynomial(&traces, exp.config.calibration_order)?;
    Ok(CalibrationResult {
        fit_rmse: fit_residual(&rescaler, &traces),
        identity_rmse: fit_residual(&PolyRescaler::identity(), &traces),
        rescaler,
        traces,
    })
}

/// Writes `rescaler.txt` and one `trace_seed<N>.csv` per calibration seed.
pub fn cmd_calibrate(exp: &Experiment, out_dir: &Path) -> Result<CalibrationResult> {
    ensure_dir(out_dir)?;
    let result = calibrate(exp)?;
    write_file(&out_dir.join("rescaler.txt"), &result.rescaler.to_text())?;
    for trace in &result.traces {
        write_file(
            &out_dir.join(format!("trace_seed{}.csv", trace.noise_seed)),
            &trace.to_csv(),
        )?;
    }
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Baseline,
    TeaCache,
    Uniform,
    Reduced,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::TeaCache => "teacache",
            Method::Uniform => "uniform",
            Method::Reduced => "reduced",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub seed: u64,
    pub method: Method,
    pub delta: Option<f64>,
    pub mode: Option<IndicatorMode>,
    pub order: Option<usize>,
    pub computed_steps: usize,
    pub speedup: f64,
    pub quality: QualityReport,
    pub jaccard_oracle: Option<f64>,
}

impl ReportRow {
    fn csv_line(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.seed,
            self.method.as_str(),
            opt(self.delta.map(|d| d.to_string())),
            opt(self.mode.map(|m| m.to_string())),
            opt(self.order.map(|o| o.to_string())),
            self.computed_steps,
            self.speedup,
            self.quality.psnr,
            self.quality.ssim,
            self.quality.rel_l1,
            opt(self.jaccard_oracle.map(|j| j.to_string())),
        )
    }
}

pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

/// Uncached reference for one seed: final latent plus true output differences.
pub struct SeedBaseline {
    pub seed: u64,
    pub latent: Tensor,
    pub stats: RunStats,
    pub output_diffs: Vec<f64>,
}

pub fn seed_baseline(exp: &Experiment, seed: u64) -> Result<SeedBaseline> {
    let cfg = exp.sampler_config(seed).with_trajectory();
    let outcome = run_sampler(&exp.model, &cfg, &mut NoCachePolicy::new(), &exp.cond)?;
    let output_diffs = outcome
        .trajectory
        .expect("trajectory requested")
        .iter()
        .skip(1)
        .map(|r| r.true_output_diff.expect("every step computed"))
        .collect();
    Ok(SeedBaseline {
        seed,
        latent: outcome.latent,
        stats: outcome.stats,
        output_diffs,
    })
}

fn quality_row(
    exp: &Experiment,
    base: &SeedBaseline,
    method: Method,
    latent: &Tensor,
    stats: &RunStats,
    oracle: Option<&ScheduleSet>,
) -> Result<ReportRow> {
    let (rows, cols) = exp.grid();
    let jaccard = match oracle {
        Some(o) if stats.steps == o.steps() => {
            Some(schedule_jaccard(&ScheduleSet::from_stats(stats)?, o))
        }
        _ => None,
    };
    Ok(ReportRow {
        seed: base.seed,
        method,
        delta: None,
        mode: None,
        order: None,
        computed_steps: stats.computed_steps,
        speedup: speedup_ratio(stats, exp.steps()),
        quality: QualityReport::compare(&base.latent, latent, rows, cols)?,
        jaccard_oracle: jaccard,
    })
}

/// TeaCache row for one seed at `delta`.
pub fn teacache_row(
    exp: &Experiment,
    base: &SeedBaseline,
    delta: f64,
    rescaler: Option<&PolyRescaler>,
) -> Result<ReportRow> {
    let policy = exp.policy_config(delta, rescaler);
    policy.validate()?;
    let outcome = run_sampler(
        &exp.model,
        &exp.sampler_config(base.seed),
        &mut TeaCachePolicy::new(policy),
        &exp.cond,
    )?;
    let oracle = oracle_schedule(&base.output_diffs, delta);
    let mut row = quality_row(
        exp,
        base,
        Method::TeaCache,
        &outcome.latent,
        &outcome.stats,
        Some(&oracle),
    )?;
    row.delta = Some(delta);
    row.mode = Some(exp.config.mode);
    row.order = rescaler.map(PolyRescaler::order);
    Ok(row)
}

/// Every configured method for one seed at `delta`.
pub fn seed_rows(
    exp: &Experiment,
    base: &SeedBaseline,
    delta: f64,
    rescaler: Option<&PolyRescaler>,
) -> Result<Vec<ReportRow>> {
    let oracle = oracle_schedule(&base.output_diffs, delta);
    let mut rows = vec![quality_row(
        exp,
        base,
        Method::Baseline,
        &base.latent,
        &base.stats,
        Some(&oracle),
    )?];
    rows.push(teacache_row(exp, base, delta, rescaler)?);
    if let Some(k) = exp.config.uniform_interval {
        let out = run_uniform(&exp.model, &exp.sampler_config(base.seed), k, &exp.cond)?;
        rows.push(quality_row(
            exp,
            base,
            Method::Uniform,
            &out.latent,
            &out.stats,
            Some(&oracle),
        )?);
    }
    if let Some(n) = exp.config.reduced_steps {
        let x_start = gaussian_latent(&exp.config.model, base.seed);
        let (latent, stats) =
            run_reduced_timesteps(&exp.model, &exp.schedule, &x_start, n, &exp.cond, base.seed)?;
        rows.push(quality_row(
            exp,
            base,
            Method::Reduced,
            &latent,
            &stats,
            None,
        )?);
    }
    Ok(rows)
}

fn sort_rows(rows: &mut [ReportRow]) {
    rows.sort_by(|a, b| {
        (a.seed, a.method).cmp(&(b.seed, b.method)).then(
            a.delta
                .partial_cmp(&b.delta)
                .unwrap_or(std::cmp::Ordering::Equal),
        )
    });
}

pub fn run_report(exp: &Experiment, delta: f64) -> Result<Vec<ReportRow>> {
    let rescaler = exp.load_rescaler()?;
    let mut rows = Vec::new();
    for &seed in &exp.config.seeds {
        let base = seed_baseline(exp, seed)?;
        rows.extend(seed_rows(exp, &base, delta, rescaler.as_ref())?);
    }
    sort_rows(&mut rows);
    Ok(rows)
}

/// Writes `report.csv` for the configured δ.
pub fn cmd_run(exp: &Experiment, out_dir: &Path) -> Result<Vec<ReportRow>> {
    let rows = run_report(exp, exp.config.delta)?;
    ensure_dir(out_dir)?;
    write_file(&out_dir.join("report.csv"), &report_csv(&rows))?;
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Population statistics. Infinite samples make the mean infinite; the
    /// spread is then 0 if every sample is infinite and NaN otherwise.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let infinite = values.iter().filter(|v| v.is_infinite()).count();
        if infinite > 0 {
            let std = if infinite == values.len() {
                0.0
            } else {
                f64::NAN
            };
            return Self {
                mean: f64::INFINITY,
                std,
            };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub delta: f64,
    pub runs: usize,
    pub computed_steps: MeanStd,
    pub speedup: MeanStd,
    pub psnr: MeanStd,
    pub ssim: MeanStd,
    pub rel_l1: MeanStd,
    pub jaccard_oracle: MeanStd,
}

impl SweepRow {
    fn aggregate(delta: f64, rows: &[&ReportRow]) -> Self {
        let col = |f: &dyn Fn(&ReportRow) -> f64| {
            MeanStd::of(&rows.iter().map(|r| f(r)).collect::<Vec<_>>())
        };
        Self {
            delta,
            runs: rows.len(),
            computed_steps: col(&|r| r.computed_steps as f64),
            speedup: col(&|r| r.speedup),
            psnr: col(&|r| r.quality.psnr),
            ssim: col(&|r| r.quality.ssim),
            rel_l1: col(&|r| r.quality.rel_l1),
            jaccard_oracle: col(&|r| r.jaccard_oracle.unwrap_or(f64::NAN)),
        }
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{},{}", r.delta, r.runs);
        for m in [
            &r.computed_steps,
            &r.speedup,
            &r.psnr,
            &r.ssim,
            &r.rel_l1,
            &r.jaccard_oracle,
        ] {
            let _ = write!(out, ",{},{}", m.mean, m.std);
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<ReportRow>,
    pub aggregate: Vec<SweepRow>,
}

/// Runs the TeaCache policy over the δ grid on every seed.
pub fn sweep(exp: &Experiment) -> Result<SweepResult> {
    let rescaler = exp.load_rescaler()?;
    let baselines = exp
        .config
        .seeds
        .iter()
        .map(|&s| seed_baseline(exp, s))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut aggregate = Vec::new();
    for &delta in &exp.config.sweep_deltas {
        let per_delta = baselines
            .iter()
            .map(|b| teacache_row(exp, b, delta, rescaler.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        aggregate.push(SweepRow::aggregate(
            delta,
            &per_delta.iter().collect::<Vec<_>>(),
        ));
        rows.extend(per_delta);
    }
    sort_rows(&mut rows);
    Ok(SweepResult { rows, aggregate })
}

/// Writes `sweep_runs.csv`, `sweep.csv`, `quality_vs_speedup.svg` and
/// `step_differences.svg`.
pub fn cmd_sweep(exp: &Experiment, out_dir: &Path) -> Result<SweepResult> {
    let result = sweep(exp)?;
    ensure_dir(out_dir)?;
    write_file(&out_dir.join("sweep_runs.csv"), &report_csv(&result.rows))?;
    write_file(&out_dir.join("sweep.csv"), &sweep_csv(&result.aggregate))?;
    write_file(
        &out_dir.join("quality_vs_speedup.svg"),
        &quality_plot(&result.aggregate).render(),
    )?;
    write_file(
        &out_dir.join("step_differences.svg"),
        &step_difference_plot(exp, exp.config.seeds[0])?.render(),
    )?;
    Ok(result)
}

pub fn quality_plot(rows: &[SweepRow]) -> LinePlot {
    LinePlot {
        title: "Quality vs. speedup (mean over seeds)".into(),
        x_label: "speedup (T / model evaluations)".into(),
        y_label: "PSNR vs. uncached (dB)".into(),
        series: vec![Series {
            name: "teacache".into(),
            points: rows.iter().map(|r| (r.speedup.mean, r.psnr.mean)).collect(),
        }],
    }
}

/// Per-step relative L1 change of each indicator and of the true output on an
/// uncached run.
pub fn step_difference_plot(exp: &Experiment, seed: u64) -> Result<LinePlot> {
    let cfg = exp.sampler_config(seed);
    let mut series = Vec::new();
    let mut output = None;
    for mode in IndicatorMode::ALL {
        let trace = record_trace(&exp.model, &cfg, mode, &[seed], &exp.cond)?.remove(0);
        let idx = |i: usize| i as f64 + 1.0;
        series.push(Series {
            name: mode.to_string(),
            points: trace
                .points
                .iter()
                .enumerate()
                .map(|(i, p)| (idx(i), p.x))
                .collect(),
        });
        output.get_or_insert_with(|| Series {
            name: "model output".into(),
            points: trace
                .points
                .iter()
                .enumerate()
                .map(|(i, p)| (idx(i), p.y))
                .collect(),
        });
    }
    series.insert(0, output.expect("three modes recorded"));
    Ok(LinePlot {
        title: format!("Per-step relative L1 change (seed {seed})"),
        x_label: "executed reverse step".into(),
        y_label: "relative L1 vs. previous step".into(),
        series,
    })
}

/// Writes `trajectory_seed<N>.csv` for every seed under the configured policy.
pub fn cmd_trace_dump(exp: &Experiment, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let rescaler = exp.load_rescaler()?;
    let policy = exp.policy_config(exp.config.delta, rescaler.as_ref());
    policy.validate()?;
    ensure_dir(out_dir)?;
    let mut written = Vec::new();
    for &seed in &exp.config.seeds {
        let cfg = exp.sampler_config(seed).with_trajectory();
        let outcome = run_sampler(
            &exp.model,
            &cfg,
            &mut TeaCachePolicy::new(policy.clone()),
            &exp.cond,
        )?;
        let path = out_dir.join(format!("trajectory_seed{seed}.csv"));
        write_file(
            &path,
            &trajectory_csv(outcome.trajectory.as_ref().expect("requested")),
        )?;
        written.push(path);
    }
    Ok(written)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}
