//! Noise schedules and the deterministic (η = 0) reverse loop.
//!
//! Steps are 0-based: step `k` uses `alphas[k]` and `alpha_bars[k]`, and the
//! reverse update at step `k` maps `x_k` to `x_{k-1}` with `ᾱ_{-1} = 1`. The
//! loop runs `k = T-1, ..., 0`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{gaussian_latent, ModelWeights};
use crate::policy::{apply_cached, compute_and_cache, CachePolicy, Decision, StepInput};
use crate::tensor::{rel_l1_distance, Tensor};

/// Training-time horizon the model's timestep embedding is defined over.
pub const TRAIN_TIMESTEPS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    pub alphas: Vec<f64>,
    pub alpha_bars: Vec<f64>,
    /// Timestep value handed to the model at each step.
    pub timesteps: Vec<f64>,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl NoiseSchedule {
    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// Identifier used in calibration provenance.
    pub fn id(&self) -> String {
        format!(
            "linear-T{}-{:?}-{:?}",
            self.len(),
            self.beta_start,
            self.beta_end
        )
    }

    fn alpha_bar_prev(&self, step: usize) -> f64 {
        if step == 0 {
            1.0
        } else {
            self.alpha_bars[step - 1]
        }
    }

    fn check_step(&self, step: usize) -> Result<()> {
        if step >= self.len() {
            return Err(Error::BadRange(format!(
                "step {step} outside schedule of length {}",
                self.len()
            )));
        }
        Ok(())
    }
}

/// Linear betas from `beta_start` to `beta_end` inclusive; model timesteps
/// spread evenly over the training horizon.
pub fn linear_beta_schedule(steps: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule> {
    if steps < 2 {
        return Err(Error::BadRange(format!("need T >= 2, got {steps}")));
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(Error::BadRange(format!(
            "need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}"
        )));
    }
    let mut alphas = Vec::with_capacity(steps);
    let mut alpha_bars = Vec::with_capacity(steps);
    let mut acc = 1.0;
    for k in 0..steps {
        let beta = beta_start + (beta_end - beta_start) * k as f64 / (steps - 1) as f64;
        let alpha = 1.0 - beta;
        acc *= alpha;
        alphas.push(alpha);
        alpha_bars.push(acc);
    }
    let timesteps = (0..steps)
        .map(|k| (k * TRAIN_TIMESTEPS / steps) as f64)
        .collect();
    Ok(NoiseSchedule {
        alphas,
        alpha_bars,
        timesteps,
        beta_start,
        beta_end,
    })
}

/// One forward diffusion step: `√α_k · x_prev + √(1−α_k) · noise`.
pub fn forward_diffuse(
    x_prev: &Tensor,
    step: usize,
    schedule: &NoiseSchedule,
    noise: &Tensor,
) -> Result<Tensor> {
    schedule.check_step(step)?;
    let a = schedule.alphas[step];
    let (sa, sn) = (a.sqrt(), (1.0 - a).sqrt());
    x_prev.zip_with(noise, |x, z| sa * x + sn * z)
}

/// Deterministic reverse update with the model output read as predicted noise.
pub fn denoise_step(
    x_t: &Tensor,
    eps: &Tensor,
    step: usize,
    schedule: &NoiseSchedule,
) -> Result<Tensor> {
    schedule.check_step(step)?;
    let ab = schedule.alpha_bars[step];
    let (sab, s1ab) = (ab.sqrt(), (1.0 - ab).sqrt());
    let x0 = x_t.zip_with(eps, |x, e| (x - s1ab * e) / sab)?;
    if step == 0 {
        return Ok(x0);
    }
    let abp = schedule.alpha_bar_prev(step);
    let (sabp, s1abp) = (abp.sqrt(), (1.0 - abp).sqrt());
    x0.zip_with(eps, |x, e| sabp * x + s1abp * e)
}

#[derive(Debug, Clone)]
pub struct SamplerConfig {
    pub schedule: NoiseSchedule,
    pub noise_seed: u64,
    pub record_trajectory: bool,
}

impl SamplerConfig {
    pub fn new(schedule: NoiseSchedule, noise_seed: u64) -> Self {
        Self {
            schedule,
            noise_seed,
            record_trajectory: false,
        }
    }

    pub fn with_trajectory(mut self) -> Self {
        self.record_trajectory = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub steps: usize,
    pub computed_steps: usize,
    pub reused_steps: usize,
    /// `(step, decision)` in execution order.
    pub per_step_decisions: Vec<(usize, Decision)>,
    pub total_model_evals: usize,
    pub flops_proxy: u64,
    pub noise_seed: u64,
}

impl RunStats {
    fn new(steps: usize, noise_seed: u64) -> Self {
        Self {
            steps,
            computed_steps: 0,
            reused_steps: 0,
            per_step_decisions: Vec::with_capacity(steps),
            total_model_evals: 0,
            flops_proxy: 0,
            noise_seed,
        }
    }

    fn record(&mut self, step: usize, decision: Decision, per_eval_cost: u64) {
        self.per_step_decisions.push((step, decision));
        match decision {
            Decision::Refresh => {
                self.computed_steps += 1;
                self.total_model_evals += 1;
                self.flops_proxy += per_eval_cost;
            }
            Decision::Reuse => self.reused_steps += 1,
        }
    }

    /// Steps at which the model ran, ascending.
    pub fn computed_set(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .per_step_decisions
            .iter()
            .filter(|(_, d)| *d == Decision::Refresh)
            .map(|(s, _)| *s)
            .collect();
        v.sort_unstable();
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub x_t: Tensor,
    /// Model output, or the cached estimate on reused steps.
    pub output: Tensor,
    pub decision: Decision,
    pub indicator_diff: Option<f64>,
    pub rescaled_diff: Option<f64>,
    pub accumulator: f64,
    /// Relative L1 change of the true output against the previous executed
    /// step, present only when both steps ran the model.
    pub true_output_diff: Option<f64>,
}

pub type SampleTrajectory = Vec<StepRecord>;

#[derive(Debug, Clone)]
pub struct SampleOutcome {
    pub latent: Tensor,
    pub stats: RunStats,
    pub trajectory: Option<SampleTrajectory>,
}

/// Reverse loop delegating every refresh/reuse decision to `policy`.
pub fn run_sampler(
    model: &ModelWeights,
    config: &SamplerConfig,
    policy: &mut dyn CachePolicy,
    cond: &Tensor,
) -> Result<SampleOutcome> {
    let schedule = &config.schedule;
    if schedule.len() < 2 {
        return Err(Error::BadRange("sampler needs T >= 2".into()));
    }
    let cost = model.flops_per_eval();
    let mut x = gaussian_latent(model.config(), config.noise_seed);
    let mut stats = RunStats::new(schedule.len(), config.noise_seed);
    let mut trajectory = config.record_trajectory.then(Vec::new);
    let mut prev_true_output: Option<Tensor> = None;

    for step in (0..schedule.len()).rev() {
        let emb = model.timestep_embedding(schedule.timesteps[step]);
        let input = StepInput {
            model,
            x_t: &x,
            step,
            emb: &emb,
            cond,
        };
        let info = policy.decide(&input)?;
        let output = match info.decision {
            Decision::Refresh => {
                compute_and_cache(model, &x, &emb, cond, step, policy.state_mut())?
            }
            Decision::Reuse => apply_cached(&x, policy.state())?,
        };
        stats.record(step, info.decision, cost);

        if let Some(traj) = trajectory.as_mut() {
            let true_output_diff = match (info.decision, &prev_true_output) {
                (Decision::Refresh, Some(prev)) => Some(rel_l1_distance(&output, prev)?),
                _ => None,
            };
            traj.push(StepRecord {
                step,
                x_t: x.clone(),
                output: output.clone(),
                decision: info.decision,
                indicator_diff: info.indicator_diff,
                rescaled_diff: info.rescaled_diff,
                accumulator: info.accumulator,
                true_output_diff,
            });
            prev_true_output = (info.decision == Decision::Refresh).then(|| output.clone());
        }
        x = denoise_step(&x, &output, step, schedule)?;
    }
    Ok(SampleOutcome {
        latent: x,
        stats,
        trajectory,
    })
}

/// Uncached reference loop that calls the model directly at every step.
pub fn run_baseline(
    model: &ModelWeights,
    config: &SamplerConfig,
    cond: &Tensor,
) -> Result<(Tensor, RunStats)> {
    let schedule = &config.schedule;
    let cost = model.flops_per_eval();
    let mut x = gaussian_latent(model.config(), config.noise_seed);
    let mut stats = RunStats::new(schedule.len(), config.noise_seed);
    for step in (0..schedule.len()).rev() {
        let emb = model.timestep_embedding(schedule.timesteps[step]);
        let eps = model.forward(&x, &emb, cond)?;
        stats.record(step, Decision::Refresh, cost);
        x = denoise_step(&x, &eps, step, schedule)?;
    }
    Ok((x, stats))
}

pub const TRAJECTORY_HEADER: &str =
    "t,decision,indicator_diff,rescaled_diff,accumulator,true_output_diff";

/// One CSV row per step; missing values are left blank.
pub fn trajectory_csv(trajectory: &[StepRecord]) -> String {
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    let mut out = String::new();
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for r in trajectory {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.step,
            r.decision.label(),
            opt(r.indicator_diff),
            opt(r.rescaled_diff),
            r.accumulator,
            opt(r.true_output_diff)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{reference_cond, ModelConfig};
    use crate::policy::{IndicatorMode, PolicyConfig, TeaCachePolicy};

    #[test]
    fn linear_schedule_examples() {
        let s = linear_beta_schedule(2, 0.1, 0.1).unwrap();
        assert_eq!(s.alphas, vec![0.9, 0.9]);
        assert!((s.alpha_bars[0] - 0.9).abs() < 1e-15);
        assert!((s.alpha_bars[1] - 0.81).abs() < 1e-15);
        assert!(matches!(
            linear_beta_schedule(10, 0.2, 0.1),
            Err(Error::BadRange(_))
        ));
        assert!(linear_beta_schedule(1, 0.1, 0.1).is_err());
        assert!(linear_beta_schedule(10, 0.0, 0.1).is_err());
        assert!(linear_beta_schedule(10, 0.1, 1.0).is_err());
        let s = linear_beta_schedule(50, 1e-4, 0.02).unwrap();
        assert!(s.alpha_bars.windows(2).all(|w| w[1] < w[0]));
        assert!((s.alphas[49] - 0.98).abs() < 1e-15);
    }

    #[test]
    fn forward_diffuse_examples() {
        let mut s = linear_beta_schedule(2, 0.25, 0.25).unwrap();
        let x = Tensor::from_slice(&[1.0, 0.0]).unwrap();
        let z = Tensor::from_slice(&[0.0, 2.0]).unwrap();
        let out = forward_diffuse(&x, 0, &s, &z).unwrap();
        assert!((out.data()[0] - 0.75f64.sqrt()).abs() < 1e-15);
        assert!((out.data()[1] - 1.0).abs() < 1e-15);

        let zero = Tensor::zeros(&[2]);
        let out = forward_diffuse(&x, 1, &s, &zero).unwrap();
        assert_eq!(out.data()[0], 0.75f64.sqrt());

        s.alphas[0] = 1.0 - 1e-12;
        let x = Tensor::from_slice(&[0.3, -0.9, 1.0]).unwrap();
        let z = Tensor::from_slice(&[1.0, -1.0, 0.5]).unwrap();
        let out = forward_diffuse(&x, 0, &s, &z).unwrap();
        for (a, b) in out.data().iter().zip(x.data()) {
            assert!((a - b).abs() < 1e-5);
        }
        assert!(forward_diffuse(&x, 0, &s, &Tensor::zeros(&[2])).is_err());
    }

    #[test]
    fn denoise_step_examples() {
        let s = linear_beta_schedule(10, 1e-3, 0.05).unwrap();
        let x = Tensor::from_slice(&[0.5, -1.5, 2.0]).unwrap();
        let out = denoise_step(&x, &Tensor::zeros(&[3]), 5, &s).unwrap();
        let ratio = (s.alpha_bars[4] / s.alpha_bars[5]).sqrt();
        for (o, xi) in out.data().iter().zip(x.data()) {
            assert!((o - ratio * xi).abs() < 1e-14);
        }

        // Building x_k from (x0, eps) and stepping at k = 0 recovers x0.
        let x0 = Tensor::from_slice(&[0.1, 0.7, -0.4]).unwrap();
        let eps = Tensor::from_slice(&[1.2, -0.3, 0.8]).unwrap();
        for k in [0usize, 3, 9] {
            let ab = s.alpha_bars[k];
            let xk = x0
                .zip_with(&eps, |a, e| ab.sqrt() * a + (1.0 - ab).sqrt() * e)
                .unwrap();
            let recovered = xk
                .zip_with(&eps, |x, e| (x - (1.0 - ab).sqrt() * e) / ab.sqrt())
                .unwrap();
            for (a, b) in recovered.data().iter().zip(x0.data()) {
                assert!((a - b).abs() < 1e-10);
            }
            if k == 0 {
                let out = denoise_step(&xk, &eps, 0, &s).unwrap();
                for (a, b) in out.data().iter().zip(x0.data()) {
                    assert!((a - b).abs() < 1e-10);
                }
            }
        }
        assert!(denoise_step(&x, &Tensor::zeros(&[2]), 1, &s).is_err());
    }

    fn reference() -> (ModelWeights, Tensor, NoiseSchedule) {
        let m = ModelWeights::new(ModelConfig::reference()).unwrap();
        let cond = reference_cond(m.config());
        (m, cond, linear_beta_schedule(30, 1e-4, 0.02).unwrap())
    }

    #[test]
    fn zero_threshold_matches_baseline_step_by_step() {
        let (m, cond, s) = reference();
        let cfg = SamplerConfig::new(s, 3).with_trajectory();
        let mut policy = TeaCachePolicy::new(PolicyConfig::new(0.0, IndicatorMode::ModulatedInput));
        let out = run_sampler(&m, &cfg, &mut policy, &cond).unwrap();
        let (base, base_stats) = run_baseline(&m, &cfg, &cond).unwrap();
        assert!(out.latent.bitwise_eq(&base));
        assert_eq!(out.stats.computed_steps, 30);
        assert_eq!(base_stats.computed_steps, 30);
        let traj = out.trajectory.unwrap();
        assert_eq!(traj.len(), 30);
        assert!(traj.iter().skip(1).all(|r| r.true_output_diff.is_some()));
    }

    #[test]
    fn infinite_threshold_computes_once() {
        let (m, cond, s) = reference();
        let cfg = SamplerConfig::new(s, 3);
        let mut policy = TeaCachePolicy::new(PolicyConfig::new(
            f64::INFINITY,
            IndicatorMode::ModulatedInput,
        ));
        let out = run_sampler(&m, &cfg, &mut policy, &cond).unwrap();
        assert_eq!(out.stats.computed_steps, 1);
        assert_eq!(out.stats.reused_steps, 29);
        assert_eq!(out.stats.per_step_decisions[0], (29, Decision::Refresh));
        assert_eq!(out.stats.total_model_evals, 1);
    }

    #[test]
    fn trajectory_csv_layout() {
        let (m, cond, s) = reference();
        let cfg = SamplerConfig::new(s, 1).with_trajectory();
        let mut policy = TeaCachePolicy::new(PolicyConfig::new(0.1, IndicatorMode::ModulatedInput));
        let out = run_sampler(&m, &cfg, &mut policy, &cond).unwrap();
        let csv = trajectory_csv(out.trajectory.as_ref().unwrap());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], TRAJECTORY_HEADER);
        assert_eq!(lines.len(), 31);
        assert!(lines[1].starts_with("29,computed,,,0,"));
        assert!(lines.iter().skip(1).all(|l| l.split(',').count() == 6));
    }

    #[test]
    fn denoise_step_golden() {
        let config = ModelConfig::reference();
        let sched = linear_beta_schedule(10, 1e-4, 0.02).unwrap();
        let x = crate::model::gaussian_latent(&config, 5);
        let eps = crate::model::gaussian_latent(&config, 6);
        let last = denoise_step(&x, &eps, 9, &sched).unwrap();
        let first = denoise_step(&x, &eps, 0, &sched).unwrap();
        assert!((last.checksum() - 91.96416344133374).abs() < 1e-9);
        assert!((first.checksum() - 73.39199007448418).abs() < 1e-9);
    }
}
