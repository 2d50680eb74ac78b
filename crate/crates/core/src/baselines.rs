//! Comparators: fixed-interval caching, fewer sampling steps, and the schedule
//! an oracle with access to true output differences would pick.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::model::ModelWeights;
use crate::policy::{accumulate_step, CachePolicy, CacheState, Decision, DecisionInfo, StepInput};
use crate::sampler::{
    denoise_step, linear_beta_schedule, run_sampler, NoiseSchedule, RunStats, SampleOutcome,
    SamplerConfig,
};
use crate::tensor::Tensor;

/// Steps at which the model runs, out of `steps` total.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleSet {
    steps: usize,
    computed: BTreeSet<usize>,
}

impl ScheduleSet {
    pub fn new(steps: usize, computed: impl IntoIterator<Item = usize>) -> Result<Self> {
        let computed: BTreeSet<usize> = computed.into_iter().collect();
        if steps == 0 || !computed.contains(&(steps - 1)) {
            return Err(Error::BadRange(format!(
                "schedule over {steps} steps must contain step {}",
                steps.saturating_sub(1)
            )));
        }
        if let Some(&bad) = computed.iter().find(|&&s| s >= steps) {
            return Err(Error::BadRange(format!("step {bad} outside [0, {steps})")));
        }
        Ok(Self { steps, computed })
    }

    pub fn from_stats(stats: &RunStats) -> Result<Self> {
        Self::new(stats.steps, stats.computed_set())
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn computed(&self) -> &BTreeSet<usize> {
        &self.computed
    }

    pub fn len(&self) -> usize {
        self.computed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.computed.is_empty()
    }

    pub fn contains(&self, step: usize) -> bool {
        self.computed.contains(&step)
    }
}

/// Computes at `T−1, T−1−k, T−1−2k, ...`.
pub fn uniform_cache_schedule(steps: usize, interval: usize) -> Result<ScheduleSet> {
    if interval == 0 || interval > steps {
        return Err(Error::BadInterval { interval, steps });
    }
    ScheduleSet::new(steps, (0..steps).rev().step_by(interval))
}

/// Follows a precomputed schedule, reusing the cached residual elsewhere.
#[derive(Debug, Clone)]
pub struct ScheduledPolicy {
    schedule: ScheduleSet,
    state: CacheState,
}

impl ScheduledPolicy {
    pub fn new(schedule: ScheduleSet) -> Self {
        Self {
            schedule,
            state: CacheState::default(),
        }
    }
}

impl CachePolicy for ScheduledPolicy {
    fn decide(&mut self, input: &StepInput<'_>) -> Result<DecisionInfo> {
        let decision = if self.schedule.contains(input.step) {
            Decision::Refresh
        } else {
            Decision::Reuse
        };
        Ok(DecisionInfo {
            decision,
            indicator_diff: None,
            rescaled_diff: None,
            accumulator: 0.0,
        })
    }

    fn state(&self) -> &CacheState {
        &self.state
    }

    fn state_mut(&mut self) -> &mut CacheState {
        &mut self.state
    }
}

pub fn run_uniform(
    model: &ModelWeights,
    config: &SamplerConfig,
    interval: usize,
    cond: &Tensor,
) -> Result<SampleOutcome> {
    let schedule = uniform_cache_schedule(config.schedule.len(), interval)?;
    run_sampler(model, config, &mut ScheduledPolicy::new(schedule), cond)
}

/// Uncached loop over an explicit schedule from a given starting latent.
pub fn run_uncached_from(
    model: &ModelWeights,
    schedule: &NoiseSchedule,
    x_start: &Tensor,
    cond: &Tensor,
    noise_seed: u64,
) -> Result<(Tensor, RunStats)> {
    let cost = model.flops_per_eval();
    let mut x = x_start.clone();
    let mut decisions = Vec::with_capacity(schedule.len());
    for step in (0..schedule.len()).rev() {
        let emb = model.timestep_embedding(schedule.timesteps[step]);
        let eps = model.forward(&x, &emb, cond)?;
        x = denoise_step(&x, &eps, step, schedule)?;
        decisions.push((step, Decision::Refresh));
    }
    let n = schedule.len();
    Ok((
        x,
        RunStats {
            steps: n,
            computed_steps: n,
            reused_steps: 0,
            per_step_decisions: decisions,
            total_model_evals: n,
            flops_proxy: n as u64 * cost,
            noise_seed,
        },
    ))
}

/// Samples with a fresh `reduced_steps` schedule over the same beta range.
pub fn run_reduced_timesteps(
    model: &ModelWeights,
    base: &NoiseSchedule,
    x_start: &Tensor,
    reduced_steps: usize,
    cond: &Tensor,
    noise_seed: u64,
) -> Result<(Tensor, RunStats)> {
    if reduced_steps < 2 || reduced_steps > base.len() {
        return Err(Error::BadRange(format!(
            "reduced steps {reduced_steps} outside [2, {}]",
            base.len()
        )));
    }
    let schedule = linear_beta_schedule(reduced_steps, base.beta_start, base.beta_end)?;
    run_uncached_from(model, &schedule, x_start, cond, noise_seed)
}

/// The accumulate/threshold recursion applied to true output differences
/// (execution order, `T − 1` values).
pub fn oracle_schedule(output_diffs: &[f64], delta: f64) -> ScheduleSet {
    let steps = output_diffs.len() + 1;
    let mut computed = vec![steps - 1];
    let mut acc = 0.0;
    for (i, &d) in output_diffs.iter().enumerate() {
        if accumulate_step(&mut acc, d.max(0.0), delta) == Decision::Refresh {
            computed.push(steps - 2 - i);
        }
    }
    ScheduleSet::new(steps, computed).expect("first step always present")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{gaussian_latent, reference_cond, ModelConfig};
    use crate::sampler::run_baseline;

    #[test]
    fn uniform_examples() {
        assert_eq!(uniform_cache_schedule(7, 1).unwrap().len(), 7);
        let s = uniform_cache_schedule(10, 3).unwrap();
        assert_eq!(
            s.computed().iter().copied().collect::<Vec<_>>(),
            vec![0, 3, 6, 9]
        );
        let s = uniform_cache_schedule(10, 10).unwrap();
        assert_eq!(s.computed().iter().copied().collect::<Vec<_>>(), vec![9]);
        assert!(matches!(
            uniform_cache_schedule(10, 0),
            Err(Error::BadInterval { .. })
        ));
        assert!(matches!(
            uniform_cache_schedule(10, 11),
            Err(Error::BadInterval { .. })
        ));
    }

    #[test]
    fn schedule_set_invariants() {
        assert!(ScheduleSet::new(5, [0, 2]).is_err());
        assert!(ScheduleSet::new(5, [4, 5]).is_err());
        assert!(ScheduleSet::new(5, [4, 1]).is_ok());
    }

    #[test]
    fn oracle_examples() {
        let s = oracle_schedule(&[0.05, 0.04, 0.03], 0.1);
        assert_eq!(s.computed().iter().copied().collect::<Vec<_>>(), vec![0, 3]);
        assert_eq!(oracle_schedule(&[0.2, 0.01, 0.3], 0.0).len(), 4);
        assert_eq!(oracle_schedule(&[0.0; 6], 0.0).len(), 1);
    }

    fn reference() -> (ModelWeights, Tensor, SamplerConfig) {
        let m = ModelWeights::new(ModelConfig::reference()).unwrap();
        let cond = reference_cond(m.config());
        let cfg = SamplerConfig::new(linear_beta_schedule(30, 1e-4, 0.02).unwrap(), 4);
        (m, cond, cfg)
    }

    #[test]
    fn uniform_runs() {
        let (m, cond, cfg) = reference();
        let (base, _) = run_baseline(&m, &cfg, &cond).unwrap();
        let one = run_uniform(&m, &cfg, 1, &cond).unwrap();
        assert!(one.latent.bitwise_eq(&base));
        for k in [2, 3, 7] {
            let out = run_uniform(&m, &cfg, k, &cond).unwrap();
            assert_eq!(
                out.stats.computed_steps,
                uniform_cache_schedule(30, k).unwrap().len()
            );
            assert_eq!(out.stats.computed_steps + out.stats.reused_steps, 30);
        }
    }

    #[test]
    fn reduced_runs() {
        let (m, cond, cfg) = reference();
        let (base, _) = run_baseline(&m, &cfg, &cond).unwrap();
        let x_t = gaussian_latent(m.config(), cfg.noise_seed);
        let (same, stats) = run_reduced_timesteps(&m, &cfg.schedule, &x_t, 30, &cond, 4).unwrap();
        assert!(same.bitwise_eq(&base));
        assert_eq!(stats.total_model_evals, 30);
        let (_, half) = run_reduced_timesteps(&m, &cfg.schedule, &x_t, 15, &cond, 4).unwrap();
        assert_eq!(half.total_model_evals, 15);
        assert!(run_reduced_timesteps(&m, &cfg.schedule, &x_t, 1, &cond, 4).is_err());
        assert!(run_reduced_timesteps(&m, &cfg.schedule, &x_t, 31, &cond, 4).is_err());
    }

    #[test]
    fn golden_uniform_and_teacache_runs() {
        let m = ModelWeights::new(ModelConfig::reference()).unwrap();
        let cond = reference_cond(m.config());
        let cfg = SamplerConfig::new(
            crate::sampler::linear_beta_schedule(30, 1e-4, 0.02).unwrap(),
            3,
        );
        let (base, _) = run_baseline(&m, &cfg, &cond).unwrap();
        let uniform = run_uniform(&m, &cfg, 2, &cond).unwrap();
        assert_eq!(uniform.stats.computed_steps, 15);
        let p = crate::metrics::psnr(&base, &uniform.latent, base.max() - base.min()).unwrap();
        assert!((p - 69.61502813750292).abs() < 1e-6, "{p}");

        let policy =
            crate::policy::PolicyConfig::new(0.1, crate::policy::IndicatorMode::ModulatedInput);
        let out = run_sampler(
            &m,
            &cfg,
            &mut crate::policy::TeaCachePolicy::new(policy),
            &cond,
        )
        .unwrap();
        assert!(out.stats.computed_steps > 1 && out.stats.computed_steps < 30);
        assert_eq!(out.stats.computed_set(), vec![5, 14, 21, 29]);
    }
}
