//! Timestep-embedding-aware caching policy.
//!
//! Each step compares an indicator (timestep embedding, noisy input, or the
//! block-0 modulated input) against the previous step's, optionally maps the
//! relative L1 change through a fitted polynomial, and accumulates it. The model
//! is re-run once the accumulated value strictly exceeds `delta`; otherwise the
//! cached residual `O − x` from the last computed step is added to the current
//! latent.

use std::fmt;
use std::str::FromStr;

use crate::calibration::PolyRescaler;
use crate::error::{Error, Result};
use crate::model::{ModelWeights, TimestepEmbedding};
use crate::tensor::{rel_l1_distance, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    Refresh,
    Reuse,
}

impl Decision {
    pub fn label(self) -> &'static str {
        match self {
            Decision::Refresh => "computed",
            Decision::Reuse => "reused",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IndicatorMode {
    TimestepEmbedding,
    NoisyInput,
    ModulatedInput,
}

impl IndicatorMode {
    pub const ALL: [IndicatorMode; 3] = [
        IndicatorMode::TimestepEmbedding,
        IndicatorMode::NoisyInput,
        IndicatorMode::ModulatedInput,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            IndicatorMode::TimestepEmbedding => "timestep_embedding",
            IndicatorMode::NoisyInput => "noisy_input",
            IndicatorMode::ModulatedInput => "modulated_input",
        }
    }
}

impl fmt::Display for IndicatorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IndicatorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        IndicatorMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Format {
                what: "indicator mode",
                message: format!("unknown mode {s:?}"),
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyConfig {
    pub delta: f64,
    pub mode: IndicatorMode,
    /// `None` accumulates raw differences.
    pub rescaler: Option<PolyRescaler>,
}

impl PolicyConfig {
    pub fn new(delta: f64, mode: IndicatorMode) -> Self {
        Self {
            delta,
            mode,
            rescaler: None,
        }
    }

    pub fn with_rescaler(mut self, rescaler: PolyRescaler) -> Self {
        self.rescaler = Some(rescaler);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0) {
            return Err(Error::BadRange(format!(
                "delta must be >= 0, got {}",
                self.delta
            )));
        }
        Ok(())
    }

    /// Rescaled difference, clamped at zero.
    pub fn rescale(&self, diff: f64) -> f64 {
        let r = match &self.rescaler {
            Some(p) => p.evaluate(diff),
            None => diff,
        };
        r.max(0.0)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CacheState {
    pub cached_residual: Option<Tensor>,
    pub accumulator: f64,
    pub prev_indicator: Option<Tensor>,
    pub last_computed_step: Option<usize>,
}

/// Outcome of one decision plus the quantities that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionInfo {
    pub decision: Decision,
    pub indicator_diff: Option<f64>,
    pub rescaled_diff: Option<f64>,
    /// Accumulator after the decision.
    pub accumulator: f64,
}

/// Everything a policy may look at for the current step.
pub struct StepInput<'a> {
    pub model: &'a ModelWeights,
    pub x_t: &'a Tensor,
    pub step: usize,
    pub emb: &'a TimestepEmbedding,
    pub cond: &'a Tensor,
}

pub trait CachePolicy {
    fn decide(&mut self, input: &StepInput<'_>) -> Result<DecisionInfo>;
    fn state(&self) -> &CacheState;
    fn state_mut(&mut self) -> &mut CacheState;
}

/// The accumulate/threshold recursion shared by the live policy and the
/// output-difference oracle. Reuse iff `accumulator + rescaled <= delta`.
pub fn accumulate_step(accumulator: &mut f64, rescaled: f64, delta: f64) -> Decision {
    let tentative = *accumulator + rescaled;
    if tentative <= delta {
        *accumulator = tentative;
        Decision::Reuse
    } else {
        *accumulator = 0.0;
        Decision::Refresh
    }
}

/// The indicator tensor for `mode`. Neither embedding-based mode runs the full network.
pub fn indicator_value(input: &StepInput<'_>, mode: IndicatorMode) -> Result<Tensor> {
    match mode {
        IndicatorMode::TimestepEmbedding => Ok(input.emb.vector.clone()),
        IndicatorMode::NoisyInput => Ok(input.x_t.clone()),
        IndicatorMode::ModulatedInput => input
            .model
            .first_block_modulated_input(input.x_t, input.emb, input.cond)
            .map(|m| m.tensor),
    }
}

pub fn accumulate_and_decide(
    state: &mut CacheState,
    indicator: Tensor,
    config: &PolicyConfig,
) -> Result<DecisionInfo> {
    let Some(prev) = state.prev_indicator.as_ref() else {
        state.accumulator = 0.0;
        state.prev_indicator = Some(indicator);
        return Ok(DecisionInfo {
            decision: Decision::Refresh,
            indicator_diff: None,
            rescaled_diff: None,
            accumulator: 0.0,
        });
    };
    let diff = rel_l1_distance(&indicator, prev)?;
    let rescaled = config.rescale(diff);
    let decision = accumulate_step(&mut state.accumulator, rescaled, config.delta);
    state.prev_indicator = Some(indicator);
    Ok(DecisionInfo {
        decision,
        indicator_diff: Some(diff),
        rescaled_diff: Some(rescaled),
        accumulator: state.accumulator,
    })
}

/// Runs the model and caches `O − x`.
pub fn compute_and_cache(
    model: &ModelWeights,
    x_t: &Tensor,
    emb: &TimestepEmbedding,
    cond: &Tensor,
    step: usize,
    state: &mut CacheState,
) -> Result<Tensor> {
    let output = model.forward(x_t, emb, cond)?;
    state.cached_residual = Some(output.sub(x_t)?);
    state.last_computed_step = Some(step);
    Ok(output)
}

/// `x + cached residual`; never touches the model.
pub fn apply_cached(x_t: &Tensor, state: &CacheState) -> Result<Tensor> {
    let residual = state
        .cached_residual
        .as_ref()
        .ok_or(Error::NoCachedResidual)?;
    x_t.add(residual)
}

#[derive(Debug, Clone)]
pub struct TeaCachePolicy {
    config: PolicyConfig,
    state: CacheState,
}

impl TeaCachePolicy {
    pub fn new(config: PolicyConfig) -> Self {
        Self {
            config,
            state: CacheState::default(),
        }
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }
}

impl CachePolicy for TeaCachePolicy {
    fn decide(&mut self, input: &StepInput<'_>) -> Result<DecisionInfo> {
        let indicator = indicator_value(input, self.config.mode)?;
        accumulate_and_decide(&mut self.state, indicator, &self.config)
    }

    fn state(&self) -> &CacheState {
        &self.state
    }

    fn state_mut(&mut self) -> &mut CacheState {
        &mut self.state
    }
}

/// Refreshes every step. With a mode set, it still reports indicator
/// differences, which is how calibration traces are recorded.
#[derive(Debug, Clone, Default)]
pub struct NoCachePolicy {
    mode: Option<IndicatorMode>,
    state: CacheState,
}

impl NoCachePolicy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observing(mode: IndicatorMode) -> Self {
        Self {
            mode: Some(mode),
            state: CacheState::default(),
        }
    }
}

impl CachePolicy for NoCachePolicy {
    fn decide(&mut self, input: &StepInput<'_>) -> Result<DecisionInfo> {
        let mut diff = None;
        if let Some(mode) = self.mode {
            let indicator = indicator_value(input, mode)?;
            if let Some(prev) = &self.state.prev_indicator {
                diff = Some(rel_l1_distance(&indicator, prev)?);
            }
            self.state.prev_indicator = Some(indicator);
        }
        Ok(DecisionInfo {
            decision: Decision::Refresh,
            indicator_diff: diff,
            rescaled_diff: diff,
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
