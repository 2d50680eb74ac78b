use proptest::prelude::*;

use teacache::baselines::oracle_schedule;
use teacache::model::{reference_cond, ModelConfig, ModelWeights};
use teacache::policy::{
    accumulate_and_decide, CacheState, Decision, IndicatorMode, PolicyConfig, TeaCachePolicy,
};
use teacache::sampler::{linear_beta_schedule, run_sampler, SamplerConfig};
use teacache::Tensor;

fn reference() -> (ModelWeights, Tensor) {
    let m = ModelWeights::new(ModelConfig::reference()).unwrap();
    let cond = reference_cond(m.config());
    (m, cond)
}

fn schedule_for(
    m: &ModelWeights,
    cond: &Tensor,
    seed: u64,
    delta: f64,
    mode: IndicatorMode,
) -> Vec<usize> {
    let cfg = SamplerConfig::new(linear_beta_schedule(30, 1e-4, 0.02).unwrap(), seed);
    let mut policy = TeaCachePolicy::new(PolicyConfig::new(delta, mode));
    run_sampler(m, &cfg, &mut policy, cond)
        .unwrap()
        .stats
        .computed_set()
}

#[test]
fn timestep_embedding_schedule_ignores_noise_seed() {
    let (m, cond) = reference();
    // Raw embedding differences are large (about 0.8 per step), hence the wide δ.
    let first = schedule_for(&m, &cond, 0, 2.0, IndicatorMode::TimestepEmbedding);
    assert!(first.len() > 1 && first.len() < 30);
    for seed in 1..6 {
        assert_eq!(
            schedule_for(&m, &cond, seed, 2.0, IndicatorMode::TimestepEmbedding),
            first
        );
    }
}

#[test]
fn modulated_input_schedule_adapts_to_seed() {
    let (m, cond) = reference();
    let schedules: Vec<_> = (0..10)
        .map(|s| schedule_for(&m, &cond, s, 0.1, IndicatorMode::ModulatedInput))
        .collect();
    assert!(schedules.iter().any(|s| *s != schedules[0]));
}

/// Feeds scalar indicators `v_0, v_1, ...` whose consecutive relative L1
/// distances are the stream we want the policy to see.
fn indicators_from_diffs(diffs: &[f64]) -> Vec<Tensor> {
    let mut v = 1.0;
    let mut out = vec![Tensor::from_slice(&[v]).unwrap()];
    for d in diffs {
        v += v * d;
        out.push(Tensor::from_slice(&[v]).unwrap());
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn live_policy_agrees_with_oracle_recursion(
        diffs in prop::collection::vec(0.0f64..0.2, 1..64),
        delta in 0.0f64..0.5,
    ) {
        let tensors = indicators_from_diffs(&diffs);
        let config = PolicyConfig::new(delta, IndicatorMode::NoisyInput);
        let mut state = CacheState::default();
        let mut live = Vec::new();
        let mut seen = Vec::new();
        for (i, t) in tensors.into_iter().enumerate() {
            let info = accumulate_and_decide(&mut state, t, &config).unwrap();
            if info.decision == Decision::Refresh {
                live.push(diffs.len() - i);
            }
            seen.extend(info.indicator_diff);
        }
        // The oracle consumes the same measured differences.
        let oracle = oracle_schedule(&seen, delta);
        let mut live_sorted = live.clone();
        live_sorted.sort_unstable();
        prop_assert_eq!(oracle.computed().iter().copied().collect::<Vec<_>>(), live_sorted);
    }

    #[test]
    fn refreshes_are_monotone_in_delta(
        diffs in prop::collection::vec(0.0f64..0.2, 1..64),
        d1 in 0.0f64..0.5,
        d2 in 0.0f64..0.5,
    ) {
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(oracle_schedule(&diffs, lo).len() >= oracle_schedule(&diffs, hi).len());
    }
}
