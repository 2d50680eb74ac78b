//! C ABI over the `teacache` crate.
//!
//! Models and rescalers are opaque heap handles created by `tc_*_new` /
//! `tc_*_load` and released with the matching `tc_*_free`. Every fallible call
//! returns a `TcStatus`; output values go through caller-provided pointers.
//! The C header `include/teacache.h` is generated from this crate at build time.

#![allow(clippy::missing_safety_doc)]

mod error;

use std::ffi::{c_char, CStr};
use std::path::PathBuf;

use teacache::calibration::PolyRescaler;
use teacache::model::{reference_cond, ModelConfig, ModelWeights};
use teacache::policy::{IndicatorMode, PolicyConfig, TeaCachePolicy};
use teacache::sampler::{linear_beta_schedule, run_baseline, run_sampler, RunStats, SamplerConfig};
use teacache::tensor::{rel_l1_distance, Tensor};

use error::{fail, from_error, guard};
pub use error::{tc_last_error_message, TcStatus};

/// Opaque model handle.
pub struct TcModel {
    weights: ModelWeights,
    cond: Tensor,
}

/// Opaque rescaling-polynomial handle.
pub struct TcRescaler {
    inner: PolyRescaler,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TcModelConfig {
    pub token_count: usize,
    pub channel_dim: usize,
    pub hidden_dim: usize,
    pub num_blocks: usize,
    pub num_heads: usize,
    pub cond_dim: usize,
    pub weight_seed: u64,
}

impl From<TcModelConfig> for ModelConfig {
    fn from(c: TcModelConfig) -> Self {
        ModelConfig {
            token_count: c.token_count,
            channel_dim: c.channel_dim,
            hidden_dim: c.hidden_dim,
            num_blocks: c.num_blocks,
            num_heads: c.num_heads,
            cond_dim: c.cond_dim,
            weight_seed: c.weight_seed,
        }
    }
}

impl From<ModelConfig> for TcModelConfig {
    fn from(c: ModelConfig) -> Self {
        TcModelConfig {
            token_count: c.token_count,
            channel_dim: c.channel_dim,
            hidden_dim: c.hidden_dim,
            num_blocks: c.num_blocks,
            num_heads: c.num_heads,
            cond_dim: c.cond_dim,
            weight_seed: c.weight_seed,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TcIndicatorMode {
    TimestepEmbedding = 0,
    NoisyInput = 1,
    ModulatedInput = 2,
}

impl From<TcIndicatorMode> for IndicatorMode {
    fn from(m: TcIndicatorMode) -> Self {
        match m {
            TcIndicatorMode::TimestepEmbedding => IndicatorMode::TimestepEmbedding,
            TcIndicatorMode::NoisyInput => IndicatorMode::NoisyInput,
            TcIndicatorMode::ModulatedInput => IndicatorMode::ModulatedInput,
        }
    }
}

/// Sampling and policy options for one run.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TcRunOptions {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub noise_seed: u64,
    /// Caching threshold; ignored by `tc_run_baseline`.
    pub delta: f64,
    pub mode: TcIndicatorMode,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TcRunStats {
    pub steps: usize,
    pub computed_steps: usize,
    pub reused_steps: usize,
    pub total_model_evals: usize,
    pub flops_proxy: u64,
}

impl From<&RunStats> for TcRunStats {
    fn from(s: &RunStats) -> Self {
        TcRunStats {
            steps: s.steps,
            computed_steps: s.computed_steps,
            reused_steps: s.reused_steps,
            total_model_evals: s.total_model_evals,
            flops_proxy: s.flops_proxy,
        }
    }
}

unsafe fn deref<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, TcStatus> {
    ptr.as_ref()
        .ok_or_else(|| fail(TcStatus::NullPointer, format!("{what} is NULL")))
}

unsafe fn path_arg(ptr: *const c_char) -> Result<PathBuf, TcStatus> {
    if ptr.is_null() {
        return Err(fail(TcStatus::NullPointer, "path is NULL"));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| fail(TcStatus::InvalidArgument, "path is not valid UTF-8"))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), TcStatus> {
    if out.is_null() {
        return Err(fail(TcStatus::NullPointer, format!("{what} is NULL")));
    }
    out.write(value);
    Ok(())
}

/// The reference model configuration (16 tokens, 8 channels, hidden 32,
/// 4 blocks, 4 heads, cond 16, seed 42).
#[no_mangle]
pub extern "C" fn tc_model_config_reference() -> TcModelConfig {
    ModelConfig::reference().into()
}

/// Builds a model with weights drawn from `config->weight_seed`.
#[no_mangle]
pub unsafe extern "C" fn tc_model_new(
    config: *const TcModelConfig,
    out: *mut *mut TcModel,
) -> TcStatus {
    guard(|| {
        let config = ModelConfig::from(*deref(config, "config")?);
        let weights = ModelWeights::new(config).map_err(from_error)?;
        let handle = Box::new(TcModel {
            cond: reference_cond(&config),
            weights,
        });
        write_out(out, Box::into_raw(handle), "out")
    })
}

/// Loads a binary weight file written by `tc_model_save`.
#[no_mangle]
pub unsafe extern "C" fn tc_model_load(path: *const c_char, out: *mut *mut TcModel) -> TcStatus {
    guard(|| {
        let path = path_arg(path)?;
        let weights = ModelWeights::load(&path).map_err(from_error)?;
        let handle = Box::new(TcModel {
            cond: reference_cond(weights.config()),
            weights,
        });
        write_out(out, Box::into_raw(handle), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn tc_model_save(model: *const TcModel, path: *const c_char) -> TcStatus {
    guard(|| {
        let model = deref(model, "model")?;
        let path = path_arg(path)?;
        model.weights.save(&path).map_err(from_error)
    })
}

#[no_mangle]
pub unsafe extern "C" fn tc_model_config(
    model: *const TcModel,
    out: *mut TcModelConfig,
) -> TcStatus {
    guard(|| {
        let model = deref(model, "model")?;
        write_out(out, (*model.weights.config()).into(), "out")
    })
}

/// Number of `double`s in a latent (`token_count * channel_dim`).
#[no_mangle]
pub unsafe extern "C" fn tc_model_latent_len(model: *const TcModel, out: *mut usize) -> TcStatus {
    guard(|| {
        let c = deref(model, "model")?.weights.config();
        write_out(out, c.token_count * c.channel_dim, "out")
    })
}

/// Releases a model; NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn tc_model_free(model: *mut TcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Builds a rescaler from `count` coefficients `a_0 .. a_{count-1}`.
#[no_mangle]
pub unsafe extern "C" fn tc_rescaler_new(
    coefficients: *const f64,
    count: usize,
    out: *mut *mut TcRescaler,
) -> TcStatus {
    guard(|| {
        if coefficients.is_null() {
            return Err(fail(TcStatus::NullPointer, "coefficients is NULL"));
        }
        let coeffs = std::slice::from_raw_parts(coefficients, count).to_vec();
        let inner = PolyRescaler::new(coeffs).map_err(from_error)?;
        write_out(out, Box::into_raw(Box::new(TcRescaler { inner })), "out")
    })
}

/// Loads a rescaler text file written by `teacache calibrate`.
#[no_mangle]
pub unsafe extern "C" fn tc_rescaler_load(
    path: *const c_char,
    out: *mut *mut TcRescaler,
) -> TcStatus {
    guard(|| {
        let path = path_arg(path)?;
        if !path.exists() {
            return Err(from_error(teacache::Error::MissingRescaler(path)));
        }
        let text = std::fs::read_to_string(&path)
            .map_err(|e| fail(TcStatus::Io, format!("{}: {e}", path.display())))?;
        let inner = PolyRescaler::from_text(&text).map_err(from_error)?;
        write_out(out, Box::into_raw(Box::new(TcRescaler { inner })), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn tc_rescaler_evaluate(
    rescaler: *const TcRescaler,
    x: f64,
    out: *mut f64,
) -> TcStatus {
    guard(|| {
        let r = deref(rescaler, "rescaler")?;
        write_out(out, r.inner.evaluate(x), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn tc_rescaler_order(
    rescaler: *const TcRescaler,
    out: *mut usize,
) -> TcStatus {
    guard(|| {
        let r = deref(rescaler, "rescaler")?;
        write_out(out, r.inner.order(), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn tc_rescaler_free(rescaler: *mut TcRescaler) {
    if !rescaler.is_null() {
        drop(Box::from_raw(rescaler));
    }
}

/// `‖a − b‖₁ / ‖b‖₁` over two arrays of `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tc_rel_l1_distance(
    a: *const f64,
    b: *const f64,
    len: usize,
    out: *mut f64,
) -> TcStatus {
    guard(|| {
        if a.is_null() || b.is_null() {
            return Err(fail(TcStatus::NullPointer, "input array is NULL"));
        }
        let ta = Tensor::from_slice(std::slice::from_raw_parts(a, len)).map_err(from_error)?;
        let tb = Tensor::from_slice(std::slice::from_raw_parts(b, len)).map_err(from_error)?;
        write_out(out, rel_l1_distance(&ta, &tb).map_err(from_error)?, "out")
    })
}

unsafe fn sampler_config(options: &TcRunOptions) -> Result<SamplerConfig, TcStatus> {
    let schedule = linear_beta_schedule(options.steps, options.beta_start, options.beta_end)
        .map_err(from_error)?;
    Ok(SamplerConfig::new(schedule, options.noise_seed))
}

unsafe fn finish(
    latent: &Tensor,
    stats: &RunStats,
    latent_out: *mut f64,
    latent_len: usize,
    stats_out: *mut TcRunStats,
) -> Result<(), TcStatus> {
    if latent_out.is_null() {
        return Err(fail(TcStatus::NullPointer, "latent_out is NULL"));
    }
    if latent_len < latent.len() {
        return Err(fail(
            TcStatus::BufferTooSmall,
            format!("latent buffer holds {latent_len}, need {}", latent.len()),
        ));
    }
    std::slice::from_raw_parts_mut(latent_out, latent.len()).copy_from_slice(latent.data());
    if !stats_out.is_null() {
        stats_out.write(stats.into());
    }
    Ok(())
}

/// Samples with the caching policy. `rescaler` may be NULL (identity).
/// `latent_out` receives the final latent row-major; `stats_out` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn tc_run_teacache(
    model: *const TcModel,
    options: *const TcRunOptions,
    rescaler: *const TcRescaler,
    latent_out: *mut f64,
    latent_len: usize,
    stats_out: *mut TcRunStats,
) -> TcStatus {
    guard(|| {
        let model = deref(model, "model")?;
        let options = deref(options, "options")?;
        let policy = PolicyConfig {
            delta: options.delta,
            mode: options.mode.into(),
            rescaler: rescaler.as_ref().map(|r| r.inner.clone()),
        };
        policy.validate().map_err(from_error)?;
        let cfg = sampler_config(options)?;
        let out = run_sampler(
            &model.weights,
            &cfg,
            &mut TeaCachePolicy::new(policy),
            &model.cond,
        )
        .map_err(from_error)?;
        finish(&out.latent, &out.stats, latent_out, latent_len, stats_out)
    })
}

/// Samples without caching.
#[no_mangle]
pub unsafe extern "C" fn tc_run_baseline(
    model: *const TcModel,
    options: *const TcRunOptions,
    latent_out: *mut f64,
    latent_len: usize,
    stats_out: *mut TcRunStats,
) -> TcStatus {
    guard(|| {
        let model = deref(model, "model")?;
        let options = deref(options, "options")?;
        let cfg = sampler_config(options)?;
        let (latent, stats) =
            run_baseline(&model.weights, &cfg, &model.cond).map_err(from_error)?;
        finish(&latent, &stats, latent_out, latent_len, stats_out)
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
