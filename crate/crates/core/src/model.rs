//! Miniature diffusion transformer used as the denoiser.
//!
//! Layout per block: parameter-free layer norm, AdaLN modulation (shift/scale/gate
//! for attention and for the FFN, six projections of the timestep embedding),
//! multi-head self-attention, GELU feed-forward, gated residual adds. The
//! constant conditioning vector is projected and added to the embedded input.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tensor::Tensor;

/// Width of the sinusoidal features fed to the timestep MLP.
pub const FREQ_DIM: usize = 256;
pub const FFN_MULT: usize = 4;
/// Weights are drawn uniformly from `[-WEIGHT_BOUND, WEIGHT_BOUND)`.
pub const WEIGHT_BOUND: f64 = 0.08;
/// Gate projection columns are multiplied by this after drawing.
pub const GATE_INIT_SCALE: f64 = 0.25;
pub const LN_EPS: f64 = 1e-6;

const WEIGHTS_MAGIC: &[u8; 4] = b"TCWT";
const WEIGHTS_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelConfig {
    pub token_count: usize,
    pub channel_dim: usize,
    pub hidden_dim: usize,
    pub num_blocks: usize,
    pub num_heads: usize,
    pub cond_dim: usize,
    pub weight_seed: u64,
}

impl ModelConfig {
    pub fn reference() -> Self {
        Self {
            token_count: 16,
            channel_dim: 8,
            hidden_dim: 32,
            num_blocks: 4,
            num_heads: 4,
            cond_dim: 16,
            weight_seed: 42,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("token_count", self.token_count),
            ("channel_dim", self.channel_dim),
            ("hidden_dim", self.hidden_dim),
            ("num_blocks", self.num_blocks),
            ("num_heads", self.num_heads),
            ("cond_dim", self.cond_dim),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidModelConfig(format!("{name} must be >= 1")));
        }
        if !self.hidden_dim.is_multiple_of(self.num_heads) {
            return Err(Error::InvalidModelConfig(format!(
                "hidden_dim {} not divisible by num_heads {}",
                self.hidden_dim, self.num_heads
            )));
        }
        Ok(())
    }

    pub fn latent_shape(&self) -> [usize; 2] {
        [self.token_count, self.channel_dim]
    }
}

/// Dense affine map applied to each row: `y = x W + b`, `W` stored `[in, out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Option<Vec<f64>>,
}

impl Linear {
    fn init(rng: &mut SplitMix64, in_dim: usize, out_dim: usize, bias: bool) -> Self {
        let weight = (0..in_dim * out_dim)
            .map(|_| rng.uniform(-WEIGHT_BOUND, WEIGHT_BOUND))
            .collect();
        let bias = bias.then(|| {
            (0..out_dim)
                .map(|_| rng.uniform(-WEIGHT_BOUND, WEIGHT_BOUND))
                .collect()
        });
        Self {
            in_dim,
            out_dim,
            weight,
            bias,
        }
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: Some(vec![0.0; out_dim]),
        }
    }

    /// Applies the map to `rows` consecutive input rows.
    pub fn apply(&self, x: &[f64], rows: usize) -> Vec<f64> {
        debug_assert_eq!(x.len(), rows * self.in_dim);
        let mut out = Vec::with_capacity(rows * self.out_dim);
        for r in 0..rows {
            let xr = &x[r * self.in_dim..(r + 1) * self.in_dim];
            let start = out.len();
            match &self.bias {
                Some(b) => out.extend_from_slice(b),
                None => out.resize(start + self.out_dim, 0.0),
            }
            let yr = &mut out[start..];
            for (i, &xi) in xr.iter().enumerate() {
                let wrow = &self.weight[i * self.out_dim..(i + 1) * self.out_dim];
                for (y, &w) in yr.iter_mut().zip(wrow) {
                    *y += xi * w;
                }
            }
        }
        out
    }

    fn param_count(&self) -> usize {
        self.weight.len() + self.bias.as_ref().map_or(0, Vec::len)
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weight
            .iter_mut()
            .chain(self.bias.iter_mut().flat_map(|b| b.iter_mut()))
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.weight.iter().chain(self.bias.iter().flatten())
    }
}

/// Projection of the timestep embedding to modulation chunks, each `hidden_dim`
/// wide. Blocks use six chunks ordered
/// `[shift_attn, scale_attn, gate_attn, shift_ffn, scale_ffn, gate_ffn]`; the
/// final layer uses `[shift, scale]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaLnParams {
    pub proj: Linear,
}

impl AdaLnParams {
    pub fn chunks(&self, emb: &TimestepEmbedding) -> Vec<f64> {
        let act: Vec<f64> = emb.vector.data().iter().map(|&v| silu(v)).collect();
        self.proj.apply(&act, 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockWeights {
    pub ada: AdaLnParams,
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub ffn_in: Linear,
    pub ffn_out: Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    config: ModelConfig,
    pub t_mlp_in: Linear,
    pub t_mlp_out: Linear,
    pub in_proj: Linear,
    pub cond_proj: Linear,
    pub blocks: Vec<BlockWeights>,
    pub final_ada: AdaLnParams,
    pub out_proj: Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimestepEmbedding {
    pub vector: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulatedInput {
    pub tensor: Tensor,
}

/// `sin(t / 10000^(2i/dim))` for the first half, matching cosines for the second.
pub fn sinusoidal_embed(t: f64, dim: usize) -> Result<Tensor> {
    if dim == 0 || !dim.is_multiple_of(2) {
        return Err(Error::OddDimension(dim));
    }
    let half = dim / 2;
    let mut data = vec![0.0; dim];
    for i in 0..half {
        let arg = t / 10000f64.powf(2.0 * i as f64 / dim as f64);
        data[i] = arg.sin();
        data[half + i] = arg.cos();
    }
    Ok(Tensor::from_parts(vec![dim], data))
}

pub fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

pub fn gelu(x: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
    0.5 * x * (1.0 + (C * (x + 0.044715 * x * x * x)).tanh())
}

/// Parameter-free layer norm over the last dimension.
pub fn layer_norm_rows(x: &[f64], cols: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    for row in x.chunks(cols) {
        let mean = row.iter().sum::<f64>() / cols as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
        let inv = 1.0 / (var + LN_EPS).sqrt();
        out.extend(row.iter().map(|v| (v - mean) * inv));
    }
    out
}

/// `x ⊙ (1 + scale) + shift`, with `shift`/`scale` broadcast over rows.
pub fn apply_modulation(x: &Tensor, shift: &[f64], scale: &[f64]) -> Result<Tensor> {
    let cols = *x.shape().last().unwrap_or(&0);
    if x.shape().len() != 2 || shift.len() != cols || scale.len() != cols {
        return Err(Error::ShapeMismatch {
            left: x.shape().to_vec(),
            right: vec![shift.len(), scale.len()],
        });
    }
    let data = x
        .data()
        .chunks(cols)
        .flat_map(|row| {
            row.iter()
                .zip(shift.iter().zip(scale))
                .map(|(v, (sh, sc))| v * (1.0 + sc) + sh)
        })
        .collect();
    Ok(Tensor::from_parts(x.shape().to_vec(), data))
}

/// Attention-branch modulation of `x` using the first two chunks of `params`.
pub fn modulate(
    x: &Tensor,
    emb: &TimestepEmbedding,
    params: &AdaLnParams,
) -> Result<ModulatedInput> {
    let hidden = emb.vector.len();
    if params.proj.in_dim != hidden || params.proj.out_dim < 2 * hidden {
        return Err(Error::ShapeMismatch {
            left: vec![params.proj.in_dim, params.proj.out_dim],
            right: vec![hidden, 2 * hidden],
        });
    }
    let chunks = params.chunks(emb);
    let tensor = apply_modulation(x, &chunks[..hidden], &chunks[hidden..2 * hidden])?;
    Ok(ModulatedInput { tensor })
}

impl ModelWeights {
    /// Draws every parameter from SplitMix64(`weight_seed`) in declaration order:
    /// timestep MLP, input projection, conditioning projection, blocks
    /// (ada, q, k, v, o, ffn_in, ffn_out), final ada, output projection. Each
    /// linear draws its `[in, out]` weight row-major, then its bias.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let h = config.hidden_dim;
        let mut rng = SplitMix64::new(config.weight_seed);
        let t_mlp_in = Linear::init(&mut rng, FREQ_DIM, h, true);
        let t_mlp_out = Linear::init(&mut rng, h, h, true);
        let in_proj = Linear::init(&mut rng, config.channel_dim, h, true);
        let cond_proj = Linear::init(&mut rng, config.cond_dim, h, false);
        let blocks = (0..config.num_blocks)
            .map(|_| {
                let mut ada = Linear::init(&mut rng, h, 6 * h, true);
                damp_gates(&mut ada, h, &[2, 5]);
                BlockWeights {
                    ada: AdaLnParams { proj: ada },
                    q: Linear::init(&mut rng, h, h, false),
                    k: Linear::init(&mut rng, h, h, false),
                    v: Linear::init(&mut rng, h, h, false),
                    o: Linear::init(&mut rng, h, h, true),
                    ffn_in: Linear::init(&mut rng, h, FFN_MULT * h, true),
                    ffn_out: Linear::init(&mut rng, FFN_MULT * h, h, true),
                }
            })
            .collect();
        let final_ada = AdaLnParams {
            proj: Linear::init(&mut rng, h, 2 * h, true),
        };
        let out_proj = Linear::init(&mut rng, h, config.channel_dim, true);
        Ok(Self {
            config,
            t_mlp_in,
            t_mlp_out,
            in_proj,
            cond_proj,
            blocks,
            final_ada,
            out_proj,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn linears(&self) -> Vec<&Linear> {
        let mut v = vec![
            &self.t_mlp_in,
            &self.t_mlp_out,
            &self.in_proj,
            &self.cond_proj,
        ];
        for b in &self.blocks {
            v.extend([&b.ada.proj, &b.q, &b.k, &b.v, &b.o, &b.ffn_in, &b.ffn_out]);
        }
        v.extend([&self.final_ada.proj, &self.out_proj]);
        v
    }

    fn linears_mut(&mut self) -> Vec<&mut Linear> {
        let mut v = vec![
            &mut self.t_mlp_in,
            &mut self.t_mlp_out,
            &mut self.in_proj,
            &mut self.cond_proj,
        ];
        for b in &mut self.blocks {
            v.extend([
                &mut b.ada.proj,
                &mut b.q,
                &mut b.k,
                &mut b.v,
                &mut b.o,
                &mut b.ffn_in,
                &mut b.ffn_out,
            ]);
        }
        v.extend([&mut self.final_ada.proj, &mut self.out_proj]);
        v
    }

    pub fn param_count(&self) -> usize {
        self.linears().iter().map(|l| l.param_count()).sum()
    }

    /// Multiply-add count of one `forward` call; the per-evaluation cost unit
    /// behind `RunStats::flops_proxy`.
    pub fn flops_per_eval(&self) -> u64 {
        let c = &self.config;
        let (n, h, ch) = (
            c.token_count as u64,
            c.hidden_dim as u64,
            c.channel_dim as u64,
        );
        let ffn = FFN_MULT as u64 * h;
        let embed = n * ch * h + c.cond_dim as u64 * h;
        let per_block = 6 * h * h + 4 * n * h * h + 2 * n * n * h + 2 * n * h * ffn;
        let head = 2 * h * h + n * h * ch;
        embed + c.num_blocks as u64 * per_block + head
    }

    /// All parameters flattened in declaration order.
    pub fn flat_params(&self) -> Vec<f64> {
        self.linears()
            .into_iter()
            .flat_map(|l| l.params().copied())
            .collect()
    }

    /// `T_t = MLP(sinusoidal(t))`.
    pub fn timestep_embedding(&self, t: f64) -> TimestepEmbedding {
        let freq = sinusoidal_embed(t, FREQ_DIM).expect("FREQ_DIM is even");
        let hidden: Vec<f64> = self
            .t_mlp_in
            .apply(freq.data(), 1)
            .into_iter()
            .map(silu)
            .collect();
        let out = self.t_mlp_out.apply(&hidden, 1);
        TimestepEmbedding {
            vector: Tensor::from_parts(vec![self.config.hidden_dim], out),
        }
    }

    fn check_inputs(&self, x_t: &Tensor, emb: &TimestepEmbedding, cond: &Tensor) -> Result<()> {
        let c = &self.config;
        let checks: [(&[usize], Vec<usize>); 3] = [
            (x_t.shape(), vec![c.token_count, c.channel_dim]),
            (emb.vector.shape(), vec![c.hidden_dim]),
            (cond.shape(), vec![c.cond_dim]),
        ];
        for (got, want) in checks {
            if got != want.as_slice() {
                return Err(Error::ShapeMismatch {
                    left: got.to_vec(),
                    right: want,
                });
            }
        }
        Ok(())
    }

    /// Token embedding plus the projected conditioning bias, `[tokens, hidden]`.
    fn embed_input(&self, x_t: &Tensor, cond: &Tensor) -> Vec<f64> {
        let n = self.config.token_count;
        let bias = self.cond_proj.apply(cond.data(), 1);
        let mut h = self.in_proj.apply(x_t.data(), n);
        for row in h.chunks_mut(self.config.hidden_dim) {
            for (v, b) in row.iter_mut().zip(&bias) {
                *v += b;
            }
        }
        h
    }

    fn block_modulated(&self, h: &[f64], shift: &[f64], scale: &[f64]) -> Tensor {
        let (n, hd) = (self.config.token_count, self.config.hidden_dim);
        let normed = Tensor::from_parts(vec![n, hd], layer_norm_rows(h, hd));
        apply_modulation(&normed, shift, scale).expect("shapes fixed by config")
    }

    /// Block-0 modulated input, computed by the same code path `forward` uses.
    pub fn first_block_modulated_input(
        &self,
        x_t: &Tensor,
        emb: &TimestepEmbedding,
        cond: &Tensor,
    ) -> Result<ModulatedInput> {
        self.check_inputs(x_t, emb, cond)?;
        let hd = self.config.hidden_dim;
        let h = self.embed_input(x_t, cond);
        let chunks = self.blocks[0].ada.chunks(emb);
        Ok(ModulatedInput {
            tensor: self.block_modulated(&h, &chunks[..hd], &chunks[hd..2 * hd]),
        })
    }

    pub fn forward(&self, x_t: &Tensor, emb: &TimestepEmbedding, cond: &Tensor) -> Result<Tensor> {
        self.forward_capturing(x_t, emb, cond).map(|(out, _)| out)
    }

    /// Full forward pass that also returns the block-0 modulated input it used.
    pub fn forward_capturing(
        &self,
        x_t: &Tensor,
        emb: &TimestepEmbedding,
        cond: &Tensor,
    ) -> Result<(Tensor, ModulatedInput)> {
        self.check_inputs(x_t, emb, cond)?;
        let (n, hd) = (self.config.token_count, self.config.hidden_dim);
        let mut h = self.embed_input(x_t, cond);
        let mut first = None;
        for block in &self.blocks {
            let c = block.ada.chunks(emb);
            let chunk = |i: usize| &c[i * hd..(i + 1) * hd];

            let m = self.block_modulated(&h, chunk(0), chunk(1));
            let attn = self.attention(block, m.data());
            if first.is_none() {
                first = Some(ModulatedInput { tensor: m });
            }
            add_gated(&mut h, &attn, chunk(2));

            let m = self.block_modulated(&h, chunk(3), chunk(4));
            let inner: Vec<f64> = block
                .ffn_in
                .apply(m.data(), n)
                .into_iter()
                .map(gelu)
                .collect();
            let ffn = block.ffn_out.apply(&inner, n);
            add_gated(&mut h, &ffn, chunk(5));
        }
        let c = self.final_ada.chunks(emb);
        let m = self.block_modulated(&h, &c[..hd], &c[hd..]);
        let out = self.out_proj.apply(m.data(), n);
        let first = first.expect("num_blocks >= 1");
        Ok((
            Tensor::from_parts(vec![n, self.config.channel_dim], out),
            first,
        ))
    }

    fn attention(&self, block: &BlockWeights, x: &[f64]) -> Vec<f64> {
        let (n, hd, heads) = (
            self.config.token_count,
            self.config.hidden_dim,
            self.config.num_heads,
        );
        let dh = hd / heads;
        let q = block.q.apply(x, n);
        let k = block.k.apply(x, n);
        let v = block.v.apply(x, n);
        let inv_sqrt = 1.0 / (dh as f64).sqrt();
        let mut ctx = vec![0.0; n * hd];
        let mut scores = vec![0.0; n];
        for head in 0..heads {
            let off = head * dh;
            for i in 0..n {
                let qi = &q[i * hd + off..i * hd + off + dh];
                for (j, s) in scores.iter_mut().enumerate() {
                    let kj = &k[j * hd + off..j * hd + off + dh];
                    *s = qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() * inv_sqrt;
                }
                let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut denom = 0.0;
                for s in scores.iter_mut() {
                    *s = (*s - max).exp();
                    denom += *s;
                }
                let out = &mut ctx[i * hd + off..i * hd + off + dh];
                for (j, s) in scores.iter().enumerate() {
                    let w = s / denom;
                    let vj = &v[j * hd + off..j * hd + off + dh];
                    for (o, vv) in out.iter_mut().zip(vj) {
                        *o += w * vv;
                    }
                }
            }
        }
        block.o.apply(&ctx, n)
    }

    /// Writes the binary weight file: magic `TCWT`, `u32` version, seven `u64`
    /// config fields (token_count, channel_dim, hidden_dim, num_blocks,
    /// num_heads, cond_dim, weight_seed), `u64` parameter count, then the
    /// parameters as `f64`, all little-endian.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        let c = &self.config;
        w.write_all(WEIGHTS_MAGIC)?;
        w.write_all(&WEIGHTS_VERSION.to_le_bytes())?;
        for v in [
            c.token_count as u64,
            c.channel_dim as u64,
            c.hidden_dim as u64,
            c.num_blocks as u64,
            c.num_heads as u64,
            c.cond_dim as u64,
            c.weight_seed,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&(self.param_count() as u64).to_le_bytes())?;
        for p in self.flat_params() {
            w.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let bad = |message: String| Error::Format {
            what: "weight file",
            message,
        };
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic)?;
        if &magic != WEIGHTS_MAGIC {
            return Err(bad(format!("bad magic {magic:?}")));
        }
        let mut b4 = [0u8; 4];
        read_exact(&mut r, &mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != WEIGHTS_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let mut fields = [0u64; 8];
        for f in fields.iter_mut() {
            let mut b8 = [0u8; 8];
            read_exact(&mut r, &mut b8)?;
            *f = u64::from_le_bytes(b8);
        }
        let as_usize = |v: u64| usize::try_from(v).map_err(|_| bad(format!("field {v} too large")));
        let config = ModelConfig {
            token_count: as_usize(fields[0])?,
            channel_dim: as_usize(fields[1])?,
            hidden_dim: as_usize(fields[2])?,
            num_blocks: as_usize(fields[3])?,
            num_heads: as_usize(fields[4])?,
            cond_dim: as_usize(fields[5])?,
            weight_seed: fields[6],
        };
        // Shape template; every value is overwritten from the payload.
        let mut weights = Self::new(config)?;
        if fields[7] != weights.param_count() as u64 {
            return Err(bad(format!(
                "payload holds {} parameters, config needs {}",
                fields[7],
                weights.param_count()
            )));
        }
        for lin in weights.linears_mut() {
            for p in lin.params_mut() {
                let mut b8 = [0u8; 8];
                read_exact(&mut r, &mut b8)?;
                let v = f64::from_le_bytes(b8);
                if !v.is_finite() {
                    return Err(bad("non-finite parameter".into()));
                }
                *p = v;
            }
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest).map_err(|e| Error::io("<weights>", e))? != 0 {
            return Err(bad("trailing bytes after payload".into()));
        }
        Ok(weights)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| Error::Format {
        what: "weight file",
        message: format!("truncated: {e}"),
    })
}

fn damp_gates(ada: &mut Linear, hidden: usize, gate_chunks: &[usize]) {
    for row in ada.weight.chunks_mut(ada.out_dim) {
        for &g in gate_chunks {
            for w in &mut row[g * hidden..(g + 1) * hidden] {
                *w *= GATE_INIT_SCALE;
            }
        }
    }
    if let Some(b) = &mut ada.bias {
        for &g in gate_chunks {
            for w in &mut b[g * hidden..(g + 1) * hidden] {
                *w *= GATE_INIT_SCALE;
            }
        }
    }
}

fn add_gated(h: &mut [f64], branch: &[f64], gate: &[f64]) {
    let cols = gate.len();
    for (hr, br) in h.chunks_mut(cols).zip(branch.chunks(cols)) {
        for ((hv, bv), g) in hr.iter_mut().zip(br).zip(gate) {
            *hv += g * bv;
        }
    }
}

/// Fixed conditioning vector for a model: uniform `[-1, 1)` from
/// SplitMix64(`weight_seed ^ COND_STREAM`).
pub fn reference_cond(config: &ModelConfig) -> Tensor {
    const COND_STREAM: u64 = 0x636f_6e64; // "cond"
    let mut rng = SplitMix64::new(config.weight_seed ^ COND_STREAM);
    let data = (0..config.cond_dim)
        .map(|_| rng.uniform(-1.0, 1.0))
        .collect();
    Tensor::from_parts(vec![config.cond_dim], data)
}

/// Standard-normal latent of shape `[token_count, channel_dim]` from SplitMix64(`seed`).
pub fn gaussian_latent(config: &ModelConfig, seed: u64) -> Tensor {
    let mut rng = SplitMix64::new(seed);
    let shape = config.latent_shape();
    let data = (0..shape[0] * shape[1]).map(|_| rng.normal()).collect();
    Tensor::from_parts(shape.to_vec(), data)
}
