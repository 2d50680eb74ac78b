//! Offline calibration: paired indicator/output difference traces from uncached
//! runs, and the least-squares polynomial that maps one onto the other.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::ModelWeights;
use crate::policy::{IndicatorMode, NoCachePolicy};
use crate::sampler::{run_sampler, SamplerConfig};
use crate::tensor::Tensor;

/// Polynomial order used when none is requested.
pub const DEFAULT_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub weight_seed: u64,
    pub schedule: String,
    pub mode: IndicatorMode,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub step: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffTrace {
    pub points: Vec<TracePoint>,
    pub noise_seed: u64,
    pub provenance: Provenance,
}

impl DiffTrace {
    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.y).collect()
    }

    pub const HEADER: &'static str = "step,x_input_diff,y_output_diff";

    pub fn to_csv(&self) -> String {
        let p = &self.provenance;
        let mut out = format!(
            "# weight_seed={} noise_seed={} schedule={} mode={}\n{}\n",
            p.weight_seed,
            self.noise_seed,
            p.schedule,
            p.mode,
            Self::HEADER
        );
        for pt in &self.points {
            let _ = writeln!(out, "{},{},{}", pt.step, pt.x, pt.y);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |message: String| Error::Format {
            what: "trace file",
            message,
        };
        let mut lines = text.lines();
        let comment = lines
            .next()
            .and_then(|l| l.strip_prefix('#'))
            .ok_or_else(|| bad("missing provenance comment".into()))?;
        let mut weight_seed = None;
        let mut noise_seed = None;
        let mut schedule = None;
        let mut mode = None;
        for kv in comment.split_whitespace() {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| bad(format!("bad provenance field {kv:?}")))?;
            match k {
                "weight_seed" => weight_seed = v.parse().ok(),
                "noise_seed" => noise_seed = v.parse().ok(),
                "schedule" => schedule = Some(v.to_string()),
                "mode" => mode = Some(v.parse()?),
                _ => return Err(bad(format!("unknown provenance key {k:?}"))),
            }
        }
        if lines.next() != Some(Self::HEADER) {
            return Err(bad("missing or wrong header".into()));
        }
        let mut points = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 3 {
                return Err(bad(format!("expected 3 fields in {line:?}")));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
            points.push(TracePoint {
                step: f[0].parse().map_err(|e| bad(format!("{:?}: {e}", f[0])))?,
                x: num(f[1])?,
                y: num(f[2])?,
            });
        }
        Ok(Self {
            points,
            noise_seed: noise_seed.ok_or_else(|| bad("missing noise_seed".into()))?,
            provenance: Provenance {
                weight_seed: weight_seed.ok_or_else(|| bad("missing weight_seed".into()))?,
                schedule: schedule.ok_or_else(|| bad("missing schedule".into()))?,
                mode: mode.ok_or_else(|| bad("missing mode".into()))?,
            },
        })
    }
}

/// `f(x) = a_0 + a_1 x + ... + a_n x^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyRescaler {
    coefficients: Vec<f64>,
    pub provenance: Option<Provenance>,
}

impl PolyRescaler {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::Format {
                what: "rescaler",
                message: "no coefficients".into(),
            });
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Format {
                what: "rescaler",
                message: "non-finite coefficient".into(),
            });
        }
        Ok(Self {
            coefficients,
            provenance: None,
        })
    }

    pub fn identity() -> Self {
        Self {
            coefficients: vec![0.0, 1.0],
            provenance: None,
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// Horner evaluation.
    pub fn evaluate(&self, x: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * x + c)
    }

    /// Key/value text form; coefficients use shortest round-trip decimals.
    pub fn to_text(&self) -> String {
        let coeffs: Vec<String> = self.coefficients.iter().map(|c| format!("{c:?}")).collect();
        let mut out = format!(
            "order = {}\ncoefficients = {}\n",
            self.order(),
            coeffs.join(", ")
        );
        if let Some(p) = &self.provenance {
            let _ = write!(
                out,
                "weight_seed = {}\nschedule = {}\nmode = {}\n",
                p.weight_seed, p.schedule, p.mode
            );
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |message: String| Error::Format {
            what: "rescaler file",
            message,
        };
        let doc = crate::config::KeyValueDoc::parse(text)?;
        let root = doc.section("");
        let order: usize = root
            .required("order")?
            .parse()
            .map_err(|e| bad(format!("order: {e}")))?;
        let coefficients = root
            .required("coefficients")?
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| bad(format!("{s:?}: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if coefficients.len() != order + 1 {
            return Err(bad(format!(
                "order {order} needs {} coefficients, got {}",
                order + 1,
                coefficients.len()
            )));
        }
        let mut rescaler = Self::new(coefficients)?;
        if let Some(seed) = root.get("weight_seed") {
            rescaler.provenance = Some(Provenance {
                weight_seed: seed.parse().map_err(|e| bad(format!("weight_seed: {e}")))?,
                schedule: root.required("schedule")?.to_string(),
                mode: root.required("mode")?.parse()?,
            });
        }
        Ok(rescaler)
    }
}

/// Uncached runs, one per seed, pairing successive indicator and output changes.
/// Each trace has `T − 1` points, in execution order.
pub fn record_trace(
    model: &ModelWeights,
    config: &SamplerConfig,
    mode: IndicatorMode,
    seeds: &[u64],
    cond: &Tensor,
) -> Result<Vec<DiffTrace>> {
    if seeds.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let provenance = Provenance {
        weight_seed: model.config().weight_seed,
        schedule: config.schedule.id(),
        mode,
    };
    seeds
        .iter()
        .map(|&seed| {
            let cfg = SamplerConfig {
                noise_seed: seed,
                record_trajectory: true,
                ..config.clone()
            };
            let mut policy = NoCachePolicy::observing(mode);
            let outcome = run_sampler(model, &cfg, &mut policy, cond)?;
            let points = outcome
                .trajectory
                .expect("trajectory requested")
                .iter()
                .skip(1)
                .map(|r| TracePoint {
                    step: r.step,
                    x: r.indicator_diff.expect("observing policy reports diffs"),
                    y: r.true_output_diff.expect("every step computed"),
                })
                .collect();
            Ok(DiffTrace {
                points,
                noise_seed: seed,
                provenance: provenance.clone(),
            })
        })
        .collect()
}

/// Ordinary least squares on the pooled points of every trace.
///
/// The abscissae are mapped affinely onto `[0, 1]` before the Vandermonde
/// system is built and solved by Householder QR; coefficients are then
/// expanded back to the raw variable.
pub fn fit_polynomial(traces: &[DiffTrace], order: usize) -> Result<PolyRescaler> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = traces
        .iter()
        .flat_map(|t| t.points.iter().map(|p| (p.x, p.y)))
        .unzip();
    let mut rescaler = fit_points(&xs, &ys, order)?;
    if let Some(t) = traces.first() {
        rescaler.provenance = Some(t.provenance.clone());
    }
    Ok(rescaler)
}

pub fn fit_points(xs: &[f64], ys: &[f64], order: usize) -> Result<PolyRescaler> {
    let n = xs.len().min(ys.len());
    if n < order + 1 {
        return Err(Error::InsufficientData {
            needed: order + 1,
            got: n,
        });
    }
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if order >= 1 && !(span > 0.0) {
        return Err(Error::DegenerateDesign);
    }
    let (shift, scale) = if span > 0.0 { (lo, span) } else { (0.0, 1.0) };

    let cols = order + 1;
    let mut a = vec![0.0; n * cols];
    for (i, &x) in xs.iter().take(n).enumerate() {
        let u = (x - shift) / scale;
        let mut p = 1.0;
        for j in 0..cols {
            a[i * cols + j] = p;
            p *= u;
        }
    }
    let scaled = householder_lstsq(&mut a, &mut ys[..n].to_vec(), n, cols)?;
    PolyRescaler::new(unscale(&scaled, shift, scale))
}

/// Least squares via Householder QR. `a` is `rows x cols` row-major and is
/// overwritten.
fn householder_lstsq(a: &mut [f64], b: &mut [f64], rows: usize, cols: usize) -> Result<Vec<f64>> {
    let mut diag_max: f64 = 0.0;
    let mut r_diag = vec![0.0; cols];
    for k in 0..cols {
        let norm = (k..rows)
            .map(|i| a[i * cols + k].powi(2))
            .sum::<f64>()
            .sqrt();
        if norm == 0.0 {
            return Err(Error::DegenerateDesign);
        }
        let alpha = if a[k * cols + k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..rows).map(|i| a[i * cols + k]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for j in k..cols {
                let dot: f64 = (k..rows).map(|i| v[i - k] * a[i * cols + j]).sum();
                let f = 2.0 * dot / vnorm2;
                for i in k..rows {
                    a[i * cols + j] -= f * v[i - k];
                }
            }
            let dot: f64 = (k..rows).map(|i| v[i - k] * b[i]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..rows {
                b[i] -= f * v[i - k];
            }
        }
        r_diag[k] = a[k * cols + k];
        diag_max = diag_max.max(r_diag[k].abs());
    }
    let tol = diag_max * (rows.max(cols) as f64) * f64::EPSILON * 16.0;
    if r_diag.iter().any(|d| d.abs() <= tol) {
        return Err(Error::DegenerateDesign);
    }
    let mut coef = vec![0.0; cols];
    for k in (0..cols).rev() {
        let s: f64 = (k + 1..cols).map(|j| a[k * cols + j] * coef[j]).sum();
        coef[k] = (b[k] - s) / a[k * cols + k];
    }
    Ok(coef)
}

/// Converts coefficients of `p(u)`, `u = (x − shift) / scale`, into coefficients in `x`.
fn unscale(c: &[f64], shift: f64, scale: f64) -> Vec<f64> {
    let n = c.len();
    let mut out = vec![0.0; n];
    // Horner in polynomial arithmetic: acc = acc * (x − shift)/scale + c_k.
    for &ck in c.iter().rev() {
        let mut next = vec![0.0; n];
        for (j, &aj) in out.iter().enumerate() {
            if aj == 0.0 {
                continue;
            }
            next[j] -= aj * shift / scale;
            if j + 1 < n {
                next[j + 1] += aj / scale;
            }
        }
        next[0] += ck;
        out = next;
    }
    out
}

/// Root-mean-square of `f(x_i) − y_i` over every trace point.
pub fn fit_residual(rescaler: &PolyRescaler, traces: &[DiffTrace]) -> f64 {
    let (sum, count) = traces
        .iter()
        .flat_map(|t| &t.points)
        .fold((0.0, 0usize), |(s, c), p| {
            (s + (rescaler.evaluate(p.x) - p.y).powi(2), c + 1)
        });
    if count == 0 {
        return 0.0;
    }
    (sum / count as f64).sqrt()
}
