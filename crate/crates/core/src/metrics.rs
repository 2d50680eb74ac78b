//! Quality and efficiency measures on final latents and schedules.

use crate::baselines::ScheduleSet;
use crate::error::{Error, Result};
use crate::sampler::RunStats;
use crate::tensor::{rel_l1_distance, Tensor};

pub const SSIM_WINDOW: usize = 8;

pub fn mse(a: &Tensor, b: &Tensor) -> Result<f64> {
    a.ensure_same_shape(b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.len() as f64)
}

/// `10·log10(range² / mse)`; `+inf` when the inputs are identical.
pub fn psnr(a: &Tensor, b: &Tensor, data_range: f64) -> Result<f64> {
    if !(data_range > 0.0) {
        return Err(Error::BadDataRange(data_range));
    }
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (data_range * data_range / m).log10())
}

/// Mean SSIM over non-overlapping 8×8 windows of the `rows × cols` grid view.
pub fn ssim(a: &Tensor, b: &Tensor, rows: usize, cols: usize, data_range: f64) -> Result<f64> {
    a.ensure_same_shape(b)?;
    if rows * cols != a.len() {
        return Err(Error::InvalidShape {
            shape: vec![rows, cols],
            len: a.len(),
        });
    }
    if !(data_range > 0.0) {
        return Err(Error::BadDataRange(data_range));
    }
    if rows < SSIM_WINDOW || cols < SSIM_WINDOW {
        return Err(Error::GridTooSmall {
            rows,
            cols,
            window: SSIM_WINDOW,
        });
    }
    let c1 = (0.01 * data_range).powi(2);
    let c2 = (0.03 * data_range).powi(2);
    let (da, db) = (a.data(), b.data());
    let n = (SSIM_WINDOW * SSIM_WINDOW) as f64;
    let mut total = 0.0;
    let mut windows = 0usize;
    for r0 in (0..=rows - SSIM_WINDOW).step_by(SSIM_WINDOW) {
        for c0 in (0..=cols - SSIM_WINDOW).step_by(SSIM_WINDOW) {
            let idx = |i: usize| (r0 + i / SSIM_WINDOW) * cols + c0 + i % SSIM_WINDOW;
            let count = SSIM_WINDOW * SSIM_WINDOW;
            let (mut ma, mut mb) = (0.0, 0.0);
            for i in 0..count {
                ma += da[idx(i)];
                mb += db[idx(i)];
            }
            ma /= n;
            mb /= n;
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for i in 0..count {
                let (x, y) = (da[idx(i)] - ma, db[idx(i)] - mb);
                va += x * x;
                vb += y * y;
                cov += x * y;
            }
            va /= n;
            vb /= n;
            cov /= n;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            windows += 1;
        }
    }
    Ok(total / windows as f64)
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::ShapeMismatch {
            left: vec![xs.len()],
            right: vec![ys.len()],
        });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// `|a ∩ b| / |a ∪ b|`; two empty sets count as identical.
pub fn schedule_jaccard(a: &ScheduleSet, b: &ScheduleSet) -> f64 {
    let inter = a.computed().intersection(b.computed()).count();
    let union = a.computed().union(b.computed()).count();
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// `T / computed_steps`, the model-evaluation speedup.
pub fn speedup_ratio(stats: &RunStats, steps: usize) -> f64 {
    steps as f64 / stats.computed_steps.max(1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    pub mse: f64,
    pub psnr: f64,
    pub ssim: f64,
    pub rel_l1: f64,
}

impl QualityReport {
    /// Compares `test` against `reference`, both viewed as a `rows × cols` grid,
    /// with the data range taken from the reference.
    pub fn compare(reference: &Tensor, test: &Tensor, rows: usize, cols: usize) -> Result<Self> {
        let range = reference.max() - reference.min();
        Ok(Self {
            mse: mse(test, reference)?,
            psnr: psnr(test, reference, range)?,
            ssim: ssim(test, reference, rows, cols, range)?,
            rel_l1: rel_l1_distance(test, reference)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(f: impl FnMut(usize) -> f64) -> Tensor {
        Tensor::new(vec![16, 8], (0..128).map(f).collect()).unwrap()
    }

    #[test]
    fn psnr_examples() {
        let a = grid(|i| (i as f64).sin());
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
        let b = a.map(|v| v + 1.0);
        assert!(psnr(&a, &b, 1.0).unwrap().abs() < 1e-12);
        assert!(matches!(psnr(&a, &b, 0.0), Err(Error::BadDataRange(_))));
        assert!(psnr(&a, &Tensor::zeros(&[3]), 1.0).is_err());
    }

    #[test]
    fn ssim_examples() {
        let a = grid(|i| (i as f64 * 0.37).cos());
        assert!((ssim(&a, &a, 16, 8, 2.0).unwrap() - 1.0).abs() < 1e-15);

        // Constant c against c + R: closed form (2c(c+R) + C1) / (c² + (c+R)² + C1).
        let c = 0.25;
        let flat = grid(|_| c);
        let shifted = grid(|_| c + 1.0);
        let v = ssim(&flat, &shifted, 16, 8, 1.0).unwrap();
        let c1 = 1e-4;
        let expected = (2.0 * c * (c + 1.0) + c1) / (c * c + (c + 1.0) * (c + 1.0) + c1);
        assert!((v - expected).abs() < 1e-12);
        assert!(v < 0.5);

        let small = Tensor::zeros(&[7, 8]);
        assert!(matches!(
            ssim(&small, &small, 7, 8, 1.0),
            Err(Error::GridTooSmall { .. })
        ));
    }

    #[test]
    fn pearson_examples() {
        let xs = [1.0, 2.0, 3.0, 5.0];
        assert!((pearson(&xs, &xs).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((pearson(&xs, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert!(pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.1]).unwrap() > 0.999);
        assert!(matches!(
            pearson(&[1.0, 1.0], &[1.0, 2.0]),
            Err(Error::DegenerateVariance)
        ));
    }

    #[test]
    fn jaccard_examples() {
        let a = ScheduleSet::new(10, [9, 6, 3]).unwrap();
        assert_eq!(schedule_jaccard(&a, &a), 1.0);
        let b = ScheduleSet::new(10, [9, 6, 0]).unwrap();
        assert_eq!(schedule_jaccard(&a, &b), 0.5);
        // Disjoint nonempty sets; ScheduleSet always holds T−1, so compare raw sets.
        let x = ScheduleSet::new(3, [2]).unwrap();
        let y = ScheduleSet::new(4, [3]).unwrap();
        assert_eq!(schedule_jaccard(&x, &y), 0.0);
    }

    #[test]
    fn speedup_examples() {
        let stats = |computed| RunStats {
            steps: 30,
            computed_steps: computed,
            reused_steps: 30 - computed,
            per_step_decisions: vec![],
            total_model_evals: computed,
            flops_proxy: 0,
            noise_seed: 0,
        };
        assert_eq!(speedup_ratio(&stats(30), 30), 1.0);
        assert_eq!(speedup_ratio(&stats(15), 30), 2.0);
        assert_eq!(speedup_ratio(&stats(1), 30), 30.0);
    }

    proptest! {
        #[test]
        fn ssim_symmetric(seed in 0u64..1000, scale in 0.01f64..3.0) {
            let mut rng = crate::rng::SplitMix64::new(seed);
            let a = grid(|_| rng.normal());
            let b = a.map(|v| v * scale + 0.1);
            let ab = ssim(&a, &b, 16, 8, 4.0).unwrap();
            let ba = ssim(&b, &a, 16, 8, 4.0).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-12);
            prop_assert!((-1.0..=1.0).contains(&ab));
        }

        #[test]
        fn psnr_decreases_with_mse(e1 in 1e-6f64..1.0, factor in 1.01f64..100.0) {
            let a = grid(|i| i as f64 * 0.01);
            let b1 = a.map(|v| v + e1);
            let b2 = a.map(|v| v + e1 * factor);
            prop_assert!(psnr(&a, &b2, 1.0).unwrap() < psnr(&a, &b1, 1.0).unwrap());
        }

        #[test]
        fn pearson_affine_invariant(
            xs in prop::collection::vec(-10.0f64..10.0, 3..40),
            a in 0.1f64..10.0, b in -5.0f64..5.0
        ) {
            let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| x * x + (i as f64).sin()).collect();
            let base = pearson(&xs, &ys);
            prop_assume!(base.is_ok());
            let tx: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
            let ty: Vec<f64> = ys.iter().map(|y| a * y - b).collect();
            let r = base.unwrap();
            prop_assert!((pearson(&tx, &ys).unwrap() - r).abs() < 1e-10);
            prop_assert!((pearson(&xs, &ty).unwrap() - r).abs() < 1e-10);
        }
    }
}
