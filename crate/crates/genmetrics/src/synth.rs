//! Synthetic distributions and controlled corruptions.
//!
//! Every metric in this crate makes a directional claim ("mode dropping
//! lowers the diversity probe", "pixel noise lowers the quality probe").
//! This module produces data where the ground truth is known so those claims
//! can be falsified:
//!
//! - [`sample_mixture`]: isotropic Gaussian class blobs with dial-a-difficulty
//!   separation, standing in for a labeled real distribution.
//! - [`sample_glyph_digits`]: a ten-class image task of seven-segment digit
//!   glyphs with random shift, thickness, contrast, and pixel noise — a
//!   self-contained stand-in for small digit-image benchmarks.
//! - corruptions modeling generator failure modes: [`apply_salt_pepper`] and
//!   [`apply_gaussian_noise`] (low quality), [`confuse_labels`] (class
//!   mix-up), [`drop_modes`] (missing classes), and [`duplicate_cap`] (low
//!   diversity).
//!
//! Corruptions preserve sample count and shape (except [`drop_modes`]), are
//! deterministic per seed, and are the identity at their zero parameter.

use ndarray::{Array2, ArrayD, IxDyn};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::dataset::{stratified_subsample, LabeledSampleSet, Role};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};
use crate::tensor::Tensor;

/// Isotropic Gaussian mixture with one component per class.
#[derive(Debug, Clone)]
pub struct MixtureModelSpec {
    /// Component means, one row per class: `(class_count, dim)`.
    pub means: Array2<f64>,
    /// Shared isotropic standard deviation (zero collapses each class onto
    /// its mean, which is occasionally useful as a degenerate oracle).
    pub sigma: f64,
    /// Class weights; must sum to 1. Sampling is per-class-count driven, so
    /// the weights only document the intended marginal.
    pub weights: Vec<f64>,
    pub seed: u64,
}

impl MixtureModelSpec {
    /// `class_count` components at `separation * e_k` (the k-th axis unit
    /// vector) with uniform weights. Requires `class_count <= dim`.
    pub fn axis_aligned(
        class_count: usize,
        dim: usize,
        separation: f64,
        sigma: f64,
        seed: u64,
    ) -> Result<Self> {
        if class_count == 0 || dim == 0 {
            return Err(Error::BadMixtureSpec {
                reason: "class count and dimension must be positive".into(),
            });
        }
        if class_count > dim {
            return Err(Error::BadMixtureSpec {
                reason: format!(
                    "axis-aligned means need dim >= class count ({dim} < {class_count})"
                ),
            });
        }
        let mut means = Array2::zeros((class_count, dim));
        for k in 0..class_count {
            means[[k, k]] = separation;
        }
        let spec = MixtureModelSpec {
            means,
            sigma,
            weights: vec![1.0 / class_count as f64; class_count],
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn class_count(&self) -> usize {
        self.means.nrows()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.means.nrows() == 0 || self.means.ncols() == 0 {
            return Err(Error::BadMixtureSpec {
                reason: "means matrix must be nonempty".into(),
            });
        }
        if !self.means.iter().all(|m| m.is_finite()) {
            return Err(Error::BadMixtureSpec {
                reason: "means must be finite".into(),
            });
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::BadMixtureSpec {
                reason: format!("sigma must be finite and nonnegative, got {}", self.sigma),
            });
        }
        if self.weights.len() != self.means.nrows() {
            return Err(Error::BadMixtureSpec {
                reason: format!(
                    "{} weights for {} classes",
                    self.weights.len(),
                    self.means.nrows()
                ),
            });
        }
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::BadMixtureSpec {
                reason: "weights must be finite and nonnegative".into(),
            });
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::BadMixtureSpec {
                reason: format!("weights sum to {total}, expected 1"),
            });
        }
        Ok(())
    }
}

/// Draws `n_per_class` samples from every component, class-major, each class
/// from stream `(seed, class)`. Labels are the component indices.
pub fn sample_mixture(spec: &MixtureModelSpec, n_per_class: usize) -> Result<LabeledSampleSet> {
    spec.validate()?;
    let (class_count, dim) = (spec.class_count(), spec.dim());
    let n = class_count * n_per_class;
    let rows: Vec<Vec<f32>> = (0..class_count)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(spec.seed, k as u64);
            let mut out = Vec::with_capacity(n_per_class * dim);
            for _ in 0..n_per_class {
                for d in 0..dim {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    out.push((spec.means[[k, d]] + spec.sigma * z) as f32);
                }
            }
            out
        })
        .collect();
    let mut flat = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for (k, block) in rows.into_iter().enumerate() {
        flat.extend(block);
        labels.extend(std::iter::repeat(k as i64).take(n_per_class));
    }
    let data = ArrayD::from_shape_vec(IxDyn(&[n, dim]), flat).expect("length by construction");
    LabeledSampleSet::new(Tensor::F32(data), labels, Role::Train, class_count)
}

fn check_rate(field: &'static str, rate: f64) -> Result<()> {
    if !(rate.is_finite() && (0.0..=1.0).contains(&rate)) {
        return Err(Error::RateOutOfRange { field, value: rate });
    }
    Ok(())
}

fn u8_pixels(set: &LabeledSampleSet, operation: &'static str) -> Result<Vec<u8>> {
    match set.data() {
        Tensor::U8(a) => Ok(a.as_slice().expect("owned standard layout").to_vec()),
        _ => Err(Error::RequiresU8 { operation }),
    }
}

fn rebuild_u8(set: &LabeledSampleSet, pixels: Vec<u8>) -> LabeledSampleSet {
    let data = ArrayD::from_shape_vec(IxDyn(set.data().shape()), pixels)
        .expect("same length as source");
    LabeledSampleSet::new(
        Tensor::U8(data),
        set.labels().to_vec(),
        set.role(),
        set.class_count(),
    )
    .expect("source set was valid")
}

/// Replaces each pixel independently with probability `rate` by 0 or 255
/// (fair coin). Uint8 image data only; sample `i` uses stream `(seed, i)`.
pub fn apply_salt_pepper(set: &LabeledSampleSet, rate: f64, seed: u64) -> Result<LabeledSampleSet> {
    check_rate("rate", rate)?;
    let mut pixels = u8_pixels(set, "apply_salt_pepper")?;
    if set.is_empty() {
        return Ok(rebuild_u8(set, pixels));
    }
    let per_sample = pixels.len() / set.len();
    pixels
        .par_chunks_mut(per_sample)
        .enumerate()
        .for_each(|(i, chunk)| {
            let mut rng = stream_rng(seed, i as u64);
            for px in chunk.iter_mut() {
                if rng.gen::<f64>() < rate {
                    *px = if rng.gen::<bool>() { 255 } else { 0 };
                }
            }
        });
    Ok(rebuild_u8(set, pixels))
}

/// Adds N(0, sigma^2) per value. Uint8 data is treated on the 0-255 scale
/// (round then clamp); float data is shifted unclamped on its own scale.
/// Sample `i` uses stream `(seed, i)`.
pub fn apply_gaussian_noise(
    set: &LabeledSampleSet,
    sigma: f64,
    seed: u64,
) -> Result<LabeledSampleSet> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::NegativeParameter {
            field: "sigma",
            value: sigma,
        });
    }
    if set.is_empty() {
        return Ok(set.take(&[]));
    }
    match set.data() {
        Tensor::U8(a) => {
            let mut pixels = a.as_slice().expect("owned standard layout").to_vec();
            let per_sample = pixels.len() / set.len();
            pixels
                .par_chunks_mut(per_sample)
                .enumerate()
                .for_each(|(i, chunk)| {
                    let mut rng = stream_rng(seed, i as u64);
                    for px in chunk.iter_mut() {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *px = (*px as f64 + sigma * z).round().clamp(0.0, 255.0) as u8;
                    }
                });
            Ok(rebuild_u8(set, pixels))
        }
        Tensor::F32(a) => {
            let mut values = a.as_slice().expect("owned standard layout").to_vec();
            let per_sample = values.len() / set.len();
            values
                .par_chunks_mut(per_sample)
                .enumerate()
                .for_each(|(i, chunk)| {
                    let mut rng = stream_rng(seed, i as u64);
                    for v in chunk.iter_mut() {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *v = (*v as f64 + sigma * z) as f32;
                    }
                });
            let data = ArrayD::from_shape_vec(IxDyn(set.data().shape()), values)
                .expect("same length as source");
            LabeledSampleSet::new(
                Tensor::F32(data),
                set.labels().to_vec(),
                set.role(),
                set.class_count(),
            )
        }
        Tensor::I64(_) => Err(Error::BadSampleDtype {
            dtype: set.data().dtype().name(),
        }),
    }
}

/// Replaces each label independently with probability `rate` by a uniformly
/// random *different* label. Single stream `(seed, 0)`, labels in order.
pub fn confuse_labels(set: &LabeledSampleSet, rate: f64, seed: u64) -> Result<LabeledSampleSet> {
    check_rate("rate", rate)?;
    let class_count = set.class_count();
    if rate > 0.0 && class_count < 2 && !set.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot confuse labels with fewer than 2 classes".into(),
        ));
    }
    let mut rng = stream_rng(seed, 0);
    let mut labels = set.labels().to_vec();
    for label in labels.iter_mut() {
        if rng.gen::<f64>() < rate {
            // Uniform over the other K-1 classes via a shifted draw.
            let j = rng.gen_range(0..class_count as i64 - 1);
            *label = if j >= *label { j + 1 } else { j };
        }
    }
    LabeledSampleSet::new(set.data().clone(), labels, set.role(), class_count)
}

/// Removes all samples of the listed classes. The class count (and thus the
/// label space) is unchanged, so downstream probes see missing classes.
pub fn drop_modes(set: &LabeledSampleSet, classes_to_drop: &[usize]) -> Result<LabeledSampleSet> {
    let class_count = set.class_count();
    for &class in classes_to_drop {
        if class >= class_count {
            return Err(Error::DropClassOutOfRange { class, class_count });
        }
    }
    let dropped: std::collections::BTreeSet<usize> =
        classes_to_drop.iter().copied().collect();
    let keep: Vec<usize> = set
        .labels()
        .iter()
        .enumerate()
        .filter(|(_, &label)| !dropped.contains(&(label as usize)))
        .map(|(i, _)| i)
        .collect();
    Ok(set.take(&keep))
}

/// Models a low-diversity generator: keeps a class-balanced pool of
/// `unique_count` distinct samples (seeded from `derive(seed, 0)`), then
/// draws `target_n` samples from it with replacement, class-balanced
/// (stream `(derive(seed, 1), class)`), class-major.
pub fn duplicate_cap(
    set: &LabeledSampleSet,
    unique_count: usize,
    target_n: usize,
    seed: u64,
) -> Result<LabeledSampleSet> {
    const OPERATION: &str = "duplicate_cap";
    let class_count = set.class_count();
    for (name, count) in [("unique_count", unique_count), ("target_n", target_n)] {
        if count == 0 {
            return Err(Error::InvalidArgument(format!(
                "{OPERATION}: {name} must be positive"
            )));
        }
        if count % class_count != 0 {
            return Err(Error::NotDivisibleByClasses {
                operation: OPERATION,
                count,
                class_count,
            });
        }
    }
    let pool = stratified_subsample(set, unique_count / class_count, derive_seed(seed, 0))?;
    let by_class = pool.class_indices();
    let draw_seed = derive_seed(seed, 1);
    let per_class = target_n / class_count;
    let mut picked = Vec::with_capacity(target_n);
    for (k, members) in by_class.iter().enumerate() {
        let mut rng = stream_rng(draw_seed, k as u64);
        for _ in 0..per_class {
            picked.push(members[rng.gen_range(0..members.len())]);
        }
    }
    Ok(pool.take(&picked))
}

/// Ten-class seven-segment digit glyphs with controllable nuisance factors.
#[derive(Debug, Clone)]
pub struct GlyphDigitsSpec {
    /// Square image side in pixels.
    pub side: usize,
    pub n_per_class: usize,
    /// Maximum absolute glyph translation, drawn uniformly per sample.
    pub max_shift: usize,
    /// Per-pixel Gaussian noise on the 0-255 scale.
    pub noise_sigma: f64,
    /// Foreground intensity range on the 0-255 scale (background is 0).
    pub contrast_range: (f64, f64),
    /// Stroke thickness range in pixels, inclusive.
    pub thickness_range: (usize, usize),
    pub seed: u64,
}

impl Default for GlyphDigitsSpec {
    fn default() -> Self {
        GlyphDigitsSpec {
            side: 28,
            n_per_class: 100,
            max_shift: 2,
            noise_sigma: 20.0,
            contrast_range: (140.0, 255.0),
            thickness_range: (2, 4),
            seed: 0,
        }
    }
}

/// Lit segments per digit; bits 0..=6 are the segments top, top-right,
/// bottom-right, bottom, bottom-left, top-left, middle.
const DIGIT_SEGMENTS: [u8; 10] = [
    0b011_1111, // 0
    0b000_0110, // 1
    0b101_1011, // 2
    0b100_1111, // 3
    0b110_0110, // 4
    0b110_1101, // 5
    0b111_1101, // 6
    0b000_0111, // 7
    0b111_1111, // 8
    0b110_1111, // 9
];

impl GlyphDigitsSpec {
    pub fn validate(&self) -> Result<()> {
        if self.side < 14 {
            return Err(Error::InvalidArgument(format!(
                "glyph image side must be at least 14, got {}",
                self.side
            )));
        }
        let margin = self.side / 7;
        if self.max_shift > margin {
            return Err(Error::InvalidArgument(format!(
                "max_shift {} would push the glyph out of a {}-pixel image (limit {margin})",
                self.max_shift, self.side
            )));
        }
        let (t0, t1) = self.thickness_range;
        if t0 == 0 || t1 < t0 || t1 > margin {
            return Err(Error::InvalidArgument(format!(
                "thickness range ({t0}, {t1}) must satisfy 1 <= lo <= hi <= {margin}"
            )));
        }
        let (c0, c1) = self.contrast_range;
        if !(c0.is_finite() && c1.is_finite()) || c0 <= 0.0 || c1 < c0 || c1 > 255.0 {
            return Err(Error::InvalidArgument(format!(
                "contrast range ({c0}, {c1}) must satisfy 0 < lo <= hi <= 255"
            )));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::NegativeParameter {
                field: "noise_sigma",
                value: self.noise_sigma,
            });
        }
        Ok(())
    }
}

/// Paints one glyph at full intensity 1.0 into `canvas` (row-major
/// `side * side`, pre-zeroed), shifted by `(dy, dx)`.
fn paint_glyph(canvas: &mut [f64], side: usize, digit: usize, thickness: usize, dy: i64, dx: i64) {
    let top = (side / 7) as i64;
    let bottom = (side - side / 7 - 1) as i64;
    let x0 = (2 * side / 7) as i64;
    let x1 = (side - 2 * side / 7 - 1) as i64;
    let mid = (top + bottom) / 2;
    let t = thickness as i64;
    // (row range, col range), inclusive, one per segment bit.
    let boxes: [(i64, i64, i64, i64); 7] = [
        (top, top + t - 1, x0, x1),              // top bar
        (top, mid, x1 - t + 1, x1),              // top-right
        (mid, bottom, x1 - t + 1, x1),           // bottom-right
        (bottom - t + 1, bottom, x0, x1),        // bottom bar
        (mid, bottom, x0, x0 + t - 1),           // bottom-left
        (top, mid, x0, x0 + t - 1),              // top-left
        (mid - t / 2, mid - t / 2 + t - 1, x0, x1), // middle bar
    ];
    let segments = DIGIT_SEGMENTS[digit];
    for (bit, &(r0, r1, c0, c1)) in boxes.iter().enumerate() {
        if segments & (1 << bit) == 0 {
            continue;
        }
        for r in r0 + dy..=r1 + dy {
            for c in c0 + dx..=c1 + dx {
                debug_assert!(r >= 0 && c >= 0 && (r as usize) < side && (c as usize) < side);
                canvas[r as usize * side + c as usize] = 1.0;
            }
        }
    }
}

/// Renders the full glyph-digit set: ten classes, `n_per_class` each,
/// class-major, uint8 `(n, side, side)`. Sample `j` of class `k` draws
/// thickness, shift, contrast, then per-pixel noise from stream
/// `(seed, k * n_per_class + j)`.
pub fn sample_glyph_digits(spec: &GlyphDigitsSpec) -> Result<LabeledSampleSet> {
    spec.validate()?;
    let side = spec.side;
    let per_sample = side * side;
    let n = 10 * spec.n_per_class;
    let mut pixels = vec![0u8; n * per_sample];
    pixels
        .par_chunks_mut(per_sample)
        .enumerate()
        .for_each(|(i, chunk)| {
            let digit = i / spec.n_per_class;
            let mut rng = stream_rng(spec.seed, i as u64);
            let (t0, t1) = spec.thickness_range;
            let thickness = rng.gen_range(t0..=t1);
            let s = spec.max_shift as i64;
            let dx = rng.gen_range(-s..=s);
            let dy = rng.gen_range(-s..=s);
            let (c0, c1) = spec.contrast_range;
            let contrast = rng.gen_range(c0..=c1);
            let mut canvas = vec![0f64; per_sample];
            paint_glyph(&mut canvas, side, digit, thickness, dy, dx);
            for (px, ink) in chunk.iter_mut().zip(canvas.iter()) {
                let z: f64 = StandardNormal.sample(&mut rng);
                *px = (ink * contrast + spec.noise_sigma * z)
                    .round()
                    .clamp(0.0, 255.0) as u8;
            }
        });
    let labels: Vec<i64> = (0..n).map(|i| (i / spec.n_per_class) as i64).collect();
    let data = ArrayD::from_shape_vec(IxDyn(&[n, side, side]), pixels)
        .expect("length by construction");
    LabeledSampleSet::new(Tensor::U8(data), labels, Role::Train, 10)
}
