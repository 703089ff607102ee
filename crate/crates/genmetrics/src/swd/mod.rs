//! Multi-scale sliced Wasserstein distance over local image patches.
//!
//! Both image sets are decomposed into Laplacian pyramids; at every band,
//! 7x7 patches are sampled at the same positions on both sides, normalized
//! by the real side's per-channel statistics, and compared with a sliced
//! Wasserstein-1 estimate: project descriptors onto random unit directions,
//! sort both projections, and average the absolute differences. The per-band
//! score is the mean over `projections x repeats` directions.
//!
//! Patch positions come from one stream per (level, image) shared by both
//! sides. That choice makes the distance exactly zero for identical inputs
//! and otherwise only lowers estimator variance (common random numbers).

pub mod pyramid;

pub use pyramid::{build_laplacian_pyramid, reconstruct, LaplacianPyramid};

use ndarray::{Array2, Array4, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, sample_without_replacement, stream_rng};
use crate::tensor::Tensor;

pub const PATCH_SIZE: usize = 7;

const PATCH_STAGE: u64 = 1;
const PROJECT_STAGE: u64 = 2;
const SUBSAMPLE_STAGE: u64 = 3;

/// Converts an image tensor to a `(n, channels, side, side)` float batch.
/// 3-dim tensors become single-channel; uint8 scales by 1/255.
pub fn image_batch(tensor: &Tensor) -> Result<Array4<f32>> {
    let shape = tensor.shape().to_vec();
    let (n, c, h, w) = match shape.len() {
        3 => (shape[0], 1, shape[1], shape[2]),
        4 => (shape[0], shape[1], shape[2], shape[3]),
        _ => {
            return Err(Error::BadSampleShape { shape });
        }
    };
    let values: Vec<f32> = match tensor {
        Tensor::U8(a) => a.iter().map(|&v| v as f32 / 255.0).collect(),
        Tensor::F32(a) => a.iter().copied().collect(),
        Tensor::I64(_) => {
            return Err(Error::BadSampleDtype {
                dtype: tensor.dtype().name(),
            })
        }
    };
    Ok(Array4::from_shape_vec((n, c, h, w), values).expect("shape product checked"))
}

/// Flattened 7x7 patch descriptors from one pyramid band.
#[derive(Debug, Clone)]
pub struct PatchDescriptorSet {
    /// `(images * patches_per_image, channels * 49)`, channel-major rows.
    pub descriptors: Array2<f32>,
    pub channels: usize,
    pub resolution: usize,
}

/// Samples `patches_per_image` patch positions per image from stream
/// `(seed, image_index)` and flattens the pixels channel-major.
pub fn extract_patch_descriptors(
    level: &Array4<f32>,
    patches_per_image: usize,
    seed: u64,
) -> Result<PatchDescriptorSet> {
    let (n, channels, h, w) = level.dim();
    if h < PATCH_SIZE || w < PATCH_SIZE {
        return Err(Error::LevelTooSmall { side: h.min(w) });
    }
    if n == 0 || patches_per_image == 0 {
        return Err(Error::EmptyInput {
            operation: "extract_patch_descriptors",
        });
    }
    let dim = channels * PATCH_SIZE * PATCH_SIZE;
    let rows: Vec<Vec<f32>> = (0..n)
        .into_par_iter()
        .map(|img| {
            let mut rng = stream_rng(seed, img as u64);
            let mut out = Vec::with_capacity(patches_per_image * dim);
            let plane = level.index_axis(Axis(0), img);
            for _ in 0..patches_per_image {
                let py = rng.gen_range(0..=h - PATCH_SIZE);
                let px = rng.gen_range(0..=w - PATCH_SIZE);
                for c in 0..channels {
                    for dy in 0..PATCH_SIZE {
                        for dx in 0..PATCH_SIZE {
                            out.push(plane[[c, py + dy, px + dx]]);
                        }
                    }
                }
            }
            out
        })
        .collect();
    let mut flat = Vec::with_capacity(n * patches_per_image * dim);
    for row in rows {
        flat.extend(row);
    }
    Ok(PatchDescriptorSet {
        descriptors: Array2::from_shape_vec((n * patches_per_image, dim), flat)
            .expect("length by construction"),
        channels,
        resolution: h,
    })
}

/// Per-channel mean and standard deviation over every patch pixel.
#[derive(Debug, Clone)]
pub struct DescriptorStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Population statistics per channel, accumulated in f64 in row order.
pub fn descriptor_stats(set: &PatchDescriptorSet) -> DescriptorStats {
    let per_channel = PATCH_SIZE * PATCH_SIZE;
    let mut sum = vec![0f64; set.channels];
    let mut sum_sq = vec![0f64; set.channels];
    for row in set.descriptors.rows() {
        for c in 0..set.channels {
            for &v in row.slice(ndarray::s![c * per_channel..(c + 1) * per_channel]).iter() {
                sum[c] += v as f64;
                sum_sq[c] += v as f64 * v as f64;
            }
        }
    }
    let count = (set.descriptors.nrows() * per_channel) as f64;
    let mut mean = Vec::with_capacity(set.channels);
    let mut std = Vec::with_capacity(set.channels);
    for c in 0..set.channels {
        let m = sum[c] / count;
        let var = (sum_sq[c] / count - m * m).max(0.0);
        mean.push(m);
        std.push(var.sqrt());
    }
    DescriptorStats { mean, std }
}

/// Centers and scales every channel by the given statistics. A zero standard
/// deviation is treated as 1 so constant channels map to zero.
pub fn normalize_with_stats(set: &PatchDescriptorSet, stats: &DescriptorStats) -> PatchDescriptorSet {
    let per_channel = PATCH_SIZE * PATCH_SIZE;
    let mut descriptors = set.descriptors.clone();
    for mut row in descriptors.rows_mut() {
        for c in 0..set.channels {
            let m = stats.mean[c];
            let s = if stats.std[c] > 1e-12 { stats.std[c] } else { 1.0 };
            for v in row
                .slice_mut(ndarray::s![c * per_channel..(c + 1) * per_channel])
                .iter_mut()
            {
                *v = ((*v as f64 - m) / s) as f32;
            }
        }
    }
    PatchDescriptorSet {
        descriptors,
        channels: set.channels,
        resolution: set.resolution,
    }
}

/// Sliced Wasserstein-1 distance between two equally sized descriptor sets.
///
/// Each repeat draws `projections` unit directions from stream
/// `(seed, repeat)`; the result is the mean over all directions of the sorted
/// 1-D Wasserstein distance, accumulated in fixed direction order.
pub fn sliced_wasserstein(
    a: &Array2<f32>,
    b: &Array2<f32>,
    projections: usize,
    repeats: usize,
    seed: u64,
) -> Result<f64> {
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            left: a.ncols(),
            right: b.ncols(),
        });
    }
    if a.nrows() != b.nrows() {
        return Err(Error::DescriptorCountMismatch {
            left: a.nrows(),
            right: b.nrows(),
        });
    }
    if a.nrows() == 0 {
        return Err(Error::EmptyInput {
            operation: "sliced_wasserstein",
        });
    }
    if projections == 0 || repeats == 0 {
        return Err(Error::InvalidArgument(
            "projections and repeats must be at least 1".into(),
        ));
    }
    let dim = a.ncols();
    let mut total = 0f64;
    for repeat in 0..repeats {
        let mut rng = stream_rng(seed, repeat as u64);
        let directions: Vec<Vec<f32>> = (0..projections)
            .map(|_| loop {
                let raw: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 1e-12 {
                    return raw.into_iter().map(|v| (v / norm) as f32).collect();
                }
            })
            .collect();
        // Directions are independent; the ordered collect plus sequential
        // sum keeps the result identical for any worker count.
        let scores: Vec<f64> = directions
            .par_iter()
            .map(|dir| {
                let project = |m: &Array2<f32>| -> Vec<f32> {
                    m.rows()
                        .into_iter()
                        .map(|row| {
                            let mut acc = 0f32;
                            for (x, d) in row.iter().zip(dir.iter()) {
                                acc += x * d;
                            }
                            acc
                        })
                        .collect()
                };
                let mut pa = project(a);
                let mut pb = project(b);
                pa.sort_unstable_by(f32::total_cmp);
                pb.sort_unstable_by(f32::total_cmp);
                pa.iter()
                    .zip(pb.iter())
                    .map(|(x, y)| (*x as f64 - *y as f64).abs())
                    .sum::<f64>()
                    / pa.len() as f64
            })
            .collect();
        total += scores.iter().sum::<f64>();
    }
    Ok(total / (projections * repeats) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelScore {
    pub resolution: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SwdParams {
    pub patches_per_image: usize,
    pub projections: usize,
    pub repeats: usize,
    pub min_resolution: usize,
    pub seed: u64,
}

impl Default for SwdParams {
    fn default() -> Self {
        SwdParams {
            patches_per_image: 128,
            projections: 512,
            repeats: 4,
            min_resolution: 16,
            seed: 0,
        }
    }
}

/// Full protocol: equalize set sizes, build pyramids, and score every band.
///
/// Patch positions at band `l` come from the same stream for both sides; the
/// real side's channel statistics normalize both descriptor sets. Returns
/// one score per band, finest to coarsest, base last.
pub fn swd_protocol(
    real: &Array4<f32>,
    generated: &Array4<f32>,
    params: &SwdParams,
) -> Result<Vec<LevelScore>> {
    let (n_real, c_real, h_real, w_real) = real.dim();
    let (n_gen, c_gen, h_gen, w_gen) = generated.dim();
    if c_real != c_gen {
        return Err(Error::DimensionMismatch {
            left: c_real,
            right: c_gen,
        });
    }
    if h_real != h_gen || w_real != w_gen {
        return Err(Error::DimensionMismatch {
            left: h_real,
            right: h_gen,
        });
    }
    if n_real == 0 || n_gen == 0 {
        return Err(Error::EmptyInput {
            operation: "swd_protocol",
        });
    }

    let subsample_seed = derive_seed(params.seed, SUBSAMPLE_STAGE);
    let shared = n_real.min(n_gen);
    let pick = |x: &Array4<f32>, n: usize, stream: u64| -> Array4<f32> {
        let mut rng = stream_rng(subsample_seed, stream);
        let picks = sample_without_replacement(n, shared, &mut rng);
        x.select(Axis(0), &picks)
    };
    let real_eq = if n_real > shared { pick(real, n_real, 0) } else { real.clone() };
    let gen_eq = if n_gen > shared { pick(generated, n_gen, 1) } else { generated.clone() };

    let pyr_real = build_laplacian_pyramid(&real_eq, params.min_resolution)?;
    let pyr_gen = build_laplacian_pyramid(&gen_eq, params.min_resolution)?;

    let patch_seed = derive_seed(params.seed, PATCH_STAGE);
    let project_seed = derive_seed(params.seed, PROJECT_STAGE);
    let mut scores = Vec::new();
    for (level, ((res_r, band_r), (res_g, band_g))) in pyr_real
        .levels()
        .into_iter()
        .zip(pyr_gen.levels())
        .enumerate()
    {
        debug_assert_eq!(res_r, res_g);
        let level_patch_seed = derive_seed(patch_seed, level as u64);
        let desc_r = extract_patch_descriptors(band_r, params.patches_per_image, level_patch_seed)?;
        let desc_g = extract_patch_descriptors(band_g, params.patches_per_image, level_patch_seed)?;
        let stats = descriptor_stats(&desc_r);
        let norm_r = normalize_with_stats(&desc_r, &stats);
        let norm_g = normalize_with_stats(&desc_g, &stats);
        let value = sliced_wasserstein(
            &norm_r.descriptors,
            &norm_g.descriptors,
            params.projections,
            params.repeats,
            derive_seed(project_seed, level as u64),
        )?;
        scores.push(LevelScore {
            resolution: res_r,
            value,
        });
    }
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array4;

    fn textured_batch(n: usize, side: usize, seed: u64) -> Array4<f32> {
        let mut rng = stream_rng(seed, 0);
        Array4::from_shape_fn((n, 1, side, side), |_| rng.gen_range(0.0f32..1.0))
    }

    #[test]
    fn image_batch_accepts_three_and_four_dim_tensors() {
        let t3 = Tensor::U8(ndarray::ArrayD::from_shape_vec(ndarray::IxDyn(&[2, 4, 4]), vec![255; 32]).unwrap());
        let b3 = image_batch(&t3).unwrap();
        assert_eq!(b3.dim(), (2, 1, 4, 4));
        assert_eq!(b3[[0, 0, 0, 0]], 1.0);

        let t4 = Tensor::F32(ndarray::ArrayD::zeros(ndarray::IxDyn(&[1, 3, 4, 4])));
        assert_eq!(image_batch(&t4).unwrap().dim(), (1, 3, 4, 4));

        let t2 = Tensor::F32(ndarray::ArrayD::zeros(ndarray::IxDyn(&[4, 4])));
        assert!(image_batch(&t2).is_err());
    }

    #[test]
    fn patch_extraction_layout_and_determinism() {
        let batch = textured_batch(3, 16, 1);
        let a = extract_patch_descriptors(&batch, 5, 42).unwrap();
        let b = extract_patch_descriptors(&batch, 5, 42).unwrap();
        assert_eq!(a.descriptors, b.descriptors);
        assert_eq!(a.descriptors.dim(), (15, 49));
        assert_eq!(a.resolution, 16);

        let c = extract_patch_descriptors(&batch, 5, 43).unwrap();
        assert_ne!(a.descriptors, c.descriptors);
    }

    #[test]
    fn patch_equal_to_image_when_side_is_seven() {
        let batch = textured_batch(1, 7, 2);
        let set = extract_patch_descriptors(&batch, 2, 0).unwrap();
        // Only one position possible: the whole image, twice.
        for p in 0..2 {
            for (i, v) in set.descriptors.row(p).iter().enumerate() {
                let (r, c) = (i / 7, i % 7);
                assert_eq!(*v, batch[[0, 0, r, c]]);
            }
        }
        let tiny = textured_batch(1, 6, 2);
        assert!(matches!(
            extract_patch_descriptors(&tiny, 2, 0),
            Err(Error::LevelTooSmall { side: 6 })
        ));
    }

    #[test]
    fn normalization_with_own_stats_centers_to_unit_scale() {
        let batch = textured_batch(4, 16, 3);
        let set = extract_patch_descriptors(&batch, 16, 0).unwrap();
        let stats = descriptor_stats(&set);
        let normalized = normalize_with_stats(&set, &stats);
        let re_stats = descriptor_stats(&normalized);
        assert!(re_stats.mean[0].abs() < 1e-6);
        assert!((re_stats.std[0] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn identical_descriptor_sets_have_exactly_zero_distance() {
        let batch = textured_batch(2, 16, 4);
        let set = extract_patch_descriptors(&batch, 8, 0).unwrap();
        let d = sliced_wasserstein(&set.descriptors, &set.descriptors, 32, 2, 7).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn one_dimensional_case_matches_sorted_difference_oracle() {
        // In 1-D every unit direction is +/-1 and slicing reduces exactly to
        // the sorted absolute-difference distance.
        let mut rng = stream_rng(5, 0);
        let a = Array2::from_shape_fn((64, 1), |_| rng.gen_range(-2.0f32..2.0));
        let b = Array2::from_shape_fn((64, 1), |_| rng.gen_range(-1.0f32..3.0));
        let mut sa: Vec<f32> = a.column(0).to_vec();
        let mut sb: Vec<f32> = b.column(0).to_vec();
        sa.sort_unstable_by(f32::total_cmp);
        sb.sort_unstable_by(f32::total_cmp);
        let oracle = sa
            .iter()
            .zip(&sb)
            .map(|(x, y)| (*x as f64 - *y as f64).abs())
            .sum::<f64>()
            / 64.0;
        let got = sliced_wasserstein(&a, &b, 16, 2, 9).unwrap();
        assert!((got - oracle).abs() < 1e-9, "{got} vs {oracle}");
    }

    #[test]
    fn constant_shift_moves_the_distance_by_the_shift() {
        let mut rng = stream_rng(6, 0);
        let a = Array2::from_shape_fn((50, 1), |_| rng.gen_range(0.0f32..1.0));
        let b = a.mapv(|v| v + 0.25);
        let d = sliced_wasserstein(&a, &b, 8, 1, 0).unwrap();
        assert!((d - 0.25).abs() < 1e-6, "{d}");
    }

    #[test]
    fn distance_validates_shapes() {
        let a = Array2::<f32>::zeros((4, 3));
        let b = Array2::<f32>::zeros((4, 2));
        assert!(matches!(
            sliced_wasserstein(&a, &b, 4, 1, 0),
            Err(Error::DimensionMismatch { .. })
        ));
        let c = Array2::<f32>::zeros((5, 3));
        assert!(matches!(
            sliced_wasserstein(&a, &c, 4, 1, 0),
            Err(Error::DescriptorCountMismatch { left: 4, right: 5 })
        ));
        assert!(matches!(
            sliced_wasserstein(&a, &a, 0, 1, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn protocol_scores_identical_sets_exactly_zero() {
        let batch = textured_batch(6, 32, 8);
        let params = SwdParams {
            patches_per_image: 8,
            projections: 16,
            repeats: 1,
            min_resolution: 16,
            seed: 3,
        };
        let scores = swd_protocol(&batch, &batch.clone(), &params).unwrap();
        let resolutions: Vec<usize> = scores.iter().map(|s| s.resolution).collect();
        assert_eq!(resolutions, vec![32, 16]);
        for s in &scores {
            assert_eq!(s.value, 0.0, "level {}", s.resolution);
        }
    }

    #[test]
    fn protocol_detects_noise_and_is_deterministic() {
        let clean = textured_batch(8, 32, 9);
        let mut noisy = clean.clone();
        let mut rng = stream_rng(10, 0);
        noisy.mapv_inplace(|v| v + rng.gen_range(-0.2f32..0.2));
        let params = SwdParams {
            patches_per_image: 8,
            projections: 16,
            repeats: 2,
            min_resolution: 16,
            seed: 5,
        };
        let a = swd_protocol(&clean, &noisy, &params).unwrap();
        let b = swd_protocol(&clean, &noisy, &params).unwrap();
        assert_eq!(a, b);
        for s in &a {
            assert!(s.value > 0.0);
        }
    }

    #[test]
    fn protocol_equalizes_mismatched_set_sizes() {
        let real = textured_batch(10, 16, 11);
        let generated = textured_batch(6, 16, 12);
        let params = SwdParams {
            patches_per_image: 4,
            projections: 8,
            repeats: 1,
            min_resolution: 16,
            seed: 0,
        };
        let scores = swd_protocol(&real, &generated, &params).unwrap();
        assert_eq!(scores.len(), 1);
        assert!(scores[0].value > 0.0);
    }
}
