//! Fréchet distance between Gaussian summaries of embedding sets.
//!
//! Two sets are summarized by mean and covariance; the squared distance is
//!
//! ```text
//! d^2 = |m_a - m_b|^2 + tr(C_a + C_b - 2 (C_a C_b)^(1/2))
//! ```
//!
//! The cross term is evaluated through the symmetric product
//! `C_a^(1/2) C_b C_a^(1/2)`, which has the same eigenvalues as `C_a C_b` but
//! stays in symmetric-eigendecomposition territory. Eigenvalues below 1e-10
//! are clamped to zero before the square root, and a final result in
//! `(-1e-8, 0)` is clamped to zero; both guard rank-deficient covariances.
//!
//! All covariance accumulation uses fixed-order scalar loops (parallelized
//! only across independent output rows), so results are bit-identical across
//! runs, hosts, and worker counts.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{sample_without_replacement, stream_rng};

/// Covariance normalization convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceEstimator {
    /// Divide by n - 1.
    Unbiased,
    /// Divide by n.
    Biased,
}

impl CovarianceEstimator {
    pub fn name(self) -> &'static str {
        match self {
            CovarianceEstimator::Unbiased => "unbiased",
            CovarianceEstimator::Biased => "biased",
        }
    }
}

/// Mean and covariance of an embedding set, with the bookkeeping needed to
/// reproduce them.
#[derive(Debug, Clone)]
pub struct GaussianMoments {
    mean: Array1<f64>,
    covariance: Array2<f64>,
    sample_count: usize,
    estimator: CovarianceEstimator,
}

pub const SYMMETRY_TOLERANCE: f64 = 1e-9;
const EIGENVALUE_CLAMP: f64 = 1e-10;
const RESULT_CLAMP: f64 = -1e-8;
const PSD_TOLERANCE: f64 = 1e-6;

impl GaussianMoments {
    /// Validates that the covariance is square, matches the mean dimension,
    /// and is symmetric within 1e-9.
    pub fn new(
        mean: Array1<f64>,
        covariance: Array2<f64>,
        sample_count: usize,
        estimator: CovarianceEstimator,
    ) -> Result<Self> {
        let d = mean.len();
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::DimensionMismatch {
                left: d,
                right: covariance.nrows().max(covariance.ncols()),
            });
        }
        for i in 0..d {
            for j in i + 1..d {
                if (covariance[[i, j]] - covariance[[j, i]]).abs() > SYMMETRY_TOLERANCE {
                    return Err(Error::BadMixtureSpec {
                        reason: format!(
                            "covariance asymmetric at ({i}, {j}): {} vs {}",
                            covariance[[i, j]],
                            covariance[[j, i]]
                        ),
                    });
                }
            }
        }
        Ok(GaussianMoments {
            mean,
            covariance,
            sample_count,
            estimator,
        })
    }

    pub fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &Array2<f64> {
        &self.covariance
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn estimator(&self) -> CovarianceEstimator {
        self.estimator
    }
}

/// Estimates moments from an `(n, d)` embedding matrix in f64.
pub fn estimate_moments(
    embeddings: &Array2<f32>,
    estimator: CovarianceEstimator,
) -> Result<GaussianMoments> {
    let n = embeddings.nrows();
    let d = embeddings.ncols();
    if n < 2 {
        return Err(Error::TooFewMomentSamples { n });
    }
    if embeddings.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput {
            operation: "estimate_moments",
        });
    }

    let mut mean = vec![0f64; d];
    for row in embeddings.rows() {
        let row = row.as_slice().expect("contiguous rows");
        for (j, &v) in row.iter().enumerate() {
            mean[j] += v as f64;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }

    let divisor = match estimator {
        CovarianceEstimator::Unbiased => (n - 1) as f64,
        CovarianceEstimator::Biased => n as f64,
    };
    let x = embeddings.as_slice().expect("standard layout");
    // Upper-triangle rows are independent sums accumulated in fixed sample
    // order, so splitting them across workers cannot change any bit.
    let rows: Vec<Vec<f64>> = (0..d)
        .into_par_iter()
        .map(|i| {
            let mi = mean[i];
            let mut acc = vec![0f64; d - i];
            for r in 0..n {
                let row = &x[r * d..(r + 1) * d];
                let zi = row[i] as f64 - mi;
                for (off, j) in (i..d).enumerate() {
                    acc[off] += zi * (row[j] as f64 - mean[j]);
                }
            }
            for v in &mut acc {
                *v /= divisor;
            }
            acc
        })
        .collect();
    let mut covariance = Array2::zeros((d, d));
    for (i, acc) in rows.into_iter().enumerate() {
        for (off, v) in acc.into_iter().enumerate() {
            let j = i + off;
            covariance[[i, j]] = v;
            covariance[[j, i]] = v;
        }
    }
    GaussianMoments::new(Array1::from_vec(mean), covariance, n, estimator)
}

fn to_na(m: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

/// Symmetric eigendecomposition; errors if an eigenvalue is materially
/// negative relative to the trace.
fn checked_eigen(cov: &Array2<f64>, side: &'static str) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let na = to_na(cov);
    let trace = na.trace();
    let eigen = nalgebra::SymmetricEigen::new(na);
    let floor = -PSD_TOLERANCE * trace.max(0.0) - PSD_TOLERANCE;
    for &lambda in eigen.eigenvalues.iter() {
        if lambda < floor {
            return Err(Error::NotPositiveSemidefinite {
                side,
                eigenvalue: lambda,
                trace,
            });
        }
    }
    Ok((eigen.eigenvectors, eigen.eigenvalues))
}

fn bitwise_equal(a: &GaussianMoments, b: &GaussianMoments) -> bool {
    a.dim() == b.dim()
        && a.mean
            .iter()
            .zip(b.mean.iter())
            .all(|(x, y)| x.to_bits() == y.to_bits())
        && a.covariance
            .iter()
            .zip(b.covariance.iter())
            .all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Squared Fréchet distance between two Gaussian summaries.
pub fn frechet_gaussian_distance(a: &GaussianMoments, b: &GaussianMoments) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    // Identical summaries are exactly distance zero; no eigensolve noise.
    if bitwise_equal(a, b) {
        return Ok(0.0);
    }

    let (vecs_a, vals_a) = checked_eigen(&a.covariance, "left")?;
    checked_eigen(&b.covariance, "right")?;

    // sqrt(C_a) via its eigendecomposition, negative dust clamped.
    let sqrt_vals = DVector::from_iterator(
        vals_a.len(),
        vals_a.iter().map(|&l| if l < EIGENVALUE_CLAMP { 0.0 } else { l.sqrt() }),
    );
    let sqrt_a = &vecs_a * DMatrix::from_diagonal(&sqrt_vals) * vecs_a.transpose();

    let mut inner = &sqrt_a * to_na(&b.covariance) * &sqrt_a;
    // Symmetrize before the eigensolve; the product picks up tiny asymmetry.
    let inner_t = inner.transpose();
    inner = (inner + inner_t) * 0.5;
    let eigen = nalgebra::SymmetricEigen::new(inner);
    let trace_sqrt: f64 = eigen
        .eigenvalues
        .iter()
        .map(|&l| if l < EIGENVALUE_CLAMP { 0.0 } else { l.sqrt() })
        .sum();

    let mean_term: f64 = a
        .mean
        .iter()
        .zip(b.mean.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    let trace_a: f64 = (0..a.dim()).map(|i| a.covariance[[i, i]]).sum();
    let trace_b: f64 = (0..b.dim()).map(|i| b.covariance[[i, i]]).sum();

    let mut distance = mean_term + trace_a + trace_b - 2.0 * trace_sqrt;
    if distance < 0.0 {
        debug_assert!(distance > RESULT_CLAMP, "distance {distance} beyond clamp");
        distance = 0.0;
    }
    Ok(distance)
}

/// Which sampling route feeds the distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FidVariant {
    /// All real samples vs. all generated samples (at least
    /// [`FULL_GENERATED_FLOOR`] of them), unbiased covariance.
    Full,
    /// A seeded [`FIVE_K`]-per-side subsample, biased covariance.
    FiveK,
}

impl FidVariant {
    pub fn name(self) -> &'static str {
        match self {
            FidVariant::Full => "full",
            FidVariant::FiveK => "5k",
        }
    }
}

pub const FULL_GENERATED_FLOOR: usize = 10_000;
pub const FIVE_K: usize = 5_000;

#[derive(Debug, Clone, Copy)]
pub struct FidProtocol {
    pub variant: FidVariant,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct FidResult {
    pub distance: f64,
    pub real_used: usize,
    pub generated_used: usize,
    pub estimator: CovarianceEstimator,
}

fn subsample_rows(x: &Array2<f32>, count: usize, seed: u64, stream: u64) -> Array2<f32> {
    let mut rng = stream_rng(seed, stream);
    let picks = sample_without_replacement(x.nrows(), count, &mut rng);
    x.select(ndarray::Axis(0), &picks)
}

/// Runs one of the two standard comparison routes over raw embedding
/// matrices.
pub fn fid_protocol(
    real: &Array2<f32>,
    generated: &Array2<f32>,
    protocol: &FidProtocol,
) -> Result<FidResult> {
    if real.ncols() != generated.ncols() {
        return Err(Error::DimensionMismatch {
            left: real.ncols(),
            right: generated.ncols(),
        });
    }
    match protocol.variant {
        FidVariant::Full => {
            if generated.nrows() < FULL_GENERATED_FLOOR {
                return Err(Error::InsufficientFidSamples {
                    variant: "full",
                    side: "generated",
                    minimum: FULL_GENERATED_FLOOR,
                    got: generated.nrows(),
                });
            }
            let ma = estimate_moments(real, CovarianceEstimator::Unbiased)?;
            let mb = estimate_moments(generated, CovarianceEstimator::Unbiased)?;
            Ok(FidResult {
                distance: frechet_gaussian_distance(&ma, &mb)?,
                real_used: real.nrows(),
                generated_used: generated.nrows(),
                estimator: CovarianceEstimator::Unbiased,
            })
        }
        FidVariant::FiveK => {
            for (side, rows) in [("real", real.nrows()), ("generated", generated.nrows())] {
                if rows < FIVE_K {
                    return Err(Error::InsufficientFidSamples {
                        variant: "5k",
                        side,
                        minimum: FIVE_K,
                        got: rows,
                    });
                }
            }
            let real_sub = subsample_rows(real, FIVE_K, protocol.seed, 0);
            let generated_sub = subsample_rows(generated, FIVE_K, protocol.seed, 1);
            let ma = estimate_moments(&real_sub, CovarianceEstimator::Biased)?;
            let mb = estimate_moments(&generated_sub, CovarianceEstimator::Biased)?;
            Ok(FidResult {
                distance: frechet_gaussian_distance(&ma, &mb)?,
                real_used: FIVE_K,
                generated_used: FIVE_K,
                estimator: CovarianceEstimator::Biased,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, arr2, Array2};
    use rand::Rng;

    fn moments(mean: &[f64], cov_diag: &[f64]) -> GaussianMoments {
        let d = mean.len();
        let mut cov = Array2::zeros((d, d));
        for i in 0..d {
            cov[[i, i]] = cov_diag[i];
        }
        GaussianMoments::new(arr1(mean), cov, 100, CovarianceEstimator::Unbiased).unwrap()
    }

    #[test]
    fn identical_moments_give_exact_zero() {
        let a = moments(&[0.3, -1.2, 5.0], &[1.0, 2.0, 0.5]);
        let b = a.clone();
        assert_eq!(frechet_gaussian_distance(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn hand_computed_diagonal_case() {
        // |dm|^2 = 1, tr C_a = 8, tr C_b = 2, tr sqrt(C_a C_b) = tr diag(2,2) = 4:
        // d^2 = 1 + 8 + 2 - 8 = 3.
        let a = moments(&[0.0, 0.0], &[4.0, 4.0]);
        let b = moments(&[1.0, 0.0], &[1.0, 1.0]);
        let d = frechet_gaussian_distance(&a, &b).unwrap();
        assert!((d - 3.0).abs() < 1e-9, "d^2 = {d}");
    }

    #[test]
    fn commuting_diagonal_closed_form() {
        let mut rng = crate::rng::stream_rng(2, 0);
        for _ in 0..20 {
            let d = rng.gen_range(1..6);
            let mean_a: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let mean_b: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let var_a: Vec<f64> = (0..d).map(|_| rng.gen_range(0.1..4.0)).collect();
            let var_b: Vec<f64> = (0..d).map(|_| rng.gen_range(0.1..4.0)).collect();
            let expected: f64 = mean_a
                .iter()
                .zip(&mean_b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                + var_a
                    .iter()
                    .zip(&var_b)
                    .map(|(x, y)| (x.sqrt() - y.sqrt()) * (x.sqrt() - y.sqrt()))
                    .sum::<f64>();
            let got = frechet_gaussian_distance(&moments(&mean_a, &var_a), &moments(&mean_b, &var_b))
                .unwrap();
            assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
        }
    }

    fn random_spd(d: usize, rng: &mut impl Rng) -> Array2<f64> {
        let w = Array2::from_shape_fn((d, d), |_| rng.gen_range(-1.0..1.0));
        let mut spd = Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    acc += w[[i, k]] * w[[j, k]];
                }
                spd[[i, j]] = acc;
            }
            spd[[i, i]] += 0.05;
        }
        spd
    }

    #[test]
    fn cross_term_matches_general_eigenvalues_of_the_product() {
        // tr sqrt(C_a C_b) equals the sum of square roots of the eigenvalues
        // of the (nonsymmetric) product C_a C_b; check the symmetric route
        // against nalgebra's general eigenvalue solver.
        let mut rng = crate::rng::stream_rng(3, 0);
        for trial in 0..10 {
            let d = 4;
            let ca = random_spd(d, &mut rng);
            let cb = random_spd(d, &mut rng);
            let mean = arr1(&vec![0.0; d]);
            let a = GaussianMoments::new(mean.clone(), ca.clone(), 10, CovarianceEstimator::Unbiased).unwrap();
            let b = GaussianMoments::new(mean, cb.clone(), 10, CovarianceEstimator::Unbiased).unwrap();
            let got = frechet_gaussian_distance(&a, &b).unwrap();

            let product = to_na(&ca) * to_na(&cb);
            let eigs = product.complex_eigenvalues();
            let trace_sqrt: f64 = eigs.iter().map(|c| c.re.max(0.0).sqrt()).sum();
            let trace_a: f64 = (0..d).map(|i| ca[[i, i]]).sum();
            let trace_b: f64 = (0..d).map(|i| cb[[i, i]]).sum();
            let expected = trace_a + trace_b - 2.0 * trace_sqrt;
            assert!(
                (got - expected).abs() < 1e-6,
                "trial {trial}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn distance_is_symmetric() {
        let mut rng = crate::rng::stream_rng(4, 0);
        let ca = random_spd(5, &mut rng);
        let cb = random_spd(5, &mut rng);
        let ma: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mb: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let a = GaussianMoments::new(arr1(&ma), ca, 10, CovarianceEstimator::Unbiased).unwrap();
        let b = GaussianMoments::new(arr1(&mb), cb, 10, CovarianceEstimator::Unbiased).unwrap();
        let ab = frechet_gaussian_distance(&a, &b).unwrap();
        let ba = frechet_gaussian_distance(&b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-9, "{ab} vs {ba}");
        assert!(ab > 0.0);
    }

    #[test]
    fn rank_deficient_covariances_are_handled() {
        // Covariance of points on a line is rank 1; the clamp keeps the
        // square root real.
        let cov = arr2(&[[1.0, 1.0], [1.0, 1.0]]);
        let a = GaussianMoments::new(arr1(&[0.0, 0.0]), cov.clone(), 10, CovarianceEstimator::Unbiased).unwrap();
        let b = GaussianMoments::new(arr1(&[0.0, 0.0]), cov.mapv(|v| v * 4.0), 10, CovarianceEstimator::Unbiased).unwrap();
        let d = frechet_gaussian_distance(&a, &b).unwrap();
        // Eigenvalues 2 and 8 on the shared eigenvector: (sqrt(2)-sqrt(8))^2 = 2.
        assert!((d - 2.0).abs() < 1e-9, "d = {d}");
    }

    #[test]
    fn negative_eigenvalues_are_rejected() {
        let cov = arr2(&[[0.0, 2.0], [2.0, 0.0]]); // eigenvalues +2, -2
        let bad = GaussianMoments::new(arr1(&[0.0, 0.0]), cov, 10, CovarianceEstimator::Unbiased).unwrap();
        let good = moments(&[0.0, 0.0], &[1.0, 1.0]);
        assert!(matches!(
            frechet_gaussian_distance(&bad, &good),
            Err(Error::NotPositiveSemidefinite { side: "left", .. })
        ));
        assert!(matches!(
            frechet_gaussian_distance(&good, &bad),
            Err(Error::NotPositiveSemidefinite { side: "right", .. })
        ));
    }

    #[test]
    fn moments_match_hand_computation() {
        let x = arr2(&[[1.0f32, 2.0], [3.0, 4.0], [5.0, 9.0]]);
        let m = estimate_moments(&x, CovarianceEstimator::Unbiased).unwrap();
        assert_eq!(m.mean()[0], 3.0);
        assert_eq!(m.mean()[1], 5.0);
        // Centered: [(-2,-3), (0,-1), (2,4)]; unbiased divisor 2.
        assert!((m.covariance()[[0, 0]] - 4.0).abs() < 1e-12);
        assert!((m.covariance()[[0, 1]] - 7.0).abs() < 1e-12);
        assert!((m.covariance()[[1, 1]] - 13.0).abs() < 1e-12);
        assert_eq!(m.covariance()[[0, 1]], m.covariance()[[1, 0]]);

        let biased = estimate_moments(&x, CovarianceEstimator::Biased).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let expected = m.covariance()[[i, j]] * 2.0 / 3.0;
                assert!((biased.covariance()[[i, j]] - expected).abs() < 1e-12);
            }
        }
        assert_eq!(m.sample_count(), 3);
        assert_eq!(biased.estimator(), CovarianceEstimator::Biased);
    }

    #[test]
    fn moments_reject_tiny_or_non_finite_input() {
        let one = arr2(&[[1.0f32, 2.0]]);
        assert!(matches!(
            estimate_moments(&one, CovarianceEstimator::Unbiased),
            Err(Error::TooFewMomentSamples { n: 1 })
        ));
        let nan = arr2(&[[1.0f32, f32::NAN], [0.0, 0.0]]);
        assert!(matches!(
            estimate_moments(&nan, CovarianceEstimator::Unbiased),
            Err(Error::NonFiniteInput { .. })
        ));
    }

    #[test]
    fn asymmetric_covariance_is_rejected_at_construction() {
        let cov = arr2(&[[1.0, 0.5], [0.2, 1.0]]);
        assert!(GaussianMoments::new(arr1(&[0.0, 0.0]), cov, 5, CovarianceEstimator::Unbiased).is_err());
    }

    fn gaussian_embeddings(n: usize, d: usize, shift: f32, seed: u64) -> Array2<f32> {
        let mut rng = crate::rng::stream_rng(seed, 0);
        Array2::from_shape_fn((n, d), |_| {
            shift + rng.gen_range(-1.0f32..1.0)
        })
    }

    #[test]
    fn full_variant_enforces_generated_floor() {
        let real = gaussian_embeddings(100, 3, 0.0, 1);
        let generated = gaussian_embeddings(9_999, 3, 0.0, 2);
        let protocol = FidProtocol { variant: FidVariant::Full, seed: 0 };
        assert!(matches!(
            fid_protocol(&real, &generated, &protocol),
            Err(Error::InsufficientFidSamples { variant: "full", side: "generated", minimum: 10_000, got: 9_999 })
        ));
        let enough = gaussian_embeddings(10_000, 3, 0.5, 2);
        let result = fid_protocol(&real, &enough, &protocol).unwrap();
        assert_eq!(result.generated_used, 10_000);
        assert_eq!(result.estimator, CovarianceEstimator::Unbiased);
        assert!(result.distance > 0.0);
    }

    #[test]
    fn five_k_variant_subsamples_deterministically() {
        let real = gaussian_embeddings(6_000, 3, 0.0, 3);
        let generated = gaussian_embeddings(7_000, 3, 0.3, 4);
        let protocol = FidProtocol { variant: FidVariant::FiveK, seed: 9 };
        let a = fid_protocol(&real, &generated, &protocol).unwrap();
        let b = fid_protocol(&real, &generated, &protocol).unwrap();
        assert_eq!(a.distance.to_bits(), b.distance.to_bits());
        assert_eq!(a.real_used, 5_000);
        assert_eq!(a.estimator, CovarianceEstimator::Biased);

        let other_seed = fid_protocol(&real, &generated, &FidProtocol { variant: FidVariant::FiveK, seed: 10 }).unwrap();
        assert_ne!(a.distance.to_bits(), other_seed.distance.to_bits());

        let small = gaussian_embeddings(4_999, 3, 0.0, 5);
        assert!(matches!(
            fid_protocol(&small, &generated, &protocol),
            Err(Error::InsufficientFidSamples { variant: "5k", side: "real", .. })
        ));
    }
}
