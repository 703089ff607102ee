//! Laplacian pyramids over square image batches.
//!
//! The smoothing kernel is the separable 5-tap binomial (1, 4, 6, 4, 1)/16
//! with mirror (reflect-101) padding. REDUCE blurs and keeps even pixels;
//! EXPAND zero-stuffs and blurs with the doubled kernel, which preserves
//! constants exactly in the algebraic sense. A pyramid stores detail levels
//! finest to coarsest plus the low-pass base, and REDUCE stops once the side
//! reaches `min_resolution`, so the side must be `min_resolution * 2^k`.

use ndarray::{Array2, Array4, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};

const KERNEL: [f32; 5] = [1.0, 4.0, 6.0, 4.0, 1.0];

/// Mirror index about the edge samples (reflect-101): -1 -> 1, n -> n-2.
fn reflect(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * n - 2 - i;
        } else {
            return i as usize;
        }
        if n == 1 {
            return 0;
        }
    }
}

/// Separable blur with per-axis kernel scale; `scale` is 1 for REDUCE and 2
/// for EXPAND (compensating the zero-stuffed grid).
fn blur(plane: &ArrayView2<'_, f32>, scale: f32) -> Array2<f32> {
    let (h, w) = plane.dim();
    let mut rows_pass = Array2::zeros((h, w));
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0f32;
            for (t, &k) in KERNEL.iter().enumerate() {
                let src = reflect(c as isize + t as isize - 2, w);
                acc += k * plane[[r, src]];
            }
            rows_pass[[r, c]] = acc * scale / 16.0;
        }
    }
    let mut out = Array2::zeros((h, w));
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0f32;
            for (t, &k) in KERNEL.iter().enumerate() {
                let src = reflect(r as isize + t as isize - 2, h);
                acc += k * rows_pass[[src, c]];
            }
            out[[r, c]] = acc * scale / 16.0;
        }
    }
    out
}

fn reduce(plane: &ArrayView2<'_, f32>) -> Array2<f32> {
    let blurred = blur(plane, 1.0);
    let (h, w) = plane.dim();
    Array2::from_shape_fn((h / 2, w / 2), |(r, c)| blurred[[2 * r, 2 * c]])
}

fn expand(plane: &ArrayView2<'_, f32>) -> Array2<f32> {
    let (h, w) = plane.dim();
    let mut stuffed = Array2::zeros((2 * h, 2 * w));
    for r in 0..h {
        for c in 0..w {
            stuffed[[2 * r, 2 * c]] = plane[[r, c]];
        }
    }
    blur(&stuffed.view(), 2.0)
}

/// Detail levels finest to coarsest plus the low-pass base.
#[derive(Debug, Clone)]
pub struct LaplacianPyramid {
    details: Vec<Array4<f32>>,
    base: Array4<f32>,
}

impl LaplacianPyramid {
    pub fn detail_levels(&self) -> &[Array4<f32>] {
        &self.details
    }

    pub fn base(&self) -> &Array4<f32> {
        &self.base
    }

    /// All bands with their resolutions: detail levels finest to coarsest,
    /// then the base.
    pub fn levels(&self) -> Vec<(usize, &Array4<f32>)> {
        let mut out: Vec<(usize, &Array4<f32>)> = self
            .details
            .iter()
            .map(|d| (d.shape()[2], d))
            .collect();
        out.push((self.base.shape()[2], &self.base));
        out
    }
}

fn validate_side(side: usize, min_resolution: usize) -> Result<()> {
    let mut s = min_resolution.max(1);
    loop {
        if s == side {
            return Ok(());
        }
        if s > side {
            return Err(Error::BadPyramidSide {
                side,
                min_resolution,
            });
        }
        s *= 2;
    }
}

/// Builds the pyramid of a `(n, channels, side, side)` batch.
pub fn build_laplacian_pyramid(images: &Array4<f32>, min_resolution: usize) -> Result<LaplacianPyramid> {
    let (n, channels, h, w) = images.dim();
    if h != w {
        return Err(Error::NonSquareImages {
            height: h,
            width: w,
        });
    }
    validate_side(h, min_resolution)?;

    let level_count = (h / min_resolution.max(1)).trailing_zeros() as usize;
    let planes = n * channels;
    // Per-plane pyramids; plane index (image, channel) is preserved by the
    // ordered collect, so worker count cannot reorder anything.
    let per_plane: Vec<(Vec<Array2<f32>>, Array2<f32>)> = (0..planes)
        .into_par_iter()
        .map(|p| {
            let (img, ch) = (p / channels, p % channels);
            let mut current = images
                .index_axis(Axis(0), img)
                .index_axis(Axis(0), ch)
                .to_owned();
            let mut details = Vec::with_capacity(level_count);
            for _ in 0..level_count {
                let next = reduce(&current.view());
                let expanded = expand(&next.view());
                details.push(&current - &expanded);
                current = next;
            }
            (details, current)
        })
        .collect();

    let mut details = Vec::with_capacity(level_count);
    for level in 0..level_count {
        let side = h >> level;
        let mut buf = Array4::zeros((n, channels, side, side));
        for p in 0..planes {
            let (img, ch) = (p / channels, p % channels);
            buf.index_axis_mut(Axis(0), img)
                .index_axis_mut(Axis(0), ch)
                .assign(&per_plane[p].0[level]);
        }
        details.push(buf);
    }
    let base_side = h >> level_count;
    let mut base = Array4::zeros((n, channels, base_side, base_side));
    for p in 0..planes {
        let (img, ch) = (p / channels, p % channels);
        base.index_axis_mut(Axis(0), img)
            .index_axis_mut(Axis(0), ch)
            .assign(&per_plane[p].1);
    }
    Ok(LaplacianPyramid { details, base })
}

/// Inverts the pyramid: EXPAND the base up through every detail level.
pub fn reconstruct(pyramid: &LaplacianPyramid) -> Array4<f32> {
    let (n, channels, _, _) = pyramid.base.dim();
    let mut current: Vec<Array2<f32>> = (0..n * channels)
        .map(|p| {
            let (img, ch) = (p / channels, p % channels);
            pyramid
                .base
                .index_axis(Axis(0), img)
                .index_axis(Axis(0), ch)
                .to_owned()
        })
        .collect();
    for detail in pyramid.details.iter().rev() {
        for (p, plane) in current.iter_mut().enumerate() {
            let (img, ch) = (p / channels, p % channels);
            let d = detail.index_axis(Axis(0), img);
            let d = d.index_axis(Axis(0), ch);
            *plane = &expand(&plane.view()) + &d;
        }
    }
    let side = current[0].nrows();
    let mut out = Array4::zeros((n, channels, side, side));
    for (p, plane) in current.into_iter().enumerate() {
        let (img, ch) = (p / channels, p % channels);
        out.index_axis_mut(Axis(0), img)
            .index_axis_mut(Axis(0), ch)
            .assign(&plane);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch_from_fn(n: usize, c: usize, side: usize, f: impl Fn(usize, usize, usize, usize) -> f32) -> Array4<f32> {
        Array4::from_shape_fn((n, c, side, side), |(i, ch, r, col)| f(i, ch, r, col))
    }

    #[test]
    fn constant_image_has_exactly_zero_detail() {
        // 0.5 is dyadic: every kernel product and the /16 are exact, so the
        // detail bands cancel bit for bit.
        let images = batch_from_fn(2, 1, 32, |_, _, _, _| 0.5);
        let pyr = build_laplacian_pyramid(&images, 16).unwrap();
        assert_eq!(pyr.detail_levels().len(), 1);
        for v in pyr.detail_levels()[0].iter() {
            assert_eq!(*v, 0.0);
        }
        for v in pyr.base().iter() {
            assert_eq!(*v, 0.5);
        }
    }

    #[test]
    fn reconstruction_inverts_the_pyramid() {
        let images = batch_from_fn(2, 3, 32, |i, ch, r, c| {
            ((i + 1) * (ch + 2) * (r * 31 + c * 7 + 11) % 251) as f32 / 251.0
        });
        let pyr = build_laplacian_pyramid(&images, 8).unwrap();
        assert_eq!(pyr.detail_levels().len(), 2);
        let rec = reconstruct(&pyr);
        for (a, b) in rec.iter().zip(images.iter()) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn level_resolutions_run_finest_to_coarsest() {
        let images = batch_from_fn(1, 1, 64, |_, _, r, c| (r + c) as f32);
        let pyr = build_laplacian_pyramid(&images, 16).unwrap();
        let resolutions: Vec<usize> = pyr.levels().iter().map(|(res, _)| *res).collect();
        assert_eq!(resolutions, vec![64, 32, 16]);
        assert_eq!(pyr.levels()[0].1.dim(), (1, 1, 64, 64));
        assert_eq!(pyr.base().dim(), (1, 1, 16, 16));
    }

    #[test]
    fn side_equal_to_min_resolution_is_base_only() {
        let images = batch_from_fn(1, 1, 16, |_, _, r, c| (r * c) as f32);
        let pyr = build_laplacian_pyramid(&images, 16).unwrap();
        assert!(pyr.detail_levels().is_empty());
        assert_eq!(pyr.base(), &images);
    }

    #[test]
    fn rejects_bad_geometry() {
        let non_square = Array4::<f32>::zeros((1, 1, 32, 16));
        assert!(matches!(
            build_laplacian_pyramid(&non_square, 16),
            Err(Error::NonSquareImages { height: 32, width: 16 })
        ));
        let not_pow2 = Array4::<f32>::zeros((1, 1, 28, 28));
        assert!(matches!(
            build_laplacian_pyramid(&not_pow2, 16),
            Err(Error::BadPyramidSide { side: 28, .. })
        ));
        let too_small = Array4::<f32>::zeros((1, 1, 8, 8));
        assert!(matches!(
            build_laplacian_pyramid(&too_small, 16),
            Err(Error::BadPyramidSide { side: 8, .. })
        ));
    }

    #[test]
    fn reduce_halves_and_preserves_constants() {
        let plane = Array2::from_elem((8, 8), 0.25f32);
        let r = reduce(&plane.view());
        assert_eq!(r.dim(), (4, 4));
        for v in r.iter() {
            assert_eq!(*v, 0.25);
        }
        let e = expand(&r.view());
        assert_eq!(e.dim(), (8, 8));
        for v in e.iter() {
            assert_eq!(*v, 0.25);
        }
    }

    #[test]
    fn blur_spreads_an_interior_impulse_as_the_outer_product_kernel() {
        // Impulse more than two pixels from every border: no reflection is
        // involved, so the response is the separable kernel itself and total
        // mass is conserved.
        let mut plane = Array2::zeros((9, 9));
        plane[[4, 4]] = 16.0f32;
        let b = blur(&plane.view(), 1.0);
        let total: f32 = b.iter().sum();
        assert!((total - 16.0).abs() < 1e-4);
        assert!((b[[4, 4]] - 16.0 * 36.0 / 256.0).abs() < 1e-5);
        assert!((b[[3, 4]] - 16.0 * 24.0 / 256.0).abs() < 1e-5);
        assert!((b[[3, 3]] - 16.0 * 16.0 / 256.0).abs() < 1e-5);
    }

    #[test]
    fn mirror_padding_folds_edge_taps_back_inside() {
        // The center of a 5x5 sits exactly two pixels from each border, so
        // its outermost taps reflect back onto in-range rows: each 1-D pass
        // gains 18/16 and the 2-D total is 16 * (18/16)^2.
        let mut plane = Array2::zeros((5, 5));
        plane[[2, 2]] = 16.0f32;
        let b = blur(&plane.view(), 1.0);
        let total: f32 = b.iter().sum();
        assert!((total - 16.0 * (18.0 / 16.0) * (18.0 / 16.0)).abs() < 1e-4);
        assert!((b[[0, 2]] - (2.0 * 6.0) / 16.0).abs() < 1e-5);
    }
}
