use std::f64::consts::SQRT_2;
use std::ops::RangeInclusive;

use super::{ImageGrid, Kernel};
use crate::error::{invalid, Result};
use crate::par;

#[inline]
fn clamp_index(i: isize, len: usize) -> usize {
    i.clamp(0, len as isize - 1) as usize
}

fn check_kernel_fits(image: &ImageGrid, kernel: &Kernel) -> Result<()> {
    let limit = 2 * image.height().min(image.width());
    if kernel.size() >= limit {
        return Err(invalid(format!(
            "kernel of size {} is too large for a {}x{} image",
            kernel.size(),
            image.height(),
            image.width()
        )));
    }
    Ok(())
}

/// Correlates `image` with `kernel` (no kernel flip) under replicate
/// padding. Output has the input's dimensions.
pub fn convolve(image: &ImageGrid, kernel: &Kernel) -> Result<ImageGrid> {
    check_kernel_fits(image, kernel)?;
    let (h, w) = image.dims();
    let size = kernel.size();
    let r = kernel.radius() as isize;
    let src = image.as_slice();
    let taps = kernel.taps();
    // Column lookups are identical for every row.
    let cols: Vec<usize> = (0..w)
        .flat_map(|x| (0..size).map(move |kx| clamp_index(x as isize + kx as isize - r, w)))
        .collect();

    let mut out = vec![0.0; h * w];
    par::for_each_row(&mut out, w, |y, row| {
        for (x, px) in row.iter_mut().enumerate() {
            let col = &cols[x * size..(x + 1) * size];
            let mut acc = 0.0;
            for ky in 0..size {
                let sy = clamp_index(y as isize + ky as isize - r, h);
                let src_row = &src[sy * w..(sy + 1) * w];
                let krow = &taps[ky * size..(ky + 1) * size];
                for (t, &sx) in krow.iter().zip(col) {
                    if *t != 0.0 {
                        acc += t * src_row[sx];
                    }
                }
            }
            *px = acc;
        }
    });
    Ok(ImageGrid::from_raw(h, w, out))
}

/// Source indices `p` in `0..len` with `clamp(p + d) == q`.
fn preimage(q: usize, d: isize, len: usize) -> Option<RangeInclusive<usize>> {
    let q = q as isize;
    let last = len as isize - 1;
    let lo = if q == 0 { 0 } else { (q - d).max(0) };
    let hi = if q == last { last } else { (q - d).min(last) };
    (lo <= hi).then_some(lo as usize..=hi as usize)
}

/// Adjoint of [`convolve`]: for every `x` and `u`,
/// `<convolve(x, k), u> == <x, convolve_transpose(u, k)>`.
///
/// Replicate padding folds out-of-range taps back onto the border, so
/// border pixels gather from every output position that clamped onto them.
pub fn convolve_transpose(upstream: &ImageGrid, kernel: &Kernel) -> Result<ImageGrid> {
    check_kernel_fits(upstream, kernel)?;
    let (h, w) = upstream.dims();
    let size = kernel.size();
    let r = kernel.radius() as isize;
    let u = upstream.as_slice();
    let taps = kernel.taps();
    let col_ranges: Vec<Option<RangeInclusive<usize>>> = (0..w)
        .flat_map(|qx| (0..size).map(move |kx| preimage(qx, kx as isize - r, w)))
        .collect();

    let mut out = vec![0.0; h * w];
    par::for_each_row(&mut out, w, |qy, row| {
        let row_ranges: Vec<Option<RangeInclusive<usize>>> = (0..size)
            .map(|ky| preimage(qy, ky as isize - r, h))
            .collect();
        for (qx, px) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (ky, ys) in row_ranges.iter().enumerate() {
                let Some(ys) = ys else { continue };
                for kx in 0..size {
                    let t = taps[ky * size + kx];
                    if t == 0.0 {
                        continue;
                    }
                    let Some(xs) = &col_ranges[qx * size + kx] else {
                        continue;
                    };
                    let mut s = 0.0;
                    for py in ys.clone() {
                        for px in xs.clone() {
                            s += u[py * w + px];
                        }
                    }
                    acc += t * s;
                }
            }
            *px = acc;
        }
    });
    Ok(ImageGrid::from_raw(h, w, out))
}

/// `1 / (4·sqrt(2))`: bounds the magnitude of a unit-height step by one.
const SOBEL_SCALE: f64 = 1.0 / (4.0 * SQRT_2);

/// Gradient magnitude `sqrt(gx² + gy²)` from the 3x3 Sobel pair
/// ([`Kernel::sobel_x`], [`Kernel::sobel_y`]) under replicate padding,
/// scaled by `1 / (4·sqrt(2))`.
///
/// Responses are accumulated as differences of opposite taps, so a
/// constant neighborhood gives exactly zero.
pub fn sobel_magnitude(image: &ImageGrid) -> Result<ImageGrid> {
    check_kernel_fits(image, &Kernel::sobel_x())?;
    let (h, w) = image.dims();
    let src = image.as_slice();
    let mut out = vec![0.0; h * w];
    par::for_each_row(&mut out, w, |y, row| {
        let up = &src[clamp_index(y as isize - 1, h) * w..][..w];
        let mid = &src[y * w..][..w];
        let down = &src[clamp_index(y as isize + 1, h) * w..][..w];
        for (x, px) in row.iter_mut().enumerate() {
            let l = clamp_index(x as isize - 1, w);
            let r = clamp_index(x as isize + 1, w);
            let gx = (up[r] - up[l]) + 2.0 * (mid[r] - mid[l]) + (down[r] - down[l]);
            let gy = (down[l] - up[l]) + 2.0 * (down[x] - up[x]) + (down[r] - up[r]);
            *px = gx.hypot(gy) * SOBEL_SCALE;
        }
    });
    Ok(ImageGrid::from_raw(h, w, out))
}

/// Five-point Laplacian under replicate padding.
pub fn laplacian(image: &ImageGrid) -> Result<ImageGrid> {
    convolve(image, &Kernel::laplacian())
}

/// Adjoint of [`laplacian`].
pub fn laplacian_transpose(upstream: &ImageGrid) -> Result<ImageGrid> {
    convolve_transpose(upstream, &Kernel::laplacian())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::disk_kernel;

    fn impulse(n: usize, v: f64) -> ImageGrid {
        ImageGrid::from_fn(n, n, |y, x| if y == n / 2 && x == n / 2 { v } else { 0.0 })
    }

    #[test]
    fn constant_is_preserved_by_disk() {
        let img = ImageGrid::filled(9, 7, 0.37);
        for radius in 1..=3 {
            let out = convolve(&img, &disk_kernel(radius).unwrap()).unwrap();
            for &v in out.as_slice() {
                assert!((v - 0.37).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn identity_kernel_is_identity() {
        let img = ImageGrid::from_fn(4, 5, |y, x| (y * 5 + x) as f64 * 0.1 - 1.0);
        assert_eq!(convolve(&img, &Kernel::identity()).unwrap(), img);
    }

    #[test]
    fn impulse_through_radius_one_disk() {
        let out = convolve(&impulse(3, 1.0), &disk_kernel(1).unwrap()).unwrap();
        let expect = [0.0, 0.2, 0.0, 0.2, 0.2, 0.2, 0.0, 0.2, 0.0];
        for (a, b) in out.as_slice().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn oversized_kernel_is_rejected() {
        let img = ImageGrid::filled(2, 8, 0.0);
        assert!(convolve(&img, &disk_kernel(2).unwrap()).is_err());
        assert!(convolve(&img, &disk_kernel(1).unwrap()).is_ok());
    }

    #[test]
    fn laplacian_impulse_and_constants() {
        let out = laplacian(&impulse(5, 1.0)).unwrap();
        assert_eq!(out.get(2, 2), -4.0);
        for (y, x) in [(1, 2), (3, 2), (2, 1), (2, 3)] {
            assert_eq!(out.get(y, x), 1.0);
        }
        assert_eq!(out.get(1, 1), 0.0);

        let flat = laplacian(&ImageGrid::filled(6, 6, -0.3)).unwrap();
        assert!(flat.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(flat.as_slice().iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn laplacian_annihilates_ramp_interior() {
        let img = ImageGrid::from_fn(8, 8, |y, x| 0.1 * x as f64 - 0.05 * y as f64);
        let out = laplacian(&img).unwrap();
        for y in 1..7 {
            for x in 1..7 {
                assert!(out.get(y, x).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn sobel_constant_and_step() {
        let flat = sobel_magnitude(&ImageGrid::filled(6, 6, 0.4)).unwrap();
        assert!(flat.as_slice().iter().all(|&v| v == 0.0));

        let step = ImageGrid::from_fn(8, 8, |_, x| if x < 4 { -1.0 } else { 1.0 });
        let mag = sobel_magnitude(&step).unwrap();
        // Columns 3 and 4 straddle the edge: gx = 4 * 2 = 8, gy = 0.
        let edge = 8.0 * SOBEL_SCALE;
        for y in 0..8 {
            for x in 0..8 {
                let v = mag.get(y, x);
                if x == 3 || x == 4 {
                    assert!((v - edge).abs() < 1e-12);
                } else {
                    assert_eq!(v, 0.0);
                }
            }
        }
    }

    #[test]
    fn sobel_matches_kernel_pair() {
        let img = ImageGrid::from_fn(7, 9, |y, x| ((y * 31 + x * 17) % 11) as f64 / 5.5 - 1.0);
        let gx = convolve(&img, &Kernel::sobel_x()).unwrap();
        let gy = convolve(&img, &Kernel::sobel_y()).unwrap();
        let mag = sobel_magnitude(&img).unwrap();
        for i in 0..img.len() {
            let expect = gx.as_slice()[i].hypot(gy.as_slice()[i]) * SOBEL_SCALE;
            assert!((mag.as_slice()[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn sobel_ignores_offsets() {
        let img = ImageGrid::from_fn(7, 9, |y, x| ((y * 31 + x * 17) % 11) as f64 / 11.0);
        let shifted = img.map(|v| v + 0.75);
        let a = sobel_magnitude(&img).unwrap();
        let b = sobel_magnitude(&shifted).unwrap();
        for (p, q) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((p - q).abs() < 1e-12);
            assert!(*p >= 0.0);
        }
    }

    #[test]
    fn preimage_covers_every_source_once() {
        for len in 1..6 {
            for d in -3isize..=3 {
                let mut hits = vec![0; len];
                for q in 0..len {
                    if let Some(ps) = preimage(q, d, len) {
                        for p in ps {
                            assert_eq!(clamp_index(p as isize + d, len), q);
                            hits[p] += 1;
                        }
                    }
                }
                assert!(hits.iter().all(|&c| c == 1), "len {len} d {d}");
            }
        }
    }
}
