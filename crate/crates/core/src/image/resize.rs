use super::ImageGrid;
use crate::error::{invalid, Result};
use crate::par;

/// Source coordinate of output index `i` under corner-aligned sampling.
/// A single output sample sits at the source center.
fn source_coord(i: usize, out_len: usize, in_len: usize) -> f64 {
    if out_len == 1 {
        (in_len - 1) as f64 / 2.0
    } else {
        i as f64 * (in_len - 1) as f64 / (out_len - 1) as f64
    }
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    // `a + t·(b − a)` is exact when `a == b`, so constants survive resampling.
    a + t * (b - a)
}

/// Bilinear resampling with corner-aligned sample positions.
pub fn resize_bilinear(
    image: &ImageGrid,
    new_height: usize,
    new_width: usize,
) -> Result<ImageGrid> {
    if new_height == 0 || new_width == 0 {
        return Err(invalid(format!(
            "resize target must be positive, got {new_height}x{new_width}"
        )));
    }
    if image.dims() == (new_height, new_width) {
        return Ok(image.clone());
    }
    let (h, w) = image.dims();
    let src = image.as_slice();
    let xs: Vec<(usize, usize, f64)> = (0..new_width)
        .map(|x| {
            let sx = source_coord(x, new_width, w);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            (x0, x1, sx - x0 as f64)
        })
        .collect();

    let mut out = vec![0.0; new_height * new_width];
    par::for_each_row(&mut out, new_width, |y, row| {
        let sy = source_coord(y, new_height, h);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let fy = sy - y0 as f64;
        let top = &src[y0 * w..(y0 + 1) * w];
        let bottom = &src[y1 * w..(y1 + 1) * w];
        for (px, &(x0, x1, fx)) in row.iter_mut().zip(&xs) {
            let a = lerp(top[x0], top[x1], fx);
            let b = lerp(bottom[x0], bottom[x1], fx);
            *px = lerp(a, b, fy);
        }
    });
    Ok(ImageGrid::from_raw(new_height, new_width, out))
}
