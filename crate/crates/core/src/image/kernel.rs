use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// An odd-sized square array of taps anchored at its center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    size: usize,
    taps: Vec<f64>,
}

impl Kernel {
    pub fn new(size: usize, taps: Vec<f64>) -> Result<Self> {
        if size.is_multiple_of(2) {
            return Err(invalid(format!("kernel size must be odd, got {size}")));
        }
        if taps.len() != size * size {
            return Err(invalid(format!(
                "kernel of size {size} needs {} taps, got {}",
                size * size,
                taps.len()
            )));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(invalid("kernel taps must be finite"));
        }
        Ok(Self { size, taps })
    }

    /// The 1x1 identity kernel.
    pub fn identity() -> Self {
        Self {
            size: 1,
            taps: vec![1.0],
        }
    }

    /// Five-point Laplacian `[[0,1,0],[1,-4,1],[0,1,0]]`.
    pub fn laplacian() -> Self {
        Self {
            size: 3,
            taps: vec![0.0, 1.0, 0.0, 1.0, -4.0, 1.0, 0.0, 1.0, 0.0],
        }
    }

    /// Horizontal Sobel taps. Under correlation a left-to-right increase
    /// gives a positive response.
    pub fn sobel_x() -> Self {
        Self {
            size: 3,
            taps: vec![-1.0, 0.0, 1.0, -2.0, 0.0, 2.0, -1.0, 0.0, 1.0],
        }
    }

    /// Vertical Sobel taps; a top-to-bottom increase is positive.
    pub fn sobel_y() -> Self {
        Self {
            size: 3,
            taps: vec![-1.0, -2.0, -1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 1.0],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Half-width: `(size - 1) / 2`.
    pub fn radius(&self) -> usize {
        self.size / 2
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// Tap at signed offset `(dy, dx)` from the anchor.
    pub fn tap(&self, dy: isize, dx: isize) -> f64 {
        let r = self.radius() as isize;
        assert!(dy.abs() <= r && dx.abs() <= r, "offset outside kernel");
        self.taps[((dy + r) as usize) * self.size + (dx + r) as usize]
    }

    pub fn sum(&self) -> f64 {
        self.taps.iter().sum()
    }
}

/// Binary disk support: offsets `(dy, dx)` with `dx² + dy² <= radius²`.
pub(crate) fn disk_offsets(radius: usize) -> Vec<(isize, isize)> {
    let r = radius as isize;
    let r2 = r * r;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r2 {
                out.push((dy, dx));
            }
        }
    }
    out
}

/// Circular structuring element of the given radius, normalized so its
/// taps sum to one.
pub fn disk_kernel(radius: usize) -> Result<Kernel> {
    if radius == 0 {
        return Err(invalid("disk radius must be >= 1"));
    }
    let size = 2 * radius + 1;
    let offsets = disk_offsets(radius);
    let weight = 1.0 / offsets.len() as f64;
    let mut taps = vec![0.0; size * size];
    for (dy, dx) in offsets {
        let iy = (dy + radius as isize) as usize;
        let ix = (dx + radius as isize) as usize;
        taps[iy * size + ix] = weight;
    }
    Ok(Kernel { size, taps })
}
