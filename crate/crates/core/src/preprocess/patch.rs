use crate::error::{Error, Result};

use super::{HyperCube, Pixel};

/// Reflects an out-of-range index back into `0..n` without repeating the
/// edge sample (`-1 -> 1`, `n -> n - 2`).
pub fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// `size x size x bands` window centered on `center`, laid out
/// `[row][col][band]`. Pixels outside the image are mirrored.
pub fn extract_patch(cube: &HyperCube, center: Pixel, size: usize) -> Result<Vec<f64>> {
    if size == 0 || size % 2 == 0 {
        return Err(Error::InvalidConfig(format!(
            "patch size must be a positive odd number, got {size}"
        )));
    }
    if !cube.contains(center) {
        return Err(Error::InvalidInput(format!(
            "pixel {center:?} outside {}x{} image",
            cube.height(),
            cube.width()
        )));
    }
    let half = (size / 2) as isize;
    let mut out = Vec::with_capacity(size * size * cube.bands());
    for dr in -half..=half {
        let r = reflect_index(center.row as isize + dr, cube.height());
        for dc in -half..=half {
            let c = reflect_index(center.col as isize + dc, cube.width());
            out.extend_from_slice(cube.spectrum(Pixel::new(r, c)));
        }
    }
    Ok(out)
}

/// Splits a pixel spectrum into `ceil(B / group)` steps of `group` bands,
/// zero-padding the last step.
pub fn spectral_sequence(spectrum: &[f64], group: usize) -> Result<Vec<Vec<f64>>> {
    if group == 0 {
        return Err(Error::InvalidConfig("band group must be at least 1".into()));
    }
    Ok(spectrum
        .chunks(group)
        .map(|chunk| {
            let mut step = chunk.to_vec();
            step.resize(group, 0.0);
            step
        })
        .collect())
}
