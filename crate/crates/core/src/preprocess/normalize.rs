use super::HyperCube;

/// Per-band min-max scaling to `[0, 1]` using the band's min and max over
/// all pixels. A constant band maps to all zeros.
pub fn minmax_normalize(cube: &HyperCube) -> HyperCube {
    let b = cube.bands();
    let mut lo = vec![f64::INFINITY; b];
    let mut hi = vec![f64::NEG_INFINITY; b];
    for s in cube.spectra() {
        for k in 0..b {
            lo[k] = lo[k].min(s[k]);
            hi[k] = hi[k].max(s[k]);
        }
    }
    let mut out = Vec::with_capacity(cube.values().len());
    for s in cube.spectra() {
        for k in 0..b {
            let range = hi[k] - lo[k];
            out.push(if range > 0.0 {
                ((s[k] - lo[k]) / range).clamp(0.0, 1.0)
            } else {
                0.0
            });
        }
    }
    HyperCube::new(cube.height(), cube.width(), b, out).expect("same shape as input")
}
