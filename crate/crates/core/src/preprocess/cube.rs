use crate::error::{Error, Result};

/// Pixel coordinate `(row, col)`; ordering is row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pixel {
    pub row: usize,
    pub col: usize,
}

impl Pixel {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// `H x W x B` reflectance volume stored band-fastest, row-major over pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperCube {
    height: usize,
    width: usize,
    bands: usize,
    values: Vec<f64>,
}

impl HyperCube {
    pub fn new(height: usize, width: usize, bands: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || bands == 0 {
            return Err(Error::Shape(format!(
                "cube dimensions must be positive, got {height}x{width}x{bands}"
            )));
        }
        if values.len() != height * width * bands {
            return Err(Error::Shape(format!(
                "{height}x{width}x{bands} cube needs {} values, got {}",
                height * width * bands,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value at flat index {i}"
            )));
        }
        Ok(Self {
            height,
            width,
            bands,
            values,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn num_pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spectrum(&self, p: Pixel) -> &[f64] {
        let start = (p.row * self.width + p.col) * self.bands;
        &self.values[start..start + self.bands]
    }

    pub fn get(&self, row: usize, col: usize, band: usize) -> f64 {
        self.values[(row * self.width + col) * self.bands + band]
    }

    /// Iterates over all pixel spectra in row-major order.
    pub fn spectra(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.bands)
    }

    pub fn contains(&self, p: Pixel) -> bool {
        p.row < self.height && p.col < self.width
    }
}

/// `H x W` class labels; 0 marks background/unlabeled, classes are `1..=k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelField {
    height: usize,
    width: usize,
    labels: Vec<u16>,
}

impl LabelField {
    pub fn new(height: usize, width: usize, labels: Vec<u16>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Shape(format!(
                "label field dimensions must be positive, got {height}x{width}"
            )));
        }
        if labels.len() != height * width {
            return Err(Error::Shape(format!(
                "{height}x{width} label field needs {} labels, got {}",
                height * width,
                labels.len()
            )));
        }
        Ok(Self {
            height,
            width,
            labels,
        })
    }

    pub fn background(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![0; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn get(&self, p: Pixel) -> u16 {
        self.labels[p.row * self.width + p.col]
    }

    pub fn set(&mut self, p: Pixel, label: u16) {
        self.labels[p.row * self.width + p.col] = label;
    }

    /// Largest label present, i.e. the class count `k`.
    pub fn num_classes(&self) -> usize {
        self.labels.iter().copied().max().unwrap_or(0) as usize
    }

    /// Labeled pixels in row-major order with their 1-based class.
    pub fn labeled_pixels(&self) -> impl Iterator<Item = (Pixel, u16)> + '_ {
        self.labels.iter().enumerate().filter_map(move |(i, &l)| {
            (l != 0).then(|| (Pixel::new(i / self.width, i % self.width), l))
        })
    }

    pub fn matches(&self, cube: &HyperCube) -> bool {
        self.height == cube.height() && self.width == cube.width()
    }
}
