//! Confusion matrix, OA / AA / Kappa, and classification-map rendering.

use std::fmt::Write as _;

use log::info;

use crate::error::{Error, Result};
use crate::preprocess::LabelField;

/// `counts[t][p]`: pixels of true class `t + 1` predicted as `p + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(k: usize) -> Self {
        ConfusionMatrix { k, counts: vec![0; k * k] }
    }

    /// Builds a matrix from row-major counts.
    pub fn from_counts(k: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != k * k {
            return Err(Error::Shape(format!(
                "{} counts for a {k}x{k} matrix",
                counts.len()
            )));
        }
        Ok(ConfusionMatrix { k, counts })
    }

    pub fn num_classes(&self) -> usize {
        self.k
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.k + predicted]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|i| self.get(i, i)).sum()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i * self.k..(i + 1) * self.k].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        (0..self.k).map(|i| self.get(i, j)).sum()
    }
}

/// Tallies `(truth, predicted)` pairs of 1-based labels. Pairs whose true
/// label is 0 (background) are skipped.
pub fn confusion(truth: &[u16], predicted: &[u16], k: usize) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::Shape(format!(
            "{} true labels but {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let mut cm = ConfusionMatrix::zeros(k);
    for (&t, &p) in truth.iter().zip(predicted) {
        if t == 0 {
            continue;
        }
        for label in [t, p] {
            if label == 0 || label as usize > k {
                return Err(Error::InvalidClass {
                    class: label as usize,
                    expected: format!("1..={k}"),
                });
            }
        }
        cm.counts[(t as usize - 1) * k + (p as usize - 1)] += 1;
    }
    Ok(cm)
}

fn nonempty(cm: &ConfusionMatrix) -> Result<f64> {
    match cm.total() {
        0 => Err(Error::EmptyEvaluation),
        n => Ok(n as f64),
    }
}

/// Overall accuracy.
pub fn oa(cm: &ConfusionMatrix) -> Result<f64> {
    Ok(cm.trace() as f64 / nonempty(cm)?)
}

/// Per-class recall; `None` for classes with no evaluated pixels.
pub fn class_accuracies(cm: &ConfusionMatrix) -> Vec<Option<f64>> {
    (0..cm.k)
        .map(|i| match cm.row_sum(i) {
            0 => None,
            n => Some(cm.get(i, i) as f64 / n as f64),
        })
        .collect()
}

/// Average accuracy over classes that appear in the evaluation set.
pub fn aa(cm: &ConfusionMatrix) -> Result<f64> {
    nonempty(cm)?;
    let accs = class_accuracies(cm);
    let present: Vec<f64> = accs.iter().flatten().copied().collect();
    if present.len() < accs.len() {
        info!(
            "average accuracy skips {} class(es) absent from the evaluation set",
            accs.len() - present.len()
        );
    }
    Ok(present.iter().sum::<f64>() / present.len() as f64)
}

/// Cohen's kappa. When chance agreement is 1 the value is 1 for a perfect
/// matrix and 0 otherwise.
pub fn kappa(cm: &ConfusionMatrix) -> Result<f64> {
    let n = nonempty(cm)?;
    let po = cm.trace() as f64 / n;
    let pe = (0..cm.k)
        .map(|i| cm.row_sum(i) as f64 * cm.col_sum(i) as f64)
        .sum::<f64>()
        / (n * n);
    if pe >= 1.0 {
        return Ok(if po == 1.0 { 1.0 } else { 0.0 });
    }
    Ok((po - pe) / (1.0 - pe))
}

/// Summary scores of one evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Scores {
    pub oa: f64,
    pub aa: f64,
    pub kappa: f64,
    pub per_class: Vec<Option<f64>>,
}

pub fn scores(cm: &ConfusionMatrix) -> Result<Scores> {
    Ok(Scores {
        oa: oa(cm)?,
        aa: aa(cm)?,
        kappa: kappa(cm)?,
        per_class: class_accuracies(cm),
    })
}

impl Scores {
    /// `metric,value` rows with six decimals. Absent classes are written as
    /// `nan`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        writeln!(out, "oa,{:.6}", self.oa).unwrap();
        writeln!(out, "aa,{:.6}", self.aa).unwrap();
        writeln!(out, "kappa,{:.6}", self.kappa).unwrap();
        for (i, acc) in self.per_class.iter().enumerate() {
            match acc {
                Some(a) => writeln!(out, "class_{},{:.6}", i + 1, a).unwrap(),
                None => writeln!(out, "class_{},nan", i + 1).unwrap(),
            }
        }
        out
    }
}

pub type Rgb = [u8; 3];

/// Distinct colors for up to 16 classes; index 0 is the background.
pub fn default_palette(k: usize) -> Vec<Rgb> {
    const BASE: [Rgb; 16] = [
        [230, 25, 75],
        [60, 180, 75],
        [255, 225, 25],
        [0, 130, 200],
        [245, 130, 48],
        [145, 30, 180],
        [70, 240, 240],
        [240, 50, 230],
        [210, 245, 60],
        [250, 190, 212],
        [0, 128, 128],
        [220, 190, 255],
        [170, 110, 40],
        [255, 250, 200],
        [128, 0, 0],
        [170, 255, 195],
    ];
    let mut palette = vec![[0, 0, 0]];
    for i in 0..k {
        let [r, g, b] = BASE[i % BASE.len()];
        // darken repeats so classes past 16 stay distinguishable
        let shade = 1 + i / BASE.len();
        palette.push([r / shade as u8, g / shade as u8, b / shade as u8]);
    }
    palette
}

/// Binary PPM (P6). `palette[c]` colors class `c`; class 0 is always black.
pub fn render_map(field: &LabelField, palette: &[Rgb]) -> Result<Vec<u8>> {
    let k = field.num_classes();
    if palette.len() <= k {
        return Err(Error::InvalidConfig(format!(
            "palette has {} entries, classes 0..={k} need {}",
            palette.len(),
            k + 1
        )));
    }
    let mut out = format!("P6\n{} {}\n255\n", field.width(), field.height()).into_bytes();
    out.reserve(3 * field.labels().len());
    for &label in field.labels() {
        let rgb = if label == 0 { [0, 0, 0] } else { palette[label as usize] };
        out.extend_from_slice(&rgb);
    }
    Ok(out)
}

/// Parses the header of a P6 image: `(width, height, payload offset)`.
pub fn parse_ppm_header(bytes: &[u8]) -> Result<(usize, usize, usize)> {
    let bad = |reason: &str| Error::InvalidInput(format!("bad PPM header: {reason}"));
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("not ASCII"))?);
    }
    if fields[0] != "P6" || fields[3] != "255" {
        return Err(bad("expected P6 with maxval 255"));
    }
    let width = fields[1].parse().map_err(|_| bad("width"))?;
    let height = fields[2].parse().map_err(|_| bad("height"))?;
    Ok((width, height, pos + 1))
}
