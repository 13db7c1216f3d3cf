//! Affine layer `y = W x + b` with `W` stored as `[out, in]`.

use crate::error::{Error, Result};

use super::Tensor;

/// Gradients of a loss with respect to the inputs of [`linear`].
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGrads {
    pub weights: Tensor,
    pub bias: Tensor,
    pub input: Tensor,
}

fn check_shapes(x: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<(usize, usize, usize)> {
    let (out, inp) = match weights.shape() {
        [o, i] => (*o, *i),
        s => return Err(Error::Shape(format!("weights must be 2-D, got {s:?}"))),
    };
    if bias.shape() != [out] {
        return Err(Error::Shape(format!(
            "bias shape {:?} does not match {out} outputs",
            bias.shape()
        )));
    }
    let rows = match x.shape() {
        [i] if *i == inp => 1,
        [n, i] if *i == inp => *n,
        s => {
            return Err(Error::Shape(format!(
                "input shape {s:?} does not conform to weights {:?}",
                weights.shape()
            )))
        }
    };
    Ok((rows, out, inp))
}

/// Applies the affine map to a vector `[in]` or a batch `[n, in]`.
pub fn linear(x: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (rows, out, inp) = check_shapes(x, weights, bias)?;
    let mut y = Vec::with_capacity(rows * out);
    for r in 0..rows {
        y.extend(forward(
            &x.data()[r * inp..(r + 1) * inp],
            weights.data(),
            bias.data(),
        ));
    }
    let shape = if x.shape().len() == 1 {
        vec![out]
    } else {
        vec![rows, out]
    };
    Tensor::new(shape, y)
}

/// Backward pass of [`linear`]; weight and bias gradients are summed over
/// the batch rows.
pub fn linear_backward(
    x: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    grad_out: &Tensor,
) -> Result<LinearGrads> {
    let (rows, out, inp) = check_shapes(x, weights, bias)?;
    if grad_out.len() != rows * out {
        return Err(Error::Shape(format!(
            "upstream gradient has {} values, expected {}",
            grad_out.len(),
            rows * out
        )));
    }
    let mut gw = Tensor::zeros(weights.shape());
    let mut gb = Tensor::zeros(bias.shape());
    let mut gx = Vec::with_capacity(rows * inp);
    for r in 0..rows {
        gx.extend(backward(
            &x.data()[r * inp..(r + 1) * inp],
            weights.data(),
            &grad_out.data()[r * out..(r + 1) * out],
            gw.data_mut(),
            gb.data_mut(),
        ));
    }
    Ok(LinearGrads {
        weights: gw,
        bias: gb,
        input: Tensor::new(x.shape().to_vec(), gx)?,
    })
}

pub(crate) fn forward(x: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
    let inp = x.len();
    b.iter()
        .enumerate()
        .map(|(o, &bo)| {
            let row = &w[o * inp..(o + 1) * inp];
            bo + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect()
}

/// Accumulates into `gw`/`gb` and returns the input gradient.
pub(crate) fn backward(
    x: &[f64],
    w: &[f64],
    grad_out: &[f64],
    gw: &mut [f64],
    gb: &mut [f64],
) -> Vec<f64> {
    let inp = x.len();
    let mut gx = vec![0.0; inp];
    for (o, &g) in grad_out.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        gb[o] += g;
        let row = &w[o * inp..(o + 1) * inp];
        let grow = &mut gw[o * inp..(o + 1) * inp];
        for i in 0..inp {
            grow[i] += g * x[i];
            gx[i] += g * row[i];
        }
    }
    gx
}
