//! 3-D convolutional classifier over PCA-reduced patches.
//!
//! `C1 -> P1 -> C2 -> P2 -> FC1 (sigmoid, dropout) -> FC2`. Convolutions are
//! valid cross-correlations followed by a sigmoid; pooling is 2x2x2 with
//! stride 2, keeping partial trailing windows.

use crate::error::{Error, Result};
use crate::numerics::{
    cross_entropy, linear_backward_slice, linear_forward_slice, sigmoid, softmax, ParamId,
    ParamStore, SeededRng, Tensor,
};
use crate::training::Network;

/// Feature maps laid out `[map][x][y][z]`, `z` being the spectral axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    pub maps: usize,
    pub dims: [usize; 3],
    pub data: Vec<f64>,
}

impl Volume {
    pub fn new(maps: usize, dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        if maps * dims.iter().product::<usize>() != data.len() || maps == 0 {
            return Err(Error::Shape(format!(
                "{maps} maps of {dims:?} do not match {} values",
                data.len()
            )));
        }
        Ok(Self { maps, dims, data })
    }

    pub fn zeros(maps: usize, dims: [usize; 3]) -> Self {
        Self {
            maps,
            dims,
            data: vec![0.0; maps * dims.iter().product::<usize>()],
        }
    }

    #[inline]
    pub fn index(&self, m: usize, x: usize, y: usize, z: usize) -> usize {
        ((m * self.dims[0] + x) * self.dims[1] + y) * self.dims[2] + z
    }

    pub fn at(&self, m: usize, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.index(m, x, y, z)]
    }
}

/// Borrowed convolution weights: `kernels` is
/// `[out][in][kx][ky][kz]`, `bias` has one entry per output map.
#[derive(Debug, Clone, Copy)]
pub struct Conv3dLayer<'a> {
    pub out_maps: usize,
    pub in_maps: usize,
    pub kernel: [usize; 3],
    pub kernels: &'a [f64],
    pub bias: &'a [f64],
}

impl Conv3dLayer<'_> {
    fn kernel_len(&self) -> usize {
        self.kernel.iter().product()
    }

    fn output_dims(&self, input: &Volume) -> Result<[usize; 3]> {
        if input.maps != self.in_maps {
            return Err(Error::Shape(format!(
                "conv expects {} input maps, got {}",
                self.in_maps, input.maps
            )));
        }
        if self.kernels.len() != self.out_maps * self.in_maps * self.kernel_len()
            || self.bias.len() != self.out_maps
        {
            return Err(Error::Shape("conv weights do not match layer shape".into()));
        }
        let mut out = [0; 3];
        for a in 0..3 {
            if input.dims[a] < self.kernel[a] {
                return Err(Error::Shape(format!(
                    "input extent {:?} smaller than kernel {:?}",
                    input.dims, self.kernel
                )));
            }
            out[a] = input.dims[a] - self.kernel[a] + 1;
        }
        Ok(out)
    }
}

/// Valid 3-D cross-correlation plus bias, through a sigmoid.
pub fn conv3d_forward(input: &Volume, layer: &Conv3dLayer<'_>) -> Result<Volume> {
    let od = layer.output_dims(input)?;
    let [kx, ky, kz] = layer.kernel;
    let klen = layer.kernel_len();
    let mut out = Volume::zeros(layer.out_maps, od);
    for o in 0..layer.out_maps {
        for x in 0..od[0] {
            for y in 0..od[1] {
                for z in 0..od[2] {
                    let mut acc = layer.bias[o];
                    for m in 0..layer.in_maps {
                        let kbase = (o * layer.in_maps + m) * klen;
                        for h in 0..kx {
                            for l in 0..ky {
                                let src = input.index(m, x + h, y + l, z);
                                let krow = kbase + (h * ky + l) * kz;
                                let w = &layer.kernels[krow..krow + kz];
                                let v = &input.data[src..src + kz];
                                acc += w.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
                            }
                        }
                    }
                    let idx = out.index(o, x, y, z);
                    out.data[idx] = sigmoid(acc);
                }
            }
        }
    }
    Ok(out)
}

/// Backward of [`conv3d_forward`] given its activated output. Accumulates
/// kernel and bias gradients and returns the input gradient.
pub fn conv3d_backward(
    input: &Volume,
    output: &Volume,
    grad_output: &[f64],
    layer: &Conv3dLayer<'_>,
    grad_kernels: &mut [f64],
    grad_bias: &mut [f64],
) -> Result<Volume> {
    let od = layer.output_dims(input)?;
    if output.dims != od || grad_output.len() != output.data.len() {
        return Err(Error::Internal("conv cache does not match layer".into()));
    }
    let [kx, ky, kz] = layer.kernel;
    let klen = layer.kernel_len();
    let mut gin = Volume::zeros(input.maps, input.dims);
    for o in 0..layer.out_maps {
        for x in 0..od[0] {
            for y in 0..od[1] {
                for z in 0..od[2] {
                    let idx = output.index(o, x, y, z);
                    let s = output.data[idx];
                    let g = grad_output[idx] * s * (1.0 - s);
                    if g == 0.0 {
                        continue;
                    }
                    grad_bias[o] += g;
                    for m in 0..layer.in_maps {
                        let kbase = (o * layer.in_maps + m) * klen;
                        for h in 0..kx {
                            for l in 0..ky {
                                let src = input.index(m, x + h, y + l, z);
                                let krow = kbase + (h * ky + l) * kz;
                                for d in 0..kz {
                                    grad_kernels[krow + d] += g * input.data[src + d];
                                    gin.data[src + d] += g * layer.kernels[krow + d];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(gin)
}

/// Output extent of stride-2 pooling along one axis.
pub fn pooled_extent(n: usize) -> usize {
    n.div_ceil(2)
}

/// Non-overlapping 2x2x2 max pooling. Returns the pooled volume and, per
/// output element, the flat input index of the chosen maximum (first in
/// scan order on ties).
pub fn maxpool3d(input: &Volume) -> (Volume, Vec<usize>) {
    let od = input.dims.map(pooled_extent);
    let mut out = Volume::zeros(input.maps, od);
    let mut argmax = vec![0; out.data.len()];
    for m in 0..input.maps {
        for x in 0..od[0] {
            for y in 0..od[1] {
                for z in 0..od[2] {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = 0;
                    for ix in 2 * x..(2 * x + 2).min(input.dims[0]) {
                        for iy in 2 * y..(2 * y + 2).min(input.dims[1]) {
                            for iz in 2 * z..(2 * z + 2).min(input.dims[2]) {
                                let i = input.index(m, ix, iy, iz);
                                if input.data[i] > best {
                                    best = input.data[i];
                                    best_idx = i;
                                }
                            }
                        }
                    }
                    let o = out.index(m, x, y, z);
                    out.data[o] = best;
                    argmax[o] = best_idx;
                }
            }
        }
    }
    (out, argmax)
}

/// Routes pooled gradients back to the recorded argmax positions.
pub fn maxpool3d_backward(grad_output: &[f64], argmax: &[usize], input_len: usize) -> Vec<f64> {
    let mut g = vec![0.0; input_len];
    for (&i, &d) in argmax.iter().zip(grad_output) {
        g[i] += d;
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CnnConfig {
    /// Spatial side of the square input patch.
    pub patch: usize,
    /// Spectral depth of the input (PCA component count).
    pub channels: usize,
    pub c1_maps: usize,
    pub c2_maps: usize,
    /// Nominal kernel extents; the spectral extent is clamped to the
    /// available depth at each layer.
    pub c1_kernel: [usize; 3],
    pub c2_kernel: [usize; 3],
    pub fc1: usize,
    pub classes: usize,
    pub dropout: f64,
}

impl CnnConfig {
    pub const DEFAULT_C1_MAPS: usize = 8;
    pub const DEFAULT_C2_MAPS: usize = 16;
    pub const DEFAULT_FC1: usize = 1024;

    /// Standard architecture: 8 maps of 5x5x5, 16 maps of 3x3x3, FC1 of 1024.
    pub fn standard(patch: usize, channels: usize, classes: usize, dropout: f64) -> Self {
        Self {
            patch,
            channels,
            c1_maps: Self::DEFAULT_C1_MAPS,
            c2_maps: Self::DEFAULT_C2_MAPS,
            c1_kernel: [5, 5, 5],
            c2_kernel: [3, 3, 3],
            fc1: Self::DEFAULT_FC1,
            classes,
            dropout,
        }
    }

    /// Effective kernels and the flattened width after P2.
    pub fn geometry(&self) -> Result<CnnGeometry> {
        if self.patch == 0
            || self.channels == 0
            || self.c1_maps == 0
            || self.c2_maps == 0
            || self.fc1 == 0
            || self.classes == 0
        {
            return Err(Error::InvalidConfig(format!(
                "CNN sizes must be positive: {self:?}"
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout
            )));
        }
        let input = [self.patch, self.patch, self.channels];
        let c1_kernel = clamp_depth(self.c1_kernel, input[2]);
        let c1_out = valid_extent(input, c1_kernel)?;
        let p1_out = c1_out.map(pooled_extent);
        let c2_kernel = clamp_depth(self.c2_kernel, p1_out[2]);
        let c2_out = valid_extent(p1_out, c2_kernel)?;
        let p2_out = c2_out.map(pooled_extent);
        Ok(CnnGeometry {
            c1_kernel,
            c2_kernel,
            p2_out,
            flat: self.c2_maps * p2_out.iter().product::<usize>(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CnnGeometry {
    pub c1_kernel: [usize; 3],
    pub c2_kernel: [usize; 3],
    pub p2_out: [usize; 3],
    pub flat: usize,
}

fn clamp_depth(mut kernel: [usize; 3], depth: usize) -> [usize; 3] {
    kernel[2] = kernel[2].min(depth);
    kernel
}

fn valid_extent(input: [usize; 3], kernel: [usize; 3]) -> Result<[usize; 3]> {
    let mut out = [0; 3];
    for a in 0..3 {
        if kernel[a] == 0 || input[a] < kernel[a] {
            return Err(Error::Shape(format!(
                "input extent {input:?} smaller than kernel {kernel:?}"
            )));
        }
        out[a] = input[a] - kernel[a] + 1;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct CnnIds {
    c1_w: ParamId,
    c1_b: ParamId,
    c2_w: ParamId,
    c2_b: ParamId,
    fc1_w: ParamId,
    fc1_b: ParamId,
    fc2_w: ParamId,
    fc2_b: ParamId,
}

/// Parameter names in checkpoint order.
pub const CNN_PARAM_NAMES: [&str; 8] = [
    "c1.weight",
    "c1.bias",
    "c2.weight",
    "c2.bias",
    "fc1.weight",
    "fc1.bias",
    "fc2.weight",
    "fc2.bias",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    config: CnnConfig,
    geometry: CnnGeometry,
    params: ParamStore,
    ids: CnnIds,
}

/// Forward-pass record for [`cnn_backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct CnnCache {
    pub input: Volume,
    pub c1: Volume,
    pub p1: Volume,
    pub p1_argmax: Vec<usize>,
    pub c2: Volume,
    pub p2: Volume,
    pub p2_argmax: Vec<usize>,
    pub fc1_out: Vec<f64>,
    /// Per-unit multiplier applied after FC1: 0 or `1 / keep` in training,
    /// all ones in inference.
    pub mask: Vec<f64>,
    pub dropped: Vec<f64>,
    pub logits: Vec<f64>,
}

impl CnnModel {
    pub fn zeros(config: CnnConfig) -> Result<Self> {
        let geometry = config.geometry()?;
        let (a, b) = (config.c1_maps, config.c2_maps);
        let shapes: [Vec<usize>; 8] = [
            vec![a, 1, geometry.c1_kernel[0], geometry.c1_kernel[1], geometry.c1_kernel[2]],
            vec![a],
            vec![b, a, geometry.c2_kernel[0], geometry.c2_kernel[1], geometry.c2_kernel[2]],
            vec![b],
            vec![config.fc1, geometry.flat],
            vec![config.fc1],
            vec![config.classes, config.fc1],
            vec![config.classes],
        ];
        let mut params = ParamStore::new();
        let mut ids = Vec::with_capacity(8);
        for (name, shape) in CNN_PARAM_NAMES.iter().zip(shapes) {
            ids.push(params.add(*name, Tensor::zeros(&shape))?);
        }
        let ids = CnnIds {
            c1_w: ids[0],
            c1_b: ids[1],
            c2_w: ids[2],
            c2_b: ids[3],
            fc1_w: ids[4],
            fc1_b: ids[5],
            fc2_w: ids[6],
            fc2_b: ids[7],
        };
        Ok(Self {
            config,
            geometry,
            params,
            ids,
        })
    }

    /// Weights uniform in `[-s, s]` with `s = sqrt(1 / fan_in)`; biases zero.
    pub fn new(config: CnnConfig, rng: &mut SeededRng) -> Result<Self> {
        let mut model = Self::zeros(config)?;
        for p in model.params.iter_mut() {
            if p.name.ends_with(".bias") {
                continue;
            }
            let fan_in: usize = p.value.shape()[1..].iter().product();
            let s = (1.0 / fan_in as f64).sqrt();
            for v in p.value.data_mut() {
                *v = rng.uniform(-s, s);
            }
        }
        Ok(model)
    }

    pub fn config(&self) -> &CnnConfig {
        &self.config
    }

    pub fn geometry(&self) -> &CnnGeometry {
        &self.geometry
    }

    fn conv1(&self) -> Conv3dLayer<'_> {
        Conv3dLayer {
            out_maps: self.config.c1_maps,
            in_maps: 1,
            kernel: self.geometry.c1_kernel,
            kernels: self.params.value(self.ids.c1_w),
            bias: self.params.value(self.ids.c1_b),
        }
    }

    fn conv2(&self) -> Conv3dLayer<'_> {
        Conv3dLayer {
            out_maps: self.config.c2_maps,
            in_maps: self.config.c1_maps,
            kernel: self.geometry.c2_kernel,
            kernels: self.params.value(self.ids.c2_w),
            bias: self.params.value(self.ids.c2_b),
        }
    }

    fn input_volume(&self, patch: &[f64]) -> Result<Volume> {
        let c = &self.config;
        let expected = c.patch * c.patch * c.channels;
        if patch.len() != expected {
            return Err(Error::Shape(format!(
                "patch has {} values, model expects {}x{}x{} = {expected}",
                patch.len(),
                c.patch,
                c.patch,
                c.channels
            )));
        }
        Volume::new(1, [c.patch, c.patch, c.channels], patch.to_vec())
    }

    pub fn predict(&self, patch: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.features(patch)?))
    }

    /// `fc2` logits with dropout disabled.
    pub fn features(&self, patch: &[f64]) -> Result<Vec<f64>> {
        Ok(cnn_forward(patch, self, None)?.logits)
    }
}

/// Full forward pass. Passing an RNG turns on training mode: a fresh
/// inverted-dropout mask is drawn over FC1.
pub fn cnn_forward(
    patch: &[f64],
    model: &CnnModel,
    training: Option<&mut SeededRng>,
) -> Result<CnnCache> {
    let input = model.input_volume(patch)?;
    let c1 = conv3d_forward(&input, &model.conv1())?;
    let (p1, p1_argmax) = maxpool3d(&c1);
    let c2 = conv3d_forward(&p1, &model.conv2())?;
    let (p2, p2_argmax) = maxpool3d(&c2);

    let p = &model.params;
    let ids = &model.ids;
    let fc1_out: Vec<f64> = linear_forward_slice(&p2.data, p.value(ids.fc1_w), p.value(ids.fc1_b))
        .into_iter()
        .map(sigmoid)
        .collect();
    let rate = model.config.dropout;
    let mask: Vec<f64> = match training {
        Some(rng) if rate > 0.0 => {
            let keep = 1.0 - rate;
            (0..fc1_out.len())
                .map(|_| if rng.bernoulli(rate) { 0.0 } else { 1.0 / keep })
                .collect()
        }
        _ => vec![1.0; fc1_out.len()],
    };
    let dropped: Vec<f64> = fc1_out.iter().zip(&mask).map(|(a, m)| a * m).collect();
    let logits = linear_forward_slice(&dropped, p.value(ids.fc2_w), p.value(ids.fc2_b));
    Ok(CnnCache {
        input,
        c1,
        p1,
        p1_argmax,
        c2,
        p2,
        p2_argmax,
        fc1_out,
        mask,
        dropped,
        logits,
    })
}

/// Backward through FC2, dropout, FC1, both pools and both convolutions.
pub fn cnn_backward(cache: &CnnCache, dlogits: &[f64], model: &mut CnnModel) -> Result<()> {
    let cfg = model.config;
    if dlogits.len() != cfg.classes
        || cache.fc1_out.len() != cfg.fc1
        || cache.p2.data.len() != model.geometry.flat
    {
        return Err(Error::Internal("CNN cache does not match model".into()));
    }
    let ids = model.ids;
    let take = |m: &CnnModel, id: ParamId| m.params.value(id).to_vec();
    let (fc2_w, fc1_w) = (take(model, ids.fc2_w), take(model, ids.fc1_w));
    let (c1_w, c1_b) = (take(model, ids.c1_w), take(model, ids.c1_b));
    let (c2_w, c2_b) = (take(model, ids.c2_w), take(model, ids.c2_b));

    let mut g_fc2_w = vec![0.0; fc2_w.len()];
    let mut g_fc2_b = vec![0.0; cfg.classes];
    let d_dropped = linear_backward_slice(&cache.dropped, &fc2_w, dlogits, &mut g_fc2_w, &mut g_fc2_b);
    let d_fc1_pre: Vec<f64> = d_dropped
        .iter()
        .zip(&cache.mask)
        .zip(&cache.fc1_out)
        .map(|((d, m), s)| d * m * s * (1.0 - s))
        .collect();
    let mut g_fc1_w = vec![0.0; fc1_w.len()];
    let mut g_fc1_b = vec![0.0; cfg.fc1];
    let d_p2 = linear_backward_slice(&cache.p2.data, &fc1_w, &d_fc1_pre, &mut g_fc1_w, &mut g_fc1_b);

    let d_c2 = maxpool3d_backward(&d_p2, &cache.p2_argmax, cache.c2.data.len());
    let conv2 = Conv3dLayer {
        out_maps: cfg.c2_maps,
        in_maps: cfg.c1_maps,
        kernel: model.geometry.c2_kernel,
        kernels: &c2_w,
        bias: &c2_b,
    };
    let mut g_c2_w = vec![0.0; c2_w.len()];
    let mut g_c2_b = vec![0.0; c2_b.len()];
    let d_p1 = conv3d_backward(&cache.p1, &cache.c2, &d_c2, &conv2, &mut g_c2_w, &mut g_c2_b)?;

    let d_c1 = maxpool3d_backward(&d_p1.data, &cache.p1_argmax, cache.c1.data.len());
    let conv1 = Conv3dLayer {
        out_maps: cfg.c1_maps,
        in_maps: 1,
        kernel: model.geometry.c1_kernel,
        kernels: &c1_w,
        bias: &c1_b,
    };
    let mut g_c1_w = vec![0.0; c1_w.len()];
    let mut g_c1_b = vec![0.0; c1_b.len()];
    conv3d_backward(&cache.input, &cache.c1, &d_c1, &conv1, &mut g_c1_w, &mut g_c1_b)?;

    let updates: [(ParamId, &[f64]); 8] = [
        (ids.c1_w, &g_c1_w),
        (ids.c1_b, &g_c1_b),
        (ids.c2_w, &g_c2_w),
        (ids.c2_b, &g_c2_b),
        (ids.fc1_w, &g_fc1_w),
        (ids.fc1_b, &g_fc1_b),
        (ids.fc2_w, &g_fc2_w),
        (ids.fc2_b, &g_fc2_b),
    ];
    for (id, delta) in updates {
        for (acc, d) in model.params.grad_mut(id).iter_mut().zip(delta) {
            *acc += d;
        }
    }
    Ok(())
}

impl Network for CnnModel {
    fn num_classes(&self) -> usize {
        self.config.classes
    }

    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn logits(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.features(input)
    }

    fn accumulate_gradient(
        &mut self,
        input: &[f64],
        class: usize,
        rng: &mut SeededRng,
    ) -> Result<f64> {
        let cache = cnn_forward(input, self, Some(rng))?;
        let (loss, dlogits) = cross_entropy(&softmax(&cache.logits), class)?;
        cnn_backward(&cache, &dlogits, self)?;
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gradient_check;
    use crate::training::{accuracy, train_sgd, SgdConfig};

    fn random_volume(rng: &mut SeededRng, maps: usize, dims: [usize; 3]) -> Volume {
        let n = maps * dims.iter().product::<usize>();
        Volume::new(maps, dims, (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap()
    }

    #[test]
    fn unit_kernel_is_elementwise_sigmoid() {
        let mut rng = SeededRng::new(1);
        let v = random_volume(&mut rng, 1, [3, 4, 2]);
        let layer = Conv3dLayer {
            out_maps: 1,
            in_maps: 1,
            kernel: [1, 1, 1],
            kernels: &[1.0],
            bias: &[0.0],
        };
        let out = conv3d_forward(&v, &layer).unwrap();
        assert_eq!(out.dims, v.dims);
        for (a, b) in out.data.iter().zip(&v.data) {
            assert_eq!(*a, sigmoid(*b));
        }
    }

    #[test]
    fn zero_kernels_give_one_half() {
        let mut rng = SeededRng::new(2);
        let v = random_volume(&mut rng, 2, [5, 5, 5]);
        let k = vec![0.0; 3 * 2 * 27];
        let layer = Conv3dLayer {
            out_maps: 3,
            in_maps: 2,
            kernel: [3, 3, 3],
            kernels: &k,
            bias: &[0.0; 3],
        };
        let out = conv3d_forward(&v, &layer).unwrap();
        assert_eq!(out.dims, [3, 3, 3]);
        assert!(out.data.iter().all(|&x| x == 0.5));
    }

    #[test]
    fn kernel_larger_than_input_rejected() {
        let v = Volume::zeros(1, [2, 5, 5]);
        let k = vec![0.0; 27];
        let layer = Conv3dLayer {
            out_maps: 1,
            in_maps: 1,
            kernel: [3, 3, 3],
            kernels: &k,
            bias: &[0.0],
        };
        assert!(matches!(conv3d_forward(&v, &layer), Err(Error::Shape(_))));
    }

    #[test]
    fn pooling_cases() {
        let (out, _) = maxpool3d(&Volume::new(1, [3, 3, 3], vec![2.5; 27]).unwrap());
        assert_eq!(out.dims, [2, 2, 2]);
        assert!(out.data.iter().all(|&x| x == 2.5));

        let mut data = vec![0.0; 8];
        data[5] = 9.0;
        let (out, arg) = maxpool3d(&Volume::new(1, [2, 2, 2], data).unwrap());
        assert_eq!(out.data, vec![9.0]);
        assert_eq!(arg, vec![5]);
    }

    #[test]
    fn pooling_odd_extents_matches_window_oracle() {
        let mut rng = SeededRng::new(3);
        let v = random_volume(&mut rng, 2, [5, 5, 4]);
        let (out, _) = maxpool3d(&v);
        assert_eq!(out.dims, [3, 3, 2]);
        for m in 0..2 {
            for x in 0..3 {
                for y in 0..3 {
                    for z in 0..2 {
                        let mut best = f64::MIN;
                        for ix in 2 * x..=2 * x + 1 {
                            for iy in 2 * y..=2 * y + 1 {
                                for iz in 2 * z..=2 * z + 1 {
                                    if ix < 5 && iy < 5 && iz < 4 {
                                        best = best.max(v.at(m, ix, iy, iz));
                                    }
                                }
                            }
                        }
                        assert_eq!(out.at(m, x, y, z), best);
                    }
                }
            }
        }
    }

    #[test]
    fn pool_backward_conserves_gradient() {
        let mut rng = SeededRng::new(4);
        let v = random_volume(&mut rng, 2, [5, 4, 3]);
        let (out, arg) = maxpool3d(&v);
        let g: Vec<f64> = (0..out.data.len()).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let back = maxpool3d_backward(&g, &arg, v.data.len());
        let nonzero = back.iter().filter(|&&x| x != 0.0).count();
        assert_eq!(nonzero, out.data.len());
        assert!((back.iter().sum::<f64>() - g.iter().sum::<f64>()).abs() < 1e-12);
        for (o, &i) in arg.iter().enumerate() {
            assert_eq!(back[i], g[o]);
        }
    }

    #[test]
    fn standard_patch_sizes_compose() {
        for patch in [15, 19, 23, 27] {
            for channels in [3, 4, 5, 8] {
                let g = CnnConfig::standard(patch, channels, 9, 0.3).geometry().unwrap();
                let c1 = patch - 4;
                let p1 = c1.div_ceil(2);
                let c2 = p1 - 2;
                let p2 = c2.div_ceil(2);
                assert_eq!(&g.p2_out[..2], &[p2, p2]);
                let d1 = channels - channels.min(5) + 1;
                let dp1 = d1.div_ceil(2);
                let d2 = dp1 - dp1.min(3) + 1;
                assert_eq!(g.p2_out[2], d2.div_ceil(2));
                assert_eq!(g.c1_kernel, [5, 5, channels.min(5)]);
            }
        }
        assert!(matches!(
            CnnConfig::standard(7, 3, 2, 0.0).geometry(),
            Err(Error::Shape(_))
        ));
        assert!(CnnConfig::standard(15, 3, 2, 1.0).geometry().is_err());
    }

    fn tiny_config(maps: usize, dropout: f64) -> CnnConfig {
        CnnConfig {
            patch: 6,
            channels: 6,
            c1_maps: maps,
            c2_maps: maps,
            c1_kernel: [3, 3, 3],
            c2_kernel: [2, 2, 2],
            fc1: 5,
            classes: 3,
            dropout,
        }
    }

    fn widened(config: CnnConfig, seed: u64) -> CnnModel {
        let mut rng = SeededRng::new(seed);
        let mut m = CnnModel::new(config, &mut rng).unwrap();
        for p in m.params.iter_mut() {
            for v in p.value.data_mut() {
                *v = v.signum() * (v.abs() * 3.0 + 0.05);
            }
        }
        m
    }

    fn model_gradient_error(maps: usize, dropout: f64, seed: u64) -> f64 {
        let mut model = widened(tiny_config(maps, dropout), seed);
        let mut rng = SeededRng::new(seed + 1);
        let x: Vec<f64> = (0..216).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let mask_rng = SeededRng::new(seed + 2);
        let mut r = mask_rng.clone();
        model.accumulate_gradient(&x, 2, &mut r).unwrap();
        let probe = model.clone();
        let mut params = model.params.clone();
        gradient_check(&mut params, 1e-5, |p| {
            let mut m = probe.clone();
            m.params = p.clone();
            let mut r = mask_rng.clone();
            let c = cnn_forward(&x, &m, Some(&mut r)).unwrap();
            cross_entropy(&softmax(&c.logits), 2).unwrap().0
        })
    }

    #[test]
    fn backward_matches_central_differences() {
        for maps in [1, 2] {
            let err = model_gradient_error(maps, 0.0, 30 + maps as u64);
            assert!(err < 1e-4, "maps {maps}: {err}");
        }
        let err = model_gradient_error(2, 0.4, 50);
        assert!(err < 1e-4, "with dropout: {err}");
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_grads() {
        let mut model = widened(tiny_config(2, 0.0), 3);
        let x = vec![0.3; 216];
        let cache = cnn_forward(&x, &model, None).unwrap();
        cnn_backward(&cache, &[0.0; 3], &mut model).unwrap();
        assert!(model.params.iter().all(|p| p.grad.data().iter().all(|&g| g == 0.0)));
    }

    #[test]
    fn inference_ignores_dropout() {
        let model = widened(tiny_config(2, 0.5), 9);
        let x: Vec<f64> = (0..216).map(|i| (i as f64 * 0.1).sin()).collect();
        let a = model.features(&x).unwrap();
        assert_eq!(a, model.features(&x).unwrap());
        let no_drop = widened(tiny_config(2, 0.0), 9);
        let mut rng = SeededRng::new(0);
        let train = cnn_forward(&x, &no_drop, Some(&mut rng)).unwrap();
        assert_eq!(train.logits, no_drop.features(&x).unwrap());
        assert_eq!(a, no_drop.features(&x).unwrap());
    }

    #[test]
    fn dropout_mask_is_reproducible_and_near_rate() {
        let model = CnnModel::new(CnnConfig::standard(15, 3, 4, 0.3), &mut SeededRng::new(1)).unwrap();
        let x = vec![0.5; 15 * 15 * 3];
        let m1 = cnn_forward(&x, &model, Some(&mut SeededRng::new(99))).unwrap().mask;
        let m2 = cnn_forward(&x, &model, Some(&mut SeededRng::new(99))).unwrap().mask;
        assert_eq!(m1, m2);
        let zeroed = m1.iter().filter(|&&m| m == 0.0).count();
        // binomial(1024, 0.3): mean 307.2, 3 sigma = 44
        assert!((263..=351).contains(&zeroed), "{zeroed}");
        assert!(m1.iter().all(|&m| m == 0.0 || (m - 1.0 / 0.7).abs() < 1e-15));
    }

    #[test]
    fn predict_is_softmax_of_features_and_zero_model_uniform() {
        let model = widened(tiny_config(2, 0.3), 5);
        let x: Vec<f64> = (0..216).map(|i| (i as f64 * 0.37).cos()).collect();
        let p = model.predict(&x).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (a, b) in softmax(&model.features(&x).unwrap()).iter().zip(&p) {
            assert!((a - b).abs() < 1e-12);
        }
        let zero = CnnModel::zeros(tiny_config(1, 0.0)).unwrap();
        assert!(zero.predict(&x).unwrap().iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert!(matches!(model.predict(&x[..10]), Err(Error::Shape(_))));
    }

    fn texture_patches() -> Vec<(Vec<f64>, usize)> {
        // class 0: vertical stripes, class 1: horizontal stripes
        let mut rng = SeededRng::new(21);
        (0..16)
            .map(|i| {
                let class = i % 2;
                let mut v = Vec::with_capacity(9 * 9 * 3);
                for r in 0..9 {
                    for c in 0..9 {
                        let on = if class == 0 { c % 2 == 0 } else { r % 2 == 0 };
                        for _ in 0..3 {
                            v.push(if on { 1.0 } else { 0.0 } + rng.normal(0.0, 0.05));
                        }
                    }
                }
                (v, class)
            })
            .collect()
    }

    fn small_texture_config(dropout: f64) -> CnnConfig {
        CnnConfig {
            patch: 9,
            channels: 3,
            c1_maps: 4,
            c2_maps: 4,
            c1_kernel: [3, 3, 3],
            c2_kernel: [3, 3, 3],
            fc1: 32,
            classes: 2,
            dropout,
        }
    }

    #[test]
    fn learns_disjoint_textures() {
        let data = texture_patches();
        let samples: Vec<(&[f64], usize)> = data.iter().map(|(x, c)| (x.as_slice(), *c)).collect();
        let mut rng = SeededRng::new(4);
        let mut model = CnnModel::new(small_texture_config(0.3), &mut rng).unwrap();
        let sgd = SgdConfig {
            epochs: 200,
            learning_rate: 0.5,
            batch_size: 4,
        };
        train_sgd(&mut model, &samples, &sgd, &mut rng).unwrap();
        assert_eq!(accuracy(&model, &samples).unwrap(), 1.0);
    }

    #[test]
    fn zero_learning_rate_and_determinism() {
        let data = texture_patches();
        let samples: Vec<(&[f64], usize)> = data.iter().map(|(x, c)| (x.as_slice(), *c)).collect();
        let model = CnnModel::new(small_texture_config(0.3), &mut SeededRng::new(1)).unwrap();
        let mut frozen = model.clone();
        let sgd = SgdConfig {
            epochs: 2,
            learning_rate: 0.0,
            batch_size: 4,
        };
        train_sgd(&mut frozen, &samples, &sgd, &mut SeededRng::new(2)).unwrap();
        assert_eq!(frozen, model);

        let run = || {
            let mut m = model.clone();
            let sgd = SgdConfig {
                learning_rate: 0.1,
                ..sgd
            };
            train_sgd(&mut m, &samples, &sgd, &mut SeededRng::new(2)).unwrap();
            m
        };
        assert_eq!(run(), run());
    }
}
