//! GRU sequence classifier over a pixel's spectral bands.
//!
//! A pixel spectrum is chunked into steps of `group` bands and fed through a
//! bias-free GRU. The final hidden state passes through `fc1` (tanh) and
//! `fc2`; the `fc2` output is both the logit vector and the spectral
//! feature used by co-training.

use crate::error::{Error, Result};
use crate::numerics::{
    cross_entropy, linear_backward_slice, linear_forward_slice, sigmoid, softmax, ParamId,
    ParamStore, SeededRng, Tensor,
};
use crate::preprocess::spectral_sequence;
use crate::training::Network;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RnnConfig {
    pub bands: usize,
    pub group: usize,
    pub hidden: usize,
    pub fc1: usize,
    pub classes: usize,
}

impl RnnConfig {
    pub fn validate(&self) -> Result<()> {
        let RnnConfig {
            bands,
            group,
            hidden,
            fc1,
            classes,
        } = *self;
        if bands == 0 || group == 0 || hidden == 0 || fc1 == 0 || classes == 0 {
            return Err(Error::InvalidConfig(format!(
                "RNN sizes must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.bands.div_ceil(self.group)
    }
}

/// Borrowed GRU weights. `w_*` are `hidden x input`, `u_*` are
/// `hidden x hidden`, all row-major. There are no bias terms.
#[derive(Debug, Clone, Copy)]
pub struct GruLayer<'a> {
    pub hidden: usize,
    pub input: usize,
    pub w_z: &'a [f64],
    pub u_z: &'a [f64],
    pub w_r: &'a [f64],
    pub u_r: &'a [f64],
    pub w: &'a [f64],
    pub u: &'a [f64],
}

/// Values saved by [`gru_step`] for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct GruStepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub candidate: Vec<f64>,
    /// `U h_prev`, before the reset gate is applied.
    pub u_h: Vec<f64>,
    pub h: Vec<f64>,
}

fn matvec(m: &[f64], v: &[f64], rows: usize) -> Vec<f64> {
    let cols = v.len();
    (0..rows)
        .map(|i| m[i * cols..(i + 1) * cols].iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

/// `acc += m^T v`
fn matvec_t_acc(m: &[f64], v: &[f64], acc: &mut [f64]) {
    let cols = acc.len();
    for (i, &vi) in v.iter().enumerate() {
        if vi == 0.0 {
            continue;
        }
        for (a, w) in acc.iter_mut().zip(&m[i * cols..(i + 1) * cols]) {
            *a += w * vi;
        }
    }
}

/// `g += a b^T`
fn outer_acc(g: &mut [f64], a: &[f64], b: &[f64]) {
    let cols = b.len();
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        for (gij, bj) in g[i * cols..(i + 1) * cols].iter_mut().zip(b) {
            *gij += ai * bj;
        }
    }
}

impl GruLayer<'_> {
    fn check(&self) -> Result<()> {
        let (h, i) = (self.hidden, self.input);
        for (name, m, n) in [
            ("w_z", self.w_z, h * i),
            ("w_r", self.w_r, h * i),
            ("w", self.w, h * i),
            ("u_z", self.u_z, h * h),
            ("u_r", self.u_r, h * h),
            ("u", self.u, h * h),
        ] {
            if m.len() != n {
                return Err(Error::Shape(format!(
                    "GRU matrix {name} has {} values, expected {n}",
                    m.len()
                )));
            }
        }
        Ok(())
    }
}

/// One GRU update:
/// `z = σ(W_z x + U_z h)`, `r = σ(W_r x + U_r h)`,
/// `h~ = tanh(W x + r ⊙ U h)`, `h' = z ⊙ h + (1 - z) ⊙ h~`.
pub fn gru_step(x: &[f64], h_prev: &[f64], layer: &GruLayer<'_>) -> Result<GruStepCache> {
    layer.check()?;
    if x.len() != layer.input || h_prev.len() != layer.hidden {
        return Err(Error::Shape(format!(
            "gru_step: input {} / state {} vs layer {}x{}",
            x.len(),
            h_prev.len(),
            layer.hidden,
            layer.input
        )));
    }
    let n = layer.hidden;
    let wz = matvec(layer.w_z, x, n);
    let uz = matvec(layer.u_z, h_prev, n);
    let wr = matvec(layer.w_r, x, n);
    let ur = matvec(layer.u_r, h_prev, n);
    let wx = matvec(layer.w, x, n);
    let u_h = matvec(layer.u, h_prev, n);

    let z: Vec<f64> = wz.iter().zip(&uz).map(|(a, b)| sigmoid(a + b)).collect();
    let r: Vec<f64> = wr.iter().zip(&ur).map(|(a, b)| sigmoid(a + b)).collect();
    let candidate: Vec<f64> = (0..n).map(|j| (wx[j] + r[j] * u_h[j]).tanh()).collect();
    let h = (0..n)
        .map(|j| z[j] * h_prev[j] + (1.0 - z[j]) * candidate[j])
        .collect();
    Ok(GruStepCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        z,
        r,
        candidate,
        u_h,
        h,
    })
}

/// Gradient buffers for the six GRU matrices, in [`GruLayer`] order.
pub struct GruGrads<'a> {
    pub w_z: &'a mut [f64],
    pub u_z: &'a mut [f64],
    pub w_r: &'a mut [f64],
    pub u_r: &'a mut [f64],
    pub w: &'a mut [f64],
    pub u: &'a mut [f64],
}

/// Backward of one [`gru_step`]: accumulates weight gradients and returns
/// the gradient with respect to `h_prev`.
pub fn gru_step_backward(
    cache: &GruStepCache,
    dh: &[f64],
    layer: &GruLayer<'_>,
    grads: &mut GruGrads<'_>,
) -> Vec<f64> {
    let n = layer.hidden;
    let mut dh_prev = vec![0.0; n];
    let mut da_z = vec![0.0; n];
    let mut da_r = vec![0.0; n];
    let mut da = vec![0.0; n];
    let mut du_h = vec![0.0; n];
    for j in 0..n {
        let (z, r, c) = (cache.z[j], cache.r[j], cache.candidate[j]);
        dh_prev[j] += dh[j] * z;
        let dz = dh[j] * (cache.h_prev[j] - c);
        let dc = dh[j] * (1.0 - z);
        da[j] = dc * (1.0 - c * c);
        let dr = da[j] * cache.u_h[j];
        du_h[j] = da[j] * r;
        da_z[j] = dz * z * (1.0 - z);
        da_r[j] = dr * r * (1.0 - r);
    }
    outer_acc(grads.w, &da, &cache.x);
    outer_acc(grads.u, &du_h, &cache.h_prev);
    outer_acc(grads.w_z, &da_z, &cache.x);
    outer_acc(grads.u_z, &da_z, &cache.h_prev);
    outer_acc(grads.w_r, &da_r, &cache.x);
    outer_acc(grads.u_r, &da_r, &cache.h_prev);
    matvec_t_acc(layer.u, &du_h, &mut dh_prev);
    matvec_t_acc(layer.u_z, &da_z, &mut dh_prev);
    matvec_t_acc(layer.u_r, &da_r, &mut dh_prev);
    dh_prev
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct RnnIds {
    w_z: ParamId,
    u_z: ParamId,
    w_r: ParamId,
    u_r: ParamId,
    w: ParamId,
    u: ParamId,
    fc1_w: ParamId,
    fc1_b: ParamId,
    fc2_w: ParamId,
    fc2_b: ParamId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RnnModel {
    config: RnnConfig,
    params: ParamStore,
    ids: RnnIds,
}

/// Forward-pass record for [`rnn_backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct RnnCache {
    pub steps: Vec<GruStepCache>,
    pub fc1_out: Vec<f64>,
    pub logits: Vec<f64>,
}

/// Parameter names in checkpoint order.
pub const RNN_PARAM_NAMES: [&str; 10] = [
    "gru.w_z",
    "gru.u_z",
    "gru.w_r",
    "gru.u_r",
    "gru.w",
    "gru.u",
    "fc1.weight",
    "fc1.bias",
    "fc2.weight",
    "fc2.bias",
];

impl RnnModel {
    /// All-zero parameters.
    pub fn zeros(config: RnnConfig) -> Result<Self> {
        config.validate()?;
        let (g, h, f, k) = (config.group, config.hidden, config.fc1, config.classes);
        let shapes: [Vec<usize>; 10] = [
            vec![h, g],
            vec![h, h],
            vec![h, g],
            vec![h, h],
            vec![h, g],
            vec![h, h],
            vec![f, h],
            vec![f],
            vec![k, f],
            vec![k],
        ];
        let mut params = ParamStore::new();
        let mut ids = Vec::with_capacity(10);
        for (name, shape) in RNN_PARAM_NAMES.iter().zip(shapes) {
            ids.push(params.add(*name, Tensor::zeros(&shape))?);
        }
        let ids = RnnIds {
            w_z: ids[0],
            u_z: ids[1],
            w_r: ids[2],
            u_r: ids[3],
            w: ids[4],
            u: ids[5],
            fc1_w: ids[6],
            fc1_b: ids[7],
            fc2_w: ids[8],
            fc2_b: ids[9],
        };
        Ok(Self {
            config,
            params,
            ids,
        })
    }

    /// Weights uniform in `[-s, s]` with `s = sqrt(1 / fan_in)`; biases zero.
    pub fn new(config: RnnConfig, rng: &mut SeededRng) -> Result<Self> {
        let mut model = Self::zeros(config)?;
        for p in model.params.iter_mut() {
            if p.name.ends_with(".bias") {
                continue;
            }
            let fan_in = p.value.shape()[1] as f64;
            let s = (1.0 / fan_in).sqrt();
            for v in p.value.data_mut() {
                *v = rng.uniform(-s, s);
            }
        }
        Ok(model)
    }

    pub fn config(&self) -> &RnnConfig {
        &self.config
    }

    pub fn gru(&self) -> GruLayer<'_> {
        let p = &self.params;
        GruLayer {
            hidden: self.config.hidden,
            input: self.config.group,
            w_z: p.value(self.ids.w_z),
            u_z: p.value(self.ids.u_z),
            w_r: p.value(self.ids.w_r),
            u_r: p.value(self.ids.u_r),
            w: p.value(self.ids.w),
            u: p.value(self.ids.u),
        }
    }

    fn sequence(&self, spectrum: &[f64]) -> Result<Vec<Vec<f64>>> {
        if spectrum.len() != self.config.bands {
            return Err(Error::Shape(format!(
                "spectrum has {} bands, model expects {}",
                spectrum.len(),
                self.config.bands
            )));
        }
        spectral_sequence(spectrum, self.config.group)
    }

    /// Softmax probabilities for a pixel spectrum.
    pub fn predict(&self, spectrum: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.features(spectrum)?))
    }

    /// `fc2` output (pre-softmax) for a pixel spectrum.
    pub fn features(&self, spectrum: &[f64]) -> Result<Vec<f64>> {
        let seq = self.sequence(spectrum)?;
        Ok(rnn_forward(&seq, self)?.logits)
    }
}

/// Runs the GRU over `sequence` from `h_0 = 0`, then the FC head on the last
/// hidden state.
pub fn rnn_forward(sequence: &[Vec<f64>], model: &RnnModel) -> Result<RnnCache> {
    if sequence.is_empty() {
        return Err(Error::InvalidInput("empty input sequence".into()));
    }
    let layer = model.gru();
    let mut h = vec![0.0; model.config.hidden];
    let mut steps = Vec::with_capacity(sequence.len());
    for x in sequence {
        let cache = gru_step(x, &h, &layer)?;
        h.clone_from(&cache.h);
        steps.push(cache);
    }
    let p = &model.params;
    let ids = &model.ids;
    let fc1_out: Vec<f64> = linear_forward_slice(&h, p.value(ids.fc1_w), p.value(ids.fc1_b))
        .into_iter()
        .map(f64::tanh)
        .collect();
    let logits = linear_forward_slice(&fc1_out, p.value(ids.fc2_w), p.value(ids.fc2_b));
    Ok(RnnCache {
        steps,
        fc1_out,
        logits,
    })
}

/// Backpropagation through time. Adds parameter gradients into the model's
/// store.
pub fn rnn_backward(cache: &RnnCache, dlogits: &[f64], model: &mut RnnModel) -> Result<()> {
    let Some(last) = cache.steps.last() else {
        return Err(Error::Internal("RNN cache has no steps".into()));
    };
    let cfg = model.config;
    if dlogits.len() != cfg.classes || cache.fc1_out.len() != cfg.fc1 {
        return Err(Error::Internal("RNN cache does not match model".into()));
    }
    let ids = model.ids;
    // Snapshot weights so gradient buffers can be borrowed mutably.
    let fc2_w = model.params.value(ids.fc2_w).to_vec();
    let fc1_w = model.params.value(ids.fc1_w).to_vec();

    let mut g_fc2_w = vec![0.0; fc2_w.len()];
    let mut g_fc2_b = vec![0.0; cfg.classes];
    let d_fc1 = linear_backward_slice(&cache.fc1_out, &fc2_w, dlogits, &mut g_fc2_w, &mut g_fc2_b);
    let d_fc1_pre: Vec<f64> = d_fc1
        .iter()
        .zip(&cache.fc1_out)
        .map(|(d, y)| d * (1.0 - y * y))
        .collect();
    let mut g_fc1_w = vec![0.0; fc1_w.len()];
    let mut g_fc1_b = vec![0.0; cfg.fc1];
    let mut dh = linear_backward_slice(&last.h, &fc1_w, &d_fc1_pre, &mut g_fc1_w, &mut g_fc1_b);

    let weights: Vec<Vec<f64>> = [ids.w_z, ids.u_z, ids.w_r, ids.u_r, ids.w, ids.u]
        .iter()
        .map(|&id| model.params.value(id).to_vec())
        .collect();
    let layer = GruLayer {
        hidden: cfg.hidden,
        input: cfg.group,
        w_z: &weights[0],
        u_z: &weights[1],
        w_r: &weights[2],
        u_r: &weights[3],
        w: &weights[4],
        u: &weights[5],
    };
    let mut g: Vec<Vec<f64>> = weights.iter().map(|w| vec![0.0; w.len()]).collect();
    {
        let [gwz, guz, gwr, gur, gw, gu] = &mut g[..] else {
            unreachable!()
        };
        let mut grads = GruGrads {
            w_z: gwz,
            u_z: guz,
            w_r: gwr,
            u_r: gur,
            w: gw,
            u: gu,
        };
        for step in cache.steps.iter().rev() {
            dh = gru_step_backward(step, &dh, &layer, &mut grads);
        }
    }

    let updates: [(ParamId, &[f64]); 10] = [
        (ids.w_z, &g[0]),
        (ids.u_z, &g[1]),
        (ids.w_r, &g[2]),
        (ids.u_r, &g[3]),
        (ids.w, &g[4]),
        (ids.u, &g[5]),
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

impl Network for RnnModel {
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
        _rng: &mut SeededRng,
    ) -> Result<f64> {
        let seq = self.sequence(input)?;
        let cache = rnn_forward(&seq, self)?;
        let (loss, dlogits) = cross_entropy(&softmax(&cache.logits), class)?;
        rnn_backward(&cache, &dlogits, self)?;
        Ok(loss)
    }
}
