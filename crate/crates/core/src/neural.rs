//! Minimal fully connected networks: affine -> layer norm -> tanh hidden
//! layers, a softmax or linear head, exact reverse-mode gradients, and Adam.
//!
//! This is the substrate for the two projector networks and for the
//! classifier. The architecture family is fixed; there is no general graph
//! autodiff. Forward/backward are pure functions of (params, batch), so
//! trained parameters can be shared freely across threads.

use std::io::{Read, Write};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Variance guard inside layer normalization.
const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputHead {
    Softmax,
    Linear,
}

/// Gain/shift pair applied after per-row normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gain: Array1<f64>,
    pub shift: Array1<f64>,
}

/// One affine layer; hidden layers carry layer-norm parameters, the output
/// layer does not.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// out x in.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub norm: Option<LayerNorm>,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }
}

/// Weights, biases, and normalization parameters of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    /// Hidden layers (with norm) followed by the output layer (without).
    pub layers: Vec<Layer>,
    pub activation: Activation,
}

impl NetworkParams {
    /// Glorot-uniform weights, zero biases, unit gain, zero shift.
    /// `hidden_count` may be zero, leaving a bare affine map into the head.
    pub fn init(
        input_dim: usize,
        hidden_width: usize,
        hidden_count: usize,
        output_dim: usize,
        activation: Activation,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        assert!(input_dim >= 1 && output_dim >= 1);
        assert!(hidden_count == 0 || hidden_width >= 1);
        let mut layers = Vec::with_capacity(hidden_count + 1);
        let mut fan_in = input_dim;
        for _ in 0..hidden_count {
            layers.push(Layer {
                weight: glorot(hidden_width, fan_in, rng),
                bias: Array1::zeros(hidden_width),
                norm: Some(LayerNorm {
                    gain: Array1::ones(hidden_width),
                    shift: Array1::zeros(hidden_width),
                }),
            });
            fan_in = hidden_width;
        }
        layers.push(Layer {
            weight: glorot(output_dim, fan_in, rng),
            bias: Array1::zeros(output_dim),
            norm: None,
        });
        NetworkParams { layers, activation }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().expect("at least one layer").in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.tensor_slices().iter().map(|t| t.len()).sum()
    }

    /// All parameter tensors as flat slices, in the declared layer order:
    /// per layer weight (row-major), bias, then gain and shift when present.
    pub fn tensor_slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.push(layer.weight.as_slice().expect("standard layout"));
            out.push(layer.bias.as_slice().expect("standard layout"));
            if let Some(norm) = &layer.norm {
                out.push(norm.gain.as_slice().expect("standard layout"));
                out.push(norm.shift.as_slice().expect("standard layout"));
            }
        }
        out
    }

    pub fn tensor_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            out.push(layer.weight.as_slice_mut().expect("standard layout"));
            out.push(layer.bias.as_slice_mut().expect("standard layout"));
            if let Some(norm) = &mut layer.norm {
                out.push(norm.gain.as_slice_mut().expect("standard layout"));
                out.push(norm.shift.as_slice_mut().expect("standard layout"));
            }
        }
        out
    }
}

fn glorot(out_dim: usize, in_dim: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
    let mut w = Array2::zeros((out_dim, in_dim));
    for v in w.iter_mut() {
        *v = rng.gen_range(-bound..bound);
    }
    w
}

/// Cached activations and normalization statistics from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTape {
    head: OutputHead,
    /// Input to each layer; `layer_inputs[0]` is the batch itself.
    layer_inputs: Vec<Array2<f64>>,
    /// Per hidden layer: normalized values and 1/std per row.
    ln_cache: Vec<(Array2<f64>, Array1<f64>)>,
    /// Head outputs.
    outputs: Array2<f64>,
}

impl ForwardTape {
    pub fn outputs(&self) -> &Array2<f64> {
        &self.outputs
    }
}

/// Gradients shaped exactly like [`NetworkParams`].
#[derive(Debug, Clone)]
pub struct NetGradients {
    pub layers: Vec<Layer>,
}

impl NetGradients {
    pub fn zeros_like(params: &NetworkParams) -> Self {
        let layers = params
            .layers
            .iter()
            .map(|l| Layer {
                weight: Array2::zeros(l.weight.raw_dim()),
                bias: Array1::zeros(l.bias.raw_dim()),
                norm: l.norm.as_ref().map(|n| LayerNorm {
                    gain: Array1::zeros(n.gain.raw_dim()),
                    shift: Array1::zeros(n.shift.raw_dim()),
                }),
            })
            .collect();
        NetGradients { layers }
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.push(layer.weight.as_slice().expect("standard layout"));
            out.push(layer.bias.as_slice().expect("standard layout"));
            if let Some(norm) = &layer.norm {
                out.push(norm.gain.as_slice().expect("standard layout"));
                out.push(norm.shift.as_slice().expect("standard layout"));
            }
        }
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            out.push(layer.weight.as_slice_mut().expect("standard layout"));
            out.push(layer.bias.as_slice_mut().expect("standard layout"));
            if let Some(norm) = &mut layer.norm {
                out.push(norm.gain.as_slice_mut().expect("standard layout"));
                out.push(norm.shift.as_slice_mut().expect("standard layout"));
            }
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.slices()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Runs the network over a batch (rows are samples) and records the tape
/// needed for [`backward`].
///
/// Hidden layers compute affine -> layer norm -> activation; the output
/// layer computes affine followed by the selected head. Softmax rows are
/// positive and sum to one.
pub fn forward(
    params: &NetworkParams,
    batch: &ArrayView2<f64>,
    head: OutputHead,
) -> Result<(Array2<f64>, ForwardTape)> {
    if batch.ncols() != params.input_dim() {
        return Err(Error::ShapeMismatch {
            what: "network input width",
            expected: params.input_dim(),
            got: batch.ncols(),
        });
    }
    let n_layers = params.layers.len();
    let mut layer_inputs = Vec::with_capacity(n_layers);
    let mut ln_cache = Vec::with_capacity(n_layers.saturating_sub(1));
    let mut x = batch.to_owned();

    for layer in &params.layers {
        layer_inputs.push(x.clone());
        let mut z = x.dot(&layer.weight.t());
        z += &layer.bias;
        match &layer.norm {
            Some(norm) => {
                let (normalized, inv_std) = layer_norm_forward(&z);
                let mut y = &normalized * &norm.gain;
                y += &norm.shift;
                let a = match params.activation {
                    Activation::Tanh => y.mapv(f64::tanh),
                    Activation::Relu => y.mapv(|v| v.max(0.0)),
                };
                ln_cache.push((normalized, inv_std));
                x = a;
            }
            None => {
                x = match head {
                    OutputHead::Softmax => softmax_rows(&z),
                    OutputHead::Linear => z,
                };
            }
        }
    }

    let tape = ForwardTape {
        head,
        layer_inputs,
        ln_cache,
        outputs: x.clone(),
    };
    Ok((x, tape))
}

/// Forward pass without recording a tape; for bulk inference where no
/// backward pass will follow.
pub fn forward_outputs(
    params: &NetworkParams,
    batch: &ArrayView2<f64>,
    head: OutputHead,
) -> Result<Array2<f64>> {
    if batch.ncols() != params.input_dim() {
        return Err(Error::ShapeMismatch {
            what: "network input width",
            expected: params.input_dim(),
            got: batch.ncols(),
        });
    }
    let mut x = batch.to_owned();
    for layer in &params.layers {
        let mut z = x.dot(&layer.weight.t());
        z += &layer.bias;
        match &layer.norm {
            Some(norm) => {
                let (mut normalized, _) = layer_norm_forward(&z);
                normalized *= &norm.gain;
                normalized += &norm.shift;
                x = match params.activation {
                    Activation::Tanh => normalized.mapv(f64::tanh),
                    Activation::Relu => normalized.mapv(|v| v.max(0.0)),
                };
            }
            None => {
                x = match head {
                    OutputHead::Softmax => softmax_rows(&z),
                    OutputHead::Linear => z,
                };
            }
        }
    }
    Ok(x)
}

fn layer_norm_forward(z: &Array2<f64>) -> (Array2<f64>, Array1<f64>) {
    let width = z.ncols() as f64;
    let mean = z.mean_axis(Axis(1)).expect("non-empty rows");
    let mut centered = z.clone();
    for (mut row, &m) in centered.rows_mut().into_iter().zip(mean.iter()) {
        row -= m;
    }
    let var = centered.mapv(|v| v * v).sum_axis(Axis(1)) / width;
    let inv_std = var.mapv(|v| 1.0 / (v + LN_EPS).sqrt());
    for (mut row, &s) in centered.rows_mut().into_iter().zip(inv_std.iter()) {
        row *= s;
    }
    (centered, inv_std)
}

fn softmax_rows(z: &Array2<f64>) -> Array2<f64> {
    let mut out = z.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    out
}

/// Exact reverse-mode gradients of the scalar loss whose output gradient is
/// `upstream` (the gradient with respect to the head outputs).
///
/// Returns the parameter gradients and the gradient with respect to the
/// batch. Gradients are summed over the batch; any averaging belongs to the
/// loss that produced `upstream`.
pub fn backward(
    params: &NetworkParams,
    tape: &ForwardTape,
    upstream: &ArrayView2<f64>,
) -> Result<(NetGradients, Array2<f64>)> {
    if upstream.shape() != tape.outputs.shape() {
        return Err(Error::ShapeMismatch {
            what: "upstream gradient rows x cols",
            expected: tape.outputs.len(),
            got: upstream.len(),
        });
    }

    let mut grads = NetGradients::zeros_like(params);
    let last = params.layers.len() - 1;

    // Head backward -> gradient at the output layer's affine result.
    let mut dz = match tape.head {
        OutputHead::Softmax => {
            let y = &tape.outputs;
            let mut dz = upstream.to_owned();
            for (mut drow, yrow) in dz.rows_mut().into_iter().zip(y.rows()) {
                let dot: f64 = drow.iter().zip(yrow.iter()).map(|(d, y)| d * y).sum();
                for (d, &yv) in drow.iter_mut().zip(yrow.iter()) {
                    *d = yv * (*d - dot);
                }
            }
            dz
        }
        OutputHead::Linear => upstream.to_owned(),
    };

    for idx in (0..=last).rev() {
        let layer = &params.layers[idx];
        if idx != last {
            // dz currently holds the gradient at this layer's activation
            // output; pull it back through activation and layer norm.
            let a = &tape.layer_inputs[idx + 1];
            match params.activation {
                Activation::Tanh => {
                    dz.zip_mut_with(a, |d, &av| *d *= 1.0 - av * av);
                }
                Activation::Relu => {
                    dz.zip_mut_with(a, |d, &av| {
                        if av <= 0.0 {
                            *d = 0.0;
                        }
                    });
                }
            }
            let norm = layer.norm.as_ref().expect("hidden layer has norm");
            let (normalized, inv_std) = &tape.ln_cache[idx];
            let (d_gain, d_shift, new_dz) = layer_norm_backward(&dz, normalized, inv_std, norm);
            if let Some(ng) = &mut grads.layers[idx].norm {
                ng.gain = d_gain;
                ng.shift = d_shift;
            }
            dz = new_dz;
        }
        let x = &tape.layer_inputs[idx];
        // ndarray's dot may return Fortran-ordered results for some shape
        // combinations; gradient tensors must stay in standard layout so the
        // flat-slice accessors and the serializer see the declared order.
        grads.layers[idx].weight = standardize_layout(dz.t().dot(x));
        grads.layers[idx].bias = dz.sum_axis(Axis(0));
        dz = dz.dot(&layer.weight);
    }

    Ok((grads, dz))
}

fn standardize_layout(a: Array2<f64>) -> Array2<f64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

fn layer_norm_backward(
    d_y: &Array2<f64>,
    normalized: &Array2<f64>,
    inv_std: &Array1<f64>,
    norm: &LayerNorm,
) -> (Array1<f64>, Array1<f64>, Array2<f64>) {
    let width = d_y.ncols() as f64;
    let d_gain = (d_y * normalized).sum_axis(Axis(0));
    let d_shift = d_y.sum_axis(Axis(0));

    let h = d_y * &norm.gain;
    let mut dz = Array2::zeros(d_y.raw_dim());
    for (((h_row, n_row), mut dz_row), &s) in h
        .rows()
        .into_iter()
        .zip(normalized.rows())
        .zip(dz.rows_mut())
        .zip(inv_std.iter())
    {
        let mean_h: f64 = h_row.sum() / width;
        let mean_hn: f64 = h_row
            .iter()
            .zip(n_row.iter())
            .map(|(hv, nv)| hv * nv)
            .sum::<f64>()
            / width;
        for ((dzv, &hv), &nv) in dz_row.iter_mut().zip(h_row.iter()).zip(n_row.iter()) {
            *dzv = s * (hv - mean_h - nv * mean_hn);
        }
    }
    (d_gain, d_shift, dz)
}

/// Adam optimizer state: first/second moments shaped like the parameters,
/// plus the step count and hyperparameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: NetGradients,
    v: NetGradients,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &NetworkParams, lr: f64) -> Self {
        AdamState {
            m: NetGradients::zeros_like(params),
            v: NetGradients::zeros_like(params),
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One Adam update with bias correction. Fails with
/// [`Error::NonFiniteGradient`] before touching the parameters if any
/// gradient entry is NaN or infinite.
pub fn adam_step(
    params: &mut NetworkParams,
    grads: &NetGradients,
    state: &mut AdamState,
) -> Result<()> {
    if !grads.all_finite() {
        return Err(Error::NonFiniteGradient {
            iteration: state.step as usize,
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, lr, eps) = (state.beta1, state.beta2, state.lr, state.eps);

    let mut p_slices = params.tensor_slices_mut();
    let g_slices = grads.slices();
    let mut m_slices = state.m.slices_mut();
    let mut v_slices = state.v.slices_mut();
    debug_assert_eq!(p_slices.len(), g_slices.len());

    for t_idx in 0..p_slices.len() {
        let p = &mut p_slices[t_idx];
        let g = g_slices[t_idx];
        let m = &mut m_slices[t_idx];
        let v = &mut v_slices[t_idx];
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

// --- parameter container -------------------------------------------------

const PARAMS_MAGIC: &[u8; 4] = b"FMCA";
const PARAMS_VERSION: u32 = 1;

/// Writes the versioned parameter container: magic, version, layer dims and
/// activation tag, then all values as 64-bit little-endian floats in the
/// declared layer order.
pub fn write_params<W: Write>(w: &mut W, params: &NetworkParams) -> Result<()> {
    w.write_all(PARAMS_MAGIC)?;
    w.write_all(&PARAMS_VERSION.to_le_bytes())?;
    let act: u8 = match params.activation {
        Activation::Tanh => 0,
        Activation::Relu => 1,
    };
    w.write_all(&[act])?;
    w.write_all(&(params.layers.len() as u32).to_le_bytes())?;
    for layer in &params.layers {
        w.write_all(&[layer.norm.is_some() as u8])?;
        w.write_all(&(layer.in_dim() as u32).to_le_bytes())?;
        w.write_all(&(layer.out_dim() as u32).to_le_bytes())?;
    }
    for layer in &params.layers {
        write_f64s(w, layer.weight.as_slice().expect("standard layout"))?;
        write_f64s(w, layer.bias.as_slice().expect("standard layout"))?;
        if let Some(norm) = &layer.norm {
            write_f64s(w, norm.gain.as_slice().expect("standard layout"))?;
            write_f64s(w, norm.shift.as_slice().expect("standard layout"))?;
        }
    }
    Ok(())
}

pub fn read_params<R: Read>(r: &mut R) -> Result<NetworkParams> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != PARAMS_MAGIC {
        return Err(Error::BadContainer {
            reason: format!("bad params magic {magic:?}"),
        });
    }
    let version = read_u32(r)?;
    if version != PARAMS_VERSION {
        return Err(Error::BadContainer {
            reason: format!("unsupported params version {version}"),
        });
    }
    let mut act = [0u8; 1];
    r.read_exact(&mut act)?;
    let activation = match act[0] {
        0 => Activation::Tanh,
        1 => Activation::Relu,
        other => {
            return Err(Error::BadContainer {
                reason: format!("unknown activation tag {other}"),
            })
        }
    };
    let n_layers = read_u32(r)? as usize;
    if n_layers == 0 || n_layers > 1024 {
        return Err(Error::BadContainer {
            reason: format!("implausible layer count {n_layers}"),
        });
    }
    let mut shapes = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let mut has_norm = [0u8; 1];
        r.read_exact(&mut has_norm)?;
        let in_dim = read_u32(r)? as usize;
        let out_dim = read_u32(r)? as usize;
        shapes.push((has_norm[0] != 0, in_dim, out_dim));
    }
    for pair in shapes.windows(2) {
        if pair[0].2 != pair[1].1 {
            return Err(Error::BadContainer {
                reason: format!(
                    "layer dimensions do not chain: {} outputs feed {} inputs",
                    pair[0].2, pair[1].1
                ),
            });
        }
    }
    let mut layers = Vec::with_capacity(n_layers);
    for (has_norm, in_dim, out_dim) in shapes {
        let w = read_f64s(r, in_dim * out_dim)?;
        let weight = Array2::from_shape_vec((out_dim, in_dim), w)
            .map_err(|e| Error::BadContainer {
                reason: e.to_string(),
            })?;
        let bias = Array1::from(read_f64s(r, out_dim)?);
        let norm = if has_norm {
            let gain = Array1::from(read_f64s(r, out_dim)?);
            let shift = Array1::from(read_f64s(r, out_dim)?);
            Some(LayerNorm { gain, shift })
        } else {
            None
        };
        layers.push(Layer { weight, bias, norm });
    }
    let params = NetworkParams { layers, activation };
    if params
        .tensor_slices()
        .iter()
        .any(|t| t.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::BadContainer {
            reason: "container holds non-finite parameter values".into(),
        });
    }
    Ok(params)
}

fn write_f64s<W: Write>(w: &mut W, vals: &[f64]) -> std::io::Result<()> {
    for v in vals {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; count * 8];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}
