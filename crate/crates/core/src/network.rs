//! Alignment heads: GELU multilayer perceptrons with a hand-written
//! reverse pass.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

pub const MLP_MAGIC: [u8; 4] = *b"MLP1";

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `d_in x d_out`
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Layer {
    fn zeros_like(&self) -> Self {
        Self {
            weight: DMatrix::zeros(self.weight.nrows(), self.weight.ncols()),
            bias: DVector::zeros(self.bias.len()),
        }
    }
}

/// Parameters of one head: GELU on hidden layers, identity on the output.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
    pub dropout_p: f64,
}

/// Gradients laid out exactly like [`MlpParams::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<Layer>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Everything the reverse pass needs from one forward call.
#[derive(Debug, Clone)]
pub struct ForwardTape {
    /// Input to every layer (after activation and dropout of the previous one).
    inputs: Vec<DMatrix<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<DMatrix<f64>>,
    /// Inverted-dropout multipliers per hidden layer, `None` when off.
    masks: Vec<Option<DMatrix<f64>>>,
}

const INV_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x * INV_SQRT_2))
}

fn gelu_prime(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x * INV_SQRT_2)) + x * INV_SQRT_2PI * (-0.5 * x * x).exp()
}

impl MlpParams {
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].weight.nrows()];
        dims.extend(self.layers.iter().map(|l| l.weight.ncols()));
        dims
    }

    pub fn d_in(&self) -> usize {
        self.layers[0].weight.nrows()
    }

    pub fn d_out(&self) -> usize {
        self.layers.last().unwrap().weight.ncols()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn zero_grads(&self) -> MlpGrads {
        MlpGrads { layers: self.layers.iter().map(Layer::zeros_like).collect() }
    }

    /// Weight and bias buffers in a fixed order (storage order within each).
    pub fn slices(&self) -> impl Iterator<Item = &[f64]> {
        self.layers.iter().flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
    }

    pub fn slices_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.slices().flatten().copied().collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count());
        let mut rest = flat;
        for s in self.slices_mut() {
            let (head, tail) = rest.split_at(s.len());
            s.copy_from_slice(head);
            rest = tail;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.slices().flatten().all(|v| v.is_finite())
    }
}

impl MlpGrads {
    pub fn slices(&self) -> impl Iterator<Item = &[f64]> {
        self.layers.iter().flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.slices().flatten().copied().collect()
    }

    pub fn add_assign(&mut self, other: &MlpGrads) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight += &b.weight;
            a.bias += &b.bias;
        }
    }
}

/// He-initialized weights `N(0, 2 / fan_in)`, zero biases.
pub fn init_mlp(layer_dims: &[usize], dropout_p: f64, seed: u64) -> Result<MlpParams> {
    if layer_dims.len() < 2 || layer_dims.contains(&0) {
        return Err(Error::InvalidDims(layer_dims.to_vec()));
    }
    if !(0.0..1.0).contains(&dropout_p) {
        return Err(Error::InvalidConfig(format!("dropout {dropout_p} not in [0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = layer_dims
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).unwrap();
            let values: Vec<f64> = (0..fan_in * fan_out).map(|_| normal.sample(&mut rng)).collect();
            Layer {
                weight: DMatrix::from_row_slice(fan_in, fan_out, &values),
                bias: DVector::zeros(fan_out),
            }
        })
        .collect();
    Ok(MlpParams { layers, dropout_p })
}

fn affine(x: &DMatrix<f64>, layer: &Layer) -> DMatrix<f64> {
    let mut h = x * &layer.weight;
    for (c, mut col) in h.column_iter_mut().enumerate() {
        col.add_scalar_mut(layer.bias[c]);
    }
    h
}

pub fn forward<R: Rng + ?Sized>(
    p: &MlpParams,
    batch: &DMatrix<f64>,
    mode: Mode,
    rng: &mut R,
) -> Result<(DMatrix<f64>, ForwardTape)> {
    if batch.ncols() != p.d_in() {
        return Err(Error::ShapeMismatch(format!(
            "batch has {} columns, head expects {}",
            batch.ncols(),
            p.d_in()
        )));
    }
    let depth = p.layers.len();
    let mut tape = ForwardTape {
        inputs: Vec::with_capacity(depth),
        pre: Vec::with_capacity(depth - 1),
        masks: Vec::with_capacity(depth - 1),
    };
    let mut x = batch.clone();
    for (l, layer) in p.layers.iter().enumerate() {
        let h = affine(&x, layer);
        tape.inputs.push(x);
        if l + 1 == depth {
            return Ok((h, tape));
        }
        let mut a = h.map(gelu);
        let mask = (mode == Mode::Train && p.dropout_p > 0.0).then(|| {
            let keep = 1.0 - p.dropout_p;
            // Row-major draws so the mask does not depend on storage order.
            let draws: Vec<f64> = (0..a.len())
                .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                .collect();
            DMatrix::from_row_slice(a.nrows(), a.ncols(), &draws)
        });
        if let Some(m) = &mask {
            a.component_mul_assign(m);
        }
        tape.pre.push(h);
        tape.masks.push(mask);
        x = a;
    }
    unreachable!("at least one layer")
}

/// Eval-mode forward pass without a tape.
pub fn predict(p: &MlpParams, batch: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if batch.ncols() != p.d_in() {
        return Err(Error::ShapeMismatch(format!(
            "batch has {} columns, head expects {}",
            batch.ncols(),
            p.d_in()
        )));
    }
    let depth = p.layers.len();
    let mut x = batch.clone();
    for (l, layer) in p.layers.iter().enumerate() {
        x = affine(&x, layer);
        if l + 1 < depth {
            x.apply(|v| *v = gelu(*v));
        }
    }
    Ok(x)
}

/// Reverse pass for `<upstream, forward(batch)>`.
pub fn backward(
    p: &MlpParams,
    tape: &ForwardTape,
    upstream: &DMatrix<f64>,
) -> Result<(MlpGrads, DMatrix<f64>)> {
    let depth = p.layers.len();
    if tape.inputs.len() != depth || tape.pre.len() + 1 != depth {
        return Err(Error::TapeMismatch(format!(
            "tape for {} layers, params have {depth}",
            tape.inputs.len()
        )));
    }
    let batch = tape.inputs[0].nrows();
    if upstream.shape() != (batch, p.d_out()) {
        return Err(Error::TapeMismatch(format!(
            "upstream {:?}, expected ({batch}, {})",
            upstream.shape(),
            p.d_out()
        )));
    }
    for (l, layer) in p.layers.iter().enumerate() {
        if tape.inputs[l].ncols() != layer.weight.nrows() {
            return Err(Error::TapeMismatch(format!("layer {l} input width differs")));
        }
    }

    let mut grads = Vec::with_capacity(depth);
    let mut g = upstream.clone();
    for l in (0..depth).rev() {
        let layer = &p.layers[l];
        let weight = tape.inputs[l].tr_mul(&g);
        let bias = DVector::from_iterator(g.ncols(), g.column_iter().map(|c| c.sum()));
        let mut g_in = &g * layer.weight.transpose();
        if l > 0 {
            if let Some(mask) = &tape.masks[l - 1] {
                g_in.component_mul_assign(mask);
            }
            g_in.zip_apply(&tape.pre[l - 1], |gv, pre| *gv *= gelu_prime(pre));
        }
        grads.push(Layer { weight, bias });
        g = g_in;
    }
    grads.reverse();
    Ok((MlpGrads { layers: grads }, g))
}

pub fn encode_mlp(p: &MlpParams, out: &mut Vec<u8>) {
    out.extend_from_slice(&MLP_MAGIC);
    out.extend_from_slice(&(p.layers.len() as u32).to_le_bytes());
    for d in p.dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&p.dropout_p.to_le_bytes());
    for layer in &p.layers {
        for r in 0..layer.weight.nrows() {
            for c in 0..layer.weight.ncols() {
                out.extend_from_slice(&layer.weight[(r, c)].to_le_bytes());
            }
        }
        for b in layer.bias.iter() {
            out.extend_from_slice(&b.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::TruncatedFile {
                expected: (self.pos + n) as u64,
                found: self.bytes.len() as u64,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Decodes one MLP1 record starting at `*pos`, advancing it.
pub fn decode_mlp(bytes: &[u8], pos: &mut usize) -> Result<MlpParams> {
    let mut r = Reader { bytes, pos: *pos };
    let magic = r.take(4).map_err(|_| Error::BadMagic {
        expected: MLP_MAGIC,
        found: bytes[(*pos).min(bytes.len())..].to_vec(),
    })?;
    if magic != MLP_MAGIC {
        return Err(Error::BadMagic { expected: MLP_MAGIC, found: magic.to_vec() });
    }
    let n_layers = r.u32()? as usize;
    if n_layers == 0 || n_layers > 1024 {
        return Err(Error::Unsupported { what: "MLP1 layer count", value: n_layers as u64 });
    }
    let dims = (0..=n_layers).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
    if dims.contains(&0) {
        return Err(Error::InvalidDims(dims));
    }
    let dropout_p = r.f64()?;
    let mut layers = Vec::with_capacity(n_layers);
    for w in dims.windows(2) {
        let values = (0..w[0] * w[1]).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let bias = (0..w[1]).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        layers.push(Layer {
            weight: DMatrix::from_row_slice(w[0], w[1], &values),
            bias: DVector::from_vec(bias),
        });
    }
    *pos = r.pos;
    let params = MlpParams { layers, dropout_p };
    if !params.is_finite() {
        return Err(Error::NonFinite { index: params.to_flat().iter().position(|v| !v.is_finite()).unwrap() });
    }
    Ok(params)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub step: f64,
    pub tolerance: f64,
    /// Coordinates checked; all of them when the vector is shorter.
    pub samples: usize,
    /// Denominator floor for the relative error of near-zero derivatives.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { step: 1e-5, tolerance: 1e-6, samples: 200, floor: 1e-6, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Coordinate with the largest error.
    pub worst_index: usize,
    pub checked: usize,
    pub passed: bool,
}

/// Compares `analytic` with central finite differences of `loss` at `x`.
///
/// Relative error per coordinate is `|a - n| / max(|a|, |n|, floor)`.
pub fn finite_diff_check(
    x: &[f64],
    analytic: &[f64],
    mut loss: impl FnMut(&[f64]) -> f64,
    cfg: &GradCheckConfig,
) -> GradCheckReport {
    assert_eq!(x.len(), analytic.len());
    let coords: Vec<usize> = if cfg.samples >= x.len() {
        (0..x.len()).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut c = rand::seq::index::sample(&mut rng, x.len(), cfg.samples).into_vec();
        c.sort_unstable();
        c
    };
    let mut probe = x.to_vec();
    let mut worst = (0.0f64, 0usize);
    for &i in &coords {
        probe[i] = x[i] + cfg.step;
        let plus = loss(&probe);
        probe[i] = x[i] - cfg.step;
        let minus = loss(&probe);
        probe[i] = x[i];
        let numeric = (plus - minus) / (2.0 * cfg.step);
        let err = (analytic[i] - numeric).abs()
            / analytic[i].abs().max(numeric.abs()).max(cfg.floor);
        if !(err <= worst.0) {
            worst = (err, i);
        }
    }
    GradCheckReport {
        max_relative_error: worst.0,
        worst_index: worst.1,
        checked: coords.len(),
        passed: worst.0 < cfg.tolerance,
    }
}
