//! Parameter container and forward pass: encoder → self-expression layer →
//! decoder, plus the classifier head that produces soft assignments.

use crate::error::{PsscError, Result};
use crate::linalg::{softmax_rows, Mat, SeededRng};

/// One fully-connected layer: out = W·in + b.
#[derive(Debug, Clone)]
pub struct LayerParams {
    pub w: Mat,
    pub b: Vec<f64>,
}

impl LayerParams {
    pub fn zeros(out_dim: usize, in_dim: usize) -> LayerParams {
        LayerParams {
            w: Mat::zeros(out_dim, in_dim),
            b: vec![0.0; out_dim],
        }
    }

    /// Apply to a batch of column vectors.
    pub fn apply(&self, x: &Mat) -> Mat {
        let mut out = self.w.matmul(x);
        for i in 0..out.rows() {
            for j in 0..out.cols() {
                out.add_at(i, j, self.b[i]);
            }
        }
        out
    }
}

/// All trainable parameters: encoder and decoder stacks, self-expression
/// coefficients C (zero diagonal at all times), and the classifier head.
#[derive(Debug, Clone)]
pub struct PsscParams {
    pub encoder: Vec<LayerParams>,
    pub decoder: Vec<LayerParams>,
    pub c: Mat,
    pub classifier: LayerParams,
}

/// Gradients share the exact shape of the parameters.
pub type Grads = PsscParams;

impl PsscParams {
    pub fn zeros_like(&self) -> PsscParams {
        PsscParams {
            encoder: self
                .encoder
                .iter()
                .map(|l| LayerParams::zeros(l.w.rows(), l.w.cols()))
                .collect(),
            decoder: self
                .decoder
                .iter()
                .map(|l| LayerParams::zeros(l.w.rows(), l.w.cols()))
                .collect(),
            c: Mat::zeros(self.c.rows(), self.c.cols()),
            classifier: LayerParams::zeros(self.classifier.w.rows(), self.classifier.w.cols()),
        }
    }

    pub fn n(&self) -> usize {
        self.c.rows()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.last().map(|l| l.w.rows()).unwrap_or(0)
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.first().map(|l| l.w.cols()).unwrap_or(0)
    }

    pub fn num_clusters(&self) -> usize {
        self.classifier.w.rows()
    }

    /// Encoder widths including the input dimension.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim()];
        w.extend(self.encoder.iter().map(|l| l.w.rows()));
        w
    }

    pub fn zero_c_diagonal(&mut self) {
        for i in 0..self.c.rows() {
            self.c.set(i, i, 0.0);
        }
    }

    pub fn max_abs_c_diagonal(&self) -> f64 {
        (0..self.c.rows()).fold(0.0f64, |m, i| m.max(self.c.get(i, i).abs()))
    }

    /// Visit every scalar coordinate in a fixed order, in lockstep across up
    /// to three same-shaped companions (gradients, Adam moments).
    pub fn visit_with3(
        &mut self,
        a: &PsscParams,
        b: &mut PsscParams,
        c: &mut PsscParams,
        mut f: impl FnMut(&mut f64, f64, &mut f64, &mut f64),
    ) {
        for (idx, layer) in self.encoder.iter_mut().enumerate() {
            visit_layer(layer, &a.encoder[idx], &mut b.encoder[idx], &mut c.encoder[idx], &mut f);
        }
        for (idx, layer) in self.decoder.iter_mut().enumerate() {
            visit_layer(layer, &a.decoder[idx], &mut b.decoder[idx], &mut c.decoder[idx], &mut f);
        }
        for (p, (&g, (m, v))) in self.c.data_mut().iter_mut().zip(
            a.c.data()
                .iter()
                .zip(b.c.data_mut().iter_mut().zip(c.c.data_mut().iter_mut())),
        ) {
            f(p, g, m, v);
        }
        visit_layer(
            &mut self.classifier,
            &a.classifier,
            &mut b.classifier,
            &mut c.classifier,
            &mut f,
        );
    }

    /// All coordinates in the fixed visit order (encoder w/b per layer,
    /// decoder, C, classifier). The order matches `flat_mut` and `visit_with3`.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.for_each(|v| out.push(v));
        out
    }

    pub fn flat_mut(&mut self) -> Vec<&mut f64> {
        let mut out: Vec<&mut f64> = Vec::new();
        for layer in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            out.extend(layer.w.data_mut().iter_mut());
            out.extend(layer.b.iter_mut());
        }
        out.extend(self.c.data_mut().iter_mut());
        out.extend(self.classifier.w.data_mut().iter_mut());
        out.extend(self.classifier.b.iter_mut());
        out
    }

    pub fn for_each(&self, mut f: impl FnMut(f64)) {
        for layer in self.encoder.iter().chain(self.decoder.iter()) {
            layer.w.data().iter().for_each(|&v| f(v));
            layer.b.iter().for_each(|&v| f(v));
        }
        self.c.data().iter().for_each(|&v| f(v));
        self.classifier.w.data().iter().for_each(|&v| f(v));
        self.classifier.b.iter().for_each(|&v| f(v));
    }

    pub fn is_finite(&self) -> bool {
        let mut ok = true;
        self.for_each(|v| ok &= v.is_finite());
        ok
    }
}

fn visit_layer(
    p: &mut LayerParams,
    g: &LayerParams,
    m: &mut LayerParams,
    v: &mut LayerParams,
    f: &mut impl FnMut(&mut f64, f64, &mut f64, &mut f64),
) {
    for (pw, (&gw, (mw, vw))) in p.w.data_mut().iter_mut().zip(
        g.w.data()
            .iter()
            .zip(m.w.data_mut().iter_mut().zip(v.w.data_mut().iter_mut())),
    ) {
        f(pw, gw, mw, vw);
    }
    for (pb, (&gb, (mb, vb))) in p
        .b
        .iter_mut()
        .zip(g.b.iter().zip(m.b.iter_mut().zip(v.b.iter_mut())))
    {
        f(pb, gb, mb, vb);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    /// Decoder reads Z directly; the self-expression layer is bypassed.
    Pretrain,
    /// Decoder reads ZC.
    Full,
}

/// Activations captured during a forward pass, enough for backprop.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub mode: ForwardMode,
    /// Latent codes, latent×n.
    pub z: Mat,
    /// Self-expressed codes ZC (equal to Z in pretrain mode), latent×n.
    pub zc: Mat,
    /// Reconstruction, d×n.
    pub xhat: Mat,
    /// Classifier softmax output, n×K, one probability row per sample.
    pub f: Mat,
    /// Classifier pre-softmax logits, K×n.
    pub logits: Mat,
    /// Input to each encoder layer (enc_inputs[0] = X).
    pub enc_inputs: Vec<Mat>,
    /// Pre-activation of each encoder layer.
    pub enc_pre: Vec<Mat>,
    /// Input to each decoder layer (dec_inputs[0] = ZC or Z).
    pub dec_inputs: Vec<Mat>,
    pub dec_pre: Vec<Mat>,
}

/// Pseudo-label snapshot: class index, confidence, and the confident mask.
#[derive(Debug, Clone)]
pub struct PseudoLabels {
    pub y: Vec<usize>,
    pub p: Vec<f64>,
    pub v: Vec<bool>,
    pub thres: f64,
}

impl PseudoLabels {
    /// No confident samples; usable before any classifier output exists.
    pub fn empty(n: usize, thres: f64) -> PseudoLabels {
        PseudoLabels {
            y: vec![0; n],
            p: vec![0.0; n],
            v: vec![false; n],
            thres,
        }
    }

    pub fn confident_count(&self) -> usize {
        self.v.iter().filter(|&&v| v).count()
    }
}

/// Scaled uniform fan-in weights, zero biases, C ~ N(0, 1e-4) with the
/// diagonal zeroed.
pub fn init_params(
    layer_widths: &[usize],
    n: usize,
    num_clusters: usize,
    rng: &mut SeededRng,
) -> PsscParams {
    assert!(layer_widths.len() >= 2, "need at least input and latent widths");
    assert!(n >= 2 && num_clusters >= 2);

    let init_layer = |out_dim: usize, in_dim: usize, rng: &mut SeededRng| {
        let bound = (1.0 / in_dim as f64).sqrt();
        LayerParams {
            w: Mat::from_fn(out_dim, in_dim, |_, _| rng.uniform(-bound, bound)),
            b: vec![0.0; out_dim],
        }
    };

    let mut encoder = Vec::new();
    for w in layer_widths.windows(2) {
        encoder.push(init_layer(w[1], w[0], rng));
    }
    let mut decoder = Vec::new();
    let mut reversed: Vec<usize> = layer_widths.to_vec();
    reversed.reverse();
    for w in reversed.windows(2) {
        decoder.push(init_layer(w[1], w[0], rng));
    }
    let latent = *layer_widths.last().unwrap();
    let classifier = init_layer(num_clusters, latent, rng);

    let mut c = Mat::from_fn(n, n, |_, _| 1e-4 * rng.normal());
    for i in 0..n {
        c.set(i, i, 0.0);
    }

    PsscParams {
        encoder,
        decoder,
        c,
        classifier,
    }
}

fn relu(m: &Mat) -> Mat {
    m.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// Encoder → (self-expression) → decoder forward pass with ReLU on hidden
/// layers and linear final encoder/decoder layers. The classifier reads Z.
pub fn forward(params: &PsscParams, x: &Mat, mode: ForwardMode) -> Result<ForwardCache> {
    if x.rows() != params.input_dim() {
        return Err(PsscError::contract(format!(
            "forward: X has {} rows but encoder expects {}",
            x.rows(),
            params.input_dim()
        )));
    }
    if mode == ForwardMode::Full && x.cols() != params.n() {
        return Err(PsscError::contract(format!(
            "forward: X has {} columns but C is {}×{}",
            x.cols(),
            params.n(),
            params.n()
        )));
    }

    let n_enc = params.encoder.len();
    let mut enc_inputs = Vec::with_capacity(n_enc);
    let mut enc_pre = Vec::with_capacity(n_enc);
    let mut act = x.clone();
    for (idx, layer) in params.encoder.iter().enumerate() {
        enc_inputs.push(act.clone());
        let pre = layer.apply(&act);
        act = if idx + 1 == n_enc { pre.clone() } else { relu(&pre) };
        enc_pre.push(pre);
    }
    let z = act;

    let zc = match mode {
        ForwardMode::Pretrain => z.clone(),
        ForwardMode::Full => z.matmul(&params.c),
    };

    let n_dec = params.decoder.len();
    let mut dec_inputs = Vec::with_capacity(n_dec);
    let mut dec_pre = Vec::with_capacity(n_dec);
    let mut act = zc.clone();
    for (idx, layer) in params.decoder.iter().enumerate() {
        dec_inputs.push(act.clone());
        let pre = layer.apply(&act);
        act = if idx + 1 == n_dec { pre.clone() } else { relu(&pre) };
        dec_pre.push(pre);
    }
    let xhat = act;

    let logits = params.classifier.apply(&z);
    let f = softmax_rows(&logits.transpose());

    Ok(ForwardCache {
        mode,
        z,
        zc,
        xhat,
        f,
        logits,
        enc_inputs,
        enc_pre,
        dec_inputs,
        dec_pre,
    })
}

/// Argmax pseudo-labels with lowest-index tie-break and threshold mask.
pub fn pseudo_labels(f: &Mat, thres: f64) -> PseudoLabels {
    let n = f.rows();
    let mut y = Vec::with_capacity(n);
    let mut p = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for i in 0..n {
        let row = f.row(i);
        let mut best = 0usize;
        for (k, &val) in row.iter().enumerate() {
            if val > row[best] {
                best = k;
            }
        }
        y.push(best);
        p.push(row[best]);
        v.push(row[best] >= thres);
    }
    PseudoLabels { y, p, v, thres }
}
