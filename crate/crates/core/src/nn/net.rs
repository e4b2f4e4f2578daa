use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    kld_logit_grad, kld_unchecked, Checkpoint, NamedArray, Parameters, PredictionVector,
    TensorMut, TensorRef, CHECKPOINT_VERSION,
};
use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::seed;

/// What each walk step feeds into the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFeatures {
    /// Raw vertex coordinates.
    Coordinates,
    /// Displacement from the previous walk vertex (zero at the first step).
    StepDeltas,
}

impl InputFeatures {
    pub fn name(self) -> &'static str {
        match self {
            InputFeatures::Coordinates => "coordinates",
            InputFeatures::StepDeltas => "step-deltas",
        }
    }
}

impl fmt::Display for InputFeatures {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InputFeatures {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coordinates" => Ok(InputFeatures::Coordinates),
            "step-deltas" => Ok(InputFeatures::StepDeltas),
            _ => Err(Error::Config(format!("unknown input features {s:?}"))),
        }
    }
}

/// Layer widths. The lift maps 3 -> `lift` -> `hidden`; every recurrent
/// layer has width `hidden`; the head maps `hidden` -> `classes`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetDims {
    /// Width of the first lift layer; `None` feeds features straight into
    /// the recurrent stack.
    pub lift: Option<usize>,
    pub hidden: usize,
    pub layers: usize,
    pub classes: usize,
    pub features: InputFeatures,
}

impl NetDims {
    /// Full-size architecture: 3 -> 128 -> 256 lift, two recurrent layers
    /// of 256.
    pub fn reference(classes: usize) -> Self {
        NetDims {
            lift: Some(128),
            hidden: 256,
            layers: 2,
            classes,
            features: InputFeatures::Coordinates,
        }
    }

    pub fn rnn_input(&self) -> usize {
        if self.lift.is_some() {
            self.hidden
        } else {
            3
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.layers == 0 || self.classes == 0 || self.lift == Some(0) {
            return Err(Error::Config(format!("invalid network dims {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `out x in`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(out: usize, inp: usize) -> Self {
        Dense {
            weight: Array2::zeros((out, inp)),
            bias: Array1::zeros(out),
        }
    }

    fn glorot<R: Rng>(out: usize, inp: usize, rng: &mut R) -> Self {
        let mut d = Dense::zeros(out, inp);
        glorot_fill(&mut d.weight, out, inp, rng);
        d
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut y = x.dot(&self.weight.t());
        y += &self.bias;
        y
    }
}

fn glorot_fill<R: Rng>(w: &mut Array2<f64>, fan_out: usize, fan_in: usize, rng: &mut R) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    w.mapv_inplace(|_| rng.random_range(-limit..limit));
}

/// One gated recurrent layer. Rows of the stacked matrices are ordered
/// update gate, reset gate, candidate:
///
/// ```text
/// z  = sigmoid(Wz x + Uz h + bz)
/// r  = sigmoid(Wr x + Ur h + br)
/// n  = tanh(Wn x + Un (r * h) + bn)
/// h' = z * h + (1 - z) * n
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct GruLayer {
    /// `3H x in`.
    pub input: Array2<f64>,
    /// `3H x H`.
    pub recurrent: Array2<f64>,
    pub bias: Array1<f64>,
}

impl GruLayer {
    pub fn zeros(hidden: usize, inp: usize) -> Self {
        GruLayer {
            input: Array2::zeros((3 * hidden, inp)),
            recurrent: Array2::zeros((3 * hidden, hidden)),
            bias: Array1::zeros(3 * hidden),
        }
    }

    fn hidden(&self) -> usize {
        self.recurrent.ncols()
    }

    fn forward(&self, x: ArrayView2<f64>, batch: usize, len: usize) -> LayerTrace {
        let hd = self.hidden();
        let mut gates = x.dot(&self.input.t());
        gates += &self.bias;
        let mut hidden = Array2::zeros(((len + 1) * batch, hd));
        let mut reset_hidden = Array2::zeros((len * batch, hd));
        let u_zr = self.recurrent.slice(s![..2 * hd, ..]);
        let u_n = self.recurrent.slice(s![2 * hd.., ..]);

        for t in 0..len {
            let rows = t * batch..(t + 1) * batch;
            let (done, mut rest) = hidden.view_mut().split_at(Axis(0), (t + 1) * batch);
            let hp = done.slice(s![t * batch.., ..]);
            let mut g = gates.slice_mut(s![rows.clone(), ..]);
            {
                let mut zr = g.slice_mut(s![.., ..2 * hd]);
                general_mat_mul(1.0, &hp, &u_zr.t(), 1.0, &mut zr);
                zr.mapv_inplace(sigmoid);
            }
            let mut rh = reset_hidden.slice_mut(s![rows, ..]);
            Zip::from(&mut rh)
                .and(g.slice(s![.., hd..2 * hd]))
                .and(&hp)
                .for_each(|o, &r, &h| *o = r * h);
            {
                let mut cand = g.slice_mut(s![.., 2 * hd..]);
                general_mat_mul(1.0, &rh, &u_n.t(), 1.0, &mut cand);
                cand.mapv_inplace(f64::tanh);
            }
            let mut next = rest.slice_mut(s![..batch, ..]);
            Zip::from(&mut next)
                .and(g.slice(s![.., ..hd]))
                .and(g.slice(s![.., 2 * hd..]))
                .and(&hp)
                .for_each(|o, &z, &n, &h| *o = z * h + (1.0 - z) * n);
        }
        LayerTrace {
            gates,
            hidden,
            reset_hidden,
        }
    }

    /// Back-propagates `dh_ext` (gradients on every step's output) through
    /// time. Returns the gradient on the layer input.
    fn backward(
        &self,
        x: ArrayView2<f64>,
        trace: &LayerTrace,
        dh_ext: &Array2<f64>,
        batch: usize,
        len: usize,
        grads: Option<&mut GruLayer>,
    ) -> Array2<f64> {
        let hd = self.hidden();
        let u_zr = self.recurrent.slice(s![..2 * hd, ..]);
        let u_n = self.recurrent.slice(s![2 * hd.., ..]);
        let mut da = Array2::zeros((len * batch, 3 * hd));
        let mut carry = Array2::<f64>::zeros((batch, hd));
        let mut dh = Array2::<f64>::zeros((batch, hd));
        let mut drh = Array2::<f64>::zeros((batch, hd));

        for t in (0..len).rev() {
            let rows = t * batch..(t + 1) * batch;
            Zip::from(&mut dh)
                .and(dh_ext.slice(s![rows.clone(), ..]))
                .and(&carry)
                .for_each(|o, &e, &c| *o = e + c);
            let g = trace.gates.slice(s![rows.clone(), ..]);
            let hp = trace.hidden.slice(s![rows.clone(), ..]);
            let (z, r, n) = (
                g.slice(s![.., ..hd]),
                g.slice(s![.., hd..2 * hd]),
                g.slice(s![.., 2 * hd..]),
            );
            let mut dat = da.slice_mut(s![rows, ..]);
            let (mut dazr, mut dan) = dat.view_mut().split_at(Axis(1), 2 * hd);
            Zip::from(&mut dan)
                .and(&dh)
                .and(z)
                .and(n)
                .for_each(|o, &d, &z, &n| *o = d * (1.0 - z) * (1.0 - n * n));
            general_mat_mul(1.0, &dan, &u_n, 0.0, &mut drh);
            Zip::from(&mut carry)
                .and(&dh)
                .and(z)
                .and(&drh)
                .and(r)
                .for_each(|c, &d, &z, &q, &r| *c = d * z + q * r);
            {
                let (mut daz, mut dar) = dazr.view_mut().split_at(Axis(1), hd);
                Zip::from(&mut daz)
                    .and(&dh)
                    .and(hp)
                    .and(n)
                    .and(z)
                    .for_each(|o, &d, &h, &n, &z| *o = d * (h - n) * z * (1.0 - z));
                Zip::from(&mut dar)
                    .and(&drh)
                    .and(hp)
                    .and(r)
                    .for_each(|o, &q, &h, &r| *o = q * h * r * (1.0 - r));
            }
            general_mat_mul(1.0, &dazr, &u_zr, 1.0, &mut carry);
        }

        if let Some(g) = grads {
            general_mat_mul(1.0, &da.t(), &x, 1.0, &mut g.input);
            g.bias += &da.sum_axis(Axis(0));
            let hprev = trace.hidden.slice(s![..len * batch, ..]);
            general_mat_mul(
                1.0,
                &da.slice(s![.., ..2 * hd]).t(),
                &hprev,
                1.0,
                &mut g.recurrent.slice_mut(s![..2 * hd, ..]),
            );
            general_mat_mul(
                1.0,
                &da.slice(s![.., 2 * hd..]).t(),
                &trace.reset_hidden,
                1.0,
                &mut g.recurrent.slice_mut(s![2 * hd.., ..]),
            );
        }
        da.dot(&self.input)
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Activations of one recurrent layer over a batch of walks. Rows are
/// step-major: row `t * batch + b` holds walk `b` at step `t`.
#[derive(Debug, Clone)]
pub struct LayerTrace {
    /// Post-activation `[z | r | n]`, `(L*B) x 3H`.
    pub gates: Array2<f64>,
    /// Hidden states, `((L+1)*B) x H`; the first `B` rows are the zero
    /// initial state.
    pub hidden: Array2<f64>,
    /// `r * h_prev`, `(L*B) x H`.
    pub reset_hidden: Array2<f64>,
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub batch: usize,
    pub len: usize,
    pub features: Array2<f64>,
    /// Post-ReLU lift activations.
    pub lift: Vec<Array2<f64>>,
    pub layers: Vec<LayerTrace>,
    /// `B x D`.
    pub logits: Array2<f64>,
    /// Softmax of `logits`, `B x D`.
    pub probs: Array2<f64>,
}

impl ForwardTrace {
    pub fn prediction(&self, walk: usize) -> PredictionVector {
        PredictionVector(self.probs.row(walk).to_vec())
    }

    pub fn predictions(&self) -> Vec<PredictionVector> {
        (0..self.batch).map(|b| self.prediction(b)).collect()
    }

    /// Hidden state of layer `layer` after step `t` (0-based) for walk `b`.
    pub fn hidden_state(&self, layer: usize, t: usize, b: usize) -> Vec<f64> {
        self.layers[layer]
            .hidden
            .row((t + 1) * self.batch + b)
            .to_vec()
    }
}

#[derive(Debug, Clone)]
pub struct BackwardOutput {
    /// `scale` times the mean loss over the batch.
    pub loss: f64,
    pub param_grads: Option<WalkNet>,
    /// Gradient with respect to every walk coordinate, per walk.
    pub input_grads: Vec<Vec<Point>>,
}

/// Per-vertex lift, stacked gated recurrent layers, linear head.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkNet {
    pub dims: NetDims,
    /// Empty, or the two lift layers.
    pub lift: Vec<Dense>,
    pub rnn: Vec<GruLayer>,
    pub head: Dense,
}

impl WalkNet {
    /// Glorot-uniform weights and zero biases from `seed`.
    pub fn new(dims: NetDims, seed: u64) -> Result<Self> {
        dims.validate()?;
        let mut rng = seed::rng(seed);
        let mut net = WalkNet::zeros(dims)?;
        let hd = net.dims.hidden;
        for d in &mut net.lift {
            let (o, i) = d.weight.dim();
            *d = Dense::glorot(o, i, &mut rng);
        }
        for layer in &mut net.rnn {
            let inp = layer.input.ncols();
            glorot_fill(&mut layer.input, hd, inp, &mut rng);
            glorot_fill(&mut layer.recurrent, hd, hd, &mut rng);
        }
        let (o, i) = net.head.weight.dim();
        net.head = Dense::glorot(o, i, &mut rng);
        Ok(net)
    }

    /// All weights and biases zero.
    pub fn zeros(dims: NetDims) -> Result<Self> {
        dims.validate()?;
        let lift = match dims.lift {
            Some(w) => vec![Dense::zeros(w, 3), Dense::zeros(dims.hidden, w)],
            None => Vec::new(),
        };
        let rnn = (0..dims.layers)
            .map(|l| {
                let inp = if l == 0 { dims.rnn_input() } else { dims.hidden };
                GruLayer::zeros(dims.hidden, inp)
            })
            .collect();
        let head = Dense::zeros(dims.classes, dims.hidden);
        Ok(WalkNet {
            dims,
            lift,
            rnn,
            head,
        })
    }

    pub fn zeros_like(&self) -> Self {
        WalkNet::zeros(self.dims.clone()).expect("dims already validated")
    }

    pub fn classes(&self) -> usize {
        self.dims.classes
    }

    pub(crate) fn features(&self, walks: &[&[Point]], len: usize) -> Array2<f64> {
        let b = walks.len();
        let mut f = Array2::zeros((len * b, 3));
        for (w, coords) in walks.iter().enumerate() {
            for t in 0..len {
                let v = match self.dims.features {
                    InputFeatures::Coordinates => coords[t],
                    InputFeatures::StepDeltas if t == 0 => [0.0; 3],
                    InputFeatures::StepDeltas => {
                        let (a, p) = (coords[t], coords[t - 1]);
                        [a[0] - p[0], a[1] - p[1], a[2] - p[2]]
                    }
                };
                for k in 0..3 {
                    f[[t * b + w, k]] = v[k];
                }
            }
        }
        f
    }

    /// Runs one walk. Hidden states start at zero.
    pub fn forward(&self, coords: &[Point]) -> Result<ForwardTrace> {
        self.forward_batch(&[coords])
    }

    /// Runs several equal-length walks together.
    pub fn forward_batch(&self, walks: &[&[Point]]) -> Result<ForwardTrace> {
        let batch = walks.len();
        if batch == 0 {
            return Err(Error::EmptyInput("walk batch"));
        }
        let len = walks[0].len();
        if len == 0 {
            return Err(Error::EmptyInput("walk"));
        }
        for w in walks {
            if w.len() != len {
                return Err(Error::dims(format!("walks of length {len}"), w.len()));
            }
            if w.iter().flatten().any(|x| !x.is_finite()) {
                return Err(Error::Config("non-finite walk coordinate".into()));
            }
        }
        let features = self.features(walks, len);

        let mut lift: Vec<Array2<f64>> = Vec::with_capacity(self.lift.len());
        for dense in &self.lift {
            let mut a = dense.forward(lift.last().unwrap_or(&features).view());
            a.mapv_inplace(|v| v.max(0.0));
            lift.push(a);
        }

        let mut layers: Vec<LayerTrace> = Vec::with_capacity(self.rnn.len());
        for (li, layer) in self.rnn.iter().enumerate() {
            let trace = {
                let x = if li == 0 {
                    lift.last().unwrap_or(&features).view()
                } else {
                    layers[li - 1].hidden.slice(s![batch.., ..])
                };
                layer.forward(x, batch, len)
            };
            layers.push(trace);
        }

        let top = layers.last().expect("at least one layer");
        let logits = self
            .head
            .forward(top.hidden.slice(s![len * batch.., ..]));
        let mut probs = logits.clone();
        for mut row in probs.rows_mut() {
            super::softmax_in_place(row.as_slice_mut().expect("standard layout"));
        }
        Ok(ForwardTrace {
            batch,
            len,
            features,
            lift,
            layers,
            logits,
            probs,
        })
    }

    /// Softmax prediction for one walk.
    pub fn predict(&self, coords: &[Point]) -> Result<PredictionVector> {
        Ok(self.forward(coords)?.prediction(0))
    }

    /// Gradients of `scale * mean_b KLD(reference_b, prediction_b)`.
    ///
    /// Cross-entropy is the one-hot special case of the reference. Parameter
    /// gradients are skipped unless `with_params` is set.
    pub fn backward_batch(
        &self,
        trace: &ForwardTrace,
        references: &[&[f64]],
        scale: f64,
        with_params: bool,
    ) -> Result<BackwardOutput> {
        let (batch, len) = (trace.batch, trace.len);
        let d = self.dims.classes;
        if references.len() != batch {
            return Err(Error::dims(format!("{batch} references"), references.len()));
        }
        if trace.probs.ncols() != d || trace.layers.len() != self.rnn.len() {
            return Err(Error::dims("trace from this network", "foreign trace"));
        }
        let per_walk = scale / batch as f64;
        let mut loss = 0.0;
        let mut dlogits = Array2::zeros((batch, d));
        for (b, r) in references.iter().enumerate() {
            if r.len() != d {
                return Err(Error::dims(d, r.len()));
            }
            let p = trace.probs.row(b);
            let p = p.as_slice().expect("standard layout");
            loss += kld_unchecked(r, p);
            let mut row = dlogits.row_mut(b);
            kld_logit_grad(r, p, row.as_slice_mut().expect("standard layout"));
        }
        loss *= per_walk;
        dlogits *= per_walk;

        let mut grads = with_params.then(|| self.zeros_like());
        let top = trace.layers.last().expect("at least one layer");
        if let Some(g) = grads.as_mut() {
            let h_last = top.hidden.slice(s![len * batch.., ..]);
            general_mat_mul(1.0, &dlogits.t(), &h_last, 1.0, &mut g.head.weight);
            g.head.bias += &dlogits.sum_axis(Axis(0));
        }
        let mut dh = Array2::zeros((len * batch, self.dims.hidden));
        dh.slice_mut(s![(len - 1) * batch.., ..])
            .assign(&dlogits.dot(&self.head.weight));

        for li in (0..self.rnn.len()).rev() {
            let x = if li == 0 {
                trace.lift.last().unwrap_or(&trace.features).view()
            } else {
                trace.layers[li - 1].hidden.slice(s![batch.., ..])
            };
            let g = grads.as_mut().map(|g| &mut g.rnn[li]);
            dh = self.rnn[li].backward(x, &trace.layers[li], &dh, batch, len, g);
        }

        for k in (0..self.lift.len()).rev() {
            dh.zip_mut_with(&trace.lift[k], |g, &a| {
                if a <= 0.0 {
                    *g = 0.0
                }
            });
            if let Some(g) = grads.as_mut() {
                let x = if k == 0 {
                    trace.features.view()
                } else {
                    trace.lift[k - 1].view()
                };
                general_mat_mul(1.0, &dh.t(), &x, 1.0, &mut g.lift[k].weight);
                g.lift[k].bias += &dh.sum_axis(Axis(0));
            }
            dh = dh.dot(&self.lift[k].weight);
        }

        let mut input_grads = vec![vec![[0.0; 3]; len]; batch];
        for (b, g) in input_grads.iter_mut().enumerate() {
            for t in 0..len {
                let row = dh.row(t * batch + b);
                match self.dims.features {
                    InputFeatures::Coordinates => {
                        for k in 0..3 {
                            g[t][k] = row[k];
                        }
                    }
                    InputFeatures::StepDeltas if t == 0 => {}
                    InputFeatures::StepDeltas => {
                        for k in 0..3 {
                            g[t][k] += row[k];
                            g[t - 1][k] -= row[k];
                        }
                    }
                }
            }
        }
        Ok(BackwardOutput {
            loss,
            param_grads: grads,
            input_grads,
        })
    }

    /// Gradients for a single walk under `loss`: parameter gradients and
    /// the `L x 3` coordinate gradients.
    pub fn backward(
        &self,
        trace: &ForwardTrace,
        loss: &super::LossKind,
    ) -> Result<(WalkNet, Vec<Point>)> {
        if trace.batch != 1 {
            return Err(Error::dims("single-walk trace", trace.batch));
        }
        let r = loss.reference(self.dims.classes)?;
        let out = self.backward_batch(trace, &[&r], 1.0, true)?;
        let grads = out.param_grads.expect("requested");
        Ok((grads, out.input_grads.into_iter().next().expect("one walk")))
    }

    /// Loss of one walk under `loss`, for finite-difference checks.
    pub fn loss(&self, coords: &[Point], loss: &super::LossKind) -> Result<f64> {
        let r = loss.reference(self.dims.classes)?;
        let trace = self.forward(coords)?;
        Ok(kld_unchecked(&r, trace.probs.row(0).as_slice().expect("standard layout")))
    }

    pub fn to_checkpoint(&self, extra: &BTreeMap<String, String>) -> Checkpoint {
        let mut manifest = extra.clone();
        manifest.insert("version".into(), CHECKPOINT_VERSION.to_string());
        manifest.insert("arch".into(), "walknet".into());
        manifest.insert("classes".into(), self.dims.classes.to_string());
        manifest.insert("hidden".into(), self.dims.hidden.to_string());
        manifest.insert("layers".into(), self.dims.layers.to_string());
        manifest.insert(
            "lift".into(),
            self.dims.lift.map_or("none".into(), |w| w.to_string()),
        );
        manifest.insert("features".into(), self.dims.features.name().into());
        Checkpoint {
            manifest,
            tensors: self
                .tensors()
                .into_iter()
                .map(|t| NamedArray {
                    name: t.name,
                    shape: t.shape,
                    data: t.data.to_vec(),
                })
                .collect(),
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        if ckpt.get("arch")? != "walknet" {
            return Err(Error::Config(format!(
                "checkpoint holds a {} network, not a walk network",
                ckpt.get("arch")?
            )));
        }
        let lift = match ckpt.get("lift")? {
            "none" => None,
            w => Some(ckpt.parse_value::<usize>("lift", w)?),
        };
        let dims = NetDims {
            lift,
            hidden: ckpt.parse("hidden")?,
            layers: ckpt.parse("layers")?,
            classes: ckpt.parse("classes")?,
            features: ckpt.get("features")?.parse()?,
        };
        let mut net = WalkNet::zeros(dims)?;
        ckpt.fill(&mut net)?;
        Ok(net)
    }
}

impl Parameters for WalkNet {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = Vec::new();
        for (k, d) in self.lift.iter().enumerate() {
            out.push(tensor_ref(format!("lift.{k}.weight"), &d.weight));
            out.push(tensor_ref1(format!("lift.{k}.bias"), &d.bias));
        }
        for (k, l) in self.rnn.iter().enumerate() {
            out.push(tensor_ref(format!("rnn.{k}.input"), &l.input));
            out.push(tensor_ref(format!("rnn.{k}.recurrent"), &l.recurrent));
            out.push(tensor_ref1(format!("rnn.{k}.bias"), &l.bias));
        }
        out.push(tensor_ref("head.weight".into(), &self.head.weight));
        out.push(tensor_ref1("head.bias".into(), &self.head.bias));
        out
    }

    fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        let mut out = Vec::new();
        for (k, d) in self.lift.iter_mut().enumerate() {
            out.push(tensor_mut(format!("lift.{k}.weight"), &mut d.weight));
            out.push(tensor_mut1(format!("lift.{k}.bias"), &mut d.bias));
        }
        for (k, l) in self.rnn.iter_mut().enumerate() {
            out.push(tensor_mut(format!("rnn.{k}.input"), &mut l.input));
            out.push(tensor_mut(format!("rnn.{k}.recurrent"), &mut l.recurrent));
            out.push(tensor_mut1(format!("rnn.{k}.bias"), &mut l.bias));
        }
        out.push(tensor_mut("head.weight".into(), &mut self.head.weight));
        out.push(tensor_mut1("head.bias".into(), &mut self.head.bias));
        out
    }
}

pub(crate) fn tensor_ref(name: String, a: &Array2<f64>) -> TensorRef<'_> {
    TensorRef {
        name,
        shape: a.shape().to_vec(),
        data: a.as_slice().expect("parameters use standard layout"),
    }
}

pub(crate) fn tensor_ref1(name: String, a: &Array1<f64>) -> TensorRef<'_> {
    TensorRef {
        name,
        shape: a.shape().to_vec(),
        data: a.as_slice().expect("parameters use standard layout"),
    }
}

pub(crate) fn tensor_mut(name: String, a: &mut Array2<f64>) -> TensorMut<'_> {
    let shape = a.shape().to_vec();
    TensorMut {
        name,
        shape,
        data: a.as_slice_mut().expect("parameters use standard layout"),
    }
}

pub(crate) fn tensor_mut1(name: String, a: &mut Array1<f64>) -> TensorMut<'_> {
    let shape = a.shape().to_vec();
    TensorMut {
        name,
        shape,
        data: a.as_slice_mut().expect("parameters use standard layout"),
    }
}
