//! Fixed-topology ReLU perceptron used as the Q-function approximator.
//!
//! Weights are stored input-major (`weights[i * n_out + o]`), so both the
//! forward pass and the weight-gradient accumulation are unit-stride
//! `axpy`s over the output dimension. Inputs and ReLU outputs that are
//! exactly zero are skipped.

use rand::Rng;

use crate::error::{Error, Result};

/// Input width of the DLCA network: 20 (action, observation) pairs plus
/// the normalised contender count.
pub const STATE_WIDTH: usize = 41;
pub const HIDDEN_WIDTH: usize = 64;
/// Q(s, wait) and Q(s, contend).
pub const N_ACTIONS: usize = 2;

/// Layer widths of the DLCA network: four hidden ReLU layers and a linear
/// output layer.
pub const DLCA_LAYOUT: [usize; 6] = [STATE_WIDTH, HIDDEN_WIDTH, HIDDEN_WIDTH, HIDDEN_WIDTH, HIDDEN_WIDTH, N_ACTIONS];

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    n_in: usize,
    n_out: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Dense {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            weights: vec![0.0; n_in * n_out],
            bias: vec![0.0; n_out],
        }
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    /// Input-major weight matrix.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn weight(&self, input: usize, output: usize) -> f64 {
        self.weights[input * self.n_out + output]
    }

    /// `out = bias + input W` for a row-major batch of inputs.
    fn forward_rows(&self, input: &[f64], out: &mut [f64]) {
        affine_rows(&self.weights, Some(&self.bias), self.n_in, self.n_out, input, out);
    }

    /// Weights transposed to output-major order.
    fn transpose_into(&self, out: &mut Vec<f64>) {
        out.clear();
        out.resize(self.weights.len(), 0.0);
        for (i, row) in self.weights.chunks_exact(self.n_out).enumerate() {
            for (o, &w) in row.iter().enumerate() {
                out[o * self.n_in + i] = w;
            }
        }
    }
}

/// `out[b] = bias + sum_i input[b][i] * w[i]` for input-major `w`, with the
/// terms of every output summed in input order and zero inputs skipped.
/// A missing bias starts from zero.
fn affine_rows(w: &[f64], bias: Option<&[f64]>, n_in: usize, n_out: usize, input: &[f64], out: &mut [f64]) {
    let rows = input.len() / n_in;
    let grouped = if n_out.is_multiple_of(BLOCK) { rows / GROUP * GROUP } else { 0 };
    let (gx, xs) = input.split_at(grouped * n_in);
    let (gy, ys) = out.split_at_mut(grouped * n_out);
    for (x, y) in gx.chunks_exact(GROUP * n_in).zip(gy.chunks_exact_mut(GROUP * n_out)) {
        affine_group(w, bias, n_in, n_out, x, y);
    }
    for (x, y) in xs.chunks_exact(n_in).zip(ys.chunks_exact_mut(n_out)) {
        match bias {
            Some(b) => y.copy_from_slice(b),
            None => y.fill(0.0),
        }
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                axpy(y, xi, &w[i * n_out..(i + 1) * n_out]);
            }
        }
    }
}

/// [`affine_rows`] for `GROUP` samples sharing every weight load. A zero
/// input adds an exact zero, so skipping only all-zero columns keeps the
/// per-sample sums bit-identical to the one-row path.
fn affine_group(w: &[f64], bias: Option<&[f64]>, n_in: usize, n_out: usize, input: &[f64], out: &mut [f64]) {
    for start in (0..n_out).step_by(BLOCK) {
        let mut acc = [[0.0; BLOCK]; GROUP];
        if let Some(b) = bias {
            for a in acc.iter_mut() {
                a.copy_from_slice(&b[start..start + BLOCK]);
            }
        }
        for i in 0..n_in {
            let x: [f64; GROUP] = std::array::from_fn(|s| input[s * n_in + i]);
            if x.iter().all(|&v| v == 0.0) {
                continue;
            }
            let row = &w[i * n_out + start..][..BLOCK];
            for s in 0..GROUP {
                for k in 0..BLOCK {
                    acc[s][k] += x[s] * row[k];
                }
            }
        }
        for (s, a) in acc.iter().enumerate() {
            out[s * n_out + start..][..BLOCK].copy_from_slice(a);
        }
    }
}

/// Output block width of the dense kernels.
const BLOCK: usize = 16;
/// Samples sharing each weight load in a batched forward pass.
const GROUP: usize = 4;

/// `grad[i][o] += sum_b x[b][i] * g[b][o]`, summed over `b` in order.
fn accumulate_outer(grad: &mut [f64], x: &[f64], g: &[f64], n_in: usize, n_out: usize) {
    let batch = g.len() / n_out;
    let grouped = if n_out.is_multiple_of(BLOCK) { n_in / GROUP * GROUP } else { 0 };
    // Four gradient rows at a time share each load of `g`.
    for i0 in (0..grouped).step_by(GROUP) {
        for start in (0..n_out).step_by(BLOCK) {
            let mut acc = [[0.0; BLOCK]; GROUP];
            for (r, a) in acc.iter_mut().enumerate() {
                a.copy_from_slice(&grad[(i0 + r) * n_out + start..][..BLOCK]);
            }
            for b in 0..batch {
                let xb = &x[b * n_in + i0..][..GROUP];
                if xb.iter().all(|&v| v == 0.0) {
                    continue;
                }
                let gb = &g[b * n_out + start..][..BLOCK];
                for r in 0..GROUP {
                    for k in 0..BLOCK {
                        acc[r][k] += xb[r] * gb[k];
                    }
                }
            }
            for (r, a) in acc.iter().enumerate() {
                grad[(i0 + r) * n_out + start..][..BLOCK].copy_from_slice(a);
            }
        }
    }
    for (i, grow) in grad.chunks_exact_mut(n_out).enumerate().skip(grouped) {
        for b in 0..batch {
            let xi = x[b * n_in + i];
            if xi != 0.0 {
                axpy(grow, xi, &g[b * n_out..(b + 1) * n_out]);
            }
        }
    }
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// All weights and biases of one Q-network.
#[derive(Debug, Clone, PartialEq)]
pub struct QnnParams {
    layers: Vec<Dense>,
}

/// Shape-congruent container for parameter gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    layers: Vec<Dense>,
}

/// Scratch buffers reused across forward/backward passes.
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    acts: Vec<Vec<f64>>,
    grad_out: Vec<f64>,
    grad_in: Vec<f64>,
    transposed: Vec<f64>,
}

/// A minibatch in flattened row-major form.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Batch {
    pub states: Vec<f64>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn clear(&mut self) {
        self.states.clear();
        self.actions.clear();
        self.rewards.clear();
        self.next_states.clear();
    }

    pub fn push(&mut self, state: &[f64], action: usize, reward: f64, next_state: &[f64]) {
        self.states.extend_from_slice(state);
        self.actions.push(action);
        self.rewards.push(reward);
        self.next_states.extend_from_slice(next_state);
    }
}

/// TD target `r + gamma * max_a' Q(s', a')`.
pub fn target_value(reward: f64, next_q: &[f64], gamma: f64) -> f64 {
    let best = next_q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    reward + gamma * best
}

impl QnnParams {
    /// Fan-in scaled uniform initialisation: every weight and bias of a
    /// layer with fan-in `k` is drawn from U(-1/sqrt(k), 1/sqrt(k)).
    pub fn init<R: Rng>(layout: &[usize], rng: &mut R) -> Self {
        let mut p = Self::zeros(layout);
        for layer in &mut p.layers {
            let bound = 1.0 / (layer.n_in as f64).sqrt();
            for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *w = rng.random_range(-bound..bound);
            }
        }
        p
    }

    /// The 41 -> 64x4 -> 2 DLCA network.
    pub fn dlca<R: Rng>(rng: &mut R) -> Self {
        Self::init(&DLCA_LAYOUT, rng)
    }

    pub fn zeros(layout: &[usize]) -> Self {
        assert!(layout.len() >= 2, "a network needs at least one layer");
        Self {
            layers: layout.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        }
    }

    pub fn layout(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].n_in)
            .chain(self.layers.iter().map(|l| l.n_out))
            .collect()
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].n_out
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.layout() == other.layout()
    }

    /// Every parameter in layer order, weights before biases.
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    /// Network output for one input vector.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_width() {
            return Err(Error::ShapeMismatch(format!(
                "input has {} entries, network expects {}",
                input.len(),
                self.input_width()
            )));
        }
        if let Some(i) = input.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput(i));
        }
        let mut ws = Workspace::default();
        Ok(self.forward_batch(input, 1, &mut ws).to_vec())
    }

    /// `(Q(s, wait), Q(s, contend))` for a two-action network.
    pub fn q_values(&self, input: &[f64], ws: &mut Workspace) -> [f64; 2] {
        debug_assert_eq!(self.output_width(), 2);
        let out = self.forward_batch(input, 1, ws);
        [out[0], out[1]]
    }

    /// Forward pass over `batch` row-major inputs. Activations stay in `ws`
    /// for a subsequent backward pass; the returned slice is the output.
    pub fn forward_batch<'w>(&self, inputs: &[f64], batch: usize, ws: &'w mut Workspace) -> &'w [f64] {
        debug_assert_eq!(inputs.len(), batch * self.input_width());
        ws.acts.resize_with(self.layers.len() + 1, Vec::new);
        ws.acts[0].clear();
        ws.acts[0].extend_from_slice(inputs);
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let (head, tail) = ws.acts.split_at_mut(l + 1);
            let input = &head[l];
            let out = &mut tail[0];
            out.resize(batch * layer.n_out, 0.0);
            layer.forward_rows(input, out);
            if l < last {
                for v in out.iter_mut() {
                    *v = v.max(0.0);
                }
            }
        }
        &ws.acts[last + 1]
    }

    /// Back-propagates `ws.grad_out` (gradient w.r.t. the network output of
    /// the last `forward_batch`) and accumulates parameter gradients.
    fn backward_accumulate(&self, batch: usize, ws: &mut Workspace, grad: &mut GradientSet) {
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let g_layer = &mut grad.layers[l];
            let input = &ws.acts[l];
            for g in ws.grad_out[..batch * layer.n_out].chunks_exact(layer.n_out) {
                axpy(&mut g_layer.bias, 1.0, g);
            }
            accumulate_outer(
                &mut g_layer.weights,
                &input[..batch * layer.n_in],
                &ws.grad_out[..batch * layer.n_out],
                layer.n_in,
                layer.n_out,
            );
            if l == 0 {
                break;
            }
            ws.grad_in.clear();
            ws.grad_in.resize(batch * layer.n_in, 0.0);
            layer.transpose_into(&mut ws.transposed);
            affine_rows(
                &ws.transposed,
                None,
                layer.n_out,
                layer.n_in,
                &ws.grad_out[..batch * layer.n_out],
                &mut ws.grad_in,
            );
            // ReLU derivative: only active units pass gradient.
            for (gi, &x) in ws.grad_in.iter_mut().zip(&input[..batch * layer.n_in]) {
                if x <= 0.0 {
                    *gi = 0.0;
                }
            }
            std::mem::swap(&mut ws.grad_in, &mut ws.grad_out);
        }
    }

    /// Gradient of `Q(s, a)` summed with weights `coef[b]` over the batch,
    /// added into `grad`.
    pub fn accumulate_q_gradient(
        &self,
        states: &[f64],
        actions: &[usize],
        coef: &[f64],
        ws: &mut Workspace,
        grad: &mut GradientSet,
    ) {
        let batch = actions.len();
        let n_out = self.output_width();
        self.forward_batch(states, batch, ws);
        ws.grad_out.clear();
        ws.grad_out.resize(batch * n_out, 0.0);
        for (b, (&a, &c)) in actions.iter().zip(coef).enumerate() {
            ws.grad_out[b * n_out + a] = c;
        }
        self.backward_accumulate(batch, ws, grad);
    }

    /// Accumulates `(1/B) sum_b (v_b - Q(s_b, a_b)) grad Q(s_b, a_b)` into
    /// `grad`, with `v_b` treated as a constant. Returns the squared TD
    /// errors of the batch, in order.
    pub fn semi_gradient(
        &self,
        batch: &Batch,
        gamma: f64,
        scale: f64,
        ws: &mut Workspace,
        grad: &mut GradientSet,
    ) -> Vec<f64> {
        let n = batch.len();
        let n_out = self.output_width();
        let next = self.forward_batch(&batch.next_states, n, ws);
        let targets: Vec<f64> = (0..n)
            .map(|b| target_value(batch.rewards[b], &next[b * n_out..(b + 1) * n_out], gamma))
            .collect();

        let q = self.forward_batch(&batch.states, n, ws);
        let td: Vec<f64> = (0..n).map(|b| targets[b] - q[b * n_out + batch.actions[b]]).collect();
        ws.grad_out.clear();
        ws.grad_out.resize(n * n_out, 0.0);
        for (b, &d) in td.iter().enumerate() {
            ws.grad_out[b * n_out + batch.actions[b]] = d * scale;
        }
        self.backward_accumulate(n, ws, grad);
        td.iter().map(|d| d * d).collect()
    }

    /// One semi-gradient step: `theta += rho * mean_b (v_b - Q_b) grad Q_b`.
    /// Returns the mean squared TD error measured before the step. A
    /// non-finite loss leaves the parameters untouched.
    pub fn semi_gradient_update(&mut self, batch: &Batch, rho: f64, gamma: f64, ws: &mut Workspace) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Config("empty training batch".into()));
        }
        if !(rho > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {rho}")));
        }
        let mut grad = GradientSet::zeros_like(self);
        let sq = self.semi_gradient(batch, gamma, 1.0 / batch.len() as f64, ws, &mut grad);
        let loss = sq.iter().sum::<f64>() / sq.len() as f64;
        if !loss.is_finite() {
            return Err(Error::Divergence(loss));
        }
        self.apply(&grad, rho);
        Ok(loss)
    }

    /// `theta += step * grad`.
    pub fn apply(&mut self, grad: &GradientSet, step: f64) {
        for (p, g) in self.layers.iter_mut().zip(&grad.layers) {
            axpy(&mut p.weights, step, &g.weights);
            axpy(&mut p.bias, step, &g.bias);
        }
    }

    /// Serialises to `b"QNN1"`, the layer count and widths as u32 LE, then
    /// every layer's weights and biases as f64 LE.
    pub fn to_bytes(&self) -> Vec<u8> {
        let layout = self.layout();
        let mut out = Vec::with_capacity(8 + 4 * layout.len() + 8 * self.n_params());
        out.extend_from_slice(b"QNN1");
        out.extend_from_slice(&(layout.len() as u32).to_le_bytes());
        for w in &layout {
            out.extend_from_slice(&(*w as u32).to_le_bytes());
        }
        for v in self.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Snapshot(m.to_string());
        if bytes.len() < 8 || &bytes[..4] != b"QNN1" {
            return Err(bad("missing header"));
        }
        let u32_at = |off: usize| -> Result<usize> {
            bytes
                .get(off..off + 4)
                .map(|b| u32::from_le_bytes(b.try_into().unwrap()) as usize)
                .ok_or_else(|| bad("truncated shape header"))
        };
        let n = u32_at(4)?;
        if !(2..=64).contains(&n) {
            return Err(bad("implausible layer count"));
        }
        let layout: Vec<usize> = (0..n).map(|i| u32_at(8 + 4 * i)).collect::<Result<_>>()?;
        if layout.iter().any(|&w| w == 0 || w > 1 << 16) {
            return Err(bad("implausible layer width"));
        }
        let mut p = Self::zeros(&layout);
        let body = &bytes[8 + 4 * n..];
        if body.len() != 8 * p.n_params() {
            return Err(bad("payload length does not match shape"));
        }
        for (dst, chunk) in p.iter_mut().zip(body.chunks_exact(8)) {
            *dst = f64::from_le_bytes(chunk.try_into().unwrap());
        }
        Ok(p)
    }
}

impl GradientSet {
    pub fn zeros_like(params: &QnnParams) -> Self {
        Self {
            layers: params.layers.iter().map(|l| Dense::zeros(l.n_in, l.n_out)).collect(),
        }
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|v| *v *= s);
        }
    }
}

/// Element-wise mean of shape-congruent parameter sets. Each entry's sum
/// is carried exactly as an unevaluated pair `hi + lo`, and the division
/// is corrected by its remainder, so the result is the correctly rounded
/// mean except in pathological cancellation.
pub fn average_params(params: &[QnnParams]) -> Result<QnnParams> {
    let first = params
        .first()
        .ok_or_else(|| Error::ShapeMismatch("cannot average zero networks".into()))?;
    if let Some(i) = params.iter().position(|p| !p.same_shape(first)) {
        return Err(Error::ShapeMismatch(format!(
            "network {i} has layout {:?}, expected {:?}",
            params[i].layout(),
            first.layout()
        )));
    }
    let n = params.len() as f64;
    let mut out = first.clone();
    for (l, layer) in out.layers.iter_mut().enumerate() {
        for (k, dst) in layer.weights.iter_mut().enumerate() {
            *dst = mean_of(params.iter().map(|p| p.layers[l].weights[k]), n);
        }
        for (k, dst) in layer.bias.iter_mut().enumerate() {
            *dst = mean_of(params.iter().map(|p| p.layers[l].bias[k]), n);
        }
    }
    Ok(out)
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn mean_of(values: impl Iterator<Item = f64>, n: f64) -> f64 {
    let (mut hi, mut lo) = (0.0f64, 0.0f64);
    for v in values {
        let (s, e) = two_sum(hi, v);
        hi = s;
        lo += e;
    }
    let (hi, lo) = two_sum(hi, lo);
    let q = hi / n;
    // Exact remainder of the leading division, plus the low part.
    let r = (-q).mul_add(n, hi) + lo;
    q + r / n
}
