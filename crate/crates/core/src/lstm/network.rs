use crate::numerics::{Matrix, Op, Real, Rng, gemm, log_softmax};

use super::cell::gate_step;
use super::{ModelError, ModelParams};
use crate::corpus::Block;

/// Per-layer `h` and `c`, each `batch × hidden` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState<F> {
    pub batch: usize,
    pub hidden: usize,
    pub h: Vec<Vec<F>>,
    pub c: Vec<Vec<F>>,
}

impl<F: Real> HiddenState<F> {
    pub fn zeros(layers: usize, batch: usize, hidden: usize) -> Self {
        Self {
            batch,
            hidden,
            h: vec![vec![F::zero(); batch * hidden]; layers],
            c: vec![vec![F::zero(); batch * hidden]; layers],
        }
    }

    pub fn for_model(params: &ModelParams<F>, batch: usize) -> Self {
        let d = params.dims();
        Self::zeros(d.layers, batch, d.hidden)
    }

    fn check(&self, params: &ModelParams<F>, batch: usize) -> Result<(), ModelError> {
        let d = params.dims();
        let n = batch * d.hidden;
        let ok = self.batch == batch
            && self.hidden == d.hidden
            && self.h.len() == d.layers
            && self.c.len() == d.layers
            && self.h.iter().chain(&self.c).all(|v| v.len() == n);
        if ok {
            Ok(())
        } else {
            Err(ModelError::Dimension(format!(
                "hidden state is {} layers × {}×{}, model needs {} × {batch}×{}",
                self.h.len(),
                self.batch,
                self.hidden,
                d.layers,
                d.hidden
            )))
        }
    }
}

/// Dropout mode. Inverted dropout: kept activations are scaled by `1/(1-p)`.
#[derive(Debug)]
pub enum Dropout<'a> {
    Off,
    On { p: f64, rng: &'a mut Rng },
}

impl Dropout<'_> {
    fn mask<F: Real>(&mut self, n: usize) -> Option<Vec<F>> {
        match self {
            Dropout::On { p, rng } if *p > 0.0 => {
                let keep = F::from_f64_lossy(1.0 / (1.0 - *p));
                Some((0..n).map(|_| if rng.uniform() < *p { F::zero() } else { keep }).collect())
            }
            _ => None,
        }
    }
}

struct LayerTrace<F> {
    /// `T·B × in`, after dropout.
    input: Vec<F>,
    input_mask: Option<Vec<F>>,
    /// `T·B × 4h` gate activations `[i, f, g, o]`.
    gates: Vec<F>,
    /// `(T+1)·B × h`; the first `B` rows are the carried-in state.
    h: Vec<F>,
    c: Vec<F>,
    /// `T·B × h`
    tanh_c: Vec<F>,
}

/// Everything the backward pass needs. Rows are time-major: `t·B + b`.
struct Trace<F> {
    batch: usize,
    steps: usize,
    ids: Vec<u32>,
    layers: Vec<LayerTrace<F>>,
    /// `T·B × V`
    logits: Vec<F>,
}

impl<F: Real> Trace<F> {
    fn top(&self) -> &[F] {
        let last = self.layers.last().expect("at least one layer");
        let h = last.tanh_c.len() / (self.batch * self.steps);
        &last.h[self.batch * h..]
    }
}

fn to_time_major(ids: &[u32], batch: usize, steps: usize) -> Vec<u32> {
    let mut out = vec![0; ids.len()];
    for b in 0..batch {
        for t in 0..steps {
            out[t * batch + b] = ids[b * steps + t];
        }
    }
    out
}

fn run<F: Real>(
    params: &ModelParams<F>,
    ids: &[u32],
    batch: usize,
    state: &HiddenState<F>,
    dropout: &mut Dropout<'_>,
) -> Result<(Trace<F>, HiddenState<F>), ModelError> {
    let d = params.validate()?;
    if batch == 0 || ids.is_empty() || ids.len() % batch != 0 {
        return Err(ModelError::Dimension(format!(
            "{} ids do not form {batch} equal streams",
            ids.len()
        )));
    }
    state.check(params, batch)?;
    if let Some(&bad) = ids.iter().find(|&&i| i as usize >= d.vocab) {
        return Err(ModelError::InvalidId { id: bad, vocab: d.vocab });
    }
    let steps = ids.len() / batch;
    let rows = batch * steps;
    let hdim = d.hidden;
    let ids = to_time_major(ids, batch, steps);

    let mut x = Vec::with_capacity(rows * d.embed);
    for &id in &ids {
        x.extend_from_slice(params.embedding.row(id as usize));
    }

    let mut layers: Vec<LayerTrace<F>> = Vec::with_capacity(d.layers);
    let mut new_state = HiddenState::zeros(d.layers, batch, hdim);
    for (l, lp) in params.layers.iter().enumerate() {
        let in_dim = d.layer_input(l);
        let mut input = match layers.last() {
            None => std::mem::take(&mut x),
            Some(prev) => prev.h[batch * hdim..].to_vec(),
        };
        let input_mask = dropout.mask::<F>(input.len());
        if let Some(m) = &input_mask {
            input.iter_mut().zip(m).for_each(|(v, &k)| *v = *v * k);
        }

        let g4 = 4 * hdim;
        let mut gates = Vec::with_capacity(rows * g4);
        for _ in 0..rows {
            gates.extend_from_slice(&lp.b);
        }
        gemm(Op::N, Op::T, rows, in_dim, g4, &input, lp.w.as_slice(), F::one(), &mut gates);

        let mut h = vec![F::zero(); (steps + 1) * batch * hdim];
        let mut c = vec![F::zero(); (steps + 1) * batch * hdim];
        let mut tanh_c = vec![F::zero(); rows * hdim];
        h[..batch * hdim].copy_from_slice(&state.h[l]);
        c[..batch * hdim].copy_from_slice(&state.c[l]);
        let bh = batch * hdim;
        for t in 0..steps {
            let pre_t = &mut gates[t * batch * g4..(t + 1) * batch * g4];
            let (h_hist, h_next) = h.split_at_mut((t + 1) * bh);
            let h_prev = &h_hist[t * bh..];
            gemm(Op::N, Op::T, batch, hdim, g4, h_prev, lp.u.as_slice(), F::one(), pre_t);
            let (c_hist, c_next) = c.split_at_mut((t + 1) * bh);
            let c_prev = &c_hist[t * bh..];
            for b in 0..batch {
                let r = b * hdim..(b + 1) * hdim;
                gate_step(
                    &mut pre_t[b * g4..(b + 1) * g4],
                    &c_prev[r.clone()],
                    &mut c_next[r.clone()],
                    &mut tanh_c[(t * batch + b) * hdim..(t * batch + b + 1) * hdim],
                    &mut h_next[r],
                );
            }
        }
        new_state.h[l].copy_from_slice(&h[steps * bh..]);
        new_state.c[l].copy_from_slice(&c[steps * bh..]);
        layers.push(LayerTrace { input, input_mask, gates, h, c, tanh_c });
    }

    let mut logits = Vec::with_capacity(rows * d.vocab);
    for _ in 0..rows {
        logits.extend_from_slice(&params.b_out);
    }
    let top = &layers.last().unwrap().h[batch * hdim..];
    gemm(Op::N, Op::T, rows, hdim, d.vocab, top, params.w_out.as_slice(), F::one(), &mut logits);

    Ok((Trace { batch, steps, ids, layers, logits }, new_state))
}

/// Runs the model over a `batch × T` block of ids (row-major by stream).
///
/// Returns logits with one row per position, ordered like the input
/// (`b·T + t`), and the state after the last position.
pub fn forward<F: Real>(
    params: &ModelParams<F>,
    ids: &[u32],
    batch: usize,
    state: &HiddenState<F>,
    mut dropout: Dropout<'_>,
) -> Result<(Matrix<F>, HiddenState<F>), ModelError> {
    let (trace, new_state) = run(params, ids, batch, state, &mut dropout)?;
    let v = params.dims().vocab;
    let steps = trace.steps;
    let mut out = Matrix::zeros(batch * steps, v);
    for t in 0..steps {
        for b in 0..batch {
            let src = &trace.logits[(t * batch + b) * v..(t * batch + b + 1) * v];
            out.row_mut(b * steps + t).copy_from_slice(src);
        }
    }
    Ok((out, new_state))
}

fn backward<F: Real>(params: &ModelParams<F>, trace: &Trace<F>, dlogits: &[F]) -> ModelParams<F> {
    let d = params.dims();
    let (batch, steps) = (trace.batch, trace.steps);
    let rows = batch * steps;
    let hdim = d.hidden;
    let g4 = 4 * hdim;
    let mut grads = ModelParams::zeros(d);

    gemm(Op::T, Op::N, d.vocab, rows, hdim, dlogits, trace.top(), F::zero(), grads.w_out.as_mut_slice());
    for r in 0..rows {
        for (g, &v) in grads.b_out.iter_mut().zip(&dlogits[r * d.vocab..(r + 1) * d.vocab]) {
            *g = *g + v;
        }
    }
    let mut d_above = vec![F::zero(); rows * hdim];
    gemm(Op::N, Op::N, rows, d.vocab, hdim, dlogits, params.w_out.as_slice(), F::zero(), &mut d_above);

    let one = F::one();
    for l in (0..d.layers).rev() {
        let lt = &trace.layers[l];
        let lp = &params.layers[l];
        let in_dim = d.layer_input(l);
        let mut dpre = vec![F::zero(); rows * g4];
        let mut dh_next = vec![F::zero(); batch * hdim];
        let mut dc_next = vec![F::zero(); batch * hdim];
        for t in (0..steps).rev() {
            for b in 0..batch {
                let r = t * batch + b;
                let gate = &lt.gates[r * g4..(r + 1) * g4];
                let dp = &mut dpre[r * g4..(r + 1) * g4];
                let c_prev = &lt.c[(t * batch + b) * hdim..(t * batch + b + 1) * hdim];
                for j in 0..hdim {
                    let (i, f, g, o) = (gate[j], gate[hdim + j], gate[2 * hdim + j], gate[3 * hdim + j]);
                    let tc = lt.tanh_c[r * hdim + j];
                    let dh = d_above[r * hdim + j] + dh_next[b * hdim + j];
                    let dc = dh * o * (one - tc * tc) + dc_next[b * hdim + j];
                    dp[j] = dc * g * i * (one - i);
                    dp[hdim + j] = dc * c_prev[j] * f * (one - f);
                    dp[2 * hdim + j] = dc * i * (one - g * g);
                    dp[3 * hdim + j] = dh * tc * o * (one - o);
                    dc_next[b * hdim + j] = dc * f;
                }
            }
            let dp_t = &dpre[t * batch * g4..(t + 1) * batch * g4];
            gemm(Op::N, Op::N, batch, g4, hdim, dp_t, lp.u.as_slice(), F::zero(), &mut dh_next);
        }

        let gl = &mut grads.layers[l];
        gemm(Op::T, Op::N, g4, rows, in_dim, &dpre, &lt.input, F::zero(), gl.w.as_mut_slice());
        gemm(Op::T, Op::N, g4, rows, hdim, &dpre, &lt.h[..rows * hdim], F::zero(), gl.u.as_mut_slice());
        for r in 0..rows {
            for (g, &v) in gl.b.iter_mut().zip(&dpre[r * g4..(r + 1) * g4]) {
                *g = *g + v;
            }
        }
        let mut d_input = vec![F::zero(); rows * in_dim];
        gemm(Op::N, Op::N, rows, g4, in_dim, &dpre, lp.w.as_slice(), F::zero(), &mut d_input);
        if let Some(m) = &lt.input_mask {
            d_input.iter_mut().zip(m).for_each(|(v, &k)| *v = *v * k);
        }
        if l == 0 {
            for (r, &id) in trace.ids.iter().enumerate() {
                let row = grads.embedding.row_mut(id as usize);
                for (g, &v) in row.iter_mut().zip(&d_input[r * in_dim..(r + 1) * in_dim]) {
                    *g = *g + v;
                }
            }
        } else {
            d_above = d_input;
        }
    }
    grads
}

/// Mean cross-entropy over every position of `block`, its gradient by
/// backpropagation through the block, and the state to carry into the next
/// block. Gradients never reach the carried-in state.
pub fn loss_and_grads<F: Real>(
    params: &ModelParams<F>,
    block: &Block,
    state: &HiddenState<F>,
    mut dropout: Dropout<'_>,
) -> Result<(f64, ModelParams<F>, HiddenState<F>), ModelError> {
    let (trace, new_state) = run(params, &block.inputs, block.batch_size, state, &mut dropout)?;
    let v = params.dims().vocab;
    let targets = to_time_major(&block.targets, trace.batch, trace.steps);
    if let Some(&bad) = targets.iter().find(|&&t| t as usize >= v) {
        return Err(ModelError::InvalidId { id: bad, vocab: v });
    }
    let n = targets.len();
    let inv_n = F::from_f64_lossy(1.0 / n as f64);
    let mut dlogits = vec![F::zero(); n * v];
    let mut total = 0.0f64;
    for (r, &tgt) in targets.iter().enumerate() {
        let z = &trace.logits[r * v..(r + 1) * v];
        let lp = log_softmax(z)?;
        total -= lp[tgt as usize].to_f64().unwrap();
        let dz = &mut dlogits[r * v..(r + 1) * v];
        for (g, &l) in dz.iter_mut().zip(&lp) {
            *g = l.exp() * inv_n;
        }
        dz[tgt as usize] = dz[tgt as usize] - inv_n;
    }
    let grads = backward(params, &trace, &dlogits);
    Ok((total / n as f64, grads, new_state))
}

/// Log-probabilities of the next token after `prefix`, starting from a zero
/// state in evaluation mode.
pub fn next_token_log_probs<F: Real>(params: &ModelParams<F>, prefix: &[u32]) -> Result<Vec<F>, ModelError> {
    if prefix.is_empty() {
        return Err(ModelError::Dimension("empty prefix".into()));
    }
    let state = HiddenState::for_model(params, 1);
    let (trace, _) = run(params, prefix, 1, &state, &mut Dropout::Off)?;
    let v = params.dims().vocab;
    let last = &trace.logits[(trace.steps - 1) * v..];
    Ok(log_softmax(last)?)
}

const EVAL_CHUNK: usize = 256;

/// `exp` of the mean next-token cross-entropy over the whole id stream, with
/// the state threaded from a zero start and no dropout.
pub fn perplexity<F: Real>(params: &ModelParams<F>, ids: &[u32]) -> Result<f64, ModelError> {
    if ids.len() < 2 {
        return Err(ModelError::EmptyCorpus);
    }
    let v = params.dims().vocab;
    let mut state = HiddenState::for_model(params, 1);
    let mut total = 0.0f64;
    let mut start = 0;
    while start + 1 < ids.len() {
        let end = (start + EVAL_CHUNK).min(ids.len() - 1);
        let (trace, next) = run(params, &ids[start..end], 1, &state, &mut Dropout::Off)?;
        for (r, &tgt) in ids[start + 1..end + 1].iter().enumerate() {
            if tgt as usize >= v {
                return Err(ModelError::InvalidId { id: tgt, vocab: v });
            }
            let z = &trace.logits[r * v..(r + 1) * v];
            total += crate::numerics::cross_entropy(z, tgt as usize)?.to_f64().unwrap();
        }
        state = next;
        start = end;
    }
    Ok((total / (ids.len() - 1) as f64).exp())
}

/// Clipped SGD update. The global gradient norm is returned (pre-clipping).
pub fn sgd_step<F: Real>(
    params: &mut ModelParams<F>,
    grads: &ModelParams<F>,
    lr: f64,
    clip_norm: f64,
) -> Result<f64, ModelError> {
    if params.dims() != grads.dims() {
        return Err(ModelError::Dimension("gradient shape differs from parameters".into()));
    }
    let norm = grads.global_norm();
    if !norm.is_finite() {
        return Err(ModelError::Divergence(format!("gradient norm is {norm}")));
    }
    let scale = if norm > clip_norm { clip_norm / norm } else { 1.0 };
    let step = F::from_f64_lossy(lr * scale);
    for (p, g) in params.blocks_mut().into_iter().zip(grads.blocks()) {
        for (pv, &gv) in p.iter_mut().zip(g) {
            *pv = *pv - step * gv;
        }
    }
    Ok(norm)
}
