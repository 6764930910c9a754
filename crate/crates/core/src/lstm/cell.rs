use crate::numerics::{Real, sigmoid};

use super::{LayerParams, ModelError};

/// Turns one row of `4h` gate pre-activations into activations in place and
/// advances the cell. `pre` ends up holding `[i, f, g, o]` activations.
#[inline]
pub(crate) fn gate_step<F: Real>(
    pre: &mut [F],
    c_prev: &[F],
    c_out: &mut [F],
    tanh_c_out: &mut [F],
    h_out: &mut [F],
) {
    let h = c_prev.len();
    let (gi, rest) = pre.split_at_mut(h);
    let (gf, rest) = rest.split_at_mut(h);
    let (gg, go) = rest.split_at_mut(h);
    for j in 0..h {
        let i = sigmoid(gi[j]);
        let f = sigmoid(gf[j]);
        let g = gg[j].tanh();
        let o = sigmoid(go[j]);
        gi[j] = i;
        gf[j] = f;
        gg[j] = g;
        go[j] = o;
        let c = f * c_prev[j] + i * g;
        let tc = c.tanh();
        c_out[j] = c;
        tanh_c_out[j] = tc;
        h_out[j] = o * tc;
    }
}

/// One LSTM step for a single input vector: returns `(h', c')`.
pub fn lstm_cell<F: Real>(
    x: &[F],
    h: &[F],
    c: &[F],
    layer: &LayerParams<F>,
) -> Result<(Vec<F>, Vec<F>), ModelError> {
    let hidden = layer.hidden();
    if x.len() != layer.input() || h.len() != hidden || c.len() != hidden || layer.b.len() != 4 * hidden {
        return Err(ModelError::Dimension(format!(
            "cell expects input {} and state {hidden}, got {} / {} / {}",
            layer.input(),
            x.len(),
            h.len(),
            c.len()
        )));
    }
    let mut pre = layer.b.clone();
    for (r, p) in pre.iter_mut().enumerate() {
        let wx = layer.w.row(r).iter().zip(x).fold(F::zero(), |s, (&w, &v)| s + w * v);
        let uh = layer.u.row(r).iter().zip(h).fold(F::zero(), |s, (&u, &v)| s + u * v);
        *p = *p + wx + uh;
    }
    let mut c_new = vec![F::zero(); hidden];
    let mut tanh_c = vec![F::zero(); hidden];
    let mut h_new = vec![F::zero(); hidden];
    gate_step(&mut pre, c, &mut c_new, &mut tanh_c, &mut h_new);
    Ok((h_new, c_new))
}
