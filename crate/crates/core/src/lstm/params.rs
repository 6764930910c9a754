use crate::numerics::{Matrix, Real, Rng};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelDims {
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
    pub layers: usize,
}

impl ModelDims {
    pub fn layer_input(&self, l: usize) -> usize {
        if l == 0 { self.embed } else { self.hidden }
    }

    pub fn num_params(&self) -> usize {
        let h4 = 4 * self.hidden;
        let mut n = self.vocab * self.embed + self.vocab * self.hidden + self.vocab;
        for l in 0..self.layers {
            n += h4 * self.layer_input(l) + h4 * self.hidden + h4;
        }
        n
    }
}

/// One LSTM layer: `w` is `4h × in`, `u` is `4h × h`, `b` has `4h` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<F> {
    pub w: Matrix<F>,
    pub u: Matrix<F>,
    pub b: Vec<F>,
}

impl<F: Real> LayerParams<F> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w: Matrix::zeros(4 * hidden, input),
            u: Matrix::zeros(4 * hidden, hidden),
            b: vec![F::zero(); 4 * hidden],
        }
    }

    pub fn hidden(&self) -> usize {
        self.u.cols()
    }

    pub fn input(&self) -> usize {
        self.w.cols()
    }
}

/// Trainable state. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<F> {
    /// `vocab × embed`
    pub embedding: Matrix<F>,
    pub layers: Vec<LayerParams<F>>,
    /// `vocab × hidden`
    pub w_out: Matrix<F>,
    pub b_out: Vec<F>,
}

impl<F: Real> ModelParams<F> {
    pub fn zeros(dims: ModelDims) -> Self {
        Self {
            embedding: Matrix::zeros(dims.vocab, dims.embed),
            layers: (0..dims.layers)
                .map(|l| LayerParams::zeros(dims.layer_input(l), dims.hidden))
                .collect(),
            w_out: Matrix::zeros(dims.vocab, dims.hidden),
            b_out: vec![F::zero(); dims.vocab],
        }
    }

    /// Weights uniform in `[-range, range]`, biases zero. Draw order follows
    /// [`ModelParams::blocks`].
    pub fn init(dims: ModelDims, range: f64, rng: &mut Rng) -> Self {
        let mut p = Self::zeros(dims);
        let mut fill = |s: &mut [F]| {
            for v in s {
                *v = F::from_f64_lossy(rng.uniform_range(-range, range));
            }
        };
        fill(p.embedding.as_mut_slice());
        for layer in &mut p.layers {
            fill(layer.w.as_mut_slice());
            fill(layer.u.as_mut_slice());
        }
        fill(p.w_out.as_mut_slice());
        p
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            vocab: self.embedding.rows(),
            embed: self.embedding.cols(),
            hidden: self.layers.first().map_or(self.w_out.cols(), |l| l.hidden()),
            layers: self.layers.len(),
        }
    }

    /// Checks that every block agrees with [`ModelParams::dims`].
    pub fn validate(&self) -> Result<ModelDims, ModelError> {
        let d = self.dims();
        let bad = |what: String| Err(ModelError::Dimension(what));
        if d.layers == 0 {
            return bad("model has no LSTM layers".into());
        }
        for (l, layer) in self.layers.iter().enumerate() {
            let want_in = d.layer_input(l);
            if layer.w.rows() != 4 * d.hidden || layer.w.cols() != want_in {
                return bad(format!("layer {l} input weights are {}x{}", layer.w.rows(), layer.w.cols()));
            }
            if layer.u.rows() != 4 * d.hidden || layer.u.cols() != d.hidden {
                return bad(format!("layer {l} recurrent weights are {}x{}", layer.u.rows(), layer.u.cols()));
            }
            if layer.b.len() != 4 * d.hidden {
                return bad(format!("layer {l} bias has {} entries", layer.b.len()));
            }
        }
        if self.w_out.rows() != d.vocab || self.w_out.cols() != d.hidden || self.b_out.len() != d.vocab {
            return bad("output projection does not match vocabulary/hidden size".into());
        }
        Ok(d)
    }

    /// Parameter blocks in storage order: embedding, then per layer `w`,
    /// `u`, `b`, then `w_out`, `b_out`.
    pub fn blocks(&self) -> Vec<&[F]> {
        let mut out: Vec<&[F]> = vec![self.embedding.as_slice()];
        for l in &self.layers {
            out.push(l.w.as_slice());
            out.push(l.u.as_slice());
            out.push(&l.b);
        }
        out.push(self.w_out.as_slice());
        out.push(&self.b_out);
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [F]> {
        let mut out: Vec<&mut [F]> = vec![self.embedding.as_mut_slice()];
        for l in &mut self.layers {
            out.push(l.w.as_mut_slice());
            out.push(l.u.as_mut_slice());
            out.push(&mut l.b);
        }
        out.push(self.w_out.as_mut_slice());
        out.push(&mut self.b_out);
        out
    }

    pub fn num_params(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<F> {
        self.blocks().concat()
    }

    pub fn set_flat(&mut self, flat: &[F]) {
        assert_eq!(flat.len(), self.num_params(), "flat parameter length");
        let mut off = 0;
        for block in self.blocks_mut() {
            block.copy_from_slice(&flat[off..off + block.len()]);
            off += block.len();
        }
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// L2 norm over every parameter, accumulated in `f64`.
    pub fn global_norm(&self) -> f64 {
        self.blocks()
            .iter()
            .flat_map(|b| b.iter())
            .map(|v| {
                let x = v.to_f64().unwrap_or(f64::NAN);
                x * x
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn cast<G: Real>(&self) -> ModelParams<G> {
        let conv = |m: &Matrix<F>| {
            Matrix::from_vec(
                m.rows(),
                m.cols(),
                m.as_slice().iter().map(|v| G::from_f64_lossy(v.to_f64().unwrap())).collect(),
            )
            .unwrap()
        };
        let conv_v = |v: &[F]| v.iter().map(|x| G::from_f64_lossy(x.to_f64().unwrap())).collect();
        ModelParams {
            embedding: conv(&self.embedding),
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams { w: conv(&l.w), u: conv(&l.u), b: conv_v(&l.b) })
                .collect(),
            w_out: conv(&self.w_out),
            b_out: conv_v(&self.b_out),
        }
    }
}
