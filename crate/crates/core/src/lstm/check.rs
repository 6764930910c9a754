use crate::corpus::Block;
use crate::numerics::{GradCheckReport, Rng, finite_diff_check};

use super::network::{Dropout, HiddenState, loss_and_grads};
use super::{ModelDims, ModelError, ModelParams};

/// A small random model, block and carried-in state for gradient checking.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckSetup {
    pub dims: ModelDims,
    pub batch: usize,
    pub bptt: usize,
    pub init_range: f64,
    pub seed: u64,
    pub eps: f64,
}

impl Default for GradCheckSetup {
    fn default() -> Self {
        Self {
            dims: ModelDims { vocab: 17, embed: 6, hidden: 6, layers: 2 },
            batch: 2,
            bptt: 5,
            init_range: 0.5,
            seed: 0,
            eps: 1e-5,
        }
    }
}

/// Central-difference check of the analytic block gradient in `f64`.
///
/// `corrupt` doubles the analytic gradient of the first layer's recurrent
/// weights; a working check must flag it.
pub fn gradient_check(setup: &GradCheckSetup, corrupt: bool) -> Result<GradCheckReport, ModelError> {
    let mut rng = Rng::new(setup.seed);
    let params: ModelParams<f64> = ModelParams::init(setup.dims, setup.init_range, &mut rng);
    let n = setup.batch * setup.bptt;
    let v = setup.dims.vocab;
    let block = Block {
        batch_size: setup.batch,
        len: setup.bptt,
        inputs: (0..n).map(|_| rng.below(v) as u32).collect(),
        targets: (0..n).map(|_| rng.below(v) as u32).collect(),
    };
    let mut state = HiddenState::for_model(&params, setup.batch);
    for l in 0..setup.dims.layers {
        state.h[l].iter_mut().for_each(|x| *x = rng.uniform_range(-0.5, 0.5));
        state.c[l].iter_mut().for_each(|x| *x = rng.uniform_range(-0.5, 0.5));
    }

    let (_, mut grads, _) = loss_and_grads(&params, &block, &state, Dropout::Off)?;
    if corrupt {
        grads.layers[0].u.as_mut_slice().iter_mut().for_each(|g| *g *= 2.0);
    }
    let mut probe = params.clone();
    let f = |x: &[f64]| {
        probe.set_flat(x);
        loss_and_grads(&probe, &block, &state, Dropout::Off).map(|r| r.0).unwrap_or(f64::NAN)
    };
    Ok(finite_diff_check(f, &params.to_flat(), &grads.to_flat(), setup.eps))
}
