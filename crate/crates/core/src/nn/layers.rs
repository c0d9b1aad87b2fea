use ndarray::Array2;

use super::params::{glorot, LrGroup, ParamId, ParamStore};
use super::tape::{Tape, Var};
use crate::error::Result;
use crate::rng::Rng;

/// Weight initialization for a [`Linear`] layer. Biases start at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    Glorot,
    Zero,
    /// Requires a square weight.
    Identity,
}

/// `x · W + b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub w: ParamId,
    pub b: Option<ParamId>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        bias: bool,
        init: Init,
        group: LrGroup,
        rng: &mut Rng,
    ) -> Result<Self> {
        let w = match init {
            Init::Glorot => glorot(in_dim, out_dim, rng),
            Init::Zero => Array2::zeros((in_dim, out_dim)),
            Init::Identity => {
                assert_eq!(in_dim, out_dim, "identity init needs a square weight");
                Array2::eye(in_dim)
            }
        };
        let w = store.add(&format!("{name}.w"), w, group)?;
        let b = if bias {
            Some(store.add(&format!("{name}.b"), Array2::zeros((1, out_dim)), group)?)
        } else {
            None
        };
        Ok(Linear {
            w,
            b,
            in_dim,
            out_dim,
        })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Var {
        let w = tape.param(store, self.w);
        let y = tape.matmul(x, w);
        match self.b {
            Some(b) => {
                let b = tape.param(store, b);
                tape.add_row(y, b)
            }
            None => y,
        }
    }
}

/// Stack of [`Linear`] layers with rectifiers between them and none after
/// the last.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    /// `dims = [in, h1, ..., out]`. `last_init` applies to the final layer.
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        dims: &[usize],
        last_init: Init,
        group: LrGroup,
        rng: &mut Rng,
    ) -> Result<Self> {
        assert!(dims.len() >= 2, "an MLP needs input and output dims");
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, d)| {
                let init = if i == last { last_init } else { Init::Glorot };
                Linear::new(store, &format!("{name}.{i}"), d[0], d[1], true, init, group, rng)
            })
            .collect::<Result<_>>()?;
        Ok(Mlp { layers })
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, mut x: Var) -> Var {
        for (i, l) in self.layers.iter().enumerate() {
            if i > 0 {
                x = tape.relu(x);
            }
            x = l.forward(tape, store, x);
        }
        x
    }
}
