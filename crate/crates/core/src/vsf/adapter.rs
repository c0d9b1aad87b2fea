use ndarray::Array2;

use crate::error::{Error, Result};
use crate::nn::{Init, Linear, LrGroup, ParamStore, Tape, Var};
use crate::rng::Rng;

/// Two affine layers with one rectifier between them, `S → S/2 → S_out`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adapter {
    pub l1: Linear,
    pub l2: Linear,
    pub activation: bool,
}

impl Adapter {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        s: usize,
        s_out: usize,
        last_init: Init,
        rng: &mut Rng,
    ) -> Result<Self> {
        let hidden = (s / 2).max(1);
        Ok(Adapter {
            l1: Linear::new(store, &format!("{name}.0"), s, hidden, true, Init::Glorot, LrGroup::Vision, rng)?,
            l2: Linear::new(store, &format!("{name}.1"), hidden, s_out, true, last_init, LrGroup::Vision, rng)?,
            activation: true,
        })
    }

    /// Identity weights, no rectifier: passes its input through unchanged.
    pub fn identity(store: &mut ParamStore, name: &str, s: usize, rng: &mut Rng) -> Result<Self> {
        Ok(Adapter {
            l1: Linear::new(store, &format!("{name}.0"), s, s, true, Init::Identity, LrGroup::Vision, rng)?,
            l2: Linear::new(store, &format!("{name}.1"), s, s, true, Init::Identity, LrGroup::Vision, rng)?,
            activation: false,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.l1.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.l2.out_dim
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, v: Var) -> Var {
        let h = self.l1.forward(tape, store, v);
        let h = if self.activation { tape.relu(h) } else { h };
        self.l2.forward(tape, store, h)
    }

    /// Applies the adapter to the rows of `v` outside any training step.
    pub fn adapt(&self, store: &ParamStore, v: &Array2<f64>) -> Result<Array2<f64>> {
        if v.ncols() != self.in_dim() {
            return Err(Error::arg(format!(
                "adapter expects {} features, got {}",
                self.in_dim(),
                v.ncols()
            )));
        }
        let mut tape = Tape::new();
        let x = tape.constant(v.clone());
        let y = self.forward(&mut tape, store, x);
        Ok(tape.value(y).clone())
    }
}
