use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::nn::{Init, Linear, LrGroup, Mlp, ParamId, ParamStore, Tape, Var};
use crate::rng::Rng;

/// How visual features are fused with graph features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Attention,
    Concat,
    Weighted,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Attention, Strategy::Concat, Strategy::Weighted];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Attention => "attention",
            Strategy::Concat => "concat",
            Strategy::Weighted => "weighted",
        }
    }
}

/// Stored δ that makes GVN weighting start at the pure MPNN prediction.
pub const GVN_DELTA_RAW_INIT: f64 = -40.0;
/// Stored δ that makes E-GVN weighting start at the raw node attributes.
pub const EGVN_DELTA_RAW_INIT: f64 = 40.0;

/// `sigmoid(MLP(y_u ⊙ y_v))`. The first layer optionally carries extra
/// zero-initialized rows for concatenated visual features.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Readout {
    w0: ParamId,
    b0: ParamId,
    w0_vis: Option<ParamId>,
    tail: Vec<Linear>,
}

impl Readout {
    /// `dims = [F′, hidden..., 1]`.
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        dims: &[usize],
        vis_in: usize,
        last_init: Init,
        rng: &mut Rng,
    ) -> Result<Self> {
        assert!(dims.len() >= 2 && *dims.last().unwrap() == 1, "readout ends in one unit");
        let first = Linear::new(
            store,
            &format!("{name}.0"),
            dims[0],
            dims[1],
            true,
            if dims.len() == 2 { last_init } else { Init::Glorot },
            LrGroup::Main,
            rng,
        )?;
        let w0_vis = if vis_in > 0 {
            Some(store.add(&format!("{name}.0.w_vis"), Array2::zeros((vis_in, dims[1])), LrGroup::Main)?)
        } else {
            None
        };
        let tail = if dims.len() > 2 {
            Mlp::new(store, &format!("{name}.tail"), &dims[1..], last_init, LrGroup::Main, rng)?.layers
        } else {
            Vec::new()
        };
        Ok(Readout {
            w0: first.w,
            b0: first.b.unwrap(),
            w0_vis,
            tail,
        })
    }

    /// Width of one endpoint's input, visual part included.
    pub fn input_width(&self, store: &ParamStore) -> usize {
        store.get(self.w0).nrows() + self.w0_vis.map_or(0, |v| store.get(v).nrows())
    }

    /// Link probabilities `q × 1`. With `vis`, each endpoint is `y ‖ vis`.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, yu: Var, yv: Var, vis: Option<Var>) -> Var {
        let (mut a, mut b) = (yu, yv);
        let mut w = tape.param(store, self.w0);
        if let (Some(v), Some(wv)) = (vis, self.w0_vis) {
            a = tape.concat_cols(&[yu, v]);
            b = tape.concat_cols(&[yv, v]);
            let wv = tape.param(store, wv);
            w = tape.concat_rows(&[w, wv]);
        }
        let z = tape.mul(a, b);
        let z = tape.matmul(z, w);
        let b0 = tape.param(store, self.b0);
        let mut h = tape.add_row(z, b0);
        for l in &self.tail {
            h = tape.relu(h);
            h = l.forward(tape, store, h);
        }
        tape.sigmoid(h)
    }
}

/// Single-token cross-attention realized as a gated residual:
/// `out = base + σ([base; ṽ]·w_g + b_g) · (ṽ·W_v)` with `ṽ = proj(vis)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GatedInjection {
    pub proj: Linear,
    pub gate: Linear,
    pub inject: Linear,
}

impl GatedInjection {
    pub fn new(store: &mut ParamStore, name: &str, vis_dim: usize, dim: usize, rng: &mut Rng) -> Result<Self> {
        Ok(GatedInjection {
            proj: Linear::new(store, &format!("{name}.proj"), vis_dim, dim, true, Init::Glorot, LrGroup::Main, rng)?,
            gate: Linear::new(store, &format!("{name}.gate"), 2 * dim, 1, true, Init::Glorot, LrGroup::Main, rng)?,
            inject: Linear::new(store, &format!("{name}.inject"), dim, dim, false, Init::Zero, LrGroup::Main, rng)?,
        })
    }

    /// `vt` is the already projected visual token.
    pub fn apply(&self, tape: &mut Tape, store: &ParamStore, base: Var, vt: Var) -> Var {
        let both = tape.concat_cols(&[base, vt]);
        let g = self.gate.forward(tape, store, both);
        let g = tape.sigmoid(g);
        let inj = self.inject.forward(tape, store, vt);
        let inj = tape.mul_col(inj, g);
        tape.add(base, inj)
    }
}

/// Post-MPNN fusion for GVN.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GvnIntegration {
    Attention(GatedInjection),
    /// Visual rows live in the readout.
    Concat,
    Weighted { delta: ParamId, vdecoder: Mlp },
}

impl GvnIntegration {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        strategy: Strategy,
        s: usize,
        f_out: usize,
        vdecoder_hidden: usize,
        delta_raw: Option<f64>,
        rng: &mut Rng,
    ) -> Result<Self> {
        Ok(match strategy {
            Strategy::Attention => GvnIntegration::Attention(GatedInjection::new(store, "integrate", s, f_out, rng)?),
            Strategy::Concat => GvnIntegration::Concat,
            Strategy::Weighted => GvnIntegration::Weighted {
                delta: store.add(
                    "integrate.delta",
                    Array2::from_elem((1, 1), delta_raw.unwrap_or(GVN_DELTA_RAW_INIT)),
                    LrGroup::Main,
                )?,
                vdecoder: Mlp::new(
                    store,
                    "integrate.vdecoder",
                    &[s, vdecoder_hidden, vdecoder_hidden, 1],
                    Init::Glorot,
                    LrGroup::Main,
                    rng,
                )?,
            },
        })
    }

    pub fn strategy(&self) -> Strategy {
        match self {
            GvnIntegration::Attention(_) => Strategy::Attention,
            GvnIntegration::Concat => Strategy::Concat,
            GvnIntegration::Weighted { .. } => Strategy::Weighted,
        }
    }

    /// Link probabilities from gathered endpoint rows and per-link VSFs.
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        readout: &Readout,
        yu: Var,
        yv: Var,
        vsf: Var,
    ) -> Var {
        match self {
            GvnIntegration::Attention(inj) => {
                let vt = inj.proj.forward(tape, store, vsf);
                let yu = inj.apply(tape, store, yu, vt);
                let yv = inj.apply(tape, store, yv, vt);
                readout.forward(tape, store, yu, yv, None)
            }
            GvnIntegration::Concat => readout.forward(tape, store, yu, yv, Some(vsf)),
            GvnIntegration::Weighted { delta, vdecoder } => {
                let d = tape.param(store, *delta);
                let d = tape.sigmoid(d);
                let pv = vdecoder.forward(tape, store, vsf);
                let pv = tape.sigmoid(pv);
                let pm = readout.forward(tape, store, yu, yv, None);
                weighted(tape, d, pv, pm)
            }
        }
    }
}

/// `δ·a + (1−δ)·b`.
fn weighted(tape: &mut Tape, d: Var, a: Var, b: Var) -> Var {
    let one_minus = tape.affine(d, -1.0, 1.0);
    let a = tape.mul_scalar(a, d);
    let b = tape.mul_scalar(b, one_minus);
    tape.add(a, b)
}

/// Pre-MPNN fusion for E-GVN.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EgvnIntegration {
    Attention(GatedInjection),
    /// Visual rows live in the first MPNN layer.
    Concat,
    Weighted { delta: ParamId, phi1: Linear, phi2: Linear },
}

impl EgvnIntegration {
    pub fn new(
        store: &mut ParamStore,
        strategy: Strategy,
        s: usize,
        f: usize,
        delta_raw: Option<f64>,
        rng: &mut Rng,
    ) -> Result<Self> {
        Ok(match strategy {
            Strategy::Attention => EgvnIntegration::Attention(GatedInjection::new(store, "integrate", s, f, rng)?),
            Strategy::Concat => EgvnIntegration::Concat,
            Strategy::Weighted => EgvnIntegration::Weighted {
                delta: store.add(
                    "integrate.delta",
                    Array2::from_elem((1, 1), delta_raw.unwrap_or(EGVN_DELTA_RAW_INIT)),
                    LrGroup::Main,
                )?,
                phi1: Linear::new(store, "integrate.phi1", f, f, true, Init::Identity, LrGroup::Main, rng)?,
                phi2: Linear::new(store, "integrate.phi2", s, f, true, Init::Glorot, LrGroup::Main, rng)?,
            },
        })
    }

    pub fn strategy(&self) -> Strategy {
        match self {
            EgvnIntegration::Attention(_) => Strategy::Attention,
            EgvnIntegration::Concat => Strategy::Concat,
            EgvnIntegration::Weighted { .. } => Strategy::Weighted,
        }
    }

    /// Vision-aware node attributes `x̃`.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var, vt: Var) -> Var {
        match self {
            EgvnIntegration::Attention(inj) => {
                let p = inj.proj.forward(tape, store, vt);
                inj.apply(tape, store, x, p)
            }
            EgvnIntegration::Concat => tape.concat_cols(&[x, vt]),
            EgvnIntegration::Weighted { delta, phi1, phi2 } => {
                let d = tape.param(store, *delta);
                let d = tape.sigmoid(d);
                let a = phi1.forward(tape, store, x);
                let b = phi2.forward(tape, store, vt);
                weighted(tape, d, a, b)
            }
        }
    }
}
