use std::collections::HashMap;

use ndarray::Array2;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Handle into a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

/// Learning-rate group. Vision covers the encoder and adapter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LrGroup {
    Main,
    Vision,
}

#[derive(Debug, Clone)]
struct Param {
    name: String,
    value: Array2<f64>,
    group: LrGroup,
    frozen: bool,
}

/// Named parameter blocks keyed by module path.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Param>,
    by_name: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, value: Array2<f64>, group: LrGroup) -> Result<ParamId> {
        if self.by_name.contains_key(name) {
            return Err(Error::Config(format!("duplicate parameter {name}")));
        }
        let id = ParamId(self.params.len());
        self.params.push(Param {
            name: name.to_string(),
            value,
            group,
            frozen: false,
        });
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn get(&self, id: ParamId) -> &Array2<f64> {
        &self.params[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Array2<f64> {
        &mut self.params[id.0].value
    }

    pub fn group(&self, id: ParamId) -> LrGroup {
        self.params[id.0].group
    }

    pub fn is_frozen(&self, id: ParamId) -> bool {
        self.params[id.0].frozen
    }

    pub fn set_frozen(&mut self, id: ParamId, frozen: bool) {
        self.params[id.0].frozen = frozen;
    }

    /// Freezes or thaws every parameter whose name starts with `prefix`.
    pub fn set_frozen_prefix(&mut self, prefix: &str, frozen: bool) {
        for p in &mut self.params {
            if p.name.starts_with(prefix) {
                p.frozen = frozen;
            }
        }
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// SHA-256 over names, shapes and values of parameters under `prefix`.
    pub fn digest_prefix(&self, prefix: &str) -> String {
        let mut h = Sha256::new();
        for p in self.params.iter().filter(|p| p.name.starts_with(prefix)) {
            h.update((p.name.len() as u64).to_le_bytes());
            h.update(p.name.as_bytes());
            h.update((p.value.nrows() as u64).to_le_bytes());
            h.update((p.value.ncols() as u64).to_le_bytes());
            for v in p.value.iter() {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    pub fn digest(&self) -> String {
        self.digest_prefix("")
    }

    /// `(name, value)` blocks in insertion order.
    pub fn blocks(&self) -> impl Iterator<Item = (&str, &Array2<f64>)> {
        self.params.iter().map(|p| (p.name.as_str(), &p.value))
    }

    /// Overwrites values by name; every stored block must be supplied with
    /// a matching shape.
    pub fn load_blocks(&mut self, blocks: &HashMap<String, Array2<f64>>) -> Result<()> {
        for p in &mut self.params {
            let v = blocks
                .get(&p.name)
                .ok_or_else(|| Error::Format(format!("checkpoint lacks parameter {}", p.name)))?;
            if v.dim() != p.value.dim() {
                return Err(Error::Format(format!(
                    "parameter {} has shape {:?}, checkpoint has {:?}",
                    p.name,
                    p.value.dim(),
                    v.dim()
                )));
            }
            p.value.assign(v);
        }
        if blocks.len() != self.params.len() {
            return Err(Error::Format(format!(
                "checkpoint has {} parameters, model expects {}",
                blocks.len(),
                self.params.len()
            )));
        }
        Ok(())
    }
}

/// Glorot-uniform matrix.
pub fn glorot(rows: usize, cols: usize, rng: &mut Rng) -> Array2<f64> {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-a..a))
}

/// He-normal matrix for rectifier layers, `fan_in` inputs.
pub fn he_normal(rows: usize, cols: usize, fan_in: usize, rng: &mut Rng) -> Array2<f64> {
    let sd = (2.0 / fan_in as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || {
        // Box–Muller
        let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
        let u2: f64 = rng.random();
        sd * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    })
}

/// Gradients by parameter, as produced by a backward pass.
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    pub(crate) by_param: HashMap<ParamId, Array2<f64>>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Array2<f64>> {
        self.by_param.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Array2<f64>)> {
        self.by_param.iter().map(|(&k, v)| (k, v))
    }

    pub fn is_finite(&self) -> bool {
        self.by_param.values().all(|g| g.iter().all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr_main: f64,
    pub lr_vision: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr_main: 1e-3,
            lr_vision: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Adam with L2 weight decay folded into the gradient.
#[derive(Debug, Clone)]
pub struct Adam {
    pub cfg: AdamConfig,
    t: i32,
    m: HashMap<ParamId, Array2<f64>>,
    v: HashMap<ParamId, Array2<f64>>,
}

impl Adam {
    pub fn new(cfg: AdamConfig) -> Self {
        Adam {
            cfg,
            t: 0,
            m: HashMap::new(),
            v: HashMap::new(),
        }
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) {
        self.t += 1;
        let c = self.cfg;
        let bc1 = 1.0 - c.beta1.powi(self.t);
        let bc2 = 1.0 - c.beta2.powi(self.t);
        let mut ids: Vec<ParamId> = grads.by_param.keys().copied().collect();
        ids.sort();
        for id in ids {
            if store.is_frozen(id) {
                continue;
            }
            let lr = match store.group(id) {
                LrGroup::Main => c.lr_main,
                LrGroup::Vision => c.lr_vision,
            };
            if lr == 0.0 {
                continue;
            }
            let mut g = grads.by_param[&id].clone();
            if c.weight_decay > 0.0 {
                g.scaled_add(c.weight_decay, store.get(id));
            }
            let m = self.m.entry(id).or_insert_with(|| Array2::zeros(g.dim()));
            let v = self.v.entry(id).or_insert_with(|| Array2::zeros(g.dim()));
            m.zip_mut_with(&g, |m, &g| *m = c.beta1 * *m + (1.0 - c.beta1) * g);
            v.zip_mut_with(&g, |v, &g| *v = c.beta2 * *v + (1.0 - c.beta2) * g * g);
            let p = store.get_mut(id);
            ndarray::Zip::from(p).and(&*m).and(&*v).for_each(|p, &m, &v| {
                *p -= lr * (m / bc1) / ((v / bc2).sqrt() + c.eps);
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn duplicate_names_rejected() {
        let mut s = ParamStore::new();
        s.add("a", array![[1.0]], LrGroup::Main).unwrap();
        assert!(s.add("a", array![[1.0]], LrGroup::Main).is_err());
    }

    #[test]
    fn adam_moves_against_gradient_and_skips_frozen() {
        let mut s = ParamStore::new();
        let a = s.add("main.w", array![[1.0, -1.0]], LrGroup::Main).unwrap();
        let b = s.add("vision.w", array![[1.0]], LrGroup::Vision).unwrap();
        s.set_frozen_prefix("vision.", true);
        let mut g = Gradients::default();
        g.by_param.insert(a, array![[2.0, -3.0]]);
        g.by_param.insert(b, array![[5.0]]);
        let before = s.digest_prefix("vision.");
        let mut opt = Adam::new(AdamConfig::default());
        opt.step(&mut s, &g);
        // first Adam step moves each coordinate by lr·sign(g)
        assert!((s.get(a)[[0, 0]] - (1.0 - 1e-3)).abs() < 1e-9);
        assert!((s.get(a)[[0, 1]] - (-1.0 + 1e-3)).abs() < 1e-9);
        assert_eq!(s.digest_prefix("vision."), before);
    }
}
