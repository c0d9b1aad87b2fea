//! Analysis experiments: structural-feature reproduction from VSFs,
//! substructure counting, the isomorphic-link demo, positional-encoding
//! baselines and ablation grids.

mod ablation;
mod isomorphic;
mod pe_baseline;
mod reproduction;
mod substructure;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use ablation::{ablation_driver, apply_axis, AblationAxis};
pub use isomorphic::{isomorphic_pair_demo, DemoConfig};
pub use pe_baseline::{pe_baseline_experiment, PeBaselineConfig};
pub use reproduction::{
    pair_targets, reproduction_ratio, sf_success, success_ratio, ProbeInput, RrConfig, SfTarget, RR_CRITERION,
};
pub use substructure::{
    normalized_mse, substructure_dataset, substructure_experiment, SubstructureConfig, SynthDataset, NMSE_CRITERION,
};

/// One labeled score. `value` is `None` when the quantity is undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeScore {
    pub value: Option<f64>,
    pub criterion: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ProbeScore {
    pub fn defined(value: f64, criterion: &str) -> Self {
        ProbeScore {
            value: Some(value),
            criterion: criterion.to_string(),
            note: None,
        }
    }

    pub fn undefined(criterion: &str, why: &str) -> Self {
        ProbeScore {
            value: None,
            criterion: criterion.to_string(),
            note: Some(why.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub probe: String,
    pub config: serde_json::Value,
    pub scores: BTreeMap<String, ProbeScore>,
    pub notes: Vec<String>,
}

impl ProbeReport {
    pub fn new(probe: &str, config: &impl Serialize) -> Self {
        ProbeReport {
            probe: probe.to_string(),
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
            scores: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.scores.get(name).and_then(|s| s.value)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        crate::train::write_json(self, path)
    }
}
