//! JSON run configuration for `reconstruct`. Every field is optional;
//! explicit command-line flags override file values, and built-in defaults
//! fill whatever remains. Unknown keys are rejected.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algo: Option<String>,
    pub nu: Option<f64>,
    pub lambda0: Option<f64>,
    pub sparsity_frac: Option<f64>,
    pub sparsity_count: Option<usize>,
    pub eta: Option<f64>,
    pub energy_cap: Option<f64>,
    pub inner: Option<usize>,
    pub iters: Option<usize>,
    pub schedule: Option<bool>,
    pub early_stop: Option<f64>,
    pub patch: Option<usize>,
    pub stride: Option<usize>,
    pub wrap: Option<bool>,
    pub kspace: Option<PathBuf>,
    pub mask: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub save_transform: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Overlays `other` (the explicit flags) on top of `self`.
    pub fn overridden_by(mut self, other: RunConfig) -> Self {
        macro_rules! take {
            ($($field:ident),* $(,)?) => {
                $(if other.$field.is_some() { self.$field = other.$field; })*
            };
        }
        take!(
            algo,
            nu,
            lambda0,
            sparsity_frac,
            sparsity_count,
            eta,
            energy_cap,
            inner,
            iters,
            schedule,
            early_stop,
            patch,
            stride,
            wrap,
            kspace,
            mask,
            reference,
            out,
            trace,
            save_transform,
        );
        self
    }
}
