use serde::{Deserialize, Serialize};

use super::ModelError;

/// Hyperparameters and ablation switches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub d_sem: usize,
    pub d_str: usize,
    pub d_model: usize,
    pub n_fusion_layers: usize,
    pub heads: usize,
    /// Hidden width of the fusion feed-forward, as a multiple of `d_model`.
    pub ff_mult: usize,
    pub ae_hidden: usize,
    pub ae_drop_prob: f64,
    pub ae_weight: f64,
    pub mu: f64,
    pub nu: f64,
    pub enable_ca: bool,
    pub enable_aa: bool,
    pub enable_ae: bool,
    pub enable_pp: bool,
    pub seed: u64,
    pub epochs: usize,
    pub lr: f64,
    pub patience: usize,
    /// Fraction of training (graph, pair, node) triples used to fit the
    /// structural similarity regression.
    pub regression_fraction: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_sem: 64,
            d_str: 5,
            d_model: 64,
            n_fusion_layers: 1,
            heads: 1,
            ff_mult: 4,
            ae_hidden: 64,
            ae_drop_prob: 0.1,
            ae_weight: 0.1,
            mu: 0.5,
            nu: 0.5,
            enable_ca: true,
            enable_aa: true,
            enable_ae: true,
            enable_pp: true,
            seed: 0,
            epochs: 30,
            lr: 5e-3,
            patience: 10,
            regression_fraction: 0.05,
        }
    }
}

/// Which single component an ablated configuration removes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ablation {
    Ca,
    Aa,
    Ae,
    Pp,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [Ablation::Ca, Ablation::Aa, Ablation::Ae, Ablation::Pp];

    pub fn label(self) -> &'static str {
        match self {
            Ablation::Ca => "w/o CA",
            Ablation::Aa => "w/o AA",
            Ablation::Ae => "w/o AE",
            Ablation::Pp => "w/o PP",
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Config(m.to_string()));
        if self.d_sem == 0 || self.d_model == 0 || self.ae_hidden == 0 || self.ff_mult == 0 {
            return bad("dimensions must be >= 1");
        }
        if self.d_str != crate::features::STRUCTURAL_DIM {
            return bad("d_str must be 5");
        }
        if self.heads == 0 || self.d_model % self.heads != 0 {
            return bad("heads must divide d_model");
        }
        if self.n_fusion_layers == 0 {
            return bad("n_fusion_layers must be >= 1");
        }
        if !(0.0..1.0).contains(&self.ae_drop_prob) {
            return bad("ae_drop_prob must lie in [0, 1)");
        }
        if self.mu < 0.0 || self.nu < 0.0 || self.ae_weight < 0.0 {
            return bad("loss weights must be >= 0");
        }
        if !(self.lr > 0.0) {
            return bad("lr must be > 0");
        }
        if !(self.regression_fraction > 0.0 && self.regression_fraction <= 1.0) {
            return bad("regression_fraction must lie in (0, 1]");
        }
        Ok(())
    }

    /// Reconstruction weight actually applied to the loss.
    pub fn effective_ae_weight(&self) -> f64 {
        if self.enable_ae {
            self.ae_weight
        } else {
            0.0
        }
    }

    pub fn ablated(&self, which: Ablation) -> Self {
        let mut c = self.clone();
        match which {
            Ablation::Ca => c.enable_ca = false,
            Ablation::Aa => c.enable_aa = false,
            Ablation::Ae => c.enable_ae = false,
            Ablation::Pp => c.enable_pp = false,
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ModelConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = ModelConfig::default();
        c.heads = 3;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::default();
        c.ae_drop_prob = 1.0;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::default();
        c.mu = -0.1;
        assert!(c.validate().is_err());
    }

    #[test]
    fn ablation_switches_one_flag() {
        let c = ModelConfig::default();
        assert!(!c.ablated(Ablation::Ca).enable_ca);
        assert!(!c.ablated(Ablation::Ae).enable_ae);
        assert_eq!(c.ablated(Ablation::Ae).effective_ae_weight(), 0.0);
        assert!(c.ablated(Ablation::Aa).enable_pp);
    }
}
