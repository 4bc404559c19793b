use serde::{Deserialize, Serialize};

use crate::ctensor::Complex;
use crate::error::{Error, Result};
use crate::layers::{AttentionActivation, HiddenActivation, NormKind, RegConfig, RegKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttnKind {
    SplitSoftmax,
    ModSoftmax,
    RealSoftmax,
    SqZrelu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HiddenKind {
    SplitRelu,
    SplitGelu,
    Zrelu,
    Argrelu,
    Modrelu,
    Modgelu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormName {
    SplitLn,
    ComplexLn,
    MixedLn,
    UnitNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegName {
    None,
    AttOrtho,
    DenseOrtho,
    BothOrtho,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitScheme {
    SplitNormal,
    Unitary,
    RayleighGlorot,
}

/// Architecture hyperparameters. Every field is a config-file key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub d_hidden: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub max_seq_len: usize,
    pub attn_activation: AttnKind,
    /// Complex bias `[re, im]` of the squared-zReLU attention.
    pub attn_bias: [f64; 2],
    pub hidden_activation: HiddenKind,
    pub argrelu_theta: [f64; 2],
    pub modrelu_bias: f64,
    pub norm_kind: NormName,
    pub dropout_p: f64,
    pub tie_mlm_embeddings: bool,
    pub remove_q_o_projections: bool,
    pub n_classes: usize,
    pub init: InitScheme,
    /// Per-channel standard deviation of the split-normal init.
    pub init_std: f64,
    pub reg_kind: RegName,
    pub reg_lambda: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            vocab_size: 512,
            d_model: 32,
            d_hidden: 16,
            n_layers: 2,
            n_heads: 2,
            max_seq_len: 32,
            attn_activation: AttnKind::ModSoftmax,
            attn_bias: [0.1, 0.1],
            hidden_activation: HiddenKind::SplitGelu,
            argrelu_theta: [0.0, std::f64::consts::FRAC_PI_2],
            modrelu_bias: -0.1,
            norm_kind: NormName::MixedLn,
            dropout_p: 0.1,
            tie_mlm_embeddings: false,
            remove_q_o_projections: false,
            n_classes: 2,
            init: InitScheme::SplitNormal,
            init_std: 0.1,
            reg_kind: RegName::None,
            reg_lambda: 0.0,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return fail(format!("d_model {} is not divisible by n_heads {}", self.d_model, self.n_heads));
        }
        if self.max_seq_len < 2 {
            return fail(format!("max_seq_len must be at least 2, got {}", self.max_seq_len));
        }
        if self.vocab_size <= crate::data::N_SPECIAL {
            return fail(format!("vocab_size {} leaves no room beyond the special tokens", self.vocab_size));
        }
        if self.d_model < 2 || self.d_hidden == 0 || self.n_layers == 0 {
            return fail("d_model ≥ 2, d_hidden ≥ 1 and n_layers ≥ 1 are required".into());
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return fail(format!("dropout_p {} outside [0, 1)", self.dropout_p));
        }
        if self.n_classes < 2 {
            return fail(format!("n_classes must be at least 2, got {}", self.n_classes));
        }
        if !(self.init_std > 0.0) {
            return fail(format!("init_std must be positive, got {}", self.init_std));
        }
        self.hidden().validate()?;
        self.reg().validate()
    }

    pub fn attention(&self) -> AttentionActivation {
        match self.attn_activation {
            AttnKind::SplitSoftmax => AttentionActivation::SplitSoftmax,
            AttnKind::ModSoftmax => AttentionActivation::ModSoftmax,
            AttnKind::RealSoftmax => AttentionActivation::RealSoftmax,
            AttnKind::SqZrelu => AttentionActivation::SquaredZReLU {
                bias: Complex::new(self.attn_bias[0], self.attn_bias[1]),
            },
        }
    }

    pub fn hidden(&self) -> HiddenActivation {
        match self.hidden_activation {
            HiddenKind::SplitRelu => HiddenActivation::SplitReLU,
            HiddenKind::SplitGelu => HiddenActivation::SplitGeLU,
            HiddenKind::Zrelu => HiddenActivation::ZReLU,
            HiddenKind::Argrelu => HiddenActivation::ArgReLU {
                theta1: self.argrelu_theta[0],
                theta2: self.argrelu_theta[1],
            },
            HiddenKind::Modrelu => HiddenActivation::ModReLU { bias: self.modrelu_bias },
            HiddenKind::Modgelu => HiddenActivation::ModGeLU,
        }
    }

    pub fn norm(&self) -> NormKind {
        match self.norm_kind {
            NormName::SplitLn => NormKind::SplitLN,
            NormName::ComplexLn => NormKind::ComplexLN,
            NormName::MixedLn => NormKind::MixedLN,
            NormName::UnitNorm => NormKind::UnitNorm,
        }
    }

    pub fn reg(&self) -> RegConfig {
        let kind = match self.reg_kind {
            RegName::None => RegKind::None,
            RegName::AttOrtho => RegKind::AttOrtho,
            RegName::DenseOrtho => RegKind::DenseOrtho,
            RegName::BothOrtho => RegKind::BothOrtho,
        };
        RegConfig { kind, lambda: self.reg_lambda }
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
    fn rejects_bad_shapes() {
        let bad = ModelConfig { n_heads: 3, ..ModelConfig::default() };
        assert!(bad.validate().is_err());
        let bad = ModelConfig { max_seq_len: 1, ..ModelConfig::default() };
        assert!(bad.validate().is_err());
        let bad = ModelConfig { modrelu_bias: 0.5, hidden_activation: HiddenKind::Modrelu, ..ModelConfig::default() };
        assert!(bad.validate().is_err());
    }
}
