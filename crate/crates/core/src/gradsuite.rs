//! Finite-difference checks of every layer family, shared by the CLI and
//! the test suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{grad_check_fn, GradCheckReport, Layer, ParamId, ParamStore, DEFAULT_STEP};
use crate::ctensor::{CTensor, Complex};
use crate::error::{Error, Result};
use crate::layers::heads::{mlm_loss, softmax_cross_entropy};
use crate::layers::{AttentionActivation, Dense, HiddenActivation, MeasurementHead, MlmHead, MultiHeadAttention, Norm, NormKind, NspHead, UnitaryLayer};
use crate::models::ModelConfig;

/// Tolerance for the unitary layer, whose backward goes through an
/// eigendecomposition.
pub const UNITARY_TOL: f64 = 1e-4;
pub const LAYER_TOL: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: String,
    pub seed: u64,
    pub tolerance: f64,
    pub report: GradCheckReport,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.report.passes(self.tolerance)
    }
}

/// Layer names understood by [`run_suite`].
pub const SUITE: [&str; 19] = [
    "dense",
    "attention-split-softmax",
    "attention-mod-softmax",
    "attention-real-softmax",
    "attention-sq-zrelu",
    "activation-split-relu",
    "activation-split-gelu",
    "activation-zrelu",
    "activation-argrelu",
    "activation-modrelu",
    "activation-modgelu",
    "norm-split-ln",
    "norm-complex-ln",
    "norm-mixed-ln",
    "norm-unit-norm",
    "mlm-head",
    "nsp-head",
    "measurement-head",
    "unitary",
];

fn rand_t(shape: &[usize], scale: f64, rng: &mut ChaCha8Rng) -> CTensor {
    CTensor::from_fn(shape, |_| Complex::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale)))
}

fn randomize(store: &mut ParamStore, rng: &mut ChaCha8Rng) {
    let ids: Vec<ParamId> = store.ids().collect();
    for id in ids {
        let shape = store.value(id).shape().to_vec();
        *store.value_mut(id) = rand_t(&shape, 0.5, rng);
        store.get_mut(id).project();
    }
}

/// `L = Σ|layer(x) − r|²` for a fixed random `r`, sensitive to phase.
fn probe_layer<L: Layer>(layer: &L, store: &mut ParamStore, x: &CTensor, rng: &mut ChaCha8Rng) -> Result<GradCheckReport> {
    let r = rand_t(layer.forward(store, x)?.0.shape(), 1.0, rng);
    let params = layer.params();
    grad_check_fn(store, &params, x, DEFAULT_STEP, |store, x, need| {
        let (y, c) = layer.forward(store, x)?;
        let diff = y.sub(&r)?;
        let loss = diff.norm_sqr();
        if !need {
            return Ok((loss, None));
        }
        Ok((loss, Some(layer.backward(store, &c, &diff)?)))
    })
}

fn attention_kind(name: &str, cfg: &ModelConfig) -> Option<AttentionActivation> {
    Some(match name {
        "attention-split-softmax" => AttentionActivation::SplitSoftmax,
        "attention-mod-softmax" => AttentionActivation::ModSoftmax,
        "attention-real-softmax" => AttentionActivation::RealSoftmax,
        "attention-sq-zrelu" => AttentionActivation::SquaredZReLU {
            bias: Complex::new(cfg.attn_bias[0], cfg.attn_bias[1]),
        },
        _ => return None,
    })
}

fn activation_kind(name: &str, cfg: &ModelConfig) -> Option<HiddenActivation> {
    Some(match name {
        "activation-split-relu" => HiddenActivation::SplitReLU,
        "activation-split-gelu" => HiddenActivation::SplitGeLU,
        "activation-zrelu" => HiddenActivation::ZReLU,
        "activation-argrelu" => HiddenActivation::ArgReLU {
            theta1: cfg.argrelu_theta[0],
            theta2: cfg.argrelu_theta[1],
        },
        "activation-modrelu" => HiddenActivation::ModReLU { bias: cfg.modrelu_bias },
        "activation-modgelu" => HiddenActivation::ModGeLU,
        _ => return None,
    })
}

fn norm_kind(name: &str) -> Option<NormKind> {
    Some(match name {
        "norm-split-ln" => NormKind::SplitLN,
        "norm-complex-ln" => NormKind::ComplexLN,
        "norm-mixed-ln" => NormKind::MixedLN,
        "norm-unit-norm" => NormKind::UnitNorm,
        _ => return None,
    })
}

/// One check of `name` at the widths of `cfg` (sequence length 4).
pub fn check_layer(name: &str, cfg: &ModelConfig, seed: u64) -> Result<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let d = cfg.d_model;
    let seq = 4;
    let report = if name == "dense" {
        let layer = Dense::register(&mut store, "dense", d, cfg.d_hidden, true)?;
        randomize(&mut store, &mut rng);
        probe_layer(&layer, &mut store, &rand_t(&[seq, d], 1.0, &mut rng), &mut rng)?
    } else if let Some(act) = attention_kind(name, cfg) {
        let layer = MultiHeadAttention::register(&mut store, "attn", d, cfg.n_heads, act, !cfg.remove_q_o_projections)?;
        randomize(&mut store, &mut rng);
        probe_layer(&layer, &mut store, &rand_t(&[seq, d], 1.0, &mut rng), &mut rng)?
    } else if let Some(act) = activation_kind(name, cfg) {
        probe_layer(&act, &mut store, &rand_t(&[seq, d], 1.5, &mut rng), &mut rng)?
    } else if let Some(kind) = norm_kind(name) {
        let layer = Norm::register(&mut store, "norm", kind, d)?;
        randomize(&mut store, &mut rng);
        probe_layer(&layer, &mut store, &rand_t(&[seq, d], 2.0, &mut rng), &mut rng)?
    } else if name == "unitary" {
        let layer = UnitaryLayer::register(&mut store, "unitary", d)?;
        randomize(&mut store, &mut rng);
        probe_layer(&layer, &mut store, &rand_t(&[seq, d], 1.0, &mut rng), &mut rng)?
    } else if name == "mlm-head" {
        let head = MlmHead::register(&mut store, "mlm", d, cfg.vocab_size.min(50), HiddenActivation::SplitGeLU, None)?;
        randomize(&mut store, &mut rng);
        let vocab = cfg.vocab_size.min(50);
        let labels: Vec<usize> = (0..2).map(|_| rng.random_range(0..vocab)).collect();
        let positions = [1, 3];
        let params = head.params();
        grad_check_fn(&mut store, &params, &rand_t(&[seq, d], 1.0, &mut rng), DEFAULT_STEP, |store, x, need| {
            let (logits, c) = head.forward(store, x, &positions)?;
            let (loss, g) = mlm_loss(&logits, &labels);
            Ok((loss, if need { Some(head.backward(store, &c, &g)?) } else { None }))
        })?
    } else if name == "nsp-head" {
        let head = NspHead::register(&mut store, "nsp", d)?;
        randomize(&mut store, &mut rng);
        let label = rng.random_range(0..2);
        let params = head.params();
        grad_check_fn(&mut store, &params, &rand_t(&[d], 1.0, &mut rng), DEFAULT_STEP, |store, x, need| {
            let (p, c) = head.forward(store, x)?;
            let loss = -p[label].ln();
            Ok((loss, if need { Some(head.backward(store, &c, label, 1.0)?.1) } else { None }))
        })?
    } else if name == "measurement-head" {
        // the head takes unit states, so the probe normalizes a free input first
        let head = MeasurementHead::register(&mut store, "cls", d, cfg.n_classes, true)?;
        randomize(&mut store, &mut rng);
        let label = rng.random_range(0..cfg.n_classes);
        let unit = Norm::plain(NormKind::UnitNorm);
        let params = head.params();
        grad_check_fn(&mut store, &params, &rand_t(&[1, d], 1.0, &mut rng), DEFAULT_STEP, |store, x, need| {
            let (psi, nc) = unit.forward(store, x)?;
            let (logits, c) = head.forward(store, &psi)?;
            let (loss, g) = softmax_cross_entropy(&logits[0], label);
            if !need {
                return Ok((loss, None));
            }
            let gp = head.backward(store, &c, &[g])?;
            Ok((loss, Some(unit.backward(store, &nc, &gp)?)))
        })?
    } else {
        return Err(Error::Config(format!("unknown layer `{name}`; known: {}", SUITE.join(", "))));
    };
    let tolerance = if name == "unitary" { UNITARY_TOL } else { LAYER_TOL };
    Ok(SuiteResult {
        name: name.to_string(),
        seed,
        tolerance,
        report,
    })
}

/// Every suite entry (or just `only`) over the given seeds.
pub fn run_suite(cfg: &ModelConfig, only: Option<&str>, seeds: &[u64]) -> Result<Vec<SuiteResult>> {
    let names: Vec<&str> = match only {
        Some(n) => vec![n],
        None => SUITE.to_vec(),
    };
    let mut out = Vec::new();
    for name in names {
        for &seed in seeds {
            out.push(check_layer(name, cfg, seed)?);
        }
    }
    Ok(out)
}
