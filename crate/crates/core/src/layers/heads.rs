//! Prediction heads: masked-token logits, the two-state NSP measurement and
//! the unitary measurement classifier.

use crate::autodiff::{pullback_modulus, ParamId, ParamOptions, ParamStore};
use crate::ctensor::{inner, vec_norm, CTensor, Complex};
use crate::error::{domain_err, shape_err, Result};
use crate::layers::activation::HiddenActivation;
use crate::layers::dense::Dense;
use crate::layers::norm::{Norm, NormCache, NormKind};
use crate::layers::unitary::{UnitaryCache, UnitaryLayer};
use crate::autodiff::Layer;

/// Guard on the NSP overlap sum.
pub const NSP_EPS: f64 = 1e-12;
/// Tolerance on the norm of a state entering the measurement head.
pub const UNIT_TOL: f64 = 1e-8;

/// Mean cross-entropy `−ln softmax(logits)[label]` and its gradient.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let s: f64 = e.iter().sum();
    let loss = s.ln() - (logits[label] - max);
    let mut g: Vec<f64> = e.into_iter().map(|v| v / s).collect();
    g[label] -= 1.0;
    (loss, g)
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

// ---------------------------------------------------------------- MLM

/// Where the vocabulary projection comes from.
#[derive(Debug, Clone)]
pub enum MlmDecoder {
    /// Logit `v` is `|⟨h, E_v⟩|` against row `v` of the token embedding table.
    Tied { table: ParamId },
    Dense(Dense),
}

/// `dense → activation → vocabulary projection → modulus`.
#[derive(Debug, Clone)]
pub struct MlmHead {
    pub transform: Dense,
    pub activation: HiddenActivation,
    pub decoder: MlmDecoder,
}

#[derive(Debug, Clone)]
pub struct MlmCache {
    seq: usize,
    positions: Vec<usize>,
    gathered: CTensor,
    pre_act: CTensor,
    transformed: CTensor,
    projected: CTensor,
}

impl MlmHead {
    pub fn register(store: &mut ParamStore, prefix: &str, d: usize, vocab: usize, activation: HiddenActivation, tied_table: Option<ParamId>) -> Result<Self> {
        let transform = Dense::register(store, &format!("{prefix}.transform"), d, d, true)?;
        let decoder = match tied_table {
            Some(table) => MlmDecoder::Tied { table },
            None => MlmDecoder::Dense(Dense::register(store, &format!("{prefix}.decoder"), d, vocab, true)?),
        };
        Ok(Self {
            transform,
            activation,
            decoder,
        })
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut p = self.transform.params();
        match &self.decoder {
            MlmDecoder::Tied { table } => p.push(*table),
            MlmDecoder::Dense(d) => p.extend(d.params()),
        }
        p
    }

    /// Real logits `[positions.len(), vocab]` for the listed rows of `hidden`.
    pub fn forward(&self, store: &ParamStore, hidden: &CTensor, positions: &[usize]) -> Result<(Vec<Vec<f64>>, MlmCache)> {
        let (seq, d) = hidden.dims2()?;
        let mut gathered = CTensor::zeros(&[positions.len(), d]);
        for (i, &p) in positions.iter().enumerate() {
            if p >= seq {
                return shape_err(format!("masked position {p} outside sequence of {seq}"));
            }
            gathered.row_mut(i).copy_from_slice(hidden.row(p));
        }
        let (pre_act, _) = self.transform.forward(store, &gathered)?;
        let transformed = self.activation.forward(&pre_act);
        let projected = match &self.decoder {
            // o_v = Σ_i h_i·conj(E_vi)
            MlmDecoder::Tied { table } => transformed.matmul_nh(store.value(*table))?,
            MlmDecoder::Dense(dec) => dec.forward(store, &transformed)?.0,
        };
        let logits = projected.rows().map(|r| r.iter().map(|z| z.norm()).collect()).collect();
        Ok((
            logits,
            MlmCache {
                seq,
                positions: positions.to_vec(),
                gathered,
                pre_act,
                transformed,
                projected,
            },
        ))
    }

    /// Takes `∂L/∂logits` and returns the cotangent of the full hidden sequence.
    pub fn backward(&self, store: &mut ParamStore, cache: &MlmCache, grad_logits: &[Vec<f64>]) -> Result<CTensor> {
        let (m, v) = cache.projected.dims2()?;
        let mut go = CTensor::zeros(&[m, v]);
        for r in 0..m {
            for (k, (o, &g)) in go.row_mut(r).iter_mut().zip(&grad_logits[r]).enumerate() {
                *o = pullback_modulus(cache.projected[[r, k]], g);
            }
        }
        let gt = match &self.decoder {
            MlmDecoder::Tied { table } => {
                let e = store.value(*table).clone();
                // c_h = C_O·E,  c_E = C_Oᴴ·H
                let ge = go.matmul_hn(&cache.transformed)?;
                store.accumulate(*table, &ge)?;
                go.matmul(&e)?
            }
            MlmDecoder::Dense(dec) => dec.backward(store, &cache.transformed, &go)?,
        };
        let gp = self.activation.backward(&cache.pre_act, &gt)?;
        let gg = self.transform.backward(store, &cache.gathered, &gp)?;
        let d = gg.dims2()?.1;
        let mut gh = CTensor::zeros(&[cache.seq, d]);
        for (i, &p) in cache.positions.iter().enumerate() {
            for (a, &b) in gh.row_mut(p).iter_mut().zip(gg.row(i)) {
                *a += b;
            }
        }
        Ok(gh)
    }
}

/// Mean masked-token cross-entropy and its logit gradient.
pub fn mlm_loss(logits: &[Vec<f64>], labels: &[usize]) -> (f64, Vec<Vec<f64>>) {
    if logits.is_empty() {
        return (0.0, Vec::new());
    }
    let n = logits.len() as f64;
    let mut total = 0.0;
    let grads = logits
        .iter()
        .zip(labels)
        .map(|(l, &y)| {
            let (loss, g) = softmax_cross_entropy(l, y);
            total += loss;
            g.into_iter().map(|v| v / n).collect()
        })
        .collect();
    (total / n, grads)
}

// ---------------------------------------------------------------- NSP

/// Overlap probabilities of a unit state `ψ` against two class states:
/// `s_c = |⟨ψ, φ_c⟩|²`, rescaled to sum to one.
pub fn nsp_probabilities(psi: &[Complex], phi0: &[Complex], phi1: &[Complex]) -> [f64; 2] {
    let s0 = inner(phi0, psi).norm_sqr();
    let s1 = inner(phi1, psi).norm_sqr();
    let total = s0 + s1 + NSP_EPS;
    [s0 / total, s1 / total]
}

/// `dense → unit-normalize → overlap with φ₀, φ₁`; no non-linearity.
#[derive(Debug, Clone)]
pub struct NspHead {
    pub dense: Dense,
    /// `[2, d]`, rows kept at unit norm.
    pub states: ParamId,
}

#[derive(Debug, Clone)]
pub struct NspCache {
    input: CTensor,
    norm: NormCache,
    psi: Vec<Complex>,
    overlaps: [Complex; 2],
}

impl NspHead {
    pub fn register(store: &mut ParamStore, prefix: &str, d: usize) -> Result<Self> {
        let dense = Dense::register(store, &format!("{prefix}.dense"), d, d, true)?;
        let opts = ParamOptions {
            unit_rows: true,
            decay: false,
            ..ParamOptions::default()
        };
        let states = store.add(format!("{prefix}.states"), CTensor::zeros(&[2, d]), opts)?;
        Ok(Self { dense, states })
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut p = self.dense.params();
        p.push(self.states);
        p
    }

    /// Class probabilities for one [CLS] vector `[d]`.
    pub fn forward(&self, store: &ParamStore, cls: &CTensor) -> Result<([f64; 2], NspCache)> {
        let d = cls.len();
        let row = cls.clone().reshape(&[1, d])?;
        let (z, _) = self.dense.forward(store, &row)?;
        let (psi, norm) = Norm::plain(NormKind::UnitNorm).forward_with_cache(store, &z)?;
        let phi = store.value(self.states);
        // o_c = ⟨ψ, φ_c⟩ = Σ conj(ψ_i)·φ_ci
        let overlaps = [inner(phi.row(0), psi.data()), inner(phi.row(1), psi.data())];
        let s = [overlaps[0].norm_sqr(), overlaps[1].norm_sqr()];
        let total = s[0] + s[1] + NSP_EPS;
        Ok((
            [s[0] / total, s[1] / total],
            NspCache {
                input: row,
                norm,
                psi: psi.into_data(),
                overlaps,
            },
        ))
    }

    /// `−ln p_label` for the cached forward pass; returns the loss and the
    /// cotangent of the [CLS] vector.
    pub fn backward(&self, store: &mut ParamStore, cache: &NspCache, label: usize, weight: f64) -> Result<(f64, CTensor)> {
        let s = [cache.overlaps[0].norm_sqr(), cache.overlaps[1].norm_sqr()];
        let total = s[0] + s[1] + NSP_EPS;
        let loss = -(s[label] / total).ln();
        let d = cache.psi.len();
        let phi = store.value(self.states).clone();
        let mut g_psi = vec![Complex::new(0.0, 0.0); d];
        let mut g_phi = CTensor::zeros(&[2, d]);
        for c in 0..2 {
            let mut gs = 1.0 / total;
            if c == label {
                gs -= 1.0 / s[c].max(f64::MIN_POSITIVE);
            }
            let co = cache.overlaps[c] * (gs * weight);
            for i in 0..d {
                g_psi[i] += co.conj() * phi[[c, i]];
                g_phi[[c, i]] = co * cache.psi[i];
            }
        }
        store.accumulate(self.states, &g_phi)?;
        let g_psi = CTensor::from_vec(&[1, d], g_psi)?;
        let gz = Norm::plain(NormKind::UnitNorm).backward_with_cache(store, &cache.norm, &g_psi)?;
        let gx = self.dense.backward(store, &cache.input, &gz)?;
        Ok((loss, gx.reshape(&[d])?))
    }
}

/// Probabilities of the NSP measurement for a [CLS] vector.
pub fn nsp_measurement_head(store: &ParamStore, head: &NspHead, cls_hidden: &CTensor) -> Result<[f64; 2]> {
    Ok(head.forward(store, cls_hidden)?.0)
}

// ---------------------------------------------------------------- measurement classifier

/// Classical evaluation of the measurement classifier: `ψ′ = e^{iH}ψ`,
/// `p = |ψ′|²`, logits `P·p (+ bias)`.
pub fn measurement_cls_head(psi: &[Complex], w: &CTensor, projection: &CTensor, bias: Option<&[f64]>) -> Result<Vec<f64>> {
    let n = vec_norm(psi);
    if (n - 1.0).abs() > UNIT_TOL {
        return domain_err(format!("measurement head input has norm {n}, expected 1"));
    }
    let h = crate::layers::unitary::hermitian_part(w)?;
    let u = crate::ctensor::unitary_exp(&h)?;
    let out = u.matvec(psi)?;
    let p: Vec<f64> = out.iter().map(|z| z.norm_sqr()).collect();
    project_probabilities(&p, projection, bias)
}

/// `logits = P·p (+ bias)` with a real projection stored as a complex tensor.
pub fn project_probabilities(p: &[f64], projection: &CTensor, bias: Option<&[f64]>) -> Result<Vec<f64>> {
    let (classes, d) = projection.dims2()?;
    if d != p.len() {
        return shape_err(format!("projection [{classes}, {d}] vs {} probabilities", p.len()));
    }
    Ok((0..classes)
        .map(|c| {
            let dot: f64 = projection.row(c).iter().zip(p).map(|(w, q)| w.re * q).sum();
            dot + bias.map_or(0.0, |b| b[c])
        })
        .collect())
}

/// Trainable unitary followed by basis measurement and a real projection.
#[derive(Debug, Clone)]
pub struct MeasurementHead {
    pub unitary: UnitaryLayer,
    /// Real `[classes, d]`.
    pub projection: ParamId,
    pub bias: Option<ParamId>,
}

#[derive(Debug, Clone)]
pub struct MeasurementCache {
    unitary: UnitaryCache,
    evolved: CTensor,
    probs: Vec<Vec<f64>>,
}

impl MeasurementHead {
    pub fn register(store: &mut ParamStore, prefix: &str, d: usize, classes: usize, use_bias: bool) -> Result<Self> {
        let unitary = UnitaryLayer::register(store, &format!("{prefix}.unitary"), d)?;
        let projection = store.add(format!("{prefix}.projection"), CTensor::zeros(&[classes, d]), ParamOptions::real())?;
        let bias = if use_bias {
            let opts = ParamOptions {
                decay: false,
                ..ParamOptions::real()
            };
            Some(store.add(format!("{prefix}.bias"), CTensor::zeros(&[classes]), opts)?)
        } else {
            None
        };
        Ok(Self {
            unitary,
            projection,
            bias,
        })
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut p = vec![self.unitary.weight, self.projection];
        p.extend(self.bias);
        p
    }

    /// Logits for each row of `psi` (`[n, d]`), each row a unit state.
    pub fn forward(&self, store: &ParamStore, psi: &CTensor) -> Result<(Vec<Vec<f64>>, MeasurementCache)> {
        let (n, d) = psi.dims2()?;
        for r in 0..n {
            let norm = vec_norm(psi.row(r));
            if (norm - 1.0).abs() > UNIT_TOL {
                return domain_err(format!("measurement head input row {r} has norm {norm}, expected 1"));
            }
        }
        let (evolved, ucache) = self.unitary.forward(store, psi)?;
        let bias: Option<Vec<f64>> = self.bias.map(|b| store.value(b).re());
        let mut probs = Vec::with_capacity(n);
        let mut logits = Vec::with_capacity(n);
        for r in 0..n {
            let p: Vec<f64> = evolved.row(r).iter().map(|z| z.norm_sqr()).collect();
            logits.push(project_probabilities(&p, store.value(self.projection), bias.as_deref())?);
            probs.push(p);
        }
        debug_assert_eq!(evolved.dims2()?.1, d);
        Ok((
            logits,
            MeasurementCache {
                unitary: ucache,
                evolved,
                probs,
            },
        ))
    }

    /// Takes `∂L/∂logits` per row; returns the cotangent of `psi`.
    pub fn backward(&self, store: &mut ParamStore, cache: &MeasurementCache, grad_logits: &[Vec<f64>]) -> Result<CTensor> {
        let proj = store.value(self.projection).clone();
        let (classes, d) = proj.dims2()?;
        let n = cache.probs.len();
        let mut gp_mat = CTensor::zeros(&[classes, d]);
        let mut gb = CTensor::zeros(&[classes]);
        let mut g_evolved = CTensor::zeros(&[n, d]);
        for r in 0..n {
            let g = &grad_logits[r];
            for c in 0..classes {
                // real parameter: cotangent is half the plain derivative
                gb.data_mut()[c] += Complex::new(0.5 * g[c], 0.0);
                for j in 0..d {
                    gp_mat[[c, j]] += Complex::new(0.5 * g[c] * cache.probs[r][j], 0.0);
                }
            }
            for j in 0..d {
                let gpj: f64 = (0..classes).map(|c| proj[[c, j]].re * g[c]).sum();
                g_evolved[[r, j]] = cache.evolved[[r, j]] * gpj;
            }
        }
        store.accumulate(self.projection, &gp_mat)?;
        if let Some(b) = self.bias {
            store.accumulate(b, &gb)?;
        }
        self.unitary.backward(store, &cache.unitary, &g_evolved)
    }
}
