//! Per-token normalization over the feature axis.
//!
//! * `ComplexLN`: `(z − mean)/σ ∘ a + b` with the complex mean and the real
//!   variance `mean |z − mean|²`.
//! * `SplitLN`: ordinary real layer norm on the real and imaginary channels.
//! * `UnitNorm`: `z/‖z‖₂`, no affine part.
//! * `MixedLN`: `UnitNorm` on the [CLS] row, `ComplexLN` on every other row,
//!   so the [CLS] vector is always a legal pure state.

use crate::autodiff::{Layer, ParamId, ParamOptions, ParamStore};
use crate::ctensor::{CTensor, Complex, ONE, ZERO};
use crate::error::{domain_err, shape_err, Result};

pub const LN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    SplitLN,
    ComplexLN,
    MixedLN,
    UnitNorm,
}

impl NormKind {
    pub fn has_affine(self) -> bool {
        !matches!(self, NormKind::UnitNorm)
    }

    /// Neutral gain: split norms carry one real gain per channel in re/im.
    pub fn unit_gain(self) -> Complex {
        match self {
            NormKind::SplitLN => Complex::new(1.0, 1.0),
            _ => ONE,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum RowMode {
    Complex,
    Split,
    Unit,
}

#[derive(Debug, Clone)]
struct RowCache {
    mode: RowMode,
    /// Normalized row before the affine map. For `Split` the real and
    /// imaginary channels are independent normalized vectors.
    normed: Vec<Complex>,
    /// σ for complex/unit rows; `(σ_re, σ_im)` packed into re/im for split rows.
    sigma: Complex,
}

#[derive(Debug, Clone)]
pub struct NormCache {
    rows: Vec<RowCache>,
    d: usize,
}

/// Normalization layer over `[seq, d]` (or a single `[d]` row).
#[derive(Debug, Clone)]
pub struct Norm {
    pub kind: NormKind,
    pub cls_index: usize,
    pub gain: Option<ParamId>,
    pub bias: Option<ParamId>,
}

impl Norm {
    pub fn register(store: &mut ParamStore, prefix: &str, kind: NormKind, d: usize) -> Result<Self> {
        let (gain, bias) = if kind.has_affine() {
            (
                Some(store.add(format!("{prefix}.gain"), CTensor::full(&[d], kind.unit_gain()), ParamOptions::no_decay())?),
                Some(store.add(format!("{prefix}.bias"), CTensor::zeros(&[d]), ParamOptions::no_decay())?),
            )
        } else {
            (None, None)
        };
        Ok(Self {
            kind,
            cls_index: 0,
            gain,
            bias,
        })
    }

    /// A norm without trainable affine parameters (`a = 1`, `b = 0`).
    pub fn plain(kind: NormKind) -> Self {
        Self {
            kind,
            cls_index: 0,
            gain: None,
            bias: None,
        }
    }

    fn row_mode(&self, r: usize) -> RowMode {
        match self.kind {
            NormKind::ComplexLN => RowMode::Complex,
            NormKind::SplitLN => RowMode::Split,
            NormKind::UnitNorm => RowMode::Unit,
            NormKind::MixedLN if r == self.cls_index => RowMode::Unit,
            NormKind::MixedLN => RowMode::Complex,
        }
    }

    pub fn forward_with_cache(&self, store: &ParamStore, h: &CTensor) -> Result<(CTensor, NormCache)> {
        let d = *h.shape().last().unwrap_or(&0);
        let rows = if d == 0 { 0 } else { h.len() / d };
        if d < 2 && self.kind != NormKind::UnitNorm {
            return domain_err(format!("layer norm needs at least 2 features, got {d}"));
        }
        let gain = self.gain.map(|g| store.value(g).data().to_vec());
        let bias = self.bias.map(|b| store.value(b).data().to_vec());
        if gain.as_ref().is_some_and(|g| g.len() != d) {
            return shape_err(format!("norm gain has {} entries for width {d}", gain.unwrap().len()));
        }
        let mut out = h.clone();
        let mut caches = Vec::with_capacity(rows);
        for r in 0..rows {
            let z = h.row(r);
            let mode = self.row_mode(r);
            let (normed, sigma) = match mode {
                RowMode::Complex => complex_ln_row(z),
                RowMode::Split => split_ln_row(z),
                RowMode::Unit => {
                    let n = z.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                    if n == 0.0 {
                        return domain_err(format!("unit-normalizing a zero vector (row {r})"));
                    }
                    (z.iter().map(|v| v / n).collect(), Complex::new(n, 0.0))
                }
            };
            let orow = out.row_mut(r);
            for j in 0..d {
                orow[j] = match mode {
                    RowMode::Unit => normed[j],
                    RowMode::Complex => {
                        let a = gain.as_ref().map_or(ONE, |g| g[j]);
                        let b = bias.as_ref().map_or(ZERO, |b| b[j]);
                        normed[j] * a + b
                    }
                    RowMode::Split => {
                        let a = gain.as_ref().map_or(NormKind::SplitLN.unit_gain(), |g| g[j]);
                        let b = bias.as_ref().map_or(ZERO, |b| b[j]);
                        Complex::new(normed[j].re * a.re + b.re, normed[j].im * a.im + b.im)
                    }
                };
            }
            caches.push(RowCache { mode, normed, sigma });
        }
        Ok((out, NormCache { rows: caches, d }))
    }

    pub fn backward_with_cache(&self, store: &mut ParamStore, cache: &NormCache, grad_out: &CTensor) -> Result<CTensor> {
        let d = cache.d;
        let gain = self.gain.map(|g| store.value(g).data().to_vec());
        let mut gx = CTensor::zeros(grad_out.shape());
        let mut g_gain = vec![ZERO; d];
        let mut g_bias = vec![ZERO; d];
        for (r, rc) in cache.rows.iter().enumerate() {
            let g = grad_out.row(r);
            let out = gx.row_mut(r);
            match rc.mode {
                RowMode::Unit => {
                    // ∂L/∂conj(z) = (c − y·Re⟨c, y⟩)/‖z‖
                    let proj: f64 = g.iter().zip(&rc.normed).map(|(c, y)| (c * y.conj()).re).sum();
                    for j in 0..d {
                        out[j] = (g[j] - rc.normed[j] * proj) / rc.sigma.re;
                    }
                }
                RowMode::Complex => {
                    let mut gn = vec![ZERO; d];
                    for j in 0..d {
                        let a = gain.as_ref().map_or(ONE, |v| v[j]);
                        gn[j] = g[j] * a.conj();
                        g_gain[j] += g[j] * rc.normed[j].conj();
                        g_bias[j] += g[j];
                    }
                    // x = z − mean; n = x/σ;  ∂L/∂conj(x) = (gn − n·Re⟨gn, n⟩/d)/σ
                    let proj: f64 = gn.iter().zip(&rc.normed).map(|(c, y)| (c * y.conj()).re).sum::<f64>() / d as f64;
                    let gxr: Vec<Complex> = (0..d).map(|j| (gn[j] - rc.normed[j] * proj) / rc.sigma.re).collect();
                    let mean = gxr.iter().sum::<Complex>() / d as f64;
                    for j in 0..d {
                        out[j] = gxr[j] - mean;
                    }
                }
                RowMode::Split => {
                    // real gradients per channel: ∂L/∂Re(y) = 2·Re(c)
                    let mut gre = vec![0.0; d];
                    let mut gim = vec![0.0; d];
                    for j in 0..d {
                        let a = gain.as_ref().map_or(NormKind::SplitLN.unit_gain(), |v| v[j]);
                        gre[j] = 2.0 * g[j].re * a.re;
                        gim[j] = 2.0 * g[j].im * a.im;
                        g_gain[j] += Complex::new(g[j].re * rc.normed[j].re, g[j].im * rc.normed[j].im);
                        g_bias[j] += g[j];
                    }
                    let nre: Vec<f64> = rc.normed.iter().map(|v| v.re).collect();
                    let nim: Vec<f64> = rc.normed.iter().map(|v| v.im).collect();
                    let xre = real_ln_backward(&gre, &nre, rc.sigma.re);
                    let xim = real_ln_backward(&gim, &nim, rc.sigma.im);
                    for j in 0..d {
                        out[j] = Complex::new(0.5 * xre[j], 0.5 * xim[j]);
                    }
                }
            }
        }
        if let Some(gid) = self.gain {
            store.accumulate(gid, &CTensor::vector(g_gain))?;
        }
        if let Some(bid) = self.bias {
            store.accumulate(bid, &CTensor::vector(g_bias))?;
        }
        Ok(gx)
    }
}

fn complex_ln_row(z: &[Complex]) -> (Vec<Complex>, Complex) {
    let d = z.len() as f64;
    let mean = z.iter().sum::<Complex>() / d;
    let var = z.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / d;
    let sigma = (var + LN_EPS).sqrt();
    (z.iter().map(|v| (v - mean) / sigma).collect(), Complex::new(sigma, 0.0))
}

fn real_ln(x: impl Iterator<Item = f64> + Clone, d: usize) -> (Vec<f64>, f64) {
    let mean = x.clone().sum::<f64>() / d as f64;
    let var = x.clone().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
    let sigma = (var + LN_EPS).sqrt();
    (x.map(|v| (v - mean) / sigma).collect(), sigma)
}

fn split_ln_row(z: &[Complex]) -> (Vec<Complex>, Complex) {
    let (re, sr) = real_ln(z.iter().map(|v| v.re), z.len());
    let (im, si) = real_ln(z.iter().map(|v| v.im), z.len());
    (re.into_iter().zip(im).map(|(a, b)| Complex::new(a, b)).collect(), Complex::new(sr, si))
}

/// Real layer-norm pullback: `(g − mean(g) − n·mean(g∘n))/σ`.
fn real_ln_backward(g: &[f64], n: &[f64], sigma: f64) -> Vec<f64> {
    let d = g.len() as f64;
    let mg = g.iter().sum::<f64>() / d;
    let mgn = g.iter().zip(n).map(|(a, b)| a * b).sum::<f64>() / d;
    g.iter().zip(n).map(|(gi, ni)| (gi - mg - ni * mgn) / sigma).collect()
}

/// `normalize(h, kind, cls_index)` without trainable affine parameters.
pub fn normalize(h: &CTensor, kind: NormKind, cls_index: usize) -> Result<CTensor> {
    let norm = Norm {
        cls_index,
        ..Norm::plain(kind)
    };
    Ok(norm.forward_with_cache(&ParamStore::new(), h)?.0)
}

impl Layer for Norm {
    type Cache = NormCache;

    fn forward(&self, store: &ParamStore, input: &CTensor) -> Result<(CTensor, NormCache)> {
        self.forward_with_cache(store, input)
    }

    fn backward(&self, store: &mut ParamStore, cache: &NormCache, grad_out: &CTensor) -> Result<CTensor> {
        self.backward_with_cache(store, cache, grad_out)
    }

    fn params(&self) -> Vec<ParamId> {
        self.gain.into_iter().chain(self.bias).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{grad_check, DEFAULT_STEP};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_t(shape: &[usize], seed: u64) -> CTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CTensor::from_fn(shape, |_| Complex::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
    }

    #[test]
    fn unit_norm_example() {
        let h = CTensor::from_vec(&[1, 2], vec![Complex::new(3.0, 0.0), Complex::new(0.0, 4.0)]).unwrap();
        let y = normalize(&h, NormKind::UnitNorm, 0).unwrap();
        assert!((y.data()[0] - Complex::new(0.6, 0.0)).norm() < 1e-15);
        assert!((y.data()[1] - Complex::new(0.0, 0.8)).norm() < 1e-15);
    }

    #[test]
    fn complex_ln_has_zero_mean_unit_variance() {
        let h = rand_t(&[4, 8], 1);
        let y = normalize(&h, NormKind::ComplexLN, 0).unwrap();
        let (m, v) = y.complex_stats(1).unwrap();
        for k in 0..4 {
            assert!(m.data()[k].norm() < 1e-10);
            assert!((v.data()[k].re - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn split_ln_normalizes_each_channel() {
        let h = rand_t(&[2, 6], 2);
        let y = normalize(&h, NormKind::SplitLN, 0).unwrap();
        for r in 0..2 {
            let re: Vec<f64> = y.row(r).iter().map(|z| z.re).collect();
            let im: Vec<f64> = y.row(r).iter().map(|z| z.im).collect();
            for ch in [re, im] {
                let m = ch.iter().sum::<f64>() / 6.0;
                let v = ch.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 6.0;
                assert!(m.abs() < 1e-10 && (v - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn mixed_ln_branches() {
        let h = rand_t(&[2, 5], 3);
        let y = normalize(&h, NormKind::MixedLN, 0).unwrap();
        let cls = CTensor::vector(y.row(0).to_vec());
        assert!((cls.norm() - 1.0).abs() < 1e-10);
        let tok = CTensor::vector(y.row(1).to_vec());
        assert!(tok.complex_stats(0).unwrap().0.data()[0].norm() < 1e-10);
    }

    #[test]
    fn constant_row_and_zero_vector() {
        let h = CTensor::full(&[1, 4], Complex::new(1.0, 1.0));
        let y = normalize(&h, NormKind::ComplexLN, 0).unwrap();
        assert!(y.all_finite());
        assert!(y.norm() < 1e-12);
        assert!(normalize(&CTensor::zeros(&[1, 4]), NormKind::UnitNorm, 0).is_err());
        assert!(normalize(&CTensor::zeros(&[2, 4]), NormKind::MixedLN, 0).is_err());
        assert!(normalize(&rand_t(&[2, 1], 1), NormKind::ComplexLN, 0).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        for kind in [NormKind::SplitLN, NormKind::ComplexLN, NormKind::MixedLN, NormKind::UnitNorm] {
            for seed in 0..3 {
                let mut store = ParamStore::new();
                let norm = Norm::register(&mut store, "ln", kind, 5).unwrap();
                if let (Some(g), Some(b)) = (norm.gain, norm.bias) {
                    *store.value_mut(g) = rand_t(&[5], 100 + seed);
                    *store.value_mut(b) = rand_t(&[5], 200 + seed);
                }
                let x = rand_t(&[3, 5], seed);
                let report = grad_check(&norm, &mut store, &x, DEFAULT_STEP).unwrap();
                assert!(report.passes(1e-5), "{kind:?} seed {seed}\n{report}");
            }
        }
    }
}
