//! Complex multi-head attention.
//!
//! Affinities are Hermitian inner products `σ = Q·Kᴴ/√d_k`. The activation
//! turns each query row of `σ` into attention weights: complex weights for
//! [`AttentionActivation::SplitSoftmax`], real convex weights for the rest.

use crate::autodiff::{pullback_modulus, Layer, ParamId, ParamStore};
use crate::ctensor::{CTensor, Complex, ZERO};
use crate::error::{domain_err, shape_err, Result};
use crate::layers::dense::Dense;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttentionActivation {
    /// Softmax on real and imaginary parts independently.
    SplitSoftmax,
    /// Softmax on moduli.
    ModSoftmax,
    /// Softmax on real parts.
    RealSoftmax,
    /// `|zReLU(σ + b)|²` normalized to sum to one.
    SquaredZReLU { bias: Complex },
}

impl AttentionActivation {
    pub fn is_real(&self) -> bool {
        !matches!(self, Self::SplitSoftmax)
    }
}

/// Numerically stable softmax over the entries with `keep[k]`; others get 0.
fn masked_softmax(x: &[f64], masked: &[bool]) -> Vec<f64> {
    let max = x
        .iter()
        .zip(masked)
        .filter(|(_, &m)| !m)
        .map(|(&v, _)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x
        .iter()
        .zip(masked)
        .map(|(&v, &m)| if m { 0.0 } else { (v - max).exp() })
        .collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Softmax pullback `a ∘ (g − Σ a·g)`.
fn softmax_backward(a: &[f64], g: &[f64]) -> Vec<f64> {
    let dot: f64 = a.iter().zip(g).map(|(x, y)| x * y).sum();
    a.iter().zip(g).map(|(x, y)| x * (y - dot)).collect()
}

fn zrelu(z: Complex) -> Complex {
    if z.re >= 0.0 && z.im >= 0.0 {
        z
    } else {
        ZERO
    }
}

/// Applies the activation row-wise to an affinity matrix `[queries, keys]`.
///
/// `mask[k] == true` removes key `k` from every normalization.
pub fn attention_weights(scores: &CTensor, act: AttentionActivation, mask: &[bool]) -> Result<CTensor> {
    let (nq, nk) = scores.dims2()?;
    if mask.len() != nk {
        return shape_err(format!("attention mask has {} entries for {nk} keys", mask.len()));
    }
    if mask.iter().all(|&m| m) {
        return domain_err("every key is masked");
    }
    let mut a = CTensor::zeros(&[nq, nk]);
    for q in 0..nq {
        let s = scores.row(q);
        let row: Vec<Complex> = match act {
            AttentionActivation::SplitSoftmax => {
                let re = masked_softmax(&s.iter().map(|z| z.re).collect::<Vec<_>>(), mask);
                let im = masked_softmax(&s.iter().map(|z| z.im).collect::<Vec<_>>(), mask);
                re.into_iter().zip(im).map(|(r, i)| Complex::new(r, i)).collect()
            }
            AttentionActivation::ModSoftmax => {
                let w = masked_softmax(&s.iter().map(|z| z.norm()).collect::<Vec<_>>(), mask);
                w.into_iter().map(|v| Complex::new(v, 0.0)).collect()
            }
            AttentionActivation::RealSoftmax => {
                let w = masked_softmax(&s.iter().map(|z| z.re).collect::<Vec<_>>(), mask);
                w.into_iter().map(|v| Complex::new(v, 0.0)).collect()
            }
            AttentionActivation::SquaredZReLU { bias } => {
                let w: Vec<f64> = s
                    .iter()
                    .zip(mask)
                    .map(|(z, &m)| if m { 0.0 } else { zrelu(z + bias).norm_sqr() })
                    .collect();
                let total: f64 = w.iter().sum();
                if total > 0.0 {
                    w.into_iter().map(|v| Complex::new(v / total, 0.0)).collect()
                } else {
                    // every key gated off: fall back to uniform over visible keys
                    let live = mask.iter().filter(|&&m| !m).count() as f64;
                    mask.iter()
                        .map(|&m| Complex::new(if m { 0.0 } else { 1.0 / live }, 0.0))
                        .collect()
                }
            }
        };
        a.row_mut(q).copy_from_slice(&row);
    }
    Ok(a)
}

/// Pullback of [`attention_weights`]: cotangent of the weights to cotangent
/// of the affinities.
pub fn attention_weights_backward(
    scores: &CTensor,
    weights: &CTensor,
    act: AttentionActivation,
    mask: &[bool],
    grad_weights: &CTensor,
) -> Result<CTensor> {
    let (nq, nk) = scores.dims2()?;
    let mut gs = CTensor::zeros(&[nq, nk]);
    for q in 0..nq {
        let s = scores.row(q);
        let a = weights.row(q);
        let c = grad_weights.row(q);
        let out = gs.row_mut(q);
        match act {
            AttentionActivation::SplitSoftmax => {
                let are: Vec<f64> = a.iter().map(|z| z.re).collect();
                let aim: Vec<f64> = a.iter().map(|z| z.im).collect();
                let gre: Vec<f64> = c.iter().map(|z| 2.0 * z.re).collect();
                let gim: Vec<f64> = c.iter().map(|z| 2.0 * z.im).collect();
                let xr = softmax_backward(&are, &gre);
                let xi = softmax_backward(&aim, &gim);
                for k in 0..nk {
                    out[k] = Complex::new(0.5 * xr[k], 0.5 * xi[k]);
                }
            }
            AttentionActivation::ModSoftmax | AttentionActivation::RealSoftmax => {
                let ar: Vec<f64> = a.iter().map(|z| z.re).collect();
                let g: Vec<f64> = c.iter().map(|z| 2.0 * z.re).collect();
                let gx = softmax_backward(&ar, &g);
                for k in 0..nk {
                    if mask[k] {
                        continue;
                    }
                    out[k] = if act == AttentionActivation::ModSoftmax {
                        pullback_modulus(s[k], gx[k])
                    } else {
                        Complex::new(0.5 * gx[k], 0.0)
                    };
                }
            }
            AttentionActivation::SquaredZReLU { bias } => {
                let z: Vec<Complex> = s
                    .iter()
                    .zip(mask)
                    .map(|(v, &m)| if m { ZERO } else { zrelu(v + bias) })
                    .collect();
                let total: f64 = z.iter().map(|v| v.norm_sqr()).sum();
                if total == 0.0 {
                    continue;
                }
                let g: Vec<f64> = c.iter().map(|v| 2.0 * v.re).collect();
                let dot: f64 = a.iter().zip(&g).map(|(x, y)| x.re * y).sum();
                for k in 0..nk {
                    // ∂L/∂w_k for w_k = |z_k|², then ∂w/∂conj(u) = u on the live branch
                    let gw = (g[k] - dot) / total;
                    out[k] = z[k] * gw;
                }
            }
        }
    }
    Ok(gs)
}

/// Saved state of one attention head.
#[derive(Debug, Clone)]
pub struct HeadCache {
    pub q: CTensor,
    pub k: CTensor,
    pub v: CTensor,
    pub scores: CTensor,
    /// Post-activation weight matrix `A`.
    pub weights: CTensor,
}

/// Single-head attention `f(Q·Kᴴ/√d_k)·V` on `[seq, d_k]` matrices.
pub fn attention_head(q: &CTensor, k: &CTensor, v: &CTensor, act: AttentionActivation, mask: &[bool]) -> Result<(CTensor, HeadCache)> {
    let (_, dk) = q.dims2()?;
    let (_, dk2) = k.dims2()?;
    if dk != dk2 {
        return shape_err(format!("query width {dk} vs key width {dk2}"));
    }
    let scores = q.matmul_nh(k)?.scale_real(1.0 / (dk as f64).sqrt());
    let weights = attention_weights(&scores, act, mask)?;
    let out = weights.matmul(v)?;
    Ok((
        out,
        HeadCache {
            q: q.clone(),
            k: k.clone(),
            v: v.clone(),
            scores,
            weights,
        },
    ))
}

/// Pullback of [`attention_head`]; `extra_grad_weights` adds a cotangent
/// on `A` directly (used by the attention orthogonality regularizer).
pub fn attention_head_backward(
    cache: &HeadCache,
    act: AttentionActivation,
    mask: &[bool],
    grad_out: &CTensor,
    extra_grad_weights: Option<&CTensor>,
) -> Result<(CTensor, CTensor, CTensor)> {
    let (_, dk) = cache.q.dims2()?;
    // O = A·V, holomorphic in both
    let mut ga = grad_out.matmul_nh(&cache.v)?;
    if let Some(extra) = extra_grad_weights {
        ga.add_assign(extra)?;
    }
    let gv = cache.weights.matmul_hn(grad_out)?;
    let gs = attention_weights_backward(&cache.scores, &cache.weights, act, mask, &ga)?;
    let scale = 1.0 / (dk as f64).sqrt();
    // σ = Q·Kᴴ·scale: holomorphic in Q, anti-holomorphic in K
    let gq = gs.matmul(&cache.k)?.scale_real(scale);
    let gk = gs.matmul_hn(&cache.q)?.scale_real(scale);
    Ok((gq, gk, gv))
}

/// `complex_attention` over `[batch, heads, seq, d_k]` tensors with a shared
/// key mask.
pub fn complex_attention(q: &CTensor, k: &CTensor, v: &CTensor, act: AttentionActivation, mask: &[bool]) -> Result<CTensor> {
    let s = q.shape();
    if s.len() != 4 || k.shape() != s || v.shape() != s {
        return shape_err(format!(
            "complex_attention expects equal [batch, heads, seq, d_k] shapes, got {:?} {:?} {:?}",
            q.shape(),
            k.shape(),
            v.shape()
        ));
    }
    let (b, h, n, dk) = (s[0], s[1], s[2], s[3]);
    let block = n * dk;
    let mut out = Vec::with_capacity(q.len());
    for i in 0..b * h {
        let take = |t: &CTensor| CTensor::from_vec(&[n, dk], t.data()[i * block..(i + 1) * block].to_vec());
        let (o, _) = attention_head(&take(q)?, &take(k)?, &take(v)?, act, mask)?;
        out.extend_from_slice(o.data());
    }
    CTensor::from_vec(s, out)
}

/// Multi-head self-attention with optional query/output projections.
#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub query: Option<Dense>,
    pub key: Dense,
    pub value: Dense,
    pub output: Option<Dense>,
    pub n_heads: usize,
    pub activation: AttentionActivation,
}

#[derive(Debug, Clone)]
pub struct MhaCache {
    pub input: CTensor,
    pub heads: Vec<HeadCache>,
    pub concat: CTensor,
    pub mask: Vec<bool>,
}

impl MultiHeadAttention {
    /// Registers projections; `with_q_o = false` drops the query and output
    /// projections, leaving only K and V.
    pub fn register(store: &mut ParamStore, prefix: &str, d: usize, n_heads: usize, activation: AttentionActivation, with_q_o: bool) -> Result<Self> {
        if n_heads == 0 || d % n_heads != 0 {
            return Err(crate::error::Error::Config(format!("d_model {d} is not divisible by {n_heads} heads")));
        }
        let query = if with_q_o { Some(Dense::register(store, &format!("{prefix}.wq"), d, d, true)?) } else { None };
        let key = Dense::register(store, &format!("{prefix}.wk"), d, d, true)?;
        let value = Dense::register(store, &format!("{prefix}.wv"), d, d, true)?;
        let output = if with_q_o { Some(Dense::register(store, &format!("{prefix}.wo"), d, d, true)?) } else { None };
        Ok(Self {
            query,
            key,
            value,
            output,
            n_heads,
            activation,
        })
    }

    pub fn projections(&self) -> Vec<&Dense> {
        self.query.iter().chain([&self.key, &self.value]).chain(self.output.iter()).collect()
    }

    pub fn forward_masked(&self, store: &ParamStore, x: &CTensor, mask: &[bool]) -> Result<(CTensor, MhaCache)> {
        let (n, d) = x.dims2()?;
        let dk = d / self.n_heads;
        let q = match &self.query {
            Some(l) => l.forward(store, x)?.0,
            None => x.clone(),
        };
        let k = self.key.forward(store, x)?.0;
        let v = self.value.forward(store, x)?.0;
        let mut concat = CTensor::zeros(&[n, d]);
        let mut heads = Vec::with_capacity(self.n_heads);
        for h in 0..self.n_heads {
            let (o, hc) = attention_head(&slice_cols(&q, h * dk, dk), &slice_cols(&k, h * dk, dk), &slice_cols(&v, h * dk, dk), self.activation, mask)?;
            put_cols(&mut concat, &o, h * dk);
            heads.push(hc);
        }
        let out = match &self.output {
            Some(l) => l.forward(store, &concat)?.0,
            None => concat.clone(),
        };
        Ok((
            out,
            MhaCache {
                input: x.clone(),
                heads,
                concat,
                mask: mask.to_vec(),
            },
        ))
    }

    pub fn backward_with_extra(&self, store: &mut ParamStore, cache: &MhaCache, grad_out: &CTensor, extra_grad_weights: Option<&[CTensor]>) -> Result<CTensor> {
        let (n, d) = cache.input.dims2()?;
        let dk = d / self.n_heads;
        let g_concat = match &self.output {
            Some(l) => l.backward(store, &cache.concat, grad_out)?,
            None => grad_out.clone(),
        };
        let mut gq = CTensor::zeros(&[n, d]);
        let mut gk = CTensor::zeros(&[n, d]);
        let mut gv = CTensor::zeros(&[n, d]);
        for (h, hc) in cache.heads.iter().enumerate() {
            let extra = extra_grad_weights.map(|e| &e[h]);
            let (q, k, v) = attention_head_backward(hc, self.activation, &cache.mask, &slice_cols(&g_concat, h * dk, dk), extra)?;
            put_cols(&mut gq, &q, h * dk);
            put_cols(&mut gk, &k, h * dk);
            put_cols(&mut gv, &v, h * dk);
        }
        let mut gx = self.key.backward(store, &cache.input, &gk)?;
        gx.add_assign(&self.value.backward(store, &cache.input, &gv)?)?;
        match &self.query {
            Some(l) => gx.add_assign(&l.backward(store, &cache.input, &gq)?)?,
            None => gx.add_assign(&gq)?,
        }
        Ok(gx)
    }
}

impl Layer for MultiHeadAttention {
    type Cache = MhaCache;

    fn forward(&self, store: &ParamStore, input: &CTensor) -> Result<(CTensor, MhaCache)> {
        let n = input.dims2()?.0;
        self.forward_masked(store, input, &vec![false; n])
    }

    fn backward(&self, store: &mut ParamStore, cache: &MhaCache, grad_out: &CTensor) -> Result<CTensor> {
        self.backward_with_extra(store, cache, grad_out, None)
    }

    fn params(&self) -> Vec<ParamId> {
        self.projections().into_iter().flat_map(|d| d.params()).collect()
    }
}

fn slice_cols(x: &CTensor, start: usize, width: usize) -> CTensor {
    let (n, _) = x.dims2().expect("matrix");
    let mut out = Vec::with_capacity(n * width);
    for r in 0..n {
        out.extend_from_slice(&x.row(r)[start..start + width]);
    }
    CTensor::from_vec(&[n, width], out).expect("slice shape")
}

fn put_cols(dst: &mut CTensor, src: &CTensor, start: usize) {
    let (n, w) = src.dims2().expect("matrix");
    for r in 0..n {
        dst.row_mut(r)[start..start + w].copy_from_slice(src.row(r));
    }
}
