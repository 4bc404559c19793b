use rand::RngCore;

use crate::autodiff::{Layer, ParamId, ParamStore};
use crate::ctensor::CTensor;
use crate::error::Result;
use crate::layers::attention::MhaCache;
use crate::layers::dropout::dropout_backward;
use crate::layers::norm::NormCache;
use crate::layers::{complex_dropout, AttentionActivation, Dense, HiddenActivation, MultiHeadAttention, Norm, NormKind};

/// Post-LN block: `n1(x + drop(attn(x)))`, then `n2(y + drop(ff(y)))`.
#[derive(Debug, Clone)]
pub struct EncoderLayer {
    pub attn: MultiHeadAttention,
    pub norm1: Norm,
    pub ff_in: Dense,
    pub activation: HiddenActivation,
    pub ff_out: Dense,
    pub norm2: Norm,
    pub dropout_p: f64,
}

#[derive(Debug, Clone)]
pub struct LayerCache {
    pub attn: MhaCache,
    drop1: Option<Vec<f64>>,
    norm1: NormCache,
    mid: CTensor,
    pre_act: CTensor,
    act_out: CTensor,
    drop2: Option<Vec<f64>>,
    norm2: NormCache,
}

pub struct LayerSpec {
    pub d_model: usize,
    pub d_hidden: usize,
    pub n_heads: usize,
    pub attention: AttentionActivation,
    pub hidden: HiddenActivation,
    pub norm: NormKind,
    pub with_q_o: bool,
    pub dropout_p: f64,
}

impl EncoderLayer {
    pub fn register(store: &mut ParamStore, prefix: &str, spec: &LayerSpec) -> Result<Self> {
        let d = spec.d_model;
        Ok(Self {
            attn: MultiHeadAttention::register(store, &format!("{prefix}.attn"), d, spec.n_heads, spec.attention, spec.with_q_o)?,
            norm1: Norm::register(store, &format!("{prefix}.norm1"), spec.norm, d)?,
            ff_in: Dense::register(store, &format!("{prefix}.ff_in"), d, spec.d_hidden, true)?,
            activation: spec.hidden,
            ff_out: Dense::register(store, &format!("{prefix}.ff_out"), spec.d_hidden, d, true)?,
            norm2: Norm::register(store, &format!("{prefix}.norm2"), spec.norm, d)?,
            dropout_p: spec.dropout_p,
        })
    }

    /// Every dense weight matrix of the block.
    pub fn dense_weights(&self) -> Vec<ParamId> {
        let mut w: Vec<ParamId> = self.attn.projections().iter().map(|d| d.weight).collect();
        w.push(self.ff_in.weight);
        w.push(self.ff_out.weight);
        w
    }

    pub fn forward(&self, store: &ParamStore, x: &CTensor, mask: &[bool], training: bool, rng: &mut dyn RngCore) -> Result<(CTensor, LayerCache)> {
        let (a, attn) = self.attn.forward_masked(store, x, mask)?;
        let (a, drop1) = complex_dropout(&a, self.dropout_p, training, rng)?;
        let (mid, norm1) = self.norm1.forward_with_cache(store, &x.add(&a)?)?;
        let (pre_act, _) = self.ff_in.forward(store, &mid)?;
        let act_out = self.activation.forward(&pre_act);
        let (f, _) = self.ff_out.forward(store, &act_out)?;
        let (f, drop2) = complex_dropout(&f, self.dropout_p, training, rng)?;
        let (out, norm2) = self.norm2.forward_with_cache(store, &mid.add(&f)?)?;
        Ok((
            out,
            LayerCache {
                attn,
                drop1,
                norm1,
                mid,
                pre_act,
                act_out,
                drop2,
                norm2,
            },
        ))
    }

    /// `attn_extra` holds one cotangent per head on the attention weights.
    pub fn backward(&self, store: &mut ParamStore, cache: &LayerCache, grad_out: &CTensor, attn_extra: Option<&[CTensor]>) -> Result<CTensor> {
        let g2 = self.norm2.backward_with_cache(store, &cache.norm2, grad_out)?;
        let gf = dropout_backward(&g2, cache.drop2.as_deref());
        let g_act = self.ff_out.backward(store, &cache.act_out, &gf)?;
        let g_pre = self.activation.backward(&cache.pre_act, &g_act)?;
        let mut g_mid = self.ff_in.backward(store, &cache.mid, &g_pre)?;
        g_mid.add_assign(&g2)?;
        let g1 = self.norm1.backward_with_cache(store, &cache.norm1, &g_mid)?;
        let ga = dropout_backward(&g1, cache.drop1.as_deref());
        let mut gx = self.attn.backward_with_extra(store, &cache.attn, &ga, attn_extra)?;
        gx.add_assign(&g1)?;
        Ok(gx)
    }
}
