use crate::autodiff::{Layer, ParamId, ParamOptions, ParamStore};
use crate::ctensor::CTensor;
use crate::error::{shape_err, Result};

/// `z = W·x + b` applied to every row of the input.
///
/// With `W = A + iB`, `x = u + iv` and `b = c + id` this is
/// `(Au − Bv + c) + i(Bu + Av + d)`.
pub fn complex_dense(x: &CTensor, w: &CTensor, b: Option<&CTensor>) -> Result<CTensor> {
    let (d_out, d_in) = w.dims2()?;
    let (rows, cols, lead) = as_rows(x)?;
    if cols != d_in {
        return shape_err(format!("complex_dense: input width {cols} vs weight [{d_out}, {d_in}]"));
    }
    if let Some(b) = b {
        if b.shape() != [d_out] {
            return shape_err(format!("complex_dense: bias {:?} vs output width {d_out}", b.shape()));
        }
    }
    let x2 = x.clone().reshape(&[rows, cols])?;
    let mut y = x2.matmul_nh(&w.conj())?;
    if let Some(b) = b {
        for r in 0..rows {
            for (o, &bi) in y.row_mut(r).iter_mut().zip(b.data()) {
                *o += bi;
            }
        }
    }
    let mut shape = lead;
    shape.push(d_out);
    y.reshape(&shape)
}

/// Splits `[..., d]` into `(rows, d, leading extents)`.
pub(crate) fn as_rows(x: &CTensor) -> Result<(usize, usize, Vec<usize>)> {
    match x.shape().split_last() {
        Some((&d, lead)) => Ok((lead.iter().product(), d, lead.to_vec())),
        None => shape_err("expected at least one axis"),
    }
}

/// Complex fully-connected layer with weight `[d_out, d_in]` and optional bias.
#[derive(Debug, Clone)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
}

impl Dense {
    /// Registers a zero-initialized layer; initialization happens separately.
    pub fn register(store: &mut ParamStore, prefix: &str, d_in: usize, d_out: usize, bias: bool) -> Result<Self> {
        let weight = store.add(format!("{prefix}.weight"), CTensor::zeros(&[d_out, d_in]), ParamOptions::default())?;
        let bias = if bias {
            Some(store.add(format!("{prefix}.bias"), CTensor::zeros(&[d_out]), ParamOptions::no_decay())?)
        } else {
            None
        };
        Ok(Self { weight, bias })
    }

    pub fn dims(&self, store: &ParamStore) -> (usize, usize) {
        let s = store.value(self.weight).shape();
        (s[1], s[0])
    }
}

impl Layer for Dense {
    type Cache = CTensor;

    fn forward(&self, store: &ParamStore, input: &CTensor) -> Result<(CTensor, CTensor)> {
        let y = complex_dense(input, store.value(self.weight), self.bias.map(|b| store.value(b)))?;
        Ok((y, input.clone()))
    }

    fn backward(&self, store: &mut ParamStore, x: &CTensor, grad_out: &CTensor) -> Result<CTensor> {
        let w = store.value(self.weight).clone();
        let (d_out, d_in) = w.dims2()?;
        let (rows, _, lead) = as_rows(x)?;
        let x2 = x.clone().reshape(&[rows, d_in])?;
        let g2 = grad_out.clone().reshape(&[rows, d_out])?;
        // holomorphic in both x and W:
        //   ∂L/∂conj(x) = G·conj(W),  ∂L/∂conj(W) = Gᵀ·conj(x)
        let gx = g2.matmul(&w.conj())?;
        let gw = g2.matmul_hn(&x2)?.conj();
        store.accumulate(self.weight, &gw)?;
        if let Some(b) = self.bias {
            let mut gb = CTensor::zeros(&[d_out]);
            for r in 0..rows {
                for (acc, &g) in gb.data_mut().iter_mut().zip(g2.row(r)) {
                    *acc += g;
                }
            }
            store.accumulate(b, &gb)?;
        }
        let mut shape = lead;
        shape.push(d_in);
        gx.reshape(&shape)
    }

    fn params(&self) -> Vec<ParamId> {
        let mut p = vec![self.weight];
        p.extend(self.bias);
        p
    }
}
