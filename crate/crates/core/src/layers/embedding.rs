use crate::autodiff::{ParamId, ParamOptions, ParamStore};
use crate::ctensor::CTensor;
use crate::error::{domain_err, Result};

/// Token, position and segment tables whose rows are summed per token.
#[derive(Debug, Clone)]
pub struct Embeddings {
    pub tokens: ParamId,
    pub positions: ParamId,
    pub segments: ParamId,
}

impl Embeddings {
    pub fn register(store: &mut ParamStore, prefix: &str, vocab: usize, max_len: usize, segments: usize, d: usize) -> Result<Self> {
        Ok(Self {
            tokens: store.add(format!("{prefix}.tokens"), CTensor::zeros(&[vocab, d]), ParamOptions::default())?,
            positions: store.add(format!("{prefix}.positions"), CTensor::zeros(&[max_len, d]), ParamOptions::default())?,
            segments: store.add(format!("{prefix}.segments"), CTensor::zeros(&[segments, d]), ParamOptions::default())?,
        })
    }

    pub fn params(&self) -> Vec<ParamId> {
        vec![self.tokens, self.positions, self.segments]
    }

    pub fn forward(&self, store: &ParamStore, token_ids: &[usize], position_ids: &[usize], segment_ids: &[usize]) -> Result<CTensor> {
        split_embed(token_ids, position_ids, segment_ids, [store.value(self.tokens), store.value(self.positions), store.value(self.segments)])
    }

    /// Scatter-adds the cotangent of the summed embeddings into the tables.
    pub fn backward(&self, store: &mut ParamStore, token_ids: &[usize], position_ids: &[usize], segment_ids: &[usize], grad_out: &CTensor) -> Result<()> {
        for (table, ids) in [(self.tokens, token_ids), (self.positions, position_ids), (self.segments, segment_ids)] {
            let mut g = CTensor::zeros(store.value(table).shape());
            for (r, &id) in ids.iter().enumerate() {
                for (a, &b) in g.row_mut(id).iter_mut().zip(grad_out.row(r)) {
                    *a += b;
                }
            }
            store.accumulate(table, &g)?;
        }
        Ok(())
    }
}

/// Sum of the looked-up token, position and segment rows, `[seq, d]`.
pub fn split_embed(token_ids: &[usize], position_ids: &[usize], segment_ids: &[usize], tables: [&CTensor; 3]) -> Result<CTensor> {
    let n = token_ids.len();
    if position_ids.len() != n || segment_ids.len() != n {
        return domain_err(format!("id lists differ in length: {n}, {}, {}", position_ids.len(), segment_ids.len()));
    }
    let d = tables[0].dims2()?.1;
    let mut out = CTensor::zeros(&[n, d]);
    for (table, ids, what) in [(tables[0], token_ids, "token"), (tables[1], position_ids, "position"), (tables[2], segment_ids, "segment")] {
        let (rows, width) = table.dims2()?;
        if width != d {
            return domain_err(format!("{what} table width {width} vs {d}"));
        }
        for (r, &id) in ids.iter().enumerate() {
            if id >= rows {
                return domain_err(format!("{what} id {id} outside table of {rows} rows"));
            }
            for (a, &b) in out.row_mut(r).iter_mut().zip(table.row(id)) {
                *a += b;
            }
        }
    }
    Ok(out)
}
