//! Orthogonality penalties on attention weight matrices and dense weights.

use crate::ctensor::{CTensor, ZERO};
use crate::error::{domain_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RegKind {
    #[default]
    None,
    AttOrtho,
    DenseOrtho,
    BothOrtho,
}

impl RegKind {
    pub fn attention(self) -> bool {
        matches!(self, RegKind::AttOrtho | RegKind::BothOrtho)
    }

    pub fn dense(self) -> bool {
        matches!(self, RegKind::DenseOrtho | RegKind::BothOrtho)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RegConfig {
    pub kind: RegKind,
    pub lambda: f64,
}

impl RegConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return domain_err(format!("regularization lambda must be non-negative, got {}", self.lambda));
        }
        Ok(())
    }
}

/// `‖AAᴴ − diag(AAᴴ)‖²_F` and its cotangent `2·off(AAᴴ)·A`.
pub fn row_dependence(a: &CTensor) -> Result<(f64, CTensor)> {
    let mut off = a.matmul_nh(a)?;
    let n = off.dims2()?.0;
    for i in 0..n {
        off[[i, i]] = ZERO;
    }
    Ok((off.norm_sqr(), off.matmul(a)?.scale_real(2.0)))
}

/// `‖WWᴴ − I‖²_F` and its cotangent `2·(WWᴴ − I)·W`.
pub fn weight_defect(w: &CTensor) -> Result<(f64, CTensor)> {
    let mut g = w.matmul_nh(w)?;
    let n = g.dims2()?.0;
    for i in 0..n {
        g[[i, i]] -= 1.0;
    }
    Ok((g.norm_sqr(), g.matmul(w)?.scale_real(2.0)))
}

/// `λ·(Σ_A L_AR(A)/M + Σ_W L_LR(W))`, each term present according to the kind.
pub fn ortho_regularizers(affinities: &[CTensor], dense_weights: &[CTensor], cfg: &RegConfig, batch: usize) -> Result<f64> {
    cfg.validate()?;
    if cfg.lambda == 0.0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    if cfg.kind.attention() {
        let m = batch.max(1) as f64;
        for a in affinities {
            total += row_dependence(a)?.0 / m;
        }
    }
    if cfg.kind.dense() {
        for w in dense_weights {
            total += weight_defect(w)?.0;
        }
    }
    Ok(cfg.lambda * total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{grad_check_fn, ParamStore, DEFAULT_STEP};
    use crate::ctensor::{unitary_exp, Complex};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_t(shape: &[usize], rng: &mut ChaCha8Rng) -> CTensor {
        CTensor::from_fn(shape, |_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn permutation_and_unitary_give_zero() {
        let perm = CTensor::from_real(&[3, 3], &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let h = rand_t(&[4, 4], &mut rng);
        let u = unitary_exp(&h.add(&h.hermitian_transpose().unwrap()).unwrap()).unwrap();
        let cfg = RegConfig { kind: RegKind::BothOrtho, lambda: 1.0 };
        assert!(ortho_regularizers(&[perm], &[u], &cfg, 1).unwrap() < 1e-20);
    }

    #[test]
    fn equal_rows() {
        for k in 2..6 {
            let a = CTensor::full(&[k, k], Complex::new(1.0 / k as f64, 0.0));
            let cfg = RegConfig { kind: RegKind::AttOrtho, lambda: 0.5 };
            let got = ortho_regularizers(&[a], &[], &cfg, 1).unwrap();
            let kf = k as f64;
            assert!((got - 0.5 * (kf * kf - kf) / (kf * kf)).abs() < 1e-15);
        }
    }

    #[test]
    fn batch_normalization_and_zero_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = rand_t(&[3, 3], &mut rng);
        let w = rand_t(&[3, 3], &mut rng);
        let att = RegConfig { kind: RegKind::AttOrtho, lambda: 1.0 };
        let one = ortho_regularizers(std::slice::from_ref(&a), &[], &att, 1).unwrap();
        let four = ortho_regularizers(&[a.clone(), a.clone(), a.clone(), a.clone()], &[], &att, 4).unwrap();
        assert!((one - four).abs() < 1e-12);
        let both = RegConfig { kind: RegKind::BothOrtho, lambda: 0.0 };
        assert_eq!(ortho_regularizers(&[a], &[w], &both, 1).unwrap(), 0.0);
        assert!(RegConfig { kind: RegKind::None, lambda: -1.0 }.validate().is_err());
    }

    #[test]
    fn cotangents_match_finite_differences() {
        for seed in 0..3 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = rand_t(&[3, 4], &mut rng);
            let mut store = ParamStore::new();
            for f in [row_dependence, weight_defect] {
                let r = grad_check_fn(&mut store, &[], &x, DEFAULT_STEP, |_, x, _| {
                    let (l, g) = f(x)?;
                    Ok((l, Some(g)))
                })
                .unwrap();
                assert!(r.passes(1e-6), "{r}");
            }
        }
    }
}
