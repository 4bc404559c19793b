//! Hermitian eigendecomposition by cyclic complex Jacobi rotations, and the
//! spectral matrix exponential `e^{iH}` built on top of it.

use super::{CTensor, Complex, ZERO};
use crate::error::{domain_err, Result};

/// Hermitian inputs may deviate from `H = Hᴴ` by at most this much (Frobenius).
pub const HERMITIAN_TOL: f64 = 1e-10;

const MAX_SWEEPS: usize = 100;

/// Eigendecomposition `H = Q·diag(λ)·Qᴴ` of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermEig {
    /// Real eigenvalues in ascending order.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, matching `eigenvalues`.
    pub eigenvectors: CTensor,
}

impl HermEig {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `Q·diag(f(λ))·Qᴴ`.
    pub fn apply_fn(&self, f: impl Fn(f64) -> Complex) -> CTensor {
        let d = self.dim();
        let q = &self.eigenvectors;
        let fl: Vec<Complex> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let mut out = CTensor::zeros(&[d, d]);
        for i in 0..d {
            for j in 0..d {
                let mut acc = ZERO;
                for k in 0..d {
                    acc += q[[i, k]] * fl[k] * q[[j, k]].conj();
                }
                out[[i, j]] = acc;
            }
        }
        out
    }

    pub fn reconstruct(&self) -> CTensor {
        self.apply_fn(|l| Complex::new(l, 0.0))
    }
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Each rotation first removes the phase of the pivot `h_pq`, then applies
/// the real symmetric 2×2 Schur rotation. Sweeps continue until the
/// off-diagonal mass falls below round-off relative to the matrix norm.
pub fn hermitian_eig(h: &CTensor) -> Result<HermEig> {
    let (r, c) = h.dims2()?;
    if r != c {
        return domain_err(format!("hermitian_eig: non-square [{r}, {c}]"));
    }
    let defect = h.hermiticity_defect()?;
    if defect > HERMITIAN_TOL.max(HERMITIAN_TOL * h.norm()) {
        return domain_err(format!(
            "hermitian_eig: input is not Hermitian (‖H − Hᴴ‖_F = {defect:e})"
        ));
    }
    if !h.all_finite() {
        return domain_err("hermitian_eig: non-finite input");
    }
    let n = r;
    // Work on the exactly Hermitian part.
    let mut a = h.add(&h.hermitian_transpose()?)?.scale_real(0.5);
    let mut v = CTensor::eye(n);
    let scale = a.norm().max(f64::MIN_POSITIVE);

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[[i, j]].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let hpq = a[[p, q]];
                let mag = hpq.norm();
                if mag <= 1e-300 {
                    continue;
                }
                let phase = hpq / mag; // e^{iφ}
                let app = a[[p, p]].re;
                let aqq = a[[q, q]].re;
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * cs;
                // G = diag(1, e^{-iφ}) · [[c, s], [-s, c]]
                let g11 = Complex::new(cs, 0.0);
                let g12 = Complex::new(sn, 0.0);
                let g21 = -phase.conj() * sn;
                let g22 = phase.conj() * cs;

                // A ← A·G (columns p, q)
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = akp * g11 + akq * g21;
                    a[[k, q]] = akp * g12 + akq * g22;
                }
                // A ← Gᴴ·A (rows p, q)
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = g11.conj() * apk + g21.conj() * aqk;
                    a[[q, k]] = g12.conj() * apk + g22.conj() * aqk;
                }
                a[[p, q]] = ZERO;
                a[[q, p]] = ZERO;
                a[[p, p]] = Complex::new(a[[p, p]].re, 0.0);
                a[[q, q]] = Complex::new(a[[q, q]].re, 0.0);
                // V ← V·G
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = vkp * g11 + vkq * g21;
                    v[[k, q]] = vkp * g12 + vkq * g22;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[i, i]].re.total_cmp(&a[[j, j]].re));
    let eigenvalues = order.iter().map(|&i| a[[i, i]].re).collect();
    let mut eigenvectors = CTensor::zeros(&[n, n]);
    for (col, &src) in order.iter().enumerate() {
        for k in 0..n {
            eigenvectors[[k, col]] = v[[k, src]];
        }
    }
    Ok(HermEig {
        eigenvalues,
        eigenvectors,
    })
}

/// `U = e^{iH}` computed spectrally as `Q·diag(e^{iλ})·Qᴴ`.
pub fn unitary_exp(h: &CTensor) -> Result<CTensor> {
    Ok(unitary_exp_with_eig(h)?.0)
}

/// As [`unitary_exp`], also returning the eigendecomposition it used.
pub fn unitary_exp_with_eig(h: &CTensor) -> Result<(CTensor, HermEig)> {
    let eig = hermitian_eig(h)?;
    let u = eig.apply_fn(|l| Complex::from_polar(1.0, l));
    Ok((u, eig))
}
