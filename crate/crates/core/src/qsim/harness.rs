//! Runs the classical measurement head and its circuit export side by side.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{apply_unitary, measure_analytic, measure_shots, prepare_state};
use crate::ctensor::{unitary_exp, vec_norm, CTensor, Complex, ONE};
use crate::error::{domain_err, Result};
use crate::layers::heads::{measurement_cls_head, project_probabilities};
use crate::layers::unitary::hermitian_part;

/// Parameters of a measurement classifier: free `W` (`[d, d]`) and real `P`
/// (`[classes, d]`).
#[derive(Debug, Clone)]
pub struct HeadParams {
    pub w: CTensor,
    pub projection: CTensor,
}

impl HeadParams {
    pub fn dim(&self) -> usize {
        self.w.shape()[0]
    }

    pub fn classes(&self) -> usize {
        self.projection.shape()[0]
    }
}

/// A head exported as one dense gate on `n_qubits` plus a linear readout.
#[derive(Debug, Clone)]
pub struct CircuitSpec {
    pub n_qubits: usize,
    pub unitary: CTensor,
    /// Real `[classes, 2^n]`; padded columns are zero.
    pub projection: CTensor,
}

impl CircuitSpec {
    /// Embeds a head of dimension `d ≤ 2^n` as `diag(U, I)` with a zero-padded
    /// projection. States are zero-padded the same way.
    pub fn from_head(head: &HeadParams, n_qubits: usize) -> Result<Self> {
        let d = head.dim();
        let full = 1usize << n_qubits;
        if d > full {
            return domain_err(format!("head dimension {d} exceeds 2^{n_qubits}"));
        }
        let u = unitary_exp(&hermitian_part(&head.w)?)?;
        let mut unitary = CTensor::eye(full);
        for i in 0..d {
            for j in 0..d {
                unitary[[i, j]] = u[[i, j]];
            }
        }
        let classes = head.classes();
        let mut projection = CTensor::zeros(&[classes, full]);
        for c in 0..classes {
            projection.row_mut(c)[..d].copy_from_slice(head.projection.row(c));
        }
        Ok(Self {
            n_qubits,
            unitary,
            projection,
        })
    }

    pub fn pad_state(&self, psi: &[Complex]) -> Vec<Complex> {
        let mut v = psi.to_vec();
        v.resize(1 << self.n_qubits, Complex::new(0.0, 0.0));
        v
    }
}

/// A normalized complex Gaussian vector (Haar-distributed pure state).
pub fn random_pure_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<Complex> {
    let v: Vec<Complex> = (0..d)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex::new(re, im)
        })
        .collect();
    let n = vec_norm(&v);
    v.into_iter().map(|z| z / n).collect()
}

/// `W` with independent `N(0, unitary_std²)` parts, `P ~ N(0, projection_std²)`.
pub fn random_head<R: Rng + ?Sized>(d: usize, classes: usize, unitary_std: f64, projection_std: f64, rng: &mut R) -> Result<HeadParams> {
    let wn = Normal::new(0.0, unitary_std).map_err(|e| crate::error::Error::Domain(e.to_string()))?;
    let pn = Normal::new(0.0, projection_std).map_err(|e| crate::error::Error::Domain(e.to_string()))?;
    let w = CTensor::from_fn(&[d, d], |_| Complex::new(wn.sample(rng), wn.sample(rng)));
    let projection = CTensor::from_fn(&[classes, d], |_| ONE * pn.sample(rng));
    Ok(HeadParams { w, projection })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarnessConfig {
    pub n_qubits: usize,
    pub classes: usize,
    pub states: usize,
    pub shots: u64,
    pub seed: u64,
    pub unitary_std: f64,
    pub projection_std: f64,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            n_qubits: 3,
            classes: 2,
            states: 16,
            shots: 100_000,
            seed: 0,
            unitary_std: 1.0,
            projection_std: 0.001,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarnessReport {
    pub mse_analytic: f64,
    pub mse_sampled: f64,
    pub n_qubits: usize,
    pub shots: u64,
    pub seed: u64,
}

impl fmt::Display for HarnessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mse_analytic = {:e}", self.mse_analytic)?;
        writeln!(f, "mse_sampled = {:e}", self.mse_sampled)?;
        writeln!(f, "n_qubits = {}", self.n_qubits)?;
        writeln!(f, "shots = {}", self.shots)?;
        writeln!(f, "seed = {}", self.seed)
    }
}

/// Compares classical logits with circuit logits over random pure states.
///
/// The head is drawn from `cfg.seed`, states from the same stream, and each
/// state's shots from its own ChaCha stream so batches are reproducible in
/// isolation. With `head = None` a random head of dimension `2^n` is used.
pub fn equivalence_harness(cfg: &HarnessConfig, head: Option<&HeadParams>) -> Result<HarnessReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let owned;
    let head = match head {
        Some(h) => h,
        None => {
            owned = random_head(1 << cfg.n_qubits, cfg.classes, cfg.unitary_std, cfg.projection_std, &mut rng)?;
            &owned
        }
    };
    if head.classes() != cfg.classes {
        return domain_err(format!("head has {} classes, harness expects {}", head.classes(), cfg.classes));
    }
    let circuit = CircuitSpec::from_head(head, cfg.n_qubits)?;
    let d = head.dim();
    let (mut se_analytic, mut se_sampled, mut count) = (0.0, 0.0, 0usize);
    for m in 0..cfg.states {
        let psi = random_pure_state(d, &mut rng);
        let classical = measurement_cls_head(&psi, &head.w, &head.projection, None)?;

        let state = apply_unitary(&prepare_state(&circuit.pad_state(&psi))?, &circuit.unitary)?;
        let analytic = project_probabilities(&measure_analytic(&state), &circuit.projection, None)?;

        let mut shot_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        shot_rng.set_stream(m as u64 + 1);
        let freq = measure_shots(&state, cfg.shots, &mut shot_rng)?.frequencies(state.dim());
        let sampled = project_probabilities(&freq, &circuit.projection, None)?;

        for c in 0..cfg.classes {
            se_analytic += (classical[c] - analytic[c]).powi(2);
            se_sampled += (classical[c] - sampled[c]).powi(2);
            count += 1;
        }
    }
    let n = count.max(1) as f64;
    Ok(HarnessReport {
        mse_analytic: se_analytic / n,
        mse_sampled: se_sampled / n,
        n_qubits: cfg.n_qubits,
        shots: cfg.shots,
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_path_matches_to_round_off() {
        for n in 1..=5 {
            let cfg = HarnessConfig {
                n_qubits: n,
                shots: 10,
                ..HarnessConfig::default()
            };
            let r = equivalence_harness(&cfg, None).unwrap();
            assert!(r.mse_analytic < 1e-16, "n={n}: {}", r.mse_analytic);
        }
    }

    #[test]
    fn padded_head() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let head = random_head(5, 2, 1.0, 0.5, &mut rng).unwrap();
        let cfg = HarnessConfig {
            n_qubits: 3,
            shots: 1000,
            ..HarnessConfig::default()
        };
        let r = equivalence_harness(&cfg, Some(&head)).unwrap();
        assert!(r.mse_analytic < 1e-16);
        let c = CircuitSpec::from_head(&head, 3).unwrap();
        assert!(c.unitary.unitarity_defect().unwrap() < 1e-8);
        assert!(equivalence_harness(&HarnessConfig { n_qubits: 2, ..cfg.clone() }, Some(&head)).is_err());
        assert!(equivalence_harness(&HarnessConfig { classes: 3, ..cfg }, Some(&head)).is_err());
    }

    #[test]
    fn sampled_path_is_close_and_reproducible() {
        let cfg = HarnessConfig::default();
        let a = equivalence_harness(&cfg, None).unwrap();
        assert!(a.mse_sampled < 1e-8, "{}", a.mse_sampled);
        assert_eq!(a, equivalence_harness(&cfg, None).unwrap());
    }

    #[test]
    fn report_format() {
        let r = HarnessReport {
            mse_analytic: 1.5e-33,
            mse_sampled: 2e-11,
            n_qubits: 3,
            shots: 100,
            seed: 7,
        };
        let s = r.to_string();
        assert!(s.contains("mse_analytic = 1.5e-33\n") && s.contains("seed = 7\n"));
    }
}
