//! Statevector simulation of the measurement classifier.
//!
//! Basis index `j` encodes `|b_{n−1}…b_0⟩` with qubit 0 as the least
//! significant bit. The head unitary is applied as one dense gate.

mod harness;

pub use harness::{equivalence_harness, random_head, random_pure_state, CircuitSpec, HarnessConfig, HarnessReport, HeadParams};

use std::collections::BTreeMap;

use rand::Rng;

use crate::ctensor::{vec_norm, CTensor, Complex};
use crate::error::{domain_err, Result};

/// States within this distance of unit norm are renormalized silently.
pub const RENORM_TOL: f64 = 1e-6;
/// Maximum Frobenius defect `‖UᴴU − I‖` accepted as a gate.
pub const UNITARY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    n_qubits: usize,
    amplitudes: Vec<Complex>,
}

impl QuantumState {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex] {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }
}

/// Validates and (within [`RENORM_TOL`]) renormalizes an amplitude vector.
pub fn prepare_state(amplitudes: &[Complex]) -> Result<QuantumState> {
    let d = amplitudes.len();
    if d < 2 || !d.is_power_of_two() {
        return domain_err(format!("state length {d} is not a power of two ≥ 2"));
    }
    let n = vec_norm(amplitudes);
    if !n.is_finite() || (n - 1.0).abs() > RENORM_TOL {
        return domain_err(format!("state norm {n} deviates from 1 by more than {RENORM_TOL}"));
    }
    Ok(QuantumState {
        n_qubits: d.trailing_zeros() as usize,
        amplitudes: amplitudes.iter().map(|z| z / n).collect(),
    })
}

pub fn apply_unitary(state: &QuantumState, u: &CTensor) -> Result<QuantumState> {
    let (r, c) = u.dims2()?;
    if r != c || r != state.dim() {
        return domain_err(format!("gate [{r}, {c}] on a {}-dimensional state", state.dim()));
    }
    let defect = u.unitarity_defect()?;
    if defect > UNITARY_TOL {
        return domain_err(format!("gate is not unitary: ‖UᴴU − I‖ = {defect:.3e}"));
    }
    Ok(QuantumState {
        n_qubits: state.n_qubits,
        amplitudes: u.matvec(&state.amplitudes)?,
    })
}

/// Born-rule probabilities `|amplitude_j|²`.
pub fn measure_analytic(state: &QuantumState) -> Vec<f64> {
    state.amplitudes.iter().map(|z| z.norm_sqr()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotResult {
    /// Basis index → occurrences; indices never observed are absent.
    pub counts: BTreeMap<usize, u64>,
    pub shots: u64,
}

impl ShotResult {
    /// Empirical frequencies over all `dim` basis states.
    pub fn frequencies(&self, dim: usize) -> Vec<f64> {
        let mut f = vec![0.0; dim];
        for (&j, &c) in &self.counts {
            f[j] = c as f64 / self.shots as f64;
        }
        f
    }

    /// Adds the counts of an independent batch.
    pub fn merge(&mut self, other: &ShotResult) {
        for (&j, &c) in &other.counts {
            *self.counts.entry(j).or_insert(0) += c;
        }
        self.shots += other.shots;
    }
}

/// `shots` independent basis measurements by inverse-CDF sampling.
pub fn measure_shots<R: Rng + ?Sized>(state: &QuantumState, shots: u64, rng: &mut R) -> Result<ShotResult> {
    if shots == 0 {
        return domain_err("at least one shot is required");
    }
    let p = measure_analytic(state);
    let mut cdf = Vec::with_capacity(p.len());
    let mut acc = 0.0;
    for q in &p {
        acc += q;
        cdf.push(acc);
    }
    let total = acc;
    let last_live = p.iter().rposition(|&q| q > 0.0).unwrap_or(0);
    let mut counts = vec![0u64; p.len()];
    for _ in 0..shots {
        let u = rng.random::<f64>() * total;
        // first index with cdf > u; never land on a zero-probability tail
        let j = cdf.partition_point(|&c| c <= u).min(last_live);
        counts[j] += 1;
    }
    Ok(ShotResult {
        counts: counts.into_iter().enumerate().filter(|(_, c)| *c > 0).collect(),
        shots,
    })
}
