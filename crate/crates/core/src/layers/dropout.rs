use rand::Rng;

use crate::ctensor::{CTensor, ZERO};
use crate::error::{domain_err, Result};

/// Zeroes whole complex elements with probability `p` and scales survivors
/// by `1/(1−p)`. Returns the output and the per-element scale (for backward).
pub fn complex_dropout<R: Rng + ?Sized>(z: &CTensor, p: f64, training: bool, rng: &mut R) -> Result<(CTensor, Option<Vec<f64>>)> {
    if !(0.0..1.0).contains(&p) {
        return domain_err(format!("dropout probability {p} outside [0, 1)"));
    }
    if !training || p == 0.0 {
        return Ok((z.clone(), None));
    }
    let keep = 1.0 / (1.0 - p);
    let scale: Vec<f64> = (0..z.len()).map(|_| if rng.random::<f64>() < p { 0.0 } else { keep }).collect();
    let mut out = z.clone();
    for (v, &s) in out.data_mut().iter_mut().zip(&scale) {
        *v = if s == 0.0 { ZERO } else { *v * s };
    }
    Ok((out, Some(scale)))
}

pub fn dropout_backward(grad_out: &CTensor, scale: Option<&[f64]>) -> CTensor {
    match scale {
        None => grad_out.clone(),
        Some(s) => {
            let mut g = grad_out.clone();
            for (v, &k) in g.data_mut().iter_mut().zip(s) {
                *v *= k;
            }
            g
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctensor::Complex;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let z = CTensor::from_fn(&[10], |i| Complex::new(i as f64, 1.0));
        assert_eq!(complex_dropout(&z, 0.0, true, &mut rng).unwrap().0, z);
        assert_eq!(complex_dropout(&z, 0.9, false, &mut rng).unwrap().0, z);
        assert!(complex_dropout(&z, 1.0, true, &mut rng).is_err());
    }

    #[test]
    fn drop_rate_and_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let z = CTensor::full(&[n], Complex::new(1.0, -2.0));
        let (out, _) = complex_dropout(&z, 0.5, true, &mut rng).unwrap();
        let dropped = out.data().iter().filter(|v| **v == ZERO).count() as f64 / n as f64;
        assert!((dropped - 0.5).abs() < 0.01, "{dropped}");
        assert!(out.data().iter().all(|v| *v == ZERO || *v == Complex::new(2.0, -4.0)));
    }
}
