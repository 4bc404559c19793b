//! Builds `U = exp(iH)` from a random Hermitian matrix and checks `UᴴU = I`.

use ::qbert::ctensor::{hermitian_eig, unitary_exp, CTensor, Complex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> ::qbert::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a = CTensor::from_fn(&[6, 6], |_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let h = a.add(&a.hermitian_transpose()?)?.scale_real(0.5);

    let eig = hermitian_eig(&h)?;
    println!("eigenvalues: {:?}", eig.eigenvalues.iter().map(|l| format!("{l:.4}")).collect::<Vec<_>>());

    let u = unitary_exp(&h)?;
    let defect = u.matmul_hn(&u)?.sub(&CTensor::eye(6))?.norm();
    println!("|UᴴU - I|_F = {defect:.2e}");
    Ok(())
}
