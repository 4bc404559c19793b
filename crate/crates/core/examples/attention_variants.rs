//! Attention weights of the four score activations on the same random
//! complex queries and keys.

use ::qbert::ctensor::{CTensor, Complex};
use ::qbert::layers::attention::attention_weights;
use ::qbert::layers::AttentionActivation;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> ::qbert::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut rand = |shape: &[usize]| CTensor::from_fn(shape, |_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let (q, k) = (rand(&[4, 8]), rand(&[4, 8]));
    let scores = q.matmul_nh(&k)?.scale_real(1.0 / 8f64.sqrt());
    let mask = [false, false, false, true];

    let variants = [
        ("split-softmax", AttentionActivation::SplitSoftmax),
        ("mod-softmax", AttentionActivation::ModSoftmax),
        ("real-softmax", AttentionActivation::RealSoftmax),
        ("sq-zrelu", AttentionActivation::SquaredZReLU { bias: Complex::new(0.1, 0.1) }),
    ];
    for (name, act) in variants {
        let a = attention_weights(&scores, act, &mask)?;
        let row: Vec<String> = a.row(0).iter().map(|z| format!("{:.3}{:+.3}i", z.re, z.im)).collect();
        let sum: Complex = a.row(0).iter().sum();
        println!("{name:<14} row 0: [{}]  sum {:.3}{:+.3}i", row.join(", "), sum.re, sum.im);
    }
    Ok(())
}
