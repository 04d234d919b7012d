//! Two consistent sets that infer orthogonal propositions from the same datum.

use histkit::random;
use histkit::window::{contrary_between, contrary_inference_finder, three_box_sets, ContraryOptions};
use histkit::{QuantumDynamics, TimeGrid};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = TimeGrid::new(vec![0.5, 1.0])?;
    let (dynamics, s1, s2) = three_box_sets(&grid)?;
    if let Some(w) = contrary_between(&s1, &s2, &dynamics, 0.01, 0)? {
        println!(
            "three boxes: p(a) = {:.4}, p(b|a) = {}, p(b'|a) = {}",
            w.p_a, w.p_b_given_a, w.p_b_prime_given_a
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let dynamics = QuantumDynamics::new(random::hermitian(&mut rng, 3), random::pure_state(&mut rng, 3))?;
    match contrary_inference_finder(&dynamics, &TimeGrid::new(vec![0.0, 1.0])?, &ContraryOptions::default())? {
        Some(w) => println!(
            "search: p(a) = {:.4}, p(b|a) = {:.9}, p(b'|a) = {:.9}, |b b'| = {:.1e}",
            w.p_a, w.p_b_given_a, w.p_b_prime_given_a, w.orthogonality
        ),
        None => println!("search: no witness"),
    }
    Ok(())
}
