//! Annealed search for consistent three-time qubit sets.

use histkit::random;
use histkit::window::{search_consistent_sets, SearchFamily, SearchOptions};
use histkit::{QuantumDynamics, TimeGrid};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let dynamics = QuantumDynamics::new(random::hermitian(&mut rng, 2), random::density(&mut rng, 2))?;
    let grid = TimeGrid::new(vec![0.0, 0.8, 1.7])?;
    let opts = SearchOptions {
        restarts: 8,
        epsilon: 1e-8,
        seed: 1,
        ..SearchOptions::default()
    };
    let found = search_consistent_sets(&dynamics, &grid, &SearchFamily::uniform(3, vec![1, 1]), &opts)?;
    println!(
        "{} of {} restarts reached score ≤ {}",
        found.len(),
        opts.restarts,
        opts.epsilon
    );
    for (i, w) in found.iter().enumerate() {
        println!("  #{i}: score {:.3e} verdict {}", w.score, w.report.verdict);
    }
    Ok(())
}
