//! Spectral and energy windows, and their classicality certificates.

use histkit::random;
use histkit::window::{certify_classicality, energy_window, spectral_window};
use histkit::{QuantumDynamics, TimeGrid};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let dynamics = QuantumDynamics::new(random::hermitian(&mut rng, 4), random::density(&mut rng, 4))?;
    let grid = TimeGrid::new(vec![0.3, 1.1, 2.6])?;
    for (name, w) in [
        ("spectral", spectral_window(&dynamics, &grid)?),
        ("energy", energy_window(&dynamics, &grid)?),
    ] {
        let cert = certify_classicality(&w, &dynamics, 1e-8)?;
        println!(
            "{name}: {} histories, verdict {}, largest off-diagonal {:.2e}, persistent {}",
            w.history_set.len(),
            w.report.verdict,
            w.report.max_off_diagonal,
            cert.persistent
        );
    }
    Ok(())
}
