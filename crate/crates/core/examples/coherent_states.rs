//! Coherent states in a truncated Fock space: overlaps, metric and stability.

use histkit::linalg::{c, trace_product};
use histkit::phase_space::{
    coherent_projector, coherent_stability, fubini_study_pullback, FockSpace, OscillatorHamiltonian, PhasePoint,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let space = FockSpace::with_unit_hbar(64)?;
    let z = PhasePoint::new(c(0.0, 0.0))?;
    let w = PhasePoint::new(c(1.0, 0.5))?;
    let overlap = trace_product(
        coherent_projector(z, &space).matrix(),
        coherent_projector(w, &space).matrix(),
    )
    .re;
    println!("Tr(Pz Pw) = {overlap:.9}  closed form {:.9}", (-1.25f64).exp());
    println!(
        "metric ratio at z = 1: {:.6}",
        fubini_study_pullback(PhasePoint::new(c(1.0, 0.0))?, c(1e-3, 0.0), &space)?
    );

    let start = PhasePoint::from_qp(2f64.sqrt(), 0.0, 1.0)?;
    for (name, h) in [
        ("harmonic", OscillatorHamiltonian::harmonic(1.0)),
        (
            "quartic",
            OscillatorHamiltonian {
                omega: 1.0,
                potential: vec![0.0, 0.0, 0.0, 0.0, 0.01],
            },
        ),
    ] {
        let r = coherent_stability(start, &h.matrix(&space), 0.5, &space)?;
        println!("{name}: overlap after t = 0.5 is {:.8}", r.overlap);
    }
    Ok(())
}
