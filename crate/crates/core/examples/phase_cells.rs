//! Quasiprojectors of phase-space cells and the consistency of cell histories.

use histkit::phase_space::{
    cell_history_consistency, coherent_vector, nu_cell, quasiprojector, FockSpace, OscillatorHamiltonian, PhaseCell,
    PhasePoint,
};
use histkit::{DensityMatrix, TimeGrid};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let space = FockSpace::with_unit_hbar(96)?;
    for side in [4.0, 6.0, 8.0] {
        let cell = PhaseCell::square((0.0, 0.0), side, 0.25)?;
        let qp = quasiprojector(&cell, &space)?;
        println!(
            "side {side}: nu {:.4} idempotency defect {:.4} spectrum [{:.3}, {:.3}]",
            nu_cell(&cell, &space),
            qp.idempotency_defect,
            qp.min_eigenvalue,
            qp.max_eigenvalue
        );
    }

    let small = FockSpace::with_unit_hbar(64)?;
    let r = 4.0;
    let left = PhaseCell::new((-r, 0.0), (-r, r), 0.25)?;
    let right = PhaseCell::new((0.0, r), (-r, r), 0.25)?;
    let h = OscillatorHamiltonian::harmonic(1.0).matrix(&small);
    let psi = coherent_vector(PhasePoint::from_qp(-2.0, 0.0, 1.0)?, &small);
    let rho = DensityMatrix::pure(&psi)?;
    let grid = TimeGrid::new(vec![0.0, std::f64::consts::FRAC_PI_2])?;
    let turned = vec![left.quarter_turns(1), right.quarter_turns(1)];
    for (name, second) in [("co-rotated", turned), ("fixed", vec![left, right])] {
        let res = cell_history_consistency(&[vec![left, right], second], &grid, &h, &rho, 0.1, &small)?;
        println!(
            "{name}: largest |d(a,b)| {:.3e}  max nu {:.3}",
            res.report.max_off_diagonal, res.max_nu
        );
    }
    Ok(())
}
