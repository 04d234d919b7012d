//! Classical histories on a ring: decoherence matrix and ε-determinism.

use histkit::classical::{
    classical_decoherence_matrix, convex_dynamics, epsilon_deterministic_check, Cell, ClassicalState, DiscreteMetric,
    Permutation, SampleSpace,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 12;
    let space = SampleSpace::uniform(n)?;
    let step = convex_dynamics(&[0.9, 0.1], &[Permutation::shift(n, 1), Permutation::identity(n)])?;
    let halves = vec![Cell::new(n, 0..6)?, Cell::new(n, 6..n)?];
    let dm = classical_decoherence_matrix(
        &space,
        &[halves.clone(), halves],
        &[step.clone(), step.clone()],
        &ClassicalState::point(&space, 4)?,
    )?;
    println!("histories: {:?}", dm.labels());
    println!("diagonal:  {:?}", dm.diagonal());
    println!("largest off-diagonal: {}", dm.max_off_diagonal());

    let metric = DiscreteMetric::cycle(n, 1.0)?;
    let probe = Cell::new(n, 0..6)?;
    for eps in [0.2, 0.5] {
        let report = epsilon_deterministic_check(&space, &metric, &step, eps, std::slice::from_ref(&probe), &[])?;
        let p = &report.probes[0];
        println!("eps {eps}: nu {:.3} escape {:.3} pass {}", p.nu, p.escape, report.pass);
    }
    Ok(())
}
