//! A spin precessing about x, asked twice whether it points up along z.

use histkit::linalg::{c, Projector};
use histkit::{
    check_consistency, decoherence_matrix, probabilities, ComplexMatrix, DensityMatrix, HistorySet, QuantumDynamics,
    TimeGrid,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let h = ComplexMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
    let up = nalgebra::DVector::from_vec(vec![c(0.6, 0.0), c(0.0, 0.8)]);
    let dynamics = QuantumDynamics::new(h, DensityMatrix::pure(&up)?)?;
    let z = vec![Projector::basis(2, &[0])?, Projector::basis(2, &[1])?];

    for gap in [0.4, 1.0, std::f64::consts::PI] {
        let grid = TimeGrid::new(vec![0.25, 0.25 + gap])?;
        let set = HistorySet::new(grid, vec![z.clone(), z.clone()])?;
        let dm = decoherence_matrix(&set, &dynamics)?;
        let report = check_consistency(&dm, 1e-8)?;
        println!(
            "gap {gap:.4}: {} worst ratio {:.3e}",
            report.verdict, report.worst_ratio
        );
        if let Ok(p) = probabilities(&dm, 1e-8) {
            for (label, v) in p.labels.iter().zip(&p.values) {
                println!("  p({label}) = {v:.6}");
            }
        }
    }
    Ok(())
}
