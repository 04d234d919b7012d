//! Phase space of one degree of freedom on a truncated Fock space.
//!
//! Phase points are labelled by `z = (q + ip)/√(2ħ)`. Coherent states are
//! displaced vacua `U(z)|0⟩`, and a rectangular [`PhaseCell`] is smeared into
//! the positive operator `P_C = (1/π) ∫_C d²z P_z`, which is close to a
//! projector only for large, regular cells.
//!
//! Displacements are computed from a single eigendecomposition of the
//! Hermitian generator `G = i(a† − a)`: writing `z = r e^{iθ}`,
//! `U(z) = R(θ) exp(−i r G) R(θ)†` with `R(θ) = exp(iθ a†a)`.

use std::sync::OnceLock;

use rayon::prelude::*;
use thiserror::Error;

use crate::decoherence::{check_consistency, decoherence_matrix, ConsistencyReport, DecoherenceMatrix, EngineError};
use crate::history::{HistoryError, HistorySet, QuantumDynamics, TimeGrid};
use crate::io::{format_g17, CsvTable};
use crate::linalg::{
    hermiticity_residual, operator_norm, ComplexMatrix, ComplexVector, DensityMatrix, HermitianEigen, LinalgError,
    Projector, Unitary, C64, DEFAULT_TOL,
};

/// Coherent states are trusted while `|z|² ≤ N · SAFE_FRACTION`.
pub const SAFE_FRACTION: f64 = 0.25;
/// Overlap tolerance on the spectrum of a sum of quasiprojectors.
pub const OVERLAP_LIMIT: f64 = 1.05;
pub const QUASI_SPECTRUM_MIN: f64 = -0.05;
/// Largest grid step that still gives four points per unit area.
pub const MAX_GRID_STEP: f64 = 0.5;
/// RK4 step used for the classical flow.
pub const FLOW_STEP: f64 = 1e-2;
/// Central-difference step for `∇H(q, p)`.
pub const GRADIENT_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhaseError {
    #[error("Fock space: {0}")]
    InvalidSpace(String),
    #[error("phase cell: {0}")]
    InvalidCell(String),
    #[error("phase cell has an empty quadrature grid")]
    EmptyGrid,
    #[error("non-finite phase point")]
    NonFinite,
    #[error("displacement dz must be nonzero")]
    ZeroDisplacement,
    #[error("operator dimension {found} does not match Fock truncation {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("cells at slot {slot} overlap: largest eigenvalue of their sum is {max_eigenvalue}")]
    OverlappingCells { slot: usize, max_eigenvalue: f64 },
    #[error("no cells at slot {0}")]
    EmptyPartition(usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

pub type Result<T> = std::result::Result<T, PhaseError>;

/// Fock states `|0⟩ … |N−1⟩` with a value of ħ.
#[derive(Debug)]
pub struct FockSpace {
    truncation: usize,
    hbar: f64,
    generator: OnceLock<HermitianEigen>,
}

impl Clone for FockSpace {
    fn clone(&self) -> Self {
        Self {
            truncation: self.truncation,
            hbar: self.hbar,
            generator: self.generator.clone(),
        }
    }
}

impl PartialEq for FockSpace {
    fn eq(&self, other: &Self) -> bool {
        self.truncation == other.truncation && self.hbar == other.hbar
    }
}

impl FockSpace {
    pub fn new(truncation: usize, hbar: f64) -> Result<Self> {
        if truncation < 2 {
            return Err(PhaseError::InvalidSpace(format!("truncation {truncation} < 2")));
        }
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(PhaseError::InvalidSpace(format!("hbar {hbar}")));
        }
        Ok(Self {
            truncation,
            hbar,
            generator: OnceLock::new(),
        })
    }

    pub fn with_unit_hbar(truncation: usize) -> Result<Self> {
        Self::new(truncation, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.truncation
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn annihilation(&self) -> ComplexMatrix {
        let n = self.truncation;
        ComplexMatrix::from_fn(n, n, |r, c| {
            if c == r + 1 {
                C64::new((c as f64).sqrt(), 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    pub fn creation(&self) -> ComplexMatrix {
        self.annihilation().adjoint()
    }

    pub fn number(&self) -> ComplexMatrix {
        let n = self.truncation;
        ComplexMatrix::from_fn(n, n, |r, c| {
            if r == c {
                C64::new(r as f64, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    /// `q̂ = √(ħ/2) (a + a†)`.
    pub fn position(&self) -> ComplexMatrix {
        let a = self.annihilation();
        (&a + a.adjoint()).scale((self.hbar / 2.0).sqrt())
    }

    /// `p̂ = i√(ħ/2) (a† − a)`.
    pub fn momentum(&self) -> ComplexMatrix {
        let a = self.annihilation();
        (a.adjoint() - &a) * C64::new(0.0, (self.hbar / 2.0).sqrt())
    }

    pub fn vacuum(&self) -> ComplexVector {
        let mut v = ComplexVector::zeros(self.truncation);
        v[0] = C64::new(1.0, 0.0);
        v
    }

    /// True when `|z|²` exceeds the safe fraction of the truncation.
    pub fn truncation_risk(&self, z: PhasePoint) -> bool {
        z.z.norm_sqr() > self.truncation as f64 * SAFE_FRACTION
    }

    fn generator(&self) -> &HermitianEigen {
        self.generator.get_or_init(|| {
            let a = self.annihilation();
            let g = (a.adjoint() - &a) * C64::new(0.0, 1.0);
            HermitianEigen::new(&g).expect("generator is finite and square")
        })
    }

    fn rotation_phases(&self, theta: f64) -> Vec<C64> {
        (0..self.truncation)
            .map(|n| C64::from_polar(1.0, n as f64 * theta))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub z: C64,
}

impl PhasePoint {
    pub fn new(z: C64) -> Result<Self> {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(PhaseError::NonFinite);
        }
        Ok(Self { z })
    }

    pub fn from_qp(q: f64, p: f64, hbar: f64) -> Result<Self> {
        Self::new(C64::new(q, p) / (2.0 * hbar).sqrt())
    }

    pub fn q(&self, hbar: f64) -> f64 {
        self.z.re * (2.0 * hbar).sqrt()
    }

    pub fn p(&self, hbar: f64) -> f64 {
        self.z.im * (2.0 * hbar).sqrt()
    }
}

/// `exp(z a† − z̄ a)` on the truncated space.
pub fn displacement(z: PhasePoint, space: &FockSpace) -> Unitary {
    let (r, theta) = z.z.to_polar();
    let eig = space.generator();
    let core = eig.apply(|lam| C64::from_polar(1.0, -r * lam));
    let phases = space.rotation_phases(theta);
    let n = space.dim();
    let m = ComplexMatrix::from_fn(n, n, |i, j| phases[i] * core[(i, j)] * phases[j].conj());
    Unitary::new(m).expect("conjugated exponential of a Hermitian generator is unitary")
}

/// `U(z)|0⟩` without forming `U(z)`.
pub fn coherent_vector(z: PhasePoint, space: &FockSpace) -> ComplexVector {
    let (r, theta) = z.z.to_polar();
    let eig = space.generator();
    let v = &eig.vectors;
    // R(θ)† |0⟩ = |0⟩, so only the first row of V† is needed
    let n = space.dim();
    let mut out = ComplexVector::zeros(n);
    for k in 0..n {
        let coeff = C64::from_polar(1.0, -r * eig.values[k]) * v[(0, k)].conj();
        for i in 0..n {
            out[i] += v[(i, k)] * coeff;
        }
    }
    let phases = space.rotation_phases(theta);
    for (x, ph) in out.iter_mut().zip(phases) {
        *x *= ph;
    }
    out
}

/// Rank-one projector onto `U(z)|0⟩`.
pub fn coherent_projector(z: PhasePoint, space: &FockSpace) -> Projector {
    let v = coherent_vector(z, space);
    Projector::new(&v * v.adjoint(), 1e-9).expect("outer product of a unit vector")
}

/// Axis-aligned rectangle in `(q, p)` with a quadrature step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseCell {
    pub q_range: (f64, f64),
    pub p_range: (f64, f64),
    pub grid_step: f64,
}

impl PhaseCell {
    pub fn new(q_range: (f64, f64), p_range: (f64, f64), grid_step: f64) -> Result<Self> {
        let finite = [q_range.0, q_range.1, p_range.0, p_range.1, grid_step]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(PhaseError::InvalidCell("non-finite bounds".into()));
        }
        if !(q_range.0 < q_range.1 && p_range.0 < p_range.1) {
            return Err(PhaseError::InvalidCell(format!(
                "degenerate rectangle q={q_range:?} p={p_range:?}"
            )));
        }
        if !(grid_step > 0.0) {
            return Err(PhaseError::InvalidCell(format!("grid step {grid_step}")));
        }
        Ok(Self {
            q_range,
            p_range,
            grid_step,
        })
    }

    /// Square of side `side` centred on `(q, p)`.
    pub fn square(center: (f64, f64), side: f64, grid_step: f64) -> Result<Self> {
        let h = side / 2.0;
        Self::new((center.0 - h, center.0 + h), (center.1 - h, center.1 + h), grid_step)
    }

    pub fn width(&self) -> f64 {
        self.q_range.1 - self.q_range.0
    }

    pub fn height(&self) -> f64 {
        self.p_range.1 - self.p_range.0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn perimeter(&self) -> f64 {
        2.0 * (self.width() + self.height())
    }

    pub fn translated(&self, dq: f64, dp: f64) -> Self {
        Self {
            q_range: (self.q_range.0 + dq, self.q_range.1 + dq),
            p_range: (self.p_range.0 + dp, self.p_range.1 + dp),
            grid_step: self.grid_step,
        }
    }

    /// Image under the harmonic flow `(q, p) ↦ (q cos t + p sin t, p cos t − q sin t)`
    /// for `t` a multiple of π/2, which keeps rectangles axis-aligned.
    pub fn quarter_turns(&self, turns: i64) -> Self {
        let mut c = *self;
        for _ in 0..turns.rem_euclid(4) {
            // (q, p) ↦ (p, −q)
            c = Self {
                q_range: c.p_range,
                p_range: (-c.q_range.1, -c.q_range.0),
                grid_step: c.grid_step,
            };
        }
        c
    }

    /// Midpoint quadrature nodes and the common cell of each node.
    pub fn nodes(&self) -> (Vec<f64>, Vec<f64>, f64, f64) {
        let nq = (self.width() / self.grid_step).ceil().max(1.0) as usize;
        let np = (self.height() / self.grid_step).ceil().max(1.0) as usize;
        let dq = self.width() / nq as f64;
        let dp = self.height() / np as f64;
        let qs = (0..nq).map(|i| self.q_range.0 + (i as f64 + 0.5) * dq).collect();
        let ps = (0..np).map(|j| self.p_range.0 + (j as f64 + 0.5) * dp).collect();
        (qs, ps, dq, dp)
    }
}

/// Smeared coherent-state projector over a cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Quasiprojector {
    pub matrix: ComplexMatrix,
    pub cell: PhaseCell,
    /// `Σ|λ² − λ| / Σλ` over the spectrum: the trace-norm defect per unit weight.
    pub idempotency_defect: f64,
    /// `‖P² − P‖` in operator norm.
    pub operator_defect: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

/// `(1/π) Σ_k P_{z_k} Δq Δp / (2ħ)` over the midpoint grid of the cell.
pub fn quasiprojector(cell: &PhaseCell, space: &FockSpace) -> Result<Quasiprojector> {
    let (qs, ps, dq, dp) = cell.nodes();
    if qs.is_empty() || ps.is_empty() {
        return Err(PhaseError::EmptyGrid);
    }
    let hbar = space.hbar();
    let weight = dq * dp / (2.0 * hbar) / std::f64::consts::PI;
    let n = space.dim();
    // one partial sum per q column, reduced in a fixed order
    let partials: Vec<ComplexMatrix> = qs
        .par_iter()
        .map(|&q| {
            let mut acc = ComplexMatrix::zeros(n, n);
            for &p in &ps {
                let z = PhasePoint::from_qp(q, p, hbar).expect("finite grid node");
                let v = coherent_vector(z, space);
                acc.gerc(C64::new(weight, 0.0), &v, &v, C64::new(1.0, 0.0));
            }
            acc
        })
        .collect();
    let mut matrix = ComplexMatrix::zeros(n, n);
    for p in &partials {
        matrix += p;
    }
    let matrix = (&matrix + matrix.adjoint()).scale(0.5);
    let eig = HermitianEigen::new(&matrix)?;
    let trace: f64 = eig.values.iter().sum();
    let defect_sum: f64 = eig.values.iter().map(|l| (l * l - l).abs()).sum();
    let operator_defect = eig.values.iter().map(|l| (l * l - l).abs()).fold(0.0, f64::max);
    Ok(Quasiprojector {
        idempotency_defect: if trace > 0.0 { defect_sum / trace } else { f64::INFINITY },
        operator_defect,
        min_eigenvalue: eig.values[0],
        max_eigenvalue: *eig.values.last().expect("nonempty spectrum"),
        matrix,
        cell: *cell,
    })
}

/// `arccos(|⟨z|z+dz⟩|)² / |dz|²`.
pub fn fubini_study_pullback(z: PhasePoint, dz: C64, space: &FockSpace) -> Result<f64> {
    if dz.norm() == 0.0 {
        return Err(PhaseError::ZeroDisplacement);
    }
    let w = PhasePoint::new(z.z + dz)?;
    let a = coherent_vector(z, space);
    let b = coherent_vector(w, space);
    let overlap = a.dotc(&b).norm().min(1.0);
    let d = overlap.acos();
    Ok(d * d / dz.norm_sqr())
}

/// `ν(C) = √(2ħ) · perimeter / area`.
pub fn nu_cell(cell: &PhaseCell, space: &FockSpace) -> f64 {
    (2.0 * space.hbar()).sqrt() * cell.perimeter() / cell.area()
}

fn check_dim(m: &ComplexMatrix, space: &FockSpace) -> Result<()> {
    if m.nrows() != space.dim() || m.ncols() != space.dim() {
        return Err(PhaseError::DimensionMismatch {
            expected: space.dim(),
            found: m.nrows(),
        });
    }
    Ok(())
}

/// `H(z) = Tr(P_z H) = ⟨z|H|z⟩`.
pub fn classical_hamiltonian(h: &ComplexMatrix, z: PhasePoint, space: &FockSpace) -> Result<f64> {
    check_dim(h, space)?;
    let v = coherent_vector(z, space);
    Ok(v.dotc(&(h * &v)).re)
}

/// `ħω a†a + Σ_k c_k q̂^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorHamiltonian {
    pub omega: f64,
    /// Coefficient of `q̂^k` at index `k`.
    pub potential: Vec<f64>,
}

impl OscillatorHamiltonian {
    pub fn harmonic(omega: f64) -> Self {
        Self {
            omega,
            potential: Vec::new(),
        }
    }

    pub fn matrix(&self, space: &FockSpace) -> ComplexMatrix {
        let n = space.dim();
        let mut h = space.number().scale(space.hbar() * self.omega);
        let q = space.position();
        let mut power = ComplexMatrix::identity(n, n);
        for (k, &c) in self.potential.iter().enumerate() {
            if k > 0 {
                power = &power * &q;
            }
            if c != 0.0 {
                h += power.scale(c);
            }
        }
        (&h + h.adjoint()).scale(0.5)
    }
}

/// Point reached by Hamilton's equations for `H(q, p) = ⟨z|H|z⟩` (RK4).
pub fn classical_flow(h: &ComplexMatrix, start: PhasePoint, t: f64, space: &FockSpace) -> Result<PhasePoint> {
    check_dim(h, space)?;
    let hbar = space.hbar();
    let energy = |q: f64, p: f64| -> f64 {
        let z = PhasePoint::from_qp(q, p, hbar).expect("finite flow state");
        let v = coherent_vector(z, space);
        v.dotc(&(h * &v)).re
    };
    let field = |q: f64, p: f64| -> (f64, f64) {
        let e = GRADIENT_STEP;
        let dhdq = (energy(q + e, p) - energy(q - e, p)) / (2.0 * e);
        let dhdp = (energy(q, p + e) - energy(q, p - e)) / (2.0 * e);
        (dhdp, -dhdq)
    };
    let steps = (t.abs() / FLOW_STEP).ceil() as usize;
    let (mut q, mut p) = (start.q(hbar), start.p(hbar));
    if steps > 0 {
        let dt = t / steps as f64;
        for _ in 0..steps {
            let k1 = field(q, p);
            let k2 = field(q + 0.5 * dt * k1.0, p + 0.5 * dt * k1.1);
            let k3 = field(q + 0.5 * dt * k2.0, p + 0.5 * dt * k2.1);
            let k4 = field(q + dt * k3.0, p + dt * k3.1);
            q += dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            p += dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        }
    }
    PhasePoint::from_qp(q, p, hbar)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub overlap: f64,
    pub classical_point: PhasePoint,
    /// The start or end point left the safe region `|z|² ≤ N/4`.
    pub truncation_warning: bool,
}

/// `Tr(P_{z_cl(t)} U(t) P_z U(t)†)` with `U(t) = exp(−iHt/ħ)`.
pub fn coherent_stability(z: PhasePoint, h: &ComplexMatrix, t: f64, space: &FockSpace) -> Result<StabilityReport> {
    check_dim(h, space)?;
    let residual = hermiticity_residual(h);
    if residual > DEFAULT_TOL {
        return Err(LinalgError::NotHermitian { residual }.into());
    }
    let z_cl = classical_flow(h, z, t, space)?;
    let eig = HermitianEigen::new(h)?;
    let hbar = space.hbar();
    let u = eig.apply(|lam| C64::from_polar(1.0, -lam * t / hbar));
    let evolved = &u * coherent_vector(z, space);
    let target = coherent_vector(z_cl, space);
    let overlap = target.dotc(&evolved).norm_sqr().clamp(0.0, 1.0);
    Ok(StabilityReport {
        overlap,
        classical_point: z_cl,
        truncation_warning: space.truncation_risk(z) || space.truncation_risk(z_cl),
    })
}

#[derive(Debug, Clone)]
pub struct CellConsistency {
    pub report: ConsistencyReport,
    pub matrix: DecoherenceMatrix,
    /// Largest ν over all cells in all slots.
    pub max_nu: f64,
    /// Per slot, the operator norm of `I − Σ P_C`.
    pub remainder_norms: Vec<f64>,
}

/// Consistency of the product set built from one cell partition per time.
/// Each slot gets one quasiprojector per cell plus the remainder `I − Σ P_C`,
/// which is always the last alternative.
pub fn cell_history_consistency(
    cells_per_time: &[Vec<PhaseCell>],
    grid: &TimeGrid,
    h: &ComplexMatrix,
    rho0: &DensityMatrix,
    epsilon: f64,
    space: &FockSpace,
) -> Result<CellConsistency> {
    check_dim(h, space)?;
    check_dim(rho0.matrix(), space)?;
    let n = space.dim();
    let mut alternatives = Vec::with_capacity(cells_per_time.len());
    let mut remainder_norms = Vec::with_capacity(cells_per_time.len());
    let mut max_nu: f64 = 0.0;
    for (slot, cells) in cells_per_time.iter().enumerate() {
        if cells.is_empty() {
            return Err(PhaseError::EmptyPartition(slot));
        }
        let mut ops = Vec::with_capacity(cells.len() + 1);
        let mut total = ComplexMatrix::zeros(n, n);
        for cell in cells {
            max_nu = max_nu.max(nu_cell(cell, space));
            let qp = quasiprojector(cell, space)?;
            total += &qp.matrix;
            ops.push(qp.matrix);
        }
        let eig = HermitianEigen::new(&total)?;
        let max_eigenvalue = *eig.values.last().expect("nonempty spectrum");
        if max_eigenvalue > OVERLAP_LIMIT {
            return Err(PhaseError::OverlappingCells { slot, max_eigenvalue });
        }
        let remainder = ComplexMatrix::identity(n, n) - total;
        remainder_norms.push(operator_norm(&remainder));
        ops.push(remainder);
        alternatives.push(ops);
    }
    let set = HistorySet::approximate(grid.clone(), alternatives)?;
    let dynamics = QuantumDynamics::new(h.scale(1.0 / space.hbar()), rho0.clone())?;
    let matrix = decoherence_matrix(&set, &dynamics)?;
    let report = check_consistency(&matrix, epsilon)?;
    Ok(CellConsistency {
        report,
        matrix,
        max_nu,
        remainder_norms,
    })
}

/// `Tr(P_z ρ)` on a midpoint grid over a rectangle, as `q,p,husimi` rows.
pub fn husimi_table(rho: &DensityMatrix, region: &PhaseCell, space: &FockSpace) -> Result<CsvTable> {
    check_dim(rho.matrix(), space)?;
    let (qs, ps, _, _) = region.nodes();
    let hbar = space.hbar();
    let rows: Vec<Vec<String>> = qs
        .par_iter()
        .flat_map_iter(|&q| {
            ps.iter().map(move |&p| {
                let z = PhasePoint::from_qp(q, p, hbar).expect("finite grid node");
                let v = coherent_vector(z, space);
                let value = v.dotc(&(rho.matrix() * &v)).re;
                vec![format_g17(q), format_g17(p), format_g17(value)]
            })
        })
        .collect();
    let mut table = CsvTable::new(vec!["q".into(), "p".into(), "husimi".into()]);
    for r in rows {
        table.push_row(r);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zp(re: f64, im: f64) -> PhasePoint {
        PhasePoint::new(C64::new(re, im)).unwrap()
    }

    #[test]
    fn zero_displacement_is_identity() {
        let s = FockSpace::with_unit_hbar(16).unwrap();
        let u = displacement(zp(0.0, 0.0), &s);
        assert!(operator_norm(&(u.matrix() - ComplexMatrix::identity(16, 16))) < 1e-12);
    }

    #[test]
    fn displacement_inverse_and_photon_number() {
        let s = FockSpace::with_unit_hbar(64).unwrap();
        let u = displacement(zp(1.0, 0.0), &s);
        let v = displacement(zp(-1.0, 0.0), &s);
        let residual = operator_norm(&(u.matrix() * v.matrix() - ComplexMatrix::identity(64, 64)));
        assert!(residual <= 1e-8, "{residual}");
        let psi = displacement(zp(2.0, 0.0), &s).matrix() * s.vacuum();
        let mean = psi.dotc(&(s.number() * &psi)).re;
        assert!((mean - 4.0).abs() < 1e-6, "{mean}");
    }

    #[test]
    fn coherent_vector_agrees_with_displacement_column() {
        let s = FockSpace::with_unit_hbar(32).unwrap();
        let z = zp(0.7, -1.1);
        let col = displacement(z, &s).matrix().column(0).into_owned();
        assert!((col - coherent_vector(z, &s)).norm() < 1e-12);
    }

    #[test]
    fn coherent_vector_has_poisson_amplitudes() {
        // ⟨n|z⟩ = e^{−|z|²/2} zⁿ/√n!
        let s = FockSpace::with_unit_hbar(64).unwrap();
        let z = C64::new(1.2, 0.5);
        let v = coherent_vector(PhasePoint::new(z).unwrap(), &s);
        let mut expected = C64::new((-z.norm_sqr() / 2.0).exp(), 0.0);
        for n in 0..20 {
            assert!((v[n] - expected).norm() < 1e-10, "n={n}");
            expected *= z / ((n + 1) as f64).sqrt();
        }
    }

    #[test]
    fn coherent_projector_overlaps() {
        let s = FockSpace::with_unit_hbar(64).unwrap();
        let p0 = coherent_projector(zp(0.0, 0.0), &s);
        assert!((p0.matrix()[(0, 0)].re - 1.0).abs() < 1e-12);
        let p1 = coherent_projector(zp(1.0, 0.0), &s);
        let ov = crate::linalg::trace_product(p0.matrix(), p1.matrix()).re;
        assert!((ov - (-1.0f64).exp()).abs() < 1e-6);
        for z in [zp(3.0, 0.0), zp(-2.0, 2.0)] {
            let m = coherent_projector(z, &s).into_matrix();
            assert!(operator_norm(&(&m * &m - &m)) <= 1e-12);
        }
    }

    #[test]
    fn large_cell_resolves_identity_on_low_levels() {
        let s = FockSpace::with_unit_hbar(32).unwrap();
        // |z|² ≤ 16 is covered by |q|, |p| ≤ 8
        let c = PhaseCell::square((0.0, 0.0), 16.0, 0.25).unwrap();
        let qp = quasiprojector(&c, &s).unwrap();
        for n in 0..8 {
            assert!(qp.matrix[(n, n)].re >= 0.99, "n={n}: {}", qp.matrix[(n, n)]);
        }
        assert!(hermiticity_residual(&qp.matrix) < 1e-12);
    }

    #[test]
    fn tiny_cell_has_small_spectrum() {
        let s = FockSpace::with_unit_hbar(32).unwrap();
        let c = PhaseCell::square((0.0, 0.0), 0.2, 0.05).unwrap();
        let qp = quasiprojector(&c, &s).unwrap();
        assert!(qp.max_eigenvalue < 0.01);
    }

    #[test]
    fn fubini_study_ratio_is_flat() {
        let s = FockSpace::with_unit_hbar(64).unwrap();
        let dz = C64::new(1e-3, 0.0);
        let r0 = fubini_study_pullback(zp(0.0, 0.0), dz, &s).unwrap();
        assert!((r0 - 1.0).abs() < 0.02);
        let r1 = fubini_study_pullback(zp(1.5, -1.0), dz, &s).unwrap();
        assert!((r1 - r0).abs() < 0.02);
        let r2 = fubini_study_pullback(zp(0.0, 0.0), dz * C64::from_polar(1.0, 0.7), &s).unwrap();
        assert!((r2 - r0).abs() < 1e-6);
        assert_eq!(
            fubini_study_pullback(zp(0.0, 0.0), C64::new(0.0, 0.0), &s),
            Err(PhaseError::ZeroDisplacement)
        );
    }

    #[test]
    fn nu_formula_and_homogeneity() {
        let s = FockSpace::with_unit_hbar(8).unwrap();
        for l in [1.0, 4.0, 10.0] {
            let c = PhaseCell::square((0.0, 0.0), l, 0.25).unwrap();
            assert!((nu_cell(&c, &s) - 4.0 * 2f64.sqrt() / l).abs() < 1e-12);
        }
    }

    #[test]
    fn classical_hamiltonian_expectations() {
        let s = FockSpace::with_unit_hbar(64).unwrap();
        let z = zp(1.3, 0.4);
        let n = classical_hamiltonian(&s.number(), z, &s).unwrap();
        assert!((n - z.z.norm_sqr()).abs() < 1e-9);
        let one = classical_hamiltonian(&ComplexMatrix::identity(64, 64), z, &s).unwrap();
        assert!((one - 1.0).abs() < 1e-12);
        let q = classical_hamiltonian(&s.position(), zp(0.8, 0.0), &s).unwrap();
        assert!((q - 2f64.sqrt() * 0.8).abs() < 1e-9);
    }

    #[test]
    fn harmonic_flow_rotates() {
        let s = FockSpace::with_unit_hbar(48).unwrap();
        let h = OscillatorHamiltonian::harmonic(1.0).matrix(&s);
        let z = zp(1.0, 0.5);
        let end = classical_flow(&h, z, 1.0, &s).unwrap();
        let expected = z.z * C64::from_polar(1.0, -1.0);
        assert!((end.z - expected).norm() < 1e-7, "{:?}", end.z);
        let st = coherent_stability(z, &h, 1.0, &s).unwrap();
        assert!(st.overlap >= 1.0 - 1e-6);
        assert!(!st.truncation_warning);
        let still = coherent_stability(z, &h, 0.0, &s).unwrap();
        assert!((still.overlap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quarter_turn_matches_rotation() {
        let c = PhaseCell::new((-4.0, 0.0), (-4.0, 4.0), 0.25).unwrap();
        let r = c.quarter_turns(1);
        assert_eq!(r.q_range, (-4.0, 4.0));
        assert_eq!(r.p_range, (0.0, 4.0));
        assert_eq!(c.quarter_turns(4), c);
    }

    #[test]
    fn overlapping_cells_are_rejected() {
        let s = FockSpace::with_unit_hbar(24).unwrap();
        let c = PhaseCell::square((0.0, 0.0), 4.0, 0.25).unwrap();
        let grid = TimeGrid::new(vec![0.0]).unwrap();
        let h = s.number();
        let rho = DensityMatrix::pure(&s.vacuum()).unwrap();
        let err = cell_history_consistency(&[vec![c, c]], &grid, &h, &rho, 0.1, &s).unwrap_err();
        assert!(matches!(err, PhaseError::OverlappingCells { slot: 0, .. }));
    }
}
