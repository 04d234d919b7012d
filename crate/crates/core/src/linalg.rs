//! Dense complex linear algebra used throughout the crate.
//!
//! Everything here is built on `nalgebra::DMatrix<Complex64>`. The
//! structural types ([`Projector`], [`DensityMatrix`], [`Unitary`]) validate
//! their invariants once at construction and are immutable afterwards.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

/// Default tolerance for the structural predicates.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Tolerance used for density-matrix invariants.
pub const DENSITY_TOL: f64 = 1e-12;

/// Eigenvalues of an accepted projector lie within `PROJECTOR_SPECTRUM_SLACK * tol`
/// of {0, 1}.
pub const PROJECTOR_SPECTRUM_SLACK: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("matrix is not Hermitian (residual {residual:e})")]
    NotHermitian { residual: f64 },
    #[error("matrix is not a projector (hermiticity {hermiticity:e}, idempotency {idempotency:e})")]
    NotProjector { hermiticity: f64, idempotency: f64 },
    #[error("matrix is not unitary (residual {residual:e})")]
    NotUnitary { residual: f64 },
    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("zero vector cannot span a projector")]
    ZeroVector,
}

pub type Result<T> = std::result::Result<T, LinalgError>;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn ensure_square(m: &ComplexMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(LinalgError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

fn ensure_finite(m: &ComplexMatrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(LinalgError::NonFinite)
    }
}

/// Largest singular value.
pub fn operator_norm(m: &ComplexMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// Frobenius norm, `sqrt(Tr(M^† M))`.
pub fn frobenius_norm(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn hermiticity_residual(m: &ComplexMatrix) -> f64 {
    operator_norm(&(m - m.adjoint()))
}

pub fn is_hermitian(m: &ComplexMatrix, tol: f64) -> Result<bool> {
    ensure_square(m)?;
    Ok(hermiticity_residual(m) <= tol)
}

/// True iff `M` is Hermitian and idempotent within `tol` in operator norm.
pub fn is_projector(m: &ComplexMatrix, tol: f64) -> Result<bool> {
    ensure_square(m)?;
    let herm = hermiticity_residual(m);
    if herm > tol {
        return Ok(false);
    }
    Ok(operator_norm(&(m * m - m)) <= tol)
}

pub fn trace(m: &ComplexMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// `Tr(A B)` without forming the product.
pub fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// `U M U^†`.
pub fn conjugate(u: &ComplexMatrix, m: &ComplexMatrix) -> ComplexMatrix {
    u * m * u.adjoint()
}

/// `|v><v| / <v|v>`.
pub fn outer(v: &ComplexVector) -> ComplexMatrix {
    v * v.adjoint()
}

/// Spectral decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, ordered like `values`.
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    pub fn new(m: &ComplexMatrix) -> Result<Self> {
        let n = ensure_square(m)?;
        ensure_finite(m)?;
        // symmetric_eigen reads one triangle only; symmetrize so both agree
        let sym = (m + m.adjoint()).scale(0.5);
        let eig = sym.symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut vectors = ComplexMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        Ok(Self { values, vectors })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `f(M) = V diag(f(λ)) V^†`.
    pub fn apply<F: Fn(f64) -> C64>(&self, f: F) -> ComplexMatrix {
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let fl = f(lam);
            for i in 0..n {
                scaled[(i, j)] *= fl;
            }
        }
        scaled * self.vectors.adjoint()
    }

    /// Eigenspace projectors with eigenvalues grouped when closer than `tol`.
    pub fn grouped_projectors(&self, tol: f64) -> Vec<(f64, ComplexMatrix)> {
        let n = self.dim();
        let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
        for (i, &lam) in self.values.iter().enumerate() {
            match groups.last_mut() {
                Some((first, members)) if (lam - *first).abs() <= tol => members.push(i),
                _ => groups.push((lam, vec![i])),
            }
        }
        groups
            .into_iter()
            .map(|(_, members)| {
                let mean = members.iter().map(|&i| self.values[i]).sum::<f64>() / members.len() as f64;
                let mut p = ComplexMatrix::zeros(n, n);
                for &i in &members {
                    let v = self.vectors.column(i);
                    p += v * v.adjoint();
                }
                (mean, p)
            })
            .collect()
    }
}

/// `exp(-i H t)` for Hermitian `H`, via eigendecomposition.
pub fn hamiltonian_evolution(h: &ComplexMatrix, t: f64) -> Result<Unitary> {
    ensure_square(h)?;
    let residual = hermiticity_residual(h);
    if residual > DEFAULT_TOL {
        return Err(LinalgError::NotHermitian { residual });
    }
    let eig = HermitianEigen::new(h)?;
    Ok(Unitary {
        matrix: eig.apply(|lam| C64::from_polar(1.0, -lam * t)),
    })
}

/// Hermitian idempotent matrix: a single-time proposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    matrix: ComplexMatrix,
    tolerance: f64,
}

impl Projector {
    pub fn new(matrix: ComplexMatrix, tolerance: f64) -> Result<Self> {
        ensure_square(&matrix)?;
        ensure_finite(&matrix)?;
        let hermiticity = hermiticity_residual(&matrix);
        let idempotency = operator_norm(&(&matrix * &matrix - &matrix));
        if hermiticity > tolerance || idempotency > tolerance {
            return Err(LinalgError::NotProjector {
                hermiticity,
                idempotency,
            });
        }
        Ok(Self { matrix, tolerance })
    }

    pub fn with_default_tol(matrix: ComplexMatrix) -> Result<Self> {
        Self::new(matrix, DEFAULT_TOL)
    }

    /// Projector onto the span of `vectors` (Gram-Schmidt, so they need not be
    /// orthonormal).
    pub fn onto_span(vectors: &[ComplexVector]) -> Result<Self> {
        let dim = vectors.first().map(|v| v.len()).ok_or(LinalgError::ZeroVector)?;
        let mut basis: Vec<ComplexVector> = Vec::new();
        for v in vectors {
            if v.len() != dim {
                return Err(LinalgError::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            let mut w = v.clone();
            for b in &basis {
                let proj = b.dotc(&w);
                w -= b * proj;
            }
            let norm = w.norm();
            if norm < 1e-12 {
                return Err(LinalgError::ZeroVector);
            }
            basis.push(w / C64::from(norm));
        }
        let mut m = ComplexMatrix::zeros(dim, dim);
        for b in &basis {
            m += outer(b);
        }
        Self::with_default_tol(m)
    }

    /// Projector onto a set of computational basis vectors.
    pub fn basis(dim: usize, indices: &[usize]) -> Result<Self> {
        let mut m = ComplexMatrix::zeros(dim, dim);
        for &i in indices {
            if i >= dim {
                return Err(LinalgError::DimensionMismatch {
                    expected: dim,
                    found: i + 1,
                });
            }
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        Self::with_default_tol(m)
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(dim, dim),
            tolerance: DEFAULT_TOL,
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn rank(&self) -> usize {
        trace(&self.matrix).re.round() as usize
    }

    pub fn complement(&self) -> Self {
        let n = self.dim();
        Self {
            matrix: ComplexMatrix::identity(n, n) - &self.matrix,
            tolerance: self.tolerance,
        }
    }

    /// `U P U^†`; tolerance grows with the unitarity defect of `U`.
    pub fn conjugated(&self, u: &Unitary) -> Self {
        Self {
            matrix: conjugate(u.matrix(), &self.matrix),
            tolerance: self.tolerance.max(DEFAULT_TOL),
        }
    }
}

/// Positive, unit-trace Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        ensure_square(&matrix)?;
        ensure_finite(&matrix)?;
        let residual = hermiticity_residual(&matrix);
        if residual > DENSITY_TOL {
            return Err(LinalgError::InvalidDensity(format!(
                "hermiticity residual {residual:e}"
            )));
        }
        let tr = trace(&matrix).re;
        if (tr - 1.0).abs() > DENSITY_TOL {
            return Err(LinalgError::InvalidDensity(format!("trace {tr}")));
        }
        let eig = HermitianEigen::new(&matrix)?;
        if let Some(&min) = eig.values.first() {
            if min < -DENSITY_TOL {
                return Err(LinalgError::InvalidDensity(format!("negative eigenvalue {min:e}")));
            }
        }
        Ok(Self { matrix })
    }

    /// `|ψ><ψ|` for a (not necessarily normalized) nonzero vector.
    pub fn pure(psi: &ComplexVector) -> Result<Self> {
        let norm = psi.norm();
        if norm < 1e-300 {
            return Err(LinalgError::ZeroVector);
        }
        let unit = psi / C64::from(norm);
        Self::new(outer(&unit))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(dim, dim).scale(1.0 / dim as f64),
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn evolved(&self, u: &Unitary) -> Self {
        Self {
            matrix: conjugate(u.matrix(), &self.matrix),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Unitary {
    matrix: ComplexMatrix,
}

impl Unitary {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        ensure_square(&matrix)?;
        ensure_finite(&matrix)?;
        let residual = unitarity_residual(&matrix);
        if residual > DEFAULT_TOL {
            return Err(LinalgError::NotUnitary { residual });
        }
        Ok(Self { matrix })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(dim, dim),
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn compose(&self, other: &Unitary) -> Self {
        Self {
            matrix: &self.matrix * &other.matrix,
        }
    }

    /// `exp(iK)` for Hermitian `K`.
    pub fn from_generator(k: &ComplexMatrix) -> Result<Self> {
        hamiltonian_evolution(k, -1.0)
    }
}

/// `‖U^†U − I‖`.
pub fn unitarity_residual(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    operator_norm(&(m.adjoint() * m - ComplexMatrix::identity(n, n)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn diag(values: &[f64]) -> ComplexMatrix {
        ComplexMatrix::from_diagonal(&DVector::from_iterator(
            values.len(),
            values.iter().map(|&v| C64::new(v, 0.0)),
        ))
    }

    #[test]
    fn projector_predicate_cases() {
        assert!(is_projector(&ComplexMatrix::identity(3, 3), 1e-12).unwrap());
        assert!(is_projector(&diag(&[1.0, 0.0, 0.0]), 1e-12).unwrap());
        assert!(!is_projector(&diag(&[0.5, 0.5]), 1e-12).unwrap());
    }

    #[test]
    fn projector_predicate_rejects_non_square() {
        let m = ComplexMatrix::zeros(2, 3);
        assert_eq!(
            is_projector(&m, 1e-12),
            Err(LinalgError::NotSquare { rows: 2, cols: 3 })
        );
    }

    #[test]
    fn non_hermitian_idempotent_is_not_a_projector() {
        // [[1,1],[0,0]] is idempotent but oblique
        let m = ComplexMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(operator_norm(&(&m * &m - &m)), 0.0);
        assert!(!is_projector(&m, 1e-12).unwrap());
    }

    #[test]
    fn zero_generator_gives_identity() {
        let u = hamiltonian_evolution(&ComplexMatrix::zeros(3, 3), 5.0).unwrap();
        assert!(operator_norm(&(u.matrix() - ComplexMatrix::identity(3, 3))) < 1e-15);
    }

    #[test]
    fn diagonal_generator_exponentiates_entrywise() {
        let u = hamiltonian_evolution(&diag(&[1.0, 2.0]), PI).unwrap();
        let expected = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::from_polar(1.0, -PI),
            C64::from_polar(1.0, -2.0 * PI),
        ]));
        assert!(operator_norm(&(u.matrix() - expected)) < 1e-14);
    }

    #[test]
    fn non_hermitian_generator_is_rejected() {
        let m = ComplexMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(
            hamiltonian_evolution(&m, 1.0),
            Err(LinalgError::NotHermitian { .. })
        ));
    }

    #[test]
    fn operator_norm_cases() {
        assert!((operator_norm(&ComplexMatrix::identity(3, 3)) - 1.0).abs() < 1e-14);
        assert!((operator_norm(&diag(&[3.0, -4.0])) - 4.0).abs() < 1e-14);
        // rank one v v^† with |v| = 2 has norm |v|^2; Gram oracle: <v|v> = 4
        let v = ComplexVector::from_vec(vec![c(1.0, 1.0), c(0.0, -1.0), c(1.0, 0.0)]);
        let gram: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        assert!((gram - 4.0).abs() < 1e-15);
        assert!((operator_norm(&(&v * v.adjoint())) - gram).abs() < 1e-13);
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::new(diag(&[0.7, 0.3])).is_ok());
        assert!(DensityMatrix::new(diag(&[0.7, 0.4])).is_err());
        assert!(DensityMatrix::new(diag(&[1.2, -0.2])).is_err());
        let psi = ComplexVector::from_vec(vec![c(3.0, 0.0), c(0.0, 4.0)]);
        let rho = DensityMatrix::pure(&psi).unwrap();
        assert!((trace(rho.matrix()).re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn grouped_projectors_merge_degenerate_levels() {
        let eig = HermitianEigen::new(&diag(&[2.0, 1.0, 2.0])).unwrap();
        let groups = eig.grouped_projectors(1e-9);
        assert_eq!(groups.len(), 2);
        assert!((trace(&groups[1].1).re - 2.0).abs() < 1e-14);
    }

    #[test]
    fn span_projector_orthonormalizes() {
        let p = Projector::onto_span(&[
            ComplexVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]),
            ComplexVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]),
        ])
        .unwrap();
        assert_eq!(p.rank(), 2);
        assert!((p.matrix() - diag(&[1.0, 1.0, 0.0])).norm() < 1e-14);
    }
}
