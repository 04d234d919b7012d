//! Seeded random draws of Hermitian matrices, unitaries and states.
//!
//! All generators take a caller-owned RNG so that sweeps stay reproducible.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{ComplexMatrix, ComplexVector, DensityMatrix, Unitary, C64};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// GUE-like Hermitian matrix with unit-variance entries.
pub fn hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(dim, dim);
    for i in 0..dim {
        m[(i, i)] = C64::new(gaussian(rng), 0.0);
        for j in (i + 1)..dim {
            let z = C64::new(gaussian(rng), gaussian(rng)) / 2f64.sqrt();
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

/// Haar-ish unitary from Gram-Schmidt on a Ginibre matrix.
pub fn unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Unitary {
    let mut cols: Vec<ComplexVector> = Vec::with_capacity(dim);
    while cols.len() < dim {
        let mut v = ComplexVector::from_fn(dim, |_, _| C64::new(gaussian(rng), gaussian(rng)));
        for b in &cols {
            let proj = b.dotc(&v);
            v -= b * proj;
        }
        let norm = v.norm();
        if norm > 1e-8 {
            cols.push(v / C64::from(norm));
        }
    }
    let m = ComplexMatrix::from_columns(&cols);
    Unitary::new(m).expect("Gram-Schmidt output is unitary")
}

pub fn pure_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexVector {
    let v = ComplexVector::from_fn(dim, |_, _| C64::new(gaussian(rng), gaussian(rng)));
    let norm = v.norm();
    v / C64::from(norm)
}

pub fn pure_state<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DensityMatrix {
    DensityMatrix::pure(&pure_vector(rng, dim)).expect("nonzero vector")
}

/// Mixed state `G G^† / Tr(G G^†)` from a Ginibre matrix.
pub fn density<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DensityMatrix {
    let g = ComplexMatrix::from_fn(dim, dim, |_, _| C64::new(gaussian(rng), gaussian(rng)));
    let mut m = &g * g.adjoint();
    let tr = m.trace().re;
    m /= C64::from(tr);
    // kill the rounding-level anti-Hermitian part
    let m = (&m + m.adjoint()).scale(0.5);
    DensityMatrix::new(m).expect("Ginibre construction is a valid state")
}
