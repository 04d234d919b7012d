//! Decoherence functional `d(α, α') = Tr(C_α ρ₀ C_α'^†)`, consistency
//! verdicts, probabilities and implication.

use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::history::{HistoryError, HistorySet, QuantumDynamics};
use crate::io::{format_complex, format_g17, CsvTable, KvReport};
use crate::linalg::{ComplexMatrix, C64};

/// Off-diagonals at or below this are treated as exactly zero.
pub const EXACT_TOL: f64 = 1e-10;
/// Diagonal values may stray this far outside [0, 1] before being refused.
pub const PROBABILITY_SLACK: f64 = 1e-9;
/// Histories with less weight than this are excluded from the normalized ratio.
pub const MASS_FLOOR: f64 = 1e-12;
pub const IMPLICATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error("epsilon must be nonnegative, got {0}")]
    NegativeEpsilon(f64),
    #[error("probabilities refused: set is inconsistent (worst ratio {worst_ratio:e} > epsilon {epsilon:e})")]
    Refused { worst_ratio: f64, epsilon: f64 },
    #[error("diagonal entry {index} = {value:e} is outside [0, 1]")]
    InvalidDiagonal { index: usize, value: f64 },
    #[error("probabilities sum to {sum}, outside tolerance {tolerance:e}")]
    Normalization { sum: f64, tolerance: f64 },
    #[error("conditioning proposition has zero probability")]
    ZeroMass,
    #[error("literal implication needs disjoint propositions")]
    NotDisjoint,
    #[error("history index {index} out of range ({len} histories)")]
    IndexOutOfRange { index: usize, len: usize },
}

pub type Result<T> = std::result::Result<T, EngineError>;

/// Hermitian matrix of pairwise decoherence-functional values.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoherenceMatrix {
    labels: Vec<String>,
    values: ComplexMatrix,
}

impl DecoherenceMatrix {
    pub fn from_parts(labels: Vec<String>, values: ComplexMatrix) -> Self {
        assert_eq!(labels.len(), values.nrows());
        assert_eq!(values.nrows(), values.ncols());
        Self { labels, values }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn values(&self) -> &ComplexMatrix {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, a: usize, b: usize) -> C64 {
        self.values[(a, b)]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.values[(i, i)].re).collect()
    }

    /// `max |d(a,b) − conj d(b,a)|`.
    pub fn hermiticity_residual(&self) -> f64 {
        let n = self.len();
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                worst = worst.max((self.values[(a, b)] - self.values[(b, a)].conj()).norm());
            }
        }
        worst
    }

    pub fn total_sum(&self) -> C64 {
        self.values.iter().sum()
    }

    /// `|Σ d − 1|`.
    pub fn normalization_residual(&self) -> f64 {
        (self.total_sum() - C64::new(1.0, 0.0)).norm()
    }

    pub fn max_off_diagonal(&self) -> f64 {
        let n = self.len();
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    worst = worst.max(self.values[(a, b)].norm());
                }
            }
        }
        worst
    }

    /// Header row of labels followed by one row per history.
    pub fn to_csv(&self) -> CsvTable {
        let mut table = CsvTable::new(self.labels.clone());
        for a in 0..self.len() {
            table.push_row((0..self.len()).map(|b| format_complex(self.values[(a, b)])).collect());
        }
        table
    }

    pub fn from_csv(table: &CsvTable) -> Option<Self> {
        let n = table.header.len();
        if table.rows.len() != n || table.rows.iter().any(|r| r.len() != n) {
            return None;
        }
        let mut values = ComplexMatrix::zeros(n, n);
        for (a, row) in table.rows.iter().enumerate() {
            for (b, cell) in row.iter().enumerate() {
                values[(a, b)] = crate::io::parse_complex(cell)?;
            }
        }
        Some(Self {
            labels: table.header.clone(),
            values,
        })
    }
}

/// Evaluates `d` over every pair of histories in the set.
pub fn decoherence_matrix(set: &HistorySet, dynamics: &QuantumDynamics) -> Result<DecoherenceMatrix> {
    let ops = set.class_operators(dynamics)?;
    let rho = dynamics.initial_state().matrix();
    let weighted: Vec<ComplexMatrix> = ops.par_iter().map(|c| c * rho).collect();
    let n = ops.len();
    let rows: Vec<Vec<C64>> = (0..n)
        .into_par_iter()
        .map(|a| {
            (0..n)
                .map(|b| {
                    // Tr(C_a ρ C_b^†) = Σ_ij (C_a ρ)_ij conj((C_b)_ij)
                    weighted[a].iter().zip(ops[b].iter()).map(|(x, y)| x * y.conj()).sum()
                })
                .collect()
        })
        .collect();
    let values = ComplexMatrix::from_fn(n, n, |a, b| rows[a][b]);
    Ok(DecoherenceMatrix {
        labels: set.labels(),
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Exact,
    EpsilonConsistent,
    Inconsistent,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Exact => "exact",
            Verdict::EpsilonConsistent => "epsilon_consistent",
            Verdict::Inconsistent => "inconsistent",
        }
    }

    pub fn is_consistent(&self) -> bool {
        !matches!(self, Verdict::Inconsistent)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyOptions {
    /// Off-diagonal magnitude below which the set counts as exactly consistent.
    pub exact_tol: f64,
    /// Compare `|d(a,b)| / sqrt(d(a,a) d(b,b))` against ε; otherwise `|d(a,b)|`.
    pub normalized: bool,
    /// Pairs touching a history lighter than this are skipped in normalized mode.
    pub mass_floor: f64,
}

impl Default for ConsistencyOptions {
    fn default() -> Self {
        Self {
            exact_tol: EXACT_TOL,
            normalized: true,
            mass_floor: MASS_FLOOR,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub verdict: Verdict,
    pub epsilon_used: f64,
    pub worst_pair: Option<(String, String)>,
    pub worst_ratio: f64,
    pub max_off_diagonal: f64,
}

impl ConsistencyReport {
    pub fn to_kv(&self) -> KvReport {
        let mut kv = KvReport::new();
        kv.push("verdict", self.verdict)
            .push_f64("epsilon_used", self.epsilon_used);
        match &self.worst_pair {
            Some((a, b)) => kv.push("worst_pair", format!("{a}|{b}")),
            None => kv.push("worst_pair", "none"),
        };
        kv.push_f64("worst_ratio", self.worst_ratio)
            .push_f64("max_off_diagonal", self.max_off_diagonal);
        kv
    }
}

pub fn check_consistency(dm: &DecoherenceMatrix, epsilon: f64) -> Result<ConsistencyReport> {
    check_consistency_with(dm, epsilon, &ConsistencyOptions::default())
}

pub fn check_consistency_with(
    dm: &DecoherenceMatrix,
    epsilon: f64,
    opts: &ConsistencyOptions,
) -> Result<ConsistencyReport> {
    if !(epsilon >= 0.0) {
        return Err(EngineError::NegativeEpsilon(epsilon));
    }
    let n = dm.len();
    let diag = dm.diagonal();
    let max_off_diagonal = dm.max_off_diagonal();
    let mut worst_ratio: f64 = 0.0;
    let mut worst_pair = None;
    for a in 0..n {
        for b in (a + 1)..n {
            let off = dm.values[(a, b)].norm().max(dm.values[(b, a)].norm());
            let ratio = if opts.normalized {
                if diag[a] <= opts.mass_floor || diag[b] <= opts.mass_floor {
                    continue;
                }
                off / (diag[a] * diag[b]).sqrt()
            } else {
                off
            };
            if worst_pair.is_none() || ratio > worst_ratio {
                worst_ratio = ratio;
                worst_pair = Some((dm.labels[a].clone(), dm.labels[b].clone()));
            }
        }
    }
    let verdict = if max_off_diagonal <= opts.exact_tol {
        Verdict::Exact
    } else if worst_ratio <= epsilon {
        Verdict::EpsilonConsistent
    } else {
        Verdict::Inconsistent
    };
    Ok(ConsistencyReport {
        verdict,
        epsilon_used: epsilon,
        worst_pair,
        worst_ratio,
        max_off_diagonal,
    })
}

/// Probability assignment `p(α) = d(α, α)` over a consistent set.
#[derive(Debug, Clone, PartialEq)]
pub struct Probabilities {
    pub labels: Vec<String>,
    pub values: Vec<f64>,
}

impl Probabilities {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Probability of a union of histories.
    pub fn mass(&self, prop: &[usize]) -> Result<f64> {
        let mut seen = vec![false; self.len()];
        let mut total = 0.0;
        for &i in prop {
            if i >= self.len() {
                return Err(EngineError::IndexOutOfRange {
                    index: i,
                    len: self.len(),
                });
            }
            if !seen[i] {
                seen[i] = true;
                total += self.values[i];
            }
        }
        Ok(total)
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(vec!["history".into(), "probability".into()]);
        for (l, p) in self.labels.iter().zip(&self.values) {
            t.push_row(vec![l.clone(), format_g17(*p)]);
        }
        t
    }
}

/// Refuses inconsistent sets; otherwise returns the clipped diagonal.
pub fn probabilities(dm: &DecoherenceMatrix, epsilon: f64) -> Result<Probabilities> {
    probabilities_with(dm, epsilon, &ConsistencyOptions::default())
}

pub fn probabilities_with(dm: &DecoherenceMatrix, epsilon: f64, opts: &ConsistencyOptions) -> Result<Probabilities> {
    let report = check_consistency_with(dm, epsilon, opts)?;
    if report.verdict == Verdict::Inconsistent {
        return Err(EngineError::Refused {
            worst_ratio: report.worst_ratio,
            epsilon,
        });
    }
    let mut values = Vec::with_capacity(dm.len());
    for (index, value) in dm.diagonal().into_iter().enumerate() {
        if !(-PROBABILITY_SLACK..=1.0 + PROBABILITY_SLACK).contains(&value) {
            return Err(EngineError::InvalidDiagonal { index, value });
        }
        values.push(value.clamp(0.0, 1.0));
    }
    let sum: f64 = values.iter().sum();
    let tolerance = PROBABILITY_SLACK.max(dm.len() as f64 * epsilon);
    if (sum - 1.0).abs() > tolerance {
        return Err(EngineError::Normalization { sum, tolerance });
    }
    Ok(Probabilities {
        labels: dm.labels.clone(),
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ImplicationMode {
    /// `p(a ∩ b) = p(a)`: b has conditional probability one given a.
    #[default]
    Conditional,
    /// `p(a ∪ b) = p(a)` for disjoint a, b, read literally.
    Literal,
}

/// `p(b | a)`.
pub fn conditional_probability(p: &Probabilities, a: &[usize], b: &[usize]) -> Result<f64> {
    let pa = p.mass(a)?;
    if pa <= 0.0 {
        return Err(EngineError::ZeroMass);
    }
    let both: Vec<usize> = a.iter().copied().filter(|i| b.contains(i)).collect();
    Ok(p.mass(&both)? / pa)
}

pub fn implies(p: &Probabilities, a: &[usize], b: &[usize], mode: ImplicationMode) -> Result<bool> {
    implies_within(p, a, b, mode, IMPLICATION_TOL)
}

pub fn implies_within(p: &Probabilities, a: &[usize], b: &[usize], mode: ImplicationMode, tol: f64) -> Result<bool> {
    let pa = p.mass(a)?;
    match mode {
        ImplicationMode::Conditional => {
            if pa <= 0.0 {
                return Err(EngineError::ZeroMass);
            }
            let both: Vec<usize> = a.iter().copied().filter(|i| b.contains(i)).collect();
            Ok((p.mass(&both)? - pa).abs() <= tol)
        }
        ImplicationMode::Literal => {
            if a.iter().any(|i| b.contains(i)) {
                return Err(EngineError::NotDisjoint);
            }
            let union: Vec<usize> = a.iter().chain(b).copied().collect();
            Ok((p.mass(&union)? - pa).abs() <= tol)
        }
    }
}
