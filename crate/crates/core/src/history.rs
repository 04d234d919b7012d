//! Time-ordered histories, exhaustive/exclusive history sets and class
//! operators.
//!
//! A [`HistorySet`] stores one list of alternatives per time slot and a list
//! of (possibly coarse-grained) histories. Every history is a union of
//! fine-grained index tuples, so coarse graining never has to materialize new
//! operators: the class operator of a union is the sum of its members' class
//! operators.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::linalg::{
    hermiticity_residual, operator_norm, ComplexMatrix, DensityMatrix, HermitianEigen, LinalgError, Projector, Unitary,
    C64, DEFAULT_TOL,
};

/// Tolerance for `Σ P = I` and `P_i P_j = 0`; products amplify rounding so
/// this is looser than the projector tolerance.
pub const EXCLUSIVE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HistoryError {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("expected {expected} slots, found {found}")]
    SlotCount { expected: usize, found: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no time slots given")]
    EmptySlots,
    #[error("slot {0} has no alternatives")]
    EmptySlot(usize),
    #[error("slot {slot} is not exhaustive/exclusive (completeness {completeness:e}, exclusivity {exclusivity:e})")]
    NotExhaustiveExclusive {
        slot: usize,
        completeness: f64,
        exclusivity: f64,
    },
    #[error("slot {slot} alternative {alternative} is not Hermitian")]
    NotHermitian { slot: usize, alternative: usize },
    #[error("invalid partition: {0}")]
    BadPartition(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, HistoryError>;

/// Strictly increasing measurement times `t_1 < ... < t_n`; the state is
/// prepared at `t_0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(HistoryError::InvalidGrid("no times".into()));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(HistoryError::InvalidGrid("non-finite time".into()));
        }
        if times[0] < 0.0 {
            return Err(HistoryError::InvalidGrid(format!(
                "first time {} precedes preparation at 0",
                times[0]
            )));
        }
        if let Some(w) = times.windows(2).find(|w| w[1] <= w[0]) {
            return Err(HistoryError::InvalidGrid(format!(
                "times not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(Self { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// `[t_1 - 0, t_2 - t_1, ..., t_n - t_{n-1}]`.
    pub fn intervals(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.times
            .iter()
            .map(|&t| {
                let dt = t - prev;
                prev = t;
                dt
            })
            .collect()
    }

    /// One more time with spacing equal to the last interval.
    pub fn extended(&self) -> Self {
        let step = *self.intervals().last().expect("nonempty grid");
        let step = if step > 0.0 { step } else { 1.0 };
        let mut times = self.times.clone();
        times.push(self.last() + step);
        Self { times }
    }
}

/// Hamiltonian (in units where the evolution is `exp(-iHt)`) plus the
/// initial state at `t_0 = 0`.
#[derive(Debug, Clone)]
pub struct QuantumDynamics {
    hamiltonian: ComplexMatrix,
    initial_state: DensityMatrix,
    spectrum: HermitianEigen,
}

impl QuantumDynamics {
    pub fn new(hamiltonian: ComplexMatrix, initial_state: DensityMatrix) -> Result<Self> {
        if hamiltonian.nrows() != hamiltonian.ncols() {
            return Err(LinalgError::NotSquare {
                rows: hamiltonian.nrows(),
                cols: hamiltonian.ncols(),
            }
            .into());
        }
        let residual = hermiticity_residual(&hamiltonian);
        if residual > DEFAULT_TOL {
            return Err(LinalgError::NotHermitian { residual }.into());
        }
        if hamiltonian.nrows() != initial_state.dim() {
            return Err(HistoryError::DimensionMismatch {
                expected: hamiltonian.nrows(),
                found: initial_state.dim(),
            });
        }
        let spectrum = HermitianEigen::new(&hamiltonian)?;
        Ok(Self {
            hamiltonian,
            initial_state,
            spectrum,
        })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    pub fn initial_state(&self) -> &DensityMatrix {
        &self.initial_state
    }

    pub fn spectrum(&self) -> &HermitianEigen {
        &self.spectrum
    }

    /// `exp(-iHt)`.
    pub fn evolution(&self, t: f64) -> Unitary {
        Unitary::new(self.spectrum.apply(|lam| C64::from_polar(1.0, -lam * t)))
            .expect("exponential of a Hermitian generator is unitary")
    }

    pub fn with_state(&self, state: DensityMatrix) -> Result<Self> {
        Self::new(self.hamiltonian.clone(), state)
    }
}

/// One projector per time on a shared grid.
#[derive(Debug, Clone)]
pub struct History {
    grid: TimeGrid,
    slots: Vec<Projector>,
}

impl History {
    pub fn new(grid: TimeGrid, slots: Vec<Projector>) -> Result<Self> {
        if slots.len() != grid.len() {
            return Err(HistoryError::SlotCount {
                expected: grid.len(),
                found: slots.len(),
            });
        }
        let dim = slots[0].dim();
        if let Some(p) = slots.iter().find(|p| p.dim() != dim) {
            return Err(HistoryError::DimensionMismatch {
                expected: dim,
                found: p.dim(),
            });
        }
        Ok(Self { grid, slots })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn slots(&self) -> &[Projector] {
        &self.slots
    }
}

/// `C_α = P_n U(t_n − t_{n−1}) ⋯ P_1 U(t_1 − 0)`.
pub fn class_operator(history: &History, dynamics: &QuantumDynamics) -> Result<ComplexMatrix> {
    let dim = dynamics.dim();
    if history.slots[0].dim() != dim {
        return Err(HistoryError::DimensionMismatch {
            expected: dim,
            found: history.slots[0].dim(),
        });
    }
    let mut acc = ComplexMatrix::identity(dim, dim);
    for (p, dt) in history.slots.iter().zip(history.grid.intervals()) {
        acc = p.matrix() * dynamics.evolution(dt).matrix() * acc;
    }
    Ok(acc)
}

/// Residuals of one slot of alternatives.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotResidual {
    /// `‖Σ_i P_i − I‖`
    pub completeness: f64,
    /// `max_{i≠j} ‖P_i P_j‖`
    pub exclusivity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustiveExclusiveReport {
    pub slots: Vec<SlotResidual>,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn validate_exhaustive_exclusive(
    alternatives: &[Vec<ComplexMatrix>],
    tol: f64,
) -> Result<ExhaustiveExclusiveReport> {
    if alternatives.is_empty() {
        return Err(HistoryError::EmptySlots);
    }
    let mut slots = Vec::with_capacity(alternatives.len());
    for (s, alts) in alternatives.iter().enumerate() {
        let first = alts.first().ok_or(HistoryError::EmptySlot(s))?;
        let dim = first.nrows();
        let mut sum = ComplexMatrix::zeros(dim, dim);
        for a in alts {
            if a.nrows() != dim || a.ncols() != dim {
                return Err(HistoryError::DimensionMismatch {
                    expected: dim,
                    found: a.nrows(),
                });
            }
            sum += a;
        }
        let completeness = operator_norm(&(sum - ComplexMatrix::identity(dim, dim)));
        let mut exclusivity: f64 = 0.0;
        for i in 0..alts.len() {
            for j in 0..alts.len() {
                if i != j {
                    exclusivity = exclusivity.max(operator_norm(&(&alts[i] * &alts[j])));
                }
            }
        }
        slots.push(SlotResidual {
            completeness,
            exclusivity,
        });
    }
    let pass = slots.iter().all(|r| r.completeness <= tol && r.exclusivity <= tol);
    Ok(ExhaustiveExclusiveReport {
        slots,
        tolerance: tol,
        pass,
    })
}

/// Index tuple of a fine-grained history: one alternative index per slot.
pub type FineHistory = Vec<usize>;

/// Exhaustive set of histories over a shared grid.
#[derive(Debug, Clone)]
pub struct HistorySet {
    grid: TimeGrid,
    alternatives: Vec<Vec<ComplexMatrix>>,
    histories: Vec<Vec<FineHistory>>,
    sharp: bool,
}

impl HistorySet {
    /// Full product set of sharp projectors; validated exhaustive and exclusive.
    pub fn new(grid: TimeGrid, alternatives: Vec<Vec<Projector>>) -> Result<Self> {
        let mats: Vec<Vec<ComplexMatrix>> = alternatives
            .into_iter()
            .map(|slot| slot.into_iter().map(Projector::into_matrix).collect())
            .collect();
        Self::with_tolerance(grid, mats, EXCLUSIVE_TOL)
    }

    /// Like [`HistorySet::new`] from raw matrices with an explicit tolerance.
    pub fn with_tolerance(grid: TimeGrid, alternatives: Vec<Vec<ComplexMatrix>>, tol: f64) -> Result<Self> {
        Self::check_shape(&grid, &alternatives)?;
        let report = validate_exhaustive_exclusive(&alternatives, tol)?;
        if let Some((slot, r)) = report
            .slots
            .iter()
            .enumerate()
            .find(|(_, r)| r.completeness > tol || r.exclusivity > tol)
        {
            return Err(HistoryError::NotExhaustiveExclusive {
                slot,
                completeness: r.completeness,
                exclusivity: r.exclusivity,
            });
        }
        Ok(Self::full(grid, alternatives, true))
    }

    /// Product set of approximate (Hermitian, not necessarily idempotent)
    /// alternatives. Exhaustivity is not enforced here.
    pub fn approximate(grid: TimeGrid, alternatives: Vec<Vec<ComplexMatrix>>) -> Result<Self> {
        Self::check_shape(&grid, &alternatives)?;
        for (s, slot) in alternatives.iter().enumerate() {
            for (a, m) in slot.iter().enumerate() {
                if hermiticity_residual(m) > DEFAULT_TOL {
                    return Err(HistoryError::NotHermitian {
                        slot: s,
                        alternative: a,
                    });
                }
            }
        }
        Ok(Self::full(grid, alternatives, false))
    }

    fn check_shape(grid: &TimeGrid, alternatives: &[Vec<ComplexMatrix>]) -> Result<()> {
        if alternatives.is_empty() {
            return Err(HistoryError::EmptySlots);
        }
        if alternatives.len() != grid.len() {
            return Err(HistoryError::SlotCount {
                expected: grid.len(),
                found: alternatives.len(),
            });
        }
        let dim = alternatives[0].first().ok_or(HistoryError::EmptySlot(0))?.nrows();
        for (s, slot) in alternatives.iter().enumerate() {
            if slot.is_empty() {
                return Err(HistoryError::EmptySlot(s));
            }
            for m in slot {
                if m.nrows() != dim || m.ncols() != dim {
                    return Err(HistoryError::DimensionMismatch {
                        expected: dim,
                        found: m.nrows(),
                    });
                }
            }
        }
        Ok(())
    }

    fn full(grid: TimeGrid, alternatives: Vec<Vec<ComplexMatrix>>, sharp: bool) -> Self {
        let counts: Vec<usize> = alternatives.iter().map(Vec::len).collect();
        let histories = enumerate_tuples(&counts).into_iter().map(|t| vec![t]).collect();
        Self {
            grid,
            alternatives,
            histories,
            sharp,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.alternatives[0][0].nrows()
    }

    pub fn alternatives(&self) -> &[Vec<ComplexMatrix>] {
        &self.alternatives
    }

    /// Histories as unions of fine-grained tuples.
    pub fn histories(&self) -> &[Vec<FineHistory>] {
        &self.histories
    }

    pub fn len(&self) -> usize {
        self.histories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.histories.is_empty()
    }

    pub fn is_sharp(&self) -> bool {
        self.sharp
    }

    pub fn is_fine_grained(&self) -> bool {
        self.histories.iter().all(|h| h.len() == 1)
    }

    pub fn validate(&self, tol: f64) -> Result<ExhaustiveExclusiveReport> {
        validate_exhaustive_exclusive(&self.alternatives, tol)
    }

    /// Labels like `0.1` for fine histories and `0.1+1.0` for unions.
    pub fn labels(&self) -> Vec<String> {
        self.histories.iter().map(|h| history_label(h)).collect()
    }

    /// Index of the history that contains the given fine tuple.
    pub fn position_of(&self, fine: &[usize]) -> Option<usize> {
        self.histories
            .iter()
            .position(|h| h.iter().any(|f| f.as_slice() == fine))
    }

    /// Indices of histories whose members all have alternative `alt` at `slot`.
    /// This is the single-slot proposition "alternative `alt` at time `slot`"
    /// restricted to the set.
    pub fn slot_proposition(&self, slot: usize, alt: usize) -> Vec<usize> {
        self.histories
            .iter()
            .enumerate()
            .filter(|(_, h)| h.iter().all(|f| f[slot] == alt))
            .map(|(i, _)| i)
            .collect()
    }

    /// Class operators of every fine-grained tuple, keyed in enumeration order.
    pub fn fine_class_operators(&self, dynamics: &QuantumDynamics) -> Result<Vec<(FineHistory, ComplexMatrix)>> {
        let dim = self.dim();
        if dynamics.dim() != dim {
            return Err(HistoryError::DimensionMismatch {
                expected: dim,
                found: dynamics.dim(),
            });
        }
        let evolutions: Vec<ComplexMatrix> = self
            .grid
            .intervals()
            .into_iter()
            .map(|dt| dynamics.evolution(dt).into_matrix())
            .collect();
        let mut level: Vec<(FineHistory, ComplexMatrix)> = vec![(Vec::new(), ComplexMatrix::identity(dim, dim))];
        for (slot, u) in self.alternatives.iter().zip(&evolutions) {
            let mut next = Vec::with_capacity(level.len() * slot.len());
            for (prefix, op) in &level {
                let evolved = u * op;
                for (i, p) in slot.iter().enumerate() {
                    let mut tuple = prefix.clone();
                    tuple.push(i);
                    next.push((tuple, p * &evolved));
                }
            }
            level = next;
        }
        Ok(level)
    }

    /// One class operator per history (sums over coarse-grained members).
    pub fn class_operators(&self, dynamics: &QuantumDynamics) -> Result<Vec<ComplexMatrix>> {
        let fine = self.fine_class_operators(dynamics)?;
        let counts: Vec<usize> = self.alternatives.iter().map(Vec::len).collect();
        let dim = self.dim();
        Ok(self
            .histories
            .iter()
            .map(|members| {
                let mut sum = ComplexMatrix::zeros(dim, dim);
                for f in members {
                    sum += &fine[tuple_index(f, &counts)].1;
                }
                sum
            })
            .collect())
    }

    /// Merge histories block-wise. `partition` lists history indices; blocks
    /// must be disjoint and cover every history.
    pub fn coarse_grain(&self, partition: &[Vec<usize>]) -> Result<Self> {
        let n = self.histories.len();
        let mut seen = vec![false; n];
        for block in partition {
            if block.is_empty() {
                return Err(HistoryError::BadPartition("empty block".into()));
            }
            for &i in block {
                if i >= n {
                    return Err(HistoryError::BadPartition(format!(
                        "history index {i} out of range (set has {n})"
                    )));
                }
                if seen[i] {
                    return Err(HistoryError::BadPartition(format!(
                        "history {i} appears in more than one block"
                    )));
                }
                seen[i] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(HistoryError::BadPartition(format!("history {missing} not covered")));
        }
        let histories = partition
            .iter()
            .map(|block| {
                let members: BTreeSet<FineHistory> =
                    block.iter().flat_map(|&i| self.histories[i].iter().cloned()).collect();
                members.into_iter().collect()
            })
            .collect();
        Ok(Self {
            grid: self.grid.clone(),
            alternatives: self.alternatives.clone(),
            histories,
            sharp: self.sharp,
        })
    }

    /// Same alternatives on a new grid of equal length.
    pub fn with_grid(&self, grid: TimeGrid) -> Result<Self> {
        if grid.len() != self.grid.len() {
            return Err(HistoryError::SlotCount {
                expected: self.grid.len(),
                found: grid.len(),
            });
        }
        Ok(Self { grid, ..self.clone() })
    }
}

pub(crate) fn enumerate_tuples(counts: &[usize]) -> Vec<FineHistory> {
    let mut out: Vec<FineHistory> = vec![Vec::new()];
    for &k in counts {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..k).map(move |i| {
                    let mut t = prefix.clone();
                    t.push(i);
                    t
                })
            })
            .collect();
    }
    out
}

fn tuple_index(tuple: &[usize], counts: &[usize]) -> usize {
    tuple.iter().zip(counts).fold(0, |acc, (&i, &k)| acc * k + i)
}

pub fn fine_label(tuple: &[usize]) -> String {
    tuple.iter().map(usize::to_string).collect::<Vec<_>>().join(".")
}

pub fn history_label(members: &[FineHistory]) -> String {
    members.iter().map(|f| fine_label(f)).collect::<Vec<_>>().join("+")
}

impl fmt::Display for TimeGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.times.iter().map(|t| t.to_string()).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}
