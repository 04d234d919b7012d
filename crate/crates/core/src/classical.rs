//! Finite classical history theories.
//!
//! A [`SampleSpace`] is a finite set of points with positive weights (the
//! measure μ). Propositions are [`Cell`]s, dynamics are row-stochastic kernels
//! `T(x → y)` that are also column-stochastic ([`BistochasticMap`]), and states
//! are densities with respect to μ. Internally everything propagates masses
//! `m(x) = ρ(x) μ(x)`, so `T†` is the transpose action `m'(y) = Σ_x m(x) T(x → y)`.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::decoherence::DecoherenceMatrix;
use crate::history::{enumerate_tuples, fine_label};
use crate::io::{format_g17, KvReport};
use crate::linalg::{ComplexMatrix, C64};

/// Row and column sums of a bistochastic map must be 1 within this.
pub const STOCHASTIC_TOL: f64 = 1e-12;
pub const NORMALIZATION_TOL: f64 = 1e-12;
pub const TRIANGLE_TOL: f64 = 1e-9;
/// Dilation radii `k·ℓ` tried when looking for a target cell.
pub const DILATION_STEPS: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassicalError {
    #[error("sample space: {0}")]
    InvalidSpace(String),
    #[error("point {point} outside sample space of {len} points")]
    PointOutOfRange { point: usize, len: usize },
    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("{0} is not a bijection")]
    NotBijective(String),
    #[error("row {row} sums to {sum}")]
    RowSum { row: usize, sum: f64 },
    #[error("column {column} sums to {sum}")]
    ColumnSum { column: usize, sum: f64 },
    #[error("negative entry {value} at ({row}, {column})")]
    NegativeEntry { row: usize, column: usize, value: f64 },
    #[error("negative convex weight {0}")]
    NegativeWeight(f64),
    #[error("convex weights sum to {0}")]
    WeightSum(f64),
    #[error("state: {0}")]
    InvalidState(String),
    #[error("metric: {0}")]
    InvalidMetric(String),
    #[error("history lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("cell is empty")]
    EmptyCell,
    #[error("no probe cells given")]
    NoProbeCells,
    #[error("slot {0} cells do not partition the sample space")]
    NotPartition(usize),
}

pub type Result<T> = std::result::Result<T, ClassicalError>;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSpace {
    labels: Vec<String>,
    weights: Vec<f64>,
}

impl SampleSpace {
    pub fn new(labels: Vec<String>, weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(ClassicalError::InvalidSpace("no points".into()));
        }
        if labels.len() != weights.len() {
            return Err(ClassicalError::SizeMismatch {
                expected: weights.len(),
                found: labels.len(),
            });
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(ClassicalError::InvalidSpace(format!("weight {w} is not positive")));
        }
        let unique: BTreeSet<&String> = labels.iter().collect();
        if unique.len() != labels.len() {
            return Err(ClassicalError::InvalidSpace("duplicate point labels".into()));
        }
        Ok(Self { labels, weights })
    }

    /// `n` points labelled `0..n` with unit weights.
    pub fn uniform(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| i.to_string()).collect(), vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn measure(&self, cell: &Cell) -> f64 {
        cell.iter().fold(0.0, |acc, x| acc + self.weights[x])
    }
}

/// Subset of the points of a sample space of known size.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    size: usize,
    members: BTreeSet<usize>,
}

impl Cell {
    pub fn new(size: usize, members: impl IntoIterator<Item = usize>) -> Result<Self> {
        let members: BTreeSet<usize> = members.into_iter().collect();
        if let Some(&point) = members.iter().find(|&&x| x >= size) {
            return Err(ClassicalError::PointOutOfRange { point, len: size });
        }
        Ok(Self { size, members })
    }

    pub fn full(size: usize) -> Self {
        Self {
            size,
            members: (0..size).collect(),
        }
    }

    pub fn empty(size: usize) -> Self {
        Self {
            size,
            members: BTreeSet::new(),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, x: usize) -> bool {
        self.members.contains(&x)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().copied()
    }

    pub fn intersection(&self, other: &Cell) -> Cell {
        Cell {
            size: self.size,
            members: self.members.intersection(&other.members).copied().collect(),
        }
    }

    pub fn union(&self, other: &Cell) -> Cell {
        Cell {
            size: self.size,
            members: self.members.union(&other.members).copied().collect(),
        }
    }

    pub fn complement(&self) -> Cell {
        Cell {
            size: self.size,
            members: (0..self.size).filter(|x| !self.members.contains(x)).collect(),
        }
    }

    pub fn is_disjoint(&self, other: &Cell) -> bool {
        self.members.is_disjoint(&other.members)
    }

    /// Characteristic function as a 0/1 vector.
    pub fn indicator(&self) -> Vec<f64> {
        (0..self.size)
            .map(|x| if self.contains(x) { 1.0 } else { 0.0 })
            .collect()
    }
}

/// Bijection of points; `image(x)` is where `x` moves in one step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut hit = vec![false; n];
        for &y in &images {
            if y >= n || hit[y] {
                return Err(ClassicalError::NotBijective(format!("{images:?}")));
            }
            hit[y] = true;
        }
        Ok(Self(images))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    /// `x ↦ x + k mod n`.
    pub fn shift(n: usize, k: usize) -> Self {
        Self((0..n).map(|x| (x + k) % n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn image(&self, x: usize) -> usize {
        self.0[x]
    }

    pub fn images(&self) -> &[usize] {
        &self.0
    }

    /// `{x : τ(x) ∈ C}`.
    pub fn preimage(&self, cell: &Cell) -> Cell {
        Cell {
            size: cell.size,
            members: (0..self.len()).filter(|&x| cell.contains(self.0[x])).collect(),
        }
    }

    /// `self` after `first`.
    pub fn after(&self, first: &Permutation) -> Permutation {
        Permutation(first.0.iter().map(|&y| self.0[y]).collect())
    }
}

/// Doubly stochastic transition kernel, `T(x → y) = matrix[(x, y)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BistochasticMap {
    matrix: DMatrix<f64>,
}

impl BistochasticMap {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(ClassicalError::SizeMismatch {
                expected: n,
                found: matrix.ncols(),
            });
        }
        for r in 0..n {
            for c in 0..n {
                let v = matrix[(r, c)];
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(ClassicalError::NegativeEntry {
                        row: r,
                        column: c,
                        value: v,
                    });
                }
            }
        }
        for row in 0..n {
            let sum: f64 = matrix.row(row).iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(ClassicalError::RowSum { row, sum });
            }
        }
        for column in 0..n {
            let sum: f64 = matrix.column(column).iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(ClassicalError::ColumnSum { column, sum });
            }
        }
        Ok(Self { matrix })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            matrix: DMatrix::identity(n, n),
        }
    }

    pub fn from_permutation(p: &Permutation) -> Self {
        let n = p.len();
        let mut m = DMatrix::zeros(n, n);
        for x in 0..n {
            m[(x, p.image(x))] = 1.0;
        }
        Self { matrix: m }
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn transition(&self, from: usize, to: usize) -> f64 {
        self.matrix[(from, to)]
    }

    /// One step with `self` followed by one step with `next`.
    pub fn then(&self, next: &BistochasticMap) -> Result<Self> {
        Self::new(&self.matrix * &next.matrix)
    }

    /// `T†` on masses.
    pub fn push_forward(&self, mass: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|y| (0..n).map(|x| mass[x] * self.matrix[(x, y)]).sum())
            .collect()
    }

    /// `T` on observables: `(T A)(x) = Σ_y T(x → y) A(y)`.
    pub fn pull_back(&self, observable: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|x| (0..n).map(|y| self.matrix[(x, y)] * observable[y]).sum())
            .collect()
    }
}

/// `T = Σ_i λ_i · (permutation matrix of τ_i)`.
pub fn convex_dynamics(weights: &[f64], permutations: &[Permutation]) -> Result<BistochasticMap> {
    if weights.len() != permutations.len() || permutations.is_empty() {
        return Err(ClassicalError::LengthMismatch(weights.len(), permutations.len()));
    }
    if let Some(&w) = weights.iter().find(|&&w| w < 0.0) {
        return Err(ClassicalError::NegativeWeight(w));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > STOCHASTIC_TOL {
        return Err(ClassicalError::WeightSum(total));
    }
    let n = permutations[0].len();
    let mut m = DMatrix::zeros(n, n);
    for (&w, p) in weights.iter().zip(permutations) {
        if p.len() != n {
            return Err(ClassicalError::SizeMismatch {
                expected: n,
                found: p.len(),
            });
        }
        for x in 0..n {
            m[(x, p.image(x))] += w;
        }
    }
    BistochasticMap::new(m)
}

/// Density with respect to the sample-space measure.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalState {
    density: Vec<f64>,
}

impl ClassicalState {
    pub fn new(space: &SampleSpace, density: Vec<f64>) -> Result<Self> {
        if density.len() != space.len() {
            return Err(ClassicalError::SizeMismatch {
                expected: space.len(),
                found: density.len(),
            });
        }
        if let Some(d) = density.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
            return Err(ClassicalError::InvalidState(format!("density value {d}")));
        }
        let total: f64 = density.iter().zip(space.weights()).map(|(d, w)| d * w).sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(ClassicalError::InvalidState(format!("total mass {total}")));
        }
        Ok(Self { density })
    }

    /// Normalized μ.
    pub fn uniform(space: &SampleSpace) -> Self {
        let total: f64 = space.weights().iter().sum();
        Self {
            density: vec![1.0 / total; space.len()],
        }
    }

    /// Point mass at `x`.
    pub fn point(space: &SampleSpace, x: usize) -> Result<Self> {
        if x >= space.len() {
            return Err(ClassicalError::PointOutOfRange {
                point: x,
                len: space.len(),
            });
        }
        let mut density = vec![0.0; space.len()];
        density[x] = 1.0 / space.weights()[x];
        Ok(Self { density })
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn masses(&self, space: &SampleSpace) -> Vec<f64> {
        self.density.iter().zip(space.weights()).map(|(d, w)| d * w).collect()
    }
}

/// Symmetric distance table with a characteristic scale ℓ.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMetric {
    distances: DMatrix<f64>,
    scale: f64,
}

impl DiscreteMetric {
    pub fn new(distances: DMatrix<f64>, scale: f64) -> Result<Self> {
        let n = distances.nrows();
        if distances.ncols() != n {
            return Err(ClassicalError::InvalidMetric("distance table not square".into()));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(ClassicalError::InvalidMetric(format!("scale {scale}")));
        }
        for i in 0..n {
            if distances[(i, i)] != 0.0 {
                return Err(ClassicalError::InvalidMetric(format!("d({i},{i}) ≠ 0")));
            }
            for j in 0..n {
                let d = distances[(i, j)];
                if !(d >= 0.0) || d != distances[(j, i)] {
                    return Err(ClassicalError::InvalidMetric(format!(
                        "d({i},{j}) is negative or asymmetric"
                    )));
                }
                for k in 0..n {
                    if d > distances[(i, k)] + distances[(k, j)] + TRIANGLE_TOL {
                        return Err(ClassicalError::InvalidMetric(format!(
                            "triangle inequality fails for ({i},{j}) via {k}"
                        )));
                    }
                }
            }
        }
        Ok(Self { distances, scale })
    }

    /// Points on a line at unit spacing.
    pub fn path(n: usize, scale: f64) -> Result<Self> {
        Self::new(DMatrix::from_fn(n, n, |i, j| (i as f64 - j as f64).abs()), scale)
    }

    /// Points on a ring at unit spacing.
    pub fn cycle(n: usize, scale: f64) -> Result<Self> {
        Self::new(
            DMatrix::from_fn(n, n, |i, j| {
                let d = i.abs_diff(j);
                d.min(n - d) as f64
            }),
            scale,
        )
    }

    pub fn len(&self) -> usize {
        self.distances.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.nrows() == 0
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.distances[(a, b)]
    }

    pub fn distances(&self) -> &DMatrix<f64> {
        &self.distances
    }

    /// Points within `radius` of the cell.
    pub fn dilate(&self, cell: &Cell, radius: f64) -> Cell {
        Cell {
            size: cell.size,
            members: (0..self.len())
                .filter(|&y| cell.iter().any(|x| self.distances[(x, y)] <= radius))
                .collect(),
        }
    }

    /// Points of the cell within ℓ of its complement.
    pub fn boundary(&self, cell: &Cell) -> Cell {
        let outside = cell.complement();
        Cell {
            size: cell.size,
            members: cell
                .iter()
                .filter(|&x| outside.iter().any(|y| self.distances[(x, y)] <= self.scale))
                .collect(),
        }
    }
}

/// Nested decoherence functional over a finite space:
/// `Tr(χ_{C_n} T†(… T†(χ_{C_1} T†(ρ₀) χ_{C_1'}) …) χ_{C_n'})`.
///
/// For characteristic functions `χ_C ρ χ_{C'} = 1_{C∩C'} ρ`, so the value is
/// the mass of paths that stay inside every `C_i ∩ C_i'`.
pub fn classical_decoherence(
    space: &SampleSpace,
    a: &[Cell],
    b: &[Cell],
    maps: &[BistochasticMap],
    rho0: &ClassicalState,
) -> Result<f64> {
    if a.len() != b.len() {
        return Err(ClassicalError::LengthMismatch(a.len(), b.len()));
    }
    if maps.len() != a.len() {
        return Err(ClassicalError::LengthMismatch(maps.len(), a.len()));
    }
    let n = space.len();
    for m in maps {
        if m.len() != n {
            return Err(ClassicalError::SizeMismatch {
                expected: n,
                found: m.len(),
            });
        }
    }
    let mut mass = rho0.masses(space);
    for ((ca, cb), t) in a.iter().zip(b).zip(maps) {
        mass = t.push_forward(&mass);
        for (x, m) in mass.iter_mut().enumerate() {
            if !(ca.contains(x) && cb.contains(x)) {
                *m = 0.0;
            }
        }
    }
    Ok(mass.iter().sum())
}

/// Decoherence matrix of the full product set built from one cell partition
/// per time. Labels follow the quantum convention (`0.1` = cell 0 then cell 1).
pub fn classical_decoherence_matrix(
    space: &SampleSpace,
    partitions: &[Vec<Cell>],
    maps: &[BistochasticMap],
    rho0: &ClassicalState,
) -> Result<DecoherenceMatrix> {
    for (slot, cells) in partitions.iter().enumerate() {
        let mut covered = vec![0usize; space.len()];
        for c in cells {
            for x in c.iter() {
                covered[x] += 1;
            }
        }
        if covered.iter().any(|&k| k != 1) {
            return Err(ClassicalError::NotPartition(slot));
        }
    }
    let counts: Vec<usize> = partitions.iter().map(Vec::len).collect();
    let tuples = enumerate_tuples(&counts);
    let histories: Vec<Vec<Cell>> = tuples
        .iter()
        .map(|t| t.iter().enumerate().map(|(s, &i)| partitions[s][i].clone()).collect())
        .collect();
    let k = histories.len();
    let mut values = ComplexMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let d = classical_decoherence(space, &histories[i], &histories[j], maps, rho0)?;
            values[(i, j)] = C64::new(d, 0.0);
        }
    }
    Ok(DecoherenceMatrix::from_parts(
        tuples.iter().map(|t| fine_label(t)).collect(),
        values,
    ))
}

/// The single cell `{x₀ : Φ_k(x₀) ∈ C_k for all k}` representing a history
/// under deterministic dynamics, where `Φ_k = τ_k ∘ ⋯ ∘ τ_1` is the position
/// at `t_k` of a point that started at `x₀`.
pub fn deterministic_history_projector(cells: &[Cell], permutations: &[Permutation]) -> Result<Cell> {
    if cells.len() != permutations.len() {
        return Err(ClassicalError::LengthMismatch(cells.len(), permutations.len()));
    }
    let Some(first) = cells.first() else {
        return Err(ClassicalError::LengthMismatch(0, 0));
    };
    let n = first.size();
    let mut flow = Permutation::identity(n);
    let mut result = Cell::full(n);
    for (cell, step) in cells.iter().zip(permutations) {
        if step.len() != n || cell.size() != n {
            return Err(ClassicalError::SizeMismatch {
                expected: n,
                found: step.len().max(cell.size()),
            });
        }
        flow = step.after(&flow);
        result = result.intersection(&flow.preimage(cell));
    }
    Ok(result)
}

/// `ν(C) = ℓ · μ(∂C) / μ(C)`.
pub fn nu_discrete(cell: &Cell, metric: &DiscreteMetric, space: &SampleSpace) -> Result<f64> {
    if cell.is_empty() {
        return Err(ClassicalError::EmptyCell);
    }
    if metric.len() != space.len() || cell.size() != space.len() {
        return Err(ClassicalError::SizeMismatch {
            expected: space.len(),
            found: metric.len(),
        });
    }
    let boundary = metric.boundary(cell);
    Ok(metric.scale() * space.measure(&boundary) / space.measure(cell))
}

/// `p(not C' at t₂ | C at t₁)` with the point distribution inside `C` taken
/// from μ.
pub fn escape_probability(space: &SampleSpace, dynamics: &BistochasticMap, from: &Cell, target: &Cell) -> Result<f64> {
    if from.is_empty() {
        return Err(ClassicalError::EmptyCell);
    }
    let total = space.measure(from);
    let mut leaked = 0.0;
    for x in from.iter() {
        let out: f64 = (0..space.len())
            .filter(|&y| !target.contains(y))
            .map(|y| dynamics.transition(x, y))
            .sum();
        leaked += space.weights()[x] * out;
    }
    Ok(leaked / total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub cell: Cell,
    pub nu: f64,
    /// `ν(C) ≤ ε`.
    pub nu_ok: bool,
    /// Best admissible target cell and how it was produced.
    pub target: Option<(Cell, String)>,
    pub escape: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonDeterminismReport {
    pub epsilon: f64,
    pub probes: Vec<ProbeResult>,
    pub pass: bool,
}

impl EpsilonDeterminismReport {
    pub fn to_kv(&self) -> KvReport {
        let mut kv = KvReport::new();
        kv.push("pass", self.pass);
        for (i, p) in self.probes.iter().enumerate() {
            kv.push(format!("probe.{i}.cell"), cell_text(&p.cell))
                .push(format!("probe.{i}.nu"), format_g17(p.nu))
                .push(format!("probe.{i}.nu_ok"), p.nu_ok);
            match &p.target {
                Some((c, how)) => {
                    kv.push(format!("probe.{i}.target"), cell_text(c))
                        .push(format!("probe.{i}.target_source"), how);
                }
                None => {
                    kv.push(format!("probe.{i}.target"), "none");
                }
            }
            kv.push(format!("probe.{i}.escape"), format_g17(p.escape))
                .push(format!("probe.{i}.pass"), p.pass);
        }
        kv
    }
}

pub fn cell_text(c: &Cell) -> String {
    c.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

/// For each probe cell, looks for a target `C'` with `ν(C') ≤ ε` into which
/// the dynamics moves `C` with escape probability at most ε. Candidates are
/// the dilations of `C` by `k·ℓ` for `k = 0..=3` followed by `extra_candidates`.
pub fn epsilon_deterministic_check(
    space: &SampleSpace,
    metric: &DiscreteMetric,
    dynamics: &BistochasticMap,
    epsilon: f64,
    probe_cells: &[Cell],
    extra_candidates: &[Cell],
) -> Result<EpsilonDeterminismReport> {
    if probe_cells.is_empty() {
        return Err(ClassicalError::NoProbeCells);
    }
    if dynamics.len() != space.len() {
        return Err(ClassicalError::SizeMismatch {
            expected: space.len(),
            found: dynamics.len(),
        });
    }
    let mut probes = Vec::with_capacity(probe_cells.len());
    for cell in probe_cells {
        let nu = nu_discrete(cell, metric, space)?;
        let mut candidates: Vec<(Cell, String)> = (0..=DILATION_STEPS)
            .map(|k| (metric.dilate(cell, k as f64 * metric.scale()), format!("dilation:{k}")))
            .collect();
        candidates.extend(
            extra_candidates
                .iter()
                .enumerate()
                .map(|(i, c)| (c.clone(), format!("supplied:{i}"))),
        );
        let mut best: Option<(Cell, String, f64)> = None;
        for (cand, how) in candidates {
            if cand.is_empty() || nu_discrete(&cand, metric, space)? > epsilon {
                continue;
            }
            let esc = escape_probability(space, dynamics, cell, &cand)?;
            if best.as_ref().is_none_or(|(_, _, e)| esc < *e) {
                best = Some((cand, how, esc));
            }
        }
        let nu_ok = nu <= epsilon;
        let (target, escape) = match best {
            Some((c, how, e)) => (Some((c, how)), e),
            None => (None, f64::INFINITY),
        };
        probes.push(ProbeResult {
            cell: cell.clone(),
            nu,
            nu_ok,
            pass: nu_ok && escape <= epsilon,
            target,
            escape,
        });
    }
    let pass = probes.iter().all(|p| p.pass);
    Ok(EpsilonDeterminismReport { epsilon, probes, pass })
}

/// Two one-step theories on the same points are equivalent at ε when every
/// conditional probability `p(y at t₂ | x at t₁)` differs by at most ε.
pub fn equivalent_theories(a: &BistochasticMap, b: &BistochasticMap, epsilon: f64) -> bool {
    a.len() == b.len()
        && a.matrix()
            .iter()
            .zip(b.matrix().iter())
            .all(|(x, y)| (x - y).abs() <= epsilon)
}
