//! Scenario files: TOML with one top-level `kind` and a section named after it.
//!
//! ```toml
//! kind = "quantum"
//! epsilon = 1e-6
//! seed = 7
//!
//! [quantum]
//! dim = 2
//! hamiltonian = [[0, 1], [1, 0]]
//! times = [0.0, 1.0]
//! state = { pure = [1, 0] }
//! propositions = { mode = "explicit", slots = [[{ basis = [0] }, { basis = [1] }], [{ basis = [0] }, { basis = [1] }]] }
//! ```
//!
//! Matrix entries are numbers or `{ re, im }` tables. Pure state vectors are
//! normalized on load. Classical maps are row-stochastic, `maps[k][x][y]`
//! being the probability of `x → y` over step `k`; a single map is reused for
//! every step. Phase-space cells are `{ q = [lo, hi], p = [lo, hi], step }`.
//!
//! Loading collects every validation problem it can find, each tagged with
//! the path of the offending field.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::classical::{BistochasticMap, Cell, ClassicalState, DiscreteMetric, Permutation, SampleSpace};
use crate::decoherence::{ConsistencyOptions, EXACT_TOL, IMPLICATION_TOL};
use crate::history::{HistorySet, QuantumDynamics, TimeGrid, EXCLUSIVE_TOL};
use crate::linalg::{ComplexMatrix, DensityMatrix, Projector, C64};
use crate::phase_space::{coherent_vector, FockSpace, OscillatorHamiltonian, PhaseCell, PhasePoint};
use crate::window::{ContraryOptions, SearchFamily, SearchOptions};

pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{} validation error(s): {}", .0.len(), .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<FieldError>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Quantum,
    Classical,
    PhaseSpace,
}

impl Kind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Kind::Quantum => "quantum",
            Kind::Classical => "classical",
            Kind::PhaseSpace => "phase_space",
        }
    }
}

/// A real number or `{ re, im }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex { re: f64, im: f64 },
}

impl Entry {
    pub fn value(&self) -> C64 {
        match *self {
            Entry::Real(x) => C64::new(x, 0.0),
            Entry::Complex { re, im } => C64::new(re, im),
        }
    }
}

pub type MatrixSpec = Vec<Vec<Entry>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub kind: Kind,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantum: Option<QuantumSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classical: Option<ClassicalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_space: Option<PhaseSpaceSpec>,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Off-diagonals at or below this count as exactly zero.
    pub exact: f64,
    /// Completeness and exclusivity slack for projector families.
    pub exclusive: f64,
    /// Slack on conditional probabilities of one.
    pub implication: f64,
    /// Compare `|d(a,b)| / sqrt(d(a,a) d(b,b))` with ε; otherwise `|d(a,b)|`.
    pub normalized: bool,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            exact: EXACT_TOL,
            exclusive: EXCLUSIVE_TOL,
            implication: IMPLICATION_TOL,
            normalized: true,
        }
    }
}

impl Tolerances {
    pub fn consistency(&self) -> ConsistencyOptions {
        ConsistencyOptions {
            exact_tol: self.exact,
            normalized: self.normalized,
            ..ConsistencyOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumSpec {
    pub dim: usize,
    pub hamiltonian: MatrixSpec,
    pub times: Vec<f64>,
    pub state: StateSpec,
    pub propositions: PropositionSpec,
    #[serde(default)]
    pub search: SearchSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pure: Option<Vec<Entry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<MatrixSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropositionMode {
    Explicit,
    Energy,
    Spectral,
    Search,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropositionSpec {
    pub mode: PropositionMode,
    /// Explicit mode: projectors per time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slots: Option<Vec<Vec<ProjectorSpec>>>,
    /// Search mode: ranks per time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranks: Option<Vec<Vec<usize>>>,
}

/// A projector onto computational basis states or a full matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProjectorSpec {
    Basis { basis: Vec<usize> },
    Matrix(MatrixSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpec {
    pub restarts: usize,
    pub iterations: usize,
    pub polish_evaluations: usize,
    pub refine_iterations: usize,
    pub initial_temperature: f64,
    pub final_temperature: f64,
    pub initial_step: f64,
    /// Contrary inference: smallest acceptable `p(a)`.
    pub min_mass: f64,
}

impl Default for SearchSpec {
    fn default() -> Self {
        let s = SearchOptions::default();
        Self {
            restarts: s.restarts,
            iterations: s.iterations,
            polish_evaluations: s.polish_evaluations,
            refine_iterations: s.refine_iterations,
            initial_temperature: s.initial_temperature,
            final_temperature: s.final_temperature,
            initial_step: s.initial_step,
            min_mass: ContraryOptions::default().min_mass,
        }
    }
}

impl SearchSpec {
    pub fn options(&self, epsilon: f64, seed: u64) -> SearchOptions {
        SearchOptions {
            restarts: self.restarts,
            iterations: self.iterations,
            polish_evaluations: self.polish_evaluations,
            refine_iterations: self.refine_iterations,
            epsilon,
            seed,
            initial_temperature: self.initial_temperature,
            final_temperature: self.final_temperature,
            initial_step: self.initial_step,
        }
    }

    pub fn contrary(&self, epsilon: f64, seed: u64) -> ContraryOptions {
        ContraryOptions {
            search: self.options(epsilon, seed),
            min_mass: self.min_mass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalSpec {
    pub points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maps: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permutations: Option<Vec<Vec<usize>>>,
    /// Density with respect to the point weights; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<Vec<f64>>,
    /// Cells per time.
    pub partitions: Vec<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probes: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Path,
    Cycle,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub kind: MetricKind,
    pub scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distances: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSpaceSpec {
    pub truncation: usize,
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub omega: f64,
    /// Coefficient of `q̂^k` at index `k`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub potential: Vec<f64>,
    pub times: Vec<f64>,
    pub state: PhaseStateSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cells: Vec<Vec<CellSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub husimi: Option<CellSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilitySpec>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PhaseStateSpec {
    /// `(q, p)` of a coherent state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coherent: Option<[f64; 2]>,
    /// Equal mixture of coherent states.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixture: Option<Vec<[f64; 2]>>,
    /// Fock number state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fock: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSpec {
    pub q: [f64; 2],
    pub p: [f64; 2],
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySpec {
    pub q: f64,
    pub p: f64,
    pub t: f64,
}

/// Runtime objects built from a validated scenario.
#[derive(Debug, Clone)]
pub enum System {
    Quantum(QuantumSystem),
    Classical(ClassicalSystem),
    PhaseSpace(PhaseSystem),
}

#[derive(Debug, Clone)]
pub enum Propositions {
    Explicit(HistorySet),
    Energy,
    Spectral,
    Search(SearchFamily),
}

#[derive(Debug, Clone)]
pub struct QuantumSystem {
    pub dynamics: QuantumDynamics,
    pub grid: TimeGrid,
    pub propositions: Propositions,
}

#[derive(Debug, Clone)]
pub struct ClassicalSystem {
    pub space: SampleSpace,
    pub maps: Vec<BistochasticMap>,
    pub state: ClassicalState,
    pub partitions: Vec<Vec<Cell>>,
    pub metric: Option<DiscreteMetric>,
    pub probes: Vec<Cell>,
    pub candidates: Vec<Cell>,
}

#[derive(Debug, Clone)]
pub struct PhaseSystem {
    pub space: FockSpace,
    pub hamiltonian: ComplexMatrix,
    pub grid: TimeGrid,
    pub state: DensityMatrix,
    pub cells: Vec<Vec<PhaseCell>>,
    pub husimi: Option<PhaseCell>,
    pub stability: Option<(PhasePoint, f64)>,
}

/// Reads, parses and validates a scenario file.
pub fn parse_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_str(&text)
}

pub fn parse_str(text: &str) -> Result<Scenario, ScenarioError> {
    let scenario: Scenario = toml::from_str(text).map_err(|e| ScenarioError::Syntax {
        line: e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(0),
        message: e.message().to_string(),
    })?;
    scenario.build()?;
    Ok(scenario)
}

impl Scenario {
    pub fn serialize(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Validates everything and builds the runtime objects.
    pub fn build(&self) -> Result<System, ScenarioError> {
        let mut v = Validator::default();
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            v.err(
                "epsilon",
                format!("must be finite and non-negative, got {}", self.epsilon),
            );
        }
        let t = &self.tolerances;
        for (name, x) in [
            ("exact", t.exact),
            ("exclusive", t.exclusive),
            ("implication", t.implication),
        ] {
            if !(x >= 0.0 && x.is_finite()) {
                v.err(
                    format!("tolerances.{name}"),
                    format!("must be finite and non-negative, got {x}"),
                );
            }
        }
        let sections = [
            (Kind::Quantum, self.quantum.is_some()),
            (Kind::Classical, self.classical.is_some()),
            (Kind::PhaseSpace, self.phase_space.is_some()),
        ];
        for (k, present) in sections {
            if k == self.kind && !present {
                v.err(k.as_str(), "section required by kind is missing");
            } else if k != self.kind && present {
                v.err(
                    k.as_str(),
                    format!("section not allowed for kind {}", self.kind.as_str()),
                );
            }
        }
        let system = match self.kind {
            Kind::Quantum => self
                .quantum
                .as_ref()
                .and_then(|q| build_quantum(q, t, &mut v))
                .map(System::Quantum),
            Kind::Classical => self
                .classical
                .as_ref()
                .and_then(|c| build_classical(c, &mut v))
                .map(System::Classical),
            Kind::PhaseSpace => self
                .phase_space
                .as_ref()
                .and_then(|p| build_phase(p, &mut v))
                .map(System::PhaseSpace),
        };
        match system {
            Some(s) if v.errors.is_empty() => Ok(s),
            _ => {
                if v.errors.is_empty() {
                    v.err("", "scenario could not be built");
                }
                Err(ScenarioError::Invalid(v.errors))
            }
        }
    }
}

#[derive(Default)]
struct Validator {
    errors: Vec<FieldError>,
}

impl Validator {
    fn err(&mut self, path: impl Into<String>, message: impl ToString) {
        self.errors.push(FieldError {
            path: path.into(),
            message: message.to_string(),
        });
    }

    fn check<T, E: ToString>(&mut self, path: impl Into<String>, r: Result<T, E>) -> Option<T> {
        r.map_err(|e| self.err(path, e)).ok()
    }

    fn matrix(&mut self, path: &str, m: &MatrixSpec, dim: usize) -> Option<ComplexMatrix> {
        if m.len() != dim || m.iter().any(|r| r.len() != dim) {
            self.err(path, format!("expected a {dim}x{dim} matrix"));
            return None;
        }
        Some(ComplexMatrix::from_fn(dim, dim, |i, j| m[i][j].value()))
    }

    fn grid(&mut self, path: &str, times: &[f64]) -> Option<TimeGrid> {
        self.check(path, TimeGrid::new(times.to_vec()))
    }
}

fn build_quantum(q: &QuantumSpec, tol: &Tolerances, v: &mut Validator) -> Option<QuantumSystem> {
    if q.dim == 0 {
        v.err("quantum.dim", "must be positive");
        return None;
    }
    let h = v.matrix("quantum.hamiltonian", &q.hamiltonian, q.dim);
    let grid = v.grid("quantum.times", &q.times);
    let state = match (&q.state.pure, &q.state.density) {
        (Some(psi), None) => {
            if psi.len() != q.dim {
                v.err("quantum.state.pure", format!("expected {} components", q.dim));
                None
            } else {
                let vec = DVector::from_iterator(q.dim, psi.iter().map(Entry::value));
                v.check("quantum.state.pure", DensityMatrix::pure(&vec))
            }
        }
        (None, Some(m)) => v
            .matrix("quantum.state.density", m, q.dim)
            .and_then(|m| v.check("quantum.state.density", DensityMatrix::new(m))),
        _ => {
            v.err("quantum.state", "give exactly one of pure or density");
            None
        }
    };
    let s = &q.search;
    if s.restarts == 0 {
        v.err("quantum.search.restarts", "must be positive");
    }
    if !(s.initial_temperature > 0.0 && s.final_temperature > 0.0) {
        v.err("quantum.search", "temperatures must be positive");
    }
    if !(s.initial_step > 0.0) {
        v.err("quantum.search.initial_step", "must be positive");
    }
    if !(0.0..=1.0).contains(&s.min_mass) {
        v.err("quantum.search.min_mass", "must lie in [0, 1]");
    }
    let propositions = match q.propositions.mode {
        PropositionMode::Energy => Some(Propositions::Energy),
        PropositionMode::Spectral => Some(Propositions::Spectral),
        PropositionMode::Search => match &q.propositions.ranks {
            Some(ranks) => {
                let family = SearchFamily { ranks: ranks.clone() };
                let slots = grid.as_ref().map_or(ranks.len(), TimeGrid::len);
                v.check("quantum.propositions.ranks", family.validate(q.dim, slots))
                    .map(|_| Propositions::Search(family))
            }
            None => {
                v.err("quantum.propositions.ranks", "required in search mode");
                None
            }
        },
        PropositionMode::Explicit => match &q.propositions.slots {
            Some(slots) => {
                let mut mats = Vec::with_capacity(slots.len());
                for (s, slot) in slots.iter().enumerate() {
                    let mut row = Vec::with_capacity(slot.len());
                    for (a, p) in slot.iter().enumerate() {
                        let path = format!("quantum.propositions.slots[{s}][{a}]");
                        let m = match p {
                            ProjectorSpec::Basis { basis } => v
                                .check(&path, Projector::basis(q.dim, basis))
                                .map(Projector::into_matrix),
                            ProjectorSpec::Matrix(m) => v.matrix(&path, m, q.dim),
                        };
                        if let Some(m) = m {
                            row.push(m);
                        }
                    }
                    mats.push(row);
                }
                grid.clone()
                    .and_then(|g| {
                        v.check(
                            "quantum.propositions.slots",
                            HistorySet::with_tolerance(g, mats, tol.exclusive),
                        )
                    })
                    .map(Propositions::Explicit)
            }
            None => {
                v.err("quantum.propositions.slots", "required in explicit mode");
                None
            }
        },
    };
    let dynamics = v.check("quantum", QuantumDynamics::new(h?, state?))?;
    Some(QuantumSystem {
        dynamics,
        grid: grid?,
        propositions: propositions?,
    })
}

fn cell(v: &mut Validator, path: &str, n: usize, members: &[usize]) -> Option<Cell> {
    v.check(path, Cell::new(n, members.iter().copied()))
}

fn build_classical(c: &ClassicalSpec, v: &mut Validator) -> Option<ClassicalSystem> {
    let n = c.points;
    if n == 0 {
        v.err("classical.points", "must be positive");
        return None;
    }
    let labels = match &c.labels {
        Some(l) if l.len() != n => {
            v.err("classical.labels", format!("expected {n} labels, got {}", l.len()));
            None
        }
        Some(l) => Some(l.clone()),
        None => Some((0..n).map(|i| i.to_string()).collect()),
    };
    let weights = c.weights.clone().unwrap_or_else(|| vec![1.0; n]);
    let space = labels.and_then(|l| v.check("classical.weights", SampleSpace::new(l, weights)));
    let steps = c.partitions.len();
    if steps == 0 {
        v.err("classical.partitions", "at least one time is required");
    }
    let mut maps = Vec::new();
    match (&c.maps, &c.permutations) {
        (Some(ms), None) => {
            for (k, m) in ms.iter().enumerate() {
                let path = format!("classical.maps[{k}]");
                if m.len() != n || m.iter().any(|r| r.len() != n) {
                    v.err(path, format!("expected a {n}x{n} matrix"));
                    continue;
                }
                let dm = DMatrix::from_fn(n, n, |i, j| m[i][j]);
                if let Some(b) = v.check(path, BistochasticMap::new(dm)) {
                    maps.push(b);
                }
            }
        }
        (None, Some(ps)) => {
            for (k, p) in ps.iter().enumerate() {
                let path = format!("classical.permutations[{k}]");
                if p.len() != n {
                    v.err(path, format!("expected {n} images"));
                    continue;
                }
                if let Some(p) = v.check(path, Permutation::new(p.clone())) {
                    maps.push(BistochasticMap::from_permutation(&p));
                }
            }
        }
        _ => v.err("classical", "give exactly one of maps or permutations"),
    }
    if maps.len() == 1 && steps > 1 {
        maps = vec![maps[0].clone(); steps];
    } else if !maps.is_empty() && maps.len() != steps {
        v.err("classical.maps", format!("{} steps for {steps} times", maps.len()));
    }
    let state = space.as_ref().and_then(|s| match &c.state {
        Some(d) => v.check("classical.state", ClassicalState::new(s, d.clone())),
        None => Some(ClassicalState::uniform(s)),
    });
    let mut partitions = Vec::with_capacity(steps);
    for (t, cells) in c.partitions.iter().enumerate() {
        let mut built = Vec::with_capacity(cells.len());
        let mut covered = vec![0usize; n];
        for (i, members) in cells.iter().enumerate() {
            let path = format!("classical.partitions[{t}][{i}]");
            if let Some(cl) = cell(v, &path, n, members) {
                for x in cl.iter() {
                    covered[x] += 1;
                }
                built.push(cl);
            }
        }
        if let Some(x) = covered.iter().position(|&k| k != 1) {
            v.err(
                format!("classical.partitions[{t}]"),
                format!("point {x} covered {} times", covered[x]),
            );
        }
        partitions.push(built);
    }
    let metric = c.metric.as_ref().and_then(|m| {
        let r = match m.kind {
            MetricKind::Path => DiscreteMetric::path(n, m.scale),
            MetricKind::Cycle => DiscreteMetric::cycle(n, m.scale),
            MetricKind::Explicit => match &m.distances {
                Some(d) if d.len() == n && d.iter().all(|r| r.len() == n) => {
                    DiscreteMetric::new(DMatrix::from_fn(n, n, |i, j| d[i][j]), m.scale)
                }
                _ => {
                    v.err("classical.metric.distances", format!("expected a {n}x{n} matrix"));
                    return None;
                }
            },
        };
        v.check("classical.metric", r)
    });
    let probes: Vec<Cell> = c
        .probes
        .iter()
        .enumerate()
        .filter_map(|(i, m)| cell(v, &format!("classical.probes[{i}]"), n, m))
        .collect();
    let candidates: Vec<Cell> = c
        .candidates
        .iter()
        .enumerate()
        .filter_map(|(i, m)| cell(v, &format!("classical.candidates[{i}]"), n, m))
        .collect();
    if !probes.is_empty() && metric.is_none() && c.metric.is_none() {
        v.err("classical.metric", "required when probes are given");
    }
    Some(ClassicalSystem {
        space: space?,
        maps,
        state: state?,
        partitions,
        metric,
        probes,
        candidates,
    })
}

fn phase_cell(v: &mut Validator, path: &str, c: &CellSpec) -> Option<PhaseCell> {
    v.check(path, PhaseCell::new((c.q[0], c.q[1]), (c.p[0], c.p[1]), c.step))
}

fn build_phase(p: &PhaseSpaceSpec, v: &mut Validator) -> Option<PhaseSystem> {
    let space = v.check("phase_space", FockSpace::new(p.truncation, p.hbar));
    if !p.omega.is_finite() || p.potential.iter().any(|c| !c.is_finite()) {
        v.err("phase_space.potential", "coefficients must be finite");
    }
    let grid = v.grid("phase_space.times", &p.times);
    let point =
        |v: &mut Validator, path: &str, qp: [f64; 2], hbar: f64| v.check(path, PhasePoint::from_qp(qp[0], qp[1], hbar));
    let state = space.as_ref().and_then(|fs| {
        let st = &p.state;
        match (&st.coherent, &st.mixture, st.fock) {
            (Some(qp), None, None) => {
                let z = point(v, "phase_space.state.coherent", *qp, fs.hbar())?;
                v.check(
                    "phase_space.state.coherent",
                    DensityMatrix::pure(&coherent_vector(z, fs)),
                )
            }
            (None, Some(points), None) => {
                if points.is_empty() {
                    v.err("phase_space.state.mixture", "needs at least one point");
                    return None;
                }
                let n = fs.dim();
                let mut acc = ComplexMatrix::zeros(n, n);
                for (i, qp) in points.iter().enumerate() {
                    let z = point(v, &format!("phase_space.state.mixture[{i}]"), *qp, fs.hbar())?;
                    let psi = coherent_vector(z, fs);
                    let psi = psi.unscale(psi.norm());
                    acc += (&psi * psi.adjoint()).scale(1.0 / points.len() as f64);
                }
                v.check("phase_space.state.mixture", DensityMatrix::new(acc))
            }
            (None, None, Some(k)) => {
                if k >= fs.dim() {
                    v.err(
                        "phase_space.state.fock",
                        format!("level {k} outside truncation {}", fs.dim()),
                    );
                    return None;
                }
                let mut psi = DVector::zeros(fs.dim());
                psi[k] = C64::new(1.0, 0.0);
                v.check("phase_space.state.fock", DensityMatrix::pure(&psi))
            }
            _ => {
                v.err("phase_space.state", "give exactly one of coherent, mixture or fock");
                None
            }
        }
    });
    let cells: Vec<Vec<PhaseCell>> = p
        .cells
        .iter()
        .enumerate()
        .map(|(t, row)| {
            row.iter()
                .enumerate()
                .filter_map(|(i, c)| phase_cell(v, &format!("phase_space.cells[{t}][{i}]"), c))
                .collect()
        })
        .collect();
    if let Some(g) = &grid {
        if !p.cells.is_empty() && p.cells.len() != g.len() {
            v.err(
                "phase_space.cells",
                format!("{} partitions for {} times", p.cells.len(), g.len()),
            );
        }
    }
    let husimi = p.husimi.as_ref().and_then(|c| phase_cell(v, "phase_space.husimi", c));
    let stability = match (&p.stability, &space) {
        (Some(s), Some(fs)) => point(v, "phase_space.stability", [s.q, s.p], fs.hbar()).map(|z| (z, s.t)),
        _ => None,
    };
    let space = space?;
    let hamiltonian = OscillatorHamiltonian {
        omega: p.omega,
        potential: p.potential.clone(),
    }
    .matrix(&space);
    Some(PhaseSystem {
        space,
        hamiltonian,
        grid: grid?,
        state: state?,
        cells,
        husimi,
        stability,
    })
}
