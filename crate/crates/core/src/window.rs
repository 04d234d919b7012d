//! Windows: consistent sets built by hand, found by search, certified as
//! classical, or paired up to exhibit contrary inferences.
//!
//! Searches parametrize each time slot by a unitary `W = exp(iK)` acting on a
//! fixed reference partition of the computational basis, with `K` expanded in
//! a Hermitian basis whose off-diagonal elements generate Givens rotations.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::classical::{Cell, ClassicalError, ClassicalState, SampleSpace};
use crate::decoherence::{
    check_consistency, check_consistency_with, conditional_probability, decoherence_matrix, probabilities,
    ConsistencyOptions, ConsistencyReport, DecoherenceMatrix, EngineError, Verdict,
};
use crate::history::{HistoryError, HistorySet, QuantumDynamics, TimeGrid, EXCLUSIVE_TOL};
use crate::io::{format_g17, KvReport};
use crate::linalg::{operator_norm, ComplexMatrix, DensityMatrix, HermitianEigen, LinalgError, C64};

/// Eigenvalues closer than this are treated as one eigenspace.
pub const SPECTRAL_GROUP_TOL: f64 = 1e-9;
/// Contract tolerances for contrary-inference witnesses.
pub const WITNESS_EXACT_TOL: f64 = 1e-8;
pub const WITNESS_IMPLICATION_TOL: f64 = 1e-6;
pub const WITNESS_ORTHOGONALITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WindowError {
    #[error("infeasible rank profile: {0}")]
    InfeasibleRanks(String),
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error("window is inconsistent (worst ratio {worst_ratio})")]
    InconsistentWindow { worst_ratio: f64 },
    #[error("certification needs a fine-grained window")]
    NotFineGrained,
    #[error("sample space not stable at slot {slot}: mismatch {mismatch}")]
    UnstableSampleSpace { slot: usize, mismatch: f64 },
    #[error("transition {step} is not bistochastic: column {column} sums to {sum}")]
    NotBistochastic { step: usize, column: usize, sum: f64 },
    #[error("coarse graining of alternatives {first} and {second} at slot {slot} is not additive")]
    NotAdditive { slot: usize, first: usize, second: usize },
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Classical(#[from] ClassicalError),
}

pub type Result<T> = std::result::Result<T, WindowError>;

/// A history set with its decoherence matrix and consistency report.
#[derive(Debug, Clone)]
pub struct WindowCandidate {
    pub history_set: HistorySet,
    pub matrix: DecoherenceMatrix,
    pub report: ConsistencyReport,
    /// Always `report.worst_ratio`.
    pub score: f64,
    /// Generator coordinates for searched windows; empty otherwise.
    pub params: Vec<f64>,
}

impl WindowCandidate {
    pub fn evaluate(set: HistorySet, dynamics: &QuantumDynamics, epsilon: f64, params: Vec<f64>) -> Result<Self> {
        let matrix = decoherence_matrix(&set, dynamics)?;
        let report = check_consistency(&matrix, epsilon)?;
        Ok(Self {
            score: report.worst_ratio,
            history_set: set,
            matrix,
            report,
            params,
        })
    }
}

fn grouped(m: &ComplexMatrix) -> Result<Vec<ComplexMatrix>> {
    Ok(HermitianEigen::new(m)?
        .grouped_projectors(SPECTRAL_GROUP_TOL)
        .into_iter()
        .map(|(_, p)| p)
        .collect())
}

/// Spectral projectors of the evolved state `U(t) ρ₀ U(t)†` at every time.
pub fn spectral_window(dynamics: &QuantumDynamics, grid: &TimeGrid) -> Result<WindowCandidate> {
    let base = grouped(dynamics.initial_state().matrix())?;
    let alternatives = grid
        .times()
        .iter()
        .map(|&t| {
            let u = dynamics.evolution(t);
            base.iter().map(|p| u.matrix() * p * u.matrix().adjoint()).collect()
        })
        .collect();
    let set = HistorySet::with_tolerance(grid.clone(), alternatives, EXCLUSIVE_TOL)?;
    WindowCandidate::evaluate(set, dynamics, 0.0, Vec::new())
}

/// Eigenprojectors of the Hamiltonian repeated at every time.
pub fn energy_window(dynamics: &QuantumDynamics, grid: &TimeGrid) -> Result<WindowCandidate> {
    let base = grouped(dynamics.hamiltonian())?;
    let set = HistorySet::with_tolerance(grid.clone(), vec![base; grid.len()], EXCLUSIVE_TOL)?;
    WindowCandidate::evaluate(set, dynamics, 0.0, Vec::new())
}

/// `d²` Hermitian matrices: diagonal units, then for each `j < k` the
/// symmetric and antisymmetric Givens generators.
pub fn hermitian_basis(dim: usize) -> Vec<ComplexMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(dim * dim);
    for k in 0..dim {
        let mut m = ComplexMatrix::zeros(dim, dim);
        m[(k, k)] = C64::new(1.0, 0.0);
        out.push(m);
    }
    for j in 0..dim {
        for k in (j + 1)..dim {
            let mut sym = ComplexMatrix::zeros(dim, dim);
            sym[(j, k)] = C64::new(s, 0.0);
            sym[(k, j)] = C64::new(s, 0.0);
            out.push(sym);
            let mut asym = ComplexMatrix::zeros(dim, dim);
            asym[(j, k)] = C64::new(0.0, -s);
            asym[(k, j)] = C64::new(0.0, s);
            out.push(asym);
        }
    }
    out
}

/// `exp(i Σ θ_m B_m)`.
pub fn unitary_from_coordinates(basis: &[ComplexMatrix], theta: &[f64]) -> ComplexMatrix {
    let dim = basis[0].nrows();
    let mut k = ComplexMatrix::zeros(dim, dim);
    for (b, &t) in basis.iter().zip(theta) {
        if t != 0.0 {
            k += b.scale(t);
        }
    }
    HermitianEigen::new(&k)
        .expect("finite generator")
        .apply(|lam| C64::from_polar(1.0, lam))
}

/// Per-slot ranks of the alternatives; each slot's ranks must sum to the
/// dimension. Alternative `j` of a slot is spanned by a contiguous block of
/// basis vectors before rotation.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchFamily {
    pub ranks: Vec<Vec<usize>>,
}

impl SearchFamily {
    pub fn uniform(slots: usize, ranks: Vec<usize>) -> Self {
        Self {
            ranks: vec![ranks; slots],
        }
    }

    pub fn validate(&self, dim: usize, slots: usize) -> Result<()> {
        if self.ranks.len() != slots {
            return Err(WindowError::InfeasibleRanks(format!(
                "{} slot profiles for {slots} times",
                self.ranks.len()
            )));
        }
        for (s, r) in self.ranks.iter().enumerate() {
            if r.is_empty() || r.contains(&0) {
                return Err(WindowError::InfeasibleRanks(format!("slot {s}: ranks {r:?}")));
            }
            let total: usize = r.iter().sum();
            if total != dim {
                return Err(WindowError::InfeasibleRanks(format!(
                    "slot {s}: ranks {r:?} sum to {total}, dimension is {dim}"
                )));
            }
        }
        Ok(())
    }

    /// Block-diagonal reference projectors of one slot.
    pub fn reference(&self, slot: usize, dim: usize) -> Vec<ComplexMatrix> {
        let mut offset = 0;
        self.ranks[slot]
            .iter()
            .map(|&r| {
                let mut p = ComplexMatrix::zeros(dim, dim);
                for i in offset..offset + r {
                    p[(i, i)] = C64::new(1.0, 0.0);
                }
                offset += r;
                p
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOptions {
    pub restarts: usize,
    /// Annealing proposals per restart.
    pub iterations: usize,
    /// Objective evaluations allowed for the pattern-search polish.
    pub polish_evaluations: usize,
    /// Levenberg–Marquardt iterations after the polish.
    pub refine_iterations: usize,
    /// Candidates with a larger score are dropped.
    pub epsilon: f64,
    pub seed: u64,
    pub initial_temperature: f64,
    pub final_temperature: f64,
    pub initial_step: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            restarts: 4,
            iterations: 2000,
            polish_evaluations: 2000,
            refine_iterations: 200,
            epsilon: 1e-6,
            seed: 0,
            initial_temperature: 0.05,
            final_temperature: 1e-7,
            initial_step: 0.3,
        }
    }
}

impl SearchOptions {
    fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(WindowError::InvalidOptions("restarts must be positive".into()));
        }
        if !(self.epsilon >= 0.0) {
            return Err(WindowError::InvalidOptions(format!("epsilon {}", self.epsilon)));
        }
        if !(self.initial_temperature > 0.0 && self.final_temperature > 0.0 && self.initial_step > 0.0) {
            return Err(WindowError::InvalidOptions(
                "temperatures and step must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Decoherence matrix of a full product set without validation, for use
/// inside optimization loops.
struct FastFunctional {
    evolutions: Vec<ComplexMatrix>,
    rho: ComplexMatrix,
    dim: usize,
}

impl FastFunctional {
    fn new(dynamics: &QuantumDynamics, grid: &TimeGrid) -> Self {
        Self {
            evolutions: grid
                .intervals()
                .into_iter()
                .map(|dt| dynamics.evolution(dt).into_matrix())
                .collect(),
            rho: dynamics.initial_state().matrix().clone(),
            dim: dynamics.dim(),
        }
    }

    fn matrix(&self, alternatives: &[Vec<ComplexMatrix>]) -> ComplexMatrix {
        let mut ops = vec![ComplexMatrix::identity(self.dim, self.dim)];
        for (slot, u) in alternatives.iter().zip(&self.evolutions) {
            let mut next = Vec::with_capacity(ops.len() * slot.len());
            for op in &ops {
                let evolved = u * op;
                for p in slot {
                    next.push(p * &evolved);
                }
            }
            ops = next;
        }
        let weighted: Vec<ComplexMatrix> = ops.iter().map(|c| c * &self.rho).collect();
        let n = ops.len();
        let mut d = ComplexMatrix::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                let v: C64 = weighted[a].iter().zip(ops[b].iter()).map(|(x, y)| x * y.conj()).sum();
                d[(a, b)] = v;
                d[(b, a)] = v.conj();
            }
        }
        d
    }
}

/// Real and imaginary parts of `d(a,b) / sqrt((d(a,a) + η)(d(b,b) + η))`
/// over pairs `a < b`, a smooth stand-in for the normalized consistency ratio.
fn regularized_residuals(d: &ComplexMatrix, eta: f64) -> Vec<f64> {
    let n = d.nrows();
    let mut out = Vec::with_capacity(n * (n - 1));
    for a in 0..n {
        let da = d[(a, a)].re.max(0.0);
        for b in (a + 1)..n {
            let db = d[(b, b)].re.max(0.0);
            let r = d[(a, b)] / ((da + eta) * (db + eta)).sqrt();
            out.push(r.re);
            out.push(r.im);
        }
    }
    out
}

fn compare_params(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

/// Metropolis annealing over single-coordinate Gaussian proposals with an
/// adaptive step, followed by a coordinate pattern search from the best point.
fn anneal<F: Fn(&[f64]) -> f64>(f: &F, start: Vec<f64>, opts: &SearchOptions, rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
    let dims = start.len();
    let mut x = start;
    let mut fx = f(&x);
    let mut best = (x.clone(), fx);
    let mut step = opts.initial_step;
    let mut accepted = 0usize;
    let ratio = opts.final_temperature / opts.initial_temperature;
    for it in 0..opts.iterations {
        let temp = opts.initial_temperature * ratio.powf(it as f64 / opts.iterations.max(1) as f64);
        let m = rng.random_range(0..dims);
        let z: f64 = rng.sample(StandardNormal);
        let old = x[m];
        x[m] = old + step * z;
        let fy = f(&x);
        let u: f64 = rng.random();
        if fy <= fx || u < (-(fy - fx) / temp).exp() {
            fx = fy;
            accepted += 1;
            if fx < best.1 {
                best = (x.clone(), fx);
            }
        } else {
            x[m] = old;
        }
        if (it + 1) % 50 == 0 {
            let rate = accepted as f64 / 50.0;
            if rate > 0.5 {
                step = (step * 1.3).min(std::f64::consts::PI);
            } else if rate < 0.2 {
                step = (step / 1.3).max(1e-9);
            }
            accepted = 0;
        }
    }
    pattern_polish(f, best.0, best.1, step.min(0.1), opts.polish_evaluations)
}

fn pattern_polish<F: Fn(&[f64]) -> f64>(
    f: &F,
    mut x: Vec<f64>,
    mut fx: f64,
    mut h: f64,
    budget: usize,
) -> (Vec<f64>, f64) {
    let mut evals = 0;
    while h > 1e-14 && evals < budget && fx > 0.0 {
        let mut improved = false;
        for m in 0..x.len() {
            for sign in [1.0, -1.0] {
                let old = x[m];
                x[m] = old + sign * h;
                let fy = f(&x);
                evals += 1;
                if fy < fx {
                    fx = fy;
                    improved = true;
                    break;
                }
                x[m] = old;
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    (x, fx)
}

/// Levenberg–Marquardt on a residual vector with a central-difference Jacobian.
fn levenberg_marquardt<R: Fn(&[f64]) -> Vec<f64>>(residuals: &R, mut x: Vec<f64>, max_iter: usize) -> Vec<f64> {
    let n = x.len();
    let cost = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
    let mut r = residuals(&x);
    let mut c = cost(&r);
    let mut lambda = 1e-3;
    let h = 1e-7;
    for _ in 0..max_iter {
        if c < 1e-30 {
            break;
        }
        let m = r.len();
        let mut jac = DMatrix::<f64>::zeros(m, n);
        for k in 0..n {
            let old = x[k];
            x[k] = old + h;
            let rp = residuals(&x);
            x[k] = old - h;
            let rm = residuals(&x);
            x[k] = old;
            for i in 0..m {
                jac[(i, k)] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let rv = DVector::from_vec(r.clone());
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &rv;
        let mut stepped = false;
        for _ in 0..20 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * (1.0 + jtj[(i, i)]);
            }
            let Some(delta) = a.lu().solve(&(-&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            let rt = residuals(&trial);
            let ct = cost(&rt);
            if ct < c {
                x = trial;
                r = rt;
                c = ct;
                lambda = (lambda / 10.0).max(1e-15);
                stepped = true;
                break;
            }
            lambda *= 10.0;
        }
        if !stepped {
            break;
        }
    }
    x
}

fn random_start(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len)
        .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
        .collect()
}

fn rotated_family(basis: &[ComplexMatrix], theta: &[f64], reference: &[ComplexMatrix]) -> Vec<ComplexMatrix> {
    let w = unitary_from_coordinates(basis, theta);
    let wa = w.adjoint();
    reference.iter().map(|p| &w * p * &wa).collect()
}

/// Anneals the generator coordinates of every slot towards a consistent set.
/// Restarts use seeds `seed, seed+1, …` and run in parallel; candidates with
/// score ≤ ε are returned sorted by score, then by parameter vector.
pub fn search_consistent_sets(
    dynamics: &QuantumDynamics,
    grid: &TimeGrid,
    family: &SearchFamily,
    opts: &SearchOptions,
) -> Result<Vec<WindowCandidate>> {
    let dim = dynamics.dim();
    family.validate(dim, grid.len())?;
    opts.validate()?;
    let basis = hermitian_basis(dim);
    let per_slot = basis.len();
    let references: Vec<Vec<ComplexMatrix>> = (0..grid.len()).map(|s| family.reference(s, dim)).collect();
    let fast = FastFunctional::new(dynamics, grid);
    let build = |theta: &[f64]| -> Vec<Vec<ComplexMatrix>> {
        references
            .iter()
            .enumerate()
            .map(|(s, r)| rotated_family(&basis, &theta[s * per_slot..(s + 1) * per_slot], r))
            .collect()
    };
    let residuals = |theta: &[f64]| regularized_residuals(&fast.matrix(&build(theta)), crate::decoherence::MASS_FLOOR);
    let objective = |theta: &[f64]| residuals(theta).iter().map(|v| v * v).sum::<f64>();
    let runs: Vec<Vec<f64>> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(r as u64));
            let start = random_start(&mut rng, per_slot * grid.len());
            let (annealed, _) = anneal(&objective, start, opts, &mut rng);
            levenberg_marquardt(&residuals, annealed, opts.refine_iterations)
        })
        .collect();
    let mut out = Vec::new();
    for theta in runs {
        let set = HistorySet::with_tolerance(grid.clone(), build(&theta), EXCLUSIVE_TOL)?;
        let cand = WindowCandidate::evaluate(set, dynamics, opts.epsilon, theta)?;
        if cand.score <= opts.epsilon {
            out.push(cand);
        }
    }
    out.sort_by(|a, b| {
        a.score
            .total_cmp(&b.score)
            .then_with(|| compare_params(&a.params, &b.params))
    });
    Ok(out)
}

/// Classical history theory read off a consistent window.
#[derive(Debug, Clone)]
pub struct ClassicalityCertificate {
    /// One point per fine history, counting measure.
    pub sample_space: SampleSpace,
    /// History probabilities as a state on the sample space.
    pub state: ClassicalState,
    /// `cell_map[slot][alt]`: histories with that alternative at that slot.
    pub cell_map: Vec<Vec<Cell>>,
    /// Conditional probabilities `p(j at k+1 | i at k)` between consecutive slots.
    pub transitions: Vec<DMatrix<f64>>,
    pub epsilon: f64,
    /// Every transition is a permutation within ε.
    pub deterministic: bool,
    pub persistent: bool,
}

impl ClassicalityCertificate {
    pub fn to_kv(&self) -> KvReport {
        let mut kv = KvReport::new();
        kv.push("points", self.sample_space.len())
            .push("deterministic", self.deterministic)
            .push("persistent", self.persistent);
        for (s, cells) in self.cell_map.iter().enumerate() {
            for (a, c) in cells.iter().enumerate() {
                kv.push(format!("cell.{s}.{a}"), crate::classical::cell_text(c));
            }
        }
        for (k, t) in self.transitions.iter().enumerate() {
            for i in 0..t.nrows() {
                let row: Vec<String> = (0..t.ncols()).map(|j| format_g17(t[(i, j)])).collect();
                kv.push(format!("transition.{k}.{i}"), row.join(" "));
            }
        }
        kv
    }
}

fn match_up_to_permutation(found: &[ComplexMatrix], expected: &[ComplexMatrix]) -> f64 {
    if found.len() != expected.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; expected.len()];
    let mut worst: f64 = 0.0;
    for f in found {
        let mut best: Option<(usize, f64)> = None;
        for (j, e) in expected.iter().enumerate() {
            if used[j] {
                continue;
            }
            let d = operator_norm(&(f - e));
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        let (j, d) = best.expect("as many expected as found");
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

/// Worst mismatch of slots `1..` against the Heisenberg-rotated first slot.
fn stability_mismatch(alternatives: &[Vec<ComplexMatrix>], grid: &TimeGrid, dynamics: &QuantumDynamics) -> Vec<f64> {
    let t1 = grid.times()[0];
    alternatives
        .iter()
        .zip(grid.times())
        .skip(1)
        .map(|(slot, &t)| {
            let u = dynamics.evolution(t - t1);
            let rotated: Vec<ComplexMatrix> = alternatives[0]
                .iter()
                .map(|p| u.matrix() * p * u.matrix().adjoint())
                .collect();
            match_up_to_permutation(slot, &rotated)
        })
        .collect()
}

struct ChainCheck {
    transitions: Vec<DMatrix<f64>>,
    probabilities: Vec<f64>,
}

fn chain(set: &HistorySet, dynamics: &QuantumDynamics, epsilon: f64) -> Result<ChainCheck> {
    let dm = decoherence_matrix(set, dynamics)?;
    let report = check_consistency(&dm, epsilon)?;
    if report.verdict == Verdict::Inconsistent {
        return Err(WindowError::InconsistentWindow {
            worst_ratio: report.worst_ratio,
        });
    }
    let probs = probabilities(&dm, epsilon)?;
    let counts: Vec<usize> = set.alternatives().iter().map(Vec::len).collect();
    let mut transitions = Vec::new();
    for step in 0..counts.len().saturating_sub(1) {
        let (n, m) = (counts[step], counts[step + 1]);
        let mut t = DMatrix::zeros(n, m);
        for (h, members) in set.histories().iter().enumerate() {
            let f = &members[0];
            t[(f[step], f[step + 1])] += probs.values[h];
        }
        for i in 0..n {
            let row: f64 = t.row(i).iter().sum();
            if row > crate::decoherence::MASS_FLOOR {
                for j in 0..m {
                    t[(i, j)] /= row;
                }
            } else {
                // unreachable alternative: keep it in place
                for j in 0..m {
                    t[(i, j)] = if i == j { 1.0 } else { 0.0 };
                }
            }
        }
        for column in 0..m {
            let sum: f64 = t.column(column).iter().sum();
            if (sum - 1.0).abs() > epsilon {
                return Err(WindowError::NotBistochastic { step, column, sum });
            }
        }
        transitions.push(t);
    }
    Ok(ChainCheck {
        transitions,
        probabilities: probs.values,
    })
}

/// Tries to read a window as a classical history theory: fine histories are
/// sample points, single-slot propositions are cells, and consecutive slots
/// are linked by their conditional probabilities.
///
/// Requires (a) every slot to be the first slot's family carried along by the
/// dynamics, up to relabelling, within ε, and (b) the induced transition
/// matrices to be bistochastic within ε. The certificate is persistent when
/// both still hold after appending one more time step carrying the same family.
pub fn certify_classicality(
    window: &WindowCandidate,
    dynamics: &QuantumDynamics,
    epsilon: f64,
) -> Result<ClassicalityCertificate> {
    if window.report.verdict == Verdict::Inconsistent {
        return Err(WindowError::InconsistentWindow {
            worst_ratio: window.report.worst_ratio,
        });
    }
    let set = &window.history_set;
    if !set.is_fine_grained() {
        return Err(WindowError::NotFineGrained);
    }
    let grid = set.grid();
    for (k, mismatch) in stability_mismatch(set.alternatives(), grid, dynamics)
        .into_iter()
        .enumerate()
    {
        if !(mismatch <= epsilon) {
            return Err(WindowError::UnstableSampleSpace { slot: k + 1, mismatch });
        }
    }
    let checked = chain(set, dynamics, epsilon)?;

    let n = set.len();
    let labels = set.labels();
    let space = SampleSpace::new(labels, vec![1.0; n])?;
    let state = ClassicalState::new(&space, checked.probabilities.clone()).or_else(|_| {
        // renormalize away rounding in the diagonal
        let total: f64 = checked.probabilities.iter().sum();
        ClassicalState::new(&space, checked.probabilities.iter().map(|p| p / total).collect())
    })?;
    let cell_map: Vec<Vec<Cell>> = set
        .alternatives()
        .iter()
        .enumerate()
        .map(|(s, alts)| {
            (0..alts.len())
                .map(|a| Cell::new(n, set.slot_proposition(s, a)))
                .collect::<std::result::Result<Vec<_>, _>>()
        })
        .collect::<std::result::Result<_, _>>()?;
    verify_lattice(set, dynamics, &cell_map, &checked.probabilities, epsilon)?;

    let deterministic = checked.transitions.iter().all(|t| {
        t.row_iter()
            .all(|r| r.iter().filter(|v| (**v - 1.0).abs() <= epsilon).count() == 1)
    });
    let persistent = persistence(set, dynamics, epsilon);
    Ok(ClassicalityCertificate {
        sample_space: space,
        state,
        cell_map,
        transitions: checked.transitions,
        epsilon,
        deterministic,
        persistent,
    })
}

/// Cells partition the points at each slot, a history is the meet of its
/// slot cells, and merging two alternatives of one slot adds probabilities.
fn verify_lattice(
    set: &HistorySet,
    dynamics: &QuantumDynamics,
    cell_map: &[Vec<Cell>],
    probs: &[f64],
    epsilon: f64,
) -> Result<()> {
    let n = set.len();
    for (slot, cells) in cell_map.iter().enumerate() {
        let mut union = Cell::empty(n);
        for c in cells {
            if !union.is_disjoint(c) {
                return Err(WindowError::UnstableSampleSpace { slot, mismatch: 1.0 });
            }
            union = union.union(c);
        }
        if union != Cell::full(n) {
            return Err(WindowError::UnstableSampleSpace { slot, mismatch: 1.0 });
        }
    }
    for (h, members) in set.histories().iter().enumerate() {
        let meet = members[0]
            .iter()
            .enumerate()
            .fold(Cell::full(n), |acc, (s, &a)| acc.intersection(&cell_map[s][a]));
        if meet != Cell::new(n, [h])? {
            return Err(WindowError::UnstableSampleSpace { slot: 0, mismatch: 1.0 });
        }
    }
    let ops = set.class_operators(dynamics)?;
    let rho = dynamics.initial_state().matrix();
    for (slot, cells) in cell_map.iter().enumerate() {
        for first in 0..cells.len() {
            for second in (first + 1)..cells.len() {
                let merged = cells[first].union(&cells[second]);
                let mut c = ComplexMatrix::zeros(set.dim(), set.dim());
                for i in merged.iter() {
                    c += &ops[i];
                }
                let joint = (&c * rho * c.adjoint()).trace().re;
                let expected: f64 = merged.iter().map(|i| probs[i]).sum();
                if (joint - expected).abs() > epsilon.max(1e-10) {
                    return Err(WindowError::NotAdditive { slot, first, second });
                }
            }
        }
    }
    Ok(())
}

fn persistence(set: &HistorySet, dynamics: &QuantumDynamics, epsilon: f64) -> bool {
    let grid = set.grid().extended();
    let t1 = grid.times()[0];
    let u = dynamics.evolution(grid.last() - t1);
    let mut alternatives = set.alternatives().to_vec();
    alternatives.push(
        set.alternatives()[0]
            .iter()
            .map(|p| u.matrix() * p * u.matrix().adjoint())
            .collect(),
    );
    let Ok(extended) = HistorySet::with_tolerance(grid.clone(), alternatives, EXCLUSIVE_TOL) else {
        return false;
    };
    stability_mismatch(extended.alternatives(), &grid, dynamics)
        .iter()
        .all(|m| *m <= epsilon)
        && chain(&extended, dynamics, epsilon).is_ok()
}

/// Slot and alternative index of a single-time proposition.
pub type Proposition = (usize, usize);

/// Two consistent sets that, from the same datum `a`, infer orthogonal
/// propositions `b` and `b'` with probability one.
#[derive(Debug, Clone)]
pub struct ContraryWitness {
    pub set1: HistorySet,
    pub set2: HistorySet,
    pub matrix1: DecoherenceMatrix,
    pub matrix2: DecoherenceMatrix,
    pub report1: ConsistencyReport,
    pub report2: ConsistencyReport,
    pub a: Proposition,
    pub b: Proposition,
    pub b_prime: Proposition,
    pub p_a: f64,
    pub p_b_given_a: f64,
    pub p_b_prime_given_a: f64,
    /// `‖b b'‖` in operator norm.
    pub orthogonality: f64,
    pub seed: u64,
}

impl ContraryWitness {
    pub fn to_kv(&self) -> KvReport {
        let mut kv = KvReport::new();
        kv.push("witness", true)
            .push("witness_seed", self.seed)
            .push("a", format!("{}:{}", self.a.0, self.a.1))
            .push("b", format!("{}:{}", self.b.0, self.b.1))
            .push("b_prime", format!("{}:{}", self.b_prime.0, self.b_prime.1))
            .push_f64("p_a", self.p_a)
            .push_f64("p_b_given_a", self.p_b_given_a)
            .push_f64("p_b_prime_given_a", self.p_b_prime_given_a)
            .push_f64("orthogonality", self.orthogonality);
        kv.extend_prefixed("set1.", &self.report1.to_kv());
        kv.extend_prefixed("set2.", &self.report2.to_kv());
        kv
    }
}

/// Scans two sets on the same grid for a shared proposition `a` from which
/// set 1 infers `b` and set 2 infers an orthogonal `b'`. Both sets must be
/// exactly consistent within [`WITNESS_EXACT_TOL`].
pub fn contrary_between(
    set1: &HistorySet,
    set2: &HistorySet,
    dynamics: &QuantumDynamics,
    min_mass: f64,
    seed: u64,
) -> Result<Option<ContraryWitness>> {
    if set1.grid() != set2.grid() || !set1.is_fine_grained() || !set2.is_fine_grained() {
        return Ok(None);
    }
    let exact = ConsistencyOptions {
        exact_tol: WITNESS_EXACT_TOL,
        ..Default::default()
    };
    let m1 = decoherence_matrix(set1, dynamics)?;
    let m2 = decoherence_matrix(set2, dynamics)?;
    let r1 = check_consistency_with(&m1, 0.0, &exact)?;
    let r2 = check_consistency_with(&m2, 0.0, &exact)?;
    if r1.verdict != Verdict::Exact || r2.verdict != Verdict::Exact {
        return Ok(None);
    }
    let p1 = probabilities(&m1, WITNESS_EXACT_TOL)?;
    let p2 = probabilities(&m2, WITNESS_EXACT_TOL)?;
    let alts1 = set1.alternatives();
    let alts2 = set2.alternatives();
    for sa in 0..alts1.len() {
        for (ia, pa1) in alts1[sa].iter().enumerate() {
            let Some(ja) = alts2[sa]
                .iter()
                .position(|q| operator_norm(&(q - pa1)) <= WITNESS_ORTHOGONALITY_TOL)
            else {
                continue;
            };
            let a1 = set1.slot_proposition(sa, ia);
            let a2 = set2.slot_proposition(sa, ja);
            let mass = p1.mass(&a1)?;
            if mass < min_mass || p2.mass(&a2)? < min_mass {
                continue;
            }
            for sb in 0..alts1.len() {
                if sb == sa {
                    continue;
                }
                for (ib, b) in alts1[sb].iter().enumerate() {
                    let cb = conditional_probability(&p1, &a1, &set1.slot_proposition(sb, ib))?;
                    if cb < 1.0 - WITNESS_IMPLICATION_TOL {
                        continue;
                    }
                    for (jb, b2) in alts2[sb].iter().enumerate() {
                        let orth = operator_norm(&(b * b2));
                        if orth > WITNESS_ORTHOGONALITY_TOL {
                            continue;
                        }
                        let cb2 = conditional_probability(&p2, &a2, &set2.slot_proposition(sb, jb))?;
                        if cb2 < 1.0 - WITNESS_IMPLICATION_TOL {
                            continue;
                        }
                        return Ok(Some(ContraryWitness {
                            set1: set1.clone(),
                            set2: set2.clone(),
                            matrix1: m1,
                            matrix2: m2,
                            report1: r1,
                            report2: r2,
                            a: (sa, ia),
                            b: (sb, ib),
                            b_prime: (sb, jb),
                            p_a: mass,
                            p_b_given_a: cb,
                            p_b_prime_given_a: cb2,
                            orthogonality: orth,
                            seed,
                        }));
                    }
                }
            }
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContraryOptions {
    pub search: SearchOptions,
    pub min_mass: f64,
}

impl Default for ContraryOptions {
    fn default() -> Self {
        Self {
            search: SearchOptions {
                restarts: 4,
                iterations: 1500,
                ..SearchOptions::default()
            },
            min_mass: 1e-2,
        }
    }
}

fn rank_one(v: nalgebra::DVectorView<'_, C64>) -> ComplexMatrix {
    v * v.adjoint()
}

/// Two-time search for contrary inferences. At the first time one unitary
/// `W` fixes `b = W e₀ e₀† W†` and `b' = W e₁ e₁† W†`, orthogonal by
/// construction; at the second time `a = V e₀ e₀† V†`. Set 1 is
/// `{b, 1−b} × {a, 1−a}`, set 2 is `{b', 1−b'} × {a, 1−a}`. Annealing plus a
/// least-squares refinement drives the off-diagonal terms of both sets and
/// `1 − p(b|a)`, `1 − p(b'|a)` to zero. Every returned witness has been
/// re-derived by [`contrary_between`] from freshly computed decoherence
/// matrices.
pub fn contrary_inference_finder(
    dynamics: &QuantumDynamics,
    grid: &TimeGrid,
    opts: &ContraryOptions,
) -> Result<Option<ContraryWitness>> {
    let dim = dynamics.dim();
    if dim < 3 {
        return Err(WindowError::InfeasibleRanks(format!(
            "contrary inference needs dimension ≥ 3, got {dim}"
        )));
    }
    if grid.len() != 2 {
        return Err(WindowError::InvalidOptions(format!(
            "contrary inference uses two times, grid has {}",
            grid.len()
        )));
    }
    opts.search.validate()?;
    let basis = hermitian_basis(dim);
    let per = basis.len();
    let fast = FastFunctional::new(dynamics, grid);
    let identity = ComplexMatrix::identity(dim, dim);
    let sets = |theta: &[f64]| {
        let w = unitary_from_coordinates(&basis, &theta[..per]);
        let v = unitary_from_coordinates(&basis, &theta[per..]);
        let b = rank_one(w.column(0));
        let b2 = rank_one(w.column(1));
        let a = rank_one(v.column(0));
        let final_slot = vec![a.clone(), &identity - &a];
        (
            vec![vec![b.clone(), &identity - &b], final_slot.clone()],
            vec![vec![b2.clone(), &identity - &b2], final_slot],
        )
    };
    // histories in enumeration order: (b,a) (b,¬a) (¬b,a) (¬b,¬a)
    let residuals = |theta: &[f64]| -> Vec<f64> {
        let (s1, s2) = sets(theta);
        let mut r = Vec::with_capacity(28);
        let mut pa = 0.0;
        for s in [&s1, &s2] {
            let d = fast.matrix(s);
            for i in 0..4 {
                for j in (i + 1)..4 {
                    r.push(d[(i, j)].re);
                    r.push(d[(i, j)].im);
                }
            }
            let (hit, miss) = (d[(0, 0)].re, d[(2, 2)].re);
            pa = hit + miss;
            r.push(if pa > 0.0 { miss / pa } else { 1.0 });
        }
        r.push((opts.min_mass - pa).max(0.0));
        r
    };
    let objective = |theta: &[f64]| residuals(theta).iter().map(|v| v * v).sum::<f64>();
    let runs: Vec<(u64, Vec<f64>)> = (0..opts.search.restarts)
        .into_par_iter()
        .map(|k| {
            let seed = opts.search.seed.wrapping_add(k as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let start = random_start(&mut rng, 2 * per);
            let (annealed, _) = anneal(&objective, start, &opts.search, &mut rng);
            (
                seed,
                levenberg_marquardt(&residuals, annealed, opts.search.refine_iterations),
            )
        })
        .collect();
    for (seed, theta) in runs {
        let (s1, s2) = sets(&theta);
        let (Ok(set1), Ok(set2)) = (
            HistorySet::with_tolerance(grid.clone(), s1, EXCLUSIVE_TOL),
            HistorySet::with_tolerance(grid.clone(), s2, EXCLUSIVE_TOL),
        ) else {
            continue;
        };
        if let Some(w) = contrary_between(&set1, &set2, dynamics, opts.min_mass, seed)? {
            return Ok(Some(w));
        }
    }
    Ok(None)
}

/// Three-level example: `ψ = (1,1,1)/√3` prepared, `φ = (1,1,−1)/√3` found at
/// the second time, no dynamics. Both `|0⟩⟨0|` and `|1⟩⟨1|` are inferred at
/// the first time with probability one.
pub fn three_box_sets(grid: &TimeGrid) -> Result<(QuantumDynamics, HistorySet, HistorySet)> {
    let s = 1.0 / 3f64.sqrt();
    let psi = nalgebra::DVector::from_vec(vec![C64::new(s, 0.0); 3]);
    let phi = nalgebra::DVector::from_vec(vec![C64::new(s, 0.0), C64::new(s, 0.0), C64::new(-s, 0.0)]);
    let dynamics = QuantumDynamics::new(ComplexMatrix::zeros(3, 3), DensityMatrix::pure(&psi)?)?;
    let id = ComplexMatrix::identity(3, 3);
    let a = &phi * phi.adjoint();
    let unit = |k: usize| {
        let mut m = ComplexMatrix::zeros(3, 3);
        m[(k, k)] = C64::new(1.0, 0.0);
        m
    };
    let final_slot = vec![a.clone(), &id - &a];
    let set1 = HistorySet::with_tolerance(
        grid.clone(),
        vec![vec![unit(0), &id - unit(0)], final_slot.clone()],
        EXCLUSIVE_TOL,
    )?;
    let set2 = HistorySet::with_tolerance(
        grid.clone(),
        vec![vec![unit(1), &id - unit(1)], final_slot],
        EXCLUSIVE_TOL,
    )?;
    Ok((dynamics, set1, set2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, DensityMatrix};
    use crate::random;

    fn sigma_x() -> ComplexMatrix {
        ComplexMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
    }

    fn sigma_z() -> ComplexMatrix {
        ComplexMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)])
    }

    fn diag_state(values: &[f64]) -> DensityMatrix {
        let n = values.len();
        DensityMatrix::new(ComplexMatrix::from_fn(n, n, |i, j| {
            if i == j {
                c(values[i], 0.0)
            } else {
                c(0.0, 0.0)
            }
        }))
        .unwrap()
    }

    #[test]
    fn hermitian_basis_is_orthonormal() {
        let b = hermitian_basis(3);
        assert_eq!(b.len(), 9);
        for i in 0..9 {
            for j in 0..9 {
                let ip = crate::linalg::trace_product(&b[i], &b[j]).re;
                assert!((ip - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn spectral_window_qubit() {
        let dynamics = QuantumDynamics::new(sigma_x(), diag_state(&[0.7, 0.3])).unwrap();
        let grid = TimeGrid::new(vec![0.3, 1.1, 2.0]).unwrap();
        let w = spectral_window(&dynamics, &grid).unwrap();
        assert_eq!(w.report.verdict, Verdict::Exact);
        let p = probabilities(&w.matrix, 0.0).unwrap();
        let mut nonzero: Vec<f64> = p.values.iter().copied().filter(|v| *v > 1e-12).collect();
        nonzero.sort_by(f64::total_cmp);
        assert!((nonzero[0] - 0.3).abs() < 1e-12 && (nonzero[1] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn maximally_mixed_gives_trivial_window() {
        let dynamics = QuantumDynamics::new(sigma_x(), DensityMatrix::maximally_mixed(2)).unwrap();
        let grid = TimeGrid::new(vec![0.0, 1.0]).unwrap();
        let w = spectral_window(&dynamics, &grid).unwrap();
        assert!(w.history_set.alternatives().iter().all(|s| s.len() == 1));
    }

    #[test]
    fn energy_window_plus_state() {
        let plus = nalgebra::DVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]).unscale(2f64.sqrt());
        let dynamics = QuantumDynamics::new(sigma_z(), DensityMatrix::pure(&plus).unwrap()).unwrap();
        let grid = TimeGrid::new(vec![0.5, 1.5]).unwrap();
        let w = energy_window(&dynamics, &grid).unwrap();
        assert_eq!(w.report.verdict, Verdict::Exact);
        let p = probabilities(&w.matrix, 0.0).unwrap();
        let mass0 = p.mass(&w.history_set.slot_proposition(0, 0)).unwrap();
        assert!((mass0 - 0.5).abs() < 1e-12);
        let flat = QuantumDynamics::new(ComplexMatrix::identity(2, 2), DensityMatrix::pure(&plus).unwrap()).unwrap();
        let trivial = energy_window(&flat, &grid).unwrap();
        assert_eq!(trivial.history_set.len(), 1);
    }

    #[test]
    fn infeasible_rank_profile() {
        let dynamics = QuantumDynamics::new(sigma_x(), diag_state(&[1.0, 0.0])).unwrap();
        let grid = TimeGrid::new(vec![0.0]).unwrap();
        let err = search_consistent_sets(
            &dynamics,
            &grid,
            &SearchFamily::uniform(1, vec![1, 2]),
            &SearchOptions::default(),
        );
        assert!(matches!(err, Err(WindowError::InfeasibleRanks(_))));
    }

    #[test]
    fn single_time_search_is_trivially_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dynamics = QuantumDynamics::new(random::hermitian(&mut rng, 2), random::pure_state(&mut rng, 2)).unwrap();
        let grid = TimeGrid::new(vec![0.4]).unwrap();
        let opts = SearchOptions {
            iterations: 100,
            polish_evaluations: 0,
            ..SearchOptions::default()
        };
        let found = search_consistent_sets(&dynamics, &grid, &SearchFamily::uniform(1, vec![1, 1]), &opts).unwrap();
        assert_eq!(found.len(), opts.restarts);
        assert!(found.iter().all(|w| w.score < 1e-12));
    }

    #[test]
    fn sigma_z_pair_under_sigma_x_precession() {
        let dynamics =
            QuantumDynamics::new(sigma_x(), random::pure_state(&mut ChaCha8Rng::seed_from_u64(1), 2)).unwrap();
        let z = vec![
            ComplexMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]),
            ComplexMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]),
        ];
        let score_at = |gap: f64| {
            let grid = TimeGrid::new(vec![0.2, 0.2 + gap]).unwrap();
            let set = HistorySet::with_tolerance(grid, vec![z.clone(), z.clone()], EXCLUSIVE_TOL).unwrap();
            WindowCandidate::evaluate(set, &dynamics, 0.1, Vec::new())
                .unwrap()
                .score
        };
        assert!(score_at(0.7) > 0.1);
        assert!(score_at(std::f64::consts::PI) < 1e-8);
    }

    #[test]
    fn certify_spectral_and_energy_windows() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dynamics = QuantumDynamics::new(random::hermitian(&mut rng, 3), random::density(&mut rng, 3)).unwrap();
        let grid = TimeGrid::new(vec![0.1, 0.9, 1.4]).unwrap();
        for w in [
            spectral_window(&dynamics, &grid).unwrap(),
            energy_window(&dynamics, &grid).unwrap(),
        ] {
            let cert = certify_classicality(&w, &dynamics, 1e-8).unwrap();
            assert!(cert.persistent);
            assert!(cert.deterministic);
        }
    }

    #[test]
    fn repeated_sigma_z_window_fails_under_precession() {
        let dynamics = QuantumDynamics::new(sigma_x(), diag_state(&[1.0, 0.0])).unwrap();
        let grid = TimeGrid::new(vec![0.0, 0.7]).unwrap();
        let z = vec![
            ComplexMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]),
            ComplexMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]),
        ];
        let set = HistorySet::with_tolerance(grid, vec![z.clone(), z], EXCLUSIVE_TOL).unwrap();
        let w = WindowCandidate::evaluate(set, &dynamics, 1.0, Vec::new()).unwrap();
        assert!(w.report.verdict.is_consistent());
        let err = certify_classicality(&w, &dynamics, 0.1).unwrap_err();
        assert!(
            matches!(err, WindowError::UnstableSampleSpace { slot: 1, .. }),
            "{err:?}"
        );
    }

    #[test]
    fn three_box_example_is_a_witness() {
        let grid = TimeGrid::new(vec![0.5, 1.0]).unwrap();
        let (dynamics, s1, s2) = three_box_sets(&grid).unwrap();
        let w = contrary_between(&s1, &s2, &dynamics, 1e-2, 0)
            .unwrap()
            .expect("witness");
        assert_eq!(w.a, (1, 0));
        assert!((w.p_a - 1.0 / 9.0).abs() < 1e-12);
        assert!(w.orthogonality < 1e-12);
    }

    #[test]
    fn spectral_window_with_itself_has_no_contrary_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dynamics = QuantumDynamics::new(random::hermitian(&mut rng, 3), random::density(&mut rng, 3)).unwrap();
        let grid = TimeGrid::new(vec![0.2, 0.8]).unwrap();
        let w = spectral_window(&dynamics, &grid).unwrap();
        let found = contrary_between(&w.history_set, &w.history_set, &dynamics, 1e-3, 0).unwrap();
        assert!(found.is_none());
    }

    #[test]
    fn finder_rejects_qubits() {
        let dynamics = QuantumDynamics::new(sigma_x(), diag_state(&[1.0, 0.0])).unwrap();
        let grid = TimeGrid::new(vec![0.0, 1.0]).unwrap();
        assert!(contrary_inference_finder(&dynamics, &grid, &ContraryOptions::default()).is_err());
    }
}
