//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use histkit::classical::{BistochasticMap, Cell, ClassicalState, Permutation, SampleSpace};
use histkit::linalg::{c, ComplexMatrix, C64};
use histkit::window::ContraryWitness;
use histkit::{random, DensityMatrix, QuantumDynamics, TimeGrid};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// `exp(m)` by scaling and squaring of a Taylor series.
pub fn expm(m: &ComplexMatrix) -> ComplexMatrix {
    let n = m.nrows();
    let norm: f64 = m.iter().map(|z| z.norm()).sum::<f64>().max(1e-300);
    let squarings = norm.log2().ceil().max(0.0) as i32 + 1;
    let scaled = m.unscale(2f64.powi(squarings));
    let mut term = ComplexMatrix::identity(n, n);
    let mut sum = term.clone();
    for k in 1..30 {
        term = &term * &scaled / C64::new(k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

pub fn evolution(h: &ComplexMatrix, t: f64) -> ComplexMatrix {
    expm(&h.map(|z| z * C64::new(0.0, -t)))
}

/// Index tuples in mixed radix, last slot fastest.
pub fn tuples(counts: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &k in counts {
        out = out
            .into_iter()
            .flat_map(|p: Vec<usize>| {
                (0..k).map(move |i| {
                    let mut q = p.clone();
                    q.push(i);
                    q
                })
            })
            .collect();
    }
    out
}

/// `d(α,β) = Tr(C_α ρ C_β†)` with `C_α = P_n U(t_n − t_{n−1}) ⋯ P_1 U(t_1)`.
pub fn decoherence_oracle(
    h: &ComplexMatrix,
    rho: &ComplexMatrix,
    times: &[f64],
    slots: &[Vec<ComplexMatrix>],
) -> ComplexMatrix {
    let counts: Vec<usize> = slots.iter().map(Vec::len).collect();
    let mut previous = 0.0;
    let steps: Vec<ComplexMatrix> = times
        .iter()
        .map(|&t| {
            let u = evolution(h, t - previous);
            previous = t;
            u
        })
        .collect();
    let ops: Vec<ComplexMatrix> = tuples(&counts)
        .iter()
        .map(|tuple| {
            let mut c = ComplexMatrix::identity(h.nrows(), h.nrows());
            for (s, &a) in tuple.iter().enumerate() {
                c = &slots[s][a] * &steps[s] * c;
            }
            c
        })
        .collect();
    let k = ops.len();
    ComplexMatrix::from_fn(k, k, |a, b| (&ops[a] * rho * ops[b].adjoint()).trace())
}

/// Random projective partition of `C^dim` into `k` blocks.
pub fn random_partition(rng: &mut ChaCha8Rng, dim: usize, k: usize) -> Vec<ComplexMatrix> {
    let u = random::unitary(rng, dim).into_matrix();
    let mut order: Vec<usize> = (0..dim).collect();
    order.shuffle(rng);
    let mut labels: Vec<usize> = (0..dim)
        .map(|i| if i < k { i } else { rng.random_range(0..k) })
        .collect();
    labels.shuffle(rng);
    (0..k)
        .map(|block| {
            let mut p = ComplexMatrix::zeros(dim, dim);
            for (i, &l) in labels.iter().enumerate() {
                if l == block {
                    let v = u.column(order[i]);
                    p += v * v.adjoint();
                }
            }
            p
        })
        .collect()
}

pub struct QuantumDraw {
    pub dynamics: QuantumDynamics,
    pub grid: TimeGrid,
    pub slots: Vec<Vec<ComplexMatrix>>,
}

pub fn random_times(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut t = rng.random_range(0.0..1.0);
    (0..n)
        .map(|_| {
            t += rng.random_range(0.05..1.5);
            t
        })
        .collect()
}

pub fn random_quantum(rng: &mut ChaCha8Rng, max_dim: usize, max_times: usize, max_alts: usize) -> QuantumDraw {
    let dim = rng.random_range(2..=max_dim);
    let n = rng.random_range(1..=max_times);
    let h = random::hermitian(rng, dim);
    let rho = if rng.random_bool(0.5) {
        random::pure_state(rng, dim)
    } else {
        random::density(rng, dim)
    };
    let slots = (0..n)
        .map(|_| {
            let k = rng.random_range(1..=max_alts.min(dim));
            random_partition(rng, dim, k)
        })
        .collect();
    QuantumDraw {
        dynamics: QuantumDynamics::new(h, rho).unwrap(),
        grid: TimeGrid::new(random_times(rng, n)).unwrap(),
        slots,
    }
}

pub fn diag_density(values: &[f64]) -> DensityMatrix {
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

/// Random convex combination of random permutations.
pub fn random_bistochastic(rng: &mut ChaCha8Rng, n: usize, terms: usize) -> (BistochasticMap, Vec<Permutation>) {
    let perms: Vec<Permutation> = (0..terms)
        .map(|_| {
            let mut images: Vec<usize> = (0..n).collect();
            images.shuffle(rng);
            Permutation::new(images).unwrap()
        })
        .collect();
    let raw: Vec<f64> = (0..terms).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    (histkit::classical::convex_dynamics(&weights, &perms).unwrap(), perms)
}

/// Random partition of `0..n` into between 1 and `n` nonempty cells.
pub fn random_cells(rng: &mut ChaCha8Rng, n: usize) -> Vec<Cell> {
    let k = rng.random_range(1..=n);
    let mut labels: Vec<usize> = (0..n).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect();
    labels.shuffle(rng);
    (0..k)
        .map(|b| Cell::new(n, (0..n).filter(|&i| labels[i] == b)).unwrap())
        .collect()
}

pub fn random_classical_state(rng: &mut ChaCha8Rng, space: &SampleSpace) -> ClassicalState {
    let raw: Vec<f64> = (0..space.len()).map(|_| rng.random_range(0.0..1.0)).collect();
    let mass: f64 = raw.iter().zip(space.weights()).map(|(d, w)| d * w).sum();
    ClassicalState::new(space, raw.iter().map(|d| d / mass).collect()).unwrap()
}

/// Mass of paths `x₀ → x₁ → ⋯ → x_n` with `x_k ∈ cells[k]`, summed one path
/// at a time.
pub fn path_enumeration(masses: &[f64], maps: &[DMatrix<f64>], cells: &[Cell]) -> f64 {
    let n = masses.len();
    let steps = maps.len();
    let mut total = 0.0;
    let mut path = vec![0usize; steps + 1];
    let paths = n.pow(steps as u32 + 1);
    for code in 0..paths {
        let mut rest = code;
        for slot in path.iter_mut() {
            *slot = rest % n;
            rest /= n;
        }
        if (1..=steps).any(|k| !cells[k - 1].contains(path[k])) {
            continue;
        }
        let mut w = masses[path[0]];
        for k in 1..=steps {
            w *= maps[k - 1][(path[k - 1], path[k])];
        }
        total += w;
    }
    total
}

/// Re-derives every clause of a contrary-inference witness from scratch and
/// returns the first violated one.
pub fn witness_violation(w: &ContraryWitness, dynamics: &QuantumDynamics, min_mass: f64) -> Option<String> {
    let h = dynamics.hamiltonian();
    let rho = dynamics.initial_state().matrix();
    let times = w.set1.grid().times();
    let dist = |x: &ComplexMatrix, y: &ComplexMatrix| (x - y).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let a = &w.set1.alternatives()[w.a.0][w.a.1];
    let Some(a_in_2) = w.set2.alternatives()[w.a.0].iter().position(|q| dist(q, a) <= 1e-8) else {
        return Some("a is not shared by the two sets".into());
    };
    let mut conditionals = Vec::new();
    for (set, ia, b) in [(&w.set1, w.a.1, w.b), (&w.set2, a_in_2, w.b_prime)] {
        let alts = set.alternatives();
        let d = decoherence_oracle(h, rho, times, alts);
        let n = d.nrows();
        let off = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| d[(i, j)].norm())
            .fold(0.0, f64::max);
        if off > 1e-8 {
            return Some(format!("off-diagonal {off:e}"));
        }
        let counts: Vec<usize> = alts.iter().map(Vec::len).collect();
        let (mut pa, mut pab) = (0.0, 0.0);
        for (k, t) in tuples(&counts).iter().enumerate() {
            if t[w.a.0] == ia {
                pa += d[(k, k)].re;
                if t[b.0] == b.1 {
                    pab += d[(k, k)].re;
                }
            }
        }
        if pa < min_mass {
            return Some(format!("p(a) = {pa}"));
        }
        conditionals.push(pab / pa);
    }
    if let Some(p) = conditionals.iter().find(|&&p| p < 1.0 - 1e-6) {
        return Some(format!("p(b|a) = {p}"));
    }
    let b = &w.set1.alternatives()[w.b.0][w.b.1];
    let b2 = &w.set2.alternatives()[w.b_prime.0][w.b_prime.1];
    let orth = (b * b2).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if orth > 1e-8 {
        return Some(format!("‖b b'‖ = {orth:e}"));
    }
    None
}
