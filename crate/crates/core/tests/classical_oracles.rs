mod common;

use common::{path_enumeration, random_bistochastic, random_cells, random_classical_state};
use histkit::classical::{
    classical_decoherence, deterministic_history_projector, BistochasticMap, Cell, Permutation, SampleSpace,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn weighted_space(rng: &mut ChaCha8Rng, n: usize) -> SampleSpace {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    SampleSpace::new(
        (0..n).map(|i| format!("x{i}")).collect(),
        raw.iter().map(|w| w / total).collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn diagonal_matches_path_enumeration(seed in any::<u64>(), n in 1usize..=6, steps in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = weighted_space(&mut rng, n);
        let maps: Vec<BistochasticMap> = (0..steps).map(|_| random_bistochastic(&mut rng, n, 3).0).collect();
        let cells: Vec<Cell> = (0..steps)
            .map(|_| {
                let p = random_cells(&mut rng, n);
                let k = rng.random_range(0..p.len());
                p[k].clone()
            })
            .collect();
        let rho = random_classical_state(&mut rng, &space);
        let d = classical_decoherence(&space, &cells, &cells, &maps, &rho).unwrap();
        let raw: Vec<_> = maps.iter().map(|m| m.matrix().clone()).collect();
        let oracle = path_enumeration(&rho.masses(&space), &raw, &cells);
        prop_assert!((d - oracle).abs() <= 1e-13);
    }

    #[test]
    fn bistochastic_maps_compose(seed in any::<u64>(), n in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, _) = random_bistochastic(&mut rng, n, 3);
        let (b, _) = random_bistochastic(&mut rng, n, 2);
        let ab = a.then(&b).unwrap();
        let uniform = vec![1.0 / n as f64; n];
        for (x, y) in ab.push_forward(&uniform).iter().zip(&uniform) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }
}

#[test]
fn deterministic_projector_measure_matches_diagonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let n = rng.random_range(1..=6);
        let steps = rng.random_range(1..=3);
        let space = weighted_space(&mut rng, n);
        let perms: Vec<Permutation> = (0..steps)
            .map(|_| random_bistochastic(&mut rng, n, 1).1.remove(0))
            .collect();
        let maps: Vec<BistochasticMap> = perms.iter().map(BistochasticMap::from_permutation).collect();
        let cells: Vec<Cell> = (0..steps)
            .map(|_| {
                let p = random_cells(&mut rng, n);
                p[rng.random_range(0..p.len())].clone()
            })
            .collect();
        let rho = random_classical_state(&mut rng, &space);
        let d = classical_decoherence(&space, &cells, &cells, &maps, &rho).unwrap();
        let start = deterministic_history_projector(&cells, &perms).unwrap();
        let masses = rho.masses(&space);
        let measure: f64 = start.iter().map(|x| masses[x]).sum();
        assert!((d - measure).abs() <= 1e-13, "{d} vs {measure}");
    }
}

#[test]
fn disjoint_histories_have_zero_off_diagonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let n = rng.random_range(2..=6);
        let space = weighted_space(&mut rng, n);
        let maps: Vec<BistochasticMap> = (0..2).map(|_| random_bistochastic(&mut rng, n, 2).0).collect();
        let p = random_cells(&mut rng, n);
        if p.len() < 2 {
            continue;
        }
        let q = random_cells(&mut rng, n);
        let rho = random_classical_state(&mut rng, &space);
        let a = [p[0].clone(), q[0].clone()];
        let b = [p[1].clone(), q[0].clone()];
        assert_eq!(classical_decoherence(&space, &a, &b, &maps, &rho).unwrap(), 0.0);
    }
}
