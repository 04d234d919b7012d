mod common;

use common::{decoherence_oracle, diag_density, witness_violation};
use histkit::linalg::{c, ComplexMatrix};
use histkit::random;
use histkit::window::{
    certify_classicality, contrary_between, contrary_inference_finder, energy_window, search_consistent_sets,
    spectral_window, three_box_sets, ContraryOptions, SearchFamily, SearchOptions,
};
use histkit::{check_consistency, DecoherenceMatrix, QuantumDynamics, TimeGrid, Verdict};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn oracle_score(w: &histkit::window::WindowCandidate, dynamics: &QuantumDynamics, epsilon: f64) -> f64 {
    let d = decoherence_oracle(
        dynamics.hamiltonian(),
        dynamics.initial_state().matrix(),
        w.history_set.grid().times(),
        w.history_set.alternatives(),
    );
    let dm = DecoherenceMatrix::from_parts(w.history_set.labels(), d);
    check_consistency(&dm, epsilon).unwrap().worst_ratio
}

fn qubit_problem(seed: u64) -> (QuantumDynamics, TimeGrid) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dynamics = QuantumDynamics::new(random::hermitian(&mut rng, 2), random::pure_state(&mut rng, 2)).unwrap();
    (dynamics, TimeGrid::new(vec![0.3, 1.1]).unwrap())
}

#[test]
fn searched_candidates_revalidate_from_scratch() {
    let (dynamics, grid) = qubit_problem(8);
    let opts = SearchOptions {
        seed: 8,
        ..SearchOptions::default()
    };
    let found = search_consistent_sets(&dynamics, &grid, &SearchFamily::uniform(2, vec![1, 1]), &opts).unwrap();
    assert!(!found.is_empty());
    for w in &found {
        assert!(w.score <= opts.epsilon);
        assert!((oracle_score(w, &dynamics, opts.epsilon) - w.score).abs() <= 1e-10);
    }
    assert!(found.windows(2).all(|p| p[0].score <= p[1].score));
}

#[test]
fn search_is_deterministic_under_a_seed() {
    let (dynamics, grid) = qubit_problem(2);
    let family = SearchFamily::uniform(2, vec![1, 1]);
    let opts = SearchOptions {
        seed: 99,
        iterations: 800,
        ..SearchOptions::default()
    };
    let first = search_consistent_sets(&dynamics, &grid, &family, &opts).unwrap();
    let second = search_consistent_sets(&dynamics, &grid, &family, &opts).unwrap();
    assert_eq!(first.len(), second.len());
    for (a, b) in first.iter().zip(&second) {
        assert_eq!(a.params, b.params);
        assert_eq!(a.score.to_bits(), b.score.to_bits());
        assert_eq!(a.matrix.values(), b.matrix.values());
    }
}

#[test]
fn search_recovers_a_spectral_window() {
    // ρ = diag(0.6, 0.3, 0.1) has rank profile (1, 1, 1); its spectral window
    // is exactly consistent, so a search over that profile must reach it or
    // another exact set.
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let dynamics = QuantumDynamics::new(random::hermitian(&mut rng, 3), diag_density(&[0.6, 0.3, 0.1])).unwrap();
    let grid = TimeGrid::new(vec![0.4, 1.3]).unwrap();
    assert!(spectral_window(&dynamics, &grid).unwrap().score <= 1e-10);
    let opts = SearchOptions {
        iterations: 10_000,
        epsilon: 1e-8,
        seed: 4,
        ..SearchOptions::default()
    };
    let found = search_consistent_sets(&dynamics, &grid, &SearchFamily::uniform(2, vec![1, 1, 1]), &opts).unwrap();
    assert!(!found.is_empty());
    assert!(found[0].score <= 1e-8, "{}", found[0].score);
}

#[test]
fn three_box_witness_satisfies_the_contract() {
    let grid = TimeGrid::new(vec![0.5, 1.0]).unwrap();
    let (dynamics, s1, s2) = three_box_sets(&grid).unwrap();
    let w = contrary_between(&s1, &s2, &dynamics, 1e-2, 0)
        .unwrap()
        .expect("witness");
    assert_eq!(witness_violation(&w, &dynamics, 1e-2), None);
}

#[test]
fn finder_witnesses_satisfy_the_contract() {
    let mut found = 0;
    for seed in 0..4u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dynamics = QuantumDynamics::new(random::hermitian(&mut rng, 3), random::pure_state(&mut rng, 3)).unwrap();
        let grid = TimeGrid::new(vec![0.5, 1.5]).unwrap();
        let mut opts = ContraryOptions::default();
        opts.search.seed = seed;
        if let Some(w) = contrary_inference_finder(&dynamics, &grid, &opts).unwrap() {
            found += 1;
            assert_eq!(witness_violation(&w, &dynamics, opts.min_mass), None, "seed {seed}");
            assert_eq!(w.report1.verdict, Verdict::Exact);
            assert_eq!(w.report2.verdict, Verdict::Exact);
        }
    }
    eprintln!("witnesses found: {found}/4");
}

#[test]
fn sigma_x_precession_resonance() {
    let dynamics = QuantumDynamics::new(
        ComplexMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]),
        diag_density(&[1.0, 0.0]),
    )
    .unwrap();
    let z = |k: usize| ComplexMatrix::from_fn(2, 2, |i, j| if i == k && j == k { c(1.0, 0.0) } else { c(0.0, 0.0) });
    for (gap, consistent) in [
        (0.9, false),
        (std::f64::consts::PI, true),
        (2.0 * std::f64::consts::PI, true),
    ] {
        let grid = TimeGrid::new(vec![0.6, 0.6 + gap]).unwrap();
        let set = histkit::HistorySet::with_tolerance(grid, vec![vec![z(0), z(1)]; 2], 1e-9).unwrap();
        let w = histkit::window::WindowCandidate::evaluate(set, &dynamics, 0.1, Vec::new()).unwrap();
        if consistent {
            assert!(w.score < 1e-8, "{gap}: {}", w.score);
        } else {
            assert!(w.score > 0.1, "{gap}: {}", w.score);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn trivial_windows_are_exact_and_persistent(seed in any::<u64>(), dim in 2usize..=4, n in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = if seed % 2 == 0 { random::density(&mut rng, dim) } else { random::pure_state(&mut rng, dim) };
        let dynamics = QuantumDynamics::new(random::hermitian(&mut rng, dim), rho).unwrap();
        let grid = TimeGrid::new(common::random_times(&mut rng, n)).unwrap();
        for w in [spectral_window(&dynamics, &grid).unwrap(), energy_window(&dynamics, &grid).unwrap()] {
            prop_assert_eq!(w.report.verdict, Verdict::Exact);
            prop_assert!(w.matrix.max_off_diagonal() <= 1e-10);
            let cert = certify_classicality(&w, &dynamics, 1e-8).unwrap();
            prop_assert!(cert.persistent);
        }
    }
}
