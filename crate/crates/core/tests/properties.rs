use cohere::distillation::{fidelity_mio_bit, fidelity_sio_bit, multicopy_bounds, FidelityOptions};
use cohere::io::{parse_channel, parse_density, write_channel, write_matrix};
use cohere::matrix::DensityMatrix;
use cohere::measures::{coherence_partition, eta, mu_k, q_measure, rel_entropy_coherence, DEFAULT_EDGE_TOL};
use cohere::protocols::{apply_channel, random_density, random_sio, rng_for, SIO_TOL};
use cohere::states::random_block_state;
use proptest::prelude::*;

fn state(d: usize, rank: usize, seed: u64) -> DensityMatrix {
    random_density(d, rank.min(d), &mut rng_for(seed, 0)).unwrap()
}

proptest! {
    #[test]
    fn eta_is_a_probability(d in 2usize..7, rank in 1usize..7, seed: u64) {
        let e = eta(&state(d, rank, seed));
        prop_assert!((0.0..=1.0).contains(&e));
    }

    #[test]
    fn dephasing_is_idempotent(d in 1usize..7, seed: u64) {
        let once = state(d, d, seed).dephased();
        prop_assert_eq!(once.dephased(), once);
    }

    #[test]
    fn q_is_below_relative_entropy(d in 2usize..6, block in any::<bool>(), seed: u64) {
        let rho = if block { random_block_state(d, &mut rng_for(seed, 1)).unwrap().0 } else { state(d, d, seed) };
        let q = q_measure(&rho).unwrap();
        prop_assert!(q >= 0.0);
        prop_assert!(q <= rel_entropy_coherence(&rho) + 1e-9);
    }

    #[test]
    fn mu_k_is_bounded_by_log_k(d in 2usize..6, rank in 1usize..6, seed: u64) {
        let rho = state(d, rank, seed);
        for k in 1..=d {
            let m = mu_k(&rho, k).unwrap();
            prop_assert!(m >= -1e-12 && m <= (k as f64).log2() + 1e-12);
        }
    }

    #[test]
    fn sio_channels_preserve_trace_and_partition_checks(d in 2usize..5, kraus in 1usize..5, seed: u64) {
        let mut rng = rng_for(seed, 2);
        let ch = random_sio(d, kraus, &mut rng).unwrap();
        let out = apply_channel(&ch, &state(d, d, seed)).unwrap();
        prop_assert!((out.matrix().trace().re - 1.0).abs() < 1e-12);
        prop_assert!(coherence_partition(&out, DEFAULT_EDGE_TOL).is_ok());
    }

    #[test]
    fn file_round_trips(d in 1usize..6, kraus in 1usize..4, seed: u64) {
        let rho = state(d, d, seed);
        prop_assert_eq!(parse_density(&write_matrix(rho.matrix())).unwrap(), rho);
        let ch = random_sio(d, kraus, &mut rng_for(seed, 3)).unwrap();
        prop_assert_eq!(parse_channel(&write_channel(&ch), SIO_TOL).unwrap(), ch);
    }

    #[test]
    fn multicopy_bounds_are_ordered(d in 2usize..6, seed: u64) {
        let rho = state(d, d, seed);
        let mut previous = 0.5;
        for n in 1..6 {
            let b = multicopy_bounds(&rho, n).unwrap();
            prop_assert!(b.lower <= b.upper + 1e-15);
            prop_assert!(b.lower >= previous - 1e-15);
            previous = b.lower;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fidelities_are_ordered(d in 2usize..5, rank in 1usize..5, seed: u64) {
        let rho = state(d, rank, seed);
        let opts = FidelityOptions::default();
        let sio = fidelity_sio_bit(&rho, &opts).unwrap();
        let mio = fidelity_mio_bit(&rho, &opts).unwrap();
        prop_assert!(sio.value >= 0.5 - 1e-9 && sio.value <= 1.0 + 1e-9);
        prop_assert!(sio.primal_value <= sio.dual_value + 1e-9);
        prop_assert!(mio.value >= sio.value - 1e-7);
        prop_assert!(sio.value <= (1.0 + eta(&rho)) / 2.0 + 1e-7);
    }
}
