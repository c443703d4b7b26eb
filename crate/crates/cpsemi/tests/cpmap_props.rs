use cpsemi::cpmap::{dilation_equivalence, is_completely_positive, kadison_schwarz_residual, stinespring_minimal, CpMapData};
use cpsemi::matrixcore::herm_eig;
use cpsemi::random::{random_blocks, random_matrix};
use cpsemi::{ComplexMatrix, C64};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_map(seed: u64, d: usize, n: usize) -> CpMapData {
    CpMapData::new(d, d, random_blocks(&mut rng(seed), n, d, d)).unwrap()
}

/// ν_j → ν_j S^{−1/2} with S = Σ ν*ν, so that Ξ(1) = 1.
fn unital(map: &CpMapData) -> CpMapData {
    let e = herm_eig(&map.nu_star_nu()).unwrap();
    let s = e.apply_fn(|x| C64::new(x.powf(-0.5), 0.0));
    CpMapData::new(map.d_in, map.d_out, map.kraus.iter().map(|b| b * &s).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn kraus_maps_are_cp(seed in any::<u64>(), d in 1usize..4, n in 1usize..5) {
        let s = random_map(seed, d, n).to_superoperator().unwrap();
        prop_assert!(is_completely_positive(&s, 1e-10));
    }

    #[test]
    fn minimal_extraction_round_trip(seed in any::<u64>(), d in 1usize..4, n in 1usize..6) {
        let map = random_map(seed, d, n);
        let s = map.to_superoperator().unwrap();
        let min = stinespring_minimal(&s).unwrap();
        prop_assert_eq!(min.noise_dim(), n.min(d * d));
        prop_assert!(min.to_superoperator().unwrap().distance(&s) <= 1e-10 * (1.0 + s.norm_fro()));
    }

    #[test]
    fn shuffled_blocks_are_equivalent(seed in any::<u64>(), d in 2usize..4, n in 1usize..4, rot in 0usize..4) {
        let min = stinespring_minimal(&random_map(seed, d, n).to_superoperator().unwrap()).unwrap();
        let k = min.noise_dim();
        let mut shuffled = min.kraus.clone();
        shuffled.rotate_left(rot % k);
        let phased: Vec<ComplexMatrix> =
            shuffled.iter().enumerate().map(|(j, b)| b.scale(C64::from_polar(1.0, j as f64))).collect();
        let other = CpMapData::new(d, d, phased).unwrap();
        let eq = dilation_equivalence(&min, &other).unwrap();
        prop_assert!(eq.residual <= 1e-8);
        prop_assert!(eq.unitarity_error <= 1e-8);
    }

    #[test]
    fn unital_maps_stay_unital(seed in any::<u64>(), d in 1usize..4, n in 1usize..5) {
        let map = unital(&random_map(seed, d, n));
        let min = stinespring_minimal(&map.to_superoperator().unwrap()).unwrap();
        let one = ComplexMatrix::identity(d);
        prop_assert!((&min.apply(&one).unwrap() - &one).norm_fro() <= 1e-10);
    }

    #[test]
    fn kadison_schwarz_residual_is_psd(seed in any::<u64>(), d in 2usize..4, n in 2usize..4) {
        let map = random_map(seed, d, n);
        let a = random_matrix(&mut rng(seed ^ 0x5eed), d, d);
        let r = kadison_schwarz_residual(&map, &a).unwrap();
        let min = r.hermitian_part().min_eigenvalue().unwrap();
        prop_assert!(min >= -1e-10 * r.norm_fro());
    }
}

#[test]
fn transpose_is_not_cp() {
    let s = cpsemi::matrixcore::superop_of_map(2, |a| a.transpose());
    assert!(!is_completely_positive(&s, 1e-10));
}
