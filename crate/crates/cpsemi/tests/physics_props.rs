use std::f64::consts::PI;

use cpsemi::dilation_toy::{build_zr, compressed_evolution, ReservoirGrid};
use cpsemi::friedrichs_wcl::{level_shift, nu_identity_residual, FriedrichsModel, Profile};
use cpsemi::invariance_dbc::{construct_epsilon, quadratic_balance_residual, SmallSystem};
use cpsemi::langevin_fock::{build_langevin_z, fock_dimension, TruncatedFock};
use cpsemi::matrixcore::{commutator, expm, herm_eig, I};
use cpsemi::cpmap::CpMapData;
use cpsemi::pauli_fierz::{certify_davies, davies_generator, make_thermal_coupling, SpectralCouplingModel};
use cpsemi::random::haar_unitary;
use cpsemi::{ComplexMatrix, C64};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn two_level(eps: f64) -> ComplexMatrix {
    ComplexMatrix::diag_real(&[0.0, eps])
}

fn lowering() -> ComplexMatrix {
    ComplexMatrix::unit(2, 0, 1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dilation_propagator_is_unitary(g in 0.1f64..1.0, r in 2.0f64..8.0) {
        let ups = ComplexMatrix::diag(&[C64::new(0.3, -g)]);
        let dil = build_zr(&ups, &ReservoirGrid::symmetric(r, 41).unwrap()).unwrap();
        let u = expm(&dil.z.scale(-I));
        prop_assert!((&(&u.adjoint() * &u) - &ComplexMatrix::identity(dil.dim())).norm_fro() <= 1e-10);
    }

    #[test]
    fn compression_ignores_reservoir_rotations(seed in any::<u64>(), t in 0.1f64..2.0) {
        let ups = ComplexMatrix::diag(&[C64::new(0.0, -0.5)]);
        let dil = build_zr(&ups, &ReservoirGrid::symmetric(4.0, 9).unwrap()).unwrap();
        let v = haar_unitary(&mut ChaCha8Rng::seed_from_u64(seed), dil.dim() - 1);
        let mut w = ComplexMatrix::identity(dil.dim());
        w.set_block(1, 1, &v);
        let z2 = &(&w * &dil.z) * &w.adjoint();
        let a = compressed_evolution(&herm_eig(&dil.z).unwrap(), 1, t);
        let b = compressed_evolution(&herm_eig(&z2.hermitian_part()).unwrap(), 1, t);
        prop_assert!((&a - &b).norm_fro() <= 1e-10);
    }

    #[test]
    fn flat_level_shift(g in 0.01f64..0.5, a in 0.2f64..2.0, b in 0.2f64..2.0) {
        let m = FriedrichsModel::with_default_ops(ComplexMatrix::zeros(1, 1), vec![(0.0, -a, b, Profile::Flat { g })]).unwrap();
        let ups = level_shift(&m).unwrap().upsilon;
        let exact = C64::new(-g * g * (b / a).ln(), -PI * g * g);
        prop_assert!((ups[(0, 0)] - exact).norm() <= 1e-6);
        prop_assert!(nu_identity_residual(&ups, &m.nu()) <= 1e-6);
    }

    #[test]
    fn thermal_davies_data_certifies(g in 0.05f64..0.4, beta in 0.2f64..3.0, eps in 0.5f64..2.0) {
        let bohr = make_thermal_coupling(&Profile::Flat { g }, &[lowering()], eps, 0.5 * eps, 1.5 * eps, beta).unwrap();
        let model = SpectralCouplingModel::new(two_level(eps), bohr, Some(beta)).unwrap();
        let data = davies_generator(&model).unwrap();
        let cert = certify_davies(&model, &data, Some(beta)).unwrap();
        prop_assert!(cert.passed);
        prop_assert!((&commutator(&data.upsilon, &model.sys.k)).norm_fro() <= 1e-10);
        prop_assert!(construct_epsilon(&data.nu, &data.y, beta).is_ok());
    }

    #[test]
    fn thermal_pair_balances(gamma in 0.1f64..2.0, beta in 0.1f64..3.0, eps in 0.2f64..2.0) {
        let n = 1.0 / (beta * eps).exp_m1();
        let nu = CpMapData::new(2, 2, vec![
            lowering().scale_real((gamma * (1.0 + n)).sqrt()),
            lowering().adjoint().scale_real((gamma * n).sqrt()),
        ]).unwrap();
        let y = ComplexMatrix::diag_real(&[eps, -eps]);
        prop_assert!(quadratic_balance_residual(&nu, &y, beta).unwrap() <= 1e-10);
        let zero_t = CpMapData::new(2, 2, vec![lowering()]).unwrap();
        prop_assert!(quadratic_balance_residual(&zero_t, &ComplexMatrix::diag_real(&[eps]), beta).unwrap() > 0.0);
    }

    #[test]
    fn fock_dimension_is_binomial(modes in 1usize..12, n_max in 0usize..4) {
        let f = TruncatedFock::new(modes, n_max).unwrap();
        let mut binom = 1.0;
        for k in 0..n_max {
            binom *= (modes + n_max - k) as f64 / (k + 1) as f64;
        }
        prop_assert_eq!(f.dim() as f64, binom.round());
        prop_assert_eq!(fock_dimension(modes, n_max), binom.round());
    }
}

#[test]
fn gibbs_state_of_two_level() {
    let sys = SmallSystem::new(two_level(1.0)).unwrap();
    let rho = sys.gibbs(2.0).rho;
    let z = 1.0 + (-2.0f64).exp();
    assert!((rho[(0, 0)].re - 1.0 / z).abs() < 1e-14);
    assert!((rho[(1, 1)].re - (-2.0f64).exp() / z).abs() < 1e-14);
}

#[test]
fn langevin_generator_is_hermitian() {
    let ups = ComplexMatrix::diag(&[C64::new(0.2, -0.5)]);
    let gen = build_langevin_z(&ups, &[ComplexMatrix::identity(1)], &ReservoirGrid::symmetric(5.0, 7).unwrap(), 2).unwrap();
    let dense = gen.z.to_dense();
    assert!(dense.hermiticity_deviation() < 1e-14);
}
