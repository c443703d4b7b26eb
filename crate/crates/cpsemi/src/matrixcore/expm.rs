use super::{herm_eig, ComplexMatrix, MatrixError, C64};

const THETA_13: f64 = 5.371920351148152;

const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Matrix exponential by scaling and squaring with the degree-13 Padé approximant.
///
/// Panics if `a` is not square.
pub fn expm(a: &ComplexMatrix) -> ComplexMatrix {
    assert!(a.is_square(), "expm: matrix must be square");
    let n = a.rows();
    if n == 0 {
        return a.clone();
    }
    let norm = a.norm_one();
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as i32
    } else {
        0
    };
    let a = a.scale_real(0.5f64.powi(s));
    let id = ComplexMatrix::identity(n);
    let b = |k: usize| C64::new(PADE_13[k], 0.0);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let mut inner = &(&a6.scale(b(13)) + &a4.scale(b(11))) + &a2.scale(b(9));
    inner = &a6 * &inner;
    let mut u = &(&(&inner + &a6.scale(b(7))) + &a4.scale(b(5))) + &a2.scale(b(3));
    u += &id.scale(b(1));
    let u = &a * &u;

    let mut inner = &(&a6.scale(b(12)) + &a4.scale(b(10))) + &a2.scale(b(8));
    inner = &a6 * &inner;
    let mut v = &(&(&inner + &a6.scale(b(6))) + &a4.scale(b(4))) + &a2.scale(b(2));
    v += &id.scale(b(0));

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .solve(&p)
        .expect("Padé denominator is nonsingular after scaling");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// exp(s·H) for hermitian H and complex scalar s, through the eigendecomposition.
pub fn expm_hermitian(h: &ComplexMatrix, s: C64) -> Result<ComplexMatrix, MatrixError> {
    let e = herm_eig(h)?;
    Ok(e.apply_fn(|x| (s * x).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrixcore::I;
    use crate::random::{random_hermitian, random_matrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exp_of_zero_is_identity() {
        assert!((&expm(&ComplexMatrix::zeros(3, 3)) - &ComplexMatrix::identity(3)).norm_fro() < 1e-15);
    }

    #[test]
    fn exp_of_log_diag() {
        let e = expm(&ComplexMatrix::diag_real(&[2f64.ln(), 0.0]));
        assert!((&e - &ComplexMatrix::diag_real(&[2.0, 1.0])).norm_fro() < 1e-14);
    }

    #[test]
    fn pauli_rotation() {
        let x = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let e = expm(&x.scale(-I * std::f64::consts::FRAC_PI_2));
        let expected = ComplexMatrix::from_fn(2, 2, |i, j| if i != j { -I } else { C64::new(0.0, 0.0) });
        assert!((&e - &expected).norm_fro() < 1e-14);
    }

    #[test]
    fn skew_hermitian_gives_unitary_and_matches_eigen_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = random_hermitian(&mut rng, 6).scale_real(20.0);
        let u = expm(&h.scale(-I));
        let uu = &u.adjoint() * &u;
        assert!((&uu - &ComplexMatrix::identity(6)).norm_fro() <= 1e-10);
        let v = expm_hermitian(&h, -I).unwrap();
        assert!((&u - &v).norm_fro() <= 1e-9);
    }

    #[test]
    fn semigroup_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_matrix(&mut rng, 4, 4);
        let lhs = expm(&a.scale_real(0.7));
        let rhs = &expm(&a.scale_real(0.3)) * &expm(&a.scale_real(0.4));
        assert!((&lhs - &rhs).norm_fro() <= 1e-10 * lhs.norm_fro());
    }
}
