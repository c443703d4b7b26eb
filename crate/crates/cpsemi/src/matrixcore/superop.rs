use super::{kron, mismatch, ComplexMatrix, MatrixError, C64, I};

/// A linear map on d×d matrices as a d²×d² matrix acting on row-major vectorizations.
#[derive(Clone, Debug, PartialEq)]
pub struct Superoperator {
    pub dim: usize,
    pub matrix: ComplexMatrix,
}

/// Row-major vectorization; `vec(XAY) = (X ⊗ Yᵀ) vec(A)`.
pub fn vectorize(a: &ComplexMatrix) -> Vec<C64> {
    a.as_slice().to_vec()
}

pub fn devectorize(d: usize, v: &[C64]) -> Result<ComplexMatrix, MatrixError> {
    if v.len() != d * d {
        return Err(mismatch("devectorize", d * d, v.len()));
    }
    ComplexMatrix::from_row_major(d, d, v.to_vec())
}

/// Superoperator of a linear map, read off from its action on the matrix units E_ij.
pub fn superop_of_map(d: usize, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> Superoperator {
    let n = d * d;
    let mut m = ComplexMatrix::zeros(n, n);
    for i in 0..d {
        for j in 0..d {
            let img = f(&ComplexMatrix::unit(d, i, j));
            assert_eq!(img.shape(), (d, d), "superop_of_map: image has wrong shape");
            let col = i * d + j;
            for (r, z) in img.as_slice().iter().enumerate() {
                m[(r, col)] = *z;
            }
        }
    }
    Superoperator { dim: d, matrix: m }
}

impl Superoperator {
    pub fn new(dim: usize, matrix: ComplexMatrix) -> Result<Self, MatrixError> {
        if matrix.shape() != (dim * dim, dim * dim) {
            return Err(mismatch(
                "Superoperator::new",
                format!("{0}x{0}", dim * dim),
                format!("{}x{}", matrix.rows(), matrix.cols()),
            ));
        }
        Ok(Superoperator { dim, matrix })
    }

    pub fn zero(dim: usize) -> Self {
        Superoperator {
            dim,
            matrix: ComplexMatrix::zeros(dim * dim, dim * dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Superoperator {
            dim,
            matrix: ComplexMatrix::identity(dim * dim),
        }
    }

    /// A ↦ X A Y
    pub fn sandwich(x: &ComplexMatrix, y: &ComplexMatrix) -> Self {
        Superoperator {
            dim: x.rows(),
            matrix: kron(x, &y.transpose()),
        }
    }

    /// A ↦ X A
    pub fn left(x: &ComplexMatrix) -> Self {
        Self::sandwich(x, &ComplexMatrix::identity(x.rows()))
    }

    /// A ↦ A Y
    pub fn right(y: &ComplexMatrix) -> Self {
        Self::sandwich(&ComplexMatrix::identity(y.rows()), y)
    }

    /// A ↦ i[H, A]
    pub fn hamiltonian(h: &ComplexMatrix) -> Self {
        let m = &Self::left(h).matrix - &Self::right(h).matrix;
        Superoperator {
            dim: h.rows(),
            matrix: m.scale(I),
        }
    }

    pub fn apply(&self, a: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(a.shape(), (self.dim, self.dim), "Superoperator::apply: wrong shape");
        let v = self.matrix.apply_vec(a.as_slice());
        ComplexMatrix::from_row_major(self.dim, self.dim, v).expect("shape checked")
    }

    pub fn try_apply(&self, a: &ComplexMatrix) -> Result<ComplexMatrix, MatrixError> {
        if a.shape() != (self.dim, self.dim) {
            return Err(mismatch(
                "Superoperator::apply",
                format!("{0}x{0}", self.dim),
                format!("{}x{}", a.rows(), a.cols()),
            ));
        }
        Ok(self.apply(a))
    }

    /// self ∘ other
    pub fn compose(&self, other: &Superoperator) -> Superoperator {
        Superoperator {
            dim: self.dim,
            matrix: &self.matrix * &other.matrix,
        }
    }

    /// Adjoint under the Hilbert–Schmidt pairing Tr(B* M(A)).
    pub fn adjoint(&self) -> Superoperator {
        Superoperator {
            dim: self.dim,
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn add(&self, other: &Superoperator) -> Superoperator {
        Superoperator {
            dim: self.dim,
            matrix: &self.matrix + &other.matrix,
        }
    }

    pub fn sub(&self, other: &Superoperator) -> Superoperator {
        Superoperator {
            dim: self.dim,
            matrix: &self.matrix - &other.matrix,
        }
    }

    pub fn scale(&self, s: C64) -> Superoperator {
        Superoperator {
            dim: self.dim,
            matrix: self.matrix.scale(s),
        }
    }

    pub fn norm_fro(&self) -> f64 {
        self.matrix.norm_fro()
    }

    pub fn distance(&self, other: &Superoperator) -> f64 {
        (&self.matrix - &other.matrix).norm_fro()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::random_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_map_gives_identity_matrix() {
        let s = superop_of_map(3, |a| a.clone());
        assert_eq!(s.matrix, ComplexMatrix::identity(9));
    }

    #[test]
    fn left_multiplication_matches_direct_application() {
        let x = ComplexMatrix::diag_real(&[1.0, 2.0]);
        let s = superop_of_map(2, |a| &x * a);
        assert_eq!(s, Superoperator::left(&x));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_matrix(&mut rng, 2, 2);
        assert!((&s.apply(&a) - &(&x * &a)).norm_fro() <= 1e-12);
    }

    #[test]
    fn sandwich_convention() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (x, y, a) = (
            random_matrix(&mut rng, 3, 3),
            random_matrix(&mut rng, 3, 3),
            random_matrix(&mut rng, 3, 3),
        );
        let direct = &(&x * &a) * &y;
        assert!((&Superoperator::sandwich(&x, &y).apply(&a) - &direct).norm_fro() <= 1e-12);
    }

    #[test]
    fn vectorize_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_matrix(&mut rng, 3, 3);
        assert_eq!(devectorize(3, &vectorize(&a)).unwrap(), a);
        assert!(devectorize(2, &vectorize(&a)).is_err());
    }

    #[test]
    fn adjoint_is_hilbert_schmidt_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let s = Superoperator::new(2, random_matrix(&mut rng, 4, 4)).unwrap();
        let a = random_matrix(&mut rng, 2, 2);
        let b = random_matrix(&mut rng, 2, 2);
        let lhs = (&b.adjoint() * &s.apply(&a)).trace();
        let rhs = (&s.adjoint().apply(&b).adjoint() * &a).trace();
        assert!((lhs - rhs).norm() <= 1e-12);
    }
}
