use super::{ComplexMatrix, MatrixError, C64, ZERO};

/// Eigendecomposition of a hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct HermEig {
    pub values: Vec<f64>,
    /// Unitary matrix whose columns are the eigenvectors.
    pub vectors: ComplexMatrix,
}

/// One spectral projection 1_k(A) with its (cluster-mean) eigenvalue.
#[derive(Clone, Debug)]
pub struct SpectralProjection {
    pub value: f64,
    pub projector: ComplexMatrix,
    /// Orthonormal columns spanning the eigenspace.
    pub basis: ComplexMatrix,
}

/// Hermitian eigendecomposition. The input is symmetrized before the solve.
pub fn herm_eig(a: &ComplexMatrix) -> Result<HermEig, MatrixError> {
    if !a.is_square() {
        return Err(MatrixError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let deviation = a.hermiticity_deviation();
    if deviation > 1e-10 * (1.0 + a.max_abs()) {
        return Err(MatrixError::NotHermitian { deviation });
    }
    let n = a.rows();
    if n == 0 {
        return Ok(HermEig {
            values: vec![],
            vectors: ComplexMatrix::zeros(0, 0),
        });
    }
    let h = a.hermitian_part();
    let eig = h
        .to_faer()
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|_| MatrixError::EigenFailure)?;
    let s = eig.S();
    let u = eig.U();
    let mut order: Vec<usize> = (0..n).collect();
    let raw: Vec<f64> = (0..n).map(|i| s[i].re).collect();
    order.sort_by(|&i, &j| raw[i].total_cmp(&raw[j]));
    let values = order.iter().map(|&i| raw[i]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| u[(i, order[j])]);
    Ok(HermEig { values, vectors })
}

impl HermEig {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// V f(Λ) V*
    pub fn apply_fn(&self, f: impl Fn(f64) -> C64) -> ComplexMatrix {
        let n = self.dim();
        let fv: Vec<C64> = self.values.iter().map(|&x| f(x)).collect();
        let scaled = ComplexMatrix::from_fn(n, n, |i, j| self.vectors[(i, j)] * fv[j]);
        &scaled * &self.vectors.adjoint()
    }

    /// Rows `rows` and columns `cols` of V f(Λ) V*, without forming the full matrix.
    pub fn apply_fn_block(&self, f: impl Fn(f64) -> C64, rows: &[usize], cols: &[usize]) -> ComplexMatrix {
        let n = self.dim();
        let fv: Vec<C64> = self.values.iter().map(|&x| f(x)).collect();
        let left = ComplexMatrix::from_fn(rows.len(), n, |i, m| self.vectors[(rows[i], m)] * fv[m]);
        let right = ComplexMatrix::from_fn(n, cols.len(), |m, j| self.vectors[(cols[j], m)].conj());
        &left * &right
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.apply_fn(|x| C64::new(x, 0.0))
    }

    pub fn max_abs_value(&self) -> f64 {
        self.values.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    /// Groups eigenvalues into clusters; consecutive values closer than `tol` merge.
    pub fn clusters(&self, tol: f64) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = Vec::new();
        for (i, &v) in self.values.iter().enumerate() {
            match out.last_mut() {
                Some(c) if (v - self.values[*c.last().unwrap()]).abs() <= tol => c.push(i),
                _ => out.push(vec![i]),
            }
        }
        out
    }

    /// Spectral projections with the default clustering tolerance 1e-8·(1+‖A‖).
    pub fn projections(&self) -> Vec<SpectralProjection> {
        self.projections_with_tol(1e-8 * (1.0 + self.max_abs_value()))
    }

    pub fn projections_with_tol(&self, tol: f64) -> Vec<SpectralProjection> {
        let n = self.dim();
        self.clusters(tol)
            .into_iter()
            .map(|idx| {
                let value = idx.iter().map(|&i| self.values[i]).sum::<f64>() / idx.len() as f64;
                let basis = ComplexMatrix::from_fn(n, idx.len(), |i, j| self.vectors[(i, idx[j])]);
                let projector = &basis * &basis.adjoint();
                SpectralProjection {
                    value,
                    projector,
                    basis,
                }
            })
            .collect()
    }
}

impl ComplexMatrix {
    /// Square root of a positive semidefinite matrix; negative eigenvalues are clipped to 0.
    pub fn psd_sqrt(&self) -> Result<ComplexMatrix, MatrixError> {
        let e = herm_eig(self)?;
        Ok(e.apply_fn(|x| C64::new(x.max(0.0).sqrt(), 0.0)))
    }

    /// Smallest eigenvalue of a hermitian matrix.
    pub fn min_eigenvalue(&self) -> Result<f64, MatrixError> {
        let e = herm_eig(self)?;
        Ok(e.values.first().copied().unwrap_or(0.0))
    }

    /// Spectral norm of a hermitian matrix.
    pub fn hermitian_norm(&self) -> Result<f64, MatrixError> {
        Ok(herm_eig(self)?.max_abs_value())
    }

    /// Spectral norm of an arbitrary matrix, via the eigenvalues of A*A.
    pub fn norm_two(&self) -> f64 {
        if self.rows() == 0 || self.cols() == 0 {
            return 0.0;
        }
        let g = &self.adjoint() * self;
        herm_eig(&g)
            .map(|e| e.max_abs_value().sqrt())
            .unwrap_or(f64::NAN)
    }

    pub fn is_zero(&self) -> bool {
        self.as_slice().iter().all(|&z| z == ZERO)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::random_hermitian;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diagonal_eigenvalues_ascend() {
        let e = herm_eig(&ComplexMatrix::diag_real(&[3.0, 1.0])).unwrap();
        assert_eq!(e.values, vec![1.0, 3.0]);
    }

    #[test]
    fn pauli_x_spectrum() {
        let x = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let e = herm_eig(&x).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14 && (e.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_reconstruction_and_unitarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_hermitian(&mut rng, 5);
        let e = herm_eig(&a).unwrap();
        assert!((&e.reconstruct() - &a).norm_fro() <= 1e-10 * a.norm_fro());
        let vv = &e.vectors.adjoint() * &e.vectors;
        assert!((&vv - &ComplexMatrix::identity(5)).norm_fro() <= 1e-10);
    }

    #[test]
    fn shift_moves_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_hermitian(&mut rng, 4);
        let c = 2.5;
        let shifted = &a + &ComplexMatrix::identity(4).scale_real(c);
        let e0 = herm_eig(&a).unwrap();
        let e1 = herm_eig(&shifted).unwrap();
        for (x, y) in e0.values.iter().zip(&e1.values) {
            assert!((y - x - c).abs() <= 1e-10);
        }
    }

    #[test]
    fn non_hermitian_is_rejected() {
        let a = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(herm_eig(&a), Err(MatrixError::NotHermitian { .. })));
    }

    #[test]
    fn degenerate_projections_group() {
        let k = ComplexMatrix::diag_real(&[0.0, 1.0, 1.0 + 1e-12, 2.0]);
        let ps = herm_eig(&k).unwrap().projections();
        assert_eq!(ps.len(), 3);
        assert!((ps[1].projector.trace().re - 2.0).abs() < 1e-12);
    }
}
