//! Classical Markov generators on ℂⁿ and their relation to quantum generators.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lindblad::{LindbladData, LindbladError};
use crate::matrixcore::{expm, herm_eig, ComplexMatrix, MatrixError, Superoperator, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassicalError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Lindblad(#[from] LindbladError),
    #[error("not a classical generator: {0}")]
    InvalidGenerator(String),
    #[error("projections are not an orthogonal family (residual {residual:.3e})")]
    NotOrthogonal { residual: f64 },
    #[error("generator leaks out of the projection algebra (residual {leak:.3e})")]
    NotPreserved { leak: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Rate matrix m acting on functions f ↦ m f (rows sum to zero).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassicalGenerator {
    pub m: Vec<Vec<f64>>,
}

impl ClassicalGenerator {
    pub fn new(m: Vec<Vec<f64>>) -> Result<Self, ClassicalError> {
        let n = m.len();
        if n == 0 {
            return Err(ClassicalError::InvalidGenerator("empty matrix".into()));
        }
        if let Some(r) = m.iter().find(|r| r.len() != n) {
            return Err(ClassicalError::DimensionMismatch {
                expected: n,
                found: r.len(),
            });
        }
        if m.iter().flatten().any(|x| !x.is_finite()) {
            return Err(ClassicalError::InvalidGenerator("non-finite rate".into()));
        }
        Ok(ClassicalGenerator { m })
    }

    pub fn zero(n: usize) -> Self {
        ClassicalGenerator { m: vec![vec![0.0; n]; n] }
    }

    pub fn n(&self) -> usize {
        self.m.len()
    }

    pub fn max_abs(&self) -> f64 {
        self.m.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()))
    }

    pub fn to_matrix(&self) -> ComplexMatrix {
        let n = self.n();
        ComplexMatrix::from_fn(n, n, |i, j| C64::new(self.m[i][j], 0.0))
    }

    /// e^{tm}
    pub fn transition(&self, t: f64) -> Vec<Vec<f64>> {
        let e = expm(&self.to_matrix().scale_real(t));
        (0..self.n()).map(|i| e.row(i).iter().map(|z| z.re).collect()).collect()
    }

    pub fn max_distance(&self, other: &ClassicalGenerator) -> f64 {
        self.m
            .iter()
            .flatten()
            .zip(other.m.iter().flatten())
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()))
    }
}

pub fn is_classical_generator(g: &ClassicalGenerator) -> bool {
    let scale = 1.0 + g.max_abs();
    g.m.iter().enumerate().all(|(i, row)| {
        let sum: f64 = row.iter().sum();
        sum.abs() <= 1e-10 * scale && row.iter().enumerate().all(|(j, &x)| i == j || x >= -1e-12 * scale)
    })
}

/// p_i m_ij = p_j m_ji for all i, j.
pub fn classical_dbc_check(g: &ClassicalGenerator, p: &[f64]) -> bool {
    classical_dbc_residual(g, p) <= 1e-10 * (1.0 + g.max_abs())
}

pub fn classical_dbc_residual(g: &ClassicalGenerator, p: &[f64]) -> f64 {
    let n = g.n();
    assert_eq!(p.len(), n, "classical_dbc_residual: weight count");
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((p[i] * g.m[i][j] - p[j] * g.m[j][i]).abs());
        }
    }
    worst
}

/// Spectral projections of a hermitian operator, ascending eigenvalue order.
pub fn spectral_projections(k: &ComplexMatrix) -> Result<Vec<ComplexMatrix>, ClassicalError> {
    Ok(herm_eig(k)?.projections().into_iter().map(|p| p.projector).collect())
}

fn check_orthogonal(ps: &[ComplexMatrix], d: usize) -> Result<(), ClassicalError> {
    let mut residual = 0.0f64;
    for (j, p) in ps.iter().enumerate() {
        if p.shape() != (d, d) {
            return Err(ClassicalError::DimensionMismatch {
                expected: d,
                found: p.rows(),
            });
        }
        residual = residual.max(p.hermiticity_deviation());
        for (k, q) in ps.iter().enumerate() {
            let pq = p * q;
            let target = if j == k { p.clone() } else { ComplexMatrix::zeros(d, d) };
            residual = residual.max((&pq - &target).norm_fro());
        }
        if p.trace().re < 0.5 {
            residual = residual.max(1.0);
        }
    }
    if residual > 1e-10 {
        return Err(ClassicalError::NotOrthogonal { residual });
    }
    Ok(())
}

/// m_jk = Tr(P_j M(P_k)) / Tr P_j, after checking that M maps span{P_j} into itself.
pub fn restrict_to_diagonal(m: &Superoperator, ps: &[ComplexMatrix]) -> Result<ClassicalGenerator, ClassicalError> {
    let d = m.dim;
    check_orthogonal(ps, d)?;
    let n = ps.len();
    let traces: Vec<f64> = ps.iter().map(|p| p.trace().re).collect();
    let mut rates = vec![vec![0.0; n]; n];
    let mut leak = 0.0f64;
    for k in 0..n {
        let img = m.apply(&ps[k]);
        let mut proj = ComplexMatrix::zeros(d, d);
        for j in 0..n {
            let c = (&ps[j] * &img).trace() / traces[j];
            rates[j][k] = c.re;
            proj += &ps[j].scale(c);
        }
        leak = leak.max((&img - &proj).norm_fro());
    }
    if leak > 1e-9 * (1.0 + m.norm_fro()) {
        return Err(ClassicalError::NotPreserved { leak });
    }
    Ok(ClassicalGenerator { m: rates })
}

/// Lindblad data with Θ = V diag(θ) V*, jumps √m_ij E_ji (i ≠ j) in the basis given by the columns of V.
pub fn lift_classical(
    g: &ClassicalGenerator,
    theta: &[f64],
    basis: Option<&ComplexMatrix>,
) -> Result<LindbladData, ClassicalError> {
    if !is_classical_generator(g) {
        return Err(ClassicalError::InvalidGenerator(
            "negative off-diagonal rate or nonzero row sum".into(),
        ));
    }
    let n = g.n();
    if theta.len() != n {
        return Err(ClassicalError::DimensionMismatch {
            expected: n,
            found: theta.len(),
        });
    }
    let id = ComplexMatrix::identity(n);
    let v = basis.unwrap_or(&id);
    if v.shape() != (n, n) {
        return Err(ClassicalError::DimensionMismatch {
            expected: n,
            found: v.rows(),
        });
    }
    let conj = |x: &ComplexMatrix| &(v * x) * &v.adjoint();
    let mut nu = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && g.m[i][j] > 0.0 {
                nu.push(conj(&ComplexMatrix::unit(n, j, i).scale_real(g.m[i][j].sqrt())));
            }
        }
    }
    Ok(LindbladData::markov(conj(&ComplexMatrix::diag_real(theta)), nu)?)
}
