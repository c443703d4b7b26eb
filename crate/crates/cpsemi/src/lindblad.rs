//! Lindblad generators M(A) = i[Θ,A] − [Δ,A]₊ + Σ ν_j* A ν_j.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cpmap::{choi, stinespring_from_choi_tol, CpError, CpMapData, RANK_TOL};
use crate::matrixcore::{expm, mismatch, ComplexMatrix, MatrixError, Superoperator, C64, I};
use crate::random::haar_unitary;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LindbladError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("{0} is not hermitian (deviation {1:.3e})")]
    NotHermitian(&'static str, f64),
    #[error("not the generator of a c.p. semigroup (jump-part Choi min eigenvalue {min_eigenvalue:.3e})")]
    NotCpGenerator { min_eigenvalue: f64 },
    #[error(transparent)]
    Cp(#[from] CpError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LindbladData {
    pub theta: ComplexMatrix,
    pub delta: ComplexMatrix,
    pub nu: Vec<ComplexMatrix>,
}

impl LindbladData {
    pub fn new(theta: ComplexMatrix, delta: ComplexMatrix, nu: Vec<ComplexMatrix>) -> Result<Self, LindbladError> {
        let data = LindbladData { theta, delta, nu };
        data.validate()?;
        Ok(data)
    }

    pub fn zero(d: usize) -> Self {
        LindbladData {
            theta: ComplexMatrix::zeros(d, d),
            delta: ComplexMatrix::zeros(d, d),
            nu: vec![],
        }
    }

    /// Markov data with Δ = ½ Σ ν_j* ν_j.
    pub fn markov(theta: ComplexMatrix, nu: Vec<ComplexMatrix>) -> Result<Self, LindbladError> {
        let d = theta.rows();
        let blocks = CpMapData::new(d, d, nu.clone())?;
        let delta = blocks.nu_star_nu().scale_real(0.5);
        Self::new(theta, delta, nu)
    }

    /// Data of M(A) = −i(ΥA − AΥ*) + Σ ν_j* A ν_j.
    pub fn from_level_shift(upsilon: &ComplexMatrix, nu: Vec<ComplexMatrix>) -> Result<Self, LindbladError> {
        let theta = (upsilon + &upsilon.adjoint()).scale_real(-0.5);
        let delta = (upsilon - &upsilon.adjoint()).scale(C64::new(0.0, 0.5));
        Self::new(theta, delta.hermitian_part(), nu)
    }

    pub fn dim(&self) -> usize {
        self.theta.rows()
    }

    pub fn blocks(&self) -> CpMapData {
        CpMapData {
            d_in: self.dim(),
            d_out: self.dim(),
            kraus: self.nu.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), LindbladError> {
        let d = self.theta.rows();
        for (name, m) in [("theta", &self.theta), ("delta", &self.delta)] {
            if m.shape() != (d, d) {
                return Err(mismatch("LindbladData", format!("{d}x{d}"), format!("{}x{}", m.rows(), m.cols())).into());
            }
            let dev = m.hermiticity_deviation();
            if dev > 1e-12 * (1.0 + m.max_abs()) {
                return Err(LindbladError::NotHermitian(name, dev));
            }
        }
        CpMapData::new(d, d, self.nu.clone())?;
        Ok(())
    }

    /// ‖2Δ − Σ ν_j* ν_j‖
    pub fn markov_residual(&self) -> f64 {
        (&self.delta.scale_real(2.0) - &self.blocks().nu_star_nu()).norm_fro()
    }

    /// (|Tr Θ|, max_j |Tr ν_j|)
    pub fn trace_residuals(&self) -> (f64, f64) {
        let t = self.theta.trace().norm();
        let n = self.nu.iter().map(|b| b.trace().norm()).fold(0.0, f64::max);
        (t, n)
    }

    /// G = iΘ − Δ, so that M(A) = GA + AG* + Σ ν*Aν.
    pub fn g(&self) -> ComplexMatrix {
        &self.theta.scale(I) - &self.delta
    }
}

pub fn build_generator(data: &LindbladData) -> Result<Superoperator, LindbladError> {
    data.validate()?;
    let m = Superoperator::hamiltonian(&data.theta)
        .sub(&Superoperator::left(&data.delta))
        .sub(&Superoperator::right(&data.delta));
    Ok(m.add(&data.blocks().to_superoperator()?))
}

/// e^{tM}(A)
pub fn evolve(m: &Superoperator, t: f64, a: &ComplexMatrix) -> ComplexMatrix {
    propagator(m, t).apply(a)
}

/// Predual (Schrödinger picture) evolution e^{tM_*}(ρ).
pub fn evolve_predual(m: &Superoperator, t: f64, rho: &ComplexMatrix) -> ComplexMatrix {
    propagator(&m.adjoint(), t).apply(rho)
}

pub fn propagator(m: &Superoperator, t: f64) -> Superoperator {
    Superoperator {
        dim: m.dim,
        matrix: expm(&m.matrix.scale_real(t)),
    }
}

pub fn is_markov(data: &LindbladData) -> bool {
    data.markov_residual() <= 1e-10 * (1.0 + data.delta.norm_fro())
}

/// Closed form of ∫ M(U*) U dU with the normalized Haar measure.
pub fn haar_average_check(m: &Superoperator) -> ComplexMatrix {
    let d = m.dim;
    ComplexMatrix::from_fn(d, d, |p, q2| {
        let s: C64 = (0..d).map(|q| m.matrix[(p * d + q, q2 * d + q)]).sum();
        s / d as f64
    })
}

#[derive(Clone, Debug)]
pub struct MonteCarloTwirl {
    pub mean: ComplexMatrix,
    /// Entrywise standard error (real and imaginary parts separately).
    pub std_error: ComplexMatrix,
    pub samples: usize,
}

/// Monte-Carlo estimate of ∫ M(U*) U dU over Haar unitaries.
pub fn haar_average_monte_carlo<R: Rng + ?Sized>(m: &Superoperator, samples: usize, rng: &mut R) -> MonteCarloTwirl {
    let d = m.dim;
    let mut sum = ComplexMatrix::zeros(d, d);
    let mut sq = ComplexMatrix::zeros(d, d);
    for _ in 0..samples {
        let u = haar_unitary(rng, d);
        let x = &m.apply(&u.adjoint()) * &u;
        sum += &x;
        sq += &x.map(|z| C64::new(z.re * z.re, z.im * z.im));
    }
    let n = samples as f64;
    let mean = sum.scale_real(1.0 / n);
    let std_error = ComplexMatrix::from_fn(d, d, |i, j| {
        let mu = mean[(i, j)];
        let s2 = sq[(i, j)] / n;
        let vr = (s2.re - mu.re * mu.re).max(0.0) * n / (n - 1.0);
        let vi = (s2.im - mu.im * mu.im).max(0.0) * n / (n - 1.0);
        C64::new((vr / n).sqrt(), (vi / n).sqrt())
    });
    MonteCarloTwirl {
        mean,
        std_error,
        samples,
    }
}

fn traceless(a: &ComplexMatrix) -> ComplexMatrix {
    let d = a.rows();
    a - &ComplexMatrix::identity(d).scale(a.trace() / d as f64)
}

/// Splits G into Θ (traceless hermitian) and Δ with G = iΘ − Δ.
fn split_g(g: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
    let theta = (g - &g.adjoint()).scale(C64::new(0.0, -0.5));
    let delta = (g + &g.adjoint()).scale_real(-0.5);
    (traceless(&theta.hermitian_part()), delta.hermitian_part())
}

/// The presentation ν_j → ν_j + w_j·1 with G adjusted so the generator is unchanged.
pub fn shift_presentation(data: &LindbladData, w: &[C64]) -> Result<LindbladData, LindbladError> {
    if w.len() != data.nu.len() {
        return Err(mismatch("shift_presentation", data.nu.len(), w.len()).into());
    }
    let d = data.dim();
    let id = ComplexMatrix::identity(d);
    let mut c = ComplexMatrix::zeros(d, d);
    let mut w2 = 0.0;
    let mut nu = Vec::with_capacity(w.len());
    for (b, &wj) in data.nu.iter().zip(w) {
        c += &b.scale(wj.conj());
        w2 += wj.norm_sqr();
        nu.push(b + &id.scale(wj));
    }
    let g = &(&data.g() - &c.adjoint()) - &id.scale_real(0.5 * w2);
    let (theta, delta) = split_g(&g);
    LindbladData::new(theta, delta, nu)
}

/// Canonical Lindblad data: Tr Θ = 0, Tr ν_j = 0, linearly independent ν_j.
pub fn canonical_form(m: &Superoperator) -> Result<LindbladData, LindbladError> {
    let d = m.dim;
    let x = haar_average_check(m);
    let (theta0, delta0) = split_g(&x);
    let delta0 = &delta0 - &ComplexMatrix::identity(d).scale_real(delta0.trace().re / (2.0 * d as f64));
    let g = &theta0.scale(I) - &delta0;
    let phi = m.sub(&Superoperator::left(&g)).sub(&Superoperator::right(&g.adjoint()));
    let c = choi(&phi);
    let blocks = match stinespring_from_choi_tol(&c, 1e-8, RANK_TOL, m.norm_fro()) {
        Ok(b) => b,
        Err(CpError::NotCompletelyPositive { min_eigenvalue }) => {
            return Err(LindbladError::NotCpGenerator { min_eigenvalue })
        }
        Err(e) => return Err(e.into()),
    };
    let g_data = {
        let (th, de) = split_g(&g);
        LindbladData {
            theta: th,
            delta: de,
            nu: blocks.kraus,
        }
    };
    let w: Vec<C64> = g_data.nu.iter().map(|b| -b.trace() / d as f64).collect();
    let shifted = shift_presentation(&g_data, &w)?;
    // the shift can make blocks dependent (e.g. a multiple of 1 becomes 0)
    let nu = CpMapData::new(d, d, shifted.nu.clone())?.minimize()?.kraus;
    let nu = nu.iter().map(|b| traceless(b)).collect();
    Ok(LindbladData {
        theta: shifted.theta,
        delta: shifted.delta,
        nu,
    })
}

/// M = i[Θ,·] + M_d with Θ from the canonical form.
pub fn split_hamiltonian_dissipative(m: &Superoperator) -> Result<(ComplexMatrix, Superoperator), LindbladError> {
    let c = canonical_form(m)?;
    let md = m.sub(&Superoperator::hamiltonian(&c.theta));
    Ok((c.theta, md))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_blocks, random_hermitian};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn e(i: usize, j: usize) -> ComplexMatrix {
        ComplexMatrix::unit(2, i, j)
    }

    fn sigma_z() -> ComplexMatrix {
        ComplexMatrix::diag_real(&[1.0, -1.0])
    }

    fn decay() -> LindbladData {
        LindbladData::new(ComplexMatrix::zeros(2, 2), e(1, 1).scale_real(0.5), vec![e(0, 1)]).unwrap()
    }

    #[test]
    fn empty_data_gives_zero() {
        let m = build_generator(&LindbladData::zero(3)).unwrap();
        assert!(m.matrix.is_zero());
    }

    #[test]
    fn decay_generator_action() {
        let m = build_generator(&decay()).unwrap();
        assert!((&m.apply(&e(1, 1)) + &e(1, 1)).norm_fro() < 1e-14);
        assert!((&m.apply(&e(0, 0)) - &e(1, 1)).norm_fro() < 1e-14);
        assert!(m.apply(&ComplexMatrix::identity(2)).norm_fro() < 1e-14);
        assert!(is_markov(&decay()));
    }

    #[test]
    fn decay_evolution_closed_form() {
        let m = build_generator(&decay()).unwrap();
        for t in [0.0, 0.3, 2.0] {
            let out = evolve(&m, t, &e(1, 1));
            assert!((&out - &e(1, 1).scale_real((-t).exp())).norm_fro() < 1e-12);
        }
    }

    #[test]
    fn hamiltonian_generator_is_conjugation() {
        let m = build_generator(&LindbladData::new(sigma_z(), ComplexMatrix::zeros(2, 2), vec![]).unwrap()).unwrap();
        let a = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let u = expm(&sigma_z().scale(I));
        let expected = &(&u * &a) * &u.adjoint();
        assert!((&evolve(&m, 1.0, &a) - &expected).norm_fro() < 1e-12);
    }

    #[test]
    fn non_hermitian_theta_rejected() {
        assert!(LindbladData::new(e(0, 1), ComplexMatrix::zeros(2, 2), vec![]).is_err());
    }

    #[test]
    fn markov_flag() {
        let mut d = decay();
        d.delta = ComplexMatrix::zeros(2, 2);
        assert!(!is_markov(&d));
    }

    #[test]
    fn canonical_of_hamiltonian() {
        let m = Superoperator::hamiltonian(&sigma_z());
        let c = canonical_form(&m).unwrap();
        assert!((&c.theta - &sigma_z()).norm_fro() < 1e-12);
        assert!(c.delta.norm_fro() < 1e-12 && c.nu.is_empty());
        let c = canonical_form(&Superoperator::hamiltonian(&ComplexMatrix::identity(2))).unwrap();
        assert!(c.theta.norm_fro() < 1e-12);
    }

    #[test]
    fn canonical_removes_block_traces() {
        let b = &e(0, 1) + &ComplexMatrix::identity(2).scale_real(0.3);
        let data = LindbladData::markov(ComplexMatrix::zeros(2, 2), vec![b]).unwrap();
        let m = build_generator(&data).unwrap();
        let c = canonical_form(&m).unwrap();
        let (tt, tn) = c.trace_residuals();
        assert!(tt < 1e-10 && tn < 1e-10);
        assert!(build_generator(&c).unwrap().distance(&m) < 1e-9);
        assert!(is_markov(&c));
    }

    #[test]
    fn canonical_rejects_non_cp() {
        let m = Superoperator::sandwich(&e(0, 1), &e(1, 0)).scale(C64::new(-1.0, 0.0));
        assert!(matches!(canonical_form(&m), Err(LindbladError::NotCpGenerator { .. })));
    }

    #[test]
    fn shift_freedom() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let data = LindbladData::markov(random_hermitian(&mut rng, 3), random_blocks(&mut rng, 2, 3, 3)).unwrap();
        let w = [C64::new(0.4, -0.2), C64::new(-1.0, 0.5)];
        let shifted = shift_presentation(&data, &w).unwrap();
        let a = build_generator(&data).unwrap();
        let b = build_generator(&shifted).unwrap();
        assert!(a.distance(&b) < 1e-10);
    }

    #[test]
    fn split_of_mixed_generator() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let data = LindbladData::markov(random_hermitian(&mut rng, 2), random_blocks(&mut rng, 1, 2, 2)).unwrap();
        let m = build_generator(&data).unwrap();
        let (theta, md) = split_hamiltonian_dissipative(&m).unwrap();
        assert!(theta.trace().norm() < 1e-12);
        assert!(Superoperator::hamiltonian(&theta).add(&md).distance(&m) < 1e-9);
        let (theta2, _) = split_hamiltonian_dissipative(&md).unwrap();
        assert!(theta2.norm_fro() < 1e-9);
        let (theta3, _) = split_hamiltonian_dissipative(&build_generator(&decay()).unwrap()).unwrap();
        assert!(theta3.norm_fro() < 1e-12);
    }

    #[test]
    fn twirl_of_left_multiplication() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let x = crate::random::random_matrix(&mut rng, 2, 2);
        let tw = haar_average_check(&Superoperator::left(&x));
        assert!((&tw - &x).norm_fro() < 1e-12);
        assert!(haar_average_check(&Superoperator::zero(3)).is_zero());
    }

    #[test]
    fn trace_preserved_by_predual() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let data = LindbladData::markov(random_hermitian(&mut rng, 3), random_blocks(&mut rng, 2, 3, 3)).unwrap();
        let m = build_generator(&data).unwrap();
        let rho = crate::random::random_density(&mut rng, 3);
        for t in [0.1, 1.0, 10.0] {
            let out = evolve_predual(&m, t, &rho);
            assert!((out.trace() - C64::new(1.0, 0.0)).norm() < 1e-10);
            assert!(out.hermitian_part().min_eigenvalue().unwrap() > -1e-9);
        }
    }
}
