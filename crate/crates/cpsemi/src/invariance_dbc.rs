//! K-invariance, the jump-energy operator Y, detailed balance and the antiunitary ε.

use serde::Serialize;
use thiserror::Error;

use crate::cpmap::{dilation_equivalence, CpError, CpMapData, RANK_TOL};
use crate::lindblad::{split_hamiltonian_dissipative, LindbladError};
use crate::matrixcore::{
    expm_hermitian, herm_eig, ComplexMatrix, HermEig, MatrixError, Superoperator, C64,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DbcError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Cp(#[from] CpError),
    #[error(transparent)]
    Lindblad(#[from] LindbladError),
    #[error("no hermitian Y solves the covariance relation (residual {residual:.3e})")]
    NoSolution { residual: f64 },
    #[error("noise blocks are not linearly independent (ratio {ratio:.3e})")]
    NotMinimal { ratio: f64 },
    #[error("state is degenerate (min eigenvalue {min_eigenvalue:.3e})")]
    DegenerateState { min_eigenvalue: f64 },
    #[error("quadratic balance violated (residual {residual:.3e})")]
    BalanceViolated { residual: f64 },
}

#[derive(Clone, Debug)]
pub struct SmallSystem {
    pub k: ComplexMatrix,
    pub eig: HermEig,
    /// (eigenvalue, spectral projection), ascending.
    pub projections: Vec<(f64, ComplexMatrix)>,
}

impl SmallSystem {
    pub fn new(k: ComplexMatrix) -> Result<Self, MatrixError> {
        let eig = herm_eig(&k)?;
        let projections = eig.projections().into_iter().map(|p| (p.value, p.projector)).collect();
        Ok(SmallSystem { k, eig, projections })
    }

    pub fn dim(&self) -> usize {
        self.k.rows()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.projections.iter().map(|(v, _)| *v).collect()
    }

    /// e^{−βK}/Tr e^{−βK}
    pub fn gibbs(&self, beta: f64) -> ThermalState {
        let shift = self.eig.values.first().copied().unwrap_or(0.0);
        let w = self.eig.apply_fn(|x| C64::new((-beta * (x - shift)).exp(), 0.0));
        let z = w.trace();
        ThermalState {
            beta,
            rho: w.scale(z.inv()).hermitian_part(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ThermalState {
    pub beta: f64,
    pub rho: ComplexMatrix,
}

impl ThermalState {
    pub fn from_rho(beta: f64, rho: ComplexMatrix) -> Self {
        ThermalState { beta, rho }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct JumpEnergy {
    pub y: ComplexMatrix,
    pub residual: f64,
}

/// ε w = U_eps · conj(w) in the stored basis of 𝔥.
#[derive(Clone, Debug, Serialize)]
pub struct AntiunitaryMap {
    pub u_eps: ComplexMatrix,
    /// Residual of the linear-balance identity.
    pub balance_residual: f64,
    /// ‖U Ū − 1‖
    pub involution_residual: f64,
    /// ‖U Ȳ Ū + Y‖
    pub flip_residual: f64,
    pub unitarity_residual: f64,
    /// Gram min/max eigenvalue ratio of the blocks.
    pub conditioning: f64,
}

impl AntiunitaryMap {
    pub fn apply(&self, w: &[C64]) -> Vec<C64> {
        let c: Vec<C64> = w.iter().map(|z| z.conj()).collect();
        self.u_eps.apply_vec(&c)
    }
}

pub fn is_k_invariant(m: &Superoperator, sys: &SmallSystem) -> bool {
    k_invariance_residual(m, sys) <= 1e-9 * (1.0 + m.norm_fro())
}

/// ‖M∘D − D∘M‖ with D = i[K,·].
pub fn k_invariance_residual(m: &Superoperator, sys: &SmallSystem) -> f64 {
    let d = Superoperator::hamiltonian(&sys.k);
    m.compose(&d).distance(&d.compose(m))
}

/// ‖ν_i K − K ν_i − Σ_j Y_ij ν_j‖ summed over blocks.
pub fn covariance_residual(nu: &CpMapData, k: &ComplexMatrix, y: &ComplexMatrix) -> f64 {
    let mut r2 = 0.0;
    for i in 0..nu.noise_dim() {
        let mut c = &(&nu.kraus[i] * k) - &(k * &nu.kraus[i]);
        for j in 0..nu.noise_dim() {
            c -= &nu.kraus[j].scale(y[(i, j)]);
        }
        r2 += c.norm_fro().powi(2);
    }
    r2.sqrt()
}

/// Least-squares hermitian Y with νK = (K⊗1 + 1⊗Y)ν.
pub fn find_jump_energy(nu: &CpMapData, sys: &SmallSystem) -> Result<JumpEnergy, DbcError> {
    let n = nu.noise_dim();
    if n == 0 {
        return Ok(JumpEnergy {
            y: ComplexMatrix::zeros(0, 0),
            residual: 0.0,
        });
    }
    let ratio = nu.independence_ratio();
    if ratio <= RANK_TOL {
        return Err(DbcError::NotMinimal { ratio });
    }
    let m = nu.d_in * nu.d_out;
    let nvec = ComplexMatrix::from_fn(n, m, |i, r| nu.kraus[i].as_slice()[r]);
    let cvec = ComplexMatrix::from_fn(n, m, |i, r| {
        let c = &(&nu.kraus[i] * &sys.k) - &(&sys.k * &nu.kraus[i]);
        c.as_slice()[r]
    });
    let gram = &nvec * &nvec.adjoint();
    let cross = &cvec * &nvec.adjoint();
    let y = gram.solve(&cross.adjoint())?.adjoint().hermitian_part();
    let residual = covariance_residual(nu, &sys.k, &y);
    let scale = 1.0 + nu.gram().norm_fro().sqrt() * sys.k.norm_fro();
    if residual > 1e-6 * scale {
        return Err(DbcError::NoSolution { residual });
    }
    Ok(JumpEnergy { y, residual })
}

/// G[(i,j),(k,l)] = s[i,k]·s[l,j] with s = ρ^{1/2}: (A|B)_ρ = Tr ρ^{1/2}A*ρ^{1/2}B.
pub fn gram_standard(rho: &ComplexMatrix) -> Result<ComplexMatrix, MatrixError> {
    let s = rho.psd_sqrt()?;
    let d = rho.rows();
    Ok(ComplexMatrix::from_fn(d * d, d * d, |r, c| {
        let (i, j) = (r / d, r % d);
        let (k, l) = (c / d, c % d);
        s[(i, k)] * s[(l, j)]
    }))
}

/// G[(i,j),(k,l)] = δ_ik ρ[l,j]: (A|B) = Tr ρA*B.
pub fn gram_alt(rho: &ComplexMatrix) -> ComplexMatrix {
    let d = rho.rows();
    ComplexMatrix::from_fn(d * d, d * d, |r, c| {
        let (i, j) = (r / d, r % d);
        let (k, l) = (c / d, c % d);
        if i == k {
            rho[(l, j)]
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DbcReport {
    pub passed: bool,
    /// ‖G M_d − M_d† G‖
    pub dissipative_residual: f64,
    /// ‖G H + H† G‖ for H = i[Θ,·]
    pub hamiltonian_residual: f64,
    pub tolerance: f64,
}

fn dbc_with_gram(m: &Superoperator, state: &ThermalState, gram: ComplexMatrix) -> Result<DbcReport, DbcError> {
    let min = state.rho.hermitian_part().min_eigenvalue()?;
    if min < 1e-12 {
        return Err(DbcError::DegenerateState { min_eigenvalue: min });
    }
    let (theta, md) = split_hamiltonian_dissipative(m)?;
    let h = Superoperator::hamiltonian(&theta).matrix;
    let dis = (&(&gram * &md.matrix) - &(&md.matrix.adjoint() * &gram)).norm_fro();
    let ham = (&(&gram * &h) + &(&h.adjoint() * &gram)).norm_fro();
    let tolerance = 1e-8 * (1.0 + m.norm_fro());
    Ok(DbcReport {
        passed: dis <= tolerance && ham <= tolerance,
        dissipative_residual: dis,
        hamiltonian_residual: ham,
        tolerance,
    })
}

pub fn dbc_report_standard(m: &Superoperator, state: &ThermalState) -> Result<DbcReport, DbcError> {
    dbc_with_gram(m, state, gram_standard(&state.rho)?)
}

pub fn dbc_report_alt(m: &Superoperator, state: &ThermalState) -> Result<DbcReport, DbcError> {
    dbc_with_gram(m, state, gram_alt(&state.rho))
}

pub fn dbc_check_standard(m: &Superoperator, state: &ThermalState) -> Result<bool, DbcError> {
    Ok(dbc_report_standard(m, state)?.passed)
}

pub fn dbc_check_alt(m: &Superoperator, state: &ThermalState) -> Result<bool, DbcError> {
    Ok(dbc_report_alt(m, state)?.passed)
}

/// max over E_ab of ‖Σ ν_j A ν_j* − Σ_ij (e^{−βY})_ij ν_i* A ν_j‖
pub fn quadratic_balance_residual(nu: &CpMapData, y: &ComplexMatrix, beta: f64) -> Result<f64, DbcError> {
    let n = nu.noise_dim();
    if n == 0 {
        return Ok(0.0);
    }
    let w = expm_hermitian(y, C64::new(-beta, 0.0))?;
    let d = nu.d_in;
    let mut worst = 0.0f64;
    for a in 0..d {
        for b in 0..d {
            let e = ComplexMatrix::unit(d, a, b);
            let mut lhs = ComplexMatrix::zeros(d, d);
            let mut rhs = ComplexMatrix::zeros(d, d);
            for i in 0..n {
                lhs += &(&(&nu.kraus[i] * &e) * &nu.kraus[i].adjoint());
                let left = &nu.kraus[i].adjoint() * &e;
                for j in 0..n {
                    if w[(i, j)] != C64::new(0.0, 0.0) {
                        rhs += &(&left * &nu.kraus[j]).scale(w[(i, j)]);
                    }
                }
            }
            worst = worst.max((&lhs - &rhs).norm_fro());
        }
    }
    Ok(worst)
}

/// ‖ν_k − Σ_j (e^{−βY/2} U)_{jk} ν_j*‖ summed over k.
pub fn linear_balance_residual(nu: &CpMapData, y: &ComplexMatrix, beta: f64, u_eps: &ComplexMatrix) -> Result<f64, DbcError> {
    let n = nu.noise_dim();
    let w = &expm_hermitian(y, C64::new(-beta / 2.0, 0.0))? * u_eps;
    let mut r2 = 0.0;
    for k in 0..n {
        let mut c = nu.kraus[k].clone();
        for j in 0..n {
            c -= &nu.kraus[j].adjoint().scale(w[(j, k)]);
        }
        r2 += c.norm_fro().powi(2);
    }
    Ok(r2.sqrt())
}

/// The antiunitary ε with εYε = −Y, ε² = 1 and the linear balance identity.
pub fn construct_epsilon(nu: &CpMapData, y: &ComplexMatrix, beta: f64) -> Result<AntiunitaryMap, DbcError> {
    let n = nu.noise_dim();
    let conditioning = nu.independence_ratio();
    if conditioning <= RANK_TOL {
        return Err(DbcError::NotMinimal { ratio: conditioning });
    }
    let scale = 1.0 + nu.nu_star_nu().norm_fro();
    let q = quadratic_balance_residual(nu, y, beta)?;
    if q > 1e-8 * scale {
        return Err(DbcError::BalanceViolated { residual: q });
    }
    let ye = herm_eig(y)?;
    let v = &ye.vectors;
    let rot: Vec<ComplexMatrix> = (0..n)
        .map(|i| {
            let mut s = ComplexMatrix::zeros(nu.d_in, nu.d_out);
            for j in 0..n {
                s += &nu.kraus[j].scale(v[(j, i)].conj());
            }
            s
        })
        .collect();
    let a = CpMapData::new(nu.d_out, nu.d_in, rot.iter().map(|b| b.adjoint()).collect())?;
    let b = CpMapData::new(
        nu.d_in,
        nu.d_out,
        rot.iter()
            .zip(&ye.values)
            .map(|(m, &yj)| m.scale_real((-beta * yj / 2.0).exp()))
            .collect(),
    )?;
    let eq = match dilation_equivalence(&a, &b) {
        Ok(eq) => eq,
        Err(CpError::NotEquivalent { residual }) => return Err(DbcError::BalanceViolated { residual }),
        Err(e) => return Err(e.into()),
    };
    let yv = &ye.values;
    let u_rot = ComplexMatrix::from_fn(n, n, |j, k| eq.unitary[(k, j)] * (beta * (yv[j] + yv[k]) / 2.0).exp());
    let u_eps = &(v * &u_rot) * &v.transpose();
    let id = ComplexMatrix::identity(n);
    let involution_residual = (&(&u_eps * &u_eps.conj()) - &id).norm_fro();
    let flip_residual = (&(&(&u_eps * &y.conj()) * &u_eps.conj()) + y).norm_fro();
    let unitarity_residual = (&(&u_eps.adjoint() * &u_eps) - &id).norm_fro();
    let balance_residual = linear_balance_residual(nu, y, beta, &u_eps)?;
    Ok(AntiunitaryMap {
        u_eps,
        balance_residual,
        involution_residual,
        flip_residual,
        unitarity_residual,
        conditioning,
    })
}
