//! Pauli-Fierz spectral data: Bohr frequencies, the Davies generator, thermal reservoirs,
//! the reservoir conjugation, the two-point KMS identity and the truncated-Fock weak coupling limit.

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::cpmap::{fix_phase, CpError, CpMapData};
use crate::friedrichs_wcl::{pv_scalar, FriedrichsError, Profile, DEFAULT_PV_POINTS};
use crate::invariance_dbc::{
    construct_epsilon, covariance_residual, dbc_report_alt, dbc_report_standard, quadratic_balance_residual, DbcError,
    DbcReport, SmallSystem,
};
use crate::langevin_fock::{fock_hamiltonian, reduced_pair, LangevinError, TruncatedFock};
use crate::lindblad::{build_generator, evolve, evolve_predual, LindbladData, LindbladError};
use crate::matrixcore::{commutator, expm_hermitian, herm_eig, ComplexMatrix, MatrixError, Superoperator, C64, I};
use crate::classical::{classical_dbc_residual, is_classical_generator, restrict_to_diagonal, ClassicalError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PfError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Cp(#[from] CpError),
    #[error(transparent)]
    Friedrichs(#[from] FriedrichsError),
    #[error(transparent)]
    Langevin(#[from] LangevinError),
    #[error(transparent)]
    Lindblad(#[from] LindbladError),
    #[error(transparent)]
    Dbc(#[from] DbcError),
    #[error(transparent)]
    Classical(#[from] ClassicalError),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("no orientation of the jump blocks satisfies νK = (K⊗1+1⊗Y)ν (residuals {natural:.3e}, {displayed:.3e})")]
    OrientationUnresolvable { natural: f64, displayed: f64 },
    #[error("inverse temperature must be positive (got {0})")]
    BetaNonPositive(f64),
    #[error("reservoir is not thermal (residual {residual:.3e})")]
    NotThermal { residual: f64 },
}

/// Coupling window around a Bohr frequency: v(x) = profile(x) Σ_j ops_j ⊗ e_j on (a, b).
#[derive(Clone, Debug, PartialEq)]
pub struct BohrInterval {
    pub omega: f64,
    pub a: f64,
    pub b: f64,
    pub profile: Profile,
    pub ops: Vec<ComplexMatrix>,
}

impl BohrInterval {
    pub fn fiber(&self) -> usize {
        self.ops.len()
    }

    /// Σ_j G_j* P G_j
    fn sandwich(&self, p: &ComplexMatrix) -> ComplexMatrix {
        let d = p.rows();
        self.ops.iter().fold(ComplexMatrix::zeros(d, d), |acc, g| &acc + &(&(&g.adjoint() * p) * g))
    }
}

#[derive(Clone, Debug)]
pub struct SpectralCouplingModel {
    pub sys: SmallSystem,
    pub bohr: Vec<BohrInterval>,
    pub beta: Option<f64>,
}

fn spectral_tol(sys: &SmallSystem) -> f64 {
    1e-8 * (1.0 + sys.eig.max_abs_value())
}

/// Sorted differences k − k′ of eigenvalues of K.
pub fn bohr_frequencies(sys: &SmallSystem) -> Vec<f64> {
    let tol = spectral_tol(sys);
    let ev = sys.eigenvalues();
    let mut out: Vec<f64> = ev.iter().flat_map(|k| ev.iter().map(move |kp| k - kp)).collect();
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() <= tol);
    out
}

impl SpectralCouplingModel {
    pub fn new(k: ComplexMatrix, bohr: Vec<BohrInterval>, beta: Option<f64>) -> Result<Self, PfError> {
        let sys = SmallSystem::new(k)?;
        let d = sys.dim();
        let freqs = bohr_frequencies(&sys);
        let tol = spectral_tol(&sys);
        if let Some(b) = beta {
            if !(b > 0.0) {
                return Err(PfError::BetaNonPositive(b));
            }
        }
        for (i, iv) in bohr.iter().enumerate() {
            if !(iv.a < iv.omega && iv.omega < iv.b) {
                return Err(PfError::InvalidModel(format!(
                    "window {i}: omega = {} is not inside ({}, {})",
                    iv.omega, iv.a, iv.b
                )));
            }
            if !freqs.iter().any(|w| (w - iv.omega).abs() <= tol) {
                return Err(PfError::InvalidModel(format!("window {i}: {} is not a Bohr frequency", iv.omega)));
            }
            if iv.ops.is_empty() || iv.ops.iter().any(|g| g.shape() != (d, d)) {
                return Err(PfError::InvalidModel(format!("window {i}: coupling operators must be {d}x{d}")));
            }
            for (j, other) in bohr.iter().enumerate().skip(i + 1) {
                if iv.a < other.b && other.a < iv.b {
                    return Err(PfError::InvalidModel(format!("windows {i} and {j} overlap")));
                }
            }
        }
        Ok(SpectralCouplingModel { sys, bohr, beta })
    }

    pub fn d(&self) -> usize {
        self.sys.dim()
    }

    pub fn noise_dim(&self) -> usize {
        self.bohr.iter().map(|b| b.fiber()).sum()
    }
}

/// Which side of v(ω) carries 1_k: `Natural` is 1_{k′} v(ω) 1_k, `Displayed` is 1_k v(ω) 1_{k′}, with ω = k − k′.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Natural,
    Displayed,
}

#[derive(Clone, Debug)]
pub struct DaviesData {
    pub upsilon: ComplexMatrix,
    pub nu: CpMapData,
    /// Y = ω on 𝔥_ω (diagonal).
    pub y: ComplexMatrix,
    pub orientation: Orientation,
    pub lindblad: LindbladData,
    pub m: Superoperator,
    pub quadrature_difference: f64,
}

/// Υ = Σ_{k,k′} 1_k [Σ_I −PV∫_I (v*1_{k′}v)(x)/(x−ω) dx − iπ (v*1_{k′}v)(ω)] 1_k, ω = k − k′.
pub fn pf_level_shift(model: &SpectralCouplingModel) -> Result<(ComplexMatrix, f64), PfError> {
    let d = model.d();
    let mut ups = ComplexMatrix::zeros(d, d);
    let mut worst = 0.0f64;
    for (k, pk) in &model.sys.projections {
        let mut block = ComplexMatrix::zeros(d, d);
        for (kp, pkp) in &model.sys.projections {
            let omega = k - kp;
            for iv in &model.bohr {
                let op = iv.sandwich(pkp);
                if op.is_zero() {
                    continue;
                }
                let (value, diff) = pv_scalar(&iv.profile, iv.a, iv.b, omega, DEFAULT_PV_POINTS);
                worst = worst.max(diff);
                block += &op.scale_real(value);
                if iv.a < omega && omega < iv.b {
                    block -= &op.scale(I * (PI * iv.profile.eval(omega).powi(2)));
                }
            }
        }
        ups += &(&(pk * &block) * pk);
    }
    if worst > 1e-4 {
        return Err(FriedrichsError::GridTooCoarse { difference: worst }.into());
    }
    Ok((ups, worst))
}

fn jump_blocks(model: &SpectralCouplingModel, orientation: Orientation) -> (Vec<ComplexMatrix>, Vec<f64>) {
    let d = model.d();
    let tol = spectral_tol(&model.sys);
    let mut blocks = Vec::new();
    let mut omegas = Vec::new();
    for iv in &model.bohr {
        let amp = (2.0 * PI).sqrt() * iv.profile.eval(iv.omega);
        for g in &iv.ops {
            let mut acc = ComplexMatrix::zeros(d, d);
            for (k, pk) in &model.sys.projections {
                for (kp, pkp) in &model.sys.projections {
                    if ((k - kp) - iv.omega).abs() > tol {
                        continue;
                    }
                    let term = match orientation {
                        Orientation::Natural => &(pkp * g) * pk,
                        Orientation::Displayed => &(pk * g) * pkp,
                    };
                    acc += &term;
                }
            }
            blocks.push(acc.scale_real(amp));
            omegas.push(iv.omega);
        }
    }
    (blocks, omegas)
}

pub fn davies_generator(model: &SpectralCouplingModel) -> Result<DaviesData, PfError> {
    let d = model.d();
    let (upsilon, quadrature_difference) = pf_level_shift(model)?;
    let mut residuals = [0.0; 2];
    let mut chosen = None;
    for (slot, orientation) in [Orientation::Natural, Orientation::Displayed].into_iter().enumerate() {
        let (blocks, omegas) = jump_blocks(model, orientation);
        let nu = CpMapData::new(d, d, blocks)?;
        let y = ComplexMatrix::diag_real(&omegas);
        let r = covariance_residual(&nu, &model.sys.k, &y);
        residuals[slot] = r;
        if r <= 1e-6 * (1.0 + nu.gram().norm_fro().sqrt() * (1.0 + model.sys.k.norm_fro())) {
            chosen = Some((orientation, nu, y));
            break;
        }
    }
    let (orientation, nu, y) = chosen.ok_or(PfError::OrientationUnresolvable {
        natural: residuals[0],
        displayed: residuals[1],
    })?;
    let lindblad = LindbladData::from_level_shift(&upsilon, nu.kraus.clone())?;
    let m = build_generator(&lindblad)?;
    Ok(DaviesData {
        upsilon,
        nu,
        y,
        orientation,
        lindblad,
        m,
        quadrature_difference,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DaviesCertificate {
    pub orientation: Orientation,
    pub markov_residual: f64,
    pub markov: bool,
    pub k_invariance_residual: f64,
    pub k_invariant: bool,
    pub condi6_residual: f64,
    pub nu_identity_residual: f64,
    pub upsilon_commutator: f64,
    pub beta: Option<f64>,
    pub condi2_residual: Option<f64>,
    pub dbc_standard: Option<DbcReport>,
    pub dbc_alt: Option<DbcReport>,
    pub gibbs_stationarity: Option<f64>,
    pub classical_dbc_residual: Option<f64>,
    pub epsilon_ok: Option<bool>,
    pub passed: bool,
}

/// Certifies the structural properties of Davies data; thermal checks only when β is given.
pub fn certify_davies(model: &SpectralCouplingModel, data: &DaviesData, beta: Option<f64>) -> Result<DaviesCertificate, PfError> {
    let k = &model.sys.k;
    let scale = 1.0 + data.m.norm_fro();
    let markov_residual = data.m.apply(&ComplexMatrix::identity(model.d())).norm_fro();
    let k_invariance_residual = crate::invariance_dbc::k_invariance_residual(&data.m, &model.sys);
    let condi6_residual = covariance_residual(&data.nu, k, &data.y);
    let nn = data.nu.nu_star_nu();
    let nu_identity_residual = (&(&data.upsilon - &data.upsilon.adjoint()).scale(-I) + &nn).norm_fro();
    let upsilon_commutator = commutator(&data.upsilon, k).norm_fro();
    let markov = markov_residual <= 1e-8 * scale;
    let k_invariant = k_invariance_residual <= 1e-8 * scale;
    let mut passed = markov && k_invariant && condi6_residual <= 1e-8 && nu_identity_residual <= 1e-6 && upsilon_commutator <= 1e-10;
    let mut cert = DaviesCertificate {
        orientation: data.orientation,
        markov_residual,
        markov,
        k_invariance_residual,
        k_invariant,
        condi6_residual,
        nu_identity_residual,
        upsilon_commutator,
        beta,
        condi2_residual: None,
        dbc_standard: None,
        dbc_alt: None,
        gibbs_stationarity: None,
        classical_dbc_residual: None,
        epsilon_ok: None,
        passed,
    };
    if let Some(beta) = beta {
        let gibbs = model.sys.gibbs(beta);
        let condi2 = quadratic_balance_residual(&data.nu, &data.y, beta)?;
        let std = dbc_report_standard(&data.m, &gibbs)?;
        let alt = dbc_report_alt(&data.m, &gibbs)?;
        let stat = evolve_predual_generator(&data.m, &gibbs.rho);
        let ps: Vec<ComplexMatrix> = model.sys.projections.iter().map(|(_, p)| p.clone()).collect();
        let classical = restrict_to_diagonal(&data.m, &ps)?;
        let weights: Vec<f64> = ps.iter().map(|p| (&gibbs.rho * p).trace().re).collect();
        let cres = if is_classical_generator(&classical) {
            classical_dbc_residual(&classical, &weights)
        } else {
            f64::INFINITY
        };
        let eps_ok = if data.nu.noise_dim() == 0 {
            true
        } else {
            match construct_epsilon(&data.nu, &data.y, beta) {
                Ok(eps) => eps.involution_residual <= 1e-8 && eps.flip_residual <= 1e-8,
                Err(_) => false,
            }
        };
        passed &= condi2 <= 1e-8 && std.passed && alt.passed && stat <= 1e-8 && cres <= 1e-8 && eps_ok;
        cert.condi2_residual = Some(condi2);
        cert.dbc_standard = Some(std);
        cert.dbc_alt = Some(alt);
        cert.gibbs_stationarity = Some(stat);
        cert.classical_dbc_residual = Some(cres);
        cert.epsilon_ok = Some(eps_ok);
        cert.passed = passed;
    }
    Ok(cert)
}

/// ‖M_*(ρ)‖ for the predual generator.
fn evolve_predual_generator(m: &Superoperator, rho: &ComplexMatrix) -> f64 {
    m.adjoint().apply(rho).norm_fro()
}

/// Slope of −ln⟨e_i|e^{tM}(A)|e_i⟩ by least squares over the sample times.
pub fn log_linear_rate(m: &Superoperator, a: &ComplexMatrix, i: usize, times: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = times.iter().map(|&t| (t, evolve(m, t, a)[(i, i)].re.ln())).collect();
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = pts
        .iter()
        .fold((0.0, 0.0), |(p, q), (x, y)| (p + (x - mx) * (y - my), q + (x - mx) * (x - mx)));
    -num / den
}

/// Emission window (a, b) ∋ ω > 0 weighted √(1+n_β), absorption window (−b, −a) weighted √n_β
/// with the adjoint operators. β = ∞ gives the vacuum coupling.
pub fn make_thermal_coupling(
    form_factor: &Profile,
    ops: &[ComplexMatrix],
    omega: f64,
    a: f64,
    b: f64,
    beta: f64,
) -> Result<Vec<BohrInterval>, PfError> {
    if !(beta > 0.0) {
        return Err(PfError::BetaNonPositive(beta));
    }
    if !(0.0 < a && a < omega && omega < b) {
        return Err(PfError::InvalidModel(format!("thermal window ({a}, {b}) must be positive and contain {omega}")));
    }
    let base = Box::new(form_factor.clone());
    Ok(vec![
        BohrInterval {
            omega,
            a,
            b,
            profile: Profile::ThermalWeighted {
                base: base.clone(),
                beta,
                absorption: false,
            },
            ops: ops.to_vec(),
        },
        BohrInterval {
            omega: -omega,
            a: -b,
            b: -a,
            profile: Profile::ThermalWeighted { base, beta, absorption: true },
            ops: ops.iter().map(|g| g.adjoint()).collect(),
        },
    ])
}

/// Midpoint discretization: one mode per (window, cell, fiber index) with block √w·v_j(x).
#[derive(Clone, Debug)]
pub struct DiscreteReservoir {
    pub energies: Vec<f64>,
    pub blocks: Vec<ComplexMatrix>,
    /// (window, cell, fiber)
    pub labels: Vec<(usize, usize, usize)>,
    pub cells: usize,
}

impl DiscreteReservoir {
    pub fn modes(&self) -> usize {
        self.energies.len()
    }
}

pub fn discretize(model: &SpectralCouplingModel, cells: usize) -> DiscreteReservoir {
    let mut out = DiscreteReservoir {
        energies: vec![],
        blocks: vec![],
        labels: vec![],
        cells,
    };
    for (w, iv) in model.bohr.iter().enumerate() {
        let h = (iv.b - iv.a) / cells as f64;
        for c in 0..cells {
            let x = iv.a + (c as f64 + 0.5) * h;
            let amp = h.sqrt() * iv.profile.eval(x);
            for (j, g) in iv.ops.iter().enumerate() {
                out.energies.push(x);
                out.blocks.push(g.scale_real(amp));
                out.labels.push((w, c, j));
            }
        }
    }
    out
}

fn mirror_window(model: &SpectralCouplingModel, w: usize) -> Option<usize> {
    let iv = &model.bohr[w];
    let tol = 1e-12 * (1.0 + iv.a.abs() + iv.b.abs());
    model
        .bohr
        .iter()
        .position(|o| (o.a + iv.b).abs() <= tol && (o.b + iv.a).abs() <= tol)
}

/// Cells of the reservoir: (window, cell) → mode indices.
fn cell_modes(res: &DiscreteReservoir, window: usize, cell: usize) -> Vec<usize> {
    (0..res.modes()).filter(|&m| res.labels[m].0 == window && res.labels[m].1 == cell).collect()
}

/// max over cells f and matrix units A of ‖Tr_R (1⊗f̄(−H_R)) V A V* − V*(A⊗e^{−βH_R}f(H_R))V‖.
pub fn thermal_condition_residual(model: &SpectralCouplingModel, beta: f64, cells: usize) -> f64 {
    let d = model.d();
    let res = discretize(model, cells);
    let mut worst = 0.0f64;
    for w in 0..model.bohr.len() {
        let mirror = mirror_window(model, w);
        for c in 0..cells {
            let here = cell_modes(&res, w, c);
            let there = mirror.map(|mw| cell_modes(&res, mw, cells - 1 - c)).unwrap_or_default();
            let x = res.energies[here[0]];
            for p in 0..d {
                for q in 0..d {
                    let a = ComplexMatrix::unit(d, p, q);
                    let mut lhs = ComplexMatrix::zeros(d, d);
                    for &m in &there {
                        lhs += &(&(&res.blocks[m] * &a) * &res.blocks[m].adjoint());
                    }
                    let mut rhs = ComplexMatrix::zeros(d, d);
                    for &m in &here {
                        rhs += &(&(&res.blocks[m].adjoint() * &a) * &res.blocks[m]);
                    }
                    worst = worst.max((&lhs - &rhs.scale_real((-beta * x).exp())).norm_fro());
                }
            }
        }
    }
    worst
}

#[derive(Clone, Debug, Serialize)]
pub struct KmsCheck {
    pub lhs: C64,
    pub rhs: C64,
    pub residual: f64,
}

/// Both sides of the two-point KMS identity with ρ = e^{−βK}/Tr e^{−βK} and D = [D₁, D₁′, D₂, D₂′].
/// The residual is |lhs − rhs| relative to max(|lhs|, |rhs|).
pub fn kms_twopoint_check(
    model: &SpectralCouplingModel,
    beta: f64,
    t: f64,
    ds: &[ComplexMatrix; 4],
    cells: usize,
) -> Result<KmsCheck, PfError> {
    let d = model.d();
    if ds.iter().any(|m| m.shape() != (d, d)) {
        return Err(PfError::InvalidModel(format!("KMS test operators must be {d}x{d}")));
    }
    let [d1, d1p, d2, d2p] = ds;
    let res = discretize(model, cells);
    let rho = model.sys.gibbs(beta).rho;
    let fwd = expm_hermitian(&model.sys.k, I * t)?;
    let back = expm_hermitian(&model.sys.k, -I * t)?;
    let rho_t = &rho * &fwd;
    let inner_l = &(d1p * &back) * d2;
    let inner_r = &(d2p * &rho_t) * d1;
    let mut lhs = C64::new(0.0, 0.0);
    let mut rhs = C64::new(0.0, 0.0);
    for (v, &x) in res.blocks.iter().zip(&res.energies) {
        let vs = v.adjoint();
        let l = &(&(&(&(&rho_t * d1) * &vs) * &inner_l) * v) * d2p;
        lhs += l.trace() * (-I * (t * x)).exp();
        let r = &(&(&(&(d2 * &vs) * &inner_r) * v) * d1p) * &back;
        rhs += r.trace() * C64::new(-beta * x, t * x).exp();
    }
    let scale = lhs.norm().max(rhs.norm());
    let residual = if scale == 0.0 { 0.0 } else { (lhs - rhs).norm() / scale };
    Ok(KmsCheck { lhs, rhs, residual })
}

/// Antiunitary ε on the restricted reservoir, ε w = U_full · w̄ in the mode basis.
#[derive(Clone, Debug)]
pub struct ReservoirConjugation {
    /// Orthonormal basis of the restricted reservoir (modes × r).
    pub q: ComplexMatrix,
    /// ε in the basis q: coordinates a ↦ W ā.
    pub w: ComplexMatrix,
    pub u_full: ComplexMatrix,
    pub balance_residual: f64,
    pub unitarity_residual: f64,
    pub involution_residual: f64,
    pub flip_residual: f64,
}

/// (φ⊗w|Vψ) = (Vφ|ψ⊗e^{−βH/2}εw) on span{(φ|⊗f(H_R)Vψ}.
pub fn reservoir_conjugation(model: &SpectralCouplingModel, beta: f64, cells: usize) -> Result<ReservoirConjugation, PfError> {
    if !(beta > 0.0) {
        return Err(PfError::BetaNonPositive(beta));
    }
    let d = model.d();
    let res = discretize(model, cells);
    let scale = 1.0 + res.blocks.iter().map(|b| b.norm_fro().powi(2)).sum::<f64>();
    let thermal = thermal_condition_residual(model, beta, cells);
    if thermal > 1e-8 * scale {
        return Err(PfError::NotThermal { residual: thermal });
    }
    let modes = res.modes();
    let mut columns: Vec<Vec<C64>> = Vec::new();
    let mut column_energy = Vec::new();
    for w in 0..model.bohr.len() {
        for c in 0..cells {
            let idx = cell_modes(&res, w, c);
            let t = ComplexMatrix::from_fn(idx.len(), d * d, |j, ab| res.blocks[idx[j]].as_slice()[ab]);
            let gram = &t * &t.adjoint();
            let e = herm_eig(&gram)?;
            let top = e.max_abs_value();
            for s in 0..e.dim() {
                if top == 0.0 || e.values[s] <= 1e-12 * top {
                    continue;
                }
                let v = fix_phase(ComplexMatrix::column_vector(&e.vectors.column(s)));
                let mut col = vec![C64::new(0.0, 0.0); modes];
                for (j, &m) in idx.iter().enumerate() {
                    col[m] = v[(j, 0)];
                }
                columns.push(col);
                column_energy.push(res.energies[idx[0]]);
            }
        }
    }
    let r = columns.len();
    let q = ComplexMatrix::from_fn(modes, r, |m, s| columns[s][m]);
    if r == 0 {
        return Ok(ReservoirConjugation {
            q,
            w: ComplexMatrix::zeros(0, 0),
            u_full: ComplexMatrix::zeros(modes, modes),
            balance_residual: 0.0,
            unitarity_residual: 0.0,
            involution_residual: 0.0,
            flip_residual: 0.0,
        });
    }
    let tilde = ComplexMatrix::from_fn(r, d * d, |s, ab| (0..modes).map(|p| q[(p, s)].conj() * res.blocks[p].as_slice()[ab]).sum());
    let bvec = ComplexMatrix::from_fn(r, d * d, |t, ab| {
        (0..modes)
            .map(|p| q[(p, t)] * (-beta * res.energies[p] / 2.0).exp() * res.blocks[p].adjoint().as_slice()[ab])
            .sum()
    });
    // ε commutes with f(H) ↦ f̄(−H), so column s only mixes with the cells at energy −x_s.
    let mut wt = ComplexMatrix::zeros(r, r);
    let etol = 1e-9 * (1.0 + column_energy.iter().fold(0.0f64, |m, x| m.max(x.abs())));
    for s in 0..r {
        let allowed: Vec<usize> = (0..r).filter(|&t| (column_energy[t] + column_energy[s]).abs() <= etol).collect();
        if allowed.is_empty() {
            continue;
        }
        let b = bvec.select(&allowed, &(0..d * d).collect::<Vec<_>>());
        let target = tilde.select(&[s], &(0..d * d).collect::<Vec<_>>());
        // target = cᵀ b
        let c = (&b * &b.adjoint()).solve(&(&b * &target.adjoint()))?;
        for (i, &t) in allowed.iter().enumerate() {
            wt[(s, t)] = c[(i, 0)].conj();
        }
    }
    let w = wt.transpose();
    let balance_residual = (&tilde - &(&wt * &bvec)).norm_fro();
    let id = ComplexMatrix::identity(r);
    let h = &(&q.adjoint() * &ComplexMatrix::diag_real(&res.energies)) * &q;
    Ok(ReservoirConjugation {
        u_full: &(&q * &w) * &q.transpose(),
        unitarity_residual: (&(&w.adjoint() * &w) - &id).norm_fro(),
        involution_residual: (&(&w * &w.conj()) - &id).norm_fro(),
        flip_residual: (&(&(&w * &h.conj()) * &w.conj()) + &h).norm_fro(),
        balance_residual,
        q,
        w,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PfRow {
    pub lambda: f64,
    pub modes: usize,
    pub fock_dim: usize,
    pub error: f64,
}

/// e_λ = ‖e^{itK/λ²} I* e^{−itH_λ/λ²}(A⊗1)e^{itH_λ/λ²} I e^{−itK/λ²} − e^{tM}(A)‖ on a truncated Fock space.
pub fn reduced_wcl_pf_experiment(
    model: &SpectralCouplingModel,
    lambdas: &[f64],
    t: f64,
    a: &ComplexMatrix,
    cells: usize,
    n_max: usize,
) -> Result<Vec<PfRow>, PfError> {
    let d = model.d();
    if a.shape() != (d, d) {
        return Err(PfError::InvalidModel(format!("observable must be {d}x{d}")));
    }
    let data = davies_generator(model)?;
    let target = evolve(&data.m, t, a);
    let res = discretize(model, cells);
    let fock = TruncatedFock::new(res.modes(), n_max)?;
    let mut rows = Vec::new();
    for &lambda in lambdas {
        let l2 = lambda * lambda;
        let couplings: Vec<ComplexMatrix> = res.blocks.iter().map(|b| b.scale_real(lambda)).collect();
        let h = fock_hamiltonian(&model.sys.k, &res.energies, &couplings, &fock)?;
        let (_, heis) = reduced_pair(&h, d, fock.dim(), -I * (t / l2), a);
        let fwd = expm_hermitian(&model.sys.k, I * (t / l2))?;
        let lhs = &(&fwd * &heis) * &fwd.adjoint();
        rows.push(PfRow {
            lambda,
            modes: res.modes(),
            fock_dim: fock.dim(),
            error: (&lhs - &target).norm_fro(),
        });
    }
    Ok(rows)
}

/// e^{tM_*}(ρ) for the Davies generator.
pub fn davies_state(data: &DaviesData, t: f64, rho: &ComplexMatrix) -> ComplexMatrix {
    evolve_predual(&data.m, t, rho)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_level(beta: Option<f64>, g: f64) -> SpectralCouplingModel {
        let k = ComplexMatrix::diag_real(&[0.0, 1.0]);
        let lower = ComplexMatrix::unit(2, 0, 1);
        let bohr = match beta {
            Some(b) => make_thermal_coupling(&Profile::Flat { g }, &[lower], 1.0, 0.5, 1.5, b).unwrap(),
            None => vec![BohrInterval {
                omega: 1.0,
                a: 0.5,
                b: 1.5,
                profile: Profile::Flat { g },
                ops: vec![lower],
            }],
        };
        SpectralCouplingModel::new(k, bohr, beta).unwrap()
    }

    #[test]
    fn bohr_frequency_lists() {
        let f = |v: &[f64]| bohr_frequencies(&SmallSystem::new(ComplexMatrix::diag_real(v)).unwrap());
        assert_eq!(f(&[0.0, 1.0]), vec![-1.0, 0.0, 1.0]);
        assert_eq!(f(&[0.0, 1.0, 2.0]), vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
        assert_eq!(f(&[1.0, 1.0]), vec![0.0]);
    }

    #[test]
    fn vacuum_decay_rate() {
        let g: f64 = 0.1;
        let model = two_level(None, g);
        let data = davies_generator(&model).unwrap();
        assert_eq!(data.orientation, Orientation::Natural);
        let rate = log_linear_rate(&data.m, &ComplexMatrix::unit(2, 1, 1), 1, &[0.5, 1.0, 1.5, 2.0]);
        assert!((rate - 2.0 * PI * g * g).abs() < 1e-10);
        let cert = certify_davies(&model, &data, None).unwrap();
        assert!(cert.passed);
    }

    #[test]
    fn zero_coupling_gives_zero_generator() {
        let data = davies_generator(&two_level(None, 0.0)).unwrap();
        assert!(data.m.norm_fro() < 1e-14);
        assert!(data.upsilon.is_zero());
    }

    #[test]
    fn thermal_model_is_certified() {
        let beta = 1.0;
        let model = two_level(Some(beta), 0.1);
        let data = davies_generator(&model).unwrap();
        let cert = certify_davies(&model, &data, Some(beta)).unwrap();
        assert!(cert.passed, "{cert:?}");
        let ps = vec![ComplexMatrix::unit(2, 0, 0), ComplexMatrix::unit(2, 1, 1)];
        let m = restrict_to_diagonal(&data.m, &ps).unwrap();
        assert!((m.m[0][1] / m.m[1][0] - (-beta).exp()).abs() < 1e-12);
        assert!(thermal_condition_residual(&model, beta, 20) < 1e-14);
        let conj = reservoir_conjugation(&model, beta, 6).unwrap();
        assert!(conj.balance_residual < 1e-12 && conj.involution_residual < 1e-12 && conj.flip_residual < 1e-12, "{} {} {} {}", conj.balance_residual, conj.involution_residual, conj.flip_residual, conj.unitarity_residual);
        // real coupling: a pure swap of mirrored cells
        for (p, row) in (0..12).map(|p| (p, conj.u_full.row(p).to_vec())) {
            let target = if p < 6 { 6 + 5 - p } else { 5 - (p - 6) };
            for (q, z) in row.iter().enumerate() {
                let expected = if q == target { 1.0 } else { 0.0 };
                assert!((z - C64::new(expected, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn vacuum_coupling_is_not_thermal() {
        let beta = 1.0;
        let vac = SpectralCouplingModel::new(
            ComplexMatrix::diag_real(&[0.0, 1.0]),
            make_thermal_coupling(&Profile::Flat { g: 0.1 }, &[ComplexMatrix::unit(2, 0, 1)], 1.0, 0.5, 1.5, f64::INFINITY)
                .unwrap(),
            None,
        )
        .unwrap();
        assert!(thermal_condition_residual(&vac, beta, 10) > 1e-6);
        assert!(matches!(reservoir_conjugation(&vac, beta, 10), Err(PfError::NotThermal { .. })));
    }

    #[test]
    fn kms_identity_on_thermal_model() {
        let beta = 1.0;
        let model = two_level(Some(beta), 0.1);
        let sx = ComplexMatrix::from_real(2, 2, &[0.3, 1.0, 1.0, -0.2]);
        let ds = [sx.clone(), ComplexMatrix::identity(2), sx.adjoint(), ComplexMatrix::unit(2, 1, 0)];
        for t in [0.0, 0.5, 1.0] {
            assert!(kms_twopoint_check(&model, beta, t, &ds, 40).unwrap().residual < 1e-10);
        }
    }

    #[test]
    fn non_positive_beta_rejected() {
        assert!(matches!(
            make_thermal_coupling(&Profile::Flat { g: 1.0 }, &[], 1.0, 0.5, 1.5, 0.0),
            Err(PfError::BetaNonPositive(_))
        ));
    }

    #[test]
    fn markov_observable_is_preserved_in_fock_experiment() {
        let model = two_level(None, 0.2);
        let rows = reduced_wcl_pf_experiment(&model, &[0.6], 1.0, &ComplexMatrix::identity(2), 4, 2).unwrap();
        assert!(rows[0].error < 1e-10);
    }
}
