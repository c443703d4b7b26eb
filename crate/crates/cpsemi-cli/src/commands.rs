use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Debug;

use cpsemi::classical::{classical_dbc_residual, is_classical_generator, lift_classical, restrict_to_diagonal, ClassicalGenerator};
use cpsemi::cpmap::{choi, stinespring_minimal};
use cpsemi::dilation_toy::{build_zr, build_zr_with_nu, dilation_check, resolvent_compare, ReservoirGrid};
use cpsemi::friedrichs_wcl::{
    eigen_rows, extended_wcl_experiment, level_shift, nu_identity_residual, reduced_wcl_experiment, ExtendedOptions,
    FriedrichsModel, Interval,
};
use cpsemi::invariance_dbc::{dbc_report_alt, dbc_report_standard, k_invariance_residual, SmallSystem, ThermalState};
use cpsemi::langevin_fock::{build_langevin_z, commutation_residual, fock_dimension, langevin_ladder, total_energy, DEFAULT_FOCK_CAP};
use cpsemi::lindblad::{build_generator, canonical_form, haar_average_check, haar_average_monte_carlo, LindbladData};
use cpsemi::pauli_fierz::{
    bohr_frequencies, certify_davies, davies_generator, kms_twopoint_check, make_thermal_coupling, reduced_wcl_pf_experiment,
    thermal_condition_residual, BohrInterval, SpectralCouplingModel,
};
use cpsemi::{ComplexMatrix, Superoperator, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::model::{
    ClassicalPayload, FriedrichsPayload, GridSpec, Kind, LangevinPayload, LindbladPayload, Model, PauliFierzPayload, StateSpec,
    ToyPayload,
};
use crate::report::{Report, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Validate,
    Canonical,
    Stinespring,
    Dbc,
    Davies,
    WclReduced,
    WclExtended,
    ToyDilation,
    Langevin,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Canonical => "canonical",
            Command::Stinespring => "stinespring",
            Command::Dbc => "dbc",
            Command::Davies => "davies",
            Command::WclReduced => "wcl-reduced",
            Command::WclExtended => "wcl-extended",
            Command::ToyDilation => "toy-dilation",
            Command::Langevin => "langevin",
        }
    }

    fn accepts(self, kind: Kind) -> bool {
        use Kind::*;
        match self {
            Command::Validate => true,
            Command::Canonical | Command::Stinespring => kind == Lindblad,
            Command::Dbc => matches!(kind, Lindblad | Classical | PauliFierz),
            Command::Davies => kind == PauliFierz,
            Command::WclReduced => matches!(kind, Friedrichs | PauliFierz),
            Command::WclExtended => kind == Friedrichs,
            Command::ToyDilation => kind == ToyDilation,
            Command::Langevin => kind == Langevin,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Options {
    pub seed: u64,
    pub tol: BTreeMap<String, f64>,
    pub lambda_list: Option<Vec<f64>>,
    pub grid: Option<GridSpec>,
    pub nmax: Option<usize>,
    pub rho: Option<ComplexMatrix>,
}

/// Problems with the input itself; these map to exit code 2.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum InputError {
    #[error("command `{command}` does not accept models of kind `{kind}`")]
    KindMismatch { command: &'static str, kind: &'static str },
    #[error("{0}")]
    Invalid(String),
}

/// A module error carried into the report with a machine-readable code.
struct Failure {
    code: String,
    message: String,
}

fn snake(ident: &str) -> String {
    let mut out = String::new();
    for (i, c) in ident.chars().enumerate() {
        if c.is_ascii_uppercase() {
            if i > 0 {
                out.push('_');
            }
            out.push(c.to_ascii_lowercase());
        } else {
            out.push(c);
        }
    }
    out
}

/// `PfError::Friedrichs(GridTooCoarse { .. })` becomes `friedrichs.grid_too_coarse`.
fn error_code(debug: &str) -> String {
    let mut parts = Vec::new();
    let mut rest = debug;
    loop {
        let ident: String = rest.chars().take_while(|c| c.is_ascii_alphanumeric() || *c == '_').collect();
        if ident.is_empty() || !ident.starts_with(|c: char| c.is_ascii_uppercase()) {
            break;
        }
        parts.push(snake(&ident));
        rest = &rest[ident.len()..];
        match rest.strip_prefix('(') {
            Some(r) => rest = r,
            None => break,
        }
    }
    if parts.is_empty() {
        "error".into()
    } else {
        parts.join(".")
    }
}

impl<E: Debug + std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure {
            code: error_code(&format!("{e:?}")),
            message: e.to_string(),
        }
    }
}

type Step = Result<(), Failure>;

struct Ctx<'a> {
    opts: &'a Options,
    used_tols: BTreeSet<String>,
}

impl Ctx<'_> {
    fn tol(&mut self, name: &str, default: f64) -> f64 {
        self.used_tols.insert(name.to_string());
        self.opts.tol.get(name).copied().unwrap_or(default)
    }
}

/// Runs one command; tolerance names that the command never consulted are returned for a warning.
pub fn run(command: Command, model: &Model, model_name: &str, opts: &Options) -> Result<(Report, Vec<String>), InputError> {
    let kind = model.kind();
    if !command.accepts(kind) {
        return Err(InputError::KindMismatch {
            command: command.name(),
            kind: kind.name(),
        });
    }
    let mut report = Report::new(command.name(), model_name, kind.name(), opts.seed);
    let mut ctx = Ctx {
        opts,
        used_tols: BTreeSet::new(),
    };
    let r = &mut report;
    let result = match (command, model) {
        (Command::Validate, Model::Lindblad(p)) => validate_lindblad(&mut ctx, r, p),
        (Command::Validate, Model::Classical(p)) => validate_classical(&mut ctx, r, p),
        (Command::Validate, Model::Friedrichs(p)) => validate_friedrichs(&mut ctx, r, p),
        (Command::Validate, Model::PauliFierz(p)) => validate_pf(&mut ctx, r, p),
        (Command::Validate, Model::ToyDilation(p)) => validate_toy(&mut ctx, r, p),
        (Command::Validate, Model::Langevin(p)) => validate_langevin(&mut ctx, r, p),
        (Command::Canonical, Model::Lindblad(p)) => canonical(&mut ctx, r, p),
        (Command::Stinespring, Model::Lindblad(p)) => stinespring(&mut ctx, r, p),
        (Command::Dbc, Model::Lindblad(p)) => dbc_lindblad(&mut ctx, r, p),
        (Command::Dbc, Model::Classical(p)) => dbc_classical(&mut ctx, r, p),
        (Command::Dbc, Model::PauliFierz(p)) => dbc_pf(&mut ctx, r, p),
        (Command::Davies, Model::PauliFierz(p)) => davies(&mut ctx, r, p),
        (Command::WclReduced, Model::Friedrichs(p)) => wcl_reduced(&mut ctx, r, p),
        (Command::WclReduced, Model::PauliFierz(p)) => wcl_reduced_pf(&mut ctx, r, p),
        (Command::WclExtended, Model::Friedrichs(p)) => wcl_extended(&mut ctx, r, p),
        (Command::ToyDilation, Model::ToyDilation(p)) => toy(&mut ctx, r, p),
        (Command::Langevin, Model::Langevin(p)) => langevin(&mut ctx, r, p),
        _ => unreachable!("accepts() covers the dispatch table"),
    };
    match result {
        Ok(()) => {}
        Err(f) if f.code == "input" => return Err(InputError::Invalid(f.message)),
        Err(f) => report.fail_with(&f.code, f.message),
    }
    let unused = opts.tol.keys().filter(|k| !ctx.used_tols.contains(*k)).cloned().collect();
    Ok((report, unused))
}

fn input(message: impl Into<String>) -> Failure {
    Failure {
        code: "input".into(),
        message: message.into(),
    }
}

fn square(name: &str, m: &ComplexMatrix, d: usize) -> Step {
    if m.shape() != (d, d) {
        return Err(input(format!("{name} must be {d}x{d}, found {}x{}", m.rows(), m.cols())));
    }
    Ok(())
}

fn lindblad_data(p: &LindbladPayload) -> Result<LindbladData, Failure> {
    let d = p
        .dim
        .or(p.theta.as_ref().map(|m| m.rows()))
        .or(p.delta.as_ref().map(|m| m.rows()))
        .or(p.nu.first().map(|m| m.rows()))
        .ok_or_else(|| input("lindblad payload needs `dim` or at least one matrix"))?;
    let theta = p.theta.clone().unwrap_or_else(|| ComplexMatrix::zeros(d, d));
    let delta = p.delta.clone().unwrap_or_else(|| ComplexMatrix::zeros(d, d));
    square("theta", &theta, d)?;
    square("delta", &delta, d)?;
    for (j, b) in p.nu.iter().enumerate() {
        square(&format!("nu[{j}]"), b, d)?;
    }
    Ok(LindbladData {
        theta,
        delta,
        nu: p.nu.clone(),
    })
}

fn hermiticity_checks(ctx: &mut Ctx, r: &mut Report, data: &LindbladData) -> bool {
    let tol = ctx.tol("hermitian", 1e-12);
    let a = r.check("theta hermitian", data.theta.hermiticity_deviation(), tol * (1.0 + data.theta.max_abs()));
    let b = r.check("delta hermitian", data.delta.hermiticity_deviation(), tol * (1.0 + data.delta.max_abs()));
    a && b
}

fn validate_lindblad(ctx: &mut Ctx, r: &mut Report, p: &LindbladPayload) -> Step {
    let data = lindblad_data(p)?;
    r.data("dim", &data.dim());
    r.data("noise_dim", &data.nu.len());
    if !hermiticity_checks(ctx, r, &data) {
        return Ok(());
    }
    if p.markov {
        let tol = ctx.tol("markov", 1e-10);
        r.check("markov 2Δ=ν*ν", data.markov_residual(), tol * (1.0 + data.delta.norm_fro()));
    }
    let m = build_generator(&data)?;
    r.data("generator_norm", &m.norm_fro());
    if let Some(s) = &p.state {
        let state = thermal_state(s, data.dim(), None)?;
        state_checks(ctx, r, &state.rho);
    }
    Ok(())
}

fn state_checks(ctx: &mut Ctx, r: &mut Report, rho: &ComplexMatrix) {
    let tol = ctx.tol("state", 1e-10);
    let herm = rho.hermiticity_deviation();
    let min = rho.hermitian_part().min_eigenvalue().unwrap_or(f64::NAN);
    r.check("state hermitian", herm, tol);
    r.check("state positive", (-min).max(0.0), tol);
    r.check("state unit trace", (rho.trace() - C64::new(1.0, 0.0)).norm(), tol);
}

/// State from `--rho`, then the payload, then the Gibbs state of the model's K at its β.
fn thermal_state(s: &StateSpec, d: usize, fallback_k: Option<(&ComplexMatrix, Option<f64>)>) -> Result<ThermalState, Failure> {
    let beta = s.beta.or(fallback_k.and_then(|(_, b)| b));
    if let Some(rho) = &s.rho {
        square("state.rho", rho, d)?;
        return Ok(ThermalState::from_rho(beta.unwrap_or(f64::NAN), rho.clone()));
    }
    let k = s.k.as_ref().or(fallback_k.map(|(k, _)| k)).ok_or_else(|| input("state needs `rho` or `k`"))?;
    square("state.k", k, d)?;
    let beta = beta.ok_or_else(|| input("a Gibbs state needs `beta`"))?;
    if !(beta > 0.0) {
        return Err(input(format!("beta must be positive, got {beta}")));
    }
    Ok(SmallSystem::new(k.clone())?.gibbs(beta))
}

fn override_state(opts: &Options, s: Option<&StateSpec>) -> StateSpec {
    let mut s = s.cloned().unwrap_or_default();
    if let Some(rho) = &opts.rho {
        s.rho = Some(rho.clone());
    }
    s
}

fn classical_generator(p: &ClassicalPayload) -> Result<ClassicalGenerator, Failure> {
    ClassicalGenerator::new(p.m.clone()).map_err(|e| input(e.to_string()))
}

fn validate_classical(ctx: &mut Ctx, r: &mut Report, p: &ClassicalPayload) -> Step {
    let g = classical_generator(p)?;
    let n = g.n();
    let tol = ctx.tol("classical", 1e-12);
    let mut neg = 0.0f64;
    let mut rows = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                neg = neg.max(-g.m[i][j]);
            }
        }
        rows = rows.max(g.m[i].iter().sum::<f64>().abs());
    }
    r.check("off-diagonal rates nonnegative", neg.max(0.0), tol * (1.0 + g.max_abs()));
    r.check("row sums vanish", rows, tol * (1.0 + g.max_abs()));
    if let Some(pv) = &p.p {
        if pv.len() != n {
            return Err(input(format!("p has {} entries for a {n}-state generator", pv.len())));
        }
        let min = pv.iter().copied().fold(f64::INFINITY, f64::min);
        r.flag("p positive", min > 0.0, min, 0.0);
        r.check("p normalized", (pv.iter().sum::<f64>() - 1.0).abs(), 1e-10);
    }
    Ok(())
}

fn friedrichs_model(p: &FriedrichsPayload) -> Result<FriedrichsModel, Failure> {
    if p.k.rows() != p.k.cols() {
        return Err(input("K must be square"));
    }
    let mut intervals = Vec::new();
    for iv in &p.intervals {
        let op = match &iv.op {
            Some(op) => op.clone(),
            None => eigen_rows(&p.k, iv.k)?,
        };
        intervals.push(Interval {
            k: iv.k,
            a: iv.a,
            b: iv.b,
            profile: iv.profile.clone(),
            op,
        });
    }
    Ok(FriedrichsModel::new(p.k.clone(), intervals)?)
}

/// Library model of a Friedrichs payload.
pub fn friedrichs_from_payload(p: &FriedrichsPayload) -> Result<FriedrichsModel, String> {
    friedrichs_model(p).map_err(|f| f.message)
}

fn validate_friedrichs(ctx: &mut Ctx, r: &mut Report, p: &FriedrichsPayload) -> Step {
    let model = friedrichs_model(p)?;
    let ls = level_shift(&model)?;
    let tol = ctx.tol("nu_identity", 1e-6);
    r.check("(1/i)(Υ−Υ*) = −ν*ν", nu_identity_residual(&ls.upsilon, &model.nu()), tol);
    r.data("upsilon", &ls.upsilon);
    r.data("quadrature_difference", &ls.quadrature_difference);
    Ok(())
}

fn pf_model(p: &PauliFierzPayload) -> Result<SpectralCouplingModel, Failure> {
    let mut bohr: Vec<BohrInterval> = p
        .bohr
        .iter()
        .map(|b| BohrInterval {
            omega: b.omega,
            a: b.a,
            b: b.b,
            profile: b.profile.clone(),
            ops: b.ops.clone(),
        })
        .collect();
    if !p.thermal.is_empty() {
        let beta = p.beta.ok_or_else(|| input("thermal windows need `beta`"))?;
        for t in &p.thermal {
            bohr.extend(make_thermal_coupling(&t.profile, &t.ops, t.omega, t.a, t.b, beta)?);
        }
    }
    Ok(SpectralCouplingModel::new(p.k.clone(), bohr, p.beta)?)
}

/// Library model of a Pauli-Fierz payload, thermal windows expanded.
pub fn pauli_fierz_from_payload(p: &PauliFierzPayload) -> Result<SpectralCouplingModel, String> {
    pf_model(p).map_err(|f| f.message)
}

fn validate_pf(ctx: &mut Ctx, r: &mut Report, p: &PauliFierzPayload) -> Step {
    let model = pf_model(p)?;
    r.data("bohr_frequencies", &bohr_frequencies(&model.sys));
    let data = davies_generator(&model)?;
    let cert = certify_davies(&model, &data, None)?;
    let tol = ctx.tol("nu_identity", 1e-6);
    r.check("(1/i)(Υ−Υ*) = −ν*ν", cert.nu_identity_residual, tol);
    let tol = ctx.tol("condi6", 1e-8);
    r.check("covariance νK=(K⊗1+1⊗Y)ν", cert.condi6_residual, tol);
    r.data("orientation", &data.orientation);
    Ok(())
}

fn grids(opts: &Options, specs: &[GridSpec]) -> Result<Vec<ReservoirGrid>, Failure> {
    let specs = match &opts.grid {
        Some(g) => std::slice::from_ref(g),
        None => specs,
    };
    if specs.is_empty() {
        return Err(input("at least one grid is required"));
    }
    specs
        .iter()
        .map(|g| ReservoirGrid::symmetric(g.r, g.n).map_err(|e| input(e.to_string())))
        .collect()
}

fn validate_toy(ctx: &mut Ctx, r: &mut Report, p: &ToyPayload) -> Step {
    let d = p.upsilon.rows();
    square("upsilon", &p.upsilon, d)?;
    let grids = grids(ctx.opts, &p.grids)?;
    let gamma = (&p.upsilon - &p.upsilon.adjoint()).scale(C64::new(0.0, 1.0));
    let min = gamma.hermitian_part().min_eigenvalue()?;
    let tol = ctx.tol("dissipative", 1e-12);
    r.check("i(Υ−Υ*) ≥ 0", (-min).max(0.0), tol * (1.0 + gamma.norm_fro()));
    if let Some(nu) = &p.nu {
        if nu.cols() != d {
            return Err(input(format!("nu must have {d} columns")));
        }
        r.check("(1/i)(Υ−Υ*) = −ν*ν", nu_identity_residual(&p.upsilon, nu), ctx.tol("nu_identity", 1e-10));
    }
    r.data("grids", &grids);
    Ok(())
}

fn validate_langevin(ctx: &mut Ctx, r: &mut Report, p: &LangevinPayload) -> Step {
    let d = p.upsilon.rows();
    square("upsilon", &p.upsilon, d)?;
    for (j, b) in p.nu.iter().enumerate() {
        square(&format!("nu[{j}]"), b, d)?;
    }
    let n_max = ctx.opts.nmax.unwrap_or(p.n_max);
    let mut dims = Vec::new();
    for g in grids(ctx.opts, &p.grids)? {
        let dim = fock_dimension(p.nu.len() * g.n, n_max);
        r.check(&format!("fock dimension (n = {})", g.n), dim, DEFAULT_FOCK_CAP as f64);
        dims.push(dim * d as f64);
    }
    r.data("total_dimensions", &dims);
    Ok(())
}

fn canonical(ctx: &mut Ctx, r: &mut Report, p: &LindbladPayload) -> Step {
    let data = lindblad_data(p)?;
    if !hermiticity_checks(ctx, r, &data) {
        return Ok(());
    }
    let m = build_generator(&data)?;
    let c = canonical_form(&m)?;
    let back = build_generator(&c)?;
    r.check("round trip", back.distance(&m), ctx.tol("round_trip", 1e-9) * (1.0 + m.norm_fro()));
    let (tt, tn) = c.trace_residuals();
    let tol = ctx.tol("trace", 1e-10);
    r.check("Tr Θ = 0", tt, tol);
    r.check("Tr ν_j = 0", tn, tol);
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.opts.seed);
    let mc = haar_average_monte_carlo(&m, 2000, &mut rng);
    let exact = haar_average_check(&m);
    let mut z = 0.0f64;
    for i in 0..m.dim {
        for j in 0..m.dim {
            let (e, s, x) = (mc.mean[(i, j)] - exact[(i, j)], mc.std_error[(i, j)], 1e-12);
            z = z.max(e.re.abs() / (s.re + x)).max(e.im.abs() / (s.im + x));
        }
    }
    r.check("twirl Monte-Carlo vs closed form (z-score)", z, ctx.tol("twirl_z", 5.0));
    r.data("canonical", &c);
    Ok(())
}

fn stinespring(ctx: &mut Ctx, r: &mut Report, p: &LindbladPayload) -> Step {
    let data = lindblad_data(p)?;
    let xi = data.blocks().to_superoperator()?;
    let c = choi(&xi);
    let tol = ctx.tol("cp", 1e-10);
    r.check("Choi matrix PSD", (-c.min_eigenvalue()).max(0.0), tol * (1.0 + c.matrix.norm_fro()));
    let min = stinespring_minimal(&xi)?;
    let back = min.to_superoperator()?;
    r.check("minimal dilation reproduces Ξ", back.distance(&xi), ctx.tol("reconstruction", 1e-10) * (1.0 + xi.norm_fro()));
    r.data("rank", &min.noise_dim());
    r.data("independence_ratio", &min.independence_ratio());
    r.data("kraus", &min.kraus);
    Ok(())
}

fn dbc_checks(ctx: &mut Ctx, r: &mut Report, m: &Superoperator, state: &ThermalState) -> Step {
    let std = dbc_report_standard(m, state)?;
    let alt = dbc_report_alt(m, state)?;
    let scale = std.tolerance / 1e-8;
    let tol = ctx.tol("dbc", 1e-8) * scale;
    r.check("dbc standard: dissipative part", std.dissipative_residual, tol);
    r.check("dbc standard: hamiltonian part", std.hamiltonian_residual, tol);
    r.check("dbc alternative: dissipative part", alt.dissipative_residual, tol);
    r.check("dbc alternative: hamiltonian part", alt.hamiltonian_residual, tol);
    Ok(())
}

fn dbc_lindblad(ctx: &mut Ctx, r: &mut Report, p: &LindbladPayload) -> Step {
    let data = lindblad_data(p)?;
    if !hermiticity_checks(ctx, r, &data) {
        return Ok(());
    }
    let m = build_generator(&data)?;
    let s = override_state(ctx.opts, p.state.as_ref());
    let state = thermal_state(&s, data.dim(), None)?;
    if let Some(k) = &s.k {
        let sys = SmallSystem::new(k.clone())?;
        r.data("k_invariance_residual", &k_invariance_residual(&m, &sys));
    }
    dbc_checks(ctx, r, &m, &state)
}

fn dbc_classical(ctx: &mut Ctx, r: &mut Report, p: &ClassicalPayload) -> Step {
    let g = classical_generator(p)?;
    let pv = p.p.as_ref().ok_or_else(|| input("classical dbc needs `p`"))?;
    if pv.len() != g.n() {
        return Err(input(format!("p has {} entries for a {}-state generator", pv.len(), g.n())));
    }
    if !is_classical_generator(&g) {
        r.flag("classical generator", false, f64::NAN, 0.0);
        return Ok(());
    }
    r.check("classical dbc p_j m_jk = p_k m_kj", classical_dbc_residual(&g, pv), ctx.tol("classical_dbc", 1e-10));
    let theta = p.theta.clone().unwrap_or_else(|| vec![0.0; g.n()]);
    let data = lift_classical(&g, &theta, None)?;
    let m = build_generator(&data)?;
    let total: f64 = pv.iter().sum();
    let rho = ComplexMatrix::diag_real(&pv.iter().map(|x| x / total).collect::<Vec<_>>());
    let s = override_state(ctx.opts, Some(&StateSpec { rho: Some(rho), k: None, beta: None }));
    let state = thermal_state(&s, g.n(), None)?;
    dbc_checks(ctx, r, &m, &state)
}

fn dbc_pf(ctx: &mut Ctx, r: &mut Report, p: &PauliFierzPayload) -> Step {
    let model = pf_model(p)?;
    let data = davies_generator(&model)?;
    let s = override_state(ctx.opts, p.state.as_ref());
    let state = thermal_state(&s, model.d(), Some((&model.sys.k, model.beta)))?;
    dbc_checks(ctx, r, &data.m, &state)
}

#[derive(Serialize)]
struct Rate {
    from: usize,
    to: usize,
    rate: f64,
}

fn davies(ctx: &mut Ctx, r: &mut Report, p: &PauliFierzPayload) -> Step {
    let model = pf_model(p)?;
    let data = davies_generator(&model)?;
    let cert = certify_davies(&model, &data, model.beta)?;
    let scale = 1.0 + data.m.norm_fro();
    let tol8 = ctx.tol("davies", 1e-8);
    r.check("markov M(1) = 0", cert.markov_residual, tol8 * scale);
    r.check("K-invariance", cert.k_invariance_residual, tol8 * scale);
    r.check("covariance νK=(K⊗1+1⊗Y)ν", cert.condi6_residual, tol8);
    r.check("(1/i)(Υ−Υ*) = −ν*ν", cert.nu_identity_residual, ctx.tol("nu_identity", 1e-6));
    r.check("[Υ, K] = 0", cert.upsilon_commutator, ctx.tol("upsilon_commutator", 1e-10));
    if let Some(beta) = model.beta {
        r.check("quadratic balance", cert.condi2_residual.unwrap_or(f64::NAN), tol8);
        let (std, alt) = (cert.dbc_standard.as_ref().unwrap(), cert.dbc_alt.as_ref().unwrap());
        let tol = tol8 * std.tolerance / 1e-8;
        r.check("dbc standard", std.dissipative_residual.max(std.hamiltonian_residual), tol);
        r.check("dbc alternative", alt.dissipative_residual.max(alt.hamiltonian_residual), tol);
        r.check("Gibbs state stationary", cert.gibbs_stationarity.unwrap_or(f64::NAN), tol8);
        r.check("classical dbc of the diagonal", cert.classical_dbc_residual.unwrap_or(f64::NAN), tol8);
        r.flag("ε involution and Y-flip", cert.epsilon_ok == Some(true), 0.0, tol8);
        let cells = 4 * p.cells.max(10);
        let tol = ctx.tol("thermal_condition", 1e-10);
        r.check("thermal reservoir condition", thermal_condition_residual(&model, beta, cells), tol);
        if let Some(ops) = &p.kms_ops {
            for o in ops {
                square("kms_ops entry", o, model.d())?;
            }
            let tol = ctx.tol("kms", 1e-8);
            for t in [0.0, 0.5, 1.0] {
                let k = kms_twopoint_check(&model, beta, t, ops, cells)?;
                r.check(&format!("KMS two-point identity t = {t}"), k.residual, tol);
            }
        }
    }
    let ps: Vec<ComplexMatrix> = model.sys.projections.iter().map(|(_, p)| p.clone()).collect();
    let classical = restrict_to_diagonal(&data.m, &ps)?;
    let mut rates = Vec::new();
    for (j, row) in classical.m.iter().enumerate() {
        for (k, &x) in row.iter().enumerate() {
            if j != k {
                rates.push(Rate { from: j, to: k, rate: x });
            }
        }
    }
    r.data("rates", &rates);
    r.data("orientation", &data.orientation);
    r.data("upsilon", &data.upsilon);
    r.data("y", &data.y);
    r.data("nu", &data.nu.kraus);
    r.data("energies", &model.sys.eigenvalues());
    Ok(())
}

/// Strictly decreasing sequence; the residual is the largest successive ratio.
fn trend_check(r: &mut Report, name: &str, values: &[f64]) {
    if values.len() < 2 {
        return;
    }
    let worst = values.windows(2).map(|w| w[1] / w[0]).fold(0.0f64, f64::max);
    let ok = values.windows(2).all(|w| w[1] < w[0]);
    r.flag(name, ok, worst, 1.0);
}

fn lambdas(opts: &Options, default: &[f64]) -> Result<Vec<f64>, Failure> {
    let l = opts.lambda_list.clone().unwrap_or_else(|| default.to_vec());
    if l.is_empty() || l.iter().any(|x| !(*x > 0.0)) {
        return Err(input("lambda values must be positive"));
    }
    Ok(l)
}

fn wcl_reduced(ctx: &mut Ctx, r: &mut Report, p: &FriedrichsPayload) -> Step {
    let model = friedrichs_model(p)?;
    let rows = reduced_wcl_experiment(&model, p.t, &lambdas(ctx.opts, &p.lambda_schedule)?)?;
    let mut t = Table::new("wcl_reduced", &["lambda", "grid_n", "error"]);
    for row in &rows {
        t.push(vec![row.lambda, row.grid_n as f64, row.error]);
    }
    trend_check(r, "error strictly decreasing", &t.column("error"));
    if let Some(last) = rows.last() {
        r.check("final error", last.error, ctx.tol("final_error", 0.05));
    }
    r.table(t);
    Ok(())
}

fn wcl_reduced_pf(ctx: &mut Ctx, r: &mut Report, p: &PauliFierzPayload) -> Step {
    let model = pf_model(p)?;
    let d = model.d();
    let a = p.observable.clone().unwrap_or_else(|| ComplexMatrix::identity(d));
    square("observable", &a, d)?;
    let n_max = ctx.opts.nmax.unwrap_or(p.n_max);
    let rows = reduced_wcl_pf_experiment(&model, &lambdas(ctx.opts, &p.lambda_schedule)?, p.t, &a, p.cells, n_max)?;
    let mut t = Table::new("wcl_reduced_pf", &["lambda", "modes", "fock_dim", "error"]);
    for row in &rows {
        t.push(vec![row.lambda, row.modes as f64, row.fock_dim as f64, row.error]);
    }
    trend_check(r, "error decreases with lambda (trend only)", &t.column("error"));
    r.table(t);
    Ok(())
}

fn wcl_extended(ctx: &mut Ctx, r: &mut Report, p: &FriedrichsPayload) -> Step {
    let model = friedrichs_model(p)?;
    let mut opts = ExtendedOptions::default();
    if let Some(e) = &p.extended {
        opts.du = e.du.unwrap_or(opts.du);
        opts.n_ref = e.n_ref.unwrap_or(opts.n_ref);
        opts.window = e.window.unwrap_or(opts.window);
    }
    let rows = extended_wcl_experiment(&model, p.t, p.t0, &lambdas(ctx.opts, &p.lambda_schedule)?, &opts)?;
    let mut t = Table::new(
        "wcl_extended",
        &["lambda", "grid_n", "error", "isometry_residual", "projection_residual"],
    );
    for row in &rows {
        t.push(vec![row.lambda, row.grid_n as f64, row.error, row.isometry_residual, row.projection_residual]);
    }
    trend_check(r, "error strictly decreasing", &t.column("error"));
    let iso = t.column("isometry_residual").into_iter().chain(t.column("projection_residual")).fold(0.0, f64::max);
    r.check("J_λ partial isometry", iso, ctx.tol("isometry", 1e-10));
    r.table(t);
    Ok(())
}

fn toy(ctx: &mut Ctx, r: &mut Report, p: &ToyPayload) -> Step {
    let d = p.upsilon.rows();
    square("upsilon", &p.upsilon, d)?;
    let mut t = Table::new(
        "toy_dilation",
        if p.resolvent_z.is_some() {
            &["r", "n", "t", "error", "resolvent_residual"]
        } else {
            &["r", "n", "t", "error"]
        },
    );
    for g in grids(ctx.opts, &p.grids)? {
        let dil = match &p.nu {
            Some(nu) => {
                if nu.cols() != d {
                    return Err(input(format!("nu must have {d} columns")));
                }
                build_zr_with_nu(&p.upsilon, nu, &g)
            }
            None => build_zr(&p.upsilon, &g)?,
        };
        let mut row = vec![g.b, g.n as f64, p.t, dilation_check(&dil, p.t)?];
        if let Some([re, im]) = p.resolvent_z {
            row.push(resolvent_compare(&dil, C64::new(re, im))?);
        }
        t.push(row);
    }
    trend_check(r, "dilation error strictly decreasing", &t.column("error"));
    if p.resolvent_z.is_some() {
        trend_check(r, "resolvent residual strictly decreasing", &t.column("resolvent_residual"));
    }
    r.table(t);
    Ok(())
}

fn langevin(ctx: &mut Ctx, r: &mut Report, p: &LangevinPayload) -> Step {
    let d = p.upsilon.rows();
    square("upsilon", &p.upsilon, d)?;
    let a = p.observable.clone().unwrap_or_else(|| ComplexMatrix::identity(d));
    square("observable", &a, d)?;
    let n_max = ctx.opts.nmax.unwrap_or(p.n_max);
    let grids = grids(ctx.opts, &p.grids)?;
    let rows = langevin_ladder(&p.upsilon, &p.nu, &grids, n_max, p.t, &a)?;
    let mut t = Table::new("langevin", &["r", "n", "n_max", "fock_dim", "err_semigroup", "err_cp"]);
    for row in &rows {
        t.push(vec![row.r, row.n as f64, row.n_max as f64, row.fock_dim as f64, row.err_semigroup, row.err_cp]);
    }
    trend_check(r, "semigroup error strictly decreasing", &t.column("err_semigroup"));
    trend_check(r, "c.p. error strictly decreasing", &t.column("err_cp"));
    r.table(t);
    match (&p.k, &p.y) {
        (Some(k), Some(y)) => {
            let gen = build_langevin_z(&p.upsilon, &p.nu, &grids[0], n_max)?;
            let e = total_energy(k, y, &gen)?;
            r.check("[E, Z] = 0", commutation_residual(&e.e, &gen.z), ctx.tol("commutation", 1e-10));
        }
        (None, None) => {}
        _ => return Err(input("total energy needs both `k` and `y`")),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_codes_follow_the_variant_chain() {
        assert_eq!(error_code("Friedrichs(GridTooCoarse { difference: 1.0 })"), "friedrichs.grid_too_coarse");
        assert_eq!(error_code("NotThermal { residual: 0.1 }"), "not_thermal");
        assert_eq!(error_code("Matrix(Singular)"), "matrix.singular");
        assert_eq!(error_code("InvalidModel(\"x\")"), "invalid_model");
        assert_eq!(error_code("oops"), "error");
    }
}
