//! Friedrichs operators, the level shift operator and weak coupling limit experiments.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dilation_toy::{build_zr_with_nu, ReservoirGrid, ToyError};
use crate::matrixcore::{expm_hermitian, herm_eig, ComplexMatrix, HermEig, MatrixError, C64, I};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FriedrichsError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Toy(#[from] ToyError),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("principal value quadrature not converged (halving difference {difference:.3e})")]
    GridTooCoarse { difference: f64 },
    #[error("window of half-width {half_width} does not fit in the interval around {k} at lambda {lambda}")]
    WindowOverflow { lambda: f64, k: f64, half_width: f64 },
}

/// Scalar coupling profile; the coupling on an interval is v(x) = profile(x)·op.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Flat {
        g: f64,
    },
    /// |v(x)|² = g² γ² / ((x−center)² + γ²)
    Lorentzian {
        g: f64,
        gamma: f64,
        center: f64,
    },
    /// Linear interpolation through (x, v) samples; zero outside.
    Samples {
        x: Vec<f64>,
        v: Vec<f64>,
    },
    /// Emission branch: base(x)·√(1+n_β(x)); absorption branch: base(−x)·√n_β(−x).
    ThermalWeighted {
        base: Box<Profile>,
        beta: f64,
        absorption: bool,
    },
}

/// Bose occupation (e^{βx} − 1)⁻¹; zero for β = ∞.
pub fn bose(beta: f64, x: f64) -> f64 {
    if beta.is_infinite() {
        return 0.0;
    }
    1.0 / (beta * x).exp_m1()
}

impl Profile {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Profile::Flat { g } => *g,
            Profile::Lorentzian { g, gamma, center } => g * gamma / ((x - center).powi(2) + gamma * gamma).sqrt(),
            Profile::Samples { x: xs, v } => {
                if xs.is_empty() || x < xs[0] || x > xs[xs.len() - 1] {
                    return 0.0;
                }
                let i = xs.partition_point(|&p| p <= x).min(xs.len() - 1).max(1);
                let (x0, x1) = (xs[i - 1], xs[i]);
                if x1 == x0 {
                    return v[i];
                }
                v[i - 1] + (v[i] - v[i - 1]) * (x - x0) / (x1 - x0)
            }
            Profile::ThermalWeighted { base, beta, absorption } => {
                if *absorption {
                    base.eval(-x) * bose(*beta, -x).sqrt()
                } else {
                    base.eval(x) * (1.0 + bose(*beta, x)).sqrt()
                }
            }
        }
    }

    fn validate(&self) -> Result<(), String> {
        match self {
            Profile::Flat { g } if !g.is_finite() => Err("flat profile g must be finite".into()),
            Profile::Lorentzian { gamma, .. } if !(*gamma > 0.0) => Err("lorentzian width must be positive".into()),
            Profile::Samples { x, v } => {
                if x.len() != v.len() || x.len() < 2 {
                    return Err("samples need matching x and v with at least two points".into());
                }
                if x.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err("sample abscissae must increase".into());
                }
                Ok(())
            }
            Profile::ThermalWeighted { base, beta, .. } => {
                if !(*beta > 0.0) {
                    return Err("thermal profile needs beta > 0".into());
                }
                base.validate()
            }
            _ => Ok(()),
        }
    }
}

/// Reservoir interval I_k around the eigenvalue k with fiber 𝔥_k = ℂ^{op.rows()}.
#[derive(Clone, Debug, PartialEq)]
pub struct Interval {
    pub k: f64,
    pub a: f64,
    pub b: f64,
    pub profile: Profile,
    /// op: 𝒦 → 𝔥_k
    pub op: ComplexMatrix,
}

impl Interval {
    pub fn fiber(&self) -> usize {
        self.op.rows()
    }

    /// v(x): 𝒦 → 𝔥_k
    pub fn v(&self, x: f64) -> ComplexMatrix {
        self.op.scale_real(self.profile.eval(x))
    }

    /// (v*v)(x)
    pub fn density(&self, x: f64) -> ComplexMatrix {
        let f = self.profile.eval(x);
        (&self.op.adjoint() * &self.op).scale_real(f * f)
    }
}

#[derive(Clone, Debug)]
pub struct FriedrichsModel {
    pub k: ComplexMatrix,
    pub eig: HermEig,
    pub intervals: Vec<Interval>,
}

/// Row space of the spectral projection of K at `k` as a fiber operator.
pub fn eigen_rows(k_mat: &ComplexMatrix, k: f64) -> Result<ComplexMatrix, FriedrichsError> {
    let e = herm_eig(k_mat)?;
    let tol = 1e-8 * (1.0 + e.max_abs_value());
    let cols: Vec<usize> = (0..e.dim()).filter(|&m| (e.values[m] - k).abs() <= tol).collect();
    if cols.is_empty() {
        return Err(FriedrichsError::InvalidModel(format!("{k} is not an eigenvalue of K")));
    }
    Ok(ComplexMatrix::from_fn(cols.len(), e.dim(), |r, c| e.vectors[(c, cols[r])].conj()))
}

impl FriedrichsModel {
    pub fn new(k: ComplexMatrix, intervals: Vec<Interval>) -> Result<Self, FriedrichsError> {
        let eig = herm_eig(&k)?;
        let d = k.rows();
        let tol = 1e-8 * (1.0 + eig.max_abs_value());
        let spectrum: Vec<f64> = eig.projections().iter().map(|p| p.value).collect();
        for (i, iv) in intervals.iter().enumerate() {
            if !(iv.a < iv.k && iv.k < iv.b) {
                return Err(FriedrichsError::InvalidModel(format!(
                    "interval {i}: k = {} is not inside ({}, {})",
                    iv.k, iv.a, iv.b
                )));
            }
            if !spectrum.iter().any(|s| (s - iv.k).abs() <= tol) {
                return Err(FriedrichsError::InvalidModel(format!("interval {i}: {} is not an eigenvalue of K", iv.k)));
            }
            let inside = spectrum.iter().filter(|&&s| iv.a < s && s < iv.b).count();
            if inside != 1 {
                return Err(FriedrichsError::InvalidModel(format!(
                    "interval {i} must contain exactly one eigenvalue of K, found {inside}"
                )));
            }
            if iv.op.cols() != d || iv.op.rows() == 0 {
                return Err(FriedrichsError::InvalidModel(format!("interval {i}: coupling operator must be h x {d}")));
            }
            iv.profile.validate().map_err(|m| FriedrichsError::InvalidModel(format!("interval {i}: {m}")))?;
            for (j, other) in intervals.iter().enumerate().skip(i + 1) {
                if iv.a < other.b && other.a < iv.b {
                    return Err(FriedrichsError::InvalidModel(format!("intervals {i} and {j} overlap")));
                }
            }
        }
        Ok(FriedrichsModel { k, eig, intervals })
    }

    /// Single interval per eigenvalue with the default coupling operator (eigenvector rows).
    pub fn with_default_ops(k: ComplexMatrix, spec: Vec<(f64, f64, f64, Profile)>) -> Result<Self, FriedrichsError> {
        let intervals = spec
            .into_iter()
            .map(|(kk, a, b, profile)| {
                Ok(Interval {
                    k: kk,
                    a,
                    b,
                    profile,
                    op: eigen_rows(&k, kk)?,
                })
            })
            .collect::<Result<Vec<_>, FriedrichsError>>()?;
        Self::new(k, intervals)
    }

    pub fn d(&self) -> usize {
        self.k.rows()
    }

    pub fn h_dim(&self) -> usize {
        self.intervals.iter().map(|i| i.fiber()).sum()
    }

    pub fn projection(&self, k: f64) -> ComplexMatrix {
        let tol = 1e-8 * (1.0 + self.eig.max_abs_value());
        self.eig
            .projections()
            .into_iter()
            .find(|p| (p.value - k).abs() <= tol)
            .map(|p| p.projector)
            .unwrap_or_else(|| ComplexMatrix::zeros(self.d(), self.d()))
    }

    /// ν = √(2π) ⊕_k v_k(k) 1_k(K), stacked over intervals (rows), h × d.
    pub fn nu(&self) -> ComplexMatrix {
        let d = self.d();
        let mut out = ComplexMatrix::zeros(self.h_dim(), d);
        let mut row = 0;
        for iv in &self.intervals {
            let block = (&iv.v(iv.k) * &self.projection(iv.k)).scale_real((2.0 * PI).sqrt());
            out.set_block(row, 0, &block);
            row += iv.fiber();
        }
        out
    }
}

pub const DEFAULT_PV_POINTS: usize = 2000;

/// −∫_a^b f(x)/(x−k) dx, principal value with subtraction when k ∈ (a,b).
fn pv_sum(profile: &Profile, a: f64, b: f64, k: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inside = a < k && k < b;
    let fk = if inside { profile.eval(k).powi(2) } else { 0.0 };
    let mut acc = 0.0;
    for i in 0..n {
        let x = a + (i as f64 + 0.5) * h;
        acc += (profile.eval(x).powi(2) - fk) * h / (x - k);
    }
    if inside {
        acc += fk * ((b - k) / (k - a)).ln();
    }
    -acc
}

/// −PV∫_a^b profile(x)²/(x−k) dx on n midpoint cells together with the halving difference
/// |s_n − s_{n/2}| / (1 + |s_n|).
pub fn pv_scalar(profile: &Profile, a: f64, b: f64, k: f64, n: usize) -> (f64, f64) {
    let fine = pv_sum(profile, a, b, k, n);
    let coarse = pv_sum(profile, a, b, k, (n / 2).max(1));
    (fine, (fine - coarse).abs() / (1.0 + fine.abs()))
}

#[derive(Clone, Debug)]
pub struct LevelShift {
    pub upsilon: ComplexMatrix,
    /// Largest halving difference seen in the principal-value quadrature.
    pub quadrature_difference: f64,
}

/// Υ = Σ_k 1_k [ Σ_I −PV∫_I (v*v)(x)/(x−k) dx − iπ (v*v)(k) ] 1_k
pub fn level_shift(model: &FriedrichsModel) -> Result<LevelShift, FriedrichsError> {
    level_shift_with(model, DEFAULT_PV_POINTS)
}

pub fn level_shift_with(model: &FriedrichsModel, n: usize) -> Result<LevelShift, FriedrichsError> {
    let d = model.d();
    let mut ups = ComplexMatrix::zeros(d, d);
    let mut worst = 0.0f64;
    for p in model.eig.projections() {
        let k = p.value;
        let mut block = ComplexMatrix::zeros(d, d);
        for iv in &model.intervals {
            let (value, diff) = pv_scalar(&iv.profile, iv.a, iv.b, k, n);
            worst = worst.max(diff);
            block += &(&iv.op.adjoint() * &iv.op).scale_real(value);
            if iv.a < k && k < iv.b {
                block -= &iv.density(k).scale(I * PI);
            }
        }
        ups += &(&(&p.projector * &block) * &p.projector);
    }
    if worst > 1e-4 {
        return Err(FriedrichsError::GridTooCoarse { difference: worst });
    }
    Ok(LevelShift {
        upsilon: ups,
        quadrature_difference: worst,
    })
}

/// ‖(1/i)(Υ−Υ*) + ν*ν‖
pub fn nu_identity_residual(upsilon: &ComplexMatrix, nu: &ComplexMatrix) -> f64 {
    let lhs = (upsilon - &upsilon.adjoint()).scale(-I);
    (&lhs + &(&nu.adjoint() * nu)).norm_fro()
}

/// Grid points k + h·j of one interval whose cells lie inside (a, b).
#[derive(Clone, Debug)]
pub struct IntervalGrid {
    pub interval: usize,
    pub j_min: i64,
    pub points: Vec<f64>,
    pub spacing: f64,
    /// Offset of this interval's first reservoir index (after the 𝒦 block).
    pub offset: usize,
    pub fiber: usize,
}

impl IntervalGrid {
    /// Reservoir index (relative to the 𝒦 block) of fiber f at point k + h·j.
    pub fn index(&self, f: usize, j: i64) -> Option<usize> {
        let local = j - self.j_min;
        if local < 0 || local as usize >= self.points.len() || f >= self.fiber {
            return None;
        }
        Some(self.offset + f * self.points.len() + local as usize)
    }
}

#[derive(Clone, Debug)]
pub struct PhysicalGrid {
    pub blocks: Vec<IntervalGrid>,
    pub reservoir_dim: usize,
}

pub fn aligned_grid(model: &FriedrichsModel, spacing: f64) -> Result<PhysicalGrid, FriedrichsError> {
    if !(spacing > 0.0) {
        return Err(FriedrichsError::InvalidModel(format!("grid spacing {spacing} must be positive")));
    }
    let mut blocks = Vec::new();
    let mut offset = 0;
    for (idx, iv) in model.intervals.iter().enumerate() {
        let j_min = ((iv.a - iv.k) / spacing + 0.5 - 1e-9).ceil() as i64;
        let j_max = ((iv.b - iv.k) / spacing - 0.5 + 1e-9).floor() as i64;
        if j_max < j_min {
            return Err(FriedrichsError::InvalidModel(format!("interval {idx} is narrower than one grid cell")));
        }
        let points: Vec<f64> = (j_min..=j_max).map(|j| iv.k + spacing * j as f64).collect();
        let n = points.len();
        blocks.push(IntervalGrid {
            interval: idx,
            j_min,
            points,
            spacing,
            offset,
            fiber: iv.fiber(),
        });
        offset += n * iv.fiber();
    }
    Ok(PhysicalGrid {
        blocks,
        reservoir_dim: offset,
    })
}

/// H_λ = [K, λV*; λV, diag(x)] on 𝒦 ⊕ (⊕_k 𝔥_k ⊗ grid_k).
pub fn build_friedrichs(model: &FriedrichsModel, lambda: f64, grid: &PhysicalGrid) -> ComplexMatrix {
    let d = model.d();
    let dim = d + grid.reservoir_dim;
    let mut h = ComplexMatrix::zeros(dim, dim);
    h.set_block(0, 0, &model.k.hermitian_part());
    for blk in &grid.blocks {
        let iv = &model.intervals[blk.interval];
        let w = blk.spacing.sqrt() * lambda;
        let n = blk.points.len();
        for (i, &x) in blk.points.iter().enumerate() {
            let v = iv.v(x);
            for f in 0..blk.fiber {
                let r = d + blk.offset + f * n + i;
                h[(r, r)] = C64::new(x, 0.0);
                for c in 0..d {
                    let val = v[(f, c)] * w;
                    h[(r, c)] = val;
                    h[(c, r)] = val.conj();
                }
            }
        }
    }
    h
}

#[derive(Clone, Debug, Serialize)]
pub struct WclRow {
    pub lambda: f64,
    pub grid_n: usize,
    pub error: f64,
}

/// e_λ = ‖e^{itK/λ²} I* e^{−itH_λ/λ²} I − e^{−itΥ}‖ with grid spacing λ⁴.
pub fn reduced_wcl_experiment(model: &FriedrichsModel, t: f64, lambdas: &[f64]) -> Result<Vec<WclRow>, FriedrichsError> {
    let ups = level_shift(model)?.upsilon;
    let d = model.d();
    let target = crate::matrixcore::expm(&ups.scale(-I * t));
    let idx: Vec<usize> = (0..d).collect();
    let mut rows = Vec::new();
    for &lambda in lambdas {
        let l2 = lambda * lambda;
        let grid = aligned_grid(model, l2 * l2)?;
        let h = build_friedrichs(model, lambda, &grid);
        let eig = herm_eig(&h)?;
        let comp = eig.apply_fn_block(|x| (-I * (t * x / l2)).exp(), &idx, &idx);
        let free = expm_hermitian(&model.k, I * (t / l2))?;
        let error = (&(&free * &comp) - &target).norm_fro();
        rows.push(WclRow {
            lambda,
            grid_n: grid.reservoir_dim,
            error,
        });
    }
    Ok(rows)
}

/// Asymptotic reference data for the extended limit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExtendedOptions {
    /// Reference grid spacing Δu.
    pub du: f64,
    /// Reference grid point count (odd).
    pub n_ref: usize,
    /// Half-width of the compared window in asymptotic energy units.
    pub window: f64,
}

impl Default for ExtendedOptions {
    fn default() -> Self {
        ExtendedOptions {
            du: 0.05,
            n_ref: 1601,
            window: 2.0,
        }
    }
}

impl ExtendedOptions {
    /// Window grid: m = 2·round(window/du) + 1 points, represented with r = mΔu/2.
    pub fn window_grid(&self) -> Result<ReservoirGrid, ToyError> {
        let m = 2 * (self.window / self.du).round() as usize + 1;
        ReservoirGrid::symmetric(m as f64 * self.du / 2.0, m)
    }

    pub fn reference_grid(&self) -> Result<ReservoirGrid, ToyError> {
        ReservoirGrid::symmetric(self.n_ref as f64 * self.du / 2.0, self.n_ref)
    }
}

/// J_λ restricted to 𝒦 ⊕ (𝔥 ⊗ window): column (fiber f of interval k, window point u_i = Δu·m_i)
/// maps to the physical point k + λ²u_i.
#[derive(Clone, Debug)]
pub struct JLambda {
    /// Physical index (including the 𝒦 block) of each asymptotic column.
    pub targets: Vec<usize>,
    pub physical_dim: usize,
}

impl JLambda {
    pub fn matrix(&self) -> ComplexMatrix {
        let mut j = ComplexMatrix::zeros(self.physical_dim, self.targets.len());
        for (c, &r) in self.targets.iter().enumerate() {
            j[(r, c)] = C64::new(1.0, 0.0);
        }
        j
    }

    /// (‖J*J − 1‖, ‖(JJ*)² − JJ*‖)
    pub fn isometry_residuals(&self) -> (f64, f64) {
        let j = self.matrix();
        let jtj = &j.adjoint() * &j;
        let p = &j * &j.adjoint();
        (
            (&jtj - &ComplexMatrix::identity(self.targets.len())).norm_fro(),
            (&(&p * &p) - &p).norm_fro(),
        )
    }
}

/// Physical grid with spacing λ²Δu and the map J_λ from the asymptotic window into it.
pub fn build_j_lambda(
    model: &FriedrichsModel,
    opts: &ExtendedOptions,
    lambda: f64,
) -> Result<(PhysicalGrid, JLambda), FriedrichsError> {
    let l2 = lambda * lambda;
    let grid = aligned_grid(model, l2 * opts.du)?;
    let window = opts.window_grid()?;
    let m = window.n as i64;
    let half = (m - 1) / 2;
    let d = model.d();
    let mut targets: Vec<usize> = (0..d).collect();
    for blk in &grid.blocks {
        let iv = &model.intervals[blk.interval];
        let hw = l2 * (half as f64 + 0.5) * opts.du;
        if !(iv.a <= iv.k - hw && iv.k + hw <= iv.b) {
            return Err(FriedrichsError::WindowOverflow {
                lambda,
                k: iv.k,
                half_width: hw,
            });
        }
        for f in 0..blk.fiber {
            for j in -half..=half {
                let idx = blk.index(f, j).ok_or(FriedrichsError::WindowOverflow {
                    lambda,
                    k: iv.k,
                    half_width: hw,
                })?;
                targets.push(d + idx);
            }
        }
    }
    Ok((
        grid.clone(),
        JLambda {
            targets,
            physical_dim: d + grid.reservoir_dim,
        },
    ))
}

#[derive(Clone, Debug, Serialize)]
pub struct ExtendedRow {
    pub lambda: f64,
    pub grid_n: usize,
    pub error: f64,
    pub isometry_residual: f64,
    pub projection_residual: f64,
}

/// Window indices of the asymptotic reference reservoir (after the 𝒦 block).
fn reference_window(model: &FriedrichsModel, opts: &ExtendedOptions) -> Result<Vec<usize>, FriedrichsError> {
    let n = opts.n_ref;
    let m = opts.window_grid()?.n;
    if m > n {
        return Err(FriedrichsError::InvalidModel("window exceeds the reference grid".into()));
    }
    let c = (n - 1) / 2;
    let half = (m - 1) / 2;
    let d = model.d();
    let mut idx: Vec<usize> = (0..d).collect();
    for f in 0..model.h_dim() {
        for i in (c - half)..=(c + half) {
            idx.push(d + f * n + i);
        }
    }
    Ok(idx)
}

/// Compressed e^{itH0} e^{−i(t−t0)H} e^{−it0H0} for H0 = K0 ⊕ diag(x) at the given indices.
fn interaction_block(
    eig: &HermEig,
    idx: &[usize],
    k0: &ComplexMatrix,
    diag: &[f64],
    d: usize,
    t: f64,
    t0: f64,
    time_scale: f64,
) -> Result<ComplexMatrix, FriedrichsError> {
    let s = time_scale;
    let b = eig.apply_fn_block(|x| (-I * ((t - t0) * x / s)).exp(), idx, idx);
    let n = idx.len();
    let left_k = expm_hermitian(k0, I * (t / s))?;
    let right_k = expm_hermitian(k0, -I * (t0 / s))?;
    let mut left = ComplexMatrix::zeros(n, n);
    let mut right = ComplexMatrix::zeros(n, n);
    left.set_block(0, 0, &left_k);
    right.set_block(0, 0, &right_k);
    for r in d..n {
        let x = diag[idx[r]];
        left[(r, r)] = (I * (t * x / s)).exp();
        right[(r, r)] = (-I * (t0 * x / s)).exp();
    }
    Ok(&(&left * &b) * &right)
}

/// e_λ = ‖J_λ* e^{itH0/λ²} e^{−i(t−t0)H_λ/λ²} e^{−it0H0/λ²} J_λ − e^{itZ0} e^{−i(t−t0)Z} e^{−it0Z0}‖
/// on 𝒦 ⊕ (𝔥 ⊗ window), Z0 = 0 ⊕ diag(u).
pub fn extended_wcl_experiment(
    model: &FriedrichsModel,
    t: f64,
    t0: f64,
    lambdas: &[f64],
    opts: &ExtendedOptions,
) -> Result<Vec<ExtendedRow>, FriedrichsError> {
    let ups = level_shift(model)?.upsilon;
    let nu = model.nu();
    let d = model.d();
    let dil = build_zr_with_nu(&ups, &nu, &opts.reference_grid()?);
    let ref_idx = reference_window(model, opts)?;
    let ref_diag: Vec<f64> = (0..dil.dim()).map(|i| if i < d { 0.0 } else { dil.z[(i, i)].re }).collect();
    let reference = if dil.h_dim() == 0 {
        ComplexMatrix::identity(ref_idx.len())
    } else {
        let eig = herm_eig(&dil.z)?;
        interaction_block(&eig, &ref_idx, &ComplexMatrix::zeros(d, d), &ref_diag, d, t, t0, 1.0)?
    };
    let mut rows = Vec::new();
    for &lambda in lambdas {
        let (grid, j) = build_j_lambda(model, opts, lambda)?;
        let (iso, proj) = j.isometry_residuals();
        let h = build_friedrichs(model, lambda, &grid);
        let diag: Vec<f64> = (0..h.rows()).map(|i| h[(i, i)].re).collect();
        let eig = herm_eig(&h)?;
        let phys = interaction_block(&eig, &j.targets, &model.k, &diag, d, t, t0, lambda * lambda)?;
        rows.push(ExtendedRow {
            lambda,
            grid_n: grid.reservoir_dim,
            error: (&phys - &reference).norm_fro(),
            isometry_residual: iso,
            projection_residual: proj,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dilation_toy::build_zr;

    fn scalar(a: f64, b: f64, g: f64) -> FriedrichsModel {
        FriedrichsModel::with_default_ops(ComplexMatrix::zeros(1, 1), vec![(0.0, a, b, Profile::Flat { g })]).unwrap()
    }

    #[test]
    fn flat_symmetric_level_shift() {
        let ups = level_shift(&scalar(-1.0, 1.0, 0.1)).unwrap().upsilon;
        assert!((ups[(0, 0)] - C64::new(0.0, -PI * 0.01)).norm() < 1e-12);
    }

    #[test]
    fn flat_off_center_level_shift() {
        let g: f64 = 0.1;
        let ups = level_shift(&scalar(-1.0, 3.0, g)).unwrap().upsilon;
        assert!((ups[(0, 0)].re + g * g * 3f64.ln()).abs() < 1e-12);
        assert!((ups[(0, 0)].im + PI * g * g).abs() < 1e-12);
    }

    #[test]
    fn zero_coupling() {
        let m = scalar(-1.0, 1.0, 0.0);
        assert!(level_shift(&m).unwrap().upsilon.is_zero());
        let rows = reduced_wcl_experiment(&m, 1.0, &[0.5]).unwrap();
        assert!(rows[0].error < 1e-12);
    }

    #[test]
    fn lorentzian_identity_and_commutation() {
        let k = ComplexMatrix::diag_real(&[0.0, 1.0]);
        let m = FriedrichsModel::with_default_ops(
            k.clone(),
            vec![
                (0.0, -0.5, 0.5, Profile::Lorentzian { g: 0.2, gamma: 0.3, center: 0.0 }),
                (1.0, 0.5, 1.7, Profile::Flat { g: 0.1 }),
            ],
        )
        .unwrap();
        let ups = level_shift(&m).unwrap().upsilon;
        assert!(nu_identity_residual(&ups, &m.nu()) < 1e-10);
        assert!(crate::matrixcore::commutator(&ups, &k).norm_fro() < 1e-10);
    }

    #[test]
    fn invalid_models_rejected() {
        let z = ComplexMatrix::zeros(1, 1);
        assert!(FriedrichsModel::with_default_ops(z.clone(), vec![(0.0, 0.5, 1.0, Profile::Flat { g: 1.0 })]).is_err());
        let k = ComplexMatrix::diag_real(&[0.0, 1.0]);
        assert!(FriedrichsModel::with_default_ops(k, vec![(0.0, -1.0, 3.0, Profile::Flat { g: 1.0 })]).is_err());
    }

    #[test]
    fn friedrichs_matches_toy_dilation() {
        let (r, n) = (5.0, 51);
        let g = 0.3;
        let model = scalar(-r, r, g);
        let grid = aligned_grid(&model, 2.0 * r / n as f64).unwrap();
        assert_eq!(grid.reservoir_dim, n);
        let h = build_friedrichs(&model, 1.0, &grid);
        let ups = ComplexMatrix::from_fn(1, 1, |_, _| C64::new(0.0, -PI * g * g));
        let toy = build_zr(&ups, &ReservoirGrid::symmetric(r, n).unwrap()).unwrap();
        let diff = ComplexMatrix::from_fn(n + 1, n + 1, |i, j| C64::new(h[(i, j)].norm() - toy.z[(i, j)].norm(), 0.0));
        assert!(diff.norm_fro() < 1e-12);
        assert!(h.hermiticity_deviation() == 0.0);
    }

    #[test]
    fn j_lambda_is_partial_isometry() {
        let model = scalar(-1.0, 1.0, 0.1);
        let (_, j) = build_j_lambda(&model, &ExtendedOptions::default(), 0.3).unwrap();
        let (iso, proj) = j.isometry_residuals();
        assert!(iso < 1e-12 && proj < 1e-12);
        assert!(matches!(
            build_j_lambda(&model, &ExtendedOptions::default(), 0.9),
            Err(FriedrichsError::WindowOverflow { .. })
        ));
    }

    #[test]
    fn extended_at_equal_times_is_identity() {
        let model = scalar(-1.0, 1.0, 0.1);
        let opts = ExtendedOptions {
            du: 0.05,
            n_ref: 201,
            window: 1.0,
        };
        let rows = extended_wcl_experiment(&model, 0.7, 0.7, &[0.5], &opts).unwrap();
        assert!(rows[0].error < 1e-10);
    }
}
