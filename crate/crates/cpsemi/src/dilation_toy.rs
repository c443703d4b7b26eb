//! Unitary dilations of contraction semigroups e^{−itΥ} through cut-off generators Z_r.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrixcore::{expm, herm_eig, ComplexMatrix, HermEig, MatrixError, C64, I};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ToyError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("Υ is not dissipative (min eigenvalue of i(Υ−Υ*) is {min_eigenvalue:.3e})")]
    NotDissipative { min_eigenvalue: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("Im z must be positive (got {0})")]
    ImZNotPositive(f64),
    #[error("scale {0} is incompatible with the grid")]
    IncompatibleScale(f64),
    #[error("S is not unitary (residual {0:.3e})")]
    NotUnitary(f64),
}

/// Midpoint grid on an interval; the symmetric case [−r, r] with odd n contains x = 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReservoirGrid {
    pub a: f64,
    pub b: f64,
    pub n: usize,
}

impl ReservoirGrid {
    pub fn symmetric(r: f64, n: usize) -> Result<Self, ToyError> {
        if n % 2 == 0 {
            return Err(ToyError::InvalidGrid(format!("point count {n} must be odd")));
        }
        Self::interval(-r, r, n)
    }

    /// Asymmetric cut-off [a, b]; nothing is asserted about its limit.
    pub fn interval(a: f64, b: f64, n: usize) -> Result<Self, ToyError> {
        if n == 0 || !(b > a) || !a.is_finite() || !b.is_finite() {
            return Err(ToyError::InvalidGrid(format!("[{a}, {b}] with {n} points")));
        }
        Ok(ReservoirGrid { a, b, n })
    }

    pub fn dx(&self) -> f64 {
        (self.b - self.a) / self.n as f64
    }

    pub fn r(&self) -> f64 {
        (self.b - self.a) / 2.0
    }

    pub fn points(&self) -> Vec<f64> {
        let dx = self.dx();
        let c = (self.n as f64 - 1.0) / 2.0;
        let mid = (self.a + self.b) / 2.0;
        (0..self.n).map(|i| mid + (i as f64 - c) * dx).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        vec![self.dx(); self.n]
    }
}

#[derive(Clone, Debug)]
pub struct ToyDilation {
    pub upsilon: ComplexMatrix,
    pub nu: ComplexMatrix,
    pub grid: ReservoirGrid,
    /// Hermitian generator on 𝒦 ⊕ (𝔥 ⊗ grid); reservoir index = h·n + i.
    pub z: ComplexMatrix,
}

impl ToyDilation {
    pub fn d(&self) -> usize {
        self.upsilon.rows()
    }

    pub fn h_dim(&self) -> usize {
        self.nu.rows()
    }

    pub fn dim(&self) -> usize {
        self.z.rows()
    }

    pub fn k_indices(&self) -> Vec<usize> {
        (0..self.d()).collect()
    }
}

/// ν with ν*ν = i(Υ − Υ*), rows only for the nonzero eigenvalues.
pub fn noise_factor(upsilon: &ComplexMatrix) -> Result<(usize, ComplexMatrix), ToyError> {
    let p = (upsilon - &upsilon.adjoint()).scale(I);
    let e = herm_eig(&p.hermitian_part())?;
    let scale = 1.0 + upsilon.norm_fro();
    let min = e.values.first().copied().unwrap_or(0.0);
    if min < -1e-12 * scale {
        return Err(ToyError::NotDissipative { min_eigenvalue: min });
    }
    let keep: Vec<usize> = (0..e.dim()).filter(|&m| e.values[m] > 1e-12 * scale).collect();
    let d = upsilon.rows();
    let nu = ComplexMatrix::from_fn(keep.len(), d, |r, c| e.vectors[(c, keep[r])].conj() * e.values[keep[r]].sqrt());
    Ok((keep.len(), nu))
}

/// Coupling column block (reservoir × d): (2π)^{−1/2} √Δx ν[j,:] at index j·n + i.
pub fn coupling_block(nu: &ComplexMatrix, grid: &ReservoirGrid) -> ComplexMatrix {
    let n = grid.n;
    let w = (grid.dx() / (2.0 * PI)).sqrt();
    ComplexMatrix::from_fn(nu.rows() * n, nu.cols(), |r, c| nu[(r / n, c)] * w)
}

pub fn build_zr(upsilon: &ComplexMatrix, grid: &ReservoirGrid) -> Result<ToyDilation, ToyError> {
    let (_, nu) = noise_factor(upsilon)?;
    Ok(build_zr_with_nu(upsilon, &nu, grid))
}

/// Z_r for an explicitly given ν (h×d); no dissipativity check.
pub fn build_zr_with_nu(upsilon: &ComplexMatrix, nu: &ComplexMatrix, grid: &ReservoirGrid) -> ToyDilation {
    let d = upsilon.rows();
    let h = nu.rows();
    let n = grid.n;
    let dim = d + h * n;
    let mut z = ComplexMatrix::zeros(dim, dim);
    z.set_block(0, 0, &upsilon.hermitian_part());
    let c = coupling_block(nu, grid);
    z.set_block(d, 0, &c);
    z.set_block(0, d, &c.adjoint());
    let pts = grid.points();
    for j in 0..h {
        for (i, x) in pts.iter().enumerate() {
            z[(d + j * n + i, d + j * n + i)] = C64::new(*x, 0.0);
        }
    }
    ToyDilation {
        upsilon: upsilon.clone(),
        nu: nu.clone(),
        grid: grid.clone(),
        z,
    }
}

/// I_𝒦* e^{−itZ} I_𝒦 from a precomputed eigendecomposition of Z.
pub fn compressed_evolution(eig: &HermEig, d: usize, t: f64) -> ComplexMatrix {
    let idx: Vec<usize> = (0..d).collect();
    eig.apply_fn_block(|x| (-I * (t * x)).exp(), &idx, &idx)
}

/// ‖I_𝒦* e^{−itZ_r} I_𝒦 − e^{−itΥ}‖
pub fn dilation_check(dil: &ToyDilation, t: f64) -> Result<f64, ToyError> {
    let eig = herm_eig(&dil.z)?;
    Ok(dilation_check_with(&eig, dil, t))
}

pub fn dilation_check_with(eig: &HermEig, dil: &ToyDilation, t: f64) -> f64 {
    let lhs = compressed_evolution(eig, dil.d(), t);
    let rhs = expm(&dil.upsilon.scale(-I * t));
    (&lhs - &rhs).norm_fro()
}

/// Residual between (z − Z_r)⁻¹ and the block resolvent formula with the cut-off level shift
/// Υ_r(z) = ½(Υ+Υ*) + (ν*ν/2π) ln((z−a)/(z−b)).
pub fn resolvent_compare(dil: &ToyDilation, z: C64) -> Result<f64, ToyError> {
    if z.im <= 0.0 {
        return Err(ToyError::ImZNotPositive(z.im));
    }
    let d = dil.d();
    let dim = dil.dim();
    let direct = (&ComplexMatrix::identity(dim).scale(z) - &dil.z).inverse()?;

    let nn = &dil.nu.adjoint() * &dil.nu;
    let log = ((z - dil.grid.a) / (z - dil.grid.b)).ln();
    let ups_r = &dil.upsilon.hermitian_part() + &nn.scale(log / (2.0 * PI));
    let q = (&ComplexMatrix::identity(d).scale(z) - &ups_r).inverse()?;
    let c = coupling_block(&dil.nu, &dil.grid);
    let rdiag: Vec<C64> = (d..dim).map(|i| (z - dil.z[(i, i)]).inv()).collect();
    let rc = ComplexMatrix::from_fn(dim - d, d, |i, j| rdiag[i] * c[(i, j)]);
    let upper = &q * &rc.transpose();
    let lower = &rc * &q;
    let inner = &lower * &rc.transpose();
    let mut formula = ComplexMatrix::zeros(dim, dim);
    formula.set_block(0, 0, &q);
    formula.set_block(0, d, &upper);
    formula.set_block(d, 0, &lower);
    let mut res = inner;
    for (i, r) in rdiag.iter().enumerate() {
        res[(i, i)] += r;
    }
    formula.set_block(d, d, &res);
    Ok((&direct - &formula).norm_fro())
}

/// λ² or λ⁻² must be an integer so the scaled grid nests with the original.
fn check_scale(lambda: f64) -> Result<(), ToyError> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(ToyError::IncompatibleScale(lambda));
    }
    let near_int = |x: f64| (x - x.round()).abs() <= 1e-12 * x.max(1.0) && x.round() >= 1.0;
    if near_int(lambda * lambda) || near_int(1.0 / (lambda * lambda)) {
        Ok(())
    } else {
        Err(ToyError::IncompatibleScale(lambda))
    }
}

/// ‖Z − λ⁻² j_λ* Z_λ j_λ‖ with Z_λ built on the grid scaled by λ².
pub fn scaling_covariance_check(dil: &ToyDilation, lambda: f64) -> Result<f64, ToyError> {
    check_scale(lambda)?;
    let l2 = lambda * lambda;
    let target = ReservoirGrid::interval(dil.grid.a * l2, dil.grid.b * l2, dil.grid.n)?;
    let d = dil.d();
    let scaled = build_zr_with_nu(&dil.upsilon.scale_real(l2), &dil.nu.scale_real(lambda), &target);
    // j_λ maps grid point i to scaled grid point i, and fixes 𝒦.
    let back = scaled.z.scale_real(1.0 / l2);
    debug_assert_eq!(back.rows(), d + dil.h_dim() * dil.grid.n);
    Ok((&dil.z - &back).norm_fro())
}

/// Centered unitary DFT F_kj = n^{−1/2} exp(−2πi(k−c)(j−c)/n), c = (n−1)/2.
pub fn centered_dft(n: usize) -> ComplexMatrix {
    let c = (n as f64 - 1.0) / 2.0;
    let s = 1.0 / (n as f64).sqrt();
    ComplexMatrix::from_fn(n, n, |k, j| {
        let ph = -2.0 * PI * (k as f64 - c) * (j as f64 - c) / n as f64;
        C64::new(0.0, ph).exp() * s
    })
}

/// γ(S) = 1⊗(1−P) + S⊗P on 𝔥 ⊗ grid, P the projection onto positive τ.
pub fn gamma_s(s: &ComplexMatrix, n: usize) -> ComplexMatrix {
    let f = centered_dft(n);
    let c = (n as f64 - 1.0) / 2.0;
    let mask: Vec<f64> = (0..n).map(|k| if k as f64 - c > 0.0 { 1.0 } else { 0.0 }).collect();
    let fd = ComplexMatrix::from_fn(n, n, |k, j| f[(k, j)] * mask[k]);
    let p = &f.adjoint() * &fd;
    let h = s.rows();
    let one_minus_p = &ComplexMatrix::identity(n) - &p;
    let mut g = ComplexMatrix::zeros(h * n, h * n);
    for a in 0..h {
        for b in 0..h {
            let coeff = s[(a, b)];
            for i in 0..n {
                for j in 0..n {
                    let mut v = coeff * p[(i, j)];
                    if a == b {
                        v += one_minus_p[(i, j)];
                    }
                    g[(a * n + i, b * n + j)] = v;
                }
            }
        }
    }
    g
}

/// (1 ⊕ γ(S))* Z_r (1 ⊕ γ(S))
pub fn toy_quadratic_conjugation(dil: &ToyDilation, s: &ComplexMatrix) -> Result<ToyDilation, ToyError> {
    let h = dil.h_dim();
    if s.shape() != (h, h) {
        return Err(MatrixError::DimensionMismatch {
            op: "toy_quadratic_conjugation",
            expected: format!("{h}x{h}"),
            found: format!("{}x{}", s.rows(), s.cols()),
        }
        .into());
    }
    let unit = (&(&s.adjoint() * s) - &ComplexMatrix::identity(h)).norm_fro();
    if unit > 1e-10 {
        return Err(ToyError::NotUnitary(unit));
    }
    let d = dil.d();
    let mut w = ComplexMatrix::identity(dil.dim());
    w.set_block(d, d, &gamma_s(s, dil.grid.n));
    let z = &(&w.adjoint() * &dil.z) * &w;
    Ok(ToyDilation {
        z: z.hermitian_part(),
        ..dil.clone()
    })
}
