//! Truncated bosonic Fock spaces over discretized modes, regularized Langevin generators
//! and the asymptotic total energy operator.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::cpmap::CpMapData;
use crate::dilation_toy::{ReservoirGrid, ToyError};
use crate::invariance_dbc::covariance_residual;
use crate::lindblad::{build_generator, evolve, LindbladData, LindbladError};
use crate::matrixcore::{commutator, expm, expm_action, ComplexMatrix, MatrixError, SparseMatrix, C64, I};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LangevinError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Lindblad(#[from] LindbladError),
    #[error(transparent)]
    Toy(#[from] ToyError),
    #[error("Fock space dimension {dim} exceeds the cap {cap}")]
    FockTooLarge { dim: usize, cap: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("total energy precondition violated (residual {residual:.3e})")]
    PreconditionViolated { residual: f64 },
}

pub const DEFAULT_FOCK_CAP: usize = 20_000;

/// Number of occupation tuples over `modes` modes with total at most `n_max`, C(m+N, N).
pub fn fock_dimension(modes: usize, n_max: usize) -> f64 {
    (1..=n_max).fold(1.0, |acc, k| acc * (modes + k) as f64 / k as f64)
}

/// Occupation-number basis with Σ n_i ≤ N_max, lexicographically ordered.
#[derive(Clone, Debug)]
pub struct TruncatedFock {
    pub modes: usize,
    pub n_max: usize,
    pub basis: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
}

fn enumerate(prefix: &mut Vec<u8>, modes: usize, left: usize, out: &mut Vec<Vec<u8>>) {
    if prefix.len() == modes {
        out.push(prefix.clone());
        return;
    }
    for n in 0..=left {
        prefix.push(n as u8);
        enumerate(prefix, modes, left - n, out);
        prefix.pop();
    }
}

impl TruncatedFock {
    pub fn new(modes: usize, n_max: usize) -> Result<Self, LangevinError> {
        Self::with_cap(modes, n_max, DEFAULT_FOCK_CAP)
    }

    pub fn with_cap(modes: usize, n_max: usize, cap: usize) -> Result<Self, LangevinError> {
        let dim = fock_dimension(modes, n_max);
        if dim > cap as f64 || n_max > u8::MAX as usize {
            return Err(LangevinError::FockTooLarge {
                dim: dim.min(usize::MAX as f64) as usize,
                cap,
            });
        }
        let mut basis = Vec::with_capacity(dim as usize);
        enumerate(&mut Vec::with_capacity(modes), modes, n_max, &mut basis);
        let index = basis.iter().enumerate().map(|(i, b)| (b.clone(), i)).collect();
        Ok(TruncatedFock {
            modes,
            n_max,
            basis,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn total(&self, s: usize) -> usize {
        self.basis[s].iter().map(|&n| n as usize).sum()
    }

    pub fn index_of(&self, occ: &[u8]) -> Option<usize> {
        self.index.get(occ).copied()
    }

    /// a_i* on basis state s: (target, √(n_i+1)), or None at the cap.
    pub fn raise(&self, s: usize, i: usize) -> Option<(usize, f64)> {
        if self.total(s) >= self.n_max {
            return None;
        }
        let mut occ = self.basis[s].clone();
        let n = occ[i] as f64;
        occ[i] += 1;
        Some((self.index[&occ], (n + 1.0).sqrt()))
    }

    /// a_i on basis state s: (target, √n_i), or None on n_i = 0.
    pub fn lower(&self, s: usize, i: usize) -> Option<(usize, f64)> {
        let mut occ = self.basis[s].clone();
        if occ[i] == 0 {
            return None;
        }
        let n = occ[i] as f64;
        occ[i] -= 1;
        Some((self.index[&occ], n.sqrt()))
    }

    pub fn annihilation(&self, i: usize) -> SparseMatrix {
        let entries = (0..self.dim())
            .filter_map(|s| self.lower(s, i).map(|(t, c)| (t, s, C64::new(c, 0.0))))
            .collect();
        SparseMatrix::from_triplets(self.dim(), self.dim(), entries)
    }

    pub fn creation(&self, i: usize) -> SparseMatrix {
        self.annihilation(i).adjoint()
    }

    /// dΓ(diag(h)) = Σ h_i n_i
    pub fn dgamma_diag(&self, h: &[f64]) -> SparseMatrix {
        assert_eq!(h.len(), self.modes, "dgamma_diag: one energy per mode");
        let entries = (0..self.dim())
            .map(|s| {
                let e: f64 = self.basis[s].iter().zip(h).map(|(&n, x)| n as f64 * x).sum();
                (s, s, C64::new(e, 0.0))
            })
            .collect();
        SparseMatrix::from_triplets(self.dim(), self.dim(), entries)
    }

    /// dΓ(h) = Σ_ij h_ij a_i* a_j for a one-particle matrix h.
    pub fn dgamma(&self, h: &ComplexMatrix) -> SparseMatrix {
        assert_eq!(h.shape(), (self.modes, self.modes), "dgamma: one-particle shape");
        let mut entries = Vec::new();
        for s in 0..self.dim() {
            for j in 0..self.modes {
                let Some((mid, cj)) = self.lower(s, j) else { continue };
                for i in 0..self.modes {
                    let v = h[(i, j)];
                    if v == C64::new(0.0, 0.0) {
                        continue;
                    }
                    // a_i* never hits the cap after a_j.
                    let (t, ci) = self.raise(mid, i).expect("particle number is conserved");
                    entries.push((t, s, v * (ci * cj)));
                }
            }
        }
        SparseMatrix::from_triplets(self.dim(), self.dim(), entries)
    }
}

/// S⊗1 on 𝒦⊗Γ with index a·F + s.
fn system_part(sys: &ComplexMatrix, fock_dim: usize, entries: &mut Vec<(usize, usize, C64)>) {
    for a in 0..sys.rows() {
        for b in 0..sys.cols() {
            let v = sys[(a, b)];
            if v != C64::new(0.0, 0.0) {
                entries.extend((0..fock_dim).map(|s| (a * fock_dim + s, b * fock_dim + s, v)));
            }
        }
    }
}

/// h⊗1 + 1⊗dΓ(diag x) + Σ_m (V_m⊗a_m* + V_m*⊗a_m) on 𝒦⊗Γ.
pub fn fock_hamiltonian(
    h_sys: &ComplexMatrix,
    energies: &[f64],
    couplings: &[ComplexMatrix],
    fock: &TruncatedFock,
) -> Result<SparseMatrix, LangevinError> {
    let d = h_sys.rows();
    let f = fock.dim();
    if energies.len() != fock.modes || couplings.len() != fock.modes {
        return Err(LangevinError::DimensionMismatch(format!(
            "{} modes, {} energies, {} couplings",
            fock.modes,
            energies.len(),
            couplings.len()
        )));
    }
    if let Some(v) = couplings.iter().find(|v| v.shape() != (d, d)) {
        return Err(LangevinError::DimensionMismatch(format!("coupling block {:?} on dimension {d}", v.shape())));
    }
    let mut entries = Vec::new();
    system_part(h_sys, f, &mut entries);
    entries.extend(fock.dgamma_diag(energies).triplets().into_iter().flat_map(|(r, c, v)| {
        (0..d).map(move |a| (a * f + r, a * f + c, v))
    }));
    for (m, v) in couplings.iter().enumerate() {
        for s in 0..f {
            let Some((t, c)) = fock.raise(s, m) else { continue };
            for a in 0..d {
                for b in 0..d {
                    let x = v[(a, b)] * c;
                    if x != C64::new(0.0, 0.0) {
                        entries.push((a * f + t, b * f + s, x));
                        entries.push((b * f + s, a * f + t, x.conj()));
                    }
                }
            }
        }
    }
    Ok(SparseMatrix::from_triplets(d * f, d * f, entries))
}

#[derive(Clone, Debug)]
pub struct LangevinGenerator {
    pub upsilon: ComplexMatrix,
    pub nu: Vec<ComplexMatrix>,
    pub grid: ReservoirGrid,
    pub fock: TruncatedFock,
    /// Modes are (𝔥 index j, grid index i) with mode = j·n + i.
    pub z: SparseMatrix,
}

impl LangevinGenerator {
    pub fn d(&self) -> usize {
        self.upsilon.rows()
    }

    pub fn dim(&self) -> usize {
        self.z.rows()
    }

    pub fn mode(&self, j: usize, i: usize) -> usize {
        j * self.grid.n + i
    }
}

/// Z = ½(Υ+Υ*)⊗1 + 1⊗dΓ(u) + (2π)^{−1/2}√Δx Σ_{j,i} (ν_j⊗a*_{ji} + h.c.)
pub fn build_langevin_z(
    upsilon: &ComplexMatrix,
    nu: &[ComplexMatrix],
    grid: &ReservoirGrid,
    n_max: usize,
) -> Result<LangevinGenerator, LangevinError> {
    build_langevin_z_with_cap(upsilon, nu, grid, n_max, DEFAULT_FOCK_CAP)
}

pub fn build_langevin_z_with_cap(
    upsilon: &ComplexMatrix,
    nu: &[ComplexMatrix],
    grid: &ReservoirGrid,
    n_max: usize,
    cap: usize,
) -> Result<LangevinGenerator, LangevinError> {
    let d = upsilon.rows();
    if !upsilon.is_square() {
        return Err(LangevinError::DimensionMismatch("Υ must be square".into()));
    }
    let n = grid.n;
    let fock = TruncatedFock::with_cap(nu.len() * n, n_max, cap)?;
    let w = (grid.dx() / (2.0 * PI)).sqrt();
    let pts = grid.points();
    let mut energies = Vec::with_capacity(fock.modes);
    let mut couplings = Vec::with_capacity(fock.modes);
    for nj in nu {
        if nj.shape() != (d, d) {
            return Err(LangevinError::DimensionMismatch(format!("noise block {:?} on dimension {d}", nj.shape())));
        }
        for x in &pts {
            energies.push(*x);
            couplings.push(nj.scale_real(w));
        }
    }
    let z = fock_hamiltonian(&upsilon.hermitian_part(), &energies, &couplings, &fock)?;
    Ok(LangevinGenerator {
        upsilon: upsilon.clone(),
        nu: nu.to_vec(),
        grid: grid.clone(),
        fock,
        z,
    })
}

/// e^{sZ}(e_k⊗Ω) for every k.
fn propagate_vacuum(z: &SparseMatrix, d: usize, fock_dim: usize, s: C64) -> Vec<Vec<C64>> {
    (0..d)
        .map(|k| {
            let mut v = vec![C64::new(0.0, 0.0); z.rows()];
            v[k * fock_dim] = C64::new(1.0, 0.0);
            expm_action(z, s, &v)
        })
        .collect()
}

/// (I*e^{sZ}I, [⟨φ_j|(A⊗1)|φ_k⟩]) with φ_k = e^{−sZ}(e_k⊗Ω), using one propagation.
pub(crate) fn reduced_pair(
    z: &SparseMatrix,
    d: usize,
    fock_dim: usize,
    s: C64,
    a: &ComplexMatrix,
) -> (ComplexMatrix, ComplexMatrix) {
    let phi = propagate_vacuum(z, d, fock_dim, -s);
    // (I*e^{sZ}I)_{jk} = conj(⟨e_k⊗Ω|e^{−sZ}|e_j⊗Ω⟩) for anti-hermitian sZ
    let semi = ComplexMatrix::from_fn(d, d, |j, k| phi[j][k * fock_dim].conj());
    let heis = ComplexMatrix::from_fn(d, d, |j, k| {
        let mut acc = C64::new(0.0, 0.0);
        for p in 0..d {
            for q in 0..d {
                let apq = a[(p, q)];
                if apq == C64::new(0.0, 0.0) {
                    continue;
                }
                for st in 0..fock_dim {
                    acc += phi[j][p * fock_dim + st].conj() * apq * phi[k][q * fock_dim + st];
                }
            }
        }
        acc
    });
    (semi, heis)
}

#[derive(Clone, Debug, Serialize)]
pub struct ReductionErrors {
    /// ‖I*e^{−itZ}I − e^{−itΥ}‖
    pub err_semigroup: f64,
    /// ‖I*e^{−itZ}(A⊗1)e^{itZ}I − e^{tM}(A)‖
    pub err_cp: f64,
}

pub fn langevin_reduction_check(gen: &LangevinGenerator, t: f64, a: &ComplexMatrix) -> Result<ReductionErrors, LangevinError> {
    let d = gen.d();
    if a.shape() != (d, d) {
        return Err(LangevinError::DimensionMismatch(format!("observable {:?} on dimension {d}", a.shape())));
    }
    let data = LindbladData::from_level_shift(&gen.upsilon, gen.nu.clone())?;
    let m = build_generator(&data)?;
    let (semi, heis) = reduced_pair(&gen.z, d, gen.fock.dim(), -I * t, a);
    Ok(ReductionErrors {
        err_semigroup: (&semi - &expm(&gen.upsilon.scale(-I * t))).norm_fro(),
        err_cp: (&heis - &evolve(&m, t, a)).norm_fro(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LangevinRow {
    pub r: f64,
    pub n: usize,
    pub n_max: usize,
    pub fock_dim: usize,
    pub err_semigroup: f64,
    pub err_cp: f64,
}

pub fn langevin_ladder(
    upsilon: &ComplexMatrix,
    nu: &[ComplexMatrix],
    grids: &[ReservoirGrid],
    n_max: usize,
    t: f64,
    a: &ComplexMatrix,
) -> Result<Vec<LangevinRow>, LangevinError> {
    grids
        .iter()
        .map(|g| {
            let gen = build_langevin_z(upsilon, nu, g, n_max)?;
            let e = langevin_reduction_check(&gen, t, a)?;
            Ok(LangevinRow {
                r: g.r(),
                n: g.n,
                n_max,
                fock_dim: gen.fock.dim(),
                err_semigroup: e.err_semigroup,
                err_cp: e.err_cp,
            })
        })
        .collect()
}

/// ν as a one-particle map 𝒦 → 𝒦⊗𝔥: row j·d + a is row a of ν_j.
pub fn toy_nu(nu: &[ComplexMatrix], d: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(nu.len() * d, d, |r, c| nu[r / d][(r % d, c)])
}

/// Compression of Z to 𝒦⊗Ω ⊕ 𝒦⊗(one particle), ordered as the toy generator for [`toy_nu`]:
/// 𝒦 first, then reservoir index (j·d + a)·n + i.
pub fn one_excitation_block(gen: &LangevinGenerator) -> ComplexMatrix {
    let d = gen.d();
    let f = gen.fock.dim();
    let n = gen.grid.n;
    let mut idx: Vec<usize> = (0..d).map(|a| a * f).collect();
    let mut occ = vec![0u8; gen.fock.modes];
    for j in 0..gen.nu.len() {
        for a in 0..d {
            for i in 0..n {
                let m = gen.mode(j, i);
                occ[m] = 1;
                idx.push(a * f + gen.fock.index_of(&occ).expect("one-particle state"));
                occ[m] = 0;
            }
        }
    }
    gen.z.select(&idx)
}

#[derive(Clone, Debug)]
pub struct TotalEnergy {
    pub e: SparseMatrix,
    /// ‖νK − (K⊗1 + 1⊗Y)ν‖ + ‖[½(Υ+Υ*), K]‖
    pub precondition_residual: f64,
}

/// E = K⊗1 + 1⊗dΓ(Y⊗1_grid)
pub fn total_energy(k: &ComplexMatrix, y: &ComplexMatrix, gen: &LangevinGenerator) -> Result<TotalEnergy, LangevinError> {
    let d = gen.d();
    let h = gen.nu.len();
    if k.shape() != (d, d) || y.shape() != (h, h) {
        return Err(LangevinError::DimensionMismatch(format!(
            "K {:?} and Y {:?} for d = {d}, noise dimension {h}",
            k.shape(),
            y.shape()
        )));
    }
    let blocks = CpMapData {
        d_in: d,
        d_out: d,
        kraus: gen.nu.clone(),
    };
    let residual = covariance_residual(&blocks, k, y) + commutator(&gen.upsilon.hermitian_part(), k).norm_fro();
    let scale = 1.0 + k.norm_fro() * (1.0 + blocks.gram().norm_fro().sqrt()) + y.norm_fro();
    if residual > 1e-10 * scale {
        return Err(LangevinError::PreconditionViolated { residual });
    }
    let n = gen.grid.n;
    let one = ComplexMatrix::from_fn(h * n, h * n, |p, q| if p % n == q % n { y[(p / n, q / n)] } else { C64::new(0.0, 0.0) });
    let f = gen.fock.dim();
    let mut entries = Vec::new();
    system_part(k, f, &mut entries);
    for (r, c, v) in gen.fock.dgamma(&one).triplets() {
        entries.extend((0..d).map(|a| (a * f + r, a * f + c, v)));
    }
    Ok(TotalEnergy {
        e: SparseMatrix::from_triplets(d * f, d * f, entries),
        precondition_residual: residual,
    })
}

/// ‖[E, Z]‖
pub fn commutation_residual(e: &SparseMatrix, z: &SparseMatrix) -> f64 {
    e.matmul(z).sub(&z.matmul(e)).norm_fro()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dilation_toy::{build_zr_with_nu, dilation_check};

    fn scalar() -> ComplexMatrix {
        ComplexMatrix::from_fn(1, 1, |_, _| C64::new(0.0, -0.5))
    }

    #[test]
    fn single_mode_textbook_truncation() {
        let f = TruncatedFock::new(1, 2).unwrap();
        assert_eq!(f.dim(), 3);
        let a = f.annihilation(0).to_dense();
        let s2 = 2f64.sqrt();
        let expected = ComplexMatrix::from_real(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, s2, 0.0, 0.0, 0.0]);
        assert!((&a - &expected).norm_fro() < 1e-15);
    }

    #[test]
    fn basis_is_lexicographic_and_counted() {
        let f = TruncatedFock::new(3, 2).unwrap();
        assert_eq!(f.dim(), 10);
        assert_eq!(fock_dimension(3, 2), 10.0);
        assert!(f.basis.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(f.basis[0], vec![0, 0, 0]);
        assert!(matches!(TruncatedFock::with_cap(200, 3, 1000), Err(LangevinError::FockTooLarge { .. })));
    }

    #[test]
    fn ccr_below_the_cap() {
        let f = TruncatedFock::new(3, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let (a, b) = (f.annihilation(i), f.creation(j));
                let c = a.matmul(&b).sub(&b.matmul(&a)).to_dense();
                for s in (0..f.dim()).filter(|&s| f.total(s) < 3) {
                    for t in (0..f.dim()).filter(|&t| f.total(t) < 3) {
                        let expected = if i == j && s == t { 1.0 } else { 0.0 };
                        assert!((c[(s, t)] - C64::new(expected, 0.0)).norm() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn number_operator_is_occupation_sum() {
        let f = TruncatedFock::new(4, 2).unwrap();
        let n = f.dgamma(&ComplexMatrix::identity(4));
        let diag = f.dgamma_diag(&[1.0; 4]);
        assert!(n.sub(&diag).norm_fro() < 1e-14);
        for s in 0..f.dim() {
            assert!((n.get(s, s).re - f.total(s) as f64).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_noise_is_exact() {
        let ups = ComplexMatrix::diag_real(&[0.3, -0.2]);
        let gen = build_langevin_z(&ups, &[ComplexMatrix::zeros(2, 2)], &ReservoirGrid::symmetric(2.0, 5).unwrap(), 2).unwrap();
        let a = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let e = langevin_reduction_check(&gen, 1.3, &a).unwrap();
        assert!(e.err_semigroup < 1e-12 && e.err_cp < 1e-12);
        let e0 = langevin_reduction_check(&gen, 0.0, &a).unwrap();
        assert!(e0.err_semigroup < 1e-15 && e0.err_cp < 1e-15);
    }

    #[test]
    fn one_excitation_block_is_the_toy_generator() {
        let ups = ComplexMatrix::diag(&[C64::new(0.0, -0.1), C64::new(0.0, -0.3)]);
        let nu = vec![
            ComplexMatrix::from_real(2, 2, &[0.0, 0.2f64.sqrt(), 0.0, 0.0]),
            ComplexMatrix::from_real(2, 2, &[0.0, 0.0, 0.0, 0.6f64.sqrt()]),
        ];
        let grid = ReservoirGrid::symmetric(3.0, 7).unwrap();
        let gen = build_langevin_z(&ups, &nu, &grid, 2).unwrap();
        let toy = build_zr_with_nu(&ups, &toy_nu(&nu, 2), &grid);
        assert!((&one_excitation_block(&gen) - &toy.z).norm_fro() < 1e-14);
    }

    #[test]
    fn single_excitation_cap_reproduces_toy_numbers() {
        let grid = ReservoirGrid::symmetric(5.0, 101).unwrap();
        let gen = build_langevin_z(&scalar(), &[ComplexMatrix::identity(1)], &grid, 1).unwrap();
        let e = langevin_reduction_check(&gen, 1.0, &ComplexMatrix::identity(1)).unwrap();
        let toy = crate::dilation_toy::build_zr(&scalar(), &grid).unwrap();
        assert!((e.err_semigroup - dilation_check(&toy, 1.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn total_energy_commutes_for_covariant_data() {
        let eps = 1.0;
        let k = ComplexMatrix::diag_real(&[0.0, eps]);
        let ups = ComplexMatrix::diag(&[C64::new(0.0, -0.1), C64::new(0.2, -0.3)]);
        let nu = vec![ComplexMatrix::unit(2, 0, 1).scale_real(0.6f64.sqrt()), ComplexMatrix::unit(2, 1, 0).scale_real(0.2f64.sqrt())];
        let y = ComplexMatrix::diag_real(&[eps, -eps]);
        let gen = build_langevin_z(&ups, &nu, &ReservoirGrid::symmetric(2.0, 5).unwrap(), 2).unwrap();
        let e = total_energy(&k, &y, &gen).unwrap();
        assert!(commutation_residual(&e.e, &gen.z) < 1e-10);
        let bad = ComplexMatrix::diag_real(&[eps + 0.01, -eps]);
        assert!(matches!(total_energy(&k, &bad, &gen), Err(LangevinError::PreconditionViolated { .. })));
    }
}
