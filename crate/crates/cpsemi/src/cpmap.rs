//! Completely positive maps Ξ(A) = Σ ν_j* A ν_j between matrix algebras.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrixcore::{herm_eig, mismatch, ComplexMatrix, MatrixError, Superoperator, C64, ZERO};

/// Choi rank threshold, relative to ‖C‖.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CpError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("map is not completely positive (Choi min eigenvalue {min_eigenvalue:.3e})")]
    NotCompletelyPositive { min_eigenvalue: f64 },
    #[error("dilation is not minimal (Gram min/max eigenvalue ratio {ratio:.3e})")]
    NotMinimal { ratio: f64 },
    #[error("dilations represent different maps (residual {residual:.3e})")]
    NotEquivalent { residual: f64 },
    #[error("Ξ(1) is singular (min eigenvalue {min_eigenvalue:.3e})")]
    SingularUnit { min_eigenvalue: f64 },
}

/// Kraus blocks ν_j of shape d_in×d_out; Ξ maps d_in×d_in matrices to d_out×d_out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpMapData {
    pub d_in: usize,
    pub d_out: usize,
    pub kraus: Vec<ComplexMatrix>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChoiMatrix {
    pub d_in: usize,
    pub d_out: usize,
    /// C[(i,a),(k,b)] = Ξ(E_ik)[a,b]
    pub matrix: ComplexMatrix,
}

impl CpMapData {
    pub fn new(d_in: usize, d_out: usize, kraus: Vec<ComplexMatrix>) -> Result<Self, CpError> {
        for b in &kraus {
            if b.shape() != (d_in, d_out) {
                return Err(mismatch(
                    "CpMapData::new",
                    format!("{d_in}x{d_out}"),
                    format!("{}x{}", b.rows(), b.cols()),
                )
                .into());
            }
        }
        Ok(CpMapData { d_in, d_out, kraus })
    }

    pub fn empty(d: usize) -> Self {
        CpMapData {
            d_in: d,
            d_out: d,
            kraus: vec![],
        }
    }

    pub fn noise_dim(&self) -> usize {
        self.kraus.len()
    }

    pub fn apply(&self, a: &ComplexMatrix) -> Result<ComplexMatrix, CpError> {
        if a.shape() != (self.d_in, self.d_in) {
            return Err(mismatch(
                "CpMapData::apply",
                format!("{0}x{0}", self.d_in),
                format!("{}x{}", a.rows(), a.cols()),
            )
            .into());
        }
        let mut out = ComplexMatrix::zeros(self.d_out, self.d_out);
        for nu in &self.kraus {
            out += &(&(&nu.adjoint() * a) * nu);
        }
        Ok(out)
    }

    /// Σ ν_j* ν_j = Ξ(1)
    pub fn nu_star_nu(&self) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.d_out, self.d_out);
        for nu in &self.kraus {
            out += &(&nu.adjoint() * nu);
        }
        out
    }

    /// Superoperator of Ξ; requires d_in = d_out.
    pub fn to_superoperator(&self) -> Result<Superoperator, CpError> {
        if self.d_in != self.d_out {
            return Err(MatrixError::NotSquare {
                rows: self.d_in,
                cols: self.d_out,
            }
            .into());
        }
        let mut s = Superoperator::zero(self.d_in);
        for nu in &self.kraus {
            s = s.add(&Superoperator::sandwich(&nu.adjoint(), nu));
        }
        Ok(s)
    }

    pub fn choi(&self) -> ChoiMatrix {
        let n = self.d_in * self.d_out;
        let mut c = ComplexMatrix::zeros(n, n);
        for nu in &self.kraus {
            let w: Vec<C64> = nu.as_slice().iter().map(|z| z.conj()).collect();
            for r in 0..n {
                if w[r] == ZERO {
                    continue;
                }
                for s in 0..n {
                    c[(r, s)] += w[r] * w[s].conj();
                }
            }
        }
        ChoiMatrix {
            d_in: self.d_in,
            d_out: self.d_out,
            matrix: c,
        }
    }

    /// Gram matrix of the vectorized blocks.
    pub fn gram(&self) -> ComplexMatrix {
        let n = self.kraus.len();
        ComplexMatrix::from_fn(n, n, |i, j| {
            crate::matrixcore::inner(self.kraus[i].as_slice(), self.kraus[j].as_slice())
        })
    }

    /// Smallest over largest Gram eigenvalue; 1 for a single nonzero block, 0 when dependent.
    pub fn independence_ratio(&self) -> f64 {
        if self.kraus.is_empty() {
            return 1.0;
        }
        let e = herm_eig(&self.gram()).expect("Gram matrix is hermitian");
        let max = e.values.last().copied().unwrap_or(0.0);
        if max <= 0.0 {
            return 0.0;
        }
        e.values[0] / max
    }

    pub fn is_minimal(&self) -> bool {
        self.independence_ratio() > RANK_TOL
    }

    /// Largest apply residual over the matrix units.
    pub fn distance(&self, other: &CpMapData) -> Result<f64, CpError> {
        if (self.d_in, self.d_out) != (other.d_in, other.d_out) {
            return Err(mismatch(
                "CpMapData::distance",
                format!("{}x{}", self.d_in, self.d_out),
                format!("{}x{}", other.d_in, other.d_out),
            )
            .into());
        }
        let mut worst = 0.0f64;
        for i in 0..self.d_in {
            for j in 0..self.d_in {
                let e = ComplexMatrix::unit(self.d_in, i, j);
                worst = worst.max((&self.apply(&e)? - &other.apply(&e)?).norm_fro());
            }
        }
        Ok(worst)
    }

    /// Minimal blocks representing the same map.
    pub fn minimize(&self) -> Result<CpMapData, CpError> {
        stinespring_from_choi(&self.choi())
    }
}

impl ChoiMatrix {
    pub fn min_eigenvalue(&self) -> f64 {
        herm_eig(&self.matrix.hermitian_part())
            .map(|e| e.values.first().copied().unwrap_or(0.0))
            .unwrap_or(f64::NAN)
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol * self.matrix.norm_fro()
    }
}

/// Choi matrix of a map on d×d matrices given as a superoperator.
pub fn choi(s: &Superoperator) -> ChoiMatrix {
    let d = s.dim;
    let n = d * d;
    let c = ComplexMatrix::from_fn(n, n, |r, col| {
        let (i, a) = (r / d, r % d);
        let (k, b) = (col / d, col % d);
        s.matrix[(a * d + b, i * d + k)]
    });
    ChoiMatrix {
        d_in: d,
        d_out: d,
        matrix: c,
    }
}

/// Choi matrix of an arbitrary linear map from d_in×d_in to d_out×d_out matrices.
pub fn choi_of_map(d_in: usize, d_out: usize, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> ChoiMatrix {
    let n = d_in * d_out;
    let mut c = ComplexMatrix::zeros(n, n);
    for i in 0..d_in {
        for k in 0..d_in {
            let img = f(&ComplexMatrix::unit(d_in, i, k));
            for a in 0..d_out {
                for b in 0..d_out {
                    c[(i * d_out + a, k * d_out + b)] = img[(a, b)];
                }
            }
        }
    }
    ChoiMatrix {
        d_in,
        d_out,
        matrix: c,
    }
}

pub fn is_completely_positive(s: &Superoperator, tol: f64) -> bool {
    choi(s).is_psd(tol)
}

/// Minimal Kraus blocks of a c.p. map.
pub fn stinespring_minimal(s: &Superoperator) -> Result<CpMapData, CpError> {
    stinespring_from_choi(&choi(s))
}

pub fn stinespring_from_choi(c: &ChoiMatrix) -> Result<CpMapData, CpError> {
    stinespring_from_choi_tol(c, RANK_TOL, RANK_TOL, 0.0)
}

/// Extraction with explicit PSD and rank tolerances, relative to ‖C‖ but never to less than `floor`.
pub(crate) fn stinespring_from_choi_tol(
    c: &ChoiMatrix,
    psd_tol: f64,
    rank_tol: f64,
    floor: f64,
) -> Result<CpMapData, CpError> {
    let e = herm_eig(&c.matrix.hermitian_part())?;
    let norm = c.matrix.norm_fro();
    let min = e.values.first().copied().unwrap_or(0.0);
    if min < -psd_tol * norm.max(floor) {
        return Err(CpError::NotCompletelyPositive { min_eigenvalue: min });
    }
    let n = c.d_in * c.d_out;
    let mut kraus = Vec::new();
    for m in (0..e.dim()).rev() {
        let lam = e.values[m];
        if lam <= rank_tol * norm + f64::EPSILON * floor {
            continue;
        }
        let s = lam.sqrt();
        let data: Vec<C64> = (0..n).map(|r| (e.vectors[(r, m)] * s).conj()).collect();
        let block = ComplexMatrix::from_row_major(c.d_in, c.d_out, data)?;
        kraus.push(fix_phase(block));
    }
    Ok(CpMapData {
        d_in: c.d_in,
        d_out: c.d_out,
        kraus,
    })
}

/// Rotates a block so its largest-magnitude entry is real positive.
pub fn fix_phase(b: ComplexMatrix) -> ComplexMatrix {
    let mut best = ZERO;
    for z in b.as_slice() {
        if z.norm() > best.norm() * (1.0 + 1e-12) {
            best = *z;
        }
    }
    if best == ZERO {
        return b;
    }
    b.scale(best.conj() / best.norm())
}

#[derive(Clone, Debug)]
pub struct Equivalence {
    /// ν′_i = Σ_j U_ij ν_j
    pub unitary: ComplexMatrix,
    pub residual: f64,
    pub unitarity_error: f64,
}

/// The unitary relating two minimal dilations of one map.
pub fn dilation_equivalence(a: &CpMapData, b: &CpMapData) -> Result<Equivalence, CpError> {
    for m in [a, b] {
        let ratio = m.independence_ratio();
        if ratio <= RANK_TOL {
            return Err(CpError::NotMinimal { ratio });
        }
    }
    let dist = a.distance(b)?;
    let scale = 1.0 + a.nu_star_nu().norm_fro();
    if dist > 1e-8 * scale || a.noise_dim() != b.noise_dim() {
        return Err(CpError::NotEquivalent { residual: dist });
    }
    let n = a.noise_dim();
    let m = a.d_in * a.d_out;
    let avec = ComplexMatrix::from_fn(n, m, |i, r| a.kraus[i].as_slice()[r]);
    let bvec = ComplexMatrix::from_fn(n, m, |i, r| b.kraus[i].as_slice()[r]);
    let gram = &avec * &avec.adjoint();
    let cross = &bvec * &avec.adjoint();
    let u = gram.solve(&cross.adjoint())?.adjoint();
    let residual = (&(&u * &avec) - &bvec).norm_fro();
    let unitarity_error = (&(&u.adjoint() * &u) - &ComplexMatrix::identity(n)).norm_fro();
    Ok(Equivalence {
        unitary: u,
        residual,
        unitarity_error,
    })
}

/// R = Ξ(A*A) − Ξ(A)* Ξ(1)⁻¹ Ξ(A)
pub fn kadison_schwarz_residual(map: &CpMapData, a: &ComplexMatrix) -> Result<ComplexMatrix, CpError> {
    kadison_schwarz_residual_with(map.d_in, a, |x| map.apply(x).expect("shape checked"))
}

pub fn kadison_schwarz_residual_with(
    d_in: usize,
    a: &ComplexMatrix,
    f: impl Fn(&ComplexMatrix) -> ComplexMatrix,
) -> Result<ComplexMatrix, CpError> {
    if a.shape() != (d_in, d_in) {
        return Err(mismatch(
            "kadison_schwarz_residual",
            format!("{d_in}x{d_in}"),
            format!("{}x{}", a.rows(), a.cols()),
        )
        .into());
    }
    let unit = f(&ComplexMatrix::identity(d_in));
    let min = unit.hermitian_part().min_eigenvalue()?;
    if min < 1e-10 {
        return Err(CpError::SingularUnit { min_eigenvalue: min });
    }
    let xa = f(a);
    let xaa = f(&(&a.adjoint() * a));
    let r = &xaa - &(&xa.adjoint() * &unit.solve(&xa)?);
    Ok(r.hermitian_part())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrixcore::superop_of_map;
    use crate::random::{haar_unitary, random_blocks, random_matrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn e(i: usize, j: usize) -> ComplexMatrix {
        ComplexMatrix::unit(2, i, j)
    }

    #[test]
    fn identity_channel_apply() {
        let m = CpMapData::new(2, 2, vec![ComplexMatrix::identity(2)]).unwrap();
        let a = ComplexMatrix::from_real(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.apply(&a).unwrap(), a);
    }

    #[test]
    fn single_jump_moves_population() {
        let m = CpMapData::new(2, 2, vec![e(0, 1)]).unwrap();
        assert_eq!(m.apply(&e(0, 0)).unwrap(), e(1, 1));
        assert!(m.apply(&e(1, 1)).unwrap().is_zero());
    }

    #[test]
    fn wrong_block_shape_rejected() {
        assert!(CpMapData::new(2, 2, vec![ComplexMatrix::identity(3)]).is_err());
    }

    #[test]
    fn choi_of_identity_channel() {
        let c = choi(&Superoperator::identity(2));
        let ev = herm_eig(&c.matrix).unwrap().values;
        assert!((ev[3] - 2.0).abs() < 1e-12 && ev[2].abs() < 1e-12);
    }

    #[test]
    fn transpose_map_is_not_cp() {
        let t = superop_of_map(2, |a| a.transpose());
        let c = choi(&t);
        let ev = herm_eig(&c.matrix).unwrap().values;
        assert!((ev[0] + 1.0).abs() < 1e-12);
        assert!(!is_completely_positive(&t, 1e-10));
    }

    #[test]
    fn depolarizing_choi_and_rank() {
        let s = superop_of_map(2, |a| ComplexMatrix::identity(2).scale(a.trace() / 2.0));
        let c = choi(&s);
        assert!((&c.matrix - &ComplexMatrix::identity(4).scale_real(0.5)).norm_fro() < 1e-14);
        assert_eq!(stinespring_minimal(&s).unwrap().noise_dim(), 4);
    }

    #[test]
    fn choi_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let m = CpMapData::new(3, 3, random_blocks(&mut rng, 2, 3, 3)).unwrap();
        let a = m.choi();
        let b = choi(&m.to_superoperator().unwrap());
        let c = choi_of_map(3, 3, |x| m.apply(x).unwrap());
        assert!((&a.matrix - &b.matrix).norm_fro() < 1e-12);
        assert!((&a.matrix - &c.matrix).norm_fro() < 1e-12);
    }

    #[test]
    fn unitary_conjugation_has_one_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let u = haar_unitary(&mut rng, 3);
        let s = Superoperator::sandwich(&u.adjoint(), &u);
        let m = stinespring_minimal(&s).unwrap();
        assert_eq!(m.noise_dim(), 1);
        let ratio = &m.kraus[0] - &fix_phase(u);
        assert!(ratio.norm_fro() < 1e-10);
    }

    #[test]
    fn dependent_blocks_collapse() {
        let h = ComplexMatrix::identity(2).scale_real(0.5f64.sqrt());
        let m = CpMapData::new(2, 2, vec![h.clone(), h]).unwrap();
        assert!(!m.is_minimal());
        let min = m.minimize().unwrap();
        assert_eq!(min.noise_dim(), 1);
        assert!(m.distance(&min).unwrap() < 1e-12);
    }

    #[test]
    fn rectangular_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let m = CpMapData::new(2, 3, random_blocks(&mut rng, 3, 2, 3)).unwrap();
        let min = m.minimize().unwrap();
        assert_eq!(min.noise_dim(), 3);
        assert!(m.distance(&min).unwrap() < 1e-10);
    }

    #[test]
    fn equivalence_recovers_mixing() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let a = CpMapData::new(3, 3, random_blocks(&mut rng, 3, 3, 3)).unwrap();
        let u = haar_unitary(&mut rng, 3);
        let kraus = (0..3)
            .map(|i| {
                let mut s = ComplexMatrix::zeros(3, 3);
                for j in 0..3 {
                    s += &a.kraus[j].scale(u[(i, j)]);
                }
                s
            })
            .collect();
        let b = CpMapData::new(3, 3, kraus).unwrap();
        let eq = dilation_equivalence(&a, &b).unwrap();
        assert!(eq.residual < 1e-8 && eq.unitarity_error < 1e-10);
        assert!((&eq.unitary - &u).norm_fro() < 1e-8);
        let same = dilation_equivalence(&a, &a).unwrap();
        assert!((&same.unitary - &ComplexMatrix::identity(3)).norm_fro() < 1e-10);
    }

    #[test]
    fn different_maps_are_not_equivalent() {
        let id = CpMapData::new(2, 2, vec![ComplexMatrix::identity(2)]).unwrap();
        let other = CpMapData::new(2, 2, vec![e(0, 1)]).unwrap();
        assert!(matches!(
            dilation_equivalence(&id, &other),
            Err(CpError::NotEquivalent { .. })
        ));
    }

    #[test]
    fn kadison_schwarz_examples() {
        let id = CpMapData::new(2, 2, vec![ComplexMatrix::identity(2)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let a = random_matrix(&mut rng, 2, 2);
        assert!(kadison_schwarz_residual(&id, &a).unwrap().norm_fro() < 1e-12);

        let dep = |x: &ComplexMatrix| ComplexMatrix::identity(2).scale(x.trace() / 2.0);
        let r = kadison_schwarz_residual_with(2, &e(0, 1), dep).unwrap();
        assert!((&r - &ComplexMatrix::identity(2).scale_real(0.5)).norm_fro() < 1e-14);

        let zero = CpMapData::new(2, 2, vec![e(0, 1)]).unwrap();
        assert!(matches!(
            kadison_schwarz_residual(&zero, &a),
            Err(CpError::SingularUnit { .. })
        ));
    }
}
