use super::{ComplexMatrix, C64, ZERO};

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl SparseMatrix {
    /// Duplicate entries are summed; exact zeros are dropped.
    pub fn from_triplets(rows: usize, cols: usize, mut entries: Vec<(usize, usize, C64)>) -> Self {
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0; rows + 1];
        let mut indices = Vec::with_capacity(entries.len());
        let mut values: Vec<C64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            assert!(r < rows && c < cols, "sparse entry ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            indices.push(c);
            values.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        let mut m = SparseMatrix {
            rows,
            cols,
            indptr,
            indices,
            values,
        };
        m.prune();
        m
    }

    fn prune(&mut self) {
        if self.values.iter().all(|v| *v != ZERO) {
            return;
        }
        let mut entries = Vec::with_capacity(self.values.len());
        for r in 0..self.rows {
            for p in self.indptr[r]..self.indptr[r + 1] {
                if self.values[p] != ZERO {
                    entries.push((r, self.indices[p], self.values[p]));
                }
            }
        }
        *self = Self::from_triplets(self.rows, self.cols, entries);
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_triplets(rows, cols, vec![])
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, C64::new(1.0, 0.0))).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn triplets(&self) -> Vec<(usize, usize, C64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for r in 0..self.rows {
            for p in self.indptr[r]..self.indptr[r + 1] {
                out.push((r, self.indices[p], self.values[p]));
            }
        }
        out
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let row = &self.indices[self.indptr[r]..self.indptr[r + 1]];
        match row.binary_search(&c) {
            Ok(p) => self.values[self.indptr[r] + p],
            Err(_) => ZERO,
        }
    }

    pub fn to_dense(&self) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(self.rows, self.cols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    pub fn from_dense(m: &ComplexMatrix) -> Self {
        let mut entries = Vec::new();
        for r in 0..m.rows() {
            for c in 0..m.cols() {
                if m[(r, c)] != ZERO {
                    entries.push((r, c, m[(r, c)]));
                }
            }
        }
        Self::from_triplets(m.rows(), m.cols(), entries)
    }

    pub fn adjoint(&self) -> Self {
        let entries = self.triplets().into_iter().map(|(r, c, v)| (c, r, v.conj())).collect();
        Self::from_triplets(self.cols, self.rows, entries)
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out.prune();
        out
    }

    pub fn add(&self, other: &SparseMatrix) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "sparse add: shape");
        let mut entries = self.triplets();
        entries.extend(other.triplets());
        Self::from_triplets(self.rows, self.cols, entries)
    }

    pub fn sub(&self, other: &SparseMatrix) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.cols, "sparse matvec: length");
        (0..self.rows)
            .map(|r| {
                (self.indptr[r]..self.indptr[r + 1])
                    .map(|p| self.values[p] * v[self.indices[p]])
                    .sum()
            })
            .collect()
    }

    pub fn matmul(&self, other: &SparseMatrix) -> Self {
        assert_eq!(self.cols, other.rows, "sparse matmul: inner dimension");
        let mut acc = vec![ZERO; other.cols];
        let mut touched: Vec<usize> = Vec::new();
        let mut entries = Vec::new();
        for r in 0..self.rows {
            for p in self.indptr[r]..self.indptr[r + 1] {
                let k = self.indices[p];
                let a = self.values[p];
                for q in other.indptr[k]..other.indptr[k + 1] {
                    let c = other.indices[q];
                    if acc[c] == ZERO {
                        touched.push(c);
                    }
                    acc[c] += a * other.values[q];
                }
            }
            for &c in &touched {
                entries.push((r, c, acc[c]));
                acc[c] = ZERO;
            }
            touched.clear();
        }
        Self::from_triplets(self.rows, other.cols, entries)
    }

    pub fn norm_fro(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        let mut sums = vec![0.0; self.cols];
        for (p, &c) in self.indices.iter().enumerate() {
            sums[c] += self.values[p].norm();
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        self.sub(&self.adjoint()).values.iter().fold(0.0f64, |a, v| a.max(v.norm()))
    }

    /// Principal submatrix on the given indices.
    pub fn select(&self, idx: &[usize]) -> ComplexMatrix {
        let mut pos = vec![usize::MAX; self.cols.max(self.rows)];
        for (i, &k) in idx.iter().enumerate() {
            pos[k] = i;
        }
        let mut m = ComplexMatrix::zeros(idx.len(), idx.len());
        for (i, &r) in idx.iter().enumerate() {
            for p in self.indptr[r]..self.indptr[r + 1] {
                let j = pos[self.indices[p]];
                if j != usize::MAX {
                    m[(i, j)] = self.values[p];
                }
            }
        }
        m
    }
}

/// e^{sA}v by Taylor steps with |τ|·‖A‖₁ ≤ 1.
pub fn expm_action(a: &SparseMatrix, s: C64, v: &[C64]) -> Vec<C64> {
    assert_eq!(a.rows(), a.cols(), "expm_action: matrix must be square");
    let norm = a.norm_one() * s.norm();
    let steps = norm.ceil().max(1.0) as usize;
    let tau = s / steps as f64;
    let inf = |x: &[C64]| x.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let mut out = v.to_vec();
    for _ in 0..steps {
        let mut term = out.clone();
        let mut acc = out.clone();
        for k in 1..=60 {
            term = a.matvec(&term);
            let f = tau / k as f64;
            term.iter_mut().for_each(|z| *z *= f);
            acc.iter_mut().zip(&term).for_each(|(x, t)| *x += t);
            if inf(&term) <= 1e-17 * inf(&acc) {
                break;
            }
        }
        out = acc;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrixcore::{expm, I};
    use crate::random::{random_hermitian, random_matrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dense_round_trip_and_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_matrix(&mut rng, 5, 4);
        let b = random_matrix(&mut rng, 4, 3);
        let (sa, sb) = (SparseMatrix::from_dense(&a), SparseMatrix::from_dense(&b));
        assert_eq!(sa.to_dense(), a);
        assert!((&sa.matmul(&sb).to_dense() - &(&a * &b)).norm_fro() < 1e-12);
        assert!((&sa.adjoint().to_dense() - &a.adjoint()).norm_fro() == 0.0);
        assert!((sa.norm_one() - a.norm_one()).abs() < 1e-12);
    }

    #[test]
    fn duplicates_are_summed() {
        let one = C64::new(1.0, 0.0);
        let m = SparseMatrix::from_triplets(2, 2, vec![(0, 1, one), (0, 1, one), (1, 0, one), (1, 0, -one)]);
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), C64::new(2.0, 0.0));
    }

    #[test]
    fn expm_action_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = random_hermitian(&mut rng, 12).scale_real(5.0);
        let v: Vec<C64> = (0..12).map(|i| C64::new(i as f64, 1.0)).collect();
        let dense = expm(&h.scale(-I * 2.0)).apply_vec(&v);
        let sparse = expm_action(&SparseMatrix::from_dense(&h), -I * 2.0, &v);
        let err: f64 = dense.iter().zip(&sparse).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        assert!(err < 1e-11);
    }
}
