//! Dense row-major matrices, generators, norms and the serial reference
//! algorithms that every distributed result is checked against.

use std::fmt;
use std::ops::{Index, IndexMut};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major real matrix with positive dimensions.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormKind {
    Frobenius,
    Inf,
    MaxAbs,
}

/// Shape family for [`generate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "width")]
pub enum MatrixKind {
    RandomUniform,
    Identity,
    UpperTriangular,
    Band(usize),
    Hilbert,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidDimensions(format!(
                "matrix must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidDimensions(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "entry ({}, {}) is not finite",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix must be at least 1x1");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != cols) {
            return Err(Error::InvalidDimensions("ragged rows".into()));
        }
        let data = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::new(rows.len(), cols, data)
    }

    /// `n × 1` column vector.
    pub fn column_vector(values: &[f64]) -> Result<Self> {
        Self::new(values.len(), 1, values.to_vec())
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        for (i, &v) in values.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        (i < self.rows && j < self.cols).then(|| self.data[i * self.cols + j])
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::InvalidDimensions(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = rhs.row(k);
                for (o, &b) in out.row_mut(i).iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::InvalidDimensions(format!(
                "vector of length {} against {} columns",
                x.len(),
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::InvalidDimensions(format!(
                "cannot subtract {}x{} from {}x{}",
                rhs.rows, rhs.cols, self.rows, self.cols
            )));
        }
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn norm(&self, which: NormKind) -> f64 {
        norm(self, which)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Row `i` of the result is row `perm[i]` of `self` (the product `P·A`).
    pub fn permute_rows(&self, perm: &PermutationVector) -> Result<Self> {
        if perm.len() != self.rows {
            return Err(Error::InvalidDimensions(format!(
                "permutation of size {} applied to {} rows",
                perm.len(),
                self.rows
            )));
        }
        Ok(Self::from_fn(self.rows, self.cols, |i, j| self[(perm[i], j)]))
    }

    /// Column `c` of the result is column `perm[c]` of `self` (the product `A·Pᵀ`).
    pub fn permute_cols(&self, perm: &PermutationVector) -> Result<Self> {
        if perm.len() != self.cols {
            return Err(Error::InvalidDimensions(format!(
                "permutation of size {} applied to {} columns",
                perm.len(),
                self.cols
            )));
        }
        Ok(Self::from_fn(self.rows, self.cols, |i, j| self[(i, perm[j])]))
    }

    /// Largest `|a_ij - a_ji|`; `None` for non-square matrices.
    pub fn asymmetry(&self) -> Option<f64> {
        if !self.is_square() {
            return None;
        }
        let n = self.rows;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        Some(worst)
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Entries of `self` with `i > j` set to zero, keeping the top `cols`
    /// rows when the matrix is tall.
    pub fn upper_triangle(&self) -> Self {
        let k = self.rows.min(self.cols);
        Self::from_fn(k, self.cols, |i, j| if j >= i { self[(i, j)] } else { 0.0 })
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

pub fn norm(m: &DenseMatrix, which: NormKind) -> f64 {
    match which {
        NormKind::Frobenius => m.data.iter().map(|v| v * v).sum::<f64>().sqrt(),
        NormKind::Inf => (0..m.rows)
            .map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max),
        NormKind::MaxAbs => m.max_abs(),
    }
}

pub fn generate(kind: MatrixKind, m: usize, n: usize, seed: u64) -> Result<DenseMatrix> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidDimensions(format!(
            "generated matrix must be at least 1x1, got {m}x{n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uniform = move || rng.gen_range(-1.0..=1.0);
    let out = match kind {
        MatrixKind::RandomUniform => DenseMatrix::from_fn(m, n, |_, _| uniform()),
        MatrixKind::Identity => DenseMatrix::from_fn(m, n, |i, j| if i == j { 1.0 } else { 0.0 }),
        MatrixKind::UpperTriangular => {
            DenseMatrix::from_fn(m, n, |i, j| if i <= j { uniform() } else { 0.0 })
        }
        MatrixKind::Band(w) => {
            if w >= m.min(n) {
                return Err(Error::InvalidDimensions(format!(
                    "band width {w} must be below min({m}, {n})"
                )));
            }
            DenseMatrix::from_fn(m, n, |i, j| if i.abs_diff(j) <= w { uniform() } else { 0.0 })
        }
        MatrixKind::Hilbert => DenseMatrix::from_fn(m, n, |i, j| 1.0 / (i + j + 1) as f64),
    };
    Ok(out)
}

/// Pivots with magnitude below this are treated as zero.
pub fn singularity_floor(n: usize, max_abs: f64) -> f64 {
    n as f64 * f64::EPSILON * max_abs
}

/// A bijection on `{0, …, n-1}`; as a matrix, row `i` has its one in column `map[i]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationVector {
    map: Vec<usize>,
}

impl PermutationVector {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        if map.is_empty() {
            return Err(Error::InvalidDimensions("empty permutation".into()));
        }
        let mut seen = vec![false; map.len()];
        for &j in &map {
            if j >= map.len() || std::mem::replace(&mut seen[j], true) {
                return Err(Error::InvalidArgument(format!(
                    "{map:?} is not a permutation"
                )));
            }
        }
        Ok(Self { map })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            map: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &j)| i == j)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.map.len()];
        for (i, &j) in self.map.iter().enumerate() {
            inv[j] = i;
        }
        Self { map: inv }
    }

    pub fn swap(&mut self, a: usize, b: usize) {
        self.map.swap(a, b);
    }

    pub fn to_matrix(&self) -> DenseMatrix {
        let n = self.map.len();
        DenseMatrix::from_fn(n, n, |i, j| if self.map[i] == j { 1.0 } else { 0.0 })
    }
}

impl Index<usize> for PermutationVector {
    type Output = usize;

    fn index(&self, i: usize) -> &usize {
        &self.map[i]
    }
}

#[derive(Clone, Debug)]
pub struct SerialLu {
    pub perm: PermutationVector,
    pub l: DenseMatrix,
    pub u: DenseMatrix,
}

/// Textbook right-looking Gaussian elimination with partial pivoting.
/// Ties in pivot magnitude go to the smallest row index.
pub fn serial_lu_oracle(a: &DenseMatrix) -> Result<SerialLu> {
    if !a.is_square() {
        return Err(Error::InvalidDimensions(format!(
            "LU needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    let floor = singularity_floor(n, a.max_abs());
    let mut w = a.clone();
    let mut perm = PermutationVector::identity(n);
    for k in 0..n {
        let mut p = k;
        for i in k + 1..n {
            if w[(i, k)].abs() > w[(p, k)].abs() {
                p = i;
            }
        }
        if w[(p, k)].abs() < floor || w[(p, k)] == 0.0 {
            return Err(Error::SingularMatrix { step: k });
        }
        if p != k {
            for j in 0..n {
                let t = w[(k, j)];
                w[(k, j)] = w[(p, j)];
                w[(p, j)] = t;
            }
            perm.swap(k, p);
        }
        let pivot = w[(k, k)];
        for i in k + 1..n {
            let l = w[(i, k)] / pivot;
            w[(i, k)] = l;
            for j in k + 1..n {
                w[(i, j)] -= l * w[(k, j)];
            }
        }
    }
    let l = DenseMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Greater => w[(i, j)],
        std::cmp::Ordering::Equal => 1.0,
        std::cmp::Ordering::Less => 0.0,
    });
    let u = DenseMatrix::from_fn(n, n, |i, j| if j >= i { w[(i, j)] } else { 0.0 });
    Ok(SerialLu { perm, l, u })
}

/// Serial back substitution for an upper-triangular system.
pub fn serial_upper_solve(u: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = u.cols();
    if u.rows() < n || b.len() < n {
        return Err(Error::InvalidDimensions(format!(
            "{}x{} triangular factor with a right-hand side of length {}",
            u.rows(),
            n,
            b.len()
        )));
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let d = u[(i, i)];
        if d == 0.0 {
            return Err(Error::ZeroDiagonal { row: i });
        }
        let s: f64 = (i + 1..n).map(|j| u[(i, j)] * x[j]).sum();
        x[i] = (b[i] - s) / d;
    }
    Ok(x)
}

/// Least squares by serial Householder QR. Fails with `RankDeficient` when a
/// column is numerically dependent on the ones before it.
pub fn serial_least_squares(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let (m, n) = (a.rows(), a.cols());
    if m < n || b.len() != m {
        return Err(Error::InvalidDimensions(format!(
            "least squares needs m >= n and len(b) = m, got {m}x{n}, len {}",
            b.len()
        )));
    }
    let mut r = a.clone();
    let mut y = b.to_vec();
    let scale = a.max_abs();
    for k in 0..n {
        let norm = (k..m).map(|i| r[(i, k)] * r[(i, k)]).sum::<f64>().sqrt();
        if norm <= 1e-12 * scale.max(f64::MIN_POSITIVE) * (m as f64) {
            return Err(Error::RankDeficient { step: k });
        }
        let alpha = if r[(k, k)] >= 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..m).map(|i| r[(i, k)]).collect();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        for j in k..n {
            let d: f64 = v.iter().zip(k..m).map(|(vi, i)| vi * r[(i, j)]).sum();
            let f = 2.0 * d / vv;
            for (vi, i) in v.iter().zip(k..m) {
                r[(i, j)] -= f * vi;
            }
        }
        let d: f64 = v.iter().zip(&y[k..]).map(|(vi, yi)| vi * yi).sum();
        let f = 2.0 * d / vv;
        for (vi, yi) in v.iter().zip(&mut y[k..]) {
            *yi -= f * vi;
        }
    }
    serial_upper_solve(&r, &y)
}

const ORACLE_MAX_SWEEPS: usize = 60;

/// Cyclic-by-rows two-sided Jacobi on a symmetric matrix.
///
/// Returns eigenvalues in diagonal order (unsorted) and the orthogonal `V`
/// with `Vᵀ·B·V ≈ diag(eigenvalues)`.
pub fn serial_jacobi_oracle(b: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    let asym = b.asymmetry().ok_or_else(|| {
        Error::InvalidDimensions(format!("{}x{} matrix is not square", b.rows(), b.cols()))
    })?;
    let fro = b.norm(NormKind::Frobenius);
    if asym > 1e-12 * fro {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    let n = b.rows();
    let mut a = b.clone();
    let mut v = DenseMatrix::identity(n);
    let off = |a: &DenseMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)] * a[(i, j)];
                }
            }
        }
        s.sqrt()
    };
    for sweep in 0..=ORACLE_MAX_SWEEPS {
        if off(&a) <= 1e-14 * fro {
            return Ok(((0..n).map(|i| a[(i, i)]).collect(), v));
        }
        if sweep == ORACLE_MAX_SWEEPS {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                // Golub & Van Loan sym.schur2
                let tau = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let best = crate::jacobi::EigResult::from_parts(
        (0..n).map(|i| a[(i, i)]).collect(),
        v,
        ORACLE_MAX_SWEEPS,
        Default::default(),
    );
    Err(Error::EigNoConvergence {
        sweeps: ORACLE_MAX_SWEEPS,
        best: Box::new(best),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn generate_identity_and_determinism() {
        assert_eq!(
            generate(MatrixKind::Identity, 3, 3, 99).unwrap(),
            DenseMatrix::identity(3)
        );
        let a = generate(MatrixKind::RandomUniform, 4, 4, 7).unwrap();
        let b = generate(MatrixKind::RandomUniform, 4, 4, 7).unwrap();
        assert_eq!(
            a.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert!(a.as_slice().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn generate_shapes() {
        let u = generate(MatrixKind::UpperTriangular, 4, 4, 1).unwrap();
        for i in 0..4 {
            for j in 0..i {
                assert_eq!(u[(i, j)], 0.0);
            }
        }
        let b = generate(MatrixKind::Band(1), 5, 5, 3).unwrap();
        assert_eq!(b[(0, 2)], 0.0);
        assert_eq!(b[(4, 1)], 0.0);
        let h = generate(MatrixKind::Hilbert, 2, 2, 0).unwrap();
        assert_eq!(h[(1, 1)], 1.0 / 3.0);
    }

    #[test]
    fn generate_rejects_bad_dimensions() {
        assert!(matches!(
            generate(MatrixKind::Identity, 0, 3, 0),
            Err(Error::InvalidDimensions(_))
        ));
        assert!(generate(MatrixKind::Band(3), 3, 3, 0).is_err());
    }

    #[test]
    fn constructor_rejects_non_finite() {
        assert!(DenseMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(DenseMatrix::new(1, 2, vec![1.0]).is_err());
    }

    #[test]
    fn norms() {
        assert_eq!(DenseMatrix::identity(2).norm(NormKind::Frobenius), 2f64.sqrt());
        assert_eq!(m(&[&[1.0, -3.0], &[2.0, 2.0]]).norm(NormKind::Inf), 4.0);
        assert_eq!(DenseMatrix::zeros(3, 2).norm(NormKind::MaxAbs), 0.0);
    }

    #[test]
    fn permutation_validation() {
        assert!(PermutationVector::new(vec![0, 0]).is_err());
        assert!(PermutationVector::new(vec![0, 2]).is_err());
        let p = PermutationVector::new(vec![2, 0, 1]).unwrap();
        assert_eq!(p.inverse().as_slice(), &[1, 2, 0]);
        let a = generate(MatrixKind::RandomUniform, 3, 3, 5).unwrap();
        let pa = a.permute_rows(&p).unwrap();
        assert_eq!(pa, p.to_matrix().matmul(&a).unwrap());
        let api = a.permute_cols(&p).unwrap();
        assert_eq!(api, a.matmul(&p.to_matrix().transpose()).unwrap());
    }

    #[test]
    fn lu_oracle_examples() {
        let f = serial_lu_oracle(&m(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert_eq!(f.perm.as_slice(), &[1, 0]);
        assert_eq!(f.l, DenseMatrix::identity(2));
        assert_eq!(f.u, DenseMatrix::identity(2));

        let f = serial_lu_oracle(&DenseMatrix::identity(4)).unwrap();
        assert!(f.perm.is_identity());
        assert_eq!(f.l, DenseMatrix::identity(4));
        assert_eq!(f.u, DenseMatrix::identity(4));

        let a = m(&[&[2.0, 1.0], &[1.0, 1.0]]);
        let f = serial_lu_oracle(&a).unwrap();
        assert!(f.perm.is_identity());
        assert_eq!(f.l, m(&[&[1.0, 0.0], &[0.5, 1.0]]));
        assert_eq!(f.u, m(&[&[2.0, 1.0], &[0.0, 0.5]]));
        assert_eq!(f.l.matmul(&f.u).unwrap(), a);
    }

    #[test]
    fn lu_oracle_singular() {
        let a = m(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(matches!(
            serial_lu_oracle(&a),
            Err(Error::SingularMatrix { step: 1 })
        ));
    }

    #[test]
    fn jacobi_oracle_examples() {
        let (ev, v) = serial_jacobi_oracle(&DenseMatrix::diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(ev, vec![3.0, 1.0, 2.0]);
        assert_eq!(v, DenseMatrix::identity(3));

        let (mut ev, _) = serial_jacobi_oracle(&m(&[&[2.0, 1.0], &[1.0, 2.0]])).unwrap();
        ev.sort_by(|a, b| b.total_cmp(a));
        assert!((ev[0] - 3.0).abs() < 1e-14 && (ev[1] - 1.0).abs() < 1e-14);

        let (ev, _) = serial_jacobi_oracle(&DenseMatrix::zeros(3, 3)).unwrap();
        assert_eq!(ev, vec![0.0; 3]);

        assert!(matches!(
            serial_jacobi_oracle(&m(&[&[1.0, 2.0], &[0.0, 1.0]])),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn jacobi_oracle_diagonalizes_random() {
        let a = generate(MatrixKind::RandomUniform, 10, 10, 11).unwrap();
        let b = DenseMatrix::from_fn(10, 10, |i, j| a[(i, j)] + a[(j, i)]);
        let (ev, v) = serial_jacobi_oracle(&b).unwrap();
        let vtbv = v.transpose().matmul(&b).unwrap().matmul(&v).unwrap();
        let resid = vtbv.sub(&DenseMatrix::diag(&ev)).unwrap();
        assert!(resid.norm(NormKind::Frobenius) <= 1e-10 * b.norm(NormKind::Frobenius));
        let vtv = v.transpose().matmul(&v).unwrap();
        assert!(vtv.sub(&DenseMatrix::identity(10)).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn least_squares_and_triangular_solve() {
        let x = serial_least_squares(&m(&[&[1.0], &[1.0]]), &[0.0, 2.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15);
        let u = m(&[&[1.0, 1.0], &[0.0, 1.0]]);
        assert_eq!(serial_upper_solve(&u, &[2.0, 1.0]).unwrap(), vec![1.0, 1.0]);
        assert!(serial_least_squares(&m(&[&[1.0, 2.0], &[2.0, 4.0], &[3.0, 6.0]]), &[1.0; 3])
            .is_err());
    }
}
