//! Job assignment matrices: which agent holds which share of each input
//! function. Column `i` of a `k × n` matrix gives agent `i`'s weights.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::linalg::{combinations, Matrix};
use crate::scalar::Scalar;

/// Column sums must be within this of one.
pub const COLUMN_SUM_TOL: f64 = 1e-12;
/// Default relative pivot tolerance for rank decisions.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssignmentError {
    #[error("assignment matrix must have at least one row and one column")]
    Empty,
    #[error("assignment matrix rows have different lengths")]
    Ragged,
    #[error("entry ({row}, {col}) is negative or not finite: {value}")]
    BadEntry { row: usize, col: usize, value: f64 },
    #[error("column {col} sums to {sum}, expected 1")]
    ColumnSum { col: usize, sum: f64 },
    #[error("sparsity {s} outside 1..={n}")]
    BadSparsity { s: usize, n: usize },
    #[error("zero pattern leaves column {column} without a nonzero entry")]
    InfeasiblePattern { column: usize },
}

/// Nonnegative, column-stochastic `k × n` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct AssignmentMatrix<T> {
    m: Matrix<T>,
}

impl<T: Scalar> AssignmentMatrix<T> {
    pub fn new(rows: &[Vec<T>]) -> Result<Self, AssignmentError> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(AssignmentError::Empty);
        }
        let m = Matrix::from_rows(rows).ok_or(AssignmentError::Ragged)?;
        Self::from_matrix(m)
    }

    pub fn from_matrix(m: Matrix<T>) -> Result<Self, AssignmentError> {
        if m.rows() == 0 || m.cols() == 0 {
            return Err(AssignmentError::Empty);
        }
        for j in 0..m.rows() {
            for i in 0..m.cols() {
                let v = m[(j, i)];
                if !v.is_finite() || v < T::zero() {
                    return Err(AssignmentError::BadEntry { row: j, col: i, value: v.to_f64_lossy() });
                }
            }
        }
        let tol = T::lit(COLUMN_SUM_TOL).max(T::epsilon() * T::lit(8.0));
        for i in 0..m.cols() {
            let sum: T = m.column(i).into_iter().sum();
            if (sum - T::one()).abs() > tol {
                return Err(AssignmentError::ColumnSum { col: i, sum: sum.to_f64_lossy() });
            }
        }
        Ok(Self { m })
    }

    /// `I_k`: agent `i` holds exactly function `i`.
    pub fn identity(k: usize) -> Result<Self, AssignmentError> {
        Self::from_matrix(Matrix::identity(k))
    }

    /// `copies` consecutive agents per function: agent `i` holds function
    /// `i / copies`. `k = 1` gives the all-ones repetition code.
    pub fn repetition(k: usize, copies: usize) -> Result<Self, AssignmentError> {
        let n = k * copies;
        let mut m = Matrix::zeros(k, n);
        for i in 0..n {
            m[(i / copies.max(1), i)] = T::one();
        }
        Self::from_matrix(m)
    }

    /// Normalizes each column of a nonnegative matrix to sum one.
    pub fn normalized(rows: &[Vec<T>]) -> Result<Self, AssignmentError> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(AssignmentError::Empty);
        }
        let mut m = Matrix::from_rows(rows).ok_or(AssignmentError::Ragged)?;
        for i in 0..m.cols() {
            let sum: T = m.column(i).into_iter().sum();
            if sum <= T::zero() {
                return Err(AssignmentError::InfeasiblePattern { column: i });
            }
            for j in 0..m.rows() {
                m[(j, i)] = m[(j, i)] / sum;
            }
        }
        Self::from_matrix(m)
    }

    pub fn k(&self) -> usize {
        self.m.rows()
    }

    pub fn n(&self) -> usize {
        self.m.cols()
    }

    /// `A_ji`, weight of function `j` at agent `i`.
    pub fn entry(&self, j: usize, i: usize) -> T {
        self.m[(j, i)]
    }

    /// Agent `i`'s weights over the `k` functions.
    pub fn column(&self, i: usize) -> Vec<T> {
        self.m.column(i)
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.m
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.m.to_rows()
    }

    /// Codeword `d · A` for a `k`-vector `d`.
    pub fn encode(&self, d: &[T]) -> Vec<T> {
        self.m.vec_mul(d)
    }

    fn row_zeros(&self, j: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.m[(j, i)] == T::zero()).collect()
    }

    fn max_row_zeros(&self) -> usize {
        (0..self.k()).map(|j| self.row_zeros(j).len()).max().unwrap_or(0)
    }
}

impl<T: Scalar + Serialize> Serialize for AssignmentMatrix<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SparsityReport {
    /// `sp(A)` in `1..=n+1`.
    pub value: usize,
    /// `value − 1` columns whose sum has a zero coordinate; all `n` columns
    /// when `value = n + 1`.
    pub witness: Vec<usize>,
    pub max_row_zeros: usize,
}

/// Smallest `m` such that every `m` columns sum to a positive vector, by
/// trying every subset of columns.
pub fn sparsity_by_definition<T: Scalar>(a: &AssignmentMatrix<T>) -> SparsityReport {
    let (k, n) = (a.k(), a.n());
    let positive_sum = |cols: &[usize]| {
        (0..k).all(|j| cols.iter().map(|&i| a.entry(j, i)).fold(T::zero(), |s, v| s + v) > T::zero())
    };
    let mut witness = Vec::new();
    for m in 1..=n {
        match combinations(n, m).find(|c| !positive_sum(c)) {
            Some(bad) => witness = bad,
            None => return SparsityReport { value: m, witness, max_row_zeros: a.max_row_zeros() },
        }
    }
    SparsityReport { value: n + 1, witness: (0..n).collect(), max_row_zeros: a.max_row_zeros() }
}

/// `sp(A)` as one plus the largest number of zeros in a row, or `n + 1`
/// when some row is entirely zero.
pub fn sparsity_by_row_zeros<T: Scalar>(a: &AssignmentMatrix<T>) -> SparsityReport {
    let n = a.n();
    let max_row_zeros = a.max_row_zeros();
    if max_row_zeros == n {
        return SparsityReport { value: n + 1, witness: (0..n).collect(), max_row_zeros };
    }
    let witness = (0..a.k())
        .map(|j| a.row_zeros(j))
        .find(|z| z.len() == max_row_zeros)
        .unwrap_or_default();
    SparsityReport { value: max_row_zeros + 1, witness, max_row_zeros }
}

/// Where the `s − 1` zeros of each row go.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Deserialize, Serialize)]
#[serde(tag = "kind", content = "seed", rename_all = "snake_case")]
pub enum ZeroPattern {
    /// Row `j` is nonzero on the `n − s + 1` consecutive columns (mod `n`)
    /// starting at `⌊j·n/k⌋`. Covers every column whenever
    /// `k (n − s + 1) ≥ n`, which any pattern needs.
    Cyclic,
    /// Zero positions drawn per row from a seeded generator.
    Seeded(u64),
}

/// Builds a `k × n` matrix with exactly `s − 1` zeros per row, equal
/// nonzero entries, and normalized columns, so that `sp(A) = s`.
pub fn construct_sparsest<T: Scalar>(
    k: usize,
    n: usize,
    s: usize,
    pattern: ZeroPattern,
) -> Result<AssignmentMatrix<T>, AssignmentError> {
    if k == 0 || n == 0 {
        return Err(AssignmentError::Empty);
    }
    if s == 0 || s > n {
        return Err(AssignmentError::BadSparsity { s, n });
    }
    let zeros = s - 1;
    let mut rows = vec![vec![T::one(); n]; k];
    match pattern {
        ZeroPattern::Cyclic => {
            for (j, row) in rows.iter_mut().enumerate() {
                let start = j * n / k;
                for t in 0..zeros {
                    row[(start + n - s + 1 + t) % n] = T::zero();
                }
            }
        }
        ZeroPattern::Seeded(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for row in rows.iter_mut() {
                for i in index::sample(&mut rng, n, zeros) {
                    row[i] = T::zero();
                }
            }
        }
    }
    if let Some(column) = (0..n).find(|&i| rows.iter().all(|r| r[i] == T::zero())) {
        return Err(AssignmentError::InfeasiblePattern { column });
    }
    AssignmentMatrix::normalized(&rows)
}

/// Whether `A` corrects any `f` entry-wise errors: `n ≥ 2f + k` and the
/// columns left after deleting any `2f` of them still have rank `k`.
pub fn decoding_capability<T: Scalar>(a: &AssignmentMatrix<T>, f: usize, rel_tol: T) -> bool {
    let (k, n) = (a.k(), a.n());
    if n < 2 * f + k {
        return false;
    }
    combinations(n, 2 * f).all(|erased| {
        let keep: Vec<usize> = (0..n).filter(|i| !erased.contains(i)).collect();
        a.matrix().select_columns(&keep).rank(rel_tol) == k
    })
}
