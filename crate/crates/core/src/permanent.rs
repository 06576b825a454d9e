//! Matrix permanents: explicit enumeration and Ryser's inclusion-exclusion
//! formula.

use itertools::Itertools;

use crate::error::{Error, Result};

/// Largest size accepted by [`permanent_bruteforce`].
pub const BRUTEFORCE_LIMIT: usize = 10;
/// Largest size accepted by the Ryser routes.
pub const RYSER_LIMIT: usize = 30;

/// Dense row-major `n x n` real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl SquareMatrix {
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Argument("matrix size must be >= 1".into()));
        }
        if entries.len() != n * n {
            return Err(Error::Argument(format!(
                "expected {} entries, got {}",
                n * n,
                entries.len()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("matrix entries must be finite".into()));
        }
        Ok(SquareMatrix { n, entries })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.as_ref().len() != n) {
            return Err(Error::Argument("rows must have length n".into()));
        }
        Self::new(n, rows.iter().flat_map(|r| r.as_ref().to_vec()).collect())
    }

    /// Builds `A[i][j] = f(i, j)`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::new(n, (0..n * n).map(|k| f(k / n, k % n)).collect())
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        SquareMatrix { n, entries }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self.get(j, i)).expect("finite entries")
    }
}

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `sum_{sigma in S(n)} prod_i A[i][sigma(i)]` by enumerating all `n!`
/// permutations.
pub fn permanent_bruteforce(a: &SquareMatrix) -> Result<f64> {
    let n = a.n();
    if n > BRUTEFORCE_LIMIT {
        return Err(Error::SizeLimit {
            n,
            limit: BRUTEFORCE_LIMIT,
        });
    }
    Ok((0..n)
        .permutations(n)
        .map(|sigma| {
            sigma
                .iter()
                .enumerate()
                .map(|(i, &j)| a.get(i, j))
                .product::<f64>()
        })
        .sum())
}

/// Walks the non-empty column subsets in Gray-code order, calling
/// `visit(row_sums, |S|)` once per subset. Each step adds or removes a single
/// column, so the row sums are maintained in `O(n)`.
fn gray_code_subsets(a: &SquareMatrix, mut visit: impl FnMut(&[f64], u32)) {
    let n = a.n();
    let mut row_sums = vec![0.0; n];
    let mut members: u64 = 0;
    for k in 1u64..(1u64 << n) {
        let col = k.trailing_zeros() as usize;
        let bit = 1u64 << col;
        let sign = if members & bit == 0 { 1.0 } else { -1.0 };
        members ^= bit;
        for (i, s) in row_sums.iter_mut().enumerate() {
            *s += sign * a.get(i, col);
        }
        visit(&row_sums, members.count_ones());
    }
}

fn check_ryser_size(n: usize) -> Result<()> {
    if n > RYSER_LIMIT {
        return Err(Error::SizeLimit {
            n,
            limit: RYSER_LIMIT,
        });
    }
    Ok(())
}

/// Ryser's formula
/// `perm(A) = (-1)^n sum_{S != {}} (-1)^{|S|} prod_i sum_{j in S} A[i][j]`.
pub fn permanent_ryser(a: &SquareMatrix) -> Result<f64> {
    let n = a.n();
    check_ryser_size(n)?;
    let mut total = CompensatedSum::default();
    gray_code_subsets(a, |row_sums, size| {
        let prod: f64 = row_sums.iter().product();
        total.add(if size % 2 == 0 { prod } else { -prod });
    });
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(sign * total.value())
}

/// Ryser's formula with each row-sum product taken as
/// `exp(sum_i ln(sum_{j in S} A[i][j]))`. A vanishing row sum gives `ln 0 = -inf`
/// and the subset contributes `exp(-inf) = 0`.
pub fn permanent_ryser_logdomain(a: &SquareMatrix) -> Result<f64> {
    let n = a.n();
    check_ryser_size(n)?;
    for i in 0..n {
        for j in 0..n {
            if a.get(i, j) < 0.0 {
                return Err(Error::Domain(format!(
                    "entry A[{i}][{j}] = {} is negative",
                    a.get(i, j)
                )));
            }
        }
    }
    let mut total = CompensatedSum::default();
    gray_code_subsets(a, |row_sums, size| {
        // Incremental sums of non-negative entries may leave a tiny negative
        // residue where the exact sum is zero.
        let log_prod: f64 = row_sums
            .iter()
            .map(|&s| if s > 0.0 { s.ln() } else { f64::NEG_INFINITY })
            .sum();
        let term = log_prod.exp();
        total.add(if size % 2 == 0 { term } else { -term });
    });
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(sign * total.value())
}
