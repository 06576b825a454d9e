//! Symmetric-polynomial machinery: power sums, elementary symmetric
//! polynomials, power-sum inversion in one dimension, and symmetrized
//! monomials evaluated directly, through a permanent, and in the
//! sum-decomposition feature form `phi(sum_j g(x_j))`.

use itertools::Itertools;
use nalgebra::{DMatrix, Schur};

use crate::domain::{Configuration, Point};
use crate::error::{Error, Result};
use crate::permanent::{permanent_ryser_logdomain, SquareMatrix};

/// Largest `N` for subset enumeration in [`elementary_direct`].
pub const ELEMENTARY_DIRECT_LIMIT: usize = 12;
/// Largest `N` for the `N!` enumeration in [`symmetrized_monomial`].
pub const MONOMIAL_DIRECT_LIMIT: usize = 8;
/// Largest `N` for the permanent route [`symmetrized_monomial_ryser`].
pub const MONOMIAL_RYSER_LIMIT: usize = 20;
/// Largest `N` for [`feature_form_eval`] (`2^N` features per term).
pub const FEATURE_FORM_LIMIT: usize = 12;

const INVERSION_TOLERANCE: f64 = 1e-7;

/// Power sums `E_q = sum_n x_n^q` for `q = 0..=N`; `values[0] == N`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSums {
    pub values: Vec<f64>,
}

impl PowerSums {
    /// Number of variables `N` implied by the length of `values`.
    pub fn n(&self) -> usize {
        self.values.len().saturating_sub(1)
    }
}

pub fn power_sums(xs: &[f64]) -> PowerSums {
    let n = xs.len();
    let values = (0..=n)
        .map(|q| {
            if q == 0 {
                n as f64
            } else {
                xs.iter().map(|x| x.powi(q as i32)).sum()
            }
        })
        .collect();
    PowerSums { values }
}

/// `e_k` by enumerating all `k`-subsets.
pub fn elementary_direct(xs: &[f64], k: usize) -> Result<f64> {
    let n = xs.len();
    if n > ELEMENTARY_DIRECT_LIMIT {
        return Err(Error::SizeLimit {
            n,
            limit: ELEMENTARY_DIRECT_LIMIT,
        });
    }
    if k == 0 || k > n {
        return Err(Error::Argument(format!("k = {k} outside 1..={n}")));
    }
    Ok(xs
        .iter()
        .combinations(k)
        .map(|c| c.into_iter().product::<f64>())
        .sum())
}

/// `e_0, ..., e_N` from power sums by the Newton-Girard recurrence
/// `k e_k = sum_{i=1}^{k} (-1)^{i-1} e_{k-i} E_i`, which equals the
/// determinant form expanded along its last column.
pub fn elementary_all_from_power_sums(ps: &PowerSums) -> Vec<f64> {
    let n = ps.n();
    let mut e = vec![0.0; n + 1];
    e[0] = 1.0;
    for k in 1..=n {
        let mut acc = 0.0;
        for i in 1..=k {
            let term = e[k - i] * ps.values[i];
            if i % 2 == 1 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        e[k] = acc / k as f64;
    }
    e
}

/// A single `e_k`, `1 <= k <= N`.
pub fn elementary_from_power_sums(ps: &PowerSums, k: usize) -> Result<f64> {
    let n = ps.n();
    if k == 0 || k > n {
        return Err(Error::Argument(format!("k = {k} outside 1..={n}")));
    }
    Ok(elementary_all_from_power_sums(ps)[k])
}

fn horner(coeffs_high_first: &[f64], t: f64) -> (f64, f64) {
    let mut p = 0.0;
    let mut dp = 0.0;
    for &c in coeffs_high_first {
        dp = dp * t + p;
        p = p * t + c;
    }
    (p, dp)
}

/// Recovers the multiset `{x_n}` from its power sums as the roots of
/// `t^N - e_1 t^{N-1} + e_2 t^{N-2} - ... + (-1)^N e_N`, found as the
/// eigenvalues of the companion matrix and refined by Newton steps.
/// The result is sorted ascending.
pub fn invert_power_sums(ps: &PowerSums) -> Result<Vec<f64>> {
    let n = ps.n();
    if n == 0 {
        return Err(Error::InversionFailure("no power sums given".into()));
    }
    if ps.values[0] != n as f64 {
        return Err(Error::InversionFailure(format!(
            "E_0 = {} but {} power sums imply N = {n}",
            ps.values[0],
            n + 1
        )));
    }
    if ps.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InversionFailure("non-finite power sum".into()));
    }
    let e = elementary_all_from_power_sums(ps);
    // Monic coefficients, highest degree first: a_k = (-1)^k e_k.
    let coeffs: Vec<f64> = e
        .iter()
        .enumerate()
        .map(|(k, &ek)| if k % 2 == 0 { ek } else { -ek })
        .collect();

    // Companion matrix of t^N + c_1 t^{N-1} + ... + c_N.
    let companion = DMatrix::from_fn(n, n, |i, j| {
        if j == n - 1 {
            -coeffs[n - i]
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let schur = Schur::try_new(companion, f64::EPSILON, 100_000)
        .ok_or_else(|| Error::InversionFailure("eigenvalue iteration did not converge".into()))?;
    let eig = schur.complex_eigenvalues();

    let mut roots = Vec::with_capacity(n);
    for z in eig.iter() {
        if z.im.abs() > INVERSION_TOLERANCE {
            return Err(Error::InversionFailure(format!(
                "complex root {} {:+}i",
                z.re, z.im
            )));
        }
        roots.push(polish_root(&coeffs, z.re));
    }
    roots.sort_by(f64::total_cmp);

    let check = power_sums(&roots);
    for (q, (a, b)) in check.values.iter().zip(&ps.values).enumerate() {
        if (a - b).abs() > INVERSION_TOLERANCE {
            return Err(Error::InversionFailure(format!(
                "residual {} in E_{q} exceeds {INVERSION_TOLERANCE}",
                (a - b).abs()
            )));
        }
    }
    Ok(roots)
}

/// Newton refinement that only accepts steps reducing `|p|`.
fn polish_root(coeffs: &[f64], mut t: f64) -> f64 {
    let (mut p, mut dp) = horner(coeffs, t);
    for _ in 0..50 {
        if p == 0.0 || dp == 0.0 {
            break;
        }
        let next = t - p / dp;
        let (pn, dpn) = horner(coeffs, next);
        if pn.abs() >= p.abs() {
            break;
        }
        t = next;
        p = pn;
        dp = dpn;
    }
    t
}

/// Exponents `gamma[i][alpha]` of an `N x d` monomial
/// `prod_i prod_alpha x_{i,alpha}^{gamma_{i,alpha}}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonomialExponents {
    n: usize,
    d: usize,
    gamma: Vec<u32>,
}

impl MonomialExponents {
    pub fn new(n: usize, d: usize, gamma: Vec<u32>) -> Result<Self> {
        if n == 0 || d == 0 || gamma.len() != n * d {
            return Err(Error::Argument(format!(
                "exponent table must be {n} x {d} and non-empty"
            )));
        }
        Ok(MonomialExponents { n, d, gamma })
    }

    pub fn from_rows<R: AsRef<[u32]>>(rows: &[R]) -> Result<Self> {
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != d) {
            return Err(Error::Argument("ragged exponent rows".into()));
        }
        Self::new(
            rows.len(),
            d,
            rows.iter().flat_map(|r| r.as_ref().to_vec()).collect(),
        )
    }

    pub fn zeros(n: usize, d: usize) -> Self {
        MonomialExponents {
            n,
            d,
            gamma: vec![0; n * d],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, alpha: usize) -> u32 {
        self.gamma[i * self.d + alpha]
    }

    /// `f_i(x) = prod_alpha x_alpha^{gamma_{i,alpha}}`.
    pub fn row_monomial(&self, i: usize, x: &Point) -> f64 {
        (0..self.d)
            .map(|alpha| x.coords[alpha].powi(self.get(i, alpha) as i32))
            .product()
    }

    fn check_shape(&self, x: &Configuration) -> Result<()> {
        if x.len() != self.n || x.dim() != self.d {
            return Err(Error::Argument(format!(
                "exponents are {} x {}, configuration is {} x {}",
                self.n,
                self.d,
                x.len(),
                x.dim()
            )));
        }
        Ok(())
    }
}

fn check_positive(x: &Configuration) -> Result<()> {
    for (i, p) in x.points.iter().enumerate() {
        for (alpha, &c) in p.coords.iter().enumerate() {
            if !(c > 0.0) {
                return Err(Error::Domain(format!(
                    "coordinate x[{i}][{alpha}] = {c} must be strictly positive"
                )));
            }
        }
    }
    Ok(())
}

/// `sum_{sigma in S(N)} prod_i prod_alpha x_{sigma(i),alpha}^{gamma_{i,alpha}}`
/// by enumerating `S(N)`. Repeated exponent rows are not divided out.
pub fn symmetrized_monomial(gamma: &MonomialExponents, x: &Configuration) -> Result<f64> {
    gamma.check_shape(x)?;
    let n = gamma.n();
    if n > MONOMIAL_DIRECT_LIMIT {
        return Err(Error::SizeLimit {
            n,
            limit: MONOMIAL_DIRECT_LIMIT,
        });
    }
    Ok((0..n)
        .permutations(n)
        .map(|sigma| {
            sigma
                .iter()
                .enumerate()
                .map(|(i, &s)| gamma.row_monomial(i, &x.points[s]))
                .product::<f64>()
        })
        .sum())
}

/// Same value as [`symmetrized_monomial`], as the permanent of
/// `[f_i(x_j)]` through the log-domain Ryser formula. Needs positive
/// coordinates.
pub fn symmetrized_monomial_ryser(gamma: &MonomialExponents, x: &Configuration) -> Result<f64> {
    gamma.check_shape(x)?;
    let n = gamma.n();
    if n > MONOMIAL_RYSER_LIMIT {
        return Err(Error::SizeLimit {
            n,
            limit: MONOMIAL_RYSER_LIMIT,
        });
    }
    check_positive(x)?;
    let a = SquareMatrix::from_fn(n, |i, j| gamma.row_monomial(i, &x.points[j]))?;
    permanent_ryser_logdomain(&a)
}

/// A symmetric polynomial `P = sum_l c_l * sym(gamma_l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymPolyApprox {
    terms: Vec<(f64, MonomialExponents)>,
}

impl SymPolyApprox {
    pub fn new(terms: Vec<(f64, MonomialExponents)>) -> Result<Self> {
        let Some((_, first)) = terms.first() else {
            return Err(Error::Argument("at least one term is required".into()));
        };
        let (n, d) = (first.n(), first.d());
        if terms.iter().any(|(_, g)| g.n() != n || g.d() != d) {
            return Err(Error::Argument("terms must share N and d".into()));
        }
        Ok(SymPolyApprox { terms })
    }

    pub fn terms(&self) -> &[(f64, MonomialExponents)] {
        &self.terms
    }

    pub fn n(&self) -> usize {
        self.terms[0].1.n()
    }

    pub fn d(&self) -> usize {
        self.terms[0].1.d()
    }

    /// `M = L * 2^N`.
    pub fn feature_count(&self) -> usize {
        self.terms.len() << self.n()
    }

    /// `sum_l c_l * symmetrized_monomial(gamma_l, X)`.
    pub fn eval_direct(&self, x: &Configuration) -> Result<f64> {
        let mut total = 0.0;
        for (c, g) in &self.terms {
            total += c * symmetrized_monomial(g, x)?;
        }
        Ok(total)
    }

    /// Per-particle embedding `g(x)`: component `(l, S)` (at index
    /// `l * 2^N + S`, `S` a bitmask over rows) is `ln sum_{j in S} f^l_j(x)`,
    /// with `-inf` for the empty set.
    pub fn embed(&self, x: &Point) -> Vec<f64> {
        let n = self.n();
        let mut out = Vec::with_capacity(self.feature_count());
        for (_, g) in &self.terms {
            let f: Vec<f64> = (0..n).map(|j| g.row_monomial(j, x)).collect();
            for s in 0u64..(1u64 << n) {
                let sum: f64 = (0..n).filter(|j| s >> j & 1 == 1).map(|j| f[j]).sum();
                out.push(if s == 0 { f64::NEG_INFINITY } else { sum.ln() });
            }
        }
        out
    }

    /// Readout `phi(Y) = (-1)^N sum_l c_l sum_S (-1)^{|S|} exp(Y_{l,S})`.
    pub fn readout(&self, y: &[f64]) -> f64 {
        let n = self.n();
        let per_term = 1usize << n;
        let mut total = 0.0;
        for (l, (c, _)) in self.terms.iter().enumerate() {
            let mut inner = 0.0;
            for s in 0..per_term {
                let v = y[l * per_term + s].exp();
                if (s as u64).count_ones().is_multiple_of(2) {
                    inner += v;
                } else {
                    inner -= v;
                }
            }
            total += c * inner;
        }
        if n.is_multiple_of(2) {
            total
        } else {
            -total
        }
    }
}

/// Evaluates `P(X)` as `phi(sum_j g(x_j))`, summing embeddings in particle
/// order.
pub fn feature_form_eval(p: &SymPolyApprox, x: &Configuration) -> Result<f64> {
    p.terms[0].1.check_shape(x)?;
    let n = p.n();
    if n > FEATURE_FORM_LIMIT {
        return Err(Error::SizeLimit {
            n,
            limit: FEATURE_FORM_LIMIT,
        });
    }
    check_positive(x)?;
    let mut y = vec![0.0; p.feature_count()];
    for pt in &x.points {
        for (acc, g) in y.iter_mut().zip(p.embed(pt)) {
            *acc += g;
        }
    }
    Ok(p.readout(&y))
}
