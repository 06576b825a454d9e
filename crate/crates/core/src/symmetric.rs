//! Tabulated approximation of totally symmetric functions.
//!
//! `f` is sampled once per wedge entry `Z` and stored as `f(Z) / C_Z`. The
//! indicator evaluator locates `X` on the lattice and returns the entry of
//! its cell multiset; the smooth evaluator blends neighbouring entries with
//! normalised cutoff weights. Both work on a canonical ordering of `X`, so
//! their output is bit-for-bit permutation invariant.
//!
//! The same table also defines the sum-decomposition `phi(sum_j g(x_j))`:
//! for every `Z` and every subset `S` of its slots, the feature
//! `g_S^Z(x) = ln #{j in S : x in cell z_j}` (negative infinity when the
//! count is zero), and `phi` recombines the features with Ryser's
//! inclusion-exclusion signs.

use serde::{Deserialize, Serialize};

use crate::domain::Configuration;
use crate::error::{Error, Result};
use crate::lattice::{
    locate, normalized_cell_weights, par_map_wedge, repetition_constant, wedge_rank, wedge_size,
    wedge_unrank, CellId, LatticeSpec, Node, WedgeIndex, DEFAULT_WEDGE_CAP,
};
use crate::target::{Symmetry, TargetFunction};

/// Largest `wedge_count * 2^N` for which features are materialised.
pub const FEATURE_FORM_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EvalMode {
    /// Piecewise constant on cell boxes.
    Indicator,
    /// Cutoff blending with transition half-width `width` (`0 < width <= delta/2`).
    Smooth { width: f64 },
}

impl EvalMode {
    pub fn width(&self) -> Option<f64> {
        match *self {
            EvalMode::Indicator => None,
            EvalMode::Smooth { width } => Some(width),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    pub mode: EvalMode,
    pub node: Node,
    pub cap: u64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            mode: EvalMode::Indicator,
            node: Node::Corner,
            cap: DEFAULT_WEDGE_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildStats {
    pub evaluations: u64,
    pub wedge_size: u64,
    /// Set when `delta` exceeds `N^(-1/d)` of the box width, i.e. the lattice
    /// is too coarse to separate `N` particles.
    pub coarse_lattice: bool,
}

pub(crate) fn coarse_lattice(spec: &LatticeSpec, n_particles: usize) -> bool {
    let rel = spec.delta() / (spec.hi() - spec.lo());
    rel > (n_particles as f64).powf(-1.0 / spec.d() as f64)
}

pub(crate) fn check_mode(spec: &LatticeSpec, mode: EvalMode) -> Result<()> {
    if let EvalMode::Smooth { width } = mode {
        if !(width > 0.0 && width <= spec.delta() / 2.0) {
            return Err(Error::Argument(format!(
                "smooth width {width} outside (0, delta/2 = {}]",
                spec.delta() / 2.0
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricTabulator {
    spec: LatticeSpec,
    n_particles: usize,
    /// `f(Z) / C_Z`, indexed by wedge rank.
    values: Vec<f64>,
    mode: EvalMode,
    node: Node,
    stats: BuildStats,
}

/// Samples `f` on every wedge entry.
pub fn build_sym(
    f: &TargetFunction,
    spec: &LatticeSpec,
    n_particles: usize,
    options: BuildOptions,
) -> Result<SymmetricTabulator> {
    if f.symmetry() != Symmetry::Symmetric {
        return Err(Error::Argument(format!(
            "target {:?} is not declared symmetric",
            f.name()
        )));
    }
    check_mode(spec, options.mode)?;
    let values = par_map_wedge(spec, n_particles, options.cap, |_, z| {
        let v = f.eval(&spec.node_configuration(z, options.node));
        if !v.is_finite() {
            return Err(Error::Build(format!(
                "f = {v} at wedge entry {}",
                describe_wedge(spec, z)
            )));
        }
        Ok(v / repetition_constant(z) as f64)
    })?;
    let size = values.len() as u64;
    Ok(SymmetricTabulator {
        spec: *spec,
        n_particles,
        values,
        mode: options.mode,
        node: options.node,
        stats: BuildStats {
            evaluations: size,
            wedge_size: size,
            coarse_lattice: coarse_lattice(spec, n_particles),
        },
    })
}

/// Multi-indices of a wedge entry, for error messages.
pub(crate) fn describe_wedge(spec: &LatticeSpec, z: &WedgeIndex) -> String {
    let parts: Vec<String> = z
        .cells()
        .iter()
        .map(|&c| format!("{:?}", spec.lattice_point(c).index))
        .collect();
    format!("({})", parts.join(", "))
}

impl SymmetricTabulator {
    /// Reassembles a tabulator from stored values (rank order).
    pub fn from_parts(
        spec: LatticeSpec,
        n_particles: usize,
        values: Vec<f64>,
        mode: EvalMode,
        node: Node,
    ) -> Result<Self> {
        check_mode(&spec, mode)?;
        let size = wedge_size(&spec, n_particles)?;
        if values.len() as u64 != size {
            return Err(Error::Format(format!(
                "{} values for a wedge of {size} entries",
                values.len()
            )));
        }
        Ok(SymmetricTabulator {
            spec,
            n_particles,
            values,
            mode,
            node,
            stats: BuildStats {
                evaluations: 0,
                wedge_size: size,
                coarse_lattice: coarse_lattice(&spec, n_particles),
            },
        })
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn mode(&self) -> EvalMode {
        self.mode
    }

    pub fn node(&self) -> Node {
        self.node
    }

    pub fn stats(&self) -> &BuildStats {
        &self.stats
    }

    pub fn wedge_count(&self) -> u64 {
        self.values.len() as u64
    }

    /// Stored values `f(Z) / C_Z` in rank order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Stored value of one wedge entry.
    pub fn value(&self, z: &WedgeIndex) -> Result<f64> {
        if z.len() != self.n_particles {
            return Err(Error::Argument(format!(
                "wedge entry of length {}, expected {}",
                z.len(),
                self.n_particles
            )));
        }
        let max = self.spec.total_cells()?;
        if z.cells().iter().any(|c| c.0 >= max) {
            return Err(Error::Argument("cell id outside the lattice".into()));
        }
        Ok(self.values[wedge_rank(&self.spec, z) as usize])
    }

    pub fn wedge_entry(&self, rank: u64) -> Result<WedgeIndex> {
        wedge_unrank(&self.spec, self.n_particles, rank)
    }

    fn node_value(&self, z: &WedgeIndex) -> f64 {
        self.values[wedge_rank(&self.spec, z) as usize] * repetition_constant(z) as f64
    }

    fn check_input(&self, x: &Configuration) -> Result<()> {
        if x.len() != self.n_particles {
            return Err(Error::Argument(format!(
                "configuration has {} points, expected {}",
                x.len(),
                self.n_particles
            )));
        }
        Ok(())
    }
}

/// Evaluates the approximation at `x`.
pub fn eval_sym(t: &SymmetricTabulator, x: &Configuration) -> Result<f64> {
    t.check_input(x)?;
    match t.mode {
        EvalMode::Indicator => {
            let a = locate(&t.spec, x)?;
            Ok(t.node_value(&a.wedge))
        }
        EvalMode::Smooth { width } => {
            let (sorted, _) = x.canonical_sort();
            let per_point = sorted
                .points
                .iter()
                .map(|p| normalized_cell_weights(&t.spec, p, width))
                .collect::<Result<Vec<_>>>()?;
            let mut total = 0.0;
            for_each_assignment(&per_point, |cells, weight| {
                let mut cells = cells.to_vec();
                cells.sort_unstable();
                let z = WedgeIndex::new(cells).expect("sorted, non-empty");
                total += weight * t.node_value(&z);
            });
            Ok(total)
        }
    }
}

/// Visits every choice of one weighted cell per point, with the product of
/// the chosen weights. Order is fixed by the input lists.
pub(crate) fn for_each_assignment(
    per_point: &[Vec<(CellId, f64)>],
    mut visit: impl FnMut(&[CellId], f64),
) {
    let n = per_point.len();
    let mut choice = vec![0usize; n];
    let mut cells: Vec<CellId> = per_point.iter().map(|w| w[0].0).collect();
    loop {
        let weight: f64 = choice.iter().zip(per_point).map(|(&k, w)| w[k].1).product();
        visit(&cells, weight);
        // Odometer increment, last point fastest.
        let mut i = n;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            choice[i] += 1;
            if choice[i] < per_point[i].len() {
                cells[i] = per_point[i][choice[i]].0;
                break;
            }
            choice[i] = 0;
            cells[i] = per_point[i][0].0;
        }
    }
}

fn feature_guard(t: &SymmetricTabulator) -> Result<u64> {
    if t.mode != EvalMode::Indicator {
        return Err(Error::Argument(
            "the feature form exists for indicator mode only".into(),
        ));
    }
    let m = feature_total(t.wedge_count(), t.n_particles).ok_or(Error::Capacity {
        what: "feature count".into(),
        required: u128::MAX,
        cap: FEATURE_FORM_CAP as u128,
    })?;
    if m > FEATURE_FORM_CAP {
        return Err(Error::Capacity {
            what: "feature materialisation".into(),
            required: m as u128,
            cap: FEATURE_FORM_CAP as u128,
        });
    }
    Ok(m)
}

fn feature_total(wedge_count: u64, n_particles: usize) -> Option<u64> {
    1u64.checked_shl(n_particles as u32)
        .filter(|_| n_particles < 64)
        .and_then(|p| wedge_count.checked_mul(p))
}

/// The per-point feature vector `g(x)` of length `wedge_count * 2^N`.
/// Entry `l * 2^N + S` is `g_S^Z(x)` for the wedge entry of rank `l` and the
/// slot subset with bitmask `S`.
pub fn feature_embedding(t: &SymmetricTabulator, x: &crate::domain::Point) -> Result<Vec<f64>> {
    let m = feature_guard(t)?;
    let cell = t.spec.cell_id(&crate::lattice::cell_of(&t.spec, x)?)?;
    let subsets = 1usize << t.n_particles;
    let mut g = Vec::with_capacity(m as usize);
    for rank in 0..t.wedge_count() {
        let z = t.wedge_entry(rank)?;
        let hits: u32 = z
            .cells()
            .iter()
            .enumerate()
            .map(|(j, &c)| ((c == cell) as u32) << j)
            .sum();
        for s in 0..subsets {
            let count = (hits & s as u32).count_ones();
            g.push(if count == 0 {
                f64::NEG_INFINITY
            } else {
                (count as f64).ln()
            });
        }
    }
    Ok(g)
}

/// The read-out `phi(Y)`.
pub fn feature_readout(t: &SymmetricTabulator, y: &[f64]) -> Result<f64> {
    let m = feature_guard(t)?;
    if y.len() as u64 != m {
        return Err(Error::Argument(format!(
            "feature vector has length {}, expected {m}",
            y.len()
        )));
    }
    let subsets = 1usize << t.n_particles;
    let outer = if t.n_particles.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    };
    let mut total = 0.0;
    for (coef, block) in t.values.iter().zip(y.chunks(subsets)) {
        let mut inner = 0.0;
        for (s, &ys) in block.iter().enumerate().skip(1) {
            let sign = if s.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            inner += sign * ys.exp();
        }
        if inner != 0.0 {
            total += outer * coef * inner;
        }
    }
    Ok(total)
}

/// `phi(sum_j g(x_j))`, features summed in input order.
pub fn eval_sym_feature_form(t: &SymmetricTabulator, x: &Configuration) -> Result<f64> {
    t.check_input(x)?;
    let m = feature_guard(t)? as usize;
    let mut y = vec![0.0; m];
    for p in &x.points {
        for (acc, g) in y.iter_mut().zip(feature_embedding(t, p)?) {
            *acc += g;
        }
    }
    feature_readout(t, &y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureCountReport {
    pub wedge_count: u64,
    pub per_z_features: u64,
    /// `wedge_count * 2^N`.
    pub m: u64,
    /// `2^N (Nd)^(Nd/2) / (epsilon^(Nd) N!)`, constant-free.
    pub theoretical_bound: f64,
    pub exceeds_bound: bool,
    /// Largest spacing meeting `epsilon` for gradient bound `L`.
    pub required_delta: f64,
    pub delta_meets_epsilon: bool,
}

/// Counts the features of `t` and compares with the asymptotic expression
/// for accuracy `epsilon`. Requires `epsilon < sqrt(Nd) N^(-1/d)`.
pub fn feature_count(t: &SymmetricTabulator, epsilon: f64, l: f64) -> Result<FeatureCountReport> {
    let n = t.n_particles;
    let d = t.spec.d();
    check_epsilon(epsilon, n, d)?;
    let per_z = 1u64
        .checked_shl(n as u32)
        .filter(|_| n < 64)
        .ok_or_else(|| Error::Argument(format!("2^{n} features per entry overflow")))?;
    let m = feature_total(t.wedge_count(), n).ok_or(Error::Capacity {
        what: "feature count".into(),
        required: t.wedge_count() as u128 * per_z as u128,
        cap: u64::MAX as u128,
    })?;
    let theoretical_bound = asymptotic_feature_bound(n, d, epsilon);
    let required_delta = delta_for_epsilon(epsilon, n, d, l)?;
    Ok(FeatureCountReport {
        wedge_count: t.wedge_count(),
        per_z_features: per_z,
        m,
        theoretical_bound,
        exceeds_bound: m as f64 > theoretical_bound,
        required_delta,
        delta_meets_epsilon: t.spec.delta() <= required_delta,
    })
}

/// `2^N (Nd)^(Nd/2) / (epsilon^(Nd) N!)`, evaluated in log space.
pub fn asymptotic_feature_bound(n: usize, d: usize, epsilon: f64) -> f64 {
    let nd = (n * d) as f64;
    let log_factorial: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
    (n as f64 * 2f64.ln() + 0.5 * nd * nd.ln() - nd * epsilon.ln() - log_factorial).exp()
}

/// Rejects `epsilon` outside `(0, sqrt(Nd) N^(-1/d))`.
pub fn check_epsilon(epsilon: f64, n: usize, d: usize) -> Result<()> {
    let limit = ((n * d) as f64).sqrt() * (n as f64).powf(-1.0 / d as f64);
    if !(epsilon > 0.0 && epsilon < limit) {
        return Err(Error::Argument(format!(
            "epsilon = {epsilon} must satisfy 0 < epsilon < sqrt(Nd) N^(-1/d) = {limit}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub delta: f64,
    pub n: usize,
    pub d: usize,
    pub l: f64,
    /// `delta * sqrt(N d) * L`.
    pub bound: f64,
}

pub fn error_budget(delta: f64, n: usize, d: usize, l: f64) -> Result<ErrorBudget> {
    if !(delta > 0.0) || n == 0 || d == 0 || !(l >= 0.0) {
        return Err(Error::Argument(format!(
            "error budget needs delta > 0, N, d >= 1, L >= 0 (got {delta}, {n}, {d}, {l})"
        )));
    }
    Ok(ErrorBudget {
        delta,
        n,
        d,
        l,
        bound: delta * ((n * d) as f64).sqrt() * l,
    })
}

/// `epsilon / (sqrt(Nd) L)`; infinite when `L = 0`.
pub fn delta_for_epsilon(epsilon: f64, n: usize, d: usize, l: f64) -> Result<f64> {
    if !(epsilon > 0.0) || n == 0 || d == 0 || !(l >= 0.0) {
        return Err(Error::Argument(format!(
            "delta_for_epsilon needs epsilon > 0, N, d >= 1, L >= 0 (got {epsilon}, {n}, {d}, {l})"
        )));
    }
    Ok(epsilon / (((n * d) as f64).sqrt() * l))
}
