//! Uniform lattice over the particle box, the wedge of lexicographically
//! non-decreasing `N`-tuples of lattice points, and point location.
//!
//! Cells are half-open `[z, z + delta)` along each axis except the last cell
//! per axis, which also contains the upper face. Every in-domain point
//! therefore lies in exactly one cell.
//!
//! Lattice points are addressed either by their multi-index
//! ([`LatticePoint`]) or by a linear [`CellId`] whose integer order coincides
//! with the lexicographic order of multi-indices (first axis most
//! significant).

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::domain::{Configuration, DomainSpec, Point};
use crate::error::{Error, Result};
use crate::permutation::Permutation;

/// Default upper bound on the number of wedge entries to enumerate.
pub const DEFAULT_WEDGE_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    delta: f64,
    d: usize,
    cells_per_dim: usize,
    lo: f64,
    hi: f64,
}

impl LatticeSpec {
    /// Lattice with spacing `delta` covering `[lo, hi]^d` with
    /// `n = ceil((hi - lo) / delta)` cells per axis.
    pub fn new(delta: f64, d: usize, lo: f64, hi: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::Argument(format!("delta = {delta} must be positive")));
        }
        if d == 0 {
            return Err(Error::Argument("d must be positive".into()));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Argument(format!("invalid box [{lo}, {hi}]")));
        }
        let ratio = (hi - lo) / delta;
        // Absorb rounding noise such as 1.0 / 0.1 = 10.000000000000002.
        let near = ratio.round();
        let n = if (ratio - near).abs() <= 1e-9 * near.max(1.0) {
            near
        } else {
            ratio.ceil()
        };
        if n > u32::MAX as f64 {
            return Err(Error::Argument(format!("{n} cells per axis is too many")));
        }
        let n = (n as usize).max(1);
        let spec = LatticeSpec {
            delta,
            d,
            cells_per_dim: n,
            lo,
            hi,
        };
        spec.total_cells()?;
        Ok(spec)
    }

    pub fn for_domain(delta: f64, domain: &DomainSpec) -> Result<Self> {
        Self::new(delta, domain.d, domain.lo, domain.hi)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn cells_per_dim(&self) -> usize {
        self.cells_per_dim
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// `n^d`, the number of lattice points.
    pub fn total_cells(&self) -> Result<u64> {
        (self.cells_per_dim as u64)
            .checked_pow(self.d as u32)
            .ok_or_else(|| Error::Capacity {
                what: "lattice size n^d".into(),
                required: u128::MAX,
                cap: u64::MAX as u128,
            })
    }

    fn num_cells(&self) -> u64 {
        self.total_cells().expect("validated at construction")
    }

    /// Position of the lower corner of cell `k` along one axis.
    pub fn axis_corner(&self, k: usize) -> f64 {
        self.lo + self.delta * k as f64
    }

    pub fn cell_id(&self, z: &LatticePoint) -> Result<CellId> {
        if z.index.len() != self.d {
            return Err(Error::Argument(format!(
                "lattice point has {} indices, expected {}",
                z.index.len(),
                self.d
            )));
        }
        let n = self.cells_per_dim as u64;
        let mut id = 0u64;
        for &k in &z.index {
            if k >= self.cells_per_dim {
                return Err(Error::Argument(format!(
                    "index {k} outside 0..{}",
                    self.cells_per_dim
                )));
            }
            id = id * n + k as u64;
        }
        Ok(CellId(id))
    }

    pub fn lattice_point(&self, id: CellId) -> LatticePoint {
        let n = self.cells_per_dim as u64;
        let mut index = vec![0usize; self.d];
        let mut rest = id.0;
        for slot in index.iter_mut().rev() {
            *slot = (rest % n) as usize;
            rest /= n;
        }
        LatticePoint { index }
    }

    /// Real position of the lattice point (the cell's lower corner).
    pub fn corner(&self, id: CellId) -> Point {
        Point::new(
            self.lattice_point(id)
                .index
                .iter()
                .map(|&k| self.axis_corner(k))
                .collect(),
        )
    }

    /// Real position of the cell centre.
    pub fn center(&self, id: CellId) -> Point {
        Point::new(
            self.lattice_point(id)
                .index
                .iter()
                .map(|&k| self.axis_corner(k) + 0.5 * self.delta)
                .collect(),
        )
    }

    /// Cell index along one axis; `None` outside `[lo, hi]`.
    fn axis_cell(&self, x: f64) -> Option<usize> {
        if !(x >= self.lo && x <= self.hi) {
            return None;
        }
        let last = self.cells_per_dim - 1;
        let mut k = (((x - self.lo) / self.delta).floor() as usize).min(last);
        // Align with the corner positions used everywhere else.
        if k > 0 && x < self.axis_corner(k) {
            k -= 1;
        } else if k < last && x >= self.axis_corner(k + 1) {
            k += 1;
        }
        Some(k)
    }

    pub(crate) fn cell_id_of(&self, x: &Point) -> Result<CellId> {
        let z = cell_of(self, x)?;
        Ok(self.cell_id(&z).expect("cell_of returns valid indices"))
    }

    /// Configuration of the sampling nodes of a wedge entry.
    pub fn node_configuration(&self, z: &WedgeIndex, node: Node) -> Configuration {
        match node {
            Node::Corner => self.corner_configuration(z),
            Node::Center => Configuration {
                points: z.cells.iter().map(|&c| self.center(c)).collect(),
            },
        }
    }

    /// Corner configuration of a wedge entry.
    pub fn corner_configuration(&self, z: &WedgeIndex) -> Configuration {
        Configuration {
            points: z.cells.iter().map(|&c| self.corner(c)).collect(),
        }
    }
}

/// Where in each cell the tabulated function is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    /// The lower corner, the lattice point itself.
    #[default]
    Corner,
    /// The cell centre; halves the worst-case distance to a sample.
    Center,
}

impl Node {
    pub fn as_str(&self) -> &'static str {
        match self {
            Node::Corner => "corner",
            Node::Center => "center",
        }
    }
}

impl std::str::FromStr for Node {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "corner" => Ok(Node::Corner),
            "center" => Ok(Node::Center),
            other => Err(Error::Configuration(format!("unknown node {other:?}"))),
        }
    }
}

/// Multi-index of a lattice point, each entry in `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticePoint {
    pub index: Vec<usize>,
}

impl LatticePoint {
    pub fn new(index: Vec<usize>) -> Self {
        LatticePoint { index }
    }
}

/// Linear lattice-point id; integer order equals lexicographic order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellId(pub u64);

/// A non-decreasing `N`-tuple of lattice points.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WedgeIndex {
    cells: Vec<CellId>,
}

impl WedgeIndex {
    pub fn new(cells: Vec<CellId>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::Argument("wedge entries need N >= 1".into()));
        }
        if cells.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Argument(format!("{cells:?} is not non-decreasing")));
        }
        Ok(WedgeIndex { cells })
    }

    pub fn cells(&self) -> &[CellId] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn all_distinct(&self) -> bool {
        self.cells.windows(2).all(|w| w[0] != w[1])
    }
}

/// Dictionary order on multi-indices.
pub fn lex_compare(a: &LatticePoint, b: &LatticePoint) -> Result<Ordering> {
    if a.index.len() != b.index.len() {
        return Err(Error::Argument(format!(
            "dimension mismatch: {} vs {}",
            a.index.len(),
            b.index.len()
        )));
    }
    Ok(a.index.cmp(&b.index))
}

/// The unique cell containing `x`.
pub fn cell_of(spec: &LatticeSpec, x: &Point) -> Result<LatticePoint> {
    if x.dim() != spec.d {
        return Err(Error::Argument(format!(
            "point has dimension {}, lattice has {}",
            x.dim(),
            spec.d
        )));
    }
    let index = x
        .coords
        .iter()
        .enumerate()
        .map(|(alpha, &c)| {
            spec.axis_cell(c).ok_or_else(|| {
                Error::Domain(format!(
                    "coordinate {alpha} = {c} outside [{}, {}]",
                    spec.lo, spec.hi
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LatticePoint { index })
}

/// Exact binomial coefficient, `None` on overflow.
pub(crate) fn binomial(n: u128, k: u128) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) after the multiplication.
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// `C(n^d + N - 1, N)`, the number of wedge entries.
pub fn wedge_size(spec: &LatticeSpec, n_particles: usize) -> Result<u64> {
    if n_particles == 0 {
        return Err(Error::Argument("N must be positive".into()));
    }
    let m = spec.total_cells()? as u128;
    let n = n_particles as u128;
    let overflow = || Error::Capacity {
        what: "wedge size".into(),
        required: u128::MAX,
        cap: u64::MAX as u128,
    };
    let size = binomial(m + n - 1, n).ok_or_else(overflow)?;
    u64::try_from(size).map_err(|_| Error::Capacity {
        what: "wedge size".into(),
        required: size,
        cap: u64::MAX as u128,
    })
}

/// Lexicographic rank of `z` among all wedge entries of its length.
pub fn wedge_rank(spec: &LatticeSpec, z: &WedgeIndex) -> u64 {
    let m = spec.num_cells() as u128;
    let n = z.len();
    let mut rank: u128 = 0;
    let mut prev: u128 = 0;
    for (i, c) in z.cells.iter().enumerate() {
        let c = c.0 as u128;
        let k = (n - i - 1) as u128;
        // Tuples that agree before position i and hold v in [prev, c) there.
        let below = binomial(m - prev + k, k + 1).expect("bounded by wedge size")
            - binomial(m - c + k, k + 1).expect("bounded by wedge size");
        rank += below;
        prev = c;
    }
    rank as u64
}

/// Inverse of [`wedge_rank`].
pub fn wedge_unrank(spec: &LatticeSpec, n_particles: usize, rank: u64) -> Result<WedgeIndex> {
    let size = wedge_size(spec, n_particles)?;
    if rank >= size {
        return Err(Error::Argument(format!("rank {rank} >= wedge size {size}")));
    }
    let m = spec.num_cells() as u128;
    let mut rest = rank as u128;
    let mut prev: u128 = 0;
    let mut cells = Vec::with_capacity(n_particles);
    for i in 0..n_particles {
        let k = (n_particles - i - 1) as u128;
        let top = binomial(m - prev + k, k + 1).expect("bounded by wedge size");
        let count_below = |c: u128| top - binomial(m - c + k, k + 1).expect("bounded");
        // Largest c in [prev, m) with count_below(c) <= rest.
        let (mut lo, mut hi) = (prev, m - 1);
        while lo < hi {
            let mid = lo + (hi - lo).div_ceil(2);
            if count_below(mid) <= rest {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        rest -= count_below(lo);
        prev = lo;
        cells.push(CellId(lo as u64));
    }
    Ok(WedgeIndex { cells })
}

/// Lexicographic iterator over wedge entries, optionally over a rank range.
#[derive(Debug, Clone)]
pub struct WedgeIter {
    current: Option<Vec<CellId>>,
    remaining: u64,
    max_cell: u64,
}

impl ExactSizeIterator for WedgeIter {}

impl Iterator for WedgeIter {
    type Item = WedgeIndex;

    fn next(&mut self) -> Option<WedgeIndex> {
        if self.remaining == 0 {
            return None;
        }
        let cur = self.current.take()?;
        self.remaining -= 1;
        let mut next = cur.clone();
        if let Some(i) = next.iter().rposition(|c| c.0 < self.max_cell) {
            let v = CellId(next[i].0 + 1);
            for c in &mut next[i..] {
                *c = v;
            }
            self.current = Some(next);
        }
        Some(WedgeIndex { cells: cur })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let r = usize::try_from(self.remaining).unwrap_or(usize::MAX);
        (r, Some(r))
    }
}

/// Iterates every wedge entry once, in lexicographic order. Fails with a
/// capacity error when the wedge has more than `cap` entries.
pub fn enumerate_wedge(spec: &LatticeSpec, n_particles: usize, cap: u64) -> Result<WedgeIter> {
    let size = wedge_size(spec, n_particles)?;
    if size > cap {
        return Err(Error::Capacity {
            what: "wedge enumeration".into(),
            required: size as u128,
            cap: cap as u128,
        });
    }
    wedge_range(spec, n_particles, 0, size)
}

/// Wedge entries with ranks in `start..end`.
pub fn wedge_range(
    spec: &LatticeSpec,
    n_particles: usize,
    start: u64,
    end: u64,
) -> Result<WedgeIter> {
    let size = wedge_size(spec, n_particles)?;
    let end = end.min(size);
    if start >= end {
        return Ok(WedgeIter {
            current: None,
            remaining: 0,
            max_cell: 0,
        });
    }
    let first = wedge_unrank(spec, n_particles, start)?;
    Ok(WedgeIter {
        current: Some(first.cells),
        remaining: end - start,
        max_cell: spec.num_cells() - 1,
    })
}

const PAR_CHUNK: u64 = 1024;

/// Applies `f` to every wedge entry in parallel over contiguous rank chunks.
/// Results come back in rank order; the first failing rank wins, so the
/// outcome does not depend on scheduling.
pub(crate) fn par_map_wedge<T, F>(
    spec: &LatticeSpec,
    n_particles: usize,
    cap: u64,
    f: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, &WedgeIndex) -> Result<T> + Sync,
{
    use rayon::prelude::*;
    let size = enumerate_wedge(spec, n_particles, cap)?.len() as u64;
    let chunks = size.div_ceil(PAR_CHUNK);
    let parts: Vec<Result<Vec<T>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * PAR_CHUNK;
            wedge_range(spec, n_particles, start, start + PAR_CHUNK)?
                .enumerate()
                .map(|(k, z)| f(start + k as u64, &z))
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(size as usize);
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}

/// Product of the factorials of the multiplicities of repeated lattice points.
pub fn repetition_constant(z: &WedgeIndex) -> u64 {
    let mut total = 1u64;
    let mut run = 1u64;
    for w in z.cells.windows(2) {
        if w[0] == w[1] {
            run += 1;
            total *= run;
        } else {
            run = 1;
        }
    }
    total
}

/// Location of a configuration on the lattice: the wedge entry of its cells
/// and the permutation sending input slot `i` to wedge slot `sigma(i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellAssignment {
    pub wedge: WedgeIndex,
    pub sigma: Permutation,
    pub repetition: u64,
}

impl CellAssignment {
    pub fn parity(&self) -> i32 {
        self.sigma.parity()
    }
}

/// Sorts the cells of `x` into a wedge entry. Points sharing a cell keep
/// their input order (stable sort).
pub fn locate(spec: &LatticeSpec, x: &Configuration) -> Result<CellAssignment> {
    if x.is_empty() {
        return Err(Error::Argument("empty configuration".into()));
    }
    let ids = x
        .points
        .iter()
        .map(|p| spec.cell_id_of(p))
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by_key(|&i| ids[i]);
    let mut slot = vec![0usize; ids.len()];
    for (k, &i) in order.iter().enumerate() {
        slot[i] = k;
    }
    let wedge = WedgeIndex {
        cells: order.iter().map(|&i| ids[i]).collect(),
    };
    let repetition = repetition_constant(&wedge);
    Ok(CellAssignment {
        wedge,
        sigma: Permutation::new(slot).expect("slots form a permutation"),
        repetition,
    })
}

/// Quintic smoothstep `6t^5 - 15t^4 + 10t^3` clamped to `[0, 1]`.
fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

/// One-axis cutoff for the cell with faces `a < b`: 1 on `[a+w, b-w]`,
/// 0 outside `[a-w, b+w]`, exactly 1/2 on the faces.
fn axis_cutoff(a: f64, b: f64, x: f64, w: f64) -> f64 {
    if x <= a - w || x >= b + w {
        0.0
    } else if x < a + w {
        smoothstep(0.5 + (x - a) / (2.0 * w))
    } else if x <= b - w {
        1.0
    } else {
        smoothstep(0.5 - (x - b) / (2.0 * w))
    }
}

fn axis_cutoff_k(spec: &LatticeSpec, k: usize, x: f64, w: f64) -> f64 {
    axis_cutoff(spec.axis_corner(k), spec.axis_corner(k + 1), x, w)
}

fn check_width(spec: &LatticeSpec, w: f64) -> Result<()> {
    if !(w > 0.0 && w <= spec.delta / 2.0) {
        return Err(Error::Argument(format!(
            "cutoff width {w} outside (0, delta/2 = {}]",
            spec.delta / 2.0
        )));
    }
    Ok(())
}

/// Smooth replacement of the box indicator of cell `z`, a tensor product of
/// one-axis smoothstep profiles.
pub fn smooth_cutoff(spec: &LatticeSpec, z: &LatticePoint, x: &Point, w: f64) -> Result<f64> {
    check_width(spec, w)?;
    if z.index.len() != spec.d || x.dim() != spec.d {
        return Err(Error::Argument("dimension mismatch".into()));
    }
    Ok(z.index
        .iter()
        .zip(&x.coords)
        .map(|(&k, &c)| axis_cutoff_k(spec, k, c, w))
        .product())
}

/// Cells carrying non-zero cutoff weight at `x`, with weights normalised to
/// sum to one. Listed in increasing [`CellId`] order.
pub fn normalized_cell_weights(
    spec: &LatticeSpec,
    x: &Point,
    w: f64,
) -> Result<Vec<(CellId, f64)>> {
    check_width(spec, w)?;
    let home = cell_of(spec, x)?;
    let n = spec.cells_per_dim;
    // Per axis: neighbouring cells and their normalised 1-D weights.
    let mut axes: Vec<Vec<(usize, f64)>> = Vec::with_capacity(spec.d);
    for (alpha, &c) in x.coords.iter().enumerate() {
        let k0 = home.index[alpha];
        let mut entries: Vec<(usize, f64)> = (k0.saturating_sub(1)..=(k0 + 1).min(n - 1))
            .map(|k| (k, axis_cutoff_k(spec, k, c, w)))
            .filter(|&(_, v)| v > 0.0)
            .collect();
        let total: f64 = entries.iter().map(|e| e.1).sum();
        for e in &mut entries {
            e.1 /= total;
        }
        axes.push(entries);
    }
    let mut out: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 1.0)];
    for axis in &axes {
        out = out
            .into_iter()
            .flat_map(|(idx, wt)| {
                axis.iter().map(move |&(k, v)| {
                    let mut idx = idx.clone();
                    idx.push(k);
                    (idx, wt * v)
                })
            })
            .collect();
    }
    Ok(out
        .into_iter()
        .map(|(idx, wt)| {
            (
                spec.cell_id(&LatticePoint { index: idx })
                    .expect("neighbour indices are in range"),
                wt,
            )
        })
        .collect())
}
