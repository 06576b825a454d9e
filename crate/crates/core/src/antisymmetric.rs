//! Tabulated approximation of totally anti-symmetric functions.
//!
//! Each wedge entry `Z` with pairwise distinct cells carries a coefficient
//! `f(Z) / psi^Z(Z)` where `psi^Z` is a Vandermonde product:
//!
//! * construction 1 feeds it the slot each point takes in `Z`
//!   (`y_i = sigma(i) + 1`), so the value is `(-1)^sigma f(Z)`;
//! * construction 2 feeds it projections onto a direction `a^Z`,
//!   `psi^Z(X) = prod_{i<j} a^Z . (x_i - x_j)`, which is continuous in `X`
//!   and admits smooth blending across cell faces.
//!
//! Entries with a repeated cell are never stored; configurations landing
//! there evaluate to zero.

use std::collections::BTreeMap;
use std::hash::Hasher;

use fnv::FnvHasher;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::Configuration;
use crate::error::{Error, Result};
use crate::lattice::{
    locate, normalized_cell_weights, par_map_wedge, wedge_rank, wedge_size, LatticeSpec, Node,
    WedgeIndex, DEFAULT_WEDGE_CAP,
};
use crate::symmetric::{coarse_lattice, describe_wedge, for_each_assignment, BuildStats};
use crate::target::{Symmetry, TargetFunction};

/// Maximum rejection-sampling draws per direction search.
pub const DIRECTION_DRAWS: usize = 1000;
pub const DEFAULT_TAU: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AntisymMode {
    /// Sorting-based equivariant map.
    Construction1,
    /// Linear map `x -> a^Z . x` with separation threshold `tau`.
    Construction2 { tau: f64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntisymOptions {
    pub mode: AntisymMode,
    /// Cutoff half-width for smooth blending (construction 2 only).
    pub smooth: Option<f64>,
    pub node: Node,
    pub cap: u64,
}

impl Default for AntisymOptions {
    fn default() -> Self {
        AntisymOptions {
            mode: AntisymMode::Construction1,
            smooth: None,
            node: Node::Corner,
            cap: DEFAULT_WEDGE_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntisymEntry {
    pub coefficient: f64,
    /// Unit vector `a^Z`; empty for construction 1.
    pub direction: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AntisymTabulator {
    spec: LatticeSpec,
    n_particles: usize,
    mode: AntisymMode,
    smooth: Option<f64>,
    node: Node,
    /// Keyed by wedge rank.
    entries: BTreeMap<u64, AntisymEntry>,
    stats: BuildStats,
}

/// `prod_{i<j} (ys[i] - ys[j])`, factors multiplied in `(i, j)` order.
pub fn vandermonde_product(ys: &[f64]) -> f64 {
    let mut prod = 1.0;
    for i in 0..ys.len() {
        for j in i + 1..ys.len() {
            prod *= ys[i] - ys[j];
        }
    }
    prod
}

/// `prod_{i<j} a . (x_i - x_j)`.
pub fn projected_vandermonde(a: &[f64], x: &Configuration) -> f64 {
    let mut prod = 1.0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dot: f64 = a
                .iter()
                .zip(x.points[i].coords.iter().zip(&x.points[j].coords))
                .map(|(a, (p, q))| a * (p - q))
                .sum();
            prod *= dot;
        }
    }
    prod
}

/// `prod_{i<j} (i - j)`, the construction-1 value of `psi^Z(Z)`.
fn slot_vandermonde(n: usize) -> f64 {
    let ys: Vec<f64> = (1..=n).map(|k| k as f64).collect();
    vandermonde_product(&ys)
}

fn direction_seed(spec: &LatticeSpec, z: &WedgeIndex, seed: u64) -> u64 {
    let mut h = FnvHasher::default();
    h.write(&seed.to_le_bytes());
    for &c in z.cells() {
        for k in spec.lattice_point(c).index {
            h.write(&(k as u64).to_le_bytes());
        }
    }
    h.finish()
}

/// A unit vector `a` with `|a . (z_i - z_j)| >= tau |z_i - z_j|` for all
/// pairs, drawn uniformly from the sphere by rejection sampling. The
/// generator is seeded from `seed` and an FNV-1a hash of the multi-indices
/// of `z`, so the result is reproducible.
pub fn choose_direction(
    spec: &LatticeSpec,
    z: &WedgeIndex,
    tau: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::Argument(format!("tau = {tau} outside (0, 1]")));
    }
    if !z.all_distinct() {
        return Err(Error::Argument(format!(
            "wedge entry {} has repeated cells",
            describe_wedge(spec, z)
        )));
    }
    let d = spec.d();
    if d == 1 {
        return Ok(vec![1.0]);
    }
    // Index differences are proportional to position differences.
    let points: Vec<Vec<f64>> = z
        .cells()
        .iter()
        .map(|&c| {
            spec.lattice_point(c)
                .index
                .iter()
                .map(|&k| k as f64)
                .collect()
        })
        .collect();
    let mut diffs = Vec::new();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let v: Vec<f64> = points[i]
                .iter()
                .zip(&points[j])
                .map(|(p, q)| p - q)
                .collect();
            let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            diffs.push((v, norm));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(direction_seed(spec, z, seed));
    for _ in 0..DIRECTION_DRAWS {
        let mut a: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = a.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        a.iter_mut().for_each(|c| *c /= norm);
        if diffs.iter().all(|(v, n)| {
            let dot: f64 = a.iter().zip(v).map(|(p, q)| p * q).sum();
            dot.abs() >= tau * n
        }) {
            return Ok(a);
        }
    }
    Err(Error::SearchFailure(format!(
        "no direction with tau = {tau} found for {} after {DIRECTION_DRAWS} draws",
        describe_wedge(spec, z)
    )))
}

/// `ys[i] = sigma(i) + 1` where `sigma` sends input slot `i` to its slot in
/// `z`. Requires `x` to lie in the boxes of `z`, which must be distinct.
pub fn equivariant_sort_map(
    spec: &LatticeSpec,
    z: &WedgeIndex,
    x: &Configuration,
) -> Result<Vec<f64>> {
    if !z.all_distinct() {
        return Err(Error::Argument("wedge entry has repeated cells".into()));
    }
    let a = locate(spec, x)?;
    if a.wedge != *z {
        return Err(Error::Argument(format!(
            "configuration lies in {}, not {}",
            describe_wedge(spec, &a.wedge),
            describe_wedge(spec, z)
        )));
    }
    Ok(a.sigma.images().iter().map(|&s| (s + 1) as f64).collect())
}

/// Samples `f` on every wedge entry with distinct cells.
pub fn build_antisym(
    f: &TargetFunction,
    spec: &LatticeSpec,
    n_particles: usize,
    options: AntisymOptions,
) -> Result<AntisymTabulator> {
    if f.symmetry() != Symmetry::Antisymmetric {
        return Err(Error::Argument(format!(
            "target {:?} is not declared anti-symmetric",
            f.name()
        )));
    }
    check_options(spec, &options)?;
    let slot_denominator = slot_vandermonde(n_particles);
    let built = par_map_wedge(spec, n_particles, options.cap, |rank, z| {
        if !z.all_distinct() {
            return Ok((0, None));
        }
        let node = spec.node_configuration(z, options.node);
        let v = f.eval(&node);
        if !v.is_finite() {
            return Err(Error::Build(format!(
                "f = {v} at wedge entry {}",
                describe_wedge(spec, z)
            )));
        }
        if v == 0.0 {
            return Ok((1, None));
        }
        let entry = match options.mode {
            AntisymMode::Construction1 => AntisymEntry {
                coefficient: v / slot_denominator,
                direction: Vec::new(),
            },
            AntisymMode::Construction2 { tau, seed } => {
                let a = choose_direction(spec, z, tau, seed)?;
                AntisymEntry {
                    coefficient: v / projected_vandermonde(&a, &node),
                    direction: a,
                }
            }
        };
        Ok((1, Some((rank, entry))))
    })?;
    let evaluations = built.iter().map(|e| e.0).sum();
    let size = built.len() as u64;
    let entries = built.into_iter().filter_map(|e| e.1).collect();
    Ok(AntisymTabulator {
        spec: *spec,
        n_particles,
        mode: options.mode,
        smooth: options.smooth,
        node: options.node,
        entries,
        stats: BuildStats {
            evaluations,
            wedge_size: size,
            coarse_lattice: coarse_lattice(spec, n_particles),
        },
    })
}

fn check_options(spec: &LatticeSpec, options: &AntisymOptions) -> Result<()> {
    if let AntisymMode::Construction2 { tau, .. } = options.mode {
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::Argument(format!("tau = {tau} outside (0, 1]")));
        }
    }
    if let Some(w) = options.smooth {
        if options.mode == AntisymMode::Construction1 {
            return Err(Error::Argument("smoothing requires construction 2".into()));
        }
        if !(w > 0.0 && w <= spec.delta() / 2.0) {
            return Err(Error::Argument(format!(
                "smooth width {w} outside (0, delta/2 = {}]",
                spec.delta() / 2.0
            )));
        }
    }
    Ok(())
}

impl AntisymTabulator {
    /// Reassembles a tabulator from stored entries keyed by wedge rank.
    pub fn from_parts(
        spec: LatticeSpec,
        n_particles: usize,
        options: AntisymOptions,
        entries: BTreeMap<u64, AntisymEntry>,
    ) -> Result<Self> {
        check_options(&spec, &options)?;
        let size = wedge_size(&spec, n_particles)?;
        let want_dir = match options.mode {
            AntisymMode::Construction1 => 0,
            AntisymMode::Construction2 { .. } => spec.d(),
        };
        for (&rank, e) in &entries {
            if rank >= size {
                return Err(Error::Format(format!(
                    "rank {rank} outside wedge of {size}"
                )));
            }
            if e.direction.len() != want_dir {
                return Err(Error::Format(format!(
                    "entry {rank} has {} direction components, expected {want_dir}",
                    e.direction.len()
                )));
            }
        }
        Ok(AntisymTabulator {
            spec,
            n_particles,
            mode: options.mode,
            smooth: options.smooth,
            node: options.node,
            entries,
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

    pub fn mode(&self) -> AntisymMode {
        self.mode
    }

    pub fn smooth(&self) -> Option<f64> {
        self.smooth
    }

    pub fn node(&self) -> Node {
        self.node
    }

    pub fn stats(&self) -> &BuildStats {
        &self.stats
    }

    pub fn wedge_count(&self) -> u64 {
        self.stats.wedge_size
    }

    /// Stored entries keyed by wedge rank.
    pub fn entries(&self) -> &BTreeMap<u64, AntisymEntry> {
        &self.entries
    }

    pub fn entry(&self, z: &WedgeIndex) -> Option<&AntisymEntry> {
        if z.len() != self.n_particles {
            return None;
        }
        self.entries.get(&wedge_rank(&self.spec, z))
    }
}

/// Evaluates the approximation at `x`.
pub fn eval_antisym(t: &AntisymTabulator, x: &Configuration) -> Result<f64> {
    if x.len() != t.n_particles {
        return Err(Error::Argument(format!(
            "configuration has {} points, expected {}",
            x.len(),
            t.n_particles
        )));
    }
    match (t.mode, t.smooth) {
        (AntisymMode::Construction1, _) => {
            let a = locate(&t.spec, x)?;
            if !a.wedge.all_distinct() {
                return Ok(0.0);
            }
            let Some(e) = t.entry(&a.wedge) else {
                return Ok(0.0);
            };
            let ys: Vec<f64> = a.sigma.images().iter().map(|&s| (s + 1) as f64).collect();
            Ok(e.coefficient * vandermonde_product(&ys))
        }
        (AntisymMode::Construction2 { .. }, None) => {
            let a = locate(&t.spec, x)?;
            if !a.wedge.all_distinct() {
                return Ok(0.0);
            }
            let Some(e) = t.entry(&a.wedge) else {
                return Ok(0.0);
            };
            let (sorted, pi) = x.canonical_sort();
            let sign = pi.parity() as f64;
            Ok(sign * (e.coefficient * projected_vandermonde(&e.direction, &sorted)))
        }
        (AntisymMode::Construction2 { .. }, Some(width)) => {
            let (sorted, pi) = x.canonical_sort();
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
                if !z.all_distinct() {
                    return;
                }
                if let Some(e) = t.entry(&z) {
                    total += weight * e.coefficient * projected_vandermonde(&e.direction, &sorted);
                }
            });
            Ok(pi.parity() as f64 * total)
        }
    }
}
