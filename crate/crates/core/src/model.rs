//! Versioned text container for built tabulators.
//!
//! ```text
//! symapprox-model 1
//! kind sym | antisym-c1 | antisym-c2
//! d <int>
//! n <int>
//! delta <hex>
//! lo <hex>
//! hi <hex>
//! mode indicator | smooth <hex>
//! node corner | center
//! tau <hex>            (antisym-c2 only)
//! seed <int>           (antisym-c2 only)
//! records <int>
//! <N*d indices> <coefficient hex> [<d direction hex>]   (one line per record)
//! ```
//!
//! Floats are hexadecimal literals, so a write/read round trip is bit-exact.
//! Records are in wedge-rank order.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::antisymmetric::{AntisymEntry, AntisymMode, AntisymOptions, AntisymTabulator};
use crate::domain::Configuration;
use crate::error::{Error, Result};
use crate::harness::Approximator;
use crate::hexfloat::{format_hexf64, parse_hexf64};
use crate::lattice::{wedge_rank, wedge_unrank, LatticePoint, LatticeSpec, Node, WedgeIndex};
use crate::symmetric::{EvalMode, SymmetricTabulator};

pub const MAGIC: &str = "symapprox-model";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Symmetric(SymmetricTabulator),
    Antisymmetric(AntisymTabulator),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Symmetric(_) => "sym",
            Model::Antisymmetric(t) => match t.mode() {
                AntisymMode::Construction1 => "antisym-c1",
                AntisymMode::Construction2 { .. } => "antisym-c2",
            },
        }
    }

    pub fn spec(&self) -> &LatticeSpec {
        match self {
            Model::Symmetric(t) => t.spec(),
            Model::Antisymmetric(t) => t.spec(),
        }
    }

    pub fn n_particles(&self) -> usize {
        match self {
            Model::Symmetric(t) => t.n_particles(),
            Model::Antisymmetric(t) => t.n_particles(),
        }
    }

    pub fn eval(&self, x: &Configuration) -> Result<f64> {
        self.evaluate(x)
    }

    pub fn to_text(&self) -> String {
        let spec = self.spec();
        let mut out = String::new();
        let w = &mut out;
        let _ = writeln!(w, "{MAGIC} {VERSION}");
        let _ = writeln!(w, "kind {}", self.kind());
        let _ = writeln!(w, "d {}", spec.d());
        let _ = writeln!(w, "n {}", self.n_particles());
        let _ = writeln!(w, "delta {}", format_hexf64(spec.delta()));
        let _ = writeln!(w, "lo {}", format_hexf64(spec.lo()));
        let _ = writeln!(w, "hi {}", format_hexf64(spec.hi()));
        let (width, node) = match self {
            Model::Symmetric(t) => (t.mode().width(), t.node()),
            Model::Antisymmetric(t) => (t.smooth(), t.node()),
        };
        match width {
            None => {
                let _ = writeln!(w, "mode indicator");
            }
            Some(width) => {
                let _ = writeln!(w, "mode smooth {}", format_hexf64(width));
            }
        }
        let _ = writeln!(w, "node {}", node.as_str());
        match self {
            Model::Symmetric(t) => {
                let _ = writeln!(w, "records {}", t.values().len());
                for (rank, &v) in t.values().iter().enumerate() {
                    let z = t.wedge_entry(rank as u64).expect("rank within wedge");
                    write_indices(w, spec, &z);
                    let _ = writeln!(w, " {}", format_hexf64(v));
                }
            }
            Model::Antisymmetric(t) => {
                if let AntisymMode::Construction2 { tau, seed } = t.mode() {
                    let _ = writeln!(w, "tau {}", format_hexf64(tau));
                    let _ = writeln!(w, "seed {seed}");
                }
                let _ = writeln!(w, "records {}", t.entries().len());
                for (&rank, e) in t.entries() {
                    let z = wedge_unrank(spec, t.n_particles(), rank).expect("rank within wedge");
                    write_indices(w, spec, &z);
                    let _ = write!(w, " {}", format_hexf64(e.coefficient));
                    for &c in &e.direction {
                        let _ = write!(w, " {}", format_hexf64(c));
                    }
                    w.push('\n');
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Model> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let mut next = |key: &str| -> Result<(usize, Vec<String>)> {
            let (no, line) = lines
                .next()
                .ok_or_else(|| Error::Format(format!("missing line `{key}`")))?;
            let mut parts = line.split_whitespace().map(str::to_string);
            let head = parts.next().unwrap_or_default();
            if head != key {
                return Err(Error::Format(format!(
                    "line {}: expected `{key}`, found `{head}`",
                    no + 1
                )));
            }
            Ok((no + 1, parts.collect()))
        };
        let (_, magic) = next(MAGIC)?;
        if magic != [VERSION.to_string()] {
            return Err(Error::Format(format!("unsupported version {magic:?}")));
        }
        let kind = single(next("kind")?)?;
        let d: usize = parse_int(&single(next("d")?)?)?;
        let n: usize = parse_int(&single(next("n")?)?)?;
        let delta = parse_hexf64(&single(next("delta")?)?)?;
        let lo = parse_hexf64(&single(next("lo")?)?)?;
        let hi = parse_hexf64(&single(next("hi")?)?)?;
        let (no, mode) = next("mode")?;
        let width = match mode.as_slice() {
            [m] if m == "indicator" => None,
            [m, w] if m == "smooth" => Some(parse_hexf64(w)?),
            other => return Err(Error::Format(format!("line {no}: bad mode {other:?}"))),
        };
        let node: Node = single(next("node")?)?
            .parse()
            .map_err(|e: Error| Error::Format(e.to_string()))?;
        let spec = LatticeSpec::new(delta, d, lo, hi).map_err(|e| Error::Format(e.to_string()))?;
        let antisym_mode = match kind.as_str() {
            "sym" => None,
            "antisym-c1" => Some(AntisymMode::Construction1),
            "antisym-c2" => {
                let tau = parse_hexf64(&single(next("tau")?)?)?;
                let seed: u64 = parse_int(&single(next("seed")?)?)?;
                Some(AntisymMode::Construction2 { tau, seed })
            }
            other => return Err(Error::Format(format!("unknown kind {other:?}"))),
        };
        let records: usize = parse_int(&single(next("records")?)?)?;
        let dir_len = match antisym_mode {
            Some(AntisymMode::Construction2 { .. }) => d,
            _ => 0,
        };
        let mut parsed = Vec::with_capacity(records);
        for _ in 0..records {
            let (no, fields) = lines
                .next()
                .ok_or_else(|| Error::Format("fewer records than declared".into()))?;
            let mut all: Vec<&str> = Vec::new();
            all.extend(fields.split_whitespace());
            let want = n * d + 1 + dir_len;
            if all.len() != want {
                return Err(Error::Format(format!(
                    "line {}: {} fields, expected {want}",
                    no + 1,
                    all.len()
                )));
            }
            let z = parse_wedge(&spec, n, &all[..n * d])
                .map_err(|e| Error::Format(format!("line {}: {e}", no + 1)))?;
            let coef = parse_hexf64(all[n * d])?;
            let direction = all[n * d + 1..]
                .iter()
                .map(|s| parse_hexf64(s))
                .collect::<Result<Vec<_>>>()?;
            parsed.push((wedge_rank(&spec, &z), coef, direction));
        }
        if let Some((no, _)) = lines.next() {
            return Err(Error::Format(format!("line {}: trailing content", no + 1)));
        }
        if parsed.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Format(
                "records are not in increasing wedge order".into(),
            ));
        }
        match antisym_mode {
            None => {
                if parsed.iter().enumerate().any(|(i, r)| r.0 != i as u64) {
                    return Err(Error::Format(
                        "symmetric model must list every wedge entry".into(),
                    ));
                }
                let mode = match width {
                    None => EvalMode::Indicator,
                    Some(width) => EvalMode::Smooth { width },
                };
                let values = parsed.into_iter().map(|r| r.1).collect();
                Ok(Model::Symmetric(SymmetricTabulator::from_parts(
                    spec, n, values, mode, node,
                )?))
            }
            Some(mode) => {
                let entries: BTreeMap<u64, AntisymEntry> = parsed
                    .into_iter()
                    .map(|(rank, coefficient, direction)| {
                        (
                            rank,
                            AntisymEntry {
                                coefficient,
                                direction,
                            },
                        )
                    })
                    .collect();
                let options = AntisymOptions {
                    mode,
                    smooth: width,
                    node,
                    ..AntisymOptions::default()
                };
                Ok(Model::Antisymmetric(AntisymTabulator::from_parts(
                    spec, n, options, entries,
                )?))
            }
        }
    }
}

impl Approximator for Model {
    fn evaluate(&self, x: &Configuration) -> Result<f64> {
        match self {
            Model::Symmetric(t) => t.evaluate(x),
            Model::Antisymmetric(t) => t.evaluate(x),
        }
    }

    fn wedge_count(&self) -> u64 {
        match self {
            Model::Symmetric(t) => Approximator::wedge_count(t),
            Model::Antisymmetric(t) => Approximator::wedge_count(t),
        }
    }

    fn feature_total(&self) -> u64 {
        match self {
            Model::Symmetric(t) => t.feature_total(),
            Model::Antisymmetric(t) => t.feature_total(),
        }
    }
}

fn write_indices(w: &mut String, spec: &LatticeSpec, z: &WedgeIndex) {
    let mut first = true;
    for &c in z.cells() {
        for k in spec.lattice_point(c).index {
            if !first {
                w.push(' ');
            }
            first = false;
            let _ = write!(w, "{k}");
        }
    }
}

fn parse_wedge(spec: &LatticeSpec, n: usize, fields: &[&str]) -> Result<WedgeIndex> {
    let d = spec.d();
    let cells = (0..n)
        .map(|i| {
            let index = fields[i * d..(i + 1) * d]
                .iter()
                .map(|s| parse_int(s))
                .collect::<Result<Vec<usize>>>()?;
            spec.cell_id(&LatticePoint::new(index))
        })
        .collect::<Result<Vec<_>>>()?;
    WedgeIndex::new(cells)
}

fn single((no, parts): (usize, Vec<String>)) -> Result<String> {
    match <[String; 1]>::try_from(parts) {
        Ok([v]) => Ok(v),
        Err(parts) => Err(Error::Format(format!(
            "line {no}: expected one value, found {}",
            parts.len()
        ))),
    }
}

fn parse_int<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Format(format!("invalid integer {s:?}")))
}
