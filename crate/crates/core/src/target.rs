//! Target functions and the builtin catalogue.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::Configuration;
use crate::error::{Error, Result};

/// Declared behaviour of a function under particle permutations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetry {
    Symmetric,
    Antisymmetric,
    None,
}

type Evaluator = dyn Fn(&Configuration) -> f64 + Send + Sync;

/// A many-body function `f: (R^d)^N -> R` with its declared symmetry.
///
/// `gradient_bound_hint` is the Euclidean norm bound of the full
/// `N*d`-dimensional gradient when known analytically.
#[derive(Clone)]
pub struct TargetFunction {
    name: String,
    symmetry: Symmetry,
    gradient_bound_hint: Option<f64>,
    evaluator: Arc<Evaluator>,
}

impl fmt::Debug for TargetFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetFunction")
            .field("name", &self.name)
            .field("symmetry", &self.symmetry)
            .field("gradient_bound_hint", &self.gradient_bound_hint)
            .finish_non_exhaustive()
    }
}

impl TargetFunction {
    pub fn new<F>(name: impl Into<String>, symmetry: Symmetry, evaluator: F) -> Self
    where
        F: Fn(&Configuration) -> f64 + Send + Sync + 'static,
    {
        TargetFunction {
            name: name.into(),
            symmetry,
            gradient_bound_hint: None,
            evaluator: Arc::new(evaluator),
        }
    }

    pub fn with_gradient_bound(mut self, bound: f64) -> Self {
        self.gradient_bound_hint = Some(bound);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn gradient_bound_hint(&self) -> Option<f64> {
        self.gradient_bound_hint
    }

    pub fn eval(&self, x: &Configuration) -> f64 {
        (self.evaluator)(x)
    }
}

/// Names accepted by [`builtin_target`].
pub const BUILTIN_TARGETS: &[&str] = &[
    "constant",
    "sum-coords",
    "gaussian-pair-sym",
    "product-smooth-sym",
    "vandermonde-antisym",
    "vandermonde-gauss-antisym",
    "vandermonde-sum-antisym",
];

/// `prod_{i<j} (x_{i,1} - x_{j,1})`, in fixed `(i, j)` order.
pub(crate) fn first_coord_vandermonde(x: &Configuration) -> f64 {
    let n = x.len();
    let mut prod = 1.0;
    for i in 0..n {
        for j in i + 1..n {
            prod *= x.coord(i, 0) - x.coord(j, 0);
        }
    }
    prod
}

fn sum_coords(x: &Configuration) -> f64 {
    x.points.iter().flat_map(|p| p.coords.iter()).sum()
}

fn sq_norm_sum(x: &Configuration) -> f64 {
    x.points
        .iter()
        .flat_map(|p| p.coords.iter())
        .map(|c| c * c)
        .sum()
}

struct Params<'a> {
    name: &'a str,
    map: &'a BTreeMap<String, f64>,
    used: Vec<&'static str>,
}

impl<'a> Params<'a> {
    fn get(&mut self, key: &'static str, default: f64) -> f64 {
        self.used.push(key);
        self.map.get(key).copied().unwrap_or(default)
    }

    fn finish(self) -> Result<()> {
        for k in self.map.keys() {
            if !self.used.contains(&k.as_str()) {
                return Err(Error::Configuration(format!(
                    "unknown parameter '{k}' for target '{}'",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// Looks up a builtin target by name.
///
/// Every builtin accepts `break_symmetry` (default 0): when non-zero it adds
/// `break_symmetry * x_{1,1}` to the value while keeping the declared symmetry,
/// producing a deliberately faulty target for mutation tests.
pub fn builtin_target(name: &str, params: &BTreeMap<String, f64>) -> Result<TargetFunction> {
    let mut p = Params {
        name,
        map: params,
        used: Vec::new(),
    };
    let mutation = p.get("break_symmetry", 0.0);
    let target = match name {
        "constant" => {
            let c = p.get("value", 1.0);
            TargetFunction::new(name, Symmetry::Symmetric, move |_| c).with_gradient_bound(0.0)
        }
        "sum-coords" => TargetFunction::new(name, Symmetry::Symmetric, sum_coords),
        "gaussian-pair-sym" => {
            let width = p.get("width", 1.0);
            if width <= 0.0 {
                return Err(Error::Configuration("width must be positive".into()));
            }
            let inv = 1.0 / (width * width);
            TargetFunction::new(name, Symmetry::Symmetric, move |x| {
                let n = x.len();
                let mut s = 0.0;
                for i in 0..n {
                    for j in i + 1..n {
                        let r2: f64 = x.points[i]
                            .coords
                            .iter()
                            .zip(&x.points[j].coords)
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum();
                        s += (-r2 * inv).exp();
                    }
                }
                s
            })
        }
        "product-smooth-sym" => {
            let freq = p.get("frequency", 1.0);
            TargetFunction::new(name, Symmetry::Symmetric, move |x| {
                x.points
                    .iter()
                    .map(|pt| (freq * pt.coords.iter().sum::<f64>()).cos())
                    .product()
            })
        }
        "vandermonde-antisym" => {
            TargetFunction::new(name, Symmetry::Antisymmetric, first_coord_vandermonde)
        }
        "vandermonde-gauss-antisym" => TargetFunction::new(name, Symmetry::Antisymmetric, |x| {
            first_coord_vandermonde(x) * (-sq_norm_sum(x)).exp()
        }),
        "vandermonde-sum-antisym" => TargetFunction::new(name, Symmetry::Antisymmetric, |x| {
            first_coord_vandermonde(x) * sum_coords(x)
        }),
        other => {
            return Err(Error::Configuration(format!(
                "unknown target '{other}' (known: {})",
                BUILTIN_TARGETS.join(", ")
            )))
        }
    };
    p.finish()?;
    if mutation != 0.0 {
        let inner = target.clone();
        return Ok(TargetFunction::new(
            format!("{name}+break_symmetry"),
            inner.symmetry(),
            move |x| inner.eval(x) + mutation * x.coord(0, 0),
        ));
    }
    Ok(target)
}
