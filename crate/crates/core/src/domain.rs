//! Points, configurations and the per-particle domain box.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::permutation::Permutation;

/// A single particle position in `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        self.coords.iter().zip(other).map(|(a, b)| a * b).sum()
    }
}

impl From<Vec<f64>> for Point {
    fn from(coords: Vec<f64>) -> Self {
        Point { coords }
    }
}

/// An ordered list of `N` particles, the argument of a many-body function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub points: Vec<Point>,
}

impl Configuration {
    /// Builds a configuration, checking that every point shares one dimension.
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if let Some(first) = points.first() {
            let d = first.dim();
            if d == 0 {
                return Err(Error::Argument("points must have dimension >= 1".into()));
            }
            if let Some(bad) = points.iter().position(|p| p.dim() != d) {
                return Err(Error::Argument(format!(
                    "point {bad} has dimension {}, expected {d}",
                    points[bad].dim()
                )));
            }
        }
        Ok(Configuration { points })
    }

    /// Convenience constructor from nested coordinate rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::new(
            rows.iter()
                .map(|r| Point::new(r.as_ref().to_vec()))
                .collect(),
        )
    }

    /// One-dimensional configuration from scalar positions.
    pub fn from_scalars(xs: &[f64]) -> Self {
        Configuration {
            points: xs.iter().map(|&x| Point::new(vec![x])).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Point::dim)
    }

    pub fn coord(&self, i: usize, alpha: usize) -> f64 {
        self.points[i].coords[alpha]
    }

    /// Flattened coordinates in particle-major order.
    pub fn flat(&self) -> Vec<f64> {
        self.points
            .iter()
            .flat_map(|p| p.coords.iter().copied())
            .collect()
    }

    /// Inverse of [`Configuration::flat`].
    pub fn from_flat(flat: &[f64], d: usize) -> Self {
        Configuration {
            points: flat.chunks(d).map(|c| Point::new(c.to_vec())).collect(),
        }
    }

    /// Sorts points lexicographically by coordinate value (ties keep input
    /// order). Returns the sorted configuration and the permutation `pi` with
    /// `sorted == self.permute(pi)`. The sorted configuration depends only on
    /// the multiset of points.
    pub fn canonical_sort(&self) -> (Configuration, Permutation) {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            let pa = &self.points[a].coords;
            let pb = &self.points[b].coords;
            pa.iter()
                .zip(pb)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let sorted = Configuration {
            points: order.iter().map(|&i| self.points[i].clone()).collect(),
        };
        let pi = Permutation::new(order).expect("sort order is a permutation");
        (sorted, pi)
    }

    /// `result.points[i] = self.points[sigma(i)]`.
    pub fn permute(&self, sigma: &Permutation) -> Result<Self> {
        if sigma.len() != self.len() {
            return Err(Error::Argument(format!(
                "permutation of size {} applied to {} points",
                sigma.len(),
                self.len()
            )));
        }
        Ok(Configuration {
            points: sigma
                .images()
                .iter()
                .map(|&j| self.points[j].clone())
                .collect(),
        })
    }
}

/// The box `[lo, hi]^d` each of the `N` particles lives in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub d: usize,
    pub n_particles: usize,
    pub lo: f64,
    pub hi: f64,
}

impl DomainSpec {
    pub fn new(d: usize, n_particles: usize, lo: f64, hi: f64) -> Result<Self> {
        if d == 0 || n_particles == 0 {
            return Err(Error::Argument("d and N must be positive".into()));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Argument(format!("invalid box [{lo}, {hi}]")));
        }
        Ok(DomainSpec {
            d,
            n_particles,
            lo,
            hi,
        })
    }

    /// The unit box `[0, 1]^d`.
    pub fn unit(d: usize, n_particles: usize) -> Result<Self> {
        Self::new(d, n_particles, 0.0, 1.0)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: &Configuration) -> bool {
        x.len() == self.n_particles
            && x.points.iter().all(|p| {
                p.dim() == self.d && p.coords.iter().all(|&c| c >= self.lo && c <= self.hi)
            })
    }

    /// Checks shape and box membership, naming the first offending coordinate.
    pub fn check(&self, x: &Configuration) -> Result<()> {
        if x.len() != self.n_particles {
            return Err(Error::Argument(format!(
                "configuration has {} points, expected {}",
                x.len(),
                self.n_particles
            )));
        }
        for (i, p) in x.points.iter().enumerate() {
            if p.dim() != self.d {
                return Err(Error::Argument(format!(
                    "point {i} has dimension {}, expected {}",
                    p.dim(),
                    self.d
                )));
            }
            for (alpha, &c) in p.coords.iter().enumerate() {
                if !(c >= self.lo && c <= self.hi) {
                    return Err(Error::Domain(format!(
                        "coordinate x[{i}][{alpha}] = {c} outside [{}, {}]",
                        self.lo, self.hi
                    )));
                }
            }
        }
        Ok(())
    }

    /// The positivity requirement of the log-domain monomial route.
    pub fn is_positive(&self) -> bool {
        self.lo >= 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permute_identity_and_swap() {
        let x = Configuration::from_scalars(&[0.1, 0.2]);
        let id = Permutation::identity(2);
        assert_eq!(x.permute(&id).unwrap(), x);
        let swap = Permutation::new(vec![1, 0]).unwrap();
        assert_eq!(
            x.permute(&swap).unwrap(),
            Configuration::from_scalars(&[0.2, 0.1])
        );
    }

    #[test]
    fn permute_three_cycle() {
        let x = Configuration::from_scalars(&[1.0, 2.0, 3.0]);
        let s = Permutation::new(vec![2, 0, 1]).unwrap();
        assert_eq!(
            x.permute(&s).unwrap(),
            Configuration::from_scalars(&[3.0, 1.0, 2.0])
        );
    }

    #[test]
    fn permute_size_mismatch() {
        let x = Configuration::from_scalars(&[1.0, 2.0, 3.0]);
        let s = Permutation::identity(2);
        assert!(matches!(x.permute(&s), Err(Error::Argument(_))));
    }

    #[test]
    fn mixed_dimensions_rejected() {
        let r = Configuration::new(vec![Point::new(vec![0.0]), Point::new(vec![0.0, 1.0])]);
        assert!(r.is_err());
    }

    #[test]
    fn domain_check() {
        let dom = DomainSpec::unit(1, 2).unwrap();
        assert!(dom.check(&Configuration::from_scalars(&[0.0, 1.0])).is_ok());
        assert!(matches!(
            dom.check(&Configuration::from_scalars(&[0.0, 1.5])),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            dom.check(&Configuration::from_scalars(&[f64::NAN, 0.5])),
            Err(Error::Domain(_))
        ));
        assert!(DomainSpec::new(1, 1, 1.0, 1.0).is_err());
    }
}
