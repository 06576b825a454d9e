//! Verification engine: seeded sampling, finite-difference gradient bounds,
//! sup-error estimates, invariance suites and convergence sweeps.
//!
//! Per-sample work runs in parallel; every reduction is a fixed-order fold
//! over the collected per-sample results, so outputs do not depend on the
//! number of worker threads.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::antisymmetric::{eval_antisym, vandermonde_product, AntisymTabulator};
use crate::domain::{Configuration, DomainSpec, Point};
use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;
use crate::permutation::Permutation;
use crate::symmetric::{eval_sym, SymmetricTabulator};
use crate::target::TargetFunction;

/// Slack added to bounds before comparison.
pub const BOUND_SLACK: f64 = 1e-12;
/// Errors at or below this are treated as exact in slope fits.
pub const EXACT_ERROR: f64 = 1e-12;

/// Common interface of the built approximators.
pub trait Approximator: Sync {
    fn evaluate(&self, x: &Configuration) -> Result<f64>;
    fn wedge_count(&self) -> u64;
    /// Number of feature variables, `wedge_count * 2^N`.
    fn feature_total(&self) -> u64;
}

fn feature_total(wedge: u64, n: usize) -> u64 {
    if n >= 64 {
        return u64::MAX;
    }
    wedge.saturating_mul(1u64 << n)
}

impl Approximator for SymmetricTabulator {
    fn evaluate(&self, x: &Configuration) -> Result<f64> {
        eval_sym(self, x)
    }

    fn wedge_count(&self) -> u64 {
        SymmetricTabulator::wedge_count(self)
    }

    fn feature_total(&self) -> u64 {
        feature_total(self.wedge_count(), self.n_particles())
    }
}

impl Approximator for AntisymTabulator {
    fn evaluate(&self, x: &Configuration) -> Result<f64> {
        eval_antisym(self, x)
    }

    fn wedge_count(&self) -> u64 {
        AntisymTabulator::wedge_count(self)
    }

    fn feature_total(&self) -> u64 {
        feature_total(self.wedge_count(), self.n_particles())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub seed: u64,
    pub count: usize,
    pub configurations: Vec<Configuration>,
}

/// `count` configurations of i.i.d. uniform points in the domain box, drawn
/// from a ChaCha8 stream seeded with `seed`.
pub fn sample_configurations(domain: &DomainSpec, count: usize, seed: u64) -> Result<SampleSet> {
    if count == 0 {
        return Err(Error::Argument("sample count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = domain.width();
    let configurations = (0..count)
        .map(|_| Configuration {
            points: (0..domain.n_particles)
                .map(|_| {
                    Point::new(
                        (0..domain.d)
                            .map(|_| (domain.lo + width * rng.random::<f64>()).min(domain.hi))
                            .collect(),
                    )
                })
                .collect(),
        })
        .collect();
    Ok(SampleSet {
        seed,
        count,
        configurations,
    })
}

/// Default finite-difference step for a domain.
pub fn default_step(domain: &DomainSpec) -> f64 {
    1e-4 * domain.width()
}

/// Largest Euclidean norm of the central-difference gradient over the
/// samples, with coordinates clipped to `[lo + h, hi - h]`.
pub fn gradient_bound_estimate(
    f: &TargetFunction,
    samples: &SampleSet,
    domain: &DomainSpec,
    h: f64,
) -> Result<f64> {
    if !(h > 0.0 && 2.0 * h < domain.width()) {
        return Err(Error::Argument(format!("step h = {h} out of range")));
    }
    let norms: Vec<Result<f64>> = samples
        .configurations
        .par_iter()
        .map(|x| {
            let mut flat: Vec<f64> = x
                .flat()
                .into_iter()
                .map(|c| c.clamp(domain.lo + h, domain.hi - h))
                .collect();
            let mut sq = 0.0;
            for k in 0..flat.len() {
                let c = flat[k];
                flat[k] = c + h;
                let up = f.eval(&Configuration::from_flat(&flat, domain.d));
                flat[k] = c - h;
                let down = f.eval(&Configuration::from_flat(&flat, domain.d));
                flat[k] = c;
                let q = (up - down) / (2.0 * h);
                if !q.is_finite() {
                    return Err(Error::Evaluation(format!(
                        "non-finite difference quotient in component {k}"
                    )));
                }
                sq += q * q;
            }
            Ok(sq.sqrt())
        })
        .collect();
    norms.into_iter().try_fold(0.0f64, |acc, n| Ok(acc.max(n?)))
}

/// Largest `|f(X) - approx(X)|` over the samples and the first configuration
/// attaining it.
pub fn sup_error<F, A>(f: F, approx: A, samples: &SampleSet) -> Result<(f64, Configuration)>
where
    F: Fn(&Configuration) -> f64 + Sync,
    A: Fn(&Configuration) -> Result<f64> + Sync,
{
    let errs: Vec<Result<f64>> = samples
        .configurations
        .par_iter()
        .map(|x| Ok((f(x) - approx(x)?).abs()))
        .collect();
    let mut best = (f64::NEG_INFINITY, 0usize);
    for (i, e) in errs.into_iter().enumerate() {
        let e = e?;
        if e > best.0 || e.is_nan() && !best.0.is_nan() {
            best = (e, i);
        }
    }
    Ok((best.0, samples.configurations[best.1].clone()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InvarianceKind {
    Sym,
    Antisym,
}

/// Largest `|f(sigma X) - f(X)|` (or `|f(sigma X) - sign(sigma) f(X)|`) over
/// the samples and `n_perms` seeded random permutations per sample.
pub fn invariance_suite<E>(
    evaluator: E,
    samples: &SampleSet,
    n_perms: usize,
    seed: u64,
    kind: InvarianceKind,
) -> Result<f64>
where
    E: Fn(&Configuration) -> Result<f64> + Sync,
{
    if n_perms == 0 {
        return Err(Error::Argument("n_perms must be at least 1".into()));
    }
    let residuals: Vec<Result<f64>> = samples
        .configurations
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let base = evaluator(x)?;
            let mut worst = 0.0f64;
            for _ in 0..n_perms {
                let s = Permutation::random(x.len(), &mut rng);
                let v = evaluator(&x.permute(&s)?)?;
                let expect = match kind {
                    InvarianceKind::Sym => base,
                    InvarianceKind::Antisym => s.parity() as f64 * base,
                };
                let r = (v - expect).abs();
                worst = if r.is_nan() { f64::NAN } else { worst.max(r) };
            }
            Ok(worst)
        })
        .collect();
    residuals.into_iter().try_fold(0.0f64, |acc, r| {
        let r = r?;
        Ok(if r.is_nan() || acc.is_nan() {
            f64::NAN
        } else {
            acc.max(r)
        })
    })
}

/// Largest `|U(sigma X) - U(X)|` with `U = f / prod_{i<j}(x_i - x_j)`, over
/// samples (d = 1) whose points are pairwise at least `min_gap` apart.
pub fn cauchy_factor_check(
    f: &TargetFunction,
    samples: &SampleSet,
    min_gap: f64,
    n_perms: usize,
    seed: u64,
) -> Result<f64> {
    if samples.configurations.iter().any(|x| x.dim() != 1) {
        return Err(Error::Argument("the Cauchy check needs d = 1".into()));
    }
    let kept: Vec<Configuration> = samples
        .configurations
        .iter()
        .filter(|x| {
            let mut v: Vec<f64> = x.flat();
            v.sort_by(f64::total_cmp);
            v.windows(2).all(|w| w[1] - w[0] >= min_gap)
        })
        .cloned()
        .collect();
    if kept.is_empty() {
        return Err(Error::Argument(format!(
            "no sample has all gaps >= {min_gap}"
        )));
    }
    let filtered = SampleSet {
        seed: samples.seed,
        count: kept.len(),
        configurations: kept,
    };
    let u = |x: &Configuration| Ok(f.eval(x) / vandermonde_product(&x.flat()));
    invariance_suite(u, &filtered, n_perms, seed, InvarianceKind::Sym)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    pub sup_error: f64,
    pub bound: f64,
    pub wedge_count: u64,
    pub m: u64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of `ln(error)` against `ln(delta)`; absent when
    /// fewer than two errors exceed [`EXACT_ERROR`].
    pub slope: Option<f64>,
}

/// Builds one approximator per spacing and records its sup error against
/// `f` together with the bound `delta sqrt(Nd) L`.
pub fn convergence_sweep<A, B>(
    f: &TargetFunction,
    domain: &DomainSpec,
    deltas: &[f64],
    samples: &SampleSet,
    l: f64,
    build: B,
) -> Result<SweepResult>
where
    A: Approximator,
    B: Fn(&LatticeSpec) -> Result<A>,
{
    if deltas.len() < 3 {
        return Err(Error::Argument(format!(
            "a sweep needs at least 3 spacings, got {}",
            deltas.len()
        )));
    }
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Argument(
            "spacings must be strictly decreasing".into(),
        ));
    }
    let nd = (domain.n_particles * domain.d) as f64;
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let annotate = |e: Error| match e {
            Error::Build(m) => Error::Build(format!("delta = {delta}: {m}")),
            other => other,
        };
        let start = Instant::now();
        let spec = LatticeSpec::for_domain(delta, domain).map_err(annotate)?;
        let approx = build(&spec).map_err(annotate)?;
        let (err, _) = sup_error(|x| f.eval(x), |x| approx.evaluate(x), samples)?;
        rows.push(SweepRow {
            delta,
            sup_error: err,
            bound: delta * nd.sqrt() * l,
            wedge_count: approx.wedge_count(),
            m: approx.feature_total(),
            wall_time_s: start.elapsed().as_secs_f64(),
        });
    }
    let slope = fit_slope(&rows);
    Ok(SweepResult { rows, slope })
}

fn fit_slope(rows: &[SweepRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.sup_error > EXACT_ERROR)
        .map(|r| (r.delta.ln(), r.sup_error.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub sup_error: f64,
    pub argmax_configuration: Configuration,
    pub bound: f64,
    /// `sup_error <= bound + 1e-12`.
    pub bound_satisfied: bool,
    pub gradient_bound: f64,
    pub invariance_max_residual: f64,
    pub cauchy_residual: Option<f64>,
    pub slope: Option<f64>,
    pub sample_count: usize,
    pub wall_time: f64,
    pub checks: Vec<CheckOutcome>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_checks(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect()
    }
}

/// Thresholds used by [`verify`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub n_perms: usize,
    pub seed: u64,
    pub step: f64,
    /// Allowed invariance residual (0 for indicator evaluators).
    pub invariance_tolerance: f64,
    /// Run the Cauchy factorisation check with this minimum gap.
    pub cauchy_gap: Option<f64>,
    pub cauchy_tolerance: f64,
}

/// Runs the gradient estimate, the sup-error bound check, the invariance
/// suite and (optionally) the Cauchy check against a built approximator.
pub fn verify<A: Approximator>(
    f: &TargetFunction,
    approx: &A,
    spec: &LatticeSpec,
    domain: &DomainSpec,
    samples: &SampleSet,
    kind: InvarianceKind,
    options: &VerifyOptions,
) -> Result<VerificationReport> {
    let start = Instant::now();
    let l = gradient_bound_estimate(f, samples, domain, options.step)?;
    let (err, argmax) = sup_error(|x| f.eval(x), |x| approx.evaluate(x), samples)?;
    let nd = (domain.n_particles * domain.d) as f64;
    let bound = spec.delta() * nd.sqrt() * l;
    let bound_satisfied = err <= bound + BOUND_SLACK;
    let residual = invariance_suite(
        |x| approx.evaluate(x),
        samples,
        options.n_perms,
        options.seed,
        kind,
    )?;
    let target_residual = invariance_suite(
        |x| Ok(f.eval(x)),
        samples,
        options.n_perms,
        options.seed,
        kind,
    )?;
    let mut checks = vec![
        CheckOutcome {
            name: "error_bound".into(),
            passed: bound_satisfied,
            detail: format!("sup_error = {err:e}, bound = {bound:e}"),
        },
        CheckOutcome {
            name: "approximator_invariance".into(),
            passed: residual <= options.invariance_tolerance,
            detail: format!("max residual = {residual:e}"),
        },
        CheckOutcome {
            name: "target_invariance".into(),
            passed: target_residual <= 1e-12 * (1.0 + max_abs(f, samples)),
            detail: format!("max residual = {target_residual:e}"),
        },
    ];
    let cauchy_residual = match options.cauchy_gap {
        Some(gap) => {
            let r = cauchy_factor_check(f, samples, gap, options.n_perms, options.seed)?;
            checks.push(CheckOutcome {
                name: "cauchy_factor".into(),
                passed: r <= options.cauchy_tolerance,
                detail: format!("max residual = {r:e}"),
            });
            Some(r)
        }
        None => None,
    };
    Ok(VerificationReport {
        sup_error: err,
        argmax_configuration: argmax,
        bound,
        bound_satisfied,
        gradient_bound: l,
        invariance_max_residual: residual,
        cauchy_residual,
        slope: None,
        sample_count: samples.count,
        wall_time: start.elapsed().as_secs_f64(),
        checks,
    })
}

fn max_abs(f: &TargetFunction, samples: &SampleSet) -> f64 {
    samples
        .configurations
        .iter()
        .map(|x| f.eval(x).abs())
        .fold(0.0, f64::max)
}
