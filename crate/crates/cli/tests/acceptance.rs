//! Acceptance run: one PASS/FAIL line per criterion, with the measured
//! quantities. Exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symapprox::antisymmetric::{build_antisym, eval_antisym, AntisymMode, AntisymOptions};
use symapprox::harness::{
    cauchy_factor_check, convergence_sweep, default_step, gradient_bound_estimate,
    sample_configurations, SampleSet,
};
use symapprox::lattice::{
    enumerate_wedge, normalized_cell_weights, wedge_size, Node, DEFAULT_WEDGE_CAP,
};
use symapprox::model::Model;
use symapprox::permanent::{
    permanent_bruteforce, permanent_ryser, permanent_ryser_logdomain, SquareMatrix,
};
use symapprox::symmetric::{
    build_sym, eval_sym, eval_sym_feature_form, feature_count, BuildOptions, EvalMode,
};
use symapprox::sympoly::{
    elementary_direct, elementary_from_power_sums, invert_power_sums, power_sums,
};
use symapprox::{
    builtin_target, Configuration, DomainSpec, LatticeSpec, Permutation, Result, TargetFunction,
};

struct Outcome {
    passed: bool,
    detail: String,
}

fn timed(limit: Option<Duration>, check: impl FnOnce() -> Result<Outcome>) -> Outcome {
    let start = Instant::now();
    let mut out = check().unwrap_or_else(|e| Outcome {
        passed: false,
        detail: format!("error: {e}"),
    });
    let took = start.elapsed();
    out.detail = format!("{}; {:.2} s", out.detail, took.as_secs_f64());
    if let Some(limit) = limit {
        if took > limit {
            out.passed = false;
            out.detail
                .push_str(&format!(" exceeds {} s", limit.as_secs()));
        }
    }
    out
}

fn target(name: &str) -> TargetFunction {
    builtin_target(name, &BTreeMap::new()).expect("builtin target")
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, lo: f64) -> SquareMatrix {
    SquareMatrix::from_fn(n, |_, _| rng.random_range(lo..1.0)).unwrap()
}

fn c1_permanents() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst, mut worst_log) = (0.0f64, 0.0f64);
    for k in 0..500 {
        let n = 1 + k % 7;
        let a = random_matrix(&mut rng, n, -1.0);
        let exact = permanent_bruteforce(&a)?;
        worst = worst.max((permanent_ryser(&a)? - exact).abs() / (1.0 + exact.abs()));
        let p = random_matrix(&mut rng, n, 0.0);
        let exact = permanent_bruteforce(&p)?;
        worst_log =
            worst_log.max((permanent_ryser_logdomain(&p)? - exact).abs() / (1.0 + exact.abs()));
    }
    Ok(Outcome {
        passed: worst <= 1e-10 && worst_log <= 1e-9,
        detail: format!(
            "ryser rel err {worst:.2e} (tol 1e-10), log-domain {worst_log:.2e} (tol 1e-9)"
        ),
    })
}

fn c2_newton_girard() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut integer_exact = true;
    for case in 0..200 {
        let n = 1 + case % 6;
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let ints: Vec<f64> = (0..n).map(|_| rng.random_range(-9i32..=9) as f64).collect();
        let (ps, pi) = (power_sums(&xs), power_sums(&ints));
        for k in 1..=n {
            worst =
                worst.max((elementary_from_power_sums(&ps, k)? - elementary_direct(&xs, k)?).abs());
            integer_exact &= elementary_from_power_sums(&pi, k)? == elementary_direct(&ints, k)?;
        }
    }
    Ok(Outcome {
        passed: worst <= 1e-10 && integer_exact,
        detail: format!(
            "max |e_k diff| {worst:.2e} (tol 1e-10), integer inputs exact: {integer_exact}"
        ),
    })
}

fn c3_power_sum_round_trip() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let n = 1 + case % 6;
        let mut xs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let back = invert_power_sums(&power_sums(&xs))?;
        xs.sort_by(f64::total_cmp);
        for (a, b) in xs.iter().zip(&back) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(Outcome {
        passed: worst <= 1e-7,
        detail: format!("max |x diff| {worst:.2e} (tol 1e-7)"),
    })
}

const SHAPES: [(usize, usize); 3] = [(2, 1), (2, 2), (3, 1)];
const SAMPLES: usize = 10_000;

fn samples_for(n: usize, d: usize, seed: u64) -> Result<(DomainSpec, SampleSet)> {
    let domain = DomainSpec::unit(d, n)?;
    let samples = sample_configurations(&domain, SAMPLES, seed)?;
    Ok((domain, samples))
}

fn c4_symmetric_bound() -> Result<Outcome> {
    let mut lines = Vec::new();
    let mut passed = true;
    for name in ["sum-coords", "gaussian-pair-sym", "product-smooth-sym"] {
        let f = target(name);
        for (n, d) in SHAPES {
            let (domain, samples) = samples_for(n, d, 40)?;
            let l = gradient_bound_estimate(&f, &samples, &domain, default_step(&domain))?;
            let sweep = convergence_sweep(&f, &domain, &[0.5, 0.25, 0.125], &samples, l, |spec| {
                build_sym(&f, spec, n, BuildOptions::default())
            })?;
            let ratio = sweep
                .rows
                .iter()
                .map(|r| r.sup_error / r.bound)
                .fold(0.0, f64::max);
            let within = sweep.rows.iter().all(|r| r.sup_error <= r.bound + 1e-12);
            let slope_ok = sweep.slope.is_some_and(|s| (0.8..=1.2).contains(&s));
            passed &= within && slope_ok;
            lines.push(format!(
                "{name} N={n} d={d}: max err/bound {ratio:.3}, slope {}",
                sweep.slope.map_or("NA".into(), |s| format!("{s:.3}"))
            ));
        }
    }
    Ok(Outcome {
        passed,
        detail: lines.join("; "),
    })
}

fn c5_feature_form() -> Result<Outcome> {
    let f = target("gaussian-pair-sym");
    let mut worst = 0.0f64;
    let mut count = 0;
    for (n, d) in [(2, 1), (3, 1), (2, 2), (3, 2)] {
        let domain = DomainSpec::unit(d, n)?;
        let samples = sample_configurations(&domain, 1000, 50)?;
        for delta in [0.5, 0.25] {
            let spec = LatticeSpec::for_domain(delta, &domain)?;
            let t = build_sym(&f, &spec, n, BuildOptions::default())?;
            for x in &samples.configurations {
                worst = worst.max((eval_sym_feature_form(&t, x)? - eval_sym(&t, x)?).abs());
                count += 1;
            }
        }
    }
    Ok(Outcome {
        passed: worst <= 1e-9,
        detail: format!("{count} evaluations, max |diff| {worst:.2e} (tol 1e-9)"),
    })
}

fn binomial(n: u64, k: u64) -> u64 {
    (1..=k).fold(1, |acc, i| acc * (n - k + i) / i)
}

fn c6_feature_count() -> Result<Outcome> {
    let f = target("constant");
    let mut checked = 0;
    let mut mismatches = Vec::new();
    for cells in 1..=4usize {
        for d in 1..=2usize {
            for n in 1..=4usize {
                let spec = LatticeSpec::new(1.0 / cells as f64, d, 0.0, 1.0)?;
                assert_eq!(spec.cells_per_dim(), cells);
                let size = wedge_size(&spec, n)?;
                let closed = binomial((cells.pow(d as u32) + n - 1) as u64, n as u64);
                let enumerated = enumerate_wedge(&spec, n, DEFAULT_WEDGE_CAP)?.count() as u64;
                let t = build_sym(&f, &spec, n, BuildOptions::default())?;
                // Any epsilon inside the admissible range; only M matters here.
                let eps = 0.5 * ((n * d) as f64).sqrt() * (n as f64).powf(-1.0 / d as f64);
                let m = feature_count(&t, eps, 1.0)?.m;
                if size != closed || enumerated != closed || m != closed << n {
                    mismatches.push(format!("cells={cells} d={d} N={n}"));
                }
                checked += 1;
            }
        }
    }
    Ok(Outcome {
        passed: mismatches.is_empty(),
        detail: format!("{checked} lattices checked, mismatches: {mismatches:?}"),
    })
}

const ANTISYM_TARGETS: [&str; 3] = [
    "vandermonde-antisym",
    "vandermonde-gauss-antisym",
    "vandermonde-sum-antisym",
];

fn antisym_modes(seed: u64) -> [AntisymOptions; 2] {
    [
        AntisymOptions::default(),
        AntisymOptions {
            mode: AntisymMode::Construction2 { tau: 1e-3, seed },
            ..AntisymOptions::default()
        },
    ]
}

/// Returns the pass line and an informational line for construction 2 in
/// `d = 2`, whose `psi(X) / psi(Z)` ratio is not controlled by the bound.
fn c7_antisymmetric() -> Result<(Outcome, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut sign_failures = 0usize;
    let mut sign_checks = 0usize;
    let mut mode_gap = 0.0f64;
    let mut bound_ratio = 0.0f64;
    let mut c2_d2_ratio = 0.0f64;
    let mut bound_ok = true;
    for name in ANTISYM_TARGETS {
        let f = target(name);
        for (n, d) in SHAPES {
            let (domain, samples) = samples_for(n, d, 70)?;
            let l = gradient_bound_estimate(&f, &samples, &domain, default_step(&domain))?;
            for delta in [0.25, 0.125] {
                let spec = LatticeSpec::for_domain(delta, &domain)?;
                let [o1, o2] = antisym_modes(11);
                let t1 = build_antisym(&f, &spec, n, o1)?;
                let t2 = build_antisym(&f, &spec, n, o2)?;
                let bound = delta * ((n * d) as f64).sqrt() * l;
                for (t, c2) in [(&t1, false), (&t2, true)] {
                    let mut err = 0.0f64;
                    for x in &samples.configurations {
                        err = err.max((f.eval(x) - eval_antisym(t, x)?).abs());
                    }
                    let ratio = err / bound;
                    if c2 && d > 1 {
                        c2_d2_ratio = c2_d2_ratio.max(ratio);
                    } else {
                        bound_ok &= err <= bound + 1e-12;
                        bound_ratio = bound_ratio.max(ratio);
                    }
                    for x in samples.configurations.iter().take(1000) {
                        let s = Permutation::random(n, &mut rng);
                        let base = eval_antisym(t, x)?;
                        let moved = eval_antisym(t, &x.permute(&s)?)?;
                        sign_checks += 1;
                        if moved != s.parity() as f64 * base {
                            sign_failures += 1;
                        }
                    }
                }
                // Mode agreement at permuted lattice nodes.
                for &rank in t1.entries().keys() {
                    let z = symapprox::lattice::wedge_unrank(&spec, n, rank)?;
                    let node = spec.node_configuration(&z, Node::Corner);
                    let s = Permutation::random(n, &mut rng);
                    let x = node.permute(&s)?;
                    let (a, b) = (eval_antisym(&t1, &x)?, eval_antisym(&t2, &x)?);
                    mode_gap = mode_gap.max((a - b).abs() / (1.0 + a.abs()));
                }
            }
        }
    }
    let outcome = Outcome {
        passed: sign_failures == 0 && mode_gap <= 1e-10 && bound_ok,
        detail: format!(
            "sign equivariance {}/{sign_checks} exact, mode gap at nodes {mode_gap:.2e} (tol 1e-10), \
             max err/bound {bound_ratio:.3} (construction 1 all shapes, construction 2 d=1)",
            sign_checks - sign_failures
        ),
    };
    let info = format!(
        "construction 2 with d=2 reaches err/bound {c2_d2_ratio:.3}; the projected Vandermonde ratio \
         is bounded by 1/tau, not by the lattice spacing"
    );
    Ok((outcome, info))
}

fn c8_cauchy() -> Result<Outcome> {
    let mut worst = 0.0f64;
    for name in ["vandermonde-gauss-antisym", "vandermonde-sum-antisym"] {
        let f = target(name);
        for n in [2, 3, 4] {
            let domain = DomainSpec::unit(1, n)?;
            let samples = sample_configurations(&domain, SAMPLES, 80)?;
            worst = worst.max(cauchy_factor_check(&f, &samples, 0.05, 3, 81)?);
        }
    }
    Ok(Outcome {
        passed: worst <= 1e-9,
        detail: format!("max residual of f / Vandermonde {worst:.2e} (tol 1e-9, gap 0.05)"),
    })
}

fn c9_determinism() -> Result<Outcome> {
    let dir = tempfile::tempdir().expect("temp dir");
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "kind = \"sym\"\nd = 2\nn = 2\ndelta = 0.25\nsamples = 2000\nseed = 5\n\
         [target]\nname = \"gaussian-pair-sym\"\n",
    )
    .expect("write config");
    let mut runs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        let status = Command::new(env!("CARGO_BIN_EXE_symapprox"))
            .args(["verify", "--no-timing", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .output()
            .expect("run symapprox");
        let files: Vec<Vec<u8>> = ["report.json", "report.csv"]
            .iter()
            .map(|f| std::fs::read(out.join(f)).unwrap_or_default())
            .collect();
        runs.push((status.status.code(), files));
    }
    let reports_identical = runs[0] == runs[1] && !runs[0].1[0].is_empty();

    let mut round_trip = true;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let domain = DomainSpec::unit(2, 2)?;
    let spec = LatticeSpec::for_domain(0.25, &domain)?;
    let sym = target("gaussian-pair-sym");
    let anti = target("vandermonde-gauss-antisym");
    let [o1, mut o2] = antisym_modes(3);
    o2.smooth = Some(0.05);
    let models = [
        Model::Symmetric(build_sym(&sym, &spec, 2, BuildOptions::default())?),
        Model::Symmetric(build_sym(
            &sym,
            &spec,
            2,
            BuildOptions {
                mode: EvalMode::Smooth { width: 0.1 },
                ..BuildOptions::default()
            },
        )?),
        Model::Antisymmetric(build_antisym(&anti, &spec, 2, o1)?),
        Model::Antisymmetric(build_antisym(&anti, &spec, 2, o2)?),
    ];
    for m in &models {
        let text = m.to_text();
        let back = Model::from_text(&text)?;
        round_trip &= back.to_text() == text;
        for _ in 0..200 {
            let x = Configuration::from_rows(&[
                [rng.random::<f64>(), rng.random::<f64>()],
                [rng.random::<f64>(), rng.random::<f64>()],
            ])?;
            round_trip &= m.eval(&x)?.to_bits() == back.eval(&x)?.to_bits();
        }
    }
    Ok(Outcome {
        passed: reports_identical && round_trip,
        detail: format!(
            "reports byte-identical: {reports_identical}, model round trip bit-exact: {round_trip}"
        ),
    })
}

fn c10_smooth() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut const_err = 0.0f64;
    let mut unity_err = 0.0f64;
    let mut jump_rel = 0.0f64;
    let constant = builtin_target("constant", &BTreeMap::from([("value".to_string(), 1.7)]))?;
    let smooth_target = target("gaussian-pair-sym");
    for (n, d) in [(2, 1), (2, 2), (3, 1)] {
        let domain = DomainSpec::unit(d, n)?;
        let samples = sample_configurations(&domain, 2000, 100)?;
        for delta in [0.25, 0.125] {
            let spec = LatticeSpec::for_domain(delta, &domain)?;
            let opts = BuildOptions {
                mode: EvalMode::Smooth { width: delta / 4.0 },
                ..BuildOptions::default()
            };
            let tc = build_sym(&constant, &spec, n, opts)?;
            let tg = build_sym(&smooth_target, &spec, n, opts)?;
            for x in &samples.configurations {
                const_err = const_err.max((eval_sym(&tc, x)? - 1.7).abs());
                for p in &x.points {
                    let total: f64 = normalized_cell_weights(&spec, p, delta / 4.0)?
                        .iter()
                        .map(|w| w.1)
                        .sum();
                    unity_err = unity_err.max((total - 1.0).abs());
                }
            }
            let values: Vec<f64> = samples
                .configurations
                .iter()
                .map(|x| eval_sym(&tg, x))
                .collect::<Result<_>>()?;
            let range = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - values.iter().cloned().fold(f64::INFINITY, f64::min);
            // Step 1e-4 straddling an interior face along a random coordinate.
            for x in samples.configurations.iter().take(500) {
                let mut flat = x.flat();
                let k = rng.random_range(0..flat.len());
                let face = delta * rng.random_range(1..spec.cells_per_dim()) as f64;
                flat[k] = face - 5e-5;
                let a = eval_sym(&tg, &Configuration::from_flat(&flat, d))?;
                flat[k] = face + 5e-5;
                let b = eval_sym(&tg, &Configuration::from_flat(&flat, d))?;
                jump_rel = jump_rel.max((a - b).abs() / range);
            }
        }
    }
    Ok(Outcome {
        passed: const_err <= 1e-12 && unity_err <= 1e-12 && jump_rel <= 1e-2,
        detail: format!(
            "constant err {const_err:.2e}, partition of unity err {unity_err:.2e} (tol 1e-12), \
             max face jump / range {jump_rel:.2e} (tol 1e-2)"
        ),
    })
}

fn main() {
    let secs = |s| Some(Duration::from_secs(s));
    let mut info = String::new();
    let results = [
        ("1 permanent oracle", timed(secs(5), c1_permanents)),
        ("2 newton-girard", timed(secs(1), c2_newton_girard)),
        (
            "3 power-sum round trip",
            timed(secs(2), c3_power_sum_round_trip),
        ),
        (
            "4 symmetric error bound",
            timed(secs(60), c4_symmetric_bound),
        ),
        ("5 feature-form oracle", timed(secs(30), c5_feature_form)),
        ("6 feature count", timed(secs(1), c6_feature_count)),
        (
            "7 anti-symmetric invariants",
            timed(secs(60), || {
                c7_antisymmetric().map(|(o, i)| {
                    info = i;
                    o
                })
            }),
        ),
        ("8 cauchy factorisation", timed(secs(5), c8_cauchy)),
        (
            "9 determinism and persistence",
            timed(secs(5), c9_determinism),
        ),
        ("10 smooth variants", timed(None, c10_smooth)),
    ];
    let mut failed = 0;
    for (name, o) in &results {
        println!(
            "{} criterion {name}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.passed);
    }
    if !info.is_empty() {
        println!("INFO {info}");
    }
    println!(
        "acceptance: {}/{} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
