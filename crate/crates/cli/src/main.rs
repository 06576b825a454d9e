//! `symapprox`: build, evaluate, verify and sweep tabulated approximators.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage, configuration or
//! domain error, 3 capacity error.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use symapprox::antisymmetric::{build_antisym, AntisymMode, AntisymOptions};
use symapprox::harness::{
    convergence_sweep, default_step, gradient_bound_estimate, sample_configurations, verify,
    Approximator, InvarianceKind, SampleSet, VerifyOptions,
};
use symapprox::lattice::DEFAULT_WEDGE_CAP;
use symapprox::model::Model;
use symapprox::symmetric::{
    asymptotic_feature_bound, build_sym, check_epsilon, delta_for_epsilon, BuildOptions, EvalMode,
};
use symapprox::{builtin_target, Error, LatticeSpec, Result, Symmetry, TargetFunction};

use config::{ExperimentConfig, Kind};
use output::RunInfo;

#[derive(Debug, Parser)]
#[command(
    name = "symapprox",
    version,
    about = "Tabulated approximation of symmetric and anti-symmetric functions"
)]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: configured `output.dir`, else `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Wedge enumeration cap.
    #[arg(long, global = true)]
    cap: Option<u64>,
    /// Write zero for wall-clock fields so reports are byte-reproducible.
    #[arg(long, global = true)]
    no_timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the configured tabulator and write the model file.
    Build,
    /// Evaluate a model file.
    Eval {
        /// Model file written by `build`.
        model: PathBuf,
        /// Configuration literal, e.g. `0.1,0.2;0.3,0.4`.
        #[arg(long = "x", conflicts_with = "input")]
        x: Option<String>,
        /// File with one configuration literal per line.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Build, then check the error bound and the symmetry invariants.
    Verify,
    /// Build over the configured `deltas` and fit the convergence slope.
    Sweep,
}

enum Failure {
    Error(Error),
    Verification(Vec<String>),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot set up {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification(failed)) => {
            eprintln!("verification failed: {}", failed.join(", "));
            ExitCode::from(1)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_capacity() { 3 } else { 2 })
        }
    }
}

fn run(cli: &Cli) -> std::result::Result<(), Failure> {
    match &cli.command {
        Command::Eval { model, x, input } => cmd_eval(model, x.as_deref(), input.as_deref()),
        Command::Build => cmd_build(&Experiment::load(cli)?),
        Command::Verify => cmd_verify(&Experiment::load(cli)?),
        Command::Sweep => cmd_sweep(&Experiment::load(cli)?),
    }
}

/// A configuration with command-line overrides applied and the target resolved.
struct Experiment {
    cfg: ExperimentConfig,
    target: TargetFunction,
    seed: u64,
    out_dir: PathBuf,
    cap: u64,
    timing: bool,
}

impl Experiment {
    fn load(cli: &Cli) -> Result<Self> {
        let path = cli
            .config
            .as_ref()
            .ok_or_else(|| Error::Configuration("--config is required".into()))?;
        let cfg = ExperimentConfig::load(path)?;
        let target = builtin_target(&cfg.target.name, &cfg.target.params)?;
        let want = match cfg.kind {
            Kind::Sym => Symmetry::Symmetric,
            Kind::AntisymC1 | Kind::AntisymC2 => Symmetry::Antisymmetric,
        };
        if target.symmetry() != want {
            return Err(Error::Configuration(format!(
                "target {} is {:?}, kind {} needs {want:?}",
                target.name(),
                target.symmetry(),
                cfg.kind.as_str()
            )));
        }
        let out_dir = cli
            .out
            .clone()
            .or_else(|| cfg.output.dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        Ok(Experiment {
            seed: cli.seed.unwrap_or(cfg.seed),
            cap: cli.cap.or(cfg.cap).unwrap_or(DEFAULT_WEDGE_CAP),
            timing: !cli.no_timing,
            target,
            out_dir,
            cfg,
        })
    }

    fn samples(&self) -> Result<SampleSet> {
        sample_configurations(&self.cfg.domain()?, self.cfg.samples, self.seed)
    }

    fn gradient_bound(&self, samples: &SampleSet) -> Result<f64> {
        match self.target.gradient_bound_hint() {
            Some(l) => Ok(l),
            None => {
                let domain = self.cfg.domain()?;
                gradient_bound_estimate(&self.target, samples, &domain, default_step(&domain))
            }
        }
    }

    /// The configured spacing, or the one derived from `epsilon`.
    fn delta(&self, l: f64) -> Result<f64> {
        match (self.cfg.delta, self.cfg.epsilon) {
            (Some(delta), _) => Ok(delta),
            (None, Some(eps)) => {
                check_epsilon(eps, self.cfg.n, self.cfg.d)?;
                let width = self.cfg.hi - self.cfg.lo;
                Ok(delta_for_epsilon(eps, self.cfg.n, self.cfg.d, l)?.min(width))
            }
            (None, None) => Err(Error::Configuration(
                "this command needs `delta` or `epsilon`".into(),
            )),
        }
    }

    fn build(&self, spec: &LatticeSpec) -> Result<Model> {
        let cfg = &self.cfg;
        match cfg.kind {
            Kind::Sym => {
                let options = BuildOptions {
                    mode: match cfg.smooth_width {
                        None => EvalMode::Indicator,
                        Some(width) => EvalMode::Smooth { width },
                    },
                    node: cfg.node,
                    cap: self.cap,
                };
                Ok(Model::Symmetric(build_sym(
                    &self.target,
                    spec,
                    cfg.n,
                    options,
                )?))
            }
            Kind::AntisymC1 | Kind::AntisymC2 => {
                let mode = match cfg.kind {
                    Kind::AntisymC1 => AntisymMode::Construction1,
                    _ => AntisymMode::Construction2 {
                        tau: cfg.tau,
                        seed: self.seed,
                    },
                };
                let options = AntisymOptions {
                    mode,
                    smooth: cfg.smooth_width,
                    node: cfg.node,
                    cap: self.cap,
                };
                Ok(Model::Antisymmetric(build_antisym(
                    &self.target,
                    spec,
                    cfg.n,
                    options,
                )?))
            }
        }
    }

    fn lattice(&self, delta: f64) -> Result<LatticeSpec> {
        LatticeSpec::for_domain(delta, &self.cfg.domain()?)
    }

    fn model_path(&self) -> PathBuf {
        match &self.cfg.output.model {
            Some(p) if p.is_absolute() => p.clone(),
            Some(p) => self.out_dir.join(p),
            None => self.out_dir.join("model.txt"),
        }
    }

    fn seconds(&self, start: Instant) -> f64 {
        if self.timing {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        }
    }
}

fn cmd_build(exp: &Experiment) -> std::result::Result<(), Failure> {
    let samples = exp.samples()?;
    let l = exp.gradient_bound(&samples)?;
    let delta = exp.delta(l)?;
    let spec = exp.lattice(delta)?;
    let start = Instant::now();
    let model = exp.build(&spec)?;
    let build_time = exp.seconds(start);
    let path = exp.model_path();
    output::write_atomic(&path, model.to_text().as_bytes())?;

    let (n, d) = (exp.cfg.n, exp.cfg.d);
    // Accuracy target: the configured epsilon, else the bound this delta gives.
    let epsilon = exp
        .cfg
        .epsilon
        .unwrap_or(delta * ((n * d) as f64).sqrt() * l);
    let theoretical = if check_epsilon(epsilon, n, d).is_ok() {
        format!("{:e}", asymptotic_feature_bound(n, d, epsilon))
    } else {
        "n/a (epsilon outside the admissible range)".to_string()
    };
    let coarse = match &model {
        Model::Symmetric(t) => t.stats().coarse_lattice,
        Model::Antisymmetric(t) => t.stats().coarse_lattice,
    };
    println!("kind: {}", exp.cfg.kind.as_str());
    println!("target: {}", exp.target.name());
    println!("delta: {delta}");
    println!("cells_per_dim: {}", spec.cells_per_dim());
    println!("wedge_count: {}", model.wedge_count());
    println!("M: {}", model.feature_total());
    println!("epsilon: {epsilon}");
    println!("theoretical_bound: {theoretical}");
    println!("gradient_bound: {l}");
    if coarse {
        println!("warning: delta exceeds N^(-1/d) of the box width; the lattice is coarse for {n} particles");
    }
    println!("build_time_s: {build_time}");
    println!("model: {}", path.display());
    Ok(())
}

fn cmd_eval(
    model_path: &Path,
    literal: Option<&str>,
    input: Option<&Path>,
) -> std::result::Result<(), Failure> {
    let text = std::fs::read_to_string(model_path)
        .map_err(|e| Error::Configuration(format!("cannot read {}: {e}", model_path.display())))?;
    let model = Model::from_text(&text)?;
    let lines: Vec<String> = match (literal, input) {
        (Some(x), _) => vec![x.to_string()],
        (None, Some(p)) => std::fs::read_to_string(p)
            .map_err(|e| Error::Configuration(format!("cannot read {}: {e}", p.display())))?
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
            .map(str::to_string)
            .collect(),
        (None, None) => {
            return Err(Error::Configuration("give --x or --input".into()).into());
        }
    };
    let domain_d = model.spec().d();
    for line in lines {
        let x = output::parse_configuration(&line)?;
        if x.dim() != domain_d || x.len() != model.n_particles() {
            return Err(Error::Argument(format!(
                "configuration is {} points in dimension {}, model expects {} in dimension {domain_d}",
                x.len(),
                x.dim(),
                model.n_particles()
            ))
            .into());
        }
        println!("{:.16e}", model.eval(&x)?);
    }
    Ok(())
}

fn cmd_verify(exp: &Experiment) -> std::result::Result<(), Failure> {
    let start = Instant::now();
    let samples = exp.samples()?;
    let l = exp.gradient_bound(&samples)?;
    let delta = exp.delta(l)?;
    let spec = exp.lattice(delta)?;
    let model = exp.build(&spec)?;
    let domain = exp.cfg.domain()?;
    let kind = match exp.cfg.kind {
        Kind::Sym => InvarianceKind::Sym,
        _ => InvarianceKind::Antisym,
    };
    let smooth_sym = exp.cfg.kind == Kind::Sym && exp.cfg.smooth_width.is_some();
    let options = VerifyOptions {
        n_perms: exp.cfg.n_perms,
        seed: exp.seed.wrapping_add(1),
        step: default_step(&domain),
        invariance_tolerance: if smooth_sym { 1e-12 } else { 0.0 },
        cauchy_gap: (kind == InvarianceKind::Antisym && exp.cfg.d == 1)
            .then_some(exp.cfg.cauchy_gap),
        cauchy_tolerance: 1e-9,
    };
    let mut report = verify(
        &exp.target,
        &model,
        &spec,
        &domain,
        &samples,
        kind,
        &options,
    )?;
    report.wall_time = exp.seconds(start);
    let info = RunInfo {
        kind: exp.cfg.kind.as_str(),
        target: exp.target.name(),
        d: exp.cfg.d,
        n: exp.cfg.n,
        delta,
        seed: exp.seed,
        wedge_count: model.wedge_count(),
        m: model.feature_total(),
    };
    output::write_atomic(
        &exp.out_dir.join("report.json"),
        output::report_json(&info, &report).as_bytes(),
    )?;
    output::write_atomic(
        &exp.out_dir.join("report.csv"),
        output::report_csv(&report)?.as_bytes(),
    )?;
    for c in &report.checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Verification(
            report
                .failed_checks()
                .iter()
                .map(|s| s.to_string())
                .collect(),
        ))
    }
}

fn cmd_sweep(exp: &Experiment) -> std::result::Result<(), Failure> {
    let deltas = exp
        .cfg
        .deltas
        .clone()
        .ok_or_else(|| Error::Configuration("sweep needs `deltas`".into()))?;
    let samples = exp.samples()?;
    let l = exp.gradient_bound(&samples)?;
    let domain = exp.cfg.domain()?;
    let mut result = convergence_sweep(&exp.target, &domain, &deltas, &samples, l, |spec| {
        exp.build(spec)
    })?;
    if !exp.timing {
        result.rows.iter_mut().for_each(|r| r.wall_time_s = 0.0);
    }
    let csv = output::sweep_csv(&result)?;
    output::write_atomic(&exp.out_dir.join("sweep.csv"), csv.as_bytes())?;
    print!("{csv}");
    Ok(())
}
