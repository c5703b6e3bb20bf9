//! Command-line entry point. Exit status: 0 success, 1 configuration or
//! usage error, 2 runtime failure, 3 a failed self-test criterion.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::config::{load_config, LoadedConfig, RunConfig};
use super::output::{fmt_float, write_csv, write_image, write_snapshot, write_statistics, write_summary, write_trace};
use crate::acceptance;
use crate::dynamics::{default_initial, run};
use crate::error::{Error, Result};
use crate::experiments::{ensemble, picard_iterate, uniqueness_study, Problem, StoppingSpec};
use crate::fields::FieldPair;
use crate::functionals::FunctionalRecorder;
use crate::noise::sample_path;
use crate::spectral_basis::SpectralBasis;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_SELFTEST: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "gmspde", version, about = "Stochastic Gierer-Meinhardt simulator and verification harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one path and write its functional trace and final snapshot.
    Simulate(Common),
    /// Picard iteration of the fixed-point map.
    Fixedpoint(Common),
    /// Common-noise runs from perturbed initial data.
    Uniqueness(Common),
    /// Monte Carlo ensemble with energy monitors and bound fits.
    Ensemble(Common),
    /// Eigenvalues and noise covariance factors.
    Spectrum(Common),
    /// Run the acceptance checks.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Ensemble size, overriding the configuration.
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Args)]
struct SelftestArgs {
    #[command(flatten)]
    common: Common,
    /// Run only these criteria (repeatable).
    #[arg(long = "criterion")]
    criteria: Vec<u8>,
}

enum Failure {
    Config(String),
    Runtime(String),
    Selftest,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => Failure::Config(m),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

/// Parse `args` (including the program name) and run.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_CONFIG
                }
            };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(Failure::Config(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_CONFIG
        }
        Err(Failure::Runtime(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_RUNTIME
        }
        Err(Failure::Selftest) => EXIT_SELFTEST,
    }
}

struct Session<'a> {
    cfg: RunConfig,
    out_dir: PathBuf,
    quiet: bool,
    out: &'a mut dyn Write,
}

impl Session<'_> {
    fn say(&mut self, line: impl AsRef<str>) {
        if !self.quiet {
            let _ = writeln!(self.out, "{}", line.as_ref());
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn wrote(&mut self, name: &str) {
        let p = self.path(name);
        self.say(format!("wrote {}", p.display()));
    }
}

fn open(common: &Common, err: &mut dyn Write) -> std::result::Result<(RunConfig, PathBuf, bool), Failure> {
    let LoadedConfig { mut config, warnings } = match &common.config {
        Some(p) => load_config(p).map_err(|e| match e {
            Error::Io { .. } => Failure::Config(e.to_string()),
            other => other.into(),
        })?,
        None => LoadedConfig {
            config: RunConfig::default(),
            warnings: Vec::new(),
        },
    };
    if let Some(s) = common.seed {
        config = config.with_seed(s);
    }
    if let Some(m) = common.paths {
        config.experiment.paths = m;
        config.validate()?;
    }
    for w in &warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    fs::create_dir_all(&common.out_dir).map_err(|e| Error::io(&common.out_dir, e))?;
    let echo = config.echo();
    let p = common.out_dir.join("config.toml");
    fs::write(&p, echo).map_err(|e| Error::io(&p, e))?;
    Ok((config, common.out_dir.clone(), common.quiet))
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> std::result::Result<(), Failure> {
    let (common, selected) = match &cmd {
        Command::Simulate(c) | Command::Fixedpoint(c) | Command::Uniqueness(c) | Command::Ensemble(c) | Command::Spectrum(c) => {
            (c, Vec::new())
        }
        Command::Selftest(s) => (&s.common, s.criteria.clone()),
    };
    let (cfg, out_dir, quiet) = open(common, err)?;
    let mut s = Session {
        cfg,
        out_dir,
        quiet,
        out,
    };
    match cmd {
        Command::Simulate(_) => simulate(&mut s)?,
        Command::Fixedpoint(_) => fixedpoint(&mut s)?,
        Command::Uniqueness(_) => uniqueness(&mut s)?,
        Command::Ensemble(_) => run_ensemble(&mut s)?,
        Command::Spectrum(_) => spectrum(&mut s)?,
        Command::Selftest(_) => return selftest(&mut s, &selected),
    }
    Ok(())
}

struct Built {
    basis: SpectralBasis,
    initial: FieldPair,
}

fn build(cfg: &RunConfig) -> Result<Built> {
    let basis = cfg.build_basis()?;
    let initial = default_initial(&basis, &cfg.params, cfg.initial.perturbation, cfg.initial.modes_perturbed)?;
    Ok(Built { basis, initial })
}

fn problem<'a>(cfg: &'a RunConfig, basis: &'a SpectralBasis) -> Problem<'a> {
    Problem {
        basis,
        params: &cfg.params,
        noise: &cfg.noise,
        scheme: &cfg.scheme,
    }
}

fn simulate(s: &mut Session) -> Result<()> {
    let cfg = s.cfg.clone();
    let b = build(&cfg)?;
    let path = sample_path(&cfg.noise, &cfg.scheme.time_grid()?, cfg.experiment.first_path);
    let mut rec = FunctionalRecorder::new(&cfg.functionals, cfg.scheme.v_floor);
    let outcome = run(&b.initial, &cfg.params, &cfg.noise, &cfg.scheme, &b.basis, &path, &mut [&mut rec])?;
    let fin = &outcome.final_state;
    write_trace(&rec.trace, s.path("trace.csv"))?;
    s.wrote("trace.csv");
    write_snapshot(&b.basis, &[&fin.pair.u, &fin.pair.v], fin.t, s.path("final.gmsp"))?;
    s.wrote("final.gmsp");
    if b.basis.dim() == 2 {
        write_image(&b.basis, &fin.pair.u, s.path("u_final.pgm"))?;
        write_image(&b.basis, &fin.pair.v, s.path("v_final.pgm"))?;
        s.wrote("u_final.pgm");
        s.wrote("v_final.pgm");
    }
    let (iu, mu) = fin.pair.u.min_nodal()?;
    let (iv, mv) = fin.pair.v.min_nodal()?;
    let lines = vec![
        format!("scheme = {}", cfg.scheme.scheme.as_str()),
        format!("path_index = {}", cfg.experiment.first_path),
        format!("steps = {}", outcome.steps),
        format!("final_time = {}", fmt_float(fin.t)),
        format!("floor_activations = {}", fin.floor_activations),
        format!("min_u = {} at node {iu}", fmt_float(mu)),
        format!("min_v = {} at node {iv}", fmt_float(mv)),
    ];
    write_summary(s.path("summary.txt"), &lines)?;
    s.wrote("summary.txt");
    Ok(())
}

fn fixedpoint(s: &mut Session) -> Result<()> {
    let cfg = s.cfg.clone();
    let b = build(&cfg)?;
    let mut picard = cfg.experiment.picard.clone();
    picard.first_path = cfg.experiment.first_path;
    let rep = picard_iterate(&problem(&cfg, &b.basis), &cfg.functionals, &picard, &b.initial)?;
    let rows: Vec<Vec<String>> = rep
        .distances
        .iter()
        .enumerate()
        .map(|(n, d)| {
            let ratio = if n > 0 { fmt_float(d / rep.distances[n - 1]) } else { String::new() };
            let m = &rep.memberships[n];
            vec![
                n.to_string(),
                fmt_float(*d),
                ratio,
                fmt_float(m.values.mean_l1),
                fmt_float(m.values.mean_l2),
                fmt_float(m.values.sup_mean_l3),
                m.passed().to_string(),
            ]
        })
        .collect();
    write_csv(
        s.path("picard.csv"),
        &["iteration", "distance", "ratio", "mean_l1", "mean_l2", "sup_mean_l3", "admissible"],
        &rows,
    )?;
    s.wrote("picard.csv");
    let a = &rep.admissible;
    let mut lines = vec![
        format!("start = {}", rep.start),
        format!("paths = {}", picard.ensemble_size),
        format!("iterations = {}", rep.iterations()),
        format!("converged = {}", rep.converged),
        format!("final_distance = {}", fmt_float(*rep.distances.last().unwrap())),
        format!("ratios_below_one = {}", rep.ratios_below_one()),
        format!("terminal_residual = {}", fmt_float(rep.terminal_residual)),
        format!("k1 = {}", fmt_float(a.k1)),
        format!("k2 = {}", fmt_float(a.k2)),
        format!("k3 = {}", fmt_float(a.k3)),
        format!("all_iterates_admissible = {}", rep.all_members()),
    ];
    for (n, m) in rep.memberships.iter().enumerate() {
        for f in m.failures() {
            lines.push(format!("iterate {n}: {f}"));
        }
    }
    write_summary(s.path("summary.txt"), &lines)?;
    s.wrote("summary.txt");
    Ok(())
}

fn uniqueness(s: &mut Session) -> Result<()> {
    let cfg = s.cfg.clone();
    let b = build(&cfg)?;
    let path = sample_path(&cfg.noise, &cfg.scheme.time_grid()?, cfg.experiment.first_path);
    let stop = StoppingSpec {
        levels: cfg.experiment.stop_levels.clone(),
    };
    let rep = uniqueness_study(&problem(&cfg, &b.basis), &b.initial, cfg.experiment.uniqueness_delta, &stop, &path)?;
    let rows: Vec<Vec<String>> = (0..rep.times.len())
        .map(|i| vec![fmt_float(rep.times[i]), fmt_float(rep.u_difference[i]), fmt_float(rep.v_difference[i])])
        .collect();
    write_csv(s.path("uniqueness.csv"), &["t", "u_l2_difference", "v_l2_difference"], &rows)?;
    s.wrote("uniqueness.csv");
    let step = |x: Option<usize>| x.map_or("never".to_string(), |n| n.to_string());
    let rows: Vec<Vec<String>> = stop
        .levels
        .iter()
        .enumerate()
        .map(|(i, m)| {
            vec![
                fmt_float(*m),
                step(rep.tau1[0][i]),
                step(rep.tau1[1][i]),
                step(rep.tau2[0][i]),
                step(rep.tau2[1][i]),
            ]
        })
        .collect();
    write_csv(
        s.path("stopping.csv"),
        &["level", "tau1_step_run1", "tau1_step_run2", "tau2_step_run1", "tau2_step_run2"],
        &rows,
    )?;
    s.wrote("stopping.csv");
    let lines = vec![
        format!("scope = {}", rep.scope_note),
        format!("delta = {}", fmt_float(rep.delta)),
        format!("sup_u_difference = {}", fmt_float(rep.sup_u_difference())),
        format!("amplification = {}", fmt_float(rep.amplification)),
        format!("identical = {}", rep.identical()),
    ];
    write_summary(s.path("summary.txt"), &lines)?;
    s.wrote("summary.txt");
    Ok(())
}

fn run_ensemble(s: &mut Session) -> Result<()> {
    let cfg = s.cfg.clone();
    let b = build(&cfg)?;
    let first = cfg.experiment.first_path;
    let indices: Vec<u64> = (first..first + cfg.experiment.paths as u64).collect();
    let rep = ensemble(&problem(&cfg, &b.basis), &cfg.functionals, &b.initial, &indices)?;
    write_statistics(&rep.statistics, s.path("ensemble.csv"))?;
    s.wrote("ensemble.csv");
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for m in rep.monitors.iter().chain(&rep.bounds) {
        for (t, y) in m.horizons.iter().zip(&m.lhs) {
            rows.push(vec![
                m.name.to_string(),
                fmt_float(*t),
                fmt_float(*y),
                fmt_float(m.fit.bound(*t, m.init)),
            ]);
        }
        fits.push(vec![
            m.name.to_string(),
            fmt_float(m.init),
            fmt_float(m.fit.c),
            fmt_float(m.fit.delta),
            m.fit.blow_up.to_string(),
        ]);
    }
    write_csv(s.path("monitors.csv"), &["monitor", "horizon", "lhs", "fitted_bound"], &rows)?;
    s.wrote("monitors.csv");
    write_csv(s.path("fits.csv"), &["monitor", "initial_term", "c", "delta", "blow_up"], &fits)?;
    s.wrote("fits.csv");
    let mut lines = vec![
        format!("paths_requested = {}", indices.len()),
        format!("paths_completed = {}", rep.traces.len()),
        format!("floor_activations = {}", rep.floor_activations()),
        format!("min_v = {}", fmt_float(rep.min_v())),
        format!("blow_up = {}", rep.any_blow_up()),
    ];
    for f in &rep.failures {
        lines.push(format!("failed path {}: {}", f.path_index, f.message));
    }
    write_summary(s.path("summary.txt"), &lines)?;
    s.wrote("summary.txt");
    Ok(())
}

fn spectrum(s: &mut Session) -> Result<()> {
    let cfg = s.cfg.clone();
    let basis = cfg.build_basis()?;
    let rows: Vec<Vec<String>> = basis
        .eigenvalues()
        .iter()
        .enumerate()
        .map(|(k, &l)| {
            vec![
                k.to_string(),
                fmt_float(l),
                fmt_float((1.0 + l).powf(-cfg.noise.gamma1)),
                fmt_float((1.0 + l).powf(-cfg.noise.gamma2)),
            ]
        })
        .collect();
    write_csv(s.path("spectrum.csv"), &["k", "lambda", "q1", "q2"], &rows)?;
    s.wrote("spectrum.csv");
    Ok(())
}

fn selftest(s: &mut Session, ids: &[u8]) -> std::result::Result<(), Failure> {
    let outcomes = acceptance::run_selected(ids);
    let lines: Vec<String> = outcomes.iter().map(ToString::to_string).collect();
    // printed even with --quiet: this is the report
    for l in &lines {
        let _ = writeln!(s.out, "{l}");
    }
    let all = outcomes.iter().all(|o| o.passed);
    write_summary(s.path("selftest.txt"), &lines)?;
    if all {
        Ok(())
    } else {
        Err(Failure::Selftest)
    }
}
