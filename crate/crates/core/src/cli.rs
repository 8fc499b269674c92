//! Command-line front end and experiment runners.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use crate::analysis::{pulse_spectrum, speed_limit_estimates, GateReport, GateSetup};
use crate::config::{ConfigError, ExperimentConfig, SweepVariable};
use crate::grid::{build_grid, write_eigenstates_csv, SpatialGrid};
use crate::krotov::{krotov_optimize, make_guess_pulse, record_trajectories, ControlField, OptimizationRecord};
use crate::model::{build_calcium_like_system, reduce_system, ChannelSystem, Mode};
use crate::units::{au_to_fs, hartree_to_cm};
use crate::{Error, Result};

/// Snapshots kept for population and phase traces when the config does not
/// set `krotov.record_stride`.
const DEFAULT_TRACE_SAMPLES: usize = 1000;

#[derive(Debug, Parser)]
#[command(name = "phasegate", version, about = "Optimal-control synthesis of two-atom controlled phasegates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory (overrides run.output_dir).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Warm start: a pulse CSV for `optimize`, a previous sweep directory for `sweep`.
    #[arg(long, global = true)]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize a single gate.
    Optimize { config: PathBuf },
    /// Run the gate-time or C3 sweep defined in the config.
    Sweep { config: PathBuf },
    /// Re-propagate a reduced-model pulse under the full Hamiltonian.
    Crosscheck {
        config: PathBuf,
        #[arg(long)]
        pulse: PathBuf,
    },
    /// Export the trap eigenstates of the grid.
    Eigenstates {
        config: PathBuf,
        #[arg(long, default_value_t = 50)]
        count: usize,
    },
    /// Print interaction and vibrational timescales.
    Estimate { config: PathBuf },
}

/// Builds the channel system for the configured mode.
pub fn build_system(cfg: &ExperimentConfig, mode: Mode) -> Result<ChannelSystem> {
    let full = build_calcium_like_system(&cfg.params)?;
    Ok(match mode {
        Mode::Full8 => full,
        Mode::Reduced4Plus2 => reduce_system(&full)?,
    })
}

pub fn build_spatial_grid(cfg: &ExperimentConfig, system: &ChannelSystem) -> Result<SpatialGrid> {
    Ok(build_grid(&cfg.grid, |r| system.trap_potential(r))?)
}

pub fn build_setup(cfg: &ExperimentConfig, mode: Mode) -> Result<GateSetup> {
    let system = build_system(cfg, mode)?;
    let grid = build_spatial_grid(cfg, &system)?;
    Ok(GateSetup::new(system, grid, cfg.duration, cfg.chi_target)?)
}

pub fn guess_field(cfg: &ExperimentConfig) -> ControlField {
    make_guess_pulse(cfg.duration, cfg.dt, cfg.carrier(), cfg.guess, cfg.params.mu0)
}

/// Result of one optimization.
#[derive(Debug)]
pub struct RunOutcome {
    pub setup: GateSetup,
    pub record: OptimizationRecord,
    pub report: GateReport,
}

impl RunOutcome {
    pub fn status(&self) -> &'static str {
        if self.record.converged {
            "converged"
        } else {
            "max_iterations"
        }
    }
}

/// Runs Krotov from the guess pulse, or from `start` when given.
pub fn optimize(cfg: &ExperimentConfig, start: Option<ControlField>) -> Result<RunOutcome> {
    let setup = build_setup(cfg, cfg.mode)?;
    let guess = start.unwrap_or_else(|| guess_field(cfg));
    let mut prop = cfg.propagator.clone();
    prop.dt = guess.dt;
    let record = krotov_optimize(&setup.objective(), &guess, &prop, &cfg.krotov)?;
    let report = setup.report(&record.final_states)?;
    Ok(RunOutcome { setup, record, report })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn read_pulse(path: &Path, template: &ControlField) -> Result<ControlField> {
    let file = File::open(path)?;
    Ok(ControlField::read_csv(BufReader::new(file), template)?)
}

/// Writes report, convergence log, pulse, spectrum, populations and phase traces.
pub fn write_run_artifacts(cfg: &ExperimentConfig, outcome: &RunOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let tag = cfg.hash_comment();
    let rec = &outcome.record;

    let mut kv = create(&dir.join("report.txt"))?;
    writeln!(kv, "{tag}")?;
    write!(kv, "{}", outcome.report.key_value())?;
    writeln!(kv, "iterations = {}", rec.n_iterations())?;
    writeln!(kv, "delta_F = {:.6e}", rec.last_delta_f())?;
    writeln!(kv, "status = {}", outcome.status())?;
    writeln!(kv, "alpha = {:.9e}", rec.alpha)?;
    let fl0 = rec.iterations[0].fluence;
    writeln!(kv, "fluence_ratio = {:.9}", rec.iterations.last().unwrap().fluence / fl0)?;
    writeln!(kv, "seed = {}", cfg.seed)?;
    kv.flush()?;

    let mut row = create(&dir.join("report.csv"))?;
    writeln!(row, "{tag}")?;
    writeln!(row, "{}", GateReport::csv_header())?;
    writeln!(row, "{}", outcome.report.csv_row(rec.n_iterations(), rec.last_delta_f(), outcome.status()))?;
    row.flush()?;

    let mut conv = create(&dir.join("convergence.csv"))?;
    rec.write_convergence_csv(&mut conv, &tag)?;
    conv.flush()?;

    let mut pulse = create(&dir.join("pulse.csv"))?;
    rec.field.write_csv(&mut pulse, &tag)?;
    pulse.flush()?;

    let spectrum = pulse_spectrum(&rec.field);
    let mut sp = create(&dir.join("spectrum.csv"))?;
    spectrum.write_csv(&mut sp, &tag)?;
    sp.flush()?;

    let trajectories = if rec.trajectories.is_empty() {
        let stride = (rec.field.n_steps() / DEFAULT_TRACE_SAMPLES).max(1);
        let mut prop = cfg.propagator.clone();
        prop.dt = rec.field.dt;
        record_trajectories(&outcome.setup.objective(), &rec.field, &prop, stride)?
    } else {
        rec.trajectories.clone()
    };
    let mut pops = create(&dir.join("populations.csv"))?;
    outcome.setup.write_populations_csv(&mut pops, &tag, &trajectories)?;
    pops.flush()?;
    let trace = outcome.setup.phase_trace(&trajectories)?;
    let mut tr = create(&dir.join("phase_trace.csv"))?;
    trace.write_csv(&mut tr, &tag)?;
    tr.flush()?;
    Ok(())
}

pub fn run_optimize(cfg: &ExperimentConfig, out: &Path, resume: Option<&Path>) -> Result<RunOutcome> {
    let start = match resume {
        Some(p) => Some(read_pulse(p, &guess_field(cfg))?),
        None => None,
    };
    let outcome = optimize(cfg, start)?;
    write_run_artifacts(cfg, &outcome, out)?;
    Ok(outcome)
}

/// One sweep point; failures are kept as messages.
#[derive(Debug)]
pub struct SweepPoint {
    pub value: f64,
    pub outcome: std::result::Result<RunOutcome, String>,
}

fn point_dir(out: &Path, index: usize) -> PathBuf {
    out.join(format!("point_{index:03}"))
}

fn failure_row(cfg: &ExperimentConfig, message: &str) -> String {
    let clean: String = message.chars().map(|c| if c == ',' || c == '\n' { ';' } else { c }).collect();
    format!("{:.9e},{:.9e},NaN,NaN,NaN,NaN,NaN,NaN,0,NaN,failed: {clean}", au_to_fs(cfg.duration), cfg.params.c3)
}

/// Independent optimizations over the sweep values, aggregated in value order.
pub fn run_sweep(cfg: &ExperimentConfig, out: &Path, resume: Option<&Path>) -> Result<Vec<SweepPoint>> {
    let values = match &cfg.sweep {
        Some(s) => s.values().to_vec(),
        None => return Err(ConfigError::Invalid("config has no [sweep] section".into()).into()),
    };
    std::fs::create_dir_all(out)?;
    let points: Vec<(usize, f64, std::result::Result<ExperimentConfig, String>)> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| (i, v, cfg.at_sweep_value(v).map_err(|e| e.to_string())))
        .collect();

    let results: Vec<SweepPoint> = points
        .into_par_iter()
        .map(|(i, value, sub)| {
            let outcome = sub.and_then(|sub| {
                let start = resume.map(|r| point_dir(r, i).join("pulse.csv")).filter(|p| p.exists());
                if let Some(p) = &start {
                    log::info!("sweep point {i}: warm start from {}", p.display());
                }
                run_optimize(&sub, &point_dir(out, i), start.as_deref()).map_err(|e| e.to_string())
            });
            if let Err(e) = &outcome {
                log::error!("sweep point {i} ({value:e}) failed: {e}");
            }
            SweepPoint { value, outcome }
        })
        .collect();

    let mut table = create(&out.join("sweep.csv"))?;
    writeln!(table, "{}", cfg.hash_comment())?;
    writeln!(table, "# sweep-variable: {}", cfg.sweep.as_ref().map(SweepVariable::name).unwrap_or(""))?;
    writeln!(table, "{}", GateReport::csv_header())?;
    for p in &results {
        match &p.outcome {
            Ok(o) => writeln!(table, "{}", o.report.csv_row(o.record.n_iterations(), o.record.last_delta_f(), o.status()))?,
            Err(e) => {
                let sub = match cfg.at_sweep_value(p.value) {
                    Ok(s) => s,
                    Err(_) => cfg.clone(),
                };
                writeln!(table, "{}", failure_row(&sub, e))?
            }
        }
    }
    table.flush()?;
    Ok(results)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crosscheck {
    pub f_reduced: f64,
    pub f_full: f64,
    pub chi_reduced: f64,
    pub chi_full: f64,
}

impl Crosscheck {
    pub fn delta(&self) -> f64 {
        self.f_full - self.f_reduced
    }
}

/// Propagates `field` under both the reduced and full models.
pub fn crosscheck_field(cfg: &ExperimentConfig, field: &ControlField) -> Result<Crosscheck> {
    let mut prop = cfg.propagator.clone();
    prop.dt = field.dt;
    let eval = |mode| -> Result<(f64, f64)> {
        let setup = build_setup(cfg, mode)?;
        let finals = setup.objective().propagate_all(field, &prop)?;
        let r = setup.report(&finals)?;
        Ok((r.fidelity, r.chi))
    };
    let (f_reduced, chi_reduced) = eval(Mode::Reduced4Plus2)?;
    let (f_full, chi_full) = eval(Mode::Full8)?;
    Ok(Crosscheck { f_reduced, f_full, chi_reduced, chi_full })
}

pub fn run_crosscheck(cfg: &ExperimentConfig, pulse: &Path, out: &Path) -> Result<Crosscheck> {
    let field = read_pulse(pulse, &guess_field(cfg))?;
    let c = crosscheck_field(cfg, &field)?;
    std::fs::create_dir_all(out)?;
    let mut f = create(&out.join("crosscheck.txt"))?;
    writeln!(f, "{}", cfg.hash_comment())?;
    writeln!(f, "F_reduced = {:.12}", c.f_reduced)?;
    writeln!(f, "F_full = {:.12}", c.f_full)?;
    writeln!(f, "delta_F = {:.6e}", c.delta())?;
    writeln!(f, "chi_reduced_over_pi = {:.12}", c.chi_reduced / std::f64::consts::PI)?;
    writeln!(f, "chi_full_over_pi = {:.12}", c.chi_full / std::f64::consts::PI)?;
    f.flush()?;
    Ok(c)
}

pub fn run_eigenstates(cfg: &ExperimentConfig, count: usize, out: &Path) -> Result<Vec<crate::grid::BoundState>> {
    let system = build_system(cfg, cfg.mode)?;
    let grid = build_spatial_grid(cfg, &system)?;
    let states = system.trap_states(&grid, count)?;
    std::fs::create_dir_all(out)?;
    let mut f = create(&out.join("eigenstates.csv"))?;
    writeln!(f, "{}", cfg.hash_comment())?;
    write_eigenstates_csv(&mut f, &states)?;
    f.flush()?;
    Ok(states)
}

/// Timescale block plus the ground-state overlap bound `exp(-m omega d^2 / 2)`.
pub fn estimate_text(cfg: &ExperimentConfig) -> Result<String> {
    let system = build_system(cfg, cfg.mode)?;
    let grid = build_spatial_grid(cfg, &system)?;
    let est = speed_limit_estimates(&system, Some(&grid))?;
    let p = &cfg.params;
    // Atom mass is twice the reduced mass.
    let overlap = (-p.mass * p.omega * p.distance * p.distance).exp();
    Ok(format!(
        "{}t_int_rad_au = {:.9e}\nt_int_pi_au = {:.9e}\nt_v_au = {:.9e}\nomega_cm = {:.9e}\nground_overlap_bound = {:.6e}\n",
        est.key_value(),
        est.t_int_rad,
        est.t_int_pi,
        est.t_v,
        hartree_to_cm(p.omega),
        overlap
    ))
}

fn load(path: &Path, cli: &Cli) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    let out = cli.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    Ok((cfg, out))
}

fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(ConfigError::Invalid(format!("cannot start worker pool: {e}"))))?;
    Ok(pool.install(f))
}

/// Executes one parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Optimize { config } => {
            let (cfg, out) = load(config, cli)?;
            let o = with_workers(cfg.workers, || run_optimize(&cfg, &out, cli.resume.as_deref()))??;
            print!("{}", o.report.key_value());
            println!("iterations = {}\nstatus = {}", o.record.n_iterations(), o.status());
        }
        Command::Sweep { config } => {
            let (cfg, out) = load(config, cli)?;
            let pts = with_workers(cfg.workers, || run_sweep(&cfg, &out, cli.resume.as_deref()))??;
            println!("{}", GateReport::csv_header());
            for p in &pts {
                match &p.outcome {
                    Ok(o) => println!("{}", o.report.csv_row(o.record.n_iterations(), o.record.last_delta_f(), o.status())),
                    Err(e) => println!("# value {:e} failed: {e}", p.value),
                }
            }
        }
        Command::Crosscheck { config, pulse } => {
            let (cfg, out) = load(config, cli)?;
            let c = with_workers(cfg.workers, || run_crosscheck(&cfg, pulse, &out))??;
            println!("F_reduced = {:.12}\nF_full = {:.12}\ndelta_F = {:.6e}", c.f_reduced, c.f_full, c.delta());
        }
        Command::Eigenstates { config, count } => {
            let (cfg, out) = load(config, cli)?;
            let states = run_eigenstates(&cfg, *count, &out)?;
            for (n, s) in states.iter().enumerate() {
                println!("{n} {:.15e}", s.energy);
            }
        }
        Command::Estimate { config } => {
            let (cfg, _) = load(config, cli)?;
            print!("{}", estimate_text(&cfg)?);
        }
    }
    Ok(())
}
