//! Linear Krotov optimization of the control field with sequential
//! (time-local) updates.

use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{BlockHamiltonian, WaveState};
use crate::propagator::{check_lattice, check_norm, propagate, Direction, PropagationError, PropagatorConfig, Stepper};
use crate::units::{au_to_fs, fs_to_au};

/// Round-off allowance when checking that J does not increase.
pub const MONOTONICITY_TOLERANCE: f64 = 1.0e-10;

#[derive(Debug, Error)]
pub enum KrotovError {
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error("functional increased at iteration {iteration}: J {previous:.15e} -> {current:.15e}")]
    MonotonicityViolation { iteration: usize, previous: f64, current: f64 },
    #[error("fidelity evaluation produced NaN at iteration {0}")]
    NotANumber(usize),
    #[error("invalid optimization setup: {0}")]
    InvalidSetup(String),
    #[error("malformed pulse file: {0}")]
    PulseFile(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// `sin^2(pi t / T)`.
pub fn shape_function(t: f64, duration: f64) -> f64 {
    let s = (PI * t / duration).sin();
    s * s
}

/// Control field on a uniform lattice `t_k = k dt`, `k = 0..=n`. Amplitudes
/// and update shape live on the interval midpoints `(n + 1/2) dt`; the field
/// is constant within each interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlField {
    pub dt: f64,
    pub amplitude: Vec<f64>,
    pub shape: Vec<f64>,
    pub carrier_freq: f64,
}

impl ControlField {
    /// Lattice with `round(duration / dt)` intervals; `dt` is adjusted so
    /// that the intervals tile `[0, duration]` exactly.
    pub fn from_fn(duration: f64, dt: f64, carrier_freq: f64, f: impl Fn(f64) -> f64) -> Self {
        let n = lattice_steps(duration, dt);
        let dt = duration / n as f64;
        let mids: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) * dt).collect();
        Self {
            dt,
            amplitude: mids.iter().map(|&t| f(t)).collect(),
            shape: mids.iter().map(|&t| shape_function(t, duration)).collect(),
            carrier_freq,
        }
    }

    pub fn zero(duration: f64, dt: f64) -> Self {
        Self::from_fn(duration, dt, 0.0, |_| 0.0)
    }

    pub fn n_steps(&self) -> usize {
        self.amplitude.len()
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.n_steps() as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps()).map(|k| k as f64 * self.dt).collect()
    }

    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.n_steps()).map(|k| (k as f64 + 0.5) * self.dt).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.amplitude.iter().fold(0.0f64, |m, a| m.max(a.abs()))
    }

    /// `int eps^2 dt` for the piecewise-constant field.
    pub fn fluence(&self) -> f64 {
        self.amplitude.iter().map(|a| a * a).sum::<f64>() * self.dt
    }

    /// Pulse CSV: `t_fs, epsilon` at the interval midpoints (field in a.u.).
    pub fn write_csv<W: Write>(&self, out: &mut W, header_comment: &str) -> std::io::Result<()> {
        writeln!(out, "{header_comment}")?;
        writeln!(out, "t_fs,epsilon")?;
        for (t, a) in self.midpoints().iter().zip(&self.amplitude) {
            writeln!(out, "{:.17e},{:.17e}", au_to_fs(*t), a)?;
        }
        Ok(())
    }

    /// Reads a pulse CSV written by [`ControlField::write_csv`] onto the
    /// lattice of `template`, which also supplies shape and carrier.
    pub fn read_csv<R: BufRead>(input: R, template: &ControlField) -> Result<ControlField, KrotovError> {
        let bad = |m: String| KrotovError::PulseFile(m);
        let mut amps = Vec::new();
        let mut times = Vec::new();
        for line in input.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("t_fs") {
                continue;
            }
            let mut it = line.split(',');
            let t = it.next().and_then(|v| v.trim().parse::<f64>().ok()).ok_or_else(|| bad(format!("bad row '{line}'")))?;
            let a = it.next().and_then(|v| v.trim().parse::<f64>().ok()).ok_or_else(|| bad(format!("bad row '{line}'")))?;
            times.push(fs_to_au(t));
            amps.push(a);
        }
        if amps.len() != template.n_steps() {
            return Err(bad(format!("pulse has {} samples, lattice has {}", amps.len(), template.n_steps())));
        }
        for (t, m) in times.iter().zip(template.midpoints()) {
            if (t - m).abs() > 1e-6 * template.dt {
                return Err(bad(format!("sample time {t:e} does not match lattice midpoint {m:e}")));
            }
        }
        let mut f = template.clone();
        f.amplitude = amps;
        Ok(f)
    }
}

pub fn lattice_steps(duration: f64, dt: f64) -> usize {
    ((duration / dt).round() as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuessKind {
    /// Gaussian envelope driving one full Rabi cycle of the single atom.
    Gaussian2Pi,
}

/// Full width at half maximum of the guess envelope, as a fraction of T.
pub const GUESS_FWHM_FRACTION: f64 = 1.0 / 6.0;

pub fn guess_envelope(t: f64, duration: f64) -> f64 {
    let fwhm = GUESS_FWHM_FRACTION * duration;
    let x = t - 0.5 * duration;
    (-4.0 * std::f64::consts::LN_2 * x * x / (fwhm * fwhm)).exp()
}

/// Guess pulse `E0 g(t) cos(carrier t)` whose discrete single-atom area
/// `mu0 E0 sum g(t_n) dt` equals 2 pi.
pub fn make_guess_pulse(duration: f64, dt: f64, carrier: f64, kind: GuessKind, mu0: f64) -> ControlField {
    match kind {
        GuessKind::Gaussian2Pi => {
            let mut f = ControlField::from_fn(duration, dt, carrier, |t| guess_envelope(t, duration));
            let area: f64 = f.amplitude.iter().sum::<f64>() * f.dt * mu0;
            let e0 = 2.0 * PI / area;
            let mids = f.midpoints();
            for (a, t) in f.amplitude.iter_mut().zip(mids) {
                *a *= e0 * (carrier * t).cos();
            }
            f
        }
    }
}

/// One contribution `weight * <target|psi(T)>` to the complex gate overlap.
#[derive(Debug, Clone)]
pub struct Target {
    pub name: String,
    pub block: Arc<BlockHamiltonian>,
    pub initial: WaveState,
    pub target: WaveState,
    pub weight: f64,
}

/// `tau = fixed_tau + sum weight <target|psi(T)>`, `F = Re(tau) / normalization`.
#[derive(Debug, Clone)]
pub struct Objective {
    pub targets: Vec<Target>,
    pub fixed_tau: Complex64,
    pub normalization: f64,
}

impl Objective {
    pub fn tau(&self, finals: &[WaveState]) -> Complex64 {
        self.targets
            .iter()
            .zip(finals)
            .map(|(t, f)| t.block.inner(&t.target.data, &f.data) * t.weight)
            .fold(self.fixed_tau, |a, b| a + b)
    }

    pub fn fidelity(&self, finals: &[WaveState]) -> f64 {
        self.tau(finals).re / self.normalization
    }

    /// Forward propagation of every initial state under `field`.
    pub fn propagate_all(&self, field: &ControlField, config: &PropagatorConfig) -> Result<Vec<WaveState>, PropagationError> {
        self.targets
            .par_iter()
            .map(|t| propagate(&t.block, &t.initial, field, Direction::Forward, config, None))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrotovConfig {
    /// Fixed penalty scale; `None` selects it from the first gradient.
    pub alpha: Option<f64>,
    /// Target peak first-iteration update relative to the guess peak when
    /// `alpha` is chosen automatically.
    pub auto_alpha_fraction: f64,
    pub max_iterations: usize,
    pub convergence_delta_f: f64,
    /// Snapshot stride for the final recorded forward pass (0 disables it).
    pub record_stride: usize,
    /// Memory allowed for stored backward trajectories before falling back
    /// to checkpoints and re-propagation.
    pub memory_budget_bytes: usize,
}

impl Default for KrotovConfig {
    fn default() -> Self {
        Self {
            alpha: None,
            auto_alpha_fraction: 0.05,
            max_iterations: 200,
            convergence_delta_f: 1.0e-4,
            record_stride: 0,
            memory_budget_bytes: 1 << 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub j: f64,
    pub f: f64,
    pub fluence: f64,
    pub delta_f: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizationRecord {
    pub iterations: Vec<IterationRecord>,
    pub field: ControlField,
    pub final_states: Vec<WaveState>,
    /// Snapshots of the final forward pass per target, every `record_stride` steps.
    pub trajectories: Vec<Vec<WaveState>>,
    pub tau: Complex64,
    pub alpha: f64,
    pub converged: bool,
}

impl OptimizationRecord {
    pub fn final_fidelity(&self) -> f64 {
        self.iterations.last().map(|r| r.f).unwrap_or(f64::NAN)
    }

    pub fn last_delta_f(&self) -> f64 {
        self.iterations.last().map(|r| r.delta_f).unwrap_or(f64::NAN)
    }

    /// Number of completed Krotov updates.
    pub fn n_iterations(&self) -> usize {
        self.iterations.len().saturating_sub(1)
    }

    /// Convergence CSV: `iteration, J, F, delta_F, fluence_ratio`.
    pub fn write_convergence_csv<W: Write>(&self, out: &mut W, header_comment: &str) -> std::io::Result<()> {
        writeln!(out, "{header_comment}")?;
        writeln!(out, "iteration,J,F,delta_F,fluence_ratio")?;
        let f0 = self.iterations.first().map(|r| r.fluence).unwrap_or(1.0);
        for r in &self.iterations {
            let ratio = if f0 > 0.0 { r.fluence / f0 } else { f64::NAN };
            writeln!(out, "{},{:.15e},{:.15e},{:.6e},{:.9e}", r.iteration, r.j, r.f, r.delta_f, ratio)?;
        }
        Ok(())
    }
}

/// `(J, F)` for final states reached under `field_new`, with the running
/// cost measured against `field_old`.
pub fn evaluate_functional(
    finals: &[WaveState],
    objective: &Objective,
    field_old: &ControlField,
    field_new: &ControlField,
    alpha: f64,
) -> (f64, f64) {
    let f = objective.fidelity(finals);
    let penalty: f64 = field_old
        .amplitude
        .iter()
        .zip(&field_new.amplitude)
        .zip(&field_new.shape)
        .map(|((a, b), &s)| if s > 0.0 { alpha / s * (b - a) * (b - a) * field_new.dt } else { 0.0 })
        .sum();
    (-f + penalty, f)
}

/// Backward trajectory of one target, stored fully or at checkpoints.
struct BackwardStore {
    stride: usize,
    n_steps: usize,
    checkpoints: Vec<Vec<Complex64>>,
    final_state: Vec<Complex64>,
    segment_index: Option<usize>,
    segment: Vec<Vec<Complex64>>,
}

impl BackwardStore {
    fn build(target: &Target, field: &ControlField, config: &PropagatorConfig, stride: usize) -> Result<Self, PropagationError> {
        let n = field.n_steps();
        let block = &*target.block;
        let mut stepper = Stepper::new(block, *config, field.max_abs())?;
        let mut chi = target.target.data.clone();
        let norm0 = block.norm_sqr(&chi);
        let mut rev = Vec::with_capacity(n / stride + 2);
        if n % stride == 0 {
            rev.push(chi.clone());
        }
        for idx in (0..n).rev() {
            stepper.step_in_place(&mut chi, field.amplitude[idx], Direction::Backward)?;
            if idx % stride == 0 {
                rev.push(chi.clone());
            }
            if idx % 64 == 0 {
                check_norm(block, &chi, norm0, n - idx)?;
            }
        }
        rev.reverse();
        Ok(Self {
            stride,
            n_steps: n,
            checkpoints: rev,
            final_state: target.target.data.clone(),
            segment_index: None,
            segment: Vec::new(),
        })
    }

    /// Backward state at lattice point `k`; may re-propagate one segment.
    fn get(&mut self, k: usize, stepper: &mut Stepper<'_>, field: &ControlField) -> Result<&[Complex64], PropagationError> {
        if self.stride == 1 {
            return Ok(&self.checkpoints[k]);
        }
        let seg = k / self.stride;
        if self.segment_index != Some(seg) {
            let lo = seg * self.stride;
            let hi = ((seg + 1) * self.stride).min(self.n_steps);
            let mut chi = if hi == self.n_steps { self.final_state.clone() } else { self.checkpoints[seg + 1].clone() };
            let mut buf = vec![Vec::new(); hi - lo + 1];
            buf[hi - lo] = chi.clone();
            for idx in (lo..hi).rev() {
                stepper.step_in_place(&mut chi, field.amplitude[idx], Direction::Backward)?;
                buf[idx - lo] = chi.clone();
            }
            self.segment = buf;
            self.segment_index = Some(seg);
        }
        Ok(&self.segment[k - seg * self.stride])
    }
}

fn storage_stride(objective: &Objective, n_steps: usize, budget: usize) -> usize {
    let bytes: usize = objective
        .targets
        .iter()
        .map(|t| (n_steps + 1) * t.block.dim() * std::mem::size_of::<Complex64>())
        .sum();
    if bytes <= budget {
        1
    } else {
        let s = bytes.div_ceil(budget.max(1)).max(2);
        log::info!("backward storage {bytes} B exceeds budget {budget} B; using checkpoint stride {s}");
        s
    }
}

fn backward_all(
    objective: &Objective,
    field: &ControlField,
    config: &PropagatorConfig,
    stride: usize,
) -> Result<Vec<BackwardStore>, PropagationError> {
    objective.targets.par_iter().map(|t| BackwardStore::build(t, field, config, stride)).collect()
}

struct SweepResult {
    field: ControlField,
    finals: Vec<WaveState>,
    /// Raw gradient samples `Im sum w <chi|mu|psi>` per interval.
    gradient: Vec<f64>,
}

/// Forward sweep. With `alpha = None` the field is left unchanged and only
/// the gradient is recorded.
fn forward_sweep(
    objective: &Objective,
    field: &ControlField,
    stores: &mut [BackwardStore],
    config: &PropagatorConfig,
    alpha: Option<f64>,
) -> Result<SweepResult, PropagationError> {
    let n = field.n_steps();
    let bound = field.max_abs();
    let mut fwd: Vec<Stepper<'_>> =
        objective.targets.iter().map(|t| Stepper::new(&t.block, *config, bound)).collect::<Result<_, _>>()?;
    let mut bwd: Vec<Option<Stepper<'_>>> = objective
        .targets
        .iter()
        .zip(stores.iter())
        .map(|(t, s)| if s.stride > 1 { Stepper::new(&t.block, *config, bound).map(Some) } else { Ok(None) })
        .collect::<Result<_, _>>()?;
    let mut psis: Vec<Vec<Complex64>> = objective.targets.iter().map(|t| t.initial.data.clone()).collect();
    let norms0: Vec<f64> = objective.targets.iter().zip(&psis).map(|(t, p)| t.block.norm_sqr(p)).collect();
    let mut new_field = field.clone();
    let mut gradient = vec![0.0; n];

    for k in 0..n {
        let mut g = 0.0;
        for (i, t) in objective.targets.iter().enumerate() {
            let chi = match bwd[i].as_mut() {
                Some(st) => stores[i].get(k, st, field)?,
                None => &stores[i].checkpoints[k],
            };
            g += t.weight * t.block.dipole_matrix_element(chi, &psis[i]).im;
        }
        gradient[k] = g;
        if let Some(a) = alpha {
            let s = field.shape[k];
            let delta = if s > 0.0 { s * g / (2.0 * a * objective.normalization) } else { 0.0 };
            new_field.amplitude[k] = field.amplitude[k] + delta;
        }
        let eps = new_field.amplitude[k];
        for (st, psi) in fwd.iter_mut().zip(psis.iter_mut()) {
            st.step_in_place(psi, eps, Direction::Forward)?;
        }
        if k % 64 == 63 || k + 1 == n {
            for ((t, psi), &n0) in objective.targets.iter().zip(&psis).zip(&norms0) {
                check_norm(&t.block, psi, n0, k + 1)?;
            }
        }
    }

    let finals = objective
        .targets
        .iter()
        .zip(psis)
        .map(|(t, data)| WaveState { labels: t.initial.labels.clone(), n_points: t.initial.n_points, data, time: field.duration() })
        .collect();
    Ok(SweepResult { field: new_field, finals, gradient })
}

fn validate(objective: &Objective, guess: &ControlField, prop: &PropagatorConfig, config: &KrotovConfig) -> Result<(), KrotovError> {
    prop.validate()?;
    check_lattice(guess, prop)?;
    if objective.targets.is_empty() {
        return Err(KrotovError::InvalidSetup("no targets".into()));
    }
    if !(objective.normalization > 0.0) {
        return Err(KrotovError::InvalidSetup("normalization must be positive".into()));
    }
    if let Some(a) = config.alpha {
        if !(a > 0.0) || !a.is_finite() {
            return Err(KrotovError::InvalidSetup(format!("alpha must be positive, got {a}")));
        }
    }
    if !(config.auto_alpha_fraction > 0.0) {
        return Err(KrotovError::InvalidSetup("auto_alpha_fraction must be positive".into()));
    }
    for t in &objective.targets {
        t.block.check_state(&t.initial).map_err(|e| KrotovError::InvalidSetup(e.to_string()))?;
        t.block.check_state(&t.target).map_err(|e| KrotovError::InvalidSetup(e.to_string()))?;
    }
    if guess.amplitude.iter().any(|a| !a.is_finite()) {
        return Err(KrotovError::InvalidSetup("guess field is not finite".into()));
    }
    Ok(())
}

/// Runs Krotov iterations starting from `guess`.
pub fn krotov_optimize(
    objective: &Objective,
    guess: &ControlField,
    prop: &PropagatorConfig,
    config: &KrotovConfig,
) -> Result<OptimizationRecord, KrotovError> {
    validate(objective, guess, prop, config)?;
    let stride = storage_stride(objective, guess.n_steps(), config.memory_budget_bytes);

    let mut field = guess.clone();
    let mut stores = backward_all(objective, &field, prop, stride)?;
    let probe = forward_sweep(objective, &field, &mut stores, prop, None)?;
    let f0 = objective.fidelity(&probe.finals);
    if f0.is_nan() {
        return Err(KrotovError::NotANumber(0));
    }
    let alpha = match config.alpha {
        Some(a) => a,
        None => {
            let gmax = probe
                .gradient
                .iter()
                .zip(&field.shape)
                .fold(0.0f64, |m, (g, s)| m.max((g * s).abs()));
            let peak = field.max_abs().max(1e-300);
            let a = gmax / (2.0 * objective.normalization * config.auto_alpha_fraction * peak);
            if a > 0.0 {
                a
            } else {
                1.0
            }
        }
    };
    log::info!("krotov: F0 = {f0:.9}, alpha = {alpha:.6e}, {} steps, storage stride {stride}", field.n_steps());

    let mut iterations = vec![IterationRecord { iteration: 0, j: -f0, f: f0, fluence: field.fluence(), delta_f: f64::NAN }];
    let mut finals = probe.finals;
    let mut converged = false;

    for it in 1..=config.max_iterations {
        if it > 1 {
            stores = backward_all(objective, &field, prop, stride)?;
        }
        let sweep = forward_sweep(objective, &field, &mut stores, prop, Some(alpha))?;
        let (j, f) = evaluate_functional(&sweep.finals, objective, &field, &sweep.field, alpha);
        if f.is_nan() || j.is_nan() {
            return Err(KrotovError::NotANumber(it));
        }
        let prev = *iterations.last().unwrap();
        if j > prev.j + MONOTONICITY_TOLERANCE {
            return Err(KrotovError::MonotonicityViolation { iteration: it, previous: prev.j, current: j });
        }
        let delta_f = f - prev.f;
        iterations.push(IterationRecord { iteration: it, j, f, fluence: sweep.field.fluence(), delta_f });
        log::debug!("krotov iteration {it}: J = {j:.12}, F = {f:.12}, dF = {delta_f:.3e}");
        field = sweep.field;
        finals = sweep.finals;
        if delta_f.abs() < config.convergence_delta_f {
            converged = true;
            break;
        }
    }

    let trajectories = if config.record_stride > 0 {
        record_trajectories(objective, &field, prop, config.record_stride)?
    } else {
        Vec::new()
    };
    let tau = objective.tau(&finals);
    Ok(OptimizationRecord { iterations, field, final_states: finals, trajectories, tau, alpha, converged })
}

/// Forward snapshots of every target every `stride` steps (both ends included).
pub fn record_trajectories(
    objective: &Objective,
    field: &ControlField,
    prop: &PropagatorConfig,
    stride: usize,
) -> Result<Vec<Vec<WaveState>>, PropagationError> {
    objective
        .targets
        .par_iter()
        .map(|t| {
            let mut snaps = Vec::new();
            {
                let mut rec = crate::propagator::Recorder {
                    stride,
                    callback: Box::new(|_, s: &WaveState| snaps.push(s.clone())),
                };
                propagate(&t.block, &t.initial, field, Direction::Forward, prop, Some(&mut rec))?;
            }
            Ok(snaps)
        })
        .collect()
}
