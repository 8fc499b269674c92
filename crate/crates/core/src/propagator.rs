//! Chebychev propagation of block states under a piecewise-constant field.

use std::io::{BufRead, Write};

use num_complex::Complex64;
use thiserror::Error;

use crate::grid::SpatialGrid;
use crate::krotov::ControlField;
use crate::model::{BlockHamiltonian, ChannelLabel, ChannelSystem, Level, WaveState};
use crate::units::{au_to_fs, fs_to_au};

/// Relative padding added to each end of the spectral range.
pub const RANGE_PADDING: f64 = 0.05;
/// A propagated norm drifting further than this from its start aborts.
pub const UNITARITY_ABORT: f64 = 1.0e-6;

#[derive(Debug, Error)]
pub enum PropagationError {
    #[error("Chebychev series did not converge within {max_order} terms (argument {argument:.3e}); spectral range too small or dt too large")]
    SeriesNotConverged { max_order: usize, argument: f64 },
    #[error("invalid propagator configuration: {0}")]
    InvalidConfig(String),
    #[error("unitarity lost at step {step}: norm {norm:.3e}, expected {expected:.3e}")]
    UnitarityLoss { step: usize, norm: f64, expected: f64 },
    #[error("field lattice step {field_dt:e} does not match propagator step {config_dt:e}")]
    LatticeMismatch { field_dt: f64, config_dt: f64 },
    #[error("state channels do not match the Hamiltonian block")]
    StateMismatch,
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralRange {
    pub e_min: f64,
    pub e_max: f64,
}

impl SpectralRange {
    pub fn contains(&self, e: f64) -> bool {
        e >= self.e_min && e <= self.e_max
    }

    pub fn union(&self, other: &SpectralRange) -> SpectralRange {
        SpectralRange { e_min: self.e_min.min(other.e_min), e_max: self.e_max.max(other.e_max) }
    }

    fn padded(&self) -> SpectralRange {
        let w = (self.e_max - self.e_min).max(1e-300);
        SpectralRange { e_min: self.e_min - RANGE_PADDING * w, e_max: self.e_max + RANGE_PADDING * w }
    }
}

/// Time step and truncation control, in atomic units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorConfig {
    pub dt: f64,
    pub tolerance: f64,
    pub max_order: usize,
}

impl PropagatorConfig {
    pub fn new(dt: f64) -> Self {
        Self { dt, tolerance: 1.0e-12, max_order: 4096 }
    }

    pub fn validate(&self) -> Result<(), PropagationError> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(PropagationError::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.tolerance > 0.0 && self.tolerance <= 1.0e-6) {
            return Err(PropagationError::InvalidConfig(format!(
                "tolerance must lie in (0, 1e-6], got {}",
                self.tolerance
            )));
        }
        if self.max_order < 3 {
            return Err(PropagationError::InvalidConfig("max_order must be at least 3".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Bounds on the spectrum of a block for any field with `|field| <= max_field`.
pub fn estimate_spectral_range(block: &BlockHamiltonian, max_field: f64) -> SpectralRange {
    let (vmin, vmax) = block.potential_bounds();
    let coupling = max_field.abs() * block.max_dipole() * block.coordination() as f64;
    SpectralRange { e_min: vmin - coupling, e_max: vmax + block.kinetic_max() + coupling }
}

/// Union of the ranges of all blocks of a system.
pub fn estimate_system_range(system: &ChannelSystem, grid: &SpatialGrid, max_field: f64) -> SpectralRange {
    system
        .blocks(grid)
        .iter()
        .map(|b| estimate_spectral_range(b, max_field))
        .reduce(|a, b| a.union(&b))
        .unwrap_or(SpectralRange { e_min: 0.0, e_max: 0.0 })
}

/// `J_0(x) .. J_n(x)` by Miller's downward recurrence, normalized with
/// `J_0 + 2 sum J_2k = 1`.
pub fn bessel_j_sequence(x: f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let x = x.abs();
    let extra = (40.0 * (n.max(x as usize) as f64)).sqrt() as usize + 30;
    let mut start = n.max(x.ceil() as usize) + extra;
    if start % 2 == 1 {
        start += 1;
    }
    let mut j_next = 0.0f64;
    let mut j_cur = 1.0e-300f64;
    let mut norm = 0.0f64;
    for k in (0..start).rev() {
        // j_cur holds J_{k+1}, j_next holds J_{k+2}
        let j_k = 2.0 * (k + 1) as f64 / x * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_k;
        if k <= n {
            out[k] = j_k;
        }
        if k % 2 == 0 {
            norm += if k == 0 { j_k } else { 2.0 * j_k };
        }
        if j_cur.abs() > 1.0e250 {
            let s = 1.0e-250;
            j_cur *= s;
            j_next *= s;
            norm *= s;
            out.iter_mut().for_each(|v| *v *= s);
        }
    }
    out.iter_mut().for_each(|v| *v /= norm);
    out
}

/// Expansion coefficients of `exp(-i H dt)` for a given spectral range.
#[derive(Debug, Clone)]
pub struct ChebychevSeries {
    pub coefficients: Vec<Complex64>,
    pub center: f64,
    pub half_width: f64,
    pub dt: f64,
}

impl ChebychevSeries {
    /// `dt` may be negative for backward steps.
    pub fn new(range: &SpectralRange, dt: f64, tolerance: f64, max_order: usize) -> Result<Self, PropagationError> {
        let r = range.padded();
        let center = 0.5 * (r.e_max + r.e_min);
        let half_width = 0.5 * (r.e_max - r.e_min);
        let arg = half_width * dt.abs();
        let guess = (arg + 15.0 * arg.cbrt() + 40.0) as usize;
        let mut n = guess.min(max_order);
        loop {
            if let Some(coefficients) = Self::truncated(arg, dt, tolerance, n) {
                return Ok(Self { coefficients, center, half_width, dt });
            }
            if n >= max_order {
                break;
            }
            n = max_order;
        }
        Err(PropagationError::SeriesNotConverged { max_order, argument: arg })
    }

    /// Coefficients through the first run of three below `tolerance`,
    /// searching orders `0..=n`.
    fn truncated(arg: f64, dt: f64, tolerance: f64, n: usize) -> Option<Vec<Complex64>> {
        let bessel = bessel_j_sequence(arg, n + 3);
        let minus_i_s = Complex64::new(0.0, -dt.signum());
        let mut coefficients = Vec::new();
        let mut power = Complex64::new(1.0, 0.0);
        let mut below = 0;
        for (k, jk) in bessel.iter().enumerate() {
            let a = if k == 0 { power * *jk } else { power * (2.0 * jk) };
            coefficients.push(a);
            power *= minus_i_s;
            if a.norm() < tolerance && k as f64 > arg {
                below += 1;
                // The three small terms are kept: dropping them biases the
                // norm by about `tolerance` per step.
                if below == 3 {
                    return Some(coefficients);
                }
            } else {
                below = 0;
            }
        }
        None
    }

    pub fn order(&self) -> usize {
        self.coefficients.len()
    }
}

/// Reusable stepping engine for one block.
pub struct Stepper<'a> {
    block: &'a BlockHamiltonian,
    config: PropagatorConfig,
    field_bound: f64,
    forward: ChebychevSeries,
    backward: ChebychevSeries,
    buffers: [Vec<Complex64>; 4],
}

impl<'a> Stepper<'a> {
    /// Prepares series covering all fields with `|field| <= field_bound`.
    pub fn new(block: &'a BlockHamiltonian, config: PropagatorConfig, field_bound: f64) -> Result<Self, PropagationError> {
        config.validate()?;
        let range = estimate_spectral_range(block, field_bound);
        Self::with_range(block, config, field_bound, range)
    }

    pub fn with_range(
        block: &'a BlockHamiltonian,
        config: PropagatorConfig,
        field_bound: f64,
        range: SpectralRange,
    ) -> Result<Self, PropagationError> {
        config.validate()?;
        let forward = ChebychevSeries::new(&range, config.dt, config.tolerance, config.max_order)?;
        let backward = ChebychevSeries::new(&range, -config.dt, config.tolerance, config.max_order)?;
        let d = block.dim();
        let z = || vec![Complex64::new(0.0, 0.0); d];
        Ok(Self { block, config, field_bound: field_bound.abs(), forward, backward, buffers: [z(), z(), z(), z()] })
    }

    pub fn block(&self) -> &BlockHamiltonian {
        self.block
    }

    pub fn order(&self) -> usize {
        self.forward.order()
    }

    /// Widens the spectral range if `field` exceeds the current bound.
    pub fn ensure_field(&mut self, field: f64) -> Result<(), PropagationError> {
        if field.abs() > self.field_bound {
            let bound = 1.5 * field.abs();
            let range = estimate_spectral_range(self.block, bound);
            self.forward = ChebychevSeries::new(&range, self.config.dt, self.config.tolerance, self.config.max_order)?;
            self.backward =
                ChebychevSeries::new(&range, -self.config.dt, self.config.tolerance, self.config.max_order)?;
            self.field_bound = bound;
        }
        Ok(())
    }

    /// Applies one step `exp(-/+ i H(field) dt)` in place.
    pub fn step_in_place(&mut self, psi: &mut [Complex64], field: f64, direction: Direction) -> Result<(), PropagationError> {
        self.ensure_field(field)?;
        let series = match direction {
            Direction::Forward => &self.forward,
            Direction::Backward => &self.backward,
        };
        let [prev, cur, next, acc] = &mut self.buffers;
        let inv = 1.0 / series.half_width;
        let c = series.center;
        let block = self.block;
        let apply_norm = |src: &[Complex64], dst: &mut [Complex64]| {
            block.apply_into(src, field, dst);
            for (d, s) in dst.iter_mut().zip(src) {
                *d = (*d - s * c) * inv;
            }
        };

        let coeffs = &series.coefficients;
        prev.copy_from_slice(psi);
        for (a, p) in acc.iter_mut().zip(prev.iter()) {
            *a = p * coeffs[0];
        }
        if coeffs.len() > 1 {
            apply_norm(prev, cur);
            for (a, p) in acc.iter_mut().zip(cur.iter()) {
                *a += p * coeffs[1];
            }
            for &ck in &coeffs[2..] {
                apply_norm(cur, next);
                for ((n, p), a) in next.iter_mut().zip(prev.iter()).zip(acc.iter_mut()) {
                    *n = *n * 2.0 - p;
                    *a += *n * ck;
                }
                std::mem::swap(prev, cur);
                std::mem::swap(cur, next);
            }
        }
        let phase = Complex64::from_polar(1.0, -c * series.dt);
        for (p, a) in psi.iter_mut().zip(acc.iter()) {
            *p = a * phase;
        }
        Ok(())
    }
}

/// One propagation step of `state` with a constant field.
pub fn step(
    block: &BlockHamiltonian,
    state: &WaveState,
    field_value: f64,
    config: &PropagatorConfig,
    range: &SpectralRange,
    direction: Direction,
) -> Result<WaveState, PropagationError> {
    block.check_state(state).map_err(|_| PropagationError::StateMismatch)?;
    let mut stepper = Stepper::with_range(block, *config, field_value.abs(), *range)?;
    let mut out = state.clone();
    stepper.step_in_place(&mut out.data, field_value, direction)?;
    out.time += match direction {
        Direction::Forward => config.dt,
        Direction::Backward => -config.dt,
    };
    Ok(out)
}

/// Snapshot callback: `(lattice index, state)`, invoked every `stride` steps
/// and at both ends.
pub struct Recorder<'r> {
    pub stride: usize,
    pub callback: Box<dyn FnMut(usize, &WaveState) + 'r>,
}

/// Propagates over the whole lattice. Forward runs `0 -> T` from `state`
/// taken at t = 0; backward runs `T -> 0` from `state` taken at t = T.
pub fn propagate(
    block: &BlockHamiltonian,
    state: &WaveState,
    field: &ControlField,
    direction: Direction,
    config: &PropagatorConfig,
    mut recorder: Option<&mut Recorder<'_>>,
) -> Result<WaveState, PropagationError> {
    block.check_state(state).map_err(|_| PropagationError::StateMismatch)?;
    check_lattice(field, config)?;
    let n = field.n_steps();
    let mut stepper = Stepper::new(block, *config, field.max_abs())?;
    let mut psi = state.clone();
    let norm0 = block.norm_sqr(&psi.data);
    let mut idx = match direction {
        Direction::Forward => 0,
        Direction::Backward => n,
    };
    psi.time = idx as f64 * field.dt;
    let stride = recorder.as_ref().map(|r| r.stride.max(1)).unwrap_or(usize::MAX);
    if let Some(r) = recorder.as_deref_mut() {
        (r.callback)(idx, &psi);
    }
    for s in 0..n {
        let interval = match direction {
            Direction::Forward => idx,
            Direction::Backward => idx - 1,
        };
        stepper.step_in_place(&mut psi.data, field.amplitude[interval], direction)?;
        idx = match direction {
            Direction::Forward => idx + 1,
            Direction::Backward => idx - 1,
        };
        psi.time = idx as f64 * field.dt;
        if s % 64 == 63 || s + 1 == n {
            check_norm(block, &psi.data, norm0, s + 1)?;
        }
        if let Some(r) = recorder.as_deref_mut() {
            if (s + 1) % stride == 0 || s + 1 == n {
                (r.callback)(idx, &psi);
            }
        }
    }
    Ok(psi)
}

pub(crate) fn check_lattice(field: &ControlField, config: &PropagatorConfig) -> Result<(), PropagationError> {
    if (field.dt - config.dt).abs() > 1e-12 * config.dt {
        return Err(PropagationError::LatticeMismatch { field_dt: field.dt, config_dt: config.dt });
    }
    Ok(())
}

pub(crate) fn check_norm(block: &BlockHamiltonian, psi: &[Complex64], norm0: f64, step: usize) -> Result<(), PropagationError> {
    let norm = block.norm_sqr(psi);
    if !norm.is_finite() || (norm - norm0).abs() > UNITARITY_ABORT * norm0.max(1e-300) {
        return Err(PropagationError::UnitarityLoss { step, norm, expected: norm0 });
    }
    Ok(())
}

/// Recorder rows `t_fs, channel, population, phase_rad`; the phase is the
/// argument of the channel's overlap with `reference` (a motional state).
pub fn write_recorder_csv<W: Write>(
    out: &mut W,
    header_comment: &str,
    block: &BlockHamiltonian,
    snapshots: &[WaveState],
    reference: &[Complex64],
) -> std::io::Result<()> {
    writeln!(out, "{header_comment}")?;
    writeln!(out, "t_fs,channel,population,phase_rad")?;
    let pts = block.n_points();
    for s in snapshots {
        let pops = block.populations(&s.data);
        for (c, label) in s.labels.iter().enumerate() {
            let amp: Complex64 = s
                .channel(c)
                .iter()
                .zip(reference.iter().cycle().take(pts))
                .zip(block.weights())
                .map(|((x, r), w)| r.conj() * x * w)
                .sum();
            writeln!(out, "{:.9e},{},{:.12e},{:.12e}", au_to_fs(s.time), label, pops[c], amp.arg())?;
        }
    }
    Ok(())
}

fn label_from_str(s: &str) -> Option<ChannelLabel> {
    let lv = |c: char| match c {
        '0' => Some(Level::Zero),
        '1' => Some(Level::One),
        'a' => Some(Level::Aux),
        _ => None,
    };
    let cs: Vec<char> = s.chars().collect();
    match cs.as_slice() {
        [a] => Some(ChannelLabel::Single(lv(*a)?)),
        [a, b] => Some(ChannelLabel::Pair(lv(*a)?, lv(*b)?)),
        _ => None,
    }
}

/// Text checkpoint of a state: a short header followed by one `re im` line
/// per amplitude, channel-major.
pub fn write_checkpoint<W: Write>(out: &mut W, state: &WaveState) -> std::io::Result<()> {
    let labels: Vec<String> = state.labels.iter().map(|l| l.to_string()).collect();
    writeln!(out, "# n_channels {}", state.n_channels())?;
    writeln!(out, "# n_points {}", state.n_points)?;
    writeln!(out, "# time_tag_fs {:.17e}", au_to_fs(state.time))?;
    writeln!(out, "# labels {}", labels.join(","))?;
    for z in &state.data {
        writeln!(out, "{:.17e} {:.17e}", z.re, z.im)?;
    }
    Ok(())
}

pub fn read_checkpoint<R: BufRead>(input: R) -> Result<WaveState, PropagationError> {
    let bad = |m: &str| PropagationError::Checkpoint(m.to_string());
    let mut n_channels = None;
    let mut n_points = None;
    let mut time = None;
    let mut labels = None;
    let mut data = Vec::new();
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let mut it = rest.split_whitespace();
            match (it.next(), it.next()) {
                (Some("n_channels"), Some(v)) => n_channels = Some(v.parse::<usize>().map_err(|_| bad("n_channels"))?),
                (Some("n_points"), Some(v)) => n_points = Some(v.parse::<usize>().map_err(|_| bad("n_points"))?),
                (Some("time_tag_fs"), Some(v)) => time = Some(fs_to_au(v.parse::<f64>().map_err(|_| bad("time_tag"))?)),
                (Some("labels"), Some(v)) => {
                    labels = Some(
                        v.split(',').map(|s| label_from_str(s).ok_or_else(|| bad("label"))).collect::<Result<Vec<_>, _>>()?,
                    )
                }
                _ => {}
            }
            continue;
        }
        let mut it = line.split_whitespace();
        let re = it.next().and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| bad("amplitude"))?;
        let im = it.next().and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| bad("amplitude"))?;
        data.push(Complex64::new(re, im));
    }
    let n_channels = n_channels.ok_or_else(|| bad("missing n_channels"))?;
    let n_points = n_points.ok_or_else(|| bad("missing n_points"))?;
    let labels = labels.ok_or_else(|| bad("missing labels"))?;
    if labels.len() != n_channels || data.len() != n_channels * n_points {
        return Err(bad("size mismatch"));
    }
    Ok(WaveState { labels, n_points, data, time: time.unwrap_or(0.0) })
}
