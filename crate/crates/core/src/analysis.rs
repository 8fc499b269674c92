//! Gate diagnostics: fidelities, gate phases and the nonlocal phase, local
//! invariants, time-resolved phase traces, pulse spectra and timescale
//! estimates.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use nalgebra::Matrix4;
use num_complex::Complex64;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::grid::{BoundState, SpatialGrid};
use crate::krotov::{ControlField, Objective, Target};
use crate::model::{BlockHamiltonian, ChannelSystem, Mode, ModelError, WaveState, L00, L01, L10, S0};
use crate::units::{au_to_fs, hartree_to_cm, principal_angle, HARTREE_CM};

/// Allowed deviation of a state norm from one.
pub const NORM_TOLERANCE: f64 = 1.0e-6;
/// Overlaps smaller than this leave the phase undefined.
pub const PHASE_MODULUS_FLOOR: f64 = 1.0e-6;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("state '{which}' is not normalized (norm^2 = {norm:.9})")]
    Unnormalized { which: String, norm: f64 },
    #[error("expected {expected} trajectories or final states, got {got}")]
    Count { expected: usize, got: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GatePhases {
    pub phi00: f64,
    pub phi01: f64,
    pub phi10: f64,
    pub phi11: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlocalPhase {
    pub chi: f64,
    pub g1: f64,
    pub g2: f64,
    pub concurrence: f64,
}

/// `chi = phi00 - phi01 - phi10 + phi11` in (-pi, pi] with the derived
/// invariants of a diagonal gate.
pub fn nonlocal_phase(p: &GatePhases) -> NonlocalPhase {
    let chi = principal_angle(p.phi00 - p.phi01 - p.phi10 + p.phi11);
    let c = (0.5 * chi).cos();
    NonlocalPhase { chi, g1: c * c, g2: 2.0 + chi.cos(), concurrence: (0.5 * chi).sin().abs() }
}

pub fn diagonal_gate(p: &GatePhases) -> Matrix4<Complex64> {
    let e = |x: f64| Complex64::from_polar(1.0, x);
    Matrix4::from_diagonal(&nalgebra::Vector4::new(e(p.phi00), e(p.phi01), e(p.phi10), e(p.phi11)))
}

/// Local invariants (G1, G2) of a general two-qubit unitary, via the
/// magic-basis matrix `m = U_B^T U_B`.
pub fn local_invariants(u: &Matrix4<Complex64>) -> (Complex64, Complex64) {
    let z = Complex64::new(0.0, 0.0);
    let o = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let s = 1.0 / 2f64.sqrt();
    let q = Matrix4::new(o, z, z, i, z, i, o, z, z, i, -o, z, o, z, z, -i) * Complex64::new(s, 0.0);
    let ub = q.adjoint() * u * q;
    let m = ub.transpose() * ub;
    let det = u.determinant();
    let tr = m.trace();
    let tr2 = (m * m).trace();
    (tr * tr / (det * 16.0), (tr * tr - tr2) / (det * 4.0))
}

/// `|<00 phi0|psi(T)>|^2` on the |00> channel.
pub fn motional_fidelity(block: &BlockHamiltonian, final_state: &WaveState, reference: &WaveState) -> Result<f64, AnalysisError> {
    block.check_state(final_state)?;
    block.check_state(reference)?;
    for (which, s) in [("final", final_state), ("reference", reference)] {
        let n = block.norm_sqr(&s.data);
        if (n - 1.0).abs() > NORM_TOLERANCE {
            return Err(AnalysisError::Unnormalized { which: which.into(), norm: n });
        }
    }
    let c = block.channel_index(L00).ok_or(ModelError::ChannelMismatch { got: final_state.labels.clone() })?;
    let ov: Complex64 = final_state
        .channel(c)
        .iter()
        .zip(reference.channel(c))
        .zip(block.weights())
        .map(|((a, r), w)| r.conj() * a * w)
        .sum();
    Ok(ov.norm_sqr())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateReport {
    pub mode: Mode,
    pub duration: f64,
    pub c3: f64,
    pub tau: Complex64,
    pub fidelity: f64,
    pub f00: f64,
    pub phases: GatePhases,
    /// Single-atom phase of |0> (relative to its free evolution frame of zero energy).
    pub phi0: f64,
    pub chi: f64,
    pub g1: f64,
    pub g2: f64,
    pub concurrence: f64,
    /// Basis states whose overlap was too small to define a phase.
    pub undefined_phases: Vec<String>,
}

impl GateReport {
    pub fn csv_header() -> &'static str {
        "T_fs,C3_au,F,chi_over_pi,F00,g1,g2,concurrence,iterations,delta_F,status"
    }

    pub fn csv_row(&self, iterations: usize, delta_f: f64, status: &str) -> String {
        format!(
            "{:.9e},{:.9e},{:.12},{:.12},{:.12},{:.12},{:.12},{:.12},{},{:.6e},{}",
            au_to_fs(self.duration),
            self.c3,
            self.fidelity,
            self.chi / PI,
            self.f00,
            self.g1,
            self.g2,
            self.concurrence,
            iterations,
            delta_f,
            status
        )
    }

    pub fn key_value(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("mode", format!("{:?}", self.mode));
        kv("T_fs", format!("{:.9e}", au_to_fs(self.duration)));
        kv("C3_au", format!("{:.9e}", self.c3));
        kv("tau_re", format!("{:.12}", self.tau.re));
        kv("tau_im", format!("{:.12}", self.tau.im));
        kv("F", format!("{:.12}", self.fidelity));
        kv("F00", format!("{:.12}", self.f00));
        kv("phi00", format!("{:.12}", self.phases.phi00));
        kv("phi01", format!("{:.12}", self.phases.phi01));
        kv("phi10", format!("{:.12}", self.phases.phi10));
        kv("phi11", format!("{:.12}", self.phases.phi11));
        kv("phi0", format!("{:.12}", self.phi0));
        kv("chi", format!("{:.12}", self.chi));
        kv("chi_over_pi", format!("{:.12}", self.chi / PI));
        kv("g1", format!("{:.12}", self.g1));
        kv("g2", format!("{:.12}", self.g2));
        kv("concurrence", format!("{:.12}", self.concurrence));
        if !self.undefined_phases.is_empty() {
            kv("undefined_phases", self.undefined_phases.join(","));
        }
        s
    }
}

/// Everything needed to pose and evaluate the phasegate problem for one
/// system, grid and gate duration.
///
/// Phases follow `exp(-i H t)`: the uncoupled |11> picks up
/// `phi_T = -(2 E1 + e0) T`, with `e0` the motional ground energy. Targets are
/// `|00> -> exp(i (chi + phi_T))` and `|01>, |10> -> exp(i phi_T)`; |11> enters
/// the overlap as a fixed unit contribution. In the reduced model the two
/// mixed states are represented by the two-level atom with target
/// `|0> -> exp(-i E1 T)` and weight 2, so both models share `N = 4`.
#[derive(Debug, Clone)]
pub struct GateSetup {
    pub system: ChannelSystem,
    pub grid: SpatialGrid,
    pub ground: BoundState,
    pub duration: f64,
    pub chi_target: f64,
    blocks: Vec<Arc<BlockHamiltonian>>,
}

impl GateSetup {
    pub fn new(system: ChannelSystem, grid: SpatialGrid, duration: f64, chi_target: f64) -> Result<Self, AnalysisError> {
        let ground = system.trap_states(&grid, 1)?.remove(0);
        let blocks = system.blocks(&grid).into_iter().map(Arc::new).collect();
        Ok(Self { system, grid, ground, duration, chi_target, blocks })
    }

    pub fn mode(&self) -> Mode {
        self.system.mode
    }

    pub fn e0(&self) -> f64 {
        self.ground.energy
    }

    /// Motional zero-point phase `-e0 T`.
    pub fn theta(&self) -> f64 {
        -self.e0() * self.duration
    }

    pub fn phi_t(&self) -> f64 {
        -(self.system.e11() + self.e0()) * self.duration
    }

    fn block_for(&self, label: crate::model::ChannelLabel) -> Arc<BlockHamiltonian> {
        self.blocks.iter().find(|b| b.labels.contains(&label)).cloned().expect("label present in system")
    }

    /// Initial basis states in objective order: full `[00, 01, 10]`,
    /// reduced `[00, 0]`.
    pub fn initial_states(&self) -> Vec<(String, Arc<BlockHamiltonian>, WaveState)> {
        let phi0 = self.ground.complex_amplitudes();
        let labels = match self.mode() {
            Mode::Full8 => vec![L00, L01, L10],
            Mode::Reduced4Plus2 => vec![L00, S0],
        };
        labels
            .into_iter()
            .map(|l| {
                let b = self.block_for(l);
                let s = b.basis_state(l, &phi0).expect("basis state");
                (l.to_string(), b, s)
            })
            .collect()
    }

    pub fn objective(&self) -> Objective {
        let phi_t = self.phi_t();
        let e1t = self.system.params.e1 * self.duration;
        let targets = self
            .initial_states()
            .into_iter()
            .map(|(name, block, init)| {
                let (phase, weight) = match name.as_str() {
                    "00" => (self.chi_target + phi_t, 1.0),
                    "0" => (-e1t, 2.0),
                    _ => (phi_t, 1.0),
                };
                let mut target = init.clone();
                target.scale(Complex64::from_polar(1.0, phase));
                Target { name, block, initial: init, target, weight }
            })
            .collect();
        Objective { targets, fixed_tau: Complex64::new(1.0, 0.0), normalization: 4.0 }
    }

    fn overlap_with_initial(&self, idx: usize, state: &WaveState) -> Complex64 {
        let (_, block, init) = &self.initial_states()[idx];
        block.inner(&init.data, &state.data)
    }

    /// Gate phases from final states (in objective order), with names of
    /// states whose overlap is too small to carry a phase.
    pub fn gate_phases(&self, finals: &[WaveState]) -> Result<(GatePhases, f64, Vec<String>), AnalysisError> {
        let expected = self.initial_states().len();
        if finals.len() != expected {
            return Err(AnalysisError::Count { expected, got: finals.len() });
        }
        let mut flags = Vec::new();
        let mut arg = |idx: usize, name: &str| {
            let ov = self.overlap_with_initial(idx, &finals[idx]);
            if ov.norm() < PHASE_MODULUS_FLOOR {
                log::warn!("overlap of |{name}> is {:.3e}; phase undefined", ov.norm());
                flags.push(name.to_string());
            }
            ov.arg()
        };
        let phi11 = principal_angle(self.phi_t());
        let e1t = self.system.params.e1 * self.duration;
        let (phases, phi0) = match self.mode() {
            Mode::Full8 => {
                let phi00 = arg(0, "00");
                let phi01 = arg(1, "01");
                let phi10 = arg(2, "10");
                let phi0 = principal_angle(phi01 + e1t - self.theta());
                (GatePhases { phi00, phi01, phi10, phi11 }, phi0)
            }
            Mode::Reduced4Plus2 => {
                let phi00 = arg(0, "00");
                let phi0 = arg(1, "0");
                let mixed = principal_angle(phi0 - e1t + self.theta());
                (GatePhases { phi00, phi01: mixed, phi10: mixed, phi11 }, phi0)
            }
        };
        Ok((phases, phi0, flags))
    }

    pub fn report(&self, finals: &[WaveState]) -> Result<GateReport, AnalysisError> {
        let objective = self.objective();
        let tau = objective.tau(finals);
        let (phases, phi0, undefined_phases) = self.gate_phases(finals)?;
        let (_, block, init) = &self.initial_states()[0];
        let f00 = motional_fidelity(block, &finals[0], init)?;
        let nl = nonlocal_phase(&phases);
        Ok(GateReport {
            mode: self.mode(),
            duration: self.duration,
            c3: self.system.params.c3,
            tau,
            fidelity: tau.re / objective.normalization,
            f00,
            phases,
            phi0,
            chi: nl.chi,
            g1: nl.g1,
            g2: nl.g2,
            concurrence: nl.concurrence,
            undefined_phases,
        })
    }

    /// Complex traces `tau_ij(t)` and `tau_j(t)` from recorded trajectories
    /// (objective order, equal snapshot times).
    pub fn phase_trace(&self, trajectories: &[Vec<WaveState>]) -> Result<PhaseTrace, AnalysisError> {
        let expected = self.initial_states().len();
        if trajectories.len() != expected {
            return Err(AnalysisError::Count { expected, got: trajectories.len() });
        }
        let e1 = self.system.params.e1;
        let e0 = self.e0();
        let len = trajectories[0].len();
        let mut out = PhaseTrace { times: Vec::with_capacity(len), tau_ij: Vec::new(), tau_j: Vec::new() };
        for k in 0..len {
            let t = trajectories[0][k].time;
            let t00 = self.overlap_with_initial(0, &trajectories[0][k]);
            let t11 = Complex64::from_polar(1.0, -(2.0 * e1 + e0) * t);
            let t1 = Complex64::from_polar(1.0, -e1 * t);
            let (t01, t10, t0) = match self.mode() {
                Mode::Full8 => {
                    let t01 = self.overlap_with_initial(1, &trajectories[1][k]);
                    let t10 = self.overlap_with_initial(2, &trajectories[2][k]);
                    (t01, t10, t01 * Complex64::from_polar(1.0, (e1 + e0) * t))
                }
                Mode::Reduced4Plus2 => {
                    let t0 = self.overlap_with_initial(1, &trajectories[1][k]);
                    let m = t0 * Complex64::from_polar(1.0, -(e1 + e0) * t);
                    (m, m, t0)
                }
            };
            out.times.push(t);
            out.tau_ij.push([t00, t01, t10, t11]);
            out.tau_j.push([t0, t1]);
        }
        Ok(out)
    }

    /// Populations CSV `t_fs, pop_00, pop_0a, pop_a0, pop_aa, pop_01, pop_a1, norm`.
    /// The last two populations come from the |01> trajectory (the two-level
    /// atom in the reduced model); `norm` is the mean norm of both trajectories.
    pub fn write_populations_csv<W: Write>(
        &self,
        out: &mut W,
        header_comment: &str,
        trajectories: &[Vec<WaveState>],
    ) -> std::io::Result<()> {
        writeln!(out, "{header_comment}")?;
        writeln!(out, "t_fs,pop_00,pop_0a,pop_a0,pop_aa,pop_01,pop_a1,norm")?;
        let states = self.initial_states();
        let (ba, bb) = (&states[0].1, &states[1].1);
        for (sa, sb) in trajectories[0].iter().zip(&trajectories[1]) {
            let pa = ba.populations(&sa.data);
            let pb = bb.populations(&sb.data);
            let norm = 0.5 * (pa.iter().sum::<f64>() + pb.iter().sum::<f64>());
            write!(out, "{:.9e}", au_to_fs(sa.time))?;
            for p in pa.iter().chain(&pb) {
                write!(out, ",{p:.12e}")?;
            }
            writeln!(out, ",{norm:.15e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrace {
    pub times: Vec<f64>,
    /// `[tau00, tau01, tau10, tau11]`.
    pub tau_ij: Vec<[Complex64; 4]>,
    /// `[tau0, tau1]`.
    pub tau_j: Vec<[Complex64; 2]>,
}

impl PhaseTrace {
    pub fn write_csv<W: Write>(&self, out: &mut W, header_comment: &str) -> std::io::Result<()> {
        writeln!(out, "{header_comment}")?;
        writeln!(
            out,
            "t_fs,re_tau00,im_tau00,re_tau01,im_tau01,re_tau10,im_tau10,re_tau11,im_tau11,re_tau0,im_tau0,re_tau1,im_tau1"
        )?;
        for ((t, ij), j) in self.times.iter().zip(&self.tau_ij).zip(&self.tau_j) {
            write!(out, "{:.9e}", au_to_fs(*t))?;
            for z in ij.iter().chain(j) {
                write!(out, ",{:.12e},{:.12e}", z.re, z.im)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// `|FT(eps)|^2` on the non-negative angular frequencies `2 pi k / T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Angular frequencies in hartree.
    pub omega: Vec<f64>,
    pub power: Vec<f64>,
}

impl Spectrum {
    pub fn peak(&self) -> (f64, f64) {
        let (i, p) = self
            .power
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bp), (i, &p)| if p > bp { (i, p) } else { (bi, bp) });
        (self.omega[i], p)
    }

    pub fn bin_width(&self) -> f64 {
        if self.omega.len() > 1 {
            self.omega[1] - self.omega[0]
        } else {
            0.0
        }
    }

    /// Smallest frequency window around the peak holding `fraction` of the power.
    pub fn support(&self, fraction: f64) -> (f64, f64) {
        let total: f64 = self.power.iter().sum();
        let (peak, _) = self.peak();
        let mut i = self.omega.iter().position(|&w| w == peak).unwrap_or(0);
        let mut j = i;
        let mut acc = self.power[i];
        while acc < fraction * total {
            let left = if i > 0 { self.power[i - 1] } else { -1.0 };
            let right = if j + 1 < self.power.len() { self.power[j + 1] } else { -1.0 };
            if left < 0.0 && right < 0.0 {
                break;
            }
            if left >= right {
                i -= 1;
                acc += left;
            } else {
                j += 1;
                acc += right;
            }
        }
        (self.omega[i], self.omega[j])
    }

    pub fn write_csv<W: Write>(&self, out: &mut W, header_comment: &str) -> std::io::Result<()> {
        writeln!(out, "{header_comment}")?;
        writeln!(out, "freq_cm-1,|FT(eps)|^2")?;
        for (w, p) in self.omega.iter().zip(&self.power) {
            writeln!(out, "{:.9e},{:.9e}", w * HARTREE_CM, p)?;
        }
        Ok(())
    }
}

pub fn pulse_spectrum(field: &ControlField) -> Spectrum {
    let n = field.n_steps();
    let mut data: Vec<Complex64> = field.amplitude.iter().map(|&a| Complex64::new(a, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut data);
    let dw = 2.0 * PI / field.duration();
    let half = n / 2;
    let omega = (0..=half).map(|k| k as f64 * dw).collect();
    let power = data[..=half].iter().map(|z| (z * field.dt).norm_sqr()).collect();
    Spectrum { omega, power }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedLimitEstimates {
    /// `C3 / d^3`, depth of the excited channel below its asymptote at d.
    pub interaction_energy: f64,
    pub t_int_rad: f64,
    pub t_int_pi: f64,
    /// `1 / omega` from the harmonic gap.
    pub t_v: f64,
    /// `1 / gap` with the mean gap of the numerical ground state to its neighbor.
    pub t_v_numeric: Option<f64>,
}

impl SpeedLimitEstimates {
    pub fn interaction_is_zero(&self) -> bool {
        self.t_int_rad.is_infinite()
    }

    pub fn key_value(&self) -> String {
        format!(
            "interaction_energy_cm = {:.9}\nt_int_rad_fs = {:.9e}\nt_int_pi_fs = {:.9e}\nt_v_fs = {:.9e}\n{}",
            hartree_to_cm(self.interaction_energy),
            au_to_fs(self.t_int_rad),
            au_to_fs(self.t_int_pi),
            au_to_fs(self.t_v),
            match self.t_v_numeric {
                Some(t) => format!("t_v_numeric_fs = {:.9e}\n", au_to_fs(t)),
                None => String::new(),
            }
        )
    }
}

/// Interaction and vibrational timescales of the register.
pub fn speed_limit_estimates(system: &ChannelSystem, grid: Option<&SpatialGrid>) -> Result<SpeedLimitEstimates, AnalysisError> {
    let p = &system.params;
    let v = p.c3 / p.distance.powi(3);
    let t_int_rad = if v > 0.0 { 1.0 / v } else { f64::INFINITY };
    if v == 0.0 {
        log::warn!("zero interaction energy: interaction time is infinite");
    }
    let t_v_numeric = match grid {
        Some(g) => {
            let st = system.trap_states(g, 2)?;
            Some(1.0 / (st[1].energy - st[0].energy))
        }
        None => None,
    };
    Ok(SpeedLimitEstimates { interaction_energy: v, t_int_rad, t_int_pi: PI * t_int_rad, t_v: 1.0 / p.omega, t_v_numeric })
}
