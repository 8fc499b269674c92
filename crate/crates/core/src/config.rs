//! TOML experiment files.
//!
//! Every dimensioned key carries its unit in the name (`trap.omega_mhz`,
//! `grid.r_max_a0`, `time.duration_ps`, ...). Where a quantity may be given in
//! several units exactly one of the alternatives must be present. Values are
//! converted to atomic units on load.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::grid::{GridSpec, Mapping};
use crate::krotov::{GuessKind, KrotovConfig};
use crate::model::{Mode, SystemParams};
use crate::propagator::PropagatorConfig;
use crate::units;

/// Toy-regime feasibility guard: at least this many steps per carrier period.
pub const TOY_MIN_STEPS_PER_PERIOD: f64 = 20.0;
/// Toy-regime feasibility guard: at most this many time steps per run.
pub const TOY_MAX_STEPS: f64 = 1.0e6;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Invalid(String),
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawFile {
    atoms: RawAtoms,
    trap: RawTrap,
    #[serde(default)]
    interaction: RawInteraction,
    grid: RawGrid,
    time: RawTime,
    #[serde(default)]
    krotov: RawKrotov,
    #[serde(default)]
    propagator: RawPropagator,
    #[serde(default)]
    run: RawRun,
    sweep: Option<RawSweep>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawAtoms {
    e1_cm: Option<f64>,
    e1_au: Option<f64>,
    ea_cm: Option<f64>,
    ea_au: Option<f64>,
    /// Single-atom mass; the relative coordinate uses half of it.
    mass_amu: Option<f64>,
    mass_au: Option<f64>,
    mu0_au: Option<f64>,
    mu0_debye: Option<f64>,
    detuning_cm: Option<f64>,
    detuning_au: Option<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawTrap {
    omega_mhz: Option<f64>,
    omega_khz: Option<f64>,
    omega_au: Option<f64>,
    distance_nm: Option<f64>,
    distance_a0: Option<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawInteraction {
    c3_au: Option<f64>,
    c3_nm3_cm: Option<f64>,
    /// `C3 / d^3` in units of the trap quantum.
    depth_omega: Option<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    r_min_a0: Option<f64>,
    r_max_a0: Option<f64>,
    n_points: Option<usize>,
    mapping: Option<String>,
    beta: Option<f64>,
    e_max_hartree: Option<f64>,
    e_max_cm: Option<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawTime {
    duration_fs: Option<f64>,
    duration_ps: Option<f64>,
    duration_au: Option<f64>,
    /// In units of the trap time `1/omega`.
    duration_tv: Option<f64>,
    dt_fs: Option<f64>,
    dt_au: Option<f64>,
    steps_per_period: Option<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawKrotov {
    alpha: Option<f64>,
    alpha_fraction: Option<f64>,
    max_iterations: Option<usize>,
    convergence_delta_f: Option<f64>,
    record_stride: Option<usize>,
    memory_budget_mb: Option<f64>,
    chi_target_over_pi: Option<f64>,
    guess: Option<String>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawPropagator {
    tolerance: Option<f64>,
    max_order: Option<usize>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawRun {
    mode: Option<String>,
    regime: Option<String>,
    seed: Option<u64>,
    output_dir: Option<String>,
    workers: Option<usize>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    gate_time_fs: Option<Vec<f64>>,
    gate_time_ps: Option<Vec<f64>>,
    gate_time_au: Option<Vec<f64>>,
    gate_time_tv: Option<Vec<f64>>,
    c3_au: Option<Vec<f64>>,
    c3_nm3_cm: Option<Vec<f64>>,
    c3_depth_omega: Option<Vec<f64>>,
}

/// Picks the single present alternative and converts it.
fn one_of<T: Clone, U>(section: &str, alts: &[(&str, &Option<T>, &dyn Fn(T) -> U)]) -> Result<Option<U>, ConfigError> {
    let present: Vec<_> = alts.iter().filter(|(_, v, _)| v.is_some()).collect();
    match present.len() {
        0 => Ok(None),
        1 => {
            let (_, v, f) = present[0];
            Ok(Some(f((*v).clone().unwrap())))
        }
        _ => {
            let names: Vec<_> = present.iter().map(|(n, _, _)| format!("{section}.{n}")).collect();
            invalid(format!("conflicting keys {}", names.join(", ")))
        }
    }
}

fn required<U>(v: Option<U>, what: &str) -> Result<U, ConfigError> {
    match v {
        Some(v) => Ok(v),
        None => invalid(format!("missing {what}")),
    }
}

fn id(x: f64) -> f64 {
    x
}

const DEBYE_AU: f64 = 0.393_430_2;
const NM3_CM_AU: f64 = 1.0 / (units::HARTREE_CM * units::BOHR_NM * units::BOHR_NM * units::BOHR_NM);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Toy,
    Physical,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepVariable {
    /// Durations in a.u.
    GateTime(Vec<f64>),
    /// `C3` values in a.u.
    C3(Vec<f64>),
}

impl SweepVariable {
    pub fn values(&self) -> &[f64] {
        match self {
            SweepVariable::GateTime(v) | SweepVariable::C3(v) => v,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepVariable::GateTime(_) => "gate_time",
            SweepVariable::C3(_) => "c3",
        }
    }
}

/// A fully resolved experiment in atomic units.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub params: SystemParams,
    pub grid: GridSpec,
    pub duration: f64,
    pub dt: f64,
    pub krotov: KrotovConfig,
    pub propagator: PropagatorConfig,
    pub guess: GuessKind,
    pub chi_target: f64,
    pub mode: Mode,
    pub regime: Regime,
    pub sweep: Option<SweepVariable>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub workers: usize,
    /// SHA-256 of the config text.
    pub hash: String,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let raw: RawFile = toml::from_str(text)?;
        let hash = hex::encode(Sha256::digest(text.as_bytes()));
        resolve(raw, hash)
    }

    /// Carrier angular frequency of the guess pulse.
    pub fn carrier(&self) -> f64 {
        self.params.e_a + self.params.detuning
    }

    pub fn n_steps(&self) -> usize {
        crate::krotov::lattice_steps(self.duration, self.dt)
    }

    /// Provenance comment placed at the top of every CSV.
    pub fn hash_comment(&self) -> String {
        format!("# config-hash: {}", self.hash)
    }

    /// Copy of this experiment at one sweep value.
    pub fn at_sweep_value(&self, value: f64) -> Result<Self, ConfigError> {
        let mut c = self.clone();
        match &self.sweep {
            Some(SweepVariable::GateTime(_)) => c.duration = value,
            Some(SweepVariable::C3(_)) => c.params.c3 = value,
            None => return invalid("no sweep defined"),
        }
        c.sweep = None;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.params;
        if !(p.e_a > p.e1 && p.e1 > 0.0) {
            return invalid("need 0 < atoms.e1 < atoms.ea");
        }
        if !(p.omega > 0.0 && p.distance > 0.0 && p.mass > 0.0 && p.mu0 > 0.0) {
            return invalid("trap frequency, distance, mass and mu0 must be positive");
        }
        if !(p.c3 >= 0.0) {
            return invalid("C3 must be non-negative");
        }
        self.grid.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.grid.r_min < p.distance && p.distance < self.grid.r_max) {
            return invalid("trap distance must lie inside the grid");
        }
        if !(self.duration > 0.0 && self.dt > 0.0 && self.dt < self.duration) {
            return invalid("need 0 < time.dt < time.duration");
        }
        if !(self.carrier() > 0.0) {
            return invalid("carrier frequency must be positive");
        }
        self.propagator.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let k = &self.krotov;
        if let Some(a) = k.alpha {
            if !(a > 0.0) {
                return invalid("krotov.alpha must be positive");
            }
        }
        if !(k.auto_alpha_fraction > 0.0) || !(k.convergence_delta_f >= 0.0) {
            return invalid("krotov.alpha_fraction must be positive and convergence_delta_f non-negative");
        }
        if self.regime == Regime::Toy {
            let durations: Vec<f64> = match &self.sweep {
                Some(SweepVariable::GateTime(v)) => v.clone(),
                _ => vec![self.duration],
            };
            let period = 2.0 * std::f64::consts::PI / self.carrier();
            if period < TOY_MIN_STEPS_PER_PERIOD * self.dt {
                return invalid(format!(
                    "toy regime needs at least {TOY_MIN_STEPS_PER_PERIOD} steps per carrier period, got {:.2}",
                    period / self.dt
                ));
            }
            for t in durations {
                if t > TOY_MAX_STEPS * self.dt {
                    return invalid(format!("toy regime allows at most {TOY_MAX_STEPS:e} steps, T/dt = {:.3e}", t / self.dt));
                }
            }
        }
        if let Some(s) = &self.sweep {
            let v = s.values();
            if v.is_empty() {
                return invalid("sweep has no values");
            }
            if v.windows(2).any(|w| !(w[1] > w[0])) {
                return invalid("sweep values must be strictly increasing");
            }
            if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || (matches!(s, SweepVariable::GateTime(_)) && v[0] <= 0.0) {
                return invalid("sweep values out of range");
            }
        }
        Ok(())
    }
}

fn resolve(raw: RawFile, hash: String) -> Result<ExperimentConfig, ConfigError> {
    let a = &raw.atoms;
    let e1 = required(one_of("atoms", &[("e1_cm", &a.e1_cm, &units::cm_to_hartree), ("e1_au", &a.e1_au, &id)])?, "atoms.e1_*")?;
    let e_a = required(one_of("atoms", &[("ea_cm", &a.ea_cm, &units::cm_to_hartree), ("ea_au", &a.ea_au, &id)])?, "atoms.ea_*")?;
    let atom_mass =
        required(one_of("atoms", &[("mass_amu", &a.mass_amu, &units::amu_to_au), ("mass_au", &a.mass_au, &id)])?, "atoms.mass_*")?;
    let mu0 = one_of("atoms", &[("mu0_au", &a.mu0_au, &id), ("mu0_debye", &a.mu0_debye, &|x: f64| x * DEBYE_AU)])?.unwrap_or(1.0);
    let detuning =
        one_of("atoms", &[("detuning_cm", &a.detuning_cm, &units::cm_to_hartree), ("detuning_au", &a.detuning_au, &id)])?
            .unwrap_or(0.0);

    let t = &raw.trap;
    let omega = required(
        one_of(
            "trap",
            &[
                ("omega_mhz", &t.omega_mhz, &units::mhz_to_angular_au),
                ("omega_khz", &t.omega_khz, &units::khz_to_angular_au),
                ("omega_au", &t.omega_au, &id),
            ],
        )?,
        "trap.omega_*",
    )?;
    let distance =
        required(one_of("trap", &[("distance_nm", &t.distance_nm, &units::nm_to_bohr), ("distance_a0", &t.distance_a0, &id)])?, "trap.distance_*")?;

    let d3 = distance.powi(3);
    let i = &raw.interaction;
    let c3 = one_of(
        "interaction",
        &[
            ("c3_au", &i.c3_au, &id),
            ("c3_nm3_cm", &i.c3_nm3_cm, &|x: f64| x * NM3_CM_AU),
            ("depth_omega", &i.depth_omega, &|x: f64| x * omega * d3),
        ],
    )?
    .unwrap_or(0.0);

    let mass = 0.5 * atom_mass;
    let params = SystemParams { e1, e_a, omega, distance, c3, mu0, mass, detuning };

    let g = &raw.grid;
    let mapping = match g.mapping.as_deref().unwrap_or("uniform") {
        "uniform" => {
            if g.beta.is_some() || g.e_max_hartree.is_some() || g.e_max_cm.is_some() {
                return invalid("grid.beta and grid.e_max_* only apply to mapping = \"mapped\"");
            }
            Mapping::Uniform
        }
        "mapped" => {
            let e_max = required(
                one_of("grid", &[("e_max_hartree", &g.e_max_hartree, &id), ("e_max_cm", &g.e_max_cm, &units::cm_to_hartree)])?,
                "grid.e_max_*",
            )?;
            Mapping::Mapped { beta: required(g.beta, "grid.beta")?, e_max }
        }
        other => return invalid(format!("unknown grid.mapping {other:?}")),
    };
    let grid = GridSpec {
        r_min: required(g.r_min_a0, "grid.r_min_a0")?,
        r_max: required(g.r_max_a0, "grid.r_max_a0")?,
        n_points: required(g.n_points, "grid.n_points")?,
        mapping,
        mass,
    };

    let tm = &raw.time;
    let duration = required(
        one_of(
            "time",
            &[
                ("duration_fs", &tm.duration_fs, &units::fs_to_au),
                ("duration_ps", &tm.duration_ps, &units::ps_to_au),
                ("duration_au", &tm.duration_au, &id),
                ("duration_tv", &tm.duration_tv, &|x: f64| x / omega),
            ],
        )?,
        "time.duration_*",
    )?;
    let carrier = e_a + detuning;
    let dt = required(
        one_of(
            "time",
            &[
                ("dt_fs", &tm.dt_fs, &units::fs_to_au),
                ("dt_au", &tm.dt_au, &id),
                ("steps_per_period", &tm.steps_per_period, &|x: f64| 2.0 * std::f64::consts::PI / carrier / x),
            ],
        )?,
        "time.dt_* or time.steps_per_period",
    )?;

    let k = &raw.krotov;
    let defaults = KrotovConfig::default();
    let krotov = KrotovConfig {
        alpha: k.alpha,
        auto_alpha_fraction: k.alpha_fraction.unwrap_or(defaults.auto_alpha_fraction),
        max_iterations: k.max_iterations.unwrap_or(defaults.max_iterations),
        convergence_delta_f: k.convergence_delta_f.unwrap_or(defaults.convergence_delta_f),
        record_stride: k.record_stride.unwrap_or(defaults.record_stride),
        memory_budget_bytes: k.memory_budget_mb.map(|mb| (mb * 1024.0 * 1024.0) as usize).unwrap_or(defaults.memory_budget_bytes),
    };
    let guess = match k.guess.as_deref().unwrap_or("gaussian_2pi") {
        "gaussian_2pi" => GuessKind::Gaussian2Pi,
        other => return invalid(format!("unknown krotov.guess {other:?}")),
    };
    let chi_target = k.chi_target_over_pi.unwrap_or(1.0) * std::f64::consts::PI;

    let mut propagator = PropagatorConfig::new(dt);
    if let Some(tol) = raw.propagator.tolerance {
        propagator.tolerance = tol;
    }
    if let Some(m) = raw.propagator.max_order {
        propagator.max_order = m;
    }

    let r = &raw.run;
    let mode = match r.mode.as_deref().unwrap_or("reduced") {
        "reduced" => Mode::Reduced4Plus2,
        "full" => Mode::Full8,
        other => return invalid(format!("unknown run.mode {other:?} (expected \"reduced\" or \"full\")")),
    };
    let regime = match r.regime.as_deref().unwrap_or("toy") {
        "toy" => Regime::Toy,
        "physical" => Regime::Physical,
        other => return invalid(format!("unknown run.regime {other:?} (expected \"toy\" or \"physical\")")),
    };

    let sweep = match &raw.sweep {
        None => None,
        Some(s) => {
            let gt = one_of::<Vec<f64>, Vec<f64>>(
                "sweep",
                &[
                    ("gate_time_fs", &s.gate_time_fs, &|v: Vec<f64>| v.into_iter().map(units::fs_to_au).collect()),
                    ("gate_time_ps", &s.gate_time_ps, &|v: Vec<f64>| v.into_iter().map(units::ps_to_au).collect()),
                    ("gate_time_au", &s.gate_time_au, &|v| v),
                    ("gate_time_tv", &s.gate_time_tv, &|v: Vec<f64>| v.into_iter().map(|x| x / omega).collect()),
                ],
            )?;
            let c3s = one_of::<Vec<f64>, Vec<f64>>(
                "sweep",
                &[
                    ("c3_au", &s.c3_au, &|v| v),
                    ("c3_nm3_cm", &s.c3_nm3_cm, &|v: Vec<f64>| v.into_iter().map(|x| x * NM3_CM_AU).collect()),
                    ("c3_depth_omega", &s.c3_depth_omega, &|v: Vec<f64>| v.into_iter().map(|x| x * omega * d3).collect()),
                ],
            )?;
            match (gt, c3s) {
                (Some(v), None) => Some(SweepVariable::GateTime(v)),
                (None, Some(v)) => Some(SweepVariable::C3(v)),
                (None, None) => return invalid("[sweep] needs one gate_time_* or c3_* list"),
                (Some(_), Some(_)) => return invalid("[sweep] may vary only one quantity"),
            }
        }
    };

    let cfg = ExperimentConfig {
        params,
        grid,
        duration,
        dt,
        krotov,
        propagator,
        guess,
        chi_target,
        mode,
        regime,
        sweep,
        output_dir: PathBuf::from(r.output_dir.clone().unwrap_or_else(|| "out".into())),
        seed: r.seed.unwrap_or(0),
        workers: r.workers.unwrap_or(0),
        hash,
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = r#"
[atoms]
e1_au = 0.643
ea_au = 1.0
mass_au = 1000.0
mu0_au = 1.0

[trap]
omega_au = 1.0e-3
distance_a0 = 8.0

[interaction]
depth_omega = 100.0

[grid]
r_min_a0 = 2.0
r_max_a0 = 14.0
n_points = 64

[time]
duration_tv = 0.1
steps_per_period = 20

[run]
mode = "reduced"
"#;

    #[test]
    fn toy_config_resolves() {
        let c = ExperimentConfig::from_toml(TOY).unwrap();
        assert_eq!(c.params.mass, 500.0);
        assert!((c.params.c3 - 100.0 * 1e-3 * 512.0).abs() < 1e-12);
        assert!((c.duration - 100.0).abs() < 1e-12);
        assert!((c.dt - 2.0 * std::f64::consts::PI / 20.0).abs() < 1e-15);
        assert_eq!(c.mode, Mode::Reduced4Plus2);
        assert_eq!(c.regime, Regime::Toy);
        assert_eq!(c.hash.len(), 64);
        assert!((c.chi_target - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn physical_units_convert() {
        let text = TOY
            .replace("e1_au = 0.643", "e1_cm = 15210")
            .replace("ea_au = 1.0", "ea_cm = 23652")
            .replace("mass_au = 1000.0", "mass_amu = 40.078")
            .replace("omega_au = 1.0e-3", "omega_mhz = 400")
            .replace("distance_a0 = 8.0", "distance_nm = 5")
            .replace("depth_omega = 100.0", "c3_au = 16.04")
            .replace("r_min_a0 = 2.0", "r_min_a0 = 5.0")
            .replace("r_max_a0 = 14.0", "r_max_a0 = 300.0")
            .replace("duration_tv = 0.1", "duration_ps = 5")
            .replace("steps_per_period = 20", "dt_fs = 0.025")
            .replace("mode = \"reduced\"", "mode = \"reduced\"\nregime = \"physical\"");
        let c = ExperimentConfig::from_toml(&text).unwrap();
        assert!((units::hartree_to_cm(c.params.e_a) - 23652.0).abs() < 1e-9);
        assert!((c.params.distance - 94.486).abs() < 1e-2);
        assert!((c.duration - 206_707.0).abs() < 10.0);
        assert!((c.params.mass - 0.5 * 40.078 * units::AMU_ME).abs() < 1e-9);
    }

    #[test]
    fn c3_units_agree() {
        // 0.5217e3 nm^3 cm^-1 is about 16.04 a.u.
        assert!((521.7 * NM3_CM_AU - 16.04).abs() < 0.01);
    }

    #[test]
    fn conflicting_alternatives_rejected() {
        let text = TOY.replace("mass_au = 1000.0", "mass_au = 1000.0\nmass_amu = 40.0");
        let err = ExperimentConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("atoms.mass_au") && err.contains("atoms.mass_amu"), "{err}");
    }

    #[test]
    fn unknown_key_rejected() {
        let text = TOY.replace("n_points = 64", "n_points = 64\nspacing = 1");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn missing_quantity_rejected() {
        let text = TOY.replace("ea_au = 1.0\n", "");
        assert!(ExperimentConfig::from_toml(&text).unwrap_err().to_string().contains("atoms.ea"));
    }

    #[test]
    fn toy_guard_enforced() {
        let coarse = TOY.replace("steps_per_period = 20", "steps_per_period = 10");
        assert!(ExperimentConfig::from_toml(&coarse).unwrap_err().to_string().contains("steps per carrier period"));
        let long = TOY.replace("duration_tv = 0.1", "duration_tv = 5000");
        assert!(ExperimentConfig::from_toml(&long).unwrap_err().to_string().contains("at most"));
        let phys = long.replace("mode = \"reduced\"", "regime = \"physical\"");
        assert!(ExperimentConfig::from_toml(&phys).is_ok());
    }

    #[test]
    fn sweep_must_increase() {
        let ok = format!("{TOY}\n[sweep]\ngate_time_tv = [0.05, 0.2, 1.0]\n");
        let c = ExperimentConfig::from_toml(&ok).unwrap();
        assert_eq!(c.sweep.as_ref().unwrap().name(), "gate_time");
        let at = c.at_sweep_value(c.sweep.as_ref().unwrap().values()[1]).unwrap();
        assert!((at.duration - 200.0).abs() < 1e-9);
        let bad = format!("{TOY}\n[sweep]\nc3_depth_omega = [3.0, 3.0, 10.0]\n");
        assert!(ExperimentConfig::from_toml(&bad).unwrap_err().to_string().contains("strictly increasing"));
        let both = format!("{TOY}\n[sweep]\nc3_au = [1.0]\ngate_time_au = [10.0]\n");
        assert!(ExperimentConfig::from_toml(&both).is_err());
    }

    #[test]
    fn hash_tracks_text() {
        let a = ExperimentConfig::from_toml(TOY).unwrap();
        let b = ExperimentConfig::from_toml(&format!("{TOY}\n")).unwrap();
        assert_ne!(a.hash, b.hash);
        assert_eq!(a.hash, ExperimentConfig::from_toml(TOY).unwrap().hash);
    }
}
