//! Unit conversions. Everything inside the engine is in atomic units
//! (hbar = m_e = e = a0 = 1); configs and CSV outputs use lab units.

use std::f64::consts::PI;

/// Hartree in wavenumbers (cm^-1).
pub const HARTREE_CM: f64 = 219_474.631_363_2;
/// Bohr radius in nm.
pub const BOHR_NM: f64 = 0.052_917_721_090_3;
/// Atomic unit of time in fs.
pub const AU_TIME_FS: f64 = 0.024_188_843_265_857;
/// Atomic mass unit in electron masses.
pub const AMU_ME: f64 = 1_822.888_486_209;
/// Atomic unit of electric field in V/m.
pub const AU_FIELD_V_PER_M: f64 = 5.142_206_747_63e11;

/// Calcium-40 atomic mass in amu.
pub const CALCIUM_MASS_AMU: f64 = 40.078;

pub fn cm_to_hartree(e: f64) -> f64 {
    e / HARTREE_CM
}

pub fn hartree_to_cm(e: f64) -> f64 {
    e * HARTREE_CM
}

pub fn nm_to_bohr(x: f64) -> f64 {
    x / BOHR_NM
}

pub fn fs_to_au(t: f64) -> f64 {
    t / AU_TIME_FS
}

pub fn au_to_fs(t: f64) -> f64 {
    t * AU_TIME_FS
}

pub fn ps_to_au(t: f64) -> f64 {
    fs_to_au(t * 1.0e3)
}

pub fn amu_to_au(m: f64) -> f64 {
    m * AMU_ME
}

/// Linear frequency in MHz to angular frequency in atomic units.
pub fn mhz_to_angular_au(f: f64) -> f64 {
    2.0 * PI * f * 1.0e6 * AU_TIME_FS * 1.0e-15
}

/// Linear frequency in kHz to angular frequency in atomic units.
pub fn khz_to_angular_au(f: f64) -> f64 {
    mhz_to_angular_au(f * 1.0e-3)
}

pub fn field_au_to_v_per_m(e: f64) -> f64 {
    e * AU_FIELD_V_PER_M
}

/// Reduces an angle to the principal interval (-pi, pi].
pub fn principal_angle(phi: f64) -> f64 {
    let mut x = phi.rem_euclid(2.0 * PI);
    if x > PI {
        x -= 2.0 * PI;
    }
    x
}
