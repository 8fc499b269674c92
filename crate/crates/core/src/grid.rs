//! Fourier grid for the interatomic coordinate R, with optional mapping to a
//! variable step size, spectral kinetic energy and a dense bound-state solver.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

/// Floor under the local kinetic energy of the mapping (hartree).
pub const MAPPING_ENERGY_FLOOR: f64 = 1.0e-12;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid grid specification: {0}")]
    InvalidSpec(String),
    #[error("mapped grid needs {required:.1} points but only {available} are available")]
    UnderResolved { required: f64, available: usize },
    #[error("amplitude array has length {got}, grid has {expected} points")]
    LengthMismatch { expected: usize, got: usize },
    #[error("requested {count} bound states, at most {max} are resolvable on this grid")]
    TooManyStates { count: usize, max: usize },
    #[error("dense eigensolver did not converge")]
    NonConvergence,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mapping {
    Uniform,
    /// Local step `beta * pi / sqrt(2 m (e_max - V(r)))`.
    Mapped { beta: f64, e_max: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub r_min: f64,
    pub r_max: f64,
    pub n_points: usize,
    pub mapping: Mapping,
    /// Mass entering the kinetic energy (the reduced mass for R).
    pub mass: f64,
}

impl GridSpec {
    pub fn uniform(r_min: f64, r_max: f64, n_points: usize, mass: f64) -> Self {
        Self { r_min, r_max, n_points, mapping: Mapping::Uniform, mass }
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if !(self.r_min < self.r_max) || !self.r_min.is_finite() || !self.r_max.is_finite() {
            return Err(GridError::InvalidSpec(format!(
                "need r_min < r_max, got [{}, {}]",
                self.r_min, self.r_max
            )));
        }
        if self.n_points < 8 {
            return Err(GridError::InvalidSpec(format!(
                "need at least 8 grid points, got {}",
                self.n_points
            )));
        }
        if !(self.mass > 0.0) {
            return Err(GridError::InvalidSpec("mass must be positive".into()));
        }
        if let Mapping::Mapped { beta, e_max } = self.mapping {
            if !(beta > 0.0 && beta <= 1.0) {
                return Err(GridError::InvalidSpec(format!("beta must lie in (0, 1], got {beta}")));
            }
            if !e_max.is_finite() {
                return Err(GridError::InvalidSpec("e_max must be finite".into()));
            }
        }
        Ok(())
    }
}

/// Discretized R axis.
///
/// Internally the grid is the image of a uniform coordinate `x` spanning the
/// same interval with step `dx = (r_max - r_min) / n`. `jacobian[k]` is
/// `dr/dx` at node `k` (identically 1 for a uniform grid), the quadrature
/// weights are `jacobian * dx`, and `spectral_k` holds the wave numbers
/// conjugate to `x`.
#[derive(Clone)]
pub struct SpatialGrid {
    pub points: Vec<f64>,
    pub step_weights: Vec<f64>,
    pub jacobian: Vec<f64>,
    pub spectral_k: Vec<f64>,
    pub mass: f64,
    pub spec: GridSpec,
    dx: f64,
    uniform: bool,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpatialGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpatialGrid")
            .field("n_points", &self.points.len())
            .field("r_min", &self.points.first())
            .field("r_max", &self.points.last())
            .field("uniform", &self.uniform)
            .field("mass", &self.mass)
            .finish()
    }
}

/// Builds the grid. `envelope` is only consulted for mapped grids.
pub fn build_grid(spec: &GridSpec, envelope: impl Fn(f64) -> f64) -> Result<SpatialGrid, GridError> {
    spec.validate()?;
    let n = spec.n_points;
    let length = spec.r_max - spec.r_min;
    let dx = length / n as f64;

    let (points, jacobian, uniform) = match spec.mapping {
        Mapping::Uniform => {
            let pts = (0..n).map(|k| spec.r_min + (k as f64 + 0.5) * dx).collect();
            (pts, vec![1.0; n], true)
        }
        Mapping::Mapped { beta, e_max } => {
            let (pts, jac) = mapped_nodes(spec, beta, e_max, &envelope)?;
            (pts, jac, false)
        }
    };

    let step_weights = jacobian.iter().map(|j| j * dx).collect();
    let spectral_k = (0..n)
        .map(|j| {
            let m = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
            2.0 * PI * m / (n as f64 * dx)
        })
        .collect();

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);

    Ok(SpatialGrid {
        points,
        step_weights,
        jacobian,
        spectral_k,
        mass: spec.mass,
        spec: spec.clone(),
        dx,
        uniform,
        fft,
        ifft,
    })
}

/// Node placement for the mapped grid. The required point density is the
/// inverse local step; any surplus points are spread uniformly.
fn mapped_nodes(
    spec: &GridSpec,
    beta: f64,
    e_max: f64,
    envelope: &dyn Fn(f64) -> f64,
) -> Result<(Vec<f64>, Vec<f64>), GridError> {
    let n = spec.n_points;
    let length = spec.r_max - spec.r_min;
    let mass = spec.mass;

    let fine = 64 * n;
    let h = length / fine as f64;
    let mut v_min = f64::INFINITY;
    for i in 0..=fine {
        let v = envelope(spec.r_min + i as f64 * h);
        if !v.is_finite() {
            return Err(GridError::InvalidSpec(format!(
                "envelope potential not finite at r = {}",
                spec.r_min + i as f64 * h
            )));
        }
        v_min = v_min.min(v);
    }
    if e_max <= v_min {
        return Err(GridError::InvalidSpec(format!(
            "e_max = {e_max:e} does not exceed the envelope minimum {v_min:e}"
        )));
    }

    let density = |r: f64| {
        let ekin = (e_max - envelope(r)).max(MAPPING_ENERGY_FLOOR);
        (2.0 * mass * ekin).sqrt() / (beta * PI)
    };

    // Simpson rule for the number of points the local step demands.
    let mut required = density(spec.r_min) + density(spec.r_max);
    for i in 1..fine {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        required += w * density(spec.r_min + i as f64 * h);
    }
    required *= h / 3.0;
    if required > n as f64 {
        return Err(GridError::UnderResolved { required, available: n });
    }
    let surplus = (n as f64 - required) / length;
    let total = |r: f64| density(r) + surplus;

    // Integrate dr/ds = 1/rho(r) in the node index s, so that node k sits at s = k + 1/2.
    let dx = length / n as f64;
    let substeps = 32;
    let hs = 0.5 / substeps as f64;
    let rhs = |r: f64| 1.0 / total(r.clamp(spec.r_min, spec.r_max));
    let mut r = spec.r_min;
    let mut points = Vec::with_capacity(n);
    let mut jacobian = Vec::with_capacity(n);
    for k in 0..n {
        let half_steps = if k == 0 { 1 } else { 2 };
        for _ in 0..half_steps * substeps {
            let k1 = rhs(r);
            let k2 = rhs(r + 0.5 * hs * k1);
            let k3 = rhs(r + 0.5 * hs * k2);
            let k4 = rhs(r + hs * k3);
            r += hs * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
        }
        points.push(r.clamp(spec.r_min, spec.r_max));
        jacobian.push(rhs(r) / dx);
    }
    for w in points.windows(2) {
        if !(w[1] > w[0]) {
            return Err(GridError::InvalidSpec("mapped nodes are not strictly increasing".into()));
        }
    }
    Ok((points, jacobian))
}

impl SpatialGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// Uniform step of the underlying coordinate.
    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Largest kinetic energy the grid can represent (upper bound on the
    /// spectrum of the kinetic operator).
    pub fn kinetic_max(&self) -> f64 {
        let kmax = self.spectral_k.iter().fold(0.0f64, |m, k| m.max(k.abs()));
        let jmin = self.jacobian.iter().fold(f64::INFINITY, |m, &j| m.min(j));
        kmax * kmax / (2.0 * self.mass * jmin * jmin)
    }

    pub fn inner(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        a.iter()
            .zip(b)
            .zip(&self.step_weights)
            .map(|((x, y), w)| x.conj() * y * w)
            .sum()
    }

    pub fn norm_sqr(&self, a: &[Complex64]) -> f64 {
        a.iter().zip(&self.step_weights).map(|(x, w)| x.norm_sqr() * w).sum()
    }

    pub fn apply_kinetic(&self, amplitudes: &[Complex64]) -> Result<Vec<Complex64>, GridError> {
        if amplitudes.len() != self.len() {
            return Err(GridError::LengthMismatch { expected: self.len(), got: amplitudes.len() });
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.len()];
        self.kinetic_into(amplitudes, &mut out);
        Ok(out)
    }

    /// `out = T psi`, with `-1/(2m) d^2/dR^2` evaluated spectrally.
    ///
    /// On a mapped grid this is `(1/2m) J^-1 D'^T J^-1 D' psi`, where `D'` is
    /// the spectral d/dx with the Nyquist mode mapped onto itself with weight
    /// `k_N` instead of being dropped. In terms of `chi = J^1/2 psi` the
    /// operator is the symmetric `J^-1/2 D'^T J^-1 D' J^-1/2`, so it is
    /// Hermitian under the weights `J dx` and positive semidefinite with only
    /// constants in its null space. For `J = 1` it reduces to `k^2 / 2m`.
    pub fn kinetic_into(&self, psi: &[Complex64], out: &mut [Complex64]) {
        let n = self.len();
        debug_assert_eq!(psi.len(), n);
        debug_assert_eq!(out.len(), n);
        let scale = 1.0 / n as f64;
        let mut scratch =
            vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len().max(self.ifft.get_inplace_scratch_len())];
        out.copy_from_slice(psi);
        if self.uniform {
            self.fft.process_with_scratch(out, &mut scratch);
            let c = scale / (2.0 * self.mass);
            for (z, k) in out.iter_mut().zip(&self.spectral_k) {
                *z *= k * k * c;
            }
            self.ifft.process_with_scratch(out, &mut scratch);
        } else {
            self.derivative_in_place(out, &mut scratch, false);
            for (z, j) in out.iter_mut().zip(&self.jacobian) {
                *z /= *j;
            }
            self.derivative_in_place(out, &mut scratch, true);
            let c = 1.0 / (2.0 * self.mass);
            for (z, j) in out.iter_mut().zip(&self.jacobian) {
                *z *= c / *j;
            }
        }
    }

    /// Applies `D'` (or its transpose): `i k` on ordinary modes (`-i k` for
    /// the transpose) and the real factor `k_N` on the Nyquist mode, which
    /// keeps the operator real.
    fn derivative_in_place(&self, data: &mut [Complex64], scratch: &mut [Complex64], transpose: bool) {
        let n = data.len();
        self.fft.process_with_scratch(data, scratch);
        let scale = 1.0 / n as f64;
        let sign = if transpose { -1.0 } else { 1.0 };
        for (j, (z, k)) in data.iter_mut().zip(&self.spectral_k).enumerate() {
            if n % 2 == 0 && j == n / 2 {
                *z *= k.abs() * scale;
            } else {
                *z *= Complex64::new(0.0, sign * k * scale);
            }
        }
        self.ifft.process_with_scratch(data, scratch);
    }

    /// Dense symmetric matrix of `T + diag(v)` in the weight-symmetrized
    /// representation `W^1/2 H W^-1/2`.
    fn symmetric_hamiltonian(&self, v: &[f64]) -> DMatrix<f64> {
        let n = self.len();
        let sqrt_w: Vec<f64> = self.step_weights.iter().map(|w| w.sqrt()).collect();
        let mut h = DMatrix::<f64>::zeros(n, n);
        let mut unit = vec![Complex64::new(0.0, 0.0); n];
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            unit.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            unit[j] = Complex64::new(1.0 / sqrt_w[j], 0.0);
            self.kinetic_into(&unit, &mut col);
            for i in 0..n {
                h[(i, j)] = col[i].re * sqrt_w[i];
            }
        }
        let mut sym = (&h + h.transpose()) * 0.5;
        for i in 0..n {
            sym[(i, i)] += v[i];
        }
        sym
    }
}

/// One eigenpair of `T + V` on the grid, normalized under the step weights.
#[derive(Debug, Clone)]
pub struct BoundState {
    pub energy: f64,
    pub amplitudes: Vec<f64>,
}

impl BoundState {
    pub fn complex_amplitudes(&self) -> Vec<Complex64> {
        self.amplitudes.iter().map(|&x| Complex64::new(x, 0.0)).collect()
    }
}

/// Lowest `count` eigenpairs of `T + V`, energies ascending.
pub fn solve_bound_states(
    grid: &SpatialGrid,
    potential: impl Fn(f64) -> f64,
    count: usize,
) -> Result<Vec<BoundState>, GridError> {
    let max = grid.len() / 4;
    if count > max {
        return Err(GridError::TooManyStates { count, max });
    }
    let v: Vec<f64> = grid.points.iter().map(|&r| potential(r)).collect();
    let h = grid.symmetric_hamiltonian(&v);
    let eig = SymmetricEigen::try_new(h, f64::EPSILON, 1_000_000).ok_or(GridError::NonConvergence)?;

    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let states: Vec<BoundState> = order
        .iter()
        .take(count)
        .map(|&idx| {
            let col = eig.eigenvectors.column(idx);
            let mut amps: Vec<f64> =
                col.iter().zip(&grid.step_weights).map(|(c, w)| c / w.sqrt()).collect();
            let peak = amps.iter().fold(0.0f64, |m, &a| if a.abs() > m.abs() { a } else { m });
            if peak < 0.0 {
                amps.iter_mut().for_each(|a| *a = -*a);
            }
            BoundState { energy: eig.eigenvalues[idx], amplitudes: amps }
        })
        .collect();

    for pair in states.windows(2) {
        if pair[1].energy - pair[0].energy < 1.0e-12 {
            log::warn!(
                "near-degenerate bound states at E = {:e}; grid may be under-resolved",
                pair[0].energy
            );
        }
    }
    Ok(states)
}

/// CSV export: `n, energy_hartree, psi_1..psi_N`.
pub fn write_eigenstates_csv<W: Write>(out: &mut W, states: &[BoundState]) -> std::io::Result<()> {
    let n = states.first().map(|s| s.amplitudes.len()).unwrap_or(0);
    write!(out, "n,energy_hartree")?;
    for i in 1..=n {
        write!(out, ",psi_{i}")?;
    }
    writeln!(out)?;
    for (idx, s) in states.iter().enumerate() {
        write!(out, "{idx},{:.16e}", s.energy)?;
        for a in &s.amplitudes {
            write!(out, ",{a:.12e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn uniform_nodes_are_cell_midpoints() {
        let spec = GridSpec::uniform(0.0, 10.0, 8, 1.0);
        let g = build_grid(&spec, |_| 0.0).unwrap();
        assert!((g.points[0] - 0.625).abs() < 1e-14);
        assert!(g.step_weights.iter().all(|&w| (w - 1.25).abs() < 1e-14));
        assert!(g.jacobian.iter().all(|&j| j == 1.0));
    }

    #[test]
    fn five_point_example() {
        // n = 5 is below the 8-point minimum; check the node formula directly.
        let spec = GridSpec::uniform(0.0, 10.0, 5, 1.0);
        assert!(spec.validate().is_err());
        let dx = 10.0 / 5.0;
        let pts: Vec<f64> = (0..5).map(|k| (k as f64 + 0.5) * dx).collect();
        assert_eq!(pts, vec![1.0, 3.0, 5.0, 7.0, 9.0]);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(GridSpec::uniform(1.0, 1.0, 16, 1.0).validate().is_err());
        assert!(GridSpec::uniform(0.0, 1.0, 4, 1.0).validate().is_err());
        let mut s = GridSpec::uniform(0.0, 1.0, 16, 1.0);
        s.mapping = Mapping::Mapped { beta: 1.5, e_max: 1.0 };
        assert!(s.validate().is_err());
    }

    #[test]
    fn plane_wave_is_kinetic_eigenfunction() {
        let spec = GridSpec::uniform(-5.0, 7.0, 64, 3.0);
        let g = build_grid(&spec, |_| 0.0).unwrap();
        let len = 12.0;
        for m in [1i32, 5, -9, 20] {
            let k = 2.0 * PI * m as f64 / len;
            let psi: Vec<Complex64> = g.points.iter().map(|&r| Complex64::from_polar(1.0, k * r)).collect();
            let t = g.apply_kinetic(&psi).unwrap();
            let e = k * k / (2.0 * 3.0);
            for (a, b) in t.iter().zip(&psi) {
                assert!((a - b * e).norm() < 1e-12 * e.max(1.0), "m = {m}");
            }
        }
    }

    #[test]
    fn constant_has_zero_kinetic_energy() {
        let g = build_grid(&GridSpec::uniform(0.0, 1.0, 32, 1.0), |_| 0.0).unwrap();
        let t = g.apply_kinetic(&vec![c(0.7); 32]).unwrap();
        assert!(t.iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn kinetic_rejects_length_mismatch() {
        let g = build_grid(&GridSpec::uniform(0.0, 1.0, 32, 1.0), |_| 0.0).unwrap();
        assert!(matches!(g.apply_kinetic(&[c(1.0); 31]), Err(GridError::LengthMismatch { .. })));
    }

    #[test]
    fn harmonic_ground_state_satisfies_schroedinger() {
        // (T psi)(R) = (E0 - V(R)) psi(R) for the analytic ground state.
        let (m, w, d) = (2.0, 0.5, 1.0);
        let g = build_grid(&GridSpec::uniform(-11.0, 13.0, 128, m), |_| 0.0).unwrap();
        let a = m * w;
        let psi: Vec<Complex64> = g
            .points
            .iter()
            .map(|&r| c((a / PI).powf(0.25) * (-0.5 * a * (r - d) * (r - d)).exp()))
            .collect();
        assert!((g.norm_sqr(&psi) - 1.0).abs() < 1e-8);
        let t = g.apply_kinetic(&psi).unwrap();
        for ((tp, p), &r) in t.iter().zip(&psi).zip(&g.points) {
            let v = 0.5 * m * w * w * (r - d) * (r - d);
            assert!((tp - p * (0.5 * w - v)).norm() < 1e-8);
        }
    }

    fn random_state(rng: &mut ChaCha8Rng, g: &SpatialGrid) -> Vec<Complex64> {
        // Smooth random superposition so both mapped and uniform grids resolve it.
        let mut psi: Vec<Complex64> = g
            .points
            .iter()
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let n = g.norm_sqr(&psi).sqrt();
        psi.iter_mut().for_each(|z| *z /= n);
        psi
    }

    fn mapped_harmonic_grid(n: usize) -> SpatialGrid {
        let (m, w, d) = (1000.0, 1.0e-3, 10.0);
        let mut spec = GridSpec::uniform(2.0, 18.0, n, m);
        spec.mapping = Mapping::Mapped { beta: 0.5, e_max: 0.05 };
        build_grid(&spec, move |r| 0.5 * m * w * w * (r - d) * (r - d)).unwrap()
    }

    #[test]
    fn kinetic_is_hermitian_and_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let grids = [build_grid(&GridSpec::uniform(0.0, 9.0, 48, 1.3), |_| 0.0).unwrap(), mapped_harmonic_grid(128)];
        for g in &grids {
            for _ in 0..20 {
                let phi = random_state(&mut rng, g);
                let psi = random_state(&mut rng, g);
                let tphi = g.apply_kinetic(&phi).unwrap();
                let tpsi = g.apply_kinetic(&psi).unwrap();
                let lhs = g.inner(&phi, &tpsi);
                let rhs = g.inner(&tphi, &psi);
                let scale = 1.0f64.max(g.kinetic_max());
                assert!((lhs - rhs).norm() < 1e-10 * scale, "{lhs} vs {rhs}");
                assert!(g.inner(&psi, &tpsi).re >= -1e-12);
            }
        }
    }

    #[test]
    fn mapped_grid_is_denser_at_trap_minimum() {
        let (m, w, d) = (1000.0, 1.0e-3, 10.0);
        let mut spec = GridSpec::uniform(2.0, 18.0, 64, m);
        spec.mapping = Mapping::Mapped { beta: 0.5, e_max: 1.0e-8 + 0.01 };
        let env = move |r: f64| 0.5 * m * w * w * (r - d) * (r - d);
        let g = build_grid(&spec, env).unwrap();
        // independent expectation: local step ~ beta*pi/p(r) shrinks where e_max - V is large
        let spacing_at = |r: f64| {
            let i = g.points.iter().position(|&p| p >= r).unwrap();
            g.points[i] - g.points[i - 1]
        };
        assert!(spacing_at(d) < spacing_at(17.5));
        assert!(g.points.windows(2).all(|p| p[1] > p[0]));
        assert!(g.points.iter().all(|&p| p > 2.0 && p < 18.0));
        // weights integrate the domain
        let total: f64 = g.step_weights.iter().sum();
        assert!((total - 16.0).abs() < 0.05);
    }

    #[test]
    fn mapped_grid_rejects_underresolution() {
        let mut spec = GridSpec::uniform(1.0, 50.0, 16, 1000.0);
        spec.mapping = Mapping::Mapped { beta: 0.5, e_max: 1.0 };
        assert!(matches!(build_grid(&spec, |_| 0.0), Err(GridError::UnderResolved { .. })));
        spec.mapping = Mapping::Mapped { beta: 0.5, e_max: -1.0 };
        assert!(matches!(build_grid(&spec, |_| 0.0), Err(GridError::InvalidSpec(_))));
    }

    #[test]
    fn mapped_gaussian_norm() {
        let g = mapped_harmonic_grid(128);
        let psi: Vec<Complex64> =
            g.points.iter().map(|&r| c((1.0 / PI).powf(0.25) * (-0.5 * (r - 10.0) * (r - 10.0)).exp())).collect();
        assert!((g.norm_sqr(&psi) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn harmonic_spectrum_uniform_and_mapped() {
        let (m, w, d) = (1000.0, 1.0e-3, 10.0);
        let v = move |r: f64| 0.5 * m * w * w * (r - d) * (r - d);
        let uni = build_grid(&GridSpec::uniform(2.0, 18.0, 64, m), |_| 0.0).unwrap();
        let map = mapped_harmonic_grid(128);
        for g in [&uni, &map] {
            let states = solve_bound_states(g, v, 12).unwrap();
            for (n, s) in states.iter().enumerate() {
                let exact = w * (n as f64 + 0.5);
                assert!(((s.energy - exact) / exact).abs() < 1e-6, "n={n} {} vs {exact}", s.energy);
                let psi = s.complex_amplitudes();
                let tpsi = g.apply_kinetic(&psi).unwrap();
                let res: f64 = tpsi
                    .iter()
                    .zip(&psi)
                    .zip(&g.points)
                    .zip(&g.step_weights)
                    .map(|(((t, p), &r), wt)| (t + p * v(r) - p * s.energy).norm_sqr() * wt)
                    .sum::<f64>()
                    .sqrt();
                assert!(res < 1e-8 * s.energy.abs() + 1e-10, "residual {res}");
            }
            for i in 0..4 {
                for j in 0..4 {
                    let ov = g.inner(&states[i].complex_amplitudes(), &states[j].complex_amplitudes()).re;
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((ov - want).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn displaced_ground_state_is_centered_gaussian() {
        let (m, w, d) = (500.0, 2.0e-3, 3.0);
        let g = build_grid(&GridSpec::uniform(-7.0, 13.0, 96, m), |_| 0.0).unwrap();
        let s = &solve_bound_states(&g, |r| 0.5 * m * w * w * (r - d).powi(2), 1).unwrap()[0];
        let a = m * w;
        for (&r, &p) in g.points.iter().zip(&s.amplitudes) {
            let exact = (a / PI).powf(0.25) * (-0.5 * a * (r - d).powi(2)).exp();
            assert!((p - exact).abs() < 1e-9);
        }
    }

    #[test]
    fn too_many_states_rejected() {
        let g = build_grid(&GridSpec::uniform(0.0, 1.0, 16, 1.0), |_| 0.0).unwrap();
        assert!(matches!(solve_bound_states(&g, |_| 0.0, 5), Err(GridError::TooManyStates { .. })));
    }

    #[test]
    fn eigenstate_csv_layout() {
        let g = build_grid(&GridSpec::uniform(-5.0, 5.0, 16, 1.0), |_| 0.0).unwrap();
        let s = solve_bound_states(&g, |r| 0.5 * r * r, 2).unwrap();
        let mut buf = Vec::new();
        write_eigenstates_csv(&mut buf, &s).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("n,energy_hartree,psi_1,"));
        assert!(header.ends_with(",psi_16"));
        assert_eq!(lines.count(), 2);
    }
}
