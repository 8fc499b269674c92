//! Electronic channel structure of the two-atom register and the
//! field-dependent Hamiltonian action.
//!
//! Each atom has levels 0, 1 (the qubit) and an auxiliary excited level a.
//! The field drives only 0 <-> a on either atom, so the pair channels split
//! into independent blocks: {00, 0a, a0, aa}, {01, a1}, {10, 1a} and the
//! uncoupled 11. The reduced model keeps the first block on the grid and
//! replaces the other two by a single-atom two-level system {0, a}.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::grid::{solve_bound_states, BoundState, GridError, SpatialGrid};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid system parameters: {0}")]
    InvalidParams(String),
    #[error("system is not in {expected:?} mode")]
    WrongMode { expected: Mode },
    #[error("state channels {got:?} do not match any block of the system")]
    ChannelMismatch { got: Vec<ChannelLabel> },
    #[error("state has {got} amplitudes, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    Zero,
    One,
    Aux,
}

impl Level {
    fn symbol(self) -> char {
        match self {
            Level::Zero => '0',
            Level::One => '1',
            Level::Aux => 'a',
        }
    }
}

/// A two-atom channel |ij>, or a single-atom level of the reduced model's
/// two-level block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChannelLabel {
    Pair(Level, Level),
    Single(Level),
}

impl ChannelLabel {
    pub const fn pair(a: Level, b: Level) -> Self {
        ChannelLabel::Pair(a, b)
    }

    /// All nine pair labels.
    pub fn all_pairs() -> Vec<ChannelLabel> {
        let levels = [Level::Zero, Level::One, Level::Aux];
        levels
            .iter()
            .flat_map(|&a| levels.iter().map(move |&b| ChannelLabel::Pair(a, b)))
            .collect()
    }

    /// True when the labels differ by a single 0 <-> a flip of one atom.
    pub fn is_dipole_partner(&self, other: &ChannelLabel) -> bool {
        let flip = |x: Level, y: Level| matches!((x, y), (Level::Zero, Level::Aux) | (Level::Aux, Level::Zero));
        match (*self, *other) {
            (ChannelLabel::Pair(a, b), ChannelLabel::Pair(c, d)) => {
                (flip(a, c) && b == d) || (a == c && flip(b, d))
            }
            (ChannelLabel::Single(a), ChannelLabel::Single(c)) => flip(a, c),
            _ => false,
        }
    }
}

impl fmt::Display for ChannelLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelLabel::Pair(a, b) => write!(f, "{}{}", a.symbol(), b.symbol()),
            ChannelLabel::Single(a) => write!(f, "{}", a.symbol()),
        }
    }
}

pub const L00: ChannelLabel = ChannelLabel::pair(Level::Zero, Level::Zero);
pub const L0A: ChannelLabel = ChannelLabel::pair(Level::Zero, Level::Aux);
pub const LA0: ChannelLabel = ChannelLabel::pair(Level::Aux, Level::Zero);
pub const LAA: ChannelLabel = ChannelLabel::pair(Level::Aux, Level::Aux);
pub const L01: ChannelLabel = ChannelLabel::pair(Level::Zero, Level::One);
pub const LA1: ChannelLabel = ChannelLabel::pair(Level::Aux, Level::One);
pub const L10: ChannelLabel = ChannelLabel::pair(Level::One, Level::Zero);
pub const L1A: ChannelLabel = ChannelLabel::pair(Level::One, Level::Aux);
pub const L11: ChannelLabel = ChannelLabel::pair(Level::One, Level::One);
pub const S0: ChannelLabel = ChannelLabel::Single(Level::Zero);
pub const SA: ChannelLabel = ChannelLabel::Single(Level::Aux);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Full8,
    Reduced4Plus2,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    Zero,
    /// `mass * omega^2 * (r - center)^2 / 2`.
    Harmonic { omega: f64, center: f64, mass: f64 },
    /// `sign * c3 / r^3`.
    InverseCube { c3: f64, sign: f64 },
    /// Linear interpolation through `(r, V)` pairs sorted by r, constant beyond the ends.
    Tabulated(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialModel {
    pub kind: PotentialKind,
    pub asymptotic_energy: f64,
}

impl PotentialModel {
    pub fn zero(asymptotic_energy: f64) -> Self {
        Self { kind: PotentialKind::Zero, asymptotic_energy }
    }

    pub fn value(&self, r: f64) -> f64 {
        let v = match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::Harmonic { omega, center, mass } => 0.5 * mass * omega * omega * (r - center).powi(2),
            PotentialKind::InverseCube { c3, sign } => sign * c3 / (r * r * r),
            PotentialKind::Tabulated(pts) => interpolate(pts, r),
        };
        v + self.asymptotic_energy
    }
}

fn interpolate(pts: &[(f64, f64)], r: f64) -> f64 {
    match pts.len() {
        0 => 0.0,
        1 => pts[0].1,
        _ => {
            if r <= pts[0].0 {
                return pts[0].1;
            }
            if r >= pts[pts.len() - 1].0 {
                return pts[pts.len() - 1].1;
            }
            let i = pts.partition_point(|p| p.0 <= r);
            let (r0, v0) = pts[i - 1];
            let (r1, v1) = pts[i];
            v0 + (v1 - v0) * (r - r0) / (r1 - r0)
        }
    }
}

/// Physical parameters of the register, in atomic units.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Energy of the qubit level 1 above level 0.
    pub e1: f64,
    /// Energy of the auxiliary level a above level 0.
    pub e_a: f64,
    /// Angular trap frequency.
    pub omega: f64,
    /// Trap separation d.
    pub distance: f64,
    pub c3: f64,
    /// Transition dipole of 0 <-> a.
    pub mu0: f64,
    /// Reduced mass of the relative motion.
    pub mass: f64,
    /// Carrier detuning of the guess pulse from the 0 <-> a line.
    pub detuning: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub label: ChannelLabel,
    pub interaction: PotentialModel,
    pub trap: PotentialModel,
}

impl Channel {
    pub fn potential(&self, r: f64) -> f64 {
        self.interaction.value(r) + self.trap.value(r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pub a: ChannelLabel,
    pub b: ChannelLabel,
    pub mu: f64,
}

/// Single-atom levels {0, a} without motional degree of freedom.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLevel {
    pub energies: [f64; 2],
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSystem {
    pub mode: Mode,
    pub params: SystemParams,
    pub channels: Vec<Channel>,
    pub couplings: Vec<Coupling>,
    pub two_level: Option<TwoLevel>,
}

/// Full eight-channel system with analytic stand-in potentials.
pub fn build_calcium_like_system(params: &SystemParams) -> Result<ChannelSystem, ModelError> {
    let p = params;
    let bad = |m: &str| Err(ModelError::InvalidParams(m.to_string()));
    if !(p.omega > 0.0) {
        return bad("trap frequency must be positive");
    }
    if !(p.c3 >= 0.0) {
        return bad("C3 must be non-negative");
    }
    if !(p.e_a > p.e1) {
        return bad("auxiliary level must lie above level 1");
    }
    if !(p.mass > 0.0) {
        return bad("mass must be positive");
    }
    if !(p.distance > 0.0) {
        return bad("trap distance must be positive");
    }
    if !p.mu0.is_finite() || !p.e1.is_finite() || !p.detuning.is_finite() {
        return bad("non-finite parameter");
    }

    let trap = PotentialModel {
        kind: PotentialKind::Harmonic { omega: p.omega, center: p.distance, mass: p.mass },
        asymptotic_energy: 0.0,
    };
    let level_energy = |l: Level| match l {
        Level::Zero => 0.0,
        Level::One => p.e1,
        Level::Aux => p.e_a,
    };
    let order = [L00, L0A, LA0, LAA, L01, LA1, L10, L1A];
    let channels = order
        .iter()
        .map(|&label| {
            let ChannelLabel::Pair(x, y) = label else { unreachable!() };
            let asym = level_energy(x) + level_energy(y);
            let interaction = if label == L0A || label == LA0 {
                PotentialModel { kind: PotentialKind::InverseCube { c3: p.c3, sign: -1.0 }, asymptotic_energy: asym }
            } else {
                PotentialModel::zero(asym)
            };
            Channel { label, interaction, trap: trap.clone() }
        })
        .collect::<Vec<_>>();

    let mut couplings = Vec::new();
    for (i, a) in order.iter().enumerate() {
        for b in &order[i + 1..] {
            if a.is_dipole_partner(b) {
                couplings.push(Coupling { a: *a, b: *b, mu: p.mu0 });
            }
        }
    }
    Ok(ChannelSystem { mode: Mode::Full8, params: p.clone(), channels, couplings, two_level: None })
}

/// Reduced model: the |00> block on the grid plus a two-level {0, a} atom.
pub fn reduce_system(full: &ChannelSystem) -> Result<ChannelSystem, ModelError> {
    if full.mode != Mode::Full8 {
        return Err(ModelError::WrongMode { expected: Mode::Full8 });
    }
    let keep = [L00, L0A, LA0, LAA];
    let channels = full.channels.iter().filter(|c| keep.contains(&c.label)).cloned().collect();
    let couplings = full
        .couplings
        .iter()
        .filter(|c| keep.contains(&c.a) && keep.contains(&c.b))
        .cloned()
        .collect();
    Ok(ChannelSystem {
        mode: Mode::Reduced4Plus2,
        params: full.params.clone(),
        channels,
        couplings,
        two_level: Some(TwoLevel { energies: [0.0, full.params.e_a], mu: full.params.mu0 }),
    })
}

impl ChannelSystem {
    pub fn channel(&self, label: ChannelLabel) -> Option<&Channel> {
        self.channels.iter().find(|c| c.label == label)
    }

    /// The common trap potential (taken from the |00> channel).
    pub fn trap_potential(&self, r: f64) -> f64 {
        self.channel(L00).map(|c| c.trap.value(r)).unwrap_or(0.0)
    }

    pub fn trap_states(&self, grid: &SpatialGrid, count: usize) -> Result<Vec<BoundState>, ModelError> {
        Ok(solve_bound_states(grid, |r| self.trap_potential(r), count)?)
    }

    /// Energy of the uncoupled |11> channel with the motional ground state.
    pub fn e11(&self) -> f64 {
        2.0 * self.params.e1
    }

    /// Independent Hamiltonian blocks: connected components of the coupling
    /// graph in channel order, followed by the two-level block if present.
    pub fn blocks(&self, grid: &SpatialGrid) -> Vec<BlockHamiltonian> {
        let n = self.channels.len();
        let mut component: Vec<Option<usize>> = vec![None; n];
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for start in 0..n {
            if component[start].is_some() {
                continue;
            }
            let id = groups.len();
            let mut members = vec![start];
            component[start] = Some(id);
            let mut k = 0;
            while k < members.len() {
                let cur = self.channels[members[k]].label;
                for c in &self.couplings {
                    let other = if c.a == cur {
                        c.b
                    } else if c.b == cur {
                        c.a
                    } else {
                        continue;
                    };
                    if let Some(j) = self.channels.iter().position(|ch| ch.label == other) {
                        if component[j].is_none() {
                            component[j] = Some(id);
                            members.push(j);
                        }
                    }
                }
                k += 1;
            }
            members.sort_unstable();
            groups.push(members);
        }

        let mut blocks: Vec<BlockHamiltonian> = groups
            .iter()
            .map(|members| {
                let chans: Vec<&Channel> = members.iter().map(|&i| &self.channels[i]).collect();
                BlockHamiltonian::from_channels(grid, &chans, &self.couplings)
            })
            .collect();
        if let Some(tl) = &self.two_level {
            blocks.push(BlockHamiltonian::two_level(tl));
        }
        blocks
    }

    pub fn block_containing(&self, grid: &SpatialGrid, label: ChannelLabel) -> Option<BlockHamiltonian> {
        self.blocks(grid).into_iter().find(|b| b.labels.contains(&label))
    }
}

/// Hamiltonian of one block of mutually coupled channels, all sharing the
/// same number of points (the grid size, or 1 for the two-level block).
#[derive(Debug, Clone)]
pub struct BlockHamiltonian {
    pub labels: Vec<ChannelLabel>,
    n_points: usize,
    grid: Option<SpatialGrid>,
    weights: Vec<f64>,
    diag: Vec<f64>,
    /// (channel index, channel index, dipole) within the block.
    couplings: Vec<(usize, usize, f64)>,
}

impl BlockHamiltonian {
    pub fn from_channels(grid: &SpatialGrid, channels: &[&Channel], couplings: &[Coupling]) -> Self {
        let labels: Vec<ChannelLabel> = channels.iter().map(|c| c.label).collect();
        let n = grid.len();
        let mut diag = Vec::with_capacity(n * labels.len());
        for c in channels {
            diag.extend(grid.points.iter().map(|&r| c.potential(r)));
        }
        let idx = |l: ChannelLabel| labels.iter().position(|&x| x == l);
        let local = couplings
            .iter()
            .filter_map(|c| Some((idx(c.a)?, idx(c.b)?, c.mu)))
            .collect();
        Self {
            labels,
            n_points: n,
            grid: Some(grid.clone()),
            weights: grid.step_weights.clone(),
            diag,
            couplings: local,
        }
    }

    pub fn two_level(tl: &TwoLevel) -> Self {
        Self {
            labels: vec![S0, SA],
            n_points: 1,
            grid: None,
            weights: vec![1.0],
            diag: tl.energies.to_vec(),
            couplings: vec![(0, 1, tl.mu)],
        }
    }

    pub fn n_channels(&self) -> usize {
        self.labels.len()
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dim(&self) -> usize {
        self.n_points * self.labels.len()
    }

    pub fn grid(&self) -> Option<&SpatialGrid> {
        self.grid.as_ref()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn channel_index(&self, label: ChannelLabel) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    /// Potential (including asymptote) of channel `c` at every point.
    pub fn potential(&self, c: usize) -> &[f64] {
        &self.diag[c * self.n_points..(c + 1) * self.n_points]
    }

    pub fn potential_bounds(&self) -> (f64, f64) {
        self.diag.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn kinetic_max(&self) -> f64 {
        self.grid.as_ref().map(|g| g.kinetic_max()).unwrap_or(0.0)
    }

    pub fn max_dipole(&self) -> f64 {
        self.couplings.iter().fold(0.0f64, |m, c| m.max(c.2.abs()))
    }

    /// Largest number of couplings attached to a single channel.
    pub fn coordination(&self) -> usize {
        (0..self.n_channels())
            .map(|i| self.couplings.iter().filter(|c| c.0 == i || c.1 == i).count())
            .max()
            .unwrap_or(0)
    }

    pub fn inner(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        let n = self.n_points;
        let mut acc = Complex64::new(0.0, 0.0);
        for c in 0..self.n_channels() {
            let sa = &a[c * n..(c + 1) * n];
            let sb = &b[c * n..(c + 1) * n];
            for ((x, y), w) in sa.iter().zip(sb).zip(&self.weights) {
                acc += x.conj() * y * w;
            }
        }
        acc
    }

    pub fn norm_sqr(&self, a: &[Complex64]) -> f64 {
        self.inner(a, a).re
    }

    /// Weighted population of every channel.
    pub fn populations(&self, a: &[Complex64]) -> Vec<f64> {
        let n = self.n_points;
        (0..self.n_channels())
            .map(|c| {
                a[c * n..(c + 1) * n].iter().zip(&self.weights).map(|(x, w)| x.norm_sqr() * w).sum()
            })
            .collect()
    }

    /// `out = H(field) psi`.
    pub fn apply_into(&self, psi: &[Complex64], field: f64, out: &mut [Complex64]) {
        let n = self.n_points;
        for c in 0..self.n_channels() {
            let src = &psi[c * n..(c + 1) * n];
            let dst = &mut out[c * n..(c + 1) * n];
            match &self.grid {
                Some(g) => g.kinetic_into(src, dst),
                None => dst.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0)),
            }
            for ((d, s), v) in dst.iter_mut().zip(src).zip(self.potential(c)) {
                *d += s * v;
            }
        }
        if field != 0.0 {
            self.add_dipole(psi, field, out);
        }
    }

    /// `out = mu psi` (the field-coupling operator without the field).
    pub fn apply_dipole_into(&self, psi: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        self.add_dipole(psi, 1.0, out);
    }

    fn add_dipole(&self, psi: &[Complex64], field: f64, out: &mut [Complex64]) {
        let n = self.n_points;
        for &(p, q, mu) in &self.couplings {
            let f = field * mu;
            for k in 0..n {
                let (xp, xq) = (psi[p * n + k], psi[q * n + k]);
                out[p * n + k] += xq * f;
                out[q * n + k] += xp * f;
            }
        }
    }

    /// `<a| mu |b>` under the block's quadrature weights.
    pub fn dipole_matrix_element(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        let n = self.n_points;
        let mut acc = Complex64::new(0.0, 0.0);
        for &(p, q, mu) in &self.couplings {
            for k in 0..n {
                let w = self.weights[k] * mu;
                acc += (a[p * n + k].conj() * b[q * n + k] + a[q * n + k].conj() * b[p * n + k]) * w;
            }
        }
        acc
    }

    /// Dense matrix of `H(field)` in the amplitude representation
    /// (column j is `H` applied to the j-th unit vector).
    pub fn dense_matrix(&self, field: f64) -> DMatrix<Complex64> {
        let d = self.dim();
        let mut m = DMatrix::<Complex64>::zeros(d, d);
        let mut unit = vec![Complex64::new(0.0, 0.0); d];
        let mut col = vec![Complex64::new(0.0, 0.0); d];
        for j in 0..d {
            unit.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            unit[j] = Complex64::new(1.0, 0.0);
            self.apply_into(&unit, field, &mut col);
            for i in 0..d {
                m[(i, j)] = col[i];
            }
        }
        m
    }

    pub fn zero_state(&self) -> WaveState {
        WaveState::zeros(self.labels.clone(), self.n_points)
    }

    /// `|label> (x) phi` with `phi` a motional state (ignored for the two-level block).
    pub fn basis_state(&self, label: ChannelLabel, motional: &[Complex64]) -> Result<WaveState, ModelError> {
        let c = self
            .channel_index(label)
            .ok_or_else(|| ModelError::ChannelMismatch { got: vec![label] })?;
        let mut s = self.zero_state();
        if self.grid.is_some() {
            if motional.len() != self.n_points {
                return Err(ModelError::LengthMismatch { expected: self.n_points, got: motional.len() });
            }
            s.channel_mut(c).copy_from_slice(motional);
        } else {
            s.channel_mut(c)[0] = Complex64::new(1.0, 0.0);
        }
        Ok(s)
    }

    pub fn check_state(&self, state: &WaveState) -> Result<(), ModelError> {
        if state.labels != self.labels {
            return Err(ModelError::ChannelMismatch { got: state.labels.clone() });
        }
        if state.data.len() != self.dim() {
            return Err(ModelError::LengthMismatch { expected: self.dim(), got: state.data.len() });
        }
        Ok(())
    }
}

/// Amplitudes of one propagated state over the channels of a block,
/// stored channel-major. `time` is in atomic units.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub labels: Vec<ChannelLabel>,
    pub n_points: usize,
    pub data: Vec<Complex64>,
    pub time: f64,
}

impl WaveState {
    pub fn zeros(labels: Vec<ChannelLabel>, n_points: usize) -> Self {
        let len = labels.len() * n_points;
        Self { labels, n_points, data: vec![Complex64::new(0.0, 0.0); len], time: 0.0 }
    }

    pub fn n_channels(&self) -> usize {
        self.labels.len()
    }

    pub fn channel(&self, c: usize) -> &[Complex64] {
        &self.data[c * self.n_points..(c + 1) * self.n_points]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [Complex64] {
        &mut self.data[c * self.n_points..(c + 1) * self.n_points]
    }

    pub fn channel_by_label(&self, label: ChannelLabel) -> Option<&[Complex64]> {
        self.labels.iter().position(|&l| l == label).map(|c| self.channel(c))
    }

    pub fn scale(&mut self, z: Complex64) {
        self.data.iter_mut().for_each(|x| *x *= z);
    }
}

/// `H(field) psi` for a state living on one block of `system`.
pub fn apply_hamiltonian(
    system: &ChannelSystem,
    grid: &SpatialGrid,
    state: &WaveState,
    field_value: f64,
) -> Result<WaveState, ModelError> {
    let block = system
        .blocks(grid)
        .into_iter()
        .find(|b| b.labels == state.labels)
        .ok_or_else(|| ModelError::ChannelMismatch { got: state.labels.clone() })?;
    block.check_state(state)?;
    let mut out = state.clone();
    block.apply_into(&state.data, field_value, &mut out.data);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, GridSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_params() -> SystemParams {
        SystemParams {
            e1: 0.3,
            e_a: 1.0,
            omega: 1.0e-3,
            distance: 8.0,
            c3: 20.0,
            mu0: 1.0,
            mass: 1000.0,
            detuning: 0.0,
        }
    }

    fn toy_grid() -> SpatialGrid {
        build_grid(&GridSpec::uniform(3.0, 13.0, 32, 1000.0), |_| 0.0).unwrap()
    }

    fn random_state(rng: &mut ChaCha8Rng, b: &BlockHamiltonian) -> Vec<Complex64> {
        let mut v: Vec<Complex64> =
            (0..b.dim()).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
        let n = b.norm_sqr(&v).sqrt();
        v.iter_mut().for_each(|z| *z /= n);
        v
    }

    #[test]
    fn nine_labels_eight_channels() {
        assert_eq!(ChannelLabel::all_pairs().len(), 9);
        let sys = build_calcium_like_system(&toy_params()).unwrap();
        assert_eq!(sys.channels.len(), 8);
        assert!(sys.channel(L11).is_none());
        // no coupling touches |11>, and |1a>/|a1> only couple to their 0 partners
        assert!(sys.couplings.iter().all(|c| c.a != L11 && c.b != L11));
        assert_eq!(sys.couplings.len(), 6);
        assert!(sys.couplings.iter().all(|c| c.a.is_dipole_partner(&c.b) && c.b.is_dipole_partner(&c.a)));
    }

    #[test]
    fn rejects_bad_params() {
        let mut p = toy_params();
        p.omega = 0.0;
        assert!(build_calcium_like_system(&p).is_err());
        let mut p = toy_params();
        p.c3 = -1.0;
        assert!(build_calcium_like_system(&p).is_err());
        let mut p = toy_params();
        p.e_a = p.e1;
        assert!(build_calcium_like_system(&p).is_err());
    }

    #[test]
    fn block_structure() {
        let sys = build_calcium_like_system(&toy_params()).unwrap();
        let g = toy_grid();
        let blocks = sys.blocks(&g);
        let labels: Vec<Vec<ChannelLabel>> = blocks.iter().map(|b| b.labels.clone()).collect();
        assert_eq!(labels, vec![vec![L00, L0A, LA0, LAA], vec![L01, LA1], vec![L10, L1A]]);
        let red = reduce_system(&sys).unwrap();
        let blocks = red.blocks(&g);
        assert_eq!(blocks.len(), 2);
        assert_eq!(blocks[0].labels, vec![L00, L0A, LA0, LAA]);
        assert_eq!(blocks[1].labels, vec![S0, SA]);
        assert_eq!(blocks[1].n_points(), 1);
        assert!(matches!(reduce_system(&red), Err(ModelError::WrongMode { .. })));
    }

    #[test]
    fn potentials() {
        let p = toy_params();
        let sys = build_calcium_like_system(&p).unwrap();
        let d = p.distance;
        let v0a = sys.channel(L0A).unwrap().potential(d);
        assert!((v0a - (p.e_a - p.c3 / d.powi(3))).abs() < 1e-14);
        assert_eq!(sys.channel(LAA).unwrap().potential(d), 2.0 * p.e_a);
        assert_eq!(sys.channel(LA1).unwrap().potential(d), p.e_a + p.e1);
        let mut q = p.clone();
        q.c3 = 0.0;
        let sys0 = build_calcium_like_system(&q).unwrap();
        let c = sys0.channel(L0A).unwrap();
        for r in [3.0, 7.5, 12.0] {
            assert_eq!(c.potential(r), p.e_a + c.trap.value(r));
        }
    }

    #[test]
    fn tabulated_interpolation() {
        let v = PotentialModel { kind: PotentialKind::Tabulated(vec![(1.0, 2.0), (3.0, 6.0)]), asymptotic_energy: 1.0 };
        assert_eq!(v.value(0.0), 3.0);
        assert_eq!(v.value(2.0), 5.0);
        assert_eq!(v.value(9.0), 7.0);
    }

    #[test]
    fn two_level_matrix() {
        let tl = TwoLevel { energies: [0.0, 1.3], mu: 0.7 };
        let b = BlockHamiltonian::two_level(&tl);
        let m = b.dense_matrix(0.2);
        let e = 0.2 * 0.7;
        let want = [[0.0, e], [e, 1.3]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((m[(i, j)] - Complex64::new(want[i][j], 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_field_eigenstate_action() {
        let p = toy_params();
        let sys = build_calcium_like_system(&p).unwrap();
        let g = toy_grid();
        let ground = &sys.trap_states(&g, 1).unwrap()[0];
        for label in [L00, L0A, LAA, L01, L1A] {
            let block = sys.block_containing(&g, label).unwrap();
            let s = block.basis_state(label, &ground.complex_amplitudes()).unwrap();
            let hs = apply_hamiltonian(&sys, &g, &s, 0.0).unwrap();
            let asym = sys.channel(label).unwrap().interaction.asymptotic_energy;
            if label == L0A {
                continue;
            }
            let want = ground.energy + asym;
            for (a, b) in hs.data.iter().zip(&s.data) {
                assert!((a - b * want).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn hamiltonian_linear_and_hermitian() {
        let sys = build_calcium_like_system(&toy_params()).unwrap();
        let g = toy_grid();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for b in sys.blocks(&g) {
            let psi = random_state(&mut rng, &b);
            let phi = random_state(&mut rng, &b);
            let mut h0 = vec![Complex64::new(0.0, 0.0); b.dim()];
            let mut h1 = h0.clone();
            let mut h2 = h0.clone();
            let mut mu = h0.clone();
            b.apply_into(&psi, 0.0, &mut h0);
            b.apply_into(&psi, 0.3, &mut h1);
            b.apply_into(&psi, -1.1, &mut h2);
            b.apply_dipole_into(&psi, &mut mu);
            for k in 0..b.dim() {
                assert!((h1[k] - h0[k] - mu[k] * 0.3).norm() < 1e-12);
                assert!((h2[k] - h0[k] + mu[k] * 1.1).norm() < 1e-12);
            }
            let e = b.inner(&psi, &h1);
            assert!(e.im.abs() < 1e-10);
            let mut hphi = h0.clone();
            b.apply_into(&phi, 0.3, &mut hphi);
            assert!((b.inner(&phi, &h1) - b.inner(&hphi, &psi)).norm() < 1e-10);
            assert!((b.dipole_matrix_element(&phi, &psi) - b.inner(&phi, &mu)).norm() < 1e-12);
        }
    }

    #[test]
    fn channel_mismatch_detected() {
        let sys = build_calcium_like_system(&toy_params()).unwrap();
        let g = toy_grid();
        let s = WaveState::zeros(vec![L00, L01], g.len());
        assert!(matches!(apply_hamiltonian(&sys, &g, &s, 0.0), Err(ModelError::ChannelMismatch { .. })));
    }
}
