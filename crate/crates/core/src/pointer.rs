//! Detector (pointer) states: abstract vectors, mixed ensembles and
//! grid-sampled continuous wavefunctions with their position and momentum
//! observables.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::linalg::CVector;
use crate::operators::HermitianOperator;

/// Norm tolerance for detector states.
pub const NORM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisLabel {
    Abstract,
    Grid,
}

#[derive(Clone, Debug)]
pub struct PureDetectorState {
    amplitudes: CVector,
    basis: BasisLabel,
}

impl PureDetectorState {
    /// Wraps an already normalized vector.
    pub fn new(amplitudes: CVector, basis: BasisLabel) -> Result<Self> {
        let n = amplitudes.norm();
        if !((n - 1.0).abs() <= NORM_TOL) {
            return Err(Error::InvalidInput(format!("detector state norm {n} is not 1")));
        }
        Ok(Self { amplitudes, basis })
    }

    /// Normalizes `amplitudes` first.
    pub fn normalized(amplitudes: CVector, basis: BasisLabel) -> Result<Self> {
        let n = amplitudes.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidInput("detector state has zero or non-finite norm".into()));
        }
        Ok(Self { amplitudes: amplitudes.unscale(n), basis })
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn basis(&self) -> BasisLabel {
        self.basis
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// Same state times a unit-modulus phase.
    pub fn with_phase(&self, phase: f64) -> Self {
        Self { amplitudes: self.amplitudes.map(|x| x * C64::from_polar(1.0, phase)), basis: self.basis }
    }
}

/// Mixed detector state as a weighted ensemble of pure states.
#[derive(Clone, Debug)]
pub struct DetectorEnsemble {
    weights: Vec<f64>,
    states: Vec<PureDetectorState>,
}

impl DetectorEnsemble {
    pub fn new(weights: Vec<f64>, states: Vec<PureDetectorState>) -> Result<Self> {
        if weights.is_empty() || weights.len() != states.len() {
            return Err(Error::InvalidInput(format!(
                "ensemble needs matching non-empty weights/states, got {} and {}",
                weights.len(),
                states.len()
            )));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidInput("ensemble weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("ensemble weights sum to {total}, not 1")));
        }
        let d = states[0].dim();
        if let Some(s) = states.iter().find(|s| s.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: s.dim() });
        }
        Ok(Self { weights, states })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn states(&self) -> &[PureDetectorState] {
        &self.states
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `tr(ρ O) = Σ_k η_k ⟨Υ_k|O|Υ_k⟩`.
    pub fn mean(&self, op: &HermitianOperator) -> f64 {
        self.weights.iter().zip(&self.states).map(|(w, s)| w * op.expectation(s.amplitudes())).sum()
    }
}

/// Uniform periodic grid `z_j = -L + j·dz`, `dz = 2L/n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid1D {
    n_points: usize,
    half_width: f64,
}

impl Grid1D {
    pub fn new(n_points: usize, half_width: f64) -> Result<Self> {
        if n_points < 16 || !n_points.is_power_of_two() {
            return Err(Error::InvalidInput(format!("grid needs a power-of-two point count >= 16, got {n_points}")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidInput(format!("grid half-width must be > 0, got {half_width}")));
        }
        Ok(Self { n_points, half_width })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n_points as f64
    }

    /// Node coordinates; `z_{n-j} = -z_j` holds exactly.
    pub fn coordinates(&self) -> Vec<f64> {
        let dz = self.spacing();
        let mid = (self.n_points / 2) as f64;
        (0..self.n_points).map(|j| (j as f64 - mid) * dz).collect()
    }

    /// DFT-ordered wavenumbers in `(-π/dz, π/dz]`.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n_points;
        let base = 2.0 * PI / (n as f64 * self.spacing());
        (0..n)
            .map(|m| {
                let signed = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
                signed * base
            })
            .collect()
    }
}

impl fmt::Display for Grid1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "grid:n={},L={}", self.n_points, self.half_width)
    }
}

impl FromStr for Grid1D {
    type Err = Error;

    /// Parses `grid:n=4096,L=40` (the `grid:` prefix is optional).
    fn from_str(s: &str) -> Result<Self> {
        let body = s.trim().strip_prefix("grid:").unwrap_or(s.trim());
        let mut n = None;
        let mut l = None;
        for part in body.split(',') {
            let (key, value) =
                part.split_once('=').ok_or_else(|| Error::InvalidInput(format!("bad grid field '{part}'")))?;
            match key.trim() {
                "n" => {
                    n = Some(
                        value
                            .trim()
                            .parse::<usize>()
                            .map_err(|e| Error::InvalidInput(format!("bad grid point count '{value}': {e}")))?,
                    )
                }
                "L" => {
                    l = Some(
                        value
                            .trim()
                            .parse::<f64>()
                            .map_err(|e| Error::InvalidInput(format!("bad grid half-width '{value}': {e}")))?,
                    )
                }
                other => return Err(Error::InvalidInput(format!("unknown grid field '{other}'"))),
            }
        }
        match (n, l) {
            (Some(n), Some(l)) => Grid1D::new(n, l),
            _ => Err(Error::InvalidInput(format!("grid spec '{s}' needs both n and L"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DetectorFamily {
    Gaussian,
    Lorentzian,
    Exponential,
}

impl DetectorFamily {
    pub const ALL: [DetectorFamily; 3] =
        [DetectorFamily::Gaussian, DetectorFamily::Lorentzian, DetectorFamily::Exponential];

    pub fn name(&self) -> &'static str {
        match self {
            DetectorFamily::Gaussian => "gaussian",
            DetectorFamily::Lorentzian => "lorentzian",
            DetectorFamily::Exponential => "exponential",
        }
    }

    /// Largest probability mass allowed outside the grid.
    pub fn tail_tolerance(&self) -> f64 {
        match self {
            DetectorFamily::Lorentzian => 1e-4,
            _ => 1e-8,
        }
    }
}

/// One of the three symmetric pointer wavefunctions with width `K`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectorFamilySpec {
    family: DetectorFamily,
    width: f64,
}

impl DetectorFamilySpec {
    pub fn new(family: DetectorFamily, width: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::InvalidInput(format!("family width K must be > 0, got {width}")));
        }
        Ok(Self { family, width })
    }

    pub fn family(&self) -> DetectorFamily {
        self.family
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    /// Analytic wavefunction with its textbook normalization constant.
    pub fn amplitude(&self, z: f64) -> f64 {
        let k = self.width;
        match self.family {
            DetectorFamily::Gaussian => ((2.0 * PI).sqrt() * k).powf(-0.5) * (-z * z / (4.0 * k * k)).exp(),
            DetectorFamily::Lorentzian => (PI * k / 2.0).powf(-0.5) / (1.0 + (z / k).powi(2)),
            DetectorFamily::Exponential => k.powf(-0.5) * (-z.abs() / k).exp(),
        }
    }

    /// Analytic probability mass of `|ψ|²` outside `[-L, L]`.
    pub fn tail_mass(&self, half_width: f64) -> f64 {
        let u = half_width / self.width;
        match self.family {
            DetectorFamily::Gaussian => erfc(u / 2f64.sqrt()),
            DetectorFamily::Exponential => (-2.0 * u).exp(),
            DetectorFamily::Lorentzian => {
                // 1 - (2/π)(atan u + u/(1+u²)) rewritten in x = 1/u
                let x = 1.0 / u;
                let diff = if x < 1e-2 {
                    let x2 = x * x;
                    x * x2 * (2.0 / 3.0 - x2 * (4.0 / 5.0 - x2 * 6.0 / 7.0))
                } else {
                    x.atan() - x / (1.0 + x * x)
                };
                (2.0 / PI) * diff
            }
        }
    }

    /// Smallest half-width whose tail mass meets the family tolerance.
    pub fn required_half_width(&self) -> f64 {
        let tol = self.family.tail_tolerance();
        let mut hi = self.width;
        while self.tail_mass(hi) > tol {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.tail_mass(mid) > tol {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    /// Default grid: `n = 4096, L = 40K`, or `n = 8192, L = 200K` for the
    /// heavy-tailed Lorentzian.
    pub fn default_grid(&self) -> Grid1D {
        match self.family {
            DetectorFamily::Lorentzian => Grid1D::new(8192, 200.0 * self.width),
            _ => Grid1D::new(4096, 40.0 * self.width),
        }
        .expect("valid default grid")
    }
}

impl fmt::Display for DetectorFamilySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:K={}", self.family.name(), self.width)
    }
}

impl FromStr for DetectorFamilySpec {
    type Err = Error;

    /// Parses `gaussian:K=1.0`, `lorentzian:K=2`, `exponential:K=0.5`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, rest) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::InvalidInput(format!("family spec '{s}' must look like 'gaussian:K=1'")))?;
        let family = match name.trim().to_ascii_lowercase().as_str() {
            "gaussian" => DetectorFamily::Gaussian,
            "lorentzian" => DetectorFamily::Lorentzian,
            "exponential" => DetectorFamily::Exponential,
            other => return Err(Error::InvalidInput(format!("unknown detector family '{other}'"))),
        };
        let value = rest
            .trim()
            .strip_prefix("K=")
            .ok_or_else(|| Error::InvalidInput(format!("family spec '{s}' is missing 'K='")))?;
        let width =
            value.trim().parse::<f64>().map_err(|e| Error::InvalidInput(format!("bad width '{value}': {e}")))?;
        DetectorFamilySpec::new(family, width)
    }
}

/// Samples the family wavefunction on the grid nodes and renormalizes.
///
/// The node `z_0 = -L` is the periodic seam shared with `+L`; it is left at
/// zero so the sampled state is exactly even under `z -> -z`.
pub fn make_family_state(spec: &DetectorFamilySpec, grid: &Grid1D) -> Result<PureDetectorState> {
    let tail = spec.tail_mass(grid.half_width());
    let tol = spec.family().tail_tolerance();
    if tail > tol {
        return Err(Error::GridTooNarrow {
            half_width: grid.half_width(),
            tail_mass: tail,
            tolerance: tol,
            required_half_width: spec.required_half_width(),
        });
    }
    let z = grid.coordinates();
    let amps = CVector::from_iterator(
        z.len(),
        z.iter().enumerate().map(
            |(j, &zj)| {
                if j == 0 {
                    C64::new(0.0, 0.0)
                } else {
                    C64::new(spec.amplitude(zj), 0.0)
                }
            },
        ),
    );
    PureDetectorState::normalized(amps, BasisLabel::Grid)
}

/// Position observable: diagonal with entries `z_j`.
pub fn position_operator(grid: &Grid1D) -> HermitianOperator {
    HermitianOperator::from_real_diagonal(&grid.coordinates()).expect("finite grid coordinates")
}

/// Momentum observable `-i d/dz` by spectral differentiation.
///
/// The unpaired Nyquist mode gets multiplier 0, so `p` maps real states to
/// purely imaginary ones and `⟨p⟩ = 0` exactly for every real state.
pub fn momentum_operator(grid: &Grid1D) -> HermitianOperator {
    let mut k = grid.wavenumbers();
    k[grid.n_points() / 2] = 0.0;
    HermitianOperator::from_fourier_multipliers(k).expect("non-empty grid")
}

/// Detector expectation values for a coupled observable `Ω` and a readout
/// `M`, with `ΔM = M - ⟨M⟩`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    pub omega_mean: f64,
    pub omega_sq: f64,
    pub omega_var: f64,
    pub m_mean: f64,
    pub m_sq: f64,
    pub m_var: f64,
    /// `⟨{Ω, ΔM}⟩`
    pub anticommutator: f64,
    /// `⟨i[Ω, ΔM]⟩` (real; equals `-1` for `Ω = z`, `M = p`)
    pub i_commutator: f64,
    /// `⟨Ω ΔM Ω⟩`
    pub sandwich: f64,
}

pub fn moments(state: &PureDetectorState, omega: &HermitianOperator, m: &HermitianOperator) -> Result<Moments> {
    let d = state.dim();
    for op in [omega, m] {
        if op.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: op.dim() });
        }
    }
    let v = state.amplitudes();
    let u = omega.apply(v);
    let m_v = m.apply(v);
    let m_mean = v.dotc(&m_v).re;
    let dm_v = &m_v - v.scale(m_mean);
    let omega_mean = v.dotc(&u).re;
    let omega_sq = u.norm_squared();
    let cross = u.dotc(&dm_v);
    let dm_u = m.apply(&u) - u.scale(m_mean);
    Ok(Moments {
        omega_mean,
        omega_sq,
        omega_var: omega_sq - omega_mean * omega_mean,
        m_mean,
        m_sq: m_v.norm_squared(),
        m_var: dm_v.norm_squared(),
        anticommutator: 2.0 * cross.re,
        i_commutator: -2.0 * cross.im,
        sandwich: u.dotc(&dm_u).re,
    })
}
