//! Exact postselected dynamics for the impulsive coupling `exp(-i g A⊗Ω)`.
//!
//! The joint system-detector state is never formed. With `A = Σ_k a_k P_k`,
//! the postselected detector state is
//! `|Υf⟩ = Σ_k ⟨Ψf|P_k|Ψi⟩ exp(-i g a_k Ω)|Υ⟩`.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::CVector;
use crate::operators::{default_grouping_tol, eigendecompose, HermitianOperator, Propagator, SpectralData};
use crate::pointer::{moments, PureDetectorState, NORM_TOL};

pub const DEFAULT_PROB_FLOOR: f64 = 1e-14;
pub const DEFAULT_OVERLAP_FLOOR: f64 = 1e-14;

/// Coupling strength, system observable `A` and coupled detector observable
/// `Ω`, with the spectral data of `A` and a propagator for `Ω` cached.
#[derive(Clone, Debug)]
pub struct MeasurementSetup {
    g: f64,
    a: HermitianOperator,
    omega: HermitianOperator,
    spectral_a: SpectralData,
    propagator: Propagator,
}

impl MeasurementSetup {
    pub fn new(g: f64, a: HermitianOperator, omega: HermitianOperator) -> Result<Self> {
        let tol = default_grouping_tol(&a);
        Self::with_grouping_tol(g, a, omega, tol)
    }

    pub fn with_grouping_tol(
        g: f64,
        a: HermitianOperator,
        omega: HermitianOperator,
        grouping_tol: f64,
    ) -> Result<Self> {
        if !g.is_finite() {
            return Err(Error::InvalidInput(format!("coupling g must be finite, got {g}")));
        }
        let spectral_a = eigendecompose(&a, grouping_tol)?;
        let err = (spectral_a.reconstruct() - a.to_dense()).norm();
        let bound = a.dim() as f64 * grouping_tol + 1e-9;
        if err > bound {
            return Err(Error::Inconsistent(format!("spectral reconstruction of A off by {err:e} (> {bound:e})")));
        }
        let propagator = Propagator::new(&omega);
        Ok(Self { g, a, omega, spectral_a, propagator })
    }

    /// Same operators at a different coupling; reuses cached decompositions.
    pub fn with_g(&self, g: f64) -> Self {
        Self { g, ..self.clone() }
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn a(&self) -> &HermitianOperator {
        &self.a
    }

    pub fn omega(&self) -> &HermitianOperator {
        &self.omega
    }

    pub fn spectral_a(&self) -> &SpectralData {
        &self.spectral_a
    }

    pub fn system_dim(&self) -> usize {
        self.a.dim()
    }

    pub fn detector_dim(&self) -> usize {
        self.omega.dim()
    }

    /// `exp(-i g a_k Ω) v` for the `k`-th distinct eigenvalue of `A`.
    pub fn kick(&self, k: usize, v: &CVector) -> CVector {
        self.propagator.apply(self.g * self.spectral_a.values()[k], v)
    }

    /// `exp(-i t Ω) v`.
    pub fn propagate(&self, t: f64, v: &CVector) -> CVector {
        self.propagator.apply(t, v)
    }
}

/// Pre- and postselected system states.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionPair {
    initial: CVector,
    final_: CVector,
}

impl SelectionPair {
    pub fn new(initial: CVector, final_: CVector) -> Result<Self> {
        if initial.len() != final_.len() {
            return Err(Error::DimensionMismatch { expected: initial.len(), found: final_.len() });
        }
        for v in [&initial, &final_] {
            let n = v.norm();
            if !((n - 1.0).abs() <= NORM_TOL) {
                return Err(Error::InvalidInput(format!("selection state norm {n} is not 1")));
            }
        }
        Ok(Self { initial, final_ })
    }

    /// Normalizes both states first.
    pub fn normalized(initial: CVector, final_: CVector) -> Result<Self> {
        let ni = initial.norm();
        let nf = final_.norm();
        if !(ni > 0.0 && nf > 0.0 && ni.is_finite() && nf.is_finite()) {
            return Err(Error::InvalidInput("selection state has zero or non-finite norm".into()));
        }
        Self::new(initial.unscale(ni), final_.unscale(nf))
    }

    pub fn initial(&self) -> &CVector {
        &self.initial
    }

    pub fn final_state(&self) -> &CVector {
        &self.final_
    }

    pub fn dim(&self) -> usize {
        self.initial.len()
    }

    /// `⟨Ψf|Ψi⟩`.
    pub fn overlap(&self) -> C64 {
        self.final_.dotc(&self.initial)
    }
}

#[derive(Clone, Debug)]
pub struct Postselected {
    /// Unnormalized postselected detector state `|Υf⟩`.
    pub detector: CVector,
    /// `⟨Υf|Υf⟩`.
    pub probability: f64,
}

/// `⟨Ψf|P_k|Ψi⟩` for each distinct eigenvalue of `A`.
pub fn branch_amplitudes(spectral_a: &SpectralData, sel: &SelectionPair) -> Vec<C64> {
    spectral_a.bases().iter().map(|b| b.ad_mul(sel.final_state()).dotc(&b.ad_mul(sel.initial()))).collect()
}

pub fn evolve_postselect(
    setup: &MeasurementSetup,
    sel: &SelectionPair,
    upsilon: &PureDetectorState,
) -> Result<Postselected> {
    if sel.dim() != setup.system_dim() {
        return Err(Error::DimensionMismatch { expected: setup.system_dim(), found: sel.dim() });
    }
    if upsilon.dim() != setup.detector_dim() {
        return Err(Error::DimensionMismatch { expected: setup.detector_dim(), found: upsilon.dim() });
    }
    let v = upsilon.amplitudes();
    let mut out = CVector::zeros(v.len());
    for (k, c) in branch_amplitudes(&setup.spectral_a, sel).into_iter().enumerate() {
        if c != C64::new(0.0, 0.0) {
            out.axpy(c, &setup.kick(k, v), C64::new(1.0, 0.0));
        }
    }
    let probability = out.norm_squared();
    Ok(Postselected { detector: out, probability })
}

/// `⟨Υf|ΔM|Υf⟩ / ⟨Υf|Υf⟩` with `ΔM = M - ⟨Υ|M|Υ⟩`.
pub fn mean_shift(upsilon_f: &CVector, m: &HermitianOperator, upsilon: &PureDetectorState) -> Result<f64> {
    mean_shift_with_floor(upsilon_f, m, upsilon, DEFAULT_PROB_FLOOR)
}

pub fn mean_shift_with_floor(
    upsilon_f: &CVector,
    m: &HermitianOperator,
    upsilon: &PureDetectorState,
    prob_floor: f64,
) -> Result<f64> {
    let d = m.dim();
    for found in [upsilon_f.len(), upsilon.dim()] {
        if found != d {
            return Err(Error::DimensionMismatch { expected: d, found });
        }
    }
    let norm2 = upsilon_f.norm_squared();
    if !(norm2 > prob_floor) {
        return Err(Error::VanishingProbability { probability: norm2, floor: prob_floor });
    }
    let offset = m.expectation(upsilon.amplitudes());
    // normalize first so the quadratic form is O(1) for tiny probabilities
    let unit = upsilon_f.unscale(norm2.sqrt());
    Ok(m.expectation(&unit) - offset)
}

/// `A_w = ⟨Ψf|A|Ψi⟩ / ⟨Ψf|Ψi⟩`.
pub fn weak_value(sel: &SelectionPair, a: &HermitianOperator) -> Result<C64> {
    weak_value_with_floor(sel, a, DEFAULT_OVERLAP_FLOOR)
}

pub fn weak_value_with_floor(sel: &SelectionPair, a: &HermitianOperator, overlap_floor: f64) -> Result<C64> {
    if sel.dim() != a.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: sel.dim() });
    }
    let overlap = sel.overlap();
    if !(overlap.norm() > overlap_floor) {
        return Err(Error::VanishingOverlap { overlap: overlap.norm(), floor: overlap_floor });
    }
    Ok(sel.final_state().dotc(&a.apply(sel.initial())) / overlap)
}

/// Linear-response shift
/// `g Im A_w (⟨{Ω,M}⟩ - 2⟨Ω⟩⟨M⟩) + i g Re A_w ⟨[Ω,M]⟩`.
pub fn first_order_shift(
    aw: C64,
    g: f64,
    upsilon: &PureDetectorState,
    omega: &HermitianOperator,
    m: &HermitianOperator,
) -> Result<f64> {
    let mo = moments(upsilon, omega, m)?;
    // i⟨[Ω,M]⟩ = ⟨i[Ω,ΔM]⟩ is real
    Ok(g * (aw.im * mo.anticommutator + aw.re * mo.i_commutator))
}
