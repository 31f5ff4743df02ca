//! Variational amplification limit.
//!
//! Every postselected detector state lies in the span `H_D` of the columns
//! `exp(-i g a_k Ω)|Υ⟩`, and for small `g` approximately in the Krylov span of
//! `|Υ⟩, Ω|Υ⟩, …, Ω^{r_A-1}|Υ⟩`. The extremal mean shifts are the eigenvalues
//! of `ΔM` compressed to that span:
//! `(Ξ†Ξ)^{-1/2} Ξ†ΔMΞ (Ξ†Ξ)^{-1/2}`.
//!
//! Spans are stored as an orthonormal basis `Q` plus upper-triangular
//! coordinates `R` of the generating columns (`Ξ = Q R`). Compressing onto `Q`
//! solves the generalized problem on the numerical support without forming
//! `Ξ†Ξ`, so its conditioning enters only linearly.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    condition_number, hermitian_eigen, hermitize, independent_subset, orthogonalize, singular_values, thin_qr, CMatrix,
    CVector,
};
use crate::operators::{distinct_count, HermitianOperator, SpectralData};
use crate::pointer::{moments, DetectorEnsemble, Grid1D, PureDetectorState};
use crate::pointer::{momentum_operator, position_operator};
use crate::weakmeas::{MeasurementSetup, SelectionPair};

/// Default relative rank threshold for span pruning.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Whitening condition number above which results carry a warning.
pub const ILL_CONDITIONED: f64 = 1e12;

/// Smallest `⟨ΔΩ²⟩` accepted by the two-dimensional closed forms.
pub const MIN_DETECTOR_VARIANCE: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpanKind {
    FiniteG { g: f64 },
    Tilde,
}

impl SpanKind {
    pub fn name(&self) -> &'static str {
        match self {
            SpanKind::FiniteG { .. } => "finite_g",
            SpanKind::Tilde => "tilde",
        }
    }

    pub fn g(&self) -> Option<f64> {
        match self {
            SpanKind::FiniteG { g } => Some(*g),
            SpanKind::Tilde => None,
        }
    }
}

/// Reachable final-detector subspace with its generating columns.
#[derive(Clone, Debug)]
pub struct SpanMatrix {
    basis: CMatrix,
    coords: CMatrix,
    column_scales: Vec<f64>,
    kind: SpanKind,
    rank_tol: f64,
    retained: Vec<usize>,
    candidates: usize,
}

impl SpanMatrix {
    pub fn kind(&self) -> SpanKind {
        self.kind
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    /// Candidate columns that survived pruning, ascending.
    pub fn retained_indices(&self) -> &[usize] {
        &self.retained
    }

    pub fn candidates(&self) -> usize {
        self.candidates
    }

    /// Length of each column (the detector dimension, or the stacked
    /// dimension for ensembles).
    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Orthonormal basis of the column space.
    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    /// Upper-triangular `R` with `columns() = basis() · R`.
    pub fn coords(&self) -> &CMatrix {
        &self.coords
    }

    /// Norms of the unnormalized generating columns (`‖Ωʲ|Υ⟩‖` for the tilde
    /// kind, 1 for the finite-g kind).
    pub fn column_scales(&self) -> &[f64] {
        &self.column_scales
    }

    /// The retained generating columns.
    pub fn columns(&self) -> CMatrix {
        &self.basis * &self.coords
    }

    /// Condition number of `(Ξ†Ξ)^{1/2}`.
    pub fn whiten_condition(&self) -> f64 {
        if self.rank() == 0 {
            return 1.0;
        }
        condition_number(&self.coords)
    }
}

/// Candidate columns `exp(-i g a_k Ω)|Υ⟩`, pruned to a maximal numerically
/// independent subset.
pub fn build_xi_g(setup: &MeasurementSetup, upsilon: &PureDetectorState, rank_tol: f64) -> Result<SpanMatrix> {
    check_rank_tol(rank_tol)?;
    if setup.g() == 0.0 {
        return Err(Error::InvalidInput("finite-g span needs g != 0".into()));
    }
    if upsilon.dim() != setup.detector_dim() {
        return Err(Error::DimensionMismatch { expected: setup.detector_dim(), found: upsilon.dim() });
    }
    let r = distinct_count(setup.spectral_a());
    let columns: Vec<CVector> = (0..r).map(|k| setup.kick(k, upsilon.amplitudes())).collect();
    let retained = independent_subset(&columns, rank_tol);
    let kept: Vec<CVector> = retained.iter().map(|&k| columns[k].clone()).collect();
    let (basis, coords) = thin_qr(&kept);
    Ok(SpanMatrix {
        basis,
        coords,
        column_scales: vec![1.0; retained.len()],
        kind: SpanKind::FiniteG { g: setup.g() },
        rank_tol,
        retained,
        candidates: r,
    })
}

/// Krylov span of `|Υ⟩, Ω|Υ⟩, …, Ω^{r_A-1}|Υ⟩` with normalized power
/// columns.
///
/// The basis is built by Arnoldi with full reorthogonalization; iteration
/// stops once the new direction is below `rank_tol` relative to the larger
/// of `‖Ω q‖` and the largest entry of `Ω`.
/// Krylov spans are nested, so the surviving columns are always a prefix.
pub fn build_xi_tilde(
    omega: &HermitianOperator,
    upsilon: &PureDetectorState,
    r_a: usize,
    rank_tol: f64,
) -> Result<SpanMatrix> {
    if omega.dim() != upsilon.dim() {
        return Err(Error::DimensionMismatch { expected: omega.dim(), found: upsilon.dim() });
    }
    krylov_span(|v| omega.apply(v), upsilon.amplitudes(), r_a, rank_tol, omega.max_abs_entry())
}

fn check_rank_tol(rank_tol: f64) -> Result<()> {
    if !(rank_tol > 0.0 && rank_tol < 1.0) {
        return Err(Error::InvalidInput(format!("rank_tol must lie in (0, 1), got {rank_tol}")));
    }
    Ok(())
}

fn krylov_span(
    apply: impl Fn(&CVector) -> CVector,
    start: &CVector,
    r_a: usize,
    rank_tol: f64,
    op_floor: f64,
) -> Result<SpanMatrix> {
    check_rank_tol(rank_tol)?;
    if r_a == 0 {
        return Err(Error::InvalidInput("r_A must be >= 1".into()));
    }
    let start_norm = start.norm();
    if !(start_norm > 0.0) {
        return Err(Error::InvalidInput("span start vector is zero".into()));
    }
    let mut basis = vec![start.unscale(start_norm)];
    // hess[j] = coefficients of Ω q_j in q_0..q_{j+1}
    let mut hess: Vec<Vec<C64>> = Vec::new();
    let mut op_scale = op_floor;
    while basis.len() < r_a {
        let mut w = apply(basis.last().unwrap());
        op_scale = op_scale.max(w.norm());
        let mut col = orthogonalize(&mut w, &basis);
        let beta = w.norm();
        if !(beta > rank_tol * op_scale) {
            break;
        }
        col.push(C64::new(beta, 0.0));
        hess.push(col);
        basis.push(w.unscale(beta));
    }

    let m = basis.len();
    let mut coords = CMatrix::zeros(m, m);
    let mut scales = Vec::with_capacity(m);
    let mut p = CVector::zeros(m);
    p[0] = C64::new(1.0, 0.0);
    let mut scale = start_norm;
    for j in 0..m {
        if j > 0 {
            let mut next = CVector::zeros(m);
            for (i, h) in hess.iter().enumerate().take(j) {
                for (l, &hl) in h.iter().enumerate() {
                    next[l] += hl * p[i];
                }
            }
            let n = next.norm();
            if !(n > 0.0) {
                return Err(Error::Singular("power column vanished inside the Krylov span".into()));
            }
            scale *= n;
            p = next.unscale(n);
        }
        coords.set_column(j, &p);
        scales.push(scale);
    }
    Ok(SpanMatrix {
        basis: CMatrix::from_columns(&basis),
        coords,
        column_scales: scales,
        kind: SpanKind::Tilde,
        rank_tol,
        retained: (0..m).collect(),
        candidates: r_a,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct AmplificationResult {
    /// `|⟨ΔM⟩|max`.
    pub limit: f64,
    /// The signed extremum attaining `limit` (the larger one on a tie).
    pub extremum: f64,
    /// All extremal shifts `⟨ΔM⟩_e`, ascending.
    pub extrema: Vec<f64>,
    /// Coefficients of the extremal state in the generating columns.
    #[serde(skip)]
    pub mu: CVector,
    /// The same state in the orthonormal basis.
    #[serde(skip)]
    pub whitened: CVector,
    pub whiten_condition: f64,
    pub kind: SpanKind,
    pub rank: usize,
    /// `‖(W - λ)v‖` at the returned extremum.
    pub residual: f64,
    pub warnings: Vec<String>,
}

fn conditioning_warnings(cond: f64) -> Vec<String> {
    if cond > ILL_CONDITIONED {
        vec![format!("span metric is ill-conditioned (condition number {cond:e})")]
    } else {
        Vec::new()
    }
}

/// `Q† ΔM Q` with `ΔM = M - offset`, applied blockwise when the span is
/// stacked over `blocks` equal detector copies.
fn compressed(span: &SpanMatrix, m: &HermitianOperator, offset: f64, blocks: usize) -> CMatrix {
    let q = &span.basis;
    let d = m.dim();
    let mut mq = CMatrix::zeros(q.nrows(), q.ncols());
    for j in 0..q.ncols() {
        let col = q.column(j);
        for b in 0..blocks {
            let piece: CVector = col.rows(b * d, d).into_owned();
            let out = m.apply(&piece) - piece.scale(offset);
            mq.view_mut((b * d, j), (d, 1)).copy_from(&out);
        }
    }
    hermitize(&q.ad_mul(&mq))
}

fn solve_compressed(span: &SpanMatrix, w: CMatrix) -> Result<AmplificationResult> {
    if span.rank() == 0 {
        return Err(Error::InvalidInput("empty span".into()));
    }
    let (values, vectors) = hermitian_eigen(&w);
    let lo = values[0];
    let hi = *values.last().unwrap();
    let idx = if -lo > hi { 0 } else { values.len() - 1 };
    let lambda = values[idx];
    let v: CVector = vectors.column(idx).into_owned();
    let residual = (&w * &v - v.scale(lambda)).norm();
    let mu = span
        .coords
        .solve_upper_triangular(&v)
        .ok_or_else(|| Error::Singular("span coordinates are not invertible".into()))?;
    let cond = span.whiten_condition();
    Ok(AmplificationResult {
        limit: lambda.abs(),
        extremum: lambda,
        extrema: values,
        mu,
        whitened: v,
        whiten_condition: cond,
        kind: span.kind,
        rank: span.rank(),
        residual,
        warnings: conditioning_warnings(cond),
    })
}

/// Largest `|⟨ΔM⟩|` over the span, with `ΔM = M - ⟨Υ|M|Υ⟩`.
pub fn amplification_limit(
    span: &SpanMatrix,
    m: &HermitianOperator,
    upsilon: &PureDetectorState,
) -> Result<AmplificationResult> {
    if m.dim() != span.dim() || upsilon.dim() != span.dim() {
        return Err(Error::DimensionMismatch { expected: span.dim(), found: m.dim().min(upsilon.dim()) });
    }
    let offset = m.expectation(upsilon.amplitudes());
    solve_compressed(span, compressed(span, m, offset, 1))
}

#[derive(Clone, Debug, Serialize)]
pub struct GelfandEstimate {
    pub estimate: f64,
    pub n: u32,
    pub whiten_condition: f64,
    pub warnings: Vec<String>,
}

/// `|tr(Gⁿ)|^{1/n}` for a power-of-two `n` by normalized repeated squaring.
pub fn trace_power_root(g: &CMatrix, n: u32) -> Result<f64> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::InvalidInput(format!("n must be a power of two >= 1, got {n}")));
    }
    if g.nrows() != g.ncols() || g.nrows() == 0 {
        return Err(Error::InvalidInput("trace power needs a non-empty square matrix".into()));
    }
    // Gⁿ = X · exp(log_scale), renormalizing X after every squaring
    let mut x = g.clone();
    let mut log_scale = 0.0_f64;
    let mut power = 1u32;
    while power < n {
        let s = x.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if s == 0.0 {
            return Ok(0.0);
        }
        x.unscale_mut(s);
        log_scale += s.ln();
        x = &x * &x;
        log_scale *= 2.0;
        power *= 2;
    }
    let tr = x.trace().norm();
    if tr == 0.0 {
        return Ok(0.0);
    }
    Ok(((tr.ln() + log_scale) / n as f64).exp())
}

/// Trace-norm Gelfand estimate of the amplification limit,
/// `tr((Ξ†ΔMΞ (Ξ†Ξ)⁻¹)ⁿ)^{1/n}` on the numerical support.
pub fn gelfand_estimate(
    span: &SpanMatrix,
    m: &HermitianOperator,
    upsilon: &PureDetectorState,
    n: u32,
) -> Result<GelfandEstimate> {
    if m.dim() != span.dim() || upsilon.dim() != span.dim() {
        return Err(Error::DimensionMismatch { expected: span.dim(), found: m.dim().min(upsilon.dim()) });
    }
    if span.rank() == 0 {
        return Err(Error::InvalidInput("empty span".into()));
    }
    // G is similar to the compressed matrix, so the traces of powers agree
    let offset = m.expectation(upsilon.amplitudes());
    let w = compressed(span, m, offset, 1);
    let cond = span.whiten_condition();
    Ok(GelfandEstimate {
        estimate: trace_power_root(&w, n)?,
        n,
        whiten_condition: cond,
        warnings: conditioning_warnings(cond),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SubspaceDimension {
    pub analytic: usize,
    pub numerical: usize,
}

/// Dimension of the reachable detector subspace: `min(r_A, n)` where `n`
/// counts eigenspaces of `Ω` with support weight above `support_tol`,
/// cross-checked against the numerical rank of the Krylov span.
pub fn subspace_dimension(
    spectral_a: &SpectralData,
    spectral_omega: &SpectralData,
    upsilon: &PureDetectorState,
    support_tol: f64,
) -> Result<SubspaceDimension> {
    if !(support_tol > 0.0) {
        return Err(Error::InvalidInput(format!("support_tol must be > 0, got {support_tol}")));
    }
    if spectral_omega.dim() != upsilon.dim() {
        return Err(Error::DimensionMismatch { expected: spectral_omega.dim(), found: upsilon.dim() });
    }
    let r_a = distinct_count(spectral_a);
    let supported = spectral_omega.support_weights(upsilon.amplitudes()).iter().filter(|&&c| c > support_tol).count();
    let analytic = r_a.min(supported);
    let omega = HermitianOperator::from_dense(spectral_omega.reconstruct())?;
    let numerical = build_xi_tilde(&omega, upsilon, r_a, DEFAULT_RANK_TOL)?.rank();
    if analytic != numerical {
        return Err(Error::Inconsistent(format!(
            "subspace dimension: analytic {analytic} != numerical rank {numerical}"
        )));
    }
    Ok(SubspaceDimension { analytic, numerical })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpanDistance {
    /// Largest principal angle in radians.
    pub angle: f64,
    pub rank_mismatch: bool,
}

/// Largest principal angle between two column spaces.
pub fn span_distance(a: &SpanMatrix, b: &SpanMatrix) -> Result<SpanDistance> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    if a.rank() != b.rank() {
        return Ok(SpanDistance { angle: FRAC_PI_2, rank_mismatch: true });
    }
    if a.rank() == 0 {
        return Ok(SpanDistance { angle: 0.0, rank_mismatch: false });
    }
    let cross = a.basis.ad_mul(&b.basis);
    // sin from the residual, cos from the overlap: accurate for small and
    // large angles alike
    let residual = &b.basis - &a.basis * &cross;
    let sin = singular_values(&residual)[0];
    let cos = *singular_values(&cross).last().unwrap();
    Ok(SpanDistance { angle: sin.atan2(cos), rank_mismatch: false })
}

/// Two-dimensional (`r_A = 2`) closed form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QubitClosedForm {
    pub w: f64,
    pub limit: f64,
    pub upper_bound: f64,
}

/// `|⟨ΔM⟩|max = W / 2⟨ΔΩ²⟩` with
/// `W = |B| + √(B² + ⟨ΔΩ²⟩(⟨{Ω,ΔM}⟩² - ⟨[Ω,ΔM]⟩²))`,
/// `B = ⟨Ω⟩⟨{Ω,ΔM}⟩ - ⟨ΩΔMΩ⟩`, and the bound `|B|/⟨ΔΩ²⟩ + √⟨ΔM²⟩`.
pub fn qubit_closed_form(
    omega: &HermitianOperator,
    m: &HermitianOperator,
    upsilon: &PureDetectorState,
) -> Result<QubitClosedForm> {
    let mo = moments(upsilon, omega, m)?;
    let var = mo.omega_var;
    if !(var > MIN_DETECTOR_VARIANCE) {
        return Err(Error::DegenerateDetector { variance: var });
    }
    let b = mo.omega_mean * mo.anticommutator - mo.sandwich;
    // ⟨[Ω,ΔM]⟩² = -⟨i[Ω,ΔM]⟩²
    let disc = b * b + var * (mo.anticommutator.powi(2) + mo.i_commutator.powi(2));
    let w = b.abs() + disc.sqrt();
    Ok(QubitClosedForm { w, limit: w / (2.0 * var), upper_bound: b.abs() / var + mo.m_var.sqrt() })
}

/// `|⟨Δz⟩|max · |⟨Δp⟩|max` for `Ω = z` on the grid.
pub fn complementarity_product(upsilon: &PureDetectorState, grid: &Grid1D) -> Result<f64> {
    let z = position_operator(grid);
    let p = momentum_operator(grid);
    Ok(qubit_closed_form(&z, &z, upsilon)?.limit * qubit_closed_form(&z, &p, upsilon)?.limit)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct UncertaintyCheck {
    pub limit: f64,
    /// `√⟨ΔM²⟩`.
    pub bound: f64,
    pub holds: bool,
}

/// Compares the two-dimensional limit with `√⟨ΔM²⟩` (tolerance 1e-9).
pub fn uncertainty_bound_check(
    omega: &HermitianOperator,
    m: &HermitianOperator,
    upsilon: &PureDetectorState,
) -> Result<UncertaintyCheck> {
    let limit = qubit_closed_form(omega, m, upsilon)?.limit;
    let bound = moments(upsilon, omega, m)?.m_var.sqrt();
    Ok(UncertaintyCheck { limit, bound, holds: limit <= bound + 1e-9 })
}

/// Mixed-detector limit.
///
/// All members share the coefficient vector, so the generating columns are
/// the stacked vectors `(√η_k Ωʲ|Υ_k⟩)_k`, i.e. a Krylov span of the
/// block-diagonal `Ω` started at `(√η_k |Υ_k⟩)_k`. The compressed matrix is
/// `Σ_k η_k Ξ_k† ΔM Ξ_k` in the metric `Σ_k η_k Ξ_k† Ξ_k`, with
/// `ΔM = M - tr(ρ M)`.
pub fn mixed_amplification_limit(
    ensemble: &DetectorEnsemble,
    omega: &HermitianOperator,
    m: &HermitianOperator,
    r_a: usize,
    rank_tol: f64,
) -> Result<AmplificationResult> {
    let d = ensemble.dim();
    for op in [omega, m] {
        if op.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: op.dim() });
        }
    }
    let blocks = ensemble.len();
    let mut start = CVector::zeros(d * blocks);
    for (b, (w, s)) in ensemble.weights().iter().zip(ensemble.states()).enumerate() {
        start.rows_mut(b * d, d).copy_from(&s.amplitudes().scale(w.sqrt()));
    }
    let block_apply = |v: &CVector| {
        let mut out = CVector::zeros(v.len());
        for b in 0..blocks {
            let piece: CVector = v.rows(b * d, d).into_owned();
            out.rows_mut(b * d, d).copy_from(&omega.apply(&piece));
        }
        out
    };
    let span = krylov_span(block_apply, &start, r_a, rank_tol, omega.max_abs_entry())?;
    let offset = ensemble.mean(m);
    solve_compressed(&span, compressed(&span, m, offset, blocks))
}

/// `Σ_k η_k |⟨ΔM⟩|max^{(k)}` over pure tilde limits of the members.
pub fn ensemble_average_bound(
    ensemble: &DetectorEnsemble,
    omega: &HermitianOperator,
    m: &HermitianOperator,
    r_a: usize,
    rank_tol: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for (w, s) in ensemble.weights().iter().zip(ensemble.states()) {
        total += w * amplification_limit(&build_xi_tilde(omega, s, r_a, rank_tol)?, m, s)?.limit;
    }
    Ok(total)
}

/// Pre- and postselections realizing the result's extremal state.
///
/// Tilde coefficients are first mapped to the `exp(-i g a_k Ω)|Υ⟩` columns
/// through the truncated Taylor transform `T_jk = (-i g a_k)ʲ / j!`. The
/// factorization `μ_k = β_k* α_k` uses uniform `α_k`.
pub fn recover_selections(
    result: &AmplificationResult,
    span: &SpanMatrix,
    setup: &MeasurementSetup,
) -> Result<SelectionPair> {
    let spectral = setup.spectral_a();
    let r = distinct_count(spectral);
    if result.mu.len() != span.rank() {
        return Err(Error::DimensionMismatch { expected: span.rank(), found: result.mu.len() });
    }
    let mu_g = match span.kind {
        SpanKind::FiniteG { .. } => {
            if span.candidates != r {
                return Err(Error::DimensionMismatch { expected: r, found: span.candidates });
            }
            let mut full = CVector::zeros(r);
            for (c, &k) in result.mu.iter().zip(&span.retained) {
                full[k] = *c;
            }
            full
        }
        SpanKind::Tilde => {
            let g = setup.g();
            if g == 0.0 {
                return Err(Error::InvalidInput("recovering selections needs g != 0".into()));
            }
            if span.rank() > r {
                return Err(Error::DimensionMismatch { expected: r, found: span.rank() });
            }
            // coefficients of the unnormalized powers Ωʲ|Υ⟩, divided by
            // (-i g)ʲ / j! so that the remaining system is Vandermonde in a_k
            let mut rhs = CVector::zeros(r);
            let mut factor = C64::new(1.0, 0.0);
            for j in 0..r {
                if j > 0 {
                    factor *= C64::new(0.0, -g) / j as f64;
                }
                if j < span.rank() {
                    rhs[j] = result.mu[j] / span.column_scales[j] / factor;
                }
            }
            let vandermonde = CMatrix::from_fn(r, r, |j, k| C64::new(spectral.values()[k].powi(j as i32), 0.0));
            vandermonde
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::Singular("Taylor transform is singular (repeated eigenvalues)".into()))?
        }
    };
    let scale = mu_g.norm();
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Singular("extremal coefficients vanish".into()));
    }
    let alpha = 1.0 / (r as f64).sqrt();
    let ds = setup.system_dim();
    let mut initial = CVector::zeros(ds);
    let mut final_ = CVector::zeros(ds);
    for (k, b) in spectral.bases().iter().enumerate() {
        let e = b.column(0);
        initial += e * C64::new(alpha, 0.0);
        final_ += e * ((mu_g[k] / scale).conj() * (r as f64).sqrt());
    }
    SelectionPair::normalized(initial, final_)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::unit;
    use crate::operators::{eigendecompose, ladder, sigma_z};
    use crate::pointer::{make_family_state, BasisLabel, DetectorFamilySpec};
    use crate::random::{haar_state, hermitian_with_spectrum, random_hermitian, rng, InstanceRng};
    use crate::weakmeas::{evolve_postselect, mean_shift_with_floor};
    use proptest::prelude::*;
    use rand::Rng;

    fn state(v: CVector) -> PureDetectorState {
        PureDetectorState::normalized(v, BasisLabel::Abstract).unwrap()
    }

    fn grid_state(family: &str, n: usize, l: f64) -> (Grid1D, PureDetectorState) {
        let g = Grid1D::new(n, l).unwrap();
        let spec: DetectorFamilySpec = family.parse().unwrap();
        (g, make_family_state(&spec, &g).unwrap())
    }

    fn random_system(r: &mut InstanceRng, ds: usize) -> HermitianOperator {
        let spectrum: Vec<f64> = (0..ds).map(|_| r.random_range(-1.0..1.0)).collect();
        hermitian_with_spectrum(r, &spectrum)
    }

    fn shift_of(setup: &MeasurementSetup, sel: &SelectionPair, up: &PureDetectorState, m: &HermitianOperator) -> f64 {
        let yf = evolve_postselect(setup, sel, up).unwrap().detector;
        mean_shift_with_floor(&yf, m, up, 1e-300).unwrap()
    }

    #[test]
    fn xi_g_rank_examples() {
        let (g, up) = grid_state("gaussian:K=1", 1024, 16.0);
        let z = position_operator(&g);
        let setup = MeasurementSetup::new(1e-3, ladder(4).unwrap(), z.clone()).unwrap();
        assert_eq!(build_xi_g(&setup, &up, 1e-10).unwrap().rank(), 4);

        let eig = state(unit(1024, 300));
        assert_eq!(build_xi_g(&setup, &eig, 1e-10).unwrap().rank(), 1);

        let qubit = MeasurementSetup::new(1e-3, sigma_z(), z).unwrap();
        let span = build_xi_g(&qubit, &up, 1e-10).unwrap();
        assert_eq!(span.rank(), 2);
        assert_eq!(span.retained_indices(), &[0, 1]);

        let mut r = rng(2);
        let small = MeasurementSetup::new(0.3, ladder(4).unwrap(), random_hermitian(&mut r, 2)).unwrap();
        let up2 = state(haar_state(&mut r, 2));
        assert!(build_xi_g(&small, &up2, 1e-10).unwrap().rank() <= 2);
        assert!(build_xi_g(&small.with_g(0.0), &up2, 1e-10).is_err());
    }

    #[test]
    fn xi_tilde_rank_examples() {
        let (g, up) = grid_state("gaussian:K=1", 1024, 16.0);
        let z = position_operator(&g);
        let one = build_xi_tilde(&z, &up, 1, 1e-10).unwrap();
        assert_eq!(one.rank(), 1);
        assert!((one.columns().column(0) - up.amplitudes()).norm() < 1e-14);
        assert_eq!(build_xi_tilde(&z, &up, 2, 1e-10).unwrap().rank(), 2);

        // support on exactly three eigenspaces of a degenerate Ω
        let omega = HermitianOperator::from_real_diagonal(&[0.0, 0.0, 1.0, 1.0, 2.0, 3.0]).unwrap();
        let v = CVector::from_vec([1.0, 0.5, -0.3, 0.0, 0.7, 0.0].iter().map(|&x| C64::new(x, 0.1 * x)).collect());
        assert_eq!(build_xi_tilde(&omega, &state(v), 5, 1e-10).unwrap().rank(), 3);

        // Υ in the kernel of a rotated Ω: rounding noise must not add rank
        let mut r = rng(21);
        let rotated = hermitian_with_spectrum(&mut r, &[0.0, 0.0, 1.0, 2.0]);
        let (values, vectors) = hermitian_eigen(&rotated.to_dense());
        let k = values.iter().position(|v| v.abs() < 1e-9).unwrap();
        let kernel = state(vectors.column(k).into_owned());
        assert_eq!(build_xi_tilde(&rotated, &kernel, 4, 1e-10).unwrap().rank(), 1);
    }

    #[test]
    fn tilde_columns_are_normalized_powers() {
        let mut r = rng(8);
        let omega = random_hermitian(&mut r, 5);
        let up = state(haar_state(&mut r, 5));
        let span = build_xi_tilde(&omega, &up, 4, 1e-10).unwrap();
        let cols = span.columns();
        let mut p = up.amplitudes().clone();
        for j in 0..4 {
            let want = p.unscale(p.norm());
            assert!((cols.column(j) - &want).norm() < 1e-12, "column {j}");
            assert!((span.column_scales()[j] - p.norm()).abs() < 1e-12 * p.norm());
            p = omega.apply(&p);
        }
    }

    #[test]
    fn rank_one_span_has_zero_limit() {
        let (g, up) = grid_state("gaussian:K=1", 1024, 16.0);
        let z = position_operator(&g);
        let span = build_xi_tilde(&z, &up, 1, 1e-10).unwrap();
        let res = amplification_limit(&span, &z, &up).unwrap();
        assert!(res.limit.abs() < 1e-14);
        assert_eq!(res.extrema.len(), 1);
    }

    #[test]
    fn symmetric_position_limit_is_standard_deviation() {
        let (g, up) = grid_state("gaussian:K=1.5", 2048, 30.0);
        let z = position_operator(&g);
        let res = amplification_limit(&build_xi_tilde(&z, &up, 2, 1e-10).unwrap(), &z, &up).unwrap();
        let sd = moments(&up, &z, &z).unwrap().m_var.sqrt();
        assert!((res.limit - sd).abs() < 1e-10);
        assert!((res.extrema[0] + sd).abs() < 1e-10);
        assert!(res.residual < 1e-9);
        assert!(res.warnings.is_empty());
    }

    #[test]
    fn whitened_vector_has_unit_metric_norm() {
        let mut r = rng(4);
        let omega = random_hermitian(&mut r, 6);
        let m = random_hermitian(&mut r, 6);
        let up = state(haar_state(&mut r, 6));
        let span = build_xi_tilde(&omega, &up, 3, 1e-10).unwrap();
        let res = amplification_limit(&span, &m, &up).unwrap();
        let x = span.columns() * &res.mu;
        assert!((x.norm() - 1.0).abs() < 1e-10);
        let dm = m.shifted(-m.expectation(up.amplitudes()));
        assert!((dm.expectation(&x) - res.extremum).abs() < 1e-10);
    }

    #[test]
    fn closed_form_grid_examples() {
        let (g, up) = grid_state("gaussian:K=1", 4096, 40.0);
        let z = position_operator(&g);
        let p = momentum_operator(&g);
        let zz = qubit_closed_form(&z, &z, &up).unwrap();
        assert!((zz.limit - 1.0).abs() < 1e-6);
        assert!((zz.upper_bound - zz.limit).abs() < 1e-9);
        let zp = qubit_closed_form(&z, &p, &up).unwrap();
        let mo = moments(&up, &z, &p).unwrap();
        let want = 0.5 * ((1.0 + mo.anticommutator.powi(2)) / moments(&up, &z, &z).unwrap().m_var).sqrt();
        assert!((zp.limit - want).abs() < 1e-12);
        assert!((zp.limit - 0.5).abs() < 1e-6);
    }

    #[test]
    fn closed_form_rejects_eigenstate() {
        let g = Grid1D::new(64, 4.0).unwrap();
        let z = position_operator(&g);
        let up = state(unit(64, 10));
        assert!(matches!(qubit_closed_form(&z, &z, &up), Err(Error::DegenerateDetector { .. })));
    }

    #[test]
    fn closed_form_matches_eigen_solver_on_random_qubits() {
        let mut r = rng(17);
        for _ in 0..100 {
            let d = r.random_range(2..=12);
            let omega = random_hermitian(&mut r, d);
            let m = random_hermitian(&mut r, d);
            let up = state(haar_state(&mut r, d));
            let cf = qubit_closed_form(&omega, &m, &up).unwrap();
            let res = amplification_limit(&build_xi_tilde(&omega, &up, 2, 1e-10).unwrap(), &m, &up).unwrap();
            assert!((cf.limit - res.limit).abs() <= 1e-9 * res.limit.max(1e-300));
            assert!(cf.limit <= cf.upper_bound + 1e-10);
        }
    }

    #[test]
    fn complementarity_examples() {
        let (g, up) = grid_state("gaussian:K=0.8", 4096, 40.0);
        assert!((complementarity_product(&up, &g).unwrap() - 0.5).abs() < 1e-6);

        let c = 0.3;
        let chirped = state(CVector::from_iterator(
            4096,
            g.coordinates().iter().zip(up.amplitudes().iter()).map(|(&z, &a)| a * C64::from_polar(1.0, c * z * z)),
        ));
        let prod = complementarity_product(&chirped, &g).unwrap();
        let anti = moments(&chirped, &position_operator(&g), &momentum_operator(&g)).unwrap().anticommutator;
        // ⟨{z,Δp}⟩ = 4c⟨z²⟩ for a real profile times e^{icz²}
        assert!((anti - 4.0 * c * 0.64).abs() < 1e-6);
        assert!((prod - 0.5 * (1.0 + anti * anti).sqrt()).abs() < 1e-9);
        assert!(prod > 0.5);
    }

    #[test]
    fn uncertainty_bound_examples() {
        let (g, up) = grid_state("gaussian:K=1", 4096, 40.0);
        let z = position_operator(&g);
        let p = momentum_operator(&g);
        let cz = uncertainty_bound_check(&z, &z, &up).unwrap();
        assert!(cz.holds && (cz.limit - cz.bound).abs() < 1e-9);
        let cp = uncertainty_bound_check(&z, &p, &up).unwrap();
        assert!(cp.holds && (cp.limit - cp.bound).abs() < 1e-6);

        let (g, up) = grid_state("exponential:K=1", 4096, 40.0);
        let z = position_operator(&g);
        let p = momentum_operator(&g);
        let ce = uncertainty_bound_check(&z, &p, &up).unwrap();
        assert!(ce.holds);
        assert!((ce.limit - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-4);
        // the cusp's 1/k⁴ spectrum is cut at the Nyquist wavenumber
        assert!((ce.bound - 1.0).abs() < 1e-2, "{}", ce.bound);
        assert!(ce.limit < ce.bound - 0.2);
    }

    #[test]
    fn trace_power_root_examples() {
        let g = CMatrix::from_diagonal(&CVector::from_vec(vec![C64::new(0.9, 0.0), C64::new(-1.0, 0.0)]));
        assert!((trace_power_root(&g, 1).unwrap() - 0.1).abs() < 1e-15);
        let est = trace_power_root(&g, 64).unwrap();
        let want = (0.9f64.powi(64) + 1.0).powf(1.0 / 64.0);
        assert!((est - want).abs() < 1e-14);
        assert!(trace_power_root(&g, 3).is_err());
        // overflow-free for huge entries
        let big = g.scale(1e200);
        assert!((trace_power_root(&big, 1024).unwrap() / 1e200 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn gelfand_rank_one_and_convergence() {
        let mut r = rng(9);
        let omega = random_hermitian(&mut r, 6);
        let m = random_hermitian(&mut r, 6);
        let up = state(haar_state(&mut r, 6));
        let one = build_xi_tilde(&omega, &up, 1, 1e-10).unwrap();
        let lim1 = amplification_limit(&one, &m, &up).unwrap().limit;
        for n in [1, 2, 8, 64] {
            assert!((gelfand_estimate(&one, &m, &up, n).unwrap().estimate - lim1).abs() < 1e-12);
        }
        let span = build_xi_tilde(&omega, &up, 4, 1e-10).unwrap();
        let lim = amplification_limit(&span, &m, &up).unwrap().limit;
        let est = gelfand_estimate(&span, &m, &up, 4096).unwrap().estimate;
        assert!(est >= lim * (1.0 - 1e-12));
        assert!((est - lim).abs() < 1e-3 * lim);
    }

    #[test]
    fn subspace_dimension_examples() {
        let tol = 1e-9;
        let a2 = eigendecompose(&sigma_z(), tol).unwrap();
        let omega5 = HermitianOperator::from_real_diagonal(&[0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        let s5 = eigendecompose(&omega5, tol).unwrap();
        let full5 = state(CVector::from_element(5, C64::new(1.0, 0.0)));
        assert_eq!(subspace_dimension(&a2, &s5, &full5, 1e-8).unwrap().analytic, 2);

        let a7 = eigendecompose(&ladder(7).unwrap(), tol).unwrap();
        let omega4 = HermitianOperator::from_real_diagonal(&[0.0, 1.0, 2.0, 3.0]).unwrap();
        let s4 = eigendecompose(&omega4, tol).unwrap();
        let full4 = state(CVector::from_element(4, C64::new(1.0, 0.0)));
        assert_eq!(subspace_dimension(&a7, &s4, &full4, 1e-8).unwrap().analytic, 4);

        let eig = state(unit(4, 2));
        let d = subspace_dimension(&a7, &s4, &eig, 1e-8).unwrap();
        assert_eq!((d.analytic, d.numerical), (1, 1));
    }

    #[test]
    fn span_distance_examples() {
        let mut r = rng(6);
        let omega = random_hermitian(&mut r, 5);
        let up = state(haar_state(&mut r, 5));
        let a = build_xi_tilde(&omega, &up, 3, 1e-10).unwrap();
        let same = span_distance(&a, &a).unwrap();
        assert!(same.angle.abs() < 1e-10 && !same.rank_mismatch);

        let e0 = build_xi_tilde(&omega, &state(unit(5, 0)), 1, 1e-10).unwrap();
        let e1 = build_xi_tilde(&omega, &state(unit(5, 1)), 1, 1e-10).unwrap();
        assert!((span_distance(&e0, &e1).unwrap().angle - FRAC_PI_2).abs() < 1e-12);

        let mismatch = span_distance(&a, &e0).unwrap();
        assert!(mismatch.rank_mismatch && mismatch.angle == FRAC_PI_2);
    }

    #[test]
    fn span_distance_is_linear_in_g() {
        let mut r = rng(31);
        let a = random_system(&mut r, 3);
        let omega = random_hermitian(&mut r, 6);
        let up = state(haar_state(&mut r, 6));
        let tilde = build_xi_tilde(&omega, &up, 3, 1e-10).unwrap();
        let setup = MeasurementSetup::new(1e-3, a, omega).unwrap();
        let angle = |g: f64| span_distance(&build_xi_g(&setup.with_g(g), &up, 1e-12).unwrap(), &tilde).unwrap().angle;
        let (t1, t2, t3) = (angle(1e-3), angle(5e-4), angle(2.5e-4));
        assert!((t1 / t2 - 2.0).abs() < 0.2 && (t2 / t3 - 2.0).abs() < 0.2, "{t1} {t2} {t3}");
    }

    #[test]
    fn finite_g_limit_approaches_tilde_limit_linearly() {
        let mut r = rng(44);
        let a = random_system(&mut r, 2);
        let omega = random_hermitian(&mut r, 5);
        let m = random_hermitian(&mut r, 5);
        let up = state(haar_state(&mut r, 5));
        let tilde = amplification_limit(&build_xi_tilde(&omega, &up, 2, 1e-10).unwrap(), &m, &up).unwrap().limit;
        let setup = MeasurementSetup::new(1e-3, a, omega).unwrap();
        let gap = |g: f64| {
            amplification_limit(&build_xi_g(&setup.with_g(g), &up, 1e-10).unwrap(), &m, &up).unwrap().limit - tilde
        };
        let (e1, e2, e3) = (gap(1e-3), gap(5e-4), gap(2.5e-4));
        assert!((e1 / e2 - 2.0).abs() < 0.3 && (e2 / e3 - 2.0).abs() < 0.3, "{e1} {e2} {e3}");
    }

    #[test]
    fn limit_is_nondecreasing_in_r_a_and_stabilizes() {
        let mut r = rng(12);
        let omega = hermitian_with_spectrum(&mut r, &[-1.0, -1.0, 0.0, 0.5, 2.0, 2.0]);
        let m = random_hermitian(&mut r, 6);
        let up = state(haar_state(&mut r, 6));
        let lims: Vec<f64> = (1..=7)
            .map(|ra| amplification_limit(&build_xi_tilde(&omega, &up, ra, 1e-10).unwrap(), &m, &up).unwrap().limit)
            .collect();
        for w in lims.windows(2) {
            assert!(w[1] >= w[0] - 1e-10);
        }
        // r_Ω = 4
        for l in &lims[4..] {
            assert!((l - lims[3]).abs() < 1e-10);
        }
    }

    #[test]
    fn mixed_singleton_reduces_to_pure() {
        let mut r = rng(13);
        let omega = random_hermitian(&mut r, 5);
        let m = random_hermitian(&mut r, 5);
        let up = state(haar_state(&mut r, 5));
        let ens = DetectorEnsemble::new(vec![1.0], vec![up.clone()]).unwrap();
        let mixed = mixed_amplification_limit(&ens, &omega, &m, 3, 1e-10).unwrap();
        let pure = amplification_limit(&build_xi_tilde(&omega, &up, 3, 1e-10).unwrap(), &m, &up).unwrap();
        assert!((mixed.limit - pure.limit).abs() < 1e-10);
    }

    #[test]
    fn degenerate_eigenstate_mixture_has_zero_limit() {
        let omega = HermitianOperator::from_real_diagonal(&[0.5, 0.5, 2.0, -1.0]).unwrap();
        let mut r = rng(14);
        let m = random_hermitian(&mut r, 4);
        let ens = DetectorEnsemble::new(vec![0.5, 0.5], vec![state(unit(4, 0)), state(unit(4, 1))]).unwrap();
        let res = mixed_amplification_limit(&ens, &omega, &m, 3, 1e-10).unwrap();
        assert!(res.limit < 1e-12);
    }

    #[test]
    fn distinct_eigenstate_mixture_shift_comes_from_reweighting() {
        // each member alone cannot move, but postselection can suppress one
        // member relative to the other
        let omega = HermitianOperator::from_real_diagonal(&[0.0, 1.0, 2.0]).unwrap();
        let m = HermitianOperator::from_real_diagonal(&[3.0, -1.0, 0.0]).unwrap();
        let ens = DetectorEnsemble::new(vec![0.5, 0.5], vec![state(unit(3, 0)), state(unit(3, 1))]).unwrap();
        let res = mixed_amplification_limit(&ens, &omega, &m, 2, 1e-10).unwrap();
        assert!((res.limit - 2.0).abs() < 1e-12);
        assert!(ensemble_average_bound(&ens, &omega, &m, 2, 1e-10).unwrap() < 1e-12);

        // brute force: ρf = Σ η_k |f(ω_k)|² |k⟩⟨k| with f(ω) = Σ_j μ_j e^{-i g a_j ω}
        let g = 1e-3;
        let a = [0.0, 1.0];
        let f = |mu: [C64; 2], w: f64| -> f64 {
            (mu[0] * C64::from_polar(1.0, -g * a[0] * w) + mu[1] * C64::from_polar(1.0, -g * a[1] * w)).norm_sqr()
        };
        // μ chosen to null member 1 (ω = 1)
        let mu = [C64::from_polar(1.0, -g), C64::new(-1.0, 0.0)];
        let (p0, p1) = (f(mu, 0.0), f(mu, 1.0));
        let shift = (p0 * 3.0 + -p1) / (p0 + p1) - 1.0;
        assert!(p1 < 1e-20 && (shift - 2.0).abs() < 1e-9);
    }

    #[test]
    fn recovered_selections_reach_the_limit() {
        let (g, up) = grid_state("gaussian:K=1", 1024, 16.0);
        let z = position_operator(&g);
        let span = build_xi_tilde(&z, &up, 2, 1e-10).unwrap();
        let res = amplification_limit(&span, &z, &up).unwrap();
        let setup = MeasurementSetup::new(1e-5, sigma_z(), z.clone()).unwrap();
        let sel = recover_selections(&res, &span, &setup).unwrap();
        assert!((shift_of(&setup, &sel, &up, &z) - res.extremum).abs() < 1e-3 * res.limit);
    }

    #[test]
    fn recovery_gap_is_linear_in_g() {
        let mut r = rng(52);
        let a = random_system(&mut r, 2);
        let omega = random_hermitian(&mut r, 6);
        let m = random_hermitian(&mut r, 6);
        let up = state(haar_state(&mut r, 6));
        let span = build_xi_tilde(&omega, &up, 2, 1e-10).unwrap();
        let res = amplification_limit(&span, &m, &up).unwrap();
        let setup = MeasurementSetup::new(1e-4, a, omega).unwrap();
        let gap = |gv: f64| {
            let s = setup.with_g(gv);
            let sel = recover_selections(&res, &span, &s).unwrap();
            (shift_of(&s, &sel, &up, &m) - res.extremum).abs()
        };
        let (g4, g5) = (gap(1e-4), gap(1e-5));
        assert!((g4 / g5 - 10.0).abs() < 2.0, "{g4} {g5}");
    }

    #[test]
    fn recovered_selections_from_finite_g_span() {
        let mut r = rng(41);
        let a = random_system(&mut r, 3);
        let omega = random_hermitian(&mut r, 6);
        let m = random_hermitian(&mut r, 6);
        let up = state(haar_state(&mut r, 6));
        let setup = MeasurementSetup::new(1e-2, a, omega).unwrap();
        let span = build_xi_g(&setup, &up, 1e-12).unwrap();
        let res = amplification_limit(&span, &m, &up).unwrap();
        let sel = recover_selections(&res, &span, &setup).unwrap();
        assert!((shift_of(&setup, &sel, &up, &m) - res.extremum).abs() < 1e-9);
        // the minimum is reachable too
        let mut lo = res.clone();
        let w = compressed(&span, &m, m.expectation(up.amplitudes()), 1);
        let (vals, vecs) = hermitian_eigen(&w);
        lo.whitened = vecs.column(0).into_owned();
        lo.mu = span.coords().solve_upper_triangular(&lo.whitened).unwrap();
        let sel_lo = recover_selections(&lo, &span, &setup).unwrap();
        assert!((shift_of(&setup, &sel_lo, &up, &m) - vals[0]).abs() < 1e-9);
    }

    #[test]
    fn rank_one_recovery_gives_zero_shift() {
        let (g, _) = grid_state("gaussian:K=1", 1024, 16.0);
        let z = position_operator(&g);
        let up = state(unit(1024, 600));
        let setup = MeasurementSetup::new(1e-4, sigma_z(), z.clone()).unwrap();
        let span = build_xi_tilde(&z, &up, 2, 1e-10).unwrap();
        assert_eq!(span.rank(), 1);
        let res = amplification_limit(&span, &z, &up).unwrap();
        let sel = recover_selections(&res, &span, &setup).unwrap();
        assert!(shift_of(&setup, &sel, &up, &z).abs() < 1e-12);
    }

    fn tilde_limit(omega: &HermitianOperator, m: &HermitianOperator, up: &PureDetectorState, ra: usize) -> f64 {
        amplification_limit(&build_xi_tilde(omega, up, ra, 1e-10).unwrap(), m, up).unwrap().limit
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn tilde_limit_gauge_invariances(seed in 0u64..100_000, c in -50.0f64..50.0, s in 0.1f64..10.0) {
            let mut r = rng(seed);
            let omega = random_hermitian(&mut r, 5);
            let m = random_hermitian(&mut r, 5);
            let up = state(haar_state(&mut r, 5));
            let base = tilde_limit(&omega, &m, &up, 3);
            prop_assert!((tilde_limit(&omega.shifted(c), &m, &up, 3) - base).abs() < 1e-9 * (1.0 + base));
            prop_assert!((tilde_limit(&omega, &m.shifted(c), &up, 3) - base).abs() < 1e-9 * (1.0 + base));
            prop_assert!((tilde_limit(&omega, &m.scaled(-s), &up, 3) - s * base).abs() < 1e-9 * (1.0 + s * base));
        }

        #[test]
        fn exact_shifts_never_exceed_finite_g_limit(seed in 0u64..100_000, g in 1e-5f64..1e-3) {
            let mut r = rng(seed);
            let a = random_system(&mut r, 3);
            let omega = random_hermitian(&mut r, 5);
            let m = random_hermitian(&mut r, 5);
            let up = state(haar_state(&mut r, 5));
            let setup = MeasurementSetup::new(g, a, omega).unwrap();
            let lim = amplification_limit(&build_xi_g(&setup, &up, 1e-14).unwrap(), &m, &up).unwrap().limit;
            for _ in 0..20 {
                let sel = SelectionPair::new(haar_state(&mut r, 3), haar_state(&mut r, 3)).unwrap();
                prop_assert!(shift_of(&setup, &sel, &up, &m).abs() <= lim + 1e-10);
            }
        }

        #[test]
        fn spectrum_affine_map_keeps_tilde_limit(seed in 0u64..100_000, s in 0.2f64..5.0, c in -5.0f64..5.0) {
            // the tilde span does not depend on A at all beyond r_A
            let mut r = rng(seed);
            let a = random_system(&mut r, 3);
            let omega = random_hermitian(&mut r, 5);
            let m = random_hermitian(&mut r, 5);
            let up = state(haar_state(&mut r, 5));
            let ra = distinct_count(&eigendecompose(&a, 1e-9).unwrap());
            let rb = distinct_count(&eigendecompose(&a.scaled(s).shifted(c), 1e-9).unwrap());
            prop_assert_eq!(ra, rb);
            let la = tilde_limit(&omega, &m, &up, ra);
            let lb = tilde_limit(&omega, &m, &up, rb);
            prop_assert!((la - lb).abs() < 1e-12);
        }
    }
}
