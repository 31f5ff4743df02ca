//! Hermitian operators, spectral decomposition and degeneracy grouping.
//!
//! Operators on the system and on small abstract detectors are stored as
//! dense matrices. Grid detectors use two structured forms so that the
//! position and momentum observables on thousands of grid nodes never have to
//! be materialized: a real diagonal (position) and a real Fourier multiplier
//! (momentum, `F⁻¹ diag(k) F`). All three forms are exactly Hermitian and can
//! be densified with [`HermitianOperator::to_dense`].

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, hermitize, max_asymmetry, CMatrix, CVector};

/// Absolute Hermiticity tolerance for dense input.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Dense spectral data is refused above this dimension.
pub const MAX_SPECTRAL_DIM: usize = 1024;

#[derive(Clone)]
pub struct HermitianOperator {
    dim: usize,
    repr: Repr,
}

#[derive(Clone)]
enum Repr {
    Dense(CMatrix),
    Diagonal(DVector<f64>),
    Fourier(Arc<FourierMultiplier>),
}

/// `F⁻¹ diag(k) F` with the unitary DFT `F`.
struct FourierMultiplier {
    multipliers: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FourierMultiplier {
    fn new(multipliers: Vec<f64>) -> Self {
        let mut planner = FftPlanner::new();
        let n = multipliers.len();
        Self { forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n), multipliers }
    }

    fn with_multipliers(&self, multipliers: Vec<f64>) -> Self {
        Self { multipliers, forward: Arc::clone(&self.forward), inverse: Arc::clone(&self.inverse) }
    }

    fn apply_fn(&self, v: &CVector, f: impl Fn(f64) -> C64) -> CVector {
        let n = self.multipliers.len();
        let mut buf: Vec<C64> = v.iter().copied().collect();
        self.forward.process(&mut buf);
        for (b, &k) in buf.iter_mut().zip(&self.multipliers) {
            *b *= f(k);
        }
        self.inverse.process(&mut buf);
        let inv_n = 1.0 / n as f64;
        CVector::from_iterator(n, buf.into_iter().map(|x| x * inv_n))
    }
}

impl fmt::Debug for HermitianOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.repr {
            Repr::Dense(_) => "dense",
            Repr::Diagonal(_) => "diagonal",
            Repr::Fourier(_) => "fourier",
        };
        f.debug_struct("HermitianOperator").field("dim", &self.dim).field("storage", &kind).finish()
    }
}

impl HermitianOperator {
    /// Validates Hermiticity within [`HERMITIAN_TOL`] and stores the exact
    /// Hermitian part.
    pub fn from_dense(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidInput(format!("operator must be square, got {}x{}", m.nrows(), m.ncols())));
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidInput("operator dimension must be >= 1".into()));
        }
        let asym = max_asymmetry(&m);
        if !(asym <= HERMITIAN_TOL) {
            return Err(Error::NotHermitian { max_asymmetry: asym });
        }
        Ok(Self { dim: m.nrows(), repr: Repr::Dense(hermitize(&m)) })
    }

    pub fn from_real_diagonal(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("operator dimension must be >= 1".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite diagonal entry".into()));
        }
        Ok(Self { dim: values.len(), repr: Repr::Diagonal(DVector::from_column_slice(values)) })
    }

    /// Operator diagonal in the discrete Fourier basis with the given real
    /// multipliers (DFT ordering).
    pub fn from_fourier_multipliers(multipliers: Vec<f64>) -> Result<Self> {
        if multipliers.is_empty() {
            return Err(Error::InvalidInput("operator dimension must be >= 1".into()));
        }
        Ok(Self { dim: multipliers.len(), repr: Repr::Fourier(Arc::new(FourierMultiplier::new(multipliers))) })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::from_real_diagonal(&vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.repr, Repr::Dense(_))
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        assert_eq!(v.len(), self.dim, "operator/vector dimension mismatch");
        match &self.repr {
            Repr::Dense(m) => m * v,
            Repr::Diagonal(d) => v.zip_map(d, |x, s| x * s),
            Repr::Fourier(f) => f.apply_fn(v, |k| C64::new(k, 0.0)),
        }
    }

    /// `⟨v|O|v⟩`, real by Hermiticity.
    pub fn expectation(&self, v: &CVector) -> f64 {
        v.dotc(&self.apply(v)).re
    }

    /// Dense matrix; the Fourier form is symmetrized after assembly.
    pub fn to_dense(&self) -> CMatrix {
        match &self.repr {
            Repr::Dense(m) => m.clone(),
            Repr::Diagonal(d) => CMatrix::from_diagonal(&d.map(|x| C64::new(x, 0.0))),
            Repr::Fourier(_) => {
                let n = self.dim;
                let mut m = CMatrix::zeros(n, n);
                for j in 0..n {
                    let mut e = CVector::zeros(n);
                    e[j] = C64::new(1.0, 0.0);
                    m.set_column(j, &self.apply(&e));
                }
                hermitize(&m)
            }
        }
    }

    /// Largest absolute matrix entry.
    pub fn max_abs_entry(&self) -> f64 {
        match &self.repr {
            Repr::Dense(m) => m.iter().map(|x| x.norm()).fold(0.0, f64::max),
            Repr::Diagonal(d) => d.iter().map(|x| x.abs()).fold(0.0, f64::max),
            Repr::Fourier(f) => {
                // the diagonal of F⁻¹ diag(k) F is mean(k); off-diagonals are
                // bounded by the same mean of |k|
                let n = f.multipliers.len() as f64;
                f.multipliers.iter().map(|k| k.abs()).sum::<f64>() / n
            }
        }
    }

    /// `O + c·I`.
    pub fn shifted(&self, c: f64) -> Self {
        let repr = match &self.repr {
            Repr::Dense(m) => Repr::Dense(m + CMatrix::identity(self.dim, self.dim).scale(c)),
            Repr::Diagonal(d) => Repr::Diagonal(d.add_scalar(c)),
            Repr::Fourier(f) => {
                Repr::Fourier(Arc::new(f.with_multipliers(f.multipliers.iter().map(|k| k + c).collect())))
            }
        };
        Self { dim: self.dim, repr }
    }

    /// `s·O`.
    pub fn scaled(&self, s: f64) -> Self {
        let repr = match &self.repr {
            Repr::Dense(m) => Repr::Dense(m.scale(s)),
            Repr::Diagonal(d) => Repr::Diagonal(d.scale(s)),
            Repr::Fourier(f) => {
                Repr::Fourier(Arc::new(f.with_multipliers(f.multipliers.iter().map(|k| k * s).collect())))
            }
        };
        Self { dim: self.dim, repr }
    }
}

/// Pauli `σ_z = diag(1, -1)`.
pub fn sigma_z() -> HermitianOperator {
    HermitianOperator::from_dense(CMatrix::from_diagonal(&CVector::from_vec(vec![
        C64::new(1.0, 0.0),
        C64::new(-1.0, 0.0),
    ])))
    .expect("sigma_z is Hermitian")
}

/// `diag(0, 1, ..., n-1)` as a dense operator.
pub fn ladder(n: usize) -> Result<HermitianOperator> {
    if n == 0 {
        return Err(Error::InvalidInput("ladder needs n >= 1".into()));
    }
    HermitianOperator::from_dense(CMatrix::from_diagonal(&CVector::from_iterator(
        n,
        (0..n).map(|k| C64::new(k as f64, 0.0)),
    )))
}

/// Default degeneracy tolerance: `1e-9 · max |O_ij|`.
pub fn default_grouping_tol(op: &HermitianOperator) -> f64 {
    let scale = op.max_abs_entry();
    if scale > 0.0 {
        1e-9 * scale
    } else {
        f64::MIN_POSITIVE
    }
}

/// Distinct eigenvalues with their orthogonal projectors.
#[derive(Clone, Debug)]
pub struct SpectralData {
    values: Vec<f64>,
    projectors: Vec<CMatrix>,
    bases: Vec<CMatrix>,
    multiplicities: Vec<usize>,
    grouping_tol: f64,
}

impl SpectralData {
    /// Distinct eigenvalues, ascending.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn projectors(&self) -> &[CMatrix] {
        &self.projectors
    }

    /// Orthonormal eigenvectors spanning each eigenspace (one column block
    /// per distinct value).
    pub fn bases(&self) -> &[CMatrix] {
        &self.bases
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }

    pub fn grouping_tol(&self) -> f64 {
        self.grouping_tol
    }

    pub fn dim(&self) -> usize {
        self.multiplicities.iter().sum()
    }

    /// `Σ_k value_k P_k`.
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.dim();
        self.values.iter().zip(&self.projectors).fold(CMatrix::zeros(n, n), |acc, (&v, p)| acc + p.scale(v))
    }

    /// `c_k = √⟨v|P_k|v⟩` for each distinct value.
    pub fn support_weights(&self, v: &CVector) -> Vec<f64> {
        self.projectors.iter().map(|p| v.dotc(&(p * v)).re.max(0.0).sqrt()).collect()
    }
}

/// Number of distinct eigenvalues (`r_A` or `r_Ω`).
pub fn distinct_count(spectral: &SpectralData) -> usize {
    spectral.values.len()
}

/// Spectral decomposition with degeneracy grouping: sorted eigenvalues whose
/// successive gap is at most `grouping_tol` are merged into one distinct
/// value (multiplicity-weighted mean) with the summed projector.
pub fn eigendecompose(op: &HermitianOperator, grouping_tol: f64) -> Result<SpectralData> {
    if !(grouping_tol > 0.0) {
        return Err(Error::InvalidInput(format!("grouping_tol must be > 0, got {grouping_tol}")));
    }
    if op.dim() > MAX_SPECTRAL_DIM {
        return Err(Error::InvalidInput(format!(
            "dense spectral data limited to dim <= {MAX_SPECTRAL_DIM}, got {}",
            op.dim()
        )));
    }
    let (evals, evecs) = match &op.repr {
        Repr::Diagonal(d) => {
            let n = d.len();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
            let vals = order.iter().map(|&i| d[i]).collect::<Vec<_>>();
            let vecs =
                CMatrix::from_fn(n, n, |r, c| if r == order[c] { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
            (vals, vecs)
        }
        _ => hermitian_eigen(&op.to_dense()),
    };

    let n = evals.len();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        match groups.last_mut() {
            Some(g) if evals[i] - evals[*g.last().unwrap()] <= grouping_tol => g.push(i),
            _ => groups.push(vec![i]),
        }
    }

    let mut values = Vec::with_capacity(groups.len());
    let mut projectors = Vec::with_capacity(groups.len());
    let mut bases = Vec::with_capacity(groups.len());
    let mut multiplicities = Vec::with_capacity(groups.len());
    for g in &groups {
        let mean = g.iter().map(|&i| evals[i]).sum::<f64>() / g.len() as f64;
        let basis = CMatrix::from_fn(n, g.len(), |r, c| evecs[(r, g[c])]);
        let proj = &basis * basis.adjoint();
        values.push(mean);
        projectors.push(proj);
        bases.push(basis);
        multiplicities.push(g.len());
    }
    Ok(SpectralData { values, projectors, bases, multiplicities, grouping_tol })
}

/// Applies `exp(-i t O)` for arbitrary real `t`, reusing one decomposition.
#[derive(Clone)]
pub struct Propagator {
    op: HermitianOperator,
    eigen: Option<Arc<(Vec<f64>, CMatrix)>>,
}

impl fmt::Debug for Propagator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Propagator").field("op", &self.op).finish()
    }
}

impl Propagator {
    pub fn new(op: &HermitianOperator) -> Self {
        let eigen = match op.repr {
            Repr::Dense(ref m) => Some(Arc::new(hermitian_eigen(m))),
            _ => None,
        };
        Self { op: op.clone(), eigen }
    }

    pub fn dim(&self) -> usize {
        self.op.dim
    }

    /// `exp(-i t O) v`.
    pub fn apply(&self, t: f64, v: &CVector) -> CVector {
        let phase = |x: f64| C64::from_polar(1.0, -t * x);
        match (&self.op.repr, &self.eigen) {
            (Repr::Diagonal(d), _) => v.zip_map(d, |x, s| x * phase(s)),
            (Repr::Fourier(f), _) => f.apply_fn(v, phase),
            (Repr::Dense(_), Some(e)) => {
                let (vals, vecs) = e.as_ref();
                let mut coeffs = vecs.ad_mul(v);
                for (c, &l) in coeffs.iter_mut().zip(vals) {
                    *c *= phase(l);
                }
                vecs * coeffs
            }
            (Repr::Dense(_), None) => unreachable!("dense propagator without eigendecomposition"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_hermitian, rng};
    use proptest::prelude::*;

    fn diag(values: &[f64]) -> HermitianOperator {
        HermitianOperator::from_real_diagonal(values).unwrap()
    }

    fn pauli_z_dense() -> HermitianOperator {
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(-1.0, 0.0)],
        );
        HermitianOperator::from_dense(m).unwrap()
    }

    #[test]
    fn identity_has_one_distinct_value() {
        let s = eigendecompose(&HermitianOperator::identity(3).unwrap(), 1e-8).unwrap();
        assert_eq!(s.values(), &[1.0]);
        assert_eq!(s.multiplicities(), &[3]);
        assert!((s.projectors()[0].clone() - CMatrix::identity(3, 3)).norm() < 1e-14);
    }

    #[test]
    fn near_degenerate_values_are_grouped() {
        let s = eigendecompose(&diag(&[1.0, 1.0 + 1e-12, 2.0]), 1e-9).unwrap();
        assert_eq!(s.values().len(), 2);
        assert!((s.values()[0] - 1.0).abs() < 1e-11);
        assert_eq!(s.values()[1], 2.0);
        assert_eq!(s.multiplicities(), &[2, 1]);
    }

    #[test]
    fn pauli_z_projectors() {
        let s = eigendecompose(&pauli_z_dense(), 1e-9).unwrap();
        assert_eq!(distinct_count(&s), 2);
        assert!((s.values()[0] + 1.0).abs() < 1e-14);
        assert!((s.values()[1] - 1.0).abs() < 1e-14);
        let p_minus = s.projectors()[0].map(|x| x.re);
        let p_plus = s.projectors()[1].map(|x| x.re);
        assert!((p_minus[(1, 1)] - 1.0).abs() < 1e-14 && p_minus[(0, 0)].abs() < 1e-14);
        assert!((p_plus[(0, 0)] - 1.0).abs() < 1e-14 && p_plus[(1, 1)].abs() < 1e-14);
    }

    #[test]
    fn distinct_counts() {
        assert_eq!(distinct_count(&eigendecompose(&HermitianOperator::identity(4).unwrap(), 1e-9).unwrap()), 1);
        assert_eq!(distinct_count(&eigendecompose(&diag(&[0.0, 1.0, 2.0, 3.0]), 1e-9).unwrap()), 4);
    }

    #[test]
    fn non_hermitian_input_is_rejected_with_asymmetry() {
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(1.0, 0.0), C64::new(0.5, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
        );
        match HermitianOperator::from_dense(m) {
            Err(Error::NotHermitian { max_asymmetry }) => assert!((max_asymmetry - 0.5).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_grouping_tol_is_rejected() {
        assert!(eigendecompose(&diag(&[1.0]), 0.0).is_err());
    }

    #[test]
    fn random_hermitian_decompositions() {
        let mut r = rng(11);
        for trial in 0..1000 {
            let dim = 1 + trial % 8;
            let op = random_hermitian(&mut r, dim);
            let tol = default_grouping_tol(&op);
            let s = eigendecompose(&op, tol).unwrap();
            let dense = op.to_dense();
            assert!((s.reconstruct() - &dense).norm() <= 1e-9);
            let total = s.projectors().iter().fold(CMatrix::zeros(dim, dim), |a, p| a + p);
            assert!((total - CMatrix::identity(dim, dim)).norm() <= 1e-10);
            for (j, pj) in s.projectors().iter().enumerate() {
                for (k, pk) in s.projectors().iter().enumerate() {
                    let prod = pj * pk;
                    let expect = if j == k { pk.clone() } else { CMatrix::zeros(dim, dim) };
                    assert!((prod - expect).norm() <= 1e-10);
                }
            }
            assert_eq!(s.multiplicities().iter().sum::<usize>(), dim);
            for w in s.values().windows(2) {
                assert!(w[1] - w[0] > tol);
            }
        }
    }

    #[test]
    fn fourier_dense_form_is_hermitian_and_matches_apply() {
        let op = HermitianOperator::from_fourier_multipliers(vec![0.0, 1.0, -2.0, 3.0, -1.0, 0.5, 2.0, -0.5]).unwrap();
        let d = op.to_dense();
        assert!(max_asymmetry(&d) < 1e-15);
        let v = CVector::from_fn(8, |i, _| C64::new(i as f64, 1.0 - i as f64));
        assert!((op.apply(&v) - &d * &v).norm() < 1e-12);
    }

    #[test]
    fn propagator_matches_dense_exponential() {
        let mut r = rng(3);
        let op = random_hermitian(&mut r, 5);
        let prop = Propagator::new(&op);
        let v = CVector::from_fn(5, |i, _| C64::new(1.0 + i as f64, -0.3));
        let t = 0.7;
        let m = op.to_dense().scale(-t) * C64::new(0.0, 1.0);
        let expected = m.exp() * &v;
        assert!((prop.apply(t, &v) - expected).norm() < 1e-12);

        let dia = diag(&[0.5, -1.0, 2.0, 0.0, 3.0]);
        let expected = (dia.to_dense().scale(-t) * C64::new(0.0, 1.0)).exp() * &v;
        assert!((Propagator::new(&dia).apply(t, &v) - expected).norm() < 1e-12);
    }

    proptest! {
        #[test]
        fn shift_covariance(seed in 0u64..500, c in -5.0f64..5.0) {
            let mut r = rng(seed);
            let op = random_hermitian(&mut r, 1 + (seed as usize % 6));
            let tol = 1e-9;
            let a = eigendecompose(&op, tol).unwrap();
            let b = eigendecompose(&op.shifted(c), tol).unwrap();
            prop_assert_eq!(a.values().len(), b.values().len());
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!((x + c - y).abs() < 1e-9);
            }
            for (p, q) in a.projectors().iter().zip(b.projectors()) {
                prop_assert!((p - q).norm() <= 1e-9);
            }
        }
    }
}
