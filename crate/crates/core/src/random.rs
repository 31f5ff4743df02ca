//! Seeded random instances: Haar states, random Hermitian operators and
//! operators with prescribed (possibly degenerate) spectra.

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{CMatrix, CVector};
use crate::operators::HermitianOperator;

pub type InstanceRng = ChaCha8Rng;

pub fn rng(seed: u64) -> InstanceRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im)
}

/// Haar-distributed unit vector.
pub fn haar_state<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CVector {
    loop {
        let v = CVector::from_fn(dim, |_, _| complex_normal(rng));
        let n = v.norm();
        if n > 1e-12 {
            return v.unscale(n);
        }
    }
}

/// Haar-distributed unitary (QR of a Ginibre matrix with phase fix).
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| complex_normal(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..dim {
            q[(i, j)] *= ph;
        }
    }
    q
}

/// GUE-like random Hermitian matrix with unit-variance entries.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> HermitianOperator {
    let g = CMatrix::from_fn(dim, dim, |_, _| complex_normal(rng));
    let h = (&g + g.adjoint()).scale(0.5);
    HermitianOperator::from_dense(h).expect("Hermitian by construction")
}

/// `U diag(spectrum) U†` with Haar `U`.
pub fn hermitian_with_spectrum<R: Rng + ?Sized>(rng: &mut R, spectrum: &[f64]) -> HermitianOperator {
    let u = haar_unitary(rng, spectrum.len());
    let d = CMatrix::from_diagonal(&DVector::from_iterator(spectrum.len(), spectrum.iter().map(|&x| C64::new(x, 0.0))));
    let m = &u * d * u.adjoint();
    HermitianOperator::from_dense((&m + m.adjoint()).scale(0.5)).expect("Hermitian by construction")
}
