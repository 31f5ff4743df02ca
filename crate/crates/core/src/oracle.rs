//! Brute-force maximization of the exact mean shift over pre/postselections.
//!
//! These searches evaluate every candidate through the exact postselected
//! dynamics and never touch the variational solver, so they serve as an
//! independent check of it.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{thin_qr, CMatrix, CVector};
use crate::operators::{distinct_count, sigma_z, HermitianOperator};
use crate::pointer::{make_family_state, position_operator, DetectorFamilySpec, Grid1D, PureDetectorState};
use crate::random::{haar_state, rng};
use crate::weakmeas::{evolve_postselect, mean_shift_with_floor, weak_value, MeasurementSetup, SelectionPair};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepConfig {
    pub g: f64,
    pub coarse_points: usize,
    pub refine_rounds: usize,
    pub refine_shrink: f64,
    pub prob_floor: f64,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { g: 1e-5, coarse_points: 16, refine_rounds: 80, refine_shrink: 0.75, prob_floor: 1e-12, seed: 0 }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.coarse_points < 8 {
            return Err(Error::InvalidInput(format!("coarse_points must be >= 8, got {}", self.coarse_points)));
        }
        if self.refine_rounds < 1 {
            return Err(Error::InvalidInput("refine_rounds must be >= 1".into()));
        }
        if !(self.refine_shrink > 0.0 && self.refine_shrink < 1.0) {
            return Err(Error::InvalidInput(format!("refine_shrink must lie in (0, 1), got {}", self.refine_shrink)));
        }
        if !(self.prob_floor > 0.0) {
            return Err(Error::InvalidInput(format!("prob_floor must be > 0, got {}", self.prob_floor)));
        }
        if !self.g.is_finite() {
            return Err(Error::InvalidInput(format!("g must be finite, got {}", self.g)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub max_abs_shift: f64,
    /// Signed shift at the maximizer.
    pub shift: f64,
    pub argmax: SelectionPair,
    pub probability: f64,
    /// Incumbent `|shift|` after the coarse stage and after every round.
    pub history: Vec<f64>,
    pub evaluated: usize,
    pub skipped: usize,
}

#[derive(Clone, Copy, Debug)]
struct Eval {
    abs: f64,
    shift: f64,
    prob: f64,
}

fn evaluate(
    setup: &MeasurementSetup,
    upsilon: &PureDetectorState,
    m: &HermitianOperator,
    sel: &SelectionPair,
    prob_floor: f64,
) -> Option<Eval> {
    let out = evolve_postselect(setup, sel, upsilon).ok()?;
    if !(out.probability >= prob_floor) {
        return None;
    }
    let shift = mean_shift_with_floor(&out.detector, m, upsilon, 0.0).ok()?;
    shift.is_finite().then_some(Eval { abs: shift.abs(), shift, prob: out.probability })
}

/// Relative gap below which two shifts count as equal.
const TIE_TOL: f64 = 1e-9;

/// Deterministic arg-max: larger value wins. Values within `TIE_TOL` of each
/// other go to the more probable selection, then to the lower index.
fn better(a: (usize, Eval), b: (usize, Eval)) -> (usize, Eval) {
    let scale = a.1.abs.max(b.1.abs);
    let b_wins = if (b.1.abs - a.1.abs).abs() <= TIE_TOL * scale {
        b.1.prob > a.1.prob || (b.1.prob == a.1.prob && b.0 < a.0)
    } else {
        b.1.abs > a.1.abs
    };
    if b_wins {
        b
    } else {
        a
    }
}

fn best_of<P: Sync>(points: &[P], eval: &(impl Fn(&P) -> Option<Eval> + Sync)) -> (Option<(usize, Eval)>, usize) {
    let results: Vec<Option<Eval>> = points.par_iter().map(eval).collect();
    let skipped = results.iter().filter(|r| r.is_none()).count();
    let best = results.into_iter().enumerate().filter_map(|(i, r)| r.map(|e| (i, e))).reduce(better);
    (best, skipped)
}

fn check_dims(setup: &MeasurementSetup, upsilon: &PureDetectorState, m: &HermitianOperator) -> Result<()> {
    for found in [upsilon.dim(), m.dim()] {
        if found != setup.detector_dim() {
            return Err(Error::DimensionMismatch { expected: setup.detector_dim(), found });
        }
    }
    Ok(())
}

/// Orthonormal eigenbasis of `A` ordered by distinct eigenvalue.
fn eigen_frame(setup: &MeasurementSetup) -> CMatrix {
    let cols: Vec<CVector> = setup
        .spectral_a()
        .bases()
        .iter()
        .flat_map(|b| b.column_iter().map(|c| c.into_owned()).collect::<Vec<_>>())
        .collect();
    CMatrix::from_columns(&cols)
}

/// Angles `(θ_i, φ_i, θ_f, φ_f)`; each state is
/// `cos(θ/2)|a_1⟩ + e^{iφ} sin(θ/2)|a_2⟩`.
type Angles = [f64; 4];

fn bloch(frame: &CMatrix, theta: f64, phi: f64) -> CVector {
    let c = CVector::from_vec(vec![C64::new((theta / 2.0).cos(), 0.0), C64::from_polar((theta / 2.0).sin(), phi)]);
    frame * c
}

fn angles_to_pair(frame: &CMatrix, x: &Angles) -> SelectionPair {
    SelectionPair::normalized(bloch(frame, x[0], x[1]), bloch(frame, x[2], x[3])).expect("unit Bloch states")
}

/// Largest `|ln tan(θ/2)|` used for selections on the poles.
const POLE_LOG: f64 = 40.0;

fn to_log_polar(x: &Angles) -> Angles {
    let u = |t: f64| (t / 2.0).tan().ln().clamp(-POLE_LOG, POLE_LOG);
    [u(x[0]), x[1], u(x[2]), x[3]]
}

fn from_log_polar(y: &Angles) -> Angles {
    let t = |u: f64| 2.0 * u.exp().atan();
    [t(y[0]), y[1], t(y[2]), y[3]]
}

/// Exhaustive coarse-to-fine search over qubit selections.
pub fn sweep_qubit(
    setup: &MeasurementSetup,
    upsilon: &PureDetectorState,
    m: &HermitianOperator,
    cfg: &SweepConfig,
) -> Result<SweepOutcome> {
    cfg.validate()?;
    if setup.system_dim() != 2 {
        return Err(Error::InvalidInput(format!("sweep_qubit needs d_s = 2, got {}", setup.system_dim())));
    }
    check_dims(setup, upsilon, m)?;
    let setup = setup.with_g(cfg.g);
    let frame = eigen_frame(&setup);
    let eval = |x: &Angles| evaluate(&setup, upsilon, m, &angles_to_pair(&frame, x), cfg.prob_floor);

    let n = cfg.coarse_points;
    let thetas: Vec<f64> = (0..n).map(|j| j as f64 * PI / (n - 1) as f64).collect();
    let phis: Vec<f64> = (0..n).map(|j| j as f64 * TAU / n as f64).collect();
    let mut coarse = Vec::with_capacity(n.pow(4));
    for &ti in &thetas {
        for &pi in &phis {
            for &tf in &thetas {
                for &pf in &phis {
                    coarse.push([ti, pi, tf, pf]);
                }
            }
        }
    }
    let (best, mut skipped) = best_of(&coarse, &eval);
    let mut evaluated = coarse.len();
    let (i0, mut inc) = best.ok_or(Error::NoValidSelections { g: cfg.g })?;
    let mut x = to_log_polar(&coarse[i0]);
    let mut history = vec![inc.abs];
    let eval_log = |y: &Angles| eval(&from_log_polar(y));

    // the local grid lives in (ln tan(θ/2), φ) so that both directions of the
    // ratio μ_2/μ_1 are resolved evenly, including near the poles
    let offsets = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let mut width = [1.0, TAU / n as f64, 1.0, TAU / n as f64];
    for _ in 0..cfg.refine_rounds {
        let mut local = Vec::with_capacity(625);
        for a in offsets {
            for b in offsets {
                for c in offsets {
                    for d in offsets {
                        local.push([
                            x[0] + a * width[0],
                            x[1] + b * width[1],
                            x[2] + c * width[2],
                            x[3] + d * width[3],
                        ]);
                    }
                }
            }
        }
        let (round_best, s) = best_of(&local, &eval_log);
        evaluated += local.len();
        skipped += s;
        if let Some((i, e)) = round_best {
            if e.abs > inc.abs {
                inc = e;
                x = local[i];
            }
        }
        history.push(inc.abs);
        for w in &mut width {
            *w *= cfg.refine_shrink;
        }
    }
    let x = from_log_polar(&x);
    Ok(SweepOutcome {
        max_abs_shift: inc.abs,
        shift: inc.shift,
        argmax: angles_to_pair(&frame, &x),
        probability: inc.prob,
        history,
        evaluated,
        skipped,
    })
}

/// Fewest random candidates accepted by [`random_search`].
pub const MIN_SAMPLES: usize = 10_000;

/// Chart of the branch coefficients `μ_k = β_k* α_k` adapted to small `g`:
/// `μ = Σ_j x_j g^{r-1-j} u_j` where `u_j` is orthogonal to the Vandermonde
/// rows `(a_k^i)_k` for `i < j`. The leading orders of the postselected state
/// then have comparable size and the optimum sits at `x = O(1)`.
struct Chart {
    u: Vec<CVector>,
    weights: Vec<f64>,
    frame: Vec<CVector>,
    r: usize,
}

impl Chart {
    fn new(setup: &MeasurementSetup) -> Self {
        let spectral = setup.spectral_a();
        let r = distinct_count(spectral);
        let values = spectral.values();
        // Vandermonde rows in ascending order, centred and scaled for conditioning
        let mean = values.iter().sum::<f64>() / r as f64;
        let spread = values.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let rows: Vec<CVector> = (0..r)
            .map(|i| {
                CVector::from_iterator(r, values.iter().map(|&a| C64::new(((a - mean) / spread).powi(i as i32), 0.0)))
            })
            .collect();
        let (q, _) = thin_qr(&rows);
        let u = (0..r).map(|j| q.column(j).into_owned()).collect();
        let g = setup.g().abs().max(f64::MIN_POSITIVE);
        let weights = (0..r).map(|j| (g * spread).powi((r - 1 - j) as i32)).collect();
        let frame = spectral.bases().iter().map(|b| b.column(0).into_owned()).collect();
        Self { u, weights, frame, r }
    }

    /// Real parameter count: `x_0..x_{r-2}` complex, `x_{r-1} = 1`.
    fn params(&self) -> usize {
        2 * (self.r - 1)
    }

    fn mu(&self, p: &[f64]) -> CVector {
        let mut mu = self.u[self.r - 1].scale(self.weights[self.r - 1]);
        for j in 0..self.r - 1 {
            let x = C64::new(p[2 * j], p[2 * j + 1]);
            mu += self.u[j].map(|v| v * x * self.weights[j]);
        }
        mu
    }

    fn pair(&self, p: &[f64]) -> Option<SelectionPair> {
        let mu = self.mu(p);
        let alpha = 1.0 / (self.r as f64).sqrt();
        let ds = self.frame[0].len();
        let mut initial = CVector::zeros(ds);
        let mut final_ = CVector::zeros(ds);
        for (k, e) in self.frame.iter().enumerate() {
            initial += e.scale(alpha);
            final_ += e.map(|v| v * (mu[k] / alpha).conj());
        }
        SelectionPair::normalized(initial, final_).ok()
    }

    /// Chart coordinates of an arbitrary selection pair (if `x_{r-1} ≠ 0`).
    fn coords_of(&self, sel: &SelectionPair) -> Option<Vec<f64>> {
        let mu: Vec<C64> =
            self.frame.iter().map(|e| e.dotc(sel.final_state()).conj() * e.dotc(sel.initial())).collect();
        let mu = CVector::from_vec(mu);
        let x: Vec<C64> = (0..self.r).map(|j| self.u[j].dotc(&mu) / self.weights[j]).collect();
        let lead = x[self.r - 1];
        if !(lead.norm() > 0.0) {
            return None;
        }
        let p = x[..self.r - 1].iter().flat_map(|v| {
            let w = v / lead;
            [w.re, w.im]
        });
        let p: Vec<f64> = p.collect();
        p.iter().all(|v| v.is_finite()).then_some(p)
    }
}

/// Seeded random multistart followed by compass-search annealing in the
/// small-`g` chart. Deterministic for a fixed seed.
pub fn random_search(
    setup: &MeasurementSetup,
    upsilon: &PureDetectorState,
    m: &HermitianOperator,
    cfg: &SweepConfig,
    n_samples: usize,
) -> Result<SweepOutcome> {
    cfg.validate()?;
    if n_samples < MIN_SAMPLES {
        return Err(Error::InvalidInput(format!("n_samples must be >= {MIN_SAMPLES}, got {n_samples}")));
    }
    check_dims(setup, upsilon, m)?;
    let setup = setup.with_g(cfg.g);
    let chart = Chart::new(&setup);
    let ds = setup.system_dim();
    let mut r = rng(cfg.seed);
    let eval_pair = |sel: &SelectionPair| evaluate(&setup, upsilon, m, sel, cfg.prob_floor);

    // stage 1: Haar pairs and chart samples, generated serially for determinism
    let mut candidates: Vec<SelectionPair> = Vec::with_capacity(2 * n_samples);
    for _ in 0..n_samples {
        candidates
            .push(SelectionPair::normalized(haar_state(&mut r, ds), haar_state(&mut r, ds)).expect("Haar states"));
    }
    if chart.r > 1 {
        for _ in 0..n_samples {
            let p: Vec<f64> = (0..chart.params()).map(|_| r.sample::<f64, _>(StandardNormal) * 2.0).collect();
            if let Some(sel) = chart.pair(&p) {
                candidates.push(sel);
            }
        }
    }
    let (best, mut skipped) = best_of(&candidates, &eval_pair);
    let mut evaluated = candidates.len();
    let (i0, mut inc) = best.ok_or(Error::NoValidSelections { g: cfg.g })?;
    let mut best_pair = candidates[i0].clone();
    let mut history = vec![inc.abs];

    // stage 2: compass search with random kicks in chart coordinates
    if let Some(mut x) = chart.coords_of(&best_pair).filter(|_| chart.r > 1) {
        let scale = x.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
        let mut step = 0.25 * scale;
        let n = chart.params();
        for _ in 0..cfg.refine_rounds {
            let mut trials: Vec<Vec<f64>> = Vec::with_capacity(2 * n + 8);
            for i in 0..n {
                for sgn in [-1.0, 1.0] {
                    let mut y = x.clone();
                    y[i] += sgn * step;
                    trials.push(y);
                }
            }
            for _ in 0..8 {
                trials.push(x.iter().map(|v| v + step * r.sample::<f64, _>(StandardNormal)).collect());
            }
            let pairs: Vec<Option<SelectionPair>> = trials.iter().map(|p| chart.pair(p)).collect();
            let (round_best, s) = best_of(&pairs, &|p: &Option<SelectionPair>| p.as_ref().and_then(&eval_pair));
            evaluated += pairs.len();
            skipped += s;
            match round_best {
                Some((i, e)) if e.abs > inc.abs => {
                    inc = e;
                    x = trials[i].clone();
                    best_pair = pairs[i].clone().expect("evaluated pair exists");
                    step *= 2.0;
                }
                _ => step *= cfg.refine_shrink,
            }
            history.push(inc.abs);
        }
    }
    Ok(SweepOutcome {
        max_abs_shift: inc.abs,
        shift: inc.shift,
        argmax: best_pair,
        probability: inc.prob,
        history,
        evaluated,
        skipped,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Fig1Row {
    pub g: f64,
    pub theta: f64,
    pub im_aw: f64,
    pub shift: f64,
    pub prob: f64,
}

/// Postselection family `Ψf(θ) = (e^{-iθ/2}|0⟩ - e^{iθ/2}|1⟩)/√2` against
/// `Ψi = (|0⟩ + |1⟩)/√2`, for which `A_w = -i cot(θ/2)` with `A = σ_z`.
pub fn fig1_selection(theta: f64) -> SelectionPair {
    let h = FRAC_1_SQRT_2;
    SelectionPair::normalized(
        CVector::from_vec(vec![C64::new(h, 0.0), C64::new(h, 0.0)]),
        CVector::from_vec(vec![C64::from_polar(h, -theta / 2.0), -C64::from_polar(h, theta / 2.0)]),
    )
    .expect("unit states")
}

/// Default θ grid: `θ = -2φ` with `φ` log-spaced over `[1e-7, π/2]`, so that
/// `Im A_w = cot φ > 0` sweeps from 0 to ~1e7.
pub fn default_theta_grid(points: usize) -> Vec<f64> {
    let (lo, hi) = (1e-7f64.ln(), (PI / 2.0).ln());
    let n = points.max(2);
    (0..n).map(|i| -2.0 * (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Exact shifts `⟨Δz⟩` for `A = σ_z`, `Ω = M = z` along [`fig1_selection`].
pub fn fig1_curve(family: &DetectorFamilySpec, grid: &Grid1D, g_list: &[f64], thetas: &[f64]) -> Result<Vec<Fig1Row>> {
    let up = make_family_state(family, grid)?;
    let z = position_operator(grid);
    let base = MeasurementSetup::new(0.0, sigma_z(), z.clone())?;
    let mut rows = Vec::with_capacity(g_list.len() * thetas.len());
    for &g in g_list {
        let setup = base.with_g(g);
        let chunk: Vec<Result<Fig1Row>> = thetas
            .par_iter()
            .map(|&theta| {
                let sel = fig1_selection(theta);
                let im_aw = weak_value(&sel, setup.a()).map(|w| w.im).unwrap_or(f64::INFINITY);
                let out = evolve_postselect(&setup, &sel, &up)?;
                let shift = mean_shift_with_floor(&out.detector, &z, &up, 0.0)?;
                Ok(Fig1Row { g, theta, im_aw, shift, prob: out.probability })
            })
            .collect();
        for row in chunk {
            rows.push(row?);
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Fig1Peak {
    pub g: f64,
    pub max_shift: f64,
    /// `Im A_w` at the maximum.
    pub turning_im_aw: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Fig1Summary {
    pub peaks: Vec<Fig1Peak>,
    pub overall_max: f64,
    /// `(max - min) / mean` of the per-g maxima.
    pub spread: f64,
}

pub fn fig1_summary(rows: &[Fig1Row]) -> Fig1Summary {
    let mut peaks: Vec<Fig1Peak> = Vec::new();
    for row in rows {
        match peaks.iter_mut().find(|p| p.g == row.g) {
            Some(p) => {
                if row.shift > p.max_shift {
                    p.max_shift = row.shift;
                    p.turning_im_aw = row.im_aw;
                }
            }
            None => peaks.push(Fig1Peak { g: row.g, max_shift: row.shift, turning_im_aw: row.im_aw }),
        }
    }
    let maxima: Vec<f64> = peaks.iter().map(|p| p.max_shift).collect();
    let hi = maxima.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = maxima.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = maxima.iter().sum::<f64>() / maxima.len().max(1) as f64;
    Fig1Summary { peaks, overall_max: hi, spread: if mean != 0.0 { (hi - lo) / mean } else { 0.0 } }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amplimit::{amplification_limit, build_xi_g, build_xi_tilde};
    use crate::operators::ladder;
    use crate::pointer::BasisLabel;
    use crate::random::{hermitian_with_spectrum, random_hermitian};
    use crate::weakmeas::first_order_shift;

    fn quick(g: f64) -> SweepConfig {
        SweepConfig { g, coarse_points: 8, refine_rounds: 40, ..SweepConfig::default() }
    }

    fn random_qubit(seed: u64, dd: usize) -> (MeasurementSetup, PureDetectorState, HermitianOperator) {
        let mut r = rng(seed);
        let spectrum = [r.random_range(-1.0..0.0), r.random_range(0.0..1.0)];
        let a = hermitian_with_spectrum(&mut r, &spectrum);
        let omega = random_hermitian(&mut r, dd);
        let m = random_hermitian(&mut r, dd);
        let up = PureDetectorState::new(haar_state(&mut r, dd), BasisLabel::Abstract).unwrap();
        (MeasurementSetup::new(1e-5, a, omega).unwrap(), up, m)
    }

    #[test]
    fn config_validation() {
        assert!(SweepConfig::default().validate().is_ok());
        assert!(SweepConfig { coarse_points: 4, ..SweepConfig::default() }.validate().is_err());
        assert!(SweepConfig { refine_shrink: 1.0, ..SweepConfig::default() }.validate().is_err());
        assert!(SweepConfig { prob_floor: 0.0, ..SweepConfig::default() }.validate().is_err());
        assert!(SweepConfig { refine_rounds: 0, ..SweepConfig::default() }.validate().is_err());
    }

    #[test]
    fn sweep_recovers_position_standard_deviation() {
        let grid = Grid1D::new(512, 16.0).unwrap();
        let up = make_family_state(&"gaussian:K=1".parse().unwrap(), &grid).unwrap();
        let z = position_operator(&grid);
        let setup = MeasurementSetup::new(1e-5, sigma_z(), z.clone()).unwrap();
        let out = sweep_qubit(&setup, &up, &z, &SweepConfig::default()).unwrap();
        assert!((out.max_abs_shift - 1.0).abs() < 1e-3, "{}", out.max_abs_shift);
        for w in out.history.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn identity_readout_gives_zero() {
        let (setup, up, _) = random_qubit(1, 4);
        let id = HermitianOperator::identity(4).unwrap();
        let out = sweep_qubit(&setup, &up, &id, &quick(1e-5)).unwrap();
        assert!(out.max_abs_shift == 0.0 || out.max_abs_shift < 1e-15);
    }

    #[test]
    fn sweep_stays_below_finite_g_limit_and_reaches_it() {
        for seed in 0..3 {
            let (setup, up, m) = random_qubit(100 + seed, 5);
            let out = sweep_qubit(&setup, &up, &m, &SweepConfig::default()).unwrap();
            let lim = amplification_limit(&build_xi_g(&setup, &up, 1e-12).unwrap(), &m, &up).unwrap().limit;
            assert!(out.max_abs_shift <= lim + 1e-9);
            assert!(lim - out.max_abs_shift < 1e-3, "seed {seed}: {} vs {lim}", out.max_abs_shift);
        }
    }

    #[test]
    fn sweep_reports_no_valid_selection() {
        let (setup, up, m) = random_qubit(3, 4);
        let cfg = SweepConfig { prob_floor: 2.0, ..quick(1e-5) };
        assert!(matches!(sweep_qubit(&setup, &up, &m, &cfg), Err(Error::NoValidSelections { .. })));
    }

    #[test]
    fn random_search_agrees_with_qubit_sweep() {
        let (setup, up, m) = random_qubit(7, 5);
        let sweep = sweep_qubit(&setup, &up, &m, &SweepConfig::default()).unwrap();
        let search = random_search(&setup, &up, &m, &SweepConfig::default(), 10_000).unwrap();
        assert!((sweep.max_abs_shift - search.max_abs_shift).abs() < 1e-3);
    }

    #[test]
    fn random_search_three_level_system() {
        let mut r = rng(77);
        let a = hermitian_with_spectrum(&mut r, &[-0.8, 0.1, 0.9]);
        let omega = hermitian_with_spectrum(&mut r, &[-1.0, -0.3, 0.4, 1.2]);
        let m = random_hermitian(&mut r, 4);
        let up = PureDetectorState::new(haar_state(&mut r, 4), BasisLabel::Abstract).unwrap();
        let setup = MeasurementSetup::new(1e-5, a, omega.clone()).unwrap();
        let cfg = SweepConfig { prob_floor: 1e-30, refine_rounds: 200, ..SweepConfig::default() };
        let out = random_search(&setup, &up, &m, &cfg, 10_000).unwrap();
        let lim = amplification_limit(&build_xi_tilde(&omega, &up, 3, 1e-10).unwrap(), &m, &up).unwrap().limit;
        assert!((out.max_abs_shift - lim).abs() < 0.02 * lim, "{} vs {lim}", out.max_abs_shift);
    }

    #[test]
    fn random_search_is_deterministic() {
        let (setup, up, m) = random_qubit(9, 4);
        let cfg = SweepConfig { seed: 42, refine_rounds: 10, ..SweepConfig::default() };
        let a = random_search(&setup, &up, &m, &cfg, 10_000).unwrap();
        let b = random_search(&setup, &up, &m, &cfg, 10_000).unwrap();
        assert_eq!(a.max_abs_shift.to_bits(), b.max_abs_shift.to_bits());
        assert_eq!(a.argmax, b.argmax);
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn fig1_weak_value_dial() {
        for th in default_theta_grid(50) {
            let sel = fig1_selection(th);
            let aw = weak_value(&sel, &sigma_z()).unwrap();
            let want = 1.0 / (-th / 2.0).tan();
            assert!(aw.re.abs() < 1e-9 * want.max(1.0));
            assert!((aw.im - want).abs() < 1e-9 * want.max(1.0));
        }
    }

    #[test]
    fn fig1_linear_regime_and_peak() {
        let spec: DetectorFamilySpec = "exponential:K=1".parse().unwrap();
        let grid = spec.default_grid();
        let g = 1e-4;
        let rows = fig1_curve(&spec, &grid, &[g], &default_theta_grid(400)).unwrap();
        let up = make_family_state(&spec, &grid).unwrap();
        let z = position_operator(&grid);
        let var = crate::pointer::moments(&up, &z, &z).unwrap().m_var;
        let small = rows.iter().find(|r| r.im_aw < 1.0 && r.im_aw > 0.1).unwrap();
        let linear = 2.0 * g * small.im_aw * var;
        assert!((small.shift - linear).abs() < 0.01 * linear);
        let fo = first_order_shift(C64::new(0.0, small.im_aw), g, &up, &z, &z).unwrap();
        assert!((fo - linear).abs() < 1e-12);
        let summary = fig1_summary(&rows);
        assert!((summary.overall_max - FRAC_1_SQRT_2).abs() < 0.01 * FRAC_1_SQRT_2);
    }

    #[test]
    fn random_search_needs_enough_samples() {
        let mut r = rng(31);
        let setup = MeasurementSetup::new(1e-4, ladder(3).unwrap(), random_hermitian(&mut r, 3)).unwrap();
        let up = PureDetectorState::new(haar_state(&mut r, 3), BasisLabel::Abstract).unwrap();
        let m = random_hermitian(&mut r, 3);
        let err = random_search(&setup, &up, &m, &SweepConfig::default(), MIN_SAMPLES - 1).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }
}
