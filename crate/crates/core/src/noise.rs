//! Ornstein-Uhlenbeck model of the global magnetic dephasing field `F(t)`.
//!
//! `dF = −F dt/τ + √c dW` has stationary variance `cτ/2` and autocorrelation
//! `(cτ/2) e^{−|t|/τ}`. A qubit under `(F/2)σ^z` picks up the phase
//! `φ(t) = ∫₀ᵗ F`, whose stationary variance is `cτ³ (t/τ − 1 + e^{−t/τ})`.
//! For `t ≫ τ` the coherence `⟨cos φ⟩ = e^{−⟨φ²⟩/2}` decays as `e^{−t/T₂}` with
//! `T₂ = 2/(cτ²)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OUParams {
    /// Diffusion constant (rad²/s³).
    pub c: f64,
    /// Correlation time (s).
    pub tau: f64,
    pub seed: u64,
}

impl OUParams {
    pub fn new(c: f64, tau: f64, seed: u64) -> Result<Self> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("diffusion constant must be >= 0, got {c}")));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("correlation time must be > 0, got {tau}")));
        }
        Ok(Self { c, tau, seed })
    }

    /// `T₂ = 2/(cτ²)`; infinite for `c = 0`.
    pub fn t2(&self) -> f64 {
        2.0 / (self.c * self.tau * self.tau)
    }

    /// Stationary variance `cτ/2`.
    pub fn stationary_variance(&self) -> f64 {
        0.5 * self.c * self.tau
    }

    /// Stationary autocorrelation `(cτ/2) e^{−|t|/τ}`.
    pub fn autocorrelation(&self, t: f64) -> f64 {
        self.stationary_variance() * (-t.abs() / self.tau).exp()
    }
}

pub fn ou_from_t2(t2: f64, tau_ratio: f64, seed: u64) -> Result<OUParams> {
    if !(t2 > 0.0) {
        return Err(Error::InvalidParameter(format!("T2 must be positive, got {t2}")));
    }
    if !(tau_ratio > 0.0 && tau_ratio < 1.0) {
        return Err(Error::InvalidParameter(format!("tau ratio must lie in (0, 1), got {tau_ratio}")));
    }
    if t2.is_infinite() {
        return OUParams::new(0.0, 1.0, seed);
    }
    let tau = tau_ratio * t2;
    OUParams::new(2.0 / (t2 * tau * tau), tau, seed)
}

/// Generator for trajectory `stream` of a run seeded with `seed`. Streams are
/// independent of one another and of scheduling order.
pub fn trajectory_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

#[derive(Debug, Clone)]
pub struct OUTrajectoryState {
    /// Current field value (rad/s).
    pub value: f64,
    pub time: f64,
    rng: ChaCha8Rng,
}

impl OUTrajectoryState {
    /// Starts trajectory `stream` from a stationary draw `N(0, cτ/2)`.
    pub fn stationary(params: &OUParams, stream: u64) -> Self {
        let mut rng = trajectory_rng(params.seed, stream);
        let value = params.stationary_variance().sqrt() * normal(&mut rng);
        Self { value, time: 0.0, rng }
    }

    /// Starts trajectory `stream` from a fixed value.
    pub fn from_value(params: &OUParams, stream: u64, value: f64) -> Self {
        Self {
            value,
            time: 0.0,
            rng: trajectory_rng(params.seed, stream),
        }
    }
}

/// Exact update `F ← F e^{−dt/τ} + [cτ/2 (1 − e^{−2dt/τ})]^{1/2} n`.
pub fn ou_step(state: &mut OUTrajectoryState, params: &OUParams, dt: f64) -> Result<()> {
    if !(dt >= 0.0) {
        return Err(Error::InvalidParameter(format!("negative OU step {dt}")));
    }
    let decay = (-dt / params.tau).exp();
    let sd = (params.stationary_variance() * -(-2.0 * dt / params.tau).exp_m1()).sqrt();
    let n = normal(&mut state.rng);
    state.value = state.value * decay + sd * n;
    state.time += dt;
    Ok(())
}

/// Field values on the grid `t_k = k·dt`, `k = 0..cells`, for trajectory
/// `stream`. The simulators hold `F` at `t_k` over the cell `[t_k, t_k + dt)`.
pub fn sample_path(params: &OUParams, stream: u64, dt: f64, cells: usize) -> Result<Vec<f64>> {
    let mut st = OUTrajectoryState::stationary(params, stream);
    let mut out = Vec::with_capacity(cells);
    for _ in 0..cells {
        out.push(st.value);
        ou_step(&mut st, params, dt)?;
    }
    Ok(out)
}

/// Every `factor`-th value of a path, i.e. the same realization on a grid
/// `factor` times coarser.
pub fn coarsen(path: &[f64], factor: usize) -> Vec<f64> {
    assert!(factor > 0);
    path.iter().step_by(factor).copied().collect()
}

/// Stationary phase variance `⟨φ²(t)⟩ = cτ³ (t/τ − 1 + e^{−t/τ})`.
pub fn phase_variance(t: f64, params: &OUParams) -> f64 {
    let x = t / params.tau;
    // x − 1 + e^{−x} loses digits for small x; use the series there.
    let g = if x < 1e-3 {
        x * x / 2.0 - x * x * x / 6.0 + x.powi(4) / 24.0
    } else {
        x + (-x).exp_m1()
    };
    params.c * params.tau.powi(3) * g
}

/// Phase variance for a field that starts at exactly zero at `t = 0`:
/// `cτ² (t − τ(3/2 − 2e^{−t/τ} + ½e^{−2t/τ}))`.
pub fn quiescent_phase_variance(t: f64, params: &OUParams) -> f64 {
    let e = (-t / params.tau).exp();
    params.c * params.tau * params.tau * (t - params.tau * (1.5 - 2.0 * e + 0.5 * e * e))
}

/// `⟨σ^x(t)⟩ = e^{−⟨φ²(t)⟩/2}` for a qubit prepared in `|+⟩` under stationary noise.
pub fn analytic_coherence(t: f64, params: &OUParams) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("negative time {t}")));
    }
    Ok((-0.5 * phase_variance(t, params)).exp())
}

/// Envelope for the quiescent start `F(0) = 0`.
pub fn quiescent_coherence(t: f64, params: &OUParams) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("negative time {t}")));
    }
    Ok((-0.5 * quiescent_phase_variance(t, params)).exp())
}

/// Joint exact update of the field and its integral over a step `h`.
fn field_and_phase_step(f: f64, phi: f64, h: f64, p: &OUParams, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let s2 = p.stationary_variance();
    let mu = (-h / p.tau).exp();
    let one_minus = -(-h / p.tau).exp_m1();
    let var_f = s2 * one_minus * (1.0 + mu);
    let x = h / p.tau;
    let var_phi = s2 * p.tau * p.tau * (2.0 * x - 3.0 + 4.0 * mu - mu * mu);
    let cov = s2 * p.tau * one_minus * one_minus;
    let (n1, n2) = (normal(rng), normal(rng));
    let f_next = mu * f + var_f.sqrt() * n1;
    let mut dphi = p.tau * one_minus * f;
    if var_f > 0.0 {
        let k = cov / var_f.sqrt();
        dphi += k * n1 + (var_phi - k * k).max(0.0).sqrt() * n2;
    }
    (f_next, phi + dphi)
}

/// Ramsey decay sampled at `times`, with the Monte Carlo mean and standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceCurve {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub analytic: Vec<f64>,
    pub trajectories: usize,
    /// Means over contiguous groups of trajectories, for jackknife errors of
    /// derived quantities (the curve's points are strongly correlated).
    pub batch_means: Vec<Vec<f64>>,
}

/// Number of trajectory groups kept in [`CoherenceCurve::batch_means`].
pub const COHERENCE_BATCHES: usize = 20;

/// Single-qubit pure-dephasing fast path: `⟨σ^x(t)⟩ = ⟨cos φ(t)⟩` with `φ`
/// advanced exactly alongside `F`. `times` must be sorted and non-negative.
pub fn coherence_fast_path(params: &OUParams, times: &[f64], trajectories: usize) -> Result<CoherenceCurve> {
    if trajectories < 2 {
        return Err(Error::InvalidParameter("need at least two trajectories".into()));
    }
    if times.iter().any(|t| !(*t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("coherence times must be sorted and non-negative".into()));
    }
    let per: Vec<Vec<f64>> = (0..trajectories as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = trajectory_rng(params.seed, k);
            let mut f = params.stationary_variance().sqrt() * normal(&mut rng);
            let mut phi = 0.0;
            let mut t = 0.0;
            times
                .iter()
                .map(|&tn| {
                    if tn > t {
                        (f, phi) = field_and_phase_step(f, phi, tn - t, params, &mut rng);
                        t = tn;
                    }
                    phi.cos()
                })
                .collect()
        })
        .collect();
    let nb = COHERENCE_BATCHES.min(trajectories);
    let batch_means: Vec<Vec<f64>> = (0..nb)
        .map(|b| {
            let rows = &per[b * trajectories / nb..(b + 1) * trajectories / nb];
            (0..times.len())
                .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64)
                .collect()
        })
        .collect();
    let n = trajectories as f64;
    let mut mean = vec![0.0; times.len()];
    let mut sq = vec![0.0; times.len()];
    for row in &per {
        for (j, v) in row.iter().enumerate() {
            mean[j] += v;
            sq[j] += v * v;
        }
    }
    let mut stderr = Vec::with_capacity(times.len());
    for j in 0..times.len() {
        mean[j] /= n;
        let var = ((sq[j] / n - mean[j] * mean[j]) * n / (n - 1.0)).max(0.0);
        stderr.push((var / n).sqrt());
    }
    let analytic = times
        .iter()
        .map(|&t| analytic_coherence(t, params))
        .collect::<Result<_>>()?;
    Ok(CoherenceCurve {
        times: times.to_vec(),
        mean,
        stderr,
        analytic,
        trajectories,
        batch_means,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct T2Fit {
    pub t2: f64,
    /// Jackknife error over trajectory batches; falls back to the
    /// least-squares error when no batches are stored.
    pub t2_stderr: f64,
    /// Fitted `ln C` at `t = 0`; slightly positive for finite `τ`.
    pub intercept: f64,
    pub points_used: usize,
}

/// Weighted least squares of `ln m` against `t` on the selected points.
/// Returns `(slope, intercept, slope_se)`.
fn log_line(times: &[f64], mean: &[f64], weights: &[f64], keep: &[usize]) -> Option<(f64, f64, f64)> {
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &j in keep {
        if mean[j] <= 0.0 {
            return None;
        }
        let (t, y, w) = (times[j], mean[j].ln(), weights[j]);
        sw += w;
        sx += w * t;
        sy += w * y;
        sxx += w * t * t;
        sxy += w * t * y;
    }
    let det = sw * sxx - sx * sx;
    if !(det > 0.0) {
        return None;
    }
    Some(((sw * sxy - sx * sy) / det, (sxx * sy - sx * sxy) / det, (sw / det).sqrt()))
}

/// Straight-line fit of `ln C(t)` against `t`, weighted by `(C/σ_C)²`, on
/// points beyond `t_min` whose mean exceeds five standard errors.
pub fn fit_t2(curve: &CoherenceCurve, t_min: f64) -> Result<T2Fit> {
    let keep: Vec<usize> = (0..curve.times.len())
        .filter(|&j| {
            let (t, m, e) = (curve.times[j], curve.mean[j], curve.stderr[j]);
            t >= t_min && e > 0.0 && m > 5.0 * e
        })
        .collect();
    if keep.len() < 3 {
        return Err(Error::FitFailure(format!("only {} usable points", keep.len())));
    }
    let weights: Vec<f64> = (0..curve.times.len())
        .map(|j| (curve.mean[j] / curve.stderr[j].max(f64::MIN_POSITIVE)).powi(2))
        .collect();
    let (slope, intercept, slope_se) =
        log_line(&curve.times, &curve.mean, &weights, &keep).ok_or_else(|| Error::FitFailure("degenerate fit".into()))?;
    if !(slope < 0.0) {
        return Err(Error::FitFailure(format!("coherence does not decay (slope {slope})")));
    }
    let t2 = -1.0 / slope;
    let mut t2_stderr = slope_se / (slope * slope);

    let nb = curve.batch_means.len();
    if nb >= 2 {
        let mut loo = Vec::with_capacity(nb);
        for skip in 0..nb {
            let mean: Vec<f64> = (0..curve.times.len())
                .map(|j| {
                    (0..nb).filter(|&b| b != skip).map(|b| curve.batch_means[b][j]).sum::<f64>() / (nb - 1) as f64
                })
                .collect();
            match log_line(&curve.times, &mean, &weights, &keep) {
                Some((s, _, _)) if s < 0.0 => loo.push(-1.0 / s),
                _ => return Err(Error::FitFailure("jackknife replicate failed".into())),
            }
        }
        let m = loo.iter().sum::<f64>() / nb as f64;
        let ss: f64 = loo.iter().map(|x| (x - m) * (x - m)).sum();
        t2_stderr = (ss * (nb - 1) as f64 / nb as f64).sqrt();
    }
    Ok(T2Fit {
        t2,
        t2_stderr,
        intercept,
        points_used: keep.len(),
    })
}

/// `n` uniform points over `[0, t_end]`, endpoints included.
pub fn uniform_grid(t_end: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n).map(|k| t_end * k as f64 / (n - 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> OUParams {
        ou_from_t2(5e-3, 0.1, 7).unwrap()
    }

    #[test]
    fn parameters_from_t2() {
        let p = reference();
        assert!((p.tau - 0.5e-3).abs() < 1e-18);
        assert!((p.c - 1.6e9).abs() < 1e-3);
        assert!((p.t2() - 5e-3).abs() < 1e-15);
        let q = ou_from_t2(10e-3, 0.1, 7).unwrap();
        assert!((q.c * 8.0 / p.c - 1.0).abs() < 1e-12);
        assert_eq!(ou_from_t2(f64::INFINITY, 0.1, 7).unwrap().c, 0.0);
        assert!(ou_from_t2(5e-3, 1.0, 0).is_err());
        assert!(ou_from_t2(-1.0, 0.1, 0).is_err());
        assert!(OUParams::new(-1.0, 1.0, 0).is_err());
    }

    #[test]
    fn zero_step_keeps_value() {
        let p = reference();
        let mut s = OUTrajectoryState::stationary(&p, 3);
        let before = s.value;
        ou_step(&mut s, &p, 0.0).unwrap();
        assert_eq!(s.value, before);
        assert!(ou_step(&mut s, &p, -1.0).is_err());
    }

    #[test]
    fn frozen_process_decays_deterministically() {
        let p = OUParams::new(0.0, 1e-3, 1).unwrap();
        let mut s = OUTrajectoryState::from_value(&p, 0, 2.0);
        ou_step(&mut s, &p, 1e-3).unwrap();
        assert!((s.value - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn coherence_limits() {
        let p = reference();
        assert_eq!(analytic_coherence(0.0, &p).unwrap(), 1.0);
        let at_t2 = analytic_coherence(5e-3, &p).unwrap();
        assert!(at_t2 > (-1.0f64).exp() && at_t2 < (-0.9f64).exp(), "{at_t2}");
        // Deep in the Markov limit the envelope is the pure exponential.
        let fast = ou_from_t2(5e-3, 1e-6, 0).unwrap();
        let c = analytic_coherence(5e-3, &fast).unwrap();
        assert!((c - (-1.0f64).exp()).abs() < 1e-5);
        assert!(quiescent_coherence(0.0, &p).unwrap() == 1.0);
        assert!(quiescent_coherence(5e-3, &p).unwrap() > at_t2);
    }

    #[test]
    fn phase_variance_small_time_branch_is_continuous() {
        let p = reference();
        let x = 1e-3 * p.tau;
        let a = phase_variance(x * (1.0 - 1e-12), &p);
        let b = phase_variance(x * (1.0 + 1e-12), &p);
        assert!((a - b).abs() < 1e-9 * a);
        // Short times: ⟨φ²⟩ ≈ (cτ/2) t².
        let t = 1e-9;
        assert!((phase_variance(t, &p) / (p.stationary_variance() * t * t) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn seeds_are_deterministic_and_streams_differ() {
        let p = reference();
        let a = sample_path(&p, 4, 1e-5, 100).unwrap();
        let b = sample_path(&p, 4, 1e-5, 100).unwrap();
        let c = sample_path(&p, 5, 1e-5, 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(coarsen(&a, 2).len(), 50);
        assert_eq!(coarsen(&a, 2)[3], a[6]);
    }

    #[test]
    fn fast_path_tracks_the_envelope_and_fit_recovers_t2() {
        let p = reference();
        let times = uniform_grid(3.0 * p.t2(), 200);
        let curve = coherence_fast_path(&p, &times, 5000).unwrap();
        for j in 0..times.len() {
            let z = (curve.mean[j] - curve.analytic[j]).abs() / curve.stderr[j].max(1e-12);
            assert!(z < 5.0 || (curve.mean[j] - curve.analytic[j]).abs() < 1e-12, "t={} z={z}", times[j]);
        }
        let fit = fit_t2(&curve, 4.0 * p.tau).unwrap();
        // The points share trajectories, so the naive error understates the spread.
        assert!(fit.t2_stderr > 0.01 * p.t2() && fit.t2_stderr < 0.06 * p.t2(), "{fit:?}");
        assert!((fit.t2 - p.t2()).abs() < 4.0 * fit.t2_stderr, "{fit:?}");
        assert_eq!(curve.batch_means.len(), COHERENCE_BATCHES);
    }
}
