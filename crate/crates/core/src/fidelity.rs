//! Gate metrics: Bell-state fidelity over a final-time scan, entanglement
//! fidelity of a two-qubit channel, and its Haar-sampled counterpart.
//!
//! A channel is described by its action on spin operators. The entanglement
//! fidelity with respect to a reference unitary `V` is
//! `F_e = (1/d²) Σ_{αβ} ⟨α|V† E(|α⟩⟨β|) V|β⟩`, and the average fidelity over
//! pure inputs is `(d F_e + 1)/(d + 1)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::effective::{ideal_gate, two_qubit_index};
use crate::error::{Error, Result};
use crate::noise::trajectory_rng;
use crate::operators::StateVector;
use crate::propagate::{NoisePath, NoiseSpec, PulseKind, PulseSchedule, Simulator, SpinPermutation, ThermalSpec};

/// Two-qubit Hilbert-space dimension.
pub const D: usize = 4;
/// Slack on `[0, 1]` before a fidelity is reported as non-physical.
pub const PHYSICAL_SLACK: f64 = 1e-9;
/// Noise streams of Haar inputs start here, clear of the `F_e` realizations.
pub const HAAR_STREAM_BASE: u64 = 1 << 32;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n.max(1) as f64;
        let stderr = if n > 1 {
            let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr, samples: n }
    }
}

/// Average fidelity over pure inputs from the entanglement fidelity.
pub fn channel_fidelity(fe: f64) -> f64 {
    (D as f64 * fe + 1.0) / (D as f64 + 1.0)
}

fn check_physical(what: &str, f: f64) -> Result<()> {
    if !(f >= -PHYSICAL_SLACK && f <= 1.0 + PHYSICAL_SLACK) {
        return Err(Error::NonPhysical(format!("{what} = {f}")));
    }
    Ok(())
}

/// Computational basis vector `|s⟩` of `dim` levels.
fn basis(dim: usize, s: usize) -> DVector<Complex64> {
    let mut v = DVector::zeros(dim);
    v[s] = Complex64::new(1.0, 0.0);
    v
}

fn expectation(rho: &DMatrix<Complex64>, psi: &DVector<Complex64>) -> f64 {
    (psi.adjoint() * rho * psi)[(0, 0)].re
}

/// A two-qubit channel, possibly stochastic. `realization` selects the noise
/// history; deterministic channels ignore it.
pub trait Channel: Sync {
    /// Noise histories averaged in the entanglement fidelity.
    fn realizations(&self) -> usize;

    /// `E(|α⟩⟨β|)` for computational `α, β`, stored at `α·d + β`.
    fn basis_images(&self, realization: u64) -> Result<Vec<DMatrix<Complex64>>>;

    /// `E(|ψ⟩⟨ψ|)` for a normalized pure input.
    fn image(&self, psi: &DVector<Complex64>, realization: u64) -> Result<DMatrix<Complex64>>;
}

/// Channel given by Kraus operators, `E(ρ) = Σ_k K_k ρ K_k†`.
#[derive(Debug, Clone)]
pub struct KrausChannel {
    ops: Vec<DMatrix<Complex64>>,
}

impl KrausChannel {
    pub fn new(ops: Vec<DMatrix<Complex64>>) -> Result<Self> {
        if ops.is_empty() || ops.iter().any(|k| k.shape() != (D, D)) {
            return Err(Error::InvalidParameter("Kraus operators must be a non-empty list of 4x4 matrices".into()));
        }
        let mut sum = DMatrix::<Complex64>::zeros(D, D);
        for k in &ops {
            sum += k.adjoint() * k;
        }
        let defect = (sum - DMatrix::identity(D, D)).camax();
        if defect > 1e-10 {
            return Err(Error::NonPhysical(format!("Kraus operators are not trace preserving (defect {defect:e})")));
        }
        Ok(Self { ops })
    }

    pub fn unitary(u: DMatrix<Complex64>) -> Result<Self> {
        Self::new(vec![u])
    }

    pub fn identity() -> Self {
        Self {
            ops: vec![DMatrix::identity(D, D)],
        }
    }

    /// `ρ → (1−p) ρ + p 𝟙/d`, written with the sixteen two-qubit Paulis.
    pub fn depolarizing(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("depolarizing strength {p} outside [0, 1]")));
        }
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let paulis = [
            [[one, ZERO], [ZERO, one]],
            [[ZERO, one], [one, ZERO]],
            [[ZERO, -i], [i, ZERO]],
            [[one, ZERO], [ZERO, -one]],
        ];
        let mut ops = Vec::with_capacity(16);
        for (a, pa) in paulis.iter().enumerate() {
            for (b, pb) in paulis.iter().enumerate() {
                let w = if a == 0 && b == 0 { 1.0 - p + p / 16.0 } else { p / 16.0 };
                ops.push(DMatrix::from_fn(D, D, |r, c| pa[r & 1][c & 1] * pb[r >> 1][c >> 1] * w.sqrt()));
            }
        }
        Self::new(ops)
    }

    fn apply(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(D, D);
        for k in &self.ops {
            out += k * rho * k.adjoint();
        }
        out
    }
}

impl Channel for KrausChannel {
    fn realizations(&self) -> usize {
        1
    }

    fn basis_images(&self, _realization: u64) -> Result<Vec<DMatrix<Complex64>>> {
        let mut out = Vec::with_capacity(D * D);
        for a in 0..D {
            for b in 0..D {
                out.push(self.apply(&(basis(D, a) * basis(D, b).adjoint())));
            }
        }
        Ok(out)
    }

    fn image(&self, psi: &DVector<Complex64>, _realization: u64) -> Result<DMatrix<Complex64>> {
        Ok(self.apply(&(psi * psi.adjoint())))
    }
}

/// The simulated gate: two ions with thermal phonons, a pulse schedule and
/// optional dephasing noise, traced over the phonons at `t_final`.
pub struct SimulatedChannel<'a> {
    pub sim: &'a Simulator,
    pub thermal: ThermalSpec,
    pub schedule: PulseSchedule,
    pub noise: Option<NoiseSpec>,
    pub t_final: f64,
}

/// Columns evolved together when assembling basis images.
const IMAGE_CHUNK: usize = 8;

impl<'a> SimulatedChannel<'a> {
    pub fn new(
        sim: &'a Simulator,
        thermal: ThermalSpec,
        schedule: PulseSchedule,
        noise: Option<NoiseSpec>,
        t_final: f64,
    ) -> Result<Self> {
        if sim.layout().num_qubits() != 2 {
            return Err(Error::InvalidParameter("channel fidelities are defined for two ions".into()));
        }
        schedule.validate(t_final, 2)?;
        Ok(Self {
            sim,
            thermal,
            schedule,
            noise,
            t_final,
        })
    }

    /// Gate the channel should implement: the ideal gate preceded by the
    /// net spin frame of the pulses, see [`gate_reference`].
    pub fn reference(&self) -> Result<DMatrix<Complex64>> {
        gate_reference(self.sim.params().phi_d, &self.schedule)
    }

    fn noise_path(&self, realization: u64) -> Result<Option<NoisePath>> {
        self.noise
            .as_ref()
            .map(|n| {
                NoisePath::sample(&n.ou, n.stream_offset + realization, self.sim.options().dt, self.t_final, n.refinement)
            })
            .transpose()
    }
}

impl Channel for SimulatedChannel<'_> {
    fn realizations(&self) -> usize {
        self.noise.as_ref().map_or(1, |n| n.trajectories)
    }

    fn basis_images(&self, realization: u64) -> Result<Vec<DMatrix<Complex64>>> {
        let layout = *self.sim.layout();
        let (dim, pd) = (layout.dim(), layout.phonon_dim());
        let mix = self.thermal.branches(layout.num_modes())?;
        let path = self.noise_path(realization)?;
        let mut images = vec![DMatrix::<Complex64>::zeros(D, D); D * D];
        for chunk in mix.branches.chunks(IMAGE_CHUNK) {
            let ncols = D * chunk.len();
            let mut psi = Vec::with_capacity(dim * ncols);
            for b in chunk {
                for a in 0..D {
                    psi.extend(StateVector::product(layout, &basis(D, a), &b.occupations)?.amplitudes().iter());
                }
            }
            self.sim
                .evolve_columns(&mut psi, ncols, &self.schedule, self.t_final, path.as_ref(), &[], &mut |_, _| {})?;
            for (bi, b) in chunk.iter().enumerate() {
                let col = |a: usize| &psi[(bi * D + a) * dim..(bi * D + a + 1) * dim];
                for a in 0..D {
                    for c in 0..D {
                        let (pa, pc) = (col(a), col(c));
                        let e = &mut images[a * D + c];
                        for s in 0..D {
                            for t in 0..D {
                                let mut acc = ZERO;
                                for p in 0..pd {
                                    acc += pa[s * pd + p] * pc[t * pd + p].conj();
                                }
                                e[(s, t)] += acc * b.weight;
                            }
                        }
                    }
                }
            }
        }
        let trace: f64 = (0..D).map(|a| images[a * D + a].trace().re).sum::<f64>() / D as f64;
        if (trace - 1.0).abs() > 1e-8 {
            return Err(Error::InternalConsistency(format!("channel images lost trace: {trace}")));
        }
        Ok(images)
    }

    fn image(&self, psi: &DVector<Complex64>, realization: u64) -> Result<DMatrix<Complex64>> {
        let noise = self.noise.map(|n| NoiseSpec {
            trajectories: 1,
            stream_offset: n.stream_offset + realization,
            ..n
        });
        let r = self
            .sim
            .evolve_thermal(psi, &self.thermal, &self.schedule, noise.as_ref(), self.t_final, &[self.t_final])?;
        Ok(r.spin_density.into_iter().next().expect("one record time"))
    }
}

/// `U_eff` preceded by the spin matrices of all pulses in `schedule`. For a
/// single `Z_1 Z_2` echo at mid-gate this is exact: the echo refocuses the
/// carrier and commutes with `σ_1^d σ_2^d`, leaving `Z_1 Z_2 · U_eff`.
pub fn gate_reference(phi_d: f64, schedule: &PulseSchedule) -> Result<DMatrix<Complex64>> {
    let mut frame = DMatrix::<Complex64>::identity(D, D);
    for p in schedule.pulses() {
        if let PulseKind::Custom(_) = p.kind {
            return Err(Error::InvalidParameter("reference gate is only defined for X, Z and echo pulses".into()));
        }
        frame = SpinPermutation::from_factors(2, &p.kind.factors())?.matrix() * frame;
    }
    Ok(frame * ideal_gate(phi_d))
}

/// `F_e` of one set of basis images against `reference`.
pub fn entanglement_fidelity_of(images: &[DMatrix<Complex64>], reference: &DMatrix<Complex64>) -> Result<f64> {
    if images.len() != D * D || reference.shape() != (D, D) {
        return Err(Error::InvalidParameter("need 16 basis images and a 4x4 reference".into()));
    }
    let vd = reference.adjoint();
    let mut acc = ZERO;
    for a in 0..D {
        for b in 0..D {
            let m = &vd * &images[a * D + b] * reference;
            acc += m[(a, b)];
        }
    }
    let fe = acc.re / (D * D) as f64;
    check_physical("entanglement fidelity", fe)?;
    Ok(fe)
}

/// `F_e` averaged over the channel's noise realizations.
pub fn entanglement_fidelity(channel: &dyn Channel, reference: &DMatrix<Complex64>) -> Result<Estimate> {
    let k = channel.realizations();
    if k == 0 {
        return Err(Error::InvalidParameter("channel has no realizations".into()));
    }
    let values: Vec<f64> = (0..k as u64)
        .into_par_iter()
        .map(|r| entanglement_fidelity_of(&channel.basis_images(r)?, reference))
        .collect::<Result<_>>()?;
    Ok(Estimate::from_samples(&values))
}

/// Haar-random two-qubit pure state number `index` of the stream `seed`.
pub fn haar_state(seed: u64, index: u64) -> DVector<Complex64> {
    let mut rng = trajectory_rng(seed, index);
    let v = DVector::from_fn(D, |_, _| {
        Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
    });
    let n = v.norm();
    v / Complex64::new(n, 0.0)
}

/// Mean of `⟨ψ|V† E(ψ) V|ψ⟩` over `num_states` Haar inputs. Input `j` sees
/// noise realization `HAAR_STREAM_BASE + j`.
pub fn haar_channel_fidelity(
    channel: &dyn Channel,
    reference: &DMatrix<Complex64>,
    num_states: usize,
    seed: u64,
) -> Result<Estimate> {
    if num_states < 10 {
        return Err(Error::InvalidParameter(format!("need at least 10 Haar states, got {num_states}")));
    }
    let values: Vec<f64> = (0..num_states as u64)
        .into_par_iter()
        .map(|j| {
            let psi = haar_state(seed, j);
            let rho = channel.image(&psi, HAAR_STREAM_BASE + j)?;
            let f = expectation(&rho, &(reference * &psi));
            check_physical("state fidelity", f)?;
            Ok(f)
        })
        .collect::<Result<_>>()?;
    Ok(Estimate::from_samples(&values))
}

/// Deviation `F_haar − (4F_e+1)/5` and its standard error, combining the
/// errors of both estimates.
pub fn relation_deviation(fe: &Estimate, haar: &Estimate) -> (f64, f64) {
    let scale = D as f64 / (D as f64 + 1.0);
    let se = (haar.stderr.powi(2) + (scale * fe.stderr).powi(2)).sqrt();
    (haar.mean - channel_fidelity(fe.mean), se)
}

/// Evenly spaced final times over `[1−span, 1+span]·center`.
pub fn scan_grid(center: f64, span: f64, points: usize) -> Result<Vec<f64>> {
    if !(center > 0.0) || !(0.0..1.0).contains(&span) || points == 0 {
        return Err(Error::InvalidParameter("scan needs a positive centre, span in [0,1) and points > 0".into()));
    }
    if points == 1 {
        return Ok(vec![center]);
    }
    let step = 2.0 * span / (points - 1) as f64;
    Ok((0..points).map(|k| center * (1.0 - span + step * k as f64)).collect())
}

/// Vertex of the parabola through three equally spaced samples around a
/// maximum at `x1`, clamped to the bracket. `None` when not concave.
pub fn parabolic_vertex(x: [f64; 3], y: [f64; 3]) -> Option<f64> {
    let h = x[1] - x[0];
    let curv = y[0] - 2.0 * y[1] + y[2];
    if !(curv < 0.0) || !(h > 0.0) {
        return None;
    }
    let off = 0.5 * h * (y[0] - y[2]) / curv;
    Some(x[1] + off.clamp(-h, h))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanPoint {
    pub t_final: f64,
    pub fidelity: f64,
    pub stderr: f64,
}

/// Result of maximizing a fidelity over the final time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BellScan {
    pub points: Vec<ScanPoint>,
    /// Best evaluated point, including the refined one.
    pub best: ScanPoint,
    /// The grid maximum sat on an end point, so no refinement was possible.
    pub peak_on_edge: bool,
}

/// Evaluates `eval(t_f) = (F, stderr)` on `grid`, then once more at the
/// parabolic vertex of the best interior point, and keeps the maximum.
pub fn bell_fidelity<E>(grid: &[f64], eval: E) -> Result<BellScan>
where
    E: Fn(f64) -> Result<(f64, f64)> + Sync,
{
    if grid.is_empty() || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("scan grid must be non-empty and increasing".into()));
    }
    let point = |t: f64| -> Result<ScanPoint> {
        let (fidelity, stderr) = eval(t)?;
        check_physical("Bell fidelity", fidelity)?;
        Ok(ScanPoint {
            t_final: t,
            fidelity,
            stderr,
        })
    };
    let mut points: Vec<ScanPoint> = grid.par_iter().map(|&t| point(t)).collect::<Result<_>>()?;
    let (imax, _) = points
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, p)| if p.fidelity > acc.1 { (i, p.fidelity) } else { acc });
    let peak_on_edge = grid.len() > 1 && (imax == 0 || imax + 1 == grid.len());
    if !peak_on_edge && grid.len() >= 3 {
        let x = [grid[imax - 1], grid[imax], grid[imax + 1]];
        let y = [points[imax - 1].fidelity, points[imax].fidelity, points[imax + 1].fidelity];
        if let Some(tv) = parabolic_vertex(x, y).filter(|&tv| tv != grid[imax]) {
            points.push(point(tv)?);
        }
    }
    let best = *points
        .iter()
        .max_by(|a, b| a.fidelity.total_cmp(&b.fidelity))
        .expect("non-empty grid");
    points.sort_by(|a, b| a.t_final.total_cmp(&b.t_final));
    Ok(BellScan {
        points,
        best,
        peak_on_edge,
    })
}

/// Summary of one gate configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FidelityReport {
    pub bell_fidelity: f64,
    pub bell_stderr: f64,
    pub t_f_at_max: f64,
    /// `ε = 1 − F`.
    pub error: f64,
    pub entanglement_fidelity: Option<Estimate>,
    /// `(d F_e + 1)/(d + 1)`, recomputed from the stored `F_e`.
    pub channel_fidelity: Option<f64>,
    pub haar_estimate: Option<Estimate>,
}

impl FidelityReport {
    pub fn new(scan: &BellScan, fe: Option<Estimate>, haar: Option<Estimate>) -> Result<Self> {
        for e in fe.iter().chain(&haar) {
            check_physical("fidelity estimate", e.mean)?;
        }
        Ok(Self {
            bell_fidelity: scan.best.fidelity,
            bell_stderr: scan.best.stderr,
            t_f_at_max: scan.best.t_final,
            error: 1.0 - scan.best.fidelity,
            entanglement_fidelity: fe,
            channel_fidelity: fe.map(|e| channel_fidelity(e.mean)),
            haar_estimate: haar,
        })
    }
}

/// `⟨target|ρ|target⟩` for a labelled computational input under the ideal
/// gate; a convenience for checking targets.
pub fn ideal_bell_fidelity(input: &str, target: &DVector<Complex64>, phi_d: f64) -> Result<f64> {
    let out = ideal_gate(phi_d).column(two_qubit_index(input)?).into_owned();
    Ok(expectation(&(&out * out.adjoint()), target))
}
