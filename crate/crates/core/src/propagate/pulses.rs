//! Instantaneous Pauli pulses and their schedules.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operators::PauliAxis;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PulseKind {
    /// π pulse about x on one qubit, applied as `σ^x_i`.
    X(usize),
    /// π pulse about z on one qubit, applied as `σ^z_i`.
    Z(usize),
    /// Refocusing pulse `σ^z_1 σ^z_2` on the first two qubits.
    ZzEcho,
    /// Product of single-qubit Paulis; the first factor acts first.
    Custom(Vec<(usize, PauliAxis)>),
}

impl PulseKind {
    pub fn factors(&self) -> Vec<(usize, PauliAxis)> {
        match self {
            PulseKind::X(i) => vec![(*i, PauliAxis::X)],
            PulseKind::Z(i) => vec![(*i, PauliAxis::Z)],
            PulseKind::ZzEcho => vec![(0, PauliAxis::Z), (1, PauliAxis::Z)],
            PulseKind::Custom(f) => f.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pulse {
    pub time: f64,
    pub kind: PulseKind,
}

/// Time-ordered pulses. Pulses sharing a time are applied in insertion order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PulseSchedule {
    pulses: Vec<Pulse>,
}

impl PulseSchedule {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(mut pulses: Vec<Pulse>) -> Result<Self> {
        if pulses.iter().any(|p| !(p.time >= 0.0 && p.time.is_finite())) {
            return Err(Error::InvalidParameter("pulse times must be finite and non-negative".into()));
        }
        pulses.sort_by(|a, b| a.time.total_cmp(&b.time));
        Ok(Self { pulses })
    }

    /// The echo sequence: a single `σ^zσ^z` pulse at `t_final/2`.
    pub fn echo(t_final: f64) -> Result<Self> {
        Self::new(vec![Pulse {
            time: 0.5 * t_final,
            kind: PulseKind::ZzEcho,
        }])
    }

    pub fn push(&mut self, pulse: Pulse) -> Result<()> {
        let mut all = std::mem::take(&mut self.pulses);
        all.push(pulse);
        *self = Self::new(all)?;
        Ok(())
    }

    pub fn pulses(&self) -> &[Pulse] {
        &self.pulses
    }

    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty()
    }

    /// Checks that every pulse lies in `[0, t_final]`, addresses existing
    /// qubits and is unitary.
    pub fn validate(&self, t_final: f64, num_qubits: usize) -> Result<()> {
        for p in &self.pulses {
            if p.time > t_final {
                return Err(Error::InvalidParameter(format!(
                    "pulse at {} s lies beyond the final time {t_final} s",
                    p.time
                )));
            }
            SpinPermutation::from_factors(num_qubits, &p.kind.factors())?;
        }
        Ok(())
    }
}

/// A Pauli string acting on spin indices: `|s⟩ → phase[s] |target[s]⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinPermutation {
    pub target: Vec<usize>,
    pub phase: Vec<Complex64>,
}

impl SpinPermutation {
    pub fn from_factors(num_qubits: usize, factors: &[(usize, PauliAxis)]) -> Result<Self> {
        for &(q, ax) in factors {
            if q >= num_qubits {
                return Err(Error::IndexOutOfRange {
                    kind: "qubit",
                    index: q,
                    size: num_qubits,
                });
            }
            if matches!(ax, PauliAxis::Plus | PauliAxis::Minus) {
                return Err(Error::InvalidParameter("pulses must be unitary Pauli strings".into()));
            }
        }
        let dim = 1usize << num_qubits;
        let mut target = Vec::with_capacity(dim);
        let mut phase = Vec::with_capacity(dim);
        for s in 0..dim {
            let mut cur = s;
            let mut ph = Complex64::new(1.0, 0.0);
            for &(q, ax) in factors {
                let m = ax.matrix();
                let bit = (cur >> q) & 1;
                // A Pauli maps |bit⟩ to m[1−bit][bit] |1−bit⟩ or m[bit][bit] |bit⟩.
                if m[1 - bit][bit].norm() > 0.0 {
                    ph *= m[1 - bit][bit];
                    cur ^= 1 << q;
                } else {
                    ph *= m[bit][bit];
                }
            }
            target.push(cur);
            phase.push(ph);
        }
        Ok(Self { target, phase })
    }

    /// Applies the string to `ncols` column-major vectors with `phonon_dim`
    /// phonon states per spin configuration.
    pub fn apply(&self, psi: &mut [Complex64], phonon_dim: usize, ncols: usize) {
        let spin_dim = self.target.len();
        let n = spin_dim * phonon_dim;
        assert_eq!(psi.len(), n * ncols);
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for col in psi.chunks_mut(n) {
            for s in 0..spin_dim {
                let t = self.target[s];
                let ph = self.phase[s];
                for p in 0..phonon_dim {
                    out[t * phonon_dim + p] = ph * col[s * phonon_dim + p];
                }
            }
            col.copy_from_slice(&out);
        }
    }

    /// The string as a dense `2^q × 2^q` matrix.
    pub fn matrix(&self) -> nalgebra::DMatrix<Complex64> {
        let d = self.target.len();
        let mut m = nalgebra::DMatrix::zeros(d, d);
        for s in 0..d {
            m[(self.target[s], s)] = self.phase[s];
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{pauli_string, SpaceLayout};

    #[test]
    fn matches_operator_construction() {
        let l = SpaceLayout::new(2, 1, 2).unwrap();
        let strings: Vec<Vec<(usize, PauliAxis)>> = vec![
            vec![(0, PauliAxis::X)],
            vec![(1, PauliAxis::Y)],
            vec![(0, PauliAxis::Z), (1, PauliAxis::Z)],
            vec![(0, PauliAxis::Y), (0, PauliAxis::X), (1, PauliAxis::Z)],
        ];
        for f in strings {
            let op = pauli_string(&l, &f).unwrap();
            let perm = SpinPermutation::from_factors(2, &f).unwrap();
            for idx in 0..l.dim() {
                let mut v = vec![Complex64::new(0.0, 0.0); l.dim()];
                v[idx] = Complex64::new(1.0, 0.0);
                let want = op.matrix().apply(&v);
                perm.apply(&mut v, l.phonon_dim(), 1);
                for (a, b) in v.iter().zip(&want) {
                    assert!((a - b).norm() < 1e-15, "{f:?}");
                }
            }
        }
    }

    #[test]
    fn schedule_sorting_and_validation() {
        let s = PulseSchedule::new(vec![
            Pulse { time: 2.0, kind: PulseKind::X(0) },
            Pulse { time: 1.0, kind: PulseKind::Z(1) },
        ])
        .unwrap();
        assert_eq!(s.pulses()[0].time, 1.0);
        assert!(s.validate(2.0, 2).is_ok());
        assert!(s.validate(1.5, 2).is_err());
        assert!(s.validate(2.0, 1).is_err());
        let bad = PulseSchedule::new(vec![Pulse {
            time: 0.0,
            kind: PulseKind::Custom(vec![(0, PauliAxis::Plus)]),
        }])
        .unwrap();
        assert!(bad.validate(1.0, 1).is_err());
        assert!(PulseSchedule::new(vec![Pulse { time: -1.0, kind: PulseKind::X(0) }]).is_err());
    }

    #[test]
    fn double_echo_is_identity() {
        let p = SpinPermutation::from_factors(2, &PulseKind::ZzEcho.factors()).unwrap();
        let m = p.matrix();
        assert!((&m * &m - nalgebra::DMatrix::<Complex64>::identity(4, 4)).camax() == 0.0);
    }
}
