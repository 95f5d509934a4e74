//! Operators and states on `(qubits) ⊗ (truncated bosonic modes)`.
//!
//! Basis ordering is fixed: `index = spin_index · P + phonon_index`, where
//! `P = (n_max+1)^num_modes`. The spin index is little-endian (qubit `i`
//! contributes `s_i · 2^i`, with `s_i = 1` for `|1⟩`), and the phonon index
//! is little-endian in base `n_max+1` over the modes. A two-qubit label
//! `|s_1 s_2⟩` therefore maps to spin index `s_1 + 2 s_2`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::expm::expm;
use crate::sparse::CsrMatrix;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Hard cap on the Hilbert-space dimension.
pub const MAX_DIM: usize = 1 << 24;
/// Largest dimension accepted by the dense matrix functions.
pub const MAX_DENSE_DIM: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpaceLayout {
    num_qubits: usize,
    num_modes: usize,
    n_max: usize,
}

impl SpaceLayout {
    pub fn new(num_qubits: usize, num_modes: usize, n_max: usize) -> Result<Self> {
        let layout = Self {
            num_qubits,
            num_modes,
            n_max,
        };
        let dim = (|| {
            let spin = 1usize.checked_shl(num_qubits as u32)?;
            let ph = (n_max + 1).checked_pow(num_modes as u32)?;
            spin.checked_mul(ph)
        })();
        match dim {
            Some(d) if d <= MAX_DIM => Ok(layout),
            _ => Err(Error::LayoutTooLarge {
                dim: dim.unwrap_or(usize::MAX),
                limit: MAX_DIM,
            }),
        }
    }

    /// Spin-only layout (no phonon modes).
    pub fn spins(num_qubits: usize) -> Result<Self> {
        Self::new(num_qubits, 0, 0)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn spin_dim(&self) -> usize {
        1 << self.num_qubits
    }

    pub fn phonon_dim(&self) -> usize {
        (self.n_max + 1).pow(self.num_modes as u32)
    }

    pub fn dim(&self) -> usize {
        self.spin_dim() * self.phonon_dim()
    }

    pub fn index(&self, spins: &[u8], occupations: &[usize]) -> Result<usize> {
        if spins.len() != self.num_qubits {
            return Err(Error::InvalidParameter(format!(
                "expected {} spin labels, got {}",
                self.num_qubits,
                spins.len()
            )));
        }
        if occupations.len() != self.num_modes {
            return Err(Error::InvalidParameter(format!(
                "expected {} occupations, got {}",
                self.num_modes,
                occupations.len()
            )));
        }
        let mut s = 0usize;
        for (i, &b) in spins.iter().enumerate() {
            if b > 1 {
                return Err(Error::InvalidParameter(format!("spin label {b} is not 0 or 1")));
            }
            s |= (b as usize) << i;
        }
        Ok(s * self.phonon_dim() + self.phonon_index(occupations)?)
    }

    pub fn phonon_index(&self, occupations: &[usize]) -> Result<usize> {
        let base = self.n_max + 1;
        let mut p = 0usize;
        for &k in occupations.iter().rev() {
            if k > self.n_max {
                return Err(Error::IndexOutOfRange {
                    kind: "occupation",
                    index: k,
                    size: base,
                });
            }
            p = p * base + k;
        }
        Ok(p)
    }

    /// Inverse of [`index`](Self::index): `(spin_index, occupations)`.
    pub fn decompose(&self, index: usize) -> (usize, Vec<usize>) {
        let pd = self.phonon_dim();
        let spin = index / pd;
        (spin, self.phonon_occupations(index % pd))
    }

    pub fn phonon_occupations(&self, phonon_index: usize) -> Vec<usize> {
        let base = self.n_max + 1;
        let mut rest = phonon_index;
        (0..self.num_modes)
            .map(|_| {
                let k = rest % base;
                rest /= base;
                k
            })
            .collect()
    }

    fn check_qubit(&self, i: usize) -> Result<()> {
        if i < self.num_qubits {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                kind: "qubit",
                index: i,
                size: self.num_qubits,
            })
        }
    }

    fn check_mode(&self, n: usize) -> Result<()> {
        if n < self.num_modes {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                kind: "mode",
                index: n,
                size: self.num_modes,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PauliAxis {
    X,
    Y,
    Z,
    Plus,
    Minus,
}

impl PauliAxis {
    /// Local 2x2 matrix in the `{|0⟩, |1⟩}` basis, with `σz = |1⟩⟨1| − |0⟩⟨0|`.
    pub fn matrix(self) -> [[Complex64; 2]; 2] {
        match self {
            PauliAxis::X => [[ZERO, ONE], [ONE, ZERO]],
            // σy = i(σ⁻ − σ⁺) so that σ± = (σx ± iσy)/2.
            PauliAxis::Y => [[ZERO, I], [-I, ZERO]],
            PauliAxis::Z => [[-ONE, ZERO], [ZERO, ONE]],
            PauliAxis::Plus => [[ZERO, ZERO], [ONE, ZERO]],
            PauliAxis::Minus => [[ZERO, ONE], [ZERO, ZERO]],
        }
    }
}

impl std::str::FromStr for PauliAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "X" => Ok(PauliAxis::X),
            "y" | "Y" => Ok(PauliAxis::Y),
            "z" | "Z" => Ok(PauliAxis::Z),
            "+" | "plus" => Ok(PauliAxis::Plus),
            "-" | "minus" => Ok(PauliAxis::Minus),
            other => Err(Error::InvalidParameter(format!("unknown Pauli axis '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BosonKind {
    Annihilate,
    Create,
    Number,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFunction {
    Exp,
    Cosh,
    Sinh,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    layout: SpaceLayout,
    matrix: CsrMatrix,
    hermitian: bool,
}

impl OperatorMatrix {
    pub fn new(layout: SpaceLayout, matrix: CsrMatrix) -> Result<Self> {
        let d = layout.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::InvalidParameter(format!(
                "operator is {}x{} but layout dimension is {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self {
            layout,
            matrix,
            hermitian: false,
        })
    }

    pub fn zero(layout: SpaceLayout) -> Self {
        let d = layout.dim();
        Self {
            layout,
            matrix: CsrMatrix::zeros(d, d),
            hermitian: true,
        }
    }

    pub fn identity(layout: SpaceLayout) -> Self {
        Self {
            layout,
            matrix: CsrMatrix::identity(layout.dim()),
            hermitian: true,
        }
    }

    pub fn from_diagonal(layout: SpaceLayout, diag: &[f64]) -> Self {
        let d: Vec<Complex64> = diag.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self {
            layout,
            matrix: CsrMatrix::from_diagonal(&d),
            hermitian: true,
        }
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CsrMatrix {
        self.matrix
    }

    pub fn is_hermitian_flagged(&self) -> bool {
        self.hermitian
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.matrix.hermiticity_defect()
    }

    /// Sets the Hermitian flag after checking `max|A − A†| < 1e-12`.
    pub fn mark_hermitian(mut self) -> Result<Self> {
        let defect = self.hermiticity_defect();
        if defect >= 1e-12 {
            return Err(Error::InternalConsistency(format!(
                "operator flagged Hermitian but |A - A†|_max = {defect:e}"
            )));
        }
        self.hermitian = true;
        Ok(self)
    }

    fn same_layout(&self, other: &Self) {
        assert_eq!(self.layout, other.layout, "operators live on different layouts");
    }

    pub fn add(&self, other: &Self) -> Self {
        self.same_layout(other);
        Self {
            layout: self.layout,
            matrix: self.matrix.add(&other.matrix),
            hermitian: self.hermitian && other.hermitian,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.same_layout(other);
        Self {
            layout: self.layout,
            matrix: self.matrix.sub(&other.matrix),
            hermitian: self.hermitian && other.hermitian,
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            layout: self.layout,
            matrix: self.matrix.scale(s),
            hermitian: self.hermitian && s.im == 0.0,
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.same_layout(other);
        Self {
            layout: self.layout,
            matrix: self.matrix.matmul(&other.matrix),
            hermitian: false,
        }
    }

    pub fn adjoint(&self) -> Self {
        Self {
            layout: self.layout,
            matrix: self.matrix.adjoint(),
            hermitian: self.hermitian,
        }
    }

    pub fn commutator(&self, other: &Self) -> Self {
        self.mul(other).sub(&other.mul(self))
    }

    pub fn apply(&self, state: &StateVector) -> StateVector {
        assert_eq!(self.layout, state.layout);
        let out = self.matrix.apply(state.amplitudes.as_slice());
        StateVector {
            layout: self.layout,
            amplitudes: DVector::from_vec(out),
        }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        self.matrix.to_dense()
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.max_abs()
    }
}

impl fmt::Display for OperatorMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "OperatorMatrix(dim = {}, nnz = {}, hermitian = {})",
            self.layout.dim(),
            self.matrix.nnz(),
            self.hermitian
        )
    }
}

/// Embeds a single-qubit operator acting on qubit `i`.
pub fn embed_qubit(layout: &SpaceLayout, i: usize, local: [[Complex64; 2]; 2]) -> Result<OperatorMatrix> {
    layout.check_qubit(i)?;
    let pd = layout.phonon_dim();
    let mut triplets = Vec::new();
    for col in 0..layout.dim() {
        let spin = col / pd;
        let bit = (spin >> i) & 1;
        for (r, row) in local.iter().enumerate() {
            let v = row[bit];
            if v != ZERO {
                let new_spin = (spin & !(1 << i)) | (r << i);
                triplets.push((new_spin * pd + col % pd, col, v));
            }
        }
    }
    OperatorMatrix::new(*layout, CsrMatrix::from_triplets(layout.dim(), layout.dim(), triplets))
}

/// Embeds an operator on the Fock space of mode `n`, given as a dense
/// `(n_max+1)²` matrix.
pub fn embed_mode(layout: &SpaceLayout, n: usize, local: &DMatrix<Complex64>) -> Result<OperatorMatrix> {
    layout.check_mode(n)?;
    let base = layout.n_max + 1;
    assert_eq!(local.shape(), (base, base));
    let stride = base.pow(n as u32);
    let mut triplets = Vec::new();
    for col in 0..layout.dim() {
        let k = (col / stride) % base;
        for r in 0..base {
            let v = local[(r, k)];
            if v != ZERO {
                let row = col - k * stride + r * stride;
                triplets.push((row, col, v));
            }
        }
    }
    OperatorMatrix::new(*layout, CsrMatrix::from_triplets(layout.dim(), layout.dim(), triplets))
}

pub fn pauli(layout: &SpaceLayout, qubit: usize, axis: PauliAxis) -> Result<OperatorMatrix> {
    let op = embed_qubit(layout, qubit, axis.matrix())?;
    Ok(match axis {
        PauliAxis::X | PauliAxis::Y | PauliAxis::Z => OperatorMatrix { hermitian: true, ..op },
        _ => op,
    })
}

/// Product of single-qubit Paulis on distinct qubits.
pub fn pauli_string(layout: &SpaceLayout, factors: &[(usize, PauliAxis)]) -> Result<OperatorMatrix> {
    let mut op = OperatorMatrix::identity(*layout);
    for &(q, axis) in factors {
        op = pauli(layout, q, axis)?.mul(&op);
    }
    Ok(op)
}

pub fn boson(layout: &SpaceLayout, mode: usize, kind: BosonKind) -> Result<OperatorMatrix> {
    let base = layout.n_max + 1;
    let mut local = DMatrix::<Complex64>::zeros(base, base);
    for k in 1..base {
        let amp = Complex64::new((k as f64).sqrt(), 0.0);
        match kind {
            BosonKind::Annihilate => local[(k - 1, k)] = amp,
            BosonKind::Create => local[(k, k - 1)] = amp,
            BosonKind::Number => local[(k, k)] = Complex64::new(k as f64, 0.0),
        }
    }
    let op = embed_mode(layout, mode, &local)?;
    Ok(if kind == BosonKind::Number {
        OperatorMatrix { hermitian: true, ..op }
    } else {
        op
    })
}

/// Diagonal of `Σ_i σ_i^z`.
pub fn total_sz_diagonal(layout: &SpaceLayout) -> Vec<f64> {
    let pd = layout.phonon_dim();
    (0..layout.dim())
        .map(|idx| {
            let spin = idx / pd;
            (0..layout.num_qubits)
                .map(|i| if (spin >> i) & 1 == 1 { 1.0 } else { -1.0 })
                .sum()
        })
        .collect()
}

/// `f(A)` for dense-feasible operators; `cosh` and `sinh` use `(e^A ± e^{−A})/2`.
pub fn matrix_function(a: &OperatorMatrix, f: MatrixFunction) -> Result<OperatorMatrix> {
    let dim = a.layout.dim();
    if dim > MAX_DENSE_DIM {
        return Err(Error::LayoutTooLarge {
            dim,
            limit: MAX_DENSE_DIM,
        });
    }
    let dense = a.to_dense();
    let out = match f {
        MatrixFunction::Exp => expm(&dense)?,
        MatrixFunction::Cosh | MatrixFunction::Sinh => {
            let ep = expm(&dense)?;
            let em = expm(&(-dense))?;
            if f == MatrixFunction::Cosh {
                (ep + em).scale(0.5)
            } else {
                (ep - em).scale(0.5)
            }
        }
    };
    OperatorMatrix::new(a.layout, CsrMatrix::from_dense(&out, 0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    layout: SpaceLayout,
    amplitudes: DVector<Complex64>,
}

impl StateVector {
    pub fn new(layout: SpaceLayout, amplitudes: DVector<Complex64>) -> Result<Self> {
        if amplitudes.len() != layout.dim() {
            return Err(Error::InvalidParameter(format!(
                "state has {} amplitudes but layout dimension is {}",
                amplitudes.len(),
                layout.dim()
            )));
        }
        Ok(Self { layout, amplitudes })
    }

    pub fn basis(layout: SpaceLayout, spins: &[u8], occupations: &[usize]) -> Result<Self> {
        let idx = layout.index(spins, occupations)?;
        let mut amplitudes = DVector::zeros(layout.dim());
        amplitudes[idx] = ONE;
        Ok(Self { layout, amplitudes })
    }

    /// `|spin⟩ ⊗ |occupations⟩` for a spin vector of length `2^num_qubits`.
    pub fn product(layout: SpaceLayout, spin: &DVector<Complex64>, occupations: &[usize]) -> Result<Self> {
        if spin.len() != layout.spin_dim() {
            return Err(Error::InvalidParameter(format!(
                "spin vector has length {} but expected {}",
                spin.len(),
                layout.spin_dim()
            )));
        }
        let p = layout.phonon_index(occupations)?;
        let pd = layout.phonon_dim();
        let mut amplitudes = DVector::zeros(layout.dim());
        for (s, &a) in spin.iter().enumerate() {
            amplitudes[s * pd + p] = a;
        }
        Ok(Self { layout, amplitudes })
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut DVector<Complex64> {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> DVector<Complex64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::NonPhysical(format!("cannot normalize a state of norm {n}")));
        }
        self.amplitudes.unscale_mut(n);
        Ok(())
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn expectation(&self, op: &OperatorMatrix) -> Complex64 {
        self.inner(&op.apply(self))
    }

    /// Spin density matrix after tracing out the phonons.
    pub fn spin_density(&self) -> DMatrix<Complex64> {
        reduced_spin_density(self.amplitudes.as_slice(), self.layout.spin_dim())
    }

    /// Spin populations `P_s` after the phonon trace.
    pub fn spin_populations(&self) -> Vec<f64> {
        let pd = self.layout.phonon_dim();
        (0..self.layout.spin_dim())
            .map(|s| (0..pd).map(|p| self.amplitudes[s * pd + p].norm_sqr()).sum())
            .collect()
    }

    /// Mean total phonon number.
    pub fn mean_phonon_number(&self) -> f64 {
        let pd = self.layout.phonon_dim();
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(idx, a)| {
                let occ: usize = self.layout.phonon_occupations(idx % pd).iter().sum();
                occ as f64 * a.norm_sqr()
            })
            .sum()
    }
}

/// `ρ_{ss'} = Σ_p ψ_{s,p} ψ*_{s',p}` for a vector in spin-major ordering.
pub fn reduced_spin_density(psi: &[Complex64], spin_dim: usize) -> DMatrix<Complex64> {
    let pd = psi.len() / spin_dim;
    let mut rho = DMatrix::<Complex64>::zeros(spin_dim, spin_dim);
    for s in 0..spin_dim {
        for t in s..spin_dim {
            let mut acc = ZERO;
            for p in 0..pd {
                acc += psi[s * pd + p] * psi[t * pd + p].conj();
            }
            rho[(s, t)] = acc;
            rho[(t, s)] = acc.conj();
        }
    }
    rho
}
