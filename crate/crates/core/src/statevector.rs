//! Dense multi-register statevector simulator.
//!
//! Qubit 0 of a register is the least significant bit of that register's label,
//! and registers are packed into the global basis index in layout order, the
//! first register occupying the lowest bits. For a layout `(system, phase)` the
//! amplitude of `|s⟩_system |p⟩_phase` sits at index `s + 2^{w_system} · p`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Upper bound on total qubits; 2^26 complex doubles is 1 GiB.
pub const MAX_QUBITS: usize = 26;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Register {
    pub name: String,
    pub width: usize,
    pub offset: usize,
}

impl Register {
    fn mask(&self) -> usize {
        (1 << self.width) - 1
    }

    fn label_of(&self, index: usize) -> usize {
        (index >> self.offset) & self.mask()
    }
}

/// Ordered named registers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    registers: Vec<Register>,
}

impl Layout {
    pub fn new<S: Into<String>>(registers: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let mut offset = 0;
        let mut regs = Vec::new();
        for (name, width) in registers {
            if width == 0 {
                return Err(Error::invalid("register widths must be positive"));
            }
            regs.push(Register {
                name: name.into(),
                width,
                offset,
            });
            offset += width;
        }
        if regs.is_empty() {
            return Err(Error::invalid("layout needs at least one register"));
        }
        if offset > MAX_QUBITS {
            return Err(Error::SizeGuard {
                what: "statevector layout",
                requested: offset,
                limit: MAX_QUBITS,
            });
        }
        Ok(Self { registers: regs })
    }

    pub fn total_qubits(&self) -> usize {
        self.registers.iter().map(|r| r.width).sum()
    }

    pub fn register(&self, reg: usize) -> &Register {
        &self.registers[reg]
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.registers.iter().position(|r| r.name == name)
    }
}

/// A validated unitary matrix.
#[derive(Debug, Clone)]
pub struct Unitary {
    matrix: DMatrix<Complex64>,
}

impl Unitary {
    /// Accepts `matrix` when `U†U = I` holds entrywise to 1e-10.
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                actual: matrix.ncols(),
            });
        }
        let dim = matrix.nrows();
        let gram = matrix.adjoint() * &matrix;
        let deviation = (gram - DMatrix::<Complex64>::identity(dim, dim))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if deviation > 1e-10 {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(Self { matrix })
    }

    pub fn from_real(matrix: &DMatrix<f64>) -> Result<Self> {
        Self::new(matrix.map(|x| Complex64::new(x, 0.0)))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
        }
    }

    /// `self · self`, renormalization-free; used for the `U^(2^j)` ladder.
    pub fn squared(&self) -> Result<Self> {
        Self::new(&self.matrix * &self.matrix)
    }

    fn apply_into(&self, input: &[Complex64], out: &mut [Complex64]) {
        out.fill(ZERO);
        for (c, &x) in input.iter().enumerate() {
            if x == ZERO {
                continue;
            }
            for (o, &u) in out.iter_mut().zip(self.matrix.column(c).iter()) {
                *o += u * x;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
    layout: Layout,
}

impl StateVector {
    /// All registers in `|0…0⟩`.
    pub fn zero(layout: Layout) -> Self {
        let mut amplitudes = vec![ZERO; 1 << layout.total_qubits()];
        amplitudes[0] = ONE;
        Self { amplitudes, layout }
    }

    /// Register `reg` holds `amps` (normalized), every other register `|0…0⟩`.
    pub fn with_register_state(layout: Layout, reg: usize, amps: &[Complex64]) -> Result<Self> {
        let r = layout.register(reg).clone();
        if amps.len() != 1 << r.width {
            return Err(Error::DimensionMismatch {
                expected: 1 << r.width,
                actual: amps.len(),
            });
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::invalid(format!("register state has norm² {norm}")));
        }
        let mut amplitudes = vec![ZERO; 1 << layout.total_qubits()];
        for (x, &a) in amps.iter().enumerate() {
            amplitudes[x << r.offset] = a;
        }
        Ok(Self { amplitudes, layout })
    }

    pub fn from_amplitudes(layout: Layout, amplitudes: Vec<Complex64>) -> Result<Self> {
        let expected = 1 << layout.total_qubits();
        if amplitudes.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: amplitudes.len(),
            });
        }
        let state = Self { amplitudes, layout };
        if (state.norm_sqr() - 1.0).abs() > 1e-10 {
            return Err(Error::invalid("amplitudes are not normalized"));
        }
        Ok(state)
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Global qubit index of qubit `bit` in register `reg`.
    pub fn qubit(&self, reg: usize, bit: usize) -> usize {
        let r = self.layout.register(reg);
        assert!(bit < r.width, "qubit {bit} outside register `{}`", r.name);
        r.offset + bit
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.layout.total_qubits() {
            return Err(Error::invalid(format!("qubit {q} outside layout")));
        }
        Ok(())
    }

    pub fn hadamard(&mut self, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        let bit = 1usize << q;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for chunk in self.amplitudes.chunks_mut(bit << 1) {
            let (lo, hi) = chunk.split_at_mut(bit);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = (x + y) * s;
                *b = (x - y) * s;
            }
        }
        Ok(())
    }

    pub fn hadamard_register(&mut self, reg: usize) -> Result<()> {
        for bit in 0..self.layout.register(reg).width {
            self.hadamard(self.qubit(reg, bit))?;
        }
        Ok(())
    }

    pub fn cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(Error::invalid("CNOT control and target coincide"));
        }
        let (cb, tb) = (1usize << control, 1usize << target);
        for i in 0..self.amplitudes.len() {
            if i & cb != 0 && i & tb == 0 {
                self.amplitudes.swap(i, i | tb);
            }
        }
        Ok(())
    }

    fn register_is_zero(&self, reg: usize) -> bool {
        let r = self.layout.register(reg);
        let stray: f64 = self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| r.label_of(*i) != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        stray < 1e-20
    }

    /// `(1/√2ⁿ) Σ_x |x⟩_a |x⟩_b`: Hadamard on every qubit of `a`, then CNOT from
    /// qubit `k` of `a` onto qubit `k` of `b`.
    pub fn prepare_maximally_entangled(&mut self, reg_a: usize, reg_b: usize) -> Result<()> {
        let (wa, wb) = (
            self.layout.register(reg_a).width,
            self.layout.register(reg_b).width,
        );
        if wa != wb {
            return Err(Error::DimensionMismatch {
                expected: wa,
                actual: wb,
            });
        }
        if reg_a == reg_b {
            return Err(Error::invalid("entangling a register with itself"));
        }
        for reg in [reg_a, reg_b] {
            if !self.register_is_zero(reg) {
                return Err(Error::RegisterNotZero(self.layout.register(reg).name.clone()));
            }
        }
        self.hadamard_register(reg_a)?;
        for k in 0..wa {
            self.cnot(self.qubit(reg_a, k), self.qubit(reg_b, k))?;
        }
        Ok(())
    }

    /// Base indices (register bits cleared) of every block of `reg`.
    fn block_bases(&self, reg: usize) -> impl Iterator<Item = usize> {
        let r = self.layout.register(reg);
        let (off, w) = (r.offset, r.width);
        let high = 1usize << (self.layout.total_qubits() - off - w);
        let low = 1usize << off;
        (0..high).flat_map(move |h| (0..low).map(move |l| (h << (off + w)) | l))
    }

    fn check_target(&self, reg: usize, dim: usize) -> Result<()> {
        let w = self.layout.register(reg).width;
        if dim != 1 << w {
            return Err(Error::DimensionMismatch {
                expected: 1 << w,
                actual: dim,
            });
        }
        Ok(())
    }

    fn transform_blocks(
        &mut self,
        reg: usize,
        control: Option<usize>,
        mut f: impl FnMut(&mut [Complex64], &mut [Complex64]),
    ) {
        let r = self.layout.register(reg).clone();
        let dim = 1usize << r.width;
        let mut buf = vec![ZERO; dim];
        let mut out = vec![ZERO; dim];
        let bases: Vec<usize> = self.block_bases(reg).collect();
        for base in bases {
            if let Some(c) = control {
                if base & (1 << c) == 0 {
                    continue;
                }
            }
            let mut any = false;
            for (x, slot) in buf.iter_mut().enumerate() {
                *slot = self.amplitudes[base | (x << r.offset)];
                any |= *slot != ZERO;
            }
            if !any {
                continue;
            }
            f(&mut buf, &mut out);
            for (x, &v) in out.iter().enumerate() {
                self.amplitudes[base | (x << r.offset)] = v;
            }
        }
    }

    /// Applies `u` to register `reg`. Blocks with no amplitude are skipped, so
    /// acting on a register entangled with nothing costs a single mat-vec.
    pub fn apply_unitary(&mut self, reg: usize, u: &Unitary) -> Result<()> {
        self.check_target(reg, u.dim())?;
        self.transform_blocks(reg, None, |buf, out| u.apply_into(buf, out));
        Ok(())
    }

    /// Applies `u` to `reg` on the branch where `control` is `|1⟩`.
    pub fn apply_controlled_unitary(&mut self, control: usize, reg: usize, u: &Unitary) -> Result<()> {
        self.check_qubit(control)?;
        self.check_target(reg, u.dim())?;
        self.check_control_outside(control, reg)?;
        self.transform_blocks(reg, Some(control), |buf, out| u.apply_into(buf, out));
        Ok(())
    }

    fn check_control_outside(&self, control: usize, reg: usize) -> Result<()> {
        let r = self.layout.register(reg);
        if (r.offset..r.offset + r.width).contains(&control) {
            return Err(Error::invalid("control qubit lies inside the target register"));
        }
        Ok(())
    }

    /// Controlled diagonal unitary: on the `control = |1⟩` branch the label `x`
    /// of `reg` picks up `phases[x]`, each of unit modulus.
    pub fn apply_controlled_diagonal(&mut self, control: usize, reg: usize, phases: &[Complex64]) -> Result<()> {
        self.check_qubit(control)?;
        self.check_target(reg, phases.len())?;
        self.check_control_outside(control, reg)?;
        if let Some(p) = phases.iter().find(|p| (p.norm() - 1.0).abs() > 1e-10) {
            return Err(Error::NotUnitary {
                deviation: (p.norm() - 1.0).abs(),
            });
        }
        let r = self.layout.register(reg).clone();
        let cbit = 1usize << control;
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            if i & cbit != 0 {
                *a *= phases[r.label_of(i)];
            }
        }
        Ok(())
    }

    /// Exact inverse quantum Fourier transform on `reg`:
    /// `F†[m, y] = 2^{-k/2} e^{-2πi m y / 2^k}`.
    pub fn inverse_qft(&mut self, reg: usize) -> Result<()> {
        let dim = 1usize << self.layout.register(reg).width;
        let fft = FftPlanner::<f64>::new().plan_fft_forward(dim);
        let scale = 1.0 / (dim as f64).sqrt();
        self.transform_blocks(reg, None, |buf, out| {
            fft.process(buf);
            for (o, &b) in out.iter_mut().zip(buf.iter()) {
                *o = b * scale;
            }
        });
        Ok(())
    }

    /// Marginal distribution of the label of `reg`.
    pub fn register_probabilities(&self, reg: usize) -> Vec<f64> {
        let r = self.layout.register(reg);
        let mut probs = vec![0.0; 1 << r.width];
        for (i, a) in self.amplitudes.iter().enumerate() {
            probs[r.label_of(i)] += a.norm_sqr();
        }
        probs
    }

    /// Projective measurement of `reg`; the state collapses onto the outcome
    /// and is renormalized.
    pub fn measure_register<R: Rng + ?Sized>(&mut self, reg: usize, rng: &mut R) -> Result<usize> {
        let probs = self.register_probabilities(reg);
        let total: f64 = probs.iter().sum();
        if !(total > 1e-300) || !total.is_finite() {
            return Err(Error::DegenerateMeasurement(total));
        }
        let outcome = sample_index(&probs, total, rng);
        let r = self.layout.register(reg).clone();
        let scale = 1.0 / probs[outcome].sqrt();
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            if r.label_of(i) == outcome {
                *a *= scale;
            } else {
                *a = ZERO;
            }
        }
        Ok(outcome)
    }
}

/// Inverse-CDF draw from unnormalized weights summing to `total`.
pub(crate) fn sample_index<R: Rng + ?Sized>(weights: &[f64], total: f64, rng: &mut R) -> usize {
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = i;
        }
        acc += w;
        if target < acc {
            return i;
        }
    }
    last_positive
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn assert_amps(state: &StateVector, expected: &[Complex64]) {
        for (a, b) in state.amplitudes().iter().zip(expected) {
            assert!((a - b).norm() < 1e-12, "{a} != {b}");
        }
    }

    fn random_state(layout: Layout, seed: u64) -> StateVector {
        let mut rng = seeded_rng(seed, 0);
        let n = 1 << layout.total_qubits();
        let mut amps: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        StateVector::from_amplitudes(layout, amps).unwrap()
    }

    fn random_unitary(dim: usize, seed: u64) -> Unitary {
        // Q factor of a random complex matrix
        let mut rng = seeded_rng(seed, 1);
        let m = DMatrix::from_fn(dim, dim, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        Unitary::new(m.qr().q()).unwrap()
    }

    #[test]
    fn zero_state_layouts() {
        let s = StateVector::zero(Layout::new([("a", 1), ("b", 1)]).unwrap());
        assert_amps(&s, &[c(1.0), c(0.0), c(0.0), c(0.0)]);
        let s = StateVector::zero(Layout::new([("a", 2)]).unwrap());
        assert_amps(&s, &[c(1.0), c(0.0), c(0.0), c(0.0)]);
        assert_abs_diff_eq!(s.norm_sqr(), 1.0);
    }

    #[test]
    fn layout_guard() {
        assert!(matches!(
            Layout::new([("a", 14), ("b", 13)]),
            Err(Error::SizeGuard { .. })
        ));
        assert!(Layout::new([("a", 0)]).is_err());
    }

    #[test]
    fn bell_pair() {
        let layout = Layout::new([("a", 1), ("b", 1)]).unwrap();
        let mut s = StateVector::zero(layout);
        s.prepare_maximally_entangled(0, 1).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_amps(&s, &[c(r), c(0.0), c(0.0), c(r)]);
    }

    #[test]
    fn two_qubit_pair_state() {
        let layout = Layout::new([("a", 2), ("b", 2)]).unwrap();
        let mut s = StateVector::zero(layout);
        s.prepare_maximally_entangled(0, 1).unwrap();
        for (i, a) in s.amplitudes().iter().enumerate() {
            let expect = if i & 3 == i >> 2 { 0.5 } else { 0.0 };
            assert_abs_diff_eq!(a.re, expect, epsilon = 1e-12);
            assert_abs_diff_eq!(a.im, 0.0, epsilon = 1e-12);
        }
        for p in s.register_probabilities(0) {
            assert_abs_diff_eq!(p, 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn pair_preparation_errors() {
        let layout = Layout::new([("a", 1), ("b", 2)]).unwrap();
        let mut s = StateVector::zero(layout);
        assert!(matches!(
            s.prepare_maximally_entangled(0, 1),
            Err(Error::DimensionMismatch { .. })
        ));
        let layout = Layout::new([("a", 1), ("b", 1)]).unwrap();
        let mut s = StateVector::zero(layout);
        s.hadamard(1).unwrap();
        assert!(matches!(
            s.prepare_maximally_entangled(0, 1),
            Err(Error::RegisterNotZero(_))
        ));
    }

    #[test]
    fn controlled_unitary_basics() {
        let x = Unitary::new(DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)])).unwrap();
        let layout = Layout::new([("t", 1), ("c", 1)]).unwrap();
        // control |0⟩: untouched
        let mut s = StateVector::zero(layout.clone());
        s.apply_controlled_unitary(1, 0, &x).unwrap();
        assert_amps(&s, &[c(1.0), c(0.0), c(0.0), c(0.0)]);
        // control |1⟩: target flipped, |c=1,t=0⟩ = index 2 → index 3
        let mut s = StateVector::with_register_state(layout.clone(), 1, &[c(0.0), c(1.0)]).unwrap();
        s.apply_controlled_unitary(1, 0, &x).unwrap();
        assert_amps(&s, &[c(0.0), c(0.0), c(0.0), c(1.0)]);
        // control inside target is refused
        assert!(s.apply_controlled_unitary(0, 0, &x).is_err());
    }

    #[test]
    fn phase_kickback() {
        let theta = 0.7;
        let phase = Complex64::from_polar(1.0, theta);
        let u = Unitary::new(DMatrix::from_diagonal_element(2, 2, phase)).unwrap();
        let layout = Layout::new([("t", 1), ("c", 1)]).unwrap();
        let mut s = StateVector::zero(layout);
        s.hadamard(1).unwrap();
        s.apply_controlled_unitary(1, 0, &u).unwrap();
        let a = s.amplitudes();
        let rel = a[2] / a[0];
        assert_abs_diff_eq!(rel.arg(), theta, epsilon = 1e-12);
        assert_abs_diff_eq!(rel.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_non_unitary() {
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0), c(1.0), c(0.0), c(1.0)]);
        assert!(matches!(Unitary::new(m), Err(Error::NotUnitary { .. })));
        let layout = Layout::new([("t", 2), ("c", 1)]).unwrap();
        let mut s = StateVector::zero(layout);
        let x = Unitary::new(DMatrix::identity(2, 2)).unwrap();
        assert!(matches!(
            s.apply_controlled_unitary(2, 0, &x),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn inverse_qft_of_uniform_is_zero_label() {
        let layout = Layout::new([("p", 4)]).unwrap();
        let mut s = StateVector::zero(layout);
        s.hadamard_register(0).unwrap();
        s.inverse_qft(0).unwrap();
        assert_abs_diff_eq!(s.amplitudes()[0].norm_sqr(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn single_qubit_inverse_qft_is_hadamard() {
        let layout = Layout::new([("p", 1)]).unwrap();
        let mut a = random_state(layout.clone(), 3);
        let mut b = a.clone();
        a.inverse_qft(0).unwrap();
        b.hadamard(0).unwrap();
        assert_amps(&a, b.amplitudes());
    }

    #[test]
    fn inverse_qft_matches_dense_matrix() {
        // dense F† built independently of the FFT path
        let layout = Layout::new([("s", 2), ("p", 3)]).unwrap();
        let state = random_state(layout.clone(), 11);
        let mut fast = state.clone();
        fast.inverse_qft(1).unwrap();
        let k = 8usize;
        let f_dag = DMatrix::from_fn(k, k, |m, y| {
            Complex64::from_polar(1.0 / (k as f64).sqrt(), -2.0 * std::f64::consts::PI * (m * y) as f64 / k as f64)
        });
        let mut slow = state.clone();
        slow.apply_unitary(1, &Unitary::new(f_dag).unwrap()).unwrap();
        assert_amps(&fast, slow.amplitudes());
    }

    #[test]
    fn measurement_of_basis_state_is_certain() {
        let layout = Layout::new([("a", 3)]).unwrap();
        let mut rng = seeded_rng(5, 0);
        for label in 0..8 {
            let mut amps = vec![c(0.0); 8];
            amps[label] = c(1.0);
            let mut s = StateVector::with_register_state(layout.clone(), 0, &amps).unwrap();
            assert_eq!(s.measure_register(0, &mut rng).unwrap(), label);
            assert_abs_diff_eq!(s.norm_sqr(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn uniform_measurement_frequencies() {
        let layout = Layout::new([("a", 2), ("b", 1)]).unwrap();
        let mut base = StateVector::zero(layout);
        base.hadamard_register(0).unwrap();
        let mut rng = seeded_rng(17, 0);
        let mut counts = [0u64; 4];
        let n = 100_000;
        for _ in 0..n {
            let mut s = base.clone();
            counts[s.measure_register(0, &mut rng).unwrap()] += 1;
        }
        let (stat, p) = crate::stats::chi_square_uniform(&counts);
        assert!(p > 1e-3, "chi² {stat} p {p}");
    }

    #[test]
    fn measurement_is_seed_reproducible() {
        let layout = Layout::new([("a", 3), ("b", 2)]).unwrap();
        let state = random_state(layout, 8);
        let draw = |seed| {
            let mut rng = seeded_rng(seed, 0);
            (0..200)
                .map(|_| state.clone().measure_register(0, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(99), draw(99));
    }

    #[test]
    fn measurement_collapses_and_renormalizes() {
        let layout = Layout::new([("a", 2), ("b", 2)]).unwrap();
        let mut s = random_state(layout, 21);
        let mut rng = seeded_rng(1, 0);
        let m = s.measure_register(1, &mut rng).unwrap();
        assert_abs_diff_eq!(s.norm_sqr(), 1.0, epsilon = 1e-12);
        let probs = s.register_probabilities(1);
        assert_abs_diff_eq!(probs[m], 1.0, epsilon = 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn gates_preserve_norm(seed in 0u64..10_000) {
            let layout = Layout::new([("s", 2), ("c", 2), ("p", 3)]).unwrap();
            let mut s = random_state(layout, seed);
            let u = random_unitary(4, seed);
            s.hadamard(3).unwrap();
            s.cnot(0, 5).unwrap();
            s.apply_controlled_unitary(4, 0, &u).unwrap();
            s.apply_unitary(1, &u).unwrap();
            s.inverse_qft(2).unwrap();
            let phases: Vec<Complex64> = (0..4).map(|x| Complex64::from_polar(1.0, x as f64)).collect();
            s.apply_controlled_diagonal(6, 0, &phases).unwrap();
            prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
        }

        #[test]
        fn controlled_unitary_then_adjoint_restores(seed in 0u64..10_000) {
            let layout = Layout::new([("s", 3), ("p", 2)]).unwrap();
            let original = random_state(layout, seed);
            let u = random_unitary(8, seed + 1);
            let mut s = original.clone();
            s.apply_controlled_unitary(4, 0, &u).unwrap();
            s.apply_controlled_unitary(4, 0, &u.adjoint()).unwrap();
            for (a, b) in s.amplitudes().iter().zip(original.amplitudes()) {
                prop_assert!((a - b).norm() < 1e-10);
            }
        }

        #[test]
        fn qft_round_trip(seed in 0u64..10_000) {
            let layout = Layout::new([("s", 1), ("p", 4)]).unwrap();
            let original = random_state(layout, seed);
            let mut s = original.clone();
            s.inverse_qft(1).unwrap();
            // F = conj(F†): apply through the dense matrix
            let k = 16usize;
            let f = DMatrix::from_fn(k, k, |m, y| {
                Complex64::from_polar(1.0 / 4.0, 2.0 * std::f64::consts::PI * (m * y) as f64 / k as f64)
            });
            s.apply_unitary(1, &Unitary::new(f).unwrap()).unwrap();
            for (a, b) in s.amplitudes().iter().zip(original.amplitudes()) {
                prop_assert!((a - b).norm() < 1e-10);
            }
        }
    }
}
