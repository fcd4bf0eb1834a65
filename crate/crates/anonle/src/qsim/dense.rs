//! Dense state-vector reference backend.
//!
//! A deliberately plain implementation holding all `2^n` amplitudes in a
//! flat vector, used as an independent cross-check of the sparse backend on
//! small registers. It shares nothing with the sparse code path except the
//! [`GateMatrix`] type and the measurement conventions: qubit lists are
//! packed most-significant-first, and every `measure` call consumes exactly
//! one uniform draw, resolving it against outcomes in ascending numeric
//! order.

use num_complex::Complex64;
use rand::Rng;

use super::gates::GateMatrix;

type C64 = Complex64;

/// A full state vector over `n` qubits, indexed `0..n`.
///
/// Qubit `q` occupies bit `n-1-q` of an amplitude index, so qubit 0 is the
/// most significant bit and `amplitude(x)` reads naturally as the bitstring
/// `x` over qubits in order.
#[derive(Debug, Clone)]
pub struct DenseState {
    n: usize,
    amps: Vec<C64>,
}

impl DenseState {
    /// `|0…0⟩` on `n ≤ 24` qubits.
    pub fn new(n: usize) -> Self {
        assert!(n <= 24, "dense backend is for small registers");
        let mut amps = vec![C64::ZERO; 1 << n];
        amps[0] = C64::ONE;
        DenseState { n, amps }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    fn bit(&self, index: usize, q: usize) -> usize {
        (index >> (self.n - 1 - q)) & 1
    }

    fn mask(&self, q: usize) -> usize {
        1 << (self.n - 1 - q)
    }

    pub fn apply_1q(&mut self, g: &GateMatrix, q: usize) {
        assert_eq!(g.dim(), 2);
        assert!(q < self.n);
        let m = self.mask(q);
        for base in 0..self.amps.len() {
            if base & m != 0 {
                continue;
            }
            let a0 = self.amps[base];
            let a1 = self.amps[base | m];
            self.amps[base] = g.entry(0, 0) * a0 + g.entry(0, 1) * a1;
            self.amps[base | m] = g.entry(1, 0) * a0 + g.entry(1, 1) * a1;
        }
    }

    pub fn apply_2q(&mut self, g: &GateMatrix, hi: usize, lo: usize) {
        assert_eq!(g.dim(), 4);
        assert!(hi < self.n && lo < self.n && hi != lo);
        let mh = self.mask(hi);
        let ml = self.mask(lo);
        for base in 0..self.amps.len() {
            if base & (mh | ml) != 0 {
                continue;
            }
            let idx = [base, base | ml, base | mh, base | mh | ml];
            let old = [self.amps[idx[0]], self.amps[idx[1]], self.amps[idx[2]], self.amps[idx[3]]];
            for (r, &i) in idx.iter().enumerate() {
                let mut acc = C64::ZERO;
                for (c, &o) in old.iter().enumerate() {
                    acc += g.entry(r, c) * o;
                }
                self.amps[i] = acc;
            }
        }
    }

    /// Reversible classical update: reads `inputs ++ targets` (each list
    /// packed most-significant-first, inputs above targets), and replaces the
    /// target bits with `f`'s low output bits. For every fixed input value
    /// `f` must permute the target values.
    pub fn apply_classical(&mut self, inputs: &[usize], targets: &[usize], f: &dyn Fn(u64) -> u64) {
        assert!(!targets.is_empty());
        let mut new = vec![C64::ZERO; self.amps.len()];
        for (index, &amp) in self.amps.iter().enumerate() {
            let mut arg: u64 = 0;
            for &q in inputs.iter().chain(targets) {
                arg = (arg << 1) | self.bit(index, q) as u64;
            }
            let out = f(arg);
            let mut dst = index;
            for (j, &q) in targets.iter().enumerate() {
                let bit = (out >> (targets.len() - 1 - j)) & 1;
                let m = self.mask(q);
                dst = if bit == 1 { dst | m } else { dst & !m };
            }
            new[dst] += amp;
        }
        self.amps = new;
    }

    /// Measures `qubits` jointly (packed most-significant-first), consuming
    /// exactly one uniform draw and collapsing the state.
    pub fn measure(&mut self, qubits: &[usize], rng: &mut impl Rng) -> u64 {
        assert!(!qubits.is_empty());
        let mut probs = vec![0.0f64; 1 << qubits.len()];
        for (index, amp) in self.amps.iter().enumerate() {
            let mut key: usize = 0;
            for &q in qubits {
                key = (key << 1) | self.bit(index, q);
            }
            probs[key] += amp.norm_sqr();
        }
        let draw: f64 = rng.random();
        let mut acc = 0.0;
        let mut outcome = probs.len() - 1;
        for (key, &p) in probs.iter().enumerate() {
            acc += p;
            if draw < acc {
                outcome = key;
                break;
            }
        }
        let scale = C64::new(1.0 / probs[outcome].sqrt(), 0.0);
        for index in 0..self.amps.len() {
            let mut key: usize = 0;
            for &q in qubits {
                key = (key << 1) | self.bit(index, q);
            }
            if key == outcome {
                self.amps[index] *= scale;
            } else {
                self.amps[index] = C64::ZERO;
            }
        }
        outcome as u64
    }

    /// Hadamard-basis measurement: rotate each listed qubit by H, then
    /// measure computationally (0 ↔ |+⟩, 1 ↔ |−⟩).
    pub fn measure_hadamard(&mut self, qubits: &[usize], rng: &mut impl Rng) -> u64 {
        let h = super::gates::hadamard();
        for &q in qubits {
            self.apply_1q(&h, q);
        }
        self.measure(qubits, rng)
    }

    /// Amplitude of the basis state given by bitstring `x` over qubits in
    /// order (qubit 0 is the most significant bit of `x`).
    pub fn amplitude(&self, x: u64) -> C64 {
        self.amps[x as usize]
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::super::gates;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bell_pair_amplitudes() {
        let mut st = DenseState::new(2);
        st.apply_1q(&gates::hadamard(), 0);
        st.apply_2q(&gates::cnot(), 0, 1);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((st.amplitude(0b00).re - s).abs() < 1e-12);
        assert!((st.amplitude(0b11).re - s).abs() < 1e-12);
        assert!(st.amplitude(0b01).norm() < 1e-12);
        assert!(st.amplitude(0b10).norm() < 1e-12);
        assert!((st.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn classical_update_is_a_conditional_permutation() {
        let mut st = DenseState::new(3);
        st.apply_1q(&gates::hadamard(), 0);
        // Target bit 2 ^= bit 0 (a CNOT written classically).
        st.apply_classical(&[0], &[2], &|arg| (arg >> 1) ^ (arg & 1));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((st.amplitude(0b000).re - s).abs() < 1e-12);
        assert!((st.amplitude(0b101).re - s).abs() < 1e-12);
    }

    #[test]
    fn measurement_collapses_and_renormalizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut st = DenseState::new(2);
        st.apply_1q(&gates::hadamard(), 0);
        st.apply_2q(&gates::cnot(), 0, 1);
        let z = st.measure(&[0, 1], &mut rng);
        assert!(z == 0b00 || z == 0b11);
        assert!((st.amplitude(z).norm() - 1.0).abs() < 1e-12);
        assert!((st.norm() - 1.0).abs() < 1e-12);
        // The state is now classical: measuring again is deterministic but
        // still consumes a draw.
        let z2 = st.measure(&[0, 1], &mut rng);
        assert_eq!(z, z2);
    }
}
