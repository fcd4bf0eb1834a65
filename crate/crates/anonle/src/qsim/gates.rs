//! Gate matrices used by the election protocols.
//!
//! Conventions: a one-qubit gate is `[[⟨0|G|0⟩, ⟨0|G|1⟩], [⟨1|G|0⟩, ⟨1|G|1⟩]]`,
//! i.e. `out[r] = Σ_c m[r][c]·in[c]`. A two-qubit gate acts on the ordered
//! basis `|hi lo⟩ = |00⟩, |01⟩, |10⟩, |11⟩`.
//!
//! Besides the standard gates, this module provides the phase-tuned families
//! the protocols rely on: `u_k` (and its parameterized form `u_k_general`)
//! for even party counts, `v_k` for odd counts, and the single-qubit phase
//! `w_k`. Their defining property, exercised by the test suite: when `k`
//! parties share the state `(|0…0⟩ + |1…1⟩)/√2` and each applies its gate
//! (for odd `k`, after fanning its qubit out to a second one), the resulting
//! state has zero amplitude on every "all parties read the same value"
//! outcome. `w_k` repairs the sign of the shared state: applied by all `k`
//! parties it maps `(|0…0⟩ − |1…1⟩)/√2` to `(|0…0⟩ + |1…1⟩)/√2`.

use num_complex::Complex64;

use super::QsimError;

type C64 = Complex64;

/// Tolerance for the unitarity check performed on every constructed matrix.
pub const UNITARY_TOLERANCE: f64 = 1e-12;

fn cis(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

/// A validated 2×2 or 4×4 unitary.
#[derive(Debug, Clone, PartialEq)]
pub struct GateMatrix {
    dim: usize,
    m: [[C64; 4]; 4],
}

impl GateMatrix {
    /// Builds a one-qubit gate, rejecting non-unitary input.
    ///
    /// # Errors
    /// [`QsimError::NotUnitary`] if `‖M·M† − I‖∞` exceeds
    /// [`UNITARY_TOLERANCE`].
    pub fn one_qubit(rows: [[C64; 2]; 2]) -> Result<Self, QsimError> {
        let mut m = [[C64::ZERO; 4]; 4];
        for (r, row) in rows.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                m[r][c] = v;
            }
        }
        Self::checked(GateMatrix { dim: 2, m })
    }

    /// Builds a two-qubit gate on the `|hi lo⟩` basis, rejecting non-unitary
    /// input.
    ///
    /// # Errors
    /// [`QsimError::NotUnitary`] as for [`GateMatrix::one_qubit`].
    pub fn two_qubit(rows: [[C64; 4]; 4]) -> Result<Self, QsimError> {
        Self::checked(GateMatrix { dim: 4, m: rows })
    }

    fn checked(g: GateMatrix) -> Result<GateMatrix, QsimError> {
        let dev = g.unitarity_deviation();
        if dev > UNITARY_TOLERANCE {
            return Err(QsimError::NotUnitary { dev });
        }
        Ok(g)
    }

    /// Max-norm distance of `M·M†` from the identity.
    pub fn unitarity_deviation(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for r in 0..self.dim {
            for c in 0..self.dim {
                let mut dot = C64::ZERO;
                for k in 0..self.dim {
                    dot += self.m[r][k] * self.m[c][k].conj();
                }
                let target = if r == c { C64::ONE } else { C64::ZERO };
                dev = dev.max((dot - target).norm());
            }
        }
        dev
    }

    /// 2 for one-qubit gates, 4 for two-qubit gates.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        debug_assert!(row < self.dim && col < self.dim);
        self.m[row][col]
    }
}

/// The Hadamard gate.
pub fn hadamard() -> GateMatrix {
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    GateMatrix::one_qubit([[h, h], [h, -h]]).expect("H is unitary")
}

/// The Pauli-X gate.
pub fn pauli_x() -> GateMatrix {
    GateMatrix::one_qubit([[C64::ZERO, C64::ONE], [C64::ONE, C64::ZERO]]).expect("X is unitary")
}

/// Controlled-NOT with the high qubit as control, low qubit as target.
pub fn cnot() -> GateMatrix {
    let o = C64::ONE;
    let z = C64::ZERO;
    GateMatrix::two_qubit([
        [o, z, z, z],
        [z, o, z, z],
        [z, z, z, o],
        [z, z, o, z],
    ])
    .expect("CNOT is unitary")
}

/// The splitting gate for even `k ≥ 2`:
///
/// ```text
/// u_k = 1/√2 · [ 1            e^{-iπ/k} ]
///              [ -e^{iπ/k}    1         ]
/// ```
///
/// Equal to [`u_k_general`] at `ψ = 0`, `t = 0`.
///
/// # Errors
/// [`QsimError::GateParam`] unless `k` is even and at least 2.
pub fn u_k(k: usize) -> Result<GateMatrix, QsimError> {
    u_k_general(k, 0.0, 0)
}

/// The phase-shifted splitting family for even `k ≥ 2`:
///
/// ```text
/// u_k(ψ, t) = 1/√2 · [ e^{iψ}               e^{i(ψ - (2t+1)π/k)} ]
///                    [ -e^{-i(ψ - (2t+1)π/k)}    e^{-iψ}          ]
/// ```
///
/// For any `ψ` and `t`, `k` parties sharing `(|0^k⟩ + |1^k⟩)/√2` and each
/// applying this gate produce zero amplitude on `|0^k⟩` and `|1^k⟩`.
///
/// # Errors
/// [`QsimError::GateParam`] unless `k` is even and at least 2.
pub fn u_k_general(k: usize, psi: f64, t: u32) -> Result<GateMatrix, QsimError> {
    if k < 2 || !k.is_multiple_of(2) {
        return Err(QsimError::GateParam(format!("u_k needs even k >= 2, got {k}")));
    }
    let theta = (2.0 * f64::from(t) + 1.0) * std::f64::consts::PI / k as f64;
    let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    GateMatrix::one_qubit([
        [s * cis(psi), s * cis(psi - theta)],
        [-s * cis(-(psi - theta)), s * cis(-psi)],
    ])
}

/// The phase gate `w_k = diag(1, e^{iπ/k})` for `k ≥ 1`.
///
/// # Errors
/// [`QsimError::GateParam`] if `k == 0`.
pub fn w_k(k: usize) -> Result<GateMatrix, QsimError> {
    if k == 0 {
        return Err(QsimError::GateParam("w_k needs k >= 1".into()));
    }
    GateMatrix::one_qubit([
        [C64::ONE, C64::ZERO],
        [C64::ZERO, cis(std::f64::consts::PI / k as f64)],
    ])
}

/// The splitting gate for odd `k ≥ 3`, acting on a qubit pair `|hi lo⟩`
/// prepared as `|00⟩`/`|11⟩` by fanning the candidate qubit out.
///
/// With `R = cos(π/k)`, `I = sin(π/k)`, `R' = cos(π/2k)` and the overall
/// factor `1/√(R+1)`:
///
/// ```text
/// v_k = 1/√(R+1) · [ 1/√2    0        √R                     e^{iπ/k}/√2  ]
///                  [ 1/√2    0        -√R·e^{-iπ/k}          e^{-iπ/k}/√2 ]
///                  [ √R      0        e^{-iπ/2k}·I/(i√2·R')  -√R          ]
///                  [ 0       √(R+1)   0                      0            ]
/// ```
///
/// `k` parties sharing `(|00⟩^k + |11⟩^k)/√2` after the fan-out and each
/// applying `v_k` produce zero amplitude on every `|zz…z⟩`, `z ∈ {0,1,2,3}`.
///
/// # Errors
/// [`QsimError::GateParam`] unless `k` is odd and at least 3.
pub fn v_k(k: usize) -> Result<GateMatrix, QsimError> {
    if k < 3 || k.is_multiple_of(2) {
        return Err(QsimError::GateParam(format!("v_k needs odd k >= 3, got {k}")));
    }
    let pi = std::f64::consts::PI;
    let r = (pi / k as f64).cos();
    let i_k = (pi / k as f64).sin();
    let r2 = (pi / (2 * k) as f64).cos();
    let q = 1.0 / (r + 1.0).sqrt();
    let s = 1.0 / 2f64.sqrt();
    let sr = r.sqrt();
    let z = C64::ZERO;
    let re = |x: f64| C64::new(x, 0.0);
    // e^{-iπ/2k}·I/(i√2·R') = -i·e^{-iπ/2k}·I/(√2·R')
    let m22 = cis(-pi / (2 * k) as f64) * C64::new(0.0, -1.0) * re(i_k / (2f64.sqrt() * r2));
    GateMatrix::two_qubit([
        [re(q * s), z, re(q * sr), re(q * s) * cis(pi / k as f64)],
        [re(q * s), z, re(-q * sr) * cis(-pi / k as f64), re(q * s) * cis(-pi / k as f64)],
        [re(q * sr), z, re(q) * m22, re(-q * sr)],
        [z, re(q * (r + 1.0).sqrt()), z, z],
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn fixed_gates_are_unitary() {
        assert!(hadamard().unitarity_deviation() < 1e-15);
        assert!(pauli_x().unitarity_deviation() < 1e-15);
        assert!(cnot().unitarity_deviation() < 1e-15);
    }

    #[test]
    fn u_2_matches_closed_form() {
        // u_2 = 1/√2 [[1, -i], [-i, 1]]
        let g = u_k(2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(g.entry(0, 0), C64::new(s, 0.0), 1e-15));
        assert!(close(g.entry(0, 1), C64::new(0.0, -s), 1e-15));
        assert!(close(g.entry(1, 0), C64::new(0.0, -s), 1e-15));
        assert!(close(g.entry(1, 1), C64::new(s, 0.0), 1e-15));
    }

    #[test]
    fn w_2_matches_closed_form() {
        // w_2 = diag(1, i)
        let g = w_k(2).unwrap();
        assert!(close(g.entry(0, 0), C64::ONE, 1e-15));
        assert!(close(g.entry(0, 1), C64::ZERO, 1e-15));
        assert!(close(g.entry(1, 0), C64::ZERO, 1e-15));
        assert!(close(g.entry(1, 1), C64::new(0.0, 1.0), 1e-15));
    }

    #[test]
    fn v_3_matches_closed_form() {
        // With k = 3: R = 1/2, so the 1/√(R+1)·1/√2 entries collapse to 1/√3.
        let g = v_k(3).unwrap();
        let t3 = 1.0 / 3f64.sqrt(); // 0.5773502691896258
        assert!((t3 - 0.577_350_269_189_625_8).abs() < 1e-15);
        let pi3 = std::f64::consts::FRAC_PI_3;
        assert!(close(g.entry(0, 0), C64::new(t3, 0.0), 1e-15));
        assert!(close(g.entry(0, 1), C64::ZERO, 1e-15));
        assert!(close(g.entry(0, 2), C64::new(t3, 0.0), 1e-15));
        // e^{iπ/3}/√3 = 0.28867513… + 0.5i
        assert!(close(g.entry(0, 3), C64::new(t3, 0.0) * cis(pi3), 1e-15));
        assert!(close(g.entry(0, 3), C64::new(0.288_675_134_594_812_9, 0.5), 1e-12));
        // -e^{-iπ/3}/√3 = -0.28867513… + 0.5i
        assert!(close(g.entry(1, 2), C64::new(-0.288_675_134_594_812_9, 0.5), 1e-12));
        // e^{-i2π/3}/√3 = -0.28867513… - 0.5i
        assert!(close(g.entry(2, 2), C64::new(-0.288_675_134_594_812_9, -0.5), 1e-12));
        assert!(close(g.entry(3, 1), C64::ONE, 1e-15));
        assert!(close(g.entry(3, 0), C64::ZERO, 1e-15));
        assert!(close(g.entry(3, 2), C64::ZERO, 1e-15));
        assert!(close(g.entry(3, 3), C64::ZERO, 1e-15));
    }

    #[test]
    fn u_family_is_unitary_and_specializes() {
        for k in [2usize, 4, 6, 8, 10] {
            assert!(u_k(k).unwrap().unitarity_deviation() <= UNITARY_TOLERANCE);
            for (psi, t) in [(0.0, 0), (0.3, 1), (1.1, 2), (-2.4, 5)] {
                let g = u_k_general(k, psi, t).unwrap();
                assert!(g.unitarity_deviation() <= UNITARY_TOLERANCE, "k={k} psi={psi} t={t}");
            }
            let a = u_k(k).unwrap();
            let b = u_k_general(k, 0.0, 0).unwrap();
            for r in 0..2 {
                for c in 0..2 {
                    assert!(close(a.entry(r, c), b.entry(r, c), 1e-15));
                }
            }
        }
        assert!(u_k(3).is_err());
        assert!(u_k(0).is_err());
    }

    #[test]
    fn v_family_is_unitary() {
        for k in [3usize, 5, 7, 9, 11] {
            assert!(v_k(k).unwrap().unitarity_deviation() <= UNITARY_TOLERANCE, "k={k}");
        }
        assert!(v_k(2).is_err());
        assert!(v_k(1).is_err());
    }

    /// Amplitude of `|x…x⟩` after every one of `k` parties applies `g` to its
    /// share of `(|0^k⟩ + |1^k⟩)/√2`: `(g[x][0]^k + g[x][1]^k)/√2`.
    fn all_equal_amp_1q(g: &GateMatrix, k: usize, x: usize) -> f64 {
        let amp = g.entry(x, 0).powu(k as u32) + g.entry(x, 1).powu(k as u32);
        (amp * C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0)).norm()
    }

    #[test]
    fn u_family_kills_all_equal_outcomes() {
        for k in [2usize, 4, 6, 8] {
            for (psi, t) in [(0.0, 0), (0.3, 1), (1.1, 2)] {
                let g = u_k_general(k, psi, t).unwrap();
                for x in 0..2 {
                    assert!(all_equal_amp_1q(&g, k, x) < 1e-9, "k={k} psi={psi} t={t} x={x}");
                }
            }
        }
    }

    #[test]
    fn v_family_kills_all_equal_outcomes() {
        // After fan-out the two branches feed basis columns 0 (|00⟩) and 3
        // (|11⟩) of every party's gate.
        for k in [3usize, 5, 7] {
            let g = v_k(k).unwrap();
            for z in 0..4 {
                let amp = g.entry(z, 0).powu(k as u32) + g.entry(z, 3).powu(k as u32);
                assert!(amp.norm() / 2f64.sqrt() < 1e-9, "k={k} z={z}");
            }
        }
    }

    #[test]
    fn w_k_repairs_the_minus_state() {
        // k parties applying w_k multiply |1^k⟩ by e^{iπ} = -1.
        for k in [2usize, 3, 5, 8] {
            let g = w_k(k).unwrap();
            let phase = g.entry(1, 1).powu(k as u32);
            assert!(close(phase, -C64::ONE, 1e-12), "k={k}");
        }
    }

    #[test]
    fn constructor_rejects_non_unitary() {
        let bad = GateMatrix::one_qubit([[C64::ONE, C64::ONE], [C64::ZERO, C64::ONE]]);
        assert!(matches!(bad, Err(QsimError::NotUnitary { .. })));
    }
}
