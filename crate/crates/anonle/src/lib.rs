//! Deterministic simulator for exact leader election in anonymous networks.
//!
//! An anonymous network is a message-passing system in which every party runs
//! the same program with the same inputs (except, possibly, its own degree)
//! and has no identifier; the only structure a party can see is a private
//! numbering of its communication ports. This crate implements two election
//! protocols that terminate with *certainty* (not just with high probability)
//! on such networks, by letting parties share small entangled states and
//! repeatedly split the candidate set on measurement outcomes:
//!
//! * [`leader::algorithm1`] — needs only an upper bound on the number of
//!   parties, runs one elimination phase per candidate count, and exchanges
//!   qubits in every phase.
//! * [`leader::algorithm2`] — needs the exact number of parties, uses a single
//!   round of quantum communication up front, then finishes with classical
//!   messages and local measurements in logarithmically many phases. A
//!   generalized composition ([`leader::algorithm2_generalized`]) removes the
//!   exact-count requirement by racing one instance per candidate count.
//!
//! Everything is built to be replayable: topology generation, port numbering,
//! scheduling, and measurement sampling are all pure functions of explicit
//! seeds, so a run (and its full report) is reproducible byte for byte.
//!
//! Module map:
//!
//! * [`topology`] — graph families, port numberings, the edge-list file format.
//! * [`qsim`] — sparse multi-party quantum state with ownership tracking,
//!   the election gate families, and a dense reference backend.
//! * [`runtime`] — synchronous round engine: scheduling, message delivery,
//!   communication counters, per-party RNG streams.
//! * [`fview`] — views and folded views (level-merged view DAGs): minimization,
//!   canonical serialization, path-set comparison, and party counting.
//! * [`leader`] — the election protocols themselves.
//! * [`cli`] — experiment configuration, report generation, exit policy.

pub mod cli;
pub mod error;
pub mod fview;
pub mod leader;
pub mod qsim;
pub mod runtime;
pub mod topology;

pub use error::Error;

/// Crate-wide result alias; protocol code and the engine use the umbrella
/// [`Error`] so futures compose without per-module conversions at every call.
pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) mod util {
    /// SplitMix64 finalizer; used to derive independent sub-seeds from one
    /// experiment seed, so e.g. topology sampling and port assignment do not
    /// share a stream.
    pub fn mix_seed(seed: u64, salt: u64) -> u64 {
        let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// `⌈log₂ m⌉` for `m ≥ 1` (0 for `m = 1`).
    pub fn ceil_log2(m: usize) -> usize {
        assert!(m >= 1);
        (usize::BITS - (m - 1).leading_zeros()) as usize
    }

    #[cfg(test)]
    mod tests {
        use super::*;

        #[test]
        fn ceil_log2_matches_definition() {
            for m in 1..200usize {
                let mut k = 0usize;
                while (1usize << k) < m {
                    k += 1;
                }
                assert_eq!(ceil_log2(m), k, "m = {m}");
            }
        }
    }
}
