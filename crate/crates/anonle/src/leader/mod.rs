//! The election protocols.
//!
//! Both protocols start with every party *eligible* and shrink the eligible
//! set through rounds of shared-state preparation and measurement until
//! exactly one party remains; see [`alg1`] and [`alg2`] for the mechanics.
//! Everything here is written against [`crate::runtime::ProtoCtx`], so the
//! same code runs on a bare network handle or multiplexed with other
//! instances.

pub mod alg1;
pub mod alg2;

pub use alg1::algorithm1;
pub use alg2::{algorithm2, algorithm2_generalized, le_modified, GenOutcome};

use serde::Serialize;

use crate::error::Error;
use crate::fview::FviewError;
use crate::runtime::RunError;

/// A party's final role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Leader,
    Follower,
    /// The protocol detected that it cannot finish (only possible when run
    /// with a *wrong* assumed party count; see [`alg2::le_modified`]).
    Error(Reason),
}

impl Outcome {
    pub fn is_error(&self) -> bool {
        matches!(self, Outcome::Error(_))
    }
}

/// Why a lenient protocol instance gave up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    /// A peer stopped sending, or sent something undecodable — instances
    /// racing with wrong parameters die this way, in cascade.
    Desync,
    /// A party count came out fractional, proving the assumed size wrong.
    NonIntegerCount,
    /// The phase budget ran out with more than one candidate left.
    PhaseBudget,
}

/// Failures that a *lenient* instance converts into [`Outcome::Error`]
/// instead of aborting the run. Everything else is a genuine bug.
pub(crate) fn soft_reason(e: &Error) -> Option<Reason> {
    match e {
        Error::Run(RunError::MissingMessage { .. }) | Error::Run(RunError::Decode(_)) => {
            Some(Reason::Desync)
        }
        Error::Fview(FviewError::Codec(_)) => Some(Reason::Desync),
        Error::Fview(FviewError::NonIntegerCount { .. }) => Some(Reason::NonIntegerCount),
        _ => None,
    }
}

/// Two-bit value algebra for the eligibility-bit consistency check:
/// `00` and `01` are the bits themselves, `10` means "no value yet" and
/// `11` means "conflict seen". Combining is commutative, associative and
/// idempotent, with no-value as identity and conflict absorbing — so folding
/// any spanning collection of values in any order gives the same verdict.
pub(crate) const NO_VALUE: u64 = 0b10;
pub(crate) const CONFLICT: u64 = 0b11;

pub(crate) fn combine(a: u64, b: u64) -> u64 {
    match (a, b) {
        (NO_VALUE, x) | (x, NO_VALUE) => x,
        (CONFLICT, _) | (_, CONFLICT) => CONFLICT,
        (x, y) if x == y => x,
        _ => CONFLICT,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL: [u64; 4] = [0b00, 0b01, NO_VALUE, CONFLICT];

    #[test]
    fn combine_table_spot_checks() {
        assert_eq!(combine(0b00, 0b01), CONFLICT);
        assert_eq!(combine(NO_VALUE, 0b01), 0b01);
        assert_eq!(combine(CONFLICT, NO_VALUE), CONFLICT);
        assert_eq!(combine(0b00, 0b00), 0b00);
        assert_eq!(combine(0b01, 0b01), 0b01);
    }

    #[test]
    fn combine_is_commutative_associative_idempotent() {
        for a in ALL {
            assert_eq!(combine(a, a), a, "idempotence at {a:02b}");
            assert_eq!(combine(NO_VALUE, a), a, "identity at {a:02b}");
            assert_eq!(combine(CONFLICT, a), CONFLICT, "absorption at {a:02b}");
            for b in ALL {
                assert_eq!(combine(a, b), combine(b, a), "commutativity at {a:02b},{b:02b}");
                for c in ALL {
                    assert_eq!(
                        combine(combine(a, b), c),
                        combine(a, combine(b, c)),
                        "associativity at {a:02b},{b:02b},{c:02b}"
                    );
                }
            }
        }
    }

    #[test]
    fn outcome_serializes_snake_case() {
        assert_eq!(serde_json::to_string(&Outcome::Leader).unwrap(), "\"leader\"");
        assert_eq!(
            serde_json::to_string(&Outcome::Error(Reason::Desync)).unwrap(),
            "{\"error\":\"desync\"}"
        );
    }
}
