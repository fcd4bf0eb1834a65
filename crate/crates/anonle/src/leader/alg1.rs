//! Election by repeated symmetry breaking with a known party-count bound.
//!
//! The protocol runs `bound - 1` phases, parameterized `k = bound` down to
//! `2`. Each phase has three parts, all of which every party executes in
//! lockstep:
//!
//! 1. **Consistency check.** Every eligible party prepares a qubit in
//!    `|0⟩+|1⟩` and tags it with a two-bit value register; ineligible
//!    parties contribute the neutral "no value" tag. The tags are then
//!    folded across the network for `bound - 1` rounds using the conflict
//!    algebra from [`super::combine`], which leaves every party holding the
//!    same verdict: *consistent* if all eligible bits agree in every branch
//!    of the shared state, *conflict* otherwise. The verdict flag is
//!    measured (collapsing the shared state to the matching branches) and
//!    the whole fold is then uncomputed qubit-for-qubit, returning every
//!    borrowed message qubit to its sender and every ancilla to `|0⟩`.
//! 2. **Symmetry breaking.** If the check passed, the eligible parties
//!    share an exact cat state `|0…0⟩+|1…1⟩`. Each applies a phase-`k`
//!    rotation chosen so that when exactly `k` parties are eligible the
//!    all-equal measurement pattern has amplitude zero — guaranteeing a
//!    proper split precisely when progress is needed. If the check failed,
//!    plain measurement splits the survivors by their (provably
//!    non-constant) bit pattern.
//! 3. **Maximum flood.** Measurement outcomes are flooded for `bound - 1`
//!    rounds and only parties holding the maximum stay eligible.
//!
//! An invariant ties it together: at the start of the phase with parameter
//! `k`, the eligible count is at most `k`, and whenever it *equals* `k` the
//! phase strictly reduces it. After the `k = 2` phase exactly one eligible
//! party remains.

use crate::leader::{combine, Outcome, CONFLICT, NO_VALUE};
use crate::qsim::{gates, QubitId};
use crate::runtime::{BitReader, BitWriter, Payload, ProtoCtx, RunError};

/// Elects a single leader among anonymous parties on an undirected network,
/// given the exact party count or any upper bound on it.
pub async fn algorithm1<C: ProtoCtx>(ctx: &C, bound: usize) -> crate::Result<Outcome> {
    if ctx.directed() {
        return Err(crate::Error::Protocol(
            "this protocol requires an undirected network".into(),
        ));
    }
    if bound < 2 {
        return Err(crate::Error::Protocol(
            "the party-count bound must be at least 2".into(),
        ));
    }
    let mut eligible = true;
    for k in (2..=bound).rev() {
        let (consistent, marker) = consistency_check(ctx, bound, eligible).await?;
        let marker = symmetry_break(ctx, k, eligible, consistent, marker).await?;
        let max = flood_max(ctx, bound, marker).await?;
        eligible = eligible && marker == max;
        ctx.trace(serde_json::json!({
            "protocol": "alg1",
            "phase_k": k,
            "consistent": consistent,
            "marker": marker,
            "max": max,
            "eligible": eligible,
        }));
    }
    Ok(if eligible { Outcome::Leader } else { Outcome::Follower })
}

/// The fold update: combine the previous accumulator value with the values
/// received from all `d` neighbors, and XOR the result into the (fresh)
/// target pair. A fresh target is essential — the combine itself is not
/// injective, so it cannot be computed in place reversibly.
fn fold_update(d: usize) -> impl Fn(u64) -> u64 {
    move |arg| {
        let target = arg & 0b11;
        let vals = arg >> 2; // own value in the top two bits, then per-port
        let mut acc = NO_VALUE;
        for j in 0..=d {
            acc = combine(acc, (vals >> (2 * (d - j))) & 0b11);
        }
        target ^ acc
    }
}

/// Runs the distributed consistency check and returns the shared verdict.
/// On return the only quantum state left at this party is its `value`
/// qubit (eligible parties only), handed back for the symmetry-break step.
async fn consistency_check<C: ProtoCtx>(
    ctx: &C,
    bound: usize,
    eligible: bool,
) -> crate::Result<(bool, Option<QubitId>)> {
    let d = ctx.out_degree();

    // Initial value: eligible parties put a fresh `|0⟩+|1⟩` bit in the
    // low slot of the tag pair; ineligible parties tag "no value".
    let value = if eligible {
        let q = ctx.alloc_qubit();
        ctx.apply_1q(&gates::hadamard(), q)?;
        Some(q)
    } else {
        None
    };
    let acc0 = [ctx.alloc_qubit(), ctx.alloc_qubit()];
    match value {
        Some(q) => ctx.apply_2q(&gates::cnot(), q, acc0[1])?,
        None => ctx.apply_1q(&gates::pauli_x(), acc0[0])?,
    }

    // Forward pass: copy, exchange, fold — with a fresh accumulator pair
    // every round so the update stays reversible.
    let mut accs: Vec<[QubitId; 2]> = vec![acc0];
    let mut sent: Vec<Vec<[QubitId; 2]>> = Vec::with_capacity(bound - 1);
    let mut received: Vec<Vec<[QubitId; 2]>> = Vec::with_capacity(bound - 1);
    for _ in 1..bound {
        let prev = *accs.last().expect("accumulator chain is never empty");
        let mut mine = Vec::with_capacity(d);
        for port in 0..d {
            let pair = [ctx.alloc_qubit(), ctx.alloc_qubit()];
            ctx.apply_2q(&gates::cnot(), prev[0], pair[0])?;
            ctx.apply_2q(&gates::cnot(), prev[1], pair[1])?;
            ctx.send(port, Payload::from_qubits(vec![pair[0], pair[1]]))?;
            mine.push(pair);
        }
        let inbox = ctx.next_round().await?;
        let mut got = Vec::with_capacity(d);
        for (port, slot) in inbox.into_iter().enumerate() {
            let p = slot.ok_or(RunError::MissingMessage { port })?;
            if p.qubits.len() != 2 || p.bit_len != 0 {
                return Err(RunError::Decode("expected a bare qubit pair".into()).into());
            }
            got.push([p.qubits[0], p.qubits[1]]);
        }
        let acc = [ctx.alloc_qubit(), ctx.alloc_qubit()];
        let mut inputs = vec![prev[0], prev[1]];
        for pair in &got {
            inputs.extend_from_slice(pair);
        }
        let f = fold_update(d);
        ctx.apply_classical(&inputs, &acc, &f)?;
        sent.push(mine);
        received.push(got);
        accs.push(acc);
    }

    // Verdict: after `bound - 1` folds the accumulator holds the same
    // global combine at every party in every branch, so measuring the
    // conflict flag gives one network-wide answer.
    let last = *accs.last().expect("accumulator chain is never empty");
    let flag = ctx.alloc_qubit();
    let verdict = |arg: u64| {
        let target = arg & 1;
        target ^ u64::from(arg >> 1 == CONFLICT)
    };
    ctx.apply_classical(&[last[0], last[1]], &[flag], &verdict)?;
    let consistent = ctx.measure(&[flag])? == 0;
    ctx.discard_classical(&[flag])?;

    // Inversion: uncompute each fold, hand every borrowed pair back to its
    // sender, and undo the copies into the pairs that come home.
    for t in (1..bound).rev() {
        let acc = accs.pop().expect("one accumulator per forward round");
        let prev = *accs.last().expect("initial accumulator remains");
        let got = &received[t - 1];
        let mut inputs = vec![prev[0], prev[1]];
        for pair in got {
            inputs.extend_from_slice(pair);
        }
        let f = fold_update(d);
        ctx.apply_classical(&inputs, &acc, &f)?;
        ctx.assert_zero_and_free(&acc)?;
        for (port, pair) in got.iter().enumerate() {
            ctx.send(port, Payload::from_qubits(vec![pair[0], pair[1]]))?;
        }
        let inbox = ctx.next_round().await?;
        let mine = &sent[t - 1];
        for (port, slot) in inbox.into_iter().enumerate() {
            let p = slot.ok_or(RunError::MissingMessage { port })?;
            if p.qubits != mine[port] {
                return Err(RunError::Decode("returned qubits are not the ones sent".into()).into());
            }
        }
        for pair in mine {
            ctx.apply_2q(&gates::cnot(), prev[0], pair[0])?;
            ctx.apply_2q(&gates::cnot(), prev[1], pair[1])?;
            ctx.assert_zero_and_free(pair)?;
        }
    }

    // Undo the initial tag.
    let acc0 = accs.pop().expect("initial accumulator remains");
    match value {
        Some(q) => ctx.apply_2q(&gates::cnot(), q, acc0[1])?,
        None => ctx.apply_1q(&gates::pauli_x(), acc0[0])?,
    }
    ctx.assert_zero_and_free(&acc0)?;
    Ok((consistent, value))
}

/// Applies the phase-`k` symmetry-breaking measurement and returns this
/// party's marker: measurement outcome plus one, or zero if ineligible.
async fn symmetry_break<C: ProtoCtx>(
    ctx: &C,
    k: usize,
    eligible: bool,
    consistent: bool,
    value: Option<QubitId>,
) -> crate::Result<u64> {
    debug_assert_eq!(eligible, value.is_some());
    let Some(q) = value else { return Ok(0) };
    let z = if !consistent {
        // The surviving branches have a non-constant bit pattern, so plain
        // measurement already splits the eligible set.
        let z = 2 * ctx.measure(&[q])?;
        ctx.discard_classical(&[q])?;
        z
    } else if k.is_multiple_of(2) {
        ctx.apply_1q(&gates::u_k(k)?, q)?;
        let z = 2 * ctx.measure(&[q])?;
        ctx.discard_classical(&[q])?;
        z
    } else {
        let low = ctx.alloc_qubit();
        ctx.apply_2q(&gates::cnot(), q, low)?;
        ctx.apply_2q(&gates::v_k(k)?, q, low)?;
        let z = ctx.measure(&[q, low])?;
        ctx.discard_classical(&[q, low])?;
        z
    };
    Ok(z + 1)
}

/// Floods the maximum marker through the network; `bound - 1` rounds of
/// three-bit messages reach everyone.
async fn flood_max<C: ProtoCtx>(ctx: &C, bound: usize, marker: u64) -> crate::Result<u64> {
    let d = ctx.out_degree();
    let mut best = marker;
    for _ in 1..bound {
        for port in 0..d {
            let mut w = BitWriter::new();
            w.push_bits(best, 3);
            ctx.send(port, w.into_payload())?;
        }
        let inbox = ctx.next_round().await?;
        for (port, slot) in inbox.into_iter().enumerate() {
            let p = slot.ok_or(RunError::MissingMessage { port })?;
            let got = BitReader::new(&p).read_bits(3)?;
            best = best.max(got);
        }
    }
    Ok(best)
}
