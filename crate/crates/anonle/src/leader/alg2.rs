//! Election in logarithmically many phases, with folded-view bookkeeping.
//!
//! **Stage 1** spends the protocol's entire quantum communication budget in
//! a single round: with `s = ⌈log₂ m⌉` instances batched per port, every
//! party shares a `|0⟩+|1⟩` qubit with each neighbor's, measuring only the
//! *parity* between endpoints. That leaves, per instance, one network-wide
//! entangled pair of branches, plus a classical parity tag on every link
//! describing how each party's branch is twisted relative to its neighbors.
//!
//! **Stage 2** runs up to `s` phases, one prepared instance each, entirely
//! over classical messages. The eligible count `k` is *tracked exactly*:
//!
//! - **A:** each party folds the link parities and eligibility bits into a
//!   folded view deep enough to cover the whole network and reads off a
//!   global verdict — do all eligible parties' branches agree?
//! - **B:** parties that are already ineligible measure their instance
//!   qubit in the `|0⟩±|1⟩` basis, cutting themselves out of the shared
//!   state at the cost of a possible sign flip each. When the verdict was
//!   consistent, a folded-view party count reveals the parity of those
//!   flips, and the eligible parties repair the sign with a phase gate.
//!   They then apply the phase-`k` rotation whose all-equal measurement
//!   outcome has amplitude zero at exactly `k` parties, and measure.
//! - **C:** a final folded view counts, for every outcome value, how many
//!   eligible parties measured it. Only the parties holding the *rarest*
//!   value stay eligible, so `k` at least halves every phase, reaching one
//!   leader within the phase budget.
//!
//! All counting rides on exact folded-view arithmetic, which is only sound
//! when the assumed party count `m` is right. [`le_modified`] runs the same
//! code leniently: with a wrong `m` it returns [`Outcome::Error`] instead
//! of failing the run, which is what makes [`algorithm2_generalized`] work
//! when only a bound on the party count is known — race one instance per
//! candidate `m` and keep the largest one that did not error out.

use serde::Serialize;

use crate::fview::{construct_fview, count_parties, FviewError};
use crate::leader::{soft_reason, Outcome, Reason};
use crate::qsim::{gates, QubitId};
use crate::runtime::{Mux, PartyHandle, Payload, ProtoCtx, RunError};
use crate::util::ceil_log2;

/// Elects a single leader among anonymous parties, given the exact party
/// count. Works on undirected and strongly-connected directed networks.
pub async fn algorithm2<C: ProtoCtx>(ctx: &C, n: usize) -> crate::Result<Outcome> {
    match le_run(ctx, n).await {
        Ok(out) => Ok(out),
        Err(Fail::Hard(e)) => Err(e),
        Err(Fail::Soft(reason)) => Err(crate::Error::Protocol(format!(
            "election with the exact party count reported {reason:?}; this indicates a bug"
        ))),
    }
}

/// The lenient variant: runs the election *assuming* `m` parties, and
/// reports [`Outcome::Error`] instead of aborting when the protocol's own
/// checks reveal the assumption is wrong.
pub async fn le_modified<C: ProtoCtx>(ctx: &C, m: usize) -> crate::Result<Outcome> {
    match le_run(ctx, m).await {
        Ok(out) => Ok(out),
        Err(Fail::Soft(reason)) => Ok(Outcome::Error(reason)),
        Err(Fail::Hard(e)) => Err(e),
    }
}

/// Result of the generalized election under a party-count bound.
#[derive(Debug, Clone, Serialize)]
pub struct GenOutcome {
    /// The assumed count of the largest instance that finished cleanly —
    /// provably the true party count when the bound was valid.
    pub winner: Option<usize>,
    /// This party's role in the winning instance.
    pub outcome: Outcome,
    /// Every instance's result, by assumed count.
    pub per_m: Vec<(usize, Outcome)>,
}

/// Elects a leader knowing only an upper bound on the party count, by
/// running [`le_modified`] for every assumed count `2..=bound` and keeping
/// the largest assumption that survives its own consistency checks.
///
/// In parallel mode all instances are multiplexed over shared rounds, so
/// the quantum communication still all happens in the first round. In
/// sequential mode the assumed counts are tried one at a time, largest
/// first, stopping at the first clean finish.
pub async fn algorithm2_generalized(
    handle: &PartyHandle,
    bound: usize,
    sequential: bool,
) -> crate::Result<GenOutcome> {
    if bound < 2 {
        return Err(crate::Error::Protocol(
            "the party-count bound must be at least 2".into(),
        ));
    }
    let per_m: Vec<(usize, Outcome)> = if sequential {
        let mut tried = Vec::new();
        for m in (2..=bound).rev() {
            let out = le_modified(handle, m).await?;
            tried.push((m, out));
            if !out.is_error() {
                break;
            }
        }
        tried
    } else {
        let outs = Mux::drive(handle, bound - 1, |mctx, tag| async move {
            le_modified(&mctx, tag + 2).await
        })
        .await?;
        outs.into_iter().enumerate().map(|(tag, out)| (tag + 2, out)).collect()
    };
    let winner = per_m
        .iter()
        .filter(|(_, out)| !out.is_error())
        .map(|&(m, _)| m)
        .max();
    let outcome = match winner {
        Some(m) => {
            per_m
                .iter()
                .find(|&&(tried, _)| tried == m)
                .expect("winner comes from per_m")
                .1
        }
        None => Outcome::Error(Reason::PhaseBudget),
    };
    Ok(GenOutcome { winner, outcome, per_m })
}

/// Failure classification inside one instance: soft failures become
/// [`Outcome::Error`] under [`le_modified`], hard ones abort the run.
enum Fail {
    Hard(crate::Error),
    Soft(Reason),
}

impl From<crate::Error> for Fail {
    fn from(e: crate::Error) -> Fail {
        match soft_reason(&e) {
            Some(reason) => Fail::Soft(reason),
            None => Fail::Hard(e),
        }
    }
}

impl From<RunError> for Fail {
    fn from(e: RunError) -> Fail {
        crate::Error::from(e).into()
    }
}

impl From<FviewError> for Fail {
    fn from(e: FviewError) -> Fail {
        crate::Error::from(e).into()
    }
}

impl From<crate::qsim::QsimError> for Fail {
    fn from(e: crate::qsim::QsimError) -> Fail {
        crate::Error::from(e).into()
    }
}

/// Qubits this instance is responsible for. Tracked in one place so a soft
/// failure can still consume everything and leave the simulator clean.
#[derive(Default)]
struct LiveQubits {
    /// One prepared qubit per instance, `None` once consumed.
    shared: Vec<Option<QubitId>>,
    /// In-flight qubits received but not yet folded away.
    loose: Vec<QubitId>,
}

fn salvage<C: ProtoCtx>(ctx: &C, live: &mut LiveQubits) -> crate::Result<()> {
    for q in live.loose.drain(..) {
        ctx.measure(&[q])?;
        ctx.discard_classical(&[q])?;
    }
    for slot in live.shared.iter_mut() {
        if let Some(q) = slot.take() {
            ctx.measure(&[q])?;
            ctx.discard_classical(&[q])?;
        }
    }
    Ok(())
}

async fn le_run<C: ProtoCtx>(ctx: &C, m: usize) -> Result<Outcome, Fail> {
    let mut live = LiveQubits::default();
    let out = le_core(ctx, m, &mut live).await;
    if matches!(out, Err(Fail::Soft(_))) {
        // The instance is giving up mid-protocol; measure away whatever
        // state it still holds so nothing leaks into later instances.
        salvage(ctx, &mut live).map_err(Fail::Hard)?;
    }
    out
}

async fn le_core<C: ProtoCtx>(ctx: &C, m: usize, live: &mut LiveQubits) -> Result<Outcome, Fail> {
    if m < 2 {
        return Err(Fail::Hard(crate::Error::Protocol(
            "the assumed party count must be at least 2".into(),
        )));
    }
    let s = ceil_log2(m);
    let d_out = ctx.out_degree();
    let d_in = ctx.in_degree();

    // ---- Stage 1: all quantum communication, in one round. ------------
    live.shared = (0..s)
        .map(|_| {
            let q = ctx.alloc_qubit();
            ctx.apply_1q(&gates::hadamard(), q)?;
            Ok(Some(q))
        })
        .collect::<crate::Result<_>>()?;
    for port in 0..d_out {
        let mut batch = Vec::with_capacity(s);
        for slot in &live.shared {
            let q = slot.expect("instance qubits are fresh");
            let t = ctx.alloc_qubit();
            ctx.apply_2q(&gates::cnot(), q, t)?;
            batch.push(t);
        }
        ctx.send(port, Payload::from_qubits(batch))?;
    }
    let inbox = ctx.next_round().await?;
    let mut batches: Vec<Vec<QubitId>> = Vec::with_capacity(d_in);
    for (port, slot) in inbox.into_iter().enumerate() {
        let p = slot.ok_or(RunError::MissingMessage { port })?;
        if p.qubits.len() != s || p.bit_len != 0 {
            return Err(RunError::Decode("expected one qubit per instance".into()).into());
        }
        live.loose.extend_from_slice(&p.qubits);
        batches.push(p.qubits);
    }
    // Every frame is accounted for; from here on failures are hard, so the
    // loose list has served its purpose.
    live.loose.clear();

    // Measure each link's parity, then disentangle and retire the
    // transferred qubit: after the parity measurement its value is
    // determined relative to ours, so one controlled flip and one
    // correction return it to |0⟩ exactly.
    let mut parity = vec![vec![false; d_in]; s];
    for (port, batch) in batches.into_iter().enumerate() {
        for (j, t) in batch.into_iter().enumerate() {
            let q = live.shared[j].expect("instance qubits are live in stage 1");
            let probe = ctx.alloc_qubit();
            ctx.apply_2q(&gates::cnot(), q, probe)?;
            ctx.apply_2q(&gates::cnot(), t, probe)?;
            let y = ctx.measure(&[probe])? == 1;
            ctx.discard_classical(&[probe])?;
            ctx.apply_2q(&gates::cnot(), q, t)?;
            if y {
                ctx.apply_1q(&gates::pauli_x(), t)?;
            }
            ctx.assert_zero_and_free(&[t])?;
            parity[j][port] = y;
        }
    }

    // ---- Stage 2: one phase per instance, classical messages only. ----
    let mut eligible = true;
    let mut k = m;
    let zero_xor = vec![0u32; d_in];
    for (j, parity_row) in parity.iter().enumerate() {
        if k == 1 {
            // Elected early; consume the unused instances without any
            // further communication.
            for slot in live.shared[j..].iter_mut() {
                if let Some(q) = slot.take() {
                    ctx.measure(&[q])?;
                    ctx.discard_classical(&[q])?;
                }
            }
            break;
        }
        let k_before = k;

        // --- A: the agreement verdict, from link parities alone.
        let flips: Vec<u32> = parity_row.iter().map(|&y| if y { 2 } else { 0 }).collect();
        let fv = construct_fview(ctx, u32::from(eligible), 2, m - 1, &flips).await?;
        let labels = fv.labels_present();
        let consistent = !(labels.contains(&1) && labels.contains(&3));

        // --- B: sign repair and the phase-k measurement.
        let w = if eligible {
            0
        } else {
            let q = live.shared[j].take().expect("instance qubit is untouched");
            let w = ctx.measure_hadamard(&[q])?;
            ctx.discard_classical(&[q])?;
            w
        };
        let mut sign_flips = 0;
        if consistent {
            let fv_w = construct_fview(ctx, u32::from(w == 1), 1, 2 * m - 1, &zero_xor).await?;
            sign_flips = count_parties(&fv_w, m, |label| label == 1)?;
            if eligible && sign_flips % 2 == 1 {
                let q = live.shared[j].expect("instance qubit is untouched");
                ctx.apply_1q(&gates::w_k(k)?, q)?;
            }
        }
        let marker: u32 = if !eligible {
            0
        } else {
            let q = live.shared[j].take().expect("instance qubit is untouched");
            let z = if !consistent {
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
            z as u32 + 1
        };

        // --- C: count every outcome among the eligible parties and keep
        // the rarest one.
        let fv_z = construct_fview(ctx, marker, 3, 2 * m - 1, &zero_xor).await?;
        let mut counts = [0usize; 4];
        for (zv, slot) in counts.iter_mut().enumerate() {
            let c = count_parties(&fv_z, m, |label| label == zv as u32 + 1)?;
            // An outcome nobody measured cannot be the rarest; park it at
            // the ceiling so the argmin below ignores it.
            *slot = if c == 0 { m } else { c };
        }
        let mut z_minor = 0usize;
        for zv in 1..4 {
            if counts[zv] < counts[z_minor] {
                z_minor = zv;
            }
        }
        eligible = eligible && marker == z_minor as u32 + 1;
        k = counts[z_minor];

        ctx.trace(serde_json::json!({
            "protocol": "alg2",
            "assumed_n": m,
            "phase": j,
            "k_before": k_before,
            "consistent": consistent,
            "sign_flips": sign_flips,
            "marker": marker,
            "k_after": k,
            "eligible": eligible,
        }));
    }

    if k != 1 {
        return Err(Fail::Soft(Reason::PhaseBudget));
    }
    Ok(if eligible { Outcome::Leader } else { Outcome::Follower })
}
