//! Sparse multi-qubit simulator with factored entangled components.
//!
//! The state is maintained as a tensor product of *components*: groups of
//! qubits that have interacted. Each component stores a sparse map from
//! bit-configurations to complex amplitudes, so a register of thousands of
//! qubits costs only as much as its entanglement structure demands — n
//! parties sharing a cat state is one component with two branches, and
//! independent protocol instances never multiply each other's branch counts.
//! Joint operations across components merge them (tensor product); freed
//! qubits shrink their component in place.
//!
//! Conventions used throughout:
//! - Multi-qubit operands are packed most-significant-first: in
//!   `measure(&[a, b])`, qubit `a` contributes bit 1 and `b` bit 0.
//! - Two-qubit gates act on the ordered basis `|hi lo⟩`.
//! - Every `measure` call consumes exactly one uniform draw from the
//!   supplied generator, resolving it against outcomes in ascending numeric
//!   order; this keeps runs bit-reproducible for a given seed and schedule.
//! - After every operation the touched component's norm is checked against
//!   [`NORM_TOLERANCE`] and amplitudes below [`PRUNE_THRESHOLD`] are dropped.
//! - Ancillas must be returned through [`SparseState::assert_zero_and_free`],
//!   which fails loudly if uncomputation left amplitude on `|1⟩` — leaked
//!   garbage would silently decohere the registers it touched.

pub mod dense;
pub mod gates;

pub use gates::GateMatrix;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_complex::Complex64;
use rand::Rng;
use smallvec::{SmallVec, ToSmallVec};
use thiserror::Error;

type C64 = Complex64;

/// Amplitudes with absolute value below this are removed after each step.
pub const PRUNE_THRESHOLD: f64 = 1e-12;
/// Maximum tolerated drift of a component's norm from 1.
pub const NORM_TOLERANCE: f64 = 1e-9;

/// Errors from the sparse simulator.
#[derive(Debug, Error)]
pub enum QsimError {
    /// The qubit id was never allocated, or was freed (possibly reused).
    #[error("stale or freed qubit id")]
    StaleQubit,

    /// The same qubit appears twice in one operand list.
    #[error("duplicate qubit operand")]
    DuplicateOperand,

    /// `inputs` and `targets` of a classical update share a qubit.
    #[error("classical update input and target lists overlap")]
    OverlappingOperands,

    /// A gate of the wrong arity was supplied.
    #[error("gate dimension {dim} does not fit {operands} operand(s)")]
    ArityMismatch { dim: usize, operands: usize },

    /// A matrix failed the unitarity check.
    #[error("matrix is not unitary (deviation {dev:.3e})")]
    NotUnitary { dev: f64 },

    /// A gate-family constructor was called with unusable parameters.
    #[error("bad gate parameter: {0}")]
    GateParam(String),

    /// A classical update mapped two configurations to the same place; it
    /// must permute the target values for every fixed input value.
    #[error("classical update is not injective")]
    NotInjective,

    /// Attempt to free a qubit that still carries amplitude on `|1⟩`.
    #[error("qubit freed while carrying amplitude (|1⟩ weight {weight:.3e})")]
    GarbageLeak { weight: f64 },

    /// Attempt to discard a qubit that is still in superposition.
    #[error("qubit is not classical; measure it before discarding")]
    NotClassical,

    /// A component's norm drifted beyond [`NORM_TOLERANCE`].
    #[error("state norm drifted to {norm}")]
    NormDrift { norm: f64 },

    /// More qubits than a packed `u64` can carry in one call.
    #[error("operation spans {0} qubits; at most 64 are supported per call")]
    TooWide(usize),

    /// An amplitude query must assign every qubit of each component it
    /// touches.
    #[error("amplitude query covers a component only partially")]
    PartialCover,
}

/// Opaque handle to a live qubit. Ids are never silently reused: freeing
/// bumps a generation counter, so stale handles are detected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QubitId {
    index: u32,
    generation: u32,
}

/// Who currently holds a qubit; bookkeeping for the message-passing runtime,
/// opaque to the simulator itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Owner {
    Party(usize),
    InTransit,
    Retired,
}

/// One bit per qubit position, in 64-bit words (word 0 holds positions
/// 0..64, least significant bit first).
type Config = SmallVec<[u64; 2]>;

fn config_words(bits: usize) -> usize {
    bits.div_ceil(64)
}

fn get_bit(cfg: &Config, pos: usize) -> u64 {
    (cfg[pos / 64] >> (pos % 64)) & 1
}

fn set_bit(cfg: &mut Config, pos: usize, bit: u64) {
    let mask = 1u64 << (pos % 64);
    if bit == 1 {
        cfg[pos / 64] |= mask;
    } else {
        cfg[pos / 64] &= !mask;
    }
}

fn zero_config(bits: usize) -> Config {
    SmallVec::from_elem(0u64, config_words(bits))
}

#[derive(Debug, Clone)]
struct Component {
    /// Slot index of the qubit at each bit position.
    qubits: Vec<u32>,
    branches: HashMap<Config, C64>,
}

impl Component {
    fn norm_sqr(&self) -> f64 {
        self.branches.values().map(|a| a.norm_sqr()).sum()
    }
}

#[derive(Debug, Clone)]
enum SlotState {
    Free,
    Active { comp: u32, pos: u32, owner: Owner },
}

#[derive(Debug, Clone)]
struct Slot {
    generation: u32,
    state: SlotState,
}

/// The factored sparse state. See the module docs for conventions.
#[derive(Debug, Default)]
pub struct SparseState {
    slots: Vec<Slot>,
    free_slots: Vec<u32>,
    comps: Vec<Option<Component>>,
    free_comps: Vec<u32>,
}

impl SparseState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Allocates a fresh qubit in `|0⟩` as its own component.
    pub fn alloc(&mut self, owner: Owner) -> QubitId {
        let comp_id = match self.free_comps.pop() {
            Some(c) => c,
            None => {
                self.comps.push(None);
                (self.comps.len() - 1) as u32
            }
        };
        let slot_index = match self.free_slots.pop() {
            Some(s) => s,
            None => {
                self.slots.push(Slot { generation: 0, state: SlotState::Free });
                (self.slots.len() - 1) as u32
            }
        };
        self.slots[slot_index as usize].state =
            SlotState::Active { comp: comp_id, pos: 0, owner };
        let mut branches = HashMap::with_capacity(1);
        branches.insert(zero_config(1), C64::ONE);
        self.comps[comp_id as usize] = Some(Component { qubits: vec![slot_index], branches });
        QubitId { index: slot_index, generation: self.slots[slot_index as usize].generation }
    }

    fn slot(&self, q: QubitId) -> Result<&Slot, QsimError> {
        let slot = self.slots.get(q.index as usize).ok_or(QsimError::StaleQubit)?;
        if slot.generation != q.generation || matches!(slot.state, SlotState::Free) {
            return Err(QsimError::StaleQubit);
        }
        Ok(slot)
    }

    fn locate(&self, q: QubitId) -> Result<(u32, u32), QsimError> {
        match self.slot(q)?.state {
            SlotState::Active { comp, pos, .. } => Ok((comp, pos)),
            SlotState::Free => Err(QsimError::StaleQubit),
        }
    }

    pub fn exists(&self, q: QubitId) -> bool {
        self.slot(q).is_ok()
    }

    pub fn owner(&self, q: QubitId) -> Result<Owner, QsimError> {
        match self.slot(q)?.state {
            SlotState::Active { owner, .. } => Ok(owner),
            SlotState::Free => Err(QsimError::StaleQubit),
        }
    }

    pub fn set_owner(&mut self, q: QubitId, new_owner: Owner) -> Result<(), QsimError> {
        self.slot(q)?;
        if let SlotState::Active { owner, .. } = &mut self.slots[q.index as usize].state {
            *owner = new_owner;
        }
        Ok(())
    }

    /// Number of live qubits.
    pub fn num_active(&self) -> usize {
        self.slots.iter().filter(|s| matches!(s.state, SlotState::Active { .. })).count()
    }

    /// All live qubits with their owners, in slot order.
    pub fn active_qubits(&self) -> Vec<(QubitId, Owner)> {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(i, s)| match s.state {
                SlotState::Active { owner, .. } => {
                    Some((QubitId { index: i as u32, generation: s.generation }, owner))
                }
                SlotState::Free => None,
            })
            .collect()
    }

    /// `(components, total branches, widest component in qubits)` — a size
    /// diagnostic for tests and reports.
    pub fn shape(&self) -> (usize, usize, usize) {
        let mut comps = 0;
        let mut branches = 0;
        let mut widest = 0;
        for c in self.comps.iter().flatten() {
            comps += 1;
            branches += c.branches.len();
            widest = widest.max(c.qubits.len());
        }
        (comps, branches, widest)
    }

    fn comp(&self, id: u32) -> &Component {
        self.comps[id as usize].as_ref().expect("live component")
    }

    fn comp_mut(&mut self, id: u32) -> &mut Component {
        self.comps[id as usize].as_mut().expect("live component")
    }

    /// Ensures all listed qubits share one component, returning its id.
    fn entangle(&mut self, qubits: &[QubitId]) -> Result<u32, QsimError> {
        let mut ids = Vec::with_capacity(qubits.len());
        for &q in qubits {
            let (c, _) = self.locate(q)?;
            if !ids.contains(&c) {
                ids.push(c);
            }
        }
        let target = ids[0];
        for &other in &ids[1..] {
            self.merge_pair(target, other);
        }
        Ok(target)
    }

    /// Tensor-merges component `b` into `a`.
    fn merge_pair(&mut self, a: u32, b: u32) {
        let comp_b = self.comps[b as usize].take().expect("live component");
        self.free_comps.push(b);
        let comp_a = self.comp_mut(a);
        let a_bits = comp_a.qubits.len();
        let b_bits = comp_b.qubits.len();
        let new_bits = a_bits + b_bits;
        let mut merged: HashMap<Config, C64> =
            HashMap::with_capacity(comp_a.branches.len() * comp_b.branches.len());
        for (ca, &va) in &comp_a.branches {
            for (cb, &vb) in &comp_b.branches {
                let mut cfg = zero_config(new_bits);
                cfg[..ca.len()].copy_from_slice(ca);
                for pos in 0..b_bits {
                    if get_bit(cb, pos) == 1 {
                        set_bit(&mut cfg, a_bits + pos, 1);
                    }
                }
                merged.insert(cfg, va * vb);
            }
        }
        comp_a.branches = merged;
        comp_a.qubits.extend_from_slice(&comp_b.qubits);
        for (offset, &slot_index) in comp_b.qubits.iter().enumerate() {
            if let SlotState::Active { comp, pos, .. } =
                &mut self.slots[slot_index as usize].state
            {
                *comp = a;
                *pos = (a_bits + offset) as u32;
            }
        }
    }

    fn prune_and_check(&mut self, comp_id: u32) -> Result<(), QsimError> {
        let comp = self.comp_mut(comp_id);
        comp.branches.retain(|_, a| a.norm() > PRUNE_THRESHOLD);
        let norm = comp.norm_sqr().sqrt();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(QsimError::NormDrift { norm });
        }
        Ok(())
    }

    fn check_distinct(qubits: &[QubitId]) -> Result<(), QsimError> {
        let mut seen = BTreeSet::new();
        for q in qubits {
            if !seen.insert(q.index) {
                return Err(QsimError::DuplicateOperand);
            }
        }
        Ok(())
    }

    /// Applies a one-qubit gate.
    pub fn apply_1q(&mut self, gate: &GateMatrix, q: QubitId) -> Result<(), QsimError> {
        if gate.dim() != 2 {
            return Err(QsimError::ArityMismatch { dim: gate.dim(), operands: 1 });
        }
        let (comp_id, pos) = self.locate(q)?;
        let comp = self.comp_mut(comp_id);
        let mut next: HashMap<Config, C64> = HashMap::with_capacity(comp.branches.len() * 2);
        for (cfg, &amp) in &comp.branches {
            let b = get_bit(cfg, pos as usize) as usize;
            for out in 0..2usize {
                let coeff = gate.entry(out, b);
                if coeff.norm() <= PRUNE_THRESHOLD {
                    continue;
                }
                let mut ncfg = cfg.clone();
                set_bit(&mut ncfg, pos as usize, out as u64);
                *next.entry(ncfg).or_insert(C64::ZERO) += amp * coeff;
            }
        }
        comp.branches = next;
        self.prune_and_check(comp_id)
    }

    /// Applies a two-qubit gate on the `|hi lo⟩` basis.
    pub fn apply_2q(&mut self, gate: &GateMatrix, hi: QubitId, lo: QubitId) -> Result<(), QsimError> {
        if gate.dim() != 4 {
            return Err(QsimError::ArityMismatch { dim: gate.dim(), operands: 2 });
        }
        Self::check_distinct(&[hi, lo])?;
        let comp_id = self.entangle(&[hi, lo])?;
        let (_, p_hi) = self.locate(hi)?;
        let (_, p_lo) = self.locate(lo)?;
        let comp = self.comp_mut(comp_id);
        let mut next: HashMap<Config, C64> = HashMap::with_capacity(comp.branches.len() * 2);
        for (cfg, &amp) in &comp.branches {
            let b = (get_bit(cfg, p_hi as usize) << 1 | get_bit(cfg, p_lo as usize)) as usize;
            for out in 0..4usize {
                let coeff = gate.entry(out, b);
                if coeff.norm() <= PRUNE_THRESHOLD {
                    continue;
                }
                let mut ncfg = cfg.clone();
                set_bit(&mut ncfg, p_hi as usize, (out >> 1) as u64);
                set_bit(&mut ncfg, p_lo as usize, (out & 1) as u64);
                *next.entry(ncfg).or_insert(C64::ZERO) += amp * coeff;
            }
        }
        comp.branches = next;
        self.prune_and_check(comp_id)
    }

    /// Reversible classical update: reads `inputs ++ targets` (packed
    /// most-significant-first, inputs above targets) and replaces the target
    /// bits with the low bits of `f`'s result. For every fixed input value,
    /// `f` must permute the target values; a collision is reported as
    /// [`QsimError::NotInjective`].
    pub fn apply_classical(
        &mut self,
        inputs: &[QubitId],
        targets: &[QubitId],
        f: &dyn Fn(u64) -> u64,
    ) -> Result<(), QsimError> {
        if targets.is_empty() {
            return Ok(());
        }
        let total = inputs.len() + targets.len();
        if total > 64 {
            return Err(QsimError::TooWide(total));
        }
        Self::check_distinct(inputs)?;
        Self::check_distinct(targets)?;
        for i in inputs {
            if targets.iter().any(|t| t.index == i.index) {
                return Err(QsimError::OverlappingOperands);
            }
        }
        let all: Vec<QubitId> = inputs.iter().chain(targets).copied().collect();
        let comp_id = self.entangle(&all)?;
        let mut in_pos = Vec::with_capacity(inputs.len());
        for &q in inputs {
            in_pos.push(self.locate(q)?.1 as usize);
        }
        let mut tgt_pos = Vec::with_capacity(targets.len());
        for &q in targets {
            tgt_pos.push(self.locate(q)?.1 as usize);
        }
        let t_len = tgt_pos.len();
        let t_mask = if t_len == 64 { u64::MAX } else { (1u64 << t_len) - 1 };
        let comp = self.comp_mut(comp_id);
        let mut next: HashMap<Config, C64> = HashMap::with_capacity(comp.branches.len());
        for (cfg, &amp) in &comp.branches {
            let mut arg: u64 = 0;
            for &p in in_pos.iter().chain(&tgt_pos) {
                arg = (arg << 1) | get_bit(cfg, p);
            }
            let out = f(arg) & t_mask;
            let mut ncfg = cfg.clone();
            for (j, &p) in tgt_pos.iter().enumerate() {
                set_bit(&mut ncfg, p, (out >> (t_len - 1 - j)) & 1);
            }
            if next.insert(ncfg, amp).is_some() {
                return Err(QsimError::NotInjective);
            }
        }
        comp.branches = next;
        self.prune_and_check(comp_id)
    }

    /// Measures the listed qubits jointly in the computational basis,
    /// packed most-significant-first. Consumes exactly one uniform draw,
    /// collapses, and renormalizes.
    pub fn measure(&mut self, qubits: &[QubitId], rng: &mut impl Rng) -> Result<u64, QsimError> {
        if qubits.is_empty() || qubits.len() > 64 {
            return Err(QsimError::TooWide(qubits.len()));
        }
        Self::check_distinct(qubits)?;
        let comp_id = self.entangle(qubits)?;
        let mut positions = Vec::with_capacity(qubits.len());
        for &q in qubits {
            positions.push(self.locate(q)?.1 as usize);
        }
        let comp = self.comp_mut(comp_id);
        let mut marginal: BTreeMap<u64, f64> = BTreeMap::new();
        for (cfg, amp) in &comp.branches {
            let mut key: u64 = 0;
            for &p in &positions {
                key = (key << 1) | get_bit(cfg, p);
            }
            *marginal.entry(key).or_insert(0.0) += amp.norm_sqr();
        }
        let draw: f64 = rng.random();
        let mut acc = 0.0;
        let mut outcome = *marginal.keys().next_back().expect("nonempty state");
        for (&key, &p) in &marginal {
            acc += p;
            if draw < acc {
                outcome = key;
                break;
            }
        }
        let weight = marginal[&outcome];
        let scale = C64::new(1.0 / weight.sqrt(), 0.0);
        comp.branches.retain(|cfg, amp| {
            let mut key: u64 = 0;
            for &p in &positions {
                key = (key << 1) | get_bit(cfg, p);
            }
            if key == outcome {
                *amp *= scale;
                true
            } else {
                false
            }
        });
        self.prune_and_check(comp_id)?;
        Ok(outcome)
    }

    /// Hadamard-basis measurement: rotates each listed qubit by H, then
    /// measures computationally (0 ↔ |+⟩, 1 ↔ |−⟩).
    pub fn measure_hadamard(
        &mut self,
        qubits: &[QubitId],
        rng: &mut impl Rng,
    ) -> Result<u64, QsimError> {
        let h = gates::hadamard();
        for &q in qubits {
            self.apply_1q(&h, q)?;
        }
        self.measure(qubits, rng)
    }

    /// Frees ancillas that must have been uncomputed to `|0⟩`.
    ///
    /// # Errors
    /// [`QsimError::GarbageLeak`] if any surviving branch has a listed qubit
    /// at `|1⟩` — the total offending weight is reported and nothing is
    /// freed.
    pub fn assert_zero_and_free(&mut self, qubits: &[QubitId]) -> Result<(), QsimError> {
        Self::check_distinct(qubits)?;
        let mut by_comp: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for &q in qubits {
            let (c, p) = self.locate(q)?;
            by_comp.entry(c).or_default().push(p as usize);
        }
        // Validate everything before mutating anything.
        let mut leak = 0.0f64;
        for (&comp_id, positions) in &by_comp {
            let comp = self.comp(comp_id);
            for (cfg, amp) in &comp.branches {
                if positions.iter().any(|&p| get_bit(cfg, p) == 1) {
                    leak += amp.norm_sqr();
                }
            }
        }
        if leak > 0.0 {
            return Err(QsimError::GarbageLeak { weight: leak });
        }
        for (comp_id, mut positions) in by_comp {
            positions.sort_unstable();
            self.remove_positions(comp_id, &positions);
        }
        Ok(())
    }

    /// Discards qubits whose value is already classical (identical in every
    /// branch), e.g. after measurement. Returns the discarded values packed
    /// most-significant-first.
    ///
    /// # Errors
    /// [`QsimError::NotClassical`] if any listed qubit still differs across
    /// branches; nothing is freed in that case.
    pub fn discard_classical(&mut self, qubits: &[QubitId]) -> Result<u64, QsimError> {
        if qubits.is_empty() {
            return Ok(0);
        }
        if qubits.len() > 64 {
            return Err(QsimError::TooWide(qubits.len()));
        }
        Self::check_distinct(qubits)?;
        let mut packed: u64 = 0;
        for &q in qubits {
            let (comp_id, pos) = self.locate(q)?;
            let comp = self.comp(comp_id);
            let mut values = comp.branches.keys().map(|cfg| get_bit(cfg, pos as usize));
            let first = values.next().expect("nonempty state");
            if values.any(|v| v != first) {
                return Err(QsimError::NotClassical);
            }
            packed = (packed << 1) | first;
        }
        let mut by_comp: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for &q in qubits {
            let (c, p) = self.locate(q)?;
            by_comp.entry(c).or_default().push(p as usize);
        }
        for (comp_id, mut positions) in by_comp {
            positions.sort_unstable();
            self.remove_positions(comp_id, &positions);
        }
        Ok(packed)
    }

    /// Removes the (sorted) bit positions from a component, freeing their
    /// slots. Every branch must hold the same value at each removed position
    /// (callers guarantee this), so configurations stay distinct.
    fn remove_positions(&mut self, comp_id: u32, positions: &[usize]) {
        let comp = self.comp_mut(comp_id);
        let old_len = comp.qubits.len();
        let new_len = old_len - positions.len();
        let mut removed = vec![false; old_len];
        for &p in positions {
            removed[p] = true;
        }
        // Map old kept positions to new positions.
        let mut new_pos_of = vec![usize::MAX; old_len];
        let mut next = 0usize;
        for (p, &gone) in removed.iter().enumerate() {
            if !gone {
                new_pos_of[p] = next;
                next += 1;
            }
        }
        let suffix_removal = positions.first().is_some_and(|&p| p == new_len);
        let old_branches = std::mem::take(&mut comp.branches);
        let mut next_branches: HashMap<Config, C64> = HashMap::with_capacity(old_branches.len());
        for (cfg, amp) in old_branches {
            let ncfg = if suffix_removal {
                // Dropping a suffix: truncate words and clear stray high bits.
                let mut ncfg: Config = cfg[..config_words(new_len)].to_smallvec();
                if !new_len.is_multiple_of(64) {
                    if let Some(last) = ncfg.last_mut() {
                        *last &= (1u64 << (new_len % 64)) - 1;
                    }
                }
                ncfg
            } else {
                let mut ncfg = zero_config(new_len);
                for (p, &new_p) in new_pos_of.iter().enumerate().take(old_len) {
                    if new_p != usize::MAX && get_bit(&cfg, p) == 1 {
                        set_bit(&mut ncfg, new_p, 1);
                    }
                }
                ncfg
            };
            next_branches.insert(ncfg, amp);
        }
        comp.branches = next_branches;
        let old_qubits = std::mem::take(&mut comp.qubits);
        let mut kept = Vec::with_capacity(new_len);
        for (p, &slot_index) in old_qubits.iter().enumerate() {
            if removed[p] {
                let slot = &mut self.slots[slot_index as usize];
                slot.generation = slot.generation.wrapping_add(1);
                slot.state = SlotState::Free;
                self.free_slots.push(slot_index);
            } else {
                kept.push(slot_index);
            }
        }
        for (new_p, &slot_index) in kept.iter().enumerate() {
            if let SlotState::Active { pos, .. } = &mut self.slots[slot_index as usize].state {
                *pos = new_p as u32;
            }
        }
        self.comp_mut(comp_id).qubits = kept;
        if self.comp(comp_id).qubits.is_empty() {
            self.comps[comp_id as usize] = None;
            self.free_comps.push(comp_id);
        }
    }

    /// Amplitude of a basis assignment. Each entangled component touched by
    /// the assignment must be covered completely; the result is the product
    /// of the per-component amplitudes (qubits in untouched components are
    /// traced out, i.e. ignored).
    pub fn amplitude(&self, assignment: &[(QubitId, bool)]) -> Result<C64, QsimError> {
        Self::check_distinct(&assignment.iter().map(|&(q, _)| q).collect::<Vec<_>>())?;
        let mut by_comp: BTreeMap<u32, Vec<(usize, bool)>> = BTreeMap::new();
        for &(q, bit) in assignment {
            let (c, p) = self.locate(q)?;
            by_comp.entry(c).or_default().push((p as usize, bit));
        }
        let mut result = C64::ONE;
        for (comp_id, pairs) in by_comp {
            let comp = self.comp(comp_id);
            if pairs.len() != comp.qubits.len() {
                return Err(QsimError::PartialCover);
            }
            let mut cfg = zero_config(comp.qubits.len());
            for (p, bit) in pairs {
                set_bit(&mut cfg, p, u64::from(bit));
            }
            result *= comp.branches.get(&cfg).copied().unwrap_or(C64::ZERO);
        }
        Ok(result)
    }
}
