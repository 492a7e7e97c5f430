//! Trace transformers: proof rules mapping a trace to child traces whose
//! system computations jointly cover the parent's. Insertion rules
//! instantiate their fresh event with the unique establishing global
//! transition when one exists; an empty instantiation set marks the child
//! contradictory.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic::{self, Atom, Formula};
use crate::model::{GlobalTransition, TransitionSystem, VarIdx};
use crate::trace::{CausalLink, ConcurrentTrace, Conflict, Event, InfiniteTrace, NodeTrace};

/// Rule names of the implemented transformer set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RuleName {
    OrderSplit,
    NecessaryEvent,
    LastNecessaryEvent,
    InvarianceSplit,
    InstantiateCycle,
    NecessaryCycleEvent,
    ContradictionClose,
    TerminatingClose,
}

/// One production: the rule application that created a tableau node from
/// its parent. Parameters are sufficient to reconstruct the child trace
/// deterministically from the parent trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Production {
    OrderSplit {
        first: String,
        second: String,
        /// true: link first -> second; false: the reverse child.
        forward: bool,
    },
    NecessaryEvent {
        src: String,
        tgt: String,
        /// The interpolant-derived state predicate (single atom).
        phi: Atom,
        fresh: String,
        /// Name of the unique establishing transition, when exactly one.
        transition: Option<String>,
    },
    LastNecessaryEvent {
        anchor: String,
        target: String,
        /// The unmet precondition literal.
        phi: Atom,
        fresh: String,
        transition: Option<String>,
    },
    InvarianceSplit {
        phi: Formula,
        /// false: invariant child; true: violating child with fresh event.
        violation: bool,
        fresh: Option<String>,
    },
    InstantiateCycle {
        event: String,
        transition: String,
    },
    NecessaryCycleEvent {
        event: String,
        phi: Atom,
        transition: String,
        fresh: String,
    },
}

impl Production {
    pub fn rule(&self) -> RuleName {
        match self {
            Production::OrderSplit { .. } => RuleName::OrderSplit,
            Production::NecessaryEvent { .. } => RuleName::NecessaryEvent,
            Production::LastNecessaryEvent { .. } => RuleName::LastNecessaryEvent,
            Production::InvarianceSplit { .. } => RuleName::InvarianceSplit,
            Production::InstantiateCycle { .. } => RuleName::InstantiateCycle,
            Production::NecessaryCycleEvent { .. } => RuleName::NecessaryCycleEvent,
        }
    }
}

/// An integer variable bounded below at one cycle event and strictly
/// decreased at another; with increase excluded event-wise this certifies
/// the cycle cannot recur forever.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingWitness {
    pub var: VarIdx,
    pub bound_event: String,
    pub decrease_event: String,
    pub bound: i64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RuleError {
    #[error("rule inapplicable: {0}")]
    Inapplicable(String),
}

fn inapplicable<T>(msg: impl Into<String>) -> Result<T, RuleError> {
    Err(RuleError::Inapplicable(msg.into()))
}

/// Can two labels be satisfied by the same system step? Strictness of an
/// ordered pair follows from an explicit conflict, a plain label clash, or
/// the absence of any global transition compatible with both.
pub fn same_step_impossible(
    sys: &TransitionSystem,
    globals: &[GlobalTransition],
    a: &Formula,
    b: &Formula,
) -> bool {
    if !logic::and_satisfiable(sys, a, b) {
        return true;
    }
    let joint = a.and(b);
    globals
        .iter()
        .all(|g| !logic::and_satisfiable(sys, &joint, &g.relation))
}

/// An event is concrete when its label pins down a specific program
/// transition.
pub fn is_concrete(sys: &TransitionSystem, globals: &[GlobalTransition], e: &Event) -> bool {
    globals.iter().any(|g| logic::implies(sys, &e.label, &g.relation))
}

/// Global transitions whose relation is co-satisfiable with a label: the
/// instantiation candidates of an inserted event.
pub fn instantiation_candidates<'a>(
    sys: &TransitionSystem,
    globals: &'a [GlobalTransition],
    label: &Formula,
) -> Vec<(usize, &'a GlobalTransition)> {
    globals
        .iter()
        .enumerate()
        .filter(|(_, g)| logic::and_satisfiable(sys, label, &g.relation))
        .collect()
}

/// Transitions establishing a location literal `phi`: those compatible
/// with `!phi /\ phi'`.
pub fn establishing_transitions<'a>(
    sys: &TransitionSystem,
    globals: &'a [GlobalTransition],
    phi: &Atom,
) -> Vec<(usize, &'a GlobalTransition)> {
    let label = establishment_label(phi);
    globals
        .iter()
        .enumerate()
        .filter(|(_, g)| logic::and_satisfiable(sys, &label, &g.relation))
        .collect()
}

/// `!phi /\ phi'` for a current-state location literal.
pub fn establishment_label(phi: &Atom) -> Formula {
    let neg = logic::complement_single(phi).expect("negatable state literal");
    let phi_f = Formula::from_atoms([phi.clone()]);
    Formula::from_atoms([neg]).and(&phi_f.prime())
}

/// Alternative orderings of two unordered events.
pub fn order_split(
    t: &ConcurrentTrace,
    a: &str,
    b: &str,
) -> Result<[ConcurrentTrace; 2], RuleError> {
    if t.event(a).is_none() || t.event(b).is_none() {
        return inapplicable("order_split: missing event");
    }
    if t.has_path(a, b) || t.has_path(b, a) {
        return inapplicable("order_split: events already ordered");
    }
    let mut fwd = t.clone();
    fwd.links.push(CausalLink {
        src: a.into(),
        tgt: b.into(),
        label: Formula::tt(),
    });
    let mut rev = t.clone();
    rev.links.push(CausalLink {
        src: b.into(),
        tgt: a.into(),
        label: Formula::tt(),
    });
    Ok([fwd, rev])
}

fn finish_insertion(
    sys: &TransitionSystem,
    globals: &[GlobalTransition],
    mut child: ConcurrentTrace,
    fresh: &str,
) -> (ConcurrentTrace, Option<usize>) {
    let label = child.event(fresh).unwrap().label.clone();
    let cands = instantiation_candidates(sys, globals, &label);
    match cands.len() {
        0 => {
            child.contradictory = true;
            (child, None)
        }
        1 => {
            let (gi, g) = cands[0];
            child.event_mut(fresh).unwrap().label = label.and(&g.relation);
            (child, Some(gi))
        }
        _ => (child, None),
    }
}

/// Inserts a bridging event between causally related, conflicting events:
/// `a` ends in region `phi`, `b` starts outside it, so the last step out of
/// `phi` must happen in between. The fresh event is labeled `phi /\ !phi'`
/// and the link to `b` preserves `!phi`.
pub fn necessary_event(
    sys: &TransitionSystem,
    globals: &[GlobalTransition],
    t: &ConcurrentTrace,
    a: &str,
    b: &str,
    phi: &Atom,
    fresh: &str,
) -> Result<(ConcurrentTrace, Option<usize>), RuleError> {
    let (Some(ea), Some(eb)) = (t.event(a), t.event(b)) else {
        return inapplicable("necessary_event: missing event");
    };
    if !t.has_path(a, b) {
        return inapplicable("necessary_event: no link path");
    }
    let strict = t.has_conflict(a, b) || same_step_impossible(sys, globals, &ea.label, &eb.label);
    if !strict {
        return inapplicable("necessary_event: events not conflicting");
    }
    let Some(neg) = logic::complement_single(phi) else {
        return inapplicable("necessary_event: predicate not negatable");
    };
    let phi_f = Formula::from_atoms([phi.clone()]);
    let neg_f = Formula::from_atoms([neg]);
    if !logic::implies(sys, &ea.label, &phi_f.prime()) {
        return inapplicable("necessary_event: label of a does not imply phi'");
    }
    if !logic::implies(sys, &eb.label, &neg_f) {
        return inapplicable("necessary_event: label of b does not imply !phi");
    }
    let mut child = t.clone();
    child.events.push(Event {
        id: fresh.into(),
        label: phi_f.and(&neg_f.prime()),
    });
    child.links.push(CausalLink {
        src: a.into(),
        tgt: fresh.into(),
        label: Formula::tt(),
    });
    child.links.push(CausalLink {
        src: fresh.into(),
        tgt: b.into(),
        label: neg_f.and(&neg_f.prime()),
    });
    child.conflicts.push(Conflict::new(a, fresh));
    child.conflicts.push(Conflict::new(fresh, b));
    child.conflicts.sort();
    child.conflicts.dedup();
    Ok(finish_insertion(sys, globals, child, fresh))
}

/// Inserts the last event establishing an unmet precondition `phi` of
/// `target`, anchored at the initial event: the anchor's post-state refutes
/// `phi`, the target requires it, so a last `!phi -> phi` step exists in
/// between, after which `phi` is preserved.
pub fn last_necessary_event(
    sys: &TransitionSystem,
    globals: &[GlobalTransition],
    t: &ConcurrentTrace,
    anchor: &str,
    target: &str,
    phi: &Atom,
    fresh: &str,
) -> Result<(ConcurrentTrace, Option<usize>), RuleError> {
    let (Some(ea), Some(eb)) = (t.event(anchor), t.event(target)) else {
        return inapplicable("last_necessary_event: missing event");
    };
    if !t.has_path(anchor, target) {
        return inapplicable("last_necessary_event: anchor not before target");
    }
    let Some(neg) = logic::complement_single(phi) else {
        return inapplicable("last_necessary_event: predicate not negatable");
    };
    let phi_f = Formula::from_atoms([phi.clone()]);
    let neg_f = Formula::from_atoms([neg]);
    if !logic::implies(sys, &eb.label, &phi_f) {
        return inapplicable("last_necessary_event: target does not require phi");
    }
    let context = ea.label.post_part();
    if logic::and_satisfiable(sys, &context, &phi_f) {
        return inapplicable("last_necessary_event: context does not contradict phi");
    }
    if !same_step_impossible(sys, globals, &ea.label, &eb.label) {
        return inapplicable("last_necessary_event: anchor and target may coincide");
    }
    let mut child = t.clone();
    child.events.push(Event {
        id: fresh.into(),
        label: neg_f.and(&phi_f.prime()),
    });
    child.links.push(CausalLink {
        src: anchor.into(),
        tgt: fresh.into(),
        label: Formula::tt(),
    });
    child.links.push(CausalLink {
        src: fresh.into(),
        tgt: target.into(),
        label: phi_f.and(&phi_f.prime()),
    });
    child.conflicts.push(Conflict::new(anchor, fresh));
    child.conflicts.push(Conflict::new(fresh, target));
    child.conflicts.sort();
    child.conflicts.dedup();
    Ok(finish_insertion(sys, globals, child, fresh))
}

/// Case distinction about behavior at infinity: either every step of the
/// cycle part satisfies `phi`, or a violating event recurs forever.
pub fn invariance_split(
    t: &InfiniteTrace,
    phi: &Formula,
    fresh: &str,
) -> Result<[InfiniteTrace; 2], RuleError> {
    let violation_label = if phi.is_true() {
        Formula::ff()
    } else if phi.atoms().len() == 1 {
        match logic::complement_single(&phi.atoms()[0]) {
            Some(neg) => Formula::from_atoms([neg]),
            None => return inapplicable("invariance_split: predicate not negatable"),
        }
    } else {
        return inapplicable("invariance_split: predicate not a single atom");
    };
    let mut invariant = t.clone();
    for e in &mut invariant.cycle.events {
        e.label = e.label.and(phi);
    }
    for l in &mut invariant.cycle.links {
        l.label = l.label.and(phi);
    }
    invariant.cycle_invariant = invariant.cycle_invariant.and(phi);
    let mut violating = t.clone();
    violating.cycle.events.push(Event {
        id: fresh.into(),
        label: violation_label,
    });
    Ok([invariant, violating])
}

/// Replaces an abstract cycle event by each compatible program transition;
/// an empty result means the parent is contradictory.
pub fn instantiate_cycle(
    sys: &TransitionSystem,
    globals: &[GlobalTransition],
    t: &InfiniteTrace,
    event: &str,
) -> Result<Vec<(usize, InfiniteTrace)>, RuleError> {
    let Some(e) = t.cycle.event(event) else {
        return inapplicable("instantiate_cycle: event not in cycle");
    };
    let label = e.label.clone();
    let mut out = Vec::new();
    for (gi, g) in instantiation_candidates(sys, globals, &label) {
        let mut child = t.clone();
        child.cycle.event_mut(event).unwrap().label = label.and(&g.relation);
        out.push((gi, child));
    }
    Ok(out)
}

/// A concrete cycle event consuming `phi` (required before, destroyed
/// after) forces `phi` to be re-established infinitely often: one child per
/// establishing transition, its event linked before the consumer.
pub fn necessary_cycle_event(
    sys: &TransitionSystem,
    globals: &[GlobalTransition],
    t: &InfiniteTrace,
    event: &str,
    phi: &Atom,
    fresh: &str,
) -> Result<Vec<(usize, InfiniteTrace)>, RuleError> {
    let Some(e) = t.cycle.event(event) else {
        return inapplicable("necessary_cycle_event: event not in cycle");
    };
    let Some(neg) = logic::complement_single(phi) else {
        return inapplicable("necessary_cycle_event: predicate not negatable");
    };
    let phi_f = Formula::from_atoms([phi.clone()]);
    let neg_post = Formula::from_atoms([neg]).prime();
    if !logic::implies(sys, &e.label, &phi_f) || !logic::implies(sys, &e.label, &neg_post) {
        return inapplicable("necessary_cycle_event: event does not consume phi");
    }
    let est = establishment_label(phi);
    let mut out = Vec::new();
    for (gi, g) in globals.iter().enumerate() {
        if !logic::and_satisfiable(sys, &est, &g.relation) {
            continue;
        }
        let mut child = t.clone();
        child.cycle.events.push(Event {
            id: fresh.into(),
            label: est.and(&g.relation),
        });
        child.cycle.links.push(CausalLink {
            src: fresh.into(),
            tgt: event.into(),
            label: Formula::tt(),
        });
        out.push((gi, child));
    }
    Ok(out)
}

/// Searches integer variables in declaration order for a ranking witness:
/// some cycle event bounds the variable from below, another strictly
/// decreases it, and no cycle event can increase it.
pub fn find_ranking(sys: &TransitionSystem, t: &InfiniteTrace) -> Option<RankingWitness> {
    for var in 0..sys.variables.len() {
        if !sys.is_int(var) {
            continue;
        }
        let mut bound: Option<(String, i64)> = None;
        for e in &t.cycle.events {
            if let Some(lo) = logic::implied_lower_bound(sys, &e.label, var) {
                bound = Some((e.id.clone(), lo - 1));
                break;
            }
        }
        let Some((bound_event, b)) = bound else {
            continue;
        };
        let decrease = t
            .cycle
            .events
            .iter()
            .find(|e| logic::implies(sys, &e.label, &decrease_formula(var)));
        let Some(dec) = decrease else { continue };
        let excluded = t
            .cycle
            .events
            .iter()
            .all(|e| !logic::and_satisfiable(sys, &e.label, &increase_formula(var)));
        if !excluded {
            continue;
        }
        return Some(RankingWitness {
            var,
            bound_event,
            decrease_event: dec.id.clone(),
            bound: b,
        });
    }
    None
}

/// `v' - v <= -1`
pub fn decrease_formula(var: VarIdx) -> Formula {
    use crate::logic::{Cmp, NormAtom, Slot};
    match Atom::lin(
        vec![(1, Slot::post(var)), (-1, Slot::cur(var))],
        Cmp::Le,
        -1,
    ) {
        NormAtom::Atom(a) => Formula::from_atoms([a]),
        _ => unreachable!(),
    }
}

/// `v' - v >= 1`
pub fn increase_formula(var: VarIdx) -> Formula {
    use crate::logic::{Cmp, NormAtom, Slot};
    match Atom::lin(vec![(1, Slot::post(var)), (-1, Slot::cur(var))], Cmp::Ge, 1) {
        NormAtom::Atom(a) => Formula::from_atoms([a]),
        _ => unreachable!(),
    }
}

/// `v' - v <= 0`, the invariant side of the termination split.
pub fn nonincrease_formula(var: VarIdx) -> Formula {
    use crate::logic::{Cmp, NormAtom, Slot};
    match Atom::lin(vec![(1, Slot::post(var)), (-1, Slot::cur(var))], Cmp::Le, 0) {
        NormAtom::Atom(a) => Formula::from_atoms([a]),
        _ => unreachable!(),
    }
}

/// Validates a ranking witness against a trace via the entailment checks of
/// its definition.
pub fn witness_valid(sys: &TransitionSystem, t: &InfiniteTrace, w: &RankingWitness) -> bool {
    let Some(be) = t.cycle.event(&w.bound_event) else {
        return false;
    };
    let Some(de) = t.cycle.event(&w.decrease_event) else {
        return false;
    };
    let lower = logic::implied_lower_bound(sys, &be.label, w.var);
    if lower.map_or(true, |lo| lo - 1 < w.bound) {
        return false;
    }
    if !logic::implies(sys, &de.label, &decrease_formula(w.var)) {
        return false;
    }
    t.cycle
        .events
        .iter()
        .all(|e| !logic::and_satisfiable(sys, &e.label, &increase_formula(w.var)))
}

fn finite_contradiction(sys: &TransitionSystem, t: &ConcurrentTrace) -> bool {
    if t.contradictory {
        return true;
    }
    if t.events.iter().any(|e| !logic::is_satisfiable(sys, &e.label)) {
        return true;
    }
    if t.links.iter().any(|l| l.label.is_false()) {
        return true;
    }
    // Same-position-forced pairs: linked both ways.
    for (i, a) in t.events.iter().enumerate() {
        for b in t.events.iter().skip(i + 1) {
            if t.has_path(&a.id, &b.id) && t.has_path(&b.id, &a.id) {
                if t.has_conflict(&a.id, &b.id)
                    || !logic::and_satisfiable(sys, &a.label, &b.label)
                {
                    return true;
                }
            }
        }
    }
    false
}

/// Contradiction check: unsatisfiable labels, same-position-forced clashes,
/// or an empty required instantiation set (recorded by the producing rule).
pub fn contradiction(sys: &TransitionSystem, t: &NodeTrace) -> bool {
    match t {
        NodeTrace::Finite(t) => finite_contradiction(sys, t),
        NodeTrace::Infinite(t) => {
            t.cycle_invariant.is_false()
                || finite_contradiction(sys, &t.stem)
                || finite_contradiction(sys, &t.cycle)
        }
    }
}
