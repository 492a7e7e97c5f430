//! Direct brute-force evaluator for trace membership, independent of the
//! backtracking search in `trace`. It enumerates every assignment of events
//! to step indices and evaluates the defining constraints literally:
//! existential label and ordering constraints, universal preservation
//! constraints on strictly-between steps, and distinctness for conflicts.
//! Used as the ground-truth side of semantics cross-checks.

use crate::logic::{self, Valuation};
use crate::model::TransitionSystem;
use crate::trace::{Computation, ConcurrentTrace, InfiniteTrace};

fn holds(sys: &TransitionSystem, f: &crate::logic::Formula, states: &[Valuation], j: usize) -> bool {
    matches!(logic::eval(sys, f, &states[j], &states[j + 1]), Ok(true))
}

fn check_assignment(
    sys: &TransitionSystem,
    t: &ConcurrentTrace,
    states: &[Valuation],
    sigma: &[usize],
) -> bool {
    for (e, &i) in t.events.iter().zip(sigma) {
        if !holds(sys, &e.label, states, i) {
            return false;
        }
    }
    for l in &t.links {
        let a = sigma[t.events.iter().position(|e| e.id == l.src).unwrap()];
        let b = sigma[t.events.iter().position(|e| e.id == l.tgt).unwrap()];
        if a > b {
            return false;
        }
        for j in (a + 1)..b {
            if !holds(sys, &l.label, states, j) {
                return false;
            }
        }
    }
    for c in &t.conflicts {
        let a = sigma[t.events.iter().position(|e| e.id == c.a).unwrap()];
        let b = sigma[t.events.iter().position(|e| e.id == c.b).unwrap()];
        if a == b {
            return false;
        }
    }
    true
}

fn exists_assignment(
    sys: &TransitionSystem,
    t: &ConcurrentTrace,
    states: &[Valuation],
    max_index: usize,
) -> bool {
    if states.len() < 2 {
        return t.events.is_empty();
    }
    let steps = (states.len() - 1).min(max_index);
    let n = t.events.len();
    if n == 0 {
        return true;
    }
    let mut sigma = vec![0usize; n];
    loop {
        if check_assignment(sys, t, states, &sigma) {
            return true;
        }
        // odometer
        let mut pos = 0;
        loop {
            if pos == n {
                return false;
            }
            sigma[pos] += 1;
            if sigma[pos] < steps {
                break;
            }
            sigma[pos] = 0;
            pos += 1;
        }
    }
}

/// Brute-force membership of a finite computation in a finite trace.
pub fn brute_member(sys: &TransitionSystem, comp: &Computation, t: &ConcurrentTrace) -> bool {
    if t.contradictory {
        return false;
    }
    exists_assignment(sys, t, &comp.states, usize::MAX)
}

/// Brute-force membership of a lasso in an infinite trace, with the same
/// window convention as `trace::is_member_lasso` (stem within prefix plus
/// one loop pass; cycle within `|cycle events| + 1` unrollings; invariant
/// on every loop step).
pub fn brute_member_lasso(sys: &TransitionSystem, comp: &Computation, t: &InfiniteTrace) -> bool {
    let Some(loop_start) = comp.loop_start else {
        return false;
    };
    if t.stem.contradictory || t.cycle.contradictory {
        return false;
    }
    let n = comp.states.len();
    if loop_start >= n {
        return false;
    }
    let loop_states = &comp.states[loop_start..];
    let loop_len = loop_states.len();
    if !t.cycle_invariant.is_true() {
        for i in 0..loop_len {
            let pre = &loop_states[i];
            let post = if i + 1 < loop_len {
                &loop_states[i + 1]
            } else {
                &loop_states[0]
            };
            if !matches!(logic::eval(sys, &t.cycle_invariant, pre, post), Ok(true)) {
                return false;
            }
        }
    }
    if !t.stem.events.is_empty() {
        let mut ext: Vec<Valuation> = comp.states.to_vec();
        for i in 0..=loop_len {
            ext.push(loop_states[i % loop_len].clone());
        }
        if !exists_assignment(sys, &t.stem, &ext, n) {
            return false;
        }
    }
    let k = t.cycle.events.len() + 1;
    let mut window: Vec<Valuation> = Vec::with_capacity(k * loop_len + 1);
    for _ in 0..k {
        window.extend(loop_states.iter().cloned());
    }
    window.push(loop_states[0].clone());
    exists_assignment(sys, &t.cycle, &window, usize::MAX)
}
