//! Brute-force explicit-state checking: reachability by BFS, termination by
//! cycle search, and bounded run/lasso enumeration. The independent ground
//! truth for desk-scale cross-validation of the tableau engine.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::logic::{self, Formula, Val, Valuation};
use crate::model::{GlobalTransition, TransitionSystem, VarKind};
use crate::trace::Computation;

/// A state as one value per variable: location index or integer.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExplicitState(pub Vec<i64>);

/// A reachable cycle: `states[loop_start..]` repeats forever.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lasso {
    pub states: Vec<ExplicitState>,
    pub loop_start: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("state cap of {0} exceeded")]
    CapExceeded(usize),
    #[error("integer variable `{0}` has no declared bounds")]
    UnboundedVariable(String),
}

/// Default state cap; acceptance instances are sized to stay below it.
pub const DEFAULT_CAP: usize = 1_000_000;

pub fn initial_state(sys: &TransitionSystem) -> ExplicitState {
    let mut vals = vec![0i64; sys.variables.len()];
    for p in &sys.processes {
        vals[p.var] = p.init_loc as i64;
    }
    for (v, k) in &sys.int_inits {
        vals[*v] = *k;
    }
    ExplicitState(vals)
}

pub fn to_valuation(sys: &TransitionSystem, s: &ExplicitState) -> Valuation {
    let mut v = Valuation::new();
    for (i, var) in sys.variables.iter().enumerate() {
        match var.kind {
            VarKind::Location { .. } => v.set(i, Val::Loc(s.0[i] as usize)),
            VarKind::Int { .. } => v.set(i, Val::Int(s.0[i])),
        }
    }
    v
}

pub fn to_computation(
    sys: &TransitionSystem,
    states: &[ExplicitState],
    loop_start: Option<usize>,
) -> Computation {
    Computation {
        states: states.iter().map(|s| to_valuation(sys, s)).collect(),
        loop_start,
    }
}

/// Evaluates a current-state formula on an explicit state.
pub fn eval_state(sys: &TransitionSystem, f: &Formula, s: &ExplicitState) -> bool {
    let v = to_valuation(sys, s);
    matches!(logic::eval(sys, f, &v, &v), Ok(true))
}

fn eval_term(term: &crate::model::LinTerm, s: &ExplicitState) -> i64 {
    term.coeffs.iter().map(|(c, v)| c * s.0[*v]).sum::<i64>() + term.konst
}

fn in_bounds(sys: &TransitionSystem, var: usize, val: i64) -> bool {
    match &sys.variables[var].kind {
        VarKind::Int { lo, hi } => {
            lo.map_or(true, |lo| val >= lo) && hi.map_or(true, |hi| val <= hi)
        }
        VarKind::Location { .. } => true,
    }
}

/// Fires a global transition from a state: all members simultaneously.
/// Returns the unique successor, or None when disabled (wrong locations,
/// failed guards, or an out-of-bounds update).
pub fn fire(
    sys: &TransitionSystem,
    g: &GlobalTransition,
    s: &ExplicitState,
) -> Option<ExplicitState> {
    for &m in &g.members {
        let t = &sys.locals[m];
        let pvar = sys.processes[t.process].var;
        if s.0[pvar] != t.source as i64 {
            return None;
        }
        if !eval_state(sys, &t.guard, s) {
            return None;
        }
    }
    let mut next = s.clone();
    for &m in &g.members {
        let t = &sys.locals[m];
        let pvar = sys.processes[t.process].var;
        next.0[pvar] = t.target as i64;
        for (v, term) in &t.updates {
            let val = eval_term(term, s);
            if !in_bounds(sys, *v, val) {
                return None;
            }
            next.0[*v] = val;
        }
    }
    Some(next)
}

/// Successors in transition declaration order, with the firing transition.
pub fn successors(
    sys: &TransitionSystem,
    globals: &[GlobalTransition],
    s: &ExplicitState,
) -> Vec<(usize, ExplicitState)> {
    globals
        .iter()
        .enumerate()
        .filter_map(|(i, g)| fire(sys, g, s).map(|n| (i, n)))
        .collect()
}

fn require_bounded(sys: &TransitionSystem) -> Result<(), OracleError> {
    for v in &sys.variables {
        if let VarKind::Int { lo, hi } = v.kind {
            if lo.is_none() || hi.is_none() {
                return Err(OracleError::UnboundedVariable(v.name.clone()));
            }
        }
    }
    Ok(())
}

/// BFS over the explicit state space; errors if the cap is exceeded or an
/// integer variable is unbounded. Returned in discovery order.
pub fn enumerate_reachable(
    sys: &TransitionSystem,
    globals: &[GlobalTransition],
    cap: usize,
) -> Result<Vec<ExplicitState>, OracleError> {
    require_bounded(sys)?;
    let init = initial_state(sys);
    let mut seen: BTreeSet<ExplicitState> = BTreeSet::new();
    let mut order = Vec::new();
    let mut queue = VecDeque::new();
    seen.insert(init.clone());
    order.push(init.clone());
    queue.push_back(init);
    while let Some(s) = queue.pop_front() {
        for (_, n) in successors(sys, globals, &s) {
            if seen.insert(n.clone()) {
                if seen.len() > cap {
                    return Err(OracleError::CapExceeded(cap));
                }
                order.push(n.clone());
                queue.push_back(n);
            }
        }
    }
    Ok(order)
}

/// What `check_reachability` looks for.
pub enum ReachTarget<'a> {
    /// The named global transition becomes executable (the witness run
    /// ends with its firing).
    Transition(usize),
    /// A state satisfying the predicate is reached.
    Predicate(&'a Formula),
}

/// Shortest witness run to the target, or None. BFS in declaration order.
pub fn check_reachability(
    sys: &TransitionSystem,
    globals: &[GlobalTransition],
    target: &ReachTarget,
    cap: usize,
) -> Result<Option<Vec<ExplicitState>>, OracleError> {
    require_bounded(sys)?;
    let init = initial_state(sys);
    if let ReachTarget::Predicate(f) = target {
        if eval_state(sys, f, &init) {
            return Ok(Some(vec![init]));
        }
    }
    let mut parent: BTreeMap<ExplicitState, Option<ExplicitState>> = BTreeMap::new();
    parent.insert(init.clone(), None);
    let mut queue = VecDeque::new();
    queue.push_back(init);
    let unwind = |parent: &BTreeMap<ExplicitState, Option<ExplicitState>>,
                  last: ExplicitState|
     -> Vec<ExplicitState> {
        let mut run = vec![last];
        while let Some(Some(p)) = parent.get(run.last().unwrap()) {
            run.push(p.clone());
        }
        run.reverse();
        run
    };
    while let Some(s) = queue.pop_front() {
        for (gi, n) in successors(sys, globals, &s) {
            let hit = match target {
                ReachTarget::Transition(t) => gi == *t,
                ReachTarget::Predicate(f) => eval_state(sys, f, &n),
            };
            if hit {
                let mut run = unwind(&parent, s);
                run.push(n);
                return Ok(Some(run));
            }
            if !parent.contains_key(&n) {
                if parent.len() >= cap {
                    return Err(OracleError::CapExceeded(cap));
                }
                parent.insert(n.clone(), Some(s.clone()));
                queue.push_back(n);
            }
        }
    }
    Ok(None)
}

/// Searches for a reachable cycle by depth-first search with on-stack
/// marking; the first back edge yields the lasso. None means every run
/// terminates.
pub fn check_termination(
    sys: &TransitionSystem,
    globals: &[GlobalTransition],
    cap: usize,
) -> Result<Option<Lasso>, OracleError> {
    require_bounded(sys)?;
    let init = initial_state(sys);
    let mut black: BTreeSet<ExplicitState> = BTreeSet::new();
    let mut stack: Vec<(ExplicitState, usize)> = vec![(init, 0)];
    let mut on_stack: BTreeSet<ExplicitState> = BTreeSet::new();
    on_stack.insert(stack[0].0.clone());
    while let Some((s, next_idx)) = stack.last().cloned() {
        let succs = successors(sys, globals, &s);
        if next_idx >= succs.len() {
            stack.pop();
            on_stack.remove(&s);
            black.insert(s);
            continue;
        }
        stack.last_mut().unwrap().1 += 1;
        let (_, n) = &succs[next_idx];
        if on_stack.contains(n) {
            let states: Vec<ExplicitState> = stack.iter().map(|(x, _)| x.clone()).collect();
            let loop_start = states.iter().position(|x| x == n).unwrap();
            return Ok(Some(Lasso { states, loop_start }));
        }
        if !black.contains(n) {
            if black.len() + on_stack.len() >= cap {
                return Err(OracleError::CapExceeded(cap));
            }
            on_stack.insert(n.clone());
            stack.push((n.clone(), 0));
        }
    }
    Ok(None)
}

/// Visits every run (state sequence, including the empty run) of length up
/// to `horizon` steps, in deterministic depth-first order.
pub fn for_each_run(
    sys: &TransitionSystem,
    globals: &[GlobalTransition],
    horizon: usize,
    f: &mut impl FnMut(&[ExplicitState]),
) {
    fn rec(
        sys: &TransitionSystem,
        globals: &[GlobalTransition],
        horizon: usize,
        path: &mut Vec<ExplicitState>,
        f: &mut impl FnMut(&[ExplicitState]),
    ) {
        f(path);
        if path.len() > horizon {
            return;
        }
        let last = path.last().unwrap().clone();
        for (_, n) in successors(sys, globals, &last) {
            path.push(n);
            rec(sys, globals, horizon, path, f);
            path.pop();
        }
    }
    let mut path = vec![initial_state(sys)];
    rec(sys, globals, horizon, &mut path, f);
}

/// Visits every lasso whose total state count is at most `max_len`:
/// each enumerated path whose tail has a successor equal to an earlier
/// path state closes a loop there.
pub fn for_each_lasso(
    sys: &TransitionSystem,
    globals: &[GlobalTransition],
    max_len: usize,
    f: &mut impl FnMut(&Lasso),
) {
    fn rec(
        sys: &TransitionSystem,
        globals: &[GlobalTransition],
        max_len: usize,
        path: &mut Vec<ExplicitState>,
        f: &mut impl FnMut(&Lasso),
    ) {
        let last = path.last().unwrap().clone();
        for (_, n) in successors(sys, globals, &last) {
            if let Some(j) = path.iter().position(|x| *x == n) {
                f(&Lasso {
                    states: path.clone(),
                    loop_start: j,
                });
            }
            if path.len() < max_len && !path.contains(&n) {
                path.push(n);
                rec(sys, globals, max_len, path, f);
                path.pop();
            }
        }
    }
    let mut path = vec![initial_state(sys)];
    rec(sys, globals, max_len, &mut path, f);
}

/// Validates a run or lasso step by step: the first state is the initial
/// state and every step (including a lasso's closing step) is the firing
/// of some global transition.
pub fn validate_computation(
    sys: &TransitionSystem,
    globals: &[GlobalTransition],
    states: &[ExplicitState],
    loop_start: Option<usize>,
) -> bool {
    if states.is_empty() || states[0] != initial_state(sys) {
        return false;
    }
    let step_ok = |a: &ExplicitState, b: &ExplicitState| {
        globals.iter().any(|g| fire(sys, g, a).as_ref() == Some(b))
    };
    for w in states.windows(2) {
        if !step_ok(&w[0], &w[1]) {
            return false;
        }
    }
    if let Some(ls) = loop_start {
        if ls >= states.len() {
            return false;
        }
        if !step_ok(states.last().unwrap(), &states[ls]) {
            return false;
        }
    }
    true
}

/// A system run as a trace-membership computation: the birth stutter step
/// `(s0, s0)` is prepended so the initial event (whose label constrains the
/// post-state to the initial condition) has a step to map to.
pub fn with_birth_step(comp: &Computation) -> Computation {
    if comp.states.is_empty() {
        return comp.clone();
    }
    let mut states = Vec::with_capacity(comp.states.len() + 1);
    states.push(comp.states[0].clone());
    states.extend(comp.states.iter().cloned());
    Computation {
        states,
        loop_start: comp.loop_start.map(|l| l + 1),
    }
}
