//! Concurrent traces: events labeled by transition predicates, causal links
//! with preservation labels, and conflicts. A trace denotes the set of
//! computations it can be mapped into; infinite traces pair a stem with a
//! cycle that must recur forever.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic::{self, Formula, Valuation};
use crate::model::TransitionSystem;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub id: String,
    pub label: Formula,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CausalLink {
    pub src: String,
    pub tgt: String,
    /// Holds on every step strictly between the two events.
    pub label: Formula,
}

/// Forces two events onto distinct steps. Stored with `a <= b`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Conflict {
    pub a: String,
    pub b: String,
}

impl Conflict {
    pub fn new(x: &str, y: &str) -> Conflict {
        if x <= y {
            Conflict {
                a: x.into(),
                b: y.into(),
            }
        } else {
            Conflict {
                a: y.into(),
                b: x.into(),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConcurrentTrace {
    pub events: Vec<Event>,
    pub links: Vec<CausalLink>,
    pub conflicts: Vec<Conflict>,
    /// Set by producing rules when a required instantiation set is empty.
    pub contradictory: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfiniteTrace {
    pub stem: ConcurrentTrace,
    pub cycle: ConcurrentTrace,
    /// Constraint on every step of the cycle part (the implicit
    /// whole-cycle link); `true` unless an invariance split installed one.
    pub cycle_invariant: Formula,
}

impl InfiniteTrace {
    pub fn new(stem: ConcurrentTrace, cycle: ConcurrentTrace) -> Self {
        InfiniteTrace {
            stem,
            cycle,
            cycle_invariant: Formula::tt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeTrace {
    Finite(ConcurrentTrace),
    Infinite(InfiniteTrace),
}

/// A finite run, or a lasso when `loop_start` is set: the successor of the
/// last state is `states[loop_start]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Computation {
    pub states: Vec<Valuation>,
    pub loop_start: Option<usize>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TraceError {
    #[error("link graph has a cycle")]
    CyclicLinks,
}

impl ConcurrentTrace {
    pub fn event(&self, id: &str) -> Option<&Event> {
        self.events.iter().find(|e| e.id == id)
    }

    pub fn event_mut(&mut self, id: &str) -> Option<&mut Event> {
        self.events.iter_mut().find(|e| e.id == id)
    }

    pub fn has_conflict(&self, x: &str, y: &str) -> bool {
        let c = Conflict::new(x, y);
        self.conflicts.contains(&c)
    }

    /// Is there a directed link path from `src` to `tgt`?
    pub fn has_path(&self, src: &str, tgt: &str) -> bool {
        if src == tgt {
            return true;
        }
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        let mut stack = vec![src];
        while let Some(x) = stack.pop() {
            for l in &self.links {
                if l.src == x && seen.insert(&l.tgt) {
                    if l.tgt == tgt {
                        return true;
                    }
                    stack.push(&l.tgt);
                }
            }
        }
        false
    }

    /// Diagnostics for every violated type invariant; empty means well-formed.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        let ids: BTreeSet<&str> = self.events.iter().map(|e| e.id.as_str()).collect();
        if ids.len() != self.events.len() {
            out.push("duplicate event ids".into());
        }
        for l in &self.links {
            if l.src == l.tgt {
                out.push(format!("self-link on `{}`", l.src));
            }
            if !ids.contains(l.src.as_str()) || !ids.contains(l.tgt.as_str()) {
                out.push(format!("link `{}` -> `{}` has missing endpoint", l.src, l.tgt));
            }
        }
        for c in &self.conflicts {
            if c.a == c.b {
                out.push(format!("conflict of `{}` with itself", c.a));
            }
            if !ids.contains(c.a.as_str()) || !ids.contains(c.b.as_str()) {
                out.push(format!("conflict `{}` # `{}` has missing endpoint", c.a, c.b));
            }
        }
        if out.is_empty() && self.topological_events().is_err() {
            out.push("link graph has a cycle".into());
        }
        out
    }

    /// Events in a deterministic topological order of the link graph,
    /// ties broken by event id.
    pub fn topological_events(&self) -> Result<Vec<&Event>, TraceError> {
        let mut indeg: BTreeMap<&str, usize> =
            self.events.iter().map(|e| (e.id.as_str(), 0)).collect();
        for l in &self.links {
            if let Some(d) = indeg.get_mut(l.tgt.as_str()) {
                *d += 1;
            }
        }
        let mut ready: BTreeSet<&str> = indeg
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(id, _)| *id)
            .collect();
        let mut order = Vec::new();
        while let Some(&id) = ready.iter().next() {
            ready.remove(id);
            order.push(self.event(id).unwrap());
            for l in &self.links {
                if l.src == id {
                    let d = indeg.get_mut(l.tgt.as_str()).unwrap();
                    *d -= 1;
                    if *d == 0 {
                        ready.insert(l.tgt.as_str());
                    }
                }
            }
        }
        if order.len() != self.events.len() {
            return Err(TraceError::CyclicLinks);
        }
        Ok(order)
    }
}

/// All type invariants hold.
pub fn well_formed(t: &ConcurrentTrace) -> bool {
    t.diagnostics().is_empty()
}

// ---------------------------------------------------------------------------
// Membership
// ---------------------------------------------------------------------------

/// Backtracking assignment of events (by position) to step indices.
struct MemberSearch<'a> {
    sys: &'a TransitionSystem,
    states: &'a [Valuation],
    steps: usize,
    max_index: usize,
    order: Vec<usize>,
    labels: Vec<&'a Formula>,
    /// (src position, tgt position, label)
    links: Vec<(usize, usize, &'a Formula)>,
    /// (position, position)
    conflicts: Vec<(usize, usize)>,
}

impl<'a> MemberSearch<'a> {
    fn build(sys: &'a TransitionSystem, states: &'a [Valuation], t: &'a ConcurrentTrace) -> Option<Self> {
        let order_ev = t.topological_events().ok()?;
        let pos_of = |id: &str| t.events.iter().position(|e| e.id == id).unwrap();
        Some(MemberSearch {
            sys,
            states,
            steps: states.len() - 1,
            max_index: usize::MAX,
            order: order_ev.iter().map(|e| pos_of(&e.id)).collect(),
            labels: t.events.iter().map(|e| &e.label).collect(),
            links: t
                .links
                .iter()
                .map(|l| (pos_of(&l.src), pos_of(&l.tgt), &l.label))
                .collect(),
            conflicts: t
                .conflicts
                .iter()
                .map(|c| (pos_of(&c.a), pos_of(&c.b)))
                .collect(),
        })
    }

    fn step_ok(&self, f: &Formula, j: usize) -> bool {
        matches!(
            logic::eval(self.sys, f, &self.states[j], &self.states[j + 1]),
            Ok(true)
        )
    }

    fn consistent(&self, assigned: &[Option<usize>], pos: usize, idx: usize) -> bool {
        if !self.step_ok(self.labels[pos], idx) {
            return false;
        }
        for (s, t, label) in &self.links {
            let (si, ti) = if *t == pos {
                match assigned[*s] {
                    Some(si) => (si, idx),
                    None => continue,
                }
            } else if *s == pos {
                match assigned[*t] {
                    Some(ti) => (idx, ti),
                    None => continue,
                }
            } else {
                continue;
            };
            if si > ti {
                return false;
            }
            for j in (si + 1)..ti {
                if !self.step_ok(label, j) {
                    return false;
                }
            }
        }
        for (a, b) in &self.conflicts {
            let other = if *a == pos {
                *b
            } else if *b == pos {
                *a
            } else {
                continue;
            };
            if assigned[other] == Some(idx) {
                return false;
            }
        }
        true
    }

    fn search(&self, depth: usize, assigned: &mut [Option<usize>]) -> bool {
        if depth == self.order.len() {
            return true;
        }
        let pos = self.order[depth];
        for idx in 0..self.steps.min(self.max_index) {
            if self.consistent(assigned, pos, idx) {
                assigned[pos] = Some(idx);
                if self.search(depth + 1, assigned) {
                    return true;
                }
                assigned[pos] = None;
            }
        }
        false
    }
}

/// Membership of a finite computation in a finite trace: an assignment of
/// events to step indices satisfying labels, links (non-strict ordering,
/// preservation on strictly-between steps), and conflicts (distinct steps).
/// Non-conflicting events may share a step.
pub fn is_member(sys: &TransitionSystem, comp: &Computation, t: &ConcurrentTrace) -> bool {
    is_member_bounded(sys, &comp.states, t, usize::MAX)
}

pub(crate) fn is_member_bounded(
    sys: &TransitionSystem,
    states: &[Valuation],
    t: &ConcurrentTrace,
    max_index: usize,
) -> bool {
    if t.contradictory {
        return false;
    }
    if states.len() < 2 {
        return t.events.is_empty();
    }
    let Some(mut search) = MemberSearch::build(sys, states, t) else {
        return false;
    };
    search.max_index = max_index;
    let mut assigned = vec![None; t.events.len()];
    search.search(0, &mut assigned)
}

/// Membership of a lasso in an infinite trace. The stem must embed into
/// the prefix extended by one loop pass; the cycle must embed into a window
/// of `|cycle events| + 1` consecutive unrollings (the loop is periodic, so
/// one window is representative of every later one), and the cycle
/// invariant must hold on every loop step.
pub fn is_member_lasso(sys: &TransitionSystem, comp: &Computation, t: &InfiniteTrace) -> bool {
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
    // Invariant on every loop step, including the wrap.
    if !t.cycle_invariant.is_true() {
        for i in 0..loop_len {
            let pre = &loop_states[i];
            let post = if i + 1 < loop_len {
                &loop_states[i + 1]
            } else {
                &loop_states[0]
            };
            match logic::eval(sys, &t.cycle_invariant, pre, post) {
                Ok(true) => {}
                _ => return false,
            }
        }
    }
    // Stem: must fit within the prefix plus one loop pass.
    if !t.stem.events.is_empty() {
        let mut ext: Vec<Valuation> = comp.states.to_vec();
        for i in 0..=loop_len {
            ext.push(loop_states[i % loop_len].clone());
        }
        if !is_member_bounded(sys, &ext, &t.stem, n) {
            return false;
        }
    }
    // Cycle: window of k unrollings.
    let k = t.cycle.events.len() + 1;
    let mut window: Vec<Valuation> = Vec::with_capacity(k * loop_len + 1);
    for _ in 0..k {
        window.extend(loop_states.iter().cloned());
    }
    window.push(loop_states[0].clone());
    is_member_bounded(sys, &window, &t.cycle, usize::MAX)
}

// ---------------------------------------------------------------------------
// Embedding
// ---------------------------------------------------------------------------

/// Embedding of `small` into `big` (an extension of subgraph isomorphism):
/// an injective event map where big labels imply small labels, every small
/// link is witnessed by a big link path whose every edge label implies the
/// small label, and every small conflict is present in big. Returns the
/// first mapping in deterministic search order.
pub fn embed(
    sys: &TransitionSystem,
    small: &ConcurrentTrace,
    big: &ConcurrentTrace,
) -> Option<BTreeMap<String, String>> {
    let Ok(order) = small.topological_events() else {
        return None;
    };
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    if embed_rec(sys, small, big, &order, 0, &mut map) {
        Some(map)
    } else {
        None
    }
}

fn label_path_exists(
    sys: &TransitionSystem,
    big: &ConcurrentTrace,
    from: &str,
    to: &str,
    need: &Formula,
) -> bool {
    if from == to {
        return true;
    }
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut stack = vec![from];
    while let Some(x) = stack.pop() {
        for l in &big.links {
            if l.src == x && logic::implies(sys, &l.label, need) && seen.insert(&l.tgt) {
                if l.tgt == to {
                    return true;
                }
                stack.push(&l.tgt);
            }
        }
    }
    false
}

fn embed_rec(
    sys: &TransitionSystem,
    small: &ConcurrentTrace,
    big: &ConcurrentTrace,
    order: &[&Event],
    pos: usize,
    map: &mut BTreeMap<String, String>,
) -> bool {
    if pos == order.len() {
        return true;
    }
    let se = order[pos];
    for be in &big.events {
        if map.values().any(|v| v == &be.id) {
            continue;
        }
        if !logic::implies(sys, &be.label, &se.label) {
            continue;
        }
        let mut ok = true;
        for l in &small.links {
            let (ms, mt) = if l.tgt == se.id && l.src != se.id {
                match map.get(&l.src) {
                    Some(ms) => (ms.clone(), be.id.clone()),
                    None => continue,
                }
            } else if l.src == se.id && l.tgt != se.id {
                match map.get(&l.tgt) {
                    Some(mt) => (be.id.clone(), mt.clone()),
                    None => continue,
                }
            } else {
                continue;
            };
            if !label_path_exists(sys, big, &ms, &mt, &l.label) {
                ok = false;
                break;
            }
        }
        if ok {
            for c in &small.conflicts {
                let other = if c.a == se.id {
                    &c.b
                } else if c.b == se.id {
                    &c.a
                } else {
                    continue;
                };
                if let Some(mo) = map.get(other) {
                    if !big.has_conflict(&be.id, mo) {
                        ok = false;
                        break;
                    }
                }
            }
        }
        if ok {
            map.insert(se.id.clone(), be.id.clone());
            if embed_rec(sys, small, big, order, pos + 1, map) {
                return true;
            }
            map.remove(&se.id);
        }
    }
    false
}

/// Embedding for infinite traces: stems embed into stems, cycles into
/// cycles, and the big invariant must imply the small one.
pub fn embed_infinite(
    sys: &TransitionSystem,
    small: &InfiniteTrace,
    big: &InfiniteTrace,
) -> Option<(BTreeMap<String, String>, BTreeMap<String, String>)> {
    if !logic::implies(sys, &big.cycle_invariant, &small.cycle_invariant) {
        return None;
    }
    let stem = embed(sys, &small.stem, &big.stem)?;
    let cycle = embed(sys, &small.cycle, &big.cycle)?;
    Some((stem, cycle))
}

/// Embedding at the node level: finite into finite, infinite into infinite.
pub fn embed_node(sys: &TransitionSystem, small: &NodeTrace, big: &NodeTrace) -> bool {
    match (small, big) {
        (NodeTrace::Finite(s), NodeTrace::Finite(b)) => embed(sys, s, b).is_some(),
        (NodeTrace::Infinite(s), NodeTrace::Infinite(b)) => embed_infinite(sys, s, b).is_some(),
        _ => false,
    }
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

/// Canonical one-line rendering: events as `id[label]`, links as
/// `a ->[label] b`, conflicts as `a # b`; sections joined by ` | `.
pub fn render_trace(sys: &TransitionSystem, t: &ConcurrentTrace) -> String {
    let mut parts: Vec<String> = Vec::new();
    let order: Vec<&Event> = match t.topological_events() {
        Ok(o) => o,
        Err(_) => t.events.iter().collect(),
    };
    for e in order {
        parts.push(format!("{}[{}]", e.id, logic::render_formula(sys, &e.label)));
    }
    let mut links = t.links.clone();
    links.sort_by(|a, b| (a.src.as_str(), a.tgt.as_str()).cmp(&(b.src.as_str(), b.tgt.as_str())));
    for l in links {
        parts.push(format!(
            "{} ->[{}] {}",
            l.src,
            logic::render_formula(sys, &l.label),
            l.tgt
        ));
    }
    let mut confs = t.conflicts.clone();
    confs.sort_by(|a, b| (a.a.as_str(), a.b.as_str()).cmp(&(b.a.as_str(), b.b.as_str())));
    for c in confs {
        parts.push(format!("{} # {}", c.a, c.b));
    }
    if t.contradictory {
        parts.push("<contradictory>".into());
    }
    parts.join(" | ")
}

/// Infinite traces render as `stem ( cycle )^w`.
pub fn render_infinite(sys: &TransitionSystem, t: &InfiniteTrace) -> String {
    let stem = render_trace(sys, &t.stem);
    let cycle = render_trace(sys, &t.cycle);
    let inv = if t.cycle_invariant.is_true() {
        String::new()
    } else {
        format!(" @inv[{}]", logic::render_formula(sys, &t.cycle_invariant))
    };
    if stem.is_empty() {
        format!("( {cycle}{inv} )^w")
    } else {
        format!("{stem} ( {cycle}{inv} )^w")
    }
}

pub fn render_node_trace(sys: &TransitionSystem, t: &NodeTrace) -> String {
    match t {
        NodeTrace::Finite(t) => render_trace(sys, t),
        NodeTrace::Infinite(t) => render_infinite(sys, t),
    }
}
