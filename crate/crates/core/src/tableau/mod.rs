//! Tableau proof search: grows a forest of traces from property-violation
//! roots by applying trace transformers under a documented heuristic,
//! manages coverings, and produces verdicts. Deterministic by construction:
//! FIFO worklist, declaration-order scans, stable fresh ids.

mod dot;
pub mod check;
pub mod report;

pub use dot::export_dot;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::logic::{self, Atom, Formula};
use crate::model::{GlobalTransition, TransitionSystem};
use crate::oracle;
use crate::trace::{
    CausalLink, Computation, ConcurrentTrace, Event, InfiniteTrace, NodeTrace,
};
use crate::transformers::{self, Production, RankingWitness};

/// Expansion strategy for necessary-event selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Heuristic {
    /// Prefer preconditions with the fewest establishing transitions and
    /// defer insertions while a conflict obligation is pending.
    Smart,
    /// Expand necessary events in declaration (process-index) order.
    Naive,
}

#[derive(Debug, Clone)]
pub struct Options {
    pub heuristic: Heuristic,
    pub max_nodes: usize,
    /// Realization depth override; default 3 * |events| * |processes|.
    pub horizon: Option<usize>,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            heuristic: Heuristic::Smart,
            max_nodes: 10_000,
            horizon: None,
        }
    }
}

/// The property to check, already resolved against the model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PropertySpec {
    /// Is the named global transition executable?
    ReachTransition(usize),
    /// Is a state satisfying the predicate reachable?
    ReachPredicate(Formula),
    /// Do all computations terminate?
    Termination,
    /// A violation pattern given directly as a trace.
    Custom(NodeTrace),
}

/// Why a node needs no children.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Closing {
    Contradiction,
    Terminating(RankingWitness),
    /// No program transition is compatible with the abstract cycle event.
    InstantiateEmpty { event: String },
    /// No program transition re-establishes the consumed predicate.
    NecessaryCycleEmpty { event: String, phi: Atom },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Status {
    Open,
    Closed(Closing),
    Covered(usize),
    RuleGap,
}

#[derive(Debug, Clone)]
pub struct TableauNode {
    pub id: usize,
    pub trace: NodeTrace,
    pub parent: Option<usize>,
    pub production: Option<Production>,
    pub status: Status,
}

#[derive(Debug, Clone, Default)]
pub struct Tableau {
    pub nodes: Vec<TableauNode>,
    pub coverings: Vec<(usize, usize)>,
    pub expanded: usize,
}

impl Tableau {
    pub fn is_ancestor(&self, anc: usize, node: usize) -> bool {
        let mut cur = node;
        while let Some(p) = self.nodes[cur].parent {
            if p == anc {
                return true;
            }
            cur = p;
        }
        false
    }

    /// The top-level branch a node belongs to: itself if a root or a
    /// root's child, otherwise its ancestor directly under a root.
    pub fn branch(&self, node: usize) -> usize {
        let mut cur = node;
        while let Some(p) = self.nodes[cur].parent {
            if self.nodes[p].parent.is_none() {
                return cur;
            }
            cur = p;
        }
        cur
    }

    pub fn children(&self, node: usize) -> Vec<usize> {
        self.nodes
            .iter()
            .filter(|n| n.parent == Some(node))
            .map(|n| n.id)
            .collect()
    }

    /// Least-fixpoint closure: a node is closed iff it closed on its own,
    /// is covered by a closed node, or has children that are all closed.
    /// Unsupported covering cycles never fire under the least fixpoint.
    pub fn closed_set(&self) -> Vec<bool> {
        let mut closed = vec![false; self.nodes.len()];
        let children: Vec<Vec<usize>> = (0..self.nodes.len()).map(|i| self.children(i)).collect();
        loop {
            let mut changed = false;
            for n in &self.nodes {
                if closed[n.id] {
                    continue;
                }
                let now = match &n.status {
                    Status::Closed(_) => true,
                    Status::Covered(v) => closed[*v],
                    _ => !children[n.id].is_empty() && children[n.id].iter().all(|c| closed[*c]),
                };
                if now {
                    closed[n.id] = true;
                    changed = true;
                }
            }
            if !changed {
                return closed;
            }
        }
    }

    /// Closure bookkeeping: recomputes the closed set and reverts coverings
    /// whose target cannot close without them (unsupported cycles), turning
    /// the covered nodes open again. Returns (node, former target) pairs.
    pub fn propagate(&mut self) -> Vec<(usize, usize)> {
        let closed = self.closed_set();
        let mut reverted = Vec::new();
        for i in 0..self.nodes.len() {
            if let Status::Covered(v) = self.nodes[i].status {
                // Only revert when the covering is part of a cycle: the
                // target's closure depends on this very node.
                if !closed[v] && !closed[i] && self.supports(v, i) {
                    self.nodes[i].status = Status::Open;
                    self.coverings.retain(|(a, b)| !(*a == i && *b == v));
                    reverted.push((i, v));
                }
            }
        }
        reverted
    }

    /// Does the closure of `target` potentially depend on `node`? True when
    /// `node` lies in the subtree of `target` or of any covering target
    /// reachable from it.
    fn supports(&self, target: usize, node: usize) -> bool {
        let mut seen = BTreeSet::new();
        let mut stack = vec![target];
        while let Some(t) = stack.pop() {
            if !seen.insert(t) {
                continue;
            }
            if t == node || self.is_ancestor(t, node) {
                return true;
            }
            for id in 0..self.nodes.len() {
                if id == t || self.is_ancestor(t, id) {
                    if let Status::Covered(v) = self.nodes[id].status {
                        stack.push(v);
                    }
                }
            }
        }
        false
    }
}

/// Final answer of a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    /// Closed tableau: the violation pattern is infeasible.
    Proven,
    /// A concrete run (or lasso) realizing the violation.
    Violated(Computation),
    Unknown(UnknownReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnknownReason {
    Budget,
    RuleGap,
}

/// Roots encoding possible violations of the property.
pub fn initial_roots(
    sys: &TransitionSystem,
    globals: &[GlobalTransition],
    prop: &PropertySpec,
) -> Vec<NodeTrace> {
    let theta_post = sys.init_formula().prime();
    let reach_root = |goal_label: Formula| {
        NodeTrace::Finite(ConcurrentTrace {
            events: vec![
                Event {
                    id: "init".into(),
                    label: theta_post.clone(),
                },
                Event {
                    id: "goal".into(),
                    label: goal_label,
                },
            ],
            links: vec![CausalLink {
                src: "init".into(),
                tgt: "goal".into(),
                label: Formula::tt(),
            }],
            conflicts: vec![],
            contradictory: false,
        })
    };
    match prop {
        PropertySpec::ReachTransition(gi) => vec![reach_root(globals[*gi].relation.clone())],
        PropertySpec::ReachPredicate(f) => vec![reach_root(f.clone())],
        PropertySpec::Termination => vec![NodeTrace::Infinite(InfiniteTrace::new(
            ConcurrentTrace::default(),
            ConcurrentTrace {
                events: vec![Event {
                    id: "n0_e0".into(),
                    label: Formula::tt(),
                }],
                links: vec![],
                conflicts: vec![],
                contradictory: false,
            },
        ))],
        PropertySpec::Custom(t) => vec![t.clone()],
    }
}

pub struct Engine<'a> {
    pub sys: &'a TransitionSystem,
    pub globals: &'a [GlobalTransition],
    pub opts: Options,
    pub tab: Tableau,
    forbidden_covers: BTreeMap<usize, BTreeSet<usize>>,
    counterexample: Option<Computation>,
    rule_gap: bool,
    budget_hit: bool,
}

impl<'a> Engine<'a> {
    pub fn new(
        sys: &'a TransitionSystem,
        globals: &'a [GlobalTransition],
        opts: Options,
    ) -> Self {
        Engine {
            sys,
            globals,
            opts,
            tab: Tableau::default(),
            forbidden_covers: BTreeMap::new(),
            counterexample: None,
            rule_gap: false,
            budget_hit: false,
        }
    }

    fn add_node(
        &mut self,
        trace: NodeTrace,
        parent: Option<usize>,
        production: Option<Production>,
        status: Status,
    ) -> usize {
        let id = self.tab.nodes.len();
        self.tab.nodes.push(TableauNode {
            id,
            trace,
            parent,
            production,
            status,
        });
        id
    }

    /// Worklist loop: step + propagate until all roots close, a violation
    /// is realized, or the budget runs out.
    pub fn run(&mut self, prop: &PropertySpec) -> Verdict {
        let roots: Vec<usize> = initial_roots(self.sys, self.globals, prop)
            .into_iter()
            .map(|t| self.add_node(t, None, None, Status::Open))
            .collect();
        let mut queue: VecDeque<usize> = roots.iter().copied().collect();
        loop {
            while let Some(id) = queue.pop_front() {
                if self.tab.nodes[id].status != Status::Open {
                    continue;
                }
                if self.tab.nodes.len() >= self.opts.max_nodes {
                    self.budget_hit = true;
                    break;
                }
                self.tab.expanded += 1;
                let children = self.step(id);
                if self.counterexample.is_some() {
                    let c = self.counterexample.clone().unwrap();
                    return Verdict::Violated(c);
                }
                queue.extend(children);
                self.tab.propagate();
                let closed = self.tab.closed_set();
                if roots.iter().all(|r| closed[*r]) {
                    return Verdict::Proven;
                }
            }
            if self.budget_hit {
                return Verdict::Unknown(UnknownReason::Budget);
            }
            let closed = self.tab.closed_set();
            if roots.iter().all(|r| closed[*r]) {
                return Verdict::Proven;
            }
            let reverted = self.tab.propagate();
            if reverted.is_empty() {
                return if self.rule_gap {
                    Verdict::Unknown(UnknownReason::RuleGap)
                } else {
                    Verdict::Unknown(UnknownReason::Budget)
                };
            }
            // Remember the failed targets so re-covering cannot loop.
            for (id, v) in &reverted {
                self.forbidden_covers.entry(*id).or_default().insert(*v);
            }
            queue.extend(reverted.iter().map(|(id, _)| *id));
        }
    }

    /// Applies the first applicable action in the documented priority
    /// order; returns newly created children.
    pub fn step(&mut self, id: usize) -> Vec<usize> {
        let trace = self.tab.nodes[id].trace.clone();
        // (1) contradiction
        if transformers::contradiction(self.sys, &trace) {
            self.tab.nodes[id].status = Status::Closed(Closing::Contradiction);
            return vec![];
        }
        // (2) covering
        if let Some(v) = self.try_cover(id) {
            self.tab.nodes[id].status = Status::Covered(v);
            self.tab.coverings.push((id, v));
            return vec![];
        }
        match trace {
            NodeTrace::Finite(t) => self.step_finite(id, &t),
            NodeTrace::Infinite(t) => self.step_infinite(id, &t),
        }
    }

    /// Searches existing nodes (id order) in strictly earlier top-level
    /// branches whose trace embeds into this node's trace. The branch
    /// restriction keeps covering support well-founded.
    pub fn try_cover(&self, id: usize) -> Option<usize> {
        let my_branch = self.tab.branch(id);
        let forbidden = self.forbidden_covers.get(&id);
        for v in 0..id {
            if self.tab.is_ancestor(v, id) {
                continue;
            }
            if self.tab.branch(v) >= my_branch {
                continue;
            }
            if forbidden.map_or(false, |f| f.contains(&v)) {
                continue;
            }
            if crate::trace::embed_node(self.sys, &self.tab.nodes[v].trace, &self.tab.nodes[id].trace)
            {
                return Some(v);
            }
        }
        None
    }

    // ------------------------------------------------------------------
    // Finite traces
    // ------------------------------------------------------------------

    fn anchor_of(t: &ConcurrentTrace) -> Option<String> {
        let mut no_in: Vec<&str> = t
            .events
            .iter()
            .filter(|e| !t.links.iter().any(|l| l.tgt == e.id))
            .map(|e| e.id.as_str())
            .collect();
        if no_in.len() == 1 {
            Some(no_in.remove(0).into())
        } else {
            None
        }
    }

    /// Ordered pairs joined by a direct plain link with nothing strictly in
    /// between and contradictory post/pre: the shape NecessaryEvent
    /// processes. Pairs anchored at the initial event stay with rule (6).
    fn pending_pairs(&self, t: &ConcurrentTrace, anchor: &Option<String>) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for l in &t.links {
            if !l.label.is_true() {
                continue;
            }
            if anchor.as_deref() == Some(l.src.as_str()) {
                continue;
            }
            let (Some(x), Some(y)) = (t.event(&l.src), t.event(&l.tgt)) else {
                continue;
            };
            let between = t.events.iter().any(|z| {
                z.id != l.src && z.id != l.tgt && t.has_path(&l.src, &z.id) && t.has_path(&z.id, &l.tgt)
            });
            if between {
                continue;
            }
            let strict = t.has_conflict(&l.src, &l.tgt)
                || transformers::same_step_impossible(self.sys, self.globals, &x.label, &y.label);
            if !strict {
                continue;
            }
            if logic::and_satisfiable(self.sys, &x.label.post_part(), &y.label.current_part()) {
                continue;
            }
            if out.iter().any(|(a, b)| *a == l.src && *b == l.tgt) {
                continue;
            }
            out.push((l.src.clone(), l.tgt.clone()));
        }
        out
    }

    /// Unordered pairs with jointly unsatisfiable labels that are
    /// bridge-worthy in at least one direction: the shape OrderSplit
    /// makes progress on.
    fn split_pairs(&self, t: &ConcurrentTrace) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (i, a) in t.events.iter().enumerate() {
            for b in t.events.iter().skip(i + 1) {
                if t.has_path(&a.id, &b.id) || t.has_path(&b.id, &a.id) {
                    continue;
                }
                if logic::and_satisfiable(self.sys, &a.label, &b.label) {
                    continue;
                }
                let worthy = !logic::and_satisfiable(
                    self.sys,
                    &a.label.post_part(),
                    &b.label.current_part(),
                ) || !logic::and_satisfiable(
                    self.sys,
                    &b.label.post_part(),
                    &a.label.current_part(),
                );
                if worthy {
                    out.push((a.id.clone(), b.id.clone()));
                }
            }
        }
        out
    }

    /// Candidates for LastNecessaryEvent: (target, unmet location literal,
    /// establishing transition count, target topological position).
    fn lne_candidates(
        &self,
        t: &ConcurrentTrace,
        anchor: &str,
    ) -> Vec<(String, Atom, usize, usize)> {
        let Some(anchor_ev) = t.event(anchor) else {
            return vec![];
        };
        let context = anchor_ev.label.post_part();
        let Ok(order) = t.topological_events() else {
            return vec![];
        };
        let mut out = Vec::new();
        for (pos, b) in order.iter().enumerate() {
            if b.id == anchor || !t.has_path(anchor, &b.id) {
                continue;
            }
            // Precondition literals in variable declaration order.
            let mut pre_atoms: Vec<Atom> = b
                .label
                .current_part()
                .atoms()
                .iter()
                .filter(|a| matches!(a, Atom::Loc { eq: true, .. }))
                .cloned()
                .collect();
            pre_atoms.sort_by_key(|a| a.vars());
            for phi in pre_atoms {
                let phi_f = Formula::from_atoms([phi.clone()]);
                if logic::and_satisfiable(self.sys, &context, &phi_f) {
                    continue;
                }
                let established = t.events.iter().any(|x| {
                    x.id != b.id && logic::implies(self.sys, &x.label, &phi_f.prime())
                });
                if established {
                    continue;
                }
                if !transformers::same_step_impossible(
                    self.sys,
                    self.globals,
                    &anchor_ev.label,
                    &b.label,
                ) {
                    continue;
                }
                let est = transformers::establishing_transitions(self.sys, self.globals, &phi);
                out.push((b.id.clone(), phi, est.len(), pos));
            }
        }
        out
    }

    fn step_finite(&mut self, id: usize, t: &ConcurrentTrace) -> Vec<usize> {
        let anchor = Self::anchor_of(t);
        let pending = self.pending_pairs(t, &anchor);
        let splits = self.split_pairs(t);

        // (6) LastNecessaryEvent; smart defers while conflicts are pending.
        let defer = self.opts.heuristic == Heuristic::Smart
            && (!pending.is_empty() || !splits.is_empty());
        if !defer {
            if let Some(anchor) = &anchor {
                let mut cands = self.lne_candidates(t, anchor);
                match self.opts.heuristic {
                    Heuristic::Smart => cands.sort_by_key(|(_, _, est, pos)| (*est, *pos)),
                    Heuristic::Naive => cands.sort_by_key(|(_, _, _, pos)| *pos),
                }
                if let Some((target, phi, _, _)) = cands.into_iter().next() {
                    let fresh = format!("n{id}_e0");
                    if let Ok((child, gi)) = transformers::last_necessary_event(
                        self.sys,
                        self.globals,
                        t,
                        anchor,
                        &target,
                        &phi,
                        &fresh,
                    ) {
                        let prod = Production::LastNecessaryEvent {
                            anchor: anchor.clone(),
                            target,
                            phi,
                            fresh,
                            transition: gi.map(|g| self.globals[g].name.clone()),
                        };
                        let c = self.add_node(
                            NodeTrace::Finite(child),
                            Some(id),
                            Some(prod),
                            Status::Open,
                        );
                        return vec![c];
                    }
                }
            }
        }
        // (7) NecessaryEvent with interpolant-derived predicate.
        for (x, y) in &pending {
            let ex = t.event(x).unwrap();
            let ey = t.event(y).unwrap();
            let Ok(interp) =
                logic::interpolate(self.sys, &ex.label.post_part(), &ey.label.current_part())
            else {
                continue;
            };
            if interp.atoms().len() != 1 {
                continue;
            }
            let phi = interp.atoms()[0].clone();
            let fresh = format!("n{id}_e0");
            if let Ok((child, gi)) =
                transformers::necessary_event(self.sys, self.globals, t, x, y, &phi, &fresh)
            {
                let prod = Production::NecessaryEvent {
                    src: x.clone(),
                    tgt: y.clone(),
                    phi,
                    fresh,
                    transition: gi.map(|g| self.globals[g].name.clone()),
                };
                let c =
                    self.add_node(NodeTrace::Finite(child), Some(id), Some(prod), Status::Open);
                return vec![c];
            }
        }
        // (8) OrderSplit on the first worthy unordered pair.
        if let Some((a, b)) = splits.first() {
            if let Ok([fwd, rev]) = transformers::order_split(t, a, b) {
                let c1 = self.add_node(
                    NodeTrace::Finite(fwd),
                    Some(id),
                    Some(Production::OrderSplit {
                        first: a.clone(),
                        second: b.clone(),
                        forward: true,
                    }),
                    Status::Open,
                );
                let c2 = self.add_node(
                    NodeTrace::Finite(rev),
                    Some(id),
                    Some(Production::OrderSplit {
                        first: a.clone(),
                        second: b.clone(),
                        forward: false,
                    }),
                    Status::Open,
                );
                return vec![c1, c2];
            }
        }
        // No rule applies: try to realize the violation.
        if let Some(run) = self.realize_finite(t) {
            self.counterexample = Some(run);
        } else {
            self.tab.nodes[id].status = Status::RuleGap;
            self.rule_gap = true;
        }
        vec![]
    }

    // ------------------------------------------------------------------
    // Infinite traces
    // ------------------------------------------------------------------

    fn step_infinite(&mut self, id: usize, t: &InfiniteTrace) -> Vec<usize> {
        let all_concrete = t
            .cycle
            .events
            .iter()
            .all(|e| transformers::is_concrete(self.sys, self.globals, e));
        // (3) ranking, then invariance split on v' <= v.
        if all_concrete {
            if let Some(w) = transformers::find_ranking(self.sys, t) {
                let phi = transformers::nonincrease_formula(w.var);
                let viol_id = self.tab.nodes.len() + 1;
                let fresh = format!("n{viol_id}_e0");
                if let Ok([inv, viol]) = transformers::invariance_split(t, &phi, &fresh) {
                    debug_assert!(transformers::witness_valid(self.sys, &inv, &w));
                    let c1 = self.add_node(
                        NodeTrace::Infinite(inv),
                        Some(id),
                        Some(Production::InvarianceSplit {
                            phi: phi.clone(),
                            violation: false,
                            fresh: None,
                        }),
                        Status::Closed(Closing::Terminating(w)),
                    );
                    let c2 = self.add_node(
                        NodeTrace::Infinite(viol),
                        Some(id),
                        Some(Production::InvarianceSplit {
                            phi,
                            violation: true,
                            fresh: Some(fresh),
                        }),
                        Status::Open,
                    );
                    return vec![c1, c2];
                }
            }
        }
        // (4) Instantiate an abstract cycle event, fewest candidates first.
        let mut abstracts: Vec<(usize, usize)> = t
            .cycle
            .events
            .iter()
            .enumerate()
            .filter(|(_, e)| !transformers::is_concrete(self.sys, self.globals, e))
            .map(|(i, e)| {
                (
                    transformers::instantiation_candidates(self.sys, self.globals, &e.label).len(),
                    i,
                )
            })
            .collect();
        abstracts.sort();
        if let Some((_, ei)) = abstracts.first() {
            let event = t.cycle.events[*ei].id.clone();
            let children =
                transformers::instantiate_cycle(self.sys, self.globals, t, &event).unwrap();
            if children.is_empty() {
                self.tab.nodes[id].status = Status::Closed(Closing::InstantiateEmpty { event });
                return vec![];
            }
            let mut out = Vec::new();
            for (gi, child) in children {
                let prod = Production::InstantiateCycle {
                    event: event.clone(),
                    transition: self.globals[gi].name.clone(),
                };
                out.push(self.add_node(
                    NodeTrace::Infinite(child),
                    Some(id),
                    Some(prod),
                    Status::Open,
                ));
            }
            return out;
        }
        // (5) NecessaryCycleEvent on the first consuming event.
        for e in &t.cycle.events {
            let mut pre_atoms: Vec<Atom> = e
                .label
                .current_part()
                .atoms()
                .iter()
                .filter(|a| matches!(a, Atom::Loc { eq: true, .. }))
                .cloned()
                .collect();
            pre_atoms.sort_by_key(|a| a.vars());
            for phi in pre_atoms {
                let phi_f = Formula::from_atoms([phi.clone()]);
                let Some(neg) = logic::complement_single(&phi) else {
                    continue;
                };
                let neg_post = Formula::from_atoms([neg]).prime();
                if !logic::implies(self.sys, &e.label, &neg_post) {
                    continue; // not consumed
                }
                let established = t.cycle.events.iter().any(|x| {
                    x.id != e.id && logic::implies(self.sys, &x.label, &phi_f.prime())
                });
                if established {
                    continue;
                }
                let fresh = format!("n{id}_e0");
                let Ok(children) = transformers::necessary_cycle_event(
                    self.sys,
                    self.globals,
                    t,
                    &e.id,
                    &phi,
                    &fresh,
                ) else {
                    continue;
                };
                if children.is_empty() {
                    self.tab.nodes[id].status = Status::Closed(Closing::NecessaryCycleEmpty {
                        event: e.id.clone(),
                        phi,
                    });
                    return vec![];
                }
                let mut out = Vec::new();
                for (gi, child) in children {
                    let prod = Production::NecessaryCycleEvent {
                        event: e.id.clone(),
                        phi: phi.clone(),
                        transition: self.globals[gi].name.clone(),
                        fresh: fresh.clone(),
                    };
                    out.push(self.add_node(
                        NodeTrace::Infinite(child),
                        Some(id),
                        Some(prod),
                        Status::Open,
                    ));
                }
                return out;
            }
        }
        // No rule applies: try to realize a lasso.
        if let Some(lasso) = self.realize_lasso(t) {
            self.counterexample = Some(lasso);
        } else {
            self.tab.nodes[id].status = Status::RuleGap;
            self.rule_gap = true;
        }
        vec![]
    }

    // ------------------------------------------------------------------
    // Counterexample realization
    // ------------------------------------------------------------------

    fn default_horizon(&self, events: usize) -> usize {
        self.opts
            .horizon
            .unwrap_or(3 * events.max(1) * self.sys.processes.len().max(1))
    }

    /// Bounded explicit search for a system run that is a member of the
    /// trace: BFS over (state, fired-event set) pairs with the birth
    /// stutter as step zero. Complete up to the horizon.
    pub fn realize_finite(&self, t: &ConcurrentTrace) -> Option<Computation> {
        if t.contradictory {
            return None;
        }
        let n = t.events.len();
        if n > 63 {
            return None;
        }
        let horizon = self.default_horizon(n);
        let full: u64 = if n == 0 { 0 } else { (1u64 << n) - 1 };
        let idx_of = |id: &str| t.events.iter().position(|e| e.id == id).unwrap();
        let links: Vec<(usize, usize, &Formula)> = t
            .links
            .iter()
            .map(|l| (idx_of(&l.src), idx_of(&l.tgt), &l.label))
            .collect();
        let conflicts: Vec<(usize, usize)> = t
            .conflicts
            .iter()
            .map(|c| ord(idx_of(&c.a), idx_of(&c.b)))
            .collect();
        let init = oracle::initial_state(self.sys);

        // Which events can fire on a step, and which subsets are valid.
        let assignments = |fired: u64,
                           pre: &oracle::ExplicitState,
                           post: &oracle::ExplicitState|
         -> Vec<u64> {
            let vp = oracle::to_valuation(self.sys, pre);
            let vq = oracle::to_valuation(self.sys, post);
            let mut cands: Vec<usize> = Vec::new();
            for (i, e) in t.events.iter().enumerate() {
                if fired & (1 << i) != 0 {
                    continue;
                }
                if matches!(logic::eval(self.sys, &e.label, &vp, &vq), Ok(true)) {
                    cands.push(i);
                }
            }
            let mut out = Vec::new();
            'subset: for mask in 0..(1u64 << cands.len()) {
                let mut set: u64 = 0;
                for (j, i) in cands.iter().enumerate() {
                    if mask & (1 << j) != 0 {
                        set |= 1 << i;
                    }
                }
                // Conflicting events cannot share the step.
                for (a, b) in &conflicts {
                    if set & (1 << a) != 0 && set & (1 << b) != 0 {
                        continue 'subset;
                    }
                }
                // Every link into a firing event needs its source fired or
                // firing now (non-strict order), strictly earlier under a
                // conflict.
                for (s, tt, _) in &links {
                    if set & (1 << tt) != 0 {
                        let src_ok = fired & (1 << s) != 0
                            || (set & (1 << s) != 0 && !conflicts.contains(&ord(*s, *tt)));
                        if !src_ok {
                            continue 'subset;
                        }
                    }
                }
                // Active preservation labels must hold on this step.
                for (s, tt, label) in &links {
                    let active = fired & (1 << s) != 0
                        && fired & (1 << tt) == 0
                        && set & (1 << tt) == 0;
                    if active && !matches!(logic::eval(self.sys, label, &vp, &vq), Ok(true)) {
                        continue 'subset;
                    }
                }
                out.push(fired | set);
            }
            out
        };

        // Seed: the birth stutter step (s0, s0).
        let mut seen: BTreeSet<(oracle::ExplicitState, u64)> = BTreeSet::new();
        let mut queue: VecDeque<(oracle::ExplicitState, u64, usize)> = VecDeque::new();
        let mut parent: BTreeMap<(oracle::ExplicitState, u64), (oracle::ExplicitState, u64)> =
            BTreeMap::new();
        for f0 in assignments(0, &init, &init) {
            let key = (init.clone(), f0);
            if f0 == full {
                return Some(oracle::to_computation(self.sys, &[init], None));
            }
            if seen.insert(key.clone()) {
                queue.push_back((init.clone(), f0, 0));
            }
        }
        while let Some((s, fired, depth)) = queue.pop_front() {
            if depth >= horizon {
                continue;
            }
            for (_, next) in oracle::successors(self.sys, self.globals, &s) {
                for nf in assignments(fired, &s, &next) {
                    let key = (next.clone(), nf);
                    if seen.contains(&key) {
                        continue;
                    }
                    seen.insert(key.clone());
                    parent.insert(key.clone(), (s.clone(), fired));
                    if nf == full {
                        // Reconstruct the run.
                        let mut rev = vec![next.clone()];
                        let mut cur = key;
                        while let Some(p) = parent.get(&cur) {
                            rev.push(p.0.clone());
                            cur = p.clone();
                        }
                        rev.reverse();
                        let comp = oracle::to_computation(self.sys, &rev, None);
                        debug_assert!(crate::trace::is_member(
                            self.sys,
                            &oracle::with_birth_step(&comp),
                            t
                        ));
                        return Some(comp);
                    }
                    queue.push_back((next, nf, depth + 1));
                }
            }
        }
        None
    }

    /// Bounded lasso enumeration checked against the infinite trace.
    pub fn realize_lasso(&self, t: &InfiniteTrace) -> Option<Computation> {
        let max_len = self.opts.horizon.unwrap_or(12).min(16);
        let mut found: Option<Computation> = None;
        oracle::for_each_lasso(self.sys, self.globals, max_len, &mut |lasso| {
            if found.is_some() {
                return;
            }
            let comp = oracle::to_computation(self.sys, &lasso.states, Some(lasso.loop_start));
            if crate::trace::is_member_lasso(self.sys, &oracle::with_birth_step(&comp), t) {
                found = Some(comp);
            }
        });
        found
    }
}

fn ord(a: usize, b: usize) -> (usize, usize) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Convenience entry point: compose, run, and return verdict plus tableau.
pub fn run(
    sys: &TransitionSystem,
    globals: &[GlobalTransition],
    prop: &PropertySpec,
    opts: Options,
) -> (Verdict, Tableau) {
    let mut engine = Engine::new(sys, globals, opts);
    let verdict = engine.run(prop);
    (verdict, engine.tab)
}
