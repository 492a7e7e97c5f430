//! Synchronized concurrent transition systems: processes with control
//! locations, integer variables, local transitions, and synchronization
//! vectors composing into global transition relations.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic::{Atom, Cmp, Formula, LocIdx, Slot, Val, Valuation};

pub type VarIdx = usize;
pub type ProcIdx = usize;
pub type LocalIdx = usize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    /// The control-location variable of one process.
    Location {
        process: ProcIdx,
        locations: Vec<String>,
    },
    /// An integer variable, optionally bounded (bounds scope the oracle's
    /// explicit state space; the symbolic engine ignores them).
    Int { lo: Option<i64>, hi: Option<i64> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Process {
    pub name: String,
    /// Index of this process's location variable.
    pub var: VarIdx,
    pub init_loc: LocIdx,
}

/// A linear term over current integer variables: `sum coeff*var + konst`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinTerm {
    pub coeffs: Vec<(i64, VarIdx)>,
    pub konst: i64,
}

impl LinTerm {
    pub fn konst(k: i64) -> LinTerm {
        LinTerm {
            coeffs: vec![],
            konst: k,
        }
    }
    pub fn var_plus(var: VarIdx, k: i64) -> LinTerm {
        LinTerm {
            coeffs: vec![(1, var)],
            konst: k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalTransition {
    pub name: String,
    pub process: ProcIdx,
    pub source: LocIdx,
    pub target: LocIdx,
    /// Guard over current variables (no primed occurrences).
    pub guard: Formula,
    /// Assignments `var' := term`; unassigned integers are preserved.
    pub updates: Vec<(VarIdx, LinTerm)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncVector {
    pub name: String,
    pub members: Vec<LocalIdx>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionSystem {
    pub name: String,
    pub variables: Vec<Variable>,
    pub processes: Vec<Process>,
    pub locals: Vec<LocalTransition>,
    /// Empty means free interleaving: each local transition fires alone.
    pub syncs: Vec<SyncVector>,
    /// Initial values of the integer variables.
    pub int_inits: Vec<(VarIdx, i64)>,
}

/// A composed transition: the simultaneous firing of one sync vector,
/// with frame conditions for everything untouched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalTransition {
    pub name: String,
    pub relation: Formula,
    pub members: Vec<LocalIdx>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("sync vector `{0}` references unknown transition `{1}`")]
    UnknownTransition(String, String),
    #[error("sync vector `{0}` is empty")]
    EmptySync(String),
    #[error("sync vector `{0}` has two members in process `{1}`")]
    TwoMembersOneProcess(String, String),
    #[error("sync vector `{0}` updates variable `{1}` twice")]
    ConflictingUpdates(String, String),
    #[error("guard of transition `{0}` mentions primed variables")]
    PrimedGuard(String),
    #[error("initial condition is unsatisfiable")]
    UnsatisfiableInit,
    #[error("system has no processes")]
    NoProcesses,
    #[error("process `{0}` has an empty location set")]
    EmptyLocations(String),
}

impl TransitionSystem {
    pub fn loc_name(&self, var: VarIdx, loc: LocIdx) -> &str {
        match &self.variables[var].kind {
            VarKind::Location { locations, .. } => &locations[loc],
            VarKind::Int { .. } => "?",
        }
    }

    pub fn location_count(&self, var: VarIdx) -> Option<usize> {
        match &self.variables[var].kind {
            VarKind::Location { locations, .. } => Some(locations.len()),
            VarKind::Int { .. } => None,
        }
    }

    pub fn is_int(&self, var: VarIdx) -> bool {
        matches!(self.variables[var].kind, VarKind::Int { .. })
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarIdx> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn process_by_name(&self, name: &str) -> Option<ProcIdx> {
        self.processes.iter().position(|p| p.name == name)
    }

    pub fn local_by_name(&self, name: &str) -> Option<LocalIdx> {
        self.locals.iter().position(|t| t.name == name)
    }

    /// The initial condition as a current-state predicate: every location
    /// variable pinned to its initial location, every integer to its
    /// initial value.
    pub fn init_formula(&self) -> Formula {
        let mut atoms = Vec::new();
        for p in &self.processes {
            atoms.push(Atom::loc_eq(p.var, false, p.init_loc));
        }
        let mut f = Formula::from_atoms(atoms);
        for (v, k) in &self.int_inits {
            match Atom::lin(vec![(1, Slot::cur(*v))], Cmp::Eq, *k) {
                crate::logic::NormAtom::Atom(a) => f = f.with_atom(a),
                crate::logic::NormAtom::True => {}
                crate::logic::NormAtom::False => return Formula::ff(),
            }
        }
        f
    }

    /// The initial state as an explicit valuation.
    pub fn init_valuation(&self) -> Valuation {
        let mut v = Valuation::new();
        for p in &self.processes {
            v.set(p.var, Val::Loc(p.init_loc));
        }
        for (var, k) in &self.int_inits {
            v.set(*var, Val::Int(*k));
        }
        v
    }

    /// Structural well-formedness checks.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.processes.is_empty() {
            return Err(ModelError::NoProcesses);
        }
        let mut names: Vec<&str> = self.variables.iter().map(|v| v.name.as_str()).collect();
        names.sort();
        for w in names.windows(2) {
            if w[0] == w[1] {
                return Err(ModelError::DuplicateName(w[0].into()));
            }
        }
        let mut tnames: Vec<&str> = self.locals.iter().map(|t| t.name.as_str()).collect();
        tnames.extend(self.syncs.iter().map(|s| s.name.as_str()));
        tnames.sort();
        for w in tnames.windows(2) {
            if w[0] == w[1] {
                return Err(ModelError::DuplicateName(w[0].into()));
            }
        }
        for p in &self.processes {
            if self.location_count(p.var).unwrap_or(0) == 0 {
                return Err(ModelError::EmptyLocations(p.name.clone()));
            }
        }
        for t in &self.locals {
            let primed = t
                .guard
                .atoms()
                .iter()
                .any(|a| a.slots().iter().any(|s| s.primed));
            if primed {
                return Err(ModelError::PrimedGuard(t.name.clone()));
            }
        }
        for s in &self.syncs {
            if s.members.is_empty() {
                return Err(ModelError::EmptySync(s.name.clone()));
            }
            let mut procs: Vec<ProcIdx> = s.members.iter().map(|m| self.locals[*m].process).collect();
            procs.sort();
            for w in procs.windows(2) {
                if w[0] == w[1] {
                    return Err(ModelError::TwoMembersOneProcess(
                        s.name.clone(),
                        self.processes[w[0]].name.clone(),
                    ));
                }
            }
        }
        if !crate::logic::is_satisfiable(self, &self.init_formula()) {
            return Err(ModelError::UnsatisfiableInit);
        }
        Ok(())
    }
}

fn relation_of(
    sys: &TransitionSystem,
    name: &str,
    members: &[LocalIdx],
) -> Result<Formula, ModelError> {
    let mut f = Formula::tt();
    let mut touched_procs: Vec<ProcIdx> = Vec::new();
    let mut updated_ints: Vec<VarIdx> = Vec::new();
    for &m in members {
        let t = &sys.locals[m];
        touched_procs.push(t.process);
        let pvar = sys.processes[t.process].var;
        f = f.and(&t.guard);
        f = f.with_atom(Atom::loc_eq(pvar, false, t.source));
        f = f.with_atom(Atom::loc_eq(pvar, true, t.target));
        for (v, term) in &t.updates {
            if updated_ints.contains(v) {
                return Err(ModelError::ConflictingUpdates(
                    name.into(),
                    sys.variables[*v].name.clone(),
                ));
            }
            updated_ints.push(*v);
            // v' - term = konst
            let mut terms = vec![(1i64, Slot::post(*v))];
            for (c, x) in &term.coeffs {
                terms.push((-c, Slot::cur(*x)));
            }
            match Atom::lin(terms, Cmp::Eq, term.konst) {
                crate::logic::NormAtom::Atom(a) => f = f.with_atom(a),
                crate::logic::NormAtom::True => {}
                crate::logic::NormAtom::False => return Ok(Formula::ff()),
            }
        }
    }
    for (pi, p) in sys.processes.iter().enumerate() {
        if !touched_procs.contains(&pi) {
            f = f.with_atom(Atom::LocSame { var: p.var });
        }
    }
    for (vi, v) in sys.variables.iter().enumerate() {
        if matches!(v.kind, VarKind::Int { .. }) && !updated_ints.contains(&vi) {
            // v' = v
            match Atom::lin(
                vec![(1, Slot::post(vi)), (-1, Slot::cur(vi))],
                Cmp::Eq,
                0,
            ) {
                crate::logic::NormAtom::Atom(a) => f = f.with_atom(a),
                _ => unreachable!(),
            }
        }
    }
    Ok(f)
}

/// Composes the system into global transitions: one per sync vector, or
/// one per local transition under free interleaving. Deterministic in
/// declaration order.
pub fn compose(sys: &TransitionSystem) -> Result<Vec<GlobalTransition>, ModelError> {
    let mut out = Vec::new();
    if sys.syncs.is_empty() {
        for (i, t) in sys.locals.iter().enumerate() {
            out.push(GlobalTransition {
                name: t.name.clone(),
                relation: relation_of(sys, &t.name, &[i])?,
                members: vec![i],
            });
        }
    } else {
        for s in &sys.syncs {
            out.push(GlobalTransition {
                name: s.name.clone(),
                relation: relation_of(sys, &s.name, &s.members)?,
                members: s.members.clone(),
            });
        }
    }
    Ok(out)
}

/// Number of composed global transitions.
pub fn transition_count(sys: &TransitionSystem) -> Result<usize, ModelError> {
    Ok(compose(sys)?.len())
}
