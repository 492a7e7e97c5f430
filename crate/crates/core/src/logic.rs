//! The conjunctive label fragment: location literals and linear integer
//! atoms over current and primed variables, with satisfiability, entailment,
//! unsat cores, evaluation, and Craig interpolation.
//!
//! Satisfiability is decided by location-set propagation plus
//! Fourier-Motzkin elimination over the rationals with integer bound
//! tightening. Tightening makes refutations sound for integers; on the
//! satisfiable side the answer is conservative (a rational solution with no
//! integer witness is reported satisfiable), which can only weaken proofs,
//! never falsify them.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{TransitionSystem, VarIdx, VarKind};

pub type LocIdx = usize;

/// A variable occurrence: current (`x`) or primed (`x'`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Slot {
    pub var: VarIdx,
    pub primed: bool,
}

impl Slot {
    pub fn cur(var: VarIdx) -> Self {
        Slot { var, primed: false }
    }
    pub fn post(var: VarIdx) -> Self {
        Slot { var, primed: true }
    }
}

/// Comparison of a linear term against a constant, normalized to `<=` / `=`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rel {
    Le,
    Eq,
}

/// One conjunct of the label language.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Atom {
    /// `loc = l` or `loc != l`, current or primed.
    Loc {
        var: VarIdx,
        primed: bool,
        eq: bool,
        loc: LocIdx,
    },
    /// Frame condition `loc' = loc`.
    LocSame { var: VarIdx },
    /// `sum of coeff*slot  rel  k`, terms sorted by slot, gcd-reduced.
    Lin {
        terms: Vec<(i64, Slot)>,
        rel: Rel,
        k: i64,
    },
}

/// Result of normalizing a candidate atom: constants fold away.
pub enum NormAtom {
    True,
    False,
    Atom(Atom),
}

/// Input comparison operators before normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl Atom {
    pub fn loc_eq(var: VarIdx, primed: bool, loc: LocIdx) -> Atom {
        Atom::Loc {
            var,
            primed,
            eq: true,
            loc,
        }
    }

    pub fn loc_ne(var: VarIdx, primed: bool, loc: LocIdx) -> Atom {
        Atom::Loc {
            var,
            primed,
            eq: false,
            loc,
        }
    }

    /// Builds a normalized linear atom `terms cmp k`.
    pub fn lin(terms: Vec<(i64, Slot)>, cmp: Cmp, k: i64) -> NormAtom {
        // Fold duplicate slots, drop zero coefficients.
        let mut map: BTreeMap<Slot, i64> = BTreeMap::new();
        for (c, s) in terms {
            *map.entry(s).or_insert(0) += c;
        }
        map.retain(|_, c| *c != 0);
        let mut terms: Vec<(i64, Slot)> = map.into_iter().map(|(s, c)| (c, s)).collect();
        // Reduce to Le/Eq over integers.
        let (rel, mut k) = match cmp {
            Cmp::Le => (Rel::Le, k),
            Cmp::Lt => (Rel::Le, k - 1),
            Cmp::Eq => (Rel::Eq, k),
            Cmp::Ge | Cmp::Gt => {
                for t in &mut terms {
                    t.0 = -t.0;
                }
                (Rel::Le, if cmp == Cmp::Ge { -k } else { -k - 1 })
            }
        };
        if terms.is_empty() {
            return match rel {
                Rel::Le => {
                    if k >= 0 {
                        NormAtom::True
                    } else {
                        NormAtom::False
                    }
                }
                Rel::Eq => {
                    if k == 0 {
                        NormAtom::True
                    } else {
                        NormAtom::False
                    }
                }
            };
        }
        // Canonical sign for equalities: leading coefficient positive.
        if rel == Rel::Eq && terms[0].0 < 0 {
            for t in &mut terms {
                t.0 = -t.0;
            }
            k = -k;
        }
        // gcd reduction with integer tightening on <= bounds.
        let g = terms.iter().fold(0i64, |g, (c, _)| gcd(g, *c));
        if g > 1 {
            match rel {
                Rel::Le => {
                    for t in &mut terms {
                        t.0 /= g;
                    }
                    k = k.div_euclid(g);
                }
                Rel::Eq => {
                    if k % g != 0 {
                        return NormAtom::False;
                    }
                    for t in &mut terms {
                        t.0 /= g;
                    }
                    k /= g;
                }
            }
        }
        terms.sort_by_key(|(_, s)| *s);
        NormAtom::Atom(Atom::Lin { terms, rel, k })
    }

    /// Slots mentioned by this atom. `LocSame` touches both polarities.
    pub fn slots(&self) -> Vec<Slot> {
        match self {
            Atom::Loc { var, primed, .. } => vec![Slot {
                var: *var,
                primed: *primed,
            }],
            Atom::LocSame { var } => vec![Slot::cur(*var), Slot::post(*var)],
            Atom::Lin { terms, .. } => terms.iter().map(|(_, s)| *s).collect(),
        }
    }

    pub fn vars(&self) -> Vec<VarIdx> {
        self.slots().into_iter().map(|s| s.var).collect()
    }

    fn map_slots(&self, f: impl Fn(Slot) -> Slot) -> Atom {
        match self {
            Atom::Loc {
                var,
                primed,
                eq,
                loc,
            } => {
                let s = f(Slot {
                    var: *var,
                    primed: *primed,
                });
                Atom::Loc {
                    var: s.var,
                    primed: s.primed,
                    eq: *eq,
                    loc: *loc,
                }
            }
            Atom::LocSame { var } => Atom::LocSame { var: *var },
            Atom::Lin { terms, rel, k } => {
                let mut terms: Vec<(i64, Slot)> =
                    terms.iter().map(|(c, s)| (*c, f(*s))).collect();
                terms.sort_by_key(|(_, s)| *s);
                Atom::Lin {
                    terms,
                    rel: *rel,
                    k: *k,
                }
            }
        }
    }
}

/// A conjunction of atoms; the empty conjunction is `true`, and `false` is
/// a canonical marker with no atoms.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Formula {
    contradiction: bool,
    atoms: Vec<Atom>,
}

impl Formula {
    pub fn tt() -> Formula {
        Formula {
            contradiction: false,
            atoms: vec![],
        }
    }

    pub fn ff() -> Formula {
        Formula {
            contradiction: true,
            atoms: vec![],
        }
    }

    pub fn from_atoms(atoms: impl IntoIterator<Item = Atom>) -> Formula {
        let mut v: Vec<Atom> = atoms.into_iter().collect();
        v.sort();
        v.dedup();
        Formula {
            contradiction: false,
            atoms: v,
        }
    }

    pub fn from_norm(atoms: impl IntoIterator<Item = NormAtom>) -> Formula {
        let mut v = Vec::new();
        for a in atoms {
            match a {
                NormAtom::True => {}
                NormAtom::False => return Formula::ff(),
                NormAtom::Atom(a) => v.push(a),
            }
        }
        Formula::from_atoms(v)
    }

    pub fn is_true(&self) -> bool {
        !self.contradiction && self.atoms.is_empty()
    }

    pub fn is_false(&self) -> bool {
        self.contradiction
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn and(&self, other: &Formula) -> Formula {
        if self.contradiction || other.contradiction {
            return Formula::ff();
        }
        Formula::from_atoms(self.atoms.iter().chain(other.atoms.iter()).cloned())
    }

    pub fn with_atom(&self, atom: Atom) -> Formula {
        if self.contradiction {
            return Formula::ff();
        }
        Formula::from_atoms(self.atoms.iter().cloned().chain(std::iter::once(atom)))
    }

    pub fn vars(&self) -> BTreeSet<VarIdx> {
        self.atoms.iter().flat_map(|a| a.vars()).collect()
    }

    /// Renames every current slot to primed. The input must be a state
    /// predicate (current variables only).
    pub fn prime(&self) -> Formula {
        debug_assert!(self
            .atoms
            .iter()
            .all(|a| a.slots().iter().all(|s| !s.primed)));
        if self.contradiction {
            return Formula::ff();
        }
        Formula::from_atoms(self.atoms.iter().map(|a| {
            a.map_slots(|s| Slot {
                var: s.var,
                primed: true,
            })
        }))
    }

    /// Renames every primed slot to current. The input must mention primed
    /// variables only.
    pub fn unprime(&self) -> Formula {
        debug_assert!(self
            .atoms
            .iter()
            .all(|a| a.slots().iter().all(|s| s.primed)));
        if self.contradiction {
            return Formula::ff();
        }
        Formula::from_atoms(self.atoms.iter().map(|a| {
            a.map_slots(|s| Slot {
                var: s.var,
                primed: false,
            })
        }))
    }

    /// Atoms constraining only current variables, as a state predicate.
    pub fn current_part(&self) -> Formula {
        if self.contradiction {
            return Formula::ff();
        }
        Formula::from_atoms(
            self.atoms
                .iter()
                .filter(|a| {
                    !matches!(a, Atom::LocSame { .. })
                        && a.slots().iter().all(|s| !s.primed)
                })
                .cloned(),
        )
    }

    /// Atoms constraining only primed variables, renamed to a current-state
    /// predicate (the implied post-state region).
    pub fn post_part(&self) -> Formula {
        if self.contradiction {
            return Formula::ff();
        }
        Formula::from_atoms(
            self.atoms
                .iter()
                .filter(|a| {
                    !matches!(a, Atom::LocSame { .. })
                        && a.slots().iter().all(|s| s.primed)
                })
                .map(|a| {
                    a.map_slots(|s| Slot {
                        var: s.var,
                        primed: false,
                    })
                }),
        )
    }
}

/// A concrete value of a variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Val {
    Loc(LocIdx),
    Int(i64),
}

/// A total assignment of values to (a subset of) the system's variables.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Valuation {
    pub vals: BTreeMap<VarIdx, Val>,
}

impl Valuation {
    pub fn new() -> Self {
        Valuation::default()
    }
    pub fn set(&mut self, var: VarIdx, v: Val) {
        self.vals.insert(var, v);
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LogicError {
    #[error("valuation is missing variable {0}")]
    MissingVariable(String),
    #[error("variable {0} has the wrong kind for this atom")]
    KindMismatch(String),
    #[error("unsat_core called on a satisfiable conjunction")]
    SatisfiableCore,
    #[error("interpolate called on a satisfiable conjunction")]
    SatisfiableInterpolation,
    #[error("no interpolant exists in the conjunctive fragment")]
    NoInterpolant,
}

fn lookup_loc(sys: &TransitionSystem, v: &Valuation, var: VarIdx) -> Result<LocIdx, LogicError> {
    match v.vals.get(&var) {
        Some(Val::Loc(l)) => Ok(*l),
        Some(Val::Int(_)) => Err(LogicError::KindMismatch(sys.variables[var].name.clone())),
        None => Err(LogicError::MissingVariable(
            sys.variables[var].name.clone(),
        )),
    }
}

fn lookup_int(sys: &TransitionSystem, v: &Valuation, var: VarIdx) -> Result<i64, LogicError> {
    match v.vals.get(&var) {
        Some(Val::Int(i)) => Ok(*i),
        Some(Val::Loc(_)) => Err(LogicError::KindMismatch(sys.variables[var].name.clone())),
        None => Err(LogicError::MissingVariable(
            sys.variables[var].name.clone(),
        )),
    }
}

/// Evaluates a transition predicate on a step: current variables read from
/// `pre`, primed from `post`.
pub fn eval(
    sys: &TransitionSystem,
    f: &Formula,
    pre: &Valuation,
    post: &Valuation,
) -> Result<bool, LogicError> {
    if f.is_false() {
        return Ok(false);
    }
    for atom in f.atoms() {
        if !eval_atom(sys, atom, pre, post)? {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn eval_atom(
    sys: &TransitionSystem,
    atom: &Atom,
    pre: &Valuation,
    post: &Valuation,
) -> Result<bool, LogicError> {
    match atom {
        Atom::Loc {
            var,
            primed,
            eq,
            loc,
        } => {
            let v = lookup_loc(sys, if *primed { post } else { pre }, *var)?;
            Ok(if *eq { v == *loc } else { v != *loc })
        }
        Atom::LocSame { var } => {
            Ok(lookup_loc(sys, pre, *var)? == lookup_loc(sys, post, *var)?)
        }
        Atom::Lin { terms, rel, k } => {
            let mut sum: i64 = 0;
            for (c, s) in terms {
                let v = lookup_int(sys, if s.primed { post } else { pre }, s.var)?;
                sum += c * v;
            }
            Ok(match rel {
                Rel::Le => sum <= *k,
                Rel::Eq => sum == *k,
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Satisfiability
// ---------------------------------------------------------------------------

type Row = (BTreeMap<Slot, i128>, i128);

fn row_of(terms: &[(i64, Slot)], k: i64) -> Row {
    let mut m = BTreeMap::new();
    for (c, s) in terms {
        m.insert(*s, *c as i128);
    }
    (m, k as i128)
}

fn gcd128(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Normalizes a `<= k` row in place: gcd reduction with floor tightening.
/// Returns false if the row is a plain contradiction (0 <= negative).
fn norm_le(row: &mut Row) -> bool {
    row.0.retain(|_, c| *c != 0);
    if row.0.is_empty() {
        return row.1 >= 0;
    }
    let g = row.0.values().fold(0i128, |g, c| gcd128(g, *c));
    if g > 1 {
        for c in row.0.values_mut() {
            *c /= g;
        }
        row.1 = row.1.div_euclid(g);
    }
    true
}

/// Decides unsatisfiability of a conjunction of integer rows. `eqs` are
/// equalities, `les` are upper-bound rows. Exact on gcd-visible
/// contradictions; otherwise conservatively "satisfiable".
fn int_unsat(mut eqs: Vec<Row>, mut les: Vec<Row>) -> bool {
    // Substitution phase: use unit-coefficient equalities as pivots.
    loop {
        let mut progress = false;
        let mut i = 0;
        while i < eqs.len() {
            eqs[i].0.retain(|_, c| *c != 0);
            if eqs[i].0.is_empty() {
                if eqs[i].1 != 0 {
                    return true;
                }
                eqs.remove(i);
                continue;
            }
            let g = eqs[i].0.values().fold(0i128, |g, c| gcd128(g, *c));
            if eqs[i].1 % g != 0 {
                return true;
            }
            if let Some((&slot, &coef)) = eqs[i].0.iter().find(|(_, c)| c.abs() == 1) {
                // slot = (k - rest) / coef with coef = +-1: substitute.
                let (mut expr, k) = eqs.remove(i);
                expr.remove(&slot);
                // coef*slot + expr = k  =>  slot = coef*(k - expr)
                let subst = move |row: &mut Row| {
                    if let Some(c) = row.0.remove(&slot) {
                        for (s, e) in &expr {
                            *row.0.entry(*s).or_insert(0) -= c * coef * e;
                        }
                        row.1 -= c * coef * k;
                    }
                };
                for r in eqs.iter_mut() {
                    subst(r);
                }
                for r in les.iter_mut() {
                    subst(r);
                }
                progress = true;
                break;
            }
            i += 1;
        }
        if !progress {
            break;
        }
    }
    // Remaining equalities without unit pivots: split into two bounds.
    for (m, k) in eqs {
        les.push((m.clone(), k));
        les.push((m.iter().map(|(s, c)| (*s, -c)).collect(), -k));
    }
    // Fourier-Motzkin elimination.
    let mut rows: BTreeSet<Row> = BTreeSet::new();
    for mut r in les {
        if !norm_le(&mut r) {
            return true;
        }
        if !r.0.is_empty() {
            rows.insert(r);
        }
    }
    loop {
        let Some(slot) = rows.iter().flat_map(|(m, _)| m.keys()).next().copied() else {
            return false;
        };
        let (with, without): (Vec<Row>, Vec<Row>) =
            rows.into_iter().partition(|(m, _)| m.contains_key(&slot));
        let mut uppers = Vec::new();
        let mut lowers = Vec::new();
        for r in with {
            if r.0[&slot] > 0 {
                uppers.push(r);
            } else {
                lowers.push(r);
            }
        }
        rows = without.into_iter().collect();
        for (um, uk) in &uppers {
            for (lm, lk) in &lowers {
                let a = um[&slot];
                let b = -lm[&slot];
                // b*(upper) + a*(lower): slot cancels.
                let mut m: BTreeMap<Slot, i128> = BTreeMap::new();
                for (s, c) in um {
                    *m.entry(*s).or_insert(0) += b * c;
                }
                for (s, c) in lm {
                    *m.entry(*s).or_insert(0) += a * c;
                }
                m.remove(&slot);
                let mut row = (m, b * uk + a * lk);
                if !norm_le(&mut row) {
                    return true;
                }
                if !row.0.is_empty() {
                    rows.insert(row);
                }
            }
        }
    }
}

fn sat_atoms(sys: &TransitionSystem, atoms: &[&Atom]) -> bool {
    // Location propagation: per-slot allowed sets, then frame conditions.
    let mut allowed: BTreeMap<Slot, u128> = BTreeMap::new();
    let mut same: BTreeSet<VarIdx> = BTreeSet::new();
    let full = |sys: &TransitionSystem, var: VarIdx| -> u128 {
        match &sys.variables[var].kind {
            VarKind::Location { locations, .. } => (1u128 << locations.len()) - 1,
            VarKind::Int { .. } => 0,
        }
    };
    let mut eqs: Vec<Row> = Vec::new();
    let mut les: Vec<Row> = Vec::new();
    for atom in atoms {
        match atom {
            Atom::Loc {
                var,
                primed,
                eq,
                loc,
            } => {
                let slot = Slot {
                    var: *var,
                    primed: *primed,
                };
                let e = allowed.entry(slot).or_insert_with(|| full(sys, *var));
                if *eq {
                    *e &= 1u128 << loc;
                } else {
                    *e &= !(1u128 << loc);
                }
            }
            Atom::LocSame { var } => {
                allowed
                    .entry(Slot::cur(*var))
                    .or_insert_with(|| full(sys, *var));
                allowed
                    .entry(Slot::post(*var))
                    .or_insert_with(|| full(sys, *var));
                same.insert(*var);
            }
            Atom::Lin { terms, rel, k } => match rel {
                Rel::Eq => eqs.push(row_of(terms, *k)),
                Rel::Le => les.push(row_of(terms, *k)),
            },
        }
    }
    for var in same {
        let joint = allowed[&Slot::cur(var)] & allowed[&Slot::post(var)];
        allowed.insert(Slot::cur(var), joint);
        allowed.insert(Slot::post(var), joint);
    }
    if allowed.values().any(|m| *m == 0) {
        return false;
    }
    !int_unsat(eqs, les)
}

/// Satisfiability of a conjunctive formula.
pub fn is_satisfiable(sys: &TransitionSystem, f: &Formula) -> bool {
    if f.is_false() {
        return false;
    }
    sat_atoms(sys, &f.atoms().iter().collect::<Vec<_>>())
}

pub fn and_satisfiable(sys: &TransitionSystem, a: &Formula, b: &Formula) -> bool {
    if a.is_false() || b.is_false() {
        return false;
    }
    sat_atoms(
        sys,
        &a.atoms().iter().chain(b.atoms().iter()).collect::<Vec<_>>(),
    )
}

/// The complement of an atom, when expressible as atoms whose disjunction
/// is the negation. `Loc` and `Le` complements are single atoms; `Eq`
/// splits into two bounds; `LocSame` has no atom complement (handled by
/// enumeration in `implies`).
fn complements(atom: &Atom) -> Option<Vec<Atom>> {
    match atom {
        Atom::Loc {
            var,
            primed,
            eq,
            loc,
        } => Some(vec![Atom::Loc {
            var: *var,
            primed: *primed,
            eq: !eq,
            loc: *loc,
        }]),
        Atom::LocSame { .. } => None,
        Atom::Lin { terms, rel, k } => {
            let neg: Vec<(i64, Slot)> = terms.iter().map(|(c, s)| (-c, *s)).collect();
            match rel {
                // not (t <= k)  <=>  t >= k+1  <=>  -t <= -k-1
                Rel::Le => match Atom::lin(neg, Cmp::Le, -k - 1) {
                    NormAtom::Atom(a) => Some(vec![a]),
                    _ => None,
                },
                // not (t = k)  <=>  t <= k-1  or  t >= k+1
                Rel::Eq => {
                    let lo = Atom::lin(terms.clone(), Cmp::Le, k - 1);
                    let hi = Atom::lin(neg, Cmp::Le, -k - 1);
                    match (lo, hi) {
                        (NormAtom::Atom(a), NormAtom::Atom(b)) => Some(vec![a, b]),
                        _ => None,
                    }
                }
            }
        }
    }
}

/// The negation of an atom when it is again a single atom (`Loc` literals
/// and `<=` bounds). `=` atoms and frame conditions have no single-atom
/// complement.
pub fn complement_single(atom: &Atom) -> Option<Atom> {
    match complements(atom) {
        Some(v) if v.len() == 1 => Some(v.into_iter().next().unwrap()),
        _ => None,
    }
}

/// The greatest `lo` with `f => var >= lo`, from the projection of `f`'s
/// linear atoms onto the variable's current slot.
pub fn implied_lower_bound(sys: &TransitionSystem, f: &Formula, var: VarIdx) -> Option<i64> {
    let _ = sys;
    if f.is_false() {
        return None;
    }
    let target = Slot::cur(var);
    let atoms = project_lin(f.atoms(), |s| s == target)?;
    let mut best: Option<i64> = None;
    for a in &atoms {
        if let Atom::Lin { terms, rel, k } = a {
            if terms.len() != 1 || terms[0].1 != target {
                continue;
            }
            let lo = match (terms[0].0, rel) {
                (-1, Rel::Le) => Some(-k),
                (1, Rel::Eq) => Some(*k),
                _ => None,
            };
            if let Some(lo) = lo {
                best = Some(best.map_or(lo, |b: i64| b.max(lo)));
            }
        }
    }
    best
}

/// Entailment: `a` implies `b` iff for every atom of `b`, `a` together with
/// the atom's negation is unsatisfiable.
pub fn implies(sys: &TransitionSystem, a: &Formula, b: &Formula) -> bool {
    if a.is_false() {
        return true;
    }
    if b.is_false() {
        return !is_satisfiable(sys, a);
    }
    for atom in b.atoms() {
        match complements(atom) {
            Some(cases) => {
                for c in cases {
                    if is_satisfiable(sys, &a.with_atom(c)) {
                        return false;
                    }
                }
            }
            None => {
                // LocSame: a must force loc' = loc for every feasible value.
                let Atom::LocSame { var } = atom else {
                    unreachable!()
                };
                let dom = match &sys.variables[*var].kind {
                    VarKind::Location { locations, .. } => locations.len(),
                    VarKind::Int { .. } => return false,
                };
                for v in 0..dom {
                    let probe = a
                        .with_atom(Atom::loc_eq(*var, false, v))
                        .with_atom(Atom::loc_ne(*var, true, v));
                    if is_satisfiable(sys, &probe) {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Delete-based minimization: a subset of the input that is still
/// unsatisfiable and minimal under single-atom removal.
pub fn unsat_core(sys: &TransitionSystem, atoms: &[Atom]) -> Result<Vec<Atom>, LogicError> {
    let all: Vec<&Atom> = atoms.iter().collect();
    if sat_atoms(sys, &all) {
        return Err(LogicError::SatisfiableCore);
    }
    let mut keep: Vec<bool> = vec![true; atoms.len()];
    for i in 0..atoms.len() {
        keep[i] = false;
        let subset: Vec<&Atom> = atoms
            .iter()
            .enumerate()
            .filter(|(j, _)| keep[*j])
            .map(|(_, a)| a)
            .collect();
        if sat_atoms(sys, &subset) {
            keep[i] = true;
        }
    }
    Ok(atoms
        .iter()
        .enumerate()
        .filter(|(j, _)| keep[*j])
        .map(|(_, a)| a.clone())
        .collect())
}

/// Projects the linear atoms of `rows` onto the shared slots by
/// Fourier-Motzkin elimination, returning implied atoms.
fn project_lin(atoms: &[Atom], keep: impl Fn(Slot) -> bool) -> Option<Vec<Atom>> {
    let mut eqs: Vec<Row> = Vec::new();
    let mut les: Vec<Row> = Vec::new();
    for a in atoms {
        if let Atom::Lin { terms, rel, k } = a {
            match rel {
                Rel::Eq => eqs.push(row_of(terms, *k)),
                Rel::Le => les.push(row_of(terms, *k)),
            }
        }
    }
    // Substitute away eliminable slots using unit equalities first.
    loop {
        let mut target = None;
        'outer: for (i, (m, _)) in eqs.iter().enumerate() {
            for (s, c) in m {
                if !keep(*s) && c.abs() == 1 {
                    target = Some((i, *s));
                    break 'outer;
                }
            }
        }
        let Some((i, slot)) = target else { break };
        let (mut expr, k) = eqs.remove(i);
        let coef = expr.remove(&slot).unwrap();
        let subst = |row: &mut Row| {
            if let Some(c) = row.0.remove(&slot) {
                for (s, e) in &expr {
                    *row.0.entry(*s).or_insert(0) -= c * coef * e;
                }
                row.1 -= c * coef * k;
            }
        };
        for r in eqs.iter_mut() {
            subst(r);
        }
        for r in les.iter_mut() {
            subst(r);
        }
    }
    for (m, k) in eqs {
        les.push((m.clone(), k));
        les.push((m.iter().map(|(s, c)| (*s, -c)).collect(), -k));
    }
    // Eliminate remaining non-shared slots pairwise.
    loop {
        let slot = les
            .iter()
            .flat_map(|(m, _)| m.keys())
            .find(|s| !keep(**s))
            .copied();
        let Some(slot) = slot else { break };
        let (with, without): (Vec<Row>, Vec<Row>) =
            les.into_iter().partition(|(m, _)| m.get(&slot).copied().unwrap_or(0) != 0);
        les = without;
        let mut uppers = Vec::new();
        let mut lowers = Vec::new();
        for r in with {
            if r.0[&slot] > 0 {
                uppers.push(r);
            } else {
                lowers.push(r);
            }
        }
        for (um, uk) in &uppers {
            for (lm, lk) in &lowers {
                let a = um[&slot];
                let b = -lm[&slot];
                let mut m: BTreeMap<Slot, i128> = BTreeMap::new();
                for (s, c) in um {
                    *m.entry(*s).or_insert(0) += b * c;
                }
                for (s, c) in lm {
                    *m.entry(*s).or_insert(0) += a * c;
                }
                m.remove(&slot);
                les.push((m, b * uk + a * lk));
            }
        }
    }
    // Back to i64 atoms.
    let mut out = Vec::new();
    for (m, k) in les {
        let mut terms = Vec::new();
        for (s, c) in m {
            if c == 0 {
                continue;
            }
            let c = i64::try_from(c).ok()?;
            terms.push((c, s));
        }
        let k = i64::try_from(k).ok()?;
        match Atom::lin(terms, Cmp::Le, k) {
            NormAtom::True => {}
            NormAtom::False => out.clear(), // contradiction projects to false; caller verifies
            NormAtom::Atom(a) => out.push(a),
        }
    }
    Some(out)
}

/// Craig interpolation for the conjunctive fragment.
///
/// Returns `I` with `a => I`, `I /\ b` unsatisfiable, and `I` mentioning
/// only variables shared by `a` and `b`. Construction: minimize an unsat
/// core of `a /\ b`, then eliminate a-local variables from the a-part
/// (location projection, Fourier-Motzkin). Location contradictions prefer
/// the negated b-side literal.
pub fn interpolate(
    sys: &TransitionSystem,
    a: &Formula,
    b: &Formula,
) -> Result<Formula, LogicError> {
    if and_satisfiable(sys, a, b) {
        return Err(LogicError::SatisfiableInterpolation);
    }
    if !is_satisfiable(sys, a) {
        return Ok(Formula::ff());
    }
    if !is_satisfiable(sys, b) {
        return Ok(Formula::tt());
    }
    let a_atoms: BTreeSet<&Atom> = a.atoms().iter().collect();
    let mut tagged: Vec<(Atom, bool)> = a.atoms().iter().map(|x| (x.clone(), true)).collect();
    tagged.extend(
        b.atoms()
            .iter()
            .filter(|x| !a_atoms.contains(x))
            .map(|x| (x.clone(), false)),
    );
    let flat: Vec<Atom> = tagged.iter().map(|(x, _)| x.clone()).collect();
    let core = unsat_core(sys, &flat)?;
    let from_a = |atom: &Atom| -> bool {
        tagged
            .iter()
            .find(|(x, _)| x == atom)
            .map(|(_, t)| *t)
            .unwrap_or(false)
    };
    let a_core: Vec<Atom> = core.iter().filter(|x| from_a(x)).cloned().collect();
    let b_core: Vec<Atom> = core.iter().filter(|x| !from_a(x)).cloned().collect();
    if b_core.is_empty() {
        return Ok(Formula::ff());
    }
    if a_core.is_empty() {
        return Ok(Formula::tt());
    }
    let shared: BTreeSet<VarIdx> = a.vars().intersection(&b.vars()).copied().collect();

    let mut candidates: Vec<Formula> = Vec::new();
    // Preferred form for location clashes: the negated b-side literal.
    if let Some(Atom::Loc {
        var,
        primed,
        eq: true,
        loc,
    }) = b_core
        .iter()
        .find(|x| matches!(x, Atom::Loc { eq: true, .. }))
    {
        candidates.push(Formula::from_atoms(vec![Atom::loc_ne(*var, *primed, *loc)]));
    }
    // Projection of the a-part onto the shared vocabulary.
    {
        let locs: Vec<Atom> = a_core
            .iter()
            .filter(|x| {
                !matches!(x, Atom::Lin { .. }) && x.vars().iter().all(|v| shared.contains(v))
            })
            .cloned()
            .collect();
        if let Some(lins) = project_lin(&a_core, |s| shared.contains(&s.var)) {
            candidates.push(Formula::from_atoms(locs.into_iter().chain(lins)));
        }
    }
    // Raw a-part, when already inside the shared vocabulary.
    if a_core.iter().all(|x| x.vars().iter().all(|v| shared.contains(v))) {
        candidates.push(Formula::from_atoms(a_core.clone()));
    }

    for cand in candidates {
        let vocab_ok = cand.vars().iter().all(|v| shared.contains(v));
        if vocab_ok && implies(sys, a, &cand) && !and_satisfiable(sys, &cand, b) {
            debug_assert!(implies(sys, a, &cand));
            debug_assert!(!and_satisfiable(sys, &cand, b));
            return Ok(cand);
        }
    }
    Err(LogicError::NoInterpolant)
}

// ---------------------------------------------------------------------------
// Rendering (stable across versions; used by DOT/JSON golden files)
// ---------------------------------------------------------------------------

fn slot_name(sys: &TransitionSystem, s: Slot) -> String {
    let n = &sys.variables[s.var].name;
    if s.primed {
        format!("{n}'")
    } else {
        n.clone()
    }
}

pub fn render_atom(sys: &TransitionSystem, atom: &Atom) -> String {
    match atom {
        Atom::Loc {
            var,
            primed,
            eq,
            loc,
        } => {
            let v = slot_name(
                sys,
                Slot {
                    var: *var,
                    primed: *primed,
                },
            );
            let l = sys.loc_name(*var, *loc);
            format!("{v} {} {l}", if *eq { "=" } else { "!=" })
        }
        Atom::LocSame { var } => {
            let n = &sys.variables[*var].name;
            format!("{n}' = {n}")
        }
        Atom::Lin { terms, rel, k } => {
            // Pretty forms for the common shapes.
            if terms.len() == 1 {
                let (c, s) = terms[0];
                let n = slot_name(sys, s);
                match (c, rel) {
                    (1, Rel::Le) => return format!("{n} <= {k}"),
                    (-1, Rel::Le) => return format!("{n} >= {}", -k),
                    (1, Rel::Eq) => return format!("{n} = {k}"),
                    _ => {}
                }
            }
            if terms.len() == 2 {
                let pos: Vec<_> = terms.iter().filter(|(c, _)| *c == 1).collect();
                let neg: Vec<_> = terms.iter().filter(|(c, _)| *c == -1).collect();
                if pos.len() == 1 && neg.len() == 1 {
                    let a = slot_name(sys, pos[0].1);
                    let b = slot_name(sys, neg[0].1);
                    let op = match rel {
                        Rel::Le => "<=",
                        Rel::Eq => "=",
                    };
                    return match k.cmp(&0) {
                        std::cmp::Ordering::Equal => format!("{a} {op} {b}"),
                        std::cmp::Ordering::Greater => format!("{a} {op} {b} + {k}"),
                        std::cmp::Ordering::Less => format!("{a} {op} {b} - {}", -k),
                    };
                }
            }
            let mut out = String::new();
            for (i, (c, s)) in terms.iter().enumerate() {
                let n = slot_name(sys, *s);
                if i == 0 {
                    match *c {
                        1 => out.push_str(&n),
                        -1 => out.push_str(&format!("-{n}")),
                        c => out.push_str(&format!("{c}*{n}")),
                    }
                } else if *c >= 0 {
                    if *c == 1 {
                        out.push_str(&format!(" + {n}"));
                    } else {
                        out.push_str(&format!(" + {c}*{n}"));
                    }
                } else if *c == -1 {
                    out.push_str(&format!(" - {n}"));
                } else {
                    out.push_str(&format!(" - {}*{n}", -c));
                }
            }
            let op = match rel {
                Rel::Le => "<=",
                Rel::Eq => "=",
            };
            format!("{out} {op} {k}")
        }
    }
}

pub fn render_formula(sys: &TransitionSystem, f: &Formula) -> String {
    if f.is_false() {
        return "false".into();
    }
    if f.is_true() {
        return "true".into();
    }
    f.atoms()
        .iter()
        .map(|a| render_atom(sys, a))
        .collect::<Vec<_>>()
        .join(" & ")
}
