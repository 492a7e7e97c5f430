//! Builders for the bundled benchmark families. The CLI `gen` subcommand
//! renders these to the model DSL; the checked-in corpus is exactly that
//! output.

use crate::logic::Formula;
use crate::model::{
    LinTerm, LocalTransition, Process, SyncVector, TransitionSystem, Variable, VarKind,
};

fn location_var(name: &str, process: usize, locations: &[&str]) -> Variable {
    Variable {
        name: name.into(),
        kind: VarKind::Location {
            process,
            locations: locations.iter().map(|s| s.to_string()).collect(),
        },
    }
}

fn guard_gt0(var: usize) -> Formula {
    use crate::logic::{Atom, Cmp, NormAtom, Slot};
    match Atom::lin(vec![(1, Slot::cur(var))], Cmp::Gt, 0) {
        NormAtom::Atom(a) => Formula::from_atoms([a]),
        _ => unreachable!(),
    }
}

fn guard_eq(var: usize, k: i64) -> Formula {
    use crate::logic::{Atom, Cmp, NormAtom, Slot};
    match Atom::lin(vec![(1, Slot::cur(var))], Cmp::Eq, k) {
        NormAtom::Atom(a) => Formula::from_atoms([a]),
        _ => unreachable!(),
    }
}

/// The synchronized safety family: process P0 with locations r1..r3 and
/// transitions a0: r1->r2, c0: r2->r3; process P1 with s1..s4, b1: s1->s2,
/// a1: s1->s4, c1: s2->s3; processes P2..Pn each with t1..t3, bi: t1->t2,
/// ci: t2->t3. Sync vectors a = {a0,a1}, bi = {bi}, c = {c0..cn}. The
/// global transition c requires every process at its middle location and is
/// unreachable: reaching r2 forces P1 to s4.
pub fn esparza(n: usize) -> TransitionSystem {
    esparza_family(n, false)
}

/// The mutated variant: a1 goes to s2 instead of s4, making c executable.
pub fn esparza_mutated(n: usize) -> TransitionSystem {
    esparza_family(n, true)
}

fn esparza_family(n: usize, mutated: bool) -> TransitionSystem {
    assert!(n >= 1);
    let mut variables = Vec::new();
    let mut processes = Vec::new();
    let mut locals = Vec::new();
    variables.push(location_var("loc_P0", 0, &["r1", "r2", "r3"]));
    processes.push(Process {
        name: "P0".into(),
        var: 0,
        init_loc: 0,
    });
    locals.push(LocalTransition {
        name: "a0".into(),
        process: 0,
        source: 0,
        target: 1,
        guard: Formula::tt(),
        updates: vec![],
    });
    locals.push(LocalTransition {
        name: "c0".into(),
        process: 0,
        source: 1,
        target: 2,
        guard: Formula::tt(),
        updates: vec![],
    });
    variables.push(location_var("loc_P1", 1, &["s1", "s2", "s3", "s4"]));
    processes.push(Process {
        name: "P1".into(),
        var: 1,
        init_loc: 0,
    });
    locals.push(LocalTransition {
        name: "b1".into(),
        process: 1,
        source: 0,
        target: 1,
        guard: Formula::tt(),
        updates: vec![],
    });
    locals.push(LocalTransition {
        name: "a1".into(),
        process: 1,
        source: 0,
        target: if mutated { 1 } else { 3 },
        guard: Formula::tt(),
        updates: vec![],
    });
    locals.push(LocalTransition {
        name: "c1".into(),
        process: 1,
        source: 1,
        target: 2,
        guard: Formula::tt(),
        updates: vec![],
    });
    for i in 2..=n {
        let pv = variables.len();
        variables.push(location_var(&format!("loc_P{i}"), i, &["t1", "t2", "t3"]));
        processes.push(Process {
            name: format!("P{i}"),
            var: pv,
            init_loc: 0,
        });
        locals.push(LocalTransition {
            name: format!("b{i}"),
            process: i,
            source: 0,
            target: 1,
            guard: Formula::tt(),
            updates: vec![],
        });
        locals.push(LocalTransition {
            name: format!("c{i}"),
            process: i,
            source: 1,
            target: 2,
            guard: Formula::tt(),
            updates: vec![],
        });
    }
    let mut syncs = Vec::new();
    let local_idx = |locals: &[LocalTransition], name: &str| {
        locals.iter().position(|t| t.name == name).unwrap()
    };
    syncs.push(SyncVector {
        name: "a".into(),
        members: vec![local_idx(&locals, "a0"), local_idx(&locals, "a1")],
    });
    for i in 1..=n {
        syncs.push(SyncVector {
            name: format!("b{i}"),
            members: vec![local_idx(&locals, &format!("b{i}"))],
        });
    }
    let mut c_members = vec![local_idx(&locals, "c0")];
    for i in 1..=n {
        c_members.push(local_idx(&locals, &format!("c{i}")));
    }
    syncs.push(SyncVector {
        name: "c".into(),
        members: c_members,
    });
    TransitionSystem {
        name: format!("esparza_n{n}{}", if mutated { "_mut" } else { "" }),
        variables,
        processes,
        locals,
        syncs,
        int_inits: vec![],
    }
}

/// The producer-consumer liveness family: k producers drawing from pools
/// p1..pk and feeding queues, k consumers each serving one queue in four
/// steps. Producer i's two branch transitions feed queues i and
/// (i mod k)+1. Free interleaving, 4 transitions per thread. `broken`
/// drops the consumers' decrement, making the system non-terminating.
pub fn prodcons(k: usize, pool: i64, broken: bool) -> TransitionSystem {
    assert!(k >= 1 && pool >= 1);
    let mut variables = Vec::new();
    let mut processes = Vec::new();
    let mut locals = Vec::new();
    let mut int_inits = Vec::new();
    for i in 1..=k {
        variables.push(Variable {
            name: format!("p{i}"),
            kind: VarKind::Int {
                lo: Some(0),
                hi: Some(pool),
            },
        });
        int_inits.push((variables.len() - 1, pool));
    }
    for j in 1..=k {
        variables.push(Variable {
            name: format!("q{j}"),
            kind: VarKind::Int {
                lo: Some(0),
                hi: Some(pool * k as i64),
            },
        });
        int_inits.push((variables.len() - 1, 0));
    }
    let p_var = |i: usize| i - 1;
    let q_var = |j: usize| k + j - 1;
    for i in 1..=k {
        let pidx = processes.len();
        let lv = variables.len();
        variables.push(location_var(&format!("loc_Prod{i}"), pidx, &["l1", "l2", "l3"]));
        processes.push(Process {
            name: format!("Prod{i}"),
            var: lv,
            init_loc: 0,
        });
        let q_a = q_var(i);
        let q_b = q_var((i % k) + 1);
        locals.push(LocalTransition {
            name: format!("a{i}_1"),
            process: pidx,
            source: 0,
            target: 1,
            guard: guard_gt0(p_var(i)),
            updates: vec![],
        });
        locals.push(LocalTransition {
            name: format!("a{i}_2"),
            process: pidx,
            source: 1,
            target: 2,
            guard: Formula::tt(),
            updates: vec![(q_a, LinTerm::var_plus(q_a, 1))],
        });
        locals.push(LocalTransition {
            name: format!("a{i}_3"),
            process: pidx,
            source: 1,
            target: 2,
            guard: Formula::tt(),
            updates: vec![(q_b, LinTerm::var_plus(q_b, 1))],
        });
        locals.push(LocalTransition {
            name: format!("a{i}_4"),
            process: pidx,
            source: 2,
            target: 0,
            guard: Formula::tt(),
            updates: vec![(p_var(i), LinTerm::var_plus(p_var(i), -1))],
        });
    }
    for j in 1..=k {
        let pidx = processes.len();
        let lv = variables.len();
        variables.push(location_var(
            &format!("loc_Cons{j}"),
            pidx,
            &["l1", "l2", "l3", "l4"],
        ));
        processes.push(Process {
            name: format!("Cons{j}"),
            var: lv,
            init_loc: 0,
        });
        locals.push(LocalTransition {
            name: format!("c{j}_1"),
            process: pidx,
            source: 0,
            target: 1,
            guard: guard_gt0(q_var(j)),
            updates: vec![],
        });
        locals.push(LocalTransition {
            name: format!("c{j}_2"),
            process: pidx,
            source: 1,
            target: 2,
            guard: Formula::tt(),
            updates: vec![],
        });
        locals.push(LocalTransition {
            name: format!("c{j}_3"),
            process: pidx,
            source: 2,
            target: 3,
            guard: Formula::tt(),
            updates: vec![],
        });
        locals.push(LocalTransition {
            name: format!("c{j}_4"),
            process: pidx,
            source: 3,
            target: 0,
            guard: Formula::tt(),
            updates: if broken {
                vec![]
            } else {
                vec![(q_var(j), LinTerm::var_plus(q_var(j), -1))]
            },
        });
    }
    TransitionSystem {
        name: format!(
            "prodcons_{k}_{k}{}",
            if broken { "_broken" } else { "" }
        ),
        variables,
        processes,
        locals,
        syncs: vec![],
        int_inits,
    }
}

/// A two-process lock model whose enter transition fails to take the lock,
/// so mutual exclusion is violated.
pub fn lock_broken() -> TransitionSystem {
    let mut variables = vec![Variable {
        name: "lock".into(),
        kind: VarKind::Int {
            lo: Some(0),
            hi: Some(1),
        },
    }];
    let mut processes = Vec::new();
    let mut locals = Vec::new();
    for i in 1..=2 {
        let pidx = processes.len();
        let lv = variables.len();
        variables.push(location_var(&format!("loc_P{i}"), pidx, &["N", "T", "C"]));
        processes.push(Process {
            name: format!("P{i}"),
            var: lv,
            init_loc: 0,
        });
        locals.push(LocalTransition {
            name: format!("req{i}"),
            process: pidx,
            source: 0,
            target: 1,
            guard: Formula::tt(),
            updates: vec![],
        });
        locals.push(LocalTransition {
            name: format!("enter{i}"),
            process: pidx,
            source: 1,
            target: 2,
            guard: guard_eq(0, 0),
            updates: vec![], // forgets lock := 1
        });
        locals.push(LocalTransition {
            name: format!("leave{i}"),
            process: pidx,
            source: 2,
            target: 0,
            guard: Formula::tt(),
            updates: vec![(0, LinTerm::konst(0))],
        });
    }
    TransitionSystem {
        name: "lock_broken".into(),
        variables,
        processes,
        locals,
        syncs: vec![],
        int_inits: vec![(0, 0)],
    }
}
