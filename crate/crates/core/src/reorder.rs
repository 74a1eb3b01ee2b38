//! Body reordering. A function atom must sit at the first position where
//! either its id argument is bound (condition a) or all its other
//! arguments are (condition b). The base placement picks one standard
//! atom at a time; function atoms are promoted the moment a condition
//! holds, which the weight function encodes as -MAXWEIGHT against
//! +MAXWEIGHT for not-yet-placeable ones.

use std::collections::HashSet;

use crate::flat::{FlatLiteral, FlatProgram, FlatRule, FlatTerm, FunctionAtom, PredicateTables, Provenance};
use crate::term_store::TermStore;

pub const MAXWEIGHT: i64 = i64::MAX;

/// Weight block for one bound argument; table sizes stay far below it.
const BOUND_ARG: i64 = 1 << 40;

/// Variables known bound after a body prefix. Constants and interned ids
/// are always bound.
#[derive(Debug, Clone, Default)]
pub struct BoundSet {
    vars: HashSet<String>,
}

impl BoundSet {
    pub fn new() -> BoundSet {
        BoundSet::default()
    }

    pub fn is_bound(&self, t: &FlatTerm) -> bool {
        match t {
            FlatTerm::Const(_) | FlatTerm::Id(_) => true,
            FlatTerm::Var(v) => self.vars.contains(v),
        }
    }

    pub fn bind(&mut self, t: &FlatTerm) {
        if let FlatTerm::Var(v) = t {
            self.vars.insert(v.clone());
        }
    }

    /// Adds everything the literal binds once matched: positive atoms
    /// and function atoms bind all their variables; an aggregate binds
    /// its bound variable; negative literals bind nothing.
    pub fn absorb(&mut self, lit: &FlatLiteral) {
        match lit {
            FlatLiteral::Pos(a) => {
                for t in &a.args {
                    self.bind(t);
                }
            }
            FlatLiteral::Function(fa) => {
                self.bind(&fa.id_arg);
                for t in &fa.args {
                    self.bind(t);
                }
            }
            FlatLiteral::Aggregate(agg) => self.bind(&agg.bound),
            FlatLiteral::Neg(_) => {}
        }
    }
}

/// Condition a or b for a function atom under the given bound set.
pub fn placement_condition(fa: &FunctionAtom, bound: &BoundSet) -> bool {
    bound.is_bound(&fa.id_arg) || fa.args.iter().all(|t| bound.is_bound(t))
}

/// Heuristic weight; lower places earlier. Function atoms score
/// -MAXWEIGHT as soon as condition a or b holds and +MAXWEIGHT before
/// that; standard literals score strictly in between, preferring more
/// bound arguments and then smaller tables. Literals that must wait for
/// bindings (negatives, aggregates with unbound globals) score next to
/// +MAXWEIGHT so they are picked only when eligible.
pub fn atom_weight(lit: &FlatLiteral, bound: &BoundSet, tables: &PredicateTables) -> i64 {
    match lit {
        FlatLiteral::Function(fa) => {
            if fa.provenance == Provenance::HeadOnly {
                // Resolved at commit time, parked at the very end.
                MAXWEIGHT
            } else if placement_condition(fa, bound) {
                -MAXWEIGHT
            } else {
                MAXWEIGHT
            }
        }
        FlatLiteral::Pos(a) => {
            let bound_args = a.args.iter().filter(|t| bound.is_bound(t)).count() as i64;
            let size = tables.size_of(&a.predicate) as i64;
            -bound_args * BOUND_ARG + size
        }
        FlatLiteral::Neg(a) => {
            if a.args.iter().all(|t| bound.is_bound(t)) {
                let size = tables.size_of(&a.predicate) as i64;
                -(a.args.len() as i64) * BOUND_ARG + size
            } else {
                MAXWEIGHT - 1
            }
        }
        FlatLiteral::Aggregate(agg) => {
            if agg.global_vars().iter().all(|v| bound.vars.contains(v)) {
                let size = tables.size_of(&agg.atom.predicate) as i64;
                -(agg.atom.args.len() as i64) * BOUND_ARG + size
            } else {
                MAXWEIGHT - 1
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no valid placement for `{literal}`: its variables can never all be bound")]
pub struct PlacementError {
    pub literal: String,
}

/// Reorders one body in place. Head-only function atoms go to the very
/// end, in dependency order (inner applications first), everything else
/// through the weighted first-fit placement.
pub fn reorder_body(
    fr: &mut FlatRule,
    tables: &PredicateTables,
    store: &TermStore,
) -> Result<(), PlacementError> {
    let body = std::mem::take(&mut fr.body);
    let (parked, mut open): (Vec<FlatLiteral>, Vec<FlatLiteral>) = body.into_iter().partition(
        |l| matches!(l, FlatLiteral::Function(fa) if fa.provenance == Provenance::HeadOnly),
    );

    let mut out = Vec::with_capacity(open.len() + parked.len());
    let mut bound = BoundSet::new();
    while !open.is_empty() {
        let mut best: Option<(usize, i64)> = None;
        for (i, lit) in open.iter().enumerate() {
            let w = atom_weight(lit, &bound, tables);
            if best.is_none_or(|(_, bw)| w < bw) {
                best = Some((i, w));
            }
        }
        let (i, w) = best.expect("non-empty open list");
        if w >= MAXWEIGHT - 1 {
            // Only literals whose conditions can never be satisfied are
            // left; flatten-produced rules cannot get here, hand-written
            // flat input can.
            return Err(PlacementError { literal: open[i].text(store) });
        }
        let lit = open.remove(i);
        bound.absorb(&lit);
        out.push(lit);
    }

    for lit in topo_parked(parked) {
        out.push(lit);
    }
    fr.body = out;
    Ok(())
}

/// Stable topological order of the parked head-only atoms: an atom whose
/// id feeds another's arguments must be resolved first.
fn topo_parked(parked: Vec<FlatLiteral>) -> Vec<FlatLiteral> {
    let mut remaining = parked;
    let mut out = Vec::with_capacity(remaining.len());
    let mut resolved: HashSet<String> = HashSet::new();
    while !remaining.is_empty() {
        let ids: HashSet<String> = remaining
            .iter()
            .filter_map(|l| match l {
                FlatLiteral::Function(fa) => fa.id_arg.as_var().map(str::to_string),
                _ => None,
            })
            .collect();
        let mut progressed = false;
        let mut next = Vec::new();
        for lit in remaining {
            let ready = match &lit {
                FlatLiteral::Function(fa) => fa.args.iter().all(|a| match a.as_var() {
                    Some(v) => !ids.contains(v) || resolved.contains(v),
                    None => true,
                }),
                _ => true,
            };
            if ready {
                if let FlatLiteral::Function(fa) = &lit {
                    if let Some(v) = fa.id_arg.as_var() {
                        resolved.insert(v.to_string());
                    }
                }
                out.push(lit);
                progressed = true;
            } else {
                next.push(lit);
            }
        }
        assert!(progressed, "cyclic id dependencies among head-only atoms");
        remaining = next;
    }
    out
}

pub fn reorder_program(fp: &mut FlatProgram, store: &TermStore) -> Result<(), PlacementError> {
    let tables = fp.tables.clone();
    for rule in &mut fp.rules {
        reorder_body(rule, &tables, store)?;
    }
    Ok(())
}

/// Degenerate placement: function atoms as late as possible instead of
/// first-fit. Grounding output must not change, only the search space
/// pruning does. An eligible function atom is taken only when no
/// standard literal is placeable, so literals depending on its bindings
/// still find a slot after it.
pub fn reorder_body_all_parked(
    fr: &mut FlatRule,
    tables: &PredicateTables,
    store: &TermStore,
) -> Result<(), PlacementError> {
    let body = std::mem::take(&mut fr.body);
    let (parked, mut open): (Vec<FlatLiteral>, Vec<FlatLiteral>) = body.into_iter().partition(
        |l| matches!(l, FlatLiteral::Function(fa) if fa.provenance == Provenance::HeadOnly),
    );

    let mut out = Vec::with_capacity(open.len() + parked.len());
    let mut bound = BoundSet::new();
    while !open.is_empty() {
        let mut best: Option<(usize, i64)> = None;
        for (i, lit) in open.iter().enumerate() {
            let w = match lit {
                FlatLiteral::Function(fa) => {
                    if placement_condition(fa, &bound) {
                        MAXWEIGHT - 2
                    } else {
                        MAXWEIGHT
                    }
                }
                other => atom_weight(other, &bound, tables),
            };
            if best.is_none_or(|(_, bw)| w < bw) {
                best = Some((i, w));
            }
        }
        let (i, w) = best.expect("non-empty open list");
        if w >= MAXWEIGHT - 1 {
            return Err(PlacementError { literal: open[i].text(store) });
        }
        let lit = open.remove(i);
        bound.absorb(&lit);
        out.push(lit);
    }
    for lit in topo_parked(parked) {
        out.push(lit);
    }
    fr.body = out;
    Ok(())
}

pub fn reorder_program_all_parked(
    fp: &mut FlatProgram,
    store: &TermStore,
) -> Result<(), PlacementError> {
    let tables = fp.tables.clone();
    for rule in &mut fp.rules {
        reorder_body_all_parked(rule, &tables, store)?;
    }
    Ok(())
}

/// First-fit audit: every body-touched function atom holds condition
/// a or b at its position, and any earlier position where its condition
/// already held is occupied by function atoms placed in the same
/// promotion burst.
pub fn verify_first_fit(fr: &FlatRule) -> bool {
    let mut prefixes: Vec<BoundSet> = Vec::with_capacity(fr.body.len() + 1);
    let mut bound = BoundSet::new();
    prefixes.push(bound.clone());
    for lit in &fr.body {
        bound.absorb(lit);
        prefixes.push(bound.clone());
    }
    for (i, lit) in fr.body.iter().enumerate() {
        let fa = match lit {
            FlatLiteral::Function(fa) if fa.provenance == Provenance::BodyTouched => fa,
            _ => continue,
        };
        if !placement_condition(fa, &prefixes[i]) {
            return false;
        }
        let first = (0..=i)
            .find(|&j| placement_condition(fa, &prefixes[j]))
            .expect("condition holds at position i");
        if !fr.body[first..i]
            .iter()
            .all(|l| matches!(l, FlatLiteral::Function(_)))
        {
            return false;
        }
    }
    true
}
