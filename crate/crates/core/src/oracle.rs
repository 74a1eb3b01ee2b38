//! Brute-force verification machinery: a naive grounder by exhaustive
//! substitution over the bounded term universe, and an answer-set
//! checker that enumerates interpretations of a ground program.
//!
//! Everything here works on nested-term syntax and never touches the
//! flattening pipeline, so the two paths can be compared against each
//! other.

use std::collections::{BTreeSet, HashSet};

use indexmap::IndexMap;
use petgraph::algo::kosaraju_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use crate::ast::{Atom, Literal, Program, Rule, Term};
use crate::ground::GroundProgram;

pub const MAX_UNIVERSE: usize = 1_000_000;
pub const MAX_ATOM_BASE: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("term universe exceeds {MAX_UNIVERSE} terms")]
    TooManyTerms,
    #[error("atom base has {0} atoms, more than {MAX_ATOM_BASE}")]
    TooManyAtoms(usize),
    #[error("program is not stratified for negation/aggregates")]
    Unstratified,
}

/// Ground atom over nested terms.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TermAtom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl std::fmt::Display for TermAtom {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", Atom { predicate: self.predicate.clone(), args: self.args.clone() })
    }
}

/// Ground rule over nested terms; all parts sorted.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TermRule {
    pub head: Vec<TermAtom>,
    pub body_pos: Vec<TermAtom>,
    pub body_neg: Vec<TermAtom>,
}

/// A ground program in comparable form.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TermProgram {
    pub facts: BTreeSet<TermAtom>,
    pub rules: BTreeSet<TermRule>,
}

pub type Interpretation = BTreeSet<TermAtom>;

/// Reads the instantiation output back into nested-term form.
pub fn readback(gp: &GroundProgram) -> TermProgram {
    let mut out = TermProgram::default();
    for f in &gp.facts {
        out.facts.insert(TermAtom {
            predicate: f.predicate.clone(),
            args: f.args.iter().map(|a| gp.store.to_term(*a)).collect(),
        });
    }
    for r in &gp.rules {
        let conv = |atoms: &[crate::ground::GroundAtom]| -> Vec<TermAtom> {
            let mut v: Vec<TermAtom> = atoms
                .iter()
                .map(|a| TermAtom {
                    predicate: a.predicate.clone(),
                    args: a.args.iter().map(|x| gp.store.to_term(*x)).collect(),
                })
                .collect();
            v.sort();
            v
        };
        out.rules.insert(TermRule {
            head: conv(&r.head),
            body_pos: conv(&r.body_pos),
            body_neg: conv(&r.body_neg),
        });
    }
    out
}

pub fn term_level(t: &Term) -> u32 {
    match t {
        Term::Const(_) => 0,
        Term::Var(_) => 0,
        Term::Id(_) => 0,
        Term::Func(_, args) => 1 + args.iter().map(term_level).max().unwrap_or(0),
    }
}

/// All ground terms over the program's constants and function symbols
/// with nesting level at most `k`, in sorted order.
pub fn term_universe(p: &Program, k: u32) -> Result<Vec<Term>, OracleError> {
    term_universe_capped(p, k, MAX_UNIVERSE)
}

fn term_universe_capped(p: &Program, k: u32, cap: usize) -> Result<Vec<Term>, OracleError> {
    let mut constants = BTreeSet::new();
    let mut functions: IndexMap<String, usize> = IndexMap::new();

    fn visit(t: &Term, constants: &mut BTreeSet<Term>, functions: &mut IndexMap<String, usize>) {
        match t {
            Term::Const(c) => {
                constants.insert(Term::Const(c.clone()));
            }
            Term::Func(name, args) => {
                functions.insert(name.clone(), args.len());
                for a in args {
                    visit(a, constants, functions);
                }
            }
            Term::Var(_) | Term::Id(_) => {}
        }
    }
    let visit_atom = |a: &Atom, c: &mut BTreeSet<Term>, f: &mut IndexMap<String, usize>| {
        for t in &a.args {
            visit(t, c, f);
        }
    };
    for r in &p.rules {
        for a in &r.head {
            visit_atom(a, &mut constants, &mut functions);
        }
        for l in &r.body {
            match l {
                Literal::Pos(a) | Literal::Neg(a) => visit_atom(a, &mut constants, &mut functions),
                Literal::Aggregate(agg) => {
                    for a in &agg.conjunction {
                        visit_atom(a, &mut constants, &mut functions);
                    }
                }
            }
        }
    }

    let mut universe: Vec<(Term, u32)> = constants.into_iter().map(|c| (c, 0)).collect();
    let mut known: HashSet<Term> = universe.iter().map(|(t, _)| t.clone()).collect();
    for level in 1..=k {
        let prev: Vec<(Term, u32)> = universe.clone();
        if prev.is_empty() {
            break;
        }
        for (name, arity) in &functions {
            let mut tuple = vec![0usize; *arity];
            'tuples: loop {
                let arg_max = tuple.iter().map(|&i| prev[i].1).max().unwrap_or(0);
                if arg_max + 1 == level {
                    let args: Vec<Term> = tuple.iter().map(|&i| prev[i].0.clone()).collect();
                    let t = Term::Func(name.clone(), args);
                    if known.insert(t.clone()) {
                        universe.push((t, level));
                        if universe.len() > cap {
                            return Err(OracleError::TooManyTerms);
                        }
                    }
                }
                for pos in 0..*arity {
                    tuple[pos] += 1;
                    if tuple[pos] < prev.len() {
                        continue 'tuples;
                    }
                    tuple[pos] = 0;
                }
                break;
            }
        }
    }
    let mut terms: Vec<Term> = universe.into_iter().map(|(t, _)| t).collect();
    terms.sort();
    Ok(terms)
}

fn substitute(t: &Term, assignment: &IndexMap<String, Term>) -> Term {
    match t {
        Term::Var(v) => assignment
            .get(v)
            .cloned()
            .unwrap_or_else(|| panic!("unassigned variable {v}")),
        Term::Func(name, args) => {
            Term::Func(name.clone(), args.iter().map(|a| substitute(a, assignment)).collect())
        }
        other => other.clone(),
    }
}

fn substitute_atom(a: &Atom, assignment: &IndexMap<String, Term>) -> TermAtom {
    TermAtom {
        predicate: a.predicate.clone(),
        args: a.args.iter().map(|t| substitute(t, assignment)).collect(),
    }
}

fn atom_within_bound(a: &TermAtom, k: u32) -> bool {
    a.args.iter().all(|t| term_level(t) <= k)
}

/// Components in evaluation order plus the component index per
/// predicate.
type Strata = (Vec<Vec<String>>, IndexMap<String, usize>);

/// Stratification of the source program, mirroring the component rules
/// of the main pipeline but computed directly on nested syntax.
fn strata(p: &Program) -> Result<Strata, OracleError> {
    let mut nodes: IndexMap<String, NodeIndex> = IndexMap::new();
    let mut graph: DiGraph<String, bool> = DiGraph::new(); // edge weight: true = pos
    let node = |name: &str, graph: &mut DiGraph<String, bool>, nodes: &mut IndexMap<String, NodeIndex>| {
        *nodes
            .entry(name.to_string())
            .or_insert_with(|| graph.add_node(name.to_string()))
    };
    for r in &p.rules {
        for h in &r.head {
            node(&h.predicate, &mut graph, &mut nodes);
        }
        for l in &r.body {
            match l {
                Literal::Pos(a) | Literal::Neg(a) => {
                    node(&a.predicate, &mut graph, &mut nodes);
                }
                Literal::Aggregate(agg) => {
                    for a in &agg.conjunction {
                        node(&a.predicate, &mut graph, &mut nodes);
                    }
                }
            }
        }
    }
    for r in &p.rules {
        for h in &r.head {
            let hn = nodes[&h.predicate];
            for l in &r.body {
                match l {
                    Literal::Pos(a) => {
                        graph.add_edge(nodes[&a.predicate], hn, true);
                    }
                    Literal::Neg(a) => {
                        graph.add_edge(nodes[&a.predicate], hn, false);
                    }
                    Literal::Aggregate(agg) => {
                        for a in &agg.conjunction {
                            graph.add_edge(nodes[&a.predicate], hn, false);
                        }
                    }
                }
            }
        }
    }
    let mut sccs = kosaraju_scc(&graph);
    sccs.reverse();
    let mut scc_of: IndexMap<String, usize> = IndexMap::new();
    for (i, scc) in sccs.iter().enumerate() {
        for &n in scc {
            scc_of.insert(graph[n].clone(), i);
        }
    }
    for e in graph.edge_indices() {
        if !graph[e] {
            let (from, to) = graph.edge_endpoints(e).expect("edge endpoints");
            if scc_of[&graph[from]] == scc_of[&graph[to]] {
                return Err(OracleError::Unstratified);
            }
        }
    }
    Ok((
        sccs.into_iter()
            .map(|scc| scc.into_iter().map(|n| graph[n].clone()).collect())
            .collect(),
        scc_of,
    ))
}

struct OracleState {
    possible: IndexMap<TermAtom, bool>, // atom -> established
}

impl OracleState {
    fn possibly_true(&self, a: &TermAtom) -> bool {
        self.possible.contains_key(a)
    }

    fn established(&self, a: &TermAtom) -> bool {
        self.possible.get(a).copied().unwrap_or(false)
    }
}

/// Variables enumerated over the universe: everything except aggregate
/// locals and aggregate bound variables. A bound variable that feeds its
/// own aggregate's globals cannot be computed by it and is enumerated
/// like any other (the aggregate then compares instead of binding).
fn enumerated_vars(r: &Rule) -> Vec<String> {
    let mut vars = Vec::new();
    for a in &r.head {
        a.collect_vars(&mut vars);
    }
    let mut computed: Vec<String> = Vec::new();
    let mut locals: Vec<String> = Vec::new();
    for l in &r.body {
        match l {
            Literal::Pos(a) | Literal::Neg(a) => a.collect_vars(&mut vars),
            Literal::Aggregate(agg) => {
                if !agg.global_vars().contains(&agg.bound_var) {
                    computed.push(agg.bound_var.clone());
                }
                locals.extend(agg.local_vars.iter().cloned());
                for a in &agg.conjunction {
                    let mut cv = Vec::new();
                    a.collect_vars(&mut cv);
                    for v in cv {
                        if !agg.local_vars.contains(&v) {
                            vars.push(v);
                        }
                    }
                }
            }
        }
    }
    vars.retain(|v| !computed.contains(v) && !locals.contains(v));
    let mut seen = HashSet::new();
    vars.retain(|v| seen.insert(v.clone()));
    vars
}

/// The count for one aggregate under a fixed assignment of its globals:
/// distinct local tuples whose conjunction instance is possibly true and
/// within the nesting bound.
fn eval_count(
    agg: &crate::ast::Aggregate,
    assignment: &IndexMap<String, Term>,
    universe: &[Term],
    k: u32,
    state: &OracleState,
) -> i64 {
    let nl = agg.local_vars.len();
    if universe.is_empty() {
        return 0;
    }
    let mut idx = vec![0usize; nl];
    let mut count = 0i64;
    loop {
        let mut local_assignment = assignment.clone();
        for (v, &i) in agg.local_vars.iter().zip(&idx) {
            local_assignment.insert(v.clone(), universe[i].clone());
        }
        let ok = agg.conjunction.iter().all(|a| {
            let ga = substitute_atom(a, &local_assignment);
            atom_within_bound(&ga, k) && state.possibly_true(&ga)
        });
        if ok {
            count += 1;
        }
        let mut pos = 0;
        loop {
            if pos == nl {
                return count;
            }
            idx[pos] += 1;
            if idx[pos] < universe.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Instantiates the program by exhaustive substitution, stratum by
/// stratum, with the same possibly-true/established bookkeeping and the
/// same final simplification as the instantiation engine.
pub fn naive_ground(p: &Program, k: u32) -> Result<TermProgram, OracleError> {
    let universe = term_universe(p, k)?;
    let (sccs, scc_of) = strata(p)?;

    // Rules run in the earliest component holding one of their head
    // predicates; constraints run last.
    let mut rules_of_scc: Vec<Vec<&Rule>> = vec![Vec::new(); sccs.len() + 1];
    let mut facts: Vec<&Rule> = Vec::new();
    for r in &p.rules {
        if r.is_ground_fact() {
            facts.push(r);
            continue;
        }
        let scc = r
            .head
            .iter()
            .map(|h| scc_of[&h.predicate])
            .min()
            .unwrap_or(sccs.len());
        rules_of_scc[scc].push(r);
    }

    let mut state = OracleState { possible: IndexMap::new() };
    for f in &facts {
        let a = TermAtom { predicate: f.head[0].predicate.clone(), args: f.head[0].args.clone() };
        // Facts beyond the bound cannot be represented; mirror the
        // pipeline, which reports them as errors before grounding.
        state.possible.insert(a, true);
    }

    let mut raws: BTreeSet<TermRule> = BTreeSet::new();
    for scc_rules in &rules_of_scc {
        let mut scc_raws: Vec<TermRule> = Vec::new();
        loop {
            let mut changed = false;
            for rule in scc_rules {
                for raw in instantiate_rule(rule, &universe, k, &state) {
                    if raws.insert(raw.clone()) {
                        for h in &raw.head {
                            if !state.possible.contains_key(h) {
                                state.possible.insert(h.clone(), false);
                                changed = true;
                            }
                        }
                        scc_raws.push(raw);
                    }
                }
            }
            if !changed {
                break;
            }
        }
        loop {
            let mut changed = false;
            for raw in &scc_raws {
                if raw.head.len() != 1 {
                    continue;
                }
                let pos_ok = raw.body_pos.iter().all(|a| state.established(a));
                let neg_ok = raw.body_neg.iter().all(|a| !state.possibly_true(a));
                if pos_ok && neg_ok && !state.established(&raw.head[0]) {
                    *state.possible.get_mut(&raw.head[0]).expect("head is possibly true") = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }

    let mut out = TermProgram::default();
    for (atom, established) in &state.possible {
        if *established {
            out.facts.insert(atom.clone());
        }
    }
    for raw in &raws {
        if raw.body_neg.iter().any(|a| state.established(a)) {
            continue;
        }
        let body_pos: Vec<TermAtom> =
            raw.body_pos.iter().filter(|a| !state.established(a)).cloned().collect();
        let body_neg: Vec<TermAtom> =
            raw.body_neg.iter().filter(|a| state.possibly_true(a)).cloned().collect();
        if raw.head.len() == 1 && body_pos.is_empty() && body_neg.is_empty() {
            continue;
        }
        out.rules.insert(TermRule { head: raw.head.clone(), body_pos, body_neg });
    }
    Ok(out)
}

fn instantiate_rule(
    rule: &Rule,
    universe: &[Term],
    k: u32,
    state: &OracleState,
) -> Vec<TermRule> {
    let vars = enumerated_vars(rule);
    let mut out = Vec::new();
    let mut idx = vec![0usize; vars.len()];
    if universe.is_empty() && !vars.is_empty() {
        return out;
    }
    'assignments: loop {
        let mut assignment: IndexMap<String, Term> = IndexMap::new();
        for (v, &i) in vars.iter().zip(&idx) {
            assignment.insert(v.clone(), universe[i].clone());
        }

        'eval: {
            // Aggregates bind their bound variables; one aggregate's
            // bound variable may feed another's globals, so process them
            // in dependency order.
            let mut pending: Vec<&crate::ast::Aggregate> = rule
                .body
                .iter()
                .filter_map(|l| match l {
                    Literal::Aggregate(agg) => Some(agg),
                    _ => None,
                })
                .collect();
            while !pending.is_empty() {
                let ready = pending
                    .iter()
                    .position(|agg| agg.global_vars().iter().all(|g| assignment.contains_key(g)))
                    .expect("aggregate globals cycle; the pipeline rejects such rules");
                let agg = pending.remove(ready);
                let count = eval_count(agg, &assignment, universe, k, state);
                let val = Term::int(count);
                match assignment.get(&agg.bound_var) {
                    Some(existing) => {
                        if *existing != val {
                            break 'eval;
                        }
                    }
                    None => {
                        assignment.insert(agg.bound_var.clone(), val);
                    }
                }
            }

            let mut head: Vec<TermAtom> = Vec::new();
            for a in &rule.head {
                let ga = substitute_atom(a, &assignment);
                if !atom_within_bound(&ga, k) {
                    break 'eval;
                }
                head.push(ga);
            }
            let mut body_pos = Vec::new();
            let mut body_neg = Vec::new();
            for l in &rule.body {
                match l {
                    Literal::Pos(a) => {
                        let ga = substitute_atom(a, &assignment);
                        if !atom_within_bound(&ga, k) || !state.possibly_true(&ga) {
                            break 'eval;
                        }
                        body_pos.push(ga);
                    }
                    Literal::Neg(a) => {
                        let ga = substitute_atom(a, &assignment);
                        if !atom_within_bound(&ga, k) {
                            break 'eval;
                        }
                        if state.established(&ga) {
                            break 'eval;
                        }
                        body_neg.push(ga);
                    }
                    Literal::Aggregate(_) => {}
                }
            }
            head.sort();
            head.dedup();
            body_pos.sort();
            body_pos.dedup();
            body_neg.sort();
            body_neg.dedup();
            out.push(TermRule { head, body_pos, body_neg });
        }

        if vars.is_empty() {
            return out;
        }
        let mut pos = 0;
        loop {
            if pos == vars.len() {
                break 'assignments;
            }
            idx[pos] += 1;
            if idx[pos] < universe.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
    out
}

/// All answer sets of a ground program: subset-minimal models of the
/// reduct, by exhaustive enumeration of interpretations.
pub fn answer_sets(tp: &TermProgram) -> Result<BTreeSet<Interpretation>, OracleError> {
    let mut base: Vec<TermAtom> = {
        let mut all: BTreeSet<TermAtom> = tp.facts.iter().cloned().collect();
        for r in &tp.rules {
            for a in r.head.iter().chain(&r.body_pos).chain(&r.body_neg) {
                all.insert(a.clone());
            }
        }
        all.into_iter().collect()
    };
    base.sort();
    let n = base.len();
    if n > MAX_ATOM_BASE {
        return Err(OracleError::TooManyAtoms(n));
    }
    let mut base_idx: IndexMap<TermAtom, usize> = IndexMap::new();
    for (i, a) in base.iter().enumerate() {
        base_idx.insert(a.clone(), i);
    }

    struct MaskRule {
        head: u32,
        body_pos: u32,
        body_neg: u32,
    }
    let mask_of = |atoms: &[TermAtom]| -> u32 {
        atoms.iter().map(|a| 1u32 << base_idx[a]).fold(0, |m, b| m | b)
    };
    let mut mask_rules: Vec<MaskRule> = tp
        .rules
        .iter()
        .map(|r| MaskRule {
            head: mask_of(&r.head),
            body_pos: mask_of(&r.body_pos),
            body_neg: mask_of(&r.body_neg),
        })
        .collect();
    for f in &tp.facts {
        mask_rules.push(MaskRule { head: 1u32 << base_idx[f], body_pos: 0, body_neg: 0 });
    }

    fn models(j_mask: u32, reduct: &[&MaskRule]) -> bool {
        reduct.iter().all(|r| (j_mask & r.body_pos) != r.body_pos || (j_mask & r.head) != 0)
    }

    let mut result: BTreeSet<Interpretation> = BTreeSet::new();
    for i_mask in 0u32..(1u32 << n) {
        let reduct: Vec<&MaskRule> =
            mask_rules.iter().filter(|r| r.body_neg & i_mask == 0).collect();
        if !models(i_mask, &reduct) {
            continue;
        }
        // subset-minimality: no proper submodel of the same reduct
        let mut minimal = true;
        if i_mask != 0 {
            let mut sub = (i_mask - 1) & i_mask;
            loop {
                if models(sub, &reduct) {
                    minimal = false;
                    break;
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & i_mask;
            }
        }
        if minimal {
            let interp: Interpretation = (0..n)
                .filter(|b| i_mask & (1u32 << b) != 0)
                .map(|b| base[b].clone())
                .collect();
            result.insert(interp);
        }
    }
    Ok(result)
}
