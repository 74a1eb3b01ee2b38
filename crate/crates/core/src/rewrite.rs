//! Source-to-source rewriting: aggregate extraction, flattening of
//! function applications into function atoms, and interning of facts.
//!
//! Aggregates are extracted first (their conjunctions move to fresh
//! auxiliary rules), then every rule is flattened inside-to-outside.
//! Distinct applications get distinct id variables even when they share
//! a function symbol; syntactically identical applications within one
//! rule share a single function atom.

use indexmap::IndexMap;
use std::collections::HashSet;

use crate::ast::{Atom, Literal, Program, Rule, Term};
use crate::flat::{
    FlatAggregate, FlatAtom, FlatLiteral, FlatProgram, FlatRule, FlatTerm, FunctionAtom,
    Provenance,
};
use crate::term_store::{TermId, TermStore};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RewriteError {
    #[error("unsafe rule `{rule}`: variable {var} does not occur in a positive body literal")]
    UnsafeRule { rule: String, var: String },
    #[error("unsafe aggregate in `{rule}`: local variable {var} does not occur in the conjunction")]
    UnsafeAggregateLocal { rule: String, var: String },
    #[error("aggregate local variable {var} in `{rule}` is also used outside the aggregate")]
    AggregateLocalUsedOutside { rule: String, var: String },
    #[error("fact `{fact}` exceeds the nesting bound: level {level} > {bound}")]
    FactNesting { fact: String, level: u32, bound: u32 },
}

/// Moves each aggregate's conjunction into a fresh auxiliary rule and
/// makes the aggregate reference it, so flattening never has to look
/// inside an aggregate. A conjunction that is already a single
/// function-free atom is left in place. Returns the rewritten program
/// and the auxiliary predicate names.
pub fn rewrite_aggregates(p: &Program) -> Result<(Program, Vec<String>), RewriteError> {
    let mut used: HashSet<String> = HashSet::new();
    for r in &p.rules {
        for a in &r.head {
            used.insert(a.predicate.clone());
        }
        for l in &r.body {
            match l {
                Literal::Pos(a) | Literal::Neg(a) => {
                    used.insert(a.predicate.clone());
                }
                Literal::Aggregate(agg) => {
                    for a in &agg.conjunction {
                        used.insert(a.predicate.clone());
                    }
                }
            }
        }
    }
    let mut next_aux = 1usize;
    let mut fresh_aux = move || loop {
        let name = format!("aux{next_aux}");
        next_aux += 1;
        if !used.contains(&name) {
            return name;
        }
    };

    let mut aux_predicates = Vec::new();
    let mut rules = Vec::new();
    for rule in &p.rules {
        let mut aux_rules = Vec::new();
        let mut host = rule.clone();
        for lit in host.body.iter_mut() {
            let agg = match lit {
                Literal::Aggregate(agg) => agg,
                _ => continue,
            };
            check_aggregate_vars(rule, agg.local_vars.as_slice(), &agg.conjunction)?;
            let trivial = agg.conjunction.len() == 1
                && agg.conjunction[0].args.iter().all(|t| !matches!(t, Term::Func(..)));
            if trivial {
                continue;
            }
            let aux = fresh_aux();
            let mut args: Vec<Term> =
                agg.local_vars.iter().map(|v| Term::Var(v.clone())).collect();
            for g in agg.global_vars() {
                args.push(Term::Var(g));
            }
            let aux_head = Atom { predicate: aux.clone(), args };
            let body = agg
                .conjunction
                .iter()
                .map(|a| Literal::Pos(a.clone()))
                .collect();
            aux_rules.push(Rule { head: vec![aux_head.clone()], body, line: rule.line });
            agg.conjunction = vec![aux_head];
            aux_predicates.push(aux);
        }
        rules.push(host);
        rules.append(&mut aux_rules);
    }
    Ok((Program { rules }, aux_predicates))
}

fn check_aggregate_vars(
    rule: &Rule,
    locals: &[String],
    conjunction: &[Atom],
) -> Result<(), RewriteError> {
    let mut conj_vars = Vec::new();
    for a in conjunction {
        a.collect_vars(&mut conj_vars);
    }
    for l in locals {
        if !conj_vars.contains(l) {
            return Err(RewriteError::UnsafeAggregateLocal {
                rule: rule.to_string(),
                var: l.clone(),
            });
        }
    }
    // Local variables are scoped to the aggregate; sharing a name with
    // the rest of the rule would silently change its meaning.
    let mut outside = Vec::new();
    for a in &rule.head {
        a.collect_vars(&mut outside);
    }
    for lit in &rule.body {
        match lit {
            Literal::Pos(a) | Literal::Neg(a) => a.collect_vars(&mut outside),
            Literal::Aggregate(agg) => {
                if agg.conjunction.as_slice() != conjunction {
                    for a in &agg.conjunction {
                        a.collect_vars(&mut outside);
                    }
                    outside.push(agg.bound_var.clone());
                } else {
                    outside.push(agg.bound_var.clone());
                }
            }
        }
    }
    for l in locals {
        if outside.contains(l) {
            return Err(RewriteError::AggregateLocalUsedOutside {
                rule: rule.to_string(),
                var: l.clone(),
            });
        }
    }
    Ok(())
}

/// Per-rule flattening state: one id variable per distinct application.
struct Flattener {
    /// application term -> (id variable, provenance seen so far)
    apps: IndexMap<Term, (String, bool)>,
    taken: HashSet<String>,
    next_fresh: usize,
}

impl Flattener {
    fn new(rule: &Rule) -> Flattener {
        let mut vars = Vec::new();
        for a in &rule.head {
            a.collect_vars(&mut vars);
        }
        for l in &rule.body {
            match l {
                Literal::Pos(a) | Literal::Neg(a) => a.collect_vars(&mut vars),
                Literal::Aggregate(agg) => {
                    vars.push(agg.bound_var.clone());
                    vars.extend(agg.local_vars.iter().cloned());
                    for a in &agg.conjunction {
                        a.collect_vars(&mut vars);
                    }
                }
            }
        }
        Flattener {
            apps: IndexMap::new(),
            taken: vars.into_iter().collect(),
            next_fresh: 1,
        }
    }

    fn fresh_var(&mut self) -> String {
        loop {
            let name = format!("FN_{}", self.next_fresh);
            self.next_fresh += 1;
            if self.taken.insert(name.clone()) {
                return name;
            }
        }
    }

    /// Registers every application inside `t`, innermost first.
    /// `in_body` marks body occurrences; any body occurrence makes the
    /// application a plain lookup during grounding.
    fn visit(&mut self, t: &Term, in_body: bool) {
        if let Term::Func(_, args) = t {
            for a in args {
                self.visit(a, in_body);
            }
            match self.apps.get_mut(t) {
                Some((_, touched)) => *touched |= in_body,
                None => {
                    let v = self.fresh_var();
                    self.apps.insert(t.clone(), (v, in_body));
                }
            }
        }
    }

    fn flat_term(&self, t: &Term) -> FlatTerm {
        match t {
            Term::Const(c) => FlatTerm::Const(c.clone()),
            Term::Var(v) => FlatTerm::Var(v.clone()),
            Term::Func(..) => {
                FlatTerm::Var(self.apps.get(t).expect("application registered").0.clone())
            }
            Term::Id(n) => panic!("unresolved id reference '@{n}' in rule"),
        }
    }

    fn flat_atom(&self, a: &Atom) -> FlatAtom {
        FlatAtom {
            predicate: a.predicate.clone(),
            args: a.args.iter().map(|t| self.flat_term(t)).collect(),
        }
    }

    fn function_atom(&self, app: &Term) -> FunctionAtom {
        let (symbol, args) = match app {
            Term::Func(name, args) => (name.clone(), args),
            _ => unreachable!("only applications are registered"),
        };
        let (id_var, touched) = self.apps.get(app).expect("application registered");
        FunctionAtom {
            symbol,
            id_arg: FlatTerm::Var(id_var.clone()),
            args: args.iter().map(|t| self.flat_term(t)).collect(),
            provenance: if *touched { Provenance::BodyTouched } else { Provenance::HeadOnly },
        }
    }
}

/// Flattens one rule. Function atoms for applications inside a negative
/// literal are emitted right before it (the literal needs their ids
/// bound); all remaining function atoms follow the standard body, body
/// applications first, then head-only ones, each innermost first.
pub fn flatten_rule(rule: &Rule, origin: usize) -> FlatRule {
    let mut fl = Flattener::new(rule);
    for lit in &rule.body {
        match lit {
            Literal::Pos(a) | Literal::Neg(a) => {
                for t in &a.args {
                    fl.visit(t, true);
                }
            }
            Literal::Aggregate(agg) => {
                for a in &agg.conjunction {
                    for t in &a.args {
                        assert!(
                            !matches!(t, Term::Func(..)),
                            "aggregates must be extracted before flattening"
                        );
                    }
                }
            }
        }
    }
    for a in &rule.head {
        for t in &a.args {
            fl.visit(t, false);
        }
    }

    let mut emitted: HashSet<String> = HashSet::new();
    let mut body = Vec::new();
    for lit in &rule.body {
        match lit {
            Literal::Pos(a) => body.push(FlatLiteral::Pos(fl.flat_atom(a))),
            Literal::Neg(a) => {
                for (app, (id_var, _)) in fl.apps.iter() {
                    if occurs_in_atom(app, a) && emitted.insert(id_var.clone()) {
                        body.push(FlatLiteral::Function(fl.function_atom(app)));
                    }
                }
                body.push(FlatLiteral::Neg(fl.flat_atom(a)));
            }
            Literal::Aggregate(agg) => {
                body.push(FlatLiteral::Aggregate(FlatAggregate {
                    bound: FlatTerm::Var(agg.bound_var.clone()),
                    local_vars: agg.local_vars.clone(),
                    atom: fl.flat_atom(&agg.conjunction[0]),
                }));
            }
        }
    }
    // Registration order is body-first and innermost-first, so emitting
    // body applications then head-only ones keeps inner ids defined
    // before the atoms that use them.
    for (app, (id_var, touched)) in fl.apps.iter() {
        if *touched && emitted.insert(id_var.clone()) {
            body.push(FlatLiteral::Function(fl.function_atom(app)));
        }
    }
    for (app, (id_var, touched)) in fl.apps.iter() {
        if !*touched && emitted.insert(id_var.clone()) {
            body.push(FlatLiteral::Function(fl.function_atom(app)));
        }
    }

    FlatRule {
        head: rule.head.iter().map(|a| fl.flat_atom(a)).collect(),
        body,
        origin,
    }
}

fn occurs_in_atom(app: &Term, atom: &Atom) -> bool {
    fn occurs(app: &Term, t: &Term) -> bool {
        if t == app {
            return true;
        }
        match t {
            Term::Func(_, args) => args.iter().any(|a| occurs(app, a)),
            _ => false,
        }
    }
    atom.args.iter().any(|t| occurs(app, t))
}

/// Interns a ground fact, inside-to-outside with lookup before insert,
/// and returns its argument tuple over term ids. A nesting violation in
/// a fact is a program error, not a silent prune.
pub fn flatten_fact(
    atom: &Atom,
    store: &mut TermStore,
    max_nesting: Option<u32>,
) -> Result<Vec<TermId>, RewriteError> {
    let mut tuple = Vec::with_capacity(atom.args.len());
    for t in &atom.args {
        let id = store.intern_term(t, max_nesting).map_err(|e| RewriteError::FactNesting {
            fact: format!("{atom}."),
            level: e.level,
            bound: e.bound,
        })?;
        tuple.push(id);
    }
    Ok(tuple)
}

/// Rebuilds the nested-term rule from a flattened one by substituting
/// function atoms back; inverse of `flatten_rule` up to renaming.
pub fn unflatten_rule(fr: &FlatRule, store: &TermStore) -> Rule {
    let mut resolved: IndexMap<String, Term> = IndexMap::new();
    let function_atoms: Vec<&FunctionAtom> = fr
        .body
        .iter()
        .filter_map(|l| match l {
            FlatLiteral::Function(fa) => Some(fa),
            _ => None,
        })
        .collect();

    let resolve_term = |resolved: &IndexMap<String, Term>, t: &FlatTerm| -> Option<Term> {
        match t {
            FlatTerm::Const(c) => Some(Term::Const(c.clone())),
            FlatTerm::Id(id) => Some(store.to_term(*id)),
            FlatTerm::Var(v) => match resolved.get(v) {
                Some(t) => Some(t.clone()),
                None => {
                    if function_atoms.iter().any(|fa| fa.id_arg.as_var() == Some(v)) {
                        None // id variable not substituted yet
                    } else {
                        Some(Term::Var(v.clone()))
                    }
                }
            },
        }
    };

    let mut remaining: Vec<&FunctionAtom> = function_atoms.clone();
    while !remaining.is_empty() {
        let mut progress = false;
        remaining.retain(|fa| {
            let args: Option<Vec<Term>> =
                fa.args.iter().map(|a| resolve_term(&resolved, a)).collect();
            match args {
                Some(args) => {
                    let id_var = fa
                        .id_arg
                        .as_var()
                        .expect("function atom with ground id needs no substitution")
                        .to_string();
                    resolved.insert(id_var, Term::Func(fa.symbol.clone(), args));
                    progress = true;
                    false
                }
                None => true,
            }
        });
        assert!(progress, "dangling or cyclic id variables in flat rule");
    }

    let back_atom = |a: &FlatAtom| -> Atom {
        Atom {
            predicate: a.predicate.clone(),
            args: a
                .args
                .iter()
                .map(|t| resolve_term(&resolved, t).expect("all id variables resolved"))
                .collect(),
        }
    };

    let head = fr.head.iter().map(back_atom).collect();
    let body = fr
        .body
        .iter()
        .filter_map(|l| match l {
            FlatLiteral::Pos(a) => Some(Literal::Pos(back_atom(a))),
            FlatLiteral::Neg(a) => Some(Literal::Neg(back_atom(a))),
            FlatLiteral::Function(_) => None,
            FlatLiteral::Aggregate(agg) => Some(Literal::Aggregate(crate::ast::Aggregate {
                bound_var: agg
                    .bound
                    .as_var()
                    .expect("aggregate bound variable")
                    .to_string(),
                local_vars: agg.local_vars.clone(),
                conjunction: vec![back_atom(&agg.atom)],
            })),
        })
        .collect();
    Rule::new(head, body)
}

/// Safety over the flat form: every variable of the head, of negative
/// literals and every aggregate global must occur in a positive literal,
/// where function atoms count as positive. An aggregate binds its own
/// bound variable unless that variable feeds the aggregate itself.
pub fn check_safety(fr: &FlatRule, store: &TermStore) -> Result<(), RewriteError> {
    let mut sources: HashSet<String> = HashSet::new();
    for lit in &fr.body {
        match lit {
            FlatLiteral::Pos(a) => sources.extend(a.vars().map(str::to_string)),
            FlatLiteral::Function(fa) => {
                if let Some(v) = fa.id_arg.as_var() {
                    sources.insert(v.to_string());
                }
                for a in &fa.args {
                    if let Some(v) = a.as_var() {
                        sources.insert(v.to_string());
                    }
                }
            }
            FlatLiteral::Aggregate(agg) => {
                if let Some(v) = agg.bound.as_var() {
                    if !agg.global_vars().iter().any(|g| g == v) {
                        sources.insert(v.to_string());
                    }
                }
            }
            FlatLiteral::Neg(_) => {}
        }
    }
    let mut needs: Vec<String> = Vec::new();
    for a in &fr.head {
        needs.extend(a.vars().map(str::to_string));
    }
    for lit in &fr.body {
        match lit {
            FlatLiteral::Neg(a) => needs.extend(a.vars().map(str::to_string)),
            FlatLiteral::Aggregate(agg) => needs.extend(agg.global_vars()),
            _ => {}
        }
    }
    for v in needs {
        if !sources.contains(&v) {
            return Err(RewriteError::UnsafeRule { rule: fr.text(store), var: v });
        }
    }
    Ok(())
}

/// Flattens a whole program: ground facts are interned into predicate
/// tables (their function tuples enter the term store), everything else
/// becomes a flat rule. Expects aggregates to be extracted already.
pub fn flatten_program(
    p: &Program,
    store: &mut TermStore,
    max_nesting: Option<u32>,
) -> Result<FlatProgram, RewriteError> {
    let mut out = FlatProgram::default();
    for (i, rule) in p.rules.iter().enumerate() {
        if rule.is_ground_fact() {
            let atom = &rule.head[0];
            let tuple = flatten_fact(atom, store, max_nesting)?;
            out.tables.add(&atom.predicate, tuple, true);
        } else {
            let fr = flatten_rule(rule, i);
            check_safety(&fr, store)?;
            // Predicates only mentioned in rules still get a table so
            // the dependency graph sees them as nodes.
            for a in &fr.head {
                out.tables.ensure(&a.predicate, a.args.len());
            }
            for l in &fr.body {
                match l {
                    FlatLiteral::Pos(a) | FlatLiteral::Neg(a) => {
                        out.tables.ensure(&a.predicate, a.args.len())
                    }
                    FlatLiteral::Aggregate(agg) => {
                        out.tables.ensure(&agg.atom.predicate, agg.atom.args.len())
                    }
                    FlatLiteral::Function(_) => {}
                }
            }
            out.rules.push(fr);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_program;

    fn flatten_first(src: &str) -> (FlatRule, TermStore) {
        let p = parse_program(src).unwrap();
        let (p, _) = rewrite_aggregates(&p).unwrap();
        (flatten_rule(&p.rules[0], 0), TermStore::new())
    }

    #[test]
    fn two_function_symbols_flatten_to_two_atoms() {
        let (fr, store) = flatten_first("p(s(X)) :- a(X, f(Y, Z)).");
        assert_eq!(
            fr.text(&store),
            "p(FN_2) :- a(X, FN_1), #f(FN_1, Y, Z), #s(FN_2, X)."
        );
    }

    #[test]
    fn shared_application_uses_one_atom_and_one_id() {
        let (fr, store) = flatten_first("p(s(X)) :- q(s(X), Y).");
        assert_eq!(fr.text(&store), "p(FN_1) :- q(FN_1, Y), #s(FN_1, X).");
        let fa = fr
            .body
            .iter()
            .filter_map(|l| match l {
                FlatLiteral::Function(fa) => Some(fa),
                _ => None,
            })
            .collect::<Vec<_>>();
        assert_eq!(fa.len(), 1);
        assert_eq!(fa[0].provenance, Provenance::BodyTouched);
    }

    #[test]
    fn distinct_arguments_get_distinct_ids() {
        let (fr, store) = flatten_first("p(s(X)) :- q(s(Y), X).");
        assert_eq!(
            fr.text(&store),
            "p(FN_2) :- q(FN_1, X), #s(FN_1, Y), #s(FN_2, X)."
        );
    }

    #[test]
    fn negated_literal_keeps_translation() {
        let (fr, store) = flatten_first("a(X) :- p(X), not ab(s(X)).");
        assert_eq!(fr.text(&store), "a(X) :- p(X), #s(FN_1, X), not ab(FN_1).");
    }

    #[test]
    fn nested_head_terms_flatten_inside_to_outside() {
        let p = parse_program("p(s(f(1, a)), 2) :- q.").unwrap();
        let fr = flatten_rule(&p.rules[0], 0);
        let store = TermStore::new();
        assert_eq!(
            fr.text(&store),
            "p(FN_2, 2) :- q, #f(FN_1, 1, a), #s(FN_2, FN_1)."
        );
        for l in &fr.body {
            if let FlatLiteral::Function(fa) = l {
                assert_eq!(fa.provenance, Provenance::HeadOnly);
            }
        }
    }

    #[test]
    fn one_function_atom_per_distinct_application() {
        // FlatTerm has no application variant, so no nesting can survive
        // flattening; what remains to check is the atom count.
        for (src, expected) in [
            ("p(s(X)) :- a(X, f(Y, Z)).", 2),
            ("p(s(f(g(X), 1))) :- q(f(X, X)).", 4),
            ("a(X) :- p(X), not ab(s(s(X))).", 2),
            ("p(s(X), s(X)) :- q(s(X)).", 1),
        ] {
            let (fr, _) = flatten_first(src);
            let n_fa = fr
                .body
                .iter()
                .filter(|l| matches!(l, FlatLiteral::Function(_)))
                .count();
            assert_eq!(n_fa, expected, "function atoms of {src}");
        }
    }

    #[test]
    fn aggregate_extraction_matches_way_one() {
        let p = parse_program("a(X) :- X = #count( Y: p(s(Y)), q(Y) ).").unwrap();
        let (p, aux) = rewrite_aggregates(&p).unwrap();
        assert_eq!(aux, vec!["aux1"]);
        assert_eq!(p.rules.len(), 2);
        assert_eq!(p.rules[0].to_string(), "a(X) :- X = #count( Y: aux1(Y) ).");
        assert_eq!(p.rules[1].to_string(), "aux1(Y) :- p(s(Y)), q(Y).");
        // Flattening the auxiliary rule exposes the inner application.
        let fr = flatten_rule(&p.rules[1], 1);
        let store = TermStore::new();
        assert_eq!(fr.text(&store), "aux1(Y) :- p(FN_1), q(Y), #s(FN_1, Y).");
    }

    #[test]
    fn aggregate_free_program_unchanged() {
        let src = "p(s(X)) :- q(X).\nq(1).\n";
        let p = parse_program(src).unwrap();
        let (p2, aux) = rewrite_aggregates(&p).unwrap();
        assert_eq!(p, p2);
        assert!(aux.is_empty());
    }

    #[test]
    fn two_aggregates_get_distinct_aux_predicates() {
        let p = parse_program(
            "a(X) :- X = #count( Y: p(Y), q(Y) ).\nb(X) :- X = #count( Z: r(Z), q(Z) ).",
        )
        .unwrap();
        let (p, aux) = rewrite_aggregates(&p).unwrap();
        assert_eq!(aux, vec!["aux1", "aux2"]);
        assert_eq!(p.rules.len(), 4);
    }

    #[test]
    fn aux_names_avoid_user_predicates() {
        let p = parse_program("aux1(1). a(X) :- X = #count( Y: p(Y), q(Y) ).").unwrap();
        let (_, aux) = rewrite_aggregates(&p).unwrap();
        assert_eq!(aux, vec!["aux2"]);
    }

    #[test]
    fn single_atom_function_free_aggregate_kept_inline() {
        let p = parse_program("a(X) :- X = #count( Y: q(Y) ).").unwrap();
        let (p2, aux) = rewrite_aggregates(&p).unwrap();
        assert_eq!(p, p2);
        assert!(aux.is_empty());
    }

    #[test]
    fn aggregate_local_var_errors() {
        let p = parse_program("a(X) :- X = #count( Y, W: p(Y) ).").unwrap();
        assert!(matches!(
            rewrite_aggregates(&p),
            Err(RewriteError::UnsafeAggregateLocal { .. })
        ));
        let p = parse_program("a(X) :- q(Y), X = #count( Y: p(Y), r(Y) ).").unwrap();
        assert!(matches!(
            rewrite_aggregates(&p),
            Err(RewriteError::AggregateLocalUsedOutside { .. })
        ));
    }

    #[test]
    fn fact_interning_shares_structure() {
        let mut store = TermStore::new();
        let p = parse_program("p(s(1)). q(s(1)).").unwrap();
        let t1 = flatten_fact(&p.rules[0].head[0], &mut store, None).unwrap();
        let t2 = flatten_fact(&p.rules[1].head[0], &mut store, None).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(store.table("s").unwrap().len(), 1);
    }

    #[test]
    fn fact_nesting_violation_is_an_error() {
        let mut store = TermStore::new();
        let p = parse_program("p(s(s(1))).").unwrap();
        let err = flatten_fact(&p.rules[0].head[0], &mut store, Some(1)).unwrap_err();
        assert_eq!(
            err,
            RewriteError::FactNesting { fact: "p(s(s(1))).".to_string(), level: 2, bound: 1 }
        );
    }

    #[test]
    fn unflatten_inverts_flatten_on_crafted_rules() {
        for src in [
            "p(s(X)) :- a(X, f(Y, Z)).",
            "p(s(X)) :- q(s(X), Y).",
            "p(s(X)) :- q(s(Y), X).",
            "a(X) :- p(X), not ab(s(X)).",
            "p(s(f(1, a)), 2) :- q.",
            "m(X, Y) :- k(s(X, Y), T), p(W, Z, T).",
        ] {
            let p = parse_program(src).unwrap();
            let fr = flatten_rule(&p.rules[0], 0);
            let store = TermStore::new();
            assert_eq!(unflatten_rule(&fr, &store), p.rules[0], "roundtrip of {src}");
        }
    }

    #[test]
    fn safety_is_checked_after_flattening() {
        let store = TermStore::new();
        // X safe only through the function atom's arguments.
        let p = parse_program("p(X) :- q(s(X)).").unwrap();
        let fr = flatten_rule(&p.rules[0], 0);
        assert!(check_safety(&fr, &store).is_ok());

        let p = parse_program("p(X) :- q(Y).").unwrap();
        let fr = flatten_rule(&p.rules[0], 0);
        assert!(matches!(
            check_safety(&fr, &store),
            Err(RewriteError::UnsafeRule { var, .. }) if var == "X"
        ));

        let p = parse_program("p :- q(X), not r(Y).").unwrap();
        let fr = flatten_rule(&p.rules[0], 0);
        assert!(check_safety(&fr, &store).is_err());

        // The aggregate binds its bound variable.
        let p = parse_program("a(X) :- X = #count( Y: q(Y) ).").unwrap();
        let fr = flatten_rule(&p.rules[0], 0);
        assert!(check_safety(&fr, &store).is_ok());
    }

    #[test]
    fn non_ground_fact_is_unsafe() {
        let p = parse_program("p(X).").unwrap();
        let mut store = TermStore::new();
        let err = flatten_program(&p, &mut store, None).unwrap_err();
        assert!(matches!(err, RewriteError::UnsafeRule { .. }));
    }

    #[test]
    fn fresh_variables_avoid_source_names() {
        let p = parse_program("p(s(FN_1)) :- q(FN_1).").unwrap();
        let fr = flatten_rule(&p.rules[0], 0);
        let store = TermStore::new();
        assert_eq!(fr.text(&store), "p(FN_2) :- q(FN_1), #s(FN_2, FN_1).");
    }
}
