//! Standalone property suites: parser round-trip, flatten/unflatten
//! round-trip over 1000 random rules, table bijectivity and trail
//! transactionality audits, reordering invariants.

mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use funlog_core::ast::{print_program, Literal, Program, Rule, Term};
use funlog_core::flat::FlatLiteral;
use funlog_core::parse::parse_program;
use funlog_core::reorder::verify_first_fit;
use funlog_core::rewrite::{flatten_rule, unflatten_rule};
use funlog_core::term_store::{TermId, TermStore};
use funlog_core::Provenance;

fn distinct_applications(rule: &Rule) -> Vec<Term> {
    fn walk(t: &Term, out: &mut Vec<Term>) {
        if let Term::Func(_, args) = t {
            for a in args {
                walk(a, out);
            }
            if !out.contains(t) {
                out.push(t.clone());
            }
        }
    }
    let mut out = Vec::new();
    for a in &rule.head {
        for t in &a.args {
            walk(t, &mut out);
        }
    }
    for l in &rule.body {
        if let Literal::Pos(a) | Literal::Neg(a) = l {
            for t in &a.args {
                walk(t, &mut out);
            }
        }
    }
    out
}

fn occurs_in_body(rule: &Rule, app: &Term) -> bool {
    fn occurs(app: &Term, t: &Term) -> bool {
        t == app
            || match t {
                Term::Func(_, args) => args.iter().any(|a| occurs(app, a)),
                _ => false,
            }
    }
    rule.body.iter().any(|l| match l {
        Literal::Pos(a) | Literal::Neg(a) => a.args.iter().any(|t| occurs(app, t)),
        Literal::Aggregate(_) => false,
    })
}

/// Flatten/unflatten round-trip over 1000 random rules, with the
/// one-atom-per-application and provenance audits.
#[test]
fn flatten_unflatten_roundtrip_1000() {
    let store = TermStore::new();
    for seed in 0..1000u64 {
        let rule = common::random_rule(seed);
        let fr = flatten_rule(&rule, 0);

        let back = unflatten_rule(&fr, &store);
        assert_eq!(back, rule, "roundtrip failed for seed {seed}: {rule}");

        let apps = distinct_applications(&rule);
        let function_atoms: Vec<_> = fr
            .body
            .iter()
            .filter_map(|l| match l {
                FlatLiteral::Function(fa) => Some(fa),
                _ => None,
            })
            .collect();
        assert_eq!(
            function_atoms.len(),
            apps.len(),
            "one function atom per distinct application, seed {seed}: {rule}"
        );

        // Provenance: head-only exactly when the application never
        // occurs in the body. Rebuild each atom's application term by
        // unflattening a synthetic head that carries all id variables.
        let rebuilt = unflatten_rule(
            &funlog_core::flat::FlatRule {
                head: vec![funlog_core::flat::FlatAtom {
                    predicate: "x".to_string(),
                    args: function_atoms.iter().map(|fa| fa.id_arg.clone()).collect(),
                }],
                body: fr
                    .body
                    .iter()
                    .filter(|l| matches!(l, FlatLiteral::Function(_)))
                    .cloned()
                    .collect(),
                origin: 0,
            },
            &store,
        );
        for (fa, app) in function_atoms.iter().zip(&rebuilt.head[0].args) {
            let expected = if occurs_in_body(&rule, app) {
                Provenance::BodyTouched
            } else {
                Provenance::HeadOnly
            };
            assert_eq!(fa.provenance, expected, "provenance of {app} in {rule}");
        }
    }
    println!("flatten/unflatten roundtrip: 1000 rules ok");
}

proptest! {
    /// parse(print(p)) is structurally equal to p.
    #[test]
    fn parser_roundtrip(seed in any::<u64>()) {
        let gp = common::random_program(seed);
        let printed = print_program(&gp.program);
        let parsed = parse_program(&printed).expect("generated programs parse");
        prop_assert_eq!(&parsed, &gp.program);
        let printed_again = print_program(&parsed);
        prop_assert_eq!(printed, printed_again);
    }

    /// Single random rules (heavier nesting than whole programs) also
    /// survive print/parse.
    #[test]
    fn parser_roundtrip_single_rules(seed in any::<u64>()) {
        let rule = common::random_rule(seed);
        let program = Program { rules: vec![rule] };
        let printed = print_program(&program);
        let parsed = parse_program(&printed).expect("generated rules parse");
        prop_assert_eq!(parsed, program);
    }
}

/// Interning the same terms in shuffled orders yields the same ids and
/// bijective tables.
#[test]
fn table_bijectivity_and_single_identifier() {
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = TermStore::new();
        let mut terms: Vec<Term> = (0..12)
            .map(|i| {
                let r = common::random_rule(seed * 31 + i);
                // Harvest ground terms from generated rules by
                // substituting variables with constants.
                fn groundify(t: &Term) -> Term {
                    match t {
                        Term::Var(_) => Term::sym("c"),
                        Term::Func(f, args) => {
                            Term::Func(f.clone(), args.iter().map(groundify).collect())
                        }
                        other => other.clone(),
                    }
                }
                groundify(&r.head[0].args[0])
            })
            .collect();

        let first: Vec<TermId> =
            terms.iter().map(|t| store.intern_term(t, None).unwrap()).collect();
        let mut shuffled: Vec<usize> = (0..terms.len()).collect();
        shuffled.shuffle(&mut rng);
        for &i in &shuffled {
            let again = store.intern_term(&terms[i], None).unwrap();
            assert_eq!(again, first[i], "single identifier per value, seed {seed}");
        }
        store.check_invariants(None).unwrap();
        terms.shuffle(&mut rng);
    }
    println!("table bijectivity and single-identifier audits ok");
}

/// mark / tentative inserts / rollback leaves the store byte-identical.
#[test]
fn trail_transactionality() {
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = TermStore::new();
        let mut ids: Vec<TermId> = vec![
            store.intern_sym("a"),
            store.intern_sym("b"),
            store.intern_int(1),
        ];
        for _ in 0..rng.gen_range(0..6) {
            let arg = ids[rng.gen_range(0..ids.len())];
            ids.push(store.insert_function("s", &[arg], None, false).unwrap());
        }
        let snapshot = store.debug_dump();
        let stats_before = store.stats();

        let mark = store.mark_trail();
        for _ in 0..rng.gen_range(1..8) {
            let a = ids[rng.gen_range(0..ids.len())];
            let b = ids[rng.gen_range(0..ids.len())];
            let symbol = if rng.gen_bool(0.5) { "f" } else { "s" };
            if symbol == "f" {
                let _ = store.insert_function("f", &[a, b], Some(4), true);
            } else {
                let _ = store.insert_function("s", &[a], Some(4), true);
            }
        }
        store.rollback(mark);
        assert_eq!(store.debug_dump(), snapshot, "transactionality, seed {seed}");
        assert_eq!(store.trail_len(), 0);
        let stats_after = store.stats();
        assert_eq!(
            stats_after.invented - stats_before.invented,
            stats_after.rolled_back - stats_before.rolled_back,
            "every tentative mint was rolled back"
        );
        store.check_invariants(Some(4)).unwrap();
    }
    println!("trail transactionality audits ok");
}

/// Reordered bodies are permutations, function atoms sit first-fit, and
/// negatives/aggregates land after their variables are bound.
#[test]
fn reorder_invariants_over_random_programs() {
    use funlog_core::depgraph::{build_dependency_graph, evaluation_order};
    use funlog_core::reorder::reorder_program;
    use funlog_core::rewrite::{flatten_program, rewrite_aggregates};

    let mut checked = 0;
    let mut seed = 0u64;
    while checked < 150 {
        let gp = common::random_program(seed);
        seed += 1;
        let (program, _) = rewrite_aggregates(&gp.program).unwrap();
        let mut store = TermStore::new();
        let mut fp = match flatten_program(&program, &mut store, Some(gp.k)) {
            Ok(fp) => fp,
            Err(_) => continue,
        };
        if evaluation_order(&build_dependency_graph(&fp)).is_err() {
            continue;
        }
        let before: Vec<Vec<String>> = fp
            .rules
            .iter()
            .map(|r| {
                let mut v: Vec<String> = r.body.iter().map(|l| l.text(&store)).collect();
                v.sort();
                v
            })
            .collect();
        reorder_program(&mut fp, &store).unwrap();
        for (i, rule) in fp.rules.iter().enumerate() {
            let mut after: Vec<String> = rule.body.iter().map(|l| l.text(&store)).collect();
            after.sort();
            assert_eq!(after, before[i], "permutation, seed {}", seed - 1);
            assert!(verify_first_fit(rule), "first fit, seed {}: {}", seed - 1, rule.text(&store));

            // Negatives and aggregates only after their variables bound.
            let mut bound = funlog_core::reorder::BoundSet::new();
            for lit in &rule.body {
                match lit {
                    FlatLiteral::Neg(a) => {
                        for t in &a.args {
                            assert!(bound.is_bound(t), "negative bound, seed {}", seed - 1);
                        }
                    }
                    FlatLiteral::Aggregate(agg) => {
                        for v in agg.global_vars() {
                            assert!(
                                bound.is_bound(&funlog_core::flat::FlatTerm::Var(v)),
                                "aggregate globals bound, seed {}",
                                seed - 1
                            );
                        }
                    }
                    _ => {}
                }
                bound.absorb(lit);
            }
        }
        checked += 1;
    }
    println!("reorder invariants over {checked} random programs ok");
}

/// Positive arcs point to the same or a later component; negative and
/// aggregate arcs point strictly later.
#[test]
fn depgraph_arc_directions() {
    use funlog_core::depgraph::{build_dependency_graph, evaluation_order, EdgeKind};

    let mut checked = 0;
    let mut seed = 3000u64;
    while checked < 100 {
        let gp = common::random_program(seed);
        seed += 1;
        let (fp, _, _) = match funlog_core::pipeline::prepare(&gp.text, Some(gp.k)) {
            Ok(x) => x,
            Err(_) => continue,
        };
        let graph = build_dependency_graph(&fp);
        let order = match evaluation_order(&graph) {
            Ok(o) => o,
            Err(_) => continue,
        };
        let pos_of = |name: &str| {
            order
                .iter()
                .position(|c| c.iter().any(|p| p == name))
                .expect("every predicate has a component")
        };
        for (from, to, kind) in &graph.edges {
            match kind {
                EdgeKind::Pos => assert!(pos_of(from) <= pos_of(to), "seed {}", seed - 1),
                EdgeKind::Neg | EdgeKind::Agg => {
                    assert!(pos_of(from) < pos_of(to), "seed {}", seed - 1)
                }
            }
        }
        // Node set: exactly the non-function predicates of the program.
        assert!(graph.nodes.iter().all(|n| !n.starts_with('#')));
        checked += 1;
    }
    println!("dependency arc directions over {checked} programs ok");
}
