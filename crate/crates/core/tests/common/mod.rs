//! Seeded random generators shared by the property and acceptance
//! suites. Programs come out stratified and safe by construction, sized
//! so the exhaustive oracle stays fast. Negative literals carry no
//! function terms, and aggregates only count predicates from the layers
//! that are deterministic by construction (no disjunction reaches them).
#![allow(dead_code)] // each test target uses a different slice of this

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use funlog_core::ast::{Aggregate, Atom, Literal, Program, Rule, Term};

pub const VAR_POOL: [&str; 3] = ["X", "Y", "Z"];

fn gen_const(rng: &mut ChaCha8Rng, consts: &[Term]) -> Term {
    consts[rng.gen_range(0..consts.len())].clone()
}

fn gen_var(rng: &mut ChaCha8Rng, in_scope: &mut Vec<String>) -> Term {
    if !in_scope.is_empty() && rng.gen_bool(0.6) {
        return Term::Var(in_scope[rng.gen_range(0..in_scope.len())].clone());
    }
    for v in VAR_POOL {
        if !in_scope.iter().any(|x| x == v) {
            in_scope.push(v.to_string());
            return Term::Var(v.to_string());
        }
    }
    Term::Var(in_scope[rng.gen_range(0..in_scope.len())].clone())
}

fn gen_func_term(
    rng: &mut ChaCha8Rng,
    funcs: &[(String, usize)],
    consts: &[Term],
    in_scope: &mut Vec<String>,
    depth: u32,
) -> Term {
    let (name, arity) = funcs[rng.gen_range(0..funcs.len())].clone();
    let args = (0..arity)
        .map(|_| {
            if depth > 1 && rng.gen_bool(0.3) {
                gen_func_term(rng, funcs, consts, in_scope, depth - 1)
            } else if rng.gen_bool(0.6) {
                gen_var(rng, in_scope)
            } else {
                gen_const(rng, consts)
            }
        })
        .collect();
    Term::Func(name, args)
}

fn gen_func_term_bound(
    rng: &mut ChaCha8Rng,
    funcs: &[(String, usize)],
    consts: &[Term],
    bound: &[String],
    depth: u32,
) -> Term {
    let (name, arity) = funcs[rng.gen_range(0..funcs.len())].clone();
    let args = (0..arity)
        .map(|_| {
            if depth > 1 && rng.gen_bool(0.3) {
                gen_func_term_bound(rng, funcs, consts, bound, depth - 1)
            } else if !bound.is_empty() && rng.gen_bool(0.6) {
                Term::Var(bound[rng.gen_range(0..bound.len())].clone())
            } else {
                gen_const(rng, consts)
            }
        })
        .collect();
    Term::Func(name, args)
}

/// One random rule with nested function terms, for the flatten
/// round-trip. Safety is irrelevant there, variety is what counts.
pub fn random_rule(seed: u64) -> Rule {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let consts = vec![Term::sym("a"), Term::sym("b"), Term::int(1)];
    let funcs: Vec<(String, usize)> =
        vec![("s".to_string(), 1), ("f".to_string(), 2), ("g".to_string(), 1)];
    let mut in_scope: Vec<String> = Vec::new();

    let gen_term = |rng: &mut ChaCha8Rng, in_scope: &mut Vec<String>| -> Term {
        let roll: f64 = rng.gen();
        if roll < 0.4 {
            let depth = rng.gen_range(1..=3);
            gen_func_term(rng, &funcs, &consts, in_scope, depth)
        } else if roll < 0.75 {
            gen_var(rng, in_scope)
        } else {
            gen_const(rng, &consts)
        }
    };

    let n_body = rng.gen_range(1..=3);
    let mut body = Vec::new();
    for i in 0..n_body {
        let (pred, arity) = match rng.gen_range(0..3) {
            0 => ("q", 2),
            1 => ("t", 1),
            _ => ("u", 2),
        };
        let args = (0..arity).map(|_| gen_term(&mut rng, &mut in_scope)).collect();
        let atom = Atom::new(pred, args);
        if i > 0 && rng.gen_bool(0.3) {
            body.push(Literal::Neg(atom));
        } else {
            body.push(Literal::Pos(atom));
        }
    }
    let head_args = (0..rng.gen_range(1..=2))
        .map(|_| gen_term(&mut rng, &mut in_scope))
        .collect();
    Rule::new(vec![Atom::new("p", head_args)], body)
}

pub struct GenProgram {
    pub program: Program,
    pub text: String,
    pub k: u32,
}

/// Predicate layers:
///   0: u, v      facts only (always decided)
///   1: p, q      non-disjunctive rules, may recurse positively (decided)
///   2: r, r2     disjunction allowed here
///   3: w         may negate over layer 2 (possibly-true negatives)
/// Aggregates count only layer 0/1 predicates, so their tables are
/// established when counted, and their hosts derive a sink predicate
/// nothing else consumes: count values are integers from outside the
/// term universe, and the exhaustive oracle only enumerates universe
/// terms.
struct PredInfo {
    name: &'static str,
    arity: usize,
    layer: u32,
}

/// A random stratified program within the differential-corpus envelope:
/// at most three function symbols of arity at most two, at most four
/// constants, at most six rules, optional #count, nesting bound at most
/// three (lowered until the oracle's enumeration stays small).
pub fn random_program(seed: u64) -> GenProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let all_consts = [Term::sym("a"), Term::sym("b"), Term::int(1), Term::int(2)];
    let n_consts = rng.gen_range(2..=3);
    let consts: Vec<Term> = all_consts.choose_multiple(&mut rng, n_consts).cloned().collect();

    let mut funcs: Vec<(String, usize)> = vec![("s".to_string(), 1)];
    if rng.gen_bool(0.4) {
        funcs.push(("f".to_string(), 2));
    }
    if rng.gen_bool(0.3) {
        funcs.push(("g".to_string(), 1));
    }
    let mut k: u32 = rng.gen_range(0..=3);

    let preds = [
        PredInfo { name: "u", arity: 1, layer: 0 },
        PredInfo { name: "v", arity: rng.gen_range(1..=2), layer: 0 },
        PredInfo { name: "p", arity: 1, layer: 1 },
        PredInfo { name: "q", arity: rng.gen_range(1..=2), layer: 1 },
        PredInfo { name: "r", arity: 1, layer: 2 },
        PredInfo { name: "r2", arity: 1, layer: 2 },
        PredInfo { name: "w", arity: 1, layer: 3 },
    ];
    let by_layer = |max: u32, min: u32| -> Vec<usize> {
        preds
            .iter()
            .enumerate()
            .filter(|(_, p)| p.layer >= min && p.layer <= max)
            .map(|(i, _)| i)
            .collect()
    };

    let mut rules: Vec<Rule> = Vec::new();
    let mut max_enum_vars = 0usize;
    let n_rules = rng.gen_range(2..=5);
    let mut used_aggregate = false;
    for _ in 0..n_rules {
        let head_choices = by_layer(3, 1);
        let head_idx = head_choices[rng.gen_range(0..head_choices.len())];
        let layer = preds[head_idx].layer;
        let mut in_scope: Vec<String> = Vec::new();
        let mut body: Vec<Literal> = Vec::new();

        // Positive literals first; they carry the bindings. The first
        // one leans on the fact layer so bodies actually fire; later
        // ones may recurse within the layer. Top-layer rules prefer to
        // walk over the disjunctive layer and negate its sibling.
        let pos_pool = by_layer(layer, 0);
        let edb_pool = by_layer(0, 0);
        let over_disjunctive = layer == 3 && rng.gen_bool(0.6);
        let mut first_literal: Option<(usize, Vec<Term>)> = None;
        for i in 0..rng.gen_range(1..=2) {
            let bi = if i == 0 && over_disjunctive {
                by_layer(2, 2)[rng.gen_range(0..2)]
            } else if i == 0 && rng.gen_bool(0.65) {
                edb_pool[rng.gen_range(0..edb_pool.len())]
            } else {
                pos_pool[rng.gen_range(0..pos_pool.len())]
            };
            let args = (0..preds[bi].arity)
                .map(|_| {
                    if rng.gen_bool(0.25) && k >= 1 {
                        gen_func_term(&mut rng, &funcs, &consts, &mut in_scope, 1)
                    } else if rng.gen_bool(0.75) {
                        gen_var(&mut rng, &mut in_scope)
                    } else {
                        gen_const(&mut rng, &consts)
                    }
                })
                .collect();
            if i == 0 {
                first_literal = Some((bi, args));
                let (bi, args) = first_literal.as_ref().unwrap();
                body.push(Literal::Pos(Atom::new(preds[*bi].name, args.clone())));
            } else {
                body.push(Literal::Pos(Atom::new(preds[bi].name, args)));
            }
        }
        let bound_vars = in_scope.clone();

        // Optional negative literal over a strictly lower layer, with
        // variables already bound and no function terms. The top layer
        // negates more often: that is where possibly-true atoms live.
        let neg_prob = if layer == 3 { 0.8 } else { 0.35 };
        if rng.gen_bool(neg_prob) && layer > 0 {
            // Walking the disjunctive layer and negating the sibling
            // over the same tuple is the shape that leaves undecided
            // negatives in the ground rules.
            let sibling = first_literal.as_ref().and_then(|(bi, args)| {
                match preds[*bi].name {
                    "r" => Some(Atom::new("r2", args.clone())),
                    "r2" => Some(Atom::new("r", args.clone())),
                    _ => None,
                }
            });
            if let Some(sib) = sibling.filter(|_| over_disjunctive && rng.gen_bool(0.8)) {
                body.push(Literal::Neg(sib));
            } else {
                let lower = if layer == 3 && rng.gen_bool(0.7) {
                    by_layer(2, 2)
                } else {
                    by_layer(layer - 1, 0)
                };
                let ni = lower[rng.gen_range(0..lower.len())];
                let args = (0..preds[ni].arity)
                    .map(|_| {
                        if !bound_vars.is_empty() && rng.gen_bool(0.7) {
                            Term::Var(bound_vars[rng.gen_range(0..bound_vars.len())].clone())
                        } else {
                            gen_const(&mut rng, &consts)
                        }
                    })
                    .collect();
                body.push(Literal::Neg(Atom::new(preds[ni].name, args)));
            }
        }

        // Optional aggregate over the deterministic layers; its bound
        // variable flows into the head.
        let mut agg_var: Option<String> = None;
        if !used_aggregate && rng.gen_bool(0.3) && layer > 0 {
            let decided = by_layer(layer.saturating_sub(1).min(1), 0);
            used_aggregate = true;
            let local = "L".to_string();
            let mut conjunction = Vec::new();
            for _ in 0..rng.gen_range(1..=2) {
                let ci = decided[rng.gen_range(0..decided.len())];
                let args = (0..preds[ci].arity)
                    .map(|i| {
                        if i == 0 {
                            if k >= 1 && rng.gen_bool(0.3) {
                                Term::func("s", vec![Term::Var(local.clone())])
                            } else {
                                Term::Var(local.clone())
                            }
                        } else if !bound_vars.is_empty() && rng.gen_bool(0.5) {
                            Term::Var(bound_vars[rng.gen_range(0..bound_vars.len())].clone())
                        } else {
                            gen_const(&mut rng, &consts)
                        }
                    })
                    .collect();
                conjunction.push(Atom::new(preds[ci].name, args));
            }
            let bv = "N".to_string();
            body.push(Literal::Aggregate(Aggregate {
                bound_var: bv.clone(),
                local_vars: vec![local],
                conjunction,
            }));
            agg_var = Some(bv);
        }

        // Head: variables come from the positive body.
        let gen_head = |rng: &mut ChaCha8Rng, idx: usize| -> Atom {
            let args = (0..preds[idx].arity)
                .map(|_| {
                    if !bound_vars.is_empty() && rng.gen_bool(0.5) {
                        let v = Term::Var(bound_vars[rng.gen_range(0..bound_vars.len())].clone());
                        if k >= 1 && rng.gen_bool(0.4) {
                            Term::func("s", vec![v])
                        } else {
                            v
                        }
                    } else if !bound_vars.is_empty() && k >= 1 && rng.gen_bool(0.3) {
                        gen_func_term_bound(rng, &funcs, &consts, &bound_vars, 2)
                    } else {
                        gen_const(rng, &consts)
                    }
                })
                .collect();
            Atom::new(preds[idx].name, args)
        };

        // Aggregate hosts derive the sink predicate; everything else
        // uses the chosen head, sometimes disjunctively.
        let mut head = if let Some(v) = &agg_var {
            vec![Atom::new("cnt", vec![Term::Var(v.clone())])]
        } else {
            vec![gen_head(&mut rng, head_idx)]
        };
        if layer == 2 && agg_var.is_none() && rng.gen_bool(0.5) {
            let other = if preds[head_idx].name == "r" { 5 } else { 4 };
            // Sibling disjunct usually shares the argument tuple, the
            // shape that leaves undecided negatives downstream.
            if rng.gen_bool(0.7) {
                head.push(Atom::new(preds[other].name, head[0].args.clone()));
            } else {
                head.push(gen_head(&mut rng, other));
            }
            head.dedup();
        }

        let mut enum_vars = in_scope.clone();
        enum_vars.retain(|v| agg_var.as_deref() != Some(v));
        max_enum_vars = max_enum_vars.max(enum_vars.len());
        rules.push(Rule::new(head, body));
    }

    // Optional constraint; negatives here may hit undecided predicates.
    if rng.gen_bool(0.25) {
        let mut in_scope = Vec::new();
        let derived = by_layer(3, 1);
        let pi = derived[rng.gen_range(0..derived.len())];
        let args = (0..preds[pi].arity).map(|_| gen_var(&mut rng, &mut in_scope)).collect();
        let mut body = vec![Literal::Pos(Atom::new(preds[pi].name, args))];
        if rng.gen_bool(0.5) {
            let qi = rng.gen_range(0..preds.len());
            let args = (0..preds[qi].arity)
                .map(|_| {
                    if rng.gen_bool(0.6) {
                        Term::Var(in_scope[rng.gen_range(0..in_scope.len())].clone())
                    } else {
                        gen_const(&mut rng, &consts)
                    }
                })
                .collect();
            body.push(Literal::Neg(Atom::new(preds[qi].name, args)));
        }
        max_enum_vars = max_enum_vars.max(in_scope.len());
        rules.push(Rule::new(vec![], body));
    }

    // Keep the oracle's exhaustive enumeration small: lower the bound
    // until |universe|^vars fits the budget.
    while k > 0 && universe_size(consts.len(), &funcs, k).pow(max_enum_vars.max(1) as u32) > 20_000
    {
        k -= 1;
    }

    // EDB facts come last so their term depth respects the final bound.
    let mut facts: Vec<Rule> = Vec::new();
    for pi in 0..2 {
        for _ in 0..rng.gen_range(1..=2) {
            let args = (0..preds[pi].arity)
                .map(|_| {
                    if k >= 1 && rng.gen_bool(0.3) {
                        Term::func("s", vec![gen_const(&mut rng, &consts)])
                    } else {
                        gen_const(&mut rng, &consts)
                    }
                })
                .collect();
            facts.push(Rule::new(vec![Atom::new(preds[pi].name, args)], vec![]));
        }
    }
    facts.append(&mut rules);
    let rules = facts;

    let program = Program { rules };
    let text = funlog_core::ast::print_program(&program);
    GenProgram { program, text, k }
}

/// Upper bound on the bounded-universe size, for throttling only.
fn universe_size(n_consts: usize, funcs: &[(String, usize)], k: u32) -> usize {
    let mut total = n_consts;
    for _ in 1..=k {
        let below = total;
        let mut new = 0usize;
        for (_, arity) in funcs {
            new = new.saturating_add(below.saturating_pow(*arity as u32));
        }
        total = total.saturating_add(new);
        if total > 1_000_000 {
            return total;
        }
    }
    total
}
