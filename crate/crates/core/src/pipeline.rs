//! Pipeline wiring: parse, rewrite, reorder, ground, answer sets, plus
//! loading of already-flattened programs (the rewriter's own output can
//! be fed back in; `#f` atoms and `@k` ids mark that form).

use std::collections::{HashMap, HashSet};

use indexmap::IndexMap;

use crate::ast::{Literal, Program, Term};
use crate::depgraph::{build_dependency_graph, evaluation_order, to_dot, StratificationError};
use crate::flat::{
    FlatAggregate, FlatAtom, FlatLiteral, FlatProgram, FlatRule, FlatTerm, FunctionAtom,
    Provenance,
};
use crate::ground::{ground_program, GroundOptions, GroundProgram};
use crate::oracle::{answer_sets, naive_ground, readback, OracleError};
use crate::parse::{parse_program, ParseError};
use crate::reorder::{reorder_program, PlacementError};
use crate::rewrite::{flatten_program, rewrite_aggregates, RewriteError};
use crate::term_store::TermStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Parse,
    Rewrite,
    Reorder,
    Depgraph,
    Ground,
    AnswerSets,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub max_nesting: Option<u32>,
    pub show_ids: bool,
    pub oracle: bool,
    pub stats: bool,
    pub backjump: bool,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            mode: Mode::Ground,
            max_nesting: None,
            show_ids: false,
            oracle: false,
            stats: false,
            backjump: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LoadError {
    #[error("id @{0} is referenced but never defined by a function-table fact")]
    DanglingId(u32),
    #[error("id @{0} is defined twice")]
    DuplicateId(u32),
    #[error("cyclic id definitions involving @{0}")]
    IdCycle(u32),
    #[error("conflicting table entries: {0}")]
    TableConflict(String),
    #[error("function-table fact `{0}` must name its id as `@k`")]
    BadTableFact(String),
    #[error("nested term in flattened rule `{0}`")]
    NestedTermInFlatRule(String),
    #[error("function predicate `{0}` needs an id and at least one argument")]
    FunctionPredicateArity(String),
    #[error("negated function atom `{0}` is not supported")]
    NegatedFunctionAtom(String),
    #[error("table fact `{0}` exceeds the nesting bound: level {1} > {2}")]
    Nesting(String, u32, u32),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PipelineError {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Rewrite(#[from] RewriteError),
    #[error("{0}")]
    Stratification(#[from] StratificationError),
    #[error("{0}")]
    Placement(#[from] PlacementError),
    #[error("{0}")]
    Load(#[from] LoadError),
    #[error("{0}")]
    Oracle(#[from] OracleError),
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub stdout: String,
    pub stats: Option<String>,
    pub warnings: Vec<String>,
}

fn program_is_flat(p: &Program) -> bool {
    fn term_has_id(t: &Term) -> bool {
        match t {
            Term::Id(_) => true,
            Term::Func(_, args) => args.iter().any(term_has_id),
            _ => false,
        }
    }
    p.rules.iter().any(|r| {
        r.head.iter().any(|a| a.is_function_predicate() || a.args.iter().any(term_has_id))
            || r.body.iter().any(|l| match l {
                Literal::Pos(a) | Literal::Neg(a) => {
                    a.is_function_predicate() || a.args.iter().any(term_has_id)
                }
                Literal::Aggregate(agg) => agg
                    .conjunction
                    .iter()
                    .any(|a| a.is_function_predicate() || a.args.iter().any(term_has_id)),
            })
    })
}

/// Rebuilds term store and flat rules from a printed flat program.
fn load_flat(
    p: &Program,
    max_nesting: Option<u32>,
) -> Result<(FlatProgram, TermStore), PipelineError> {
    let mut store = TermStore::new();

    // First pass: function-table facts #f(@k, args...).
    struct Def {
        symbol: String,
        args: Vec<Term>,
    }
    let mut defs: IndexMap<u32, Def> = IndexMap::new();
    for rule in &p.rules {
        if !(rule.body.is_empty() && rule.head.len() == 1) {
            continue;
        }
        let atom = &rule.head[0];
        if !atom.is_function_predicate() || !atom.is_ground() {
            continue;
        }
        if atom.args.len() < 2 {
            return Err(LoadError::FunctionPredicateArity(atom.to_string()).into());
        }
        let id = match &atom.args[0] {
            Term::Id(k) => *k,
            _ => return Err(LoadError::BadTableFact(atom.to_string()).into()),
        };
        if defs.contains_key(&id) {
            return Err(LoadError::DuplicateId(id).into());
        }
        defs.insert(
            id,
            Def { symbol: atom.predicate[1..].to_string(), args: atom.args[1..].to_vec() },
        );
    }

    // Resolve definitions in dependency order.
    let mut resolved: HashMap<u32, crate::term_store::TermId> = HashMap::new();
    fn resolve_id(
        k: u32,
        defs: &IndexMap<u32, Def>,
        resolved: &mut HashMap<u32, crate::term_store::TermId>,
        in_progress: &mut HashSet<u32>,
        store: &mut TermStore,
        max_nesting: Option<u32>,
    ) -> Result<crate::term_store::TermId, PipelineError> {
        if let Some(&id) = resolved.get(&k) {
            return Ok(id);
        }
        if !in_progress.insert(k) {
            return Err(LoadError::IdCycle(k).into());
        }
        let def = defs.get(&k).ok_or(LoadError::DanglingId(k))?;
        let mut args = Vec::with_capacity(def.args.len());
        for t in &def.args {
            args.push(resolve_term(t, defs, resolved, in_progress, store, max_nesting)?);
        }
        let id = store.insert_function(&def.symbol, &args, max_nesting, false).map_err(|e| {
            LoadError::Nesting(format!("#{}(@{k}, ...)", def.symbol), e.level, e.bound)
        })?;
        in_progress.remove(&k);
        resolved.insert(k, id);
        Ok(id)
    }
    fn resolve_term(
        t: &Term,
        defs: &IndexMap<u32, Def>,
        resolved: &mut HashMap<u32, crate::term_store::TermId>,
        in_progress: &mut HashSet<u32>,
        store: &mut TermStore,
        max_nesting: Option<u32>,
    ) -> Result<crate::term_store::TermId, PipelineError> {
        match t {
            Term::Const(c) => Ok(store.intern_constant(c)),
            Term::Id(k) => resolve_id(*k, defs, resolved, in_progress, store, max_nesting),
            Term::Func(name, args) => {
                let mut ids = Vec::with_capacity(args.len());
                for a in args {
                    ids.push(resolve_term(a, defs, resolved, in_progress, store, max_nesting)?);
                }
                store
                    .insert_function(name, &ids, max_nesting, false)
                    .map_err(|e| LoadError::Nesting(t.to_string(), e.level, e.bound).into())
            }
            Term::Var(v) => panic!("variable {v} in ground position"),
        }
    }
    {
        let keys: Vec<u32> = defs.keys().copied().collect();
        let mut in_progress = HashSet::new();
        for k in keys {
            resolve_id(k, &defs, &mut resolved, &mut in_progress, &mut store, max_nesting)?;
        }
        // Two ids naming one tuple would break the table bijection.
        let mut by_term: HashMap<crate::term_store::TermId, u32> = HashMap::new();
        for (&k, &id) in &resolved {
            if let Some(&other) = by_term.get(&id) {
                return Err(LoadError::TableConflict(format!(
                    "@{} and @{} name the same term {}",
                    other.min(k),
                    other.max(k),
                    store.to_term(id)
                ))
                .into());
            }
            by_term.insert(id, k);
        }
    }

    let mut out = FlatProgram::default();
    for (i, rule) in p.rules.iter().enumerate() {
        if rule.body.is_empty() && rule.head.len() == 1 && rule.head[0].is_ground() {
            let atom = &rule.head[0];
            if atom.is_function_predicate() {
                continue; // table fact, already loaded
            }
            let mut tuple = Vec::with_capacity(atom.args.len());
            let mut in_progress = HashSet::new();
            for t in &atom.args {
                tuple.push(resolve_term(
                    t,
                    &defs,
                    &mut resolved,
                    &mut in_progress,
                    &mut store,
                    max_nesting,
                )?);
            }
            out.tables.add(&atom.predicate, tuple, true);
            continue;
        }

        let fr = build_flat_rule(rule, i, &resolved)?;
        crate::rewrite::check_safety(&fr, &store)?;
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
    Ok((out, store))
}

fn build_flat_rule(
    rule: &crate::ast::Rule,
    origin: usize,
    resolved: &HashMap<u32, crate::term_store::TermId>,
) -> Result<FlatRule, PipelineError> {
    let flat_term = |t: &Term| -> Result<FlatTerm, PipelineError> {
        match t {
            Term::Const(c) => Ok(FlatTerm::Const(c.clone())),
            Term::Var(v) => Ok(FlatTerm::Var(v.clone())),
            Term::Id(k) => Ok(FlatTerm::Id(
                *resolved.get(k).ok_or(LoadError::DanglingId(*k))?,
            )),
            Term::Func(..) => Err(LoadError::NestedTermInFlatRule(rule.to_string()).into()),
        }
    };
    let flat_atom = |a: &crate::ast::Atom| -> Result<FlatAtom, PipelineError> {
        Ok(FlatAtom {
            predicate: a.predicate.clone(),
            args: a.args.iter().map(&flat_term).collect::<Result<_, _>>()?,
        })
    };

    let mut body = Vec::new();
    for lit in &rule.body {
        match lit {
            Literal::Pos(a) if a.is_function_predicate() => {
                if a.args.len() < 2 {
                    return Err(LoadError::FunctionPredicateArity(a.to_string()).into());
                }
                body.push(FlatLiteral::Function(FunctionAtom {
                    symbol: a.predicate[1..].to_string(),
                    id_arg: flat_term(&a.args[0])?,
                    args: a.args[1..].iter().map(&flat_term).collect::<Result<_, _>>()?,
                    provenance: Provenance::BodyTouched, // recovered below
                }));
            }
            Literal::Neg(a) if a.is_function_predicate() => {
                return Err(LoadError::NegatedFunctionAtom(a.to_string()).into());
            }
            Literal::Pos(a) => body.push(FlatLiteral::Pos(flat_atom(a)?)),
            Literal::Neg(a) => body.push(FlatLiteral::Neg(flat_atom(a)?)),
            Literal::Aggregate(agg) => {
                assert_eq!(agg.conjunction.len(), 1, "aggregates are extracted before loading");
                body.push(FlatLiteral::Aggregate(FlatAggregate {
                    bound: FlatTerm::Var(agg.bound_var.clone()),
                    local_vars: agg.local_vars.clone(),
                    atom: flat_atom(&agg.conjunction[0])?,
                }));
            }
        }
    }
    let head: Vec<FlatAtom> = rule.head.iter().map(flat_atom).collect::<Result<_, _>>()?;

    let mut fr = FlatRule { head, body, origin };
    recover_provenance(&mut fr);
    Ok(fr)
}

/// Provenance of loaded function atoms: an id that any standard literal
/// or a body-touched atom's argument mentions is body-touched; remaining
/// atoms whose id feeds the head (directly or through other head-only
/// atoms) are head-only; orphans stay body-touched and never invent.
fn recover_provenance(fr: &mut FlatRule) {
    let id_vars: Vec<Option<String>> = fr
        .body
        .iter()
        .map(|l| match l {
            FlatLiteral::Function(fa) => fa.id_arg.as_var().map(str::to_string),
            _ => None,
        })
        .collect();
    let is_id = |v: &str| id_vars.iter().flatten().any(|x| x == v);

    let mut standard_vars: HashSet<String> = HashSet::new();
    for l in &fr.body {
        match l {
            FlatLiteral::Pos(a) | FlatLiteral::Neg(a) => {
                standard_vars.extend(a.vars().map(str::to_string))
            }
            FlatLiteral::Aggregate(agg) => {
                standard_vars.extend(agg.atom.vars().map(str::to_string));
                if let Some(v) = agg.bound.as_var() {
                    standard_vars.insert(v.to_string());
                }
            }
            FlatLiteral::Function(_) => {}
        }
    }

    let n = fr.body.len();
    let mut touched: Vec<bool> = (0..n)
        .map(|i| match (&fr.body[i], &id_vars[i]) {
            (FlatLiteral::Function(_), Some(v)) => standard_vars.contains(v),
            (FlatLiteral::Function(_), None) => true, // ground id: lookup only
            _ => false,
        })
        .collect();
    loop {
        let mut changed = false;
        for i in 0..n {
            if !touched[i] {
                continue;
            }
            if let FlatLiteral::Function(fa) = &fr.body[i] {
                for arg in &fa.args {
                    if let Some(v) = arg.as_var() {
                        for j in 0..n {
                            if !touched[j] && id_vars[j].as_deref() == Some(v) {
                                touched[j] = true;
                                changed = true;
                            }
                        }
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }

    let mut head_vars: HashSet<String> = HashSet::new();
    for a in &fr.head {
        head_vars.extend(a.vars().map(str::to_string));
    }
    let mut head_only: Vec<bool> = (0..n)
        .map(|i| {
            !touched[i]
                && matches!(&fr.body[i], FlatLiteral::Function(_))
                && id_vars[i].as_deref().is_some_and(|v| head_vars.contains(v))
        })
        .collect();
    loop {
        let mut changed = false;
        for i in 0..n {
            if !head_only[i] {
                continue;
            }
            if let FlatLiteral::Function(fa) = &fr.body[i] {
                for arg in &fa.args {
                    if let Some(v) = arg.as_var() {
                        for j in 0..n {
                            if !head_only[j] && !touched[j] && id_vars[j].as_deref() == Some(v)
                                && is_id(v) {
                                    head_only[j] = true;
                                    changed = true;
                                }
                        }
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }

    for i in 0..n {
        if let FlatLiteral::Function(fa) = &mut fr.body[i] {
            fa.provenance = if head_only[i] { Provenance::HeadOnly } else { Provenance::BodyTouched };
        }
    }
}

/// Parse, extract aggregates and produce the flat program with its term
/// store, through flattening or through the flat-input loader.
pub fn prepare(
    text: &str,
    max_nesting: Option<u32>,
) -> Result<(FlatProgram, TermStore, Program), PipelineError> {
    let program = parse_program(text)?;
    let (program, _) = rewrite_aggregates(&program)?;
    if program_is_flat(&program) {
        let (fp, store) = load_flat(&program, max_nesting)?;
        Ok((fp, store, program))
    } else {
        let mut store = TermStore::new();
        let fp = flatten_program(&program, &mut store, max_nesting)?;
        Ok((fp, store, program))
    }
}

/// Full pipeline to a ground program.
pub fn ground_text(text: &str, opts: &GroundOptions) -> Result<GroundProgram, PipelineError> {
    let (mut fp, store, _) = prepare(text, opts.max_nesting)?;
    let graph = build_dependency_graph(&fp);
    let order = evaluation_order(&graph)?;
    reorder_program(&mut fp, &store)?;
    Ok(ground_program(&fp, store, &order, opts))
}

fn print_ground(gp: &GroundProgram, show_ids: bool) -> String {
    let mut out = String::new();
    for f in &gp.facts {
        out.push_str(&f.text(&gp.store, show_ids));
        out.push_str(".\n");
    }
    for r in &gp.rules {
        out.push_str(&r.text(&gp.store, show_ids));
        out.push('\n');
    }
    if show_ids {
        for t in gp.store.tables() {
            for (args, id) in t.entries() {
                let args: Vec<String> = args.iter().map(|a| gp.store.id_text(*a)).collect();
                out.push_str(&format!(
                    "{}: <{}> -> {}\n",
                    t.symbol,
                    args.join(", "),
                    gp.store.id_text(id)
                ));
            }
        }
    }
    out
}

fn print_term_program(tp: &crate::oracle::TermProgram) -> String {
    let mut out = String::new();
    for f in &tp.facts {
        out.push_str(&format!("{f}.\n"));
    }
    for r in &tp.rules {
        let head: Vec<String> = r.head.iter().map(|a| a.to_string()).collect();
        let mut line = head.join(" v ");
        if !r.body_pos.is_empty() || !r.body_neg.is_empty() || r.head.is_empty() {
            if !line.is_empty() {
                line.push(' ');
            }
            line.push_str(":- ");
            let mut body: Vec<String> = r.body_pos.iter().map(|a| a.to_string()).collect();
            body.extend(r.body_neg.iter().map(|a| format!("not {a}")));
            line.push_str(&body.join(", "));
        }
        line.push('.');
        out.push_str(&line);
        out.push('\n');
    }
    out
}

fn print_answer_sets(sets: &std::collections::BTreeSet<crate::oracle::Interpretation>) -> String {
    let mut out = String::new();
    for s in sets {
        let atoms: Vec<String> = s.iter().map(|a| a.to_string()).collect();
        out.push_str(&format!("{{{}}}\n", atoms.join(", ")));
    }
    out
}

fn format_stats(gp: &GroundProgram) -> String {
    let mut out = String::new();
    for t in gp.store.tables() {
        out.push_str(&format!("function table {}: {} entries\n", t.symbol, t.len()));
    }
    let s = gp.stats.store;
    out.push_str(&format!("instantiations: {}\n", gp.stats.instantiations));
    out.push_str(&format!("invented tuples: {}\n", s.invented));
    out.push_str(&format!("committed tuples: {}\n", s.committed));
    out.push_str(&format!("rolled-back tuples: {}\n", s.rolled_back));
    out.push_str(&format!("nesting-pruned insertions: {}\n", s.nesting_pruned));
    out
}

/// Runs one pipeline invocation over already-concatenated input text.
pub fn run(cfg: &RunConfig, input: &str) -> Result<RunOutput, PipelineError> {
    let mut out = RunOutput::default();

    if cfg.oracle && !matches!(cfg.mode, Mode::Ground | Mode::AnswerSets) {
        return Err(PipelineError::Usage(
            "--oracle only applies to --mode=ground and --mode=answersets".to_string(),
        ));
    }
    if cfg.oracle && cfg.max_nesting.is_none() {
        return Err(PipelineError::Usage(
            "--oracle needs --maxNesting to bound the term universe".to_string(),
        ));
    }

    match cfg.mode {
        Mode::Parse => {
            let program = parse_program(input)?;
            out.stdout = crate::ast::print_program(&program);
        }
        Mode::Rewrite => {
            let (fp, store, _) = prepare(input, cfg.max_nesting)?;
            out.stdout = fp.text(&store);
        }
        Mode::Reorder => {
            let (mut fp, store, _) = prepare(input, cfg.max_nesting)?;
            reorder_program(&mut fp, &store)?;
            out.stdout = fp.text(&store);
        }
        Mode::Depgraph => {
            let (fp, _, _) = prepare(input, cfg.max_nesting)?;
            out.stdout = to_dot(&build_dependency_graph(&fp));
        }
        Mode::Ground | Mode::AnswerSets => {
            if cfg.max_nesting.is_none() {
                out.warnings.push(
                    "no --maxNesting bound given: grounding of function-recursive programs may not terminate"
                        .to_string(),
                );
            }
            if cfg.oracle {
                let program = parse_program(input)?;
                if program_is_flat(&program) {
                    return Err(PipelineError::Usage(
                        "--oracle expects nested-term input, not a flattened program".to_string(),
                    ));
                }
                // Aggregate extraction keeps nested terms; running it on
                // both paths keeps the predicate vocabularies equal.
                let (program, _) = rewrite_aggregates(&program)?;
                let k = cfg.max_nesting.expect("checked above");
                let tp = naive_ground(&program, k)?;
                if cfg.mode == Mode::Ground {
                    out.stdout = print_term_program(&tp);
                } else {
                    out.stdout = print_answer_sets(&answer_sets(&tp)?);
                }
                return Ok(out);
            }
            let opts = GroundOptions { max_nesting: cfg.max_nesting, backjump: cfg.backjump };
            let gp = ground_text(input, &opts)?;
            if cfg.stats {
                out.stats = Some(format_stats(&gp));
            }
            if cfg.mode == Mode::Ground {
                out.stdout = print_ground(&gp, cfg.show_ids);
            } else {
                out.stdout = print_answer_sets(&answer_sets(&readback(&gp))?);
            }
        }
    }
    Ok(out)
}
