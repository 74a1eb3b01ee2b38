//! Instantiation: component-by-component backtracking matching over
//! predicate tables.
//!
//! Function atoms are deterministic: their functional dependency admits
//! at most one match, so the backward phase skips them, rolling back
//! bindings and any tentative table insertion. Head-only function atoms
//! sit at the body end and mint ids on demand; the mints are committed
//! only when the whole body matched. Negative literals and aggregates
//! refer to finished components, so their tables are final when reached.

use std::collections::{HashMap, HashSet};

use crate::flat::{FlatLiteral, FlatProgram, FlatRule, FlatTerm, PredicateTables, Provenance};
use crate::term_store::{StoreStats, TermId, TermStore, TrailMark};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundAtom {
    pub predicate: String,
    pub args: Vec<TermId>,
}

impl GroundAtom {
    /// Readback text; `show_ids` prints `@k` instead of nested terms.
    pub fn text(&self, store: &TermStore, show_ids: bool) -> String {
        if self.args.is_empty() {
            return self.predicate.clone();
        }
        let args: Vec<String> = self
            .args
            .iter()
            .map(|a| {
                if show_ids {
                    store.id_text(*a)
                } else {
                    store.to_term(*a).to_string()
                }
            })
            .collect();
        format!("{}({})", self.predicate, args.join(", "))
    }
}

/// Fully ground rule with function atoms simplified away. Head and body
/// parts are kept sorted: conjunction and disjunction are sets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundRule {
    pub head: Vec<GroundAtom>,
    pub body_pos: Vec<GroundAtom>,
    pub body_neg: Vec<GroundAtom>,
}

impl GroundRule {
    pub fn text(&self, store: &TermStore, show_ids: bool) -> String {
        let head: Vec<String> = self.head.iter().map(|a| a.text(store, show_ids)).collect();
        let mut s = head.join(" v ");
        if !self.body_pos.is_empty() || !self.body_neg.is_empty() || self.head.is_empty() {
            if !s.is_empty() {
                s.push(' ');
            }
            s.push_str(":- ");
            let mut body: Vec<String> =
                self.body_pos.iter().map(|a| a.text(store, show_ids)).collect();
            body.extend(self.body_neg.iter().map(|a| format!("not {}", a.text(store, show_ids))));
            s.push_str(&body.join(", "));
        }
        s.push('.');
        s
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GroundOptions {
    pub max_nesting: Option<u32>,
    /// Skip deterministic atoms in the backward phase instead of asking
    /// them for a (nonexistent) second match. Both settings must produce
    /// identical output.
    pub backjump: bool,
}

impl Default for GroundOptions {
    fn default() -> GroundOptions {
        GroundOptions { max_nesting: None, backjump: true }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GroundStats {
    pub instantiations: u64,
    pub store: StoreStats,
}

/// The instantiation output. Facts are the established atoms; rules kept
/// their undecided parts. Auxiliary aggregate predicates are internal
/// and already filtered out.
#[derive(Debug, Clone)]
pub struct GroundProgram {
    pub store: TermStore,
    pub tables: PredicateTables,
    pub facts: Vec<GroundAtom>,
    pub rules: Vec<GroundRule>,
    pub stats: GroundStats,
}

/// Argument pattern of a compiled atom. `Local` marks a variable scoped
/// to an aggregate; it matches anything within one candidate tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arg {
    Const(TermId),
    Var(usize),
    Local(usize),
}

#[derive(Debug, Clone)]
struct CAtom {
    predicate: String,
    args: Vec<Arg>,
}

#[derive(Debug, Clone)]
enum Slot {
    Table(CAtom),
    Func { symbol: String, id_arg: Arg, args: Vec<Arg>, head_only: bool },
    Neg(CAtom),
    Agg { bound: Arg, atom: CAtom, n_locals: usize },
}

impl Slot {
    fn deterministic(&self) -> bool {
        !matches!(self, Slot::Table(_))
    }
}

#[derive(Debug, Clone)]
struct CompiledRule {
    head: Vec<CAtom>,
    slots: Vec<Slot>,
    n_vars: usize,
    /// Positive standard body predicates, for the regrowth test.
    body_preds: Vec<String>,
}

/// Partial map from rule variables to term ids with an undo trail.
#[derive(Debug, Clone, Default)]
pub struct Binding {
    vals: Vec<Option<TermId>>,
    trail: Vec<usize>,
}

impl Binding {
    pub fn new(n_vars: usize) -> Binding {
        Binding { vals: vec![None; n_vars], trail: Vec::new() }
    }

    pub fn get(&self, var: usize) -> Option<TermId> {
        self.vals[var]
    }

    pub fn bind(&mut self, var: usize, id: TermId) {
        debug_assert!(self.vals[var].is_none(), "variable bound twice");
        self.vals[var] = Some(id);
        self.trail.push(var);
    }

    pub fn mark(&self) -> usize {
        self.trail.len()
    }

    pub fn undo_to(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let var = self.trail.pop().expect("non-empty undo trail");
            self.vals[var] = None;
        }
    }

    fn resolve(&self, arg: &Arg) -> Option<TermId> {
        match arg {
            Arg::Const(id) => Some(*id),
            Arg::Var(v) => self.get(*v),
            Arg::Local(_) => panic!("local variable outside aggregate evaluation"),
        }
    }

    /// Unifies a pattern against a ground tuple, binding unbound
    /// variables. On mismatch the caller undoes to its mark.
    fn unify(&mut self, pattern: &[Arg], tuple: &[TermId]) -> bool {
        debug_assert_eq!(pattern.len(), tuple.len());
        for (p, t) in pattern.iter().zip(tuple) {
            match p {
                Arg::Const(id) => {
                    if id != t {
                        return false;
                    }
                }
                Arg::Var(v) => match self.get(*v) {
                    Some(id) => {
                        if id != *t {
                            return false;
                        }
                    }
                    None => self.bind(*v, *t),
                },
                Arg::Local(_) => panic!("local variable outside aggregate evaluation"),
            }
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchOutcome {
    /// Consistent with an existing tuple; nothing was created.
    Matched,
    /// All arguments but the id were bound and no tuple existed: a fresh
    /// id was invented tentatively.
    MatchedNew(TermId),
    Failed,
}

/// The three match cases for a function atom. With the id bound (cases
/// one and two) this is a pure lookup that may bind remaining arguments
/// from the stored tuple. With only the id unbound (case three) an
/// existing tuple binds it; a missing tuple is invented tentatively for
/// head-only atoms, subject to the nesting bound, and is a plain failure
/// for atoms whose application occurs in the body.
pub fn match_function_atom(
    store: &mut TermStore,
    binding: &mut Binding,
    symbol: &str,
    id_arg: &Arg,
    args: &[Arg],
    head_only: bool,
    max_nesting: Option<u32>,
) -> MatchOutcome {
    match binding.resolve(id_arg) {
        Some(id) => {
            let stored = match store.table(symbol).and_then(|t| t.args_of(id)) {
                Some(stored) => stored.to_vec(),
                None => return MatchOutcome::Failed,
            };
            if binding.unify(args, &stored) {
                MatchOutcome::Matched
            } else {
                MatchOutcome::Failed
            }
        }
        None => {
            let tuple: Vec<TermId> = args
                .iter()
                .map(|a| binding.resolve(a).expect("placement bound all non-id arguments"))
                .collect();
            if let Some(id) = store.lookup_function(symbol, &tuple) {
                bind_id(binding, id_arg, id);
                return MatchOutcome::Matched;
            }
            if !head_only {
                return MatchOutcome::Failed;
            }
            match store.insert_function(symbol, &tuple, max_nesting, true) {
                Ok(id) => {
                    bind_id(binding, id_arg, id);
                    MatchOutcome::MatchedNew(id)
                }
                Err(_) => MatchOutcome::Failed,
            }
        }
    }
}

fn bind_id(binding: &mut Binding, id_arg: &Arg, id: TermId) {
    match id_arg {
        Arg::Var(v) => binding.bind(*v, id),
        Arg::Const(c) => debug_assert_eq!(*c, id),
        Arg::Local(_) => panic!("local variable as id argument"),
    }
}

fn compile_rule(fr: &FlatRule, store: &mut TermStore) -> CompiledRule {
    let mut vars: HashMap<String, usize> = HashMap::new();
    let var_of = |name: &str, vars: &mut HashMap<String, usize>| -> usize {
        let next = vars.len();
        *vars.entry(name.to_string()).or_insert(next)
    };
    let mut carg = |t: &FlatTerm, vars: &mut HashMap<String, usize>| -> Arg {
        match t {
            FlatTerm::Const(c) => Arg::Const(store.intern_constant(c)),
            FlatTerm::Id(id) => Arg::Const(*id),
            FlatTerm::Var(v) => Arg::Var(var_of(v, vars)),
        }
    };

    let mut slots = Vec::with_capacity(fr.body.len());
    let mut body_preds = Vec::new();
    for lit in &fr.body {
        match lit {
            FlatLiteral::Pos(a) => {
                body_preds.push(a.predicate.clone());
                slots.push(Slot::Table(CAtom {
                    predicate: a.predicate.clone(),
                    args: a.args.iter().map(|t| carg(t, &mut vars)).collect(),
                }));
            }
            FlatLiteral::Neg(a) => slots.push(Slot::Neg(CAtom {
                predicate: a.predicate.clone(),
                args: a.args.iter().map(|t| carg(t, &mut vars)).collect(),
            })),
            FlatLiteral::Function(fa) => slots.push(Slot::Func {
                symbol: fa.symbol.clone(),
                id_arg: carg(&fa.id_arg, &mut vars),
                args: fa.args.iter().map(|t| carg(t, &mut vars)).collect(),
                head_only: fa.provenance == Provenance::HeadOnly,
            }),
            FlatLiteral::Aggregate(agg) => {
                let mut locals: HashMap<&str, usize> = HashMap::new();
                let args = agg
                    .atom
                    .args
                    .iter()
                    .map(|t| match t {
                        FlatTerm::Var(v) if agg.local_vars.iter().any(|l| l == v) => {
                            let next = locals.len();
                            Arg::Local(*locals.entry(v).or_insert(next))
                        }
                        other => carg(other, &mut vars),
                    })
                    .collect();
                slots.push(Slot::Agg {
                    bound: carg(&agg.bound, &mut vars),
                    atom: CAtom { predicate: agg.atom.predicate.clone(), args },
                    n_locals: locals.len(),
                });
            }
        }
    }
    let head = fr
        .head
        .iter()
        .map(|a| CAtom {
            predicate: a.predicate.clone(),
            args: a.args.iter().map(|t| carg(t, &mut vars)).collect(),
        })
        .collect();
    CompiledRule { head, slots, n_vars: vars.len(), body_preds }
}

/// Counts table tuples compatible with the pattern; `Local` positions
/// match anything but repeated locals must agree within one tuple.
fn aggregate_count(atom: &CAtom, n_locals: usize, binding: &Binding, tables: &PredicateTables) -> i64 {
    let table = match tables.get(&atom.predicate) {
        Some(t) => t,
        None => return 0,
    };
    let mut count = 0i64;
    let mut local_vals: Vec<Option<TermId>> = vec![None; n_locals];
    'tuples: for (tuple, _) in table.iter() {
        local_vals.iter_mut().for_each(|v| *v = None);
        for (p, t) in atom.args.iter().zip(tuple) {
            match p {
                Arg::Const(id) => {
                    if id != t {
                        continue 'tuples;
                    }
                }
                Arg::Var(v) => {
                    let bound = binding.get(*v).expect("aggregate globals are bound");
                    if bound != *t {
                        continue 'tuples;
                    }
                }
                Arg::Local(l) => match local_vals[*l] {
                    Some(seen) => {
                        if seen != *t {
                            continue 'tuples;
                        }
                    }
                    None => local_vals[*l] = Some(*t),
                },
            }
        }
        count += 1;
    }
    count
}

#[derive(Debug)]
enum SlotState {
    Table { next: usize, end: usize, undo: usize },
    Once { undo: usize, trail: TrailMark },
}

/// One complete body match, before simplification.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct RawInstantiation {
    head: Vec<GroundAtom>,
    body_pos: Vec<GroundAtom>,
    body_neg: Vec<GroundAtom>,
}

fn ground_atom(atom: &CAtom, binding: &Binding) -> GroundAtom {
    GroundAtom {
        predicate: atom.predicate.clone(),
        args: atom
            .args
            .iter()
            .map(|a| binding.resolve(a).expect("emitted atoms are ground"))
            .collect(),
    }
}

/// Depth-first left-to-right matching of one rule body against the
/// current tables, emitting every complete instantiation. Tentative ids
/// are committed per emission; the trail is empty again when this
/// returns.
fn match_rule(
    cr: &CompiledRule,
    tables: &PredicateTables,
    store: &mut TermStore,
    opts: &GroundOptions,
) -> Vec<RawInstantiation> {
    let mut out = Vec::new();
    let mut binding = Binding::new(cr.n_vars);
    let mut states: Vec<SlotState> = Vec::with_capacity(cr.slots.len());
    let attempt = store.mark_trail();

    let n = cr.slots.len();
    let mut pos = 0usize;
    let mut entering = true;
    loop {
        if pos == n {
            // Complete match: emit and commit this assignment's mints.
            let mut head: Vec<GroundAtom> = cr.head.iter().map(|a| ground_atom(a, &binding)).collect();
            head.sort();
            head.dedup();
            let mut body_pos = Vec::new();
            let mut body_neg = Vec::new();
            for slot in &cr.slots {
                match slot {
                    Slot::Table(a) => body_pos.push(ground_atom(a, &binding)),
                    Slot::Neg(a) => body_neg.push(ground_atom(a, &binding)),
                    _ => {}
                }
            }
            body_pos.sort();
            body_pos.dedup();
            body_neg.sort();
            body_neg.dedup();
            store.commit(attempt);
            out.push(RawInstantiation { head, body_pos, body_neg });
            if n == 0 {
                return out;
            }
            pos -= 1;
            entering = false;
            continue;
        }

        let produced = if entering {
            let (state, ok) = enter_slot(&cr.slots[pos], &mut binding, store, tables, opts);
            if ok {
                states.push(state);
            }
            ok
        } else {
            // Backward phase: undo this slot's effects, then ask for the
            // next match. Deterministic slots have none; with backjumping
            // they are skipped without being asked.
            let state = states.pop().expect("state per entered slot");
            match (state, &cr.slots[pos]) {
                (SlotState::Table { next, end, undo }, Slot::Table(atom)) => {
                    binding.undo_to(undo);
                    match table_scan(atom, next, end, &mut binding, tables) {
                        Some(next2) => {
                            states.push(SlotState::Table { next: next2, end, undo });
                            true
                        }
                        None => false,
                    }
                }
                (SlotState::Once { undo, trail }, slot) => {
                    binding.undo_to(undo);
                    store.rollback(trail);
                    if !opts.backjump {
                        // A plain backtracker still asks for another
                        // match; the functional dependency means there is
                        // no second answer.
                        debug_assert!(slot.deterministic());
                    }
                    false
                }
                _ => unreachable!("state kind matches slot kind"),
            }
        };

        if produced {
            pos += 1;
            entering = true;
        } else if pos == 0 {
            store.rollback(attempt);
            debug_assert_eq!(store.trail_len(), 0);
            return out;
        } else {
            pos -= 1;
            entering = false;
        }
    }
}

fn table_scan(
    atom: &CAtom,
    from: usize,
    end: usize,
    binding: &mut Binding,
    tables: &PredicateTables,
) -> Option<usize> {
    let table = tables.get(&atom.predicate)?;
    let undo = binding.mark();
    for i in from..end {
        if binding.unify(&atom.args, table.tuple_at(i)) {
            return Some(i + 1);
        }
        binding.undo_to(undo);
    }
    None
}

fn enter_slot(
    slot: &Slot,
    binding: &mut Binding,
    store: &mut TermStore,
    tables: &PredicateTables,
    opts: &GroundOptions,
) -> (SlotState, bool) {
    match slot {
        Slot::Table(atom) => {
            let undo = binding.mark();
            let end = tables.size_of(&atom.predicate);
            match table_scan(atom, 0, end, binding, tables) {
                Some(next) => (SlotState::Table { next, end, undo }, true),
                None => (SlotState::Table { next: end, end, undo }, false),
            }
        }
        Slot::Func { symbol, id_arg, args, head_only } => {
            let undo = binding.mark();
            let trail = store.mark_trail();
            let outcome =
                match_function_atom(store, binding, symbol, id_arg, args, *head_only, opts.max_nesting);
            let ok = outcome != MatchOutcome::Failed;
            if !ok {
                binding.undo_to(undo);
            }
            (SlotState::Once { undo, trail }, ok)
        }
        Slot::Neg(atom) => {
            let undo = binding.mark();
            let ground = ground_atom(atom, binding);
            // Fails only on established truth; a possibly-true atom stays
            // in the instantiation for the model search.
            let ok = !tables
                .get(&ground.predicate)
                .is_some_and(|t| t.is_established(&ground.args));
            (SlotState::Once { undo, trail: store.mark_trail() }, ok)
        }
        Slot::Agg { bound, atom, n_locals } => {
            let undo = binding.mark();
            let count = aggregate_count(atom, *n_locals, binding, tables);
            let count_id = store.intern_int(count);
            let ok = match bound {
                Arg::Const(id) => *id == count_id,
                Arg::Var(v) => match binding.get(*v) {
                    Some(id) => id == count_id,
                    None => {
                        binding.bind(*v, count_id);
                        true
                    }
                },
                Arg::Local(_) => panic!("local variable as aggregate bound"),
            };
            if !ok {
                binding.undo_to(undo);
            }
            (SlotState::Once { undo, trail: store.mark_trail() }, ok)
        }
    }
}

/// Grounds the whole program: components in evaluation order, each to
/// fixpoint with re-matching restricted to rules whose body tables grew,
/// then establishment of definite facts per component, then a final
/// simplification against the finished tables.
pub fn ground_program(
    fp: &FlatProgram,
    mut store: TermStore,
    order: &[Vec<String>],
    opts: &GroundOptions,
) -> GroundProgram {
    let mut tables = fp.tables.clone();
    let compiled: Vec<CompiledRule> =
        fp.rules.iter().map(|r| compile_rule(r, &mut store)).collect();

    let mut scc_of: HashMap<&str, usize> = HashMap::new();
    for (i, scc) in order.iter().enumerate() {
        for p in scc {
            scc_of.insert(p.as_str(), i);
        }
    }
    // A rule runs in the earliest component containing one of its head
    // predicates; every body predicate sits at or before it. Constraints
    // run after everything.
    let n_sccs = order.len();
    let mut rules_of_scc: Vec<Vec<usize>> = vec![Vec::new(); n_sccs + 1];
    for (i, cr) in compiled.iter().enumerate() {
        let scc = cr
            .head
            .iter()
            .map(|h| scc_of[h.predicate.as_str()])
            .min()
            .unwrap_or(n_sccs);
        rules_of_scc[scc].push(i);
    }

    let mut raws: Vec<RawInstantiation> = Vec::new();
    let mut raw_seen: HashSet<RawInstantiation> = HashSet::new();

    for scc_rules in &rules_of_scc {
        let scc_start = raws.len();
        let mut grew: Option<HashSet<String>> = None; // None: first round, match everything
        loop {
            let mut new_grew: HashSet<String> = HashSet::new();
            let mut changed = false;
            for &ri in scc_rules {
                if let Some(grew) = &grew {
                    if !compiled[ri].body_preds.iter().any(|p| grew.contains(p)) {
                        continue;
                    }
                }
                for raw in match_rule(&compiled[ri], &tables, &mut store, opts) {
                    if raw_seen.insert(raw.clone()) {
                        for h in &raw.head {
                            if tables.add(&h.predicate, h.args.clone(), false) {
                                changed = true;
                                new_grew.insert(h.predicate.clone());
                            }
                        }
                        raws.push(raw);
                    }
                }
            }
            if !changed {
                break;
            }
            grew = Some(new_grew);
        }

        // Establishment fixpoint: a single-head instantiation whose
        // positive body is established and whose negative body misses
        // the possibly-true tables definitely fires.
        loop {
            let mut changed = false;
            for raw in &raws[scc_start..] {
                if raw.head.len() != 1 {
                    continue;
                }
                let pos_ok = raw.body_pos.iter().all(|a| {
                    tables.get(&a.predicate).is_some_and(|t| t.is_established(&a.args))
                });
                let neg_ok = raw.body_neg.iter().all(|a| {
                    !tables.get(&a.predicate).is_some_and(|t| t.contains(&a.args))
                });
                if pos_ok && neg_ok {
                    let h = &raw.head[0];
                    if tables.establish(&h.predicate, &h.args) {
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
    }

    let mut rules_out: Vec<GroundRule> = Vec::new();
    let mut rule_seen: HashSet<GroundRule> = HashSet::new();
    for raw in &raws {
        match simplify_instantiation(&raw.head, &raw.body_pos, &raw.body_neg, &tables) {
            Simplified::Rule(gr) => {
                if rule_seen.insert(gr.clone()) {
                    rules_out.push(gr);
                }
            }
            // Facts are listed from the established tables below.
            Simplified::Fact(_) | Simplified::Dropped => {}
        }
    }

    let mut facts = Vec::new();
    for (pred, table) in tables.iter() {
        for (tuple, established) in table.iter() {
            if established {
                facts.push(GroundAtom { predicate: pred.to_string(), args: tuple.to_vec() });
            }
        }
    }

    store
        .check_invariants(opts.max_nesting)
        .expect("term store invariants hold after grounding");
    let stats = GroundStats { instantiations: raws.len() as u64, store: store.stats() };
    GroundProgram { store, tables, facts, rules: rules_out, stats }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Simplified {
    Fact(GroundAtom),
    Rule(GroundRule),
    Dropped,
}

/// Simplifies one complete instantiation against the finished tables
/// (function atoms were already deleted at emission, their tuples being
/// committed-true): established positive atoms are removed, negative
/// literals whose atom is no possibly-true tuple are removed, a negative
/// literal on an established fact drops the whole rule, and a single
/// head over an empty body is a fact. Heads are never simplified.
pub fn simplify_instantiation(
    head: &[GroundAtom],
    body_pos: &[GroundAtom],
    body_neg: &[GroundAtom],
    tables: &PredicateTables,
) -> Simplified {
    let established =
        |a: &GroundAtom| tables.get(&a.predicate).is_some_and(|t| t.is_established(&a.args));
    let possibly_true =
        |a: &GroundAtom| tables.get(&a.predicate).is_some_and(|t| t.contains(&a.args));

    if body_neg.iter().any(established) {
        return Simplified::Dropped;
    }
    let body_pos: Vec<GroundAtom> =
        body_pos.iter().filter(|a| !established(a)).cloned().collect();
    let body_neg: Vec<GroundAtom> =
        body_neg.iter().filter(|a| possibly_true(a)).cloned().collect();
    if head.len() == 1 && body_pos.is_empty() && body_neg.is_empty() {
        return Simplified::Fact(head[0].clone());
    }
    Simplified::Rule(GroundRule { head: head.to_vec(), body_pos, body_neg })
}

/// Audit: every function-table entry must be reachable from some tuple
/// in the predicate tables — matching never invents from the body.
pub fn audit_reachable_ids(gp: &GroundProgram) -> Result<(), String> {
    let mut reachable: HashSet<TermId> = HashSet::new();
    let mut stack: Vec<TermId> = Vec::new();
    for (_, table) in gp.tables.iter() {
        for (tuple, _) in table.iter() {
            stack.extend(tuple.iter().copied());
        }
    }
    while let Some(id) = stack.pop() {
        if !reachable.insert(id) {
            continue;
        }
        for t in gp.store.tables() {
            if let Some(args) = t.args_of(id) {
                stack.extend(args.iter().copied());
            }
        }
    }
    for t in gp.store.tables() {
        for (_, id) in t.entries() {
            if !reachable.contains(&id) {
                return Err(format!(
                    "table '{}' entry {} is not reachable from any predicate tuple",
                    t.symbol,
                    gp.store.to_term(id)
                ));
            }
        }
    }
    Ok(())
}
