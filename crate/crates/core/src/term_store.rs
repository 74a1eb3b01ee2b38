//! Interned ground terms.
//!
//! Every constant and every ground function application gets one
//! `TermId`. Each function symbol owns a bijective table mapping
//! argument tuples to ids; invented ids carry a nesting level so term
//! growth can be capped. Insertions can be tentative: they sit on a
//! trail until the enclosing match commits or rolls back.

use std::collections::HashMap;
use std::fmt;

use indexmap::IndexMap;

use crate::ast::{Constant, Term};

/// Opaque handle for one interned ground term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TermId(u32);

impl fmt::Display for TermId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

/// Insertion refused because the new term would exceed the nesting bound.
/// This is a match-failure signal, not a crash.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("nesting level {level} exceeds bound {bound}")]
pub struct NestingExceeded {
    pub level: u32,
    pub bound: u32,
}

/// Position on the trail; marks must be used LIFO.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrailMark(u64);

#[derive(Debug, Clone)]
enum TermMeta {
    Const(Constant),
    Func { table: usize, ord: u32, level: u32 },
}

/// One bijective table per function symbol: argument tuples to ids and
/// back.
#[derive(Debug, Clone, Default)]
pub struct FunctionTable {
    pub symbol: String,
    pub arity: usize,
    forward: IndexMap<Vec<TermId>, TermId>,
    reverse: HashMap<TermId, Vec<TermId>>,
}

impl FunctionTable {
    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    /// Entries in insertion order.
    pub fn entries(&self) -> impl Iterator<Item = (&[TermId], TermId)> {
        self.forward.iter().map(|(args, id)| (args.as_slice(), *id))
    }

    pub fn args_of(&self, id: TermId) -> Option<&[TermId]> {
        self.reverse.get(&id).map(|v| v.as_slice())
    }
}

#[derive(Debug, Clone)]
struct TrailEntry {
    seq: u64,
    table: usize,
    args: Vec<TermId>,
    id: TermId,
}

/// Counters kept for `--stats` output and audits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StoreStats {
    pub invented: u64,
    pub committed: u64,
    pub rolled_back: u64,
    pub nesting_pruned: u64,
}

#[derive(Debug, Clone, Default)]
pub struct TermStore {
    terms: HashMap<TermId, TermMeta>,
    next_id: u32,
    next_ord: u32,
    const_index: HashMap<Constant, TermId>,
    tables: Vec<FunctionTable>,
    table_index: HashMap<String, usize>,
    trail: Vec<TrailEntry>,
    trail_seq: u64,
    stats: StoreStats,
}

impl TermStore {
    pub fn new() -> TermStore {
        TermStore::default()
    }

    pub fn stats(&self) -> StoreStats {
        self.stats
    }

    fn mint(&mut self) -> TermId {
        let id = TermId(self.next_id);
        self.next_id += 1;
        id
    }

    /// Idempotent: the same constant always yields the same id.
    pub fn intern_constant(&mut self, c: &Constant) -> TermId {
        if let Some(&id) = self.const_index.get(c) {
            return id;
        }
        let id = self.mint();
        self.terms.insert(id, TermMeta::Const(c.clone()));
        self.const_index.insert(c.clone(), id);
        id
    }

    pub fn intern_sym(&mut self, name: &str) -> TermId {
        self.intern_constant(&Constant::Sym(name.to_string()))
    }

    pub fn intern_int(&mut self, n: i64) -> TermId {
        self.intern_constant(&Constant::Int(n))
    }

    pub fn lookup_constant(&self, c: &Constant) -> Option<TermId> {
        self.const_index.get(c).copied()
    }

    fn table_for(&mut self, symbol: &str, arity: usize) -> usize {
        if let Some(&t) = self.table_index.get(symbol) {
            assert_eq!(
                self.tables[t].arity, arity,
                "arity mismatch for function '{symbol}'"
            );
            return t;
        }
        let t = self.tables.len();
        self.tables.push(FunctionTable {
            symbol: symbol.to_string(),
            arity,
            ..FunctionTable::default()
        });
        self.table_index.insert(symbol.to_string(), t);
        t
    }

    /// Finds the id for `symbol(args)` if the tuple exists, committed or
    /// on the current trail. Never mutates.
    pub fn lookup_function(&self, symbol: &str, args: &[TermId]) -> Option<TermId> {
        let &t = self.table_index.get(symbol)?;
        assert_eq!(
            self.tables[t].arity,
            args.len(),
            "arity mismatch for function '{symbol}'"
        );
        self.tables[t].forward.get(args).copied()
    }

    /// Inserts `symbol(args)`, returning the existing id when the tuple
    /// is already present. Fresh ids get nesting level `1 + max(args)`;
    /// when a bound is given and the level exceeds it the insertion
    /// fails and the store is unchanged.
    pub fn insert_function(
        &mut self,
        symbol: &str,
        args: &[TermId],
        max_nesting: Option<u32>,
        tentative: bool,
    ) -> Result<TermId, NestingExceeded> {
        let t = self.table_for(symbol, args.len());
        if let Some(&id) = self.tables[t].forward.get(args) {
            return Ok(id);
        }
        let level = 1 + args
            .iter()
            .map(|a| self.level(*a))
            .max()
            .expect("function arity is at least one");
        if let Some(bound) = max_nesting {
            if level > bound {
                self.stats.nesting_pruned += 1;
                return Err(NestingExceeded { level, bound });
            }
        }
        let id = self.mint();
        let ord = self.next_ord + 1;
        self.next_ord = ord;
        self.terms.insert(id, TermMeta::Func { table: t, ord, level });
        self.tables[t].forward.insert(args.to_vec(), id);
        self.tables[t].reverse.insert(id, args.to_vec());
        self.stats.invented += 1;
        if tentative {
            self.trail_seq += 1;
            self.trail.push(TrailEntry {
                seq: self.trail_seq,
                table: t,
                args: args.to_vec(),
                id,
            });
        } else {
            self.stats.committed += 1;
        }
        Ok(id)
    }

    /// Interns a ground term inside-to-outside. Panics on variables and
    /// id references; those never reach the store directly.
    pub fn intern_term(
        &mut self,
        term: &Term,
        max_nesting: Option<u32>,
    ) -> Result<TermId, NestingExceeded> {
        match term {
            Term::Const(c) => Ok(self.intern_constant(c)),
            Term::Func(name, args) => {
                let mut ids = Vec::with_capacity(args.len());
                for a in args {
                    ids.push(self.intern_term(a, max_nesting)?);
                }
                self.insert_function(name, &ids, max_nesting, false)
            }
            Term::Var(v) => panic!("cannot intern non-ground term with variable '{v}'"),
            Term::Id(n) => panic!("unresolved id reference '@{n}'"),
        }
    }

    pub fn mark_trail(&self) -> TrailMark {
        TrailMark(self.trail_seq + 1)
    }

    /// Removes every tentative insertion made since the mark. Entries
    /// already committed are gone from the trail and stay permanent.
    pub fn rollback(&mut self, mark: TrailMark) {
        assert!(mark.0 <= self.trail_seq + 1, "rollback with a mark never issued");
        while let Some(last) = self.trail.last() {
            if last.seq < mark.0 {
                break;
            }
            let e = self.trail.pop().expect("non-empty trail");
            let table = &mut self.tables[e.table];
            let removed = table.forward.shift_remove(&e.args);
            debug_assert_eq!(removed, Some(e.id));
            table.reverse.remove(&e.id);
            self.terms.remove(&e.id);
            self.stats.rolled_back += 1;
        }
    }

    /// Makes every tentative insertion since the mark permanent.
    pub fn commit(&mut self, mark: TrailMark) {
        assert!(mark.0 <= self.trail_seq + 1, "commit with a mark never issued");
        while let Some(last) = self.trail.last() {
            if last.seq < mark.0 {
                break;
            }
            self.trail.pop();
            self.stats.committed += 1;
        }
    }

    pub fn trail_len(&self) -> usize {
        self.trail.len()
    }

    pub fn level(&self, id: TermId) -> u32 {
        match self.terms.get(&id) {
            Some(TermMeta::Const(_)) => 0,
            Some(TermMeta::Func { level, .. }) => *level,
            None => panic!("unknown term id {id}"),
        }
    }

    /// Reconstructs the nested term; inverse of interning.
    pub fn to_term(&self, id: TermId) -> Term {
        match self.terms.get(&id) {
            Some(TermMeta::Const(c)) => Term::Const(c.clone()),
            Some(TermMeta::Func { table, .. }) => {
                let t = &self.tables[*table];
                let args = t
                    .args_of(id)
                    .expect("function id present in reverse map")
                    .iter()
                    .map(|a| self.to_term(*a))
                    .collect();
                Term::Func(t.symbol.clone(), args)
            }
            None => panic!("unknown term id {id}"),
        }
    }

    /// Id-form text: constants print as themselves, invented ids as `@k`.
    pub fn id_text(&self, id: TermId) -> String {
        match self.terms.get(&id) {
            Some(TermMeta::Const(c)) => c.to_string(),
            Some(TermMeta::Func { ord, .. }) => format!("@{ord}"),
            None => panic!("unknown term id {id}"),
        }
    }

    pub fn tables(&self) -> impl Iterator<Item = &FunctionTable> {
        self.tables.iter()
    }

    pub fn table(&self, symbol: &str) -> Option<&FunctionTable> {
        self.table_index.get(symbol).map(|&t| &self.tables[t])
    }

    /// Deterministic full-state dump, used by transactionality tests.
    pub fn debug_dump(&self) -> String {
        let mut lines = Vec::new();
        for t in &self.tables {
            for (args, id) in t.entries() {
                let args: Vec<String> = args.iter().map(|a| a.to_string()).collect();
                lines.push(format!(
                    "{}({}) -> {} level {}",
                    t.symbol,
                    args.join(","),
                    id,
                    self.level(id)
                ));
            }
        }
        let mut consts: Vec<String> = self
            .const_index
            .iter()
            .map(|(c, id)| format!("const {c} -> {id}"))
            .collect();
        consts.sort();
        lines.sort();
        lines.extend(consts);
        lines.join("\n")
    }

    /// Structural audit: table bijectivity, argument existence, the
    /// nesting recurrence, and the level bound when one is given.
    pub fn check_invariants(&self, max_nesting: Option<u32>) -> Result<(), String> {
        for t in &self.tables {
            if t.forward.len() != t.reverse.len() {
                return Err(format!(
                    "table '{}': forward has {} entries, reverse {}",
                    t.symbol,
                    t.forward.len(),
                    t.reverse.len()
                ));
            }
            for (args, &id) in &t.forward {
                match t.reverse.get(&id) {
                    Some(back) if back == args => {}
                    other => {
                        return Err(format!(
                            "table '{}': forward({args:?}) = {id} but reverse({id}) = {other:?}",
                            t.symbol
                        ))
                    }
                }
                let mut max_arg = 0;
                for a in args {
                    if !self.terms.contains_key(a) {
                        return Err(format!("table '{}': dangling argument {a}", t.symbol));
                    }
                    max_arg = max_arg.max(self.level(*a));
                }
                if self.level(id) != max_arg + 1 {
                    return Err(format!(
                        "table '{}': id {id} has level {} but arguments reach {}",
                        t.symbol,
                        self.level(id),
                        max_arg
                    ));
                }
                if let Some(bound) = max_nesting {
                    if self.level(id) > bound {
                        return Err(format!(
                            "table '{}': id {id} level {} exceeds bound {bound}",
                            t.symbol,
                            self.level(id)
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::Term;

    #[test]
    fn constant_interning_is_idempotent() {
        let mut s = TermStore::new();
        let a1 = s.intern_sym("a");
        let a2 = s.intern_sym("a");
        assert_eq!(a1, a2);
        assert_ne!(a1, s.intern_sym("b"));
    }

    #[test]
    fn constants_have_level_zero() {
        let mut s = TermStore::new();
        let one = s.intern_int(1);
        assert_eq!(s.level(one), 0);
    }

    #[test]
    fn int_and_sym_are_distinct_namespaces() {
        let mut s = TermStore::new();
        assert_ne!(s.intern_int(1), s.intern_sym("one"));
    }

    #[test]
    fn lookup_finds_only_inserted_tuples() {
        let mut s = TermStore::new();
        let one = s.intern_int(1);
        assert_eq!(s.lookup_function("s", &[one]), None);
        let id = s.insert_function("s", &[one], None, false).unwrap();
        assert_eq!(s.lookup_function("s", &[one]), Some(id));

        let a = s.intern_sym("a");
        let b = s.intern_sym("b");
        let c = s.intern_sym("c");
        let fab = s.insert_function("f", &[a, b], None, false).unwrap();
        assert_eq!(s.lookup_function("f", &[a, b]), Some(fab));
        assert_eq!(s.lookup_function("f", &[a, c]), None);
    }

    #[test]
    fn insert_twice_yields_single_identifier() {
        let mut s = TermStore::new();
        let one = s.intern_int(1);
        let id1 = s.insert_function("s", &[one], None, false).unwrap();
        let id2 = s.insert_function("s", &[one], None, false).unwrap();
        assert_eq!(id1, id2);
        assert_eq!(s.table("s").unwrap().len(), 1);
    }

    #[test]
    fn nesting_bound_rejects_deep_terms() {
        let mut s = TermStore::new();
        let one = s.intern_int(1);
        let s1 = s.insert_function("s", &[one], Some(1), false).unwrap();
        assert_eq!(s.level(s1), 1);
        let err = s.insert_function("s", &[s1], Some(1), false).unwrap_err();
        assert_eq!(err, NestingExceeded { level: 2, bound: 1 });
        assert_eq!(s.stats().nesting_pruned, 1);
    }

    #[test]
    fn nesting_levels_match_inside_to_outside_build() {
        // f(s(t, w(a)), f(b, c)) has level 3; s(a, b) has level 1.
        let mut s = TermStore::new();
        let term = Term::func(
            "f",
            vec![
                Term::func("s", vec![Term::sym("t"), Term::func("w", vec![Term::sym("a")])]),
                Term::func("f", vec![Term::sym("b"), Term::sym("c")]),
            ],
        );
        let id = s.intern_term(&term, None).unwrap();
        assert_eq!(s.level(id), 3);

        let sab = Term::func("s2", vec![Term::sym("a"), Term::sym("b")]);
        let id2 = s.intern_term(&sab, None).unwrap();
        assert_eq!(s.level(id2), 1);
        s.check_invariants(None).unwrap();
    }

    #[test]
    fn rollback_restores_tables() {
        let mut s = TermStore::new();
        let b = s.intern_sym("b");
        let before = s.debug_dump();
        let m = s.mark_trail();
        let id = s.insert_function("s", &[b], None, true).unwrap();
        assert_eq!(s.lookup_function("s", &[b]), Some(id));
        s.rollback(m);
        assert_eq!(s.lookup_function("s", &[b]), None);
        assert_eq!(s.debug_dump(), before);
        assert_eq!(s.stats().rolled_back, 1);
    }

    #[test]
    fn commit_persists_tentative_inserts() {
        let mut s = TermStore::new();
        let b = s.intern_sym("b");
        let m = s.mark_trail();
        let id = s.insert_function("s", &[b], None, true).unwrap();
        s.commit(m);
        assert_eq!(s.lookup_function("s", &[b]), Some(id));
        assert_eq!(s.trail_len(), 0);
        // A later rollback to the same mark must not undo committed entries.
        s.rollback(m);
        assert_eq!(s.lookup_function("s", &[b]), Some(id));
    }

    #[test]
    fn empty_transaction_is_a_no_op() {
        let mut s = TermStore::new();
        s.intern_sym("a");
        let before = s.debug_dump();
        let m = s.mark_trail();
        s.rollback(m);
        assert_eq!(s.debug_dump(), before);
    }

    #[test]
    fn tentative_insert_visible_to_lookup_before_commit() {
        let mut s = TermStore::new();
        let b = s.intern_sym("b");
        let m = s.mark_trail();
        let id = s.insert_function("s", &[b], None, true).unwrap();
        // A second occurrence of the same application reuses the id.
        let again = s.insert_function("s", &[b], None, true).unwrap();
        assert_eq!(id, again);
        assert_eq!(s.trail_len(), 1);
        s.rollback(m);
    }

    #[test]
    fn nested_marks_are_lifo() {
        let mut s = TermStore::new();
        let a = s.intern_sym("a");
        let b = s.intern_sym("b");
        let m1 = s.mark_trail();
        let id_a = s.insert_function("s", &[a], None, true).unwrap();
        let m2 = s.mark_trail();
        s.insert_function("s", &[b], None, true).unwrap();
        s.rollback(m2);
        assert_eq!(s.lookup_function("s", &[a]), Some(id_a));
        assert_eq!(s.lookup_function("s", &[b]), None);
        s.commit(m1);
        assert_eq!(s.lookup_function("s", &[a]), Some(id_a));
    }

    #[test]
    fn to_term_inverts_interning() {
        let mut s = TermStore::new();
        for t in [
            Term::sym("a"),
            Term::func("s", vec![Term::int(1)]),
            Term::func("f", vec![Term::func("s", vec![Term::int(1)]), Term::int(2)]),
        ] {
            let id = s.intern_term(&t, None).unwrap();
            assert_eq!(s.to_term(id), t);
        }
    }

    #[test]
    fn id_text_uses_mint_order() {
        let mut s = TermStore::new();
        let one = s.intern_int(1);
        let s1 = s.insert_function("s", &[one], None, false).unwrap();
        let f1 = s.insert_function("f", &[one, s1], None, false).unwrap();
        assert_eq!(s.id_text(one), "1");
        assert_eq!(s.id_text(s1), "@1");
        assert_eq!(s.id_text(f1), "@2");
    }

    #[test]
    fn store_is_shareable_after_grounding() {
        // Single writer during grounding, read-only afterwards.
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<TermStore>();
    }

    #[test]
    fn rolled_back_ids_leave_counter_gaps() {
        let mut s = TermStore::new();
        let a = s.intern_sym("a");
        let m = s.mark_trail();
        let tentative = s.insert_function("s", &[a], None, true).unwrap();
        assert_eq!(s.id_text(tentative), "@1");
        s.rollback(m);
        let b = s.intern_sym("b");
        let next = s.insert_function("s", &[b], None, false).unwrap();
        assert_eq!(s.id_text(next), "@2");
    }
}
