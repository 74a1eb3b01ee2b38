//! Function-free rule form: every function application has been replaced
//! by an id variable plus a function atom `#f(Id, Args...)` linking it to
//! its arguments.

use indexmap::IndexMap;

use crate::ast::Constant;
use crate::term_store::{TermId, TermStore};

/// Argument of a flattened atom. Constants stay symbolic until grounding
/// interns them; `Id` is an already-interned term from fact loading.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FlatTerm {
    Const(Constant),
    Id(TermId),
    Var(String),
}

impl FlatTerm {
    pub fn as_var(&self) -> Option<&str> {
        match self {
            FlatTerm::Var(v) => Some(v),
            _ => None,
        }
    }

    pub fn text(&self, store: &TermStore) -> String {
        match self {
            FlatTerm::Const(c) => c.to_string(),
            FlatTerm::Id(id) => store.id_text(*id),
            FlatTerm::Var(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlatAtom {
    pub predicate: String,
    pub args: Vec<FlatTerm>,
}

impl FlatAtom {
    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(FlatTerm::as_var)
    }

    pub fn text(&self, store: &TermStore) -> String {
        if self.args.is_empty() {
            return self.predicate.clone();
        }
        let args: Vec<String> = self.args.iter().map(|a| a.text(store)).collect();
        format!("{}({})", self.predicate, args.join(", "))
    }
}

/// Whether the source application occurs only in the rule head. Only
/// head-only atoms may mint new term ids during matching; an application
/// that also occurs anywhere in the body is a plain lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    HeadOnly,
    BodyTouched,
}

/// Body atom standing for one function application of the source rule.
/// Displayed as `#f(Id, Args...)`: source arity plus the leading id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionAtom {
    pub symbol: String,
    pub id_arg: FlatTerm,
    pub args: Vec<FlatTerm>,
    pub provenance: Provenance,
}

impl FunctionAtom {
    pub fn predicate(&self) -> String {
        format!("#{}", self.symbol)
    }

    pub fn text(&self, store: &TermStore) -> String {
        let mut parts = vec![self.id_arg.text(store)];
        parts.extend(self.args.iter().map(|a| a.text(store)));
        format!("#{}({})", self.symbol, parts.join(", "))
    }
}

/// Aggregate literal after extraction: the conjunction has been reduced
/// to a single function-free atom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlatAggregate {
    pub bound: FlatTerm,
    pub local_vars: Vec<String>,
    pub atom: FlatAtom,
}

impl FlatAggregate {
    /// Conjunction variables that are not local: they must be bound
    /// before the aggregate is evaluated.
    pub fn global_vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        for v in self.atom.vars() {
            if !self.local_vars.iter().any(|l| l == v) && !out.iter().any(|o| o == v) {
                out.push(v.to_string());
            }
        }
        out
    }

    pub fn text(&self, store: &TermStore) -> String {
        format!(
            "{} = #count( {}: {} )",
            self.bound.text(store),
            self.local_vars.join(", "),
            self.atom.text(store)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FlatLiteral {
    Pos(FlatAtom),
    Neg(FlatAtom),
    Function(FunctionAtom),
    Aggregate(FlatAggregate),
}

impl FlatLiteral {
    pub fn text(&self, store: &TermStore) -> String {
        match self {
            FlatLiteral::Pos(a) => a.text(store),
            FlatLiteral::Neg(a) => format!("not {}", a.text(store)),
            FlatLiteral::Function(fa) => fa.text(store),
            FlatLiteral::Aggregate(agg) => agg.text(store),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlatRule {
    pub head: Vec<FlatAtom>,
    pub body: Vec<FlatLiteral>,
    /// Index of the source rule, for diagnostics.
    pub origin: usize,
}

impl FlatRule {
    pub fn text(&self, store: &TermStore) -> String {
        let head: Vec<String> = self.head.iter().map(|a| a.text(store)).collect();
        let mut s = head.join(" v ");
        if !self.body.is_empty() || self.head.is_empty() {
            if !s.is_empty() {
                s.push(' ');
            }
            s.push_str(":- ");
            let body: Vec<String> = self.body.iter().map(|l| l.text(store)).collect();
            s.push_str(&body.join(", "));
        }
        s.push('.');
        s
    }
}

/// One table of ground tuples per predicate. A tuple is either merely
/// possibly true or established (definitely true in every answer set).
#[derive(Debug, Clone, Default)]
pub struct PredTable {
    pub arity: usize,
    tuples: IndexMap<Vec<TermId>, bool>,
}

impl PredTable {
    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn contains(&self, tuple: &[TermId]) -> bool {
        self.tuples.contains_key(tuple)
    }

    pub fn is_established(&self, tuple: &[TermId]) -> bool {
        self.tuples.get(tuple).copied().unwrap_or(false)
    }

    /// Adds a tuple; returns true when it was new. Establishing an
    /// existing possibly-true tuple upgrades it.
    pub fn add(&mut self, tuple: Vec<TermId>, established: bool) -> bool {
        match self.tuples.get_mut(&tuple) {
            Some(flag) => {
                if established && !*flag {
                    *flag = true;
                }
                false
            }
            None => {
                self.tuples.insert(tuple, established);
                true
            }
        }
    }

    pub fn tuple_at(&self, i: usize) -> &[TermId] {
        self.tuples.get_index(i).expect("tuple index in range").0
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[TermId], bool)> {
        self.tuples.iter().map(|(t, &e)| (t.as_slice(), e))
    }

    /// Upgrades a possibly-true tuple to established; true when the flag
    /// actually changed.
    pub fn establish(&mut self, tuple: &[TermId]) -> bool {
        match self.tuples.get_mut(tuple) {
            Some(flag) if !*flag => {
                *flag = true;
                true
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PredicateTables {
    map: IndexMap<String, PredTable>,
}

impl PredicateTables {
    pub fn ensure(&mut self, predicate: &str, arity: usize) {
        let t = self
            .map
            .entry(predicate.to_string())
            .or_insert_with(|| PredTable { arity, ..PredTable::default() });
        assert_eq!(t.arity, arity, "arity mismatch for predicate '{predicate}'");
    }

    pub fn add(&mut self, predicate: &str, tuple: Vec<TermId>, established: bool) -> bool {
        self.ensure(predicate, tuple.len());
        self.map
            .get_mut(predicate)
            .expect("table just ensured")
            .add(tuple, established)
    }

    pub fn get(&self, predicate: &str) -> Option<&PredTable> {
        self.map.get(predicate)
    }

    pub fn establish(&mut self, predicate: &str, tuple: &[TermId]) -> bool {
        self.map.get_mut(predicate).is_some_and(|t| t.establish(tuple))
    }

    pub fn size_of(&self, predicate: &str) -> usize {
        self.map.get(predicate).map_or(0, PredTable::len)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &PredTable)> {
        self.map.iter().map(|(k, v)| (k.as_str(), v))
    }
}

/// The rewriter's output: flattened rules plus the fact tables it
/// already interned.
#[derive(Debug, Clone, Default)]
pub struct FlatProgram {
    pub rules: Vec<FlatRule>,
    pub tables: PredicateTables,
}

impl FlatProgram {
    /// Program text: interned function tuples as `#f` facts, then plain
    /// facts in id form, then the rules.
    pub fn text(&self, store: &TermStore) -> String {
        let mut out = String::new();
        for t in store.tables() {
            for (args, id) in t.entries() {
                let args: Vec<String> = args.iter().map(|a| store.id_text(*a)).collect();
                out.push_str(&format!(
                    "#{}({}, {}).\n",
                    t.symbol,
                    store.id_text(id),
                    args.join(", ")
                ));
            }
        }
        for (pred, table) in self.tables.iter() {
            for (tuple, _) in table.iter() {
                if tuple.is_empty() {
                    out.push_str(&format!("{pred}.\n"));
                } else {
                    let args: Vec<String> = tuple.iter().map(|a| store.id_text(*a)).collect();
                    out.push_str(&format!("{pred}({}).\n", args.join(", ")));
                }
            }
        }
        for r in &self.rules {
            out.push_str(&r.text(store));
            out.push('\n');
        }
        out
    }
}
