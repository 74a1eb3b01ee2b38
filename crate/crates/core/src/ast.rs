//! Surface syntax: rules with disjunctive heads, negated literals,
//! `#count` aggregates and nested function terms.

use std::fmt;

/// A constant: integers and lowercase symbolic names are distinct terms
/// even when spelled alike (the lexer keeps them apart).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constant {
    Int(i64),
    Sym(String),
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constant::Int(n) => write!(f, "{n}"),
            Constant::Sym(s) => write!(f, "{s}"),
        }
    }
}

/// A term of the rule language. `Id` is an interned-term reference (`@3`);
/// it only occurs in flattened programs printed by the rewriter.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Const(Constant),
    Var(String),
    Func(String, Vec<Term>),
    Id(u32),
}

impl Term {
    pub fn sym(name: &str) -> Term {
        Term::Const(Constant::Sym(name.to_string()))
    }

    pub fn int(n: i64) -> Term {
        Term::Const(Constant::Int(n))
    }

    pub fn var(name: &str) -> Term {
        Term::Var(name.to_string())
    }

    pub fn func(name: &str, args: Vec<Term>) -> Term {
        Term::Func(name.to_string(), args)
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Const(_) | Term::Id(_) => true,
            Term::Func(_, args) => args.iter().all(Term::is_ground),
        }
    }

    /// Collects variable names in first-occurrence order.
    pub fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Term::Var(v) => {
                if !out.iter().any(|x| x == v) {
                    out.push(v.clone());
                }
            }
            Term::Func(_, args) => {
                for a in args {
                    a.collect_vars(out);
                }
            }
            Term::Const(_) | Term::Id(_) => {}
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(c) => write!(f, "{c}"),
            Term::Var(v) => write!(f, "{v}"),
            Term::Id(n) => write!(f, "@{n}"),
            Term::Func(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: &str, args: Vec<Term>) -> Atom {
        Atom { predicate: predicate.to_string(), args }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }

    pub fn collect_vars(&self, out: &mut Vec<String>) {
        for a in &self.args {
            a.collect_vars(out);
        }
    }

    /// True if the predicate is a reserved function predicate (`#f`).
    pub fn is_function_predicate(&self) -> bool {
        self.predicate.starts_with('#')
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.predicate)?;
        if !self.args.is_empty() {
            write!(f, "(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{a}")?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

/// `X = #count( Locals: Conjunction )`. The conjunction is a list of
/// positive atoms; the bound variable is set to the count or compared
/// against it when already bound.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Aggregate {
    pub bound_var: String,
    pub local_vars: Vec<String>,
    pub conjunction: Vec<Atom>,
}

impl Aggregate {
    /// Variables of the conjunction that are not local to the aggregate.
    pub fn global_vars(&self) -> Vec<String> {
        let mut vars = Vec::new();
        for atom in &self.conjunction {
            atom.collect_vars(&mut vars);
        }
        vars.retain(|v| !self.local_vars.contains(v));
        vars
    }
}

impl fmt::Display for Aggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = #count( ", self.bound_var)?;
        for (i, v) in self.local_vars.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ": ")?;
        for (i, a) in self.conjunction.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, " )")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Literal {
    Pos(Atom),
    Neg(Atom),
    Aggregate(Aggregate),
}

impl Literal {
    pub fn atom(&self) -> Option<&Atom> {
        match self {
            Literal::Pos(a) | Literal::Neg(a) => Some(a),
            Literal::Aggregate(_) => None,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Pos(a) => write!(f, "{a}"),
            Literal::Neg(a) => write!(f, "not {a}"),
            Literal::Aggregate(agg) => write!(f, "{agg}"),
        }
    }
}

/// A rule `head :- body.` — empty head is a constraint, empty body a fact.
/// The source line is diagnostic only and ignored by equality.
#[derive(Debug, Clone, Eq)]
pub struct Rule {
    pub head: Vec<Atom>,
    pub body: Vec<Literal>,
    pub line: u32,
}

impl Rule {
    pub fn new(head: Vec<Atom>, body: Vec<Literal>) -> Rule {
        Rule { head, body, line: 0 }
    }

    pub fn is_constraint(&self) -> bool {
        self.head.is_empty()
    }

    /// A fact statement: single ground head atom, no body.
    pub fn is_ground_fact(&self) -> bool {
        self.body.is_empty() && self.head.len() == 1 && self.head[0].is_ground()
    }
}

impl PartialEq for Rule {
    fn eq(&self, other: &Rule) -> bool {
        self.head == other.head && self.body == other.body
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.head.iter().enumerate() {
            if i > 0 {
                write!(f, " v ")?;
            }
            write!(f, "{a}")?;
        }
        if !self.body.is_empty() || self.head.is_empty() {
            if !self.head.is_empty() {
                write!(f, " ")?;
            }
            write!(f, ":- ")?;
            for (i, l) in self.body.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{l}")?;
            }
        }
        write!(f, ".")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Program {
    pub rules: Vec<Rule>,
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

/// Canonical text of a program; `parse_program` of the result yields a
/// structurally equal program.
pub fn print_program(p: &Program) -> String {
    p.to_string()
}
