//! Lexer and parser for the rule language.
//!
//! Identifiers are classified by case and position: variables start
//! uppercase, constants and predicate/function names lowercase, integers
//! are digit-only. `#name` atoms are reserved function predicates and
//! `@k` terms are interned-id references; both occur only in flattened
//! programs fed back into the pipeline.

use std::fmt;

use crate::ast::{Aggregate, Atom, Constant, Literal, Program, Rule, Term};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub expected: Vec<String>,
    pub found: String,
}

impl ParseError {
    fn new(pos: (u32, u32), expected: &[&str], found: impl Into<String>) -> ParseError {
        ParseError {
            line: pos.0,
            col: pos.1,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: found.into(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error at {}:{}: expected ", self.line, self.col)?;
        for (i, e) in self.expected.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, "; found {}", self.found)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Var(String),
    Int(i64),
    Hash(String),
    IdRef(u32),
    ColonDash,
    Dot,
    Comma,
    LParen,
    RParen,
    Pipe,
    Eq,
    Colon,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Var(s) => format!("variable '{s}'"),
            Tok::Int(n) => format!("integer {n}"),
            Tok::Hash(s) => format!("'#{s}'"),
            Tok::IdRef(n) => format!("'@{n}'"),
            Tok::ColonDash => "':-'".to_string(),
            Tok::Dot => "'.'".to_string(),
            Tok::Comma => "','".to_string(),
            Tok::LParen => "'('".to_string(),
            Tok::RParen => "')'".to_string(),
            Tok::Pipe => "'|'".to_string(),
            Tok::Eq => "'='".to_string(),
            Tok::Colon => "':'".to_string(),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

type Spanned = (Tok, (u32, u32));

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut toks = Vec::new();
    let mut chars = text.chars().peekable();
    let mut line = 1u32;
    let mut col = 1u32;

    macro_rules! bump {
        () => {{
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                col = 1;
            } else if c.is_some() {
                col += 1;
            }
            c
        }};
    }

    loop {
        let (l, c) = (line, col);
        let ch = match chars.peek().copied() {
            Some(ch) => ch,
            None => {
                toks.push((Tok::Eof, (l, c)));
                return Ok(toks);
            }
        };
        match ch {
            ' ' | '\t' | '\r' | '\n' => {
                bump!();
            }
            '%' => {
                while let Some(&n) = chars.peek() {
                    if n == '\n' {
                        break;
                    }
                    bump!();
                }
            }
            '.' => {
                bump!();
                toks.push((Tok::Dot, (l, c)));
            }
            ',' => {
                bump!();
                toks.push((Tok::Comma, (l, c)));
            }
            '(' => {
                bump!();
                toks.push((Tok::LParen, (l, c)));
            }
            ')' => {
                bump!();
                toks.push((Tok::RParen, (l, c)));
            }
            '|' => {
                bump!();
                toks.push((Tok::Pipe, (l, c)));
            }
            '=' => {
                bump!();
                toks.push((Tok::Eq, (l, c)));
            }
            ':' => {
                bump!();
                if chars.peek() == Some(&'-') {
                    bump!();
                    toks.push((Tok::ColonDash, (l, c)));
                } else {
                    toks.push((Tok::Colon, (l, c)));
                }
            }
            '#' => {
                bump!();
                let mut name = String::new();
                while let Some(&n) = chars.peek() {
                    if n.is_ascii_alphanumeric() || n == '_' {
                        name.push(n);
                        bump!();
                    } else {
                        break;
                    }
                }
                if name.is_empty() || !name.starts_with(|c: char| c.is_ascii_lowercase()) {
                    return Err(ParseError::new((l, c), &["a name after '#'"], format!("'#{name}'")));
                }
                toks.push((Tok::Hash(name), (l, c)));
            }
            '@' => {
                bump!();
                let mut digits = String::new();
                while let Some(&n) = chars.peek() {
                    if n.is_ascii_digit() {
                        digits.push(n);
                        bump!();
                    } else {
                        break;
                    }
                }
                let n: u32 = digits
                    .parse()
                    .map_err(|_| ParseError::new((l, c), &["digits after '@'"], format!("'@{digits}'")))?;
                toks.push((Tok::IdRef(n), (l, c)));
            }
            d if d.is_ascii_digit() => {
                let mut digits = String::new();
                while let Some(&n) = chars.peek() {
                    if n.is_ascii_digit() {
                        digits.push(n);
                        bump!();
                    } else {
                        break;
                    }
                }
                let n: i64 = digits
                    .parse()
                    .map_err(|_| ParseError::new((l, c), &["an integer"], format!("'{digits}'")))?;
                toks.push((Tok::Int(n), (l, c)));
            }
            a if a.is_ascii_alphabetic() => {
                let mut name = String::new();
                while let Some(&n) = chars.peek() {
                    if n.is_ascii_alphanumeric() || n == '_' {
                        name.push(n);
                        bump!();
                    } else {
                        break;
                    }
                }
                if a.is_ascii_uppercase() {
                    toks.push((Tok::Var(name), (l, c)));
                } else {
                    toks.push((Tok::Ident(name), (l, c)));
                }
            }
            other => {
                return Err(ParseError::new((l, c), &["a token"], format!("'{other}'")));
            }
        }
    }
}

struct Parser {
    toks: Vec<Spanned>,
    idx: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.idx].0
    }

    fn peek2(&self) -> &Tok {
        let i = (self.idx + 1).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn pos(&self) -> (u32, u32) {
        self.toks[self.idx].1
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.idx].0.clone();
        if self.idx + 1 < self.toks.len() {
            self.idx += 1;
        }
        t
    }

    fn err(&self, expected: &[&str]) -> ParseError {
        ParseError::new(self.pos(), expected, self.peek().describe())
    }

    fn expect(&mut self, want: Tok, desc: &str) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.next();
            Ok(())
        } else {
            Err(self.err(&[desc]))
        }
    }

    fn parse_program(&mut self) -> Result<Program, ParseError> {
        let mut rules = Vec::new();
        while *self.peek() != Tok::Eof {
            rules.push(self.parse_rule()?);
        }
        Ok(Program { rules })
    }

    fn parse_rule(&mut self) -> Result<Rule, ParseError> {
        let line = self.pos().0;
        let mut head = Vec::new();
        if *self.peek() != Tok::ColonDash {
            loop {
                head.push(self.parse_atom()?);
                match self.peek() {
                    Tok::Ident(v) if v == "v" => {
                        self.next();
                    }
                    Tok::Pipe => {
                        self.next();
                    }
                    _ => break,
                }
            }
        }
        let mut body = Vec::new();
        if *self.peek() == Tok::ColonDash {
            self.next();
            loop {
                body.push(self.parse_literal()?);
                if *self.peek() == Tok::Comma {
                    self.next();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::Dot, "'.'")?;
        Ok(Rule { head, body, line })
    }

    fn parse_literal(&mut self) -> Result<Literal, ParseError> {
        match self.peek() {
            Tok::Ident(n) if n == "not" => {
                self.next();
                Ok(Literal::Neg(self.parse_atom()?))
            }
            Tok::Var(_) if *self.peek2() == Tok::Eq => {
                let bound_var = match self.next() {
                    Tok::Var(v) => v,
                    _ => unreachable!(),
                };
                self.next(); // '='
                self.parse_aggregate(bound_var)
            }
            _ => Ok(Literal::Pos(self.parse_atom()?)),
        }
    }

    fn parse_aggregate(&mut self, bound_var: String) -> Result<Literal, ParseError> {
        match self.peek() {
            Tok::Hash(n) if n == "count" => {
                self.next();
            }
            _ => return Err(self.err(&["'#count'"])),
        }
        self.expect(Tok::LParen, "'('")?;
        let mut local_vars = Vec::new();
        loop {
            match self.next() {
                Tok::Var(v) => local_vars.push(v),
                _ => {
                    return Err(ParseError::new(
                        self.toks[self.idx - 1].1,
                        &["a local variable"],
                        self.toks[self.idx - 1].0.describe(),
                    ))
                }
            }
            if *self.peek() == Tok::Comma {
                self.next();
            } else {
                break;
            }
        }
        self.expect(Tok::Colon, "':'")?;
        let mut conjunction = Vec::new();
        loop {
            conjunction.push(self.parse_atom()?);
            if *self.peek() == Tok::Comma {
                self.next();
            } else {
                break;
            }
        }
        self.expect(Tok::RParen, "')'")?;
        if local_vars.contains(&bound_var) {
            return Err(ParseError::new(
                self.pos(),
                &["a bound variable distinct from the aggregate's local variables"],
                format!("'{bound_var}'"),
            ));
        }
        Ok(Literal::Aggregate(Aggregate { bound_var, local_vars, conjunction }))
    }

    fn parse_atom(&mut self) -> Result<Atom, ParseError> {
        let predicate = match self.peek().clone() {
            Tok::Ident(n) => {
                self.next();
                n
            }
            Tok::Hash(n) => {
                self.next();
                format!("#{n}")
            }
            _ => return Err(self.err(&["a predicate name"])),
        };
        let mut args = Vec::new();
        if *self.peek() == Tok::LParen {
            self.next();
            loop {
                args.push(self.parse_term()?);
                if *self.peek() == Tok::Comma {
                    self.next();
                } else {
                    break;
                }
            }
            self.expect(Tok::RParen, "')'")?;
        }
        Ok(Atom { predicate, args })
    }

    fn parse_term(&mut self) -> Result<Term, ParseError> {
        match self.peek().clone() {
            Tok::Var(v) => {
                self.next();
                Ok(Term::Var(v))
            }
            Tok::Int(n) => {
                self.next();
                Ok(Term::Const(Constant::Int(n)))
            }
            Tok::IdRef(n) => {
                self.next();
                Ok(Term::Id(n))
            }
            Tok::Ident(name) => {
                self.next();
                if *self.peek() == Tok::LParen {
                    self.next();
                    let mut args = Vec::new();
                    loop {
                        args.push(self.parse_term()?);
                        if *self.peek() == Tok::Comma {
                            self.next();
                        } else {
                            break;
                        }
                    }
                    self.expect(Tok::RParen, "')'")?;
                    Ok(Term::Func(name, args))
                } else {
                    Ok(Term::Const(Constant::Sym(name)))
                }
            }
            _ => Err(self.err(&["a term"])),
        }
    }
}

/// Parses a program and checks program-wide lexical consistency:
/// predicate and function arities must not vary, function predicates may
/// not occur in heads.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, idx: 0 };
    let program = p.parse_program()?;
    validate(&program)?;
    Ok(program)
}

fn validate(p: &Program) -> Result<(), ParseError> {
    use std::collections::HashMap;
    let mut pred_arity: HashMap<String, usize> = HashMap::new();
    let mut func_arity: HashMap<String, usize> = HashMap::new();

    fn visit_term(
        t: &Term,
        line: u32,
        func_arity: &mut HashMap<String, usize>,
    ) -> Result<(), ParseError> {
        if let Term::Func(name, args) = t {
            if args.is_empty() {
                return Err(ParseError::new(
                    (line, 1),
                    &["a function application with at least one argument"],
                    format!("'{name}()'"),
                ));
            }
            if let Some(&a) = func_arity.get(name.as_str()) {
                if a != args.len() {
                    return Err(ParseError::new(
                        (line, 1),
                        &[&format!("function '{name}' with arity {a}")],
                        format!("arity {}", args.len()),
                    ));
                }
            } else {
                func_arity.insert(name.clone(), args.len());
            }
            for arg in args {
                visit_term(arg, line, func_arity)?;
            }
        }
        Ok(())
    }

    fn visit_atom(
        atom: &Atom,
        line: u32,
        in_rule_head: bool,
        pred_arity: &mut HashMap<String, usize>,
    ) -> Result<(), ParseError> {
        if in_rule_head && atom.is_function_predicate() {
            return Err(ParseError::new(
                (line, 1),
                &["a standard predicate in the rule head"],
                format!("'{}'", atom.predicate),
            ));
        }
        if let Some(&a) = pred_arity.get(atom.predicate.as_str()) {
            if a != atom.arity() {
                return Err(ParseError::new(
                    (line, 1),
                    &[&format!("predicate '{}' with arity {a}", atom.predicate)],
                    format!("arity {}", atom.arity()),
                ));
            }
        } else {
            pred_arity.insert(atom.predicate.clone(), atom.arity());
        }
        Ok(())
    }

    for rule in &p.rules {
        // Ground bodyless `#f(@k, args)` statements are table facts, the
        // one place a function predicate may stand alone.
        let table_fact = rule.is_ground_fact() && rule.head[0].is_function_predicate();
        for atom in &rule.head {
            visit_atom(atom, rule.line, !table_fact, &mut pred_arity)?;
            for t in &atom.args {
                visit_term(t, rule.line, &mut func_arity)?;
            }
        }
        for lit in &rule.body {
            match lit {
                Literal::Pos(a) | Literal::Neg(a) => {
                    visit_atom(a, rule.line, false, &mut pred_arity)?;
                    for t in &a.args {
                        visit_term(t, rule.line, &mut func_arity)?;
                    }
                }
                Literal::Aggregate(agg) => {
                    for a in &agg.conjunction {
                        visit_atom(a, rule.line, false, &mut pred_arity)?;
                        for t in &a.args {
                            visit_term(t, rule.line, &mut func_arity)?;
                        }
                    }
                }
            }
        }
    }

    // A `#f` predicate carries the function's arguments plus the id.
    for (name, arity) in &func_arity {
        let fp = format!("#{name}");
        if let Some(&pa) = pred_arity.get(fp.as_str()) {
            if pa != arity + 1 {
                return Err(ParseError::new(
                    (1, 1),
                    &[&format!("'#{name}' with arity {}", arity + 1)],
                    format!("arity {pa}"),
                ));
            }
        }
    }
    Ok(())
}
