//! Signatures, terms, equations and their classification.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TheoryError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: {message}")]
    Semantic { line: usize, message: String },
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("unknown built-in theory `{0}`")]
    UnknownTheory(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub name: String,
    pub ops: Vec<(String, usize)>,
}

impl Signature {
    pub fn arity(&self, op: &str) -> Option<usize> {
        self.ops.iter().find(|(n, _)| n == op).map(|(_, a)| *a)
    }

    pub fn constants(&self) -> impl Iterator<Item = &str> {
        self.ops.iter().filter(|(_, a)| *a == 0).map(|(n, _)| n.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Term {
    Var(String),
    App(String, Vec<Term>),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(name.to_string())
    }

    pub fn app(op: &str, args: Vec<Term>) -> Term {
        Term::App(op.to_string(), args)
    }

    /// Occurrence count of every variable.
    pub fn var_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        self.count_into(&mut counts);
        counts
    }

    fn count_into(&self, counts: &mut BTreeMap<String, usize>) {
        match self {
            Term::Var(v) => *counts.entry(v.clone()).or_default() += 1,
            Term::App(_, args) => args.iter().for_each(|a| a.count_into(counts)),
        }
    }

    pub fn vars(&self) -> BTreeSet<String> {
        self.var_counts().into_keys().collect()
    }

    /// Variables in order of first occurrence.
    pub fn vars_ordered(&self, out: &mut Vec<String>) {
        match self {
            Term::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Term::App(_, args) => args.iter().for_each(|a| a.vars_ordered(out)),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Term::Var(_) => 0,
            Term::App(_, args) => 1 + args.iter().map(Term::depth).max().unwrap_or(0),
        }
    }

    pub fn rename(&self, f: &impl Fn(&str) -> String) -> Term {
        match self {
            Term::Var(v) => Term::Var(f(v)),
            Term::App(op, args) => Term::App(op.clone(), args.iter().map(|a| a.rename(f)).collect()),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::App(op, args) if args.is_empty() => write!(f, "{op}"),
            Term::App(op, args) => {
                write!(f, "{op}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Capture-free simultaneous substitution.
pub fn substitute(t: &Term, env: &BTreeMap<String, Term>) -> Result<Term, TheoryError> {
    match t {
        Term::Var(v) => env.get(v).cloned().ok_or_else(|| TheoryError::Unbound(v.clone())),
        Term::App(op, args) => Ok(Term::App(
            op.clone(),
            args.iter().map(|a| substitute(a, env)).collect::<Result<_, _>>()?,
        )),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Equation {
    pub name: String,
    pub context: Vec<String>,
    pub lhs: Term,
    pub rhs: Term,
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} = {}", self.name, self.lhs, self.rhs)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquationClass {
    pub linear: bool,
    pub balanced: bool,
    pub dup: bool,
    pub drop: bool,
}

impl fmt::Display for EquationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut tags = Vec::new();
        for (on, tag) in [
            (self.linear, "linear"),
            (self.balanced, "balanced"),
            (self.dup, "dup"),
            (self.drop, "drop"),
        ] {
            if on {
                tags.push(tag);
            }
        }
        if tags.is_empty() {
            write!(f, "-")
        } else {
            write!(f, "{}", tags.join(","))
        }
    }
}

pub fn classify_equation(eq: &Equation) -> EquationClass {
    let s = eq.lhs.var_counts();
    let t = eq.rhs.var_counts();
    let same_vars = s.keys().eq(t.keys());
    EquationClass {
        linear: same_vars && s.values().chain(t.values()).all(|&c| c == 1),
        balanced: same_vars && s == t,
        dup: s.values().chain(t.values()).any(|&c| c >= 2),
        drop: !same_vars,
    }
}

/// The canonical model family backing a built-in theory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Carrier {
    Magma,
    Monoid,
    CommMonoid,
    Semilattice,
    Convex,
    Exceptions(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Theory {
    pub signature: Signature,
    pub equations: Vec<Equation>,
    pub oracle: Option<Carrier>,
}

impl Theory {
    pub fn name(&self) -> &str {
        &self.signature.name
    }

    pub fn arity(&self, op: &str) -> Option<usize> {
        self.signature.arity(op)
    }

    pub fn equation(&self, name: &str) -> Option<&Equation> {
        self.equations.iter().find(|e| e.name == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeqPrediction {
    Guaranteed,
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoGoPrediction {
    Impossible,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub seq_dist_law: SeqPrediction,
    pub par_setoid_law: SeqPrediction,
    pub guarded_no_go: NoGoPrediction,
    /// The binary operation that is both commutative and idempotent, if any.
    pub witness_op: Option<String>,
}

fn is_commutativity(eq: &Equation, op: &str) -> bool {
    let swapped = |a: &Term, b: &Term| match (a, b) {
        (Term::App(o1, xs), Term::App(o2, ys)) if o1 == op && o2 == op && xs.len() == 2 => {
            matches!((&xs[0], &xs[1]), (Term::Var(x), Term::Var(y)) if x != y)
                && ys.len() == 2
                && xs[0] == ys[1]
                && xs[1] == ys[0]
        }
        _ => false,
    };
    swapped(&eq.lhs, &eq.rhs)
}

fn is_idempotence(eq: &Equation, op: &str) -> bool {
    let idem = |a: &Term, b: &Term| match (a, b) {
        (Term::App(o, xs), Term::Var(v)) if o == op && xs.len() == 2 => {
            xs[0] == Term::Var(v.clone()) && xs[1] == Term::Var(v.clone())
        }
        _ => false,
    };
    idem(&eq.lhs, &eq.rhs) || idem(&eq.rhs, &eq.lhs)
}

pub fn predict_composability(th: &Theory) -> Prediction {
    let classes: Vec<_> = th.equations.iter().map(classify_equation).collect();
    let witness_op = th
        .signature
        .ops
        .iter()
        .filter(|(_, a)| *a == 2)
        .map(|(n, _)| n)
        .find(|op| {
            th.equations.iter().any(|e| is_commutativity(e, op))
                && th.equations.iter().any(|e| is_idempotence(e, op))
        })
        .cloned();
    Prediction {
        seq_dist_law: if classes.iter().all(|c| c.balanced) {
            SeqPrediction::Guaranteed
        } else {
            SeqPrediction::Unknown
        },
        par_setoid_law: if classes.iter().all(|c| !c.drop) {
            SeqPrediction::Guaranteed
        } else {
            SeqPrediction::Unknown
        },
        guarded_no_go: if witness_op.is_some() {
            NoGoPrediction::Impossible
        } else {
            NoGoPrediction::Unknown
        },
        witness_op,
    }
}

// ---------------------------------------------------------------------------
// Parsing

struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    src: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str, line: usize) -> Self {
        Cursor {
            chars: src.chars().collect(),
            pos: 0,
            line,
            src,
        }
    }

    fn err(&self, message: impl Into<String>) -> TheoryError {
        TheoryError::Syntax {
            line: self.line,
            column: self.pos + 1,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn expect(&mut self, c: char) -> Result<(), TheoryError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected `{c}`")))
        }
    }

    fn ident(&mut self) -> Result<String, TheoryError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len()
            && (self.chars[self.pos].is_alphanumeric() || matches!(self.chars[self.pos], '_' | '\'' | '-'))
        {
            self.pos += 1;
        }
        if start == self.pos || !self.chars[start].is_alphabetic() && self.chars[start] != '_' {
            self.pos = start;
            return Err(self.err("expected identifier"));
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn number(&mut self) -> Result<usize, TheoryError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let digits: String = self.chars[start..self.pos].iter().collect();
        digits.parse().map_err(|_| {
            self.pos = start;
            self.err("expected arity")
        })
    }

    fn at_end(&mut self) -> bool {
        self.peek().is_none()
    }

    fn rest(&self) -> &str {
        let byte = self.src.char_indices().nth(self.pos).map_or(self.src.len(), |(b, _)| b);
        &self.src[byte..]
    }

    fn term(&mut self) -> Result<(Term, usize), TheoryError> {
        let column = {
            self.skip_ws();
            self.pos + 1
        };
        let name = self.ident()?;
        if self.peek() == Some('(') {
            self.pos += 1;
            let mut args = Vec::new();
            if self.peek() == Some(')') {
                self.pos += 1;
            } else {
                loop {
                    args.push(self.term()?.0);
                    match self.peek() {
                        Some(',') => self.pos += 1,
                        Some(')') => {
                            self.pos += 1;
                            break;
                        }
                        _ => return Err(self.err("expected `,` or `)`")),
                    }
                }
            }
            Ok((Term::App(name, args), column))
        } else {
            Ok((Term::Var(name), column))
        }
    }
}

/// Raw equation before ops are resolved.
struct PendingEq {
    line: usize,
    name: String,
    context: Option<Vec<String>>,
    lhs: Term,
    rhs: Term,
}

pub fn parse_theory(text: &str) -> Result<Theory, TheoryError> {
    let mut name = String::from("anonymous");
    let mut ops: Vec<(String, usize)> = Vec::new();
    let mut pending = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut cur = Cursor::new(content, line);
        if cur.at_end() {
            continue;
        }
        let keyword = cur.ident()?;
        match keyword.as_str() {
            "theory" => {
                name = cur.ident()?;
            }
            "op" => {
                let op = cur.ident()?;
                cur.expect(':')?;
                let arity = cur.number()?;
                if ops.iter().any(|(n, _)| *n == op) {
                    return Err(TheoryError::Semantic {
                        line,
                        message: format!("operation `{op}` declared twice"),
                    });
                }
                ops.push((op, arity));
            }
            "eq" => {
                let eq_name = cur.ident()?;
                let context = if cur.peek() == Some('[') {
                    cur.pos += 1;
                    let mut vars = Vec::new();
                    while cur.peek() != Some(']') {
                        vars.push(cur.ident()?);
                        if cur.peek() == Some(',') {
                            cur.pos += 1;
                        }
                    }
                    cur.pos += 1;
                    Some(vars)
                } else {
                    None
                };
                cur.expect(':')?;
                let (lhs, _) = cur.term()?;
                cur.expect('=')?;
                let (rhs, _) = cur.term()?;
                pending.push(PendingEq {
                    line,
                    name: eq_name,
                    context,
                    lhs,
                    rhs,
                });
            }
            other => {
                return Err(TheoryError::Syntax {
                    line,
                    column: 1,
                    message: format!("unknown directive `{other}`"),
                })
            }
        }
        if !cur.at_end() {
            return Err(cur.err(format!("unexpected trailing input `{}`", cur.rest().trim())));
        }
    }
    let signature = Signature { name, ops };
    let mut equations = Vec::new();
    for p in pending {
        let lhs = resolve(&p.lhs, &signature, p.line)?;
        let rhs = resolve(&p.rhs, &signature, p.line)?;
        let mut inferred = Vec::new();
        lhs.vars_ordered(&mut inferred);
        rhs.vars_ordered(&mut inferred);
        let context = match p.context {
            Some(ctx) => {
                if let Some(v) = inferred.iter().find(|v| !ctx.contains(v)) {
                    return Err(TheoryError::Semantic {
                        line: p.line,
                        message: format!("unbound variable `{v}` in equation `{}`", p.name),
                    });
                }
                ctx
            }
            None => inferred,
        };
        if equations.iter().any(|e: &Equation| e.name == p.name) {
            return Err(TheoryError::Semantic {
                line: p.line,
                message: format!("equation `{}` declared twice", p.name),
            });
        }
        equations.push(Equation {
            name: p.name,
            context,
            lhs,
            rhs,
        });
    }
    Ok(Theory {
        signature,
        equations,
        oracle: None,
    })
}

/// Turn declared constants into applications and check arities.
fn resolve(t: &Term, sig: &Signature, line: usize) -> Result<Term, TheoryError> {
    match t {
        Term::Var(v) => match sig.arity(v) {
            Some(0) => Ok(Term::App(v.clone(), vec![])),
            Some(n) => Err(TheoryError::Semantic {
                line,
                message: format!("operation `{v}` has arity {n} but is used without arguments"),
            }),
            None => Ok(t.clone()),
        },
        Term::App(op, args) => {
            let arity = sig.arity(op).ok_or_else(|| TheoryError::Semantic {
                line,
                message: format!("unknown operation `{op}`"),
            })?;
            if arity != args.len() {
                return Err(TheoryError::Semantic {
                    line,
                    message: format!(
                        "operation `{op}` has arity {arity} but is applied to {} arguments",
                        args.len()
                    ),
                });
            }
            Ok(Term::App(
                op.clone(),
                args.iter().map(|a| resolve(a, sig, line)).collect::<Result<_, _>>()?,
            ))
        }
    }
}

// ---------------------------------------------------------------------------
// Built-in theories

pub const MAGMA: &str = include_str!("../theories/magma.theory");
pub const MONOID: &str = include_str!("../theories/monoid.theory");
pub const CMONOID: &str = include_str!("../theories/cmonoid.theory");
pub const SEMILATTICE: &str = include_str!("../theories/semilattice.theory");
pub const CONVEX: &str = include_str!("../theories/convex.theory");
pub const IDEM_BANG: &str = include_str!("../theories/idem_bang.theory");

pub const BUILTIN_NAMES: &[&str] = &[
    "magma",
    "monoid",
    "cmonoid",
    "semilattice",
    "convex",
    "exceptions(E=2)",
    "idem-bang",
];

fn exceptions_text(n: usize) -> String {
    let mut s = String::from("theory exceptions\n");
    for e in 0..n {
        s.push_str(&format!("op raise{e} : 0\n"));
    }
    s
}

/// Look up a built-in theory by its command-line name.
pub fn builtin(name: &str) -> Result<Theory, TheoryError> {
    let (text, oracle) = match name {
        "magma" => (MAGMA.to_string(), Some(Carrier::Magma)),
        "monoid" => (MONOID.to_string(), Some(Carrier::Monoid)),
        "cmonoid" => (CMONOID.to_string(), Some(Carrier::CommMonoid)),
        "semilattice" => (SEMILATTICE.to_string(), Some(Carrier::Semilattice)),
        "convex" => (CONVEX.to_string(), Some(Carrier::Convex)),
        "idem-bang" => (IDEM_BANG.to_string(), None),
        "exceptions" => (exceptions_text(2), Some(Carrier::Exceptions(2))),
        other => {
            let n = other
                .strip_prefix("exceptions(E=")
                .and_then(|r| r.strip_suffix(')'))
                .and_then(|n| n.parse::<usize>().ok())
                .ok_or_else(|| TheoryError::UnknownTheory(other.to_string()))?;
            (exceptions_text(n), Some(Carrier::Exceptions(n)))
        }
    };
    let mut th = parse_theory(&text)?;
    th.oracle = oracle;
    Ok(th)
}
