//! Impossibility results, replayed as explicit derivations.
//!
//! Each refutation is a [`ContradictionTrace`]: two rewrite chains from a
//! common start term, built from equations a hypothetical distributive law
//! would have to satisfy, ending in terms that cannot be equal. Traces are
//! checked by [`ContradictionTrace::verify`], which re-applies every rule.
//!
//! The guarded no-go for clocked delay is not mechanized here; the powerset
//! and distribution refutations are its coinductive counterparts.

use std::collections::BTreeMap;
use std::fmt;
use std::rc::Rc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::delay::{join, now as dnow, step as dstep, Delay, Verdict};
use crate::freemodel::{atoms, builtin_model, Atom, ModelElement};
use crate::laws::{run_suite, AxiomEntry, AxiomName, LawReport, TestUniverse, Witness};
use crate::lifting::{custom_candidate, induced_candidate, CustomLaw, DistLawCandidate, LiftMode};

pub type Weight = BigRational;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Term {
    Var(Rc<str>),
    Now(Box<Term>),
    Step(Box<Term>),
    Empty,
    Union(Box<Term>, Box<Term>),
    Mix(Weight, Box<Term>, Box<Term>),
    Op1(Box<Term>, Box<Term>),
    OpPrime(Box<Term>, Box<Term>),
}

pub fn var(name: &str) -> Term {
    Term::Var(name.into())
}
pub fn now(t: Term) -> Term {
    Term::Now(Box::new(t))
}
pub fn step(t: Term) -> Term {
    Term::Step(Box::new(t))
}
pub fn union(a: Term, b: Term) -> Term {
    Term::Union(Box::new(a), Box::new(b))
}
pub fn mix(q: Weight, a: Term, b: Term) -> Term {
    Term::Mix(q, Box::new(a), Box::new(b))
}
pub fn op1(a: Term, b: Term) -> Term {
    Term::Op1(Box::new(a), Box::new(b))
}
pub fn op_prime(a: Term, b: Term) -> Term {
    Term::OpPrime(Box::new(a), Box::new(b))
}

impl Term {
    fn children(&self) -> Vec<&Term> {
        match self {
            Term::Var(_) | Term::Empty => vec![],
            Term::Now(t) | Term::Step(t) => vec![t],
            Term::Union(a, b) | Term::Mix(_, a, b) | Term::Op1(a, b) | Term::OpPrime(a, b) => vec![a, b],
        }
    }

    fn children_mut(&mut self) -> Vec<&mut Term> {
        match self {
            Term::Var(_) | Term::Empty => vec![],
            Term::Now(t) | Term::Step(t) => vec![t],
            Term::Union(a, b) | Term::Mix(_, a, b) | Term::Op1(a, b) | Term::OpPrime(a, b) => vec![a, b],
        }
    }

    pub fn at(&self, path: &[usize]) -> Option<&Term> {
        match path.split_first() {
            None => Some(self),
            Some((i, rest)) => self.children().get(*i)?.at(rest),
        }
    }

    fn replace_at(&self, path: &[usize], new: Term) -> Option<Term> {
        let mut out = self.clone();
        let mut cur = &mut out;
        for i in path {
            cur = cur.children_mut().into_iter().nth(*i)?;
        }
        *cur = new;
        Some(out)
    }

    fn same_head(&self, other: &Term) -> bool {
        match (self, other) {
            (Term::Mix(p, ..), Term::Mix(q, ..)) => p == q,
            _ => std::mem::discriminant(self) == std::mem::discriminant(other),
        }
    }

    fn steps_over(&self) -> (usize, &Term) {
        match self {
            Term::Step(t) => {
                let (k, base) = t.steps_over();
                (k + 1, base)
            }
            t => (0, t),
        }
    }

    fn is_set_term(&self) -> bool {
        match self {
            Term::Var(_) | Term::Empty => true,
            Term::Union(a, b) => a.is_set_term() && b.is_set_term(),
            _ => false,
        }
    }

    fn vars(&self, out: &mut Vec<Rc<str>>) {
        if let Term::Var(v) = self {
            if !out.contains(v) {
                out.push(v.clone());
            }
        }
        for c in self.children() {
            c.vars(out);
        }
    }
}

fn fmt_weight(q: &Weight) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = |t: &Term, f: &mut fmt::Formatter<'_>| match t {
            Term::Union(..) => write!(f, "({t})"),
            _ => write!(f, "{t}"),
        };
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Now(t) => write!(f, "now({t})"),
            Term::Step(t) => write!(f, "step({t})"),
            Term::Empty => write!(f, "∅"),
            Term::Union(a, b) => {
                side(a, f)?;
                write!(f, " ∪ ")?;
                side(b, f)
            }
            Term::Mix(q, a, b) => write!(f, "⊕_{{{}}}({a}, {b})", fmt_weight(q)),
            Term::Op1(a, b) => write!(f, "∨₁({a}, {b})"),
            Term::OpPrime(a, b) => write!(f, "∨′({a}, {b})"),
        }
    }
}

/// An oriented equation whose variables are pattern variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub lhs: Term,
    pub rhs: Term,
}

fn matches(pat: &Term, t: &Term, binds: &mut BTreeMap<Rc<str>, Term>) -> bool {
    if let Term::Var(v) = pat {
        return match binds.get(v) {
            Some(bound) => bound == t,
            None => {
                binds.insert(v.clone(), t.clone());
                true
            }
        };
    }
    if !pat.same_head(t) {
        return false;
    }
    pat.children().iter().zip(t.children()).all(|(p, c)| matches(p, c, binds))
}

fn instantiate(pat: &Term, binds: &BTreeMap<Rc<str>, Term>) -> Option<Term> {
    Some(match pat {
        Term::Var(v) => binds.get(v)?.clone(),
        Term::Empty => Term::Empty,
        Term::Now(t) => now(instantiate(t, binds)?),
        Term::Step(t) => step(instantiate(t, binds)?),
        Term::Union(a, b) => union(instantiate(a, binds)?, instantiate(b, binds)?),
        Term::Mix(q, a, b) => mix(q.clone(), instantiate(a, binds)?, instantiate(b, binds)?),
        Term::Op1(a, b) => op1(instantiate(a, binds)?, instantiate(b, binds)?),
        Term::OpPrime(a, b) => op_prime(instantiate(a, binds)?, instantiate(b, binds)?),
    })
}

impl Rule {
    /// Rewrite the subterm at `path`, left to right or right to left.
    pub fn apply(&self, t: &Term, path: &[usize], backwards: bool) -> Option<Term> {
        let (from, to) = if backwards { (&self.rhs, &self.lhs) } else { (&self.lhs, &self.rhs) };
        let mut binds = BTreeMap::new();
        if !matches(from, t.at(path)?, &mut binds) {
            return None;
        }
        t.replace_at(path, instantiate(to, &binds)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Eq1,
    Eq2,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Branch::Eq1 => write!(f, "Eq1"),
            Branch::Eq2 => write!(f, "Eq2"),
        }
    }
}

/// Which hypothetical law a trace argues against.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Setting {
    Powerset { op1: Term, op_prime: Term, branch: Branch },
    Distributions { p: Weight, branch: Branch },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RuleKind {
    UnionIdem,
    UnionComm,
    NowUnion,
    NowEmpty,
    Op1Def,
    OpPrimeDef,
    Op1Idem,
    Op1Comm,
    BranchFirst,
    BranchSecond,
    MixComm(Weight),
    MixAssoc(Weight, Weight),
    MixAbsorb(Weight, Weight),
    MixNow(Weight),
    Lemma(usize),
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleKind::UnionIdem => write!(f, "∪-idem"),
            RuleKind::UnionComm => write!(f, "∪-comm"),
            RuleKind::NowUnion => write!(f, "now-hom ∪"),
            RuleKind::NowEmpty => write!(f, "now-hom ∅"),
            RuleKind::Op1Def => write!(f, "def ∨₁"),
            RuleKind::OpPrimeDef => write!(f, "def ∨′"),
            RuleKind::Op1Idem => write!(f, "∨₁-idem"),
            RuleKind::Op1Comm => write!(f, "∨₁-comm"),
            RuleKind::BranchFirst => write!(f, "branch-1"),
            RuleKind::BranchSecond => write!(f, "branch-2"),
            RuleKind::MixComm(q) => write!(f, "comm {}", fmt_weight(q)),
            RuleKind::MixAssoc(a, c) => write!(f, "assoc {},{}", fmt_weight(a), fmt_weight(c)),
            RuleKind::MixAbsorb(b, c) => write!(f, "absorb {},{}", fmt_weight(b), fmt_weight(c)),
            RuleKind::MixNow(q) => write!(f, "now-hom ⊕ {}", fmt_weight(q)),
            RuleKind::Lemma(i) => write!(f, "lemma {}", i + 1),
        }
    }
}

fn half() -> Weight {
    Weight::new(BigInt::from(1), BigInt::from(2))
}

fn proper(q: &Weight) -> bool {
    q > &Weight::zero() && q < &Weight::one()
}

impl Setting {
    /// The equation a rule name stands for in this setting, if it is allowed.
    pub fn rule(&self, kind: &RuleKind, lemmas: &[Rule]) -> Option<Rule> {
        let (x, y) = (var("x"), var("y"));
        let r = |lhs, rhs| Some(Rule { lhs, rhs });
        if let RuleKind::Lemma(i) = kind {
            return lemmas.get(*i).cloned();
        }
        match self {
            Setting::Powerset { op1: c1, op_prime: c2, branch } => match kind {
                RuleKind::UnionIdem => r(union(x.clone(), x.clone()), x),
                RuleKind::UnionComm => r(union(x.clone(), y.clone()), union(y, x)),
                RuleKind::NowUnion => r(union(now(x.clone()), now(y.clone())), now(union(x, y))),
                RuleKind::NowEmpty => r(Term::Empty, now(Term::Empty)),
                RuleKind::Op1Def => r(op1(x, y), c1.clone()),
                RuleKind::OpPrimeDef => r(op_prime(x, y), c2.clone()),
                RuleKind::Op1Idem => r(op1(x.clone(), x.clone()), x),
                RuleKind::Op1Comm => r(op1(x.clone(), y.clone()), op1(y, x)),
                RuleKind::BranchFirst => match branch {
                    Branch::Eq1 => r(union(step(x.clone()), y.clone()), step(op_prime(x, y))),
                    Branch::Eq2 => r(union(step(x.clone()), y.clone()), op_prime(x, y)),
                },
                RuleKind::BranchSecond => match branch {
                    Branch::Eq1 => r(op_prime(x.clone(), step(y.clone())), op1(x, y)),
                    Branch::Eq2 => r(op_prime(x.clone(), step(y.clone())), step(op1(x, y))),
                },
                _ => None,
            },
            Setting::Distributions { p, branch } => match kind {
                RuleKind::MixComm(q) if proper(q) => r(
                    mix(q.clone(), x.clone(), y.clone()),
                    mix(Weight::one() - q, y, x),
                ),
                RuleKind::MixAssoc(a, c) if proper(a) && proper(c) => r(
                    mix(a.clone(), mix(c.clone(), x.clone(), y.clone()), y.clone()),
                    mix(a * c, x, y),
                ),
                RuleKind::MixAbsorb(b, c) if proper(b) && proper(c) => r(
                    mix(b.clone(), x.clone(), mix(c.clone(), x.clone(), y.clone())),
                    mix(b + (Weight::one() - b) * c, x, y),
                ),
                RuleKind::MixNow(q) if proper(q) => r(
                    mix(q.clone(), now(x.clone()), now(y.clone())),
                    now(mix(q.clone(), x, y)),
                ),
                RuleKind::BranchFirst => {
                    let lhs = mix(half(), step(x.clone()), y.clone());
                    match branch {
                        Branch::Eq1 => r(lhs, step(mix(p.clone(), x, y))),
                        Branch::Eq2 => r(lhs, mix(p.clone(), x, y)),
                    }
                }
                RuleKind::BranchSecond => {
                    let lhs = mix(p.clone(), x.clone(), step(y.clone()));
                    match branch {
                        Branch::Eq1 => r(lhs, mix(half(), x, y)),
                        Branch::Eq2 => r(lhs, step(mix(half(), x, y))),
                    }
                }
                _ => None,
            },
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Setting::Powerset { op1, op_prime, branch } => {
                write!(f, "powerset: ∨₁(x, y) = {op1}, ∨′(x, y) = {op_prime}, {branch}")
            }
            Setting::Distributions { p, branch } => {
                write!(f, "distributions: ∨₁ = ⊕_{{1/2}}, ∨′ = ⊕_{{{}}}, {branch}", fmt_weight(p))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RewriteStep {
    pub before: Term,
    pub rule: RuleKind,
    pub backwards: bool,
    pub path: Vec<usize>,
    pub after: Term,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chain {
    pub start: Term,
    pub steps: Vec<RewriteStep>,
}

impl Chain {
    pub fn end(&self) -> &Term {
        self.steps.last().map_or(&self.start, |s| &s.after)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Clash {
    /// A `now` and a `step` were identified.
    StepEqNow { lhs: Term, rhs: Term },
    /// A variable was identified with a strictly more delayed copy of itself.
    StepEqDoubleStep { var: Rc<str>, lhs_steps: usize, rhs_steps: usize },
    /// An equation between set terms fails in the four-element diamond.
    ModelRefutation {
        lhs: Term,
        rhs: Term,
        valuation: Vec<(Rc<str>, u8)>,
        values: (u8, u8),
    },
}

impl Clash {
    pub fn kind(&self) -> &'static str {
        match self {
            Clash::StepEqNow { .. } => "StepEqNow",
            Clash::StepEqDoubleStep { .. } => "StepEqDoubleStep",
            Clash::ModelRefutation { .. } => "ModelRefutation",
        }
    }
}

fn steps_prefix(k: usize) -> String {
    match k {
        0 => String::new(),
        1 => "step".into(),
        k => {
            const SUP: [char; 10] = ['⁰', '¹', '²', '³', '⁴', '⁵', '⁶', '⁷', '⁸', '⁹'];
            let digits: String = k.to_string().chars().map(|c| SUP[c.to_digit(10).unwrap() as usize]).collect();
            format!("step{digits}")
        }
    }
}

impl fmt::Display for Clash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Clash::StepEqNow { lhs, rhs } => write!(f, "{} = {}  (now and step are distinct)", lhs, rhs),
            Clash::StepEqDoubleStep { var, lhs_steps, rhs_steps } => {
                let side = |k| {
                    if k == 0 {
                        var.to_string()
                    } else {
                        format!("{}({var})", steps_prefix(k))
                    }
                };
                write!(f, "{} = {}", side(*lhs_steps), side(*rhs_steps))
            }
            Clash::ModelRefutation { lhs, rhs, valuation, values } => {
                let val: Vec<String> = valuation.iter().map(|(v, e)| format!("{v}={e}")).collect();
                write!(
                    f,
                    "{lhs} = {rhs} fails in the diamond at {}: {} ≠ {}",
                    val.join(", "),
                    values.0,
                    values.1
                )
            }
        }
    }
}

/// The four-element lattice with 1 and 2 incomparable.
pub const DIAMOND: [[u8; 4]; 4] = [[0, 1, 2, 3], [1, 1, 3, 3], [2, 3, 2, 3], [3, 3, 3, 3]];

fn diamond_eval(t: &Term, val: &BTreeMap<Rc<str>, u8>) -> u8 {
    match t {
        Term::Var(v) => val[v],
        Term::Empty => 0,
        Term::Union(a, b) => DIAMOND[diamond_eval(a, val) as usize][diamond_eval(b, val) as usize],
        _ => unreachable!("not a set term"),
    }
}

fn diamond_refutation(lhs: &Term, rhs: &Term) -> Option<Clash> {
    let mut vars = Vec::new();
    lhs.vars(&mut vars);
    rhs.vars(&mut vars);
    const ORDER: [u8; 4] = [1, 2, 3, 0];
    let total = 4usize.pow(vars.len() as u32);
    for code in 0..total {
        let mut c = code;
        let mut val = BTreeMap::new();
        for v in vars.iter().rev() {
            val.insert(v.clone(), ORDER[c % 4]);
            c /= 4;
        }
        let (l, r) = (diamond_eval(lhs, &val), diamond_eval(rhs, &val));
        if l != r {
            return Some(Clash::ModelRefutation {
                lhs: lhs.clone(),
                rhs: rhs.clone(),
                valuation: vars.iter().map(|v| (v.clone(), val[v])).collect(),
                values: (l, r),
            });
        }
    }
    None
}

/// Decide whether `lhs = rhs` is absurd, peeling matching `now`s and `step`s.
pub fn detect_clash(lhs: &Term, rhs: &Term) -> Option<Clash> {
    let (mut a, mut b) = (lhs, rhs);
    loop {
        match (a, b) {
            (Term::Now(x), Term::Now(y)) | (Term::Step(x), Term::Step(y)) => {
                a = x;
                b = y;
            }
            (Term::Now(_), Term::Step(_)) | (Term::Step(_), Term::Now(_)) => {
                return Some(Clash::StepEqNow {
                    lhs: a.clone(),
                    rhs: b.clone(),
                })
            }
            _ => break,
        }
    }
    let (ka, base_a) = lhs.steps_over();
    let (kb, base_b) = rhs.steps_over();
    if let (Term::Var(v), Term::Var(w)) = (base_a, base_b) {
        if v == w && ka != kb {
            return Some(Clash::StepEqDoubleStep {
                var: v.clone(),
                lhs_steps: ka,
                rhs_steps: kb,
            });
        }
    }
    if a.is_set_term() && b.is_set_term() {
        return diamond_refutation(a, b);
    }
    None
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lemma {
    pub name: String,
    pub chain: Chain,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContradictionTrace {
    pub setting: Setting,
    pub notes: Vec<String>,
    pub lemmas: Vec<Lemma>,
    pub left: Chain,
    pub right: Chain,
    pub clash: Clash,
}

impl ContradictionTrace {
    /// Re-apply every step and re-derive the clash.
    pub fn verify(&self) -> Result<(), String> {
        let mut proven: Vec<Rule> = Vec::new();
        let check = |chain: &Chain, proven: &[Rule], label: &str| -> Result<(), String> {
            let mut cur = chain.start.clone();
            for (i, s) in chain.steps.iter().enumerate() {
                if s.before != cur {
                    return Err(format!("{label} step {}: chain is not contiguous", i + 1));
                }
                let rule = self
                    .setting
                    .rule(&s.rule, proven)
                    .ok_or_else(|| format!("{label} step {}: rule {} is not available", i + 1, s.rule))?;
                let after = rule
                    .apply(&cur, &s.path, s.backwards)
                    .ok_or_else(|| format!("{label} step {}: rule {} does not apply", i + 1, s.rule))?;
                if after != s.after {
                    return Err(format!("{label} step {}: result differs", i + 1));
                }
                cur = after;
            }
            Ok(())
        };
        for lemma in &self.lemmas {
            check(&lemma.chain, &proven, &lemma.name)?;
            proven.push(Rule {
                lhs: lemma.chain.start.clone(),
                rhs: lemma.chain.end().clone(),
            });
        }
        if self.left.start != self.right.start {
            return Err("the two chains start from different terms".into());
        }
        check(&self.left, &proven, "left")?;
        check(&self.right, &proven, "right")?;
        match detect_clash(self.left.end(), self.right.end()) {
            Some(c) if c == self.clash => Ok(()),
            Some(_) => Err("recorded clash differs from the derived one".into()),
            None => Err("the chain ends are not contradictory".into()),
        }
    }

    pub fn step_count(&self) -> usize {
        self.lemmas.iter().map(|l| l.chain.steps.len()).sum::<usize>() + self.left.steps.len() + self.right.steps.len()
    }
}

impl fmt::Display for ContradictionTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# {}", self.setting)?;
        for n in &self.notes {
            writeln!(f, "# {n}")?;
        }
        let mut line = 0;
        let mut chain = |f: &mut fmt::Formatter<'_>, c: &Chain| -> fmt::Result {
            if c.steps.is_empty() {
                line += 1;
                writeln!(f, "{line:>3}. {}", c.start)?;
            }
            for s in &c.steps {
                line += 1;
                let inv = if s.backwards { "⁻¹" } else { "" };
                writeln!(f, "{line:>3}. {}  --[{}{inv}]-->  {}", s.before, s.rule, s.after)?;
            }
            Ok(())
        };
        for (i, l) in self.lemmas.iter().enumerate() {
            writeln!(f, "lemma {} ({}): {} = {}", i + 1, l.name, l.chain.start, l.chain.end())?;
            chain(f, &l.chain)?;
        }
        writeln!(f, "left:")?;
        chain(f, &self.left)?;
        writeln!(f, "right:")?;
        chain(f, &self.right)?;
        write!(f, "CLASH: {}: {}", self.clash.kind(), self.clash)
    }
}

struct Deriver {
    setting: Setting,
    lemmas: Vec<Lemma>,
    rules: Vec<Rule>,
}

impl Deriver {
    fn new(setting: Setting) -> Self {
        Deriver {
            setting,
            lemmas: Vec::new(),
            rules: Vec::new(),
        }
    }

    fn chain(&self, start: Term, moves: Vec<(RuleKind, bool, Vec<usize>)>) -> Chain {
        let mut cur = start.clone();
        let mut steps = Vec::new();
        for (rule, backwards, path) in moves {
            let r = self.setting.rule(&rule, &self.rules).expect("rule available");
            let after = r
                .apply(&cur, &path, backwards)
                .unwrap_or_else(|| panic!("{rule} does not apply to {cur} at {path:?}"));
            steps.push(RewriteStep {
                before: cur,
                rule,
                backwards,
                path,
                after: after.clone(),
            });
            cur = after;
        }
        Chain { start, steps }
    }

    fn lemma(&mut self, name: &str, start: Term, moves: Vec<(RuleKind, bool, Vec<usize>)>) -> usize {
        let chain = self.chain(start, moves);
        self.rules.push(Rule {
            lhs: chain.start.clone(),
            rhs: chain.end().clone(),
        });
        self.lemmas.push(Lemma { name: name.into(), chain });
        self.lemmas.len() - 1
    }

    fn finish(self, notes: Vec<String>, left: Chain, right: Chain) -> ContradictionTrace {
        let clash = detect_clash(left.end(), right.end()).expect("derivation ends in a clash");
        ContradictionTrace {
            setting: self.setting,
            notes,
            lemmas: self.lemmas,
            left,
            right,
            clash,
        }
    }
}

fn fwd(rule: RuleKind, path: &[usize]) -> (RuleKind, bool, Vec<usize>) {
    (rule, false, path.to_vec())
}

fn bwd(rule: RuleKind, path: &[usize]) -> (RuleKind, bool, Vec<usize>) {
    (rule, true, path.to_vec())
}

/// The elements of the free semilattice on `{x, y}`, as candidate operations.
pub fn semilattice_candidates() -> Vec<Term> {
    let fm = builtin_model("semilattice").expect("built-in theory");
    fm.enumerate_elements(&['x', 'y'], 2)
        .into_iter()
        .map(|m| match m {
            ModelElement::FinSet(xs) => xs
                .iter()
                .map(|c| var(&c.to_string()))
                .reduce(union)
                .unwrap_or(Term::Empty),
            other => unreachable!("semilattice elements are finite sets, got {other}"),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidateConfig {
    pub op1: Term,
    pub op_prime: Term,
    pub branch: Branch,
}

/// Refute one choice of `∨₁`, `∨′` and branch for a law `P_f D → D P_f`.
pub fn refute_powerset_candidate(cfg: &CandidateConfig) -> ContradictionTrace {
    let setting = Setting::Powerset {
        op1: cfg.op1.clone(),
        op_prime: cfg.op_prime.clone(),
        branch: cfg.branch,
    };
    let mut d = Deriver::new(setting);
    let (x, y) = (var("x"), var("y"));
    let xy = union(x.clone(), y.clone());
    use RuleKind::*;

    if cfg.op1 != xy {
        let idempotent = cfg.op1 != Term::Empty;
        if !idempotent {
            let start = op1(x.clone(), x.clone());
            let left = d.chain(start.clone(), vec![fwd(Op1Idem, &[])]);
            let right = d.chain(start, vec![fwd(Op1Def, &[])]);
            return d.finish(vec!["∨₁ must be idempotent".into()], left, right);
        }
        let start = op1(x.clone(), y.clone());
        let left = d.chain(start.clone(), vec![fwd(Op1Def, &[])]);
        let right = d.chain(start, vec![fwd(Op1Comm, &[]), fwd(Op1Def, &[])]);
        return d.finish(vec!["∨₁ must be commutative".into()], left, right);
    }

    if cfg.op_prime != xy {
        let start = op_prime(now(x.clone()), step(now(y.clone())));
        let mut left = vec![fwd(OpPrimeDef, &[])];
        if cfg.op_prime == Term::Empty {
            left.push(fwd(NowEmpty, &[]));
        }
        let right = match cfg.branch {
            Branch::Eq1 => vec![fwd(BranchSecond, &[]), fwd(Op1Def, &[]), fwd(NowUnion, &[])],
            Branch::Eq2 => vec![fwd(BranchSecond, &[]), fwd(Op1Def, &[0]), fwd(NowUnion, &[0])],
        };
        let left = d.chain(start.clone(), left);
        let right = d.chain(start, right);
        return d.finish(vec!["∨₁ = ∪; case analysis on ∨′(now x, step(now y))".into()], left, right);
    }

    let lemma_moves = match cfg.branch {
        Branch::Eq1 => vec![fwd(BranchFirst, &[]), fwd(OpPrimeDef, &[0])],
        Branch::Eq2 => vec![
            fwd(UnionComm, &[]),
            bwd(OpPrimeDef, &[]),
            fwd(BranchSecond, &[]),
            fwd(Op1Def, &[0]),
            fwd(UnionComm, &[0]),
        ],
    };
    let l = d.lemma("step on the left", union(step(x.clone()), y), lemma_moves);
    let start = step(x);
    let left = d.chain(start.clone(), vec![]);
    let right = d.chain(
        start,
        vec![
            bwd(UnionIdem, &[]),
            fwd(Lemma(l), &[]),
            fwd(UnionComm, &[0]),
            fwd(Lemma(l), &[0]),
            fwd(UnionIdem, &[0, 0]),
        ],
    );
    d.finish(vec!["∨₁ = ∨′ = ∪".into()], left, right)
}

/// All 32 candidate configurations, each with its refutation.
pub fn powerset_nogo_search() -> Vec<(CandidateConfig, ContradictionTrace)> {
    let cands = semilattice_candidates();
    let mut out = Vec::new();
    for op1 in &cands {
        for op_prime in &cands {
            for branch in [Branch::Eq1, Branch::Eq2] {
                let cfg = CandidateConfig {
                    op1: op1.clone(),
                    op_prime: op_prime.clone(),
                    branch,
                };
                let trace = refute_powerset_candidate(&cfg);
                out.push((cfg, trace));
            }
        }
    }
    out
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum NoGoError {
    #[error("p must lie strictly between 0 and 1, got {0}")]
    OutOfRange(String),
}

/// Least `n ≥ 1` with `base^n ≤ bound`.
pub fn least_power_below(base: &Weight, bound: &Weight) -> u32 {
    let mut n = 1;
    let mut pow = base.clone();
    while &pow > bound {
        pow *= base;
        n += 1;
    }
    n
}

fn pow(q: &Weight, n: u32) -> Weight {
    (0..n).fold(Weight::one(), |acc, _| acc * q)
}

#[derive(Clone, Debug)]
pub struct DistributionsNoGo {
    pub p: Weight,
    /// Least `n` with `(1/2)^n ≤ 1 − p`.
    pub n: u32,
    /// Weight of the remainder `z` in the first branch.
    pub z_weight: Weight,
    /// Least `m` with `(1 − p)^m ≤ 1/2`, used by the second branch.
    pub m: u32,
    pub first: ContradictionTrace,
    pub second: ContradictionTrace,
}

impl fmt::Display for DistributionsNoGo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "p = {}, N = {}, z weight = {}", fmt_weight(&self.p), self.n, fmt_weight(&self.z_weight))?;
        writeln!(f, "{}", self.first)?;
        write!(f, "{}", self.second)
    }
}

/// Rewrite `⊕_q(u, v)` as `⊕_b(u, ⊕_w(u, v))` and return the remainder weight.
fn split_moves(q: &Weight, b: &Weight) -> (Weight, Vec<(RuleKind, bool, Vec<usize>)>) {
    if q == b {
        return (Weight::zero(), vec![]);
    }
    let w = (q - b) / (Weight::one() - b);
    (w.clone(), vec![bwd(RuleKind::MixAbsorb(b.clone(), w), &[])])
}

/// Replay the refutation of a law `D_f D → D D_f` whose `∨′` is `⊕_p`.
pub fn distributions_nogo_replay(p: &Weight) -> Result<DistributionsNoGo, NoGoError> {
    if !proper(p) {
        return Err(NoGoError::OutOfRange(fmt_weight(p)));
    }
    use RuleKind::*;
    let one = Weight::one();
    let q = &one - p;
    let (x, y) = (var("x"), var("y"));
    let (xp, zp) = (var("x'"), var("z'"));
    let forced = "∨₁ = ⊕_{1/2}: in [0,1], ⊕_{p₁}(1, 0) = ⊕_{p₁}(0, 1) forces p₁ = 1 − p₁".to_string();

    let n = least_power_below(&half(), &q);
    let mut d = Deriver::new(Setting::Distributions {
        p: p.clone(),
        branch: Branch::Eq1,
    });
    d.lemma(
        "n = 1",
        mix(half(), step(xp.clone()), zp.clone()),
        vec![fwd(BranchFirst, &[])],
    );
    for k in 1..n {
        let hk = pow(&half(), k);
        d.lemma(
            &format!("n = {}", k + 1),
            mix(pow(&half(), k + 1), step(xp.clone()), zp.clone()),
            vec![
                bwd(MixAssoc(hk, half()), &[]),
                fwd(BranchFirst, &[0]),
                fwd(Lemma(k as usize - 1), &[]),
                fwd(MixAssoc(pow(p, k), p.clone()), &[0]),
            ],
        );
    }
    let start = mix(q.clone(), step(now(x.clone())), now(y.clone()));
    let left = d.chain(
        start.clone(),
        vec![fwd(MixComm(q.clone()), &[]), fwd(BranchSecond, &[]), fwd(MixNow(half()), &[])],
    );
    let (z_weight, mut moves) = split_moves(&q, &pow(&half(), n));
    moves.push(fwd(Lemma(n as usize - 1), &[]));
    let right = d.chain(start, moves);
    let first = d.finish(
        vec![forced.clone(), format!("N = {n}, z weight = {}", fmt_weight(&z_weight))],
        left,
        right,
    );

    let m = least_power_below(&q, &half());
    let mut d = Deriver::new(Setting::Distributions {
        p: p.clone(),
        branch: Branch::Eq2,
    });
    d.lemma(
        "n = 1",
        mix(q.clone(), step(xp.clone()), zp.clone()),
        vec![fwd(MixComm(q.clone()), &[]), fwd(BranchSecond, &[]), fwd(MixComm(half()), &[0])],
    );
    for k in 1..m {
        d.lemma(
            &format!("n = {}", k + 1),
            mix(pow(&q, k + 1), step(xp.clone()), zp.clone()),
            vec![
                bwd(MixAssoc(pow(&q, k), q.clone()), &[]),
                fwd(Lemma(0), &[0]),
                fwd(Lemma(k as usize - 1), &[]),
                fwd(MixAssoc(pow(&half(), k), half()), &[0]),
            ],
        );
    }
    let start = mix(half(), step(now(x)), now(y));
    let left = d.chain(start.clone(), vec![fwd(BranchFirst, &[]), fwd(MixNow(p.clone()), &[])]);
    let (w2, mut moves) = split_moves(&half(), &pow(&q, m));
    moves.push(fwd(Lemma(m as usize - 1), &[]));
    let right = d.chain(start, moves);
    let second = d.finish(
        vec![forced, format!("M = {m}, z weight = {}", fmt_weight(&w2))],
        left,
        right,
    );
    Ok(DistributionsNoGo {
        p: p.clone(),
        n,
        z_weight,
        m,
        first,
        second,
    })
}

/// Both sides of the second multiplication axiom on one input.
#[derive(Clone, Debug)]
pub struct MultTWitness {
    pub law: String,
    pub input: String,
    pub lhs: Delay<ModelElement<Atom>>,
    pub rhs: Delay<ModelElement<Atom>>,
    pub strict: Verdict,
    pub weak: Verdict,
}

impl MultTWitness {
    pub fn entry(&self) -> AxiomEntry {
        AxiomEntry {
            name: AxiomName::MultT,
            verdict: self.strict,
            cases: 1,
            failures: u64::from(self.strict.is_no()),
            unknowns: 0,
            predicted: true,
            witness: Some(Witness {
                case: 0,
                input: self.input.clone(),
                lhs: self.lhs.to_string(),
                rhs: self.rhs.to_string(),
            }),
            equations: Vec::new(),
        }
    }
}

impl fmt::Display for MultTWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "law    {}", self.law)?;
        writeln!(f, "input  {}", self.input)?;
        writeln!(f, "ζ ∘ T μ           {}", self.lhs)?;
        writeln!(f, "μ ∘ D ζ ∘ ζ       {}", self.rhs)?;
        writeln!(f, "strict equality   {}", self.strict)?;
        write!(f, "weak bisimilarity {}", self.weak)
    }
}

/// Evaluate `∗(now(step(now a)), step(now(now b)))` through both sides of
/// the second multiplication axiom.
pub fn mult_t_witness(cand: &DistLawCandidate) -> MultTWitness {
    let fm = &cand.model;
    let op = fm.ops().find(|(_, a)| *a == 2).map(|(o, _)| o.to_string()).expect("binary operation");
    let ab = atoms(2);
    let t = fm.apply(
        &op,
        vec![
            fm.unit(dnow(dstep(dnow(ab[0])))),
            fm.unit(dstep(dnow(dnow(ab[1])))),
        ],
    );
    let lhs = cand.apply(&fm.map(&t, join));
    let rhs = join(&cand.apply(&t).map(|x| cand.apply(x)));
    let u = TestUniverse::default();
    let strict = crate::laws::compare(fm, &u, &lhs, &rhs);
    let weak = crate::laws::compare(fm, &u.with_relation(crate::laws::Relation::WeakBisim), &lhs, &rhs);
    MultTWitness {
        law: cand.name(),
        input: t.to_string(),
        lhs,
        rhs,
        strict,
        weak,
    }
}

/// Parallel lifting for the magma fails the second multiplication axiom.
pub fn parallel_magma_witness() -> MultTWitness {
    let fm = Rc::new(builtin_model("magma").expect("built-in theory"));
    mult_t_witness(&induced_candidate(fm, LiftMode::Parallel))
}

/// The law for one idempotent binary and one unary operation.
pub fn idempotent_unary_candidate() -> DistLawCandidate {
    let fm = Rc::new(builtin_model("idem-bang").expect("built-in theory"));
    custom_candidate(fm, CustomLaw::Bang)
}

pub fn idempotent_unary_demo(u: &TestUniverse) -> Result<LawReport, crate::laws::LawError> {
    run_suite(&idempotent_unary_candidate(), u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(n: i64, d: i64) -> Weight {
        Weight::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn candidates_are_the_four_set_terms() {
        let shown: Vec<String> = semilattice_candidates().iter().map(|t| t.to_string()).collect();
        assert_eq!(shown.len(), 4);
        for s in ["∅", "x", "y", "x ∪ y"] {
            assert!(shown.contains(&s.to_string()), "{shown:?}");
        }
    }

    #[test]
    fn rewriting_binds_pattern_variables() {
        let r = Rule {
            lhs: union(var("x"), var("x")),
            rhs: var("x"),
        };
        let t = step(union(now(var("a")), now(var("a"))));
        assert_eq!(r.apply(&t, &[0], false), Some(step(now(var("a")))));
        assert_eq!(r.apply(&t, &[], false), None);
        assert_eq!(r.apply(&var("b"), &[], true), Some(union(var("b"), var("b"))));
    }

    #[test]
    fn all_powerset_candidates_refuted() {
        let all = powerset_nogo_search();
        assert_eq!(all.len(), 32);
        for (cfg, trace) in &all {
            trace.verify().unwrap_or_else(|e| panic!("{cfg:?}: {e}\n{trace}"));
        }
        let xy = union(var("x"), var("y"));
        let find = |op1: &Term, op_prime: &Term, branch| {
            all.iter()
                .find(|(c, _)| &c.op1 == op1 && &c.op_prime == op_prime && c.branch == branch)
                .map(|(_, t)| t.clone())
                .unwrap()
        };
        let t = find(&xy, &var("y"), Branch::Eq1);
        assert_eq!(
            t.clash,
            Clash::StepEqNow {
                lhs: step(now(var("y"))),
                rhs: now(xy.clone())
            }
        );
        for b in [Branch::Eq1, Branch::Eq2] {
            let t = find(&xy, &xy, b);
            assert_eq!(t.clash.to_string(), "step(x) = step²(x)");
            assert!(t.to_string().ends_with("CLASH: StepEqDoubleStep: step(x) = step²(x)"));
        }
        let t = find(&var("x"), &xy, Branch::Eq1);
        assert!(matches!(t.clash, Clash::ModelRefutation { .. }));
        let t = find(&xy, &var("x"), Branch::Eq1);
        match &t.clash {
            Clash::ModelRefutation { values, valuation, .. } => {
                assert_eq!(*values, (1, 3));
                assert_eq!(valuation, &vec![("x".into(), 1), ("y".into(), 2)]);
            }
            c => panic!("{c:?}"),
        }
    }

    #[test]
    fn tampered_traces_fail_verification() {
        let (_, mut t) = powerset_nogo_search().pop().unwrap();
        t.right.steps[0].after = var("z");
        assert!(t.verify().is_err());
        let mut t = distributions_nogo_replay(&w(1, 3)).unwrap().first;
        t.clash = Clash::StepEqDoubleStep {
            var: "x".into(),
            lhs_steps: 0,
            rhs_steps: 1,
        };
        assert!(t.verify().is_err());
    }

    #[test]
    fn distribution_examples() {
        let r = distributions_nogo_replay(&w(1, 2)).unwrap();
        assert_eq!(r.n, 1);
        assert_eq!(r.first.lemmas.len(), 1);
        let r = distributions_nogo_replay(&w(3, 4)).unwrap();
        assert_eq!(r.n, 2);
        let r = distributions_nogo_replay(&w(1, 3)).unwrap();
        assert_eq!(r.n, 1);
        assert_eq!(r.z_weight, w(1, 3));
        assert!(r.first.to_string().contains("⊕_{1/3}(step(now(x)), now(y))"));
        for t in [&r.first, &r.second] {
            t.verify().unwrap();
            assert_eq!(t.clash.kind(), "StepEqNow");
        }
        assert!(distributions_nogo_replay(&w(0, 1)).is_err());
        assert!(distributions_nogo_replay(&w(1, 1)).is_err());
        assert!(distributions_nogo_replay(&w(5, 4)).is_err());
    }

    /// Independent semantics: a mix-only term as a distribution over variables.
    fn as_distribution(t: &Term) -> BTreeMap<Rc<str>, Weight> {
        match t {
            Term::Var(v) => BTreeMap::from([(v.clone(), Weight::one())]),
            Term::Mix(q, a, b) => {
                let mut out = BTreeMap::new();
                for (v, x) in as_distribution(a) {
                    *out.entry(v).or_insert_with(Weight::zero) += x * q;
                }
                for (v, x) in as_distribution(b) {
                    *out.entry(v).or_insert_with(Weight::zero) += x * (Weight::one() - q);
                }
                out
            }
            _ => panic!("not a mix term"),
        }
    }

    #[test]
    fn convex_rules_are_sound() {
        for p in [w(1, 2), w(1, 3), w(5, 7), w(63, 64), w(1, 64)] {
            let r = distributions_nogo_replay(&p).unwrap();
            for t in [&r.first, &r.second] {
                let lemma_rules: Vec<Rule> = Vec::new();
                for s in t.lemmas.iter().flat_map(|l| &l.chain.steps).chain(&t.left.steps).chain(&t.right.steps) {
                    if matches!(s.rule, RuleKind::MixComm(_) | RuleKind::MixAssoc(..) | RuleKind::MixAbsorb(..)) {
                        let rule = t.setting.rule(&s.rule, &lemma_rules).unwrap();
                        assert_eq!(as_distribution(&rule.lhs), as_distribution(&rule.rhs), "{}", s.rule);
                    }
                }
            }
        }
    }

    #[test]
    fn least_power_matches_float_estimate() {
        for d in 2..=64i64 {
            for n in 1..d {
                let p = w(n, d);
                let q = Weight::one() - &p;
                let big_n = least_power_below(&half(), &q);
                let qf = (d - n) as f64 / d as f64;
                let expected = (-qf.log2()).ceil().max(1.0) as u32;
                assert_eq!(big_n, expected, "p = {n}/{d}");
            }
        }
    }

    #[test]
    fn mv_witness_paths() {
        let wv = parallel_magma_witness();
        assert_eq!(wv.lhs.steps(), Some(1));
        assert_eq!(wv.rhs.steps(), Some(2));
        assert_eq!(wv.lhs.value(), wv.rhs.value());
        assert_eq!(wv.strict, Verdict::No);
        assert_eq!(wv.weak, Verdict::Yes);
        let bang = mult_t_witness(&idempotent_unary_candidate());
        assert_eq!(bang.lhs.steps(), Some(1));
        assert_eq!(bang.rhs.steps(), Some(1));
        assert_eq!(bang.strict, Verdict::Yes);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn distributions_replay_verifies(d in 2i64..=64, n in 1i64..64) {
            prop_assume!(n < d);
            let r = distributions_nogo_replay(&w(n, d)).unwrap();
            prop_assert!(r.first.verify().is_ok());
            prop_assert!(r.second.verify().is_ok());
        }
    }
}
