//! Free-model monads for algebraic theories.
//!
//! Built-in theories get a canonical carrier (trees, lists, multisets,
//! finite sets, dyadic distributions, exceptions); any other theory uses
//! terms normalised by bounded left-to-right rewriting, with equality
//! decided three-valuedly.

use std::cell::OnceCell;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::rc::Rc;

use num_traits::{One, Zero};

use crate::delay::Verdict;
use crate::theory::{Carrier, Term, Theory};

pub type Rational = num_rational::Ratio<i128>;

/// Anything that can sit at the leaves of a free-model element.
pub trait Leaf: Clone + Ord + fmt::Debug + fmt::Display {}
impl<T: Clone + Ord + fmt::Debug + fmt::Display> Leaf for T {}

/// A generator of a small carrier set, printed as `a`, `b`, `c`, ...
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom(pub u8);

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", (b'a' + self.0) as char)
    }
}

pub fn atoms(n: usize) -> Vec<Atom> {
    (0..n as u8).map(Atom).collect()
}

/// A term whose variables are replaced by leaves.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Tree<A> {
    Leaf(A),
    Node(Rc<str>, Vec<Tree<A>>),
}

impl<A> Tree<A> {
    pub fn fold<B>(&self, leaf: &mut impl FnMut(&A) -> B, node: &mut impl FnMut(&str, Vec<B>) -> B) -> B {
        match self {
            Tree::Leaf(a) => leaf(a),
            Tree::Node(op, args) => {
                let vals = args.iter().map(|t| t.fold(leaf, node)).collect();
                node(op, vals)
            }
        }
    }

    pub fn leaves(&self) -> Vec<&A> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a A>) {
        match self {
            Tree::Leaf(a) => out.push(a),
            Tree::Node(_, args) => args.iter().for_each(|t| t.collect_leaves(out)),
        }
    }
}

fn op_symbol(op: &str) -> Option<&'static str> {
    match op {
        "mul" => Some("∗"),
        "union" => Some("∪"),
        "mix" => Some("⊕"),
        _ => None,
    }
}

impl<A: fmt::Display> Tree<A> {
    fn fmt_inner(&self, f: &mut fmt::Formatter<'_>, nested: bool) -> fmt::Result {
        match self {
            Tree::Leaf(a) => write!(f, "{a}"),
            Tree::Node(op, args) if args.is_empty() => write!(f, "{op}"),
            Tree::Node(op, args) => match (op_symbol(op), args.len()) {
                (Some(sym), 2) => {
                    if nested {
                        write!(f, "(")?;
                    }
                    args[0].fmt_inner(f, true)?;
                    write!(f, "{sym}")?;
                    args[1].fmt_inner(f, true)?;
                    if nested {
                        write!(f, ")")?;
                    }
                    Ok(())
                }
                _ => {
                    write!(f, "{op}(")?;
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            write!(f, ",")?;
                        }
                        a.fmt_inner(f, false)?;
                    }
                    write!(f, ")")
                }
            },
        }
    }
}

impl<A: fmt::Display> fmt::Display for Tree<A> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_inner(f, false)
    }
}

/// An element of a free model, in the canonical form of its carrier.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ModelElement<A> {
    /// Magma trees and rewriting-normalised terms of user theories.
    Tree(Tree<A>),
    List(Vec<A>),
    Multiset(Vec<A>),
    FinSet(Vec<A>),
    Dist(Vec<(A, Rational)>),
    Value(A),
    Raise(usize),
}

fn join_display<T>(f: &mut fmt::Formatter<'_>, items: &[T], show: impl Fn(&mut fmt::Formatter<'_>, &T) -> fmt::Result) -> fmt::Result {
    for (i, x) in items.iter().enumerate() {
        if i > 0 {
            write!(f, ",")?;
        }
        show(f, x)?;
    }
    Ok(())
}

impl<A: fmt::Display> fmt::Display for ModelElement<A> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelElement::Tree(t) => write!(f, "{t}"),
            ModelElement::List(xs) => {
                write!(f, "[")?;
                join_display(f, xs, |f, x| write!(f, "{x}"))?;
                write!(f, "]")
            }
            ModelElement::Multiset(xs) => {
                write!(f, "⟦")?;
                join_display(f, xs, |f, x| write!(f, "{x}"))?;
                write!(f, "⟧")
            }
            ModelElement::FinSet(xs) => {
                write!(f, "{{")?;
                join_display(f, xs, |f, x| write!(f, "{x}"))?;
                write!(f, "}}")
            }
            ModelElement::Dist(xs) => {
                write!(f, "{{")?;
                join_display(f, xs, |f, (x, w)| write!(f, "{x}↦{w}"))?;
                write!(f, "}}")
            }
            ModelElement::Value(a) => write!(f, "{a}"),
            ModelElement::Raise(e) => write!(f, "raise{e}"),
        }
    }
}

/// Bound on rewrites performed while normalising one term.
const NORMALISE_BUDGET: usize = 256;
/// Joinability depth for user-theory equality.
pub const JOIN_BOUND: usize = 8;
/// Largest number of operation tables tried when searching finite models.
const MODEL_SEARCH_CAP: usize = 20_000;

#[derive(Clone, Debug)]
struct Rule {
    lhs: Term,
    rhs: Term,
}

/// A finite model of a theory: carrier `0..size`, one table per operation.
#[derive(Clone, Debug)]
pub struct FiniteModel {
    pub size: usize,
    pub tables: BTreeMap<String, Vec<usize>>,
}

impl FiniteModel {
    fn apply(&self, op: &str, args: &[usize]) -> usize {
        let idx = args.iter().fold(0, |acc, &a| acc * self.size + a);
        self.tables[op][idx]
    }

    pub fn eval_term(&self, t: &Term, env: &BTreeMap<String, usize>) -> usize {
        match t {
            Term::Var(v) => env[v],
            Term::App(op, args) => {
                let vals: Vec<_> = args.iter().map(|a| self.eval_term(a, env)).collect();
                self.apply(op, &vals)
            }
        }
    }

    fn eval_tree<A: Ord>(&self, t: &Tree<A>, env: &BTreeMap<&A, usize>) -> usize {
        match t {
            Tree::Leaf(a) => env[a],
            Tree::Node(op, args) => {
                let vals: Vec<_> = args.iter().map(|a| self.eval_tree(a, env)).collect();
                self.apply(op, &vals)
            }
        }
    }

    pub fn satisfies(&self, th: &Theory) -> bool {
        th.equations.iter().all(|eq| {
            let n = eq.context.len();
            (0..self.size.pow(n as u32)).all(|mut code| {
                let mut env = BTreeMap::new();
                for v in &eq.context {
                    env.insert(v.clone(), code % self.size);
                    code /= self.size;
                }
                self.eval_term(&eq.lhs, &env) == self.eval_term(&eq.rhs, &env)
            })
        })
    }
}

/// The free-model monad of a theory.
pub struct FreeModel {
    theory: Theory,
    ops: Vec<(Rc<str>, usize)>,
    rules: Vec<Rule>,
    models: OnceCell<Vec<FiniteModel>>,
}

impl fmt::Debug for FreeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FreeModel({})", self.theory.name())
    }
}

impl FreeModel {
    pub fn new(theory: Theory) -> FreeModel {
        let ops = theory
            .signature
            .ops
            .iter()
            .map(|(n, a)| (Rc::from(n.as_str()), *a))
            .collect();
        let rules = theory
            .equations
            .iter()
            .filter(|eq| matches!(eq.lhs, Term::App(..)) && eq.rhs.vars().is_subset(&eq.lhs.vars()))
            .map(|eq| Rule {
                lhs: eq.lhs.clone(),
                rhs: eq.rhs.clone(),
            })
            .collect();
        FreeModel {
            theory,
            ops,
            rules,
            models: OnceCell::new(),
        }
    }

    pub fn theory(&self) -> &Theory {
        &self.theory
    }

    pub fn carrier(&self) -> Option<Carrier> {
        self.theory.oracle
    }

    pub fn ops(&self) -> impl Iterator<Item = (&str, usize)> {
        self.ops.iter().map(|(n, a)| (&**n, *a))
    }

    fn op_rc(&self, name: &str) -> Rc<str> {
        self.ops
            .iter()
            .find(|(n, _)| &**n == name)
            .map(|(n, _)| Rc::clone(n))
            .unwrap_or_else(|| panic!("unknown operation `{name}` in theory {}", self.theory.name()))
    }

    fn constant(&self) -> Option<Rc<str>> {
        self.ops.iter().find(|(_, a)| *a == 0).map(|(n, _)| Rc::clone(n))
    }

    /// `η`: the class of a generator.
    pub fn unit<A: Leaf>(&self, a: A) -> ModelElement<A> {
        match self.carrier() {
            None | Some(Carrier::Magma) => ModelElement::Tree(Tree::Leaf(a)),
            Some(Carrier::Monoid) => ModelElement::List(vec![a]),
            Some(Carrier::CommMonoid) => ModelElement::Multiset(vec![a]),
            Some(Carrier::Semilattice) => ModelElement::FinSet(vec![a]),
            Some(Carrier::Convex) => ModelElement::Dist(vec![(a, Rational::one())]),
            Some(Carrier::Exceptions(_)) => ModelElement::Value(a),
        }
    }

    /// Interpret one operation in the free model.
    pub fn apply<A: Leaf>(&self, op: &str, args: Vec<ModelElement<A>>) -> ModelElement<A> {
        let arity = self
            .theory
            .arity(op)
            .unwrap_or_else(|| panic!("unknown operation `{op}` in theory {}", self.theory.name()));
        assert_eq!(arity, args.len(), "arity mismatch for `{op}`");
        match self.carrier() {
            None => {
                let trees = args
                    .into_iter()
                    .map(|m| match m {
                        ModelElement::Tree(t) => t,
                        other => panic!("foreign element {other}"),
                    })
                    .collect();
                ModelElement::Tree(self.normalise(Tree::Node(self.op_rc(op), trees)))
            }
            Some(Carrier::Magma) => {
                if arity == 0 {
                    return ModelElement::Tree(Tree::Node(self.op_rc(op), vec![]));
                }
                let unit = self.constant();
                let is_unit = |t: &Tree<A>| matches!(t, Tree::Node(n, a) if a.is_empty() && Some(n) == unit.as_ref());
                let mut it = args.into_iter().map(|m| match m {
                    ModelElement::Tree(t) => t,
                    other => panic!("foreign element {other}"),
                });
                let (l, r) = (it.next().unwrap(), it.next().unwrap());
                ModelElement::Tree(if is_unit(&l) {
                    r
                } else if is_unit(&r) {
                    l
                } else {
                    Tree::Node(self.op_rc(op), vec![l, r])
                })
            }
            Some(Carrier::Monoid) | Some(Carrier::CommMonoid) | Some(Carrier::Semilattice) => {
                let mut items = Vec::new();
                for m in args {
                    match m {
                        ModelElement::List(xs) | ModelElement::Multiset(xs) | ModelElement::FinSet(xs) => {
                            items.extend(xs)
                        }
                        other => panic!("foreign element {other}"),
                    }
                }
                self.collection(items)
            }
            Some(Carrier::Convex) => {
                let half = Rational::new(1, 2);
                let mut acc: BTreeMap<A, Rational> = BTreeMap::new();
                for m in args {
                    let ModelElement::Dist(ws) = m else {
                        panic!("foreign element {m}")
                    };
                    for (a, w) in ws {
                        *acc.entry(a).or_insert_with(Rational::zero) += w * half;
                    }
                }
                ModelElement::Dist(acc.into_iter().collect())
            }
            Some(Carrier::Exceptions(_)) => {
                let idx = op
                    .strip_prefix("raise")
                    .and_then(|n| n.parse().ok())
                    .unwrap_or_else(|| panic!("unknown exception `{op}`"));
                ModelElement::Raise(idx)
            }
        }
    }

    fn collection<A: Leaf>(&self, mut items: Vec<A>) -> ModelElement<A> {
        match self.carrier() {
            Some(Carrier::Monoid) => ModelElement::List(items),
            Some(Carrier::CommMonoid) => {
                items.sort();
                ModelElement::Multiset(items)
            }
            Some(Carrier::Semilattice) => {
                items.sort();
                items.dedup();
                ModelElement::FinSet(items)
            }
            _ => unreachable!(),
        }
    }

    /// A term representing the element; each leaf occurs where a
    /// generator is used.
    pub fn repr<A: Leaf>(&self, m: &ModelElement<A>) -> Tree<A> {
        match m {
            ModelElement::Tree(t) => t.clone(),
            ModelElement::Value(a) => Tree::Leaf(a.clone()),
            ModelElement::Raise(e) => Tree::Node(self.op_rc(&format!("raise{e}")), vec![]),
            ModelElement::List(xs) | ModelElement::Multiset(xs) | ModelElement::FinSet(xs) => {
                let bin = self.binary_op();
                let mut it = xs.iter().rev();
                match it.next() {
                    None => Tree::Node(self.constant().expect("collection theory without unit"), vec![]),
                    Some(last) => it.fold(Tree::Leaf(last.clone()), |acc, x| {
                        Tree::Node(Rc::clone(&bin), vec![Tree::Leaf(x.clone()), acc])
                    }),
                }
            }
            ModelElement::Dist(ws) => {
                let bin = self.binary_op();
                let mut k = 0u32;
                for (_, w) in ws {
                    let d = *w.denom();
                    assert!(d.count_ones() == 1, "distribution weight {w} is not dyadic");
                    k = k.max(d.trailing_zeros());
                }
                let slots: Vec<&A> = ws
                    .iter()
                    .flat_map(|(a, w)| {
                        let n = (w * Rational::from_integer(1i128 << k)).to_integer() as usize;
                        std::iter::repeat_n(a, n)
                    })
                    .collect();
                dyadic_tree(&bin, &slots)
            }
        }
    }

    fn binary_op(&self) -> Rc<str> {
        self.ops
            .iter()
            .find(|(_, a)| *a == 2)
            .map(|(n, _)| Rc::clone(n))
            .expect("theory without binary operation")
    }

    /// Interpret a tree whose leaves are already elements.
    pub fn eval_tree<A: Leaf>(&self, t: &Tree<ModelElement<A>>) -> ModelElement<A> {
        t.fold(&mut |m: &ModelElement<A>| m.clone(), &mut |op, args| self.apply(op, args))
    }

    pub fn eval_term<A: Leaf>(&self, t: &Term, env: &BTreeMap<String, ModelElement<A>>) -> ModelElement<A> {
        match t {
            Term::Var(v) => env
                .get(v)
                .unwrap_or_else(|| panic!("unbound variable `{v}`"))
                .clone(),
            Term::App(op, args) => {
                let vals = args.iter().map(|a| self.eval_term(a, env)).collect();
                self.apply(op, vals)
            }
        }
    }

    /// Fold an element through its representative.
    pub fn fold<A: Leaf, B>(
        &self,
        m: &ModelElement<A>,
        leaf: &mut impl FnMut(&A) -> B,
        node: &mut impl FnMut(&str, Vec<B>) -> B,
    ) -> B {
        self.repr(m).fold(leaf, node)
    }

    /// Kleisli extension (homomorphic extension of `k`).
    pub fn bind<A: Leaf, B: Leaf>(&self, m: &ModelElement<A>, k: impl Fn(&A) -> ModelElement<B>) -> ModelElement<B> {
        match m {
            ModelElement::Dist(ws) => {
                let mut acc: BTreeMap<B, Rational> = BTreeMap::new();
                for (a, w) in ws {
                    let ModelElement::Dist(inner) = k(a) else {
                        panic!("foreign element")
                    };
                    for (b, v) in inner {
                        *acc.entry(b).or_insert_with(Rational::zero) += *w * v;
                    }
                }
                ModelElement::Dist(acc.into_iter().collect())
            }
            ModelElement::List(xs) | ModelElement::Multiset(xs) | ModelElement::FinSet(xs) => {
                let mut items = Vec::new();
                for x in xs {
                    match k(x) {
                        ModelElement::List(ys) | ModelElement::Multiset(ys) | ModelElement::FinSet(ys) => {
                            items.extend(ys)
                        }
                        other => panic!("foreign element {other}"),
                    }
                }
                self.collection(items)
            }
            _ => self.fold(m, &mut |a: &A| k(a), &mut |op, args| self.apply(op, args)),
        }
    }

    pub fn map<A: Leaf, B: Leaf>(&self, m: &ModelElement<A>, f: impl Fn(&A) -> B) -> ModelElement<B> {
        self.bind(m, |a| self.unit(f(a)))
    }

    /// `μ`: flatten two layers.
    pub fn join<A: Leaf>(&self, mm: &ModelElement<ModelElement<A>>) -> ModelElement<A> {
        self.bind(mm, |m| m.clone())
    }

    /// Equality in the free model.
    pub fn model_equal<A: Leaf>(&self, a: &ModelElement<A>, b: &ModelElement<A>) -> Verdict {
        if a == b {
            return Verdict::Yes;
        }
        match (self.carrier(), a, b) {
            (None, ModelElement::Tree(s), ModelElement::Tree(t)) => self.quotient_equal(s, t),
            _ => Verdict::No,
        }
    }

    /// All elements generated from `gens` by operations up to `max_depth`,
    /// or `None` as soon as more than `budget` elements are produced.
    pub fn enumerate_bounded<A: Leaf>(&self, gens: &[A], max_depth: usize, budget: usize) -> Option<Vec<ModelElement<A>>> {
        let mut level: BTreeSet<ModelElement<A>> = gens.iter().map(|g| self.unit(g.clone())).collect();
        for (op, arity) in self.ops() {
            if arity == 0 {
                level.insert(self.apply(op, vec![]));
            }
        }
        for _ in 0..max_depth {
            let current: Vec<_> = level.iter().cloned().collect();
            let mut next = level.clone();
            for (op, arity) in self.ops() {
                if arity == 0 {
                    continue;
                }
                let mut idx = vec![0usize; arity];
                'tuples: loop {
                    let args = idx.iter().map(|&i| current[i].clone()).collect();
                    next.insert(self.apply(op, args));
                    if next.len() > budget {
                        return None;
                    }
                    for pos in (0..arity).rev() {
                        idx[pos] += 1;
                        if idx[pos] < current.len() {
                            continue 'tuples;
                        }
                        idx[pos] = 0;
                    }
                    break;
                }
            }
            level = next;
        }
        Some(level.into_iter().collect())
    }

    pub fn enumerate_elements<A: Leaf>(&self, gens: &[A], max_depth: usize) -> Vec<ModelElement<A>> {
        self.enumerate_bounded(gens, max_depth, usize::MAX)
            .expect("unbounded enumeration")
    }

    // -- user theories ------------------------------------------------------

    /// Innermost left-to-right rewriting, bounded.
    pub fn normalise<A: Leaf>(&self, t: Tree<A>) -> Tree<A> {
        let mut budget = NORMALISE_BUDGET;
        self.normalise_with(t, &mut budget)
    }

    fn normalise_with<A: Leaf>(&self, t: Tree<A>, budget: &mut usize) -> Tree<A> {
        let t = match t {
            Tree::Node(op, args) => Tree::Node(op, args.into_iter().map(|a| self.normalise_with(a, budget)).collect()),
            leaf => leaf,
        };
        if *budget == 0 {
            return t;
        }
        for rule in &self.rules {
            if let Some(env) = match_term(&rule.lhs, &t) {
                *budget -= 1;
                let out = instantiate(&rule.rhs, &env);
                return self.normalise_with(out, budget);
            }
        }
        t
    }

    fn rewrites_of<A: Leaf>(&self, t: &Tree<A>) -> Vec<Tree<A>> {
        let mut out = Vec::new();
        for rule in &self.rules {
            if let Some(env) = match_term(&rule.lhs, t) {
                out.push(instantiate(&rule.rhs, &env));
            }
        }
        if let Tree::Node(op, args) = t {
            for (i, a) in args.iter().enumerate() {
                for r in self.rewrites_of(a) {
                    let mut args2 = args.clone();
                    args2[i] = r;
                    out.push(Tree::Node(Rc::clone(op), args2));
                }
            }
        }
        out
    }

    fn reachable<A: Leaf>(&self, t: &Tree<A>) -> BTreeSet<Tree<A>> {
        let mut seen = BTreeSet::from([t.clone()]);
        let mut frontier = vec![t.clone()];
        for _ in 0..JOIN_BOUND {
            let mut next = Vec::new();
            for u in &frontier {
                for r in self.rewrites_of(u) {
                    if seen.insert(r.clone()) {
                        next.push(r);
                    }
                }
            }
            if next.is_empty() || seen.len() > 4096 {
                break;
            }
            frontier = next;
        }
        seen
    }

    fn quotient_equal<A: Leaf>(&self, s: &Tree<A>, t: &Tree<A>) -> Verdict {
        let rs = self.reachable(s);
        if rs.contains(t) || !rs.is_disjoint(&self.reachable(t)) {
            return Verdict::Yes;
        }
        if self.refuted_by_model(s, t).is_some() {
            return Verdict::No;
        }
        Verdict::Unknown {
            fuel_spent: JOIN_BOUND as u32,
        }
    }

    /// Small finite models of the theory, found by exhaustive table search.
    pub fn finite_models(&self) -> &[FiniteModel] {
        self.models.get_or_init(|| {
            let mut found = Vec::new();
            for size in 2..=3usize {
                let table_lens: Vec<usize> = self.ops.iter().map(|(_, a)| size.pow(*a as u32)).collect();
                let total: f64 = table_lens.iter().map(|&l| (size as f64).powi(l as i32)).product();
                if total > MODEL_SEARCH_CAP as f64 {
                    continue;
                }
                for code in 0..total as usize {
                    let mut c = code;
                    let mut tables = BTreeMap::new();
                    for ((name, _), len) in self.ops.iter().zip(&table_lens) {
                        let mut tab = Vec::with_capacity(*len);
                        for _ in 0..*len {
                            tab.push(c % size);
                            c /= size;
                        }
                        tables.insert(name.to_string(), tab);
                    }
                    let m = FiniteModel { size, tables };
                    if m.satisfies(&self.theory) {
                        found.push(m);
                    }
                }
            }
            found
        })
    }

    /// A finite model and valuation of the leaves separating `s` and `t`.
    pub fn refuted_by_model<A: Leaf>(&self, s: &Tree<A>, t: &Tree<A>) -> Option<(FiniteModel, Vec<(A, usize)>)> {
        let mut leaves: Vec<&A> = s.leaves();
        leaves.extend(t.leaves());
        leaves.sort();
        leaves.dedup();
        for m in self.finite_models() {
            let combos = m.size.checked_pow(leaves.len() as u32)?;
            if combos > 1 << 14 {
                continue;
            }
            for mut code in 0..combos {
                let mut env = BTreeMap::new();
                for l in &leaves {
                    env.insert(*l, code % m.size);
                    code /= m.size;
                }
                if m.eval_tree(s, &env) != m.eval_tree(t, &env) {
                    let val = env.into_iter().map(|(a, v)| (a.clone(), v)).collect();
                    return Some((m.clone(), val));
                }
            }
        }
        None
    }
}

fn dyadic_tree<A: Clone + PartialEq>(bin: &Rc<str>, slots: &[&A]) -> Tree<A> {
    if slots.iter().all(|s| *s == slots[0]) {
        return Tree::Leaf(slots[0].clone());
    }
    let (l, r) = slots.split_at(slots.len() / 2);
    Tree::Node(Rc::clone(bin), vec![dyadic_tree(bin, l), dyadic_tree(bin, r)])
}

fn match_term<A: Leaf>(pat: &Term, t: &Tree<A>) -> Option<HashMap<String, Tree<A>>> {
    let mut env = HashMap::new();
    if match_into(pat, t, &mut env) {
        Some(env)
    } else {
        None
    }
}

fn match_into<A: Leaf>(pat: &Term, t: &Tree<A>, env: &mut HashMap<String, Tree<A>>) -> bool {
    match pat {
        Term::Var(v) => match env.get(v) {
            Some(bound) => bound == t,
            None => {
                env.insert(v.clone(), t.clone());
                true
            }
        },
        Term::App(op, pargs) => match t {
            Tree::Node(top, targs) if **top == **op && pargs.len() == targs.len() => {
                pargs.iter().zip(targs).all(|(p, a)| match_into(p, a, env))
            }
            _ => false,
        },
    }
}

fn instantiate<A: Leaf>(t: &Term, env: &HashMap<String, Tree<A>>) -> Tree<A> {
    match t {
        Term::Var(v) => env[v].clone(),
        Term::App(op, args) => Tree::Node(Rc::from(op.as_str()), args.iter().map(|a| instantiate(a, env)).collect()),
    }
}

/// The free model of a built-in theory.
pub fn builtin_model(name: &str) -> Result<FreeModel, crate::theory::TheoryError> {
    crate::theory::builtin(name).map(FreeModel::new)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::builtin;

    fn model(name: &str) -> FreeModel {
        builtin_model(name).unwrap()
    }

    fn r(n: i128, d: i128) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn units() {
        assert_eq!(model("monoid").unit('a'), ModelElement::List(vec!['a']));
        assert_eq!(model("semilattice").unit('a'), ModelElement::FinSet(vec!['a']));
        assert_eq!(model("convex").unit('a'), ModelElement::Dist(vec![('a', r(1, 1))]));
    }

    #[test]
    fn eval_examples() {
        let sl = model("semilattice");
        let t = crate::theory::parse_theory("op union:2\neq e: union(x,y)=x").unwrap().equations[0].lhs.clone();
        let env = BTreeMap::from([("x".to_string(), sl.unit('a')), ("y".to_string(), sl.unit('a'))]);
        assert_eq!(sl.eval_term(&t, &env), ModelElement::FinSet(vec!['a']));

        let cv = model("convex");
        let t = Term::app("mix", vec![Term::var("x"), Term::var("y")]);
        let env = BTreeMap::from([("x".to_string(), cv.unit('a')), ("y".to_string(), cv.unit('b'))]);
        assert_eq!(cv.eval_term(&t, &env), ModelElement::Dist(vec![('a', r(1, 2)), ('b', r(1, 2))]));

        let mo = model("monoid");
        let th = builtin("monoid").unwrap();
        let assoc = th.equation("assoc").unwrap();
        let env = BTreeMap::from([
            ("x".to_string(), mo.unit('a')),
            ("y".to_string(), mo.unit('b')),
            ("z".to_string(), mo.unit('c')),
        ]);
        assert_eq!(mo.eval_term(&assoc.lhs, &env), ModelElement::List(vec!['a', 'b', 'c']));
        assert_eq!(mo.eval_term(&assoc.rhs, &env), ModelElement::List(vec!['a', 'b', 'c']));
    }

    #[test]
    fn bind_examples() {
        let mo = model("monoid");
        let m = ModelElement::List(vec!['a', 'b']);
        assert_eq!(mo.bind(&m, |v| ModelElement::List(vec![*v, *v])), ModelElement::List(vec!['a', 'a', 'b', 'b']));
        let sl = model("semilattice");
        let m = ModelElement::FinSet(vec!['a', 'b']);
        assert_eq!(sl.bind(&m, |_| sl.unit('c')), ModelElement::FinSet(vec!['c']));
        let cv = model("convex");
        let m = ModelElement::Dist(vec![('a', r(1, 2)), ('b', r(1, 2))]);
        assert_eq!(cv.bind(&m, |_| cv.unit('c')), ModelElement::Dist(vec![('c', r(1, 1))]));
    }

    #[test]
    fn equality_examples() {
        let cm = model("cmonoid");
        let ab = cm.apply("mul", vec![cm.unit('a'), cm.unit('b')]);
        let ba = cm.apply("mul", vec![cm.unit('b'), cm.unit('a')]);
        assert_eq!(cm.model_equal(&ab, &ba), Verdict::Yes);
        let sl = model("semilattice");
        assert_eq!(sl.model_equal(&ModelElement::FinSet(vec!['a']), &ModelElement::FinSet(vec!['a', 'b'])), Verdict::No);
        let cv = model("convex");
        let d = ModelElement::Dist(vec![('a', r(1, 3)), ('b', r(2, 3))]);
        assert_eq!(cv.model_equal(&d, &d.clone()), Verdict::Yes);
    }

    #[test]
    fn enumeration_examples() {
        let sl = model("semilattice");
        let xs = sl.enumerate_elements(&['x', 'y'], 2);
        assert_eq!(xs.len(), 4);
        let mg = model("magma");
        let xs: Vec<String> = mg.enumerate_elements(&['x'], 2).iter().map(|m| m.to_string()).collect();
        for expect in ["x", "x∗x", "(x∗x)∗x", "x∗(x∗x)", "(x∗x)∗(x∗x)", "unit"] {
            assert!(xs.contains(&expect.to_string()), "{expect} missing from {xs:?}");
        }
        assert_eq!(xs.len(), 6);
        let cv = model("convex");
        let xs = cv.enumerate_elements(&['x', 'y'], 1);
        assert_eq!(xs.len(), 3);
    }

    #[test]
    fn representatives_evaluate_back() {
        for name in ["magma", "monoid", "cmonoid", "semilattice", "convex", "exceptions(E=2)", "idem-bang"] {
            let fm = model(name);
            for m in fm.enumerate_elements(&atoms(2), 2) {
                let tree = fm.repr(&m);
                let back = tree.fold(&mut |a: &Atom| fm.unit(*a), &mut |op, args| fm.apply(op, args));
                assert_eq!(back, m, "{name}");
            }
        }
    }

    #[test]
    fn dyadic_representative() {
        let cv = model("convex");
        let d = ModelElement::Dist(vec![('a', r(1, 4)), ('b', r(3, 4))]);
        assert_eq!(cv.repr(&d).to_string(), "(a⊕b)⊕b");
    }

    #[test]
    fn equations_hold_in_canonical_models() {
        for name in ["magma", "monoid", "cmonoid", "semilattice", "convex", "exceptions(E=2)"] {
            let fm = model(name);
            let gens = atoms(3);
            for eq in &fm.theory().equations {
                let n = eq.context.len();
                for mut code in 0..3usize.pow(n as u32) {
                    let mut env = BTreeMap::new();
                    for v in &eq.context {
                        env.insert(v.clone(), fm.unit(gens[code % 3]));
                        code /= 3;
                    }
                    assert_eq!(fm.eval_term(&eq.lhs, &env), fm.eval_term(&eq.rhs, &env), "{name} {eq}");
                }
            }
        }
    }

    #[test]
    fn monad_laws_on_small_universes() {
        for name in ["magma", "monoid", "cmonoid", "semilattice", "convex", "exceptions(E=1)"] {
            let fm = model(name);
            let universe = fm.enumerate_elements(&atoms(2), 1);
            assert!(universe.len() <= 30);
            let ks: Vec<Box<dyn Fn(&Atom) -> ModelElement<Atom>>> = vec![
                Box::new(|a| fm.unit(Atom(1 - a.0))),
                Box::new(|a| universe[(a.0 as usize * 3) % universe.len()].clone()),
                Box::new(|a| universe[(a.0 as usize + 1) % universe.len()].clone()),
            ];
            for m in &universe {
                assert_eq!(&fm.bind(m, |a| fm.unit(*a)), m, "{name} right unit");
                for f in &ks {
                    for g in &ks {
                        let lhs = fm.bind(&fm.bind(m, f), g);
                        let rhs = fm.bind(m, |a| fm.bind(&f(a), g));
                        assert_eq!(lhs, rhs, "{name} assoc on {m}");
                    }
                }
            }
            for a in atoms(2) {
                for f in &ks {
                    assert_eq!(fm.bind(&fm.unit(a), f), f(&a), "{name} left unit");
                }
            }
        }
    }

    #[test]
    fn model_equal_is_an_equivalence() {
        for name in ["cmonoid", "semilattice", "convex"] {
            let fm = model(name);
            let u = fm.enumerate_elements(&atoms(2), 1);
            for a in &u {
                assert!(fm.model_equal(a, a).is_yes());
                for b in &u {
                    assert_eq!(fm.model_equal(a, b), fm.model_equal(b, a));
                    for c in &u {
                        if fm.model_equal(a, b).is_yes() && fm.model_equal(b, c).is_yes() {
                            assert!(fm.model_equal(a, c).is_yes());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn quotient_normalises_idempotence() {
        let fm = model("idem-bang");
        let a = fm.unit('a');
        let aa = fm.apply("mul", vec![a.clone(), a.clone()]);
        assert_eq!(aa, a);
        let b = fm.unit('b');
        let ab = fm.apply("mul", vec![a.clone(), b.clone()]);
        assert_eq!(fm.model_equal(&ab, &a), Verdict::No);
        let bang_a = fm.apply("bang", vec![a.clone()]);
        assert_eq!(fm.model_equal(&bang_a, &a), Verdict::No);
    }

    #[test]
    fn quotient_join_and_unknown() {
        let th = crate::theory::parse_theory("op f:1\nop g:1\neq fg: f(g(x)) = g(x)\neq gf: g(f(x)) = f(x)").unwrap();
        let fm = FreeModel::new(th);
        let x = fm.unit('x');
        let fgx = ModelElement::Tree(Tree::Node(Rc::from("f"), vec![Tree::Node(Rc::from("g"), vec![Tree::Leaf('x')])]));
        let gx = fm.apply("g", vec![x]);
        assert_eq!(fm.model_equal(&fgx, &gx), Verdict::Yes);
    }
}
