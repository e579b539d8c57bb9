//! Lifting theory operations to delayed values, and the candidate
//! distributive laws `T D → D T` they induce.

use std::collections::BTreeMap;
use std::fmt;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::delay::{step, Delay};
use crate::freemodel::{FreeModel, Leaf, ModelElement, Tree};
use crate::theory::Term;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LiftMode {
    Sequential,
    Parallel,
}

/// Hand-written clause sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CustomLaw {
    /// Idempotent `mul` with a unary `bang` that cancels one step:
    /// `bang(step x) = x`, `step(x)∗y = step(x∗bang(y))`,
    /// `x∗step(y) = step(bang(x)∗y)`.
    Bang,
    /// Constants need no steps; generators keep theirs.
    Exceptions,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LawKind {
    Lift(LiftMode),
    Custom(CustomLaw),
}

impl fmt::Display for LawKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LawKind::Lift(LiftMode::Sequential) => write!(f, "seq"),
            LawKind::Lift(LiftMode::Parallel) => write!(f, "par"),
            LawKind::Custom(CustomLaw::Bang) => write!(f, "custom:bang"),
            LawKind::Custom(CustomLaw::Exceptions) => write!(f, "custom:exceptions"),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum LiftError {
    #[error("operation `{op}` expects {expected} arguments, got {got}")]
    Arity { op: String, expected: usize, got: usize },
    #[error("unbound variable `{0}`")]
    Unbound(String),
}

fn check_arity<A>(fm: &FreeModel, op: &str, args: &[A]) -> Result<(), LiftError> {
    let expected = fm.theory().arity(op).unwrap_or(usize::MAX);
    if expected != args.len() {
        return Err(LiftError::Arity {
            op: op.to_string(),
            expected,
            got: args.len(),
        });
    }
    Ok(())
}

/// Parallel lifting: every stepping argument advances at once.
pub fn par_lift_op<A: Leaf>(
    op: &str,
    args: &[Delay<ModelElement<A>>],
    fm: &FreeModel,
) -> Result<Delay<ModelElement<A>>, LiftError> {
    check_arity(fm, op, args)?;
    let mut cur: Vec<Delay<ModelElement<A>>> = args.to_vec();
    let mut steps = 0;
    loop {
        if cur.iter().all(Delay::is_now) {
            return Ok(finish(fm, op, &cur, steps));
        }
        if cur.iter().any(|d| matches!(d, Delay::Diverge)) {
            return Ok(Delay::Diverge);
        }
        cur = cur.iter().map(Delay::advance).collect();
        steps += 1;
    }
}

/// Sequential lifting: the leftmost stepping argument advances first.
pub fn seq_lift_op<A: Leaf>(
    op: &str,
    args: &[Delay<ModelElement<A>>],
    fm: &FreeModel,
) -> Result<Delay<ModelElement<A>>, LiftError> {
    check_arity(fm, op, args)?;
    let mut cur: Vec<Delay<ModelElement<A>>> = args.to_vec();
    let mut steps = 0;
    while let Some(i) = cur.iter().position(|d| !d.is_now()) {
        if matches!(cur[i], Delay::Diverge) {
            return Ok(Delay::Diverge);
        }
        cur[i] = cur[i].advance();
        steps += 1;
    }
    Ok(finish(fm, op, &cur, steps))
}

fn finish<A: Leaf>(fm: &FreeModel, op: &str, args: &[Delay<ModelElement<A>>], steps: u32) -> Delay<ModelElement<A>> {
    let vals = args
        .iter()
        .map(|d| match d {
            Delay::Now(v) => v.clone(),
            _ => unreachable!(),
        })
        .collect();
    crate::delay::delay_n(steps, fm.apply(op, vals))
}

/// A candidate distributive law `ζ : T D → D T` for one theory.
#[derive(Clone, Debug)]
pub struct DistLawCandidate {
    pub model: Rc<FreeModel>,
    pub kind: LawKind,
}

impl DistLawCandidate {
    pub fn name(&self) -> String {
        format!("{}/{}", self.model.theory().name(), self.kind)
    }

    /// The lifted interpretation of one operation on `D (T A)`.
    pub fn lift_op<A: Leaf>(&self, op: &str, args: &[Delay<ModelElement<A>>]) -> Result<Delay<ModelElement<A>>, LiftError> {
        match self.kind {
            LawKind::Lift(LiftMode::Parallel) | LawKind::Custom(CustomLaw::Exceptions) => {
                par_lift_op(op, args, &self.model)
            }
            LawKind::Lift(LiftMode::Sequential) => seq_lift_op(op, args, &self.model),
            LawKind::Custom(CustomLaw::Bang) => {
                check_arity(&self.model, op, args)?;
                Ok(match op {
                    "bang" => bang(&self.model, &args[0]),
                    "mul" => bang_mul(&self.model, &args[0], &args[1]),
                    other => panic!("the bang law has no clause for `{other}`"),
                })
            }
        }
    }

    /// Interpret a tree of delayed elements with lifted operations.
    pub fn lift_tree<A: Leaf>(&self, t: &Tree<Delay<ModelElement<A>>>) -> Delay<ModelElement<A>> {
        t.fold(&mut |d: &Delay<ModelElement<A>>| d.clone(), &mut |op, args| {
            self.lift_op(op, &args).expect("well-formed tree")
        })
    }

    /// `ζ_A`, through the canonical representative of the element.
    pub fn apply<A: Leaf>(&self, m: &ModelElement<Delay<A>>) -> Delay<ModelElement<A>> {
        let fm = &*self.model;
        fm.fold(m, &mut |d: &Delay<A>| d.map(|a| fm.unit(a.clone())), &mut |op, args| {
            self.lift_op(op, &args).expect("well-formed element")
        })
    }
}

fn bang<A: Leaf>(fm: &FreeModel, d: &Delay<ModelElement<A>>) -> Delay<ModelElement<A>> {
    match d {
        Delay::Now(a) => Delay::Now(fm.apply("bang", vec![a.clone()])),
        Delay::Step(_) => d.advance(),
        Delay::Diverge => Delay::Diverge,
    }
}

fn bang_mul<A: Leaf>(fm: &FreeModel, x: &Delay<ModelElement<A>>, y: &Delay<ModelElement<A>>) -> Delay<ModelElement<A>> {
    match (x, y) {
        (Delay::Diverge, _) | (_, Delay::Diverge) => Delay::Diverge,
        (Delay::Now(a), Delay::Now(b)) => Delay::Now(fm.apply("mul", vec![a.clone(), b.clone()])),
        (Delay::Step(_), _) => step(bang_mul(fm, &x.advance(), &bang(fm, y))),
        (Delay::Now(_), Delay::Step(_)) => step(bang_mul(fm, &bang(fm, x), &y.advance())),
    }
}

pub fn induced_candidate(model: Rc<FreeModel>, mode: LiftMode) -> DistLawCandidate {
    DistLawCandidate {
        model,
        kind: LawKind::Lift(mode),
    }
}

pub fn custom_candidate(model: Rc<FreeModel>, law: CustomLaw) -> DistLawCandidate {
    DistLawCandidate {
        model,
        kind: LawKind::Custom(law),
    }
}

/// `⟦t⟧` under a lifting; each occurrence of a variable re-reads its value.
pub fn lift_term<A: Leaf>(
    t: &Term,
    env: &BTreeMap<String, Delay<ModelElement<A>>>,
    cand: &DistLawCandidate,
) -> Result<Delay<ModelElement<A>>, LiftError> {
    match t {
        Term::Var(v) => env.get(v).cloned().ok_or_else(|| LiftError::Unbound(v.clone())),
        Term::App(op, args) => {
            let vals = args.iter().map(|a| lift_term(a, env, cand)).collect::<Result<Vec<_>, _>>()?;
            cand.lift_op(op, &vals)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay::{delay_n, diverge, now, strong_equal};
    use crate::freemodel::builtin_model;
    use crate::theory::builtin;

    fn model(name: &str) -> Rc<FreeModel> {
        Rc::new(builtin_model(name).unwrap())
    }

    fn d(fm: &FreeModel, n: u32, a: char) -> Delay<ModelElement<char>> {
        delay_n(n, fm.unit(a))
    }

    #[test]
    fn parallel_examples() {
        let fm = model("magma");
        let ab = fm.apply("mul", vec![fm.unit('a'), fm.unit('b')]);
        assert_eq!(par_lift_op("mul", &[d(&fm, 0, 'a'), d(&fm, 0, 'b')], &fm).unwrap(), now(ab.clone()));
        assert_eq!(par_lift_op("mul", &[d(&fm, 2, 'a'), d(&fm, 3, 'b')], &fm).unwrap(), delay_n(3, ab.clone()));
        assert_eq!(par_lift_op("mul", &[d(&fm, 0, 'a'), d(&fm, 1, 'b')], &fm).unwrap(), delay_n(1, ab));
        assert_eq!(par_lift_op("mul", &[d(&fm, 1, 'a'), diverge()], &fm).unwrap(), diverge());
        assert!(matches!(par_lift_op("mul", &[d(&fm, 1, 'a')], &fm), Err(LiftError::Arity { .. })));
    }

    #[test]
    fn sequential_examples() {
        let fm = model("magma");
        let ab = fm.apply("mul", vec![fm.unit('a'), fm.unit('b')]);
        assert_eq!(seq_lift_op("mul", &[d(&fm, 2, 'a'), d(&fm, 3, 'b')], &fm).unwrap(), delay_n(5, ab.clone()));
        assert_eq!(seq_lift_op("mul", &[d(&fm, 0, 'a'), d(&fm, 0, 'b')], &fm).unwrap(), now(ab));
        assert_eq!(seq_lift_op("mul", &[diverge(), d(&fm, 0, 'b')], &fm).unwrap(), diverge());
    }

    #[test]
    fn idempotence_costs_a_step_sequentially() {
        let fm = model("semilattice");
        let cand = induced_candidate(Rc::clone(&fm), LiftMode::Sequential);
        let idem = builtin("semilattice").unwrap().equation("idem").unwrap().clone();
        let env = BTreeMap::from([("x".to_string(), d(&fm, 1, 'v'))]);
        let lhs = lift_term(&idem.lhs, &env, &cand).unwrap();
        let rhs = lift_term(&idem.rhs, &env, &cand).unwrap();
        assert_eq!(lhs, delay_n(2, fm.unit('v')));
        assert_eq!(rhs, delay_n(1, fm.unit('v')));
        assert!(strong_equal(&lhs, &rhs, 16).is_no());
    }

    #[test]
    fn lift_term_examples() {
        let fm = model("magma");
        let seq = induced_candidate(Rc::clone(&fm), LiftMode::Sequential);
        let par = induced_candidate(Rc::clone(&fm), LiftMode::Parallel);
        let xyz = Term::app(
            "mul",
            vec![Term::app("mul", vec![Term::var("x"), Term::var("y")]), Term::var("z")],
        );
        let env = BTreeMap::from([
            ("x".to_string(), d(&fm, 0, 'a')),
            ("y".to_string(), d(&fm, 0, 'b')),
            ("z".to_string(), d(&fm, 0, 'c')),
        ]);
        assert_eq!(lift_term(&xyz, &env, &seq).unwrap().to_string(), "0·step ▸ (a∗b)∗c");
        let xy = Term::app("mul", vec![Term::var("x"), Term::var("y")]);
        let env = BTreeMap::from([("x".to_string(), d(&fm, 1, 'a')), ("y".to_string(), d(&fm, 1, 'b'))]);
        assert_eq!(lift_term(&xy, &env, &par).unwrap().to_string(), "1·step ▸ a∗b");
        let xx = Term::app("mul", vec![Term::var("x"), Term::var("x")]);
        assert_eq!(lift_term(&xx, &env, &seq).unwrap().to_string(), "2·step ▸ a∗a");
        assert_eq!(lift_term(&Term::var("q"), &env, &seq), Err(LiftError::Unbound("q".into())));
    }

    #[test]
    fn induced_candidate_examples() {
        let fm = model("monoid");
        let seq = induced_candidate(Rc::clone(&fm), LiftMode::Sequential);
        let m = ModelElement::List(vec![now('a'), delay_n(1, 'b')]);
        assert_eq!(seq.apply(&m), delay_n(1, ModelElement::List(vec!['a', 'b'])));
        for name in ["magma", "monoid", "cmonoid", "semilattice", "convex", "idem-bang"] {
            let fm = model(name);
            let c = induced_candidate(Rc::clone(&fm), LiftMode::Parallel);
            assert_eq!(c.apply(&fm.unit(now('a'))), now(fm.unit('a')), "{name}");
        }
        let fm = model("semilattice");
        let par = induced_candidate(Rc::clone(&fm), LiftMode::Parallel);
        let m = ModelElement::FinSet(vec![delay_n(1, 'a'), delay_n(1, 'b')]);
        assert_eq!(par.apply(&m), delay_n(1, ModelElement::FinSet(vec!['a', 'b'])));
    }

    #[test]
    fn step_count_laws() {
        let th = crate::theory::parse_theory("op f:3\nop g:2\nop h:1").unwrap();
        let fm = FreeModel::new(th);
        for (op, n) in [("f", 3usize), ("g", 2), ("h", 1)] {
            let mut idx = vec![0u32; n];
            loop {
                let args: Vec<_> = idx.iter().map(|&k| delay_n(k, fm.unit('a'))).collect();
                let seq = seq_lift_op(op, &args, &fm).unwrap();
                let par = par_lift_op(op, &args, &fm).unwrap();
                assert_eq!(seq.steps(), Some(idx.iter().sum()));
                assert_eq!(par.steps(), Some(*idx.iter().max().unwrap()));
                // draining any single argument first gives the same result
                for i in 0..n {
                    if idx[i] > 0 {
                        let mut rest = args.clone();
                        rest[i] = rest[i].advance();
                        let alt = step(seq_lift_op(op, &rest, &fm).unwrap());
                        assert!(strong_equal(&alt, &seq, 32).is_yes());
                    }
                }
                let Some(pos) = (0..n).rev().find(|&p| idx[p] < 3) else { break };
                idx[pos] += 1;
                for q in pos + 1..n {
                    idx[q] = 0;
                }
            }
        }
    }

    #[test]
    fn bang_clauses() {
        let fm = model("idem-bang");
        let cand = custom_candidate(Rc::clone(&fm), CustomLaw::Bang);
        let x = fm.unit('x');
        let y = fm.unit('y');
        let xy = fm.apply("mul", vec![x.clone(), y.clone()]);
        let got = cand.lift_op("mul", &[delay_n(1, x.clone()), delay_n(1, y.clone())]).unwrap();
        assert_eq!(got, delay_n(1, xy));
        let got = cand.lift_op("bang", &[delay_n(2, x.clone())]).unwrap();
        assert_eq!(got, delay_n(1, x.clone()));
        let got = cand.lift_op("mul", &[delay_n(1, x.clone()), now(y.clone())]).unwrap();
        let bang_y = fm.apply("bang", vec![y]);
        assert_eq!(got, delay_n(1, fm.apply("mul", vec![x, bang_y])));
    }
}
