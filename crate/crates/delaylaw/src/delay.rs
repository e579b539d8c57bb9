//! The coinductive delay monad.
//!
//! A `Delay<V>` is either a value available `Now`, one more computation
//! `Step` in front of a tail, or the explicit divergence marker `Diverge`
//! standing for the infinite step chain. Tails are memoised thunks, so a
//! value can be built corecursively with [`Delay::unfold`] and is only
//! evaluated on demand.

use std::cell::OnceCell;
use std::cmp::Ordering;
use std::fmt;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

/// Default fuel used by demos and ad-hoc observations.
pub const DEFAULT_FUEL: u32 = 16;

/// Upper bound on steps peeled when comparing or printing values.
const OBSERVATION_LIMIT: u32 = 1 << 16;

type Thunk<V> = Box<dyn Fn() -> Delay<V>>;

/// A suspended tail, evaluated at most once.
pub struct Tail<V> {
    cell: Rc<(OnceCell<Delay<V>>, Option<Thunk<V>>)>,
}

impl<V> Clone for Tail<V> {
    fn clone(&self) -> Self {
        Tail {
            cell: Rc::clone(&self.cell),
        }
    }
}

impl<V> Tail<V> {
    fn ready(d: Delay<V>) -> Self {
        let cell = OnceCell::new();
        let _ = cell.set(d);
        Tail {
            cell: Rc::new((cell, None)),
        }
    }

    fn deferred(f: Thunk<V>) -> Self {
        Tail {
            cell: Rc::new((OnceCell::new(), Some(f))),
        }
    }

    /// The next layer. Forcing twice yields the same value.
    pub fn force(&self) -> &Delay<V> {
        let (cell, thunk) = &*self.cell;
        if cell.get().is_none() {
            let next = (thunk.as_ref().expect("unevaluated tail without thunk"))();
            let _ = cell.set(next);
        }
        cell.get().expect("tail was just set")
    }
}

/// A delayed computation.
pub enum Delay<V> {
    Now(V),
    Step(Tail<V>),
    Diverge,
}

impl<V: Clone> Clone for Delay<V> {
    fn clone(&self) -> Self {
        match self {
            Delay::Now(v) => Delay::Now(v.clone()),
            Delay::Step(t) => Delay::Step(t.clone()),
            Delay::Diverge => Delay::Diverge,
        }
    }
}

/// Result of forcing a delayed value with bounded fuel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome<V> {
    Terminated(V, u32),
    Exhausted,
    KnownDivergent,
}

/// Three-valued answer of a bounded decision procedure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Yes,
    No,
    Unknown { fuel_spent: u32 },
}

impl Verdict {
    pub fn is_yes(self) -> bool {
        self == Verdict::Yes
    }

    pub fn is_no(self) -> bool {
        self == Verdict::No
    }

    pub fn is_unknown(self) -> bool {
        matches!(self, Verdict::Unknown { .. })
    }

    /// Conjunction: `No` dominates, then `Unknown`.
    pub fn and(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::No, _) | (_, Verdict::No) => Verdict::No,
            (Verdict::Unknown { fuel_spent: a }, Verdict::Unknown { fuel_spent: b }) => {
                Verdict::Unknown { fuel_spent: a.max(b) }
            }
            (u @ Verdict::Unknown { .. }, _) | (_, u @ Verdict::Unknown { .. }) => u,
            _ => Verdict::Yes,
        }
    }

    /// Disjunction: `Yes` dominates, then `Unknown`.
    pub fn or(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::Yes, _) | (_, Verdict::Yes) => Verdict::Yes,
            (Verdict::Unknown { fuel_spent: a }, Verdict::Unknown { fuel_spent: b }) => {
                Verdict::Unknown { fuel_spent: a.max(b) }
            }
            (u @ Verdict::Unknown { .. }, _) | (_, u @ Verdict::Unknown { .. }) => u,
            _ => Verdict::No,
        }
    }
}

impl From<bool> for Verdict {
    fn from(b: bool) -> Self {
        if b {
            Verdict::Yes
        } else {
            Verdict::No
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Yes => write!(f, "Yes"),
            Verdict::No => write!(f, "No"),
            Verdict::Unknown { fuel_spent } => write!(f, "Unknown(fuel {fuel_spent})"),
        }
    }
}

pub fn now<V>(v: V) -> Delay<V> {
    Delay::Now(v)
}

/// One more step. A step in front of `⊥` is still `⊥`.
pub fn step<V>(d: Delay<V>) -> Delay<V> {
    match d {
        Delay::Diverge => Delay::Diverge,
        d => Delay::Step(Tail::ready(d)),
    }
}

pub fn delay_n<V>(n: u32, v: V) -> Delay<V> {
    let mut d = Delay::Now(v);
    for _ in 0..n {
        d = step(d);
    }
    d
}

pub fn diverge<V>() -> Delay<V> {
    Delay::Diverge
}

/// `μ`: flatten two layers of delay.
pub fn join<V: Clone>(dd: &Delay<Delay<V>>) -> Delay<V> {
    dd.bind(|d| d.clone())
}

/// Borrowed view of the head constructor.
enum Head<'a, V> {
    Now(&'a V),
    Step(&'a Delay<V>),
    Diverge,
}

impl<V> Delay<V> {
    fn head(&self) -> Head<'_, V> {
        match self {
            Delay::Now(v) => Head::Now(v),
            Delay::Step(t) => Head::Step(t.force()),
            Delay::Diverge => Head::Diverge,
        }
    }

    /// A value whose tail is computed only when forced.
    pub fn later(f: impl Fn() -> Delay<V> + 'static) -> Delay<V> {
        Delay::Step(Tail::deferred(Box::new(f)))
    }

    /// Corecursive construction: `f` yields either a final value or a new seed.
    pub fn unfold<S: Clone + 'static>(
        seed: S,
        f: impl Fn(S) -> Result<V, S> + Clone + 'static,
    ) -> Delay<V>
    where
        V: 'static,
    {
        match f(seed) {
            Ok(v) => Delay::Now(v),
            Err(next) => Delay::later(move || Delay::unfold(next.clone(), f.clone())),
        }
    }

    pub fn is_now(&self) -> bool {
        matches!(self, Delay::Now(_))
    }

    /// Peel at most `fuel` steps.
    pub fn force(&self, fuel: u32) -> Outcome<V>
    where
        V: Clone,
    {
        let mut cur = self;
        let mut steps = 0;
        loop {
            match cur.head() {
                Head::Now(v) => return Outcome::Terminated(v.clone(), steps),
                Head::Diverge => return Outcome::KnownDivergent,
                Head::Step(next) => {
                    if steps == fuel {
                        return Outcome::Exhausted;
                    }
                    steps += 1;
                    cur = next;
                }
            }
        }
    }

    /// Step count and final value, or `None` for a divergent value.
    /// Only for values with a finite prefix below the observation limit.
    pub fn normal_form(&self) -> Option<(u32, &V)> {
        let mut cur = self;
        let mut steps = 0;
        loop {
            match cur.head() {
                Head::Now(v) => return Some((steps, v)),
                Head::Diverge => return None,
                Head::Step(next) => {
                    steps += 1;
                    assert!(steps < OBSERVATION_LIMIT, "delay value exceeds observation limit");
                    cur = next;
                }
            }
        }
    }

    pub fn steps(&self) -> Option<u32> {
        self.normal_form().map(|(n, _)| n)
    }

    pub fn value(&self) -> Option<&V> {
        self.normal_form().map(|(_, v)| v)
    }

    /// Kleisli extension. Walks the step prefix of `self`.
    pub fn bind<W>(&self, k: impl Fn(&V) -> Delay<W>) -> Delay<W> {
        match self.normal_form() {
            None => Delay::Diverge,
            Some((n, v)) => {
                let mut d = k(v);
                if matches!(d, Delay::Diverge) {
                    return d;
                }
                for _ in 0..n {
                    d = step(d);
                }
                d
            }
        }
    }

    /// Lazy Kleisli extension, suitable for corecursive values.
    pub fn bind_lazy<W: 'static>(&self, k: Rc<dyn Fn(&V) -> Delay<W>>) -> Delay<W>
    where
        V: Clone + 'static,
    {
        match self {
            Delay::Now(v) => k(v),
            Delay::Diverge => Delay::Diverge,
            Delay::Step(t) => {
                let t = t.clone();
                Delay::later(move || t.force().bind_lazy(Rc::clone(&k)))
            }
        }
    }

    pub fn map<W>(&self, f: impl Fn(&V) -> W) -> Delay<W> {
        self.bind(|v| Delay::Now(f(v)))
    }

    /// Drop one leading step, if there is one.
    pub fn advance(&self) -> Delay<V>
    where
        V: Clone,
    {
        match self {
            Delay::Step(t) => t.force().clone(),
            other => other.clone(),
        }
    }
}

/// Weak bisimilarity up to `rel`, bounded by `fuel` lockstep steps.
pub fn weak_bisim<V, W>(
    x: &Delay<V>,
    y: &Delay<W>,
    rel: impl Fn(&V, &W) -> Verdict,
    fuel: u32,
) -> Verdict {
    let mut spent = 0;
    let (mut a, mut b) = (x, y);
    loop {
        match (a.head(), b.head()) {
            (Head::Now(v), _) => {
                return match strip(b, fuel - spent) {
                    Stripped::Value(w) => rel(v, w),
                    Stripped::Divergent => Verdict::No,
                    Stripped::Exhausted => Verdict::Unknown { fuel_spent: fuel },
                }
            }
            (_, Head::Now(w)) => {
                return match strip(a, fuel - spent) {
                    Stripped::Value(v) => rel(v, w),
                    Stripped::Divergent => Verdict::No,
                    Stripped::Exhausted => Verdict::Unknown { fuel_spent: fuel },
                }
            }
            (Head::Diverge, Head::Diverge) => return Verdict::Yes,
            (Head::Diverge, Head::Step(_)) => {
                return match strip(b, fuel - spent) {
                    Stripped::Value(..) => Verdict::No,
                    Stripped::Divergent => Verdict::Yes,
                    Stripped::Exhausted => Verdict::Unknown { fuel_spent: fuel },
                }
            }
            (Head::Step(_), Head::Diverge) => {
                return match strip(a, fuel - spent) {
                    Stripped::Value(..) => Verdict::No,
                    Stripped::Divergent => Verdict::Yes,
                    Stripped::Exhausted => Verdict::Unknown { fuel_spent: fuel },
                }
            }
            (Head::Step(na), Head::Step(nb)) => {
                if spent == fuel {
                    return Verdict::Unknown { fuel_spent: spent };
                }
                spent += 1;
                a = na;
                b = nb;
            }
        }
    }
}

/// Step-exact equality up to `rel` on values.
pub fn strong_equal_by<V, W>(
    x: &Delay<V>,
    y: &Delay<W>,
    rel: impl Fn(&V, &W) -> Verdict,
    fuel: u32,
) -> Verdict {
    let mut spent = 0;
    let (mut a, mut b) = (x, y);
    loop {
        match (a.head(), b.head()) {
            (Head::Now(v), Head::Now(w)) => return rel(v, w),
            (Head::Now(_), _) | (_, Head::Now(_)) => return Verdict::No,
            (Head::Diverge, Head::Diverge) => return Verdict::Yes,
            (Head::Diverge, Head::Step(_)) => {
                return match strip(b, fuel - spent) {
                    Stripped::Value(..) => Verdict::No,
                    Stripped::Divergent => Verdict::Yes,
                    Stripped::Exhausted => Verdict::Unknown { fuel_spent: fuel },
                }
            }
            (Head::Step(_), Head::Diverge) => {
                return match strip(a, fuel - spent) {
                    Stripped::Value(..) => Verdict::No,
                    Stripped::Divergent => Verdict::Yes,
                    Stripped::Exhausted => Verdict::Unknown { fuel_spent: fuel },
                }
            }
            (Head::Step(na), Head::Step(nb)) => {
                if spent == fuel {
                    return Verdict::Unknown { fuel_spent: spent };
                }
                spent += 1;
                a = na;
                b = nb;
            }
        }
    }
}

pub fn strong_equal<V: PartialEq>(x: &Delay<V>, y: &Delay<V>, fuel: u32) -> Verdict {
    strong_equal_by(x, y, |a, b| Verdict::from(a == b), fuel)
}

enum Stripped<'a, V> {
    Value(&'a V),
    Divergent,
    Exhausted,
}

fn strip<V>(d: &Delay<V>, fuel: u32) -> Stripped<'_, V> {
    let mut cur = d;
    let mut steps = 0;
    loop {
        match cur.head() {
            Head::Now(v) => return Stripped::Value(v),
            Head::Diverge => return Stripped::Divergent,
            Head::Step(next) => {
                if steps == fuel {
                    return Stripped::Exhausted;
                }
                steps += 1;
                cur = next;
            }
        }
    }
}

// Structural comparison forces tails; it is total on finite-prefix values.
impl<V: PartialEq> PartialEq for Delay<V> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp_with(other, |a, b| if a == b { Ordering::Equal } else { Ordering::Less })
            == Ordering::Equal
    }
}

impl<V: Eq> Eq for Delay<V> {}

impl<V: Ord> PartialOrd for Delay<V> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<V: Ord> Ord for Delay<V> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cmp_with(other, |a, b| a.cmp(b))
    }
}

impl<V> Delay<V> {
    fn cmp_with(&self, other: &Self, f: impl Fn(&V, &V) -> Ordering) -> Ordering {
        let (mut a, mut b) = (self, other);
        loop {
            match (a.head(), b.head()) {
                (Head::Now(x), Head::Now(y)) => return f(x, y),
                (Head::Now(_), _) => return Ordering::Less,
                (_, Head::Now(_)) => return Ordering::Greater,
                (Head::Diverge, Head::Diverge) => return Ordering::Equal,
                (Head::Step(_), Head::Diverge) => return Ordering::Less,
                (Head::Diverge, Head::Step(_)) => return Ordering::Greater,
                (Head::Step(x), Head::Step(y)) => {
                    a = x;
                    b = y;
                }
            }
        }
    }
}

impl<V: fmt::Display> fmt::Display for Delay<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut cur = self;
        let mut steps = 0u32;
        loop {
            match cur.head() {
                Head::Now(v) => return write!(f, "{steps}·step ▸ {v}"),
                Head::Diverge => {
                    return if steps == 0 {
                        write!(f, "⊥")
                    } else {
                        write!(f, "{steps}·step ▸ ⊥")
                    }
                }
                Head::Step(next) => {
                    if steps == OBSERVATION_LIMIT {
                        return write!(f, "≥{steps}·step ▸ …");
                    }
                    steps += 1;
                    cur = next;
                }
            }
        }
    }
}

impl<V: fmt::Debug> fmt::Debug for Delay<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Delay::Now(v) => write!(f, "now({v:?})"),
            Delay::Diverge => write!(f, "⊥"),
            Delay::Step(t) => match t.cell.0.get() {
                Some(d) => write!(f, "step({d:?})"),
                None => write!(f, "step(<suspended>)"),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eq(a: &char, b: &char) -> Verdict {
        Verdict::from(a == b)
    }

    #[test]
    fn constructors() {
        assert!(matches!(delay_n(0, 'a'), Delay::Now('a')));
        assert_eq!(delay_n(2, 'a'), step(step(now('a'))));
        assert_eq!(diverge::<char>().force(100), Outcome::KnownDivergent);
    }

    #[test]
    fn force_counts_steps() {
        assert_eq!(delay_n(3, 'a').force(5), Outcome::Terminated('a', 3));
        assert_eq!(delay_n(3, 'a').force(2), Outcome::Exhausted);
        assert_eq!(diverge::<char>().force(2), Outcome::KnownDivergent);
    }

    #[test]
    fn bind_and_join() {
        let k = |v: &char| delay_n(1, v.to_ascii_uppercase());
        assert_eq!(now('a').bind(k), delay_n(1, 'A'));
        assert_eq!(join(&now(step(now('x')))), delay_n(1, 'x'));
        assert_eq!(join(&step(now(now('y')))), delay_n(1, 'y'));
        assert_eq!(join(&delay_n(2, delay_n(3, 'v'))).steps(), Some(5));
        assert_eq!(diverge::<char>().bind(|v| now(*v)), Delay::Diverge);
        assert_eq!(now('a').bind(|_| diverge::<char>()), Delay::Diverge);
    }

    #[test]
    fn weak_bisim_examples() {
        assert_eq!(weak_bisim(&now('a'), &delay_n(4, 'a'), eq, 10), Verdict::Yes);
        assert_eq!(weak_bisim(&diverge(), &now('a'), eq, 10), Verdict::No);
        assert_eq!(weak_bisim(&now('a'), &now('a'), eq, 0), Verdict::Yes);
        assert_eq!(weak_bisim(&delay_n(2, 'a'), &delay_n(5, 'b'), eq, 10), Verdict::No);
        assert_eq!(weak_bisim(&diverge::<char>(), &diverge(), eq, 0), Verdict::Yes);
        assert!(weak_bisim(&delay_n(5, 'a'), &delay_n(5, 'a'), eq, 2).is_unknown());
    }

    #[test]
    fn strong_equal_examples() {
        assert_eq!(strong_equal(&delay_n(2, 'a'), &delay_n(2, 'a'), 16), Verdict::Yes);
        assert_eq!(strong_equal(&delay_n(1, 'a'), &delay_n(2, 'a'), 16), Verdict::No);
        assert!(strong_equal(&delay_n(1, 'a'), &delay_n(1, 'a'), 0).is_unknown());
        assert!(matches!(step(diverge::<char>()), Delay::Diverge));
        let lazy_bottom = Delay::later(|| diverge::<char>());
        assert_eq!(strong_equal(&lazy_bottom, &diverge(), 4), Verdict::Yes);
    }

    #[test]
    fn rendering() {
        assert_eq!(delay_n(3, 'v').to_string(), "3·step ▸ v");
        assert_eq!(diverge::<char>().to_string(), "⊥");
    }

    #[test]
    fn corecursive_values_are_lazy() {
        let countdown = Delay::unfold(1000u32, |n| if n == 0 { Ok('z') } else { Err(n - 1) });
        assert_eq!(countdown.force(10), Outcome::Exhausted);
        assert_eq!(countdown.force(1000), Outcome::Terminated('z', 1000));
        let spin: Delay<char> = Delay::unfold((), |_| Err(()));
        assert_eq!(spin.force(50), Outcome::Exhausted);
        assert!(weak_bisim(&spin, &now('a'), eq, 50).is_unknown());
        let k: Rc<dyn Fn(&char) -> Delay<char>> = Rc::new(|c| delay_n(1, *c));
        assert_eq!(countdown.bind_lazy(k).force(2000), Outcome::Terminated('z', 1001));
    }

    #[test]
    fn verdict_algebra() {
        let u = Verdict::Unknown { fuel_spent: 3 };
        assert_eq!(Verdict::Yes.and(u), u);
        assert_eq!(u.and(Verdict::No), Verdict::No);
        assert_eq!(Verdict::No.or(u), u);
        assert_eq!(u.or(Verdict::Yes), Verdict::Yes);
    }

    fn values() -> Vec<Delay<u8>> {
        let mut out = Vec::new();
        for n in 0..=5 {
            for v in 0..3u8 {
                out.push(delay_n(n, v));
            }
        }
        out
    }

    #[test]
    fn monad_laws_exhaustive() {
        let ks: Vec<Box<dyn Fn(&u8) -> Delay<u8>>> = vec![
            Box::new(|v| now(*v)),
            Box::new(|v| delay_n(u32::from(*v), (*v + 1) % 3)),
            Box::new(|v| if *v == 2 { diverge() } else { delay_n(1, *v) }),
        ];
        for m in values() {
            assert_eq!(strong_equal(&m.bind(|v| now(*v)), &m, 32), Verdict::Yes);
            for v in 0..3u8 {
                for k in &ks {
                    assert_eq!(strong_equal(&now(v).bind(k), &k(&v), 32), Verdict::Yes);
                }
            }
            for f in &ks {
                for g in &ks {
                    let lhs = m.bind(f).bind(g);
                    let rhs = m.bind(|x| f(x).bind(g));
                    assert_eq!(strong_equal(&lhs, &rhs, 32), Verdict::Yes);
                }
            }
        }
    }

    fn arb_delay() -> impl Strategy<Value = Delay<u8>> {
        prop_oneof![
            (0u32..=4, 0u8..3).prop_map(|(n, v)| delay_n(n, v)),
            Just(diverge()),
        ]
    }

    fn veq(a: &u8, b: &u8) -> Verdict {
        Verdict::from(a == b)
    }

    proptest! {
        #[test]
        fn weak_bisim_is_an_equivalence(x in arb_delay(), y in arb_delay(), z in arb_delay()) {
            prop_assert_eq!(weak_bisim(&x, &x, veq, 16), Verdict::Yes);
            prop_assert_eq!(weak_bisim(&x, &y, veq, 16), weak_bisim(&y, &x, veq, 16));
            if weak_bisim(&x, &y, veq, 16).is_yes() && weak_bisim(&y, &z, veq, 16).is_yes() {
                prop_assert_eq!(weak_bisim(&x, &z, veq, 16), Verdict::Yes);
            }
        }

        #[test]
        fn step_closure(x in arb_delay(), y in arb_delay()) {
            if weak_bisim(&x, &y, veq, 16).is_yes() {
                prop_assert_eq!(weak_bisim(&step(x.clone()), &y, veq, 16), Verdict::Yes);
            }
        }

        #[test]
        fn strong_implies_weak(x in arb_delay(), y in arb_delay()) {
            if strong_equal(&x, &y, 16).is_yes() {
                prop_assert_eq!(weak_bisim(&x, &y, veq, 16), Verdict::Yes);
            }
        }
    }
}
