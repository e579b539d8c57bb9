//! Delay combined with exceptions, reader, writer, global state, selection,
//! continuations, and the free sum with an algebraic monad.
//!
//! Finite exponents are tables over `0..n`. Selection and continuation
//! values are closures, compared on finite families of predicates.

use std::fmt;
use std::rc::Rc;
use std::time::Instant;

use crate::delay::{delay_n, join, now, step, strong_equal, Delay, Outcome, Verdict};
use crate::freemodel::{atoms, builtin_model, Atom, FreeModel, Leaf, ModelElement, Tree};
use crate::laws::{run_suite, AxiomEntry, AxiomName, LawError, LawReport, Relation, TestUniverse, Witness};
use crate::lifting::{custom_candidate, induced_candidate, CustomLaw, DistLawCandidate, LiftMode};

pub const COMBO_NAMES: [&str; 8] = [
    "exceptions",
    "reader",
    "writer",
    "yang-baxter",
    "state",
    "selection",
    "continuation",
    "sum",
];

/// A total function on `0..len`, stored as its table.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FinFun<B> {
    pub table: Vec<B>,
}

impl<B: Clone> FinFun<B> {
    pub fn tabulate(n: usize, f: impl Fn(usize) -> B) -> Self {
        FinFun {
            table: (0..n).map(f).collect(),
        }
    }

    pub fn constant(n: usize, b: B) -> Self {
        FinFun { table: vec![b; n] }
    }

    pub fn at(&self, i: usize) -> &B {
        &self.table[i]
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn map<C: Clone>(&self, f: impl Fn(&B) -> C) -> FinFun<C> {
        FinFun {
            table: self.table.iter().map(f).collect(),
        }
    }
}

impl<B: fmt::Display> fmt::Display for FinFun<B> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "⟨")?;
        for (i, b) in self.table.iter().enumerate() {
            if i > 0 {
                write!(f, " | ")?;
            }
            write!(f, "{b}")?;
        }
        write!(f, "⟩")
    }
}

/// Every function from `0..dom` into `cod`.
pub fn all_functions<B: Clone>(dom: usize, cod: &[B]) -> Vec<FinFun<B>> {
    let total = cod.len().pow(dom as u32);
    (0..total)
        .map(|code| FinFun::tabulate(dom, |i| cod[(code / cod.len().pow(i as u32)) % cod.len()].clone()))
        .collect()
}

fn cross3<A: Clone, B: Clone, C: Clone>(a: &[A], b: &[B], c: &[C]) -> Vec<(A, B, C)> {
    let mut out = Vec::with_capacity(a.len() * b.len() * c.len());
    for x in a {
        for y in b {
            for z in c {
                out.push((x.clone(), y.clone(), z.clone()));
            }
        }
    }
    out
}

/// A value tagged with a monoid element or a state.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pair<A>(pub usize, pub A);

impl<A: fmt::Display> fmt::Display for Pair<A> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.0, self.1)
    }
}

/// A value shown by a fixed label.
#[derive(Clone)]
pub struct Labeled<T> {
    pub label: String,
    pub value: T,
}

impl<T> fmt::Display for Labeled<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

fn labeled<T>(label: impl Into<String>, value: T) -> Labeled<T> {
    Labeled {
        label: label.into(),
        value,
    }
}

/// Evaluate both sides of every input and summarise.
fn tally<I: fmt::Display, O: fmt::Display>(
    name: AxiomName,
    inputs: impl IntoIterator<Item = I>,
    eval: impl Fn(&I) -> (O, O),
    eq: impl Fn(&O, &O) -> Verdict,
) -> AxiomEntry {
    let mut entry = AxiomEntry {
        name,
        verdict: Verdict::Yes,
        cases: 0,
        failures: 0,
        unknowns: 0,
        predicted: false,
        witness: None,
        equations: Vec::new(),
    };
    let mut fuel = 0;
    for (i, input) in inputs.into_iter().enumerate() {
        let (lhs, rhs) = eval(&input);
        let v = eq(&lhs, &rhs);
        entry.cases += 1;
        let record = match v {
            Verdict::Yes => false,
            Verdict::No => {
                entry.failures += 1;
                entry.failures == 1
            }
            Verdict::Unknown { fuel_spent } => {
                entry.unknowns += 1;
                fuel = fuel.max(fuel_spent);
                entry.failures == 0 && entry.unknowns == 1
            }
        };
        if record {
            entry.witness = Some(Witness {
                case: i,
                input: input.to_string(),
                lhs: lhs.to_string(),
                rhs: rhs.to_string(),
            });
        }
    }
    entry.verdict = if entry.failures > 0 {
        Verdict::No
    } else if entry.unknowns > 0 {
        Verdict::Unknown { fuel_spent: fuel }
    } else {
        Verdict::Yes
    };
    entry
}

fn fun_eq<V: PartialEq>(fuel: u32) -> impl Fn(&FinFun<Delay<V>>, &FinFun<Delay<V>>) -> Verdict {
    move |a, b| {
        a.table
            .iter()
            .zip(&b.table)
            .fold(Verdict::Yes, |acc, (x, y)| acc.and(strong_equal(x, y, fuel)))
    }
}

fn delayed<A: Clone>(xs: &[A], max_steps: u32) -> Vec<Delay<A>> {
    let mut out = Vec::new();
    for s in 0..=max_steps {
        for x in xs {
            out.push(delay_n(s, x.clone()));
        }
    }
    out
}

fn doubly_delayed<A: Clone>(xs: &[A], max_steps: u32) -> Vec<Delay<Delay<A>>> {
    let mut out = Vec::new();
    for i in 0..=max_steps {
        for j in 0..=max_steps - i {
            for x in xs {
                out.push(delay_n(i, delay_n(j, x.clone())));
            }
        }
    }
    out
}

/// All maps `X → Y` with `|Y| ≤ 2`, for naturality.
fn atom_maps(n: usize) -> Vec<Labeled<FinFun<Atom>>> {
    let mut out = Vec::new();
    for m in 1..=2 {
        for f in all_functions(n, &atoms(m)) {
            out.push(labeled(format!("f={f}"), f));
        }
    }
    out
}

fn report(name: &str, u: &TestUniverse, start: Instant, axioms: Vec<AxiomEntry>) -> LawReport {
    LawReport {
        theory: name.to_string(),
        mode: "hand-written".into(),
        relation: u.relation,
        bounds: *u,
        case_counts: axioms.iter().map(|e| (e.name.to_string(), e.cases)).collect(),
        axioms,
        elapsed_ms: start.elapsed().as_millis() as u64,
    }
}

// Exceptions

/// `D X + E → D(X + E)`.
pub fn exceptions_dist<A: Leaf>(m: &ModelElement<Delay<A>>) -> Delay<ModelElement<A>> {
    match m {
        ModelElement::Value(d) => d.map(|a| ModelElement::Value(a.clone())),
        ModelElement::Raise(e) => now(ModelElement::Raise(*e)),
        other => panic!("not an exceptions element: {other}"),
    }
}

pub fn exceptions_candidate(n: usize) -> DistLawCandidate {
    let fm = builtin_model(&format!("exceptions(E={n})")).expect("built-in theory");
    custom_candidate(Rc::new(fm), CustomLaw::Exceptions)
}

// Reader

/// `D(X^R) → (D X)^R`: `now f ↦ λr. now(f r)`, `step d ↦ λr. step(ζ d r)`.
pub fn reader_dist<X: Clone>(d: &Delay<FinFun<X>>, r: usize) -> FinFun<Delay<X>> {
    FinFun::tabulate(r, |i| d.map(|f| f.at(i).clone()))
}

fn reader_mu<X: Clone>(ff: &FinFun<FinFun<X>>) -> FinFun<X> {
    FinFun::tabulate(ff.len(), |i| ff.at(i).at(i).clone())
}

pub fn check_reader(u: &TestUniverse, r: usize) -> Vec<AxiomEntry> {
    let xs = atoms(u.carrier_size);
    let rx = all_functions(r, &xs);
    let rrx = all_functions(r, &rx);
    let eq = fun_eq::<Atom>(u.fuel);
    let zeta = |d: &Delay<FinFun<Atom>>| reader_dist(d, r);
    vec![
        tally(AxiomName::UnitS, rx.clone(), |f| (zeta(&now(f.clone())), f.map(|x| now(*x))), &eq),
        tally(
            AxiomName::UnitT,
            delayed(&xs, u.max_steps),
            |d| (zeta(&d.map(|x| FinFun::constant(r, *x))), FinFun::constant(r, d.clone())),
            &eq,
        ),
        tally(
            AxiomName::MultS,
            doubly_delayed(&rx, u.max_steps),
            |dd| {
                let inner = reader_dist(&dd.map(|d| zeta(d)), r);
                (zeta(&join(dd)), inner.map(join))
            },
            &eq,
        ),
        tally(
            AxiomName::MultT,
            delayed(&rrx, u.max_steps),
            |d| {
                let outer = reader_dist(d, r).map(|e| zeta(e));
                (zeta(&d.map(reader_mu)), reader_mu(&outer))
            },
            &eq,
        ),
        tally(
            AxiomName::Naturality,
            atom_maps(xs.len())
                .into_iter()
                .flat_map(|f| delayed(&rx, u.max_steps).into_iter().map(move |d| (f.clone(), d)))
                .map(|(f, d)| labeled(format!("{f}, d={d}"), (f.value, d))),
            |l| {
                let (f, d) = &l.value;
                let app = |x: &Atom| *f.at(x.0 as usize);
                (zeta(&d.map(|g| g.map(app))), zeta(d).map(|e| e.map(app)))
            },
            &eq,
        ),
    ]
}

// Writer

/// A finite monoid given by its multiplication table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteMonoid {
    pub name: &'static str,
    pub table: Vec<Vec<usize>>,
    pub unit: usize,
}

impl FiniteMonoid {
    /// Booleans under conjunction; `1` is the unit.
    pub fn booleans_and() -> Self {
        FiniteMonoid {
            name: "(bool, ∧)",
            table: vec![vec![0, 0], vec![0, 1]],
            unit: 1,
        }
    }

    pub fn z2() -> Self {
        FiniteMonoid {
            name: "(Z/2, +)",
            table: vec![vec![0, 1], vec![1, 0]],
            unit: 0,
        }
    }

    pub fn size(&self) -> usize {
        self.table.len()
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.table[a][b]
    }

    pub fn is_monoid(&self) -> bool {
        let n = self.size();
        (0..n).all(|a| self.mul(self.unit, a) == a && self.mul(a, self.unit) == a)
            && (0..n).all(|a| (0..n).all(|b| (0..n).all(|c| self.mul(self.mul(a, b), c) == self.mul(a, self.mul(b, c)))))
    }
}

/// `M × D X → D(M × X)`: the output waits until the computation finishes.
pub fn writer_dist<X: Clone>(m: usize, d: &Delay<X>) -> Delay<Pair<X>> {
    d.map(|x| Pair(m, x.clone()))
}

pub fn check_writer(u: &TestUniverse, mon: &FiniteMonoid) -> Vec<AxiomEntry> {
    let xs = atoms(u.carrier_size);
    let ms: Vec<usize> = (0..mon.size()).collect();
    let dx = delayed(&xs, u.max_steps);
    let fuel = u.fuel;
    let eq = move |a: &Delay<Pair<Atom>>, b: &Delay<Pair<Atom>>| strong_equal(a, b, fuel);
    let pairs = |ds: Vec<Delay<Atom>>| -> Vec<Pair<Delay<Atom>>> {
        ms.iter().flat_map(|m| ds.iter().map(move |d| Pair(*m, d.clone()))).collect()
    };
    let nested: Vec<Pair<Pair<Delay<Atom>>>> = ms.iter().flat_map(|m| pairs(dx.clone()).into_iter().map(move |p| Pair(*m, p))).collect();
    let ddx = doubly_delayed(&xs, u.max_steps);
    let mdd: Vec<Pair<Delay<Delay<Atom>>>> = ms.iter().flat_map(|m| ddx.iter().map(move |d| Pair(*m, d.clone()))).collect();
    vec![
        tally(AxiomName::UnitS, dx.clone(), |d| (writer_dist(mon.unit, d), d.map(|x| Pair(mon.unit, *x))), eq),
        tally(
            AxiomName::UnitT,
            ms.iter().flat_map(|m| xs.iter().map(move |x| Pair(*m, *x))),
            |p| (writer_dist(p.0, &now(p.1)), now(p.clone())),
            eq,
        ),
        tally(
            AxiomName::MultS,
            nested,
            |p| {
                let Pair(m, Pair(n, d)) = p;
                let rhs = writer_dist(*m, &writer_dist(*n, d)).map(|q| Pair(mon.mul(q.0, q.1 .0), q.1 .1));
                (writer_dist(mon.mul(*m, *n), d), rhs)
            },
            eq,
        ),
        tally(
            AxiomName::MultT,
            mdd,
            |p| {
                let rhs = join(&writer_dist(p.0, &p.1).map(|q| writer_dist(q.0, &q.1)));
                (writer_dist(p.0, &join(&p.1)), rhs)
            },
            eq,
        ),
        tally(
            AxiomName::Naturality,
            atom_maps(xs.len())
                .into_iter()
                .flat_map(|f| pairs(dx.clone()).into_iter().map(move |p| (f.clone(), p)))
                .map(|(f, p)| labeled(format!("{f}, {p}"), (f.value, p))),
            |l| {
                let (f, p) = &l.value;
                let app = |x: &Atom| *f.at(x.0 as usize);
                (writer_dist(p.0, &p.1.map(app)), writer_dist(p.0, &p.1).map(|q| Pair(q.0, app(&q.1))))
            },
            eq,
        ),
    ]
}

// Yang–Baxter for reader, delay and writer

/// `M × X^R → (M × X)^R`.
pub fn reader_writer_dist<X: Clone>(m: usize, f: &FinFun<X>) -> FinFun<Pair<X>> {
    f.map(|x| Pair(m, x.clone()))
}

/// The two composites `W D R → R D W` built from the three laws.
pub fn yang_baxter_paths(m: usize, d: &Delay<FinFun<Atom>>, r: usize) -> (FinFun<Delay<Pair<Atom>>>, FinFun<Delay<Pair<Atom>>>) {
    // R σ ∘ τ D ∘ W λ
    let w_lambda = reader_dist(d, r);
    let tau_d = reader_writer_dist(m, &w_lambda);
    let path1 = tau_d.map(|p| writer_dist(p.0, &p.1));
    // λ W ∘ D τ ∘ σ R
    let sigma_r = writer_dist(m, d);
    let d_tau = sigma_r.map(|p| reader_writer_dist(p.0, &p.1));
    let path2 = reader_dist(&d_tau, r);
    (path1, path2)
}

pub fn yang_baxter_check(u: &TestUniverse, mon: &FiniteMonoid) -> AxiomEntry {
    let r = mon.size();
    let rx = all_functions(r, &atoms(u.carrier_size));
    let inputs: Vec<Pair<Delay<FinFun<Atom>>>> = (0..mon.size())
        .flat_map(|m| delayed(&rx, u.max_steps).into_iter().map(move |d| Pair(m, d)))
        .collect();
    tally(AxiomName::YangBaxter, inputs, |p| yang_baxter_paths(p.0, &p.1, r), fun_eq(u.fuel))
}

// Global state

/// `(D(S × X))^S`.
pub type DelayedState<X> = FinFun<Delay<Pair<X>>>;

#[derive(Clone, Copy, Debug)]
pub struct StateMonad {
    pub states: usize,
}

impl StateMonad {
    pub fn unit<X: Clone>(&self, x: &X) -> DelayedState<X> {
        FinFun::tabulate(self.states, |s| now(Pair(s, x.clone())))
    }

    pub fn bind<X: Clone, Y: Clone>(&self, m: &DelayedState<X>, k: impl Fn(&X) -> DelayedState<Y>) -> DelayedState<Y> {
        m.map(|run| run.bind(|p| k(&p.1).at(p.0).clone()))
    }

    pub fn elements(&self, xs: &[Atom], max_steps: u32) -> Vec<DelayedState<Atom>> {
        let outs: Vec<Pair<Atom>> = (0..self.states).flat_map(|s| xs.iter().map(move |x| Pair(s, *x))).collect();
        all_functions(self.states, &delayed(&outs, max_steps))
    }
}

/// A global-state algebra with a delay structure.
pub trait GsdAlgebra {
    type Elem: Clone + fmt::Display;
    fn states(&self) -> usize;
    fn lookup(&self, f: &FinFun<Self::Elem>) -> Self::Elem;
    fn update(&self, x: &Self::Elem, s: usize) -> Self::Elem;
    fn step(&self, x: &Self::Elem) -> Self::Elem;
    fn equal(&self, a: &Self::Elem, b: &Self::Elem) -> Verdict;
}

/// The canonical structure on `(D(S × X))^S`.
#[derive(Clone, Copy, Debug)]
pub struct DelayedStateGsd {
    pub states: usize,
    pub fuel: u32,
}

impl GsdAlgebra for DelayedStateGsd {
    type Elem = DelayedState<Atom>;

    fn states(&self) -> usize {
        self.states
    }

    fn lookup(&self, f: &FinFun<Self::Elem>) -> Self::Elem {
        FinFun::tabulate(self.states, |s| f.at(s).at(s).clone())
    }

    fn update(&self, x: &Self::Elem, s: usize) -> Self::Elem {
        FinFun::constant(self.states, x.at(s).clone())
    }

    fn step(&self, x: &Self::Elem) -> Self::Elem {
        x.map(|d| step(d.clone()))
    }

    fn equal(&self, a: &Self::Elem, b: &Self::Elem) -> Verdict {
        fun_eq(self.fuel)(a, b)
    }
}

/// The four global-state equations and the two step interactions.
pub fn check_gsd_laws<Y: GsdAlgebra>(y: &Y, samples: &[Y::Elem]) -> Vec<(&'static str, AxiomEntry)> {
    let n = y.states();
    let eq = |a: &Y::Elem, b: &Y::Elem| y.equal(a, b);
    let families: Vec<FinFun<Y::Elem>> = all_functions(n, samples);
    let show = |f: &FinFun<Y::Elem>| f.to_string();
    let mut out = Vec::new();
    let nested: Vec<Labeled<FinFun<FinFun<Y::Elem>>>> = all_functions(n, &families)
        .into_iter()
        .map(|f| labeled(f.map(|g| show(g)).to_string(), f))
        .collect();
    out.push((
        "lookup-lookup",
        tally(
            AxiomName::AlgebraLaws,
            nested,
            |f| {
                let f = &f.value;
                let lhs = y.lookup(&FinFun::tabulate(n, |s| y.lookup(f.at(s))));
                let rhs = y.lookup(&FinFun::tabulate(n, |s| f.at(s).at(s).clone()));
                (lhs, rhs)
            },
            eq,
        ),
    ));
    let single: Vec<Labeled<Y::Elem>> = samples.iter().map(|x| labeled(x.to_string(), x.clone())).collect();
    out.push((
        "lookup-update",
        tally(
            AxiomName::AlgebraLaws,
            single.clone(),
            |x| (y.lookup(&FinFun::tabulate(n, |s| y.update(&x.value, s))), x.value.clone()),
            eq,
        ),
    ));
    let fam_states: Vec<Labeled<(FinFun<Y::Elem>, usize)>> = families
        .iter()
        .flat_map(|g| (0..n).map(move |s| labeled(format!("g={g}, s={s}"), (g.clone(), s))))
        .collect();
    out.push((
        "update-lookup",
        tally(
            AxiomName::AlgebraLaws,
            fam_states.clone(),
            |l| {
                let (g, s) = &l.value;
                (y.update(&y.lookup(g), *s), y.update(g.at(*s), *s))
            },
            eq,
        ),
    ));
    let two_states: Vec<Labeled<(Y::Elem, usize, usize)>> = samples
        .iter()
        .flat_map(|x| (0..n).flat_map(move |s| (0..n).map(move |t| labeled(format!("x={x}, s={s}, t={t}"), (x.clone(), s, t)))))
        .collect();
    out.push((
        "update-update",
        tally(
            AxiomName::AlgebraLaws,
            two_states,
            |l| {
                let (x, s, t) = &l.value;
                (y.update(&y.update(x, *s), *t), y.update(x, *s))
            },
            eq,
        ),
    ));
    out.push((
        "step-lookup",
        tally(
            AxiomName::AlgebraLaws,
            families.iter().map(|g| labeled(g.to_string(), g.clone())),
            |g| (y.step(&y.lookup(&g.value)), y.lookup(&g.value.map(|x| y.step(x)))),
            eq,
        ),
    ));
    let x_states: Vec<Labeled<(Y::Elem, usize)>> = samples
        .iter()
        .flat_map(|x| (0..n).map(move |s| labeled(format!("x={x}, s={s}"), (x.clone(), s))))
        .collect();
    out.push((
        "update-step",
        tally(
            AxiomName::AlgebraLaws,
            x_states,
            |l| {
                let (x, s) = &l.value;
                (y.update(&y.step(x), *s), y.step(&y.update(x, *s)))
            },
            eq,
        ),
    ));
    out
}

/// `f̄(x) = lookup_Y(λs. f′(x s))` with `f′(now(s, x)) = update_Y(f x) s` and
/// `f′(step d) = step_Y(f′ d)`. `None` if a run does not finish within `fuel`.
pub fn gsd_extend<Y: GsdAlgebra>(
    y: &Y,
    f: impl Fn(&Atom) -> Y::Elem,
    x: &DelayedState<Atom>,
    fuel: u32,
) -> Option<Y::Elem> {
    let f_prime = |d: &Delay<Pair<Atom>>| -> Option<Y::Elem> {
        match d.force(fuel) {
            Outcome::Terminated(Pair(s, a), n) => {
                let mut out = y.update(&f(&a), s);
                for _ in 0..n {
                    out = y.step(&out);
                }
                Some(out)
            }
            _ => None,
        }
    };
    let runs = x.table.iter().map(f_prime).collect::<Option<Vec<_>>>()?;
    Some(y.lookup(&FinFun { table: runs }))
}

pub fn check_state(u: &TestUniverse, states: usize) -> Vec<AxiomEntry> {
    let sm = StateMonad { states };
    let xs = atoms(u.carrier_size);
    let steps = u.max_steps.min(2);
    let ms = sm.elements(&xs, steps);
    let samples: Vec<DelayedState<Atom>> = (0..4).map(|i| ms[(i * 37 + 5) % ms.len()].clone()).collect();
    let ks: Vec<FinFun<DelayedState<Atom>>> = all_functions(xs.len(), &samples);
    let eq = fun_eq::<Pair<Atom>>(u.fuel);
    let kf = |k: &FinFun<DelayedState<Atom>>| {
        let k = k.clone();
        move |x: &Atom| k.at(x.0 as usize).clone()
    };

    let left = xs.iter().flat_map(|x| ks.iter().map(move |k| labeled(format!("left unit: x={x}, k={k}"), (*x, k.clone()))));
    let right = ms.iter().map(|m| labeled(format!("right unit: m={m}"), (m.clone(), None)));
    let mut monad = tally(
        AxiomName::MonadLaws,
        left,
        |l| {
            let (x, k) = &l.value;
            (sm.bind(&sm.unit(x), kf(k)), k.at(x.0 as usize).clone())
        },
        &eq,
    );
    let r = tally(
        AxiomName::MonadLaws,
        right,
        |l: &Labeled<(DelayedState<Atom>, Option<()>)>| (sm.bind(&l.value.0, |x| sm.unit(x)), l.value.0.clone()),
        &eq,
    );
    let assoc = tally(
        AxiomName::MonadLaws,
        cross3(&ms, &ks, &ks)
            .into_iter()
            .map(|(m, f, g)| labeled(format!("assoc: m={m}, f={f}, g={g}"), (m, f, g))),
        |l| {
            let (m, f, g) = &l.value;
            let lhs = sm.bind(&sm.bind(m, kf(f)), kf(g));
            let rhs = sm.bind(m, |x| sm.bind(&kf(f)(x), kf(g)));
            (lhs, rhs)
        },
        &eq,
    );
    merge(&mut monad, r);
    merge(&mut monad, assoc);

    let step_count = tally(
        AxiomName::StepCount,
        ms.iter().flat_map(|m| ks.iter().map(move |k| labeled(format!("m={m}, k={k}"), (m.clone(), k.clone())))),
        |l| {
            let (m, k) = &l.value;
            let bound = sm.bind(m, kf(k));
            let actual: Vec<u32> = bound.table.iter().map(|d| d.steps().unwrap()).collect();
            let expected: Vec<u32> = m
                .table
                .iter()
                .map(|d| {
                    let (n, p) = d.normal_form().unwrap();
                    n + k.at(p.1 .0 as usize).at(p.0).steps().unwrap()
                })
                .collect();
            (FinFun { table: actual }, FinFun { table: expected })
        },
        |a, b| Verdict::from(a == b),
    );

    let y = DelayedStateGsd { states, fuel: u.fuel };
    let mut laws = AxiomEntry {
        name: AxiomName::AlgebraLaws,
        verdict: Verdict::Yes,
        cases: 0,
        failures: 0,
        unknowns: 0,
        predicted: false,
        witness: None,
        equations: Vec::new(),
    };
    for (_, e) in check_gsd_laws(&y, &samples) {
        merge(&mut laws, e);
    }

    let targets: Vec<FinFun<DelayedState<Atom>>> = all_functions(xs.len(), &samples);
    let mut extension = tally(
        AxiomName::Extension,
        targets
            .iter()
            .flat_map(|f| xs.iter().map(move |x| labeled(format!("f={f}, x={x}"), (f.clone(), *x)))),
        |l| {
            let (f, x) = &l.value;
            let fx = |a: &Atom| f.at(a.0 as usize).clone();
            (gsd_extend(&y, fx, &sm.unit(x), u.fuel).unwrap(), f.at(x.0 as usize).clone())
        },
        |a, b| y.equal(a, b),
    );
    merge(
        &mut extension,
        tally(
            AxiomName::Extension,
            ms.iter().map(|m| labeled(format!("f=η, m={m}"), m.clone())),
            |m| (gsd_extend(&y, |a| sm.unit(a), &m.value, u.fuel).unwrap(), m.value.clone()),
            |a, b| y.equal(a, b),
        ),
    );

    let f0 = &targets[targets.len() / 2];
    let fx = |a: &Atom| f0.at(a.0 as usize).clone();
    let ext = |m: &DelayedState<Atom>| gsd_extend(&y, fx, m, u.fuel).unwrap();
    let homs = ms
        .iter()
        .map(|m| labeled(format!("step: m={m}"), (0u8, m.clone(), 0usize, None)))
        .chain(ms.iter().flat_map(|m| (0..states).map(move |s| labeled(format!("update: m={m}, s={s}"), (1u8, m.clone(), s, None)))))
        .chain(all_functions(states, &samples).into_iter().map(|g| labeled(format!("lookup: {g}"), (2u8, g.at(0).clone(), 0, Some(g)))));
    let homomorphism = tally(
        AxiomName::Homomorphism,
        homs,
        |l| {
            let (kind, m, s, g) = &l.value;
            match kind {
                0 => (ext(&y.step(m)), y.step(&ext(m))),
                1 => (ext(&y.update(m, *s)), y.update(&ext(m), *s)),
                _ => {
                    let g = g.as_ref().unwrap();
                    (ext(&y.lookup(g)), y.lookup(&g.map(ext)))
                }
            }
        },
        |a, b| y.equal(a, b),
    );
    vec![monad, step_count, laws, extension, homomorphism]
}

fn merge(into: &mut AxiomEntry, other: AxiomEntry) {
    if into.witness.is_none() || (into.failures == 0 && other.failures > 0) {
        if let Some(mut w) = other.witness {
            w.case += into.cases as usize;
            into.witness = Some(w);
        }
    }
    into.cases += other.cases;
    into.failures += other.failures;
    into.unknowns += other.unknowns;
    into.verdict = if into.failures > 0 {
        Verdict::No
    } else if into.unknowns > 0 {
        into.verdict.and(other.verdict)
    } else {
        Verdict::Yes
    };
}

// Selection

/// A predicate `A → R`, with `R = 0..r`.
pub type Pred<A> = Rc<dyn Fn(&A) -> usize>;

/// `J A = (A → R) → A`.
pub struct Sel<A>(pub Rc<dyn Fn(&Pred<A>) -> A>);

impl<A> Clone for Sel<A> {
    fn clone(&self) -> Self {
        Sel(Rc::clone(&self.0))
    }
}

impl<A: Clone + 'static> Sel<A> {
    pub fn new(f: impl Fn(&Pred<A>) -> A + 'static) -> Self {
        Sel(Rc::new(f))
    }

    pub fn select(&self, p: &Pred<A>) -> A {
        (self.0)(p)
    }

    pub fn unit(a: A) -> Self {
        Sel::new(move |_| a.clone())
    }

    /// `J(h)(m) = λp. h(m(p ∘ h))`.
    pub fn map<B: Clone + 'static>(&self, h: Rc<dyn Fn(&A) -> B>) -> Sel<B> {
        let m = self.clone();
        Sel::new(move |p: &Pred<B>| {
            let (p, h2) = (Rc::clone(p), Rc::clone(&h));
            let pulled: Pred<A> = Rc::new(move |a| p(&h2(a)));
            h(&m.select(&pulled))
        })
    }
}

impl<A: Clone + 'static> Sel<Sel<A>> {
    /// `μ(F) = λp. F(λf. p(f p)) p`.
    pub fn flatten(&self) -> Sel<A> {
        let ff = self.clone();
        Sel::new(move |p: &Pred<A>| {
            let q = Rc::clone(p);
            let lifted: Pred<Sel<A>> = Rc::new(move |f: &Sel<A>| q(&f.select(&q)));
            ff.select(&lifted).select(p)
        })
    }
}

/// `D J → J D`: `ζ(now f) = λg. now f(λx. g(now x))`, `ζ(step d) = λg. step(ζ d g)`.
pub fn selection_dist<A: Clone + 'static>(d: &Delay<Sel<A>>) -> Sel<Delay<A>> {
    let d = d.clone();
    Sel::new(move |g: &Pred<Delay<A>>| {
        let g = Rc::clone(g);
        let at_now: Pred<A> = Rc::new(move |x: &A| g(&now(x.clone())));
        d.map(|f| f.select(&at_now))
    })
}

/// Predicates `D X → R` that see a value only if it arrives within `fuel` steps.
pub fn fuel_predicates(nx: usize, r: usize, fuel: u32) -> Vec<Labeled<Pred<Delay<Atom>>>> {
    all_functions(nx + 1, &(0..r).collect::<Vec<_>>())
        .into_iter()
        .map(|h| {
            let label = format!("g={h}");
            let h2 = h.clone();
            let p: Pred<Delay<Atom>> = Rc::new(move |d: &Delay<Atom>| match d.force(fuel) {
                Outcome::Terminated(x, _) => *h2.at(x.0 as usize),
                _ => *h2.at(nx),
            });
            labeled(label, p)
        })
        .collect()
}

fn table_pred(t: &FinFun<usize>) -> Pred<Atom> {
    let t = t.clone();
    Rc::new(move |x: &Atom| *t.at(x.0 as usize))
}

fn pred_index(p: &Pred<Atom>, nx: usize, r: usize) -> usize {
    (0..nx).rev().fold(0, |acc, x| acc * r + p(&Atom(x as u8)))
}

/// Selection functions given by their table over all predicates `X → R`.
pub fn selection_tables(nx: usize, r: usize) -> Vec<Labeled<Sel<Atom>>> {
    let preds = r.pow(nx as u32);
    all_functions(preds, &atoms(nx))
        .into_iter()
        .map(|t| {
            let label = t.to_string();
            let t2 = t.clone();
            labeled(label, Sel::new(move |p: &Pred<Atom>| *t2.at(pred_index(p, nx, r))))
        })
        .collect()
}

fn all_preds(nx: usize, r: usize) -> Vec<Pred<Atom>> {
    all_functions(nx, &(0..r).collect::<Vec<_>>()).iter().map(table_pred).collect()
}

/// Compares selections `J D X` on a predicate family.
struct SelDelayEq {
    preds: Vec<Labeled<Pred<Delay<Atom>>>>,
    fuel: u32,
}

/// Values of a `J D X` on each predicate of the family, for display and comparison.
pub struct Observed(pub Vec<Delay<Atom>>);

impl fmt::Display for Observed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|d| d.to_string()).collect();
        write!(f, "⟨{}⟩", parts.join(" | "))
    }
}

impl SelDelayEq {
    fn observe(&self, m: &Sel<Delay<Atom>>) -> Observed {
        Observed(self.preds.iter().map(|p| m.select(&p.value)).collect())
    }

    fn eq(&self) -> impl Fn(&Observed, &Observed) -> Verdict + '_ {
        move |a, b| {
            a.0.iter()
                .zip(&b.0)
                .fold(Verdict::Yes, |acc, (x, y)| acc.and(strong_equal(x, y, self.fuel)))
        }
    }
}

/// Kleisli extension of the composite `J∘D` induced by the law.
pub fn bind_jd<X: Clone + 'static, Y: Clone + 'static>(
    m: &Sel<Delay<X>>,
    k: Rc<dyn Fn(&X) -> Sel<Delay<Y>>>,
) -> Sel<Delay<Y>> {
    let h: Rc<dyn Fn(&Delay<X>) -> Sel<Delay<Y>>> = Rc::new(move |d: &Delay<X>| {
        let k = Rc::clone(&k);
        let inner = selection_dist(&d.map(|x| k(x)));
        inner.map(Rc::new(|dd: &Delay<Delay<Y>>| join(dd)))
    });
    m.map(h).flatten()
}

pub fn check_selection(u: &TestUniverse, r: usize, pred_fuel: u32) -> Vec<AxiomEntry> {
    let nx = u.carrier_size;
    let xs = atoms(nx);
    let jx = selection_tables(nx, r);
    let cmp = SelDelayEq {
        preds: fuel_predicates(nx, r, pred_fuel),
        fuel: u.fuel,
    };
    let eq = cmp.eq();
    let obs = |m: &Sel<Delay<Atom>>| cmp.observe(m);
    let now_h: Rc<dyn Fn(&Atom) -> Delay<Atom>> = Rc::new(|x: &Atom| now(*x));

    let unit_s = tally(AxiomName::UnitS, jx.iter().cloned(), |f| {
        (obs(&selection_dist(&now(f.value.clone()))), obs(&f.value.map(Rc::clone(&now_h))))
    }, &eq);
    let unit_t = tally(
        AxiomName::UnitT,
        delayed(&xs, u.max_steps),
        |d| (obs(&selection_dist(&d.map(|x| Sel::unit(*x)))), obs(&Sel::unit(d.clone()))),
        &eq,
    );
    let sels: Vec<Sel<Atom>> = jx.iter().map(|l| l.value.clone()).collect();
    let labels: Vec<String> = jx.iter().map(|l| l.label.clone()).collect();
    let dd_inputs = {
        let mut out = Vec::new();
        for i in 0..=u.max_steps {
            for j in 0..=u.max_steps - i {
                for (s, l) in sels.iter().zip(&labels) {
                    out.push(labeled(format!("{}·step ▸ {}·step ▸ {l}", i, j), delay_n(i, delay_n(j, s.clone()))));
                }
            }
        }
        out
    };
    let mult_s = tally(
        AxiomName::MultS,
        dd_inputs,
        |dd| {
            let lhs = selection_dist(&join(&dd.value));
            let inner = selection_dist(&dd.value.map(selection_dist));
            (obs(&lhs), obs(&inner.map(Rc::new(|x: &Delay<Delay<Atom>>| join(x)))))
        },
        &eq,
    );
    let mut jjx = Vec::new();
    for (a, la) in sels.iter().zip(&labels) {
        for (b, lb) in sels.iter().zip(&labels) {
            let (a2, b2) = (a.clone(), b.clone());
            let f = Sel::new(move |p: &Pred<Sel<Atom>>| if p(&a2) == 0 { a2.clone() } else { b2.clone() });
            for s in 0..=u.max_steps {
                jjx.push(labeled(format!("{s}·step ▸ (p ↦ if p({la}) = 0 then {la} else {lb})"), delay_n(s, f.clone())));
            }
        }
    }
    let mult_t = tally(
        AxiomName::MultT,
        jjx,
        |d| {
            let lhs = selection_dist(&d.value.map(|f| f.flatten()));
            let rhs = selection_dist(&d.value).map(Rc::new(|e: &Delay<Sel<Atom>>| selection_dist(e))).flatten();
            (obs(&lhs), obs(&rhs))
        },
        &eq,
    );
    let d_jx: Vec<Labeled<Delay<Sel<Atom>>>> = (0..=u.max_steps)
        .flat_map(|s| jx.iter().map(move |l| labeled(format!("{s}·step ▸ {}", l.label), delay_n(s, l.value.clone()))))
        .collect();
    let naturality = tally(
        AxiomName::Naturality,
        atom_maps(nx).into_iter().flat_map(|f| d_jx.iter().map(move |d| labeled(format!("{f}, d={d}"), (f.value.clone(), d.value.clone())))),
        |l| {
            let (f, d) = &l.value;
            let f2 = f.clone();
            let app: Rc<dyn Fn(&Atom) -> Atom> = Rc::new(move |x| *f2.at(x.0 as usize));
            let app2 = Rc::clone(&app);
            let lhs = selection_dist(&d.map(|m| m.map(Rc::clone(&app))));
            let rhs = selection_dist(d).map(Rc::new(move |e: &Delay<Atom>| e.map(|x| app2(x))));
            (obs(&lhs), obs(&rhs))
        },
        &eq,
    );

    let ms: Vec<Labeled<Sel<Delay<Atom>>>> = d_jx.iter().step_by(5).map(|d| labeled(format!("ζ({d})"), selection_dist(&d.value))).collect();
    let k_targets: Vec<Sel<Delay<Atom>>> = ms.iter().take(3).map(|m| m.value.clone()).collect();
    let ks: Vec<FinFun<usize>> = all_functions(nx, &(0..k_targets.len()).collect::<Vec<_>>());
    let kfun = |k: &FinFun<usize>| -> Rc<dyn Fn(&Atom) -> Sel<Delay<Atom>>> {
        let (k, ts) = (k.clone(), k_targets.clone());
        Rc::new(move |x: &Atom| ts[*k.at(x.0 as usize)].clone())
    };
    let unit_jd: Rc<dyn Fn(&Atom) -> Sel<Delay<Atom>>> = Rc::new(|x: &Atom| Sel::unit(now(*x)));
    let mut monad = tally(
        AxiomName::MonadLaws,
        xs.iter().flat_map(|x| ks.iter().map(move |k| labeled(format!("left unit: x={x}, k={k}"), (*x, k.clone())))),
        |l| {
            let (x, k) = &l.value;
            (obs(&bind_jd(&Sel::unit(now(*x)), kfun(k))), obs(&kfun(k)(x)))
        },
        &eq,
    );
    merge(
        &mut monad,
        tally(AxiomName::MonadLaws, ms.iter().cloned(), |m| (obs(&bind_jd(&m.value, Rc::clone(&unit_jd))), obs(&m.value)), &eq),
    );
    merge(
        &mut monad,
        tally(
            AxiomName::MonadLaws,
            cross3(&ms, &ks, &ks)
                .into_iter()
                .map(|(m, f, g)| labeled(format!("assoc: m={m}, f={f}, g={g}"), (m.value, f, g))),
            |l| {
                let (m, f, g) = &l.value;
                let (kf, kg) = (kfun(f), kfun(g));
                let lhs = bind_jd(&bind_jd(m, Rc::clone(&kf)), Rc::clone(&kg));
                let inner: Rc<dyn Fn(&Atom) -> Sel<Delay<Atom>>> = Rc::new(move |x| bind_jd(&kf(x), Rc::clone(&kg)));
                (obs(&lhs), obs(&bind_jd(m, inner)))
            },
            &eq,
        ),
    );
    vec![unit_s, unit_t, mult_s, mult_t, naturality, monad]
}

// Continuations

/// `α : D R → R` on `R = 0..size`: erase steps, with a default for values
/// that do not arrive within `fuel` steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DelayAlgebra {
    pub size: usize,
    pub default: usize,
    pub fuel: u32,
}

impl DelayAlgebra {
    pub fn alg(&self, d: &Delay<usize>) -> usize {
        match d.force(self.fuel) {
            Outcome::Terminated(r, _) => r,
            _ => self.default,
        }
    }
}

/// `C X = (X → R) → R` as a table over all predicates `X → R`.
pub type Cont = FinFun<usize>;

/// `α_{C X}(d)(g) = α_R(D(ev_g)(d))`: the algebra acts pointwise.
pub fn continuation_step_lift(r_alg: &DelayAlgebra, d: &Delay<Cont>, preds: usize) -> Cont {
    FinFun::tabulate(preds, |g| r_alg.alg(&d.map(|c| *c.at(g))))
}

/// Recover `α_R` from the lifted structure on `C R` at the identity predicate.
pub fn recovered_algebra(r_alg: &DelayAlgebra, d: &Delay<usize>) -> usize {
    let r = r_alg.size;
    let preds = r.pow(r as u32);
    let identity = (0..r).rev().fold(0, |acc, x| acc * r + x);
    let lifted = continuation_step_lift(r_alg, &d.map(|v| FinFun::constant(preds, *v)), preds);
    *lifted.at(identity)
}

/// `J^D X = (X → R) → D X`.
pub struct SelT<A>(pub Rc<dyn Fn(&Pred<A>) -> Delay<A>>);

impl<A> Clone for SelT<A> {
    fn clone(&self) -> Self {
        SelT(Rc::clone(&self.0))
    }
}

impl<A: Clone + 'static> SelT<A> {
    pub fn select(&self, p: &Pred<A>) -> Delay<A> {
        (self.0)(p)
    }

    /// `(m >>= k)(p) = m(λx. α(D p (k x p))) >>= (λx. k x p)`.
    pub fn bind<B: Clone + 'static>(&self, k: Rc<dyn Fn(&A) -> SelT<B>>, alg: DelayAlgebra) -> SelT<B> {
        let m = self.clone();
        SelT(Rc::new(move |p: &Pred<B>| {
            let (k1, p1) = (Rc::clone(&k), Rc::clone(p));
            let eps: Pred<A> = Rc::new(move |x: &A| alg.alg(&k1(x).select(&p1).map(|b| p1(b))));
            m.select(&eps).bind(|x| k(x).select(p))
        }))
    }
}

/// `φ(f) = λg. f(λx. g(now x))`.
pub fn phi<A: Clone + 'static>(f: &SelT<A>) -> Sel<Delay<A>> {
    let f = f.clone();
    Sel::new(move |g: &Pred<Delay<A>>| {
        let g = Rc::clone(g);
        let at_now: Pred<A> = Rc::new(move |x: &A| g(&now(x.clone())));
        f.select(&at_now)
    })
}

/// `ψ(f′) = λg′. f′(α_R ∘ D g′)`.
pub fn psi<A: Clone + 'static>(f: &Sel<Delay<A>>, alg: DelayAlgebra) -> SelT<A> {
    let f = f.clone();
    SelT(Rc::new(move |g: &Pred<A>| {
        let g = Rc::clone(g);
        let lifted: Pred<Delay<A>> = Rc::new(move |d: &Delay<A>| alg.alg(&d.map(|x| g(x))));
        f.select(&lifted)
    }))
}

fn selt_tables(nx: usize, r: usize, values: &[Delay<Atom>]) -> Vec<Labeled<SelT<Atom>>> {
    let preds = r.pow(nx as u32);
    all_functions(preds, values)
        .into_iter()
        .map(|t| {
            let label = t.to_string();
            let t2 = t.clone();
            labeled(label, SelT(Rc::new(move |p: &Pred<Atom>| t2.at(pred_index(p, nx, r)).clone())))
        })
        .collect()
}

pub fn check_continuation(u: &TestUniverse, r: usize, pred_fuel: u32) -> Vec<AxiomEntry> {
    let nx = u.carrier_size;
    let xs = atoms(nx);
    let alg = DelayAlgebra {
        size: r,
        default: 0,
        fuel: u.fuel,
    };
    let rs: Vec<usize> = (0..r).collect();
    let preds = r.pow(nx as u32);
    let conts = all_functions(preds, &rs);

    let mut laws = tally(
        AxiomName::AlgebraLaws,
        (0..r).flat_map(|v| (0..=5u32).map(move |n| Pair(n as usize, v))),
        |p| (alg.alg(&delay_n(p.0 as u32, p.1)), p.1),
        |a, b| Verdict::from(a == b),
    );
    merge(
        &mut laws,
        tally(
            AxiomName::AlgebraLaws,
            doubly_delayed(&rs, u.max_steps),
            |dd| (alg.alg(&join(dd)), alg.alg(&dd.map(|d| alg.alg(d)))),
            |a, b| Verdict::from(a == b),
        ),
    );
    merge(
        &mut laws,
        tally(
            AxiomName::AlgebraLaws,
            delayed(&conts, u.max_steps),
            |d| (continuation_step_lift(&alg, d, preds), d.value().cloned().unwrap()),
            |a, b| Verdict::from(a == b),
        ),
    );
    merge(
        &mut laws,
        tally(
            AxiomName::AlgebraLaws,
            doubly_delayed(&conts, u.max_steps),
            |dd| {
                let lhs = continuation_step_lift(&alg, &join(dd), preds);
                let rhs = continuation_step_lift(&alg, &dd.map(|d| continuation_step_lift(&alg, d, preds)), preds);
                (lhs, rhs)
            },
            |a, b| Verdict::from(a == b),
        ),
    );
    merge(
        &mut laws,
        tally(
            AxiomName::AlgebraLaws,
            delayed(&rs, u.max_steps),
            |d| (recovered_algebra(&alg, d), alg.alg(d)),
            |a, b| Verdict::from(a == b),
        ),
    );

    let values: Vec<Delay<Atom>> = delayed(&xs, 1);
    let retraction = tally(
        AxiomName::Retraction,
        selt_tables(nx, r, &values),
        |f| {
            let back = psi(&phi(&f.value), alg);
            let obs = |m: &SelT<Atom>| FinFun {
                table: all_preds(nx, r).iter().map(|p| m.select(p)).collect(),
            };
            (obs(&back), obs(&f.value))
        },
        fun_eq(u.fuel),
    );

    let family = fuel_predicates(nx, r, pred_fuel);
    let ms = selt_tables(nx, r, &xs.iter().map(|x| now(*x)).collect::<Vec<_>>());
    let late = pred_fuel + 1;
    let k_values: Vec<Delay<Atom>> = xs.iter().map(|x| now(*x)).chain(xs.iter().map(|x| delay_n(late, *x))).collect();
    let ks = all_functions(nx, &k_values);
    let const_selt = |d: &Delay<Atom>| {
        let d = d.clone();
        SelT(Rc::new(move |_: &Pred<Atom>| d.clone()))
    };
    let mut inputs = Vec::new();
    for m in &ms {
        for k in &ks {
            for g in &family {
                inputs.push(labeled(
                    format!("m={}, k={k}, {}", m.label, g.label),
                    (m.value.clone(), k.clone(), Rc::clone(&g.value)),
                ));
            }
        }
    }
    let mut monad_map = tally(
        AxiomName::MonadMap,
        inputs,
        |l| {
            let (m, k, g) = &l.value;
            let k2 = k.clone();
            let kt: Rc<dyn Fn(&Atom) -> SelT<Atom>> = Rc::new(move |x: &Atom| const_selt(k2.at(x.0 as usize)));
            let kt2 = Rc::clone(&kt);
            let kj: Rc<dyn Fn(&Atom) -> Sel<Delay<Atom>>> = Rc::new(move |x: &Atom| phi(&kt2(x)));
            let lhs = phi(&m.bind(kt, alg)).select(g);
            let rhs = bind_jd(&phi(m), kj).select(g);
            (lhs, rhs)
        },
        |a, b| strong_equal(a, b, u.fuel),
    );
    monad_map.predicted = true;
    vec![laws, retraction, monad_map]
}

// Free sum with an algebraic monad

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum SumLeaf<X> {
    Pure(X),
    Later(Rc<SumTD<X>>),
    /// An infinite chain of `later`s.
    Diverge,
}

/// `(T ⊕ D) X ≅ T(X + (T ⊕ D) X)`, with guarded subtrees held as `Later`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SumTD<X>(pub ModelElement<SumLeaf<X>>);

impl<X: fmt::Display> fmt::Display for SumLeaf<X> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SumLeaf::Pure(x) => write!(f, "{x}"),
            SumLeaf::Later(t) => write!(f, "▷({t})"),
            SumLeaf::Diverge => write!(f, "⊥"),
        }
    }
}

impl<X: fmt::Display> fmt::Display for SumTD<X> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Algebras for both `T` and delay.
pub trait TdAlgebra {
    type Elem: Leaf;
    fn alg(&self, t: &ModelElement<Self::Elem>) -> Self::Elem;
    fn step(&self, y: &Self::Elem) -> Self::Elem;
    fn diverge(&self) -> Self::Elem;
    fn op(&self, op: &str, args: &[Self::Elem]) -> Self::Elem;
    fn equal(&self, a: &Self::Elem, b: &Self::Elem) -> Verdict;
}

/// `D(T A)` with operations lifted in parallel.
pub struct ParallelDelayAlgebra {
    pub cand: DistLawCandidate,
    pub fuel: u32,
}

impl TdAlgebra for ParallelDelayAlgebra {
    type Elem = Delay<ModelElement<Atom>>;

    fn alg(&self, t: &ModelElement<Self::Elem>) -> Self::Elem {
        let fm = &self.cand.model;
        self.cand.apply(t).map(|tt| fm.join(tt))
    }

    fn step(&self, y: &Self::Elem) -> Self::Elem {
        step(y.clone())
    }

    fn diverge(&self) -> Self::Elem {
        Delay::Diverge
    }

    fn op(&self, op: &str, args: &[Self::Elem]) -> Self::Elem {
        self.cand.lift_op(op, args).expect("declared operation")
    }

    fn equal(&self, a: &Self::Elem, b: &Self::Elem) -> Verdict {
        crate::delay::strong_equal_by(a, b, |x, y| self.cand.model.model_equal(x, y), self.fuel)
    }
}

pub struct SumMonad {
    pub fm: Rc<FreeModel>,
}

impl SumMonad {
    pub fn pure<X: Leaf>(&self, x: X) -> SumTD<X> {
        SumTD(self.fm.unit(SumLeaf::Pure(x)))
    }

    pub fn later<X: Leaf>(&self, t: SumTD<X>) -> SumTD<X> {
        SumTD(self.fm.unit(SumLeaf::Later(Rc::new(t))))
    }

    pub fn diverge<X: Leaf>(&self) -> SumTD<X> {
        SumTD(self.fm.unit(SumLeaf::Diverge))
    }

    /// The `T`-algebra structure.
    pub fn node<X: Leaf>(&self, op: &str, args: Vec<SumTD<X>>) -> SumTD<X> {
        SumTD(self.fm.apply(op, args.into_iter().map(|a| a.0).collect()))
    }

    pub fn bind<X: Leaf, Y: Leaf>(&self, t: &SumTD<X>, k: &dyn Fn(&X) -> SumTD<Y>) -> SumTD<Y> {
        SumTD(self.fm.bind(&t.0, |leaf| match leaf {
            SumLeaf::Pure(x) => k(x).0,
            SumLeaf::Later(s) => self.fm.unit(SumLeaf::Later(Rc::new(self.bind(s, k)))),
            SumLeaf::Diverge => self.fm.unit(SumLeaf::Diverge),
        }))
    }

    /// Largest number of `later`s on a path to a leaf.
    pub fn guard_depth<X: Leaf>(&self, t: &SumTD<X>) -> usize {
        let leaves = self.fm.repr(&t.0);
        leaves
            .leaves()
            .into_iter()
            .map(|l| match l {
                SumLeaf::Later(s) => 1 + self.guard_depth(s),
                _ => 0,
            })
            .max()
            .unwrap_or(0)
    }

    /// `f̄ = α_Y ∘ T(g)`, `g(inl x) = f x`, `g(inr t) = step_Y(f̄ t)`.
    pub fn extend<X: Leaf, Y: TdAlgebra>(&self, y: &Y, f: &dyn Fn(&X) -> Y::Elem, t: &SumTD<X>) -> Y::Elem {
        let g = |leaf: &SumLeaf<X>| match leaf {
            SumLeaf::Pure(x) => f(x),
            SumLeaf::Later(s) => y.step(&self.extend(y, f, s)),
            SumLeaf::Diverge => y.diverge(),
        };
        y.alg(&self.fm.map(&t.0, g))
    }

    /// Interpret the representative term node by node.
    pub fn evaluate<X: Leaf, Y: TdAlgebra>(&self, y: &Y, f: &dyn Fn(&X) -> Y::Elem, t: &SumTD<X>) -> Y::Elem {
        let tree: Tree<SumLeaf<X>> = self.fm.repr(&t.0);
        tree.fold(
            &mut |leaf: &SumLeaf<X>| match leaf {
                SumLeaf::Pure(x) => f(x),
                SumLeaf::Later(s) => y.step(&self.evaluate(y, f, s)),
                SumLeaf::Diverge => y.diverge(),
            },
            &mut |op: &str, args: Vec<Y::Elem>| y.op(op, &args),
        )
    }

    /// Trees with at most two layers of operations or guards.
    pub fn sample_trees(&self, xs: &[Atom]) -> Vec<SumTD<Atom>> {
        let mut level0: Vec<SumLeaf<Atom>> = xs.iter().map(|x| SumLeaf::Pure(*x)).collect();
        level0.push(SumLeaf::Diverge);
        let d1 = self.fm.enumerate_elements(&level0, 1);
        let mut level1 = level0.clone();
        for t in &d1 {
            level1.push(SumLeaf::Later(Rc::new(SumTD(t.clone()))));
        }
        let mut out: Vec<SumTD<Atom>> = self.fm.enumerate_elements(&level1, 1).into_iter().map(SumTD).collect();
        out.sort();
        out.dedup();
        out
    }
}

pub fn check_sum(u: &TestUniverse, theory: &str) -> Result<Vec<AxiomEntry>, crate::theory::TheoryError> {
    let fm = Rc::new(builtin_model(theory)?);
    let sm = SumMonad { fm: Rc::clone(&fm) };
    let xs = atoms(u.carrier_size);
    let trees = sm.sample_trees(&xs);
    let eq = |a: &SumTD<Atom>, b: &SumTD<Atom>| Verdict::from(a == b);
    let targets: Vec<SumTD<Atom>> = vec![sm.pure(xs[0]), sm.later(sm.pure(*xs.last().unwrap())), trees[trees.len() / 2].clone()];
    let ks = all_functions(xs.len(), &(0..targets.len()).collect::<Vec<_>>());
    let kf = |k: &FinFun<usize>| {
        let (k, ts) = (k.clone(), targets.clone());
        move |x: &Atom| ts[*k.at(x.0 as usize)].clone()
    };
    let mut monad = tally(
        AxiomName::MonadLaws,
        xs.iter().flat_map(|x| ks.iter().map(move |k| labeled(format!("left unit: x={x}, k={k}"), (*x, k.clone())))),
        |l| {
            let (x, k) = &l.value;
            (sm.bind(&sm.pure(*x), &kf(k)), kf(k)(x))
        },
        eq,
    );
    merge(
        &mut monad,
        tally(AxiomName::MonadLaws, trees.iter().cloned(), |t| (sm.bind(t, &|x| sm.pure(*x)), t.clone()), eq),
    );
    merge(
        &mut monad,
        tally(
            AxiomName::MonadLaws,
            cross3(&trees, &ks, &ks)
                .into_iter()
                .map(|(t, f, g)| labeled(format!("assoc: t={t}, f={f}, g={g}"), (t, f, g))),
            |l| {
                let (t, f, g) = &l.value;
                let (kf_, kg) = (kf(f), kf(g));
                (sm.bind(&sm.bind(t, &kf_), &kg), sm.bind(t, &|x| sm.bind(&kf_(x), &kg)))
            },
            eq,
        ),
    );

    let y = ParallelDelayAlgebra {
        cand: induced_candidate(Rc::clone(&fm), LiftMode::Parallel),
        fuel: u.fuel,
    };
    let f = |x: &Atom| delay_n(x.0 as u32, fm.unit(*x));
    let yeq = |a: &Delay<ModelElement<Atom>>, b: &Delay<ModelElement<Atom>>| y.equal(a, b);
    let mut extension = tally(
        AxiomName::Extension,
        xs.clone(),
        |x| (sm.extend(&y, &f, &sm.pure(*x)), f(x)),
        yeq,
    );
    merge(
        &mut extension,
        tally(
            AxiomName::Extension,
            trees.iter().cloned(),
            |t| (sm.extend(&y, &f, t), sm.evaluate(&y, &f, t)),
            yeq,
        ),
    );
    let binary: Vec<String> = fm.ops().filter(|(_, a)| *a == 2).map(|(o, _)| o.to_string()).collect();
    let mut homomorphism = tally(
        AxiomName::Homomorphism,
        trees.iter().cloned(),
        |t| (sm.extend(&y, &f, &sm.later(t.clone())), y.step(&sm.extend(&y, &f, t))),
        yeq,
    );
    let small: Vec<SumTD<Atom>> = trees.iter().step_by(7).cloned().collect();
    for op in &binary {
        merge(
            &mut homomorphism,
            tally(
                AxiomName::Homomorphism,
                small.iter().flat_map(|a| small.iter().map(move |b| labeled(format!("{op}({a}, {b})"), (a.clone(), b.clone())))),
                |l| {
                    let (a, b) = &l.value;
                    let lhs = sm.extend(&y, &f, &sm.node(op, vec![a.clone(), b.clone()]));
                    let rhs = y.op(op, &[sm.extend(&y, &f, a), sm.extend(&y, &f, b)]);
                    (lhs, rhs)
                },
                yeq,
            ),
        );
    }
    Ok(vec![monad, extension, homomorphism])
}

/// Run the checks for one named combination.
pub fn run_combo(name: &str, u: &TestUniverse, theory: Option<&str>) -> Result<LawReport, ComboError> {
    let start = Instant::now();
    let strict = TestUniverse {
        relation: Relation::Strict,
        ..*u
    };
    let axioms = match name {
        "exceptions" => return Ok(run_suite(&exceptions_candidate(2), u)?),
        "reader" => check_reader(&strict, 2),
        "writer" => check_writer(&strict, &FiniteMonoid::booleans_and()),
        "yang-baxter" => vec![yang_baxter_check(&strict, &FiniteMonoid::booleans_and())],
        "state" => check_state(&strict, 2),
        "selection" => check_selection(&strict, 2, 2),
        "continuation" => check_continuation(&strict, 2, 2),
        "sum" => check_sum(&strict, theory.unwrap_or("monoid"))?,
        other => return Err(ComboError::Unknown(other.to_string())),
    };
    let label = match (name, theory) {
        ("sum", t) => format!("sum({} ⊕ D)", t.unwrap_or("monoid")),
        (n, _) => n.to_string(),
    };
    Ok(report(&label, &strict, start, axioms))
}

#[derive(Debug, thiserror::Error)]
pub enum ComboError {
    #[error("unknown combination `{0}` (expected one of: {})", COMBO_NAMES.join(", "))]
    Unknown(String),
    #[error(transparent)]
    Laws(#[from] LawError),
    #[error(transparent)]
    Theory(#[from] crate::theory::TheoryError),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> TestUniverse {
        TestUniverse {
            max_steps: 2,
            ..TestUniverse::default()
        }
    }

    fn all_yes(entries: &[AxiomEntry]) {
        for e in entries {
            assert!(e.verdict.is_yes(), "{} {:?}", e.name, e.witness);
            assert!(e.cases > 0, "{}", e.name);
        }
    }

    #[test]
    fn exceptions_clauses() {
        let fm = builtin_model("exceptions(E=2)").unwrap();
        let raised: ModelElement<Delay<Atom>> = ModelElement::Raise(1);
        assert_eq!(exceptions_dist(&raised), now(ModelElement::Raise(1)));
        let v = ModelElement::Value(delay_n(2, Atom(0)));
        assert_eq!(exceptions_dist(&v), delay_n(2, ModelElement::Value(Atom(0))));
        let cand = exceptions_candidate(2);
        for m in [raised, v, fm.unit(delay_n(1, Atom(1)))] {
            assert_eq!(cand.apply(&m), exceptions_dist(&m));
        }
        let r = run_combo("exceptions", &small(), None).unwrap();
        assert!(r.all_yes(), "{r}");
    }

    #[test]
    fn reader_clauses_and_axioms() {
        let f = FinFun { table: vec![Atom(1), Atom(0)] };
        assert_eq!(reader_dist(&now(f.clone()), 2), FinFun { table: vec![now(Atom(1)), now(Atom(0))] });
        assert_eq!(
            reader_dist(&delay_n(1, f), 2),
            FinFun {
                table: vec![delay_n(1, Atom(1)), delay_n(1, Atom(0))]
            }
        );
        all_yes(&check_reader(&small(), 2));
    }

    #[test]
    fn reader_lookup_commutes_with_step() {
        // In R∘D: lookup F = λr. F r r and step φ = λr. step(φ r).
        let rx = all_functions(2, &atoms(2));
        let rdx: Vec<FinFun<Delay<Atom>>> = delayed(&rx, 1).iter().map(|d| reader_dist(d, 2)).collect();
        for fam in all_functions(2, &rdx) {
            let lookup = reader_mu(&fam);
            let lhs = lookup.map(|d| step(d.clone()));
            let rhs = reader_mu(&fam.map(|phi| phi.map(|d| step(d.clone()))));
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn writer_clauses_and_axioms() {
        assert_eq!(writer_dist(1, &now(Atom(0))), now(Pair(1, Atom(0))));
        assert_eq!(writer_dist(0, &delay_n(3, Atom(1))), delay_n(3, Pair(0, Atom(1))));
        for mon in [FiniteMonoid::booleans_and(), FiniteMonoid::z2()] {
            assert!(mon.is_monoid());
            all_yes(&check_writer(&small(), &mon));
        }
    }

    #[test]
    fn writer_preserves_step_count() {
        for n in 0..6 {
            assert_eq!(writer_dist(1, &delay_n(n, Atom(0))).steps(), Some(n));
        }
    }

    #[test]
    fn yang_baxter_holds() {
        let e = yang_baxter_check(&small(), &FiniteMonoid::booleans_and());
        assert!(e.verdict.is_yes());
        let f = FinFun { table: vec![Atom(0), Atom(1)] };
        let (p1, p2) = yang_baxter_paths(1, &now(f.clone()), 2);
        assert_eq!(p1, p2);
        let (p1, _) = yang_baxter_paths(0, &delay_n(1, f), 2);
        assert_eq!(p1.at(1), &delay_n(1, Pair(0, Atom(1))));
    }

    #[test]
    fn state_unit_and_step_addition() {
        let sm = StateMonad { states: 2 };
        assert_eq!(sm.unit(&Atom(1)).at(1), &now(Pair(1, Atom(1))));
        let m = FinFun {
            table: vec![delay_n(2, Pair(1, Atom(0))), delay_n(2, Pair(0, Atom(1)))],
        };
        let k = |x: &Atom| FinFun::tabulate(2, |s| delay_n(1, Pair(s, *x)));
        let b = sm.bind(&m, k);
        assert!(b.table.iter().all(|d| d.steps() == Some(3)));
        all_yes(&check_state(&small(), 2));
    }

    /// `lookup` that always reads state 0.
    struct Forgetful(DelayedStateGsd);

    impl GsdAlgebra for Forgetful {
        type Elem = DelayedState<Atom>;
        fn states(&self) -> usize {
            self.0.states
        }
        fn lookup(&self, f: &FinFun<Self::Elem>) -> Self::Elem {
            f.at(0).clone()
        }
        fn update(&self, x: &Self::Elem, s: usize) -> Self::Elem {
            self.0.update(x, s)
        }
        fn step(&self, x: &Self::Elem) -> Self::Elem {
            self.0.step(x)
        }
        fn equal(&self, a: &Self::Elem, b: &Self::Elem) -> Verdict {
            self.0.equal(a, b)
        }
    }

    #[test]
    fn gsd_laws_report_the_failing_equation() {
        let sm = StateMonad { states: 2 };
        let samples: Vec<_> = sm.elements(&atoms(2), 1).into_iter().step_by(29).collect();
        let good = DelayedStateGsd { states: 2, fuel: 16 };
        assert!(check_gsd_laws(&good, &samples).iter().all(|(_, e)| e.verdict.is_yes()));
        let bad = Forgetful(good);
        let failing: Vec<&str> = check_gsd_laws(&bad, &samples).into_iter().filter(|(_, e)| e.verdict.is_no()).map(|(n, _)| n).collect();
        assert!(failing.contains(&"lookup-update"), "{failing:?}");
    }

    #[test]
    fn gsd_extension_clauses() {
        let sm = StateMonad { states: 2 };
        let y = DelayedStateGsd { states: 2, fuel: 16 };
        let f = |x: &Atom| FinFun::tabulate(2, |s| delay_n(x.0 as u32, Pair(1 - s, *x)));
        for x in atoms(2) {
            assert_eq!(gsd_extend(&y, f, &sm.unit(&x), 16).unwrap(), f(&x));
        }
        // f′(now(s, x)) = update_Y(f x) s, read back through lookup.
        let m = FinFun::constant(2, now(Pair(1, Atom(0))));
        let ext = gsd_extend(&y, f, &m, 16).unwrap();
        assert_eq!(ext, y.update(&f(&Atom(0)), 1));
        let one = StateMonad { states: 2 };
        for m in one.elements(&atoms(1), 2) {
            assert_eq!(gsd_extend(&y, |a| one.unit(a), &m, 16).unwrap(), m);
        }
    }

    #[test]
    fn selection_clauses() {
        let nx = 2;
        let tables = selection_tables(nx, 2);
        let f = &tables[6].value;
        let preds = fuel_predicates(nx, 2, 2);
        for g in &preds {
            let g2 = Rc::clone(&g.value);
            let at_now: Pred<Atom> = Rc::new(move |x| g2(&now(*x)));
            assert_eq!(selection_dist(&now(f.clone())).select(&g.value), now(f.select(&at_now)));
            assert_eq!(selection_dist(&delay_n(1, f.clone())).select(&g.value), delay_n(1, f.select(&at_now)));
        }
    }

    #[test]
    fn selection_axioms() {
        let u = TestUniverse {
            max_steps: 1,
            ..TestUniverse::default()
        };
        all_yes(&check_selection(&u, 2, 2));
    }

    #[test]
    fn delay_algebra_erases_steps() {
        let alg = DelayAlgebra { size: 2, default: 0, fuel: 16 };
        for r in 0..2 {
            assert_eq!(alg.alg(&now(r)), r);
            for n in 0..=5 {
                assert_eq!(alg.alg(&delay_n(n, r)), r);
            }
        }
        assert_eq!(alg.alg(&Delay::Diverge), 0);
    }

    #[test]
    fn continuation_lift_retraction_and_monad_map() {
        let alg = DelayAlgebra { size: 2, default: 0, fuel: 16 };
        let c = FinFun { table: vec![1, 0, 0, 1] };
        let lifted = continuation_step_lift(&alg, &delay_n(2, c.clone()), 4);
        for g in 0..4 {
            assert_eq!(lifted.at(g), &alg.alg(&delay_n(2, *c.at(g))));
        }
        let entries = check_continuation(&small(), 2, 2);
        let get = |n| entries.iter().find(|e| e.name == n).unwrap();
        assert!(get(AxiomName::AlgebraLaws).verdict.is_yes());
        assert!(get(AxiomName::Retraction).verdict.is_yes());
        let mm = get(AxiomName::MonadMap);
        assert_eq!(mm.verdict, Verdict::No);
        assert!(mm.predicted);
        assert!(mm.witness.is_some());
    }

    #[test]
    fn sum_bind_substitutes_at_pure_leaves() {
        let fm = Rc::new(builtin_model("magma").unwrap());
        let sm = SumMonad { fm: Rc::clone(&fm) };
        let (a, b) = (Atom(0), Atom(1));
        let t = sm.node("mul", vec![sm.pure(a), sm.later(sm.pure(b))]);
        let k = |x: &Atom| sm.node("mul", vec![sm.pure(*x), sm.pure(*x)]);
        let expected = sm.node("mul", vec![k(&a), sm.later(k(&b))]);
        assert_eq!(sm.bind(&t, &k), expected);
        assert_eq!(sm.bind(&sm.pure(a), &k), k(&a));
    }

    #[test]
    fn sum_bind_preserves_guards() {
        let fm = Rc::new(builtin_model("monoid").unwrap());
        let sm = SumMonad { fm };
        let xs = atoms(2);
        for t in sm.sample_trees(&xs) {
            let relabel = sm.bind(&t, &|x: &Atom| sm.pure(Atom(1 - x.0)));
            assert_eq!(sm.guard_depth(&relabel), sm.guard_depth(&t));
            let guarded = sm.bind(&t, &|x: &Atom| sm.later(sm.pure(*x)));
            let has_pure = format!("{t}").contains('a') || format!("{t}").contains('b');
            if has_pure {
                assert!(sm.guard_depth(&guarded) >= sm.guard_depth(&t));
            }
        }
    }

    #[test]
    fn sum_extension_and_uniqueness_sample() {
        for th in ["magma", "monoid"] {
            all_yes(&check_sum(&small(), th).unwrap());
        }
        // A step-erasing map agrees with f on pure trees but is not a delay homomorphism.
        let fm = Rc::new(builtin_model("monoid").unwrap());
        let sm = SumMonad { fm: Rc::clone(&fm) };
        let y = ParallelDelayAlgebra {
            cand: induced_candidate(Rc::clone(&fm), LiftMode::Parallel),
            fuel: 16,
        };
        let f = |x: &Atom| now(fm.unit(*x));
        let erase = |t: &SumTD<Atom>| -> Delay<ModelElement<Atom>> {
            let v = sm.extend(&y, &f, t);
            v.value().map(|m| now(m.clone())).unwrap_or(Delay::Diverge)
        };
        let t = sm.pure(Atom(0));
        assert_eq!(erase(&t), f(&Atom(0)));
        assert!(y.equal(&erase(&sm.later(t.clone())), &y.step(&erase(&t))).is_no());
    }

    #[test]
    fn all_combos_run() {
        let u = TestUniverse {
            max_steps: 1,
            ..TestUniverse::default()
        };
        for name in COMBO_NAMES {
            let r = run_combo(name, &u, None).unwrap();
            assert!(r.unexpected_failures().is_empty(), "{r}");
        }
        assert!(run_combo("nope", &u, None).is_err());
    }
}
