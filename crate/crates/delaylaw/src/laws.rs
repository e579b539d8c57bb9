//! Exhaustive checking of Beck's axioms, naturality, equation
//! preservation and composite monad laws on small universes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::delay::{delay_n, join, now, strong_equal_by, weak_bisim, Delay, Verdict};
use crate::freemodel::{atoms, Atom, FreeModel, Leaf, ModelElement};
use crate::lifting::{lift_term, DistLawCandidate, LawKind, LiftMode};
use crate::theory::{classify_equation, predict_composability, EquationClass, SeqPrediction};

/// Largest number of enumerated cases a universe may contain.
pub const CASE_BUDGET: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Strict,
    WeakBisim,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Relation::Strict => write!(f, "strict"),
            Relation::WeakBisim => write!(f, "weak"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TestUniverse {
    pub carrier_size: usize,
    pub max_steps: u32,
    pub max_depth: usize,
    pub relation: Relation,
    pub include_diverge: bool,
    pub fuel: u32,
}

impl Default for TestUniverse {
    fn default() -> Self {
        TestUniverse {
            carrier_size: 2,
            max_steps: 3,
            max_depth: 2,
            relation: Relation::Strict,
            include_diverge: false,
            fuel: 64,
        }
    }
}

impl TestUniverse {
    pub fn with_relation(self, relation: Relation) -> Self {
        TestUniverse { relation, ..self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AxiomName {
    UnitS,
    UnitT,
    MultS,
    MultT,
    Naturality,
    MonadLaws,
    EquationPreservation,
    YangBaxter,
    AlgebraLaws,
    Extension,
    Homomorphism,
    StepCount,
    Retraction,
    MonadMap,
}

impl AxiomName {
    pub const BECK: [AxiomName; 4] = [AxiomName::UnitS, AxiomName::UnitT, AxiomName::MultS, AxiomName::MultT];

    pub fn describe(self) -> &'static str {
        match self {
            AxiomName::UnitS => "ζ ∘ η^T D = D η^T",
            AxiomName::UnitT => "ζ ∘ T η^D = η^D T",
            AxiomName::MultS => "ζ ∘ μ^T D = D μ^T ∘ ζ T ∘ T ζ",
            AxiomName::MultT => "ζ ∘ T μ^D = μ^D T ∘ D ζ ∘ ζ D",
            AxiomName::Naturality => "ζ_Y ∘ T D f = D T f ∘ ζ_X",
            AxiomName::MonadLaws => "unit and associativity of D∘T",
            AxiomName::EquationPreservation => "⟦s⟧ = ⟦t⟧ for every equation",
            AxiomName::YangBaxter => "R σ ∘ τ D ∘ W λ = λ W ∘ D τ ∘ σ R",
            AxiomName::AlgebraLaws => "algebra structure satisfies its equations",
            AxiomName::Extension => "f̄ ∘ η = f",
            AxiomName::Homomorphism => "f̄ preserves the operations",
            AxiomName::StepCount => "steps add up through bind",
            AxiomName::Retraction => "ψ ∘ φ = id",
            AxiomName::MonadMap => "φ commutes with the multiplications",
        }
    }
}

impl fmt::Display for AxiomName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub case: usize,
    pub input: String,
    pub lhs: String,
    pub rhs: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquationResult {
    pub name: String,
    pub equation: String,
    pub class: EquationClass,
    pub verdict: Verdict,
    pub predicted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxiomEntry {
    pub name: AxiomName,
    pub verdict: Verdict,
    pub cases: u64,
    pub failures: u64,
    pub unknowns: u64,
    /// A failure here is what the theory predicts.
    pub predicted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub equations: Vec<EquationResult>,
}

impl AxiomEntry {
    /// A failing verdict that was not predicted.
    pub fn unexpected_failure(&self) -> bool {
        self.verdict.is_no() && !self.predicted
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LawReport {
    pub theory: String,
    pub mode: String,
    pub relation: Relation,
    pub bounds: TestUniverse,
    pub axioms: Vec<AxiomEntry>,
    pub case_counts: BTreeMap<String, u64>,
    pub elapsed_ms: u64,
}

impl LawReport {
    pub fn entry(&self, name: AxiomName) -> Option<&AxiomEntry> {
        self.axioms.iter().find(|e| e.name == name)
    }

    pub fn all_yes(&self) -> bool {
        self.axioms.iter().all(|e| e.verdict.is_yes())
    }

    pub fn any_unknown(&self) -> bool {
        self.axioms.iter().any(|e| e.verdict.is_unknown())
    }

    pub fn unexpected_failures(&self) -> Vec<AxiomName> {
        self.axioms.iter().filter(|e| e.unexpected_failure()).map(|e| e.name).collect()
    }
}

impl fmt::Display for LawReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = &self.bounds;
        writeln!(
            f,
            "theory {}  lift {}  up to {}  (|X|={}, steps≤{}, depth≤{}, fuel {}{})",
            self.theory,
            self.mode,
            self.relation,
            b.carrier_size,
            b.max_steps,
            b.max_depth,
            b.fuel,
            if b.include_diverge { ", with ⊥" } else { "" }
        )?;
        for e in &self.axioms {
            let note = if e.verdict.is_no() && e.predicted { "  (predicted)" } else { "" };
            writeln!(
                f,
                "  {:<22} {:<18} {:>8} cases  {}{}",
                e.name.to_string(),
                e.verdict.to_string(),
                e.cases,
                e.name.describe(),
                note
            )?;
            for eq in &e.equations {
                let note = if eq.verdict.is_no() && eq.predicted { "  (predicted)" } else { "" };
                writeln!(f, "      {:<14} [{}] {}{}", eq.name, eq.class, eq.verdict, note)?;
                if let (Some(w), true) = (&eq.witness, !eq.verdict.is_yes()) {
                    writeln!(f, "        input {}\n        lhs   {}\n        rhs   {}", w.input, w.lhs, w.rhs)?;
                }
            }
            if let (Some(w), true) = (&e.witness, !e.verdict.is_yes()) {
                writeln!(f, "      witness #{}: {}", w.case, w.input)?;
                writeln!(f, "        lhs  {}", w.lhs)?;
                writeln!(f, "        rhs  {}", w.rhs)?;
            }
        }
        write!(f, "  elapsed {} ms", self.elapsed_ms)
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum LawError {
    #[error("enumeration of {shape} exceeds the case budget (more than {estimate} cases); lower the bounds")]
    BudgetExceeded { shape: String, estimate: usize },
}

/// Inputs for the axioms: `D X`, `T X`, `T(D X)`, `T(D(D X))`, `T(T(D X))`.
pub struct Universe {
    pub dx: Vec<Delay<Atom>>,
    pub tx: Vec<ModelElement<Atom>>,
    pub tdx: Vec<ModelElement<Delay<Atom>>>,
    pub tddx: Vec<ModelElement<Delay<Delay<Atom>>>>,
    pub ttdx: Vec<ModelElement<ModelElement<Delay<Atom>>>>,
}

impl Universe {
    pub fn total(&self) -> usize {
        self.dx.len() + self.tx.len() + self.tdx.len() + self.tddx.len() + self.ttdx.len()
    }
}

fn enumerate<A: Leaf>(fm: &FreeModel, gens: &[A], depth: usize, shape: &str, budget: usize) -> Result<Vec<ModelElement<A>>, LawError> {
    fm.enumerate_bounded(gens, depth, budget).ok_or_else(|| LawError::BudgetExceeded {
        shape: shape.to_string(),
        estimate: budget,
    })
}

fn delayed_atoms(u: &TestUniverse) -> Vec<Delay<Atom>> {
    let mut out = Vec::new();
    for s in 0..=u.max_steps {
        for a in atoms(u.carrier_size) {
            out.push(delay_n(s, a));
        }
    }
    if u.include_diverge {
        out.push(Delay::Diverge);
    }
    out
}

/// Nested delays share the step budget between their two layers.
fn doubly_delayed_atoms(u: &TestUniverse) -> Vec<Delay<Delay<Atom>>> {
    let mut out = Vec::new();
    for outer in 0..=u.max_steps {
        for inner in 0..=u.max_steps - outer {
            for a in atoms(u.carrier_size) {
                out.push(delay_n(outer, delay_n(inner, a)));
            }
        }
    }
    if u.include_diverge {
        out.push(Delay::Diverge);
        out.push(now(Delay::Diverge));
    }
    out
}

pub fn enumerate_universe(fm: &FreeModel, u: &TestUniverse) -> Result<Universe, LawError> {
    let dx = delayed_atoms(u);
    let tx = enumerate(fm, &atoms(u.carrier_size), u.max_depth, "T X", CASE_BUDGET)?;
    let tdx = enumerate(fm, &dx, u.max_depth, "T(D X)", CASE_BUDGET)?;
    let tddx = enumerate(fm, &doubly_delayed_atoms(u), u.max_depth, "T(D(D X))", CASE_BUDGET)?;
    // The two T layers share the depth budget.
    let mut ttdx = BTreeSet::new();
    for outer in 0..=u.max_depth {
        let inner = enumerate(fm, &dx, u.max_depth - outer, "T(D X)", CASE_BUDGET)?;
        for t in enumerate(fm, &inner, outer, "T(T(D X))", CASE_BUDGET)? {
            ttdx.insert(t);
            if ttdx.len() > CASE_BUDGET {
                return Err(LawError::BudgetExceeded {
                    shape: "T(T(D X))".into(),
                    estimate: CASE_BUDGET,
                });
            }
        }
    }
    let universe = Universe {
        dx,
        tx,
        tdx,
        tddx,
        ttdx: ttdx.into_iter().collect(),
    };
    if universe.total() > CASE_BUDGET {
        return Err(LawError::BudgetExceeded {
            shape: "universe".into(),
            estimate: universe.total(),
        });
    }
    Ok(universe)
}

type Dt<A> = Delay<ModelElement<A>>;

/// Compare two `D(T A)` values under the chosen relation.
pub fn compare<A: Leaf>(fm: &FreeModel, u: &TestUniverse, a: &Dt<A>, b: &Dt<A>) -> Verdict {
    match u.relation {
        Relation::Strict => strong_equal_by(a, b, |x, y| fm.model_equal(x, y), u.fuel),
        Relation::WeakBisim => weak_bisim(a, b, |x, y| fm.model_equal(x, y), u.fuel),
    }
}

#[derive(Default)]
struct Tally {
    cases: u64,
    failures: u64,
    unknowns: u64,
    fuel: u32,
    first_failure: Option<usize>,
    first_unknown: Option<usize>,
}

impl Tally {
    fn record(&mut self, idx: usize, v: Verdict) {
        self.cases += 1;
        match v {
            Verdict::Yes => {}
            Verdict::No => {
                self.failures += 1;
                self.first_failure.get_or_insert(idx);
            }
            Verdict::Unknown { fuel_spent } => {
                self.unknowns += 1;
                self.fuel = self.fuel.max(fuel_spent);
                self.first_unknown.get_or_insert(idx);
            }
        }
    }

    fn verdict(&self) -> Verdict {
        if self.failures > 0 {
            Verdict::No
        } else if self.unknowns > 0 {
            Verdict::Unknown { fuel_spent: self.fuel }
        } else {
            Verdict::Yes
        }
    }

    fn witness_case(&self) -> Option<usize> {
        self.first_failure.or(self.first_unknown)
    }
}

/// Drives the checks for one candidate over one universe.
pub struct Checker<'a> {
    pub cand: &'a DistLawCandidate,
    pub u: TestUniverse,
    pub universe: Universe,
    functions: Vec<(usize, Vec<u8>)>,
    kleisli: Vec<Vec<Dt<Atom>>>,
    dtx: Vec<Dt<Atom>>,
}

/// The two sides of one case, with a printable input.
pub struct CasePaths {
    pub input: String,
    pub lhs: Dt<Atom>,
    pub rhs: Dt<Atom>,
}

impl<'a> Checker<'a> {
    pub fn new(cand: &'a DistLawCandidate, u: TestUniverse) -> Result<Self, LawError> {
        let fm = &*cand.model;
        let universe = enumerate_universe(fm, &u)?;
        let n = u.carrier_size;
        let mut functions = Vec::new();
        for m in 1..=2usize {
            for code in 0..m.pow(n as u32) {
                let mut c = code;
                let table = (0..n)
                    .map(|_| {
                        let v = (c % m) as u8;
                        c /= m;
                        v
                    })
                    .collect();
                functions.push((m, table));
            }
        }
        let samples = kleisli_samples(fm, n);
        let mut kleisli = Vec::new();
        let count = samples.len().pow(n as u32).min(64);
        for code in 0..count {
            let mut c = code;
            kleisli.push(
                (0..n)
                    .map(|_| {
                        let v = samples[c % samples.len()].clone();
                        c /= samples.len();
                        v
                    })
                    .collect(),
            );
        }
        let mut dtx = Vec::new();
        for s in 0..=u.max_steps {
            for t in &universe.tx {
                dtx.push(delay_n(s, t.clone()));
            }
        }
        if u.include_diverge {
            dtx.push(Delay::Diverge);
        }
        Ok(Checker {
            cand,
            u,
            universe,
            functions,
            kleisli,
            dtx,
        })
    }

    fn fm(&self) -> &FreeModel {
        &self.cand.model
    }

    fn zeta<A: Leaf>(&self, m: &ModelElement<Delay<A>>) -> Dt<A> {
        self.cand.apply(m)
    }

    /// Kleisli extension of the composite monad `D∘T`.
    pub fn composite_bind(&self, m: &Dt<Atom>, k: &dyn Fn(&Atom) -> Dt<Atom>) -> Dt<Atom> {
        let fm = self.fm();
        let inner = m.map(|t| {
            let tdt = fm.map(t, k);
            self.zeta(&tdt).map(|tt| fm.join(tt))
        });
        join(&inner)
    }

    pub fn case_count(&self, axiom: AxiomName) -> usize {
        let un = &self.universe;
        match axiom {
            AxiomName::UnitS => un.dx.len(),
            AxiomName::UnitT => un.tx.len(),
            AxiomName::MultS => un.ttdx.len(),
            AxiomName::MultT => un.tddx.len(),
            AxiomName::Naturality => self.functions.len() * un.tdx.len(),
            AxiomName::MonadLaws => {
                let k = self.kleisli.len();
                self.u.carrier_size * k + self.dtx.len() + self.dtx.len() * k * k
            }
            _ => 0,
        }
    }

    /// Evaluate both sides of case `i` of an axiom.
    pub fn case_paths(&self, axiom: AxiomName, i: usize) -> CasePaths {
        let fm = self.fm();
        let un = &self.universe;
        match axiom {
            AxiomName::UnitS => {
                let d = &un.dx[i];
                CasePaths {
                    input: d.to_string(),
                    lhs: self.zeta(&fm.unit(d.clone())),
                    rhs: d.map(|a| fm.unit(*a)),
                }
            }
            AxiomName::UnitT => {
                let t = &un.tx[i];
                CasePaths {
                    input: t.to_string(),
                    lhs: self.zeta(&fm.map(t, |a| now(*a))),
                    rhs: now(t.clone()),
                }
            }
            AxiomName::MultS => {
                let tt = &un.ttdx[i];
                let lhs = self.zeta(&fm.join(tt));
                let inner = fm.map(tt, |t| self.zeta(t));
                let rhs = self.zeta(&inner).map(|x| fm.join(x));
                CasePaths {
                    input: tt.to_string(),
                    lhs,
                    rhs,
                }
            }
            AxiomName::MultT => {
                let t = &un.tddx[i];
                let lhs = self.zeta(&fm.map(t, join));
                let outer = self.zeta(t);
                let rhs = join(&outer.map(|x| self.zeta(x)));
                CasePaths {
                    input: t.to_string(),
                    lhs,
                    rhs,
                }
            }
            AxiomName::Naturality => {
                let n = un.tdx.len();
                let (m, table) = &self.functions[i / n];
                let t = &un.tdx[i % n];
                let f = |a: &Atom| Atom(table[a.0 as usize]);
                let lhs = self.zeta(&fm.map(t, |d| d.map(f)));
                let rhs = self.zeta(t).map(|x| fm.map(x, f));
                CasePaths {
                    input: format!("f={} into {} elements, t={}", fmt_table(table), m, t),
                    lhs,
                    rhs,
                }
            }
            AxiomName::MonadLaws => self.monad_case(i),
            other => panic!("{other} has no enumerated cases here"),
        }
    }

    fn monad_case(&self, mut i: usize) -> CasePaths {
        let fm = self.fm();
        let n = self.u.carrier_size;
        let k = self.kleisli.len();
        let eta = |a: &Atom| now(fm.unit(*a));
        if i < n * k {
            let a = Atom((i / k) as u8);
            let f = &self.kleisli[i % k];
            return CasePaths {
                input: format!("left unit: x={a}, k={}", fmt_arrow(f)),
                lhs: self.composite_bind(&eta(&a), &|x| f[x.0 as usize].clone()),
                rhs: f[a.0 as usize].clone(),
            };
        }
        i -= n * k;
        if i < self.dtx.len() {
            let m = &self.dtx[i];
            return CasePaths {
                input: format!("right unit: m={m}"),
                lhs: self.composite_bind(m, &eta),
                rhs: m.clone(),
            };
        }
        i -= self.dtx.len();
        let m = &self.dtx[i / (k * k)];
        let f = &self.kleisli[(i / k) % k];
        let g = &self.kleisli[i % k];
        let fk = |x: &Atom| f[x.0 as usize].clone();
        let gk = |x: &Atom| g[x.0 as usize].clone();
        let lhs = self.composite_bind(&self.composite_bind(m, &fk), &gk);
        let rhs = self.composite_bind(m, &|x| self.composite_bind(&fk(x), &gk));
        CasePaths {
            input: format!("assoc: m={m}, f={}, g={}", fmt_arrow(f), fmt_arrow(g)),
            lhs,
            rhs,
        }
    }

    fn witness(&self, axiom: AxiomName, i: usize) -> Witness {
        let p = self.case_paths(axiom, i);
        Witness {
            case: i,
            input: p.input,
            lhs: p.lhs.to_string(),
            rhs: p.rhs.to_string(),
        }
    }

    pub fn check(&self, axiom: AxiomName) -> AxiomEntry {
        if axiom == AxiomName::EquationPreservation {
            return self.check_equations();
        }
        let fm = self.fm();
        let mut tally = Tally::default();
        for i in 0..self.case_count(axiom) {
            let p = self.case_paths(axiom, i);
            tally.record(i, compare(fm, &self.u, &p.lhs, &p.rhs));
        }
        AxiomEntry {
            name: axiom,
            verdict: tally.verdict(),
            cases: tally.cases,
            failures: tally.failures,
            unknowns: tally.unknowns,
            predicted: predicted_failure(self.cand, axiom, self.u.relation),
            witness: tally.witness_case().map(|i| self.witness(axiom, i)),
            equations: Vec::new(),
        }
    }

    fn env_values(&self) -> Vec<Dt<Atom>> {
        let fm = self.fm();
        let tx = fm.enumerate_elements(&atoms(self.u.carrier_size), self.u.max_depth.min(1));
        let mut out = Vec::new();
        for s in 0..=self.u.max_steps {
            for t in &tx {
                out.push(delay_n(s, t.clone()));
            }
        }
        if self.u.include_diverge {
            out.push(Delay::Diverge);
        }
        out
    }

    fn check_equations(&self) -> AxiomEntry {
        let fm = self.fm();
        let values = self.env_values();
        let mut results = Vec::new();
        let mut total = Tally::default();
        for eq in &fm.theory().equations {
            let class = classify_equation(eq);
            let mut tally = Tally::default();
            let n = eq.context.len();
            let cases = values.len().pow(n as u32);
            let env_of = |mut code: usize| {
                let mut env = BTreeMap::new();
                for v in &eq.context {
                    env.insert(v.clone(), values[code % values.len()].clone());
                    code /= values.len();
                }
                env
            };
            for code in 0..cases {
                let env = env_of(code);
                let lhs = lift_term(&eq.lhs, &env, self.cand).expect("well-formed equation");
                let rhs = lift_term(&eq.rhs, &env, self.cand).expect("well-formed equation");
                let v = compare(fm, &self.u, &lhs, &rhs);
                tally.record(code, v);
                total.record(total.cases as usize, v);
            }
            let witness = tally.witness_case().map(|code| {
                let env = env_of(code);
                let input = env.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(", ");
                Witness {
                    case: code,
                    input,
                    lhs: lift_term(&eq.lhs, &env, self.cand).unwrap().to_string(),
                    rhs: lift_term(&eq.rhs, &env, self.cand).unwrap().to_string(),
                }
            });
            results.push(EquationResult {
                name: eq.name.clone(),
                equation: format!("{} = {}", eq.lhs, eq.rhs),
                class,
                verdict: tally.verdict(),
                predicted: predicted_equation_failure(self.cand, class, self.u.relation),
                witness,
            });
        }
        let predicted = results.iter().all(|r| r.verdict.is_yes() || r.predicted);
        AxiomEntry {
            name: AxiomName::EquationPreservation,
            verdict: total.verdict(),
            cases: total.cases,
            failures: total.failures,
            unknowns: total.unknowns,
            predicted: predicted && total.failures > 0,
            witness: None,
            equations: results,
        }
    }
}

fn fmt_table(table: &[u8]) -> String {
    let parts: Vec<String> = table
        .iter()
        .enumerate()
        .map(|(i, v)| format!("{}↦{}", Atom(i as u8), Atom(*v)))
        .collect();
    format!("[{}]", parts.join(","))
}

fn fmt_arrow(f: &[Dt<Atom>]) -> String {
    let parts: Vec<String> = f.iter().enumerate().map(|(i, v)| format!("{}↦{}", Atom(i as u8), v)).collect();
    format!("[{}]", parts.join(", "))
}

/// A handful of `D(T X)` values used as targets of Kleisli arrows.
fn kleisli_samples(fm: &FreeModel, n: usize) -> Vec<Dt<Atom>> {
    let xs = atoms(n.max(1));
    let a = xs[0];
    let b = *xs.last().unwrap();
    let mut out = vec![now(fm.unit(a)), delay_n(1, fm.unit(b))];
    let binary = fm.ops().find(|(_, ar)| *ar == 2).map(|(op, _)| op.to_string());
    let unary = fm.ops().find(|(_, ar)| *ar == 1).map(|(op, _)| op.to_string());
    let constant = fm.ops().find(|(_, ar)| *ar == 0).map(|(op, _)| op.to_string());
    if let Some(op) = binary {
        out.push(delay_n(1, fm.apply(&op, vec![fm.unit(a), fm.unit(b)])));
    }
    if let Some(op) = unary {
        out.push(delay_n(2, fm.apply(&op, vec![fm.unit(b)])));
    }
    if let Some(op) = constant {
        out.push(now(fm.apply(&op, vec![])));
    }
    out
}

fn has_binary_op(cand: &DistLawCandidate) -> bool {
    cand.model.ops().any(|(_, a)| a == 2)
}

/// Whether the theory predicts that this axiom can fail.
pub fn predicted_failure(cand: &DistLawCandidate, axiom: AxiomName, relation: Relation) -> bool {
    let pred = predict_composability(cand.model.theory());
    match (cand.kind, relation) {
        (LawKind::Lift(LiftMode::Parallel), Relation::Strict) => {
            (has_binary_op(cand) && matches!(axiom, AxiomName::MultT | AxiomName::MonadLaws))
                || pred.par_setoid_law == SeqPrediction::Unknown
        }
        (LawKind::Lift(LiftMode::Parallel), Relation::WeakBisim) => pred.par_setoid_law == SeqPrediction::Unknown,
        (LawKind::Lift(LiftMode::Sequential), Relation::Strict) => pred.seq_dist_law == SeqPrediction::Unknown,
        (LawKind::Lift(LiftMode::Sequential), Relation::WeakBisim) => {
            pred.seq_dist_law == SeqPrediction::Unknown && pred.par_setoid_law == SeqPrediction::Unknown
        }
        (LawKind::Custom(_), _) => false,
    }
}

fn predicted_equation_failure(cand: &DistLawCandidate, class: EquationClass, relation: Relation) -> bool {
    match (cand.kind, relation) {
        (LawKind::Lift(LiftMode::Sequential), Relation::Strict) => !class.balanced,
        (LawKind::Lift(_), _) => class.drop,
        (LawKind::Custom(_), _) => false,
    }
}

pub fn check_axiom(cand: &DistLawCandidate, axiom: AxiomName, u: &TestUniverse) -> Result<AxiomEntry, LawError> {
    Ok(Checker::new(cand, *u)?.check(axiom))
}

pub fn check_equation_preservation(cand: &DistLawCandidate, u: &TestUniverse) -> Result<AxiomEntry, LawError> {
    check_axiom(cand, AxiomName::EquationPreservation, u)
}

/// The composite monad laws of `D∘T` under the candidate.
pub fn check_monad_laws(cand: &DistLawCandidate, u: &TestUniverse) -> Result<AxiomEntry, LawError> {
    check_axiom(cand, AxiomName::MonadLaws, u)
}

pub const SUITE_ORDER: [AxiomName; 7] = [
    AxiomName::Naturality,
    AxiomName::UnitS,
    AxiomName::UnitT,
    AxiomName::MultS,
    AxiomName::MultT,
    AxiomName::EquationPreservation,
    AxiomName::MonadLaws,
];

pub fn run_suite(cand: &DistLawCandidate, u: &TestUniverse) -> Result<LawReport, LawError> {
    let start = Instant::now();
    let checker = Checker::new(cand, *u)?;
    let mut axioms = Vec::new();
    let mut case_counts = BTreeMap::new();
    for axiom in SUITE_ORDER {
        let entry = checker.check(axiom);
        case_counts.insert(axiom.to_string(), entry.cases);
        axioms.push(entry);
    }
    Ok(LawReport {
        theory: cand.model.theory().name().to_string(),
        mode: cand.kind.to_string(),
        relation: u.relation,
        bounds: *u,
        axioms,
        case_counts,
        elapsed_ms: start.elapsed().as_millis() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freemodel::builtin_model;
    use crate::lifting::{custom_candidate, induced_candidate, CustomLaw};
    use std::rc::Rc;

    fn cand(name: &str, mode: LiftMode) -> DistLawCandidate {
        induced_candidate(Rc::new(builtin_model(name).unwrap()), mode)
    }

    fn small() -> TestUniverse {
        TestUniverse {
            carrier_size: 2,
            max_steps: 2,
            max_depth: 1,
            ..TestUniverse::default()
        }
    }

    #[test]
    fn universe_contents() {
        let fm = builtin_model("semilattice").unwrap();
        let u = TestUniverse {
            max_steps: 1,
            max_depth: 1,
            ..TestUniverse::default()
        };
        let un = enumerate_universe(&fm, &u).unwrap();
        let shown: Vec<String> = un.tdx.iter().map(|t| t.to_string()).collect();
        assert!(shown.contains(&"{0·step ▸ a}".to_string()));
        assert!(shown.contains(&"{1·step ▸ a}".to_string()));
        assert!(shown.contains(&"{0·step ▸ a,1·step ▸ b}".to_string()));

        let fm = builtin_model("magma").unwrap();
        let u = TestUniverse {
            carrier_size: 1,
            max_steps: 2,
            max_depth: 2,
            ..TestUniverse::default()
        };
        let un = enumerate_universe(&fm, &u).unwrap();
        assert!(un.tdx.iter().any(|t| t.to_string() == "2·step ▸ a∗0·step ▸ a"));
        let un = enumerate_universe(&fm, &TestUniverse::default()).unwrap();
        assert!(un
            .tddx
            .iter()
            .any(|t| t.to_string() == "0·step ▸ 1·step ▸ a∗1·step ▸ 0·step ▸ b"));
    }

    #[test]
    fn budget_is_enforced() {
        let fm = builtin_model("magma").unwrap();
        let u = TestUniverse {
            carrier_size: 3,
            max_steps: 4,
            max_depth: 3,
            ..TestUniverse::default()
        };
        assert!(matches!(enumerate_universe(&fm, &u), Err(LawError::BudgetExceeded { .. })));
    }

    #[test]
    fn list_seq_mult_t_holds() {
        let c = cand("monoid", LiftMode::Sequential);
        let e = check_axiom(&c, AxiomName::MultT, &small()).unwrap();
        assert_eq!(e.verdict, Verdict::Yes);
    }

    #[test]
    fn magma_par_mult_t_fails_strictly_but_not_weakly() {
        let c = cand("magma", LiftMode::Parallel);
        let e = check_axiom(&c, AxiomName::MultT, &small()).unwrap();
        assert_eq!(e.verdict, Verdict::No);
        assert!(e.predicted);
        let w = e.witness.unwrap();
        let steps = |s: &str| s.split('·').next().unwrap().parse::<u32>().unwrap();
        assert_ne!(steps(&w.lhs), steps(&w.rhs));
        let e = check_axiom(&c, AxiomName::MultT, &small().with_relation(Relation::WeakBisim)).unwrap();
        assert_eq!(e.verdict, Verdict::Yes);
    }

    #[test]
    fn equation_preservation_examples() {
        let c = cand("semilattice", LiftMode::Sequential);
        let e = check_equation_preservation(&c, &small()).unwrap();
        let idem = e.equations.iter().find(|r| r.name == "idem").unwrap();
        assert_eq!(idem.verdict, Verdict::No);
        assert!(idem.predicted);
        let c = cand("cmonoid", LiftMode::Sequential);
        let e = check_equation_preservation(&c, &small()).unwrap();
        assert_eq!(e.verdict, Verdict::Yes);
        let c = cand("semilattice", LiftMode::Parallel);
        let e = check_equation_preservation(&c, &small()).unwrap();
        assert_eq!(e.verdict, Verdict::Yes);
    }

    #[test]
    fn composite_monad_laws() {
        let c = cand("monoid", LiftMode::Sequential);
        assert_eq!(check_monad_laws(&c, &small()).unwrap().verdict, Verdict::Yes);
        let c = cand("semilattice", LiftMode::Parallel);
        let e = check_monad_laws(&c, &small()).unwrap();
        assert_eq!(e.verdict, Verdict::No);
        assert!(e.predicted);
    }

    #[test]
    fn witnesses_replay() {
        let c = cand("magma", LiftMode::Parallel);
        let checker = Checker::new(&c, small()).unwrap();
        let e = checker.check(AxiomName::MultT);
        let w = e.witness.unwrap();
        let again = checker.case_paths(AxiomName::MultT, w.case);
        assert_eq!(again.input, w.input);
        assert_eq!(again.lhs.to_string(), w.lhs);
        assert_eq!(again.rhs.to_string(), w.rhs);
        let fresh = Checker::new(&c, small()).unwrap().case_paths(AxiomName::MultT, w.case);
        assert_eq!(fresh.lhs.to_string(), w.lhs);
    }

    #[test]
    fn suite_monotone_in_bounds() {
        let c = cand("monoid", LiftMode::Sequential);
        for (s, d) in [(1, 1), (2, 1), (1, 2)] {
            let u = TestUniverse {
                max_steps: s,
                max_depth: d,
                ..TestUniverse::default()
            };
            let r = run_suite(&c, &u).unwrap();
            assert!(r.all_yes(), "{r}");
        }
    }

    #[test]
    fn custom_bang_small() {
        let fm = Rc::new(builtin_model("idem-bang").unwrap());
        let c = custom_candidate(fm, CustomLaw::Bang);
        let r = run_suite(&c, &small()).unwrap();
        assert!(r.all_yes(), "{r}");
    }

    #[test]
    fn report_round_trips_through_json() {
        let c = cand("semilattice", LiftMode::Parallel);
        let r = run_suite(&c, &small()).unwrap();
        let text = serde_json::to_string(&r).unwrap();
        let back: LawReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in ["theory", "mode", "relation", "bounds", "axioms", "caseCounts", "elapsedMs"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }
}
