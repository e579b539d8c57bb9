//! Command-line front end.
//!
//! Exit codes: 0 when every check passes or every failure was predicted,
//! 1 on an unexpected failure, 2 when some verdict is unknown, 3 on bad input.

use std::fmt::Write as _;
use std::path::Path;
use std::rc::Rc;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::combos::{run_combo, ComboError};
use crate::delay::Verdict;
use crate::freemodel::FreeModel;
use crate::laws::{run_suite, LawError, LawReport, Relation, TestUniverse};
use crate::lifting::{custom_candidate, induced_candidate, CustomLaw, DistLawCandidate, LiftMode};
use crate::nogo::{
    distributions_nogo_replay, idempotent_unary_candidate, mult_t_witness, parallel_magma_witness, powerset_nogo_search,
    MultTWitness, NoGoError, Weight,
};
use crate::theory::{builtin, classify_equation, parse_theory, predict_composability, Carrier, EquationClass, Prediction, Theory, TheoryError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_UNKNOWN: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "delaylaw", version, about = "Check distributive laws between the delay monad and algebraic monads")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Syntactic classification of a theory and the predicted verdicts.
    Classify {
        /// Built-in theory name or path to a theory file.
        theory: String,
        #[arg(long)]
        json: bool,
    },
    /// Run the distributive-law suite for one lifting.
    Check {
        theory: String,
        /// `seq`, `par`, `custom`, `custom:bang` or `custom:exceptions`.
        #[arg(long, default_value = "seq")]
        lift: String,
        #[arg(long, value_enum, default_value_t = UpTo::Strict)]
        upto: UpTo,
        #[command(flatten)]
        bounds: Bounds,
    },
    /// Hand-written combinations with non-algebraic monads.
    Combo {
        name: String,
        /// Algebraic theory for `sum`.
        #[arg(long)]
        theory: Option<String>,
        #[command(flatten)]
        bounds: Bounds,
    },
    /// Fixed counterexample demos.
    Demo {
        #[arg(value_enum)]
        name: DemoName,
        #[arg(long)]
        json: bool,
    },
    /// Replay the impossibility derivations.
    Nogo {
        #[arg(value_enum)]
        name: NoGoName,
        /// Weight of the mixing operation, as `n/d`.
        #[arg(long)]
        p: Option<String>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum UpTo {
    Strict,
    Weak,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DemoName {
    /// Parallel lifting for the magma against the second multiplication axiom.
    ParallelMagma,
    /// The hand-written law for an idempotent operation with a step-cancelling unary one.
    IdempotentBang,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NoGoName {
    Powerset,
    Distributions,
}

#[derive(Clone, Copy, Debug, Args)]
pub struct Bounds {
    #[arg(long, default_value_t = 2)]
    pub carrier_size: usize,
    #[arg(long, default_value_t = 3)]
    pub max_steps: u32,
    #[arg(long, default_value_t = 2)]
    pub max_depth: usize,
    #[arg(long, default_value_t = TestUniverse::default().fuel)]
    pub fuel: u32,
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub include_diverge: bool,
}

impl Bounds {
    pub fn universe(&self, relation: Relation) -> Result<TestUniverse, CliError> {
        if self.carrier_size == 0 || self.max_depth == 0 || self.fuel == 0 {
            return Err(CliError::Input("bounds must be positive".into()));
        }
        Ok(TestUniverse {
            carrier_size: self.carrier_size,
            max_steps: self.max_steps,
            max_depth: self.max_depth,
            relation,
            include_diverge: self.include_diverge,
            fuel: self.fuel,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error(transparent)]
    Laws(#[from] LawError),
    #[error(transparent)]
    NoGo(#[from] NoGoError),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl From<ComboError> for CliError {
    fn from(e: ComboError) -> Self {
        match e {
            ComboError::Laws(e) => CliError::Laws(e),
            ComboError::Theory(e) => CliError::Theory(e),
            other => CliError::Input(other.to_string()),
        }
    }
}

/// What the process prints and returns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(code: i32, stdout: String) -> Self {
        Outcome {
            code,
            stdout,
            stderr: String::new(),
        }
    }
}

/// Parse `argv` (including the program name) and run.
pub fn run_args<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(argv) {
        Ok(cli) => run(cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                Outcome {
                    code,
                    stdout: String::new(),
                    stderr: text,
                }
            } else {
                Outcome::ok(code, text)
            }
        }
    }
}

pub fn run(cli: Cli) -> Outcome {
    match dispatch(cli.command) {
        Ok(o) => o,
        Err(e) => Outcome {
            code: EXIT_INPUT,
            stdout: String::new(),
            stderr: format!("error: {e}\n"),
        },
    }
}

fn dispatch(cmd: Command) -> Result<Outcome, CliError> {
    match cmd {
        Command::Classify { theory, json } => {
            let th = load_theory(&theory)?;
            let c = classify(&th);
            Ok(Outcome::ok(EXIT_OK, if json { to_json(&c) } else { c.to_string() }))
        }
        Command::Check { theory, lift, upto, bounds } => {
            let relation = match upto {
                UpTo::Strict => Relation::Strict,
                UpTo::Weak => Relation::WeakBisim,
            };
            let u = bounds.universe(relation)?;
            let fm = Rc::new(FreeModel::new(load_theory(&theory)?));
            let cand = candidate(fm, &lift)?;
            let report = run_suite(&cand, &u)?;
            Ok(report_outcome(&report, bounds.json))
        }
        Command::Combo { name, theory, bounds } => {
            let u = bounds.universe(Relation::Strict)?;
            let report = run_combo(&name, &u, theory.as_deref())?;
            Ok(report_outcome(&report, bounds.json))
        }
        Command::Demo { name, json } => Ok(demo(name, json)),
        Command::Nogo { name, p, json } => nogo(name, p.as_deref(), json),
    }
}

/// Built-in name first, then a file path.
pub fn load_theory(arg: &str) -> Result<Theory, CliError> {
    match builtin(arg) {
        Ok(th) => Ok(th),
        Err(TheoryError::UnknownTheory(_)) if Path::new(arg).is_file() => {
            let text = std::fs::read_to_string(arg).map_err(|source| CliError::Io {
                path: arg.to_string(),
                source,
            })?;
            Ok(parse_theory(&text)?)
        }
        Err(e) => Err(e.into()),
    }
}

/// Build the candidate named by `--lift`.
pub fn candidate(fm: Rc<FreeModel>, lift: &str) -> Result<DistLawCandidate, CliError> {
    let th = fm.theory().clone();
    let law = match lift {
        "seq" => return Ok(induced_candidate(fm, LiftMode::Sequential)),
        "par" => return Ok(induced_candidate(fm, LiftMode::Parallel)),
        "custom" => match th.oracle {
            Some(Carrier::Exceptions(_)) => CustomLaw::Exceptions,
            _ => CustomLaw::Bang,
        },
        "custom:bang" => CustomLaw::Bang,
        "custom:exceptions" => CustomLaw::Exceptions,
        other => {
            return Err(CliError::Input(format!(
                "unknown lifting `{other}` (expected seq, par, custom, custom:bang or custom:exceptions)"
            )))
        }
    };
    let ops = &th.signature.ops;
    let fits = match law {
        CustomLaw::Bang => th.arity("mul") == Some(2) && th.arity("bang") == Some(1) && ops.len() == 2,
        CustomLaw::Exceptions => ops.iter().all(|(_, a)| *a == 0),
    };
    if !fits {
        let need = match law {
            CustomLaw::Bang => "exactly `mul : 2` and `bang : 1`",
            CustomLaw::Exceptions => "only constants",
        };
        return Err(CliError::Input(format!("theory {} does not fit this law: it must declare {need}", th.name())));
    }
    Ok(custom_candidate(fm, law))
}

pub fn report_exit_code(r: &LawReport) -> i32 {
    if !r.unexpected_failures().is_empty() {
        EXIT_FAILURE
    } else if r.any_unknown() {
        EXIT_UNKNOWN
    } else {
        EXIT_OK
    }
}

fn report_outcome(r: &LawReport, json: bool) -> Outcome {
    let text = if json { to_json(r) } else { format!("{r}\n") };
    Outcome::ok(report_exit_code(r), text)
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serialisable");
    s.push('\n');
    s
}

/// One equation with its syntactic class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifiedEquation {
    pub name: String,
    pub equation: String,
    pub class: EquationClass,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub theory: String,
    pub signature: Vec<(String, usize)>,
    pub carrier: Option<Carrier>,
    pub equations: Vec<ClassifiedEquation>,
    pub prediction: Prediction,
}

pub fn classify(th: &Theory) -> Classification {
    Classification {
        theory: th.name().to_string(),
        signature: th.signature.ops.clone(),
        carrier: th.oracle,
        equations: th
            .equations
            .iter()
            .map(|e| ClassifiedEquation {
                name: e.name.clone(),
                equation: format!("{} = {}", e.lhs, e.rhs),
                class: classify_equation(e),
            })
            .collect(),
        prediction: predict_composability(th),
    }
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        use crate::theory::{NoGoPrediction, SeqPrediction};
        writeln!(f, "theory {}", self.theory)?;
        let ops: Vec<String> = self.signature.iter().map(|(o, a)| format!("{o}/{a}")).collect();
        writeln!(f, "  signature  {}", ops.join(" "))?;
        let carrier = match self.carrier {
            None => "quotient by bounded rewriting".to_string(),
            Some(Carrier::Magma) => "terms".into(),
            Some(Carrier::Monoid) => "lists".into(),
            Some(Carrier::CommMonoid) => "multisets".into(),
            Some(Carrier::Semilattice) => "finite sets".into(),
            Some(Carrier::Convex) => "finitely supported distributions".into(),
            Some(Carrier::Exceptions(n)) => format!("X + {n}"),
        };
        writeln!(f, "  carrier    {carrier}")?;
        if self.equations.is_empty() {
            writeln!(f, "  equations  none")?;
        }
        for e in &self.equations {
            writeln!(f, "  eq {:<10} {:<40} [{}]", e.name, e.equation, e.class)?;
        }
        let p = &self.prediction;
        let guaranteed = |s: SeqPrediction| match s {
            SeqPrediction::Guaranteed => "guaranteed",
            SeqPrediction::Unknown => "not guaranteed",
        };
        writeln!(f, "  sequential lifting, strict       {}", guaranteed(p.seq_dist_law))?;
        writeln!(f, "  parallel lifting, up to ≈        {}", guaranteed(p.par_setoid_law))?;
        match (p.guarded_no_go, &p.witness_op) {
            (NoGoPrediction::Impossible, Some(op)) => {
                writeln!(f, "  guarded law T D → D T            impossible ({op} is commutative and idempotent)")
            }
            _ => writeln!(f, "  guarded law T D → D T            no obstruction found"),
        }
    }
}

fn witness_json(w: &MultTWitness) -> serde_json::Value {
    serde_json::json!({
        "law": w.law,
        "input": w.input,
        "lhs": w.lhs.to_string(),
        "rhs": w.rhs.to_string(),
        "lhsSteps": w.lhs.steps(),
        "rhsSteps": w.rhs.steps(),
        "strict": w.strict,
        "weak": w.weak,
    })
}

fn demo(name: DemoName, json: bool) -> Outcome {
    let w = match name {
        DemoName::ParallelMagma => parallel_magma_witness(),
        DemoName::IdempotentBang => mult_t_witness(&idempotent_unary_candidate()),
    };
    let expected = match name {
        DemoName::ParallelMagma => {
            w.lhs.steps() == Some(1) && w.rhs.steps() == Some(2) && w.strict == Verdict::No && w.weak == Verdict::Yes
        }
        DemoName::IdempotentBang => w.lhs.steps() == Some(1) && w.rhs.steps() == Some(1) && w.strict == Verdict::Yes,
    };
    let code = if expected { EXIT_OK } else { EXIT_FAILURE };
    if json {
        return Outcome::ok(code, to_json(&witness_json(&w)));
    }
    let mut s = w.to_string();
    let _ = write!(
        s,
        "\nsteps             {} vs {}\n",
        w.lhs.steps().map_or("∞".into(), |n| n.to_string()),
        w.rhs.steps().map_or("∞".into(), |n| n.to_string())
    );
    Outcome::ok(code, s)
}

/// Parse `n/d` (or an integer) as an exact weight.
pub fn parse_weight(s: &str) -> Result<Weight, CliError> {
    Weight::from_str(s.trim()).map_err(|_| CliError::Input(format!("cannot parse `{s}` as a rational n/d")))
}

fn nogo(name: NoGoName, p: Option<&str>, json: bool) -> Result<Outcome, CliError> {
    match (name, p) {
        (NoGoName::Powerset, Some(_)) => Err(CliError::Input("--p applies only to `nogo distributions`".into())),
        (NoGoName::Distributions, None) => Err(CliError::Input("`nogo distributions` needs --p n/d".into())),
        (NoGoName::Powerset, None) => {
            let results = powerset_nogo_search();
            let mut text = String::new();
            let mut rows = Vec::new();
            let mut refuted = 0;
            for (i, (cfg, trace)) in results.iter().enumerate() {
                let verified = trace.verify();
                refuted += usize::from(verified.is_ok());
                let _ = writeln!(
                    text,
                    "candidate {}/{}: ∨₁(x, y) = {}, ∨′(x, y) = {}, {}",
                    i + 1,
                    results.len(),
                    cfg.op1,
                    cfg.op_prime,
                    cfg.branch
                );
                let _ = writeln!(text, "{trace}");
                let _ = writeln!(
                    text,
                    "{}\n",
                    match &verified {
                        Ok(()) => "verified".to_string(),
                        Err(e) => format!("NOT VERIFIED: {e}"),
                    }
                );
                rows.push(serde_json::json!({
                    "op1": cfg.op1.to_string(),
                    "opPrime": cfg.op_prime.to_string(),
                    "branch": cfg.branch.to_string(),
                    "clash": trace.clash.to_string(),
                    "steps": trace.step_count(),
                    "verified": verified.is_ok(),
                    "trace": trace.to_string(),
                }));
            }
            let surviving = results.len() - refuted;
            let _ = writeln!(text, "{} candidates, {refuted} refuted, {surviving} surviving", results.len());
            let code = if surviving == 0 { EXIT_OK } else { EXIT_FAILURE };
            let out = if json {
                to_json(&serde_json::json!({ "candidates": rows, "refuted": refuted, "surviving": surviving }))
            } else {
                text
            };
            Ok(Outcome::ok(code, out))
        }
        (NoGoName::Distributions, Some(p)) => {
            let w = parse_weight(p)?;
            let r = distributions_nogo_replay(&w)?;
            let verified = [r.first.verify(), r.second.verify()];
            let ok = verified.iter().all(|v| v.is_ok());
            let out = if json {
                to_json(&serde_json::json!({
                    "p": r.p.to_string(),
                    "n": r.n,
                    "m": r.m,
                    "zWeight": r.z_weight.to_string(),
                    "first": { "clash": r.first.clash.to_string(), "verified": verified[0].is_ok(), "trace": r.first.to_string() },
                    "second": { "clash": r.second.clash.to_string(), "verified": verified[1].is_ok(), "trace": r.second.to_string() },
                }))
            } else {
                let mut s = r.to_string();
                for (label, v) in ["first", "second"].iter().zip(&verified) {
                    let _ = write!(s, "\n{label} branch: {}", v.as_ref().map_or_else(|e| format!("NOT VERIFIED: {e}"), |_| "verified".into()));
                }
                s.push('\n');
                s
            };
            Ok(Outcome::ok(if ok { EXIT_OK } else { EXIT_FAILURE }, out))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> Outcome {
        run_args(std::iter::once("delaylaw").chain(args.iter().copied()))
    }

    #[test]
    fn input_errors_exit_three() {
        assert_eq!(run(&["classify", "no-such-theory"]).code, EXIT_INPUT);
        assert_eq!(run(&["check", "monoid", "--lift", "diagonal"]).code, EXIT_INPUT);
        assert_eq!(run(&["check", "monoid", "--lift", "custom:bang"]).code, EXIT_INPUT);
        assert_eq!(run(&["nogo", "distributions"]).code, EXIT_INPUT);
        assert_eq!(run(&["nogo", "distributions", "--p", "3/2"]).code, EXIT_INPUT);
        assert_eq!(run(&["nogo", "powerset", "--p", "1/2"]).code, EXIT_INPUT);
        assert_eq!(run(&["combo", "nope"]).code, EXIT_INPUT);
        assert_eq!(run(&["check", "monoid", "--carrier-size", "0"]).code, EXIT_INPUT);
        assert_eq!(run(&["frobnicate"]).code, EXIT_INPUT);
        let big = run(&["check", "magma", "--carrier-size", "6", "--max-depth", "4"]);
        assert_eq!(big.code, EXIT_INPUT);
        assert!(big.stderr.contains("budget"), "{}", big.stderr);
    }

    #[test]
    fn predicted_failures_exit_zero() {
        let o = run(&["check", "semilattice", "--lift", "par", "--upto", "strict", "--max-steps", "2"]);
        assert_eq!(o.code, EXIT_OK, "{}", o.stdout);
        assert!(o.stdout.contains("(predicted)"));
    }

    #[test]
    fn json_reports_parse_back() {
        let o = run(&["check", "monoid", "--lift", "seq", "--max-steps", "1", "--json"]);
        assert_eq!(o.code, EXIT_OK);
        let r: LawReport = serde_json::from_str(&o.stdout).unwrap();
        assert!(r.all_yes());
        assert_eq!(to_json(&r), o.stdout);
        let c = run(&["classify", "convex", "--json"]);
        let parsed: Classification = serde_json::from_str(&c.stdout).unwrap();
        assert_eq!(parsed, classify(&builtin("convex").unwrap()));
    }

    #[test]
    fn theory_files_are_accepted() {
        let dir = std::env::temp_dir().join(format!("delaylaw-cli-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("band.theory");
        std::fs::write(&path, "theory band\nop mul : 2\neq assoc : mul(mul(x, y), z) = mul(x, mul(y, z))\neq idem : mul(x, x) = x\n").unwrap();
        let o = run(&["classify", path.to_str().unwrap()]);
        assert_eq!(o.code, EXIT_OK);
        assert!(o.stdout.starts_with("theory band"));
        assert!(o.stdout.contains("not guaranteed"));
        let bad = dir.join("bad.theory");
        std::fs::write(&bad, "op mul : 2\neq e : mul(x) = x\n").unwrap();
        assert_eq!(run(&["classify", bad.to_str().unwrap()]).code, EXIT_INPUT);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn demos_and_weights() {
        let o = run(&["demo", "parallel-magma"]);
        assert_eq!(o.code, EXIT_OK);
        assert!(o.stdout.contains("1 vs 2"));
        let b = run(&["demo", "idempotent-bang"]);
        assert_eq!(b.code, EXIT_OK);
        assert!(b.stdout.contains("1 vs 1"));
        assert_eq!(parse_weight("2/6").unwrap(), Weight::new(1.into(), 3.into()));
        assert!(parse_weight("x").is_err());
        let d = run(&["nogo", "distributions", "--p", "1/3"]);
        assert_eq!(d.code, EXIT_OK, "{}", d.stdout);
    }
}
