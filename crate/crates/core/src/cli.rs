//! Command-line front end: argument parsing, file I/O and exit codes.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::correspond::{correspondence_report, frame_properties, schema_counterexample, Frame, Schema};
use crate::error::{Error, Result};
use crate::interp::{interpolate, parse_corpus, run_corpus, verify_interpolant, InterpolationProblem};
use crate::kripke::{random_system, KripkeSystem, ValuationFile};
use crate::par::Exec;
use crate::prover::{consequence, prove_with_budget, Logic, ProveResult, Sequent, DEFAULT_BUDGET};
use crate::rewrite::{self, check_axioms, check_identity, eq_at_bound, normalize, trial_seed, Bounds, AX1_AS_PRINTED, AXIOMS};
use crate::saturate::{build_countermodel, check_saturated, saturate, SaturationConfig};
use crate::syntax::{parse, parse_open, IndexSupply, Signature, Term};
use crate::transform::{rich_check, strongly_rich_check, Rule, SemigroupSpec, Verdict as RichVerdict};

pub const DEFAULT_SEED: u64 = 1729;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "msa", version, about = "Modal substitution algebras checked on small Kripke systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Base seed for every randomized step.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Write the result here instead of standard output.
    #[arg(long, global = true, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Emit JSON instead of text.
    #[arg(long, global = true)]
    pub structured: bool,
}

#[derive(Args, Debug, Clone)]
pub struct FormulaInput {
    /// Signature file, lines `NAME: i j ...`. Without it generators are nullary.
    #[arg(long, value_name = "FILE")]
    pub sig: Option<PathBuf>,
    #[arg(long, value_name = "STR", conflicts_with = "file")]
    pub formula: Option<String>,
    /// File holding one formula.
    #[arg(long, value_name = "FILE")]
    pub file: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct PairInput {
    #[arg(long, default_value = "K")]
    pub logic: Logic,
    #[arg(long, value_name = "FILE")]
    pub sig: Option<PathBuf>,
    /// Member of Γ; repeatable.
    #[arg(long, value_name = "STR", required = true)]
    pub left: Vec<String>,
    /// Member of Δ; repeatable.
    #[arg(long, value_name = "STR")]
    pub right: Vec<String>,
    /// Vocabulary of the theory side, comma separated. Defaults to the generators of Γ.
    #[arg(long, value_name = "NAMES")]
    pub x1: Option<String>,
    /// Vocabulary of the cotheory side. Defaults to the generators of Δ.
    #[arg(long, value_name = "NAMES")]
    pub x2: Option<String>,
    /// Extra enumerated terms offered to each side.
    #[arg(long, default_value_t = 16)]
    pub steps: usize,
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    #[arg(long, default_value_t = 2)]
    pub domain_bound: usize,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Rewrite a term to normal form and check the rewrite at the bound.
    Normalize {
        #[command(flatten)]
        input: FormulaInput,
        #[arg(long, default_value_t = 2)]
        max_worlds: usize,
        #[arg(long, default_value_t = 2)]
        max_domain: usize,
        /// Ambient width; defaults to what the term needs.
        #[arg(long)]
        width: Option<usize>,
        /// Sampled valuations when the exhaustive check is over budget.
        #[arg(long, default_value_t = 256)]
        trials: usize,
    },
    /// Check catalogued identities on random instances.
    CheckIdentity {
        /// Identity name; repeatable. Defaults to the whole catalogue.
        #[arg(long)]
        id: Vec<String>,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 2)]
        max_worlds: usize,
        #[arg(long, default_value_t = 2)]
        max_domain: usize,
        #[arg(long, default_value_t = 3)]
        width: usize,
    },
    /// Check the axioms on random Kripke systems.
    CheckAxioms {
        #[arg(long, default_value_t = 200)]
        systems: usize,
        #[arg(long, default_value_t = 3)]
        max_worlds: usize,
        #[arg(long, default_value_t = 3)]
        max_domain: usize,
        /// Largest width; each system draws one in 1..=width.
        #[arg(long, default_value_t = 3)]
        width: usize,
        /// Random elements tried per axiom and system.
        #[arg(long, default_value_t = 4)]
        trials: usize,
        /// Frame conditions imposed on the random systems.
        #[arg(long, default_value = "K")]
        logic: Logic,
    },
    /// Decide a formula or sequent in a logic.
    Prove {
        #[arg(long, default_value = "K")]
        logic: Logic,
        #[command(flatten)]
        input: FormulaInput,
        /// Antecedent member when proving a sequent; repeatable.
        #[arg(long, value_name = "STR")]
        left: Vec<String>,
        /// Succedent member when proving a sequent; repeatable.
        #[arg(long, value_name = "STR")]
        right: Vec<String>,
        /// Grounding bound for quantified input.
        #[arg(long, default_value_t = 2)]
        domain_bound: usize,
        /// Where a refutation's countermodel is written.
        #[arg(long, value_name = "FILE", default_value = "countermodel.json")]
        model: PathBuf,
    },
    /// Interpolate one implication or a corpus file.
    Interpolate {
        #[arg(long, default_value = "K")]
        logic: Logic,
        #[arg(long, value_name = "FILE")]
        sig: Option<PathBuf>,
        #[arg(long, value_name = "STR", requires = "right", conflicts_with = "file")]
        left: Option<String>,
        #[arg(long, value_name = "STR")]
        right: Option<String>,
        /// Corpus file with `sig` and `problem` lines.
        #[arg(long, value_name = "FILE")]
        file: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        domain_bound: usize,
    },
    /// Saturate an inseparable pair and check the saturation conditions.
    Saturate {
        #[command(flatten)]
        pair: PairInput,
    },
    /// Build the countermodel of an inseparable pair.
    Countermodel {
        #[command(flatten)]
        pair: PairInput,
        #[arg(long)]
        tree_depth: Option<usize>,
        /// Write the system and valuation here.
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
    },
    /// Compare the three axiom schemas with their frame conditions.
    Correspond {
        #[arg(long, default_value_t = 3)]
        max_worlds: usize,
        /// Schema (dia-top, 4, t); repeatable. Defaults to all three.
        #[arg(long)]
        schema: Vec<Schema>,
        /// Check the frame of this Kripke system instead of enumerating.
        #[arg(long, value_name = "FILE")]
        file: Option<PathBuf>,
    },
    /// Richness conditions of a transformation semigroup.
    Richness {
        /// Semigroup description, one rule per line.
        #[arg(long, value_name = "FILE", conflicts_with = "sigma")]
        file: Option<PathBuf>,
        /// Strong richness of the pair (sigma, pi).
        #[arg(long, requires = "pi")]
        sigma: Option<String>,
        #[arg(long)]
        pi: Option<String>,
        /// Largest power n in the strong check.
        #[arg(long, default_value_t = 5)]
        depth: usize,
        #[arg(long, default_value_t = 16)]
        window: usize,
    },
}

/// What one command produced.
struct Outcome {
    code: i32,
    text: String,
    json: Value,
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(out) => {
            let body = if cli.structured {
                let mut s = serde_json::to_string_pretty(&out.json).expect("json values serialize");
                s.push('\n');
                s
            } else {
                out.text
            };
            if let Err(e) = emit(cli.out.as_deref(), &body) {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
            out.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::BudgetExceeded(_) | Error::RewriteLimit(_) => EXIT_BUDGET,
        Error::NotDerivable | Error::Separable(_) => EXIT_NEGATIVE,
        _ => EXIT_USAGE,
    }
}

fn emit(path: Option<&Path>, body: &str) -> Result<()> {
    match path {
        Some(p) => Ok(fs::write(p, body)?),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn verdict(ok: bool) -> i32 {
    if ok {
        EXIT_OK
    } else {
        EXIT_NEGATIVE
    }
}

fn positive(n: usize, what: &str) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidBounds(format!("{what} must be positive")));
    }
    Ok(())
}

fn load_sig(path: &Option<PathBuf>) -> Result<Option<Signature>> {
    path.as_ref().map(|p| Signature::parse(&fs::read_to_string(p)?)).transpose()
}

/// Parses against the declared signature, or declares unknown generators nullary.
fn read_term(text: &str, declared: bool, sig: &mut Signature) -> Result<Term> {
    if declared {
        parse(text, sig)
    } else {
        parse_open(text, sig)
    }
}

fn formula_text(input: &FormulaInput) -> Result<Option<String>> {
    match (&input.formula, &input.file) {
        (Some(f), _) => Ok(Some(f.clone())),
        (None, Some(p)) => Ok(Some(fs::read_to_string(p)?.trim().to_string())),
        (None, None) => Ok(None),
    }
}

fn names(list: &Option<String>, default: BTreeSet<String>) -> BTreeSet<String> {
    match list {
        Some(s) => s.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect(),
        None => default,
    }
}

fn execute(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Normalize { input, max_worlds, max_domain, width, trials } => {
            cmd_normalize(input, *max_worlds, *max_domain, *width, *trials, cli.seed)
        }
        Command::CheckIdentity { id, trials, max_worlds, max_domain, width } => {
            cmd_check_identity(id, *trials, *max_worlds, *max_domain, *width, cli.seed)
        }
        Command::CheckAxioms { systems, max_worlds, max_domain, width, trials, logic } => {
            cmd_check_axioms(*systems, *max_worlds, *max_domain, *width, *trials, *logic, cli.seed)
        }
        Command::Prove { logic, input, left, right, domain_bound, model } => {
            cmd_prove(*logic, input, left, right, *domain_bound, model)
        }
        Command::Interpolate { logic, sig, left, right, file, domain_bound } => {
            cmd_interpolate(*logic, sig, left, right, file, *domain_bound)
        }
        Command::Saturate { pair } => cmd_saturate(pair),
        Command::Countermodel { pair, tree_depth, model } => cmd_countermodel(pair, *tree_depth, model),
        Command::Correspond { max_worlds, schema, file } => cmd_correspond(*max_worlds, schema, file),
        Command::Richness { file, sigma, pi, depth, window } => cmd_richness(file, sigma, pi, *depth, *window),
    }
}

fn cmd_normalize(
    input: &FormulaInput,
    max_worlds: usize,
    max_domain: usize,
    width: Option<usize>,
    trials: usize,
    seed: u64,
) -> Result<Outcome> {
    positive(max_worlds, "--max-worlds")?;
    positive(max_domain, "--max-domain")?;
    let declared = load_sig(&input.sig)?;
    let mut sig = declared.clone().unwrap_or_default();
    let text = formula_text(input)?.ok_or_else(|| Error::InvalidBounds("give --formula or --file".into()))?;
    let t = read_term(&text, declared.is_some(), &mut sig)?;
    let n = normalize(&t, &sig)?;
    let width = width.unwrap_or(0).max(sig.required_width(&t)?).max(1);
    let bounds = Bounds { max_worlds, max_domain, max_indices: width, samples: trials, seed, ..Bounds::default() };
    let eq = eq_at_bound(&t, &n, &sig, &bounds)?;
    let mut text = format!("input:  {t}\nnormal: {n}\n");
    let _ = writeln!(
        text,
        "bounds: worlds <= {max_worlds}, domain <= {max_domain}, width {width}, {} instances {}",
        eq.checked,
        if eq.exhaustive { "(exhaustive)" } else { "(sampled)" }
    );
    let _ = writeln!(text, "equal at bound: {}", eq.equal);
    let json = json!({
        "command": "normalize",
        "bounds": bounds,
        "input": t,
        "normal": n,
        "check": eq,
    });
    Ok(Outcome { code: verdict(eq.equal), text, json })
}

fn cmd_check_identity(
    ids: &[String],
    trials: usize,
    max_worlds: usize,
    max_domain: usize,
    width: usize,
    seed: u64,
) -> Result<Outcome> {
    positive(trials, "--trials")?;
    positive(max_worlds, "--max-worlds")?;
    positive(max_domain, "--max-domain")?;
    positive(width, "--width")?;
    let names: Vec<String> = if ids.is_empty() {
        rewrite::identity_names().into_iter().filter(|n| *n != AX1_AS_PRINTED).map(str::to_string).collect()
    } else {
        ids.to_vec()
    };
    let bounds = Bounds { max_worlds, max_domain, max_indices: width, seed, ..Bounds::default() };
    let mut reports = Vec::new();
    let mut text = format!("bounds: worlds <= {max_worlds}, domain <= {max_domain}, indices < {width}, {trials} trials\n");
    for id in &names {
        let r = check_identity(id, trials, &bounds)?;
        let _ = writeln!(
            text,
            "{:<16} {} checked {:>4} skipped {:>4} failures {}",
            r.id,
            if r.passed() { "PASS" } else { "FAIL" },
            r.checked,
            r.skipped,
            r.failures
        );
        if let Some(c) = &r.counterexample {
            let _ = writeln!(text, "  counterexample: {} != {}", c.left, c.right);
        }
        reports.push(r);
    }
    let ok = reports.iter().all(|r| r.passed());
    let json = json!({ "command": "check-identity", "bounds": bounds, "trials": trials, "reports": reports });
    Ok(Outcome { code: verdict(ok), text, json })
}

fn cmd_check_axioms(
    systems: usize,
    max_worlds: usize,
    max_domain: usize,
    width: usize,
    trials: usize,
    logic: Logic,
    seed: u64,
) -> Result<Outcome> {
    positive(systems, "--systems")?;
    positive(max_worlds, "--max-worlds")?;
    positive(max_domain, "--max-domain")?;
    positive(width, "--width")?;
    positive(trials, "--trials")?;
    let mut rows: Vec<(String, usize, usize, usize, Option<String>)> = AXIOMS
        .iter()
        .chain([&AX1_AS_PRINTED])
        .map(|n| (n.to_string(), 0, 0, 0, None))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in 0..systems {
        let k = random_system(&mut rng, max_worlds, max_domain, logic.conditions());
        let w = rand::Rng::gen_range(&mut rng, 1..=width);
        let rep = check_axioms(&k, w, trials, true, trial_seed(seed, s as u64))?;
        for (row, r) in rows.iter_mut().zip(&rep.rows) {
            row.1 += r.checked;
            row.2 += r.skipped;
            row.3 += r.failures;
            if row.4.is_none() {
                if let Some(c) = &r.counterexample {
                    row.4 = Some(format!("system {}, width {w}: {c}", k.to_json()?.replace(['\n', ' '], "")));
                }
            }
        }
    }
    let axioms_ok = rows.iter().filter(|r| r.0 != AX1_AS_PRINTED).all(|r| r.3 == 0);
    let printed_refuted = rows.iter().any(|r| r.0 == AX1_AS_PRINTED && r.3 > 0);
    let mut text = format!(
        "bounds: {systems} systems, worlds <= {max_worlds}, domain <= {max_domain}, width <= {width}, {trials} elements each, frames of {logic}\n"
    );
    for r in &rows {
        let expect_fail = r.0 == AX1_AS_PRINTED;
        let ok = (r.3 > 0) == expect_fail;
        let _ = writeln!(
            text,
            "{:<16} {} checked {:>5} skipped {:>5} failures {}{}",
            r.0,
            if r.1 == 0 { "vacuous" } else if ok { "ok     " } else { "BAD    " },
            r.1,
            r.2,
            r.3,
            if expect_fail { " (expected to fail)" } else { "" }
        );
    }
    let json = json!({
        "command": "check-axioms",
        "bounds": { "systems": systems, "maxWorlds": max_worlds, "maxDomain": max_domain, "width": width, "trials": trials, "logic": logic, "seed": seed },
        "rows": rows.iter().map(|r| json!({ "name": r.0, "checked": r.1, "skipped": r.2, "failures": r.3, "counterexample": r.4 })).collect::<Vec<_>>(),
        "axiomsHold": axioms_ok,
        "printedAx1Refuted": printed_refuted,
    });
    Ok(Outcome { code: verdict(axioms_ok && printed_refuted), text, json })
}

fn cmd_prove(
    logic: Logic,
    input: &FormulaInput,
    left: &[String],
    right: &[String],
    domain_bound: usize,
    model: &Path,
) -> Result<Outcome> {
    positive(domain_bound, "--domain-bound")?;
    let declared = load_sig(&input.sig)?;
    let mut sig = declared.clone().unwrap_or_default();
    let mut ante = Vec::new();
    let mut succ = Vec::new();
    for a in left {
        ante.push(read_term(a, declared.is_some(), &mut sig)?);
    }
    for b in right {
        succ.push(read_term(b, declared.is_some(), &mut sig)?);
    }
    if let Some(text) = formula_text(input)? {
        succ.push(read_term(&text, declared.is_some(), &mut sig)?);
    }
    if ante.is_empty() && succ.is_empty() {
        return Err(Error::InvalidBounds("give --formula, --file, --left or --right".into()));
    }
    let s = Sequent::new(ante.clone(), succ.clone());
    let propositional = ante.iter().chain(&succ).all(Term::is_quantifier_free);
    let mut text = format!("logic: {logic}\nsequent: {s}\n");
    let (provable, countermodel, proof) = if propositional {
        let _ = writeln!(text, "bounds: exact tableau, node budget {DEFAULT_BUDGET}");
        match prove_with_budget(logic, &s, DEFAULT_BUDGET)? {
            ProveResult::Provable(p) => (true, None, Some(p.lines())),
            ProveResult::Refuted(m) => (false, Some(m.to_json()?), None),
        }
    } else {
        let width = ante.iter().chain(&succ).map(|t| sig.required_width(t)).collect::<Result<Vec<_>>>()?;
        let width = width.into_iter().max().unwrap_or(0).max(1);
        let _ = writeln!(text, "bounds: constant domains of size <= {domain_bound}, width {width}");
        let r = consequence(&ante, &succ, logic, domain_bound, width, &sig)?;
        match r.failure {
            None => (true, None, None),
            Some((m, tuple, cm)) => {
                let _ = writeln!(text, "fails at domain size {m}, tuple {tuple:?}");
                (false, Some(cm.to_json()?), None)
            }
        }
    };
    if let Some(lines) = &proof {
        text.push_str("Provable\n");
        for l in lines {
            let _ = writeln!(text, "  {l}");
        }
    } else if provable {
        text.push_str("Valid at the bound\n");
    }
    if let Some(cm) = &countermodel {
        fs::write(model, serde_json::to_string_pretty(cm)? + "\n")?;
        let _ = writeln!(text, "Refuted; countermodel written to {}", model.display());
    }
    let json = json!({
        "command": "prove",
        "logic": logic,
        "bounds": if propositional { json!({ "nodeBudget": DEFAULT_BUDGET }) } else { json!({ "domainBound": domain_bound }) },
        "sequent": s.to_string(),
        "verdict": if provable { "provable" } else { "refuted" },
        "proof": proof,
        "countermodel": countermodel,
        "countermodelFile": countermodel.as_ref().map(|_| model.display().to_string()),
    });
    Ok(Outcome { code: verdict(provable), text, json })
}

fn cmd_interpolate(
    logic: Logic,
    sig_path: &Option<PathBuf>,
    left: &Option<String>,
    right: &Option<String>,
    file: &Option<PathBuf>,
    domain_bound: usize,
) -> Result<Outcome> {
    positive(domain_bound, "--domain-bound")?;
    let problems = if let Some(p) = file {
        parse_corpus(&fs::read_to_string(p)?)?.problems
    } else {
        let (Some(a), Some(b)) = (left, right) else {
            return Err(Error::InvalidBounds("give --left and --right, or --file".into()));
        };
        let declared = load_sig(sig_path)?;
        let mut sig = declared.clone().unwrap_or_default();
        let a = read_term(a, declared.is_some(), &mut sig)?;
        let b = read_term(b, declared.is_some(), &mut sig)?;
        vec![InterpolationProblem::new(logic, a, b, sig)]
    };
    let results = if problems.len() == 1 {
        let p = &problems[0];
        vec![interpolate(p, domain_bound).and_then(|r| {
            let v = verify_interpolant(p, &r.interpolant, domain_bound)?;
            Ok((r, v))
        })]
    } else {
        run_corpus(&problems, domain_bound, Exec::default())
    };
    let mut text = format!("bounds: constant domains of size <= {domain_bound}\n");
    let mut rows = Vec::new();
    let mut ok = true;
    for (n, (p, r)) in problems.iter().zip(results).enumerate() {
        let head = format!("#{n} {}: {} -> {}", p.logic, p.left, p.right);
        match r {
            Ok((res, v)) => {
                ok &= v.passed();
                let _ = writeln!(
                    text,
                    "{head}\n  interpolant {} ({:?})\n  left {} right {} vocabulary {}{}",
                    res.interpolant,
                    res.method,
                    v.left_ok,
                    v.right_ok,
                    v.vocabulary_ok,
                    v.oracle_ok.map(|o| format!(" oracle {o}")).unwrap_or_default()
                );
                rows.push(json!({ "problem": p, "result": res, "verify": v }));
            }
            Err(Error::NotDerivable) => {
                ok = false;
                let _ = writeln!(text, "{head}\n  not derivable at the bound");
                rows.push(json!({ "problem": p, "error": "not derivable" }));
            }
            Err(e) => return Err(e),
        }
    }
    let json = json!({ "command": "interpolate", "bounds": { "domainBound": domain_bound }, "problems": rows });
    Ok(Outcome { code: verdict(ok), text, json })
}

struct Pair {
    cfg: SaturationConfig,
    gamma: Vec<Term>,
    delta: Vec<Term>,
    x1: BTreeSet<String>,
    x2: BTreeSet<String>,
    sig: Signature,
}

fn read_pair(p: &PairInput, tree_depth: Option<usize>) -> Result<Pair> {
    let cfg = SaturationConfig { steps: p.steps, logic: p.logic, domain_bound: p.domain_bound, depth: p.depth, tree_depth };
    cfg.validate()?;
    let declared = load_sig(&p.sig)?;
    let mut sig = declared.clone().unwrap_or_default();
    let gamma = p.left.iter().map(|a| read_term(a, declared.is_some(), &mut sig)).collect::<Result<Vec<_>>>()?;
    let delta = p.right.iter().map(|b| read_term(b, declared.is_some(), &mut sig)).collect::<Result<Vec<_>>>()?;
    let gens = |ts: &[Term]| ts.iter().flat_map(Term::generators).collect::<BTreeSet<_>>();
    let x1 = names(&p.x1, gens(&gamma));
    let x2 = names(&p.x2, gens(&delta));
    Ok(Pair { cfg, gamma, delta, x1, x2, sig })
}

fn pair_header(p: &Pair) -> String {
    let show = |ts: &[Term]| ts.iter().map(Term::to_string).collect::<Vec<_>>().join(", ");
    format!(
        "logic: {}\nleft: {}\nright: {}\nbounds: domain <= {}, depth {}, {} extra terms\n",
        p.cfg.logic,
        show(&p.gamma),
        show(&p.delta),
        p.cfg.domain_bound,
        p.cfg.depth,
        p.cfg.steps
    )
}

fn separable_outcome(command: &str, p: &Pair, sep: Term) -> Outcome {
    let text = format!("{}separable, separator {sep}\n", pair_header(p));
    let json = json!({ "command": command, "bounds": p.cfg, "verdict": "separable", "separator": sep });
    Outcome { code: EXIT_NEGATIVE, text, json }
}

fn cmd_saturate(input: &PairInput) -> Result<Outcome> {
    let p = read_pair(input, None)?;
    let mut supply = IndexSupply::new(0);
    let pair = match saturate(&p.gamma, &p.delta, &p.x1, &p.x2, &p.cfg, &mut supply, &p.sig) {
        Err(Error::Separable(sep)) => return Ok(separable_outcome("saturate", &p, sep)),
        r => r?,
    };
    let report = check_saturated(&pair, &pair.universe(), &p.x1, &p.x2, &p.cfg, &p.sig)?;
    let mut text = pair_header(&p);
    let _ = writeln!(text, "trace: {} steps, dilation level {}", pair.log.len(), pair.dilation_level);
    for e in &pair.log {
        let _ = writeln!(text, "  {:>3} {:?} {} {:?}", e.step, e.side, e.term, e.verdict);
    }
    for c in &report.conditions {
        let _ = writeln!(
            text,
            "condition ({}) {}{}",
            c.condition,
            if c.passed { "PASS" } else { "FAIL" },
            c.witness.as_ref().map(|w| format!(": {w}")).unwrap_or_default()
        );
    }
    let json = json!({ "command": "saturate", "bounds": p.cfg, "verdict": "inseparable", "pair": pair, "conditions": report });
    Ok(Outcome { code: verdict(report.passed()), text, json })
}

fn cmd_countermodel(input: &PairInput, tree_depth: Option<usize>, model: &Option<PathBuf>) -> Result<Outcome> {
    let p = read_pair(input, tree_depth)?;
    let mut supply = IndexSupply::new(0);
    let m = match build_countermodel(&p.gamma, &p.delta, &p.x1, &p.x2, &p.cfg, &mut supply, &p.sig) {
        Err(Error::Separable(sep)) => return Ok(separable_outcome("countermodel", &p, sep)),
        r => r?,
    };
    let system: Value = serde_json::from_str(&m.system.to_json()?)?;
    let valuation = ValuationFile::from_valuation(&m.system, &m.valuation, m.width);
    let mut text = pair_header(&p);
    let _ = writeln!(
        text,
        "worlds: {}, edges: {}, width {}, root domain {:?}",
        m.worlds.len(),
        m.system.edges.len(),
        m.width,
        m.system.world_domain[m.world]
    );
    for (t, v) in &m.report.gamma {
        let _ = writeln!(text, "  left  {t} = {}", *v as u8);
    }
    for (t, v) in &m.report.delta {
        let _ = writeln!(text, "  right {t} = {}", *v as u8);
    }
    for v in m.report.violations.iter().chain(&m.report.claim_violations) {
        let _ = writeln!(text, "  violation: {v}");
    }
    let _ = writeln!(text, "frame conditions: {}", if m.report.frame_ok { "ok" } else { "violated" });
    let _ = writeln!(text, "{}", if m.report.passed() { "countermodel confirmed" } else { "countermodel NOT confirmed" });
    let file = json!({ "system": system, "valuation": valuation, "world": m.system.worlds[m.world], "tuple": m.tuple });
    if let Some(path) = model {
        fs::write(path, serde_json::to_string_pretty(&file)? + "\n")?;
        let _ = writeln!(text, "model written to {}", path.display());
    }
    let json = json!({ "command": "countermodel", "bounds": p.cfg, "model": file, "construction": m });
    Ok(Outcome { code: verdict(m.report.passed()), text, json })
}

fn cmd_correspond(max_worlds: usize, schema: &[Schema], file: &Option<PathBuf>) -> Result<Outcome> {
    let schemas: Vec<Schema> = if schema.is_empty() { Schema::ALL.to_vec() } else { schema.to_vec() };
    if let Some(path) = file {
        let k = KripkeSystem::from_json(&fs::read_to_string(path)?)?;
        let f = Frame::of_system(&k);
        let props = frame_properties(&f);
        let mut text = format!("frame: {} worlds, edges {:?}\n", f.n, f.edges);
        let mut rows = Vec::new();
        let mut ok = true;
        for s in schemas {
            let valid = schema_counterexample(&f, s).is_none();
            let prop = s.property(props);
            ok &= valid == prop;
            let _ = writeln!(text, "{:<12} validates {valid:<5} {} {prop}", s.formula(), s.condition());
            rows.push(json!({ "schema": s, "validates": valid, "hasProperty": prop }));
        }
        let json = json!({ "command": "correspond", "bounds": { "worlds": f.n }, "frame": f, "rows": rows });
        return Ok(Outcome { code: verdict(ok), text, json });
    }
    let r = correspondence_report(max_worlds, &schemas, Exec::default())?;
    let json = json!({ "command": "correspond", "bounds": { "maxWorlds": max_worlds }, "report": r });
    Ok(Outcome { code: verdict(r.passed()), text: r.to_string(), json })
}

fn parse_rule(text: &str) -> Result<Rule> {
    let spec = SemigroupSpec::parse(text)?;
    match spec.generators.as_slice() {
        [r] => Ok(*r),
        _ => Err(Error::InvalidBounds(format!("expected one rule, got `{text}`"))),
    }
}

fn rich_verdict_line(name: &str, v: &RichVerdict) -> String {
    match v {
        RichVerdict::Pass { witness } => {
            format!("{name}: PASS{}", witness.as_ref().map(|w| format!(" ({w})")).unwrap_or_default())
        }
        RichVerdict::Fail { counterexample, exhaustive } => {
            format!("{name}: FAIL ({counterexample}{})", if *exhaustive { ", exhaustive" } else { "" })
        }
        RichVerdict::InconclusiveAtBound { missing } => format!("{name}: INCONCLUSIVE ({missing})"),
    }
}

fn cmd_richness(
    file: &Option<PathBuf>,
    sigma: &Option<String>,
    pi: &Option<String>,
    depth: usize,
    window: usize,
) -> Result<Outcome> {
    positive(depth, "--depth")?;
    positive(window, "--window")?;
    if let (Some(s), Some(p)) = (sigma, pi) {
        let r = strongly_rich_check(parse_rule(s)?, parse_rule(p)?, depth, window);
        let mut text = format!("strong richness of ({}, {}), n <= {depth}, window {window}\n", r.sigma, r.pi);
        for row in &r.rows {
            let _ = writeln!(
                text,
                "  n={} support {:?} bounded {} outside range {}",
                row.n, row.support, row.support_bounded, row.support_outside_range
            );
        }
        let _ = writeln!(text, "{}", if r.pass { "PASS" } else { "FAIL" });
        let json = json!({ "command": "richness", "bounds": { "depth": depth, "window": window }, "strong": r });
        return Ok(Outcome { code: verdict(r.pass), text, json });
    }
    let path = file.as_ref().ok_or_else(|| Error::InvalidBounds("give --file or --sigma/--pi".into()))?;
    let spec = SemigroupSpec::parse(&fs::read_to_string(path)?)?;
    let r = rich_check(&spec)?;
    let verdicts = [&r.update_closure, &r.split_pair, &r.conjugation];
    let mut text = format!(
        "generators: {}\nbounds: word depth {}, window {}, {} elements{}\n",
        spec.generators.iter().map(Rule::to_string).collect::<Vec<_>>().join(", "),
        r.depth,
        r.window,
        r.elements,
        if r.closed { " (closed)" } else { "" }
    );
    for (name, v) in ["(1) update closure", "(2) split pair", "(3) conjugation"].iter().zip(verdicts) {
        let _ = writeln!(text, "{}", rich_verdict_line(name, v));
    }
    for n in &r.notes {
        let _ = writeln!(text, "note: {n}");
    }
    let code = if verdicts.iter().any(|v| v.is_fail()) {
        EXIT_NEGATIVE
    } else if verdicts.iter().all(|v| v.is_pass()) {
        EXIT_OK
    } else {
        EXIT_BUDGET
    };
    let json = json!({ "command": "richness", "bounds": { "depth": r.depth, "window": r.window }, "report": r });
    Ok(Outcome { code, text, json })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> i32 {
        run(std::iter::once("msa").chain(args.iter().copied()))
    }

    #[test]
    fn prove_examples() {
        let dir = tempfile::tempdir().unwrap();
        let model = dir.path().join("cm.json");
        let m = model.to_str().unwrap();
        let out = dir.path().join("out.json");
        let o = out.to_str().unwrap();
        assert_eq!(run_args(&["prove", "--logic", "D", "--formula", "(dia T)", "--model", m, "--out", o]), 0);
        assert!(!model.exists());
        assert_eq!(run_args(&["prove", "--logic", "K", "--formula", "(dia T)", "--model", m, "--out", o]), 1);
        let cm: Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
        // one world, no edges
        assert_eq!(cm["system"]["worlds"].as_array().unwrap().len(), 1);
        assert!(cm["system"]["edges"].as_array().unwrap().is_empty());
    }

    #[test]
    fn usage_errors() {
        assert_eq!(run_args(&["frobnicate"]), 2);
        assert_eq!(run_args(&["prove", "--logic", "Q", "--formula", "T"]), 2);
        assert_eq!(run_args(&["prove", "--formula", "(and"]), 2);
        assert_eq!(run_args(&["correspond", "--max-worlds", "0", "--out", "/dev/null"]), 2);
    }

    #[test]
    fn structured_output_is_deterministic_and_bounded() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.json");
        let b = dir.path().join("b.json");
        for p in [&a, &b] {
            let code = run_args(&[
                "check-identity", "--id", "ax5", "--trials", "20", "--structured", "--out", p.to_str().unwrap(),
            ]);
            assert_eq!(code, 0);
        }
        let ta = fs::read(&a).unwrap();
        assert_eq!(ta, fs::read(&b).unwrap());
        let v: Value = serde_json::from_slice(&ta).unwrap();
        assert_eq!(v["bounds"]["max_worlds"], 2);
    }

    #[test]
    fn saturate_and_countermodel() {
        let dir = tempfile::tempdir().unwrap();
        let o = dir.path().join("o.txt");
        let o = o.to_str().unwrap();
        assert_eq!(run_args(&["saturate", "--left", "(dia (g p))", "--right", "(g p)", "--out", o]), 0);
        assert_eq!(run_args(&["saturate", "--left", "(g p)", "--right", "(g p)", "--out", o]), 1);
        assert!(fs::read_to_string(o).unwrap().contains("separable"));
        assert_eq!(run_args(&["countermodel", "--left", "(dia (g p))", "--right", "(g p)", "--out", o]), 0);
        assert!(fs::read_to_string(o).unwrap().contains("countermodel confirmed"));
    }

    #[test]
    fn richness_and_interpolate() {
        let dir = tempfile::tempdir().unwrap();
        let o = dir.path().join("o.txt");
        let o = o.to_str().unwrap();
        assert_eq!(run_args(&["richness", "--sigma", "suc", "--pi", "pred", "--out", o]), 0);
        let spec = dir.path().join("id.txt");
        fs::write(&spec, "id\n").unwrap();
        assert_eq!(run_args(&["richness", "--file", spec.to_str().unwrap(), "--out", o]), 1);
        assert_eq!(
            run_args(&["interpolate", "--left", "(and (g p) (g q))", "--right", "(or (g p) (g r))", "--out", o]),
            0
        );
        assert_eq!(run_args(&["interpolate", "--left", "(g p)", "--right", "(g r)", "--out", o]), 1);
    }
}
