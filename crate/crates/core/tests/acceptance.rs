//! Acceptance suite. Each criterion prints one PASS/FAIL line to stderr
//! (bypassing the test harness capture) and the test fails if any does.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use msa::cli;
use msa::correspond::{correspondence_report, Schema};
use msa::interp::{parse_corpus, run_corpus, Method};
use msa::kripke::{eval, validate_system, Space};
use msa::par::Exec;
use msa::prover::{bounded_countermodel_prop, consequence, prove, Logic, ProveResult, Sequent};
use msa::random::{default_signature, random_term, TermShape};
use msa::rewrite::{check_identity, eq_at_bound, identity_names, normalize, Bounds, AX1_AS_PRINTED};
use msa::saturate::{build_countermodel, check_saturated, separable, witnesses_fresh, SaturationConfig};
use msa::syntax::{parse, IndexSupply, Signature};
use msa::transform::{rich_check, strongly_rich_check, Rule, SemigroupSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;

fn report(n: usize, name: &str, started: Instant, limit: Option<Duration>, out: Outcome) -> bool {
    let took = started.elapsed();
    let (ok, detail) = match out {
        Ok(d) => match limit {
            Some(l) if took > l => (false, format!("{d}; runtime {took:.1?} over the {l:?} limit")),
            _ => (true, d),
        },
        Err(d) => (false, d),
    };
    let line = format!("[{}] criterion {n:>2} {name}: {detail} ({took:.1?})\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    ok
}

fn run_cli(args: &[&str], out: &Path) -> (i32, Vec<u8>) {
    let o = out.to_str().unwrap();
    let argv = std::iter::once("msa").chain(args.iter().copied()).chain(["--structured", "--out", o]);
    let code = cli::run(argv);
    (code, std::fs::read(out).unwrap_or_default())
}

fn axiom_suite(dir: &Path) -> Outcome {
    let (code, body) = run_cli(&["check-axioms", "--systems", "200", "--max-worlds", "3", "--max-domain", "3", "--width", "3"], &dir.join("ax.json"));
    let v: Value = serde_json::from_slice(&body).map_err(|e| format!("bad output: {e}"))?;
    let mut bad = Vec::new();
    let mut vacuous = Vec::new();
    let mut printed = 0;
    for row in v["rows"].as_array().unwrap() {
        let name = row["name"].as_str().unwrap();
        let failures = row["failures"].as_u64().unwrap();
        if name == AX1_AS_PRINTED {
            printed = failures;
        } else if failures > 0 {
            bad.push(format!("{name} ({failures})"));
        } else if row["checked"].as_u64() == Some(0) {
            vacuous.push(name.to_string());
        }
    }
    if !bad.is_empty() || printed == 0 || code != 0 {
        return Err(format!("exit {code}, failing axioms {bad:?}, printed ax1 counterexamples {printed}"));
    }
    Ok(format!(
        "200 systems, ax1..ax14 zero failures, ax1-as-printed refuted {printed} times; not instantiable at width <= 3: {vacuous:?}"
    ))
}

fn identity_suite() -> Outcome {
    let b = Bounds::default();
    let mut failed = Vec::new();
    let mut n = 0;
    for id in identity_names().into_iter().filter(|id| *id != AX1_AS_PRINTED) {
        let r = check_identity(id, 200, &b).map_err(|e| format!("{id}: {e}"))?;
        n += 1;
        if !r.passed() || r.checked < 200 {
            failed.push(format!("{id}: {} failures, {} checked", r.failures, r.checked));
        }
    }
    if failed.is_empty() {
        Ok(format!("{n} identities, 200 trials each, zero failures"))
    } else {
        Err(failed.join("; "))
    }
}

fn normalization() -> Outcome {
    let sig = default_signature(3);
    let gens: Vec<String> = sig.names().cloned().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0xac_0003);
    let shape = TermShape::default();
    for k in 0..500 {
        let t = random_term(&mut rng, &gens, &shape);
        let nt = normalize(&t, &sig).map_err(|e| format!("#{k} {t}: {e}"))?;
        if normalize(&nt, &sig).map_err(|e| e.to_string())? != nt {
            return Err(format!("not idempotent on {t}"));
        }
        let out = eq_at_bound(&t, &nt, &sig, &Bounds::default()).map_err(|e| e.to_string())?;
        if !out.equal {
            return Err(format!("{t} normalized to {nt} differs at the bound"));
        }
    }
    Ok("500 terms sound at |W|<=2, |D|<=2, indices<3 and idempotent".into())
}

fn prover_agreement() -> Outcome {
    let gens = vec!["p".to_string(), "q".to_string()];
    let shape = TermShape { depth: 5, quantified: false, sugar: true, ..Default::default() };
    let mut disagreements = Vec::new();
    let mut provable = 0;
    for (li, logic) in Logic::ALL.into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xac_0004 + li as u64);
        for _ in 0..300 {
            let f = random_term(&mut rng, &gens, &shape);
            let res = prove(logic, &Sequent::goal(f.clone())).map_err(|e| e.to_string())?;
            let oracle = bounded_countermodel_prop(&f, logic, 4).map_err(|e| e.to_string())?;
            match (&res, &oracle) {
                (ProveResult::Provable(_), Some(_)) => disagreements.push(format!("{logic} proves {f}")),
                (ProveResult::Refuted(m), _) if m.value(&f).map_err(|e| e.to_string())? => {
                    disagreements.push(format!("{logic}: countermodel of {f} does not falsify it"))
                }
                (ProveResult::Provable(_), None) => provable += 1,
                _ => {}
            }
        }
    }
    let sig = Signature::new().with("p", []);
    let axioms = [
        ("(dia T)", [Logic::D, Logic::T, Logic::D4, Logic::S4].as_slice()),
        ("(imp (box (g p)) (g p))", &[Logic::T, Logic::S4]),
        ("(imp (box (g p)) (box (box (g p))))", &[Logic::K4, Logic::D4, Logic::S4]),
    ];
    for (text, containing) in axioms {
        let f = parse(text, &sig).unwrap();
        for l in Logic::ALL {
            let p = prove(l, &Sequent::goal(f.clone())).map_err(|e| e.to_string())?.is_provable();
            if p != containing.contains(&l) {
                disagreements.push(format!("{text} provable in {l}: {p}"));
            }
        }
    }
    if disagreements.is_empty() {
        Ok(format!("1800 formulas, {provable} provable, no disagreement; axiom pattern as expected"))
    } else {
        Err(disagreements.join("; "))
    }
}

fn interpolation() -> Outcome {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/data/interp_corpus.txt")).map_err(|e| e.to_string())?;
    let c = parse_corpus(&text).map_err(|e| e.to_string())?;
    for l in Logic::ALL {
        let n = c.problems.iter().filter(|p| p.logic == l).count();
        if n < 50 {
            return Err(format!("only {n} problems for {l}"));
        }
    }
    let mut bad = Vec::new();
    let mut fallbacks = 0;
    for (p, r) in c.problems.iter().zip(run_corpus(&c.problems, 2, Exec::default())) {
        match r {
            Ok((res, v)) => {
                fallbacks += (res.method == Method::GroundFallback) as usize;
                if !v.passed() || (p.is_propositional() && v.oracle_ok != Some(true)) {
                    bad.push(format!("{p}: {}", res.interpolant));
                }
            }
            Err(e) => bad.push(format!("{p}: {e}")),
        }
    }
    if bad.is_empty() {
        Ok(format!("{} problems interpolated and verified, {fallbacks} ground fallbacks", c.problems.len()))
    } else {
        Err(format!("{} failures: {}", bad.len(), bad.join("; ")))
    }
}

struct Seed {
    logic: Logic,
    left: &'static str,
    right: &'static str,
    quantified: bool,
}

const SEEDS: [Seed; 20] = [
    Seed { logic: Logic::K, left: "(dia (g p))", right: "(g p)", quantified: false },
    Seed { logic: Logic::K, left: "(c 0 (g p))", right: "(g p)", quantified: true },
    Seed { logic: Logic::K, left: "(g p)", right: "(box (g p))", quantified: false },
    Seed { logic: Logic::K, left: "(box (g p))", right: "(dia (g p))", quantified: false },
    Seed { logic: Logic::K, left: "(and (g p) (g q))", right: "(g r)", quantified: false },
    Seed { logic: Logic::K, left: "(box (or (g p) (g q)))", right: "(or (box (g p)) (box (g q)))", quantified: false },
    Seed { logic: Logic::K, left: "(dia (and (g p) (g q)))", right: "(box (g p))", quantified: false },
    Seed { logic: Logic::D, left: "(box (g p))", right: "(g p)", quantified: false },
    Seed { logic: Logic::D, left: "(dia (g p))", right: "(dia (dia (g p)))", quantified: false },
    Seed { logic: Logic::T, left: "(box (g p))", right: "(box (box (g p)))", quantified: false },
    Seed { logic: Logic::T, left: "(g p)", right: "(dia (box (g p)))", quantified: false },
    Seed { logic: Logic::K4, left: "(box (g p))", right: "(g p)", quantified: false },
    Seed { logic: Logic::D4, left: "(dia (g p))", right: "(box (g p))", quantified: false },
    Seed { logic: Logic::S4, left: "(dia (g p))", right: "(box (dia (g p)))", quantified: false },
    Seed { logic: Logic::K, left: "(g p)", right: "(q 0 (g p))", quantified: true },
    Seed { logic: Logic::K, left: "(dia (c 0 (g p)))", right: "(c 0 (g p))", quantified: true },
    Seed { logic: Logic::K, left: "(box (c 0 (g p)))", right: "(c 0 (box (g p)))", quantified: true },
    Seed { logic: Logic::K, left: "(and (c 0 (g p)) (c 0 (g q)))", right: "(c 0 (and (g p) (g q)))", quantified: true },
    Seed { logic: Logic::T, left: "(c 0 (g p))", right: "(box (g p))", quantified: true },
    Seed { logic: Logic::S4, left: "(dia (g p))", right: "(c 0 (g q))", quantified: true },
];

fn seed_sig(quantified: bool) -> Signature {
    if quantified {
        Signature::new().with("p", [0]).with("q", [0]).with("r", [])
    } else {
        Signature::new().with("p", []).with("q", []).with("r", [])
    }
}

fn seed_cfg(s: &Seed) -> SaturationConfig {
    SaturationConfig { logic: s.logic, steps: if s.quantified { 4 } else { 10 }, domain_bound: 2, depth: 2, tree_depth: None }
}

struct SeedRun {
    label: String,
    saturation: Result<(), String>,
    model: Result<(), String>,
    took: Duration,
}

fn run_seed(s: &Seed) -> SeedRun {
    let started = Instant::now();
    let label = format!("{}: {} / {}", s.logic, s.left, s.right);
    let sig = seed_sig(s.quantified);
    let a = parse(s.left, &sig).unwrap();
    let b = parse(s.right, &sig).unwrap();
    let cfg = seed_cfg(s);
    let width = sig.required_width(&a).unwrap().max(sig.required_width(&b).unwrap());
    let fail = |msg: String| SeedRun { label: label.clone(), saturation: Err(msg.clone()), model: Err(msg), took: started.elapsed() };
    match consequence(std::slice::from_ref(&a), std::slice::from_ref(&b), s.logic, cfg.domain_bound, width, &sig) {
        Ok(r) if !r.holds => {}
        Ok(_) => return fail("seed implication holds, pair is separable".into()),
        Err(e) => return fail(e.to_string()),
    }
    let x1 = a.generators();
    let x2 = b.generators();
    let common: BTreeSet<String> = x1.intersection(&x2).cloned().collect();
    let mut supply = IndexSupply::new(0);
    let m = match build_countermodel(std::slice::from_ref(&a), std::slice::from_ref(&b), &x1, &x2, &cfg, &mut supply, &sig) {
        Ok(m) => m,
        Err(e) => return fail(e.to_string()),
    };

    let saturation = (|| -> Result<(), String> {
        for (w, info) in m.worlds.iter().enumerate() {
            for (n, (t, f)) in info.pair.prefixes().into_iter().enumerate() {
                if let Some(c) = separable(&t, &f, &common, &cfg, &sig).map_err(|e| e.to_string())? {
                    return Err(format!("world {w} step {n} separable by {c}"));
                }
            }
            if !witnesses_fresh(&info.pair, &sig).map_err(|e| e.to_string())? {
                return Err(format!("world {w}: witness index not fresh"));
            }
        }
        let root = &m.worlds[0].pair;
        let rep = check_saturated(root, &root.universe(), &x1, &x2, &cfg, &sig).map_err(|e| e.to_string())?;
        let failing: Vec<String> = rep
            .conditions
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("({}) {}", c.condition, c.witness.clone().unwrap_or_default()))
            .collect();
        if failing.is_empty() {
            Ok(())
        } else {
            Err(format!("conditions failing: {}", failing.join(", ")))
        }
    })();

    let model = (|| -> Result<(), String> {
        let v = validate_system(&m.system);
        if !v.is_empty() {
            return Err(format!("invalid system: {v:?}"));
        }
        if !m.report.passed() {
            return Err(format!("report: {:?}", m.report));
        }
        let code = Space::new(&m.system, m.width).encode(&m.tuple);
        for (t, want) in [(&a, true), (&b, false)] {
            let e = eval(t, &m.system, &m.valuation, m.width).map_err(|e| e.to_string())?;
            if e.tables[m.world][code] != want {
                return Err(format!("re-evaluation of {t} gives {}", !want));
            }
        }
        Ok(())
    })();
    SeedRun { label, saturation, model, took: started.elapsed() }
}

fn summarize(runs: &[SeedRun], pick: impl Fn(&SeedRun) -> &Result<(), String>, what: &str) -> Outcome {
    let bad: Vec<String> =
        runs.iter().filter_map(|r| pick(r).as_ref().err().map(|e| format!("{}: {e}", r.label))).collect();
    if bad.is_empty() {
        Ok(format!("{} seeds, {what}", runs.len()))
    } else {
        Err(format!("{} of {} seeds fail: {}", bad.len(), runs.len(), bad.join("; ")))
    }
}

fn correspondence() -> Outcome {
    let r = correspondence_report(3, &Schema::ALL, Exec::default()).map_err(|e| e.to_string())?;
    let rows: Vec<String> = r
        .rows
        .iter()
        .map(|row| format!("{} {}/{} of {}", row.schema, row.validating, row.with_property, row.frames))
        .collect();
    if r.passed() && r.rows.iter().all(|row| row.frames == 530) {
        Ok(format!("zero discrepancies; validating/with property: {}", rows.join(", ")))
    } else {
        Err(format!("{} discrepancies", r.discrepancies.len()))
    }
}

fn richness() -> Outcome {
    let strong = strongly_rich_check(Rule::Suc, Rule::Pred, 5, 16);
    let id = rich_check(&SemigroupSpec::parse("id").unwrap()).map_err(|e| e.to_string())?;
    if strong.pass && id.split_pair.is_fail() {
        Ok("(suc, pred) strongly rich for n <= 5 in window 16; {id} fails condition (2)".into())
    } else {
        Err(format!("strong pass {}, id split pair {:?}", strong.pass, id.split_pair))
    }
}

fn determinism(dir: &Path) -> Outcome {
    let cm = dir.join("cm.json").to_str().unwrap().to_string();
    let sig = dir.join("sig.txt").to_str().unwrap().to_string();
    let runs: [&[&str]; 7] = [
        &["check-axioms", "--systems", "50"],
        &["check-identity", "--id", "L5", "--id", "tau-ii", "--trials", "50"],
        &["normalize", "--formula", "(s 0 1 (c 1 (and (g p) (box (g q)))))"],
        &["prove", "--logic", "S4", "--formula", "(imp (dia (box (g p))) (box (dia (g p))))", "--model", &cm],
        &["countermodel", "--left", "(c 0 (g p))", "--right", "(g p)", "--sig", &sig],
        &["correspond", "--max-worlds", "3"],
        &["richness", "--sigma", "suc", "--pi", "pred"],
    ];
    std::fs::write(&sig, "p: 0\n").unwrap();
    for args in runs {
        let (c1, a) = run_cli(args, &dir.join("first.json"));
        let (c2, b) = run_cli(args, &dir.join("second.json"));
        if c1 != c2 || a != b || a.is_empty() {
            return Err(format!("`{}` differs between runs", args.join(" ")));
        }
        let v: Value = serde_json::from_slice(&a).map_err(|e| e.to_string())?;
        if v.get("bounds").is_none() {
            return Err(format!("`{}` output does not embed its bounds", args.join(" ")));
        }
    }
    Ok(format!("{} commands byte-identical across two runs, bounds embedded", runs.len()))
}

#[test]
fn acceptance_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let mins = |m: u64| Some(Duration::from_secs(60 * m));
    let mut ok = true;

    let t = Instant::now();
    ok &= report(1, "axiom suite", t, mins(2), axiom_suite(dir.path()));
    let t = Instant::now();
    ok &= report(2, "identity suite", t, mins(5), identity_suite());
    let t = Instant::now();
    ok &= report(3, "normalization soundness", t, None, normalization());
    let t = Instant::now();
    ok &= report(4, "prover/oracle agreement", t, None, prover_agreement());
    let t = Instant::now();
    ok &= report(5, "interpolation corpus", t, mins(10), interpolation());

    let t = Instant::now();
    let runs: Vec<SeedRun> = SEEDS.iter().map(run_seed).collect();
    let slowest = runs.iter().map(|r| r.took).max().unwrap_or_default();
    ok &= report(6, "saturation replay", t, None, summarize(&runs, |r| &r.saturation, "replay inseparable, conditions (1)-(6) hold, witnesses fresh"));
    let model = summarize(&runs, |r| &r.model, "valid systems, reports and re-evaluation confirm every seed").and_then(|d| {
        if slowest > Duration::from_secs(300) {
            Err(format!("{d}; slowest seed {slowest:.1?} over 5 minutes"))
        } else {
            Ok(format!("{d}; slowest seed {slowest:.1?}"))
        }
    });
    ok &= report(7, "countermodel construction", t, None, model);

    let t = Instant::now();
    ok &= report(8, "correspondence", t, mins(1), correspondence());
    let t = Instant::now();
    ok &= report(9, "richness", t, None, richness());
    let t = Instant::now();
    ok &= report(10, "determinism", t, None, determinism(dir.path()));

    assert!(ok, "some acceptance criteria failed; see the lines above");
}
