//! Acceptance run: one PASS or FAIL line per criterion.
//!
//! Failing criteria are reported, not hidden; the process exits 0 so that
//! the rest of the test suite still runs. Read the lines.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use ded_core::chase::{brute_force_entails, chase, chase_until, entails, Bounds, ChaseTree, NodeStatus};
use ded_core::lab::{self, RuleShape};
use ded_core::machine::{compile, encode_input, gen_sigma_num, godel_number, simulate, to_ascii, SimResult};
use ded_core::query::parse_bcq;
use ded_core::rules::{ontology_to_deds, RuleSet};
use ded_core::terms::{active_domain, direct_product, parse_database, Atom, Database, Schema, Term};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn ms(d: Duration) -> String {
    format!("{}ms", d.as_millis())
}

fn entail_cli(dir: &Path, data: &str) -> (i32, String, Duration) {
    let rules = dir.join("cycle.rules");
    let db = dir.join("data.db");
    let q = dir.join("goal.q");
    std::fs::write(&rules, lab::example1_rules().to_string()).unwrap();
    std::fs::write(&db, data).unwrap();
    std::fs::write(&q, "? Goal.\n").unwrap();
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_dedchase"))
        .args(["entail", "--rules"])
        .arg(&rules)
        .arg("--data")
        .arg(&db)
        .arg("--query")
        .arg(&q)
        .args(["--depth", "50"])
        .output()
        .expect("binary runs");
    let took = start.elapsed();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).trim().to_string(), took)
}

fn cycle_rule() -> Outcome {
    let dir = tempfile::TempDir::new().unwrap();
    let (c4, o4, t4) = entail_cli(dir.path(), &lab::example1_database(4).to_string());
    let (c3, o3, t3) = entail_cli(dir.path(), &lab::example1_database(3).to_string());
    let mut ok = c4 == 0 && o4 == "ENTAILED" && c3 == 1 && o3.starts_with("NOT-ENTAILED");
    ok &= t4 < Duration::from_secs(5) && t3 < Duration::from_secs(5);
    let rules = lab::example1_rules();
    let goal = parse_bcq("? Goal.").unwrap();
    let mut agree = Vec::new();
    for k in 1..=5 {
        let d = lab::example1_database(k);
        let v = entails(&d, &rules, &goal, &Bounds::depth(50)).unwrap();
        let truth = brute_force_entails(&d, &rules, &goal).unwrap();
        let same = (v.is_entailed() && truth) || (v.is_not_entailed() && !truth);
        ok &= same;
        agree.push(format!("k={k}:{v}/{truth}"));
    }
    outcome(ok, format!("4-cycle {o4} in {}, 3-cycle {o3:.12} in {}; chase/search {}", ms(t4), ms(t3), agree.join(" ")))
}

fn golden_encoding() -> Outcome {
    let d = parse_database("E(a).").unwrap();
    let q = parse_bcq("? Q(X, a).").unwrap();
    let dsch = Schema::from_pairs([("D", 1), ("E", 1)]).unwrap();
    let qsch = Schema::from_pairs([("Q", 2)]).unwrap();
    let got = to_ascii(&encode_input(&d, &q, &dsch, &qsch).unwrap());
    let want = "1#10#1#oi#10#1#1#10010";
    outcome(got == want, format!("got {got}, want {want}"))
}

fn clique_rule() -> Outcome {
    let rules = lab::prop10_rules();
    let goal = parse_bcq("? Goal.").unwrap();
    let d = lab::prop10_database();
    let single = brute_force_entails(&d, &rules, &goal).unwrap();
    let square = brute_force_entails(&direct_product(&d, &d).unwrap(), &rules, &goal).unwrap();
    let schema = Schema::from_pairs([("A", 2)]).unwrap();
    let mut clique = Database::new(schema.clone());
    for x in 0..4 {
        for y in 0..4 {
            let f = Atom::new("A", vec![Term::constant(format!("k{x}")), Term::constant(format!("k{y}"))]);
            clique.insert(f).unwrap();
        }
    }
    let (mut disagree, mut positive) = (Vec::new(), 0);
    for seed in 0..200u64 {
        let mut r = lab::rng(seed);
        let db = if seed % 2 == 0 {
            lab::random_database(&mut r, &schema, 5, 20)
        } else {
            lab::a_graph_family(&mut r, &clique, 3).swap_remove((seed as usize / 2) % 3)
        };
        assert!(active_domain(&db).len() <= 5);
        let fo = lab::clique4_fo_eval(&db);
        positive += fo as usize;
        if fo != brute_force_entails(&db, &rules, &goal).unwrap() {
            disagree.push(seed);
        }
    }
    let ok = !single && square && disagree.is_empty();
    outcome(
        ok,
        format!("square-free {single}, square {square}; 200 databases, {positive} with a 4-clique, disagreements {disagree:?}"),
    )
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let (mut unknown, mut bad) = (0, Vec::new());
    for seed in 0..300u64 {
        let mut r = lab::rng(seed);
        let rules = lab::random_rules(&mut r, RuleShape::Full, 3);
        let d = lab::random_database(&mut r, &rules.schema, 3, 5);
        let q = lab::random_bcq(&mut r, &rules.schema, &active_domain(&d), 2);
        let v = entails(&d, &rules, &q, &Bounds::depth(200)).unwrap();
        let truth = brute_force_entails(&d, &rules, &q).unwrap();
        unknown += v.is_unknown() as usize;
        if (v.is_entailed() && !truth) || (v.is_not_entailed() && truth) {
            bad.push(seed);
        }
    }
    let took = start.elapsed();
    let ok = bad.is_empty() && unknown * 10 < 300 && took < Duration::from_secs(120);
    outcome(ok, format!("300 rule sets, contradictions {bad:?}, unknown {unknown}, {}", ms(took)))
}

fn deterministic_full(rules: &RuleSet) -> RuleSet {
    RuleSet::new(rules.rules.iter().filter(|r| r.k() == 1 && r.is_full()).cloned().collect()).unwrap()
}

fn undesired(d: &Database) -> bool {
    d.facts_of("Undesired").next().is_some()
}

fn chain_properties() -> Outcome {
    let d = parse_database("P(a). P(b). P(c).").unwrap();
    let rules = gen_sigma_num(&Schema::from_pairs([("P", 1)]).unwrap());
    let stop = parse_bcq("? Undesired.").unwrap();
    let start = Instant::now();
    let b = Bounds { max_depth: 300, workers: workers(), ..Bounds::default() };
    let tree = chase_until(&d, &rules, &b, &[stop], false).unwrap();
    let det = deterministic_full(&rules);
    let (mut branches, mut raw_bad, mut closed_bad, mut closed_out) = (0, 0, 0, 0);
    let mut sample = String::new();
    for l in tree.leaves() {
        let inst = l.instance.as_ref().unwrap();
        if l.status == NodeStatus::Failed || undesired(inst) {
            continue;
        }
        branches += 1;
        if !lab::chain_violations(inst, 8).is_empty() {
            raw_bad += 1;
        }
        // The same branch with its pending deterministic consequences added.
        let closed = chase(inst, &det, &Bounds::depth(1_000_000)).unwrap();
        let leaf = closed.leaves().next().unwrap();
        let ci = leaf.instance.as_ref().unwrap();
        if leaf.status == NodeStatus::Failed || undesired(ci) {
            closed_out += 1;
            continue;
        }
        let v = lab::chain_violations(ci, 8);
        if !v.is_empty() {
            closed_bad += 1;
            if sample.is_empty() {
                sample = v.join("; ");
            }
        }
    }
    let ok = branches > 0 && raw_bad == 0;
    outcome(
        ok,
        format!(
            "{branches} surviving branches at depth 300 in {}; {raw_bad} violate as cut; after deterministic closure {closed_out} turn inconsistent and {closed_bad} still violate (e.g. {sample})",
            ms(start.elapsed())
        ),
    )
}

fn chain_of(inst: &Database, n: usize) -> Vec<Term> {
    let Some(min) = inst.facts_of("Min").next() else { return Vec::new() };
    let mut out = vec![min.args[0].clone()];
    while out.len() < n {
        let last = out.last().unwrap().clone();
        match inst.facts_of("Succ").find(|f| f.args[0] == last) {
            Some(f) if !out.contains(&f.args[1]) => out.push(f.args[1].clone()),
            _ => break,
        }
    }
    out
}

struct RunSummary {
    sim: SimResult,
    branches: usize,
    accepting: usize,
    counts: BTreeMap<String, usize>,
}

fn machine_run(src: &str) -> RunSummary {
    let m = lab::fact_bit_machine();
    let dsch = Schema::from_pairs([("D0", 1)]).unwrap();
    let qsch = Schema::from_pairs([("Q0", 0)]).unwrap();
    let rules = compile(&m, &dsch, &qsch).unwrap();
    let mut d = parse_database(src).unwrap();
    d.schema.merge(&dsch).unwrap();
    let q = parse_bcq("? Q0.").unwrap();
    let input = encode_input(&d, &q, &dsch, &qsch).unwrap();
    let sim = simulate(&m, &input, 1000);
    let n_q = godel_number(&q, &d, &qsch).unwrap() as usize;
    let stops = [parse_bcq("? Undesired.").unwrap(), parse_bcq("? Accept(X), Q0.").unwrap()];
    let b = Bounds { max_depth: 20_000, max_nodes: 20_000, workers: workers(), ..Bounds::default() };
    let tree: ChaseTree = chase_until(&d, &rules, &b, &stops, false).unwrap();
    let (mut branches, mut accepting) = (0, 0);
    let mut counts = BTreeMap::new();
    for l in tree.leaves() {
        let inst = l.instance.as_ref().unwrap();
        *counts.entry(l.status.to_string()).or_insert(0) += 1;
        if l.status == NodeStatus::Failed || undesired(inst) {
            continue;
        }
        branches += 1;
        let c = chain_of(inst, n_q + 1);
        let accepts = c.len() > n_q && inst.contains(&Atom::new("Accept", vec![c[n_q].clone()]));
        if accepts && inst.contains(&Atom::new("Q0", vec![])) {
            accepting += 1;
        }
    }
    RunSummary { sim, branches, accepting, counts }
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let with = machine_run("D0(a).");
    let without = machine_run("");
    let ok = with.sim == SimResult::Accept
        && without.sim == SimResult::RejectExhausted
        && with.branches > 0
        && with.accepting == with.branches
        && without.accepting == 0;
    outcome(
        ok,
        format!(
            "D0(a): simulate {}, {} of {} surviving branches accept and copy Q0, leaves {:?}; empty: simulate {}, {} of {} accept, leaves {:?}; {}",
            with.sim,
            with.accepting,
            with.branches,
            with.counts,
            without.sim,
            without.accepting,
            without.branches,
            without.counts,
            ms(start.elapsed())
        ),
    )
}

fn closure_suites() -> Outcome {
    let start = Instant::now();
    let (mut ocqa, mut hom, mut prod) = (lab::Report::default(), lab::Report::default(), lab::Report::default());
    for seed in 0..200u64 {
        ocqa.extend(lab::check_ocqa_closure(&lab::example1_sample(seed).unwrap(), 1000, seed));
        ocqa.extend(lab::check_ocqa_closure(&lab::prop10_sample(seed).unwrap(), 1000, seed));
        let dtgd = lab::random_rules(&mut lab::rng(seed), RuleShape::Dtgd, 3);
        hom.extend(lab::check_hom_preservation(&dtgd, 1, seed).unwrap());
        let ed = lab::random_rules(&mut lab::rng(seed), RuleShape::Ed, 3);
        prod.extend(lab::check_product_preservation(&ed, 1, seed).unwrap());
    }
    let first = |r: &lab::Report| r.lines.iter().find(|l| !l.pass).map(|l| format!(" first: {l}")).unwrap_or_default();
    let ok = ocqa.is_clean() && hom.is_clean() && prod.is_clean();
    outcome(
        ok,
        format!(
            "ontology closure {} violations in {} checks, homomorphism {} in {}, product {} in {}; {}{}{}{}",
            ocqa.violations(),
            ocqa.lines.len(),
            hom.violations(),
            hom.lines.len(),
            prod.violations(),
            prod.lines.len(),
            ms(start.elapsed()),
            first(&ocqa),
            first(&hom),
            first(&prod)
        ),
    )
}

fn ontology_rules() -> Outcome {
    let (mut pairs_seen, mut bad) = (0, Vec::new());
    for seed in 0..50u64 {
        let pairs = lab::random_ontology_pairs(&mut lab::rng(seed));
        let rules = ontology_to_deds(&pairs).unwrap();
        for (d, q) in &pairs {
            pairs_seen += 1;
            if !entails(d, &rules, q, &Bounds::depth(500)).unwrap().is_entailed() {
                bad.push(format!("seed {seed}: {q} over {}", lab::one_line(d)));
            }
        }
    }
    outcome(bad.is_empty(), format!("50 samples, {pairs_seen} pairs, not entailed {bad:?}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("cycle rule entailment", cycle_rule),
        ("input encoding golden string", golden_encoding),
        ("clique rule and product", clique_rule),
        ("chase agrees with exhaustive search", oracle_equivalence),
        ("successor chain and arithmetic", chain_properties),
        ("compiled machine end to end", end_to_end),
        ("closure and preservation suites", closure_suites),
        ("ontology to rules", ontology_rules),
    ];
    let mut passed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        passed += o.pass as usize;
        println!("{} {}. {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("acceptance: {passed} of {} criteria pass", criteria.len());
}
