//! Worked examples, counterexamples and randomized checkers for the closure
//! properties of rule-defined ontologies.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chase::{brute_force_entails, chase, entails, model_check, Bounds, NodeStatus, Verdict};
use crate::error::{Error, Result};
use crate::machine::{convergent_closure, Move, Ntm, Sym};
use crate::query::{conjoin, equivalent, freeze, implies, Bcq};
use crate::rules::{parse_rule_str, Label, RuleSet};
use crate::terms::{active_domain, direct_product, disjoint_union_over, find_homomorphisms, Atom, Database, Schema, Term};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One line of a checker report: `PASS|FAIL | check | seed | witness`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportLine {
    pub pass: bool,
    pub check: String,
    pub seed: u64,
    pub witness: String,
}

impl fmt::Display for ReportLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{verdict} | {} | {} | {}", self.check, self.seed, self.witness)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Report {
    pub lines: Vec<ReportLine>,
}

impl Report {
    fn push(&mut self, pass: bool, check: &str, seed: u64, witness: impl Into<String>) {
        self.lines.push(ReportLine { pass, check: check.to_string(), seed, witness: witness.into() });
    }

    pub fn violations(&self) -> usize {
        self.lines.iter().filter(|l| !l.pass).count()
    }

    pub fn is_clean(&self) -> bool {
        self.violations() == 0
    }

    pub fn extend(&mut self, other: Report) {
        self.lines.extend(other.lines);
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.lines {
            writeln!(f, "{l}")?;
        }
        Ok(())
    }
}

/// A database on one line, for report witnesses.
pub fn one_line(d: &Database) -> String {
    let facts: Vec<String> = d.facts().map(|f| f.to_string()).collect();
    format!("{{{}}}", facts.join(", "))
}

fn rules_from(lines: &[String]) -> RuleSet {
    let rules = lines.iter().map(|l| parse_rule_str(l).expect("built-in rule parses")).collect();
    RuleSet::new(rules).expect("built-in rules share a schema")
}

fn a_schema() -> Schema {
    Schema::from_pairs([("A", 2)]).expect("one relation")
}

fn distinctness(n: usize) -> Vec<String> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            out.push(format!("X{i} = X{j}"));
        }
    }
    out
}

/// A 4-cycle of symmetric A-edges forces Goal unless two of its nodes
/// coincide.
pub fn example1_rules() -> RuleSet {
    let mut body = Vec::new();
    for i in 0..4 {
        let j = (i + 1) % 4;
        body.push(format!("A(X{i},X{j})"));
        body.push(format!("A(X{j},X{i})"));
    }
    let mut heads = vec!["Goal".to_string()];
    heads.extend(distinctness(4));
    rules_from(&[format!("{} -> {}.", body.join(", "), heads.join(" | "))])
}

/// The symmetric k-cycle over a0..a(k-1). The successor of the last node
/// wraps to a0, so k = 1 gives the single loop A(a0,a0).
pub fn example1_database(k: usize) -> Database {
    let mut d = Database::new(a_schema());
    let c = |i: usize| Term::constant(format!("a{i}"));
    for i in 0..k {
        let j = (i + 1) % k;
        d.insert(Atom::new("A", vec![c(i), c(j)])).expect("schema fact");
        d.insert(Atom::new("A", vec![c(j), c(i)])).expect("schema fact");
    }
    d
}

/// A complete A-graph with loops on four nodes forces Goal unless two nodes
/// coincide.
pub fn prop10_rules() -> RuleSet {
    let mut body = Vec::new();
    for i in 0..4 {
        for j in 0..4 {
            body.push(format!("A(X{i},X{j})"));
        }
    }
    let mut heads = vec!["Goal".to_string()];
    heads.extend(distinctness(4));
    rules_from(&[format!("{} -> {}.", body.join(", "), heads.join(" | "))])
}

/// The complete A-graph with loops on {a, b}.
pub fn prop10_database() -> Database {
    let mut d = Database::new(a_schema());
    for x in ["a", "b"] {
        for y in ["a", "b"] {
            d.insert(Atom::new("A", vec![Term::constant(x), Term::constant(y)])).expect("schema fact");
        }
    }
    d
}

/// Four distinct constants with every A-edge among them, loops included.
pub fn clique4_fo_eval(d: &Database) -> bool {
    let dom: Vec<Term> = active_domain(d).into_iter().collect();
    let edge = |x: &Term, y: &Term| d.contains(&Atom::new("A", vec![x.clone(), y.clone()]));
    let n = dom.len();
    let mut pick = Vec::with_capacity(4);
    fn go(dom: &[Term], from: usize, pick: &mut Vec<usize>, edge: &dyn Fn(&Term, &Term) -> bool) -> bool {
        if pick.len() == 4 {
            return true;
        }
        for i in from..dom.len() {
            let ok = edge(&dom[i], &dom[i]) && pick.iter().all(|&p| edge(&dom[p], &dom[i]) && edge(&dom[i], &dom[p]));
            if ok {
                pick.push(i);
                if go(dom, i + 1, pick, edge) {
                    return true;
                }
                pick.pop();
            }
        }
        false
    }
    n >= 4 && go(&dom, 0, &mut pick, &edge)
}

/// Frozen copies of the queries, sharing only the constants of D.
pub fn universal_model(d: &Database, queries: &[Bcq]) -> Result<Database> {
    let adom = active_domain(d);
    for q in queries {
        if !q.constants().is_subset(&adom) {
            return Err(Error::precondition(format!("query {q} uses a constant outside the database")));
        }
    }
    let parts: Vec<Database> = queries.iter().map(freeze).collect();
    disjoint_union_over(&adom, &parts)
}

/// A finite piece of an ontology: the member pairs, plus the databases and
/// queries on which membership counts as decided. A pair over a decided
/// database and a decided query is outside the ontology unless listed.
#[derive(Debug, Clone, Default)]
pub struct OntologySample {
    pub schema_d: Schema,
    pub schema_q: Schema,
    pub pairs: Vec<(Database, Bcq)>,
    pub databases: Vec<Database>,
    pub queries: Vec<Bcq>,
}

impl OntologySample {
    /// Decided exactly on the databases and queries of `pairs`.
    pub fn new(schema_d: Schema, schema_q: Schema, pairs: Vec<(Database, Bcq)>) -> OntologySample {
        let mut databases: Vec<Database> = Vec::new();
        let mut queries: Vec<Bcq> = Vec::new();
        for (d, q) in &pairs {
            if !databases.iter().any(|e| same_facts(e, d)) {
                databases.push(d.clone());
            }
            if !queries.iter().any(|e| equivalent(e, q)) {
                queries.push(q.clone());
            }
        }
        OntologySample { schema_d, schema_q, pairs, databases, queries }
    }

    /// Membership decided on every database and query given; the members
    /// are the pairs the rules entail, as decided by exhaustive search.
    pub fn from_full_rules(
        rules: &RuleSet,
        schema_d: Schema,
        schema_q: Schema,
        databases: Vec<Database>,
        queries: Vec<Bcq>,
    ) -> Result<OntologySample> {
        let mut pairs = Vec::new();
        for d in &databases {
            let adom = active_domain(d);
            for q in &queries {
                if q.constants().is_subset(&adom) && brute_force_entails(d, rules, q)? {
                    pairs.push((d.clone(), q.clone()));
                }
            }
        }
        Ok(OntologySample { schema_d, schema_q, pairs, databases, queries })
    }

    /// Some(true) for members, Some(false) for decided non-members, None
    /// when the sample says nothing.
    pub fn membership(&self, d: &Database, q: &Bcq) -> Option<bool> {
        if self.pairs.iter().any(|(e, p)| same_facts(e, d) && equivalent(p, q)) {
            return Some(true);
        }
        let decided =
            self.databases.iter().any(|e| same_facts(e, d)) && self.queries.iter().any(|p| equivalent(p, q));
        decided.then_some(false)
    }
}

fn same_facts(a: &Database, b: &Database) -> bool {
    a.len() == b.len() && a.facts().all(|f| b.contains(f))
}

/// Looks for violations of the three closure conditions, checking at most
/// `budget` candidate pairs per condition. Passing conditions get one PASS
/// line each; every violation gets a FAIL line.
pub fn check_ocqa_closure(o: &OntologySample, budget: usize, seed: u64) -> Report {
    let mut report = Report::default();

    let mut fails = 0;
    let mut seen = 0;
    'conj: for (d, q1) in &o.pairs {
        for (e, q2) in &o.pairs {
            if !same_facts(d, e) {
                continue;
            }
            if seen == budget {
                break 'conj;
            }
            seen += 1;
            let both = conjoin(q1, q2);
            if o.membership(d, &both) == Some(false) {
                fails += 1;
                report.push(false, "closure-conjunction", seed, format!("{} with {q1} and {q2}", one_line(d)));
            }
        }
    }
    if fails == 0 {
        report.push(true, "closure-conjunction", seed, format!("{seen} pairs"));
    }

    let mut fails = 0;
    let mut seen = 0;
    'imp: for (d, q) in &o.pairs {
        let adom = active_domain(d);
        for q2 in &o.queries {
            if !q2.constants().is_subset(&adom) || !implies(q, q2) {
                continue;
            }
            if seen == budget {
                break 'imp;
            }
            seen += 1;
            if o.membership(d, q2) == Some(false) {
                fails += 1;
                report.push(false, "closure-implication", seed, format!("{} with {q} implying {q2}", one_line(d)));
            }
        }
    }
    if fails == 0 {
        report.push(true, "closure-implication", seed, format!("{seen} pairs"));
    }

    let mut fails = 0;
    let mut seen = 0;
    'hom: for (d, q) in &o.pairs {
        for e in &o.databases {
            if find_homomorphisms(d, e, &q.constants(), true).next().is_none() {
                continue;
            }
            if seen == budget {
                break 'hom;
            }
            seen += 1;
            if o.membership(e, q) == Some(false) {
                fails += 1;
                report.push(false, "closure-injective-hom", seed, format!("{} into {} with {q}", one_line(d), one_line(e)));
            }
        }
    }
    if fails == 0 {
        report.push(true, "closure-injective-hom", seed, format!("{seen} pairs"));
    }
    report
}

/// Small A-databases for the closure suites: random graphs, half of them
/// grown from a renamed copy of `seed_db`, each paired with an extension
/// and a renaming so that injective homomorphisms exist inside the sample.
pub fn a_graph_family(r: &mut impl Rng, seed_db: &Database, size: usize) -> Vec<Database> {
    let names: Vec<String> = (0..5).map(|i| format!("c{i}")).collect();
    let mut out: Vec<Database> = Vec::new();
    while out.len() < size {
        let mut base = if r.gen_bool(0.5) {
            let mut perm = names.clone();
            perm.shuffle(r);
            let map: BTreeMap<Term, Term> =
                active_domain(seed_db).into_iter().zip(perm.into_iter().map(Term::Const)).collect();
            seed_db.rename(|t| map.get(t).cloned().unwrap_or_else(|| t.clone()))
        } else {
            Database::new(a_schema())
        };
        let extra = r.gen_range(0..4);
        for _ in 0..extra {
            let x = Term::constant(names.choose(r).expect("names"));
            let y = Term::constant(names.choose(r).expect("names"));
            base.insert(Atom::new("A", vec![x, y])).expect("schema fact");
        }
        if base.is_empty() {
            continue;
        }
        let mut bigger = base.clone();
        let x = Term::constant(names.choose(r).expect("names"));
        let y = Term::constant(names.choose(r).expect("names"));
        bigger.insert(Atom::new("A", vec![x, y])).expect("schema fact");
        let renamed = base.rename(|t| match t {
            Term::Const(c) => Term::Const(format!("{c}r")),
            other => other.clone(),
        });
        out.push(base);
        out.push(bigger);
        out.push(renamed);
    }
    out.truncate(size);
    out
}

fn goal_sample(rules: &RuleSet, seed_db: &Database, seed: u64) -> Result<OntologySample> {
    let mut r = rng(seed);
    let dbs = a_graph_family(&mut r, seed_db, 6);
    let qsch = Schema::from_pairs([("Goal", 0)])?;
    OntologySample::from_full_rules(rules, a_schema(), qsch, dbs, vec![Bcq::atom("Goal", &[])])
}

/// Sample of the ontology defined by the symmetric-cycle rule.
pub fn example1_sample(seed: u64) -> Result<OntologySample> {
    goal_sample(&example1_rules(), &example1_database(4), seed)
}

/// Sample of the ontology defined by the complete-graph rule.
pub fn prop10_sample(seed: u64) -> Result<OntologySample> {
    let mut clique = Database::new(a_schema());
    for x in 0..4 {
        for y in 0..4 {
            clique
                .insert(Atom::new("A", vec![Term::constant(format!("k{x}")), Term::constant(format!("k{y}"))]))
                .expect("schema fact");
        }
    }
    goal_sample(&prop10_rules(), &clique, seed)
}

fn has_label(rules: &RuleSet, l: Label) -> bool {
    rules.rules.iter().all(|r| r.classify().contains(&l))
}

fn closure_bounds() -> Bounds {
    Bounds { max_depth: 60, max_nodes: 2000, ..Bounds::default() }
}

/// Samples D, a homomorphism h fixing the query constants, D' = h(D) plus
/// noise, and a query; an entailment over D must not be refuted over D'.
pub fn check_hom_preservation(rules: &RuleSet, budget: usize, seed: u64) -> Result<Report> {
    if !has_label(rules, Label::Dtgd) {
        return Err(Error::precondition("homomorphism preservation needs equality-free rules"));
    }
    let schema = sample_schema(rules);
    let mut report = Report::default();
    for s in seed..seed + budget as u64 {
        let mut r = rng(s);
        let d = random_database(&mut r, &schema, 3, 5);
        let q = random_bcq(&mut r, &schema, &active_domain(&d), 2);
        let fixed = q.constants();
        let targets: Vec<Term> = (0..3).map(|i| Term::constant(format!("t{i}"))).collect();
        let h: BTreeMap<Term, Term> = active_domain(&d)
            .into_iter()
            .map(|c| {
                let img = if fixed.contains(&c) { c.clone() } else { targets.choose(&mut r).expect("targets").clone() };
                (c, img)
            })
            .collect();
        let mut e = d.rename(|t| h.get(t).cloned().unwrap_or_else(|| t.clone()));
        let noise = random_database(&mut r, &schema, 3, 2);
        e = e.union(&noise)?;
        let before = entails(&d, rules, &q, &closure_bounds())?;
        if !before.is_entailed() {
            report.push(true, "hom-preservation", s, "premise not entailed");
            continue;
        }
        let after = entails(&e, rules, &q, &closure_bounds())?;
        let pass = !after.is_not_entailed();
        report.push(pass, "hom-preservation", s, format!("{} -> {} with {q}: {after}", one_line(&d), one_line(&e)));
    }
    Ok(report)
}

/// The saturated chase result, when the single branch ends inside the
/// bounds without contradiction.
fn finite_model(d: &Database, rules: &RuleSet) -> Result<Option<Database>> {
    let tree = chase(d, rules, &closure_bounds())?;
    let leaves: Vec<_> = tree.leaves().collect();
    match leaves.as_slice() {
        [leaf] if leaf.status == NodeStatus::Saturated => Ok(leaf.instance.clone()),
        _ => Ok(None),
    }
}

fn entailed_exactly(d: &Database, rules: &RuleSet, q: &Bcq) -> Result<Option<bool>> {
    match brute_force_entails(d, rules, q) {
        Ok(b) => Ok(Some(b)),
        Err(Error::SizeGuard(_)) => Ok(match entails(d, rules, q, &Bounds::depth(400))? {
            Verdict::Entailed => Some(true),
            Verdict::NotEntailed { .. } => Some(false),
            Verdict::Unknown { .. } => None,
        }),
        Err(e) => Err(e),
    }
}

/// Products of models are models; for full rules, non-entailment survives
/// products of databases.
pub fn check_product_preservation(rules: &RuleSet, budget: usize, seed: u64) -> Result<Report> {
    if !has_label(rules, Label::Ed) {
        return Err(Error::precondition("product preservation needs single-disjunct rules"));
    }
    if !rules.constants().is_empty() {
        return Err(Error::precondition("product preservation needs constant-free rules"));
    }
    let schema = sample_schema(rules);
    let mut report = Report::default();
    for s in seed..seed + budget as u64 {
        let mut r = rng(s);
        let d1 = random_database(&mut r, &schema, 3, 4);
        let d2 = random_database(&mut r, &schema, 3, 4);
        match (finite_model(&d1, rules)?, finite_model(&d2, rules)?) {
            (Some(i), Some(j)) => {
                let p = direct_product(&i, &j)?;
                let pass = model_check(&p, rules);
                report.push(pass, "product-model", s, format!("{} x {}", one_line(&i), one_line(&j)));
            }
            _ => report.push(true, "product-model", s, "no finite model within bounds"),
        }
        if !rules.is_full() {
            continue;
        }
        let q = random_bcq(&mut r, &schema, &BTreeSet::new(), 2);
        let left = entailed_exactly(&d1, rules, &q)?;
        let right = entailed_exactly(&d2, rules, &q)?;
        if left != Some(false) || right != Some(false) {
            report.push(true, "product-non-entailment", s, "premise not refuted");
            continue;
        }
        let p = direct_product(&d1, &d2)?;
        let prod = entailed_exactly(&p, rules, &q)?;
        let pass = prod != Some(true);
        report.push(pass, "product-non-entailment", s, format!("{} x {} with {q}", one_line(&d1), one_line(&d2)));
    }
    Ok(report)
}

/// Dominoes with horizontal and vertical compatibility relations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DominoSystem {
    pub dominos: BTreeSet<String>,
    pub h: BTreeSet<(String, String)>,
    pub v: BTreeSet<(String, String)>,
}

pub fn domino_to_database(s: &DominoSystem) -> Database {
    let mut d = Database::new(Schema::from_pairs([("H", 2), ("V", 2)]).expect("two relations"));
    for (rel, pairs) in [("H", &s.h), ("V", &s.v)] {
        for (x, y) in pairs {
            d.insert(Atom::new(rel, vec![Term::constant(x), Term::constant(y)])).expect("schema fact");
        }
    }
    d
}

/// The relations the rules mention, or a binary and a unary relation when
/// the rule set is empty.
fn sample_schema(rules: &RuleSet) -> Schema {
    if rules.schema.is_empty() {
        Schema::from_pairs([("E", 2), ("P", 1)]).expect("two relations")
    } else {
        rules.schema.clone()
    }
}

/// Up to `max_facts` facts over constants c0..c(max_consts-1).
pub fn random_database(r: &mut impl Rng, schema: &Schema, max_consts: usize, max_facts: usize) -> Database {
    let n = r.gen_range(1..=max_consts.max(1));
    let rels: Vec<(&str, usize)> = schema.iter().collect();
    let mut d = Database::new(schema.clone());
    if rels.is_empty() {
        return d;
    }
    let count = r.gen_range(0..=max_facts);
    for _ in 0..count {
        let (rel, arity) = rels[r.gen_range(0..rels.len())];
        let args = (0..arity).map(|_| Term::constant(format!("c{}", r.gen_range(0..n)))).collect();
        d.insert(Atom::new(rel, args)).expect("schema fact");
    }
    d
}

/// A query with up to `max_atoms` atoms over variables X0..X2, with an
/// occasional constant drawn from `consts`.
pub fn random_bcq(r: &mut impl Rng, schema: &Schema, consts: &BTreeSet<Term>, max_atoms: usize) -> Bcq {
    let rels: Vec<(&str, usize)> = schema.iter().collect();
    let consts: Vec<&Term> = consts.iter().collect();
    let n = r.gen_range(1..=max_atoms.max(1));
    let atoms = (0..n)
        .map(|_| {
            let (rel, arity) = rels[r.gen_range(0..rels.len())];
            let args = (0..arity)
                .map(|_| {
                    if !consts.is_empty() && r.gen_bool(0.2) {
                        consts[r.gen_range(0..consts.len())].clone()
                    } else {
                        Term::var(format!("X{}", r.gen_range(0..3)))
                    }
                })
                .collect();
            Atom::new(rel, args)
        })
        .collect();
    Bcq::new(atoms).expect("nonempty query")
}

const SAMPLE_RELS: [(&str, usize); 2] = [("E", 2), ("P", 1)];

fn random_atom_text(r: &mut impl Rng, vars: &[&str]) -> String {
    let (rel, arity) = SAMPLE_RELS[r.gen_range(0..SAMPLE_RELS.len())];
    let args: Vec<&str> = (0..arity).map(|_| *vars.choose(r).expect("vars")).collect();
    format!("{rel}({})", args.join(","))
}

fn random_body(r: &mut impl Rng) -> (String, Vec<&'static str>) {
    let n = r.gen_range(1..=2);
    let mut used: Vec<&'static str> = Vec::new();
    let mut atoms = Vec::new();
    for _ in 0..n {
        let a = random_atom_text(r, &["X", "Y", "Z"]);
        for v in ["X", "Y", "Z"] {
            if a.contains(v) && !used.contains(&v) {
                used.push(v);
            }
        }
        atoms.push(a);
    }
    (atoms.join(", "), used)
}

/// Rule kinds the generators produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleShape {
    /// No existentials; disjunctions and equalities allowed.
    Full,
    /// Equality-free; disjunctions and existentials allowed.
    Dtgd,
    /// One disjunct; existentials and equalities allowed.
    Ed,
}

/// One to `max_rules` rules over E/2 and P/1 in the requested shape.
pub fn random_rules(r: &mut impl Rng, shape: RuleShape, max_rules: usize) -> RuleSet {
    let n = r.gen_range(1..=max_rules.max(1));
    let mut lines = Vec::new();
    for _ in 0..n {
        let (body, used) = random_body(r);
        let k = match shape {
            RuleShape::Ed => 1,
            _ => r.gen_range(1..=2),
        };
        let mut heads = Vec::new();
        for _ in 0..k {
            let eq_ok = shape != RuleShape::Dtgd && used.len() >= 2;
            if eq_ok && r.gen_bool(0.3) {
                heads.push(format!("{} = {}", used[0], used[1]));
                continue;
            }
            let mut pool = used.clone();
            if shape != RuleShape::Full && r.gen_bool(0.3) {
                pool.push("W");
            }
            let atoms: Vec<String> = (0..r.gen_range(1..=2)).map(|_| random_atom_text(r, &pool)).collect();
            heads.push(atoms.join(", "));
        }
        lines.push(format!("{body} -> {}.", heads.join(" | ")));
    }
    let mut rs = rules_from(&lines);
    for (rel, arity) in SAMPLE_RELS {
        if !rs.schema.contains(rel) {
            rs.schema.add(rel, arity).expect("fresh relation");
        }
    }
    rs
}

/// A finite ontology sample over D = {R/2, S/1} and Q = {Q/2, G/0}: one
/// to four pairs with nonempty databases and queries over their constants.
pub fn random_ontology_pairs(r: &mut impl Rng) -> Vec<(Database, Bcq)> {
    let dsch = Schema::from_pairs([("R", 2), ("S", 1)]).expect("two relations");
    let qsch = Schema::from_pairs([("Q", 2), ("G", 0)]).expect("two relations");
    let n = r.gen_range(1..=4);
    let mut out = Vec::new();
    while out.len() < n {
        let d = random_database(r, &dsch, 3, 4);
        if d.is_empty() {
            continue;
        }
        let q = random_bcq(r, &qsch, &active_domain(&d), 2);
        out.push((d, q));
    }
    out
}

/// Violations of the number-line properties on one chase instance: LT a
/// strict linear order on DC, one Min, a functional and injective Succ
/// chain of at least `n` elements from Min, and Add/Mul/Bit facts among the
/// first `n` chain elements agreeing with integer arithmetic.
pub fn chain_violations(inst: &Database, n: usize) -> Vec<String> {
    let mut out = Vec::new();
    let dc: Vec<&Term> = inst.facts_of("DC").map(|f| &f.args[0]).collect();
    let lt: BTreeSet<(&Term, &Term)> = inst.facts_of("LT").map(|f| (&f.args[0], &f.args[1])).collect();
    for &x in &dc {
        if lt.contains(&(x, x)) {
            out.push(format!("LT({x},{x})"));
        }
        for &y in &dc {
            if x < y && !lt.contains(&(x, y)) && !lt.contains(&(y, x)) {
                out.push(format!("{x} and {y} unordered"));
            }
            for &z in &dc {
                if lt.contains(&(x, y)) && lt.contains(&(y, z)) && !lt.contains(&(x, z)) {
                    out.push(format!("LT not transitive on {x},{y},{z}"));
                }
            }
        }
    }
    let mins: Vec<&Term> = inst.facts_of("Min").map(|f| &f.args[0]).collect();
    if mins.len() != 1 {
        out.push(format!("{} Min facts", mins.len()));
        return out;
    }
    let mut succ: BTreeMap<&Term, Vec<&Term>> = BTreeMap::new();
    let mut pred: BTreeMap<&Term, usize> = BTreeMap::new();
    for f in inst.facts_of("Succ") {
        succ.entry(&f.args[0]).or_default().push(&f.args[1]);
        *pred.entry(&f.args[1]).or_default() += 1;
    }
    for (x, ys) in &succ {
        if ys.len() > 1 {
            out.push(format!("{x} has {} successors", ys.len()));
        }
    }
    for (y, k) in &pred {
        if *k > 1 {
            out.push(format!("{y} has {k} predecessors"));
        }
    }
    let mut chain: Vec<&Term> = vec![mins[0]];
    while chain.len() < n {
        let Some(next) = succ.get(chain[chain.len() - 1]).and_then(|v| v.first()) else { break };
        if chain.contains(next) {
            out.push(format!("Succ cycle at {next}"));
            break;
        }
        chain.push(next);
    }
    if chain.len() < n {
        out.push(format!("chain from Min has {} elements", chain.len()));
    }
    let value: BTreeMap<&Term, usize> = chain.iter().enumerate().map(|(i, t)| (*t, i)).collect();
    let vals = |f: &Atom| -> Option<Vec<usize>> { f.args.iter().map(|t| value.get(t).copied()).collect() };
    for (rel, op) in [("Add", (|a, b| a + b) as fn(usize, usize) -> usize), ("Mul", |a, b| a * b)] {
        for f in inst.facts_of(rel) {
            if let Some(v) = vals(f) {
                if op(v[0], v[1]) != v[2] {
                    out.push(format!("{f} claims {} {rel} {} = {}", v[0], v[1], v[2]));
                }
            }
        }
    }
    for (rel, bit) in [("Bit0", 0), ("Bit1", 1)] {
        for f in inst.facts_of(rel) {
            if let Some(v) = vals(f) {
                if (v[0] >> v[1]) & 1 != bit {
                    out.push(format!("{f} claims bit {} of {} is {bit}", v[1], v[0]));
                }
            }
        }
    }
    out
}

/// A deterministic machine that walks the input and accepts exactly when
/// it meets a barred one, closed so that it is convergent.
pub fn fact_bit_machine() -> Ntm {
    let mut m = Ntm::new("s0");
    for a in [Sym::Zero, Sym::One, Sym::Sep, Sym::ZeroBar] {
        m.add("s0", a, Sym::Blank, "s0", Sym::Blank, Move::R);
    }
    m.add("s0", Sym::OneBar, Sym::Blank, "acc", Sym::Blank, Move::R);
    m.accept("acc");
    convergent_closure(&m).expect("deterministic")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::{evaluate, parse_bcq};
    use crate::terms::{is_isomorphic, parse_database};

    #[test]
    fn example1_shapes() {
        let r = example1_rules();
        assert_eq!(r.rules.len(), 1);
        assert_eq!(r.rules[0].k(), 7);
        assert_eq!(example1_database(4).len(), 8);
        assert_eq!(active_domain(&example1_database(4)).len(), 4);
        assert_eq!(example1_database(1).len(), 1);
    }

    #[test]
    fn example1_verdicts() {
        let r = example1_rules();
        let goal = Bcq::atom("Goal", &[]);
        for k in 1..=5 {
            let want = k == 4;
            assert_eq!(brute_force_entails(&example1_database(k), &r, &goal).unwrap(), want, "k={k}");
        }
    }

    #[test]
    fn example1_not_closed_under_plain_homomorphisms() {
        let r = example1_rules();
        let goal = Bcq::atom("Goal", &[]);
        let d4 = example1_database(4);
        let d2 = example1_database(2);
        assert!(find_homomorphisms(&d4, &d2, &BTreeSet::new(), false).next().is_some());
        assert!(brute_force_entails(&d4, &r, &goal).unwrap());
        assert!(!brute_force_entails(&d2, &r, &goal).unwrap());
    }

    #[test]
    fn prop10_counterexample() {
        let r = prop10_rules();
        assert_eq!(r.rules[0].body.len(), 16);
        let d = prop10_database();
        let goal = Bcq::atom("Goal", &[]);
        assert!(!brute_force_entails(&d, &r, &goal).unwrap());
        let p = direct_product(&d, &d).unwrap();
        assert_eq!(p.len(), 16);
        assert!(brute_force_entails(&p, &r, &goal).unwrap());
        assert!(!clique4_fo_eval(&d));
        assert!(clique4_fo_eval(&p));
        assert!(!clique4_fo_eval(&Database::new(a_schema())));
    }

    #[test]
    fn universal_model_shares_only_database_constants() {
        let d = parse_database("P(a).").unwrap();
        let q = parse_bcq("? Q(X, a).").unwrap();
        let u = universal_model(&d, &[q.clone(), q.clone()]).unwrap();
        assert_eq!(u.len(), 2);
        assert_eq!(active_domain(&u).len(), 1);
        assert!(evaluate(&q, &u));
        let g = universal_model(&d, &[Bcq::atom("Goal", &[])]).unwrap();
        assert_eq!(g.to_string(), "Goal.\n");
        assert!(universal_model(&d, &[parse_bcq("? Q(X, b).").unwrap()]).is_err());
    }

    #[test]
    fn closure_oracle_is_three_valued() {
        let d = parse_database("P(a).").unwrap();
        let q1 = parse_bcq("? Q(a).").unwrap();
        let q2 = parse_bcq("? R(a).").unwrap();
        let both = conjoin(&q1, &q2);
        let sd = Schema::from_pairs([("P", 1)]).unwrap();
        let sq = Schema::from_pairs([("Q", 1), ("R", 1)]).unwrap();
        let o = OntologySample::new(sd.clone(), sq.clone(), vec![(d.clone(), both.clone())]);
        assert_eq!(o.membership(&d, &q1), None);
        assert!(check_ocqa_closure(&o, 100, 0).is_clean());

        let mut o = o;
        o.queries.push(q1.clone());
        let report = check_ocqa_closure(&o, 100, 0);
        assert_eq!(report.violations(), 1);
        assert!(report.to_string().contains("FAIL | closure-implication | 0 |"));
    }

    #[test]
    fn sem_samples_are_closed() {
        for seed in 0..5 {
            assert!(check_ocqa_closure(&example1_sample(seed).unwrap(), 1000, seed).is_clean());
            assert!(check_ocqa_closure(&prop10_sample(seed).unwrap(), 1000, seed).is_clean());
        }
    }

    #[test]
    fn hom_preservation_gate_and_example() {
        assert!(check_hom_preservation(&example1_rules(), 1, 0).is_err());
        let r = rules_from(&["A(X,Y) -> R(X).".into()]);
        let d = parse_database("A(a,b).").unwrap();
        let e = parse_database("A(c,c).").unwrap();
        let q = parse_bcq("? R(X).").unwrap();
        assert!(entails(&d, &r, &q, &Bounds::default()).unwrap().is_entailed());
        assert!(entails(&e, &r, &q, &Bounds::default()).unwrap().is_entailed());
        assert!(check_hom_preservation(&r, 20, 0).unwrap().is_clean());
    }

    #[test]
    fn product_preservation_gate_and_example() {
        assert!(check_product_preservation(&prop10_rules(), 1, 0).is_err());
        let sym = rules_from(&["A(X,Y) -> A(Y,X).".into()]);
        let i = parse_database("A(a,b). A(b,a).").unwrap();
        let j = parse_database("A(c,c). A(c,d). A(d,c).").unwrap();
        assert!(model_check(&direct_product(&i, &j).unwrap(), &sym));
        let rep = check_product_preservation(&sym, 20, 0).unwrap();
        assert!(rep.is_clean(), "{rep}");
        let nc = rules_from(&["A(X,X) -> Goal.".into()]);
        let i = parse_database("A(a,b).").unwrap();
        let j = parse_database("A(c,d). A(d,c).").unwrap();
        let p = direct_product(&i, &j).unwrap();
        assert!(!evaluate(&Bcq::atom("Goal", &[]), &chase(&p, &nc, &Bounds::default()).unwrap().leaves().next().unwrap().instance.clone().unwrap()));
    }

    #[test]
    fn domino_encoding() {
        let mut s = DominoSystem::default();
        let d = domino_to_database(&s);
        assert!(d.is_empty());
        assert_eq!(d.schema.len(), 2);
        s.dominos.insert("d".into());
        s.h.insert(("d".into(), "d".into()));
        s.v.insert(("d".into(), "d".into()));
        let d1 = domino_to_database(&s);
        assert_eq!(d1, {
            let mut e = parse_database("H(d,d). V(d,d).").unwrap();
            e.schema = d1.schema.clone();
            e
        });
        let mut bigger = s.clone();
        bigger.h.insert(("d".into(), "e".into()));
        let d2 = domino_to_database(&bigger);
        assert!(d1.facts().all(|f| d2.contains(f)));
    }

    #[test]
    fn generators_are_seeded() {
        let a = random_rules(&mut rng(7), RuleShape::Full, 3);
        let b = random_rules(&mut rng(7), RuleShape::Full, 3);
        assert_eq!(a.to_string(), b.to_string());
        assert!(a.is_full());
        for s in 0..50 {
            assert!(has_label(&random_rules(&mut rng(s), RuleShape::Dtgd, 3), Label::Dtgd));
            assert!(has_label(&random_rules(&mut rng(s), RuleShape::Ed, 3), Label::Ed));
        }
        let d = random_database(&mut rng(1), &sample_schema(&RuleSet::default()), 3, 5);
        assert!(active_domain(&d).len() <= 3);
        assert!(is_isomorphic(&d, &d));
    }

    #[test]
    fn chain_checker_flags_wrong_arithmetic() {
        let mut good = String::from("Min(n0). DC(n0).");
        for i in 0..8 {
            good.push_str(&format!(" Succ(n{i},n{}).", i + 1));
        }
        good.push_str(" Add(n1,n2,n3). Mul(n2,n3,n6). Bit1(n5,n2). Bit0(n5,n1).");
        let d = parse_database(&good).unwrap();
        assert!(chain_violations(&d, 8).is_empty(), "{:?}", chain_violations(&d, 8));
        let bad = parse_database(&format!("{good} Add(n1,n1,n3).")).unwrap();
        assert_eq!(chain_violations(&bad, 8).len(), 1);
        assert!(!chain_violations(&d, 12).is_empty());
    }

    #[test]
    fn fact_bit_machine_is_convergent() {
        let m = fact_bit_machine();
        assert!(m.is_convergent());
        assert!(m.is_k_bounded(2));
    }
}
