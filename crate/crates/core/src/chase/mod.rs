//! Restricted disjunctive chase, entailment verdicts and certain answers.

mod engine;
mod oracle;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::query::{evaluate, Bcq, Cq};
use crate::rules::{Literal, RuleSet};
use crate::terms::{active_domain, Atom, Database, HomSearch, Mapping, Term};

use engine::{Branch, BranchState, Program, Step};
pub use engine::TraceEvent;
pub use oracle::{brute_force_entails, minimal_models, HERBRAND_GUARD};

/// Resource limits of one chase run.
#[derive(Debug, Clone)]
pub struct Bounds {
    /// Maximum number of firings along one branch.
    pub max_depth: usize,
    /// Maximum number of tree nodes.
    pub max_nodes: usize,
    pub workers: usize,
    /// Drop sibling branches whose instances are isomorphic.
    pub dedup: bool,
    pub trace: bool,
}

impl Default for Bounds {
    fn default() -> Bounds {
        Bounds { max_depth: 2000, max_nodes: 100_000, workers: 1, dedup: false, trace: false }
    }
}

impl Bounds {
    pub fn depth(max_depth: usize) -> Bounds {
        Bounds { max_depth, ..Bounds::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeStatus {
    /// Stopped by a bound with applicable triggers left.
    Open,
    Saturated,
    Failed,
    /// A stop query holds in the instance.
    Satisfied,
    /// Internal node that branched.
    Expanded,
}

impl fmt::Display for NodeStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NodeStatus::Open => "open",
            NodeStatus::Saturated => "saturated",
            NodeStatus::Failed => "failed",
            NodeStatus::Satisfied => "satisfied",
            NodeStatus::Expanded => "expanded",
        };
        f.write_str(s)
    }
}

/// A node of the chase tree. Linear runs of deterministic firings are
/// collapsed into one node, so `depth` counts firings, not tree edges.
#[derive(Debug, Clone)]
pub struct ChaseNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub depth: usize,
    pub status: NodeStatus,
    /// Present on leaves.
    pub instance: Option<Database>,
    pub trace: Vec<TraceEvent>,
}

#[derive(Debug, Clone, Default)]
pub struct ChaseTree {
    pub nodes: Vec<ChaseNode>,
}

impl ChaseTree {
    pub fn root(&self) -> &ChaseNode {
        &self.nodes[0]
    }

    pub fn leaves(&self) -> impl Iterator<Item = &ChaseNode> + '_ {
        self.nodes.iter().filter(|n| n.status != NodeStatus::Expanded)
    }

    pub fn max_depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// One line per firing in node order:
    /// `depth | rule-id | disjunct-id | added-facts | merges | status`,
    /// followed by a closing line per leaf.
    pub fn trace_lines(&self) -> Vec<String> {
        let mut out = Vec::new();
        for n in &self.nodes {
            for e in &n.trace {
                let added: Vec<String> = e.added.iter().map(|a| a.to_string()).collect();
                let merges: Vec<String> = e.merges.iter().map(|(a, b)| format!("{a}={b}")).collect();
                out.push(format!(
                    "{} | {} | {} | {} | {} | {}",
                    e.depth,
                    e.rule,
                    e.disjunct,
                    added.join(" "),
                    merges.join(" "),
                    e.status
                ));
            }
            if n.status != NodeStatus::Expanded {
                out.push(format!("{} | - | - |  |  | {}", n.depth, n.status));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Entailed,
    /// A saturated branch is a finite model of the database and the rules in
    /// which the query is false.
    NotEntailed { witness: Database },
    /// Bounds ran out; `depth` is the deepest branch reached.
    Unknown { depth: usize },
}

impl Verdict {
    pub fn is_entailed(&self) -> bool {
        matches!(self, Verdict::Entailed)
    }

    pub fn is_not_entailed(&self) -> bool {
        matches!(self, Verdict::NotEntailed { .. })
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self, Verdict::Unknown { .. })
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Entailed => f.write_str("ENTAILED"),
            Verdict::NotEntailed { .. } => f.write_str("NOT-ENTAILED"),
            Verdict::Unknown { depth } => write!(f, "UNKNOWN(depth={depth})"),
        }
    }
}

fn check_inputs(d: &Database, rules: &RuleSet, queries: &[Bcq]) -> Result<()> {
    let mut schema = d.schema.clone();
    schema.merge(&rules.schema)?;
    for q in queries {
        for a in &q.atoms {
            if let Some(n) = schema.arity(&a.rel) {
                if n != a.arity() {
                    return Err(Error::semantic(format!("{} used with arity {} and {}", a.rel, n, a.arity())));
                }
            }
        }
    }
    Ok(())
}

pub fn chase(d: &Database, rules: &RuleSet, bounds: &Bounds) -> Result<ChaseTree> {
    chase_until(d, rules, bounds, &[], false)
}

/// Firings per branch between scheduling rounds.
const QUANTUM: usize = 64;

struct Live {
    node: usize,
    branch: Branch,
}

enum Outcome {
    Continue,
    Split(Vec<Branch>),
    Done(NodeStatus),
}

fn is_relevant(prog: &Program, b: &Branch, from: usize) -> bool {
    b.log[from.min(b.log.len())..].iter().any(|&(rel, _)| {
        prog.stops.iter().any(|(atoms, _)| atoms.iter().any(|a| a.rel == rel as usize))
    })
}

fn run_quantum(branch: &mut Branch, bounds: &Bounds, has_stops: bool) -> Outcome {
    for _ in 0..QUANTUM {
        if branch.depth >= bounds.max_depth {
            // Only open if something is still applicable.
            return match branch.pending_applicable().is_empty() {
                true => Outcome::Done(NodeStatus::Saturated),
                false => Outcome::Done(NodeStatus::Open),
            };
        }
        let before = branch.log.len();
        let rebuilds = branch.rebuilds;
        match branch.step() {
            Step::Saturated => return Outcome::Done(NodeStatus::Saturated),
            Step::Split(kids) => return Outcome::Split(kids),
            Step::Fired => {
                if branch.state == BranchState::Failed {
                    return Outcome::Done(NodeStatus::Failed);
                }
                if has_stops
                    && (branch.rebuilds != rebuilds || is_relevant(&branch.prog, branch, before))
                    && branch.stop_hit()
                {
                    return Outcome::Done(NodeStatus::Satisfied);
                }
            }
        }
    }
    Outcome::Continue
}

/// Isomorphism of chase instances keeping constants fixed.
fn same_up_to_nulls(a: &Database, b: &Database) -> bool {
    if a.len() != b.len() || a.terms().len() != b.terms().len() {
        return false;
    }
    let atoms: Vec<Atom> = a.facts().cloned().collect();
    let mut it = HomSearch::new(&atoms, b, |t| t.is_const(), true);
    it.next().is_some()
}

/// Chases until every branch saturates, fails, satisfies one of `stop`, or
/// hits a bound. With `stop_at_first_model`, the run ends as soon as one
/// branch saturates without satisfying a stop query.
pub fn chase_until(
    d: &Database,
    rules: &RuleSet,
    bounds: &Bounds,
    stop: &[Bcq],
    stop_at_first_model: bool,
) -> Result<ChaseTree> {
    check_inputs(d, rules, stop)?;
    let prog = Arc::new(Program::new(rules, d, stop)?);
    let has_stops = !prog.stops.is_empty();
    let mut tree = ChaseTree::default();
    let root = Branch::new(Arc::clone(&prog), d, bounds.trace);
    tree.nodes.push(ChaseNode {
        id: 0,
        parent: None,
        children: Vec::new(),
        depth: 0,
        status: NodeStatus::Open,
        instance: None,
        trace: Vec::new(),
    });
    let mut live = Vec::new();
    if has_stops && root.stop_hit() {
        finish(&mut tree, 0, &root, NodeStatus::Satisfied);
    } else {
        live.push(Live { node: 0, branch: root });
    }
    let pool = if bounds.workers > 1 {
        rayon::ThreadPoolBuilder::new().num_threads(bounds.workers).build().ok()
    } else {
        None
    };
    while !live.is_empty() {
        let outcomes: Vec<Outcome> = match &pool {
            Some(p) => p.install(|| live.par_iter_mut().map(|l| run_quantum(&mut l.branch, bounds, has_stops)).collect()),
            None => live.iter_mut().map(|l| run_quantum(&mut l.branch, bounds, has_stops)).collect(),
        };
        let mut next = Vec::with_capacity(live.len());
        let mut model_found = false;
        for (l, outcome) in live.into_iter().zip(outcomes) {
            if model_found {
                finish(&mut tree, l.node, &l.branch, NodeStatus::Open);
                continue;
            }
            match outcome {
                Outcome::Continue => next.push(l),
                Outcome::Done(status) => {
                    finish(&mut tree, l.node, &l.branch, status);
                    if status == NodeStatus::Saturated && stop_at_first_model {
                        model_found = true;
                    }
                }
                Outcome::Split(mut kids) => {
                    if tree.nodes.len() + kids.len() > bounds.max_nodes {
                        finish(&mut tree, l.node, &l.branch, NodeStatus::Open);
                        continue;
                    }
                    if bounds.dedup {
                        let mut kept: Vec<(Branch, Option<Database>)> = Vec::new();
                        for k in kids {
                            if k.state == BranchState::Failed {
                                kept.push((k, None));
                                continue;
                            }
                            let inst = k.to_database();
                            if kept.iter().any(|(_, o)| o.as_ref().map(|o| same_up_to_nulls(o, &inst)).unwrap_or(false)) {
                                continue;
                            }
                            kept.push((k, Some(inst)));
                        }
                        kids = kept.into_iter().map(|(k, _)| k).collect();
                    }
                    let parent = l.node;
                    let pnode = &mut tree.nodes[parent];
                    pnode.status = NodeStatus::Expanded;
                    pnode.depth = l.branch.depth;
                    pnode.trace = l.branch.trace.clone().unwrap_or_default();
                    for k in kids {
                        let id = tree.nodes.len();
                        tree.nodes[parent].children.push(id);
                        tree.nodes.push(ChaseNode {
                            id,
                            parent: Some(parent),
                            children: Vec::new(),
                            depth: k.depth,
                            status: NodeStatus::Open,
                            instance: None,
                            trace: Vec::new(),
                        });
                        if k.state == BranchState::Failed {
                            finish(&mut tree, id, &k, NodeStatus::Failed);
                        } else if has_stops && k.stop_hit() {
                            finish(&mut tree, id, &k, NodeStatus::Satisfied);
                        } else {
                            next.push(Live { node: id, branch: k });
                        }
                    }
                }
            }
        }
        if model_found {
            for l in next.drain(..) {
                finish(&mut tree, l.node, &l.branch, NodeStatus::Open);
            }
        }
        live = next;
    }
    Ok(tree)
}

fn finish(tree: &mut ChaseTree, id: usize, b: &Branch, status: NodeStatus) {
    let n = &mut tree.nodes[id];
    n.status = status;
    n.depth = b.depth;
    n.instance = Some(b.to_database());
    n.trace = b.trace.clone().unwrap_or_default();
}

/// Decides D ∪ Σ ⊨ q as far as the bounds allow.
pub fn entails(d: &Database, rules: &RuleSet, q: &Bcq, bounds: &Bounds) -> Result<Verdict> {
    let tree = chase_until(d, rules, bounds, std::slice::from_ref(q), true)?;
    Ok(verdict_of(&tree, rules, q))
}

fn verdict_of(tree: &ChaseTree, rules: &RuleSet, q: &Bcq) -> Verdict {
    for n in tree.leaves() {
        if n.status == NodeStatus::Saturated {
            let inst = n.instance.as_ref().expect("leaf instance");
            if model_check(inst, rules) && !evaluate(q, inst) {
                return Verdict::NotEntailed { witness: inst.clone() };
            }
        }
    }
    if tree.leaves().all(|n| matches!(n.status, NodeStatus::Satisfied | NodeStatus::Failed)) {
        Verdict::Entailed
    } else {
        Verdict::Unknown { depth: tree.max_depth() }
    }
}

/// The verdict for every tuple over adom(D)^n, keyed by the tuple.
pub fn certain_answers(d: &Database, rules: &RuleSet, p: &Cq, bounds: &Bounds) -> Result<BTreeMap<Vec<Term>, Verdict>> {
    let dom: Vec<Term> = active_domain(d).into_iter().collect();
    let n = p.free.len();
    let mut out = BTreeMap::new();
    let mut idx = vec![0usize; n];
    if n > 0 && dom.is_empty() {
        return Ok(out);
    }
    loop {
        let tuple: Vec<Term> = idx.iter().map(|&i| dom[i].clone()).collect();
        let q = p.instantiate(&tuple)?;
        out.insert(tuple, entails(d, rules, &q, bounds)?);
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < dom.len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// A rule together with a match of its body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trigger {
    pub rule: usize,
    pub binding: Mapping,
}

fn disjunct_satisfied(inst: &Database, lits: &[Literal], binding: &Mapping) -> bool {
    let atoms: Vec<Atom> = lits
        .iter()
        .filter_map(|l| match l {
            Literal::Atom(a) => Some(a.clone()),
            _ => None,
        })
        .collect();
    let eqs: Vec<(&Term, &Term)> = lits
        .iter()
        .filter_map(|l| match l {
            Literal::Eq(a, b) => Some((a, b)),
            _ => None,
        })
        .collect();
    let value = |m: &Mapping, t: &Term| m.get(t).cloned().unwrap_or_else(|| t.clone());
    let holds = |m: &Mapping| eqs.iter().all(|(a, b)| value(m, a) == value(m, b));
    if atoms.is_empty() {
        return holds(binding);
    }
    let it = HomSearch::with_binding(&atoms, inst, |t| t.is_const(), false, binding);
    for m in it {
        if holds(&m) {
            return true;
        }
    }
    false
}

/// Body matches with no satisfied disjunct, by rule index and then
/// homomorphism enumeration order.
pub fn applicable_triggers(inst: &Database, rules: &RuleSet) -> Vec<Trigger> {
    let mut out = Vec::new();
    for (ri, r) in rules.rules.iter().enumerate() {
        for m in HomSearch::new(&r.body, inst, |t| t.is_const(), false) {
            if !r.disjuncts.iter().any(|d| disjunct_satisfied(inst, &d.literals, &m)) {
                out.push(Trigger { rule: ri, binding: m });
            }
        }
    }
    out
}

/// Does the instance satisfy every rule?
pub fn model_check(inst: &Database, rules: &RuleSet) -> bool {
    rules.rules.iter().all(|r| {
        HomSearch::new(&r.body, inst, |t| t.is_const(), false)
            .all(|m| r.disjuncts.iter().any(|d| disjunct_satisfied(inst, &d.literals, &m)))
    })
}

/// One child per disjunct of the trigger's rule. Equalities between two
/// distinct constants yield a failed child.
pub fn fire(inst: &Database, rules: &RuleSet, t: &Trigger) -> Result<Vec<ChaseNode>> {
    let rule = rules.rules.get(t.rule).ok_or_else(|| Error::precondition("trigger names an unknown rule"))?;
    let mut next_null = inst
        .terms()
        .iter()
        .filter_map(|t| match t {
            Term::Null(n) => Some(n + 1),
            _ => None,
        })
        .max()
        .unwrap_or(0);
    let mut kids = Vec::new();
    for (h, d) in rule.disjuncts.iter().enumerate() {
        let mut m = t.binding.clone();
        for v in &d.existentials {
            m.insert(Term::Var(v.clone()), Term::Null(next_null));
            next_null += 1;
        }
        let value = |t: &Term| m.get(t).cloned().unwrap_or_else(|| t.clone());
        let mut out = inst.clone();
        out.schema.merge(&rules.schema)?;
        let mut added = Vec::new();
        for a in d.atoms() {
            let f = a.map_terms(|t| value(t));
            if out.insert(f.clone())? {
                added.push(f);
            }
        }
        let mut rep: BTreeMap<Term, Term> = BTreeMap::new();
        let find = |rep: &BTreeMap<Term, Term>, mut t: Term| {
            while let Some(p) = rep.get(&t) {
                t = p.clone();
            }
            t
        };
        let mut failed = false;
        let mut merges = Vec::new();
        for (a, b) in d.equalities() {
            let (a, b) = (find(&rep, value(a)), find(&rep, value(b)));
            if a == b {
                continue;
            }
            if a.is_const() && b.is_const() {
                failed = true;
                merges.push((a, b));
                break;
            }
            let (keep, drop) = if b.is_const() || (!a.is_const() && b < a) { (b, a) } else { (a, b) };
            merges.push((drop.clone(), keep.clone()));
            rep.insert(drop, keep);
        }
        if !rep.is_empty() && !failed {
            out = out.rename(|t| find(&rep, t.clone()));
        }
        kids.push(ChaseNode {
            id: h,
            parent: None,
            children: Vec::new(),
            depth: 1,
            status: if failed { NodeStatus::Failed } else { NodeStatus::Open },
            instance: Some(out),
            trace: vec![TraceEvent {
                depth: 1,
                rule: t.rule,
                disjunct: h,
                added,
                merges,
                status: if failed { "failed".into() } else { "open".into() },
            }],
        });
    }
    Ok(kids)
}
