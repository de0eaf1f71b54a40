//! Indexed per-branch state of the disjunctive chase.
//!
//! Terms are interned as `u32`: constants below [`NULL_BASE`], labeled nulls
//! at or above it. Each branch owns a [`Branch`]: an indexed fact store, a
//! sparse union-find over merged terms, FIFO queues of discovered triggers
//! and a cursor into the fact log marking which facts have already been
//! joined against the rule bodies (semi-naive discovery). Triggers of
//! deterministic rules without existential variables have their own queue
//! and go first: closing the current terms under them is finite, so the
//! other rules still fire eventually, and merges or contradictions never
//! wait behind existential or disjunctive steps.

use std::collections::VecDeque;
use std::sync::Arc;

use rustc_hash::{FxHashMap, FxHashSet};

use crate::error::Result;
use crate::query::Bcq;
use crate::rules::{Literal, RuleSet};
use crate::terms::{Atom, Database, Schema, Term};

pub const NULL_BASE: u32 = 1 << 31;
const UNBOUND: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum CTerm {
    Var(usize),
    Const(u32),
}

#[derive(Debug, Clone)]
pub(crate) struct CAtom {
    pub rel: usize,
    pub args: Vec<CTerm>,
}

#[derive(Debug, Clone)]
pub(crate) struct CHead {
    pub n_ex: usize,
    pub atoms: Vec<CAtom>,
    pub eqs: Vec<(CTerm, CTerm)>,
}

#[derive(Debug, Clone)]
pub(crate) struct CRule {
    pub n_body_vars: usize,
    pub body: Vec<CAtom>,
    pub heads: Vec<CHead>,
    /// One disjunct and no existential variables.
    pub closing: bool,
}

/// Rules, query and database compiled against one symbol table.
#[derive(Debug)]
pub(crate) struct Program {
    pub rel_names: Vec<String>,
    pub rel_arity: Vec<usize>,
    pub rel_ids: FxHashMap<String, usize>,
    pub const_names: Vec<String>,
    pub const_ids: FxHashMap<String, u32>,
    pub rules: Vec<CRule>,
    /// (rule, body atom) pairs keyed by relation.
    pub by_rel: Vec<Vec<(usize, usize)>>,
    pub stops: Vec<(Vec<CAtom>, usize)>,
    pub schema: Schema,
}

impl Program {
    pub fn new(rules: &RuleSet, db: &Database, stops: &[Bcq]) -> Result<Program> {
        let mut p = Program {
            rel_names: Vec::new(),
            rel_arity: Vec::new(),
            rel_ids: FxHashMap::default(),
            const_names: Vec::new(),
            const_ids: FxHashMap::default(),
            rules: Vec::new(),
            by_rel: Vec::new(),
            stops: Vec::new(),
            schema: Schema::new(),
        };
        let mut schema = db.schema.clone();
        schema.merge(&rules.schema)?;
        for q in stops {
            for a in &q.atoms {
                schema.add(a.rel.clone(), a.arity())?;
            }
        }
        for (name, arity) in schema.iter() {
            p.rel_ids.insert(name.to_string(), p.rel_names.len());
            p.rel_names.push(name.to_string());
            p.rel_arity.push(arity);
        }
        p.schema = schema;
        p.by_rel = vec![Vec::new(); p.rel_names.len()];
        for t in db.terms() {
            if let Term::Const(c) = t {
                p.intern_const(&c);
            }
        }
        for (ri, r) in rules.rules.iter().enumerate() {
            let vars = r.body_vars();
            let mut var_ids: FxHashMap<String, usize> = vars.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();
            let body: Vec<CAtom> = r.body.iter().map(|a| p.compile_atom(a, &var_ids)).collect();
            for (ai, a) in body.iter().enumerate() {
                p.by_rel[a.rel].push((ri, ai));
            }
            let mut heads = Vec::new();
            for d in &r.disjuncts {
                for (j, v) in d.existentials.iter().enumerate() {
                    var_ids.insert(v.clone(), vars.len() + j);
                }
                let mut atoms = Vec::new();
                let mut eqs = Vec::new();
                for l in &d.literals {
                    match l {
                        Literal::Atom(a) => atoms.push(p.compile_atom(a, &var_ids)),
                        Literal::Eq(x, y) => eqs.push((p.compile_term(x, &var_ids), p.compile_term(y, &var_ids))),
                    }
                }
                for v in &d.existentials {
                    var_ids.remove(v);
                }
                heads.push(CHead { n_ex: d.existentials.len(), atoms, eqs });
            }
            let closing = heads.len() == 1 && heads[0].n_ex == 0;
            p.rules.push(CRule { n_body_vars: vars.len(), body, heads, closing });
        }
        for q in stops {
            let var_ids: FxHashMap<String, usize> = q.vars.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();
            let atoms = q.atoms.iter().map(|a| p.compile_atom(a, &var_ids)).collect();
            p.stops.push((atoms, q.vars.len()));
        }
        Ok(p)
    }

    fn intern_const(&mut self, c: &str) -> u32 {
        if let Some(&id) = self.const_ids.get(c) {
            return id;
        }
        let id = self.const_names.len() as u32;
        self.const_names.push(c.to_string());
        self.const_ids.insert(c.to_string(), id);
        id
    }

    fn compile_term(&mut self, t: &Term, vars: &FxHashMap<String, usize>) -> CTerm {
        match t {
            Term::Var(v) => CTerm::Var(vars[v]),
            Term::Const(c) => CTerm::Const(self.intern_const(c)),
            Term::Null(n) => CTerm::Const(NULL_BASE + n),
        }
    }

    fn compile_atom(&mut self, a: &Atom, vars: &FxHashMap<String, usize>) -> CAtom {
        let rel = self.rel_ids[&a.rel];
        CAtom { rel, args: a.args.iter().map(|t| self.compile_term(t, vars)).collect() }
    }

    pub fn term(&self, id: u32) -> Term {
        if id >= NULL_BASE {
            Term::Null(id - NULL_BASE)
        } else {
            Term::Const(self.const_names[id as usize].clone())
        }
    }

    pub fn fact(&self, rel: usize, args: &[u32]) -> Atom {
        Atom::new(self.rel_names[rel].clone(), args.iter().map(|&t| self.term(t)).collect())
    }

    pub fn encode_term(&self, t: &Term) -> Option<u32> {
        match t {
            Term::Const(c) => self.const_ids.get(c).copied(),
            Term::Null(n) => Some(NULL_BASE + n),
            Term::Var(_) => None,
        }
    }
}

#[derive(Clone, Default)]
pub(crate) struct RelStore {
    pub arity: usize,
    pub data: Vec<u32>,
    pub set: FxHashSet<Box<[u32]>>,
    pub index: Vec<FxHashMap<u32, Vec<u32>>>,
}

impl RelStore {
    fn new(arity: usize) -> RelStore {
        RelStore { arity, data: Vec::new(), set: FxHashSet::default(), index: vec![FxHashMap::default(); arity] }
    }

    pub fn len(&self) -> usize {
        if self.arity == 0 {
            self.set.len()
        } else {
            self.data.len() / self.arity
        }
    }

    pub fn tuple(&self, i: usize) -> &[u32] {
        &self.data[i * self.arity..(i + 1) * self.arity]
    }

    fn insert(&mut self, args: &[u32]) -> Option<u32> {
        if self.set.contains(args) {
            return None;
        }
        self.set.insert(args.into());
        if self.arity == 0 {
            return Some(0);
        }
        let id = (self.data.len() / self.arity) as u32;
        self.data.extend_from_slice(args);
        for (pos, &t) in args.iter().enumerate() {
            self.index[pos].entry(t).or_default().push(id);
        }
        Some(id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchState {
    Running,
    Failed,
}

#[derive(Debug, Clone)]
pub struct TraceEvent {
    pub depth: usize,
    pub rule: usize,
    pub disjunct: usize,
    pub added: Vec<Atom>,
    pub merges: Vec<(Term, Term)>,
    pub status: String,
}

#[derive(Clone)]
pub(crate) struct Trigger {
    pub rule: u32,
    pub binding: Box<[u32]>,
}

/// One chase branch.
#[derive(Clone)]
pub(crate) struct Branch {
    pub prog: Arc<Program>,
    pub rels: Vec<RelStore>,
    pub log: Vec<(u32, u32)>,
    pub cursor: usize,
    pub parent: FxHashMap<u32, u32>,
    pub queue: VecDeque<Trigger>,
    pub closing_queue: VecDeque<Trigger>,
    pub seen: FxHashSet<(u32, Box<[u32]>)>,
    pub next_null: u32,
    pub depth: usize,
    pub rebuilds: usize,
    pub state: BranchState,
    pub trace: Option<Vec<TraceEvent>>,
}

/// What a single step of a branch produced.
pub(crate) enum Step {
    /// A deterministic trigger fired in place.
    Fired,
    /// A disjunctive trigger fired; the children replace this branch.
    Split(Vec<Branch>),
    /// No applicable trigger remains.
    Saturated,
}

impl Branch {
    pub fn new(prog: Arc<Program>, db: &Database, trace: bool) -> Branch {
        let rels = prog.rel_arity.iter().map(|&a| RelStore::new(a)).collect();
        let mut b = Branch {
            prog,
            rels,
            log: Vec::new(),
            cursor: 0,
            parent: FxHashMap::default(),
            queue: VecDeque::new(),
            closing_queue: VecDeque::new(),
            seen: FxHashSet::default(),
            next_null: 0,
            depth: 0,
            rebuilds: 0,
            state: BranchState::Running,
            trace: if trace { Some(Vec::new()) } else { None },
        };
        for f in db.facts() {
            let rel = b.prog.rel_ids[&f.rel];
            let args: Vec<u32> = f.args.iter().map(|t| b.prog.encode_term(t).expect("ground fact")).collect();
            for &t in &args {
                if t >= NULL_BASE {
                    b.next_null = b.next_null.max(t - NULL_BASE + 1);
                }
            }
            b.add_fact(rel, &args);
        }
        b
    }

    fn add_fact(&mut self, rel: usize, args: &[u32]) -> bool {
        match self.rels[rel].insert(args) {
            Some(id) => {
                self.log.push((rel as u32, id));
                true
            }
            None => false,
        }
    }

    pub fn find(&self, mut t: u32) -> u32 {
        while let Some(&p) = self.parent.get(&t) {
            t = p;
        }
        t
    }

    pub fn to_database(&self) -> Database {
        let mut db = Database::new(self.prog.schema.clone());
        for (rel, store) in self.rels.iter().enumerate() {
            if store.arity == 0 {
                if !store.set.is_empty() {
                    db.insert(self.prog.fact(rel, &[])).expect("schema fact");
                }
                continue;
            }
            for i in 0..store.len() {
                db.insert(self.prog.fact(rel, store.tuple(i))).expect("schema fact");
            }
        }
        db
    }

    fn has_nullary(&self, rel: usize) -> bool {
        !self.rels[rel].set.is_empty()
    }

    /// Depth-first join of `atoms` under `binding`; `f` returns false to stop.
    /// Returns false iff stopped early.
    pub fn join(&self, atoms: &[CAtom], done: &mut Vec<bool>, binding: &mut Vec<u32>, f: &mut dyn FnMut(&[u32]) -> bool) -> bool {
        // Pick the undone atom with the fewest candidates.
        let mut best: Option<(usize, usize, Option<(usize, u32)>)> = None;
        for (i, a) in atoms.iter().enumerate() {
            if done[i] {
                continue;
            }
            let store = &self.rels[a.rel];
            let (count, key) = if store.arity == 0 {
                (if store.set.is_empty() { 0 } else { 1 }, None)
            } else {
                let mut best_pos: Option<(usize, u32, usize)> = None;
                for (pos, t) in a.args.iter().enumerate() {
                    let v = match *t {
                        CTerm::Const(c) => c,
                        CTerm::Var(x) => binding[x],
                    };
                    if v == UNBOUND {
                        continue;
                    }
                    let n = store.index[pos].get(&v).map(|l| l.len()).unwrap_or(0);
                    if best_pos.map(|(_, _, m)| n < m).unwrap_or(true) {
                        best_pos = Some((pos, v, n));
                    }
                }
                match best_pos {
                    Some((pos, v, n)) => (n, Some((pos, v))),
                    None => (store.len(), None),
                }
            };
            if best.map(|(_, c, _)| count < c).unwrap_or(true) {
                best = Some((i, count, key));
                if count == 0 {
                    break;
                }
            }
        }
        let Some((ai, count, key)) = best else {
            return f(binding);
        };
        if count == 0 {
            return true;
        }
        let atom = &atoms[ai];
        let store = &self.rels[atom.rel];
        done[ai] = true;
        let mut cont = true;
        if store.arity == 0 {
            cont = self.join(atoms, done, binding, f);
        } else {
            let mut newly: Vec<usize> = Vec::with_capacity(atom.args.len());
            let mut visit = |tid: usize, done: &mut Vec<bool>, binding: &mut Vec<u32>| -> bool {
                let tup = store.tuple(tid);
                newly.clear();
                let mut ok = true;
                for (pos, t) in atom.args.iter().enumerate() {
                    match *t {
                        CTerm::Const(c) => {
                            if c != tup[pos] {
                                ok = false;
                                break;
                            }
                        }
                        CTerm::Var(x) => {
                            if binding[x] == UNBOUND {
                                binding[x] = tup[pos];
                                newly.push(x);
                            } else if binding[x] != tup[pos] {
                                ok = false;
                                break;
                            }
                        }
                    }
                }
                let r = if ok { self.join(atoms, done, binding, f) } else { true };
                for &x in &newly {
                    binding[x] = UNBOUND;
                }
                r
            };
            match key {
                Some((pos, v)) => {
                    let list = &store.index[pos][&v];
                    for &tid in list {
                        if !visit(tid as usize, done, binding) {
                            cont = false;
                            break;
                        }
                    }
                }
                None => {
                    for tid in 0..store.len() {
                        if !visit(tid, done, binding) {
                            cont = false;
                            break;
                        }
                    }
                }
            }
        }
        done[ai] = false;
        cont
    }

    /// Joins every fact added since the last call against the rule bodies and
    /// queues the new triggers in discovery order.
    pub fn discover(&mut self) {
        let prog = Arc::clone(&self.prog);
        while self.cursor < self.log.len() {
            let (rel, tid) = self.log[self.cursor];
            self.cursor += 1;
            let rel = rel as usize;
            let tuple: Vec<u32> = if self.rels[rel].arity == 0 { Vec::new() } else { self.rels[rel].tuple(tid as usize).to_vec() };
            for &(ri, ai) in &prog.by_rel[rel] {
                let rule = &prog.rules[ri];
                let mut binding = vec![UNBOUND; rule.n_body_vars];
                let atom = &rule.body[ai];
                let mut ok = true;
                for (pos, t) in atom.args.iter().enumerate() {
                    match *t {
                        CTerm::Const(c) => ok &= c == tuple[pos],
                        CTerm::Var(x) => {
                            if binding[x] == UNBOUND {
                                binding[x] = tuple[pos];
                            } else {
                                ok &= binding[x] == tuple[pos];
                            }
                        }
                    }
                }
                if !ok {
                    continue;
                }
                let mut done = vec![false; rule.body.len()];
                done[ai] = true;
                let mut found: Vec<Box<[u32]>> = Vec::new();
                self.join(&rule.body, &mut done, &mut binding, &mut |b| {
                    found.push(b.into());
                    true
                });
                for b in found {
                    let key = (ri as u32, b);
                    if !self.seen.contains(&key) {
                        let t = Trigger { rule: ri as u32, binding: key.1.clone() };
                        if rule.closing {
                            self.closing_queue.push_back(t);
                        } else {
                            self.queue.push_back(t);
                        }
                        self.seen.insert(key);
                    }
                }
            }
        }
    }

    fn resolve(&self, t: CTerm, binding: &[u32]) -> u32 {
        match t {
            CTerm::Const(c) => self.find(c),
            CTerm::Var(x) => binding[x],
        }
    }

    /// Is disjunct `h` of `rule` satisfied by an extension of `binding`?
    pub fn head_satisfied(&self, rule: &CRule, h: usize, binding: &[u32]) -> bool {
        let head = &rule.heads[h];
        let mut ext = binding.to_vec();
        ext.resize(rule.n_body_vars + head.n_ex, UNBOUND);
        if head.atoms.is_empty() {
            return head.eqs.iter().all(|&(a, b)| self.resolve(a, &ext) == self.resolve(b, &ext));
        }
        let atoms: Vec<CAtom> = head
            .atoms
            .iter()
            .map(|a| CAtom {
                rel: a.rel,
                args: a
                    .args
                    .iter()
                    .map(|&t| match t {
                        CTerm::Const(c) => CTerm::Const(self.find(c)),
                        v => v,
                    })
                    .collect(),
            })
            .collect();
        let mut done = vec![false; atoms.len()];
        let mut sat = false;
        self.join(&atoms, &mut done, &mut ext, &mut |b| {
            if head.eqs.iter().all(|&(x, y)| self.resolve(x, b) == self.resolve(y, b)) {
                sat = true;
                false
            } else {
                true
            }
        });
        sat
    }

    pub fn applicable(&self, t: &Trigger) -> bool {
        let rule = &self.prog.rules[t.rule as usize];
        !(0..rule.heads.len()).any(|h| self.head_satisfied(rule, h, &t.binding))
    }

    fn canonical(&self, t: &Trigger) -> Trigger {
        if self.parent.is_empty() {
            return t.clone();
        }
        Trigger { rule: t.rule, binding: t.binding.iter().map(|&x| self.find(x)).collect() }
    }

    /// Applies disjunct `h` of the trigger's rule to this branch.
    pub fn apply(&mut self, t: &Trigger, h: usize) {
        let prog = Arc::clone(&self.prog);
        let rule = &prog.rules[t.rule as usize];
        let head = &rule.heads[h];
        let mut ext = t.binding.to_vec();
        for _ in 0..head.n_ex {
            ext.push(NULL_BASE + self.next_null);
            self.next_null += 1;
        }
        self.depth += 1;
        let mut added = Vec::new();
        for a in &head.atoms {
            let args: Vec<u32> = a.args.iter().map(|&x| self.resolve(x, &ext)).collect();
            if self.add_fact(a.rel, &args) && self.trace.is_some() {
                added.push(prog.fact(a.rel, &args));
            }
        }
        let mut merges = Vec::new();
        let mut changed = false;
        for &(x, y) in &head.eqs {
            let (a, b) = (self.resolve(x, &ext), self.resolve(y, &ext));
            let (a, b) = (self.find(a), self.find(b));
            if a == b {
                continue;
            }
            if a < NULL_BASE && b < NULL_BASE {
                self.state = BranchState::Failed;
                merges.push((prog.term(a), prog.term(b)));
                break;
            }
            // Constants win; among nulls the older one survives.
            let (keep, drop) = if a < b { (a, b) } else { (b, a) };
            self.parent.insert(drop, keep);
            merges.push((prog.term(drop), prog.term(keep)));
            changed = true;
        }
        if changed && self.state == BranchState::Running {
            self.rebuild();
        }
        if let Some(tr) = self.trace.as_mut() {
            tr.push(TraceEvent {
                depth: self.depth,
                rule: t.rule as usize,
                disjunct: h,
                added,
                merges,
                status: if self.state == BranchState::Failed { "failed".into() } else { "open".into() },
            });
        }
    }

    /// Rewrites every fact to representatives after a merge.
    fn rebuild(&mut self) {
        self.rebuilds += 1;
        let old_rels = std::mem::replace(
            &mut self.rels,
            self.prog.rel_arity.iter().map(|&a| RelStore::new(a)).collect(),
        );
        let old_log = std::mem::take(&mut self.log);
        let old_cursor = self.cursor;
        let mut new_cursor = 0;
        let mut changed: Vec<(usize, Vec<u32>)> = Vec::new();
        for (i, &(rel, tid)) in old_log.iter().enumerate() {
            let rel = rel as usize;
            let tup: Vec<u32> = if old_rels[rel].arity == 0 { Vec::new() } else { old_rels[rel].tuple(tid as usize).to_vec() };
            let mapped: Vec<u32> = tup.iter().map(|&t| self.find(t)).collect();
            if mapped == tup {
                if self.add_fact(rel, &mapped) && i < old_cursor {
                    new_cursor = self.log.len();
                }
            } else {
                changed.push((rel, mapped));
            }
        }
        self.cursor = new_cursor;
        for (rel, args) in changed {
            self.add_fact(rel, &args);
        }
    }

    /// Checks whether any stop query holds.
    pub fn stop_hit(&self) -> bool {
        for (atoms, nvars) in &self.prog.stops {
            if atoms.iter().all(|a| self.rels[a.rel].arity == 0) {
                if atoms.iter().all(|a| self.has_nullary(a.rel)) {
                    return true;
                }
                continue;
            }
            let atoms: Vec<CAtom> = atoms
                .iter()
                .map(|a| CAtom {
                    rel: a.rel,
                    args: a
                        .args
                        .iter()
                        .map(|&t| match t {
                            CTerm::Const(c) => CTerm::Const(self.find(c)),
                            v => v,
                        })
                        .collect(),
                })
                .collect();
            let mut binding = vec![UNBOUND; *nvars];
            let mut done = vec![false; atoms.len()];
            let mut hit = false;
            self.join(&atoms, &mut done, &mut binding, &mut |_| {
                hit = true;
                false
            });
            if hit {
                return true;
            }
        }
        false
    }

    /// Fires the oldest applicable trigger of a closing rule, or else the
    /// oldest applicable trigger.
    pub fn step(&mut self) -> Step {
        loop {
            if self.queue.is_empty() && self.closing_queue.is_empty() {
                self.discover();
            }
            let Some(t) = self.closing_queue.pop_front().or_else(|| self.queue.pop_front()) else {
                return Step::Saturated;
            };
            let t = self.canonical(&t);
            if !self.applicable(&t) {
                continue;
            }
            let k = self.prog.rules[t.rule as usize].heads.len();
            if k == 1 {
                self.apply(&t, 0);
                self.discover();
                return Step::Fired;
            }
            let mut kids = Vec::with_capacity(k);
            for h in 0..k {
                let mut c = self.clone();
                if let Some(tr) = c.trace.as_mut() {
                    tr.clear();
                }
                c.apply(&t, h);
                if c.state == BranchState::Running {
                    c.discover();
                }
                kids.push(c);
            }
            return Step::Split(kids);
        }
    }

    /// All currently applicable triggers, in queue order, after discovery.
    pub fn pending_applicable(&mut self) -> Vec<Trigger> {
        self.discover();
        let q: Vec<Trigger> = self.closing_queue.iter().chain(&self.queue).map(|t| self.canonical(t)).collect();
        q.into_iter().filter(|t| self.applicable(t)).collect()
    }
}
