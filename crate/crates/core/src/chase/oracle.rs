//! Exhaustive model search for full rule sets, independent of the chase.
//!
//! Full rules never invent elements, so it suffices to look at instances
//! over adom(D) ∪ const(Σ) ∪ const(q). Heads only mention intensional
//! symbols, so extensional facts beyond D can be dropped from any model:
//! the search ranges over subsets of the intensional Herbrand base that
//! contain the intensional facts of D.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::query::Bcq;
use crate::rules::{intensional_symbols, Literal, RuleSet};
use crate::terms::{Atom, Database, Term};

/// Largest intensional Herbrand base the oracles accept.
pub const HERBRAND_GUARD: usize = 24;

/// Ground instances enumerated per rule before giving up.
const GROUND_GUARD: usize = 4_000_000;

struct Problem {
    atoms: Vec<Atom>,
    /// (body mask, disjunct masks); a rule instance with an empty disjunct
    /// list is violated as soon as its body holds.
    rules: Vec<(u32, Vec<u32>)>,
    /// Forbidden masks: never all true.
    forbidden: Vec<u32>,
}

fn herbrand(d: &Database, rules: &RuleSet, extra: &BTreeSet<Term>) -> Result<(Vec<Term>, Vec<Atom>)> {
    if !rules.is_full() {
        return Err(Error::precondition("rule set has existential variables"));
    }
    let mut dom: BTreeSet<Term> = d.terms();
    dom.extend(rules.constants());
    dom.extend(extra.iter().cloned());
    let dom: Vec<Term> = dom.into_iter().collect();
    let mut schema = d.schema.clone();
    schema.merge(&rules.schema)?;
    let int = intensional_symbols(rules);
    let mut atoms = Vec::new();
    for (rel, arity) in schema.iter() {
        if !int.contains(rel) {
            continue;
        }
        let total = dom.len().checked_pow(arity as u32).unwrap_or(usize::MAX);
        if atoms.len().saturating_add(total) > HERBRAND_GUARD {
            return Err(Error::SizeGuard(format!("intensional Herbrand base exceeds {HERBRAND_GUARD} atoms")));
        }
        for tuple in tuples(&dom, arity) {
            atoms.push(Atom::new(rel, tuple));
        }
    }
    Ok((dom, atoms))
}

fn tuples(dom: &[Term], n: usize) -> Vec<Vec<Term>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::with_capacity(out.len() * dom.len());
        for t in &out {
            for c in dom {
                let mut u = t.clone();
                u.push(c.clone());
                next.push(u);
            }
        }
        out = next;
    }
    out
}

/// Assignment of variables to domain elements, visited in odometer order.
fn each_assignment(vars: &[String], dom: &[Term], mut f: impl FnMut(&BTreeMap<&str, &Term>)) -> Result<()> {
    let total = dom.len().checked_pow(vars.len() as u32).unwrap_or(usize::MAX);
    if total > GROUND_GUARD {
        return Err(Error::SizeGuard(format!("more than {GROUND_GUARD} ground rule instances")));
    }
    if dom.is_empty() && !vars.is_empty() {
        return Ok(());
    }
    let mut idx = vec![0usize; vars.len()];
    loop {
        let m: BTreeMap<&str, &Term> = vars.iter().map(String::as_str).zip(idx.iter().map(|&i| &dom[i])).collect();
        f(&m);
        let mut pos = vars.len();
        loop {
            if pos == 0 {
                return Ok(());
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

fn ground_term(t: &Term, m: &BTreeMap<&str, &Term>) -> Term {
    match t {
        Term::Var(v) => m[v.as_str()].clone(),
        other => other.clone(),
    }
}

fn ground(a: &Atom, m: &BTreeMap<&str, &Term>) -> Atom {
    a.map_terms(|t| ground_term(t, m))
}

/// Extensional atoms have a fixed truth value; intensional ones own a bit.
enum Lit {
    Fixed(bool),
    Bit(u32),
}

fn build(d: &Database, rules: &RuleSet, q: Option<&Bcq>) -> Result<Problem> {
    let extra = q.map(|q| q.constants()).unwrap_or_default();
    let (dom, atoms) = herbrand(d, rules, &extra)?;
    let index: BTreeMap<&Atom, u32> = atoms.iter().enumerate().map(|(i, a)| (a, 1u32 << i)).collect();
    let int = intensional_symbols(rules);
    let lit = |a: &Atom| -> Lit {
        if int.contains(&a.rel) {
            Lit::Bit(index[a])
        } else {
            Lit::Fixed(d.contains(a))
        }
    };
    let mut prob = Problem { atoms: atoms.clone(), rules: Vec::new(), forbidden: Vec::new() };
    // Intensional facts of D hold in every model.
    for a in d.facts() {
        if let Some(&b) = index.get(a) {
            prob.rules.push((0, vec![b]));
        }
    }
    for r in &rules.rules {
        let vars = r.body_vars();
        each_assignment(&vars, &dom, |m| {
            let mut body = 0u32;
            for a in &r.body {
                match lit(&ground(a, m)) {
                    Lit::Fixed(false) => return,
                    Lit::Fixed(true) => {}
                    Lit::Bit(b) => body |= b,
                }
            }
            let mut heads = Vec::new();
            for dj in &r.disjuncts {
                let mut mask = 0u32;
                let mut possible = true;
                for l in &dj.literals {
                    match l {
                        Literal::Atom(a) => match lit(&ground(a, m)) {
                            Lit::Fixed(b) => possible &= b,
                            Lit::Bit(b) => mask |= b,
                        },
                        Literal::Eq(x, y) => {
                            possible &= ground_term(x, m) == ground_term(y, m);
                        }
                    }
                }
                if possible {
                    heads.push(mask);
                }
            }
            if heads.iter().any(|&h| h & !body == 0) {
                // Satisfied whenever the body is.
                return;
            }
            prob.rules.push((body, heads));
        })?;
    }
    if let Some(q) = q {
        each_assignment(&q.vars, &dom, |m| {
            let mut mask = 0u32;
            for a in &q.atoms {
                match lit(&ground(a, m)) {
                    Lit::Fixed(false) => return,
                    Lit::Fixed(true) => {}
                    Lit::Bit(b) => mask |= b,
                }
            }
            prob.forbidden.push(mask);
        })?;
    }
    Ok(prob)
}

/// Constraints bucketed by their highest bit, so each is checked exactly
/// once the search has decided every atom it mentions.
struct Search<'a> {
    n: usize,
    rules_at: Vec<Vec<&'a (u32, Vec<u32>)>>,
    forbidden_at: Vec<Vec<u32>>,
    /// Constraints mentioning no intensional atom.
    static_ok: bool,
}

fn top_bit(mask: u32) -> Option<usize> {
    if mask == 0 {
        None
    } else {
        Some(31 - mask.leading_zeros() as usize)
    }
}

impl<'a> Search<'a> {
    fn new(p: &'a Problem) -> Search<'a> {
        let n = p.atoms.len();
        let mut s = Search { n, rules_at: vec![Vec::new(); n], forbidden_at: vec![Vec::new(); n], static_ok: true };
        for r in &p.rules {
            let all = r.1.iter().fold(r.0, |acc, &h| acc | h);
            match top_bit(all) {
                Some(b) => s.rules_at[b].push(r),
                None => s.static_ok = false,
            }
        }
        for &f in &p.forbidden {
            match top_bit(f) {
                Some(b) => s.forbidden_at[b].push(f),
                None => s.static_ok = false,
            }
        }
        s
    }

    fn ok_at(&self, i: usize, set: u32) -> bool {
        self.rules_at[i].iter().all(|(body, heads)| body & !set != 0 || heads.iter().any(|&h| h & !set == 0))
            && self.forbidden_at[i].iter().all(|&f| f & !set != 0)
    }

    /// Visits every model in the subtree, false-first; `f` returns false to
    /// stop. `limit` caps the number of true atoms; `avoid` prunes supersets.
    fn walk(&self, i: usize, set: u32, count: usize, want: Option<usize>, avoid: &[u32], f: &mut dyn FnMut(u32) -> bool) -> bool {
        if avoid.iter().any(|&m| m & !set == 0) {
            return true;
        }
        if i == self.n {
            if want.map(|w| w == count).unwrap_or(true) {
                return f(set);
            }
            return true;
        }
        if let Some(w) = want {
            if count > w || count + (self.n - i) < w {
                return true;
            }
        }
        for bit in [false, true] {
            let s = if bit { set | (1 << i) } else { set };
            if self.ok_at(i, s) && !self.walk(i + 1, s, count + bit as usize, want, avoid, f) {
                return false;
            }
        }
        true
    }
}

fn to_instance(d: &Database, rules: &RuleSet, p: &Problem, set: u32) -> Database {
    let mut out = d.clone();
    out.schema.merge(&rules.schema).expect("compatible schemas");
    for (i, a) in p.atoms.iter().enumerate() {
        if set & (1 << i) != 0 {
            out.insert(a.clone()).expect("schema atom");
        }
    }
    out
}

/// Exhaustive entailment for full rule sets.
pub fn brute_force_entails(d: &Database, rules: &RuleSet, q: &Bcq) -> Result<bool> {
    let p = build(d, rules, Some(q))?;
    let s = Search::new(&p);
    if !s.static_ok {
        // Some rule is violated or the query holds without any derived atom.
        return Ok(true);
    }
    let mut found = false;
    s.walk(0, 0, 0, None, &[], &mut |_| {
        found = true;
        false
    });
    Ok(!found)
}

/// All subset-minimal models containing D, found by increasing size.
pub fn minimal_models(d: &Database, rules: &RuleSet) -> Result<Vec<Database>> {
    let p = build(d, rules, None)?;
    let s = Search::new(&p);
    if !s.static_ok {
        return Ok(Vec::new());
    }
    let mut found: Vec<u32> = Vec::new();
    for k in 0..=p.atoms.len() {
        let mut level = Vec::new();
        s.walk(0, 0, 0, Some(k), &found, &mut |m| {
            level.push(m);
            true
        });
        found.extend(level);
    }
    Ok(found.into_iter().map(|m| to_instance(d, rules, &p, m)).collect())
}
