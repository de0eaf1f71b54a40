//! Boolean and non-Boolean conjunctive queries.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::lex::{is_variable_name, Cursor, Tok};
use crate::terms::{find_homomorphisms, parse_atom, Atom, Database, HomSearch, Term};

/// A Boolean conjunctive query: all variables are existentially quantified.
/// `vars` is the canonical variable order (first occurrence).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Bcq {
    pub vars: Vec<String>,
    pub atoms: Vec<Atom>,
}

impl Bcq {
    pub fn new(atoms: Vec<Atom>) -> Result<Bcq> {
        if atoms.is_empty() {
            return Err(Error::semantic("a query needs at least one atom"));
        }
        if atoms.iter().flat_map(|a| a.args.iter()).any(Term::is_null) {
            return Err(Error::semantic("labeled null in query"));
        }
        let mut vars: Vec<String> = Vec::new();
        for a in &atoms {
            for t in &a.args {
                if let Term::Var(v) = t {
                    if !vars.contains(v) {
                        vars.push(v.clone());
                    }
                }
            }
        }
        let mut seen = BTreeSet::new();
        let atoms = atoms.into_iter().filter(|a| seen.insert(a.clone())).collect();
        Ok(Bcq { vars, atoms })
    }

    /// A single atom, e.g. `Bcq::atom("Goal", &[])`.
    pub fn atom(rel: &str, args: &[&str]) -> Bcq {
        Bcq::new(vec![Atom::parse_args(rel, args)]).expect("one atom")
    }

    pub fn constants(&self) -> BTreeSet<Term> {
        self.atoms.iter().flat_map(|a| a.args.iter().filter(|t| t.is_const()).cloned()).collect()
    }

    pub fn relations(&self) -> BTreeSet<&str> {
        self.atoms.iter().map(|a| a.rel.as_str()).collect()
    }

    pub fn substitute(&self, sub: &BTreeMap<String, Term>) -> Bcq {
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                a.map_terms(|t| match t {
                    Term::Var(v) => sub.get(v).cloned().unwrap_or_else(|| t.clone()),
                    other => other.clone(),
                })
            })
            .collect();
        Bcq::new(atoms).expect("substitution keeps atoms")
    }
}

impl fmt::Display for Bcq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.atoms.iter().map(|a| a.to_string()).collect();
        write!(f, "? {}.", parts.join(", "))
    }
}

/// A conjunctive query with an ordered tuple of free variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cq {
    pub free: Vec<String>,
    pub body: Bcq,
}

impl Cq {
    pub fn new(free: Vec<String>, atoms: Vec<Atom>) -> Result<Cq> {
        let body = Bcq::new(atoms)?;
        for v in &free {
            if !body.vars.contains(v) {
                return Err(Error::semantic(format!("free variable {v} does not occur in the query")));
            }
        }
        let mut uniq = free.clone();
        uniq.sort();
        uniq.dedup();
        if uniq.len() != free.len() {
            return Err(Error::semantic("repeated free variable"));
        }
        Ok(Cq { free, body })
    }

    pub fn existentials(&self) -> Vec<String> {
        self.body.vars.iter().filter(|v| !self.free.contains(v)).cloned().collect()
    }

    /// The Boolean query obtained by substituting a tuple for the free
    /// variables.
    pub fn instantiate(&self, tuple: &[Term]) -> Result<Bcq> {
        if tuple.len() != self.free.len() {
            return Err(Error::precondition("answer tuple has the wrong arity"));
        }
        let sub: BTreeMap<String, Term> = self.free.iter().cloned().zip(tuple.iter().cloned()).collect();
        Ok(self.body.substitute(&sub))
    }
}

impl fmt::Display for Cq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.body.atoms.iter().map(|a| a.to_string()).collect();
        write!(f, "?({}) {}.", self.free.join(", "), parts.join(", "))
    }
}

/// Reads `? Q(X, a).` or `?(X) Q(X, Y).`.
pub fn parse_query(text: &str) -> Result<Cq> {
    let mut cur = Cursor::new(text)?;
    cur.expect(Tok::Question, "'?'")?;
    let mut free = Vec::new();
    if cur.peek() == Some(&Tok::LParen) {
        cur.next();
        if cur.peek() == Some(&Tok::RParen) {
            cur.next();
        } else {
            loop {
                let v = cur.ident("free variable")?;
                if !is_variable_name(&v) {
                    return cur.error(format!("free variable expected, got constant {v}"));
                }
                free.push(v);
                match cur.peek() {
                    Some(Tok::Comma) => {
                        cur.next();
                    }
                    Some(Tok::RParen) => {
                        cur.next();
                        break;
                    }
                    _ => return cur.error("expected ',' or ')'"),
                }
            }
        }
    }
    let mut atoms = Vec::new();
    loop {
        atoms.push(parse_atom(&mut cur)?);
        match cur.peek() {
            Some(Tok::Comma) => {
                cur.next();
            }
            Some(Tok::Dot) => {
                cur.next();
                break;
            }
            _ => return cur.error("expected ',' or '.'"),
        }
    }
    if !cur.at_end() {
        return cur.error("trailing input after query");
    }
    Cq::new(free, atoms)
}

/// Parses a query that must have no free variables.
pub fn parse_bcq(text: &str) -> Result<Bcq> {
    let cq = parse_query(text)?;
    if !cq.free.is_empty() {
        return Err(Error::semantic("expected a Boolean query"));
    }
    Ok(cq.body)
}

/// The canonical database of a query: the i-th variable becomes null i.
pub fn freeze(q: &Bcq) -> Database {
    let idx: BTreeMap<&str, u32> = q.vars.iter().enumerate().map(|(i, v)| (v.as_str(), i as u32)).collect();
    let facts = q.atoms.iter().map(|a| {
        a.map_terms(|t| match t {
            Term::Var(v) => Term::Null(idx[v.as_str()]),
            other => other.clone(),
        })
    });
    Database::from_facts(facts).expect("query atoms have consistent arities")
}

/// Connected components of the atom graph, where two atoms are adjacent iff
/// they share a variable. Components keep the original atom order.
pub fn prime_components(q: &Bcq) -> Vec<Bcq> {
    let n = q.atoms.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let nx = p[y];
            p[y] = r;
            y = nx;
        }
        r
    }
    let mut owner: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, a) in q.atoms.iter().enumerate() {
        for t in &a.args {
            if let Term::Var(v) = t {
                if let Some(&j) = owner.get(v.as_str()) {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    parent[ri] = rj;
                } else {
                    owner.insert(v, i);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<Atom>> = BTreeMap::new();
    let mut order: Vec<usize> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        if !groups.contains_key(&r) {
            order.push(r);
        }
        groups.entry(r).or_default().push(q.atoms[i].clone());
    }
    order.into_iter().map(|r| Bcq::new(groups.remove(&r).expect("group")).expect("nonempty")).collect()
}

/// q ⊨ q′, decided by a homomorphism from [q′] into [q] fixing const(q′).
pub fn implies(q: &Bcq, q2: &Bcq) -> bool {
    let src = freeze(q2);
    let dst = freeze(q);
    let fixed = q2.constants();
    let mut it = find_homomorphisms(&src, &dst, &fixed, false);
    it.next().is_some()
}

pub fn equivalent(q: &Bcq, q2: &Bcq) -> bool {
    implies(q, q2) && implies(q2, q)
}

/// Conjunction with the second query's variables renamed apart.
pub fn conjoin(q: &Bcq, q2: &Bcq) -> Bcq {
    let taken: BTreeSet<&String> = q.vars.iter().collect();
    let mut ren: BTreeMap<String, Term> = BTreeMap::new();
    for v in &q2.vars {
        let mut n = v.clone();
        while taken.contains(&n) || ren.values().any(|t| t == &Term::Var(n.clone())) {
            n.push('\'');
        }
        ren.insert(v.clone(), Term::Var(n));
    }
    let renamed = q2.substitute(&ren);
    let mut atoms = q.atoms.clone();
    atoms.extend(renamed.atoms);
    Bcq::new(atoms).expect("nonempty")
}

/// Does the instance satisfy the query?
pub fn evaluate(q: &Bcq, db: &Database) -> bool {
    let mut it = HomSearch::new(&q.atoms, db, |t| t.is_const(), false);
    it.next().is_some()
}
