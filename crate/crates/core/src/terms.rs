//! Terms, facts, schemas and databases, plus the homomorphism machinery
//! built on them (search, isomorphism, direct products, disjoint unions).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::lex::{is_variable_name, Cursor, Tok};

/// A term. The derived order is kind-major (constants, then variables, then
/// labeled nulls) and then by name or index.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Const(String),
    Var(String),
    Null(u32),
}

impl Term {
    pub fn constant(name: impl Into<String>) -> Term {
        Term::Const(name.into())
    }

    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(name.into())
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Term::Const(_))
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Term::Null(_))
    }

    /// Parses a single identifier as a term: uppercase first letter means
    /// variable, anything else is a constant.
    pub fn from_ident(s: &str) -> Term {
        if is_variable_name(s) {
            Term::Var(s.to_string())
        } else {
            Term::Const(s.to_string())
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(s) | Term::Var(s) => write!(f, "{s}"),
            Term::Null(i) => write!(f, "_N{i}"),
        }
    }
}

/// A relation atom. Ground atoms (no variables) are facts.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub rel: String,
    pub args: Vec<Term>,
}

pub type Fact = Atom;

impl Atom {
    pub fn new(rel: impl Into<String>, args: Vec<Term>) -> Atom {
        Atom { rel: rel.into(), args }
    }

    /// Builds an atom from identifier strings, classifying each by case.
    pub fn parse_args(rel: &str, args: &[&str]) -> Atom {
        Atom::new(rel, args.iter().map(|a| Term::from_ident(a)).collect())
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| !t.is_var())
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn map_terms(&self, f: impl Fn(&Term) -> Term) -> Atom {
        Atom { rel: self.rel.clone(), args: self.args.iter().map(f).collect() }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.rel)?;
        if !self.args.is_empty() {
            write!(f, "(")?;
            for (i, t) in self.args.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{t}")?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

/// Relation symbols with their arities, in declaration order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Schema {
    rels: IndexMap<String, usize>,
}

impl Schema {
    pub fn new() -> Schema {
        Schema::default()
    }

    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, usize)>) -> Result<Schema> {
        let mut s = Schema::new();
        for (name, arity) in pairs {
            s.add(name, arity)?;
        }
        Ok(s)
    }

    /// Adds a symbol; re-adding with the same arity is a no-op.
    pub fn add(&mut self, name: impl Into<String>, arity: usize) -> Result<()> {
        let name = name.into();
        match self.rels.get(&name) {
            Some(&a) if a != arity => Err(Error::semantic(format!(
                "relation {name} used with arities {a} and {arity}"
            ))),
            Some(_) => Ok(()),
            None => {
                self.rels.insert(name, arity);
                Ok(())
            }
        }
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        self.rels.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.rels.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> + '_ {
        self.rels.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> + '_ {
        self.rels.keys().map(|k| k.as_str())
    }

    pub fn len(&self) -> usize {
        self.rels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rels.is_empty()
    }

    pub fn max_arity(&self) -> usize {
        self.rels.values().copied().max().unwrap_or(0)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.rels.get_index_of(name)
    }

    pub fn merge(&mut self, other: &Schema) -> Result<()> {
        for (n, a) in other.iter() {
            self.add(n, a)?;
        }
        Ok(())
    }

    pub fn is_subset_of(&self, other: &Schema) -> bool {
        self.iter().all(|(n, a)| other.arity(n) == Some(a))
    }

    pub fn restrict_to(&self, keep: impl Fn(&str) -> bool) -> Schema {
        Schema { rels: self.rels.iter().filter(|(k, _)| keep(k)).map(|(k, v)| (k.clone(), *v)).collect() }
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.iter().map(|(n, a)| format!("{n}/{a}")).collect();
        write!(f, "{}", parts.join(", "))
    }
}

/// A finite set of facts over a schema. Facts may contain labeled nulls only
/// when produced internally (chase results, frozen queries).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Database {
    pub schema: Schema,
    facts: BTreeSet<Fact>,
}

impl Database {
    pub fn new(schema: Schema) -> Database {
        Database { schema, facts: BTreeSet::new() }
    }

    /// Builds a database whose schema is inferred from the facts.
    pub fn from_facts(facts: impl IntoIterator<Item = Fact>) -> Result<Database> {
        let mut db = Database::default();
        for f in facts {
            db.schema.add(f.rel.clone(), f.arity())?;
            db.insert(f)?;
        }
        Ok(db)
    }

    pub fn insert(&mut self, fact: Fact) -> Result<bool> {
        match self.schema.arity(&fact.rel) {
            None => return Err(Error::semantic(format!("relation {} not in schema", fact.rel))),
            Some(a) if a != fact.arity() => {
                return Err(Error::semantic(format!(
                    "relation {} has arity {a}, got {}",
                    fact.rel,
                    fact.arity()
                )))
            }
            _ => {}
        }
        if !fact.is_ground() {
            return Err(Error::semantic(format!("fact {fact} contains a variable")));
        }
        Ok(self.facts.insert(fact))
    }

    pub fn contains(&self, fact: &Fact) -> bool {
        self.facts.contains(fact)
    }

    pub fn facts(&self) -> impl Iterator<Item = &Fact> + '_ {
        self.facts.iter()
    }

    pub fn facts_of<'a>(&'a self, rel: &'a str) -> impl Iterator<Item = &'a Fact> + 'a {
        self.facts.iter().filter(move |f| f.rel == rel)
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    /// Every constant and null occurring in a fact.
    pub fn terms(&self) -> BTreeSet<Term> {
        self.facts.iter().flat_map(|f| f.args.iter().cloned()).collect()
    }

    pub fn has_nulls(&self) -> bool {
        self.facts.iter().any(|f| f.args.iter().any(Term::is_null))
    }

    pub fn union(&self, other: &Database) -> Result<Database> {
        let mut out = self.clone();
        out.schema.merge(&other.schema)?;
        for f in other.facts() {
            out.insert(f.clone())?;
        }
        Ok(out)
    }

    pub fn rename(&self, f: impl Fn(&Term) -> Term) -> Database {
        Database { schema: self.schema.clone(), facts: self.facts.iter().map(|a| a.map_terms(&f)).collect() }
    }
}

impl fmt::Display for Database {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for fact in &self.facts {
            writeln!(f, "{fact}.")?;
        }
        Ok(())
    }
}

/// Reads `R/2, S/1`; an empty string is the empty schema.
pub fn parse_schema(text: &str) -> Result<Schema> {
    let mut schema = Schema::new();
    for (i, part) in text.split(',').map(str::trim).enumerate() {
        if part.is_empty() && i == 0 && text.trim().is_empty() {
            break;
        }
        let err = |msg: &str| Error::Syntax { line: 1, col: i + 1, msg: format!("{msg} in schema entry {part:?}") };
        let (name, arity) = part.split_once('/').ok_or_else(|| err("expected NAME/ARITY"))?;
        let name = name.trim();
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(err("bad relation name"));
        }
        let arity: usize = arity.trim().parse().map_err(|_| err("bad arity"))?;
        schema.add(name, arity)?;
    }
    Ok(schema)
}

/// Reads `R(a, b).` facts, one or more per line, `%` comments.
pub fn parse_database(text: &str) -> Result<Database> {
    let mut cur = Cursor::new(text)?;
    let mut db = Database::default();
    while !cur.at_end() {
        let (line, col) = cur.here();
        let atom = parse_atom(&mut cur)?;
        cur.expect(Tok::Dot, "'.' after fact")?;
        if !atom.is_ground() {
            return Err(Error::Syntax { line, col, msg: format!("fact {atom} contains a variable") });
        }
        db.schema.add(atom.rel.clone(), atom.arity()).map_err(|e| match e {
            Error::Semantic(m) => Error::Syntax { line, col, msg: m },
            other => other,
        })?;
        db.insert(atom)?;
    }
    Ok(db)
}

pub(crate) fn parse_atom(cur: &mut Cursor) -> Result<Atom> {
    let rel = cur.ident("relation symbol")?;
    let mut args = Vec::new();
    if cur.peek() == Some(&Tok::LParen) {
        cur.next();
        loop {
            let t = cur.ident("term")?;
            args.push(Term::from_ident(&t));
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
    Ok(Atom::new(rel, args))
}

pub fn active_domain(db: &Database) -> BTreeSet<Term> {
    db.facts().flat_map(|f| f.args.iter().filter(|t| t.is_const()).cloned()).collect()
}

pub fn restrict(db: &Database, schema: &Schema) -> Database {
    let sch = db.schema.restrict_to(|n| schema.contains(n));
    let mut out = Database::new(sch);
    for f in db.facts().filter(|f| schema.contains(&f.rel)) {
        out.facts.insert(f.clone());
    }
    out
}

pub type Mapping = BTreeMap<Term, Term>;

struct Frame {
    atom: usize,
    cands: Vec<usize>,
    next: usize,
    bound: Vec<usize>,
}

/// Lazy depth-first enumeration of homomorphisms from a list of atoms into a
/// database. Terms for which `fixed` holds must map to themselves; all other
/// terms (variables, nulls, non-fixed constants) are free.
pub struct HomSearch<'a> {
    src: Vec<Atom>,
    src_terms: Vec<Term>,
    atom_terms: Vec<Vec<usize>>,
    dst: Vec<&'a Fact>,
    by_rel: HashMap<&'a str, Vec<usize>>,
    assign: Vec<Option<Term>>,
    used: HashMap<Term, usize>,
    injective: bool,
    done: Vec<bool>,
    stack: Vec<Frame>,
    started: bool,
    finished: bool,
}

impl<'a> HomSearch<'a> {
    pub fn new(src: &[Atom], dst: &'a Database, fixed: impl Fn(&Term) -> bool, injective: bool) -> HomSearch<'a> {
        HomSearch::with_binding(src, dst, fixed, injective, &Mapping::new())
    }

    /// Like `new`, with some source terms pre-assigned.
    pub fn with_binding(
        src: &[Atom],
        dst: &'a Database,
        fixed: impl Fn(&Term) -> bool,
        injective: bool,
        pre: &Mapping,
    ) -> HomSearch<'a> {
        let mut src_terms: Vec<Term> = Vec::new();
        let mut index: HashMap<Term, usize> = HashMap::new();
        let mut atom_terms = Vec::new();
        let mut sorted: Vec<Atom> = src.to_vec();
        sorted.sort();
        sorted.dedup();
        for a in &sorted {
            let mut ids = Vec::new();
            for t in &a.args {
                let id = *index.entry(t.clone()).or_insert_with(|| {
                    src_terms.push(t.clone());
                    src_terms.len() - 1
                });
                ids.push(id);
            }
            atom_terms.push(ids);
        }
        let dst_facts: Vec<&Fact> = dst.facts().collect();
        let mut by_rel: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, f) in dst_facts.iter().enumerate() {
            by_rel.entry(f.rel.as_str()).or_default().push(i);
        }
        let mut assign = vec![None; src_terms.len()];
        let mut used: HashMap<Term, usize> = HashMap::new();
        let mut finished = false;
        for (i, t) in src_terms.iter().enumerate() {
            let target = if let Some(v) = pre.get(t) {
                Some(v.clone())
            } else if fixed(t) {
                Some(t.clone())
            } else {
                None
            };
            if let Some(v) = target {
                let c = used.entry(v.clone()).or_insert(0);
                *c += 1;
                if injective && *c > 1 {
                    finished = true;
                }
                assign[i] = Some(v);
            }
        }
        let n = sorted.len();
        HomSearch {
            src: sorted,
            src_terms,
            atom_terms,
            dst: dst_facts,
            by_rel,
            assign,
            used,
            injective,
            done: vec![false; n],
            stack: Vec::new(),
            started: false,
            finished,
        }
    }

    fn candidates(&self, atom: usize) -> Vec<usize> {
        let a = &self.src[atom];
        let Some(list) = self.by_rel.get(a.rel.as_str()) else { return Vec::new() };
        list.iter()
            .copied()
            .filter(|&fi| {
                let f = self.dst[fi];
                if f.args.len() != a.args.len() {
                    return false;
                }
                let mut local: Vec<(usize, &Term)> = Vec::new();
                for (pos, &tid) in self.atom_terms[atom].iter().enumerate() {
                    let target = &f.args[pos];
                    match &self.assign[tid] {
                        Some(v) => {
                            if v != target {
                                return false;
                            }
                        }
                        None => {
                            if let Some((_, prev)) = local.iter().find(|(id, _)| *id == tid) {
                                if *prev != target {
                                    return false;
                                }
                            } else {
                                if self.injective && self.used.contains_key(target) {
                                    return false;
                                }
                                if self.injective && local.iter().any(|(_, t)| *t == target) {
                                    return false;
                                }
                                local.push((tid, target));
                            }
                        }
                    }
                }
                true
            })
            .collect()
    }

    fn unbind(&mut self, ids: &[usize]) {
        for &id in ids {
            if let Some(v) = self.assign[id].take() {
                if let Some(c) = self.used.get_mut(&v) {
                    *c -= 1;
                    if *c == 0 {
                        self.used.remove(&v);
                    }
                }
            }
        }
    }

    fn push_frame(&mut self) -> bool {
        let mut best: Option<(usize, Vec<usize>)> = None;
        for i in 0..self.src.len() {
            if self.done[i] {
                continue;
            }
            let c = self.candidates(i);
            if best.as_ref().map(|(_, b)| c.len() < b.len()).unwrap_or(true) {
                let empty = c.is_empty();
                best = Some((i, c));
                if empty {
                    break;
                }
            }
        }
        match best {
            None => false,
            Some((atom, cands)) => {
                self.done[atom] = true;
                self.stack.push(Frame { atom, cands, next: 0, bound: Vec::new() });
                true
            }
        }
    }

    fn mapping(&self) -> Mapping {
        self.src_terms
            .iter()
            .zip(&self.assign)
            .map(|(t, v)| (t.clone(), v.clone().expect("complete assignment")))
            .collect()
    }

    /// Advances the top frame to its next consistent candidate.
    fn advance_top(&mut self) -> bool {
        let Some(top) = self.stack.last_mut() else { return false };
        let bound = std::mem::take(&mut top.bound);
        self.unbind(&bound);
        loop {
            let top = self.stack.last_mut().expect("frame");
            if top.next >= top.cands.len() {
                return false;
            }
            let fi = top.cands[top.next];
            top.next += 1;
            let atom = top.atom;
            let fact = self.dst[fi];
            let mut newly = Vec::new();
            let mut ok = true;
            for (pos, &tid) in self.atom_terms[atom].iter().enumerate() {
                let target = &fact.args[pos];
                match &self.assign[tid] {
                    Some(v) if v == target => {}
                    Some(_) => {
                        ok = false;
                        break;
                    }
                    None => {
                        if self.injective && self.used.contains_key(target) {
                            ok = false;
                            break;
                        }
                        self.assign[tid] = Some(target.clone());
                        *self.used.entry(target.clone()).or_insert(0) += 1;
                        newly.push(tid);
                    }
                }
            }
            if ok {
                self.stack.last_mut().expect("frame").bound = newly;
                return true;
            }
            self.unbind(&newly);
        }
    }
}

impl Iterator for HomSearch<'_> {
    type Item = Mapping;

    fn next(&mut self) -> Option<Mapping> {
        if self.finished {
            return None;
        }
        if !self.started {
            self.started = true;
            if !self.push_frame() {
                self.finished = true;
                return Some(self.mapping());
            }
        } else if self.stack.is_empty() {
            self.finished = true;
            return None;
        }
        // Invariant here: the top frame needs advancing.
        loop {
            if self.advance_top() {
                if self.push_frame() {
                    continue;
                }
                return Some(self.mapping());
            }
            let f = self.stack.pop().expect("frame");
            self.done[f.atom] = false;
            if self.stack.is_empty() {
                self.finished = true;
                return None;
            }
        }
    }
}

/// Homomorphisms from `src` into `dst` fixing the constants in `fixed`.
pub fn find_homomorphisms<'a>(
    src: &Database,
    dst: &'a Database,
    fixed: &BTreeSet<Term>,
    injective: bool,
) -> HomSearch<'a> {
    let atoms: Vec<Atom> = src.facts().cloned().collect();
    HomSearch::new(&atoms, dst, |t| fixed.contains(t), injective)
}

pub fn is_isomorphic(a: &Database, b: &Database) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let ta = a.terms();
    let tb = b.terms();
    if ta.len() != tb.len() {
        return false;
    }
    let mut ra: BTreeMap<&str, usize> = BTreeMap::new();
    let mut rb: BTreeMap<&str, usize> = BTreeMap::new();
    for f in a.facts() {
        *ra.entry(&f.rel).or_default() += 1;
    }
    for f in b.facts() {
        *rb.entry(&f.rel).or_default() += 1;
    }
    if ra != rb {
        return false;
    }
    // An injective homomorphism between equal-size fact sets over equal-size
    // domains is onto both facts and terms, so its inverse is a homomorphism.
    let mut it = find_homomorphisms(a, b, &BTreeSet::new(), true);
    it.next().is_some()
}

fn term_label(t: &Term) -> String {
    t.to_string()
}

/// Direct product per the pairwise definition; pair constants are named
/// `left*right`.
pub fn direct_product(i: &Database, j: &Database) -> Result<Database> {
    if i.schema != j.schema && !(i.schema.is_subset_of(&j.schema) && j.schema.is_subset_of(&i.schema)) {
        return Err(Error::semantic("direct product of databases over different schemas"));
    }
    let mut out = Database::new(i.schema.clone());
    for f in i.facts() {
        for g in j.facts_of(&f.rel) {
            let args = f
                .args
                .iter()
                .zip(&g.args)
                .map(|(a, b)| Term::Const(format!("{}*{}", term_label(a), term_label(b))))
                .collect();
            out.facts.insert(Atom::new(f.rel.clone(), args));
        }
    }
    Ok(out)
}

/// Union of copies of `parts` that share only the constants in `shared`.
/// Constants outside `shared` in part `k` are renamed to `name~k`; nulls are
/// renumbered consecutively across all parts.
pub fn disjoint_union_over(shared: &BTreeSet<Term>, parts: &[Database]) -> Result<Database> {
    let mut out = Database::default();
    let mut next_null = 0u32;
    for (k, part) in parts.iter().enumerate() {
        out.schema.merge(&part.schema)?;
        let mut nulls: BTreeMap<u32, u32> = BTreeMap::new();
        for t in part.terms() {
            if let Term::Null(n) = t {
                nulls.insert(n, next_null);
                next_null += 1;
            }
        }
        for f in part.facts() {
            let g = f.map_terms(|t| match t {
                Term::Const(c) if !shared.contains(t) => Term::Const(format!("{c}~{k}")),
                Term::Null(n) => Term::Null(nulls[n]),
                other => other.clone(),
            });
            out.facts.insert(g);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::example1_database;
    use proptest::prelude::*;

    fn db(s: &str) -> Database {
        parse_database(s).unwrap()
    }

    fn c(s: &str) -> Term {
        Term::constant(s)
    }

    fn is_hom(h: &Mapping, src: &Database, dst: &Database) -> bool {
        src.facts().all(|f| dst.contains(&f.map_terms(|t| h.get(t).cloned().unwrap_or_else(|| t.clone()))))
    }

    #[test]
    fn active_domain_examples() {
        assert!(active_domain(&db("")).is_empty());
        assert_eq!(active_domain(&db("E(a).")), [c("a")].into());
        let d4 = example1_database(4);
        assert_eq!(active_domain(&d4), ["a0", "a1", "a2", "a3"].map(c).into());
        let mut with_null = db("E(a).");
        with_null.insert(Atom::new("E", vec![Term::Null(0)])).unwrap();
        assert_eq!(active_domain(&with_null).len(), 1);
    }

    #[test]
    fn parse_database_rejects_variables_and_arity_clash() {
        assert!(parse_database("E(X).").is_err());
        assert!(parse_database("E(a). E(a, b).").is_err());
        let d = db("% comment\nE(a).\nE(a).\nG.");
        assert_eq!(d.len(), 2);
    }

    #[test]
    fn parse_schema_forms() {
        let s = parse_schema("R/2, S/1").unwrap();
        assert_eq!(s.arity("R"), Some(2));
        assert_eq!(s.arity("S"), Some(1));
        assert!(parse_schema("").unwrap().is_empty());
        assert!(parse_schema("R").is_err());
        assert!(parse_schema("R/x").is_err());
    }

    #[test]
    fn homomorphism_examples() {
        let d4 = example1_database(4);
        let id: Mapping = d4.terms().into_iter().map(|t| (t.clone(), t)).collect();
        assert!(find_homomorphisms(&d4, &d4, &BTreeSet::new(), true).any(|h| h == id));

        let src = db("A(a, b).");
        let dst = db("A(c, c).");
        let all: Vec<Mapping> = find_homomorphisms(&src, &dst, &BTreeSet::new(), false).collect();
        assert_eq!(all, vec![[(c("a"), c("c")), (c("b"), c("c"))].into()]);
        assert_eq!(find_homomorphisms(&src, &dst, &BTreeSet::new(), true).count(), 0);

        let frozen = crate::query::freeze(&crate::query::parse_bcq("? Q(X, a).").unwrap());
        let got: Vec<Mapping> = find_homomorphisms(&frozen, &db("Q(b, a)."), &[c("a")].into(), false).collect();
        assert_eq!(got, vec![[(Term::Null(0), c("b")), (c("a"), c("a"))].into()]);
    }

    #[test]
    fn fixed_constants_are_respected() {
        let src = db("E(a).");
        let dst = db("E(b).");
        assert_eq!(find_homomorphisms(&src, &dst, &[c("a")].into(), false).count(), 0);
        assert_eq!(find_homomorphisms(&src, &dst, &BTreeSet::new(), false).count(), 1);
    }

    #[test]
    fn isomorphism_examples() {
        let d3 = example1_database(3);
        assert!(is_isomorphic(&d3, &d3));
        assert!(!is_isomorphic(&d3, &example1_database(4)));
        assert!(is_isomorphic(&db("A(a, b)."), &db("A(c, d).")));
        assert!(!is_isomorphic(&db("A(a, b)."), &db("A(c, c).")));
    }

    #[test]
    fn product_examples() {
        let j = db("A(a, b).");
        let empty = Database::new(j.schema.clone());
        assert!(direct_product(&empty, &j).unwrap().is_empty());
        let dp = crate::lab::prop10_database();
        let sq = direct_product(&dp, &dp).unwrap();
        assert_eq!(sq.len(), 16);
        assert_eq!(active_domain(&sq).len(), 4);
        let p = direct_product(&db("A(a, b)."), &db("A(c, d).")).unwrap();
        assert_eq!(p.facts().cloned().collect::<Vec<_>>(), vec![Atom::parse_args("A", &["a*c", "b*d"])]);
        assert!(direct_product(&db("A(a, b)."), &db("E(a).")).is_err());
    }

    #[test]
    fn union_examples() {
        let d = db("E(a, b). E(b, a).");
        assert!(is_isomorphic(&disjoint_union_over(&BTreeSet::new(), &[d.clone()]).unwrap(), &d));

        let mut q1 = Database::new(Schema::from_pairs([("Q", 2)]).unwrap());
        q1.insert(Atom::new("Q", vec![Term::Null(1), c("a")])).unwrap();
        let u = disjoint_union_over(&[c("a")].into(), &[q1.clone(), q1]).unwrap();
        assert_eq!(u.len(), 2);
        assert_eq!(active_domain(&u), [c("a")].into());

        let u = disjoint_union_over(&BTreeSet::new(), &[db("P(a)."), db("P(a).")]).unwrap();
        assert_eq!(u.len(), 2);
        assert_eq!(active_domain(&u).len(), 2);
    }

    #[test]
    fn restrict_examples() {
        let i = db("E(a). Q(a, b).");
        let q = Schema::from_pairs([("Q", 2)]).unwrap();
        assert_eq!(restrict(&i, &q).facts().cloned().collect::<Vec<_>>(), vec![Atom::parse_args("Q", &["a", "b"])]);
        assert_eq!(restrict(&i, &i.schema).facts, i.facts);
        assert!(restrict(&i, &Schema::new()).is_empty());
    }

    fn small_db() -> impl Strategy<Value = Database> {
        let fact = (0..2usize, 0..5usize, 0..5usize);
        proptest::collection::vec(fact, 0..8).prop_map(|fs| {
            let mut d = Database::new(Schema::from_pairs([("E", 2), ("P", 1)]).unwrap());
            for (r, x, y) in fs {
                let a = Term::constant(format!("c{x}"));
                let b = Term::constant(format!("c{y}"));
                let f = if r == 0 { Atom::new("E", vec![a, b]) } else { Atom::new("P", vec![a]) };
                d.insert(f).unwrap();
            }
            d
        })
    }

    fn shuffle_names(d: &Database, shift: usize) -> Database {
        d.rename(|t| match t {
            Term::Const(s) => {
                let n: usize = s[1..].parse().unwrap();
                Term::constant(format!("k{}", (n + shift) % 5))
            }
            other => other.clone(),
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn homomorphisms_compose(a in small_db(), b in small_db(), c in small_db()) {
            let none = BTreeSet::new();
            for h in find_homomorphisms(&a, &b, &none, false).take(3) {
                prop_assert!(is_hom(&h, &a, &b));
                for g in find_homomorphisms(&b, &c, &none, false).take(3) {
                    let gh: Mapping = h.iter().map(|(k, v)| (k.clone(), g[v].clone())).collect();
                    prop_assert!(is_hom(&gh, &a, &c));
                }
            }
        }

        #[test]
        fn isomorphism_is_an_equivalence(a in small_db(), b in small_db(), s in 0..5usize) {
            prop_assert!(is_isomorphic(&a, &a));
            let r = shuffle_names(&a, s);
            prop_assert!(is_isomorphic(&a, &r));
            prop_assert!(is_isomorphic(&r, &a));
            prop_assert_eq!(is_isomorphic(&a, &b), is_isomorphic(&b, &a));
            if is_isomorphic(&a, &b) {
                prop_assert!(is_isomorphic(&r, &b));
            }
        }

        #[test]
        fn product_biconditional(a in small_db(), b in small_db()) {
            let p = direct_product(&a, &b).unwrap();
            let da: Vec<Term> = active_domain(&a).into_iter().collect();
            let db_: Vec<Term> = active_domain(&b).into_iter().collect();
            let pair = |x: &Term, y: &Term| Term::constant(format!("{x}*{y}"));
            for x1 in &da { for y1 in &db_ {
                let l = Atom::new("P", vec![x1.clone()]);
                let r = Atom::new("P", vec![y1.clone()]);
                prop_assert_eq!(p.contains(&Atom::new("P", vec![pair(x1, y1)])), a.contains(&l) && b.contains(&r));
                for x2 in &da { for y2 in &db_ {
                    let l = Atom::new("E", vec![x1.clone(), x2.clone()]);
                    let r = Atom::new("E", vec![y1.clone(), y2.clone()]);
                    let f = Atom::new("E", vec![pair(x1, y1), pair(x2, y2)]);
                    prop_assert_eq!(p.contains(&f), a.contains(&l) && b.contains(&r));
                }}
            }}
        }

        #[test]
        fn union_parts_embed_injectively(a in small_db(), b in small_db(), keep in 0..5usize) {
            let shared: BTreeSet<Term> = (0..keep).map(|i| Term::constant(format!("c{i}"))).collect();
            let u = disjoint_union_over(&shared, &[a.clone(), b.clone()]).unwrap();
            for part in [&a, &b] {
                let fixed: BTreeSet<Term> = active_domain(part).intersection(&shared).cloned().collect();
                prop_assert!(find_homomorphisms(part, &u, &fixed, true).next().is_some());
            }
        }
    }
}
