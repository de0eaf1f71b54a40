//! Disjunctive embedded dependencies: syntax, parsing, printing and
//! classification, plus the construction that turns a finite ontology sample
//! into one rule per (database, query) pair.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::lex::{Cursor, Tok};
use crate::query::Bcq;
use crate::terms::{active_domain, parse_atom, Atom, Database, Schema, Term};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Literal {
    Atom(Atom),
    Eq(Term, Term),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Atom(a) => write!(f, "{a}"),
            Literal::Eq(a, b) => write!(f, "{a} = {b}"),
        }
    }
}

/// One alternative of a rule head. `existentials` lists the head variables
/// that do not occur in the body, in order of first occurrence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Disjunct {
    pub existentials: Vec<String>,
    pub literals: Vec<Literal>,
}

impl Disjunct {
    pub fn atoms(&self) -> impl Iterator<Item = &Atom> + '_ {
        self.literals.iter().filter_map(|l| match l {
            Literal::Atom(a) => Some(a),
            Literal::Eq(..) => None,
        })
    }

    pub fn equalities(&self) -> impl Iterator<Item = (&Term, &Term)> + '_ {
        self.literals.iter().filter_map(|l| match l {
            Literal::Eq(a, b) => Some((a, b)),
            Literal::Atom(_) => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ded {
    pub body: Vec<Atom>,
    pub disjuncts: Vec<Disjunct>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Ed,
    Dtgd,
    Tgd,
    NcLike,
    EqualityFree,
    Full,
}

impl Ded {
    /// Builds a rule, computing the existential variables of each disjunct
    /// and checking the structural invariants.
    pub fn new(body: Vec<Atom>, heads: Vec<Vec<Literal>>) -> Result<Ded> {
        if body.is_empty() {
            return Err(Error::semantic("rule body must not be empty"));
        }
        if heads.is_empty() || heads.iter().any(|h| h.is_empty()) {
            return Err(Error::semantic("rule head must have at least one nonempty disjunct"));
        }
        let body_vars: BTreeSet<&str> = body
            .iter()
            .flat_map(|a| a.args.iter())
            .filter_map(|t| match t {
                Term::Var(v) => Some(v.as_str()),
                _ => None,
            })
            .collect();
        let mut disjuncts = Vec::new();
        for lits in heads {
            let mut ex: Vec<String> = Vec::new();
            for l in &lits {
                let terms: Vec<&Term> = match l {
                    Literal::Atom(a) => a.args.iter().collect(),
                    Literal::Eq(a, b) => vec![a, b],
                };
                for t in terms {
                    match t {
                        Term::Var(v) if !body_vars.contains(v.as_str()) && !ex.contains(v) => ex.push(v.clone()),
                        Term::Null(_) => return Err(Error::semantic("labeled null in rule")),
                        _ => {}
                    }
                }
            }
            for l in &lits {
                if let Literal::Eq(a, b) = l {
                    let only_ex = |t: &Term| matches!(t, Term::Var(v) if ex.contains(v));
                    let mentioned_in_atom = |t: &Term| lits.iter().any(|m| matches!(m, Literal::Atom(at) if at.args.contains(t)));
                    for t in [a, b] {
                        if only_ex(t) && !mentioned_in_atom(t) {
                            return Err(Error::semantic(format!(
                                "variable {t} occurs only in an equality and not in the body"
                            )));
                        }
                    }
                }
            }
            disjuncts.push(Disjunct { existentials: ex, literals: lits });
        }
        if body.iter().flat_map(|a| a.args.iter()).any(Term::is_null) {
            return Err(Error::semantic("labeled null in rule"));
        }
        Ok(Ded { body, disjuncts })
    }

    pub fn k(&self) -> usize {
        self.disjuncts.len()
    }

    pub fn has_equalities(&self) -> bool {
        self.disjuncts.iter().any(|d| d.equalities().next().is_some())
    }

    pub fn is_full(&self) -> bool {
        self.disjuncts.iter().all(|d| d.existentials.is_empty())
    }

    /// Body variables in order of first occurrence.
    pub fn body_vars(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for a in &self.body {
            for t in &a.args {
                if let Term::Var(v) = t {
                    if !out.contains(v) {
                        out.push(v.clone());
                    }
                }
            }
        }
        out
    }

    pub fn classify(&self) -> BTreeSet<Label> {
        let mut out = BTreeSet::new();
        let ed = self.k() == 1;
        let eq_free = !self.has_equalities();
        if ed {
            out.insert(Label::Ed);
        }
        if eq_free {
            out.insert(Label::Dtgd);
            out.insert(Label::EqualityFree);
        }
        if ed && eq_free {
            out.insert(Label::Tgd);
        }
        if self.is_full() {
            out.insert(Label::Full);
        }
        // A rule whose only outcome is a nullary flag or a contradiction
        // plays the role of a negative constraint.
        let nc = self.disjuncts.iter().all(|d| {
            d.literals.iter().all(|l| match l {
                Literal::Atom(a) => a.args.is_empty(),
                Literal::Eq(Term::Const(x), Term::Const(y)) => x != y,
                Literal::Eq(..) => false,
            })
        });
        if nc {
            out.insert(Label::NcLike);
        }
        out
    }

    pub fn constants(&self) -> BTreeSet<Term> {
        let mut out = BTreeSet::new();
        for a in &self.body {
            out.extend(a.args.iter().filter(|t| t.is_const()).cloned());
        }
        for d in &self.disjuncts {
            for l in &d.literals {
                match l {
                    Literal::Atom(a) => out.extend(a.args.iter().filter(|t| t.is_const()).cloned()),
                    Literal::Eq(a, b) => {
                        for t in [a, b] {
                            if t.is_const() {
                                out.insert(t.clone());
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

impl fmt::Display for Ded {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body: Vec<String> = self.body.iter().map(|a| a.to_string()).collect();
        let heads: Vec<String> = self
            .disjuncts
            .iter()
            .map(|d| d.literals.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(", "))
            .collect();
        write!(f, "{} -> {}.", body.join(", "), heads.join(" | "))
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Label::Ed => "ED",
            Label::Dtgd => "DTGD",
            Label::Tgd => "TGD",
            Label::NcLike => "NC-like",
            Label::EqualityFree => "equality-free",
            Label::Full => "full",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RuleSet {
    pub schema: Schema,
    pub rules: Vec<Ded>,
}

impl RuleSet {
    pub fn new(rules: Vec<Ded>) -> Result<RuleSet> {
        let mut rs = RuleSet::default();
        for r in rules {
            rs.push(r)?;
        }
        Ok(rs)
    }

    pub fn push(&mut self, r: Ded) -> Result<()> {
        for a in r.body.iter().chain(r.disjuncts.iter().flat_map(|d| d.atoms())) {
            self.schema.add(a.rel.clone(), a.arity())?;
        }
        self.rules.push(r);
        Ok(())
    }

    pub fn extend(&mut self, other: RuleSet) -> Result<()> {
        for r in other.rules {
            self.push(r)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.rules.iter().all(Ded::is_full)
    }

    pub fn constants(&self) -> BTreeSet<Term> {
        self.rules.iter().flat_map(|r| r.constants()).collect()
    }
}

impl fmt::Display for RuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

pub fn serialize_rules(rs: &RuleSet) -> String {
    rs.to_string()
}

pub fn classify(r: &Ded) -> BTreeSet<Label> {
    r.classify()
}

/// Symbols occurring in some rule head.
pub fn intensional_symbols(rs: &RuleSet) -> BTreeSet<String> {
    rs.rules
        .iter()
        .flat_map(|r| r.disjuncts.iter().flat_map(|d| d.atoms().map(|a| a.rel.clone())))
        .collect()
}

fn parse_literal(cur: &mut Cursor) -> Result<Literal> {
    // An equality starts with a term followed by '='; an atom with a symbol.
    if let (Some(Tok::Ident(_)), Some(Tok::Equals)) = (cur.peek(), cur.peek_at(1)) {
        let l = cur.ident("term")?;
        cur.expect(Tok::Equals, "'='")?;
        let r = cur.ident("term")?;
        return Ok(Literal::Eq(Term::from_ident(&l), Term::from_ident(&r)));
    }
    Ok(Literal::Atom(parse_atom(cur)?))
}

fn parse_rule(cur: &mut Cursor) -> Result<Ded> {
    let (line, col) = cur.here();
    if cur.peek() == Some(&Tok::Arrow) {
        return cur.error("empty rule body");
    }
    let mut body = Vec::new();
    loop {
        body.push(parse_atom(cur)?);
        match cur.peek() {
            Some(Tok::Comma) => {
                cur.next();
            }
            Some(Tok::Arrow) => {
                cur.next();
                break;
            }
            _ => return cur.error("expected ',' or '->'"),
        }
    }
    let mut heads = Vec::new();
    let mut lits = Vec::new();
    loop {
        lits.push(parse_literal(cur)?);
        match cur.peek() {
            Some(Tok::Comma) => {
                cur.next();
            }
            Some(Tok::Bar) => {
                cur.next();
                heads.push(std::mem::take(&mut lits));
            }
            Some(Tok::Dot) => {
                cur.next();
                heads.push(std::mem::take(&mut lits));
                break;
            }
            _ => return cur.error("expected ',', '|' or '.'"),
        }
    }
    Ded::new(body, heads).map_err(|e| match e {
        Error::Semantic(m) => Error::Semantic(format!("rule at {line}:{col}: {m}")),
        other => other,
    })
}

/// Parses a rule file: `body -> disjunct | disjunct .` statements.
pub fn parse_rules(text: &str) -> Result<RuleSet> {
    let mut cur = Cursor::new(text)?;
    let mut rs = RuleSet::default();
    while !cur.at_end() {
        let r = parse_rule(&mut cur)?;
        rs.push(r)?;
    }
    Ok(rs)
}

pub fn parse_rule_str(text: &str) -> Result<Ded> {
    let rs = parse_rules(text)?;
    if rs.rules.len() != 1 {
        return Err(Error::semantic(format!("expected one rule, found {}", rs.rules.len())));
    }
    Ok(rs.rules.into_iter().next().expect("one rule"))
}

fn var_for_constant(c: &str) -> String {
    format!("V{c}")
}

/// For each pair (D, q) emits `φ_D -> q' | v_a = v_b ...` where every constant
/// a of D becomes the variable `V<a>` and q's variables become existential.
pub fn ontology_to_deds(pairs: &[(Database, Bcq)]) -> Result<RuleSet> {
    let mut rs = RuleSet::default();
    for (d, q) in pairs {
        if d.is_empty() {
            return Err(Error::precondition("empty database has no rule body"));
        }
        let adom = active_domain(d);
        if !q.constants().is_subset(&adom) {
            return Err(Error::precondition("query constant outside the database's active domain"));
        }
        if d.has_nulls() {
            return Err(Error::precondition("database contains labeled nulls"));
        }
        let vname = |t: &Term| match t {
            Term::Const(c) => Term::Var(var_for_constant(c)),
            other => other.clone(),
        };
        let used: BTreeSet<String> = adom
            .iter()
            .map(|t| match t {
                Term::Const(c) => var_for_constant(c),
                _ => unreachable!("active domain holds constants"),
            })
            .collect();
        if used.len() != adom.len() {
            return Err(Error::precondition("constant names collide after variable renaming"));
        }
        // Rename query variables apart from the V<a> variables.
        let mut qmap = std::collections::BTreeMap::new();
        for v in &q.vars {
            let mut n = v.clone();
            while used.contains(&n) {
                n.push('_');
            }
            qmap.insert(v.clone(), n);
        }
        let body: Vec<Atom> = d.facts().map(|f| f.map_terms(vname)).collect();
        let qhead: Vec<Literal> = q
            .atoms
            .iter()
            .map(|a| {
                Literal::Atom(a.map_terms(|t| match t {
                    Term::Var(v) => Term::Var(qmap[v].clone()),
                    other => vname(other),
                }))
            })
            .collect();
        let mut heads = vec![qhead];
        let consts: Vec<&Term> = adom.iter().collect();
        for i in 0..consts.len() {
            for j in i + 1..consts.len() {
                heads.push(vec![Literal::Eq(vname(consts[i]), vname(consts[j]))]);
            }
        }
        rs.push(Ded::new(body, heads)?)?;
    }
    Ok(rs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab;
    use crate::machine::{compile, gen_sigma_num, gen_sigma_s, gen_sigma_um};
    use crate::query::parse_bcq;
    use crate::terms::parse_database;
    use proptest::prelude::*;

    fn rule(s: &str) -> Ded {
        parse_rule_str(s).unwrap()
    }

    #[test]
    fn parse_examples() {
        let r = rule("A(X,Y), A(Y,X) -> Goal | X = Y.");
        assert_eq!(r.k(), 2);
        assert!(r.has_equalities());
        let r = rule("P(X) -> Q(X, Z).");
        assert_eq!(r.disjuncts[0].existentials, vec!["Z".to_string()]);
        assert!(matches!(parse_rules("-> Q(a)."), Err(Error::Syntax { .. })));
    }

    #[test]
    fn parse_errors_carry_positions() {
        match parse_rules("P(X) -> Q(X).\nP(X) Q(X).") {
            Err(Error::Syntax { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(parse_rules("P(X) -> Q(X)").is_err());
        assert!(matches!(parse_rules("P(X) -> X = Y."), Err(Error::Semantic(_))));
        assert!(parse_rules("P(X) -> Q(X). Q(X, Y) -> P(X).").is_err());
    }

    #[test]
    fn classify_examples() {
        use Label::*;
        let ex1 = lab::example1_rules();
        let l = classify(&ex1.rules[0]);
        assert!(!l.contains(&Ed) && !l.contains(&Dtgd) && l.contains(&Full));
        let l = classify(&rule("DC(Y), NotMax(Y) -> Succ(Y, Z), LT(Y, Z)."));
        assert_eq!(l, [Ed, Dtgd, Tgd, EqualityFree].into());
        let l = classify(&rule("P(X) -> P(X)."));
        assert_eq!(l, [Ed, Dtgd, Tgd, EqualityFree, Full].into());
        assert!(classify(&rule("LT(X, X) -> Undesired.")).contains(&NcLike));
    }

    #[test]
    fn intensional_examples() {
        assert_eq!(intensional_symbols(&parse_rules("P(X) -> Q(X).").unwrap()), ["Q".to_string()].into());
        assert!(intensional_symbols(&RuleSet::default()).is_empty());
        let dsch = Schema::from_pairs([("D0", 1), ("D1", 2)]).unwrap();
        let int = intensional_symbols(&gen_sigma_s(&dsch));
        for s in ["DC", "LT", "Undesired", "NotMin", "Min", "LTNotSucc", "Succ", "Num"] {
            assert!(int.contains(s), "{s}");
        }
        assert!(!int.contains("D0") && !int.contains("D1"));
    }

    #[test]
    fn ontology_examples() {
        let pairs = vec![(parse_database("P(a).").unwrap(), parse_bcq("? Q(X).").unwrap())];
        let rs = ontology_to_deds(&pairs).unwrap();
        assert_eq!(rs.to_string().trim(), "P(Va) -> Q(X).");
        let pairs = vec![(parse_database("P(a). P(b).").unwrap(), parse_bcq("? Goal.").unwrap())];
        let rs = ontology_to_deds(&pairs).unwrap();
        assert_eq!(rs.to_string().trim(), "P(Va), P(Vb) -> Goal | Va = Vb.");
        let empty = vec![(parse_database("").unwrap(), parse_bcq("? Goal.").unwrap())];
        assert!(matches!(ontology_to_deds(&empty), Err(Error::Precondition(_))));
        let foreign = vec![(parse_database("P(a).").unwrap(), parse_bcq("? Q(b).").unwrap())];
        assert!(ontology_to_deds(&foreign).is_err());
    }

    #[test]
    fn query_variables_are_renamed_apart() {
        let pairs = vec![(parse_database("P(a).").unwrap(), parse_bcq("? Q(Va).").unwrap())];
        let rs = ontology_to_deds(&pairs).unwrap();
        assert_eq!(rs.rules[0].disjuncts[0].existentials.len(), 1);
    }

    fn round_trips(rs: &RuleSet) {
        let text = serialize_rules(rs);
        let back = parse_rules(&text).unwrap();
        assert_eq!(&back, rs, "{text}");
    }

    #[test]
    fn generated_rules_round_trip() {
        let dsch = Schema::from_pairs([("D0", 1), ("D1", 2)]).unwrap();
        let qsch = Schema::from_pairs([("Q0", 0), ("Q1", 2)]).unwrap();
        round_trips(&gen_sigma_s(&dsch));
        round_trips(&gen_sigma_num(&dsch));
        round_trips(&gen_sigma_um(&qsch));
        round_trips(&compile(&lab::fact_bit_machine(), &dsch, &qsch).unwrap());
        round_trips(&lab::example1_rules());
        round_trips(&lab::prop10_rules());
    }

    #[test]
    fn labels_are_consistent() {
        for seed in 0..50 {
            let mut r = lab::rng(seed);
            for shape in [lab::RuleShape::Full, lab::RuleShape::Dtgd, lab::RuleShape::Ed] {
                for d in &lab::random_rules(&mut r, shape, 4).rules {
                    let l = classify(d);
                    if l.contains(&Label::Tgd) {
                        assert!(l.contains(&Label::Ed) && l.contains(&Label::Dtgd));
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn random_rules_round_trip(seed in 0u64..10_000, shape in 0..3usize) {
            let shape = [lab::RuleShape::Full, lab::RuleShape::Dtgd, lab::RuleShape::Ed][shape];
            let rs = lab::random_rules(&mut lab::rng(seed), shape, 4);
            prop_assert_eq!(parse_rules(&serialize_rules(&rs)).unwrap().rules, rs.rules);
        }
    }
}
