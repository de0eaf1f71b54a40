//! The input string of a database-query pair and the numbering of queries.
//!
//! Layout: `b(wd)#b(nd)#b(c)#tvt(D)#b(wq)#b(nq)#b(e)#tvt(q)` where tvt(D)
//! uses barred bits. Candidate atoms are enumerated relation by relation in
//! schema order, argument tuples in lexicographic order over the sorted
//! constants of D followed by the query variables x1..xe in first-occurrence
//! order. tvt(q) starts with a sentinel `1`, so its value as a binary number
//! determines it uniquely.

use std::collections::BTreeSet;

use super::Sym;
use crate::error::{Error, Result};
use crate::query::Bcq;
use crate::terms::{active_domain, Atom, Database, Schema, Term};

pub fn to_ascii(s: &[Sym]) -> String {
    s.iter().map(|c| c.ascii()).collect()
}

pub fn from_ascii(s: &str) -> Result<Vec<Sym>> {
    s.trim_end_matches(['\n', '\r'])
        .chars()
        .enumerate()
        .map(|(i, c)| {
            Sym::from_ascii(c).ok_or(Error::Syntax { line: 1, col: i + 1, msg: format!("unknown tape symbol '{c}'") })
        })
        .collect()
}

fn binary(n: usize) -> Vec<Sym> {
    format!("{n:b}").chars().map(|c| if c == '1' { Sym::One } else { Sym::Zero }).collect()
}

/// Odometer enumeration of `n`-tuples over `0..base`.
pub(crate) fn index_tuples(base: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..base).map(move |i| {
                    let mut u = t.clone();
                    u.push(i);
                    u
                })
            })
            .collect();
    }
    out
}

fn check_over(atoms: &[&Atom], schema: &Schema, what: &str) -> Result<()> {
    for a in atoms {
        match schema.arity(&a.rel) {
            Some(n) if n == a.arity() => {}
            Some(_) => return Err(Error::precondition(format!("{what} uses {} with the wrong arity", a.rel))),
            None => return Err(Error::precondition(format!("{what} uses {} outside its schema", a.rel))),
        }
    }
    Ok(())
}

fn constants_of(d: &Database) -> Result<Vec<Term>> {
    if d.has_nulls() {
        return Err(Error::precondition("database contains labeled nulls"));
    }
    Ok(active_domain(d).into_iter().collect())
}

/// Query atoms as index tuples over constants followed by variables.
fn query_index(q: &Bcq, consts: &[Term]) -> Result<BTreeSet<(String, Vec<usize>)>> {
    let mut out = BTreeSet::new();
    for a in &q.atoms {
        let mut idx = Vec::new();
        for t in &a.args {
            let i = match t {
                Term::Var(v) => consts.len() + q.vars.iter().position(|w| w == v).expect("query variable"),
                Term::Const(_) => consts
                    .iter()
                    .position(|c| c == t)
                    .ok_or_else(|| Error::precondition(format!("query constant {t} is not in the database")))?,
                Term::Null(_) => return Err(Error::precondition("labeled null in query")),
            };
            idx.push(i);
        }
        out.insert((a.rel.clone(), idx));
    }
    Ok(out)
}

/// tvt(q) including the sentinel bit.
fn query_bits(q: &Bcq, consts: &[Term], qsch: &Schema) -> Result<Vec<bool>> {
    check_over(&q.atoms.iter().collect::<Vec<_>>(), qsch, "query")?;
    let present = query_index(q, consts)?;
    let base = consts.len() + q.vars.len();
    let mut bits = vec![true];
    for (rel, arity) in qsch.iter() {
        for t in index_tuples(base, arity) {
            bits.push(present.contains(&(rel.to_string(), t)));
        }
    }
    Ok(bits)
}

pub fn encode_input(d: &Database, q: &Bcq, dsch: &Schema, qsch: &Schema) -> Result<Vec<Sym>> {
    check_over(&d.facts().collect::<Vec<_>>(), dsch, "database")?;
    let consts = constants_of(d)?;
    let qbits = query_bits(q, &consts, qsch)?;
    let mut out = Vec::new();
    let sep = |out: &mut Vec<Sym>| out.push(Sym::Sep);
    out.extend(binary(dsch.max_arity()));
    sep(&mut out);
    out.extend(binary(dsch.len()));
    sep(&mut out);
    out.extend(binary(consts.len()));
    sep(&mut out);
    for (rel, arity) in dsch.iter() {
        for t in index_tuples(consts.len(), arity) {
            let fact = Atom::new(rel, t.iter().map(|&i| consts[i].clone()).collect());
            out.push(if d.contains(&fact) { Sym::OneBar } else { Sym::ZeroBar });
        }
    }
    sep(&mut out);
    out.extend(binary(qsch.max_arity()));
    sep(&mut out);
    out.extend(binary(qsch.len()));
    sep(&mut out);
    out.extend(binary(q.vars.len()));
    sep(&mut out);
    out.extend(qbits.iter().map(|&b| if b { Sym::One } else { Sym::Zero }));
    Ok(out)
}

/// The fields of an encoded input. `tvt_q` excludes the sentinel bit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub wd: usize,
    pub nd: usize,
    pub c: usize,
    pub tvt_d: Vec<bool>,
    pub wq: usize,
    pub nq: usize,
    pub e: usize,
    pub tvt_q: Vec<bool>,
}

pub fn decode_input(s: &[Sym]) -> Result<Decoded> {
    let mut end = s.len();
    while end > 0 && s[end - 1] == Sym::Blank {
        end -= 1;
    }
    let blocks: Vec<&[Sym]> = s[..end].split(|&c| c == Sym::Sep).collect();
    if blocks.len() != 8 {
        return Err(Error::semantic(format!("expected 8 blocks, found {}", blocks.len())));
    }
    let num = |b: &[Sym]| -> Result<usize> {
        if b.is_empty() {
            return Err(Error::semantic("empty number block"));
        }
        b.iter().try_fold(0usize, |acc, c| match c {
            Sym::Zero => Ok(acc * 2),
            Sym::One => Ok(acc * 2 + 1),
            _ => Err(Error::semantic("number block with a non-binary symbol")),
        })
    };
    let tvt_d = blocks[3]
        .iter()
        .map(|c| match c {
            Sym::ZeroBar => Ok(false),
            Sym::OneBar => Ok(true),
            _ => Err(Error::semantic("database block with an unbarred symbol")),
        })
        .collect::<Result<Vec<bool>>>()?;
    let q = blocks[7];
    if q.first() != Some(&Sym::One) {
        return Err(Error::semantic("query block lacks its leading 1"));
    }
    let tvt_q = q[1..]
        .iter()
        .map(|c| match c {
            Sym::Zero => Ok(false),
            Sym::One => Ok(true),
            _ => Err(Error::semantic("query block with a non-binary symbol")),
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(Decoded {
        wd: num(blocks[0])?,
        nd: num(blocks[1])?,
        c: num(blocks[2])?,
        tvt_d,
        wq: num(blocks[4])?,
        nq: num(blocks[5])?,
        e: num(blocks[6])?,
        tvt_q,
    })
}

/// Cantor pairing (a+b)(a+b+1)/2 + b.
pub fn pair(a: u128, b: u128) -> Option<u128> {
    let s = a.checked_add(b)?;
    let t = s.checked_mul(s.checked_add(1)?)? / 2;
    t.checked_add(b)
}

fn isqrt(n: u128) -> u128 {
    if n < 2 {
        return n;
    }
    let mut x = (n as f64).sqrt() as u128;
    while x.checked_mul(x).map(|y| y > n).unwrap_or(true) {
        x -= 1;
    }
    while (x + 1).checked_mul(x + 1).map(|y| y <= n).unwrap_or(false) {
        x += 1;
    }
    x
}

pub fn unpair(n: u128) -> (u128, u128) {
    // w is the largest value with w(w+1)/2 <= n.
    let mut w = (isqrt(n.saturating_mul(8).saturating_add(1)) - 1) / 2;
    while w * (w + 1) / 2 > n {
        w -= 1;
    }
    while (w + 1) * (w + 2) / 2 <= n {
        w += 1;
    }
    let b = n - w * (w + 1) / 2;
    (w - b, b)
}

/// pair(e, v) where e is the number of query variables and v the value of
/// tvt(q) read as a binary number.
pub fn godel_number(q: &Bcq, d: &Database, qsch: &Schema) -> Result<u128> {
    let consts = constants_of(d)?;
    let bits = query_bits(q, &consts, qsch)?;
    if bits.len() > 127 {
        return Err(Error::SizeGuard("query truth table longer than 127 bits".into()));
    }
    let v = bits.iter().fold(0u128, |acc, &b| acc * 2 + b as u128);
    pair(q.vars.len() as u128, v).ok_or_else(|| Error::SizeGuard("query number overflows".into()))
}

/// (e, v) for a query number.
pub fn godel_inverse(n: u128) -> (u128, u128) {
    unpair(n)
}

/// The query a number stands for, with variables named X1..Xe. Fails if the
/// number does not encode a query over the schema and constants.
pub fn decode_query(n: u128, d: &Database, qsch: &Schema) -> Result<Bcq> {
    let consts = constants_of(d)?;
    let (e, v) = unpair(n);
    let e = usize::try_from(e).map_err(|_| Error::semantic("too many variables"))?;
    let base = consts.len() + e;
    let mut size = 0usize;
    for (_, arity) in qsch.iter() {
        size = base
            .checked_pow(arity as u32)
            .and_then(|p| size.checked_add(p))
            .ok_or_else(|| Error::semantic("query table too large"))?;
    }
    if v == 0 || 128 - v.leading_zeros() as usize != size + 1 {
        return Err(Error::semantic(format!("{n} does not encode a query over this schema")));
    }
    let mut bit = size;
    let mut atoms = Vec::new();
    let mut used = vec![false; e];
    for (rel, arity) in qsch.iter() {
        for t in index_tuples(base, arity) {
            bit -= 1;
            if (v >> bit) & 1 == 1 {
                let args = t
                    .iter()
                    .map(|&i| {
                        if i < consts.len() {
                            consts[i].clone()
                        } else {
                            used[i - consts.len()] = true;
                            Term::Var(format!("X{}", i - consts.len() + 1))
                        }
                    })
                    .collect();
                atoms.push(Atom::new(rel, args));
            }
        }
    }
    if atoms.is_empty() || used.iter().any(|u| !u) {
        return Err(Error::semantic(format!("{n} does not encode a query over this schema")));
    }
    Bcq::new(atoms)
}
