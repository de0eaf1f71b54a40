//! Rule generators: a successor chain with arithmetic, the input tape and
//! machine runs for every candidate query number, and the copy of accepted
//! queries into the query schema.
//!
//! Elements of the successor chain double as numbers: the chain starts at
//! the least constant, so the constants of the database are the numbers
//! 0..c-1 and every later element is a labeled null. Every relation is
//! built as rule text and parsed, so output always re-parses.

use std::collections::BTreeSet;

use super::{Move, Ntm, Sym};
use crate::error::{Error, Result};
use crate::rules::{parse_rules, RuleSet};
use crate::terms::Schema;

fn vars(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn atom(rel: &str, args: &[String]) -> String {
    if args.is_empty() {
        rel.to_string()
    } else {
        format!("{rel}({})", args.join(","))
    }
}

fn finish(lines: Vec<String>) -> RuleSet {
    let text = lines.join("\n");
    parse_rules(&text).unwrap_or_else(|e| panic!("generated rules do not parse: {e}\n{text}"))
}

fn bit_rel(b: usize) -> &'static str {
    if b == 0 {
        "Bit0"
    } else {
        "Bit1"
    }
}

/// The domain constants and their strict order, minimum and successor
/// chain, verbatim.
fn sigma_s_lines(dsch: &Schema) -> Vec<String> {
    let mut out = Vec::new();
    for (rel, arity) in dsch.iter() {
        if arity == 0 {
            continue;
        }
        let xs = vars("X", arity);
        let heads: Vec<String> = xs.iter().map(|x| format!("DC({x})")).collect();
        out.push(format!("{} -> {}.", atom(rel, &xs), heads.join(", ")));
    }
    out.extend(
        [
            "DC(X), DC(Y) -> LT(X,Y) | X = Y | LT(Y,X).",
            "LT(X,Y), LT(Y,Z) -> LT(X,Z).",
            "LT(X,X) -> Undesired.",
            "DC(X), DC(Y), LT(X,Y) -> NotMin(Y).",
            "DC(X) -> Min(X) | NotMin(X).",
            "DC(X), DC(Y), LT(X,Y), LT(Y,Z) -> LTNotSucc(X,Z).",
            "DC(X), DC(Y), LT(X,Y) -> Succ(X,Y) | LTNotSucc(X,Y).",
            "Succ(X,Y) -> Succ(Y,Z), LT(Y,Z).",
            "Succ(X,Y) -> Num(X), Num(Y).",
        ]
        .map(String::from),
    );
    out
}

pub fn gen_sigma_s(dsch: &Schema) -> RuleSet {
    finish(sigma_s_lines(dsch))
}

/// Rules that close gaps of the verbatim chain rules: the chain starts at
/// a minimum, which always exists and lies below every constant; guesses
/// contradicting derived facts are flagged; successor is a bijection.
const CHAIN_REPAIRS: [&str; 9] = [
    "Min(X), NotMin(X) -> Undesired.",
    "Succ(X,Y), LTNotSucc(X,Y) -> Undesired.",
    "Min(X) -> Succ(X,Y), LT(X,Y).",
    "DC(X) -> Min(Y).",
    "Min(X), DC(Y) -> X = Y | LT(X,Y).",
    "Succ(X,Y), LT(X,W), DC(W) -> Y = W | LT(Y,W).",
    "Succ(X,Y), Succ(X,Z) -> Y = Z.",
    "Succ(X,Z), Succ(Y,Z) -> X = Y.",
    "Min(X), Min(Y) -> X = Y.",
];

const ARITHMETIC: [&str; 19] = [
    "Num(X), Min(Y) -> Add(X,Y,X).",
    "Add(X,Y,Z), Succ(Y,U), Succ(Z,V) -> Add(X,U,V).",
    "Num(X), Min(Y) -> Mul(X,Y,Y).",
    "Mul(X,Y,Z), Succ(Y,U), Add(Z,X,W) -> Mul(X,U,W).",
    // Half0(X,H): X = 2H. Half1(X,H): X = 2H+1.
    "Min(X) -> Half0(X,X).",
    "Half0(X,H), Succ(X,Y) -> Half1(Y,H).",
    "Half1(X,H), Succ(X,Y), Succ(H,G) -> Half0(Y,G).",
    // Bit0/Bit1(X,I): bit I of X, counting from the least significant.
    "Half0(X,H), Min(Z) -> Bit0(X,Z).",
    "Half1(X,H), Min(Z) -> Bit1(X,Z).",
    "Half0(X,H), Bit0(H,I), Succ(I,J) -> Bit0(X,J).",
    "Half0(X,H), Bit1(H,I), Succ(I,J) -> Bit1(X,J).",
    "Half1(X,H), Bit0(H,I), Succ(I,J) -> Bit0(X,J).",
    "Half1(X,H), Bit1(H,I), Succ(I,J) -> Bit1(X,J).",
    // Len(X,L): L binary digits, with Len(0) = 1.
    "Min(Z), Succ(Z,O) -> Len(Z,O), Len(O,O).",
    "Half0(X,H), Len(H,L), Succ(P,H), Succ(L,M) -> Len(X,M).",
    "Half1(X,H), Len(H,L), Succ(P,H), Succ(L,M) -> Len(X,M).",
    // Tri(K,T): T = K(K+1)/2. Pair(E,V,N): N = pair(E,V).
    "Min(Z) -> Tri(Z,Z).",
    "Tri(K,T), Succ(K,K1), Add(T,K1,T1) -> Tri(K1,T1).",
    "Add(E,V,S), Tri(S,T), Add(T,V,N) -> Pair(E,V,N).",
];

pub fn gen_sigma_num(dsch: &Schema) -> RuleSet {
    let mut lines = sigma_s_lines(dsch);
    lines.extend(CHAIN_REPAIRS.map(String::from));
    lines.extend(ARITHMETIC.map(String::from));
    finish(lines)
}

/// Atoms computing the mixed-radix value `R` of `ys` in base `base`; the
/// value of the empty tuple is the minimum.
fn rank(ys: &[String], base: &str, tag: &str) -> (Vec<String>, String) {
    if ys.is_empty() {
        let r = format!("R{tag}");
        return (vec![format!("Min({r})")], r);
    }
    let mut atoms = Vec::new();
    let mut acc = ys[0].clone();
    for (j, y) in ys.iter().enumerate().skip(1) {
        let m = format!("M{tag}{j}");
        let r = format!("R{tag}{j}");
        atoms.push(format!("Mul({acc},{base},{m})"));
        atoms.push(format!("Add({m},{y},{r})"));
        acc = r;
    }
    (atoms, acc)
}

fn bits_of(n: usize) -> Vec<Sym> {
    format!("{n:b}").chars().map(|c| if c == '1' { Sym::One } else { Sym::Zero }).collect()
}

fn header(a: usize, b: usize) -> Vec<Sym> {
    let mut h = bits_of(a);
    h.push(Sym::Sep);
    h.extend(bits_of(b));
    h.push(Sym::Sep);
    h
}

fn tape(s: Sym) -> String {
    format!("ITape{}", s.rel_suffix())
}

fn work(s: Sym) -> String {
    format!("WTape{}", s.rel_suffix())
}

fn state(s: &str) -> String {
    format!("State_{s}")
}

/// Writes the binary digits of `num` most significant first, starting at
/// cell `start`, on the tape of every query the `guard` atoms admit.
fn binary_block(out: &mut Vec<String>, guard: &str, num: &str, start: &str) {
    for b in 0..2 {
        out.push(format!(
            "{guard}, Len({num},L), Succ(L1,L), {}({num},I), Add(I,P,L1), {start}, Add(K,P,Z) -> {}(Z,X).",
            bit_rel(b),
            tape(if b == 0 { Sym::Zero } else { Sym::One })
        ));
    }
    out.push(format!("{guard}, Len({num},L), {start}, Add(K,L,Z) -> ITapeSep(Z,X)."));
}

fn check_machine(m: &Ntm) -> Result<()> {
    if !m.is_convergent() {
        return Err(Error::precondition("machine is not convergent"));
    }
    if !m.is_k_bounded(2) {
        return Err(Error::precondition("machine is not 2-bounded"));
    }
    Ok(())
}

pub fn gen_sigma_sim(m: &Ntm, dsch: &Schema, qsch: &Schema) -> Result<RuleSet> {
    check_machine(m)?;
    let mut out: Vec<String> = Vec::new();
    let head0 = header(dsch.max_arity(), dsch.len());
    let head1 = header(qsch.max_arity(), qsch.len());
    let k0 = head0.len();
    let k1 = head1.len();

    // Numerals for fixed offsets.
    let top = k0.max(k1).max(1);
    out.push("Min(X) -> Val0(X).".into());
    for p in 0..top {
        out.push(format!("Val{p}(X), Succ(X,Y) -> Val{}(Y).", p + 1));
    }

    // The number of constants is the successor of the guessed maximum.
    out.extend(
        [
            "DC(X), DC(Y), LT(X,Y) -> NotMax(X).",
            "DC(X) -> Max(X) | NotMax(X).",
            "Max(X), NotMax(X) -> Undesired.",
            "Max(X), Max(Y) -> X = Y.",
            "Max(X), Succ(X,Y) -> CVal(Y).",
        ]
        .map(String::from),
    );

    // b(wd)#b(nd)# then b(c)#.
    for (p, s) in head0.iter().enumerate() {
        out.push(format!("BCQ(X), Val{p}(Z) -> {}(Z,X).", tape(*s)));
    }
    binary_block(&mut out, "BCQ(X), CVal(C)", "C", &format!("Val{k0}(K)"));
    out.push(format!("CVal(C), Len(C,L), Val{k0}(K), Add(K,L,Z), Succ(Z,T) -> TStartD(T)."));

    // Truth table of D: one cell per candidate fact.
    out.push("CVal(C), Val1(O) -> CPow0(O).".into());
    for k in 1..=dsch.max_arity() {
        out.push(format!("CPow{}(P), CVal(C), Mul(P,C,R) -> CPow{k}(R).", k - 1));
    }
    out.push("Min(Z) -> DOff0(Z).".into());
    for (i, (rel, arity)) in dsch.iter().enumerate() {
        out.push(format!("DOff{i}(O), CPow{arity}(P), Add(O,P,R) -> DOff{}(R).", i + 1));
        let ys = vars("Y", arity);
        let mut body: Vec<String> = ys.iter().map(|y| format!("DC({y})")).collect();
        body.push("CVal(C)".into());
        let (ratoms, r) = rank(&ys, "C", "");
        body.extend(ratoms);
        body.push("TStartD(T)".into());
        body.push(format!("DOff{i}(O)"));
        body.push("Add(T,O,B)".into());
        body.push(format!("Add(B,{r},Z)"));
        let mut pos_args = ys.clone();
        pos_args.push("Z".into());
        let pos = atom(&format!("PosD{i}"), &pos_args);
        out.push(format!("{} -> {pos}.", body.join(", ")));
        out.push(format!("{}, {pos}, BCQ(X) -> ITape1Bar(Z,X).", atom(rel, &ys)));
        out.push(format!("{pos}, BCQ(X) -> ITape0Bar(Z,X)."));
    }
    let nd = dsch.len();
    out.push(format!("TStartD(T), DOff{nd}(S), Add(T,S,Z), BCQ(X) -> ITapeSep(Z,X)."));
    out.push(format!("TStartD(T), DOff{nd}(S), Add(T,S,Z), Succ(Z,H) -> QHStart(H)."));

    // b(wq)#b(nq)# then b(e)#.
    for (p, s) in head1.iter().enumerate() {
        out.push(format!("BCQ(X), QHStart(H), Val{p}(P), Add(H,P,Z) -> {}(Z,X).", tape(*s)));
    }
    out.push(format!("QHStart(H), Val{k1}(P), Add(H,P,Z) -> EStart(Z)."));

    // Query numbers: X = pair(E,V) with V = 1 followed by the query table
    // over C+E terms.
    out.push("Num(B), Val1(O) -> BPow0(B,O).".into());
    for k in 1..=qsch.max_arity() {
        out.push(format!("BPow{}(B,P), Mul(P,B,R) -> BPow{k}(B,R).", k - 1));
    }
    out.push("Num(B), Min(Z) -> QOff0(B,Z).".into());
    for (j, (_, arity)) in qsch.iter().enumerate() {
        out.push(format!("QOff{j}(B,O), BPow{arity}(B,P), Add(O,P,R) -> QOff{}(B,R).", j + 1));
    }
    let nq = qsch.len();
    out.push(format!(
        "Pair(E,V,X), CVal(C), Add(C,E,B), QOff{nq}(B,S), Len(V,L), Succ(S,L) -> Cand(X), QE(X,E), QV(X,V), QBase(X,B), QSize(X,S)."
    ));
    binary_block(&mut out, "BCQ(X), QE(X,E)", "E", "EStart(K)");
    out.push("Cand(X), QE(X,E), Len(E,L), EStart(K), Add(K,L,Z), Succ(Z,T) -> TStartQ(X,T).".into());
    out.push("BCQ(X), TStartQ(X,T) -> ITape1(T,X).".into());
    for (j, (_, arity)) in qsch.iter().enumerate() {
        let ys = vars("Y", arity);
        let mut sel: Vec<String> = vec!["Cand(X)".into(), "QBase(X,B)".into()];
        sel.extend(ys.iter().map(|y| format!("LT({y},B)")));
        let (ratoms, r) = rank(&ys, "B", "");
        sel.extend(ratoms);
        sel.push(format!("QOff{j}(B,O)"));
        sel.push(format!("Add(O,{r},P)"));
        let mut has_args = ys.clone();
        has_args.push("X".into());
        for (b, name) in [(1, "HasQ"), (0, "NHasQ")] {
            out.push(format!(
                "{}, QV(X,V), QSize(X,S), Succ(S1,S), Add(P,I,S1), {}(V,I) -> {}.",
                sel.join(", "),
                bit_rel(b),
                atom(&format!("{name}{j}"), &has_args)
            ));
        }
        let mut pos_args = ys.clone();
        pos_args.push("Z".into());
        pos_args.push("X".into());
        let pos = atom(&format!("PosQ{j}"), &pos_args);
        out.push(format!("{}, TStartQ(X,T), Succ(T,T1), Add(T1,P,Z) -> {pos}.", sel.join(", ")));
        let has = atom(&format!("HasQ{j}"), &has_args);
        out.push(format!("{has}, {pos}, BCQ(X) -> ITape1(Z,X)."));
        out.push(format!("{}, {pos}, BCQ(X) -> ITape0(Z,X).", atom(&format!("NHasQ{j}"), &has_args)));
        let mut uses: Vec<String> = ys.iter().map(|y| format!("UsesQ({y},X)")).collect();
        uses.push("NonEmptyQ(X)".into());
        out.push(format!("{has} -> {}.", uses.join(", ")));
    }
    out.extend(
        [
            "Cand(X), CVal(C) -> VarsOk(X,C).",
            "VarsOk(X,K), UsesQ(K,X), Succ(K,K1) -> VarsOk(X,K1).",
            "Cand(X), NonEmptyQ(X), QBase(X,B), VarsOk(X,B) -> BCQ(X).",
            "BCQ(X), TStartQ(X,T), QV(X,V), Len(V,L), Add(T,L,E) -> ITapeBlank(E,X).",
            "ITapeBlank(Z,X), Succ(Z,Z1) -> ITapeBlank(Z1,X).",
        ]
        .map(String::from),
    );

    // Runs: one per query number X and choice number V. The input head
    // sits on cell T at time T; work cells exist from the time they can be
    // reached.
    out.push(format!(
        "BCQ(X), Num(V), Min(Z) -> {}(Z,V,X), WHead(Z,Z,V,X), WTapeBlank(Z,Z,V,X).",
        state(&m.initial)
    ));
    out.push("Step(T1,V,X) -> WTapeBlank(T1,T1,V,X).".into());
    for c in Sym::ALL {
        for cmp in ["LT(Q,P)", "LT(P,Q)"] {
            out.push(format!(
                "Step(T1,V,X), Succ(T,T1), WHead(P,T,V,X), {}(Q,T,V,X), {cmp} -> {}(Q,T1,V,X).",
                work(c),
                work(c)
            ));
        }
    }
    for ((s, a, b), opts) in &m.delta {
        let guard_set = if *a == Sym::ZeroBar {
            m.options(s, Sym::OneBar, *b).filter(|o| o.len() == 2).unwrap_or(opts)
        } else {
            opts
        };
        for act in opts {
            let (t, w, mv) = act;
            let mut body = vec![
                format!("{}(T,V,X)", state(s)),
                format!("{}(T,X)", tape(*a)),
                "WHead(P,T,V,X)".to_string(),
                format!("{}(P,T,V,X)", work(*b)),
                "Succ(T,T1)".to_string(),
            ];
            if guard_set.len() == 2 {
                let i = guard_set.iter().position(|o| o == act).expect("convergent machine");
                body.push(format!("{}(V,T)", bit_rel(i)));
            }
            let head = |p: &str| {
                format!("{}(T1,V,X), {}(P,T1,V,X), WHead({p},T1,V,X), Step(T1,V,X)", state(t), work(*w))
            };
            match mv {
                Move::R => out.push(format!("{}, Succ(P,P1) -> {}.", body.join(", "), head("P1"))),
                Move::L => {
                    out.push(format!("{}, Succ(P0,P) -> {}.", body.join(", "), head("P0")));
                    out.push(format!("{}, Min(P) -> {}.", body.join(", "), head("P")));
                }
            }
        }
    }
    for s in &m.accepting {
        out.push(format!("BCQ(Z), {}(X,Y,Z) -> Accept(Z).", state(s)));
    }
    Ok(finish(out))
}

pub fn gen_sigma_um(qsch: &Schema) -> RuleSet {
    let mut out: Vec<String> = [
        "BCQ(X), UsesQ(Y,X), CVal(C), Add(C,K,Y) -> QVar(Y,X).",
        // A variable y of query x becomes pair(x+1, y) + c.
        "QVar(Y,X), Succ(X,X1), Pair(X1,Y,P), CVal(C), Add(P,C,Z) -> NewV(Y,Z,X).",
        "BCQ(X), QVar(Y,X), NewV(Y,Z,X) -> Name(Y,Z,X).",
        "BCQ(X), DC(Y) -> Name(Y,Y,X).",
    ]
    .map(String::from)
    .to_vec();
    for (j, (rel, arity)) in qsch.iter().enumerate() {
        let ys = vars("Y", arity);
        let zs = vars("Z", arity);
        let mut has_args = ys.clone();
        has_args.push("X".into());
        let mut body = vec!["Accept(X)".to_string(), atom(&format!("HasQ{j}"), &has_args)];
        body.extend(ys.iter().zip(&zs).map(|(y, z)| format!("Name({y},{z},X)")));
        out.push(format!("{} -> {}.", body.join(", "), atom(rel, &zs)));
        let xs = vars("X", arity);
        let mut body = vec!["Undesired".to_string()];
        body.extend(xs.iter().map(|x| format!("DC({x})")));
        out.push(format!("{} -> {}.", body.join(", "), atom(rel, &xs)));
    }
    finish(out)
}

fn placeholder(schema: &Schema, tag: &str) -> Schema {
    Schema::from_pairs(schema.iter().enumerate().map(|(i, (_, a))| (format!("{tag}~{i}"), a))).expect("distinct")
}

fn assemble(m: &Ntm, dsch: &Schema, qsch: &Schema) -> Result<RuleSet> {
    let mut rs = gen_sigma_num(dsch);
    rs.extend(gen_sigma_sim(m, dsch, qsch)?)?;
    rs.extend(gen_sigma_um(qsch))?;
    Ok(rs)
}

/// Auxiliary relation names the compiled rule set uses for these schemas.
pub fn reserved_symbols(m: &Ntm, dsch: &Schema, qsch: &Schema) -> Result<BTreeSet<String>> {
    let rs = assemble(m, &placeholder(dsch, "D"), &placeholder(qsch, "Q"))?;
    Ok(rs.schema.names().filter(|n| !n.contains('~')).map(String::from).collect())
}

pub fn compile(m: &Ntm, dsch: &Schema, qsch: &Schema) -> Result<RuleSet> {
    check_machine(m)?;
    let reserved = reserved_symbols(m, dsch, qsch)?;
    for name in dsch.names().chain(qsch.names()) {
        if reserved.contains(name) {
            return Err(Error::semantic(format!("relation {name} collides with an auxiliary symbol")));
        }
    }
    if let Some(n) = dsch.names().find(|n| qsch.contains(n)) {
        return Err(Error::semantic(format!("relation {n} is in both schemas")));
    }
    assemble(m, dsch, qsch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chase::{chase_until, Bounds, NodeStatus};
    use crate::lab::{chain_violations, fact_bit_machine};
    use crate::machine::convergent_closure;
    use crate::query::parse_bcq;
    use crate::rules::{intensional_symbols, parse_rule_str, Ded};
    use crate::terms::{parse_database, Atom, Term};

    fn has(rs: &RuleSet, text: &str) -> bool {
        let r = parse_rule_str(text).unwrap();
        rs.rules.contains(&r)
    }

    fn count(rs: &RuleSet, pred: impl Fn(&Ded) -> bool) -> usize {
        rs.rules.iter().filter(|r| pred(r)).count()
    }

    fn heads_into(r: &Ded, rel: &str) -> bool {
        r.disjuncts.iter().any(|d| d.atoms().any(|a| a.rel == rel))
    }

    fn body_has(r: &Ded, rel: &str) -> bool {
        r.body.iter().any(|a| a.rel == rel)
    }

    #[test]
    fn chain_rules() {
        let s = gen_sigma_s(&Schema::from_pairs([("D", 2)]).unwrap());
        assert!(has(&s, "D(X1,X2) -> DC(X1), DC(X2)."));
        assert!(has(&s, "LT(X,X) -> Undesired."));
        assert!(has(&s, "Succ(X,Y) -> Succ(Y,Z), LT(Y,Z)."));
        let tgd = s.rules.iter().find(|r| !r.is_full()).unwrap();
        assert_eq!(tgd.disjuncts[0].existentials, vec!["Z".to_string()]);
        let nullary = gen_sigma_s(&Schema::from_pairs([("F", 0)]).unwrap());
        assert!(!nullary.rules.iter().any(|r| body_has(r, "F")));
    }

    #[test]
    fn arithmetic_extends_chain_rules() {
        let dsch = Schema::from_pairs([("D", 1)]).unwrap();
        let s = gen_sigma_s(&dsch);
        let n = gen_sigma_num(&dsch);
        assert!(s.rules.iter().all(|r| n.rules.contains(r)));
        assert!(has(&n, "Num(X), Min(Y) -> Add(X,Y,X)."));
        assert!(has(&n, "Mul(X,Y,Z), Succ(Y,U), Add(Z,X,W) -> Mul(X,U,W)."));
    }

    #[test]
    fn arithmetic_on_one_constant() {
        let d = parse_database("P(a).").unwrap();
        let rules = gen_sigma_num(&Schema::from_pairs([("P", 1)]).unwrap());
        let stop = parse_bcq("? Undesired.").unwrap();
        let tree = chase_until(&d, &rules, &Bounds::depth(300), &[stop], false).unwrap();
        let open: Vec<_> = tree.leaves().filter(|l| l.status == NodeStatus::Open).collect();
        assert!(!open.is_empty());
        for l in open {
            let inst = l.instance.as_ref().unwrap();
            assert_eq!(chain_violations(inst, 8), Vec::<String>::new());
            let mut chain: Vec<Term> = vec![inst.facts_of("Min").next().unwrap().args[0].clone()];
            while chain.len() < 6 {
                let last = chain.last().unwrap().clone();
                chain.push(inst.facts_of("Succ").find(|f| f.args[0] == last).unwrap().args[1].clone());
            }
            let fact = |rel: &str, x: usize, y: usize| Atom::new(rel, vec![chain[x].clone(), chain[y].clone()]);
            assert!(inst.contains(&fact("Bit1", 5, 0)));
            assert!(inst.contains(&fact("Bit0", 5, 1)));
            assert!(inst.contains(&fact("Bit1", 5, 2)));
            assert!(!inst.contains(&fact("Bit0", 5, 0)));
            for x in 0..6 {
                assert!(inst.contains(&Atom::new("Add", vec![chain[x].clone(), chain[0].clone(), chain[x].clone()])));
            }
        }
    }

    #[test]
    fn simulation_rules() {
        let dsch = Schema::from_pairs([("D0", 1)]).unwrap();
        let qsch = Schema::from_pairs([("Q0", 0)]).unwrap();
        let m = fact_bit_machine();
        let sim = gen_sigma_sim(&m, &dsch, &qsch).unwrap();
        assert!(has(&sim, "BCQ(Z), State_acc(X,Y,Z) -> Accept(Z)."));
        assert_eq!(count(&sim, |r| heads_into(r, "Accept")), m.accepting.len());
        assert_eq!(count(&sim, |r| heads_into(r, "ITape1Bar") && body_has(r, "D0")), 1);
        assert_eq!(count(&sim, |r| heads_into(r, "ITape0Bar") && !body_has(r, "D0")), 1);
        let guarded = |b: &str| count(&sim, |r| body_has(r, "State_s0") && body_has(r, "ITape1Bar") && body_has(r, b));
        assert_eq!((guarded("Bit0"), guarded("Bit1")), (1, 1));
    }

    #[test]
    fn query_copy_rules() {
        let qsch = Schema::from_pairs([("Q0", 0), ("Q1", 2)]).unwrap();
        let um = gen_sigma_um(&qsch);
        assert!(has(&um, "BCQ(X), DC(Y) -> Name(Y,Y,X)."));
        assert!(has(&um, "Undesired, DC(X1), DC(X2) -> Q1(X1,X2)."));
        assert_eq!(count(&um, |r| body_has(r, "Undesired")), 2);
        for q in ["Q0", "Q1"] {
            assert_eq!(count(&um, |r| heads_into(r, q) && body_has(r, "Accept")), 1, "{q}");
        }
    }

    #[test]
    fn compile_contract() {
        let dsch = Schema::from_pairs([("D0", 1), ("D1", 2)]).unwrap();
        let qsch = Schema::from_pairs([("Q0", 0)]).unwrap();
        let m = fact_bit_machine();
        let rs = compile(&m, &dsch, &qsch).unwrap();
        let int = intensional_symbols(&rs);
        assert!(dsch.names().all(|n| !int.contains(n)));
        assert!(qsch.names().all(|n| int.contains(n)));
        assert_eq!(compile(&m, &dsch, &qsch).unwrap(), rs);

        let mut raw = Ntm::new("s0");
        raw.add("s0", Sym::ZeroBar, Sym::Blank, "s1", Sym::Blank, Move::R);
        raw.add("s0", Sym::OneBar, Sym::Blank, "s2", Sym::Blank, Move::R);
        assert!(matches!(compile(&raw, &dsch, &qsch), Err(Error::Precondition(_))));
        let mut wide = convergent_closure(&raw).unwrap();
        wide.add("s0", Sym::OneBar, Sym::Blank, "s3", Sym::Blank, Move::R);
        assert!(matches!(compile(&wide, &dsch, &qsch), Err(Error::Precondition(_))));

        let clash = Schema::from_pairs([("LT", 2)]).unwrap();
        assert!(compile(&m, &clash, &qsch).is_err());
        assert!(compile(&m, &dsch, &Schema::from_pairs([("Accept", 1)]).unwrap()).is_err());
        assert!(compile(&m, &dsch, &Schema::from_pairs([("D0", 1)]).unwrap()).is_err());
        assert!(reserved_symbols(&m, &dsch, &qsch).unwrap().contains("Succ"));
    }
}
