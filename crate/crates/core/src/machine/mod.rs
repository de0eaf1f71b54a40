//! Nondeterministic Turing machines with a read-only input tape and a work
//! tape, their input encoding, and their compilation into rule sets.

mod compile;
mod encode;

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;

use crate::error::{Error, Result};

pub use compile::{compile, gen_sigma_num, gen_sigma_s, gen_sigma_sim, gen_sigma_um, reserved_symbols};
pub use encode::{
    decode_input, decode_query, encode_input, from_ascii, godel_inverse, godel_number, pair, to_ascii, unpair,
    Decoded,
};

/// Tape alphabet. `ZeroBar` and `OneBar` carry database truth values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sym {
    Zero,
    One,
    Blank,
    Sep,
    ZeroBar,
    OneBar,
}

impl Sym {
    pub const ALL: [Sym; 6] = [Sym::Zero, Sym::One, Sym::Blank, Sym::Sep, Sym::ZeroBar, Sym::OneBar];

    pub fn ascii(self) -> char {
        match self {
            Sym::Zero => '0',
            Sym::One => '1',
            Sym::Blank => '_',
            Sym::Sep => '#',
            Sym::ZeroBar => 'o',
            Sym::OneBar => 'i',
        }
    }

    pub fn from_ascii(c: char) -> Option<Sym> {
        Sym::ALL.into_iter().find(|s| s.ascii() == c)
    }

    /// Suffix used in tape relation names.
    pub(crate) fn rel_suffix(self) -> &'static str {
        match self {
            Sym::Zero => "0",
            Sym::One => "1",
            Sym::Blank => "Blank",
            Sym::Sep => "Sep",
            Sym::ZeroBar => "0Bar",
            Sym::OneBar => "1Bar",
        }
    }
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.ascii())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Move {
    L,
    R,
}

/// One transition option: next state, symbol written on the work tape, work
/// head move.
pub type Action = (String, Sym, Move);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ntm {
    pub states: BTreeSet<String>,
    pub initial: String,
    pub accepting: BTreeSet<String>,
    /// (state, input symbol, work symbol) to options. Option indices follow
    /// the set order.
    pub delta: BTreeMap<(String, Sym, Sym), BTreeSet<Action>>,
}

impl Ntm {
    pub fn new(initial: &str) -> Ntm {
        Ntm {
            states: [initial.to_string()].into_iter().collect(),
            initial: initial.to_string(),
            accepting: BTreeSet::new(),
            delta: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, s: &str, a: Sym, b: Sym, t: &str, w: Sym, m: Move) {
        self.states.insert(s.to_string());
        self.states.insert(t.to_string());
        self.delta.entry((s.to_string(), a, b)).or_default().insert((t.to_string(), w, m));
    }

    pub fn accept(&mut self, s: &str) {
        self.states.insert(s.to_string());
        self.accepting.insert(s.to_string());
    }

    pub fn options(&self, s: &str, a: Sym, b: Sym) -> Option<&BTreeSet<Action>> {
        self.delta.get(&(s.to_string(), a, b))
    }

    /// Largest number of options in one cell.
    pub fn bound(&self) -> usize {
        self.delta.values().map(BTreeSet::len).max().unwrap_or(0)
    }

    pub fn is_k_bounded(&self, k: usize) -> bool {
        self.bound() <= k
    }

    pub fn is_deterministic(&self) -> bool {
        self.is_k_bounded(1)
    }

    /// Every option on a barred zero is also an option on a barred one.
    pub fn is_convergent(&self) -> bool {
        self.delta.iter().all(|((s, a, b), opts)| {
            *a != Sym::ZeroBar
                || self.options(s, Sym::OneBar, *b).map(|o| opts.is_subset(o)).unwrap_or(false)
        })
    }

    fn check(&self) -> Result<()> {
        if !self.states.contains(&self.initial) {
            return Err(Error::semantic("initial state is not a state"));
        }
        for s in &self.states {
            if s.is_empty() || !s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(Error::semantic(format!("state name {s:?} is not an identifier")));
            }
        }
        Ok(())
    }
}

/// Merges the barred-zero options into the barred-one cell of a
/// deterministic machine.
pub fn convergent_closure(m: &Ntm) -> Result<Ntm> {
    if !m.is_deterministic() {
        return Err(Error::precondition("convergent closure expects a deterministic machine"));
    }
    let mut out = m.clone();
    for ((s, a, b), opts) in &m.delta {
        if *a == Sym::ZeroBar {
            out.delta.entry((s.clone(), Sym::OneBar, *b)).or_default().extend(opts.iter().cloned());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimResult {
    Accept,
    RejectExhausted,
    Timeout,
}

impl fmt::Display for SimResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SimResult::Accept => "accept",
            SimResult::RejectExhausted => "reject-exhausted",
            SimResult::Timeout => "timeout",
        })
    }
}

/// A configuration at time t: the input head is at cell t.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Config {
    pub state: String,
    pub work: Vec<Sym>,
    pub head: usize,
}

impl Config {
    fn initial(m: &Ntm) -> Config {
        Config { state: m.initial.clone(), work: vec![Sym::Blank], head: 0 }
    }
}

fn input_at(input: &[Sym], t: usize) -> Sym {
    input.get(t).copied().unwrap_or(Sym::Blank)
}

/// Successor configurations, in option order.
pub fn successors(m: &Ntm, input: &[Sym], t: usize, c: &Config) -> Vec<Config> {
    let a = input_at(input, t);
    let b = c.work[c.head];
    let Some(opts) = m.options(&c.state, a, b) else { return Vec::new() };
    opts.iter()
        .map(|(s, w, mv)| {
            let mut n = c.clone();
            n.state = s.clone();
            n.work[n.head] = *w;
            match mv {
                Move::L => n.head = n.head.saturating_sub(1),
                Move::R => {
                    n.head += 1;
                    if n.head == n.work.len() {
                        n.work.push(Sym::Blank);
                    }
                }
            }
            n
        })
        .collect()
}

/// Breadth-first exploration of every choice sequence for at most
/// `step_bound` steps.
pub fn simulate(m: &Ntm, input: &[Sym], step_bound: usize) -> SimResult {
    let mut frontier: VecDeque<Config> = VecDeque::from([Config::initial(m)]);
    for t in 0..=step_bound {
        if frontier.iter().any(|c| m.accepting.contains(&c.state)) {
            return SimResult::Accept;
        }
        if frontier.is_empty() {
            return SimResult::RejectExhausted;
        }
        if t == step_bound {
            break;
        }
        let mut seen = HashSet::new();
        let mut next = VecDeque::new();
        for c in &frontier {
            for n in successors(m, input, t, c) {
                if seen.insert(n.clone()) {
                    next.push_back(n);
                }
            }
        }
        frontier = next;
    }
    SimResult::Timeout
}

/// The configuration at each time along the path that takes option
/// `choice(t)` at step t; stops when the machine halts or after `steps`.
pub fn run_with_choices(m: &Ntm, input: &[Sym], steps: usize, choice: impl Fn(usize) -> usize) -> Vec<Config> {
    let mut path = vec![Config::initial(m)];
    for t in 0..steps {
        let cur = path.last().expect("nonempty");
        let next = successors(m, input, t, cur);
        if next.is_empty() {
            break;
        }
        let i = if next.len() == 1 { 0 } else { choice(t).min(next.len() - 1) };
        path.push(next[i].clone());
    }
    path
}

/// Reads the line-oriented machine format:
///
/// ```text
/// states: s0 acc
/// initial: s0
/// accepting: acc
/// delta: s0 i _ -> acc _ R
/// ```
pub fn parse_machine(text: &str) -> Result<Ntm> {
    let mut states = BTreeSet::new();
    let mut initial = None;
    let mut accepting = BTreeSet::new();
    let mut delta: BTreeMap<(String, Sym, Sym), BTreeSet<Action>> = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('%').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: &str| Error::Syntax { line: n + 1, col: 1, msg: msg.to_string() };
        let (key, rest) = line.split_once(':').ok_or_else(|| err("expected 'key: value'"))?;
        let words: Vec<&str> = rest.split_whitespace().collect();
        match key.trim() {
            "states" => states.extend(words.iter().map(|s| s.to_string())),
            "initial" => {
                if words.len() != 1 {
                    return Err(err("one initial state expected"));
                }
                initial = Some(words[0].to_string());
            }
            "accepting" => accepting.extend(words.iter().map(|s| s.to_string())),
            "delta" => {
                if words.len() != 7 || words[3] != "->" {
                    return Err(err("expected 'delta: s a b -> t w M'"));
                }
                let sym = |w: &str| {
                    let mut cs = w.chars();
                    match (cs.next(), cs.next()) {
                        (Some(c), None) => Sym::from_ascii(c).ok_or_else(|| err("unknown tape symbol")),
                        _ => Err(err("tape symbols are single characters")),
                    }
                };
                let mv = match words[6] {
                    "L" => Move::L,
                    "R" => Move::R,
                    _ => return Err(err("move must be L or R")),
                };
                delta
                    .entry((words[0].to_string(), sym(words[1])?, sym(words[2])?))
                    .or_default()
                    .insert((words[4].to_string(), sym(words[5])?, mv));
            }
            _ => return Err(err("unknown key")),
        }
    }
    let initial = initial.ok_or_else(|| Error::semantic("machine has no initial state"))?;
    states.insert(initial.clone());
    for s in &accepting {
        if !states.contains(s) {
            return Err(Error::semantic(format!("accepting state {s} is not declared")));
        }
    }
    for ((s, _, _), opts) in &delta {
        for t in std::iter::once(s).chain(opts.iter().map(|o| &o.0)) {
            if !states.contains(t) {
                return Err(Error::semantic(format!("state {t} is not declared")));
            }
        }
    }
    let m = Ntm { states, initial, accepting, delta };
    m.check()?;
    Ok(m)
}

impl fmt::Display for Ntm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let states: Vec<&str> = self.states.iter().map(String::as_str).collect();
        let acc: Vec<&str> = self.accepting.iter().map(String::as_str).collect();
        writeln!(f, "states: {}", states.join(" "))?;
        writeln!(f, "initial: {}", self.initial)?;
        writeln!(f, "accepting: {}", acc.join(" "))?;
        for ((s, a, b), opts) in &self.delta {
            for (t, w, m) in opts {
                writeln!(f, "delta: {s} {a} {b} -> {t} {w} {m:?}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::parse_bcq;
    use crate::terms::{parse_database, Schema};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn input(s: &str) -> Vec<Sym> {
        from_ascii(s).unwrap()
    }

    #[test]
    fn closure_merges_barred_cells() {
        let mut m = Ntm::new("s");
        m.add("s", Sym::OneBar, Sym::Blank, "t1", Sym::One, Move::R);
        m.add("s", Sym::ZeroBar, Sym::Blank, "t0", Sym::Zero, Move::R);
        let c = convergent_closure(&m).unwrap();
        assert_eq!(c.options("s", Sym::OneBar, Sym::Blank).unwrap().len(), 2);
        assert_eq!(c.options("s", Sym::ZeroBar, Sym::Blank).unwrap().len(), 1);
        assert!(c.is_convergent() && c.is_k_bounded(2));
        assert!(!m.is_convergent());
        assert!(convergent_closure(&c).is_err());
    }

    #[test]
    fn closure_keeps_equal_cells_and_plain_machines() {
        let mut m = Ntm::new("s");
        m.add("s", Sym::OneBar, Sym::Blank, "t", Sym::One, Move::R);
        m.add("s", Sym::ZeroBar, Sym::Blank, "t", Sym::One, Move::R);
        assert_eq!(convergent_closure(&m).unwrap(), m);
        let mut p = Ntm::new("s");
        p.add("s", Sym::Zero, Sym::Blank, "s", Sym::One, Move::L);
        assert_eq!(convergent_closure(&p).unwrap(), p);
    }

    #[test]
    fn simulate_examples() {
        let mut m = Ntm::new("s");
        m.accept("s");
        assert_eq!(simulate(&m, &input("101"), 10), SimResult::Accept);
        let m = Ntm::new("s");
        assert_eq!(simulate(&m, &input("101"), 10), SimResult::RejectExhausted);
        let mut m = Ntm::new("s");
        for a in Sym::ALL {
            m.add("s", a, Sym::Blank, "s", Sym::Blank, Move::R);
        }
        assert_eq!(simulate(&m, &input("1"), 10), SimResult::Timeout);
    }

    #[test]
    fn bit_machine_runs() {
        let m = crate::lab::fact_bit_machine();
        assert_eq!(simulate(&m, &input("1#1#1#i#0#1#0#11"), 40), SimResult::Accept);
        assert_eq!(simulate(&m, &input("1#1#0##0#1#0#11"), 40), SimResult::RejectExhausted);
        let path = run_with_choices(&m, &input("1#1#1#i#0"), 10, |_| 0);
        assert_eq!(path.last().unwrap().state, "acc");
        assert_eq!(path.len(), 8);
        let path = run_with_choices(&m, &input("1#1#1#i#0"), 10, |_| 1);
        assert_eq!(path.len(), 10);
    }

    #[test]
    fn work_tape_moves() {
        let mut m = Ntm::new("s");
        m.add("s", Sym::One, Sym::Blank, "t", Sym::One, Move::R);
        m.add("t", Sym::Zero, Sym::Blank, "u", Sym::Zero, Move::L);
        m.add("u", Sym::One, Sym::One, "v", Sym::One, Move::L);
        let path = run_with_choices(&m, &input("101"), 5, |_| 0);
        let last = path.last().unwrap();
        assert_eq!(last.state, "v");
        assert_eq!(last.work, vec![Sym::One, Sym::Zero]);
        assert_eq!(last.head, 0);
    }

    #[test]
    fn machine_text_round_trips() {
        let m = crate::lab::fact_bit_machine();
        assert_eq!(parse_machine(&m.to_string()).unwrap(), m);
        assert!(parse_machine("initial: s\ndelta: s 1 _ -> t _ R").is_err());
        assert!(parse_machine("states: s\ninitial: s\ndelta: s 2 _ -> s _ R").is_err());
        assert!(parse_machine("states: s\n").is_err());
    }

    fn random_dtm(r: &mut ChaCha8Rng) -> Ntm {
        let states = ["s0", "s1", "s2"];
        let mut m = Ntm::new("s0");
        m.accept("acc");
        for s in states {
            for a in Sym::ALL {
                for b in [Sym::Blank, Sym::Zero, Sym::One] {
                    if r.gen_bool(0.6) {
                        let t = if r.gen_bool(0.15) { "acc" } else { states[r.gen_range(0..3)] };
                        let w = [Sym::Blank, Sym::Zero, Sym::One][r.gen_range(0..3)];
                        let mv = if r.gen_bool(0.5) { Move::L } else { Move::R };
                        m.add(s, a, b, t, w, mv);
                    }
                }
            }
        }
        m
    }

    /// Each way of reading some barred ones as barred zeros.
    fn weakenings(s: &[Sym]) -> Vec<Vec<Sym>> {
        let ones: Vec<usize> = (0..s.len()).filter(|&i| s[i] == Sym::OneBar).collect();
        (0..1usize << ones.len())
            .map(|mask| {
                let mut w = s.to_vec();
                for (k, &i) in ones.iter().enumerate() {
                    if mask >> k & 1 == 1 {
                        w[i] = Sym::ZeroBar;
                    }
                }
                w
            })
            .collect()
    }

    #[test]
    fn closure_accepts_exactly_the_weakened_inputs() {
        let dsch = Schema::from_pairs([("D0", 1), ("D1", 2)]).unwrap();
        let qsch = Schema::from_pairs([("Q0", 0)]).unwrap();
        let q = parse_bcq("? Q0.").unwrap();
        let dbs = ["D0(a).", "D0(a). D1(a, b).", "D1(a, b). D1(b, a). D0(b).", "D0(a). D0(b). D0(c)."];
        let mut r = ChaCha8Rng::seed_from_u64(7);
        let (mut accepted, mut rejected) = (0, 0);
        for _ in 0..40 {
            let m = random_dtm(&mut r);
            let mc = convergent_closure(&m).unwrap();
            for src in dbs {
                let d = parse_database(src).unwrap();
                let s = encode_input(&d, &q, &dsch, &qsch).unwrap();
                let direct = simulate(&mc, &s, 60) == SimResult::Accept;
                let some = weakenings(&s).iter().any(|w| simulate(&m, w, 60) == SimResult::Accept);
                assert_eq!(direct, some, "{m}\n{}", to_ascii(&s));
                if direct {
                    accepted += 1;
                } else {
                    rejected += 1;
                }
                if simulate(&m, &s, 60) == SimResult::Accept {
                    assert!(direct);
                }
            }
        }
        assert!(accepted > 10 && rejected > 10, "{accepted} {rejected}");
    }
}
