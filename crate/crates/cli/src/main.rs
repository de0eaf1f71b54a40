use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ded_core::chase::{brute_force_entails, certain_answers, chase_until, entails, Bounds, Verdict};
use ded_core::lab::{self, one_line, Report, RuleShape};
use ded_core::machine::{
    compile, convergent_closure, encode_input, from_ascii, gen_sigma_num, gen_sigma_s, gen_sigma_sim, gen_sigma_um,
    parse_machine, simulate, to_ascii, Ntm, SimResult,
};
use ded_core::query::{parse_bcq, parse_query, Bcq};
use ded_core::rules::{parse_rules, serialize_rules, RuleSet};
use ded_core::terms::{active_domain, parse_database, parse_schema, Database, Schema};
use ded_core::Error;

const EX_DATAERR: u8 = 64;
const EX_SEMANTIC: u8 = 65;
const EX_NOINPUT: u8 = 66;

#[derive(Parser)]
#[command(name = "dedchase", version, about = "Disjunctive chase, entailment and machine compilation for DEDs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Trace,
}

#[derive(Args)]
struct ChaseOpts {
    /// Maximum firings along one branch.
    #[arg(long, default_value_t = 2000)]
    depth: usize,
    #[arg(long, default_value_t = 100_000)]
    max_nodes: usize,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

impl ChaseOpts {
    fn bounds(&self) -> Result<Bounds, Fail> {
        if self.depth == 0 {
            return Err(Fail::Semantic("--depth must be at least 1".into()));
        }
        Ok(Bounds {
            max_depth: self.depth,
            max_nodes: self.max_nodes,
            workers: self.workers.max(1),
            trace: self.format == Format::Trace,
            ..Bounds::default()
        })
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Decide whether the database and rules entail a Boolean query.
    Entail {
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        query: PathBuf,
        #[command(flatten)]
        opts: ChaseOpts,
    },
    /// Certain answers of a query with free variables.
    Answers {
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        query: PathBuf,
        #[command(flatten)]
        opts: ChaseOpts,
    },
    /// Run the chase and print its leaves, or the firing trace.
    Chase {
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        opts: ChaseOpts,
    },
    /// Print the machine input string of a database and a Boolean query.
    Encode {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        query: PathBuf,
        /// Database schema, e.g. `D/1,E/1`; defaults to the relations of the data file.
        #[arg(long)]
        schema: Option<String>,
        /// Query schema; defaults to the relations of the query.
        #[arg(long)]
        query_schema: Option<String>,
    },
    /// Run a machine on an input string, or on the encoding of --data and --query.
    Simulate {
        #[arg(long)]
        machine: PathBuf,
        #[arg(long, conflicts_with_all = ["data", "query"])]
        input: Option<String>,
        #[arg(long, requires = "query")]
        data: Option<PathBuf>,
        #[arg(long, requires = "data")]
        query: Option<PathBuf>,
        #[arg(long)]
        schema: Option<String>,
        #[arg(long)]
        query_schema: Option<String>,
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
        #[arg(long)]
        close: bool,
    },
    /// Compile a machine into a rule set over the two schemas.
    Compile {
        #[arg(long)]
        machine: PathBuf,
        #[arg(long)]
        schema: String,
        #[arg(long)]
        query_schema: String,
        /// Apply the convergent closure first (deterministic machines only).
        #[arg(long)]
        close: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a built-in rule set or database.
    Gen {
        #[arg(value_enum)]
        what: GenTarget,
        #[arg(long, default_value = "")]
        schema: String,
        #[arg(long, default_value = "")]
        query_schema: String,
        #[arg(long)]
        machine: Option<PathBuf>,
        #[arg(long)]
        close: bool,
        /// Cycle length for example1-db.
        #[arg(long, default_value_t = 4)]
        k: usize,
    },
    /// Run a randomized checker and print its report.
    Check {
        #[arg(value_enum)]
        what: CheckTarget,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of seeds.
        #[arg(long, default_value_t = 20)]
        budget: usize,
        /// Rules to check instead of randomly generated ones (hom, product).
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        depth: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GenTarget {
    SigmaS,
    SigmaNum,
    SigmaSim,
    SigmaUm,
    Example1,
    Example1Db,
    Prop10,
    Prop10Db,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckTarget {
    Closure,
    Hom,
    Product,
    Oracle,
}

enum Fail {
    Syntax(String),
    Semantic(String),
    Io(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Fail {
        if e.is_syntax() {
            Fail::Syntax(e.to_string())
        } else {
            Fail::Semantic(e.to_string())
        }
    }
}

fn read(path: &Path) -> Result<String, Fail> {
    fs::read_to_string(path).map_err(|e| Fail::Io(format!("{}: {e}", path.display())))
}

fn in_file<T>(path: &Path, r: ded_core::Result<T>) -> Result<T, Fail> {
    r.map_err(|e| match Fail::from(e) {
        Fail::Syntax(m) => Fail::Syntax(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn load_rules(path: &Path) -> Result<RuleSet, Fail> {
    in_file(path, parse_rules(&read(path)?))
}

fn load_data(path: &Path) -> Result<Database, Fail> {
    in_file(path, parse_database(&read(path)?))
}

fn load_bcq(path: &Path) -> Result<Bcq, Fail> {
    in_file(path, parse_bcq(&read(path)?))
}

fn load_machine(path: &Path, close: bool) -> Result<Ntm, Fail> {
    let m = in_file(path, parse_machine(&read(path)?))?;
    Ok(if close { convergent_closure(&m)? } else { m })
}

fn schema_arg(text: &str) -> Result<Schema, Fail> {
    Ok(parse_schema(text)?)
}

fn query_schema_of(q: &Bcq) -> Result<Schema, Fail> {
    let mut s = Schema::new();
    for a in &q.atoms {
        s.add(a.rel.clone(), a.arity())?;
    }
    Ok(s)
}

/// Standard output is assembled first and written only on success.
struct Out {
    text: String,
    code: u8,
}

impl Out {
    fn ok(text: String) -> Out {
        Out { text, code: 0 }
    }
}

fn verdict_line(v: &Verdict) -> String {
    match v {
        Verdict::NotEntailed { witness } => format!("NOT-ENTAILED (witness {})", one_line(witness)),
        other => other.to_string(),
    }
}

fn verdict_code(v: &Verdict) -> u8 {
    match v {
        Verdict::Entailed => 0,
        Verdict::NotEntailed { .. } => 1,
        Verdict::Unknown { .. } => 2,
    }
}

fn encoded(data: &Path, query: &Path, schema: Option<&str>, query_schema: Option<&str>) -> Result<String, Fail> {
    let d = load_data(data)?;
    let q = load_bcq(query)?;
    let dsch = match schema {
        Some(s) => schema_arg(s)?,
        None => d.schema.clone(),
    };
    let qsch = match query_schema {
        Some(s) => schema_arg(s)?,
        None => query_schema_of(&q)?,
    };
    Ok(to_ascii(&encode_input(&d, &q, &dsch, &qsch)?))
}

fn run(cmd: Cmd) -> Result<Out, Fail> {
    match cmd {
        Cmd::Entail { rules, data, query, opts } => {
            let (r, d, q) = (load_rules(&rules)?, load_data(&data)?, load_bcq(&query)?);
            let bounds = opts.bounds()?;
            let mut text = String::new();
            if opts.format == Format::Trace {
                let tree = chase_until(&d, &r, &bounds, std::slice::from_ref(&q), true)?;
                for l in tree.trace_lines() {
                    text.push_str(&l);
                    text.push('\n');
                }
            }
            let v = entails(&d, &r, &q, &bounds)?;
            text.push_str(&verdict_line(&v));
            text.push('\n');
            Ok(Out { text, code: verdict_code(&v) })
        }
        Cmd::Answers { rules, data, query, opts } => {
            let r = load_rules(&rules)?;
            let d = load_data(&data)?;
            let q = in_file(&query, parse_query(&read(&query)?))?;
            let answers = certain_answers(&d, &r, &q, &opts.bounds()?)?;
            let mut text = String::new();
            for (tuple, v) in &answers {
                let t: Vec<String> = tuple.iter().map(|x| x.to_string()).collect();
                text.push_str(&format!("({}) {}\n", t.join(", "), v));
            }
            Ok(Out::ok(text))
        }
        Cmd::Chase { rules, data, opts } => {
            let (r, d) = (load_rules(&rules)?, load_data(&data)?);
            let tree = chase_until(&d, &r, &opts.bounds()?, &[], false)?;
            let mut text = String::new();
            if opts.format == Format::Trace {
                for l in tree.trace_lines() {
                    text.push_str(&l);
                    text.push('\n');
                }
            } else {
                for leaf in tree.leaves() {
                    text.push_str(&format!("% leaf {} {} depth={}\n", leaf.id, leaf.status, leaf.depth));
                    if let Some(inst) = &leaf.instance {
                        text.push_str(&inst.to_string());
                    }
                }
            }
            Ok(Out::ok(text))
        }
        Cmd::Encode { data, query, schema, query_schema } => {
            let s = encoded(&data, &query, schema.as_deref(), query_schema.as_deref())?;
            Ok(Out::ok(format!("{s}\n")))
        }
        Cmd::Simulate { machine, input, data, query, schema, query_schema, steps, close } => {
            let m = load_machine(&machine, close)?;
            let tape = match (input, data, query) {
                (Some(s), _, _) => s,
                (None, Some(d), Some(q)) => encoded(&d, &q, schema.as_deref(), query_schema.as_deref())?,
                _ => return Err(Fail::Semantic("give --input, or --data with --query".into())),
            };
            let tape = from_ascii(&tape)?;
            let res = simulate(&m, &tape, steps);
            let code = match res {
                SimResult::Accept => 0,
                SimResult::RejectExhausted => 1,
                SimResult::Timeout => 2,
            };
            Ok(Out { text: format!("{res}\n"), code })
        }
        Cmd::Compile { machine, schema, query_schema, close, out } => {
            let m = load_machine(&machine, close)?;
            let rs = compile(&m, &schema_arg(&schema)?, &schema_arg(&query_schema)?)?;
            let text = serialize_rules(&rs);
            match out {
                Some(p) => {
                    fs::write(&p, &text).map_err(|e| Fail::Io(format!("{}: {e}", p.display())))?;
                    Ok(Out::ok(String::new()))
                }
                None => Ok(Out::ok(text)),
            }
        }
        Cmd::Gen { what, schema, query_schema, machine, close, k } => {
            let dsch = schema_arg(&schema)?;
            let qsch = schema_arg(&query_schema)?;
            let text = match what {
                GenTarget::SigmaS => serialize_rules(&gen_sigma_s(&dsch)),
                GenTarget::SigmaNum => serialize_rules(&gen_sigma_num(&dsch)),
                GenTarget::SigmaSim => {
                    let path = machine.ok_or_else(|| Fail::Semantic("sigma-sim needs --machine".into()))?;
                    serialize_rules(&gen_sigma_sim(&load_machine(&path, close)?, &dsch, &qsch)?)
                }
                GenTarget::SigmaUm => serialize_rules(&gen_sigma_um(&qsch)),
                GenTarget::Example1 => serialize_rules(&lab::example1_rules()),
                GenTarget::Example1Db => {
                    if k == 0 {
                        return Err(Fail::Semantic("--k must be at least 1".into()));
                    }
                    lab::example1_database(k).to_string()
                }
                GenTarget::Prop10 => serialize_rules(&lab::prop10_rules()),
                GenTarget::Prop10Db => lab::prop10_database().to_string(),
            };
            Ok(Out::ok(text))
        }
        Cmd::Check { what, seed, budget, rules, depth } => {
            let given = rules.as_deref().map(load_rules).transpose()?;
            let report = check(what, seed, budget, given, depth)?;
            let code = if report.is_clean() { 0 } else { 1 };
            Ok(Out { text: report.to_string(), code })
        }
    }
}

fn check(what: CheckTarget, seed: u64, budget: usize, given: Option<RuleSet>, depth: usize) -> Result<Report, Fail> {
    let mut report = Report::default();
    for s in seed..seed + budget as u64 {
        match what {
            CheckTarget::Closure => {
                report.extend(lab::check_ocqa_closure(&lab::example1_sample(s)?, 1000, s));
                report.extend(lab::check_ocqa_closure(&lab::prop10_sample(s)?, 1000, s));
            }
            CheckTarget::Hom => {
                let r = match &given {
                    Some(r) => r.clone(),
                    None => lab::random_rules(&mut lab::rng(s), RuleShape::Dtgd, 3),
                };
                report.extend(lab::check_hom_preservation(&r, 1, s)?);
            }
            CheckTarget::Product => {
                let r = match &given {
                    Some(r) => r.clone(),
                    None => lab::random_rules(&mut lab::rng(s), RuleShape::Ed, 3),
                };
                report.extend(lab::check_product_preservation(&r, 1, s)?);
            }
            CheckTarget::Oracle => report.extend(oracle_sample(s, depth)?),
        }
    }
    Ok(report)
}

/// One random full rule set, database and query; the chase verdict must not
/// contradict exhaustive search.
fn oracle_sample(seed: u64, depth: usize) -> Result<Report, Fail> {
    let mut r = lab::rng(seed);
    let rules = lab::random_rules(&mut r, RuleShape::Full, 3);
    let d = lab::random_database(&mut r, &rules.schema, 3, 5);
    let q = lab::random_bcq(&mut r, &rules.schema, &active_domain(&d), 2);
    let v = entails(&d, &rules, &q, &Bounds::depth(depth))?;
    let truth = brute_force_entails(&d, &rules, &q)?;
    let pass = !(v.is_entailed() && !truth || v.is_not_entailed() && truth);
    let mut report = Report::default();
    let line = ded_core::lab::ReportLine {
        pass,
        check: "oracle".into(),
        seed,
        witness: format!("{} on {} with {q}: chase {v}, search {truth}", rules.to_string().trim().replace('\n', " "), one_line(&d)),
    };
    report.lines.push(line);
    Ok(report)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(EX_DATAERR);
        }
    };
    match run(cli.cmd) {
        Ok(out) => {
            print!("{}", out.text);
            ExitCode::from(out.code)
        }
        Err(Fail::Syntax(m)) => {
            eprintln!("dedchase: {m}");
            ExitCode::from(EX_DATAERR)
        }
        Err(Fail::Semantic(m)) => {
            eprintln!("dedchase: {m}");
            ExitCode::from(EX_SEMANTIC)
        }
        Err(Fail::Io(m)) => {
            eprintln!("dedchase: {m}");
            ExitCode::from(EX_NOINPUT)
        }
    }
}
