//! Command-line frontend: simulate programs, run the decision procedures
//! and compile counter automata, modulo expressions and reductions.
//!
//! Exit codes: 0 negative instance (empty, consistent, history
//! independent) or success, 1 witness found, 2 unknown, 3 error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use dynrel::counter::parse_ca;
use dynrel::dsl::{format_diagnostics, parse_program, parse_sequence, print_program, print_sequence, print_state};
use dynrel::dynprog::{bfs_nonempty, DynamicProgram, FragmentProfile, Modification};
use dynrel::emptiness::{
    emptiness_consistent_fo11, emptiness_consistent_prop_aux1, emptiness_consistent_prop_in1, emptiness_prop11, Report,
    UnknownReason, Verdict, Witness,
};
use dynrel::hi::{
    check_consistency_bounded, check_consistency_exact_prop11, check_hi, check_hi_prop_aux1, fuzz, ConsistencyWitness,
    Evidence, ExactConsistency, FuzzBudget, FuzzMode, FuzzWitness, HiBudget, HiReport, HiVerdict, HiViolation,
};
use dynrel::modulo::{compile_modexpr, parse_modexpr_file};
use dynrel::transforms::{
    compile_2ca_consistent_fo12, compile_2ca_fo10, compile_2ca_prop12, compile_2ca_prop20, consistency_to_emptiness_fo,
    consistency_to_emptiness_qf, emptiness_to_consistency,
};
use dynrel::wsts::CoverBudget;

const NEGATIVE: u8 = 0;
const WITNESS: u8 = 1;
const UNKNOWN: u8 = 2;
const ERROR: u8 = 3;

#[derive(Parser)]
#[command(name = "dynrel", version, about = "Dynamic relational programs: simulation, decision procedures and compilers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Applies a modification sequence and prints the final state.
    Run {
        program: PathBuf,
        sequence: PathBuf,
        /// Domain size for sequence files without a `domain` header.
        #[arg(long)]
        domain: Option<usize>,
    },
    /// Decides emptiness, consistency or history independence.
    Check {
        problem: Problem,
        program: PathBuf,
        #[command(flatten)]
        opts: CheckOpts,
    },
    /// Compiles a counter automaton, a modulo expression or a reduction.
    Compile {
        kind: CompileKind,
        input: PathBuf,
        /// Output file; the program goes to standard output otherwise.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Problem {
    Emptiness,
    Consistency,
    Hi,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum)]
enum Method {
    Auto,
    Tmca,
    Nfa,
    UnaryInput,
    UnaryAux,
    Bounded,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CompileKind {
    #[value(name = "2ca-fo10")]
    Fo10,
    #[value(name = "2ca-prop12")]
    Prop12,
    #[value(name = "2ca-prop20")]
    Prop20,
    #[value(name = "2ca-cons-fo12")]
    ConsFo12,
    Modexpr,
    ReduceE2c,
    ReduceC2eFo,
    ReduceC2eQf,
}

#[derive(Args)]
struct CheckOpts {
    /// Promise that the program is consistent; enables the procedures
    /// that are only sound under that promise.
    #[arg(long)]
    assume_consistent: bool,
    #[arg(long, value_enum, default_value_t = Method::Auto)]
    method: Method,
    /// Largest domain of bounded searches (default 4). For the history
    /// independence sweep it caps the swept domain (default 64).
    #[arg(long, env = "DYNREL_MAX_DOMAIN")]
    max_domain: Option<usize>,
    /// Longest sequence of bounded searches.
    #[arg(long, env = "DYNREL_MAX_LEN", default_value_t = 6)]
    max_len: usize,
    /// Basis cap of the coverability check, and the state or database
    /// budget of the other procedures.
    #[arg(long, env = "DYNREL_BUDGET", default_value_t = 100_000)]
    budget: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Path prefix of witness files (default: the program path without
    /// its extension, plus `.witness`).
    #[arg(long)]
    witness: Option<PathBuf>,
}

impl CheckOpts {
    fn domain(&self) -> usize {
        self.max_domain.unwrap_or(4)
    }
}

/// Key-value lines in the state dump dialect.
#[derive(Default)]
struct RunReport {
    lines: Vec<String>,
}

impl RunReport {
    fn push(&mut self, key: &str, value: impl std::fmt::Display) {
        self.lines.push(format!("{key}: {value}"));
    }

    fn extend(&mut self, rendered: &str) {
        self.lines.extend(rendered.lines().map(str::to_string));
    }

    fn input(&mut self, path: &Path, text: &str) {
        self.push("input", format!("{} sha256:{:x}", path.display(), Sha256::digest(text.as_bytes())));
    }

    fn render(&self) -> String {
        self.lines.iter().map(|l| format!("{l}\n")).collect()
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_program(path: &Path, report: &mut RunReport) -> Result<DynamicProgram> {
    let text = read(path)?;
    report.input(path, &text);
    let (p, warnings) = parse_program(&text).map_err(|d| anyhow!("{}: {}", path.display(), format_diagnostics(&d)))?;
    for w in warnings {
        report.push("warning", w);
    }
    Ok(p)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let mut report = RunReport::default();
    let code = match run(cli.command, &mut report) {
        Ok(code) => code,
        Err(e) => {
            report.push("error", format!("{e:#}"));
            ERROR
        }
    };
    report.push("exit-code", code);
    report.push("wall-time-ms", start.elapsed().as_millis());
    if code == ERROR || !report.lines.iter().any(|l| l.starts_with("verdict:")) {
        eprint!("{}", report.render());
    } else {
        print!("{}", report.render());
    }
    ExitCode::from(code)
}

fn run(command: Command, report: &mut RunReport) -> Result<u8> {
    match command {
        Command::Run { program, sequence, domain } => {
            report.push("command", "run");
            let p = load_program(&program, report)?;
            let mut text = read(&sequence)?;
            report.input(&sequence, &text);
            if let Some(n) = domain {
                if !text.trim_start().starts_with("domain") {
                    text = format!("domain {n}\n{text}");
                }
            }
            let (n, seq) = parse_sequence(p.schema(), &text).map_err(|d| anyhow!("{}: {}", sequence.display(), format_diagnostics(&d)))?;
            let state = p.run(n, &seq);
            print!("{}", print_state(p.schema(), &state));
            report.push("modifications", seq.len());
            Ok(NEGATIVE)
        }
        Command::Check { problem, program, opts } => {
            report.push("command", match problem {
                Problem::Emptiness => "check emptiness",
                Problem::Consistency => "check consistency",
                Problem::Hi => "check hi",
            });
            let p = load_program(&program, report)?;
            let prefix = opts.witness.clone().unwrap_or_else(|| program.with_extension("witness"));
            report.push("fragment", p.classify());
            let max_domain = match problem {
                Problem::Hi => opts.max_domain.unwrap_or(HiBudget::default().max_domain),
                _ => opts.domain(),
            };
            report.push("max-domain", max_domain);
            report.push("max-len", opts.max_len);
            report.push("budget", opts.budget);
            report.push("seed", opts.seed);
            match problem {
                Problem::Emptiness => check_emptiness(&p, &opts, &prefix, report),
                Problem::Consistency => check_consistency(&p, &opts, &prefix, report),
                Problem::Hi => check_history_independence(&p, &opts, &prefix, report),
            }
        }
        Command::Compile { kind, input, output } => {
            report.push("command", "compile");
            let text = read(&input)?;
            report.input(&input, &text);
            let out = compile(kind, &input, &text, report)?;
            let printed = print_program(&out);
            if !report.lines.iter().any(|l| l.starts_with("output-fragment:")) {
                report.push("output-fragment", out.classify());
            }
            match output {
                Some(path) => {
                    write(&path, &printed)?;
                    report.push("output", path.display());
                }
                None => print!("{printed}"),
            }
            Ok(NEGATIVE)
        }
    }
}

fn compile(kind: CompileKind, input: &Path, text: &str, report: &mut RunReport) -> Result<DynamicProgram> {
    let diag = |d: Vec<dynrel::dsl::Diagnostic>| anyhow!("{}: {}", input.display(), format_diagnostics(&d));
    let machine = || parse_ca(text).map_err(diag);
    let program = || parse_program(text).map(|r| r.0).map_err(diag);
    Ok(match kind {
        CompileKind::Fo10 => compile_2ca_fo10(&machine()?)?,
        CompileKind::Prop12 => compile_2ca_prop12(&machine()?)?,
        CompileKind::Prop20 => compile_2ca_prop20(&machine()?)?,
        CompileKind::ConsFo12 => compile_2ca_consistent_fo12(&machine()?)?,
        CompileKind::Modexpr => {
            let (schema, e) = parse_modexpr_file(text).map_err(|e| anyhow!("{}: {e}", input.display()))?;
            compile_modexpr(&schema, &e)?
        }
        CompileKind::ReduceE2c => {
            let (q, r) = emptiness_to_consistency(&program()?);
            report.extend(&r.render());
            q
        }
        CompileKind::ReduceC2eFo => {
            let (q, r) = consistency_to_emptiness_fo(&program()?);
            report.extend(&r.render());
            q
        }
        CompileKind::ReduceC2eQf => {
            let (q, r) = consistency_to_emptiness_qf(&program()?)?;
            report.extend(&r.render());
            q
        }
    })
}

fn witness_file(prefix: &Path, tag: &str, p: &DynamicProgram, n: usize, seq: &[Modification], report: &mut RunReport) -> Result<()> {
    let mut name = prefix.as_os_str().to_owned();
    name.push(format!("{tag}.seq"));
    let path = PathBuf::from(name);
    write(&path, &print_sequence(p.schema(), n, seq))?;
    report.push("witness-file", path.display());
    Ok(())
}

fn unary(prof: &FragmentProfile) -> bool {
    prof.max_input_arity <= 1 && prof.max_aux_arity <= 1
}

fn bounded_emptiness(p: &DynamicProgram, opts: &CheckOpts) -> Report {
    let (n, len) = (opts.domain(), opts.max_len);
    let verdict = match bfs_nonempty(p, n, len) {
        Some((domain, sequence)) => Verdict::NonEmpty(Some(Witness { domain, sequence })),
        None => Verdict::Unknown(UnknownReason::Budget(format!(
            "fragment undecidable; bounded search exhausted (domain <= {n}, length <= {len})"
        ))),
    };
    Report { verdict, method: "bounded", assumes_consistency: false, notes: Vec::new() }
}

fn check_emptiness(p: &DynamicProgram, opts: &CheckOpts, prefix: &Path, report: &mut RunReport) -> Result<u8> {
    let prof = p.classify();
    let budget = opts.budget;
    let promise = opts.assume_consistent;
    let method = match opts.method {
        Method::Auto if prof.quantifier_free && unary(&prof) && prof.query_arity <= 1 => Method::Tmca,
        Method::Auto if promise && unary(&prof) => Method::Nfa,
        Method::Auto if promise && prof.quantifier_free && prof.max_input_arity <= 1 => Method::UnaryInput,
        Method::Auto if promise && prof.quantifier_free && prof.max_aux_arity <= 1 => Method::UnaryAux,
        Method::Auto => Method::Bounded,
        m => m,
    };
    let mut r = match method {
        Method::Tmca => emptiness_prop11(p, CoverBudget { max_basis: budget as usize, ..CoverBudget::default() }),
        Method::Nfa => emptiness_consistent_fo11(p, promise, budget as usize),
        Method::UnaryInput => emptiness_consistent_prop_in1(p, promise, budget as u128),
        Method::UnaryAux => emptiness_consistent_prop_aux1(p, promise, budget as u128),
        Method::Bounded | Method::Auto => bounded_emptiness(p, opts),
    };
    if opts.method == Method::Auto && method != Method::Bounded && r.verdict.is_unknown() {
        let b = bounded_emptiness(p, opts);
        if b.verdict.is_nonempty() {
            r.notes.push(format!("{} was inconclusive; the bounded search found a witness", r.method));
            r.verdict = b.verdict;
        } else {
            r.notes.push(format!("bounded search exhausted (domain <= {}, length <= {})", opts.domain(), opts.max_len));
        }
    }
    report.extend(&r.render(p.schema()));
    if let Some(w) = r.verdict.witness() {
        witness_file(prefix, "", p, w.domain, &w.sequence, report)?;
    }
    Ok(match r.verdict {
        Verdict::Empty => NEGATIVE,
        Verdict::NonEmpty(_) => WITNESS,
        Verdict::Unknown(_) => UNKNOWN,
    })
}

fn consistency_witness(p: &DynamicProgram, w: &ConsistencyWitness, prefix: &Path, report: &mut RunReport) -> Result<()> {
    report.extend(&w.render(p.schema()));
    witness_file(prefix, ".alpha", p, w.domain, &w.alpha, report)?;
    witness_file(prefix, ".beta", p, w.domain, &w.beta, report)
}

fn check_consistency(p: &DynamicProgram, opts: &CheckOpts, prefix: &Path, report: &mut RunReport) -> Result<u8> {
    let prof = p.classify();
    let (n, len) = (opts.domain(), opts.max_len);
    let exact = match opts.method {
        Method::Auto => prof.quantifier_free && unary(&prof),
        Method::Tmca => true,
        Method::Bounded => false,
        m => bail!("method {m:?} does not apply to consistency"),
    };
    let mut unknown_reason = format!("bounded search exhausted (domain <= {n}, length <= {len})");
    if exact {
        let r = check_consistency_exact_prop11(p, CoverBudget { max_basis: opts.budget as usize, ..CoverBudget::default() });
        for note in &r.notes {
            report.push("note", note);
        }
        match r.verdict {
            ExactConsistency::Consistent => {
                report.push("verdict", "consistent");
                report.push("method", "tmca");
                return Ok(NEGATIVE);
            }
            ExactConsistency::Inconsistent(w) => {
                report.push("verdict", "inconsistent");
                report.push("method", "tmca");
                if let Some(w) = check_consistency_bounded(p, n, len).witness() {
                    consistency_witness(p, w, prefix, report)?;
                } else if let (Some(w), Some(q)) = (w, r.reduced) {
                    report.push("note", "the witness replays on the reduced program (compile reduce-c2e-qf)");
                    witness_file(prefix, ".reduced", &q, w.domain, &w.sequence, report)?;
                }
                return Ok(WITNESS);
            }
            ExactConsistency::Unknown(reason) => {
                report.push("note", format!("tmca: {reason}"));
                if opts.method == Method::Tmca {
                    report.push("verdict", "unknown");
                    report.push("method", "tmca");
                    report.push("reason", reason);
                    return Ok(UNKNOWN);
                }
                unknown_reason = format!("{reason}; {unknown_reason}");
            }
        }
    }
    report.push("method", "bounded");
    match check_consistency_bounded(p, n, len).witness() {
        Some(w) => {
            report.push("verdict", "inconsistent");
            consistency_witness(p, w, prefix, report)?;
            Ok(WITNESS)
        }
        None => {
            report.push("verdict", "unknown");
            report.push("reason", unknown_reason);
            Ok(UNKNOWN)
        }
    }
}

fn hi_witness(p: &DynamicProgram, v: &HiViolation, prefix: &Path, report: &mut RunReport) -> Result<()> {
    match &v.evidence {
        Evidence::Orders { left, right, .. } => {
            let l: Vec<Modification> = v.prefix.iter().chain(left).cloned().collect();
            let r: Vec<Modification> = v.prefix.iter().chain(right).cloned().collect();
            witness_file(prefix, ".left", p, v.domain, &l, report)?;
            witness_file(prefix, ".right", p, v.domain, &r, report)
        }
        Evidence::Types { .. } => witness_file(prefix, "", p, v.domain, &v.prefix, report),
    }
}

fn check_history_independence(p: &DynamicProgram, opts: &CheckOpts, prefix: &Path, report: &mut RunReport) -> Result<u8> {
    let prof = p.classify();
    let budget = HiBudget { max_domain: opts.max_domain.unwrap_or(HiBudget::default().max_domain), max_states: opts.budget };
    let mut r: Option<HiReport> = match opts.method {
        Method::Auto if prof.max_input_arity <= 1 => Some(check_hi(p, budget)),
        Method::Auto if prof.quantifier_free && prof.max_aux_arity <= 1 => Some(check_hi_prop_aux1(p, budget, opts.max_len)),
        Method::UnaryInput => Some(check_hi(p, budget)),
        Method::UnaryAux => Some(check_hi_prop_aux1(p, budget, opts.max_len)),
        Method::Auto | Method::Bounded => None,
        m => bail!("method {m:?} does not apply to history independence"),
    };
    if opts.method == Method::Auto {
        if let Some(rep) = &r {
            if let HiVerdict::Unknown(reason) = &rep.verdict {
                if reason.starts_with("fragment") && prof.quantifier_free && prof.max_aux_arity <= 1 && rep.method != "prop-aux1" {
                    r = Some(check_hi_prop_aux1(p, budget, opts.max_len));
                }
            }
        }
    }
    if let Some(rep) = &r {
        if !matches!(rep.verdict, HiVerdict::Unknown(_)) || opts.method != Method::Auto {
            report.extend(&rep.render(p.schema()));
            return finish_hi(p, rep, prefix, report);
        }
    }
    let fb = FuzzBudget { max_domain: opts.domain(), bfs_depth: 3, random_runs: 1_000, max_len: opts.max_len };
    let out = fuzz(p, FuzzMode::LocalHi, opts.seed, fb);
    if let Some(rep) = &r {
        if let HiVerdict::Unknown(reason) = &rep.verdict {
            report.push("note", format!("{}: {reason}", rep.method));
        }
    }
    report.push("note", format!("fuzz checked {} states", out.checked));
    match out.witness {
        Some(FuzzWitness::Hi(v)) => {
            report.push("verdict", "not-hi");
            report.push("method", "fuzz");
            report.extend(&v.render(p.schema()));
            hi_witness(p, &v, prefix, report)?;
            Ok(WITNESS)
        }
        _ => {
            report.push("verdict", "unknown");
            report.push("method", "fuzz");
            report.push("reason", "fragment undecidable; bounded search exhausted");
            Ok(UNKNOWN)
        }
    }
}

fn finish_hi(p: &DynamicProgram, rep: &HiReport, prefix: &Path, report: &mut RunReport) -> Result<u8> {
    Ok(match &rep.verdict {
        HiVerdict::Hi => NEGATIVE,
        HiVerdict::NotHi(v) => {
            hi_witness(p, v, prefix, report)?;
            WITNESS
        }
        HiVerdict::Unknown(_) => UNKNOWN,
    })
}
