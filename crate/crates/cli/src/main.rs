//! `potinf`: evaluate formulas in stage systems, compute horizons, build and
//! check finite restrictions, and compare staged with classical truth.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use potinf_core::adequacy::{check_adequate, grid_probes, horizon, ll_t};
use potinf_core::corpus::{corpus, CorpusLimits};
use potinf_core::declarations::{derive, find_declaration, trace, DeriveConfig, DeriveError, Strategy};
use potinf_core::demos::{zfc_axioms, zfc_chain, Demo};
use potinf_core::filters::{is_ll_context, ll_holds, AllRelation, LlRelation, Pointwise, TruthOr};
use potinf_core::semantics::{eval_ll, eval_ll_audit, eval_m, eval_tarskian, AuditConfig};
use potinf_core::structure_file::{export_structure, ll_rows, load_structure, split_list};
use potinf_core::submodel::{restrict, restrict_ll, seeded_restriction, verify_t_submodel};
use potinf_core::syntax::{parse_formula, parse_formula_at, ClosureMode, Formula, FormulaSet};
use potinf_core::system::{Context, Elem, Index, StageSystem};
use potinf_core::truth::TruthValue;

const EXIT_UNKNOWN: u8 = 3;
const EXIT_CHECK_FAILED: u8 = 4;

#[derive(Debug, Error)]
enum Failure {
    /// Unreadable input: formulas, structure files, names.
    #[error("{0}")]
    Input(String),
    /// Well-formed input the requested operation cannot use.
    #[error("{0}")]
    Precondition(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Precondition(_) => 2,
        }
    }
}

fn input(e: impl ToString) -> Failure {
    Failure::Input(e.to_string())
}

fn precondition(e: impl ToString) -> Failure {
    Failure::Precondition(e.to_string())
}

#[derive(Parser)]
#[command(name = "potinf", version, about = "Staged evaluation of first-order formulas")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a formula at a context and assignment.
    Eval(EvalArgs),
    /// Print the least successor of a context.
    Horizon(HorizonArgs),
    /// Build a finite restriction that keeps the theory's declarations.
    Submodel(SubmodelArgs),
    /// Compare staged truth with classical truth on the union.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SystemArgs {
    /// Built-in system.
    #[arg(long, value_enum, conflicts_with = "structure")]
    demo: Option<DemoName>,
    /// Structure file.
    #[arg(long)]
    structure: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DemoName {
    Nat,
    Perfect,
    Zfc,
}

#[derive(Clone, Copy, ValueEnum)]
enum LlKind {
    All,
    Pointwise,
    Adequate,
    Table,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Full,
    NegativeOnly,
}

#[derive(Args)]
struct RelationArgs {
    /// Theory formulas, `;`-separated; `axioms5` names the built-in set axioms.
    #[arg(short = 'T', long = "theory")]
    theory: Vec<String>,
    /// Which `<<` relation to use; defaults to the file's table, else `adequate`.
    #[arg(long, value_enum)]
    ll: Option<LlKind>,
    #[arg(long, value_enum, default_value = "full")]
    mode: Mode,
    /// Largest index searched on infinite index sets.
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u64).range(1..))]
    budget: u64,
    /// `minimal` or `given:<i0,i1,...>`.
    #[arg(long, default_value = "minimal")]
    strategy: String,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[command(flatten)]
    rel: RelationArgs,
    #[arg(long)]
    formula: String,
    /// Comma-separated indices; omit or pass "" for a sentence.
    #[arg(long)]
    context: Option<String>,
    /// Comma-separated elements.
    #[arg(long)]
    assign: Option<String>,
    /// Print the derivation.
    #[arg(long)]
    explain: bool,
    /// Re-evaluate each quantifier at up to N other successors.
    #[arg(long, value_name = "N")]
    audit: Option<usize>,
}

#[derive(Args)]
struct HorizonArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[command(flatten)]
    rel: RelationArgs,
    #[arg(long, default_value = "")]
    context: String,
}

#[derive(Args)]
struct SubmodelArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[command(flatten)]
    rel: RelationArgs,
    /// Indices to keep, with every formula declared at contexts built from them.
    #[arg(long, default_value = "")]
    seed: String,
    /// Longest context in the exported `<<` table and the adequacy check.
    #[arg(long, default_value_t = 2)]
    probe_len: usize,
    /// Write the restriction as a structure file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[command(flatten)]
    rel: RelationArgs,
    /// Check this many seeded random systems instead of one system.
    #[arg(long, value_name = "N")]
    random_systems: Option<usize>,
    #[arg(long, default_value_t = 4)]
    max_stages: usize,
    #[arg(long, default_value_t = 5)]
    max_elements: usize,
    #[arg(long, default_value_t = 3)]
    max_depth: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

struct Loaded {
    sys: Arc<StageSystem>,
    table: Option<Arc<dyn LlRelation>>,
    demo: Option<DemoName>,
}

impl Loaded {
    fn index(&self, s: &str) -> Result<Index, Failure> {
        if matches!(self.demo, Some(DemoName::Zfc)) {
            let chain = zfc_chain();
            if let Some(k) = s.strip_prefix('i').and_then(|k| k.parse::<usize>().ok()) {
                if k < chain.len() {
                    return Ok(chain[k]);
                }
            }
            if s == "j" {
                return Ok(chain.iter().fold(0, |m, i| m | i));
            }
        }
        self.sys.parse_index(s).map_err(input)
    }

    fn context(&self, s: &str) -> Result<Context, Failure> {
        let s = s.trim();
        let inner = s.strip_prefix('(').and_then(|r| r.strip_suffix(')')).unwrap_or(s);
        split_list(inner).iter().map(|p| self.index(p)).collect()
    }

    fn labelled_theory(&self, entries: &[String]) -> Result<Vec<(String, Formula)>, Failure> {
        let sig = self.sys.signature();
        let mut out = Vec::new();
        for part in entries.iter().flat_map(|e| e.split(';')).map(str::trim) {
            if part.is_empty() {
                continue;
            }
            if part == "axioms5" {
                if sig.arity("in") != Some(2) || sig.arity("=") != Some(2) {
                    return Err(input("axioms5 needs binary `in` and `=`"));
                }
                out.extend(zfc_axioms().into_iter().map(|(n, f)| (n.to_string(), f)));
            } else {
                let phi = parse_formula(part, &sig).map_err(|e| input(format!("`{part}`: {e}")))?;
                out.push((phi.to_string(), phi));
            }
        }
        Ok(out)
    }

    fn theory(&self, entries: &[String]) -> Result<FormulaSet, Failure> {
        Ok(self.labelled_theory(entries)?.into_iter().map(|(_, f)| f).collect())
    }

    fn kind(&self, rel: &RelationArgs) -> LlKind {
        rel.ll.unwrap_or(if self.table.is_some() { LlKind::Table } else { LlKind::Adequate })
    }

    fn ll(&self, rel: &RelationArgs, t: &FormulaSet) -> Result<Arc<dyn LlRelation>, Failure> {
        Ok(match self.kind(rel) {
            LlKind::All => Arc::new(AllRelation),
            LlKind::Pointwise => Arc::new(Pointwise),
            LlKind::Adequate => Arc::new(ll_t(t, closure_mode(rel.mode), rel.budget)),
            LlKind::Table => self
                .table
                .clone()
                .ok_or_else(|| precondition("the system has no [ll] table"))?,
        })
    }

    fn derive_config(&self, rel: &RelationArgs) -> Result<DeriveConfig, Failure> {
        let strategy = match rel.strategy.as_str() {
            "minimal" => Strategy::Minimal,
            s => match s.strip_prefix("given:") {
                Some(chain) => Strategy::Given(self.context(chain)?),
                None => return Err(input(format!("unknown strategy `{s}`"))),
            },
        };
        Ok(DeriveConfig {
            strategy,
            budget: rel.budget,
        })
    }
}

fn closure_mode(m: Mode) -> ClosureMode {
    match m {
        Mode::Full => ClosureMode::Full,
        Mode::NegativeOnly => ClosureMode::NegativeOnly,
    }
}

fn load(args: &SystemArgs) -> Result<Loaded, Failure> {
    if let Some(path) = &args.structure {
        let file = load_structure(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
        return Ok(Loaded {
            sys: Arc::new(file.system),
            table: file.ll.map(|t| Arc::new(t) as Arc<dyn LlRelation>),
            demo: None,
        });
    }
    let demo = args
        .demo
        .ok_or_else(|| input("give --demo or --structure"))?;
    let which = match demo {
        DemoName::Nat => Demo::Nat,
        DemoName::Perfect => Demo::Perfect,
        DemoName::Zfc => Demo::Zfc,
    };
    Ok(Loaded {
        sys: Arc::new(which.system()),
        table: None,
        demo: Some(demo),
    })
}

fn show(v: TruthValue) -> String {
    match v {
        TruthValue::True => "True".into(),
        TruthValue::False => "False".into(),
        TruthValue::Unknown { budget } => format!("Unknown (budget {budget})"),
    }
}

/// Maps a search failure to an exit: running out of budget is an answer.
fn derive_failure(e: DeriveError) -> Result<u8, Failure> {
    match e {
        DeriveError::Unknown { budget } => {
            println!("Unknown (budget {budget})");
            Ok(EXIT_UNKNOWN)
        }
        other => Err(precondition(other)),
    }
}

fn run_eval(args: &EvalArgs) -> Result<u8, Failure> {
    let env = load(&args.system)?;
    let sys = env.sys.as_ref();
    let sig = sys.signature();
    let context = env.context(args.context.as_deref().unwrap_or(""))?;
    let phi = parse_formula_at(&args.formula, &sig, context.len()).map_err(input)?;
    let assignment: Vec<Elem> = split_list(args.assign.as_deref().unwrap_or(""))
        .iter()
        .map(|s| sys.parse_element(s))
        .collect::<Result<_, _>>()
        .map_err(input)?;
    if assignment.len() != phi.arity {
        return Err(precondition(format!(
            "formula has arity {}, assignment has {} elements",
            phi.arity,
            assignment.len()
        )));
    }
    let mut t = env.theory(&args.rel.theory)?;
    if t.is_empty() {
        t.insert(phi.clone());
    }
    let ll = env.ll(&args.rel, &t)?;
    let cfg = env.derive_config(&args.rel)?;
    let d = match derive(sys, ll.as_ref(), &context, &phi, &cfg) {
        Ok(d) => d,
        Err(e) => return derive_failure(e),
    };
    let value = eval_ll(sys, &d, &assignment).map_err(precondition)?;
    println!("{}", show(value));
    if args.explain {
        for line in trace(sys, &phi, &d) {
            println!("  {line}");
        }
    }
    if let Some(n) = args.audit {
        let audit_cfg = AuditConfig {
            alternatives: n,
            explicit: None,
            derive: cfg.clone(),
        };
        let report = eval_ll_audit(sys, ll.as_ref(), &phi, &d, &assignment, &audit_cfg).map_err(precondition)?;
        println!("audit: {} divergences", report.divergences.len());
        for dv in &report.divergences {
            println!(
                "  node {} at {} {}: {} gives {}, {} gives {}",
                dv.node,
                sys.format_context(&dv.context),
                sys.format_tuple(&dv.assignment),
                sys.index_name(dv.recorded),
                dv.recorded_value,
                sys.index_name(dv.alternative),
                dv.alternative_value
            );
        }
    }
    Ok(if value.is_unknown() { EXIT_UNKNOWN } else { 0 })
}

fn run_horizon(args: &HorizonArgs) -> Result<u8, Failure> {
    let env = load(&args.system)?;
    let sys = env.sys.as_ref();
    let t = env.theory(&args.rel.theory)?;
    let ll = env.ll(&args.rel, &t)?;
    let c = env.context(&args.context)?;
    let shown = sys.format_context(&c);
    let mut code = 0;
    match horizon(ll.as_ref(), sys, &c) {
        TruthOr::Known(Some(i)) => println!("{shown} << {}", sys.index_name(i)),
        TruthOr::Known(None) => println!("{shown} has no successor"),
        TruthOr::Unknown(budget) => {
            println!("{shown} << unknown (budget {budget})");
            code = EXIT_UNKNOWN;
        }
    }
    if matches!(env.demo, Some(DemoName::Zfc)) {
        let chain = zfc_chain();
        if c.len() < chain.len() && c[..] == chain[..c.len()] {
            let k = c.len();
            let v = ll_holds(ll.as_ref(), sys, &c, chain[k]);
            println!("chain link {shown} << i{k}: {}", show(v));
        }
    }
    Ok(code)
}

fn run_submodel(args: &SubmodelArgs) -> Result<u8, Failure> {
    let env = load(&args.system)?;
    let sys = &env.sys;
    let t = env.theory(&args.rel.theory)?;
    let ll = env.ll(&args.rel, &t)?;
    let cfg = env.derive_config(&args.rel)?;
    let seed = env.context(&args.seed)?;
    let r = seeded_restriction(sys, ll.as_ref(), &t, &seed, &cfg).map_err(precondition)?;
    let names: Vec<String> = r.members.iter().map(|&i| sys.index_name(i)).collect();
    println!("restriction: {}", names.join(", "));
    println!("upper bound: {}", sys.index_name(r.upper_bound));
    let report = verify_t_submodel(sys, &ll, &r, &t, &cfg).map_err(precondition)?;
    println!("compared: {}", report.compared);
    println!("{} disagreements", report.disagreements.len());
    for d in &report.disagreements {
        println!(
            "  `{}` at {} {}: restriction {}, full {}",
            d.formula,
            sys.format_context(&d.context),
            sys.format_tuple(&d.assignment),
            d.sub_value,
            d.full_value
        );
    }
    println!("replay failures: {}", report.replay_failures.len());
    for (f, e) in &report.replay_failures {
        println!("  `{f}`: {e}");
    }
    println!("unapproximable: {}", report.unapproximable.len());
    for f in &report.unapproximable {
        println!("  `{f}`");
    }
    let sub = restrict(sys, &r.members).map_err(precondition)?;
    let ll_sub = restrict_ll(sys, &ll, &r.members);
    let mut adequate = true;
    if matches!(env.kind(&args.rel), LlKind::Adequate) {
        let fresh = ll_t(&t, closure_mode(args.rel.mode), args.rel.budget);
        let a = check_adequate(&ll_sub, &fresh, &sub, &grid_probes(&sub, args.probe_len, 0));
        adequate = a.is_adequate() && a.unknowns.is_empty();
        println!(
            "restricted << adequate: {} ({} pairs, {} violations, {} unknown)",
            if adequate { "yes" } else { "no" },
            a.checked,
            a.violations.len(),
            a.unknowns.len()
        );
    }
    if let Some(path) = &args.out {
        let text = export_structure(&sub, Some(&ll_rows(&ll_sub, &sub, args.probe_len))).map_err(precondition)?;
        std::fs::write(path, text).map_err(|e| input(format!("{}: {e}", path.display())))?;
        println!("wrote {}", path.display());
    }
    Ok(if report.passed() && adequate { 0 } else { EXIT_CHECK_FAILED })
}

/// Staged values next to the classical value for every derivable instance.
fn coincidence(
    sys: &StageSystem,
    ll: &dyn LlRelation,
    phi: &Formula,
    cfg: &DeriveConfig,
) -> Result<(usize, Vec<String>), Failure> {
    let m = sys.union().ok_or_else(|| precondition("the system is not finite"))?;
    let (mut count, mut bad) = (0, Vec::new());
    for c in sys.index_set().all_contexts(phi.arity) {
        if !is_ll_context(ll, sys, &c).is_true() {
            continue;
        }
        let Ok(d) = derive(sys, ll, &c, phi, cfg) else { continue };
        for a in sys.tuples(&c) {
            count += 1;
            let classical = eval_tarskian(m, phi, &a);
            let staged = eval_ll(sys, &d, &a).map_err(precondition)?;
            let model = eval_m(sys, &c, phi, &a, cfg.budget).map_err(precondition)?;
            if staged.as_bool() != Some(classical) || model.as_bool() != Some(classical) {
                bad.push(format!(
                    "`{phi}` at {} {}: staged {}, stagewise {}, classical {}",
                    sys.format_context(&c),
                    sys.format_tuple(&a),
                    show(staged),
                    show(model),
                    show(TruthValue::from_bool(classical))
                ));
            }
        }
    }
    Ok((count, bad))
}

fn run_verify(args: &VerifyArgs) -> Result<u8, Failure> {
    let cfg_budget = args.rel.budget;
    if let Some(n) = args.random_systems {
        let limits = CorpusLimits {
            max_stages: args.max_stages,
            max_elements: args.max_elements,
            max_depth: args.max_depth,
            ..CorpusLimits::default()
        };
        let cfg = DeriveConfig::minimal(cfg_budget);
        let (mut total, mut bad) = (0, Vec::new());
        for case in corpus(args.seed, n, &limits) {
            let ll = ll_t(&case.theory, closure_mode(args.rel.mode), cfg_budget);
            for phi in case.theory.iter() {
                let (k, b) = coincidence(&case.system, &ll, phi, &cfg)?;
                total += k;
                bad.extend(b.into_iter().map(|s| format!("seed {}: {s}", case.seed)));
            }
        }
        println!("systems: {n}, instances: {total}");
        return Ok(report_mismatches(&bad));
    }
    let env = load(&args.system)?;
    let sys = env.sys.as_ref();
    if sys.union().is_none() {
        return Err(precondition("verify needs a finite system"));
    }
    let mut entries = args.rel.theory.clone();
    if entries.iter().all(|e| e.trim().is_empty()) && matches!(env.demo, Some(DemoName::Zfc)) {
        entries = vec!["axioms5".into()];
    }
    let labelled = env.labelled_theory(&entries)?;
    if labelled.is_empty() {
        return Err(precondition("no formulas to check; pass -T"));
    }
    let t: FormulaSet = labelled.iter().map(|(_, f)| f.clone()).collect();
    let ll = env.ll(&args.rel, &t)?;
    let cfg = env.derive_config(&args.rel)?;
    let m = sys.union().expect("finite");
    let mut bad = Vec::new();
    for (label, phi) in &labelled {
        if phi.arity == 0 {
            let classical = eval_tarskian(m, phi, &[]);
            match find_declaration(sys, ll.as_ref(), phi, &cfg) {
                Ok(d) => {
                    let staged = eval_ll(sys, &d, &[]).map_err(precondition)?;
                    println!("{label}: staged {}, classical {}", show(staged), show(TruthValue::from_bool(classical)));
                    if staged.as_bool() != Some(classical) {
                        bad.push(format!("{label}: staged {}, classical {}", show(staged), show(TruthValue::from_bool(classical))));
                    }
                }
                Err(e) => println!("{label}: no declaration ({e}), classical {}", show(TruthValue::from_bool(classical))),
            }
        } else {
            let (k, b) = coincidence(sys, ll.as_ref(), phi, &cfg)?;
            println!("{label}: {k} instances, {} mismatches", b.len());
            bad.extend(b);
        }
    }
    Ok(report_mismatches(&bad))
}

fn report_mismatches(bad: &[String]) -> u8 {
    if bad.is_empty() {
        println!("all coincidence checks passed");
        0
    } else {
        println!("{} mismatches", bad.len());
        for line in bad.iter().take(20) {
            println!("  {line}");
        }
        EXIT_CHECK_FAILED
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Eval(a) => run_eval(a),
        Command::Horizon(a) => run_horizon(a),
        Command::Submodel(a) => run_submodel(a),
        Command::Verify(a) => run_verify(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
