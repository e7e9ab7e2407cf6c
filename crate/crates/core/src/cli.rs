//! The `lockweave` command line.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::analysis::instance::Rejected;
use crate::analysis::{
    analyze, check_lock_adequacy_in, check_program_order, find_maximal_instance, guard_set, interference_events,
    interference_horizon, AnalysisError, AnalysisOptions, Bounds, InstanceSearch, Limits, LockSet, Protected, Strategy,
};
use crate::bundle::{KnowledgeSet, LoadError};
use crate::codegen::generate;
use crate::kernel::asp::{export_asp, AspEvent};
use crate::kernel::{match_block, PatternNames};
use crate::knowledge::Severity;
use crate::logic::Literal;
use crate::report::{
    BindingLocks, BlockOrders, EmittedReport, InstanceReport, LocksReport, OrderReport, Report, SimulateReport,
    SynthReport,
};
use crate::simulator::{explore_all, ExploreBounds, Library, Simulator};
use crate::symbol::Sym;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NOT_FOUND: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "lockweave", version, about = "Fine-grained locking from sequential knowledge")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Interference horizon; defaults to the number of operation
    /// instances on the maximal instance.
    #[arg(long, global = true)]
    pub horizon: Option<usize>,
    /// Largest instance searched, in interior nodes.
    #[arg(long, global = true)]
    pub max_nodes: Option<usize>,
    /// Simulated threads.
    #[arg(long, global = true, default_value_t = 2)]
    pub threads: usize,
    /// Seed for sampled interleavings.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory for reports and generated code.
    #[arg(long, global = true, default_value = "lockweave-out")]
    pub out: PathBuf,
    /// A strategy (fine_grained, rcu, coarse_grained), or a lock list
    /// for one block as `op::block=a,b`. Repeatable.
    #[arg(long, global = true)]
    pub strategy_override: Vec<Override>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search for the maximal instance.
    FindInstance(SetArg),
    /// Check every permutation of each block's steps.
    Order(SetArg),
    /// Guess locks per binding and check their adequacy.
    Locks(SetArg),
    /// Run every analysis, write the verdicts and emit code.
    Synth(SetArg),
    /// Explore interleavings of the synthesized programs.
    Simulate(SetArg),
    /// Write the time-indexed program in ASP-Core-2 syntax.
    ExportAsp(SetArg),
}

#[derive(Debug, Args)]
pub struct SetArg {
    /// Knowledge set directory, or a bundled set name.
    pub set: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Override {
    Strategy(Strategy),
    Locks {
        operation: String,
        block: String,
        nodes: Vec<String>,
    },
}

impl FromStr for Override {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let Some((lhs, rhs)) = s.split_once('=') else {
            return s.parse().map(Override::Strategy);
        };
        let (operation, block) = lhs
            .split_once("::")
            .ok_or_else(|| format!("expected op::block=nodes, got {s}"))?;
        let nodes = rhs
            .split(',')
            .map(str::trim)
            .filter(|n| !n.is_empty())
            .map(String::from)
            .collect();
        Ok(Override::Locks {
            operation: operation.trim().to_string(),
            block: block.trim().to_string(),
            nodes,
        })
    }
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }
}

impl From<LoadError> for CliError {
    fn from(e: LoadError) -> Self {
        let code = match e {
            LoadError::Io { .. } => EXIT_IO,
            _ => EXIT_INVALID,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        let code = match e {
            AnalysisError::NoInstance { .. } | AnalysisError::NoBinding { .. } | AnalysisError::Budget { .. } => {
                EXIT_NOT_FOUND
            }
            AnalysisError::UnknownBlock { .. } | AnalysisError::ForeignStep(_) => EXIT_INVALID,
        };
        CliError::new(code, format!("analysis: {e}"))
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Summaries go to `stdout`, errors to standard error.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    let set_arg = match &cli.command {
        Command::FindInstance(a)
        | Command::Order(a)
        | Command::Locks(a)
        | Command::Synth(a)
        | Command::Simulate(a)
        | Command::ExportAsp(a) => a,
    };
    let set = KnowledgeSet::load(&set_arg.set)?;
    for d in &set.diagnostics {
        if d.severity == Severity::Warning {
            eprintln!("warning: {d}");
        }
    }
    let cx = Context { cli, set: &set };
    match &cli.command {
        Command::FindInstance(_) => cx.find_instance(out),
        Command::Order(_) => cx.order(out),
        Command::Locks(_) => cx.locks(out),
        Command::Synth(_) => cx.synth(out),
        Command::Simulate(_) => cx.simulate(out),
        Command::ExportAsp(_) => cx.export_asp(out),
    }
}

fn rejected_line(r: &Rejected) -> String {
    format!(
        "rejected {{{}}}: {} inapplicable ({})",
        r.instance.join(", "),
        r.inapplicable.join(", "),
        r.reason
    )
}

struct Context<'a> {
    cli: &'a Cli,
    set: &'a KnowledgeSet,
}

fn say(out: &mut dyn Write, line: impl AsRef<str>) -> Result<(), CliError> {
    writeln!(out, "{}", line.as_ref()).map_err(|e| CliError::new(EXIT_IO, format!("stdout: {e}")))
}

impl Context<'_> {
    fn bounds(&self) -> Bounds {
        match self.cli.max_nodes {
            Some(max_nodes) => Bounds { max_nodes },
            None => Bounds::for_model(&self.set.model),
        }
    }

    fn strategy_override(&self) -> Option<Strategy> {
        self.cli.strategy_override.iter().rev().find_map(|o| match o {
            Override::Strategy(s) => Some(*s),
            Override::Locks { .. } => None,
        })
    }

    fn lock_overrides(&self) -> impl Iterator<Item = (&str, &str, &[String])> {
        self.cli.strategy_override.iter().filter_map(|o| match o {
            Override::Locks { operation, block, nodes } => Some((operation.as_str(), block.as_str(), nodes.as_slice())),
            Override::Strategy(_) => None,
        })
    }

    fn check_overrides(&self) -> Result<(), CliError> {
        for (op, block, _) in self.lock_overrides() {
            if self.set.model.find_block(op, block).is_none() {
                return Err(CliError::new(EXIT_INVALID, format!("override names unknown block {op}::{block}")));
            }
        }
        Ok(())
    }

    fn options(&self) -> AnalysisOptions {
        AnalysisOptions {
            bounds: Some(self.bounds()),
            horizon: self.cli.horizon,
            strategy_override: self.strategy_override(),
            ..AnalysisOptions::default()
        }
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let dir = &self.cli.out;
        let io = |p: &Path, e: std::io::Error| CliError::new(EXIT_IO, format!("{}: {e}", p.display()));
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| io(&path, e))?;
        Ok(path)
    }

    fn instance(&self) -> Result<InstanceSearch, CliError> {
        Ok(find_maximal_instance(&self.set.model, self.bounds())?)
    }

    fn find_instance(&self, out: &mut dyn Write) -> Result<i32, CliError> {
        let max_nodes = self.bounds().max_nodes;
        let name = self.set.name.as_str();
        match find_maximal_instance(&self.set.model, self.bounds()) {
            Ok(search) => {
                let g = &search.instance;
                let body = InstanceReport::found(g, max_nodes, search.applicability.clone(), search.rejected.clone());
                self.write("instance.json", &Report::new("find-instance", name, body).to_json())?;
                let mut lp = format!("% {}\n", g.order_text());
                for f in &g.facts {
                    lp.push_str(&format!("{f}.\n"));
                }
                self.write("instance.lp", &lp)?;
                say(out, format!("instance {g}"))?;
                say(out, format!("key order {}", g.order_text()))?;
                for r in &search.rejected {
                    say(out, rejected_line(r))?;
                }
                Ok(EXIT_OK)
            }
            Err(AnalysisError::NoInstance { max_nodes, rejected }) => {
                let body = InstanceReport::not_found(max_nodes, rejected.clone());
                self.write("instance.json", &Report::new("find-instance", name, body).to_json())?;
                for r in &rejected {
                    say(out, rejected_line(r))?;
                }
                Err(AnalysisError::NoInstance { max_nodes, rejected }.into())
            }
            Err(e) => Err(e.into()),
        }
    }

    fn order(&self, out: &mut dyn Write) -> Result<i32, CliError> {
        let search = self.instance()?;
        let model = &self.set.model;
        let mut blocks = Vec::new();
        for (op, b) in model.blocks() {
            let r = check_program_order(model, op.name, b.id, &search.instance)?;
            let accepted: Vec<Vec<String>> = r
                .accepted
                .iter()
                .map(|o| o.iter().map(|s| s.to_string()).collect())
                .collect();
            match accepted.first() {
                Some(o) => say(out, format!("{}::{}: accepted [{}]", op.name, b.id, o.join(", ")))?,
                None => say(out, format!("{}::{}: no accepted order", op.name, b.id))?,
            }
            blocks.push(BlockOrders {
                operation: op.name,
                block: b.id,
                bindings: r.bindings,
                accepted,
                checks: r.checks,
            });
        }
        let missing = blocks.iter().any(|b| b.accepted.is_empty());
        let body = OrderReport {
            instance: search.instance.describe(),
            blocks,
        };
        self.write("order.json", &Report::new("order", &self.set.name, body).to_json())?;
        Ok(if missing { EXIT_NOT_FOUND } else { EXIT_OK })
    }

    fn locks(&self, out: &mut dyn Write) -> Result<i32, CliError> {
        self.check_overrides()?;
        let search = self.instance()?;
        let model = &self.set.model;
        let instance = &search.instance;
        let horizon = self.cli.horizon.unwrap_or_else(|| interference_horizon(model, instance));
        let universe = interference_events(model, &instance.facts, &instance.order);
        let limits = Limits {
            horizon,
            budget: AnalysisOptions::default().budget,
        };
        let mut bindings = Vec::new();
        for (op, spec) in model.blocks() {
            let over = self
                .lock_overrides()
                .find(|(o, b, _)| *o == op.name.as_str() && *b == spec.id.as_str())
                .map(|(_, _, n)| n);
            let pattern = model.pattern(op.name, spec.id);
            for b in match_block(&model.eval, pattern, &instance.facts, &instance.order, &PatternNames) {
                let locks = match over {
                    Some(nodes) => LockSet::new(nodes.iter().map(|n| b.image(Sym::new(n)))),
                    None => guard_set(model, op.name, spec.id, &b),
                };
                let protected = Protected {
                    op: op.name,
                    block: spec.id,
                    binding: &b,
                };
                let v = check_lock_adequacy_in(model, instance, &universe, &protected, &locks, limits)?;
                let verdict = if v.is_adequate() { "adequate" } else { "inadequate" };
                let mut line = format!("{}::{}{} locks {locks}: {verdict}", op.name, spec.id, b);
                if let Some(c) = &v.falsified_conjunct {
                    line.push_str(&format!(" ({c} falsified)"));
                }
                say(out, line)?;
                bindings.push(BindingLocks {
                    operation: op.name,
                    block: spec.id,
                    binding: b.to_string(),
                    overridden: over.is_some(),
                    locks,
                    adequacy: v,
                });
            }
        }
        let body = LocksReport {
            instance: instance.describe(),
            horizon,
            bindings,
        };
        self.write("locks.json", &Report::new("locks", &self.set.name, body).to_json())?;
        Ok(EXIT_OK)
    }

    fn synth(&self, out: &mut dyn Write) -> Result<i32, CliError> {
        let (_, verdict) = analyze(&self.set.model, &self.options())?;
        for o in &verdict.operations {
            let yn = |b: bool| if b { "yes" } else { "no" };
            say(
                out,
                format!(
                    "{}: adequate {}, order {}, strategy {}",
                    o.operation,
                    yn(o.adequate),
                    yn(o.order_exists),
                    o.strategy
                ),
            )?;
        }
        say(out, format!("strategy {}", verdict.strategy))?;
        let mut emitted = Vec::new();
        let mut codegen_error = None;
        if verdict.strategy != Strategy::CoarseGrained {
            match generate(self.set, &verdict) {
                Ok(files) => {
                    for f in files {
                        let file = format!("{}.cpp", f.name);
                        self.write(&file, &f.code.text)?;
                        let side = EmittedReport {
                            file: file.clone(),
                            provenance: f.code.provenance,
                        };
                        let side = Report::new("synth", &self.set.name, side).to_json();
                        self.write(&format!("{}.provenance.json", f.name), &side)?;
                        emitted.push(file);
                    }
                }
                Err(e) => codegen_error = Some(e.to_string()),
            }
        }
        if emitted.is_empty() {
            say(out, "no code emitted")?;
        } else {
            say(out, format!("emitted {}", emitted.join(", ")))?;
        }
        let failed = codegen_error.clone();
        let body = SynthReport {
            verdict: &verdict,
            emitted,
            codegen_error,
        };
        self.write("verdicts.json", &Report::new("synth", &self.set.name, body).to_json())?;
        match failed {
            Some(e) => Err(CliError::new(EXIT_INVALID, format!("codegen: {e}"))),
            None => Ok(EXIT_OK),
        }
    }

    fn simulate(&self, out: &mut dyn Write) -> Result<i32, CliError> {
        self.check_overrides()?;
        let model = &self.set.model;
        let (search, verdict) = analyze(model, &self.options())?;
        let mut library = Library::from_verdict(model, &verdict);
        for (op, block, nodes) in self.lock_overrides() {
            let nodes: Vec<Sym> = nodes.iter().map(|n| Sym::new(n)).collect();
            library
                .override_locks(Sym::new(op), Sym::new(block), &nodes)
                .map_err(|e| CliError::new(EXIT_INVALID, e.to_string()))?;
        }
        let sim = Simulator::new(model, library, &search.instance);
        let bounds = ExploreBounds {
            seed: self.cli.seed,
            ..ExploreBounds::default()
        };
        let report = explore_all(&sim, self.cli.threads, &bounds).map_err(|e| CliError::new(EXIT_INVALID, e.to_string()))?;
        let failures: Vec<_> = report.failures().cloned().collect();
        let mode = if report.exhaustive { "exhaustive" } else { "sampled" };
        say(
            out,
            format!(
                "{} threads, {} scenarios, {} states, {mode}: {} failures",
                report.threads,
                report.scenarios,
                report.states,
                failures.len()
            ),
        )?;
        if let Some(v) = failures.iter().min_by_key(|v| v.time) {
            say(out, format!("{} after {} steps:", v.kind.name(), v.time))?;
            say(out, v.diagram.trim_end())?;
        }
        let failed = !failures.is_empty();
        let body = SimulateReport {
            seed: self.cli.seed,
            excluded: sim.unsound_instances(),
            exploration: report,
            failures,
        };
        self.write("simulation.json", &Report::new("simulate", &self.set.name, body).to_json())?;
        Ok(if failed { EXIT_VIOLATION } else { EXIT_OK })
    }

    fn export_asp(&self, out: &mut dyn Write) -> Result<i32, CliError> {
        let search = self.instance()?;
        let model = &self.set.model;
        let instance = &search.instance;
        let horizon = self.cli.horizon.unwrap_or_else(|| interference_horizon(model, instance));
        let mut facts = instance.facts.clone();
        let mut order = instance.order.clone();
        let mut events = Vec::new();
        let universe = if horizon == 0 {
            Vec::new()
        } else {
            interference_events(model, &instance.facts, &instance.order)
        };
        for e in universe {
            order = order
                .union(&e.order)
                .map_err(|c| CliError::new(EXIT_INVALID, format!("event key orders conflict: {c}")))?;
            let (_, spec) = model
                .find_block(e.operation.as_str(), e.block.as_str())
                .expect("event block exists");
            facts.extend(e.fresh_facts.iter().cloned());
            events.push(AspEvent {
                label: e.label(model),
                precondition: spec
                    .precondition
                    .iter()
                    .map(|l| Literal {
                        atom: e.binding.ground(&l.atom),
                        negated: l.negated,
                    })
                    .collect(),
                effects: e.steps.iter().map(|s| model.ops.effect(s)).collect(),
            });
        }
        let text = export_asp(model, &facts, &order, horizon, &events);
        let path = self.write("program.lp", &text)?;
        say(out, format!("wrote {} (horizon {horizon}, {} events)", path.display(), events.len()))?;
        Ok(EXIT_OK)
    }
}
