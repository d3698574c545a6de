mod render;
mod style;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use piforge_core::diagnostic::{count_errors, count_warnings, Diagnostic};
use piforge_core::harmonize::{
    completeness_report, parse_decisions, HarmonizeError, DEFAULT_THRESHOLD,
};
use piforge_core::model::{Perspective, Stakeholder};
use piforge_core::pid::{parse_pid, parse_proposals, Source};
use piforge_core::process::{
    init_process, resolve_conflict, run_harmonization, run_interface_definition,
    submit_perspective, Clock, FixedClock, Operation, Phase, ProcessError, ProcessState,
    Resolution, SystemClock,
};
use piforge_core::project::{self, ProjectError};
use piforge_core::synth::DEFAULT_WARN_UTILIZATION;
use piforge_core::trace::TraceError;
use piforge_core::units::Quantity;
use piforge_workbench::{views, Workbench};
use serde::Serialize;

use style::Styles;

#[derive(Parser)]
#[command(
    name = "piforge",
    version,
    about = "Harmonize PI proposals and synthesize traceable PI interfaces"
)]
struct Cli {
    /// Project directory; relative paths resolve against it
    #[arg(long, global = true, default_value = ".")]
    project: PathBuf,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Branch {
    TopDown,
    BottomUp,
}

#[derive(Clone, Copy, ValueEnum)]
enum ResolutionKind {
    AdjustPi,
    ReallocateBus,
    DropPi,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Parse and check PID files
    Validate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Start a process from an item definition
    Init {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Acting coordinator, as role:name
        #[arg(long)]
        actor: Stakeholder,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
    },
    /// Submit one branch of PI proposals
    Propose {
        #[arg(long, value_enum)]
        branch: Branch,
        #[arg(long)]
        actor: Stakeholder,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// List merge proposals, or apply a decision file
    Harmonize {
        #[arg(long)]
        decisions: Option<PathBuf>,
        /// Defaults to the first decision's signer
        #[arg(long)]
        actor: Option<Stakeholder>,
    },
    /// Origin paths and impact set of a node
    Trace { id: String },
    /// Report coverage gaps in the trace graph
    Coverage,
    /// Define interfaces and emit artifacts when they are feasible
    Synth {
        #[arg(long, default_value_t = DEFAULT_WARN_UTILIZATION)]
        warn_utilization: f64,
        #[arg(long)]
        actor: Stakeholder,
    },
    /// Resolve an interface conflict
    Resolve {
        conflict: String,
        #[arg(long, value_enum)]
        action: ResolutionKind,
        /// Co-signers, comma separated role:name
        #[arg(long, value_delimiter = ',', required = true)]
        actors: Vec<Stakeholder>,
        #[arg(long, value_parser = quantity)]
        rate: Option<Quantity>,
        #[arg(long, value_parser = quantity)]
        payload: Option<Quantity>,
        #[arg(long, value_parser = quantity)]
        freshness: Option<Quantity>,
        #[arg(long)]
        bus: Option<String>,
        #[arg(long)]
        rationale: Option<String>,
    },
    /// Summarize the process against the PRO-REQ checklist
    Report {
        /// Also write the machine report here
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the workbench API
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        read_only: bool,
    },
}

/// Exit code plus an optional message for stderr.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: Option<String>,
}

const DIAGNOSTICS: u8 = 1;
const USAGE: u8 = 2;
const INTERNAL: u8 = 3;

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: Some(message.into()),
        }
    }

    /// Errors were already reported on stdout.
    fn reported() -> Self {
        Failure {
            code: DIAGNOSTICS,
            message: None,
        }
    }
}

impl From<ProcessError> for Failure {
    fn from(e: ProcessError) -> Self {
        let code = match e {
            ProcessError::Synth(_) | ProcessError::Trace(_) | ProcessError::Replay(_) => INTERNAL,
            _ => DIAGNOSTICS,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<ProjectError> for Failure {
    fn from(e: ProjectError) -> Self {
        let code = match e {
            ProjectError::NotInitialized(_) => DIAGNOSTICS,
            _ => INTERNAL,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<TraceError> for Failure {
    fn from(e: TraceError) -> Self {
        ProcessError::from(e).into()
    }
}

impl From<HarmonizeError> for Failure {
    fn from(e: HarmonizeError) -> Self {
        ProcessError::from(e).into()
    }
}

type Outcome = Result<(), Failure>;

struct Ctx {
    project: PathBuf,
    format: Format,
    styles: Styles,
    clock: Box<dyn Clock + Send + Sync>,
    out: String,
}

impl Ctx {
    fn path(&self, p: &Path) -> PathBuf {
        self.project.join(p)
    }

    fn read_sources(&self, files: &[PathBuf]) -> Result<Vec<Source>, Failure> {
        files
            .iter()
            .map(|f| {
                let text = fs::read_to_string(self.path(f)).map_err(|e| {
                    Failure::new(DIAGNOSTICS, format!("cannot read {}: {e}", f.display()))
                })?;
                Ok(Source::new(f.display().to_string(), text))
            })
            .collect()
    }

    fn load(&self) -> Result<ProcessState, Failure> {
        Ok(project::load(&self.project)?)
    }

    fn save(&self, s: &ProcessState) -> Outcome {
        Ok(project::save(&self.project, s)?)
    }

    fn json<T: Serialize>(&mut self, value: &T) {
        self.out
            .push_str(&serde_json::to_string_pretty(value).expect("reports serialize"));
        self.out.push('\n');
    }

    fn text(&self) -> bool {
        self.format == Format::Text
    }

    /// Reports diagnostics; fails if any is an error.
    fn check(&mut self, diags: &[Diagnostic]) -> Outcome {
        if self.text() {
            render::diagnostics(&mut self.out, self.styles, diags);
        } else if count_errors(diags) > 0 {
            self.json(&serde_json::json!({ "diagnostics": diags }));
        }
        if count_errors(diags) > 0 {
            Err(Failure::reported())
        } else {
            Ok(())
        }
    }

    /// Result of a mutating command.
    fn changed(&mut self, before: &ProcessState, after: &ProcessState) {
        if self.text() {
            render::events(&mut self.out, &after.audit[before.audit.len()..]);
            render::status(&mut self.out, self.styles, after);
        } else {
            self.json(&views::mutation(before, after));
        }
    }

    fn unchanged(&mut self, s: &ProcessState, what: &str) {
        if self.text() {
            writeln!(self.out, "{what}; nothing changed").unwrap();
            render::status(&mut self.out, self.styles, s);
        } else {
            self.json(&views::mutation(s, s));
        }
    }
}

fn quantity(text: &str) -> Result<Quantity, String> {
    Quantity::parse(text).map_err(|e| e.to_string())
}

fn clock() -> Box<dyn Clock + Send + Sync> {
    match std::env::var("PIFORGE_CLOCK") {
        Ok(t) if !t.is_empty() => Box::new(FixedClock(t)),
        _ => Box::new(SystemClock),
    }
}

fn validate(cx: &mut Ctx, files: &[PathBuf]) -> Outcome {
    let parsed = parse_pid(&cx.read_sources(files)?);
    let (pis, errors, warnings) = (
        parsed.bundle.proposals.len(),
        count_errors(&parsed.diagnostics),
        count_warnings(&parsed.diagnostics),
    );
    if cx.text() {
        render::diagnostics(&mut cx.out, cx.styles, &parsed.diagnostics);
        writeln!(cx.out, "{pis} PIs, {errors} errors, {warnings} warnings").unwrap();
    } else {
        cx.json(&serde_json::json!({
            "pis": pis,
            "errors": errors,
            "warnings": warnings,
            "diagnostics": parsed.diagnostics,
        }));
    }
    if errors > 0 {
        Err(Failure::reported())
    } else {
        Ok(())
    }
}

fn init(cx: &mut Ctx, files: &[PathBuf], actor: &Stakeholder, threshold: f64) -> Outcome {
    let parsed = parse_pid(&cx.read_sources(files)?);
    cx.check(&parsed.diagnostics)?;
    if project::exists(&cx.project) {
        let s = cx.load()?;
        if s.initial == parsed.bundle && s.threshold == threshold {
            cx.unchanged(&s, "already initialized with this item");
            return Ok(());
        }
        return Err(Failure::new(
            DIAGNOSTICS,
            format!(
                "{} is already initialized with a different item",
                cx.project.display()
            ),
        ));
    }
    let s = init_process(&parsed.bundle, actor, threshold, cx.clock.as_ref())?;
    cx.save(&s)?;
    let empty = ProcessState {
        audit: Vec::new(),
        ..s.clone()
    };
    cx.changed(&empty, &s);
    Ok(())
}

fn propose(cx: &mut Ctx, branch: Branch, actor: &Stakeholder, files: &[PathBuf]) -> Outcome {
    let s = cx.load()?;
    let (pis, diags) = parse_proposals(&cx.read_sources(files)?, &s.bundle);
    cx.check(&diags)?;
    let perspective = match branch {
        Branch::TopDown => Perspective::TopDown,
        Branch::BottomUp => Perspective::BottomUp,
    };
    let submitted = match perspective {
        Perspective::TopDown => s.top_down_submitted,
        Perspective::BottomUp => s.bottom_up_submitted,
    };
    let last = s.journal.iter().rev().find_map(|e| match &e.operation {
        Operation::Submit {
            perspective: p,
            proposals,
            actor: a,
        } if *p == perspective => Some((proposals, a)),
        _ => None,
    });
    if submitted && last == Some((&pis, actor)) {
        cx.unchanged(&s, &format!("{perspective} proposals already submitted"));
        return Ok(());
    }
    let next = submit_perspective(&s, perspective, &pis, actor, cx.clock.as_ref())?;
    cx.save(&next)?;
    cx.changed(&s, &next);
    Ok(())
}

fn harmonize(cx: &mut Ctx, decisions: Option<&Path>, actor: Option<&Stakeholder>) -> Outcome {
    let s = cx.load()?;
    let harmonizing = matches!(s.phase, Phase::PiLogDraft | Phase::Harmonization);
    let decisions = match decisions {
        Some(path) => {
            let text = fs::read_to_string(cx.path(path)).map_err(|e| {
                Failure::new(DIAGNOSTICS, format!("cannot read {}: {e}", path.display()))
            })?;
            let (decisions, diags) = parse_decisions(&path.display().to_string(), &text);
            cx.check(&diags)?;
            if !decisions.is_empty() && decisions.iter().all(|d| s.decisions.contains(d)) {
                cx.unchanged(&s, "all decisions already applied");
                return Ok(());
            }
            decisions
        }
        None => Vec::new(),
    };

    if decisions.is_empty() {
        let queue = s.proposals()?;
        let log: Vec<_> = s.bundle.pis().cloned().collect();
        let incomplete = completeness_report(&log);
        // Nothing to decide and nothing that would change: list only.
        if !harmonizing || !queue.is_empty() || count_errors(&incomplete) > 0 {
            if cx.text() {
                render::proposals(&mut cx.out, &queue);
                render::status(&mut cx.out, cx.styles, &s);
            } else {
                cx.json(&views::proposals(&s));
            }
            return if harmonizing && queue.is_empty() {
                cx.check(&incomplete)
            } else {
                Ok(())
            };
        }
    }

    let actor = actor
        .or_else(|| decisions.first().map(|d| &d.decided_by))
        .ok_or_else(|| {
            Failure::new(USAGE, "harmonize needs --actor when there are no decisions")
        })?;
    let next = run_harmonization(&s, &decisions, actor, cx.clock.as_ref())?;
    cx.save(&next)?;
    cx.changed(&s, &next);
    if cx.text() {
        render::proposals(&mut cx.out, &next.proposals()?);
    }
    Ok(())
}

fn trace(cx: &mut Ctx, id: &str) -> Outcome {
    let s = cx.load()?;
    let view = views::trace(&s, id)?;
    if cx.text() {
        render::trace(&mut cx.out, &view);
    } else {
        cx.json(&view);
    }
    Ok(())
}

fn coverage(cx: &mut Ctx) -> Outcome {
    let s = cx.load()?;
    let view = views::coverage(&s)?;
    if cx.text() {
        render::coverage(&mut cx.out, cx.styles, &view);
    } else {
        cx.json(&view);
    }
    if view.complete {
        Ok(())
    } else {
        Err(Failure::reported())
    }
}

fn synth(cx: &mut Ctx, warn: f64, actor: &Stakeholder) -> Outcome {
    let s = cx.load()?;
    if s.phase == Phase::InterfacesDefined {
        cx.unchanged(&s, "interfaces already defined");
        return Ok(());
    }
    let next = run_interface_definition(&s, actor, warn, cx.clock.as_ref())?;
    cx.save(&next)?;
    cx.changed(&s, &next);
    if cx.text() {
        if let Some(report) = &next.feasibility {
            render::feasibility(&mut cx.out, cx.styles, report);
        }
        render::conflicts(&mut cx.out, cx.styles, next.open_conflicts());
        if let Some(a) = &next.artifacts {
            writeln!(cx.out, "icd {}\nidl {}", a.icd_digest, a.idl_digest).unwrap();
        }
        if next.phase == Phase::Analysis {
            render::coverage(&mut cx.out, cx.styles, &views::coverage(&next)?);
        }
    }
    if next.phase == Phase::InterfacesDefined {
        Ok(())
    } else {
        Err(Failure::reported())
    }
}

#[allow(clippy::too_many_arguments)]
fn resolve(
    cx: &mut Ctx,
    conflict: &str,
    kind: ResolutionKind,
    actors: &[Stakeholder],
    rate: Option<Quantity>,
    payload: Option<Quantity>,
    freshness: Option<Quantity>,
    bus: Option<String>,
    rationale: Option<String>,
) -> Outcome {
    let resolution = match kind {
        ResolutionKind::AdjustPi => Resolution::AdjustPi {
            rate,
            payload,
            freshness,
        },
        ResolutionKind::ReallocateBus => Resolution::ReallocateBus {
            bus: bus.ok_or_else(|| Failure::new(USAGE, "reallocate-bus needs --bus"))?,
        },
        ResolutionKind::DropPi => Resolution::DropPi {
            rationale: rationale.ok_or_else(|| Failure::new(USAGE, "drop-pi needs --rationale"))?,
        },
    };
    let s = cx.load()?;
    if s.conflicts
        .get(conflict)
        .and_then(|c| c.resolution.as_ref())
        == Some(&resolution)
    {
        cx.unchanged(&s, &format!("{conflict} already resolved this way"));
        return Ok(());
    }
    let next = resolve_conflict(&s, conflict, &resolution, actors, cx.clock.as_ref())?;
    cx.save(&next)?;
    cx.changed(&s, &next);
    if cx.text() {
        render::conflicts(&mut cx.out, cx.styles, next.open_conflicts());
    }
    Ok(())
}

fn report(cx: &mut Ctx, output: Option<&Path>) -> Outcome {
    let s = cx.load()?;
    let view = views::report(&s)?;
    if let Some(path) = output {
        let path = cx.path(path);
        let text = serde_json::to_string_pretty(&view).expect("reports serialize") + "\n";
        fs::write(&path, text)
            .map_err(|e| Failure::new(INTERNAL, format!("cannot write {}: {e}", path.display())))?;
    }
    if cx.text() {
        let st = cx.styles;
        render::status(&mut cx.out, st, &s);
        render::conflicts(&mut cx.out, st, s.conflicts.values());
        render::coverage(&mut cx.out, st, &view.coverage);
        render::proreq(&mut cx.out, st, &view.proreq);
    } else {
        cx.json(&view);
    }
    Ok(())
}

fn serve(cx: &mut Ctx, port: u16, read_only: bool) -> Outcome {
    let clock = std::mem::replace(&mut cx.clock, Box::new(SystemClock));
    let wb = Workbench::open(&cx.project, read_only, clock)
        .map_err(|e| Failure::new(DIAGNOSTICS, e.to_string()))?;
    let runtime =
        tokio::runtime::Runtime::new().map_err(|e| Failure::new(INTERNAL, e.to_string()))?;
    eprintln!(
        "serving {} on http://127.0.0.1:{port}",
        cx.project.display()
    );
    runtime
        .block_on(piforge_workbench::serve(wb, port))
        .map_err(|e| Failure::new(INTERNAL, e.to_string()))
}

fn run(cli: Cli, cx: &mut Ctx) -> Outcome {
    match cli.command {
        Command::Validate { files } => validate(cx, &files),
        Command::Init {
            files,
            actor,
            threshold,
        } => init(cx, &files, &actor, threshold),
        Command::Propose {
            branch,
            actor,
            files,
        } => propose(cx, branch, &actor, &files),
        Command::Harmonize { decisions, actor } => {
            harmonize(cx, decisions.as_deref(), actor.as_ref())
        }
        Command::Trace { id } => trace(cx, &id),
        Command::Coverage => coverage(cx),
        Command::Synth {
            warn_utilization,
            actor,
        } => synth(cx, warn_utilization, &actor),
        Command::Resolve {
            conflict,
            action,
            actors,
            rate,
            payload,
            freshness,
            bus,
            rationale,
        } => resolve(
            cx, &conflict, action, &actors, rate, payload, freshness, bus, rationale,
        ),
        Command::Report { output } => report(cx, output.as_deref()),
        Command::Serve { port, read_only } => serve(cx, port, read_only),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cx = Ctx {
        project: cli.project.clone(),
        format: cli.format,
        styles: Styles::detect(),
        clock: clock(),
        out: String::new(),
    };
    let result = run(cli, &mut cx);
    print!("{}", cx.out);
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if let Some(m) = f.message {
                eprintln!("{}: {m}", cx.styles.error("error"));
            }
            ExitCode::from(f.code)
        }
    }
}
