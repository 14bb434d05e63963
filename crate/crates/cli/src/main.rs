use anyhow::{bail, Context, Result};
use blockwhisker::brute;
use blockwhisker::encoding::Subject;
use blockwhisker::fitness::Goal;
use blockwhisker::graphs::Graphs;
use blockwhisker::mutation::{self, AnalysisConfig};
use blockwhisker::postprocess;
use blockwhisker::project::{load_project_str, Project};
use blockwhisker::search::{self, Algorithm, Budget, MioParams, SearchConfig};
use blockwhisker::suite::{self, Suite};
use blockwhisker::vm::VmConfig;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

#[derive(Parser)]
#[command(name = "blockwhisker", version, about = "Test generation for event-driven block programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for a test suite and write suite.json and coverage.csv
    Generate(GenerateArgs),
    /// Re-run a suite's tests and check their assertions
    Replay(ReplayArgs),
    /// Minimize a suite's tests against their goals and regenerate assertions
    Minimize(SuiteArgs),
    /// Score a suite on first-order mutants of the project
    Mutate(MutateArgs),
    /// Print the control flow or control dependence graph
    GraphDump(GraphArgs),
    /// Enumerate short event sequences and print the reachable blocks
    BruteForce(BruteArgs),
}

#[derive(Args)]
#[group(id = "budget", multiple = false)]
struct BudgetArgs {
    #[arg(long)]
    budget_executions: Option<u64>,
    #[arg(long)]
    budget_seconds: Option<f64>,
    #[arg(long)]
    budget_steps: Option<u64>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    project: PathBuf,
    #[arg(long, default_value = "mio")]
    algorithm: Algorithm,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    budget: BudgetArgs,
    #[arg(long, default_value_t = 1)]
    acceleration: u32,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    crossover_prob: Option<f64>,
    #[arg(long)]
    local_search_prob: Option<f64>,
    #[arg(long)]
    new_event_prob: Option<f64>,
    #[arg(long)]
    mio_focus: Option<f64>,
    #[arg(long)]
    mio_n0: Option<f64>,
    #[arg(long)]
    mio_nf: Option<f64>,
    #[arg(long)]
    mio_r0: Option<f64>,
    #[arg(long)]
    mio_rf: Option<f64>,
    #[arg(long)]
    mio_m0: Option<f64>,
    #[arg(long)]
    mio_mf: Option<f64>,
    /// keep tests as the search found them
    #[arg(long)]
    no_minimize: bool,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    project: PathBuf,
    #[arg(long)]
    suite: PathBuf,
    /// seed other than the generation seed; results are then advisory
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SuiteArgs {
    #[arg(long)]
    project: PathBuf,
    #[arg(long)]
    suite: PathBuf,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct MutateArgs {
    #[arg(long)]
    project: PathBuf,
    #[arg(long)]
    suite: PathBuf,
    #[arg(long, default_value_t = mutation::DEFAULT_MUTANT_SEED)]
    mutant_seed: u64,
    /// per-test step limit on a mutant
    #[arg(long, default_value_t = mutation::DEFAULT_MAX_STEPS)]
    max_steps: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphKind {
    Cfg,
    Cdg,
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphFormat {
    Edges,
    Dot,
}

#[derive(Args)]
struct GraphArgs {
    #[arg(long)]
    project: PathBuf,
    #[arg(long, value_enum, default_value = "cfg")]
    graph: GraphKind,
    #[arg(long, value_enum, default_value = "edges")]
    format: GraphFormat,
}

#[derive(Args)]
struct BruteArgs {
    #[arg(long)]
    project: PathBuf,
    #[arg(long, default_value_t = brute::DEFAULT_MAX_LEN)]
    max_len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn load(path: &Path) -> Result<Project> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    load_project_str(&text).with_context(|| format!("loading {}", path.display()))
}

fn load_suite(path: &Path) -> Result<Suite> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Suite::from_json(&text).with_context(|| format!("parsing suite {}", path.display()))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Run metadata that must stay out of the canonical outputs.
fn write_meta(dir: &Path, name: &str, started: Instant) -> Result<()> {
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let meta = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "finishedUnixSeconds": now,
        "elapsedSeconds": started.elapsed().as_secs_f64(),
        "args": std::env::args().collect::<Vec<_>>(),
    });
    write(dir, name, &(serde_json::to_string_pretty(&meta)? + "\n"))
}

fn search_config(a: &GenerateArgs) -> Result<SearchConfig> {
    let budget = match (a.budget.budget_executions, a.budget.budget_seconds, a.budget.budget_steps) {
        (Some(n), _, _) => Budget::Executions(n),
        (_, Some(s), _) => Budget::Seconds(s),
        (_, _, Some(n)) => Budget::Steps(n),
        _ => Budget::Executions(1000),
    };
    let mut cfg = SearchConfig::new(a.algorithm, budget, a.seed);
    cfg.vm = VmConfig { acceleration: a.acceleration, ..cfg.vm };
    if let Some(n) = a.population {
        cfg.population = n;
    }
    if let Some(x) = a.crossover_prob {
        cfg.crossover_prob = x;
    }
    if let Some(x) = a.local_search_prob {
        cfg.local_search_prob = x;
    }
    if let Some(x) = a.new_event_prob {
        cfg.new_event_prob = x;
    }
    let d = MioParams::default();
    cfg.mio = MioParams {
        focus: a.mio_focus.unwrap_or(d.focus),
        n0: a.mio_n0.unwrap_or(d.n0),
        nf: a.mio_nf.unwrap_or(d.nf),
        r0: a.mio_r0.unwrap_or(d.r0),
        rf: a.mio_rf.unwrap_or(d.rf),
        m0: a.mio_m0.unwrap_or(d.m0),
        mf: a.mio_mf.unwrap_or(d.mf),
    };
    if let Err(e) = cfg.validate() {
        bail!("invalid configuration: {e}");
    }
    Ok(cfg)
}

fn generate(a: GenerateArgs) -> Result<ExitCode> {
    let started = Instant::now();
    let cfg = search_config(&a)?;
    let subject = Subject::new(load(&a.project)?);
    let result = search::run(&subject, &cfg);
    let suite = suite::build(&subject, &cfg, &result, !a.no_minimize);
    write(&a.out_dir, "suite.json", &suite.to_json())?;
    write(&a.out_dir, "coverage.csv", &result.coverage_csv())?;
    write_meta(&a.out_dir, "generate.meta.json", started)?;
    println!(
        "{} tests, coverage {}/{} ({:.1}%), {} executions, {} steps",
        suite.tests.len(),
        suite.covered.len(),
        suite.total_goals,
        100.0 * suite.coverage(),
        result.executions,
        result.steps
    );
    Ok(ExitCode::SUCCESS)
}

fn replay(a: ReplayArgs) -> Result<ExitCode> {
    let p = load(&a.project)?;
    let s = load_suite(&a.suite)?;
    let r = suite::replay(&p, &s, a.seed).context("suite does not fit the project")?;
    println!("{}", serde_json::to_string_pretty(&r)?);
    if !r.canonical {
        eprintln!("replayed with seed {} instead of {}; results are advisory", r.seed, s.seed);
    }
    eprintln!("{} assertions passed, {} failed", r.passed(), r.failures());
    Ok(if r.failures() == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn minimize(a: SuiteArgs) -> Result<ExitCode> {
    let started = Instant::now();
    let subject = Subject::new(load(&a.project)?);
    let mut s = load_suite(&a.suite)?;
    let vm = s.vm_config();
    for t in &mut s.tests {
        let mut targets: Vec<Goal> = vec![];
        for id in &t.goals {
            let Some(b) = subject.project.block_ix(id) else { bail!("suite names unknown block `{id}`") };
            targets.extend(subject.goals.iter().filter(|g| g.block == b));
        }
        t.events = postprocess::minimize(&subject, &vm, &t.events, &targets);
        t.assertions = postprocess::generate_assertions(&subject.project, &vm, &t.events);
    }
    s.minimized = true;
    write(&a.out_dir, "suite.json", &s.to_json())?;
    write_meta(&a.out_dir, "minimize.meta.json", started)?;
    let events: usize = s.tests.iter().map(|t| t.events.len()).sum();
    println!("{} tests, {} events", s.tests.len(), events);
    Ok(ExitCode::SUCCESS)
}

fn mutate(a: MutateArgs) -> Result<ExitCode> {
    let started = Instant::now();
    let p = load(&a.project)?;
    let s = load_suite(&a.suite)?;
    let mutants = mutation::generate_mutants(&p, a.mutant_seed);
    let cfg = AnalysisConfig { seed: None, max_steps: a.max_steps };
    let report = mutation::analyze(&p, &s, &mutants, &cfg);
    for m in report.mutants.iter().filter(|m| !m.exhausted.is_empty()) {
        eprintln!("{}: step limit reached on tests {:?}", m.id, m.exhausted);
    }
    write(&a.out_dir, "mutation.csv", &report.to_csv())?;
    write(&a.out_dir, "mutation.json", &(serde_json::to_string_pretty(&report)? + "\n"))?;
    write_meta(&a.out_dir, "mutate.meta.json", started)?;
    print!("{}", report.to_csv());
    Ok(ExitCode::SUCCESS)
}

fn graph_dump(a: GraphArgs) -> Result<ExitCode> {
    let p = load(&a.project)?;
    let g = Graphs::build(&p);
    let out = match (a.graph, a.format) {
        (GraphKind::Cfg, GraphFormat::Edges) => g.cfg.edge_list(&p),
        (GraphKind::Cfg, GraphFormat::Dot) => g.cfg.to_dot(&p),
        (GraphKind::Cdg, GraphFormat::Edges) => g.cdg.edge_list(&g.cfg, &p),
        (GraphKind::Cdg, GraphFormat::Dot) => g.cdg.to_dot(&g.cfg, &p),
    };
    print!("{out}");
    Ok(ExitCode::SUCCESS)
}

fn brute_force(a: BruteArgs) -> Result<ExitCode> {
    let p = load(&a.project)?;
    let reached = brute::reachable_checked(&p, &VmConfig::with_seed(a.seed), a.max_len)?;
    let ids: Vec<&str> = reached.iter().map(|&b| p.blocks[b].id.as_str()).collect();
    let out = json!({
        "maxLen": a.max_len,
        "reachable": ids,
        "coverableBlocks": p.coverable_blocks().len(),
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(ExitCode::SUCCESS)
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("BLOCKWHISKER_THREADS") {
        let n: usize = v.trim().parse().with_context(|| format!("BLOCKWHISKER_THREADS={v:?} is not a number"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = || -> Result<ExitCode> {
        init_threads()?;
        match cli.command {
            Command::Generate(a) => generate(a),
            Command::Replay(a) => replay(a),
            Command::Minimize(a) => minimize(a),
            Command::Mutate(a) => mutate(a),
            Command::GraphDump(a) => graph_dump(a),
            Command::BruteForce(a) => brute_force(a),
        }
    };
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
