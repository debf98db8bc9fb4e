//! crosspose CLI: generate scenario files, solve them, and batch-evaluate
//! into metric CSVs.
//!
//! Exit codes: 0 success, 2 input error, 3 degenerate geometry, 4 I/O error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crosspose::harness::{eval_bundles, group_means, sweep_bundles, EvalConfig, GroupSummary};
use crosspose::io::{read_scenario, write_metrics_csv, write_scenario, MetricsRow, ScenarioFile};
use crosspose::solver::{solve_weighted_pose, DemeanMode, FlowWeighting, SolverOptions};
use crosspose::synthetic::{
    make_articulated_random, make_free_floating, CorruptionKind, ScenarioBundle, ScenarioKind,
};
use crosspose::{Error, Result};

#[derive(Parser)]
#[command(name = "crosspose", version, about = "Blended correspondence / goal-flow cross-pose solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic scenario files into a directory.
    Generate(GenerateArgs),
    /// Solve one scenario file and print the solution JSON on stdout.
    Solve(SolveArgs),
    /// Solve every scenario in a directory over a (w, mode) grid; emit CSV.
    Eval(EvalArgs),
    /// Run eval across corruption levels.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Number of scenarios to write.
    #[arg(long)]
    count: usize,
    /// Scenario kind: free-floating or articulated.
    #[arg(long, default_value = "free-floating")]
    kind: ScenarioKind,
    /// Gaussian noise applied to correspondences and goal flow.
    #[arg(long, default_value_t = 0.0)]
    noise_sigma: f64,
    /// Base seed; scenario i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Action cloud size.
    #[arg(long, default_value_t = 128)]
    n_action: usize,
    /// Anchor cloud size.
    #[arg(long, default_value_t = 128)]
    n_anchor: usize,
}

#[derive(Args)]
struct SolveArgs {
    /// Scenario file to solve.
    scenario: PathBuf,
    /// Override the file's blend weight.
    #[arg(long)]
    w: Option<f64>,
    /// De-meaning mode: demean or paper-literal.
    #[arg(long, default_value_t = DemeanMode::Demean)]
    mode: DemeanMode,
    /// Flow row weighting: paper-literal-weighting or normalized-weighting.
    #[arg(long, default_value_t = FlowWeighting::PaperLiteralWeighting)]
    flow_weighting: FlowWeighting,
}

#[derive(Args)]
struct EvalArgs {
    /// Directory of scenario files.
    scenario_dir: PathBuf,
    /// Comma-separated blend weights.
    #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
    w_grid: Vec<f64>,
    /// Comma-separated modes to evaluate.
    #[arg(long, value_delimiter = ',', default_value = "demean")]
    modes: Vec<DemeanMode>,
    /// Flow row weighting.
    #[arg(long, default_value_t = FlowWeighting::PaperLiteralWeighting)]
    flow_weighting: FlowWeighting,
    /// Write the CSV here; group means then go to stdout instead of stderr.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Oracle restarts per instance.
    #[arg(long, default_value_t = 8)]
    oracle_restarts: usize,
    /// Oracle iteration cap.
    #[arg(long, default_value_t = 500)]
    oracle_iters: usize,
    /// Seed for the oracle's random restarts.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    eval: EvalArgs,
    /// Corruption: corr-outliers, flow-outliers, flow-scale, alpha-randomize.
    #[arg(long)]
    corruption: CorruptionKind,
    /// Comma-separated corruption levels.
    #[arg(long, value_delimiter = ',', required = true)]
    levels: Vec<f64>,
}

/// Solution JSON emitted by `solve`.
#[derive(Serialize)]
struct Solution {
    rotation: [f64; 9],
    translation: [f64; 3],
    objective: f64,
    degenerate_flag: bool,
    singular_values: [f64; 3],
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::DegenerateGeometry => 3,
        Error::Io { .. } => 4,
        _ => 2,
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate(args) => cmd_generate(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Sweep(args) => cmd_sweep(args),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    for index in 0..args.count {
        let seed = args.seed.wrapping_add(index as u64);
        let bundle = match args.kind {
            ScenarioKind::FreeFloating => {
                make_free_floating(seed, args.n_action, args.n_anchor, args.noise_sigma)?
            }
            ScenarioKind::Articulated => {
                make_articulated_random(seed, args.n_action, args.n_anchor, args.noise_sigma)?
            }
        };
        let path = args
            .out
            .join(format!("scenario_{}_{}.json", args.seed, index));
        write_scenario(&path, &ScenarioFile::from_bundle(&bundle))?;
    }
    Ok(())
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let bundle = read_scenario(&args.scenario)?.to_bundle()?;
    let problem = match args.w {
        Some(w) => bundle.problem.with_blend(w)?,
        None => bundle.problem,
    };
    let report = solve_weighted_pose(
        &problem,
        SolverOptions {
            mode: args.mode,
            flow_weighting: args.flow_weighting,
        },
    )?;
    let solution = Solution {
        rotation: report.transform.rotation_row_major(),
        translation: report.transform.translation_array(),
        objective: report.objective,
        degenerate_flag: report.degenerate_flag,
        singular_values: report.singular_values,
    };
    let mut text = serde_json::to_string_pretty(&solution).expect("solution serializes");
    text.push('\n');
    print!("{text}");
    Ok(())
}

/// Loads every *.json in the directory, in file-name order. Unreadable files
/// are reported on stderr and skipped; it is an error only if nothing loads.
fn load_scenarios(dir: &Path) -> Result<Vec<(String, ScenarioBundle)>> {
    let entries = fs::read_dir(dir).map_err(io_err(dir))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InvalidArgument("no scenario files (*.json) in directory"));
    }
    let mut items = Vec::new();
    for path in &paths {
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        match read_scenario(path).and_then(|file| file.to_bundle()) {
            Ok(bundle) => items.push((id, bundle)),
            Err(err) => eprintln!("skipping {}: {err}", path.display()),
        }
    }
    if items.is_empty() {
        return Err(Error::InvalidArgument("no readable scenarios in directory"));
    }
    Ok(items)
}

fn eval_config(args: &EvalArgs) -> EvalConfig {
    EvalConfig {
        w_grid: args.w_grid.clone(),
        modes: args.modes.clone(),
        flow_weighting: args.flow_weighting,
        oracle_restarts: args.oracle_restarts,
        oracle_iters: args.oracle_iters,
        oracle_seed: args.seed,
    }
}

fn print_means<W: Write>(out: &mut W, means: &[GroupSummary]) -> std::io::Result<()> {
    writeln!(out, "aggregation: mean over scenarios per (kind, w, mode)")?;
    for m in means {
        writeln!(
            out,
            "  kind={} w={} mode={}: rot_err_deg={:e} trans_err={:e} pp_mse={:e} oracle_gap={:e} n={}",
            m.kind,
            m.w,
            m.mode,
            m.mean_rot_err_deg,
            m.mean_trans_err,
            m.mean_pp_mse,
            m.mean_oracle_gap,
            m.count
        )?;
    }
    Ok(())
}

/// CSV goes to --out (means to stdout) or to stdout (means to stderr), so
/// piping the CSV never mixes in the summary.
fn emit<S: Serialize>(
    rows: &[S],
    means_text: &[u8],
    out: Option<&Path>,
) -> Result<()> {
    match out {
        Some(path) => {
            let file = fs::File::create(path).map_err(io_err(path))?;
            write_metrics_csv(file, rows)?;
            std::io::stdout()
                .write_all(means_text)
                .map_err(io_err(Path::new("<stdout>")))?;
        }
        None => {
            write_metrics_csv(std::io::stdout().lock(), rows)?;
            std::io::stderr()
                .write_all(means_text)
                .map_err(io_err(Path::new("<stderr>")))?;
        }
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let items = load_scenarios(&args.scenario_dir)?;
    let rows = eval_bundles(&items, &eval_config(&args))?;
    let mut means_text = Vec::new();
    print_means(&mut means_text, &group_means(&rows)).expect("write to Vec");
    emit(&rows, &means_text, args.out.as_deref())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let items = load_scenarios(&args.eval.scenario_dir)?;
    let rows = sweep_bundles(&items, args.corruption, &args.levels, &eval_config(&args.eval))?;
    let mut means_text = Vec::new();
    for &level in &args.levels {
        let level_rows: Vec<MetricsRow> = rows
            .iter()
            .filter(|r| r.level == level)
            .map(|r| MetricsRow {
                scenario_id: r.scenario_id.clone(),
                kind: r.kind.clone(),
                w: r.w,
                mode: r.mode.clone(),
                rot_err_deg: r.rot_err_deg,
                trans_err: r.trans_err,
                pp_mse: r.pp_mse,
                objective: r.objective,
                oracle_gap: r.oracle_gap,
            })
            .collect();
        writeln!(means_text, "corruption={} level={}", args.corruption, level).expect("write to Vec");
        print_means(&mut means_text, &group_means(&level_rows)).expect("write to Vec");
    }
    emit(&rows, &means_text, args.eval.out.as_deref())
}
