use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tia::differ::DiffOptions;
use tia::mapstore::SelectionReport;
use tia::mutator::{evaluate, EvalOptions, MutationOperator};
use tia::pipeline::{
    analyze_git, cmd_analyze, cmd_pipeline, cmd_pipeline_git, cmd_run_traced, cmd_select, corpus, load_suite, Analysis,
    CorpusLayout, PipelineError, RunManifest,
};
use tia::runtime::{RunConfig, DEFAULT_STEP_BUDGET};

#[derive(Parser)]
#[command(name = "tia", version, about = "Method-level test impact analysis for MiniJ programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the modified methods between two program versions.
    Analyze {
        #[command(flatten)]
        versions: Versions,
        /// Program directory inside the git work tree.
        #[arg(long, default_value = "src")]
        src: String,
        #[arg(long, default_value = "changes.txt")]
        out: PathBuf,
        #[command(flatten)]
        diff: DiffArgs,
    },
    /// Select the tests affected by a change set.
    Select {
        #[arg(long)]
        changes: PathBuf,
        #[command(flatten)]
        corpus: CorpusArgs,
    },
    /// Run tests, refresh the map and write a manifest.
    Run {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Run the selection recorded in this manifest instead of the whole suite.
        #[arg(long)]
        selection: Option<PathBuf>,
        #[command(flatten)]
        exec: ExecArgs,
    },
    /// Analyze, select and run in one go.
    Pipeline {
        #[command(flatten)]
        versions: Versions,
        #[arg(long, default_value = "src")]
        src: String,
        /// Commit the refreshed map (git mode only).
        #[arg(long, requires = "git")]
        commit_map: bool,
        #[command(flatten)]
        diff: DiffArgs,
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        exec: ExecArgs,
    },
    /// Print a readable summary of a manifest.
    Report {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Compare mutants killed by the whole suite and by the selected tests.
    Mutate {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Comma-separated operator names, or `all`.
        #[arg(long, default_value = "all")]
        operators: String,
        #[arg(long)]
        no_coverage_filter: bool,
        #[arg(long, default_value = "matrix.tsv")]
        out: PathBuf,
    },
}

#[derive(Args)]
#[group(required = true, multiple = true)]
struct Versions {
    #[arg(long, requires = "new", conflicts_with = "git")]
    old: Option<PathBuf>,
    #[arg(long, requires = "old", conflicts_with = "git")]
    new: Option<PathBuf>,
    /// Compare HEAD^ with HEAD in this work tree.
    #[arg(long)]
    git: Option<PathBuf>,
}

#[derive(Args)]
struct DiffArgs {
    /// Also mark surviving overrides of removed or reshaped methods. Catches
    /// tests whose calls were bound to the removed method but dispatched to an
    /// override.
    #[arg(long)]
    safe_removal: bool,
}

impl DiffArgs {
    fn options(&self) -> DiffOptions {
        DiffOptions { safe_removal: self.safe_removal }
    }
}

#[derive(Args)]
struct CorpusArgs {
    /// Corpus root holding `src/`, `tests/` and `tia.map`.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long = "src-dir")]
    src_dir: Option<PathBuf>,
    #[arg(long = "tests-dir")]
    tests_dir: Option<PathBuf>,
    /// Map file; `TIA_MAP_PATH` also overrides the default.
    #[arg(long)]
    map: Option<PathBuf>,
    /// Where manifests are written, default `<corpus>/manifests`.
    #[arg(long)]
    manifest_dir: Option<PathBuf>,
}

impl CorpusArgs {
    fn layout(&self) -> CorpusLayout {
        let mut layout = CorpusLayout::new(&self.corpus);
        if let Some(d) = &self.src_dir {
            layout = layout.with_src(d);
        }
        if let Some(d) = &self.tests_dir {
            layout = layout.with_tests(d);
        }
        if let Some(m) = &self.map {
            layout = layout.with_map(m);
        }
        layout
    }

    fn manifest_dir(&self) -> PathBuf {
        self.manifest_dir.clone().unwrap_or_else(|| self.corpus.join("manifests"))
    }
}

#[derive(Args)]
struct ExecArgs {
    /// Record only classes starting with one of these prefixes.
    #[arg(long, value_delimiter = ',')]
    filter: Option<Vec<String>>,
    #[arg(long, default_value_t = DEFAULT_STEP_BUDGET)]
    step_budget: u64,
    /// Write one `<test>.trace` file per executed test here.
    #[arg(long)]
    trace_dir: Option<PathBuf>,
}

impl ExecArgs {
    fn config(&self) -> RunConfig {
        RunConfig { step_budget: self.step_budget, filter: self.filter.clone(), ..RunConfig::default() }
    }
}

fn write(path: &Path, text: &str) -> Result<(), PipelineError> {
    fs::write(path, text).map_err(|e| PipelineError::Io { path: path.to_path_buf(), source: e })
}

fn read(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|e| PipelineError::Io { path: path.to_path_buf(), source: e })
}

fn finish(manifest: &RunManifest, dir: &Path) -> Result<u8, PipelineError> {
    let path = manifest.write_new(dir)?;
    print!("{}", manifest.report());
    println!("manifest: {}", path.display());
    Ok(manifest.exit_code() as u8)
}

fn run(cli: Cli) -> Result<u8, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Analyze { versions, src, out, diff } => {
            let (analysis, _) = match (&versions.git, &versions.old, &versions.new) {
                (Some(wt), _, _) => analyze_git(wt, &src, diff.options())?,
                (None, Some(old), Some(new)) => cmd_analyze(old, new, diff.options())?,
                _ => return Err("give --old and --new, or --git".into()),
            };
            write(&out, &analysis.render())?;
            match &analysis {
                Analysis::Changes(h) => println!("{} modified method(s) written to {}", h.len(), out.display()),
                Analysis::FailSafe(reason) => println!("fail-safe ({reason}); all tests will be selected"),
            }
            Ok(0)
        }
        Command::Select { changes, corpus } => {
            let analysis = Analysis::parse(&read(&changes)?)?;
            let mut manifest = RunManifest::now();
            manifest.selection = Some(cmd_select(&analysis, &corpus.layout())?);
            manifest.analysis = Some(analysis);
            Ok(finish(&manifest, &corpus.manifest_dir())?)
        }
        Command::Run { corpus, selection, exec } => {
            let layout = corpus.layout();
            let mut manifest = RunManifest::now();
            let report = match &selection {
                Some(path) => {
                    let recorded = RunManifest::parse(&read(path)?)?;
                    manifest.analysis = recorded.analysis;
                    recorded.selection.ok_or_else(|| format!("{} records no selection", path.display()))?
                }
                None => SelectionReport::all(&load_suite(&layout.test_dir)?),
            };
            manifest.selection = Some(report.clone());
            cmd_run_traced(&report, &layout, &exec.config(), exec.trace_dir.as_deref(), &mut manifest)?;
            Ok(finish(&manifest, &corpus.manifest_dir())?)
        }
        Command::Pipeline { versions, src, commit_map, diff, corpus, exec } => {
            let layout = corpus.layout();
            let manifest = match (&versions.git, &versions.old, &versions.new) {
                (Some(wt), _, _) => {
                    let layout = if corpus.src_dir.is_none() { layout.with_src(&wt.join(&src)) } else { layout };
                    cmd_pipeline_git(wt, &src, &layout, &exec.config(), diff.options(), commit_map)?
                }
                (None, Some(old), Some(new)) => cmd_pipeline(old, new, &layout, &exec.config(), diff.options())?,
                _ => return Err("give --old and --new, or --git".into()),
            };
            Ok(finish(&manifest, &corpus.manifest_dir())?)
        }
        Command::Report { manifest } => {
            print!("{}", RunManifest::parse(&read(&manifest)?)?.report());
            Ok(0)
        }
        Command::Mutate { corpus, operators, no_coverage_filter, out } => {
            let layout = corpus.layout();
            let ops = MutationOperator::parse_list(&operators)?;
            let program = corpus::parse_snapshot(&corpus::read_snapshot(&layout.src_dir)?)?;
            let suite = load_suite(&layout.test_dir)?;
            let options = EvalOptions { coverage_filter: !no_coverage_filter, ..EvalOptions::default() };
            let evaluation = evaluate(&program, &suite, &ops, &options)?;
            write(&out, &evaluation.matrix_tsv())?;
            println!("{}", evaluation.summary);
            println!("matrix: {}", out.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("tia: {e}");
            ExitCode::from(2)
        }
    }
}
