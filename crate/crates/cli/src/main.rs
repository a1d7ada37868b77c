use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use murmurlab::corpus::{load_table, save_table, table_to_csv, FieldReader, MurmurIntensity, TableRow, Workspace};
use murmurlab::featureset::FeatureVector;
use murmurlab::learners::EnsembleModel;
use murmurlab::pipeline::stages::{Runner, StageStatus, ALPHA_FILE, FEATURES_FILE, SELECTION_FILE, SUMMARY_FILE};
use murmurlab::labelkit::SelectionReportRow;
use murmurlab::pipeline::{AlphaRow, Config, PipelineError, Stage};

#[derive(Debug, Parser)]
#[command(name = "murmurlab", version, about = "Heart murmur label-noise workbench")]
struct Cli {
    /// Workspace root holding recordings/, labels/, features/, models/, reports/.
    #[arg(long, global = true, default_value = "workspace")]
    workspace: PathBuf,
    /// TOML config; every key must be present (see --print-config).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the run seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Rerun stages even when their inputs are unchanged.
    #[arg(long, global = true)]
    force: bool,
    /// Print the effective config as TOML and exit.
    #[arg(long)]
    print_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic recordings, truth.csv and labelmatrix.csv.
    Synth,
    /// Band-pass, envelope and S1 detection per recording.
    Segment,
    /// Krippendorff alpha of the label matrix after each selection step.
    Alpha,
    /// Four-step agreement filter and majority vote.
    Select,
    /// Per-cycle feature vectors.
    Features,
    /// Grouped stratified train/test split.
    Split,
    /// Fit every configured classifier on SC and HQ labels.
    Train,
    /// Score the trained models on the test recordings.
    Evaluate,
    /// Write and print the run summary.
    Report,
    /// Every stage in order.
    Run,
    /// Apply a saved model to a feature table.
    Predict {
        /// Model file written by `train`.
        #[arg(long)]
        model: PathBuf,
        /// Feature table; defaults to the workspace features.csv.
        #[arg(long)]
        features: Option<PathBuf>,
        /// Output CSV; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the labeling API for this workspace (address from MURMURLAB_BIND).
    Serve,
}

#[derive(Debug)]
enum CliError {
    Pipeline(PipelineError),
    Serve(murmurlab_annotsvc::ServeError),
    User(String),
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Pipeline(e) => e.exit_code() as u8,
            CliError::Serve(murmurlab_annotsvc::ServeError::Store(_)) | CliError::User(_) => 1,
            CliError::Serve(_) | CliError::Internal(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Pipeline(e) => e.fmt(f),
            CliError::Serve(e) => e.fmt(f),
            CliError::User(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::Pipeline(e)
    }
}

/// One line of `predict` output.
struct Prediction {
    recording_id: String,
    cycle_index: usize,
    predicted: MurmurIntensity,
}

impl TableRow for Prediction {
    fn columns() -> Vec<String> {
        ["recording_id", "cycle_index", "predicted"].map(String::from).to_vec()
    }

    fn to_fields(&self) -> Vec<String> {
        vec![
            self.recording_id.clone(),
            self.cycle_index.to_string(),
            self.predicted.as_str().to_string(),
        ]
    }

    fn from_fields(f: &FieldReader<'_>) -> Result<Self, String> {
        Ok(Self {
            recording_id: f.str("recording_id")?.to_string(),
            cycle_index: f.parse("cycle_index")?,
            predicted: f.parse("predicted")?,
        })
    }
}

fn config(cli: &Cli) -> Result<Config, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn stage_of(cmd: &Command) -> Option<Stage> {
    Some(match cmd {
        Command::Synth => Stage::Synth,
        Command::Segment => Stage::Segment,
        Command::Alpha => Stage::Alpha,
        Command::Select => Stage::Select,
        Command::Features => Stage::Features,
        Command::Split => Stage::Split,
        Command::Train => Stage::Train,
        Command::Evaluate => Stage::Evaluate,
        Command::Report => Stage::Report,
        Command::Run | Command::Predict { .. } | Command::Serve => return None,
    })
}

fn status_word(s: StageStatus) -> &'static str {
    match s {
        StageStatus::Ran => "done",
        StageStatus::UpToDate => "up to date",
        StageStatus::Skipped => "skipped (workspace has its own recordings)",
    }
}

fn read_output<R: TableRow>(stage: Stage, path: PathBuf) -> Result<Vec<R>, CliError> {
    load_table(&path).map_err(|e| CliError::Pipeline(PipelineError::stage(stage, e)))
}

fn print_alpha(ws: &Workspace) -> Result<(), CliError> {
    let rows: Vec<AlphaRow> = read_output(Stage::Alpha, ws.reports().join(ALPHA_FILE))?;
    println!("{:<8} {:>6} {:<10} {:>10}", "steps", "n", "statistic", "alpha");
    for r in rows {
        let alpha = r.alpha.map(|a| format!("{a:.4}")).unwrap_or_else(|| "-".into());
        println!("{:<8} {:>6} {:<10} {:>10}", r.steps, r.n_recordings, r.statistic, alpha);
    }
    Ok(())
}

fn print_selection(ws: &Workspace) -> Result<(), CliError> {
    let rows: Vec<SelectionReportRow> = read_output(Stage::Select, ws.labels().join(SELECTION_FILE))?;
    let mut per_step = [0usize; 4];
    let mut per_class = [0usize; 3];
    for r in &rows {
        if let Some(step) = r.removal_step {
            per_step[step as usize - 1] += 1;
        }
        if let Some(l) = r.mv_label {
            per_class[l.index()] += 1;
        }
    }
    println!("recordings {}", rows.len());
    for (i, n) in per_step.iter().enumerate() {
        println!("removed by step {} {n}", i + 1);
    }
    for (c, n) in MurmurIntensity::ALL.iter().zip(per_class) {
        println!("kept {} {n}", c.as_str());
    }
    Ok(())
}

fn predict(ws: &Workspace, model: &Path, features: Option<&Path>, out: Option<&Path>) -> Result<(), CliError> {
    let model = EnsembleModel::load(model).map_err(|e| CliError::User(format!("{}: {e}", model.display())))?;
    let path = features.map(Path::to_path_buf).unwrap_or_else(|| ws.features().join(FEATURES_FILE));
    if !path.exists() {
        return Err(CliError::User(format!("missing feature table {}", path.display())));
    }
    let rows: Vec<FeatureVector> = load_table(&path).map_err(|e| CliError::User(e.to_string()))?;
    let x: Vec<Vec<f64>> = rows.iter().map(|r| r.values.clone()).collect();
    let classes = model.predict(&x).map_err(|e| CliError::User(e.to_string()))?;
    let mut preds = Vec::with_capacity(rows.len());
    for (r, c) in rows.iter().zip(classes) {
        let predicted = *MurmurIntensity::ALL
            .get(c)
            .ok_or_else(|| CliError::User(format!("model predicts class {c}, expected a murmur intensity index")))?;
        preds.push(Prediction {
            recording_id: r.recording_id.clone(),
            cycle_index: r.cycle_index,
            predicted,
        });
    }
    match out {
        Some(out) => save_table(&preds, out).map_err(|e| CliError::Internal(e.to_string())),
        None => {
            let text = table_to_csv(&preds);
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Internal(e.to_string()))
        }
    }
}

fn serve(ws: &Workspace) -> Result<(), CliError> {
    let addr = murmurlab_annotsvc::bind_address();
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Internal(format!("tokio runtime: {e}")))?;
    rt.block_on(murmurlab_annotsvc::serve(ws, &addr, |local| {
        println!("listening on http://{local}");
        let _ = std::io::stdout().flush();
    }))
    .map_err(CliError::Serve)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let cfg = config(&cli)?;
    if cli.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let Some(cmd) = &cli.command else {
        return Err(CliError::User("no command given; see --help".into()));
    };
    let ws = Workspace::new(&cli.workspace);
    if let Some(stage) = stage_of(cmd) {
        let runner = Runner::new(ws.clone(), cfg).force(cli.force);
        let status = runner.run_stage(stage)?;
        eprintln!("{stage}: {}", status_word(status));
        match stage {
            Stage::Alpha => print_alpha(&ws)?,
            Stage::Select => print_selection(&ws)?,
            Stage::Report => {
                let text = std::fs::read_to_string(ws.reports().join(SUMMARY_FILE))
                    .map_err(|e| CliError::Internal(e.to_string()))?;
                print!("{text}");
            }
            _ => {}
        }
        return Ok(());
    }
    match cmd {
        Command::Run => {
            let runner = Runner::new(ws.clone(), cfg).force(cli.force);
            for (stage, status) in runner.run_all()? {
                eprintln!("{stage}: {}", status_word(status));
            }
            let text = std::fs::read_to_string(ws.reports().join(SUMMARY_FILE))
                .map_err(|e| CliError::Internal(e.to_string()))?;
            print!("{text}");
            Ok(())
        }
        Command::Predict { model, features, out } => predict(&ws, model, features.as_deref(), out.as_deref()),
        Command::Serve => serve(&ws),
        _ => unreachable!("stage commands handled above"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
