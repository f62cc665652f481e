use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use igmd_core::eval::{GridReport, REPORT_COLUMNS};
use igmd_core::model_file::checksum;
use igmd_core::{
    binarize_labels, explain, load_csv, load_model, ranking_score, run_split_grid, save_model,
    split, train, Instance, LabelColumn, Model, PrecisionSet, RawDataset,
};

const EXIT_DATA: u8 = 3;
const EXIT_RUNTIME: u8 = 4;

#[derive(Parser)]
#[command(name = "igmd", version, about = "Coherent-pattern intrusion detection")]
struct Cli {
    /// Log progress to stderr
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mine a model from labelled flow records
    Train(TrainArgs),
    /// Classify records with a trained model
    Predict(PredictArgs),
    /// Run the nine-ratio train/test grid
    Evaluate(EvaluateArgs),
    /// Show the patterns behind one record's verdict
    Explain(ExplainArgs),
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Input CSV
    #[arg(long)]
    data: PathBuf,
    /// Label column: header name, zero-based index, "last" or "none"
    #[arg(long)]
    label_column: Option<LabelColumn>,
    /// Label value denoting benign traffic; every other value is anomalous
    #[arg(long, default_value = "Normal")]
    normal_label: String,
    /// The CSV has no header row
    #[arg(long)]
    no_header: bool,
}

impl DataArgs {
    fn label_column(&self) -> LabelColumn {
        self.label_column.clone().unwrap_or_default()
    }

    fn config(&self) -> Vec<(String, String)> {
        vec![
            ("data".into(), self.data.display().to_string()),
            ("label_column".into(), self.label_column().to_string()),
            ("normal_label".into(), self.normal_label.clone()),
            ("has_header".into(), (!self.no_header).to_string()),
        ]
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Where to write the model
    #[arg(long)]
    model: PathBuf,
    /// Comma-separated z-score rounding precisions
    #[arg(long, default_value = "0,1")]
    precisions: PrecisionSet,
    /// Guard-band width in normal-score standard deviations
    #[arg(long, default_value_t = 3.0)]
    r: f64,
    /// Train on a stratified sample of this fraction instead of every row
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    model: PathBuf,
    /// Verdict CSV (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Must match the model's precisions if given
    #[arg(long)]
    precisions: Option<PrecisionSet>,
    /// Must match the model's r if given
    #[arg(long)]
    r: Option<f64>,
}

#[derive(Args)]
struct ExplainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    model: PathBuf,
    /// Zero-based row ordinal of the record to explain
    #[arg(long)]
    id: usize,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "0,1")]
    precisions: PrecisionSet,
    /// Also evaluate this precision set on the same splits for comparison
    #[arg(long)]
    baseline_precisions: Option<PrecisionSet>,
    #[arg(long, default_value_t = 3.0)]
    r: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Seeds per ratio; metrics are summarized as mean and std
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Report CSV
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(level)),
        )
        .with_writer(io::stderr)
        .init();

    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Explain(a) => cmd_explain(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let data = err
                .chain()
                .filter_map(|e| e.downcast_ref::<igmd_core::Error>())
                .any(|e| e.is_data_error());
            ExitCode::from(if data { EXIT_DATA } else { EXIT_RUNTIME })
        }
    }
}

fn load(
    args: &DataArgs,
    label: &LabelColumn,
) -> anyhow::Result<(RawDataset<f64>, Vec<Instance<f64>>)> {
    let raw: RawDataset<f64> =
        load_csv(&args.data, label, !args.no_header).context("load stage")?;
    let instances = binarize_labels(&raw, &args.normal_label);
    Ok((raw, instances))
}

fn write_output(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => io::stdout()
            .write_all(text.as_bytes())
            .context("writing stdout"),
    }
}

fn provenance(command: &str, config: &[(String, String)]) -> String {
    let mut out = format!("# igmd {command} {}\n", env!("CARGO_PKG_VERSION"));
    for (k, v) in config {
        out.push_str(&format!("# {k}={v}\n"));
    }
    out
}

fn cmd_train(args: TrainArgs) -> anyhow::Result<()> {
    let (raw, instances) = load(&args.data, &args.data.label_column())?;
    let train_set = match args.train_fraction {
        Some(f) => split(&instances, f, args.seed).context("split stage")?.0,
        None => instances,
    };
    let outcome = train(
        &train_set,
        &raw.attribute_names,
        args.precisions.clone(),
        args.r,
    )
    .context("training")?;

    let mut meta = args.data.config();
    meta.extend([
        ("label_name".into(), raw.label_name.clone()),
        ("precisions".into(), args.precisions.to_string()),
        ("r".into(), args.r.to_string()),
        (
            "train_fraction".into(),
            args.train_fraction
                .map_or_else(|| "all".into(), |f| f.to_string()),
        ),
        ("seed".into(), args.seed.to_string()),
    ]);
    let text = save_model(&outcome.store, &meta);
    fs::write(&args.model, &text).with_context(|| format!("writing {}", args.model.display()))?;

    let store = &outcome.store;
    println!("model      {}", args.model.display());
    println!(
        "instances  {} trained, {} kept, {} removed as contradictory",
        train_set.len(),
        outcome.kept,
        outcome.removed.len()
    );
    for layer in store.summary() {
        println!(
            "layer p={:<3} {:>8} normal patterns {:>8} anomalous patterns",
            layer.precision, layer.normal, layer.anomalous
        );
    }
    if let Some(g) = store.guard_band() {
        println!(
            "guard band mu_n={} sigma_n={} r={} threshold={}",
            g.mu_n,
            g.sigma_n,
            g.r,
            g.threshold()
        );
    }
    Ok(())
}

/// Loads a model and the records to score with it, checking that the
/// record columns match the model's attributes.
fn load_for_model(
    data: &DataArgs,
    model_path: &Path,
) -> anyhow::Result<(Model, String, Vec<Instance<f64>>)> {
    let text = fs::read_to_string(model_path)
        .with_context(|| format!("reading model {}", model_path.display()))?;
    let loaded = load_model::<f64>(&text).context("loading model")?;
    let store = loaded.store;

    let label = match &data.label_column {
        Some(l) => l.clone(),
        None => {
            let trained = loaded
                .metadata
                .iter()
                .find(|(k, _)| k == "label_name")
                .map(|(_, v)| v.clone())
                .unwrap_or_default();
            if !data.no_header && header_contains(&data.data, &trained)? {
                LabelColumn::Named(trained)
            } else {
                LabelColumn::Absent
            }
        }
    };
    let (raw, instances) = load(data, &label)?;
    let expected: Vec<&str> = store
        .discretizer()
        .attributes
        .iter()
        .map(|a| &**a)
        .collect();
    check_schema(&expected, &raw.attribute_names, data.no_header)?;
    Ok((store, loaded.checksum, instances))
}

fn header_contains(path: &Path, name: &str) -> anyhow::Result<bool> {
    if name.is_empty() {
        return Ok(false);
    }
    let header: RawDataset<f64> =
        load_csv(path, &LabelColumn::Absent, true).context("load stage")?;
    Ok(header.attribute_names.iter().any(|h| h == name))
}

fn check_schema(expected: &[&str], found: &[String], headerless: bool) -> anyhow::Result<()> {
    for column in 0..expected.len().max(found.len()) {
        let e = expected.get(column).copied();
        let f = found.get(column).map(String::as_str);
        let ok = match (e, f) {
            (Some(e), Some(f)) => headerless || e == f,
            _ => false,
        };
        if !ok {
            return Err(igmd_core::Error::SchemaMismatch {
                column,
                expected: e.unwrap_or("<none>").to_string(),
                found: f.unwrap_or("<none>").to_string(),
            })
            .context("schema check");
        }
    }
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> anyhow::Result<()> {
    let (store, model_sum, instances) = load_for_model(&args.data, &args.model)?;
    let own = &store.discretizer().precisions;
    if let Some(p) = &args.precisions {
        if p != own {
            bail!("model was trained with precisions {own}; refusing override {p}");
        }
    }
    let gb = store.guard_band().copied();
    if let (Some(r), Some(g)) = (args.r, gb) {
        if r != g.r {
            bail!(
                "model was calibrated with r={}; refusing override r={r}",
                g.r
            );
        }
    }

    let mut config = args.data.config();
    config.push(("model".into(), args.model.display().to_string()));
    config.push(("model_checksum".into(), model_sum));
    config.push(("precisions".into(), own.to_string()));
    if let Some(g) = gb {
        config.push(("r".into(), g.r.to_string()));
    }
    let mut out = provenance("predict", &config);
    out.push_str("id,label,rule,ns,as,ranking_score\n");
    for inst in &instances {
        let v = store.predict(inst).context("scoring")?;
        let rank: f64 = ranking_score(&v.scores);
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            inst.id, v.label, v.rule, v.scores.ns, v.scores.as_, rank
        ));
    }
    write_output(args.out.as_deref(), &out)
}

fn cmd_explain(args: ExplainArgs) -> anyhow::Result<()> {
    let (store, model_sum, instances) = load_for_model(&args.data, &args.model)?;
    let Some(inst) = instances.iter().find(|i| i.id == args.id) else {
        bail!(
            "no record with id {} ({} records in {})",
            args.id,
            instances.len(),
            args.data.data.display()
        );
    };
    let v = store.predict(inst).context("scoring")?;
    let e = explain(&v, &store);
    println!("record {} of {}", args.id, args.data.data.display());
    println!("model {} (sha256 {model_sum})", args.model.display());
    print!("{e}");
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> anyhow::Result<()> {
    if args.repeats == 0 {
        bail!("--repeats must be at least 1");
    }
    let (raw, instances) = load(&args.data, &args.data.label_column())?;
    let mut sets = vec![args.precisions.clone()];
    if let Some(b) = &args.baseline_precisions {
        sets.push(b.clone());
    }
    let mut reports: Vec<GridReport<f64>> = Vec::new();
    for p in &sets {
        let report = run_split_grid(
            &instances,
            &raw.attribute_names,
            p,
            args.r,
            args.seed,
            args.repeats,
        )
        .with_context(|| format!("evaluating precisions {p}"))?;
        reports.push(report);
    }

    let mut config = args.data.config();
    config.extend([
        ("precisions".into(), args.precisions.to_string()),
        (
            "baseline_precisions".into(),
            args.baseline_precisions
                .as_ref()
                .map_or_else(|| "none".into(), |p| p.to_string()),
        ),
        ("r".into(), args.r.to_string()),
        ("seed".into(), args.seed.to_string()),
        ("repeats".into(), args.repeats.to_string()),
        ("data_sha256".into(), checksum(&fs::read(&args.data.data)?)),
    ]);
    let mut csv = provenance("evaluate", &config);
    csv.push_str(&REPORT_COLUMNS.join(","));
    csv.push('\n');
    for r in &reports {
        csv.push_str(&r.csv_rows());
    }
    if let Some(out) = &args.out {
        write_output(Some(out), &csv)?;
    }
    for r in &reports {
        println!("{}", r.render_table());
    }
    Ok(())
}
