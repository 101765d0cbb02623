use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tabsan::adversarial::{load_checkpoint, save_checkpoint, AdversarialSanitizer};
use tabsan::dataset::{load_csv, save_csv, RecordTable};
use tabsan::metrics::score;
use tabsan::runner::{
    emit_report, verify_published_fixtures, BackendKind, EvaluationReport, Experiment,
    ExperimentConfig, MechanismSpec, ReportFormat, Task, FIXTURE_TOLERANCE,
};

#[derive(Parser)]
#[command(
    name = "tabsan",
    version,
    about = "Sanitize tabular records and measure attribute inference"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON); built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// 1: gender private, income utility. 2: roles swapped.
    #[arg(long, global = true, value_parser = clap::value_parser!(u8).range(1..=2))]
    task: Option<u8>,
    /// Mechanism id (none, alfr, uae_pupet, llm:p1, llm:p2, llm:combined,
    /// llm:unsupervised); repeatable.
    #[arg(long, global = true)]
    mechanism: Vec<String>,
    /// Run a single seed instead of the configured list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendArg>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Mock,
    Live,
}

#[derive(Subcommand)]
enum Command {
    /// Load the data, split it and write the schema and both splits.
    Prepare,
    /// Train an adversarial sanitizer on the auxiliary split.
    TrainAdv,
    /// Apply a mechanism to the test split.
    Sanitize {
        /// Reuse a generator written by `train-adv`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Fit the attackers on the auxiliary split and score them on a table.
    Attack {
        /// CSV to attack; the seed's test split when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Run the full pipeline and write every report artifact.
    Evaluate,
    /// Recompute the published leakage and utility ratios.
    VerifyFixtures,
    /// Re-render a machine report into text and plot data.
    Report {
        /// `report.json`; `<out>/report.json` when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(t) = c.task {
        cfg.task = Task::from_number(t).expect("clap restricts the range");
    }
    if !c.mechanism.is_empty() {
        cfg.mechanisms = c
            .mechanism
            .iter()
            .map(|m| MechanismSpec::parse(m).with_context(|| format!("unknown mechanism `{m}`")))
            .collect::<Result<_>>()?;
    }
    if let Some(s) = c.seed {
        cfg.seeds = vec![s];
    }
    if let Some(b) = c.backend {
        cfg.backend.kind = match b {
            BackendArg::Mock => BackendKind::Mock,
            BackendArg::Live => BackendKind::Live,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

/// The one mechanism a single-mechanism command acts on.
fn single_mechanism(cfg: &ExperimentConfig) -> Result<MechanismSpec> {
    match cfg.mechanisms.as_slice() {
        [m] => Ok(*m),
        [] => bail!("pass --mechanism"),
        _ => bail!("this command takes exactly one --mechanism"),
    }
}

fn mkdir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn prepare(exp: &Experiment, seed: u64, out: &Path) -> Result<()> {
    let (aux, test) = exp.split(seed)?;
    mkdir(out)?;
    write_json(&out.join("schema.json"), &exp.table.schema)?;
    save_csv(&aux, out.join(format!("aux_seed{seed}.csv")))?;
    save_csv(&test, out.join(format!("test_seed{seed}.csv")))?;
    println!(
        "{} rows: {} auxiliary, {} test (schema {})",
        exp.table.len(),
        aux.len(),
        test.len(),
        exp.table.schema.fingerprint()
    );
    Ok(())
}

fn train_adv(exp: &Experiment, mech: MechanismSpec, seed: u64, out: &Path) -> Result<()> {
    let MechanismSpec::Adversarial(variant) = mech else {
        bail!("train-adv needs an adversarial mechanism, got `{mech}`");
    };
    let (aux, _) = exp.split(seed)?;
    let san = exp.train_adversarial(variant, &aux, seed)?;
    mkdir(out)?;
    let path = out.join(format!("{}_seed{seed}.json", variant.id()));
    save_checkpoint(&san, &path)?;
    if let Some(last) = san.trace.epochs.last() {
        println!("final epoch: {last:?}");
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn sanitize(
    exp: &Experiment,
    mech: MechanismSpec,
    seed: u64,
    checkpoint: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let (aux, test) = exp.split(seed)?;
    let output = match (mech, checkpoint) {
        (MechanismSpec::Adversarial(_), Some(p)) => {
            let san: AdversarialSanitizer<f64> = load_checkpoint(p, &test.schema)?;
            san.sanitize_table(&test)?
        }
        (_, Some(_)) => bail!("--checkpoint applies to adversarial mechanisms only"),
        _ => exp.apply(mech, &aux, &test, seed)?,
    };
    mkdir(out)?;
    let stem = format!("sanitized_{}_seed{seed}", mech.id().replace(':', "-"));
    save_csv(&output.table, out.join(format!("{stem}.csv")))?;
    write_json(
        &out.join(format!("{stem}.records.json")),
        &serde_json::json!({
            "mechanism": output.mechanism,
            "variant": output.variant,
            "counts": output.counts(),
            "settings": output.settings,
            "records": output.records,
        }),
    )?;
    let c = output.counts();
    println!(
        "{}: {} sanitized, {} passed through, {} dropped",
        mech, c.sanitized, c.passthrough, c.dropped
    );
    Ok(())
}

fn attack(exp: &Experiment, seed: u64, input: Option<&Path>, out: &Path) -> Result<()> {
    let (aux, test) = exp.split(seed)?;
    let target_table: RecordTable = match input {
        Some(p) => load_csv(p, &exp.table.schema)?,
        None => test,
    };
    let attackers = exp.fit_attackers(&aux, seed)?;
    let mut rows = Vec::new();
    for ((kind, target), model) in &attackers {
        let pred = model.predict(&target_table)?;
        let s = score(&pred, &target.labels(&target_table))?;
        println!(
            "{:<24} {:<8} accuracy {:.4}  f1 {:.4}",
            kind.label(),
            target.id(),
            s.accuracy,
            s.f1
        );
        rows.push(serde_json::json!({
            "classifier": kind,
            "target": target,
            "accuracy": s.accuracy,
            "f1": s.f1,
        }));
    }
    mkdir(out)?;
    write_json(&out.join(format!("attack_seed{seed}.json")), &rows)?;
    Ok(())
}

fn evaluate(cfg: ExperimentConfig, out: &Path) -> Result<()> {
    let started = unix_now();
    let exp = Experiment::new(cfg)?;
    let report = exp.run()?;
    let files = emit_report(&report, &ReportFormat::ALL, out)?;
    // timestamps live outside report.json so that file stays reproducible
    write_json(
        &out.join("run_meta.json"),
        &serde_json::json!({
            "started_unix": started,
            "finished_unix": unix_now(),
            "config_hash": report.provenance.config_hash,
        }),
    )?;
    print!("{}", std::fs::read_to_string(out.join("report.txt"))?);
    println!("wrote {} files to {}", files.len() + 1, out.display());
    if !report.is_complete() {
        bail!(
            "{} stage(s) failed; the report is partial",
            report.failures.len()
        );
    }
    Ok(())
}

fn verify_fixtures() -> Result<()> {
    let checks = verify_published_fixtures();
    for c in &checks {
        println!(
            "{} {:<10} {} {}: expected {:.2}, computed {:.4}",
            if c.passed { "PASS" } else { "FAIL" },
            c.mechanism,
            c.task.id(),
            c.quantity,
            c.expected,
            c.computed
        );
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        bail!(
            "{failed} of {} fixture values outside ±{FIXTURE_TOLERANCE}",
            checks.len()
        );
    }
    Ok(())
}

fn rerender(input: &Path, out: &Path) -> Result<()> {
    let text =
        std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let report = EvaluationReport::from_json(&text)?;
    emit_report(&report, &[ReportFormat::Human, ReportFormat::Plots], out)?;
    print!("{}", std::fs::read_to_string(out.join("report.txt"))?);
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let out = cli.common.out.clone();
    match cli.command {
        Command::VerifyFixtures => verify_fixtures(),
        Command::Report { input } => {
            let input = input.unwrap_or_else(|| out.join("report.json"));
            rerender(&input, &out)
        }
        Command::Evaluate => evaluate(load_config(&cli.common)?, &out),
        cmd => {
            let cfg = load_config(&cli.common)?;
            let seed = cfg.seeds[0];
            let mech = match cmd {
                Command::TrainAdv | Command::Sanitize { .. } => Some(single_mechanism(&cfg)?),
                _ => None,
            };
            let exp = Experiment::new(cfg)?;
            match cmd {
                Command::Prepare => prepare(&exp, seed, &out),
                Command::TrainAdv => train_adv(&exp, mech.expect("set above"), seed, &out),
                Command::Sanitize { checkpoint } => sanitize(
                    &exp,
                    mech.expect("set above"),
                    seed,
                    checkpoint.as_deref(),
                    &out,
                ),
                Command::Attack { input } => attack(&exp, seed, input.as_deref(), &out),
                _ => unreachable!("handled above"),
            }
        }
    }
}
