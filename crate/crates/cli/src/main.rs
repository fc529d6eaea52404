//! Command-line front end: ingestion, model fitting, likelihood-ratio tests,
//! variance decomposition, text properties, simulation, and the combined
//! report, with machine-readable JSON output.
//!
//! Exit codes: 0 success, 1 data or model-specification errors, 2 numerical
//! failures (non-convergence, singular systems).

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use indexmap::IndexMap;
use serde::Serialize;

use evalvar::data::{load_csv_delimited, ColumnSchema};
use evalvar::design::build_design;
use evalvar::fit::{fit, Criterion, FitOptions};
use evalvar::formula::ModelSpec;
use evalvar::inference::{glrt, glrt_conditional, ConditionalOptions};
use evalvar::report::{build_report, ReportConfig};
use evalvar::sim::{simulate, SimSpec};
use evalvar::text::{build_corpus_stats, readability, word_rarity};
use evalvar::vca::{compute_phi, reliable_at, vca, vca_with_interactions};
use evalvar::{Error, EvalDataset};

const SCHEMA_VERSION: &str = "1";

#[derive(Parser)]
#[command(
    name = "evalvar",
    version,
    about = "Mixed-effects analysis of ML evaluation scores: significance, variance components, reliability"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one mixed model and print estimates
    Fit(FitCmd),
    /// Likelihood-ratio test of nested models, or a conditional test
    Glrt(GlrtCmd),
    /// Variance component analysis and the reliability coefficient
    Vca(VcaCmd),
    /// Reliability coefficient from already-estimated variance components
    Reliability(ReliabilityCmd),
    /// Word rarity and reading ease for a corpus of texts
    Props(PropsCmd),
    /// Interaction of a factor with a covariate; emits a prediction grid
    Interact(InteractCmd),
    /// Generate a synthetic dataset from a JSON ground-truth spec
    Simulate(SimulateCmd),
    /// Full reproducibility report
    Report(ReportCmd),
}

#[derive(Args, Clone)]
struct DataArgs {
    /// CSV file with a header row
    #[arg(long)]
    data: PathBuf,
    /// JSON sidecar schema file;
    /// {"response": ..., "factors": [...], "covariates": [...], "object_of_interest": ...}
    #[arg(long, conflicts_with_all = ["response", "factors", "covariates"])]
    schema: Option<PathBuf>,
    /// Response column name
    #[arg(long)]
    response: Option<String>,
    /// Factor columns, comma separated
    #[arg(long, value_delimiter = ',')]
    factors: Vec<String>,
    /// Covariate columns, comma separated
    #[arg(long, value_delimiter = ',')]
    covariates: Vec<String>,
    /// Object-of-interest factor (defaults to the first factor)
    #[arg(long)]
    object: Option<String>,
    /// Input is tab-delimited
    #[arg(long)]
    tab: bool,
}

impl DataArgs {
    fn schema(&self) -> Result<ColumnSchema, Error> {
        let mut schema = match &self.schema {
            Some(path) => ColumnSchema::from_json_file(path)?,
            None => {
                let response = self.response.clone().ok_or_else(|| {
                    Error::Structural("either --schema or --response/--factors is required".into())
                })?;
                ColumnSchema::new(response, self.factors.clone(), self.covariates.clone())
            }
        };
        if let Some(object) = &self.object {
            schema.object_of_interest = Some(object.clone());
        }
        Ok(schema)
    }

    fn load(&self) -> Result<(EvalDataset, ColumnSchema), Error> {
        let schema = self.schema()?;
        let delim = if self.tab { b'\t' } else { b',' };
        let ds = load_csv_delimited(&self.data, &schema, delim)?;
        Ok((ds, schema))
    }
}

#[derive(Args, Clone)]
struct FitTuning {
    /// Maximum deviance evaluations
    #[arg(long = "max-iter", default_value_t = 10_000)]
    max_iter: usize,
    /// Relative deviance-change tolerance
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

impl FitTuning {
    fn options(&self) -> FitOptions {
        FitOptions {
            max_evals: self.max_iter,
            rel_tol: self.tol,
            ..Default::default()
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum CriterionArg {
    Ml,
    Reml,
}

impl From<CriterionArg> for Criterion {
    fn from(c: CriterionArg) -> Criterion {
        match c {
            CriterionArg::Ml => Criterion::Ml,
            CriterionArg::Reml => Criterion::Reml,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Table,
    Json,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum GridFormat {
    Csv,
    Json,
}

#[derive(Serialize)]
struct Envelope<C: Serialize, R: Serialize> {
    schema_version: &'static str,
    config: C,
    result: R,
}

fn emit<C: Serialize, R: Serialize>(
    output: &Option<PathBuf>,
    config: C,
    result: R,
) -> Result<(), Error> {
    let envelope = Envelope {
        schema_version: SCHEMA_VERSION,
        config,
        result,
    };
    let mut text = serde_json::to_string_pretty(&envelope)?;
    text.push('\n');
    write_output(output, &text)
}

/// Write to stdout, or atomically (temp file + rename) to a path.
fn write_output(output: &Option<PathBuf>, content: &str) -> Result<(), Error> {
    match output {
        None => {
            print!("{content}");
            Ok(())
        }
        Some(path) => {
            let dir = path.parent().unwrap_or_else(|| Path::new("."));
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            tmp.write_all(content.as_bytes())?;
            tmp.persist(path).map_err(|e| Error::Io(e.error))?;
            Ok(())
        }
    }
}

fn schema_echo(schema: &ColumnSchema) -> serde_json::Value {
    serde_json::json!({
        "response": schema.response,
        "factors": schema.factors,
        "covariates": schema.covariates,
        "object_of_interest": schema.object_of_interest,
    })
}

// ---------------------------------------------------------------- fit

#[derive(Args)]
struct FitCmd {
    #[command(flatten)]
    data: DataArgs,
    /// Model formula, e.g. "score ~ 1 + system + (1|sentence)"
    #[arg(long)]
    model: String,
    #[arg(long, value_enum, default_value = "reml")]
    criterion: CriterionArg,
    #[command(flatten)]
    tuning: FitTuning,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
    /// Write to a file instead of stdout
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn run_fit(cmd: &FitCmd) -> Result<(), Error> {
    let (ds, schema) = cmd.data.load()?;
    let spec = ModelSpec::parse(&cmd.model)?;
    let dm = build_design(&ds, &spec)?;
    let fm = fit(&dm, ds.response(), cmd.criterion.into(), &cmd.tuning.options())?;

    let config = serde_json::json!({
        "command": "fit",
        "data": cmd.data.data.display().to_string(),
        "schema": schema_echo(&schema),
        "model": spec.to_string(),
        "criterion": cmd.criterion,
        "max_iter": cmd.tuning.max_iter,
        "tol": cmd.tuning.tol,
    });

    match cmd.format {
        Format::Json => emit(&cmd.output, config, &fm),
        Format::Table => {
            let mut out = String::new();
            out.push_str(&format!("model: {spec}\ncriterion: {}\n\n", fm.criterion));
            out.push_str("fixed effects\n");
            for (name, b) in fm.column_names.iter().zip(&fm.beta) {
                out.push_str(&format!("  {name:<28} {b:>14.6}\n"));
            }
            out.push_str("\nvariance components\n");
            for (name, v) in &fm.sigma2 {
                out.push_str(&format!("  {name:<28} {v:>14.6}\n"));
            }
            out.push_str(&format!(
                "\nlog-likelihood {:.6}  deviance {:.6}\nconverged {} after {} evaluations\n",
                fm.log_likelihood, fm.deviance, fm.converged, fm.evals
            ));
            if !fm.dropped_columns.is_empty() {
                out.push_str(&format!("dropped aliased columns: {:?}\n", fm.dropped_columns));
            }
            write_output(&cmd.output, &out)
        }
    }
}

// ---------------------------------------------------------------- glrt

#[derive(Args)]
struct GlrtCmd {
    #[command(flatten)]
    data: DataArgs,
    /// Restricted (null) model formula
    #[arg(long, required_unless_present = "conditional")]
    restricted: Option<String>,
    /// General (alternative) model formula
    #[arg(long, required_unless_present = "conditional")]
    general: Option<String>,
    /// Run the data-property conditional test instead of explicit formulas
    #[arg(long, requires = "covariate", requires = "system")]
    conditional: bool,
    /// Covariate for the conditional test
    #[arg(long)]
    covariate: Option<String>,
    /// System factor for the conditional test
    #[arg(long)]
    system: Option<String>,
    /// Test only the interaction coefficient (df = 1)
    #[arg(long)]
    interaction_only: bool,
    /// Skip covariate standardization in the conditional test
    #[arg(long)]
    no_standardize: bool,
    #[command(flatten)]
    tuning: FitTuning,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn run_glrt(cmd: &GlrtCmd) -> Result<(), Error> {
    let (ds, schema) = cmd.data.load()?;
    if cmd.conditional {
        let covariate = cmd.covariate.as_deref().unwrap();
        let system = cmd.system.as_deref().unwrap();
        let object = cmd
            .data
            .object
            .clone()
            .unwrap_or_else(|| ds.object_of_interest().to_string());
        let opts = ConditionalOptions {
            interaction_only: cmd.interaction_only,
            standardize: !cmd.no_standardize,
            fit: cmd.tuning.options(),
        };
        let test = glrt_conditional(&ds, covariate, system, &object, &opts)?;
        let config = serde_json::json!({
            "command": "glrt",
            "data": cmd.data.data.display().to_string(),
            "schema": schema_echo(&schema),
            "conditional": true,
            "covariate": covariate,
            "system": system,
            "object": object,
            "interaction_only": cmd.interaction_only,
            "standardize": !cmd.no_standardize,
            "criterion": "ml",
            "max_iter": cmd.tuning.max_iter,
            "tol": cmd.tuning.tol,
        });
        let result = serde_json::json!({
            "stat": test.glrt.stat,
            "df": test.glrt.df,
            "p_value": test.glrt.p_value,
            "lambda_ratio": test.glrt.lambda_ratio,
            "effect_size": test.glrt.effect_size,
            "converged_restricted": test.glrt.converged_restricted,
            "converged_general": test.glrt.converged_general,
            "dropped_columns": test.glrt.dropped_columns,
            "lines": test.model.lines,
        });
        emit(&cmd.output, config, result)
    } else {
        let restricted = ModelSpec::parse(cmd.restricted.as_deref().unwrap())?;
        let general = ModelSpec::parse(cmd.general.as_deref().unwrap())?;
        let result = glrt(&ds, &restricted, &general, &cmd.tuning.options())?;
        let config = serde_json::json!({
            "command": "glrt",
            "data": cmd.data.data.display().to_string(),
            "schema": schema_echo(&schema),
            "restricted": restricted.to_string(),
            "general": general.to_string(),
            "criterion": "ml",
            "max_iter": cmd.tuning.max_iter,
            "tol": cmd.tuning.tol,
        });
        emit(&cmd.output, config, result)
    }
}

// ---------------------------------------------------------------- vca

#[derive(Args)]
struct VcaCmd {
    #[command(flatten)]
    data: DataArgs,
    /// Random factors, comma separated (object of interest first by
    /// convention)
    #[arg(long, value_delimiter = ',', required = true)]
    random: Vec<String>,
    /// Binary reliable/unreliable verdict at this threshold (e.g. 0.8)
    #[arg(long)]
    threshold: Option<f64>,
    #[command(flatten)]
    tuning: FitTuning,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn run_vca(cmd: &VcaCmd) -> Result<(), Error> {
    let (ds, schema) = cmd.data.load()?;
    let object = cmd
        .data
        .object
        .clone()
        .unwrap_or_else(|| ds.object_of_interest().to_string());
    let report = vca(&ds, &cmd.random, &object, &cmd.tuning.options())?;

    let config = serde_json::json!({
        "command": "vca",
        "data": cmd.data.data.display().to_string(),
        "schema": schema_echo(&schema),
        "random": cmd.random,
        "object": object,
        "criterion": "reml",
        "threshold": cmd.threshold,
        "max_iter": cmd.tuning.max_iter,
        "tol": cmd.tuning.tol,
    });

    match cmd.format {
        Format::Json => {
            let result = serde_json::json!({
                "report": report,
                "verdict": cmd.threshold.map(|t| if reliable_at(report.phi, t) { "reliable" } else { "unreliable" }),
            });
            emit(&cmd.output, config, result)
        }
        Format::Table => {
            let mut out = String::new();
            out.push_str(&format!(
                "{:<24} {:>12} {:>9}\n",
                "component", "variance", "percent"
            ));
            for c in &report.components {
                out.push_str(&format!(
                    "{:<24} {:>12.5} {:>9.1}\n",
                    c.name, c.variance, c.percent
                ));
            }
            out.push_str(&format!(
                "\nphi = {:.3} ({})\n",
                report.phi, report.interpretation
            ));
            if let Some(t) = cmd.threshold {
                out.push_str(&format!(
                    "verdict at {:.0}%: {}\n",
                    100.0 * t,
                    if reliable_at(report.phi, t) { "reliable" } else { "unreliable" }
                ));
            }
            write_output(&cmd.output, &out)
        }
    }
}

// ---------------------------------------------------------------- reliability

#[derive(Args)]
struct ReliabilityCmd {
    /// Variance components as inline JSON, e.g. '{"s":0.00923,"residual":0.00464}'
    #[arg(long)]
    components: String,
    /// Component whose variance is substantial
    #[arg(long)]
    object: String,
    /// Binary reliable/unreliable verdict at this threshold (e.g. 0.8)
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn run_reliability(cmd: &ReliabilityCmd) -> Result<(), Error> {
    let components: IndexMap<String, f64> = serde_json::from_str(&cmd.components)?;
    let (phi, interpretation) = compute_phi(&components, &cmd.object)?;
    let config = serde_json::json!({
        "command": "reliability",
        "components": components,
        "object": cmd.object,
        "threshold": cmd.threshold,
    });
    match cmd.format {
        Format::Json => {
            let result = serde_json::json!({
                "phi": phi,
                "interpretation": interpretation,
                "verdict": cmd.threshold.map(|t| if reliable_at(phi, t) { "reliable" } else { "unreliable" }),
            });
            emit(&cmd.output, config, result)
        }
        Format::Table => {
            let mut out = format!("phi = {phi:.3} ({interpretation})\n");
            if let Some(t) = cmd.threshold {
                out.push_str(&format!(
                    "verdict at {:.0}%: {}\n",
                    100.0 * t,
                    if reliable_at(phi, t) { "reliable" } else { "unreliable" }
                ));
            }
            write_output(&cmd.output, &out)
        }
    }
}

// ---------------------------------------------------------------- props

#[derive(Args)]
struct PropsCmd {
    /// Input texts: one document per line, or CSV with --id-column
    #[arg(long)]
    input: PathBuf,
    /// Treat the input as CSV with columns (id, text)
    #[arg(long)]
    csv: bool,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn run_props(cmd: &PropsCmd) -> Result<(), Error> {
    let raw = std::fs::read_to_string(&cmd.input)?;
    let docs: Vec<(String, String)> = if cmd.csv {
        let mut rdr = csv::ReaderBuilder::new().from_reader(raw.as_bytes());
        let mut out = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| Error::Structural(format!("csv error: {e}")))?;
            let id = record.get(0).unwrap_or("").to_string();
            let text = record.get(1).unwrap_or("").to_string();
            out.push((id, text));
        }
        out
    } else {
        raw.lines()
            .enumerate()
            .map(|(i, line)| ((i + 1).to_string(), line.to_string()))
            .collect()
    };
    if docs.is_empty() {
        return Err(Error::EmptyData);
    }
    let stats = build_corpus_stats(&docs.iter().map(|(_, t)| t.clone()).collect::<Vec<_>>())?;
    let mut out = String::from("id,rarity,readability\n");
    for (id, text) in &docs {
        let r = word_rarity(text, &stats)?;
        let fre = readability(text)?;
        out.push_str(&format!("{id},{r},{fre}\n"));
    }
    write_output(&cmd.output, &out)
}

// ---------------------------------------------------------------- interact

#[derive(Args)]
struct InteractCmd {
    #[command(flatten)]
    data: DataArgs,
    /// Factor treated as a fixed meta-parameter (a system factor works too)
    #[arg(long)]
    meta: String,
    /// Data-property covariate
    #[arg(long)]
    covariate: String,
    /// Number of grid points over the observed covariate range
    #[arg(long, default_value_t = 25)]
    grid: usize,
    #[command(flatten)]
    tuning: FitTuning,
    /// csv emits only the grid; json adds the interaction test
    #[arg(long, value_enum, default_value = "csv")]
    format: GridFormat,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn run_interact(cmd: &InteractCmd) -> Result<(), Error> {
    let (ds, schema) = cmd.data.load()?;
    let object = cmd
        .data
        .object
        .clone()
        .unwrap_or_else(|| ds.object_of_interest().to_string());
    let analysis =
        vca_with_interactions(&ds, &cmd.meta, &cmd.covariate, &object, &cmd.tuning.options())?;
    let grid = analysis.model.grid(cmd.grid);

    match cmd.format {
        // the grid CSV is the primary product; any plotting tool consumes it
        GridFormat::Csv => {
            let mut out = String::from("covariate_value,level,predicted_score\n");
            for p in &grid {
                out.push_str(&format!(
                    "{},{},{}\n",
                    p.covariate_value, p.level, p.predicted_score
                ));
            }
            write_output(&cmd.output, &out)
        }
        GridFormat::Json => {
            let config = serde_json::json!({
                "command": "interact",
                "data": cmd.data.data.display().to_string(),
                "schema": schema_echo(&schema),
                "meta": cmd.meta,
                "covariate": cmd.covariate,
                "object": object,
                "grid": cmd.grid,
                "criterion": "ml",
                "max_iter": cmd.tuning.max_iter,
                "tol": cmd.tuning.tol,
            });
            let result = serde_json::json!({
                "glrt": analysis.glrt,
                "lines": analysis.model.lines,
                "grid": grid,
            });
            emit(&cmd.output, config, result)
        }
    }
}

// ---------------------------------------------------------------- simulate

#[derive(Args)]
struct SimulateCmd {
    /// Ground-truth spec as JSON
    #[arg(long)]
    spec: PathBuf,
    /// Override the seed in the spec file
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn run_simulate(cmd: &SimulateCmd) -> Result<(), Error> {
    let text = std::fs::read_to_string(&cmd.spec)?;
    let mut spec: SimSpec = serde_json::from_str(&text)?;
    if let Some(seed) = cmd.seed {
        spec.seed = seed;
    }
    let ds = simulate(&spec)?;
    let mut buf = Vec::new();
    ds.write_csv(&mut buf)?;
    let content = String::from_utf8(buf)
        .map_err(|e| Error::Structural(format!("generated CSV is not UTF-8: {e}")))?;
    write_output(&cmd.output, &content)
}

// ---------------------------------------------------------------- report

#[derive(Args)]
struct ReportCmd {
    #[command(flatten)]
    data: DataArgs,
    /// System factor (two or more levels)
    #[arg(long)]
    system: String,
    /// Configuration factors, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    configs: Vec<String>,
    /// Covariates for conditional tests, comma separated
    #[arg(long = "conditional-on", value_delimiter = ',')]
    conditional_on: Vec<String>,
    /// Restrict the variance decomposition to one system level
    #[arg(long)]
    vca_system: Option<String>,
    #[arg(long, default_value_t = 25)]
    grid: usize,
    #[command(flatten)]
    tuning: FitTuning,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn run_report(cmd: &ReportCmd) -> Result<(), Error> {
    let (ds, schema) = cmd.data.load()?;
    let object = cmd
        .data
        .object
        .clone()
        .unwrap_or_else(|| ds.object_of_interest().to_string());
    let config = ReportConfig {
        system_factor: cmd.system.clone(),
        config_factors: cmd.configs.clone(),
        object_factor: object.clone(),
        covariates: cmd.conditional_on.clone(),
        vca_system: cmd.vca_system.clone(),
        grid_points: cmd.grid,
        fit: cmd.tuning.options(),
    };
    let report = build_report(&ds, &config)?;

    match cmd.format {
        Format::Json => {
            let echo = serde_json::json!({
                "command": "report",
                "data": cmd.data.data.display().to_string(),
                "schema": schema_echo(&schema),
                "system": cmd.system,
                "configs": cmd.configs,
                "conditional_on": cmd.conditional_on,
                "vca_system": cmd.vca_system,
                "object": object,
                "grid": cmd.grid,
                "max_iter": cmd.tuning.max_iter,
                "tol": cmd.tuning.tol,
            });
            emit(&cmd.output, echo, report)
        }
        Format::Table => {
            let mut out = String::new();
            out.push_str(&format!("dataset fingerprint: {}\n\n", report.dataset_fingerprint));
            out.push_str("best-configuration comparison\n");
            for (system, assignment) in &report.pairwise_best.selected {
                out.push_str(&format!("  {system}: {assignment:?}\n"));
            }
            let g = &report.pairwise_best.glrt;
            out.push_str(&format!(
                "  stat {:.4}  df {}  p {:?}  effect size {:?}\n\n",
                g.stat, g.df, g.p_value, g.effect_size
            ));
            let g = &report.under_variation;
            out.push_str(&format!(
                "under meta-parameter variation\n  stat {:.4}  df {}  p {:?}  effect size {:?}\n\n",
                g.stat, g.df, g.p_value, g.effect_size
            ));
            out.push_str("variance components\n");
            for c in &report.vca.components {
                out.push_str(&format!(
                    "  {:<24} {:>12.5} {:>8.1}\n",
                    c.name, c.variance, c.percent
                ));
            }
            out.push_str(&format!(
                "  phi = {:.3} ({})\n",
                report.vca.phi, report.vca.interpretation
            ));
            for section in &report.conditional {
                out.push_str(&format!(
                    "\nconditional on {}\n  stat {:.4}  df {}  p {:?}\n",
                    section.covariate, section.glrt.stat, section.glrt.df, section.glrt.p_value
                ));
            }
            write_output(&cmd.output, &out)
        }
    }
}

// ----------------------------------------------------------------

fn dispatch(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Fit(cmd) => run_fit(cmd),
        Command::Glrt(cmd) => run_glrt(cmd),
        Command::Vca(cmd) => run_vca(cmd),
        Command::Reliability(cmd) => run_reliability(cmd),
        Command::Props(cmd) => run_props(cmd),
        Command::Interact(cmd) => run_interact(cmd),
        Command::Simulate(cmd) => run_simulate(cmd),
        Command::Report(cmd) => run_report(cmd),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version exit cleanly; usage errors are input errors
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
