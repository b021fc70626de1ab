//! Command-line front end. Every subcommand reads a compiled-in corpus
//! instance or a design/mapping/schedule file triple, writes one JSON or CSV
//! report, and exits with 0 (success), 1 (input error), 2 (positivity
//! failure) or 3 (assumption failure).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num::rational::BigRational;
use serde::Serialize;

use crate::assumptions::{
    check_nurva_with, check_sutva_with, regularity_diagnostics, AssumptionVerdict, CheckOptions,
    RegularityDiagnostics,
};
use crate::corpus::{load_corpus_with_cap, Generator, Instance};
use crate::design::{AssignmentVector, Design, DesignSpace, EnumerationCap};
use crate::error::{Error, Result};
use crate::estimands::{
    compute_estimands, resolve_probabilities, trim_population, EstimandRequest, ProbabilityOptions,
};
use crate::estimation::{estimate, EstimateOptions, EstimateReport, Target};
use crate::exposure::{ExposureMapping, Label};
use crate::montecarlo::{
    consistency_sweep, replicate, Draw, EstimatorConfig, ReplicationSummary, SweepResult,
};
use crate::outcomes::{ObservedData, OutcomeSchedule};
use crate::scalar::{parse_rational, rational_from_json, Scalar};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_POSITIVITY: i32 = 2;
pub const EXIT_ASSUMPTION: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "exposure-engine",
    version,
    about = "Design-based estimands and estimators under interference"
)]
pub struct Cli {
    /// Worker threads for the library's parallel loops (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact EPOs, AEPOs and AEEDs by support enumeration.
    Estimands(EstimandsArgs),
    /// NURVA over the design support and SUTVA over the design space.
    Check(CheckArgs),
    /// Horvitz-Thompson estimate with variance bounds from one realization.
    Estimate(EstimateArgs),
    /// Seeded replications of the estimator, or a consistency sweep.
    #[command(after_help = SIMULATE_HELP)]
    Simulate(SimulateArgs),
    /// Exposure probabilities pi_i(d) and joint pi_ij(d, d').
    Probabilities(ProbabilitiesArgs),
}

const SIMULATE_HELP: &str = "\
Replication CSV columns: target, R, seed, level, mean, variance (sample variance of the estimates),
std_error, truth (exact estimand), bias (mean - truth), rmse, coverage (share of conservative Wald
intervals covering the truth), mean_var_cons, negative_variance_draws.
Sweep CSV columns: N, truth, mean, bias, rmse, b_N (sum of |pi_ij - pi_i pi_j|), c_N (max |y|/pi),
b_N*c_N/N^2, coverage.
--plot-data writes one row per replication (replication, seed, point, var_cons, ci_lo, ci_hi, covers)
or, for sweeps, tidy (N, metric, value) rows.
Draw k uses seed split_seed(seed, k); sweep population N uses split_seed(seed, 2N) and its
replications split_seed(seed, 2N + 1).";

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Compiled-in instance, e.g. household, rebel-survey, voter-carryover.
    #[arg(long)]
    pub corpus: Option<String>,
    #[arg(long, value_name = "PATH")]
    pub design: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub mapping: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub schedule: Option<PathBuf>,
    /// Design-space file; overrides the corpus space.
    #[arg(long, value_name = "PATH")]
    pub space: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Report path (default: stdout).
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct EstimandsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Exposures to report (default: every label of the mapping).
    #[arg(long, value_delimiter = ',')]
    pub label: Vec<Label>,
    /// Contrast `d,d'`; repeatable.
    #[arg(long, value_parser = parse_contrast)]
    pub contrast: Vec<(Label, Label)>,
    /// Average over units with positivity for every requested exposure.
    #[arg(long)]
    pub trim: bool,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Outcome differences up to this rational count as equal.
    #[arg(long, default_value = "0")]
    pub tolerance: String,
    /// Skip SUTVA (no design space needed).
    #[arg(long)]
    pub nurva_only: bool,
    /// Also write regularity diagnostics as CSV.
    #[arg(long, value_name = "PATH")]
    pub plot_data: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct McArgs {
    /// Monte Carlo draws for exposure probabilities when neither enumeration
    /// nor a closed form is available.
    #[arg(long, value_name = "R")]
    pub mc: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub mc_seed: u64,
}

impl McArgs {
    fn options(&self) -> ProbabilityOptions {
        ProbabilityOptions {
            monte_carlo: self.mc.map(|r| (r, self.mc_seed)),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(flatten)]
    pub mc: McArgs,
    /// `aepo:d` or `aeed:d,d'`.
    #[arg(long, default_value = "aeed:1,0")]
    pub target: Target,
    /// Draw the assignment from the design with this seed.
    #[arg(long, value_name = "SEED", conflicts_with = "data")]
    pub draw: Option<u64>,
    /// Realized data: JSON {"z": [...], "y": [...]} or CSV with columns z,y.
    #[arg(long, value_name = "PATH")]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Drop units without positivity for the target's exposures.
    #[arg(long)]
    pub trim: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(flatten)]
    pub mc: McArgs,
    #[arg(long, default_value = "aeed:1,0")]
    pub target: Target,
    #[arg(long = "R", default_value_t = 1000)]
    pub r: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Also compute the estimator's exact expectation and bias by enumeration.
    #[arg(long)]
    pub exact: bool,
    /// Run a consistency sweep over a generator (partial-interference, no-interference).
    #[arg(long, value_name = "GENERATOR")]
    pub sweep: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "20,80,320")]
    pub sizes: Vec<usize>,
    /// Tidy CSV for external plotting.
    #[arg(long, value_name = "PATH")]
    pub plot_data: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ProbabilitiesArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(flatten)]
    pub mc: McArgs,
    /// Exposures to tabulate (default: every label of the mapping).
    #[arg(long, value_delimiter = ',')]
    pub label: Vec<Label>,
}

fn parse_contrast(s: &str) -> std::result::Result<(Label, Label), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("contrast must be 'd,d2', got '{s}'"))?;
    Ok((
        a.parse().map_err(|e: Error| e.to_string())?,
        b.parse().map_err(|e: Error| e.to_string())?,
    ))
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Positivity { .. } | Error::EmptyTrim => EXIT_POSITIVITY,
        Error::NurvaViolated { .. } => EXIT_ASSUMPTION,
        _ => EXIT_INPUT,
    }
}

/// Parses `args`, runs the subcommand and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: &Cli) -> Result<i32> {
    if let Some(threads) = cli.threads {
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match &cli.command {
        Command::Estimands(a) => cmd_estimands(a),
        Command::Check(a) => cmd_check(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Probabilities(a) => cmd_probabilities(a),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))
}

fn in_file(path: &Path, e: Error) -> Error {
    Error::Parse(format!("{}: {e}", path.display()))
}

/// Loads the corpus instance or the file triple named by `input`.
pub fn load_input(input: &InputArgs) -> Result<Instance> {
    let cap = EnumerationCap::from_env();
    let space = input
        .space
        .as_deref()
        .map(|p| {
            serde_json::from_str::<DesignSpace>(&read(p)?)
                .map_err(|e| Error::Parse(format!("{}: {e}", p.display())))
        })
        .transpose()?;
    let files = [&input.design, &input.mapping, &input.schedule];
    let given = files.iter().filter(|f| f.is_some()).count();
    let mut inst = match (&input.corpus, given) {
        (Some(name), 0) => load_corpus_with_cap(name, cap)?,
        (None, 3) => {
            let (dp, mp, sp) = (
                input.design.as_deref().unwrap(),
                input.mapping.as_deref().unwrap(),
                input.schedule.as_deref().unwrap(),
            );
            let design = Design::from_json(&read(dp)?, cap).map_err(|e| in_file(dp, e))?;
            let mapping = ExposureMapping::from_json(&read(mp)?, Some(design.n()))
                .map_err(|e| in_file(mp, e))?;
            let schedule = OutcomeSchedule::from_json(&read(sp)?, space.as_ref())
                .map_err(|e| in_file(sp, e))?;
            let space = space
                .clone()
                .or_else(|| Some(schedule.domain().clone()).filter(|s| s.n() == design.n()));
            Instance {
                name: "user".into(),
                design,
                space,
                mapping,
                schedule,
            }
        }
        (Some(_), _) => {
            return Err(Error::Parse(
                "give either --corpus or the design/mapping/schedule files, not both".into(),
            ))
        }
        (None, _) => {
            return Err(Error::Parse(
                "give --corpus NAME or all of --design, --mapping and --schedule".into(),
            ))
        }
    };
    if space.is_some() {
        inst.space = space;
    }
    let n = inst.design.n();
    for found in [inst.mapping.n(), inst.schedule.n()] {
        if found != n {
            return Err(Error::LengthMismatch { expected: n, found });
        }
    }
    Ok(inst)
}

fn emit(output: &OutputArgs, body: &str) -> Result<()> {
    match &output.out {
        Some(path) => fs::write(path, body)?,
        None => std::io::stdout().write_all(body.as_bytes())?,
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn to_csv<const K: usize>(
    header: [&str; K],
    rows: impl IntoIterator<Item = [String; K]>,
) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

fn labels_or_all(labels: &[Label], mapping: &ExposureMapping) -> Vec<Label> {
    if labels.is_empty() {
        mapping.label_codes()
    } else {
        labels.to_vec()
    }
}

pub fn cmd_estimands(args: &EstimandsArgs) -> Result<i32> {
    let inst = load_input(&args.input)?;
    let labels = if args.label.is_empty() && args.contrast.is_empty() {
        inst.mapping.label_codes()
    } else {
        args.label.clone()
    };
    let request = EstimandRequest {
        labels,
        contrasts: args.contrast.clone(),
        trim: args.trim,
    };
    let report = compute_estimands(&inst.design, &inst.mapping, &inst.schedule, &request)?;
    let body = match args.output.format {
        Format::Json => to_json(&report)?,
        Format::Csv => to_csv(
            ["unit", "label", "num", "den", "decimal", "included"],
            report.epo_csv_rows(),
        )?,
    };
    emit(&args.output, &body)?;
    if report.positivity_holds() || args.trim {
        Ok(EXIT_OK)
    } else {
        eprintln!(
            "positivity fails; --trim drops units {:?}",
            report.trim_suggestion
        );
        Ok(EXIT_POSITIVITY)
    }
}

#[derive(Debug, Serialize)]
struct CheckReport {
    instance: String,
    nurva: AssumptionVerdict,
    sutva: Option<AssumptionVerdict>,
    regularity: Vec<RegularityDiagnostics>,
}

pub fn cmd_check(args: &CheckArgs) -> Result<i32> {
    let inst = load_input(&args.input)?;
    let options = CheckOptions {
        tolerance: parse_rational(&args.tolerance)?,
        early_exit: false,
    };
    let nurva = check_nurva_with(&inst.design, &inst.mapping, &inst.schedule, &options)?;
    let sutva = if args.nurva_only {
        None
    } else {
        let space = inst.space.as_ref().ok_or(Error::MissingDesignSpace)?;
        Some(check_sutva_with(
            space,
            &inst.mapping,
            &inst.schedule,
            &options,
            EnumerationCap::from_env(),
        )?)
    };
    // Diagnostics only for exposures with positivity.
    let regularity: Vec<RegularityDiagnostics> = inst
        .mapping
        .label_codes()
        .into_iter()
        .filter_map(|d| regularity_diagnostics(&inst.design, &inst.mapping, &inst.schedule, d).ok())
        .collect();
    let holds = nurva.holds && sutva.as_ref().is_none_or(|s| s.holds);
    let report = CheckReport {
        instance: inst.name.clone(),
        nurva,
        sutva,
        regularity,
    };
    let body = match args.output.format {
        Format::Json => to_json(&report)?,
        Format::Csv => {
            let mut rows = Vec::new();
            for (name, verdict) in [
                ("nurva", Some(&report.nurva)),
                ("sutva", report.sutva.as_ref()),
            ] {
                let Some(v) = verdict else { continue };
                let cx = v.counterexample.as_ref();
                rows.push([
                    name.to_string(),
                    v.holds.to_string(),
                    cx.map_or(String::new(), |c| c.unit.to_string()),
                    cx.map_or(String::new(), |c| c.label.to_string()),
                    cx.map_or(String::new(), |c| codes(&c.z)),
                    cx.map_or(String::new(), |c| codes(&c.z_prime)),
                    cx.map_or(String::new(), |c| c.y.0.to_string()),
                    cx.map_or(String::new(), |c| c.y_prime.0.to_string()),
                ]);
            }
            to_csv(
                [
                    "assumption",
                    "holds",
                    "unit",
                    "label",
                    "z",
                    "z_prime",
                    "y",
                    "y_prime",
                ],
                rows,
            )?
        }
    };
    emit(&args.output, &body)?;
    if let Some(path) = &args.plot_data {
        fs::write(
            path,
            to_csv(
                RegularityDiagnostics::CSV_HEADER,
                report.regularity.iter().map(|r| r.csv_row()),
            )?,
        )?;
    }
    Ok(if holds { EXIT_OK } else { EXIT_ASSUMPTION })
}

fn codes(z: &AssignmentVector) -> String {
    z.0.iter().map(u32::to_string).collect::<Vec<_>>().join(" ")
}

/// Realized (z, y) from a JSON or CSV data file.
pub fn read_data(path: &Path) -> Result<(AssignmentVector, Vec<BigRational>)> {
    let text = read(path)?;
    let bad = |msg: String| Error::Parse(format!("{}: {msg}", path.display()));
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
    {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| bad(format!("missing column '{name}'")))
        };
        let (zc, yc) = (col("z")?, col("y")?);
        let (mut z, mut y) = (Vec::new(), Vec::new());
        for record in reader.records() {
            let record = record?;
            z.push(
                record[zc]
                    .trim()
                    .parse::<u32>()
                    .map_err(|e| bad(e.to_string()))?,
            );
            y.push(parse_rational(&record[yc])?);
        }
        Ok((AssignmentVector(z), y))
    } else {
        #[derive(serde::Deserialize)]
        struct DataFile {
            z: Vec<u32>,
            y: Vec<serde_json::Value>,
        }
        let file: DataFile = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        let y = file
            .y
            .iter()
            .map(rational_from_json)
            .collect::<Result<Vec<_>>>()?;
        Ok((AssignmentVector(file.z), y))
    }
}

/// Exact arithmetic when the support is enumerable, `f64` otherwise.
fn estimate_with<T: Scalar>(
    inst: &Instance,
    args: &EstimateArgs,
    data: ObservedData<T>,
) -> Result<EstimateReport> {
    let labels = args.target.labels();
    let probs =
        resolve_probabilities::<T>(&inst.design, &inst.mapping, &labels, args.mc.options())?;
    let units = if args.trim {
        let (d, d2) = (labels[0], *labels.last().expect("target has a label"));
        Some(trim_population(&probs, d, d2)?)
    } else {
        None
    };
    estimate(
        args.target,
        &data,
        &probs,
        &EstimateOptions {
            level: args.level,
            units,
        },
    )
    .inspect_err(|e| {
        if let Error::Positivity { label, units } = e {
            eprintln!(
                "positivity fails for exposure {label} at units {units:?}; rerun with --trim"
            );
        }
    })
}

pub fn cmd_estimate(args: &EstimateArgs) -> Result<i32> {
    let inst = load_input(&args.input)?;
    let (z, y, origin) = match (&args.data, args.draw) {
        (Some(path), _) => {
            let (z, y) = read_data(path)?;
            (z, y, format!("data read from {}", path.display()))
        }
        (None, Some(seed)) => {
            let z = inst.design.sample(seed);
            let y = inst.schedule.row(&z)?;
            (
                z,
                y,
                format!("assignment drawn from the design with seed {seed}"),
            )
        }
        (None, None) => return Err(Error::Parse("give --data PATH or --draw SEED".into())),
    };
    let n = inst.design.n();
    for found in [z.0.len(), y.len()] {
        if found != n {
            return Err(Error::LengthMismatch { expected: n, found });
        }
    }
    let d = inst.mapping.apply(&z)?;
    let mut report = if inst.design.is_enumerable() {
        estimate_with::<BigRational>(&inst, args, ObservedData { y, d, z })?
    } else {
        let y = y.iter().map(Scalar::to_f64).collect();
        estimate_with::<f64>(&inst, args, ObservedData { y, d, z })?
    };
    report.notes.insert(0, origin);
    let body = match args.output.format {
        Format::Json => to_json(&report)?,
        Format::Csv => {
            let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
            to_csv(
                [
                    "target",
                    "point",
                    "var_ht",
                    "var_cons",
                    "ci_lo",
                    "ci_hi",
                    "level",
                    "zero_joint_pairs",
                    "provenance",
                    "sample_mean",
                ],
                [[
                    report.target.to_string(),
                    report.point.to_string(),
                    opt(report.var_ht),
                    report.var_cons.to_string(),
                    report.ci[0].to_string(),
                    report.ci[1].to_string(),
                    report.level.to_string(),
                    report.zero_joint_pairs.to_string(),
                    report.provenance.to_string(),
                    opt(report.sample_mean),
                ]],
            )?
        }
    };
    emit(&args.output, &body)?;
    Ok(EXIT_OK)
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<i32> {
    let mut config = EstimatorConfig::new(args.target)
        .with_level(args.level)
        .with_exact(args.exact);
    config.probabilities = args.mc.options();
    if let Some(name) = &args.sweep {
        if args.input.corpus.is_some() || args.input.design.is_some() {
            return Err(Error::Parse(
                "--sweep generates its own populations; drop the instance flags".into(),
            ));
        }
        let generator = Generator::from_name(name)?;
        let sweep = consistency_sweep(&generator, &args.sizes, &config, args.r, args.seed)?;
        let body = match args.output.format {
            Format::Json => to_json(&sweep)?,
            Format::Csv => to_csv(SweepResult::CSV_HEADER, sweep.csv_rows())?,
        };
        emit(&args.output, &body)?;
        if let Some(path) = &args.plot_data {
            let mut rows = Vec::new();
            for row in sweep.csv_rows() {
                for (metric, value) in SweepResult::CSV_HEADER.iter().zip(&row).skip(1) {
                    if !value.is_empty() {
                        rows.push([row[0].clone(), metric.to_string(), value.clone()]);
                    }
                }
            }
            fs::write(path, to_csv(["N", "metric", "value"], rows)?)?;
        }
        return Ok(EXIT_OK);
    }
    let inst = load_input(&args.input)?;
    let summary: ReplicationSummary = replicate(
        &inst.design,
        &inst.mapping,
        &inst.schedule,
        &config,
        args.r,
        args.seed,
    )?;
    let body = match args.output.format {
        Format::Json => to_json(&summary)?,
        Format::Csv => to_csv(ReplicationSummary::CSV_HEADER, [summary.csv_row()])?,
    };
    emit(&args.output, &body)?;
    if let Some(path) = &args.plot_data {
        fs::write(
            path,
            to_csv(Draw::CSV_HEADER, summary.draws.iter().map(Draw::csv_row))?,
        )?;
    }
    eprintln!(
        "{} replications in {:.3}s",
        args.r,
        summary.wall_time.as_secs_f64()
    );
    Ok(EXIT_OK)
}

pub fn cmd_probabilities(args: &ProbabilitiesArgs) -> Result<i32> {
    let inst = load_input(&args.input)?;
    let labels = labels_or_all(&args.label, &inst.mapping);
    let probs = resolve_probabilities::<BigRational>(
        &inst.design,
        &inst.mapping,
        &labels,
        args.mc.options(),
    )?;
    let report = probs.report();
    let body = match args.output.format {
        Format::Json => to_json(&report)?,
        Format::Csv => to_csv(
            ["kind", "d", "d_prime", "i", "j", "num", "den", "decimal"],
            report.csv_rows(),
        )?,
    };
    emit(&args.output, &body)?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contrasts_and_targets_parse() {
        assert_eq!(parse_contrast("1,0").unwrap(), (Label(1), Label(0)));
        assert!(parse_contrast("1").is_err());
        let cli = Cli::try_parse_from([
            "x",
            "estimate",
            "--corpus",
            "household",
            "--target",
            "aepo:0",
            "--draw",
            "7",
        ])
        .unwrap();
        match cli.command {
            Command::Estimate(a) => {
                assert_eq!((a.target, a.draw), (Target::Aepo(Label(0)), Some(7)))
            }
            _ => panic!("wrong subcommand"),
        }
    }

    #[test]
    fn input_must_be_corpus_or_triple() {
        let only_design = InputArgs {
            corpus: None,
            design: Some("d.json".into()),
            mapping: None,
            schedule: None,
            space: None,
        };
        assert!(matches!(load_input(&only_design), Err(Error::Parse(_))));
        let both = InputArgs {
            corpus: Some("household".into()),
            ..only_design
        };
        assert!(matches!(load_input(&both), Err(Error::Parse(_))));
    }

    #[test]
    fn exit_codes_are_stable() {
        assert_eq!(
            exit_code(&Error::Positivity {
                label: Label(1),
                units: vec![0]
            }),
            2
        );
        assert_eq!(exit_code(&Error::NurvaViolated { unit: 0 }), 3);
        assert_eq!(exit_code(&Error::Parse("x".into())), 1);
        assert_eq!(main_with_args(["x", "frobnicate"]), 1);
        assert_eq!(main_with_args(["x", "--help"]), 0);
    }
}
