use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use peakmt::detector::detect;
use peakmt::error::{Error, Result};
use peakmt::evaluation::run_simulation;
use peakmt::io::{
    self, DetectionReport, ReportFormat, RunManifest, SeriesFormat, SimulationReport,
};
use peakmt::moments_est::{estimate_moments, MomentEstimate, MomentMethod};
use peakmt::palm::{
    gaussian_model_moments, GaussianModelParams, PalmDistribution, SpectralMoments,
};
use peakmt::smoothing::{convolve, make_gaussian_kernel, DEFAULT_KERNEL_TRUNCATION};

#[derive(Parser)]
#[command(
    name = "peakmt",
    version,
    about = "Peak detection with FWER/FDR control"
)]
struct Cli {
    /// Worker threads for simulations.
    #[arg(long, global = true, env = "PEAKMT_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect significant peaks in a series.
    Detect(DetectArgs),
    /// Monte Carlo error and power study.
    Simulate(SimulateArgs),
    /// Estimate spectral moments of a (smoothed) series.
    EstimateMoments(EstimateArgs),
    /// Tabulate the local-maximum height distribution and its inverse.
    PvalueTable(TableArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    Plain,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

impl From<OutputFormat> for ReportFormat {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Json => ReportFormat::Json,
            OutputFormat::Csv => ReportFormat::Csv,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MomentsArg {
    Mad,
    Var,
    Acf,
    Crossing,
    Model,
    Explicit,
}

#[derive(Args)]
struct InputArgs {
    /// Input series file.
    input: PathBuf,
    /// Input format; guessed from the extension when omitted.
    #[arg(long = "input-format", value_enum)]
    input_format: Option<InputFormat>,
    /// Sample spacing for plain input.
    #[arg(long, default_value_t = 1.0)]
    spacing: f64,
}

impl InputArgs {
    fn load(&self) -> Result<peakmt::SampledSeries> {
        let format = match self.input_format {
            Some(InputFormat::Plain) => SeriesFormat::Plain,
            Some(InputFormat::Csv) => SeriesFormat::Csv,
            None => SeriesFormat::from_path(&self.input),
        };
        io::load_series(&self.input, format, self.spacing)
    }
}

#[derive(Args)]
struct MomentArgs {
    /// Noise sigma (Gaussian model).
    #[arg(long)]
    sigma: Option<f64>,
    /// Noise autocorrelation bandwidth (Gaussian model).
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    lambda4: Option<f64>,
}

#[derive(Args)]
struct OutputArgs {
    /// Output file; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: OutputFormat,
    /// Also write the csv table to this file.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    input: InputArgs,
    /// TOML file with detector settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Kernel bandwidth in time units.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_parser = ["bonferroni", "bh"])]
    method: Option<String>,
    /// Kernel half-support in bandwidths.
    #[arg(long)]
    truncation: Option<f64>,
    /// Source of the spectral moments.
    #[arg(long, value_enum)]
    moments: Option<MomentsArg>,
    #[command(flatten)]
    moment_values: MomentArgs,
    /// Lag window for the acf estimator.
    #[arg(long)]
    lag_window: Option<usize>,
    /// Keep the series mean instead of subtracting it.
    #[arg(long)]
    no_subtract_mean: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML file with the simulation setup; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed for all replications.
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Comma-separated bandwidths.
    #[arg(long, value_delimiter = ',')]
    gammas: Option<Vec<f64>>,
    /// Comma-separated procedures.
    #[arg(long, value_delimiter = ',', value_parser = ["bonferroni", "bh"])]
    methods: Option<Vec<String>>,
    /// Peak amplitude of the standard peak train.
    #[arg(long)]
    amplitude: Option<f64>,
    /// Distance between peak centers.
    #[arg(long)]
    peak_spacing: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Smooth with this bandwidth first.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_KERNEL_TRUNCATION)]
    truncation: f64,
    /// Estimator, or all of them when omitted.
    #[arg(long, value_parser = ["mad", "var", "acf", "crossing"])]
    method: Option<String>,
    #[arg(long)]
    lag_window: Option<usize>,
    #[arg(long)]
    no_subtract_mean: bool,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct TableArgs {
    #[command(flatten)]
    moment_values: MomentArgs,
    /// Kernel bandwidth, with --sigma/--nu.
    #[arg(long)]
    gamma: Option<f64>,
    /// Lowest height, in standard deviations of the smoothed noise.
    #[arg(long, default_value_t = -2.0)]
    from: f64,
    /// Highest height, in standard deviations of the smoothed noise.
    #[arg(long, default_value_t = 6.0)]
    to: f64,
    #[arg(long, default_value_t = 33)]
    steps: usize,
    /// Comma-separated probabilities to invert instead.
    #[arg(long, value_delimiter = ',')]
    quantiles: Option<Vec<f64>>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn set(table: &mut toml::Table, key: &str, value: impl Into<toml::Value>) {
    table.insert(key.to_string(), value.into());
}

fn subtable<'a>(table: &'a mut toml::Table, key: &str) -> Result<&'a mut toml::Table> {
    table
        .entry(key)
        .or_insert_with(|| toml::Value::Table(toml::Table::new()))
        .as_table_mut()
        .ok_or_else(|| Error::Config(format!("'{key}' must be a table")))
}

fn moments_table(
    kind: MomentsArg,
    v: &MomentArgs,
    lag_window: Option<usize>,
) -> Result<toml::Table> {
    let mut t = toml::Table::new();
    let estimated = |name: &str| {
        let mut t = toml::Table::new();
        set(&mut t, "source", "estimated");
        set(&mut t, "method", name);
        t
    };
    match kind {
        MomentsArg::Mad => t = estimated("mad"),
        MomentsArg::Var => t = estimated("var"),
        MomentsArg::Acf => t = estimated("acf"),
        MomentsArg::Crossing => t = estimated("crossing"),
        MomentsArg::Model => {
            let sigma = v
                .sigma
                .ok_or_else(|| Error::Config("--moments model needs --sigma".into()))?;
            set(&mut t, "source", "gaussian_model");
            set(&mut t, "sigma", sigma);
            set(&mut t, "nu", v.nu.unwrap_or(0.0));
        }
        MomentsArg::Explicit => {
            let (Some(s2), Some(l2), Some(l4)) = (v.sigma2, v.lambda2, v.lambda4) else {
                return Err(Error::Config(
                    "--moments explicit needs --sigma2, --lambda2 and --lambda4".into(),
                ));
            };
            set(&mut t, "source", "explicit");
            set(&mut t, "sigma2", s2);
            set(&mut t, "lambda2", l2);
            set(&mut t, "lambda4", l4);
        }
    }
    if let Some(w) = lag_window {
        set(&mut t, "lag_window", w as i64);
    }
    Ok(t)
}

fn write_json_and_csv(
    out: &OutputArgs,
    render: impl Fn(ReportFormat) -> Result<String>,
) -> Result<()> {
    io::write_output(out.output.as_deref(), &render(out.format.into())?)?;
    if let Some(p) = &out.csv {
        io::write_output(Some(p), &render(ReportFormat::Csv)?)?;
    }
    Ok(())
}

fn run_detect(args: &DetectArgs) -> Result<()> {
    let mut table = io::load_config_table(args.config.as_deref())?;
    if let Some(g) = args.gamma {
        set(&mut table, "gamma", g);
    }
    if let Some(a) = args.alpha {
        set(&mut table, "alpha", a);
    }
    if let Some(m) = &args.method {
        set(&mut table, "method", m.as_str());
    }
    if let Some(c) = args.truncation {
        set(&mut table, "kernel_truncation", c);
    }
    if args.no_subtract_mean {
        set(&mut table, "subtract_mean", false);
    }
    let v = &args.moment_values;
    let kind = args.moments.or(if v.sigma2.is_some() {
        Some(MomentsArg::Explicit)
    } else if v.sigma.is_some() {
        Some(MomentsArg::Model)
    } else {
        None
    });
    if let Some(kind) = kind {
        set(
            &mut table,
            "moments_source",
            moments_table(kind, v, args.lag_window)?,
        );
    } else if let Some(w) = args.lag_window {
        set(
            subtable(&mut table, "moments_source")?,
            "lag_window",
            w as i64,
        );
    }
    let config = io::detector_config_from_table(table)?;
    let series = args.input.load()?;
    let mut manifest = RunManifest::start("detect", &config)?;
    manifest.input_digest = Some(io::file_digest(&args.input.input)?);
    let result = detect(&series, &config)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    let report = DetectionReport {
        manifest: manifest.finish(),
        result,
    };
    write_json_and_csv(&args.output, |f| io::emit_detection(&report, f))
}

fn run_simulate(args: &SimulateArgs) -> Result<()> {
    let mut table = io::load_config_table(args.config.as_deref())?;
    if !table.contains_key("layout") && !table.contains_key("signal") {
        let layout = peakmt::evaluation::PeakTrainLayout::standard(10.0);
        let value = toml::Value::try_from(layout).map_err(|e| Error::Config(e.to_string()))?;
        set(&mut table, "layout", value);
    }
    if let Some(a) = args.amplitude {
        set(subtable(&mut table, "layout")?, "amplitude", a);
    }
    if let Some(d) = args.peak_spacing {
        set(subtable(&mut table, "layout")?, "peak_spacing", d);
    }
    {
        let noise = subtable(&mut table, "noise")?;
        noise.entry("sigma").or_insert(toml::Value::Float(1.0));
        noise.entry("nu").or_insert(toml::Value::Float(0.0));
        if let Some(s) = args.sigma {
            set(noise, "sigma", s);
        }
        if let Some(n) = args.nu {
            set(noise, "nu", n);
        }
    }
    table
        .entry("replications")
        .or_insert(toml::Value::Integer(1000));
    if let Some(r) = args.replications {
        set(&mut table, "replications", r as i64);
    }
    if let Some(a) = args.alpha {
        set(&mut table, "alpha", a);
    }
    if let Some(g) = &args.gammas {
        set(&mut table, "gammas", g.clone());
    }
    if let Some(m) = &args.methods {
        set(&mut table, "methods", m.clone());
    }
    let config = io::simulation_file_from_table(table)?.into_config(args.seed)?;
    let mut manifest = RunManifest::start("simulate", &config)?;
    manifest.seed = Some(args.seed);
    let report = run_simulation(&config)?;
    let report = SimulationReport {
        manifest: manifest.finish(),
        report,
    };
    write_json_and_csv(&args.output, |f| io::emit_simulation(&report, f))
}

#[derive(Serialize)]
struct EstimateOutput {
    manifest: RunManifest,
    estimates: Vec<MomentEstimate>,
}

#[derive(Serialize)]
struct EstimateSettings<'a> {
    gamma: Option<f64>,
    kernel_truncation: f64,
    method: Option<&'a str>,
    lag_window: Option<usize>,
    subtract_mean: bool,
}

fn run_estimate(args: &EstimateArgs) -> Result<()> {
    let mut series = args.input.load()?;
    if !args.no_subtract_mean {
        let mean = series.mean();
        series = series.map(|v| v - mean)?;
    }
    if let Some(gamma) = args.gamma {
        let kernel = make_gaussian_kernel(gamma, args.truncation, series.spacing())?;
        let smoothed = convolve(&series, &kernel)?;
        let b = smoothed.boundary;
        let n = smoothed.series.len();
        series = smoothed.series.slice(b, n - 2 * b)?;
    }
    let methods: Vec<MomentMethod> = match &args.method {
        Some(m) => vec![m.parse()?],
        None => MomentMethod::ALL.to_vec(),
    };
    let estimates = methods
        .iter()
        .map(|&m| estimate_moments(&series, m, args.lag_window, args.gamma))
        .collect::<Result<Vec<_>>>()?;
    let settings = EstimateSettings {
        gamma: args.gamma,
        kernel_truncation: args.truncation,
        method: args.method.as_deref(),
        lag_window: args.lag_window,
        subtract_mean: !args.no_subtract_mean,
    };
    let mut manifest = RunManifest::start("estimate-moments", &settings)?;
    manifest.input_digest = Some(io::file_digest(&args.input.input)?);
    let out = EstimateOutput {
        manifest: manifest.finish(),
        estimates,
    };
    io::write_output(args.output.as_deref(), &io::to_json(&out)?)
}

fn run_table(args: &TableArgs) -> Result<()> {
    let v = &args.moment_values;
    let moments = match (v.sigma2, v.lambda2, v.lambda4) {
        (Some(s2), Some(l2), Some(l4)) => SpectralMoments::new(s2, l2, l4)?,
        (None, None, None) => {
            let gamma = args.gamma.ok_or_else(|| {
                Error::Config("give --gamma (and --sigma, --nu) or explicit moments".into())
            })?;
            gaussian_model_moments(&GaussianModelParams::new(
                v.sigma.unwrap_or(1.0),
                v.nu.unwrap_or(0.0),
                gamma,
            )?)
        }
        _ => {
            return Err(Error::Config(
                "explicit moments need all of --sigma2, --lambda2 and --lambda4".into(),
            ))
        }
    };
    let dist = PalmDistribution::new(moments)?;
    let text = match &args.quantiles {
        Some(p) => io::quantile_table(&dist, p)?,
        None => {
            if args.steps < 2 || !(args.to > args.from) {
                return Err(Error::InvalidArgument(
                    "need --to above --from and at least 2 steps".into(),
                ));
            }
            let s = moments.sigma();
            let heights: Vec<f64> = (0..args.steps)
                .map(|i| {
                    s * (args.from + (args.to - args.from) * i as f64 / (args.steps - 1) as f64)
                })
                .collect();
            io::cdf_table(&dist, &heights)
        }
    };
    io::write_output(args.output.as_deref(), &text)
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Detect(a) => run_detect(a),
        Command::Simulate(a) => run_simulate(a),
        Command::EstimateMoments(a) => run_estimate(a),
        Command::PvalueTable(a) => run_table(a),
    }
}

fn exit_code(code: i32) -> ExitCode {
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return exit_code(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(e.exit_code())
        }
    }
}
