//! File formats, run manifests, report emission and config loading for the
//! command-line tool.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detector::{DetectionResult, DetectorConfig};
use crate::error::{Error, Result};
use crate::evaluation::{PeakTrainLayout, SimConfig, SimReport};
use crate::model::{Grid, NoiseSpec, SampledSeries, SignalSpec};
use crate::mtp::Method;
use crate::palm::PalmDistribution;

/// Relative tolerance on the spacing between consecutive csv time stamps.
pub const SPACING_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesFormat {
    /// One value per line; blank lines and `#` comments are skipped.
    Plain,
    /// `time,value` rows with an optional header.
    Csv,
}

impl std::str::FromStr for SeriesFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "plain" | "txt" => Ok(SeriesFormat::Plain),
            "csv" => Ok(SeriesFormat::Csv),
            other => Err(Error::InvalidArgument(format!(
                "unknown series format '{other}'"
            ))),
        }
    }
}

impl SeriesFormat {
    /// Guess from the file extension: `.csv` is csv, anything else plain.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => SeriesFormat::Csv,
            _ => SeriesFormat::Plain,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::InvalidArgument(format!(
                "unknown report format '{other}'"
            ))),
        }
    }
}

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("'{}' is not a number", field.trim()),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("'{}' is not finite", field.trim()),
        });
    }
    Ok(v)
}

/// Parse a series from text. `spacing` applies to plain input only; csv
/// takes its spacing and origin from the time column.
pub fn parse_series(text: &str, format: SeriesFormat, spacing: f64) -> Result<SampledSeries> {
    let rows = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    match format {
        SeriesFormat::Plain => {
            let values = rows
                .map(|(n, l)| parse_f64(l, n))
                .collect::<Result<Vec<_>>>()?;
            if values.is_empty() {
                return Err(Error::Format("no values in input".into()));
            }
            SampledSeries::new(values, spacing, 0.0)
        }
        SeriesFormat::Csv => {
            let mut times = Vec::new();
            let mut values = Vec::new();
            for (k, (n, l)) in rows.enumerate() {
                let fields: Vec<&str> = l.split(',').collect();
                if k == 0 && fields.iter().any(|f| f.trim().parse::<f64>().is_err()) {
                    // header row
                    continue;
                }
                if fields.len() != 2 {
                    return Err(Error::Parse {
                        line: n,
                        msg: format!("expected 2 fields, found {}", fields.len()),
                    });
                }
                times.push(parse_f64(fields[0], n)?);
                values.push(parse_f64(fields[1], n)?);
            }
            if values.is_empty() {
                return Err(Error::Format("no rows in csv input".into()));
            }
            let spacing = if times.len() < 2 {
                spacing
            } else {
                (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64
            };
            if !(spacing > 0.0) {
                return Err(Error::Format("csv times must be increasing".into()));
            }
            for (i, w) in times.windows(2).enumerate() {
                let step = w[1] - w[0];
                if (step - spacing).abs() > SPACING_TOLERANCE * spacing {
                    return Err(Error::Format(format!(
                        "non-uniform spacing between rows {} and {}: {step} vs {spacing}",
                        i + 1,
                        i + 2
                    )));
                }
            }
            SampledSeries::new(values, spacing, times[0])
        }
    }
}

pub fn load_series(path: &Path, format: SeriesFormat, spacing: f64) -> Result<SampledSeries> {
    parse_series(&fs::read_to_string(path)?, format, spacing)
}

/// Hex SHA-256 of a file's bytes.
pub fn file_digest(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// Provenance embedded in every emitted report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub started: String,
    pub finished: String,
}

impl RunManifest {
    pub fn start(command: &str, config: &impl Serialize) -> Result<Self> {
        let now = chrono::Utc::now().to_rfc3339();
        Ok(Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: serde_json::to_value(config)?,
            input_digest: None,
            seed: None,
            started: now.clone(),
            finished: now,
        })
    }

    pub fn finish(mut self) -> Self {
        self.finished = chrono::Utc::now().to_rfc3339();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub manifest: RunManifest,
    pub result: DetectionResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub manifest: RunManifest,
    pub report: SimReport,
}

pub const DETECTION_CSV_HEADER: &str = "index,time,height,p_value,rejected";

pub const SIMULATION_CSV_HEADER: &str = "gamma,method,fwer,fwer_se,fdr,fdr_se,power,power_se,\
multi_max,multi_max_se,mean_maxima,mean_rejections,mean_false_rejections,mean_detected_peaks";

/// One row per maximum. p-values carry 17 significant digits; other
/// floats use the shortest round-trip form.
pub fn detection_csv(result: &DetectionResult) -> String {
    let mut s = String::from(DETECTION_CSV_HEADER);
    s.push('\n');
    for m in &result.maxima {
        let p = m.p_value.map(|p| format!("{p:.16e}")).unwrap_or_default();
        let r = m.rejected.map(|r| r.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{},{},{},{p},{r}", m.index, m.time, m.height);
    }
    s
}

/// A row of the detection csv.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRow {
    pub index: usize,
    pub time: f64,
    pub height: f64,
    pub p_value: Option<f64>,
    pub rejected: Option<bool>,
}

pub fn parse_detection_csv(text: &str) -> Result<Vec<DetectionRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == DETECTION_CSV_HEADER => {}
        _ => return Err(Error::Format("missing detection csv header".into())),
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let n = i + 1;
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 5 {
                return Err(Error::Parse {
                    line: n,
                    msg: format!("expected 5 fields, found {}", f.len()),
                });
            }
            let index = f[0].parse().map_err(|_| Error::Parse {
                line: n,
                msg: format!("bad index '{}'", f[0]),
            })?;
            let p_value = if f[3].is_empty() {
                None
            } else {
                Some(parse_f64(f[3], n)?)
            };
            let rejected = match f[4] {
                "" => None,
                "true" => Some(true),
                "false" => Some(false),
                other => {
                    return Err(Error::Parse {
                        line: n,
                        msg: format!("bad decision '{other}'"),
                    })
                }
            };
            Ok(DetectionRow {
                index,
                time: parse_f64(f[1], n)?,
                height: parse_f64(f[2], n)?,
                p_value,
                rejected,
            })
        })
        .collect()
}

/// One row per `(γ, method)` cell.
pub fn simulation_csv(report: &SimReport) -> String {
    let mut s = String::from(SIMULATION_CSV_HEADER);
    s.push('\n');
    for e in &report.entries {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            e.gamma,
            e.method.name(),
            e.fwer,
            e.fwer_se,
            e.fdr,
            e.fdr_se,
            e.power,
            e.power_se,
            e.multi_max,
            e.multi_max_se,
            e.mean_maxima,
            e.mean_rejections,
            e.mean_false_rejections,
            e.mean_detected_peaks
        );
    }
    s
}

pub fn to_json(value: &impl Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Write `content` to `path`, or to stdout when `path` is `None` or `-`.
pub fn write_output(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) if p != Path::new("-") => Ok(fs::write(p, content)?),
        _ => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(content.as_bytes())?;
            Ok(out.flush()?)
        }
    }
}

pub fn emit_detection(report: &DetectionReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => to_json(report),
        ReportFormat::Csv => Ok(detection_csv(&report.result)),
    }
}

pub fn emit_simulation(report: &SimulationReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => to_json(report),
        ReportFormat::Csv => Ok(simulation_csv(&report.report)),
    }
}

pub fn read_detection_report(path: &Path) -> Result<DetectionReport> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn read_simulation_report(path: &Path) -> Result<SimulationReport> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// `u, F(u), tail approximation` rows for each height.
pub fn cdf_table(dist: &PalmDistribution, heights: &[f64]) -> String {
    let mut s = String::from("u,right_cdf,tail_approximation\n");
    for &u in heights {
        let _ = writeln!(
            s,
            "{u},{:.16e},{:.16e}",
            dist.right_cdf(u),
            dist.tail_approximation(u)
        );
    }
    s
}

/// `p, F⁻¹(p)` rows.
pub fn quantile_table(dist: &PalmDistribution, probabilities: &[f64]) -> Result<String> {
    let mut s = String::from("p,u\n");
    for &p in probabilities {
        let _ = writeln!(s, "{p},{}", dist.inverse(p)?);
    }
    Ok(s)
}

/// Read a TOML config file into a table; a missing path gives an empty one.
pub fn load_config_table(path: Option<&Path>) -> Result<toml::Table> {
    match path {
        None => Ok(toml::Table::new()),
        Some(p) => fs::read_to_string(p)?
            .parse::<toml::Table>()
            .map_err(|e| Error::Config(format!("{}: {e}", p.display()))),
    }
}

fn from_table<T: serde::de::DeserializeOwned>(table: toml::Table) -> Result<T> {
    table
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))
}

/// Detector config from a table, with `alpha = 0.05` and `method = "bh"`
/// unless given.
pub fn detector_config_from_table(mut table: toml::Table) -> Result<DetectorConfig> {
    table.entry("alpha").or_insert(toml::Value::Float(0.05));
    table
        .entry("method")
        .or_insert(toml::Value::String("bh".into()));
    if !table.contains_key("gamma") {
        return Err(Error::Config("gamma is required".into()));
    }
    let config: DetectorConfig = from_table(table)?;
    config.validate()?;
    Ok(config)
}

/// Simulation setup as written in a config file: either a peak-train
/// layout or an explicit signal and grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<PeakTrainLayout>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal: Option<SignalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    pub noise: NoiseSpec,
    #[serde(default = "crate::evaluation::default_gamma_grid")]
    pub gammas: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_truncation: Option<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<Method>>,
    pub replications: usize,
}

fn default_alpha() -> f64 {
    0.05
}

impl SimulationFile {
    pub fn into_config(self, seed: u64) -> Result<SimConfig> {
        let mut config = match (self.layout, self.signal, self.grid) {
            (Some(layout), None, None) => SimConfig::from_layout(
                &layout,
                self.noise,
                self.gammas,
                self.alpha,
                self.replications,
                seed,
            )?,
            (None, Some(signal), Some(grid)) => SimConfig {
                signal,
                noise: self.noise,
                grid,
                gammas: self.gammas,
                kernel_truncation: crate::smoothing::DEFAULT_KERNEL_TRUNCATION,
                alpha: self.alpha,
                methods: vec![Method::Bonferroni, Method::Bh],
                replications: self.replications,
                seed,
                peak_spacing: None,
            },
            _ => {
                return Err(Error::Config(
                    "give either [layout] or both [signal] and [grid]".into(),
                ))
            }
        };
        if let Some(c) = self.kernel_truncation {
            config.kernel_truncation = c;
        }
        if let Some(m) = self.methods {
            config.methods = m;
        }
        config.validate()?;
        Ok(config)
    }
}

pub fn simulation_file_from_table(table: toml::Table) -> Result<SimulationFile> {
    from_table(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::{detect, MomentsSource};
    use crate::model::{synthesize_dataset, Peak};

    #[test]
    fn plain_series() {
        let s = parse_series("0\n1\n0\n", SeriesFormat::Plain, 1.0).unwrap();
        assert_eq!(s.values(), &[0.0, 1.0, 0.0]);
        assert_eq!(s.spacing(), 1.0);
        let s = parse_series("# header\n\n2.5\n 3 \n", SeriesFormat::Plain, 0.1).unwrap();
        assert_eq!(s.values(), &[2.5, 3.0]);
        assert_eq!(s.spacing(), 0.1);
    }

    #[test]
    fn plain_parse_error_has_line_number() {
        match parse_series("1\n2\nabc\n", SeriesFormat::Plain, 1.0) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_series("1\nnan\n", SeriesFormat::Plain, 1.0),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn csv_series() {
        let s = parse_series("0,0\n0.5,1\n1.0,0\n", SeriesFormat::Csv, 1.0).unwrap();
        assert_eq!(s.values(), &[0.0, 1.0, 0.0]);
        assert_eq!(s.spacing(), 0.5);
        let s = parse_series("time,value\n10,1\n12,2\n14,3\n", SeriesFormat::Csv, 1.0).unwrap();
        assert_eq!(s.origin(), 10.0);
        assert_eq!(s.spacing(), 2.0);
    }

    #[test]
    fn csv_jitter_is_rejected() {
        assert!(matches!(
            parse_series("0,0\n1,1\n2.01,0\n3,1\n", SeriesFormat::Csv, 1.0),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            parse_series("0,0\n1,x\n", SeriesFormat::Csv, 1.0),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_series("0,0,1\n1,1,1\n", SeriesFormat::Csv, 1.0),
            Err(Error::Parse { line: 1, .. }) | Err(Error::Parse { line: 2, .. })
        ));
    }

    fn sample_result() -> DetectionResult {
        let signal = SignalSpec::new(
            vec![
                Peak {
                    amplitude: 12.0,
                    location: 100.0,
                },
                Peak {
                    amplitude: 12.0,
                    location: 300.0,
                },
            ],
            3.0,
            2.0,
        )
        .unwrap();
        let y = synthesize_dataset(
            &signal,
            &NoiseSpec::new(1.0, 0.0).unwrap(),
            &Grid::unit(400),
            3,
        )
        .unwrap();
        let config = DetectorConfig::new(
            3.0,
            0.05,
            Method::Bh,
            MomentsSource::GaussianModel {
                sigma: 1.0,
                nu: 0.0,
            },
        );
        detect(&y, &config).unwrap()
    }

    #[test]
    fn detection_csv_round_trip() {
        let r = sample_result();
        let csv = detection_csv(&r);
        assert_eq!(csv.lines().count(), r.maxima.len() + 1);
        let rows = parse_detection_csv(&csv).unwrap();
        for (row, m) in rows.iter().zip(&r.maxima) {
            assert_eq!(row.index, m.index);
            assert_eq!(row.time, m.time);
            assert_eq!(row.height, m.height);
            assert_eq!(row.p_value, m.p_value);
            assert_eq!(row.rejected, m.rejected);
        }
    }

    #[test]
    fn two_maxima_give_two_rows() {
        let mut r = sample_result();
        r.maxima.truncate(2);
        assert_eq!(detection_csv(&r).lines().count(), 3);
    }

    #[test]
    fn json_round_trip() {
        let result = sample_result();
        let report = DetectionReport {
            manifest: RunManifest::start("detect", &result.config)
                .unwrap()
                .finish(),
            result,
        };
        let text = emit_detection(&report, ReportFormat::Json).unwrap();
        let back: DetectionReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn empty_decision_round_trips() {
        // no tests: infinite thresholds must survive json
        let y = SampledSeries::new(vec![0.0; 100], 1.0, 0.0).unwrap();
        let config = DetectorConfig::new(
            3.0,
            0.05,
            Method::Bonferroni,
            MomentsSource::GaussianModel {
                sigma: 1.0,
                nu: 0.0,
            },
        );
        let result = detect(&y, &config).unwrap();
        assert!(result.decision.p_threshold.is_infinite());
        let text = serde_json::to_string(&result).unwrap();
        let back: DetectionResult = serde_json::from_str(&text).unwrap();
        assert_eq!(back, result);
    }

    #[test]
    fn detector_config_from_toml() {
        let t: toml::Table = r#"
            gamma = 1.5
            method = "bonferroni"
            [moments_source]
            source = "estimated"
            method = "mad"
        "#
        .parse()
        .unwrap();
        let c = detector_config_from_table(t).unwrap();
        assert_eq!(c.gamma, 1.5);
        assert_eq!(c.alpha, 0.05);
        assert_eq!(c.method, Method::Bonferroni);
        assert!(c.subtract_mean);
        assert!(matches!(
            detector_config_from_table(toml::Table::new()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn simulation_file_layouts() {
        let t: toml::Table = r#"
            replications = 10
            [layout]
            num_peaks = 20
            amplitude = 10.0
            scale = 3.0
            peak_spacing = 100.0
            [noise]
            sigma = 1.0
            nu = 0.0
        "#
        .parse()
        .unwrap();
        let c = simulation_file_from_table(t)
            .unwrap()
            .into_config(7)
            .unwrap();
        assert_eq!(c.grid.length, 2000);
        assert_eq!(c.gammas.len(), 12);
        assert_eq!(c.seed, 7);
        let t: toml::Table = "replications = 1\n[noise]\nsigma = 1.0\nnu = 0.0\n"
            .parse()
            .unwrap();
        assert!(matches!(
            simulation_file_from_table(t).unwrap().into_config(1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn simulation_csv_rows() {
        let config = SimConfig::from_layout(
            &PeakTrainLayout::standard(10.0),
            NoiseSpec::new(1.0, 0.0).unwrap(),
            crate::evaluation::default_gamma_grid(),
            0.05,
            2,
            1,
        )
        .unwrap();
        let report = crate::evaluation::run_simulation(&config).unwrap();
        let csv = simulation_csv(&report);
        assert_eq!(csv.lines().count(), 25);
    }

    #[test]
    fn digest_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.txt");
        fs::write(&p, "abc").unwrap();
        assert_eq!(
            file_digest(&p).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
