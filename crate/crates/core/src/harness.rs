//! Batch reanalysis: study ingestion, hyperparameter sweeps, sensitivity
//! curves and result files.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::averaging::{bf_avg01, ModelPriorWeights};
use crate::depib::bf01_depib;
use crate::error::{Error, Result};
use crate::ib::bf01_ib;
use crate::lt::bf01_lt;
use crate::model::{DepIbParams, EvidenceResult, LtParams, PriorConfig, TwoByTwoData};
use crate::priors::DensityGrid;

/// Header of study files.
pub const STUDY_HEADER: [&str; 6] = ["id", "label", "y1", "n1", "y2", "n2"];
/// Header of sweep result CSV files.
pub const RESULT_HEADER: [&str; 11] = [
    "study_id", "method", "a", "sigma_beta", "sigma_psi", "sigma_eta", "sigma_zeta", "log_bf01", "bf01",
    "abs_error", "error",
];
/// The study corpus shipped with the crate.
pub const SHIPPED_CORPUS: &str = include_str!("../data/studies.csv");
/// JSON schema of sweep result files.
pub const RESULT_SCHEMA: &str = include_str!("../schemas/sweep_results.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub id: i64,
    pub label: String,
    pub data: TwoByTwoData,
}

pub fn ingest_csv(path: &Path) -> Result<Vec<StudyRecord>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    ingest_reader(file).map_err(|e| match e {
        Error::Io { source, .. } => Error::Io { path: path.to_path_buf(), source },
        e => e,
    })
}

pub fn ingest_reader<R: Read>(mut r: R) -> Result<Vec<StudyRecord>> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf).map_err(|source| Error::Io { path: "<reader>".into(), source })?;
    let text = std::str::from_utf8(&buf).map_err(|e| Error::Parse {
        line: 1 + buf[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() as u64,
        message: "input is not valid UTF-8".into(),
    })?;
    ingest_str(text)
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse { line, message: e.to_string() }
}

fn check_header(rec: &csv::StringRecord, expected: &[&str], line: u64) -> Result<()> {
    if rec.iter().ne(expected.iter().copied()) {
        return Err(Error::Parse {
            line,
            message: format!("expected header `{}`", expected.join(",")),
        });
    }
    Ok(())
}

fn parse_field<T: FromStr>(rec: &csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<T>
where
    T::Err: fmt::Display,
{
    rec[idx].parse().map_err(|e| Error::Parse {
        line,
        message: format!("{name} = {:?}: {e}", &rec[idx]),
    })
}

/// Parses a study file. An empty input is an empty batch.
pub fn ingest_str(text: &str) -> Result<Vec<StudyRecord>> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut rdr = csv_reader(text);
    let mut out = Vec::new();
    let mut seen: HashMap<i64, u64> = HashMap::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        if k == 0 {
            check_header(&rec, &STUDY_HEADER, line)?;
            continue;
        }
        if rec.len() != STUDY_HEADER.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", STUDY_HEADER.len(), rec.len()),
            });
        }
        let id: i64 = parse_field(&rec, 0, "id", line)?;
        let counts = [
            parse_field::<u64>(&rec, 2, "y1", line)?,
            parse_field::<u64>(&rec, 3, "n1", line)?,
            parse_field::<u64>(&rec, 4, "y2", line)?,
            parse_field::<u64>(&rec, 5, "n2", line)?,
        ];
        let data = TwoByTwoData::new(counts[0], counts[1], counts[2], counts[3]).map_err(|e| Error::Study {
            line,
            study_id: id,
            source: Box::new(e),
        })?;
        if let Some(first) = seen.insert(id, line) {
            return Err(Error::Study {
                line,
                study_id: id,
                source: Box::new(Error::Validation {
                    field: "id",
                    reason: format!("duplicate id, first used on line {first}"),
                }),
            });
        }
        out.push(StudyRecord { id, label: rec[1].to_string(), data });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMethod {
    Ib,
    Lt,
    DepIb,
    /// Equal-weight average over the IB and LT null and alternative models.
    Avg,
}

impl SweepMethod {
    pub const ALL: [SweepMethod; 4] = [SweepMethod::Ib, SweepMethod::Lt, SweepMethod::DepIb, SweepMethod::Avg];

    pub fn as_str(self) -> &'static str {
        match self {
            SweepMethod::Ib => "ib",
            SweepMethod::Lt => "lt",
            SweepMethod::DepIb => "dep_ib",
            SweepMethod::Avg => "avg",
        }
    }
}

impl fmt::Display for SweepMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ib" => Ok(SweepMethod::Ib),
            "lt" => Ok(SweepMethod::Lt),
            "dep_ib" | "dep-ib" => Ok(SweepMethod::DepIb),
            "avg" => Ok(SweepMethod::Avg),
            _ => Err(Error::Config(format!("unknown method {s:?}"))),
        }
    }
}

/// Hyperparameters of one sweep cell; those a method does not use are `None`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
pub struct ParamPoint {
    pub a: Option<f64>,
    pub sigma_beta: Option<f64>,
    pub sigma_psi: Option<f64>,
    pub sigma_eta: Option<f64>,
    pub sigma_zeta: Option<f64>,
}

/// Hyperparameter values to sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrids {
    pub a: Vec<f64>,
    pub sigma_beta: Vec<f64>,
    pub sigma_psi: Vec<f64>,
    pub sigma_eta: Vec<f64>,
    pub sigma_zeta: Vec<f64>,
}

impl Default for SweepGrids {
    /// `a ∈ {1, 1.5, …, 5}`, `σ_ψ ∈ {1, 1.1, …, 2}`, `σ_β = 1`, `σ_η = 0.2`, `σ_ζ = 0.5`.
    fn default() -> Self {
        SweepGrids {
            a: (2..=10).map(|k| k as f64 / 2.0).collect(),
            sigma_beta: vec![1.0],
            sigma_psi: (10..=20).map(|k| k as f64 / 10.0).collect(),
            sigma_eta: vec![0.2],
            sigma_zeta: vec![0.5],
        }
    }
}

impl SweepGrids {
    /// A grid with one value per hyperparameter.
    pub fn single(a: f64, sigma_beta: f64, sigma_psi: f64, sigma_eta: f64, sigma_zeta: f64) -> Self {
        SweepGrids {
            a: vec![a],
            sigma_beta: vec![sigma_beta],
            sigma_psi: vec![sigma_psi],
            sigma_eta: vec![sigma_eta],
            sigma_zeta: vec![sigma_zeta],
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("a", &self.a),
            ("sigma_beta", &self.sigma_beta),
            ("sigma_psi", &self.sigma_psi),
            ("sigma_eta", &self.sigma_eta),
            ("sigma_zeta", &self.sigma_zeta),
        ] {
            if v.is_empty() {
                return Err(Error::Config(format!("{name} grid is empty")));
            }
        }
        Ok(())
    }

    fn points(&self, method: SweepMethod) -> Vec<ParamPoint> {
        let mut pts = Vec::new();
        match method {
            SweepMethod::Ib => {
                for &a in &self.a {
                    pts.push(ParamPoint { a: Some(a), ..Default::default() });
                }
            }
            SweepMethod::Lt => {
                for &sb in &self.sigma_beta {
                    for &sp in &self.sigma_psi {
                        pts.push(ParamPoint { sigma_beta: Some(sb), sigma_psi: Some(sp), ..Default::default() });
                    }
                }
            }
            SweepMethod::DepIb => {
                for &se in &self.sigma_eta {
                    for &sz in &self.sigma_zeta {
                        pts.push(ParamPoint { sigma_eta: Some(se), sigma_zeta: Some(sz), ..Default::default() });
                    }
                }
            }
            SweepMethod::Avg => {
                for &a in &self.a {
                    for &sb in &self.sigma_beta {
                        for &sp in &self.sigma_psi {
                            pts.push(ParamPoint {
                                a: Some(a),
                                sigma_beta: Some(sb),
                                sigma_psi: Some(sp),
                                ..Default::default()
                            });
                        }
                    }
                }
            }
        }
        pts.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        pts.dedup();
        pts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub study_id: i64,
    pub method: SweepMethod,
    pub params: ParamPoint,
    /// NaN when the cell failed.
    pub log_bf01: f64,
    pub abs_error_estimate: f64,
    /// Error code of a failed cell.
    pub error: Option<String>,
}

impl SweepResult {
    pub fn bf01(&self) -> f64 {
        self.log_bf01.exp()
    }
}

fn need(v: Option<f64>, name: &str) -> Result<f64> {
    v.ok_or_else(|| Error::Config(format!("{name} missing for this method")))
}

/// Bayes factor of one method at one hyperparameter point.
pub fn evaluate(d: &TwoByTwoData, method: SweepMethod, p: &ParamPoint) -> Result<EvidenceResult> {
    match method {
        SweepMethod::Ib => bf01_ib(d, need(p.a, "a")?),
        SweepMethod::Lt => bf01_lt(d, need(p.sigma_beta, "sigma_beta")?, need(p.sigma_psi, "sigma_psi")?),
        SweepMethod::DepIb => bf01_depib(
            d,
            &DepIbParams::new(need(p.sigma_eta, "sigma_eta")?, need(p.sigma_zeta, "sigma_zeta")?)?,
        ),
        SweepMethod::Avg => {
            let ib = PriorConfig::ib(need(p.a, "a")?)?;
            let lt = PriorConfig::lt(need(p.sigma_beta, "sigma_beta")?, need(p.sigma_psi, "sigma_psi")?)?;
            let r = bf_avg01(d, &ModelPriorWeights::default(), &ib, &lt)?;
            Ok(r.evidence)
        }
    }
}

fn cell(study_id: i64, d: &TwoByTwoData, method: SweepMethod, params: ParamPoint) -> SweepResult {
    match evaluate(d, method, &params) {
        Ok(r) => SweepResult {
            study_id,
            method,
            params,
            log_bf01: r.log_bf01,
            abs_error_estimate: r.abs_error_estimate,
            error: None,
        },
        Err(e) => SweepResult {
            study_id,
            method,
            params,
            log_bf01: f64::NAN,
            abs_error_estimate: f64::NAN,
            error: Some(e.code().to_string()),
        },
    }
}

/// Runs every (study, method, hyperparameter point) cell on up to `jobs`
/// threads (0 picks the rayon default). Output order is by study id, method
/// and hyperparameters, whatever the thread count. Failed cells are recorded
/// in-row.
pub fn run_sweep(batch: &[StudyRecord], methods: &[SweepMethod], grids: &SweepGrids, jobs: usize) -> Result<Vec<SweepResult>> {
    grids.validate()?;
    let mut methods = methods.to_vec();
    methods.sort();
    methods.dedup();
    let mut studies: Vec<&StudyRecord> = batch.iter().collect();
    studies.sort_by_key(|s| s.id);
    let mut cells = Vec::new();
    for s in &studies {
        for &m in &methods {
            for p in grids.points(m) {
                cells.push((s.id, s.data, m, p));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| cells.par_iter().map(|&(id, d, m, p)| cell(id, &d, m, p)).collect()))
}

/// Median `log BF01` over studies for one method at one hyperparameter point.
pub fn median_log_bf01(results: &[SweepResult], method: SweepMethod, params: &ParamPoint) -> Option<f64> {
    let mut v: Vec<f64> = results
        .iter()
        .filter(|r| r.method == method && r.params == *params && r.error.is_none())
        .map(|r| r.log_bf01)
        .collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Smallest and largest `log BF01` of one study and method across its sweep.
pub fn study_range(results: &[SweepResult], study_id: i64, method: SweepMethod) -> Option<(f64, f64)> {
    results
        .iter()
        .filter(|r| r.study_id == study_id && r.method == method && r.error.is_none())
        .map(|r| r.log_bf01)
        .fold(None, |acc, x| match acc {
            None => Some((x, x)),
            Some((lo, hi)) => Some((f64::min(lo, x), f64::max(hi, x))),
        })
}

/// One point of a sensitivity curve, `y₁ = y₂ = y` out of `n` per group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub n: u64,
    pub y: u64,
    pub method: SweepMethod,
    pub params: ParamPoint,
    pub log_bf01: f64,
    pub error: Option<String>,
}

fn config_method(cfg: &PriorConfig) -> (SweepMethod, ParamPoint) {
    match *cfg {
        PriorConfig::Ib { a } => (SweepMethod::Ib, ParamPoint { a: Some(a), ..Default::default() }),
        PriorConfig::Lt(LtParams { sigma_beta, sigma_psi, .. }) => (
            SweepMethod::Lt,
            ParamPoint { sigma_beta: Some(sigma_beta), sigma_psi: Some(sigma_psi), ..Default::default() },
        ),
        PriorConfig::DepIb(DepIbParams { sigma_eta, sigma_zeta, .. }) => (
            SweepMethod::DepIb,
            ParamPoint { sigma_eta: Some(sigma_eta), sigma_zeta: Some(sigma_zeta), ..Default::default() },
        ),
    }
}

/// Bayes factors for equal counts `y ∈ {0, …, ⌊n/2⌋}` in both groups; the
/// curve is symmetric about `n/2`.
pub fn sensitivity_curve(n: u64, configs: &[PriorConfig]) -> Result<Vec<SensitivityRow>> {
    if n < 2 {
        return Err(Error::Validation { field: "n", reason: format!("{n} < 2") });
    }
    for c in configs {
        c.validate()?;
    }
    let cells: Vec<(PriorConfig, u64)> = configs
        .iter()
        .flat_map(|c| (0..=n / 2).map(move |y| (*c, y)))
        .collect();
    Ok(cells
        .par_iter()
        .map(|(cfg, y)| {
            let (method, params) = config_method(cfg);
            let d = TwoByTwoData { y1: *y, n1: n, y2: *y, n2: n };
            let r = match cfg {
                PriorConfig::Ib { a } => bf01_ib(&d, *a),
                PriorConfig::Lt(p) => crate::lt::bf01_lt_with(&d, p),
                PriorConfig::DepIb(p) => bf01_depib(&d, p),
            };
            match r {
                Ok(r) => SensitivityRow { n, y: *y, method, params, log_bf01: r.log_bf01, error: None },
                Err(e) => SensitivityRow {
                    n,
                    y: *y,
                    method,
                    params,
                    log_bf01: f64::NAN,
                    error: Some(e.code().into()),
                },
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::Config(format!("unknown format {s:?}"))),
        }
    }
}

/// 17 significant digits; empty for NaN or absent values.
fn fmt_num(x: Option<f64>) -> String {
    match x {
        Some(v) if !v.is_nan() => format!("{v:.16e}"),
        _ => String::new(),
    }
}

fn json_num(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => format!("{v:.16e}"),
        _ => "null".into(),
    }
}

fn result_cells(r: &SweepResult) -> [Option<f64>; 8] {
    let p = &r.params;
    let ok = r.error.is_none();
    [
        p.a,
        p.sigma_beta,
        p.sigma_psi,
        p.sigma_eta,
        p.sigma_zeta,
        Some(r.log_bf01).filter(|_| ok),
        Some(r.bf01()).filter(|_| ok),
        Some(r.abs_error_estimate).filter(|_| ok),
    ]
}

pub fn write_results<W: Write>(results: &[SweepResult], format: OutputFormat, w: W) -> io::Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut wtr = csv::Writer::from_writer(w);
            wtr.write_record(RESULT_HEADER)?;
            for r in results {
                let mut row = vec![r.study_id.to_string(), r.method.to_string()];
                row.extend(result_cells(r).iter().map(|x| fmt_num(*x)));
                row.push(r.error.clone().unwrap_or_default());
                wtr.write_record(&row)?;
            }
            wtr.flush()
        }
        OutputFormat::Json => {
            let mut w = io::BufWriter::new(w);
            w.write_all(b"[")?;
            for (k, r) in results.iter().enumerate() {
                w.write_all(if k == 0 { b"\n  {" } else { b",\n  {" })?;
                write!(w, "\"study_id\": {}, \"method\": \"{}\"", r.study_id, r.method)?;
                for (name, x) in RESULT_HEADER[2..10].iter().zip(result_cells(r)) {
                    write!(w, ", \"{name}\": {}", json_num(x))?;
                }
                let err = match &r.error {
                    Some(e) => serde_json::to_string(e).map_err(io::Error::other)?,
                    None => "null".into(),
                };
                write!(w, ", \"error\": {err}}}")?;
            }
            w.write_all(if results.is_empty() { b"]\n" } else { b"\n]\n" })?;
            w.flush()
        }
    }
}

pub fn results_to_string(results: &[SweepResult], format: OutputFormat) -> String {
    let mut buf = Vec::new();
    write_results(results, format, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("output is UTF-8")
}

/// Writes results to `path`.
pub fn emit(results: &[SweepResult], format: OutputFormat, path: &Path) -> Result<()> {
    let io_err = |source| Error::Io { path: path.to_path_buf(), source };
    let file = std::fs::File::create(path).map_err(io_err)?;
    write_results(results, format, file).map_err(io_err)
}

fn opt_num(s: &str, name: &str, line: u64) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|e| Error::Parse { line, message: format!("{name} = {s:?}: {e}") })
}

/// Parses a CSV file written by [`write_results`].
pub fn parse_results_csv(text: &str) -> Result<Vec<SweepResult>> {
    let mut rdr = csv_reader(text);
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        if k == 0 {
            check_header(&rec, &RESULT_HEADER, line)?;
            continue;
        }
        if rec.len() != RESULT_HEADER.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", RESULT_HEADER.len(), rec.len()),
            });
        }
        let mut nums = [None; 8];
        for (i, slot) in nums.iter_mut().enumerate() {
            *slot = opt_num(&rec[i + 2], RESULT_HEADER[i + 2], line)?;
        }
        let method = rec[1].parse().map_err(|e: Error| Error::Parse { line, message: e.to_string() })?;
        out.push(SweepResult {
            study_id: parse_field(&rec, 0, "study_id", line)?,
            method,
            params: ParamPoint {
                a: nums[0],
                sigma_beta: nums[1],
                sigma_psi: nums[2],
                sigma_eta: nums[3],
                sigma_zeta: nums[4],
            },
            log_bf01: nums[5].unwrap_or(f64::NAN),
            abs_error_estimate: nums[7].unwrap_or(f64::NAN),
            error: Some(rec[10].to_string()).filter(|s| !s.is_empty()),
        });
    }
    Ok(out)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonRow {
    study_id: i64,
    method: SweepMethod,
    a: Option<f64>,
    sigma_beta: Option<f64>,
    sigma_psi: Option<f64>,
    sigma_eta: Option<f64>,
    sigma_zeta: Option<f64>,
    log_bf01: Option<f64>,
    #[allow(dead_code)]
    bf01: Option<f64>,
    abs_error: Option<f64>,
    error: Option<String>,
}

/// Parses a JSON file written by [`write_results`].
pub fn parse_results_json(text: &str) -> Result<Vec<SweepResult>> {
    let rows: Vec<JsonRow> = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line() as u64,
        message: e.to_string(),
    })?;
    Ok(rows
        .into_iter()
        .map(|r| SweepResult {
            study_id: r.study_id,
            method: r.method,
            params: ParamPoint {
                a: r.a,
                sigma_beta: r.sigma_beta,
                sigma_psi: r.sigma_psi,
                sigma_eta: r.sigma_eta,
                sigma_zeta: r.sigma_zeta,
            },
            log_bf01: r.log_bf01.unwrap_or(f64::NAN),
            abs_error_estimate: r.abs_error.unwrap_or(f64::NAN),
            error: r.error,
        })
        .collect())
}

pub fn write_sensitivity_csv<W: Write>(rows: &[SensitivityRow], w: W) -> io::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "n", "y", "method", "a", "sigma_beta", "sigma_psi", "sigma_eta", "sigma_zeta", "log_bf01", "bf01", "error",
    ])?;
    for r in rows {
        let p = &r.params;
        let ok = r.error.is_none();
        let mut row = vec![r.n.to_string(), r.y.to_string(), r.method.to_string()];
        for x in [p.a, p.sigma_beta, p.sigma_psi, p.sigma_eta, p.sigma_zeta] {
            row.push(fmt_num(x));
        }
        row.push(fmt_num(Some(r.log_bf01).filter(|_| ok)));
        row.push(fmt_num(Some(r.log_bf01.exp()).filter(|_| ok)));
        row.push(r.error.clone().unwrap_or_default());
        wtr.write_record(&row)?;
    }
    wtr.flush()
}

/// Writes a density grid as `x,y,density` rows (`y` empty for 1D grids).
pub fn write_density_grid_csv<W: Write>(g: &DensityGrid, w: W) -> io::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["x", "y", "density"])?;
    if g.is_2d() {
        for (j, &y) in g.y_axis.iter().enumerate() {
            for (i, &x) in g.x_axis.iter().enumerate() {
                wtr.write_record([fmt_num(Some(x)), fmt_num(Some(y)), fmt_num(Some(g.at(i, j)))])?;
            }
        }
    } else {
        for (x, v) in g.x_axis.iter().zip(&g.values) {
            wtr.write_record([fmt_num(Some(*x)), String::new(), fmt_num(Some(*v))])?;
        }
    }
    wtr.flush()
}
