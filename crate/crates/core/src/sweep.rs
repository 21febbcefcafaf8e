//! Experiment grids: one axis of configuration values crossed with a list of
//! labelled variants, each cell run for a number of seeded replications.
//!
//! Every `(axis value, variant, replication)` job is independent. Jobs run on
//! a rayon pool when the `parallel` feature is enabled and are collected back
//! in grid order, so the resulting table does not depend on the worker count.
//! All cells of a sweep share the base `master_seed`, and replication `r` of
//! every cell uses replication id `r`: variants are paired comparisons over
//! the same per-agent random streams.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::run_replication;
use crate::config::{ConfigError, ScenarioConfig};
use crate::metrics::Summary;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("sweep `{sweep}`, {axis_field}={axis_value}, variant `{variant}`: {source}")]
    Cell {
        sweep: String,
        axis_field: String,
        axis_value: String,
        variant: String,
        #[source]
        source: Box<ConfigError>,
    },
    #[error("sweep `{0}` has an empty axis")]
    EmptyAxis(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("malformed sweep spec: {0}")]
    Spec(String),
    #[error("malformed table: {0}")]
    Table(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[cfg(feature = "parallel")]
    #[error(transparent)]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub field: String,
    pub values: Vec<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub label: String,
    #[serde(default)]
    pub overrides: BTreeMap<String, serde_json::Value>,
}

impl Variant {
    fn new(label: &str, overrides: &[(&str, serde_json::Value)]) -> Self {
        Variant {
            label: label.to_string(),
            overrides: overrides.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub base: ScenarioConfig,
    pub axis: Axis,
    /// An empty list means a single variant labelled `base`.
    #[serde(default)]
    pub variants: Vec<Variant>,
}

/// One fully resolved grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub axis_value: String,
    pub variant: String,
    pub config: ScenarioConfig,
}

/// Renders an axis value for the table: strings bare, everything else as
/// compact JSON.
pub fn axis_label(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

impl SweepSpec {
    pub fn from_toml_str(s: &str) -> Result<Self, SweepError> {
        toml::from_str(s).map_err(|e| SweepError::Spec(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, SweepError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    fn variants_or_base(&self) -> Vec<Variant> {
        if self.variants.is_empty() {
            vec![Variant::new("base", &[])]
        } else {
            self.variants.clone()
        }
    }

    /// Resolves and validates every cell, axis-major and variant-minor.
    pub fn cells(&self) -> Result<Vec<Cell>, SweepError> {
        if self.axis.values.is_empty() {
            return Err(SweepError::EmptyAxis(self.name.clone()));
        }
        let variants = self.variants_or_base();
        let mut cells = Vec::with_capacity(self.axis.values.len() * variants.len());
        for value in &self.axis.values {
            let axis_value = axis_label(value);
            for variant in &variants {
                let cell_err = |source| SweepError::Cell {
                    sweep: self.name.clone(),
                    axis_field: self.axis.field.clone(),
                    axis_value: axis_value.clone(),
                    variant: variant.label.clone(),
                    source: Box::new(source),
                };
                let mut config = self.base.clone();
                config
                    .set_value(&self.axis.field, value.clone())
                    .map_err(cell_err)?;
                for (k, v) in &variant.overrides {
                    config.set_value(k, v.clone()).map_err(cell_err)?;
                }
                let config = config.validate().map_err(cell_err)?;
                cells.push(Cell {
                    axis_value: axis_value.clone(),
                    variant: variant.label.clone(),
                    config,
                });
            }
        }
        Ok(cells)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RowKind {
    Replication(u32),
    Mean,
    StdDev,
}

impl RowKind {
    fn label(self) -> String {
        match self {
            RowKind::Replication(r) => r.to_string(),
            RowKind::Mean => "mean".to_string(),
            RowKind::StdDev => "stddev".to_string(),
        }
    }

    fn parse(s: &str) -> Result<Self, SweepError> {
        match s {
            "mean" => Ok(RowKind::Mean),
            "stddev" => Ok(RowKind::StdDev),
            _ => s
                .parse()
                .map(RowKind::Replication)
                .map_err(|_| SweepError::Table(format!("bad replication `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sweep: String,
    pub axis_field: String,
    pub axis_value: String,
    pub variant: String,
    pub kind: RowKind,
    pub summary: Summary,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

pub const CSV_COLUMNS: [&str; 16] = [
    "sweep",
    "axis_field",
    "axis_value",
    "variant",
    "replication",
    "pdr",
    "ipg_tail_1e5_ms",
    "ipg_tail_1e4_ms",
    "prob_ipg_100ms",
    "aoi_tail_1e5_ms",
    "aoi_tail_1e4_ms",
    "prob_aoi_0ms",
    "n_ipg",
    "n_aoi",
    "r",
    "t",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Flat record used for the JSON form; field names match the CSV columns.
#[derive(Debug, Serialize, Deserialize)]
struct RowRecord {
    sweep: String,
    axis_field: String,
    axis_value: String,
    variant: String,
    replication: String,
    #[serde(flatten)]
    summary: SummaryRecord,
}

#[derive(Debug, Serialize, Deserialize)]
struct SummaryRecord {
    pdr: Option<f64>,
    ipg_tail_1e5_ms: Option<f64>,
    ipg_tail_1e4_ms: Option<f64>,
    prob_ipg_100ms: Option<f64>,
    aoi_tail_1e5_ms: Option<f64>,
    aoi_tail_1e4_ms: Option<f64>,
    prob_aoi_0ms: Option<f64>,
    n_ipg: Option<f64>,
    n_aoi: Option<f64>,
    r: Option<f64>,
    t: Option<f64>,
}

impl From<&Summary> for SummaryRecord {
    fn from(s: &Summary) -> Self {
        let v = s.values();
        SummaryRecord {
            pdr: v[0],
            ipg_tail_1e5_ms: v[1],
            ipg_tail_1e4_ms: v[2],
            prob_ipg_100ms: v[3],
            aoi_tail_1e5_ms: v[4],
            aoi_tail_1e4_ms: v[5],
            prob_aoi_0ms: v[6],
            n_ipg: v[7],
            n_aoi: v[8],
            r: v[9],
            t: v[10],
        }
    }
}

impl From<SummaryRecord> for Summary {
    fn from(s: SummaryRecord) -> Self {
        Summary::from_values([
            s.pdr,
            s.ipg_tail_1e5_ms,
            s.ipg_tail_1e4_ms,
            s.prob_ipg_100ms,
            s.aoi_tail_1e5_ms,
            s.aoi_tail_1e4_ms,
            s.prob_aoi_0ms,
            s.n_ipg,
            s.n_aoi,
            s.r,
            s.t,
        ])
    }
}

fn fmt_value(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_value(s: &str) -> Result<Option<f64>, SweepError> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| SweepError::Table(format!("bad number `{s}`")))
}

impl SweepTable {
    /// Per-replication rows, excluding aggregates.
    pub fn data_rows(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows
            .iter()
            .filter(|r| matches!(r.kind, RowKind::Replication(_)))
    }

    fn find(&self, axis_value: &str, variant: &str, kind: RowKind) -> Option<&Summary> {
        self.rows
            .iter()
            .find(|r| r.axis_value == axis_value && r.variant == variant && r.kind == kind)
            .map(|r| &r.summary)
    }

    pub fn mean(&self, axis_value: &str, variant: &str) -> Option<&Summary> {
        self.find(axis_value, variant, RowKind::Mean)
    }

    pub fn stddev(&self, axis_value: &str, variant: &str) -> Option<&Summary> {
        self.find(axis_value, variant, RowKind::StdDev)
    }

    pub fn replications(&self, axis_value: &str, variant: &str) -> Vec<&Summary> {
        self.rows
            .iter()
            .filter(|r| {
                r.axis_value == axis_value
                    && r.variant == variant
                    && matches!(r.kind, RowKind::Replication(_))
            })
            .map(|r| &r.summary)
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), SweepError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_COLUMNS)?;
        for row in &self.rows {
            let mut rec = vec![
                row.sweep.clone(),
                row.axis_field.clone(),
                row.axis_value.clone(),
                row.variant.clone(),
                row.kind.label(),
            ];
            rec.extend(row.summary.values().into_iter().map(fmt_value));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, SweepError> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header != CSV_COLUMNS {
            return Err(SweepError::Table(format!("unexpected header {header:?}")));
        }
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let mut values = [None; 11];
            for (i, slot) in values.iter_mut().enumerate() {
                *slot = parse_value(&rec[5 + i])?;
            }
            rows.push(SweepRow {
                sweep: rec[0].to_string(),
                axis_field: rec[1].to_string(),
                axis_value: rec[2].to_string(),
                variant: rec[3].to_string(),
                kind: RowKind::parse(&rec[4])?,
                summary: Summary::from_values(values),
            });
        }
        Ok(SweepTable { rows })
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<(), SweepError> {
        let records: Vec<RowRecord> = self
            .rows
            .iter()
            .map(|row| RowRecord {
                sweep: row.sweep.clone(),
                axis_field: row.axis_field.clone(),
                axis_value: row.axis_value.clone(),
                variant: row.variant.clone(),
                replication: row.kind.label(),
                summary: SummaryRecord::from(&row.summary),
            })
            .collect();
        serde_json::to_writer_pretty(out, &records)?;
        Ok(())
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self, SweepError> {
        let records: Vec<RowRecord> = serde_json::from_reader(input)?;
        let rows = records
            .into_iter()
            .map(|r| {
                Ok(SweepRow {
                    kind: RowKind::parse(&r.replication)?,
                    sweep: r.sweep,
                    axis_field: r.axis_field,
                    axis_value: r.axis_value,
                    variant: r.variant,
                    summary: r.summary.into(),
                })
            })
            .collect::<Result<_, SweepError>>()?;
        Ok(SweepTable { rows })
    }

    /// Human-readable digest of the aggregate rows.
    pub fn render_means(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<12} {:<20} {:>8} {:>12} {:>12} {:>10} {:>12}",
            "axis", "variant", "pdr", "ipg@1e-5", "ipg@1e-4", "p(ipg=100)", "aoi@1e-5"
        );
        let show = |v: Option<f64>, prec: usize| match v {
            Some(x) => format!("{x:.prec$}"),
            None => "-".to_string(),
        };
        for row in self.rows.iter().filter(|r| r.kind == RowKind::Mean) {
            let m = &row.summary;
            let _ = writeln!(
                s,
                "{:<12} {:<20} {:>8} {:>12} {:>12} {:>10} {:>12}",
                row.axis_value,
                row.variant,
                show(m.pdr, 4),
                show(m.ipg_tail_1e5_ms, 0),
                show(m.ipg_tail_1e4_ms, 0),
                show(m.prob_ipg_100ms, 4),
                show(m.aoi_tail_1e5_ms, 0),
            );
        }
        s
    }
}

/// Writes the table atomically: a temporary file in the destination's
/// directory is renamed over `dest` once complete.
pub fn emit_table(table: &SweepTable, format: Format, dest: &Path) -> Result<(), SweepError> {
    let dir = match dest.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let out = std::io::BufWriter::new(tmp.as_file_mut());
        match format {
            Format::Csv => table.write_csv(out)?,
            Format::Json => table.write_json(out)?,
        }
    }
    tmp.as_file().sync_all()?;
    tmp.persist(dest).map_err(|e| e.error)?;
    Ok(())
}

fn run_job(cell: &Cell, replication: u32) -> Summary {
    run_replication(&cell.config, replication)
        .expect("cells are validated before running")
        .summary(cell.config.period_ms)
}

fn jobs(cells: &[Cell]) -> Vec<(usize, u32)> {
    cells
        .iter()
        .enumerate()
        .flat_map(|(i, c)| (0..c.config.replications).map(move |r| (i, r)))
        .collect()
}

fn assemble(spec: &SweepSpec, cells: &[Cell], jobs: &[(usize, u32)], results: Vec<Summary>) -> SweepTable {
    let mut rows = Vec::with_capacity(results.len() + 2 * cells.len());
    let mut i = 0;
    for (ci, cell) in cells.iter().enumerate() {
        let row = |kind, summary| SweepRow {
            sweep: spec.name.clone(),
            axis_field: spec.axis.field.clone(),
            axis_value: cell.axis_value.clone(),
            variant: cell.variant.clone(),
            kind,
            summary,
        };
        let start = i;
        while i < jobs.len() && jobs[i].0 == ci {
            rows.push(row(RowKind::Replication(jobs[i].1), results[i]));
            i += 1;
        }
        let (mean, std) = Summary::aggregate(&results[start..i]);
        rows.push(row(RowKind::Mean, mean));
        rows.push(row(RowKind::StdDev, std));
    }
    SweepTable { rows }
}

/// Runs every job on the calling thread.
pub fn run_sweep_sequential(spec: &SweepSpec) -> Result<SweepTable, SweepError> {
    let cells = spec.cells()?;
    let jobs = jobs(&cells);
    let results = jobs.iter().map(|&(c, r)| run_job(&cells[c], r)).collect();
    Ok(assemble(spec, &cells, &jobs, results))
}

/// Runs the grid with up to `parallelism` workers (`None`: rayon's default
/// pool). Output is identical for every worker count.
#[cfg(feature = "parallel")]
pub fn run_sweep(spec: &SweepSpec, parallelism: Option<usize>) -> Result<SweepTable, SweepError> {
    use rayon::prelude::*;

    if parallelism == Some(1) {
        return run_sweep_sequential(spec);
    }
    let cells = spec.cells()?;
    let jobs = jobs(&cells);
    let work = || -> Vec<Summary> { jobs.par_iter().map(|&(c, r)| run_job(&cells[c], r)).collect() };
    let results = match parallelism {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()?
            .install(work),
        None => work(),
    };
    Ok(assemble(spec, &cells, &jobs, results))
}

/// Sequential fallback when built without the `parallel` feature.
#[cfg(not(feature = "parallel"))]
pub fn run_sweep(spec: &SweepSpec, _parallelism: Option<usize>) -> Result<SweepTable, SweepError> {
    run_sweep_sequential(spec)
}

/// A one-cell sweep covering all replications of a single scenario.
pub fn scenario_spec(name: &str, cfg: &ScenarioConfig) -> SweepSpec {
    SweepSpec {
        name: name.to_string(),
        description: String::new(),
        base: cfg.clone(),
        axis: Axis {
            field: "num_targets".to_string(),
            values: vec![cfg.num_targets.into()],
        },
        variants: Vec::new(),
    }
}

fn oneshot(range: [u32; 2]) -> [(&'static str, serde_json::Value); 2] {
    [
        ("oneshot_enabled", true.into()),
        ("oneshot_range", serde_json::json!(range)),
    ]
}

fn with(extra: &[(&'static str, serde_json::Value)], more: &[(&'static str, serde_json::Value)]) -> Vec<(&'static str, serde_json::Value)> {
    extra.iter().chain(more).cloned().collect()
}

fn interval_sweep(name: &str, targets: usize) -> SweepSpec {
    SweepSpec {
        name: name.to_string(),
        description: format!(
            "V=A={targets}: attacker hold interval fixed at 1..15, without and with one-shot"
        ),
        base: ScenarioConfig {
            num_targets: targets,
            num_attackers: targets,
            ..Default::default()
        },
        axis: Axis {
            field: "attacker_interval".to_string(),
            values: (1..=15u32).map(Into::into).collect(),
        },
        variants: vec![
            Variant::new("no_oneshot", &[]),
            Variant::new("os_2_6", &oneshot([2, 6])),
            Variant::new("os_5_15", &oneshot([5, 15])),
        ],
    }
}

/// The named experiment grids.
pub fn builtin_sweeps() -> Vec<SweepSpec> {
    let attack = [("num_attackers", serde_json::Value::from(5))];
    let no_attack = [("num_attackers", serde_json::Value::from(0))];
    let density = SweepSpec {
        name: "fig_density".to_string(),
        description: "V in 5..70 with five attackers or none, without and with one-shot".to_string(),
        base: ScenarioConfig::default(),
        axis: Axis {
            field: "num_targets".to_string(),
            values: [5, 10, 20, 30, 40, 50, 60, 70].into_iter().map(Into::into).collect(),
        },
        variants: vec![
            Variant::new("no_attack", &no_attack),
            Variant::new("attack", &attack),
            Variant::new("attack_os_2_6", &with(&attack, &oneshot([2, 6]))),
            Variant::new("attack_os_5_15", &with(&attack, &oneshot([5, 15]))),
            Variant::new("no_attack_os_2_6", &with(&no_attack, &oneshot([2, 6]))),
            Variant::new("no_attack_os_5_15", &with(&no_attack, &oneshot([5, 15]))),
        ],
    };
    vec![
        density,
        interval_sweep("fig_interval_5", 5),
        interval_sweep("fig_interval_30", 30),
    ]
}

pub fn find_preset(name: &str) -> Result<SweepSpec, SweepError> {
    builtin_sweeps()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| SweepError::UnknownPreset(name.to_string()))
}
