//! Monte-Carlo experiments: null calibration and power of the tests under
//! spike alternatives, ECDF and KS summaries, and figure reproduction as
//! CSV plus SVG.

use std::f64::consts::TAU;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::RngStream;
use crate::sr_model::{synthesize_with, uniform_location, wrap_signed, Atom, AtomicMeasure, Observation};
use crate::stat_tests::{TestName, TestRunner, RANGE_SLACK};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "SRKNOTS_THREADS";

pub const DEFAULT_REPS: usize = 2000;
pub const DEFAULT_GRID_SIZES: [usize; 4] = [3, 10, 32, 50];

/// Fork tag of the lattice randomization stream inside a replication.
const RANDOMIZATION_TAG: u64 = 1;
const MAX_PLACEMENT_ATTEMPTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SigmaMode {
    /// Noise level handed to the known-variance statistics.
    Known(f64),
    /// Unit noise, hidden from the statistics.
    Unknown,
}

impl SigmaMode {
    fn noise(&self) -> f64 {
        match *self {
            SigmaMode::Known(s) => s,
            SigmaMode::Unknown => 1.0,
        }
    }

    fn known(&self) -> Option<f64> {
        match *self {
            SigmaMode::Known(s) => Some(s),
            SigmaMode::Unknown => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            SigmaMode::Known(_) => "known",
            SigmaMode::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SpikeWeight {
    LogN,
    SqrtN,
    Fixed(f64),
}

impl SpikeWeight {
    pub fn value(&self, fc: usize) -> f64 {
        let n = (2 * fc + 1) as f64;
        match *self {
            SpikeWeight::LogN => n.ln(),
            SpikeWeight::SqrtN => n.sqrt(),
            SpikeWeight::Fixed(w) => w,
        }
    }
}

impl fmt::Display for SpikeWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpikeWeight::LogN => f.write_str("logN"),
            SpikeWeight::SqrtN => f.write_str("sqrtN"),
            SpikeWeight::Fixed(w) => write!(f, "w{w}"),
        }
    }
}

/// Zero, one or two real positive spikes at uniform random locations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlternativeSpec {
    pub weights: Vec<SpikeWeight>,
    /// Minimal circular distance between two spikes.
    pub min_separation: f64,
}

impl AlternativeSpec {
    pub fn null() -> Self {
        AlternativeSpec {
            weights: Vec::new(),
            min_separation: 0.0,
        }
    }

    pub fn one(weight: SpikeWeight) -> Self {
        AlternativeSpec {
            weights: vec![weight],
            min_separation: 0.0,
        }
    }

    /// Two spikes at least `2π/f_c` apart.
    pub fn two(first: SpikeWeight, second: SpikeWeight, fc: usize) -> Self {
        AlternativeSpec {
            weights: vec![first, second],
            min_separation: TAU / fc as f64,
        }
    }

    pub fn n_spikes(&self) -> usize {
        self.weights.len()
    }

    pub fn id(&self) -> String {
        if self.weights.is_empty() {
            return "null".into();
        }
        self.weights
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("+")
    }

    fn validate(&self) -> Result<()> {
        if self.weights.len() > 2 {
            return Err(Error::InvalidArgument("at most two spikes are supported".into()));
        }
        if self.weights.len() == 2 && !(self.min_separation > 0.0 && self.min_separation <= std::f64::consts::PI) {
            return Err(Error::InvalidArgument(format!(
                "two-spike separation must lie in (0, π], got {}",
                self.min_separation
            )));
        }
        Ok(())
    }

    fn draw(&self, fc: usize, rng: &mut crate::numerics::StreamRng) -> Result<AtomicMeasure<f64>> {
        let mut locations: Vec<f64> = Vec::with_capacity(self.weights.len());
        for _ in &self.weights {
            let placed = (0..MAX_PLACEMENT_ATTEMPTS)
                .map(|_| uniform_location(rng))
                .find(|&t| {
                    locations
                        .iter()
                        .all(|&s| wrap_signed(t - s).abs() >= self.min_separation)
                })
                .ok_or_else(|| Error::InvalidArgument("could not place separated spikes".into()))?;
            locations.push(placed);
        }
        let atoms = locations
            .into_iter()
            .zip(&self.weights)
            .map(|(location, w)| Atom {
                location,
                weight: Complex::new(w.value(fc), 0.0),
            })
            .collect();
        AtomicMeasure::new(atoms)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub fc: usize,
    pub sigma_mode: SigmaMode,
    pub reps: usize,
    pub seed: u64,
    pub statistics: Vec<TestName>,
    pub alternative: AlternativeSpec,
    /// Worker threads; falls back to `SRKNOTS_THREADS`, then to all cores.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(fc: usize, sigma_mode: SigmaMode, statistics: Vec<TestName>, alternative: AlternativeSpec) -> Self {
        ExperimentConfig {
            fc,
            sigma_mode,
            reps: DEFAULT_REPS,
            seed: 0,
            statistics,
            alternative,
            threads: None,
        }
    }

    pub fn with_reps(mut self, reps: usize) -> Self {
        self.reps = reps;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.fc == 0 {
            return Err(Error::InvalidArgument("cutoff frequency must be at least 1".into()));
        }
        if self.reps == 0 {
            return Err(Error::InvalidArgument("reps must be at least 1".into()));
        }
        if self.statistics.is_empty() {
            return Err(Error::InvalidArgument("no statistic requested".into()));
        }
        if let SigmaMode::Known(s) = self.sigma_mode {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidArgument(format!("sigma must be positive, got {s}")));
            }
        }
        if self.sigma_mode == SigmaMode::Unknown {
            if let Some(name) = self.statistics.iter().find(|n| !is_studentized(**n)) {
                return Err(Error::InvalidArgument(format!("{name} needs a known noise level")));
            }
        }
        self.alternative.validate()
    }
}

fn is_studentized(name: TestName) -> bool {
    matches!(name, TestName::TRice | TestName::TGrid)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replication {
    pub rep: usize,
    /// One value per requested statistic, in request order.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationFailure {
    pub rep: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentTable {
    pub config: ExperimentConfig,
    pub rows: Vec<Replication>,
    pub failures: Vec<ReplicationFailure>,
}

impl ExperimentTable {
    pub fn column(&self, name: TestName) -> Option<Vec<f64>> {
        let idx = self.config.statistics.iter().position(|&n| n == name)?;
        Some(self.rows.iter().map(|r| r.values[idx]).collect())
    }
}

/// One replication's observation: spike locations then noise, all from
/// `RngStream(seed, rep)`.
pub fn replicate_observation(config: &ExperimentConfig, rep: usize) -> Result<Observation<f64>> {
    let mut rng = RngStream::new(config.seed, rep as u64).rng();
    let measure = config.alternative.draw(config.fc, &mut rng)?;
    let obs = synthesize_with(&measure, config.fc, config.sigma_mode.noise(), &mut rng)?;
    obs.with_sigma(config.sigma_mode.known())
}

fn replicate(config: &ExperimentConfig, rep: usize) -> Result<Vec<f64>> {
    let obs = replicate_observation(config, rep)?;
    let stream = RngStream::new(config.seed, rep as u64).fork(RANDOMIZATION_TAG);
    let mut runner = TestRunner::new(&obs, config.sigma_mode.known(), stream);
    config
        .statistics
        .iter()
        .map(|&name| runner.run(name).map(|r| r.value))
        .collect()
}

fn thread_count(config: &ExperimentConfig) -> Option<usize> {
    config
        .threads
        .or_else(|| std::env::var(THREADS_ENV).ok()?.trim().parse().ok())
        .filter(|&n| n > 0)
}

/// Runs every replication; output order and values do not depend on the
/// number of threads.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentTable> {
    config.validate()?;
    let work = || -> Vec<(usize, Result<Vec<f64>>)> {
        (0..config.reps)
            .into_par_iter()
            .map(|rep| (rep, replicate(config, rep)))
            .collect()
    };
    let outcomes = match thread_count(config) {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    let mut rows = Vec::with_capacity(config.reps);
    let mut failures = Vec::new();
    for (rep, outcome) in outcomes {
        match outcome {
            Ok(values) => rows.push(Replication { rep, values }),
            Err(e) => failures.push(ReplicationFailure {
                rep,
                reason: e.to_string(),
            }),
        }
    }
    Ok(ExperimentTable {
        config: config.clone(),
        rows,
        failures,
    })
}

/// Empirical distribution of a sample of p-values.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn cdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }
}

fn check_sample(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    if let Some(v) = values.iter().find(|v| !(-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(*v)) {
        return Err(Error::OutOfRange {
            name: "p-value",
            value: *v,
        });
    }
    Ok(())
}

pub fn ecdf(values: &[f64]) -> Result<Ecdf> {
    check_sample(values)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Ecdf { sorted })
}

/// Two-sided Kolmogorov–Smirnov distance to the uniform law on `[0, 1]`.
pub fn ks_uniform(values: &[f64]) -> Result<f64> {
    let e = ecdf(values)?;
    let n = e.len() as f64;
    Ok(e.sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| ((i + 1) as f64 / n - v).max(v - i as f64 / n))
        .fold(0.0, f64::max))
}

/// Fraction of the sample at or below `alpha`.
pub fn empirical_level(values: &[f64], alpha: f64) -> Result<f64> {
    Ok(ecdf(values)?.cdf(alpha))
}

/// Two-sided KS distance of a sample to a continuous reference CDF.
pub fn ks_distance(values: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max))
}

/// ECDFs evaluated on a common grid of `[0, 1]`, one column per curve.
#[derive(Debug, Clone, PartialEq)]
pub struct EcdfTable {
    pub grid: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl EcdfTable {
    pub fn new(grid_points: usize) -> Self {
        let m = grid_points.max(2) - 1;
        EcdfTable {
            grid: (0..=m).map(|i| i as f64 / m as f64).collect(),
            columns: Vec::new(),
        }
    }

    pub fn push(&mut self, label: impl Into<String>, values: &[f64]) -> Result<()> {
        let e = ecdf(values)?;
        let col = self.grid.iter().map(|&x| e.cdf(x)).collect();
        self.columns.push((label.into(), col));
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRecord {
    pub rep: usize,
    pub statistic: String,
    pub value: f64,
    pub fc: usize,
    pub sigma_mode: String,
    pub alt_id: String,
    pub seed: u64,
}

const CSV_HEADER: [&str; 7] = ["rep", "statistic", "value", "fc", "sigma_mode", "alt_id", "seed"];

fn write_table<W: std::io::Write>(w: &mut csv::Writer<W>, table: &ExperimentTable) -> csv::Result<()> {
    let c = &table.config;
    let (fc, seed, alt) = (c.fc.to_string(), c.seed.to_string(), c.alternative.id());
    for row in &table.rows {
        let rep = row.rep.to_string();
        for (name, value) in c.statistics.iter().zip(&row.values) {
            let value = format!("{value:.16e}");
            let statistic = name.to_string();
            w.write_record([&rep, &statistic, &value, &fc, c.sigma_mode.label(), &alt, &seed])?;
        }
    }
    Ok(())
}

/// Writes `rep,statistic,value,fc,sigma_mode,alt_id,seed` rows for each table.
pub fn emit_csv(tables: &[&ExperimentTable], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let to_io = |e: csv::Error| Error::io(path, e.into());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(to_io)?;
    for t in tables {
        write_table(&mut w, t).map_err(to_io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<CsvRecord>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    r.deserialize()
        .collect::<csv::Result<Vec<CsvRecord>>>()
        .map_err(|e| Error::Schema(e.to_string()))
}

const SVG_SIZE: f64 = 600.0;
const SVG_MARGIN: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#2ca02c", "#d62728", "#9467bd", "#17becf", "#ff7f0e", "#8c564b", "#7f7f7f",
];

fn svg_xy(x: f64, y: f64) -> (f64, f64) {
    let span = SVG_SIZE - 2.0 * SVG_MARGIN;
    (SVG_MARGIN + x * span, SVG_SIZE - SVG_MARGIN - y * span)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Standalone SVG with one ECDF polyline per column, the diagonal and a legend.
pub fn render_svg(curves: &EcdfTable, title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="600" height="600" viewBox="0 0 600 600">
<rect width="600" height="600" fill="white"/>
<text x="300" y="30" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
        escape(title)
    );
    let (x0, y0) = svg_xy(0.0, 0.0);
    let (x1, y1) = svg_xy(1.0, 1.0);
    let _ = writeln!(
        s,
        r#"<rect x="{x0}" y="{y1}" width="{w}" height="{w}" fill="none" stroke="black"/>"#,
        w = x1 - x0
    );
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let (tx, _) = svg_xy(tick, 0.0);
        let (_, ty) = svg_xy(0.0, tick);
        let _ = writeln!(
            s,
            r#"<text x="{tx}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{tick}</text>"#,
            y0 + 18.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end" font-family="sans-serif" font-size="12">{tick}</text>"#,
            x0 - 6.0,
            ty + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<polyline class="diagonal" points="{x0},{y0} {x1},{y1}" fill="none" stroke="black" stroke-dasharray="4 4"/>"#
    );
    for (i, (label, col)) in curves.columns.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = curves
            .grid
            .iter()
            .zip(col)
            .map(|(&x, &y)| {
                let (px, py) = svg_xy(x, y);
                format!("{px:.2},{py:.2}")
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="ecdf" data-label="{}" points="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#,
            escape(label),
            points.join(" ")
        );
        let ly = SVG_MARGIN + 20.0 + 18.0 * i as f64;
        let lx = SVG_SIZE - SVG_MARGIN - 150.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"/><text x="{}" y="{}" font-family="sans-serif" font-size="12">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn emit_svg(curves: &EcdfTable, title: &str, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_svg(curves, title)).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FigureId {
    Fig3,
    Fig4,
    Fig5,
    Fig6,
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FigureId::Fig3 => "fig3",
            FigureId::Fig4 => "fig4",
            FigureId::Fig5 => "fig5",
            FigureId::Fig6 => "fig6",
        })
    }
}

impl std::str::FromStr for FigureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig3" => Ok(FigureId::Fig3),
            "fig4" => Ok(FigureId::Fig4),
            "fig5" => Ok(FigureId::Fig5),
            "fig6" => Ok(FigureId::Fig6),
            other => Err(Error::InvalidArgument(format!("unknown figure {other:?}"))),
        }
    }
}

/// Cutoff used for the known/unknown variance comparison.
pub const STUDENT_FIGURE_FC: usize = 7;

/// A panel overlays one or more experiments on the same axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub experiments: Vec<ExperimentConfig>,
}

fn grid_statistics() -> Vec<TestName> {
    std::iter::once(TestName::Rice)
        .chain(DEFAULT_GRID_SIZES.iter().map(|&p| TestName::GridSpacing(p)))
        .collect()
}

/// Panel layout of each figure for `reps` replications.
pub fn figure_panels(fig: FigureId, seed: u64, reps: usize) -> Vec<Panel> {
    let known = SigmaMode::Known(1.0);
    let cfg = |fc, mode, stats, alt| {
        ExperimentConfig::new(fc, mode, stats, alt)
            .with_reps(reps)
            .with_seed(seed)
    };
    let single = |title: String, c: ExperimentConfig| Panel {
        title,
        experiments: vec![c],
    };
    match fig {
        FigureId::Fig3 => [3, 5, 7]
            .into_iter()
            .map(|fc| {
                let c = cfg(
                    fc,
                    known,
                    vec![TestName::Rice, TestName::Spacing],
                    AlternativeSpec::null(),
                );
                single(format!("null, fc = {fc}"), c)
            })
            .collect(),
        FigureId::Fig4 => [SpikeWeight::LogN, SpikeWeight::SqrtN]
            .into_iter()
            .flat_map(|w| [3, 5, 7].into_iter().map(move |fc| (w, fc)))
            .map(|(w, fc)| {
                let c = cfg(fc, known, grid_statistics(), AlternativeSpec::one(w));
                single(format!("one spike {w}, fc = {fc}"), c)
            })
            .collect(),
        FigureId::Fig5 => [
            (SpikeWeight::LogN, SpikeWeight::LogN),
            (SpikeWeight::LogN, SpikeWeight::SqrtN),
            (SpikeWeight::SqrtN, SpikeWeight::SqrtN),
        ]
        .into_iter()
        .map(|(a, b)| {
            let c = cfg(7, known, grid_statistics(), AlternativeSpec::two(a, b, 7));
            single(format!("two spikes {a}+{b}, fc = 7"), c)
        })
        .collect(),
        FigureId::Fig6 => {
            let fc = STUDENT_FIGURE_FC;
            let alts = || {
                [
                    AlternativeSpec::null(),
                    AlternativeSpec::one(SpikeWeight::LogN),
                    AlternativeSpec::one(SpikeWeight::SqrtN),
                ]
            };
            vec![
                Panel {
                    title: format!("known variance, fc = {fc}"),
                    experiments: alts()
                        .into_iter()
                        .map(|a| cfg(fc, known, vec![TestName::Rice], a))
                        .collect(),
                },
                Panel {
                    title: format!("unknown variance, fc = {fc}"),
                    experiments: alts()
                        .into_iter()
                        .map(|a| cfg(fc, SigmaMode::Unknown, vec![TestName::TRice], a))
                        .collect(),
                },
            ]
        }
    }
}

/// Runs a panel and returns its tables; failed replications are errors.
pub fn run_panel(panel: &Panel, threads: Option<usize>) -> Result<Vec<ExperimentTable>> {
    panel
        .experiments
        .iter()
        .map(|c| {
            let mut c = c.clone();
            c.threads = threads;
            let table = run_experiment(&c)?;
            match table.failures.first() {
                Some(f) => Err(Error::InvalidArgument(format!(
                    "{} replications failed, first at rep {}: {}",
                    table.failures.len(),
                    f.rep,
                    f.reason
                ))),
                None => Ok(table),
            }
        })
        .collect()
}

/// ECDF curves of a panel; curves are labelled by statistic, and by
/// alternative when the panel overlays several.
pub fn panel_curves(tables: &[ExperimentTable]) -> Result<EcdfTable> {
    let mut curves = EcdfTable::new(401);
    for t in tables {
        for &name in &t.config.statistics {
            let label = if tables.len() > 1 {
                format!("{name} {}", t.config.alternative.id())
            } else {
                name.to_string()
            };
            curves.push(label, &t.column(name).unwrap_or_default())?;
        }
    }
    Ok(curves)
}

/// Writes `out_root/<fig>/panel_<k>.{csv,svg}` and returns the paths.
pub fn reproduce_figure(
    fig: FigureId,
    seed: u64,
    reps: usize,
    out_root: impl AsRef<Path>,
    threads: Option<usize>,
) -> Result<Vec<PathBuf>> {
    let dir = out_root.as_ref().join(fig.to_string());
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut written = Vec::new();
    for (k, panel) in figure_panels(fig, seed, reps).iter().enumerate() {
        let tables = run_panel(panel, threads)?;
        let csv_path = dir.join(format!("panel_{}.csv", k + 1));
        let svg_path = dir.join(format!("panel_{}.svg", k + 1));
        emit_csv(&tables.iter().collect::<Vec<_>>(), &csv_path)?;
        emit_svg(&panel_curves(&tables)?, &panel.title, &svg_path)?;
        written.extend([csv_path, svg_path]);
    }
    Ok(written)
}
