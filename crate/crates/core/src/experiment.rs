//! Experiment grid: runs every scheduler on identical traffic across building
//! sizes, car counts, arrival rates and seeds, then compares them.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::building::BuildingConfig;
use crate::error::{Error, Result};
use crate::kinematics::{DoorTiming, MotionLimits};
use crate::schedulers::SchedulerKind;
use crate::sim::{run, SimOptions};
use crate::traffic::{generate, read_traffic, write_traffic, Arrival, Pattern, TrafficSpec};
use crate::waiting::DestinationDistribution;

/// Grid description, usually read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_floors")]
    pub floors: Vec<usize>,
    #[serde(default = "default_cars")]
    pub cars: Vec<usize>,
    /// Percent of the population arriving per five minutes.
    #[serde(default = "default_rates")]
    pub rates: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub schedulers: Vec<String>,
    /// Pairs `[a, b]`; each yields the reduction of `a` relative to `b`.
    #[serde(default)]
    pub comparisons: Vec<[String; 2]>,
    #[serde(default = "default_pattern")]
    pub pattern: Pattern,
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default = "default_population")]
    pub population_per_floor: u32,
    #[serde(default)]
    pub building: BuildingOverrides,
    #[serde(default)]
    pub sim: SimSettings,
    /// Custom scheduler definitions, referenced by name in `schedulers`.
    #[serde(default)]
    pub custom: BTreeMap<String, SchedulerKind>,
    /// Directory of pinned traffic files to replay when present.
    #[serde(default)]
    pub traffic_dir: Option<PathBuf>,
}

fn default_floors() -> Vec<usize> {
    vec![8, 10, 12]
}

fn default_cars() -> Vec<usize> {
    vec![2, 3, 4, 5, 6]
}

fn default_rates() -> Vec<f64> {
    vec![10.0, 15.0, 20.0, 25.0, 30.0]
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

fn default_pattern() -> Pattern {
    Pattern::Interfloor
}

fn default_duration() -> f64 {
    3600.0
}

/// Persons per floor used by the benchmark grid.
pub const GRID_POPULATION_PER_FLOOR: u32 = 40;

fn default_population() -> u32 {
    GRID_POPULATION_PER_FLOOR
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildingOverrides {
    pub floor_height: Option<f64>,
    pub car_capacity: Option<u32>,
    pub motion: Option<MotionLimits>,
    pub doors: Option<DoorTiming>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSettings {
    pub epoch_interval: f64,
    pub lock_threshold: f64,
    pub drain_limit: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        let d = SimOptions::default();
        SimSettings { epoch_interval: d.epoch_interval, lock_threshold: d.lock_threshold, drain_limit: d.drain_limit }
    }
}

impl GridConfig {
    /// The standard grid with the given schedulers.
    pub fn standard(schedulers: &[&str]) -> Self {
        GridConfig {
            floors: default_floors(),
            cars: default_cars(),
            rates: default_rates(),
            seeds: default_seeds(),
            schedulers: schedulers.iter().map(|s| s.to_string()).collect(),
            comparisons: Vec::new(),
            pattern: default_pattern(),
            duration: default_duration(),
            population_per_floor: default_population(),
            building: BuildingOverrides::default(),
            sim: SimSettings::default(),
            custom: BTreeMap::new(),
            traffic_dir: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: GridConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.floors.is_empty() || self.cars.is_empty() || self.rates.is_empty() || self.seeds.is_empty() {
            return bad("every grid axis needs at least one value".into());
        }
        if self.schedulers.is_empty() {
            return bad("no schedulers listed".into());
        }
        for name in &self.schedulers {
            self.kind(name)?;
        }
        for [a, b] in &self.comparisons {
            if !self.schedulers.contains(a) || !self.schedulers.contains(b) {
                return bad(format!("comparison {a} vs {b} names a scheduler not in the list"));
            }
        }
        for &f in &self.floors {
            for &c in &self.cars {
                self.building(f, c).validate().map_err(|e| Error::Config(e.to_string()))?;
            }
        }
        for &rate in &self.rates {
            self.traffic_spec(rate, 0).validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn kind(&self, name: &str) -> Result<SchedulerKind> {
        match self.custom.get(name) {
            Some(k) => Ok(k.clone()),
            None => SchedulerKind::preset(name).map_err(|e| Error::Config(e.to_string())),
        }
    }

    pub fn building(&self, floors: usize, cars: usize) -> BuildingConfig {
        let mut b = BuildingConfig::new(floors, cars);
        b.population = self.population_per_floor * floors as u32;
        let o = &self.building;
        if let Some(h) = o.floor_height {
            b.floor_height = h;
        }
        if let Some(c) = o.car_capacity {
            b.car_capacity = c;
        }
        if let Some(m) = o.motion {
            b.motion = m;
        }
        if let Some(d) = o.doors {
            b.doors = d;
        }
        b
    }

    /// Traffic depends on floors, rate and seed, never on the car count or
    /// the scheduler.
    pub fn traffic_spec(&self, rate: f64, seed: u64) -> TrafficSpec {
        TrafficSpec { pattern: self.pattern, rate, duration: self.duration, seed }
    }

    pub fn sim_options(&self) -> SimOptions {
        SimOptions {
            horizon: self.duration,
            epoch_interval: self.sim.epoch_interval,
            lock_threshold: self.sim.lock_threshold,
            drain_limit: self.sim.drain_limit,
            ..SimOptions::default()
        }
    }

    /// Comparisons to report: the configured ones, or the first scheduler
    /// against each of the others.
    pub fn comparison_pairs(&self) -> Vec<(String, String)> {
        if !self.comparisons.is_empty() {
            return self.comparisons.iter().map(|[a, b]| (a.clone(), b.clone())).collect();
        }
        let first = &self.schedulers[0];
        self.schedulers[1..].iter().map(|b| (first.clone(), b.clone())).collect()
    }
}

/// File name of a pinned traffic stream.
pub fn traffic_file_name(floors: usize, rate: f64, seed: u64) -> String {
    format!("traffic_f{floors}_r{rate}_s{seed}.jsonl")
}

/// Traffic for one grid cell, replayed from `traffic_dir` when a pinned file
/// exists.
pub fn cell_traffic(cfg: &GridConfig, floors: usize, rate: f64, seed: u64) -> Result<Vec<Arrival>> {
    if let Some(dir) = &cfg.traffic_dir {
        let path = dir.join(traffic_file_name(floors, rate, seed));
        if path.exists() {
            let file = fs::File::open(&path)?;
            let (f, list) = read_traffic(BufReader::new(file))?;
            if f != floors {
                return Err(Error::Config(format!("{} was generated for {f} floors", path.display())));
            }
            return Ok(list);
        }
    }
    generate(&cfg.traffic_spec(rate, seed), &cfg.building(floors, 1))
}

/// Writes every traffic stream of the grid to `dir`; returns the paths.
pub fn pin_traffic(cfg: &GridConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for &floors in &cfg.floors {
        for &rate in &cfg.rates {
            for &seed in &cfg.seeds {
                let list = generate(&cfg.traffic_spec(rate, seed), &cfg.building(floors, 1))?;
                let path = dir.join(traffic_file_name(floors, rate, seed));
                write_traffic(std::io::BufWriter::new(fs::File::create(&path)?), floors, &list)?;
                paths.push(path);
            }
        }
    }
    Ok(paths)
}

/// AWT statistics of one scheduler in one cell, across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub floors: usize,
    pub cars: usize,
    pub rate: f64,
    pub scheduler: String,
    /// Mean over seeds of the per-run AWT.
    pub awt_mean: f64,
    /// Sample standard deviation over seeds of the per-run AWT.
    pub awt_std: f64,
    /// Passengers boarded, summed over seeds.
    pub served: usize,
    pub unserved: usize,
    pub seed_awts: Vec<f64>,
    /// Set when any run of the cell failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CellResult {
    pub fn valid(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReduction {
    pub floors: usize,
    pub cars: usize,
    pub rate: f64,
    /// `100 · (AWT_b − AWT_a) / AWT_b`.
    pub reduction: f64,
}

/// Percent AWT reduction of scheduler `a` relative to `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub cells: Vec<CellReduction>,
    /// Mean of the cell reductions for each building size.
    pub by_floors: BTreeMap<usize, f64>,
    /// Mean of all cell reductions.
    pub grand_average: f64,
}

pub const REPORT_SCHEMA: &str = "liftsched.report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub schema: String,
    pub version: u32,
    pub cells: Vec<CellResult>,
    pub comparisons: Vec<Comparison>,
}

pub fn reduction(a: f64, b: f64) -> f64 {
    100.0 * (b - a) / b
}

impl ComparisonReport {
    pub fn new(cells: Vec<CellResult>, pairs: &[(String, String)]) -> Self {
        let comparisons = pairs.iter().map(|(a, b)| compare(&cells, a, b)).collect();
        ComparisonReport { schema: REPORT_SCHEMA.into(), version: REPORT_VERSION, cells, comparisons }
    }

    pub fn comparison(&self, a: &str, b: &str) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.a == a && c.b == b)
    }

    pub fn cell(&self, floors: usize, cars: usize, rate: f64, scheduler: &str) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.floors == floors && c.cars == cars && c.rate == rate && c.scheduler == scheduler)
    }

    pub fn invalid_cells(&self) -> impl Iterator<Item = &CellResult> {
        self.cells.iter().filter(|c| !c.valid())
    }
}

fn compare(cells: &[CellResult], a: &str, b: &str) -> Comparison {
    let mut out = Vec::new();
    for ca in cells.iter().filter(|c| c.scheduler == a && c.valid()) {
        let Some(cb) = cells.iter().find(|c| c.scheduler == b && c.valid() && (c.floors, c.cars) == (ca.floors, ca.cars) && c.rate == ca.rate) else {
            continue;
        };
        if cb.awt_mean > 0.0 {
            out.push(CellReduction { floors: ca.floors, cars: ca.cars, rate: ca.rate, reduction: reduction(ca.awt_mean, cb.awt_mean) });
        }
    }
    let mean = |v: Vec<f64>| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
    let mut by_floors = BTreeMap::new();
    for f in out.iter().map(|c| c.floors).collect::<std::collections::BTreeSet<_>>() {
        by_floors.insert(f, mean(out.iter().filter(|c| c.floors == f).map(|c| c.reduction).collect()));
    }
    let grand_average = mean(out.iter().map(|c| c.reduction).collect());
    Comparison { a: a.into(), b: b.into(), cells: out, by_floors, grand_average }
}

struct Job {
    floors: usize,
    cars: usize,
    rate: f64,
    scheduler: usize,
}

/// Runs the whole grid on `jobs` worker threads (0 = all cores). Results are
/// in canonical order whatever the thread count.
pub fn run_grid(cfg: &GridConfig, jobs: usize) -> Result<ComparisonReport> {
    cfg.validate()?;
    let kinds: Vec<SchedulerKind> = cfg.schedulers.iter().map(|n| cfg.kind(n)).collect::<Result<_>>()?;
    let mut work = Vec::new();
    for &floors in &cfg.floors {
        for &cars in &cfg.cars {
            for &rate in &cfg.rates {
                for scheduler in 0..kinds.len() {
                    work.push(Job { floors, cars, rate, scheduler });
                }
            }
        }
    }
    let opts = cfg.sim_options();
    let run_cell = |job: &Job| -> CellResult {
        let name = &cfg.schedulers[job.scheduler];
        let building = cfg.building(job.floors, job.cars);
        let mut awts = Vec::new();
        let mut served = 0;
        let mut unserved = 0;
        let mut error = None;
        for &seed in &cfg.seeds {
            let result = cell_traffic(cfg, job.floors, job.rate, seed).and_then(|traffic| {
                let mut s = kinds[job.scheduler].build(name, DestinationDistribution::Uniform);
                run(&building, &traffic, &mut s, &opts)
            });
            match result {
                Ok(out) => {
                    awts.push(out.stats.awt);
                    served += out.stats.served;
                    unserved += out.stats.unserved_at_end;
                }
                Err(e) => {
                    error = Some(format!("seed {seed}: {e}"));
                    break;
                }
            }
        }
        let n = awts.len() as f64;
        let mean = if awts.is_empty() { f64::NAN } else { awts.iter().sum::<f64>() / n };
        let std = if awts.len() < 2 { 0.0 } else { (awts.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() };
        CellResult {
            floors: job.floors,
            cars: job.cars,
            rate: job.rate,
            scheduler: name.clone(),
            awt_mean: mean,
            awt_std: std,
            served,
            unserved,
            seed_awts: awts,
            error,
        }
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| Error::Config(e.to_string()))?;
    let cells: Vec<CellResult> = pool.install(|| work.par_iter().map(run_cell).collect());
    Ok(ComparisonReport::new(cells, &cfg.comparison_pairs()))
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct CsvRow {
    floors: usize,
    cars: usize,
    rate: f64,
    scheduler: String,
    awt_mean: f64,
    awt_std: f64,
    served: usize,
}

const CSV_HEADER: [&str; 7] = ["floors", "cars", "rate", "scheduler", "awt_mean", "awt_std", "served"];

/// One row per cell and scheduler.
pub fn write_csv<W: Write>(w: W, report: &ComparisonReport) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    let err = |e: csv::Error| Error::Io(e.to_string());
    wr.write_record(CSV_HEADER).map_err(err)?;
    for c in &report.cells {
        let row = CsvRow {
            floors: c.floors,
            cars: c.cars,
            rate: c.rate,
            scheduler: c.scheduler.clone(),
            awt_mean: c.awt_mean,
            awt_std: c.awt_std,
            served: c.served,
        };
        wr.serialize(row).map_err(err)?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads the rows written by [`write_csv`] as (floors, cars, rate,
/// scheduler, awt_mean, awt_std, served).
pub fn read_csv<R: std::io::Read>(r: R) -> Result<Vec<(usize, usize, f64, String, f64, f64, usize)>> {
    let mut rd = csv::Reader::from_reader(r);
    let headers = rd.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    if headers.iter().ne(CSV_HEADER) {
        return Err(Error::Parse(format!("unexpected CSV header {headers:?}")));
    }
    rd.deserialize::<CsvRow>()
        .map(|row| {
            let r = row.map_err(|e| Error::Parse(e.to_string()))?;
            Ok((r.floors, r.cars, r.rate, r.scheduler, r.awt_mean, r.awt_std, r.served))
        })
        .collect()
}

pub fn write_json<W: Write>(w: W, report: &ComparisonReport) -> Result<()> {
    serde_json::to_writer_pretty(w, report).map_err(|e| Error::Io(e.to_string()))
}

pub fn read_json<R: std::io::Read>(r: R) -> Result<ComparisonReport> {
    let report: ComparisonReport = serde_json::from_reader(r).map_err(|e| Error::Parse(e.to_string()))?;
    if report.schema != REPORT_SCHEMA || report.version != REPORT_VERSION {
        return Err(Error::Parse(format!("unsupported report schema {} v{}", report.schema, report.version)));
    }
    Ok(report)
}

/// Whitespace-separated table for one comparison and building size: one row
/// per arrival rate, one column per car count.
pub fn plotdata(cmp: &Comparison, floors: usize) -> String {
    let cars: std::collections::BTreeSet<usize> = cmp.cells.iter().filter(|c| c.floors == floors).map(|c| c.cars).collect();
    let mut rates: Vec<f64> = cmp.cells.iter().filter(|c| c.floors == floors).map(|c| c.rate).collect();
    rates.sort_by(f64::total_cmp);
    rates.dedup();
    let mut s = format!("# {} vs {}, {floors} floors: percent AWT reduction\n# rate", cmp.a, cmp.b);
    for c in &cars {
        s += &format!(" cars={c}");
    }
    s.push('\n');
    for rate in rates {
        s += &format!("{rate}");
        for &c in &cars {
            match cmp.cells.iter().find(|x| x.floors == floors && x.cars == c && x.rate == rate) {
                Some(x) => s += &format!(" {}", x.reduction),
                None => s += " nan",
            }
        }
        s.push('\n');
    }
    s
}

/// Writes `report.csv`, `report.json` and one plotdata file per comparison
/// and building size into `dir`.
pub fn emit(report: &ComparisonReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let mut paths = Vec::new();
    let create = |p: &Path| fs::File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())));
    let csv_path = dir.join("report.csv");
    write_csv(create(&csv_path)?, report)?;
    paths.push(csv_path);
    let json_path = dir.join("report.json");
    write_json(create(&json_path)?, report)?;
    paths.push(json_path);
    for cmp in &report.comparisons {
        for &floors in cmp.by_floors.keys() {
            let p = dir.join(format!("plot_{}_vs_{}_f{floors}.dat", cmp.a, cmp.b));
            fs::write(&p, plotdata(cmp, floors)).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            paths.push(p);
        }
    }
    Ok(paths)
}
