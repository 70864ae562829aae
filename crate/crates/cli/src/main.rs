//! `liftsched`: run the benchmark grid, simulate one scenario, check the
//! objective's structural properties, or pin traffic files.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use liftsched_core::experiment::{emit, pin_traffic};
use liftsched_core::sim::write_trace;
use liftsched_core::traffic::read_traffic;
use liftsched_core::verify::{exactness_suite, greedy_bound_suite, monotonicity_suite, pairwise_nonnegativity_suite, submodularity_suite, Limits, SuiteReport};
use liftsched_core::{generate, run, run_grid, DestinationDistribution, Error, GridConfig, Result, SchedulerKind};

#[derive(Parser)]
#[command(name = "liftsched", version, about = "Group elevator scheduling benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every scheduler on every grid cell and seed; write the report.
    Run {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Simulate one building, rate and seed with one scheduler.
    Simulate(SimulateArgs),
    /// Run the structural property suites.
    Verify {
        /// Cases per suite relative to the full acceptance counts.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Write the grid's traffic streams to files for later replay.
    GenTraffic {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value = "traffic")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct GridArgs {
    /// TOML grid description; the standard grid when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seeds as a comma list with optional ranges, e.g. `0-4,9`.
    #[arg(long, value_parser = parse_seeds)]
    seeds: Option<SeedList>,
    /// Comma-separated scheduler names.
    #[arg(long, value_delimiter = ',')]
    schedulers: Option<Vec<String>>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "submodular")]
    scheduler: String,
    #[arg(long, default_value_t = 10)]
    floors: usize,
    #[arg(long, default_value_t = 4)]
    cars: usize,
    /// Percent of the population arriving per five minutes.
    #[arg(long, default_value_t = 15.0)]
    rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Replay a pinned traffic file instead of generating one.
    #[arg(long)]
    traffic: Option<PathBuf>,
    /// Write `trace.jsonl` into `--out`.
    #[arg(long, requires = "out")]
    trace: bool,
    /// Directory for `summary.json`, `passengers.json` and the trace.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Debug)]
struct SeedList(Vec<u64>);

fn parse_seeds(s: &str) -> std::result::Result<SeedList, String> {
    let mut seeds = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let num = |t: &str| t.trim().parse::<u64>().map_err(|e| format!("bad seed '{t}': {e}"));
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b)?);
                if a > b {
                    return Err(format!("empty seed range {part}"));
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(num(part)?),
        }
    }
    if seeds.is_empty() {
        return Err("no seeds given".into());
    }
    Ok(SeedList(seeds))
}

fn load_grid(args: &GridArgs) -> Result<GridConfig> {
    let mut cfg = match &args.config {
        Some(path) => GridConfig::load(path)?,
        None => GridConfig::standard(&SchedulerKind::PRESETS),
    };
    if let Some(seeds) = &args.seeds {
        cfg.seeds = seeds.0.clone();
    }
    if let Some(names) = &args.schedulers {
        cfg.schedulers = names.clone();
        cfg.comparisons.retain(|[a, b]| names.contains(a) && names.contains(b));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_command(grid: &GridArgs, out: &Path, jobs: usize) -> Result<bool> {
    let cfg = load_grid(grid)?;
    let report = run_grid(&cfg, jobs)?;
    for path in emit(&report, out)? {
        println!("wrote {}", path.display());
    }
    for cmp in &report.comparisons {
        let floors: Vec<String> = cmp.by_floors.iter().map(|(f, r)| format!("{f}F {r:.2}%")).collect();
        println!("{} vs {}: grand average {:.2}% ({})", cmp.a, cmp.b, cmp.grand_average, floors.join(", "));
    }
    let invalid: Vec<_> = report.invalid_cells().collect();
    for c in &invalid {
        eprintln!("invalid cell floors={} cars={} rate={} scheduler={}: {}", c.floors, c.cars, c.rate, c.scheduler, c.error.as_deref().unwrap_or(""));
    }
    Ok(invalid.is_empty())
}

fn simulate(args: &SimulateArgs) -> Result<bool> {
    let cfg = match &args.config {
        Some(path) => GridConfig::load(path)?,
        None => GridConfig::standard(&[args.scheduler.as_str()]),
    };
    let building = cfg.building(args.floors, args.cars);
    building.validate()?;
    let traffic = match &args.traffic {
        Some(path) => {
            let (floors, list) = read_traffic(BufReader::new(fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?))?;
            if floors != args.floors {
                return Err(Error::Config(format!("{} was generated for {floors} floors", path.display())));
            }
            list
        }
        None => generate(&cfg.traffic_spec(args.rate, args.seed), &building)?,
    };
    let mut opts = cfg.sim_options();
    opts.trace = args.trace;
    if let Some(last) = traffic.last() {
        opts.horizon = opts.horizon.max(last.arrival_time + 1.0);
    }
    let mut scheduler = cfg.kind(&args.scheduler)?.build(&args.scheduler, DestinationDistribution::Uniform);
    let output = run(&building, &traffic, &mut scheduler, &opts)?;
    let summary = serde_json::json!({
        "scheduler": args.scheduler,
        "floors": args.floors,
        "cars": args.cars,
        "passengers": traffic.len(),
        "awt": output.stats.awt,
        "awt_std": output.stats.awt_std,
        "att": output.stats.att,
        "served": output.stats.served,
        "unserved_at_end": output.stats.unserved_at_end,
        "reassignments": output.reassignments,
    });
    let ser = |e: serde_json::Error| Error::Parse(e.to_string());
    let summary = serde_json::to_string_pretty(&summary).map_err(ser)?;
    println!("{summary}");
    if let Some(dir) = &args.out {
        let io = |p: &Path, e: std::io::Error| Error::Io(format!("{}: {e}", p.display()));
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let p = dir.join("summary.json");
        fs::write(&p, &summary).map_err(|e| io(&p, e))?;
        let p = dir.join("passengers.json");
        fs::write(&p, serde_json::to_string_pretty(&output.passengers).map_err(ser)?).map_err(|e| io(&p, e))?;
        if args.trace {
            let p = dir.join("trace.jsonl");
            write_trace(std::io::BufWriter::new(fs::File::create(&p).map_err(|e| io(&p, e))?), &output.trace)?;
        }
    }
    Ok(true)
}

fn verify(scale: f64, seed: u64) -> Result<bool> {
    let n = |full: usize| ((full as f64 * scale).round() as usize).max(1);
    let large = Limits { max_floors: 12, max_cars: 6, max_calls: 8 };
    let small = Limits { max_floors: 12, max_cars: 3, max_calls: 6 };
    let (bound, basis) = greedy_bound_suite(n(200), seed, small)?;
    let suites: Vec<SuiteReport> = vec![
        submodularity_suite(n(1000), 200, seed, large)?,
        monotonicity_suite(n(1000), seed, large)?,
        bound,
        basis,
        exactness_suite(n(100), seed, 1e-6)?,
        pairwise_nonnegativity_suite(n(10_000), seed, large)?,
    ];
    let mut ok = true;
    for s in &suites {
        ok &= s.passed();
        println!("{} {}: {} cases, {} violations, worst {:.3e}, {} skipped", if s.passed() { "PASS" } else { "FAIL" }, s.name, s.cases, s.violations, s.worst, s.skipped);
    }
    Ok(ok)
}

fn gen_traffic(grid: &GridArgs, out: &Path) -> Result<bool> {
    let cfg = load_grid(grid)?;
    let paths = pin_traffic(&cfg, out)?;
    println!("wrote {} traffic files to {}", paths.len(), out.display());
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { grid, out, jobs } => run_command(grid, out, *jobs),
        Command::Simulate(args) => simulate(args),
        Command::Verify { scale, seed } => {
            if !(*scale > 0.0) {
                Err(Error::Config("--scale must be positive".into()))
            } else {
                verify(*scale, *seed)
            }
        }
        Command::GenTraffic { grid, out } => gen_traffic(grid, out),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::parse_seeds;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("0-3,7").unwrap().0, vec![0, 1, 2, 3, 7]);
        assert_eq!(parse_seeds(" 5 ").unwrap().0, vec![5]);
        assert!(parse_seeds("3-1").is_err());
        assert!(parse_seeds(",").is_err());
        assert!(parse_seeds("a").is_err());
    }
}
