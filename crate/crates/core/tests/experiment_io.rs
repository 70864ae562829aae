//! Grid runs written to disk and read back.

use liftsched_core::experiment::{emit, pin_traffic, read_csv, read_json};
use liftsched_core::{run_grid, GridConfig};

fn small_grid() -> GridConfig {
    GridConfig::from_toml(
        r#"
floors = [6]
cars = [2, 3]
rates = [10.0, 20.0]
seeds = [1, 2]
schedulers = ["submodular", "collective"]
comparisons = [["submodular", "collective"]]
duration = 600.0
"#,
    )
    .unwrap()
}

#[test]
fn reports_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_grid(&small_grid(), 0).unwrap();
    assert_eq!(report.cells.len(), 2 * 2 * 2);
    assert_eq!(report.invalid_cells().count(), 0);

    let paths = emit(&report, dir.path()).unwrap();
    let names: Vec<String> = paths.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(names, ["report.csv", "report.json", "plot_submodular_vs_collective_f6.dat"]);

    let back = read_json(std::fs::File::open(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(back, report);
    let rows = read_csv(std::fs::File::open(dir.path().join("report.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), report.cells.len());
    for (row, cell) in rows.iter().zip(&report.cells) {
        assert_eq!((row.0, row.1, row.2, &row.3, row.4, row.6), (cell.floors, cell.cars, cell.rate, &cell.scheduler, cell.awt_mean, cell.served));
    }

    let plot = std::fs::read_to_string(dir.path().join("plot_submodular_vs_collective_f6.dat")).unwrap();
    let data: Vec<&str> = plot.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data.len(), 2);
    assert!(data.iter().all(|l| l.split_whitespace().count() == 3));
}

#[test]
fn pinned_traffic_reproduces_generated_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_grid();
    let generated = run_grid(&cfg, 1).unwrap();
    let files = pin_traffic(&cfg, dir.path()).unwrap();
    assert_eq!(files.len(), 2 * 2);
    cfg.traffic_dir = Some(dir.path().to_path_buf());
    assert_eq!(run_grid(&cfg, 2).unwrap(), generated);
}

#[test]
fn missing_scheduler_is_a_config_error() {
    let err = GridConfig::from_toml("schedulers = [\"nope\"]\n").unwrap_err();
    assert!(err.to_string().contains("nope"), "{err}");
}

#[test]
fn shipped_configs_parse() {
    for name in ["grid.toml", "smoke.toml"] {
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
        GridConfig::load(&path).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn readme_config_parses() {
    let readme = std::fs::read_to_string(std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../README.md")).unwrap();
    let start = readme.find("```toml\n").expect("toml block") + 8;
    let end = start + readme[start..].find("```").unwrap();
    let cfg = GridConfig::from_toml(&readme[start..end]).unwrap();
    assert!(cfg.kind("greedy_big_penalty").is_ok());
}
