use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use regionscope_core::dataset::{load_fixture, merge_indicators, read_csv, to_csv_string};
use regionscope_core::ensemble::{DataSource, Provenance, RunReport};
use regionscope_core::eurostat::{
    fetch_indicators, Cache, Fetcher, HttpTransport, Transport, REQUEST_TIMEOUT,
};
use regionscope_core::pipeline::{
    ensure_dir, heatmap_selection, run_detection, write_figures, write_outputs,
};

use crate::config::RunConfig;
use crate::error::CliError;

pub fn data_dir(out: &Path) -> PathBuf {
    out.join("data")
}

pub fn merged_csv_path(out: &Path) -> PathBuf {
    data_dir(out).join("merged.csv")
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

/// Writes to stdout, tolerating a closed pipe.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|()| out.flush());
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Downloads (or reads from cache) the four indicators and writes the merged table.
pub fn fetch(config: &RunConfig) -> Result<(), CliError> {
    let merged_path = merged_csv_path(&config.out_dir);
    if let Some(name) = &config.fixture {
        let dataset = load_fixture(name)?;
        write(&merged_path, to_csv_string(&dataset).as_bytes())?;
        emit(&format!(
            "fixture {name}: {} regions written to {}\n",
            dataset.len(),
            merged_path.display()
        ));
        return Ok(());
    }

    let transport: Option<Box<dyn Transport>> = if config.offline {
        None
    } else {
        Some(Box::new(HttpTransport::new(REQUEST_TIMEOUT)))
    };
    let fetcher = Fetcher::new(Cache::new(&config.cache_dir), transport);
    let fetched = fetch_indicators(&config.datasets, &fetcher)
        .map_err(|(id, e)| CliError::from_eurostat(&id, e))?;

    let raw_dir = data_dir(&config.out_dir).join("raw");
    let mut text = String::new();
    for f in &fetched {
        write(&raw_dir.join(format!("{}.json", f.spec.dataset_id)), &f.raw)?;
        let _ = writeln!(
            text,
            "{:<14} {:<16} {} regions",
            f.spec.indicator_name,
            f.spec.dataset_id,
            f.series.entries.len()
        );
    }
    let series: Vec<_> = fetched.into_iter().map(|f| f.series).collect();
    let dataset = merge_indicators(&series)?;
    write(&merged_path, to_csv_string(&dataset).as_bytes())?;
    let _ = writeln!(
        text,
        "{} regions with all indicators written to {}",
        dataset.len(),
        merged_path.display()
    );
    emit(&text);
    Ok(())
}

/// Runs the detectors on `input`, the configured fixture, or the fetched table.
pub fn detect(config: &RunConfig, input: Option<&Path>) -> Result<RunReport, CliError> {
    let (dataset, source) = match (input, &config.fixture) {
        (Some(path), _) => (
            read_csv(path)?,
            DataSource::Csv {
                path: path.display().to_string(),
            },
        ),
        (None, Some(name)) => (
            load_fixture(name)?,
            DataSource::Fixture { name: name.clone() },
        ),
        (None, None) => {
            let path = merged_csv_path(&config.out_dir);
            if !path.exists() {
                return Err(CliError::data(format!(
                    "no input table at {}; run `regionscope fetch` or pass --input or --fixture",
                    path.display()
                )));
            }
            let dataset = read_csv(&path)?;
            (
                dataset,
                DataSource::Csv {
                    path: path.display().to_string(),
                },
            )
        }
    };
    let provenance = Provenance {
        source,
        seed: config.detection.seed,
        created_at: Some(timestamp()),
    };
    let report = run_detection(&dataset, Some(config.year), &config.detection, provenance)?;
    let mut written = write_outputs(&report, &config.out_dir)?;
    written.extend(write_figures(&report, &config.out_dir)?);
    let mut text = report.summary_table();
    text.push('\n');
    for path in written {
        let _ = writeln!(text, "wrote {}", path.display());
    }
    emit(&text);
    Ok(report)
}

pub fn default_report_path(config: &RunConfig) -> PathBuf {
    config.out_dir.join(regionscope_core::pipeline::REPORT_FILE)
}

pub fn load_report(path: &Path) -> Result<RunReport, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("missing report {}: {e}", path.display())))?;
    RunReport::from_json(&text)
        .map_err(|e| CliError::data(format!("cannot parse report {}: {e}", path.display())))
}

/// Prints the summary table and regenerates the figures from a saved report.
pub fn report(config: &RunConfig, path: Option<&Path>) -> Result<(), CliError> {
    let path = path.map_or_else(|| default_report_path(config), Path::to_path_buf);
    let report = load_report(&path)?;
    let mut text = report.summary_table();
    let written = write_figures(&report, &config.out_dir)?;
    if heatmap_selection(&report).is_empty() {
        text.push_str("heatmap skipped: no structural anomalies\n");
    }
    text.push('\n');
    for p in written {
        let _ = writeln!(text, "wrote {}", p.display());
    }
    emit(&text);
    Ok(())
}
