//! `privmob sweep`: train the configured grid of weight settings, sequence
//! lengths, and time granularities, then extract the privacy/utility
//! frontier.
//!
//! Outputs land in the config's output directory: `sweep.csv` (one row per
//! trained point with frontier membership), `frontier.json` (points, front
//! indices, failures, and verdicts for any external points), and optionally
//! `frontier.svg`. Finished units are cached under `cache/`, so rerunning
//! an interrupted or extended sweep retrains nothing that already ran.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use privmob_core::fsutil::write_atomic;
use privmob_core::pareto::{
    classify_external, run_sweep, write_sweep_csv, ExternalVerdict, ParetoPoint, SweepFailure,
};

use crate::config::load_config;
use crate::errors::CliError;
use crate::plot::{frontier_svg, ExternalMark};

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Experiment configuration (JSON); the `sweep` section defines the grid.
    #[arg(long)]
    pub config: PathBuf,

    /// Overrides `training.seed` (and the synthetic generator seed).
    #[arg(long)]
    pub seed: Option<u64>,

    /// Overrides `output_dir` from the config.
    #[arg(long)]
    pub output: Option<PathBuf>,

    /// Worker threads for independent sweep cells.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,

    /// Print the grid size and exit without loading data or training.
    #[arg(long)]
    pub dry_run: bool,

    /// CSV of external points (`utility,privacy` columns, optional `label`)
    /// to classify against the computed frontier.
    #[arg(long)]
    pub external: Option<PathBuf>,

    /// Also write `frontier.svg`, a scatter plot of the swept points.
    #[arg(long)]
    pub plot: bool,
}

/// An outside point judged against the computed frontier.
#[derive(Debug, Clone, Serialize)]
struct ExternalRow {
    label: String,
    utility: f64,
    privacy: f64,
    verdict: ExternalVerdict,
}

/// The `frontier.json` document.
#[derive(Serialize)]
struct FrontierSummary<'a> {
    schema_version: u32,
    points: &'a [ParetoPoint],
    front_indices: &'a [usize],
    failures: &'a [SweepFailure],
    external: &'a [ExternalRow],
}

pub fn run(args: SweepArgs) -> Result<(), CliError> {
    let mut config = load_config(&args.config)?;
    config.apply_overrides(args.seed, args.output.as_deref());
    config.validate()?;
    if args.workers == 0 {
        return Err(CliError::Config("--workers: must be at least 1".into()));
    }

    let grid = &config.sweep;
    if args.dry_run {
        println!(
            "dry run: {} cells ({} weight settings x {} sequence lengths x {} granularities x {} repeats); nothing trained",
            grid.cell_count(),
            grid.lambda_grid.len(),
            grid.sequence_lengths.len(),
            grid.granularities_minutes.len(),
            grid.repeats
        );
        return Ok(());
    }

    // Parse external points up front so a malformed file fails before hours
    // of training, not after.
    let external_points = match args.external.as_deref() {
        Some(path) => read_external(path)?,
        None => Vec::new(),
    };

    let records = config.load_dataset()?;
    let out = config.output_dir.clone();
    let cache_dir = out.join("cache");
    let outcome = run_sweep(
        &records,
        &config.preprocessing,
        &config.model,
        &config.training,
        grid,
        Some(cache_dir.as_path()),
        args.workers,
    )
    .map_err(CliError::from_sweep)?;

    for failure in &outcome.failures {
        eprintln!(
            "warning: stage `{}` failed (SL={}, granularity={}min{}): {}",
            failure.stage,
            failure.sequence_length,
            failure.granularity_minutes,
            failure
                .weights
                .map(|w| format!(", weights=({}, {}, {})", w.lambda1, w.lambda2, w.lambda3))
                .unwrap_or_default(),
            failure.error
        );
    }

    let front = outcome.front_indices();
    let mut csv_bytes = Vec::new();
    write_sweep_csv(&outcome.points, &front, &mut csv_bytes)
        .map_err(|e| CliError::io("rendering sweep.csv", e))?;
    write_atomic(&out.join("sweep.csv"), &csv_bytes)
        .map_err(|e| CliError::io("writing sweep.csv", e))?;

    let front_axes: Vec<(f64, f64)> = front.iter().map(|&i| outcome.points[i].axes()).collect();
    let external_rows: Vec<ExternalRow> = external_points
        .into_iter()
        .map(|(label, utility, privacy)| ExternalRow {
            verdict: classify_external((utility, privacy), &front_axes),
            label,
            utility,
            privacy,
        })
        .collect();
    for row in &external_rows {
        let verdict = match row.verdict {
            ExternalVerdict::OnFront => "reaches the frontier",
            ExternalVerdict::Dominated => "dominated by a swept point",
        };
        println!("external `{}` (utility {}, privacy {}): {verdict}", row.label, row.utility, row.privacy);
    }

    let summary = FrontierSummary {
        schema_version: 1,
        points: &outcome.points,
        front_indices: &front,
        failures: &outcome.failures,
        external: &external_rows,
    };
    let summary_bytes = serde_json::to_vec_pretty(&summary)
        .map_err(|e| CliError::Io(format!("rendering frontier.json: {e}")))?;
    write_atomic(&out.join("frontier.json"), &summary_bytes)
        .map_err(|e| CliError::io("writing frontier.json", e))?;

    if args.plot {
        let swept: Vec<(f64, f64)> = outcome.points.iter().map(ParetoPoint::axes).collect();
        let marks: Vec<ExternalMark> = external_rows
            .iter()
            .map(|row| ExternalMark {
                label: &row.label,
                utility: row.utility,
                privacy: row.privacy,
                on_front: row.verdict == ExternalVerdict::OnFront,
            })
            .collect();
        let svg = frontier_svg(&swept, &front_axes, &marks);
        write_atomic(&out.join("frontier.svg"), svg.as_bytes())
            .map_err(|e| CliError::io("writing frontier.svg", e))?;
    }

    println!(
        "swept {} cells: {} points ({} on the frontier), {} failures; results in `{}`",
        grid.cell_count(),
        outcome.points.len(),
        front.len(),
        outcome.failures.len(),
        out.display()
    );
    Ok(())
}

/// Reads external comparison points: a CSV with `utility` and `privacy`
/// columns and an optional `label`. Rows are labeled by position when no
/// label column exists.
fn read_external(path: &Path) -> Result<Vec<(String, f64, f64)>, CliError> {
    let bad = |message: String| CliError::Config(format!("external points `{}`: {message}", path.display()));
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let utility_col =
        find("utility").ok_or_else(|| bad("missing required column `utility`".into()))?;
    let privacy_col =
        find("privacy").ok_or_else(|| bad("missing required column `privacy`".into()))?;
    let label_col = find("label");

    let mut points = Vec::new();
    for (row_number, row) in reader.records().enumerate() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let parse = |col: usize, name: &str| -> Result<f64, CliError> {
            let text = row.get(col).unwrap_or("");
            let value: f64 = text
                .parse()
                .map_err(|_| bad(format!("row {}: `{name}` is not a number: `{text}`", row_number + 1)))?;
            if !value.is_finite() {
                return Err(bad(format!("row {}: `{name}` must be finite", row_number + 1)));
            }
            Ok(value)
        };
        let utility = parse(utility_col, "utility")?;
        let privacy = parse(privacy_col, "privacy")?;
        let label = label_col
            .and_then(|col| row.get(col))
            .filter(|s| !s.is_empty())
            .map_or_else(|| format!("external-{}", row_number + 1), str::to_string);
        points.push((label, utility, privacy));
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(dir: &tempfile::TempDir, name: &str, contents: &str) -> PathBuf {
        let path = dir.path().join(name);
        let mut file = std::fs::File::create(&path).unwrap();
        file.write_all(contents.as_bytes()).unwrap();
        path
    }

    #[test]
    fn external_points_parse_with_and_without_labels() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "pts.csv", "utility,privacy,label\n0.5,0.25,prior\n0.1,0.9,\n");
        let points = read_external(&path).unwrap();
        assert_eq!(points[0], ("prior".to_string(), 0.5, 0.25));
        assert_eq!(points[1], ("external-2".to_string(), 0.1, 0.9));
    }

    #[test]
    fn a_missing_required_column_names_itself() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "pts.csv", "utility,label\n0.5,x\n");
        let err = read_external(&path).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("privacy"), "{err}");
    }

    #[test]
    fn a_non_numeric_value_reports_its_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_file(&dir, "pts.csv", "utility,privacy\n0.5,0.2\nhigh,0.3\n");
        let err = read_external(&path).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("row 2"), "{err}");
    }
}
