//! Result tables produced by an experiment run. Rows are sorted into a
//! canonical order and floats printed with fixed formatting so that a
//! repeated run with the same seed yields byte-identical files. Wall
//! times are kept in a separate sidecar because they never reproduce.

use crate::config::ExperimentKind;
use crate::CliError;
use std::io::Write;
use std::path::{Path, PathBuf};

/// One method evaluated at one sweep point in one trial.
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub experiment: &'static str,
    pub trial: usize,
    pub snr_db: f64,
    pub k: usize,
    pub signals: usize,
    pub method: &'static str,
    pub mean_error_pct: f64,
    pub miss_detected_pct: f64,
    pub iterations: usize,
}

/// Wall-clock seconds for the same key; reported separately.
#[derive(Debug, Clone)]
pub struct TimingRow {
    pub trial: usize,
    pub snr_db: f64,
    pub k: usize,
    pub signals: usize,
    pub method: &'static str,
    pub seconds: f64,
}

/// Objective value after each half-step of an alternating solve.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub trial: usize,
    pub snr_db: f64,
    pub k: usize,
    pub signals: usize,
    pub iteration: usize,
    pub coding_objective: f64,
    pub update_objective: f64,
}

#[derive(Debug, Default)]
pub struct RunOutput {
    pub rows: Vec<ReportRow>,
    pub timings: Vec<TimingRow>,
    pub traces: Vec<TraceRow>,
}

/// Noiseless runs print as `inf`; finite levels keep their dB value.
pub fn fmt_snr(snr: f64) -> String {
    if snr == f64::INFINITY {
        "inf".into()
    } else {
        format!("{snr}")
    }
}

fn fmt_pct(v: f64) -> String {
    format!("{v:.10e}")
}

/// Sweep points run from small k, few signals and high SNR downwards.
fn row_key(r: &ReportRow) -> (usize, usize, std::cmp::Reverse<u64>, &'static str, usize) {
    (
        r.k,
        r.signals,
        std::cmp::Reverse(r.snr_db.to_bits()),
        r.method,
        r.trial,
    )
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn write_lines(path: &Path, lines: &[String]) -> Result<(), CliError> {
    let file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for line in lines {
        writeln!(w, "{line}").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// The variable a figure for this experiment sweeps along its x axis.
fn x_value(kind: ExperimentKind, row: &ReportRow) -> Option<String> {
    use ExperimentKind::*;
    match kind {
        FbcsNoise | SparseNoise | ObdNoise => Some(fmt_snr(row.snr_db)),
        FbcsKsweep | SparseKsweep | ObdKsweep => Some(row.k.to_string()),
        ObdNsweep => Some(row.signals.to_string()),
        Comparative => None,
    }
}

pub fn write_reports(
    kind: ExperimentKind,
    out_dir: &Path,
    run: &mut RunOutput,
) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    run.rows.sort_by(|a, b| row_key(a).cmp(&row_key(b)));
    run.timings.sort_by(|a, b| {
        (a.k, a.signals, std::cmp::Reverse(a.snr_db.to_bits()), a.method, a.trial).cmp(&(
            b.k,
            b.signals,
            std::cmp::Reverse(b.snr_db.to_bits()),
            b.method,
            b.trial,
        ))
    });
    run.traces.sort_by_key(|t| {
        (t.k, t.signals, std::cmp::Reverse(t.snr_db.to_bits()), t.trial, t.iteration)
    });

    let mut written = Vec::new();

    let mut lines =
        vec!["experiment,trial,snr_db,k,signals,method,mean_error_pct,miss_detected_pct,iterations"
            .to_string()];
    for r in &run.rows {
        lines.push(format!(
            "{},{},{},{},{},{},{},{},{}",
            r.experiment,
            r.trial,
            fmt_snr(r.snr_db),
            r.k,
            r.signals,
            r.method,
            fmt_pct(r.mean_error_pct),
            fmt_pct(r.miss_detected_pct),
            r.iterations
        ));
    }
    let report_path = out_dir.join("report.csv");
    write_lines(&report_path, &lines)?;
    written.push(report_path);

    let mut lines = vec!["trial,snr_db,k,signals,method,seconds".to_string()];
    for t in &run.timings {
        lines.push(format!(
            "{},{},{},{},{},{:.6}",
            t.trial,
            fmt_snr(t.snr_db),
            t.k,
            t.signals,
            t.method,
            t.seconds
        ));
    }
    let timing_path = out_dir.join("timing.csv");
    write_lines(&timing_path, &lines)?;
    written.push(timing_path);

    if !run.traces.is_empty() {
        let mut lines =
            vec!["trial,snr_db,k,signals,iteration,coding_objective,update_objective".to_string()];
        for t in &run.traces {
            lines.push(format!(
                "{},{},{},{},{},{},{}",
                t.trial,
                fmt_snr(t.snr_db),
                t.k,
                t.signals,
                t.iteration,
                fmt_pct(t.coding_objective),
                fmt_pct(t.update_objective)
            ));
        }
        let trace_path = out_dir.join("objective_trace.csv");
        write_lines(&trace_path, &lines)?;
        written.push(trace_path);
    }

    written.extend(write_curves(kind, out_dir, run)?);
    Ok(written)
}

/// Per-method curve files averaging trials at each sweep point, plus a
/// gnuplot stub that plots them.
fn write_curves(
    kind: ExperimentKind,
    out_dir: &Path,
    run: &RunOutput,
) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    let mut methods: Vec<&'static str> = run.rows.iter().map(|r| r.method).collect();
    methods.sort_unstable();
    methods.dedup();

    if matches!(kind, ExperimentKind::Comparative) {
        let mut lines = vec!["# method mean_error_pct".to_string()];
        for method in &methods {
            let errs: Vec<f64> = run
                .rows
                .iter()
                .filter(|r| r.method == *method)
                .map(|r| r.mean_error_pct)
                .collect();
            let mean = errs.iter().sum::<f64>() / errs.len() as f64;
            lines.push(format!("{method} {}", fmt_pct(mean)));
        }
        let path = out_dir.join(format!("{}.dat", kind.name()));
        write_lines(&path, &lines)?;
        written.push(path);
        return Ok(written);
    }

    let mut dat_names = Vec::new();
    for method in &methods {
        // rows are already in canonical order, so points come out sorted
        let mut points: Vec<(String, Vec<f64>)> = Vec::new();
        for r in run.rows.iter().filter(|r| r.method == *method) {
            let Some(x) = x_value(kind, r) else { continue };
            match points.last_mut() {
                Some((last, errs)) if *last == x => errs.push(r.mean_error_pct),
                _ => points.push((x, vec![r.mean_error_pct])),
            }
        }
        let mut lines = vec!["# x mean_error_pct".to_string()];
        for (x, errs) in &points {
            let mean = errs.iter().sum::<f64>() / errs.len() as f64;
            lines.push(format!("{x} {}", fmt_pct(mean)));
        }
        let name = format!("{}_{}.dat", kind.name(), method);
        let path = out_dir.join(&name);
        write_lines(&path, &lines)?;
        written.push(path);
        dat_names.push(name);
    }

    let mut gp = vec![
        "# starting point for figures; adjust styles as needed".to_string(),
        "set datafile missing 'inf'".to_string(),
        "set logscale y".to_string(),
        "set ylabel 'mean error (%)'".to_string(),
    ];
    let plots: Vec<String> = dat_names
        .iter()
        .map(|n| format!("'{n}' using 1:2 with linespoints title '{n}'"))
        .collect();
    if !plots.is_empty() {
        gp.push(format!("plot {}", plots.join(", \\\n     ")));
    }
    let gp_path = out_dir.join("plot.gp");
    write_lines(&gp_path, &gp)?;
    written.push(gp_path);
    Ok(written)
}
