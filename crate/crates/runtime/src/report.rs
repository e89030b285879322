//! Run reports and their CSV form.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

/// Column order of the CSV output. Fixed.
pub const CSV_COLUMNS: [&str; 18] = [
    "benchmark",
    "mode",
    "cores",
    "localities",
    "tasks",
    "grain_us",
    "n",
    "error_rate",
    "faulty_nodes",
    "seed",
    "wall_time_s",
    "tasks_launched",
    "failures",
    "replays",
    "replicas",
    "remote_invocations",
    "remote_fallbacks",
    "bytes_moved",
];

/// One benchmark run: configuration echo plus measured counters.
///
/// `tasks` is the number of logical tasks; `tasks_launched` counts every
/// execution of a task body, including replays and replicas.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunReport {
    pub benchmark: String,
    pub mode: String,
    pub cores: usize,
    pub localities: usize,
    pub tasks: u64,
    pub grain_us: u64,
    pub n: u32,
    pub error_rate: f64,
    pub faulty_nodes: Vec<u32>,
    pub seed: u64,
    pub wall_time_s: f64,
    pub tasks_launched: u64,
    pub failures: u64,
    pub replays: u64,
    pub replicas: u64,
    pub remote_invocations: u64,
    pub remote_fallbacks: u64,
    pub bytes_moved: u64,
}

#[derive(Serialize, Deserialize)]
struct Row {
    benchmark: String,
    mode: String,
    cores: usize,
    localities: usize,
    tasks: u64,
    grain_us: u64,
    n: u32,
    error_rate: f64,
    faulty_nodes: String,
    seed: u64,
    wall_time_s: f64,
    tasks_launched: u64,
    failures: u64,
    replays: u64,
    replicas: u64,
    remote_invocations: u64,
    remote_fallbacks: u64,
    bytes_moved: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad faulty_nodes field {0:?}")]
    FaultyNodes(String),
    #[error("unexpected CSV header")]
    Header,
}

impl From<&RunReport> for Row {
    fn from(r: &RunReport) -> Row {
        Row {
            benchmark: r.benchmark.clone(),
            mode: r.mode.clone(),
            cores: r.cores,
            localities: r.localities,
            tasks: r.tasks,
            grain_us: r.grain_us,
            n: r.n,
            error_rate: r.error_rate,
            faulty_nodes: r.faulty_nodes.iter().map(u32::to_string).collect::<Vec<_>>().join(";"),
            seed: r.seed,
            wall_time_s: r.wall_time_s,
            tasks_launched: r.tasks_launched,
            failures: r.failures,
            replays: r.replays,
            replicas: r.replicas,
            remote_invocations: r.remote_invocations,
            remote_fallbacks: r.remote_fallbacks,
            bytes_moved: r.bytes_moved,
        }
    }
}

impl TryFrom<Row> for RunReport {
    type Error = ReportError;

    fn try_from(r: Row) -> Result<RunReport, ReportError> {
        let faulty_nodes = if r.faulty_nodes.is_empty() {
            Vec::new()
        } else {
            r.faulty_nodes
                .split(';')
                .map(|s| s.trim().parse())
                .collect::<Result<_, _>>()
                .map_err(|_| ReportError::FaultyNodes(r.faulty_nodes.clone()))?
        };
        Ok(RunReport {
            benchmark: r.benchmark,
            mode: r.mode,
            cores: r.cores,
            localities: r.localities,
            tasks: r.tasks,
            grain_us: r.grain_us,
            n: r.n,
            error_rate: r.error_rate,
            faulty_nodes,
            seed: r.seed,
            wall_time_s: r.wall_time_s,
            tasks_launched: r.tasks_launched,
            failures: r.failures,
            replays: r.replays,
            replicas: r.replicas,
            remote_invocations: r.remote_invocations,
            remote_fallbacks: r.remote_fallbacks,
            bytes_moved: r.bytes_moved,
        })
    }
}

/// Writes a header and one row per report. Faulty node ids are joined with `;`.
pub fn write_csv<W: Write>(out: W, reports: &[RunReport]) -> Result<(), ReportError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in reports {
        w.serialize(Row::from(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<RunReport>, ReportError> {
    let mut rd = csv::Reader::from_reader(input);
    if rd.headers()?.iter().ne(CSV_COLUMNS) {
        return Err(ReportError::Header);
    }
    rd.deserialize::<Row>()
        .map(|row| RunReport::try_from(row?))
        .collect()
}

/// `wall_time_s` of the fastest report.
pub fn min_wall_time(reports: &[RunReport]) -> Option<&RunReport> {
    reports
        .iter()
        .min_by(|a, b| a.wall_time_s.total_cmp(&b.wall_time_s))
}

/// Ratio of the fastest `mode` run to the fastest `baseline` run.
pub fn wall_time_ratio(reports: &[RunReport], mode: &str, baseline: &str) -> Option<f64> {
    let best = |m: &str| {
        let runs: Vec<RunReport> = reports.iter().filter(|r| r.mode == m).cloned().collect();
        min_wall_time(&runs).map(|r| r.wall_time_s)
    };
    Some(best(mode)? / best(baseline)?)
}

/// Two-column `x ratio` lines for plotting.
pub fn write_ratio_file<W: Write>(mut out: W, points: &[(f64, f64)]) -> std::io::Result<()> {
    for (x, ratio) in points {
        writeln!(out, "{x} {ratio}")?;
    }
    Ok(())
}
