//! Trajectory, safety and summary writers.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::sim::{Mode, RunSummary, TrajectoryLog};

pub const CSV_HEADER: [&str; 19] = [
    "t", "agent", "frame", "x_des", "y_des", "z_des", "x_act", "y_act", "z_act", "q11", "q12", "q21",
    "q22", "lambda1", "lambda2", "psi_r", "psi_d", "containment", "min_dist",
];

/// Coordinate frame of the position columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsvFrame {
    /// Ground-fixed coordinates. For a local-frame run these are the
    /// virtual positions composed with the leader path.
    Global,
    /// Leader-fixed coordinates `(u, v)` with the flight elevation as `z`.
    Local,
}

impl CsvFrame {
    pub fn name(self) -> &'static str {
        match self {
            CsvFrame::Global => "global",
            CsvFrame::Local => "local",
        }
    }

    /// The frame the agents fly in for a given protocol.
    pub fn native(mode: Mode) -> Self {
        match mode {
            Mode::Method1 => CsvFrame::Global,
            Mode::Method2 => CsvFrame::Local,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

fn num(x: f64) -> String {
    format!("{x:.12e}")
}

/// Writes one row per (timestep, agent). Records are already in time order
/// and agents in id order, so rows come out sorted by `(t, agent)`.
pub fn write_trajectory_csv<W: Write>(log: &TrajectoryLog, frame: CsvFrame, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(std::io::Error::from)?;
    for rec in &log.records {
        let q = rec.q;
        let d = rec.decomposition;
        for a in &rec.agents {
            let (des, act) = match frame {
                CsvFrame::Global => (
                    [a.desired_global.x, a.desired_global.y, a.desired_global.z],
                    [a.actual_global.x, a.actual_global.y, a.actual_global.z],
                ),
                CsvFrame::Local => (
                    [a.desired_local.u, a.desired_local.v, a.desired_global.z],
                    [a.actual_local.u, a.actual_local.v, a.actual_global.z],
                ),
            };
            let row = [
                format!("{:.6}", rec.t),
                a.agent.to_string(),
                frame.name().to_string(),
                num(des[0]),
                num(des[1]),
                num(des[2]),
                num(act[0]),
                num(act[1]),
                num(act[2]),
                num(q.q11),
                num(q.q12),
                num(q.q21),
                num(q.q22),
                num(d.lambda_1),
                num(d.lambda_2),
                num(d.psi_r),
                num(d.psi_d),
                u8::from(rec.safety.containment_ok).to_string(),
                num(rec.safety.min_pairwise_dist),
            ];
            w.write_record(&row).map_err(std::io::Error::from)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectory_json<W: Write>(log: &TrajectoryLog, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    serde_json::to_writer(&mut out, log).map_err(std::io::Error::from)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// One JSON safety report per line.
pub fn write_safety_ndjson<W: Write>(log: &TrajectoryLog, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    for rec in &log.records {
        serde_json::to_writer(&mut out, &rec.safety).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_summary_json<W: Write>(summary: &RunSummary, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    serde_json::to_writer_pretty(&mut out, summary).map_err(std::io::Error::from)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Writes the trajectory, the safety stream and the summary into `dir`,
/// returning the paths written.
///
/// CSV output uses the run's own frame; a local-frame run additionally gets
/// `trajectory_global.csv` with the leader-composed positions.
pub fn write_run_outputs(log: &TrajectoryLog, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut create = |name: &str| -> Result<(File, PathBuf)> {
        let path = dir.join(name);
        let file = File::create(&path)?;
        written.push(path.clone());
        Ok((file, path))
    };
    match format {
        OutputFormat::Csv => {
            let native = CsvFrame::native(log.mode);
            write_trajectory_csv(log, native, create("trajectory.csv")?.0)?;
            if native == CsvFrame::Local {
                write_trajectory_csv(log, CsvFrame::Global, create("trajectory_global.csv")?.0)?;
            }
        }
        OutputFormat::Json => write_trajectory_json(log, create("trajectory.json")?.0)?,
    }
    write_safety_ndjson(log, create("safety.ndjson")?.0)?;
    write_summary_json(&log.summary(), create("summary.json")?.0)?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formation::build_reference;
    use crate::planner::{build_j, plan_mission, BoundaryPolar, PhaseSpec};
    use crate::safety::SafetyReport;
    use crate::sim::{run, LeaderPath, RunConfig};
    use std::f64::consts::PI;

    fn short_run(mode: Mode) -> TrajectoryLog {
        let reference = build_reference(1.25, 1.25, 2.0 * PI / 3.0, 4.0 * PI / 3.0).unwrap();
        let j = build_j(&reference, 0.3).unwrap();
        let a = BoundaryPolar::new(1.25, 1.25, 2.0 * PI / 3.0, 4.0 * PI / 3.0);
        let b = BoundaryPolar::new(0.5, 0.7, 2.0 * PI / 3.0, 4.0 * PI / 3.0);
        let mission = plan_mission(j, vec![PhaseSpec::new(0.0, 0.1, a, b).unwrap()]).unwrap();
        let leader = LeaderPath::stationary(1.0, 2.0, 0.3, 1.5).unwrap();
        run(&RunConfig::new(mission, leader, mode)).unwrap()
    }

    fn csv_string(log: &TrajectoryLog, frame: CsvFrame) -> String {
        let mut buf = Vec::new();
        write_trajectory_csv(log, frame, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn csv_header_and_row_count() {
        let log = short_run(Mode::Method1);
        let text = csv_string(&log, CsvFrame::Global);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(lines.count(), log.records.len() * 3);
    }

    #[test]
    fn csv_rows_sorted_and_precise() {
        let log = short_run(Mode::Method2);
        let text = csv_string(&log, CsvFrame::Local);
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let mut last = (f64::NEG_INFINITY, 0usize);
        for (row, rec) in reader.records().zip(log.records.iter().flat_map(|r| r.agents.iter().map(move |a| (r, a)))) {
            let row = row.unwrap();
            let key = (row[0].parse::<f64>().unwrap(), row[1].parse::<usize>().unwrap());
            assert!(key > last);
            last = key;
            assert_eq!(&row[2], "local");
            let x_des: f64 = row[3].parse().unwrap();
            assert!((x_des - rec.1.desired_local.u).abs() <= 1e-12 * rec.1.desired_local.u.abs().max(1.0));
            let q11: f64 = row[9].parse().unwrap();
            assert!((q11 - rec.0.q.q11).abs() < 1e-12);
        }
    }

    #[test]
    fn global_frame_uses_composed_positions() {
        let log = short_run(Mode::Method2);
        let text = csv_string(&log, CsvFrame::Global);
        let row = text.lines().nth(1).unwrap();
        let x: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
        assert!((x - log.records[0].agents[0].desired_global.x).abs() < 1e-12);
    }

    #[test]
    fn safety_stream_is_one_object_per_step() {
        let log = short_run(Mode::Method1);
        let mut buf = Vec::new();
        write_safety_ndjson(&log, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let reports: Vec<SafetyReport> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(reports.len(), log.records.len());
        assert_eq!(reports[3], log.records[3].safety);
    }

    #[test]
    fn output_directory_layout() {
        let dir = tempfile::tempdir().unwrap();
        let local = short_run(Mode::Method2);
        let files = write_run_outputs(&local, dir.path(), OutputFormat::Csv).unwrap();
        let names: Vec<_> = files.iter().map(|p| p.file_name().unwrap().to_str().unwrap().to_string()).collect();
        assert_eq!(names, ["trajectory.csv", "trajectory_global.csv", "safety.ndjson", "summary.json"]);

        let files = write_run_outputs(&short_run(Mode::Method1), dir.path(), OutputFormat::Json).unwrap();
        let json = fs::read_to_string(&files[0]).unwrap();
        let back: TrajectoryLog = serde_json::from_str(&json).unwrap();
        assert_eq!(back.records.len(), 11);
        let summary: RunSummary = serde_json::from_str(&fs::read_to_string(&files[2]).unwrap()).unwrap();
        assert_eq!(summary.steps, 11);
    }
}
