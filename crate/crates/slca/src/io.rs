//! File formats: numeric CSV tables and JSON descriptors.
//!
//! Floats are written with Rust's shortest round-trip formatting and read
//! back bit-exactly, so saved artifacts are stable regression fixtures.
//! CSV files that represent raw matrices and vectors carry no header;
//! tabular exports (events, traces, readouts) carry one.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::analog::AnalogTrajectory;
use crate::error::{Result, SlcaError};
use crate::model::{AtomOps, Dictionary, Mode, SparseCodingProblem};
use crate::readout::ReadoutTable;
use crate::spiking::{DerivedBounds, SpikeLog};

/// Output directory resolution: explicit flag, then the SLCA_OUT
/// environment variable, then ./out. The directory is created.
pub fn resolve_out_dir(flag: Option<&Path>) -> Result<PathBuf> {
    let dir = match flag {
        Some(p) => p.to_path_buf(),
        None => match std::env::var_os("SLCA_OUT") {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => PathBuf::from("out"),
        },
    };
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Serializes any value as pretty JSON ending in a newline.
pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Reads a JSON file back into a value.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn parse_field(token: &str, path: &Path, line_no: usize) -> Result<f64> {
    token.trim().parse::<f64>().map_err(|_| {
        SlcaError::Parse(format!("{}:{line_no}: not a number: {token:?}", path.display()))
    })
}

/// Writes a headerless numeric CSV, one matrix row per line.
pub fn save_matrix_csv(path: &Path, rows: &[Vec<f64>]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(f, "{}", line.join(","))?;
    }
    f.flush()?;
    Ok(())
}

/// Reads a headerless numeric CSV into rows; all rows must be equally wide.
pub fn load_matrix_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Result<Vec<f64>> =
            line.split(',').map(|tok| parse_field(tok, path, idx + 1)).collect();
        rows.push(row?);
    }
    if let Some(w) = rows.first().map(Vec::len) {
        if let Some(bad) = rows.iter().position(|r| r.len() != w) {
            return Err(SlcaError::Parse(format!(
                "{}: row {} has {} fields, expected {w}",
                path.display(),
                bad + 1,
                rows[bad].len()
            )));
        }
    }
    Ok(rows)
}

/// Writes a vector as one value per line.
pub fn save_vector_csv(path: &Path, values: &[f64]) -> Result<()> {
    save_matrix_csv(path, &values.iter().map(|&v| vec![v]).collect::<Vec<_>>())
}

/// Reads a one-column CSV back into a vector.
pub fn load_vector_csv(path: &Path) -> Result<Vec<f64>> {
    let rows = load_matrix_csv(path)?;
    rows.into_iter()
        .map(|r| {
            if r.len() == 1 {
                Ok(r[0])
            } else {
                Err(SlcaError::Parse(format!("{}: expected one value per line", path.display())))
            }
        })
        .collect()
}

/// On-disk description of a problem: file references plus penalties.
/// Relative paths resolve against the descriptor's own directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemDescriptor {
    pub dictionary: PathBuf,
    pub signal: PathBuf,
    pub lambda1: f64,
    #[serde(default)]
    pub lambda2: f64,
    #[serde(default = "Mode::default_classo")]
    pub mode: Mode,
}

/// Saves dictionary.csv, signal.csv, and problem.json into `dir`; returns
/// the descriptor path.
pub fn save_problem(dir: &Path, dict: &Dictionary, signal: &[f64], lambda1: f64, lambda2: f64, mode: Mode) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let rows: Vec<Vec<f64>> = (0..dict.signal_dim())
        .map(|r| (0..dict.num_atoms()).map(|c| dict.column(c)[r]).collect())
        .collect();
    save_matrix_csv(&dir.join("dictionary.csv"), &rows)?;
    save_vector_csv(&dir.join("signal.csv"), signal)?;
    let descriptor = ProblemDescriptor {
        dictionary: PathBuf::from("dictionary.csv"),
        signal: PathBuf::from("signal.csv"),
        lambda1,
        lambda2,
        mode,
    };
    let path = dir.join("problem.json");
    save_json(&path, &descriptor)?;
    Ok(path)
}

/// Loads a problem from its JSON descriptor.
pub fn load_problem(descriptor_path: &Path) -> Result<SparseCodingProblem> {
    let descriptor: ProblemDescriptor = load_json(descriptor_path)?;
    let base = descriptor_path.parent().unwrap_or_else(|| Path::new("."));
    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    let rows = load_matrix_csv(&resolve(&descriptor.dictionary))?;
    let signal = load_vector_csv(&resolve(&descriptor.signal))?;
    let dict = Dictionary::from_rows(&rows)?;
    SparseCodingProblem::from_dictionary(dict, signal, descriptor.lambda1, descriptor.lambda2, descriptor.mode)
}

/// Writes all spikes as a two-column CSV sorted by time (ties by neuron).
pub fn save_spike_events_csv(path: &Path, log: &SpikeLog) -> Result<()> {
    let mut events: Vec<(f64, usize)> = log
        .spikes
        .iter()
        .enumerate()
        .flat_map(|(i, train)| train.iter().map(move |&t| (t, i)))
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "neuron_id,time")?;
    for (t, i) in events {
        writeln!(f, "{i},{t}")?;
    }
    f.flush()?;
    Ok(())
}

/// Writes the sampled current trace: t,mu_1,...,mu_N.
pub fn save_trace_csv(path: &Path, log: &SpikeLog) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=log.num_neurons()).map(|i| format!("mu_{i}")))
        .collect();
    writeln!(f, "{}", header.join(","))?;
    for (k, &t) in log.trace_times.iter().enumerate() {
        let mut line = t.to_string();
        for v in &log.trace_mu[k] {
            line.push(',');
            line.push_str(&v.to_string());
        }
        writeln!(f, "{line}")?;
    }
    f.flush()?;
    Ok(())
}

/// Writes membrane potentials on the trace grid: t,v_1,...,v_N.
/// Requires an event-driven log (potentials are reconstructed exactly
/// from its segments).
pub fn save_potentials_csv(path: &Path, log: &SpikeLog) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=log.num_neurons()).map(|i| format!("v_{i}")))
        .collect();
    writeln!(f, "{}", header.join(","))?;
    for &t in &log.trace_times {
        let v = log.potential_at(t)?;
        let mut line = t.to_string();
        for x in v {
            line.push(',');
            line.push_str(&x.to_string());
        }
        writeln!(f, "{line}")?;
    }
    f.flush()?;
    Ok(())
}

/// Writes a numeric table with the given header row.
pub fn save_table_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{}", header.join(","))?;
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(f, "{}", line.join(","))?;
    }
    f.flush()?;
    Ok(())
}

/// Machine-readable wrap-up of a spiking run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikingSummary {
    pub spike_counts: Vec<usize>,
    pub derived_bounds: DerivedBounds,
    pub terminated_reason: String,
}

/// Full-fidelity spike log save (JSON); reloadable for later readouts.
pub fn save_spike_log(path: &Path, log: &SpikeLog) -> Result<()> {
    save_json(path, log)
}

/// Reloads a spike log saved by [`save_spike_log`].
pub fn load_spike_log(path: &Path) -> Result<SpikeLog> {
    load_json(path)
}

/// Writes an analog trajectory: t,u_1..u_N,a_1..a_N,energy.
pub fn save_trajectory_csv(path: &Path, traj: &AnalogTrajectory) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let n = traj.samples.first().map_or(0, |s| s.u.len());
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=n).map(|i| format!("u_{i}")))
        .chain((1..=n).map(|i| format!("a_{i}")))
        .chain(std::iter::once("energy".to_string()))
        .collect();
    writeln!(f, "{}", header.join(","))?;
    for s in &traj.samples {
        let mut line = s.t.to_string();
        for v in s.u.iter().chain(s.a.iter()) {
            line.push(',');
            line.push_str(&v.to_string());
        }
        line.push(',');
        line.push_str(&s.energy.to_string());
        writeln!(f, "{line}")?;
    }
    f.flush()?;
    Ok(())
}

/// Writes a readout table: neuron_id,a_window,a_thresh_current,
/// a_exp_kernel,u_avg,delta_gap.
pub fn save_readout_csv(path: &Path, table: &ReadoutTable) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "neuron_id,a_window,a_thresh_current,a_exp_kernel,u_avg,delta_gap")?;
    for row in &table.rows {
        writeln!(
            f,
            "{},{},{},{},{},{}",
            row.neuron, row.a_window, row.a_thresh_current, row.a_exp_kernel, row.u_avg, row.delta_gap
        )?;
    }
    f.flush()?;
    Ok(())
}
