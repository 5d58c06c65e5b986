//! Artifact persistence: atomic writes, the output-directory lock, the JSON
//! report envelope and the trajectory CSV schema `id,degree,t,x,y`.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::energy::EnergyReport;
use crate::error::{Error, Result};
use crate::law::OdeSolution;
use crate::vortex::{StopReason, Termination, Trajectory};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

const LOCK_NAME: &str = ".vortexlab.lock";

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Format(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let mut f = fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    drop(f);
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct OutputLock {
    dir: PathBuf,
    lock: PathBuf,
}

impl OutputLock {
    pub fn acquire(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let lock = dir.join(LOCK_NAME);
        let mut f = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&lock)
            .map_err(|e| {
                if e.kind() == std::io::ErrorKind::AlreadyExists {
                    Error::Io(std::io::Error::new(
                        e.kind(),
                        format!("{} is locked by another command", dir.display()),
                    ))
                } else {
                    Error::Io(e)
                }
            })?;
        writeln!(f, "{}", std::process::id())?;
        Ok(Self { dir, lock })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub config_hash: String,
    pub version: String,
    pub results: T,
}

impl<T: Serialize> Envelope<T> {
    pub fn new(config_hash: &str, results: T) -> Self {
        Self {
            config_hash: config_hash.to_string(),
            version: VERSION.to_string(),
            results,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn read_envelope<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Envelope<T>> {
    Ok(serde_json::from_str(text)?)
}

/// One row of the trajectory schema.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub id: usize,
    pub degree: i32,
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

pub fn trajectory_rows(trajectories: &[Trajectory]) -> Vec<TrajectoryRow> {
    trajectories
        .iter()
        .flat_map(|tr| {
            tr.samples.iter().map(|&(t, p)| TrajectoryRow {
                id: tr.id,
                degree: tr.degree,
                t,
                x: p[0],
                y: p[1],
            })
        })
        .collect()
}

pub fn trajectories_csv(trajectories: &[Trajectory]) -> String {
    let mut s = String::from("id,degree,t,x,y\n");
    for r in trajectory_rows(trajectories) {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.id,
            r.degree,
            fmt_float(r.t),
            fmt_float(r.x),
            fmt_float(r.y)
        ));
    }
    s
}

fn field<T: std::str::FromStr>(line: usize, name: &str, v: Option<&str>) -> Result<T> {
    v.map(str::trim)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Format(format!("trajectory CSV line {line}: bad `{name}`")))
}

pub fn parse_trajectory_csv(text: &str) -> Result<Vec<TrajectoryRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "id,degree,t,x,y" => {}
        _ => {
            return Err(Error::Format(
                "trajectory CSV must start with `id,degree,t,x,y`".into(),
            ))
        }
    }
    let mut rows = Vec::new();
    for (k, line) in lines.filter(|(_, l)| !l.trim().is_empty()) {
        let mut it = line.split(',');
        let row = TrajectoryRow {
            id: field(k + 1, "id", it.next())?,
            degree: field(k + 1, "degree", it.next())?,
            t: field(k + 1, "t", it.next())?,
            x: field(k + 1, "x", it.next())?,
            y: field(k + 1, "y", it.next())?,
        };
        if it.next().is_some() {
            return Err(Error::Format(format!(
                "trajectory CSV line {}: too many columns",
                k + 1
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Group rows by id, in order of first appearance.
fn group_rows(rows: &[TrajectoryRow]) -> Result<Vec<(usize, i32, Vec<(f64, [f64; 2])>)>> {
    let mut order: Vec<usize> = Vec::new();
    let mut groups: BTreeMap<usize, (i32, Vec<(f64, [f64; 2])>)> = BTreeMap::new();
    for r in rows {
        let g = groups.entry(r.id).or_insert_with(|| {
            order.push(r.id);
            (r.degree, Vec::new())
        });
        if g.0 != r.degree {
            return Err(Error::Format(format!("vortex {} changes degree", r.id)));
        }
        if g.1.last().is_some_and(|s| s.0 >= r.t) {
            return Err(Error::Format(format!(
                "vortex {} samples are not increasing in t",
                r.id
            )));
        }
        g.1.push((r.t, [r.x, r.y]));
    }
    Ok(order
        .into_iter()
        .map(|id| {
            let (d, s) = groups.remove(&id).expect("grouped");
            (id, d, s)
        })
        .collect())
}

/// Sidecar record of tracked terminations, keyed by vortex id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminationRecord {
    pub id: usize,
    pub reason: StopReason,
    pub t: f64,
}

pub fn termination_records(trajectories: &[Trajectory]) -> Vec<TerminationRecord> {
    trajectories
        .iter()
        .map(|t| TerminationRecord {
            id: t.id,
            reason: t.termination.reason,
            t: t.termination.t,
        })
        .collect()
}

pub fn trajectories_from_parts(
    rows: &[TrajectoryRow],
    terminations: &[TerminationRecord],
) -> Result<Vec<Trajectory>> {
    group_rows(rows)?
        .into_iter()
        .map(|(id, degree, samples)| {
            let term = terminations
                .iter()
                .find(|r| r.id == id)
                .ok_or_else(|| Error::Format(format!("no termination recorded for vortex {id}")))?;
            Ok(Trajectory {
                id,
                degree,
                samples,
                termination: Termination {
                    reason: term.reason,
                    t: term.t,
                },
            })
        })
        .collect()
}

/// Sidecar record of the law's stopping event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawStop {
    pub t_star: f64,
    pub stop_reason: StopReason,
    pub involved: Vec<usize>,
}

impl LawStop {
    pub fn of(sol: &OdeSolution) -> Self {
        Self {
            t_star: sol.t_star,
            stop_reason: sol.stop_reason,
            involved: sol.involved.clone(),
        }
    }
}

pub fn ode_solution_from_parts(rows: &[TrajectoryRow], stop: &LawStop) -> Result<OdeSolution> {
    let mut groups = group_rows(rows)?;
    groups.sort_by_key(|g| g.0);
    if groups.iter().enumerate().any(|(k, g)| g.0 != k) {
        return Err(Error::Format("law trajectory ids must be 0..n".into()));
    }
    let (degrees, paths) = groups.into_iter().map(|(_, d, s)| (d, s)).unzip();
    Ok(OdeSolution {
        degrees,
        paths,
        t_star: stop.t_star,
        stop_reason: stop.stop_reason,
        involved: stop.involved.clone(),
    })
}

/// Per-frame diagnostics: time, both energies and the detected vortex count.
pub fn energies_csv(energies: &[EnergyReport], counts: &[usize]) -> String {
    let mut s = String::from("t,f_eps,f_tilde_eps,normalized,vortex_count\n");
    for (e, n) in energies.iter().zip(counts) {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_float(e.t),
            fmt_float(e.f),
            fmt_float(e.f_tilde),
            fmt_float(e.normalized),
            n
        ));
    }
    s
}

/// A header plus rows of floats.
pub fn table_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(
            &r.iter()
                .map(|v| fmt_float(*v))
                .collect::<Vec<_>>()
                .join(","),
        );
        s.push('\n');
    }
    s
}
