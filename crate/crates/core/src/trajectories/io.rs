use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ensemble::{Ensemble, Provenance, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::Point;

const HEADER: &str = "traj_id,t,x,y";

#[derive(Serialize, Deserialize)]
struct Sidecar {
    provenance: Provenance,
    trajectories: Vec<Trajectory>,
}

/// Rows `traj_id,t,x,y` in trajectory-major order with round-trip precision.
pub fn write_trajectories_csv<W: Write>(ens: &Ensemble, out: W) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "{HEADER}")?;
    for traj in &ens.trajectories {
        for (k, p) in traj.positions.iter().enumerate() {
            writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e}",
                traj.id,
                traj.time(k),
                p.x,
                p.y
            )?;
        }
    }
    out.flush()
}

pub fn write_sidecar<W: Write>(ens: &Ensemble, out: W) -> Result<()> {
    let sidecar = Sidecar {
        provenance: ens.provenance.clone(),
        trajectories: ens.trajectories.clone(),
    };
    serde_json::to_writer_pretty(out, &sidecar)?;
    Ok(())
}

/// Writes `<stem>.csv` and `<stem>.meta.json` next to each other.
pub fn save_ensemble(ens: &Ensemble, csv_path: &Path) -> Result<()> {
    write_trajectories_csv(ens, fs::File::create(csv_path)?)?;
    write_sidecar(ens, fs::File::create(sidecar_path(csv_path))?)
}

pub fn sidecar_path(csv_path: &Path) -> std::path::PathBuf {
    csv_path.with_extension("meta.json")
}

/// Reads an ensemble written by [`save_ensemble`].
pub fn load_ensemble(csv_path: &Path) -> Result<Ensemble> {
    let meta_path = sidecar_path(csv_path);
    let sidecar: Sidecar = serde_json::from_slice(&fs::read(&meta_path)?)?;
    let text = fs::read_to_string(csv_path)?;
    let bad = |line: usize, message: String| Error::Data {
        path: csv_path.to_path_buf(),
        message: format!("line {line}: {message}"),
    };

    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == HEADER => {}
        _ => return Err(bad(1, format!("expected header `{HEADER}`"))),
    }
    let mut positions: HashMap<u64, Vec<Point>> = HashMap::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(bad(
                i + 1,
                format!("expected 4 columns, got {}", fields.len()),
            ));
        }
        let id: u64 = fields[0]
            .trim()
            .parse()
            .map_err(|e| bad(i + 1, format!("traj_id: {e}")))?;
        let num = |s: &str, name: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|e| bad(i + 1, format!("{name}: {e}")))
        };
        let p = Point::new(num(fields[2], "x")?, num(fields[3], "y")?);
        num(fields[1], "t")?;
        positions.entry(id).or_default().push(p);
    }

    let mut trajectories = sidecar.trajectories;
    for traj in &mut trajectories {
        traj.positions = positions.remove(&traj.id).unwrap_or_default();
    }
    if let Some(id) = positions.keys().next() {
        return Err(bad(
            0,
            format!("trajectory {id} missing from {}", meta_path.display()),
        ));
    }
    Ok(Ensemble {
        trajectories,
        provenance: sidecar.provenance,
    })
}
