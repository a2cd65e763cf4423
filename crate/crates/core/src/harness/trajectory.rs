//! Per-action trajectory records and their JSON-lines dump.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::filter::ParticleSnapshot;
use crate::simulator::{Action, Observation, StepEvent, VelcroState};

/// One executed action with everything needed to replay or plot it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub step: usize,
    pub action: Action,
    pub event: StepEvent,
    /// Ground truth after the action.
    pub truth: VelcroState,
    pub observation: Observation,
    /// Filter estimate after the measurement updates that followed the action.
    pub estimate: Option<VelcroState>,
    pub health_index: Option<f64>,
    pub cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub particles: Option<Vec<ParticleSnapshot>>,
}

pub fn write_jsonl<W: Write>(records: &[TrajectoryRecord], mut out: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<TrajectoryRecord>> {
    let mut records = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line)?);
    }
    Ok(records)
}

/// Writes one JSON object per line to `path`.
pub fn dump_trajectory(records: &[TrajectoryRecord], path: &Path) -> Result<()> {
    write_jsonl(records, BufWriter::new(File::create(path)?))
}

pub fn load_trajectory(path: &Path) -> Result<Vec<TrajectoryRecord>> {
    read_jsonl(BufReader::new(File::open(path)?))
}
