//! Recorded chain snapshots and their line-delimited JSON form.
//!
//! One JSON object per line:
//!
//! ```text
//! {"iteration":2170,"alpha":0.83,"k":2,"labels":[1,2,1,...],
//!  "clusters":[{"theta":[...],"var_within":0.01,"var_cond":0.002,"var_resid":0.04}, ...]}
//! ```
//!
//! Labels in the file are 1-based cluster indices into `clusters`.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ClusterParams;
use crate::partition::{ChainState, Partition};

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub iteration: usize,
    pub state: ChainState,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub snapshots: Vec<Snapshot>,
}

#[derive(Serialize, Deserialize)]
struct Record {
    iteration: usize,
    alpha: f64,
    k: usize,
    labels: Vec<usize>,
    clusters: Vec<ClusterParams>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// Largest cluster count over all snapshots.
    pub fn max_k(&self) -> usize {
        self.snapshots.iter().map(|s| s.state.k()).max().unwrap_or(0)
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for s in &self.snapshots {
            let rec = Record {
                iteration: s.iteration,
                alpha: s.state.alpha,
                k: s.state.k(),
                labels: s.state.partition.labels().iter().map(|l| l + 1).collect(),
                clusters: s.state.params.clone(),
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_jsonl(file)
    }

    pub fn read_jsonl<R: Read>(r: R) -> Result<Self> {
        let mut snapshots = Vec::new();
        for (n, line) in BufReader::new(r).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row = n + 1;
            let rec: Record = serde_json::from_str(&line)
                .map_err(|e| Error::Parse { row, msg: e.to_string() })?;
            if rec.labels.contains(&0) {
                return Err(Error::Parse { row, msg: "labels are 1-based".into() });
            }
            let partition = Partition::from_labels(rec.labels.iter().map(|l| l - 1).collect())
                .map_err(|e| Error::Parse { row, msg: e.to_string() })?;
            if partition.k() != rec.k || rec.clusters.len() != rec.k {
                return Err(Error::Parse {
                    row,
                    msg: format!("k = {} but {} clusters and {} distinct labels", rec.k, rec.clusters.len(), partition.k()),
                });
            }
            let state = ChainState::new(partition, rec.clusters, rec.alpha)
                .map_err(|e| Error::Parse { row, msg: e.to_string() })?;
            snapshots.push(Snapshot { iteration: rec.iteration, state });
        }
        Ok(Self { snapshots })
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::read_jsonl(std::fs::File::open(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Trace {
        let p = Partition::from_labels(vec![0, 1, 0]).unwrap();
        let params = vec![
            ClusterParams::new(vec![0.1, -0.3], 0.01, 0.02, 0.3).unwrap(),
            ClusterParams::new(vec![1.0 / 3.0, 2.5e-7], 0.0, 1e-300, 1e-12).unwrap(),
        ];
        Trace { snapshots: vec![Snapshot { iteration: 7, state: ChainState::new(p, params, 0.7).unwrap() }] }
    }

    #[test]
    fn round_trip_is_exact() {
        let t = sample();
        let mut buf = Vec::new();
        t.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("\"labels\":[1,2,1]"));
        assert_eq!(Trace::read_jsonl(buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn inconsistent_record_rejected() {
        let line = r#"{"iteration":1,"alpha":1.0,"k":2,"labels":[1,1],"clusters":[{"theta":[0],"var_within":0,"var_cond":0,"var_resid":1}]}"#;
        assert!(matches!(Trace::read_jsonl(line.as_bytes()), Err(Error::Parse { row: 1, .. })));
        let zero = r#"{"iteration":1,"alpha":1.0,"k":1,"labels":[0],"clusters":[{"theta":[0],"var_within":0,"var_cond":0,"var_resid":1}]}"#;
        assert!(Trace::read_jsonl(zero.as_bytes()).is_err());
    }
}
