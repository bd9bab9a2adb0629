//! Posterior allocation inference from a recorded trace: per-snapshot
//! resampling of allocation matrices, relabeling, and summaries.

mod allocation;
mod assignment;
mod relabel;
mod summary;

pub use allocation::{
    allocation_given_weights, resample_allocation, AllocationMatrix, DirichletWeights, WeightVector, ROW_SUM_TOL,
};
pub use assignment::{assignment_cost, solve_assignment};
pub use relabel::{relabel, Relabeling, CONVERGENCE_TOL, LOG_FLOOR, MAX_ROUNDS};
pub use summary::{
    cluster_summaries, hard_assignments, pca_scores, summarize, write_allocation_csv, write_assignments_csv,
    write_cluster_means_csv, write_cluster_sd_csv, write_pca_csv, Assignment, ClusterSummary, Summary,
};

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::sampler::Trace;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PosteriorOptions {
    pub weights: DirichletWeights,
    pub seed: u64,
    /// Worker threads for resampling; `None` uses the available parallelism.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub relabeling: Relabeling,
    pub summary: Summary,
}

impl Posterior {
    pub fn p(&self) -> &AllocationMatrix {
        &self.relabeling.p
    }

    /// Writes `P.csv`, `assignments.csv`, `cluster_means.csv`,
    /// `cluster_sd.csv` and `pca_scores.csv` into `dir`.
    pub fn write_dir<P: AsRef<Path>>(&self, dir: P, data: &Dataset) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let open = |name: &str| -> Result<std::io::BufWriter<std::fs::File>> {
            Ok(std::io::BufWriter::new(std::fs::File::create(dir.join(name))?))
        };
        write_allocation_csv(self.p(), data.items(), open("P.csv")?)?;
        write_assignments_csv(&self.summary, data.items(), open("assignments.csv")?)?;
        write_cluster_means_csv(&self.summary, data.grid().times(), open("cluster_means.csv")?)?;
        write_cluster_sd_csv(&self.summary, open("cluster_sd.csv")?)?;
        write_pca_csv(&self.summary, data.items(), open("pca_scores.csv")?)?;
        Ok(())
    }
}

/// Resamples one allocation matrix per snapshot. Snapshot `h` draws from
/// stream `h` of a generator seeded with `opts.seed`, so the result does
/// not depend on the thread count.
pub fn resample_trace(trace: &Trace, data: &Dataset, opts: &PosteriorOptions) -> Result<Vec<AllocationMatrix>> {
    let h = trace.len();
    let threads = opts
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .clamp(1, h.max(1));
    let one = |idx: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(idx as u64);
        resample_allocation(&trace.snapshots[idx].state, data, opts.weights, &mut rng)
    };
    if threads == 1 {
        return (0..h).map(one).collect();
    }
    let chunk = h.div_ceil(threads);
    let parts: Vec<Result<Vec<AllocationMatrix>>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..h)
            .step_by(chunk)
            .map(|start| {
                let one = &one;
                s.spawn(move || (start..(start + chunk).min(h)).map(one).collect())
            })
            .collect();
        handles.into_iter().map(|t| t.join().expect("resampling worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(h);
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}

/// Full pipeline from a trace to the relabeled allocation matrix and its
/// summaries.
pub fn infer(trace: &Trace, data: &Dataset, opts: &PosteriorOptions) -> Result<Posterior> {
    if trace.is_empty() {
        return Err(Error::InvalidData("trace has no snapshots".into()));
    }
    let draws = resample_trace(trace, data, opts)?;
    let relabeling = relabel(&draws);
    let summary = summarize(&relabeling.p, trace, &relabeling.permutations);
    Ok(Posterior { relabeling, summary })
}
