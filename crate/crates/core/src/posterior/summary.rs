//! Point summaries of a relabeled posterior.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::Result;
use crate::posterior::allocation::AllocationMatrix;
use crate::sampler::Trace;

/// Hard assignment of one item with its runner-up column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assignment {
    pub cluster: usize,
    pub probability: f64,
    pub second_cluster: Option<usize>,
    pub second_probability: f64,
}

/// Aligned per-column parameter summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSummary {
    /// Items hard-assigned to this column.
    pub size: usize,
    /// Snapshots that had a cluster mapped to this column.
    pub n_draws: usize,
    /// Posterior mean of theta; empty when `n_draws == 0`.
    pub mean_theta: Vec<f64>,
    /// Posterior medians of the within, cross-condition and residual sds.
    pub median_sd: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub assignments: Vec<Assignment>,
    pub clusters: Vec<ClusterSummary>,
    /// Scores on the first two principal components of `P`.
    pub pca_scores: Vec<[f64; 2]>,
    /// Variances of the two components.
    pub pca_variance: [f64; 2],
}

impl Summary {
    /// Number of columns that received at least one hard assignment.
    pub fn n_occupied(&self) -> usize {
        self.clusters.iter().filter(|c| c.size > 0).count()
    }
}

pub fn hard_assignments(p: &AllocationMatrix) -> Vec<Assignment> {
    p.rows()
        .zip(p.argmax())
        .map(|(row, best)| {
            let second = (0..row.len())
                .filter(|&c| c != best)
                .fold(None, |acc: Option<usize>, c| match acc {
                    Some(s) if row[s] >= row[c] => Some(s),
                    _ => Some(c),
                });
            Assignment {
                cluster: best,
                probability: row[best],
                second_cluster: second,
                second_probability: second.map_or(0.0, |s| row[s]),
            }
        })
        .collect()
}

fn median(xs: &mut [f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(|a, b| a.total_cmp(b));
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

/// Per-column parameter summaries after mapping cluster `c` of snapshot
/// `h` to column `permutations[h][c]`.
pub fn cluster_summaries(p: &AllocationMatrix, trace: &Trace, permutations: &[Vec<usize>]) -> Vec<ClusterSummary> {
    assert_eq!(trace.len(), permutations.len(), "one permutation per snapshot");
    let k = p.n_columns();
    let mut sizes = vec![0; k];
    for c in p.argmax() {
        sizes[c] += 1;
    }
    let mut sums: Vec<Vec<f64>> = vec![Vec::new(); k];
    let mut sds: Vec<[Vec<f64>; 3]> = vec![Default::default(); k];
    for (snap, perm) in trace.snapshots.iter().zip(permutations) {
        for (c, params) in snap.state.params.iter().enumerate() {
            let col = perm[c];
            let acc = &mut sums[col];
            if acc.is_empty() {
                acc.resize(params.n_times(), 0.0);
            }
            acc.iter_mut().zip(&params.theta).for_each(|(a, t)| *a += t);
            for (v, s) in sds[col].iter_mut().zip(params.sds()) {
                v.push(s);
            }
        }
    }
    sums.into_iter()
        .zip(sds)
        .zip(sizes)
        .map(|((sum, mut sd), size)| {
            let n_draws = sd[0].len();
            ClusterSummary {
                size,
                n_draws,
                mean_theta: sum.iter().map(|s| s / n_draws as f64).collect(),
                median_sd: [median(&mut sd[0]), median(&mut sd[1]), median(&mut sd[2])],
            }
        })
        .collect()
}

/// Scores of the rows of `P` on the two leading eigenvectors of the
/// covariance of its column-centered form. Each eigenvector is signed so
/// its largest-magnitude loading is positive.
pub fn pca_scores(p: &AllocationMatrix) -> (Vec<[f64; 2]>, [f64; 2]) {
    let (n, k) = (p.n_items(), p.n_columns());
    let mut x = DMatrix::from_row_slice(n, k, p.as_slice());
    for mut col in x.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    let denom = (n.max(2) - 1) as f64;
    let cov = x.transpose() * &x / denom;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut scores = vec![[0.0; 2]; n];
    let mut variance = [0.0; 2];
    for (slot, &e) in order.iter().take(2).enumerate() {
        let mut v = eig.eigenvectors.column(e).into_owned();
        let lead = v.iter().copied().fold(0.0, |m: f64, x| if x.abs() > m.abs() { x } else { m });
        if lead < 0.0 {
            v.neg_mut();
        }
        let s = &x * v;
        for (row, si) in scores.iter_mut().zip(s.iter()) {
            row[slot] = *si;
        }
        variance[slot] = eig.eigenvalues[e].max(0.0);
    }
    (scores, variance)
}

pub fn summarize(p: &AllocationMatrix, trace: &Trace, permutations: &[Vec<usize>]) -> Summary {
    let (pca_scores, pca_variance) = pca_scores(p);
    Summary {
        assignments: hard_assignments(p),
        clusters: cluster_summaries(p, trace, permutations),
        pca_scores,
        pca_variance,
    }
}

/// Shortest round-trip text, in exponent form for very small or large
/// magnitudes.
fn num(x: f64) -> String {
    if x != 0.0 && !(1e-4..1e15).contains(&x.abs()) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

pub fn write_allocation_csv<W: Write>(p: &AllocationMatrix, items: &[String], w: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    let mut header = vec!["item".to_string()];
    header.extend((1..=p.n_columns()).map(|c| format!("k{c}")));
    w.write_record(&header)?;
    for (item, row) in items.iter().zip(p.rows()) {
        let mut rec = vec![item.clone()];
        rec.extend(row.iter().map(|&x| num(x)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_assignments_csv<W: Write>(s: &Summary, items: &[String], w: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["item", "cluster", "probability", "second_cluster", "second_probability"])?;
    for (item, a) in items.iter().zip(&s.assignments) {
        w.write_record([
            item.clone(),
            (a.cluster + 1).to_string(),
            num(a.probability),
            a.second_cluster.map_or(String::new(), |c| (c + 1).to_string()),
            num(a.second_probability),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Long format, one row per (cluster, time); columns never visited by any
/// snapshot are omitted.
pub fn write_cluster_means_csv<W: Write>(s: &Summary, times: &[f64], w: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["cluster", "time", "mean"])?;
    for (c, cl) in s.clusters.iter().enumerate() {
        for (t, m) in times.iter().zip(&cl.mean_theta) {
            w.write_record([(c + 1).to_string(), t.to_string(), num(*m)])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_cluster_sd_csv<W: Write>(s: &Summary, w: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["cluster", "size", "n_draws", "sd_within", "sd_cond", "sd_resid"])?;
    for (c, cl) in s.clusters.iter().enumerate().filter(|(_, cl)| cl.n_draws > 0) {
        let [a, b, e] = cl.median_sd;
        w.write_record([
            (c + 1).to_string(),
            cl.size.to_string(),
            cl.n_draws.to_string(),
            num(a),
            num(b),
            num(e),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_pca_csv<W: Write>(s: &Summary, items: &[String], w: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["item", "pc1", "pc2"])?;
    for (item, [a, b]) in items.iter().zip(&s.pca_scores) {
        w.write_record([item.clone(), num(*a), num(*b)])?;
    }
    w.flush()?;
    Ok(())
}
