//! Clustering accuracy and exhaustive partition enumeration.

use std::collections::HashMap;
use std::hash::Hash;

use crate::dp::partition_log_prior;
use crate::error::{Error, Result};
use crate::partition::Partition;

/// Largest `n` accepted by [`enumerate_partitions`] (Bell(12) = 4_213_597).
pub const MAX_ENUMERATION: usize = 12;
/// Largest `n` accepted by [`exact_partition_posterior`].
pub const MAX_EXACT_POSTERIOR: usize = 8;

fn choose2(n: usize) -> f64 {
    let n = n as f64;
    n * (n - 1.0) / 2.0
}

/// Hubert-Arabie corrected (adjusted) Rand index between two labelings.
///
/// When the chance-corrected denominator vanishes (both labelings are all
/// singletons, or both put everything in one block) the index is defined as
/// 1 for identical partitions and 0 otherwise.
pub fn corrected_rand<A, B>(a: &[A], b: &[B]) -> Result<f64>
where
    A: Eq + Hash,
    B: Eq + Hash,
{
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("label vectors of length {} and {}", a.len(), b.len())));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InvalidPartition("at least two items are needed".into()));
    }
    let mut table: HashMap<(&A, &B), usize> = HashMap::new();
    let mut rows: HashMap<&A, usize> = HashMap::new();
    let mut cols: HashMap<&B, usize> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| choose2(c)).sum();
    let expected = sum_a * sum_b / choose2(n);
    let max_index = 0.5 * (sum_a + sum_b);
    let denom = max_index - expected;
    if denom.abs() < 1e-12 {
        let same = table.len() == rows.len() && table.len() == cols.len();
        return Ok(if same { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / denom)
}

/// Returns `(nonsingleton, singleton)` cluster counts.
pub fn count_clusters<T: Eq + Hash>(labels: &[T]) -> (usize, usize) {
    let mut sizes: HashMap<&T, usize> = HashMap::new();
    for l in labels {
        *sizes.entry(l).or_default() += 1;
    }
    let singletons = sizes.values().filter(|&&s| s == 1).count();
    (sizes.len() - singletons, singletons)
}

/// Bell numbers via the Bell triangle.
pub fn bell_number(n: usize) -> u64 {
    let mut row = vec![1u64];
    for _ in 0..n {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(*row.last().unwrap());
        for &v in &row {
            let last = *next.last().unwrap();
            next.push(last + v);
        }
        row = next;
    }
    row[0]
}

/// Iterator over all set partitions of `n` items as restricted growth
/// strings, starting with the single block and ending with all singletons.
#[derive(Debug, Clone)]
pub struct Partitions {
    current: Option<Vec<usize>>,
    // prefix maxima: max[i] = max(labels[0..=i])
    max: Vec<usize>,
}

impl Iterator for Partitions {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        let labels = self.current.as_mut()?;
        let out = Partition::from_labels(labels.clone()).expect("restricted growth string");
        let n = labels.len();
        let mut advanced = false;
        for i in (1..n).rev() {
            if labels[i] <= self.max[i - 1] {
                labels[i] += 1;
                self.max[i] = self.max[i - 1].max(labels[i]);
                for j in i + 1..n {
                    labels[j] = 0;
                    self.max[j] = self.max[i];
                }
                advanced = true;
                break;
            }
        }
        if !advanced {
            self.current = None;
        }
        Some(out)
    }
}

pub fn enumerate_partitions(n: usize) -> Result<Partitions> {
    if n == 0 || n > MAX_ENUMERATION {
        return Err(Error::InvalidParameter(format!(
            "enumeration supports 1..={MAX_ENUMERATION} items, got {n}"
        )));
    }
    Ok(Partitions { current: Some(vec![0; n]), max: vec![0; n] })
}

/// Exact posterior over all partitions of `n` items, proportional to the
/// Dirichlet-process prior times `exp(sum of block_log_weight(block))`.
/// Blocks are passed as sorted item lists.
pub fn exact_partition_posterior<F>(n: usize, alpha: f64, block_log_weight: F) -> Result<Vec<(Partition, f64)>>
where
    F: Fn(&[usize]) -> f64,
{
    if n > MAX_EXACT_POSTERIOR {
        return Err(Error::InvalidParameter(format!(
            "exact posterior supports at most {MAX_EXACT_POSTERIOR} items, got {n}"
        )));
    }
    let mut table: Vec<(Partition, f64)> = enumerate_partitions(n)?
        .map(|p| {
            let lw: f64 = p.members().iter().map(|b| block_log_weight(b)).sum();
            let lp = partition_log_prior(&p, alpha) + lw;
            (p, lp)
        })
        .collect();
    let max = table.iter().map(|(_, l)| *l).fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Numeric("posterior has no finite mass".into()));
    }
    let total: f64 = table.iter().map(|(_, l)| (l - max).exp()).sum();
    for (_, l) in table.iter_mut() {
        *l = (*l - max).exp() / total;
    }
    Ok(table)
}

/// Total-variation distance between two distributions on the same support.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}
