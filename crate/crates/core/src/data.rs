//! Replicated time-course measurements and their CSV form.
//!
//! Each item's measurements are stored as one flattened vector of length
//! `J * R`, ordered time-major with replicates varying fastest:
//! `(t1, r1), (t1, r2), ..., (t1, rR), (t2, r1), ...`. Every routine in the
//! crate that indexes an item vector relies on this order.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The 18 unevenly spaced sampling times (minutes) of the Notch time course.
pub const NOTCH_TIMES: [f64; 18] = [
    0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0,
    110.0, 120.0, 150.0,
];

/// Strictly increasing sampling times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidGrid("at least one time point is required".into()));
        }
        if let Some(t) = times.iter().find(|t| !t.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite time {t}")));
        }
        for w in times.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidGrid(format!(
                    "times must be strictly increasing ({} followed by {})",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self { times })
    }

    pub fn notch() -> Self {
        Self { times: NOTCH_TIMES.to_vec() }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Gaps between consecutive times; length `J - 1`.
    pub fn steps(&self) -> impl Iterator<Item = f64> + '_ {
        self.times.windows(2).map(|w| w[1] - w[0])
    }
}

impl TryFrom<Vec<f64>> for TimeGrid {
    type Error = Error;

    fn try_from(times: Vec<f64>) -> Result<Self> {
        TimeGrid::new(times)
    }
}

impl From<TimeGrid> for Vec<f64> {
    fn from(grid: TimeGrid) -> Self {
        grid.times
    }
}

/// A fully observed `N x J x R` measurement tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    items: Vec<String>,
    replicates: Vec<String>,
    grid: TimeGrid,
    values: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset from item-major flattened values (see module docs for
    /// the per-item order).
    pub fn new(
        items: Vec<String>,
        replicates: Vec<String>,
        grid: TimeGrid,
        values: Vec<f64>,
    ) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::InvalidData("dataset has no items".into()));
        }
        if replicates.is_empty() {
            return Err(Error::InvalidData("dataset has no replicates".into()));
        }
        let expected = items.len() * grid.len() * replicates.len();
        if values.len() != expected {
            return Err(Error::Dimension(format!(
                "expected {expected} values for {} items x {} times x {} replicates, got {}",
                items.len(),
                grid.len(),
                replicates.len(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("non-finite measurement {v}")));
        }
        Ok(Self { items, replicates, grid, values })
    }

    /// Builds a dataset with generated identifiers (`item1..`, replicates `1..R`).
    pub fn from_values(grid: TimeGrid, n_replicates: usize, values: Vec<f64>) -> Result<Self> {
        let stride = grid.len() * n_replicates.max(1);
        let n = values.len() / stride;
        let items = (1..=n).map(|i| format!("item{i}")).collect();
        let reps = (1..=n_replicates).map(|r| r.to_string()).collect();
        Self::new(items, reps, grid, values)
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_times(&self) -> usize {
        self.grid.len()
    }

    pub fn n_replicates(&self) -> usize {
        self.replicates.len()
    }

    /// Length of one flattened item vector, `J * R`.
    pub fn item_len(&self) -> usize {
        self.n_times() * self.n_replicates()
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn replicates(&self) -> &[String] {
        &self.replicates
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The flattened vector of item `i`.
    pub fn item(&self, i: usize) -> &[f64] {
        let len = self.item_len();
        &self.values[i * len..(i + 1) * len]
    }

    pub fn value(&self, item: usize, time: usize, replicate: usize) -> f64 {
        self.item(item)[time * self.n_replicates() + replicate]
    }

    /// Unbiased variance of all measurements pooled together.
    pub fn pooled_variance(&self) -> f64 {
        let n = self.values.len() as f64;
        if n < 2.0 {
            return 0.0;
        }
        let mean = self.values.iter().sum::<f64>() / n;
        self.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    }

    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file)
    }

    /// Parses long-format CSV with columns `item,replicate,time,value` (any
    /// column order, header required). Every (item, time, replicate) cell must
    /// appear exactly once. Row numbers in errors count the header as row 1.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| -> Result<usize> {
            headers
                .iter()
                .position(|h| h.eq_ignore_ascii_case(name))
                .ok_or_else(|| Error::Parse { row: 1, msg: format!("missing column `{name}`") })
        };
        let (ci, cr, ct, cv) = (col("item")?, col("replicate")?, col("time")?, col("value")?);

        let mut items: Vec<String> = Vec::new();
        let mut item_idx: HashMap<String, usize> = HashMap::new();
        let mut reps: Vec<String> = Vec::new();
        let mut rep_idx: HashMap<String, usize> = HashMap::new();
        let mut times: Vec<f64> = Vec::new();
        let mut time_idx: HashMap<u64, usize> = HashMap::new();
        let mut cells: HashMap<(usize, usize, usize), (f64, usize)> = HashMap::new();

        for (k, record) in rdr.records().enumerate() {
            let row = k + 2;
            let record = record?;
            let field = |c: usize| record.get(c).unwrap_or("");
            let item = field(ci).to_string();
            if item.is_empty() {
                return Err(Error::Parse { row, msg: "empty item identifier".into() });
            }
            let rep = field(cr).to_string();
            if rep.is_empty() {
                return Err(Error::Parse { row, msg: "empty replicate identifier".into() });
            }
            let time: f64 = field(ct)
                .parse()
                .map_err(|_| Error::Parse { row, msg: format!("bad time `{}`", field(ct)) })?;
            let value: f64 = field(cv)
                .parse()
                .map_err(|_| Error::Parse { row, msg: format!("bad value `{}`", field(cv)) })?;
            if !time.is_finite() || !value.is_finite() {
                return Err(Error::Parse { row, msg: "non-finite time or value".into() });
            }
            let i = *item_idx.entry(item.clone()).or_insert_with(|| {
                items.push(item);
                items.len() - 1
            });
            let r = *rep_idx.entry(rep.clone()).or_insert_with(|| {
                reps.push(rep);
                reps.len() - 1
            });
            // -0.0 and 0.0 are the same time point
            let key = if time == 0.0 { 0.0f64.to_bits() } else { time.to_bits() };
            let t = *time_idx.entry(key).or_insert_with(|| {
                times.push(time);
                times.len() - 1
            });
            if let Some((_, first)) = cells.insert((i, t, r), (value, row)) {
                return Err(Error::Parse {
                    row,
                    msg: format!(
                        "duplicate cell (item `{}`, time {}, replicate `{}`), first seen at row {first}",
                        items[i], time, reps[r]
                    ),
                });
            }
        }
        if items.is_empty() {
            return Err(Error::InvalidData("no data rows".into()));
        }

        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
        let mut rank = vec![0; times.len()];
        for (pos, &t) in order.iter().enumerate() {
            rank[t] = pos;
        }
        let sorted_times: Vec<f64> = order.iter().map(|&t| times[t]).collect();

        let (n, j, r) = (items.len(), sorted_times.len(), reps.len());
        if cells.len() != n * j * r {
            // report the first missing cell in a stable order
            for ii in 0..n {
                for (tt, time) in order.iter().map(|&t| (t, times[t])) {
                    for rr in 0..r {
                        if !cells.contains_key(&(ii, tt, rr)) {
                            return Err(Error::InvalidData(format!(
                                "missing cell (item `{}`, time {}, replicate `{}`)",
                                items[ii], time, reps[rr]
                            )));
                        }
                    }
                }
            }
        }
        // replicates sort numerically when every id is a number
        let mut rep_order: Vec<usize> = (0..r).collect();
        let numeric: Option<Vec<f64>> = reps.iter().map(|s| s.parse::<f64>().ok()).collect();
        match &numeric {
            Some(x) => rep_order.sort_by(|&a, &b| x[a].total_cmp(&x[b])),
            None => rep_order.sort_by(|&a, &b| reps[a].cmp(&reps[b])),
        }
        let mut rep_rank = vec![0; r];
        for (pos, &q) in rep_order.iter().enumerate() {
            rep_rank[q] = pos;
        }
        let sorted_reps: Vec<String> = rep_order.iter().map(|&q| reps[q].clone()).collect();
        let mut values = vec![0.0; n * j * r];
        for ((ii, tt, rr), (v, _)) in cells {
            values[(ii * j + rank[tt]) * r + rep_rank[rr]] = v;
        }
        Self::new(items, sorted_reps, TimeGrid::new(sorted_times)?, values)
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.to_csv_writer(file)
    }

    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["item", "replicate", "time", "value"])?;
        for (i, item) in self.items.iter().enumerate() {
            for (j, t) in self.grid.times().iter().enumerate() {
                for (r, rep) in self.replicates.iter().enumerate() {
                    w.write_record([
                        item.as_str(),
                        rep.as_str(),
                        &t.to_string(),
                        &self.value(i, j, r).to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}
