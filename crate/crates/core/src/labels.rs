//! `item,cluster` label files, as written for simulated truth and read
//! back by evaluation. Extra columns are ignored; clusters are 1-based.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labeling {
    pub items: Vec<String>,
    pub clusters: Vec<usize>,
}

impl Labeling {
    /// Builds a labeling from 0-based cluster indices.
    pub fn from_zero_based(items: Vec<String>, labels: &[usize]) -> Result<Self> {
        if items.len() != labels.len() {
            return Err(Error::Dimension(format!("{} items but {} labels", items.len(), labels.len())));
        }
        Ok(Self { items, clusters: labels.iter().map(|l| l + 1).collect() })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn from_csv_reader<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::Parse { row: 1, msg: format!("missing column '{name}'") })
        };
        let (ci, cc) = (col("item")?, col("cluster")?);
        let mut items = Vec::new();
        let mut clusters = Vec::new();
        for (n, rec) in rdr.records().enumerate() {
            let row = n + 2;
            let rec = rec?;
            let item = rec.get(ci).unwrap_or("").trim().to_string();
            let cluster: usize = rec
                .get(cc)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|e| Error::Parse { row, msg: format!("cluster: {e}") })?;
            if cluster == 0 {
                return Err(Error::Parse { row, msg: "clusters are 1-based".into() });
            }
            if items.contains(&item) {
                return Err(Error::Parse { row, msg: format!("duplicate item '{item}'") });
            }
            items.push(item);
            clusters.push(cluster);
        }
        Ok(Self { items, clusters })
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        self.to_csv_writer(std::fs::File::create(path)?)
    }

    pub fn to_csv_writer<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["item", "cluster"])?;
        for (item, c) in self.items.iter().zip(&self.clusters) {
            w.write_record([item.clone(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Clusters of `other` reordered to follow this labeling's items.
    pub fn aligned(&self, other: &Labeling) -> Result<Vec<usize>> {
        if self.len() != other.len() {
            return Err(Error::Dimension(format!("{} labeled items versus {}", self.len(), other.len())));
        }
        let index: std::collections::HashMap<&str, usize> =
            other.items.iter().zip(&other.clusters).map(|(i, c)| (i.as_str(), *c)).collect();
        self.items
            .iter()
            .map(|i| index.get(i.as_str()).copied().ok_or_else(|| Error::InvalidData(format!("item '{i}' has no label"))))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_extra_columns() {
        let l = Labeling::from_zero_based(vec!["a".into(), "b".into()], &[1, 0]).unwrap();
        let mut buf = Vec::new();
        l.to_csv_writer(&mut buf).unwrap();
        assert_eq!(Labeling::from_csv_reader(buf.as_slice()).unwrap(), l);
        let wide = "item,cluster,probability\nb,3,0.5\na,1,0.9\n";
        let w = Labeling::from_csv_reader(wide.as_bytes()).unwrap();
        assert_eq!(l.aligned(&w).unwrap(), vec![1, 3]);
    }

    #[test]
    fn bad_rows() {
        assert!(matches!(
            Labeling::from_csv_reader("item,cluster\na,0\n".as_bytes()),
            Err(Error::Parse { row: 2, .. })
        ));
        assert!(Labeling::from_csv_reader("item,cluster\na,1\na,2\n".as_bytes()).is_err());
        assert!(Labeling::from_csv_reader("item\na\n".as_bytes()).is_err());
    }
}
