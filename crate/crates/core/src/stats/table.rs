use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::spearman;
use crate::error::{Error, Result};

/// Column-major table of optional numeric cells.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    columns: BTreeMap<String, Vec<Option<f64>>>,
    rows: usize,
}

impl Table {
    pub fn new(rows: usize) -> Self {
        Table { columns: BTreeMap::new(), rows }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn insert(&mut self, name: impl Into<String>, values: Vec<Option<f64>>) -> Result<()> {
        let name = name.into();
        if values.len() != self.rows {
            return Err(Error::DimensionMismatch(format!(
                "column {name} has {} rows, table has {}",
                values.len(),
                self.rows
            )));
        }
        self.columns.insert(name, values);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Result<&[Option<f64>]> {
        self.columns
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    /// `None` where fewer than 3 rows pair up or either side is constant.
    pub values: Vec<Vec<Option<f64>>>,
    pub counts: Vec<Vec<usize>>,
}

/// Spearman correlation of every (feature, metric) pair over the rows
/// where both cells are present.
pub fn correlation_matrix(table: &Table, features: &[&str], metrics: &[&str]) -> Result<CorrelationMatrix> {
    let fcols = features.iter().map(|f| table.column(f)).collect::<Result<Vec<_>>>()?;
    let mcols = metrics.iter().map(|m| table.column(m)).collect::<Result<Vec<_>>>()?;
    let mut values = Vec::with_capacity(features.len());
    let mut counts = Vec::with_capacity(features.len());
    for f in &fcols {
        let mut vrow = Vec::with_capacity(metrics.len());
        let mut crow = Vec::with_capacity(metrics.len());
        for m in &mcols {
            let (x, y): (Vec<f64>, Vec<f64>) = f
                .iter()
                .zip(m.iter())
                .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
                .unzip();
            crow.push(x.len());
            vrow.push(spearman(&x, &y).ok());
        }
        values.push(vrow);
        counts.push(crow);
    }
    Ok(CorrelationMatrix {
        rows: features.iter().map(|s| s.to_string()).collect(),
        cols: metrics.iter().map(|s| s.to_string()).collect(),
        values,
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::tests::spearman_oracle;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn col(v: &[f64]) -> Vec<Option<f64>> {
        v.iter().map(|&x| Some(x)).collect()
    }

    #[test]
    fn shape_and_identity() {
        let mut t = Table::new(5);
        t.insert("a", col(&[1.0, 4.0, 2.0, 5.0, 3.0])).unwrap();
        t.insert("b", col(&[2.0, 2.0, 2.0, 2.0, 2.0])).unwrap();
        t.insert("m1", col(&[1.0, 4.0, 2.0, 5.0, 3.0])).unwrap();
        t.insert("m2", col(&[5.0, 4.0, 3.0, 2.0, 1.0])).unwrap();
        t.insert("m3", vec![Some(1.0), None, Some(3.0), Some(0.0), Some(2.0)]).unwrap();
        let c = correlation_matrix(&t, &["a", "b"], &["m1", "m2", "m3"]).unwrap();
        assert_eq!(c.values.len(), 2);
        assert!(c.values.iter().all(|r| r.len() == 3));
        assert_eq!(c.values[0][0], Some(1.0));
        assert_eq!(c.values[1], vec![None, None, None]);
        assert_eq!(c.counts[0], vec![5, 5, 4]);
        assert!(matches!(
            correlation_matrix(&t, &["a"], &["nope"]),
            Err(Error::UnknownColumn(n)) if n == "nope"
        ));
        assert!(t.insert("short", col(&[1.0])).is_err());
    }

    #[test]
    fn random_tables_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let n = rng.gen_range(3..=50);
            let mut t = Table::new(n);
            let names = ["f0", "f1", "m0", "m1", "m2"];
            for name in names {
                t.insert(name, (0..n).map(|_| Some(rng.gen_range(0..6) as f64)).collect()).unwrap();
            }
            let c = correlation_matrix(&t, &names[..2], &names[2..]).unwrap();
            for (i, f) in names[..2].iter().enumerate() {
                for (j, m) in names[2..].iter().enumerate() {
                    let x: Vec<f64> = t.column(f).unwrap().iter().map(|v| v.unwrap()).collect();
                    let y: Vec<f64> = t.column(m).unwrap().iter().map(|v| v.unwrap()).collect();
                    match c.values[i][j] {
                        Some(r) => assert!((r - spearman_oracle(&x, &y)).abs() <= 1e-12),
                        None => assert!(x.iter().all(|v| *v == x[0]) || y.iter().all(|v| *v == y[0])),
                    }
                }
            }
        }
    }
}
