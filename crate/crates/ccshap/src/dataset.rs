//! Columnar datasets: one f64 column per node, equal-length columns, an
//! optional per-row intervention indicator, and CSV I/O.
//!
//! The CSV layout is a header row of node names plus an optional `INT`
//! column holding the name of the intervened node for each row (empty
//! string = observational row).

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Name of the intervention-indicator CSV column.
pub const INTERVENTION_COLUMN: &str = "INT";

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    index: HashMap<String, usize>,
    columns: Vec<Vec<f64>>,
    interventions: Option<Vec<String>>,
}

impl Dataset {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let mut index = HashMap::new();
        let mut owned = Vec::with_capacity(names.len());
        for n in names {
            let n = n.as_ref();
            if n == INTERVENTION_COLUMN {
                return Err(Error::InvalidArgument(format!(
                    "`{INTERVENTION_COLUMN}` is reserved for the intervention indicator"
                )));
            }
            if index.insert(n.to_string(), owned.len()).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate column `{n}`")));
            }
            owned.push(n.to_string());
        }
        Ok(Dataset {
            columns: vec![Vec::new(); owned.len()],
            names: owned,
            index,
            interventions: None,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.len())
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        let i = self
            .index
            .get(name)
            .ok_or_else(|| Error::UnknownNode(name.to_string()))?;
        Ok(&self.columns[*i])
    }

    pub fn value(&self, row: usize, name: &str) -> Result<f64> {
        Ok(self.column(name)?[row])
    }

    /// Values of the given columns at one row, in the given order.
    pub fn values<S: AsRef<str>>(&self, row: usize, names: &[S]) -> Result<Vec<f64>> {
        names.iter().map(|n| self.value(row, n.as_ref())).collect()
    }

    pub fn push_row(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.names.len() {
            return Err(Error::InvalidArgument(format!(
                "row has {} values, dataset has {} columns",
                values.len(),
                self.names.len()
            )));
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "non-finite value in column `{}`",
                    self.names[i]
                )));
            }
            self.columns[i].push(v);
        }
        if let Some(ints) = &mut self.interventions {
            ints.push(String::new());
        }
        Ok(())
    }

    pub fn push_row_intervened(&mut self, values: &[f64], intervened: &str) -> Result<()> {
        self.push_row(values)?;
        let n = self.n_rows();
        let ints = self
            .interventions
            .get_or_insert_with(|| vec![String::new(); n - 1]);
        // push_row above already appended an empty marker if the column existed
        if ints.len() == n {
            ints[n - 1] = intervened.to_string();
        } else {
            ints.push(intervened.to_string());
        }
        Ok(())
    }

    /// Name of the node intervened on in this row, if any.
    pub fn intervention(&self, row: usize) -> Option<&str> {
        self.interventions
            .as_ref()
            .map(|v| v[row].as_str())
            .filter(|s| !s.is_empty())
    }

    pub fn has_interventions(&self) -> bool {
        self.interventions
            .as_ref()
            .is_some_and(|v| v.iter().any(|s| !s.is_empty()))
    }

    /// New dataset with the same schema and the selected rows.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let mut d = Dataset {
            names: self.names.clone(),
            index: self.index.clone(),
            columns: vec![Vec::with_capacity(rows.len()); self.columns.len()],
            interventions: self.interventions.as_ref().map(|_| Vec::with_capacity(rows.len())),
        };
        for &r in rows {
            for (c, col) in self.columns.iter().enumerate() {
                d.columns[c].push(col[r]);
            }
            if let (Some(dst), Some(src)) = (&mut d.interventions, &self.interventions) {
                dst.push(src[r].clone());
            }
        }
        d
    }

    pub fn head(&self, n: usize) -> Dataset {
        let rows: Vec<usize> = (0..n.min(self.n_rows())).collect();
        self.select_rows(&rows)
    }

    /// Rows not flagged as intervened on `node`.
    pub fn rows_not_intervened_on(&self, node: &str) -> Vec<usize> {
        (0..self.n_rows())
            .filter(|&r| self.intervention(r) != Some(node))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header: Vec<&str> = self.names.iter().map(|s| s.as_str()).collect();
        if self.interventions.is_some() {
            header.push(INTERVENTION_COLUMN);
        }
        wtr.write_record(&header)?;
        for r in 0..self.n_rows() {
            let mut rec: Vec<String> = self.columns.iter().map(|c| format!("{}", c[r])).collect();
            if let Some(ints) = &self.interventions {
                rec.push(ints[r].clone());
            }
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header: Vec<String> = rdr
            .headers()?
            .iter()
            .map(|s| s.trim().to_string())
            .collect();
        let int_col = header.iter().position(|h| h == INTERVENTION_COLUMN);
        let value_cols: Vec<(usize, &String)> = header
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != int_col)
            .collect();
        let mut d = Dataset::new(&value_cols.iter().map(|(_, n)| n.as_str()).collect::<Vec<_>>())?;
        if int_col.is_some() {
            d.interventions = Some(Vec::new());
        }
        for (rownum, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let mut values = Vec::with_capacity(value_cols.len());
            for &(i, name) in &value_cols {
                let field = rec.get(i).unwrap_or("").trim();
                let v: f64 = field.parse().map_err(|_| {
                    Error::Parse(format!(
                        "row {}: column `{name}`: cannot parse `{field}` as a number",
                        rownum + 1
                    ))
                })?;
                values.push(v);
            }
            match int_col {
                Some(i) => {
                    d.push_row_intervened(&values, rec.get(i).unwrap_or("").trim())?;
                }
                None => d.push_row(&values)?,
            }
        }
        Ok(d)
    }

    pub fn load_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Sample mean of a slice; 0.0 for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Pearson correlation of two equal-length slices; 0.0 when degenerate.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let (mx, my) = (mean(xs), mean(ys));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let (dx, dy) = (xs[i] - mx, ys[i] - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_with_interventions() {
        let mut d = Dataset::new(&["A", "B"]).unwrap();
        d.push_row(&[1.0, 2.5]).unwrap();
        d.push_row_intervened(&[3.0, -4.0], "A").unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.column("A").unwrap(), &[1.0, 3.0]);
        assert_eq!(back.intervention(0), None);
        assert_eq!(back.intervention(1), Some("A"));
    }

    #[test]
    fn rejects_non_finite() {
        let mut d = Dataset::new(&["A"]).unwrap();
        assert!(d.push_row(&[f64::NAN]).is_err());
    }

    #[test]
    fn pearson_on_exact_line() {
        let xs = [1.0, 2.0, 3.0];
        let ys = [2.0, 4.0, 6.0];
        assert!((pearson(&xs, &ys) - 1.0).abs() < 1e-12);
    }
}
