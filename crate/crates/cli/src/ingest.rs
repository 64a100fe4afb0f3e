//! CSV ingestion.
//!
//! The first row is the header. Every column is numeric unless declared
//! categorical; categorical columns are expanded in place into indicator
//! columns, one per level in lexicographic order with the smallest level
//! dropped as the reference (keeping the full set would duplicate the
//! intercept of any model with one). Encoded indicator columns are named
//! `column=level`. Column order is fully determined by the header and the
//! level sets, never by insertion order, so two loads of the same file
//! produce byte-identical layouts.
//!
//! Each original predictor column becomes one named feature group covering
//! its encoded columns, so a one-hot block moves as a single player in
//! attributions.

use std::collections::BTreeSet;
use std::io::Read;
use std::path::Path;

use rashomon_core::forest::{FeatureGroup, FeatureGroups};
use rashomon_core::Matrix;

use crate::error::{CliError, ErrorKind, Result};

/// An encoded table: predictors, target, and the grouping that remembers
/// which encoded columns came from the same original column.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<f64>,
    /// Encoded predictor names, `column=level` for indicator columns.
    pub column_names: Vec<String>,
    /// True for columns produced by one-hot expansion, which only ever hold
    /// 0 or 1 and so never get a flexible basis.
    pub indicator: Vec<bool>,
    /// One group per original predictor column, in header order.
    pub groups: FeatureGroups,
    pub target: String,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.x.rows()
    }

    /// Sub-dataset on the given row indices (order preserved).
    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            column_names: self.column_names.clone(),
            indicator: self.indicator.clone(),
            groups: self.groups.clone(),
            target: self.target.clone(),
        }
    }

    /// Re-emits the encoded table (predictors then target). Loading the
    /// result back with no categorical declarations reproduces `x` and `y`
    /// exactly, because floats are printed in shortest round-trip form.
    #[cfg(test)]
    pub fn to_csv_string(&self) -> String {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<&str> = self.column_names.iter().map(String::as_str).collect();
        header.push(&self.target);
        wtr.write_record(&header).expect("in-memory write");
        for i in 0..self.x.rows() {
            let mut rec: Vec<String> =
                self.x.row(i).iter().map(|v| format!("{v}")).collect();
            rec.push(format!("{}", self.y[i]));
            wtr.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("utf8 csv")
    }
}

/// Loads and encodes a CSV file.
pub fn load_csv(path: &Path, target: &str, categorical: &[String]) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    parse_csv(file, target, categorical)
}

/// [`load_csv`] over any reader; the seam the unit tests use.
pub fn parse_csv(reader: impl Read, target: &str, categorical: &[String]) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::config(format!("cannot read CSV header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let target_idx = headers.iter().position(|h| h == target).ok_or(CliError {
        kind: ErrorKind::MissingTarget {
            target: target.to_string(),
        },
        message: format!("target column '{target}' is not in the CSV header"),
    })?;
    for c in categorical {
        if c == target {
            return Err(CliError::config(format!(
                "target column '{c}' cannot be categorical"
            )));
        }
        if !headers.contains(c) {
            return Err(CliError::config(format!(
                "declared categorical column '{c}' is not in the CSV header"
            )));
        }
    }

    // First pass: collect raw records, locating structural errors by row.
    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1; // 1-based data row, header not counted
        let rec = rec.map_err(|e| CliError {
            kind: ErrorKind::ParseError {
                row,
                column: headers.first().cloned().unwrap_or_default(),
            },
            message: format!("data row {row}: {e}"),
        })?;
        if rec.len() != headers.len() {
            return Err(CliError {
                kind: ErrorKind::ParseError {
                    row,
                    column: headers.first().cloned().unwrap_or_default(),
                },
                message: format!(
                    "data row {row}: expected {} fields, found {}",
                    headers.len(),
                    rec.len()
                ),
            });
        }
        records.push(rec);
    }
    if records.is_empty() {
        return Err(CliError::config("CSV contains no data rows"));
    }

    // Level sets per categorical column, sorted by BTreeSet iteration.
    let is_cat: Vec<bool> = headers.iter().map(|h| categorical.contains(h)).collect();
    let mut levels: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
    for (j, header) in headers.iter().enumerate() {
        if !is_cat[j] {
            continue;
        }
        let distinct: BTreeSet<&str> = records.iter().map(|r| &r[j]).collect();
        if distinct.len() < 2 {
            return Err(CliError::config(format!(
                "categorical column '{header}' has fewer than two levels"
            )));
        }
        levels[j] = distinct.into_iter().map(str::to_string).collect();
    }

    // Encoded layout: header order, categorical columns expanded in place.
    let mut column_names = Vec::new();
    let mut indicator = Vec::new();
    let mut groups = Vec::new();
    for (j, header) in headers.iter().enumerate() {
        if j == target_idx {
            continue;
        }
        let start = column_names.len();
        if is_cat[j] {
            for level in &levels[j][1..] {
                column_names.push(format!("{header}={level}"));
                indicator.push(true);
            }
        } else {
            column_names.push(header.clone());
            indicator.push(false);
        }
        groups.push(FeatureGroup {
            name: header.clone(),
            columns: (start..column_names.len()).collect(),
        });
    }

    let parse_cell = |row: usize, j: usize, raw: &str| -> Result<f64> {
        let err = |what: &str| CliError {
            kind: ErrorKind::NonNumericCell {
                row,
                column: headers[j].clone(),
            },
            message: format!("data row {row}, column {}: {what}", headers[j]),
        };
        let v: f64 = raw
            .parse()
            .map_err(|_| err(&format!("'{raw}' is not numeric")))?;
        if !v.is_finite() {
            return Err(err(&format!("'{raw}' is not finite")));
        }
        Ok(v)
    };

    let width = column_names.len();
    let mut x = Matrix::zeros(records.len(), width);
    let mut y = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        let row = i + 1;
        let out = x.row_mut(i);
        let mut c = 0;
        for j in 0..headers.len() {
            if j == target_idx {
                continue;
            }
            if is_cat[j] {
                let value = &rec[j];
                if !levels[j].iter().any(|l| l == value) {
                    unreachable!("levels were collected from the same records");
                }
                for level in &levels[j][1..] {
                    out[c] = if level == value { 1.0 } else { 0.0 };
                    c += 1;
                }
            } else {
                out[c] = parse_cell(row, j, &rec[j])?;
                c += 1;
            }
        }
        y.push(parse_cell(row, target_idx, &rec[target_idx])?);
    }

    Ok(Dataset {
        x,
        y,
        column_names,
        indicator,
        groups: FeatureGroups { groups },
        target: target.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = "\
size,color,price,weight
1.5,red,10.0,2.0
2.5,blue,20.0,3.0
3.5,green,15.0,4.0
4.5,blue,30.0,5.0
";

    fn toy(categorical: &[&str]) -> Result<Dataset> {
        let cats: Vec<String> = categorical.iter().map(|s| s.to_string()).collect();
        parse_csv(TOY.as_bytes(), "price", &cats)
    }

    #[test]
    fn one_hot_drops_the_reference_level_and_groups_the_block() {
        let ds = toy(&["color"]).unwrap();
        // Levels sort blue < green < red; blue is the reference.
        assert_eq!(
            ds.column_names,
            vec!["size", "color=green", "color=red", "weight"]
        );
        assert_eq!(ds.indicator, vec![false, true, true, false]);
        assert_eq!(ds.groups.len(), 3);
        assert_eq!(ds.groups.groups[1].name, "color");
        assert_eq!(ds.groups.groups[1].columns, vec![1, 2]);
        ds.groups.validate(ds.x.cols()).unwrap();
        // Row 0 is red: green indicator 0, red indicator 1.
        assert_eq!(ds.x.row(0), &[1.5, 0.0, 1.0, 2.0]);
        // Row 1 is the reference level blue: both indicators 0.
        assert_eq!(ds.x.row(1), &[2.5, 0.0, 0.0, 3.0]);
        assert_eq!(ds.y, vec![10.0, 20.0, 15.0, 30.0]);
    }

    #[test]
    fn missing_target_is_its_own_error() {
        let err = parse_csv(TOY.as_bytes(), "cost", &[]).unwrap_err();
        assert!(matches!(err.kind, ErrorKind::MissingTarget { .. }));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn non_numeric_cell_is_located_by_row_and_column() {
        let err = toy(&[]).unwrap_err();
        match err.kind {
            ErrorKind::NonNumericCell { row, ref column } => {
                assert_eq!(row, 1);
                assert_eq!(column, "color");
            }
            other => panic!("unexpected kind {other:?}"),
        }
    }

    #[test]
    fn short_row_is_a_parse_error_with_its_row_number() {
        let bad = "a,b,y\n1.0,2.0,3.0\n4.0,5.0\n";
        let err = parse_csv(bad.as_bytes(), "y", &[]).unwrap_err();
        match err.kind {
            ErrorKind::ParseError { row, .. } => assert_eq!(row, 2),
            other => panic!("unexpected kind {other:?}"),
        }
    }

    #[test]
    fn single_level_categorical_is_rejected() {
        let flat = "a,c,y\n1.0,only,2.0\n3.0,only,4.0\n";
        let err = parse_csv(flat.as_bytes(), "y", &["c".to_string()]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn level_order_does_not_depend_on_row_order() {
        let forward = toy(&["color"]).unwrap();
        let reversed = "\
size,color,price,weight
4.5,blue,30.0,5.0
3.5,green,15.0,4.0
2.5,blue,20.0,3.0
1.5,red,10.0,2.0
";
        let backward =
            parse_csv(reversed.as_bytes(), "price", &["color".to_string()]).unwrap();
        assert_eq!(forward.column_names, backward.column_names);
    }

    #[test]
    fn encoded_table_round_trips_exactly() {
        let ds = toy(&["color"]).unwrap();
        let emitted = ds.to_csv_string();
        let back = parse_csv(emitted.as_bytes(), "price", &[]).unwrap();
        assert_eq!(back.x.data(), ds.x.data());
        assert_eq!(back.y, ds.y);
        assert_eq!(back.column_names, ds.column_names);
    }

    #[test]
    fn select_keeps_row_order() {
        let ds = toy(&["color"]).unwrap();
        let sub = ds.select(&[2, 0]);
        assert_eq!(sub.x.row(0), ds.x.row(2));
        assert_eq!(sub.x.row(1), ds.x.row(0));
        assert_eq!(sub.y, vec![15.0, 10.0]);
    }
}
