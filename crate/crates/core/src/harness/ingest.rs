//! CSV ingestion and export.
//!
//! Two layouts are accepted. Arm data has an `arm` column with labels
//! `1..Q`, outcome columns `y` or `y1, y2, ...`, optional covariates
//! `x1, x2, ...` and an optional integer `cluster` column. Instrument data
//! has columns `z` (0 or 1), `d` and `y`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::designs::Assignment;
use crate::error::{Error, Result};
use crate::estimators::ObservedData;
use crate::ivconf::IVData;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    /// `arm,y[,x1..xk][,cluster]`.
    Arms,
    /// `z,d,y`.
    Instrument,
    /// Instrument when the header has `z` and `d`, arms otherwise.
    Detect,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Ingested {
    Observed(ObservedData),
    Instrument(IVData),
}

impl Ingested {
    pub fn into_observed(self) -> Result<ObservedData> {
        match self {
            Ingested::Observed(d) => Ok(d),
            Ingested::Instrument(_) => Err(Error::InvalidInput(
                "expected arm,y columns, found instrument data".into(),
            )),
        }
    }

    pub fn into_instrument(self) -> Result<IVData> {
        match self {
            Ingested::Instrument(d) => Ok(d),
            Ingested::Observed(_) => Err(Error::InvalidInput(
                "expected z,d,y columns, found arm data".into(),
            )),
        }
    }
}

struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        if headers.iter().all(|h| h.is_empty()) {
            return Err(Error::InvalidInput("csv header row is missing".into()));
        }
        let rows = rdr
            .records()
            .map(|r| Ok(r?.iter().map(str::to_owned).collect()))
            .collect::<Result<Vec<Vec<String>>>>()?;
        if rows.is_empty() {
            return Err(Error::InvalidInput("csv has no data rows".into()));
        }
        Ok(Self { headers, rows })
    }

    fn index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.index(name).ok_or_else(|| Error::MissingColumn(name.into()))
    }

    /// Numbered columns `prefix1, prefix2, ...` in numeric order.
    fn numbered(&self, prefix: &str) -> Vec<usize> {
        let mut found: Vec<(usize, usize)> = self
            .headers
            .iter()
            .enumerate()
            .filter_map(|(c, h)| {
                h.strip_prefix(prefix)
                    .and_then(|rest| rest.parse::<usize>().ok())
                    .map(|k| (k, c))
            })
            .collect();
        found.sort_unstable();
        found.into_iter().map(|(_, c)| c).collect()
    }

    /// Row numbers in errors count the header as row 1.
    fn number(&self, row: usize, col: usize) -> Result<f64> {
        let cell = self.rows[row].get(col).map(String::as_str).unwrap_or("");
        match cell.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(Error::NonNumeric {
                row: row + 2,
                column: self.headers[col].clone(),
                value: cell.into(),
            }),
        }
    }

    fn integer(&self, row: usize, col: usize) -> Result<i64> {
        let v = self.number(row, col)?;
        if v.fract() != 0.0 || v.abs() > 2f64.powi(53) {
            return Err(Error::NonNumeric {
                row: row + 2,
                column: self.headers[col].clone(),
                value: self.rows[row][col].clone(),
            });
        }
        Ok(v as i64)
    }

    fn matrix(&self, cols: &[usize]) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(self.rows.len(), cols.len());
        for i in 0..self.rows.len() {
            for (k, &c) in cols.iter().enumerate() {
                m[(i, k)] = self.number(i, c)?;
            }
        }
        Ok(m)
    }
}

pub fn ingest_csv(path: &Path, schema: Schema) -> Result<Ingested> {
    ingest_reader(std::fs::File::open(path)?, schema)
}

pub fn ingest_reader<R: Read>(reader: R, schema: Schema) -> Result<Ingested> {
    let table = Table::read(reader)?;
    let schema = match schema {
        Schema::Detect if table.index("z").is_some() && table.index("d").is_some() => Schema::Instrument,
        Schema::Detect => Schema::Arms,
        s => s,
    };
    match schema {
        Schema::Instrument => ingest_instrument(&table).map(Ingested::Instrument),
        _ => ingest_arms(&table).map(Ingested::Observed),
    }
}

fn ingest_arms(table: &Table) -> Result<ObservedData> {
    let arm_col = table.require("arm")?;
    let y_cols = match table.index("y") {
        Some(c) => vec![c],
        None => {
            let cols = table.numbered("y");
            if cols.is_empty() {
                return Err(Error::MissingColumn("y".into()));
            }
            cols
        }
    };
    let labels = (0..table.rows.len())
        .map(|i| table.integer(i, arm_col))
        .collect::<Result<Vec<_>>>()?;
    let assignment = Assignment::from_one_based(&labels)?;
    let y = table.matrix(&y_cols)?;
    let x_cols = table.numbered("x");
    let x = if x_cols.is_empty() {
        None
    } else {
        Some(table.matrix(&x_cols)?)
    };
    let clusters = match table.index("cluster") {
        Some(c) => {
            let raw = (0..table.rows.len())
                .map(|i| table.integer(i, c))
                .collect::<Result<Vec<_>>>()?;
            let ids: BTreeMap<i64, usize> = raw
                .iter()
                .copied()
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .enumerate()
                .map(|(k, v)| (v, k))
                .collect();
            Some(raw.iter().map(|v| ids[v]).collect())
        }
        None => None,
    };
    ObservedData::new(assignment, y, x, clusters)
}

fn ingest_instrument(table: &Table) -> Result<IVData> {
    let (zc, dc, yc) = (table.require("z")?, table.require("d")?, table.require("y")?);
    let n = table.rows.len();
    let z = (0..n)
        .map(|i| match table.integer(i, zc)? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(Error::InvalidInput(format!("row {}: z must be 0 or 1, got {v}", i + 2))),
        })
        .collect::<Result<Vec<_>>>()?;
    let d = (0..n).map(|i| table.number(i, dc)).collect::<Result<Vec<_>>>()?;
    let y = (0..n).map(|i| table.number(i, yc)).collect::<Result<Vec<_>>>()?;
    IVData::new(z, d, y)
}

/// Write arm data in the layout [`ingest_csv`] reads. Floats use the
/// shortest representation that parses back to the same bits.
pub fn export_csv(data: &ObservedData, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    export_writer(data, file)
}

pub fn export_writer<W: Write>(data: &ObservedData, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let p = data.dim();
    let kx = data.x().map(|x| x.ncols()).unwrap_or(0);
    let mut header = vec!["arm".to_owned()];
    if p == 1 {
        header.push("y".into());
    } else {
        header.extend((1..=p).map(|k| format!("y{k}")));
    }
    header.extend((1..=kx).map(|k| format!("x{k}")));
    if data.clusters().is_some() {
        header.push("cluster".into());
    }
    w.write_record(&header)?;
    let labels = data.assignment().one_based();
    for i in 0..data.n_units() {
        let mut row = vec![labels[i].to_string()];
        row.extend((0..p).map(|k| data.y()[(i, k)].to_string()));
        if let Some(x) = data.x() {
            row.extend((0..kx).map(|k| x[(i, k)].to_string()));
        }
        if let Some(c) = data.clusters() {
            row.push((c[i] + 1).to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Write instrument data as `z,d,y`.
pub fn export_instrument<W: Write>(data: &IVData, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["z", "d", "y"])?;
    for i in 0..data.n_units() {
        w.write_record([
            u8::from(data.z()[i]).to_string(),
            data.d()[i].to_string(),
            data.y()[i].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Ingested> {
        ingest_reader(text.as_bytes(), Schema::Detect)
    }

    #[test]
    fn minimal_two_row_file() {
        let d = parse("arm,y\n1,3.5\n2,1\n").unwrap().into_observed().unwrap();
        assert_eq!(d.n_units(), 2);
        assert_eq!(d.arm_sizes(), vec![1, 1]);
        assert_eq!(d.y_scalar(), &[3.5, 1.0]);
    }

    #[test]
    fn arm_label_zero_rejected() {
        assert!(parse("arm,y\n0,1\n1,2\n").is_err());
    }

    #[test]
    fn empty_arm_rejected() {
        assert!(parse("arm,y\n1,1\n3,2\n").is_err());
    }

    #[test]
    fn missing_and_bad_cells() {
        assert!(matches!(parse("arm,x1\n1,1\n2,2\n"), Err(Error::MissingColumn(c)) if c == "y"));
        match parse("arm,y\n1,1\n2,abc\n") {
            Err(Error::NonNumeric { row, column, value }) => {
                assert_eq!((row, column.as_str(), value.as_str()), (3, "y", "abc"));
            }
            other => panic!("{other:?}"),
        }
        assert!(parse("arm,y\n1.5,1\n2,2\n").is_err());
        assert!(parse("z,d,y\n2,1,1\n0,0,0\n").is_err());
    }

    #[test]
    fn covariates_clusters_and_round_trip() {
        let text = "arm,y,x2,x1,cluster\n1,0.1,1,5,10\n2,0.2,2,6,10\n1,0.30000000000000004,3,7,20\n2,1e-300,4,8,30\n";
        let d = parse(text).unwrap().into_observed().unwrap();
        let x = d.x().unwrap();
        // x1 comes first and is centered
        assert_eq!(x[(0, 0)], -1.5);
        assert_eq!(x[(0, 1)], -1.5);
        assert_eq!(d.clusters().unwrap(), &[0, 0, 1, 2]);
        let mut buf = Vec::new();
        export_writer(&d, &mut buf).unwrap();
        let back = ingest_reader(buf.as_slice(), Schema::Arms).unwrap().into_observed().unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn instrument_round_trip() {
        let d = parse("z,d,y\n1,1,2.5\n0,0,1\n1,0,0.1\n0,1,3\n").unwrap().into_instrument().unwrap();
        assert_eq!(d.n_treated(), 2);
        let mut buf = Vec::new();
        export_instrument(&d, &mut buf).unwrap();
        let back = ingest_reader(buf.as_slice(), Schema::Instrument).unwrap().into_instrument().unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn multi_outcome_columns() {
        let d = parse("arm,y2,y1\n1,1,2\n2,3,4\n1,5,6\n2,7,8\n").unwrap().into_observed().unwrap();
        assert_eq!(d.dim(), 2);
        assert_eq!(d.y()[(0, 0)], 2.0);
    }
}
