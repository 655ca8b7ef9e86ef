//! CSV form of a [`Dataset`]: header `c1,...,cp[,label]`, missing cells as
//! `NA` (the empty string is also accepted on input).
//!
//! Observed values are written in Rust's shortest round-trip notation, so
//! reading a written file reproduces every observed cell bit for bit.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};

const MISSING: &str = "NA";

impl Dataset {
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let mut names: Vec<&str> = headers.iter().collect();
        let has_label = names.last() == Some(&"label");
        if has_label {
            names.pop();
        }
        for (j, name) in names.iter().enumerate() {
            if *name != format!("c{}", j + 1) {
                return Err(Error::Parse(format!(
                    "column {} is named {name:?}, expected \"c{}\"",
                    j + 1,
                    j + 1
                )));
            }
        }
        let p = names.len();
        let mut values = Vec::new();
        let mut mask = Vec::new();
        let mut labels = Vec::new();
        let mut n = 0;
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != p + usize::from(has_label) {
                return Err(Error::Parse(format!(
                    "data row {} has {} fields",
                    line + 1,
                    record.len()
                )));
            }
            for field in record.iter().take(p) {
                if field.is_empty() || field == MISSING {
                    values.push(f64::NAN);
                    mask.push(false);
                } else {
                    let v: f64 = field.parse().map_err(|_| {
                        Error::Parse(format!("data row {}: bad number {field:?}", line + 1))
                    })?;
                    values.push(v);
                    mask.push(true);
                }
            }
            if has_label {
                let field = &record[p];
                labels.push(field.parse::<usize>().map_err(|_| {
                    Error::Parse(format!("data row {}: bad label {field:?}", line + 1))
                })?);
            }
            n += 1;
        }
        Dataset::new(n, p, values, mask, has_label.then_some(labels))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.p()).map(|j| format!("c{j}")).collect();
        if self.labels().is_some() {
            header.push("label".into());
        }
        wtr.write_record(&header)?;
        let mut fields = Vec::with_capacity(header.len());
        for i in 0..self.n() {
            fields.clear();
            for j in 0..self.p() {
                fields.push(match self.get(i, j) {
                    Some(v) => v.to_string(),
                    None => MISSING.to_string(),
                });
            }
            if let Some(l) = self.labels() {
                fields.push(l[i].to_string());
            }
            wtr.write_record(&fields)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(File::open(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(File::create(path)?)
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reads_missing_markers_and_labels() {
        let text = "c1,c2,label\n1.5,NA,1\n,2,2\n3,4,1\n";
        let ds = Dataset::read_csv(text.as_bytes()).unwrap();
        assert_eq!((ds.n(), ds.p()), (3, 2));
        assert_eq!(ds.get(0, 1), None);
        assert_eq!(ds.get(1, 0), None);
        assert_eq!(ds.get(2, 1), Some(4.0));
        assert_eq!(ds.labels(), Some(&[1, 2, 1][..]));
    }

    #[test]
    fn rejects_bad_headers() {
        assert!(Dataset::read_csv("x,y\n1,2\n".as_bytes()).is_err());
        assert!(Dataset::read_csv("c1,c3\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn rejects_all_missing_row() {
        let err = Dataset::read_csv("c1,c2\nNA,NA\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::InvalidDataset(_)));
    }

    proptest! {
        #[test]
        fn observed_cells_round_trip_exactly(
            cells in proptest::collection::vec(
                (any::<f64>().prop_filter("finite", |v| v.is_finite()), any::<bool>()), 1..30)
        ) {
            let p = 3;
            let n = cells.len() / p;
            prop_assume!(n > 0);
            let mut values = Vec::new();
            let mut mask = Vec::new();
            for (i, (v, m)) in cells.iter().take(n * p).enumerate() {
                values.push(*v);
                mask.push(*m || i % p == 0);
            }
            let labels: Vec<usize> = (0..n).map(|i| i % 4 + 1).collect();
            let ds = Dataset::new(n, p, values, mask, Some(labels)).unwrap();
            let back = Dataset::read_csv(ds.to_csv_string().as_bytes()).unwrap();
            prop_assert_eq!(back.mask(), ds.mask());
            prop_assert_eq!(back.labels(), ds.labels());
            for i in 0..n {
                for j in 0..p {
                    prop_assert_eq!(
                        back.get(i, j).map(f64::to_bits),
                        ds.get(i, j).map(f64::to_bits)
                    );
                }
            }
        }
    }
}
