use std::path::Path;

use sha2::{Digest, Sha256};

use crate::data::Dataset;
use crate::error::{Error, Result};

const IRIS_CSV: &str = include_str!("../../data/iris.csv");

/// SHA-256 of the bundled `iris.csv`.
pub const IRIS_SHA256: &str = "b6c20d5df62093927944b882a1ddfdb9f68245023bb523b1605d2bfc5584889d";

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn parse_checked(name: &str, bytes: &[u8]) -> Result<Dataset> {
    let actual = sha256_hex(bytes);
    if actual != IRIS_SHA256 {
        return Err(Error::Checksum {
            name: name.into(),
            expected: IRIS_SHA256.into(),
            actual,
        });
    }
    Dataset::read_csv(bytes)
}

/// Fisher's iris data: 150 rows, 4 coordinates (sepal length, sepal width,
/// petal length, petal width, in cm), labels 1..3 with 50 rows each.
pub fn load_iris() -> Result<Dataset> {
    parse_checked("bundled iris.csv", IRIS_CSV.as_bytes())
}

/// Loads an external copy of the iris CSV, verifying it against the
/// bundled checksum.
pub fn load_iris_from(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    parse_checked(&path.display().to_string(), &bytes)
}
