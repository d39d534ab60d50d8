//! The medical-insurance charges data set (1338 rows) used by the regression
//! tests. It is not shipped; point `FNNSTAT_INSURANCE_CSV` at a copy, or drop
//! it at `fixtures/insurance.csv` in the workspace root.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::ingest::Schema;

pub const PATH_ENV: &str = "FNNSTAT_INSURANCE_CSV";
/// Optional expected SHA-256 (lowercase hex) of the file.
pub const SHA256_ENV: &str = "FNNSTAT_INSURANCE_SHA256";
pub const HEADER: &str = "age,sex,bmi,children,smoker,region,charges";
pub const ROWS: usize = 1338;
pub const MEAN_CHARGES: f64 = 13270.422265;

/// Response in thousands of dollars; references female, nonsmoker,
/// northeast; dummies are renamed to short labels.
pub fn schema() -> Schema {
    let s = |v: &str| v.to_string();
    Schema {
        response: Some(s("charges")),
        response_scale: Some(0.001),
        factors: vec![s("sex"), s("smoker"), s("region")],
        reference: BTreeMap::from([(s("sex"), s("female")), (s("smoker"), s("no"))]),
        levels: BTreeMap::from([(
            s("region"),
            vec![s("northeast"), s("northwest"), s("southeast"), s("southwest")],
        )]),
        rename: BTreeMap::from([
            (s("smoker.yes"), s("smoker")),
            (s("region.northwest"), s("region.nw")),
            (s("region.southeast"), s("region.se")),
            (s("region.southwest"), s("region.sw")),
        ]),
        drop: Vec::new(),
    }
}

/// Location from the environment or the default spot, if a file exists.
pub fn locate(workspace_root: &Path) -> Option<PathBuf> {
    let path = match std::env::var_os(PATH_ENV) {
        Some(p) => PathBuf::from(p),
        None => workspace_root.join("fixtures").join("insurance.csv"),
    };
    path.is_file().then_some(path)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Checks header, row count and mean charges, plus the digest when
/// `FNNSTAT_INSURANCE_SHA256` is set.
pub fn verify(path: &Path) -> Result<(), String> {
    let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    if let Ok(expected) = std::env::var(SHA256_ENV) {
        let got = sha256_hex(&bytes);
        if !got.eq_ignore_ascii_case(expected.trim()) {
            return Err(format!("sha256 {got} does not match {expected}"));
        }
    }
    let text = String::from_utf8(bytes).map_err(|e| e.to_string())?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().unwrap_or("").trim().replace('"', "");
    if header != HEADER {
        return Err(format!("unexpected header '{header}'"));
    }
    let mut total = 0.0;
    let mut rows = 0;
    for line in lines {
        let last = line.rsplit(',').next().unwrap_or("").trim();
        total += last.parse::<f64>().map_err(|e| format!("charges '{last}': {e}"))?;
        rows += 1;
    }
    if rows != ROWS {
        return Err(format!("{rows} rows, expected {ROWS}"));
    }
    let mean = total / rows as f64;
    if (mean - MEAN_CHARGES).abs() > 0.01 {
        return Err(format!("mean charges {mean}, expected {MEAN_CHARGES}"));
    }
    Ok(())
}
