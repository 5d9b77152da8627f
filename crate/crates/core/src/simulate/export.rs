//! CSV and binary export of Monte Carlo samples.
//!
//! Binary layout: the 8-byte magic `SMTMCS01` followed by the values as
//! little-endian `f64`, row-major. Shape, labels and provenance live in a JSON
//! sidecar next to the data file (`<path>.json`).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{McSample, SampleMeta};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SMTMCS01";

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    n_rows: usize,
    n_cols: usize,
    labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    jump_counts: Option<Vec<u64>>,
    meta: SampleMeta,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

impl McSample {
    /// Header row of labels, then one path per row.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.labels)?;
        for i in 0..self.n_rows {
            w.write_record(self.row(i).iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(BufWriter::new(File::create(path)?))
    }

    pub fn save_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        let sidecar = Sidecar {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            labels: self.labels.clone(),
            jump_counts: self.jump_counts.clone(),
            meta: self.meta.clone(),
        };
        serde_json::to_writer_pretty(BufWriter::new(File::create(sidecar_path(path))?), &sidecar)?;
        Ok(())
    }

    pub fn load_binary(path: impl AsRef<Path>) -> Result<McSample> {
        let path = path.as_ref();
        let sidecar: Sidecar = serde_json::from_reader(BufReader::new(File::open(sidecar_path(path))?))?;
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::InvalidConfig(format!("{} is not a sample file", path.display())));
        }
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != 8 * sidecar.n_rows * sidecar.n_cols {
            return Err(Error::ShapeMismatch(format!(
                "{} holds {} bytes, expected {} x {} values",
                path.display(),
                bytes.len(),
                sidecar.n_rows,
                sidecar.n_cols
            )));
        }
        let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
        Ok(McSample {
            values,
            n_rows: sidecar.n_rows,
            n_cols: sidecar.n_cols,
            labels: sidecar.labels,
            jump_counts: sidecar.jump_counts,
            meta: sidecar.meta,
        })
    }
}

#[cfg(test)]
mod tests {
    use crate::models::ModelSpec;
    use crate::simulate::{simulate_paths, McSample, Scheme, SimConfig};

    #[test]
    fn binary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SimConfig::new(300, 9).with_grid(vec![0.0, 0.5, 1.0]).with_scheme(Scheme::Exact);
        let s = simulate_paths(&ModelSpec::poisson_martingale(2.0).unwrap(), &cfg).unwrap();
        let path = dir.path().join("s.bin");
        s.save_binary(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..8], b"SMTMCS01");
        assert_eq!(bytes.len(), 8 + 8 * 300 * 3);
        let back = McSample::load_binary(&path).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn csv_has_header_and_one_row_per_path() {
        let cfg = SimConfig::new(5, 1).with_scheme(Scheme::Exact);
        let s = crate::simulate::simulate_terminal(&ModelSpec::drifted_bm(0.0, 1.0).unwrap(), 1.0, &cfg).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[0], "x0@1");
    }
}
