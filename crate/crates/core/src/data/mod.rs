//! Dataset files, train/validation/test partitions, tuple subsampling and
//! the synthetic benchmark generator.

mod partition;
mod synthetic;

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use partition::{partition, partition_indices, subsample_tuples, Partition, PartitionSpec, Scenario};
pub use synthetic::{generate_synthetic, SyntheticInstance, SyntheticSpec};

use crate::error::{Error, Result};
use crate::fa::Dataset;
use crate::fsutil::write_atomic;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Independent random streams derived from one trial seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RngStream {
    Partition = 1,
    Subsample = 2,
    Init = 3,
    Negatives = 4,
}

pub fn stream_rng(seed: u64, stream: RngStream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// `⌊x⌋`, except that values within 1e-9 of an integer snap to it, so that
/// e.g. `0.7 · 10` counts as 7.
pub(crate) fn snapped_floor(x: f64) -> usize {
    let r = x.round();
    let v = if (x - r).abs() < 1e-9 { r } else { x.floor() };
    v.max(0.0) as usize
}

pub(crate) fn snapped_ceil(x: f64) -> usize {
    let r = x.round();
    let v = if (x - r).abs() < 1e-9 { r } else { x.ceil() };
    v.max(0.0) as usize
}

fn is_id_header(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c.eq_ignore_ascii_case("id") || c.eq_ignore_ascii_case("object_id")
}

/// Reads a CSV whose first row holds attribute names. A first column headed
/// `id`, `object_id` or left blank is taken as object ids; otherwise ids are
/// row numbers starting at 0.
pub fn load_dataset<T: Scalar>(path: &Path) -> Result<Dataset<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Parse {
                path: path.to_owned(),
                line: 1,
                message: format!("{other:?}"),
            },
        })?;
    let header = reader.headers()?.clone();
    let has_ids = header.get(0).is_some_and(is_id_header);
    let skip = usize::from(has_ids);
    let names: Vec<String> = header.iter().skip(skip).map(str::to_owned).collect();

    let mut ids = Vec::new();
    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(row + 2, |p| p.line() as usize);
        if record.len() != names.len() + skip {
            return Err(Error::Parse {
                path: path.to_owned(),
                line,
                message: format!("expected {} fields, found {}", names.len() + skip, record.len()),
            });
        }
        ids.push(if has_ids { record[0].to_owned() } else { row.to_string() });
        for cell in record.iter().skip(skip) {
            let v: T = cell.trim().parse().map_err(|_| Error::Parse {
                path: path.to_owned(),
                line,
                message: format!("cannot parse `{cell}` as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: path.to_owned(),
                    line,
                    message: format!("non-finite value `{cell}`"),
                });
            }
            values.push(v);
        }
    }
    let n = ids.len();
    Dataset::new(Matrix::from_vec(n, names.len(), values)?, names, ids)
}

/// Writes `id,<attributes…>` followed by one row per object.
pub fn save_dataset<T: Scalar>(data: &Dataset<T>, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["id".to_owned()];
    header.extend(data.attribute_names.iter().cloned());
    writer.write_record(&header)?;
    for j in 0..data.n_objects() {
        let mut rec = vec![data.object_ids[j].clone()];
        rec.extend(data.values.row(j).iter().map(|v| v.to_string()));
        writer.write_record(&rec)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    write_atomic(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapping() {
        assert_eq!(snapped_floor(0.8 * 1167.0), 933);
        assert_eq!(snapped_floor(0.7 * 10.0), 7);
        assert_eq!(snapped_floor(0.29 * 100.0), 29);
        assert_eq!(snapped_ceil(0.7 * 10.0), 7);
        assert_eq!(snapped_ceil(0.55 * 10.0), 6);
    }

    #[test]
    fn csv_with_and_without_ids() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, "id,a,b\nx1,1.5,-2\nx2,0,3e-3\n").unwrap();
        let d: Dataset<f64> = load_dataset(&p).unwrap();
        assert_eq!(d.attribute_names, vec!["a", "b"]);
        assert_eq!(d.object_ids, vec!["x1", "x2"]);
        assert_eq!(d.values.row(1), &[0.0, 0.003]);

        std::fs::write(&p, "a,b\n1,2\n").unwrap();
        let d: Dataset<f32> = load_dataset(&p).unwrap();
        assert_eq!(d.object_ids, vec!["0"]);
        assert_eq!(d.values.row(0), &[1.0, 2.0]);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, "id,a\nx,1\ny,oops\n").unwrap();
        let err = load_dataset::<f64>(&p).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        std::fs::write(&p, "id,a\nx,NaN\n").unwrap();
        assert!(load_dataset::<f64>(&p).is_err());
    }
}
