//! Synthetic datasets, IID / Dirichlet partitioning and CSV ingestion.

use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Gamma, StandardNormal};
use thiserror::Error;

use crate::learning::{Dataset, LearningError};
use crate::rng::seeded;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid data parameters: {0}")]
    InvalidParams(String),
    #[error("cannot split {rows} rows across {devices} devices")]
    TooManyDevices { rows: usize, devices: usize },
    #[error("class {0} has no rows")]
    EmptyClass(usize),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("{path}: no rows")]
    NoRows { path: String },
    #[error(transparent)]
    Dataset(#[from] LearningError),
}

/// Row indices per device.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionPlan {
    pub assignments: Vec<Vec<usize>>,
}

impl PartitionPlan {
    pub fn devices(&self) -> usize {
        self.assignments.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.assignments.iter().map(Vec::len).collect()
    }

    /// Disjoint, covering `0..rows`, and no empty shard.
    pub fn is_partition_of(&self, rows: usize) -> bool {
        let mut seen = vec![false; rows];
        for shard in &self.assignments {
            if shard.is_empty() {
                return false;
            }
            for &i in shard {
                if i >= rows || seen[i] {
                    return false;
                }
                seen[i] = true;
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// `classes` unit-variance Gaussian blobs with means at
/// `separation * e_c`. Class sizes differ by at most one (lower classes get
/// the extra rows) and row order is shuffled.
pub fn make_synthetic(rows: usize, dim: usize, classes: usize, separation: f64, seed: u64) -> Result<Dataset, DataError> {
    if classes == 0 || dim == 0 {
        return Err(DataError::InvalidParams("features and classes must be positive".into()));
    }
    if rows < classes {
        return Err(DataError::InvalidParams(format!(
            "need at least one row per class, got {rows} rows for {classes} classes"
        )));
    }
    if !(separation >= 0.0) || !separation.is_finite() {
        return Err(DataError::InvalidParams(format!("separation must be >= 0, got {separation}")));
    }
    if separation > 0.0 && dim < classes {
        return Err(DataError::InvalidParams(format!(
            "class means sit on the first {classes} axes; features ({dim}) must be >= classes"
        )));
    }
    let mut rng = seeded(seed);
    let mut labels: Vec<usize> = (0..classes)
        .flat_map(|c| {
            let count = rows / classes + usize::from(c < rows % classes);
            std::iter::repeat_n(c, count)
        })
        .collect();
    labels.shuffle(&mut rng);
    let mut features = Vec::with_capacity(rows * dim);
    for &c in &labels {
        for j in 0..dim {
            let mean = if j == c { separation } else { 0.0 };
            let z: f64 = StandardNormal.sample(&mut rng);
            features.push(mean + z);
        }
    }
    Ok(Dataset::new(features, labels, dim, classes)?)
}

/// Split `0..rows` into a held-out part of `fraction * rows` (rounded down)
/// and the rest, after a seeded shuffle. Returns `(kept, held_out)`.
pub fn holdout_split(rows: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..rows).collect();
    idx.shuffle(&mut seeded(seed));
    let held = ((rows as f64) * fraction).floor() as usize;
    let held = held.min(rows.saturating_sub(1));
    let kept = idx.split_off(held);
    (kept, idx)
}

/// Seeded shuffle, then contiguous near-equal shards (the first `n % k`
/// shards get one extra row).
pub fn partition_iid(rows: usize, devices: usize, seed: u64) -> Result<PartitionPlan, DataError> {
    if devices == 0 || devices > rows {
        return Err(DataError::TooManyDevices { rows, devices });
    }
    let mut idx: Vec<usize> = (0..rows).collect();
    idx.shuffle(&mut seeded(seed));
    let base = rows / devices;
    let extra = rows % devices;
    let mut assignments = Vec::with_capacity(devices);
    let mut start = 0;
    for d in 0..devices {
        let len = base + usize::from(d < extra);
        assignments.push(idx[start..start + len].to_vec());
        start += len;
    }
    Ok(PartitionPlan { assignments })
}

/// Per-class Dirichlet(alpha) proportions over devices. Devices left empty
/// take one row from the currently largest shard.
pub fn partition_dirichlet(data: &Dataset, devices: usize, alpha: f64, seed: u64) -> Result<PartitionPlan, DataError> {
    if devices < 2 {
        return Err(DataError::InvalidParams("dirichlet partition needs at least 2 devices".into()));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(DataError::InvalidParams(format!("alpha must be positive, got {alpha}")));
    }
    if devices > data.len() {
        return Err(DataError::TooManyDevices {
            rows: data.len(),
            devices,
        });
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); data.classes()];
    for (i, &y) in data.labels().iter().enumerate() {
        by_class[y].push(i);
    }
    if let Some(c) = by_class.iter().position(Vec::is_empty) {
        return Err(DataError::EmptyClass(c));
    }

    let mut rng = seeded(seed);
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| DataError::InvalidParams(e.to_string()))?;
    let mut assignments: Vec<Vec<usize>> = vec![Vec::new(); devices];
    for rows in &mut by_class {
        rows.shuffle(&mut rng);
        let draws: Vec<f64> = (0..devices).map(|_| gamma.sample(&mut rng)).collect();
        let total: f64 = draws.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            // every draw underflowed; the class goes to a single device
            let pick = draws
                .iter()
                .enumerate()
                .fold(0, |best, (i, &v)| if v > draws[best] { i } else { best });
            assignments[pick].extend_from_slice(rows);
            continue;
        }
        let n = rows.len();
        let mut cum = 0.0;
        let mut start = 0;
        for (d, &g) in draws.iter().enumerate() {
            cum += g / total;
            let end = if d + 1 == devices {
                n
            } else {
                ((cum * n as f64).floor() as usize).clamp(start, n)
            };
            assignments[d].extend_from_slice(&rows[start..end]);
            start = end;
        }
    }

    while let Some(empty) = assignments.iter().position(Vec::is_empty) {
        let largest = (0..devices)
            .max_by(|&a, &b| assignments[a].len().cmp(&assignments[b].len()).then(b.cmp(&a)))
            .expect("devices >= 2");
        let row = assignments[largest].pop().expect("largest shard is nonempty");
        assignments[empty].push(row);
    }
    Ok(PartitionPlan { assignments })
}

/// Read a headed, comma-delimited CSV. Every column except `label_column`
/// is a numeric feature; labels must be integers in `0..classes`.
pub fn load_csv(path: &Path, label_column: &str, classes: usize) -> Result<Dataset, DataError> {
    let shown = path.display().to_string();
    let parse_err = |line: usize, msg: String| DataError::Parse {
        path: shown.clone(),
        line,
        msg,
    };
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: shown.clone(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(DataError::NoRows { path: shown });
    }
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| parse_err(1, format!("no column named '{label_column}'")))?;
    let dim = headers.len() - 1;
    if dim == 0 {
        return Err(parse_err(1, "no feature columns".into()));
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| parse_err(line, e.to_string()))?;
        if record.len() != headers.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", headers.len(), record.len()),
            ));
        }
        for (j, cell) in record.iter().enumerate() {
            if j == label_idx {
                let label: usize = cell
                    .parse()
                    .map_err(|_| parse_err(line, format!("label '{cell}' is not a non-negative integer")))?;
                if label >= classes {
                    return Err(parse_err(
                        line,
                        format!("label {label} out of range for {classes} classes"),
                    ));
                }
                labels.push(label);
            } else {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| parse_err(line, format!("column '{}': '{cell}' is not numeric", &headers[j])))?;
                if !v.is_finite() {
                    return Err(parse_err(line, format!("column '{}' is not finite", &headers[j])));
                }
                features.push(v);
            }
        }
    }
    if labels.is_empty() {
        return Err(DataError::NoRows { path: shown });
    }
    Ok(Dataset::new(features, labels, dim, classes)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::{evaluate, init_model, train, ModelShape, TrainConfig};
    use proptest::prelude::*;
    use std::io::Write;

    #[test]
    fn balanced_class_counts() {
        let d = make_synthetic(100, 3, 3, 2.0, 1).unwrap();
        assert_eq!(d.class_counts(), vec![34, 33, 33]);
    }

    #[test]
    fn synthetic_is_seeded() {
        assert_eq!(make_synthetic(50, 4, 2, 1.0, 3).unwrap(), make_synthetic(50, 4, 2, 1.0, 3).unwrap());
        assert_ne!(make_synthetic(50, 4, 2, 1.0, 3).unwrap(), make_synthetic(50, 4, 2, 1.0, 4).unwrap());
    }

    #[test]
    fn synthetic_preconditions() {
        assert!(make_synthetic(2, 4, 3, 1.0, 0).is_err());
        assert!(make_synthetic(10, 2, 3, 1.0, 0).is_err());
        // coincident means need no axis per class
        assert!(make_synthetic(10, 2, 3, 0.0, 0).is_ok());
    }

    #[test]
    fn zero_separation_is_chance_level() {
        let data = make_synthetic(3000, 4, 3, 0.0, 7).unwrap();
        let shape = ModelShape::new(vec![4, 3]).unwrap();
        let cfg = TrainConfig {
            epochs: 10,
            batch_size: 32,
            learning_rate: 0.1,
            seed: 1,
        };
        let (p, _) = train(&init_model(&shape, 0), &data, &cfg).unwrap();
        let fresh = make_synthetic(3000, 4, 3, 0.0, 8).unwrap();
        let acc = evaluate(&p, &fresh).unwrap().accuracy;
        assert!((acc - 1.0 / 3.0).abs() <= 0.1, "accuracy {acc}");
    }

    #[test]
    fn iid_sizes() {
        let plan = partition_iid(10, 3, 0).unwrap();
        assert_eq!(plan.sizes(), vec![4, 3, 3]);
        assert!(plan.is_partition_of(10));
        assert!(partition_iid(3, 4, 0).is_err());
    }

    #[test]
    fn iid_single_shard_is_permutation() {
        let plan = partition_iid(20, 1, 5).unwrap();
        let mut sorted = plan.assignments[0].clone();
        assert_ne!(sorted, (0..20).collect::<Vec<_>>());
        sorted.sort();
        assert_eq!(sorted, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn dirichlet_large_alpha_is_near_uniform() {
        let data = make_synthetic(1200, 3, 3, 1.0, 2).unwrap();
        let plan = partition_dirichlet(&data, 4, 1e6, 9).unwrap();
        assert!(plan.is_partition_of(1200));
        for shard in &plan.assignments {
            let mut counts = [0usize; 3];
            for &i in shard {
                counts[data.label(i)] += 1;
            }
            for c in counts {
                let frac = c as f64 / shard.len() as f64;
                assert!((frac - 1.0 / 3.0).abs() <= 0.05, "fraction {frac}");
            }
        }
    }

    #[test]
    fn dirichlet_small_alpha_skews() {
        let data = make_synthetic(5000, 10, 10, 1.0, 4).unwrap();
        let plan = partition_dirichlet(&data, 10, 0.1, 11).unwrap();
        assert!(plan.is_partition_of(5000));
        let max_purity = plan
            .assignments
            .iter()
            .map(|shard| {
                let mut counts = [0usize; 10];
                for &i in shard {
                    counts[data.label(i)] += 1;
                }
                *counts.iter().max().unwrap() as f64 / shard.len() as f64
            })
            .fold(0.0, f64::max);
        assert!(max_purity > 0.8, "max purity {max_purity}");
    }

    #[test]
    fn dirichlet_repairs_empty_shards() {
        let data = make_synthetic(30, 2, 2, 1.0, 1).unwrap();
        for seed in 0..50 {
            let plan = partition_dirichlet(&data, 8, 0.01, seed).unwrap();
            assert!(plan.is_partition_of(30));
        }
    }

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn csv_well_formed() {
        let f = write_tmp("a,b,label\n1.0,2.0,0\n3,4,1\n-1,0.5,2\n");
        let d = load_csv(f.path(), "label", 3).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.row(1), &[3.0, 4.0]);
        assert_eq!(d.labels(), &[0, 1, 2]);
    }

    #[test]
    fn csv_label_out_of_range_names_row() {
        let f = write_tmp("x,y\n1,0\n2,7\n");
        let err = load_csv(f.path(), "y", 5).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        assert!(err.contains("label 7"), "{err}");
    }

    #[test]
    fn csv_empty_and_bad_cells() {
        let f = write_tmp("");
        assert!(load_csv(f.path(), "y", 2).unwrap_err().to_string().contains("no rows"));
        let f = write_tmp("x,y\n");
        assert!(load_csv(f.path(), "y", 2).unwrap_err().to_string().contains("no rows"));
        let f = write_tmp("x,y\nabc,1\n");
        assert!(load_csv(f.path(), "y", 2).unwrap_err().to_string().contains("line 2"));
        assert!(matches!(
            load_csv(Path::new("/nonexistent/file.csv"), "y", 2),
            Err(DataError::Io { .. })
        ));
    }

    proptest! {
        #[test]
        fn partitions_are_partitions(rows in 2usize..300, k in 2usize..12, alpha in 0.05f64..10.0, seed in 0u64..100) {
            prop_assume!(k <= rows);
            prop_assert!(partition_iid(rows, k, seed).unwrap().is_partition_of(rows));
            let data = make_synthetic(rows.max(3), 3, 3, 1.0, seed).unwrap();
            let plan = partition_dirichlet(&data, k.min(data.len()), alpha, seed).unwrap();
            prop_assert!(plan.is_partition_of(data.len()));
        }
    }
}
