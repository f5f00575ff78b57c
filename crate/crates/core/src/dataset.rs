//! Multi-contingency frequency-response datasets.
//!
//! A dataset is a set of contingency records over one fixed bus set. Each
//! record holds one frequency trace per bus, all sampled on the record's
//! own time base. Records are immutable once built and safe to share
//! across threads.
//!
//! On-disk format: a JSON manifest listing contingency CSV files. Each CSV
//! starts with a header row `bus,t0,t1,...` (timestamps in seconds) and one
//! row per bus: `bus_id,f0,f1,...` (frequencies in Hz). UTF-8, comma
//! separated, `.` decimal point, no quoting.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("manifest {path} is not valid JSON: {source}")]
    ManifestParse {
        path: PathBuf,
        source: serde_json::Error,
    },

    #[error("manifest {path} lists no contingencies")]
    EmptyManifest { path: PathBuf },

    #[error("{file}: missing or malformed header row")]
    BadHeader { file: PathBuf },

    #[error("{file}, header column {column}: invalid timestamp {value:?}")]
    BadTimestamp {
        file: PathBuf,
        column: usize,
        value: String,
    },

    #[error("{file}: timestamps are not strictly increasing at column {column}")]
    NonMonotoneTimestamps { file: PathBuf, column: usize },

    #[error("{file}, row {row}: expected {expected} samples, found {found}")]
    RaggedRow {
        file: PathBuf,
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("{file}, row {row}: non-finite value in column {column}")]
    NonFiniteValue {
        file: PathBuf,
        row: usize,
        column: usize,
    },

    #[error("{file}, row {row}: cannot parse {value:?} as a frequency sample")]
    BadSample {
        file: PathBuf,
        row: usize,
        value: String,
    },

    #[error("{file}, row {row}: duplicate bus id {bus:?}")]
    DuplicateBus {
        file: PathBuf,
        row: usize,
        bus: String,
    },

    #[error("{file}: bus set differs from first record ({detail})")]
    BusSetMismatch { file: PathBuf, detail: String },

    #[error("{file}: has {found} samples per trace, first record has {expected}")]
    SampleCountMismatch {
        file: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("{file}: contains no bus rows")]
    EmptyRecord { file: PathBuf },

    #[error("dataset needs at least 2 buses, found {0}")]
    TooFewBuses(usize),
}

/// One bus's sampled frequency trajectory for one contingency.
///
/// `sample_times` is shared by every trace in a record.
#[derive(Debug, Clone)]
pub struct FrequencyTrace {
    pub bus_id: String,
    /// Frequency samples in Hz.
    pub samples: Vec<f64>,
    /// Timestamps in seconds, strictly increasing.
    pub sample_times: Arc<[f64]>,
}

/// All bus responses recorded for one contingency.
#[derive(Debug, Clone)]
pub struct ContingencyRecord {
    pub contingency_id: String,
    pub outage_bus: String,
    /// Informational disturbance size in MW.
    pub mw_lost: f64,
    pub traces: Vec<FrequencyTrace>,
}

impl ContingencyRecord {
    pub fn n_buses(&self) -> usize {
        self.traces.len()
    }

    pub fn n_samples(&self) -> usize {
        self.traces.first().map_or(0, |t| t.samples.len())
    }

    pub fn trace(&self, bus_id: &str) -> Option<&FrequencyTrace> {
        self.traces.iter().find(|t| t.bus_id == bus_id)
    }
}

/// A validated multi-contingency dataset over one canonical bus ordering.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub records: Vec<ContingencyRecord>,
    pub bus_order: Vec<String>,
}

impl Dataset {
    /// Number of contingencies (views).
    pub fn n_views(&self) -> usize {
        self.records.len()
    }

    /// Number of buses.
    pub fn n_buses(&self) -> usize {
        self.bus_order.len()
    }
}

/// One entry of the dataset manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub file: String,
    pub outage_bus: String,
    pub mw_lost: f64,
}

/// The JSON manifest that names the contingency CSV files of a dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub contingencies: Vec<ManifestEntry>,
}

/// Kinds of dataset invariant violations reported by [`validate_dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    EmptyDataset,
    TooFewBuses,
    EmptyRecord,
    LengthMismatch,
    NonMonotoneTimestamps,
    NonFiniteSample,
    DuplicateBus,
    TimeBaseMismatch,
    BusSetMismatch,
    SampleCountMismatch,
}

/// One invariant violation found in a dataset.
#[derive(Debug, Clone)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Contingency id the violation belongs to, if record-scoped.
    pub record_id: Option<String>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.record_id {
            Some(id) => write!(f, "[{id}] {}", self.detail),
            None => write!(f, "{}", self.detail),
        }
    }
}

/// Load a dataset from a JSON manifest referencing contingency CSV files.
///
/// Relative file paths resolve against the manifest's directory. The bus
/// ordering of the first record becomes the dataset's canonical order and
/// every later record is reindexed to it.
pub fn ingest_csv(manifest_path: &Path) -> Result<Dataset, DatasetError> {
    let text = std::fs::read_to_string(manifest_path).map_err(|source| DatasetError::Io {
        path: manifest_path.to_path_buf(),
        source,
    })?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|source| DatasetError::ManifestParse {
            path: manifest_path.to_path_buf(),
            source,
        })?;
    if manifest.contingencies.is_empty() {
        return Err(DatasetError::EmptyManifest {
            path: manifest_path.to_path_buf(),
        });
    }

    let base_dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut records = Vec::with_capacity(manifest.contingencies.len());
    let mut bus_order: Vec<String> = Vec::new();
    let mut expected_samples = 0usize;

    for entry in &manifest.contingencies {
        let file = base_dir.join(&entry.file);
        let record = parse_contingency_csv(&file, entry)?;

        if bus_order.is_empty() {
            bus_order = record.traces.iter().map(|t| t.bus_id.clone()).collect();
            expected_samples = record.n_samples();
            if bus_order.len() < 2 {
                return Err(DatasetError::TooFewBuses(bus_order.len()));
            }
            records.push(record);
        } else {
            if record.n_samples() != expected_samples {
                return Err(DatasetError::SampleCountMismatch {
                    file,
                    expected: expected_samples,
                    found: record.n_samples(),
                });
            }
            records.push(reindex_record(record, &bus_order, &file)?);
        }
    }

    Ok(Dataset { records, bus_order })
}

fn parse_contingency_csv(
    file: &Path,
    entry: &ManifestEntry,
) -> Result<ContingencyRecord, DatasetError> {
    let text = std::fs::read_to_string(file).map_err(|source| DatasetError::Io {
        path: file.to_path_buf(),
        source,
    })?;
    let mut lines = text.lines();

    let header = lines.next().ok_or_else(|| DatasetError::BadHeader {
        file: file.to_path_buf(),
    })?;
    let mut cells = header.split(',');
    if cells.next().map(str::trim) != Some("bus") {
        return Err(DatasetError::BadHeader {
            file: file.to_path_buf(),
        });
    }

    let mut sample_times = Vec::new();
    for (idx, cell) in cells.enumerate() {
        let t: f64 = cell
            .trim()
            .parse()
            .map_err(|_| DatasetError::BadTimestamp {
                file: file.to_path_buf(),
                column: idx + 1,
                value: cell.to_string(),
            })?;
        if let Some(&prev) = sample_times.last() {
            if t <= prev {
                return Err(DatasetError::NonMonotoneTimestamps {
                    file: file.to_path_buf(),
                    column: idx + 1,
                });
            }
        }
        sample_times.push(t);
    }
    if sample_times.is_empty() {
        return Err(DatasetError::BadHeader {
            file: file.to_path_buf(),
        });
    }
    let sample_times: Arc<[f64]> = sample_times.into();
    let n_samples = sample_times.len();

    let mut traces = Vec::new();
    let mut seen = HashSet::new();
    // Row numbers are 1-based file line numbers; the header is line 1.
    for (line_idx, line) in lines.enumerate() {
        let row = line_idx + 2;
        if line.trim().is_empty() {
            continue;
        }
        let mut cells = line.split(',');
        let bus_id = cells.next().unwrap_or("").trim().to_string();
        if !seen.insert(bus_id.clone()) {
            return Err(DatasetError::DuplicateBus {
                file: file.to_path_buf(),
                row,
                bus: bus_id,
            });
        }

        let mut samples = Vec::with_capacity(n_samples);
        for (col_idx, cell) in cells.enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| DatasetError::BadSample {
                file: file.to_path_buf(),
                row,
                value: cell.to_string(),
            })?;
            if !value.is_finite() {
                return Err(DatasetError::NonFiniteValue {
                    file: file.to_path_buf(),
                    row,
                    column: col_idx + 1,
                });
            }
            samples.push(value);
        }
        if samples.len() != n_samples {
            return Err(DatasetError::RaggedRow {
                file: file.to_path_buf(),
                row,
                expected: n_samples,
                found: samples.len(),
            });
        }
        traces.push(FrequencyTrace {
            bus_id,
            samples,
            sample_times: Arc::clone(&sample_times),
        });
    }

    if traces.is_empty() {
        return Err(DatasetError::EmptyRecord {
            file: file.to_path_buf(),
        });
    }

    Ok(ContingencyRecord {
        contingency_id: entry.id.clone(),
        outage_bus: entry.outage_bus.clone(),
        mw_lost: entry.mw_lost,
        traces,
    })
}

/// Reorder a record's traces into the canonical bus order, checking that
/// the bus sets agree exactly.
fn reindex_record(
    record: ContingencyRecord,
    bus_order: &[String],
    file: &Path,
) -> Result<ContingencyRecord, DatasetError> {
    let have: HashSet<&str> = record.traces.iter().map(|t| t.bus_id.as_str()).collect();
    let want: HashSet<&str> = bus_order.iter().map(String::as_str).collect();

    if have != want {
        let missing: Vec<&str> = want.difference(&have).copied().collect();
        let extra: Vec<&str> = have.difference(&want).copied().collect();
        let mut parts = Vec::new();
        if !missing.is_empty() {
            let mut m = missing;
            m.sort_unstable();
            parts.push(format!("missing {}", m.join(", ")));
        }
        if !extra.is_empty() {
            let mut e = extra;
            e.sort_unstable();
            parts.push(format!("unexpected {}", e.join(", ")));
        }
        return Err(DatasetError::BusSetMismatch {
            file: file.to_path_buf(),
            detail: parts.join("; "),
        });
    }

    let mut traces: Vec<Option<FrequencyTrace>> = record.traces.into_iter().map(Some).collect();
    let mut ordered = Vec::with_capacity(bus_order.len());
    for bus in bus_order {
        let pos = traces
            .iter()
            .position(|t| t.as_ref().is_some_and(|t| &t.bus_id == bus))
            .expect("bus set equality already checked");
        ordered.push(traces[pos].take().expect("taken once"));
    }

    Ok(ContingencyRecord {
        traces: ordered,
        ..record
    })
}

/// Check every dataset invariant and report all violations found.
///
/// Violations are data, not failures: a valid dataset yields an empty list.
pub fn validate_dataset(dataset: &Dataset) -> Vec<Violation> {
    let mut violations = Vec::new();

    if dataset.records.is_empty() {
        violations.push(Violation {
            kind: ViolationKind::EmptyDataset,
            record_id: None,
            detail: "dataset has no contingency records".to_string(),
        });
    }
    if dataset.bus_order.len() < 2 {
        violations.push(Violation {
            kind: ViolationKind::TooFewBuses,
            record_id: None,
            detail: format!(
                "bus_order has {} buses, need at least 2",
                dataset.bus_order.len()
            ),
        });
    }

    let expected_samples = dataset.records.first().map(ContingencyRecord::n_samples);

    for record in &dataset.records {
        let id = || Some(record.contingency_id.clone());

        if record.traces.is_empty() {
            violations.push(Violation {
                kind: ViolationKind::EmptyRecord,
                record_id: id(),
                detail: "record has no traces".to_string(),
            });
            continue;
        }

        let reference_times = &record.traces[0].sample_times;
        let mut seen = HashSet::new();
        for trace in &record.traces {
            if !seen.insert(trace.bus_id.as_str()) {
                violations.push(Violation {
                    kind: ViolationKind::DuplicateBus,
                    record_id: id(),
                    detail: format!("duplicate bus id {:?}", trace.bus_id),
                });
            }
            if trace.samples.is_empty() {
                violations.push(Violation {
                    kind: ViolationKind::EmptyRecord,
                    record_id: id(),
                    detail: format!("bus {:?} has no samples", trace.bus_id),
                });
            }
            if trace.samples.len() != trace.sample_times.len() {
                violations.push(Violation {
                    kind: ViolationKind::LengthMismatch,
                    record_id: id(),
                    detail: format!(
                        "bus {:?}: {} samples vs {} timestamps",
                        trace.bus_id,
                        trace.samples.len(),
                        trace.sample_times.len()
                    ),
                });
            }
            if trace.sample_times.windows(2).any(|w| w[1] <= w[0]) {
                violations.push(Violation {
                    kind: ViolationKind::NonMonotoneTimestamps,
                    record_id: id(),
                    detail: format!("bus {:?}: timestamps not strictly increasing", trace.bus_id),
                });
            }
            if let Some(pos) = trace.samples.iter().position(|x| !x.is_finite()) {
                violations.push(Violation {
                    kind: ViolationKind::NonFiniteSample,
                    record_id: id(),
                    detail: format!("bus {:?}: non-finite sample at index {pos}", trace.bus_id),
                });
            }
            if trace.sample_times[..] != reference_times[..] {
                violations.push(Violation {
                    kind: ViolationKind::TimeBaseMismatch,
                    record_id: id(),
                    detail: format!("bus {:?}: time base differs within record", trace.bus_id),
                });
            }
        }

        let have: HashSet<&str> = record.traces.iter().map(|t| t.bus_id.as_str()).collect();
        let want: HashSet<&str> = dataset.bus_order.iter().map(String::as_str).collect();
        if have != want {
            violations.push(Violation {
                kind: ViolationKind::BusSetMismatch,
                record_id: id(),
                detail: "bus set differs from dataset bus_order".to_string(),
            });
        }

        if let Some(expected) = expected_samples {
            if record.n_samples() != expected {
                violations.push(Violation {
                    kind: ViolationKind::SampleCountMismatch,
                    record_id: id(),
                    detail: format!(
                        "record has {} samples per trace, first record has {expected}",
                        record.n_samples()
                    ),
                });
            }
        }
    }

    violations
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;
    use tempfile::TempDir;

    fn write_manifest(dir: &Path, entries: &[(&str, &str)]) -> PathBuf {
        let manifest = Manifest {
            contingencies: entries
                .iter()
                .map(|(id, file)| ManifestEntry {
                    id: id.to_string(),
                    file: file.to_string(),
                    outage_bus: "b0".to_string(),
                    mw_lost: 100.0,
                })
                .collect(),
        };
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap()).unwrap();
        path
    }

    fn sample_record(id: &str) -> ContingencyRecord {
        let times: Arc<[f64]> = vec![0.0, 0.1, 0.2].into();
        ContingencyRecord {
            contingency_id: id.to_string(),
            outage_bus: "b0".to_string(),
            mw_lost: 50.0,
            traces: vec![
                FrequencyTrace {
                    bus_id: "b0".into(),
                    samples: vec![60.0, 59.9, 59.95],
                    sample_times: Arc::clone(&times),
                },
                FrequencyTrace {
                    bus_id: "b1".into(),
                    samples: vec![60.0, 59.8, 59.85],
                    sample_times: times,
                },
            ],
        }
    }

    #[test]
    fn ingests_two_well_formed_records() {
        let dir = TempDir::new().unwrap();
        let csv = "bus,0.0,0.1,0.2\nb0,60.0,59.9,59.95\nb1,60.0,59.8,59.85\nb2,60.0,59.7,59.75\nb3,60.0,59.6,59.65\n";
        fs::write(dir.path().join("c0.csv"), csv).unwrap();
        fs::write(dir.path().join("c1.csv"), csv).unwrap();
        let manifest = write_manifest(dir.path(), &[("c0", "c0.csv"), ("c1", "c1.csv")]);

        let ds = ingest_csv(&manifest).unwrap();
        assert_eq!(ds.n_views(), 2);
        assert_eq!(ds.n_buses(), 4);
        assert_eq!(ds.bus_order, vec!["b0", "b1", "b2", "b3"]);
        assert!(validate_dataset(&ds).is_empty());
    }

    #[test]
    fn missing_bus_reports_bus_set_mismatch() {
        let dir = TempDir::new().unwrap();
        fs::write(
            dir.path().join("c0.csv"),
            "bus,0.0,0.1\nb0,60.0,59.9\nb1,60.0,59.8\nb2,60.0,59.7\n",
        )
        .unwrap();
        fs::write(
            dir.path().join("c1.csv"),
            "bus,0.0,0.1\nb0,60.0,59.9\nb2,60.0,59.7\n",
        )
        .unwrap();
        let manifest = write_manifest(dir.path(), &[("c0", "c0.csv"), ("c1", "c1.csv")]);

        let err = ingest_csv(&manifest).unwrap_err();
        match err {
            DatasetError::BusSetMismatch { detail, .. } => assert!(detail.contains("b1")),
            other => panic!("expected BusSetMismatch, got {other:?}"),
        }
    }

    #[test]
    fn nan_cell_reports_row() {
        let dir = TempDir::new().unwrap();
        fs::write(
            dir.path().join("c0.csv"),
            "bus,0.0,0.1\nb0,60.0,59.9\nb1,60.0,NaN\n",
        )
        .unwrap();
        let manifest = write_manifest(dir.path(), &[("c0", "c0.csv")]);

        let err = ingest_csv(&manifest).unwrap_err();
        match err {
            DatasetError::NonFiniteValue { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, 2);
            }
            other => panic!("expected NonFiniteValue, got {other:?}"),
        }
    }

    #[test]
    fn ragged_row_reports_counts() {
        let dir = TempDir::new().unwrap();
        fs::write(
            dir.path().join("c0.csv"),
            "bus,0.0,0.1,0.2\nb0,60.0,59.9,59.95\nb1,60.0,59.8\n",
        )
        .unwrap();
        let manifest = write_manifest(dir.path(), &[("c0", "c0.csv")]);

        let err = ingest_csv(&manifest).unwrap_err();
        match err {
            DatasetError::RaggedRow {
                row,
                expected,
                found,
                ..
            } => {
                assert_eq!(row, 3);
                assert_eq!(expected, 3);
                assert_eq!(found, 2);
            }
            other => panic!("expected RaggedRow, got {other:?}"),
        }
    }

    #[test]
    fn non_monotone_timestamps_rejected() {
        let dir = TempDir::new().unwrap();
        fs::write(
            dir.path().join("c0.csv"),
            "bus,0.0,0.2,0.1\nb0,60.0,59.9,59.95\nb1,60.0,59.8,59.9\n",
        )
        .unwrap();
        let manifest = write_manifest(dir.path(), &[("c0", "c0.csv")]);
        assert!(matches!(
            ingest_csv(&manifest),
            Err(DatasetError::NonMonotoneTimestamps { column: 3, .. })
        ));
    }

    #[test]
    fn missing_file_reports_path() {
        let dir = TempDir::new().unwrap();
        let manifest = write_manifest(dir.path(), &[("c0", "nope.csv")]);
        assert!(matches!(
            ingest_csv(&manifest),
            Err(DatasetError::Io { .. })
        ));
    }

    #[test]
    fn sample_count_mismatch_across_records() {
        let dir = TempDir::new().unwrap();
        fs::write(
            dir.path().join("c0.csv"),
            "bus,0.0,0.1,0.2\nb0,60.0,59.9,59.95\nb1,60.0,59.8,59.85\n",
        )
        .unwrap();
        fs::write(
            dir.path().join("c1.csv"),
            "bus,0.0,0.1\nb0,60.0,59.9\nb1,60.0,59.8\n",
        )
        .unwrap();
        let manifest = write_manifest(dir.path(), &[("c0", "c0.csv"), ("c1", "c1.csv")]);
        assert!(matches!(
            ingest_csv(&manifest),
            Err(DatasetError::SampleCountMismatch {
                expected: 3,
                found: 2,
                ..
            })
        ));
    }

    #[test]
    fn validate_accepts_valid_dataset() {
        let ds = Dataset {
            records: vec![
                sample_record("c0"),
                sample_record("c1"),
                sample_record("c2"),
            ],
            bus_order: vec!["b0".into(), "b1".into()],
        };
        assert!(validate_dataset(&ds).is_empty());
    }

    #[test]
    fn validate_reports_duplicate_bus() {
        let mut record = sample_record("c0");
        record.traces[1].bus_id = "b0".into();
        let ds = Dataset {
            records: vec![record],
            bus_order: vec!["b0".into(), "b1".into()],
        };
        let violations = validate_dataset(&ds);
        // The duplicate also breaks bus-set equality; exactly one duplicate entry.
        assert_eq!(
            violations
                .iter()
                .filter(|v| v.kind == ViolationKind::DuplicateBus)
                .count(),
            1
        );
    }

    #[test]
    fn validate_reports_per_record_sample_count_mismatch() {
        let mut short = sample_record("c1");
        for trace in &mut short.traces {
            trace.samples.truncate(2);
        }
        let times: Arc<[f64]> = vec![0.0, 0.1].into();
        for trace in &mut short.traces {
            trace.sample_times = Arc::clone(&times);
        }
        let ds = Dataset {
            records: vec![sample_record("c0"), short],
            bus_order: vec!["b0".into(), "b1".into()],
        };
        let violations = validate_dataset(&ds);
        let mismatches: Vec<_> = violations
            .iter()
            .filter(|v| v.kind == ViolationKind::SampleCountMismatch)
            .collect();
        assert_eq!(mismatches.len(), 1);
        assert_eq!(mismatches[0].record_id.as_deref(), Some("c1"));
    }

    #[test]
    fn reordering_manifest_changes_record_order_only() {
        let dir = TempDir::new().unwrap();
        let csv_a = "bus,0.0,0.1\nb0,60.0,59.9\nb1,60.0,59.8\n";
        let csv_b = "bus,0.0,0.1\nb0,60.0,59.7\nb1,60.0,59.6\n";
        fs::write(dir.path().join("a.csv"), csv_a).unwrap();
        fs::write(dir.path().join("b.csv"), csv_b).unwrap();

        let m1 = write_manifest(dir.path(), &[("a", "a.csv"), ("b", "b.csv")]);
        let ds1 = ingest_csv(&m1).unwrap();
        let m2 = write_manifest(dir.path(), &[("b", "b.csv"), ("a", "a.csv")]);
        let ds2 = ingest_csv(&m2).unwrap();

        assert_eq!(ds1.bus_order, ds2.bus_order);
        assert_eq!(ds1.records[0].contingency_id, "a");
        assert_eq!(ds2.records[1].contingency_id, "a");
        assert_eq!(
            ds1.records[0].traces[0].samples,
            ds2.records[1].traces[0].samples
        );
    }
}
