//! Longitudinal time-to-event data model: state sequences with right
//! censoring, JSONL persistence, chunking, and summary statistics.
//!
//! A record holds the observed states of one subject. Its duration is
//! implicit (the number of stored states) and an uncensored record means
//! the event occurred at the last stored state; the terminal state itself
//! is never materialized.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One observed covariate vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(values: Vec<f64>) -> Self {
        StateVector(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl From<Vec<f64>> for StateVector {
    fn from(values: Vec<f64>) -> Self {
        StateVector(values)
    }
}

/// An observed trajectory: ordered states plus the censoring flag.
///
/// `censored == false` means the subject reached the event at the final
/// stored state (absolute time index `duration() - 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub id: String,
    states: Vec<StateVector>,
    pub censored: bool,
}

impl SequenceRecord {
    pub fn new(id: impl Into<String>, states: Vec<StateVector>, censored: bool) -> Result<Self> {
        let id = id.into();
        if states.is_empty() {
            return Err(Error::EmptyRecord { id });
        }
        let dim = states[0].dim();
        for s in &states {
            if !s.is_finite() {
                return Err(Error::NonFinite { id });
            }
            if s.dim() != dim {
                return Err(Error::DimensionMismatch {
                    id,
                    expected: dim,
                    got: s.dim(),
                });
            }
        }
        Ok(SequenceRecord {
            id,
            states,
            censored,
        })
    }

    /// Number of stored states t; always >= 1.
    pub fn duration(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[StateVector] {
        &self.states
    }

    pub fn state(&self, index: usize) -> &StateVector {
        &self.states[index]
    }

    /// Event indicator at absolute time index `k`: 1 only at the final
    /// state of an uncensored record.
    pub fn event_indicator(&self, k: usize) -> f64 {
        if !self.censored && k + 1 == self.duration() {
            1.0
        } else {
            0.0
        }
    }
}

/// A validated collection of records sharing one feature dimension and a
/// maximum allowed duration (the horizon).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<SequenceRecord>,
    feature_dim: usize,
    horizon: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetHeader {
    feature_dim: usize,
    horizon: usize,
}

impl Dataset {
    pub fn new(records: Vec<SequenceRecord>, feature_dim: usize, horizon: usize) -> Result<Self> {
        for rec in &records {
            if rec.states[0].dim() != feature_dim {
                return Err(Error::DimensionMismatch {
                    id: rec.id.clone(),
                    expected: feature_dim,
                    got: rec.states[0].dim(),
                });
            }
            if rec.duration() > horizon {
                return Err(Error::HorizonExceeded {
                    id: rec.id.clone(),
                    duration: rec.duration(),
                    horizon,
                });
            }
        }
        Ok(Dataset {
            records,
            feature_dim,
            horizon,
        })
    }

    pub fn records(&self) -> &[SequenceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Dataset restricted to the first `n` records (order preserved).
    pub fn take(&self, n: usize) -> Dataset {
        Dataset {
            records: self.records.iter().take(n).cloned().collect(),
            feature_dim: self.feature_dim,
            horizon: self.horizon,
        }
    }

    /// Dataset with the records at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            feature_dim: self.feature_dim,
            horizon: self.horizon,
        }
    }

    /// Reads a dataset from the JSONL format written by [`Dataset::save`].
    ///
    /// Line 1 carries `{"feature_dim": .., "horizon": ..}`; every further
    /// line is one record. All invariants are re-validated and errors
    /// report the offending line number.
    pub fn load(path: impl AsRef<Path>) -> Result<Dataset> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = BufReader::new(file);
        let mut lines = reader.lines().enumerate();

        let header: DatasetHeader = match lines.next() {
            Some((_, Ok(line))) => serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
                path: path.to_path_buf(),
                line: 1,
                msg: e.to_string(),
            })?,
            Some((_, Err(e))) => return Err(Error::io(path, e)),
            None => {
                return Err(Error::MalformedLine {
                    path: path.to_path_buf(),
                    line: 1,
                    msg: "missing header line".into(),
                })
            }
        };

        let mut records = Vec::new();
        for (idx, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let raw: SequenceRecord =
                serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    msg: e.to_string(),
                })?;
            // rebuild through the validating constructor
            let rec = SequenceRecord::new(raw.id, raw.states, raw.censored)?;
            if rec.states[0].dim() != header.feature_dim {
                return Err(Error::DimensionMismatch {
                    id: rec.id,
                    expected: header.feature_dim,
                    got: rec.states[0].dim(),
                });
            }
            records.push(rec);
        }
        Dataset::new(records, header.feature_dim, header.horizon)
    }

    /// Writes JSONL: header line then one record per line, LF-terminated,
    /// floats at full round-trip precision.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let header = DatasetHeader {
            feature_dim: self.feature_dim,
            horizon: self.horizon,
        };
        let write_err = |e: std::io::Error| Error::io(path, e);
        serde_json::to_writer(&mut w, &header).map_err(|e| write_err(e.into()))?;
        w.write_all(b"\n").map_err(write_err)?;
        for rec in &self.records {
            serde_json::to_writer(&mut w, rec).map_err(|e| write_err(e.into()))?;
            w.write_all(b"\n").map_err(write_err)?;
        }
        w.flush().map_err(write_err)
    }
}

/// Splits every record into consecutive chunks of at most `chunk_len`
/// states. Only the final chunk of an uncensored record keeps the event;
/// all other chunks are censored. Chunk ids are `"{id}#{index}"`.
pub fn chunk_sequences(ds: &Dataset, chunk_len: usize) -> Result<Dataset> {
    if chunk_len < 2 {
        return Err(Error::invalid_config("chunk_len must be >= 2"));
    }
    let mut out = Vec::new();
    for rec in ds.records() {
        let t = rec.duration();
        let n_chunks = t.div_ceil(chunk_len);
        if n_chunks == 1 {
            out.push(rec.clone());
            continue;
        }
        for (idx, chunk) in rec.states().chunks(chunk_len).enumerate() {
            let last = idx + 1 == n_chunks;
            let censored = if last { rec.censored } else { true };
            out.push(SequenceRecord::new(
                format!("{}#{}", rec.id, idx),
                chunk.to_vec(),
                censored,
            )?);
        }
    }
    Dataset::new(out, ds.feature_dim(), ds.horizon().min(chunk_len))
}

/// Summary counts for a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n: usize,
    pub feature_dim: usize,
    pub horizon: usize,
    pub max_duration: usize,
    pub n_censored: usize,
    /// `n_censored / n`; absent for an empty dataset.
    pub censoring_fraction: Option<f64>,
}

pub fn dataset_stats(ds: &Dataset) -> DatasetStats {
    let n = ds.len();
    let n_censored = ds.records().iter().filter(|r| r.censored).count();
    DatasetStats {
        n,
        feature_dim: ds.feature_dim(),
        horizon: ds.horizon(),
        max_duration: ds.records().iter().map(|r| r.duration()).max().unwrap_or(0),
        n_censored,
        censoring_fraction: if n == 0 {
            None
        } else {
            Some(n_censored as f64 / n as f64)
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn rec(id: &str, states: Vec<Vec<f64>>, censored: bool) -> SequenceRecord {
        SequenceRecord::new(
            id,
            states.into_iter().map(StateVector::from).collect(),
            censored,
        )
        .unwrap()
    }

    #[test]
    fn minimal_record_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("ds.jsonl");
        std::fs::write(
            &path,
            "{\"feature_dim\":1,\"horizon\":4}\n{\"id\":\"a\",\"states\":[[0.0]],\"censored\":true}\n",
        )
        .unwrap();
        let ds = Dataset::load(&path).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.records()[0].duration(), 1);
        assert!(ds.records()[0].censored);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let r1 = rec("a", vec![vec![0.0, 1.0]], false);
        let r2 = rec("b", vec![vec![0.0, 1.0, 2.0]], false);
        let err = Dataset::new(vec![r1, r2], 2, 10).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn horizon_violation_rejected() {
        let r = rec("a", vec![vec![0.0]; 5], true);
        let err = Dataset::new(vec![r], 1, 4).unwrap_err();
        assert!(matches!(err, Error::HorizonExceeded { .. }));
    }

    #[test]
    fn non_finite_rejected() {
        let err = SequenceRecord::new(
            "a",
            vec![StateVector::from(vec![f64::NAN])],
            false,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn malformed_line_reports_number() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(
            &path,
            "{\"feature_dim\":1,\"horizon\":4}\n{\"id\":\"a\",\"states\":[[0.0]],\"censored\":true}\nnot json\n",
        )
        .unwrap();
        match Dataset::load(&path).unwrap_err() {
            Error::MalformedLine { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn empty_dataset_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        let ds = Dataset::new(vec![], 3, 7).unwrap();
        ds.save(&path).unwrap();
        let content = std::fs::read_to_string(&path).unwrap();
        assert_eq!(content.lines().count(), 1);
        let back = Dataset::load(&path).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn chunk_short_record_unchanged() {
        let r = rec("a", vec![vec![0.0]; 5], false);
        let ds = Dataset::new(vec![r.clone()], 1, 500).unwrap();
        let chunked = chunk_sequences(&ds, 100).unwrap();
        assert_eq!(chunked.records()[0], r);
    }

    #[test]
    fn chunk_boundaries_and_censoring() {
        // t=250 uncensored, chunk_len=100 -> lengths 100,100,50 with flags (true,true,false)
        let states: Vec<Vec<f64>> = (0..250).map(|i| vec![i as f64]).collect();
        let ds = Dataset::new(vec![rec("a", states, false)], 1, 300).unwrap();
        let chunked = chunk_sequences(&ds, 100).unwrap();
        let recs = chunked.records();
        assert_eq!(recs.len(), 3);
        assert_eq!(
            recs.iter().map(|r| r.duration()).collect::<Vec<_>>(),
            vec![100, 100, 50]
        );
        assert_eq!(
            recs.iter().map(|r| r.censored).collect::<Vec<_>>(),
            vec![true, true, false]
        );
        assert_eq!(recs[0].id, "a#0");

        // t=200 censored -> both chunks censored
        let states: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64]).collect();
        let ds = Dataset::new(vec![rec("b", states, true)], 1, 300).unwrap();
        let chunked = chunk_sequences(&ds, 100).unwrap();
        assert!(chunked.records().iter().all(|r| r.censored));
        assert_eq!(chunked.records().len(), 2);
    }

    #[test]
    fn chunk_reconstructs_original_states() {
        let states: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64, -(i as f64)]).collect();
        let original = rec("z", states, false);
        let ds = Dataset::new(vec![original.clone()], 2, 10).unwrap();
        let chunked = chunk_sequences(&ds, 3).unwrap();
        let mut rebuilt: Vec<StateVector> = Vec::new();
        for r in chunked.records() {
            assert!(r.id.starts_with("z#"));
            rebuilt.extend(r.states().iter().cloned());
        }
        assert_eq!(rebuilt, original.states().to_vec());
    }

    #[test]
    fn stats_fraction() {
        let ds = Dataset::new(
            vec![
                rec("a", vec![vec![0.0]], true),
                rec("b", vec![vec![0.0]], false),
            ],
            1,
            4,
        )
        .unwrap();
        let s = dataset_stats(&ds);
        assert_eq!(s.n, 2);
        assert_eq!(s.censoring_fraction, Some(0.5));

        let empty = Dataset::new(vec![], 1, 4).unwrap();
        let s = dataset_stats(&empty);
        assert_eq!(s.n, 0);
        assert_eq!(s.censoring_fraction, None);
    }
}
