//! Right-censored survival records and the `time,event,<covariates...>` CSV
//! schema used for ingestion and for simulated datasets.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SurvError};
use crate::fmt::sig6;

/// One subject: observed follow-up time, event indicator, covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    pub time: f64,
    pub event: bool,
    pub covariates: Vec<f64>,
}

impl SurvivalRecord {
    pub fn new(time: f64, event: bool, covariates: Vec<f64>) -> Self {
        Self {
            time,
            event,
            covariates,
        }
    }
}

/// An ordered collection of records. The record index is the subject id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    records: Vec<SurvivalRecord>,
    covariate_names: Vec<String>,
}

impl Dataset {
    pub fn new(records: Vec<SurvivalRecord>, covariate_names: Vec<String>) -> Result<Self> {
        if records.is_empty() {
            return Err(SurvError::EmptyDataset);
        }
        let p = covariate_names.len();
        for (i, r) in records.iter().enumerate() {
            if !(r.time.is_finite() && r.time >= 0.0) {
                return Err(SurvError::InvalidInput(format!(
                    "record {i}: time must be finite and nonnegative, got {}",
                    r.time
                )));
            }
            if r.covariates.len() != p {
                return Err(SurvError::DimensionMismatch(format!(
                    "record {i} has {} covariates, expected {p}",
                    r.covariates.len()
                )));
            }
            if r.covariates.iter().any(|z| !z.is_finite()) {
                return Err(SurvError::InvalidInput(format!("record {i}: non-finite covariate")));
            }
        }
        Ok(Self {
            records,
            covariate_names,
        })
    }

    /// Records without covariates, named nothing. Handy for estimator-only work.
    pub fn from_times(times: &[f64], events: &[bool]) -> Result<Self> {
        if times.len() != events.len() {
            return Err(SurvError::DimensionMismatch("times and events differ in length".into()));
        }
        let records = times
            .iter()
            .zip(events)
            .map(|(&t, &e)| SurvivalRecord::new(t, e, Vec::new()))
            .collect();
        Self::new(records, Vec::new())
    }

    /// Default names `z1..zp`.
    pub fn default_names(p: usize) -> Vec<String> {
        (1..=p).map(|k| format!("z{k}")).collect()
    }

    pub fn records(&self) -> &[SurvivalRecord] {
        &self.records
    }

    pub fn record(&self, i: usize) -> &SurvivalRecord {
        &self.records[i]
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_covariates(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.time).collect()
    }

    pub fn events(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.event).collect()
    }

    pub fn n_events(&self) -> usize {
        self.records.iter().filter(|r| r.event).count()
    }

    pub fn censoring_fraction(&self) -> f64 {
        1.0 - self.n_events() as f64 / self.len() as f64
    }

    pub fn max_time(&self) -> f64 {
        self.records.iter().map(|r| r.time).fold(0.0, f64::max)
    }

    /// Records at the given indices, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let records = indices.iter().map(|&i| self.records[i].clone()).collect();
        Self::new(records, self.covariate_names.clone())
    }

    /// Same records restricted to the named covariate columns.
    pub fn select_covariates(&self, names: &[String]) -> Result<Self> {
        let cols = names
            .iter()
            .map(|name| {
                self.covariate_names
                    .iter()
                    .position(|c| c == name)
                    .ok_or_else(|| SurvError::InvalidInput(format!("unknown covariate {name}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let records = self
            .records
            .iter()
            .map(|r| SurvivalRecord::new(r.time, r.event, cols.iter().map(|&c| r.covariates[c]).collect()))
            .collect();
        Self::new(records, names.to_vec())
    }

    /// Seeded random split; `train_fraction` of subjects (rounded) go to the first set.
    pub fn split(&self, train_fraction: f64, seed: u64) -> Result<(Self, Self)> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(SurvError::InvalidInput(format!(
                "train fraction must lie in (0,1), got {train_fraction}"
            )));
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        idx.shuffle(&mut rng);
        let n_train = ((self.len() as f64) * train_fraction).round() as usize;
        if n_train == 0 || n_train == self.len() {
            return Err(SurvError::InvalidInput("split leaves one side empty".into()));
        }
        let mut train = idx[..n_train].to_vec();
        let mut test = idx[n_train..].to_vec();
        train.sort_unstable();
        test.sort_unstable();
        Ok((self.subset(&train)?, self.subset(&test)?))
    }

    pub fn read_csv_path(path: &Path, drop_incomplete: bool) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, drop_incomplete)
    }

    /// Parse the ingestion schema. Missing cells are an error unless
    /// `drop_incomplete` is set, in which case the row is skipped.
    pub fn read_csv<R: Read>(reader: R, drop_incomplete: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 || &headers[0] != "time" || &headers[1] != "event" {
            return Err(SurvError::Schema {
                row: 0,
                column: headers.get(0).unwrap_or("").to_string(),
                message: "header must start with `time,event`".into(),
            });
        }
        let names: Vec<String> = headers.iter().skip(2).map(str::to_string).collect();
        let mut records = Vec::new();
        for (k, row) in rdr.records().enumerate() {
            let row = row?;
            // 1-based data row numbering, header excluded
            let line = k + 1;
            if row.len() != headers.len() {
                return Err(SurvError::Schema {
                    row: line,
                    column: "*".into(),
                    message: format!("expected {} cells, found {}", headers.len(), row.len()),
                });
            }
            if row.iter().any(|c| c.is_empty() || c.eq_ignore_ascii_case("na")) {
                if drop_incomplete {
                    continue;
                }
                let col = row
                    .iter()
                    .position(|c| c.is_empty() || c.eq_ignore_ascii_case("na"))
                    .unwrap_or(0);
                return Err(SurvError::Schema {
                    row: line,
                    column: headers[col].to_string(),
                    message: "missing value".into(),
                });
            }
            let num = |col: usize| -> Result<f64> {
                row[col].parse::<f64>().map_err(|_| SurvError::Schema {
                    row: line,
                    column: headers[col].to_string(),
                    message: format!("not a number: {:?}", &row[col]),
                })
            };
            let time = num(0)?;
            if !(time.is_finite() && time >= 0.0) {
                return Err(SurvError::Schema {
                    row: line,
                    column: "time".into(),
                    message: "time must be finite and nonnegative".into(),
                });
            }
            let event = match &row[1] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(SurvError::Schema {
                        row: line,
                        column: "event".into(),
                        message: format!("event must be 0 or 1, got {other:?}"),
                    })
                }
            };
            let covariates = (2..row.len()).map(num).collect::<Result<Vec<_>>>()?;
            if let Some(c) = covariates.iter().position(|z| !z.is_finite()) {
                return Err(SurvError::Schema {
                    row: line,
                    column: headers[c + 2].to_string(),
                    message: "non-finite value".into(),
                });
            }
            records.push(SurvivalRecord::new(time, event, covariates));
        }
        Self::new(records, names)
    }

    pub fn write_csv_path(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["time".to_string(), "event".to_string()];
        header.extend(self.covariate_names.iter().cloned());
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![sig6(r.time), if r.event { "1" } else { "0" }.to_string()];
            row.extend(r.covariates.iter().map(|&z| sig6(z)));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
