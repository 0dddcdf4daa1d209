//! Time-dependent concordance and the IPCW Brier score.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::curve::StepCurve;
use crate::data::{Dataset, SurvivalRecord};
use crate::error::{Result, SurvError};
use crate::estimators::kaplan_meier;
use crate::fmt::sig6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub eval_times: Vec<f64>,
    /// NaN where a horizon has no comparable pairs (serialised as null).
    pub c_index: Vec<f64>,
    pub brier: Vec<f64>,
    pub n_pairs: Vec<usize>,
}

impl EvalReport {
    /// Mean c-index over horizons that have comparable pairs.
    pub fn mean_c_index(&self) -> f64 {
        let valid: Vec<f64> = self.c_index.iter().copied().filter(|c| !c.is_nan()).collect();
        valid.iter().sum::<f64>() / valid.len() as f64
    }

    pub fn mean_brier(&self) -> f64 {
        self.brier.iter().sum::<f64>() / self.brier.len() as f64
    }

    pub fn write_csv_path(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["time", "c_index", "brier", "n_pairs"])?;
        for h in 0..self.eval_times.len() {
            w.write_record([
                sig6(self.eval_times[h]),
                sig6(self.c_index[h]),
                sig6(self.brier[h]),
                self.n_pairs[h].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_shape(data: &Dataset, predicted: &[Vec<f64>], eval_times: &[f64]) -> Result<()> {
    if predicted.len() != data.len() {
        return Err(SurvError::DimensionMismatch(format!(
            "{} prediction rows for {} subjects",
            predicted.len(),
            data.len()
        )));
    }
    if let Some(row) = predicted.iter().position(|r| r.len() != eval_times.len()) {
        return Err(SurvError::DimensionMismatch(format!(
            "prediction row {row} has {} columns, expected {}",
            predicted[row].len(),
            eval_times.len()
        )));
    }
    Ok(())
}

/// Concordance at each horizon `t`: pairs with `T_i < T_j`, `event_i` and
/// `T_i <= t` are comparable; concordant when subject `i` has the lower
/// predicted survival at `t`, half credit for ties in prediction.
/// Returns the c-index and comparable pair count per horizon.
pub fn c_index(data: &Dataset, predicted_survival: &[Vec<f64>], eval_times: &[f64]) -> Result<(Vec<f64>, Vec<usize>)> {
    check_shape(data, predicted_survival, eval_times)?;
    let recs = data.records();
    let mut order: Vec<usize> = (0..recs.len()).collect();
    order.sort_by(|&a, &b| recs[a].time.total_cmp(&recs[b].time));

    let mut out = Vec::with_capacity(eval_times.len());
    let mut pairs = Vec::with_capacity(eval_times.len());
    for (h, &t) in eval_times.iter().enumerate() {
        let mut score = 0.0;
        let mut count = 0usize;
        for (pos, &i) in order.iter().enumerate() {
            let ri = &recs[i];
            if !ri.event || ri.time > t {
                continue;
            }
            let si = predicted_survival[i][h];
            // everyone strictly later in time
            let first_later = order[pos..].partition_point(|&j| recs[j].time <= ri.time) + pos;
            for &j in &order[first_later..] {
                let sj = predicted_survival[j][h];
                count += 1;
                if si < sj {
                    score += 1.0;
                } else if si == sj {
                    score += 0.5;
                }
            }
        }
        pairs.push(count);
        out.push(if count == 0 { f64::NAN } else { score / count as f64 });
    }
    Ok((out, pairs))
}

/// Kaplan-Meier of the censoring distribution (indicator flipped).
pub fn censoring_km(data: &Dataset) -> Result<StepCurve> {
    let flipped: Vec<SurvivalRecord> = data
        .records()
        .iter()
        .map(|r| SurvivalRecord::new(r.time, !r.event, Vec::new()))
        .collect();
    kaplan_meier(&Dataset::new(flipped, Vec::new())?)
}

/// IPCW Brier score
/// `(1/n) sum_i [S_i(t)^2 I(T_i <= t, event_i) / G(T_i-) + (1 - S_i(t))^2 I(T_i > t) / G(t)]`.
pub fn brier(
    data: &Dataset,
    predicted_survival: &[Vec<f64>],
    eval_times: &[f64],
    censor_curve: &StepCurve,
) -> Result<Vec<f64>> {
    check_shape(data, predicted_survival, eval_times)?;
    let n = data.len() as f64;
    let mut out = Vec::with_capacity(eval_times.len());
    for (h, &t) in eval_times.iter().enumerate() {
        let g_t = censor_curve.eval(t)?;
        let mut total = 0.0;
        for (i, r) in data.records().iter().enumerate() {
            let s = predicted_survival[i][h];
            if r.time <= t {
                if r.event {
                    let g = censor_curve.eval_left(r.time)?;
                    if !(g > 0.0) {
                        return Err(SurvError::CensoringSupportExhausted(r.time));
                    }
                    total += s * s / g;
                }
            } else {
                if !(g_t > 0.0) {
                    return Err(SurvError::CensoringSupportExhausted(t));
                }
                total += (1.0 - s) * (1.0 - s) / g_t;
            }
        }
        out.push(total / n);
    }
    Ok(out)
}

/// Both metrics, with the censoring curve fit on `data` itself.
pub fn evaluate(data: &Dataset, predicted_survival: &[Vec<f64>], eval_times: &[f64]) -> Result<EvalReport> {
    let (c, n_pairs) = c_index(data, predicted_survival, eval_times)?;
    let g = censoring_km(data)?;
    let b = brier(data, predicted_survival, eval_times, &g)?;
    Ok(EvalReport {
        eval_times: eval_times.to_vec(),
        c_index: c,
        brier: b,
        n_pairs,
    })
}
