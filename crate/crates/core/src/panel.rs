//! Long-format space-time data: one row per (location, time) with a
//! response that may be missing and a fully observed covariate vector.
//!
//! Rows are stacked time-major: all locations at the first time, then all
//! locations at the second time, and so on. Locations are ordered by
//! ascending `locID`, so entry `t * S + s` is location `s` at time `t`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use nalgebra::{DMatrix, DMatrixView, DVector};

use crate::error::{Error, Result};
use crate::network::Site;

/// One observation row before assembly.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelRow {
    pub loc_id: i64,
    pub pid: i64,
    pub time: i64,
    pub y: Option<f64>,
    pub covariates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    loc_ids: Vec<i64>,
    times: Vec<i64>,
    pids: Vec<i64>,
    y: Vec<Option<f64>>,
    x: DMatrix<f64>,
    covariate_names: Vec<String>,
    missing: Vec<usize>,
}

impl Panel {
    /// Assemble a panel from rows. The design matrix gets a leading
    /// intercept column followed by the covariates in `covariate_names`
    /// order.
    pub fn from_rows(rows: Vec<PanelRow>, covariate_names: Vec<String>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Input("panel has no rows".into()));
        }
        let k = covariate_names.len();
        let loc_ids: Vec<i64> = rows.iter().map(|r| r.loc_id).collect::<BTreeSet<_>>().into_iter().collect();
        let times: Vec<i64> = rows.iter().map(|r| r.time).collect::<BTreeSet<_>>().into_iter().collect();
        if times.windows(2).any(|w| w[1] != w[0] + 1) {
            return Err(Error::Input(format!("time index must be consecutive integers, got {times:?}")));
        }
        let (s, t) = (loc_ids.len(), times.len());
        if rows.len() != s * t {
            return Err(Error::Input(format!(
                "each location needs exactly one row per time point: {} rows for {s} locations x {t} times",
                rows.len()
            )));
        }
        let loc_pos: BTreeMap<i64, usize> = loc_ids.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        let mut slot: Vec<Option<PanelRow>> = vec![None; s * t];
        for r in rows {
            if r.covariates.len() != k {
                return Err(Error::Input(format!("row pid {} has {} covariates, expected {k}", r.pid, r.covariates.len())));
            }
            if r.covariates.iter().any(|v| !v.is_finite()) {
                return Err(Error::Input(format!("row pid {}: missing or non-finite covariate", r.pid)));
            }
            if let Some(v) = r.y {
                if !v.is_finite() {
                    return Err(Error::Input(format!("row pid {}: non-finite response", r.pid)));
                }
            }
            let idx = (r.time - times[0]) as usize * s + loc_pos[&r.loc_id];
            if slot[idx].is_some() {
                return Err(Error::Input(format!("duplicate row for locID {} at time {}", r.loc_id, r.time)));
            }
            slot[idx] = Some(r);
        }
        let rows: Vec<PanelRow> = slot.into_iter().map(|r| r.expect("counted above")).collect();
        let x = DMatrix::from_fn(s * t, k + 1, |i, j| if j == 0 { 1.0 } else { rows[i].covariates[j - 1] });
        let y: Vec<Option<f64>> = rows.iter().map(|r| r.y).collect();
        let missing = y.iter().enumerate().filter(|(_, v)| v.is_none()).map(|(i, _)| i).collect();
        Ok(Panel {
            loc_ids,
            times,
            pids: rows.iter().map(|r| r.pid).collect(),
            y,
            x,
            covariate_names,
            missing,
        })
    }

    /// Read a panel CSV (`locID,pid,time,<response>,<covariates...>`). With
    /// `response = None` the file is a prediction grid and every response
    /// is treated as missing.
    pub fn read_csv<R: Read>(reader: R, response: Option<&str>, covariates: &[String]) -> Result<Self> {
        Self::read_csv_with_time(reader, response, covariates, "time")
    }

    /// As [`Panel::read_csv`] with a custom name for the time column.
    pub fn read_csv_with_time<R: Read>(
        reader: R,
        response: Option<&str>,
        covariates: &[String],
        time_column: &str,
    ) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers()?.clone();
        let col = |name: &str| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Input(format!("column '{name}' not found")))
        };
        let (ci, cp, ct) = (col("locID")?, col("pid")?, col(time_column)?);
        let cy = response.map(col).transpose()?;
        let cx = covariates.iter().map(|c| col(c)).collect::<Result<Vec<_>>>()?;
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let int = |i: usize, what: &str| -> Result<i64> {
                rec[i].parse().map_err(|_| Error::Input(format!("bad {what} '{}'", &rec[i])))
            };
            let pid = int(cp, "pid")?;
            let y = match cy {
                Some(i) if !rec[i].is_empty() && &rec[i] != "NA" => Some(
                    rec[i].parse().map_err(|_| Error::Input(format!("row pid {pid}: bad response '{}'", &rec[i])))?,
                ),
                _ => None,
            };
            let covs = cx
                .iter()
                .zip(covariates)
                .map(|(&i, name)| {
                    if rec[i].is_empty() || &rec[i] == "NA" {
                        return Err(Error::Input(format!("row pid {pid}: missing covariate '{name}'")));
                    }
                    rec[i].parse().map_err(|_| Error::Input(format!("row pid {pid}: bad covariate '{}'", &rec[i])))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(PanelRow { loc_id: int(ci, "locID")?, pid, time: int(ct, "time")?, y, covariates: covs });
        }
        Self::from_rows(rows, covariates.to_vec())
    }

    /// Write the panel in the observation CSV format. `response = None`
    /// writes a prediction grid without a response column.
    pub fn write_csv<W: Write>(&self, writer: W, response: Option<&str>) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["locID".to_string(), "pid".into(), "time".into()];
        header.extend(response.map(str::to_string));
        header.extend(self.covariate_names.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![self.loc_of_row(i).to_string(), self.pids[i].to_string(), self.time_of_row(i).to_string()];
            if response.is_some() {
                rec.push(self.y[i].map(|v| v.to_string()).unwrap_or_default());
            }
            rec.extend((1..self.x.ncols()).map(|j| self.x[(i, j)].to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Number of spatial locations.
    pub fn n_sites(&self) -> usize {
        self.loc_ids.len()
    }

    /// Number of time points.
    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    /// Total rows, `S * T`.
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Number of regression coefficients including the intercept.
    pub fn n_coef(&self) -> usize {
        self.x.ncols()
    }

    pub fn loc_ids(&self) -> &[i64] {
        &self.loc_ids
    }

    pub fn times(&self) -> &[i64] {
        &self.times
    }

    pub fn pids(&self) -> &[i64] {
        &self.pids
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn y(&self) -> &[Option<f64>] {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// Design rows for time index `t` (zero-based).
    pub fn x_at(&self, t: usize) -> DMatrixView<'_, f64> {
        let s = self.n_sites();
        self.x.rows(t * s, s)
    }

    /// Row indices (time-major) of the missing responses.
    pub fn missing(&self) -> &[usize] {
        &self.missing
    }

    pub fn loc_of_row(&self, row: usize) -> i64 {
        self.loc_ids[row % self.n_sites()]
    }

    pub fn time_of_row(&self, row: usize) -> i64 {
        self.times[row / self.n_sites()]
    }

    /// Response vector with missing entries taken, in order, from `fill`.
    pub fn y_filled(&self, fill: &[f64]) -> DVector<f64> {
        assert_eq!(fill.len(), self.missing.len(), "one fill value per missing entry");
        let mut out = DVector::zeros(self.len());
        let mut k = 0;
        for (i, v) in self.y.iter().enumerate() {
            out[i] = match v {
                Some(v) => *v,
                None => {
                    k += 1;
                    fill[k - 1]
                }
            };
        }
        out
    }

    /// Mask additional responses (used for hold-out experiments).
    pub fn with_masked(&self, rows: &[usize]) -> Panel {
        let mut p = self.clone();
        for &r in rows {
            p.y[r] = None;
        }
        p.missing = p.y.iter().enumerate().filter(|(_, v)| v.is_none()).map(|(i, _)| i).collect();
        p
    }

    /// Sites in panel order, looked up by locID.
    pub fn sites_in_order(&self, sites: &[Site]) -> Result<Vec<Site>> {
        self.loc_ids
            .iter()
            .map(|id| {
                sites
                    .iter()
                    .find(|s| s.loc_id == *id)
                    .copied()
                    .ok_or_else(|| Error::Input(format!("locID {id} has no site record")))
            })
            .collect()
    }
}
