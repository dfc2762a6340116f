//! Exceedance probabilities and accuracy scores for predictive draws.

use std::collections::HashMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::prediction::PredictionDraws;
use crate::stats::{mean, quantile_sorted};

/// Per-cell probability that the response exceeds `threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExceedanceTable {
    pub threshold: f64,
    pub rows: Vec<(i64, i64, f64)>,
}

impl ExceedanceTable {
    /// CSV `locID,time,threshold,prob`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["locID", "time", "threshold", "prob"])?;
        for (loc, time, p) in &self.rows {
            w.write_record([loc.to_string(), time.to_string(), self.threshold.to_string(), p.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fraction of draws strictly greater than the threshold; ties do not
/// count as exceedances.
pub fn exceedance_prob(pred: &PredictionDraws, threshold: f64) -> Result<ExceedanceTable> {
    if pred.n_draws() == 0 {
        return Err(Error::Input("no predictive draws".into()));
    }
    let n = pred.n_draws() as f64;
    let rows = pred
        .cells
        .iter()
        .enumerate()
        .map(|(c, &(loc, time))| {
            let hits = pred.values.row(c).iter().filter(|&&v| v > threshold).count();
            (loc, time, hits as f64 / n)
        })
        .collect();
    Ok(ExceedanceTable { threshold, rows })
}

/// Root mean squared difference between predictions and truth.
pub fn rmspe(predicted: &[f64], truth: &[f64]) -> Result<f64> {
    if predicted.len() != truth.len() || truth.is_empty() {
        return Err(Error::Input(format!(
            "rmspe needs equal, non-empty lengths (got {} and {})",
            predicted.len(),
            truth.len()
        )));
    }
    let mse = mean(&predicted.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).collect::<Vec<_>>());
    Ok(mse.sqrt())
}

/// Fraction of truths inside the equal-tailed central `level` interval of
/// each cell's draws (bounds inclusive). `level = 1` spans the full range
/// of the draws.
pub fn interval_coverage(pred: &PredictionDraws, truth: &[f64], level: f64) -> Result<f64> {
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::Config(format!("interval level must lie in (0, 1], got {level}")));
    }
    if truth.len() != pred.cells.len() || truth.is_empty() || pred.n_draws() == 0 {
        return Err(Error::Input("coverage needs one truth value per predicted cell".into()));
    }
    let tail = (1.0 - level) / 2.0;
    let inside = truth
        .iter()
        .enumerate()
        .filter(|(c, &t)| {
            let mut s = pred.samples(*c);
            s.sort_by(f64::total_cmp);
            quantile_sorted(&s, tail) <= t && t <= quantile_sorted(&s, 1.0 - tail)
        })
        .count();
    Ok(inside as f64 / truth.len() as f64)
}

/// Hold-out accuracy of predictive draws against known values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub n: usize,
    pub rmspe: f64,
    pub coverage: f64,
    pub level: f64,
}

impl Score {
    /// CSV `n,rmspe,coverage,level`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["n", "rmspe", "coverage", "level"])?;
        w.write_record([self.n.to_string(), self.rmspe.to_string(), self.coverage.to_string(), self.level.to_string()])?;
        w.flush()?;
        Ok(())
    }
}

/// Score the posterior-mean predictions and central intervals against a
/// truth lookup keyed by `(locID, time)`. Every predicted cell must have a
/// truth value.
pub fn score(pred: &PredictionDraws, truth: &HashMap<(i64, i64), f64>, level: f64) -> Result<Score> {
    let t: Vec<f64> = pred
        .cells
        .iter()
        .map(|c| truth.get(c).copied().ok_or_else(|| Error::Input(format!("no truth for locID {} time {}", c.0, c.1))))
        .collect::<Result<_>>()?;
    let means: Vec<f64> = (0..pred.cells.len()).map(|c| mean(&pred.samples(c))).collect();
    Ok(Score { n: t.len(), rmspe: rmspe(&means, &t)?, coverage: interval_coverage(pred, &t, level)?, level })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn pd(rows: &[&[f64]]) -> PredictionDraws {
        let n = rows[0].len();
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        PredictionDraws {
            cells: (0..rows.len()).map(|i| (i as i64 + 1, 1)).collect(),
            values: DMatrix::from_row_slice(rows.len(), n, &flat),
            sources: (1..=n).map(|k| (1, k)).collect(),
        }
    }

    #[test]
    fn exceedance_examples() {
        let t = exceedance_prob(&pd(&[&[14.0, 15.0, 16.0]]), 13.0).unwrap();
        assert_eq!(t.rows, vec![(1, 1, 1.0)]);
        let t = exceedance_prob(&pd(&[&[12.0, 14.0]]), 13.0).unwrap();
        assert_eq!(t.rows[0].2, 0.5);
        let t = exceedance_prob(&pd(&[&[13.0, 14.0]]), 13.0).unwrap();
        assert_eq!(t.rows[0].2, 0.5);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "locID,time,threshold,prob\n1,1,13,0.5\n");
    }

    #[test]
    fn rmspe_examples() {
        assert_eq!(rmspe(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmspe(&[1.0, 1.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert!(rmspe(&[1.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn coverage_examples() {
        let p = pd(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        assert_eq!(interval_coverage(&p, &[2.0, 5.0], 0.95).unwrap(), 1.0);
        assert_eq!(interval_coverage(&p, &[40.0, 50.0], 0.95).unwrap(), 0.0);
        assert_eq!(interval_coverage(&p, &[3.0, 6.0], 1.0).unwrap(), 1.0);
        assert!(interval_coverage(&p, &[2.0, 5.0], 0.0).is_err());
        assert!(interval_coverage(&p, &[2.0, 5.0], 1.2).is_err());
        let truth = HashMap::from([((1, 1), 2.0), ((2, 1), 7.0)]);
        let s = score(&p, &truth, 0.95).unwrap();
        assert_eq!(s.n, 2);
        assert_eq!(s.coverage, 0.5);
        assert!((s.rmspe - (2.0f64).sqrt()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn exceedance_monotone(draws in prop::collection::vec(-10.0f64..10.0, 1..40), a in -12.0f64..12.0, b in -12.0f64..12.0) {
            let p = pd(&[&draws]);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let plo = exceedance_prob(&p, lo).unwrap().rows[0].2;
            let phi = exceedance_prob(&p, hi).unwrap().rows[0].2;
            prop_assert!(phi <= plo);
            prop_assert!((0.0..=1.0).contains(&plo));
        }

        #[test]
        fn full_level_covers_any_draw(draws in prop::collection::vec(-10.0f64..10.0, 1..40), k in 0usize..40) {
            let p = pd(&[&draws]);
            let t = draws[k % draws.len()];
            prop_assert_eq!(interval_coverage(&p, &[t], 1.0).unwrap(), 1.0);
        }
    }
}
