use std::io::Write;

use crate::error::{Error, Result};
use crate::stats::{mean, Summary};

use super::PosteriorDraws;

/// Posterior summary of one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q50: f64,
    pub q975: f64,
    pub rhat: f64,
    pub ess: f64,
}

fn var(xs: &[f64]) -> f64 {
    crate::stats::sd(xs).powi(2)
}

/// Split-R̂: each chain is cut in half (dropping a middle draw when the
/// length is odd) and the potential scale reduction is computed over the
/// halves. `NaN` when every draw is identical.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let mut halves: Vec<&[f64]> = Vec::new();
    for c in chains {
        let h = c.len() / 2;
        halves.push(&c[..h]);
        halves.push(&c[c.len() - h..]);
    }
    let n = halves.iter().map(|h| h.len()).min().unwrap_or(0);
    if n < 2 {
        return f64::NAN;
    }
    let means: Vec<f64> = halves.iter().map(|h| mean(&h[..n])).collect();
    let w = mean(&halves.iter().map(|h| var(&h[..n])).collect::<Vec<_>>());
    let b_over_n = var(&means);
    let nf = n as f64;
    let var_plus = (nf - 1.0) / nf * w + b_over_n;
    (var_plus / w).sqrt()
}

fn autocov(x: &[f64], m: f64, lag: usize) -> f64 {
    let n = x.len();
    (0..n - lag).map(|i| (x[i] - m) * (x[i + lag] - m)).sum::<f64>() / n as f64
}

/// Effective sample size from the multi-chain autocorrelation estimate,
/// truncated with Geyer's initial monotone positive sequence.
pub fn ess(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    if m == 0 || n < 4 {
        return f64::NAN;
    }
    let chains: Vec<&[f64]> = chains.iter().map(|c| &c[..n]).collect();
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let nf = n as f64;
    let w = mean(&chains.iter().map(|c| var(c)).collect::<Vec<_>>());
    let b_over_n = if m > 1 { var(&means) } else { 0.0 };
    let var_plus = (nf - 1.0) / nf * w + b_over_n;
    if !(var_plus > 0.0) {
        return f64::NAN;
    }
    let rho = |t: usize| {
        let acov = mean(&chains.iter().zip(&means).map(|(c, &mu)| autocov(c, mu, t)).collect::<Vec<_>>());
        1.0 - (w - acov) / var_plus
    };
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut t = 0;
    while t + 1 < n {
        let pair = rho(t) + rho(t + 1);
        if pair < 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sum += pair;
        prev = pair;
        t += 2;
    }
    let tau = (-1.0 + 2.0 * sum).max(1.0 / (m as f64 * nf).log10().max(1.0));
    m as f64 * nf / tau
}

/// Summaries of every parameter column and of the log posterior.
pub fn summarize_draws(draws: &PosteriorDraws) -> Result<Vec<ParamSummary>> {
    if draws.is_empty() {
        return Err(Error::Input("no posterior draws to summarize".into()));
    }
    let mut names = draws.param_names();
    let rows: Vec<Vec<Vec<f64>>> =
        draws.chains.iter().map(|c| c.states.iter().map(|s| draws.param_values(s)).collect()).collect();
    let mut traces: Vec<Vec<Vec<f64>>> = (0..names.len())
        .map(|j| rows.iter().map(|c| c.iter().map(|r| r[j]).collect()).collect())
        .collect();
    names.push("lp".into());
    traces.push(draws.chains.iter().map(|c| c.lp.clone()).collect());
    Ok(names
        .into_iter()
        .zip(traces)
        .map(|(name, chains)| {
            let all: Vec<f64> = chains.iter().flatten().copied().collect();
            let s = Summary::of(&all);
            ParamSummary {
                name,
                mean: s.mean,
                sd: s.sd,
                q025: s.q025,
                q50: s.q50,
                q975: s.q975,
                rhat: split_rhat(&chains),
                ess: ess(&chains),
            }
        })
        .collect())
}

/// CSV with header `param,mean,sd,q2.5,q50,q97.5,rhat,ess`.
pub fn write_summary_csv<W: Write>(rows: &[ParamSummary], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["param", "mean", "sd", "q2.5", "q50", "q97.5", "rhat", "ess"])?;
    for r in rows {
        w.write_record([
            r.name.clone(),
            r.mean.to_string(),
            r.sd.to_string(),
            r.q025.to_string(),
            r.q50.to_string(),
            r.q975.to_string(),
            r.rhat.to_string(),
            r.ess.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
