use std::io::{Read, Write};

use nalgebra::DVector;

use crate::covariance::Family;
use crate::error::{Error, Result};

use super::{ModelSpec, ParamState};

/// Kept states of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDraws {
    /// One-based sampler iteration of each kept state.
    pub iters: Vec<usize>,
    pub states: Vec<ParamState>,
    /// Log posterior (in parameter space) of each kept state.
    pub lp: Vec<f64>,
    /// Post-warmup acceptance rate per proposal block.
    pub acceptance: Vec<(String, f64)>,
}

/// Posterior draws from all chains, plus the naming information needed to
/// write and read them.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub model: ModelSpec,
    /// `pid` of each imputed response, in panel order.
    pub missing_pids: Vec<i64>,
    pub chains: Vec<ChainDraws>,
}

fn family_suffix(f: Family) -> &'static str {
    match f {
        Family::TailUp => "u",
        Family::TailDown => "d",
        Family::Euclidean => "e",
    }
}

impl PosteriorDraws {
    fn shape(&self) -> (usize, usize) {
        let s = self.chains.iter().flat_map(|c| c.states.first()).next();
        s.map(|s| (s.beta.len(), s.phi.len())).unwrap_or((0, 0))
    }

    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    /// Total number of kept states over all chains.
    pub fn len(&self) -> usize {
        self.chains.iter().map(|c| c.states.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Parameter column names, excluding `chain`, `iter` and `lp`.
    pub fn param_names(&self) -> Vec<String> {
        let (p, n_phi) = self.shape();
        let mut names: Vec<String> = (1..=p).map(|k| format!("beta[{k}]")).collect();
        if n_phi == 1 && self.model.mode == crate::spacetime::TemporalMode::Ar {
            names.push("phi".into());
        } else {
            names.extend((1..=n_phi).map(|s| format!("phi[{s}]")));
        }
        for f in self.model.families() {
            let x = family_suffix(f);
            names.push(format!("sigma_{x}"));
            names.push(format!("alpha_{x}"));
        }
        names.push("sigma_0".into());
        names.extend(self.missing_pids.iter().map(|pid| format!("y_mis[{pid}]")));
        names
    }

    /// Values of one state in [`PosteriorDraws::param_names`] order.
    pub fn param_values(&self, state: &ParamState) -> Vec<f64> {
        let mut v: Vec<f64> = state.beta.iter().copied().collect();
        v.extend(&state.phi);
        for f in self.model.families() {
            let (s, a) = state.family(f);
            v.push(s);
            v.push(a);
        }
        v.push(state.sigma_0);
        v.extend(&state.y_missing);
        v
    }

    /// Per-chain traces of parameter column `j`.
    pub fn traces(&self, j: usize) -> Vec<Vec<f64>> {
        self.chains.iter().map(|c| c.states.iter().map(|s| self.param_values(s)[j]).collect()).collect()
    }

    /// All kept states, chain by chain, with their chain index.
    pub fn iter_states(&self) -> impl Iterator<Item = (usize, &ParamState)> + '_ {
        self.chains.iter().enumerate().flat_map(|(c, ch)| ch.states.iter().map(move |s| (c, s)))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["chain".to_string(), "iter".to_string()];
        header.extend(self.param_names());
        header.push("lp".into());
        w.write_record(&header)?;
        for (c, ch) in self.chains.iter().enumerate() {
            for ((it, st), lp) in ch.iters.iter().zip(&ch.states).zip(&ch.lp) {
                let mut rec = vec![(c + 1).to_string(), it.to_string()];
                rec.extend(self.param_values(st).iter().map(|v| v.to_string()));
                rec.push(lp.to_string());
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Read draws written by [`PosteriorDraws::write_csv`] for the given
    /// model. Acceptance rates are not stored and come back empty.
    pub fn read_csv<R: Read>(reader: R, model: ModelSpec) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let col = |name: &str| header.iter().position(|h| h == name);
        let need = |name: &str| col(name).ok_or_else(|| Error::Input(format!("draws file lacks column `{name}`")));
        let indexed = |prefix: &str| -> Vec<(String, usize)> {
            header
                .iter()
                .enumerate()
                .filter_map(|(i, h)| {
                    h.strip_prefix(prefix).and_then(|rest| rest.strip_suffix(']')).map(|k| (k.to_string(), i))
                })
                .collect()
        };
        let beta_cols = indexed("beta[");
        let mut phi_cols: Vec<usize> = indexed("phi[").into_iter().map(|(_, i)| i).collect();
        if let Some(i) = col("phi") {
            phi_cols.push(i);
        }
        let expected_phi = matches!(model.mode, crate::spacetime::TemporalMode::Ar);
        if phi_cols.is_empty() || (expected_phi && phi_cols.len() != 1) {
            return Err(Error::Input("draws file does not match the temporal mode".into()));
        }
        let mis = indexed("y_mis[");
        let missing_pids = mis
            .iter()
            .map(|(k, _)| k.parse::<i64>().map_err(|_| Error::Input(format!("bad imputed column y_mis[{k}]"))))
            .collect::<Result<Vec<_>>>()?;
        let fam_cols = model
            .families()
            .map(|f| {
                let x = family_suffix(f);
                Ok((f, need(&format!("sigma_{x}"))?, need(&format!("alpha_{x}"))?))
            })
            .collect::<Result<Vec<_>>>()?;
        let (c_chain, c_iter, c_s0, c_lp) = (need("chain")?, need("iter")?, need("sigma_0")?, need("lp")?);

        let mut chains: Vec<ChainDraws> = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec[i].parse::<f64>().map_err(|_| Error::Input(format!("bad number `{}` in draws file", &rec[i])))
            };
            let chain: usize = rec[c_chain].parse().map_err(|_| Error::Input("bad chain index".into()))?;
            if chain == 0 {
                return Err(Error::Input("chain indices start at 1".into()));
            }
            while chains.len() < chain {
                chains.push(ChainDraws { iters: vec![], states: vec![], lp: vec![], acceptance: vec![] });
            }
            let mut st = ParamState::zeros(beta_cols.len(), phi_cols.len(), mis.len());
            st.beta = DVector::from_iterator(
                beta_cols.len(),
                beta_cols.iter().map(|(_, i)| num(*i)).collect::<Result<Vec<_>>>()?,
            );
            st.phi = phi_cols.iter().map(|&i| num(i)).collect::<Result<_>>()?;
            for &(f, si, ai) in &fam_cols {
                let (s, a) = st.family_mut(f);
                *s = num(si)?;
                *a = num(ai)?;
            }
            st.sigma_0 = num(c_s0)?;
            st.y_missing = mis.iter().map(|(_, i)| num(*i)).collect::<Result<_>>()?;
            let ch = &mut chains[chain - 1];
            ch.iters.push(rec[c_iter].parse().map_err(|_| Error::Input("bad iteration index".into()))?);
            ch.states.push(st);
            ch.lp.push(num(c_lp)?);
        }
        if chains.iter().all(|c| c.states.is_empty()) {
            return Err(Error::Input("draws file has no rows".into()));
        }
        Ok(PosteriorDraws { model, missing_pids, chains })
    }
}
