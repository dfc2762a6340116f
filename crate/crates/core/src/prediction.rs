//! Simple-kriging prediction at unsampled locations from posterior draws.
//!
//! For each selected draw the residual field is kriged from the observed
//! (and imputed) responses:
//! `ŷ_P = X_P β + C_OPᵀ C_OO⁻¹ (y_O − X_O β)`. With a common
//! autoregressive coefficient `C_OO = Σ_var ⊗ Q` and
//! `C_OP = Σ_var ⊗ C(O, P)`, so the solve splits into two small
//! factorizations. Site-specific coefficients use the dense joint
//! covariance instead.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::covariance::mixture_cov;
use crate::error::{Error, Result};
use crate::inference::{ModelSpec, ParamState, PosteriorDraws};
use crate::linalg::cholesky;
use crate::network::DistanceBundle;
use crate::panel::Panel;
use crate::spacetime::{innovation_cov, joint_spacetime_cov, temporal_cov, KronInverse, TemporalMode};
use crate::stats::Summary;

/// What to predict and how.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRequest {
    /// Posterior draws to use (at most the number kept).
    pub nsamples: usize,
    /// Prediction locations per block.
    pub chunk_size: usize,
    /// Restrict to these prediction locIDs.
    pub loc_ids: Option<Vec<i64>>,
    pub seed: u64,
    /// Add `N(0, σ²₀)` noise so the output is posterior predictive.
    pub add_noise: bool,
    pub threads: usize,
}

impl Default for PredictionRequest {
    fn default() -> Self {
        PredictionRequest { nsamples: 100, chunk_size: 50, loc_ids: None, seed: 1, add_noise: true, threads: 1 }
    }
}

/// Predictive draws for a list of `(locID, time)` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionDraws {
    pub cells: Vec<(i64, i64)>,
    /// `cells x draws` matrix of predicted values.
    pub values: DMatrix<f64>,
    /// `(chain, iteration)` of each draw used, both one-based.
    pub sources: Vec<(usize, usize)>,
}

impl PredictionDraws {
    pub fn n_draws(&self) -> usize {
        self.values.ncols()
    }

    pub fn samples(&self, cell: usize) -> Vec<f64> {
        self.values.row(cell).iter().copied().collect()
    }

    /// Posterior predictive draws of the imputed responses of a fitted
    /// panel, one cell per missing entry.
    pub fn from_imputed(draws: &PosteriorDraws, panel: &Panel) -> Result<Self> {
        let miss = panel.missing();
        if draws.missing_pids.len() != miss.len() {
            return Err(Error::Input("draws do not match the panel's missing entries".into()));
        }
        let cells = miss.iter().map(|&i| (panel.loc_of_row(i), panel.time_of_row(i))).collect();
        let mut values = DMatrix::zeros(miss.len(), draws.len());
        let mut sources = Vec::new();
        for (c, ch) in draws.chains.iter().enumerate() {
            for (&it, st) in ch.iters.iter().zip(&ch.states) {
                values.set_column(sources.len(), &DVector::from_column_slice(&st.y_missing));
                sources.push((c + 1, it));
            }
        }
        Ok(PredictionDraws { cells, values, sources })
    }

    /// Long CSV `locID,time,draw,value`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["locID", "time", "draw", "value"])?;
        for (c, (loc, time)) in self.cells.iter().enumerate() {
            for k in 0..self.n_draws() {
                w.write_record([loc.to_string(), time.to_string(), (k + 1).to_string(), self.values[(c, k)].to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Read the long CSV back; cells keep first-appearance order.
    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut cells: Vec<(i64, i64)> = Vec::new();
        let mut index = std::collections::HashMap::new();
        let mut vals: Vec<Vec<(usize, f64)>> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let bad = || Error::Input(format!("bad prediction row {:?}", rec.iter().collect::<Vec<_>>()));
            if rec.len() != 4 {
                return Err(bad());
            }
            let loc: i64 = rec[0].parse().map_err(|_| bad())?;
            let time: i64 = rec[1].parse().map_err(|_| bad())?;
            let draw: usize = rec[2].parse().map_err(|_| bad())?;
            let v: f64 = rec[3].parse().map_err(|_| bad())?;
            let c = *index.entry((loc, time)).or_insert_with(|| {
                cells.push((loc, time));
                vals.push(Vec::new());
                cells.len() - 1
            });
            vals[c].push((draw, v));
        }
        let n = vals.first().map(Vec::len).unwrap_or(0);
        if cells.is_empty() || vals.iter().any(|v| v.len() != n) {
            return Err(Error::Input("prediction file must hold the same number of draws for every cell".into()));
        }
        let mut values = DMatrix::zeros(cells.len(), n);
        for (c, v) in vals.iter_mut().enumerate() {
            v.sort_by_key(|x| x.0);
            for (k, (_, x)) in v.iter().enumerate() {
                values[(c, k)] = *x;
            }
        }
        Ok(PredictionDraws { cells, values, sources: (1..=n).map(|k| (0, k)).collect() })
    }
}

/// Per-cell predictive summary.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSummary {
    pub loc_id: i64,
    pub time: i64,
    pub summary: Summary,
}

pub fn summarize_predictions(pred: &PredictionDraws) -> Vec<PredictionSummary> {
    pred.cells
        .iter()
        .enumerate()
        .map(|(c, &(loc_id, time))| PredictionSummary { loc_id, time, summary: Summary::of(&pred.samples(c)) })
        .collect()
}

/// CSV `locID,time,mean,sd,q2.5,q50,q97.5`.
pub fn write_summary_csv<W: Write>(rows: &[PredictionSummary], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["locID", "time", "mean", "sd", "q2.5", "q50", "q97.5"])?;
    for r in rows {
        let s = &r.summary;
        w.write_record([
            r.loc_id.to_string(),
            r.time.to_string(),
            s.mean.to_string(),
            s.sd.to_string(),
            s.q025.to_string(),
            s.q50.to_string(),
            s.q975.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Observed-side factorization for one draw.
enum ObsSolver {
    /// `C_OO⁻¹ r` reshaped to `S x T`, and `Σ_var`.
    Kron { weights: DMatrix<f64>, sigma_var: DMatrix<f64> },
    Dense { weights: DVector<f64>, phi_obs: Vec<f64>, phi_pred: f64 },
}

/// The kriging inputs that do not depend on the draw.
#[derive(Debug, Clone, Copy)]
pub struct KrigingSetup<'a> {
    pub model: &'a ModelSpec,
    pub obs: &'a Panel,
    pub pred: &'a Panel,
    /// Observed x observed bundle in `obs` location order.
    pub obs_bundle: &'a DistanceBundle,
    /// Observed x prediction bundle in `obs` / `pred` location order.
    pub cross_bundle: &'a DistanceBundle,
}

impl<'a> KrigingSetup<'a> {
    pub fn new(
        model: &'a ModelSpec,
        obs: &'a Panel,
        pred: &'a Panel,
        obs_bundle: &'a DistanceBundle,
        cross_bundle: &'a DistanceBundle,
    ) -> Result<Self> {
        if obs_bundle.row_ids != obs.loc_ids() || !obs_bundle.is_square() {
            return Err(Error::Input("observed distance bundle does not match the observation panel".into()));
        }
        if cross_bundle.row_ids != obs.loc_ids() || cross_bundle.col_ids != pred.loc_ids() {
            return Err(Error::Input("cross distance bundle does not match the panels".into()));
        }
        if pred.times() != obs.times() {
            return Err(Error::Input("prediction grid must cover the observed time points".into()));
        }
        if pred.n_coef() != obs.n_coef() || pred.covariate_names() != obs.covariate_names() {
            return Err(Error::Input("prediction grid must carry the model's covariates".into()));
        }
        Ok(KrigingSetup { model, obs, pred, obs_bundle, cross_bundle })
    }

    fn solver(&self, state: &ParamState, force_dense: bool) -> Result<ObsSolver> {
        let (s, t) = (self.obs.n_sites(), self.obs.n_times());
        let p = state.spatial_params();
        let q = innovation_cov(&mixture_cov(&self.model.kernels, &p, self.obs_bundle, false)?, p.sigma2_0);
        let resid = self.obs.y_filled(&state.y_missing) - self.obs.x() * &state.beta;
        match self.model.mode {
            TemporalMode::Ar if !force_dense => {
                let w = KronInverse::from_ar(&q, state.phi[0], t)?.apply(&resid);
                let weights = DMatrix::from_column_slice(s, t, w.as_slice());
                Ok(ObsSolver::Kron { weights, sigma_var: temporal_cov(state.phi[0], t)? })
            }
            _ => {
                let phi_obs = state.transition(self.model.mode).diagonal(s);
                let joint = joint_spacetime_cov(&phi_obs, &q, t)?;
                let weights = cholesky(&joint, "observed space-time covariance")?.solve(&resid);
                let phi_pred = crate::stats::mean(&phi_obs);
                Ok(ObsSolver::Dense { weights, phi_obs, phi_pred })
            }
        }
    }

    /// Kriged residuals (`chunk x T`) for prediction columns `cols`.
    fn krige_chunk(&self, state: &ParamState, solver: &ObsSolver, cols: &[usize]) -> Result<DMatrix<f64>> {
        let rows: Vec<usize> = (0..self.obs.n_sites()).collect();
        let sub = self.cross_bundle.subset(&rows, cols);
        let c = mixture_cov(&self.model.kernels, &state.spatial_params(), &sub, false)?;
        match solver {
            ObsSolver::Kron { weights, sigma_var } => Ok(c.transpose() * weights * sigma_var),
            ObsSolver::Dense { weights, phi_obs, phi_pred } => {
                let (s, t) = (self.obs.n_sites(), self.obs.n_times());
                let mut out = DMatrix::zeros(cols.len(), t);
                for (j, _) in cols.iter().enumerate() {
                    for tp in 0..t {
                        let mut acc = 0.0;
                        for to in 0..t {
                            for i in 0..s {
                                let v = c[(i, j)] / (1.0 - phi_obs[i] * phi_pred);
                                let lag = if tp >= to { phi_pred.powi((tp - to) as i32) } else { phi_obs[i].powi((to - tp) as i32) };
                                acc += v * lag * weights[to * s + i];
                            }
                        }
                        out[(j, tp)] = acc;
                    }
                }
                Ok(out)
            }
        }
    }

    /// Kriged mean `X_P β + C_OPᵀ C_OO⁻¹ (y_O − X_O β)` as a
    /// `P x T` matrix, processed in blocks of `chunk_size` locations.
    pub fn krige_mean(&self, state: &ParamState, chunk_size: usize, force_dense: bool) -> Result<DMatrix<f64>> {
        let (np, t) = (self.pred.n_sites(), self.pred.n_times());
        let solver = self.solver(state, force_dense)?;
        let xb = self.pred.x() * &state.beta;
        let mut out = DMatrix::from_fn(np, t, |j, tt| xb[tt * np + j]);
        let cols: Vec<usize> = (0..np).collect();
        for chunk in cols.chunks(chunk_size.max(1)) {
            let r = self.krige_chunk(state, &solver, chunk)?;
            for (k, &j) in chunk.iter().enumerate() {
                for tt in 0..t {
                    out[(j, tt)] += r[(k, tt)];
                }
            }
        }
        Ok(out)
    }
}

/// Indices of the draws to use: all in order when `nsamples` equals the
/// number kept, otherwise a seeded sample without replacement.
fn select_draws(total: usize, nsamples: usize, seed: u64) -> Result<Vec<usize>> {
    if nsamples == 0 {
        return Err(Error::Config("nsamples must be at least 1".into()));
    }
    if nsamples > total {
        return Err(Error::Config(format!("nsamples ({nsamples}) exceeds the {total} kept draws")));
    }
    if nsamples == total {
        return Ok((0..total).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, total, nsamples).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Posterior predictive draws at every requested prediction location and
/// time. Noise for draw `k` comes from its own seeded stream, so results
/// do not depend on chunking or thread count.
pub fn krige_predict(
    draws: &PosteriorDraws,
    setup: &KrigingSetup,
    request: &PredictionRequest,
) -> Result<PredictionDraws> {
    if request.chunk_size == 0 || request.threads == 0 {
        return Err(Error::Config("chunk_size and threads must be positive".into()));
    }
    if draws.model != *setup.model {
        return Err(Error::Input("draws were produced by a different model".into()));
    }
    let states: Vec<(usize, usize, &ParamState)> = draws
        .chains
        .iter()
        .enumerate()
        .flat_map(|(c, ch)| ch.iters.iter().zip(&ch.states).map(move |(&it, s)| (c + 1, it, s)))
        .collect();
    let chosen = select_draws(states.len(), request.nsamples, request.seed)?;
    let (np, t) = (setup.pred.n_sites(), setup.pred.n_times());
    let keep: Vec<usize> = match &request.loc_ids {
        None => (0..np).collect(),
        Some(ids) => ids
            .iter()
            .map(|id| {
                setup.pred.loc_ids().iter().position(|l| l == id).ok_or_else(|| Error::Input(format!("unknown prediction locID {id}")))
            })
            .collect::<Result<_>>()?,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(request.threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?;
    let columns: Vec<Result<DVector<f64>>> = pool.install(|| {
        chosen
            .par_iter()
            .enumerate()
            .map(|(k, &d)| {
                let state = states[d].2;
                let mean = setup.krige_mean(state, request.chunk_size, false)?;
                let mut rng = ChaCha8Rng::seed_from_u64(request.seed);
                rng.set_stream(k as u64 + 1);
                let mut col = DVector::zeros(keep.len() * t);
                for tt in 0..t {
                    for j in 0..np {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        if let Some(pos) = keep.iter().position(|&x| x == j) {
                            let noise = if request.add_noise { state.sigma_0 * z } else { 0.0 };
                            col[tt * keep.len() + pos] = mean[(j, tt)] + noise;
                        }
                    }
                }
                Ok(col)
            })
            .collect()
    });
    let mut values = DMatrix::zeros(keep.len() * t, chosen.len());
    for (k, col) in columns.into_iter().enumerate() {
        values.set_column(k, &col?);
    }
    let cells = (0..t)
        .flat_map(|tt| keep.iter().map(move |&j| (setup.pred.loc_ids()[j], setup.pred.times()[tt])))
        .collect();
    let sources = chosen.iter().map(|&d| (states[d].0, states[d].1)).collect();
    Ok(PredictionDraws { cells, values, sources })
}

/// Stationary cross-check used by tests: the dense `C_OP` for site-specific
/// coefficients.
#[cfg(test)]
fn dense_cross(c: &DMatrix<f64>, phi_obs: &[f64], phi_pred: f64, t: usize) -> DMatrix<f64> {
    let (s, p) = (c.nrows(), c.ncols());
    let v = DMatrix::from_fn(s, p, |i, j| c[(i, j)] / (1.0 - phi_obs[i] * phi_pred));
    DMatrix::from_fn(s * t, p * t, |r, col| {
        let (to, i, tp, j) = (r / s, r % s, col / p, col % p);
        let lag = if tp >= to { phi_pred.powi((tp - to) as i32) } else { phi_obs[i].powi((to - tp) as i32) };
        v[(i, j)] * lag
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{Family, KernelSpec, Shape};
    use crate::inference::ChainDraws;
    use crate::network::{build_distance_bundle, generate_network, Site};
    use crate::panel::PanelRow;
    use rand::Rng;

    struct Fixture {
        obs: Panel,
        pred: Panel,
        ob: DistanceBundle,
        cb: DistanceBundle,
        model: ModelSpec,
        state: ParamState,
    }

    fn panel_for(sites: &[Site], t: usize, rng: &mut impl Rng, with_y: bool) -> Panel {
        let mut rows = Vec::new();
        for k in 0..t {
            for s in sites {
                rows.push(PanelRow {
                    loc_id: s.loc_id,
                    pid: rows.len() as i64 + 1,
                    time: k as i64 + 1,
                    y: with_y.then(|| rng.random_range(-2.0..2.0)),
                    covariates: vec![rng.random_range(-1.0..1.0)],
                });
            }
        }
        Panel::from_rows(rows, vec!["x1".into()]).unwrap()
    }

    fn fixture(s: usize, p: usize, t: usize, mode: TemporalMode, seed: u64) -> Fixture {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = generate_network(9, seed, 0.4, 0.55).unwrap();
        let obs_sites: Vec<Site> = g.obs[..s].to_vec();
        let pred_sites: Vec<Site> = g.preds[..p].to_vec();
        let obs = panel_for(&obs_sites, t, &mut rng, true);
        let pred = panel_for(&pred_sites, t, &mut rng, false);
        let ob = build_distance_bundle(&g.network, &obs_sites, &obs_sites).unwrap();
        let cb = build_distance_bundle(&g.network, &obs_sites, &pred_sites).unwrap();
        let model = ModelSpec::new(
            vec![
                KernelSpec::new(Family::TailDown, Shape::Exponential).unwrap(),
                KernelSpec::new(Family::TailUp, Shape::LinearSill).unwrap(),
            ],
            mode,
        )
        .unwrap();
        let mut state = ParamState::zeros(2, model.n_phi(s), 0);
        state.beta = DVector::from_vec(vec![1.0, 0.5]);
        state.phi = (0..state.phi.len()).map(|_| rng.random_range(-0.8..0.9)).collect();
        state.sigma_d = 1.3;
        state.alpha_d = 2.0;
        state.sigma_u = 0.7;
        state.alpha_u = 3.0;
        state.sigma_0 = 0.3;
        Fixture { obs, pred, ob, cb, model, state }
    }

    fn dense_oracle(f: &Fixture) -> DMatrix<f64> {
        let (s, t, np) = (f.obs.n_sites(), f.obs.n_times(), f.pred.n_sites());
        let p = f.state.spatial_params();
        let q = innovation_cov(&mixture_cov(&f.model.kernels, &p, &f.ob, false).unwrap(), p.sigma2_0);
        let phi = f.state.transition(f.model.mode).diagonal(s);
        let c_oo = joint_spacetime_cov(&phi, &q, t).unwrap();
        let c = mixture_cov(&f.model.kernels, &p, &f.cb, false).unwrap();
        let c_op = dense_cross(&c, &phi, crate::stats::mean(&phi), t);
        let r = f.obs.y_filled(&[]) - f.obs.x() * &f.state.beta;
        let pred = f.pred.x() * &f.state.beta + c_op.transpose() * c_oo.try_inverse().unwrap() * r;
        DMatrix::from_fn(np, t, |j, tt| pred[tt * np + j])
    }

    #[test]
    fn kronecker_path_matches_dense_inverse() {
        for seed in 0..6 {
            let f = fixture(3 + seed as usize % 4, 1 + seed as usize % 5, 1 + seed as usize % 4, TemporalMode::Ar, seed);
            let setup = KrigingSetup::new(&f.model, &f.obs, &f.pred, &f.ob, &f.cb).unwrap();
            let fast = setup.krige_mean(&f.state, 2, false).unwrap();
            let dense = setup.krige_mean(&f.state, 2, true).unwrap();
            let oracle = dense_oracle(&f);
            assert!((&fast - &oracle).amax() < 1e-8);
            assert!((&dense - &oracle).amax() < 1e-8);
        }
    }

    #[test]
    fn var_mode_matches_dense_oracle() {
        let f = fixture(5, 4, 3, TemporalMode::Var, 2);
        let setup = KrigingSetup::new(&f.model, &f.obs, &f.pred, &f.ob, &f.cb).unwrap();
        assert!((setup.krige_mean(&f.state, 3, false).unwrap() - dense_oracle(&f)).amax() < 1e-8);
    }

    fn draws_of(f: &Fixture, n: usize) -> PosteriorDraws {
        let states: Vec<ParamState> = (0..n)
            .map(|k| {
                let mut s = f.state.clone();
                s.beta[0] += 0.01 * k as f64;
                s
            })
            .collect();
        PosteriorDraws {
            model: f.model.clone(),
            missing_pids: vec![],
            chains: vec![ChainDraws { iters: (1..=n).collect(), lp: vec![0.0; n], states, acceptance: vec![] }],
        }
    }

    #[test]
    fn chunk_and_thread_invariance() {
        let f = fixture(6, 5, 4, TemporalMode::Ar, 3);
        let setup = KrigingSetup::new(&f.model, &f.obs, &f.pred, &f.ob, &f.cb).unwrap();
        let d = draws_of(&f, 8);
        let req = PredictionRequest { nsamples: 5, chunk_size: 1, seed: 4, ..Default::default() };
        let a = krige_predict(&d, &setup, &req).unwrap();
        let b = krige_predict(&d, &setup, &PredictionRequest { chunk_size: 5, threads: 3, ..req.clone() }).unwrap();
        assert!((&a.values - &b.values).amax() < 1e-10);
        assert_eq!(a.sources, b.sources);
        assert_eq!(a.cells.len(), 5 * 4);
        let c = krige_predict(&d, &setup, &PredictionRequest { seed: 5, ..req.clone() }).unwrap();
        assert_ne!(a.values, c.values);
        let all = krige_predict(&d, &setup, &PredictionRequest { nsamples: 8, ..req.clone() }).unwrap();
        assert_eq!(all.sources, (1..=8).map(|i| (1, i)).collect::<Vec<_>>());
        assert!(krige_predict(&d, &setup, &PredictionRequest { nsamples: 9, ..req }).is_err());
    }

    #[test]
    fn subset_of_locations() {
        let f = fixture(4, 5, 2, TemporalMode::Ar, 8);
        let setup = KrigingSetup::new(&f.model, &f.obs, &f.pred, &f.ob, &f.cb).unwrap();
        let d = draws_of(&f, 3);
        let req = PredictionRequest { nsamples: 3, seed: 1, ..Default::default() };
        let full = krige_predict(&d, &setup, &req).unwrap();
        let want = f.pred.loc_ids()[2];
        let part = krige_predict(&d, &setup, &PredictionRequest { loc_ids: Some(vec![want]), ..req }).unwrap();
        assert_eq!(part.cells, vec![(want, 1), (want, 2)]);
        let full_rows: Vec<usize> = full.cells.iter().enumerate().filter(|(_, c)| c.0 == want).map(|(i, _)| i).collect();
        assert!((part.values.clone() - full.values.select_rows(&full_rows)).amax() < 1e-12);
    }

    #[test]
    fn zero_sills_give_linear_predictor() {
        let mut f = fixture(4, 3, 2, TemporalMode::Ar, 5);
        f.state.sigma_d = 0.0;
        f.state.sigma_u = 0.0;
        let setup = KrigingSetup::new(&f.model, &f.obs, &f.pred, &f.ob, &f.cb).unwrap();
        let m = setup.krige_mean(&f.state, 10, false).unwrap();
        let xb = f.pred.x() * &f.state.beta;
        for j in 0..3 {
            for t in 0..2 {
                assert!((m[(j, t)] - xb[t * 3 + j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn summaries_and_csv() {
        let pd = PredictionDraws {
            cells: vec![(7, 1), (8, 1)],
            values: DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 3.0, 3.0]),
            sources: vec![(1, 1), (1, 2)],
        };
        let s = summarize_predictions(&pd);
        assert_eq!(s[0].summary.mean, 0.0);
        assert_eq!(s[1].summary.sd, 0.0);
        let mut buf = Vec::new();
        pd.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("locID,time,draw,value\n7,1,1,-1\n"));
        let back = PredictionDraws::read_csv(&buf[..]).unwrap();
        assert_eq!(back.values, pd.values);
        assert_eq!(back.cells, pd.cells);
    }

    #[test]
    fn monte_carlo_summary() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let v: Vec<f64> = (0..n).map(|_| 5.0 + rng.sample::<f64, _>(StandardNormal)).collect();
        let pd = PredictionDraws { cells: vec![(1, 1)], values: DMatrix::from_row_slice(1, n, &v), sources: vec![(1, 1); n] };
        let s = &summarize_predictions(&pd)[0].summary;
        assert!((s.mean - 5.0).abs() < 0.03 && (s.sd - 1.0).abs() < 0.03);
    }
}
