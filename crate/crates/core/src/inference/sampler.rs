use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::covariance::Family;
use crate::error::{Error, Result};
use crate::network::DistanceBundle;
use crate::panel::Panel;

use super::draws::{ChainDraws, PosteriorDraws};
use super::impute::draw_missing;
use super::likelihood::{LikelihoodMode, Posterior, SpatialFactor};
use super::{log_prior, ModelSpec, ParamState, PriorSpec};

/// Sampler settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub iter: usize,
    pub warmup: usize,
    pub chains: usize,
    pub thin: usize,
    pub seed: u64,
    /// Initial proposal scale in the transformed space.
    pub init_scale: f64,
    /// Adapt proposal scales and covariances during warmup.
    pub adapt: bool,
    /// Warmup iterations collected before switching to the empirical
    /// proposal covariance.
    pub adapt_window: usize,
    /// Target acceptance rate; `None` uses 0.44 for one-dimensional blocks
    /// and 0.234 otherwise.
    pub target_accept: Option<f64>,
    pub threads: usize,
    /// Report progress every this many iterations (0 = never).
    pub refresh: usize,
    pub likelihood: LikelihoodMode,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            iter: 3000,
            warmup: 1500,
            chains: 3,
            thin: 1,
            seed: 1,
            init_scale: 0.1,
            adapt: true,
            adapt_window: 200,
            target_accept: None,
            threads: 1,
            refresh: 0,
            likelihood: LikelihoodMode::Full,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.iter == 0 || self.chains == 0 || self.thin == 0 || self.threads == 0 {
            return bad("iter, chains, thin and threads must be positive");
        }
        if self.warmup >= self.iter {
            return bad(&format!("warmup ({}) must be less than iter ({})", self.warmup, self.iter));
        }
        if (self.iter - self.warmup) < self.thin {
            return bad("thin leaves no kept draws");
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return bad("init_scale must be a non-negative number");
        }
        if self.adapt_window < 2 {
            return bad("adapt_window must be at least 2");
        }
        if let Some(t) = self.target_accept {
            if !(t > 0.0 && t < 1.0) {
                return bad("target acceptance must lie in (0, 1)");
            }
        }
        Ok(())
    }

    /// Kept draws per chain.
    pub fn kept(&self) -> usize {
        (self.iter - self.warmup) / self.thin
    }
}

/// Sampler progress, reported every `refresh` iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Progress {
    pub chain: usize,
    pub iter: usize,
    pub total: usize,
    pub warmup: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Coord {
    Beta(usize),
    Sigma(Family),
    Alpha(Family),
    Sigma0,
    Phi(usize),
}

impl Coord {
    fn get(self, s: &ParamState) -> f64 {
        match self {
            Coord::Beta(k) => s.beta[k],
            Coord::Sigma(f) => s.family(f).0,
            Coord::Alpha(f) => s.family(f).1,
            Coord::Sigma0 => s.sigma_0,
            Coord::Phi(k) => s.phi[k],
        }
    }

    fn set(self, s: &mut ParamState, v: f64) {
        match self {
            Coord::Beta(k) => s.beta[k] = v,
            Coord::Sigma(f) => *s.family_mut(f).0 = v,
            Coord::Alpha(f) => *s.family_mut(f).1 = v,
            Coord::Sigma0 => s.sigma_0 = v,
            Coord::Phi(k) => s.phi[k] = v,
        }
    }

    /// Support of a bounded coordinate; `None` for unbounded ones.
    fn bounds(self, prior: &PriorSpec) -> Option<(f64, f64)> {
        match self {
            Coord::Beta(_) => None,
            Coord::Sigma(_) | Coord::Sigma0 => Some((0.0, prior.sd_upper)),
            Coord::Alpha(_) => Some((0.0, prior.range_upper)),
            Coord::Phi(_) => Some(prior.phi_bounds),
        }
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Unconstrained value of `v` under a scaled logit onto `(lo, hi)`.
fn to_free(v: f64, b: Option<(f64, f64)>) -> f64 {
    match b {
        None => v,
        Some((lo, hi)) => {
            let u = (v - lo) / (hi - lo);
            (u / (1.0 - u)).ln()
        }
    }
}

/// Inverse transform and its log-Jacobian.
fn from_free(z: f64, b: Option<(f64, f64)>) -> (f64, f64) {
    match b {
        None => (z, 0.0),
        Some((lo, hi)) => {
            let u = 1.0 / (1.0 + (-z).exp());
            let log_jac = (hi - lo).ln() - softplus(-z) - softplus(z);
            (lo + (hi - lo) * u, log_jac)
        }
    }
}

/// Random-walk proposal for one block, with Robbins–Monro scale
/// adaptation and an empirical covariance after `window` samples.
#[derive(Debug, Clone)]
struct Adapter {
    log_scale: f64,
    chol: DMatrix<f64>,
    target: f64,
    n: usize,
    mean: DVector<f64>,
    m2: DMatrix<f64>,
    empirical: bool,
    accepted: usize,
    proposed: usize,
}

impl Adapter {
    fn new(base: &[f64], scale: f64, target: f64) -> Self {
        let d = base.len();
        Adapter {
            log_scale: scale.ln(),
            chol: DMatrix::from_diagonal(&DVector::from_column_slice(base)),
            target,
            n: 0,
            mean: DVector::zeros(d),
            m2: DMatrix::zeros(d, d),
            empirical: false,
            accepted: 0,
            proposed: 0,
        }
    }

    fn propose<R: Rng + ?Sized>(&self, z: &[f64], rng: &mut R) -> Vec<f64> {
        let d = z.len();
        let eps = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let step = &self.chol * eps * self.log_scale.exp();
        z.iter().zip(step.iter()).map(|(a, b)| a + b).collect()
    }

    fn adapt(&mut self, z: &[f64], accept_prob: f64, window: usize) {
        let d = z.len();
        self.n += 1;
        let n = self.n as f64;
        let x = DVector::from_column_slice(z);
        let delta = &x - &self.mean;
        self.mean += &delta / n;
        let delta2 = &x - &self.mean;
        self.m2 += &delta * delta2.transpose();
        self.log_scale += n.powf(-0.6) * (accept_prob - self.target);
        if self.n >= window && self.n % 50 == 0 {
            let cov = &self.m2 / (n - 1.0) + DMatrix::identity(d, d) * 1e-10;
            if let Some(c) = cov.cholesky() {
                self.chol = c.l();
                if !self.empirical {
                    self.empirical = true;
                    self.log_scale = (2.38 / (d as f64).sqrt()).ln();
                }
            }
        }
    }
}

struct Block {
    name: &'static str,
    coords: Vec<Coord>,
    spatial: bool,
}

fn blocks(model: &ModelSpec, n_coef: usize, n_phi: usize) -> Vec<Block> {
    let mut spatial = Vec::new();
    for f in model.families() {
        spatial.push(Coord::Sigma(f));
        spatial.push(Coord::Alpha(f));
    }
    spatial.push(Coord::Sigma0);
    vec![
        Block { name: "beta", coords: (0..n_coef).map(Coord::Beta).collect(), spatial: false },
        Block { name: "spatial", coords: spatial, spatial: true },
        Block { name: "phi", coords: (0..n_phi).map(Coord::Phi).collect(), spatial: false },
    ]
}

/// Current point of a chain: parameters, free coordinates per block and the
/// cached innovation factor.
struct Point {
    state: ParamState,
    free: Vec<Vec<f64>>,
    log_jac: Vec<f64>,
    log_post: f64,
    sf: Option<SpatialFactor>,
}

impl Point {
    fn target(&self) -> f64 {
        self.log_post + self.log_jac.iter().sum::<f64>()
    }
}

/// Log posterior of `state`, reusing `sf` when the spatial parameters are
/// unchanged. Returns the factor used so it can be cached.
fn evaluate(post: &Posterior, state: &ParamState, sf: Option<&SpatialFactor>) -> (f64, Option<SpatialFactor>) {
    let lp = log_prior(state, post.prior, post.model);
    if !lp.is_finite() || post.mode == LikelihoodMode::Flat {
        return (lp, None);
    }
    let sf = match sf {
        Some(sf) => sf.clone(),
        None => match post.spatial_factor(state) {
            Ok(sf) => sf,
            Err(_) => return (f64::NEG_INFINITY, None),
        },
    };
    let phi = post.phi_diagonal(state);
    let Ok(stf) = post.stationary_factor(&sf, &phi) else {
        return (f64::NEG_INFINITY, Some(sf));
    };
    let y = post.panel.y_filled(&state.y_missing);
    let ll = post.log_lik_factored(&sf, &stf, &phi, &state.beta, &y);
    (lp + ll, Some(sf))
}

fn ols(panel: &Panel) -> (DVector<f64>, Vec<f64>, f64) {
    let obs: Vec<usize> = (0..panel.len()).filter(|&i| panel.y()[i].is_some()).collect();
    let p = panel.n_coef();
    let x = panel.x().select_rows(&obs);
    let y = DVector::from_iterator(obs.len(), obs.iter().map(|&i| panel.y()[i].unwrap()));
    let xtx = x.transpose() * &x;
    let fallback = || (DVector::zeros(p), vec![1.0; p], crate::stats::sd(y.as_slice()).max(1e-3));
    if obs.len() <= p {
        return fallback();
    }
    let Some(chol) = xtx.clone().cholesky() else {
        return fallback();
    };
    let beta = chol.solve(&(x.transpose() * &y));
    let resid = &y - &x * &beta;
    let s2 = resid.norm_squared() / (obs.len() - p) as f64;
    let inv = chol.inverse();
    let se = (0..p).map(|k| (inv[(k, k)] * s2).sqrt().max(1e-6)).collect();
    let sd = s2.sqrt();
    (beta, se, if sd.is_finite() && sd > 0.0 { sd } else { 1.0 })
}

fn initial_state(post: &Posterior, beta: &DVector<f64>, resid_sd: f64) -> ParamState {
    let (panel, model, prior) = (post.panel, post.model, post.prior);
    let n_phi = model.n_phi(panel.n_sites());
    let mut st = ParamState::zeros(panel.n_coef(), n_phi, panel.missing().len());
    st.beta = beta.clone();
    let k = model.families().count() + 1;
    let sigma = (resid_sd / (k as f64).sqrt()).min(0.5 * prior.sd_upper);
    for f in model.families() {
        let (s, a) = st.family_mut(f);
        *s = sigma;
        *a = 0.1 * prior.range_upper;
    }
    st.sigma_0 = sigma;
    let (lo, hi) = prior.phi_bounds;
    st.phi = vec![(0.0f64).clamp(lo + 0.01 * (hi - lo), hi - 0.01 * (hi - lo)); n_phi];
    let mean = panel.x() * beta;
    st.y_missing = panel.missing().iter().map(|&i| mean[i]).collect();
    st
}

fn run_chain(
    post: &Posterior,
    config: &SamplerConfig,
    chain: usize,
    progress: &(dyn Fn(&Progress) + Sync),
) -> Result<ChainDraws> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(chain as u64 + 1);
    let (panel, prior) = (post.panel, post.prior);
    let n_phi = post.model.n_phi(panel.n_sites());
    let blocks = blocks(post.model, panel.n_coef(), n_phi);
    let (beta0, beta_se, resid_sd) = ols(panel);
    let impute = post.mode == LikelihoodMode::Full && !panel.missing().is_empty();

    let base = initial_state(post, &beta0, resid_sd);
    let free0: Vec<Vec<f64>> =
        blocks.iter().map(|b| b.coords.iter().map(|c| to_free(c.get(&base), c.bounds(prior))).collect()).collect();
    let scales: Vec<Vec<f64>> = blocks
        .iter()
        .map(|b| b.coords.iter().map(|c| if let Coord::Beta(k) = c { beta_se[*k] } else { 1.0 }).collect())
        .collect();

    let place = |state: &mut ParamState, bi: usize, z: &[f64]| -> f64 {
        let mut lj = 0.0;
        for (c, &zi) in blocks[bi].coords.iter().zip(z) {
            let (v, j) = from_free(zi, c.bounds(prior));
            c.set(state, v);
            lj += j;
        }
        lj
    };

    let mut point = None;
    for attempt in 0..=100 {
        let mut st = base.clone();
        let mut free = free0.clone();
        if attempt > 0 {
            for (b, s) in free.iter_mut().zip(&scales) {
                for (z, sc) in b.iter_mut().zip(s) {
                    *z += sc * rng.sample::<f64, _>(StandardNormal);
                }
            }
        }
        let log_jac: Vec<f64> = (0..blocks.len()).map(|bi| place(&mut st, bi, &free[bi])).collect();
        let (log_post, sf) = evaluate(post, &st, None);
        if log_post.is_finite() {
            point = Some(Point { state: st, free, log_jac, log_post, sf });
            break;
        }
    }
    let mut pt = point.ok_or_else(|| {
        Error::Numerical(format!("chain {}: log posterior is -inf at initialization after 100 retries", chain + 1))
    })?;

    let mut adapters: Vec<Adapter> = blocks
        .iter()
        .zip(&scales)
        .map(|(b, s)| {
            let d = b.coords.len();
            let target = config.target_accept.unwrap_or(if d == 1 { 0.44 } else { 0.234 });
            Adapter::new(s, config.init_scale, target)
        })
        .collect();

    let mut out = ChainDraws { iters: vec![], states: vec![], lp: vec![], acceptance: vec![] };
    for it in 0..config.iter {
        let warm = it < config.warmup;
        for (bi, block) in blocks.iter().enumerate() {
            if block.coords.is_empty() {
                continue;
            }
            let prop_z = adapters[bi].propose(&pt.free[bi], &mut rng);
            let mut prop_state = pt.state.clone();
            let lj = place(&mut prop_state, bi, &prop_z);
            let reuse = if block.spatial { None } else { pt.sf.as_ref() };
            let (lp, sf) = evaluate(post, &prop_state, reuse);
            let cur = pt.target();
            let new = lp + lj + pt.log_jac.iter().enumerate().filter(|(k, _)| *k != bi).map(|(_, v)| v).sum::<f64>();
            let log_ratio = new - cur;
            let accept_prob = if log_ratio.is_nan() { 0.0 } else { log_ratio.min(0.0).exp() };
            let u: f64 = rng.random();
            let accept = u < accept_prob;
            if accept {
                pt.state = prop_state;
                pt.free[bi] = prop_z;
                pt.log_jac[bi] = lj;
                pt.log_post = lp;
                if block.spatial {
                    pt.sf = sf;
                }
            }
            let ad = &mut adapters[bi];
            if warm {
                if config.adapt {
                    ad.adapt(&pt.free[bi], accept_prob, config.adapt_window);
                }
            } else {
                ad.proposed += 1;
                ad.accepted += accept as usize;
            }
        }
        if impute {
            let sf = pt.sf.as_ref().expect("finite log posterior implies a cached factor");
            let phi = post.phi_diagonal(&pt.state);
            let stf = post.stationary_factor(sf, &phi)?;
            let prec = post.precision(sf, &stf, &phi);
            pt.state.y_missing = draw_missing(panel, &prec, &pt.state.beta, &mut rng)?;
            let (lp, _) = evaluate(post, &pt.state, Some(sf));
            pt.log_post = lp;
        }
        if !warm && (it + 1 - config.warmup) % config.thin == 0 {
            out.iters.push(it + 1);
            out.states.push(pt.state.clone());
            out.lp.push(pt.log_post);
        }
        if config.refresh > 0 && (it + 1) % config.refresh == 0 {
            progress(&Progress { chain: chain + 1, iter: it + 1, total: config.iter, warmup: warm });
        }
    }
    out.acceptance = blocks
        .iter()
        .zip(&adapters)
        .filter(|(b, _)| !b.coords.is_empty())
        .map(|(b, a)| (b.name.to_string(), a.accepted as f64 / a.proposed.max(1) as f64))
        .collect();
    Ok(out)
}

/// Run the sampler without progress reporting.
pub fn fit(
    panel: &Panel,
    model: &ModelSpec,
    prior: &PriorSpec,
    bundle: &DistanceBundle,
    config: &SamplerConfig,
) -> Result<PosteriorDraws> {
    fit_with_progress(panel, model, prior, bundle, config, &|_| {})
}

/// Run `config.chains` independent chains, in parallel on up to
/// `config.threads` threads. Chain `c` draws from stream `c + 1` of the
/// seeded generator, so results do not depend on the thread count.
pub fn fit_with_progress(
    panel: &Panel,
    model: &ModelSpec,
    prior: &PriorSpec,
    bundle: &DistanceBundle,
    config: &SamplerConfig,
    progress: &(dyn Fn(&Progress) + Sync),
) -> Result<PosteriorDraws> {
    config.validate()?;
    let post = Posterior::new(panel, model, prior, bundle, config.likelihood)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?;
    let chains: Vec<Result<ChainDraws>> =
        pool.install(|| (0..config.chains).into_par_iter().map(|c| run_chain(&post, config, c, progress)).collect());
    let chains = chains.into_iter().collect::<Result<Vec<_>>>()?;
    let missing_pids = panel.missing().iter().map(|&i| panel.pids()[i]).collect();
    Ok(PosteriorDraws { model: model.clone(), missing_pids, chains })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::likelihood::tests::small_problem;
    use crate::spacetime::TemporalMode;

    #[test]
    fn transform_round_trip_and_jacobian() {
        let b = Some((-1.0, 1.0));
        for v in [-0.99, -0.3, 0.0, 0.7] {
            let z = to_free(v, b);
            let (back, lj) = from_free(z, b);
            assert!((back - v).abs() < 1e-12);
            // d v / d z = (hi - lo) u (1 - u)
            let u = (v + 1.0) / 2.0;
            assert!((lj - (2.0 * u * (1.0 - u)).ln()).abs() < 1e-10);
        }
        assert_eq!(from_free(3.5, None), (3.5, 0.0));
    }

    #[test]
    fn config_validation() {
        let c = SamplerConfig { iter: 100, warmup: 100, ..Default::default() };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let c = SamplerConfig::default();
        assert!(c.validate().is_ok());
        assert_eq!(c.kept(), 1500);
        assert_eq!(SamplerConfig { thin: 7, ..c }.kept(), 214);
    }

    fn quick(seed: u64) -> SamplerConfig {
        SamplerConfig { iter: 60, warmup: 30, chains: 2, thin: 3, seed, ..Default::default() }
    }

    #[test]
    fn same_seed_same_draws_any_thread_count() {
        let (panel, model, bundle, _) = small_problem(4, 3, TemporalMode::Ar, 2);
        let panel = panel.with_masked(&[2, 5]);
        let prior = PriorSpec::from_bundle(&bundle).unwrap();
        let a = fit(&panel, &model, &prior, &bundle, &quick(9)).unwrap();
        let b = fit(&panel, &model, &prior, &bundle, &SamplerConfig { threads: 2, ..quick(9) }).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.chains[0].states.len(), 10);
        assert_eq!(a.chains[0].iters[0], 33);
        assert_eq!(a.missing_pids, vec![panel.pids()[2], panel.pids()[5]]);
        let c = fit(&panel, &model, &prior, &bundle, &quick(10)).unwrap();
        assert_ne!(a, c);
        assert_ne!(a.chains[0], a.chains[1]);
    }

    #[test]
    fn zero_scale_chain_never_moves() {
        let (panel, model, bundle, _) = small_problem(4, 2, TemporalMode::Var, 3);
        let prior = PriorSpec::from_bundle(&bundle).unwrap();
        let cfg = SamplerConfig { init_scale: 0.0, adapt: false, chains: 1, ..quick(1) };
        let d = fit(&panel, &model, &prior, &bundle, &cfg).unwrap();
        let first = &d.chains[0].states[0];
        assert!(d.chains[0].states.iter().all(|s| s == first));
    }

    #[test]
    fn stored_lp_matches_posterior() {
        let (panel, model, bundle, _) = small_problem(4, 3, TemporalMode::Ar, 4);
        let panel = panel.with_masked(&[0, 7]);
        let prior = PriorSpec::from_bundle(&bundle).unwrap();
        let d = fit(&panel, &model, &prior, &bundle, &quick(2)).unwrap();
        let post = Posterior::new(&panel, &model, &prior, &bundle, LikelihoodMode::Full).unwrap();
        for ch in &d.chains {
            for (s, lp) in ch.states.iter().zip(&ch.lp) {
                assert!((post.log_density(s) - lp).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn iter_not_above_warmup_is_config_error() {
        let (panel, model, bundle, _) = small_problem(3, 2, TemporalMode::Ar, 5);
        let prior = PriorSpec::from_bundle(&bundle).unwrap();
        let cfg = SamplerConfig { iter: 10, warmup: 20, ..Default::default() };
        assert!(matches!(fit(&panel, &model, &prior, &bundle, &cfg), Err(Error::Config(_))));
    }
}
