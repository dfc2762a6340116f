//! Synthetic space-time panels with known parameters.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::covariance::{mixture_cov, validate_specs, KernelSpec, SpatialParams};
use crate::error::{Error, Result};
use crate::linalg::cholesky;
use crate::network::{build_distance_bundle, Site, StreamNetwork};
use crate::panel::{Panel, PanelRow};
use crate::spacetime::{innovation_cov, stationary_cov, Transition};

/// Generative settings. `beta[0]` is the intercept; each further
/// coefficient gets an iid standard-normal covariate column.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSpec {
    pub beta: Vec<f64>,
    pub kernels: Vec<KernelSpec>,
    pub params: SpatialParams,
    /// Transition; a VAR coefficient vector covers observed then
    /// prediction sites.
    pub transition: Transition,
    /// Standard deviation of iid measurement noise added on top of the
    /// space-time process.
    pub extra_noise_sd: f64,
    pub n_times: usize,
    /// Fraction of observed sites masked at each time point.
    pub missing_rate: f64,
    pub seed: u64,
}

impl SimulationSpec {
    /// Tail-down exponential field with `σ²_d = 3`, `α_d = 10`, nugget 0.1,
    /// `φ = 0.8`, `β = (10, 1, 0, -1)`, extra noise sd 0.25, ten time points
    /// and 30% of entries masked per time point.
    pub fn benchmark(seed: u64) -> Self {
        use crate::covariance::{Family, Shape};
        SimulationSpec {
            beta: vec![10.0, 1.0, 0.0, -1.0],
            kernels: vec![KernelSpec::new(Family::TailDown, Shape::Exponential).expect("valid kernel")],
            params: SpatialParams { sigma2_d: 3.0, alpha_d: 10.0, sigma2_0: 0.1, ..Default::default() },
            transition: Transition::Ar(0.8),
            extra_noise_sd: 0.25,
            n_times: 10,
            missing_rate: 0.3,
            seed,
        }
    }

    pub fn covariate_names(&self) -> Vec<String> {
        (1..self.beta.len()).map(|k| format!("x{k}")).collect()
    }

    fn validate(&self, n_sites: usize) -> Result<()> {
        validate_specs(&self.kernels)?;
        if self.beta.is_empty() {
            return Err(Error::Config("beta needs at least an intercept".into()));
        }
        if self.n_times == 0 {
            return Err(Error::Config("need at least one time point".into()));
        }
        if !(0.0..1.0).contains(&self.missing_rate) {
            return Err(Error::Config(format!("missing rate must lie in [0, 1), got {}", self.missing_rate)));
        }
        if !(self.extra_noise_sd >= 0.0 && self.extra_noise_sd.is_finite()) {
            return Err(Error::Config("extra noise sd must be a non-negative number".into()));
        }
        self.transition.validate(n_sites)
    }
}

/// A simulated data set. `observed` carries the masked responses; the
/// truth panels hold every simulated value.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    pub observed: Panel,
    pub observed_truth: Panel,
    /// Prediction-site panel with the simulated responses (write it without
    /// the response column to get a prediction grid).
    pub prediction_truth: Option<Panel>,
    /// Time-major row indices of the masked entries in `observed`.
    pub masked: Vec<usize>,
}

/// Simulate responses at `obs` (and optionally `preds`) sites. The error
/// process is drawn jointly over all sites through the VAR(1) recursion:
/// `e₁ ~ N(0, V)`, `e_t = Φ e_{t-1} + η_t`, `η_t ~ N(0, Q)`.
pub fn simulate_panel(net: &StreamNetwork, obs: &[Site], preds: &[Site], spec: &SimulationSpec) -> Result<SimulatedData> {
    let sites: Vec<Site> = obs.iter().chain(preds).copied().collect();
    let n = sites.len();
    let (n_obs, t_len, p) = (obs.len(), spec.n_times, spec.beta.len());
    if n_obs == 0 {
        return Err(Error::Input("no observation sites".into()));
    }
    spec.validate(n)?;
    let bundle = build_distance_bundle(net, &sites, &sites)?;
    let sigma = mixture_cov(&spec.kernels, &spec.params, &bundle, false)?;
    let q = innovation_cov(&sigma, spec.params.sigma2_0);
    let phi = spec.transition.diagonal(n);
    let v = stationary_cov(&phi, &q)?;
    let degenerate = q.iter().all(|&x| x == 0.0);
    let (lq, lv) = if degenerate {
        (DMatrix::zeros(n, n), DMatrix::zeros(n, n))
    } else {
        (cholesky(&q, "innovation covariance")?.l(), cholesky(&v, "stationary covariance")?.l())
    };

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut normals = |k: usize| DVector::from_fn(k, |_, _| StandardNormal.sample(&mut rng));
    let mut errors = Vec::with_capacity(t_len);
    let mut e = &lv * normals(n);
    for t in 0..t_len {
        if t > 0 {
            e = DVector::from_fn(n, |i, _| phi[i] * e[i]) + &lq * normals(n);
        }
        errors.push(e.clone());
    }
    let covs: Vec<DVector<f64>> = (0..t_len).map(|_| normals(n * (p - 1))).collect();
    let noise: Vec<DVector<f64>> = (0..t_len).map(|_| normals(n)).collect();

    // Rows per site set, time-major, with the covariates of site i at time
    // t in covs[t][i*(p-1)..].
    let rows_for = |range: std::ops::Range<usize>, pid0: i64| -> Vec<PanelRow> {
        let mut rows = Vec::new();
        for t in 0..t_len {
            for i in range.clone() {
                let x: Vec<f64> = (0..p - 1).map(|k| covs[t][i * (p - 1) + k]).collect();
                let mean = spec.beta[0] + x.iter().zip(&spec.beta[1..]).map(|(a, b)| a * b).sum::<f64>();
                let y = mean + errors[t][i] + spec.extra_noise_sd * noise[t][i];
                rows.push(PanelRow {
                    loc_id: sites[i].loc_id,
                    pid: pid0 + rows.len() as i64,
                    time: t as i64 + 1,
                    y: Some(y),
                    covariates: x,
                });
            }
        }
        rows
    };
    let names = spec.covariate_names();
    let mut obs_rows = rows_for(0..n_obs, 1);
    // Panels order locations by locID; sort rows so pids follow panel order.
    obs_rows.sort_by_key(|r| (r.time, r.loc_id));
    for (k, r) in obs_rows.iter_mut().enumerate() {
        r.pid = k as i64 + 1;
    }
    let observed_truth = Panel::from_rows(obs_rows, names.clone())?;
    let prediction_truth = if preds.is_empty() {
        None
    } else {
        let mut rows = rows_for(n_obs..n, observed_truth.len() as i64 + 1);
        rows.sort_by_key(|r| (r.time, r.loc_id));
        for (k, r) in rows.iter_mut().enumerate() {
            r.pid = observed_truth.len() as i64 + 1 + k as i64;
        }
        Some(Panel::from_rows(rows, names)?)
    };

    let per_time = (n_obs as f64 * spec.missing_rate).round() as usize;
    let mut masked = Vec::new();
    for t in 0..t_len {
        let mut picked: Vec<usize> = sample(&mut rng, n_obs, per_time).into_iter().map(|i| t * n_obs + i).collect();
        picked.sort_unstable();
        masked.extend(picked);
    }
    let observed = observed_truth.with_masked(&masked);
    Ok(SimulatedData { observed, observed_truth, prediction_truth, masked })
}
