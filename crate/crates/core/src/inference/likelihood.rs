use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::covariance::mixture_cov;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, half_log_det, inv_quad, mvn_logpdf, LN_2PI};
use crate::network::DistanceBundle;
use crate::panel::Panel;
use crate::spacetime::{innovation_cov, stationary_cov, SpaceTimePrecision, TemporalMode};

use super::{log_prior, ModelSpec, ParamState, PriorSpec};

/// Whether the sampler targets the posterior or only the prior (a constant
/// likelihood, used to validate the transforms).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LikelihoodMode {
    #[default]
    Full,
    Flat,
}

/// Factorized innovation covariance `Q = Σ + σ²₀ I`.
#[derive(Debug, Clone)]
pub(crate) struct SpatialFactor {
    pub q: DMatrix<f64>,
    pub chol: Cholesky<f64, Dyn>,
}

/// Factor of the stationary covariance `V`. With a common coefficient
/// `V = Q / (1 - φ²)`, so the innovation factor is reused.
#[derive(Debug, Clone)]
pub(crate) enum StationaryFactor {
    ScaledQ(f64),
    Own(Cholesky<f64, Dyn>),
}

/// The posterior target for one panel: data, model, priors and the
/// observed-site distance bundle.
#[derive(Debug, Clone, Copy)]
pub struct Posterior<'a> {
    pub panel: &'a Panel,
    pub model: &'a ModelSpec,
    pub prior: &'a PriorSpec,
    pub bundle: &'a DistanceBundle,
    pub mode: LikelihoodMode,
}

impl<'a> Posterior<'a> {
    pub fn new(
        panel: &'a Panel,
        model: &'a ModelSpec,
        prior: &'a PriorSpec,
        bundle: &'a DistanceBundle,
        mode: LikelihoodMode,
    ) -> Result<Self> {
        if !bundle.is_square() || bundle.row_ids != panel.loc_ids() {
            return Err(Error::Input("distance bundle does not match the panel's locations".into()));
        }
        prior.validate()?;
        Ok(Posterior { panel, model, prior, bundle, mode })
    }

    pub(crate) fn spatial_factor(&self, state: &ParamState) -> Result<SpatialFactor> {
        let p = state.spatial_params();
        let sigma = mixture_cov(&self.model.kernels, &p, self.bundle, false)?;
        let q = innovation_cov(&sigma, p.sigma2_0);
        let chol = cholesky(&q, "innovation covariance")?;
        Ok(SpatialFactor { q, chol })
    }

    pub(crate) fn stationary_factor(&self, sf: &SpatialFactor, phi: &[f64]) -> Result<StationaryFactor> {
        match self.model.mode {
            TemporalMode::Ar => {
                let c = 1.0 - phi[0] * phi[0];
                if !(c > 0.0) {
                    return Err(Error::Numerical("non-stationary autoregressive coefficient".into()));
                }
                Ok(StationaryFactor::ScaledQ(c))
            }
            TemporalMode::Var => {
                let v = stationary_cov(phi, &sf.q)?;
                Ok(StationaryFactor::Own(cholesky(&v, "stationary covariance")?))
            }
        }
    }

    pub(crate) fn phi_diagonal(&self, state: &ParamState) -> Vec<f64> {
        state.transition(self.model.mode).diagonal(self.panel.n_sites())
    }

    /// Precision of the stacked residuals for the current factors.
    pub(crate) fn precision(&self, sf: &SpatialFactor, stf: &StationaryFactor, phi: &[f64]) -> SpaceTimePrecision {
        let q_inv = sf.chol.inverse();
        let v_inv = match stf {
            StationaryFactor::ScaledQ(c) => &q_inv * *c,
            StationaryFactor::Own(chol) => chol.inverse(),
        };
        SpaceTimePrecision::new(phi.to_vec(), q_inv, v_inv, self.panel.n_times())
    }

    /// Conditional-factorization log-likelihood with precomputed factors.
    pub(crate) fn log_lik_factored(
        &self,
        sf: &SpatialFactor,
        stf: &StationaryFactor,
        phi: &[f64],
        beta: &DVector<f64>,
        y: &DVector<f64>,
    ) -> f64 {
        let (s, t) = (self.panel.n_sites(), self.panel.n_times());
        let r = y - self.panel.x() * beta;
        let first = r.rows(0, s).into_owned();
        let mut ll = match stf {
            StationaryFactor::ScaledQ(c) => {
                let quad = c * inv_quad(&sf.chol, &first);
                -0.5 * (s as f64 * LN_2PI + quad) - half_log_det(&sf.chol) + 0.5 * s as f64 * c.ln()
            }
            StationaryFactor::Own(chol) => mvn_logpdf(chol, &first),
        };
        for k in 1..t {
            let innov = DVector::from_fn(s, |i, _| r[k * s + i] - phi[i] * r[(k - 1) * s + i]);
            ll += mvn_logpdf(&sf.chol, &innov);
        }
        ll
    }

    /// Log-likelihood of the panel with missing entries filled from
    /// `state.y_missing`.
    pub fn log_likelihood(&self, state: &ParamState) -> Result<f64> {
        let n_phi = self.model.n_phi(self.panel.n_sites());
        state.check_shape(self.panel.n_coef(), n_phi, self.panel.missing().len())?;
        let sf = self.spatial_factor(state)?;
        let phi = self.phi_diagonal(state);
        let stf = self.stationary_factor(&sf, &phi)?;
        let y = self.panel.y_filled(&state.y_missing);
        Ok(self.log_lik_factored(&sf, &stf, &phi, &state.beta, &y))
    }

    /// Unnormalized log posterior (prior plus likelihood in `Full` mode);
    /// `-inf` outside the support or when a factorization fails.
    pub fn log_density(&self, state: &ParamState) -> f64 {
        let lp = log_prior(state, self.prior, self.model);
        if !lp.is_finite() || self.mode == LikelihoodMode::Flat {
            return lp;
        }
        match self.log_likelihood(state) {
            Ok(ll) => lp + ll,
            Err(_) => f64::NEG_INFINITY,
        }
    }
}

/// `log N(y₁; X₁β, V) + Σ_{t≥2} log N(y_t; μ_t, Q)` for the given state.
pub fn log_likelihood(
    panel: &Panel,
    state: &ParamState,
    model: &ModelSpec,
    bundle: &DistanceBundle,
) -> Result<f64> {
    let prior = PriorSpec::from_bundle(bundle).unwrap_or(PriorSpec {
        phi_bounds: (-1.0, 1.0),
        range_upper: 1.0,
        sd_upper: 100.0,
        beta_var: 1000.0,
    });
    Posterior::new(panel, model, &prior, bundle, LikelihoodMode::Full)?.log_likelihood(state)
}
