//! Bayesian fitting: priors, the conditional VAR(1) likelihood, Gibbs
//! imputation of missing responses, an adaptive random-walk Metropolis
//! sampler and posterior summaries.

mod draws;
mod impute;
mod likelihood;
mod prior;
mod sampler;
mod summary;

use nalgebra::DVector;

use crate::covariance::{validate_specs, Family, KernelSpec, SpatialParams};
use crate::error::{Error, Result};
use crate::spacetime::{TemporalMode, Transition};

pub use draws::{ChainDraws, PosteriorDraws};
pub use impute::impute_missing;
pub use likelihood::{log_likelihood, LikelihoodMode, Posterior};
pub use prior::{log_prior, PriorSpec};
pub use sampler::{fit, fit_with_progress, Progress, SamplerConfig};
pub use summary::{ess, split_rhat, summarize_draws, write_summary_csv, ParamSummary};

/// Families present in a model, in canonical parameter order.
pub(crate) const FAMILY_ORDER: [Family; 3] = [Family::TailUp, Family::TailDown, Family::Euclidean];

/// Spatial kernels plus the temporal mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub kernels: Vec<KernelSpec>,
    pub mode: TemporalMode,
}

impl ModelSpec {
    pub fn new(kernels: Vec<KernelSpec>, mode: TemporalMode) -> Result<Self> {
        validate_specs(&kernels)?;
        Ok(ModelSpec { kernels, mode })
    }

    pub fn has(&self, family: Family) -> bool {
        self.kernels.iter().any(|k| k.family == family)
    }

    /// Active families in canonical order (tail-up, tail-down, Euclidean).
    pub fn families(&self) -> impl Iterator<Item = Family> + '_ {
        FAMILY_ORDER.into_iter().filter(|f| self.has(*f))
    }

    /// Number of autoregressive coefficients for `n_sites` locations.
    pub fn n_phi(&self, n_sites: usize) -> usize {
        match self.mode {
            TemporalMode::Ar => 1,
            TemporalMode::Var => n_sites,
        }
    }
}

/// One point in parameter space. Standard deviations (`sigma_*`) are on
/// the response scale; partial sills are their squares. Parameters of
/// families absent from the model stay at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamState {
    pub beta: DVector<f64>,
    pub phi: Vec<f64>,
    pub sigma_u: f64,
    pub alpha_u: f64,
    pub sigma_d: f64,
    pub alpha_d: f64,
    pub sigma_e: f64,
    pub alpha_e: f64,
    pub sigma_0: f64,
    pub y_missing: Vec<f64>,
}

impl ParamState {
    /// All-zero state of the right shape.
    pub fn zeros(n_coef: usize, n_phi: usize, n_missing: usize) -> Self {
        ParamState {
            beta: DVector::zeros(n_coef),
            phi: vec![0.0; n_phi],
            sigma_u: 0.0,
            alpha_u: 0.0,
            sigma_d: 0.0,
            alpha_d: 0.0,
            sigma_e: 0.0,
            alpha_e: 0.0,
            sigma_0: 0.0,
            y_missing: vec![0.0; n_missing],
        }
    }

    pub fn spatial_params(&self) -> SpatialParams {
        SpatialParams {
            sigma2_u: self.sigma_u * self.sigma_u,
            alpha_u: self.alpha_u,
            sigma2_d: self.sigma_d * self.sigma_d,
            alpha_d: self.alpha_d,
            sigma2_e: self.sigma_e * self.sigma_e,
            alpha_e: self.alpha_e,
            sigma2_0: self.sigma_0 * self.sigma_0,
        }
    }

    pub fn transition(&self, mode: TemporalMode) -> Transition {
        match mode {
            TemporalMode::Ar => Transition::Ar(self.phi[0]),
            TemporalMode::Var => Transition::Var(self.phi.clone()),
        }
    }

    pub(crate) fn family(&self, family: Family) -> (f64, f64) {
        match family {
            Family::TailUp => (self.sigma_u, self.alpha_u),
            Family::TailDown => (self.sigma_d, self.alpha_d),
            Family::Euclidean => (self.sigma_e, self.alpha_e),
        }
    }

    pub(crate) fn family_mut(&mut self, family: Family) -> (&mut f64, &mut f64) {
        match family {
            Family::TailUp => (&mut self.sigma_u, &mut self.alpha_u),
            Family::TailDown => (&mut self.sigma_d, &mut self.alpha_d),
            Family::Euclidean => (&mut self.sigma_e, &mut self.alpha_e),
        }
    }

    pub(crate) fn check_shape(&self, n_coef: usize, n_phi: usize, n_missing: usize) -> Result<()> {
        if self.beta.len() != n_coef || self.phi.len() != n_phi || self.y_missing.len() != n_missing {
            return Err(Error::Input(format!(
                "parameter state has {} coefficients, {} phi, {} imputed values; expected {n_coef}, {n_phi}, {n_missing}",
                self.beta.len(),
                self.phi.len(),
                self.y_missing.len()
            )));
        }
        Ok(())
    }
}
