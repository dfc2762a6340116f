use crate::error::{Error, Result};
use crate::network::DistanceBundle;

use super::{ModelSpec, ParamState};

/// Non-informative priors: `φ ~ U(-1, 1)`, each range `~ U(0, range_upper)`,
/// each standard deviation (partial sills and nugget) `~ U(0, sd_upper)`,
/// and `β_k ~ N(0, beta_var)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorSpec {
    pub phi_bounds: (f64, f64),
    pub range_upper: f64,
    pub sd_upper: f64,
    /// Prior variance of each regression coefficient.
    pub beta_var: f64,
}

impl PriorSpec {
    /// Default priors with `range_upper = 4 * max(H)` over the observed
    /// sites. Networks whose sites share one hydrologic position fall back
    /// to the Euclidean spread.
    pub fn from_bundle(bundle: &DistanceBundle) -> Result<Self> {
        let mut spread = bundle.max_h();
        if spread <= 0.0 {
            spread = bundle.e.iter().copied().fold(0.0, f64::max);
        }
        if !(spread > 0.0) {
            return Err(Error::Config("cannot derive a range prior: all sites coincide".into()));
        }
        Ok(PriorSpec { phi_bounds: (-1.0, 1.0), range_upper: 4.0 * spread, sd_upper: 100.0, beta_var: 1000.0 })
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.phi_bounds;
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !(lo < hi) || lo < -1.0 || hi > 1.0 || !ok(self.range_upper) || !ok(self.sd_upper) || !ok(self.beta_var) {
            return Err(Error::Config(format!("invalid prior specification {self:?}")));
        }
        Ok(())
    }
}

fn uniform(x: f64, lo: f64, hi: f64) -> f64 {
    if x > lo && x < hi {
        -(hi - lo).ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Log prior density of the model's active parameters; `-inf` outside the
/// support.
pub fn log_prior(state: &ParamState, prior: &PriorSpec, model: &ModelSpec) -> f64 {
    let (plo, phi_hi) = prior.phi_bounds;
    let mut lp: f64 = state.phi.iter().map(|&p| uniform(p, plo, phi_hi)).sum();
    for f in model.families() {
        let (sigma, alpha) = state.family(f);
        lp += uniform(sigma, 0.0, prior.sd_upper);
        // The range support is closed at the top.
        lp += if alpha > 0.0 && alpha <= prior.range_upper { -prior.range_upper.ln() } else { f64::NEG_INFINITY };
    }
    lp += uniform(state.sigma_0, 0.0, prior.sd_upper);
    let norm = -0.5 * (std::f64::consts::TAU * prior.beta_var).ln();
    lp + state.beta.iter().map(|b| norm - b * b / (2.0 * prior.beta_var)).sum::<f64>()
}
