use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::linalg::cholesky;
use crate::network::DistanceBundle;
use crate::panel::Panel;
use crate::spacetime::SpaceTimePrecision;

use super::likelihood::{LikelihoodMode, Posterior};
use super::{ModelSpec, ParamState, PriorSpec};

/// Draw the missing residuals from their Gaussian full conditional given
/// the observed ones. With precision `Λ`, `r_M | r_O ~ N(-Λ_MM⁻¹ Λ_MO r_O, Λ_MM⁻¹)`.
pub(crate) fn draw_missing<R: Rng + ?Sized>(
    panel: &Panel,
    precision: &SpaceTimePrecision,
    beta: &DVector<f64>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let miss = panel.missing();
    if miss.is_empty() {
        return Ok(Vec::new());
    }
    let mean = panel.x() * beta;
    // Residuals with the missing entries zeroed, so row_dot gives Λ_MO r_O.
    let mut r = DVector::zeros(panel.len());
    for (i, v) in panel.y().iter().enumerate() {
        if let Some(v) = v {
            r[i] = v - mean[i];
        }
    }
    let m = miss.len();
    let lmm = DMatrix::from_fn(m, m, |a, b| precision.entry(miss[a], miss[b]));
    let b = DVector::from_fn(m, |a, _| precision.row_dot(miss[a], &r));
    let chol = cholesky(&lmm, "conditional precision")?;
    let cond_mean = -chol.solve(&b);
    let z = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
    // L⁻ᵀ z has covariance (L Lᵀ)⁻¹.
    let noise = chol
        .l()
        .transpose()
        .solve_upper_triangular(&z)
        .expect("Cholesky factor has a positive diagonal");
    Ok((0..m).map(|a| mean[miss[a]] + cond_mean[a] + noise[a]).collect())
}

/// One Gibbs update of the imputed responses given all other parameters.
pub fn impute_missing<R: Rng + ?Sized>(
    panel: &Panel,
    state: &ParamState,
    model: &ModelSpec,
    bundle: &DistanceBundle,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if panel.missing().is_empty() {
        return Ok(Vec::new());
    }
    let prior = PriorSpec { phi_bounds: (-1.0, 1.0), range_upper: 1.0, sd_upper: 1.0, beta_var: 1.0 };
    let post = Posterior::new(panel, model, &prior, bundle, LikelihoodMode::Full)?;
    let sf = post.spatial_factor(state)?;
    let phi = post.phi_diagonal(state);
    let stf = post.stationary_factor(&sf, &phi)?;
    draw_missing(panel, &post.precision(&sf, &stf, &phi), &state.beta, rng)
}
