//! VAR(1) space-time structure with a diagonal transition matrix.
//!
//! Residuals `e_t = y_t - X_t β` follow `e_t = Φ e_{t-1} + η_t` with
//! `η_t ~ N(0, Q)`, `Q = Σ + σ²₀ I`, and `e_1` drawn from the stationary
//! marginal `V` solving `V = Φ V Φᵀ + Q`. Stacked vectors are time-major
//! with the spatial index fastest, so the joint covariance in AR mode is
//! `Σ_var ⊗ Q`.

use nalgebra::{Cholesky, DMatrix, DMatrixView, DVector, Dyn};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, symmetrize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemporalMode {
    /// One autoregressive coefficient shared by every location.
    Ar,
    /// A separate coefficient per location.
    Var,
}

impl std::str::FromStr for TemporalMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ar" => Ok(TemporalMode::Ar),
            "var" => Ok(TemporalMode::Var),
            other => Err(Error::Config(format!("unknown temporal mode '{other}' (expected ar or var)"))),
        }
    }
}

/// Autoregressive coefficients for the diagonal transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Transition {
    Ar(f64),
    Var(Vec<f64>),
}

impl Transition {
    pub fn mode(&self) -> TemporalMode {
        match self {
            Transition::Ar(_) => TemporalMode::Ar,
            Transition::Var(_) => TemporalMode::Var,
        }
    }

    /// Check stationarity and, for VAR, the number of locations.
    pub fn validate(&self, n_sites: usize) -> Result<()> {
        let phis: &[f64] = match self {
            Transition::Ar(p) => std::slice::from_ref(p),
            Transition::Var(v) => {
                if v.len() != n_sites {
                    return Err(Error::Config(format!(
                        "VAR transition has {} coefficients for {n_sites} locations",
                        v.len()
                    )));
                }
                v
            }
        };
        check_stationary(phis)
    }

    /// Diagonal of the transition matrix for `n_sites` locations.
    pub fn diagonal(&self, n_sites: usize) -> Vec<f64> {
        match self {
            Transition::Ar(p) => vec![*p; n_sites],
            Transition::Var(v) => v.clone(),
        }
    }
}

fn check_stationary(phi: &[f64]) -> Result<()> {
    match phi.iter().find(|p| !(p.abs() < 1.0)) {
        Some(p) => Err(Error::Config(format!("autoregressive coefficient {p} is not in (-1, 1)"))),
        None => Ok(()),
    }
}

/// The `S x S` diagonal transition matrix.
pub fn build_transition(spec: &Transition, n_sites: usize) -> Result<DMatrix<f64>> {
    spec.validate(n_sites)?;
    Ok(DMatrix::from_diagonal(&DVector::from_vec(spec.diagonal(n_sites))))
}

/// `μ_t = X_t β + Φ (y_{t-1} - X_{t-1} β)`.
pub fn conditional_mean(
    x_t: DMatrixView<'_, f64>,
    x_prev: DMatrixView<'_, f64>,
    y_prev: &DVector<f64>,
    beta: &DVector<f64>,
    phi: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    let s = x_t.nrows();
    if x_prev.nrows() != s || y_prev.len() != s || phi.nrows() != s || phi.ncols() != s {
        return Err(Error::Input("conditional_mean: row counts disagree".into()));
    }
    if x_t.ncols() != beta.len() || x_prev.ncols() != beta.len() {
        return Err(Error::Input("conditional_mean: design and coefficient lengths disagree".into()));
    }
    Ok(x_t * beta + phi * (y_prev - x_prev * beta))
}

/// Innovation covariance `Q = Σ + σ²₀ I`.
pub fn innovation_cov(sigma: &DMatrix<f64>, sigma2_0: f64) -> DMatrix<f64> {
    let mut q = sigma.clone();
    for i in 0..q.nrows() {
        q[(i, i)] += sigma2_0;
    }
    q
}

/// AR(1) temporal covariance `Σ_var[t, t'] = φ^|t-t'| / (1 - φ²)`.
pub fn temporal_cov(phi: f64, n_times: usize) -> Result<DMatrix<f64>> {
    check_stationary(&[phi])?;
    let scale = 1.0 / (1.0 - phi * phi);
    Ok(DMatrix::from_fn(n_times, n_times, |i, j| {
        phi.powi((i as i32 - j as i32).abs()) * scale
    }))
}

/// Stationary covariance of the VAR(1) process with diagonal transition:
/// `V[i, j] = Q[i, j] / (1 - φ_i φ_j)`.
pub fn stationary_cov(phi: &[f64], q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_stationary(phi)?;
    if phi.len() != q.nrows() {
        return Err(Error::Input("stationary_cov: transition and Q sizes disagree".into()));
    }
    Ok(DMatrix::from_fn(q.nrows(), q.ncols(), |i, j| q[(i, j)] / (1.0 - phi[i] * phi[j])))
}

/// Dense `(S·T) x (S·T)` covariance of the stacked residuals. Block
/// `(t, t + k)` is `V Φᵏ`; lower blocks are transposes.
pub fn joint_spacetime_cov(phi: &[f64], q: &DMatrix<f64>, n_times: usize) -> Result<DMatrix<f64>> {
    let v = stationary_cov(phi, q)?;
    let s = q.nrows();
    let mut out = DMatrix::zeros(s * n_times, s * n_times);
    for lag in 0..n_times {
        let block = DMatrix::from_fn(s, s, |i, j| v[(i, j)] * phi[j].powi(lag as i32));
        for t in 0..n_times - lag {
            let (r, c) = (t * s, (t + lag) * s);
            out.view_mut((r, c), (s, s)).copy_from(&block);
            if lag > 0 {
                out.view_mut((c, r), (s, s)).copy_from(&block.transpose());
            }
        }
    }
    symmetrize(&mut out);
    Ok(out)
}

/// Applies `(Σ_var ⊗ Q)⁻¹ = Σ_var⁻¹ ⊗ Q⁻¹` to time-major stacked vectors
/// using the two small factorizations.
#[derive(Debug, Clone)]
pub struct KronInverse {
    q: Cholesky<f64, Dyn>,
    temporal: Cholesky<f64, Dyn>,
}

impl KronInverse {
    pub fn new(q: Cholesky<f64, Dyn>, temporal: Cholesky<f64, Dyn>) -> Self {
        KronInverse { q, temporal }
    }

    /// Factor `Q` and the AR(1) temporal covariance.
    pub fn from_ar(q: &DMatrix<f64>, phi: f64, n_times: usize) -> Result<Self> {
        let q = cholesky(q, "spatial factor")?;
        let temporal = cholesky(&temporal_cov(phi, n_times)?, "temporal factor")?;
        Ok(KronInverse { q, temporal })
    }

    pub fn n_sites(&self) -> usize {
        self.q.l_dirty().nrows()
    }

    pub fn n_times(&self) -> usize {
        self.temporal.l_dirty().nrows()
    }

    /// `v ↦ (Σ_var⁻¹ ⊗ Q⁻¹) v`, i.e. `Q⁻¹ Y Σ_var⁻¹` on the `S x T` reshape.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let (s, t) = (self.n_sites(), self.n_times());
        assert_eq!(v.len(), s * t, "vector length must be S*T");
        let y = DMatrix::from_column_slice(s, t, v.as_slice());
        let left = self.q.solve(&y);
        let right = self.temporal.solve(&left.transpose()).transpose();
        DVector::from_column_slice(right.as_slice())
    }

    /// Column-wise [`KronInverse::apply`].
    pub fn apply_matrix(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for (j, col) in m.column_iter().enumerate() {
            out.set_column(j, &self.apply(&col.into_owned()));
        }
        out
    }
}

/// Block-tridiagonal precision of the stacked residuals, built from
/// `Q⁻¹` and `V⁻¹` without forming the dense joint covariance.
#[derive(Debug, Clone)]
pub struct SpaceTimePrecision {
    phi: Vec<f64>,
    q_inv: DMatrix<f64>,
    v_inv: DMatrix<f64>,
    n_times: usize,
}

impl SpaceTimePrecision {
    pub fn new(phi: Vec<f64>, q_inv: DMatrix<f64>, v_inv: DMatrix<f64>, n_times: usize) -> Self {
        assert_eq!(phi.len(), q_inv.nrows());
        SpaceTimePrecision { phi, q_inv, v_inv, n_times }
    }

    /// Build from the innovation covariance.
    pub fn from_innovation(phi: &[f64], q: &DMatrix<f64>, n_times: usize) -> Result<Self> {
        let q_inv = cholesky(q, "innovation covariance")?.inverse();
        let v_inv = cholesky(&stationary_cov(phi, q)?, "stationary covariance")?.inverse();
        Ok(Self::new(phi.to_vec(), q_inv, v_inv, n_times))
    }

    fn n_sites(&self) -> usize {
        self.phi.len()
    }

    /// Entry of block `(ta, tb)` at spatial position `(i, j)`.
    fn block_entry(&self, ta: usize, tb: usize, i: usize, j: usize) -> f64 {
        let (a, phi, last) = (&self.q_inv, &self.phi, self.n_times - 1);
        if ta == tb {
            let lagged = phi[i] * a[(i, j)] * phi[j];
            match (ta == 0, ta == last) {
                (true, true) => self.v_inv[(i, j)],
                (true, false) => self.v_inv[(i, j)] + lagged,
                (false, true) => a[(i, j)],
                (false, false) => a[(i, j)] + lagged,
            }
        } else if ta == tb + 1 {
            -a[(i, j)] * phi[j]
        } else if tb == ta + 1 {
            -phi[i] * a[(i, j)]
        } else {
            0.0
        }
    }

    /// Precision entry between stacked rows `r` and `c`.
    pub fn entry(&self, r: usize, c: usize) -> f64 {
        let s = self.n_sites();
        self.block_entry(r / s, c / s, r % s, c % s)
    }

    /// Row `r` of the precision applied to `v`.
    pub fn row_dot(&self, r: usize, v: &DVector<f64>) -> f64 {
        let s = self.n_sites();
        let (t, i) = (r / s, r % s);
        let lo = t.saturating_sub(1);
        let hi = (t + 1).min(self.n_times - 1);
        let mut acc = 0.0;
        for tb in lo..=hi {
            for j in 0..s {
                acc += self.block_entry(t, tb, i, j) * v[tb * s + j];
            }
        }
        acc
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.n_sites() * self.n_times;
        DMatrix::from_fn(n, n, |r, c| self.entry(r, c))
    }
}
