//! Spatial covariance models: Euclidean, tail-up and tail-down kernels and
//! their mixture.
//!
//! All kernels are parameterized by a partial sill `sigma2` and a range
//! `alpha`; compact-support shapes vanish for distances beyond `alpha`
//! (the support is closed, `d / alpha <= 1`).

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::symmetrize;
use crate::network::DistanceBundle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    TailUp,
    TailDown,
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    Exponential,
    LinearSill,
    Spherical,
    Gaussian,
}

/// One component of a spatial mixture, e.g. `Exponential.taildown`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct KernelSpec {
    pub family: Family,
    pub shape: Shape,
}

impl KernelSpec {
    pub fn new(family: Family, shape: Shape) -> Result<Self> {
        let spec = KernelSpec { family, shape };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match (self.family, self.shape) {
            (Family::Euclidean, Shape::LinearSill) => {
                Err(Error::Config("linear-with-sill is not available for the Euclidean family".into()))
            }
            (Family::TailUp | Family::TailDown, Shape::Gaussian) => {
                Err(Error::Config(format!("gaussian shape is only available for Euclidean kernels, not {self}")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shape = match self.shape {
            Shape::Exponential => "Exponential",
            Shape::LinearSill => "LinearSill",
            Shape::Spherical => "Spherical",
            Shape::Gaussian => "Gaussian",
        };
        let family = match self.family {
            Family::TailUp => "tailup",
            Family::TailDown => "taildown",
            Family::Euclidean => "Euclid",
        };
        write!(f, "{shape}.{family}")
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (shape, family) = s
            .trim()
            .split_once('.')
            .ok_or_else(|| Error::Config(format!("kernel '{s}' should look like Shape.family")))?;
        let shape = match shape.to_ascii_lowercase().as_str() {
            "exponential" => Shape::Exponential,
            "linearsill" => Shape::LinearSill,
            "spherical" => Shape::Spherical,
            "gaussian" => Shape::Gaussian,
            other => return Err(Error::Config(format!("unknown kernel shape '{other}'"))),
        };
        let family = match family.to_ascii_lowercase().as_str() {
            "tailup" => Family::TailUp,
            "taildown" => Family::TailDown,
            "euclid" | "euclidean" => Family::Euclidean,
            other => return Err(Error::Config(format!("unknown kernel family '{other}'"))),
        };
        KernelSpec::new(family, shape)
    }
}

/// Partial sills and ranges for every family, plus the nugget.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SpatialParams {
    pub sigma2_u: f64,
    pub alpha_u: f64,
    pub sigma2_d: f64,
    pub alpha_d: f64,
    pub sigma2_e: f64,
    pub alpha_e: f64,
    pub sigma2_0: f64,
}

impl SpatialParams {
    /// `(partial sill, range)` for a family.
    pub fn family(&self, family: Family) -> (f64, f64) {
        match family {
            Family::TailUp => (self.sigma2_u, self.alpha_u),
            Family::TailDown => (self.sigma2_d, self.alpha_d),
            Family::Euclidean => (self.sigma2_e, self.alpha_e),
        }
    }
}

fn check(sigma2: f64, alpha: f64) -> Result<()> {
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return Err(Error::Config(format!("partial sill must be finite and >= 0, got {sigma2}")));
    }
    if sigma2 > 0.0 && !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Config(format!("range must be > 0 when the sill is positive, got {alpha}")));
    }
    Ok(())
}

fn within(x: f64) -> f64 {
    if x <= 1.0 {
        1.0
    } else {
        0.0
    }
}

/// Euclidean kernel at distance `d`.
pub fn euclid_kernel(shape: Shape, d: f64, sigma2: f64, alpha: f64) -> f64 {
    if sigma2 == 0.0 {
        return 0.0;
    }
    let r = d / alpha;
    match shape {
        Shape::Exponential => sigma2 * (-3.0 * r).exp(),
        Shape::Gaussian => sigma2 * (-3.0 * r * r).exp(),
        Shape::Spherical => sigma2 * (1.0 - 1.5 * r + 0.5 * r * r * r) * within(r),
        Shape::LinearSill => sigma2 * (1.0 - r) * within(r),
    }
}

/// Unweighted tail-up kernel at hydrologic distance `h`; also the
/// flow-connected branch of the tail-down kernel.
pub fn stream_kernel(shape: Shape, h: f64, sigma2: f64, alpha: f64) -> f64 {
    euclid_kernel(shape, h, sigma2, alpha)
}

/// Tail-down kernel for a flow-unconnected pair with junction distances
/// `a <= b`.
pub fn taildown_unconnected(shape: Shape, a: f64, b: f64, sigma2: f64, alpha: f64) -> f64 {
    if sigma2 == 0.0 {
        return 0.0;
    }
    let (ra, rb) = (a / alpha, b / alpha);
    match shape {
        Shape::Exponential => sigma2 * (-3.0 * (ra + rb)).exp(),
        Shape::LinearSill => sigma2 * (1.0 - rb) * within(rb),
        // Squared (1 - b/alpha) factor: continuous with the flow-connected
        // branch at a = 0.
        Shape::Spherical => sigma2 * (1.0 - 1.5 * ra + 0.5 * rb) * (1.0 - rb).powi(2) * within(rb),
        Shape::Gaussian => unreachable!("gaussian tail-down rejected by KernelSpec"),
    }
}

/// Euclidean covariance over a distance matrix.
pub fn euclid_cov(e: &DMatrix<f64>, shape: Shape, sigma2: f64, alpha: f64) -> Result<DMatrix<f64>> {
    KernelSpec::new(Family::Euclidean, shape)?;
    check(sigma2, alpha)?;
    Ok(e.map(|d| euclid_kernel(shape, d, sigma2, alpha)))
}

/// Weighted tail-up covariance; zero on flow-unconnected pairs.
pub fn tailup_cov(bundle: &DistanceBundle, shape: Shape, sigma2: f64, alpha: f64) -> Result<DMatrix<f64>> {
    KernelSpec::new(Family::TailUp, shape)?;
    check(sigma2, alpha)?;
    Ok(DMatrix::from_fn(bundle.nrows(), bundle.ncols(), |i, j| {
        if bundle.flow_con[(i, j)] {
            bundle.w[(i, j)] * stream_kernel(shape, bundle.h[(i, j)], sigma2, alpha)
        } else {
            0.0
        }
    }))
}

/// Tail-down covariance over flow-connected and flow-unconnected pairs.
pub fn taildown_cov(bundle: &DistanceBundle, shape: Shape, sigma2: f64, alpha: f64) -> Result<DMatrix<f64>> {
    KernelSpec::new(Family::TailDown, shape)?;
    check(sigma2, alpha)?;
    Ok(DMatrix::from_fn(bundle.nrows(), bundle.ncols(), |i, j| {
        if bundle.flow_con[(i, j)] {
            stream_kernel(shape, bundle.h[(i, j)], sigma2, alpha)
        } else {
            let (a, b) = bundle.junction_pair(i, j);
            taildown_unconnected(shape, a, b, sigma2, alpha)
        }
    }))
}

/// Check a mixture specification: nonempty, valid shapes, one kernel per
/// family.
pub fn validate_specs(specs: &[KernelSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::Config("at least one spatial kernel is required".into()));
    }
    for (i, s) in specs.iter().enumerate() {
        s.validate()?;
        if specs[..i].iter().any(|o| o.family == s.family) {
            return Err(Error::Config(format!("more than one kernel for family of {s}")));
        }
    }
    Ok(())
}

/// Sum of the selected component covariances. With `add_nugget` the nugget
/// is added on the diagonal of a square bundle; rectangular (cross)
/// covariances never receive it.
pub fn mixture_cov(
    specs: &[KernelSpec],
    params: &SpatialParams,
    bundle: &DistanceBundle,
    add_nugget: bool,
) -> Result<DMatrix<f64>> {
    validate_specs(specs)?;
    let mut out = DMatrix::zeros(bundle.nrows(), bundle.ncols());
    for s in specs {
        let (sigma2, alpha) = params.family(s.family);
        let part = match s.family {
            Family::TailUp => tailup_cov(bundle, s.shape, sigma2, alpha)?,
            Family::TailDown => taildown_cov(bundle, s.shape, sigma2, alpha)?,
            Family::Euclidean => euclid_cov(&bundle.e, s.shape, sigma2, alpha)?,
        };
        out += part;
    }
    if bundle.is_square() {
        symmetrize(&mut out);
        if add_nugget {
            if !(params.sigma2_0 >= 0.0) {
                return Err(Error::Config(format!("nugget must be >= 0, got {}", params.sigma2_0)));
            }
            for i in 0..out.nrows() {
                out[(i, i)] += params.sigma2_0;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_distance_bundle, fixtures::*, generate_network};
    use proptest::prelude::*;

    const ALL: [Shape; 4] = [Shape::Exponential, Shape::LinearSill, Shape::Spherical, Shape::Gaussian];

    #[test]
    fn zero_distance_is_the_sill() {
        for shape in [Shape::Exponential, Shape::Gaussian, Shape::Spherical] {
            assert_eq!(euclid_kernel(shape, 0.0, 2.5, 3.0), 2.5);
        }
    }

    #[test]
    fn exponential_value() {
        let m = euclid_cov(&DMatrix::from_element(1, 1, 1.0), Shape::Exponential, 2.0, 3.0).unwrap();
        assert!((m[(0, 0)] - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        assert!((m[(0, 0)] - 0.735759).abs() < 1e-6);
    }

    #[test]
    fn spherical_support_boundary() {
        assert_eq!(euclid_kernel(Shape::Spherical, 3.0, 2.0, 3.0), 0.0);
        assert_eq!(euclid_kernel(Shape::Spherical, 3.5, 2.0, 3.0), 0.0);
    }

    #[test]
    fn bad_range_with_positive_sill() {
        let e = DMatrix::zeros(2, 2);
        assert!(euclid_cov(&e, Shape::Exponential, 1.0, 0.0).is_err());
        assert!(euclid_cov(&e, Shape::Exponential, 0.0, 0.0).is_ok());
    }

    #[test]
    fn tailup_values() {
        let net = y_network();
        let s = y_sites();
        let b = build_distance_bundle(&net, &s, &s).unwrap();
        let c = tailup_cov(&b, Shape::Exponential, 2.0, 3.0).unwrap();
        assert_eq!(c[(0, 1)], 0.0);
        assert_eq!(c[(0, 0)], 2.0);
        // weight sqrt(0.4), h = 3
        assert!((c[(0, 2)] - 0.4f64.sqrt() * 2.0 * (-3.0f64).exp()).abs() < 1e-15);
        // exp, sill 2, range 3, h 1, w 0.5 -> 0.5 * 2 * e^-1
        assert!((0.5 * stream_kernel(Shape::Exponential, 1.0, 2.0, 3.0) - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn taildown_values() {
        assert_eq!(stream_kernel(Shape::Exponential, 0.0, 1.7, 4.0), 1.7);
        let v = taildown_unconnected(Shape::Exponential, 1.0, 2.0, 1.0, 9.0);
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.367879).abs() < 1e-6);
        assert_eq!(taildown_unconnected(Shape::LinearSill, 1.0, 5.0, 1.0, 4.0), 0.0);
        // on the Y network s1/s2 have a = 2, b = 3
        let net = y_network();
        let s = y_sites();
        let b = build_distance_bundle(&net, &s, &s).unwrap();
        let c = taildown_cov(&b, Shape::Exponential, 1.0, 9.0).unwrap();
        assert!((c[(0, 1)] - (-3.0 * 5.0 / 9.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn taildown_branches_agree_at_the_junction() {
        for shape in [Shape::Exponential, Shape::LinearSill, Shape::Spherical] {
            for b in [0.1, 0.7, 1.9, 3.3] {
                let conn = stream_kernel(shape, b, 1.3, 3.0);
                let unconn = taildown_unconnected(shape, 0.0, b, 1.3, 3.0);
                assert!((conn - unconn).abs() < 1e-14, "{shape:?} b={b}");
            }
        }
    }

    #[test]
    fn spec_parsing() {
        let k: KernelSpec = "Exponential.taildown".parse().unwrap();
        assert_eq!(k, KernelSpec { family: Family::TailDown, shape: Shape::Exponential });
        assert_eq!(k.to_string(), "Exponential.taildown");
        assert!("Gaussian.tailup".parse::<KernelSpec>().is_err());
        assert!("LinearSill.Euclid".parse::<KernelSpec>().is_err());
        assert!("Cauchy.tailup".parse::<KernelSpec>().is_err());
        assert_eq!("Spherical.Euclid".parse::<KernelSpec>().unwrap().to_string(), "Spherical.Euclid");
    }

    #[test]
    fn mixture_rules() {
        let net = y_network();
        let s = y_sites();
        let b = build_distance_bundle(&net, &s, &s).unwrap();
        let td = KernelSpec::new(Family::TailDown, Shape::Exponential).unwrap();
        let tu = KernelSpec::new(Family::TailUp, Shape::Spherical).unwrap();
        let p = SpatialParams { sigma2_0: 1.0, ..Default::default() };
        let m = mixture_cov(&[td], &p, &b, true).unwrap();
        assert_eq!(m, DMatrix::identity(3, 3));

        let p = SpatialParams { sigma2_d: 3.0, alpha_d: 10.0, sigma2_u: 1.0, alpha_u: 4.0, sigma2_0: 0.1, ..Default::default() };
        let single = mixture_cov(&[td], &p, &b, false).unwrap();
        assert_eq!(single, taildown_cov(&b, Shape::Exponential, 3.0, 10.0).unwrap());
        let both = mixture_cov(&[td, tu], &p, &b, false).unwrap();
        for i in 0..3 {
            assert!((both[(i, i)] - 4.0).abs() < 1e-15);
        }
        assert!(mixture_cov(&[td, td], &p, &b, false).is_err());
        assert!(mixture_cov(&[], &p, &b, false).is_err());
    }

    #[test]
    fn cross_covariance_has_no_nugget() {
        let net = y_network();
        let s = y_sites();
        let b = build_distance_bundle(&net, &s[..2], &s[..1]).unwrap();
        let td = KernelSpec::new(Family::TailDown, Shape::Exponential).unwrap();
        let p = SpatialParams { sigma2_d: 3.0, alpha_d: 10.0, sigma2_0: 5.0, ..Default::default() };
        let m = mixture_cov(&[td], &p, &b, true).unwrap();
        assert_eq!(m[(0, 0)], 3.0);
    }

    #[test]
    fn benchmark_setting_is_positive_definite() {
        let g = generate_network(150, 202008, 3.0, 0.3).unwrap();
        let b = build_distance_bundle(&g.network, &g.obs, &g.obs).unwrap();
        let td = KernelSpec::new(Family::TailDown, Shape::Exponential).unwrap();
        let p = SpatialParams { sigma2_d: 3.0, alpha_d: 10.0, sigma2_0: 0.1, ..Default::default() };
        let m = mixture_cov(&[td], &p, &b, true).unwrap();
        assert!(m.cholesky().is_some());
    }

    #[test]
    fn kernels_are_non_increasing() {
        for shape in ALL {
            let mut prev = f64::INFINITY;
            for k in 0..400 {
                let d = k as f64 * 0.025;
                let v = euclid_kernel(shape, d, 1.5, 4.0);
                assert!(v <= prev + 1e-15, "{shape:?} at {d}");
                prev = v;
            }
        }
        for shape in [Shape::Exponential, Shape::LinearSill, Shape::Spherical] {
            for a in [0.0, 0.5, 1.0] {
                let mut prev = f64::INFINITY;
                for k in 0..200 {
                    let b = a + k as f64 * 0.05;
                    let v = taildown_unconnected(shape, a, b, 1.0, 4.0);
                    assert!(v <= prev + 1e-15, "{shape:?} a={a} b={b}");
                    prev = v;
                }
            }
        }
    }

    fn random_specs(mask: u8, shapes: [usize; 3]) -> Vec<KernelSpec> {
        let stream = [Shape::Exponential, Shape::LinearSill, Shape::Spherical];
        let euclid = [Shape::Exponential, Shape::Spherical, Shape::Gaussian];
        let mut v = Vec::new();
        if mask & 1 != 0 {
            v.push(KernelSpec { family: Family::TailUp, shape: stream[shapes[0]] });
        }
        if mask & 2 != 0 {
            v.push(KernelSpec { family: Family::TailDown, shape: stream[shapes[1]] });
        }
        if mask & 4 != 0 {
            v.push(KernelSpec { family: Family::Euclidean, shape: euclid[shapes[2]] });
        }
        v
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn mixture_is_symmetric_pd_with_stationary_diagonal(
            n in 1usize..40,
            seed in 0u64..10_000,
            mask in 1u8..8,
            shapes in (0usize..3, 0usize..3, 0usize..3),
            sills in (0.0f64..10.0, 0.0f64..10.0, 0.0f64..10.0),
            ranges in (0.05f64..50.0, 0.05f64..50.0, 0.05f64..50.0),
            nugget in 0.001f64..1.0,
        ) {
            let g = generate_network(n, seed, 0.7, 1.0).unwrap();
            let b = build_distance_bundle(&g.network, &g.obs, &g.obs).unwrap();
            let specs = random_specs(mask, [shapes.0, shapes.1, shapes.2]);
            let p = SpatialParams {
                sigma2_u: sills.0, alpha_u: ranges.0,
                sigma2_d: sills.1, alpha_d: ranges.1,
                sigma2_e: sills.2, alpha_e: ranges.2,
                sigma2_0: nugget,
            };
            let bare = mixture_cov(&specs, &p, &b, false).unwrap();
            let expected: f64 = specs.iter().map(|s| p.family(s.family).0).sum();
            for i in 0..bare.nrows() {
                prop_assert!((bare[(i, i)] - expected).abs() < 1e-12);
                for j in 0..bare.ncols() {
                    prop_assert_eq!(bare[(i, j)], bare[(j, i)]);
                }
            }
            let full = mixture_cov(&specs, &p, &b, true).unwrap();
            prop_assert!(full.cholesky().is_some());
            let tu = tailup_cov(&b, Shape::Spherical, p.sigma2_u, p.alpha_u).unwrap();
            for i in 0..tu.nrows() {
                for j in 0..tu.ncols() {
                    prop_assert!(tu[(i, j)] <= p.sigma2_u * b.w[(i, j)] + 1e-15);
                    if !b.flow_con[(i, j)] {
                        prop_assert_eq!(tu[(i, j)], 0.0);
                    }
                }
            }
        }
    }
}
