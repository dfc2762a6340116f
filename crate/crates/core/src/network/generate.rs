//! Random binary-branching networks with systematically placed sites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{SegmentRecord, Site, StreamNetwork, OUTLET};
use crate::error::{Error, Result};

/// A synthetic network together with its observation and prediction sites.
#[derive(Debug, Clone)]
pub struct GeneratedNetwork {
    pub network: StreamNetwork,
    pub obs: Vec<Site>,
    pub preds: Vec<Site>,
}

struct Geometry {
    start: (f64, f64),
    angle: f64,
}

/// Grow a random tree of `n_segments` segments by repeatedly splitting a
/// uniformly chosen headwater into two new headwaters, then place sites every
/// `obs_spacing` / `pred_spacing` units of hydrologic distance.
///
/// Segment lengths are uniform on `[0.5, 1.5]`. Each headwater carries a
/// uniform `[0.5, 1.5]` contribution and a segment's afv is the sum of the
/// contributions upstream of it, scaled so the outlet segment has afv 1.
/// When only one segment remains to be added it extends a headwater without
/// branching. Observation sites get locIDs `1..=n_obs`, prediction sites
/// continue from `n_obs + 1`.
pub fn generate_network(
    n_segments: usize,
    seed: u64,
    obs_spacing: f64,
    pred_spacing: f64,
) -> Result<GeneratedNetwork> {
    if n_segments == 0 {
        return Err(Error::Config("n_segments must be at least 1".into()));
    }
    if !(obs_spacing > 0.0) || !(pred_spacing > 0.0) {
        return Err(Error::Config("site spacings must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut parent: Vec<Option<usize>> = vec![None];
    let mut length = vec![rng.random_range(0.5..=1.5)];
    let mut geom = vec![Geometry { start: (0.0, 0.0), angle: std::f64::consts::FRAC_PI_2 }];
    let mut leaves = vec![0usize];
    while parent.len() < n_segments {
        let leaf = leaves.swap_remove(rng.random_range(0..leaves.len()));
        let end = {
            let g = &geom[leaf];
            (g.start.0 + length[leaf] * g.angle.cos(), g.start.1 + length[leaf] * g.angle.sin())
        };
        let n_children = (n_segments - parent.len()).min(2);
        for k in 0..n_children {
            let turn = rng.random_range(0.2..0.7);
            let angle = match (n_children, k) {
                (1, _) => geom[leaf].angle,
                (_, 0) => geom[leaf].angle + turn,
                _ => geom[leaf].angle - turn,
            };
            parent.push(Some(leaf));
            length.push(rng.random_range(0.5..=1.5));
            geom.push(Geometry { start: end, angle });
            leaves.push(parent.len() - 1);
        }
    }

    // Children always have larger indices than their parents, so a reverse
    // sweep accumulates headwater contributions downstream.
    let n = parent.len();
    let mut afv = vec![0.0; n];
    let mut is_leaf = vec![true; n];
    for p in parent.iter().flatten() {
        is_leaf[*p] = false;
    }
    for i in (0..n).rev() {
        if is_leaf[i] {
            afv[i] = rng.random_range(0.5..=1.5);
        }
        if let Some(p) = parent[i] {
            afv[p] += afv[i];
        }
    }
    let total = afv[0];
    let segments: Vec<SegmentRecord> = (0..n)
        .map(|i| SegmentRecord {
            rid: i as i64 + 1,
            to_rid: parent[i].map_or(OUTLET, |p| p as i64 + 1),
            length: length[i],
            afv: afv[i] / total,
        })
        .collect();
    let network = StreamNetwork::new(segments)?;

    let obs = place_sites(&network, &geom, obs_spacing, 1);
    let preds = place_sites(&network, &geom, pred_spacing, obs.len() as i64 + 1);
    Ok(GeneratedNetwork { network, obs, preds })
}

/// Sites at `upDist = (k + 1/2) * spacing` for every integer `k` that falls
/// strictly inside a segment's span.
fn place_sites(net: &StreamNetwork, geom: &[Geometry], spacing: f64, first_id: i64) -> Vec<Site> {
    let mut sites = Vec::new();
    for (i, seg) in net.segments().iter().enumerate() {
        let lo = net.down_node(i);
        let hi = net.up_node(i);
        let mut k = ((lo / spacing) - 0.5).floor().max(0.0) as u64;
        loop {
            let u = (k as f64 + 0.5) * spacing;
            if u > hi {
                break;
            }
            if u > lo {
                let along = u - lo;
                let g = &geom[i];
                sites.push(Site {
                    loc_id: first_id + sites.len() as i64,
                    rid: seg.rid,
                    up_dist: u,
                    x: g.start.0 + along * g.angle.cos(),
                    y: g.start.1 + along * g.angle.sin(),
                });
            }
            k += 1;
        }
    }
    sites
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_segment() {
        let g = generate_network(1, 3, 0.2, 0.1).unwrap();
        assert_eq!(g.network.len(), 1);
        assert!(!g.obs.is_empty());
        let b = crate::network::build_distance_bundle(&g.network, &g.obs, &g.obs).unwrap();
        assert!(b.flow_con.iter().all(|&c| c));
    }

    #[test]
    fn fifty_site_network() {
        let g = generate_network(150, 202008, 3.0, 0.3).unwrap();
        assert_eq!(g.network.len(), 150);
        assert_eq!(g.network.outlet_count(), 1);
        assert!((40..=60).contains(&g.obs.len()), "{} obs sites", g.obs.len());
        assert!((400..=600).contains(&g.preds.len()), "{} pred sites", g.preds.len());
        g.network.validate_sites(&g.obs).unwrap();
        g.network.validate_sites(&g.preds).unwrap();
        assert!(g.network.warnings().is_empty());
        assert_eq!(g.preds[0].loc_id, g.obs.len() as i64 + 1);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_network(40, 11, 1.0, 0.5).unwrap();
        let b = generate_network(40, 11, 1.0, 0.5).unwrap();
        let c = generate_network(40, 12, 1.0, 0.5).unwrap();
        assert_eq!(a.network.segments(), b.network.segments());
        assert_eq!(a.obs, b.obs);
        assert_eq!(a.preds, b.preds);
        assert_ne!(a.network.segments(), c.network.segments());
    }

    #[test]
    fn segment_counts_are_exact() {
        for n in 1..30 {
            let g = generate_network(n, n as u64, 1.0, 1.0).unwrap();
            assert_eq!(g.network.len(), n);
            assert_eq!(g.network.outlet_count(), 1);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(generate_network(0, 1, 1.0, 1.0).is_err());
        assert!(generate_network(3, 1, 0.0, 1.0).is_err());
    }
}
