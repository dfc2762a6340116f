use std::io::Write;

use nalgebra::DMatrix;

use super::{Site, StreamNetwork};
use crate::error::{Error, Result};

/// Pairwise distance, connectivity and weight matrices between a row site
/// set and a column site set.
///
/// `d[(i, j)]` is the distance from row site `i` downstream to the junction
/// it shares with column site `j` (zero when `i` is the downstream member of
/// a flow-connected pair); `d_rev[(i, j)]` is the same quantity for column
/// site `j`. For a square bundle `d_rev = dᵀ`.
#[derive(Debug, Clone)]
pub struct DistanceBundle {
    pub row_ids: Vec<i64>,
    pub col_ids: Vec<i64>,
    pub d: DMatrix<f64>,
    pub d_rev: DMatrix<f64>,
    /// Total hydrologic distance, `d + d_rev`.
    pub h: DMatrix<f64>,
    /// Euclidean distance from the planar coordinates.
    pub e: DMatrix<f64>,
    pub flow_con: DMatrix<bool>,
    /// Tail-up weights; zero where flow-unconnected.
    pub w: DMatrix<f64>,
}

impl DistanceBundle {
    pub fn nrows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn ncols(&self) -> usize {
        self.col_ids.len()
    }

    pub fn is_square(&self) -> bool {
        self.row_ids == self.col_ids
    }

    /// Largest total hydrologic distance in the bundle.
    pub fn max_h(&self) -> f64 {
        self.h.iter().copied().fold(0.0, f64::max)
    }

    /// Junction distances `(a, b)` with `a <= b` for entry `(i, j)`.
    pub fn junction_pair(&self, i: usize, j: usize) -> (f64, f64) {
        let (x, y) = (self.d[(i, j)], self.d_rev[(i, j)]);
        if x <= y {
            (x, y)
        } else {
            (y, x)
        }
    }

    /// Restrict a square bundle to the given row/column positions.
    pub fn subset(&self, rows: &[usize], cols: &[usize]) -> DistanceBundle {
        let pick_f = |m: &DMatrix<f64>| DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])]);
        DistanceBundle {
            row_ids: rows.iter().map(|&i| self.row_ids[i]).collect(),
            col_ids: cols.iter().map(|&j| self.col_ids[j]).collect(),
            d: pick_f(&self.d),
            d_rev: pick_f(&self.d_rev),
            h: pick_f(&self.h),
            e: pick_f(&self.e),
            flow_con: DMatrix::from_fn(rows.len(), cols.len(), |i, j| self.flow_con[(rows[i], cols[j])]),
            w: pick_f(&self.w),
        }
    }

    /// Write one matrix as CSV with a `locID` header row and column.
    pub fn write_matrix<W: Write>(&self, which: &str, writer: W) -> Result<()> {
        let owned;
        let m: &DMatrix<f64> = match which {
            "D" => &self.d,
            "H" => &self.h,
            "E" => &self.e,
            "W" => &self.w,
            "flow_con" => {
                owned = self.flow_con.map(|b| if b { 1.0 } else { 0.0 });
                &owned
            }
            other => return Err(Error::Input(format!("unknown matrix {other}"))),
        };
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["locID".to_string()];
        header.extend(self.col_ids.iter().map(i64::to_string));
        w.write_record(&header)?;
        for (i, id) in self.row_ids.iter().enumerate() {
            let mut rec = vec![id.to_string()];
            rec.extend((0..m.ncols()).map(|j| m[(i, j)].to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Located<'a> {
    site: &'a Site,
    seg: usize,
}

fn locate<'a>(net: &StreamNetwork, sites: &'a [Site]) -> Result<Vec<Located<'a>>> {
    sites
        .iter()
        .map(|s| {
            net.index_of(s.rid)
                .map(|seg| Located { site: s, seg })
                .ok_or_else(|| Error::Network(format!("site {} is not on the network (rid {})", s.loc_id, s.rid)))
        })
        .collect()
}

/// Relationship between two located sites.
enum Relation {
    /// Flow-connected; carries (row distance to junction, col distance).
    Connected(f64, f64),
    /// Flow-unconnected with a shared junction at the given `upDist`.
    Unconnected(f64),
}

fn relate(net: &StreamNetwork, a: &Located, b: &Located) -> Relation {
    let pa = net.path(a.seg);
    let pb = net.path(b.seg);
    let common = pa.iter().zip(pb).take_while(|(x, y)| x == y).count();
    let (ua, ub) = (a.site.up_dist, b.site.up_dist);
    let b_on_a_path = common == pb.len();
    let a_on_b_path = common == pa.len();
    match (b_on_a_path, a_on_b_path) {
        (true, true) => Relation::Connected((ua - ub).max(0.0), (ub - ua).max(0.0)),
        (true, false) => Relation::Connected(ua - ub, 0.0),
        (false, true) => Relation::Connected(0.0, ub - ua),
        // The paths diverge just above the deepest shared segment.
        (false, false) => Relation::Unconnected(net.up_node(pa[common - 1])),
    }
}

/// Tail-up weight between two sites: `sqrt(afv_min / afv_max)` of their
/// segments when flow-connected, zero otherwise.
pub fn spatial_weight(net: &StreamNetwork, a: &Site, b: &Site) -> Result<f64> {
    let la = locate(net, std::slice::from_ref(a))?;
    let lb = locate(net, std::slice::from_ref(b))?;
    Ok(weight_for(net, &la[0], &lb[0], &relate(net, &la[0], &lb[0])))
}

fn weight_for(net: &StreamNetwork, a: &Located, b: &Located, rel: &Relation) -> f64 {
    match rel {
        Relation::Unconnected(_) => 0.0,
        Relation::Connected(..) if a.seg == b.seg => 1.0,
        Relation::Connected(..) => {
            let fa = net.segments()[a.seg].afv;
            let fb = net.segments()[b.seg].afv;
            (fa.min(fb) / fa.max(fb)).sqrt()
        }
    }
}

/// Compute the full [`DistanceBundle`] between `rows` and `cols`.
pub fn build_distance_bundle(net: &StreamNetwork, rows: &[Site], cols: &[Site]) -> Result<DistanceBundle> {
    let lr = locate(net, rows)?;
    let lc = locate(net, cols)?;
    let (n, m) = (rows.len(), cols.len());
    let mut d = DMatrix::zeros(n, m);
    let mut d_rev = DMatrix::zeros(n, m);
    let mut e = DMatrix::zeros(n, m);
    let mut flow_con = DMatrix::from_element(n, m, false);
    let mut w = DMatrix::zeros(n, m);
    for (i, a) in lr.iter().enumerate() {
        for (j, b) in lc.iter().enumerate() {
            let rel = relate(net, a, b);
            match rel {
                Relation::Connected(da, db) => {
                    d[(i, j)] = da;
                    d_rev[(i, j)] = db;
                    flow_con[(i, j)] = true;
                }
                Relation::Unconnected(junction) => {
                    d[(i, j)] = a.site.up_dist - junction;
                    d_rev[(i, j)] = b.site.up_dist - junction;
                }
            }
            w[(i, j)] = weight_for(net, a, b, &rel);
            let (dx, dy) = (a.site.x - b.site.x, a.site.y - b.site.y);
            e[(i, j)] = dx.hypot(dy);
        }
    }
    let h = &d + &d_rev;
    Ok(DistanceBundle {
        row_ids: rows.iter().map(|s| s.loc_id).collect(),
        col_ids: cols.iter().map(|s| s.loc_id).collect(),
        d,
        d_rev,
        h,
        e,
        flow_con,
        w,
    })
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;
    use crate::network::{generate_network, SegmentRecord, OUTLET};
    use proptest::prelude::*;

    #[test]
    fn y_network_hand_computed() {
        let net = y_network();
        let s = y_sites();
        let b = build_distance_bundle(&net, &s, &s).unwrap();
        // s1 -> s3 flow-connected, s1 upstream.
        assert_eq!(b.d[(0, 2)], 3.0);
        assert_eq!(b.d[(2, 0)], 0.0);
        assert_eq!(b.h[(0, 2)], 3.0);
        assert!(b.flow_con[(0, 2)]);
        // s1, s2 on different branches.
        assert_eq!(b.d[(0, 1)], 2.0);
        assert_eq!(b.d[(1, 0)], 3.0);
        assert_eq!(b.h[(0, 1)], 5.0);
        assert!(!b.flow_con[(0, 1)]);
        assert_eq!(b.junction_pair(1, 0), (2.0, 3.0));
        assert_eq!(b.w[(0, 1)], 0.0);
        assert!((b.w[(0, 2)] - 0.4f64.sqrt()).abs() < 1e-15);
        assert!((b.w[(0, 2)] - 0.632456).abs() < 1e-6);
        assert!((b.e[(0, 1)] - 10f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn diagonal_case() {
        let net = y_network();
        let s = &y_sites()[..1];
        let b = build_distance_bundle(&net, s, s).unwrap();
        assert_eq!(b.d[(0, 0)], 0.0);
        assert_eq!(b.h[(0, 0)], 0.0);
        assert_eq!(b.e[(0, 0)], 0.0);
        assert!(b.flow_con[(0, 0)]);
        assert_eq!(b.w[(0, 0)], 1.0);
    }

    #[test]
    fn same_segment_ordering() {
        let net = StreamNetwork::new(vec![SegmentRecord { rid: 1, to_rid: OUTLET, length: 10.0, afv: 1.0 }]).unwrap();
        let s = vec![
            Site { loc_id: 1, rid: 1, up_dist: 4.0, x: 0.0, y: 4.0 },
            Site { loc_id: 2, rid: 1, up_dist: 6.0, x: 0.0, y: 6.0 },
        ];
        let b = build_distance_bundle(&net, &s, &s).unwrap();
        assert!(b.flow_con[(0, 1)]);
        assert_eq!(b.h[(0, 1)], 2.0);
        assert_eq!(b.d[(1, 0)], 2.0);
        assert_eq!(b.d[(0, 1)], 0.0);
        assert_eq!(spatial_weight(&net, &s[0], &s[1]).unwrap(), 1.0);
    }

    #[test]
    fn weights_between_segments() {
        let net = y_network();
        let s = y_sites();
        assert_eq!(spatial_weight(&net, &s[0], &s[1]).unwrap(), 0.0);
        assert!((spatial_weight(&net, &s[2], &s[1]).unwrap() - 0.6f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rectangular_bundle_matches_square_blocks() {
        let net = y_network();
        let s = y_sites();
        let full = build_distance_bundle(&net, &s, &s).unwrap();
        let rect = build_distance_bundle(&net, &s[..1], &s[1..]).unwrap();
        assert_eq!(rect.d[(0, 0)], full.d[(0, 1)]);
        assert_eq!(rect.d_rev[(0, 1)], full.d[(2, 0)]);
        assert_eq!(rect.h[(0, 0)], full.h[(0, 1)]);
        let sub = full.subset(&[0], &[1, 2]);
        assert_eq!(sub.h, rect.h);
        assert_eq!(sub.w, rect.w);
    }

    #[test]
    fn unknown_site_errors() {
        let net = y_network();
        let bad = [Site { loc_id: 9, rid: 77, up_dist: 0.0, x: 0.0, y: 0.0 }];
        assert!(build_distance_bundle(&net, &bad, &bad).is_err());
    }

    #[test]
    fn matrix_csv_has_locid_header() {
        let net = y_network();
        let s = y_sites();
        let b = build_distance_bundle(&net, &s, &s).unwrap();
        let mut buf = Vec::new();
        b.write_matrix("H", &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "locID,1,2,3");
        assert_eq!(text.lines().nth(1).unwrap(), "1,0,5,3");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn bundle_invariants_on_generated_networks(n in 1usize..60, seed in 0u64..1000) {
            let g = generate_network(n, seed, 1.3, 2.1).unwrap();
            let mut sites = g.obs.clone();
            sites.extend(g.preds.iter().take(20).copied());
            let b = build_distance_bundle(&g.network, &sites, &sites).unwrap();
            let k = sites.len();
            for i in 0..k {
                prop_assert_eq!(b.h[(i, i)], 0.0);
                prop_assert!(b.flow_con[(i, i)]);
                for j in 0..k {
                    prop_assert_eq!(b.h[(i, j)], b.h[(j, i)]);
                    prop_assert_eq!(b.h[(i, j)], b.d[(i, j)] + b.d[(j, i)]);
                    prop_assert_eq!(b.e[(i, j)], b.e[(j, i)]);
                    prop_assert_eq!(b.flow_con[(i, j)], b.flow_con[(j, i)]);
                    let (lo, hi) = b.junction_pair(i, j);
                    prop_assert!(lo <= hi);
                    if b.flow_con[(i, j)] {
                        prop_assert_eq!(lo, 0.0);
                        let du = (sites[i].up_dist - sites[j].up_dist).abs();
                        prop_assert!((b.h[(i, j)] - du).abs() < 1e-9);
                        prop_assert!(b.w[(i, j)] > 0.0 && b.w[(i, j)] <= 1.0);
                    } else {
                        prop_assert!(b.d[(i, j)] > 0.0 && b.d[(j, i)] > 0.0);
                        prop_assert_eq!(b.w[(i, j)], 0.0);
                    }
                }
            }
        }
    }
}
