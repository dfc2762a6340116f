//! Stream-network topology, observation/prediction sites, and the distance,
//! connectivity and weight matrices derived from them.
//!
//! A network is a directed tree of segments. Every segment drains into its
//! `to_rid` segment, and exactly one segment drains to the outlet. Site
//! positions are given as `upDist`, the hydrologic distance from the outlet.

mod distance;
mod generate;

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use distance::{build_distance_bundle, spatial_weight, DistanceBundle};
pub use generate::{generate_network, GeneratedNetwork};

/// `to_rid` value marking the segment that drains to the outlet.
pub const OUTLET: i64 = -1;

/// One stream segment as stored in the network CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub rid: i64,
    /// Downstream segment, or [`OUTLET`].
    pub to_rid: i64,
    pub length: f64,
    /// Additive function value used for tail-up weights.
    pub afv: f64,
}

/// A point location on the network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Site {
    #[serde(rename = "locID")]
    pub loc_id: i64,
    pub rid: i64,
    /// Hydrologic distance from the outlet.
    #[serde(rename = "upDist")]
    pub up_dist: f64,
    pub x: f64,
    pub y: f64,
}

/// A validated segment tree with a precomputed parent index and the
/// distance-to-outlet of every segment's downstream node.
#[derive(Debug, Clone)]
pub struct StreamNetwork {
    segments: Vec<SegmentRecord>,
    by_rid: HashMap<i64, usize>,
    parent: Vec<Option<usize>>,
    down_node: Vec<f64>,
    /// Root-first list of segment indices from the outlet to each segment.
    paths: Vec<Vec<usize>>,
    warnings: Vec<String>,
}

impl StreamNetwork {
    /// Validate `segments` and build the topology index.
    pub fn new(segments: Vec<SegmentRecord>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Network("network has no segments".into()));
        }
        let mut by_rid = HashMap::with_capacity(segments.len());
        for (i, s) in segments.iter().enumerate() {
            if !(s.length > 0.0) || !s.length.is_finite() {
                return Err(Error::Network(format!("segment {}: non-positive length", s.rid)));
            }
            if !(s.afv > 0.0) || !s.afv.is_finite() {
                return Err(Error::Network(format!("segment {}: non-positive afv", s.rid)));
            }
            if s.rid == OUTLET {
                return Err(Error::Network(format!("segment id {OUTLET} is reserved for the outlet")));
            }
            if by_rid.insert(s.rid, i).is_some() {
                return Err(Error::Network(format!("duplicate segment id {}", s.rid)));
            }
        }
        let mut parent = Vec::with_capacity(segments.len());
        for s in &segments {
            if s.to_rid == OUTLET {
                parent.push(None);
            } else {
                match by_rid.get(&s.to_rid) {
                    Some(&p) => parent.push(Some(p)),
                    None => {
                        return Err(Error::Network(format!(
                            "segment {}: unknown to_rid {}",
                            s.rid, s.to_rid
                        )))
                    }
                }
            }
        }

        // Walk every chain towards the outlet; revisiting a segment within
        // one walk means a cycle.
        let n = segments.len();
        let mut done = vec![false; n];
        for start in 0..n {
            let mut on_walk = HashSet::new();
            let mut cur = Some(start);
            while let Some(i) = cur {
                if done[i] {
                    break;
                }
                if !on_walk.insert(i) {
                    return Err(Error::Network(format!(
                        "cycle detected through segment {}",
                        segments[i].rid
                    )));
                }
                cur = parent[i];
            }
            for i in on_walk {
                done[i] = true;
            }
        }
        let outlets: Vec<i64> = segments
            .iter()
            .filter(|s| s.to_rid == OUTLET)
            .map(|s| s.rid)
            .collect();
        match outlets.len() {
            0 => return Err(Error::Network("no outlet segment".into())),
            1 => {}
            _ => return Err(Error::Network(format!("multiple outlets: {outlets:?}"))),
        }

        let mut paths: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut down_node = vec![f64::NAN; n];
        for i in 0..n {
            if !paths[i].is_empty() {
                continue;
            }
            let mut chain = vec![i];
            let mut cur = parent[i];
            while let Some(p) = cur {
                if !paths[p].is_empty() {
                    break;
                }
                chain.push(p);
                cur = parent[p];
            }
            for &j in chain.iter().rev() {
                let (path, dn) = match parent[j] {
                    None => (vec![j], 0.0),
                    Some(p) => {
                        let mut path = paths[p].clone();
                        path.push(j);
                        (path, down_node[p] + segments[p].length)
                    }
                };
                paths[j] = path;
                down_node[j] = dn;
            }
        }

        let mut warnings = Vec::new();
        for (i, s) in segments.iter().enumerate() {
            if let Some(p) = parent[i] {
                if segments[p].afv < s.afv {
                    warnings.push(format!(
                        "afv decreases downstream: segment {} ({}) drains into {} ({})",
                        s.rid, s.afv, segments[p].rid, segments[p].afv
                    ));
                }
            }
        }

        Ok(StreamNetwork { segments, by_rid, parent, down_node, paths, warnings })
    }

    /// Read a network CSV with header `rid,to_rid,length,afv`.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let segments = rdr.deserialize().collect::<std::result::Result<Vec<SegmentRecord>, _>>()?;
        Self::new(segments)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for s in &self.segments {
            w.serialize(s)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn segments(&self) -> &[SegmentRecord] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Non-fatal issues found at load time (afv monotonicity).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn outlet_count(&self) -> usize {
        self.parent.iter().filter(|p| p.is_none()).count()
    }

    /// Length of the longest outlet-to-headwater chain, in segments.
    pub fn depth(&self) -> usize {
        self.paths.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(|s| s.length).sum()
    }

    pub(crate) fn index_of(&self, rid: i64) -> Option<usize> {
        self.by_rid.get(&rid).copied()
    }

    pub(crate) fn path(&self, seg: usize) -> &[usize] {
        &self.paths[seg]
    }

    /// Distance from the outlet to the downstream end of `rid`.
    pub fn downstream_node_dist(&self, rid: i64) -> Option<f64> {
        self.index_of(rid).map(|i| self.down_node[i])
    }

    pub(crate) fn down_node(&self, seg: usize) -> f64 {
        self.down_node[seg]
    }

    pub(crate) fn up_node(&self, seg: usize) -> f64 {
        self.down_node[seg] + self.segments[seg].length
    }

    /// Check that every site references a known segment, lies inside that
    /// segment's `upDist` span, and has a unique `locID`.
    pub fn validate_sites(&self, sites: &[Site]) -> Result<()> {
        let mut seen = HashSet::new();
        for s in sites {
            if !seen.insert(s.loc_id) {
                return Err(Error::Network(format!("duplicate locID {}", s.loc_id)));
            }
            let seg = self.index_of(s.rid).ok_or_else(|| {
                Error::Network(format!("site {} references unknown rid {}", s.loc_id, s.rid))
            })?;
            let (lo, hi) = (self.down_node(seg), self.up_node(seg));
            let tol = 1e-9 * hi.max(1.0);
            if !s.up_dist.is_finite() || s.up_dist < lo - tol || s.up_dist > hi + tol {
                return Err(Error::Network(format!(
                    "site {}: upDist {} outside segment {} span [{lo}, {hi}]",
                    s.loc_id, s.up_dist, s.rid
                )));
            }
            if !s.x.is_finite() || !s.y.is_finite() {
                return Err(Error::Network(format!("site {}: non-finite coordinates", s.loc_id)));
            }
        }
        Ok(())
    }
}

/// Read a sites CSV with header `locID,rid,upDist,x,y`.
pub fn read_sites<R: Read>(reader: R) -> Result<Vec<Site>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    Ok(rdr.deserialize().collect::<std::result::Result<Vec<Site>, _>>()?)
}

pub fn write_sites<W: Write>(sites: &[Site], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for s in sites {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

/// Load a network CSV and any number of site CSVs, validating the sites
/// against the network.
pub fn load_network(
    network_path: impl AsRef<Path>,
    site_paths: &[&Path],
) -> Result<(StreamNetwork, Vec<Vec<Site>>)> {
    let net = StreamNetwork::from_path(network_path)?;
    let mut sets = Vec::with_capacity(site_paths.len());
    for p in site_paths {
        let sites = read_sites(std::fs::File::open(p)?)?;
        net.validate_sites(&sites)?;
        sets.push(sites);
    }
    Ok((net, sets))
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    fn seg(rid: i64, to_rid: i64) -> SegmentRecord {
        SegmentRecord { rid, to_rid, length: 1.0, afv: 1.0 }
    }

    #[test]
    fn y_network_shape() {
        let net = y_network();
        assert_eq!(net.outlet_count(), 1);
        assert_eq!(net.depth(), 2);
        assert_eq!(net.downstream_node_dist(1), Some(4.0));
        assert_eq!(net.downstream_node_dist(3), Some(0.0));
        assert!(net.warnings().is_empty());
    }

    #[test]
    fn two_cycle_is_rejected() {
        let err = StreamNetwork::new(vec![seg(1, 2), seg(2, 1)]).unwrap_err();
        assert!(err.to_string().contains("cycle detected"), "{err}");
    }

    #[test]
    fn cycle_hanging_off_a_valid_tree() {
        let err =
            StreamNetwork::new(vec![seg(1, OUTLET), seg(2, 3), seg(3, 4), seg(4, 2)]).unwrap_err();
        assert!(err.to_string().contains("cycle detected"), "{err}");
    }

    #[test]
    fn zero_afv_is_rejected() {
        let mut s = seg(1, OUTLET);
        s.afv = 0.0;
        let err = StreamNetwork::new(vec![s]).unwrap_err();
        assert!(err.to_string().contains("non-positive afv"), "{err}");
    }

    #[test]
    fn bad_topologies() {
        let err = StreamNetwork::new(vec![seg(1, OUTLET), seg(2, OUTLET)]).unwrap_err();
        assert!(err.to_string().contains("multiple outlets"));
        let err = StreamNetwork::new(vec![seg(1, OUTLET), seg(2, 9)]).unwrap_err();
        assert!(err.to_string().contains("unknown to_rid"));
        let mut s = seg(1, OUTLET);
        s.length = -1.0;
        assert!(StreamNetwork::new(vec![s]).unwrap_err().to_string().contains("non-positive length"));
        assert!(StreamNetwork::new(vec![seg(1, OUTLET), seg(1, OUTLET)]).is_err());
    }

    #[test]
    fn afv_increase_downstream_only_warns() {
        let net = StreamNetwork::new(vec![
            SegmentRecord { rid: 1, to_rid: 2, length: 1.0, afv: 2.0 },
            SegmentRecord { rid: 2, to_rid: OUTLET, length: 1.0, afv: 1.0 },
        ])
        .unwrap();
        assert_eq!(net.warnings().len(), 1);
    }

    #[test]
    fn site_validation() {
        let net = y_network();
        net.validate_sites(&y_sites()).unwrap();
        let mut bad = y_sites();
        bad[0].up_dist = 2.0;
        assert!(net.validate_sites(&bad).unwrap_err().to_string().contains("outside"));
        let mut bad = y_sites();
        bad[1].rid = 42;
        assert!(net.validate_sites(&bad).unwrap_err().to_string().contains("unknown rid"));
        let mut bad = y_sites();
        bad[1].loc_id = 1;
        assert!(net.validate_sites(&bad).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let net = y_network();
        let mut buf = Vec::new();
        net.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("rid,to_rid,length,afv\n"));
        let back = StreamNetwork::from_reader(buf.as_slice()).unwrap();
        assert_eq!(back.segments(), net.segments());

        let mut buf = Vec::new();
        write_sites(&y_sites(), &mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("locID,rid,upDist,x,y\n"));
        assert_eq!(read_sites(buf.as_slice()).unwrap(), y_sites());
    }
}
