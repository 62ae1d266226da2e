use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::VesselGraph;
use crate::error::{Error, Result};
use crate::neighborhood::OFFSETS_26;
use crate::patch::{PatchGrid, PatchIndex};
use crate::volume::{Mask, Voxel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoiKind {
    Bifurcation,
    Endpoint,
    Midpoint,
}

impl PoiKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PoiKind::Bifurcation => "bifurcation",
            PoiKind::Endpoint => "endpoint",
            PoiKind::Midpoint => "midpoint",
        }
    }
}

impl FromStr for PoiKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bifurcation" => Ok(PoiKind::Bifurcation),
            "endpoint" => Ok(PoiKind::Endpoint),
            "midpoint" => Ok(PoiKind::Midpoint),
            other => Err(Error::InvalidParameter(format!("unknown POI kind {other:?}"))),
        }
    }
}

/// Graph element a POI was derived from: a node id or an edge id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PoiSource {
    Node(usize),
    Edge(usize),
}

impl PoiSource {
    pub fn id(&self) -> usize {
        match *self {
            PoiSource::Node(id) | PoiSource::Edge(id) => id,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Poi {
    pub id: usize,
    pub kind: PoiKind,
    pub position: Voxel,
    pub source: PoiSource,
    pub patch_memberships: Vec<PatchIndex>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PredictionStatus {
    TP,
    FP,
    FN,
    TN,
}

impl PredictionStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            PredictionStatus::TP => "TP",
            PredictionStatus::FP => "FP",
            PredictionStatus::FN => "FN",
            PredictionStatus::TN => "TN",
        }
    }
}

impl fmt::Display for PredictionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PredictionStatus {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "TP" => Ok(PredictionStatus::TP),
            "FP" => Ok(PredictionStatus::FP),
            "FN" => Ok(PredictionStatus::FN),
            "TN" => Ok(PredictionStatus::TN),
            other => Err(Error::InvalidParameter(format!("unknown prediction status {other:?}"))),
        }
    }
}

pub fn classify_status(pred: bool, gt: bool) -> PredictionStatus {
    match (pred, gt) {
        (true, true) => PredictionStatus::TP,
        (true, false) => PredictionStatus::FP,
        (false, true) => PredictionStatus::FN,
        (false, false) => PredictionStatus::TN,
    }
}

/// Status of `poi` within one patch. `pred_patch` and `gt_patch` are the
/// patch-sized prediction and ground truth for `patch`.
pub fn classify_poi_status(
    grid: &PatchGrid,
    poi: &Poi,
    patch: PatchIndex,
    pred_patch: &Mask,
    gt_patch: &Mask,
) -> Result<PredictionStatus> {
    let local = grid.to_local(patch, poi.position)?;
    if pred_patch.dims() != grid.patch_dims() || gt_patch.dims() != grid.patch_dims() {
        return Err(Error::DimensionMismatch(format!(
            "patch volumes must be {:?}",
            grid.patch_dims().as_array()
        )));
    }
    Ok(classify_status(pred_patch.is_set(local), gt_patch.is_set(local)))
}

/// Nearest foreground voxel within the 26-neighborhood (distance, then
/// linear order), or `p` itself when already foreground.
fn snap_to_foreground(mask: &Mask, p: Voxel) -> Option<Voxel> {
    if mask.dims().contains(p) && mask.is_set(p) {
        return Some(p);
    }
    let dims = mask.dims();
    OFFSETS_26
        .iter()
        .filter_map(|&d| dims.offset(p, d).map(|q| (d.iter().map(|c| c * c).sum::<isize>(), q)))
        .filter(|&(_, q)| mask.is_set(q))
        .min_by_key(|&(d2, q)| (d2, dims.index(q)))
        .map(|(_, q)| q)
}

/// One POI per node (bifurcation for degree ≥ 3, endpoint for degree 1)
/// and one per edge at centerline element `⌊L/2⌋`. Ordered by kind, then
/// source id; ids are assigned in that order.
pub fn select_pois(graph: &VesselGraph, mask: &Mask, grid: &PatchGrid) -> Result<Vec<Poi>> {
    if mask.dims() != grid.volume_dims() {
        return Err(Error::DimensionMismatch(format!(
            "mask {:?} vs grid {:?}",
            mask.dims().as_array(),
            grid.volume_dims().as_array()
        )));
    }
    let mut raw: Vec<(PoiKind, PoiSource, Voxel)> = Vec::new();
    for n in &graph.nodes {
        let kind = match n.degree {
            1 => PoiKind::Endpoint,
            d if d >= 3 => PoiKind::Bifurcation,
            d => {
                log::warn!("node {} has degree {d}; no POI emitted", n.id);
                continue;
            }
        };
        raw.push((kind, PoiSource::Node(n.id), n.pos));
    }
    for e in &graph.edges {
        if e.centerline.is_empty() {
            log::warn!("edge {} has an empty centerline; no midpoint POI", e.id);
            continue;
        }
        raw.push((PoiKind::Midpoint, PoiSource::Edge(e.id), e.centerline[e.centerline.len() / 2]));
    }
    raw.sort_by_key(|&(kind, source, _)| (kind, source.id()));

    let mut out = Vec::with_capacity(raw.len());
    for (kind, source, pos) in raw {
        let Some(position) = snap_to_foreground(mask, pos) else {
            log::warn!("{} POI from {source:?} at {pos:?} is off the mask; dropped", kind.as_str());
            continue;
        };
        let patch_memberships = grid.patches_containing(position)?;
        out.push(Poi {
            id: out.len(),
            kind,
            position,
            source,
            patch_memberships,
        });
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct PoiRow {
    poi_id: usize,
    kind: String,
    x: usize,
    y: usize,
    z: usize,
    source_id: usize,
    n_patches: usize,
}

/// POI table: `poi_id, kind, x, y, z, source_id, n_patches`.
pub fn write_poi_table(pois: &[Poi], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    if pois.is_empty() {
        w.write_record(["poi_id", "kind", "x", "y", "z", "source_id", "n_patches"])?;
    }
    for p in pois {
        w.serialize(PoiRow {
            poi_id: p.id,
            kind: p.kind.as_str().into(),
            x: p.position[0],
            y: p.position[1],
            z: p.position[2],
            source_id: p.source.id(),
            n_patches: p.patch_memberships.len(),
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a POI table back; memberships are recomputed from `grid`.
pub fn read_poi_table(path: impl AsRef<Path>, grid: &PatchGrid) -> Result<Vec<Poi>> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    let mut out = Vec::new();
    for row in r.deserialize() {
        let row: PoiRow = row?;
        let kind: PoiKind = row.kind.parse()?;
        let position = [row.x, row.y, row.z];
        let source = match kind {
            PoiKind::Midpoint => PoiSource::Edge(row.source_id),
            _ => PoiSource::Node(row.source_id),
        };
        out.push(Poi {
            id: row.poi_id,
            kind,
            position,
            source,
            patch_memberships: grid.patches_containing(position)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use crate::patch::build_patch_grid;
    use crate::volume::Dims;

    fn line(m: &mut Mask, from: Voxel, dir: [isize; 3], len: usize) {
        let mut p = from;
        for _ in 0..len {
            m.set(p, 1);
            if let Some(q) = m.dims().offset(p, dir) {
                p = q;
            }
        }
    }

    fn y_skeleton() -> Mask {
        let mut m = Mask::empty(Dims::cube(32));
        m.set([16, 16, 16], 1);
        line(&mut m, [17, 16, 16], [1, 0, 0], 10);
        line(&mut m, [15, 17, 16], [-1, 1, 0], 10);
        line(&mut m, [15, 15, 16], [-1, -1, 0], 10);
        m
    }

    #[test]
    fn y_graph_pois() {
        let m = y_skeleton();
        let g = build_graph(&m);
        let grid = build_patch_grid(m.dims(), 32, 0.25).unwrap();
        let pois = select_pois(&g, &m, &grid).unwrap();
        assert_eq!(pois.len(), 7);
        let count = |k| pois.iter().filter(|p| p.kind == k).count();
        assert_eq!(count(PoiKind::Bifurcation), 1);
        assert_eq!(count(PoiKind::Endpoint), 3);
        assert_eq!(count(PoiKind::Midpoint), 3);
        assert_eq!(pois.len(), g.nodes.len() + g.edges.len());
        for (i, p) in pois.iter().enumerate() {
            assert_eq!(p.id, i);
            assert!(m.is_set(p.position));
        }
        for p in pois.iter().filter(|p| p.kind == PoiKind::Midpoint) {
            let e = &g.edges[p.source.id()];
            assert!(e.centerline.contains(&p.position));
        }
        assert_eq!(select_pois(&g, &m, &grid).unwrap(), pois);
    }

    #[test]
    fn straight_line_pois() {
        let mut m = Mask::empty(Dims::new(30, 8, 8));
        line(&mut m, [5, 4, 4], [1, 0, 0], 20);
        let g = build_graph(&m);
        let grid = build_patch_grid(m.dims(), 8, 0.25).unwrap();
        let pois = select_pois(&g, &m, &grid).unwrap();
        assert_eq!(pois.len(), 3);
        let mid = pois.iter().find(|p| p.kind == PoiKind::Midpoint).unwrap();
        assert_eq!(mid.position, [15, 4, 4]);
        assert!(!mid.patch_memberships.is_empty());
    }

    #[test]
    fn empty_graph_no_pois() {
        let m = Mask::empty(Dims::cube(8));
        let grid = build_patch_grid(m.dims(), 8, 0.25).unwrap();
        assert!(select_pois(&VesselGraph::default(), &m, &grid).unwrap().is_empty());
    }

    #[test]
    fn off_mask_node_snaps_or_drops() {
        let mut m = Mask::empty(Dims::cube(8));
        m.set([4, 4, 5], 1);
        let g = VesselGraph {
            nodes: vec![
                super::super::Node { id: 0, pos: [4, 4, 4], degree: 3 },
                super::super::Node { id: 1, pos: [0, 0, 0], degree: 1 },
            ],
            edges: vec![],
        };
        let grid = build_patch_grid(m.dims(), 8, 0.25).unwrap();
        let pois = select_pois(&g, &m, &grid).unwrap();
        assert_eq!(pois.len(), 1);
        assert_eq!(pois[0].position, [4, 4, 5]);
    }

    #[test]
    fn status_truth_table() {
        assert_eq!(classify_status(true, true), PredictionStatus::TP);
        assert_eq!(classify_status(false, true), PredictionStatus::FN);
        assert_eq!(classify_status(true, false), PredictionStatus::FP);
        assert_eq!(classify_status(false, false), PredictionStatus::TN);
    }

    #[test]
    fn status_within_patch() {
        let dims = Dims::cube(12);
        let grid = build_patch_grid(dims, 8, 0.25).unwrap();
        let poi = Poi {
            id: 0,
            kind: PoiKind::Endpoint,
            position: [9, 1, 1],
            source: PoiSource::Node(0),
            patch_memberships: grid.patches_containing([9, 1, 1]).unwrap(),
        };
        let patch = PatchIndex::new(1, 0, 0);
        let mut pred = Mask::empty(grid.patch_dims());
        let mut gt = Mask::empty(grid.patch_dims());
        pred.set([5, 1, 1], 1);
        gt.set([5, 1, 1], 1);
        assert_eq!(classify_poi_status(&grid, &poi, patch, &pred, &gt).unwrap(), PredictionStatus::TP);
        pred.set([5, 1, 1], 0);
        assert_eq!(classify_poi_status(&grid, &poi, patch, &pred, &gt).unwrap(), PredictionStatus::FN);
        // patch (0,0,0) spans x in [0, 8): the POI is outside
        assert!(classify_poi_status(&grid, &poi, PatchIndex::new(0, 0, 0), &pred, &gt).is_err());
    }

    #[test]
    fn poi_table_roundtrip() {
        let m = y_skeleton();
        let g = build_graph(&m);
        let grid = build_patch_grid(m.dims(), 16, 0.25).unwrap();
        let pois = select_pois(&g, &m, &grid).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pois.csv");
        write_poi_table(&pois, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("poi_id,kind,x,y,z,source_id,n_patches\n"));
        assert_eq!(read_poi_table(&p, &grid).unwrap(), pois);
    }
}
