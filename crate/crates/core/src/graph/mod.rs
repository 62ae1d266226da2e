//! Vascular graph extraction from binary masks and POI selection.

mod poi;
mod skeleton;

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neighborhood::{count_neighbors26, neighbors26};
use crate::volume::{Dims, Mask, Voxel};

pub use poi::{
    classify_poi_status, classify_status, read_poi_table, select_pois, write_poi_table, Poi, PoiKind, PoiSource,
    PredictionStatus,
};
pub use skeleton::{is_simple, skeletonize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub pos: Voxel,
    pub degree: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub id: usize,
    pub n0: usize,
    pub n1: usize,
    /// Ordered voxel path from the `n0` end to the `n1` end, including the
    /// node voxels the path touches.
    pub centerline: Vec<Voxel>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VesselGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

impl VesselGraph {
    pub fn node(&self, id: usize) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn degree_sum(&self) -> usize {
        self.nodes.iter().map(|n| n.degree).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses a graph document and recomputes node degrees from the edges,
    /// so externally produced graphs only need consistent ids.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut g: VesselGraph = serde_json::from_str(text)?;
        let ids: HashSet<usize> = g.nodes.iter().map(|n| n.id).collect();
        if ids.len() != g.nodes.len() {
            return Err(Error::InvalidParameter("duplicate node ids in graph document".into()));
        }
        let mut degree: HashMap<usize, usize> = HashMap::new();
        for e in &g.edges {
            for n in [e.n0, e.n1] {
                if !ids.contains(&n) {
                    return Err(Error::InvalidParameter(format!(
                        "edge {} references unknown node {n}",
                        e.id
                    )));
                }
                *degree.entry(n).or_default() += 1;
            }
        }
        for n in &mut g.nodes {
            n.degree = degree.get(&n.id).copied().unwrap_or(0);
        }
        Ok(g)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

struct NodeCluster {
    voxels: Vec<usize>,
}

/// Builds the graph of a thin skeleton.
///
/// Voxels with one 26-neighbor are endpoints; voxels with three or more
/// neighbors are junction voxels, and 26-adjacent junction voxels merge
/// into a single node placed at their rounded centroid. Runs of
/// two-neighbor voxels become edges. Isolated voxels and closed loops
/// without any node are dropped. A junction cluster left with exactly two
/// incident edges is dissolved and its edges joined.
pub fn build_graph(skeleton: &Mask) -> VesselGraph {
    let dims = skeleton.dims();
    let fg: Vec<usize> = (0..dims.len()).filter(|&i| skeleton.data()[i] != 0).collect();
    let neighbor_count: HashMap<usize, usize> = fg
        .iter()
        .map(|&i| (i, count_neighbors26(skeleton, dims.coord(i))))
        .collect();

    // node clusters, ordered by their first voxel
    let mut node_of: HashMap<usize, usize> = HashMap::new();
    let mut clusters: Vec<NodeCluster> = Vec::new();
    let mut isolated = 0usize;
    for &i in &fg {
        let n = neighbor_count[&i];
        if n == 0 {
            isolated += 1;
            continue;
        }
        if n == 2 || node_of.contains_key(&i) {
            continue;
        }
        let id = clusters.len();
        let mut voxels = vec![i];
        node_of.insert(i, id);
        if n >= 3 {
            let mut queue = VecDeque::from([i]);
            while let Some(j) = queue.pop_front() {
                for q in neighbors26(skeleton, dims.coord(j)) {
                    let k = dims.index(q);
                    if neighbor_count[&k] >= 3 && !node_of.contains_key(&k) {
                        node_of.insert(k, id);
                        voxels.push(k);
                        queue.push_back(k);
                    }
                }
            }
            voxels.sort_unstable();
        }
        clusters.push(NodeCluster { voxels });
    }
    if isolated > 0 {
        log::debug!("build_graph: dropped {isolated} isolated skeleton voxels");
    }

    // trace edges
    let mut raw_edges: Vec<(usize, usize, Vec<usize>)> = Vec::new();
    let mut visited: HashSet<usize> = HashSet::new();
    let mut direct: HashSet<(usize, usize)> = HashSet::new();
    for (cid, cluster) in clusters.iter().enumerate() {
        for &v in &cluster.voxels {
            for q in neighbors26(skeleton, dims.coord(v)) {
                let n = dims.index(q);
                if let Some(&other) = node_of.get(&n) {
                    if other == cid {
                        continue;
                    }
                    let key = (v.min(n), v.max(n));
                    if direct.insert(key) {
                        raw_edges.push((cid, other, vec![v, n]));
                    }
                    continue;
                }
                if visited.contains(&n) {
                    continue;
                }
                let mut path = vec![v, n];
                visited.insert(n);
                let mut prev = v;
                let mut cur = n;
                let end = loop {
                    let next = neighbors26(skeleton, dims.coord(cur))
                        .map(|p| dims.index(p))
                        .find(|&k| k != prev);
                    let Some(next) = next else {
                        break None;
                    };
                    path.push(next);
                    if let Some(&node) = node_of.get(&next) {
                        break Some(node);
                    }
                    if !visited.insert(next) {
                        break None;
                    }
                    prev = cur;
                    cur = next;
                };
                if let Some(end) = end {
                    raw_edges.push((cid, end, path));
                }
            }
        }
    }
    let loops = fg
        .iter()
        .filter(|i| neighbor_count[i] == 2 && !visited.contains(i))
        .count();
    if loops > 0 {
        log::warn!("build_graph: dropped {loops} voxels on closed loops without branch points");
    }

    merge_degree_two(dims, &clusters, raw_edges)
}

fn merge_degree_two(
    dims: Dims,
    clusters: &[NodeCluster],
    mut edges: Vec<(usize, usize, Vec<usize>)>,
) -> VesselGraph {
    let mut alive: Vec<bool> = vec![true; clusters.len()];
    loop {
        let mut degree = vec![0usize; clusters.len()];
        for (a, b, _) in &edges {
            degree[*a] += 1;
            degree[*b] += 1;
        }
        let target = (0..clusters.len()).find(|&c| {
            alive[c] && degree[c] == 2 && edges.iter().all(|(a, b, _)| !(*a == c && *b == c))
        });
        let Some(c) = target else {
            for (c, &d) in degree.iter().enumerate() {
                if d == 0 {
                    alive[c] = false;
                }
            }
            break;
        };
        let mut incident: Vec<usize> = edges
            .iter()
            .enumerate()
            .filter(|(_, (a, b, _))| *a == c || *b == c)
            .map(|(i, _)| i)
            .collect();
        incident.sort_unstable();
        let second = edges.remove(incident[1]);
        let first = edges.remove(incident[0]);
        // orient first to end at c and second to start at c
        let (s0, mut p0) = if first.1 == c { (first.0, first.2) } else { (first.1, rev(first.2)) };
        let (e1, p1) = if second.0 == c { (second.1, second.2) } else { (second.0, rev(second.2)) };
        let bridge = cluster_path(dims, &clusters[c].voxels, *p0.last().unwrap(), p1[0]);
        p0.extend(bridge.into_iter().skip(1));
        p0.extend(p1.into_iter().skip(1));
        edges.push((s0, e1, p0));
        alive[c] = false;
    }

    // renumber nodes by first voxel, edges by (n0, n1, first voxel)
    let mut order: Vec<usize> = (0..clusters.len()).filter(|&c| alive[c]).collect();
    order.sort_by_key(|&c| clusters[c].voxels[0]);
    let new_id: BTreeMap<usize, usize> = order.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut out_edges: Vec<(usize, usize, Vec<usize>)> = edges
        .into_iter()
        .map(|(a, b, path)| {
            let (na, nb) = (new_id[&a], new_id[&b]);
            if (na, path[0]) <= (nb, *path.last().unwrap()) {
                (na, nb, path)
            } else {
                (nb, na, rev(path))
            }
        })
        .collect();
    out_edges.sort_by(|x, y| (x.0, x.1, &x.2).cmp(&(y.0, y.1, &y.2)));

    let mut degree = vec![0usize; order.len()];
    for (a, b, _) in &out_edges {
        degree[*a] += 1;
        degree[*b] += 1;
    }
    let nodes = order
        .iter()
        .enumerate()
        .map(|(id, &c)| Node {
            id,
            pos: rounded_centroid(dims, &clusters[c].voxels),
            degree: degree[id],
        })
        .collect();
    let edges = out_edges
        .into_iter()
        .enumerate()
        .map(|(id, (n0, n1, path))| Edge {
            id,
            n0,
            n1,
            centerline: path.into_iter().map(|i| dims.coord(i)).collect(),
        })
        .collect();
    VesselGraph { nodes, edges }
}

fn rev(mut v: Vec<usize>) -> Vec<usize> {
    v.reverse();
    v
}

fn rounded_centroid(dims: Dims, voxels: &[usize]) -> Voxel {
    let mut sum = [0usize; 3];
    for &i in voxels {
        let p = dims.coord(i);
        for a in 0..3 {
            sum[a] += p[a];
        }
    }
    let n = voxels.len() as f64;
    sum.map(|s| (s as f64 / n).round() as usize)
}

/// Shortest 26-connected path between two voxels of one cluster.
fn cluster_path(dims: Dims, cluster: &[usize], from: usize, to: usize) -> Vec<usize> {
    let members: HashSet<usize> = cluster.iter().copied().collect();
    let mut parent: HashMap<usize, usize> = HashMap::from([(from, from)]);
    let mut queue = VecDeque::from([from]);
    while let Some(i) = queue.pop_front() {
        if i == to {
            break;
        }
        for d in crate::neighborhood::OFFSETS_26 {
            if let Some(q) = dims.offset(dims.coord(i), d) {
                let k = dims.index(q);
                if members.contains(&k) && !parent.contains_key(&k) {
                    parent.insert(k, i);
                    queue.push_back(k);
                }
            }
        }
    }
    let mut path = vec![to];
    let mut cur = to;
    while cur != from {
        cur = parent[&cur];
        path.push(cur);
    }
    path.reverse();
    path
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{Dims, Mask};

    pub(crate) fn draw(m: &mut Mask, from: Voxel, dir: [isize; 3], len: usize) {
        let mut p = from;
        for _ in 0..len {
            m.set(p, 1);
            p = m.dims().offset(p, dir).unwrap();
        }
    }

    fn check_invariants(g: &VesselGraph) {
        assert_eq!(g.degree_sum(), 2 * g.edges.len());
        for n in &g.nodes {
            assert_ne!(n.degree, 2, "{n:?}");
        }
        for e in &g.edges {
            for w in e.centerline.windows(2) {
                let d = (0..3).map(|a| w[0][a].abs_diff(w[1][a])).max().unwrap();
                assert_eq!(d, 1, "{w:?}");
            }
            for (end, node) in [(e.centerline[0], e.n0), (*e.centerline.last().unwrap(), e.n1)] {
                let pos = g.nodes[node].pos;
                let d = (0..3).map(|a| end[a].abs_diff(pos[a])).max().unwrap();
                assert!(d <= 1, "edge {} end {end:?} vs node {pos:?}", e.id);
            }
        }
    }

    #[test]
    fn straight_line() {
        let mut m = Mask::empty(Dims::new(30, 5, 5));
        draw(&mut m, [5, 2, 2], [1, 0, 0], 20);
        let g = build_graph(&m);
        check_invariants(&g);
        assert_eq!(g.nodes.len(), 2);
        assert!(g.nodes.iter().all(|n| n.degree == 1));
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.edges[0].centerline.len(), 20);
        assert_eq!(g.edges[0].centerline[0], [5, 2, 2]);
    }

    #[test]
    fn y_phantom() {
        let mut m = Mask::empty(Dims::cube(32));
        let c = [16, 16, 16];
        m.set(c, 1);
        draw(&mut m, [17, 16, 16], [1, 0, 0], 10);
        draw(&mut m, [15, 17, 16], [-1, 1, 0], 10);
        draw(&mut m, [15, 15, 16], [-1, -1, 0], 10);
        let g = build_graph(&m);
        check_invariants(&g);
        assert_eq!(g.nodes.len(), 4);
        assert_eq!(g.nodes.iter().filter(|n| n.degree == 3).count(), 1);
        assert_eq!(g.nodes.iter().filter(|n| n.degree == 1).count(), 3);
        assert_eq!(g.edges.len(), 3);
        let junction = g.nodes.iter().find(|n| n.degree == 3).unwrap();
        assert_eq!(junction.pos, c);
    }

    #[test]
    fn empty_skeleton() {
        let g = build_graph(&Mask::empty(Dims::cube(4)));
        assert!(g.nodes.is_empty() && g.edges.is_empty());
    }

    #[test]
    fn two_voxel_segment() {
        let mut m = Mask::empty(Dims::cube(4));
        m.set([1, 1, 1], 1);
        m.set([2, 1, 1], 1);
        let g = build_graph(&m);
        check_invariants(&g);
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.edges[0].centerline.len(), 2);
    }

    #[test]
    fn pure_loop_and_isolated_voxels_dropped() {
        let mut m = Mask::empty(Dims::cube(8));
        for p in [[1, 1, 1], [2, 1, 1], [3, 2, 1], [2, 3, 1], [1, 3, 1], [0, 2, 1]] {
            m.set(p, 1);
        }
        m.set([6, 6, 6], 1);
        let g = build_graph(&m);
        assert!(g.nodes.is_empty() && g.edges.is_empty());
    }

    #[test]
    fn junction_cluster_merges() {
        // plus sign in a plane: the center and its arms' first voxels form
        // one junction cluster
        let mut m = Mask::empty(Dims::cube(21));
        m.set([10, 10, 10], 1);
        for d in [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0]] {
            let start = m.dims().offset([10, 10, 10], d).unwrap();
            draw(&mut m, start, d, 8);
        }
        let g = build_graph(&m);
        check_invariants(&g);
        assert_eq!(g.nodes.iter().filter(|n| n.degree == 4).count(), 1);
        assert_eq!(g.edges.len(), 4);
    }

    #[test]
    fn json_roundtrip_recomputes_degree() {
        let mut m = Mask::empty(Dims::new(30, 5, 5));
        draw(&mut m, [5, 2, 2], [1, 0, 0], 20);
        let g = build_graph(&m);
        let mut text: serde_json::Value = serde_json::from_str(&g.to_json().unwrap()).unwrap();
        text["nodes"][0]["degree"] = 7.into();
        let back = VesselGraph::from_json(&text.to_string()).unwrap();
        assert_eq!(back, g);
        let bad = r#"{"nodes":[{"id":0,"pos":[0,0,0],"degree":1}],"edges":[{"id":0,"n0":0,"n1":3,"centerline":[]}]}"#;
        assert!(VesselGraph::from_json(bad).is_err());
    }
}
