//! Synthetic navigation environments.
//!
//! A [`WorldGraph`] is an undirected, connected, weighted graph of labeled
//! viewpoints. Generated worlds quantize edge lengths to multiples of
//! 1/1024 m, so every path length is an exactly representable sum and
//! distances computed in different orders agree bit for bit.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a node inside a [`WorldGraph`].
pub type NodeIdx = usize;

pub const DEFAULT_WINDOW: usize = 5;
pub const DEFAULT_T_FRAMES: usize = 16;

/// Edge length resolution of generated worlds, in meters.
const LENGTH_QUANTUM: f64 = 1.0 / 1024.0;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("node_count must be at least 2, got {0}")]
    TooFewNodes(usize),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("node index {0} out of range")]
    NodeOutOfRange(NodeIdx),
    #[error("duplicate node id {0}")]
    DuplicateNode(String),
    #[error("edge {0}-{1} has non-positive or non-finite length {2}")]
    BadEdgeLength(String, String, f64),
    #[error("world graph is not connected")]
    Disconnected,
    #[error("node {to} is not a neighbor of {from}")]
    NotNeighbor { from: NodeIdx, to: NodeIdx },
    #[error("observation window must be at least 1")]
    ZeroWindow,
    #[error("episode already stopped")]
    AlreadyStopped,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed world document: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = WorldError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTag {
    Train,
    ValSeen,
    ValUnseen,
}

impl fmt::Display for SplitTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitTag::Train => "train",
            SplitTag::ValSeen => "val_seen",
            SplitTag::ValUnseen => "val_unseen",
        })
    }
}

/// The categorical label vocabulary shared by all worlds.
///
/// Frame features are laid out against this set, so a model trained on one
/// set of worlds can read observations from any other world using it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    pub rooms: Vec<String>,
    pub objects: Vec<String>,
}

impl LabelSet {
    pub fn standard() -> Self {
        let rooms = [
            "kitchen", "bedroom", "bathroom", "hallway", "lobby", "office", "library", "garage", "pantry", "attic",
            "studio", "foyer",
        ];
        let objects = [
            "plant",
            "lamp",
            "sofa",
            "piano",
            "mirror",
            "clock",
            "painting",
            "vase",
            "bookshelf",
            "fireplace",
            "statue",
            "aquarium",
        ];
        Self {
            rooms: rooms.iter().map(|s| s.to_string()).collect(),
            objects: objects.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Length of the label part of a frame feature.
    pub fn label_dim(&self) -> usize {
        self.rooms.len() + self.objects.len()
    }

    /// Full observation feature dimension (labels, goal direction, remaining distance).
    pub fn obs_dim(&self) -> usize {
        self.label_dim() + 3
    }

    pub fn is_label(&self, word: &str) -> bool {
        self.rooms.iter().any(|r| r == word) || self.objects.iter().any(|o| o == word)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Viewpoint {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub room: String,
    pub objects: Vec<String>,
}

impl Viewpoint {
    pub fn has_label(&self, label: &str) -> bool {
        self.room == label || self.objects.iter().any(|o| o == label)
    }

    /// One-hot room followed by multi-hot objects. Unknown labels contribute nothing.
    pub fn label_feature(&self, labels: &LabelSet) -> Vec<f64> {
        let mut f = vec![0.0; labels.label_dim()];
        if let Some(i) = labels.rooms.iter().position(|r| *r == self.room) {
            f[i] = 1.0;
        }
        for o in &self.objects {
            if let Some(i) = labels.objects.iter().position(|l| l == o) {
                f[labels.rooms.len() + i] = 1.0;
            }
        }
        f
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: NodeIdx,
    pub b: NodeIdx,
    pub length: f64,
}

/// Serialized form: `{world_id, split_tag, nodes:[{id,x,y,room,objects}], edges:[[a,b,len]]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct WorldDoc {
    world_id: String,
    split_tag: SplitTag,
    nodes: Vec<Viewpoint>,
    edges: Vec<(String, String, f64)>,
}

#[derive(Debug, Clone)]
pub struct WorldGraph {
    pub world_id: String,
    pub split_tag: SplitTag,
    nodes: Vec<Viewpoint>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(NodeIdx, f64)>>,
    index: HashMap<String, NodeIdx>,
}

impl PartialEq for WorldGraph {
    fn eq(&self, other: &Self) -> bool {
        self.world_id == other.world_id
            && self.split_tag == other.split_tag
            && self.nodes == other.nodes
            && self.edges == other.edges
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldParams {
    pub node_count: usize,
    /// Each node connects to this many nearest neighbors before bridging.
    pub k_neighbors: usize,
    /// Side of the square the viewpoints are scattered over, in meters.
    pub extent_m: f64,
    pub max_objects_per_node: usize,
    pub labels: LabelSet,
}

impl Default for WorldParams {
    fn default() -> Self {
        Self { node_count: 30, k_neighbors: 3, extent_m: 20.0, max_objects_per_node: 2, labels: LabelSet::standard() }
    }
}

/// Random geometric graph with k-nearest-neighbor edges, bridged until connected.
pub fn generate_world(seed: u64, params: &WorldParams) -> Result<WorldGraph> {
    let n = params.node_count;
    if n < 2 {
        return Err(WorldError::TooFewNodes(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = &params.labels;
    let mut nodes = Vec::with_capacity(n);
    for i in 0..n {
        let x = rng.gen::<f64>() * params.extent_m;
        let y = rng.gen::<f64>() * params.extent_m;
        let room = labels.rooms[rng.gen_range(0..labels.rooms.len())].clone();
        let k = rng.gen_range(0..=params.max_objects_per_node.min(labels.objects.len()));
        let mut objects: Vec<String> = labels.objects.choose_multiple(&mut rng, k).cloned().collect();
        objects.sort();
        nodes.push(Viewpoint { id: format!("n{i}"), x, y, room, objects });
    }

    let dist = |a: &Viewpoint, b: &Viewpoint| ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
    let mut pairs = BTreeSet::new();
    for i in 0..n {
        let mut others: Vec<(f64, usize)> =
            (0..n).filter(|&j| j != i).map(|j| (dist(&nodes[i], &nodes[j]), j)).collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in others.iter().take(params.k_neighbors.max(1)) {
            pairs.insert((i.min(j), i.max(j)));
        }
    }

    // Bridge components: join the component of node 0 to its closest outsider.
    loop {
        let comp = components(n, &pairs);
        if comp.iter().all(|&c| c == comp[0]) {
            break;
        }
        let mut best: Option<(f64, usize, usize)> = None;
        for i in (0..n).filter(|&i| comp[i] == comp[0]) {
            for j in (0..n).filter(|&j| comp[j] != comp[0]) {
                let d = dist(&nodes[i], &nodes[j]);
                if best.map_or(true, |(bd, _, _)| d < bd) {
                    best = Some((d, i, j));
                }
            }
        }
        let (_, i, j) = best.expect("a second component exists");
        pairs.insert((i.min(j), i.max(j)));
    }

    let edges = pairs
        .into_iter()
        .map(|(a, b)| {
            let raw = dist(&nodes[a], &nodes[b]);
            let length = ((raw / LENGTH_QUANTUM).round() * LENGTH_QUANTUM).max(LENGTH_QUANTUM);
            Edge { a, b, length }
        })
        .collect();
    WorldGraph::new(format!("w{seed}"), SplitTag::Train, nodes, edges)
}

fn components(n: usize, pairs: &BTreeSet<(usize, usize)>) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for &(a, b) in pairs {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    (0..n).map(|i| find(&mut parent, i)).collect()
}

#[derive(Clone, Copy, PartialEq)]
struct HeapEntry {
    dist: f64,
    node: NodeIdx,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShortestPath {
    pub nodes: Vec<NodeIdx>,
    pub length: f64,
}

impl ShortestPath {
    pub fn hops(&self) -> usize {
        self.nodes.len() - 1
    }
}

impl WorldGraph {
    /// Builds a graph and validates every [`WorldGraph`] invariant.
    pub fn new(world_id: String, split_tag: SplitTag, nodes: Vec<Viewpoint>, edges: Vec<Edge>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(WorldError::TooFewNodes(nodes.len()));
        }
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, v) in nodes.iter().enumerate() {
            if index.insert(v.id.clone(), i).is_some() {
                return Err(WorldError::DuplicateNode(v.id.clone()));
            }
        }
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for e in &edges {
            if e.a >= nodes.len() {
                return Err(WorldError::NodeOutOfRange(e.a));
            }
            if e.b >= nodes.len() {
                return Err(WorldError::NodeOutOfRange(e.b));
            }
            if !(e.length.is_finite() && e.length > 0.0) {
                return Err(WorldError::BadEdgeLength(nodes[e.a].id.clone(), nodes[e.b].id.clone(), e.length));
            }
            adjacency[e.a].push((e.b, e.length));
            adjacency[e.b].push((e.a, e.length));
        }
        for adj in &mut adjacency {
            adj.sort_by(|x, y| x.0.cmp(&y.0));
        }
        let g = Self { world_id, split_tag, nodes, edges, adjacency, index };
        if g.distances_to(0).iter().any(|d| d.is_infinite()) {
            return Err(WorldError::Disconnected);
        }
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Viewpoint] {
        &self.nodes
    }

    pub fn node(&self, idx: NodeIdx) -> &Viewpoint {
        &self.nodes[idx]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, idx: NodeIdx) -> &[(NodeIdx, f64)] {
        &self.adjacency[idx]
    }

    pub fn edge_length(&self, a: NodeIdx, b: NodeIdx) -> Option<f64> {
        self.adjacency.get(a)?.iter().find(|(n, _)| *n == b).map(|(_, l)| *l)
    }

    pub fn node_index(&self, id: &str) -> Result<NodeIdx> {
        self.index.get(id).copied().ok_or_else(|| WorldError::UnknownNode(id.to_string()))
    }

    pub fn check_node(&self, idx: NodeIdx) -> Result<()> {
        if idx < self.nodes.len() {
            Ok(())
        } else {
            Err(WorldError::NodeOutOfRange(idx))
        }
    }

    /// Dijkstra distances from every node to `target`.
    pub fn distances_to(&self, target: NodeIdx) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.nodes.len()];
        let mut heap = BinaryHeap::new();
        dist[target] = 0.0;
        heap.push(HeapEntry { dist: 0.0, node: target });
        while let Some(HeapEntry { dist: d, node }) = heap.pop() {
            if d > dist[node] {
                continue;
            }
            for &(m, w) in &self.adjacency[node] {
                let nd = d + w;
                if nd < dist[m] {
                    dist[m] = nd;
                    heap.push(HeapEntry { dist: nd, node: m });
                }
            }
        }
        dist
    }

    /// Next hop from `current` toward the node whose distance table is `to_goal`.
    ///
    /// Minimizes edge length plus remaining distance over `candidates`, ties
    /// broken toward the lower node index. The scripted performer uses the same
    /// rule, which keeps oracle routes and performer choices identical.
    pub fn best_next_hop(
        &self,
        current: NodeIdx,
        to_goal: &[f64],
        candidates: impl Iterator<Item = NodeIdx>,
    ) -> Option<NodeIdx> {
        let mut best: Option<(f64, NodeIdx)> = None;
        for m in candidates {
            let Some(w) = self.edge_length(current, m) else { continue };
            let cost = w + to_goal[m];
            let better = match best {
                None => true,
                Some((bc, bn)) => cost < bc || (cost == bc && m < bn),
            };
            if better {
                best = Some((cost, m));
            }
        }
        best.map(|(_, m)| m)
    }

    pub fn shortest_path(&self, from: NodeIdx, to: NodeIdx) -> Result<ShortestPath> {
        self.check_node(from)?;
        self.check_node(to)?;
        let to_goal = self.distances_to(to);
        Ok(self.path_with_table(from, to, &to_goal))
    }

    pub(crate) fn path_with_table(&self, from: NodeIdx, to: NodeIdx, to_goal: &[f64]) -> ShortestPath {
        let mut nodes = vec![from];
        let mut length = 0.0;
        let mut cur = from;
        while cur != to {
            let next = self
                .best_next_hop(cur, to_goal, self.adjacency[cur].iter().map(|(m, _)| *m))
                .expect("connected graph has a next hop");
            length += self.edge_length(cur, next).expect("neighbor");
            nodes.push(next);
            cur = next;
        }
        ShortestPath { nodes, length }
    }

    /// Shortest-path distance, summed from `from` along the path.
    pub fn distance(&self, from: NodeIdx, to: NodeIdx) -> Result<f64> {
        Ok(self.shortest_path(from, to)?.length)
    }

    /// Observation frames along the shortest path toward `goal`.
    ///
    /// The first `min(window, remaining)` path nodes (starting with `current`)
    /// become valid frames; the rest of the `t_frames` slots are zero padding.
    pub fn sample_observations(
        &self,
        current: NodeIdx,
        goal: NodeIdx,
        window: usize,
        t_frames: usize,
        labels: &LabelSet,
    ) -> Result<ObservationSequence> {
        if window == 0 {
            return Err(WorldError::ZeroWindow);
        }
        self.check_node(current)?;
        self.check_node(goal)?;
        let to_goal = self.distances_to(goal);
        let path = self.path_with_table(current, goal, &to_goal);
        let take = window.min(path.nodes.len()).min(t_frames);
        let dim = labels.obs_dim();
        let goal_vp = &self.nodes[goal];
        let extent = self.extent().max(1.0);
        let mut frames = Vec::with_capacity(t_frames);
        let mut validity = Vec::with_capacity(t_frames);
        let source_nodes: Vec<NodeIdx> = path.nodes[..take].to_vec();
        for &node in &source_nodes {
            let vp = &self.nodes[node];
            let mut f = vp.label_feature(labels);
            let (dx, dy) = (goal_vp.x - vp.x, goal_vp.y - vp.y);
            let norm = (dx * dx + dy * dy).sqrt();
            if norm > 0.0 {
                f.push(dx / norm);
                f.push(dy / norm);
            } else {
                f.push(0.0);
                f.push(0.0);
            }
            f.push(to_goal[node] / extent);
            frames.push(f);
            validity.push(true);
        }
        while frames.len() < t_frames {
            frames.push(vec![0.0; dim]);
            validity.push(false);
        }
        Ok(ObservationSequence { frames, validity, source_nodes })
    }

    /// Side length of the bounding square of all viewpoints.
    pub fn extent(&self) -> f64 {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in &self.nodes {
            lo = lo.min(v.x).min(v.y);
            hi = hi.max(v.x).max(v.y);
        }
        (hi - lo).max(0.0)
    }

    pub fn apply_action(&self, state: &NavState, action: Action) -> Result<Transition> {
        match action {
            Action::Stop => Ok(Transition { state: state.clone(), terminal: true }),
            Action::MoveTo(next) => {
                let len = self
                    .edge_length(state.current_node, next)
                    .ok_or(WorldError::NotNeighbor { from: state.current_node, to: next })?;
                let mut s = state.clone();
                s.current_node = next;
                s.path_taken.push(next);
                s.distance_traveled += len;
                Ok(Transition { state: s, terminal: false })
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_doc()).expect("world serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_doc(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn to_doc(&self) -> WorldDoc {
        WorldDoc {
            world_id: self.world_id.clone(),
            split_tag: self.split_tag,
            nodes: self.nodes.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| (self.nodes[e.a].id.clone(), self.nodes[e.b].id.clone(), e.length))
                .collect(),
        }
    }

    fn from_doc(doc: WorldDoc) -> Result<Self> {
        let index: HashMap<&str, usize> = doc.nodes.iter().enumerate().map(|(i, v)| (v.id.as_str(), i)).collect();
        let lookup = |id: &str| index.get(id).copied().ok_or_else(|| WorldError::UnknownNode(id.into()));
        let edges = doc
            .edges
            .iter()
            .map(|(a, b, length)| Ok(Edge { a: lookup(a)?, b: lookup(b)?, length: *length }))
            .collect::<Result<Vec<_>>>()?;
        Self::new(doc.world_id, doc.split_tag, doc.nodes, edges)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavState {
    pub world_id: String,
    pub current_node: NodeIdx,
    pub path_taken: Vec<NodeIdx>,
    pub distance_traveled: f64,
}

impl NavState {
    pub fn start(world_id: &str, node: NodeIdx) -> Self {
        Self { world_id: world_id.to_string(), current_node: node, path_taken: vec![node], distance_traveled: 0.0 }
    }

    pub fn start_node(&self) -> NodeIdx {
        self.path_taken[0]
    }

    /// Number of moves made so far.
    pub fn moves(&self) -> usize {
        self.path_taken.len() - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    MoveTo(NodeIdx),
    Stop,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: NavState,
    pub terminal: bool,
}

/// Fixed-length, padded sequence of per-viewpoint feature vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSequence {
    pub frames: Vec<Vec<f64>>,
    pub validity: Vec<bool>,
    pub source_nodes: Vec<NodeIdx>,
}

impl ObservationSequence {
    pub fn valid_count(&self) -> usize {
        self.validity.iter().filter(|v| **v).count()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vp(id: &str, x: f64, room: &str) -> Viewpoint {
        Viewpoint { id: id.into(), x, y: 0.0, room: room.into(), objects: vec![] }
    }

    pub(crate) fn line_world(lengths: &[f64]) -> WorldGraph {
        let nodes: Vec<_> = (0..=lengths.len()).map(|i| vp(&format!("n{i}"), i as f64, "hallway")).collect();
        let edges = lengths.iter().enumerate().map(|(i, &l)| Edge { a: i, b: i + 1, length: l }).collect();
        WorldGraph::new("line".into(), SplitTag::Train, nodes, edges).unwrap()
    }

    /// Enumerates every simple path, summing lengths from the source.
    fn brute_force_distance(g: &WorldGraph, from: NodeIdx, to: NodeIdx) -> f64 {
        fn dfs(g: &WorldGraph, cur: NodeIdx, to: NodeIdx, acc: f64, seen: &mut Vec<bool>, best: &mut f64) {
            if cur == to {
                *best = best.min(acc);
                return;
            }
            for &(m, w) in g.neighbors(cur) {
                if !seen[m] {
                    seen[m] = true;
                    dfs(g, m, to, acc + w, seen, best);
                    seen[m] = false;
                }
            }
        }
        let mut seen = vec![false; g.node_count()];
        seen[from] = true;
        let mut best = f64::INFINITY;
        dfs(g, from, to, 0.0, &mut seen, &mut best);
        best
    }

    #[test]
    fn minimal_world_is_connected() {
        let g = generate_world(7, &WorldParams { node_count: 2, ..Default::default() }).unwrap();
        assert_eq!(g.node_count(), 2);
        assert!(!g.edges().is_empty());
        assert!(g.distance(0, 1).unwrap().is_finite());
    }

    #[test]
    fn rejects_single_node() {
        assert!(matches!(
            generate_world(7, &WorldParams { node_count: 1, ..Default::default() }),
            Err(WorldError::TooFewNodes(1))
        ));
    }

    #[test]
    fn generation_is_deterministic() {
        let p = WorldParams::default();
        assert_eq!(generate_world(11, &p).unwrap().to_json(), generate_world(11, &p).unwrap().to_json());
        assert_ne!(generate_world(11, &p).unwrap().to_json(), generate_world(12, &p).unwrap().to_json());
    }

    #[test]
    fn thirty_nodes_reachable_by_bfs() {
        let g = generate_world(7, &WorldParams { node_count: 30, ..Default::default() }).unwrap();
        let mut seen = vec![false; 30];
        let mut queue = std::collections::VecDeque::from([0]);
        seen[0] = true;
        while let Some(n) = queue.pop_front() {
            for &(m, _) in g.neighbors(n) {
                if !seen[m] {
                    seen[m] = true;
                    queue.push_back(m);
                }
            }
        }
        assert!(seen.iter().all(|s| *s));
    }

    #[test]
    fn shortest_path_trivial_cases() {
        let g = line_world(&[5.0]);
        let p = g.shortest_path(1, 1).unwrap();
        assert_eq!(p.nodes, vec![1]);
        assert_eq!(p.length, 0.0);
        let p = g.shortest_path(0, 1).unwrap();
        assert_eq!(p.nodes, vec![0, 1]);
        assert_eq!(p.length, 5.0);
    }

    #[test]
    fn prefers_two_hop_route() {
        // 0-3 direct 10; 0-1-3 costs 3+4; 2 hangs off 3.
        let nodes = (0..4).map(|i| vp(&format!("n{i}"), i as f64, "lobby")).collect();
        let edges = vec![
            Edge { a: 0, b: 3, length: 10.0 },
            Edge { a: 0, b: 1, length: 3.0 },
            Edge { a: 1, b: 3, length: 4.0 },
            Edge { a: 2, b: 3, length: 1.0 },
        ];
        let g = WorldGraph::new("four".into(), SplitTag::Train, nodes, edges).unwrap();
        let p = g.shortest_path(0, 3).unwrap();
        assert_eq!(p.nodes, vec![0, 1, 3]);
        assert_eq!(p.length, brute_force_distance(&g, 0, 3));
        assert_eq!(p.length, 7.0);
    }

    #[test]
    fn unknown_node_is_rejected() {
        let g = line_world(&[1.0]);
        assert!(g.shortest_path(0, 9).is_err());
        assert!(g.node_index("nope").is_err());
    }

    #[test]
    fn distances_are_symmetric_and_match_enumeration() {
        for seed in 0..8 {
            let g = generate_world(seed, &WorldParams { node_count: 9 + (seed as usize % 4), ..Default::default() })
                .unwrap();
            for a in 0..g.node_count() {
                for b in 0..g.node_count() {
                    let ab = g.distance(a, b).unwrap();
                    assert_eq!(ab, g.distance(b, a).unwrap());
                    assert_eq!(ab, brute_force_distance(&g, a, b));
                }
            }
        }
    }

    #[test]
    fn observation_padding_and_window() {
        let labels = LabelSet::standard();
        let g = line_world(&[1.0; 10]);
        let obs = g.sample_observations(4, 4, 5, 8, &labels).unwrap();
        assert_eq!(obs.len(), 8);
        assert_eq!(obs.valid_count(), 1);
        assert_eq!(obs.source_nodes, vec![4]);
        // remaining path 3 nodes
        let obs = g.sample_observations(0, 2, 5, 8, &labels).unwrap();
        assert_eq!(obs.valid_count(), 3);
        assert_eq!(obs.validity, [true, true, true, false, false, false, false, false]);
        let obs = g.sample_observations(0, 8, 5, 16, &labels).unwrap();
        assert_eq!(obs.valid_count(), 5);
        assert!(obs.frames[5..].iter().all(|f| f.iter().all(|v| *v == 0.0)));
        assert!(g.sample_observations(0, 1, 0, 8, &labels).is_err());
    }

    #[test]
    fn actions_update_state() {
        let g = line_world(&[2.5, 1.0, 4.0]);
        let s = NavState::start("line", 0);
        let stop = g.apply_action(&s, Action::Stop).unwrap();
        assert!(stop.terminal);
        assert_eq!(stop.state, s);
        let t = g.apply_action(&s, Action::MoveTo(1)).unwrap();
        assert_eq!(t.state.distance_traveled, 2.5);
        assert!(g.apply_action(&s, Action::MoveTo(2)).is_err());
        let mut st = s;
        for n in 1..=3 {
            st = g.apply_action(&st, Action::MoveTo(n)).unwrap().state;
        }
        assert_eq!(st.distance_traveled, g.distance(0, 3).unwrap());
        assert_eq!(st.path_taken, vec![0, 1, 2, 3]);
    }

    #[test]
    fn json_round_trip() {
        let g = generate_world(3, &WorldParams::default()).unwrap();
        let back = WorldGraph::from_json(&g.to_json()).unwrap();
        assert_eq!(g, back);
        assert_eq!(g.to_json(), back.to_json());
    }

    #[test]
    fn invalid_documents_rejected() {
        let doc = r#"{"world_id":"x","split_tag":"train","nodes":[{"id":"a","x":0,"y":0,"room":"lobby","objects":[]},{"id":"b","x":1,"y":0,"room":"lobby","objects":[]}],"edges":[["a","c",1.0]]}"#;
        assert!(matches!(WorldGraph::from_json(doc), Err(WorldError::UnknownNode(_))));
        let doc = doc.replace(r#"["a","c",1.0]"#, r#"["a","b",0.0]"#);
        assert!(matches!(WorldGraph::from_json(&doc), Err(WorldError::BadEdgeLength(..))));
        let doc = doc.replace(r#"["a","b",0.0]"#, "");
        assert!(matches!(WorldGraph::from_json(&doc), Err(WorldError::Disconnected)));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]
            #[test]
            fn observation_length_and_valid_count(seed in 0u64..500, window in 1usize..8, t in 4usize..20) {
                let g = generate_world(seed, &WorldParams { node_count: 15, ..Default::default() }).unwrap();
                let labels = LabelSet::standard();
                let (a, b) = ((seed % 15) as usize, ((seed / 15) % 15) as usize);
                let obs = g.sample_observations(a, b, window, t, &labels).unwrap();
                let remaining = g.shortest_path(a, b).unwrap().nodes.len();
                prop_assert_eq!(obs.len(), t);
                prop_assert_eq!(obs.valid_count(), window.min(remaining).min(t));
                // validity is a prefix
                let first_pad = obs.validity.iter().position(|v| !v).unwrap_or(t);
                prop_assert!(obs.validity[first_pad..].iter().all(|v| !v));
            }

            #[test]
            fn random_walks_never_teleport(seed in 0u64..500, moves in proptest::collection::vec(0usize..6, 1..30)) {
                let g = generate_world(seed, &WorldParams { node_count: 12, ..Default::default() }).unwrap();
                let mut s = NavState::start(&g.world_id, 0);
                let mut expected = 0.0;
                for m in moves {
                    let nb = g.neighbors(s.current_node);
                    let (next, w) = nb[m % nb.len()];
                    expected += w;
                    s = g.apply_action(&s, Action::MoveTo(next)).unwrap().state;
                }
                for w in s.path_taken.windows(2) {
                    prop_assert!(g.edge_length(w[0], w[1]).is_some());
                }
                prop_assert_eq!(s.distance_traveled, expected);
            }
        }
    }
}
