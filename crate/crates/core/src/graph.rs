//! Directed interaction graphs and their distance layers around a root.
//!
//! `j ∈ N_i` means player `i`'s costs read player `j`'s state. Layers are
//! taken along these edges: `N_0^(k)` collects the vertices whose shortest
//! directed path from the root has length `k`. The table `N_k^h` counts, for
//! each vertex `k`, how many vertices `j` of layer `h` have `k` among their
//! neighbours; it drives every decay recursion in [`crate::decay`].

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, GameError, Result};

/// Lattice coordinates in `Z^2`.
pub type Site = (i64, i64);

/// Interaction graph with sorted, duplicate-free in-neighbour lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphDoc", into = "GraphDoc")]
pub struct Graph {
    in_neighbors: Vec<Vec<usize>>,
    labels: Option<Vec<Site>>,
}

/// On-disk form: `{"n": N, "in_neighbors": [[...], ...], "labels": optional}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDoc {
    pub n: usize,
    pub in_neighbors: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<Site>>,
}

impl TryFrom<GraphDoc> for Graph {
    type Error = GameError;

    fn try_from(doc: GraphDoc) -> Result<Self> {
        if doc.in_neighbors.len() != doc.n {
            return invalid(format!(
                "graph declares n = {} but lists {} neighbourhoods",
                doc.n,
                doc.in_neighbors.len()
            ));
        }
        let g = Graph::new(doc.in_neighbors)?;
        match doc.labels {
            Some(labels) => g.with_labels(labels),
            None => Ok(g),
        }
    }
}

impl From<Graph> for GraphDoc {
    fn from(g: Graph) -> Self {
        GraphDoc {
            n: g.len(),
            in_neighbors: g.in_neighbors,
            labels: g.labels,
        }
    }
}

impl Graph {
    /// Builds a graph from raw neighbour lists, sorting each list.
    ///
    /// Rejects self-loops, out-of-range indices and repeated neighbours.
    pub fn new(mut in_neighbors: Vec<Vec<usize>>) -> Result<Self> {
        let n = in_neighbors.len();
        for (i, list) in in_neighbors.iter_mut().enumerate() {
            list.sort_unstable();
            if let Some(&bad) = list.iter().find(|&&j| j >= n) {
                return invalid(format!("vertex {i} lists neighbour {bad} outside [0, {n})"));
            }
            if list.binary_search(&i).is_ok() {
                return invalid(format!("vertex {i} lists itself as a neighbour"));
            }
            if list.windows(2).any(|w| w[0] == w[1]) {
                return invalid(format!("vertex {i} has a repeated neighbour"));
            }
        }
        Ok(Graph {
            in_neighbors,
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<Site>) -> Result<Self> {
        if labels.len() != self.len() {
            return invalid(format!(
                "{} labels given for {} vertices",
                labels.len(),
                self.len()
            ));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.in_neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.in_neighbors.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.in_neighbors[i]
    }

    pub fn in_neighbors(&self) -> &[Vec<usize>] {
        &self.in_neighbors
    }

    pub fn labels(&self) -> Option<&[Site]> {
        self.labels.as_deref()
    }

    /// Index of the vertex carrying `site`, if the graph is labelled.
    pub fn index_of(&self, site: Site) -> Option<usize> {
        self.labels.as_ref()?.iter().position(|&s| s == site)
    }

    /// `true` when `j ∈ N_i` exactly when `i ∈ N_j`.
    pub fn is_undirected(&self) -> bool {
        self.in_neighbors
            .iter()
            .enumerate()
            .all(|(i, list)| list.iter().all(|&j| self.in_neighbors[j].binary_search(&i).is_ok()))
    }

    /// In-degrees `n_i = #N_i` and out-degrees `ň_i = #{j : i ∈ N_j}`.
    pub fn degrees(&self) -> (Vec<usize>, Vec<usize>) {
        let in_deg = self.in_neighbors.iter().map(Vec::len).collect();
        let mut out_deg = vec![0; self.len()];
        for list in &self.in_neighbors {
            for &j in list {
                out_deg[j] += 1;
            }
        }
        (in_deg, out_deg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| GameError::InvalidInput(format!("graph JSON: {e}")))
    }
}

/// Chain graph; with `cyclic` set, `N_i = {i-1 mod N, i+1 mod N}`.
pub fn build_chain(n: usize, cyclic: bool) -> Result<Graph> {
    if n == 0 {
        return invalid("chain needs at least one vertex");
    }
    if cyclic && n < 3 {
        return invalid(format!("a cycle needs at least 3 vertices, got {n}"));
    }
    let lists = (0..n)
        .map(|i| {
            if cyclic {
                vec![(i + n - 1) % n, (i + 1) % n]
            } else {
                let mut v = Vec::with_capacity(2);
                if i > 0 {
                    v.push(i - 1);
                }
                if i + 1 < n {
                    v.push(i + 1);
                }
                v
            }
        })
        .collect();
    Graph::new(lists)
}

/// Complete `branching`-ary tree of the given depth, root 0, breadth-first
/// numbering, undirected.
pub fn build_tree(branching: usize, depth: usize) -> Result<Graph> {
    if branching == 0 {
        return invalid("tree branching must be at least 1");
    }
    let mut lists: Vec<Vec<usize>> = vec![Vec::new()];
    let mut frontier = vec![0usize];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(frontier.len() * branching);
        for &parent in &frontier {
            for _ in 0..branching {
                let child = lists.len();
                lists.push(vec![parent]);
                lists[parent].push(child);
                next.push(child);
            }
        }
        frontier = next;
    }
    Graph::new(lists)
}

/// Edge orientation for planar lattices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// `N_i = {i ± (1,0), i ± (0,1)}`.
    Undirected,
    /// Every neighbour lies one step farther from the origin. Off-axis
    /// coordinates point along their sign; a zero coordinate points both ways.
    Outward,
    /// [`Orientation::Outward`] with column `x = -1` rerouted so that
    /// `(-1, 1)` is first reached at distance `2h` while `(-1, 0) ∈ N_(-1,1)`.
    Perturbed(u32),
}

/// Spiral enumeration of the `ℓ¹`-ball of the given radius: the origin, then
/// rings of increasing radius, each counterclockwise from `(ρ, 0)`.
pub fn spiral_sites(radius: u32) -> Vec<Site> {
    let mut sites = vec![(0, 0)];
    for rho in 1..=radius as i64 {
        for t in 0..rho {
            sites.push((rho - t, t));
        }
        for t in 0..rho {
            sites.push((-t, rho - t));
        }
        for t in 0..rho {
            sites.push((-rho + t, -t));
        }
        for t in 0..rho {
            sites.push((t, -rho + t));
        }
    }
    sites
}

fn axis_steps(coord: i64) -> &'static [i64] {
    match coord.signum() {
        1 => &[1],
        -1 => &[-1],
        _ => &[-1, 1],
    }
}

fn lattice_targets(site: Site, orientation: Orientation) -> Vec<Site> {
    let (x, y) = site;
    match orientation {
        Orientation::Undirected => vec![(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)],
        Orientation::Outward => outward_targets(site),
        Orientation::Perturbed(h) => {
            let h = h as i64;
            if x == -1 && y > 0 {
                // rerouted column: first sign towards x = 0 (or away at y = h),
                // second sign downwards
                let ex = if y == h { -1 } else { 1 };
                vec![(x + ex, y), (x, y - 1)]
            } else if x == -1 && y == 0 {
                vec![(-2, 0), (-1, -1)]
            } else if x == 0 && y > 0 && y < h {
                // no shortcut into the rerouted column below row h
                vec![(1, y), (0, y + 1)]
            } else {
                outward_targets(site)
            }
        }
    }
}

fn outward_targets((x, y): Site) -> Vec<Site> {
    let mut out = Vec::with_capacity(4);
    for &e in axis_steps(x) {
        out.push((x + e, y));
    }
    for &e in axis_steps(y) {
        out.push((x, y + e));
    }
    out
}

/// Planar lattice truncated to `|i¹| + |i²| ≤ radius`, labelled by site and
/// indexed by [`spiral_sites`].
pub fn build_lattice(radius: u32, orientation: Orientation) -> Result<Graph> {
    if radius == 0 {
        return invalid("lattice radius must be at least 1");
    }
    if let Orientation::Perturbed(h) = orientation {
        if h == 0 || h > radius {
            return invalid(format!("perturbation row h = {h} must lie in [1, {radius}]"));
        }
    }
    let sites = spiral_sites(radius);
    let index: HashMap<Site, usize> = sites.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let lists = sites
        .iter()
        .map(|&s| {
            lattice_targets(s, orientation)
                .into_iter()
                .filter_map(|t| index.get(&t).copied())
                .collect()
        })
        .collect();
    Graph::new(lists)?.with_labels(sites)
}

/// Layers around a root and the counts `N_k^h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NkhTable {
    pub root: usize,
    /// `layers[k]` = `N_root^(k)`, sorted; only non-empty layers are stored.
    pub layers: Vec<Vec<usize>>,
    /// First `h` with an empty layer.
    pub h_star: usize,
    /// `counts[k][h] = N_k^h` for `h < h_star`.
    pub counts: Vec<Vec<usize>>,
    pub layer_of: Vec<Option<usize>>,
}

/// Breadth-first layer expansion from `root` followed by the `N_k^h` count.
pub fn nkh_table(g: &Graph, root: usize) -> Result<NkhTable> {
    let n = g.len();
    if root >= n {
        return invalid(format!("root {root} outside [0, {n})"));
    }
    let mut layer_of = vec![None; n];
    layer_of[root] = Some(0);
    let mut layers: Vec<Vec<usize>> = vec![vec![root]];
    let mut queue = VecDeque::from([root]);
    while let Some(i) = queue.pop_front() {
        let next = layer_of[i].unwrap() + 1;
        for &j in g.neighbors(i) {
            if layer_of[j].is_none() {
                layer_of[j] = Some(next);
                if layers.len() <= next {
                    layers.push(Vec::new());
                }
                layers[next].push(j);
                queue.push_back(j);
            }
        }
    }
    for layer in &mut layers {
        layer.sort_unstable();
    }
    let h_star = layers.len();
    let mut counts = vec![vec![0usize; h_star]; n];
    for (h, layer) in layers.iter().enumerate() {
        for &j in layer {
            for &k in g.neighbors(j) {
                counts[k][h] += 1;
            }
        }
    }
    Ok(NkhTable {
        root,
        layers,
        h_star,
        counts,
        layer_of,
    })
}

impl NkhTable {
    /// `N_k^h`, zero outside the stored range.
    pub fn count(&self, k: usize, h: usize) -> usize {
        self.counts[k].get(h).copied().unwrap_or(0)
    }

    /// `N_root^(k)`, empty beyond `h_star`.
    pub fn layer(&self, k: usize) -> &[usize] {
        self.layers.get(k).map_or(&[], Vec::as_slice)
    }

    /// `sup_{k ∈ N_root^(ℓ)} N_k^h`, with an empty supremum equal to 0.
    pub fn sup_count(&self, layer: usize, h: usize) -> usize {
        self.layer(layer)
            .iter()
            .map(|&k| self.count(k, h))
            .max()
            .unwrap_or(0)
    }

    /// Vertices at distance at most `radius - 1`, sorted. These form the
    /// reduced index set whose boundary is layer `radius`.
    pub fn ball(&self, radius: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self.layers.iter().take(radius).flatten().copied().collect();
        v.sort_unstable();
        v
    }

    pub fn reachable(&self) -> Vec<usize> {
        self.ball(self.h_star)
    }

    /// Largest `N_k^h` over the whole table.
    pub fn max_count(&self) -> usize {
        self.counts.iter().flatten().copied().max().unwrap_or(0)
    }
}
