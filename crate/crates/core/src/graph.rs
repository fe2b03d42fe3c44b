//! Undirected simple graphs over a fixed node set `0..n`.
//!
//! Only edges change over time; node ids are stable so that labels, features
//! and embeddings stay aligned across snapshots.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Result, ShsError};

pub type NodeId = usize;

/// Undirected simple graph with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Graph {
    adj: Vec<Vec<NodeId>>,
    edge_count: usize,
}

/// Connected-component labeling of every node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabeling {
    /// Component index of each node, numbered in order of lowest member id.
    pub component_id: Vec<usize>,
    /// Size of each component; isolated nodes count as size-1 components.
    pub component_sizes: Vec<usize>,
}

impl ComponentLabeling {
    pub fn component_count(&self) -> usize {
        self.component_sizes.len()
    }

    pub fn same_component(&self, i: NodeId, j: NodeId) -> bool {
        self.component_id[i] == self.component_id[j]
    }
}

impl Graph {
    /// Edgeless graph on `n` nodes.
    pub fn new(n: usize) -> Self {
        Graph {
            adj: vec![Vec::new(); n],
            edge_count: 0,
        }
    }

    /// Builds a graph from an edge iterator. Duplicate edges collapse.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let mut g = Graph::new(n);
        for (i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn neighbors(&self, i: NodeId) -> &[NodeId] {
        &self.adj[i]
    }

    pub fn degree(&self, i: NodeId) -> usize {
        self.adj[i].len()
    }

    pub fn has_edge(&self, i: NodeId, j: NodeId) -> bool {
        i < self.adj.len() && self.adj[i].binary_search(&j).is_ok()
    }

    /// Iterates every edge once as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(i, ns)| ns.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    fn check_pair(&self, i: NodeId, j: NodeId) -> Result<()> {
        let n = self.node_count();
        if i >= n || j >= n {
            return Err(ShsError::InvalidEdge(i, j, n));
        }
        Ok(())
    }

    /// Inserts `{i, j}`. Returns `false` when the edge was already present.
    pub fn add_edge(&mut self, i: NodeId, j: NodeId) -> Result<bool> {
        self.check_pair(i, j)?;
        if i == j {
            return Err(ShsError::InvalidEdge(i, j, self.node_count()));
        }
        match self.adj[i].binary_search(&j) {
            Ok(_) => Ok(false),
            Err(pos) => {
                self.adj[i].insert(pos, j);
                let pos = self.adj[j].binary_search(&i).unwrap_err();
                self.adj[j].insert(pos, i);
                self.edge_count += 1;
                Ok(true)
            }
        }
    }

    /// Deletes `{i, j}`. Returns `false` when the edge was absent.
    pub fn remove_edge(&mut self, i: NodeId, j: NodeId) -> Result<bool> {
        self.check_pair(i, j)?;
        match self.adj[i].binary_search(&j) {
            Ok(pos) => {
                self.adj[i].remove(pos);
                let pos = self.adj[j].binary_search(&i).expect("adjacency symmetry");
                self.adj[j].remove(pos);
                self.edge_count -= 1;
                Ok(true)
            }
            Err(_) => Ok(false),
        }
    }

    /// Connected components by breadth-first traversal, O(n + m).
    pub fn connected_components(&self) -> ComponentLabeling {
        let n = self.node_count();
        let mut component_id = vec![usize::MAX; n];
        let mut component_sizes = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..n {
            if component_id[start] != usize::MAX {
                continue;
            }
            let id = component_sizes.len();
            component_id[start] = id;
            queue.push_back(start);
            let mut size = 0;
            while let Some(u) = queue.pop_front() {
                size += 1;
                for &v in &self.adj[u] {
                    if component_id[v] == usize::MAX {
                        component_id[v] = id;
                        queue.push_back(v);
                    }
                }
            }
            component_sizes.push(size);
        }
        ComponentLabeling {
            component_id,
            component_sizes,
        }
    }

    /// Copy of the graph with every node in `removed` isolated. Ids are kept.
    pub fn induced_subgraph_without(&self, removed: &[NodeId]) -> Graph {
        let mut mask = vec![false; self.node_count()];
        for &r in removed {
            if r < mask.len() {
                mask[r] = true;
            }
        }
        let mut edge_count = 0;
        let adj: Vec<Vec<NodeId>> = self
            .adj
            .iter()
            .enumerate()
            .map(|(i, ns)| {
                if mask[i] {
                    return Vec::new();
                }
                let kept: Vec<NodeId> = ns.iter().copied().filter(|&j| !mask[j]).collect();
                edge_count += kept.len();
                kept
            })
            .collect();
        Graph {
            adj,
            edge_count: edge_count / 2,
        }
    }

    /// Breadth-first hop distances from `source`; `None` for unreachable nodes.
    pub fn bfs_distances(&self, source: NodeId) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.node_count()];
        let mut queue = VecDeque::new();
        dist[source] = Some(0);
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap() + 1;
            for &v in &self.adj[u] {
                if dist[v].is_none() {
                    dist[v] = Some(d);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Same graph with node `i` renamed to `perm[i]`.
    pub fn relabeled(&self, perm: &[NodeId]) -> Result<Graph> {
        if perm.len() != self.node_count() {
            return Err(ShsError::Shape(format!(
                "permutation of length {} for {} nodes",
                perm.len(),
                self.node_count()
            )));
        }
        Graph::from_edges(
            self.node_count(),
            self.edges().map(|(i, j)| (perm[i], perm[j])),
        )
    }

    /// Parses the edge-list text format.
    ///
    /// One edge per line as two whitespace-separated ids, `#` starts a comment
    /// line, and an optional `n <count>` header fixes the node count. Without
    /// a header the node count is one past the largest id seen.
    pub fn parse_edge_list(text: &str, path: &Path) -> Result<Graph> {
        let parse_err = |line: usize, msg: String| ShsError::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut declared: Option<usize> = None;
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let a = fields.next().unwrap();
            let b = fields
                .next()
                .ok_or_else(|| parse_err(line_no, format!("expected two fields in {line:?}")))?;
            if fields.next().is_some() {
                return Err(parse_err(line_no, format!("trailing fields in {line:?}")));
            }
            if a == "n" {
                if declared.is_some() || !edges.is_empty() {
                    return Err(parse_err(
                        line_no,
                        "node-count header must come first".into(),
                    ));
                }
                let n = b
                    .parse::<usize>()
                    .map_err(|e| parse_err(line_no, format!("bad node count {b:?}: {e}")))?;
                declared = Some(n);
                continue;
            }
            let i = a
                .parse::<usize>()
                .map_err(|e| parse_err(line_no, format!("bad node id {a:?}: {e}")))?;
            let j = b
                .parse::<usize>()
                .map_err(|e| parse_err(line_no, format!("bad node id {b:?}: {e}")))?;
            if let Some(n) = declared {
                if i >= n || j >= n {
                    return Err(parse_err(
                        line_no,
                        format!("edge ({i}, {j}) out of range for n = {n}"),
                    ));
                }
            }
            if i == j {
                return Err(parse_err(line_no, format!("self-loop on node {i}")));
            }
            edges.push((i, j));
        }
        let n =
            declared.unwrap_or_else(|| edges.iter().map(|&(i, j)| i.max(j) + 1).max().unwrap_or(0));
        Graph::from_edges(n, edges)
    }

    pub fn read_edge_list(path: &Path) -> Result<Graph> {
        let text = std::fs::read_to_string(path).map_err(|e| ShsError::io(path, e))?;
        Graph::parse_edge_list(&text, path)
    }

    /// Serializes to the edge-list format with an `n` header, edges sorted.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::with_capacity(16 * (self.edge_count + 1));
        let _ = writeln!(out, "n {}", self.node_count());
        for (i, j) in self.edges() {
            let _ = writeln!(out, "{i} {j}");
        }
        out
    }

    pub fn write_edge_list(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_edge_list()).map_err(|e| ShsError::io(path, e))
    }
}
