//! Undirected graphs and binary k-nearest-neighbour weight matrices.

use std::collections::{HashMap, HashSet, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Undirected simple graph with string vertex ids.
///
/// Vertex order is the order of first appearance and defines the
/// index <-> id mapping used by every other module.
#[derive(Debug, Clone, Default)]
pub struct Graph {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    adj: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
    edge_set: HashSet<(usize, usize)>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the index of `id`, inserting it at the end if unseen.
    pub fn add_vertex(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.ids.len();
        self.ids.push(id.to_owned());
        self.index.insert(id.to_owned(), i);
        self.adj.push(Vec::new());
        i
    }

    /// Adds an undirected edge. Returns `false` if it already existed.
    ///
    /// Panics on a self-loop; use [`load_edge_list`] for untrusted input.
    pub fn add_edge(&mut self, a: usize, b: usize) -> bool {
        assert_ne!(a, b, "self-loop on vertex {a}");
        let key = (a.min(b), a.max(b));
        if !self.edge_set.insert(key) {
            return false;
        }
        self.edges.push(key);
        self.adj[a].push(b);
        self.adj[b].push(a);
        true
    }

    pub fn add_edge_by_id(&mut self, a: &str, b: &str) -> bool {
        let i = self.add_vertex(a);
        let j = self.add_vertex(b);
        self.add_edge(i, j)
    }

    pub fn vertex_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    /// Edges as `(min, max)` index pairs in insertion order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edge_set.contains(&(a.min(b), a.max(b)))
    }

    /// Hop distances from `source`; `None` for unreachable vertices.
    pub fn bfs_distances(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.ids.len()];
        let mut queue = VecDeque::new();
        dist[source] = Some(0);
        queue.push_back(source);
        while let Some(v) = queue.pop_front() {
            let d = dist[v].unwrap();
            for &u in &self.adj[v] {
                if dist[u].is_none() {
                    dist[u] = Some(d + 1);
                    queue.push_back(u);
                }
            }
        }
        dist
    }

    /// First unreachable pair `(0, j)` if the graph is disconnected.
    pub fn find_unreachable_pair(&self) -> Option<(usize, usize)> {
        if self.ids.is_empty() {
            return None;
        }
        self.bfs_distances(0)
            .iter()
            .position(Option::is_none)
            .map(|j| (0, j))
    }

    pub fn is_connected(&self) -> bool {
        self.find_unreachable_pair().is_none()
    }

    /// Largest hop distance between any two vertices, `None` if disconnected.
    pub fn diameter(&self) -> Option<usize> {
        let mut best = 0;
        for s in 0..self.ids.len() {
            for d in self.bfs_distances(s) {
                best = best.max(d?);
            }
        }
        Some(best)
    }
}

/// Parses a `src,dst` edge-list CSV.
///
/// Duplicate rows (in either orientation) collapse to one edge. Row numbers in
/// errors count the header as row 1.
pub fn load_edge_list(text: &str) -> Result<Graph> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());

    let headers = reader.headers().map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if headers.len() != 2 || &headers[0] != "src" || &headers[1] != "dst" {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `src,dst`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }

    let mut graph = Graph::new();
    for (k, record) in reader.records().enumerate() {
        let row = k + 2;
        let record = record.map_err(|e| Error::Parse {
            line: row,
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(row);
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let (src, dst) = (&record[0], &record[1]);
        if src.is_empty() || dst.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty vertex id".into(),
            });
        }
        if src == dst {
            return Err(Error::SelfLoop {
                row: line,
                id: src.to_owned(),
            });
        }
        graph.add_edge_by_id(src, dst);
    }
    Ok(graph)
}

/// How a row of the weight matrix relates to the low-connectivity condition
/// `m_i <= n / 2` under which the local bounds are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConnectivityClass {
    LowConnected,
    HighConnected,
    /// `m_i = 0` or `m_i = n - 1`; the bounds are undefined.
    Degenerate,
}

/// Binary symmetric weight matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    n: usize,
    k: usize,
    dense: Vec<bool>,
    neighbors: Vec<Vec<usize>>,
}

impl WeightMatrix {
    /// Builds from neighbour lists. Lists are deduplicated and sorted; the
    /// result is symmetrised.
    pub fn from_neighbors(n: usize, k: usize, lists: &[Vec<usize>]) -> Result<Self> {
        if lists.len() != n {
            return Err(Error::InvalidParameter(format!(
                "expected {n} neighbour lists, got {}",
                lists.len()
            )));
        }
        let mut dense = vec![false; n * n];
        for (i, list) in lists.iter().enumerate() {
            for &j in list {
                if j >= n {
                    return Err(Error::InvalidParameter(format!("neighbour {j} out of range")));
                }
                if i == j {
                    return Err(Error::InvalidParameter(format!("self weight on vertex {i}")));
                }
                dense[i * n + j] = true;
                dense[j * n + i] = true;
            }
        }
        Ok(Self::from_dense(n, k, dense))
    }

    fn from_dense(n: usize, k: usize, dense: Vec<bool>) -> Self {
        let neighbors = (0..n)
            .map(|i| (0..n).filter(|&j| dense[i * n + j]).collect())
            .collect();
        Self {
            n,
            k,
            dense,
            neighbors,
        }
    }

    /// The graph adjacency matrix (k = 1); no connectivity requirement.
    pub fn adjacency(g: &Graph) -> Self {
        let n = g.vertex_count();
        let mut dense = vec![false; n * n];
        for &(a, b) in g.edges() {
            dense[a * n + b] = true;
            dense[b * n + a] = true;
        }
        Self::from_dense(n, 1, dense)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Neighbourhood order used to build the matrix.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.dense[i * self.n + j] as u8
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.dense[i * self.n..(i + 1) * self.n]
    }

    /// Column indices with `w_ij = 1`, ascending.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// Row degree `m_i`.
    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.dense[i * self.n + j] == self.dense[j * self.n + i]))
    }

    pub fn trace(&self) -> usize {
        (0..self.n).filter(|&i| self.dense[i * self.n + i]).count()
    }

    /// Dense 0/1 CSV with a header row of vertex ids, for debugging.
    pub fn to_dense_csv(&self, ids: &[String]) -> String {
        let mut out = String::from("id");
        for id in ids {
            out.push(',');
            out.push_str(id);
        }
        out.push('\n');
        for (i, id) in ids.iter().enumerate().take(self.n) {
            out.push_str(id);
            for j in 0..self.n {
                out.push_str(if self.dense[i * self.n + j] { ",1" } else { ",0" });
            }
            out.push('\n');
        }
        out
    }

    pub fn classify(&self, i: usize) -> ConnectivityClass {
        classify_vertex(self, i)
    }
}

/// `w_ij = 1` iff the hop distance between i and j lies in `[1, k]`.
pub fn knn_weights(g: &Graph, k: usize) -> Result<WeightMatrix> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if let Some((a, b)) = g.find_unreachable_pair() {
        return Err(Error::Disconnected {
            from: g.id(a).to_owned(),
            to: g.id(b).to_owned(),
        });
    }
    let n = g.vertex_count();
    let rows: Vec<Vec<bool>> = (0..n)
        .into_par_iter()
        .map(|s| {
            g.bfs_distances(s)
                .into_iter()
                .map(|d| matches!(d, Some(d) if d >= 1 && d <= k))
                .collect()
        })
        .collect();
    Ok(WeightMatrix::from_dense(n, k, rows.concat()))
}

pub fn classify_vertex(w: &WeightMatrix, i: usize) -> ConnectivityClass {
    let m = w.degree(i);
    let n = w.n();
    if m == 0 || m + 1 == n {
        ConnectivityClass::Degenerate
    } else if 2 * m > n {
        ConnectivityClass::HighConnected
    } else {
        ConnectivityClass::LowConnected
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p3() -> Graph {
        load_edge_list("src,dst\na,b\nb,c").unwrap()
    }

    fn star() -> Graph {
        load_edge_list("src,dst\nc,l1\nc,l2\nc,l3\nc,l4\n").unwrap()
    }

    #[test]
    fn path_graph_loads() {
        let g = p3();
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.ids(), ["a", "b", "c"]);
    }

    #[test]
    fn self_loop_is_rejected_with_row() {
        match load_edge_list("src,dst\na,a") {
            Err(Error::SelfLoop { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected self-loop error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_rows_are_rejected() {
        assert!(matches!(load_edge_list("src,dst\na,b\nc\n"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(load_edge_list("src,dst\na,\n"), Err(Error::Parse { .. })));
        assert!(matches!(load_edge_list("from,to\na,b\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn duplicates_collapse_and_crlf_is_accepted() {
        let g = load_edge_list("src,dst\r\nb,a\r\na,b\r\nb,c\r\n").unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.ids(), ["b", "a", "c"]);
    }

    #[test]
    fn knn_on_path() {
        let g = p3();
        let w1 = knn_weights(&g, 1).unwrap();
        assert_eq!(w1, WeightMatrix::adjacency(&g));
        assert_eq!(w1.degrees(), vec![1, 2, 1]);
        let w2 = knn_weights(&g, 2).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(w2.get(i, j), u8::from(i != j));
            }
        }
    }

    #[test]
    fn star_degrees_and_classes() {
        let g = star();
        let w = knn_weights(&g, 1).unwrap();
        assert_eq!(w.degree(0), 4);
        assert!((1..5).all(|i| w.degree(i) == 1));
        assert_eq!(classify_vertex(&w, 0), ConnectivityClass::Degenerate);
        assert_eq!(classify_vertex(&w, 1), ConnectivityClass::LowConnected);
    }

    #[test]
    fn classify_examples() {
        let w = knn_weights(&p3(), 2).unwrap();
        assert!((0..3).all(|i| classify_vertex(&w, i) == ConnectivityClass::Degenerate));

        // star with an extra leaf hanging off a leaf: centre has m = 4 < n - 1 = 5
        let mut g = star();
        g.add_edge_by_id("l1", "x");
        let w = knn_weights(&g, 1).unwrap();
        assert_eq!(classify_vertex(&w, 0), ConnectivityClass::HighConnected);
        assert_eq!(classify_vertex(&w, 1), ConnectivityClass::LowConnected);
    }

    #[test]
    fn disconnected_graph_names_pair() {
        let g = load_edge_list("src,dst\na,b\nc,d\n").unwrap();
        match knn_weights(&g, 1) {
            Err(Error::Disconnected { from, to }) => {
                assert_eq!(from, "a");
                assert_eq!(to, "c");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_k_rejected() {
        assert!(matches!(knn_weights(&p3(), 0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn dense_csv_export() {
        let g = p3();
        let w = knn_weights(&g, 1).unwrap();
        assert_eq!(w.to_dense_csv(g.ids()), "id,a,b,c\na,0,1,0\nb,1,0,1\nc,0,1,0\n");
    }
}
