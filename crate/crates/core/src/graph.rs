//! Networks and the coupling matrices derived from them.
//!
//! A [`Network`] is an undirected, weighted simple graph on `0..n`. A
//! [`CouplingMatrix`] is the symmetric, non-negative, zero-diagonal
//! interaction matrix consumed by the model and the estimators; it is stored
//! in compressed sparse row form with both triangles present, and its row
//! sums are computed once at construction.

use std::collections::{BTreeMap, HashSet};
use std::io::BufRead;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

/// Maximum number of restarts of the pairing construction in
/// [`generate_regular`].
pub const REGULAR_MAX_RETRIES: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    n: usize,
    /// Sorted by `(u, v)` with `u < v`.
    edges: Vec<(usize, usize, f64)>,
}

impl Network {
    /// Builds a network from undirected weighted pairs.
    ///
    /// Pairs may be given in either orientation. A pair repeated with the same
    /// weight is collapsed; a pair repeated with a different weight is an
    /// error.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidNetwork(format!(
                    "edge ({u}, {v}) out of range for n = {n}"
                )));
            }
            if u == v {
                return Err(Error::InvalidNetwork(format!("self-loop at node {u}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidNetwork(format!(
                    "edge ({u}, {v}) has non-positive or non-finite weight {w}"
                )));
            }
            let key = (u.min(v), u.max(v));
            if let Some(&prev) = map.get(&key) {
                if prev != w {
                    return Err(Error::InvalidNetwork(format!(
                        "edge ({}, {}) given with conflicting weights {prev} and {w}",
                        key.0, key.1
                    )));
                }
            }
            map.insert(key, w);
        }
        Ok(Self {
            n,
            edges: map.into_iter().map(|((u, v), w)| (u, v, w)).collect(),
        })
    }

    pub fn empty(n: usize) -> Self {
        Self {
            n,
            edges: Vec::new(),
        }
    }

    /// Complete graph with unit weights.
    pub fn complete(n: usize) -> Self {
        let edges = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v, 1.0)))
            .collect();
        Self { n, edges }
    }

    /// Path `0 - 1 - ... - (n-1)` with unit weights.
    pub fn path(n: usize) -> Self {
        let edges = (1..n).map(|v| (v - 1, v, 1.0)).collect();
        Self { n, edges }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Edges as `(u, v, w)` with `u < v`, sorted.
    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Number of neighbours of each node.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(u, v, _) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    /// Sum of incident edge weights of each node.
    pub fn weighted_degrees(&self) -> Vec<f64> {
        let mut deg = vec![0.0; self.n];
        for &(u, v, w) in &self.edges {
            deg[u] += w;
            deg[v] += w;
        }
        deg
    }

    /// Removes every node whose degree is at least `max_degree`, then (if
    /// `drop_isolated`) every node left without neighbours. Surviving nodes
    /// are relabelled `0..k` in their original order.
    pub fn prune(&self, max_degree: Option<usize>, drop_isolated: bool) -> Pruned {
        let deg = self.degrees();
        let mut keep: Vec<bool> = deg
            .iter()
            .map(|&d| max_degree.is_none_or(|m| d < m))
            .collect();
        let surviving: Vec<_> = self
            .edges
            .iter()
            .copied()
            .filter(|&(u, v, _)| keep[u] && keep[v])
            .collect();
        if drop_isolated {
            let mut has_edge = vec![false; self.n];
            for &(u, v, _) in &surviving {
                has_edge[u] = true;
                has_edge[v] = true;
            }
            for (k, h) in keep.iter_mut().zip(&has_edge) {
                *k &= *h;
            }
        }
        let kept: Vec<usize> = (0..self.n).filter(|&i| keep[i]).collect();
        let mut relabel = vec![usize::MAX; self.n];
        for (new, &old) in kept.iter().enumerate() {
            relabel[old] = new;
        }
        let edges = surviving
            .into_iter()
            .map(|(u, v, w)| (relabel[u], relabel[v], w))
            .collect();
        Pruned {
            network: Network {
                n: kept.len(),
                edges,
            },
            kept,
        }
    }
}

/// Result of [`Network::prune`].
#[derive(Debug, Clone, PartialEq)]
pub struct Pruned {
    pub network: Network,
    /// `kept[new_id] = old_id`.
    pub kept: Vec<usize>,
}

/// G(n, p): every unordered pair is present independently with probability
/// `p`, with unit weight.
pub fn generate_erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Network> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "edge probability {p} outside [0, 1]"
        )));
    }
    let mut rng = rng::stream(seed, &[0x4552]);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(p) {
                edges.push((u, v, 1.0));
            }
        }
    }
    Ok(Network { n, edges })
}

/// Uniform-ish random `d`-regular graph by the pairing model.
///
/// Stubs are matched one pair at a time; a pair that would create a loop or a
/// multi-edge is redrawn. When no admissible pair remains the construction
/// restarts, at most [`REGULAR_MAX_RETRIES`] times.
pub fn generate_regular(n: usize, d: usize, seed: u64) -> Result<Network> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidParameter("n and d must be positive".into()));
    }
    if d >= n {
        return Err(Error::InvalidParameter(format!(
            "degree {d} must be smaller than n = {n}"
        )));
    }
    if (n * d) % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "n * d = {} is odd; no {d}-regular graph on {n} nodes",
            n * d
        )));
    }
    let mut rng = rng::stream(seed, &[0x5247]);
    for _ in 0..REGULAR_MAX_RETRIES {
        if let Some(edges) = try_pairing(n, d, &mut rng) {
            return Network::new(n, edges.into_iter().map(|(u, v)| (u, v, 1.0)));
        }
    }
    Err(Error::GenerationFailed(REGULAR_MAX_RETRIES))
}

fn try_pairing(n: usize, d: usize, rng: &mut impl Rng) -> Option<Vec<(usize, usize)>> {
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, d)).collect();
    let mut seen: HashSet<(usize, usize)> = HashSet::with_capacity(n * d / 2);
    let mut edges = Vec::with_capacity(n * d / 2);
    let admissible = |a: usize, b: usize, seen: &HashSet<(usize, usize)>| {
        a != b && !seen.contains(&(a.min(b), a.max(b)))
    };
    while !stubs.is_empty() {
        let len = stubs.len();
        let mut chosen = None;
        for _ in 0..64 {
            let i = rng.random_range(0..len);
            let j = rng.random_range(0..len);
            if i != j && admissible(stubs[i], stubs[j], &seen) {
                chosen = Some((i, j));
                break;
            }
        }
        if chosen.is_none() {
            // Random draws keep colliding; check whether any admissible pair
            // is left before giving up on this attempt.
            let mut candidates = Vec::new();
            for i in 0..len {
                for j in i + 1..len {
                    if admissible(stubs[i], stubs[j], &seen) {
                        candidates.push((i, j));
                    }
                }
            }
            if candidates.is_empty() {
                return None;
            }
            chosen = Some(candidates[rng.random_range(0..candidates.len())]);
        }
        let (i, j) = chosen?;
        let (a, b) = (stubs[i], stubs[j]);
        seen.insert((a.min(b), a.max(b)));
        edges.push((a.min(b), a.max(b)));
        let (hi, lo) = (i.max(j), i.min(j));
        stubs.swap_remove(hi);
        stubs.swap_remove(lo);
    }
    Some(edges)
}

/// Parses the edge-list text format.
///
/// Each data line is `u v [w]` with 0-based node ids and an optional positive
/// weight (default 1). Blank lines and lines starting with `#` are skipped.
/// An optional header `n <count>` before the first edge fixes the node count;
/// otherwise it is one more than the largest id seen.
pub fn load_edge_list(reader: impl BufRead) -> Result<Network> {
    let mut declared_n: Option<usize> = None;
    let mut edges = Vec::new();
    let mut max_id: Option<usize> = None;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parse_err = |message: String| Error::Parse {
            line: lineno,
            message,
        };
        if fields[0] == "n" {
            if declared_n.is_some() || !edges.is_empty() {
                return Err(parse_err("node-count header must come first".into()));
            }
            if fields.len() != 2 {
                return Err(parse_err("expected `n <count>`".into()));
            }
            let count = fields[1]
                .parse::<usize>()
                .map_err(|_| parse_err(format!("invalid node count `{}`", fields[1])))?;
            declared_n = Some(count);
            continue;
        }
        if !(2..=3).contains(&fields.len()) {
            return Err(parse_err(format!("expected `u v [w]`, got `{line}`")));
        }
        let id = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| parse_err(format!("invalid node id `{s}`")))
        };
        let u = id(fields[0])?;
        let v = id(fields[1])?;
        let w = match fields.get(2) {
            Some(s) => s
                .parse::<f64>()
                .map_err(|_| parse_err(format!("invalid weight `{s}`")))?,
            None => 1.0,
        };
        if !(w.is_finite() && w > 0.0) {
            return Err(parse_err(format!("weight must be positive, got {w}")));
        }
        if u == v {
            return Err(parse_err(format!("self-loop at node {u}")));
        }
        if let Some(n) = declared_n {
            if u >= n || v >= n {
                return Err(parse_err(format!("node id out of range for n = {n}")));
            }
        }
        max_id = Some(max_id.map_or(u.max(v), |m: usize| m.max(u).max(v)));
        edges.push((u, v, w));
    }
    let n = declared_n.or(max_id.map(|m| m + 1)).ok_or(Error::Parse {
        line: 0,
        message: "no edges and no node-count header".into(),
    })?;
    Network::new(n, edges)
}

/// Writes a network in the edge-list format, header included.
pub fn write_edge_list(network: &Network, mut out: impl std::io::Write) -> std::io::Result<()> {
    writeln!(out, "n {}", network.n)?;
    for &(u, v, w) in &network.edges {
        if w == 1.0 {
            writeln!(out, "{u} {v}")?;
        } else {
            writeln!(out, "{u} {v} {w}")?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    row_sums: Vec<f64>,
}

impl CouplingMatrix {
    /// Builds the matrix from unordered off-diagonal pairs; each pair is
    /// written to both `(i, j)` and `(j, i)`. Zero-valued entries are dropped.
    fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, j, w) in pairs {
            if w != 0.0 {
                rows[i].push((j, w));
                rows[j].push((i, w));
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in &mut rows {
            row.sort_by_key(|&(j, _)| j);
            for &(j, w) in row.iter() {
                cols.push(j);
                vals.push(w);
            }
            row_ptr.push(cols.len());
        }
        let row_sums = (0..n)
            .map(|i| vals[row_ptr[i]..row_ptr[i + 1]].iter().sum())
            .collect();
        Self {
            n,
            row_ptr,
            cols,
            vals,
            row_sums,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_pairs(n, std::iter::empty())
    }

    /// Validating constructor from a dense square array.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut pairs = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidCoupling(format!(
                    "row {i} has length {}, expected {n}",
                    row.len()
                )));
            }
            for (j, &x) in row.iter().enumerate() {
                if !x.is_finite() || x < 0.0 {
                    return Err(Error::InvalidCoupling(format!(
                        "entry ({i}, {j}) = {x} is negative or not finite"
                    )));
                }
                if i == j && x != 0.0 {
                    return Err(Error::InvalidCoupling(format!(
                        "diagonal entry ({i}, {i}) = {x} is non-zero"
                    )));
                }
                if x != rows[j][i] {
                    return Err(Error::InvalidCoupling(format!(
                        "entry ({i}, {j}) = {x} differs from ({j}, {i}) = {}",
                        rows[j][i]
                    )));
                }
                if j > i {
                    pairs.push((i, j, x));
                }
            }
        }
        Ok(Self::from_pairs(n, pairs))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored non-zero entries (both triangles).
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Non-zero entries of row `i` as `(column, value)`, columns ascending.
    pub fn row(&self, i: usize) -> impl ExactSizeIterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.vals[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[range.clone()].binary_search(&j) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn row_sums(&self) -> &[f64] {
        &self.row_sums
    }

    /// `max_i sum_j J(i, j)`, the 1 -> infinity operator norm of a symmetric
    /// non-negative matrix. Zero for an empty matrix.
    pub fn row_sum_max(&self) -> f64 {
        self.row_sums.iter().copied().fold(0.0, f64::max)
    }

    /// `1 max ||J||^2` with the 1 -> infinity norm.
    pub fn lambda(&self) -> f64 {
        let r = self.row_sum_max();
        (r * r).max(1.0)
    }

    /// Off-diagonal support as `(i, j)` with `i < j`, sorted.
    pub fn support(&self) -> Vec<(usize, usize)> {
        (0..self.n)
            .flat_map(|i| self.row(i).filter(move |&(j, _)| j > i).map(move |(j, _)| (i, j)))
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n]; self.n];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, w) in self.row(i) {
                row[j] = w;
            }
        }
        out
    }

    /// `c * J` for `c >= 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "scale factor {c} must be finite and non-negative"
            )));
        }
        let pairs: Vec<_> = (0..self.n)
            .flat_map(|i| self.row(i).filter(move |&(j, _)| j > i).map(move |(j, w)| (i, j, c * w)))
            .collect();
        Ok(Self::from_pairs(self.n, pairs))
    }
}

/// `J(i, j) = w(i, j) / scale`.
///
/// Use `scale = n p` for Erdős–Rényi graphs and `scale = d` for `d`-regular
/// graphs.
pub fn coupling_scaled_adjacency(network: &Network, scale: f64) -> Result<CouplingMatrix> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "scale must be positive and finite, got {scale}"
        )));
    }
    Ok(CouplingMatrix::from_pairs(
        network.n,
        network.edges.iter().map(|&(u, v, w)| (u, v, w / scale)),
    ))
}

/// `J = D^{-1/2} A D^{-1/2}` with `D` the weighted degrees.
pub fn coupling_normalized_laplacian(network: &Network) -> Result<CouplingMatrix> {
    let deg = network.weighted_degrees();
    if let Some(i) = deg.iter().position(|&d| d <= 0.0) {
        return Err(Error::IsolatedNode(i));
    }
    Ok(CouplingMatrix::from_pairs(
        network.n,
        network
            .edges
            .iter()
            .map(|&(u, v, w)| (u, v, w / (deg[u] * deg[v]).sqrt())),
    ))
}

pub fn row_sum_max(coupling: &CouplingMatrix) -> f64 {
    coupling.row_sum_max()
}
