//! Offline preprocessing: the line graph of the box intersection graph,
//! representative-point optimization, and endpoint-augmented shortest paths.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::conic::{self, ConicProblem, LinExpr};
use crate::error::Result;
use crate::geometry::{BoxPair, BoxSet};
use crate::polygonal::PolygonalCurve;

/// Line graph of the intersection graph of a [`BoxSet`].
///
/// Vertex `v` is an intersecting pair `{first, second}`; vertices are
/// adjacent when their pairs share a box.
#[derive(Debug, Clone)]
pub struct LineGraph {
    vertices: Vec<BoxPair>,
    edges: Vec<(usize, usize)>,
    rep_points: Vec<Vec<f64>>,
    weights: Vec<f64>,
    adjacency: Vec<Vec<(usize, usize)>>,
    by_box: Vec<Vec<usize>>,
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

impl LineGraph {
    /// Builds the graph with representative points at the overlap centers.
    pub fn build(set: &BoxSet) -> Self {
        let vertices = set.enumerate_intersections();
        let rep_points = vertices.iter().map(|p| p.overlap.center()).collect();
        Self::from_parts(set.len(), vertices, rep_points)
    }

    /// Reassembles a graph from cached vertices and representative points.
    pub(crate) fn from_parts(num_boxes: usize, vertices: Vec<BoxPair>, rep_points: Vec<Vec<f64>>) -> Self {
        let mut by_box = vec![Vec::new(); num_boxes];
        for (v, pair) in vertices.iter().enumerate() {
            by_box[pair.first].push(v);
            by_box[pair.second].push(v);
        }
        let mut edges = Vec::new();
        for incident in &by_box {
            for (i, &v) in incident.iter().enumerate() {
                for &w in &incident[i + 1..] {
                    edges.push((v.min(w), v.max(w)));
                }
            }
        }
        edges.sort_unstable();
        let mut adjacency = vec![Vec::new(); vertices.len()];
        for (e, &(v, w)) in edges.iter().enumerate() {
            adjacency[v].push((w, e));
            adjacency[w].push((v, e));
        }
        let mut graph = Self {
            vertices,
            edges,
            rep_points,
            weights: Vec::new(),
            adjacency,
            by_box,
        };
        graph.refresh_weights();
        graph
    }

    fn refresh_weights(&mut self) {
        self.weights = self
            .edges
            .iter()
            .map(|&(v, w)| distance(&self.rep_points[v], &self.rep_points[w]))
            .collect();
    }

    pub fn vertices(&self) -> &[BoxPair] {
        &self.vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn rep_points(&self) -> &[Vec<f64>] {
        &self.rep_points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn num_boxes(&self) -> usize {
        self.by_box.len()
    }

    /// Vertices whose pair contains box `k`.
    pub fn vertices_of_box(&self, k: usize) -> &[usize] {
        &self.by_box[k]
    }

    /// `Σ_edges ||x_v - x_w||`.
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Moves the representative points to an approximate minimizer of the
    /// total edge length, each point staying inside its pair's overlap.
    ///
    /// Connected components are independent and solved separately.
    pub fn optimize_representative_points(&mut self, tol: f64) -> Result<()> {
        if self.edges.is_empty() {
            return Ok(());
        }
        let components = self.components();
        let solved: Vec<Vec<(usize, Vec<f64>)>> = components
            .par_iter()
            .filter(|c| c.len() > 1)
            .map(|c| self.solve_component(c, tol))
            .collect::<Result<_>>()?;
        let before = self.total_weight();
        let previous = self.rep_points.clone();
        for (v, x) in solved.into_iter().flatten() {
            self.rep_points[v] = self.vertices[v].overlap.clamp(&x);
        }
        self.refresh_weights();
        if self.total_weight() > before {
            log::warn!("representative-point optimization did not improve on the seed; reverting");
            self.rep_points = previous;
            self.refresh_weights();
        }
        Ok(())
    }

    fn components(&self) -> Vec<Vec<usize>> {
        let n = self.vertices.len();
        let mut label = vec![usize::MAX; n];
        let mut out = Vec::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![start];
            label[start] = id;
            let mut head = 0;
            while head < members.len() {
                let v = members[head];
                head += 1;
                for &(w, _) in &self.adjacency[v] {
                    if label[w] == usize::MAX {
                        label[w] = id;
                        members.push(w);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    fn solve_component(&self, members: &[usize], tol: f64) -> Result<Vec<(usize, Vec<f64>)>> {
        let d = self.rep_points[0].len();
        let mut local = vec![usize::MAX; self.vertices.len()];
        for (i, &v) in members.iter().enumerate() {
            local[v] = i;
        }
        let mut problem = ConicProblem::new();
        let points = problem.add_variables(members.len() * d);
        for (i, &v) in members.iter().enumerate() {
            let overlap = &self.vertices[v].overlap;
            for a in 0..d {
                problem.add_bound(points + i * d + a, overlap.lower()[a], overlap.upper()[a]);
            }
        }
        for &v in members {
            for &(w, _) in &self.adjacency[v] {
                if w < v {
                    continue;
                }
                let t = problem.add_variables(1);
                problem.add_linear_cost(t, 1.0);
                let (iv, iw) = (local[v], local[w]);
                let mut cone = vec![LinExpr::var(t)];
                for a in 0..d {
                    cone.push(LinExpr::var(points + iv * d + a).term(points + iw * d + a, -1.0));
                }
                problem.add_cone(cone);
            }
        }
        // Points are clamped into their overlaps afterwards.
        let solution = conic::solve_loose(&problem, tol)?.require_optimal("representative points")?;
        Ok(members
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, solution.x[points + i * d..points + (i + 1) * d].to_vec()))
            .collect())
    }

    /// Shortest polygonal curve from `p_init` to `p_term` through the
    /// representative points, or `None` when no path exists (which
    /// certifies that the two points are not connected inside the safe set).
    pub fn shortest_box_path(&self, set: &BoxSet, p_init: &[f64], p_term: &[f64]) -> Result<Option<PolygonalCurve>> {
        let init_boxes = set.stab(p_init)?;
        let term_boxes = set.stab(p_term)?;
        if init_boxes.is_empty() || term_boxes.is_empty() {
            return Ok(None);
        }
        let n = self.vertices.len();
        let (source, target) = (n, n + 1);

        // Endpoint links keep the smallest box of the pair that holds the endpoint.
        let links = |boxes: &[usize]| -> Vec<(usize, usize)> {
            let mut out: Vec<(usize, usize)> = Vec::new();
            for &k in boxes {
                for &v in &self.by_box[k] {
                    out.push((v, k));
                }
            }
            out.sort_unstable();
            out.dedup_by_key(|(v, _)| *v);
            out
        };
        let init_links = links(&init_boxes);
        let term_links = links(&term_boxes);
        let direct_box = init_boxes.iter().find(|k| term_boxes.binary_search(k).is_ok()).copied();

        let mut term_link_of = vec![None; n];
        for &(v, k) in &term_links {
            term_link_of[v] = Some(k);
        }

        let mut dist = vec![f64::INFINITY; n + 2];
        let mut pred = vec![usize::MAX; n + 2];
        let mut done = vec![false; n + 2];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(QueueEntry { dist: 0.0, node: source });

        let relax = |u: usize, w: usize, weight: f64, dist: &mut Vec<f64>, pred: &mut Vec<usize>, heap: &mut BinaryHeap<QueueEntry>| {
            let candidate = dist[u] + weight;
            if candidate < dist[w] {
                dist[w] = candidate;
                pred[w] = u;
                heap.push(QueueEntry { dist: candidate, node: w });
            } else if candidate == dist[w] && u < pred[w] {
                pred[w] = u;
            }
        };

        while let Some(QueueEntry { dist: du, node: u }) = heap.pop() {
            if done[u] || du > dist[u] {
                continue;
            }
            done[u] = true;
            if u == target {
                break;
            }
            if u == source {
                for &(v, _) in &init_links {
                    relax(u, v, distance(p_init, &self.rep_points[v]), &mut dist, &mut pred, &mut heap);
                }
                if direct_box.is_some() {
                    relax(u, target, distance(p_init, p_term), &mut dist, &mut pred, &mut heap);
                }
                continue;
            }
            for &(w, e) in &self.adjacency[u] {
                if !done[w] {
                    relax(u, w, self.weights[e], &mut dist, &mut pred, &mut heap);
                }
            }
            if term_link_of[u].is_some() {
                relax(u, target, distance(&self.rep_points[u], p_term), &mut dist, &mut pred, &mut heap);
            }
        }
        if !dist[target].is_finite() {
            return Ok(None);
        }

        let mut chain = vec![target];
        while *chain.last().unwrap() != source {
            chain.push(pred[*chain.last().unwrap()]);
        }
        chain.reverse();

        let mut nodes = Vec::with_capacity(chain.len());
        let mut boxes = Vec::with_capacity(chain.len() - 1);
        nodes.push(p_init.to_vec());
        for pair in chain.windows(2) {
            let (u, w) = (pair[0], pair[1]);
            let k = match (u == source, w == target) {
                (true, true) => direct_box.expect("direct edge implies a shared box"),
                (true, false) => init_links[init_links.binary_search_by_key(&w, |l| l.0).unwrap()].1,
                (false, true) => term_link_of[u].expect("terminal link"),
                (false, false) => shared_box(&self.vertices[u], &self.vertices[w]),
            };
            boxes.push(k);
            nodes.push(if w == target {
                p_term.to_vec()
            } else {
                self.rep_points[w].clone()
            });
        }
        Ok(Some(PolygonalCurve::new(nodes, boxes)))
    }
}

fn shared_box(a: &BoxPair, b: &BoxPair) -> usize {
    [a.first, a.second]
        .into_iter()
        .filter(|k| *k == b.first || *k == b.second)
        .min()
        .expect("adjacent vertices share a box")
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct QueueEntry {
    dist: f64,
    node: usize,
}

impl Eq for QueueEntry {}

impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Connected components of the box intersection graph (union-find), used
/// as an independent connectivity check.
pub fn box_components(set: &BoxSet) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..set.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for k in 0..set.len() {
        for l in k + 1..set.len() {
            if set.get(k).intersection(set.get(l)).ok().flatten().is_some() {
                let (a, b) = (find(&mut parent, k), find(&mut parent, l));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    (0..set.len()).map(|k| find(&mut parent, k)).collect()
}

/// True when some box holding `p_init` is connected to some box holding
/// `p_term` through chains of intersecting boxes.
pub fn flood_fill_connected(set: &BoxSet, p_init: &[f64], p_term: &[f64]) -> bool {
    let labels = box_components(set);
    let holds = |x: &[f64]| -> Vec<usize> { (0..set.len()).filter(|&k| set.get(k).contains(x)).collect() };
    let init = holds(p_init);
    let term = holds(p_term);
    init.iter().any(|&a| term.iter().any(|&b| labels[a] == labels[b]))
}
