use std::collections::HashMap;

use crate::almgren::SegregatedConfig;
use crate::error::{Error, Result};
use crate::grid::{distance, Point};

use super::{NodalSet, Polyline};

/// Dominant component per node: the largest component above `threshold`
/// (lowest index on ties). Nodes where none exceeds it take the component
/// largest on their four neighbours; `None` if that is empty too.
fn node_labels(u: &SegregatedConfig, threshold: f64) -> Vec<Option<usize>> {
    let g = u.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let vals: Vec<&[f64]> = u.components().iter().map(|c| c.values()).collect();
    let argmax = |value: &dyn Fn(&[f64]) -> f64| -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (c, v) in vals.iter().enumerate() {
            let x = value(v);
            if x > threshold && best.is_none_or(|(_, b)| x > b) {
                best = Some((c, x));
            }
        }
        best.map(|(c, _)| c)
    };
    (0..g.len())
        .map(|k| {
            argmax(&|v| v[k]).or_else(|| {
                let (i, j) = g.ij(k);
                argmax(&|v| {
                    let mut m = f64::NEG_INFINITY;
                    if i > 0 {
                        m = m.max(v[k - 1]);
                    }
                    if i + 1 < nx {
                        m = m.max(v[k + 1]);
                    }
                    if j > 0 {
                        m = m.max(v[k - nx]);
                    }
                    if j + 1 < ny {
                        m = m.max(v[k + nx]);
                    }
                    m
                })
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Vertex {
    /// Crossing on a grid edge: `2 * node` for the edge to the right of the
    /// node, `2 * node + 1` for the edge above it.
    Edge(usize),
    /// Junction point inside a cell, keyed by its lower-left node.
    Cell(usize),
}

#[derive(Default)]
struct Graph {
    index: HashMap<Vertex, usize>,
    position: Vec<Point>,
    pair: Vec<Option<(usize, usize)>>,
    adjacency: Vec<Vec<usize>>,
    segments: Vec<(usize, usize)>,
}

impl Graph {
    fn vertex(&mut self, key: Vertex, p: Point, pair: Option<(usize, usize)>) -> usize {
        if let Some(&v) = self.index.get(&key) {
            return v;
        }
        let v = self.position.len();
        self.index.insert(key, v);
        self.position.push(p);
        self.pair.push(pair);
        self.adjacency.push(Vec::new());
        v
    }

    fn connect(&mut self, a: usize, b: usize) {
        let s = self.segments.len();
        self.segments.push((a, b));
        self.adjacency[a].push(s);
        self.adjacency[b].push(s);
    }

    fn other(&self, s: usize, v: usize) -> usize {
        let (a, b) = self.segments[s];
        if a == v {
            b
        } else {
            a
        }
    }

    /// Maximal chains whose interior vertices have degree 2.
    fn chains(&self) -> Vec<Vec<usize>> {
        let mut used = vec![false; self.segments.len()];
        let mut out = Vec::new();
        let walk = |start: usize, first: usize, used: &mut Vec<bool>| -> Vec<usize> {
            let mut chain = vec![start];
            let (mut v, mut s) = (start, first);
            loop {
                used[s] = true;
                v = self.other(s, v);
                chain.push(v);
                if self.adjacency[v].len() != 2 {
                    break;
                }
                match self.adjacency[v].iter().find(|&&t| !used[t]) {
                    Some(&t) => s = t,
                    None => break,
                }
            }
            chain
        };
        for v in 0..self.position.len() {
            if self.adjacency[v].len() == 2 {
                continue;
            }
            for &s in &self.adjacency[v] {
                if !used[s] {
                    out.push(walk(v, s, &mut used));
                }
            }
        }
        // closed loops
        for s in 0..self.segments.len() {
            if !used[s] {
                let start = self.segments[s].0;
                out.push(walk(start, s, &mut used));
            }
        }
        out
    }
}

/// Contours the dominance field `u_a - u_b` between the two components
/// dominant at the ends of every grid edge, interpolating crossings
/// linearly. Cells whose corners carry three or more dominant components,
/// and saddle cells crossed on all four edges, become junctions: their
/// crossings are joined to the crossing centroid, which is recorded as a
/// singular candidate; so is any node whose ring of eight neighbours changes
/// dominant label three or more times.
pub fn extract_nodal_set(u: &SegregatedConfig, dominance_threshold: f64) -> Result<NodalSet> {
    let g = *u.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let labels = node_labels(u, dominance_threshold);
    let vals: Vec<&[f64]> = u.components().iter().map(|c| c.values()).collect();

    // crossing on the edge p -> q, if their labels differ
    let crossing = |p: usize, q: usize| -> Option<(Point, (usize, usize))> {
        let (a, b) = (labels[p]?, labels[q]?);
        if a == b {
            return None;
        }
        let wp = vals[a][p] - vals[b][p];
        let wq = vals[a][q] - vals[b][q];
        let t = if wp - wq > 0.0 {
            (wp / (wp - wq)).clamp(0.0, 1.0)
        } else {
            0.5
        };
        let (xp, xq) = (g.coords_of(p), g.coords_of(q));
        Some((
            [xp[0] + t * (xq[0] - xp[0]), xp[1] + t * (xq[1] - xp[1])],
            (a.min(b), a.max(b)),
        ))
    };

    let mut graph = Graph::default();
    let mut junctions = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let c = [g.idx(i, j), g.idx(i + 1, j), g.idx(i + 1, j + 1), g.idx(i, j + 1)];
            // counter-clockwise edges: corner k to corner k + 1
            let keys = [2 * c[0], 2 * c[1] + 1, 2 * c[3], 2 * c[0] + 1];
            let mut hits: Vec<(usize, usize)> = Vec::with_capacity(4);
            for e in 0..4 {
                if let Some((p, pair)) = crossing(c[e], c[(e + 1) % 4]) {
                    hits.push((e, graph.vertex(Vertex::Edge(keys[e]), p, Some(pair))));
                }
            }
            if hits.is_empty() {
                continue;
            }
            let mut distinct: Vec<usize> = c.iter().filter_map(|&k| labels[k]).collect();
            distinct.sort_unstable();
            distinct.dedup();
            if distinct.len() >= 3 || hits.len() == 4 {
                let m = hits.len() as f64;
                let center = hits.iter().fold([0.0, 0.0], |acc, &(_, v)| {
                    let p = graph.position[v];
                    [acc[0] + p[0] / m, acc[1] + p[1] / m]
                });
                let hub = graph.vertex(Vertex::Cell(c[0]), center, None);
                for &(_, v) in &hits {
                    graph.connect(hub, v);
                }
                junctions.push(center);
            } else if hits.len() == 2 {
                graph.connect(hits[0].1, hits[1].1);
            }
        }
    }
    if graph.segments.is_empty() {
        return Err(Error::EmptyNodalSet);
    }

    // Junctions that fall between nodes may leave a single cell with only
    // two labels; the ring of eight nodes around each node catches them by
    // changing label three or more times.
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let ring = [
                g.idx(i - 1, j - 1),
                g.idx(i, j - 1),
                g.idx(i + 1, j - 1),
                g.idx(i + 1, j),
                g.idx(i + 1, j + 1),
                g.idx(i, j + 1),
                g.idx(i - 1, j + 1),
                g.idx(i - 1, j),
            ];
            let mut changes = 0;
            let mut sum = [0.0, 0.0];
            for k in 0..8 {
                if let Some((p, _)) = crossing(ring[k], ring[(k + 1) % 8]) {
                    changes += 1;
                    sum = [sum[0] + p[0], sum[1] + p[1]];
                }
            }
            if changes >= 3 {
                junctions.push([sum[0] / changes as f64, sum[1] / changes as f64]);
            }
        }
    }

    let polylines = graph
        .chains()
        .into_iter()
        .map(|chain| {
            let pair = chain
                .iter()
                .find_map(|&v| graph.pair[v])
                .expect("every segment touches an edge crossing");
            Polyline {
                points: chain.iter().map(|&v| graph.position[v]).collect(),
                pair,
            }
        })
        .collect();
    Ok(NodalSet {
        grid: g,
        polylines,
        singular_candidates: merge_points(&junctions, 2.0 * g.h()),
        threshold: dominance_threshold,
    })
}

/// Greedy clustering: each point joins the first cluster whose running
/// mean is within `radius`; clusters are reported by their means.
fn merge_points(points: &[Point], radius: f64) -> Vec<Point> {
    let mut clusters: Vec<(Point, usize)> = Vec::new();
    for &p in points {
        match clusters.iter_mut().find(|(m, _)| distance(*m, p) <= radius) {
            Some((m, n)) => {
                let k = *n as f64;
                *m = [(m[0] * k + p[0]) / (k + 1.0), (m[1] * k + p[1]) / (k + 1.0)];
                *n += 1;
            }
            None => clusters.push((p, 1)),
        }
    }
    clusters.into_iter().map(|(m, _)| m).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::almgren::ReactionSpec;
    use crate::grid::{Grid2D, ScalarField};
    use crate::nodal::lipschitz_estimate;
    use crate::solver::{default_assignment, make_prototype, make_prototype_at};

    #[test]
    fn two_sector_prototype_gives_one_straight_line() {
        // shifted center so the line falls between grid columns
        let g = Grid2D::square([0.0, 0.0], 1.0, 64).unwrap();
        let u = make_prototype_at(2, g, &[0, 1], [0.013, 0.0]).unwrap();
        let set = extract_nodal_set(&u, 0.0).unwrap();
        assert_eq!(set.polylines.len(), 1);
        assert!(set.singular_candidates.is_empty());
        // the zero line is x = 0.013 exactly (the dominance field is linear)
        for p in set.vertices() {
            assert!((p[0] - 0.013).abs() <= 1e-12, "{p:?}");
        }
        assert!((set.total_length() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn three_sector_prototype_has_a_junction_at_the_origin() {
        let g = Grid2D::square([0.0, 0.0], 1.0, 128).unwrap();
        let u = make_prototype(3, g, &[0, 1, 2]).unwrap();
        let set = extract_nodal_set(&u, 0.0).unwrap();
        assert_eq!(set.singular_candidates.len(), 1, "{:?}", set.singular_candidates);
        assert!(distance(set.singular_candidates[0], [0.0, 0.0]) <= g.h());
        assert_eq!(set.polylines.len(), 3);
        let mut pairs: Vec<_> = set.polylines.iter().map(|l| l.pair).collect();
        pairs.sort_unstable();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (1, 2)]);
        // vertices lie near the zero set
        let bound = 2.0 * g.h() * lipschitz_estimate(&u);
        assert!(set.max_vertex_value(&u) <= bound);
    }

    #[test]
    fn four_sector_prototype_has_four_branches() {
        let g = Grid2D::square([0.0, 0.0], 1.0, 100).unwrap();
        let u = make_prototype_at(4, g, &default_assignment(4), [0.0031, -0.0017]).unwrap();
        let set = extract_nodal_set(&u, 0.0).unwrap();
        assert!(!set.singular_candidates.is_empty());
        let c = set.singular_candidates[0];
        assert!(distance(c, [0.0031, -0.0017]) <= 2.0 * g.h());
    }

    #[test]
    fn single_positive_component_has_no_nodal_set() {
        let g = Grid2D::unit_square(16).unwrap();
        let f = ScalarField::from_fn(g, |x, y| 1.0 + x * y).unwrap();
        let u = SegregatedConfig::new(vec![f], ReactionSpec::zero(1), 0.0).unwrap();
        assert!(matches!(extract_nodal_set(&u, 0.0), Err(Error::EmptyNodalSet)));
    }

    #[test]
    fn samples_are_evenly_spaced() {
        let g = Grid2D::square([0.0, 0.0], 1.0, 64).unwrap();
        let u = make_prototype_at(2, g, &[0, 1], [0.013, 0.0]).unwrap();
        let set = extract_nodal_set(&u, 0.0).unwrap();
        let s = set.sample(0.25);
        assert_eq!(s.len(), 8);
        for w in s.windows(2) {
            assert!((distance(w[0], w[1]) - 0.25).abs() < 1e-9);
        }
    }

    #[test]
    fn geojson_lists_every_polyline() {
        let g = Grid2D::square([0.0, 0.0], 1.0, 64).unwrap();
        let u = make_prototype(3, g, &[0, 1, 2]).unwrap();
        let set = extract_nodal_set(&u, 0.0).unwrap();
        let json = set.to_geojson();
        let features = json["features"].as_array().unwrap();
        assert_eq!(features.len(), set.polylines.len() + 1);
        assert_eq!(features[0]["geometry"]["type"], "LineString");
    }
}
