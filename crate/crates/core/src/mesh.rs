//! Quadrilateral meshes of a flat polygonal screen.
//!
//! Panels are parallelograms given by four counter-clockwise vertex indices.
//! The reference element is the unit square; local vertex `k` sits at
//! [`REF_CORNERS`]`[k]` and the panel map is affine.
//!
//! Every edge remembers the panel it was first seen on (the owner, `Q1`) and
//! inherits its direction from the owner's counter-clockwise boundary.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};

pub type Point2 = [f64; 2];

/// Reference coordinates of the four local vertices.
pub const REF_CORNERS: [Point2; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Edge {
    /// Vertex indices, ordered along `tangent`.
    pub endpoints: [usize; 2],
    pub owner: usize,
    pub neighbor: Option<usize>,
    /// Local side index `k` of the edge in the owner (side `k` runs from local vertex `k` to `k+1`).
    pub owner_side: usize,
    pub neighbor_side: Option<usize>,
    pub tangent: Point2,
    pub is_boundary: bool,
}

impl Edge {
    /// `+1` for the owner, `-1` for the neighbor, `None` for panels not adjacent to the edge.
    pub fn jump_sign(&self, panel: usize) -> Option<f64> {
        if panel == self.owner {
            Some(1.0)
        } else if self.neighbor == Some(panel) {
            Some(-1.0)
        } else {
            None
        }
    }
}

/// Adjacency class of an ordered pair of panels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum PairClass {
    Identical,
    CommonEdge { vertices: [usize; 2] },
    CommonVertex { vertex: usize },
    Disjoint,
}

impl PairClass {
    pub fn tag(&self) -> &'static str {
        match self {
            PairClass::Identical => "identical",
            PairClass::CommonEdge { .. } => "common_edge",
            PairClass::CommonVertex { .. } => "common_vertex",
            PairClass::Disjoint => "disjoint",
        }
    }
}

/// How an edge sits relative to a panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EdgePanelClass {
    /// The edge is one of the panel's sides.
    Side,
    CommonVertex { vertex: usize },
    Disjoint,
}

#[derive(Debug, Clone, Serialize)]
pub struct Mesh {
    pub vertices: Vec<Point2>,
    pub panels: Vec<[usize; 4]>,
    pub edges: Vec<Edge>,
    /// Edge index of each local side of each panel.
    pub panel_edges: Vec<[usize; 4]>,
    /// Maximum panel diameter.
    pub h: f64,
}

pub(crate) fn sub(a: Point2, b: Point2) -> Point2 {
    [a[0] - b[0], a[1] - b[1]]
}

pub(crate) fn norm(a: Point2) -> f64 {
    a[0].hypot(a[1])
}

pub(crate) fn cross(a: Point2, b: Point2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let d = sub(b, a);
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    norm(sub(p, [a[0] + t * d[0], a[1] + t * d[1]]))
}

fn segment_distance(a0: Point2, a1: Point2, b0: Point2, b1: Point2) -> f64 {
    // segments of a conforming mesh never cross, so endpoint distances suffice
    point_segment_distance(a0, b0, b1)
        .min(point_segment_distance(a1, b0, b1))
        .min(point_segment_distance(b0, a0, a1))
        .min(point_segment_distance(b1, a0, a1))
}

impl Mesh {
    /// Builds a mesh from vertex coordinates and counter-clockwise parallelogram panels.
    pub fn from_panels(vertices: Vec<Point2>, panels: Vec<[usize; 4]>) -> Result<Mesh> {
        if panels.is_empty() {
            return Err(Error::InvalidConfig("mesh has no panels".into()));
        }
        let mut h: f64 = 0.0;
        for (q, panel) in panels.iter().enumerate() {
            for &v in panel {
                if v >= vertices.len() {
                    return Err(Error::IndexOutOfRange {
                        what: "vertex",
                        index: v,
                        len: vertices.len(),
                    });
                }
            }
            let p: Vec<Point2> = panel.iter().map(|&v| vertices[v]).collect();
            let e1 = sub(p[1], p[0]);
            let e3 = sub(p[3], p[0]);
            let det = cross(e1, e3);
            let scale = norm(e1).max(norm(e3));
            if !(det > 1e-12 * scale * scale) {
                return Err(Error::DegenerateGeometry {
                    panel: q,
                    reason: format!("non-positive orientation or zero area (det = {det:e})"),
                });
            }
            let skew = norm(sub(sub(p[2], p[1]), e3));
            if skew > 1e-10 * scale {
                return Err(Error::DegenerateGeometry {
                    panel: q,
                    reason: "panel is not a parallelogram; only affine panels are supported".into(),
                });
            }
            h = h.max(norm(sub(p[2], p[0]))).max(norm(sub(p[3], p[1])));
        }

        let mut edges: Vec<Edge> = Vec::new();
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut panel_edges = vec![[0usize; 4]; panels.len()];
        for (q, panel) in panels.iter().enumerate() {
            for k in 0..4 {
                let (a, b) = (panel[k], panel[(k + 1) % 4]);
                if a == b {
                    return Err(Error::DegenerateGeometry {
                        panel: q,
                        reason: "repeated vertex".into(),
                    });
                }
                let key = (a.min(b), a.max(b));
                match lookup.get(&key) {
                    None => {
                        let t = sub(vertices[b], vertices[a]);
                        let len = norm(t);
                        lookup.insert(key, edges.len());
                        panel_edges[q][k] = edges.len();
                        edges.push(Edge {
                            endpoints: [a, b],
                            owner: q,
                            neighbor: None,
                            owner_side: k,
                            neighbor_side: None,
                            tangent: [t[0] / len, t[1] / len],
                            is_boundary: true,
                        });
                    }
                    Some(&e) => {
                        let edge = &mut edges[e];
                        if edge.neighbor.is_some() || edge.owner == q {
                            return Err(Error::InvalidConfig(format!(
                                "edge ({a}, {b}) is shared by more than two panels"
                            )));
                        }
                        if edge.endpoints != [b, a] {
                            return Err(Error::InvalidConfig(format!(
                                "panels {} and {q} have inconsistent orientation",
                                edge.owner
                            )));
                        }
                        edge.neighbor = Some(q);
                        edge.neighbor_side = Some(k);
                        edge.is_boundary = false;
                        panel_edges[q][k] = e;
                    }
                }
            }
        }
        Ok(Mesh {
            vertices,
            panels,
            edges,
            panel_edges,
            h,
        })
    }

    pub fn num_panels(&self) -> usize {
        self.panels.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn panel_vertex(&self, q: usize, k: usize) -> Point2 {
        self.vertices[self.panels[q][k]]
    }

    /// Columns of the (constant) Jacobian of the panel map.
    pub fn jacobian(&self, q: usize) -> [Point2; 2] {
        let v0 = self.panel_vertex(q, 0);
        [sub(self.panel_vertex(q, 1), v0), sub(self.panel_vertex(q, 3), v0)]
    }

    pub fn area(&self, q: usize) -> f64 {
        let [a, b] = self.jacobian(q);
        cross(a, b)
    }

    pub fn diameter(&self, q: usize) -> f64 {
        let p = |k| self.panel_vertex(q, k);
        norm(sub(p(2), p(0))).max(norm(sub(p(3), p(1))))
    }

    pub fn centroid(&self, q: usize) -> Point2 {
        self.panel_map(q, [0.5, 0.5])
    }

    /// Affine map from the reference square onto panel `q`.
    pub fn panel_map(&self, q: usize, r: Point2) -> Point2 {
        let v0 = self.panel_vertex(q, 0);
        let [a, b] = self.jacobian(q);
        [
            v0[0] + a[0] * r[0] + b[0] * r[1],
            v0[1] + a[1] * r[0] + b[1] * r[1],
        ]
    }

    pub fn panel_inverse_map(&self, q: usize, x: Point2) -> Point2 {
        let v0 = self.panel_vertex(q, 0);
        let [a, b] = self.jacobian(q);
        let d = sub(x, v0);
        let det = cross(a, b);
        [cross(d, b) / det, cross(a, d) / det]
    }

    /// Inverse transpose of the Jacobian, row-major.
    pub fn inverse_transpose_jacobian(&self, q: usize) -> [[f64; 2]; 2] {
        let [a, b] = self.jacobian(q);
        let det = cross(a, b);
        // J = [a b]; J^{-1} = [[b1, -b0], [-a1, a0]] / det; J^{-T} = transpose
        [[b[1] / det, -a[1] / det], [-b[0] / det, a[0] / det]]
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e].endpoints;
        norm(sub(self.vertices[b], self.vertices[a]))
    }

    /// Point at parameter `s ∈ [0, 1]` along edge `e` (in tangent direction).
    pub fn edge_point(&self, e: usize, s: f64) -> Point2 {
        let [a, b] = self.edges[e].endpoints;
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])]
    }

    pub fn classify_pair(&self, a: usize, b: usize) -> Result<PairClass> {
        self.check_panel(a)?;
        self.check_panel(b)?;
        if a == b {
            return Ok(PairClass::Identical);
        }
        let shared: Vec<usize> = self.panels[a]
            .iter()
            .copied()
            .filter(|v| self.panels[b].contains(v))
            .collect();
        Ok(match shared.len() {
            0 => PairClass::Disjoint,
            1 => PairClass::CommonVertex { vertex: shared[0] },
            2 => {
                let mut vertices = [shared[0], shared[1]];
                vertices.sort_unstable();
                PairClass::CommonEdge { vertices }
            }
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "panels {a} and {b} share {} vertices",
                    shared.len()
                )))
            }
        })
    }

    pub fn classify_edge_panel(&self, e: usize, a: usize) -> Result<EdgePanelClass> {
        self.check_edge(e)?;
        self.check_panel(a)?;
        let edge = &self.edges[e];
        if edge.owner == a || edge.neighbor == Some(a) {
            return Ok(EdgePanelClass::Side);
        }
        let shared: Vec<usize> = edge
            .endpoints
            .iter()
            .copied()
            .filter(|v| self.panels[a].contains(v))
            .collect();
        Ok(match shared.len() {
            0 => EdgePanelClass::Disjoint,
            1 => EdgePanelClass::CommonVertex { vertex: shared[0] },
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "edge {e} touches panel {a} in both endpoints but is not one of its sides"
                )))
            }
        })
    }

    /// Euclidean distance between two panels (zero when they touch).
    pub fn panel_distance(&self, a: usize, b: usize) -> f64 {
        let mut d = f64::INFINITY;
        for i in 0..4 {
            let (a0, a1) = (self.panel_vertex(a, i), self.panel_vertex(a, (i + 1) % 4));
            for j in 0..4 {
                let (b0, b1) = (self.panel_vertex(b, j), self.panel_vertex(b, (j + 1) % 4));
                d = d.min(segment_distance(a0, a1, b0, b1));
            }
        }
        d
    }

    pub fn edge_panel_distance(&self, e: usize, a: usize) -> f64 {
        let [p, q] = self.edges[e].endpoints;
        let (p, q) = (self.vertices[p], self.vertices[q]);
        (0..4)
            .map(|i| segment_distance(p, q, self.panel_vertex(a, i), self.panel_vertex(a, (i + 1) % 4)))
            .fold(f64::INFINITY, f64::min)
    }

    /// Local vertex index of global vertex `v` in panel `q`.
    pub fn local_vertex(&self, q: usize, v: usize) -> Option<usize> {
        self.panels[q].iter().position(|&w| w == v)
    }

    /// Panels whose closure contains `x`.
    pub fn locate(&self, x: Point2) -> Vec<usize> {
        const TOL: f64 = 1e-12;
        (0..self.num_panels())
            .filter(|&q| {
                let r = self.panel_inverse_map(q, x);
                r.iter().all(|&c| (-TOL..=1.0 + TOL).contains(&c))
            })
            .collect()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_panels()).map(|q| self.area(q)).sum()
    }

    /// Same geometry with panels renumbered: new panel `i` is old panel `order[i]`.
    /// Edges are rebuilt, so ownership follows the new numbering.
    pub fn permuted(&self, order: &[usize]) -> Result<Mesh> {
        let mut seen = vec![false; self.num_panels()];
        if order.len() != self.num_panels() {
            return Err(Error::InvalidConfig("permutation has wrong length".into()));
        }
        for &o in order {
            if o >= seen.len() || std::mem::replace(&mut seen[o], true) {
                return Err(Error::InvalidConfig("not a permutation".into()));
            }
        }
        let panels = order.iter().map(|&o| self.panels[o]).collect();
        Mesh::from_panels(self.vertices.clone(), panels)
    }

    /// Same mesh with owner and neighbor swapped on every interior edge; tangents flip accordingly.
    pub fn with_flipped_interior_edges(&self) -> Mesh {
        let mut mesh = self.clone();
        for edge in mesh.edges.iter_mut().filter(|e| !e.is_boundary) {
            let nb = edge.neighbor.expect("interior edge has a neighbor");
            let nb_side = edge.neighbor_side.expect("interior edge has a neighbor side");
            edge.neighbor = Some(edge.owner);
            edge.neighbor_side = Some(edge.owner_side);
            edge.owner = nb;
            edge.owner_side = nb_side;
            edge.endpoints = [edge.endpoints[1], edge.endpoints[0]];
            edge.tangent = [-edge.tangent[0], -edge.tangent[1]];
        }
        mesh
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn check_panel(&self, q: usize) -> Result<()> {
        if q < self.num_panels() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                what: "panel",
                index: q,
                len: self.num_panels(),
            })
        }
    }

    fn check_edge(&self, e: usize) -> Result<()> {
        if e < self.num_edges() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                what: "edge",
                index: e,
                len: self.num_edges(),
            })
        }
    }
}

/// Uniform `n × n` mesh of the unit square. Panel `(i, j)` has index `j·n + i`.
pub fn build_uniform_square_mesh(n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidConfig("mesh parameter n must be at least 1".into()));
    }
    let hs = 1.0 / n as f64;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 * hs, j as f64 * hs]);
        }
    }
    let vid = |i: usize, j: usize| j * (n + 1) + i;
    let mut panels = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            panels.push([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]);
        }
    }
    Mesh::from_panels(vertices, panels)
}
