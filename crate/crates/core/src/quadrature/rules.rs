use nalgebra::DMatrix;

use super::{LocalFns, PairIntegrator, INV_FOUR_PI};
use crate::error::{Error, Result};
use crate::gauss::{gauss_legendre, Rule1d};
use crate::mesh::{cross, norm, sub, EdgePanelClass, Mesh, PairClass, Point2, REF_CORNERS};

pub const DEFAULT_ASSEMBLY_ORDER: usize = 6;
pub const DEFAULT_VALIDATION_ORDER: usize = 10;

/// Chunk of nodes processed per dense product when contracting a rule.
const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleClass {
    Identical,
    CommonEdge,
    CommonVertex,
    /// Separated pair; `subdivided` when the pair is closer than `θ·diam`.
    Disjoint { subdivided: bool },
}

/// One node of a product rule: reference points on the source panel and on the
/// target (panel reference point, or `[s, 0]` for an edge), and a positive weight
/// that already contains the kernel `1/(4π|x−y|)` and all Jacobians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairNode {
    pub source: Point2,
    pub target: Point2,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct PanelPairRule {
    pub class: RuleClass,
    pub order: usize,
    pub nodes: Vec<PairNode>,
}

#[derive(Debug, Clone)]
pub struct EdgePanelRule {
    pub class: RuleClass,
    pub order: usize,
    pub nodes: Vec<PairNode>,
}

/// Panel parametrization anchored at one local vertex: `(u, v) ↦ origin + u·e1 + v·e2`,
/// together with the matching map into the panel's canonical reference square.
#[derive(Debug, Clone, Copy)]
struct Frame {
    e1: Point2,
    e2: Point2,
    ref_origin: Point2,
    ref_e1: Point2,
    ref_e2: Point2,
}

impl Frame {
    /// Frame at local vertex `k0` with first axis towards the adjacent local vertex `k1`.
    fn new(mesh: &Mesh, q: usize, k0: usize, k1: usize) -> Frame {
        debug_assert!(k1 == (k0 + 1) % 4 || k1 == (k0 + 3) % 4);
        let k2 = if k1 == (k0 + 1) % 4 { (k0 + 3) % 4 } else { (k0 + 1) % 4 };
        let o = mesh.panel_vertex(q, k0);
        Frame {
            e1: sub(mesh.panel_vertex(q, k1), o),
            e2: sub(mesh.panel_vertex(q, k2), o),
            ref_origin: REF_CORNERS[k0],
            ref_e1: sub(REF_CORNERS[k1], REF_CORNERS[k0]),
            ref_e2: sub(REF_CORNERS[k2], REF_CORNERS[k0]),
        }
    }

    fn to_ref(self, u: f64, v: f64) -> Point2 {
        [
            self.ref_origin[0] + u * self.ref_e1[0] + v * self.ref_e2[0],
            self.ref_origin[1] + u * self.ref_e1[1] + v * self.ref_e2[1],
        ]
    }

    fn area(&self) -> f64 {
        cross(self.e1, self.e2).abs()
    }
}

fn lin(terms: &[(f64, Point2)]) -> Point2 {
    terms
        .iter()
        .fold([0.0, 0.0], |acc, (c, v)| [acc[0] + c * v[0], acc[1] + c * v[1]])
}

/// Nodes of `∫_{[0,1]^d} F(w) dw` for `F` singular like `1/|w|` at the origin:
/// the cube is split into `d` pyramids by the largest coordinate, `w = ρ·ŵ`.
/// Calls `emit(ŵ, ρ, weight)` where `weight` contains the Jacobian `ρ^{d−1}`.
fn duffy_cube(d: usize, rule: &Rule1d, mut emit: impl FnMut(&[f64], f64, f64)) {
    let q = rule.len();
    let mut hat = vec![0.0; d];
    let inner = d - 1;
    let total = q.pow(inner as u32);
    for k in 0..d {
        for (rho, wr) in rule.iter() {
            for idx in 0..total {
                let mut rem = idx;
                let mut w = wr * rho.powi(inner as i32);
                let mut slot = 0;
                for (j, h) in hat.iter_mut().enumerate() {
                    if j == k {
                        *h = 1.0;
                    } else {
                        let t = rem % q;
                        rem /= q;
                        *h = rule.points[t];
                        w *= rule.weights[t];
                        slot += 1;
                    }
                }
                debug_assert_eq!(slot, inner);
                emit(&hat, rho, w);
            }
        }
    }
}

/// Production Galerkin quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GalerkinQuadrature {
    /// Gauss order per coordinate; raised to `degree + 2` for high-degree integrands.
    pub order: usize,
    /// Separated pairs closer than `theta · diam` are subdivided before applying tensor Gauss.
    pub theta: f64,
    /// Disable the degree-based raise (rules use exactly `order`).
    pub exact: bool,
}

impl Default for GalerkinQuadrature {
    fn default() -> Self {
        GalerkinQuadrature {
            order: DEFAULT_ASSEMBLY_ORDER,
            theta: 1.0,
            exact: false,
        }
    }
}

impl GalerkinQuadrature {
    pub fn new(order: usize) -> Result<Self> {
        if order < 1 {
            return Err(Error::InvalidConfig("quadrature order must be ≥ 1".into()));
        }
        Ok(GalerkinQuadrature {
            order,
            ..Default::default()
        })
    }

    pub fn exact_order(order: usize) -> Result<Self> {
        Ok(GalerkinQuadrature {
            exact: true,
            ..Self::new(order)?
        })
    }

    fn effective_order(&self, degree: usize) -> usize {
        if self.exact {
            self.order
        } else {
            self.order.max(degree + 2)
        }
    }

    fn far_order(&self, q: usize, ratio: f64) -> usize {
        let drop = ratio.log2().floor().max(0.0) as usize;
        q.saturating_sub(drop).max(q / 2 + 1)
    }

    /// Rule for target panel `b` and source panel `a`, with integrands of degree ≤ `degree`.
    pub fn panel_pair_rule(&self, mesh: &Mesh, b: usize, a: usize, degree: usize) -> Result<PanelPairRule> {
        let q = self.effective_order(degree);
        let rule = gauss_legendre(q);
        let mut nodes = Vec::new();
        let class = match mesh.classify_pair(a, b)? {
            PairClass::Identical => {
                identical_nodes(mesh, a, &rule, &mut nodes);
                RuleClass::Identical
            }
            PairClass::CommonEdge { vertices } => {
                common_edge_nodes(mesh, b, a, vertices, &rule, &mut nodes);
                RuleClass::CommonEdge
            }
            PairClass::CommonVertex { vertex } => {
                common_vertex_nodes(mesh, b, a, vertex, &rule, &mut nodes);
                RuleClass::CommonVertex
            }
            PairClass::Disjoint => {
                let diam = mesh.diameter(a).max(mesh.diameter(b));
                let ratio = mesh.panel_distance(a, b) / diam;
                if ratio < self.theta {
                    tensor_pair_nodes(mesh, b, a, &rule, 2, &mut nodes);
                    RuleClass::Disjoint { subdivided: true }
                } else {
                    let far = gauss_legendre(self.far_order(q, ratio));
                    tensor_pair_nodes(mesh, b, a, &far, 1, &mut nodes);
                    RuleClass::Disjoint { subdivided: false }
                }
            }
        };
        Ok(PanelPairRule {
            class,
            order: q,
            nodes,
        })
    }

    /// Rule for target edge `e` and source panel `a`.
    pub fn edge_panel_rule(&self, mesh: &Mesh, e: usize, a: usize, degree: usize) -> Result<EdgePanelRule> {
        let q = self.effective_order(degree);
        let rule = gauss_legendre(q);
        let mut nodes = Vec::new();
        let class = match mesh.classify_edge_panel(e, a)? {
            EdgePanelClass::Side => {
                edge_side_nodes(mesh, e, a, &rule, &mut nodes);
                RuleClass::CommonEdge
            }
            EdgePanelClass::CommonVertex { vertex } => {
                edge_vertex_nodes(mesh, e, a, vertex, &rule, &mut nodes);
                RuleClass::CommonVertex
            }
            EdgePanelClass::Disjoint => {
                let diam = mesh.diameter(a).max(mesh.edge_length(e));
                let ratio = mesh.edge_panel_distance(e, a) / diam;
                if ratio < self.theta {
                    tensor_edge_nodes(mesh, e, a, &rule, 2, &mut nodes);
                    RuleClass::Disjoint { subdivided: true }
                } else {
                    let far = gauss_legendre(self.far_order(q, ratio));
                    tensor_edge_nodes(mesh, e, a, &far, 1, &mut nodes);
                    RuleClass::Disjoint { subdivided: false }
                }
            }
        };
        Ok(EdgePanelRule {
            class,
            order: q,
            nodes,
        })
    }
}

/// Contracts a rule against two function families.
pub(crate) fn contract(nodes: &[PairNode], g: &dyn LocalFns, f: &dyn LocalFns) -> Result<DMatrix<f64>> {
    let comps = f.comps();
    if g.comps() != comps {
        return Err(Error::DimensionMismatch(format!(
            "function families have {} and {} components",
            g.comps(),
            comps
        )));
    }
    let (ng, nf) = (g.count(), f.count());
    let mut block = DMatrix::zeros(ng, nf);
    let mut gm = DMatrix::zeros(0, ng);
    let mut fm = DMatrix::zeros(0, nf);
    for chunk in nodes.chunks(CHUNK) {
        let rows = chunk.len() * comps;
        if gm.nrows() != rows {
            gm = DMatrix::zeros(rows, ng);
            fm = DMatrix::zeros(rows, nf);
        }
        let tp: Vec<Point2> = chunk.iter().map(|n| n.target).collect();
        let sp: Vec<Point2> = chunk.iter().map(|n| n.source).collect();
        g.eval_into(&tp, &mut gm);
        f.eval_into(&sp, &mut fm);
        for (i, node) in chunk.iter().enumerate() {
            for c in 0..comps {
                fm.row_mut(i * comps + c).scale_mut(node.weight);
            }
        }
        block.gemm_tr(1.0, &gm, &fm, 1.0);
    }
    Ok(block)
}

impl PairIntegrator for GalerkinQuadrature {
    fn panel_pair(
        &self,
        mesh: &Mesh,
        target: usize,
        source: usize,
        g: &dyn LocalFns,
        f: &dyn LocalFns,
    ) -> Result<DMatrix<f64>> {
        let rule = self.panel_pair_rule(mesh, target, source, f.degree().max(g.degree()))?;
        contract(&rule.nodes, g, f)
    }

    fn edge_panel(
        &self,
        mesh: &Mesh,
        edge: usize,
        source: usize,
        g: &dyn LocalFns,
        f: &dyn LocalFns,
    ) -> Result<DMatrix<f64>> {
        let rule = self.edge_panel_rule(mesh, edge, source, f.degree().max(g.degree()))?;
        contract(&rule.nodes, g, f)
    }
}

/// Identical panels: `z = x̂ − ŷ` split into sign quadrants, each corner-split into two
/// triangles; the remaining variable `ŷ` runs over the box where both points stay in the panel.
fn identical_nodes(mesh: &Mesh, a: usize, rule: &Rule1d, nodes: &mut Vec<PairNode>) {
    let [j1, j2] = mesh.jacobian(a);
    let det = cross(j1, j2).abs();
    let scale = det * det * INV_FOUR_PI;
    for s1 in [1.0, -1.0] {
        for s2 in [1.0, -1.0] {
            for tri in 0..2 {
                for (rho, wr) in rule.iter() {
                    for (t, wt) in rule.iter() {
                        let hat = if tri == 0 { [1.0, t] } else { [t, 1.0] };
                        let za = [rho * hat[0], rho * hat[1]];
                        let z = [s1 * za[0], s2 * za[1]];
                        let r_hat = norm(lin(&[(z[0] / rho, j1), (z[1] / rho, j2)]));
                        let lo = [if s1 < 0.0 { za[0] } else { 0.0 }, if s2 < 0.0 { za[1] } else { 0.0 }];
                        let len = [1.0 - za[0], 1.0 - za[1]];
                        let base = wr * wt * len[0] * len[1] * scale / r_hat;
                        for (e1, w1) in rule.iter() {
                            for (e2, w2) in rule.iter() {
                                let y = [lo[0] + len[0] * e1, lo[1] + len[1] * e2];
                                nodes.push(PairNode {
                                    source: y,
                                    target: [y[0] + z[0], y[1] + z[1]],
                                    weight: base * w1 * w2,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
}

fn shared_edge_frames(mesh: &Mesh, b: usize, a: usize, p: usize, q: usize) -> (Frame, Frame) {
    let la = (mesh.local_vertex(a, p).unwrap(), mesh.local_vertex(a, q).unwrap());
    let lb = (mesh.local_vertex(b, p).unwrap(), mesh.local_vertex(b, q).unwrap());
    (Frame::new(mesh, a, la.0, la.1), Frame::new(mesh, b, lb.0, lb.1))
}

/// Panels sharing an edge: with both frames anchored at the same edge vertex,
/// `x − y = (x̂₁−ŷ₁)·e + x̂₂·w_b − ŷ₂·w_a`, singular only at the origin of
/// `(|x̂₁−ŷ₁|, x̂₂, ŷ₂) ∈ [0,1]³`.
fn common_edge_nodes(mesh: &Mesh, b: usize, a: usize, shared: [usize; 2], rule: &Rule1d, nodes: &mut Vec<PairNode>) {
    let (fa, fb) = shared_edge_frames(mesh, b, a, shared[0], shared[1]);
    let e = fa.e1;
    let scale = fa.area() * fb.area() * INV_FOUR_PI;
    for s in [1.0, -1.0] {
        duffy_cube(3, rule, |hat, rho, w| {
            let r_hat = norm(lin(&[(s * hat[0], e), (hat[1], fb.e2), (-hat[2], fa.e2)]));
            let zabs = rho * hat[0];
            let (u, v) = (rho * hat[1], rho * hat[2]);
            let lo = if s < 0.0 { zabs } else { 0.0 };
            let len = 1.0 - zabs;
            let base = w * len * scale / (rho * r_hat);
            for (eta, we) in rule.iter() {
                let y1 = lo + len * eta;
                nodes.push(PairNode {
                    source: fa.to_ref(y1, v),
                    target: fb.to_ref(y1 + s * zabs, u),
                    weight: base * we,
                });
            }
        });
    }
}

/// Panels sharing a vertex: `(x̂, ŷ) ∈ [0,1]⁴` in frames anchored at that vertex.
fn common_vertex_nodes(mesh: &Mesh, b: usize, a: usize, vertex: usize, rule: &Rule1d, nodes: &mut Vec<PairNode>) {
    let ka = mesh.local_vertex(a, vertex).unwrap();
    let kb = mesh.local_vertex(b, vertex).unwrap();
    let fa = Frame::new(mesh, a, ka, (ka + 1) % 4);
    let fb = Frame::new(mesh, b, kb, (kb + 1) % 4);
    let scale = fa.area() * fb.area() * INV_FOUR_PI;
    duffy_cube(4, rule, |hat, rho, w| {
        let r_hat = norm(lin(&[(hat[0], fb.e1), (hat[1], fb.e2), (-hat[2], fa.e1), (-hat[3], fa.e2)]));
        nodes.push(PairNode {
            source: fa.to_ref(rho * hat[2], rho * hat[3]),
            target: fb.to_ref(rho * hat[0], rho * hat[1]),
            weight: w * scale / (rho * r_hat),
        });
    });
}

fn sub_squares(m: usize) -> Vec<(Point2, f64)> {
    let h = 1.0 / m as f64;
    let mut out = Vec::with_capacity(m * m);
    for j in 0..m {
        for i in 0..m {
            out.push(([i as f64 * h, j as f64 * h], h));
        }
    }
    out
}

fn tensor_pair_nodes(mesh: &Mesh, b: usize, a: usize, rule: &Rule1d, m: usize, nodes: &mut Vec<PairNode>) {
    let scale = mesh.area(a) * mesh.area(b) * INV_FOUR_PI;
    let pts = |origin: Point2, h: f64| -> Vec<(Point2, f64)> {
        let mut v = Vec::with_capacity(rule.len() * rule.len());
        for (t2, w2) in rule.iter() {
            for (t1, w1) in rule.iter() {
                v.push(([origin[0] + h * t1, origin[1] + h * t2], w1 * w2 * h * h));
            }
        }
        v
    };
    let src: Vec<(Point2, f64)> = sub_squares(m).into_iter().flat_map(|(o, h)| pts(o, h)).collect();
    let tgt: Vec<(Point2, f64)> = sub_squares(m).into_iter().flat_map(|(o, h)| pts(o, h)).collect();
    let ys: Vec<Point2> = src.iter().map(|(r, _)| mesh.panel_map(a, *r)).collect();
    for (xr, wx) in &tgt {
        let x = mesh.panel_map(b, *xr);
        for ((yr, wy), y) in src.iter().zip(&ys) {
            nodes.push(PairNode {
                source: *yr,
                target: *xr,
                weight: wx * wy * scale / norm(sub(x, *y)),
            });
        }
    }
}

/// Edge `e` is a side of `a`: the frame of `a` is anchored at the edge's first endpoint with
/// axis along the edge, so `x − y = (s − ŷ₁)·e − ŷ₂·w_a`.
fn edge_side_nodes(mesh: &Mesh, e: usize, a: usize, rule: &Rule1d, nodes: &mut Vec<PairNode>) {
    let [p, q] = mesh.edges[e].endpoints;
    let fa = Frame::new(mesh, a, mesh.local_vertex(a, p).unwrap(), mesh.local_vertex(a, q).unwrap());
    let scale = fa.area() * norm(fa.e1) * INV_FOUR_PI;
    for s in [1.0, -1.0] {
        duffy_cube(2, rule, |hat, rho, w| {
            let r_hat = norm(lin(&[(s * hat[0], fa.e1), (-hat[1], fa.e2)]));
            let zabs = rho * hat[0];
            let v = rho * hat[1];
            let lo = if s < 0.0 { zabs } else { 0.0 };
            let len = 1.0 - zabs;
            let base = w * len * scale / (rho * r_hat);
            for (eta, we) in rule.iter() {
                let y1 = lo + len * eta;
                nodes.push(PairNode {
                    source: fa.to_ref(y1, v),
                    target: [y1 + s * zabs, 0.0],
                    weight: base * we,
                });
            }
        });
    }
}

/// Edge touching `a` at one vertex: `(σ, ŷ) ∈ [0,1]³` with `σ` the distance parameter from that vertex.
fn edge_vertex_nodes(mesh: &Mesh, e: usize, a: usize, vertex: usize, rule: &Rule1d, nodes: &mut Vec<PairNode>) {
    let [p, q] = mesh.edges[e].endpoints;
    let (other, forward) = if p == vertex { (q, true) } else { (p, false) };
    let d = sub(mesh.vertices[other], mesh.vertices[vertex]);
    let ka = mesh.local_vertex(a, vertex).unwrap();
    let fa = Frame::new(mesh, a, ka, (ka + 1) % 4);
    let scale = fa.area() * norm(d) * INV_FOUR_PI;
    duffy_cube(3, rule, |hat, rho, w| {
        let r_hat = norm(lin(&[(hat[0], d), (-hat[1], fa.e1), (-hat[2], fa.e2)]));
        let sigma = rho * hat[0];
        nodes.push(PairNode {
            source: fa.to_ref(rho * hat[1], rho * hat[2]),
            target: [if forward { sigma } else { 1.0 - sigma }, 0.0],
            weight: w * scale / (rho * r_hat),
        });
    });
}

fn tensor_edge_nodes(mesh: &Mesh, e: usize, a: usize, rule: &Rule1d, m: usize, nodes: &mut Vec<PairNode>) {
    let scale = mesh.area(a) * mesh.edge_length(e) * INV_FOUR_PI;
    let mut src = Vec::new();
    for (o, h) in sub_squares(m) {
        for (t2, w2) in rule.iter() {
            for (t1, w1) in rule.iter() {
                let r = [o[0] + h * t1, o[1] + h * t2];
                src.push((r, w1 * w2 * h * h, mesh.panel_map(a, r)));
            }
        }
    }
    let hs = 1.0 / m as f64;
    for seg in 0..m {
        for (t, wt) in rule.iter() {
            let s = hs * (seg as f64 + t);
            let x = mesh.edge_point(e, s);
            for (yr, wy, y) in &src {
                nodes.push(PairNode {
                    source: *yr,
                    target: [s, 0.0],
                    weight: wt * hs * wy * scale / norm(sub(x, *y)),
                });
            }
        }
    }
}
