//! Piecewise polynomial spaces on a quadrilateral mesh.
//!
//! The local basis on every panel is the tensor product of Legendre
//! polynomials on `[0, 1]`, `φ_{k1,k2}(r) = L_{k1}(2r₁−1) L_{k2}(2r₂−1)`, stored
//! at local index `k2·(p+1) + k1`. The conforming space is described by
//! Gauss–Lobatto nodal functions together with their modal expansion on each
//! panel, so both kinds share the same modal evaluation path.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gauss::{gauss_legendre, gauss_lobatto_points, legendre_with_derivatives};
use crate::mesh::{Mesh, Point2};

/// Value and surface curl `(∂₂φ, −∂₁φ)` of a basis function at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisValue {
    pub value: f64,
    pub curl: [f64; 2],
}

/// Shifted Legendre values `L_k(2t−1)` and their `t`-derivatives, `k = 0..=p`.
pub fn shifted_legendre(p: usize, t: f64, values: &mut [f64], derivs: &mut [f64]) {
    legendre_with_derivatives(p, 2.0 * t - 1.0, values, derivs);
    for d in derivs.iter_mut().take(p + 1) {
        *d *= 2.0;
    }
}

pub fn local_dim(p: usize) -> usize {
    (p + 1) * (p + 1)
}

/// Tensor Legendre basis of degree `p` at reference point `r`; curls are with
/// respect to reference coordinates.
pub fn eval_local_basis(p: usize, r: Point2) -> Vec<BasisValue> {
    let n = p + 1;
    let (mut v1, mut d1, mut v2, mut d2) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    shifted_legendre(p, r[0], &mut v1, &mut d1);
    shifted_legendre(p, r[1], &mut v2, &mut d2);
    let mut out = Vec::with_capacity(n * n);
    for k2 in 0..n {
        for k1 in 0..n {
            let g = [d1[k1] * v2[k2], v1[k1] * d2[k2]];
            out.push(BasisValue {
                value: v1[k1] * v2[k2],
                curl: [g[1], -g[0]],
            });
        }
    }
    out
}

/// Reusable workspace for evaluating the modal basis of one degree at many points.
#[derive(Debug, Clone)]
pub struct BasisEvaluator {
    p: usize,
    v1: Vec<f64>,
    d1: Vec<f64>,
    v2: Vec<f64>,
    d2: Vec<f64>,
}

impl BasisEvaluator {
    pub fn new(p: usize) -> Self {
        let n = p + 1;
        BasisEvaluator {
            p,
            v1: vec![0.0; n],
            d1: vec![0.0; n],
            v2: vec![0.0; n],
            d2: vec![0.0; n],
        }
    }

    pub fn degree(&self) -> usize {
        self.p
    }

    pub fn values(&mut self, r: Point2, out: &mut [f64]) {
        let n = self.p + 1;
        shifted_legendre(self.p, r[0], &mut self.v1, &mut self.d1);
        shifted_legendre(self.p, r[1], &mut self.v2, &mut self.d2);
        for k2 in 0..n {
            for k1 in 0..n {
                out[k2 * n + k1] = self.v1[k1] * self.v2[k2];
            }
        }
    }

    /// Physical curls: `out[0..dim]` first component, `out[dim..2 dim]` second.
    /// `jit` is the row-major inverse transpose Jacobian of the panel map.
    pub fn curls(&mut self, r: Point2, jit: &[[f64; 2]; 2], out: &mut [f64]) {
        let n = self.p + 1;
        let dim = n * n;
        shifted_legendre(self.p, r[0], &mut self.v1, &mut self.d1);
        shifted_legendre(self.p, r[1], &mut self.v2, &mut self.d2);
        for k2 in 0..n {
            for k1 in 0..n {
                let gr = [self.d1[k1] * self.v2[k2], self.v1[k1] * self.d2[k2]];
                let g0 = jit[0][0] * gr[0] + jit[0][1] * gr[1];
                let g1 = jit[1][0] * gr[0] + jit[1][1] * gr[1];
                out[k2 * n + k1] = g1;
                out[dim + k2 * n + k1] = -g0;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    Discontinuous,
    ConformingZeroTrace,
}

#[derive(Debug, Clone)]
pub struct HpSpace {
    mesh: Arc<Mesh>,
    degrees: Vec<usize>,
    kind: SpaceKind,
    /// Global dof of each local function (modal for DG, nodal for conforming);
    /// `None` marks boundary nodes removed by the zero-trace condition.
    dof_map: Vec<Vec<Option<usize>>>,
    total_dofs: usize,
    /// Modal coefficients of the nodal functions (conforming kind only, one per degree).
    nodal_to_modal: Option<DMatrix<f64>>,
}

/// `C[k][a] = (2k+1) ∫₀¹ ℓ_a(t) L_k(2t−1) dt` for Lagrange polynomials on the GLL points.
fn lagrange_to_legendre_1d(p: usize) -> DMatrix<f64> {
    let nodes = gauss_lobatto_points(p);
    let rule = gauss_legendre(p + 1);
    let n = p + 1;
    let mut c = DMatrix::zeros(n, n);
    let (mut v, mut d) = (vec![0.0; n], vec![0.0; n]);
    for (t, w) in rule.iter() {
        shifted_legendre(p, t, &mut v, &mut d);
        for a in 0..n {
            let mut ell = 1.0;
            for (b, &nb) in nodes.iter().enumerate() {
                if b != a {
                    ell *= (t - nb) / (nodes[a] - nb);
                }
            }
            for k in 0..n {
                c[(k, a)] += (2 * k + 1) as f64 * w * ell * v[k];
            }
        }
    }
    c
}

fn quantize(x: Point2, scale: f64) -> (i64, i64) {
    let f = 2f64.powi(30) / scale;
    ((x[0] * f).round() as i64, (x[1] * f).round() as i64)
}

impl HpSpace {
    pub fn uniform(mesh: Arc<Mesh>, p: usize, kind: SpaceKind) -> Result<HpSpace> {
        let degrees = vec![p; mesh.num_panels()];
        build_space(mesh, degrees, kind)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn degree(&self, q: usize) -> usize {
        self.degrees[q]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn max_degree(&self) -> usize {
        self.degrees.iter().copied().max().unwrap_or(0)
    }

    pub fn total_dofs(&self) -> usize {
        self.total_dofs
    }

    /// Number of modal functions on panel `q`.
    pub fn modal_dim(&self, q: usize) -> usize {
        local_dim(self.degrees[q])
    }

    pub fn panel_dofs(&self, q: usize) -> &[Option<usize>] {
        &self.dof_map[q]
    }

    /// Modal coefficients (rows) of the local functions (columns) on a panel;
    /// `None` means the identity (discontinuous kind).
    pub fn local_to_modal(&self) -> Option<&DMatrix<f64>> {
        self.nodal_to_modal.as_ref()
    }

    /// Modal coefficients of the function `coeffs` restricted to panel `q`.
    pub fn modal_coefficients(&self, q: usize, coeffs: &DVector<f64>) -> Vec<f64> {
        let local: Vec<f64> = self.dof_map[q]
            .iter()
            .map(|d| d.map_or(0.0, |g| coeffs[g]))
            .collect();
        match &self.nodal_to_modal {
            None => local,
            Some(e) => (e * DVector::from_vec(local)).as_slice().to_vec(),
        }
    }

    /// Modal basis of panel `q` at reference point `r` with physical curls.
    pub fn eval_panel_basis(&self, q: usize, r: Point2) -> Vec<BasisValue> {
        let jit = self.mesh.inverse_transpose_jacobian(q);
        eval_local_basis(self.degrees[q], r)
            .into_iter()
            .map(|b| {
                // reference curl = (∂̂₂, −∂̂₁); recover the reference gradient first
                let gr = [-b.curl[1], b.curl[0]];
                let g0 = jit[0][0] * gr[0] + jit[0][1] * gr[1];
                let g1 = jit[1][0] * gr[0] + jit[1][1] * gr[1];
                BasisValue {
                    value: b.value,
                    curl: [g1, -g0],
                }
            })
            .collect()
    }

    /// Value on panel `q` at reference point `r`.
    pub fn eval_panel(&self, q: usize, r: Point2, coeffs: &DVector<f64>) -> f64 {
        let modal = self.modal_coefficients(q, coeffs);
        let mut vals = vec![0.0; modal.len()];
        BasisEvaluator::new(self.degrees[q]).values(r, &mut vals);
        vals.iter().zip(&modal).map(|(v, c)| v * c).sum()
    }

    /// Trace of panel `q`'s function at parameter `s` of edge `e`.
    pub fn trace_at(&self, q: usize, e: usize, s: f64, coeffs: &DVector<f64>) -> f64 {
        let x = self.mesh.edge_point(e, s);
        self.eval_panel(q, self.mesh.panel_inverse_map(q, x), coeffs)
    }

    /// Jump at edge parameter `s`: owner trace minus neighbor trace, or the owner trace on the boundary.
    pub fn jump_at(&self, e: usize, s: f64, coeffs: &DVector<f64>) -> f64 {
        let edge = &self.mesh.edges[e];
        let mut j = self.trace_at(edge.owner, e, s, coeffs);
        if let Some(nb) = edge.neighbor {
            j -= self.trace_at(nb, e, s, coeffs);
        }
        j
    }

    /// Jump at a physical point on edge `e`.
    pub fn eval_jump(&self, e: usize, point: Point2, coeffs: &DVector<f64>) -> Result<f64> {
        if e >= self.mesh.num_edges() {
            return Err(Error::IndexOutOfRange {
                what: "edge",
                index: e,
                len: self.mesh.num_edges(),
            });
        }
        let [a, b] = self.mesh.edges[e].endpoints;
        let (pa, pb) = (self.mesh.vertices[a], self.mesh.vertices[b]);
        let d = [pb[0] - pa[0], pb[1] - pa[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        let s = ((point[0] - pa[0]) * d[0] + (point[1] - pa[1]) * d[1]) / len2;
        let off = ((point[0] - pa[0]) * d[1] - (point[1] - pa[1]) * d[0]).abs() / len2.sqrt();
        if off > 1e-10 * len2.sqrt() || !(-1e-12..=1.0 + 1e-12).contains(&s) {
            return Err(Error::InvalidConfig(format!("point {point:?} is not on edge {e}")));
        }
        Ok(self.jump_at(e, s.clamp(0.0, 1.0), coeffs))
    }

    /// Legendre coefficients in the edge parameter of the traces of panel `q`'s
    /// modal functions on edge `e`: rows are modal functions, columns `ℓ_m(s) = L_m(2s−1)`, `m ≤ pmax`.
    pub fn edge_trace_coefficients(&self, q: usize, e: usize, pmax: usize) -> DMatrix<f64> {
        let p = self.degrees[q];
        let dim = local_dim(p);
        let rule = gauss_legendre(pmax.max(p) + 1);
        let mut out = DMatrix::zeros(dim, pmax + 1);
        let mut eval = BasisEvaluator::new(p);
        let mut vals = vec![0.0; dim];
        let (mut lv, mut ld) = (vec![0.0; pmax + 1], vec![0.0; pmax + 1]);
        for (s, w) in rule.iter() {
            let r = self.mesh.panel_inverse_map(q, self.mesh.edge_point(e, s));
            eval.values(r, &mut vals);
            shifted_legendre(pmax, s, &mut lv, &mut ld);
            for m in 0..=pmax {
                let f = (2 * m + 1) as f64 * w * lv[m];
                for (i, v) in vals.iter().enumerate() {
                    out[(i, m)] += f * v;
                }
            }
        }
        out
    }

    /// Matrix mapping conforming coefficients to coefficients of the discontinuous
    /// space with the same mesh and degrees.
    pub fn embedding_matrix(&self) -> Result<DMatrix<f64>> {
        let e = self.require_conforming()?;
        let dg_dofs: usize = (0..self.mesh.num_panels()).map(|q| self.modal_dim(q)).sum();
        let mut out = DMatrix::zeros(dg_dofs, self.total_dofs);
        let mut offset = 0;
        for q in 0..self.mesh.num_panels() {
            for (m, d) in self.dof_map[q].iter().enumerate() {
                if let Some(g) = d {
                    for k in 0..e.nrows() {
                        out[(offset + k, *g)] = e[(k, m)];
                    }
                }
            }
            offset += self.modal_dim(q);
        }
        Ok(out)
    }

    /// Conforming coefficients expressed in the matching discontinuous space.
    pub fn embed_coefficients(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        self.require_conforming()?;
        let mut out = Vec::new();
        for q in 0..self.mesh.num_panels() {
            out.extend(self.modal_coefficients(q, w));
        }
        Ok(DVector::from_vec(out))
    }

    fn require_conforming(&self) -> Result<&DMatrix<f64>> {
        self.nodal_to_modal
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("operation requires a conforming space".into()))
    }
}

pub fn build_space(mesh: Arc<Mesh>, degrees: Vec<usize>, kind: SpaceKind) -> Result<HpSpace> {
    if degrees.len() != mesh.num_panels() {
        return Err(Error::InvalidConfig(format!(
            "{} degrees given for {} panels",
            degrees.len(),
            mesh.num_panels()
        )));
    }
    match kind {
        SpaceKind::Discontinuous => {
            let mut dof_map = Vec::with_capacity(degrees.len());
            let mut next = 0;
            for &p in &degrees {
                let n = local_dim(p);
                dof_map.push((next..next + n).map(Some).collect());
                next += n;
            }
            Ok(HpSpace {
                mesh,
                degrees,
                kind,
                dof_map,
                total_dofs: next,
                nodal_to_modal: None,
            })
        }
        SpaceKind::ConformingZeroTrace => {
            let p = degrees[0];
            if degrees.iter().any(|&d| d != p) {
                return Err(Error::InvalidConfig(
                    "conforming space requires a uniform polynomial degree".into(),
                ));
            }
            if p == 0 {
                return Err(Error::InvalidConfig("conforming space requires degree ≥ 1".into()));
            }
            let c = lagrange_to_legendre_1d(p);
            let n = p + 1;
            let mut e = DMatrix::zeros(n * n, n * n);
            for b in 0..n {
                for a in 0..n {
                    for k2 in 0..n {
                        for k1 in 0..n {
                            e[(k2 * n + k1, b * n + a)] = c[(k1, a)] * c[(k2, b)];
                        }
                    }
                }
            }
            let nodes = gauss_lobatto_points(p);
            let scale = mesh.h;
            let mut ids: HashMap<(i64, i64), usize> = HashMap::new();
            let mut dof_map = Vec::with_capacity(mesh.num_panels());
            for q in 0..mesh.num_panels() {
                let sides = mesh.panel_edges[q].map(|e| mesh.edges[e].is_boundary);
                let mut local = Vec::with_capacity(n * n);
                for b in 0..n {
                    for a in 0..n {
                        // side 0: r₂ = 0, side 1: r₁ = 1, side 2: r₂ = 1, side 3: r₁ = 0
                        let on_boundary = (b == 0 && sides[0])
                            || (a == p && sides[1])
                            || (b == p && sides[2])
                            || (a == 0 && sides[3]);
                        if on_boundary {
                            local.push(None);
                            continue;
                        }
                        let x = mesh.panel_map(q, [nodes[a], nodes[b]]);
                        let next = ids.len();
                        local.push(Some(*ids.entry(quantize(x, scale)).or_insert(next)));
                    }
                }
                dof_map.push(local);
            }
            Ok(HpSpace {
                mesh,
                degrees,
                kind,
                dof_map,
                total_dofs: ids.len(),
                nodal_to_modal: Some(e),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_uniform_square_mesh;

    fn mesh(n: usize) -> Arc<Mesh> {
        Arc::new(build_uniform_square_mesh(n).unwrap())
    }

    #[test]
    fn constant_basis_has_zero_curl() {
        let b = eval_local_basis(0, [0.3, 0.8]);
        assert_eq!(b, vec![BasisValue { value: 1.0, curl: [0.0, 0.0] }]);
    }

    #[test]
    fn linear_modes_vanish_at_center() {
        let b = eval_local_basis(1, [0.5, 0.5]);
        assert_eq!(b.len(), 4);
        assert_eq!(b[0].value, 1.0);
        for v in &b[1..] {
            assert!(v.value.abs() < 1e-15);
        }
    }

    #[test]
    fn degree_two_gram_matrix_is_diagonal() {
        // oracle: tensor Gauss rule exact for degree 2·2 in each coordinate
        let rule = gauss_legendre(4);
        let mut gram = DMatrix::<f64>::zeros(9, 9);
        for (x, wx) in rule.iter() {
            for (y, wy) in rule.iter() {
                let b = eval_local_basis(2, [x, y]);
                for i in 0..9 {
                    for j in 0..9 {
                        gram[(i, j)] += wx * wy * b[i].value * b[j].value;
                    }
                }
            }
        }
        for i in 0..9 {
            let (k1, k2) = (i % 3, i / 3);
            let expected = 1.0 / ((2 * k1 + 1) * (2 * k2 + 1)) as f64;
            assert!((gram[(i, i)] - expected).abs() < 1e-14);
            for j in 0..9 {
                if i != j {
                    assert!(gram[(i, j)].abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn reference_curls_match_finite_differences() {
        let r = [0.31, 0.67];
        let eps = 1e-6;
        let b = eval_local_basis(3, r);
        let bx = eval_local_basis(3, [r[0] + eps, r[1]]);
        let bxm = eval_local_basis(3, [r[0] - eps, r[1]]);
        let by = eval_local_basis(3, [r[0], r[1] + eps]);
        let bym = eval_local_basis(3, [r[0], r[1] - eps]);
        for i in 0..b.len() {
            let d1 = (bx[i].value - bxm[i].value) / (2.0 * eps);
            let d2 = (by[i].value - bym[i].value) / (2.0 * eps);
            assert!((b[i].curl[0] - d2).abs() < 1e-6);
            assert!((b[i].curl[1] + d1).abs() < 1e-6);
        }
    }

    #[test]
    fn physical_curl_scales_with_panel_size() {
        let s = HpSpace::uniform(mesh(4), 2, SpaceKind::Discontinuous).unwrap();
        let r = [0.2, 0.9];
        let phys = s.eval_panel_basis(5, r);
        let refb = eval_local_basis(2, r);
        for (a, b) in phys.iter().zip(&refb) {
            assert!((a.curl[0] - 4.0 * b.curl[0]).abs() < 1e-12);
            assert!((a.curl[1] - 4.0 * b.curl[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn dof_counts() {
        assert_eq!(HpSpace::uniform(mesh(2), 1, SpaceKind::Discontinuous).unwrap().total_dofs(), 16);
        assert_eq!(HpSpace::uniform(mesh(2), 1, SpaceKind::ConformingZeroTrace).unwrap().total_dofs(), 1);
        assert_eq!(HpSpace::uniform(mesh(5), 3, SpaceKind::Discontinuous).unwrap().total_dofs(), 400);
        assert_eq!(
            HpSpace::uniform(mesh(5), 3, SpaceKind::ConformingZeroTrace).unwrap().total_dofs(),
            14 * 14
        );
    }

    #[test]
    fn variable_degrees_and_conforming_restriction() {
        let m = mesh(2);
        let s = build_space(m.clone(), vec![1, 2, 3, 1], SpaceKind::Discontinuous).unwrap();
        assert_eq!(s.total_dofs(), 4 + 9 + 16 + 4);
        assert!(build_space(m.clone(), vec![1, 2, 1, 1], SpaceKind::ConformingZeroTrace).is_err());
        assert!(build_space(m, vec![1, 1], SpaceKind::Discontinuous).is_err());
    }

    #[test]
    fn jump_conventions() {
        let m = mesh(2);
        let s = HpSpace::uniform(m.clone(), 1, SpaceKind::Discontinuous).unwrap();
        // constant 1 on panel 0 only
        let mut c = DVector::zeros(16);
        c[0] = 1.0;
        let interior = m.edges.iter().position(|e| !e.is_boundary && e.owner == 0).unwrap();
        assert!((s.jump_at(interior, 0.3, &c) - 1.0).abs() < 1e-15);
        // constant 1 everywhere: interior jumps vanish, boundary traces are 1
        let mut one = DVector::zeros(16);
        for q in 0..4 {
            one[4 * q] = 1.0;
        }
        for (e, edge) in m.edges.iter().enumerate() {
            let j = s.jump_at(e, 0.7, &one);
            if edge.is_boundary {
                assert!((j - 1.0).abs() < 1e-15);
            } else {
                assert!(j.abs() < 1e-15);
            }
        }
        let pt = m.edge_point(interior, 0.25);
        assert!((s.eval_jump(interior, pt, &c).unwrap() - 1.0).abs() < 1e-15);
        assert!(s.eval_jump(interior, [0.9, 0.9], &c).is_err());
    }

    #[test]
    fn embedded_conforming_functions_have_no_jumps() {
        let m = mesh(3);
        for p in 1..=4 {
            let conf = HpSpace::uniform(m.clone(), p, SpaceKind::ConformingZeroTrace).unwrap();
            let dg = HpSpace::uniform(m.clone(), p, SpaceKind::Discontinuous).unwrap();
            let w = DVector::from_fn(conf.total_dofs(), |i, _| ((i * 37 % 11) as f64 - 5.0) / 3.0);
            let c = conf.embed_coefficients(&w).unwrap();
            let e = conf.embedding_matrix().unwrap();
            assert!((&e * &w - &c).amax() < 1e-13);
            for edge in 0..m.num_edges() {
                for s in [0.0, 0.13, 0.5, 0.91, 1.0] {
                    assert!(dg.jump_at(edge, s, &c).abs() < 1e-12, "p={p} edge={edge}");
                }
            }
            // value agrees with the nodal representation
            let q = 4;
            let direct = conf.eval_panel(q, [0.3, 0.6], &w);
            let via = dg.eval_panel(q, [0.3, 0.6], &c);
            assert!((direct - via).abs() < 1e-12);
        }
    }

    #[test]
    fn edge_trace_coefficients_reproduce_traces() {
        let m = mesh(2);
        let s = HpSpace::uniform(m.clone(), 3, SpaceKind::Discontinuous).unwrap();
        let coeffs = DVector::from_fn(s.total_dofs(), |i, _| (i as f64 * 0.37).sin());
        for e in 0..m.num_edges() {
            let q = m.edges[e].owner;
            let t = s.edge_trace_coefficients(q, e, 3);
            let local = s.modal_coefficients(q, &coeffs);
            for x in [0.1, 0.45, 0.8] {
                let (mut lv, mut ld) = (vec![0.0; 4], vec![0.0; 4]);
                shifted_legendre(3, x, &mut lv, &mut ld);
                let mut via = 0.0;
                for i in 0..16 {
                    for mm in 0..4 {
                        via += local[i] * t[(i, mm)] * lv[mm];
                    }
                }
                assert!((via - s.trace_at(q, e, x, &coeffs)).abs() < 1e-12);
            }
        }
    }
}
