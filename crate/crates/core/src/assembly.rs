//! Dense assembly of the DG system `A(ν) = K + B − Bᵀ + νP` and of the
//! conforming reference system.
//!
//! With `φ_i` the global basis functions,
//!
//! * `K[i][j] = ⟨V curl_h φ_j, curl_h φ_i⟩`
//! * `B[i][j] = Σ_e ∫_e (V curl_h φ_j)·t_e [φ_i] ds`
//! * `P[i][j] = Σ_e ∫_e [φ_j][φ_i] ds`
//!
//! so that `A[i][j] = a_h(φ_j, φ_i)`. Kernel blocks depend only on the relative
//! geometry of the two entities, so each distinct configuration is integrated
//! once (in parallel) and then scattered serially; the result does not depend
//! on the number of worker threads.

use std::collections::HashMap;
use std::hash::Hash;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gauss::gauss_legendre;
use crate::mesh::{Mesh, Point2};
use crate::quadrature::{EdgeLegendre, GalerkinQuadrature, ModalCurlTangent, ModalCurls, PairIntegrator};
use crate::space::{local_dim, BasisEvaluator, HpSpace, SpaceKind};

/// Right-hand side `f` of `⟨W u, v⟩ = ⟨f, v⟩`.
#[derive(Clone)]
pub enum LoadFn {
    Constant(f64),
    Function(Arc<dyn Fn(Point2) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for LoadFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LoadFn::Constant(c) => write!(f, "Constant({c})"),
            LoadFn::Function(_) => write!(f, "Function(..)"),
        }
    }
}

impl Default for LoadFn {
    fn default() -> Self {
        LoadFn::Constant(1.0)
    }
}

/// Configuration of a uniform-mesh DG run.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DgConfig {
    /// Panels per side of the uniform mesh.
    pub n: usize,
    pub p: usize,
    pub nu: f64,
    pub quad_order: usize,
    /// Worker threads for assembly; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for DgConfig {
    fn default() -> Self {
        DgConfig {
            n: 4,
            p: 1,
            nu: 1.0,
            quad_order: crate::quadrature::DEFAULT_ASSEMBLY_ORDER,
            threads: None,
        }
    }
}

impl DgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("mesh parameter n must be ≥ 1".into()));
        }
        if !(self.nu > 0.0) || !self.nu.is_finite() {
            return Err(Error::InvalidConfig(format!("penalty ν must be positive, got {}", self.nu)));
        }
        if self.quad_order < 2 {
            return Err(Error::InvalidConfig("quadrature order must be ≥ 2".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidConfig("thread count must be ≥ 1".into()));
        }
        Ok(())
    }

    pub fn quadrature(&self) -> Result<GalerkinQuadrature> {
        GalerkinQuadrature::new(self.quad_order)
    }
}

/// The four blocks of the DG system, kept apart so that `ν` can vary cheaply.
#[derive(Debug, Clone)]
pub struct DgSystem {
    pub k: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub space: Arc<HpSpace>,
}

impl DgSystem {
    /// `K + B − Bᵀ + νP`.
    pub fn matrix(&self, nu: f64) -> DMatrix<f64> {
        let n = self.k.nrows();
        DMatrix::from_fn(n, n, |i, j| self.k[(i, j)] + self.b[(i, j)] - self.b[(j, i)] + nu * self.p[(i, j)])
    }

    pub fn dofs(&self) -> usize {
        self.rhs.len()
    }
}

#[derive(Debug, Clone)]
pub struct ConformingSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub space: Arc<HpSpace>,
}

/// Runs `f` on a pool with `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

type QPoint = (i64, i64);

fn quantize(x: Point2, origin: Point2, scale: f64) -> QPoint {
    let f = 2f64.powi(26) / scale;
    (((x[0] - origin[0]) * f).round() as i64, ((x[1] - origin[1]) * f).round() as i64)
}

/// Relative geometry of a target panel and a source panel, with both degrees.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct PairKey {
    target: [QPoint; 4],
    source: [QPoint; 4],
    pt: usize,
    ps: usize,
}

/// Relative geometry of a target edge (ordered endpoints) and a source panel.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct EdgeKey {
    edge: [QPoint; 2],
    source: [QPoint; 4],
    pmax: usize,
    ps: usize,
}

fn pair_key(mesh: &Mesh, target: usize, source: usize, pt: usize, ps: usize) -> PairKey {
    let o = mesh.panel_vertex(source, 0);
    PairKey {
        target: std::array::from_fn(|k| quantize(mesh.panel_vertex(target, k), o, mesh.h)),
        source: std::array::from_fn(|k| quantize(mesh.panel_vertex(source, k), o, mesh.h)),
        pt,
        ps,
    }
}

fn edge_key(mesh: &Mesh, e: usize, source: usize, pmax: usize, ps: usize) -> EdgeKey {
    let o = mesh.panel_vertex(source, 0);
    let ends = mesh.edges[e].endpoints;
    EdgeKey {
        edge: ends.map(|v| quantize(mesh.vertices[v], o, mesh.h)),
        source: std::array::from_fn(|k| quantize(mesh.panel_vertex(source, k), o, mesh.h)),
        pmax,
        ps,
    }
}

/// Deduplicates `keys`, integrating one representative per class in parallel.
/// Returns the blocks and, for every input, the index of its block.
fn unique_blocks<K, F>(keys: Vec<(K, (usize, usize))>, compute: F) -> Result<(Vec<DMatrix<f64>>, Vec<usize>)>
where
    K: Eq + Hash,
    F: Fn(usize, usize) -> Result<DMatrix<f64>> + Sync,
{
    let mut index: HashMap<K, usize> = HashMap::new();
    let mut reps = Vec::new();
    let mut slot = Vec::with_capacity(keys.len());
    for (key, ids) in keys {
        let next = reps.len();
        let id = *index.entry(key).or_insert_with(|| {
            reps.push(ids);
            next
        });
        slot.push(id);
    }
    log::debug!("{} blocks, {} distinct", slot.len(), reps.len());
    let blocks = reps
        .par_iter()
        .map(|&(x, y)| compute(x, y))
        .collect::<Result<Vec<_>>>()?;
    Ok((blocks, slot))
}

fn modal_curls(space: &HpSpace, q: usize) -> ModalCurls {
    ModalCurls {
        p: space.degree(q),
        jit: space.mesh().inverse_transpose_jacobian(q),
    }
}

/// Modal curl-curl blocks `⟨V curl φ_a, curl φ_b⟩` for target `b ≤` source `a`,
/// returned as `(b, a, block index)` together with the distinct blocks.
type BlockTable = (Vec<DMatrix<f64>>, Vec<(usize, usize, usize)>);

fn modal_k_blocks<I: PairIntegrator>(space: &HpSpace, integrator: &I) -> Result<BlockTable> {
    let mesh = space.mesh();
    let np = mesh.num_panels();
    let mut keys = Vec::with_capacity(np * (np + 1) / 2);
    for a in 0..np {
        for b in 0..=a {
            keys.push((pair_key(mesh, b, a, space.degree(b), space.degree(a)), (b, a)));
        }
    }
    let pairs: Vec<(usize, usize)> = keys.iter().map(|(_, ids)| *ids).collect();
    let (blocks, slot) = unique_blocks(keys, |b, a| {
        integrator.panel_pair(mesh, b, a, &modal_curls(space, b), &modal_curls(space, a))
    })?;
    Ok((blocks, pairs.into_iter().zip(slot).map(|((b, a), s)| (b, a, s)).collect()))
}

fn dg_offsets(space: &HpSpace) -> Vec<usize> {
    let mut off = Vec::with_capacity(space.mesh().num_panels() + 1);
    let mut next = 0;
    for q in 0..space.mesh().num_panels() {
        off.push(next);
        next += space.modal_dim(q);
    }
    off.push(next);
    off
}

fn require_kind(space: &HpSpace, kind: SpaceKind) -> Result<()> {
    if space.kind() != kind {
        return Err(Error::InvalidConfig(format!(
            "operation requires a {kind:?} space, got {:?}",
            space.kind()
        )));
    }
    Ok(())
}

/// `K[i][j] = ⟨V curl_h φ_j, curl_h φ_i⟩` on a discontinuous space; exactly symmetric.
pub fn assemble_k<I: PairIntegrator>(space: &HpSpace, integrator: &I) -> Result<DMatrix<f64>> {
    require_kind(space, SpaceKind::Discontinuous)?;
    let (blocks, pairs) = modal_k_blocks(space, integrator)?;
    let off = dg_offsets(space);
    let n = space.total_dofs();
    let mut k = DMatrix::zeros(n, n);
    for (b, a, s) in pairs {
        let blk = &blocks[s];
        let (rb, ca) = (off[b], off[a]);
        for j in 0..blk.ncols() {
            for i in 0..blk.nrows() {
                if a == b {
                    k[(rb + i, ca + j)] = 0.5 * (blk[(i, j)] + blk[(j, i)]);
                } else {
                    k[(rb + i, ca + j)] = blk[(i, j)];
                    k[(ca + j, rb + i)] = blk[(i, j)];
                }
            }
        }
    }
    Ok(k)
}

/// Highest degree of the panels adjacent to each edge.
fn edge_degrees(space: &HpSpace) -> Vec<usize> {
    space
        .mesh()
        .edges
        .iter()
        .map(|e| space.degree(e.owner).max(e.neighbor.map_or(0, |q| space.degree(q))))
        .collect()
}

/// `B[i][j] = Σ_e ∫_e (V curl_h φ_j)·t_e [φ_i] ds` on a discontinuous space.
///
/// Per edge, the moments `M[m][j] = ∫_e ℓ_m(s) (V curl φ_j)·t_e ds` against the
/// edge Legendre polynomials are combined with the Legendre coefficients of the
/// adjacent traces.
pub fn assemble_b<I: PairIntegrator>(space: &HpSpace, integrator: &I) -> Result<DMatrix<f64>> {
    require_kind(space, SpaceKind::Discontinuous)?;
    let mesh = space.mesh();
    let (np, ne) = (mesh.num_panels(), mesh.num_edges());
    let pmax = edge_degrees(space);
    let mut keys = Vec::with_capacity(ne * np);
    for (e, &pe) in pmax.iter().enumerate() {
        for a in 0..np {
            keys.push((edge_key(mesh, e, a, pe, space.degree(a)), (e, a)));
        }
    }
    let (blocks, slot) = unique_blocks(keys, |e, a| {
        let g = EdgeLegendre { pmax: pmax[e] };
        let f = ModalCurlTangent {
            p: space.degree(a),
            jit: mesh.inverse_transpose_jacobian(a),
            tangent: mesh.edges[e].tangent,
        };
        integrator.edge_panel(mesh, e, a, &g, &f)
    })?;
    let off = dg_offsets(space);
    let n = space.total_dofs();
    let mut bmat = DMatrix::zeros(n, n);
    for e in 0..ne {
        let mut moments = DMatrix::zeros(pmax[e] + 1, n);
        for a in 0..np {
            let blk = &blocks[slot[e * np + a]];
            moments.columns_mut(off[a], blk.ncols()).copy_from(blk);
        }
        let edge = &mesh.edges[e];
        for (q, sign) in std::iter::once((edge.owner, 1.0)).chain(edge.neighbor.map(|q| (q, -1.0))) {
            let t = space.edge_trace_coefficients(q, e, pmax[e]);
            let mut rows = bmat.rows_mut(off[q], t.nrows());
            rows.gemm(sign, &t, &moments, 1.0);
        }
    }
    Ok(bmat)
}

/// `P[i][j] = Σ_e ∫_e [φ_j][φ_i] ds`, exact by Legendre orthogonality of the edge traces.
pub fn assemble_p(space: &HpSpace) -> Result<DMatrix<f64>> {
    require_kind(space, SpaceKind::Discontinuous)?;
    let mesh = space.mesh();
    let off = dg_offsets(space);
    let pmax = edge_degrees(space);
    let n = space.total_dofs();
    let mut pm = DMatrix::zeros(n, n);
    for (e, edge) in mesh.edges.iter().enumerate() {
        let len = mesh.edge_length(e);
        let weights = DVector::from_fn(pmax[e] + 1, |m, _| len / (2 * m + 1) as f64);
        let sides: Vec<(usize, DMatrix<f64>)> = std::iter::once((edge.owner, 1.0))
            .chain(edge.neighbor.map(|q| (q, -1.0)))
            .map(|(q, s)| (q, space.edge_trace_coefficients(q, e, pmax[e]) * s))
            .collect();
        for (qi, ti) in &sides {
            for (qj, tj) in &sides {
                let mut tw = tj.clone();
                for (m, w) in weights.iter().enumerate() {
                    tw.column_mut(m).scale_mut(*w);
                }
                let mut blk = pm.view_mut((off[*qi], off[*qj]), (ti.nrows(), tj.nrows()));
                blk.gemm(1.0, ti, &tw.transpose(), 1.0);
            }
        }
    }
    // the two triangles accumulate in different orders; remove the rounding asymmetry
    let sym = (&pm + pm.transpose()) * 0.5;
    Ok(sym)
}

/// Modal load vector `⟨f, φ_k⟩_Q` on each panel, concatenated.
fn modal_rhs(space: &HpSpace, load: &LoadFn) -> DVector<f64> {
    let mesh = space.mesh();
    let mut out = Vec::new();
    for q in 0..mesh.num_panels() {
        let p = space.degree(q);
        let dim = local_dim(p);
        let area = mesh.area(q);
        match load {
            LoadFn::Constant(c) => {
                out.push(c * area);
                out.extend(std::iter::repeat_n(0.0, dim - 1));
            }
            LoadFn::Function(f) => {
                let rule = gauss_legendre(p + 8);
                let mut ev = BasisEvaluator::new(p);
                let mut vals = vec![0.0; dim];
                let mut acc = vec![0.0; dim];
                for (t2, w2) in rule.iter() {
                    for (t1, w1) in rule.iter() {
                        let r = [t1, t2];
                        let fx = f(mesh.panel_map(q, r));
                        ev.values(r, &mut vals);
                        for (a, v) in acc.iter_mut().zip(&vals) {
                            *a += w1 * w2 * area * fx * v;
                        }
                    }
                }
                out.extend(acc);
            }
        }
    }
    DVector::from_vec(out)
}

/// `rhs[i] = ⟨f, φ_i⟩` for either kind of space.
pub fn assemble_rhs(space: &HpSpace, load: &LoadFn) -> Result<DVector<f64>> {
    let modal = modal_rhs(space, load);
    match space.local_to_modal() {
        None => Ok(modal),
        Some(e) => {
            let off = dg_offsets(space);
            let mut out = DVector::zeros(space.total_dofs());
            for q in 0..space.mesh().num_panels() {
                let local = e.tr_mul(&modal.rows(off[q], off[q + 1] - off[q]));
                for (m, d) in space.panel_dofs(q).iter().enumerate() {
                    if let Some(g) = d {
                        out[*g] += local[m];
                    }
                }
            }
            Ok(out)
        }
    }
}

/// Assembles `K`, `B`, `P` and the load vector on a discontinuous space.
pub fn assemble_dg<I: PairIntegrator>(space: Arc<HpSpace>, integrator: &I, load: &LoadFn, threads: Option<usize>) -> Result<DgSystem> {
    require_kind(&space, SpaceKind::Discontinuous)?;
    let (k, b) = with_threads(threads, || -> Result<_> { Ok((assemble_k(&space, integrator)?, assemble_b(&space, integrator)?)) })??;
    let p = assemble_p(&space)?;
    let rhs = assemble_rhs(&space, load)?;
    Ok(DgSystem { k, b, p, rhs, space })
}

/// Conforming Galerkin system `⟨V curl φ_j, curl φ_i⟩` on a zero-trace conforming space.
///
/// Equals `EᵀKE` for the embedding `E` into the discontinuous space, but is
/// accumulated block by block so the discontinuous `K` is never formed.
pub fn assemble_conforming<I: PairIntegrator>(
    space: Arc<HpSpace>,
    integrator: &I,
    load: &LoadFn,
    threads: Option<usize>,
) -> Result<ConformingSystem> {
    require_kind(&space, SpaceKind::ConformingZeroTrace)?;
    let e = space
        .local_to_modal()
        .ok_or_else(|| Error::InvalidConfig("conforming space without nodal basis".into()))?
        .clone();
    let (blocks, pairs) = with_threads(threads, || modal_k_blocks(&space, integrator))??;
    let nodal: Vec<DMatrix<f64>> = blocks.iter().map(|b| e.tr_mul(b) * &e).collect();
    let n = space.total_dofs();
    let mut m = DMatrix::zeros(n, n);
    for (b, a, s) in pairs {
        let blk = &nodal[s];
        let (db, da) = (space.panel_dofs(b), space.panel_dofs(a));
        for (j, gj) in da.iter().enumerate() {
            let Some(gj) = *gj else { continue };
            for (i, gi) in db.iter().enumerate() {
                let Some(gi) = *gi else { continue };
                if a == b {
                    m[(gi, gj)] += 0.5 * (blk[(i, j)] + blk[(j, i)]);
                } else {
                    m[(gi, gj)] += blk[(i, j)];
                    m[(gj, gi)] += blk[(i, j)];
                }
            }
        }
    }
    let rhs = assemble_rhs(&space, load)?;
    Ok(ConformingSystem { matrix: m, rhs, space })
}

const MATRIX_MAGIC: &[u8; 8] = b"DGBEMMAT";

/// Writes `magic, rows: u64, cols: u64` followed by row-major little-endian `f64` entries.
pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MATRIX_MAGIC)?;
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    w.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            w.write_all(&m[(i, j)].to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MATRIX_MAGIC {
        return Err(Error::InvalidData(format!("{} is not a matrix dump", path.display())));
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let rows = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let cols = u64::from_le_bytes(word) as usize;
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        r.read_exact(&mut word)?;
        data.push(f64::from_le_bytes(word));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}
