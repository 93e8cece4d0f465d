use nalgebra::DMatrix;

use super::adaptive::adaptive_vector_integral;
use super::{LocalFns, PairIntegrator, INV_FOUR_PI};
use crate::error::{Error, Result};
use crate::gauss::gauss_legendre;
use crate::mesh::{cross, norm, Mesh, Point2};

/// Reference integrator used only for verification.
///
/// The inner integral `∫_a f(y)/|x−y| dy` is computed in polar coordinates
/// about `x`, as a signed sum over the triangles `(x, V_k, V_{k+1})`; the `1/r`
/// singularity cancels against the polar Jacobian and the radial integral is
/// exact for polynomial `f`. Rays are parametrized by `t = h·sinh σ` along each
/// side, `h` the distance of `x` to the side's line, which removes the
/// near-singularity when `x` approaches a side; the `σ` integral is adaptive. The outer integral
/// is an iterated adaptive bisection in graded coordinates, refining towards
/// wherever the inner potential loses smoothness (the boundary of the source panel).
///
/// `f` must be polynomial in the source reference coordinates: outside the source
/// panel it is evaluated by extension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BruteForceOracle {
    /// Target accuracy relative to the natural scale of the block.
    pub tolerance: f64,
    pub max_depth: usize,
}

impl BruteForceOracle {
    pub fn new(tolerance: f64) -> Result<Self> {
        if !(tolerance > 0.0) {
            return Err(Error::InvalidConfig("oracle tolerance must be positive".into()));
        }
        Ok(BruteForceOracle {
            tolerance,
            max_depth: 48,
        })
    }

    /// `out[c * count + j] = ∫_a f_{c,j}(y) / |x − y| dy` (no `1/4π`).
    pub fn potential(&self, mesh: &Mesh, a: usize, x: Point2, f: &dyn LocalFns, abs_tol: f64, out: &mut [f64]) -> Result<()> {
        let (nf, comps) = (f.count(), f.comps());
        let dim = nf * comps;
        out.iter_mut().for_each(|v| *v = 0.0);
        let radial = gauss_legendre(f.degree() + 2);
        let diam = mesh.diameter(a);
        let mut vals = DMatrix::zeros(radial.len() * comps, nf);
        let mut pts = vec![[0.0; 2]; radial.len()];
        for k in 0..4 {
            let va = mesh.panel_vertex(a, k);
            let vb = mesh.panel_vertex(a, (k + 1) % 4);
            let side = [vb[0] - va[0], vb[1] - va[1]];
            let len = norm(side);
            let u = [side[0] / len, side[1] / len];
            let rel = [va[0] - x[0], va[1] - x[1]];
            // signed distance from x to the side's line; positive when x lies to its left (inside for a counter-clockwise panel)
            let h = -cross(u, rel);
            if h.abs() <= 1e-14 * diam {
                continue;
            }
            let t0 = rel[0] * u[0] + rel[1] * u[1];
            let foot = [va[0] - t0 * u[0], va[1] - t0 * u[1]];
            let ha = h.abs();
            let (s0, s1) = ((t0 / ha).asinh(), ((t0 + len) / ha).asinh());
            let part = adaptive_vector_integral(
                |sigma, acc| {
                    let t = ha * sigma.sinh();
                    let y = [foot[0] + t * u[0], foot[1] + t * u[1]];
                    for (pt, rho) in pts.iter_mut().zip(&radial.points) {
                        let z = [x[0] + rho * (y[0] - x[0]), x[1] + rho * (y[1] - x[1])];
                        *pt = mesh.panel_inverse_map(a, z);
                    }
                    f.eval_into(&pts, &mut vals);
                    acc.iter_mut().for_each(|v| *v = 0.0);
                    for (i, w) in radial.weights.iter().enumerate() {
                        for c in 0..comps {
                            for j in 0..nf {
                                acc[c * nf + j] += w * vals[(i * comps + c, j)];
                            }
                        }
                    }
                    Ok(())
                },
                s0,
                s1,
                dim,
                abs_tol / ha,
                self.max_depth,
            )?;
            for (o, v) in out.iter_mut().zip(part) {
                *o += h * v;
            }
        }
        Ok(())
    }

    fn sup(fns: &dyn LocalFns, samples: &[Point2]) -> f64 {
        let mut m = DMatrix::zeros(samples.len() * fns.comps(), fns.count());
        fns.eval_into(samples, &mut m);
        m.amax().max(f64::MIN_POSITIVE)
    }

    fn combine(g: &DMatrix<f64>, inner: &[f64], comps: usize, nf: usize, out: &mut [f64]) {
        let ng = g.ncols();
        for i in 0..ng {
            for j in 0..nf {
                let mut s = 0.0;
                for c in 0..comps {
                    s += g[(c, i)] * inner[c * nf + j];
                }
                out[i * nf + j] = s;
            }
        }
    }
}

/// Quintic grading of `[0, 1]` towards both ends, where the potential of a
/// touching source panel has `d·ln d` behavior. Returns the point and the Jacobian.
fn graded(t: f64) -> (f64, f64) {
    let x = t * t * t * (10.0 + t * (6.0 * t - 15.0));
    let dx = 30.0 * t * t * (1.0 - t) * (1.0 - t);
    (x, dx)
}

fn grid_samples() -> Vec<Point2> {
    let t = [0.0, 0.5, 1.0];
    t.iter().flat_map(|&u| t.iter().map(move |&v| [u, v])).collect()
}

fn check_comps(g: &dyn LocalFns, f: &dyn LocalFns) -> Result<()> {
    if g.comps() != f.comps() {
        return Err(Error::DimensionMismatch(format!(
            "function families have {} and {} components",
            g.comps(),
            f.comps()
        )));
    }
    Ok(())
}

impl PairIntegrator for BruteForceOracle {
    fn panel_pair(&self, mesh: &Mesh, target: usize, source: usize, g: &dyn LocalFns, f: &dyn LocalFns) -> Result<DMatrix<f64>> {
        check_comps(g, f)?;
        let (ng, nf, comps) = (g.count(), f.count(), f.comps());
        let samples = grid_samples();
        let fmax = Self::sup(f, &samples);
        let gmax = Self::sup(g, &samples);
        let (area_a, area_b) = (mesh.area(source), mesh.area(target));
        let inner_scale = fmax * area_a.sqrt();
        let inner_tol = 1e-2 * self.tolerance * inner_scale;
        let outer_tol = self.tolerance * gmax * inner_scale;
        let mut inner = vec![0.0; comps * nf];
        let mut gv = DMatrix::zeros(comps, ng);
        let flat = adaptive_vector_integral(
            |t2, acc| {
                let (x2, w2) = graded(t2);
                let row = adaptive_vector_integral(
                    |t1, acc1| {
                        let (x1, w1) = graded(t1);
                        let x = mesh.panel_map(target, [x1, x2]);
                        self.potential(mesh, source, x, f, inner_tol, &mut inner)?;
                        g.eval_into(&[[x1, x2]], &mut gv);
                        Self::combine(&gv, &inner, comps, nf, acc1);
                        acc1.iter_mut().for_each(|v| *v *= w1);
                        Ok(())
                    },
                    0.0,
                    1.0,
                    ng * nf,
                    outer_tol,
                    self.max_depth,
                )?;
                for (a, r) in acc.iter_mut().zip(&row) {
                    *a = w2 * r;
                }
                Ok(())
            },
            0.0,
            1.0,
            ng * nf,
            outer_tol,
            self.max_depth,
        )?;
        let scale = area_b * INV_FOUR_PI;
        Ok(DMatrix::from_fn(ng, nf, |i, j| scale * flat[i * nf + j]))
    }

    fn edge_panel(&self, mesh: &Mesh, edge: usize, source: usize, g: &dyn LocalFns, f: &dyn LocalFns) -> Result<DMatrix<f64>> {
        check_comps(g, f)?;
        let (ng, nf, comps) = (g.count(), f.count(), f.comps());
        let fmax = Self::sup(f, &grid_samples());
        let gmax = Self::sup(g, &[[0.0, 0.0], [0.5, 0.0], [1.0, 0.0]]);
        let inner_scale = fmax * mesh.area(source).sqrt();
        let inner_tol = 1e-2 * self.tolerance * inner_scale;
        let outer_tol = self.tolerance * gmax * inner_scale;
        let mut inner = vec![0.0; comps * nf];
        let mut gv = DMatrix::zeros(comps, ng);
        let flat = adaptive_vector_integral(
            |t, acc| {
                let (s, w) = graded(t);
                let x = mesh.edge_point(edge, s);
                self.potential(mesh, source, x, f, inner_tol, &mut inner)?;
                g.eval_into(&[[s, 0.0]], &mut gv);
                Self::combine(&gv, &inner, comps, nf, acc);
                acc.iter_mut().for_each(|v| *v *= w);
                Ok(())
            },
            0.0,
            1.0,
            ng * nf,
            outer_tol,
            self.max_depth,
        )?;
        let scale = mesh.edge_length(edge) * INV_FOUR_PI;
        Ok(DMatrix::from_fn(ng, nf, |i, j| scale * flat[i * nf + j]))
    }
}
