use nalgebra::DMatrix;

use crate::mesh::Point2;
use crate::space::{local_dim, shifted_legendre, BasisEvaluator};

/// A family of (possibly vector-valued) functions evaluated in batches.
///
/// `eval_into` fills row `i * comps() + c` with component `c` at point `i`,
/// one column per function.
pub trait LocalFns: Sync {
    fn count(&self) -> usize;
    fn comps(&self) -> usize;
    /// Polynomial degree per coordinate, used to raise quadrature orders.
    fn degree(&self) -> usize;
    fn eval_into(&self, points: &[Point2], out: &mut DMatrix<f64>);
}

/// Physical curls of the modal basis on a panel.
#[derive(Debug, Clone)]
pub struct ModalCurls {
    pub p: usize,
    pub jit: [[f64; 2]; 2],
}

impl LocalFns for ModalCurls {
    fn count(&self) -> usize {
        local_dim(self.p)
    }
    fn comps(&self) -> usize {
        2
    }
    fn degree(&self) -> usize {
        self.p
    }
    fn eval_into(&self, points: &[Point2], out: &mut DMatrix<f64>) {
        let dim = self.count();
        let mut ev = BasisEvaluator::new(self.p);
        let mut buf = vec![0.0; 2 * dim];
        for (i, &r) in points.iter().enumerate() {
            ev.curls(r, &self.jit, &mut buf);
            for j in 0..dim {
                out[(2 * i, j)] = buf[j];
                out[(2 * i + 1, j)] = buf[dim + j];
            }
        }
    }
}

/// Tangential component `curl φ · t` of the modal basis curls.
#[derive(Debug, Clone)]
pub struct ModalCurlTangent {
    pub p: usize,
    pub jit: [[f64; 2]; 2],
    pub tangent: Point2,
}

impl LocalFns for ModalCurlTangent {
    fn count(&self) -> usize {
        local_dim(self.p)
    }
    fn comps(&self) -> usize {
        1
    }
    fn degree(&self) -> usize {
        self.p
    }
    fn eval_into(&self, points: &[Point2], out: &mut DMatrix<f64>) {
        let dim = self.count();
        let mut ev = BasisEvaluator::new(self.p);
        let mut buf = vec![0.0; 2 * dim];
        for (i, &r) in points.iter().enumerate() {
            ev.curls(r, &self.jit, &mut buf);
            for j in 0..dim {
                out[(i, j)] = buf[j] * self.tangent[0] + buf[dim + j] * self.tangent[1];
            }
        }
    }
}

/// Values of the modal basis.
#[derive(Debug, Clone)]
pub struct ModalValues {
    pub p: usize,
}

impl LocalFns for ModalValues {
    fn count(&self) -> usize {
        local_dim(self.p)
    }
    fn comps(&self) -> usize {
        1
    }
    fn degree(&self) -> usize {
        self.p
    }
    fn eval_into(&self, points: &[Point2], out: &mut DMatrix<f64>) {
        let dim = self.count();
        let mut ev = BasisEvaluator::new(self.p);
        let mut buf = vec![0.0; dim];
        for (i, &r) in points.iter().enumerate() {
            ev.values(r, &mut buf);
            for j in 0..dim {
                out[(i, j)] = buf[j];
            }
        }
    }
}

/// Shifted Legendre polynomials `L_m(2s−1)`, `m ≤ pmax`, of the first coordinate.
#[derive(Debug, Clone)]
pub struct EdgeLegendre {
    pub pmax: usize,
}

impl LocalFns for EdgeLegendre {
    fn count(&self) -> usize {
        self.pmax + 1
    }
    fn comps(&self) -> usize {
        1
    }
    fn degree(&self) -> usize {
        self.pmax
    }
    fn eval_into(&self, points: &[Point2], out: &mut DMatrix<f64>) {
        let n = self.pmax + 1;
        let (mut v, mut d) = (vec![0.0; n], vec![0.0; n]);
        for (i, r) in points.iter().enumerate() {
            shifted_legendre(self.pmax, r[0], &mut v, &mut d);
            for m in 0..n {
                out[(i, m)] = v[m];
            }
        }
    }
}

/// Functions given by a closure `f(point, out)` writing `comps × count` values
/// (component-major: `out[c * count + j]`).
pub struct ClosureFns<F> {
    count: usize,
    comps: usize,
    degree: usize,
    f: F,
}

impl<F: Fn(Point2, &mut [f64]) + Sync> ClosureFns<F> {
    pub fn new(count: usize, comps: usize, degree: usize, f: F) -> Self {
        ClosureFns {
            count,
            comps,
            degree,
            f,
        }
    }

    pub fn scalar(degree: usize, f: F) -> Self {
        Self::new(1, 1, degree, f)
    }
}

impl<F: Fn(Point2, &mut [f64]) + Sync> LocalFns for ClosureFns<F> {
    fn count(&self) -> usize {
        self.count
    }
    fn comps(&self) -> usize {
        self.comps
    }
    fn degree(&self) -> usize {
        self.degree
    }
    fn eval_into(&self, points: &[Point2], out: &mut DMatrix<f64>) {
        let mut buf = vec![0.0; self.count * self.comps];
        for (i, &r) in points.iter().enumerate() {
            (self.f)(r, &mut buf);
            for c in 0..self.comps {
                for j in 0..self.count {
                    out[(i * self.comps + c, j)] = buf[c * self.count + j];
                }
            }
        }
    }
}
