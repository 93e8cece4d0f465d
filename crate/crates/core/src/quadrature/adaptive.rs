use crate::error::{Error, Result};
use crate::gauss::{gauss_legendre, Rule1d};

const CELL_RULE_POINTS: usize = 8;
const MAX_CELLS: usize = 200_000;

struct Cell {
    err: f64,
    lo: f64,
    hi: f64,
    depth: usize,
    value: Vec<f64>,
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err).is_eq()
    }
}

impl Eq for Cell {}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cell {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Globally adaptive bisection for a vector-valued integrand on `[a, b]`.
///
/// Each cell carries a fixed-rule estimate and the max-norm difference to its
/// bisected estimate; the cell with the largest error is split until the summed
/// error drops below `abs_tol`. Cells at `max_depth` are frozen. Fails when the
/// frozen error alone exceeds the tolerance or the cell budget runs out.
pub fn adaptive_vector_integral<F>(
    mut f: F,
    a: f64,
    b: f64,
    dim: usize,
    abs_tol: f64,
    max_depth: usize,
) -> Result<Vec<f64>>
where
    F: FnMut(f64, &mut [f64]) -> Result<()>,
{
    let rule = gauss_legendre(CELL_RULE_POINTS);
    let mut buf = vec![0.0; dim];
    let coarse = cell(&mut f, &rule, a, b, &mut buf)?;
    let first = refine(&mut f, &rule, a, b, 0, &coarse, &mut buf)?;
    let mut heap = std::collections::BinaryHeap::new();
    let mut total_err = first.iter().map(|c| c.err).sum::<f64>();
    heap.extend(first);
    let mut frozen = Vec::new();
    let mut frozen_err = 0.0;
    let mut cells = 2;
    while total_err > abs_tol {
        let Some(worst) = heap.pop() else {
            return Err(Error::NotConverged(format!(
                "adaptive bisection on [{a:e}, {b:e}] stalled at depth {max_depth} (error {total_err:.3e}, tolerance {abs_tol:.3e})"
            )));
        };
        if worst.depth + 1 >= max_depth {
            frozen_err += worst.err;
            frozen.push(worst);
            if frozen_err > abs_tol {
                return Err(Error::NotConverged(format!(
                    "adaptive bisection on [{a:e}, {b:e}] exceeded depth {max_depth} (frozen error {frozen_err:.3e}, tolerance {abs_tol:.3e})"
                )));
            }
            continue;
        }
        if cells >= MAX_CELLS {
            return Err(Error::NotConverged(format!(
                "adaptive bisection on [{a:e}, {b:e}] used {MAX_CELLS} cells (error {total_err:.3e}, tolerance {abs_tol:.3e})"
            )));
        }
        let children = refine(&mut f, &rule, worst.lo, worst.hi, worst.depth, &worst.value, &mut buf)?;
        total_err -= worst.err;
        total_err += children.iter().map(|c| c.err).sum::<f64>();
        cells += 2;
        heap.extend(children);
        // periodic resummation keeps cancellation in the running total bounded
        if heap.len() % 4096 == 0 {
            total_err = frozen_err + heap.iter().map(|c| c.err).sum::<f64>();
        }
    }
    let mut total = vec![0.0; dim];
    for c in heap.iter().chain(&frozen) {
        for (t, v) in total.iter_mut().zip(&c.value) {
            *t += v;
        }
    }
    Ok(total)
}

/// Splits `[lo, hi]` in two; each half inherits half of the discrepancy with the parent estimate.
fn refine<F>(f: &mut F, rule: &Rule1d, lo: f64, hi: f64, depth: usize, parent: &[f64], buf: &mut [f64]) -> Result<[Cell; 2]>
where
    F: FnMut(f64, &mut [f64]) -> Result<()>,
{
    let mid = 0.5 * (lo + hi);
    let left = cell(f, rule, lo, mid, buf)?;
    let right = cell(f, rule, mid, hi, buf)?;
    let err = parent
        .iter()
        .zip(left.iter().zip(&right))
        .map(|(e, (l, r))| (e - l - r).abs())
        .fold(0.0, f64::max);
    Ok([
        Cell {
            err: 0.5 * err,
            lo,
            hi: mid,
            depth: depth + 1,
            value: left,
        },
        Cell {
            err: 0.5 * err,
            lo: mid,
            hi,
            depth: depth + 1,
            value: right,
        },
    ])
}

fn cell<F>(f: &mut F, rule: &Rule1d, lo: f64, hi: f64, buf: &mut [f64]) -> Result<Vec<f64>>
where
    F: FnMut(f64, &mut [f64]) -> Result<()>,
{
    let mut acc = vec![0.0; buf.len()];
    let len = hi - lo;
    for (t, w) in rule.iter() {
        f(lo + len * t, buf)?;
        for (a, v) in acc.iter_mut().zip(buf.iter()) {
            *a += w * len * v;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_endpoint_singularity() {
        // ∫₀¹ [√x, x ln x] = [2/3, −1/4]
        let v = adaptive_vector_integral(
            |x, out| {
                out[0] = x.sqrt();
                out[1] = if x > 0.0 { x * x.ln() } else { 0.0 };
                Ok(())
            },
            0.0,
            1.0,
            2,
            1e-12,
            60,
        )
        .unwrap();
        assert!((v[0] - 2.0 / 3.0).abs() < 1e-11);
        assert!((v[1] + 0.25).abs() < 1e-11);
    }

    #[test]
    fn reports_non_convergence() {
        let r = adaptive_vector_integral(
            |x, out| {
                out[0] = 1.0 / x.max(1e-300);
                Ok(())
            },
            0.0,
            1.0,
            1,
            1e-10,
            12,
        );
        assert!(matches!(r, Err(Error::NotConverged(_))));
    }
}
