use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Extrapolated energy `‖u‖²_ex = ⟨W u, u⟩` from conforming Galerkin energies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReference {
    pub u_ex_sq: f64,
    /// Spread of the last two extrapolants (or the last increment when only one exists).
    pub tolerance: f64,
    /// `(n_k, E_k)` used for the fit.
    pub levels: Vec<(usize, f64)>,
    /// Model `E_k = E_∞ − C n_k^{−α}` fitted on the last three levels.
    pub alpha: f64,
    pub c: f64,
}

/// `(n_{k−1}^{−α} − n_k^{−α}) / (n_{k−2}^{−α} − n_{k−1}^{−α})`, decreasing in `α`.
fn increment_ratio(n: [f64; 3], alpha: f64) -> f64 {
    let [a, b, c] = n.map(|v| v.powf(-alpha));
    (b - c) / (a - b)
}

/// Fits `E_∞ − C n^{−α}` exactly through three levels; returns `(E_∞, α, C)`.
fn fit_triple(n: [f64; 3], e: [f64; 3]) -> Result<(f64, f64, f64)> {
    let (d1, d2) = (e[1] - e[0], e[2] - e[1]);
    let rho = d2 / d1;
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidData(format!(
            "energy increments {d1:e}, {d2:e} do not contract; cannot extrapolate"
        )));
    }
    let (r1, r2) = (n[1] / n[0], n[2] / n[1]);
    let alpha = if (r1 - r2).abs() <= 1e-12 * r1 {
        // geometric levels: ratio of increments is r^{−α} (Aitken)
        -rho.ln() / r1.ln()
    } else {
        let (mut lo, mut hi) = (1e-8, 64.0);
        if !(increment_ratio(n, lo) >= rho && increment_ratio(n, hi) <= rho) {
            return Err(Error::InvalidData(format!("increment ratio {rho} outside the model range")));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if increment_ratio(n, mid) > rho {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let c = d2 / (n[1].powf(-alpha) - n[2].powf(-alpha));
    Ok((e[2] + c * n[2].powf(-alpha), alpha, c))
}

/// Extrapolates a strictly increasing sequence of conforming energies on meshes `ns`.
///
/// A constant sequence is its own limit. Any decrease signals an
/// under-resolved quadrature and is rejected.
pub fn extrapolate_energy(ns: &[usize], energies: &[f64]) -> Result<EnergyReference> {
    if ns.len() != energies.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} mesh levels for {} energies",
            ns.len(),
            energies.len()
        )));
    }
    if ns.len() < 3 {
        return Err(Error::InvalidData("extrapolation needs at least three levels".into()));
    }
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidData("mesh levels must be strictly increasing".into()));
    }
    let levels: Vec<(usize, f64)> = ns.iter().copied().zip(energies.iter().copied()).collect();
    if energies.iter().all(|&e| e == energies[0]) {
        return Ok(EnergyReference {
            u_ex_sq: energies[0],
            tolerance: 0.0,
            levels,
            alpha: 0.0,
            c: 0.0,
        });
    }
    for (k, w) in energies.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(Error::NonMonotone {
                level: k + 1,
                prev: w[0],
                next: w[1],
            });
        }
    }
    let nf: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let mut estimates = Vec::new();
    let mut last = (0.0, 0.0);
    for k in 2..nf.len() {
        let (e_inf, alpha, c) = fit_triple([nf[k - 2], nf[k - 1], nf[k]], [energies[k - 2], energies[k - 1], energies[k]])?;
        estimates.push(e_inf);
        last = (alpha, c);
    }
    let u_ex_sq = *estimates.last().unwrap();
    let tolerance = match estimates.len() {
        1 => (u_ex_sq - energies[energies.len() - 1]).abs(),
        m => (estimates[m - 1] - estimates[m - 2]).abs(),
    };
    Ok(EnergyReference {
        u_ex_sq,
        tolerance,
        levels,
        alpha: last.0,
        c: last.1,
    })
}
