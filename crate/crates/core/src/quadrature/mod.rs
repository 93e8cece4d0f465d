//! Galerkin integrals of the single-layer kernel `1 / (4π|x−y|)` over pairs of
//! panels and over edge–panel pairs.
//!
//! Production rules ([`GalerkinQuadrature`]) regularize touching pairs with
//! relative coordinates and simplex-cube (Duffy) splitting, so every rule is a
//! plain product Gauss rule on a smooth integrand. [`BruteForceOracle`] is an
//! independent reference: polar integration about each target point combined
//! with adaptive bisection of the outer integral.

mod adaptive;
mod fns;
mod oracle;
mod rules;

use nalgebra::DMatrix;

use crate::error::Result;
use crate::mesh::{Mesh, Point2};

pub use adaptive::adaptive_vector_integral;
pub use fns::{ClosureFns, EdgeLegendre, LocalFns, ModalCurlTangent, ModalCurls, ModalValues};
pub use oracle::BruteForceOracle;
pub use rules::{
    EdgePanelRule, GalerkinQuadrature, PairNode, PanelPairRule, RuleClass, DEFAULT_ASSEMBLY_ORDER,
    DEFAULT_VALIDATION_ORDER,
};

pub const INV_FOUR_PI: f64 = 0.25 * std::f64::consts::FRAC_1_PI;

/// Computes kernel-weighted Galerkin blocks.
///
/// `panel_pair` returns the `g.count() × f.count()` matrix
/// `∫_target ∫_source Σ_c g_{c,i}(x) f_{c,j}(y) / (4π|x−y|) dy dx` where `f` is
/// evaluated in the source panel's reference coordinates and `g` in the target's.
/// `edge_panel` integrates over an edge instead of a target panel; `g` then
/// receives `[s, 0]` with `s ∈ [0, 1]` the edge parameter along its tangent.
pub trait PairIntegrator: Sync {
    fn panel_pair(
        &self,
        mesh: &Mesh,
        target: usize,
        source: usize,
        g: &dyn LocalFns,
        f: &dyn LocalFns,
    ) -> Result<DMatrix<f64>>;

    fn edge_panel(
        &self,
        mesh: &Mesh,
        edge: usize,
        source: usize,
        g: &dyn LocalFns,
        f: &dyn LocalFns,
    ) -> Result<DMatrix<f64>>;
}

/// `∫_b ∫_a f(y) g(x) / (4π|x−y|) dy dx` with a production rule of Gauss order `order`.
/// `f` and `g` take reference coordinates of panels `a` and `b`.
pub fn integrate_panel_pair(
    mesh: &Mesh,
    a: usize,
    b: usize,
    f: impl Fn(Point2) -> f64 + Sync,
    g: impl Fn(Point2) -> f64 + Sync,
    order: usize,
) -> Result<f64> {
    let quad = GalerkinQuadrature::exact_order(order)?;
    let fs = ClosureFns::scalar(0, move |r, out| out[0] = f(r));
    let gs = ClosureFns::scalar(0, move |r, out| out[0] = g(r));
    Ok(quad.panel_pair(mesh, b, a, &gs, &fs)?[(0, 0)])
}

/// `∫_e ∫_a f(y) g(x(s)) / (4π|x−y|) dy ds(x)`; `g` takes the edge parameter `s ∈ [0, 1]`.
pub fn integrate_edge_panel(
    mesh: &Mesh,
    e: usize,
    a: usize,
    f: impl Fn(Point2) -> f64 + Sync,
    g: impl Fn(f64) -> f64 + Sync,
    order: usize,
) -> Result<f64> {
    let quad = GalerkinQuadrature::exact_order(order)?;
    let fs = ClosureFns::scalar(0, move |r, out| out[0] = f(r));
    let gs = ClosureFns::scalar(0, move |r, out| out[0] = g(r[0]));
    Ok(quad.edge_panel(mesh, e, a, &gs, &fs)?[(0, 0)])
}

/// Oracle counterpart of [`integrate_panel_pair`]; `degree` bounds the
/// polynomial degree of `f` per coordinate.
pub fn brute_force_pair_oracle(
    mesh: &Mesh,
    a: usize,
    b: usize,
    f: impl Fn(Point2) -> f64 + Sync,
    degree: usize,
    g: impl Fn(Point2) -> f64 + Sync,
    tolerance: f64,
) -> Result<f64> {
    let oracle = BruteForceOracle::new(tolerance)?;
    let fs = ClosureFns::scalar(degree, move |r, out| out[0] = f(r));
    let gs = ClosureFns::scalar(0, move |r, out| out[0] = g(r));
    Ok(oracle.panel_pair(mesh, b, a, &gs, &fs)?[(0, 0)])
}

/// Oracle counterpart of [`integrate_edge_panel`].
pub fn brute_force_edge_oracle(
    mesh: &Mesh,
    e: usize,
    a: usize,
    f: impl Fn(Point2) -> f64 + Sync,
    degree: usize,
    g: impl Fn(f64) -> f64 + Sync,
    tolerance: f64,
) -> Result<f64> {
    let oracle = BruteForceOracle::new(tolerance)?;
    let fs = ClosureFns::scalar(degree, move |r, out| out[0] = f(r));
    let gs = ClosureFns::scalar(0, move |r, out| out[0] = g(r[0]));
    Ok(oracle.edge_panel(mesh, e, a, &gs, &fs)?[(0, 0)])
}
