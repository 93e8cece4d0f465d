//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use dgbem::{build_uniform_square_mesh, HpSpace, SpaceKind};

/// Discontinuous space of uniform degree `p` on the `n × n` mesh.
pub fn dg_space(n: usize, p: usize) -> Arc<HpSpace> {
    let mesh = Arc::new(build_uniform_square_mesh(n).expect("valid mesh size"));
    Arc::new(HpSpace::uniform(mesh, p, SpaceKind::Discontinuous).expect("valid degree"))
}
