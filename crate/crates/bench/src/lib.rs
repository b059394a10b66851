//! Benchmark fixtures shared by the criterion targets.

use stalm_core::{Mesh, Preset, ProblemSpec, Result};

/// The sine-obstacle problem on an `n x n` grid with `nt` steps up to `T = 1`.
pub fn sine_obstacle_spec(n: usize, nt: usize) -> Result<ProblemSpec> {
    Preset::SineObstacle.spec(&Mesh::unit(n, n, nt, 1.0)?)
}
