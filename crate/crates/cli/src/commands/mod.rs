pub mod cauchy;
pub mod convergence;
pub mod mesh;
pub mod neumann;
pub mod pipeline;
pub mod symbol;
