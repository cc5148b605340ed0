//! Quaternion algebra in the Pauli-matrix picture, sampled grids and
//! the fundamental-form layer (curvatures, Gauss-Codazzi residuals).

pub mod forms;
pub mod grid;
pub mod quat;

pub use forms::{
    convergence_order, curvatures, estimate_fundamental_data, estimate_fundamental_data_with, fundamental_forms,
    gauss_codazzi_residual, gauss_codazzi_residual_with, gauss_curvature, isothermic_residual, normals_from_tangents,
    Curvatures, FundamentalData, GaussCodazzi, SurfaceGrid,
};
pub use grid::{integrate_form, interpolate, Diff, Field, Lattice, Stencil};
pub use quat::{det2, expm2, inv2, qmul, scalar_product, sigma1, sigma2, sigma3, ImVec3, Mat2, Quaternion, C64, I};
