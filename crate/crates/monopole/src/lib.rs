pub mod abelian_data;
pub mod baker_akhiezer;
pub mod config;
pub mod elliptic;
pub mod error;
pub mod field_reconstruction;
pub mod matrix_kit;
pub mod nahm_flow;
pub mod ode;
pub mod par;
pub mod poly;
pub mod quadrature;
pub mod reference_oracles;
pub mod report;
pub mod riemann_theta;
pub mod selftest;
pub mod spectral_curve;
pub mod weyl_solver;

pub use error::{MonopoleError, Result};
