pub mod expr;
pub mod halfline;
pub mod harness;
pub mod hypotheses;
pub mod kernels;
pub mod quadrature;
pub mod solver;
pub mod transforms;
