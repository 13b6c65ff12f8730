//! Exact laws and limit theorems for inhomogeneous nearly critical INAR(1)
//! processes.

mod fft;
pub mod bounds;
pub mod cli;
pub mod inar;
pub mod laws;
pub mod limits;
pub mod montecarlo;
pub mod pmf;
