pub mod envelope;
pub mod error;
pub mod fft;
pub mod grid;
pub mod interp;
pub mod krylov;
pub mod operators;
pub mod quad;
pub mod radial;
pub mod reduction;
pub mod solver;
pub mod weights;
