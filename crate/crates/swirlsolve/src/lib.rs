//! Steady axisymmetric subsonic swirling Euler–Poisson flow in a cylinder: background profiles,
//! a linearized elliptic–transport iteration and verification tools.

pub mod assembler;
pub mod background;
pub mod elliptic;
pub mod grid;
pub mod io;
pub mod iteration;
pub mod linear;
pub mod perturbation;
pub mod profile;
pub mod swirl;
pub mod thermo;
pub mod transport;
pub mod verify;
