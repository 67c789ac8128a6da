//! Torsion invariants of finite cochain complexes of Hilbert modules over
//! finite-trace algebras: Fuglede-Kadison determinants, combinatorial
//! torsion from circle Morse data, zeta-regularized torsion on the circle,
//! and the mapping-cone calculus connecting them.

pub mod complex;
pub mod cone;
pub mod error;
pub mod asymptotics;
pub mod circle;
pub mod gen;
pub mod io;
pub mod morse;
pub mod numerics;
pub mod operator;
pub mod verify;

pub use complex::HilbertComplex;
pub use error::{Result, TorsionError};
pub use operator::{AlgebraTag, Operator};
