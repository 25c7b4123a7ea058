//! Numerical laboratory for multi-frequency inverse source problems.
//!
//! Boundary data of the Helmholtz and Lamé systems are synthesized on a
//! frequency band, turned into time traces, and pushed through backward
//! hyperbolic solves to recover the source pair `(f0, f1)`. The stability
//! bounds that govern the procedure are evaluated and checked numerically.

pub mod bounds;
pub mod checks;
pub mod domain;
pub mod elastic;
pub mod experiment;
pub mod fdtd;
pub mod functionals;
pub mod geom;
pub mod harmonic;
pub mod helmholtz;
pub mod kirchhoff;
pub mod quadrature;
pub mod radial;
pub mod sobolev;
pub mod source;
pub mod sweep;
pub mod synthesis;

mod error;

pub use error::{Error, Result};
pub use geom::Vec3;
