//! Bifurcations of symmetric homoclinic orbits in reversible systems.
//!
//! The crate is organised around a [`ReversibleSystem`] (vector field plus
//! reversing involution). On top of it sit
//!
//! * [`melnikov`] — coefficients a₂, b₂, ā₂, b̄₂ deciding saddle-node,
//!   transcritical and pitchfork bifurcations, and their classification;
//! * [`bvp`] — symmetric homoclinic orbits on [−T, 0] by Gauss collocation;
//! * [`continuation`] — pseudo-arclength branches with fold and branch-point
//!   detection and branch switching;
//! * [`monodromy`] — complex-time monodromy of the planar variational blocks;
//! * [`duffing`] — the worked four-dimensional example with closed forms.

pub mod bvp;
pub mod continuation;
pub mod diagrams;
pub mod duffing;
pub mod error;
pub mod melnikov;
pub mod monodromy;
pub mod ode;
pub mod quadrature;
pub mod special;
pub mod system;

pub use duffing::{Coupling, Duffing4d, ExampleParams};
pub use error::{Error, Result};
pub use system::{ParamMap, ReversibleSystem, SaddleSpectrum};
