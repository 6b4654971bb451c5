//! Refracted-reflected spectrally negative Lévy processes.
//!
//! The process moves like a spectrally negative Lévy process `X`, loses drift
//! at rate `delta` while above the level `b`, and is pushed back to zero from
//! below. This crate evaluates its scale functions, the fluctuation identities
//! built on them (upcrossing transforms, resolvents, dividend and capital
//! injection values, occupation times) and checks them against Monte Carlo.
//!
//! - [`model`]: model description, Laplace exponents and right inverses.
//! - [`scale`]: `W`, `Z` and their integrals, closed form or by Talbot inversion.
//! - [`identities`]: the fluctuation identities, finite and infinite horizon.
//! - [`simulator`]: exact event-driven and coupled Euler path simulation.
//! - [`verifier`]: checks with structured reports, grouped into suites.
//! - [`cli`]: the `rrlevy` command line front end.
//!
//! Runnable examples live in `examples/`: `scale_functions`,
//! `exit_and_dividends`, `capital_injection`, `occupation_times`,
//! `simulate_paths`, `euler_convergence` and `verify_suite`.
//!
//! ```
//! use rrlevy::identities::IdentityContext;
//! use rrlevy::model::presets::m1;
//!
//! let ctx = IdentityContext::new(m1()).unwrap();
//! let exit = ctx.one_sided_exit(0.5, 1.0, 2.0).unwrap();
//! assert!(exit > 0.0 && exit < 1.0);
//! ```

pub mod cli;
pub mod dd;
pub mod identities;
pub mod error;
pub mod model;
pub mod quadrature;
pub mod roots;
pub mod scale;
pub mod simulator;
pub mod talbot;
pub mod verifier;

pub use error::{Error, Result};
pub use model::{JumpComponent, ModelSpec, Target, Variation};
