//! Driven-dissipative cavity magnon-polariton dynamics.
//!
//! A microwave cavity mode `c` and a Kittel magnon mode `m` are coupled at
//! rate `g` under the rotating-wave approximation, damped at rates `kappa_c`,
//! `kappa_m` into thermal baths, and optionally driven by a coherent tone of
//! strength `Omega` at frequency `omega_0`. Because the model is bilinear,
//! every normally-ordered correlation function `<c^dag^p c^q m^dag^r m^s>`
//! obeys a closed linear hierarchy, and the same physics can be computed by
//! three mutually cross-validating routes:
//!
//! - [`analytic`]: closed forms for the polariton eigenmodes, steady-state
//!   amplitudes and occupations, pulse-decay interference envelopes, and the
//!   zero-detuning second-order coherence g2(0);
//! - [`moments`]: an auto-generated sparse linear ODE system for all moments
//!   up to a requested total order, integrated adaptively or solved for its
//!   steady state block-by-block;
//! - [`trajectory`]: diffusive quantum-trajectory Monte Carlo sampling the
//!   P-representation stochastic differential equations over a seeded,
//!   reproducible, parallel ensemble.
//!
//! [`fock`] holds a brute-force truncated number-basis Lindblad integrator
//! used as an independent desk-scale oracle, and [`scenario`] orchestrates
//! the experiment-style sweeps behind the `cmpsim` command-line tool.

pub mod analytic;
pub mod config;
pub mod error;
pub mod fock;
pub mod moments;
pub mod output;
pub mod params;
pub mod scenario;
pub mod trajectory;
pub mod verify;

pub use error::{Error, Result};
pub use params::{BathOccupations, ParamsHz, PolaritonModes, SystemParams};
