//! Ground states of the 2D quasilinear Schrödinger equation
//! `-Δu + V(x) u - Δ(u^2) u = g(x, u)` by a numerical mountain-pass method.
//!
//! The substitution `v = h(u)` with `h'(u) = sqrt(1+u^2)` turns the
//! quasilinear energy into the semilinear functional
//! `Jbar(v) = 1/2 ∫|∇v|^2 + 1/2 ∫V f(v)^2 - ∫G(x, f(v))` on an
//! Orlicz-normed space; its mountain-pass critical point transforms back
//! to a weak solution `u = f(v)`. The crate provides
//!
//! * [`transform`] — the scalar kernel `h`, `f = h^{-1}`, `L = f^2`;
//! * [`model`] — problem instances and the hypothesis auditor;
//! * [`grid`] — truncated 2D and radial domains with conservative stencils;
//! * [`energy`] — the functionals, weak-form gradient, Orlicz/H1_L norms;
//! * [`solver`] — path deformation + Newton refinement towards the
//!   mountain-pass level, and post-solve verification;
//! * [`sp`] — the constrained quotient minimization gating `C_p`;
//! * [`oracle`] — a radial shooting cross-check for constant potentials;
//! * [`config`], [`report`], [`cli`] — the batch front-end.

pub mod cli;
pub mod config;
pub mod energy;
pub mod grid;
pub mod linsys;
pub mod model;
pub mod oracle;
pub mod report;
pub mod solver;
pub mod sp;
pub mod transform;
