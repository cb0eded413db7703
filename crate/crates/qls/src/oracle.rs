//! Independent radial shooting solver for the constant-potential case.
//!
//! The transformed Euler–Lagrange equation reduces on radial functions to
//!
//! ```text
//! v'' + v'/r = V f(v) f'(v) - g(f(v)) f'(v),   v'(0) = 0,
//! ```
//!
//! an initial-value problem in the height `v0 = v(0)`. Trajectories either
//! cross zero (v0 too large), turn back up while positive (v0 too small),
//! or decay — the ground state sits on the separatrix, found by bisection
//! between the two classes. Integration is classical RK4 seeded by the
//! axis expansion `v(r) ≈ v0 + r^2/4 * (V f f' - g f')|_{v0}`.
//!
//! Bisection resolves `v0` far beyond the radius where round-off makes the
//! trajectory peel off the separatrix, so the far tail is replaced by the
//! two-parameter decay `A e^{-kappa r} / sqrt(r)` matched in value and
//! slope where the profile has become small; the replacement keeps the
//! resampled field smooth through `r_max`.

use std::sync::Arc;

use thiserror::Error;

use crate::energy::EnergyError;
use crate::grid::{Field, Grid};
use crate::model::ModelProblem;
use crate::transform::TransformKernel;

const CROSS_THRESHOLD: f64 = -1e-10;
const DIVERGE_FACTOR: f64 = 10.0;
/// Profile height below which the linearized tail substitution applies.
const TAIL_HEIGHT: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("shooting requires a constant potential, but V varies (|ΔV| = {0:.3e})")]
    NonConstantPotential(f64),
    #[error("initial height must be nonnegative, got {0}")]
    NegativeInitial(f64),
    #[error("no sign-changing bracket found in the sweep range [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },
    #[error("trajectory never decayed below the tail threshold {0}")]
    NoDecay(f64),
    #[error("non-finite state at r = {0} while the trajectory was not growing")]
    Integration(f64),
    #[error("tail fit produced a non-decaying rate kappa = {0}")]
    TailFit(f64),
    #[error("reference profile is identically zero")]
    ZeroReference,
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryClass {
    CrossesZero,
    StaysPositiveDiverges,
    ConvergedToZero,
}

impl TrajectoryClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::CrossesZero => "crosses_zero",
            Self::StaysPositiveDiverges => "stays_positive_diverges",
            Self::ConvergedToZero => "converged_to_zero",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ShootResult {
    pub v0: f64,
    /// `(r, v, v')` along the trajectory, starting at `(0, v0, 0)`.
    pub trajectory: Vec<(f64, f64, f64)>,
    pub classification: TrajectoryClass,
}

fn constant_potential(model: &ModelProblem) -> Result<f64, OracleError> {
    let probe = [[0.0, 0.0], [0.37, 0.18], [0.5, 0.73], [0.91, 0.45]];
    let v = model.potential(probe[0]);
    for x in &probe[1..] {
        let dv = (model.potential(*x) - v).abs();
        if dv > 1e-13 {
            return Err(OracleError::NonConstantPotential(dv));
        }
    }
    Ok(v)
}

/// Right-hand side of the first-order system `(v, w) -> (w, -w/r + rhs(v))`.
struct RadialOde {
    kernel: TransformKernel,
    v_const: f64,
    model: ModelProblem,
}

impl RadialOde {
    fn reaction(&self, v: f64) -> Result<f64, OracleError> {
        let u = self.kernel.f_inverse(v).map_err(EnergyError::from)?;
        let fp = TransformKernel::f_prime_of_u(u);
        Ok((self.v_const * u - self.model.g([0.0, 0.0], u)) * fp)
    }

    fn rhs(&self, r: f64, v: f64, w: f64) -> Result<(f64, f64), OracleError> {
        Ok((w, -w / r + self.reaction(v)?))
    }
}

/// Integrates one trajectory from height `v0` with RK4 steps of size `step`,
/// classifying it on the fly.
pub fn shoot(
    model: &ModelProblem,
    r_max: f64,
    v0: f64,
    step: f64,
) -> Result<ShootResult, OracleError> {
    assert!(r_max > 0.0 && step > 0.0 && step < r_max);
    if v0 < 0.0 {
        return Err(OracleError::NegativeInitial(v0));
    }
    let ode = RadialOde {
        kernel: *model.kernel(),
        v_const: constant_potential(model)?,
        model: model.clone(),
    };
    let mut trajectory = vec![(0.0, v0, 0.0)];
    if v0 == 0.0 {
        let mut r = step;
        while r <= r_max {
            trajectory.push((r, 0.0, 0.0));
            r += step;
        }
        return Ok(ShootResult {
            v0,
            trajectory,
            classification: TrajectoryClass::ConvergedToZero,
        });
    }

    // Axis expansion to the first node; v'' + v'/r -> 2 v''(0) at r = 0.
    let rhs0 = ode.reaction(v0)?;
    let mut r = step;
    let mut v = v0 + 0.25 * r * r * rhs0;
    let mut w = 0.5 * r * rhs0;
    trajectory.push((r, v, w));

    let classification = loop {
        if r >= r_max {
            break TrajectoryClass::ConvergedToZero;
        }
        let h = step.min(r_max - r);
        let (k1v, k1w) = ode.rhs(r, v, w)?;
        let (k2v, k2w) = ode.rhs(r + 0.5 * h, v + 0.5 * h * k1v, w + 0.5 * h * k1w)?;
        let (k3v, k3w) = ode.rhs(r + 0.5 * h, v + 0.5 * h * k2v, w + 0.5 * h * k2w)?;
        let (k4v, k4w) = ode.rhs(r + h, v + h * k3v, w + h * k3w)?;
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        w += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
        r += h;
        if !v.is_finite() || !w.is_finite() {
            if trajectory.last().map(|&(_, _, lw)| lw > 0.0).unwrap_or(false) {
                break TrajectoryClass::StaysPositiveDiverges;
            }
            return Err(OracleError::Integration(r));
        }
        trajectory.push((r, v, w));
        if v < CROSS_THRESHOLD {
            break TrajectoryClass::CrossesZero;
        }
        if v > DIVERGE_FACTOR * v0 && w > 0.0 {
            break TrajectoryClass::StaysPositiveDiverges;
        }
    };

    Ok(ShootResult {
        v0,
        trajectory,
        classification,
    })
}

/// Bisects the initial height between the two non-decaying classes and
/// returns the separatrix profile resampled onto `grid` (which fixes the
/// integration step to an integer fraction of the grid spacing, so nodes
/// are hit exactly). The far tail is replaced by a C^1 exponential decay.
pub fn find_ground_state_shooting(
    model: &ModelProblem,
    grid: &Arc<Grid>,
    step_hint: f64,
    tol_v0: f64,
) -> Result<Field, OracleError> {
    let radial = match grid.as_ref() {
        Grid::Radial(g) => g,
        Grid::Square(_) => panic!("shooting profiles live on a radial grid"),
    };
    let r_max = radial.r_max();
    let dr = radial.spacing();
    let substeps = (dr / step_hint).round().max(1.0) as usize;
    let step = dr / substeps as f64;

    // Geometric sweep to find two adjacent heights with distinct
    // non-decaying classes (orientation discovered, not assumed).
    let mut bracket: Option<(f64, TrajectoryClass, f64, TrajectoryClass)> = None;
    let mut prev: Option<(f64, TrajectoryClass)> = None;
    let sweep_lo = 1e-3;
    let mut v0 = sweep_lo;
    while v0 <= 1e5 {
        let class = shoot(model, r_max, v0, step)?.classification;
        if class != TrajectoryClass::ConvergedToZero {
            if let Some((pv, pc)) = prev {
                if pc != class {
                    bracket = Some((pv, pc, v0, class));
                    break;
                }
            }
            prev = Some((v0, class));
        }
        v0 *= 2.0;
    }
    let (mut lo, lo_class, mut hi, _hi_class) = bracket.ok_or(OracleError::NoBracket {
        lo: sweep_lo,
        hi: 1e5,
    })?;

    let mut mid = 0.5 * (lo + hi);
    while hi - lo > tol_v0 {
        mid = 0.5 * (lo + hi);
        let class = shoot(model, r_max, mid, step)?.classification;
        if class == TrajectoryClass::ConvergedToZero {
            break;
        }
        if class == lo_class {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let result = shoot(model, r_max, mid, step)?;
    profile_from_trajectory(&result, grid, substeps)
}

/// Extracts nodal values from an aligned trajectory and grafts the
/// exponential tail where the computed profile has decayed to `TAIL_HEIGHT`.
fn profile_from_trajectory(
    shot: &ShootResult,
    grid: &Arc<Grid>,
    substeps: usize,
) -> Result<Field, OracleError> {
    let radial = match grid.as_ref() {
        Grid::Radial(g) => g,
        Grid::Square(_) => unreachable!(),
    };
    let m = radial.m();
    let dr = radial.spacing();

    // Trajectory points sit at r = k * step with step = dr / substeps;
    // node j at (j + 1/2) dr needs k = (2 j + 1) * substeps / 2. For odd
    // products interpolate the two neighbors (exact to RK4 accuracy).
    let traj = &shot.trajectory;
    let step = dr / substeps as f64;
    let sample = |r: f64| -> Option<(f64, f64)> {
        let k = r / step;
        let k0 = k.floor() as usize;
        if k0 + 1 >= traj.len() {
            return None;
        }
        let frac = k - k0 as f64;
        let (_, v0, w0) = traj[k0];
        let (_, v1, w1) = traj[k0 + 1];
        // Hermite interpolation keeps O(step^4) accuracy between nodes.
        let h00 = (1.0 + 2.0 * frac) * (1.0 - frac) * (1.0 - frac);
        let h10 = frac * (1.0 - frac) * (1.0 - frac);
        let h01 = frac * frac * (3.0 - 2.0 * frac);
        let h11 = frac * frac * (frac - 1.0);
        Some((
            h00 * v0 + h10 * step * w0 + h01 * v1 + h11 * step * w1,
            w0 + (w1 - w0) * frac,
        ))
    };

    let mut values = vec![0.0_f64; m];
    let mut tail: Option<(f64, f64, f64)> = None; // (r_fit, a, kappa)
    for (j, value) in values.iter_mut().enumerate() {
        let r = radial.radius(j);
        if let Some((r_fit, a, kappa)) = tail {
            let _ = r_fit;
            *value = a * (-kappa * r).exp() / r.sqrt();
            continue;
        }
        let (v, w) = sample(r).ok_or(OracleError::NoDecay(TAIL_HEIGHT))?;
        if v > 0.0 && v <= TAIL_HEIGHT && w < 0.0 {
            // Match A e^{-kappa r}/sqrt(r) in value and slope:
            // v'/v = -kappa - 1/(2r).
            let kappa = -w / v - 1.0 / (2.0 * r);
            if kappa <= 0.0 {
                return Err(OracleError::TailFit(kappa));
            }
            let a = v * (kappa * r).exp() * r.sqrt();
            tail = Some((r, a, kappa));
            *value = v;
        } else {
            *value = v;
        }
    }
    if tail.is_none() {
        return Err(OracleError::NoDecay(TAIL_HEIGHT));
    }
    Ok(Field::from_values(Arc::clone(grid), values))
}

/// Piecewise-linear radial profile `(r_k, value_k)` extracted from a field:
/// directly for radial grids, by annulus bin-averaging for 2D grids.
fn radial_samples(field: &Field, bin_width: f64) -> Vec<(f64, f64)> {
    match field.grid().as_ref() {
        Grid::Radial(g) => (0..g.m())
            .map(|j| (g.radius(j), field.values()[j]))
            .collect(),
        Grid::Square(g) => {
            let r_lim = g.half_width();
            let bins = (r_lim / bin_width).ceil() as usize;
            let mut sum = vec![0.0_f64; bins];
            let mut rsum = vec![0.0_f64; bins];
            let mut count = vec![0usize; bins];
            for (i, &v) in field.values().iter().enumerate() {
                let x = g.position(i);
                let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
                let b = (r / bin_width) as usize;
                if b < bins {
                    sum[b] += v;
                    rsum[b] += r;
                    count[b] += 1;
                }
            }
            (0..bins)
                .filter(|&b| count[b] > 0)
                .map(|b| (rsum[b] / count[b] as f64, sum[b] / count[b] as f64))
                .collect()
        }
    }
}

fn interp(samples: &[(f64, f64)], r: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    if r <= samples[0].0 {
        // flat extension to the axis (v'(0) = 0)
        return samples[0].1;
    }
    if r >= samples[samples.len() - 1].0 {
        return 0.0;
    }
    let mut idx = samples.partition_point(|&(rs, _)| rs < r);
    idx = idx.clamp(1, samples.len() - 1);
    let (r0, v0) = samples[idx - 1];
    let (r1, v1) = samples[idx];
    v0 + (v1 - v0) * (r - r0) / (r1 - r0)
}

/// Relative L^2 distance `sqrt(∫(a-b)^2 2 pi r dr / ∫ b^2 2 pi r dr)` on a
/// common radial grid; 2D inputs are radially averaged first.
pub fn compare_profiles(a: &Field, b: &Field) -> Result<f64, OracleError> {
    let spacing = |f: &Field| match f.grid().as_ref() {
        Grid::Radial(g) => g.spacing(),
        Grid::Square(g) => g.spacing(),
    };
    let extent = |f: &Field| match f.grid().as_ref() {
        Grid::Radial(g) => g.r_max(),
        Grid::Square(g) => g.half_width() - g.spacing(),
    };
    let delta = spacing(a).max(spacing(b));
    let r_lim = extent(a).min(extent(b));
    let sa = radial_samples(a, delta);
    let sb = radial_samples(b, delta);

    let count = (r_lim / delta).floor() as usize;
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..count {
        let r = (k as f64 + 0.5) * delta;
        let va = interp(&sa, r);
        let vb = interp(&sb, r);
        let w = 2.0 * std::f64::consts::PI * r * delta;
        num += w * (va - vb) * (va - vb);
        den += w * vb * vb;
    }
    if den <= 0.0 {
        return Err(OracleError::ZeroReference);
    }
    Ok((num / den).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RadialGrid;
    use crate::model::builtin_model;

    fn model() -> ModelProblem {
        builtin_model("constant_V_power").unwrap()
    }

    fn radial(r_max: f64, m: usize) -> Arc<Grid> {
        Arc::new(Grid::Radial(RadialGrid::new(r_max, m)))
    }

    #[test]
    fn rejects_varying_potential() {
        let m = builtin_model("power").unwrap();
        assert!(matches!(
            shoot(&m, 8.0, 0.1, 1e-2),
            Err(OracleError::NonConstantPotential(_))
        ));
    }

    #[test]
    fn zero_height_is_the_equilibrium() {
        let shot = shoot(&model(), 6.0, 0.0, 1e-2).unwrap();
        assert_eq!(shot.classification, TrajectoryClass::ConvergedToZero);
        assert!(shot.trajectory.iter().all(|&(_, v, _)| v == 0.0));
    }

    #[test]
    fn sweep_establishes_both_regimes() {
        let m = model();
        // Small heights rise towards the interior equilibrium and trip the
        // growth rule; large heights overshoot and cross zero.
        let small = shoot(&m, 12.0, 1e-3, 2e-3).unwrap();
        assert_eq!(
            small.classification,
            TrajectoryClass::StaysPositiveDiverges,
            "small v0"
        );
        let large = shoot(&m, 12.0, 10.0, 2e-3).unwrap();
        assert_eq!(large.classification, TrajectoryClass::CrossesZero, "large v0");
    }

    #[test]
    fn negative_height_rejected() {
        assert!(matches!(
            shoot(&model(), 6.0, -0.5, 1e-2),
            Err(OracleError::NegativeInitial(_))
        ));
    }

    #[test]
    fn ground_state_profile_is_positive_and_decaying() {
        let grid = radial(14.0, 1400);
        let profile = find_ground_state_shooting(&model(), &grid, 2e-3, 1e-12).unwrap();
        assert!(profile.min() >= 0.0, "profile should stay nonnegative");
        assert!(profile.values()[0] > 0.1, "peak at the axis");
        // Monotone tail over the last quarter of the domain.
        let m = profile.len();
        for j in (3 * m / 4)..(m - 1) {
            assert!(
                profile.values()[j + 1] <= profile.values()[j] * (1.0 + 1e-12),
                "tail not monotone at node {j}"
            );
        }
    }

    #[test]
    fn profile_converges_under_step_halving() {
        let grid = radial(12.0, 600);
        let coarse = find_ground_state_shooting(&model(), &grid, 4e-3, 1e-12).unwrap();
        let fine = find_ground_state_shooting(&model(), &grid, 2e-3, 1e-12).unwrap();
        let mut sup = 0.0_f64;
        for (a, b) in coarse.values().iter().zip(fine.values()) {
            sup = sup.max((a - b).abs());
        }
        assert!(sup <= 1e-6, "step-halving sup-norm change {sup:.3e}");
    }

    #[test]
    fn compare_profile_identity_and_scaling() {
        let grid = radial(12.0, 600);
        let profile = find_ground_state_shooting(&model(), &grid, 4e-3, 1e-10).unwrap();
        assert_eq!(compare_profiles(&profile, &profile).unwrap(), 0.0);
        let diff = compare_profiles(&profile.scale(1.01), &profile).unwrap();
        assert!((diff - 0.01).abs() < 1e-6, "scaling metric {diff}");
    }

    #[test]
    fn compare_rejects_zero_reference() {
        let grid = radial(8.0, 100);
        let zero = Field::zeros(Arc::clone(&grid));
        let one = Field::from_fn(Arc::clone(&grid), |_| 1.0);
        assert!(matches!(
            compare_profiles(&one, &zero),
            Err(OracleError::ZeroReference)
        ));
    }
}
