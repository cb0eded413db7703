//! Numerical mountain-pass solver for the transformed functional.
//!
//! The min-max level `C0 = inf_path sup_t Jbar(path(t))` is approached by
//! deforming a discrete path of `P` fields from `0` to a negative-energy
//! endpoint: each sweep applies one Armijo-backtracked descent step to the
//! node of maximal energy (ties broken by lowest index) and re-sorts. The
//! path maximum is therefore non-increasing.
//!
//! Node-wise descent alone localizes the crossing point but its residual
//! stalls at the path resolution, so once the crest stops improving a
//! damped Newton iteration on the weak-form residual takes over from the
//! crest node; it is accepted only if it lands on a nontrivial critical
//! point of positive energy. Deformation resumes if the refinement fails.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::energy::{
    evaluate_j_bar, gradient_j_bar, h1_ratio_u_squared, h1l_norm, hv_norm_sq, scale_to_sphere,
    transformed_values, EnergyError,
};
use crate::grid::{inner, Field, Grid};
use crate::linsys::{BandMatrix, LinSysError};
use crate::model::ModelProblem;
use crate::transform::TransformKernel;

const ARMIJO_INIT: f64 = 1.0;
const ARMIJO_SHRINK: f64 = 0.5;
const ARMIJO_SLOPE: f64 = 1e-4;
const ENDPOINT_ENERGY: f64 = -1e-3;
const ENDPOINT_T_CAP: f64 = 1048576.0; // 2^20
const NONTRIVIAL_NORM: f64 = 0.01;
/// An unrestricted descent step lets the crest node leap across the ridge
/// and the discrete max drains below the min-max level; steps are capped
/// at this fraction of the distance to the neighboring path nodes.
const STEP_NEIGHBOR_FRACTION: f64 = 0.5;
/// Newton refinement schedule: first attempt, then period, during the
/// deformation.
const NEWTON_FIRST_ATTEMPT: u64 = 1;
const NEWTON_PERIOD: u64 = 25;
const NEWTON_MAX_ATTEMPTS: usize = 40;
const NEWTON_MAX_ITERS: usize = 60;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("energy evaluation failed: {0}")]
    Energy(#[from] EnergyError),
    #[error("linear solver failed: {0}")]
    LinSys(#[from] LinSysError),
    #[error(
        "no descent endpoint below {target} up to t = {t_cap}: superlinear growth \
         should force descent (model/grid inconsistency)"
    )]
    NoDescent { target: f64, t_cap: f64 },
    #[error("descent path collapsed onto the trivial endpoint")]
    PathCollapse,
    #[error("backtracking failed to decrease the crest energy (step {step:.3e})")]
    StepFailure { step: f64 },
    #[error("no convergence within {sweeps} sweeps; best residual {residual:.3e}")]
    NonConvergence {
        sweeps: u64,
        residual: f64,
        report: Box<SolveReport>,
    },
    #[error("quotient minimization failed: {0}")]
    Sp(String),
}

/// Solver options; the Armijo constants and the refinement policy are fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub path_nodes: usize,
    pub tol: f64,
    pub max_sweeps: u64,
    pub seed: u64,
    pub rho_scan: Vec<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            path_nodes: 21,
            tol: 1e-5,
            max_sweeps: 50_000,
            seed: 42,
            rho_scan: vec![1e-3, 1e-2, 1e-1],
        }
    }
}

/// Discretized path from `0` to the negative-energy endpoint.
#[derive(Debug, Clone)]
pub struct PathState {
    pub nodes: Vec<Field>,
    pub energies: Vec<f64>,
    pub max_index: usize,
}

impl PathState {
    fn refresh_max(&mut self) {
        let mut best = 0usize;
        for (k, &e) in self.energies.iter().enumerate() {
            if e > self.energies[best] {
                best = k;
            }
        }
        self.max_index = best;
    }

    /// Sup-norm distance from node `k` to its nearest path neighbor.
    fn neighbor_distance(&self, k: usize) -> f64 {
        let mut dist = f64::INFINITY;
        for other in [k.wrapping_sub(1), k + 1] {
            if let Some(node) = self.nodes.get(other) {
                dist = dist.min(node.add_scaled(&self.nodes[k], -1.0).max_abs());
            }
        }
        dist
    }
}

/// Outcome of one named bound or identity check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub pass: bool,
    /// Slack of the check (positive = satisfied with this much room).
    pub margin: f64,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: Field,
    pub energy: f64,
    pub residual_max: f64,
    pub residual_l2: f64,
    pub iterations: u64,
    /// Prefix of `history` produced by the deformation phase; the crest
    /// energy is non-increasing over it.
    pub deformation_sweeps: u64,
    pub tol: f64,
    pub bound_checks: BTreeMap<String, BoundCheck>,
    pub history: Vec<(u64, f64, f64)>,
}

/// Scales the profile `phi >= 0` through `v = h(t*phi)` and doubles `t`
/// from 1 until the transformed energy drops below `-1e-3`.
pub fn find_descent_endpoint(
    model: &ModelProblem,
    phi: &Field,
) -> Result<Field, SolveError> {
    assert!(phi.max_abs() > 0.0, "phi must not be identically zero");
    assert!(phi.min() >= 0.0, "phi must be nonnegative");
    let kernel = *model.kernel();
    let mut t = 1.0_f64;
    while t <= ENDPOINT_T_CAP {
        let mut endpoint = Field::zeros(Arc::clone(phi.grid()));
        for (o, &p) in endpoint.values_mut().iter_mut().zip(phi.values()) {
            *o = kernel.h_forward(t * p).map_err(EnergyError::from)?;
        }
        let e = evaluate_j_bar(model, &endpoint)?;
        if e.total <= ENDPOINT_ENERGY {
            return Ok(endpoint);
        }
        t *= 2.0;
    }
    Err(SolveError::NoDescent {
        target: ENDPOINT_ENERGY,
        t_cap: ENDPOINT_T_CAP,
    })
}

/// Centered Gaussian mountain profile used to seed the path.
pub fn default_profile(grid: &Arc<Grid>) -> Field {
    Field::from_fn(Arc::clone(grid), |x| {
        (-(x[0] * x[0] + x[1] * x[1])).exp()
    })
}

pub fn mountain_pass_solve(
    model: &ModelProblem,
    grid: &Arc<Grid>,
    opts: &SolverOptions,
) -> Result<SolveReport, SolveError> {
    assert!(opts.path_nodes >= 3, "need at least 3 path nodes");
    assert!(opts.tol > 0.0, "tolerance must be positive");

    let phi = default_profile(grid);
    let endpoint = find_descent_endpoint(model, &phi)?;
    let p = opts.path_nodes;

    let mut nodes = Vec::with_capacity(p);
    let mut energies = Vec::with_capacity(p);
    for k in 0..p {
        let t = k as f64 / (p - 1) as f64;
        let node = endpoint.scale(t);
        energies.push(evaluate_j_bar(model, &node)?.total);
        nodes.push(node);
    }
    let mut path = PathState {
        nodes,
        energies,
        max_index: 0,
    };
    path.refresh_max();

    let mut history: Vec<(u64, f64, f64)> = Vec::new();
    let mut best_residual = f64::INFINITY;
    let mut sweep = 0u64;
    let mut newton_attempts = 0usize;
    let mut next_newton = NEWTON_FIRST_ATTEMPT;
    // Highest-energy crest observed; the refinement falls back to it once
    // descent has dragged the current crest off the ridge.
    let mut best_crest: Option<(Field, f64)> = None;
    let mut solution: Option<(Field, Field)> = None; // (field, gradient)

    while sweep < opts.max_sweeps {
        sweep += 1;
        let k = path.max_index;
        if k == 0 {
            return Err(SolveError::PathCollapse);
        }
        let grad = gradient_j_bar(model, &path.nodes[k])?;
        let rmax = grad.max_abs();
        best_residual = best_residual.min(rmax);
        let crest_energy = path.energies[k];
        history.push((sweep, crest_energy, rmax));
        if best_crest.as_ref().map(|&(_, e)| crest_energy > e).unwrap_or(true) {
            best_crest = Some((path.nodes[k].clone(), crest_energy));
        }

        if rmax <= opts.tol {
            solution = Some((path.nodes[k].clone(), grad));
            break;
        }

        // Periodic refinement: Newton from the crest node towards the
        // nearby critical point; accepted only for a nontrivial critical
        // point of positive energy.
        if sweep >= next_newton && newton_attempts < NEWTON_MAX_ATTEMPTS {
            newton_attempts += 1;
            next_newton = sweep + NEWTON_PERIOD;
            let start = match &best_crest {
                Some((field, e)) if crest_energy < 0.5 * e => field.clone(),
                _ => path.nodes[k].clone(),
            };
            if let Some((field, grad, steps)) = newton_refine(model, &start, opts.tol)? {
                let e = evaluate_j_bar(model, &field)?.total;
                let nontrivial = h1l_norm(model, &field)? > NONTRIVIAL_NORM;
                if e > 0.0 && nontrivial {
                    let deformation_sweeps = sweep;
                    for (i, &(energy, residual)) in steps.iter().enumerate() {
                        history.push((sweep + 1 + i as u64, energy, residual));
                    }
                    let iterations = sweep + steps.len() as u64;
                    let (field, grad) = (field, grad);
                    return build_report(
                        model,
                        field,
                        grad,
                        iterations,
                        deformation_sweeps,
                        opts.tol,
                        history,
                    );
                }
            }
        }

        // One Armijo-backtracked descent step on the crest node, with the
        // initial step capped so the node stays within reach of its path
        // neighbors (the polygon keeps sampling the ridge).
        let g2 = inner(&grad, &grad);
        let cap = STEP_NEIGHBOR_FRACTION * path.neighbor_distance(k) / rmax;
        let mut step = if cap.is_finite() && cap > 0.0 {
            ARMIJO_INIT.min(cap)
        } else {
            ARMIJO_INIT
        };
        let mut accepted = None;
        while step > 1e-14 {
            let candidate = path.nodes[k].add_scaled(&grad, -step);
            match evaluate_j_bar(model, &candidate) {
                Ok(e) if e.total <= crest_energy - ARMIJO_SLOPE * step * g2 => {
                    accepted = Some((candidate, e.total));
                    break;
                }
                // An overflow or an insufficient decrease both shrink the step.
                _ => step *= ARMIJO_SHRINK,
            }
        }
        let (candidate, e_new) = accepted.ok_or(SolveError::StepFailure { step })?;
        path.nodes[k] = candidate;
        path.energies[k] = e_new;
        path.refresh_max();
    }

    let (field, grad) = match solution {
        Some(s) => s,
        None => {
            let k = path.max_index;
            let grad = gradient_j_bar(model, &path.nodes[k])?;
            let report = build_report(
                model,
                path.nodes[k].clone(),
                grad,
                sweep,
                sweep,
                opts.tol,
                history.clone(),
            )?;
            return Err(SolveError::NonConvergence {
                sweeps: sweep,
                residual: best_residual,
                report: Box::new(report),
            });
        }
    };

    build_report(model, field, grad, sweep, sweep, opts.tol, history)
}

fn build_report(
    model: &ModelProblem,
    solution: Field,
    grad: Field,
    iterations: u64,
    deformation_sweeps: u64,
    tol: f64,
    history: Vec<(u64, f64, f64)>,
) -> Result<SolveReport, SolveError> {
    let energy = evaluate_j_bar(model, &solution)?.total;
    let residual_max = grad.max_abs();
    let residual_l2 = inner(&grad, &grad).sqrt();

    let mut checks = BTreeMap::new();
    let norm = h1l_norm(model, &solution)?;
    checks.insert(
        "nontrivial_norm".to_string(),
        BoundCheck {
            pass: norm > NONTRIVIAL_NORM,
            margin: norm - NONTRIVIAL_NORM,
        },
    );
    let min_v = solution.min();
    checks.insert(
        "positivity_min".to_string(),
        BoundCheck {
            pass: min_v >= -1e-8,
            margin: min_v + 1e-8,
        },
    );
    checks.insert(
        "energy_positive".to_string(),
        BoundCheck {
            pass: energy > 0.0,
            margin: energy,
        },
    );
    let upper = (model.theta() - 4.0) / (2.0 * model.theta());
    checks.insert(
        "energy_upper_bound".to_string(),
        BoundCheck {
            pass: energy < upper,
            margin: upper - energy,
        },
    );
    let k_norm = hv_norm_sq(model, &solution)?;
    let k_bound = 2.0 * model.theta() / (model.theta() - 4.0) * energy * (1.0 + 1e-3);
    checks.insert(
        "norm_bound".to_string(),
        BoundCheck {
            pass: k_norm <= k_bound,
            margin: k_bound - k_norm,
        },
    );

    Ok(SolveReport {
        solution,
        energy,
        residual_max,
        residual_l2,
        iterations,
        deformation_sweeps,
        tol,
        bound_checks: checks,
        history,
    })
}

/// Damped Newton on the weak-form residual, from `start`. Returns
/// `Ok(None)` when the iteration fails to converge (the caller resumes the
/// deformation); on success also returns the `(energy, residual)` record
/// of each accepted iterate.
#[allow(clippy::type_complexity)]
pub fn newton_refine(
    model: &ModelProblem,
    start: &Field,
    tol: f64,
) -> Result<Option<(Field, Field, Vec<(f64, f64)>)>, SolveError> {
    let grid = Arc::clone(start.grid());
    let (n, kl, ku) = match grid.as_ref() {
        Grid::Square(g) => (g.node_count(), g.n(), g.n()),
        Grid::Radial(g) => (g.m(), 1, 1),
    };

    let mut v = start.clone();
    let mut grad = gradient_j_bar(model, &v)?;
    let mut rmax = grad.max_abs();
    let mut steps: Vec<(f64, f64)> = Vec::new();

    for _ in 0..NEWTON_MAX_ITERS {
        if rmax <= tol {
            return Ok(Some((v, grad, steps)));
        }
        let jac = assemble_jacobian(model, &v, n, kl, ku)?;
        let lu = match jac.lu_factor() {
            Ok(lu) => lu,
            Err(_) => return Ok(None),
        };
        let delta = lu.solve(grad.values());
        let delta = Field::from_values(Arc::clone(&grid), delta);

        // Backtrack on the max-norm of the residual.
        let mut t = 1.0_f64;
        let mut next = None;
        while t > 1e-10 {
            let cand = v.add_scaled(&delta, -t);
            if let Ok(g) = gradient_j_bar(model, &cand) {
                let r = g.max_abs();
                if r < (1.0 - 1e-4 * t) * rmax {
                    next = Some((cand, g, r));
                    break;
                }
            }
            t *= 0.5;
        }
        match next {
            Some((cand, g, r)) => {
                v = cand;
                grad = g;
                rmax = r;
                let energy = evaluate_j_bar(model, &v)?.total;
                steps.push((energy, rmax));
            }
            None => return Ok(None),
        }
    }
    if rmax <= tol {
        return Ok(Some((v, grad, steps)));
    }
    Ok(None)
}

fn assemble_jacobian(
    model: &ModelProblem,
    v: &Field,
    n: usize,
    kl: usize,
    ku: usize,
) -> Result<BandMatrix, SolveError> {
    let u = transformed_values(model, v)?;
    let grid = v.grid().as_ref();
    let mut a = BandMatrix::zeros(n, kl, ku);

    match grid {
        Grid::Square(g) => {
            let nn = g.n();
            let inv_h2 = 1.0 / (g.spacing() * g.spacing());
            for j in 0..nn {
                for i in 0..nn {
                    let idx = j * nn + i;
                    a.set(idx, idx, 4.0 * inv_h2 + reaction(model, grid, idx, u[idx]));
                    if i > 0 {
                        a.set(idx, idx - 1, -inv_h2);
                    }
                    if i + 1 < nn {
                        a.set(idx, idx + 1, -inv_h2);
                    }
                    if j > 0 {
                        a.set(idx, idx - nn, -inv_h2);
                    }
                    if j + 1 < nn {
                        a.set(idx, idx + nn, -inv_h2);
                    }
                }
            }
        }
        Grid::Radial(g) => {
            let m = g.m();
            let dr = g.spacing();
            for jdx in 0..m {
                let r = g.radius(jdx);
                let r_lo = jdx as f64 * dr;
                let r_hi = (jdx + 1) as f64 * dr;
                let mut diag = reaction(model, grid, jdx, u[jdx]);
                if jdx > 0 {
                    diag += r_lo / (r * dr * dr);
                    a.set(jdx, jdx - 1, -r_lo / (r * dr * dr));
                }
                if jdx + 1 < m {
                    diag += r_hi / (r * dr * dr);
                    a.set(jdx, jdx + 1, -r_hi / (r * dr * dr));
                } else {
                    diag += r_hi / (r * dr * 0.5 * dr);
                }
                a.add(jdx, jdx, diag);
            }
        }
    }
    Ok(a)
}

/// `d/dv [V f f' - g(x,f) f']` expressed through `u = f(v)`.
fn reaction(model: &ModelProblem, grid: &Grid, idx: usize, u: f64) -> f64 {
    let x = grid.position(idx);
    let fp = TransformKernel::f_prime_of_u(u);
    let fs = TransformKernel::f_second_of_u(u);
    let vpot = model.potential(x);
    vpot * (fp * fp + u * fs) - model.g_ds(x, u) * fp * fp - model.g(x, u) * fs
}

/// Post-solve verification: positivity and upper bound of the level, the
/// sphere geometry along the solution direction, vanishing of the residual
/// against the admissible direction `f(v)/f'(v)`, and the fitted-constant
/// norm comparison. All outcomes are reported, never thrown.
pub fn verify_solution(
    model: &ModelProblem,
    report: &SolveReport,
    rho_scan: &[f64],
) -> BTreeMap<String, BoundCheck> {
    let mut checks = BTreeMap::new();
    let v = &report.solution;
    let energy = report.energy;

    checks.insert(
        "energy_positive".to_string(),
        BoundCheck {
            pass: energy > 0.0,
            margin: energy,
        },
    );
    let upper = (model.theta() - 4.0) / (2.0 * model.theta());
    checks.insert(
        "energy_upper_bound".to_string(),
        BoundCheck {
            pass: energy < upper,
            margin: upper - energy,
        },
    );

    for &rho in rho_scan {
        let name = format!("geometry_rho_{rho:e}");
        let check = match scale_to_sphere(model, v, rho)
            .and_then(|f| evaluate_j_bar(model, &f))
        {
            Ok(e) => BoundCheck {
                pass: e.total >= rho * rho / 8.0,
                margin: e.total - rho * rho / 8.0,
            },
            Err(_) => BoundCheck {
                pass: false,
                margin: f64::NEG_INFINITY,
            },
        };
        checks.insert(name, check);
    }

    // <J'(v), f(v)/f'(v)> = 0 at a critical point; normalize by the L^2
    // norm of the direction and compare against 10x the solve tolerance.
    let nehari = (|| -> Result<BoundCheck, EnergyError> {
        let u = transformed_values(model, v)?;
        let phi = Field::from_values(
            Arc::clone(v.grid()),
            u.iter().map(|&ui| ui * (1.0 + ui * ui).sqrt()).collect(),
        );
        let grad = gradient_j_bar(model, v)?;
        let pairing = inner(&grad, &phi);
        let phi_norm = inner(&phi, &phi).sqrt();
        let normalized = if phi_norm == 0.0 {
            0.0
        } else {
            pairing.abs() / phi_norm
        };
        let bound = 10.0 * report.tol;
        Ok(BoundCheck {
            pass: normalized <= bound,
            margin: bound - normalized,
        })
    })();
    checks.insert(
        "nehari_identity".to_string(),
        nehari.unwrap_or(BoundCheck {
            pass: false,
            margin: f64::NEG_INFINITY,
        }),
    );

    // Fitted-constant inequality ||u^2||_{H^1} <= C (||v|| + ||v||^2):
    // fit on a seeded ensemble, then evaluate the solution's ratio.
    let prop = (|| -> Result<BoundCheck, EnergyError> {
        let mut rng = ChaCha8Rng::seed_from_u64(2718);
        let grid = Arc::clone(v.grid());
        let mut fit = 0.0_f64;
        for _ in 0..20 {
            let values: Vec<f64> = (0..grid.node_count())
                .map(|_| rng.gen_range(-0.8..0.8))
                .collect();
            let field = Field::from_values(Arc::clone(&grid), values);
            fit = fit.max(h1_ratio_u_squared(model, &field)?);
        }
        let c = 1.25 * fit;
        let ratio = h1_ratio_u_squared(model, v)?;
        Ok(BoundCheck {
            pass: ratio <= c,
            margin: c - ratio,
        })
    })();
    checks.insert(
        "prop_vii_fitted".to_string(),
        prop.unwrap_or(BoundCheck {
            pass: false,
            margin: f64::NEG_INFINITY,
        }),
    );

    checks
}
