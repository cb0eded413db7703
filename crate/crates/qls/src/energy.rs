//! Discrete energy functionals and norms.
//!
//! The transformed functional is
//!
//! ```text
//! Jbar(v) = 1/2 ∫ |∇v|^2 + 1/2 ∫ V(x) f(v)^2 - ∫ G(x, f(v)),
//! ```
//!
//! and the original one `J(u) = 1/2 ∫ (1+u^2)|∇u|^2 + 1/2 ∫ V u^2 - ∫ G(x,u)`.
//! The discrete `J` evaluates its kinetic term through the divided
//! difference of `h` on each edge, `((h(u_b)-h(u_a))/(u_b-u_a))^2`, which is
//! a second-order-consistent quadrature of `(1+u^2)` and makes the discrete
//! change-of-variables identity `J(f(v)) = Jbar(v)` hold to round-off. The
//! naive edge-midpoint quadrature differs from it by O(h^2); see the
//! refinement test.
//!
//! The gradient of `Jbar` is the exact derivative of the discrete energy:
//! nodal residual `-Δ_h v + V f(v) f'(v) - g(x, f(v)) f'(v)`, paired with
//! directions through the quadrature inner product.
//!
//! The Orlicz norm is the infimum `inf_{z>0} z (1 + ∫ V L(v/z))`, computed
//! by golden-section search in `log z`; the minimand is a perspective of
//! the convex kernel `L`, hence convex in `z`.

use std::sync::Arc;

use thiserror::Error;

use crate::grid::{dirichlet_energy, inner, laplacian_apply, Field};
use crate::model::ModelProblem;
use crate::transform::{TransformError, TransformKernel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnergyError {
    #[error("transform kernel failure: {0}")]
    Transform(#[from] TransformError),
    #[error("exponent guard tripped at node {node}: |u| = {value}")]
    Overflow { node: usize, value: f64 },
    #[error("orlicz norm bracket expansion exceeded {0} iterations")]
    BracketExpansion(usize),
    #[error("amplitude root-finding failed: {0}")]
    Amplitude(String),
}

/// The three terms of `Jbar` and their sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub potential: f64,
    pub nonlinear: f64,
    pub total: f64,
}

/// Pointwise transform `u_i = f(v_i)`, guarded against the exponent bound
/// of the model's nonlinearity.
pub fn transformed_values(model: &ModelProblem, v: &Field) -> Result<Vec<f64>, EnergyError> {
    let kernel = model.kernel();
    let safe = model.max_safe_s();
    let mut u = Vec::with_capacity(v.len());
    for (node, &val) in v.values().iter().enumerate() {
        let ui = kernel.f_inverse(val)?;
        if ui.abs() > safe {
            return Err(EnergyError::Overflow {
                node,
                value: ui.abs(),
            });
        }
        u.push(ui);
    }
    Ok(u)
}

pub fn evaluate_j_bar(model: &ModelProblem, v: &Field) -> Result<EnergyBreakdown, EnergyError> {
    let u = transformed_values(model, v)?;
    let grid = v.grid().as_ref();
    let kinetic = 0.5 * dirichlet_energy(v);
    let mut potential = 0.0;
    let mut nonlinear = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        let w = grid.weight(i);
        let x = grid.position(i);
        potential += 0.5 * w * model.potential(x) * ui * ui;
        nonlinear += w * model.primitive(x, ui);
    }
    Ok(EnergyBreakdown {
        kinetic,
        potential,
        nonlinear,
        total: kinetic + potential - nonlinear,
    })
}

/// The original (untransformed) energy; its kinetic edge weight is the
/// squared divided difference of `h`, so `evaluate_j(u) = evaluate_j_bar(h(u))`
/// holds exactly in the discrete setting.
pub fn evaluate_j(model: &ModelProblem, u: &Field) -> Result<f64, EnergyError> {
    let kernel = model.kernel();
    let safe = model.max_safe_s();
    for (node, &ui) in u.values().iter().enumerate() {
        if ui.abs() > safe {
            return Err(EnergyError::Overflow {
                node,
                value: ui.abs(),
            });
        }
    }
    let mut hv = Field::zeros(Arc::clone(u.grid()));
    for (o, &ui) in hv.values_mut().iter_mut().zip(u.values()) {
        // u finite by Field invariant; h_forward only rejects non-finite input
        *o = kernel.h_forward(ui)?;
    }
    let kinetic = 0.5 * dirichlet_energy(&hv);
    let grid = u.grid().as_ref();
    let mut potential = 0.0;
    let mut nonlinear = 0.0;
    for (i, &ui) in u.values().iter().enumerate() {
        let w = grid.weight(i);
        let x = grid.position(i);
        potential += 0.5 * w * model.potential(x) * ui * ui;
        nonlinear += w * model.primitive(x, ui);
    }
    Ok(kinetic + potential - nonlinear)
}

/// Naive edge-midpoint quadrature of `1/2 ∫ (1+u^2)|∇u|^2`; kept as the
/// comparison point for the O(h^2) mismatch of the two kinetic forms.
pub fn quasilinear_kinetic_midpoint(u: &Field) -> f64 {
    use crate::grid::Grid;
    let v = u.values();
    match u.grid().as_ref() {
        Grid::Square(g) => {
            let n = g.n();
            let mut acc = 0.0;
            let mut edge = |a: f64, b: f64| {
                let mid = 0.5 * (a + b);
                acc += (1.0 + mid * mid) * (b - a) * (b - a);
            };
            for j in 0..n {
                for i in 0..=n {
                    let left = if i > 0 { v[j * n + i - 1] } else { 0.0 };
                    let right = if i < n { v[j * n + i] } else { 0.0 };
                    edge(left, right);
                }
            }
            for i in 0..n {
                for j in 0..=n {
                    let lo = if j > 0 { v[(j - 1) * n + i] } else { 0.0 };
                    let hi = if j < n { v[j * n + i] } else { 0.0 };
                    edge(lo, hi);
                }
            }
            0.5 * acc
        }
        Grid::Radial(g) => {
            let m = g.m();
            let dr = g.spacing();
            let two_pi = 2.0 * std::f64::consts::PI;
            let mut acc = 0.0;
            for j in 1..m {
                let mid = 0.5 * (v[j] + v[j - 1]);
                let slope = (v[j] - v[j - 1]) / dr;
                acc += (1.0 + mid * mid) * slope * slope * two_pi * (j as f64 * dr) * dr;
            }
            let mid = 0.5 * v[m - 1];
            let slope = -v[m - 1] / (0.5 * dr);
            acc += (1.0 + mid * mid) * slope * slope * two_pi * g.r_max() * 0.5 * dr;
            0.5 * acc
        }
    }
}

/// Weak-form residual of `Jbar` as a nodal field:
/// `-Δ_h v + V f f' - g(x,f) f'`. Pairing it with a direction through
/// [`inner`] gives the directional derivative of [`evaluate_j_bar`].
pub fn gradient_j_bar(model: &ModelProblem, v: &Field) -> Result<Field, EnergyError> {
    let u = transformed_values(model, v)?;
    let mut out = laplacian_apply(v);
    let grid = Arc::clone(v.grid());
    for (i, o) in out.values_mut().iter_mut().enumerate() {
        let x = grid.position(i);
        let ui = u[i];
        let fp = TransformKernel::f_prime_of_u(ui);
        *o += (model.potential(x) * ui - model.g(x, ui)) * fp;
    }
    Ok(out)
}

/// `∫ |∇v|^2 + ∫ V f(v)^2` — the squared quantity that defines the spheres
/// of the mountain-pass geometry.
pub fn hv_norm_sq(model: &ModelProblem, v: &Field) -> Result<f64, EnergyError> {
    let u = transformed_values(model, v)?;
    let grid = v.grid().as_ref();
    let mut acc = dirichlet_energy(v);
    for (i, &ui) in u.iter().enumerate() {
        acc += grid.weight(i) * model.potential(grid.position(i)) * ui * ui;
    }
    Ok(acc)
}

const BRACKET_CAP: usize = 1_000_000;
const GOLDEN_TOL_LOG: f64 = 1e-10;

/// Orlicz norm `inf_{z>0} z (1 + ∫ V L(v/z))`. Returns 0 for the zero field.
pub fn orlicz_norm(model: &ModelProblem, v: &Field) -> Result<f64, EnergyError> {
    let scale = v.max_abs();
    if scale == 0.0 {
        return Ok(0.0);
    }
    let kernel = *model.kernel();
    let grid = Arc::clone(v.grid());
    let weights_v: Vec<(f64, f64)> = (0..v.len())
        .map(|i| {
            (
                grid.weight(i) * model.potential(grid.position(i)),
                v.values()[i],
            )
        })
        .collect();
    let minimand = |log_z: f64| -> Result<f64, EnergyError> {
        let z = log_z.exp();
        let mut acc = 0.0;
        for &(wv, vi) in &weights_v {
            let f = kernel.f_inverse(vi / z)?;
            acc += wv * f * f;
        }
        Ok(z * (1.0 + acc))
    };

    // Expand a unimodal bracket around log(scale).
    let mut mid = scale.ln();
    let mut step = 1.0;
    let mut a = mid - step;
    let mut b = mid + step;
    let mut fm = minimand(mid)?;
    let mut fa = minimand(a)?;
    let mut fb = minimand(b)?;
    let mut expansions = 0usize;
    while fa < fm || fb < fm {
        if expansions >= BRACKET_CAP {
            return Err(EnergyError::BracketExpansion(BRACKET_CAP));
        }
        expansions += 1;
        if fa < fm {
            b = mid;
            fb = fm;
            mid = a;
            fm = fa;
            a = mid - step;
            fa = minimand(a)?;
        } else {
            a = mid;
            fa = fm;
            mid = b;
            fm = fb;
            b = mid + step;
            fb = minimand(b)?;
        }
        step *= 1.5;
    }

    // Golden-section on [a, b] in log z.
    let phi = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = minimand(x1)?;
    let mut f2 = minimand(x2)?;
    while b - a > GOLDEN_TOL_LOG {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = minimand(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = minimand(x2)?;
        }
    }
    Ok(f1.min(f2))
}

/// `||v|| = |∇v|_{L^2} + |v|_{E_L}`.
pub fn h1l_norm(model: &ModelProblem, v: &Field) -> Result<f64, EnergyError> {
    Ok(dirichlet_energy(v).sqrt() + orlicz_norm(model, v)?)
}

/// `||u^2||_{H^1} / (||v|| + ||v||^2)` with `u = f(v)` — the ratio whose
/// boundedness over field ensembles is checked with a fitted constant.
pub fn h1_ratio_u_squared(model: &ModelProblem, v: &Field) -> Result<f64, EnergyError> {
    let u = transformed_values(model, v)?;
    let grid = Arc::clone(v.grid());
    let w = Field::from_values(grid, u.iter().map(|&x| x * x).collect());
    let h1 = (dirichlet_energy(&w) + inner(&w, &w)).sqrt();
    let norm = h1l_norm(model, v)?;
    if norm == 0.0 {
        return Ok(0.0);
    }
    Ok(h1 / (norm + norm * norm))
}

/// Scales `direction` so that `∫|∇v|^2 + ∫V f(v)^2 = rho^2`; the scaled
/// field realizes the sphere `S_rho` along that direction.
pub fn scale_to_sphere(
    model: &ModelProblem,
    direction: &Field,
    rho: f64,
) -> Result<Field, EnergyError> {
    if direction.max_abs() == 0.0 {
        return Err(EnergyError::Amplitude("zero direction".into()));
    }
    if !(rho > 0.0) {
        return Err(EnergyError::Amplitude(format!("rho must be positive, got {rho}")));
    }
    // f(t)^2 <= t^2 gives N(alpha) <= alpha^2 Q with the quadratic proxy Q,
    // so rho/sqrt(Q) starts below the sphere.
    let grid = direction.grid().as_ref();
    let mut q = dirichlet_energy(direction);
    for (i, &di) in direction.values().iter().enumerate() {
        q += grid.weight(i) * model.potential(grid.position(i)) * di * di;
    }
    let mut lo = rho / q.sqrt();
    let mut n_lo = hv_norm_sq(model, &direction.scale(lo))?;
    if n_lo > rho * rho {
        // round-off can land a hair above; shrink once
        lo *= 0.999;
        n_lo = hv_norm_sq(model, &direction.scale(lo))?;
        if n_lo > rho * rho {
            return Err(EnergyError::Amplitude("lower bracket failed".into()));
        }
    }
    let mut hi = lo;
    let mut n_hi = n_lo;
    let mut guard = 0;
    while n_hi < rho * rho {
        hi *= 2.0;
        n_hi = hv_norm_sq(model, &direction.scale(hi))?;
        guard += 1;
        if guard > 200 {
            return Err(EnergyError::Amplitude("upper bracket failed".into()));
        }
    }
    for _ in 0..200 {
        let midpoint = 0.5 * (lo + hi);
        let n_mid = hv_norm_sq(model, &direction.scale(midpoint))?;
        if (n_mid - rho * rho).abs() <= 1e-12 * rho * rho {
            return Ok(direction.scale(midpoint));
        }
        if n_mid < rho * rho {
            lo = midpoint;
        } else {
            hi = midpoint;
        }
    }
    Ok(direction.scale(0.5 * (lo + hi)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, Grid2D};
    use crate::model::builtin_model;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> Arc<Grid> {
        Arc::new(Grid::Square(Grid2D::new(6.0, n)))
    }

    fn random_field(g: &Arc<Grid>, amp: f64, rng: &mut ChaCha8Rng) -> Field {
        let values = (0..g.node_count())
            .map(|_| rng.gen_range(-amp..amp))
            .collect();
        Field::from_values(Arc::clone(g), values)
    }

    fn models() -> Vec<ModelProblem> {
        ["power", "critical", "constant_V_power"]
            .iter()
            .map(|n| builtin_model(n).unwrap())
            .collect()
    }

    #[test]
    fn zero_field_gives_zero_breakdown() {
        let g = grid(16);
        let z = Field::zeros(Arc::clone(&g));
        for m in models() {
            let e = evaluate_j_bar(&m, &z).unwrap();
            assert_eq!(
                (e.kinetic, e.potential, e.nonlinear, e.total),
                (0.0, 0.0, 0.0, 0.0)
            );
            assert_eq!(evaluate_j(&m, &z).unwrap(), 0.0);
            let grad = gradient_j_bar(&m, &z).unwrap();
            assert_eq!(grad.max_abs(), 0.0);
        }
    }

    #[test]
    fn breakdown_total_is_sum_of_terms() {
        let g = grid(20);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = builtin_model("power").unwrap();
        let v = random_field(&g, 0.5, &mut rng);
        let e = evaluate_j_bar(&m, &v).unwrap();
        assert_eq!(e.total, e.kinetic + e.potential - e.nonlinear);
        assert!(e.kinetic > 0.0 && e.potential > 0.0 && e.nonlinear > 0.0);
    }

    #[test]
    fn change_of_variables_identity() {
        let g = grid(24);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for m in models() {
            for _ in 0..50 {
                let v = random_field(&g, 0.8, &mut rng);
                let jbar = evaluate_j_bar(&m, &v).unwrap().total;
                let u = Field::from_values(
                    Arc::clone(&g),
                    transformed_values(&m, &v).unwrap(),
                );
                let j = evaluate_j(&m, &u).unwrap();
                assert!(
                    (j - jbar).abs() <= 1e-9 * (1.0 + jbar.abs()),
                    "{}: J={j} vs Jbar={jbar}",
                    m.name()
                );
            }
        }
    }

    #[test]
    fn inverse_identity_j_of_h() {
        let g = grid(20);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = builtin_model("power").unwrap();
        let kernel = *m.kernel();
        for _ in 0..20 {
            let u = random_field(&g, 1.0, &mut rng);
            let v = u.map(|x| kernel.h_forward(x).unwrap());
            let j = evaluate_j(&m, &u).unwrap();
            let jbar = evaluate_j_bar(&m, &v).unwrap().total;
            assert!((j - jbar).abs() <= 1e-9 * (1.0 + jbar.abs()));
        }
    }

    #[test]
    fn kinetic_forms_mismatch_shrinks_second_order() {
        // Divided-difference kinetic vs midpoint kinetic on a smooth field:
        // the gap is O(h^2).
        let bump = |x: [f64; 2]| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            (-r2).exp()
        };
        let gap_at = |n: usize| {
            let g = grid(n);
            let u = Field::from_fn(Arc::clone(&g), bump);
            let m = builtin_model("power").unwrap();
            let kernel = *m.kernel();
            let hv = u.map(|x| kernel.h_forward(x).unwrap());
            let exact_form = 0.5 * dirichlet_energy(&hv);
            (exact_form - quasilinear_kinetic_midpoint(&u)).abs()
        };
        let (g1, g2) = (gap_at(32), gap_at(64));
        assert!(g1 / g2 > 3.0, "mismatch ratio {} not second order", g1 / g2);
    }

    #[test]
    fn j_of_scaled_profile_turns_negative() {
        let g = grid(48);
        let m = builtin_model("power").unwrap();
        let phi = Field::from_fn(Arc::clone(&g), |x| (-(x[0] * x[0] + x[1] * x[1])).exp());
        let mut seen_negative = false;
        for k in 0..22 {
            let t = 2.0_f64.powi(k) / 16.0;
            let j = evaluate_j(&m, &phi.scale(t)).unwrap();
            if j < 0.0 {
                seen_negative = true;
                break;
            }
        }
        assert!(seen_negative, "J(t phi) should go negative for large t");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = grid(16);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let eps = 1e-6;
        for m in models() {
            for _ in 0..20 {
                let v = random_field(&g, 0.5, &mut rng);
                let phi = random_field(&g, 1.0, &mut rng);
                let grad = gradient_j_bar(&m, &v).unwrap();
                let directional = inner(&grad, &phi);
                let plus = evaluate_j_bar(&m, &v.add_scaled(&phi, eps)).unwrap().total;
                let minus = evaluate_j_bar(&m, &v.add_scaled(&phi, -eps)).unwrap().total;
                let fd = (plus - minus) / (2.0 * eps);
                let rel = (directional - fd).abs() / directional.abs().max(fd.abs()).max(1e-30);
                assert!(
                    rel <= 1e-6,
                    "{}: directional {directional} vs fd {fd}, rel {rel:.2e}",
                    m.name()
                );
            }
        }
    }

    #[test]
    fn overflow_guard_names_the_node() {
        let m = builtin_model("critical").unwrap();
        let g = grid(8);
        let mut v = Field::zeros(Arc::clone(&g));
        // f(v) ~ sqrt(2v): v = 20 puts u ≈ 6.3 over the guard (~2.73).
        v.values_mut()[17] = 20.0;
        match evaluate_j_bar(&m, &v) {
            Err(EnergyError::Overflow { node, .. }) => assert_eq!(node, 17),
            other => panic!("expected overflow error, got {other:?}"),
        }
    }

    #[test]
    fn orlicz_norm_zero_and_homogeneity() {
        let g = grid(16);
        let m = builtin_model("power").unwrap();
        assert_eq!(orlicz_norm(&m, &Field::zeros(Arc::clone(&g))).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let v = random_field(&g, 0.8, &mut rng);
            let base = orlicz_norm(&m, &v).unwrap();
            for c in [0.5, 2.0, 10.0] {
                let scaled = orlicz_norm(&m, &v.scale(c)).unwrap();
                let rel = (scaled - c * base).abs() / (c * base);
                assert!(rel <= 1e-9, "homogeneity c={c}: rel {rel:.2e}");
            }
        }
    }

    #[test]
    fn orlicz_norm_triangle_inequality() {
        let g = grid(12);
        let m = builtin_model("power").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let v = random_field(&g, 1.0, &mut rng);
            let w = random_field(&g, 1.0, &mut rng);
            let sum = orlicz_norm(&m, &v.add_scaled(&w, 1.0)).unwrap();
            let parts = orlicz_norm(&m, &v).unwrap() + orlicz_norm(&m, &w).unwrap();
            assert!(sum <= parts + 1e-9, "triangle: {sum} > {parts}");
        }
    }

    #[test]
    fn h1l_norm_axioms() {
        let g = grid(12);
        let m = builtin_model("power").unwrap();
        assert_eq!(h1l_norm(&m, &Field::zeros(Arc::clone(&g))).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let v = random_field(&g, 0.7, &mut rng);
            let w = random_field(&g, 0.7, &mut rng);
            let nv = h1l_norm(&m, &v).unwrap();
            let scaled = h1l_norm(&m, &v.scale(3.0)).unwrap();
            assert!((scaled - 3.0 * nv).abs() <= 1e-9 * (1.0 + scaled));
            let tri = h1l_norm(&m, &v.add_scaled(&w, 1.0)).unwrap();
            assert!(tri <= nv + h1l_norm(&m, &w).unwrap() + 1e-9);
        }
    }

    #[test]
    fn small_bump_energy_positive() {
        let g = grid(48);
        for m in models() {
            let v = Field::from_fn(Arc::clone(&g), |x| {
                0.1 * (-(x[0] * x[0] + x[1] * x[1])).exp()
            });
            let e = evaluate_j_bar(&m, &v).unwrap();
            assert!(e.total > 0.0, "{}: small bump energy {}", m.name(), e.total);
        }
    }

    #[test]
    fn mountain_pass_geometry_on_spheres() {
        let g = grid(12);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for m in models() {
            for rho in [1e-3, 1e-2, 1e-1] {
                for _ in 0..100 {
                    let dir = random_field(&g, 1.0, &mut rng);
                    let v = scale_to_sphere(&m, &dir, rho).unwrap();
                    let n = hv_norm_sq(&m, &v).unwrap();
                    assert!((n - rho * rho).abs() <= 1e-10 * rho * rho);
                    let e = evaluate_j_bar(&m, &v).unwrap();
                    assert!(
                        e.total >= rho * rho / 8.0,
                        "{}: Jbar {} < rho^2/8 at rho={rho}",
                        m.name(),
                        e.total
                    );
                }
            }
        }
    }

    #[test]
    fn fitted_constant_bounds_u_squared_norm() {
        let g = grid(12);
        let m = builtin_model("power").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let train: Vec<f64> = (0..20)
            .map(|_| h1_ratio_u_squared(&m, &random_field(&g, 0.8, &mut rng)).unwrap())
            .collect();
        let c = 1.25 * train.iter().fold(0.0_f64, |a, &b| a.max(b));
        for _ in 0..20 {
            let ratio = h1_ratio_u_squared(&m, &random_field(&g, 0.8, &mut rng)).unwrap();
            assert!(ratio <= c, "held-out ratio {ratio} exceeds fitted {c}");
        }
    }
}
