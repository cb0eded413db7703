//! Truncated computational domains and discrete operators.
//!
//! Two geometries are supported:
//!
//! * [`Grid2D`] — the square `[-R,R]^2` with homogeneous Dirichlet data on
//!   the boundary, `n` interior nodes per axis, 5-point Laplacian.
//! * [`RadialGrid`] — cell-centered nodes `r_j = (j+1/2)*dr` on `(0, r_max)`
//!   with a zero-flux face at the axis (the symmetric extension `v(-r)=v(r)`
//!   makes `r v'` vanish at `r=0`) and zero Dirichlet data at `r = r_max`.
//!
//! Both Laplacians are conservative, so summation by parts
//! `<-Δv, w> = <∇v, ∇w>` holds exactly with the quadrature weights used by
//! [`integrate`]. Reductions run in index order; runs are bit-reproducible.

use std::sync::Arc;

/// Square domain `[-R,R]^2`; values live on the `n x n` interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    half_width: f64,
    n: usize,
}

impl Grid2D {
    /// Panics if `half_width <= 0` or `n < 3`.
    pub fn new(half_width: f64, n: usize) -> Self {
        assert!(half_width > 0.0, "half_width must be positive");
        assert!(n >= 3, "need at least 3 interior nodes per axis");
        Self { half_width, n }
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.n as f64 + 1.0)
    }

    pub fn node_count(&self) -> usize {
        self.n * self.n
    }

    /// Position of interior node `idx = j*n + i`.
    pub fn position(&self, idx: usize) -> [f64; 2] {
        let h = self.spacing();
        let i = idx % self.n;
        let j = idx / self.n;
        [
            -self.half_width + (i as f64 + 1.0) * h,
            -self.half_width + (j as f64 + 1.0) * h,
        ]
    }
}

/// Radial line for radially symmetric fields; node `j` sits at
/// `(j + 1/2) * spacing`, `j = 0..m`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    r_max: f64,
    m: usize,
}

impl RadialGrid {
    /// Panics if `r_max <= 0` or `m < 3`.
    pub fn new(r_max: f64, m: usize) -> Self {
        assert!(r_max > 0.0, "r_max must be positive");
        assert!(m >= 3, "need at least 3 radial nodes");
        Self { r_max, m }
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn spacing(&self) -> f64 {
        self.r_max / self.m as f64
    }

    pub fn radius(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.spacing()
    }

    /// Quadrature weight of node `j`: the exact annulus area
    /// `pi*((j+1)dr)^2 - pi*(j dr)^2 = 2 pi r_j dr`.
    pub fn weight(&self, j: usize) -> f64 {
        let dr = self.spacing();
        2.0 * std::f64::consts::PI * self.radius(j) * dr
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    Square(Grid2D),
    Radial(RadialGrid),
}

impl Grid {
    pub fn node_count(&self) -> usize {
        match self {
            Grid::Square(g) => g.node_count(),
            Grid::Radial(g) => g.m(),
        }
    }

    /// Node position; radial nodes are placed on the positive x1-axis.
    pub fn position(&self, idx: usize) -> [f64; 2] {
        match self {
            Grid::Square(g) => g.position(idx),
            Grid::Radial(g) => [g.radius(idx), 0.0],
        }
    }

    /// Quadrature weight of node `idx`.
    pub fn weight(&self, idx: usize) -> f64 {
        match self {
            Grid::Square(g) => {
                let h = g.spacing();
                h * h
            }
            Grid::Radial(g) => g.weight(idx),
        }
    }
}

/// Nodal values on a grid. Cheap to clone structurally (the grid is shared).
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.node_count();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    /// Panics if `values.len()` does not match the grid.
    pub fn from_values(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        assert_eq!(
            values.len(),
            grid.node_count(),
            "value count must match grid"
        );
        Self { grid, values }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.node_count()).map(|i| f(grid.position(i))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    pub fn add_scaled(&self, other: &Field, c: f64) -> Field {
        debug_assert_eq!(self.len(), other.len());
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a + c * b)
            .collect();
        Field {
            grid: Arc::clone(&self.grid),
            values,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, &v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }
}

/// Neumaier compensated accumulator; quadrature sums feed finite-difference
/// tests of the energy, so plain summation rounding (~n*eps*|J|) is too
/// coarse.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Discrete `-Δ` with zero Dirichlet halo (5-point stencil on [`Grid2D`],
/// conservative `-(r v')'/r` on [`RadialGrid`]).
pub fn laplacian_apply(field: &Field) -> Field {
    let mut out = Field::zeros(Arc::clone(field.grid()));
    laplacian_apply_into(field, &mut out);
    out
}

/// In-place variant for hot loops.
pub fn laplacian_apply_into(field: &Field, out: &mut Field) {
    let v = field.values();
    let o = out.values_mut();
    match field.grid().as_ref() {
        Grid::Square(g) => {
            let n = g.n();
            let inv_h2 = 1.0 / (g.spacing() * g.spacing());
            for j in 0..n {
                for i in 0..n {
                    let idx = j * n + i;
                    let c = v[idx];
                    let w = if i > 0 { v[idx - 1] } else { 0.0 };
                    let e = if i + 1 < n { v[idx + 1] } else { 0.0 };
                    let s = if j > 0 { v[idx - n] } else { 0.0 };
                    let nn = if j + 1 < n { v[idx + n] } else { 0.0 };
                    o[idx] = (4.0 * c - w - e - s - nn) * inv_h2;
                }
            }
        }
        Grid::Radial(g) => {
            let m = g.m();
            let dr = g.spacing();
            for j in 0..m {
                let r = g.radius(j);
                // Face radii j*dr and (j+1)*dr; the axis face carries zero flux.
                let r_lo = j as f64 * dr;
                let r_hi = (j + 1) as f64 * dr;
                let flux_lo = if j == 0 {
                    0.0
                } else {
                    r_lo * (v[j] - v[j - 1]) / dr
                };
                let flux_hi = if j + 1 < m {
                    r_hi * (v[j + 1] - v[j]) / dr
                } else {
                    // Dirichlet face at r_max, half a cell away.
                    r_hi * (0.0 - v[j]) / (0.5 * dr)
                };
                o[j] = -(flux_hi - flux_lo) / (r * dr);
            }
        }
    }
}

/// Quadrature of a field over its domain.
pub fn integrate(field: &Field) -> f64 {
    let grid = field.grid().as_ref();
    let mut acc = KahanSum::default();
    for (i, &v) in field.values().iter().enumerate() {
        acc.add(grid.weight(i) * v);
    }
    acc.total()
}

/// Weighted inner product `∫ a b`.
pub fn inner(a: &Field, b: &Field) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let grid = a.grid().as_ref();
    let mut acc = KahanSum::default();
    for (i, (&x, &y)) in a.values().iter().zip(b.values()).enumerate() {
        acc.add(grid.weight(i) * x * y);
    }
    acc.total()
}

/// `∫ |∇v|^2` as an edge sum, including the edges to the zero boundary.
/// Equals `inner(&laplacian_apply(v), v)` exactly.
pub fn dirichlet_energy(field: &Field) -> f64 {
    gradient_pairing(field, field)
}

/// Bilinear form `∫ ∇v · ∇w` matching [`dirichlet_energy`].
pub fn gradient_pairing(a: &Field, b: &Field) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let va = a.values();
    let vb = b.values();
    match a.grid().as_ref() {
        Grid::Square(g) => {
            let n = g.n();
            let mut acc = 0.0;
            // Horizontal edges, then vertical; each edge carries measure h^2
            // against the squared difference / h^2, i.e. plain differences.
            for j in 0..n {
                for i in 0..=n {
                    let left_a = if i > 0 { va[j * n + i - 1] } else { 0.0 };
                    let right_a = if i < n { va[j * n + i] } else { 0.0 };
                    let left_b = if i > 0 { vb[j * n + i - 1] } else { 0.0 };
                    let right_b = if i < n { vb[j * n + i] } else { 0.0 };
                    acc += (right_a - left_a) * (right_b - left_b);
                }
            }
            for i in 0..n {
                for j in 0..=n {
                    let lo_a = if j > 0 { va[(j - 1) * n + i] } else { 0.0 };
                    let hi_a = if j < n { va[j * n + i] } else { 0.0 };
                    let lo_b = if j > 0 { vb[(j - 1) * n + i] } else { 0.0 };
                    let hi_b = if j < n { vb[j * n + i] } else { 0.0 };
                    acc += (hi_a - lo_a) * (hi_b - lo_b);
                }
            }
            acc
        }
        Grid::Radial(g) => {
            let m = g.m();
            let dr = g.spacing();
            let two_pi = 2.0 * std::f64::consts::PI;
            let mut acc = 0.0;
            for j in 1..m {
                // Interior face at radius j*dr between nodes j-1 and j.
                let r_face = j as f64 * dr;
                let da = (va[j] - va[j - 1]) / dr;
                let db = (vb[j] - vb[j - 1]) / dr;
                acc += two_pi * r_face * dr * da * db;
            }
            // Dirichlet face at r_max: half-width edge to the zero boundary.
            let da = (0.0 - va[m - 1]) / (0.5 * dr);
            let db = (0.0 - vb[m - 1]) / (0.5 * dr);
            acc += two_pi * g.r_max() * (0.5 * dr) * da * db;
            acc
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn square(n: usize) -> Arc<Grid> {
        Arc::new(Grid::Square(Grid2D::new(6.0, n)))
    }

    fn radial(m: usize) -> Arc<Grid> {
        Arc::new(Grid::Radial(RadialGrid::new(8.0, m)))
    }

    fn random_field(grid: &Arc<Grid>, rng: &mut ChaCha8Rng) -> Field {
        let values = (0..grid.node_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Field::from_values(Arc::clone(grid), values)
    }

    #[test]
    fn laplacian_of_zero_is_zero() {
        let g = square(16);
        let z = Field::zeros(Arc::clone(&g));
        assert_eq!(laplacian_apply(&z).values(), z.values());
    }

    #[test]
    fn laplacian_exact_on_quadratic_interior() {
        let g = square(32);
        let f = Field::from_fn(Arc::clone(&g), |x| x[0] * x[0]);
        let lap = laplacian_apply(&f);
        // Away from the boundary the 5-point stencil is exact on x1^2.
        let n = 32;
        for j in 5..n - 5 {
            for i in 5..n - 5 {
                let val = lap.values()[j * n + i];
                assert!((val + 2.0).abs() < 1e-10, "got {val} at ({i},{j})");
            }
        }
    }

    #[test]
    fn radial_laplacian_exact_on_r_squared() {
        let g = radial(64);
        let f = Field::from_fn(Arc::clone(&g), |x| x[0] * x[0]);
        let lap = laplacian_apply(&f);
        // Conservative stencil reproduces Δ(r^2) = 4 exactly away from the
        // Dirichlet face (the last node sees the truncation).
        for j in 0..60 {
            assert!(
                (lap.values()[j] + 4.0).abs() < 1e-9,
                "node {j}: {}",
                lap.values()[j]
            );
        }
    }

    #[test]
    fn integrate_constant_matches_area() {
        let g = square(64);
        let one = Field::from_fn(Arc::clone(&g), |_| 1.0);
        let area = integrate(&one);
        // Interior sum misses an O(spacing) boundary strip of the 12x12 box.
        assert!((area - 144.0).abs() < 144.0 * 2.0 * (12.0 / 65.0) / 12.0 + 1.0);

        let rg = radial(200);
        let one_r = Field::from_fn(Arc::clone(&rg), |_| 1.0);
        let disk = integrate(&one_r);
        let exact = std::f64::consts::PI * 64.0;
        assert!((disk - exact).abs() < 1e-9, "disk area {disk} vs {exact}");
    }

    #[test]
    fn integrate_gaussian_matches_pi() {
        let g = Arc::new(Grid::Square(Grid2D::new(8.0, 128)));
        let f = Field::from_fn(Arc::clone(&g), |x| (-(x[0] * x[0] + x[1] * x[1])).exp());
        let got = integrate(&f);
        assert!(
            (got - std::f64::consts::PI).abs() < 1e-4,
            "∫ exp(-|x|^2) = {got}"
        );
    }

    #[test]
    fn dirichlet_energy_of_bump_matches_analytic() {
        // v = cos^2(pi r / 4) for r < 2, compactly supported inside the box.
        // ∫|∇v|^2 = ∫ (pi/2 cos sin)^2 … evaluate by fine radial quadrature.
        let g = Arc::new(Grid::Square(Grid2D::new(6.0, 256)));
        let bump = |x: [f64; 2]| {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            if r < 2.0 {
                let c = (std::f64::consts::PI * r / 4.0).cos();
                c * c
            } else {
                0.0
            }
        };
        let f = Field::from_fn(Arc::clone(&g), bump);
        let got = dirichlet_energy(&f);
        // Reference: |v'(r)| = (pi/4) sin(pi r/2); ∫0^2 v'^2 2 pi r dr.
        let mut exact = 0.0;
        let steps = 200_000;
        for k in 0..steps {
            let r = (k as f64 + 0.5) * 2.0 / steps as f64;
            let d = (std::f64::consts::PI / 4.0) * (std::f64::consts::PI * r / 2.0).sin();
            exact += d * d * 2.0 * std::f64::consts::PI * r * (2.0 / steps as f64);
        }
        let rel = ((got - exact) / exact).abs();
        assert!(rel < 0.01, "dirichlet {got} vs {exact}, rel {rel}");
    }

    #[test]
    fn summation_by_parts_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for grid in [square(24), radial(40)] {
            for _ in 0..10 {
                let v = random_field(&grid, &mut rng);
                let w = random_field(&grid, &mut rng);
                let lhs = inner(&laplacian_apply(&v), &w);
                let rhs = gradient_pairing(&v, &w);
                let scale = lhs.abs().max(rhs.abs()).max(1e-30);
                assert!(
                    ((lhs - rhs) / scale).abs() < 1e-10,
                    "SBP mismatch {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn laplacian_is_symmetric_and_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for grid in [square(20), radial(32)] {
            for _ in 0..10 {
                let v = random_field(&grid, &mut rng);
                let w = random_field(&grid, &mut rng);
                let vw = inner(&laplacian_apply(&v), &w);
                let wv = inner(&v, &laplacian_apply(&w));
                let scale = vw.abs().max(wv.abs()).max(1e-30);
                assert!(((vw - wv) / scale).abs() < 1e-12, "symmetry {vw} vs {wv}");
                assert!(inner(&laplacian_apply(&v), &v) >= 0.0);
            }
        }
    }

    #[test]
    fn dirichlet_energy_consistency_with_quadratic_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for grid in [square(24), radial(48)] {
            let v = random_field(&grid, &mut rng);
            let a = dirichlet_energy(&v);
            let b = inner(&laplacian_apply(&v), &v);
            assert!(((a - b) / a.abs().max(1e-30)).abs() < 1e-10);
        }
    }

    #[test]
    fn dirichlet_energy_second_order_refinement() {
        // Smooth compactly supported test field; the discrete energy should
        // converge at second order as n doubles.
        let bump = |x: [f64; 2]| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            if r2 < 4.0 {
                (4.0 - r2) * (4.0 - r2) * (4.0 - r2)
            } else {
                0.0
            }
        };
        let energy_at = |n: usize| {
            let g = Arc::new(Grid::Square(Grid2D::new(6.0, n)));
            dirichlet_energy(&Field::from_fn(g, bump))
        };
        let (e1, e2, e3) = (energy_at(32), energy_at(64), energy_at(128));
        let err1 = (e1 - e3).abs();
        let err2 = (e2 - e3).abs();
        // Richardson: with O(h^2) errors, err1/err2 ≈ (4^k−1)/(4^{k−1}−…);
        // a loose 3.0 lower bound distinguishes order 2 from order 1.
        assert!(
            err1 / err2 > 3.0,
            "refinement ratio {} suggests sub-second-order",
            err1 / err2
        );
    }

    #[test]
    fn grid_validation_panics() {
        assert!(std::panic::catch_unwind(|| Grid2D::new(-1.0, 16)).is_err());
        assert!(std::panic::catch_unwind(|| Grid2D::new(6.0, 2)).is_err());
        assert!(std::panic::catch_unwind(|| RadialGrid::new(8.0, 2)).is_err());
    }
}
