use std::sync::Arc;
use qls::grid::{Grid, Grid2D};
use qls::model::builtin_model;
use qls::solver::{mountain_pass_solve, SolverOptions};
use qls::energy::h1l_norm;

fn main() {
    let grid: Arc<Grid> = Arc::new(Grid::Square(Grid2D::new(6.0, 48)));
    let model = builtin_model("power").unwrap();
    let opts = SolverOptions { path_nodes: 15, tol: 1e-6, max_sweeps: 20000, seed: 1, rho_scan: vec![1e-3, 1e-2] };
    match mountain_pass_solve(&model, &grid, &opts) {
        Ok(r) => {
            println!("energy = {:.6e}", r.energy);
            println!("residual_max = {:.3e}", r.residual_max);
            println!("iterations = {}", r.iterations);
            println!("max_abs = {:.6e}", r.solution.max_abs());
            println!("min = {:.3e}", r.solution.min());
            println!("h1l = {:.6e}", h1l_norm(&model, &r.solution).unwrap());
            println!("cp = {:.3}", model.cp());
            for (k, c) in &r.bound_checks { println!("{k}: pass={} margin={:.3e}", c.pass, c.margin); }
            let h = &r.history;
            for (i, e, res) in h.iter().step_by((h.len()/20).max(1)) { println!("  it {i}: E={e:.4e} r={res:.3e}"); }
        }
        Err(e) => println!("error: {e}"),
    }
}
