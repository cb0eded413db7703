//! Batch front-end: one subcommand per process, outputs persisted under
//! the run directory, exit status reporting the outcome.
//!
//! Exit codes: 0 ok, 1 non-convergence, 2 checks failed, 3 I/O error,
//! 4 validation error (bad configuration or missing prerequisite output).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::config::RunConfig;
use crate::energy::{evaluate_j_bar, gradient_j_bar, h1l_norm, transformed_values};
use crate::grid::{Field, Grid, Grid2D, RadialGrid};
use crate::model::{
    check_hypotheses, cp_threshold, default_samples, CheckStatus, ModelBuilder, ModelProblem,
    SP_REFERENCE,
};
use crate::oracle::{compare_profiles, find_ground_state_shooting};
use crate::report::{format_float, read_csv, write_csv, Json};
use crate::solver::{
    mountain_pass_solve, verify_solution, BoundCheck, SolveError, SolveReport, SolverOptions,
};
use crate::sp::{compute_sp, gaussian_sweep_bound};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NONCONVERGENCE: i32 = 1;
pub const EXIT_CHECKS_FAILED: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;

const PROFILE_MATCH_TOL: f64 = 0.02;
const ENERGY_MATCH_TOL: f64 = 0.05;

fn write_file(path: &Path, content: &str) -> Result<(), i32> {
    if let Some(parent) = path.parent() {
        if let Err(e) = fs::create_dir_all(parent) {
            eprintln!("cannot create {}: {e}", parent.display());
            return Err(EXIT_IO);
        }
    }
    fs::write(path, content).map_err(|e| {
        eprintln!("cannot write {}: {e}", path.display());
        EXIT_IO
    })
}

/// Resolves `C_p`: explicit config value, else derived from the best
/// available `S_p` (a prior `sp.json` in the run directory, else the
/// built-in reference), at 1.5x the admissibility threshold.
fn resolve_cp(cfg: &RunConfig) -> f64 {
    if let Some(cp) = cfg.cp {
        return cp;
    }
    let sp = read_sp_value(&cfg.output_dir).unwrap_or(SP_REFERENCE);
    match cp_threshold(cfg.theta, cfg.p, sp) {
        Ok(threshold) => 1.5 * threshold,
        // Out-of-range constants (audit mutants): fall back to the
        // reference instance so the model can still be built and audited.
        Err(_) => 1.5 * cp_threshold(6.0, 6.0, SP_REFERENCE).expect("reference in range"),
    }
}

fn read_sp_value(out_dir: &Path) -> Option<f64> {
    let text = fs::read_to_string(out_dir.join("sp.json")).ok()?;
    let value: serde_json::Value = serde_json::from_str(&text).ok()?;
    value.get("sp")?.as_f64()
}

fn build_model(cfg: &RunConfig, cp: f64) -> Result<ModelProblem, i32> {
    ModelBuilder::new(&cfg.model_name)
        .map(|b| {
            b.theta(cfg.theta)
                .p(cfg.p)
                .cp(cp)
                .v_amplitude(cfg.v_amplitude)
                .build()
        })
        .map_err(|e| {
            eprintln!("{e}");
            EXIT_VALIDATION
        })
}

fn checks_json(checks: &BTreeMap<String, BoundCheck>) -> Json {
    let mut obj = Json::obj();
    for (name, check) in checks {
        let mut c = Json::obj();
        c.push("pass", Json::Bool(check.pass));
        c.push("margin", Json::Num(check.margin));
        obj.push(name, c);
    }
    obj
}

fn solver_options(cfg: &RunConfig) -> SolverOptions {
    SolverOptions {
        path_nodes: cfg.solver_path_nodes,
        tol: cfg.solver_tol,
        max_sweeps: cfg.solver_max_sweeps,
        seed: cfg.seed,
        rho_scan: cfg.rho_scan.clone(),
    }
}

fn solve_report_json(
    cfg: &RunConfig,
    model: &ModelProblem,
    cp: f64,
    report: &SolveReport,
    converged: bool,
) -> Result<(String, bool), i32> {
    let breakdown = evaluate_j_bar(model, &report.solution).map_err(|e| {
        eprintln!("energy re-evaluation failed: {e}");
        EXIT_NONCONVERGENCE
    })?;
    let norm = h1l_norm(model, &report.solution).map_err(|e| {
        eprintln!("norm evaluation failed: {e}");
        EXIT_NONCONVERGENCE
    })?;

    let mut merged = report.bound_checks.clone();
    if converged {
        for (k, v) in verify_solution(model, report, &cfg.rho_scan) {
            merged.insert(k, v);
        }
    }
    let all_pass = converged && merged.values().all(|c| c.pass);

    let mut root = Json::obj();
    root.push("command", Json::Str("solve".into()));
    let mut m = Json::obj();
    m.push("name", Json::Str(model.name().into()));
    m.push("theta", Json::Num(model.theta()));
    m.push("p", Json::Num(model.p()));
    m.push("cp", Json::Num(cp));
    m.push("v0", Json::Num(model.v0()));
    m.push("v1", Json::Num(model.v1()));
    root.push("model", m);
    let mut g = Json::obj();
    g.push("half_width", Json::Num(cfg.grid_half_width));
    g.push("n", Json::Int(cfg.grid_n as i64));
    root.push("grid", g);
    let mut s = Json::obj();
    s.push("path_nodes", Json::Int(cfg.solver_path_nodes as i64));
    s.push("tol", Json::Num(cfg.solver_tol));
    s.push("max_sweeps", Json::Int(cfg.solver_max_sweeps as i64));
    s.push("seed", Json::Int(cfg.seed as i64));
    root.push("solver", s);
    root.push("converged", Json::Bool(converged));
    root.push("energy", Json::Num(report.energy));
    let mut b = Json::obj();
    b.push("kinetic", Json::Num(breakdown.kinetic));
    b.push("potential", Json::Num(breakdown.potential));
    b.push("nonlinear", Json::Num(breakdown.nonlinear));
    b.push("total", Json::Num(breakdown.total));
    root.push("energy_breakdown", b);
    root.push("residual_max", Json::Num(report.residual_max));
    root.push("residual_l2", Json::Num(report.residual_l2));
    root.push("iterations", Json::Int(report.iterations as i64));
    root.push("h1l_norm", Json::Num(norm));
    root.push("min_v", Json::Num(report.solution.min()));
    root.push("checks", checks_json(&merged));
    root.push("all_checks_pass", Json::Bool(all_pass));
    Ok((root.to_text(), all_pass))
}

fn write_solution_csv(
    model: &ModelProblem,
    field: &Field,
    path: &Path,
) -> Result<(), i32> {
    let u = transformed_values(model, field).map_err(|e| {
        eprintln!("transform of solution failed: {e}");
        EXIT_NONCONVERGENCE
    })?;
    let grid = field.grid().as_ref();
    let rows = (0..field.len()).map(|i| {
        let x = grid.position(i);
        vec![
            format_float(x[0]),
            format_float(x[1]),
            format_float(field.values()[i]),
            format_float(u[i]),
        ]
    });
    write_file(path, &write_csv(&["x1", "x2", "v", "u"], rows))
}

pub fn cmd_solve(cfg: &RunConfig) -> i32 {
    let cp = resolve_cp(cfg);
    let model = match build_model(cfg, cp) {
        Ok(m) => m,
        Err(code) => return code,
    };
    let grid: Arc<Grid> = Arc::new(Grid::Square(Grid2D::new(cfg.grid_half_width, cfg.grid_n)));

    // Structural precondition: the instance must satisfy H1-H5.
    let (s_samples, x_samples) = default_samples(120, model.max_safe_s().min(2.6), 16, cfg.seed);
    let audit = check_hypotheses(&model, &s_samples, &x_samples, None);
    if !audit.all_h1_h5_pass() {
        let failing: Vec<&str> = audit
            .checks()
            .iter()
            .filter(|(_, c)| c.status == CheckStatus::Fail)
            .map(|(n, _)| *n)
            .collect();
        eprintln!("model fails structural hypotheses {failing:?}; refusing to solve");
        return EXIT_VALIDATION;
    }

    if let Err(code) = write_file(&cfg.output_dir.join("manifest.txt"), &cfg.manifest(cp)) {
        return code;
    }

    let opts = solver_options(cfg);
    let (report, converged, exit_on_done) = match mountain_pass_solve(&model, &grid, &opts) {
        Ok(report) => (report, true, EXIT_OK),
        Err(SolveError::NonConvergence { report, .. }) => (*report, false, EXIT_NONCONVERGENCE),
        Err(e) => {
            eprintln!("solve failed: {e}");
            return EXIT_NONCONVERGENCE;
        }
    };

    let (json, all_pass) = match solve_report_json(cfg, &model, cp, &report, converged) {
        Ok(r) => r,
        Err(code) => return code,
    };
    if let Err(code) = write_file(&cfg.output_dir.join("report.json"), &json) {
        return code;
    }
    if let Err(code) =
        write_solution_csv(&model, &report.solution, &cfg.output_dir.join("solution.csv"))
    {
        return code;
    }
    let history = write_csv(
        &["iteration", "energy", "residual"],
        report.history.iter().map(|&(i, e, r)| {
            vec![i.to_string(), format_float(e), format_float(r)]
        }),
    );
    if let Err(code) = write_file(&cfg.output_dir.join("history.csv"), &history) {
        return code;
    }

    if exit_on_done != EXIT_OK {
        eprintln!(
            "solve did not converge: residual {:.3e} after {} sweeps",
            report.residual_max, report.iterations
        );
        return exit_on_done;
    }
    if all_pass {
        EXIT_OK
    } else {
        EXIT_CHECKS_FAILED
    }
}

pub fn cmd_sp(cfg: &RunConfig) -> i32 {
    let cp = resolve_cp(cfg);
    let model = match build_model(cfg, cp) {
        Ok(m) => m,
        Err(code) => return code,
    };
    let grid: Arc<Grid> = Arc::new(Grid::Radial(RadialGrid::new(cfg.sp_r_max, cfg.sp_m)));
    if let Err(code) = write_file(&cfg.output_dir.join("manifest.txt"), &cfg.manifest(cp)) {
        return code;
    }

    let sweep = gaussian_sweep_bound(&model, &grid, 20);
    let result = match compute_sp(&model, &grid, cfg.sp_restarts, cfg.seed) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("quotient minimization failed: {e}");
            return EXIT_NONCONVERGENCE;
        }
    };

    let threshold = cp_threshold(cfg.theta, cfg.p, result.value);
    let mut root = Json::obj();
    root.push("command", Json::Str("sp".into()));
    root.push("sp", Json::Num(result.value));
    root.push("restarts", Json::Int(cfg.sp_restarts as i64));
    root.push("restarts_spread", Json::Num(result.restarts_spread));
    match sweep {
        Ok((bound, sigma)) => {
            root.push("gaussian_sweep_bound", Json::Num(bound));
            root.push("gaussian_sweep_sigma", Json::Num(sigma));
        }
        Err(_) => {
            root.push("gaussian_sweep_bound", Json::Null);
            root.push("gaussian_sweep_sigma", Json::Null);
        }
    }
    match threshold {
        Ok(t) => {
            root.push("threshold", Json::Num(t));
            root.push("cp", Json::Num(cp));
            root.push("h6_margin", Json::Bool(cp > t));
        }
        Err(_) => {
            root.push("threshold", Json::Null);
            root.push("cp", Json::Num(cp));
            root.push("h6_margin", Json::Bool(false));
        }
    }
    if let Err(code) = write_file(&cfg.output_dir.join("sp.json"), &root.to_text()) {
        return code;
    }
    EXIT_OK
}

pub fn cmd_check(cfg: &RunConfig) -> i32 {
    let cp = resolve_cp(cfg);
    let model = match build_model(cfg, cp) {
        Ok(m) => m,
        Err(code) => return code,
    };
    if let Err(code) = write_file(&cfg.output_dir.join("manifest.txt"), &cfg.manifest(cp)) {
        return code;
    }

    let sp_value = read_sp_value(&cfg.output_dir);
    let (s_samples, x_samples) = default_samples(240, model.max_safe_s().min(2.7), 32, cfg.seed);
    let report = check_hypotheses(&model, &s_samples, &x_samples, sp_value);

    let mut root = Json::obj();
    root.push("command", Json::Str("check".into()));
    root.push("model", Json::Str(model.name().into()));
    for (name, check) in report.checks() {
        let mut c = Json::obj();
        c.push("status", Json::Str(check.status.as_str().into()));
        c.push("worst_violation", Json::Num(check.worst_violation));
        c.push(
            "worst_x",
            Json::Arr(vec![Json::Num(check.worst_x[0]), Json::Num(check.worst_x[1])]),
        );
        c.push("worst_s", Json::Num(check.worst_s));
        root.push(name, c);
    }
    root.push("h3_fitted_constant", Json::Num(report.h3_fitted_constant));
    root.push(
        "untestable_overflow",
        Json::Int(report.untestable_overflow as i64),
    );
    match sp_value {
        Some(sp) => root.push("sp_value", Json::Num(sp)),
        None => root.push("sp_value", Json::Null),
    };
    root.push("all_h1_h5_pass", Json::Bool(report.all_h1_h5_pass()));

    if let Err(code) = write_file(&cfg.output_dir.join("hypotheses.json"), &root.to_text()) {
        return code;
    }
    if report.all_h1_h5_pass() {
        EXIT_OK
    } else {
        EXIT_CHECKS_FAILED
    }
}

/// Reads a prior solve back from the run directory: the manifest supplies
/// the grid, `solution.csv` the field, `report.json` energy and tolerance.
fn read_prior_solve(out_dir: &Path) -> Option<(Field, f64, f64)> {
    let manifest = fs::read_to_string(out_dir.join("manifest.txt")).ok()?;
    let prior = RunConfig::parse(&manifest).ok()?;
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).ok()?).ok()?;
    let energy = report.get("energy")?.as_f64()?;
    let tol = report.get("solver")?.get("tol")?.as_f64()?;
    let (header, rows) = read_csv(&fs::read_to_string(out_dir.join("solution.csv")).ok()?)?;
    if header != ["x1", "x2", "v", "u"] {
        return None;
    }
    let grid: Arc<Grid> = Arc::new(Grid::Square(Grid2D::new(
        prior.grid_half_width,
        prior.grid_n,
    )));
    if rows.len() != grid.node_count() {
        return None;
    }
    let values = rows.iter().map(|r| r[2]).collect();
    Some((Field::from_values(grid, values), energy, tol))
}

pub fn cmd_oracle(cfg: &RunConfig) -> i32 {
    if cfg.model_name != "constant_V_power" {
        eprintln!(
            "the shooting oracle requires the radially symmetric model \
             'constant_V_power', got '{}'",
            cfg.model_name
        );
        return EXIT_VALIDATION;
    }
    let (solution_2d, energy_2d, tol) = match read_prior_solve(&cfg.output_dir) {
        Some(t) => t,
        None => {
            eprintln!(
                "no prior solve output in {} (need manifest.txt, report.json, solution.csv)",
                cfg.output_dir.display()
            );
            return EXIT_VALIDATION;
        }
    };
    let cp = resolve_cp(cfg);
    let model = match build_model(cfg, cp) {
        Ok(m) => m,
        Err(code) => return code,
    };

    let grid: Arc<Grid> = Arc::new(Grid::Radial(RadialGrid::new(cfg.oracle_r_max, cfg.oracle_m)));
    let profile = match find_ground_state_shooting(&model, &grid, cfg.oracle_step, cfg.oracle_v0_tol)
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("shooting failed: {e}");
            return EXIT_NONCONVERGENCE;
        }
    };

    let diff = match compare_profiles(&solution_2d, &profile) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("profile comparison failed: {e}");
            return EXIT_NONCONVERGENCE;
        }
    };
    let residual = match gradient_j_bar(&model, &profile) {
        Ok(g) => g.max_abs(),
        Err(e) => {
            eprintln!("criticality transfer failed: {e}");
            return EXIT_NONCONVERGENCE;
        }
    };
    let energy_radial = match evaluate_j_bar(&model, &profile) {
        Ok(e) => e.total,
        Err(e) => {
            eprintln!("radial energy failed: {e}");
            return EXIT_NONCONVERGENCE;
        }
    };
    let energy_rel = (energy_radial - energy_2d).abs() / energy_2d.abs().max(1e-300);

    let mut checks: BTreeMap<String, BoundCheck> = BTreeMap::new();
    checks.insert(
        "profile_match".into(),
        BoundCheck {
            pass: diff <= PROFILE_MATCH_TOL,
            margin: PROFILE_MATCH_TOL - diff,
        },
    );
    checks.insert(
        "criticality_transfer".into(),
        BoundCheck {
            pass: residual <= 10.0 * tol,
            margin: 10.0 * tol - residual,
        },
    );
    checks.insert(
        "energy_consistency".into(),
        BoundCheck {
            pass: energy_radial > 0.0 && energy_rel <= ENERGY_MATCH_TOL,
            margin: ENERGY_MATCH_TOL - energy_rel,
        },
    );

    let mut root = Json::obj();
    root.push("command", Json::Str("oracle".into()));
    root.push("l2_rel_diff", Json::Num(diff));
    root.push("criticality_residual_max", Json::Num(residual));
    root.push("solver_tol", Json::Num(tol));
    root.push("energy_2d", Json::Num(energy_2d));
    root.push("energy_radial", Json::Num(energy_radial));
    root.push("energy_rel_diff", Json::Num(energy_rel));
    root.push("checks", checks_json(&checks));
    let all = checks.values().all(|c| c.pass);
    root.push("all_checks_pass", Json::Bool(all));
    if let Err(code) = write_file(&cfg.output_dir.join("oracle.json"), &root.to_text()) {
        return code;
    }

    // Emitted profile: columns r, v, u = f(v).
    let kernel = *model.kernel();
    let radial = match grid.as_ref() {
        Grid::Radial(g) => g,
        Grid::Square(_) => unreachable!(),
    };
    let csv = write_csv(
        &["r", "v", "u"],
        (0..profile.len()).map(|j| {
            let v = profile.values()[j];
            let u = kernel.f_inverse(v).unwrap_or(f64::NAN);
            vec![
                format_float(radial.radius(j)),
                format_float(v),
                format_float(u),
            ]
        }),
    );
    if let Err(code) = write_file(&cfg.output_dir.join("shooting_profile.csv"), &csv) {
        return code;
    }

    if all {
        EXIT_OK
    } else {
        EXIT_CHECKS_FAILED
    }
}

/// `sp -> check -> solve -> oracle`, stopping at the first failure. The
/// oracle stage only applies to the constant-potential model; for the
/// periodic models the pipeline ends after the solve.
pub fn cmd_verify_all(cfg: &RunConfig) -> i32 {
    let code = cmd_sp(cfg);
    if code != EXIT_OK {
        return code;
    }
    let code = cmd_check(cfg);
    if code != EXIT_OK {
        return code;
    }
    let code = cmd_solve(cfg);
    if code != EXIT_OK {
        return code;
    }
    if cfg.model_name == "constant_V_power" {
        let code = cmd_oracle(cfg);
        if code != EXIT_OK {
            return code;
        }
    }
    EXIT_OK
}
