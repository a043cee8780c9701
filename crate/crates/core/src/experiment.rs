//! Declarative experiment configs and the end-to-end runner.
//!
//! A config names one of the built-in examples, the refinement levels
//! (h = 2^−k), coefficients, solver and audit options, and an output
//! directory. `run_experiment` builds the mesh per level, audits it,
//! assembles, solves and post-processes, emitting a convergence CSV, a
//! per-level regularity CSV, VTK fields and a JSON summary. Failures are
//! recorded per level and the run continues with the remaining levels.
//!
//! # Config file grammar
//!
//! Flat `key = value` lines grouped by `[section]` headers; `#` starts a
//! comment. Unknown keys are rejected. Sections and keys:
//!
//! ```text
//! [experiment]  example (circle|line_singular|double_circle|layers),
//!               levels (comma list), ref_level (optional), out (path)
//! [coefficients] alpha_minus alpha_plus eps_minus eps_plus sigma_minus
//!                sigma_plus omega s_exponent eps_geom n_layers
//! [solver]      stab (local-hk|global-h), quad_order
//! [audit]       theta kappa0 kappa1 c1 c2
//! [output]      fem (bool), audit_only (bool), fields (bool)
//! ```

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use thiserror::Error;

use crate::fem::{nd0_solve, relative_field_difference, tri_projection, triangulate_mesh};
use crate::io::{
    write_convergence_csv, write_field_vtk, write_regularity_csv, write_summary_json, JsonValue,
};
use crate::mesh::{build_cut_mesh, dof_map, MeshError, PolyMesh};
use crate::postproc::{
    cell_fields, cross_compare, l2_projected_error, order_table, rot_error, ConvergenceTable,
    ErrorQuad, PostprocError,
};
use crate::problems::{build_problem, ExampleId, Problem, ProblemParams};
use crate::regularity::{audit_mesh, RegularityParams};
use crate::system::{assemble, set_tangential_bc, solve, SolveError, SourceQuad};
use crate::vem::{DofVector, InterpSpec, StabScale};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Postproc(#[from] PostprocError),
}

/// Stabilization weight choice; the global variant uses the level's h.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StabChoice {
    LocalHk,
    GlobalH,
}

impl StabChoice {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "local-hk" => Some(StabChoice::LocalHk),
            "global-h" => Some(StabChoice::GlobalH),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            StabChoice::LocalHk => "local-hk",
            StabChoice::GlobalH => "global-h",
        }
    }

    pub fn scale(&self, h: f64) -> StabScale {
        match self {
            StabChoice::LocalHk => StabScale::LocalDiameter,
            StabChoice::GlobalH => StabScale::GlobalH(h),
        }
    }
}

/// Everything needed to reproduce one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub example: ExampleId,
    pub levels: Vec<u32>,
    /// Reference level of the self-convergence mode; must exceed all levels.
    pub ref_level: Option<u32>,
    pub out_dir: PathBuf,
    pub params: ProblemParams,
    pub stab: StabChoice,
    pub quad_order: usize,
    pub audit: RegularityParams,
    pub run_fem: bool,
    pub audit_only: bool,
    pub write_fields: bool,
}

impl ExperimentConfig {
    pub fn new(example: ExampleId, levels: Vec<u32>, out_dir: PathBuf) -> Self {
        Self {
            example,
            levels,
            ref_level: None,
            out_dir,
            params: ProblemParams::defaults(example),
            stab: StabChoice::LocalHk,
            quad_order: 7,
            audit: RegularityParams::default(),
            run_fem: false,
            audit_only: false,
            write_fields: false,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.levels.is_empty() {
            return Err(ExperimentError::Config("no levels given".into()));
        }
        if self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ExperimentError::Config(
                "levels must be strictly ascending".into(),
            ));
        }
        if let Some(r) = self.ref_level {
            if r <= *self.levels.last().unwrap() {
                return Err(ExperimentError::Config(
                    "ref_level must exceed every compared level".into(),
                ));
            }
        }
        let p = &self.params;
        if p.alpha.iter().any(|&a| a <= 0.0) {
            return Err(ExperimentError::Config("alpha must be positive".into()));
        }
        if p.eps_perm.iter().any(|&e| e <= 0.0) {
            return Err(ExperimentError::Config("eps must be positive".into()));
        }
        if p.sigma.iter().any(|&s| s < 0.0) {
            return Err(ExperimentError::Config("sigma must be nonnegative".into()));
        }
        if p.omega <= 0.0 {
            return Err(ExperimentError::Config("omega must be positive".into()));
        }
        if !(p.s_exponent > -0.5 && p.s_exponent < 1.0) {
            return Err(ExperimentError::Config(
                "s_exponent must lie in (-0.5, 1) for a square-integrable solution".into(),
            ));
        }
        if p.n_layers != 2 && p.n_layers != 5 {
            return Err(ExperimentError::Config("n_layers must be 2 or 5".into()));
        }
        if self.quad_order == 0 {
            return Err(ExperimentError::Config("quad_order must be at least 1".into()));
        }
        self.audit
            .validate()
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        Ok(())
    }

    /// Serializes to the config file format; `parse` inverts this exactly.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let levels = self
            .levels
            .iter()
            .map(|l| l.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let _ = writeln!(s, "[experiment]");
        let _ = writeln!(s, "example = {}", self.example.name());
        let _ = writeln!(s, "levels = {levels}");
        if let Some(r) = self.ref_level {
            let _ = writeln!(s, "ref_level = {r}");
        }
        let _ = writeln!(s, "out = {}", self.out_dir.display());
        let _ = writeln!(s, "\n[coefficients]");
        let _ = writeln!(s, "alpha_minus = {}", self.params.alpha[0]);
        let _ = writeln!(s, "alpha_plus = {}", self.params.alpha[1]);
        let _ = writeln!(s, "eps_minus = {}", self.params.eps_perm[0]);
        let _ = writeln!(s, "eps_plus = {}", self.params.eps_perm[1]);
        let _ = writeln!(s, "sigma_minus = {}", self.params.sigma[0]);
        let _ = writeln!(s, "sigma_plus = {}", self.params.sigma[1]);
        let _ = writeln!(s, "omega = {}", self.params.omega);
        let _ = writeln!(s, "s_exponent = {}", self.params.s_exponent);
        let _ = writeln!(s, "eps_geom = {}", self.params.eps_geom);
        let _ = writeln!(s, "n_layers = {}", self.params.n_layers);
        let _ = writeln!(s, "\n[solver]");
        let _ = writeln!(s, "stab = {}", self.stab.name());
        let _ = writeln!(s, "quad_order = {}", self.quad_order);
        let _ = writeln!(s, "\n[audit]");
        let _ = writeln!(s, "theta = {}", self.audit.theta);
        let _ = writeln!(s, "kappa0 = {}", self.audit.kappa0);
        let _ = writeln!(s, "kappa1 = {}", self.audit.kappa1);
        let _ = writeln!(s, "c1 = {}", self.audit.c1);
        let _ = writeln!(s, "c2 = {}", self.audit.c2);
        let _ = writeln!(s, "\n[output]");
        let _ = writeln!(s, "fem = {}", self.run_fem);
        let _ = writeln!(s, "audit_only = {}", self.audit_only);
        let _ = writeln!(s, "fields = {}", self.write_fields);
        s
    }

    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        let mut example = None;
        let mut section = String::new();
        // first pass only to find the example id so defaults exist
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if let Some(rest) = line.strip_prefix("example") {
                if let Some(v) = rest.split('=').nth(1) {
                    example = ExampleId::parse(v.trim());
                }
            }
        }
        let example =
            example.ok_or_else(|| ExperimentError::Config("missing or bad example".into()))?;
        let mut c = ExperimentConfig::new(example, vec![], PathBuf::from("out"));
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = line[1..line.len() - 1].trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ExperimentError::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim();
            let value = value.trim();
            let bad_key =
                || ExperimentError::Config(format!("line {}: unknown key '{key}' in [{section}]", lineno + 1));
            let bad_value = |what: &str| {
                ExperimentError::Config(format!("line {}: bad {what} value '{value}'", lineno + 1))
            };
            let parse_f64 =
                |value: &str| value.parse::<f64>().map_err(|_| bad_value("number"));
            let parse_bool =
                |value: &str| value.parse::<bool>().map_err(|_| bad_value("boolean"));
            match (section.as_str(), key) {
                ("experiment", "example") => {}
                ("experiment", "levels") => {
                    c.levels = value
                        .split(',')
                        .map(|t| t.trim().parse::<u32>())
                        .collect::<Result<_, _>>()
                        .map_err(|_| bad_value("levels"))?;
                }
                ("experiment", "ref_level") => {
                    c.ref_level = Some(value.parse().map_err(|_| bad_value("ref_level"))?);
                }
                ("experiment", "out") => c.out_dir = PathBuf::from(value),
                ("coefficients", "alpha_minus") => c.params.alpha[0] = parse_f64(value)?,
                ("coefficients", "alpha_plus") => c.params.alpha[1] = parse_f64(value)?,
                ("coefficients", "eps_minus") => c.params.eps_perm[0] = parse_f64(value)?,
                ("coefficients", "eps_plus") => c.params.eps_perm[1] = parse_f64(value)?,
                ("coefficients", "sigma_minus") => c.params.sigma[0] = parse_f64(value)?,
                ("coefficients", "sigma_plus") => c.params.sigma[1] = parse_f64(value)?,
                ("coefficients", "omega") => c.params.omega = parse_f64(value)?,
                ("coefficients", "s_exponent") => c.params.s_exponent = parse_f64(value)?,
                ("coefficients", "eps_geom") => c.params.eps_geom = parse_f64(value)?,
                ("coefficients", "n_layers") => {
                    c.params.n_layers = value.parse().map_err(|_| bad_value("n_layers"))?;
                }
                ("solver", "stab") => {
                    c.stab = StabChoice::parse(value).ok_or_else(|| bad_value("stab"))?;
                }
                ("solver", "quad_order") => {
                    c.quad_order = value.parse().map_err(|_| bad_value("quad_order"))?;
                }
                ("audit", "theta") => c.audit.theta = parse_f64(value)?,
                ("audit", "kappa0") => c.audit.kappa0 = parse_f64(value)?,
                ("audit", "kappa1") => c.audit.kappa1 = parse_f64(value)?,
                ("audit", "c1") => c.audit.c1 = parse_f64(value)?,
                ("audit", "c2") => c.audit.c2 = parse_f64(value)?,
                ("output", "fem") => c.run_fem = parse_bool(value)?,
                ("output", "audit_only") => c.audit_only = parse_bool(value)?,
                ("output", "fields") => c.write_fields = parse_bool(value)?,
                _ => return Err(bad_key()),
            }
        }
        c.validate()?;
        Ok(c)
    }
}

/// Per-level outcome of a run.
#[derive(Clone, Debug)]
pub struct LevelReport {
    pub level: u32,
    pub h: f64,
    pub n_cells: usize,
    pub n_dofs: usize,
    pub status: Result<(), String>,
    pub l2_err: Option<f64>,
    pub rot_err: Option<f64>,
    pub fem_l2_err: Option<f64>,
    pub fem_rot_err: Option<f64>,
    /// Relative L² difference between the projected VEM and ND0 fields.
    pub fem_vs_vem: Option<f64>,
    pub solve_residual: Option<f64>,
    pub audit_star_pass: Option<bool>,
    pub worst_rho_ratio: Option<f64>,
    pub seconds: f64,
}

/// Whole-run outcome.
#[derive(Clone, Debug, Default)]
pub struct ExperimentOutcome {
    pub table: ConvergenceTable,
    pub fem_table: Option<ConvergenceTable>,
    pub levels: Vec<LevelReport>,
    pub all_ok: bool,
}

struct LevelSolution {
    mesh: PolyMesh,
    solution: DofVector,
    residual: f64,
}

fn solve_level(
    problem: &Problem,
    config: &ExperimentConfig,
    level: u32,
) -> Result<LevelSolution, ExperimentError> {
    let grid = problem.grid(level)?;
    let mesh = build_cut_mesh(&grid, &problem.interface, 1e-9)?;
    let dofs = dof_map(&mesh);
    let h = 0.5f64.powi(level as i32);
    let quad = SourceQuad {
        degree: config.quad_order,
        singular_lines: problem.singular_lines.clone(),
        grading: Default::default(),
        adaptive: problem.adaptive_source,
    };
    let mut sys = assemble(
        &mesh,
        &problem.coeffs,
        problem.source.as_ref(),
        &quad,
        config.stab.scale(h),
    )?;
    let interp = InterpSpec {
        singular_lines: problem.singular_lines.clone(),
        ..Default::default()
    };
    let trace = problem
        .exact
        .as_ref()
        .filter(|_| problem.inhomogeneous_bc)
        .map(|e| e.trace.as_ref() as &dyn crate::vem::TangentialField);
    set_tangential_bc(&mut sys, &mesh, &dofs, trace, &interp);
    let report = solve(sys)?;
    Ok(LevelSolution {
        mesh,
        solution: report.solution,
        residual: report.residual,
    })
}

/// Runs the whole experiment, writing artifacts under `config.out_dir`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome, ExperimentError> {
    config.validate()?;
    std::fs::create_dir_all(&config.out_dir)?;
    let problem = build_problem(config.example, config.params);
    std::fs::write(config.out_dir.join("config.txt"), config.serialize())?;

    // reference solution for the self-convergence mode
    let needs_reference = problem.exact.is_none() && !config.audit_only;
    let reference: Option<LevelSolution> = if needs_reference {
        let ref_level = config.ref_level.ok_or_else(|| {
            ExperimentError::Config(
                "this example has no closed-form solution; set ref_level".into(),
            )
        })?;
        Some(solve_level(&problem, config, ref_level)?)
    } else {
        None
    };

    let error_quad = ErrorQuad {
        degree: config.quad_order,
        singular_lines: problem.singular_lines.clone(),
        grading: Default::default(),
    };

    let mut levels: Vec<LevelReport> = Vec::new();
    let mut entries: Vec<(u32, f64, f64, f64)> = Vec::new();
    let mut fem_entries: Vec<(u32, f64, f64, f64)> = Vec::new();

    for &level in &config.levels {
        let t0 = Instant::now();
        let h = 0.5f64.powi(level as i32);
        let mut report = LevelReport {
            level,
            h,
            n_cells: 0,
            n_dofs: 0,
            status: Ok(()),
            l2_err: None,
            rot_err: None,
            fem_l2_err: None,
            fem_rot_err: None,
            fem_vs_vem: None,
            solve_residual: None,
            audit_star_pass: None,
            worst_rho_ratio: None,
            seconds: 0.0,
        };
        let outcome = (|| -> Result<(), ExperimentError> {
            let grid = problem.grid(level)?;
            let mesh = build_cut_mesh(&grid, &problem.interface, 1e-9)?;
            report.n_cells = mesh.cells.len();
            report.n_dofs = mesh.edges.len();

            let audit = audit_mesh(&mesh, &config.audit);
            report.audit_star_pass = Some(audit.star_pass);
            report.worst_rho_ratio = Some(audit.worst_rho_ratio);
            write_regularity_csv(
                &config.out_dir.join(format!("regularity_level{level}.csv")),
                &audit,
            )?;
            if config.audit_only {
                return Ok(());
            }

            let sol = solve_level(&problem, config, level)?;
            report.solve_residual = Some(sol.residual);

            let (l2, rot) = match (&problem.exact, &reference) {
                (Some(exact), _) => (
                    l2_projected_error(
                        &sol.mesh,
                        &sol.solution,
                        exact.field.as_ref(),
                        &error_quad,
                    ),
                    rot_error(&sol.mesh, &sol.solution, exact.rot.as_ref(), &error_quad),
                ),
                (None, Some(r)) => cross_compare(
                    (&r.mesh, &r.solution),
                    (&sol.mesh, &sol.solution),
                    2,
                )?,
                (None, None) => unreachable!("reference prepared above"),
            };
            report.l2_err = Some(l2);
            report.rot_err = Some(rot);
            entries.push((level, h, l2, rot));

            if config.write_fields {
                crate::io::write_mesh_vtk(
                    &config.out_dir.join(format!("mesh_level{level}.vtk")),
                    &sol.mesh,
                    &format!("{} mesh level {level}", config.example.name()),
                )?;
                let fields = cell_fields(&sol.mesh, &sol.solution);
                write_field_vtk(
                    &config.out_dir.join(format!("field_level{level}.vtk")),
                    &sol.mesh,
                    &fields,
                    &format!("{} level {level}", config.example.name()),
                )?;
            }

            if config.run_fem {
                let tri = triangulate_mesh(&sol.mesh);
                let quad = SourceQuad {
                    degree: config.quad_order,
                    singular_lines: problem.singular_lines.clone(),
                    grading: Default::default(),
                    adaptive: problem.adaptive_source,
                };
                let trace = problem
                    .exact
                    .as_ref()
                    .filter(|_| problem.inhomogeneous_bc)
                    .map(|e| e.trace.as_ref() as &dyn crate::vem::TangentialField);
                let nd = nd0_solve(&tri, &problem.coeffs, problem.source.as_ref(), trace, &quad)?;
                let vem_fields = cell_fields(&sol.mesh, &sol.solution);
                let nd_proj = tri_projection(&tri, &nd.dofs);
                report.fem_vs_vem = Some(relative_field_difference(&tri, &vem_fields.proj, &nd_proj));
                if let Some(exact) = &problem.exact {
                    let (fl2, frot) = crate::fem::nd0_errors(
                        &tri,
                        &nd.dofs,
                        exact.field.as_ref(),
                        exact.rot.as_ref(),
                        &error_quad,
                    );
                    report.fem_l2_err = Some(fl2);
                    report.fem_rot_err = Some(frot);
                    fem_entries.push((level, h, fl2, frot));
                }
            }
            Ok(())
        })();
        if let Err(e) = outcome {
            report.status = Err(e.to_string());
        }
        report.seconds = t0.elapsed().as_secs_f64();
        levels.push(report);
    }

    let table = if entries.len() >= 2 {
        order_table(&entries)?
    } else {
        ConvergenceTable {
            rows: entries
                .iter()
                .map(|&(level, h, l2, rot)| crate::postproc::ConvergenceRow {
                    level,
                    h,
                    l2_err: l2,
                    l2_order: None,
                    rot_err: rot,
                    rot_order: None,
                })
                .collect(),
        }
    };
    write_convergence_csv(&config.out_dir.join("convergence.csv"), &table)?;

    let fem_table = if fem_entries.len() >= 2 {
        let t = order_table(&fem_entries)?;
        write_convergence_csv(&config.out_dir.join("fem_convergence.csv"), &t)?;
        Some(t)
    } else {
        None
    };

    let all_ok = levels.iter().all(|l| l.status.is_ok());
    let mut summary: Vec<(String, JsonValue)> = vec![
        ("example".into(), JsonValue::Str(config.example.name().into())),
        ("levels_ok".into(), JsonValue::Bool(all_ok)),
        ("stab".into(), JsonValue::Str(config.stab.name().into())),
        (
            "tau_theta".into(),
            JsonValue::Num(crate::regularity::tau_theta(
                config.audit.theta,
                config.audit.kappa0,
                config.audit.kappa1,
            )),
        ),
        (
            "varrho".into(),
            JsonValue::Num(crate::regularity::varrho(
                config.audit.kappa0,
                config.audit.kappa1,
            )),
        ),
    ];
    for l in &levels {
        let prefix = format!("level{}", l.level);
        summary.push((
            format!("{prefix}_status"),
            JsonValue::Str(match &l.status {
                Ok(()) => "ok".into(),
                Err(e) => e.clone(),
            }),
        ));
        summary.push((format!("{prefix}_cells"), JsonValue::Int(l.n_cells as i64)));
        summary.push((format!("{prefix}_dofs"), JsonValue::Int(l.n_dofs as i64)));
        if let Some(v) = l.l2_err {
            summary.push((format!("{prefix}_l2_err"), JsonValue::Num(v)));
        }
        if let Some(v) = l.rot_err {
            summary.push((format!("{prefix}_rot_err"), JsonValue::Num(v)));
        }
        if let Some(v) = l.fem_vs_vem {
            summary.push((format!("{prefix}_fem_vs_vem"), JsonValue::Num(v)));
        }
        if let Some(v) = l.worst_rho_ratio {
            summary.push((format!("{prefix}_worst_rho_ratio"), JsonValue::Num(v)));
        }
        summary.push((format!("{prefix}_seconds"), JsonValue::Num(l.seconds)));
    }
    write_summary_json(&config.out_dir.join("summary.json"), &summary)?;

    Ok(ExperimentOutcome {
        table,
        fem_table,
        levels,
        all_ok,
    })
}
