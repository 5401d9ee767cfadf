//! Scenario driver: config to certified steady state, plus artifacts, sweeps and rendering.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::config::{AuxiliaryReaction, BallRadiusRule, Plan, ProblemConfig};
use crate::construction::{
    check_sub, check_super, coercivity_margin, extend_super_solution, one_field,
    place_sub_solution, residual_tolerance, sigma_eps, solve_auxiliary, solve_front_1d,
    trivial_annulus_field, FrontOptions, ResidualCheck, TravelingFront,
};
use crate::energy::{
    auxiliary_constants, barrier_diagnostic, minimize_in_ball, poincare_diagnostic,
    AuxiliaryConstants, BarrierReport, EnergyContext, MinimizeOptions, MinimizerReport,
    PoincareReport,
};
use crate::error::{Error, Result};
use crate::field::{
    mask_field, read_binary, value_range, write_binary, write_csv, write_mask_pgm, write_pgm, Field,
};
use crate::geometry::{build_obstacle_mask, classify_regions, GridDomain, ObstacleKind, Region};
use crate::kernels::{compute_moments, KernelMoments, KernelStencil};
use crate::nonlinearity::{extend_tilde, make_potential, make_shifted, Nonlinearity};
use crate::nonlocal_op::{ContinuityCheck, OperatorContext, OperatorMode};
use crate::solver::{
    certify_solution, monotone_iterate, CertifyOptions, IterationOutcome, SolverOptions,
    SteadyStateReport,
};

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AuxiliaryDiagnostics {
    pub reaction: AuxiliaryReaction,
    pub constants: AuxiliaryConstants,
    pub truncation_radius: f64,
    pub ball_radius: f64,
    pub minimizer: MinimizerReport<f64>,
    pub barrier: BarrierReport,
    pub solution_min: f64,
    pub solution_max: f64,
    pub sigma: f64,
    pub sigma_eps: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Diagnostics {
    pub scenario: String,
    pub epsilon: f64,
    pub mode: OperatorMode,
    pub spacing: f64,
    pub cells: usize,
    pub box_half_width: f64,
    pub moments: KernelMoments<f64>,
    pub c0: f64,
    pub m2: f64,
    pub c_nj: f64,
    pub r0_star: f64,
    pub m2_eps: f64,
    pub kappa: f64,
    pub delta: f64,
    pub min_mass: f64,
    pub coercivity_margin: f64,
    pub continuity: ContinuityCheck,
    pub poincare: PoincareReport,
    pub residual_tolerance: f64,
    pub super_check: ResidualCheck,
    pub sub_check: ResidualCheck,
    pub auxiliary: Option<AuxiliaryDiagnostics>,
    pub front: TravelingFront<f64>,
    pub sub_shift: f64,
    pub iteration: IterationOutcome<f64>,
}

/// The steady-state document written as `steady_state.json`.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SteadyStateDocument {
    pub scenario: String,
    pub epsilon: f64,
    pub solution: String,
    pub iterations: usize,
    #[serde(flatten)]
    pub report: SteadyStateReport,
}

/// Everything a run produces, kept in memory.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub config: ProblemConfig,
    pub plan: Plan,
    pub domain: GridDomain<f64>,
    pub regions: Vec<Region>,
    pub reaction: Nonlinearity<f64>,
    pub lower: Field<f64>,
    pub upper: Field<f64>,
    pub solution: Field<f64>,
    pub front_kernel: Vec<f64>,
    pub report: SteadyStateReport,
    pub diagnostics: Diagnostics,
}

impl ScenarioOutcome {
    pub fn document(&self) -> SteadyStateDocument {
        SteadyStateDocument {
            scenario: self.config.scenario.clone(),
            epsilon: self.config.epsilon,
            solution: "solution.bin".into(),
            iterations: self.diagnostics.iteration.iterations,
            report: self.report.clone(),
        }
    }
}

/// Partial results, filled stage by stage so that a failing sweep row still reports what it reached.
#[derive(Debug, Clone, Default)]
pub struct Progress {
    pub min_mass: Option<f64>,
    pub coercivity_margin: Option<f64>,
    pub barrier_margin: Option<f64>,
    pub inner_ball_min: Option<f64>,
    pub liouville_flag: Option<bool>,
    pub log: Vec<String>,
    start: Option<Instant>,
}

impl Progress {
    fn note(&mut self, msg: impl AsRef<str>) {
        let t = self
            .start
            .get_or_insert_with(Instant::now)
            .elapsed()
            .as_secs_f64();
        self.log.push(format!("[{t:9.3}s] {}", msg.as_ref()));
    }
}

/// Row-marginal of the 2D stencil: weights seen by a field depending on `x1` only.
pub fn line_kernel(stencil: &KernelStencil<f64>) -> Vec<f64> {
    let m = stencil.radius_cells as i32;
    (-m..=m)
        .map(|i| (-m..=m).map(|j| stencil.weight_at(i, j)).sum())
        .collect()
}

/// Builds and certifies the steady state without writing anything.
pub fn solve_scenario(config: &ProblemConfig, progress: &mut Progress) -> Result<ScenarioOutcome> {
    progress.note(format!(
        "scenario {} eps = {}",
        config.scenario, config.epsilon
    ));
    let plan = config.plan()?;
    let eps = config.epsilon;
    let h = plan.spacing;
    progress.note(format!(
        "grid {}^2, h = {h}, W = {}, support {}, kappa = {}, delta = {}",
        plan.cells, plan.box_half_width, plan.support_eps, plan.kappa, plan.delta
    ));

    let stencil = KernelStencil::discretize(&plan.profile_eps, h)?;
    let domain = build_obstacle_mask(&plan.obstacle, plan.box_half_width, h, plan.support_eps)?;
    let op = OperatorContext::assemble(&stencil, &domain, config.mode)?;
    progress.note(format!(
        "operator assembled ({:?}, {} correction entries)",
        config.mode,
        op.corrections.nnz()
    ));
    let regions = classify_regions(&domain, &plan.obstacle);

    let base = Nonlinearity::Cubic(plan.cubic);
    let reaction = base.scaled(eps * eps);
    let (_, max_deriv) = reaction.deriv_range();
    let continuity = op.continuity(max_deriv);
    progress.min_mass = Some(continuity.min_mass);
    let margin = coercivity_margin(&op, &reaction);
    progress.coercivity_margin = Some(margin);
    if !continuity.holds {
        return Err(Error::Continuity(format!(
            "max f_eps' = {} >= min J_eps = {}",
            continuity.max_deriv, continuity.min_mass
        )));
    }
    let moments = compute_moments(&plan.profile, &plan.cubic)?;
    let (_, c0) = plan.cubic.c0();
    let tol = residual_tolerance(h, eps, moments.grad_l1);
    let r0 = config.obstacle.r0;

    let poincare = poincare_diagnostic(
        &plan.profile_eps,
        if r0 > 0.0 { r0 } else { plan.support_eps },
        config.diagnostics.poincare_cells_per_support,
        config.diagnostics.poincare_samples,
        config.seed,
    )?;

    let (upper, auxiliary) = match plan.obstacle.kind {
        ObstacleKind::None | ObstacleKind::Ball => (one_field(&domain), None),
        ObstacleKind::Annulus => (trivial_annulus_field(&domain, r0), None),
        ObstacleKind::ChannelAnnulus => {
            let (u, aux) =
                energy_super_solution(config, &plan, &op, margin, moments.grad_l1, progress)?;
            (u, Some(aux))
        }
    };
    let super_check = check_super(&op, &upper, &reaction, tol)?;
    progress.note(format!(
        "super-solution residual max {:.3e} (tol {tol:.3e})",
        super_check.max
    ));
    if !super_check.ok {
        return Err(Error::Construction(format!(
            "super-solution residual {:.3e} exceeds tol {tol:.3e}",
            super_check.max
        )));
    }

    let shifted = make_shifted(&plan.cubic, plan.delta)?;
    let front_reaction = Nonlinearity::Shifted(shifted).scaled(eps * eps);
    let front_kernel = line_kernel(&stencil);
    let fc = &config.front;
    let front_opts = FrontOptions {
        widths: fc.widths,
        tol: fc.tol,
        max_steps: fc.max_steps,
        dt: fc.dt,
    };
    let half_width = fc.widths * plan.support_eps / eps;
    let front = solve_front_1d(
        &front_reaction,
        -plan.delta,
        &front_kernel,
        h,
        half_width,
        &front_opts,
    )?;
    progress.note(format!(
        "front: speed {:.3e}, {} steps, residual {:.3e}",
        front.speed, front.steps, front.residual
    ));
    let start = plan.obstacle.outer_radius() + plan.support_eps + h;
    let sub = place_sub_solution(&front, &domain, &upper, start)?;
    let sub_check = check_sub(&op, &sub.field, &reaction, tol)?;
    progress.note(format!(
        "sub-solution at r0 = {:.4}, residual min {:.3e}",
        sub.r0, sub_check.min
    ));
    if !sub_check.ok {
        return Err(Error::Construction(format!(
            "sub-solution residual {:.3e} below -tol = {:.3e}",
            sub_check.min, -tol
        )));
    }

    let sc = &config.solver;
    let solver_opts = SolverOptions {
        k: sc.k,
        outer_tol: sc.outer_tol,
        inner_tol: sc.inner_tol,
        max_outer: sc.max_outer,
        inner_solver: sc.inner_solver,
        max_inner: sc.max_inner,
        sandwich_tol: sc.sandwich_tol,
    };
    let iteration = monotone_iterate(&op, &reaction, &sub.field, &upper, &solver_opts)?;
    progress.note(format!(
        "monotone iteration converged in {} steps (k = {:.3e}, max sandwich violation {:.3e})",
        iteration.iterations, iteration.k, iteration.max_sandwich_violation
    ));
    let certify = CertifyOptions {
        tolerance: sc.residual_tol.unwrap_or(tol),
        classification_tol: sc.classification_tol,
        far_field_tol: sc.far_field_tol,
    };
    let report = certify_solution(&op, &iteration.u, &reaction, &regions, &certify)?;
    progress.inner_ball_min = Some(report.inner_ball.min);
    progress.liouville_flag = Some(report.liouville_flag);
    progress.note(format!(
        "residual {:.3e}, ring mean {:.6}, inner ball min {:.4}, liouvilleFlag {}",
        report.residual_max, report.ring_mean, report.inner_ball.min, report.liouville_flag
    ));

    let diagnostics = Diagnostics {
        scenario: config.scenario.clone(),
        epsilon: eps,
        mode: config.mode,
        spacing: h,
        cells: domain.n,
        box_half_width: domain.box_half_width,
        c0,
        m2: moments.m2,
        c_nj: moments.c_nj,
        r0_star: moments.r0_star,
        moments,
        m2_eps: plan.profile_eps.moment(2),
        kappa: plan.kappa,
        delta: plan.delta,
        min_mass: continuity.min_mass,
        coercivity_margin: margin,
        continuity,
        poincare,
        residual_tolerance: tol,
        super_check,
        sub_check,
        auxiliary,
        front,
        sub_shift: sub.r0,
        iteration: iteration.clone(),
    };
    Ok(ScenarioOutcome {
        config: config.clone(),
        plan,
        domain,
        regions,
        reaction,
        lower: sub.field,
        upper,
        solution: iteration.u,
        front_kernel,
        report,
        diagnostics,
    })
}

fn energy_super_solution(
    config: &ProblemConfig,
    plan: &Plan,
    op: &OperatorContext<f64>,
    margin: f64,
    grad_l1: f64,
    progress: &mut Progress,
) -> Result<(Field<f64>, AuxiliaryDiagnostics)> {
    let a = &config.auxiliary;
    let eps = config.epsilon;
    let aux = match a.nonlinearity {
        AuxiliaryReaction::Tilde => Nonlinearity::Extended(extend_tilde(&plan.cubic, plan.kappa)?),
        AuxiliaryReaction::Base => Nonlinearity::Cubic(plan.cubic),
    };
    let potential = make_potential(aux, eps)?;
    let constants = auxiliary_constants(&potential, &plan.cubic, config.obstacle.r0);
    let radius = plan.box_half_width - a.truncation_supports * plan.support_eps;
    let ctx = EnergyContext::new(op, potential, radius)?;
    let w0 = ctx.w0(config.obstacle.r0);
    let ball_radius = match a.ball_radius {
        BallRadiusRule::Delta0 => constants.delta0,
        BallRadiusRule::Fraction => a.ball_fraction * ctx.norm(&w0.values),
    };
    let barrier = barrier_diagnostic(
        &ctx,
        &w0,
        ball_radius,
        config.diagnostics.barrier_samples,
        config.seed,
    )?;
    progress.barrier_margin = Some(barrier.min_gap);
    progress.note(format!(
        "barrier on the sphere of radius {ball_radius:.4e}: min gap {:.3e} ({})",
        barrier.min_gap,
        if barrier.positive {
            "positive"
        } else {
            "not positive"
        }
    ));
    let opts = MinimizeOptions {
        radius: ball_radius,
        step: a.step,
        grad_tol: a.grad_tol * eps * eps,
        max_iterations: a.max_iterations,
    };
    let minimizer = minimize_in_ball(&ctx, &w0, &opts)?;
    progress.note(format!(
        "auxiliary minimizer: {} iterations, {} restarts, distance {:.4e} of {ball_radius:.4e}",
        minimizer.iterations, minimizer.restarts, minimizer.dist_to_w0
    ));
    let sol = solve_auxiliary(&ctx, &minimizer)?;
    let s_eps = sigma_eps(eps, margin, grad_l1);
    let sigma = a.sigma_fraction * s_eps;
    let sup = extend_super_solution(ctx.domain(), &ctx.omega, &sol.u, radius, sigma, s_eps)?;
    let diag = AuxiliaryDiagnostics {
        reaction: a.nonlinearity,
        constants,
        truncation_radius: radius,
        ball_radius,
        minimizer,
        barrier,
        solution_min: sol.min,
        solution_max: sol.max,
        sigma,
        sigma_eps: s_eps,
    };
    Ok((sup.field, diag))
}

fn write_field(dir: &Path, stem: &str, field: &Field<f64>, domain: &GridDomain<f64>) -> Result<()> {
    write_binary(&dir.join(format!("{stem}.bin")), field, domain)?;
    write_csv(&dir.join(format!("{stem}.csv")), field, domain)?;
    write_pgm(&dir.join(format!("{stem}.pgm")), field, 0.0, 1.0)
}

fn write_front(path: &Path, front: &TravelingFront<f64>) -> Result<()> {
    let mut out = String::from("x1,phi\n");
    for (i, v) in front.phi.iter().enumerate() {
        let _ = writeln!(out, "{},{}", front.x(i), v);
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes every artifact of a finished run into `dir`.
pub fn write_outputs(outcome: &ScenarioOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let d = &outcome.domain;
    write_field(dir, "solution", &outcome.solution, d)?;
    write_field(dir, "sub", &outcome.lower, d)?;
    write_field(dir, "super", &outcome.upper, d)?;
    write_mask_pgm(&dir.join("mask.pgm"), d)?;
    write_front(&dir.join("front.csv"), &outcome.diagnostics.front)?;
    fs::write(
        dir.join("steady_state.json"),
        serde_json::to_string_pretty(&outcome.document())? + "\n",
    )?;
    fs::write(
        dir.join("diagnostics.json"),
        serde_json::to_string_pretty(&outcome.diagnostics)? + "\n",
    )?;
    Ok(())
}

fn write_log(dir: &Path, progress: &Progress) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("run.log"), progress.log.join("\n") + "\n")?;
    Ok(())
}

/// `run`: solve, write artifacts and the log, and fail with a certification error if the state is not certified.
pub fn run_scenario(config: &ProblemConfig, out_dir: Option<&Path>) -> Result<ScenarioOutcome> {
    let dir: PathBuf = out_dir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| config.output_dir());
    let mut progress = Progress::default();
    let result = solve_scenario(config, &mut progress);
    match &result {
        Ok(outcome) => {
            write_outputs(outcome, &dir)?;
            progress.note(format!("artifacts written to {}", dir.display()));
        }
        Err(e) => progress.note(format!("failed: {e}")),
    }
    write_log(&dir, &progress)?;
    let outcome = result?;
    let r = &outcome.report;
    if !r.certified || !r.far_field_ok {
        return Err(Error::Certification(format!(
            "residual {:.3e} (tol {:.3e}), far-field ring mean {:.6}",
            r.residual_max, r.tolerance, r.ring_mean
        )));
    }
    Ok(outcome)
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepRow {
    pub epsilon: f64,
    pub min_mass: Option<f64>,
    pub coercivity_margin: Option<f64>,
    pub barrier_margin: Option<f64>,
    pub inner_ball_min: Option<f64>,
    pub liouville_flag: Option<bool>,
    pub certified: bool,
    pub error: Option<String>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.10e}")).unwrap_or_default()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out =
        String::from("epsilon,min_mass,coercivity_margin,barrier_margin,inner_ball_min,liouville_flag,certified,error\n");
    for r in rows {
        let err = r.error.as_deref().unwrap_or("").replace(['"', '\n'], " ");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},\"{}\"",
            r.epsilon,
            opt(r.min_mass),
            opt(r.coercivity_margin),
            opt(r.barrier_margin),
            opt(r.inner_ball_min),
            r.liouville_flag.map(|b| b.to_string()).unwrap_or_default(),
            r.certified,
            err
        );
    }
    out
}

/// Runs the base config at each `epsilon`; failures become rows. Writes `sweep.csv` and `sweep.log`.
pub fn sweep_epsilon(
    base: &ProblemConfig,
    epsilons: &[f64],
    out_dir: Option<&Path>,
) -> Result<Vec<SweepRow>> {
    let dir: PathBuf = out_dir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| base.output_dir());
    base.plan()?;
    let mut rows = Vec::new();
    let mut log = Vec::new();
    for &eps in epsilons {
        let cfg = base.with_epsilon(eps);
        let mut progress = Progress::default();
        let result = solve_scenario(&cfg, &mut progress);
        let (certified, error) = match &result {
            Ok(o) => (o.report.certified && o.report.far_field_ok, None),
            Err(e) => (false, Some(e.to_string())),
        };
        log.extend(progress.log.iter().cloned());
        rows.push(SweepRow {
            epsilon: eps,
            min_mass: progress.min_mass,
            coercivity_margin: progress.coercivity_margin,
            barrier_margin: progress.barrier_margin,
            inner_ball_min: progress.inner_ball_min,
            liouville_flag: progress.liouville_flag,
            certified,
            error,
        });
    }
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("sweep.csv"), sweep_csv(&rows))?;
    fs::write(dir.join("sweep.log"), log.join("\n") + "\n")?;
    Ok(rows)
}

/// Largest `epsilon` among certified rows with `liouvilleFlag = false`.
pub fn empirical_threshold(rows: &[SweepRow]) -> Option<f64> {
    rows.iter()
        .filter(|r| r.certified && r.liouville_flag == Some(false))
        .map(|r| r.epsilon)
        .fold(None, |m, e| Some(m.map_or(e, |x: f64| x.max(e))))
}

/// Renders a binary field as PGM over `[min, max]` (the field's own range when absent).
pub fn render_field(input: &Path, output: &Path, min: Option<f64>, max: Option<f64>) -> Result<()> {
    let (_, field) = read_binary(input)?;
    let (lo, hi) = value_range(&field);
    let (lo, hi) = (min.unwrap_or(lo), max.unwrap_or(hi));
    if !(hi >= lo) {
        return Err(Error::Config(format!("render range [{lo}, {hi}] is empty")));
    }
    write_pgm(output, &field, lo, hi)
}

/// Mask of a planned grid as a 0/1 field (rendering it over `[0,1]` gives `mask.pgm`).
pub fn mask_of(config: &ProblemConfig) -> Result<(GridDomain<f64>, Field<f64>)> {
    let plan = config.plan()?;
    let d = build_obstacle_mask(
        &plan.obstacle,
        plan.box_half_width,
        plan.spacing,
        plan.support_eps,
    )?;
    let m = mask_field(&d);
    Ok((d, m))
}

/// `validate`: the config checks plus mask construction, without solving.
pub fn validate_config(config: &ProblemConfig) -> Result<String> {
    let plan = config.plan()?;
    let stencil = KernelStencil::discretize(&plan.profile_eps, plan.spacing)?;
    let d = build_obstacle_mask(
        &plan.obstacle,
        plan.box_half_width,
        plan.spacing,
        plan.support_eps,
    )?;
    let active = d.active.iter().filter(|&&a| a).count();
    Ok(format!(
        "{}: valid; grid {}^2 (h = {}, W = {}), {} active cells, stencil radius {} cells, R0* = {:.6}",
        config.scenario, d.n, plan.spacing, d.box_half_width, active, stencil.radius_cells, plan.r0_star
    ))
}
