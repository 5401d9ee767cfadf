//! End-to-end acceptance checks. Prints one line per criterion and fails if any criterion fails.

use std::path::PathBuf;
use std::time::Instant;

use nlab::config::ProblemConfig;
use nlab::construction::{check_sub, check_super, residual_tolerance};
use nlab::energy::{poincare_bound, poincare_diagnostic, EnergyContext};
use nlab::field::Field;
use nlab::geometry::{build_obstacle_mask, geodesic_distances, GridDomain, ObstacleSpec};
use nlab::kernels::{c_nj, r0_star, KernelProfile, KernelStencil};
use nlab::nonlinearity::{make_potential, Cubic, Nonlinearity};
use nlab::nonlocal_op::{OperatorContext, OperatorMode};
use nlab::scenario::{solve_scenario, Progress, ScenarioOutcome};
use nlab::solver::{comparison_check, monotone_iterate, SolverOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn config(name: &str) -> ProblemConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    ProblemConfig::load(&path).expect("bundled config")
}

fn solve(cfg: &ProblemConfig) -> ScenarioOutcome {
    let mut progress = Progress::default();
    match solve_scenario(cfg, &mut progress) {
        Ok(o) => o,
        Err(e) => panic!("{} failed: {e}\n{}", cfg.scenario, progress.log.join("\n")),
    }
}

fn max_abs(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(0.0, |m, x| m.max(x.abs()))
}

/// Larger root of `f'(s) = 0` for `f = a s (1-s)(s - theta)`, and `f` there.
fn cubic_max(theta: f64, a: f64) -> f64 {
    let s = ((1.0 + theta) + ((1.0 + theta).powi(2) - 3.0 * theta).sqrt()) / 3.0;
    a * s * (1.0 - s) * (s - theta)
}

fn kernel_constants() -> Outcome {
    let p = KernelProfile::<f64>::tent(2, 0.5);
    let st = KernelStencil::discretize(&p, 0.5 / 32.0).unwrap();
    let m2 = st.second_moment();
    let mass = st.sum();
    let cnj = c_nj(m2, 2);
    let cnj_closed = std::f64::consts::PI.powi(2) * m2 / 64.0;
    let c0 = cubic_max(0.3, 0.5);
    let r0 = r0_star(0.3, cnj, c0);
    let r0_closed = (0.3 * cnj_closed / (5.0 * c0)).sqrt();
    let pass = (m2 / 0.075 - 1.0).abs() <= 0.01
        && (mass - 1.0).abs() <= 1e-12
        && (cnj - cnj_closed).abs() <= 1e-12
        && (r0 - r0_closed).abs() <= 1e-12;
    outcome(
        pass,
        format!(
            "M2 = {m2:.6} (3/40 = 0.075), mass - 1 = {:.1e}, C_NJ = {cnj:.6}, R0* = {r0:.6}",
            mass - 1.0
        ),
    )
}

fn trivial_annulus(ann: &ScenarioOutcome, secs: f64) -> Outcome {
    let r = &ann.report;
    let pass = ann.domain.n == 256 && r.residual_max <= 1e-14 && !r.liouville_flag && secs < 10.0;
    outcome(
        pass,
        format!(
            "{}^2, residual {:.1e}, liouvilleFlag {}, {secs:.1}s",
            ann.domain.n, r.residual_max, r.liouville_flag
        ),
    )
}

fn operator_paths(rng: &mut ChaCha8Rng) -> Outcome {
    let h = 3.2 / 128.0;
    let st =
        KernelStencil::discretize(&KernelProfile::tent(2, 0.5).rescale(0.3).unwrap(), h).unwrap();
    let d = build_obstacle_mask(&ObstacleSpec::annulus(0.3, 0.7), 1.6, h, 0.15).unwrap();
    let op = OperatorContext::assemble(&st, &d, OperatorMode::Euclidean).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let u = Field {
            n: d.n,
            values: (0..d.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        };
        let a = op.apply(&u).unwrap();
        let b = op.apply_fast(&u).unwrap();
        worst = worst.max(max_abs((0..d.len()).map(|k| a.values[k] - b.values[k])));
    }
    let free = GridDomain::<f64>::free(128, 1.6, st.radius_cells);
    let fop = OperatorContext::assemble(&st, &free, OperatorMode::Euclidean).unwrap();
    let lin = Field::from_fn(&free, |k| {
        let (x1, x2) = free.center(k);
        0.7 * x1 - 1.3 * x2 + 0.2
    });
    let l = fop.apply(&lin).unwrap();
    let lin_max = max_abs(
        (0..free.len())
            .filter(|&k| free.interior(k))
            .map(|k| l.values[k]),
    );
    outcome(
        worst <= 1e-10 && lin_max <= 1e-10,
        format!("128^2: fast vs direct {worst:.1e} over 20 fields, linear field {lin_max:.1e}"),
    )
}

fn energy_gradient(rng: &mut ChaCha8Rng) -> Outcome {
    let eps = 0.2;
    let mut worst = 0.0f64;
    for n in [64usize, 128] {
        let w = 1.0;
        let h = 2.0 * w / n as f64;
        let st = KernelStencil::discretize(&KernelProfile::tent(2, 0.5).rescale(eps).unwrap(), h)
            .unwrap();
        let d = build_obstacle_mask(&ObstacleSpec::annulus(0.3, 0.55), w, h, 0.1).unwrap();
        let op = OperatorContext::assemble(&st, &d, OperatorMode::Euclidean).unwrap();
        let pot = make_potential(
            Nonlinearity::Cubic(Cubic {
                theta: 0.45,
                amplitude: 0.5,
            }),
            eps,
        )
        .unwrap();
        let ctx = EnergyContext::new(&op, pot, w - 2.0 * 0.1).unwrap();
        let v = Field {
            n,
            values: (0..d.len())
                .map(|k| {
                    if ctx.omega[k] {
                        rng.gen_range(0.1..0.9)
                    } else {
                        0.0
                    }
                })
                .collect(),
        };
        let g = ctx.energy_gradient(&v).unwrap();
        for _ in 0..20 {
            let dir: Vec<f64> = (0..d.len())
                .map(|k| {
                    if ctx.omega[k] {
                        rng.gen_range(-1.0..1.0)
                    } else {
                        0.0
                    }
                })
                .collect();
            let t = 1e-4;
            let shifted = |s: f64| Field {
                n,
                values: (0..d.len()).map(|k| v.values[k] + s * dir[k]).collect(),
            };
            let fd =
                (ctx.energy(&shifted(t)).unwrap() - ctx.energy(&shifted(-t)).unwrap()) / (2.0 * t);
            let an: f64 = (0..d.len()).map(|k| g.values[k] * dir[k]).sum();
            worst = worst.max((fd - an).abs() / an.abs().max(1e-300));
        }
    }
    outcome(
        worst <= 1e-5,
        format!("worst relative error {worst:.2e} over 2 x 20 directions (64^2, 128^2)"),
    )
}

fn poincare(seed: u64) -> Outcome {
    let r0 = 0.18;
    let mut parts = Vec::new();
    let mut pass = true;
    for eps in [0.1, 0.05] {
        let p = KernelProfile::<f64>::tent(2, 0.5).rescale(eps).unwrap();
        let rep = poincare_diagnostic(&p, r0, 16, 50, seed).unwrap();
        // the bound is recomputed here from the closed form of M2(J_eps) = eps^2 3/40
        let bound = poincare_bound(r0, eps * eps * 0.075, 2);
        let own = 8.0 * (4.0 * r0 * r0 / std::f64::consts::PI.powi(2)) / (eps * eps * 0.5 * 0.075);
        pass &=
            (bound / own - 1.0).abs() < 1e-12 && rep.samples == 50 && rep.max_ratio <= 1.1 * bound;
        parts.push(format!(
            "eps {eps}: ratio {:.4e} vs bound {bound:.4e}",
            rep.max_ratio
        ));
    }
    outcome(pass, parts.join("; "))
}

fn monotone_scheme(runs: &[&ScenarioOutcome]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for o in runs {
        let worst = o
            .diagnostics
            .iteration
            .history
            .iter()
            .map(|r| r.sandwich_violation)
            .fold(f64::NEG_INFINITY, f64::max);
        pass &= worst <= 1e-10;
        let op = OperatorContext::assemble(
            &KernelStencil::discretize(&o.plan.profile_eps, o.plan.spacing).unwrap(),
            &o.domain,
            o.config.mode,
        )
        .unwrap();
        let opts = SolverOptions {
            k: Some(o.diagnostics.iteration.k),
            ..SolverOptions::default()
        };
        let again = monotone_iterate(&op, &o.reaction, &o.lower, &o.solution, &opts).unwrap();
        let moved = max_abs((0..o.domain.len()).map(|k| again.u.values[k] - o.solution.values[k]));
        pass &= again.iterations == 1 && moved <= opts.outer_tol;
        let ones = Field::from_fn(&o.domain, |k| if o.domain.active[k] { 1.0 } else { 0.0 });
        let zero = Nonlinearity::Zero { theta: 0.5 };
        let z = monotone_iterate(
            &op,
            &zero,
            &Field::zeros(o.domain.n),
            &ones,
            &SolverOptions {
                k: Some(1.0),
                ..SolverOptions::default()
            },
        )
        .unwrap();
        let off = max_abs(
            (0..o.domain.len())
                .filter(|&k| o.domain.active[k])
                .map(|k| z.u.values[k] - 1.0),
        );
        pass &= z.iterations == 1 && off <= 1e-12;
        parts.push(format!(
            "{}: max sandwich {worst:.1e} over {} steps, restart moves {moved:.1e}, f=0 steps {} dev {off:.1e}",
            o.config.scenario, o.diagnostics.iteration.iterations, z.iterations
        ));
    }
    outcome(pass, parts.join("; "))
}

fn residual_signs(
    channel: &ScenarioOutcome,
    pairs: &[(&ScenarioOutcome, &ScenarioOutcome)],
) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let check = |o: &ScenarioOutcome| {
        let op = OperatorContext::assemble(
            &KernelStencil::discretize(&o.plan.profile_eps, o.plan.spacing).unwrap(),
            &o.domain,
            o.config.mode,
        )
        .unwrap();
        let tol = residual_tolerance(o.plan.spacing, o.config.epsilon, 6.0);
        let sup = check_super(&op, &o.upper, &o.reaction, tol).unwrap();
        let sub = check_sub(&op, &o.lower, &o.reaction, tol).unwrap();
        (sup.ok && sub.ok, sup.max, sub.min, tol)
    };
    let (ok, smax, smin, tol) = check(channel);
    pass &= ok;
    parts.push(format!(
        "channel h={:.4}: super max {smax:.1e}, sub min {smin:.1e}, tol {tol:.2e}",
        channel.plan.spacing
    ));
    for (coarse, fine) in pairs {
        let (ok_c, _, _, tc) = check(coarse);
        let (ok_f, sf, bf, tf) = check(fine);
        let ratio = tf / tc;
        let halves = (fine.plan.spacing / coarse.plan.spacing - 0.5).abs() < 1e-12;
        pass &= ok_c && ok_f && halves && (ratio - 0.5).abs() <= 0.125;
        parts.push(format!(
            "{} h={} -> {}: super max {sf:.1e}, sub min {bf:.1e}, tol ratio {ratio:.4}",
            coarse.config.scenario, coarse.plan.spacing, fine.plan.spacing
        ));
    }
    outcome(pass, parts.join("; "))
}

fn counterexample(channel: &ScenarioOutcome, ball: &ScenarioOutcome, secs: f64) -> Outcome {
    let r = &channel.report;
    let theta = channel.config.nonlinearity.theta;
    let pass = r.inner_ball.min <= theta
        && r.ring_mean >= 1.0 - 1e-2
        && r.residual_max <= r.tolerance
        && r.certified
        && ball.report.liouville_flag
        && ball.report.min_u >= 1.0 - 1e-3
        && secs <= 600.0
        && channel.domain.n <= 512;
    outcome(
        pass,
        format!(
            "eps {}: inner ball min {:.4} (theta {theta}), ring mean {:.6}, residual {:.1e} <= {:.2e}; convex ball min u {:.6}, flag {}; {secs:.0}s",
            channel.config.epsilon,
            r.inner_ball.min,
            r.ring_mean,
            r.residual_max,
            r.tolerance,
            ball.report.min_u,
            ball.report.liouville_flag
        ),
    )
}

fn geodesic(geo: &ScenarioOutcome, rng: &mut ChaCha8Rng) -> Outcome {
    let r = &geo.report;
    let d = &geo.domain;
    let h = d.spacing;
    let reach = geo.plan.support_eps;
    let (r0, r1) = (geo.plan.obstacle.r0, geo.plan.obstacle.r1);
    let near: Vec<usize> = (0..d.len())
        .filter(|&k| {
            let (x1, x2) = d.center(k);
            let rr = (x1 * x1 + x2 * x2).sqrt();
            d.interior(k) && ((rr - r1).abs() < 2.0 * reach || (rr - r0).abs() < 2.0 * reach)
        })
        .collect();
    let mut pairs = 0;
    let mut worst = f64::INFINITY;
    while pairs < 1000 {
        let s = near[rng.gen_range(0..near.len())];
        let dist = geodesic_distances(d, s, reach).unwrap();
        let (si, sj) = d.ij(s);
        for &(t, dg) in dist.entries.iter().filter(|e| e.0 != s).take(50) {
            let (ti, tj) = d.ij(t);
            let e =
                (((ti as f64 - si as f64).powi(2) + (tj as f64 - sj as f64).powi(2)).sqrt()) * h;
            worst = worst.min(dg - e);
            pairs += 1;
        }
    }
    // convex active set: a rectangle inside an inactive frame (a rasterized disc is not convex on the grid)
    let n = 96;
    let st = KernelStencil::discretize(&KernelProfile::tent(2, 0.5).rescale(0.2).unwrap(), 0.01)
        .unwrap();
    let mut rect = GridDomain::<f64>::free(n, 0.48, st.radius_cells);
    for k in 0..rect.len() {
        let (x1, x2) = rect.center(k);
        rect.active[k] = x1.abs() < 0.4 && (x2 - 0.05).abs() < 0.3;
        rect.far[k] = rect.far[k] && rect.active[k];
    }
    let eu = OperatorContext::assemble(&st, &rect, OperatorMode::Euclidean).unwrap();
    let ge = OperatorContext::assemble(&st, &rect, OperatorMode::Geodesic).unwrap();
    let mut gap = max_abs((0..rect.len()).map(|k| eu.mass[k] - ge.mass[k]));
    for _ in 0..5 {
        let u = Field {
            n,
            values: (0..rect.len()).map(|_| rng.gen_range(0.0..1.0)).collect(),
        };
        let a = eu.apply(&u).unwrap();
        let b = ge.apply(&u).unwrap();
        gap = gap.max(max_abs((0..rect.len()).map(|k| a.values[k] - b.values[k])));
    }
    let pass = !r.liouville_flag
        && r.certified
        && worst >= -1e-12
        && gap <= 1e-12
        && geo.config.mode == OperatorMode::Geodesic;
    outcome(
        pass,
        format!(
            "geodesic run: inner ball min {:.4}, flag {}, residual {:.1e}; min(d_g - |x-y|) = {worst:.2e} over {pairs} pairs; convex rectangle gap {gap:.1e}",
            r.inner_ball.min, r.liouville_flag, r.residual_max
        ),
    )
}

/// Solves `(J + k) w - S w = b` on the unknowns with `w = 0` elsewhere, by Jacobi sweeps.
fn solve_shifted(op: &OperatorContext<f64>, k: f64, b: &[f64]) -> Vec<f64> {
    let d = &op.domain;
    let mut w = vec![0.0; d.len()];
    for _ in 0..5000 {
        let s = op.weighted_sum_direct(&w);
        let mut change = 0.0f64;
        for c in 0..d.len() {
            if d.interior(c) {
                let v = (b[c] + s[c]) / (op.mass[c] + k);
                change = change.max((v - w[c]).abs());
                w[c] = v;
            }
        }
        if change < 1e-15 {
            break;
        }
    }
    w
}

fn comparison(rng: &mut ChaCha8Rng) -> Outcome {
    let h = 0.02;
    let st =
        KernelStencil::discretize(&KernelProfile::tent(2, 0.5).rescale(0.2).unwrap(), h).unwrap();
    let domains = [
        build_obstacle_mask(&ObstacleSpec::annulus(0.2, 0.45), 0.9, h, 0.1).unwrap(),
        build_obstacle_mask(&ObstacleSpec::ball(0.3), 0.9, h, 0.1).unwrap(),
        GridDomain::free(64, 0.64, st.radius_cells),
    ];
    let ops: Vec<_> = domains
        .iter()
        .map(|d| OperatorContext::assemble(&st, d, OperatorMode::Euclidean).unwrap())
        .collect();
    let (mut satisfying, mut violating, mut random, mut false_verdicts) = (0, 0, 0, 0);
    for i in 0..100 {
        let op = &ops[i % ops.len()];
        let d = &op.domain;
        let k = rng.gen_range(0.0..0.5);
        let w: Vec<f64> = match i % 4 {
            // (L - k) w = -b with b >= 0 gives Lw - kw = b >= 0
            0 | 1 => {
                let b: Vec<f64> = (0..d.len()).map(|_| rng.gen_range(0.0..1e-3)).collect();
                let neg: Vec<f64> = b.iter().map(|x| -x).collect();
                solve_shifted(op, k, &neg)
            }
            // a positive bump: the conclusion fails, so the hypothesis must fail
            2 => {
                let c = loop {
                    let c = rng.gen_range(0..d.len());
                    if d.interior(c) {
                        break c;
                    }
                };
                let mut w = vec![0.0; d.len()];
                w[c] = rng.gen_range(0.01..1.0);
                w
            }
            _ => (0..d.len())
                .map(|c| {
                    if d.interior(c) {
                        rng.gen_range(-1.0..0.2)
                    } else {
                        0.0
                    }
                })
                .collect(),
        };
        let field = Field { n: d.n, values: w };
        let v = comparison_check(op, &field, k).unwrap();
        let ok = match i % 4 {
            0 | 1 => {
                satisfying += 1;
                v.hypothesis && v.conclusion && v.witness.is_none()
            }
            2 => {
                violating += 1;
                !v.hypothesis && v.witness.map_or(false, |c| d.interior(c))
            }
            _ => {
                random += 1;
                v.consistent() && (v.hypothesis || v.witness.is_some())
            }
        };
        if !ok {
            false_verdicts += 1;
        }
    }
    outcome(
        false_verdicts == 0,
        format!("{satisfying} satisfying, {violating} violating, {random} random instances: {false_verdicts} false verdicts"),
    )
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();

    results.push((1, "kernel constants", kernel_constants()));

    let t = Instant::now();
    let ann = solve(&config("annulus_trivial.json"));
    results.push((
        2,
        "trivial annulus",
        trivial_annulus(&ann, t.elapsed().as_secs_f64()),
    ));

    results.push((3, "operator paths", operator_paths(&mut rng)));
    results.push((4, "energy gradient", energy_gradient(&mut rng)));
    results.push((5, "poincare ratio", poincare(7)));

    let t = Instant::now();
    let channel_cfg = config("channel_counterexample.json");
    let channel = solve(&channel_cfg);
    let channel_secs = t.elapsed().as_secs_f64();
    let ball_cfg = config("convex_ball.json");
    let ball = solve(&ball_cfg);
    results.push((
        6,
        "monotone scheme",
        monotone_scheme(&[&ann, &ball, &channel]),
    ));

    let mut ann_coarse = config("annulus_trivial.json");
    ann_coarse.grid.spacing = Some(0.0625);
    let ann_coarse = solve(&ann_coarse);
    let mut ball_coarse = ball_cfg.clone();
    ball_coarse.grid.spacing = Some(0.02);
    let ball_coarse = solve(&ball_coarse);
    results.push((
        7,
        "sub/super residual signs",
        residual_signs(&channel, &[(&ann_coarse, &ann), (&ball_coarse, &ball)]),
    ));

    results.push((
        8,
        "channel counterexample",
        counterexample(&channel, &ball, channel_secs),
    ));

    let mut geo_cfg = channel_cfg.clone();
    geo_cfg.mode = OperatorMode::Geodesic;
    let geo = solve(&geo_cfg);
    results.push((9, "geodesic variant", geodesic(&geo, &mut rng)));

    results.push((10, "comparison harness", comparison(&mut rng)));

    let mut failed = 0;
    for (i, name, o) in &results {
        println!(
            "criterion {i:>2} {:<26} {}  {}",
            name,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
