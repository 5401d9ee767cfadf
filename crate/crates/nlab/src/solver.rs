//! Monotone iteration between an ordered sub/super pair, the comparison-principle harness, and certification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::geometry::Region;
use crate::nonlinearity::Nonlinearity;
use crate::nonlocal_op::OperatorContext;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase")]
pub enum InnerSolver {
    /// Jacobi-preconditioned conjugate gradients.
    #[default]
    Pcg,
    /// Plain fixed-point sweeps `u <- (b + S u) / (J + k)`.
    Jacobi,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Monotone shift; `None` picks `max_{[0,1]} |f'|`.
    pub k: Option<f64>,
    pub outer_tol: f64,
    /// Inner residual tolerance; `None` picks `0.05 k sandwich_tol`, floored at `1e-14`.
    pub inner_tol: Option<f64>,
    pub max_outer: usize,
    pub inner_solver: InnerSolver,
    pub max_inner: usize,
    pub sandwich_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            k: None,
            outer_tol: 1e-10,
            inner_tol: None,
            max_outer: 100_000,
            inner_solver: InnerSolver::Pcg,
            max_inner: 20_000,
            sandwich_tol: 1e-10,
        }
    }
}

/// Smallest admissible shift: `s -> k s + f(s)` must be non-decreasing on `[0,1]`.
pub fn default_shift<T: Scalar>(f: &Nonlinearity<T>) -> T {
    let (lo, hi) = f.deriv_range();
    let k = lo.abs().max(hi.abs());
    if k > T::zero() {
        k
    } else {
        T::one()
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct IterationRecord {
    pub iteration: usize,
    pub decrement: f64,
    pub inner_iterations: usize,
    pub inner_residual: f64,
    pub sandwich_violation: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct IterationOutcome<T> {
    #[serde(skip)]
    pub u: Field<T>,
    pub k: f64,
    pub inner_tol: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Largest `max(u_sub - u_j, u_j - u_{j-1})` seen, cellwise.
    pub max_sandwich_violation: f64,
    /// Largest measured Jacobi update contraction and its bound `J_max / (J_max + k)`.
    pub jacobi_contraction: Option<(f64, f64)>,
    pub history: Vec<IterationRecord>,
}

struct LinearSystem<'a, T: Scalar> {
    op: &'a OperatorContext<T>,
    k: T,
    diag: Vec<T>,
}

impl<'a, T: Scalar> LinearSystem<'a, T> {
    fn new(op: &'a OperatorContext<T>, k: T) -> Self {
        let w00 = op.stencil.weight_at(0, 0);
        let diag = (0..op.len())
            .map(|c| {
                if op.domain.interior(c) {
                    op.mass[c] + k - w00
                } else {
                    T::one()
                }
            })
            .collect();
        LinearSystem { op, k, diag }
    }

    fn unknown(&self, c: usize) -> bool {
        self.op.domain.interior(c)
    }

    fn restrict(&self, x: &[T]) -> Vec<T> {
        (0..x.len())
            .map(|c| if self.unknown(c) { x[c] } else { T::zero() })
            .collect()
    }

    /// `(J + k) x - S_U x` on the unknowns.
    fn apply(&self, x: &[T]) -> Vec<T> {
        let xr = self.restrict(x);
        let s = self.op.weighted_sum(&xr);
        (0..x.len())
            .map(|c| {
                if self.unknown(c) {
                    (self.op.mass[c] + self.k) * xr[c] - s[c]
                } else {
                    T::zero()
                }
            })
            .collect()
    }

    fn residual(&self, b: &[T], x: &[T]) -> Vec<T> {
        let ax = self.apply(x);
        (0..x.len())
            .map(|c| {
                if self.unknown(c) {
                    b[c] - ax[c]
                } else {
                    T::zero()
                }
            })
            .collect()
    }

    fn pcg(&self, b: &[T], x: &mut [T], tol: T, max_iter: usize) -> (usize, T) {
        let n = x.len();
        let dot = |a: &[T], b: &[T]| a.iter().zip(b).fold(T::zero(), |s, (p, q)| s + *p * *q);
        let inf = |a: &[T]| a.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let mut iters = 0;
        let mut r = self.residual(b, x);
        let mut rn = inf(&r);
        // restart a few times so that the reported residual is a true one
        for _ in 0..4 {
            if rn <= tol || iters >= max_iter {
                break;
            }
            let mut z: Vec<T> = (0..n).map(|c| r[c] / self.diag[c]).collect();
            let mut p = z.clone();
            let mut rz = dot(&r, &z);
            while iters < max_iter {
                iters += 1;
                let ap = self.apply(&p);
                let pap = dot(&p, &ap);
                if !(pap > T::zero()) {
                    break;
                }
                let alpha = rz / pap;
                for c in 0..n {
                    x[c] += alpha * p[c];
                    r[c] -= alpha * ap[c];
                }
                if inf(&r) <= tol * T::of(0.5) {
                    break;
                }
                for c in 0..n {
                    z[c] = r[c] / self.diag[c];
                }
                let rz_new = dot(&r, &z);
                let beta = rz_new / rz;
                rz = rz_new;
                for c in 0..n {
                    p[c] = z[c] + beta * p[c];
                }
            }
            r = self.residual(b, x);
            rn = inf(&r);
        }
        (iters, rn)
    }

    /// Returns iterations, final residual and the largest update contraction ratio after the first sweep.
    fn jacobi(&self, b: &[T], x: &mut [T], tol: T, max_iter: usize) -> (usize, T, T) {
        let n = x.len();
        let mut iters = 0;
        let mut prev_update = T::zero();
        let mut worst = T::zero();
        let mut rn = T::infinity();
        while iters < max_iter {
            iters += 1;
            let s = self.op.weighted_sum(&self.restrict(x));
            let mut upd = T::zero();
            for c in 0..n {
                if self.unknown(c) {
                    let v = (b[c] + s[c]) / (self.op.mass[c] + self.k);
                    upd = upd.max((v - x[c]).abs());
                    x[c] = v;
                }
            }
            if iters > 1 && prev_update > T::of(1e-13) {
                worst = worst.max(upd / prev_update);
            }
            prev_update = upd;
            rn = self
                .residual(b, x)
                .iter()
                .fold(T::zero(), |m, v| m.max(v.abs()));
            if rn <= tol {
                break;
            }
        }
        (iters, rn, worst)
    }
}

/// Iterates `(J + k) u_{j+1} - S u_{j+1} = k u_j + f(u_j) + (pinned far-field source)` downward from `upper`.
/// Far-collar cells keep their value from `upper`.
pub fn monotone_iterate<T: Scalar>(
    op: &OperatorContext<T>,
    f: &Nonlinearity<T>,
    lower: &Field<T>,
    upper: &Field<T>,
    opts: &SolverOptions,
) -> Result<IterationOutcome<T>> {
    lower.check_shape(&op.domain)?;
    upper.check_shape(&op.domain)?;
    let d = &op.domain;
    let len = d.len();
    let kmin = default_shift(f);
    let k = opts.k.map(T::of).unwrap_or(kmin);
    let (dlo, dhi) = f.deriv_range();
    if !(k > T::zero()) || k < -dlo * T::of(1.0 - 1e-12) || k < dhi * T::of(1.0 - 1e-12) {
        return Err(Error::Config(format!(
            "shift k = {k} must be positive and at least max |f'| = {kmin}"
        )));
    }
    let sys = LinearSystem::new(op, k);
    let inner_tol = T::of(
        opts.inner_tol
            .unwrap_or((0.05 * k.f64() * opts.sandwich_tol).max(1e-14)),
    );
    // pinned cells (far collar) enter as a fixed source
    let fixed: Vec<T> = (0..len)
        .map(|c| {
            if d.active[c] && !d.interior(c) {
                upper.values[c]
            } else {
                T::zero()
            }
        })
        .collect();
    let pinned = op.weighted_sum(&fixed);
    let source: Vec<T> = (0..len).map(|c| pinned[c] + op.outside_mass[c]).collect();
    let mut u = upper.values.clone();
    let mut history = Vec::new();
    let mut worst_violation = f64::NEG_INFINITY;
    let mut contraction = T::zero();
    let tol_s = T::of(opts.sandwich_tol);
    for j in 1..=opts.max_outer {
        let b: Vec<T> = (0..len)
            .map(|c| {
                if d.interior(c) {
                    k * u[c] + f.eval(u[c]) + source[c]
                } else {
                    T::zero()
                }
            })
            .collect();
        let mut x = u.clone();
        let (inner_iterations, inner_residual) = match opts.inner_solver {
            InnerSolver::Pcg => sys.pcg(&b, &mut x, inner_tol, opts.max_inner),
            InnerSolver::Jacobi => {
                let (it, r, c) = sys.jacobi(&b, &mut x, inner_tol, opts.max_inner);
                contraction = contraction.max(c);
                (it, r)
            }
        };
        if inner_residual > inner_tol {
            return Err(Error::NoConvergence(format!(
                "inner solve at outer step {j} stalled at residual {:.3e} > {:.3e}",
                inner_residual.f64(),
                inner_tol.f64()
            )));
        }
        let mut dec = T::zero();
        let mut viol = T::neg_infinity();
        for c in 0..len {
            if !d.interior(c) {
                continue;
            }
            dec = dec.max((x[c] - u[c]).abs());
            viol = viol.max(x[c] - u[c]).max(lower.values[c] - x[c]);
        }
        for c in 0..len {
            if d.interior(c) {
                u[c] = x[c];
            }
        }
        worst_violation = worst_violation.max(viol.f64());
        history.push(IterationRecord {
            iteration: j,
            decrement: dec.f64(),
            inner_iterations,
            inner_residual: inner_residual.f64(),
            sandwich_violation: viol.f64(),
        });
        if viol > tol_s {
            return Err(Error::Monotonicity(format!(
                "sandwich violated by {:.3e} at outer step {j} (tolerance {:.1e})",
                viol.f64(),
                tol_s.f64()
            )));
        }
        if dec <= T::of(opts.outer_tol) {
            let jc = if opts.inner_solver == InnerSolver::Jacobi {
                let jmax = (0..len)
                    .filter(|&c| d.interior(c))
                    .fold(T::zero(), |m, c| m.max(op.mass[c]));
                Some((contraction.f64(), (jmax / (jmax + k)).f64()))
            } else {
                None
            };
            return Ok(IterationOutcome {
                u: Field { n: d.n, values: u },
                k: k.f64(),
                inner_tol: inner_tol.f64(),
                iterations: j,
                converged: true,
                max_sandwich_violation: worst_violation,
                jacobi_contraction: jc,
                history,
            });
        }
    }
    Err(Error::IterationCap(format!(
        "no convergence in {} outer steps",
        opts.max_outer
    )))
}

/// Outcome of testing `Lw - k w >= 0` (with `w <= 0` on the collar) against `w <= 0`.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ComparisonVerdict {
    pub collar_ok: bool,
    pub hypothesis: bool,
    pub conclusion: bool,
    pub min_lhs: f64,
    pub max_w: f64,
    /// Cell where the hypothesis fails (or the conclusion, if the hypothesis holds and the conclusion fails).
    pub witness: Option<usize>,
}

impl ComparisonVerdict {
    /// The comparison principle is respected: hypotheses failing or conclusion holding.
    pub fn consistent(&self) -> bool {
        !(self.collar_ok && self.hypothesis) || self.conclusion
    }
}

pub fn comparison_check<T: Scalar>(
    op: &OperatorContext<T>,
    w: &Field<T>,
    k: T,
) -> Result<ComparisonVerdict> {
    let lw = op.apply(w)?;
    let d = &op.domain;
    let mut collar_ok = true;
    let mut witness = None;
    for c in 0..d.len() {
        if d.active[c] && d.far[c] && w.values[c] > T::zero() {
            collar_ok = false;
            witness.get_or_insert(c);
        }
    }
    let mut min_lhs = T::infinity();
    let mut arg_lhs = None;
    let mut max_w = T::neg_infinity();
    let mut arg_w = None;
    for c in 0..d.len() {
        if !d.interior(c) {
            continue;
        }
        let v = lw.values[c] - k * w.values[c];
        if v < min_lhs {
            min_lhs = v;
            arg_lhs = Some(c);
        }
        if w.values[c] > max_w {
            max_w = w.values[c];
            arg_w = Some(c);
        }
    }
    let hypothesis = min_lhs >= T::of(-1e-12);
    let conclusion = max_w <= T::of(1e-10);
    if witness.is_none() {
        witness = if !hypothesis {
            arg_lhs
        } else if !conclusion {
            arg_w
        } else {
            None
        };
    }
    Ok(ComparisonVerdict {
        collar_ok,
        hypothesis,
        conclusion,
        min_lhs: min_lhs.f64(),
        max_w: max_w.f64(),
        witness,
    })
}

/// `min` and `mean` are NaN (null in JSON) for an empty region.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RegionStats {
    pub cells: usize,
    pub min: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SteadyStateReport {
    pub residual_max: f64,
    pub tolerance: f64,
    pub certified: bool,
    pub continuity_min_mass: f64,
    pub continuity_max_deriv: f64,
    pub continuity_holds: bool,
    pub ring_mean: f64,
    pub far_field_ok: bool,
    pub inner_ball: RegionStats,
    pub channel: RegionStats,
    pub outer_field: RegionStats,
    pub min_u: f64,
    pub max_u: f64,
    pub liouville_flag: bool,
    pub max_adjacent_jump: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct CertifyOptions {
    pub tolerance: f64,
    pub classification_tol: f64,
    pub far_field_tol: f64,
}

fn stats(vals: impl Iterator<Item = f64>) -> RegionStats {
    let (mut n, mut s, mut m) = (0usize, 0.0, f64::INFINITY);
    for v in vals {
        n += 1;
        s += v;
        m = m.min(v);
    }
    if n == 0 {
        RegionStats {
            cells: 0,
            min: f64::NAN,
            mean: f64::NAN,
        }
    } else {
        RegionStats {
            cells: n,
            min: m,
            mean: s / n as f64,
        }
    }
}

/// Residual, continuity condition, far-field attainment, region statistics and the Liouville flag.
pub fn certify_solution<T: Scalar>(
    op: &OperatorContext<T>,
    u: &Field<T>,
    f: &Nonlinearity<T>,
    regions: &[Region],
    opts: &CertifyOptions,
) -> Result<SteadyStateReport> {
    let r = op.residual(u, f)?;
    let d = &op.domain;
    let n = d.n;
    let interior: Vec<usize> = (0..d.len()).filter(|&c| d.interior(c)).collect();
    let residual_max = interior
        .iter()
        .fold(0.0f64, |m, &c| m.max(r.values[c].f64().abs()));
    let (_, max_deriv) = f.deriv_range();
    let cont = op.continuity(max_deriv);
    let m = d.collar;
    let ring: Vec<f64> = interior
        .iter()
        .filter(|&&c| {
            let (i, j) = d.ij(c);
            i == m || j == m || i + 1 + m == n || j + 1 + m == n
        })
        .map(|&c| u.values[c].f64())
        .collect();
    let ring_mean = if ring.is_empty() {
        f64::NAN
    } else {
        ring.iter().sum::<f64>() / ring.len() as f64
    };
    let pick = |reg: Region| {
        stats(
            interior
                .iter()
                .filter(|&&c| regions[c] == reg)
                .map(|&c| u.values[c].f64()),
        )
    };
    let all = stats(interior.iter().map(|&c| u.values[c].f64()));
    let max_u = interior
        .iter()
        .fold(f64::NEG_INFINITY, |a, &c| a.max(u.values[c].f64()));
    let mut jump = 0.0f64;
    for &c in &interior {
        for (di, dj) in [(1, 0), (0, 1)] {
            if let Some(q) = d.offset(c, di, dj) {
                if d.active[q] {
                    jump = jump.max((u.values[q] - u.values[c]).abs().f64());
                }
            }
        }
    }
    Ok(SteadyStateReport {
        residual_max,
        tolerance: opts.tolerance,
        certified: residual_max <= opts.tolerance,
        continuity_min_mass: cont.min_mass,
        continuity_max_deriv: cont.max_deriv,
        continuity_holds: cont.holds,
        ring_mean,
        far_field_ok: ring_mean >= 1.0 - opts.far_field_tol,
        inner_ball: pick(Region::InnerBall),
        channel: pick(Region::Channel),
        outer_field: pick(Region::OuterField),
        min_u: all.min,
        max_u,
        liouville_flag: all.min >= 1.0 - opts.classification_tol,
        max_adjacent_jump: jump,
    })
}
