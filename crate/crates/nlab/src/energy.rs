//! Auxiliary energy on `Omega = B_R \ K`, its gradient, a local minimizer in an L2 ball around
//! `w0 = 1_{B_R0}`, and the Poincare and barrier diagnostics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::geometry::GridDomain;
use crate::kernels::{KernelProfile, KernelStencil};
use crate::nonlinearity::{Cubic, PotentialData};
use crate::nonlocal_op::{OperatorContext, OperatorMode};
use crate::scalar::Scalar;

/// Cubic Hermite table of `G` on `[lo, hi]`, using the exact `g` as node slopes.
#[derive(Debug, Clone)]
struct GTable {
    first: i64,
    step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl GTable {
    fn build<T: Scalar>(p: &PotentialData<T>, lo: f64, hi: f64, step: f64) -> Self {
        let first = (lo / step).floor() as i64;
        let last = (hi / step).ceil() as i64;
        let g = |s: f64| p.g(T::of(s)).f64();
        let breaks = p.g_breaks().to_vec();
        let panel = |a: f64, b: f64| {
            if breaks.iter().any(|&c| c > a && c < b) {
                crate::quad::adaptive_simpson(&g, a, b, 1e-16)
            } else {
                (b - a) / 6.0 * (g(a) + 4.0 * g(0.5 * (a + b)) + g(b))
            }
        };
        let count = (last - first + 1) as usize;
        let mut values = vec![0.0; count];
        let zero = (-first) as usize;
        for k in zero + 1..count {
            let (a, b) = (
                (first + k as i64 - 1) as f64 * step,
                (first + k as i64) as f64 * step,
            );
            values[k] = values[k - 1] + panel(a, b);
        }
        for k in (0..zero).rev() {
            let (a, b) = (
                (first + k as i64) as f64 * step,
                (first + k as i64 + 1) as f64 * step,
            );
            values[k] = values[k + 1] - panel(a, b);
        }
        let slopes = (0..count)
            .map(|k| g((first + k as i64) as f64 * step))
            .collect();
        GTable {
            first,
            step,
            values,
            slopes,
        }
    }

    fn eval(&self, t: f64) -> Option<f64> {
        let x = t / self.step - self.first as f64;
        let k = x.floor();
        if k < 0.0 || k as usize + 1 >= self.values.len() {
            return None;
        }
        let k = k as usize;
        let u = x - k as f64;
        if u == 0.0 {
            return Some(self.values[k]);
        }
        let (u2, u3) = (u * u, u * u * u);
        let h = self.step;
        Some(
            (2.0 * u3 - 3.0 * u2 + 1.0) * self.values[k]
                + (u3 - 2.0 * u2 + u) * h * self.slopes[k]
                + (-2.0 * u3 + 3.0 * u2) * self.values[k + 1]
                + (u3 - u2) * h * self.slopes[k + 1],
        )
    }
}

pub struct EnergyContext<'a, T: Scalar> {
    pub op: &'a OperatorContext<T>,
    pub potential: PotentialData<T>,
    /// Truncation radius `R`.
    pub radius: T,
    /// Cells of `Omega`.
    pub omega: Vec<bool>,
    /// `c_eps(x)`: weight from `x` to active cells outside `Omega`.
    pub far_mass: Vec<T>,
    table: GTable,
}

impl<'a, T: Scalar> EnergyContext<'a, T> {
    /// `Omega` = unknown cells with `|x| < R`; it must not reach the far collar.
    pub fn new(op: &'a OperatorContext<T>, potential: PotentialData<T>, radius: T) -> Result<Self> {
        let d = &op.domain;
        let mut omega = vec![false; d.len()];
        for (k, o) in omega.iter_mut().enumerate() {
            let (x1, x2) = d.center(k);
            if d.active[k] && (x1 * x1 + x2 * x2).sqrt() < radius {
                if d.far[k] {
                    return Err(Error::Domain(format!(
                        "B_R with R = {radius} reaches the far collar"
                    )));
                }
                *o = true;
            }
        }
        let ind: Vec<T> = omega
            .iter()
            .map(|&b| if b { T::one() } else { T::zero() })
            .collect();
        let inner = op.weighted_sum_direct(&ind);
        let far_mass = (0..d.len())
            .map(|k| {
                if omega[k] {
                    (op.mass[k] - inner[k]).max(T::zero())
                } else {
                    T::zero()
                }
            })
            .collect();
        let table = GTable::build(&potential, -2.5, 3.5, 1e-4);
        Ok(EnergyContext {
            op,
            potential,
            radius,
            omega,
            far_mass,
            table,
        })
    }

    pub fn domain(&self) -> &GridDomain<T> {
        &self.op.domain
    }

    pub fn cell_volume(&self) -> T {
        self.op.domain.cell_volume()
    }

    /// `G_eps(t) = eps^2 G(t)`, tabulated on `[-2.5, 3.5]`.
    pub fn big_g_eps(&self, t: T) -> T {
        let e2 = self.potential.epsilon * self.potential.epsilon;
        match self.table.eval(t.f64()) {
            Some(v) => e2 * T::of(v),
            None => self.potential.big_g_eps(t),
        }
    }

    fn restrict(&self, w: &[T]) -> Vec<T> {
        w.iter()
            .zip(&self.omega)
            .map(|(&x, &o)| if o { x } else { T::zero() })
            .collect()
    }

    fn weighted(&self, v: &[T]) -> Vec<T> {
        self.op.weighted_sum(v)
    }

    /// `J v - S v - g_eps(v)` on `Omega`, zero elsewhere; `s = S v`.
    fn bracket(&self, v: &[T], s: &[T]) -> Vec<T> {
        (0..v.len())
            .map(|k| {
                if self.omega[k] {
                    self.op.mass[k] * v[k] - s[k] - self.potential.g_eps(v[k])
                } else {
                    T::zero()
                }
            })
            .collect()
    }

    fn energy_with(&self, v: &[T], s: &[T]) -> T {
        let half = T::of(0.5);
        let mut e = T::zero();
        for k in 0..v.len() {
            if self.omega[k] {
                e += half * v[k] * (self.op.mass[k] * v[k] - s[k]) - self.big_g_eps(v[k]);
            }
        }
        e * self.cell_volume()
    }

    /// `1/4 sum sum w (w(x)-w(y))^2 + 1/2 sum c w^2 - sum G_eps(w)`, all times the cell volume.
    pub fn energy(&self, w: &Field<T>) -> Result<T> {
        w.check_shape(self.domain())?;
        let v = self.restrict(&w.values);
        let s = self.weighted(&v);
        Ok(self.energy_with(&v, &s))
    }

    /// The three terms separately: `(interaction, far, potential)`.
    pub fn energy_terms(&self, w: &Field<T>) -> Result<(T, T, T)> {
        w.check_shape(self.domain())?;
        let v = self.restrict(&w.values);
        let ind: Vec<T> = self
            .omega
            .iter()
            .map(|&b| if b { T::one() } else { T::zero() })
            .collect();
        let s = self.op.weighted_sum_direct(&v);
        let inner = self.op.weighted_sum_direct(&ind);
        let half = T::of(0.5);
        let (mut a, mut b, mut c) = (T::zero(), T::zero(), T::zero());
        for k in 0..v.len() {
            if self.omega[k] {
                a += half * v[k] * (inner[k] * v[k] - s[k]);
                b += half * self.far_mass[k] * v[k] * v[k];
                c -= self.big_g_eps(v[k]);
            }
        }
        let h2 = self.cell_volume();
        Ok((a * h2, b * h2, c * h2))
    }

    /// Partial derivatives of [`Self::energy`] with respect to the cell values.
    pub fn energy_gradient(&self, w: &Field<T>) -> Result<Field<T>> {
        w.check_shape(self.domain())?;
        let v = self.restrict(&w.values);
        let s = self.weighted(&v);
        let h2 = self.cell_volume();
        Ok(Field {
            n: w.n,
            values: self.bracket(&v, &s).into_iter().map(|b| b * h2).collect(),
        })
    }

    /// Max over `Omega` of `|L_R v - c v + g_eps(v)|`.
    pub fn stationarity(&self, w: &Field<T>) -> Result<T> {
        w.check_shape(self.domain())?;
        let v = self.restrict(&w.values);
        let s = self.op.weighted_sum_direct(&v);
        Ok(self
            .bracket(&v, &s)
            .iter()
            .fold(T::zero(), |m, b| m.max(b.abs())))
    }

    /// L2 norm over `Omega`.
    pub fn norm(&self, w: &[T]) -> T {
        let mut s = T::zero();
        for k in 0..w.len() {
            if self.omega[k] {
                s += w[k] * w[k];
            }
        }
        (s * self.cell_volume()).sqrt()
    }

    pub fn distance(&self, a: &[T], b: &[T]) -> T {
        let diff: Vec<T> = a.iter().zip(b).map(|(x, y)| *x - *y).collect();
        self.norm(&diff)
    }

    /// `1_{B_R0}` on `Omega`.
    pub fn w0(&self, r0: T) -> Field<T> {
        let d = self.domain();
        Field::from_fn(d, |k| {
            let (x1, x2) = d.center(k);
            if self.omega[k] && (x1 * x1 + x2 * x2).sqrt() < r0 {
                T::one()
            } else {
                T::zero()
            }
        })
    }

    /// Clamp to `[0,1]` on `Omega`, then pull radially into the ball of radius `rho` around `w0`.
    fn project(&self, x: &mut [T], w0: &[T], rho: T) {
        for k in 0..x.len() {
            x[k] = if self.omega[k] {
                x[k].max(T::zero()).min(T::one())
            } else {
                T::zero()
            };
        }
        let d = self.distance(x, w0);
        if d > rho {
            let t = rho / d;
            for k in 0..x.len() {
                if self.omega[k] {
                    x[k] = w0[k] + (x[k] - w0[k]) * t;
                }
            }
        }
    }
}

/// Constants entering the ball radius `delta0 = min{theta/4, C0/kappa, tau0/2} |B_R0|^{1/2}`.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AuxiliaryConstants {
    pub kappa: f64,
    pub kappa1: f64,
    pub tau0: f64,
    pub c0: f64,
    pub ball_norm: f64,
    pub delta0: f64,
}

pub fn auxiliary_constants<T: Scalar>(
    potential: &PotentialData<T>,
    f: &Cubic<T>,
    r0: T,
) -> AuxiliaryConstants {
    let (_, c0) = f.c0();
    let kappa = potential.kappa.f64();
    let ball_norm = std::f64::consts::PI.sqrt() * r0.f64();
    let mut m = (f.theta.f64() / 4.0).min(potential.tau0.f64() / 2.0);
    if kappa > 0.0 {
        m = m.min(c0.f64() / kappa);
    }
    AuxiliaryConstants {
        kappa,
        kappa1: potential.kappa1.f64(),
        tau0: potential.tau0.f64(),
        c0: c0.f64(),
        ball_norm,
        delta0: m * ball_norm,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MinimizeOptions {
    /// Radius of the L2 ball around `w0`.
    pub radius: f64,
    /// Fixed step; `None` uses `1/(2 + sup|g_eps'|)`.
    pub step: Option<f64>,
    /// Stop when `|x - P(x - t grad)|_inf / t` drops below this.
    pub grad_tol: f64,
    pub max_iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MinimizerReport<T> {
    #[serde(skip)]
    pub v: Field<T>,
    pub energy: f64,
    pub energy_w0: f64,
    pub dist_to_w0: f64,
    pub radius: f64,
    pub iterations: usize,
    pub restarts: usize,
    pub converged: bool,
    pub interior: bool,
    pub projected_gradient: f64,
    pub stationarity: f64,
    pub v_min_omega: f64,
    pub v_max_omega: f64,
}

/// Monotone accelerated projected gradient descent from `w0` inside the ball of radius `opts.radius`.
/// Errors with a barrier violation when the limit touches the sphere.
pub fn minimize_in_ball<T: Scalar>(
    ctx: &EnergyContext<'_, T>,
    w0: &Field<T>,
    opts: &MinimizeOptions,
) -> Result<MinimizerReport<T>> {
    let report = descend(ctx, w0, opts)?;
    if !report.converged {
        return Err(Error::NoConvergence(format!(
            "energy descent stopped after {} iterations with projected gradient {:.3e} > {:.3e}",
            report.iterations, report.projected_gradient, opts.grad_tol
        )));
    }
    if !report.interior {
        return Err(Error::Barrier(format!(
            "minimizer sits on the sphere ||w - w0|| = {:.4e} (distance {:.4e}); no interior local minimizer at this epsilon",
            report.radius, report.dist_to_w0
        )));
    }
    Ok(report)
}

/// The descent itself; reports instead of failing.
pub fn descend<T: Scalar>(
    ctx: &EnergyContext<'_, T>,
    w0: &Field<T>,
    opts: &MinimizeOptions,
) -> Result<MinimizerReport<T>> {
    w0.check_shape(ctx.domain())?;
    if !(opts.radius > 0.0) {
        return Err(Error::Parameter(format!(
            "ball radius {} must be positive",
            opts.radius
        )));
    }
    let rho = T::of(opts.radius);
    let w0v = ctx.restrict(&w0.values);
    let t0 = opts
        .step
        .map(T::of)
        .unwrap_or_else(|| T::one() / (T::of(2.0) + ctx.potential.sup_g_eps_deriv()));
    let mut step = t0;
    let tol = T::of(opts.grad_tol);
    let slack = |e: T| T::of(1e-13) * e.abs();
    let len = w0v.len();

    let mut x = w0v.clone();
    ctx.project(&mut x, &w0v, rho);
    let mut sx = ctx.weighted(&x);
    let mut ex = ctx.energy_with(&x, &sx);
    let energy_w0 = ex;
    let mut y = x.clone();
    let mut sy = sx.clone();
    let mut tk = T::one();
    let mut iterations = 0;
    let mut restarts = 0;
    let mut converged = false;
    let mut pg = T::infinity();
    let pstep = |base: &[T], g: &[T], t: T| -> Vec<T> {
        let mut z: Vec<T> = (0..len).map(|k| base[k] - t * g[k]).collect();
        ctx.project(&mut z, &w0v, rho);
        z
    };
    while iterations < opts.max_iterations {
        let gx = ctx.bracket(&x, &sx);
        let px = pstep(&x, &gx, step);
        pg = (0..len).fold(T::zero(), |m, k| m.max((x[k] - px[k]).abs())) / step;
        if pg <= tol {
            converged = true;
            break;
        }
        iterations += 1;
        let gy = ctx.bracket(&y, &sy);
        let mut z = pstep(&y, &gy, step);
        let mut sz = ctx.weighted(&z);
        let mut ez = ctx.energy_with(&z, &sz);
        if ez > ex + slack(ex) {
            restarts += 1;
            tk = T::one();
            z = px;
            loop {
                sz = ctx.weighted(&z);
                ez = ctx.energy_with(&z, &sz);
                if ez <= ex + slack(ex) {
                    break;
                }
                step = step / T::of(2.0);
                if step < t0 * T::of(1e-8) {
                    return Err(Error::NoConvergence(
                        "step size collapsed during energy descent".into(),
                    ));
                }
                z = pstep(&x, &gx, step);
            }
            x = z;
            sx = sz;
            ex = ez;
            y = x.clone();
            sy = sx.clone();
            continue;
        }
        let tn = (T::one() + (T::one() + T::of(4.0) * tk * tk).sqrt()) / T::of(2.0);
        let beta = (tk - T::one()) / tn;
        y = (0..len).map(|k| z[k] + beta * (z[k] - x[k])).collect();
        sy = (0..len).map(|k| sz[k] + beta * (sz[k] - sx[k])).collect();
        x = z;
        sx = sz;
        ex = ez;
        tk = tn;
    }
    let dist = ctx.distance(&x, &w0v);
    let v = Field {
        n: w0.n,
        values: x.clone(),
    };
    let stationarity = ctx.stationarity(&v)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..len {
        if ctx.omega[k] {
            lo = lo.min(x[k].f64());
            hi = hi.max(x[k].f64());
        }
    }
    Ok(MinimizerReport {
        v,
        energy: ex.f64(),
        energy_w0: energy_w0.f64(),
        dist_to_w0: dist.f64(),
        radius: opts.radius,
        iterations,
        restarts,
        converged,
        interior: dist < rho * T::of(1.0 - 1e-6),
        projected_gradient: pg.f64(),
        stationarity: stationarity.f64(),
        v_min_omega: lo,
        v_max_omega: hi,
    })
}

/// Energy gap on the sphere `||w - w0|| = radius` along random directions.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BarrierReport {
    pub radius: f64,
    pub samples: usize,
    pub min_gap: f64,
    /// `min_gap / eps^2`.
    pub c_star: f64,
    /// `min_gap / (eps^2 radius^2)`.
    pub kappa0: f64,
    pub positive: bool,
}

pub fn barrier_diagnostic<T: Scalar>(
    ctx: &EnergyContext<'_, T>,
    w0: &Field<T>,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<BarrierReport> {
    let e0 = ctx.energy(w0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_gap = f64::INFINITY;
    for _ in 0..samples {
        let dir: Vec<T> = (0..w0.len())
            .map(|k| {
                if ctx.omega[k] {
                    T::of(rng.gen_range(-1.0..1.0))
                } else {
                    T::zero()
                }
            })
            .collect();
        let nrm = ctx.norm(&dir);
        let w = Field {
            n: w0.n,
            values: (0..w0.len())
                .map(|k| w0.values[k] + dir[k] * T::of(radius) / nrm)
                .collect(),
        };
        min_gap = min_gap.min((ctx.energy(&w)? - e0).f64());
    }
    let e2 = (ctx.potential.epsilon * ctx.potential.epsilon).f64();
    Ok(BarrierReport {
        radius,
        samples,
        min_gap,
        c_star: min_gap / e2,
        kappa0: min_gap / (e2 * radius * radius),
        positive: min_gap > 0.0,
    })
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PoincareReport {
    pub r0: f64,
    pub epsilon: f64,
    pub spacing: f64,
    pub samples: usize,
    pub max_ratio: f64,
    pub bound: f64,
    pub holds: bool,
}

/// `8 A0 / (K M2(J_eps))` with `A0 = 4 R0^2 / pi^2` and `K = 1/N`.
pub fn poincare_bound(r0: f64, m2_eps: f64, dimension: usize) -> f64 {
    let a0 = 4.0 * r0 * r0 / std::f64::consts::PI.powi(2);
    8.0 * a0 * dimension as f64 / m2_eps
}

/// Ball `B_R0` as the active set of its own grid, with `cells` cells per kernel support.
pub fn poincare_domain<T: Scalar>(
    profile: &KernelProfile<T>,
    r0: T,
    cells: usize,
) -> Result<(KernelStencil<T>, GridDomain<T>)> {
    let h = profile.support / T::idx(cells);
    let stencil = KernelStencil::discretize(profile, h)?;
    let n = (T::of(2.0) * (r0 + profile.support) / h)
        .ceil()
        .to_usize()
        .unwrap_or(0)
        + 2;
    let w = T::idx(n) * h / T::of(2.0);
    let mut d = GridDomain::free(n, w, 0);
    for k in 0..d.len() {
        let (x1, x2) = d.center(k);
        d.active[k] = (x1 * x1 + x2 * x2).sqrt() < r0;
    }
    Ok((stencil, d))
}

/// `||h||^2 / (1/4 sum sum w (h(x)-h(y))^2)` over the active cells, for a zero-mean `h`.
pub fn poincare_ratio<T: Scalar>(op: &OperatorContext<T>, h: &[T]) -> T {
    let d = &op.domain;
    let s = op.weighted_sum_direct(h);
    let (mut num, mut den) = (T::zero(), T::zero());
    for k in 0..d.len() {
        if d.active[k] {
            num += h[k] * h[k];
            den += T::of(0.5) * h[k] * (op.mass[k] * h[k] - s[k]);
        }
    }
    if num == T::zero() {
        T::zero()
    } else {
        num / den
    }
}

/// Subtracts the mean over the active cells.
pub fn remove_mean<T: Scalar>(domain: &GridDomain<T>, h: &mut [T]) {
    let (mut s, mut c) = (T::zero(), 0usize);
    for k in 0..h.len() {
        if domain.active[k] {
            s += h[k];
            c += 1;
        }
    }
    let m = s / T::idx(c.max(1));
    for k in 0..h.len() {
        h[k] = if domain.active[k] {
            h[k] - m
        } else {
            T::zero()
        };
    }
}

/// Max ratio over `samples` random zero-mean fields (noise plus low modes) on `B_R0`.
pub fn poincare_diagnostic<T: Scalar>(
    profile: &KernelProfile<T>,
    r0: T,
    cells: usize,
    samples: usize,
    seed: u64,
) -> Result<PoincareReport> {
    let (stencil, domain) = poincare_domain(profile, r0, cells)?;
    let op = OperatorContext::assemble(&stencil, &domain, OperatorMode::Euclidean)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_ratio = T::zero();
    let pi = std::f64::consts::PI;
    for _ in 0..samples {
        let noise = rng.gen_range(0.0..1.0);
        let modes: Vec<(f64, f64, f64, f64)> = (0..3)
            .map(|_| {
                (
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(0.0..2.0),
                    rng.gen_range(0.0..2.0),
                    rng.gen_range(0.0..2.0 * pi),
                )
            })
            .collect();
        let mut h: Vec<T> = (0..domain.len())
            .map(|k| {
                let (x1, x2) = domain.center(k);
                let (x1, x2) = (x1.f64() / r0.f64(), x2.f64() / r0.f64());
                let mut v = noise * rng.gen_range(-1.0..1.0);
                for &(a, k1, k2, ph) in &modes {
                    v += a * (pi / 2.0 * (k1 * x1 + k2 * x2) + ph).sin();
                }
                T::of(v)
            })
            .collect();
        remove_mean(&domain, &mut h);
        max_ratio = max_ratio.max(poincare_ratio(&op, &h));
    }
    let bound = poincare_bound(r0.f64(), profile.moment(2).f64(), profile.dimension);
    Ok(PoincareReport {
        r0: r0.f64(),
        epsilon: profile.scale.f64(),
        spacing: stencil.spacing.f64(),
        samples,
        max_ratio: max_ratio.f64(),
        bound,
        holds: max_ratio.f64() <= 1.1 * bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_obstacle_mask, ObstacleSpec};
    use crate::nonlinearity::{make_cubic_bistable, Nonlinearity};

    fn setup(
        eps: f64,
        h: f64,
        aux: Nonlinearity<f64>,
    ) -> (OperatorContext<f64>, PotentialData<f64>) {
        let profile = KernelProfile::tent(2, 0.5).rescale(eps).unwrap();
        let st = KernelStencil::discretize(&profile, h).unwrap();
        let d = build_obstacle_mask(&ObstacleSpec::<f64>::none(), 0.6, h, st.support()).unwrap();
        let op = OperatorContext::assemble(&st, &d, OperatorMode::Euclidean).unwrap();
        (op, PotentialData::new(aux, eps))
    }

    #[test]
    fn table_matches_quadrature() {
        let f = make_cubic_bistable(0.45, 0.5).unwrap();
        let p = PotentialData::new(Nonlinearity::Cubic(f), 0.2);
        let t = GTable::build(&p, -2.5, 3.5, 1e-4);
        for x in [-2.3, -0.51234, 0.0, 0.3, 0.7777, 1.0, 2.9] {
            assert!((t.eval(x).unwrap() - p.big_g(x)).abs() < 1e-13, "{x}");
        }
        assert_eq!(t.eval(0.0), Some(0.0));
    }

    #[test]
    fn zero_field_has_zero_energy_and_gradient() {
        let f = make_cubic_bistable(0.45, 0.5).unwrap();
        let (op, p) = setup(0.2, 0.02, Nonlinearity::Cubic(f));
        let ctx = EnergyContext::new(&op, p, 0.3).unwrap();
        let z = Field::zeros(op.domain.n);
        assert_eq!(ctx.energy(&z).unwrap(), 0.0);
        assert!(ctx
            .energy_gradient(&z)
            .unwrap()
            .values
            .iter()
            .all(|v| v.abs() < 1e-18));
    }

    #[test]
    fn zero_potential_minimizer_hits_the_sphere() {
        let (op, p) = setup(0.2, 0.02, Nonlinearity::Zero { theta: 0.45 });
        let ctx = EnergyContext::new(&op, p, 0.3).unwrap();
        let w0 = ctx.w0(0.15);
        let r = 0.5 * ctx.norm(&w0.values);
        let opts = MinimizeOptions {
            radius: r,
            step: None,
            grad_tol: 1e-12,
            max_iterations: 20_000,
        };
        let err = minimize_in_ball(&ctx, &w0, &opts).unwrap_err();
        assert!(matches!(err, Error::Barrier(_)), "{err}");
    }

    #[test]
    fn poincare_bound_formula() {
        let (r0, eps) = (0.12, 0.05);
        let m2 = 3.0 / 40.0 * eps * eps;
        let expect = 8.0 * (4.0 * r0 * r0 / std::f64::consts::PI.powi(2)) / (0.5 * m2);
        assert!((poincare_bound(r0, m2, 2) - expect).abs() < 1e-9 * expect);
    }
}
