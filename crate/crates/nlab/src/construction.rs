//! The ordered pair: super-solution from the auxiliary minimizer, sub-solution from a 1D front.

use serde::Serialize;

use crate::energy::{EnergyContext, MinimizerReport};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::geometry::GridDomain;
use crate::nonlinearity::Nonlinearity;
use crate::nonlocal_op::OperatorContext;
use crate::scalar::Scalar;

/// `2 h (int |grad J|) / eps + 1e-8`.
pub fn residual_tolerance(h: f64, epsilon: f64, grad_l1: f64) -> f64 {
    2.0 * h * grad_l1 / epsilon + 1e-8
}

/// Signed residual extremes of a candidate field over the unknown cells.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ResidualCheck {
    pub max: f64,
    pub min: f64,
    pub tol: f64,
    pub ok: bool,
}

fn residual_extremes<T: Scalar>(
    op: &OperatorContext<T>,
    u: &Field<T>,
    f: &Nonlinearity<T>,
) -> Result<(f64, f64)> {
    let r = op.residual(u, f)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..r.len() {
        if op.domain.interior(k) {
            lo = lo.min(r.values[k].f64());
            hi = hi.max(r.values[k].f64());
        }
    }
    Ok((hi, lo))
}

/// `max (L u + f(u)) <= tol`.
pub fn check_super<T: Scalar>(
    op: &OperatorContext<T>,
    u: &Field<T>,
    f: &Nonlinearity<T>,
    tol: f64,
) -> Result<ResidualCheck> {
    let (max, min) = residual_extremes(op, u, f)?;
    Ok(ResidualCheck {
        max,
        min,
        tol,
        ok: max <= tol,
    })
}

/// `min (L u + f(u)) >= -tol`.
pub fn check_sub<T: Scalar>(
    op: &OperatorContext<T>,
    u: &Field<T>,
    f: &Nonlinearity<T>,
    tol: f64,
) -> Result<ResidualCheck> {
    let (max, min) = residual_extremes(op, u, f)?;
    Ok(ResidualCheck {
        max,
        min,
        tol,
        ok: min >= -tol,
    })
}

/// `u = 1 - v` on `Omega` from the energy minimizer.
#[derive(Debug, Clone)]
pub struct AuxiliarySolution<T> {
    pub u: Field<T>,
    pub min: f64,
    pub max: f64,
    pub stationarity: f64,
}

pub fn solve_auxiliary<T: Scalar>(
    ctx: &EnergyContext<'_, T>,
    report: &MinimizerReport<T>,
) -> Result<AuxiliarySolution<T>> {
    if !report.converged || !report.interior {
        return Err(Error::Construction(
            "auxiliary minimizer is not a converged interior point".into(),
        ));
    }
    let d = ctx.domain();
    let u = Field::from_fn(d, |k| {
        if ctx.omega[k] {
            T::one() - report.v.values[k]
        } else {
            T::one()
        }
    });
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..u.len() {
        if ctx.omega[k] {
            lo = lo.min(u.values[k].f64());
            hi = hi.max(u.values[k].f64());
        }
    }
    if !(lo > 0.0 && hi <= 1.0) {
        return Err(Error::Construction(format!(
            "auxiliary solution leaves (0, 1]: range [{lo}, {hi}]"
        )));
    }
    Ok(AuxiliarySolution {
        u,
        min: lo,
        max: hi,
        stationarity: report.stationarity,
    })
}

/// `min_x J(x) - max_s h'(s)` over unknown cells and 101 samples of `s` in `[0,1]`, `h` the scaled reaction.
pub fn coercivity_margin<T: Scalar>(op: &OperatorContext<T>, reaction: &Nonlinearity<T>) -> T {
    let mut top = T::neg_infinity();
    for i in 0..=100 {
        top = top.max(reaction.deriv(T::idx(i) / T::of(100.0)));
    }
    op.min_interior_mass() - top
}

/// `sigma_eps = eps * margin / int |grad J|`.
pub fn sigma_eps<T: Scalar>(epsilon: T, margin: T, grad_l1: T) -> T {
    epsilon * margin / grad_l1
}

#[derive(Debug, Clone)]
pub struct SuperSolution<T> {
    pub field: Field<T>,
    pub sigma: T,
    pub sigma_eps: T,
    pub radius: T,
}

/// `min{u(P_R x) + |x - P_R x| / sigma, 1}` outside `B_R`, `u` inside, 1 on the far collar.
/// `u(P_R x)` is read from the cell containing `(R - h) x / |x|`.
pub fn extend_super_solution<T: Scalar>(
    domain: &GridDomain<T>,
    omega: &[bool],
    u: &Field<T>,
    radius: T,
    sigma: T,
    sigma_eps: T,
) -> Result<SuperSolution<T>> {
    if !(sigma_eps > T::zero()) {
        return Err(Error::Continuity(format!(
            "sigma_eps = {sigma_eps} is not positive"
        )));
    }
    if !(sigma > T::zero() && sigma < sigma_eps) {
        return Err(Error::Parameter(format!(
            "sigma = {sigma} must lie in (0, sigma_eps = {sigma_eps})"
        )));
    }
    u.check_shape(domain)?;
    let h = domain.spacing;
    let mut values = vec![T::zero(); domain.len()];
    for k in 0..domain.len() {
        if !domain.active[k] {
            continue;
        }
        if domain.far[k] {
            values[k] = T::one();
            continue;
        }
        if omega[k] {
            values[k] = u.values[k];
            continue;
        }
        let (x1, x2) = domain.center(k);
        let r = (x1 * x1 + x2 * x2).sqrt();
        if r < radius {
            return Err(Error::Construction(format!(
                "active cell at |x| = {r} < R lies outside Omega"
            )));
        }
        let t = (radius - h) / r;
        let q = domain
            .locate(x1 * t, x2 * t)
            .filter(|&q| omega[q])
            .ok_or_else(|| {
                Error::Construction(format!(
                    "no Omega cell under the projection of ({x1}, {x2})"
                ))
            })?;
        values[k] = (u.values[q] + (r - radius) / sigma).min(T::one());
    }
    Ok(SuperSolution {
        field: Field {
            n: domain.n,
            values,
        },
        sigma,
        sigma_eps,
        radius,
    })
}

/// 0 on `B_R0`, 1 on the rest of the active set: the exact solution for an annulus wider than the support.
pub fn trivial_annulus_field<T: Scalar>(domain: &GridDomain<T>, r0: T) -> Field<T> {
    Field::from_fn(domain, |k| {
        let (x1, x2) = domain.center(k);
        if domain.active[k] && (x1 * x1 + x2 * x2).sqrt() >= r0 {
            T::one()
        } else {
            T::zero()
        }
    })
}

/// 1 on active cells.
pub fn one_field<T: Scalar>(domain: &GridDomain<T>) -> Field<T> {
    Field::from_fn(domain, |k| {
        if domain.active[k] {
            T::one()
        } else {
            T::zero()
        }
    })
}

#[derive(Debug, Clone, Copy)]
pub struct FrontOptions {
    /// Half-width of the line in units of the kernel support divided by eps.
    pub widths: f64,
    /// Stop when the re-translated profile moves less than this per step.
    pub tol: f64,
    pub max_steps: usize,
    pub dt: f64,
}

impl Default for FrontOptions {
    fn default() -> Self {
        FrontOptions {
            widths: 40.0,
            tol: 1e-11,
            max_steps: 400_000,
            dt: 1.0,
        }
    }
}

/// Monotone profile on `x_i = (i - center) h` with `phi(0) = 0`, joining `left` to 1.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TravelingFront<T> {
    pub spacing: T,
    pub center: usize,
    #[serde(skip)]
    pub phi: Vec<T>,
    pub speed: T,
    pub left: T,
    pub steps: usize,
    pub residual: T,
    pub monotone: bool,
    pub endpoint_error: T,
}

impl<T: Scalar> TravelingFront<T> {
    pub fn x(&self, i: usize) -> T {
        (T::idx(i) - T::idx(self.center)) * self.spacing
    }

    /// Value at grid offset `i` cells from the pinned zero, clamped to the end values beyond the line.
    pub fn at_offset(&self, i: i64) -> T {
        let p = self.center as i64 + i;
        if p < 0 {
            self.left
        } else if p as usize >= self.phi.len() {
            T::one()
        } else {
            self.phi[p as usize]
        }
    }

    /// `L phi + f(phi) - c phi'` with centred differences, away from the clamped ends.
    pub fn residual_profile(&self, kernel: &[T], f: &Nonlinearity<T>) -> Vec<T> {
        let m = kernel.len() / 2;
        let lphi = apply_line(&self.phi, kernel, self.left);
        let n = self.phi.len();
        (0..n)
            .map(|i| {
                if i < m + 1 || i + m + 1 >= n {
                    return T::zero();
                }
                let d = (self.phi[i + 1] - self.phi[i - 1]) / (T::of(2.0) * self.spacing);
                lphi[i] + f.eval(self.phi[i]) - self.speed * d
            })
            .collect()
    }
}

/// `sum_o k(o) (psi(i+o) - psi(i))`, values beyond the ends clamped to `left` and 1.
fn apply_line<T: Scalar>(psi: &[T], kernel: &[T], left: T) -> Vec<T> {
    let m = (kernel.len() / 2) as i64;
    let n = psi.len() as i64;
    (0..n)
        .map(|i| {
            let mut s = T::zero();
            for (a, &w) in kernel.iter().enumerate() {
                let j = i + a as i64 - m;
                let v = if j < 0 {
                    left
                } else if j >= n {
                    T::one()
                } else {
                    psi[j as usize]
                };
                s += w * (v - psi[i as usize]);
            }
            s
        })
        .collect()
}

/// Phase-pinned explicit relaxation of `psi_t = L psi + f(psi)` on a line.
/// `f` is the scaled reaction, `kernel` the marginal weights centred at index `len/2`.
pub fn solve_front_1d<T: Scalar>(
    f: &Nonlinearity<T>,
    left: T,
    kernel: &[T],
    h: T,
    half_width: T,
    opts: &FrontOptions,
) -> Result<TravelingFront<T>> {
    if kernel.len() % 2 == 0 {
        return Err(Error::Shape("line kernel must have odd length".into()));
    }
    if !(left <= T::zero()) {
        return Err(Error::Front(format!("left state {left} must be <= 0")));
    }
    let center = (half_width / h)
        .ceil()
        .to_usize()
        .unwrap_or(0)
        .max(kernel.len());
    let n = 2 * center + 1;
    let dt = T::of(opts.dt);
    let scale = T::of(0.5);
    let mut psi: Vec<T> = (0..n)
        .map(|i| {
            let x = (T::idx(i) - T::idx(center)) * h;
            left + (T::one() - left) * (T::one() + (x / scale).tanh()) / T::of(2.0)
        })
        .collect();
    retranslate(&mut psi, center, left)?;
    let mut speed = T::zero();
    let mut steps = 0;
    let mut converged = false;
    while steps < opts.max_steps {
        steps += 1;
        let l = apply_line(&psi, kernel, left);
        let mut next: Vec<T> = (0..n)
            .map(|i| psi[i] + dt * (l[i] + f.eval(psi[i])))
            .collect();
        next[0] = left;
        next[n - 1] = T::one();
        let shift = retranslate(&mut next, center, left)?;
        speed = -shift * h / dt;
        let change = (0..n).fold(T::zero(), |m, i| m.max((next[i] - psi[i]).abs()));
        psi = next;
        if change < T::of(opts.tol) {
            converged = true;
            break;
        }
    }
    if !(speed > T::of(opts.tol)) {
        return Err(Error::WaveDirection(format!(
            "front speed {speed} is not positive: the state 1 does not invade (int f_delta <= 0?)"
        )));
    }
    if !converged {
        return Err(Error::Front(format!(
            "front relaxation did not settle in {} steps",
            opts.max_steps
        )));
    }
    let monotone = psi.windows(2).all(|w| w[1] - w[0] >= T::of(-1e-12));
    let endpoint_error = (psi[0] - left).abs().max((psi[n - 1] - T::one()).abs());
    let mut front = TravelingFront {
        spacing: h,
        center,
        phi: psi,
        speed,
        left,
        steps,
        residual: T::zero(),
        monotone,
        endpoint_error,
    };
    let r = front.residual_profile(kernel, f);
    front.residual = r.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if !monotone {
        return Err(Error::Front("relaxed profile is not monotone".into()));
    }
    Ok(front)
}

/// Moves the zero crossing back to `center`; returns the applied shift in cells.
fn retranslate<T: Scalar>(psi: &mut [T], center: usize, left: T) -> Result<T> {
    let n = psi.len();
    let p = (0..n - 1)
        .find(|&i| psi[i] <= T::zero() && psi[i + 1] > T::zero())
        .ok_or_else(|| Error::Front("profile lost its zero crossing".into()))?;
    let frac = -psi[p] / (psi[p + 1] - psi[p]);
    let pos = T::idx(p) + frac;
    let shift = pos - T::idx(center);
    let read = |x: T| -> T {
        let fl = x.floor();
        let t = x - fl;
        let at = |j: i64| {
            if j < 0 {
                left
            } else if j as usize >= n {
                T::one()
            } else {
                psi[j as usize]
            }
        };
        let j = fl.to_i64().unwrap_or(0);
        at(j) * (T::one() - t) + at(j + 1) * t
    };
    let out: Vec<T> = (0..n).map(|i| read(T::idx(i) + shift)).collect();
    psi.copy_from_slice(&out);
    psi[center] = T::zero();
    Ok(shift)
}

/// `max{0, phi(x1 - r0)}` with `r0` a cell-centre abscissa; 1 on the far collar.
pub fn embed_sub_solution<T: Scalar>(
    front: &TravelingFront<T>,
    domain: &GridDomain<T>,
    r0_index: usize,
) -> Field<T> {
    Field::from_fn(domain, |k| {
        if !domain.active[k] {
            return T::zero();
        }
        if domain.far[k] {
            return T::one();
        }
        let (i, _) = domain.ij(k);
        front.at_offset(i as i64 - r0_index as i64).max(T::zero())
    })
}

#[derive(Debug, Clone)]
pub struct SubSolution<T> {
    pub field: Field<T>,
    pub r0: T,
    pub r0_index: usize,
}

/// Smallest cell-centre `r0 >= start` (stepping by one cell) with `u_sub <= u_super`, strict on non-collar
/// cells where `u_super > 0`.
pub fn place_sub_solution<T: Scalar>(
    front: &TravelingFront<T>,
    domain: &GridDomain<T>,
    upper: &Field<T>,
    start: T,
) -> Result<SubSolution<T>> {
    upper.check_shape(domain)?;
    let first = (0..domain.n)
        .find(|&i| domain.coord(i) >= start)
        .ok_or_else(|| {
            Error::Config(format!(
                "sub-solution start r0 = {start} lies beyond the box"
            ))
        })?;
    for i0 in first..domain.n - domain.collar {
        let field = embed_sub_solution(front, domain, i0);
        let ordered = (0..domain.len()).all(|k| {
            if !domain.active[k] {
                return true;
            }
            let (a, b) = (field.values[k], upper.values[k]);
            if domain.far[k] || b <= T::zero() {
                a <= b
            } else {
                a < b
            }
        });
        if ordered {
            return Ok(SubSolution {
                field,
                r0: domain.coord(i0),
                r0_index: i0,
            });
        }
    }
    Err(Error::Config("no shift r0 inside the box orders the sub-solution below the super-solution; enlarge the box".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::{make_cubic_bistable, make_shifted, Cubic};

    fn tent_marginal(m: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..2 * m + 1)
            .map(|i| 1.0 - (i as f64 - m as f64).abs() / (m as f64 + 1.0))
            .collect();
        let z: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / z).collect()
    }

    #[test]
    fn front_for_shifted_cubic() {
        let f = make_cubic_bistable(0.3, 0.5).unwrap();
        let s = make_shifted(&f, 0.05).unwrap();
        let eps = 0.1;
        let nl = Nonlinearity::Shifted(s).scaled(eps * eps);
        let k = tent_marginal(10);
        let front = solve_front_1d(&nl, -0.05, &k, 0.005, 20.0, &FrontOptions::default()).unwrap();
        assert!(front.speed > 0.0);
        assert!(front.monotone);
        assert!(front.endpoint_error < 1e-3);
        assert!(front.residual < 1e-6, "{}", front.residual);
        assert_eq!(front.phi[front.center], 0.0);
    }

    #[test]
    fn balanced_reaction_has_no_invasion() {
        let f = Cubic {
            theta: 0.5,
            amplitude: 0.5,
        };
        let nl = Nonlinearity::Cubic(f).scaled(0.01);
        let k = tent_marginal(4);
        let opts = FrontOptions {
            max_steps: 20_000,
            ..FrontOptions::default()
        };
        let err = solve_front_1d(&nl, 0.0, &k, 0.01, 5.0, &opts).unwrap_err();
        assert!(
            matches!(err, Error::WaveDirection(_) | Error::Front(_)),
            "{err}"
        );
    }

    #[test]
    fn sigma_bound_is_enforced() {
        let d = GridDomain::<f64>::free(8, 1.0, 1);
        let u = Field::constant(8, 0.5);
        let omega = vec![true; 64];
        let err = extend_super_solution(&d, &omega, &u, 0.5, 0.2, 0.1).unwrap_err();
        assert!(matches!(err, Error::Parameter(_)));
    }
}
