//! Bistable reaction terms: the cubic `f`, its rescaling, the extension `f~`, the shifted `f_delta`,
//! and the potential data `g`, `G` used by the energy.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad::{adaptive_simpson, golden_max};
use crate::scalar::Scalar;
use crate::validation::ValidationReport;

/// Number of sample points used by every sampled functional inequality.
pub const SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum NonlinearityKind {
    Base,
    Rescaled,
    Extended,
    Shifted,
}

/// `f(s) = a s (1-s)(s-theta)` on `[0,1]`, continued linearly with slopes `f'(0)`, `f'(1)` outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cubic<T> {
    pub theta: T,
    pub amplitude: T,
}

impl<T: Scalar> Cubic<T> {
    pub fn eval(&self, s: T) -> T {
        let (a, th) = (self.amplitude, self.theta);
        if s < T::zero() {
            self.df0() * s
        } else if s > T::one() {
            self.df1() * (s - T::one())
        } else {
            a * s * (T::one() - s) * (s - th)
        }
    }

    pub fn deriv(&self, s: T) -> T {
        if s < T::zero() {
            self.df0()
        } else if s > T::one() {
            self.df1()
        } else {
            self.poly_deriv(s)
        }
    }

    fn poly_deriv(&self, s: T) -> T {
        let (a, th) = (self.amplitude, self.theta);
        let three = T::of(3.0);
        let two = T::of(2.0);
        a * (-three * s * s + two * (T::one() + th) * s - th)
    }

    pub fn df0(&self) -> T {
        -self.amplitude * self.theta
    }

    pub fn df1(&self) -> T {
        -self.amplitude * (T::one() - self.theta)
    }

    pub fn df_theta(&self) -> T {
        self.amplitude * self.theta * (T::one() - self.theta)
    }

    /// `int_0^1 f = a (1/12 - theta/6)`.
    pub fn integral(&self) -> T {
        self.amplitude * (T::of(1.0 / 12.0) - self.theta / T::of(6.0))
    }

    /// `(argmax, C0)` of `f` on `[0,1]` by golden-section search on `[theta, 1]`.
    pub fn c0(&self) -> (T, T) {
        let (x, y) = golden_max(|s| self.eval(T::of(s)).f64(), self.theta.f64(), 1.0, 1e-12);
        (T::of(x), T::of(y))
    }

    /// `max_{[0,1]} f'`, attained at `(1+theta)/3`.
    pub fn max_deriv(&self) -> T {
        self.poly_deriv((T::one() + self.theta) / T::of(3.0))
    }

    /// `min_{[0,1]} f'`, attained at an endpoint.
    pub fn min_deriv(&self) -> T {
        self.df0().min(self.df1())
    }

    /// Sampled check of the bistable assumptions on `[0,1]`.
    pub fn validate(&self) -> ValidationReport {
        let mut r = ValidationReport::default();
        let th = self.theta;
        let zero_tol = T::of(1e-14);
        let zeros = self.eval(T::zero()).abs() <= zero_tol
            && self.eval(th).abs() <= zero_tol
            && self.eval(T::one()).abs() <= zero_tol;
        r.push("zeros at 0, theta, 1", zeros, format!("theta = {th}"));
        let mut sign_ok = true;
        let mut max_d = T::neg_infinity();
        for i in 1..SAMPLES {
            let s = T::idx(i) / T::idx(SAMPLES);
            let v = self.eval(s);
            let expect_neg = s < th;
            let expect_pos = s > th;
            if (expect_neg && v >= T::zero()) || (expect_pos && v <= T::zero()) {
                sign_ok = false;
            }
            max_d = max_d.max(self.deriv(s));
        }
        max_d = max_d.max(self.max_deriv());
        r.push("f < 0 on (0,theta), f > 0 on (theta,1)", sign_ok, "sampled");
        r.push(
            "positive integral",
            self.integral() > T::zero(),
            format!("{}", self.integral()),
        );
        r.push(
            "f'(0) < 0",
            self.df0() < T::zero(),
            format!("{}", self.df0()),
        );
        r.push(
            "f'(theta) > 0",
            self.df_theta() > T::zero(),
            format!("{}", self.df_theta()),
        );
        r.push(
            "f'(1) < 0",
            self.df1() < T::zero(),
            format!("{}", self.df1()),
        );
        r.push(
            "f' < 1 on [0,1]",
            max_d < T::one(),
            format!("max f' = {max_d}"),
        );
        r
    }
}

/// Validated constructor for the cubic bistable nonlinearity.
pub fn make_cubic_bistable<T: Scalar>(theta: T, amplitude: T) -> Result<Cubic<T>> {
    if !(theta > T::zero() && theta < T::of(0.5)) {
        return Err(Error::InvalidNonlinearity(format!(
            "theta = {theta} must lie in (0, 1/2) for a positive integral"
        )));
    }
    if !(amplitude > T::zero()) || !amplitude.is_finite() {
        return Err(Error::InvalidNonlinearity(format!(
            "amplitude = {amplitude} must be positive"
        )));
    }
    let f = Cubic { theta, amplitude };
    let report = f.validate();
    if !report.all_passed() {
        return Err(Error::InvalidNonlinearity(report.failures().join("; ")));
    }
    Ok(f)
}

/// `f~`: linear `-kappa s` below `3 theta/4`, a cubic Hermite bridge up to `theta`, `f` on `[theta,1]`,
/// `f'(1)(s-1)` above 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedNonlinearity<T> {
    pub base: Cubic<T>,
    pub kappa: T,
}

impl<T: Scalar> ExtendedNonlinearity<T> {
    /// Assembles `f~` without running the admissibility checks.
    pub fn from_parts(base: Cubic<T>, kappa: T) -> Self {
        Self { base, kappa }
    }

    fn bridge_ends(&self) -> (T, T) {
        (T::of(0.75) * self.base.theta, self.base.theta)
    }

    pub fn eval(&self, s: T) -> T {
        let (a, b) = self.bridge_ends();
        if s <= a {
            -self.kappa * s
        } else if s < b {
            self.bridge(s).0
        } else if s <= T::one() {
            self.base.eval(s)
        } else {
            self.base.df1() * (s - T::one())
        }
    }

    pub fn deriv(&self, s: T) -> T {
        let (a, b) = self.bridge_ends();
        if s <= a {
            -self.kappa
        } else if s < b {
            self.bridge(s).1
        } else if s <= T::one() {
            self.base.deriv(s)
        } else {
            self.base.df1()
        }
    }

    /// Hermite cubic on `(3 theta/4, theta)` matching `(-kappa 3theta/4, -kappa)` and `(0, f'(theta))`.
    fn bridge(&self, s: T) -> (T, T) {
        let (a, b) = self.bridge_ends();
        let h = b - a;
        let t = (s - a) / h;
        let y0 = -self.kappa * a;
        let d0 = -self.kappa;
        let d1 = self.base.df_theta();
        let (two, three) = (T::of(2.0), T::of(3.0));
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = two * t3 - three * t2 + T::one();
        let h10 = t3 - two * t2 + t;
        let h11 = t3 - t2;
        let v = h00 * y0 + h10 * h * d0 + h11 * h * d1;
        let dh00 = T::of(6.0) * (t2 - t);
        let dh10 = three * t2 - T::of(4.0) * t + T::one();
        let dh11 = three * t2 - two * t;
        let dv = (dh00 * y0 + dh10 * h * d0 + dh11 * h * d1) / h;
        (v, dv)
    }

    /// Sampled admissibility checks for `f~`.
    pub fn check(&self) -> ValidationReport {
        let mut r = ValidationReport::default();
        let f = &self.base;
        let (a, b) = self.bridge_ends();
        let n = SAMPLES;
        let tol = T::of(1e-14);
        let mut ordered = true;
        let mut worst = T::zero();
        let mut max_tilde = T::neg_infinity();
        let mut max_f = T::neg_infinity();
        let mut bridge_nonpos = true;
        for i in 0..=n {
            let s = T::idx(i) / T::idx(n);
            let (ft, fv) = (self.eval(s), f.eval(s));
            if fv > ft + tol {
                ordered = false;
                worst = worst.max(fv - ft);
            }
            max_tilde = max_tilde.max(ft);
            max_f = max_f.max(fv);
            if s > a && s < b && ft > tol {
                bridge_nonpos = false;
            }
        }
        let (_, c0) = f.c0();
        max_f = max_f.max(c0);
        max_tilde = max_tilde.max(self.eval(f.c0().0));
        r.push("f <= f~ on [0,1]", ordered, format!("worst excess {worst}"));
        r.push(
            "max f~ = max f on [0,1]",
            (max_tilde - max_f).abs() <= T::of(1e-12),
            format!("{max_tilde} vs {max_f}"),
        );
        r.push("bridge <= 0", bridge_nonpos, "sampled on (3theta/4, theta)");
        let mut sup_dt = T::neg_infinity();
        for i in 0..=n {
            let s = T::of(-1.0) + T::of(3.0) * T::idx(i) / T::idx(n);
            sup_dt = sup_dt.max(self.deriv(s));
        }
        let sup_f = f.max_deriv();
        r.push(
            "sup f~' <= sup f'",
            sup_dt <= sup_f + T::of(1e-12),
            format!("{sup_dt} vs {sup_f}"),
        );
        let eta = T::of(1e-9);
        let jv = (self.eval(a - eta) - self.eval(a + eta))
            .abs()
            .max((self.eval(b - eta) - self.eval(b + eta)).abs());
        let jd = (self.deriv(a - eta) - self.deriv(a + eta))
            .abs()
            .max((self.deriv(b - eta) - self.deriv(b + eta)).abs());
        r.push(
            "C1 junctions",
            jv <= T::of(1e-7) && jd <= T::of(1e-6),
            format!("value jump {jv}, slope jump {jd}"),
        );
        r.push(
            "kappa > 0",
            self.kappa > T::zero(),
            format!("{}", self.kappa),
        );
        r
    }
}

/// Builds `f~` and rejects it when any sampled admissibility check fails.
pub fn extend_tilde<T: Scalar>(f: &Cubic<T>, kappa: T) -> Result<ExtendedNonlinearity<T>> {
    let ext = ExtendedNonlinearity::from_parts(*f, kappa);
    let report = ext.check();
    if report.all_passed() {
        Ok(ext)
    } else {
        Err(Error::Construction(format!(
            "f~ with kappa = {kappa} is not admissible: {}; reduce kappa",
            report.failures().join("; ")
        )))
    }
}

/// `|f'(0)|/2`, halved until [`extend_tilde`] accepts it.
pub fn default_kappa<T: Scalar>(f: &Cubic<T>) -> Result<T> {
    let mut kappa = f.df0().abs() / T::of(2.0);
    for _ in 0..40 {
        if extend_tilde(f, kappa).is_ok() {
            return Ok(kappa);
        }
        kappa = kappa / T::of(2.0);
    }
    Err(Error::Construction("no admissible kappa found".into()))
}

/// `f_delta = f - mu` with `mu(s) = a theta delta ((theta - s)/(theta + delta))^2` below theta, continued
/// linearly below `-delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftedCubic<T> {
    pub base: Cubic<T>,
    pub delta: T,
}

impl<T: Scalar> ShiftedCubic<T> {
    fn mu(&self, s: T) -> (T, T) {
        let f = &self.base;
        let (th, d) = (f.theta, self.delta);
        let c = f.amplitude * th * d / ((th + d) * (th + d));
        let u = th - s;
        (c * u * u, -T::of(2.0) * c * u)
    }

    /// Slope at `-delta`: `-a theta (theta - delta)/(theta + delta)`.
    pub fn left_slope(&self) -> T {
        let f = &self.base;
        -f.amplitude * f.theta * (f.theta - self.delta) / (f.theta + self.delta)
    }

    pub fn eval(&self, s: T) -> T {
        let f = &self.base;
        if s >= f.theta {
            f.eval(s)
        } else if s >= -self.delta {
            f.eval(s) - self.mu(s).0
        } else {
            self.left_slope() * (s + self.delta)
        }
    }

    pub fn deriv(&self, s: T) -> T {
        let f = &self.base;
        if s >= f.theta {
            f.deriv(s)
        } else if s >= -self.delta {
            f.deriv(s) - self.mu(s).1
        } else {
            self.left_slope()
        }
    }

    /// Sampled check of the conditions required of `f_delta`.
    pub fn check(&self) -> ValidationReport {
        let mut r = ValidationReport::default();
        let f = &self.base;
        let d = self.delta;
        let th = f.theta;
        let n = SAMPLES;
        let mut signs = true;
        let mut below = true;
        let mut max_d = T::neg_infinity();
        let mut integral = T::zero();
        let span = T::one() + d;
        let step = span / T::idx(n);
        for i in 0..=n {
            let s = -d + step * T::idx(i);
            let v = self.eval(s);
            if i > 0 && i < n {
                let interior_neg = s < th - T::of(1e-12);
                let interior_pos = s > th + T::of(1e-12);
                if (interior_neg && v >= T::zero()) || (interior_pos && v <= T::zero()) {
                    signs = false;
                }
            }
            if v > f.eval(s) + T::of(1e-15) {
                below = false;
            }
            max_d = max_d.max(self.deriv(s));
            let w = if i == 0 || i == n {
                T::of(0.5)
            } else {
                T::one()
            };
            integral += w * v * step;
        }
        r.push(
            "zeros only at -delta, theta, 1",
            signs && self.eval(-d).abs() <= T::of(1e-15),
            "sampled",
        );
        r.push("f_delta <= f", below, "sampled on [-delta, 1]");
        r.push(
            "negative slopes at -delta and 1",
            self.deriv(-d) < T::zero() && self.deriv(T::one()) < T::zero(),
            format!("{} and {}", self.deriv(-d), self.deriv(T::one())),
        );
        r.push("f_delta' < 1", max_d < T::one(), format!("{max_d}"));
        r.push(
            "positive integral on [-delta,1]",
            integral > T::zero(),
            format!("{integral}"),
        );
        r
    }
}

/// Largest delta (bisection, relative accuracy 1e-6) for which the shifted construction passes its checks.
pub fn admissible_delta_bound<T: Scalar>(f: &Cubic<T>) -> T {
    let ok = |d: T| ShiftedCubic { base: *f, delta: d }.check().all_passed();
    let mut lo = T::zero();
    let mut hi = f.theta;
    if ok(hi) {
        return hi;
    }
    while hi - lo > T::of(1e-6) * f.theta {
        let mid = T::of(0.5) * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

pub fn make_shifted<T: Scalar>(f: &Cubic<T>, delta: T) -> Result<ShiftedCubic<T>> {
    if !(delta > T::zero() && delta < T::one()) {
        return Err(Error::Construction(format!(
            "delta = {delta} must lie in (0,1)"
        )));
    }
    let bound = admissible_delta_bound(f);
    if delta >= bound {
        return Err(Error::Construction(format!(
            "delta = {delta} exceeds the admissible bound {bound}"
        )));
    }
    let s = ShiftedCubic { base: *f, delta };
    let report = s.check();
    if !report.all_passed() {
        return Err(Error::Construction(report.failures().join("; ")));
    }
    Ok(s)
}

/// A reaction term as used by the operators and solvers.
#[derive(Debug, Clone, PartialEq)]
pub enum Nonlinearity<T> {
    Cubic(Cubic<T>),
    Extended(ExtendedNonlinearity<T>),
    Shifted(ShiftedCubic<T>),
    /// `f = 0`, with a nominal middle zero.
    Zero {
        theta: T,
    },
    /// `factor * inner`, the rescaled `f_eps = eps^2 f` when `factor = eps^2`.
    Scaled {
        inner: Box<Nonlinearity<T>>,
        factor: T,
    },
}

impl<T: Scalar> Nonlinearity<T> {
    pub fn eval(&self, s: T) -> T {
        match self {
            Nonlinearity::Cubic(f) => f.eval(s),
            Nonlinearity::Extended(f) => f.eval(s),
            Nonlinearity::Shifted(f) => f.eval(s),
            Nonlinearity::Zero { .. } => T::zero(),
            Nonlinearity::Scaled { inner, factor } => *factor * inner.eval(s),
        }
    }

    pub fn deriv(&self, s: T) -> T {
        match self {
            Nonlinearity::Cubic(f) => f.deriv(s),
            Nonlinearity::Extended(f) => f.deriv(s),
            Nonlinearity::Shifted(f) => f.deriv(s),
            Nonlinearity::Zero { .. } => T::zero(),
            Nonlinearity::Scaled { inner, factor } => *factor * inner.deriv(s),
        }
    }

    pub fn theta(&self) -> T {
        match self {
            Nonlinearity::Cubic(f) => f.theta,
            Nonlinearity::Extended(f) => f.base.theta,
            Nonlinearity::Shifted(f) => f.base.theta,
            Nonlinearity::Zero { theta } => *theta,
            Nonlinearity::Scaled { inner, .. } => inner.theta(),
        }
    }

    pub fn kind(&self) -> NonlinearityKind {
        match self {
            Nonlinearity::Cubic(_) | Nonlinearity::Zero { .. } => NonlinearityKind::Base,
            Nonlinearity::Extended(_) => NonlinearityKind::Extended,
            Nonlinearity::Shifted(_) => NonlinearityKind::Shifted,
            Nonlinearity::Scaled { .. } => NonlinearityKind::Rescaled,
        }
    }

    pub fn scaled(&self, factor: T) -> Self {
        Nonlinearity::Scaled {
            inner: Box::new(self.clone()),
            factor,
        }
    }

    /// Points where the piecewise definition changes.
    pub fn breakpoints(&self) -> Vec<T> {
        match self {
            Nonlinearity::Cubic(_) => vec![T::zero(), T::one()],
            Nonlinearity::Extended(f) => vec![T::of(0.75) * f.base.theta, f.base.theta, T::one()],
            Nonlinearity::Shifted(f) => vec![-f.delta, T::zero(), f.base.theta, T::one()],
            Nonlinearity::Zero { .. } => vec![],
            Nonlinearity::Scaled { inner, .. } => inner.breakpoints(),
        }
    }

    /// `(min, max)` of the derivative over `[0,1]`, sampled on a fine grid plus the breakpoints.
    pub fn deriv_range(&self) -> (T, T) {
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        let n = 4 * SAMPLES;
        let mut visit = |s: T| {
            let d = self.deriv(s);
            lo = lo.min(d);
            hi = hi.max(d);
        };
        for i in 0..=n {
            visit(T::idx(i) / T::idx(n));
        }
        for b in self.breakpoints() {
            if b >= T::zero() && b <= T::one() {
                visit(b);
            }
        }
        if let Some(c) = self.cubic_part() {
            visit((T::one() + c.theta) / T::of(3.0));
        }
        (lo, hi)
    }

    fn cubic_part(&self) -> Option<&Cubic<T>> {
        match self {
            Nonlinearity::Cubic(f) => Some(f),
            Nonlinearity::Extended(f) => Some(&f.base),
            Nonlinearity::Shifted(f) => Some(&f.base),
            Nonlinearity::Zero { .. } => None,
            Nonlinearity::Scaled { inner, .. } => inner.cubic_part(),
        }
    }
}

impl<T> From<Cubic<T>> for Nonlinearity<T> {
    fn from(f: Cubic<T>) -> Self {
        Nonlinearity::Cubic(f)
    }
}

impl<T> From<ExtendedNonlinearity<T>> for Nonlinearity<T> {
    fn from(f: ExtendedNonlinearity<T>) -> Self {
        Nonlinearity::Extended(f)
    }
}

impl<T> From<ShiftedCubic<T>> for Nonlinearity<T> {
    fn from(f: ShiftedCubic<T>) -> Self {
        Nonlinearity::Shifted(f)
    }
}

/// `g(s) = -h(1-s)` for the auxiliary reaction `h` (normally `f~`), its antiderivative `G`, and the constants
/// read off from them.
#[derive(Debug, Clone)]
pub struct PotentialData<T> {
    pub aux: Nonlinearity<T>,
    pub epsilon: T,
    /// `-h'(0)`, the curvature of `-G` at `t = 1`.
    pub kappa: T,
    pub kappa1: T,
    pub tau0: T,
    breaks: Vec<f64>,
}

impl<T: Scalar> PotentialData<T> {
    pub fn g(&self, s: T) -> T {
        -self.aux.eval(T::one() - s)
    }

    pub fn g_deriv(&self, s: T) -> T {
        self.aux.deriv(T::one() - s)
    }

    pub fn g_eps(&self, s: T) -> T {
        self.epsilon * self.epsilon * self.g(s)
    }

    /// `G(t) = int_0^t g`, adaptive Simpson split at the breakpoints of `g`.
    pub fn big_g(&self, t: T) -> T {
        let t = t.f64();
        let g = |s: f64| self.g(T::of(s)).f64();
        let (lo, hi, sign) = if t >= 0.0 {
            (0.0, t, 1.0)
        } else {
            (t, 0.0, -1.0)
        };
        let mut a = lo;
        let mut total = 0.0;
        for &b in self.breaks.iter().filter(|&&b| b > lo && b < hi) {
            total += adaptive_simpson(&g, a, b, 1e-15);
            a = b;
        }
        total += adaptive_simpson(&g, a, hi, 1e-15);
        T::of(sign * total)
    }

    pub fn big_g_eps(&self, t: T) -> T {
        self.epsilon * self.epsilon * self.big_g(t)
    }

    /// `sup |g_eps'|` over `[-2, 2]`, used for the descent step size.
    pub fn sup_g_eps_deriv(&self) -> T {
        let n = 4 * SAMPLES;
        let mut m = T::zero();
        for i in 0..=n {
            let s = T::of(-2.0) + T::of(4.0) * T::idx(i) / T::idx(n);
            m = m.max(self.g_deriv(s).abs());
        }
        self.epsilon * self.epsilon * m
    }
}

/// Builds the potential and requires `-G(t) >= kappa1 t^2` with `kappa1 > 0`.
pub fn make_potential<T: Scalar>(aux: Nonlinearity<T>, epsilon: T) -> Result<PotentialData<T>> {
    let p = PotentialData::new(aux, epsilon);
    if !(p.kappa1 > T::zero()) {
        return Err(Error::Coercivity(format!(
            "kappa1 = {} <= 0: -G is not coercive",
            p.kappa1
        )));
    }
    Ok(p)
}

impl<T: Scalar> PotentialData<T> {
    /// Computes the constants without the coercivity requirement.
    pub fn new(aux: Nonlinearity<T>, epsilon: T) -> Self {
        let breaks: Vec<f64> = aux.breakpoints().iter().map(|b| 1.0 - b.f64()).collect();
        let kappa = -aux.deriv(T::zero());
        let mut p = PotentialData {
            aux,
            epsilon,
            kappa,
            kappa1: T::zero(),
            tau0: T::zero(),
            breaks,
        };
        let n = 4000;
        let mut k1 = T::infinity();
        for i in 0..=n {
            let t = T::of(-2.0) + T::of(4.0) * T::idx(i) / T::idx(n);
            if t.abs() < T::of(1e-9) {
                continue;
            }
            k1 = k1.min(-p.big_g(t) / (t * t));
        }
        p.kappa1 = k1;
        let g1 = p.big_g(T::one());
        let quad = |t: T| g1 - p.kappa / T::of(2.0) * (t - T::one()) * (t - T::one());
        let step = T::of(1e-4);
        let mut r = T::zero();
        loop {
            let next = r + step;
            if next > T::one() {
                break;
            }
            let ok = [T::one() - next, T::one() + next]
                .iter()
                .all(|&t| (p.big_g(t) - quad(t)).abs() <= T::of(1e-10));
            if !ok {
                break;
            }
            r = next;
        }
        p.tau0 = r;
        p
    }

    /// Breakpoints of `g` in its own variable.
    pub fn g_breaks(&self) -> &[f64] {
        &self.breaks
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_cubic() -> Cubic<f64> {
        make_cubic_bistable(0.3, 0.5).unwrap()
    }

    #[test]
    fn cubic_closed_forms() {
        let f = reference_cubic();
        assert!((f.df0() + 0.15).abs() < 1e-15);
        assert!((f.df1() + 0.35).abs() < 1e-15);
        assert!((f.df_theta() - 0.105).abs() < 1e-15);
        assert_eq!(f.eval(0.3), 0.0);
        // 0.5 (1/12 - 0.3/6)
        assert!((f.integral() - 0.5 * (1.0 / 12.0 - 0.05)).abs() < 1e-15);
    }

    #[test]
    fn c0_matches_stationary_point() {
        let f = reference_cubic();
        let (s, c0) = f.c0();
        // f' = 0  <=>  3 s^2 - 2.6 s + 0.3 = 0, larger root
        let root = (2.6 + (2.6f64 * 2.6 - 3.6).sqrt()) / 6.0;
        assert!((s - root).abs() < 1e-6);
        assert!((c0 - f.eval(root)).abs() < 1e-13);
        assert!((c0 - 0.042_376_6).abs() < 1e-6);
    }

    #[test]
    fn steep_cubic_is_rejected() {
        let e = make_cubic_bistable(0.3, 10.0).unwrap_err();
        assert!(matches!(e, Error::InvalidNonlinearity(_)));
    }

    #[test]
    fn theta_above_half_is_rejected() {
        assert!(make_cubic_bistable(0.6, 0.5).is_err());
    }

    #[test]
    fn tilde_linear_piece_and_tail() {
        let f = reference_cubic();
        let ext = ExtendedNonlinearity::from_parts(f, 0.05);
        assert!((ext.eval(0.1) + 0.005).abs() < 1e-15);
        assert!((ext.eval(1.5) + 0.175).abs() < 1e-15);
        assert_eq!(ext.eval(0.3), 0.0);
    }

    #[test]
    fn large_kappa_breaks_ordering() {
        let f = reference_cubic();
        // -f(s)/s = a (1-s)(theta-s) drops to 0.0290625 at s = 3 theta / 4, and the bridge
        // needs kappa below about 0.0195
        for kappa in [0.05, 0.025] {
            let err = extend_tilde(&f, kappa).unwrap_err();
            assert!(err.to_string().contains("f <= f~"));
        }
        assert!(extend_tilde(&f, 0.019).is_ok());
    }

    #[test]
    fn default_kappa_is_admissible() {
        let f = reference_cubic();
        let k = default_kappa(&f).unwrap();
        assert!(k <= 0.5 * 0.775 * 0.075);
        let ext = extend_tilde(&f, k).unwrap();
        assert!(ext.check().all_passed());
    }

    #[test]
    fn shifted_conditions() {
        let f = reference_cubic();
        let s = make_shifted(&f, 0.05).unwrap();
        assert!(s.eval(-0.05).abs() < 1e-16);
        assert_eq!(s.eval(0.3), 0.0);
        assert_eq!(s.eval(0.9), f.eval(0.9));
        assert!(s.deriv(-0.05) < 0.0);
        assert!(make_shifted(&f, 0.99).is_err());
    }

    #[test]
    fn potential_quadratic_regime_and_coercivity() {
        let f = reference_cubic();
        let k = default_kappa(&f).unwrap();
        let p = make_potential(extend_tilde(&f, k).unwrap().into(), 0.1).unwrap();
        assert_eq!(p.big_g(0.0), 0.0);
        assert!(p.g(1.0).abs() < 1e-16);
        assert!(p.kappa1 > 0.0);
        assert!((p.tau0 - 0.225).abs() < 0.02, "tau0 = {}", p.tau0);
        let ext = extend_tilde(&f, k).unwrap();
        let direct = crate::quad::gauss_legendre(|s| ext.eval(s), 0.0, 1.0, 400);
        assert!((p.big_g(1.0) + direct).abs() < 1e-9);
        assert!(p.big_g(1.0) < 0.0);
    }
}
