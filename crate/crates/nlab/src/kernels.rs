//! Radial dispersal kernels, their moments, rescaling and discretization on a 2D grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::Cubic;
use crate::quad::gauss_legendre;
use crate::scalar::Scalar;
use crate::validation::ValidationReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RadialShape {
    /// `(1 - t/r)_+`
    Tent,
    /// `1_{t < r}`
    Indicator,
}

/// `J(z) = normalization * shape(|z| / support)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelProfile<T> {
    pub shape: RadialShape,
    pub support: T,
    pub dimension: usize,
    pub normalization: T,
    /// The `eps` this profile was rescaled with (1 for the unscaled kernel).
    pub scale: T,
}

/// Surface area of the unit sphere in `R^n`.
pub fn sphere_area(n: usize) -> f64 {
    // 2 pi^{n/2} / Gamma(n/2)
    let half = n as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(half) / gamma_half_integer(n)
}

fn gamma_half_integer(n: usize) -> f64 {
    // Gamma(n/2) by the recursion from Gamma(1) = 1, Gamma(1/2) = sqrt(pi)
    let mut k = n;
    let mut acc = 1.0;
    while k > 2 {
        k -= 2;
        acc *= k as f64 / 2.0;
    }
    if k == 1 {
        acc * std::f64::consts::PI.sqrt()
    } else {
        acc
    }
}

impl<T: Scalar> KernelProfile<T> {
    /// Unit-mass tent kernel of the given support radius.
    pub fn tent(dimension: usize, support: T) -> Self {
        let mut p = KernelProfile {
            shape: RadialShape::Tent,
            support,
            dimension,
            normalization: T::one(),
            scale: T::one(),
        };
        p.normalization = T::of(1.0 / p.mass().f64());
        p
    }

    /// Unit-mass indicator of a ball.
    pub fn indicator(dimension: usize, support: T) -> Self {
        let mut p = KernelProfile {
            shape: RadialShape::Indicator,
            support,
            dimension,
            normalization: T::one(),
            scale: T::one(),
        };
        p.normalization = T::of(1.0 / p.mass().f64());
        p
    }

    pub fn with_normalization(mut self, c: T) -> Self {
        self.normalization = c;
        self
    }

    fn shape_at(&self, t: f64) -> f64 {
        let x = t / self.support.f64();
        match self.shape {
            RadialShape::Tent => (1.0 - x).max(0.0),
            RadialShape::Indicator => {
                if x < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Radial profile value at radius `t`.
    pub fn radial(&self, t: T) -> T {
        self.normalization * T::of(self.shape_at(t.f64().abs()))
    }

    /// `|J'(t)|` on `(0, support)`; zero beyond.
    fn radial_slope(&self, t: f64) -> f64 {
        match self.shape {
            RadialShape::Tent if t < self.support.f64() => {
                self.normalization.f64() / self.support.f64()
            }
            _ => 0.0,
        }
    }

    /// Value jump at the support boundary (zero for a continuous profile).
    fn boundary_jump(&self) -> f64 {
        let r = self.support.f64();
        self.normalization.f64() * self.shape_at(r * (1.0 - 1e-12))
    }

    fn radial_integral<F: Fn(f64) -> f64>(&self, weight: F) -> f64 {
        let n = self.dimension as i32;
        let r = self.support.f64();
        sphere_area(self.dimension) * gauss_legendre(|t| weight(t) * t.powi(n - 1), 0.0, r, 64)
    }

    pub fn mass(&self) -> T {
        let c = self.normalization.f64();
        T::of(self.radial_integral(|t| c * self.shape_at(t)))
    }

    /// `int J(z) |z|^k dz`.
    pub fn moment(&self, k: i32) -> T {
        let c = self.normalization.f64();
        T::of(self.radial_integral(|t| c * self.shape_at(t) * t.powi(k)))
    }

    /// `int |grad J|`; infinite when the profile jumps.
    pub fn grad_l1(&self) -> T {
        if self.boundary_jump() > 1e-6 * self.normalization.f64() {
            return T::infinity();
        }
        T::of(self.radial_integral(|t| self.radial_slope(t)))
    }

    pub fn l2_norm_sq(&self) -> T {
        let c = self.normalization.f64();
        T::of(self.radial_integral(|t| (c * self.shape_at(t)).powi(2)))
    }

    /// `J_eps(z) = eps^{-N} J(z / eps)`.
    pub fn rescale(&self, eps: T) -> Result<Self> {
        if !(eps > T::zero() && eps <= T::one()) {
            return Err(Error::Range(format!("epsilon = {eps} must lie in (0, 1)")));
        }
        let mut p = *self;
        p.support = self.support * eps;
        p.normalization = self.normalization / eps.powi(self.dimension as i32);
        p.scale = self.scale * eps;
        Ok(p)
    }
}

/// Checks the kernel assumptions; errors only on non-finite data.
pub fn validate_kernel<T: Scalar>(profile: &KernelProfile<T>) -> Result<ValidationReport> {
    if !(profile.support.is_finite() && profile.normalization.is_finite()) {
        return Err(Error::InvalidProfile(
            "non-finite profile parameters".into(),
        ));
    }
    if !(profile.support > T::zero()) {
        return Err(Error::InvalidProfile(
            "support radius must be positive".into(),
        ));
    }
    if profile.dimension < 2 {
        return Err(Error::InvalidProfile("dimension must be at least 2".into()));
    }
    let mut r = ValidationReport::default();
    let mass = profile.mass().f64();
    r.push(
        "unit mass",
        (mass - 1.0).abs() <= 1e-10,
        format!("mass = {mass}"),
    );
    let rad = profile.support.f64();
    let n = 10_000;
    let mut monotone = true;
    let mut prev = f64::INFINITY;
    for i in 0..=n {
        let v = profile.radial(T::of(rad * 1.5 * i as f64 / n as f64)).f64();
        if !v.is_finite() {
            return Err(Error::InvalidProfile(format!(
                "non-finite value at sample {i}"
            )));
        }
        if v > prev + 1e-15 * prev.abs().max(1.0) {
            monotone = false;
        }
        prev = v;
    }
    r.push("radially non-increasing", monotone, "sampled on [0, 1.5 r]");
    let outside =
        (0..=100).all(|i| profile.radial(T::of(rad * (1.0 + i as f64 / 50.0))) == T::zero());
    r.push("compact support", outside, format!("r = {rad}"));
    let m1 = profile.moment(1).f64();
    r.push(
        "finite M1",
        m1.is_finite() && m1 > 0.0,
        format!("M1 = {m1}"),
    );
    let g = profile.grad_l1().f64();
    r.push("J in W^{1,1}", g.is_finite(), format!("int |grad J| = {g}"));
    let l2 = profile.l2_norm_sq().f64();
    r.push("J in L^2", l2.is_finite(), format!("||J||^2 = {l2}"));
    Ok(r)
}

/// Kernel-derived constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct KernelMoments<T> {
    pub m1: T,
    pub m2: T,
    pub grad_l1: T,
    pub c_nj: T,
    pub r0_star: T,
}

/// `C_{N,J} = pi^2 M2 / (32 N)`.
pub fn c_nj<T: Scalar>(m2: T, dimension: usize) -> T {
    T::of(std::f64::consts::PI.powi(2)) * m2 / T::of(32.0 * dimension as f64)
}

/// `R0* = sqrt(theta C_{N,J} / (5 C0))`.
pub fn r0_star<T: Scalar>(theta: T, c_nj: T, c0: T) -> T {
    (theta * c_nj / (T::of(5.0) * c0)).sqrt()
}

pub fn compute_moments<T: Scalar>(
    profile: &KernelProfile<T>,
    f: &Cubic<T>,
) -> Result<KernelMoments<T>> {
    let report = validate_kernel(profile)?;
    if !report.all_passed() {
        return Err(Error::InvalidProfile(report.failures().join("; ")));
    }
    if !f.validate().all_passed() {
        return Err(Error::InvalidNonlinearity(
            f.validate().failures().join("; "),
        ));
    }
    let m2 = profile.moment(2);
    let cnj = c_nj(m2, profile.dimension);
    let (_, c0) = f.c0();
    Ok(KernelMoments {
        m1: profile.moment(1),
        m2,
        grad_l1: profile.grad_l1(),
        c_nj: cnj,
        r0_star: r0_star(f.theta, cnj, c0),
    })
}

/// Discretized, mass-renormalized 2D stencil.
#[derive(Debug, Clone)]
pub struct KernelStencil<T> {
    /// Offsets sorted by length, then lexicographically.
    pub offsets: Vec<(i32, i32)>,
    pub weights: Vec<T>,
    pub radius_cells: usize,
    pub spacing: T,
    pub scale_epsilon: T,
    pub profile: KernelProfile<T>,
    /// Raw midpoint sum `sum J(|o| h) h^2` before renormalization.
    pub normalizer: T,
    dense: Vec<T>,
}

impl<T: Scalar> KernelStencil<T> {
    /// Midpoint weights at cell centres inside the support, renormalized to unit sum.
    pub fn discretize(profile: &KernelProfile<T>, h: T) -> Result<Self> {
        if profile.dimension != 2 {
            return Err(Error::Domain("grid stencils are two-dimensional".into()));
        }
        if !(h > T::zero()) {
            return Err(Error::Resolution(format!(
                "spacing h = {h} must be positive"
            )));
        }
        if profile.support < h / T::of(2.0) {
            return Err(Error::Resolution(format!(
                "support radius {} < h/2 = {}: empty stencil",
                profile.support,
                h / T::of(2.0)
            )));
        }
        if profile.support < T::of(3.0) * h * T::of(1.0 - 1e-12) {
            return Err(Error::Resolution(format!(
                "h = {h} too coarse for support {}: need at least 3 cells per radius",
                profile.support
            )));
        }
        let m = (profile.support / h).floor().to_i64().unwrap_or(0).max(0) as i32;
        let cell = h * h;
        let mut items: Vec<((i32, i32), T)> = Vec::new();
        for i in -m..=m {
            for j in -m..=m {
                let d = Self::offset_length(i, j, h);
                let w = profile.radial(d) * cell;
                if w > T::zero() {
                    items.push(((i, j), w));
                }
            }
        }
        items.sort_by(|a, b| {
            let la = a.0 .0 * a.0 .0 + a.0 .1 * a.0 .1;
            let lb = b.0 .0 * b.0 .0 + b.0 .1 * b.0 .1;
            la.cmp(&lb).then(a.0.cmp(&b.0))
        });
        let z: T = items.iter().map(|x| x.1).sum();
        let mut weights: Vec<T> = items.iter().map(|x| x.1 / z).collect();
        let total: T = weights.iter().copied().sum();
        weights[0] += T::one() - total;
        let offsets: Vec<(i32, i32)> = items.iter().map(|x| x.0).collect();
        let width = (2 * m + 1) as usize;
        let mut dense = vec![T::zero(); width * width];
        for (o, w) in offsets.iter().zip(&weights) {
            dense[((o.0 + m) as usize) * width + (o.1 + m) as usize] = *w;
        }
        Ok(KernelStencil {
            offsets,
            weights,
            radius_cells: m as usize,
            spacing: h,
            scale_epsilon: profile.scale,
            profile: *profile,
            normalizer: z,
            dense,
        })
    }

    pub fn offset_length(i: i32, j: i32, h: T) -> T {
        (T::of((i * i + j * j) as f64)).sqrt() * h
    }

    /// Weight for offset `(i, j)`, zero outside the stencil.
    pub fn weight_at(&self, i: i32, j: i32) -> T {
        let m = self.radius_cells as i32;
        if i.abs() > m || j.abs() > m {
            return T::zero();
        }
        let width = (2 * m + 1) as usize;
        self.dense[((i + m) as usize) * width + (j + m) as usize]
    }

    /// Row-major `(2m+1)^2` weight array.
    pub fn dense(&self) -> &[T] {
        &self.dense
    }

    /// Weight a geodesic distance `d` receives: `J(d) h^2 / Z`.
    pub fn weight_for_distance(&self, d: T) -> T {
        self.profile.radial(d) * self.spacing * self.spacing / self.normalizer
    }

    pub fn sum(&self) -> T {
        self.weights.iter().copied().sum()
    }

    /// `sum w(o) |o h|^2`.
    pub fn second_moment(&self) -> T {
        self.offsets
            .iter()
            .zip(&self.weights)
            .map(|(o, w)| *w * T::of((o.0 * o.0 + o.1 * o.1) as f64) * self.spacing * self.spacing)
            .sum()
    }

    /// Marginal onto the first axis: entry `i + m` is `sum_j w(i, j)`.
    pub fn marginal(&self) -> Vec<T> {
        let m = self.radius_cells as i32;
        let mut out = vec![T::zero(); (2 * m + 1) as usize];
        for (o, w) in self.offsets.iter().zip(&self.weights) {
            out[(o.0 + m) as usize] += *w;
        }
        out
    }

    pub fn support(&self) -> T {
        self.profile.support
    }
}
