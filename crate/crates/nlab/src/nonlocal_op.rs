//! Masked nonlocal operators on the grid: `Lu(x) = sum_y w(x,y) (u(y) - u(x))` over active `y`.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft2::Convolver;
use crate::field::Field;
use crate::geometry::{geodesic_distances, line_of_sight, GridDomain};
use crate::kernels::KernelStencil;
use crate::nonlinearity::Nonlinearity;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase")]
pub enum OperatorMode {
    #[default]
    Euclidean,
    Geodesic,
}

/// Sparse per-row weight corrections `w_g - w_e` for pairs without line of sight.
#[derive(Debug, Clone, Default)]
pub struct Corrections<T> {
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<T>,
}

impl<T: Scalar> Corrections<T> {
    fn empty(len: usize) -> Self {
        Corrections {
            row_ptr: vec![0; len + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn row(&self, k: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let (a, b) = (self.row_ptr[k], self.row_ptr[k + 1]);
        self.cols[a..b]
            .iter()
            .copied()
            .zip(self.vals[a..b].iter().copied())
    }

    /// Number of stored pairs.
    pub fn nnz(&self) -> usize {
        self.cols.len()
    }
}

#[derive(Debug)]
pub struct OperatorContext<T: Scalar> {
    pub stencil: KernelStencil<T>,
    pub domain: GridDomain<T>,
    pub mode: OperatorMode,
    /// `J(x)`: total weight reaching active cells inside the box (0 on inactive cells).
    pub mass: Vec<T>,
    /// Weight leaving the box; only far-collar cells have any.
    pub outside_mass: Vec<T>,
    pub corrections: Corrections<T>,
    convolver: Convolver<T>,
}

/// Outcome of the check `max f_eps' < min J` over the unknown cells.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ContinuityCheck {
    pub min_mass: f64,
    pub max_deriv: f64,
    pub holds: bool,
}

impl<T: Scalar> OperatorContext<T> {
    pub fn assemble(
        stencil: &KernelStencil<T>,
        domain: &GridDomain<T>,
        mode: OperatorMode,
    ) -> Result<Self> {
        if domain.dimension != 2 {
            return Err(Error::Domain("operators are assembled on 2D grids".into()));
        }
        if (stencil.spacing - domain.spacing).abs() > T::of(1e-9) * domain.spacing {
            return Err(Error::Shape(format!(
                "stencil spacing {} differs from grid spacing {}",
                stencil.spacing, domain.spacing
            )));
        }
        let len = domain.len();
        let corrections = match mode {
            OperatorMode::Euclidean => Corrections::empty(len),
            OperatorMode::Geodesic => geodesic_corrections(stencil, domain)?,
        };
        let convolver = Convolver::new(stencil.dense(), stencil.radius_cells, domain.n);
        let mut ctx = OperatorContext {
            stencil: stencil.clone(),
            domain: domain.clone(),
            mode,
            mass: Vec::new(),
            outside_mass: Vec::new(),
            corrections,
            convolver,
        };
        let ind: Vec<T> = (0..len)
            .map(|k| {
                if domain.active[k] {
                    T::one()
                } else {
                    T::zero()
                }
            })
            .collect();
        let mut mass = ctx.weighted_sum_direct(&ind);
        let mut outside = vec![T::zero(); len];
        let n = domain.n as i64;
        for k in 0..len {
            if !domain.active[k] {
                mass[k] = T::zero();
                continue;
            }
            let (i, j) = domain.ij(k);
            if i >= domain.collar
                && j >= domain.collar
                && i + domain.collar < domain.n
                && j + domain.collar < domain.n
            {
                continue;
            }
            let mut s = T::zero();
            for (o, w) in stencil.offsets.iter().zip(&stencil.weights) {
                let (a, b) = (i as i64 + o.0 as i64, j as i64 + o.1 as i64);
                if a < 0 || b < 0 || a >= n || b >= n {
                    s += *w;
                }
            }
            outside[k] = s;
        }
        ctx.mass = mass;
        ctx.outside_mass = outside;
        Ok(ctx)
    }

    pub fn len(&self) -> usize {
        self.domain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domain.is_empty()
    }

    fn indicator(&self) -> Vec<T> {
        self.domain
            .active
            .iter()
            .map(|&a| if a { T::one() } else { T::zero() })
            .collect()
    }

    /// `S v(x) = sum_y w(x,y) v(y)` over active `y` by direct summation, parallel over rows.
    pub fn weighted_sum_direct(&self, v: &[T]) -> Vec<T> {
        let d = &self.domain;
        let n = d.n;
        let masked: Vec<T> = v
            .iter()
            .zip(&d.active)
            .map(|(&x, &a)| if a { x } else { T::zero() })
            .collect();
        let mut out = vec![T::zero(); d.len()];
        out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            for (o, &w) in self.stencil.offsets.iter().zip(&self.stencil.weights) {
                let a = i as i64 + o.0 as i64;
                if a < 0 || a >= n as i64 {
                    continue;
                }
                let src = &masked[a as usize * n..(a as usize + 1) * n];
                let (lo, hi) = col_range(o.1, n);
                for j in lo..hi {
                    row[j] += w * src[(j as i64 + o.1 as i64) as usize];
                }
            }
        });
        self.add_corrections(&masked, &mut out);
        out
    }

    /// Same as [`Self::weighted_sum_direct`] through the FFT path.
    pub fn weighted_sum(&self, v: &[T]) -> Vec<T> {
        let d = &self.domain;
        let masked: Vec<T> = v
            .iter()
            .zip(&d.active)
            .map(|(&x, &a)| if a { x } else { T::zero() })
            .collect();
        let mut out = self.convolver.convolve(&masked);
        self.add_corrections(&masked, &mut out);
        out
    }

    fn add_corrections(&self, masked: &[T], out: &mut [T]) {
        if self.corrections.nnz() == 0 {
            return;
        }
        for (k, o) in out.iter_mut().enumerate() {
            for (q, dw) in self.corrections.row(k) {
                *o += dw * masked[q];
            }
        }
    }

    /// Direct difference form; exact zero wherever `u` is constant on the reachable cells.
    pub fn apply(&self, u: &Field<T>) -> Result<Field<T>> {
        u.check_shape(&self.domain)?;
        let d = &self.domain;
        let n = d.n;
        let ind = self.indicator();
        let vals = &u.values;
        let masked: Vec<T> = vals
            .iter()
            .zip(&d.active)
            .map(|(&x, &a)| if a { x } else { T::zero() })
            .collect();
        let mut out = vec![T::zero(); d.len()];
        out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let here = &vals[i * n..(i + 1) * n];
            for (o, &w) in self.stencil.offsets.iter().zip(&self.stencil.weights) {
                let a = i as i64 + o.0 as i64;
                if a < 0 || a >= n as i64 {
                    continue;
                }
                let r = a as usize * n;
                let (lo, hi) = col_range(o.1, n);
                for j in lo..hi {
                    let q = r + (j as i64 + o.1 as i64) as usize;
                    row[j] += w * (masked[q] - ind[q] * here[j]);
                }
            }
        });
        for k in 0..d.len() {
            if !d.active[k] {
                out[k] = T::zero();
                continue;
            }
            for (q, dw) in self.corrections.row(k) {
                out[k] += dw * (vals[q] - vals[k]);
            }
        }
        Ok(Field { n, values: out })
    }

    /// `apply` plus the pinned far-field term `c(x) (1 - u(x))`.
    pub fn apply_pinned(&self, u: &Field<T>) -> Result<Field<T>> {
        let mut out = self.apply(u)?;
        for k in 0..out.len() {
            if self.domain.active[k] {
                out.values[k] += self.outside_mass[k] * (T::one() - u.values[k]);
            }
        }
        Ok(out)
    }

    /// FFT evaluation `S u - J u`.
    pub fn apply_fast(&self, u: &Field<T>) -> Result<Field<T>> {
        u.check_shape(&self.domain)?;
        let s = self.weighted_sum(&u.values);
        let values = (0..self.len())
            .map(|k| {
                if self.domain.active[k] {
                    s[k] - self.mass[k] * u.values[k]
                } else {
                    T::zero()
                }
            })
            .collect();
        Ok(Field { n: u.n, values })
    }

    /// `Lu + f(u)` on active non-far cells, zero elsewhere.
    pub fn residual(&self, u: &Field<T>, f: &Nonlinearity<T>) -> Result<Field<T>> {
        let mut r = self.apply(u)?;
        for k in 0..r.len() {
            r.values[k] = if self.domain.interior(k) {
                r.values[k] + f.eval(u.values[k])
            } else {
                T::zero()
            };
        }
        Ok(r)
    }

    /// Nonzero weights of row `k` as `(cell, weight)`, sorted by cell.
    pub fn row_weights(&self, k: usize) -> Vec<(usize, T)> {
        let d = &self.domain;
        if !d.active[k] {
            return Vec::new();
        }
        let mut row: Vec<(usize, T)> = Vec::new();
        for (o, &w) in self.stencil.offsets.iter().zip(&self.stencil.weights) {
            if let Some(q) = d.offset(k, o.0, o.1) {
                if d.active[q] {
                    row.push((q, w));
                }
            }
        }
        row.sort_by_key(|e| e.0);
        for (q, dw) in self.corrections.row(k) {
            if let Ok(p) = row.binary_search_by_key(&q, |e| e.0) {
                row[p].1 += dw;
            }
        }
        row.retain(|e| e.1 != T::zero());
        row
    }

    /// Smallest `J(x)` over unknown cells.
    pub fn min_interior_mass(&self) -> T {
        let mut m = T::infinity();
        for k in 0..self.len() {
            if self.domain.interior(k) {
                m = m.min(self.mass[k]);
            }
        }
        m
    }

    pub fn continuity(&self, max_deriv: T) -> ContinuityCheck {
        let min_mass = self.min_interior_mass();
        ContinuityCheck {
            min_mass: min_mass.f64(),
            max_deriv: max_deriv.f64(),
            holds: max_deriv < min_mass,
        }
    }
}

/// Output columns `j` with `j + dj` inside `0..n`.
fn col_range(dj: i32, n: usize) -> (usize, usize) {
    let lo = if dj < 0 { (-dj) as usize } else { 0 };
    let hi = if dj > 0 {
        n.saturating_sub(dj as usize)
    } else {
        n
    };
    (lo.min(n), hi)
}

/// Active cells within the stencil box of some inactive cell.
fn near_obstacle<T: Scalar>(domain: &GridDomain<T>, m: usize) -> Vec<bool> {
    let n = domain.n;
    let mut pre = vec![0u32; (n + 1) * (n + 1)];
    for i in 0..n {
        for j in 0..n {
            let v = u32::from(!domain.active[i * n + j]);
            pre[(i + 1) * (n + 1) + j + 1] =
                v + pre[i * (n + 1) + j + 1] + pre[(i + 1) * (n + 1) + j] - pre[i * (n + 1) + j];
        }
    }
    (0..n * n)
        .map(|k| {
            if !domain.active[k] {
                return false;
            }
            let (i, j) = (k / n, k % n);
            let (i0, i1) = (i.saturating_sub(m), (i + m + 1).min(n));
            let (j0, j1) = (j.saturating_sub(m), (j + m + 1).min(n));
            pre[i1 * (n + 1) + j1] + pre[i0 * (n + 1) + j0]
                > pre[i0 * (n + 1) + j1] + pre[i1 * (n + 1) + j0]
        })
        .collect()
}

fn geodesic_corrections<T: Scalar>(
    stencil: &KernelStencil<T>,
    domain: &GridDomain<T>,
) -> Result<Corrections<T>> {
    let near = near_obstacle(domain, stencil.radius_cells);
    let sources: Vec<usize> = (0..domain.len()).filter(|&k| near[k]).collect();
    let support = stencil.support();
    let per_source: Vec<Result<Vec<(usize, usize, T)>>> = sources
        .par_iter()
        .map(|&x| {
            let mut blocked = Vec::new();
            for o in &stencil.offsets {
                if let Some(y) = domain.offset(x, o.0, o.1) {
                    if y != x && domain.active[y] && !line_of_sight(domain, x, y) {
                        blocked.push(y);
                    }
                }
            }
            if blocked.is_empty() {
                return Ok(Vec::new());
            }
            let field = geodesic_distances(domain, x, support)?;
            Ok(blocked.into_iter().map(|y| (x, y, field.get(y))).collect())
        })
        .collect();
    let mut pair: HashMap<(usize, usize), T> = HashMap::new();
    for r in per_source {
        for (x, y, d) in r? {
            let key = (x.min(y), x.max(y));
            let e = pair.entry(key).or_insert(d);
            *e = e.min(d);
        }
    }
    let mut entries: Vec<(usize, usize, T)> = Vec::with_capacity(2 * pair.len());
    for (&(a, b), &d) in &pair {
        let (ai, aj) = domain.ij(a);
        let (bi, bj) = domain.ij(b);
        let we = stencil.weight_at(bi as i32 - ai as i32, bj as i32 - aj as i32);
        let wg = if d.is_finite() {
            stencil.weight_for_distance(d)
        } else {
            T::zero()
        };
        let dw = wg - we;
        entries.push((a, b, dw));
        entries.push((b, a, dw));
    }
    entries.sort_by(|p, q| (p.0, p.1).cmp(&(q.0, q.1)));
    let mut c = Corrections::empty(domain.len());
    for &(a, b, dw) in &entries {
        c.row_ptr[a + 1] += 1;
        c.cols.push(b);
        c.vals.push(dw);
    }
    for k in 0..domain.len() {
        c.row_ptr[k + 1] += c.row_ptr[k];
    }
    Ok(c)
}
