//! Computational domain: the truncated box, obstacle masks, region labels and geodesic distances.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ObstacleKind {
    None,
    Ball,
    Annulus,
    ChannelAnnulus,
}

/// Parameters generating the obstacle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleSpec<T> {
    pub kind: ObstacleKind,
    pub r0: T,
    pub r1: T,
    pub epsilon: T,
    /// Channel exponent `N/(N-1)`.
    pub channel_exponent: T,
    /// Depth of the collar near the annulus boundary where the channel flares.
    pub smoothing: T,
}

impl<T: Scalar> ObstacleSpec<T> {
    pub fn none() -> Self {
        Self::with_kind(ObstacleKind::None, T::zero(), T::zero(), T::of(0.5))
    }

    pub fn ball(r0: T) -> Self {
        Self::with_kind(ObstacleKind::Ball, r0, r0, T::of(0.5))
    }

    pub fn annulus(r0: T, r1: T) -> Self {
        Self::with_kind(ObstacleKind::Annulus, r0, r1, T::of(0.5))
    }

    /// Channel-pierced annulus with the default flare depth `eps^gamma / 4`.
    pub fn channel(r0: T, r1: T, epsilon: T) -> Self {
        Self::with_kind(ObstacleKind::ChannelAnnulus, r0, r1, epsilon)
    }

    fn with_kind(kind: ObstacleKind, r0: T, r1: T, epsilon: T) -> Self {
        let gamma = T::of(2.0);
        let smoothing = epsilon.powf(gamma) / T::of(4.0);
        ObstacleSpec {
            kind,
            r0,
            r1,
            epsilon,
            channel_exponent: gamma,
            smoothing,
        }
    }

    /// Inner channel half-width `eps^gamma`.
    pub fn channel_width(&self) -> T {
        self.epsilon.powf(self.channel_exponent)
    }

    /// Channel half-width at radius `r`: `eps^gamma` in the bulk, growing linearly to `2 eps^gamma` at `dA`.
    pub fn channel_half_width(&self, r: T) -> T {
        let w = self.channel_width();
        let d = (r - self.r0).min(self.r1 - r).max(T::zero());
        if self.smoothing > T::zero() && d < self.smoothing {
            w * (T::of(2.0) - d / self.smoothing)
        } else {
            w
        }
    }

    /// Radius beyond which the obstacle is absent.
    pub fn outer_radius(&self) -> T {
        match self.kind {
            ObstacleKind::None => T::zero(),
            ObstacleKind::Ball => self.r0,
            _ => self.r1,
        }
    }

    /// Whether the point lies in `K`.
    pub fn contains(&self, x1: T, x2: T) -> bool {
        let r = (x1 * x1 + x2 * x2).sqrt();
        match self.kind {
            ObstacleKind::None => false,
            ObstacleKind::Ball => r <= self.r0,
            ObstacleKind::Annulus => r >= self.r0 && r <= self.r1,
            ObstacleKind::ChannelAnnulus => {
                if r < self.r0 || r > self.r1 {
                    return false;
                }
                if x1 <= T::zero() {
                    return true;
                }
                x2.abs() >= self.channel_half_width(r)
            }
        }
    }

    /// Admissibility checks on the radii; `r0_star` is required for the channel kind.
    pub fn validate(&self, r0_star: Option<T>, dimension: usize) -> Result<()> {
        let expected = T::of(dimension as f64 / (dimension as f64 - 1.0));
        match self.kind {
            ObstacleKind::None => Ok(()),
            ObstacleKind::Ball => {
                if self.r0 > T::zero() {
                    Ok(())
                } else {
                    Err(Error::Config("ball radius must be positive".into()))
                }
            }
            ObstacleKind::Annulus => {
                if T::zero() < self.r0 && self.r0 < self.r1 {
                    Ok(())
                } else {
                    Err(Error::Config(format!(
                        "annulus needs 0 < R0 < R1, got {} and {}",
                        self.r0, self.r1
                    )))
                }
            }
            ObstacleKind::ChannelAnnulus => {
                if self.channel_exponent != expected {
                    return Err(Error::Config(format!(
                        "channel exponent must equal N/(N-1) = {expected}, got {}",
                        self.channel_exponent
                    )));
                }
                if !(self.r1 > T::of(2.0)) {
                    return Err(Error::Config(format!(
                        "channel annulus needs R1 > 2, got {}",
                        self.r1
                    )));
                }
                if !(self.epsilon > T::zero() && self.epsilon < T::one()) {
                    return Err(Error::Config(format!(
                        "epsilon = {} must lie in (0,1)",
                        self.epsilon
                    )));
                }
                let star = r0_star.ok_or_else(|| Error::Config("R0* unavailable".into()))?;
                if !(self.r0 > T::zero() && self.r0 < star) {
                    return Err(Error::Config(format!(
                        "R0 = {} must lie in (0, R0*) with R0* = {star}",
                        self.r0
                    )));
                }
                if !(self.smoothing > T::zero()
                    && self.smoothing <= self.channel_width() / T::of(4.0) * T::of(1.0 + 1e-12))
                {
                    return Err(Error::Config(format!(
                        "smoothing {} must lie in (0, eps^gamma/4]",
                        self.smoothing
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Uniform grid on `[-W, W]^2`, cell `(i, j)` centred at `(-W + (i+1/2) h, -W + (j+1/2) h)`, index `i n + j`.
#[derive(Debug, Clone)]
pub struct GridDomain<T> {
    pub dimension: usize,
    pub n: usize,
    pub box_half_width: T,
    pub spacing: T,
    pub active: Vec<bool>,
    pub far: Vec<bool>,
    /// Collar thickness in cells (the stencil radius).
    pub collar: usize,
}

impl<T: Scalar> GridDomain<T> {
    /// Obstacle-free box with `n` cells per axis and a collar of `collar` cells.
    pub fn free(n: usize, box_half_width: T, collar: usize) -> Self {
        let spacing = T::of(2.0) * box_half_width / T::idx(n);
        let mut d = GridDomain {
            dimension: 2,
            n,
            box_half_width,
            spacing,
            active: vec![true; n * n],
            far: vec![false; n * n],
            collar,
        };
        d.far = (0..n * n).map(|k| d.in_collar(k)).collect();
        d
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn coord(&self, i: usize) -> T {
        -self.box_half_width + (T::idx(i) + T::of(0.5)) * self.spacing
    }

    pub fn center(&self, k: usize) -> (T, T) {
        (self.coord(k / self.n), self.coord(k % self.n))
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k / self.n, k % self.n)
    }

    pub fn cell_volume(&self) -> T {
        self.spacing * self.spacing
    }

    fn in_collar(&self, k: usize) -> bool {
        let (i, j) = self.ij(k);
        let c = self.collar;
        i < c || j < c || i + c >= self.n || j + c >= self.n
    }

    /// Active cells strictly inside the collar (the unknowns of every solve).
    pub fn interior(&self, k: usize) -> bool {
        self.active[k] && !self.far[k]
    }

    /// Neighbour at offset `(di, dj)` inside the box.
    pub fn offset(&self, k: usize, di: i32, dj: i32) -> Option<usize> {
        let (i, j) = self.ij(k);
        let a = i as i64 + di as i64;
        let b = j as i64 + dj as i64;
        if a < 0 || b < 0 || a >= self.n as i64 || b >= self.n as i64 {
            None
        } else {
            Some(a as usize * self.n + b as usize)
        }
    }

    /// Cell containing the point, if inside the box.
    pub fn locate(&self, x1: T, x2: T) -> Option<usize> {
        let i = ((x1 + self.box_half_width) / self.spacing).floor();
        let j = ((x2 + self.box_half_width) / self.spacing).floor();
        let nn = T::idx(self.n);
        if i < T::zero() || j < T::zero() || i >= nn || j >= nn {
            return None;
        }
        Some(self.index(i.to_usize()?, j.to_usize()?))
    }

    /// Mask as bytes, 255 for active and 0 for obstacle cells; row `j` from the top, column `i`.
    pub fn mask_bytes(&self) -> Vec<u8> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * n);
        for row in 0..n {
            let j = n - 1 - row;
            for i in 0..n {
                out.push(if self.active[self.index(i, j)] {
                    255
                } else {
                    0
                });
            }
        }
        out
    }

    /// Rasterized reflection `x2 -> -x2`.
    pub fn reflect_transverse(&self, k: usize) -> usize {
        let (i, j) = self.ij(k);
        self.index(i, self.n - 1 - j)
    }
}

/// Rasterizes the obstacle. `support` is the kernel support radius (sets the far collar and box checks).
pub fn build_obstacle_mask<T: Scalar>(
    spec: &ObstacleSpec<T>,
    box_half_width: T,
    h: T,
    support: T,
) -> Result<GridDomain<T>> {
    if !(h > T::zero()) {
        return Err(Error::Resolution("spacing must be positive".into()));
    }
    if spec.kind == ObstacleKind::ChannelAnnulus
        && h > spec.channel_width() / T::of(4.0) * T::of(1.0 + 1e-9)
    {
        return Err(Error::Resolution(format!(
            "h = {h} exceeds eps^gamma/4 = {}: channel thinner than 4 cells",
            spec.channel_width() / T::of(4.0)
        )));
    }
    let min_w = spec.outer_radius() + T::of(4.0) * support;
    if box_half_width < min_w * T::of(1.0 - 1e-12) {
        return Err(Error::Config(format!(
            "box half-width {box_half_width} < R1 + 4 supports = {min_w}"
        )));
    }
    let n = (T::of(2.0) * box_half_width / h)
        .round()
        .to_usize()
        .unwrap_or(0);
    if n < 8 {
        return Err(Error::Resolution(format!("only {n} cells per axis")));
    }
    let w = T::idx(n) * h / T::of(2.0);
    let collar = (support / h).floor().to_usize().unwrap_or(0);
    let mut d = GridDomain::free(n, w, collar);
    for k in 0..d.len() {
        let (x1, x2) = d.center(k);
        d.active[k] = !spec.contains(x1, x2);
    }
    for k in 0..d.len() {
        if d.far[k] && !d.active[k] {
            return Err(Error::Config(
                "obstacle reaches the far-field collar; enlarge the box".into(),
            ));
        }
        d.far[k] = d.far[k] && d.active[k];
    }
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Region {
    InnerBall,
    Channel,
    OuterField,
    Obstacle,
}

pub fn classify_regions<T: Scalar>(domain: &GridDomain<T>, spec: &ObstacleSpec<T>) -> Vec<Region> {
    let w = spec.channel_width();
    (0..domain.len())
        .map(|k| {
            if !domain.active[k] {
                return Region::Obstacle;
            }
            let (x1, x2) = domain.center(k);
            if (x1 * x1 + x2 * x2).sqrt() < spec.r0 {
                Region::InnerBall
            } else if spec.kind == ObstacleKind::ChannelAnnulus
                && spec.r0 < x1
                && x1 < spec.r1
                && x2.abs() < w
            {
                Region::Channel
            } else {
                Region::OuterField
            }
        })
        .collect()
}

/// Whether `a` and `b` reach each other: from `a` by flood fill over 8-neighbours of active cells.
pub fn connected<T: Scalar>(domain: &GridDomain<T>, a: usize, b: usize) -> bool {
    if !domain.active[a] || !domain.active[b] {
        return false;
    }
    let mut seen = vec![false; domain.len()];
    let mut stack = vec![a];
    seen[a] = true;
    while let Some(k) = stack.pop() {
        if k == b {
            return true;
        }
        for di in -1..=1 {
            for dj in -1..=1 {
                if let Some(q) = domain.offset(k, di, dj) {
                    if domain.active[q] && !seen[q] {
                        seen[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
    }
    false
}

/// Segment between the two cell centres stays in active cells. Traversal always starts at the lower index,
/// and a corner crossing requires both side cells to be active, so the relation is symmetric.
pub fn line_of_sight<T: Scalar>(domain: &GridDomain<T>, a: usize, b: usize) -> bool {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    let (ai, aj) = domain.ij(a);
    let (bi, bj) = domain.ij(b);
    let (ai, aj, bi, bj) = (ai as i64, aj as i64, bi as i64, bj as i64);
    let n = domain.n as i64;
    let act =
        |i: i64, j: i64| i >= 0 && j >= 0 && i < n && j < n && domain.active[(i * n + j) as usize];
    if !act(ai, aj) || !act(bi, bj) {
        return false;
    }
    let di = bi - ai;
    let dj = bj - aj;
    let si = di.signum();
    let sj = dj.signum();
    let (adi, adj) = (di.abs(), dj.abs());
    // Crossing parameters in units of 1/(2 adi adj): the segment leaves the current column at t = (2k+1)/(2 adi).
    let mut i = ai;
    let mut j = aj;
    let mut ki = 0i64;
    let mut kj = 0i64;
    while ki < adi || kj < adj {
        // compare (2ki+1)/adi with (2kj+1)/adj
        let ti = if ki < adi {
            (2 * ki + 1) * adj
        } else {
            i64::MAX
        };
        let tj = if kj < adj {
            (2 * kj + 1) * adi
        } else {
            i64::MAX
        };
        match ti.cmp(&tj) {
            Ordering::Less => {
                i += si;
                ki += 1;
            }
            Ordering::Greater => {
                j += sj;
                kj += 1;
            }
            Ordering::Equal => {
                if !act(i + si, j) || !act(i, j + sj) {
                    return false;
                }
                i += si;
                j += sj;
                ki += 1;
                kj += 1;
            }
        }
        if !act(i, j) {
            return false;
        }
    }
    true
}

/// Radius-2 template: the 8 neighbours and the 8 knight moves.
pub const TEMPLATE: [(i32, i32); 16] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
    (1, 2),
    (2, 1),
    (-1, 2),
    (-2, 1),
    (1, -2),
    (2, -1),
    (-1, -2),
    (-2, -1),
];

/// Truncated shortest-path distances from one active cell.
#[derive(Debug, Clone)]
pub struct DistanceField<T> {
    pub source: usize,
    /// `(cell, distance)` sorted by cell index.
    pub entries: Vec<(usize, T)>,
}

impl<T: Scalar> DistanceField<T> {
    /// Distance to `cell`, infinite when not reached.
    pub fn get(&self, cell: usize) -> T {
        match self.entries.binary_search_by_key(&cell, |e| e.0) {
            Ok(p) => self.entries[p].1,
            Err(_) => T::infinity(),
        }
    }
}

#[derive(PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

/// Dijkstra on the radius-2 template graph (edges need line of sight), stopped at `max_dist`.
/// Cells visible from the source get their exact Euclidean distance.
pub fn geodesic_distances<T: Scalar>(
    domain: &GridDomain<T>,
    source: usize,
    max_dist: T,
) -> Result<DistanceField<T>> {
    if source >= domain.len() || !domain.active[source] {
        return Err(Error::Domain(format!("source cell {source} is not active")));
    }
    let graph = graph_distances(domain, source, max_dist.f64());
    let h = domain.spacing.f64();
    let (si, sj) = domain.ij(source);
    let mut entries: Vec<(usize, T)> = graph
        .into_iter()
        .map(|(k, d)| {
            let (i, j) = domain.ij(k);
            let e = (((i as f64 - si as f64).powi(2) + (j as f64 - sj as f64).powi(2)).sqrt()) * h;
            let d = if d > e && line_of_sight(domain, source, k) {
                e
            } else {
                d
            };
            (k, T::of(d))
        })
        .collect();
    entries.sort_by_key(|e| e.0);
    Ok(DistanceField { source, entries })
}

/// Plain template-graph distances (in length units) up to `max_dist`.
pub(crate) fn graph_distances<T: Scalar>(
    domain: &GridDomain<T>,
    source: usize,
    max_dist: f64,
) -> Vec<(usize, f64)> {
    let h = domain.spacing.f64();
    let mut dist: std::collections::HashMap<usize, f64> = std::collections::HashMap::new();
    let mut heap = BinaryHeap::new();
    dist.insert(source, 0.0);
    heap.push(HeapItem(0.0, source));
    let mut done = Vec::new();
    let mut settled = std::collections::HashSet::new();
    while let Some(HeapItem(d, k)) = heap.pop() {
        if settled.contains(&k) {
            continue;
        }
        settled.insert(k);
        done.push((k, d));
        for &(di, dj) in TEMPLATE.iter() {
            let Some(q) = domain.offset(k, di, dj) else {
                continue;
            };
            if !domain.active[q] || settled.contains(&q) {
                continue;
            }
            let nd = d + ((di * di + dj * dj) as f64).sqrt() * h;
            if nd > max_dist {
                continue;
            }
            if dist.get(&q).is_some_and(|&old| old <= nd) {
                continue;
            }
            if (di.abs() == 2 || dj.abs() == 2 || (di != 0 && dj != 0))
                && !line_of_sight(domain, k, q)
            {
                continue;
            }
            dist.insert(q, nd);
            heap.push(HeapItem(nd, q));
        }
    }
    done
}
