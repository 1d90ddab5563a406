//! Boundary post-processing: sample the projected density on a lattice,
//! extract the iso-contours by marching squares and fit each one with a
//! fair cubic B-spline.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density_field::{heaviside, DensityField};
use crate::error::{Error, Result};
use crate::linalg::{DenseSpd, Vec3};
use crate::scalar::{from_usize, lit, to_f64, Scalar};
use crate::splines::{KnotVector, NurbsSurface};

/// Node values on a uniform `(gs+1) x (gt+1)` lattice over the parametric
/// domain, stored with `t` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid<T> {
    pub resolution: (usize, usize),
    pub values: Vec<T>,
    pub domain: ((T, T), (T, T)),
}

impl<T: Scalar> DensityGrid<T> {
    pub fn new(resolution: (usize, usize), values: Vec<T>, domain: ((T, T), (T, T))) -> Result<Self> {
        let (gs, gt) = resolution;
        if gs == 0 || gt == 0 {
            return Err(Error::config("fairing.resolution", "need at least one cell per direction"));
        }
        if values.len() != (gs + 1) * (gt + 1) {
            return Err(Error::Input(format!(
                "grid of {resolution:?} cells needs {} values, got {}",
                (gs + 1) * (gt + 1),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite grid value".into()));
        }
        Ok(Self { resolution, values, domain })
    }

    /// Grid from a function of the parametric coordinates.
    pub fn from_fn(
        resolution: (usize, usize),
        domain: ((T, T), (T, T)),
        f: impl Fn(T, T) -> T,
    ) -> Result<Self> {
        let (gs, gt) = resolution;
        let probe = Self { resolution, values: Vec::new(), domain };
        let mut values = Vec::with_capacity((gs + 1) * (gt + 1));
        for i in 0..=gs {
            for j in 0..=gt {
                let (s, t) = probe.node(i, j);
                values.push(f(s, t));
            }
        }
        Self::new(resolution, values, domain)
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> T {
        self.values[i * (self.resolution.1 + 1) + j]
    }

    pub fn node(&self, i: usize, j: usize) -> (T, T) {
        let ((s0, s1), (t0, t1)) = self.domain;
        (
            s0 + (s1 - s0) * from_usize::<T>(i) / from_usize::<T>(self.resolution.0),
            t0 + (t1 - t0) * from_usize::<T>(j) / from_usize::<T>(self.resolution.1),
        )
    }

    /// Cell size in `s` and `t`.
    pub fn spacing(&self) -> (T, T) {
        let ((s0, s1), (t0, t1)) = self.domain;
        (
            (s1 - s0) / from_usize::<T>(self.resolution.0),
            (t1 - t0) / from_usize::<T>(self.resolution.1),
        )
    }
}

/// `H(rho(s_i, t_j))` on the uniform lattice of the field's domain.
pub fn sample_grid<T: Scalar>(
    field: &DensityField<T>,
    tau: T,
    kappa: T,
    resolution: (usize, usize),
) -> Result<DensityGrid<T>> {
    let (gs, gt) = resolution;
    if gs < 2 || gt < 2 {
        return Err(Error::config("fairing.resolution", "must be at least 2 per direction"));
    }
    let domain = field.basis.domain();
    let probe = DensityGrid { resolution, values: Vec::new(), domain };
    let rows: Vec<Vec<T>> = (0..=gs)
        .into_par_iter()
        .map(|i| {
            (0..=gt)
                .map(|j| {
                    let (s, t) = probe.node(i, j);
                    field.eval(s, t).map(|rho| heaviside(rho, tau, kappa))
                })
                .collect::<Result<Vec<T>>>()
        })
        .collect::<Result<_>>()?;
    DensityGrid::new(resolution, rows.concat(), domain)
}

/// An ordered iso-line: a loop (not repeating its first point) or a path
/// whose ends lie on the domain boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourPath<T> {
    pub points: Vec<[T; 2]>,
    pub closed: bool,
}

/// Nudge applied to node values that equal the iso-value.
pub const ISO_NUDGE: f64 = 1e-9;

/// Marching squares with linear edge interpolation. Saddle cells are
/// resolved by the average of the four corners. Loops are oriented
/// counter-clockwise; output order is deterministic.
pub fn marching_squares<T: Scalar>(grid: &DensityGrid<T>, iso: T) -> Vec<ContourPath<T>> {
    let (gs, gt) = grid.resolution;
    let nudge = lit::<T>(ISO_NUDGE);
    let val = |i: usize, j: usize| {
        let v = grid.value(i, j);
        if v == iso {
            v + nudge
        } else {
            v
        }
    };
    // edge ids: s-edges (i,j)-(i+1,j) first, then t-edges (i,j)-(i,j+1)
    let n_s_edges = gs * (gt + 1);
    let s_edge = |i: usize, j: usize| i * (gt + 1) + j;
    let t_edge = |i: usize, j: usize| n_s_edges + i * gt + j;
    let crossing = |id: usize| -> [T; 2] {
        let (a, b) = if id < n_s_edges {
            let (i, j) = (id / (gt + 1), id % (gt + 1));
            ((i, j), (i + 1, j))
        } else {
            let k = id - n_s_edges;
            let (i, j) = (k / gt, k % gt);
            ((i, j), (i, j + 1))
        };
        let (va, vb) = (val(a.0, a.1), val(b.0, b.1));
        let w = (iso - va) / (vb - va);
        let (pa, pb) = (grid.node(a.0, a.1), grid.node(b.0, b.1));
        [pa.0 + w * (pb.0 - pa.0), pa.1 + w * (pb.1 - pa.1)]
    };

    let mut links: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut link = |a: usize, b: usize| {
        links.entry(a).or_default().push(b);
        links.entry(b).or_default().push(a);
    };
    for i in 0..gs {
        for j in 0..gt {
            // corners counter-clockwise from (i,j); edge k joins corner k and k+1
            let c = [val(i, j), val(i + 1, j), val(i + 1, j + 1), val(i, j + 1)];
            let above = c.map(|v| v > iso);
            let edges = [s_edge(i, j), t_edge(i + 1, j), s_edge(i, j + 1), t_edge(i, j)];
            let cut: Vec<usize> = (0..4).filter(|&k| above[k] != above[(k + 1) % 4]).collect();
            match cut.len() {
                2 => link(edges[cut[0]], edges[cut[1]]),
                4 => {
                    let centre = (c[0] + c[1] + c[2] + c[3]) * lit(0.25) > iso;
                    // separate the two corners whose state differs from the centre
                    for k in 0..4 {
                        if above[k] != centre {
                            link(edges[(k + 3) % 4], edges[k]);
                        }
                    }
                }
                _ => {}
            }
        }
    }

    let mut visited = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    let walk = |start: usize, visited: &mut std::collections::BTreeSet<usize>| {
        let mut ids = vec![start];
        visited.insert(start);
        let mut prev = usize::MAX;
        let mut cur = start;
        loop {
            let next = links[&cur].iter().copied().find(|&n| n != prev && !visited.contains(&n));
            match next {
                Some(n) => {
                    visited.insert(n);
                    ids.push(n);
                    prev = cur;
                    cur = n;
                }
                None => break,
            }
        }
        ids
    };
    let ends: Vec<usize> = links.iter().filter(|(_, v)| v.len() == 1).map(|(&k, _)| k).collect();
    for e in ends {
        if !visited.contains(&e) {
            let ids = walk(e, &mut visited);
            out.push(ContourPath { points: ids.into_iter().map(crossing).collect(), closed: false });
        }
    }
    let rest: Vec<usize> = links.keys().copied().collect();
    for e in rest {
        if !visited.contains(&e) {
            let ids = walk(e, &mut visited);
            let mut points: Vec<[T; 2]> = ids.into_iter().map(crossing).collect();
            if signed_area(&points) < T::zero() {
                points.reverse();
            }
            out.push(ContourPath { points, closed: true });
        }
    }
    out
}

fn signed_area<T: Scalar>(pts: &[[T; 2]]) -> T {
    let n = pts.len();
    let mut a = T::zero();
    for k in 0..n {
        let (p, q) = (pts[k], pts[(k + 1) % n]);
        a += p[0] * q[1] - q[0] * p[1];
    }
    a * lit(0.5)
}

fn dist2<T: Scalar>(a: [T; 2], b: [T; 2]) -> T {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Drops repeated consecutive points (and, for loops, a last point equal
/// to the first).
pub fn dedup_points<T: Scalar>(points: &[[T; 2]], closed: bool) -> Vec<[T; 2]> {
    let mut out: Vec<[T; 2]> = Vec::with_capacity(points.len());
    for &p in points {
        if out.last() != Some(&p) {
            out.push(p);
        }
    }
    if closed {
        while out.len() > 1 && out.first() == out.last() {
            out.pop();
        }
    }
    out
}

/// Centripetal parameters: `eta_0 = 0` and increments proportional to the
/// square roots of the chord lengths. For loops the closing chord is
/// included, so the last point gets `eta < 1` and `eta = 1` is the start
/// again. Expects de-duplicated points.
pub fn centripetal_params<T: Scalar>(points: &[[T; 2]], closed: bool) -> Result<Vec<T>> {
    if points.len() < 2 {
        return Err(Error::Input("need at least two distinct points".into()));
    }
    let n = points.len();
    let chords = if closed { n } else { n - 1 };
    let mut acc = vec![T::zero(); n];
    let mut total = T::zero();
    for k in 0..chords {
        let d = dist2(points[k], points[(k + 1) % n]);
        if !(d > T::zero()) {
            return Err(Error::Input(format!("repeated point at index {k}")));
        }
        total += d.sqrt();
        if k + 1 < n {
            acc[k + 1] = total;
        }
    }
    Ok(acc.into_iter().map(|a| a / total).collect())
}

/// Cubic B-spline curve in the parametric plane. Loops use an unclamped
/// uniform knot vector whose last three control points repeat the first
/// three; open curves use a clamped uniform one. The domain is `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FairCurve<T> {
    knots: KnotVector<T>,
    control_points: Vec<[T; 2]>,
    closed: bool,
}

pub const CURVE_DEGREE: usize = 3;

fn curve_knots<T: Scalar>(unknowns: usize, closed: bool) -> Result<KnotVector<T>> {
    if closed {
        let m = from_usize::<T>(unknowns);
        let knots = (0..unknowns + 7)
            .map(|k| (from_usize::<T>(k) - lit(3.0)) / m)
            .collect();
        KnotVector::new(knots, CURVE_DEGREE)
    } else {
        KnotVector::uniform_clamped(CURVE_DEGREE, unknowns - CURVE_DEGREE)
    }
}

impl<T: Scalar> FairCurve<T> {
    /// Curve from its independent control points (without the wrapped
    /// copies for loops).
    pub fn from_unknowns(unknowns: Vec<[T; 2]>, closed: bool) -> Result<Self> {
        if unknowns.len() < 4 {
            return Err(Error::Input("a cubic needs at least 4 control points".into()));
        }
        let knots = curve_knots(unknowns.len(), closed)?;
        let mut control_points = unknowns;
        if closed {
            let head: Vec<[T; 2]> = control_points[..CURVE_DEGREE].to_vec();
            control_points.extend(head);
        }
        Ok(Self { knots, control_points, closed })
    }

    pub fn knots(&self) -> &[T] {
        self.knots.knots()
    }

    /// All `b + 1` control points, including wrapped copies.
    pub fn control_points(&self) -> &[[T; 2]] {
        &self.control_points
    }

    pub fn closed(&self) -> bool {
        self.closed
    }

    /// Number of independent control points.
    pub fn num_unknowns(&self) -> usize {
        if self.closed {
            self.control_points.len() - CURVE_DEGREE
        } else {
            self.control_points.len()
        }
    }

    /// `(unknown index, value)` of the basis functions or their `order`-th
    /// derivatives at `xi`.
    fn basis(&self, xi: T, order: usize) -> Result<Vec<(usize, T)>> {
        let m = self.num_unknowns();
        let span = self.knots.find_span(xi)?;
        let ders = self.knots.basis_derivs(span, xi, order)?;
        Ok(ders[order]
            .iter()
            .enumerate()
            .map(|(a, &v)| ((span - CURVE_DEGREE + a) % m, v))
            .collect())
    }

    fn combine(&self, xi: T, order: usize) -> Result<[T; 2]> {
        let mut z = [T::zero(); 2];
        for (k, v) in self.basis(xi, order)? {
            z[0] += v * self.control_points[k][0];
            z[1] += v * self.control_points[k][1];
        }
        Ok(z)
    }

    pub fn point(&self, xi: T) -> Result<[T; 2]> {
        self.combine(xi, 0)
    }

    pub fn derivative(&self, xi: T, order: usize) -> Result<[T; 2]> {
        self.combine(xi, order)
    }

    /// Knot spans of the curve domain.
    fn domain_spans(&self) -> Vec<(T, T)> {
        let k = self.knots.knots();
        let n = self.control_points.len();
        (CURVE_DEGREE..n).filter(|&i| k[i + 1] > k[i]).map(|i| (k[i], k[i + 1])).collect()
    }

    /// Two-point Gauss points and weights on every span.
    fn gauss_points(&self) -> Vec<(T, T)> {
        let g = T::one() / lit::<T>(3.0).sqrt();
        let mut out = Vec::new();
        for (a, b) in self.domain_spans() {
            let (mid, half) = ((a + b) * lit(0.5), (b - a) * lit(0.5));
            out.push((mid - half * g, half));
            out.push((mid + half * g, half));
        }
        out
    }

    /// `int |Z''|^2` by two-point Gauss quadrature on each span.
    pub fn bending_energy(&self) -> Result<T> {
        let mut e = T::zero();
        for (xi, w) in self.gauss_points() {
            let d = self.derivative(xi, 2)?;
            e += w * (d[0] * d[0] + d[1] * d[1]);
        }
        Ok(e)
    }

    /// Least-squares residual plus `lambda` times the bending energy.
    pub fn functional(&self, points: &[[T; 2]], params: &[T], lambda: T) -> Result<T> {
        let mut f = T::zero();
        for (q, &eta) in points.iter().zip(params) {
            let z = self.point(eta)?;
            f += (z[0] - q[0]) * (z[0] - q[0]) + (z[1] - q[1]) * (z[1] - q[1]);
        }
        Ok(f + lambda * self.bending_energy()?)
    }

    /// Uniform samples over the domain; loops end on their start point.
    pub fn sample(&self, count: usize) -> Result<Vec<[T; 2]>> {
        let count = count.max(2);
        (0..count)
            .map(|k| self.point(from_usize::<T>(k) / from_usize::<T>(count - 1)))
            .collect()
    }
}

/// Fits a cubic B-spline with `b + 1` control points to `points` at
/// `params` by minimising the squared residuals plus `lambda` times the
/// Gauss-discretised bending energy. For loops `b + 1` counts the three
/// wrapped control points.
pub fn fit_fair_bspline<T: Scalar>(
    points: &[[T; 2]],
    params: &[T],
    b: usize,
    lambda: T,
    closed: bool,
) -> Result<FairCurve<T>> {
    if points.len() != params.len() {
        return Err(Error::Input("points and parameters differ in length".into()));
    }
    if !(lambda >= T::zero()) {
        return Err(Error::config("fairing.lambda", "must be non-negative"));
    }
    let unknowns = if closed { b.saturating_sub(CURVE_DEGREE - 1) } else { b + 1 };
    if unknowns < 4 {
        return Err(Error::config("fairing.control_points", "too few for a cubic"));
    }
    if !closed && b > points.len().saturating_sub(1) {
        return Err(Error::Contract(format!(
            "{} control points for {} data points",
            b + 1,
            points.len()
        )));
    }
    let shape = FairCurve::from_unknowns(vec![[T::zero(); 2]; unknowns], closed)?;
    let mut a = DenseSpd::zeros(unknowns);
    let mut rhs = vec![[T::zero(); 2]; unknowns];
    for (q, &eta) in points.iter().zip(params) {
        let row = shape.basis(eta, 0)?;
        for &(i, ni) in &row {
            rhs[i][0] += ni * q[0];
            rhs[i][1] += ni * q[1];
            for &(j, nj) in &row {
                a.add(i, j, ni * nj);
            }
        }
    }
    if lambda > T::zero() {
        for (xi, w) in shape.gauss_points() {
            let row = shape.basis(xi, 2)?;
            for &(i, di) in &row {
                for &(j, dj) in &row {
                    a.add(i, j, lambda * w * di * dj);
                }
            }
        }
    }
    let chol = a.cholesky()?;
    let xs = chol.solve(&rhs.iter().map(|r| r[0]).collect::<Vec<_>>());
    let ys = chol.solve(&rhs.iter().map(|r| r[1]).collect::<Vec<_>>());
    FairCurve::from_unknowns(xs.into_iter().zip(ys).map(|(x, y)| [x, y]).collect(), closed)
}

/// Default number of control points parameter `b` for `c + 1` points.
pub fn default_control_count(c: usize) -> usize {
    8.max((c as f64 / 4.0).round() as usize)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FairingConfig<T> {
    pub resolution: (usize, usize),
    pub iso: T,
    pub lambda: T,
    /// Fixed `b`; `None` uses `max(8, round(c / 4))`.
    pub control_points: Option<usize>,
    /// Contours with fewer points are discarded.
    pub min_points: usize,
    /// Samples per curve for the physical polylines.
    pub physical_samples: usize,
}

impl<T: Scalar> Default for FairingConfig<T> {
    fn default() -> Self {
        Self {
            resolution: (200, 200),
            iso: lit(0.5),
            lambda: lit(0.01),
            control_points: None,
            min_points: 8,
            physical_samples: 200,
        }
    }
}

impl<T: Scalar> FairingConfig<T> {
    pub fn validated(self) -> Result<Self> {
        if self.resolution.0 < 2 || self.resolution.1 < 2 {
            return Err(Error::config("fairing.resolution", "must be at least 2 per direction"));
        }
        if !(self.iso > T::zero() && self.iso < T::one()) {
            return Err(Error::config("fairing.iso", "must lie in (0, 1)"));
        }
        if !(self.lambda >= T::zero()) || !self.lambda.is_finite() {
            return Err(Error::config("fairing.lambda", "must be finite and non-negative"));
        }
        if matches!(self.control_points, Some(b) if b < 6) {
            return Err(Error::config("fairing.control_points", "must be at least 6"));
        }
        if self.min_points < 4 {
            return Err(Error::config("fairing.min_points", "must be at least 4"));
        }
        if self.physical_samples < 2 {
            return Err(Error::config("fairing.physical_samples", "must be at least 2"));
        }
        Ok(self)
    }
}

/// One extracted boundary with its fit.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourCurve<T> {
    /// Data points `Q_l` in parametric space.
    pub points: Vec<[T; 2]>,
    pub closed: bool,
    pub params: Vec<T>,
    pub fitted: FairCurve<T>,
    /// Fitted curve sampled and mapped through the mid-surface.
    pub physical: Vec<Vec3<T>>,
}

impl<T: Scalar> ContourCurve<T> {
    /// Root mean square of `|Z(eta_l) - Q_l|`.
    pub fn rms_error(&self) -> Result<T> {
        let mut s = T::zero();
        for (q, &eta) in self.points.iter().zip(&self.params) {
            let z = self.fitted.point(eta)?;
            s += (z[0] - q[0]) * (z[0] - q[0]) + (z[1] - q[1]) * (z[1] - q[1]);
        }
        Ok((s / from_usize::<T>(self.points.len())).sqrt())
    }
}

/// Fits every extracted contour with enough points. Contours are fitted in
/// parallel; output order follows extraction order.
pub fn fit_contours<T: Scalar>(
    paths: &[ContourPath<T>],
    surface: Option<&NurbsSurface<T>>,
    cfg: &FairingConfig<T>,
) -> Result<Vec<ContourCurve<T>>> {
    let kept: Vec<(Vec<[T; 2]>, bool)> = paths
        .iter()
        .map(|p| (dedup_points(&p.points, p.closed), p.closed))
        .filter(|(pts, _)| pts.len() >= cfg.min_points)
        .collect();
    if kept.len() < paths.len() {
        log::debug!("discarded {} short contour(s)", paths.len() - kept.len());
    }
    kept.into_par_iter()
        .map(|(points, closed)| {
            let params = centripetal_params(&points, closed)?;
            let c = points.len() - 1;
            let b = cfg.control_points.unwrap_or_else(|| default_control_count(c));
            // open fits need b <= c; loops need b - 2 <= c + 1 unknowns
            let b = if closed { b.min(c + 3) } else { b.min(c) };
            let fitted = fit_fair_bspline(&points, &params, b, cfg.lambda, closed)?;
            let physical = match surface {
                Some(surf) => map_to_surface(surf, &fitted.sample(cfg.physical_samples)?)?,
                None => Vec::new(),
            };
            Ok(ContourCurve { points, closed, params, fitted, physical })
        })
        .collect()
}

fn map_to_surface<T: Scalar>(surf: &NurbsSurface<T>, pts: &[[T; 2]]) -> Result<Vec<Vec3<T>>> {
    let ((s0, s1), (t0, t1)) = surf.domain();
    pts.iter()
        .map(|p| surf.point(p[0].max(s0).min(s1), p[1].max(t0).min(t1)))
        .collect()
}

/// Grid, extraction and fitting for a density field. Curves are also
/// mapped to the physical mid-surface given by the field's basis.
pub fn fair_boundaries<T: Scalar>(
    field: &DensityField<T>,
    cfg: &FairingConfig<T>,
) -> Result<(DensityGrid<T>, Vec<ContourCurve<T>>)> {
    let cfg = cfg.validated()?;
    let grid = sample_grid(field, field.tau, field.kappa, cfg.resolution)?;
    let paths = marching_squares(&grid, cfg.iso);
    let curves = fit_contours(&paths, Some(&field.basis), &cfg)?;
    Ok((grid, curves))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Solid,
    Void,
}

/// Classifies parametric points against the faired loops with the even-odd
/// rule. Open curves are ignored. The state outside every loop is taken
/// from the majority of the grid's boundary nodes.
#[derive(Debug, Clone)]
pub struct RegionClassifier<T> {
    polygons: Vec<Vec<[T; 2]>>,
    exterior: Region,
}

impl<T: Scalar> RegionClassifier<T> {
    pub fn new(grid: &DensityGrid<T>, curves: &[ContourCurve<T>], iso: T, samples: usize) -> Result<Self> {
        let (gs, gt) = grid.resolution;
        let mut above = 0usize;
        let mut total = 0usize;
        for i in 0..=gs {
            for j in 0..=gt {
                if i == 0 || j == 0 || i == gs || j == gt {
                    total += 1;
                    if grid.value(i, j) >= iso {
                        above += 1;
                    }
                }
            }
        }
        let exterior = if 2 * above >= total { Region::Solid } else { Region::Void };
        let polygons = curves
            .iter()
            .filter(|c| c.closed)
            .map(|c| c.fitted.sample(samples))
            .collect::<Result<_>>()?;
        Ok(Self { polygons, exterior })
    }

    pub fn classify(&self, s: T, t: T) -> Region {
        let mut inside = false;
        for poly in &self.polygons {
            let n = poly.len();
            for k in 0..n {
                let (a, b) = (poly[k], poly[(k + 1) % n]);
                if (a[1] > t) != (b[1] > t) {
                    let x = a[0] + (t - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                    if s < x {
                        inside = !inside;
                    }
                }
            }
        }
        match (inside, self.exterior) {
            (false, r) => r,
            (true, Region::Solid) => Region::Void,
            (true, Region::Void) => Region::Solid,
        }
    }
}

/// Serialisable fitted curve.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CurveRecord {
    pub closed: bool,
    pub degree: usize,
    pub knots: Vec<f64>,
    pub control_points: Vec<[f64; 2]>,
    pub rms_error: f64,
    pub bending_energy: f64,
    pub physical_polyline: Vec<[f64; 3]>,
}

impl CurveRecord {
    pub fn from_curve<T: Scalar>(c: &ContourCurve<T>) -> Result<Self> {
        Ok(Self {
            closed: c.closed,
            degree: CURVE_DEGREE,
            knots: c.fitted.knots().iter().map(|&k| to_f64(k)).collect(),
            control_points: c.fitted.control_points().iter().map(|p| p.map(to_f64)).collect(),
            rms_error: to_f64(c.rms_error()?),
            bending_energy: to_f64(c.fitted.bending_energy()?),
            physical_polyline: c.physical.iter().map(|p| p.map(to_f64)).collect(),
        })
    }
}

/// SVG of the parametric domain: raw contour points in grey, fitted curves
/// in red.
pub fn contours_svg<T: Scalar>(
    domain: ((T, T), (T, T)),
    curves: &[ContourCurve<T>],
    samples: usize,
) -> Result<String> {
    let size = 800.0;
    let ((s0, s1), (t0, t1)) = domain;
    let (s0, s1, t0, t1) = (to_f64(s0), to_f64(s1), to_f64(t0), to_f64(t1));
    let map = |p: [T; 2]| {
        let x = (to_f64(p[0]) - s0) / (s1 - s0) * size;
        let y = size - (to_f64(p[1]) - t0) / (t1 - t0) * size;
        (x, y)
    };
    let poly = |pts: &[[T; 2]]| {
        let mut d = String::new();
        for &p in pts {
            let (x, y) = map(p);
            let _ = write!(d, "{x:.3},{y:.3} ");
        }
        d.trim_end().to_string()
    };
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">\n\
         <rect x=\"0\" y=\"0\" width=\"{size}\" height=\"{size}\" fill=\"white\" stroke=\"black\"/>\n"
    );
    for c in curves {
        let tag = if c.closed { "polygon" } else { "polyline" };
        let _ = writeln!(
            svg,
            "<{tag} points=\"{}\" fill=\"none\" stroke=\"#999999\" stroke-width=\"1\"/>",
            poly(&c.points)
        );
    }
    for c in curves {
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#cc0000\" stroke-width=\"2\"/>",
            poly(&c.fitted.sample(samples)?)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
