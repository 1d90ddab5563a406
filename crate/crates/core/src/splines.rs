//! B-spline and NURBS evaluation: knot spans, basis functions and their
//! derivatives, rational curves and tensor-product surfaces, and knot
//! refinement by Boehm insertion.

use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::scalar::{from_usize, to_f64, Scalar};

/// Non-decreasing knot sequence together with the degree it serves.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector<T> {
    knots: Vec<T>,
    degree: usize,
}

impl<T: Scalar> KnotVector<T> {
    /// General knot vector: non-decreasing, finite, at least `2(p+1)` knots.
    pub fn new(knots: Vec<T>, degree: usize) -> Result<Self> {
        if knots.len() < 2 * (degree + 1) {
            return Err(Error::KnotVector(format!(
                "{} knots is too few for degree {degree} (need at least {})",
                knots.len(),
                2 * (degree + 1)
            )));
        }
        if knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::KnotVector("non-finite knot".into()));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::KnotVector("knots must be non-decreasing".into()));
        }
        let kv = Self { knots, degree };
        let (lo, hi) = kv.domain();
        if !(hi > lo) {
            return Err(Error::KnotVector("empty parametric domain".into()));
        }
        Ok(kv)
    }

    /// Knot vector whose end knots are each repeated `degree + 1` times.
    pub fn clamped(knots: Vec<T>, degree: usize) -> Result<Self> {
        let kv = Self::new(knots, degree)?;
        if !kv.is_clamped() {
            return Err(Error::KnotVector(
                "end knots must be repeated degree + 1 times".into(),
            ));
        }
        Ok(kv)
    }

    /// Clamped knot vector on [0, 1] with `spans` equal interior intervals.
    pub fn uniform_clamped(degree: usize, spans: usize) -> Result<Self> {
        if spans == 0 {
            return Err(Error::KnotVector("at least one span required".into()));
        }
        let mut knots = vec![T::zero(); degree + 1];
        for k in 1..spans {
            knots.push(from_usize::<T>(k) / from_usize::<T>(spans));
        }
        knots.extend(std::iter::repeat(T::one()).take(degree + 1));
        Self::clamped(knots, degree)
    }

    pub fn is_clamped(&self) -> bool {
        let p = self.degree;
        let n = self.knots.len();
        self.knots[..=p].iter().all(|&k| k == self.knots[0])
            && self.knots[n - p - 1..].iter().all(|&k| k == self.knots[n - 1])
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    /// Number of basis functions, `len - degree - 1`.
    pub fn num_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// Valid parameter range `[knots[p], knots[len-p-1]]`.
    pub fn domain(&self) -> (T, T) {
        (
            self.knots[self.degree],
            self.knots[self.knots.len() - self.degree - 1],
        )
    }

    pub fn multiplicity(&self, u: T) -> usize {
        self.knots.iter().filter(|&&k| k == u).count()
    }

    /// Non-degenerate knot intervals as `(span index, start, end)`.
    pub fn spans(&self) -> Vec<(usize, T, T)> {
        let n = self.num_basis();
        (self.degree..n)
            .filter(|&i| self.knots[i + 1] > self.knots[i])
            .map(|i| (i, self.knots[i], self.knots[i + 1]))
            .collect()
    }

    /// Index `i` with `knots[i] <= u < knots[i+1]`; the right end of the
    /// domain maps to the last non-degenerate span.
    pub fn find_span(&self, u: T) -> Result<usize> {
        let (lo, hi) = self.domain();
        if !(u >= lo && u <= hi) {
            return Err(Error::Domain {
                value: to_f64(u),
                lo: to_f64(lo),
                hi: to_f64(hi),
            });
        }
        let p = self.degree;
        let n = self.num_basis();
        if u >= hi {
            let mut i = n - 1;
            while i > p && self.knots[i] >= self.knots[i + 1] {
                i -= 1;
            }
            return Ok(i);
        }
        let (mut low, mut high) = (p, n);
        // invariant: knots[low] <= u < knots[high]
        while high - low > 1 {
            let mid = (low + high) / 2;
            if u < self.knots[mid] {
                high = mid;
            } else {
                low = mid;
            }
        }
        Ok(low)
    }

    fn check_span(&self, span: usize, u: T) -> Result<()> {
        let p = self.degree;
        let n = self.num_basis();
        if span < p || span >= n {
            return Err(Error::Contract(format!(
                "span {span} outside [{p}, {}]",
                n - 1
            )));
        }
        let (a, b) = (self.knots[span], self.knots[span + 1]);
        if !(b > a) || !(u >= a && u <= b) {
            return Err(Error::Contract(format!(
                "span {span} = [{a}, {b}) does not contain u = {u}"
            )));
        }
        Ok(())
    }

    /// The `degree + 1` non-vanishing basis values `N_{span-p..=span}(u)`.
    pub fn basis_funs(&self, span: usize, u: T) -> Result<Vec<T>> {
        self.check_span(span, u)?;
        Ok(self.basis_funs_unchecked(span, u))
    }

    pub(crate) fn basis_funs_unchecked(&self, span: usize, u: T) -> Vec<T> {
        let p = self.degree;
        let k = &self.knots;
        let mut n = vec![T::zero(); p + 1];
        let mut left = vec![T::zero(); p + 1];
        let mut right = vec![T::zero(); p + 1];
        n[0] = T::one();
        for j in 1..=p {
            left[j] = u - k[span + 1 - j];
            right[j] = k[span + j] - u;
            let mut saved = T::zero();
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                // 0/0 := 0
                let temp = if denom == T::zero() { T::zero() } else { n[r] / denom };
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        n
    }

    /// Derivatives of the non-vanishing basis functions up to `order`.
    /// Row `k` holds the k-th derivatives; rows past the degree are zero.
    pub fn basis_derivs(&self, span: usize, u: T, order: usize) -> Result<Vec<Vec<T>>> {
        self.check_span(span, u)?;
        Ok(self.basis_derivs_unchecked(span, u, order))
    }

    pub(crate) fn basis_derivs_unchecked(&self, span: usize, u: T, order: usize) -> Vec<Vec<T>> {
        let p = self.degree;
        let k = &self.knots;
        let zero = T::zero();
        let safe_div = |a: T, b: T| if b == zero { zero } else { a / b };

        // ndu: upper triangle basis functions, lower triangle knot differences
        let mut ndu = vec![vec![zero; p + 1]; p + 1];
        let mut left = vec![zero; p + 1];
        let mut right = vec![zero; p + 1];
        ndu[0][0] = T::one();
        for j in 1..=p {
            left[j] = u - k[span + 1 - j];
            right[j] = k[span + j] - u;
            let mut saved = zero;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = safe_div(ndu[r][j - 1], ndu[j][r]);
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }

        let mut ders = vec![vec![zero; p + 1]; order + 1];
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }
        let top = order.min(p);
        let mut a = vec![vec![zero; p + 1]; 2];
        for r in 0..=p {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = T::one();
            for kk in 1..=top {
                let mut d = zero;
                let rk = r as isize - kk as isize;
                let pk = p - kk;
                if r >= kk {
                    a[s2][0] = safe_div(a[s1][0], ndu[pk + 1][rk as usize]);
                    d = a[s2][0] * ndu[rk as usize][pk];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if (r as isize) - 1 <= pk as isize { kk - 1 } else { p - r };
                for j in j1..=j2 {
                    let idx = (rk + j as isize) as usize;
                    a[s2][j] = safe_div(a[s1][j] - a[s1][j - 1], ndu[pk + 1][idx]);
                    d += a[s2][j] * ndu[idx][pk];
                }
                if r as isize <= pk as isize {
                    a[s2][kk] = safe_div(-a[s1][kk - 1], ndu[pk + 1][r]);
                    d += a[s2][kk] * ndu[r][pk];
                }
                ders[kk][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut fac = from_usize::<T>(p);
        for kk in 1..=top {
            for j in 0..=p {
                ders[kk][j] *= fac;
            }
            fac *= from_usize::<T>(p - kk);
        }
        ders
    }
}

/// Rational curve in `D` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct NurbsCurve<T, const D: usize> {
    knots: KnotVector<T>,
    control_points: Vec<[T; D]>,
    weights: Vec<T>,
}

impl<T: Scalar, const D: usize> NurbsCurve<T, D> {
    pub fn new(knots: KnotVector<T>, control_points: Vec<[T; D]>, weights: Vec<T>) -> Result<Self> {
        if !knots.is_clamped() {
            return Err(Error::Nurbs("curves require a clamped knot vector".into()));
        }
        let n = knots.num_basis();
        if control_points.len() != n || weights.len() != n {
            return Err(Error::Nurbs(format!(
                "expected {n} control points and weights, got {} and {}",
                control_points.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|&w| !(w > T::zero())) {
            return Err(Error::Nurbs("weights must be positive".into()));
        }
        Ok(Self {
            knots,
            control_points,
            weights,
        })
    }

    pub fn degree(&self) -> usize {
        self.knots.degree()
    }

    pub fn knots(&self) -> &KnotVector<T> {
        &self.knots
    }

    pub fn control_points(&self) -> &[[T; D]] {
        &self.control_points
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Point on the curve at parameter `u`.
    pub fn point(&self, u: T) -> Result<[T; D]> {
        let span = self.knots.find_span(u)?;
        let n = self.knots.basis_funs_unchecked(span, u);
        let p = self.degree();
        let mut acc = [T::zero(); D];
        let mut w = T::zero();
        for (a, &na) in n.iter().enumerate() {
            let i = span - p + a;
            let nw = na * self.weights[i];
            w += nw;
            for d in 0..D {
                acc[d] += nw * self.control_points[i][d];
            }
        }
        Ok(acc.map(|c| c / w))
    }
}

/// Values and parametric derivatives of the non-vanishing rational basis
/// functions of a surface at one parameter pair. Local index
/// `a * (q + 1) + b` refers to control point `(span_s - p + a, span_t - q + b)`.
#[derive(Debug, Clone)]
pub struct RationalBasis<T> {
    pub span_s: usize,
    pub span_t: usize,
    pub degrees: (usize, usize),
    pub values: Vec<T>,
    pub d_s: Vec<T>,
    pub d_t: Vec<T>,
    pub d_ss: Vec<T>,
    pub d_st: Vec<T>,
    pub d_tt: Vec<T>,
}

impl<T> RationalBasis<T> {
    pub fn len(&self) -> usize {
        (self.degrees.0 + 1) * (self.degrees.1 + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Control-point grid index `(i, j)` of local function `k`.
    pub fn grid_index(&self, k: usize) -> (usize, usize) {
        let q1 = self.degrees.1 + 1;
        (
            self.span_s - self.degrees.0 + k / q1,
            self.span_t - self.degrees.1 + k % q1,
        )
    }
}

/// Tensor-product NURBS surface with a 3-D control net.
///
/// Control point `(i, j)` (i along s, j along t) is stored at `i * n_t + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct NurbsSurface<T> {
    knots_s: KnotVector<T>,
    knots_t: KnotVector<T>,
    control_net: Vec<Vec3<T>>,
    weights: Vec<T>,
}

impl<T: Scalar> NurbsSurface<T> {
    pub fn new(
        knots_s: KnotVector<T>,
        knots_t: KnotVector<T>,
        control_net: Vec<Vec3<T>>,
        weights: Vec<T>,
    ) -> Result<Self> {
        if !knots_s.is_clamped() || !knots_t.is_clamped() {
            return Err(Error::Nurbs("surfaces require clamped knot vectors".into()));
        }
        let n = knots_s.num_basis() * knots_t.num_basis();
        if control_net.len() != n || weights.len() != n {
            return Err(Error::Nurbs(format!(
                "expected a {}x{} control net, got {} points and {} weights",
                knots_s.num_basis(),
                knots_t.num_basis(),
                control_net.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|&w| !(w > T::zero())) {
            return Err(Error::Nurbs("weights must be positive".into()));
        }
        if control_net.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Nurbs("non-finite control point".into()));
        }
        Ok(Self {
            knots_s,
            knots_t,
            control_net,
            weights,
        })
    }

    pub fn degrees(&self) -> (usize, usize) {
        (self.knots_s.degree(), self.knots_t.degree())
    }

    pub fn knots_s(&self) -> &KnotVector<T> {
        &self.knots_s
    }

    pub fn knots_t(&self) -> &KnotVector<T> {
        &self.knots_t
    }

    /// Control-net dimensions `(m + 1, n + 1)`.
    pub fn net_size(&self) -> (usize, usize) {
        (self.knots_s.num_basis(), self.knots_t.num_basis())
    }

    pub fn control_net(&self) -> &[Vec3<T>] {
        &self.control_net
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.knots_t.num_basis() + j
    }

    pub fn control_point(&self, i: usize, j: usize) -> Vec3<T> {
        self.control_net[self.index(i, j)]
    }

    pub fn domain(&self) -> ((T, T), (T, T)) {
        (self.knots_s.domain(), self.knots_t.domain())
    }

    /// Non-vanishing rational basis functions and their parametric
    /// derivatives up to `order` (at most 2; higher orders are not tracked).
    pub fn rational_basis(&self, s: T, t: T, order: usize) -> Result<RationalBasis<T>> {
        let span_s = self.knots_s.find_span(s)?;
        let span_t = self.knots_t.find_span(t)?;
        let ord = order.min(2);
        let ns = self.knots_s.basis_derivs_unchecked(span_s, s, ord);
        let nt = self.knots_t.basis_derivs_unchecked(span_t, t, ord);
        let (p, q) = self.degrees();
        let len = (p + 1) * (q + 1);
        let z = T::zero();

        // weighted tensor products A = N_i N_j w_ij and their derivatives
        let mut a = vec![z; len];
        let mut a_s = vec![z; len];
        let mut a_t = vec![z; len];
        let mut a_ss = vec![z; len];
        let mut a_st = vec![z; len];
        let mut a_tt = vec![z; len];
        for ia in 0..=p {
            for jb in 0..=q {
                let k = ia * (q + 1) + jb;
                let w = self.weights[self.index(span_s - p + ia, span_t - q + jb)];
                a[k] = ns[0][ia] * nt[0][jb] * w;
                if ord >= 1 {
                    a_s[k] = ns[1][ia] * nt[0][jb] * w;
                    a_t[k] = ns[0][ia] * nt[1][jb] * w;
                }
                if ord >= 2 {
                    a_ss[k] = ns[2][ia] * nt[0][jb] * w;
                    a_st[k] = ns[1][ia] * nt[1][jb] * w;
                    a_tt[k] = ns[0][ia] * nt[2][jb] * w;
                }
            }
        }
        let w: T = a.iter().copied().sum();
        let values: Vec<T> = a.iter().map(|&x| x / w).collect();
        let mut out = RationalBasis {
            span_s,
            span_t,
            degrees: (p, q),
            values,
            d_s: vec![z; len],
            d_t: vec![z; len],
            d_ss: vec![z; len],
            d_st: vec![z; len],
            d_tt: vec![z; len],
        };
        if ord >= 1 {
            let w_s: T = a_s.iter().copied().sum();
            let w_t: T = a_t.iter().copied().sum();
            for k in 0..len {
                out.d_s[k] = (a_s[k] - out.values[k] * w_s) / w;
                out.d_t[k] = (a_t[k] - out.values[k] * w_t) / w;
            }
            if ord >= 2 {
                let w_ss: T = a_ss.iter().copied().sum();
                let w_st: T = a_st.iter().copied().sum();
                let w_tt: T = a_tt.iter().copied().sum();
                let two = T::one() + T::one();
                for k in 0..len {
                    let r = out.values[k];
                    out.d_ss[k] = (a_ss[k] - two * out.d_s[k] * w_s - r * w_ss) / w;
                    out.d_tt[k] = (a_tt[k] - two * out.d_t[k] * w_t - r * w_tt) / w;
                    out.d_st[k] =
                        (a_st[k] - out.d_s[k] * w_t - out.d_t[k] * w_s - r * w_st) / w;
                }
            }
        }
        Ok(out)
    }

    /// `S(s, t)`.
    pub fn point(&self, s: T, t: T) -> Result<Vec3<T>> {
        let b = self.rational_basis(s, t, 0)?;
        Ok(self.combine(&b, &b.values))
    }

    /// `(S, S_s, S_t)`.
    pub fn derivs(&self, s: T, t: T) -> Result<(Vec3<T>, Vec3<T>, Vec3<T>)> {
        let b = self.rational_basis(s, t, 1)?;
        Ok((
            self.combine(&b, &b.values),
            self.combine(&b, &b.d_s),
            self.combine(&b, &b.d_t),
        ))
    }

    /// Sum of control points weighted by per-local-function coefficients.
    pub fn combine(&self, basis: &RationalBasis<T>, coeffs: &[T]) -> Vec3<T> {
        let mut acc = [T::zero(); 3];
        for (k, &c) in coeffs.iter().enumerate() {
            let (i, j) = basis.grid_index(k);
            let pt = self.control_point(i, j);
            for d in 0..3 {
                acc[d] += c * pt[d];
            }
        }
        acc
    }

    /// Inserts the given knots (Boehm's algorithm, one knot at a time, per
    /// direction). The refined surface is geometrically identical.
    pub fn refine_knots(&self, new_s: &[T], new_t: &[T]) -> Result<Self> {
        let mut new_s = new_s.to_vec();
        let mut new_t = new_t.to_vec();
        new_s.sort_by(|a, b| a.partial_cmp(b).expect("finite knots"));
        new_t.sort_by(|a, b| a.partial_cmp(b).expect("finite knots"));
        check_insertion(&self.knots_s, &new_s, "s")?;
        check_insertion(&self.knots_t, &new_t, "t")?;
        if new_s.is_empty() && new_t.is_empty() {
            return Ok(self.clone());
        }

        let (ms, mt) = self.net_size();
        // homogeneous net, indexed [i][j]
        let mut net: Vec<Vec<[T; 4]>> = (0..ms)
            .map(|i| {
                (0..mt)
                    .map(|j| {
                        let k = self.index(i, j);
                        let w = self.weights[k];
                        let c = self.control_net[k];
                        [c[0] * w, c[1] * w, c[2] * w, w]
                    })
                    .collect()
            })
            .collect();

        let mut knots_s = self.knots_s.knots().to_vec();
        let ps = self.knots_s.degree();
        for &u in &new_s {
            let cols = net[0].len();
            let mut new_net = vec![Vec::with_capacity(cols); net.len() + 1];
            let mut new_knots = Vec::new();
            for j in 0..cols {
                let column: Vec<[T; 4]> = net.iter().map(|row| row[j]).collect();
                let (k, pts) = insert_knot(&knots_s, ps, &column, u);
                for (i, pt) in pts.into_iter().enumerate() {
                    new_net[i].push(pt);
                }
                new_knots = k;
            }
            net = new_net;
            knots_s = new_knots;
        }

        let mut knots_t = self.knots_t.knots().to_vec();
        let pt_deg = self.knots_t.degree();
        for &u in &new_t {
            let mut new_knots = Vec::new();
            for row in net.iter_mut() {
                let (k, pts) = insert_knot(&knots_t, pt_deg, row, u);
                *row = pts;
                new_knots = k;
            }
            knots_t = new_knots;
        }

        let mut control_net = Vec::new();
        let mut weights = Vec::new();
        for row in &net {
            for h in row {
                let w = h[3];
                control_net.push([h[0] / w, h[1] / w, h[2] / w]);
                weights.push(w);
            }
        }
        NurbsSurface::new(
            KnotVector::clamped(knots_s, ps)?,
            KnotVector::clamped(knots_t, pt_deg)?,
            control_net,
            weights,
        )
    }

    /// Refines to `spans_s x spans_t` equal parametric spans by inserting the
    /// uniform breakpoints that are not already knots.
    pub fn refine_uniform(&self, spans_s: usize, spans_t: usize) -> Result<Self> {
        let ins_s = uniform_insertions(&self.knots_s, spans_s, "s")?;
        let ins_t = uniform_insertions(&self.knots_t, spans_t, "t")?;
        self.refine_knots(&ins_s, &ins_t)
    }
}

fn uniform_insertions<T: Scalar>(kv: &KnotVector<T>, spans: usize, dir: &str) -> Result<Vec<T>> {
    let existing = kv.spans().len();
    if spans < existing {
        return Err(Error::Refinement(format!(
            "{spans} spans requested in {dir} but the surface already has {existing}"
        )));
    }
    let (lo, hi) = kv.domain();
    let tol = (hi - lo) * crate::scalar::lit(1e-12);
    let mut out = Vec::new();
    for k in 1..spans {
        let u = lo + (hi - lo) * from_usize::<T>(k) / from_usize::<T>(spans);
        if !kv.knots().iter().any(|&x| (x - u).abs() <= tol) {
            out.push(u);
        }
    }
    Ok(out)
}

fn check_insertion<T: Scalar>(kv: &KnotVector<T>, new: &[T], dir: &str) -> Result<()> {
    let (lo, hi) = kv.domain();
    for &u in new {
        if !(u > lo && u < hi) {
            return Err(Error::Refinement(format!(
                "knot {u} in {dir} is not strictly inside ({lo}, {hi})"
            )));
        }
        let mult = kv.multiplicity(u) + new.iter().filter(|&&x| x == u).count();
        if mult > kv.degree() {
            return Err(Error::Refinement(format!(
                "knot {u} in {dir} would reach multiplicity {mult} > degree {}",
                kv.degree()
            )));
        }
    }
    Ok(())
}

/// Single knot insertion on a homogeneous control polygon.
fn insert_knot<T: Scalar, const N: usize>(
    knots: &[T],
    p: usize,
    pts: &[[T; N]],
    u: T,
) -> (Vec<T>, Vec<[T; N]>) {
    let n = pts.len();
    // span k with knots[k] <= u < knots[k+1]
    let mut k = p;
    while k + 1 < n && knots[k + 1] <= u {
        k += 1;
    }
    let mut new_pts = Vec::with_capacity(n + 1);
    for i in 0..=n {
        if i + p <= k {
            new_pts.push(pts[i]);
        } else if i > k {
            new_pts.push(pts[i - 1]);
        } else {
            let alpha = (u - knots[i]) / (knots[i + p] - knots[i]);
            let mut q = [T::zero(); N];
            for d in 0..N {
                q[d] = alpha * pts[i][d] + (T::one() - alpha) * pts[i - 1][d];
            }
            new_pts.push(q);
        }
    }
    let mut new_knots = knots[..=k].to_vec();
    new_knots.push(u);
    new_knots.extend_from_slice(&knots[k + 1..]);
    (new_knots, new_pts)
}
