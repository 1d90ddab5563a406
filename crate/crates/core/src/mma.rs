//! Method of Moving Asymptotes for one objective and one inequality
//! constraint `g(x) <= 0` on the box `[0, 1]^n`.

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmaConfig<T> {
    pub move_limit: T,
    pub asyinit: T,
    pub asyincr: T,
    pub asydecr: T,
    /// Smallest allowed distance between an asymptote and `x`. On a
    /// quadratic the iterates can lock into a two-cycle of amplitude about
    /// half this gap, so it bounds the attainable accuracy.
    pub min_asymptote_gap: T,
    /// Target residual of the subproblem's scalar KKT condition.
    pub kkt_tolerance: T,
}

impl<T: Scalar> Default for MmaConfig<T> {
    fn default() -> Self {
        Self {
            move_limit: lit(0.1),
            asyinit: lit(0.1),
            asyincr: lit(1.1),
            asydecr: lit(0.7),
            min_asymptote_gap: lit(1e-3),
            kkt_tolerance: lit(1e-9),
        }
    }
}

impl<T: Scalar> MmaConfig<T> {
    pub fn validated(self) -> Result<Self> {
        if !(self.move_limit > T::zero() && self.move_limit <= T::one()) {
            return Err(Error::config("mma.move", "must lie in (0, 1]"));
        }
        if !(self.asyinit > T::zero() && self.asyinit <= T::one()) {
            return Err(Error::config("mma.asyinit", "must lie in (0, 1]"));
        }
        if !(self.asydecr > T::zero() && self.asydecr < T::one()) {
            return Err(Error::config("mma.asydecr", "must lie in (0, 1)"));
        }
        if !(self.asyincr > T::one()) {
            return Err(Error::config("mma.asyincr", "must be > 1"));
        }
        if !(self.min_asymptote_gap > T::zero() && self.min_asymptote_gap < self.asyinit) {
            return Err(Error::config("mma.min_asymptote_gap", "must lie in (0, asyinit)"));
        }
        if !(self.kkt_tolerance > T::zero()) {
            return Err(Error::config("mma.kkt_tolerance", "must be positive"));
        }
        Ok(self)
    }
}

/// Iterates and asymptotes carried between updates.
#[derive(Debug, Clone, PartialEq)]
pub struct MmaState<T> {
    pub iteration: usize,
    pub x_prev: Vec<T>,
    pub x_prev2: Vec<T>,
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Scalar> MmaState<T> {
    pub fn new(n: usize) -> Self {
        Self {
            iteration: 0,
            x_prev: vec![T::zero(); n],
            x_prev2: vec![T::zero(); n],
            lower: vec![T::zero(); n],
            upper: vec![T::one(); n],
        }
    }
}

/// The convex separable approximation at one iterate:
/// `f~(x) = r0 + sum p0/(U-x) + q0/(x-L)` and likewise `g~` with `r1`,
/// over `alpha <= x <= beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct Subproblem<T> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    pub alpha: Vec<T>,
    pub beta: Vec<T>,
    pub p0: Vec<T>,
    pub q0: Vec<T>,
    pub p1: Vec<T>,
    pub q1: Vec<T>,
    pub r0: T,
    pub r1: T,
}

fn rational_sum<T: Scalar>(p: &[T], q: &[T], l: &[T], u: &[T], x: &[T]) -> T {
    let mut s = T::zero();
    for j in 0..x.len() {
        s += p[j] / (u[j] - x[j]) + q[j] / (x[j] - l[j]);
    }
    s
}

/// Solution of the subproblem with its multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSolution<T> {
    pub x: Vec<T>,
    pub lambda: T,
    /// `|lambda g~(x)|` if `lambda > 0`, else `max(g~(x), 0)`.
    pub kkt_residual: T,
}

impl<T: Scalar> Subproblem<T> {
    pub fn objective(&self, x: &[T]) -> T {
        self.r0 + rational_sum(&self.p0, &self.q0, &self.lower, &self.upper, x)
    }

    pub fn constraint(&self, x: &[T]) -> T {
        self.r1 + rational_sum(&self.p1, &self.q1, &self.lower, &self.upper, x)
    }

    /// Minimiser of the Lagrangian for a fixed multiplier.
    pub fn primal(&self, lambda: T) -> Vec<T> {
        (0..self.alpha.len())
            .map(|j| {
                let p = (self.p0[j] + lambda * self.p1[j]).sqrt();
                let q = (self.q0[j] + lambda * self.q1[j]).sqrt();
                let x = (self.lower[j] * p + self.upper[j] * q) / (p + q);
                x.max(self.alpha[j]).min(self.beta[j])
            })
            .collect()
    }

    /// Maximises the concave one-dimensional dual by bisection on the
    /// monotone constraint value.
    pub fn solve(&self, tolerance: T) -> SubproblemSolution<T> {
        let x0 = self.primal(T::zero());
        let g0 = self.constraint(&x0);
        if g0 <= T::zero() {
            return SubproblemSolution {
                x: x0,
                lambda: T::zero(),
                kkt_residual: T::zero(),
            };
        }
        let mut hi = T::one();
        let mut x_hi = self.primal(hi);
        let mut guard = 0;
        while self.constraint(&x_hi) > T::zero() && guard < 200 {
            hi = hi * lit(10.0);
            x_hi = self.primal(hi);
            guard += 1;
        }
        if self.constraint(&x_hi) > T::zero() {
            // the box admits no feasible point of g~: take the least violating one
            let r = self.constraint(&x_hi);
            log::warn!("MMA subproblem infeasible within the move limits (g~ = {r})");
            return SubproblemSolution {
                x: x_hi,
                lambda: hi,
                kkt_residual: r,
            };
        }
        let mut lo = T::zero();
        let mut best = (hi, x_hi);
        for _ in 0..400 {
            let mid = (lo + hi) * lit(0.5);
            if mid <= lo || mid >= hi {
                break;
            }
            let xm = self.primal(mid);
            let gm = self.constraint(&xm);
            if gm > T::zero() {
                lo = mid;
            } else {
                hi = mid;
                best = (mid, xm);
            }
            if (mid * gm).abs() <= tolerance && gm <= T::zero() {
                break;
            }
        }
        let (lambda, x) = best;
        let r = (lambda * self.constraint(&x)).abs();
        SubproblemSolution {
            x,
            lambda,
            kkt_residual: r,
        }
    }
}

/// Builds the subproblem at `x` and advances the asymptotes in `state`.
pub fn build_subproblem<T: Scalar>(
    x: &[T],
    f0: T,
    df0: &[T],
    g: T,
    dg: &[T],
    state: &mut MmaState<T>,
    cfg: &MmaConfig<T>,
) -> Result<Subproblem<T>> {
    let n = x.len();
    if df0.len() != n || dg.len() != n || state.lower.len() != n {
        return Err(Error::Contract("MMA vectors have inconsistent lengths".into()));
    }
    if !f0.is_finite() || !g.is_finite() {
        return Err(Error::Input("non-finite objective or constraint value".into()));
    }
    if let Some(j) = df0.iter().chain(dg).position(|v| !v.is_finite()) {
        return Err(Error::Input(format!("non-finite gradient entry at index {}", j % n.max(1))));
    }
    state.iteration += 1;
    let (xmin, xmax) = (T::zero(), T::one());
    let range = xmax - xmin;
    let mut lower = vec![T::zero(); n];
    let mut upper = vec![T::zero(); n];
    for j in 0..n {
        if state.iteration <= 2 {
            lower[j] = x[j] - cfg.asyinit * range;
            upper[j] = x[j] + cfg.asyinit * range;
        } else {
            let sign = (x[j] - state.x_prev[j]) * (state.x_prev[j] - state.x_prev2[j]);
            let factor = if sign > T::zero() {
                cfg.asyincr
            } else if sign < T::zero() {
                cfg.asydecr
            } else {
                T::one()
            };
            lower[j] = x[j] - factor * (state.x_prev[j] - state.lower[j]);
            upper[j] = x[j] + factor * (state.upper[j] - state.x_prev[j]);
        }
        let (near, far) = (cfg.min_asymptote_gap * range, lit::<T>(10.0) * range);
        lower[j] = lower[j].max(x[j] - far).min(x[j] - near);
        upper[j] = upper[j].min(x[j] + far).max(x[j] + near);
    }

    let raa0 = lit::<T>(1e-5);
    let mut alpha = vec![T::zero(); n];
    let mut beta = vec![T::zero(); n];
    let mut p0 = vec![T::zero(); n];
    let mut q0 = vec![T::zero(); n];
    let mut p1 = vec![T::zero(); n];
    let mut q1 = vec![T::zero(); n];
    let (c_pos, c_neg) = (lit::<T>(1.001), lit::<T>(0.001));
    for j in 0..n {
        let tenth = lit::<T>(0.1);
        alpha[j] = xmin
            .max(lower[j] + tenth * (x[j] - lower[j]))
            .max(x[j] - cfg.move_limit * range);
        beta[j] = xmax
            .min(upper[j] - tenth * (upper[j] - x[j]))
            .min(x[j] + cfg.move_limit * range);
        let ux2 = (upper[j] - x[j]) * (upper[j] - x[j]);
        let xl2 = (x[j] - lower[j]) * (x[j] - lower[j]);
        let reg = raa0 / range;
        let (dp, dn) = (df0[j].max(T::zero()), (-df0[j]).max(T::zero()));
        p0[j] = ux2 * (c_pos * dp + c_neg * dn + reg);
        q0[j] = xl2 * (c_neg * dp + c_pos * dn + reg);
        let (gp, gn) = (dg[j].max(T::zero()), (-dg[j]).max(T::zero()));
        p1[j] = ux2 * (c_pos * gp + c_neg * gn + reg);
        q1[j] = xl2 * (c_neg * gp + c_pos * gn + reg);
    }
    let r0 = f0 - rational_sum(&p0, &q0, &lower, &upper, x);
    let r1 = g - rational_sum(&p1, &q1, &lower, &upper, x);

    state.x_prev2 = std::mem::replace(&mut state.x_prev, x.to_vec());
    state.lower = lower.clone();
    state.upper = upper.clone();
    Ok(Subproblem {
        lower,
        upper,
        alpha,
        beta,
        p0,
        q0,
        p1,
        q1,
        r0,
        r1,
    })
}

/// One MMA step. Returns the new design and the subproblem solution.
pub fn mma_update<T: Scalar>(
    x: &[T],
    f0: T,
    df0: &[T],
    g: T,
    dg: &[T],
    state: &mut MmaState<T>,
    cfg: &MmaConfig<T>,
) -> Result<SubproblemSolution<T>> {
    let sub = build_subproblem(x, f0, df0, g, dg, state, cfg)?;
    let mut sol = sub.solve(cfg.kkt_tolerance);
    for v in sol.x.iter_mut() {
        *v = v.max(T::zero()).min(T::one());
    }
    Ok(sol)
}

/// Which constraint normalisation to apply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstraintKind<T> {
    /// `V / V* - 1`.
    GlobalVolume { target: T },
    /// `Vbar / alpha - 1`.
    LocalVolume { alpha: T },
}

/// Normalised constraint value and gradient.
pub fn constraint_wrap<T: Scalar>(kind: ConstraintKind<T>, value: T, gradient: &[T]) -> Result<(T, Vec<T>)> {
    let bound = match kind {
        ConstraintKind::GlobalVolume { target } => {
            if !(target > T::zero()) {
                return Err(Error::config("problem.volume_fraction", "target volume must be positive"));
            }
            target
        }
        ConstraintKind::LocalVolume { alpha } => {
            if !(alpha > T::zero() && alpha < T::one()) {
                return Err(Error::config("problem.alpha", "must lie in (0, 1)"));
            }
            alpha
        }
    };
    Ok((value / bound - T::one(), gradient.iter().map(|d| *d / bound).collect()))
}
