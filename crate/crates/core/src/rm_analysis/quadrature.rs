use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// Gauss-Legendre abscissae and weights on [-1, 1].
pub fn gauss_legendre<T: Scalar>(n: usize) -> Vec<(T, T)> {
    assert!(n >= 1);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Chebyshev-type initial guess, refined by Newton on P_n
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            out.push((T::zero(), lit(2.0)));
            return out;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((lit(-x), lit(w)));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite nodes"));
    out
}

/// Tensor Gauss rule: points per direction in (s, t, zeta).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule<T> {
    pub points_per_direction: (usize, usize, usize),
    pub s: Vec<(T, T)>,
    pub t: Vec<(T, T)>,
    pub zeta: Vec<(T, T)>,
}

impl<T: Scalar> GaussRule<T> {
    pub fn new(n_s: usize, n_t: usize, n_zeta: usize) -> Result<Self> {
        if n_s == 0 || n_t == 0 || n_zeta == 0 {
            return Err(Error::config("gauss", "at least one point per direction"));
        }
        Ok(Self {
            points_per_direction: (n_s, n_t, n_zeta),
            s: gauss_legendre(n_s),
            t: gauss_legendre(n_t),
            zeta: gauss_legendre(n_zeta),
        })
    }

    /// `(p + 1) x (q + 1)` in-plane points and 2 through the thickness.
    pub fn default_for_degrees(p: usize, q: usize) -> Self {
        Self::new(p + 1, q + 1, 2).expect("positive counts")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_degree_2n_minus_1() {
        for n in 1..=6 {
            let rule = gauss_legendre::<f64>(n);
            let wsum: f64 = rule.iter().map(|p| p.1).sum();
            assert!((wsum - 2.0).abs() < 1e-14);
            for deg in 0..2 * n {
                let integral: f64 = rule.iter().map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((integral - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn two_point_nodes() {
        let r = gauss_legendre::<f64>(2);
        assert!((r[0].0 + 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((r[1].1 - 1.0).abs() < 1e-15);
    }
}
