//! Single-patch mid-surfaces used by the shipped example cases.
//!
//! All presets are parametrized on `[0, 1]^2` with clamped knots and no
//! interior knots.

use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::scalar::{from_usize, lit, Scalar};
use crate::splines::{KnotVector, NurbsSurface};

/// Greville abscissa of Bernstein coefficient `i` of degree `p`.
fn greville<T: Scalar>(i: usize, p: usize) -> T {
    if p == 0 {
        lit(0.5)
    } else {
        from_usize::<T>(i) / from_usize::<T>(p)
    }
}

/// Bernstein coefficient `i` (degree `p >= 2`) of the quadratic `(2u - 1)^2`.
fn centered_square_coefficient<T: Scalar>(i: usize, p: usize) -> T {
    let pi = from_usize::<T>(p);
    let ii = from_usize::<T>(i);
    let u2 = ii * (ii - T::one()) / (pi * (pi - T::one()));
    let u1 = ii / pi;
    lit::<T>(4.0) * u2 - lit::<T>(4.0) * u1 + T::one()
}

fn bezier_patch<T: Scalar>(
    p: usize,
    q: usize,
    point: impl Fn(usize, usize) -> Vec3<T>,
) -> Result<NurbsSurface<T>> {
    let ks = KnotVector::uniform_clamped(p, 1)?;
    let kt = KnotVector::uniform_clamped(q, 1)?;
    let mut net = Vec::with_capacity((p + 1) * (q + 1));
    for i in 0..=p {
        for j in 0..=q {
            net.push(point(i, j));
        }
    }
    let n = net.len();
    NurbsSurface::new(ks, kt, net, vec![T::one(); n])
}

fn check_degree(name: &str, p: usize, min: usize) -> Result<()> {
    if p < min {
        return Err(Error::config(
            "degrees",
            format!("the {name} preset needs degree >= {min}, got {p}"),
        ));
    }
    Ok(())
}

fn check_positive<T: Scalar>(key: &str, v: T) -> Result<()> {
    if !(v > T::zero()) || !v.is_finite() {
        return Err(Error::config(key, "must be positive"));
    }
    Ok(())
}

/// Flat `length x width` rectangle in the z = 0 plane, corner at the origin.
pub fn plate<T: Scalar>(length: T, width: T, p: usize, q: usize) -> Result<NurbsSurface<T>> {
    check_degree("plate", p.min(q), 1)?;
    check_positive("geometry.length", length)?;
    check_positive("geometry.width", width)?;
    bezier_patch(p, q, |i, j| {
        [
            length * greville::<T>(i, p),
            width * greville::<T>(j, q),
            T::zero(),
        ]
    })
}

/// Hyperbolic paraboloid `z = height * (x'^2 / a^2 - y'^2 / b^2)` over a
/// `length x width` plan centred on the origin, with `a`, `b` the half
/// side lengths. Edge midpoints sit at `+-height`; corners at zero. Exact
/// for degrees >= 2.
pub fn hypar<T: Scalar>(length: T, width: T, height: T, p: usize, q: usize) -> Result<NurbsSurface<T>> {
    check_degree("hypar", p.min(q), 2)?;
    check_positive("geometry.length", length)?;
    check_positive("geometry.width", width)?;
    let half = lit::<T>(0.5);
    bezier_patch(p, q, |i, j| {
        [
            length * (greville::<T>(i, p) - half),
            width * (greville::<T>(j, q) - half),
            height * (centered_square_coefficient::<T>(i, p) - centered_square_coefficient::<T>(j, q)),
        ]
    })
}

/// Circular cylindrical panel of the given radius and opening angle
/// (degrees, below 180) about the y axis, symmetric about the z axis.
/// The arc direction (s) is an exact rational quadratic; the axial
/// direction (t) is linear represented at degree `q`.
pub fn cylinder<T: Scalar>(radius: T, length: T, angle_deg: T, q: usize) -> Result<NurbsSurface<T>> {
    check_degree("cylinder", q, 1)?;
    check_positive("geometry.radius", radius)?;
    check_positive("geometry.length", length)?;
    if !(angle_deg > T::zero() && angle_deg < lit(180.0)) {
        return Err(Error::config("geometry.angle", "must lie in (0, 180) degrees"));
    }
    let phi = angle_deg.to_radians();
    let half = phi * lit(0.5);
    let mid = lit::<T>(std::f64::consts::FRAC_PI_2);
    let (a0, a1) = (mid - half, mid + half);
    let arc = [
        [radius * a0.cos(), radius * a0.sin()],
        [radius / half.cos() * mid.cos(), radius / half.cos() * mid.sin()],
        [radius * a1.cos(), radius * a1.sin()],
    ];
    let arc_w = [T::one(), half.cos(), T::one()];
    let ks = KnotVector::uniform_clamped(2, 1)?;
    let kt = KnotVector::uniform_clamped(q, 1)?;
    let mut net = Vec::new();
    let mut weights = Vec::new();
    for i in 0..3 {
        for j in 0..=q {
            net.push([arc[i][0], length * greville::<T>(j, q), arc[i][1]]);
            weights.push(arc_w[i]);
        }
    }
    NurbsSurface::new(ks, kt, net, weights)
}

/// Ruled surface between the segment `(-L/2..L/2, 0, 0)` at t = 0 and the
/// same segment turned by 90 degrees about z and lifted to `z = height` at
/// t = 1.
pub fn twisted<T: Scalar>(length: T, height: T, p: usize, q: usize) -> Result<NurbsSurface<T>> {
    check_degree("twisted", p.min(q), 1)?;
    check_positive("geometry.length", length)?;
    check_positive("geometry.height", height)?;
    let half = lit::<T>(0.5);
    bezier_patch(p, q, |i, j| {
        let s = greville::<T>(i, p);
        let t = greville::<T>(j, q);
        let a = [length * (s - half), T::zero(), T::zero()];
        let b = [T::zero(), length * (s - half), height];
        [
            (T::one() - t) * a[0] + t * b[0],
            (T::one() - t) * a[1] + t * b[1],
            (T::one() - t) * a[2] + t * b[2],
        ]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hypar_matches_closed_form() {
        for deg in [2usize, 3, 4] {
            let s = hypar(100.0, 80.0, 20.0, deg, deg).unwrap();
            for k in 0..=8 {
                for l in 0..=8 {
                    let (u, v) = (k as f64 / 8.0, l as f64 / 8.0);
                    let p = s.point(u, v).unwrap();
                    let (x, y) = (100.0 * (u - 0.5), 80.0 * (v - 0.5));
                    assert!((p[0] - x).abs() < 1e-10);
                    assert!((p[1] - y).abs() < 1e-10);
                    let z = 20.0 * (x * x / 2500.0 - y * y / 1600.0);
                    assert!((p[2] - z).abs() < 1e-10, "deg {deg}: {} vs {z}", p[2]);
                }
            }
        }
        assert!(hypar(100.0, 100.0, 20.0, 1, 2).is_err());
    }

    #[test]
    fn twisted_edges_are_rotated_segments() {
        let s = twisted(100.0f64, 50.0, 2, 2).unwrap();
        let a = s.point(0.25, 0.0).unwrap();
        assert!((a[0] + 25.0).abs() < 1e-12 && a[1].abs() < 1e-12 && a[2].abs() < 1e-12);
        let b = s.point(0.25, 1.0).unwrap();
        assert!(b[0].abs() < 1e-12 && (b[1] + 25.0).abs() < 1e-12 && (b[2] - 50.0).abs() < 1e-12);
    }

    #[test]
    fn plate_is_linear_parametrization() {
        let s = plate(100.0f64, 50.0, 3, 2).unwrap();
        let p = s.point(0.3, 0.6).unwrap();
        assert!((p[0] - 30.0).abs() < 1e-12 && (p[1] - 30.0).abs() < 1e-12);
    }

    #[test]
    fn cylinder_rejects_half_turn() {
        assert!(cylinder(50.0, 100.0, 180.0, 2).is_err());
    }
}
