//! Shell solid map built from a NURBS mid-surface: local orthonormal frames,
//! the thickness offset, Jacobians, and the CAD / design / analysis model
//! hierarchy.

pub mod presets;

use crate::error::{Error, Result};
use crate::linalg::{add3, cross3, det3, dot3, norm3, scale3, sub3, Mat3, Vec3};
use crate::scalar::{lit, to_f64, Scalar};
use crate::splines::NurbsSurface;

/// Relative step used for finite-difference derivatives of the frame.
pub const FRAME_FD_STEP: f64 = 1e-6;

/// Mid-surface plus constant thickness.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellModel<T> {
    pub mid_surface: NurbsSurface<T>,
    pub thickness: T,
}

impl<T: Scalar> ShellModel<T> {
    pub fn new(mid_surface: NurbsSurface<T>, thickness: T) -> Result<Self> {
        if !(thickness > T::zero()) || !thickness.is_finite() {
            return Err(Error::config("thickness", "must be positive"));
        }
        Ok(Self {
            mid_surface,
            thickness,
        })
    }
}

/// Orthonormal triad at a mid-surface point; `v3` is the unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame<T> {
    pub v1: Vec3<T>,
    pub v2: Vec3<T>,
    pub v3: Vec3<T>,
}

impl<T: Scalar> LocalFrame<T> {
    /// Frame from the two surface tangents.
    pub fn from_tangents(s_s: Vec3<T>, s_t: Vec3<T>) -> Option<Self> {
        let n = cross3(s_s, s_t);
        let len = norm3(n);
        if !(len > lit::<T>(1e-12) * norm3(s_s) * norm3(s_t)) {
            return None;
        }
        let v3 = scale3(n, T::one() / len);
        let threshold = T::one() - lit(1e-6);
        let axes = [
            [T::one(), T::zero(), T::zero()],
            [T::zero(), T::one(), T::zero()],
            [T::zero(), T::zero(), T::one()],
        ];
        let axis = axes
            .into_iter()
            .find(|a| dot3(v3, *a).abs() < threshold)
            .expect("a unit normal cannot be parallel to all three axes");
        let w = cross3(v3, axis);
        let v1 = scale3(w, T::one() / norm3(w));
        let v2 = cross3(v3, v1);
        Some(Self { v1, v2, v3 })
    }

    /// Columns `[v1 v2 v3]` as a row-major matrix (`m[i][a] = v_a[i]`).
    pub fn as_matrix(&self) -> Mat3<T> {
        let mut m = [[T::zero(); 3]; 3];
        for i in 0..3 {
            m[i][0] = self.v1[i];
            m[i][1] = self.v2[i];
            m[i][2] = self.v3[i];
        }
        m
    }
}

/// Local frame of `surf` at `(s, t)`.
pub fn local_frame<T: Scalar>(surf: &NurbsSurface<T>, s: T, t: T) -> Result<LocalFrame<T>> {
    let (_, su, sv) = surf.derivs(s, t)?;
    LocalFrame::from_tangents(su, sv).ok_or(Error::SingularFrame {
        s: to_f64(s),
        t: to_f64(t),
    })
}

/// Everything about the shell map at one `(s, t)` that the element routines
/// need: the mid-surface point and tangents, the frame, and the frame's
/// parametric derivatives.
#[derive(Debug, Clone, Copy)]
pub struct SurfaceGeometry<T> {
    pub point: Vec3<T>,
    pub s_s: Vec3<T>,
    pub s_t: Vec3<T>,
    pub frame: LocalFrame<T>,
    /// `[dv1/ds, dv2/ds, dv3/ds]`
    pub frame_ds: [Vec3<T>; 3],
    /// `[dv1/dt, dv2/dt, dv3/dt]`
    pub frame_dt: [Vec3<T>; 3],
}

fn fd_pair<T: Scalar>(x: T, lo: T, hi: T) -> (T, T) {
    let h = (hi - lo) * lit(FRAME_FD_STEP);
    ((x - h).max(lo), (x + h).min(hi))
}

fn frame_difference<T: Scalar>(a: &LocalFrame<T>, b: &LocalFrame<T>, inv_step: T) -> [Vec3<T>; 3] {
    [
        scale3(sub3(b.v1, a.v1), inv_step),
        scale3(sub3(b.v2, a.v2), inv_step),
        scale3(sub3(b.v3, a.v3), inv_step),
    ]
}

impl<T: Scalar> SurfaceGeometry<T> {
    /// Frame derivatives come from central differences of the frame with a
    /// step of `1e-6` times the parametric domain length (one-sided at the
    /// domain boundary).
    pub fn at(surf: &NurbsSurface<T>, s: T, t: T) -> Result<Self> {
        let (point, s_s, s_t) = surf.derivs(s, t)?;
        let frame = LocalFrame::from_tangents(s_s, s_t).ok_or(Error::SingularFrame {
            s: to_f64(s),
            t: to_f64(t),
        })?;
        let ((slo, shi), (tlo, thi)) = surf.domain();
        let (sm, sp) = fd_pair(s, slo, shi);
        let (tm, tp) = fd_pair(t, tlo, thi);
        let frame_ds = frame_difference(
            &local_frame(surf, sm, t)?,
            &local_frame(surf, sp, t)?,
            T::one() / (sp - sm),
        );
        let frame_dt = frame_difference(
            &local_frame(surf, s, tm)?,
            &local_frame(surf, s, tp)?,
            T::one() / (tp - tm),
        );
        Ok(Self {
            point,
            s_s,
            s_t,
            frame,
            frame_ds,
            frame_dt,
        })
    }

    /// Jacobian `d(x, y, z)/d(s, t, zeta)` (rows x, y, z; columns s, t, zeta).
    pub fn jacobian(&self, thickness: T, zeta: T) -> Mat3<T> {
        let half = thickness * lit(0.5);
        let xs = add3(self.s_s, scale3(self.frame_ds[2], zeta * half));
        let xt = add3(self.s_t, scale3(self.frame_dt[2], zeta * half));
        let xz = scale3(self.frame.v3, half);
        let mut j = [[T::zero(); 3]; 3];
        for i in 0..3 {
            j[i][0] = xs[i];
            j[i][1] = xt[i];
            j[i][2] = xz[i];
        }
        j
    }

    /// `|S_s x S_t|`, the mid-surface area element.
    pub fn area_element(&self) -> T {
        norm3(cross3(self.s_s, self.s_t))
    }
}

fn check_zeta<T: Scalar>(zeta: T) -> Result<()> {
    if !(zeta >= -T::one() && zeta <= T::one()) {
        return Err(Error::Domain {
            value: to_f64(zeta),
            lo: -1.0,
            hi: 1.0,
        });
    }
    Ok(())
}

/// Point of the shell solid: `S(s, t) + zeta * v3(s, t) * h / 2`.
pub fn shell_point<T: Scalar>(model: &ShellModel<T>, s: T, t: T, zeta: T) -> Result<Vec3<T>> {
    check_zeta(zeta)?;
    let b = model.mid_surface.rational_basis(s, t, 1)?;
    let p = model.mid_surface.combine(&b, &b.values);
    if zeta == T::zero() {
        return Ok(p);
    }
    let su = model.mid_surface.combine(&b, &b.d_s);
    let sv = model.mid_surface.combine(&b, &b.d_t);
    let frame = LocalFrame::from_tangents(su, sv).ok_or(Error::SingularFrame {
        s: to_f64(s),
        t: to_f64(t),
    })?;
    // the sum of rational basis values multiplying the offset is 1
    let unity: T = b.values.iter().copied().sum();
    Ok(add3(
        p,
        scale3(frame.v3, zeta * model.thickness * lit(0.5) * unity),
    ))
}

/// Jacobian of the shell map at `(s, t, zeta)`; fails when nearly singular.
pub fn jacobian<T: Scalar>(model: &ShellModel<T>, s: T, t: T, zeta: T) -> Result<Mat3<T>> {
    check_zeta(zeta)?;
    let g = SurfaceGeometry::at(&model.mid_surface, s, t)?;
    let j = g.jacobian(model.thickness, zeta);
    check_jacobian(&j, s, t, zeta)?;
    Ok(j)
}

pub(crate) fn check_jacobian<T: Scalar>(j: &Mat3<T>, s: T, t: T, zeta: T) -> Result<T> {
    let det = det3(j);
    let scale = (0..3)
        .map(|c| norm3([j[0][c], j[1][c], j[2][c]]))
        .fold(T::one(), |a, b| a * b);
    if !(det.abs() >= lit::<T>(1e-14) * scale) {
        return Err(Error::SingularJacobian {
            det: to_f64(det),
            s: to_f64(s),
            t: to_f64(t),
            zeta: to_f64(zeta),
        });
    }
    Ok(det)
}

/// The CAD shell together with its design-level (density) and
/// analysis-level (displacement) refinements.
#[derive(Debug, Clone)]
pub struct MultiLevelModel<T> {
    pub cad: ShellModel<T>,
    pub design_basis: NurbsSurface<T>,
    pub analysis_basis: NurbsSurface<T>,
}

impl<T: Scalar> MultiLevelModel<T> {
    /// Shell model on the analysis-level basis (same geometry as the CAD).
    pub fn analysis_shell(&self) -> ShellModel<T> {
        ShellModel {
            mid_surface: self.analysis_basis.clone(),
            thickness: self.cad.thickness,
        }
    }
}

/// Uniformly refines the CAD mid-surface to `design_spans` and
/// `analysis_spans` knot spans per direction.
pub fn build_multilevel<T: Scalar>(
    cad: &ShellModel<T>,
    design_spans: (usize, usize),
    analysis_spans: (usize, usize),
) -> Result<MultiLevelModel<T>> {
    let cad_spans = (
        cad.mid_surface.knots_s().spans().len(),
        cad.mid_surface.knots_t().spans().len(),
    );
    if design_spans.0 < cad_spans.0 || design_spans.1 < cad_spans.1 {
        return Err(Error::config(
            "design_spans",
            format!(
                "{design_spans:?} is coarser than the CAD surface ({cad_spans:?} spans)"
            ),
        ));
    }
    if analysis_spans.0 < design_spans.0 || analysis_spans.1 < design_spans.1 {
        return Err(Error::config(
            "analysis_spans",
            format!("{analysis_spans:?} is coarser than design_spans {design_spans:?}"),
        ));
    }
    let design_basis = cad
        .mid_surface
        .refine_uniform(design_spans.0, design_spans.1)?;
    let analysis_basis = if analysis_spans == design_spans {
        design_basis.clone()
    } else {
        cad.mid_surface
            .refine_uniform(analysis_spans.0, analysis_spans.1)?
    };
    Ok(MultiLevelModel {
        cad: cad.clone(),
        design_basis,
        analysis_basis,
    })
}
