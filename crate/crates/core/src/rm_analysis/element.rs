//! Strain-displacement operator and solid element matrices.

use crate::error::{Error, Result};
use crate::linalg::{inv3, Vec3};
use crate::rm_analysis::material::{material_matrix, MaterialParams};
use crate::rm_analysis::quadrature::GaussRule;
use crate::scalar::{lit, Scalar};
use crate::shell_geometry::{check_jacobian, LocalFrame, ShellModel, SurfaceGeometry};
use crate::splines::RationalBasis;

/// DOFs per control point: three translations and two rotations.
pub const DOFS_PER_POINT: usize = 5;

/// Constant selector from displacement gradients
/// `(u_x, u_y, u_z, v_x, v_y, v_z, w_x, w_y, w_z)` to engineering strains
/// `(e_xx, e_yy, e_zz, g_xy, g_yz, g_xz)`.
pub fn gradient_to_strain<T: Scalar>() -> [[T; 9]; 6] {
    let o = T::one();
    let mut h = [[T::zero(); 9]; 6];
    h[0][0] = o;
    h[1][4] = o;
    h[2][8] = o;
    h[3][1] = o;
    h[3][3] = o;
    h[4][5] = o;
    h[4][7] = o;
    h[5][2] = o;
    h[5][6] = o;
    h
}

/// Engineering-strain transformation from the global axes to the local
/// frame, induced by the tensor rotation `E' = R^T E R`, `R = [v1 v2 v3]`.
pub fn strain_transform<T: Scalar>(frame: &LocalFrame<T>) -> [[T; 6]; 6] {
    let r = frame.as_matrix();
    let half = lit::<T>(0.5);
    let two = lit::<T>(2.0);
    // (i, j) tensor index pairs per engineering component
    const PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2)];
    let mut t = [[T::zero(); 6]; 6];
    for (k, &(i, j)) in PAIRS.iter().enumerate() {
        let mut e = [[T::zero(); 3]; 3];
        if i == j {
            e[i][i] = T::one();
        } else {
            e[i][j] = half;
            e[j][i] = half;
        }
        for (m, &(a, b)) in PAIRS.iter().enumerate() {
            let mut v = T::zero();
            for x in 0..3 {
                for y in 0..3 {
                    v += r[x][a] * r[y][b] * e[x][y];
                }
            }
            t[m][k] = if a == b { v } else { two * v };
        }
    }
    t
}

/// Strain-displacement matrix at one quadrature point.
#[derive(Debug, Clone)]
pub struct StrainDisplacement<T> {
    /// Row-major `6 x ncols` with `ncols = 5 * (p+1)(q+1)`.
    pub b: Vec<T>,
    pub ncols: usize,
    pub det_j: T,
}

impl<T: Scalar> StrainDisplacement<T> {
    pub fn row(&self, r: usize) -> &[T] {
        &self.b[r * self.ncols..(r + 1) * self.ncols]
    }

    /// `B u_e`: local engineering strains.
    pub fn apply(&self, u: &[T]) -> [T; 6] {
        let mut out = [T::zero(); 6];
        for (r, o) in out.iter_mut().enumerate() {
            *o = crate::linalg::dot(self.row(r), u);
        }
        out
    }
}

/// Builds `B = T H Gamma Phi` at `(s, t, zeta)` for the element whose
/// non-vanishing basis functions are `basis`. Local DOF order is
/// `5 * k + d` for local function `k` and `d` in `(u, v, w, alpha, beta)`.
pub fn strain_displacement<T: Scalar>(
    geom: &SurfaceGeometry<T>,
    basis: &RationalBasis<T>,
    thickness: T,
    s: T,
    t: T,
    zeta: T,
) -> Result<StrainDisplacement<T>> {
    let j = geom.jacobian(thickness, zeta);
    let det_j = check_jacobian(&j, s, t, zeta)?;
    let jinv = inv3(&j).ok_or(Error::SingularJacobian {
        det: 0.0,
        s: crate::scalar::to_f64(s),
        t: crate::scalar::to_f64(t),
        zeta: crate::scalar::to_f64(zeta),
    })?;

    // M = T H Gamma (6 x 9); Gamma maps parametric gradients of each
    // component to physical ones by J^-T.
    let tm = strain_transform(&geom.frame);
    let h = gradient_to_strain::<T>();
    let mut th = [[T::zero(); 9]; 6];
    for r in 0..6 {
        for c in 0..9 {
            let mut v = T::zero();
            for k in 0..6 {
                v += tm[r][k] * h[k][c];
            }
            th[r][c] = v;
        }
    }
    let mut m = [[T::zero(); 9]; 6];
    for r in 0..6 {
        for comp in 0..3 {
            for phys in 0..3 {
                let v = th[r][3 * comp + phys];
                if v == T::zero() {
                    continue;
                }
                // physical[phys] = sum_par Jinv[par][phys] * parametric[par]
                for par in 0..3 {
                    m[r][3 * comp + par] += v * jinv[par][phys];
                }
            }
        }
    }

    let half_h = thickness * lit(0.5);
    let nloc = basis.len();
    let ncols = DOFS_PER_POINT * nloc;
    let mut b = vec![T::zero(); 6 * ncols];
    let neg_v2: Vec3<T> = geom.frame.v2.map(|x| -x);
    let neg_v2_s: Vec3<T> = geom.frame_ds[1].map(|x| -x);
    let neg_v2_t: Vec3<T> = geom.frame_dt[1].map(|x| -x);
    let directors: [(Vec3<T>, Vec3<T>, Vec3<T>); 2] = [
        (neg_v2, neg_v2_s, neg_v2_t),
        (geom.frame.v1, geom.frame_ds[0], geom.frame_dt[0]),
    ];
    for k in 0..nloc {
        let (r, r_s, r_t) = (basis.values[k], basis.d_s[k], basis.d_t[k]);
        // translations: gradient of component d is (R_s, R_t, 0)
        for d in 0..3 {
            let col = DOFS_PER_POINT * k + d;
            for row in 0..6 {
                b[row * ncols + col] = m[row][3 * d] * r_s + m[row][3 * d + 1] * r_t;
            }
        }
        // rotations: u = zeta h/2 R e(s, t)
        for (q, (e, e_s, e_t)) in directors.iter().enumerate() {
            let col = DOFS_PER_POINT * k + 3 + q;
            let mut phi = [T::zero(); 9];
            for c in 0..3 {
                phi[3 * c] = zeta * half_h * (r_s * e[c] + r * e_s[c]);
                phi[3 * c + 1] = zeta * half_h * (r_t * e[c] + r * e_t[c]);
                phi[3 * c + 2] = half_h * r * e[c];
            }
            for row in 0..6 {
                let mut v = T::zero();
                for (mc, pc) in m[row].iter().zip(phi.iter()) {
                    v += *mc * *pc;
                }
                b[row * ncols + col] = v;
            }
        }
    }
    Ok(StrainDisplacement { b, ncols, det_j })
}

/// Element stiffness at unit density, plus the element's solid volume and
/// mid-surface area.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementMatrices<T> {
    pub n: usize,
    /// Row-major `n x n`, exactly symmetric.
    pub stiffness: Vec<T>,
    pub volume: T,
    pub area: T,
}

impl<T: Scalar> ElementMatrices<T> {
    pub fn get(&self, i: usize, j: usize) -> T {
        self.stiffness[i * self.n + j]
    }

    /// `u^T K u`.
    pub fn energy(&self, u: &[T]) -> T {
        let mut acc = T::zero();
        for i in 0..self.n {
            acc += u[i] * crate::linalg::dot(&self.stiffness[i * self.n..(i + 1) * self.n], u);
        }
        acc
    }
}

/// Parametric extent of one element (a non-degenerate knot-span pair).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementSpan<T> {
    pub span_s: usize,
    pub span_t: usize,
    pub s: (T, T),
    pub t: (T, T),
}

impl<T: Scalar> ElementSpan<T> {
    pub fn center(&self) -> (T, T) {
        let h = lit::<T>(0.5);
        ((self.s.0 + self.s.1) * h, (self.t.0 + self.t.1) * h)
    }

    /// Maps a reference coordinate in [-1, 1] into the span.
    pub fn map(&self, xi: T, eta: T) -> (T, T) {
        let h = lit::<T>(0.5);
        (
            self.s.0 + (xi + T::one()) * h * (self.s.1 - self.s.0),
            self.t.0 + (eta + T::one()) * h * (self.t.1 - self.t.0),
        )
    }

    /// Jacobian of [`ElementSpan::map`].
    pub fn measure(&self) -> T {
        (self.s.1 - self.s.0) * (self.t.1 - self.t.0) * lit(0.25)
    }
}

/// Solid (unit density) stiffness `sum B^T D B |det J| W` over the rule.
pub fn element_stiffness_solid<T: Scalar>(
    shell: &ShellModel<T>,
    span: &ElementSpan<T>,
    rule: &GaussRule<T>,
    material: &MaterialParams<T>,
) -> Result<ElementMatrices<T>> {
    let surf = &shell.mid_surface;
    let (p, q) = surf.degrees();
    let n = DOFS_PER_POINT * (p + 1) * (q + 1);
    let d = material_matrix(material, T::one());
    let mut k = vec![T::zero(); n * n];
    let mut volume = T::zero();
    let mut area = T::zero();
    let measure = span.measure();
    let mut db = vec![T::zero(); 6 * n];
    for &(xi, wx) in &rule.s {
        for &(eta, wy) in &rule.t {
            let (s, t) = span.map(xi, eta);
            let basis = surf.rational_basis(s, t, 1)?;
            if basis.span_s != span.span_s || basis.span_t != span.span_t {
                return Err(Error::Contract(format!(
                    "quadrature point ({s}, {t}) left its element span"
                )));
            }
            let geom = SurfaceGeometry::at(surf, s, t)?;
            area += geom.area_element() * wx * wy * measure;
            for &(zeta, wz) in &rule.zeta {
                let sd = strain_displacement(&geom, &basis, shell.thickness, s, t, zeta)?;
                let w = sd.det_j.abs() * wx * wy * wz * measure;
                volume += w;
                // DB, using the diagonal/in-plane structure of D
                for r in 0..6 {
                    let row = &mut db[r * n..(r + 1) * n];
                    row.iter_mut().for_each(|x| *x = T::zero());
                    for c in 0..6 {
                        let dv = d[r][c];
                        if dv == T::zero() {
                            continue;
                        }
                        for (x, bv) in row.iter_mut().zip(sd.row(c)) {
                            *x += dv * *bv;
                        }
                    }
                }
                for i in 0..n {
                    for j in 0..=i {
                        let mut v = T::zero();
                        for r in 0..6 {
                            v += sd.b[r * n + i] * db[r * n + j];
                        }
                        k[i * n + j] += v * w;
                    }
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            k[j * n + i] = k[i * n + j];
        }
    }
    Ok(ElementMatrices {
        n,
        stiffness: k,
        volume,
        area,
    })
}
