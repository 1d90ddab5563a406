//! Reissner-Mindlin degenerated-shell analysis on the analysis-level NURBS
//! basis: element matrices, SIMP-scaled assembly, Dirichlet elimination,
//! loads, the skyline solve and compliance.

pub mod element;
pub mod material;
pub mod quadrature;

use crate::error::{Error, Result};
use crate::linalg::{cross3, dot, norm3, SkylineCholesky, SkylineMatrix, Vec3};
use crate::scalar::{lit, Scalar};
use crate::shell_geometry::{ShellModel, SurfaceGeometry};
use crate::splines::NurbsSurface;

pub use element::{
    element_stiffness_solid, strain_displacement, ElementMatrices, ElementSpan, StrainDisplacement,
    DOFS_PER_POINT,
};
pub use material::{material_matrix, MaterialParams};
pub use quadrature::GaussRule;

/// Patch edge in parameter space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Edge {
    /// s = s_min
    S0,
    /// s = s_max
    S1,
    /// t = t_min
    T0,
    /// t = t_max
    T1,
}

/// Clamped supports. All five DOFs of every affected control point are
/// fixed: control points whose basis function is nonzero on a listed edge
/// or at a listed parameter point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Supports<T> {
    pub edges: Vec<Edge>,
    pub points: Vec<(T, T)>,
}

/// Iso-parametric curve of the mid-surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IsoCurve<T> {
    /// The curve `s = value`, running along t.
    S(T),
    /// The curve `t = value`, running along s.
    T(T),
}

/// External loads. Forces are in global axes.
#[derive(Debug, Clone, PartialEq)]
pub enum Load<T> {
    /// Concentrated force at a mid-surface parameter point.
    Point { at: (T, T), force: Vec3<T> },
    /// Force per unit length along an iso-parametric curve.
    Line { curve: IsoCurve<T>, force: Vec3<T> },
    /// Force per unit mid-surface area over the whole patch.
    Surface { force: Vec3<T> },
    /// Force per unit volume over the shell solid.
    Body { force: Vec3<T> },
}

/// Global numbering of the five DOFs `(u, v, w, alpha, beta)` of every
/// analysis control point. Control points are numbered along the shorter
/// net direction first, which keeps the stiffness profile narrow.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    net: (usize, usize),
    s_fastest: bool,
    fixed: Vec<bool>,
}

impl DofMap {
    pub fn new(net: (usize, usize)) -> Self {
        Self {
            net,
            s_fastest: net.0 <= net.1,
            fixed: vec![false; DOFS_PER_POINT * net.0 * net.1],
        }
    }

    pub fn net_size(&self) -> (usize, usize) {
        self.net
    }

    pub fn num_dofs(&self) -> usize {
        self.fixed.len()
    }

    #[inline]
    pub fn point_ordinal(&self, i: usize, j: usize) -> usize {
        if self.s_fastest {
            i + j * self.net.0
        } else {
            j + i * self.net.1
        }
    }

    #[inline]
    pub fn dof(&self, i: usize, j: usize, d: usize) -> usize {
        DOFS_PER_POINT * self.point_ordinal(i, j) + d
    }

    pub fn fix_point(&mut self, i: usize, j: usize) {
        for d in 0..DOFS_PER_POINT {
            let k = self.dof(i, j, d);
            self.fixed[k] = true;
        }
    }

    pub fn is_fixed(&self, dof: usize) -> bool {
        self.fixed[dof]
    }

    pub fn fixed_mask(&self) -> &[bool] {
        &self.fixed
    }

    pub fn free_mask(&self) -> Vec<bool> {
        self.fixed.iter().map(|f| !f).collect()
    }

    pub fn num_fixed(&self) -> usize {
        self.fixed.iter().filter(|&&f| f).count()
    }

    /// Applies supports on the control net of `basis`.
    pub fn apply_supports<T: Scalar>(&mut self, basis: &NurbsSurface<T>, supports: &Supports<T>) -> Result<()> {
        let (ns, nt) = self.net;
        for edge in &supports.edges {
            match edge {
                Edge::S0 => (0..nt).for_each(|j| self.fix_point(0, j)),
                Edge::S1 => (0..nt).for_each(|j| self.fix_point(ns - 1, j)),
                Edge::T0 => (0..ns).for_each(|i| self.fix_point(i, 0)),
                Edge::T1 => (0..ns).for_each(|i| self.fix_point(i, nt - 1)),
            }
        }
        for &(s, t) in &supports.points {
            let b = basis.rational_basis(s, t, 0).map_err(|e| {
                Error::config("supports.points", format!("({s}, {t}): {e}"))
            })?;
            for k in 0..b.len() {
                if b.values[k] > lit(1e-12) {
                    let (i, j) = b.grid_index(k);
                    self.fix_point(i, j);
                }
            }
        }
        Ok(())
    }
}

/// One analysis element with its global DOFs.
#[derive(Debug, Clone)]
pub struct Element<T> {
    pub span: ElementSpan<T>,
    /// Global DOFs in local order `5 * k + d`.
    pub dofs: Vec<usize>,
    /// Mid-surface point at the parametric center.
    pub centroid: Vec3<T>,
}

/// Analysis model: refined shell, material, quadrature, DOF numbering,
/// cached solid element matrices and the load vector.
#[derive(Debug, Clone)]
pub struct AnalysisModel<T> {
    pub shell: ShellModel<T>,
    pub material: MaterialParams<T>,
    pub rule: GaussRule<T>,
    pub dofmap: DofMap,
    /// Elements ordered with the s-span index outer, t-span inner.
    pub elements: Vec<Element<T>>,
    pub element_counts: (usize, usize),
    pub solid: Vec<ElementMatrices<T>>,
    pub loads: Vec<T>,
    free_index: Vec<usize>,
    free_profile: Vec<usize>,
    full_profile: Vec<usize>,
}

/// Analysis elements of a surface: every non-degenerate knot-span pair.
pub fn element_spans<T: Scalar>(surf: &NurbsSurface<T>) -> Vec<ElementSpan<T>> {
    let ss = surf.knots_s().spans();
    let ts = surf.knots_t().spans();
    let mut out = Vec::with_capacity(ss.len() * ts.len());
    for &(is, s0, s1) in &ss {
        for &(it, t0, t1) in &ts {
            out.push(ElementSpan {
                span_s: is,
                span_t: it,
                s: (s0, s1),
                t: (t0, t1),
            });
        }
    }
    out
}

fn profile_of(n: usize, elements: &[Vec<usize>]) -> Vec<usize> {
    let mut first: Vec<usize> = (0..n).collect();
    for dofs in elements {
        let lo = *dofs.iter().min().expect("element has DOFs");
        for &d in dofs {
            if lo < first[d] {
                first[d] = lo;
            }
        }
    }
    first
}

impl<T: Scalar> AnalysisModel<T> {
    /// Builds elements, solid element matrices and the load vector. Both
    /// stay fixed for the lifetime of the model.
    pub fn new(
        shell: ShellModel<T>,
        material: MaterialParams<T>,
        rule: GaussRule<T>,
        supports: &Supports<T>,
        loads: &[Load<T>],
    ) -> Result<Self> {
        let surf = &shell.mid_surface;
        let (p, q) = surf.degrees();
        let mut dofmap = DofMap::new(surf.net_size());
        dofmap.apply_supports(surf, supports)?;

        let spans = element_spans(surf);
        let element_counts = (surf.knots_s().spans().len(), surf.knots_t().spans().len());
        let mut elements = Vec::with_capacity(spans.len());
        for span in spans {
            let mut dofs = Vec::with_capacity(DOFS_PER_POINT * (p + 1) * (q + 1));
            for a in 0..=p {
                for b in 0..=q {
                    let (i, j) = (span.span_s - p + a, span.span_t - q + b);
                    for d in 0..DOFS_PER_POINT {
                        dofs.push(dofmap.dof(i, j, d));
                    }
                }
            }
            let (sc, tc) = span.center();
            let centroid = surf.point(sc, tc)?;
            elements.push(Element {
                span,
                dofs,
                centroid,
            });
        }

        let solid = compute_solid_matrices(&shell, &elements, &rule, &material)?;

        let n = dofmap.num_dofs();
        let dof_lists: Vec<Vec<usize>> = elements.iter().map(|e| e.dofs.clone()).collect();
        let full_profile = profile_of(n, &dof_lists);
        let mut free_index = vec![usize::MAX; n];
        let mut nfree = 0;
        for d in 0..n {
            if !dofmap.is_fixed(d) {
                free_index[d] = nfree;
                nfree += 1;
            }
        }
        if nfree == 0 {
            return Err(Error::config("supports", "every DOF is fixed"));
        }
        let free_lists: Vec<Vec<usize>> = dof_lists
            .iter()
            .map(|l| l.iter().filter_map(|&d| (free_index[d] != usize::MAX).then_some(free_index[d])).collect::<Vec<_>>())
            .filter(|l: &Vec<usize>| !l.is_empty())
            .collect();
        let free_profile = profile_of(nfree, &free_lists);

        let mut model = Self {
            shell,
            material,
            rule,
            dofmap,
            elements,
            element_counts,
            solid,
            loads: Vec::new(),
            free_index,
            free_profile,
            full_profile,
        };
        model.loads = load_vector(&model, loads)?;
        Ok(model)
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn num_dofs(&self) -> usize {
        self.dofmap.num_dofs()
    }

    /// Solid volumes `V_e^0`.
    pub fn element_volumes(&self) -> Vec<T> {
        self.solid.iter().map(|m| m.volume).collect()
    }

    /// Total solid volume `V_s`.
    pub fn solid_volume(&self) -> T {
        self.solid.iter().map(|m| m.volume).sum()
    }

    /// Element DOF values gathered from a global vector.
    pub fn gather(&self, element: usize, u: &[T]) -> Vec<T> {
        self.elements[element].dofs.iter().map(|&d| u[d]).collect()
    }

    fn check_densities(&self, densities: &[T]) -> Result<()> {
        if densities.len() != self.elements.len() {
            return Err(Error::Assembly(format!(
                "{} densities for {} elements",
                densities.len(),
                self.elements.len()
            )));
        }
        Ok(())
    }

    fn scatter(&self, densities: &[T], target: &mut SkylineMatrix<T>, remap: Option<&[usize]>) {
        for (e, el) in self.elements.iter().enumerate() {
            let scale = self.material.stiffness_scale(densities[e]);
            let ke = &self.solid[e];
            let n = ke.n;
            for a in 0..n {
                let ga = match remap {
                    Some(map) => map[el.dofs[a]],
                    None => el.dofs[a],
                };
                if ga == usize::MAX {
                    continue;
                }
                for b in 0..n {
                    let gb = match remap {
                        Some(map) => map[el.dofs[b]],
                        None => el.dofs[b],
                    };
                    if gb == usize::MAX || gb > ga {
                        continue;
                    }
                    target.add_lower(ga, gb, scale * ke.stiffness[a * n + b]);
                }
            }
        }
    }

    /// Global stiffness over all DOFs (constraints not applied), with
    /// `K_e = K_min + rho_e^penal (K_e^0 - K_min)` and `K_min = (E_min/E0) K_e^0`.
    pub fn assemble(&self, densities: &[T]) -> Result<SkylineMatrix<T>> {
        self.check_densities(densities)?;
        let mut k = SkylineMatrix::with_profile(self.full_profile.clone());
        self.scatter(densities, &mut k, None);
        Ok(k)
    }

    /// Stiffness restricted to the free DOFs, assembled directly.
    pub fn assemble_free(&self, densities: &[T]) -> Result<SkylineMatrix<T>> {
        self.check_densities(densities)?;
        let mut k = SkylineMatrix::with_profile(self.free_profile.clone());
        self.scatter(densities, &mut k, Some(&self.free_index));
        Ok(k)
    }

    /// Assembles, factors and solves `K U = F` for the given element
    /// densities. Fixed DOFs carry zero.
    pub fn solve(&self, densities: &[T]) -> Result<Vec<T>> {
        let k = self.assemble_free(densities)?;
        let f_free: Vec<T> = self.free_values(&self.loads);
        let chol = k.factor()?;
        Ok(self.expand_free(&chol.solve(&f_free)))
    }

    pub fn free_values(&self, full: &[T]) -> Vec<T> {
        full.iter()
            .zip(&self.free_index)
            .filter(|(_, &fi)| fi != usize::MAX)
            .map(|(v, _)| *v)
            .collect()
    }

    pub fn expand_free(&self, free: &[T]) -> Vec<T> {
        self.free_index
            .iter()
            .map(|&fi| if fi == usize::MAX { T::zero() } else { free[fi] })
            .collect()
    }

    /// Element-wise compliance `sum_e U_e^T K_e U_e`.
    pub fn compliance_elementwise(&self, densities: &[T], u: &[T]) -> T {
        let mut acc = T::zero();
        for e in 0..self.elements.len() {
            let ue = self.gather(e, u);
            acc += self.material.stiffness_scale(densities[e]) * self.solid[e].energy(&ue);
        }
        acc
    }

    /// Solid element energies `U_e^T K_e^0 U_e`.
    pub fn solid_energies(&self, u: &[T]) -> Vec<T> {
        (0..self.elements.len())
            .map(|e| self.solid[e].energy(&self.gather(e, u)))
            .collect()
    }
}

fn compute_solid_matrices<T: Scalar>(
    shell: &ShellModel<T>,
    elements: &[Element<T>],
    rule: &GaussRule<T>,
    material: &MaterialParams<T>,
) -> Result<Vec<ElementMatrices<T>>> {
    use rayon::prelude::*;
    elements
        .par_iter()
        .enumerate()
        .map(|(id, el)| {
            element_stiffness_solid(shell, &el.span, rule, material).map_err(|e| Error::Element {
                element: id,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Solves `K U = F` with the fixed DOFs of `dofmap` eliminated.
pub fn solve_equilibrium<T: Scalar>(k: &SkylineMatrix<T>, f: &[T], dofmap: &DofMap) -> Result<Vec<T>> {
    if f.len() != k.dim() || dofmap.num_dofs() != k.dim() {
        return Err(Error::Assembly("dimension mismatch between K, F and DOF map".into()));
    }
    let free = dofmap.free_mask();
    let (kr, kept): (SkylineMatrix<T>, Vec<usize>) = k.restrict(&free);
    let fr: Vec<T> = kept.iter().map(|&i| f[i]).collect();
    let chol: SkylineCholesky<T> = kr.factor()?;
    let ur = chol.solve(&fr);
    let mut u = vec![T::zero(); k.dim()];
    for (v, &i) in ur.iter().zip(&kept) {
        u[i] = *v;
    }
    Ok(u)
}

/// `C = U^T F`.
pub fn compliance<T: Scalar>(u: &[T], f: &[T]) -> T {
    dot(u, f)
}

fn line_rule_points(p: usize) -> usize {
    (p + 2).max(4)
}

/// Consistent load vector for the given loads.
pub fn load_vector<T: Scalar>(model: &AnalysisModel<T>, loads: &[Load<T>]) -> Result<Vec<T>> {
    let surf = &model.shell.mid_surface;
    let dofmap = &model.dofmap;
    let mut f = vec![T::zero(); dofmap.num_dofs()];
    let ((slo, shi), (tlo, thi)) = surf.domain();
    let out_of_domain = |what: &str, s: T, t: T| {
        Error::config("loads", format!("{what} at ({s}, {t}) is outside the parametric domain"))
    };
    for load in loads {
        match load {
            Load::Point { at, force } => {
                let (s, t) = *at;
                if !(s >= slo && s <= shi && t >= tlo && t <= thi) {
                    return Err(out_of_domain("point load", s, t));
                }
                let b = surf.rational_basis(s, t, 0)?;
                for k in 0..b.len() {
                    let (i, j) = b.grid_index(k);
                    for c in 0..3 {
                        f[dofmap.dof(i, j, c)] += b.values[k] * force[c];
                    }
                }
            }
            Load::Line { curve, force } => {
                let (fixed, along_s) = match *curve {
                    IsoCurve::S(v) => (v, false),
                    IsoCurve::T(v) => (v, true),
                };
                let ok = if along_s { fixed >= tlo && fixed <= thi } else { fixed >= slo && fixed <= shi };
                if !ok {
                    return Err(Error::config("loads", format!("line load at {fixed} outside the domain")));
                }
                let spans = if along_s { surf.knots_s().spans() } else { surf.knots_t().spans() };
                let deg = if along_s { surf.degrees().0 } else { surf.degrees().1 };
                let gauss = quadrature::gauss_legendre::<T>(line_rule_points(deg));
                for (_, a, bnd) in spans {
                    let half = (bnd - a) * lit(0.5);
                    for &(x, w) in &gauss {
                        let u = a + (x + T::one()) * half;
                        let (s, t) = if along_s { (u, fixed) } else { (fixed, u) };
                        let basis = surf.rational_basis(s, t, 1)?;
                        let tangent = surf.combine(&basis, if along_s { &basis.d_s } else { &basis.d_t });
                        let jw = norm3(tangent) * w * half;
                        for k in 0..basis.len() {
                            let (i, j) = basis.grid_index(k);
                            for c in 0..3 {
                                f[dofmap.dof(i, j, c)] += basis.values[k] * force[c] * jw;
                            }
                        }
                    }
                }
            }
            Load::Surface { force } => {
                for el in &model.elements {
                    let m = el.span.measure();
                    for &(xi, wx) in &model.rule.s {
                        for &(eta, wy) in &model.rule.t {
                            let (s, t) = el.span.map(xi, eta);
                            let basis = surf.rational_basis(s, t, 1)?;
                            let su = surf.combine(&basis, &basis.d_s);
                            let sv = surf.combine(&basis, &basis.d_t);
                            let jw = norm3(cross3(su, sv)) * wx * wy * m;
                            for k in 0..basis.len() {
                                let (i, j) = basis.grid_index(k);
                                for c in 0..3 {
                                    f[dofmap.dof(i, j, c)] += basis.values[k] * force[c] * jw;
                                }
                            }
                        }
                    }
                }
            }
            Load::Body { force } => {
                let half_h = model.shell.thickness * lit(0.5);
                for el in &model.elements {
                    let m = el.span.measure();
                    for &(xi, wx) in &model.rule.s {
                        for &(eta, wy) in &model.rule.t {
                            let (s, t) = el.span.map(xi, eta);
                            let basis = surf.rational_basis(s, t, 1)?;
                            let geom = SurfaceGeometry::at(surf, s, t)?;
                            let g_dot_neg_v2 = -crate::linalg::dot3(*force, geom.frame.v2);
                            let g_dot_v1 = crate::linalg::dot3(*force, geom.frame.v1);
                            for &(zeta, wz) in &model.rule.zeta {
                                let det = crate::linalg::det3(&geom.jacobian(model.shell.thickness, zeta));
                                let jw = det.abs() * wx * wy * wz * m;
                                for k in 0..basis.len() {
                                    let (i, j) = basis.grid_index(k);
                                    let r = basis.values[k] * jw;
                                    for c in 0..3 {
                                        f[dofmap.dof(i, j, c)] += r * force[c];
                                    }
                                    f[dofmap.dof(i, j, 3)] += r * zeta * half_h * g_dot_neg_v2;
                                    f[dofmap.dof(i, j, 4)] += r * zeta * half_h * g_dot_v1;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    if let Some(i) = f.iter().position(|v| !v.is_finite()) {
        return Err(Error::Input(format!("non-finite load vector entry at DOF {i}")));
    }
    Ok(f)
}
