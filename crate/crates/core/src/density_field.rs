//! Density represented on the design-level NURBS basis, its smoothed
//! Heaviside projection, element sampling, volume, and the neighbourhood
//! average / power-mean aggregation used by local volume constraints.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm3, sub3, Vec3};
use crate::scalar::{from_usize, lit, to_f64, Scalar};
use crate::splines::{KnotVector, NurbsSurface};

/// `(tanh(tau/2) + tanh(tau (rho - kappa))) / (2 tanh(tau/2))`.
pub fn heaviside<T: Scalar>(rho: T, tau: T, kappa: T) -> T {
    let two = lit::<T>(2.0);
    let th = (tau / two).tanh();
    (th + (tau * (rho - kappa)).tanh()) / (two * th)
}

/// Derivative of [`heaviside`] with respect to `rho`.
pub fn heaviside_derivative<T: Scalar>(rho: T, tau: T, kappa: T) -> T {
    let two = lit::<T>(2.0);
    let th = (tau / two).tanh();
    let sech = T::one() / (tau * (rho - kappa)).cosh();
    tau * sech * sech / (two * th)
}

pub(crate) fn check_projection<T: Scalar>(tau: T, kappa: T) -> Result<()> {
    if !(tau > T::zero()) || !tau.is_finite() {
        return Err(Error::config("projection.tau", "must be positive"));
    }
    if !(kappa >= lit(0.25) && kappa <= lit(0.75)) {
        return Err(Error::config("projection.kappa", "must lie in [0.25, 0.75]"));
    }
    Ok(())
}

/// Design coefficients on the design basis plus projection parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField<T> {
    pub basis: NurbsSurface<T>,
    /// One coefficient per design control point, indexed like the net.
    pub coefficients: Vec<T>,
    pub tau: T,
    pub kappa: T,
}

impl<T: Scalar> DensityField<T> {
    pub fn new(basis: NurbsSurface<T>, coefficients: Vec<T>, tau: T, kappa: T) -> Result<Self> {
        check_projection(tau, kappa)?;
        let (ns, nt) = basis.net_size();
        if coefficients.len() != ns * nt {
            return Err(Error::Input(format!(
                "{} density coefficients for a {ns}x{nt} design net",
                coefficients.len()
            )));
        }
        if let Some(v) = coefficients.iter().find(|v| !(**v >= T::zero() && **v <= T::one())) {
            return Err(Error::Input(format!("density coefficient {v} outside [0, 1]")));
        }
        Ok(Self {
            basis,
            coefficients,
            tau,
            kappa,
        })
    }

    pub fn uniform(basis: NurbsSurface<T>, value: T, tau: T, kappa: T) -> Result<Self> {
        let (ns, nt) = basis.net_size();
        Self::new(basis, vec![value; ns * nt], tau, kappa)
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// `rho(s, t) = sum R_ij rho_ij`.
    pub fn eval(&self, s: T, t: T) -> Result<T> {
        let b = self.basis.rational_basis(s, t, 0)?;
        let (_, nt) = self.basis.net_size();
        let mut v = T::zero();
        for k in 0..b.len() {
            let (i, j) = b.grid_index(k);
            v += b.values[k] * self.coefficients[i * nt + j];
        }
        Ok(v)
    }

    /// Projected density `H(rho(s, t))`.
    pub fn eval_projected(&self, s: T, t: T) -> Result<T> {
        Ok(heaviside(self.eval(s, t)?, self.tau, self.kappa))
    }
}

/// Design-basis functions sampled once at fixed parameter points (element
/// centres). Row `e` lists `(coefficient index, R_ij)` for the functions
/// that are nonzero there.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSampling<T> {
    offsets: Vec<usize>,
    entries: Vec<(usize, T)>,
    num_coefficients: usize,
}

impl<T: Scalar> BasisSampling<T> {
    pub fn new(basis: &NurbsSurface<T>, points: &[(T, T)]) -> Result<Self> {
        let (ns, nt) = basis.net_size();
        let mut offsets = Vec::with_capacity(points.len() + 1);
        let mut entries = Vec::new();
        offsets.push(0);
        for &(s, t) in points {
            let b = basis.rational_basis(s, t, 0)?;
            for k in 0..b.len() {
                if b.values[k] != T::zero() {
                    let (i, j) = b.grid_index(k);
                    entries.push((i * nt + j, b.values[k]));
                }
            }
            offsets.push(entries.len());
        }
        Ok(Self {
            offsets,
            entries,
            num_coefficients: ns * nt,
        })
    }

    pub fn num_points(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_coefficients(&self) -> usize {
        self.num_coefficients
    }

    pub fn row(&self, e: usize) -> &[(usize, T)] {
        &self.entries[self.offsets[e]..self.offsets[e + 1]]
    }

    /// Unprojected density at every sample point.
    pub fn evaluate(&self, coefficients: &[T]) -> Vec<T> {
        (0..self.num_points())
            .map(|e| self.row(e).iter().map(|&(c, r)| r * coefficients[c]).sum())
            .collect()
    }

    /// `out_ij = sum_e w_e R_ij(x_e)`, accumulated in sample order.
    pub fn pull_back(&self, weights: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.num_coefficients];
        for (e, w) in weights.iter().enumerate() {
            for &(c, r) in self.row(e) {
                out[c] += *w * r;
            }
        }
        out
    }
}

/// Unprojected and projected element densities.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementDensities<T> {
    pub raw: Vec<T>,
    pub projected: Vec<T>,
}

/// `rho~_e = H(rho(centre_e))` through a precomputed sampling.
pub fn element_densities<T: Scalar>(field: &DensityField<T>, sampling: &BasisSampling<T>) -> ElementDensities<T> {
    let raw = sampling.evaluate(&field.coefficients);
    let projected = raw.iter().map(|&r| heaviside(r, field.tau, field.kappa)).collect();
    ElementDensities { raw, projected }
}

/// `V = sum V_e^0 rho~_e`.
pub fn total_volume<T: Scalar>(projected: &[T], solid_volumes: &[T]) -> T {
    projected.iter().zip(solid_volumes).map(|(r, v)| *r * *v).sum()
}

/// Local volume constraint parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalVolumeSpec<T> {
    /// Neighbourhood radius in multiples of the mean element length.
    pub radius_multiplier: T,
    /// Upper bound on the local average.
    pub alpha: T,
    /// Power-mean exponent.
    pub gamma: T,
}

impl<T: Scalar> LocalVolumeSpec<T> {
    pub fn validated(self) -> Result<Self> {
        if !(self.radius_multiplier > T::zero()) {
            return Err(Error::config("problem.radius", "must be positive"));
        }
        if !(self.alpha > T::zero() && self.alpha < T::one()) {
            return Err(Error::config("problem.alpha", "must lie in (0, 1)"));
        }
        if !(self.gamma >= T::one()) {
            return Err(Error::config("problem.gamma", "must be >= 1"));
        }
        Ok(self)
    }
}

/// Mean of `sqrt(area_e)` over elements.
pub fn mean_element_length<T: Scalar>(areas: &[T]) -> T {
    areas.iter().map(|a| a.sqrt()).sum::<T>() / from_usize(areas.len())
}

/// Element neighbourhoods `{f : |x_e - x_f| <= radius}` on physical
/// centroids, with the constant solid volumes used as averaging weights.
/// Distances within a relative `1e-9` of the radius count as inside, so
/// lattice-aligned radii do not depend on round-off.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhoods<T> {
    offsets: Vec<usize>,
    members: Vec<usize>,
    weights: Vec<T>,
    weight_sums: Vec<T>,
    pub radius: T,
}

impl<T: Scalar> Neighborhoods<T> {
    pub fn new(centroids: &[Vec3<T>], solid_volumes: &[T], radius: T) -> Self {
        let n = centroids.len();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut members = Vec::new();
        let mut weight_sums = Vec::with_capacity(n);
        let reach = radius * (T::one() + lit(1e-9));
        offsets.push(0);
        for e in 0..n {
            let mut sum = T::zero();
            for f in 0..n {
                if f == e || norm3(sub3(centroids[e], centroids[f])) <= reach {
                    members.push(f);
                    sum += solid_volumes[f];
                }
            }
            offsets.push(members.len());
            weight_sums.push(sum);
        }
        Self {
            offsets,
            members,
            weights: solid_volumes.to_vec(),
            weight_sums,
            radius,
        }
    }

    pub fn len(&self) -> usize {
        self.weight_sums.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weight_sums.is_empty()
    }

    pub fn members(&self, e: usize) -> &[usize] {
        &self.members[self.offsets[e]..self.offsets[e + 1]]
    }

    pub fn weight(&self, f: usize) -> T {
        self.weights[f]
    }

    pub fn weight_sum(&self, e: usize) -> T {
        self.weight_sums[e]
    }

    /// `rho_bar_e = sum_{f in N_e} V_f rho~_f / sum_{f in N_e} V_f`.
    pub fn local_average(&self, projected: &[T]) -> Vec<T> {
        (0..self.len())
            .map(|e| {
                let s: T = self.members(e).iter().map(|&f| self.weights[f] * projected[f]).sum();
                s / self.weight_sums[e]
            })
            .collect()
    }
}

/// `((1/N) sum x_e^gamma)^(1/gamma)`.
pub fn aggregate_pmean<T: Scalar>(values: &[T], gamma: T) -> Result<T> {
    if !(gamma > T::zero()) {
        return Err(Error::config("problem.gamma", "must be positive"));
    }
    if values.is_empty() {
        return Ok(T::zero());
    }
    let mean = values.iter().map(|v| v.powf(gamma)).sum::<T>() / from_usize(values.len());
    Ok(mean.powf(T::one() / gamma))
}

/// On-disk form of a density field, self-contained so that the surface
/// can be rebuilt without the run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldFile {
    pub degrees: [usize; 2],
    pub knots_s: Vec<f64>,
    pub knots_t: Vec<f64>,
    pub net_size: [usize; 2],
    /// Design control points, row-major with `t` fastest.
    pub control_points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub tau: f64,
    pub kappa: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl<T: Scalar> DensityField<T> {
    pub fn to_file(&self, config: Option<serde_json::Value>) -> FieldFile {
        let b = &self.basis;
        let (ns, nt) = b.net_size();
        let (p, q) = b.degrees();
        let v = |x: &[T]| x.iter().map(|&a| to_f64(a)).collect::<Vec<f64>>();
        FieldFile {
            degrees: [p, q],
            knots_s: v(b.knots_s().knots()),
            knots_t: v(b.knots_t().knots()),
            net_size: [ns, nt],
            control_points: b.control_net().iter().map(|p| p.map(to_f64)).collect(),
            weights: v(b.weights()),
            coefficients: v(&self.coefficients),
            tau: to_f64(self.tau),
            kappa: to_f64(self.kappa),
            config,
        }
    }

    pub fn from_file(file: &FieldFile) -> Result<Self> {
        let c = |x: &[f64]| x.iter().map(|&a| lit::<T>(a)).collect::<Vec<T>>();
        let ks = KnotVector::new(c(&file.knots_s), file.degrees[0])?;
        let kt = KnotVector::new(c(&file.knots_t), file.degrees[1])?;
        if ks.num_basis() != file.net_size[0] || kt.num_basis() != file.net_size[1] {
            return Err(Error::Input("field file: net_size does not match the knot vectors".into()));
        }
        let net = file.control_points.iter().map(|p| p.map(lit::<T>)).collect();
        let basis = NurbsSurface::new(ks, kt, net, c(&file.weights))?;
        Self::new(basis, c(&file.coefficients), lit(file.tau), lit(file.kappa))
    }

    pub fn save_json(&self, path: &Path, config: Option<serde_json::Value>) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_file(config))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: FieldFile = serde_json::from_str(&text)?;
        Self::from_file(&file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shell_geometry::presets;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn design(spans: usize) -> NurbsSurface<f64> {
        presets::hypar(100.0, 100.0, 20.0, 2, 2)
            .unwrap()
            .refine_uniform(spans, spans)
            .unwrap()
    }

    #[test]
    fn heaviside_fixed_points_and_sharpening() {
        for tau in [1.0, 2.0, 8.0, 64.0] {
            assert!((heaviside(0.5f64, tau, 0.5) - 0.5).abs() < 1e-15);
            assert!(heaviside(0.0f64, tau, 0.5).abs() < 1e-15);
            assert!((heaviside(1.0f64, tau, 0.5) - 1.0).abs() < 1e-15);
        }
        let mut prev = (1.0, 0.0);
        for tau in [2.0, 4.0, 8.0, 16.0, 32.0, 64.0] {
            let (lo, hi) = (heaviside(0.4, tau, 0.5), heaviside(0.6, tau, 0.5));
            assert!(lo < prev.0 && hi > prev.1);
            prev = (lo, hi);
        }
        assert!(prev.0 < 1e-2 && prev.1 > 1.0 - 1e-2);
    }

    #[test]
    fn heaviside_derivative_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let rho: f64 = rng.gen();
            let tau = rng.gen_range(1.0..64.0);
            let kappa = rng.gen_range(0.25..0.75);
            let h = 1e-4 / tau;
            let f = |x: f64| heaviside(x, tau, kappa);
            // fourth-order central stencil
            let fd = (8.0 * (f(rho + h) - f(rho - h)) - (f(rho + 2.0 * h) - f(rho - 2.0 * h))) / (12.0 * h);
            let an = heaviside_derivative(rho, tau, kappa);
            assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-4), "{fd} vs {an}");
        }
    }

    #[test]
    fn projection_validation() {
        let b = design(2);
        assert!(DensityField::uniform(b.clone(), 0.3, 0.0, 0.5).is_err());
        assert!(DensityField::uniform(b.clone(), 0.3, 2.0, 0.9).is_err());
        assert!(DensityField::uniform(b, 1.3, 2.0, 0.5).is_err());
    }

    #[test]
    fn uniform_field_and_corner_interpolation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = DensityField::uniform(design(5), 0.3, 2.0, 0.5).unwrap();
        for _ in 0..50 {
            assert!((f.eval(rng.gen(), rng.gen()).unwrap() - 0.3).abs() < 1e-12);
        }
        let n = f.len();
        let coeffs: Vec<f64> = (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { 0.0 }).collect();
        let f = DensityField::new(design(5), coeffs.clone(), 2.0, 0.5).unwrap();
        for _ in 0..50 {
            let v = f.eval(rng.gen(), rng.gen()).unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
        assert_eq!(f.eval(1.0, 0.0).unwrap(), coeffs[(f.basis.net_size().0 - 1) * f.basis.net_size().1]);
    }

    #[test]
    fn element_densities_survive_design_refinement() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let coarse = design(4);
        let coeffs: Vec<f64> = (0..coarse.net_size().0 * coarse.net_size().1).map(|_| rng.gen()).collect();
        let f = DensityField::new(coarse.clone(), coeffs.clone(), 8.0, 0.5).unwrap();
        // refine the density as a scalar field: carry coefficients as a coordinate
        let (ns, nt) = coarse.net_size();
        let net: Vec<[f64; 3]> = (0..ns * nt).map(|k| [coeffs[k], 0.0, 0.0]).collect();
        let scalar = NurbsSurface::new(
            coarse.knots_s().clone(),
            coarse.knots_t().clone(),
            net,
            coarse.weights().to_vec(),
        )
        .unwrap()
        .refine_uniform(8, 8)
        .unwrap();
        let fine_coeffs: Vec<f64> = scalar.control_net().iter().map(|p| p[0]).collect();
        let fine = DensityField::new(coarse.refine_uniform(8, 8).unwrap(), fine_coeffs, 8.0, 0.5).unwrap();
        let centers: Vec<(f64, f64)> = (0..10).map(|k| ((k as f64 + 0.5) / 10.0, 1.0 - (k as f64 + 0.5) / 10.0)).collect();
        let a = element_densities(&f, &BasisSampling::new(&f.basis, &centers).unwrap());
        let b = element_densities(&fine, &BasisSampling::new(&fine.basis, &centers).unwrap());
        for (x, y) in a.projected.iter().zip(&b.projected) {
            assert!((x - y).abs() < 1e-10);
        }
        let half = DensityField::uniform(coarse, 0.5, 8.0, 0.5).unwrap();
        let d = element_densities(&half, &BasisSampling::new(&half.basis, &centers).unwrap());
        assert!(d.projected.iter().all(|v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn volume_is_linear() {
        let vols = [1.0f64, 2.0, 3.5];
        assert_eq!(total_volume(&[1.0; 3], &vols), 6.5);
        assert!((total_volume(&[0.3; 3], &vols) - 0.3 * 6.5).abs() < 1e-12);
    }

    fn grid_centroids(n: usize) -> Vec<Vec3<f64>> {
        let mut c = Vec::new();
        for i in 0..n {
            for j in 0..n {
                c.push([i as f64 + 0.5, j as f64 + 0.5, 0.0]);
            }
        }
        c
    }

    #[test]
    fn local_average_enumeration() {
        let c = grid_centroids(3);
        let v = vec![1.0; 9];
        let nb = Neighborhoods::new(&c, &v, 1.5);
        assert_eq!(nb.members(4).len(), 9);
        let mut field = vec![0.0; 9];
        field[4] = 1.0;
        let avg = nb.local_average(&field);
        assert!((avg[4] - 1.0 / 9.0).abs() < 1e-15);

        let tiny = Neighborhoods::new(&c, &v, 0.1);
        assert_eq!(tiny.local_average(&field), field);
        assert!(nb.local_average(&[0.4; 9]).iter().all(|x| (x - 0.4).abs() < 1e-15));
    }

    #[test]
    fn local_average_is_bounded_and_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = grid_centroids(6);
        let v: Vec<f64> = (0..36).map(|_| rng.gen_range(0.5..2.0)).collect();
        let nb = Neighborhoods::new(&c, &v, 2.0);
        let a: Vec<f64> = (0..36).map(|_| rng.gen()).collect();
        let b: Vec<f64> = (0..36).map(|_| rng.gen()).collect();
        let (lo, hi) = a.iter().fold((1.0f64, 0.0f64), |(l, h), &x| (l.min(x), h.max(x)));
        let la = nb.local_average(&a);
        assert!(la.iter().all(|&x| x >= lo - 1e-15 && x <= hi + 1e-15));
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x + y).collect();
        let lb = nb.local_average(&b);
        for (e, s) in nb.local_average(&sum).iter().enumerate() {
            assert!((s - (2.0 * la[e] + lb[e])).abs() < 1e-14);
        }
    }

    #[test]
    fn pmean_properties() {
        assert!((aggregate_pmean(&[0.3f64; 5], 16.0).unwrap() - 0.3).abs() < 1e-15);
        let v = aggregate_pmean(&[0.0, 1.0], 16.0).unwrap();
        assert!((v - 0.5f64.powf(1.0 / 16.0)).abs() < 1e-15);
        assert!(aggregate_pmean(&[0.5], 0.0).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x: Vec<f64> = (0..40).map(|_| rng.gen()).collect();
        let max = x.iter().cloned().fold(0.0, f64::max);
        let mut prev = 0.0;
        for g in [1.0, 4.0, 16.0, 64.0] {
            let v = aggregate_pmean(&x, g).unwrap();
            assert!(v >= prev && v <= max);
            prev = v;
        }
        let base = aggregate_pmean(&x, 16.0).unwrap();
        let mut y = x.clone();
        let top = x.iter().position(|&v| v == max).unwrap();
        y[top] += 0.01;
        assert!(aggregate_pmean(&y, 16.0).unwrap() > base);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let b = design(6);
        let n = b.net_size().0 * b.net_size().1;
        let f = DensityField::new(b, (0..n).map(|_| rng.gen()).collect(), 16.0, 0.5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.json");
        f.save_json(&path, Some(serde_json::json!({"case": "x"}))).unwrap();
        let g = DensityField::<f64>::load_json(&path).unwrap();
        assert_eq!(f, g);
    }
}
