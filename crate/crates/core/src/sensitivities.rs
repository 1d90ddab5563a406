//! Adjoint gradients of compliance, volume and the aggregated local volume
//! with respect to the design coefficients, and a finite-difference harness.

use rayon::prelude::*;

use crate::density_field::{heaviside, heaviside_derivative, total_volume, BasisSampling, ElementDensities, Neighborhoods};
use crate::error::{Error, Result};
use crate::rm_analysis::AnalysisModel;
use crate::scalar::{from_usize, lit, Scalar};

/// `H'(rho_e)` at every element.
fn projection_slopes<T: Scalar>(raw: &[T], tau: T, kappa: T) -> Vec<T> {
    raw.iter().map(|&r| heaviside_derivative(r, tau, kappa)).collect()
}

/// `dC/drho_ij = -sum_e U_e^T dK_e/drho~_e U_e H'(rho_e) R_ij(c_e)`.
/// `u` must solve the current equilibrium.
pub fn compliance_gradient<T: Scalar>(
    model: &AnalysisModel<T>,
    sampling: &BasisSampling<T>,
    densities: &ElementDensities<T>,
    tau: T,
    kappa: T,
    u: &[T],
) -> Vec<T> {
    let slopes = projection_slopes(&densities.raw, tau, kappa);
    let per_element: Vec<T> = (0..model.num_elements())
        .into_par_iter()
        .map(|e| {
            let energy = model.solid[e].energy(&model.gather(e, u));
            -model.material.stiffness_scale_derivative(densities.projected[e]) * energy * slopes[e]
        })
        .collect();
    sampling.pull_back(&per_element)
}

/// `dV/drho_ij = sum_e V_e^0 H'(rho_e) R_ij(c_e)`.
pub fn volume_gradient<T: Scalar>(
    solid_volumes: &[T],
    sampling: &BasisSampling<T>,
    densities: &ElementDensities<T>,
    tau: T,
    kappa: T,
) -> Vec<T> {
    let slopes = projection_slopes(&densities.raw, tau, kappa);
    let w: Vec<T> = solid_volumes.iter().zip(&slopes).map(|(v, s)| *v * *s).collect();
    sampling.pull_back(&w)
}

/// Gradient of the power mean of neighbourhood averages, chained through
/// the average, the projection and the basis. Returns zeros when the
/// aggregate vanishes.
pub fn local_volume_gradient<T: Scalar>(
    neighborhoods: &Neighborhoods<T>,
    sampling: &BasisSampling<T>,
    densities: &ElementDensities<T>,
    local_average: &[T],
    gamma: T,
    tau: T,
    kappa: T,
) -> Vec<T> {
    let n = local_average.len();
    let nf = from_usize::<T>(n);
    let mean = local_average.iter().map(|v| v.powf(gamma)).sum::<T>() / nf;
    if mean == T::zero() {
        return vec![T::zero(); sampling.num_coefficients()];
    }
    let vbar = mean.powf(T::one() / gamma);
    // dVbar/drho_bar_e = (1/N) Vbar^(1-gamma) rho_bar_e^(gamma-1)
    let lead = vbar.powf(T::one() - gamma) / nf;
    let d_avg: Vec<T> = local_average.iter().map(|r| lead * r.powf(gamma - T::one())).collect();
    // scatter through the averaging: d rho_bar_e / d rho~_f = V_f / W_e
    let mut d_proj = vec![T::zero(); n];
    for e in 0..n {
        let k = d_avg[e] / neighborhoods.weight_sum(e);
        for &f in neighborhoods.members(e) {
            d_proj[f] += k * neighborhoods.weight(f);
        }
    }
    let slopes = projection_slopes(&densities.raw, tau, kappa);
    let w: Vec<T> = d_proj.iter().zip(&slopes).map(|(d, s)| *d * *s).collect();
    sampling.pull_back(&w)
}

/// Compliance of the full pipeline (projection, assembly, solve) for the
/// given coefficients.
pub fn evaluate_compliance<T: Scalar>(
    model: &AnalysisModel<T>,
    sampling: &BasisSampling<T>,
    coefficients: &[T],
    tau: T,
    kappa: T,
) -> Result<T> {
    let rho: Vec<T> = sampling
        .evaluate(coefficients)
        .into_iter()
        .map(|r| heaviside(r, tau, kappa))
        .collect();
    let u = model.solve(&rho)?;
    Ok(crate::rm_analysis::compliance(&u, &model.loads))
}

/// Global volume for the given coefficients.
pub fn evaluate_volume<T: Scalar>(solid_volumes: &[T], sampling: &BasisSampling<T>, coefficients: &[T], tau: T, kappa: T) -> T {
    let rho: Vec<T> = sampling
        .evaluate(coefficients)
        .into_iter()
        .map(|r| heaviside(r, tau, kappa))
        .collect();
    total_volume(&rho, solid_volumes)
}

/// Aggregated local volume for the given coefficients.
pub fn evaluate_local_volume<T: Scalar>(
    neighborhoods: &Neighborhoods<T>,
    sampling: &BasisSampling<T>,
    coefficients: &[T],
    gamma: T,
    tau: T,
    kappa: T,
) -> Result<T> {
    let rho: Vec<T> = sampling
        .evaluate(coefficients)
        .into_iter()
        .map(|r| heaviside(r, tau, kappa))
        .collect();
    crate::density_field::aggregate_pmean(&neighborhoods.local_average(&rho), gamma)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdEntry<T> {
    pub index: usize,
    pub analytic: T,
    pub numeric: T,
    pub rel_error: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdReport<T> {
    pub entries: Vec<FdEntry<T>>,
    pub max_rel_error: T,
}

/// Central differences of `objective` at the listed indices of `x`,
/// compared with `analytic`. The relative error divides by
/// `max(|numeric|, 1e-8 * max|analytic|)` so that entries which vanish
/// analytically are judged against the gradient scale.
pub fn fd_gradient_check<T: Scalar>(
    mut objective: impl FnMut(&[T]) -> Result<T>,
    x: &[T],
    analytic: &[T],
    indices: &[usize],
    step: T,
) -> Result<FdReport<T>> {
    if analytic.len() != x.len() {
        return Err(Error::Contract("gradient length differs from the design vector".into()));
    }
    let scale = analytic.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let floor = scale * lit(1e-8);
    let mut xp = x.to_vec();
    let mut entries = Vec::with_capacity(indices.len());
    let mut worst = T::zero();
    for &i in indices {
        xp[i] = x[i] + step;
        let fp = objective(&xp)?;
        xp[i] = x[i] - step;
        let fm = objective(&xp)?;
        xp[i] = x[i];
        let numeric = (fp - fm) / (step + step);
        let denom = numeric.abs().max(floor);
        let err = if denom > T::zero() {
            (analytic[i] - numeric).abs() / denom
        } else {
            (analytic[i] - numeric).abs()
        };
        worst = worst.max(err);
        entries.push(FdEntry {
            index: i,
            analytic: analytic[i],
            numeric,
            rel_error: err,
        });
    }
    Ok(FdReport {
        entries,
        max_rel_error: worst,
    })
}
