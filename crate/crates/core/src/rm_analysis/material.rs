use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// Isotropic material with SIMP interpolation of Young's modulus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams<T> {
    pub e0: T,
    pub e_min: T,
    pub nu: T,
    /// SIMP penalization exponent.
    pub penal: T,
    /// Transverse shear correction factor.
    pub shear_correction: T,
}

impl<T: Scalar> MaterialParams<T> {
    /// `E_min = 1e-6 E0`, penalization 5, shear correction 5/6.
    pub fn new(e0: T, nu: T) -> Result<Self> {
        Self {
            e0,
            e_min: e0 * lit(1e-6),
            nu,
            penal: lit(5.0),
            shear_correction: lit(5.0 / 6.0),
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.e0 > T::zero()) || !self.e0.is_finite() {
            return Err(Error::config("material.e0", "must be positive"));
        }
        if !(self.e_min > T::zero() && self.e_min < self.e0) {
            return Err(Error::config("material.e_min", "must satisfy 0 < E_min < E0"));
        }
        if !(self.nu >= T::zero() && self.nu < lit(0.5)) {
            return Err(Error::config("material.nu", "Poisson's ratio must lie in [0, 0.5)"));
        }
        if !(self.penal >= T::one()) {
            return Err(Error::config("material.penal", "penalization must be >= 1"));
        }
        if !(self.shear_correction > T::zero() && self.shear_correction <= T::one()) {
            return Err(Error::config("material.shear_correction", "must lie in (0, 1]"));
        }
        Ok(self)
    }

    /// `E(rho) = E_min + rho^penal (E0 - E_min)`.
    pub fn modulus(&self, rho: T) -> T {
        self.e_min + rho.powf(self.penal) * (self.e0 - self.e_min)
    }

    /// `E_min / E0`, the stiffness floor relative to solid.
    pub fn floor_ratio(&self) -> T {
        self.e_min / self.e0
    }

    /// Scale applied to a solid element matrix: `E(rho) / E0`.
    pub fn stiffness_scale(&self, rho: T) -> T {
        self.modulus(rho) / self.e0
    }

    /// d(E(rho)/E0)/d(rho).
    pub fn stiffness_scale_derivative(&self, rho: T) -> T {
        self.penal * rho.powf(self.penal - T::one()) * (T::one() - self.floor_ratio())
    }
}

fn clamp_density<T: Scalar>(rho: T) -> T {
    if rho < T::zero() || rho > T::one() {
        log::warn!("projected density {rho} outside [0, 1]; clamped");
        rho.max(T::zero()).min(T::one())
    } else {
        rho
    }
}

/// Local constitutive matrix for strains ordered
/// `(e11, e22, e33, g12, g23, g13)` in the shell frame. The normal-stress
/// row and column are zero; transverse shears carry the shear correction.
pub fn material_matrix<T: Scalar>(mat: &MaterialParams<T>, rho: T) -> [[T; 6]; 6] {
    let e = mat.modulus(clamp_density(rho));
    let nu = mat.nu;
    let c = e / (T::one() - nu * nu);
    let g = e / (lit::<T>(2.0) * (T::one() + nu));
    let mut d = [[T::zero(); 6]; 6];
    d[0][0] = c;
    d[1][1] = c;
    d[0][1] = c * nu;
    d[1][0] = c * nu;
    d[3][3] = g;
    d[4][4] = mat.shear_correction * g;
    d[5][5] = mat.shear_correction * g;
    d
}
