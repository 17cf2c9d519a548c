//! Algebraic well-posedness criteria for the compact canonical system and the
//! growth parameters of the resulting a priori estimate.
//!
//! The criteria: every principal matrix `C^a` symmetric, `Nu` positive
//! definite, and `-Nu < Nx ≤ 0`. When they hold the data norms bound the
//! solution norm on `u + x = T` up to a factor `e^{(r/c) T}`, which collapses
//! to 1 when `R` is non-negative.

use std::fmt;

use crate::canonical::CompactSystem;
use crate::error::{Error, Result};
use crate::matkit::{classify_definiteness, symmetric_eigen, Definiteness, DefinitenessClass, Matrix};
use crate::scalar::{Scalar, Tolerances};

/// Width of the band, in units of the eigenvalue tolerance, in which a
/// positive eigenvalue of `Nx` makes the verdict inconclusive rather than
/// negative.
pub const MARGINAL_BAND: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    WellPosed,
    NotWellPosed,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::WellPosed => "WELL_POSED",
            Self::NotWellPosed => "NOT_WELL_POSED",
            Self::Inconclusive => "INCONCLUSIVE",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WellPosednessReport<T> {
    /// `(coordinate name, C^a symmetric)`.
    pub symmetric_ca: Vec<(String, bool)>,
    pub class_nu: DefinitenessClass<T>,
    pub class_nx: DefinitenessClass<T>,
    pub class_nu_plus_nx: DefinitenessClass<T>,
    /// Classification of the symmetric part of `R`.
    pub class_r: DefinitenessClass<T>,
    pub verdict: Verdict,
    /// Human-readable reasons for a negative or inconclusive verdict.
    pub failures: Vec<String>,
    /// `max |R_ij|`.
    pub r: T,
    /// Smallest eigenvalue of `C^u + C^x`.
    pub c: T,
    /// `r / c` when the exponential branch applies, zero otherwise.
    pub growth_exponent: T,
    /// `None` means the estimate holds for every `T`.
    pub t_max: Option<T>,
    /// Surfaces `u + x = T` are spacelike.
    pub time_function_ok: bool,
}

impl<T: Scalar> WellPosednessReport<T> {
    pub fn criterion_i(&self) -> bool {
        self.symmetric_ca.iter().all(|(_, s)| *s)
    }

    pub fn criterion_ii(&self) -> bool {
        self.class_nu.tag == Definiteness::PositiveDefinite
            && self.class_nx.tag.is_non_positive()
            && self.class_nu_plus_nx.tag == Definiteness::PositiveDefinite
    }
}

fn classify_sym<T: Scalar>(m: &Matrix<T>, tol: T) -> DefinitenessClass<T> {
    classify_definiteness(&m.symmetric_part(), tol).expect("symmetric part of a square matrix")
}

fn is_symmetric<T: Scalar>(m: &Matrix<T>, tol: T) -> bool {
    m.asymmetry() <= tol * m.norm()
}

pub fn check_criteria<T: Scalar>(cf: &CompactSystem<T>, tol: &Tolerances<T>) -> WellPosednessReport<T> {
    let symmetric_ca: Vec<(String, bool)> = cf
        .coord_names
        .iter()
        .zip(&cf.c)
        .map(|(name, c)| (name.clone(), is_symmetric(c, tol.sym)))
        .collect();
    let nu = cf.nu();
    let nx = cf.nx();
    let class_nu = classify_sym(&nu, tol.eig);
    let class_nx = classify_sym(&nx, tol.eig);
    let class_nu_plus_nx = classify_sym(&(&nu + &nx), tol.eig);
    let class_r = classify_sym(&cf.r, tol.eig);

    let mut failures = Vec::new();
    for (name, ok) in &symmetric_ca {
        if !ok {
            failures.push(format!("criterion i: C^{name} is not symmetric"));
        }
    }
    if class_nu.tag != Definiteness::PositiveDefinite {
        failures.push(format!("criterion ii: Nu is {} (must be POSITIVE_DEFINITE)", class_nu.tag));
    }
    let nx_ok = class_nx.tag.is_non_positive();
    if !nx_ok {
        failures.push(format!("criterion ii: Nx is {} (must be non-positive)", class_nx.tag));
    }
    if class_nu_plus_nx.tag != Definiteness::PositiveDefinite {
        failures.push(format!("criterion ii: Nu+Nx is {} (must be POSITIVE_DEFINITE)", class_nu_plus_nx.tag));
    }

    let verdict = if failures.is_empty() {
        Verdict::WellPosed
    } else {
        let only_nx = failures.len() == 1 && !nx_ok;
        let largest = class_nx.eigenvalues.last().copied().unwrap_or_else(T::zero);
        let band = T::lit(MARGINAL_BAND) * tol.eig * nx.norm();
        if only_nx && largest <= band {
            Verdict::Inconclusive
        } else {
            Verdict::NotWellPosed
        }
    };

    let (r, c) = growth_constants(cf);
    let exponential = !class_r.tag.is_non_negative();
    let (growth_exponent, t_max) = if exponential && c > T::zero() {
        (r / c, Some(c / r))
    } else {
        (T::zero(), None)
    };

    WellPosednessReport {
        symmetric_ca,
        time_function_ok: class_nu_plus_nx.tag == Definiteness::PositiveDefinite,
        class_nu,
        class_nx,
        class_nu_plus_nx,
        class_r,
        verdict,
        failures,
        r,
        c,
        growth_exponent,
        t_max,
    }
}

fn growth_constants<T: Scalar>(cf: &CompactSystem<T>) -> (T, T) {
    let r = cf.r.max_abs();
    let (eig, _) = symmetric_eigen(&cf.sigma_weight()).expect("square weight");
    let c = eig.first().copied().unwrap_or_else(T::zero);
    (r, c)
}

/// Constants of the bound `‖v‖²_T ≤ factor(T) (‖q₀‖² + ‖w₀‖²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthParameters<T> {
    pub r: T,
    pub c: T,
    /// `None` when `R ≥ 0` and the bound holds for every `T`.
    pub t_max: Option<T>,
}

impl<T: Scalar> GrowthParameters<T> {
    /// `e^{(r/c) T}` on the exponential branch, otherwise 1.
    pub fn factor(&self, t: T) -> T {
        match self.t_max {
            None => T::one(),
            Some(_) => (self.r / self.c * t).exp(),
        }
    }

    /// Errors for `T ≥ c/r`.
    pub fn check_horizon(&self, t: T) -> Result<()> {
        match self.t_max {
            Some(t_max) if t >= t_max => Err(Error::BeyondHorizon {
                t: t.as_f64(),
                t_max: t_max.as_f64(),
            }),
            _ => Ok(()),
        }
    }
}

pub fn growth_parameters<T: Scalar>(cf: &CompactSystem<T>, tol: &Tolerances<T>) -> Result<GrowthParameters<T>> {
    let weight = cf.sigma_weight();
    let class = classify_sym(&weight, tol.eig);
    if class.tag != Definiteness::PositiveDefinite {
        return Err(Error::NoNorm);
    }
    let (r, c) = growth_constants(cf);
    let class_r = classify_sym(&cf.r, tol.eig);
    let t_max = if class_r.tag.is_non_negative() { None } else { Some(c / r) };
    Ok(GrowthParameters { r, c, t_max })
}
