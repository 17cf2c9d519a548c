//! Free data on the two characteristic data surfaces.
//!
//! Each variable's data is a sum of separable modes: a profile along the
//! surface's characteristic direction (`x` for `q̂` on `u = 0`, `u` for `ŵ` on
//! `x = 0`) times `cos(k·y + phase)` in the periodic transverse coordinates.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile<T> {
    Zero,
    /// `amp · sin(k s + phase)`.
    Sine { amp: T, k: T, phase: T },
    /// `amp · exp(-((s - center) / width)²)`.
    Gauss { amp: T, center: T, width: T },
}

impl<T: Scalar> Profile<T> {
    pub fn eval(&self, s: T) -> T {
        match *self {
            Profile::Zero => T::zero(),
            Profile::Sine { amp, k, phase } => amp * (k * s + phase).sin(),
            Profile::Gauss { amp, center, width } => {
                let z = (s - center) / width;
                amp * (-z * z).exp()
            }
        }
    }
}

/// One separable term.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode<T> {
    pub profile: Profile<T>,
    /// Integer wavenumbers per transverse direction; missing entries are 0.
    pub wavenumbers: Vec<i32>,
    pub transverse_phase: T,
}

impl<T: Scalar> Mode<T> {
    pub fn new(profile: Profile<T>) -> Self {
        Self {
            profile,
            wavenumbers: Vec::new(),
            transverse_phase: T::zero(),
        }
    }

    pub fn with_wavenumbers(mut self, k: &[i32]) -> Self {
        self.wavenumbers = k.to_vec();
        self
    }

    pub fn with_transverse_phase(mut self, phase: T) -> Self {
        self.transverse_phase = phase;
        self
    }

    pub fn eval(&self, s: T, transverse: &[T]) -> T {
        let arg = transverse
            .iter()
            .zip(self.wavenumbers.iter().chain(std::iter::repeat(&0)))
            .fold(self.transverse_phase, |acc, (&y, &k)| acc + T::lit(k as f64) * y);
        self.profile.eval(s) * arg.cos()
    }
}

/// Data for one variable.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VariableData<T> {
    pub modes: Vec<Mode<T>>,
}

impl<T: Scalar> VariableData<T> {
    pub fn zero() -> Self {
        Self { modes: Vec::new() }
    }

    pub fn single(mode: Mode<T>) -> Self {
        Self { modes: vec![mode] }
    }

    pub fn eval(&self, s: T, transverse: &[T]) -> T {
        self.modes.iter().map(|m| m.eval(s, transverse)).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.modes.iter().all(|m| m.profile == Profile::Zero)
    }
}

/// `q0` per normal variable (given on `u = 0` as a function of `x`), `w0` per
/// null variable (given on `x = 0` as a function of `u`).
#[derive(Debug, Clone, PartialEq)]
pub struct DataSpec<T> {
    pub q0: Vec<VariableData<T>>,
    pub w0: Vec<VariableData<T>>,
}

impl<T: Scalar> DataSpec<T> {
    pub fn zero(n_normal: usize, n_null: usize) -> Self {
        Self {
            q0: vec![VariableData::zero(); n_normal],
            w0: vec![VariableData::zero(); n_null],
        }
    }

    /// `α·self + β·other`, mode lists concatenated.
    pub fn combine(&self, alpha: T, other: &Self, beta: T) -> Self {
        let mix = |a: &[VariableData<T>], b: &[VariableData<T>]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| VariableData {
                    modes: x
                        .modes
                        .iter()
                        .map(|m| scale_mode(m, alpha))
                        .chain(y.modes.iter().map(|m| scale_mode(m, beta)))
                        .collect(),
                })
                .collect()
        };
        Self {
            q0: mix(&self.q0, &other.q0),
            w0: mix(&self.w0, &other.w0),
        }
    }
}

fn scale_mode<T: Scalar>(m: &Mode<T>, s: T) -> Mode<T> {
    let profile = match m.profile {
        Profile::Zero => Profile::Zero,
        Profile::Sine { amp, k, phase } => Profile::Sine { amp: amp * s, k, phase },
        Profile::Gauss { amp, center, width } => Profile::Gauss { amp: amp * s, center, width },
    };
    Mode { profile, ..m.clone() }
}

/// Parses a comma-separated list of presets:
/// `zero`, `sine:amp=..,k=..,phase=..[,ky=..][,kz=..]`,
/// `gauss:amp=..,center=..,width=..[,ky=..][,kz=..]`.
pub fn parse_presets<T: Scalar>(text: &str) -> Result<Vec<VariableData<T>>> {
    let mut groups: Vec<(String, Vec<(String, String)>)> = Vec::new();
    for raw in text.split(',') {
        let tok = raw.trim();
        if tok.is_empty() {
            return Err(Error::Config(format!("empty item in preset list '{text}'")));
        }
        if tok == "zero" {
            groups.push(("zero".into(), Vec::new()));
        } else if let Some((kind, first)) = tok.split_once(':') {
            let kv = split_kv(first)?;
            groups.push((kind.to_string(), vec![kv]));
        } else if tok.contains('=') {
            let (_, fields) = groups
                .last_mut()
                .ok_or_else(|| Error::Config(format!("parameter '{tok}' before any preset")))?;
            fields.push(split_kv(tok)?);
        } else {
            return Err(Error::Config(format!("unknown preset '{tok}'")));
        }
    }
    groups.into_iter().map(|(kind, fields)| build_preset(&kind, &fields)).collect()
}

fn split_kv(tok: &str) -> Result<(String, String)> {
    tok.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| Error::Config(format!("expected key=value, got '{tok}'")))
}

fn build_preset<T: Scalar>(kind: &str, fields: &[(String, String)]) -> Result<VariableData<T>> {
    let allowed: &[&str] = match kind {
        "zero" => &[],
        "sine" => &["amp", "k", "phase", "ky", "kz"],
        "gauss" => &["amp", "center", "width", "ky", "kz"],
        other => return Err(Error::Config(format!("unknown preset '{other}'"))),
    };
    let mut values = std::collections::BTreeMap::new();
    for (k, v) in fields {
        if !allowed.contains(&k.as_str()) {
            return Err(Error::Config(format!("unknown parameter '{k}' for preset '{kind}'")));
        }
        let x = f64::from_str(v).map_err(|_| Error::Config(format!("invalid number '{v}' for '{k}'")))?;
        if !x.is_finite() {
            return Err(Error::Config(format!("non-finite value for '{k}'")));
        }
        if values.insert(k.as_str(), x).is_some() {
            return Err(Error::Config(format!("duplicate parameter '{k}'")));
        }
    }
    let get = |k: &str| {
        values
            .get(k)
            .copied()
            .ok_or_else(|| Error::Config(format!("preset '{kind}' needs '{k}'")))
    };
    let wavenumber = |k: &str| -> Result<i32> {
        match values.get(k) {
            None => Ok(0),
            Some(&x) if x.fract() == 0.0 && x.abs() < 1e6 => Ok(x as i32),
            Some(_) => Err(Error::Config(format!("'{k}' must be an integer for periodic data"))),
        }
    };
    let profile = match kind {
        "zero" => return Ok(VariableData::zero()),
        "sine" => Profile::Sine {
            amp: T::lit(get("amp")?),
            k: T::lit(get("k")?),
            phase: T::lit(get("phase")?),
        },
        _ => {
            let width = get("width")?;
            if width <= 0.0 {
                return Err(Error::Config("gauss width must be positive".into()));
            }
            Profile::Gauss {
                amp: T::lit(get("amp")?),
                center: T::lit(get("center")?),
                width: T::lit(width),
            }
        }
    };
    Ok(VariableData::single(
        Mode::new(profile).with_wavenumbers(&[wavenumber("ky")?, wavenumber("kz")?]),
    ))
}
