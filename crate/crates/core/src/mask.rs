//! Two-parameter periodic mask tables `nu[j][k]`, their phases and the
//! built-in families.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lift::{branch, Side};

/// Default tolerance for validating tables produced in memory.
pub const BUILTIN_TOL: f64 = 1e-12;
/// Default tolerance for tables read back from decimal text.
pub const FILE_TOL: f64 = 1e-10;
/// Default transition width of the `meyer_smooth` family.
pub const DEFAULT_MEYER_TRANSITION: f64 = 1.0 / 3.0;

pub(crate) fn pow2(e: i32) -> f64 {
    2f64.powi(e)
}

/// `cos(theta)`, switching to the complementary sine above pi/4 so that a
/// phase of exactly pi/2 maps to an exact zero.
pub fn nu_from_theta(theta: f64) -> f64 {
    if theta <= FRAC_PI_4 {
        theta.cos()
    } else {
        (FRAC_PI_2 - theta).sin()
    }
}

/// Anything that can report mask values at dyadic knots for every level at or
/// above its first level.
pub trait KnotValues: Sync {
    fn first_level(&self) -> u32;
    /// Value of the level-`level` mask at `k * 2^-level`.
    fn nu(&self, level: u32, k: i64) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicMaskTable {
    j_min: u32,
    nu: Vec<Vec<f64>>,
    theta: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaTable {
    j_min: u32,
    levels: Vec<Vec<f64>>,
}

impl ThetaTable {
    pub fn j_min(&self) -> u32 {
        self.j_min
    }

    pub fn j_max(&self) -> u32 {
        self.j_min + self.levels.len() as u32 - 1
    }

    pub fn level(&self, j: u32) -> Option<&[f64]> {
        j.checked_sub(self.j_min)
            .and_then(|i| self.levels.get(i as usize))
            .map(Vec::as_slice)
    }
}

fn check_shape(j_min: u32, levels: &[Vec<f64>]) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::InvalidTable("no levels".into()));
    }
    if j_min == 0 {
        return Err(Error::InvalidTable("j_min must be at least 1".into()));
    }
    let top = j_min as usize + levels.len() - 1;
    if top > 30 {
        return Err(Error::InvalidTable(format!("top level {top} is too large")));
    }
    for (i, level) in levels.iter().enumerate() {
        let j = j_min + i as u32;
        let expected = 1usize << j;
        if level.len() != expected {
            return Err(Error::LevelLength {
                level: j,
                expected,
                found: level.len(),
            });
        }
        if let Some(k) = level.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidTable(format!("level {j}, k = {k}: non-finite value")));
        }
    }
    Ok(())
}

impl PeriodicMaskTable {
    /// Builds a table from mask values; phases are `arccos` of the values
    /// clamped to [0, 1].
    pub fn from_nu(j_min: u32, levels: Vec<Vec<f64>>) -> Result<Self> {
        check_shape(j_min, &levels)?;
        let theta = levels
            .iter()
            .map(|l| l.iter().map(|v| v.clamp(0.0, 1.0).acos()).collect())
            .collect();
        Ok(Self {
            j_min,
            nu: levels,
            theta,
        })
    }

    /// Builds a table from phases, keeping them as the exact phase source.
    pub fn from_theta(j_min: u32, theta: Vec<Vec<f64>>) -> Result<Self> {
        check_shape(j_min, &theta)?;
        let nu = theta
            .iter()
            .map(|l| l.iter().map(|&t| nu_from_theta(t)).collect())
            .collect();
        Ok(Self { j_min, nu, theta })
    }

    pub fn j_min(&self) -> u32 {
        self.j_min
    }

    pub fn j_max(&self) -> u32 {
        self.j_min + self.nu.len() as u32 - 1
    }

    pub fn contains(&self, j: u32) -> bool {
        j >= self.j_min && j <= self.j_max()
    }

    fn index(&self, j: u32) -> Result<usize> {
        if self.contains(j) {
            Ok((j - self.j_min) as usize)
        } else {
            Err(Error::LevelUnavailable {
                level: j,
                j_min: self.j_min,
                j_max: self.j_max(),
            })
        }
    }

    pub fn level(&self, j: u32) -> Result<&[f64]> {
        Ok(&self.nu[self.index(j)?])
    }

    pub fn theta_level(&self, j: u32) -> Result<&[f64]> {
        Ok(&self.theta[self.index(j)?])
    }

    /// `nu[j][k]` with `k` reduced modulo `2^j`. Panics if `j` is not stored.
    pub fn nu_at(&self, j: u32, k: i64) -> f64 {
        let level = &self.nu[(j - self.j_min) as usize];
        level[k.rem_euclid(level.len() as i64) as usize]
    }

    pub fn theta_at(&self, j: u32, k: i64) -> f64 {
        let level = &self.theta[(j - self.j_min) as usize];
        level[k.rem_euclid(level.len() as i64) as usize]
    }

    /// Mask value at `x` for levels above the top: the piecewise-linear phase
    /// lift of the top level (stationary tail).
    pub fn tail_value(&self, x: f64) -> f64 {
        let top = self.j_max();
        linear_lift(&self.theta[self.nu.len() - 1], top, x)
    }

    pub fn theta_of(&self) -> ThetaTable {
        ThetaTable {
            j_min: self.j_min,
            levels: self.theta.clone(),
        }
    }

    pub fn validate(&self, tol: f64) -> ValidationReport {
        let per_level: Vec<(Vec<Violation>, InvariantResiduals)> = self
            .nu
            .par_iter()
            .enumerate()
            .map(|(i, level)| validate_level(self.j_min + i as u32, level, tol))
            .collect();
        let mut violations = Vec::new();
        let mut residuals = InvariantResiduals::default();
        for (v, r) in per_level {
            violations.extend(v);
            residuals.merge(&r);
        }
        ValidationReport {
            tol,
            valid: violations.is_empty(),
            residuals,
            violations,
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: MaskFile = serde_json::from_str(text)?;
        let mut levels = Vec::with_capacity(file.levels.len());
        for (position, entry) in file.levels.into_iter().enumerate() {
            let expected = file.j_min + position as u32;
            if entry.j != expected {
                return Err(Error::NonContiguous {
                    j_min: file.j_min,
                    position,
                    found: entry.j,
                });
            }
            levels.push(entry.nu);
        }
        Self::from_nu(file.j_min, levels)
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        let file = MaskFile {
            j_min: self.j_min,
            levels: self
                .nu
                .iter()
                .enumerate()
                .map(|(i, nu)| MaskLevel {
                    j: self.j_min + i as u32,
                    nu: nu.clone(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }
}

impl KnotValues for PeriodicMaskTable {
    fn first_level(&self) -> u32 {
        self.j_min
    }

    fn nu(&self, level: u32, k: i64) -> f64 {
        if level <= self.j_max() {
            self.nu_at(level, k)
        } else {
            self.tail_value(k as f64 * pow2(-(level as i32)))
        }
    }
}

/// Mask with piecewise-linear phase through `theta` (one level, `2^j` values),
/// evaluated with the four-branch rule.
pub(crate) fn linear_lift(theta: &[f64], j: u32, x: f64) -> f64 {
    let b = branch(x, Side::Right);
    let pieces = 1usize << (j - 2);
    let s = b.u * pow2(j as i32);
    let i = (s.floor() as usize).min(pieces - 1);
    let t = s - i as f64;
    let z = (theta[i + 1] - theta[i]) * t + theta[i];
    if b.sine {
        z.sin()
    } else {
        z.cos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Invariant {
    Range,
    Quadrature,
    Symmetry,
    Origin,
    Quarter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub invariant: Invariant,
    pub level: u32,
    pub k: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InvariantResiduals {
    pub range: f64,
    pub quadrature: f64,
    pub symmetry: f64,
    pub origin: f64,
    pub quarter: f64,
}

impl InvariantResiduals {
    fn merge(&mut self, other: &Self) {
        self.range = self.range.max(other.range);
        self.quadrature = self.quadrature.max(other.quadrature);
        self.symmetry = self.symmetry.max(other.symmetry);
        self.origin = self.origin.max(other.origin);
        self.quarter = self.quarter.max(other.quarter);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub tol: f64,
    pub valid: bool,
    pub residuals: InvariantResiduals,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn has(&self, invariant: Invariant) -> bool {
        self.violations.iter().any(|v| v.invariant == invariant)
    }
}

fn validate_level(j: u32, nu: &[f64], tol: f64) -> (Vec<Violation>, InvariantResiduals) {
    let n = nu.len();
    let half = n / 2;
    let mut found = Vec::new();
    let mut res = InvariantResiduals::default();
    let record = |found: &mut Vec<Violation>, invariant, k, r: f64| {
        if r > tol {
            found.push(Violation {
                invariant,
                level: j,
                k,
                residual: r,
            });
        }
    };

    for (k, &v) in nu.iter().enumerate() {
        let r = (-v).max(v - 1.0).max(0.0);
        res.range = res.range.max(r);
        record(&mut found, Invariant::Range, k, r);
    }
    for k in 0..half {
        let r = (nu[k] * nu[k] + nu[k + half] * nu[k + half] - 1.0).abs();
        res.quadrature = res.quadrature.max(r);
        record(&mut found, Invariant::Quadrature, k, r);
    }
    for k in 1..half {
        let r = (nu[k] - nu[n - k]).abs();
        res.symmetry = res.symmetry.max(r);
        record(&mut found, Invariant::Symmetry, k, r);
    }
    let r = (nu[0] - 1.0).abs();
    res.origin = r;
    record(&mut found, Invariant::Origin, 0, r);
    if j >= 2 {
        let q = n / 4;
        let r = (nu[q] - FRAC_1_SQRT_2).abs();
        res.quarter = r;
        record(&mut found, Invariant::Quarter, q, r);
    }
    found.sort_by_key(|v| v.k);
    (found, res)
}

#[derive(Debug, Serialize, Deserialize)]
struct MaskFile {
    j_min: u32,
    levels: Vec<MaskLevel>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MaskLevel {
    j: u32,
    nu: Vec<f64>,
}

/// Built-in mask families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Family {
    /// `nu[j][k] = |cos(pi k / 2^j)|`.
    HaarCos,
    /// `nu = cos(pi/2 * beta(s(t)))` with `t = |k| / 2^(j-1)`, `beta(t) = t^2 (3 - 2t)`
    /// and `s` squeezing the rise of `beta` into a band of width `transition`
    /// centred at `t = 1/2`. `transition = 1` is the unsqueezed profile.
    MeyerSmooth { transition: f64 },
}

impl Family {
    pub fn from_name(name: &str, transition: Option<f64>) -> Result<Self> {
        match name {
            "haar_cos" => Ok(Family::HaarCos),
            "meyer_smooth" => {
                let w = transition.unwrap_or(DEFAULT_MEYER_TRANSITION);
                if !(w > 0.0 && w <= 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "meyer_smooth transition must lie in (0, 1], got {w}"
                    )));
                }
                Ok(Family::MeyerSmooth { transition: w })
            }
            other => Err(Error::UnknownFamily(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::HaarCos => "haar_cos",
            Family::MeyerSmooth { .. } => "meyer_smooth",
        }
    }

    /// Phase as a function of `t = |k| / 2^(j-1)` in [0, 1].
    pub fn phase(&self, t: f64) -> f64 {
        match *self {
            Family::HaarCos => FRAC_PI_2 * t,
            Family::MeyerSmooth { transition } => {
                let s = ((t - 0.5) / transition + 0.5).clamp(0.0, 1.0);
                FRAC_PI_2 * (s * s * (3.0 - 2.0 * s))
            }
        }
    }

    /// Phases of level `j`, built from the first quarter and reflected so the
    /// quadrature identity holds to rounding.
    pub fn theta_level(&self, j: u32) -> Vec<f64> {
        let n = 1i64 << j;
        let half = n / 2;
        let quarter = n / 4;
        let scale = 1.0 / half as f64;
        (0..n)
            .map(|k| {
                let kp = k.min(n - k);
                if kp <= quarter {
                    self.phase(kp as f64 * scale)
                } else {
                    FRAC_PI_2 - self.phase((half - kp) as f64 * scale)
                }
            })
            .collect()
    }

    pub fn table(&self, j_min: u32, j_max: u32) -> Result<PeriodicMaskTable> {
        if j_min < 2 {
            return Err(Error::LevelTooSmall(j_min));
        }
        if j_max < j_min {
            return Err(Error::InvalidArgument(format!(
                "j_max = {j_max} is below j_min = {j_min}"
            )));
        }
        let levels = (j_min..=j_max).map(|j| self.theta_level(j)).collect();
        PeriodicMaskTable::from_theta(j_min, levels)
    }
}

/// Built-in family by name with default parameters.
pub fn builtin_family(name: &str, j_min: u32, j_max: u32) -> Result<PeriodicMaskTable> {
    Family::from_name(name, None)?.table(j_min, j_max)
}
