//! Heisenberg uncertainty constants of real-line functions given by their
//! spectra, and Breitenberger constants of periodic functions given by
//! Fourier coefficients.

use std::f64::consts::{PI, SQRT_2, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{build_periodic_level, level_scale, unit_phase};
use crate::lift::Side;
use crate::mask::pow2;
use crate::periodize::CoefficientSeries;
use crate::product::{mask_truncation_depth, partial_product, product_jet, LiftedFamily, MaskFamily, MAX_DEPTH};
use crate::quadrature::{gl16, gl8, Rule};

pub const FREQUENCY_CONVENTION: &str = "angular: omega = 2 pi xi";
const DECAY_RATIO: f64 = 1e-8;
const GROWTH_TOL: f64 = 1e-3;
const MAX_DIVERGENT_DECAY: f64 = 1.75;

/// A function on the real line given by its Fourier transform.
pub trait Spectrum: Sync {
    fn value(&self, xi: f64) -> Complex64;

    fn derivative(&self, _xi: f64) -> Option<Complex64> {
        None
    }

    /// Width of the quadrature panels. The spectrum is smooth inside each
    /// panel `[p w, (p + 1) w]`.
    fn panel(&self) -> f64;
}

/// `e^{-pi xi^2}`, the transform of `e^{-pi x^2}`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Gaussian;

impl Spectrum for Gaussian {
    fn value(&self, xi: f64) -> Complex64 {
        Complex64::new((-PI * xi * xi).exp(), 0.0)
    }

    fn derivative(&self, xi: f64) -> Option<Complex64> {
        Some(Complex64::new(-TAU * xi * (-PI * xi * xi).exp(), 0.0))
    }

    fn panel(&self) -> f64 {
        0.25
    }
}

/// The level-`j` wavelet of a lifted family, either `psi^N_j` or the
/// auxiliary `psi_j(x) = 2^{-j/2} psi^N_j(2^{-j} x)` whose transform is
/// `e^{pi i xi} m_{j+1}(xi/2 + 1/2) phi_{j+1}(xi/2)`.
#[derive(Debug, Clone)]
pub struct LevelWavelet<'a> {
    family: &'a LiftedFamily,
    level: u32,
    depth: usize,
    auxiliary: bool,
}

impl<'a> LevelWavelet<'a> {
    fn new(family: &'a LiftedFamily, level: u32, eta_span: f64, tol: f64, auxiliary: bool) -> Result<Self> {
        let k = (eta_span * pow2(level as i32 + 1)).ceil() as i64 + 1;
        let (depth, _) = mask_truncation_depth(family, level + 1, -k, k, tol)?;
        let c = (1..=MAX_DEPTH as u32)
            .map(|r| family.derivative_bound(level + 1 + r))
            .fold(0.0, f64::max);
        let need = if c > 0.0 { (c / tol).log2().ceil().max(0.0) as usize } else { 0 };
        Ok(Self { family, level, depth: depth.max(need).min(MAX_DEPTH), auxiliary })
    }

    /// `psi^N_j` on `|xi| <= span`.
    pub fn nonstationary(family: &'a LiftedFamily, level: u32, span: f64, tol: f64) -> Result<Self> {
        Self::new(family, level, span * pow2(-(level as i32 + 1)), tol, false)
    }

    /// `psi_j` on `|xi| <= span`.
    pub fn auxiliary(family: &'a LiftedFamily, level: u32, span: f64, tol: f64) -> Result<Self> {
        Self::new(family, level, span / 2.0, tol, true)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// `eta`, `d eta / d xi` and the amplitude factor.
    fn map(&self, xi: f64) -> (f64, f64, f64) {
        if self.auxiliary {
            (xi / 2.0, 0.5, 1.0)
        } else {
            let s = pow2(-(self.level as i32 + 1));
            (xi * s, s, level_scale(self.level))
        }
    }
}

impl Spectrum for LevelWavelet<'_> {
    fn value(&self, xi: f64) -> Complex64 {
        let (eta, _, amp) = self.map(xi);
        let j = self.level;
        let v = self.family.value(j + 1, eta + 0.5) * partial_product(self.family, j + 1, eta, self.depth);
        unit_phase(eta) * (amp * v)
    }

    fn derivative(&self, xi: f64) -> Option<Complex64> {
        let (eta, deta, amp) = self.map(xi);
        let j = self.level;
        let a = self.family.jet(j + 1, eta + 0.5, Side::Right);
        let b = product_jet(self.family, j + 1, eta, self.depth, Side::Right);
        let inner = Complex64::new(a.d1 * b.v + a.v * b.d1, TAU * a.v * b.v);
        Some(unit_phase(eta) * inner * (amp * deta))
    }

    fn panel(&self) -> f64 {
        if self.auxiliary {
            pow2(-(self.level as i32))
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    m0: f64,
    m1: f64,
    m2: f64,
    d2: f64,
    cross: Complex64,
    peak: f64,
    edge: f64,
}

impl Moments {
    fn add(&mut self, o: &Moments) {
        self.m0 += o.m0;
        self.m1 += o.m1;
        self.m2 += o.m2;
        self.d2 += o.d2;
        self.cross += o.cross;
        self.peak = self.peak.max(o.peak);
    }

    /// `(time_centre, time_var, freq_centre, freq_var)`, frequency angular.
    fn stats(&self) -> (f64, f64, f64, f64) {
        let tc = -self.cross.im / (TAU * self.m0);
        let tv = (self.d2 / (4.0 * PI * PI * self.m0) - tc * tc).max(0.0);
        let c = self.m1 / self.m0;
        let fv = (4.0 * PI * PI * (self.m2 / self.m0 - c * c)).max(0.0);
        (tc, tv, TAU * c, fv)
    }

    fn uc(&self) -> f64 {
        let (_, tv, _, fv) = self.stats();
        (tv * fv).sqrt()
    }
}

#[derive(Clone, Copy)]
enum Derivative {
    Exact,
    Central(f64),
}

fn sample<S: Spectrum + ?Sized>(spec: &S, x: f64, how: Derivative) -> (Complex64, Complex64) {
    let v = spec.value(x);
    let d = match how {
        Derivative::Exact => spec.derivative(x).expect("exact derivative available"),
        Derivative::Central(h) => (spec.value(x + h) - spec.value(x - h)) / (2.0 * h),
    };
    (v, d)
}

fn moments<S: Spectrum + ?Sized>(spec: &S, span: f64, rule: &Rule, how: Derivative) -> Moments {
    let w = spec.panel();
    let panels = (span / w).round() as i64;
    let parts: Vec<Moments> = (-panels..panels)
        .into_par_iter()
        .map(|p| {
            let mut m = Moments::default();
            for (x, wt) in rule.mapped(p as f64 * w, (p + 1) as f64 * w) {
                let (v, d) = sample(spec, x, how);
                let a = v.norm_sqr();
                m.m0 += wt * a;
                m.m1 += wt * x * a;
                m.m2 += wt * x * x * a;
                m.d2 += wt * d.norm_sqr();
                m.cross += d * v.conj() * wt;
                m.peak = m.peak.max(v.norm());
            }
            m
        })
        .collect();
    let mut total = Moments::default();
    for p in &parts {
        total.add(p);
    }
    total.edge = parts.first().map_or(0.0, |m| m.peak).max(parts.last().map_or(0.0, |m| m.peak));
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceVerdict {
    Finite,
    InfiniteVariance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UchReport {
    pub span: f64,
    pub norm: f64,
    pub time_centre: f64,
    pub time_var: f64,
    pub freq_centre: f64,
    pub freq_var: f64,
    pub uc_h: f64,
    pub verdict: VarianceVerdict,
    /// Exponent `p` in `int_{|xi| < X} xi^2 |f|^2 ~ X^p`, from spans `X` and `2X`.
    pub growth_exponent: Option<f64>,
    pub quadrature_error: f64,
    pub span_tail: f64,
    pub derivative_disagreement: f64,
    pub error_budget: f64,
    pub frequency_convention: String,
}

impl UchReport {
    pub fn is_finite(&self) -> bool {
        self.verdict == VarianceVerdict::Finite
    }
}

/// `UC_H = Delta(f) Delta(f^)`, with time moments from `||f^'||^2 / 4 pi^2`.
pub fn uc_heisenberg<S: Spectrum + ?Sized>(spec: &S, span: f64) -> Result<UchReport> {
    let w = spec.panel();
    if !(span >= w && span.is_finite()) {
        return Err(Error::InvalidArgument(format!("span {span} is shorter than one panel ({w})")));
    }
    let exact = spec.derivative(0.0).is_some();
    let h = 1e-4 * w;
    let primary = if exact { Derivative::Exact } else { Derivative::Central(h) };
    let fine = moments(spec, span, gl16(), primary);
    if fine.m0 <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    let ratio = fine.edge / fine.peak;
    if ratio > DECAY_RATIO {
        let wide = moments(spec, 2.0 * span, gl16(), primary);
        let growth = wide.m2 / fine.m2;
        // |f^| ~ |xi|^{-p} with p <= 3/2 makes the second moment diverge
        let decay = (fine.edge / wide.edge).log2();
        if growth > 1.0 + GROWTH_TOL && decay <= MAX_DIVERGENT_DECAY {
            let (tc, tv, fc, _) = fine.stats();
            return Ok(UchReport {
                span,
                norm: fine.m0,
                time_centre: tc,
                time_var: tv,
                freq_centre: fc,
                freq_var: f64::INFINITY,
                uc_h: f64::INFINITY,
                verdict: VarianceVerdict::InfiniteVariance,
                growth_exponent: Some(growth.log2()),
                quadrature_error: 0.0,
                span_tail: f64::INFINITY,
                derivative_disagreement: 0.0,
                error_budget: f64::INFINITY,
                frequency_convention: FREQUENCY_CONVENTION.into(),
            });
        }
        return Err(Error::InsufficientDecay { ratio });
    }
    let coarse = moments(spec, span, gl8(), primary);
    let check = if exact { Derivative::Central(h) } else { Derivative::Central(h / 2.0) };
    let alt = moments(spec, span, gl16(), check);
    let uc = fine.uc();
    let (tc, tv, fc, fv) = fine.stats();
    let quadrature_error = (coarse.uc() - uc).abs();
    let derivative_disagreement = (alt.uc() - uc).abs();
    // one panel of edge-sized mass with the largest weights on the span
    let tail_mass = 2.0 * w * fine.edge * fine.edge / fine.m0;
    let span_tail = uc * tail_mass * (1.0 + span * span / (fine.m2 / fine.m0).max(f64::MIN_POSITIVE));
    Ok(UchReport {
        span,
        norm: fine.m0,
        time_centre: tc,
        time_var: tv,
        freq_centre: fc,
        freq_var: fv,
        uc_h: uc,
        verdict: VarianceVerdict::Finite,
        growth_exponent: None,
        quadrature_error,
        span_tail,
        derivative_disagreement,
        error_budget: quadrature_error + span_tail + derivative_disagreement,
        frequency_convention: FREQUENCY_CONVENTION.into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UcbReport {
    pub norm: f64,
    pub tau: Complex64,
    pub var_a: f64,
    pub var_f: f64,
    pub uc_b: f64,
    pub tail: f64,
    /// `|tau|` at or below this is treated as zero.
    pub tau_budget: f64,
    pub degenerate: bool,
}

/// Breitenberger constant from `c_k`, `|k| <= N`.
pub fn uc_breitenberger(series: &CoefficientSeries) -> Result<UcbReport> {
    let norm: f64 = series.coeffs().iter().map(|c| c.norm_sqr()).sum();
    if norm <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    let mut nonzero = series.iter().filter(|(_, c)| c.norm_sqr() > 0.0);
    if let (Some((k, _)), None) = (nonzero.next(), nonzero.next()) {
        return Err(Error::SingleHarmonic(k));
    }
    let c = series.coeffs();
    let tau: Complex64 = c.windows(2).map(|w| w[0] * w[1].conj()).sum();
    let (mut s1, mut s2) = (0.0, 0.0);
    for (k, v) in series.iter() {
        let a = v.norm_sqr();
        s1 += k as f64 * a;
        s2 += (k * k) as f64 * a;
    }
    let mean = s1 / norm;
    let var_f = (s2 / norm - mean * mean).max(0.0);
    let tail = series.tail();
    let tau_budget = 2.0 * (norm * tail).sqrt() + 1e-15 * norm;
    let degenerate = tau.norm() <= tau_budget;
    let var_a = if degenerate {
        f64::INFINITY
    } else {
        norm * norm / tau.norm_sqr() - 1.0
    };
    let uc_b = if degenerate { f64::INFINITY } else { (var_a * var_f).sqrt() };
    Ok(UcbReport { norm, tau, var_a, var_f, uc_b, tail, tau_budget, degenerate })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UcPair {
    pub level: u32,
    pub uc_b: UcbReport,
    pub uc_h: UchReport,
    /// Heisenberg constant of the auxiliary wavelet, a dilation cross-check.
    pub uc_h_auxiliary: UchReport,
    pub gap: Option<f64>,
    /// `UC_H >= 3/2 - budget`, when `UC_H` is finite.
    pub battle_floor: Option<bool>,
    pub flags: Vec<String>,
}

/// `UC_B(psi^P_j)` with cutoff `n` against `UC_H(psi^N_j)` on `|xi| <= span 2^j`.
pub fn uc_pair_for_level(family: &LiftedFamily, j: u32, n: usize, span: f64, tol: f64) -> Result<UcPair> {
    let periodic = build_periodic_level(family.table(), j, n, tol)?;
    let uc_b = uc_breitenberger(&periodic.psi)?;
    let xi_span = span * pow2(j as i32);
    let uc_h = uc_heisenberg(&LevelWavelet::nonstationary(family, j, xi_span, tol)?, xi_span)?;
    let uc_h_auxiliary = uc_heisenberg(&LevelWavelet::auxiliary(family, j, span, tol)?, span)?;
    let mut flags = Vec::new();
    if uc_b.degenerate {
        flags.push("VARA_INF".to_string());
    }
    if !uc_h.is_finite() {
        flags.push("UCH_INF".to_string());
    }
    let gap = (!uc_b.degenerate && uc_h.is_finite()).then(|| (uc_b.uc_b - uc_h.uc_h).abs());
    let battle_floor = uc_h.is_finite().then_some(uc_h.uc_h >= 1.5 - uc_h.error_budget);
    if battle_floor == Some(false) {
        flags.push("BATTLE_FLOOR".to_string());
    }
    Ok(UcPair { level: j, uc_b, uc_h, uc_h_auxiliary, gap, battle_floor, flags })
}

/// `psi^N_j(0)`, zero for every lift since `m_{j+1}(1/2) = 0`.
pub fn wavelet_mean(family: &LiftedFamily, j: u32) -> f64 {
    SQRT_2 * family.value(j + 1, 0.5)
}
