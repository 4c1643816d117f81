//! Periodic frame coefficients and the nonstationary frame on the real line.

use std::f64::consts::{SQRT_2, TAU};
use std::ops::RangeInclusive;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{pow2, KnotValues, PeriodicMaskTable};
use crate::periodize::{tail_estimate, CoefficientSeries};
use crate::product::{eval_scaling_spectrum, grid_extent, minimal_depth, LiftedFamily, MaskFamily, MAX_DEPTH};

/// `e^{2 pi i eta}`, exact at quarter turns.
pub fn unit_phase(eta: f64) -> Complex64 {
    let r = eta - eta.round();
    let q = 4.0 * r;
    if q == q.round() {
        match q as i64 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            -1 => Complex64::new(0.0, -1.0),
            _ => Complex64::new(-1.0, 0.0),
        }
    } else {
        Complex64::from_polar(1.0, TAU * r)
    }
}

/// `2^{-j/2}`.
pub fn level_scale(j: u32) -> f64 {
    pow2(-(j as i32)).sqrt()
}

/// `lambda * phi` with `lambda = e^{2 pi i eta} sqrt2 nu`.
fn wavelet_value(eta: f64, nu_shift: f64, phi_next: f64) -> Complex64 {
    unit_phase(eta) * (SQRT_2 * nu_shift * phi_next)
}

/// `2^{-j/2} prod_{r >= 1} nu^{j+r}_k`, truncated at the smallest depth whose
/// dropped factors stay within `tol` of 1. Returns the value and the depth.
pub fn periodic_scaling_coefficient<N: KnotValues + ?Sized>(src: &N, j: u32, k: i64, tol: f64) -> Result<(f64, usize)> {
    let f: Vec<f64> = (1..=MAX_DEPTH as u32).map(|r| src.nu(j + r, k)).collect();
    let (depth, _) = minimal_depth(&f, tol).ok_or(Error::TruncationUnreachable {
        tail: 1.0 - f[MAX_DEPTH - 1],
        tol,
        depth: MAX_DEPTH,
    })?;
    let p: f64 = f[..depth].iter().product();
    Ok((level_scale(j) * p, depth))
}

/// `lambda^{j+1}_k = e^{2 pi i k / 2^{j+1}} sqrt2 nu^{j+1}_{k + 2^j}`.
pub fn wavelet_multiplier<N: KnotValues + ?Sized>(src: &N, j: u32, k: i64) -> Complex64 {
    unit_phase(k as f64 * pow2(-(j as i32 + 1))) * (SQRT_2 * src.nu(j + 1, k + (1i64 << j)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicFrameLevel {
    pub j: u32,
    #[serde(rename = "N")]
    pub n: usize,
    pub tol: f64,
    pub depth: usize,
    pub tail_extension: String,
    pub phi: CoefficientSeries,
    pub psi: CoefficientSeries,
}

impl PeriodicFrameLevel {
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn check_src<N: KnotValues + ?Sized>(src: &N, j: u32) -> Result<()> {
    if j < src.first_level() {
        return Err(Error::LevelUnavailable { level: j, j_min: src.first_level(), j_max: u32::MAX });
    }
    Ok(())
}

pub fn build_periodic_level<N: KnotValues + ?Sized>(src: &N, j: u32, n: usize, tol: f64) -> Result<PeriodicFrameLevel> {
    check_src(src, j)?;
    let ni = n as i64;
    let rows: Vec<(f64, usize, f64, usize)> = (-ni..=ni)
        .into_par_iter()
        .map(|k| {
            let (phi, d0) = periodic_scaling_coefficient(src, j, k, tol)?;
            let (next, d1) = periodic_scaling_coefficient(src, j + 1, k, tol)?;
            Ok((phi, d0, next, d1))
        })
        .collect::<Result<_>>()?;
    let mut depth = 0;
    let mut phi = Vec::with_capacity(rows.len());
    let mut psi = Vec::with_capacity(rows.len());
    for (i, (p, d0, next, d1)) in rows.into_iter().enumerate() {
        let k = i as i64 - ni;
        depth = depth.max(d0).max(d1);
        phi.push(Complex64::new(p, 0.0));
        psi.push(wavelet_value(k as f64 * pow2(-(j as i32 + 1)), src.nu(j + 1, k + (1i64 << j)), next));
    }
    Ok(PeriodicFrameLevel {
        j,
        n,
        tol,
        depth,
        tail_extension: "stationary".into(),
        phi: CoefficientSeries::new(n, phi, tail_estimate(src, j, j, n)?)?,
        psi: CoefficientSeries::new(n, psi, tail_estimate(src, j, j + 1, n)?)?,
    })
}

/// One level of the frame on the real line, sampled at `xi = n 2^{-g}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonstationaryFrameLevel {
    pub level: u32,
    pub resolution: u32,
    pub span: f64,
    pub tol: f64,
    pub depth: usize,
    pub tail_extension: String,
    pub xi: Vec<f64>,
    pub phi: Vec<f64>,
    pub psi: Vec<Complex64>,
}

impl NonstationaryFrameLevel {
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn step(&self) -> f64 {
        pow2(-(self.resolution as i32))
    }

    /// `sum |phi|^2 * step` over `[-s, s)`.
    pub fn scaling_energy(&self, s: f64) -> f64 {
        self.xi
            .iter()
            .zip(&self.phi)
            .filter(|(x, _)| **x >= -s && **x < s)
            .map(|(_, v)| v * v)
            .sum::<f64>()
            * self.step()
    }
}

/// `phi^N_j(xi) = 2^{-j/2} phi_j(xi / 2^j)` and
/// `psi^N_j(xi) = e^{2 pi i eta} sqrt2 m_{j+1}(eta + 1/2) 2^{-(j+1)/2} phi_{j+1}(eta)`,
/// `eta = xi / 2^{j+1}`, on `|xi| <= span`.
pub fn build_nonstationary_level<F: MaskFamily + ?Sized>(
    family: &F,
    j: u32,
    span: f64,
    g: u32,
    tol: f64,
) -> Result<NonstationaryFrameLevel> {
    let here = eval_scaling_spectrum(family, j, span * pow2(-(j as i32)), g, tol)?;
    let next = eval_scaling_spectrum(family, j + 1, span * pow2(-(j as i32 + 1)), g, tol)?;
    debug_assert_eq!(here.len(), next.len());
    let step = pow2(-(g as i32));
    let n_max = (here.len() / 2) as i64;
    let (s0, s1) = (level_scale(j), level_scale(j + 1));
    let psi = (0..here.len())
        .into_par_iter()
        .map(|i| {
            let eta = (i as i64 - n_max) as f64 * step * pow2(-(j as i32 + 1));
            wavelet_value(eta, family.value(j + 1, eta + 0.5), s1 * next.value[i])
        })
        .collect();
    Ok(NonstationaryFrameLevel {
        level: j,
        resolution: g,
        span,
        tol,
        depth: here.depth.max(next.depth),
        tail_extension: "stationary".into(),
        xi: (-n_max..=n_max).map(|n| n as f64 * step).collect(),
        phi: here.value.iter().map(|v| s0 * v).collect(),
        psi,
    })
}

/// The lift with piecewise-constant masks `m_j(xi) = nu^j_{floor(xi 2^j)}`,
/// whose spectra are constant on `[k, k + 1)`.
pub fn step_mask_lift(table: &PeriodicMaskTable, j: u32, span: f64, g: u32, tol: f64) -> Result<NonstationaryFrameLevel> {
    check_src(table, j)?;
    let n_max = grid_extent(0, span, g)?;
    let per = 1i64 << g;
    let k_lo = (-n_max).div_euclid(per);
    let k_hi = n_max.div_euclid(per);
    let coeffs: Vec<(f64, f64, f64, usize)> = (k_lo..=k_hi)
        .into_par_iter()
        .map(|k| {
            let (phi, d0) = periodic_scaling_coefficient(table, j, k, tol)?;
            let (next, d1) = periodic_scaling_coefficient(table, j + 1, k, tol)?;
            Ok((phi, next, table.nu(j + 1, k + (1i64 << j)), d0.max(d1)))
        })
        .collect::<Result<_>>()?;
    let step = pow2(-(g as i32));
    let mut out = NonstationaryFrameLevel {
        level: j,
        resolution: g,
        span,
        tol,
        depth: coeffs.iter().map(|c| c.3).max().unwrap_or(0),
        tail_extension: "stationary".into(),
        xi: Vec::new(),
        phi: Vec::new(),
        psi: Vec::new(),
    };
    for n in -n_max..=n_max {
        let xi = n as f64 * step;
        let (phi, next, nu_shift, _) = coeffs[(n.div_euclid(per) - k_lo) as usize];
        out.xi.push(xi);
        out.phi.push(phi);
        out.psi.push(wavelet_value(xi * pow2(-(j as i32 + 1)), nu_shift, next));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyCheck {
    pub window: f64,
    pub grid_energy: f64,
    pub series_energy: f64,
    pub residual: f64,
}

/// For a step lift, `int_{-s}^{s} |phi^N|^2 = sum_{k=-s}^{s-1} |c_k|^2`.
pub fn step_energy_identity(lift: &NonstationaryFrameLevel, series: &CoefficientSeries, s: usize) -> Result<EnergyCheck> {
    if s as f64 > lift.span || s > series.cutoff() + 1 {
        return Err(Error::SpanTooSmall { k: s as i64 });
    }
    let si = s as i64;
    let grid_energy = lift.scaling_energy(s as f64);
    let series_energy: f64 = (-si..si).map(|k| series.get(k).norm_sqr()).sum();
    Ok(EnergyCheck {
        window: s as f64,
        grid_energy,
        series_energy,
        residual: (grid_energy - series_energy).abs(),
    })
}

/// Values of `2^{j/2} phi_j` at one point over the levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendProbe {
    pub point: f64,
    pub values: Vec<(u32, f64)>,
    /// `|1 - value|` never increases and ends below where it started, or is 0 throughout.
    pub approaches_one: bool,
}

impl TrendProbe {
    fn new(point: f64, values: Vec<(u32, f64)>) -> Self {
        let d: Vec<f64> = values.iter().map(|(_, v)| (1.0 - v).abs()).collect();
        let monotone = d.windows(2).all(|w| w[1] <= w[0] + 1e-14);
        let approaches_one = monotone && (d.iter().all(|&x| x <= 1e-14) || d.last() < d.first());
        Self { point, values, approaches_one }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UepReport {
    pub levels: (u32, u32),
    #[serde(rename = "N")]
    pub n: usize,
    pub tol: f64,
    /// `max |mu_k|^2 + |mu_{k+half}|^2 - 2` over the table.
    pub con2: f64,
    /// `max |phi^P_j(k) - mu^{j+1}_k phi^P_{j+1}(k)|`.
    pub con3: f64,
    /// `max |psi^P_j(k) - lambda^{j+1}_k phi^P_{j+1}(k)|`, phase from polar form.
    pub con4: f64,
    pub con1: Vec<TrendProbe>,
    /// Mask quadrature on the real line.
    pub ncon2: f64,
    pub ncon3: f64,
    pub ncon4: f64,
    pub ncon1: Vec<TrendProbe>,
    /// `max ||m_1(xi)|^2 + |m_1(xi + 1/2)|^2 - 2|` for the wavelet masks.
    pub wavelet_quadrature: f64,
    pub phase_convention: String,
    pub tail_extension: String,
}

/// Checks the refinement and partition identities on levels `levels` (the
/// relations reach one level above the last).
pub fn check_uep_conditions(
    family: &LiftedFamily,
    levels: RangeInclusive<u32>,
    n: usize,
    span: f64,
    g: u32,
    tol: f64,
) -> Result<UepReport> {
    let table = family.table();
    let (lo, hi) = (*levels.start(), *levels.end());
    if lo < table.j_min() || hi < lo {
        return Err(Error::LevelUnavailable { level: lo, j_min: table.j_min(), j_max: table.j_max() });
    }
    let mut con2: f64 = 0.0;
    for j in table.j_min()..=table.j_max() {
        let len = 1i64 << j;
        for k in 0..len / 2 {
            let s = 2.0 * (table.nu_at(j, k).powi(2) + table.nu_at(j, k + len / 2).powi(2));
            con2 = con2.max((s - 2.0).abs());
        }
    }

    let periodic: Vec<PeriodicFrameLevel> =
        (lo..=hi + 1).map(|j| build_periodic_level(table, j, n, tol)).collect::<Result<_>>()?;
    let (mut con3, mut con4): (f64, f64) = (0.0, 0.0);
    for w in periodic.windows(2) {
        let (p, q) = (&w[0], &w[1]);
        let j = p.j;
        for k in -(n as i64)..=n as i64 {
            let next = q.phi.get(k);
            let mu = SQRT_2 * table.nu(j + 1, k);
            con3 = con3.max((p.phi.get(k) - next * mu).norm());
            let lambda = Complex64::from_polar(SQRT_2 * table.nu(j + 1, k + (1i64 << j)), TAU * k as f64 / pow2(j as i32 + 1));
            con4 = con4.max((p.psi.get(k) - lambda * next).norm());
        }
    }
    let con1 = [0i64, 1, 2]
        .iter()
        .map(|&k| {
            TrendProbe::new(
                k as f64,
                periodic.iter().map(|p| (p.j, p.phi.get(k).re / level_scale(p.j))).collect(),
            )
        })
        .collect();

    let lifted: Vec<NonstationaryFrameLevel> =
        (lo..=hi + 1).map(|j| build_nonstationary_level(family, j, span, g, tol)).collect::<Result<_>>()?;
    let (mut ncon3, mut ncon4): (f64, f64) = (0.0, 0.0);
    for w in lifted.windows(2) {
        let (p, q) = (&w[0], &w[1]);
        let j = p.level;
        for i in 0..p.xi.len() {
            let eta = p.xi[i] * pow2(-(j as i32 + 1));
            let m0 = SQRT_2 * family.value(j + 1, eta);
            let m1 = unit_phase(eta) * (SQRT_2 * family.value(j + 1, eta + 0.5));
            ncon3 = ncon3.max((p.phi[i] - m0 * q.phi[i]).abs());
            ncon4 = ncon4.max((p.psi[i] - m1 * q.phi[i]).norm());
        }
    }
    let (mut ncon2, mut wq): (f64, f64) = (0.0, 0.0);
    let samples = 4096;
    for j in lo + 1..=hi + 1 {
        for s in 0..samples {
            let x = s as f64 / samples as f64;
            let (a, b) = (family.value(j, x), family.value(j, x + 0.5));
            ncon2 = ncon2.max((2.0 * (a * a + b * b) - 2.0).abs());
            let m1a = unit_phase(x) * (SQRT_2 * b);
            let m1b = unit_phase(x + 0.5) * (SQRT_2 * family.value(j, x + 1.0));
            wq = wq.max((m1a.norm_sqr() + m1b.norm_sqr() - 2.0).abs());
        }
    }
    let ncon1 = [1.0, 2.0]
        .iter()
        .filter(|&&x| x <= span)
        .map(|&x| {
            let i = lifted[0].xi.iter().position(|&v| v == x).expect("probe on grid");
            TrendProbe::new(x, lifted.iter().map(|l| (l.level, l.phi[i] / level_scale(l.level))).collect())
        })
        .collect();

    Ok(UepReport {
        levels: (lo, hi),
        n,
        tol,
        con2,
        con3,
        con4,
        con1,
        ncon2,
        ncon3,
        ncon4,
        ncon1,
        wavelet_quadrature: wq,
        phase_convention: "lambda^{j+1}_k = exp(2 pi i k / 2^{j+1}) sqrt2 nu^{j+1}_{k + 2^j}".into(),
        tail_extension: "stationary".into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitResidual {
    pub fine: f64,
    pub coarse: f64,
    pub wavelet: f64,
    pub relative: f64,
}

/// `<f, g(. - k / 2^j)>` for `k = 0..2^j`, from Fourier coefficients.
fn translate_products(f: &CoefficientSeries, g: &CoefficientSeries, j: u32) -> Vec<Complex64> {
    let len = 1i64 << j;
    (0..len)
        .into_par_iter()
        .map(|k| {
            f.iter()
                .map(|(n, c)| c * g.get(n).conj() * unit_phase((n * k).rem_euclid(len) as f64 / len as f64))
                .sum()
        })
        .collect()
}

/// `sum |<f, phi_{j+1,k}>|^2` against `sum |<f, phi_{j,k}>|^2 + sum |<f, psi_{j,k}>|^2`.
pub fn parseval_split<N: KnotValues + ?Sized>(src: &N, j: u32, f: &CoefficientSeries, tol: f64) -> Result<SplitResidual> {
    let n = f.cutoff();
    let here = build_periodic_level(src, j, n, tol)?;
    let next = build_periodic_level(src, j + 1, n, tol)?;
    let energy = |v: Vec<Complex64>| v.iter().map(|c| c.norm_sqr()).sum::<f64>();
    let fine = energy(translate_products(f, &next.phi, j + 1));
    let coarse = energy(translate_products(f, &here.phi, j));
    let wavelet = energy(translate_products(f, &here.psi, j));
    let scale = fine.max(f.energy()).max(f64::MIN_POSITIVE);
    Ok(SplitResidual { fine, coarse, wavelet, relative: (fine - coarse - wavelet).abs() / scale })
}
