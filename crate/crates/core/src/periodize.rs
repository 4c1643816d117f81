//! Truncated Fourier series and the periodization map (sampling a real-line
//! spectrum at the integers).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{build_nonstationary_level, build_periodic_level, level_scale, NonstationaryFrameLevel};
use crate::mask::{KnotValues, PeriodicMaskTable};
use crate::product::{product_bounds, LiftedFamily, MaskFamily, MAX_DEPTH};

/// Coefficients `c_k`, `|k| <= N`, with a declared estimate of the energy
/// beyond the cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "SeriesFile", try_from = "SeriesFile")]
pub struct CoefficientSeries {
    n: usize,
    coeffs: Vec<Complex64>,
    tail: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SeriesFile {
    #[serde(rename = "N")]
    n: usize,
    re: Vec<f64>,
    im: Vec<f64>,
    tail: f64,
}

impl From<CoefficientSeries> for SeriesFile {
    fn from(s: CoefficientSeries) -> Self {
        SeriesFile {
            n: s.n,
            re: s.coeffs.iter().map(|c| c.re).collect(),
            im: s.coeffs.iter().map(|c| c.im).collect(),
            tail: s.tail,
        }
    }
}

impl TryFrom<SeriesFile> for CoefficientSeries {
    type Error = Error;

    fn try_from(f: SeriesFile) -> Result<Self> {
        if f.re.len() != f.im.len() {
            return Err(Error::InvalidArgument("re and im arrays differ in length".into()));
        }
        let coeffs = f.re.into_iter().zip(f.im).map(|(a, b)| Complex64::new(a, b)).collect();
        CoefficientSeries::new(f.n, coeffs, f.tail)
    }
}

impl CoefficientSeries {
    pub fn new(n: usize, coeffs: Vec<Complex64>, tail: f64) -> Result<Self> {
        if coeffs.len() != 2 * n + 1 {
            return Err(Error::InvalidArgument(format!(
                "cutoff {n} needs {} coefficients, got {}",
                2 * n + 1,
                coeffs.len()
            )));
        }
        if !(tail >= 0.0) {
            return Err(Error::InvalidArgument(format!("tail must be nonnegative, got {tail}")));
        }
        Ok(Self { n, coeffs, tail })
    }

    /// Series whose coefficients start at index `first`; the cutoff is
    /// chosen symmetric around 0 and missing entries are zero.
    pub fn from_slice(first: i64, values: &[Complex64]) -> Self {
        let last = first + values.len() as i64 - 1;
        let n = first.abs().max(last.abs()) as usize;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * n + 1];
        for (i, v) in values.iter().enumerate() {
            coeffs[(first + i as i64 + n as i64) as usize] = *v;
        }
        Self { n, coeffs, tail: 0.0 }
    }

    pub fn cutoff(&self) -> usize {
        self.n
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn get(&self, k: i64) -> Complex64 {
        let i = k + self.n as i64;
        if i < 0 || i as usize >= self.coeffs.len() {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[i as usize]
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let n = self.n as i64;
        self.coeffs.iter().enumerate().map(move |(i, c)| (i as i64 - n, *c))
    }

    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() + self.tail
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Samples at `xi = k`, `|k| <= n`, from a uniform grid.
pub fn periodize(xi: &[f64], values: &[Complex64], n: usize, tail: f64) -> Result<CoefficientSeries> {
    if xi.len() != values.len() {
        return Err(Error::InvalidArgument("grid and values differ in length".into()));
    }
    let n_i = n as i64;
    if xi.len() < 2 {
        return match xi.first() {
            Some(&x) if n == 0 && x == 0.0 => CoefficientSeries::new(0, vec![values[0]], tail),
            _ => Err(Error::SpanTooSmall { k: n_i }),
        };
    }
    let step = xi[1] - xi[0];
    let coeffs = (-n_i..=n_i)
        .map(|k| {
            let pos = (k as f64 - xi[0]) / step;
            let idx = pos.round();
            if idx < 0.0 || idx as usize >= xi.len() || xi[idx as usize] != k as f64 {
                Err(Error::SpanTooSmall { k })
            } else {
                Ok(values[idx as usize])
            }
        })
        .collect::<Result<Vec<_>>>()?;
    CoefficientSeries::new(n, coeffs, tail)
}

/// `sum_{n < |k| <= 8n + 8} (2^{-j/2} b^{level}_k)^2`, the b-bound estimate of the
/// energy beyond cutoff `n` of a spectrum dominated by `2^{-j/2} b^{level}`.
pub fn tail_estimate<N: KnotValues + ?Sized>(src: &N, j: u32, level: u32, n: usize) -> Result<f64> {
    let n = n as i64;
    let far = 8 * n + 8;
    let pos = product_bounds(src, level, n + 1, far, 1e-12)?;
    let neg = product_bounds(src, level, -far, -n - 1, 1e-12)?;
    let s = level_scale(j);
    Ok(pos
        .upper
        .iter()
        .chain(&neg.upper)
        .map(|b| (s * b).powi(2))
        .sum())
}

pub fn periodize_wavelet<N: KnotValues + ?Sized>(
    level: &NonstationaryFrameLevel,
    src: &N,
    n: usize,
) -> Result<CoefficientSeries> {
    let tail = tail_estimate(src, level.level, level.level + 1, n)?;
    periodize(&level.xi, &level.psi, n, tail)
}

pub fn periodize_scaling<N: KnotValues + ?Sized>(
    level: &NonstationaryFrameLevel,
    src: &N,
    n: usize,
) -> Result<CoefficientSeries> {
    let tail = tail_estimate(src, level.level, level.level, n)?;
    let values: Vec<Complex64> = level.phi.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    periodize(&level.xi, &values, n, tail)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTripReport {
    pub level: u32,
    #[serde(rename = "N")]
    pub n: usize,
    pub tol: f64,
    pub max_discrepancy: f64,
    pub max_scaling_discrepancy: f64,
    pub max_wavelet_discrepancy: f64,
    pub worst_k: i64,
    /// Allowance from truncating both products at tolerance `tol`.
    pub truncation_part: f64,
    /// Largest `|m_L(k 2^-L) - nu^L_k|` over the levels and frequencies used,
    /// including the tail levels above the table.
    pub sampling_part: f64,
    /// `sum_{|k| <= 8N+8} 2^{-j/2} b^j_k`, the integrability proxy for the
    /// scaling function.
    pub bound_sum: f64,
    /// The share of `bound_sum` from `|k| > 4N`.
    pub bound_sum_outer: f64,
    pub tail_extension: String,
}

/// Compares the periodization of the lifted level with the periodic build.
pub fn roundtrip_check(family: &LiftedFamily, j: u32, n: usize, g: u32, tol: f64) -> Result<RoundTripReport> {
    let table: &PeriodicMaskTable = family.table();
    let periodic = build_periodic_level(table, j, n, tol)?;
    let lifted = build_nonstationary_level(family, j, n as f64, g, tol)?;
    let phi = periodize_scaling(&lifted, table, n)?;
    let psi = periodize_wavelet(&lifted, table, n)?;
    let mut report = RoundTripReport {
        level: j,
        n,
        tol,
        max_discrepancy: 0.0,
        max_scaling_discrepancy: 0.0,
        max_wavelet_discrepancy: 0.0,
        worst_k: 0,
        truncation_part: 2.0 * tol * level_scale(j),
        sampling_part: 0.0,
        bound_sum: 0.0,
        bound_sum_outer: 0.0,
        tail_extension: "stationary".into(),
    };
    let far = 8 * n as i64 + 8;
    let bounds = product_bounds(table, j, -far, far, 1e-12)?;
    for (k, b) in (-far..=far).zip(&bounds.upper) {
        let b = level_scale(j) * b;
        report.bound_sum += b;
        if k.unsigned_abs() as usize > 4 * n {
            report.bound_sum_outer += b;
        }
    }
    for k in -(n as i64)..=n as i64 {
        let dp = (phi.get(k) - periodic.phi.get(k)).norm();
        let dw = (psi.get(k) - periodic.psi.get(k)).norm();
        report.max_scaling_discrepancy = report.max_scaling_discrepancy.max(dp);
        report.max_wavelet_discrepancy = report.max_wavelet_discrepancy.max(dw);
        if dp.max(dw) > report.max_discrepancy {
            report.max_discrepancy = dp.max(dw);
            report.worst_k = k;
        }
    }
    let top = j + 1 + MAX_DEPTH as u32;
    for l in j + 1..=top {
        let scale = crate::mask::pow2(-(l as i32));
        for k in -(n as i64)..=n as i64 {
            let d = (family.value(l, k as f64 * scale) - table.nu(l, k)).abs();
            report.sampling_part = report.sampling_part.max(d);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::step_mask_lift;
    use crate::mask::Family;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn sinc_periodizes_to_delta() {
        let xi: Vec<f64> = (-32..=32).map(|n| n as f64 / 4.0).collect();
        let v: Vec<Complex64> = xi
            .iter()
            .map(|&x| Complex64::new(if x == 0.0 { 1.0 } else { (PI * x).sin() / (PI * x) }, 0.0))
            .collect();
        let s = periodize(&xi, &v, 8, 0.0).unwrap();
        for (k, c) in s.iter() {
            assert_abs_diff_eq!(c.re, if k == 0 { 1.0 } else { 0.0 }, epsilon = 1e-15);
        }
        assert!(matches!(periodize(&xi, &v, 9, 0.0), Err(Error::SpanTooSmall { k: -9 })));
    }

    #[test]
    fn json_shape() {
        let s = CoefficientSeries::new(1, vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(2.0, -1.0)], 0.5).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s.to_json_string().unwrap()).unwrap();
        assert_eq!(v["N"], 1);
        assert_eq!(v["re"], serde_json::json!([1.0, 0.0, 2.0]));
        assert_eq!(v["im"], serde_json::json!([0.0, 1.0, -1.0]));
        assert_eq!(v["tail"], 0.5);
        let back: CoefficientSeries = serde_json::from_value(v).unwrap();
        assert_eq!(back, s);
        assert!(CoefficientSeries::new(1, vec![Complex64::new(0.0, 0.0)], 0.0).is_err());
        assert!(CoefficientSeries::new(0, vec![Complex64::new(0.0, 0.0)], -1.0).is_err());
    }

    #[test]
    fn step_lift_round_trip_is_bitwise() {
        for fam in [Family::HaarCos, Family::MeyerSmooth { transition: 1.0 / 3.0 }] {
            let t = fam.table(2, 10).unwrap();
            for j in 2..=6 {
                let p = build_periodic_level(&t, j, 16, 1e-12).unwrap();
                let s = step_mask_lift(&t, j, 16.0, 2, 1e-12).unwrap();
                let phi = periodize_scaling(&s, &t, 16).unwrap();
                let psi = periodize_wavelet(&s, &t, 16).unwrap();
                for k in -16..=16 {
                    assert_eq!(phi.get(k).re.to_bits(), p.phi.get(k).re.to_bits());
                    assert_eq!(psi.get(k).re.to_bits(), p.psi.get(k).re.to_bits());
                    assert_eq!(psi.get(k).im.to_bits(), p.psi.get(k).im.to_bits());
                }
            }
        }
    }

    #[test]
    fn haar_lift_round_trip() {
        let t = Family::HaarCos.table(2, 10).unwrap();
        let f = LiftedFamily::new(&t, 1).unwrap();
        let r = roundtrip_check(&f, 2, 8, 1, 1e-12).unwrap();
        assert!(r.max_discrepancy <= 1e-10, "{r:?}");
        assert!(r.sampling_part <= 1e-13);
        let p = build_periodic_level(&t, 2, 8, 1e-12).unwrap();
        assert_abs_diff_eq!(p.phi.get(0).re, 0.5, epsilon = 0.0);
        assert_eq!(p.phi.get(4).re, 0.0);
    }

    #[test]
    fn bound_sums_separate_smooth_from_haar() {
        let haar = Family::HaarCos.table(2, 10).unwrap();
        let meyer = Family::MeyerSmooth { transition: 1.0 / 3.0 }.table(2, 10).unwrap();
        let h = roundtrip_check(&LiftedFamily::new(&haar, 1).unwrap(), 3, 16, 1, 1e-12).unwrap();
        let m = roundtrip_check(&LiftedFamily::new(&meyer, 1).unwrap(), 3, 16, 1, 1e-12).unwrap();
        assert!(h.bound_sum_outer > 0.1 * h.bound_sum);
        assert!(m.bound_sum_outer < 1e-3 * m.bound_sum);
    }

    proptest! {
        #[test]
        fn periodization_is_linear(
            a in -3.0f64..3.0, b in -3.0f64..3.0,
            xs in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 33),
            ys in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 33),
        ) {
            let xi: Vec<f64> = (-16..=16).map(|n| n as f64 / 2.0).collect();
            let fa: Vec<Complex64> = xs.iter().map(|&(r, i)| Complex64::new(r, i)).collect();
            let fb: Vec<Complex64> = ys.iter().map(|&(r, i)| Complex64::new(r, i)).collect();
            let comb: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| x * a + y * b).collect();
            let pa = periodize(&xi, &fa, 8, 0.0).unwrap();
            let pb = periodize(&xi, &fb, 8, 0.0).unwrap();
            let pc = periodize(&xi, &comb, 8, 0.0).unwrap();
            for k in -8..=8 {
                prop_assert_eq!(pc.get(k), pa.get(k) * a + pb.get(k) * b);
            }
        }
    }
}
