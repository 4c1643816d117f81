//! Infinite products `phi_j(xi) = prod_{r>=1} m_{j+r}(xi / 2^r)` with
//! per-interval truncation control and the `a`/`b` sandwich bounds.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Jet2;
use crate::lift::{is_breakpoint, LiftedMask, Side};
use crate::mask::{pow2, KnotValues, PeriodicMaskTable};
use crate::quadrature::gl16;
use crate::spline::PhaseSpline;

/// Largest number of factors ever multiplied.
pub const MAX_DEPTH: usize = 64;

/// Level-indexed masks on the real line.
pub trait MaskFamily: KnotValues + Send {
    /// Last level with its own mask; higher levels reuse it.
    fn top_level(&self) -> u32;
    fn value(&self, level: u32, xi: f64) -> f64;
    /// Value and derivatives, one-sided at breakpoints.
    fn jet(&self, level: u32, xi: f64, side: Side) -> Jet2;
    /// Upper bound for `|m'_level|`.
    fn derivative_bound(&self, level: u32) -> f64;
}

/// Masks lifted from a table with phase splines of one order.
#[derive(Debug, Clone)]
pub struct LiftedFamily {
    table: PeriodicMaskTable,
    first: u32,
    order: u32,
    masks: Vec<LiftedMask>,
    bounds: Vec<f64>,
}

fn spline_slope_bound(s: &PhaseSpline) -> f64 {
    let sc = pow2(s.level() as i32);
    (0..s.pieces())
        .map(|i| {
            s.piece(i)
                .iter()
                .enumerate()
                .map(|(p, c)| p as f64 * c.abs())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
        * sc
}

impl LiftedFamily {
    pub fn new(table: &PeriodicMaskTable, order: u32) -> Result<Self> {
        let first = table.j_min().max(2);
        let masks = (first..=table.j_max())
            .into_par_iter()
            .map(|j| LiftedMask::fit(table, j, order))
            .collect::<Result<Vec<_>>>()?;
        let bounds = masks.iter().map(|m| spline_slope_bound(m.spline())).collect();
        Ok(Self {
            table: table.clone(),
            first,
            order,
            masks,
            bounds,
        })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn table(&self) -> &PeriodicMaskTable {
        &self.table
    }

    pub fn masks(&self) -> &[LiftedMask] {
        &self.masks
    }

    /// Mask used at `level`, reusing the top mask above the table.
    pub fn mask(&self, level: u32) -> &LiftedMask {
        let i = (level.min(self.table.j_max()) - self.first) as usize;
        &self.masks[i]
    }
}

impl KnotValues for LiftedFamily {
    fn first_level(&self) -> u32 {
        self.first
    }

    fn nu(&self, level: u32, k: i64) -> f64 {
        if level <= self.table.j_max() {
            self.table.nu_at(level, k)
        } else {
            self.mask(level).value(k as f64 * pow2(-(level as i32)))
        }
    }
}

impl MaskFamily for LiftedFamily {
    fn top_level(&self) -> u32 {
        self.table.j_max()
    }

    fn value(&self, level: u32, xi: f64) -> f64 {
        self.mask(level).value(xi)
    }

    fn jet(&self, level: u32, xi: f64, side: Side) -> Jet2 {
        self.mask(level).jet(xi, side)
    }

    fn derivative_bound(&self, level: u32) -> f64 {
        self.bounds[(level.min(self.table.j_max()) - self.first) as usize]
    }
}

fn check_level<N: KnotValues + ?Sized>(src: &N, j: u32) -> Result<()> {
    if j + 1 < src.first_level() {
        return Err(Error::LevelUnavailable {
            level: j + 1,
            j_min: src.first_level(),
            j_max: u32::MAX,
        });
    }
    Ok(())
}

/// `min` (or `max`) of the knot values bracketing interval `k` at levels
/// `j + 1 ..= j + MAX_DEPTH`.
fn interval_factors<N: KnotValues + ?Sized>(src: &N, j: u32, k: i64, upper: bool) -> Vec<f64> {
    (1..=MAX_DEPTH as u32)
        .map(|r| {
            let (a, b) = (src.nu(j + r, k), src.nu(j + r, k + 1));
            if upper {
                a.max(b)
            } else {
                a.min(b)
            }
        })
        .collect()
}

/// Smallest `R` with `1 - prod_{r > R} f_r <= tol`, and the achieved deficit.
/// `None` when even the last factor is too far from 1 to drop the remainder.
pub(crate) fn minimal_depth(f: &[f64], tol: f64) -> Option<(usize, f64)> {
    let n = f.len();
    if 1.0 - f[n - 1] > tol {
        return None;
    }
    let mut prod = 1.0;
    let mut r = n;
    while r > 0 {
        let next = prod * f[r - 1];
        if 1.0 - next > tol {
            break;
        }
        prod = next;
        r -= 1;
    }
    Some((r, 1.0 - prod))
}

/// Depth needed on intervals `k_lo..=k_hi` and the achieved deficit per interval.
pub fn truncation_depth<N: KnotValues + ?Sized>(
    src: &N,
    j: u32,
    k_lo: i64,
    k_hi: i64,
    tol: f64,
) -> Result<(usize, Vec<f64>)> {
    check_level(src, j)?;
    let per: Vec<std::result::Result<(usize, f64), f64>> = (k_lo..=k_hi)
        .into_par_iter()
        .map(|k| {
            let f = interval_factors(src, j, k, false);
            minimal_depth(&f, tol).ok_or(1.0 - f[MAX_DEPTH - 1])
        })
        .collect();
    let mut depth = 0;
    let mut deficits = Vec::with_capacity(per.len());
    for p in per {
        match p {
            Ok((r, d)) => {
                depth = depth.max(r);
                deficits.push(d);
            }
            Err(tail) => {
                return Err(Error::TruncationUnreachable { tail, tol, depth: MAX_DEPTH });
            }
        }
    }
    Ok((depth, deficits))
}

/// Like [`truncation_depth`], but each knot minimum is lowered by the slope
/// bound times half the interval width, since lifted masks of order >= 2 may
/// dip between knots.
pub fn mask_truncation_depth<F: MaskFamily + ?Sized>(
    family: &F,
    j: u32,
    k_lo: i64,
    k_hi: i64,
    tol: f64,
) -> Result<(usize, Vec<f64>)> {
    check_level(family, j)?;
    let slack: Vec<f64> = (1..=MAX_DEPTH as u32)
        .map(|r| 0.5 * family.derivative_bound(j + r) * pow2(-((j + r) as i32)))
        .collect();
    let per: Vec<std::result::Result<(usize, f64), f64>> = (k_lo..=k_hi)
        .into_par_iter()
        .map(|k| {
            let mut f = interval_factors(family, j, k, false);
            for (v, s) in f.iter_mut().zip(&slack) {
                *v = (*v - s).max(0.0);
            }
            minimal_depth(&f, tol).ok_or(1.0 - f[MAX_DEPTH - 1])
        })
        .collect();
    let mut depth = 0;
    let mut deficits = Vec::with_capacity(per.len());
    for p in per {
        match p {
            Ok((r, d)) => {
                depth = depth.max(r);
                deficits.push(d);
            }
            Err(tail) => {
                return Err(Error::TruncationUnreachable { tail, tol, depth: MAX_DEPTH });
            }
        }
    }
    Ok((depth, deficits))
}

/// Product of the first `depth` factors at `xi`.
pub fn partial_product<F: MaskFamily + ?Sized>(family: &F, j: u32, xi: f64, depth: usize) -> f64 {
    let mut p = 1.0;
    for r in 1..=depth as u32 {
        p *= family.value(j + r, xi * pow2(-(r as i32)));
        if p == 0.0 {
            break;
        }
    }
    p
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductBounds {
    pub level: u32,
    pub k_lo: i64,
    /// `a[k - k_lo]`.
    pub lower: Vec<f64>,
    /// `b[k - k_lo]`.
    pub upper: Vec<f64>,
    /// `nu_min[r - 1][k - k_lo]` for `r = 1..=depth`.
    pub nu_min: Vec<Vec<f64>>,
    pub nu_max: Vec<Vec<f64>>,
    pub depth: usize,
}

impl ProductBounds {
    pub fn a(&self, k: i64) -> f64 {
        self.lower[(k - self.k_lo) as usize]
    }

    pub fn b(&self, k: i64) -> f64 {
        self.upper[(k - self.k_lo) as usize]
    }

    pub fn k_hi(&self) -> i64 {
        self.k_lo + self.lower.len() as i64 - 1
    }
}

/// `a^j_k = prod nu_min^{j+r}_k` and `b^j_k = prod nu_max^{j+r}_k` over
/// `MAX_DEPTH` levels; zero factors give exact zeros.
pub fn product_bounds<N: KnotValues + ?Sized>(src: &N, j: u32, k_lo: i64, k_hi: i64, tol: f64) -> Result<ProductBounds> {
    check_level(src, j)?;
    let per: Vec<(Vec<f64>, Vec<f64>)> = (k_lo..=k_hi)
        .into_par_iter()
        .map(|k| (interval_factors(src, j, k, false), interval_factors(src, j, k, true)))
        .collect();
    let prod = |f: &[f64]| {
        let mut p = 1.0;
        for v in f {
            p *= v;
            if p == 0.0 {
                break;
            }
        }
        p
    };
    let depth = per
        .iter()
        .map(|(lo, _)| minimal_depth(lo, tol).map_or(MAX_DEPTH, |d| d.0))
        .max()
        .unwrap_or(0);
    let nu_min = (0..depth).map(|r| per.iter().map(|(lo, _)| lo[r]).collect()).collect();
    let nu_max = (0..depth).map(|r| per.iter().map(|(_, hi)| hi[r]).collect()).collect();
    Ok(ProductBounds {
        level: j,
        k_lo,
        lower: per.iter().map(|(lo, _)| prod(lo)).collect(),
        upper: per.iter().map(|(_, hi)| prod(hi)).collect(),
        nu_min,
        nu_max,
        depth,
    })
}

/// Samples of a scaling spectrum on the dyadic grid `n 2^-(j+G)`, `|xi| <= span`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumGrid {
    pub level: u32,
    pub resolution: u32,
    pub span: f64,
    pub depth: usize,
    pub tol: f64,
    pub tail_extension: String,
    pub xi: Vec<f64>,
    pub value: Vec<f64>,
    pub interval: Vec<i64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Bound on the truncation error at each point.
    pub tail_bound: Vec<f64>,
    pub zero_count: usize,
}

impl SpectrumGrid {
    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    pub fn max_tail_bound(&self) -> f64 {
        self.tail_bound.iter().copied().fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("xi,value,interval_k,lower_a,upper_b,tail_bound\n");
        for i in 0..self.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_sig(self.xi[i], 17),
                fmt_sig(self.value[i], 17),
                self.interval[i],
                fmt_sig(self.lower[i], 17),
                fmt_sig(self.upper[i], 17),
                fmt_sig(self.tail_bound[i], 17)
            );
        }
        out
    }
}

/// Scientific notation with `sig` significant digits.
pub fn fmt_sig(x: f64, sig: usize) -> String {
    if x == 0.0 {
        "0".to_string()
    } else if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{:.*e}", sig - 1, x)
    }
}

pub(crate) fn grid_extent(j: u32, span: f64, g: u32) -> Result<i64> {
    if !(span >= 0.0 && span.is_finite()) {
        return Err(Error::InvalidArgument(format!("span must be finite and nonnegative, got {span}")));
    }
    let n = (span * pow2((j + g) as i32)).floor();
    if n > 1e8 {
        return Err(Error::InvalidArgument(format!("grid with {n} points per side is too large")));
    }
    Ok(n as i64)
}

pub fn eval_scaling_spectrum<F: MaskFamily + ?Sized>(
    family: &F,
    j: u32,
    span: f64,
    g: u32,
    tol: f64,
) -> Result<SpectrumGrid> {
    let n_max = grid_extent(j, span, g)?;
    let per = 1i64 << g;
    let k_lo = (-n_max).div_euclid(per);
    let k_hi = n_max.div_euclid(per);
    let (depth, deficits) = mask_truncation_depth(family, j, k_lo, k_hi, tol)?;
    let bounds = product_bounds(family, j, k_lo, k_hi, tol)?;
    let step = pow2(-((j + g) as i32));
    let points: Vec<(f64, f64, i64)> = (-n_max..=n_max)
        .into_par_iter()
        .map(|n| {
            let xi = n as f64 * step;
            (xi, partial_product(family, j, xi, depth), n.div_euclid(per))
        })
        .collect();
    let mut grid = SpectrumGrid {
        level: j,
        resolution: g,
        span,
        depth,
        tol,
        tail_extension: "stationary".into(),
        xi: Vec::with_capacity(points.len()),
        value: Vec::with_capacity(points.len()),
        interval: Vec::with_capacity(points.len()),
        lower: Vec::with_capacity(points.len()),
        upper: Vec::with_capacity(points.len()),
        tail_bound: Vec::with_capacity(points.len()),
        zero_count: 0,
    };
    for (xi, v, k) in points {
        let idx = (k - k_lo) as usize;
        grid.xi.push(xi);
        grid.value.push(v);
        grid.interval.push(k);
        grid.lower.push(bounds.lower[idx]);
        grid.upper.push(bounds.upper[idx]);
        grid.tail_bound.push(v.abs() * deficits[idx]);
        if v == 0.0 {
            grid.zero_count += 1;
        }
    }
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceVerdict {
    Converges,
    Inconclusive,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub levels: Vec<u32>,
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    pub limit_estimate: Option<f64>,
    pub verdict: ConvergenceVerdict,
}

/// Largest term ratio accepted as geometric decay.
const GEOMETRIC_RATIO: f64 = 0.75;

fn series_report(levels: Vec<u32>, terms: Vec<f64>) -> ConvergenceReport {
    let mut partial_sums = Vec::with_capacity(terms.len());
    let mut s = 0.0;
    for t in &terms {
        s += t;
        partial_sums.push(s);
    }
    let (verdict, limit_estimate) = if terms.iter().all(|&t| t == 0.0) {
        (ConvergenceVerdict::Converges, Some(0.0))
    } else if terms.len() >= 3 {
        let n = terms.len();
        let ratios: Vec<f64> = (n - 2..n).map(|i| terms[i] / terms[i - 1]).collect();
        if ratios.iter().all(|r| r.is_finite() && *r <= GEOMETRIC_RATIO) {
            let rho = ratios[1];
            (ConvergenceVerdict::Converges, Some(s + terms[n - 1] * rho / (1.0 - rho)))
        } else {
            (ConvergenceVerdict::Inconclusive, None)
        }
    } else {
        (ConvergenceVerdict::Inconclusive, None)
    };
    ConvergenceReport {
        levels,
        terms,
        partial_sums,
        limit_estimate,
        verdict,
    }
}

/// `||m_j''||_2` over one period by Gauss-Legendre quadrature on every knot interval.
pub fn second_derivative_norm(mask: &LiftedMask) -> f64 {
    let j = mask.level();
    let count = 1usize << (j - 1);
    let h = pow2(-(j as i32));
    let rule = gl16();
    let half: f64 = (0..count)
        .map(|i| {
            let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
            rule.integrate(a, b, |x| mask.jet(x, Side::Right).d2.powi(2))
        })
        .sum();
    (2.0 * half).sqrt()
}

/// Partial sums of `sum ||a_j''||_2 / 2^j` with a geometric-extrapolation verdict.
/// Order `K = 1` lifts have no square-integrable second derivative.
pub fn check_prod_l2(norms: &[(u32, f64)], order: u32) -> ConvergenceReport {
    if order < 2 {
        return ConvergenceReport {
            levels: norms.iter().map(|n| n.0).collect(),
            terms: Vec::new(),
            partial_sums: Vec::new(),
            limit_estimate: None,
            verdict: ConvergenceVerdict::NotApplicable,
        };
    }
    series_report(
        norms.iter().map(|n| n.0).collect(),
        norms.iter().map(|&(j, v)| v * pow2(-(j as i32))).collect(),
    )
}

pub fn check_prod_l2_family(family: &LiftedFamily) -> ConvergenceReport {
    let norms: Vec<(u32, f64)> = if family.order() >= 2 {
        family
            .masks()
            .par_iter()
            .map(|m| (m.level(), second_derivative_norm(m)))
            .collect()
    } else {
        family.masks().iter().map(|m| (m.level(), f64::NAN)).collect()
    };
    check_prod_l2(&norms, family.order())
}

/// Partial sums of `sum 2^-j (int_0^{1/4} z'^4 + z''^2)^{1/2}` from exact
/// polynomial integrals.
pub fn check_phase_l2(phases: &[&PhaseSpline]) -> ConvergenceReport {
    series_report(
        phases.iter().map(|p| p.level()).collect(),
        phases
            .iter()
            .map(|p| p.energy_integral().sqrt() * pow2(-(p.level() as i32)))
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeGrid {
    pub level: u32,
    pub xi: Vec<f64>,
    /// Right-sided values.
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    /// Left-sided values; equal to the right-sided ones off breakpoints.
    pub first_left: Vec<f64>,
    pub second_left: Vec<f64>,
    pub breakpoint: Vec<bool>,
    pub depth: usize,
    pub remainder_bound: f64,
}

/// Jet of the truncated product at `xi`.
pub fn product_jet<F: MaskFamily + ?Sized>(family: &F, j: u32, xi: f64, depth: usize, side: Side) -> Jet2 {
    let mut p = Jet2::ONE;
    for r in 1..=depth as u32 {
        let s = pow2(-(r as i32));
        p = p * family.jet(j + r, xi * s, side).chain_scale(s);
    }
    p
}

/// First and second derivatives of `phi_j` on the spectrum grid.
pub fn eval_spectrum_derivatives<F: MaskFamily + ?Sized>(
    family: &F,
    j: u32,
    span: f64,
    g: u32,
    tol: f64,
) -> Result<DerivativeGrid> {
    let n_max = grid_extent(j, span, g)?;
    let per = 1i64 << g;
    let (depth, _) = mask_truncation_depth(family, j, (-n_max).div_euclid(per), n_max.div_euclid(per), tol)?;
    let c = (1..=MAX_DEPTH as u32)
        .map(|r| family.derivative_bound(j + r))
        .fold(0.0, f64::max);
    let need = if c > 0.0 { (c / tol).log2().ceil().max(0.0) as usize } else { 0 };
    let depth = depth.max(need).min(MAX_DEPTH);
    let step = pow2(-((j + g) as i32));
    let rows: Vec<(f64, Jet2, Jet2, bool)> = (-n_max..=n_max)
        .into_par_iter()
        .map(|n| {
            let xi = n as f64 * step;
            let right = product_jet(family, j, xi, depth, Side::Right);
            let bp = is_breakpoint(j, xi);
            let left = if bp { product_jet(family, j, xi, depth, Side::Left) } else { right };
            (xi, right, left, bp)
        })
        .collect();
    Ok(DerivativeGrid {
        level: j,
        xi: rows.iter().map(|r| r.0).collect(),
        first: rows.iter().map(|r| r.1.d1).collect(),
        second: rows.iter().map(|r| r.1.d2).collect(),
        first_left: rows.iter().map(|r| r.2.d1).collect(),
        second_left: rows.iter().map(|r| r.2.d2).collect(),
        breakpoint: rows.iter().map(|r| r.3).collect(),
        depth,
        remainder_bound: c * pow2(-(depth as i32)) + tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::Family;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_2_PI, PI};

    // the lifted masks are |cos(pi xi)|, so the product is |sinc|
    fn sinc(x: f64) -> f64 {
        if x == 0.0 {
            1.0
        } else {
            ((PI * x).sin() / (PI * x)).abs()
        }
    }

    fn haar_family(order: u32) -> LiftedFamily {
        LiftedFamily::new(&Family::HaarCos.table(2, 9).unwrap(), order).unwrap()
    }

    #[test]
    fn haar_spectrum_is_sinc() {
        let f = haar_family(1);
        for j in [2, 4, 6] {
            let g = eval_scaling_spectrum(&f, j, 8.0, 3, 1e-10).unwrap();
            for (x, v) in g.xi.iter().zip(&g.value) {
                assert!((v - sinc(*x)).abs() <= 1e-9, "j={j} xi={x}: {v} vs {}", sinc(*x));
            }
            let at = |x: f64| g.value[g.xi.iter().position(|&y| y == x).unwrap()];
            assert_eq!(at(0.0), 1.0);
            assert_abs_diff_eq!(at(0.5), FRAC_2_PI, epsilon = 1e-9);
            assert_eq!(at(1.0), 0.0);
        }
    }

    #[test]
    fn brute_force_product_matches_closed_form() {
        let x: f64 = 0.5;
        let p: f64 = (1..=40).map(|r| (PI * x / 2f64.powi(r)).cos()).product();
        assert_abs_diff_eq!(p, FRAC_2_PI, epsilon = 1e-15);
    }

    #[test]
    fn haar_bounds_examples() {
        let t = Family::HaarCos.table(2, 12).unwrap();
        let b = product_bounds(&t, 1, 0, 0, 1e-14).unwrap();
        assert_eq!(b.b(0), 1.0);
        assert_abs_diff_eq!(b.a(0), FRAC_2_PI, epsilon = 1e-14);
    }

    #[test]
    fn zero_factor_gives_exact_zero_bound() {
        let t = Family::MeyerSmooth { transition: 1.0 / 3.0 }.table(2, 10).unwrap();
        // nu^{4}_7 = nu^{4}_8 = 0 inside the stop band around 1/2
        assert_eq!((t.nu_at(4, 7), t.nu_at(4, 8)), (0.0, 0.0));
        let b = product_bounds(&t, 3, 7, 7, 1e-12).unwrap();
        assert_eq!(b.b(7), 0.0);
    }

    #[test]
    fn sandwich_and_range() {
        for fam in [Family::HaarCos, Family::MeyerSmooth { transition: 1.0 / 3.0 }] {
            let f = LiftedFamily::new(&fam.table(2, 10).unwrap(), 1).unwrap();
            for j in 2..=6 {
                let g = eval_scaling_spectrum(&f, j, 4.0, 3, 1e-10).unwrap();
                for i in 0..g.len() {
                    assert!(g.value[i] >= g.lower[i] - 1e-10 && g.value[i] <= g.upper[i] + 1e-10);
                    assert!((0.0..=1.0).contains(&g.value[i]));
                }
            }
        }
    }

    #[test]
    fn refinement_identity() {
        let f = LiftedFamily::new(&Family::MeyerSmooth { transition: 0.5 }.table(2, 10).unwrap(), 2).unwrap();
        let tol = 1e-11;
        let g = eval_scaling_spectrum(&f, 4, 3.0, 2, tol).unwrap();
        let g1 = eval_scaling_spectrum(&f, 5, 1.5, 2, tol).unwrap();
        // g1 has points n 2^-7, half of them align with xi/2 for xi = n 2^-6
        for (i, &x) in g.xi.iter().enumerate() {
            let idx = g1.xi.iter().position(|&y| y == x / 2.0).unwrap();
            let rhs = f.value(5, x / 2.0) * g1.value[idx];
            assert!((g.value[i] - rhs).abs() <= 2.0 * tol);
        }
    }

    #[test]
    fn unreachable_tail_is_an_error() {
        struct Flat;
        impl KnotValues for Flat {
            fn first_level(&self) -> u32 {
                1
            }
            fn nu(&self, _: u32, _: i64) -> f64 {
                0.9
            }
        }
        match truncation_depth(&Flat, 2, 0, 0, 1e-10) {
            Err(Error::TruncationUnreachable { tail, .. }) => assert_abs_diff_eq!(tail, 0.1, epsilon = 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn convergence_reports() {
        let c = PI * PI / 2f64.sqrt();
        let norms: Vec<(u32, f64)> = (1..=12).map(|j| (j, c)).collect();
        let r = check_prod_l2(&norms, 2);
        assert_eq!(r.verdict, ConvergenceVerdict::Converges);
        assert!(r.partial_sums.iter().all(|&s| s <= c));
        assert_abs_diff_eq!(r.limit_estimate.unwrap(), c, epsilon = 1e-12);
        assert_eq!(check_prod_l2(&norms, 1).verdict, ConvergenceVerdict::NotApplicable);
        assert_eq!(check_prod_l2_family(&haar_family(1)).verdict, ConvergenceVerdict::NotApplicable);
    }

    #[test]
    fn stationary_cosine_norm() {
        // haar lift of order 1 is cos(pi xi) exactly, whose m'' norm is pi^2/sqrt 2
        let f = haar_family(1);
        assert_abs_diff_eq!(second_derivative_norm(f.mask(5)), PI * PI / 2f64.sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn quadrature_norm_matches_phase_integral() {
        let f = LiftedFamily::new(&Family::MeyerSmooth { transition: 1.0 / 3.0 }.table(2, 8).unwrap(), 2).unwrap();
        for m in f.masks() {
            let q = second_derivative_norm(m);
            let e = (2.0 * m.spline().energy_integral()).sqrt();
            assert!((q - e).abs() <= 1e-9 * e, "{q} vs {e}");
        }
        let phases: Vec<&PhaseSpline> = f.masks().iter().map(|m| m.spline()).collect();
        let r = check_phase_l2(&phases);
        assert_eq!(r.levels.len(), 7);
        let h = LiftedFamily::new(&Family::HaarCos.table(2, 8).unwrap(), 1).unwrap();
        let phases: Vec<&PhaseSpline> = h.masks().iter().map(|m| m.spline()).collect();
        let r = check_phase_l2(&phases);
        for (j, t) in r.levels.iter().zip(&r.terms) {
            assert_abs_diff_eq!(*t, PI * PI / (2.0 * pow2(*j as i32)), epsilon = 1e-12);
        }
        assert_eq!(r.verdict, ConvergenceVerdict::Converges);
    }

    #[test]
    fn haar_derivative_at_half() {
        let f = haar_family(1);
        let d = eval_spectrum_derivatives(&f, 3, 1.0, 1, 1e-10).unwrap();
        let i = d.xi.iter().position(|&x| x == 0.5).unwrap();
        assert!(d.breakpoint[i]);
        assert_abs_diff_eq!(d.first[i], -4.0 / PI, epsilon = 1e-8);
        assert_abs_diff_eq!(d.first_left[i], -4.0 / PI, epsilon = 1e-8);
        let z = d.xi.iter().position(|&x| x == 0.0).unwrap();
        assert_abs_diff_eq!(d.first[z], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let f = LiftedFamily::new(&Family::MeyerSmooth { transition: 1.0 / 3.0 }.table(2, 10).unwrap(), 2).unwrap();
        let j = 4;
        let tol = 1e-12;
        let d = eval_spectrum_derivatives(&f, j, 2.0, 2, tol).unwrap();
        let (depth, _) = truncation_depth(&f, j, -40, 40, tol).unwrap();
        let h = 1e-6;
        for (i, &x) in d.xi.iter().enumerate() {
            if d.breakpoint[i] {
                continue;
            }
            let fd = (partial_product(&f, j, x + h, depth) - partial_product(&f, j, x - h, depth)) / (2.0 * h);
            assert!((fd - d.first[i]).abs() <= 1e-5, "xi={x}: {fd} vs {}", d.first[i]);
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let f = haar_family(1);
        let g = eval_scaling_spectrum(&f, 3, 1.0, 0, 1e-10).unwrap();
        let csv = g.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "xi,value,interval_k,lower_a,upper_b,tail_bound");
        assert_eq!(lines.count(), g.len());
        assert_eq!(fmt_sig(0.5, 17), "5.0000000000000000e-1");
    }
}
