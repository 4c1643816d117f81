//! Lifted masks: `m(xi) = cos(z(xi))` on [0, 1/4], `sin(z(1/2 - xi))` on
//! (1/4, 1/2], extended evenly and 1-periodically.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{cos_sin_series, factorial, Jet2};
use crate::mask::{pow2, PeriodicMaskTable};
use crate::spline::{EndConditions, PhaseSpline};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn flip(self) -> Self {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

/// Which of the four branches evaluates the mask at a point, and the phase
/// argument `u` in [0, 1/4] it uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Branch {
    pub u: f64,
    /// `du / dxi`, either 1 or -1.
    pub dir: f64,
    pub sine: bool,
    /// Side of `u` approached when `xi` is approached from the requested side.
    pub u_side: Side,
}

pub(crate) fn branch(xi: f64, side: Side) -> Branch {
    let mut x = xi - (xi + 0.5).floor();
    if x == -0.5 && side == Side::Left {
        x = 0.5;
    }
    let left = side == Side::Left;
    if x < -0.25 || (x == -0.25 && left) {
        Branch { u: 0.5 + x, dir: 1.0, sine: true, u_side: side }
    } else if x < 0.0 || (x == 0.0 && left) {
        Branch { u: -x, dir: -1.0, sine: false, u_side: side.flip() }
    } else if x < 0.25 || (x == 0.25 && left) {
        Branch { u: x, dir: 1.0, sine: false, u_side: side }
    } else {
        Branch { u: 0.5 - x, dir: -1.0, sine: true, u_side: side.flip() }
    }
}

/// True when `xi` is a knot image `k 2^-j`.
pub fn is_breakpoint(level: u32, xi: f64) -> bool {
    let s = xi * pow2(level as i32);
    s == s.floor()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftedMask {
    spline: PhaseSpline,
}

impl LiftedMask {
    pub fn new(spline: PhaseSpline) -> Self {
        Self { spline }
    }

    pub fn fit(table: &PeriodicMaskTable, j: u32, order: u32) -> Result<Self> {
        Ok(Self::new(PhaseSpline::fit_table(table, j, order)?))
    }

    pub fn level(&self) -> u32 {
        self.spline.level()
    }

    pub fn order(&self) -> u32 {
        self.spline.order()
    }

    pub fn spline(&self) -> &PhaseSpline {
        &self.spline
    }

    pub fn value(&self, xi: f64) -> f64 {
        let b = branch(xi, Side::Right);
        let z = self.spline.value(b.u);
        if b.sine {
            z.sin()
        } else {
            z.cos()
        }
    }

    /// Value and first two derivatives, one-sided at breakpoints.
    pub fn jet(&self, xi: f64, side: Side) -> Jet2 {
        let b = branch(xi, side);
        let [z, z1, z2] = self.spline.derivs2(b.u, b.u_side);
        let z1 = z1 * b.dir;
        let (c, s) = (z.cos(), z.sin());
        if b.sine {
            Jet2 { v: s, d1: c * z1, d2: -s * z1 * z1 + c * z2 }
        } else {
            Jet2 { v: c, d1: -s * z1, d2: -c * z1 * z1 - s * z2 }
        }
    }

    /// One-sided Taylor coefficients `m^(l)(xi) / l!` for `l = 0..=order`.
    pub fn taylor(&self, xi: f64, side: Side, order: usize) -> Vec<f64> {
        let b = branch(xi, side);
        let mut a = self.spline.taylor(b.u, b.u_side, order);
        if b.dir < 0.0 {
            for (m, v) in a.iter_mut().enumerate() {
                if m % 2 == 1 {
                    *v = -*v;
                }
            }
        }
        let (c, s) = cos_sin_series(&a);
        if b.sine {
            s
        } else {
            c
        }
    }

    /// `m^(d)(xi)`. At a breakpoint the one-sided values must agree to
    /// `1e-9` relative, otherwise both are reported in the error.
    pub fn eval(&self, xi: f64, d: usize) -> Result<f64> {
        let from = |side| self.taylor(xi, side, d)[d] * factorial(d);
        if d == 0 {
            return Ok(self.value(xi));
        }
        let right = from(Side::Right);
        if !is_breakpoint(self.level(), xi) {
            return Ok(right);
        }
        let left = from(Side::Left);
        if (left - right).abs() <= 1e-9 * left.abs().max(right.abs()).max(1.0) {
            Ok(right)
        } else {
            Err(Error::Breakpoint { xi, order: d, left, right })
        }
    }
}

pub fn lift_mask(table: &PeriodicMaskTable, j: u32, order: u32) -> Result<LiftedMask> {
    LiftedMask::fit(table, j, order)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessReport {
    pub level: u32,
    #[serde(rename = "K")]
    pub order: u32,
    pub points_checked: usize,
    /// Largest relative one-sided mismatch of `m^(l)`, index `l = 0..K-1`.
    pub max_mismatch: Vec<f64>,
    pub worst_xi: f64,
    /// Largest `|m^(l)(1/2)|`, `l = 1..K-1`, relative to the derivative scale.
    pub half_point_derivative: f64,
    pub spline_range_violation: f64,
    pub spline_condition: f64,
    pub end_conditions: EndConditions,
    pub passes: bool,
}

/// Compares exact one-sided derivatives of orders `0..K-1` at `0`, `1/4`,
/// `1/2` and every knot image in between.
pub fn verify_mask_smoothness(mask: &LiftedMask, tol: f64) -> SmoothnessReport {
    let j = mask.level();
    let order = mask.order() as usize;
    let top = order - 1;
    let count = 1usize << (j - 1);
    let h = pow2(-(j as i32));
    let mut mismatch = vec![0.0f64; order];
    let mut scale = vec![0.0f64; order];
    let mut worst = (0.0f64, 0.0f64);
    for k in 0..=count {
        let xi = k as f64 * h;
        let l = mask.taylor(xi, Side::Left, top);
        let r = mask.taylor(xi, Side::Right, top);
        for m in 0..order {
            let (a, b) = (l[m] * factorial(m), r[m] * factorial(m));
            scale[m] = scale[m].max(a.abs()).max(b.abs());
            let e = (a - b).abs() / a.abs().max(b.abs()).max(1.0);
            mismatch[m] = mismatch[m].max(e);
            if e > worst.0 {
                worst = (e, xi);
            }
        }
    }
    let half = mask.taylor(0.5, Side::Right, top);
    let half_point_derivative = (1..order)
        .map(|m| (half[m] * factorial(m)).abs() / scale[m].max(1.0))
        .fold(0.0, f64::max);
    let spline_range_violation = mask.spline().range_violation();
    let passes = mismatch.iter().all(|&e| e <= tol) && half_point_derivative <= tol;
    SmoothnessReport {
        level: j,
        order: mask.order(),
        points_checked: count + 1,
        max_mismatch: mismatch,
        worst_xi: worst.1,
        half_point_derivative,
        spline_range_violation,
        spline_condition: mask.spline().condition(),
        end_conditions: mask.spline().end_conditions(),
        passes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::Family;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn haar(j: u32, k: u32) -> LiftedMask {
        lift_mask(&Family::HaarCos.table(2, 8).unwrap(), j, k).unwrap()
    }

    #[test]
    fn branch_selection_is_even_and_periodic() {
        let b = branch(0.3, Side::Right);
        assert!(b.sine);
        assert_abs_diff_eq!(b.u, 0.2, epsilon = 1e-15);
        let b = branch(-0.3, Side::Right);
        assert!(b.sine);
        assert_abs_diff_eq!(b.u, 0.2, epsilon = 1e-15);
        let b = branch(1.1, Side::Right);
        assert!(!b.sine);
        assert_abs_diff_eq!(b.u, 0.1, epsilon = 1e-14);
        // seam at 1/2 from the left belongs to the (1/4, 1/2] branch
        let b = branch(0.5, Side::Left);
        assert_eq!((b.u, b.sine, b.u_side), (0.0, true, Side::Right));
    }

    #[test]
    fn haar_lift_is_cosine() {
        for j in 3..=8 {
            let m = haar(j, 1);
            assert_abs_diff_eq!(m.value(1.0 / 3.0), 0.5, epsilon = 1e-14);
            for i in 0..10_000 {
                let xi = -2.0 + 4.0 * i as f64 / 10_000.0 + 1e-5;
                assert_abs_diff_eq!(m.value(xi), (PI * xi).cos().abs(), epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn ends_of_any_lift() {
        let t = Family::MeyerSmooth { transition: 0.5 }.table(2, 7).unwrap();
        for k in 1..=4 {
            let m = lift_mask(&t, 6, k).unwrap();
            assert_eq!(m.value(0.0), 1.0);
            assert_eq!(m.value(0.5), 0.0);
            assert_eq!(m.value(-0.5), 0.0);
        }
    }

    #[test]
    fn linear_piece_derivative_formula() {
        let t = Family::MeyerSmooth { transition: 1.0 }.table(2, 7).unwrap();
        let m = lift_mask(&t, 5, 1).unwrap();
        let th = t.theta_level(5).unwrap();
        let xi = 0.1;
        let k = (xi * 32.0f64).floor() as usize;
        let expect = -32.0 * (th[k + 1] - th[k]) * m.spline().value(xi).sin();
        assert_abs_diff_eq!(m.eval(xi, 1).unwrap(), expect, epsilon = 1e-12);
    }

    #[test]
    fn breakpoint_derivative_jump_is_reported() {
        let t = Family::MeyerSmooth { transition: 1.0 }.table(2, 7).unwrap();
        let m = lift_mask(&t, 5, 1).unwrap();
        match m.eval(3.0 / 32.0, 1) {
            Err(Error::Breakpoint { left, right, .. }) => assert!((left - right).abs() > 1e-6),
            other => panic!("expected breakpoint error, got {other:?}"),
        }
        // haar is globally smooth, so the one-sided values agree
        assert!(haar(5, 1).eval(3.0 / 32.0, 1).is_ok());
    }

    #[test]
    fn jets_match_finite_differences() {
        let t = Family::MeyerSmooth { transition: 0.5 }.table(2, 7).unwrap();
        for k in 1..=3 {
            let m = lift_mask(&t, 5, k).unwrap();
            for i in 0..400 {
                let xi = -0.5 + i as f64 / 400.0 + 0.00123;
                if is_breakpoint(5, xi) {
                    continue;
                }
                let d = 1e-6;
                let j = m.jet(xi, Side::Right);
                let fd1 = (m.value(xi + d) - m.value(xi - d)) / (2.0 * d);
                let fd2 = (m.value(xi + d) - 2.0 * m.value(xi) + m.value(xi - d)) / (d * d);
                // stay clear of knots for the second difference
                let s = xi * 32.0;
                if (s - s.round()).abs() > 1e-3 {
                    assert_abs_diff_eq!(j.d1, fd1, epsilon = 1e-4);
                    assert!((j.d2 - fd2).abs() <= 1e-4 * j.d2.abs().max(1.0) + 1e-2);
                }
                assert_abs_diff_eq!(m.eval(xi, 2).unwrap(), j.d2, epsilon = 1e-9 * j.d2.abs().max(1.0));
            }
        }
    }

    #[test]
    fn smoothness_reports() {
        let r = verify_mask_smoothness(&haar(6, 1), 1e-12);
        assert!(r.passes);
        assert!(r.max_mismatch[0] <= 1e-12);
        let t = Family::MeyerSmooth { transition: 1.0 / 3.0 }.table(2, 8).unwrap();
        for k in 2..=5 {
            let m = lift_mask(&t, 6, k).unwrap();
            let r = verify_mask_smoothness(&m, 1e-9);
            assert!(r.passes, "K={k}: {r:?}");
        }
        // order-1 match at 1/4 equals z'(1/4) * (-sin(pi/4)) from both sides
        let m = lift_mask(&t, 6, 2).unwrap();
        let z1 = m.spline().derivs2(0.25, Side::Left)[1];
        let l = m.jet(0.25, Side::Left).d1;
        let r = m.jet(0.25, Side::Right).d1;
        assert_abs_diff_eq!(l, -z1 * FRAC_PI_4.sin(), epsilon = 1e-9);
        assert_abs_diff_eq!(r, l, epsilon = 1e-9);
        assert_eq!(m.jet(0.5, Side::Left).v, 0.0);
        assert_eq!(m.jet(0.5, Side::Right).v, 0.0);
    }

    #[test]
    fn partition_of_unity_and_symmetry() {
        for fam in [Family::HaarCos, Family::MeyerSmooth { transition: 1.0 / 3.0 }] {
            let t = fam.table(2, 8).unwrap();
            for k in 1..=3 {
                for j in 3..=6 {
                    let m = lift_mask(&t, j, k).unwrap();
                    for i in 0..4096 {
                        let xi = i as f64 / 4096.0 - 0.5;
                        let a = m.value(xi);
                        let b = m.value(xi + 0.5);
                        assert!((a * a + b * b - 1.0).abs() <= 1e-12);
                        assert!((m.value(-xi) - a).abs() <= 1e-14);
                        assert!((m.value(xi + 1.0) - a).abs() <= 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn interpolates_table_at_knot_images() {
        let t = Family::MeyerSmooth { transition: 1.0 / 3.0 }.table(2, 8).unwrap();
        for k in 1..=4 {
            let m = lift_mask(&t, 7, k).unwrap();
            for i in 0..128 {
                assert!((m.value(i as f64 / 128.0) - t.nu_at(7, i)).abs() <= 1e-13);
            }
        }
    }
}
