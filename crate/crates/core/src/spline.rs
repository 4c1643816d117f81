//! Phase splines on [0, 1/4] through the level phases `theta[j][k]`.
//!
//! For order `K` the spline has degree `2K - 1` and `2K - 2` continuous
//! derivatives. Besides interpolation it satisfies `z^(l)(0) = 0` for
//! `l = 1..K-1` and `z^(l)(1/4) = 0` for even `l` in `2..=2K-2`. That makes
//! the system square; `K = 1` is plain linear interpolation.

use serde::{Deserialize, Serialize};

use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::jet::factorial;
use crate::lift::Side;
use crate::mask::{pow2, PeriodicMaskTable};

pub const MAX_ORDER: u32 = 8;
/// Fits whose condition estimate exceeds this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndConditions {
    pub degree: usize,
    pub continuity: usize,
    /// Orders `l` with `z^(l)(0) = 0`.
    pub left_zero_derivatives: Vec<usize>,
    /// Orders `l` with `z^(l)(1/4) = 0`.
    pub right_zero_derivatives: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpline {
    level: u32,
    order: u32,
    degree: usize,
    pieces: usize,
    /// Row `i` holds the coefficients of piece `i` in `t = (u - i h) / h`.
    coeffs: Vec<f64>,
    condition: f64,
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl PhaseSpline {
    /// Fits level `j` of a mask table.
    pub fn fit_table(table: &PeriodicMaskTable, j: u32, order: u32) -> Result<Self> {
        Self::fit(j, table.theta_level(j)?, order)
    }

    /// Fits a spline through `theta[0..=2^(j-2)]`.
    pub fn fit(j: u32, theta: &[f64], order: u32) -> Result<Self> {
        if order == 0 || order > MAX_ORDER {
            return Err(Error::UnsupportedOrder(order));
        }
        if j < 2 {
            return Err(Error::LevelTooSmall(j));
        }
        let pieces = 1usize << (j - 2);
        if theta.len() < pieces + 1 {
            return Err(Error::InvalidArgument(format!(
                "level {j} needs {} phases, got {}",
                pieces + 1,
                theta.len()
            )));
        }
        let k = order as usize;
        let degree = 2 * k - 1;
        let stride = degree + 1;
        let n = pieces * stride;
        let col = |i: usize, p: usize| i * stride + p;

        let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        let mut rhs = Vec::with_capacity(n);
        for l in 1..k {
            rows.push(vec![(col(0, l), 1.0)]);
            rhs.push(0.0);
        }
        for i in 0..pieces {
            rows.push(vec![(col(i, 0), 1.0)]);
            rhs.push(theta[i]);
            rows.push((0..=degree).map(|p| (col(i, p), 1.0)).collect());
            rhs.push(theta[i + 1]);
            if i + 1 < pieces {
                for l in 1..degree {
                    let mut row: Vec<(usize, f64)> =
                        (l..=degree).map(|p| (col(i, p), binomial(p, l))).collect();
                    row.push((col(i + 1, l), -1.0));
                    rows.push(row);
                    rhs.push(0.0);
                }
            }
        }
        for l in (2..degree).step_by(2) {
            rows.push((l..=degree).map(|p| (col(pieces - 1, p), binomial(p, l))).collect());
            rhs.push(0.0);
        }
        debug_assert_eq!(rows.len(), n);

        let mut kl = 0;
        let mut ku = 0;
        for (r, row) in rows.iter().enumerate() {
            for &(c, _) in row {
                kl = kl.max(r.saturating_sub(c));
                ku = ku.max(c.saturating_sub(r));
            }
        }
        let mut m = BandMatrix::new(n, kl, ku);
        for (r, row) in rows.iter().enumerate() {
            for &(c, v) in row {
                m.add(r, c, v);
            }
        }
        let lu = m
            .factor()
            .map_err(|_| Error::IllConditioned { condition: f64::INFINITY })?;
        let condition = lu.condition_estimate();
        if !(condition <= MAX_CONDITION) {
            return Err(Error::IllConditioned { condition });
        }
        let mut coeffs = rhs;
        lu.solve(&mut coeffs);
        Ok(Self {
            level: j,
            order,
            degree,
            pieces,
            coeffs,
            condition,
        })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn pieces(&self) -> usize {
        self.pieces
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn piece(&self, i: usize) -> &[f64] {
        let s = self.degree + 1;
        &self.coeffs[i * s..(i + 1) * s]
    }

    pub fn end_conditions(&self) -> EndConditions {
        let k = self.order as usize;
        EndConditions {
            degree: self.degree,
            continuity: self.degree - 1,
            left_zero_derivatives: (1..k).collect(),
            right_zero_derivatives: (2..self.degree).step_by(2).collect(),
        }
    }

    /// Piece index and local coordinate of `u`, taking the piece on `side`
    /// at knots. Arguments outside [0, 1/4] extrapolate the end pieces.
    pub(crate) fn locate(&self, u: f64, side: Side) -> (usize, f64) {
        let s = u * pow2(self.level as i32);
        let mut i = s.floor();
        if side == Side::Left && s == i && i > 0.0 {
            i -= 1.0;
        }
        let i = (i.max(0.0) as usize).min(self.pieces - 1);
        (i, s - i as f64)
    }

    pub fn value(&self, u: f64) -> f64 {
        let (i, t) = self.locate(u, Side::Right);
        self.piece(i).iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    /// `z(u), z'(u), z''(u)` from one side.
    pub fn derivs2(&self, u: f64, side: Side) -> [f64; 3] {
        let (i, t) = self.locate(u, side);
        let c = self.piece(i);
        let (mut v, mut d1, mut d2) = (0.0, 0.0, 0.0);
        for p in (0..=self.degree).rev() {
            d2 = d2 * t + d1 * 2.0;
            d1 = d1 * t + v;
            v = v * t + c[p];
        }
        let sc = pow2(self.level as i32);
        [v, d1 * sc, d2 * sc * sc]
    }

    /// Taylor coefficients `z^(m)(u) / m!` for `m = 0..=order`, from one side.
    pub fn taylor(&self, u: f64, side: Side, order: usize) -> Vec<f64> {
        let (i, t) = self.locate(u, side);
        let c = self.piece(i);
        let sc = pow2(self.level as i32);
        (0..=order)
            .map(|m| {
                if m > self.degree {
                    return 0.0;
                }
                let mut acc = 0.0;
                for p in (m..=self.degree).rev() {
                    acc = acc * t + binomial(p, m) * c[p];
                }
                acc * sc.powi(m as i32)
            })
            .collect()
    }

    /// Largest amount by which `z` leaves [0, pi/2], sampled densely per piece.
    pub fn range_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.pieces {
            let c = self.piece(i);
            for s in 0..=32 {
                let t = s as f64 / 32.0;
                let z = c.iter().rev().fold(0.0, |acc, v| acc * t + v);
                worst = worst.max(-z).max(z - std::f64::consts::FRAC_PI_2);
            }
        }
        worst
    }

    /// Largest relative jump of derivatives `0..=max_order` across interior knots.
    pub fn knot_jump(&self, max_order: usize) -> f64 {
        let mut worst = 0.0f64;
        let sc = pow2(self.level as i32);
        for i in 1..self.pieces {
            let u = i as f64 / sc;
            let l = self.taylor(u, Side::Left, max_order);
            let r = self.taylor(u, Side::Right, max_order);
            for m in 0..=max_order {
                let (a, b) = (l[m] * factorial(m), r[m] * factorial(m));
                worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(1.0));
            }
        }
        worst
    }

    /// Largest `|z(k 2^-j) - theta_k|`.
    pub fn interpolation_residual(&self, theta: &[f64]) -> f64 {
        let h = pow2(-(self.level as i32));
        (0..=self.pieces)
            .map(|k| {
                let side = if k == self.pieces { Side::Left } else { Side::Right };
                (self.derivs2(k as f64 * h, side)[0] - theta[k]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Exact `int_0^{1/4} z'^4 + z''^2 du` by polynomial algebra per piece.
    pub fn energy_integral(&self) -> f64 {
        let sc = pow2(self.level as i32);
        let mut total = 0.0;
        for i in 0..self.pieces {
            let c = self.piece(i);
            let d1: Vec<f64> = (1..=self.degree).map(|p| p as f64 * c[p]).collect();
            let d2: Vec<f64> = (2..=self.degree).map(|p| (p * (p - 1)) as f64 * c[p]).collect();
            let sq = poly_mul(&d1, &d1);
            let quart = poly_mul(&sq, &sq);
            let d2sq = poly_mul(&d2, &d2);
            // du = h dt and each derivative carries a factor 2^j
            total += (integrate_unit(&quart) + integrate_unit(&d2sq)) * sc.powi(3);
        }
        total
    }

    pub fn dump(&self) -> SplineDump {
        let h = pow2(-(self.level as i32));
        SplineDump {
            j: self.level,
            k: self.order,
            knots: (0..=self.pieces).map(|i| i as f64 * h).collect(),
            coeffs: (0..self.pieces).map(|i| self.piece(i).to_vec()).collect(),
        }
    }
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn integrate_unit(p: &[f64]) -> f64 {
    p.iter().enumerate().map(|(i, c)| c / (i + 1) as f64).sum()
}

/// Spline dump; `coeffs[i]` are the coefficients of piece `i` in powers of
/// the local variable `t = (u - knots[i]) * 2^j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineDump {
    pub j: u32,
    #[serde(rename = "K")]
    pub k: u32,
    pub knots: Vec<f64>,
    pub coeffs: Vec<Vec<f64>>,
}

pub fn fit_phase_spline(table: &PeriodicMaskTable, j: u32, order: u32) -> Result<PhaseSpline> {
    PhaseSpline::fit_table(table, j, order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::Family;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn linear_haar_phase_is_exact() {
        let t = Family::HaarCos.table(2, 6).unwrap();
        let s = fit_phase_spline(&t, 3, 1).unwrap();
        assert_eq!(s.pieces(), 2);
        assert_abs_diff_eq!(s.value(1.0 / 16.0), PI / 16.0, epsilon = 1e-15);
        for i in 0..=100 {
            let u = 0.25 * i as f64 / 100.0;
            assert_abs_diff_eq!(s.value(u), PI * u, epsilon = 1e-15);
        }
    }

    #[test]
    fn order_two_flattens_at_origin() {
        let t = Family::HaarCos.table(2, 6).unwrap();
        let s = fit_phase_spline(&t, 3, 2).unwrap();
        assert_abs_diff_eq!(s.value(0.125), PI / 8.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.value(0.25), PI / 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.derivs2(0.0, Side::Right)[1], 0.0, epsilon = 1e-12);
        assert!((s.value(0.03) - PI * 0.03).abs() > 1e-3);
    }

    // Independent oracle: build the same constraints as a dense system in the
    // global monomial basis of each piece and solve by Gaussian elimination.
    fn dense_oracle(j: u32, theta: &[f64], order: usize) -> Vec<Vec<f64>> {
        let pieces = 1usize << (j - 2);
        let h = 0.25 / pieces as f64;
        let deg = 2 * order - 1;
        let s = deg + 1;
        let n = pieces * s;
        let deriv_row = |i: usize, x: f64, l: usize| {
            let mut row = vec![0.0; n];
            for p in l..=deg {
                let f: f64 = (p - l + 1..=p).map(|v| v as f64).product();
                row[i * s + p] = f * x.powi((p - l) as i32);
            }
            row
        };
        let mut a = Vec::new();
        let mut b = Vec::new();
        for l in 1..order {
            a.push(deriv_row(0, 0.0, l));
            b.push(0.0);
        }
        for i in 0..pieces {
            a.push(deriv_row(i, 0.0, 0));
            b.push(theta[i]);
            a.push(deriv_row(i, h, 0));
            b.push(theta[i + 1]);
            if i + 1 < pieces {
                for l in 1..deg {
                    let mut r = deriv_row(i, h, l);
                    let q = deriv_row(i + 1, 0.0, l);
                    for (x, y) in r.iter_mut().zip(q) {
                        *x -= y;
                    }
                    a.push(r);
                    b.push(0.0);
                }
            }
        }
        for l in (2..deg).step_by(2) {
            a.push(deriv_row(pieces - 1, h, l));
            b.push(0.0);
        }
        // Gaussian elimination with partial pivoting
        for k in 0..n {
            let p = (k..n).max_by(|&x, &y| a[x][k].abs().total_cmp(&a[y][k].abs())).unwrap();
            a.swap(k, p);
            b.swap(k, p);
            for i in k + 1..n {
                let m = a[i][k] / a[k][k];
                if m != 0.0 {
                    for c in k..n {
                        a[i][c] -= m * a[k][c];
                    }
                    b[i] -= m * b[k];
                }
            }
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let r: f64 = (k + 1..n).map(|c| a[k][c] * x[c]).sum();
            x[k] = (b[k] - r) / a[k][k];
        }
        x.chunks(s).map(<[f64]>::to_vec).collect()
    }

    #[test]
    fn banded_fit_matches_dense_oracle() {
        let t = Family::MeyerSmooth { transition: 0.6 }.table(2, 6).unwrap();
        for j in 3..=5 {
            let theta = t.theta_level(j).unwrap();
            for order in 1..=4 {
                let s = PhaseSpline::fit(j, theta, order).unwrap();
                let oracle = dense_oracle(j, theta, order as usize);
                let h = pow2(-(j as i32));
                for (i, piece) in oracle.iter().enumerate() {
                    for q in 0..=8 {
                        let x = h * q as f64 / 8.0;
                        let want: f64 = piece.iter().enumerate().map(|(p, c)| c * x.powi(p as i32)).sum();
                        let got = s.derivs2(i as f64 * h + x, Side::Left)[0];
                        assert_abs_diff_eq!(got, want, epsilon = 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn end_conditions_and_smoothness() {
        for fam in [Family::HaarCos, Family::MeyerSmooth { transition: 1.0 / 3.0 }] {
            let t = fam.table(2, 8).unwrap();
            for order in 1..=MAX_ORDER {
                let s = fit_phase_spline(&t, 6, order).unwrap();
                let th = t.theta_level(6).unwrap();
                assert!(s.interpolation_residual(th) <= 1e-13);
                assert!(s.knot_jump(order as usize - 1) <= 1e-9);
                let left = s.taylor(0.0, Side::Right, order as usize);
                for l in 1..order as usize {
                    assert!(left[l].abs() * factorial(l) <= 1e-9 * pow2(6 * l as i32));
                }
                let right = s.taylor(0.25, Side::Left, s.degree());
                for l in s.end_conditions().right_zero_derivatives {
                    assert!(right[l].abs() * factorial(l) <= 1e-9 * pow2(6 * l as i32));
                }
            }
        }
    }

    #[test]
    fn rejects_bad_order_and_level() {
        let t = Family::HaarCos.table(2, 4).unwrap();
        assert!(matches!(fit_phase_spline(&t, 3, 0), Err(Error::UnsupportedOrder(0))));
        assert!(matches!(fit_phase_spline(&t, 3, 9), Err(Error::UnsupportedOrder(9))));
        assert!(matches!(PhaseSpline::fit(1, &[0.0, 1.0], 1), Err(Error::LevelTooSmall(1))));
    }

    #[test]
    fn energy_integral_haar_linear() {
        let t = Family::HaarCos.table(2, 6).unwrap();
        let s = fit_phase_spline(&t, 5, 1).unwrap();
        assert_abs_diff_eq!(s.energy_integral(), PI.powi(4) / 4.0, epsilon = 1e-11);
    }

    #[test]
    fn energy_integral_matches_riemann_sum() {
        let t = Family::MeyerSmooth { transition: 1.0 / 3.0 }.table(2, 6).unwrap();
        let s = fit_phase_spline(&t, 4, 2).unwrap();
        let n = 1_000_000;
        let h = 0.25 / n as f64;
        let mut sum = 0.0;
        for i in 0..n {
            let u = (i as f64 + 0.5) * h;
            let [_, d1, d2] = s.derivs2(u, Side::Right);
            sum += d1.powi(4) + d2 * d2;
        }
        sum *= h;
        let exact = s.energy_integral();
        assert!(((sum - exact) / exact).abs() <= 1e-8, "{sum} vs {exact}");
    }

    #[test]
    fn zero_phase_has_zero_energy() {
        let s = PhaseSpline::fit(4, &[0.0; 16], 2).unwrap();
        assert_eq!(s.energy_integral(), 0.0);
    }
}
