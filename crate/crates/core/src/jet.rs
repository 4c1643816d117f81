//! Second-order jets for products and truncated Taylor series for exact
//! one-sided derivatives of composed masks.

use std::ops::Mul;

/// Value with first and second derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2 {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet2 {
    pub const ONE: Jet2 = Jet2 {
        v: 1.0,
        d1: 0.0,
        d2: 0.0,
    };

    pub fn constant(v: f64) -> Self {
        Jet2 { v, d1: 0.0, d2: 0.0 }
    }

    /// Jet of `x -> f(s x)` given the jet of `f` at `s x`.
    pub fn chain_scale(self, s: f64) -> Self {
        Jet2 {
            v: self.v,
            d1: self.d1 * s,
            d2: self.d2 * s * s,
        }
    }
}

impl Mul for Jet2 {
    type Output = Jet2;

    fn mul(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v * o.v,
            d1: self.d1 * o.v + self.v * o.d1,
            d2: self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2,
        }
    }
}

/// Taylor coefficients of `cos(a(d))` and `sin(a(d))` truncated to the
/// length of `a`.
pub fn cos_sin_series(a: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = a.len();
    let mut c = vec![0.0; n];
    let mut s = vec![0.0; n];
    if n == 0 {
        return (c, s);
    }
    c[0] = a[0].cos();
    s[0] = a[0].sin();
    // c' = -s a', s' = c a'
    for m in 1..n {
        let mut cm = 0.0;
        let mut sm = 0.0;
        for i in 1..=m {
            let w = i as f64 * a[i];
            cm -= w * s[m - i];
            sm += w * c[m - i];
        }
        c[m] = cm / m as f64;
        s[m] = sm / m as f64;
    }
    (c, s)
}

/// `l!` as a float.
pub fn factorial(l: usize) -> f64 {
    (1..=l).map(|i| i as f64).product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn product_rule() {
        let f = Jet2 { v: 2.0, d1: 3.0, d2: 5.0 };
        let g = Jet2 { v: 7.0, d1: 11.0, d2: 13.0 };
        let p = f * g;
        assert_eq!(p.v, 14.0);
        assert_eq!(p.d1, 3.0 * 7.0 + 2.0 * 11.0);
        assert_eq!(p.d2, 5.0 * 7.0 + 2.0 * 3.0 * 11.0 + 2.0 * 13.0);
    }

    #[test]
    fn series_matches_direct_derivatives() {
        // a(d) = 0.3 + 2 d + 0.5 d^2 ; compare cos(a) coefficients with
        // derivatives from the closed form.
        let a = [0.3, 2.0, 0.5, 0.0, 0.0];
        let (c, s) = cos_sin_series(&a);
        let a0: f64 = 0.3;
        assert_relative_eq!(c[0], a0.cos());
        assert_relative_eq!(c[1], -a0.sin() * 2.0);
        // second derivative of cos(a) = -cos(a) a'^2 - sin(a) a''
        assert_relative_eq!(c[2] * 2.0, -a0.cos() * 4.0 - a0.sin() * 1.0, epsilon = 1e-14);
        assert_relative_eq!(s[1], a0.cos() * 2.0);
        // third derivative of sin(a) with a''' = 0: -cos a a'^3 ... checked by
        // finite differences of the truncated polynomial
        let f = |d: f64| (0.3 + 2.0 * d + 0.5 * d * d).sin();
        let h = 1e-3;
        let d3 = (f(2.0 * h) - 2.0 * f(h) + 2.0 * f(-h) - f(-2.0 * h)) / (2.0 * h * h * h);
        assert_relative_eq!(s[3] * 6.0, d3, epsilon = 1e-4);
    }
}
