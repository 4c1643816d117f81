//! Cached Gauss-Legendre rules.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

#[derive(Debug, Clone)]
pub(crate) struct Rule {
    pairs: Vec<(f64, f64)>,
}

impl Rule {
    fn new(n: usize) -> Self {
        let rule = GaussLegendre::new(NonZeroUsize::new(n).expect("nonzero node count"));
        let mut pairs = rule.as_node_weight_pairs().to_vec();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self { pairs }
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.pairs.iter().map(move |&(x, w)| (c + h * x, h * w))
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

pub(crate) fn gl8() -> &'static Rule {
    static R: OnceLock<Rule> = OnceLock::new();
    R.get_or_init(|| Rule::new(8))
}

pub(crate) fn gl16() -> &'static Rule {
    static R: OnceLock<Rule> = OnceLock::new();
    R.get_or_init(|| Rule::new(16))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn integrates_polynomials_exactly() {
        // 8 nodes are exact through degree 15
        let v = gl8().integrate(-1.0, 2.0, |x| x.powi(15) + 3.0 * x * x);
        let exact = (2f64.powi(16) - 1.0) / 16.0 + 9.0;
        assert_relative_eq!(v, exact, max_relative = 1e-13);
        let v = gl16().integrate(0.0, std::f64::consts::PI, f64::sin);
        assert_relative_eq!(v, 2.0, max_relative = 1e-14);
    }
}
