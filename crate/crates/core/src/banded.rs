//! Banded LU factorisation with partial pivoting.

/// Square band matrix with `kl` sub- and `ku` super-diagonals. Rows keep room
/// for the `kl` extra super-diagonals created by row interchanges.
#[derive(Debug, Clone)]
pub(crate) struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    fn at(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl);
        i * self.width + (j + self.kl - i)
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "entry ({i}, {j}) outside band");
        let idx = self.at(i, j);
        self.data[idx] += v;
    }

    fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.data[self.at(i, j)].abs()).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Factorises in place. A zero pivot returns its column.
    pub fn factor(mut self) -> Result<BandLu, usize> {
        let n = self.n;
        let kl = self.kl;
        let reach = self.ku + self.kl;
        let norm = self.norm_inf();
        let mut lower = vec![0.0; n * kl];
        let mut piv = vec![0; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + reach).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.at(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.data[self.at(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(k);
            }
            piv[k] = p;
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (self.at(k, j), self.at(p, j));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.at(k, k)];
            for i in k + 1..=last_row {
                let m = self.data[self.at(i, k)] / pivot;
                lower[k * kl + (i - k - 1)] = m;
                if m != 0.0 {
                    for j in k..=last_col {
                        let u = self.data[self.at(k, j)];
                        let idx = self.at(i, j);
                        self.data[idx] -= m * u;
                    }
                }
            }
        }
        Ok(BandLu {
            upper: self,
            lower,
            piv,
            norm,
        })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BandLu {
    upper: BandMatrix,
    lower: Vec<f64>,
    piv: Vec<usize>,
    norm: f64,
}

impl BandLu {
    pub fn solve(&self, b: &mut [f64]) {
        let u = &self.upper;
        let (n, kl) = (u.n, u.kl);
        let reach = u.ku + u.kl;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            for i in k + 1..=(k + kl).min(n - 1) {
                b[i] -= self.lower[k * kl + (i - k - 1)] * b[k];
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..=(k + reach).min(n - 1) {
                s -= u.data[u.at(k, j)] * b[j];
            }
            b[k] = s / u.data[u.at(k, k)];
        }
    }

    /// Lower estimate of the infinity-norm condition number from a few probe
    /// solves.
    pub fn condition_estimate(&self) -> f64 {
        let n = self.upper.n;
        let norm_of = |x: &[f64]| x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut best = 0.0f64;
        let mut ones = vec![1.0; n];
        self.solve(&mut ones);
        best = best.max(norm_of(&ones));
        let mut signs: Vec<f64> = ones.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
        self.solve(&mut signs);
        best = best.max(norm_of(&signs));
        let mut alt: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        self.solve(&mut alt);
        best = best.max(norm_of(&alt));
        best * self.norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
            a.swap(k, p);
            b.swap(k, p);
            for i in k + 1..n {
                let m = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= m * a[k][j];
                }
                b[i] -= m * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
            x[k] = (b[k] - s) / a[k][k];
        }
        x
    }

    #[test]
    fn matches_dense_elimination() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(n, kl, ku) in &[(1, 0, 0), (6, 1, 1), (20, 3, 2), (30, 0, 4), (25, 5, 0)] {
            let mut band = BandMatrix::new(n, kl, ku);
            let mut dense = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                    let v: f64 = rng.random_range(-1.0..1.0) + if i == j { 0.1 } else { 0.0 };
                    band.add(i, j, v);
                    dense[i][j] = v;
                }
            }
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let expect = dense_solve(dense, b.clone());
            let lu = band.factor().unwrap();
            let mut x = b;
            lu.solve(&mut x);
            for (a, e) in x.iter().zip(&expect) {
                assert!((a - e).abs() <= 1e-9 * (1.0 + e.abs()), "{a} vs {e}");
            }
            assert!(lu.condition_estimate() >= 1.0);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut band = BandMatrix::new(3, 1, 1);
        band.add(0, 0, 1.0);
        band.add(1, 0, 1.0);
        band.add(2, 2, 1.0);
        assert_eq!(band.factor().unwrap_err(), 1);
    }
}
