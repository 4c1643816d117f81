//! Checks of the two sufficient conditions on a mask table (bounded phase
//! differences and summable weighted spectrum bounds) and the per-level
//! localization experiment.

use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::localization::uc_pair_for_level;
use crate::mask::{pow2, KnotValues, PeriodicMaskTable, ThetaTable};
use crate::product::{fmt_sig, product_bounds, LiftedFamily};

/// Ratios of consecutive `C_j` below this count as bounded.
const BOUNDED_RATIO: f64 = 1.25;
/// Ratios at or above this count as growing.
const GROWING_RATIO: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DifferenceVerdict {
    Holds,
    LikelyUnbounded,
    Inconclusive,
}

impl DifferenceVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Holds => "holds",
            Self::LikelyUnbounded => "likely-unbounded",
            Self::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferenceReport {
    /// `(j, C_j)` with `C_j = max_k 2^j |theta^j_{k+1} - theta^j_k|` over one period.
    pub levels: Vec<(u32, f64)>,
    pub sup: f64,
    pub verdict: DifferenceVerdict,
}

impl DifferenceReport {
    pub fn at(&self, j: u32) -> Option<f64> {
        self.levels.iter().find(|(l, _)| *l == j).map(|(_, c)| *c)
    }
}

pub fn check_divided_difference(theta: &ThetaTable) -> DifferenceReport {
    let levels: Vec<(u32, f64)> = (theta.j_min()..=theta.j_max())
        .filter_map(|j| theta.level(j).map(|t| (j, t)))
        .map(|(j, t)| {
            let n = t.len();
            let c = (0..n)
                .map(|k| (t[(k + 1) % n] - t[k]).abs())
                .fold(0.0, f64::max);
            (j, c * pow2(j as i32))
        })
        .collect();
    let sup = levels.iter().map(|l| l.1).fold(0.0, f64::max);
    let verdict = match levels.len() {
        0 | 1 => DifferenceVerdict::Inconclusive,
        n => {
            let (a, b) = (levels[n - 2].1, levels[n - 1].1);
            let r = if a > 0.0 { b / a } else if b > 0.0 { f64::INFINITY } else { 1.0 };
            if r < BOUNDED_RATIO {
                DifferenceVerdict::Holds
            } else if r >= GROWING_RATIO {
                DifferenceVerdict::LikelyUnbounded
            } else {
                DifferenceVerdict::Inconclusive
            }
        }
    };
    DifferenceReport { levels, sup, verdict }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesVerdict {
    LikelyConvergent,
    LikelyDivergent,
    Inconclusive,
}

impl SeriesVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::LikelyConvergent => "likely-convergent",
            Self::LikelyDivergent => "likely-divergent",
            Self::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSumLevel {
    pub level: u32,
    /// `(N, S^j_N)` with `S^j_N = sum_{|k| <= N} |k b^j_k|`.
    pub ladder: Vec<(usize, f64)>,
    pub increments: Vec<f64>,
    pub limit_estimate: Option<f64>,
    /// `4^{-j} S`, a Riemann sum of `int |xi| b_j(xi) dxi`.
    pub normalized_limit: Option<f64>,
    pub verdict: SeriesVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSumReport {
    pub levels: Vec<WeightedSumLevel>,
    pub verdict: SeriesVerdict,
    /// Largest limit estimate over the levels, a finite-range stand-in for the
    /// uniform bound in `j`.
    pub uniform_bound: Option<f64>,
    pub normalized_bound: Option<f64>,
    pub note: String,
}

fn series_level<N: KnotValues + ?Sized>(src: &N, j: u32, base: usize) -> Result<WeightedSumLevel> {
    let far = 4 * base as i64;
    // interval k covers [k, k + 1) 2^{-j}; |k b_k| summed over k = -far..=far
    let b = product_bounds(src, j, -far, far, 1e-12)?;
    let ladder: Vec<(usize, f64)> = [base, 2 * base, 4 * base]
        .iter()
        .map(|&n| {
            let n = n as i64;
            let s: f64 = (-n..=n).map(|k| (k as f64 * b.b(k)).abs()).sum();
            (n as usize, s)
        })
        .collect();
    let increments: Vec<f64> = ladder.windows(2).map(|w| w[1].1 - w[0].1).collect();
    let (d0, d1) = (increments[0], increments[1]);
    let verdict = if d1 == 0.0 || (d0 > 0.0 && d1 / d0 < 0.5) {
        SeriesVerdict::LikelyConvergent
    } else if d1 >= d0 {
        SeriesVerdict::LikelyDivergent
    } else {
        SeriesVerdict::Inconclusive
    };
    let last = ladder[2].1;
    let limit_estimate = match verdict {
        SeriesVerdict::LikelyConvergent if d1 == 0.0 => Some(last),
        // geometric tail with the observed ratio
        SeriesVerdict::LikelyConvergent => Some(last + d1 * (d1 / d0) / (1.0 - d1 / d0)),
        _ => None,
    };
    Ok(WeightedSumLevel {
        level: j,
        ladder,
        increments,
        limit_estimate,
        normalized_limit: limit_estimate.map(|s| s * pow2(-2 * j as i32)),
        verdict,
    })
}

/// `S^j_N` over the ladder `N, 2N, 4N` for each level, `N = 2^j` by default.
pub fn check_weighted_sum<N: KnotValues + ?Sized>(
    src: &N,
    levels: RangeInclusive<u32>,
    base: Option<usize>,
) -> Result<WeightedSumReport> {
    let levels: Vec<WeightedSumLevel> = levels
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|j| series_level(src, j, base.unwrap_or(1 << j).max(1)))
        .collect::<Result<_>>()?;
    let verdict = if levels.is_empty() {
        SeriesVerdict::Inconclusive
    } else if levels.iter().any(|l| l.verdict == SeriesVerdict::LikelyDivergent) {
        SeriesVerdict::LikelyDivergent
    } else if levels.iter().all(|l| l.verdict == SeriesVerdict::LikelyConvergent) {
        SeriesVerdict::LikelyConvergent
    } else {
        SeriesVerdict::Inconclusive
    };
    let bound = |f: fn(&WeightedSumLevel) -> Option<f64>| {
        (verdict == SeriesVerdict::LikelyConvergent)
            .then(|| levels.iter().filter_map(f).fold(0.0, f64::max))
    };
    let uniform_bound = bound(|l| l.limit_estimate);
    let normalized_bound = bound(|l| l.normalized_limit);
    Ok(WeightedSumReport {
        levels,
        verdict,
        uniform_bound,
        normalized_bound,
        note: "uniformity in j is checked only over the computed levels; raw sums grow like 4^j, \
               normalized sums 4^-j S are the bounded proxy"
            .into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub j: u32,
    pub cond2_cj: f64,
    pub cond1_verdict: SeriesVerdict,
    pub s_limit_est: Option<f64>,
    pub uc_b: f64,
    pub var_a: f64,
    pub var_f: f64,
    pub uc_h: f64,
    pub time_var: f64,
    pub freq_var: f64,
    pub uc_h_error_budget: f64,
    pub gap: Option<f64>,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub order: u32,
    pub exploratory: bool,
    pub span: f64,
    pub tol: f64,
    pub rows: Vec<ExperimentRow>,
    pub divided_difference: DifferenceReport,
    pub weighted_sum: WeightedSumReport,
}

pub const EXPERIMENT_HEADER: &str = "j,cond2_Cj,cond1_verdict,S_limit_est,uc_b,uc_h,gap,flags";
pub const UC_HEADER: &str = "j,uc_b,var_a,var_f,uc_h,time_var,freq_var,gap,flags";

fn opt(x: Option<f64>, sig: usize) -> String {
    x.map_or(String::new(), |v| fmt_sig(v, sig))
}

impl ExperimentReport {
    pub fn gaps(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.gap).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{EXPERIMENT_HEADER}\n");
        for r in &self.rows {
            out += &format!(
                "{},{},{},{},{},{},{},{}\n",
                r.j,
                fmt_sig(r.cond2_cj, 12),
                r.cond1_verdict.as_str(),
                opt(r.s_limit_est, 12),
                fmt_sig(r.uc_b, 12),
                fmt_sig(r.uc_h, 12),
                opt(r.gap, 12),
                r.flags.join(";")
            );
        }
        out
    }

    pub fn uc_csv(&self) -> String {
        let mut out = format!("{UC_HEADER}\n");
        for r in &self.rows {
            out += &uc_row(r.j, r.uc_b, r.var_a, r.var_f, r.uc_h, r.time_var, r.freq_var, r.gap, &r.flags);
        }
        out
    }
}

/// One line of the UC table.
#[allow(clippy::too_many_arguments)]
pub fn uc_row(
    j: u32,
    uc_b: f64,
    var_a: f64,
    var_f: f64,
    uc_h: f64,
    time_var: f64,
    freq_var: f64,
    gap: Option<f64>,
    flags: &[String],
) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}\n",
        j,
        fmt_sig(uc_b, 12),
        fmt_sig(var_a, 12),
        fmt_sig(var_f, 12),
        fmt_sig(uc_h, 12),
        fmt_sig(time_var, 12),
        fmt_sig(freq_var, 12),
        opt(gap, 12),
        flags.join(";")
    )
}

/// Condition verdicts and uncertainty constants per level. `cutoff` is the
/// periodic coefficient cutoff (default `span 2^j`), `base` the first rung of
/// the weighted-sum ladder (default `2^j`).
pub fn run_adjustment_experiment(
    table: &PeriodicMaskTable,
    order: u32,
    levels: RangeInclusive<u32>,
    cutoff: Option<usize>,
    base: Option<usize>,
    span: f64,
    tol: f64,
) -> Result<ExperimentReport> {
    let divided_difference = check_divided_difference(&table.theta_of());
    let weighted_sum = check_weighted_sum(table, levels.clone(), base)?;
    if levels.is_empty() {
        return Ok(ExperimentReport {
            order,
            exploratory: order >= 2,
            span,
            tol,
            rows: Vec::new(),
            divided_difference,
            weighted_sum,
        });
    }
    let family = LiftedFamily::new(table, order)?;
    let js: Vec<u32> = levels.collect();
    let pairs = js
        .par_iter()
        .map(|&j| {
            let n = cutoff.unwrap_or((span * pow2(j as i32)).ceil() as usize).max(1);
            uc_pair_for_level(&family, j, n, span, tol)
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = pairs
        .into_iter()
        .zip(&weighted_sum.levels)
        .map(|(p, w)| {
            let mut flags = p.flags.clone();
            if order >= 2 {
                flags.push("EXPLORATORY".into());
            }
            ExperimentRow {
                j: p.level,
                cond2_cj: divided_difference.at(p.level).unwrap_or(f64::NAN),
                cond1_verdict: w.verdict,
                s_limit_est: w.limit_estimate,
                uc_b: p.uc_b.uc_b,
                var_a: p.uc_b.var_a,
                var_f: p.uc_b.var_f,
                uc_h: p.uc_h.uc_h,
                time_var: p.uc_h.time_var,
                freq_var: p.uc_h.freq_var,
                uc_h_error_budget: p.uc_h.error_budget,
                gap: p.gap,
                flags,
            }
        })
        .collect();
    Ok(ExperimentReport {
        order,
        exploratory: order >= 2,
        span,
        tol,
        rows,
        divided_difference,
        weighted_sum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::Family;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    #[test]
    fn haar_differences_are_pi() {
        let t = Family::HaarCos.table(2, 12).unwrap();
        let r = check_divided_difference(&t.theta_of());
        for (_, c) in &r.levels {
            assert_abs_diff_eq!(*c, PI, epsilon = 1e-12);
        }
        assert_eq!(r.verdict, DifferenceVerdict::Holds);
    }

    #[test]
    fn literal_meyer_differences_are_bounded() {
        let t = Family::MeyerSmooth { transition: 1.0 }.table(2, 12).unwrap();
        let r = check_divided_difference(&t.theta_of());
        assert!(r.sup <= 1.5 * PI + 1e-12, "{r:?}");
        assert_eq!(r.verdict, DifferenceVerdict::Holds);
    }

    #[test]
    fn jump_at_quarter_breaks_condition() {
        let levels: Vec<Vec<f64>> = (3..=9u32)
            .map(|j| {
                let (n, half, q) = (1usize << j, 1usize << (j - 1), 1usize << (j - 2));
                (0..n)
                    .map(|k| {
                        let kp = k.min(n - k);
                        match kp.cmp(&q) {
                            std::cmp::Ordering::Less => 0.0,
                            std::cmp::Ordering::Equal => FRAC_PI_4,
                            std::cmp::Ordering::Greater if kp <= half => FRAC_PI_2,
                            _ => unreachable!(),
                        }
                    })
                    .collect()
            })
            .collect();
        let t = PeriodicMaskTable::from_theta(3, levels).unwrap();
        assert!(t.validate(1e-12).valid);
        let r = check_divided_difference(&t.theta_of());
        for (j, c) in &r.levels {
            assert!(*c >= pow2(*j as i32) / 2f64.sqrt(), "{j}: {c}");
        }
        assert_eq!(r.verdict, DifferenceVerdict::LikelyUnbounded);
    }

    #[test]
    fn weighted_sums() {
        let haar = Family::HaarCos.table(2, 10).unwrap();
        let r = check_weighted_sum(&haar, 4..=6, None).unwrap();
        assert_eq!(r.verdict, SeriesVerdict::LikelyDivergent);
        assert!(r.uniform_bound.is_none());
        let meyer = Family::MeyerSmooth { transition: 1.0 / 3.0 }.table(2, 10).unwrap();
        let r = check_weighted_sum(&meyer, 4..=7, None).unwrap();
        assert_eq!(r.verdict, SeriesVerdict::LikelyConvergent);
        for l in &r.levels {
            assert!(l.ladder.windows(2).all(|w| w[1].1 >= w[0].1));
            // only intervals straddling the band edge 2^j/3 keep nonzero bounds
            assert!(l.increments[1] <= 0.05 * l.increments[0], "{l:?}");
        }
        let n: Vec<f64> = r.levels.iter().map(|l| l.normalized_limit.unwrap()).collect();
        assert!(n.iter().all(|&x| x > 0.1 && x < 1.0), "{n:?}");
    }

    #[test]
    fn experiment_rows_and_csv() {
        let t = Family::MeyerSmooth { transition: 1.0 / 3.0 }.table(2, 10).unwrap();
        let r = run_adjustment_experiment(&t, 1, 4..=5, None, None, 2.0, 1e-12).unwrap();
        assert_eq!(r.rows.len(), 2);
        let csv = r.to_csv();
        assert!(csv.starts_with(EXPERIMENT_HEADER));
        assert_eq!(csv.lines().count(), 3);
        assert!(r.uc_csv().starts_with(UC_HEADER));
        #[allow(clippy::reversed_empty_ranges)]
        let empty = run_adjustment_experiment(&t, 1, 5..=4, None, None, 2.0, 1e-12).unwrap();
        assert_eq!(empty.to_csv(), format!("{EXPERIMENT_HEADER}\n"));
        let k2 = run_adjustment_experiment(&t, 2, 4..=4, None, None, 2.0, 1e-12).unwrap();
        assert!(k2.exploratory && k2.rows[0].flags.contains(&"EXPLORATORY".to_string()));
    }
}
