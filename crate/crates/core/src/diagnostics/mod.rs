//! Cross-chain convergence and significance statistics: Gelman-Rubin,
//! the two-sided one-sample t-test, and the ensemble summary report.

pub mod student_t;

use serde::{Deserialize, Serialize};

use crate::chain::EntropyTrace;
use crate::error::{Error, Result};

/// R below this is taken as converged.
pub const CONVERGENCE_THRESHOLD: f64 = 1.2;

/// p-values below this floor print as "<2.2e-16" and serialize as 0.
pub const P_VALUE_FLOOR: f64 = 2.2e-16;

/// m chains by n retained observations.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceMatrix {
    rows: Vec<Vec<f64>>,
}

impl TraceMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::Contract(format!(
                "trace matrix needs at least 2 chains, got {}",
                rows.len()
            )));
        }
        let n = rows[0].len();
        if n < 2 {
            return Err(Error::Contract(format!(
                "trace matrix needs at least 2 observations per chain, got {n}"
            )));
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Contract("trace matrix rows differ in length".into()));
        }
        Ok(TraceMatrix { rows })
    }

    pub fn from_traces(traces: &[EntropyTrace]) -> Result<Self> {
        TraceMatrix::new(traces.iter().map(|t| t.values.clone()).collect())
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn n(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the n − 1 divisor.
fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Gelman-Rubin statistic R = V̂/W with
/// W the mean within-chain sample variance and
/// V̂ = W(n−1)/n + Σᵢ(X̄ᵢ − X̄)²/(m−1).
///
/// Reported without the square root; chains with R below
/// [`CONVERGENCE_THRESHOLD`] are considered converged.
pub fn gelman_rubin(x: &TraceMatrix) -> Result<f64> {
    let m = x.m() as f64;
    let n = x.n() as f64;
    let chain_means: Vec<f64> = x.rows().iter().map(|r| mean(r)).collect();
    let w = x.rows().iter().map(|r| sample_variance(r)).sum::<f64>() / m;
    if w == 0.0 {
        return Err(Error::DegenerateVariance(
            "all chains are constant; within-chain variance is zero".into(),
        ));
    }
    let grand = mean(&chain_means);
    let between = chain_means
        .iter()
        .map(|cm| (cm - grand) * (cm - grand))
        .sum::<f64>()
        / (m - 1.0);
    let v_hat = w * (n - 1.0) / n + between;
    Ok(v_hat / w)
}

/// Two-sided one-sample t-test of `values` against `baseline`:
/// t = (mean − baseline)/(s/√N), p from Student's t with N−1 dof.
pub fn one_sample_t_test(values: &[f64], baseline: f64) -> Result<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return Err(Error::Contract(format!(
            "t-test needs at least 2 values, got {n}"
        )));
    }
    let s = sample_variance(values).sqrt();
    if s == 0.0 {
        return Err(Error::DegenerateVariance(
            "sample standard deviation is zero".into(),
        ));
    }
    let t = (mean(values) - baseline) / (s / (n as f64).sqrt());
    let p = student_t::two_sided_p(t, (n - 1) as f64);
    Ok((t, p))
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    debug_assert!(!values.is_empty());
    debug_assert!((0.0..=1.0).contains(&q));
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaNs in entropy traces"));
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Machine-readable p: values under the floor serialize as 0.
pub fn machine_p(p: f64) -> f64 {
    if p < P_VALUE_FLOOR {
        0.0
    } else {
        p
    }
}

/// Human-readable p, using the "<2.2e-16" convention below the floor.
pub fn format_p(p: f64) -> String {
    if p < P_VALUE_FLOOR {
        "<2.2e-16".to_string()
    } else {
        format!("{p:.6e}")
    }
}

/// Start/end compactness audit values across an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompactnessAudit {
    pub seed_min: f64,
    pub seed_mean: f64,
    /// Worst per-chain end-of-chain minimum.
    pub end_min: f64,
    /// Mean over chains of the end-of-chain mean.
    pub end_mean: f64,
    /// True iff no chain ended below the seed map's minimum.
    pub pass: bool,
}

impl CompactnessAudit {
    /// Aggregate per-chain end audits against the seed audit. Passing means
    /// no chain's final minimum dropped below the seed minimum.
    pub fn from_ends(seed: (f64, f64), ends: &[(f64, f64)]) -> Self {
        let end_min = ends.iter().map(|e| e.0).fold(f64::INFINITY, f64::min);
        let end_mean = ends.iter().map(|e| e.1).sum::<f64>() / ends.len().max(1) as f64;
        CompactnessAudit {
            seed_min: seed.0,
            seed_mean: seed.1,
            end_min,
            end_mean,
            pass: ends.iter().all(|e| e.0 >= seed.0),
        }
    }
}

/// Per-region summary: baseline vs ensemble, significance, convergence,
/// compactness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub baseline: f64,
    pub ensemble_mean: f64,
    pub abs_difference: f64,
    pub t_value: f64,
    /// Machine-readable p (0.0 below the reporting floor).
    pub p_value: f64,
    /// Human-readable p ("<2.2e-16" below the floor).
    pub p_display: String,
    /// R = V̂/W; absent for single-chain runs.
    pub r_hat: Option<f64>,
    /// √R, the common scale-reduction form, for comparison.
    pub sqrt_r_hat: Option<f64>,
    pub converged: Option<bool>,
    pub n_samples: usize,
    pub n_chains: usize,
    /// Per-chain means, for equilibrium inspection when R stays high.
    pub per_chain_means: Vec<f64>,
    pub compactness: Option<CompactnessAudit>,
}

/// Pool every chain's values and build the report. R-hat is omitted (with
/// `None`) when only one chain ran.
pub fn summarize(
    traces: &[EntropyTrace],
    baseline: f64,
    compactness: Option<CompactnessAudit>,
) -> Result<EnsembleReport> {
    if traces.is_empty() {
        return Err(Error::Contract("summarize: no traces".into()));
    }
    let pooled: Vec<f64> = traces.iter().flat_map(|t| t.values.iter().copied()).collect();
    let ensemble_mean = mean(&pooled);
    let (t_value, p) = one_sample_t_test(&pooled, baseline)?;
    let (r_hat, sqrt_r_hat, converged) = if traces.len() >= 2 {
        let r = gelman_rubin(&TraceMatrix::from_traces(traces)?)?;
        (Some(r), Some(r.sqrt()), Some(r < CONVERGENCE_THRESHOLD))
    } else {
        (None, None, None)
    };
    Ok(EnsembleReport {
        baseline,
        ensemble_mean,
        abs_difference: (baseline - ensemble_mean).abs(),
        t_value,
        p_value: machine_p(p),
        p_display: format_p(p),
        r_hat,
        sqrt_r_hat,
        converged,
        n_samples: pooled.len(),
        n_chains: traces.len(),
        per_chain_means: traces.iter().map(|t| mean(&t.values)).collect(),
        compactness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(id: u32, values: Vec<f64>) -> EntropyTrace {
        EntropyTrace {
            chain_id: id,
            seed: 0,
            values,
            accept_count: 0,
            reject_count: 0,
        }
    }

    #[test]
    fn gelman_rubin_hand_case() {
        // Chains [1,2,3] and [2,3,4]: W = 1, V̂ = 2/3 + 1/2 = 7/6.
        let x = TraceMatrix::new(vec![vec![1.0, 2.0, 3.0], vec![2.0, 3.0, 4.0]]).unwrap();
        let r = gelman_rubin(&x).unwrap();
        assert!((r - 7.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn identical_chains_give_r_below_one() {
        let row = vec![0.5, 0.7, 0.4, 0.9];
        let x = TraceMatrix::new(vec![row.clone(), row.clone(), row]).unwrap();
        let r = gelman_rubin(&x).unwrap();
        // Between-chain term vanishes: R = (n−1)/n.
        assert!((r - 0.75).abs() < 1e-12);
        assert!(r < 1.0);
    }

    #[test]
    fn r_hat_is_shift_invariant_and_scale_stable() {
        let rows = vec![vec![0.11, 0.52, 0.33, 0.78], vec![0.42, 0.13, 0.64, 0.25]];
        let base = gelman_rubin(&TraceMatrix::new(rows.clone()).unwrap()).unwrap();
        // Adding a constant leaves W and the between-chain term unchanged.
        let shifted: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().map(|x| x + 3.5).collect())
            .collect();
        let r_shift = gelman_rubin(&TraceMatrix::new(shifted).unwrap()).unwrap();
        assert!((base - r_shift).abs() < 1e-12);
        // Multiplying scales V̂ and W by c², so R is unchanged.
        let scaled: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().map(|x| x * 7.25).collect())
            .collect();
        let r_scale = gelman_rubin(&TraceMatrix::new(scaled).unwrap()).unwrap();
        assert!((base - r_scale).abs() < 1e-12);
    }

    #[test]
    fn constant_chains_are_degenerate() {
        let x = TraceMatrix::new(vec![vec![0.0; 4], vec![1.0; 4]]).unwrap();
        assert!(matches!(
            gelman_rubin(&x),
            Err(Error::DegenerateVariance(_))
        ));
    }

    #[test]
    fn matrix_shape_contracts() {
        assert!(TraceMatrix::new(vec![vec![1.0, 2.0]]).is_err());
        assert!(TraceMatrix::new(vec![vec![1.0], vec![2.0]]).is_err());
        assert!(TraceMatrix::new(vec![vec![1.0, 2.0], vec![2.0]]).is_err());
    }

    #[test]
    fn t_test_mean_equal_to_baseline() {
        // Exact-mean case, up to accumulation order in the mean.
        let (t, p) = one_sample_t_test(&[0.1, 0.2, 0.3], 0.2).unwrap();
        assert!(t.abs() < 1e-12);
        assert!(p > 1.0 - 1e-12);
        let (t, p) = one_sample_t_test(&[1.0, 2.0, 3.0], 2.0).unwrap();
        assert_eq!(t, 0.0);
        assert_eq!(p, 1.0);
    }

    #[test]
    fn t_test_derived_fixture() {
        // [1..5] vs 0: t = 3/(√2.5/√5) = 3√2; p from ν = 4.
        let (t, p) = one_sample_t_test(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.0).unwrap();
        assert!((t - 4.242640687119285).abs() < 1e-12);
        assert!((p - 0.013235599563683).abs() < 1e-9);
    }

    #[test]
    fn t_is_antisymmetric_in_deviations() {
        let values = [1.0, 2.0, 4.0, 8.0];
        let m = values.iter().sum::<f64>() / 4.0;
        let flipped: Vec<f64> = values.iter().map(|v| 2.0 * m - v).collect();
        let (t1, p1) = one_sample_t_test(&values, 0.5).unwrap();
        let (t2, p2) = one_sample_t_test(&flipped, 2.0 * m - 0.5).unwrap();
        assert!((t1 + t2).abs() < 1e-12);
        assert!((p1 - p2).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_t_test_is_degenerate() {
        assert!(matches!(
            one_sample_t_test(&[0.3, 0.3, 0.3], 0.1),
            Err(Error::DegenerateVariance(_))
        ));
    }

    #[test]
    fn p_floor_convention() {
        assert_eq!(format_p(1e-17), "<2.2e-16");
        assert_eq!(machine_p(1e-17), 0.0);
        assert_eq!(machine_p(0.5), 0.5);
        assert!(format_p(0.0123).starts_with("1.23"));
    }

    #[test]
    fn summarize_single_chain_omits_r_hat() {
        let report = summarize(&[trace(0, vec![0.2, 0.3, 0.25])], 0.4, None).unwrap();
        assert!(report.r_hat.is_none());
        assert!(report.converged.is_none());
        assert!(report.t_value < 0.0);
        assert_eq!(report.n_samples, 3);
    }

    #[test]
    fn summarize_pools_across_chains() {
        let t0 = trace(0, vec![0.10, 0.12, 0.14]);
        let t1 = trace(1, vec![0.11, 0.13, 0.15]);
        let report = summarize(&[t0, t1], 0.2, None).unwrap();
        assert_eq!(report.n_samples, 6);
        assert!((report.ensemble_mean - 0.125).abs() < 1e-12);
        assert!((report.abs_difference - 0.075).abs() < 1e-12);
        assert_eq!(report.per_chain_means.len(), 2);
        assert!(report.r_hat.is_some());
    }

    #[test]
    fn abs_difference_zero_when_mean_equals_baseline() {
        let t0 = trace(0, vec![0.1, 0.3]);
        let t1 = trace(1, vec![0.3, 0.1]);
        let report = summarize(&[t0, t1], 0.2, None).unwrap();
        // Pooled mean = 0.2 = baseline → t = 0, AD = 0 up to summation order.
        assert!(report.abs_difference < 1e-15);
        assert!(report.t_value.abs() < 1e-12);
    }

    #[test]
    fn compactness_pass_rule() {
        let audit = CompactnessAudit::from_ends((0.5, 0.7), &[(0.55, 0.7), (0.6, 0.72)]);
        assert!(audit.pass);
        assert_eq!(audit.end_min, 0.55);
        let failing = CompactnessAudit::from_ends((0.5, 0.7), &[(0.45, 0.7)]);
        assert!(!failing.pass);
    }
}
