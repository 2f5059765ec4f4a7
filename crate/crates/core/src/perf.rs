//! Speedup laws and the `T_P ≈ αn³/s² + βn²/s + γn` execution-time model.

use serde::{Deserialize, Serialize};

use crate::dense::{serial_least_squares, DenseMatrix};
use crate::error::{Error, Result};

/// A problem of size `n` on `p` processors whose serial fraction obeys
/// `f ≤ k/n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingScenario {
    pub f: f64,
    pub k: f64,
    pub n: f64,
    pub p: f64,
}

fn check_fraction(f: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::InvalidArgument(format!("serial fraction {f} outside [0, 1]")));
    }
    Ok(())
}

fn check_procs(p: f64) -> Result<()> {
    // NaN fails the comparison too
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("processor count {p} below 1")));
    }
    Ok(())
}

/// `S_P = 1 / (f + (1 − f)/P)`. `p` may be infinite.
pub fn amdahl_speedup(f: f64, p: f64) -> Result<f64> {
    check_fraction(f)?;
    check_procs(p)?;
    Ok(1.0 / (f + (1.0 - f) / p))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaledSpeedup {
    /// `P / (f·P + 1 − f)` for the scenario's own `f`.
    pub speedup: f64,
    /// `P/(2 − f)`, guaranteed whenever `f·P ≤ 1`; never below `P/2`.
    pub lower_bound: f64,
}

/// Speedup of a problem grown with the machine (`N ≥ K·P` and `f ≤ K/N`,
/// hence `f·P ≤ 1`).
pub fn scaled_speedup(sc: &ScalingScenario) -> Result<ScaledSpeedup> {
    check_fraction(sc.f)?;
    check_procs(sc.p)?;
    if !(sc.k > 0.0 && sc.n > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "scaling constant {} and problem size {} must be positive",
            sc.k, sc.n
        )));
    }
    if sc.n < sc.k * sc.p {
        return Err(Error::OutsideScaledRegime(format!(
            "N = {} is below K·P = {}",
            sc.n,
            sc.k * sc.p
        )));
    }
    if sc.f > sc.k / sc.n {
        return Err(Error::OutsideScaledRegime(format!(
            "serial fraction {} exceeds K/N = {}",
            sc.f,
            sc.k / sc.n
        )));
    }
    Ok(ScaledSpeedup {
        speedup: sc.p / (sc.f * sc.p + 1.0 - sc.f),
        lower_bound: sc.p / (2.0 - sc.f),
    })
}

/// `S_p / ⌈p/P⌉`: what `p` virtual processors guarantee on `P` real ones.
pub fn virtual_speedup_bound(s_virtual: f64, p_virtual: u64, p_real: u64) -> Result<f64> {
    if p_real == 0 || p_virtual < p_real {
        return Err(Error::InvalidArgument(format!(
            "need p ≥ P ≥ 1, got p = {p_virtual}, P = {p_real}"
        )));
    }
    Ok(s_virtual / p_virtual.div_ceil(p_real) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostModelParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl CostModelParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let p = Self { alpha, beta, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !(ok(self.alpha) && ok(self.beta) && ok(self.gamma)) {
            return Err(Error::InvalidArgument(format!("cost parameters must be finite and nonnegative: {self:?}")));
        }
        Ok(())
    }

    /// Communication against computation speed, `β/α`.
    pub fn beta_bar(&self) -> f64 {
        self.beta / self.alpha
    }

    /// Weight of message startup, `γ/β`.
    pub fn gamma_bar(&self) -> f64 {
        self.gamma / self.beta
    }
}

/// Rows (or columns) per processor, `n/s`.
pub fn n_bar(n: f64, s: f64) -> f64 {
    n / s
}

pub fn predict_time(params: &CostModelParams, n: f64, s: f64) -> f64 {
    params.alpha * n.powi(3) / (s * s) + params.beta * n * n / s + params.gamma * n
}

/// `T_1 = αn³`.
pub fn serial_time(params: &CostModelParams, n: f64) -> f64 {
    params.alpha * n.powi(3)
}

/// `E_P = 1 / (1 + (1 + γ̄/n̄)·β̄/n̄)`. With `β = 0` the ratio `γ̄` is undefined
/// and the algebraically equal form `1 / (1 + γs²/(αn²))` is used.
pub fn predict_efficiency(params: &CostModelParams, n: f64, s: f64) -> f64 {
    let nb = n_bar(n, s);
    if params.beta == 0.0 {
        return 1.0 / (1.0 + params.gamma / (params.alpha * nb * nb));
    }
    1.0 / (1.0 + (1.0 + params.gamma_bar() / nb) * params.beta_bar() / nb)
}

/// One measured run: problem order `n`, grid side `s`, measured time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Run {
    pub n: usize,
    pub s: usize,
    pub time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub params: CostModelParams,
    /// Some coefficient came out negative and was pinned to zero.
    pub clamped: bool,
    /// `(predicted − measured)/measured` per run.
    pub relative_residuals: Vec<f64>,
    pub max_relative_residual: f64,
    pub rms_relative_residual: f64,
}

fn basis(n: f64, s: f64) -> [f64; 3] {
    [n.powi(3) / (s * s), n * n / s, n]
}

fn distinct(values: impl Iterator<Item = usize>) -> usize {
    let mut v: Vec<usize> = values.collect();
    v.sort_unstable();
    v.dedup();
    v.len()
}

/// Unweighted least squares over the active basis columns; columns are scaled
/// to unit norm first so that `n³/s²` does not swamp `n`.
fn solve_active(runs: &[Run], active: &[usize]) -> Result<Vec<f64>> {
    let rows: Vec<[f64; 3]> = runs.iter().map(|r| basis(r.n as f64, r.s as f64)).collect();
    let scale: Vec<f64> = active
        .iter()
        .map(|&c| rows.iter().map(|b| b[c] * b[c]).sum::<f64>().sqrt())
        .collect();
    let a = DenseMatrix::from_fn(runs.len(), active.len(), |i, k| rows[i][active[k]] / scale[k]);
    let t: Vec<f64> = runs.iter().map(|r| r.time).collect();
    let x = serial_least_squares(&a, &t).map_err(|e| match e {
        Error::RankDeficient { step } => Error::DegenerateDesign(format!(
            "basis column {} is collinear with the others over these runs",
            ["n³/s²", "n²/s", "n"][active[step]]
        )),
        other => other,
    })?;
    Ok(x.iter().zip(&scale).map(|(v, s)| v / s).collect())
}

pub fn fit_params(runs: &[Run]) -> Result<FitReport> {
    if runs.len() < 3 {
        return Err(Error::DegenerateDesign(format!("need at least 3 runs, got {}", runs.len())));
    }
    if distinct(runs.iter().map(|r| r.n)) < 2 || distinct(runs.iter().map(|r| r.s)) < 2 {
        return Err(Error::DegenerateDesign(
            "runs must span at least two problem sizes and two grid sides".into(),
        ));
    }
    if let Some(r) = runs.iter().find(|r| r.n == 0 || r.s == 0 || !r.time.is_finite()) {
        return Err(Error::InvalidArgument(format!("invalid run {r:?}")));
    }
    let mut active = vec![0, 1, 2];
    let mut clamped = false;
    let coef = loop {
        let x = solve_active(runs, &active)?;
        match x.iter().position(|v| *v < 0.0) {
            Some(_) if active.len() > 1 => {
                // drop the most negative coefficient and refit
                let worst = (0..x.len()).min_by(|&a, &b| x[a].total_cmp(&x[b])).expect("nonempty");
                active.remove(worst);
                clamped = true;
            }
            _ => break x,
        }
    };
    let mut full = [0.0; 3];
    for (k, &c) in active.iter().enumerate() {
        full[c] = coef[k].max(0.0);
    }
    let params = CostModelParams {
        alpha: full[0],
        beta: full[1],
        gamma: full[2],
    };
    let relative_residuals: Vec<f64> = runs
        .iter()
        .map(|r| (predict_time(&params, r.n as f64, r.s as f64) - r.time) / r.time)
        .collect();
    let max_relative_residual = relative_residuals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rms_relative_residual =
        (relative_residuals.iter().map(|v| v * v).sum::<f64>() / runs.len() as f64).sqrt();
    Ok(FitReport {
        params,
        clamped,
        relative_residuals,
        max_relative_residual,
        rms_relative_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs())
    }

    #[test]
    fn amdahl_examples() {
        assert_eq!(amdahl_speedup(0.0, 16.0).unwrap(), 16.0);
        assert_eq!(amdahl_speedup(1.0, 16.0).unwrap(), 1.0);
        assert!(close(amdahl_speedup(0.1, f64::INFINITY).unwrap(), 10.0, 1e-15));
        assert!(amdahl_speedup(1.5, 2.0).is_err());
        assert!(amdahl_speedup(0.5, 0.5).is_err());
    }

    #[test]
    fn scaled_examples() {
        let at = |f, k, n, p| scaled_speedup(&ScalingScenario { f, k, n, p });
        // f·P = 1: the bound is attained
        let s = at(0.125, 1.0, 8.0, 8.0).unwrap();
        assert_eq!(s.speedup, 8.0 / (2.0 - 0.125));
        assert_eq!(s.lower_bound, s.speedup);
        let s = at(0.0, 2.0, 100.0, 10.0).unwrap();
        assert_eq!(s.speedup, 10.0);
        assert_eq!(s.lower_bound, 5.0);
        let s = at(0.25, 1.0, 4.0, 4.0).unwrap();
        assert!(close(s.lower_bound, 4.0 / 1.75, 1e-15) && s.lower_bound >= 2.0);
        assert!(matches!(at(0.1, 1.0, 3.0, 4.0), Err(Error::OutsideScaledRegime(_))));
        assert!(matches!(at(0.5, 1.0, 4.0, 4.0), Err(Error::OutsideScaledRegime(_))));
    }

    #[test]
    fn virtual_examples() {
        assert_eq!(virtual_speedup_bound(7.5, 4, 4).unwrap(), 7.5);
        assert_eq!(virtual_speedup_bound(8.0, 8, 2).unwrap(), 2.0);
        assert_eq!(virtual_speedup_bound(10.0, 5, 2).unwrap(), 10.0 / 3.0);
        assert!(virtual_speedup_bound(1.0, 2, 4).is_err());
        assert!(virtual_speedup_bound(1.0, 2, 0).is_err());
    }

    #[test]
    fn efficiency_examples() {
        let p = CostModelParams::new(2.0, 0.0, 0.0).unwrap();
        assert_eq!(predict_efficiency(&p, 100.0, 4.0), 1.0);
        // β̄ = 1, γ̄ = 0, n̄ = 10
        let p = CostModelParams::new(1.0, 1.0, 0.0).unwrap();
        assert!(close(predict_efficiency(&p, 40.0, 4.0), 10.0 / 11.0, 1e-15));
        let p = CostModelParams::new(1.5, 0.5, 3.0).unwrap();
        assert_eq!(predict_time(&p, 7.0, 1.0), 1.5 * 343.0 + 0.5 * 49.0 + 3.0 * 7.0);
        let e1 = predict_efficiency(&p, 7.0, 1.0);
        assert!(close(e1, serial_time(&p, 7.0) / predict_time(&p, 7.0, 1.0), 1e-12));
    }

    #[test]
    fn fit_recovers_exact_parameters() {
        let truth = CostModelParams::new(1.25, 37.0, 410.0).unwrap();
        let runs: Vec<Run> = [(64, 2), (96, 2), (128, 4), (192, 4), (80, 3)]
            .iter()
            .map(|&(n, s)| Run { n, s, time: predict_time(&truth, n as f64, s as f64) })
            .collect();
        let fit = fit_params(&runs).unwrap();
        assert!(!fit.clamped);
        assert!(close(fit.params.alpha, truth.alpha, 1e-9));
        assert!(close(fit.params.beta, truth.beta, 1e-9));
        assert!(close(fit.params.gamma, truth.gamma, 1e-9));
        assert!(fit.max_relative_residual < 1e-12);
    }

    #[test]
    fn fit_rejects_thin_designs() {
        let r = |n, s, time| Run { n, s, time };
        assert!(matches!(fit_params(&[r(8, 2, 1.0), r(16, 4, 2.0)]), Err(Error::DegenerateDesign(_))));
        assert!(matches!(
            fit_params(&[r(8, 2, 1.0), r(16, 2, 2.0), r(32, 2, 3.0)]),
            Err(Error::DegenerateDesign(_))
        ));
        // three runs along n ∝ s make n³/s² and n collinear
        assert!(matches!(
            fit_params(&[r(8, 1, 1.0), r(16, 2, 2.0), r(32, 4, 3.0)]),
            Err(Error::DegenerateDesign(_))
        ));
    }

    #[test]
    fn fit_clamps_negative_terms() {
        // pure cubic data plus a downward bump that wants γ < 0
        let runs: Vec<Run> = [(10, 1), (20, 1), (30, 2), (40, 4), (60, 3)]
            .iter()
            .map(|&(n, s)| {
                let (n, s) = (n as f64, s as f64);
                Run { n: n as usize, s: s as usize, time: n.powi(3) / (s * s) - 5.0 * n }
            })
            .collect();
        let fit = fit_params(&runs).unwrap();
        assert!(fit.clamped);
        assert!(fit.params.alpha > 0.0 && fit.params.beta >= 0.0 && fit.params.gamma >= 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn amdahl_bounded_and_monotone(f in 0.0f64..=1.0, p in 1.0f64..1e6, dp in 0.0f64..1e3) {
            let s = amdahl_speedup(f, p).unwrap();
            prop_assert!(s <= p * (1.0 + 1e-12));
            if f > 0.0 {
                prop_assert!(s <= (1.0 / f) * (1.0 + 1e-12));
            }
            prop_assert!(amdahl_speedup(f, p + dp).unwrap() >= s * (1.0 - 1e-12));
        }

        #[test]
        fn scaled_speedup_dominates_half(k in 0.1f64..10.0, p in 1.0f64..1e4, grow in 1.0f64..10.0, u in 0.0f64..=1.0) {
            let n = k * p * grow;
            let f = u * k / n;
            let s = scaled_speedup(&ScalingScenario { f, k, n, p }).unwrap();
            prop_assert!(close(s.speedup, amdahl_speedup(f, p).unwrap(), 1e-12));
            prop_assert!(s.speedup >= s.lower_bound * (1.0 - 1e-12));
            prop_assert!(s.lower_bound >= p / 2.0 * (1.0 - 1e-12));
        }

        #[test]
        fn efficiency_in_unit_interval(a in 1e-3f64..10.0, b in 1e-3f64..100.0, g in 1e-3f64..1e3,
                                       n in 1.0f64..1e4, s in 1.0f64..64.0) {
            let p = CostModelParams::new(a, b, g).unwrap();
            let e = predict_efficiency(&p, n, s);
            prop_assert!(e > 0.0 && e <= 1.0);
            prop_assert!(predict_efficiency(&p, n * 1.5, s) > e);
            let direct = serial_time(&p, n) / (s * s * predict_time(&p, n, s));
            prop_assert!(close(e, direct, 1e-12));
        }
    }
}
