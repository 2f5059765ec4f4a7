//! Benchmark runs: a serializable [`RunSpec`] in, a self-describing
//! [`Report`] out. Reports embed their spec, so any report can be
//! reproduced byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dense::{generate, serial_lu_oracle, DenseMatrix, MatrixKind, NormKind};
use crate::error::{Error, Result};
use crate::fabric::{CostLedger, GridConfig, ProcCounters, Routing};
use crate::jacobi::{hestenes_svd, jacobi_eig, JacobiOptions};
use crate::layout::{Layout, LayoutKind};
use crate::lu::{lu_factor, solve, BlockParams};
use crate::perf::{fit_params, predict_time, FitReport, Run};
use crate::qr::{qr_givens, qr_householder, QrFactorization};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Lu,
    Solve,
    QrHouseholder,
    QrGivens,
    Svd,
    Eig,
}

impl Algorithm {
    fn rectangular(self) -> bool {
        matches!(self, Algorithm::QrHouseholder | Algorithm::QrGivens | Algorithm::Svd)
    }
}

fn default_layout() -> LayoutKind {
    LayoutKind::Scattered
}
fn default_s() -> usize {
    2
}
fn default_routing() -> Routing {
    Routing::Wormhole
}
fn default_c0() -> f64 {
    20.0
}
fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn default_matrix() -> MatrixKind {
    MatrixKind::RandomUniform
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub algorithm: Algorithm,
    pub n: usize,
    /// Row count for rectangular algorithms; defaults to `n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default = "default_layout")]
    pub layout: LayoutKind,
    #[serde(default = "default_s")]
    pub s: usize,
    #[serde(default = "default_routing")]
    pub routing: Routing,
    #[serde(default = "default_c0")]
    pub c0: f64,
    #[serde(default = "one")]
    pub c1: f64,
    #[serde(default = "one")]
    pub tau_f: f64,
    #[serde(default = "one")]
    pub hop_delay: f64,
    #[serde(default = "one_usize")]
    pub virtual_factor: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jacobi: Option<JacobiOptions>,
    #[serde(default = "default_matrix")]
    pub matrix: MatrixKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

impl RunSpec {
    pub fn new(algorithm: Algorithm, n: usize) -> Self {
        Self {
            algorithm,
            n,
            m: None,
            layout: default_layout(),
            s: default_s(),
            routing: default_routing(),
            c0: default_c0(),
            c1: 1.0,
            tau_f: 1.0,
            hop_delay: 1.0,
            virtual_factor: 1,
            omega: None,
            jacobi: None,
            matrix: default_matrix(),
            seed: 0,
            output: None,
        }
    }

    pub fn rows(&self) -> usize {
        self.m.unwrap_or(self.n)
    }

    pub fn grid(&self) -> GridConfig {
        GridConfig::new(self.s)
            .with_costs(self.c0, self.c1, self.tau_f)
            .with_routing(self.routing, self.hop_delay)
            .with_virtual_factor(self.virtual_factor)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if let Some(m) = self.m {
            if !self.algorithm.rectangular() && m != self.n {
                return bad(format!("{:?} needs a square matrix; drop m or set m = n", self.algorithm));
            }
            if m < self.n {
                return bad(format!("m = {m} must be at least n = {}", self.n));
            }
        }
        if self.omega.is_some() && self.algorithm != Algorithm::Lu {
            return bad("omega only applies to lu".into());
        }
        if self.omega == Some(0) {
            return bad("omega must be positive".into());
        }
        if self.jacobi.is_some() && !matches!(self.algorithm, Algorithm::Svd | Algorithm::Eig) {
            return bad("jacobi options only apply to svd and eig".into());
        }
        if let Some(j) = &self.jacobi {
            j.validate().map_err(|e| Error::InvalidSpec(e.to_string()))?;
        }
        if matches!(self.algorithm, Algorithm::Svd | Algorithm::Eig) && self.layout == LayoutKind::RowWrapped {
            return bad("Jacobi methods distribute whole columns; row-wrapped is not supported".into());
        }
        self.grid().validate().map_err(|e| Error::InvalidSpec(e.to_string()))?;
        if let MatrixKind::Band(w) = self.matrix {
            if w >= self.rows().min(self.n) {
                return bad(format!("band width {w} too large for {}x{}", self.rows(), self.n));
            }
        }
        Ok(())
    }

    /// The input matrix this spec describes. Eigen runs symmetrize it.
    pub fn input_matrix(&self) -> Result<DenseMatrix> {
        let a = generate(self.matrix, self.rows(), self.n, self.seed)?;
        if self.algorithm == Algorithm::Eig {
            return Ok(DenseMatrix::from_fn(self.n, self.n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)])));
        }
        Ok(a)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    /// Passes when `value ≤ threshold`.
    fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            passed: value <= threshold,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerSummary {
    pub makespan: f64,
    pub total_flops: u64,
    pub total_words: u64,
    pub total_messages: u64,
    pub procs: Vec<ProcCounters>,
}

impl From<&CostLedger> for LedgerSummary {
    fn from(l: &CostLedger) -> Self {
        Self {
            makespan: l.makespan,
            total_flops: l.total_flops(),
            total_words: l.total_words_sent(),
            total_messages: l.total_messages(),
            procs: l.procs.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub spec: RunSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweeps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ledger: Option<LedgerSummary>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidSpec(format!("unreadable report: {e}")))
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

#[derive(Default)]
struct Outcome {
    metrics: BTreeMap<String, f64>,
    checks: Vec<Check>,
    sweeps: Option<usize>,
    ledger: Option<CostLedger>,
}

impl Outcome {
    fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.into(), value);
    }
}

/// Execute a spec. Invalid specs are errors; numerical failures (singular
/// input, no convergence) produce a report with a failed check instead.
pub fn run_bench(spec: &RunSpec) -> Result<Report> {
    spec.validate()?;
    let a = spec.input_matrix()?;
    let (outcome, error) = match execute(spec, &a) {
        Ok(o) => (o, None),
        Err(e @ (Error::InvalidSpec(_) | Error::InvalidArgument(_))) => return Err(e),
        Err(e) => {
            let mut o = Outcome::default();
            if let Error::SvdNoConvergence { best, .. } = &e {
                o.sweeps = Some(best.sweeps_used);
                o.ledger = Some(best.ledger.clone());
            }
            if let Error::EigNoConvergence { best, .. } = &e {
                o.sweeps = Some(best.sweeps_used);
                o.ledger = Some(best.ledger.clone());
            }
            o.checks.push(Check {
                name: "completed".into(),
                value: 1.0,
                threshold: 0.0,
                passed: false,
            });
            (o, Some(e.to_string()))
        }
    };
    let passed = outcome.checks.iter().all(|c| c.passed);
    Ok(Report {
        spec: spec.clone(),
        error,
        metrics: outcome.metrics,
        sweeps: outcome.sweeps,
        ledger: outcome.ledger.as_ref().map(LedgerSummary::from),
        checks: outcome.checks,
        passed,
    })
}

fn execute(spec: &RunSpec, a: &DenseMatrix) -> Result<Outcome> {
    let cfg = spec.grid();
    let (m, n) = (spec.rows(), spec.n);
    let eps = f64::EPSILON;
    let a_inf = a.norm(NormKind::Inf);
    let a_fro = a.norm(NormKind::Frobenius);
    let mut o = Outcome::default();
    match spec.algorithm {
        Algorithm::Lu => {
            let layout = Layout::new(spec.layout, spec.s, n, n)?;
            let block = spec.omega.map(BlockParams::new).transpose()?;
            let f = lu_factor(a, &layout, &cfg, block)?;
            let res = f.residual(a)?;
            o.metric("residual_inf", res);
            o.metric("max_multiplier", f.max_multiplier());
            let peak = f.iteration_traffic.iter().copied().max().unwrap_or(0);
            o.metric("peak_iteration_words", peak as f64);
            o.checks.push(Check::at_most("factorization-residual", res, 64.0 * n as f64 * eps * a_inf));
            o.checks.push(Check::at_most("multiplier-bound", f.max_multiplier(), 1.0));
            let oracle = serial_lu_oracle(a)?;
            let mismatches = (0..n).filter(|&i| oracle.perm[i] != f.perm[i]).count();
            o.checks.push(Check::at_most("oracle-permutation", mismatches as f64, 0.0));
            o.ledger = Some(f.ledger);
        }
        Algorithm::Solve => {
            let layout = Layout::new(spec.layout, spec.s, n, n)?;
            let b = DenseMatrix::column_vector(&a.matvec(&vec![1.0; n])?)?;
            let r = solve(a, &b, &layout, &cfg, None)?;
            let resid = a.matmul(&r.x)?.sub(&b)?.norm(NormKind::Inf);
            let err = r.x.as_slice().iter().fold(0.0f64, |mx, x| mx.max((x - 1.0).abs()));
            o.metric("residual_inf", resid);
            o.metric("solution_error", err);
            o.checks.push(Check::at_most(
                "backward-residual",
                resid,
                64.0 * n as f64 * eps * a_inf * r.x.norm(NormKind::Inf),
            ));
            let oracle = serial_lu_oracle(a)?;
            let mismatches = (0..n).filter(|&i| oracle.perm[i] != r.perm[i]).count();
            o.checks.push(Check::at_most("oracle-permutation", mismatches as f64, 0.0));
            o.ledger = Some(r.ledger);
        }
        Algorithm::QrHouseholder | Algorithm::QrGivens => {
            let layout = Layout::new(spec.layout, spec.s, m, n)?;
            let f: QrFactorization = if spec.algorithm == Algorithm::QrHouseholder {
                qr_householder(a, &layout, &cfg)?
            } else {
                qr_givens(a, &layout, &cfg)?
            };
            let q = f.q_thin();
            let orth = q.transpose().matmul(&q)?.sub(&DenseMatrix::identity(n))?.max_abs();
            let res = a.sub(&q.matmul(&f.r)?)?.norm(NormKind::Inf);
            let drift = (f.r.norm(NormKind::Frobenius) - a_fro).abs() / a_fro;
            o.metric("orthogonality", orth);
            o.metric("residual_inf", res);
            o.metric("frobenius_drift", drift);
            o.checks.push(Check::at_most("orthogonality", orth, 1e-12));
            o.checks.push(Check::at_most("factorization-residual", res, 1e3 * m as f64 * eps * a_inf));
            o.checks.push(Check::at_most("frobenius-conservation", drift, 1e-10));
            o.ledger = Some(f.ledger);
        }
        Algorithm::Svd => {
            let opts = spec.jacobi.clone().unwrap_or_default();
            let r = hestenes_svd(a, &opts, spec.layout, &cfg)?;
            let ss: f64 = r.sigma.iter().map(|s| s * s).sum();
            let conservation = (ss - a_fro * a_fro).abs() / (a_fro * a_fro);
            let recon = a
                .matmul(&r.v)?
                .sub(&r.u_tilde.matmul(&DenseMatrix::diag(&r.sigma))?)?
                .norm(NormKind::Frobenius)
                / a_fro;
            let orth = r.v.transpose().matmul(&r.v)?.sub(&DenseMatrix::identity(n))?.max_abs();
            o.metric("frobenius_conservation", conservation);
            o.metric("reconstruction", recon);
            o.metric("v_orthogonality", orth);
            o.metric("max_angle", r.max_angle);
            o.metric("rotations", r.rotations as f64);
            o.metric("sigma_max", r.sigma[0]);
            o.metric("sigma_min", r.sigma[n - 1]);
            o.checks.push(Check::at_most("frobenius-conservation", conservation, 1e-10));
            o.checks.push(Check::at_most("reconstruction", recon, 1e-10));
            o.checks.push(Check::at_most("v-orthogonality", orth, 1e-12));
            o.checks.push(Check::at_most("rotation-angle", r.max_angle, std::f64::consts::FRAC_PI_4));
            o.sweeps = Some(r.sweeps_used);
            o.ledger = Some(r.ledger);
        }
        Algorithm::Eig => {
            let opts = spec.jacobi.clone().unwrap_or_default();
            let r = jacobi_eig(a, &opts, spec.layout, &cfg)?;
            let vbv = r.v.transpose().matmul(a)?.matmul(&r.v)?;
            let diag = vbv.sub(&DenseMatrix::diag(&r.eigenvalues))?.norm(NormKind::Frobenius) / a_fro;
            let tr: f64 = r.eigenvalues.iter().sum();
            let trace = (tr - a.trace()).abs() / a_fro;
            let orth = r.v.transpose().matmul(&r.v)?.sub(&DenseMatrix::identity(n))?.max_abs();
            o.metric("diagonalization", diag);
            o.metric("trace_error", trace);
            o.metric("v_orthogonality", orth);
            o.metric("max_angle", r.max_angle);
            o.metric("rotations", r.rotations as f64);
            o.checks.push(Check::at_most("diagonalization", diag, 1e-10));
            o.checks.push(Check::at_most("trace", trace, 1e-10));
            o.checks.push(Check::at_most("v-orthogonality", orth, 1e-12));
            o.sweeps = Some(r.sweeps_used);
            o.ledger = Some(r.ledger);
        }
    }
    Ok(o)
}

/// A grid of runs sharing one base spec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: RunSpec,
    pub orders: Vec<usize>,
    pub sides: Vec<usize>,
    /// Extra `(n, s)` runs excluded from the fit and predicted by it.
    #[serde(default)]
    pub holdout: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub s: usize,
    pub held_out: bool,
    pub makespan: f64,
    pub total_flops: u64,
    pub total_words: u64,
    pub total_messages: u64,
    pub predicted: f64,
    pub relative_error: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub rows: Vec<SweepRow>,
    pub fit: FitReport,
}

/// Run every `(n, s)` combination (in parallel), fit the cost model to the
/// training runs, and predict every run from it.
pub fn sweep(spec: &SweepSpec) -> Result<SweepResult> {
    let mut plan: Vec<(usize, usize, bool)> = Vec::new();
    for &n in &spec.orders {
        for &s in &spec.sides {
            plan.push((n, s, false));
        }
    }
    plan.extend(spec.holdout.iter().map(|&(n, s)| (n, s, true)));
    if plan.iter().filter(|p| !p.2).count() < 3 {
        return Err(Error::DegenerateDesign("a sweep needs at least 3 training runs".into()));
    }
    let specs: Vec<RunSpec> = plan
        .iter()
        .map(|&(n, s, _)| RunSpec {
            n,
            s,
            m: spec.base.m.map(|m| m.max(n)),
            output: None,
            ..spec.base.clone()
        })
        .collect();
    for s in &specs {
        s.validate()?;
    }
    let reports: Vec<Report> = specs.par_iter().map(run_bench).collect::<Result<_>>()?;
    let makespan = |r: &Report| r.ledger.as_ref().map_or(f64::NAN, |l| l.makespan);
    let train: Vec<Run> = plan
        .iter()
        .zip(&reports)
        .filter(|(p, _)| !p.2)
        .map(|(&(n, s, _), r)| Run { n, s, time: makespan(r) })
        .collect();
    let fit = fit_params(&train)?;
    let rows = plan
        .iter()
        .zip(&reports)
        .map(|(&(n, s, held_out), r)| {
            let l = r.ledger.clone().unwrap_or(LedgerSummary {
                makespan: f64::NAN,
                total_flops: 0,
                total_words: 0,
                total_messages: 0,
                procs: Vec::new(),
            });
            let predicted = predict_time(&fit.params, n as f64, s as f64);
            SweepRow {
                n,
                s,
                held_out,
                makespan: l.makespan,
                total_flops: l.total_flops,
                total_words: l.total_words,
                total_messages: l.total_messages,
                predicted,
                relative_error: (predicted - l.makespan) / l.makespan,
                passed: r.passed,
            }
        })
        .collect();
    Ok(SweepResult {
        spec: spec.clone(),
        rows,
        fit,
    })
}

/// Header `rows cols`, then one line per row, entries in shortest
/// round-trip decimal form.
pub fn format_matrix(a: &DenseMatrix) -> String {
    let mut out = format!("{} {}\n", a.rows(), a.cols());
    for i in 0..a.rows() {
        let line: Vec<String> = a.row(i).iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

pub fn parse_matrix(text: &str) -> Result<DenseMatrix> {
    let mut tokens = text.split_whitespace();
    let mut dim = |what: &str| -> Result<usize> {
        tokens
            .next()
            .ok_or_else(|| Error::InvalidArgument(format!("matrix file is missing the {what} count")))?
            .parse()
            .map_err(|e| Error::InvalidArgument(format!("bad {what} count: {e}")))
    };
    let (rows, cols) = (dim("row")?, dim("column")?);
    let data: Vec<f64> = tokens
        .map(|t| t.parse().map_err(|e| Error::InvalidArgument(format!("bad entry {t:?}: {e}"))))
        .collect::<Result<_>>()?;
    if data.len() != rows * cols {
        return Err(Error::InvalidArgument(format!(
            "matrix file declares {rows}x{cols} but holds {} entries",
            data.len()
        )));
    }
    DenseMatrix::new(rows, cols, data)
}

pub fn write_matrix(path: &Path, a: &DenseMatrix) -> std::io::Result<()> {
    std::fs::write(path, format_matrix(a))
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
    parse_matrix(&text)
}
