//! One-sided (Hestenes) Jacobi SVD and the two-sided Jacobi eigensolver.
//!
//! Both share one rotation: for columns with Gram entries `α = aᵢᵀaᵢ`,
//! `β = aⱼᵀaⱼ`, `γ = aᵢᵀaⱼ`, the pair is replaced by
//! `(aᵢ, aⱼ)·[[c, s], [−s, c]]` with `t = tan θ` the smaller root of
//! `t² + 2ζt − 1 = 0`, `ζ = (β − α)/(2γ)`. Taking the smaller root keeps
//! `|θ| ≤ π/4`.
//!
//! The parallel ordering is a round-robin tournament: each "board" is a
//! virtual processor holding two columns, boards form a linear array laid
//! out in snake order over the grid, and between rounds every column moves
//! at most one board.

use serde::{Deserialize, Serialize};

use crate::dense::{DenseMatrix, NormKind};
use crate::error::{Error, Result};
use crate::fabric::{Coord, CostLedger, Fabric, GridConfig};
use crate::layout::LayoutKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ordering {
    CyclicRows,
    Tournament,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JacobiOptions {
    /// Relative threshold: a pair is skipped when `|γ| ≤ tol·√(αβ)`.
    pub tol: f64,
    pub max_sweeps: usize,
    pub ordering: Ordering,
    /// Repeat the first round at the end of each sweep when `n` is even.
    pub extra_step_even_n: bool,
}

impl Default for JacobiOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_sweeps: 30,
            ordering: Ordering::Tournament,
            extra_step_even_n: true,
        }
    }
}

impl JacobiOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidArgument("max_sweeps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SweepSchedule {
    pub n: usize,
    /// Disjoint pairs `(i, j)`, `i < j`, listed by board.
    pub rounds: Vec<Vec<(usize, usize)>>,
    /// For tournaments, `boards[r][x]` is the board column `x` sits at in
    /// round `r`. Cyclic-by-rows runs on a single processor and has none.
    pub boards: Option<Vec<Vec<usize>>>,
}

impl SweepSchedule {
    pub fn pair_count(&self) -> usize {
        self.rounds.iter().map(Vec::len).sum()
    }

    pub fn board_count(&self) -> usize {
        self.n.div_ceil(2)
    }

    /// Largest distance, in boards, any column travels between consecutive
    /// rounds, including the wrap from the last round back to the first.
    pub fn max_board_move(&self) -> usize {
        let Some(boards) = &self.boards else { return 0 };
        let r = boards.len();
        (0..r)
            .flat_map(|k| {
                let (a, b) = (&boards[k], &boards[(k + 1) % r]);
                a.iter().zip(b).map(|(x, y)| x.abs_diff(*y))
            })
            .max()
            .unwrap_or(0)
    }
}

pub fn make_schedule(n: usize, ordering: Ordering) -> Result<SweepSchedule> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("a sweep needs at least 2 columns, got {n}")));
    }
    Ok(match ordering {
        Ordering::CyclicRows => SweepSchedule {
            n,
            rounds: (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| vec![(i, j)]))
                .collect(),
            boards: None,
        },
        Ordering::Tournament => tournament(n),
    })
}

/// Circle method: player 0 stays on board 0's top seat; everyone else walks
/// one seat around the ring top[1..] → bottom[..] (reversed) after each round.
fn tournament(n: usize) -> SweepSchedule {
    let players = n + n % 2;
    let nb = players / 2;
    let mut top: Vec<usize> = (0..nb).map(|b| 2 * b).collect();
    let mut bottom: Vec<usize> = (0..nb).map(|b| 2 * b + 1).collect();
    let mut rounds = Vec::with_capacity(players - 1);
    let mut boards = Vec::with_capacity(players - 1);
    for _ in 0..players - 1 {
        let mut pairs = Vec::with_capacity(nb);
        let mut at = vec![0; n];
        for b in 0..nb {
            let (x, y) = (top[b], bottom[b]);
            for p in [x, y] {
                if p < n {
                    at[p] = b;
                }
            }
            if x < n && y < n {
                pairs.push((x.min(y), x.max(y)));
            }
        }
        rounds.push(pairs);
        boards.push(at);

        let mut ring: Vec<usize> = top[1..].iter().chain(bottom.iter().rev()).copied().collect();
        ring.rotate_right(1);
        top[1..].copy_from_slice(&ring[..nb - 1]);
        for (b, &p) in ring[nb - 1..].iter().rev().enumerate() {
            bottom[b] = p;
        }
    }
    SweepSchedule {
        n,
        rounds,
        boards: Some(boards),
    }
}

/// `(c, s)` that orthogonalizes a pair with Gram entries `α, β, γ`.
fn rotation(alpha: f64, beta: f64, gamma: f64) -> (f64, f64) {
    if gamma == 0.0 {
        return (1.0, 0.0);
    }
    let t = if alpha == beta {
        gamma.signum()
    } else {
        let zeta = (beta - alpha) / (2.0 * gamma);
        zeta.signum() / (zeta.abs() + zeta.hypot(1.0))
    };
    let c = 1.0 / t.hypot(1.0);
    (c, c * t)
}

fn apply(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (u, v) = (*a, *b);
        *a = c * u - s * v;
        *b = s * u + c * v;
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Rotate two columns so they become orthogonal. Returns the rotated pair
/// and the angle, `|θ| ≤ π/4`.
pub fn rotate_pair(ai: &[f64], aj: &[f64]) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    if ai.len() != aj.len() {
        return Err(Error::InvalidDimensions(format!(
            "columns of length {} and {}",
            ai.len(),
            aj.len()
        )));
    }
    let (c, s) = rotation(dot(ai, ai), dot(aj, aj), dot(ai, aj));
    let (mut x, mut y) = (ai.to_vec(), aj.to_vec());
    apply(&mut x, &mut y, c, s);
    Ok((x, y, s.atan2(c)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvdResult {
    /// `A·V` with nonnull columns normalized; null columns stay zero.
    pub u_tilde: DenseMatrix,
    /// Nonincreasing.
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
    /// Includes the final sweep that found nothing to rotate.
    pub sweeps_used: usize,
    pub rotations: usize,
    pub max_angle: f64,
    /// Largest relative change of `‖A·V‖_F` observed at the end of a sweep.
    pub frobenius_drift: f64,
    pub ledger: CostLedger,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigResult {
    /// Nonincreasing (left in diagonal order by the serial oracle).
    pub eigenvalues: Vec<f64>,
    pub v: DenseMatrix,
    pub sweeps_used: usize,
    pub rotations: usize,
    pub max_angle: f64,
    pub ledger: CostLedger,
}

impl EigResult {
    pub(crate) fn from_parts(eigenvalues: Vec<f64>, v: DenseMatrix, sweeps_used: usize, ledger: CostLedger) -> Self {
        Self {
            eigenvalues,
            v,
            sweeps_used,
            rotations: 0,
            max_angle: 0.0,
            ledger,
        }
    }
}

/// Where each board lives. Boards follow a snake through the grid so that
/// neighbouring boards sit on the same or adjacent processors.
fn board_homes(nb: usize, placement: LayoutKind, side: usize) -> Result<Vec<Coord>> {
    let snake: Vec<Coord> = (0..side)
        .flat_map(|r| {
            (0..side).map(move |c| Coord::new(r, if r % 2 == 0 { c } else { side - 1 - c }))
        })
        .collect();
    let p = snake.len();
    match placement {
        LayoutKind::Blocked => {
            let per = nb.div_ceil(p).max(1);
            Ok((0..nb).map(|b| snake[b / per]).collect())
        }
        LayoutKind::ColumnWrapped | LayoutKind::Scattered => Ok((0..nb).map(|b| snake[b % p]).collect()),
        LayoutKind::RowWrapped => Err(Error::InvalidArgument(
            "Jacobi distributes whole columns; row-wrapped placement is not supported".into(),
        )),
    }
}

/// One round of the sweep as seen by the simulator: the pairs, and for each
/// column the processor that holds it.
struct Plan {
    rounds: Vec<Vec<(usize, usize)>>,
    homes: Vec<Vec<Coord>>,
}

fn plan(n: usize, options: &JacobiOptions, placement: LayoutKind, side: usize) -> Result<Plan> {
    if n < 2 {
        return Ok(Plan {
            rounds: Vec::new(),
            homes: Vec::new(),
        });
    }
    let sched = make_schedule(n, options.ordering)?;
    let mut rounds = sched.rounds.clone();
    let mut homes: Vec<Vec<Coord>> = match &sched.boards {
        None => vec![vec![Coord::new(0, 0); n]; rounds.len()],
        Some(boards) => {
            let at = board_homes(sched.board_count(), placement, side)?;
            boards.iter().map(|r| r.iter().map(|&b| at[b]).collect()).collect()
        }
    };
    if options.ordering == Ordering::Tournament && options.extra_step_even_n && n % 2 == 0 {
        rounds.push(rounds[0].clone());
        homes.push(homes[0].clone());
    }
    Ok(Plan { rounds, homes })
}

/// Charge the column moves between two consecutive placements.
fn migrate(fabric: &mut Fabric, from: &[Coord], to: &[Coord], words: usize) -> Result<()> {
    for (&a, &b) in from.iter().zip(to) {
        if a != b {
            fabric.send(a, b, words)?;
        }
    }
    Ok(())
}

fn columns(a: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..a.cols()).map(|j| a.column(j)).collect()
}

fn from_columns(rows: usize, cols: &[Vec<f64>]) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols.len(), |i, j| cols[j][i])
}

/// Indices sorting `keys` nonincreasingly; ties keep their original order.
fn descending(keys: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]));
    idx
}

fn check_grid(config: &GridConfig) -> Result<Fabric> {
    Fabric::new(config.clone())
}

pub fn hestenes_svd(
    a: &DenseMatrix,
    options: &JacobiOptions,
    placement: LayoutKind,
    config: &GridConfig,
) -> Result<SvdResult> {
    options.validate()?;
    let (m, n) = (a.rows(), a.cols());
    if m < n {
        return Err(Error::InvalidDimensions(format!("SVD needs rows ≥ cols, got {m}x{n}")));
    }
    let mut fabric = check_grid(config)?;
    let plan = plan(n, options, placement, config.s)?;
    let mut cols = columns(a);
    let mut v = columns(&DenseMatrix::identity(n));
    let fro = a.norm(NormKind::Frobenius);
    let (mut rotations, mut max_angle, mut drift) = (0usize, 0.0f64, 0.0f64);
    let mut sweeps = 0;
    let mut converged = false;

    while sweeps < options.max_sweeps {
        sweeps += 1;
        let mut rotated = false;
        for (r, pairs) in plan.rounds.iter().enumerate() {
            if r > 0 {
                migrate(&mut fabric, &plan.homes[r - 1], &plan.homes[r], m + n)?;
            }
            for &(i, j) in pairs {
                let home = plan.homes[r][i];
                let (alpha, beta, gamma) = (dot(&cols[i], &cols[i]), dot(&cols[j], &cols[j]), dot(&cols[i], &cols[j]));
                fabric.compute(home, 6 * m as u64);
                if alpha == 0.0 || beta == 0.0 || gamma.abs() <= options.tol * (alpha * beta).sqrt() {
                    continue;
                }
                let (c, s) = rotation(alpha, beta, gamma);
                let (left, right) = cols.split_at_mut(j);
                apply(&mut left[i], &mut right[0], c, s);
                let (left, right) = v.split_at_mut(j);
                apply(&mut left[i], &mut right[0], c, s);
                fabric.compute(home, 10 + 6 * (m + n) as u64);
                rotations += 1;
                max_angle = max_angle.max(s.atan2(c).abs());
                rotated = true;
            }
        }
        // columns walk back to their starting boards for the next sweep
        if let (Some(last), Some(first)) = (plan.homes.last(), plan.homes.first()) {
            migrate(&mut fabric, last, first, m + n)?;
        }
        let now: f64 = cols.iter().map(|c| dot(c, c)).sum::<f64>().sqrt();
        if fro > 0.0 {
            drift = drift.max((now - fro).abs() / fro);
        }
        if !rotated {
            converged = true;
            break;
        }
    }

    let norms: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    let order = descending(&norms);
    let sigma: Vec<f64> = order.iter().map(|&k| norms[k]).collect();
    let u: Vec<Vec<f64>> = order
        .iter()
        .map(|&k| {
            let s = norms[k];
            cols[k].iter().map(|x| if s > 0.0 { x / s } else { 0.0 }).collect()
        })
        .collect();
    let vs: Vec<Vec<f64>> = order.iter().map(|&k| v[k].clone()).collect();
    let result = SvdResult {
        u_tilde: from_columns(m, &u),
        sigma,
        v: from_columns(n, &vs),
        sweeps_used: sweeps,
        rotations,
        max_angle,
        frobenius_drift: drift,
        ledger: fabric.ledger(),
    };
    if converged {
        Ok(result)
    } else {
        Err(Error::SvdNoConvergence {
            sweeps,
            best: Box::new(result),
        })
    }
}

/// Two-sided Jacobi on a symmetric matrix. Each board keeps full columns of
/// `B` and `V` for its two indices; after a round's column rotations, every
/// board learns all of the round's `(c, s)` to rotate its own rows.
pub fn jacobi_eig(
    b: &DenseMatrix,
    options: &JacobiOptions,
    placement: LayoutKind,
    config: &GridConfig,
) -> Result<EigResult> {
    options.validate()?;
    let asym = b.asymmetry().ok_or_else(|| {
        Error::InvalidDimensions(format!("{}x{} matrix is not square", b.rows(), b.cols()))
    })?;
    let fro = b.norm(NormKind::Frobenius);
    if asym > 1e-12 * fro {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    let n = b.rows();
    let mut fabric = check_grid(config)?;
    let plan = plan(n, options, placement, config.s)?;
    let mut cols = columns(b);
    let mut v = columns(&DenseMatrix::identity(n));
    let floor = f64::EPSILON * fro;
    let (mut rotations, mut max_angle) = (0usize, 0.0f64);
    let mut sweeps = 0;
    let mut converged = false;

    while sweeps < options.max_sweeps {
        sweeps += 1;
        let mut rotated = false;
        for (r, pairs) in plan.rounds.iter().enumerate() {
            if r > 0 {
                migrate(&mut fabric, &plan.homes[r - 1], &plan.homes[r], 2 * n)?;
            }
            let mut round = Vec::with_capacity(pairs.len());
            for &(i, j) in pairs {
                let (alpha, beta, gamma) = (cols[i][i], cols[j][j], cols[j][i]);
                if gamma.abs() <= floor || gamma.abs() <= options.tol * (alpha * beta).abs().sqrt() {
                    continue;
                }
                let (c, s) = rotation(alpha, beta, gamma);
                let home = plan.homes[r][i];
                let (left, right) = cols.split_at_mut(j);
                apply(&mut left[i], &mut right[0], c, s);
                let (left, right) = v.split_at_mut(j);
                apply(&mut left[i], &mut right[0], c, s);
                fabric.compute(home, 10 + 12 * n as u64);
                rotations += 1;
                max_angle = max_angle.max(s.atan2(c).abs());
                round.push((i, j, c, s));
            }
            if round.is_empty() {
                continue;
            }
            rotated = true;
            // every board needs every rotation of the round for its rows
            let mut boards: Vec<Coord> = Vec::new();
            for &h in &plan.homes[r] {
                if !boards.contains(&h) {
                    boards.push(h);
                }
            }
            for &(i, ..) in &round {
                fabric.multicast(plan.homes[r][i], &boards, 4)?;
            }
            for (x, col) in cols.iter_mut().enumerate() {
                for &(i, j, c, s) in &round {
                    let (u, w) = (col[i], col[j]);
                    col[i] = c * u - s * w;
                    col[j] = s * u + c * w;
                }
                fabric.compute(plan.homes[r][x], 6 * round.len() as u64);
            }
            for &(i, j, ..) in &round {
                cols[j][i] = 0.0;
                cols[i][j] = 0.0;
            }
        }
        if let (Some(last), Some(first)) = (plan.homes.last(), plan.homes.first()) {
            migrate(&mut fabric, last, first, 2 * n)?;
        }
        if !rotated {
            converged = true;
            break;
        }
    }

    let diag: Vec<f64> = (0..n).map(|i| cols[i][i]).collect();
    let order = descending(&diag);
    let vs: Vec<Vec<f64>> = order.iter().map(|&k| v[k].clone()).collect();
    let result = EigResult {
        eigenvalues: order.iter().map(|&k| diag[k]).collect(),
        v: from_columns(n, &vs),
        sweeps_used: sweeps,
        rotations,
        max_angle,
        ledger: fabric.ledger(),
    };
    if converged {
        Ok(result)
    } else {
        Err(Error::EigNoConvergence {
            sweeps,
            best: Box::new(result),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{generate, serial_jacobi_oracle, MatrixKind};
    use std::f64::consts::FRAC_PI_4;

    fn covers_once(s: &SweepSchedule) -> bool {
        let n = s.n;
        let mut seen = vec![false; n * n];
        for round in &s.rounds {
            let mut used = vec![false; n];
            for &(i, j) in round {
                if i >= j || used[i] || used[j] || seen[i * n + j] {
                    return false;
                }
                used[i] = true;
                used[j] = true;
                seen[i * n + j] = true;
            }
        }
        s.pair_count() == n * (n - 1) / 2
    }

    #[test]
    fn tournament_of_four() {
        let s = make_schedule(4, Ordering::Tournament).unwrap();
        assert_eq!(s.rounds.len(), 3);
        assert!(covers_once(&s));
    }

    #[test]
    fn tournament_of_five() {
        let s = make_schedule(5, Ordering::Tournament).unwrap();
        assert_eq!(s.rounds.len(), 5);
        assert!(s.rounds.iter().all(|r| r.len() <= 2));
        assert!(covers_once(&s));
    }

    #[test]
    fn cyclic_rows_order() {
        let s = make_schedule(3, Ordering::CyclicRows).unwrap();
        assert_eq!(s.rounds, vec![vec![(0, 1)], vec![(0, 2)], vec![(1, 2)]]);
        assert_eq!(s.max_board_move(), 0);
    }

    #[test]
    fn schedules_exhaustive() {
        for n in 2..=64 {
            let t = make_schedule(n, Ordering::Tournament).unwrap();
            assert!(covers_once(&t), "n={n}");
            assert_eq!(t.rounds.len(), if n % 2 == 0 { n - 1 } else { n });
            assert!(t.max_board_move() <= 1, "n={n}");
            let c = make_schedule(n, Ordering::CyclicRows).unwrap();
            assert!(covers_once(&c));
            assert_eq!(c.rounds.len(), n * (n - 1) / 2);
        }
        assert!(make_schedule(1, Ordering::Tournament).is_err());
    }

    #[test]
    fn orthogonal_pair_untouched() {
        let (x, y, th) = rotate_pair(&[1.0, 0.0, 2.0], &[0.0, 3.0, 0.0]).unwrap();
        assert_eq!(th, 0.0);
        assert_eq!(x, vec![1.0, 0.0, 2.0]);
        assert_eq!(y, vec![0.0, 3.0, 0.0]);
    }

    #[test]
    fn equal_columns_rotate_by_quarter() {
        let a = [1.0, -2.0, 0.5];
        let (x, y, th) = rotate_pair(&a, &a).unwrap();
        assert!((th.abs() - FRAC_PI_4).abs() < 1e-15);
        assert!(dot(&x, &y).abs() <= 1e-13 * dot(&x, &x).sqrt() * dot(&y, &y).sqrt() + 1e-300);
    }

    #[test]
    fn random_pair_becomes_orthogonal() {
        let a = generate(MatrixKind::RandomUniform, 6, 2, 12).unwrap();
        let (ai, aj) = (a.column(0), a.column(1));
        let (x, y, th) = rotate_pair(&ai, &aj).unwrap();
        let (nx, ny) = (dot(&x, &x), dot(&y, &y));
        assert!(th.abs() <= FRAC_PI_4);
        assert!(dot(&x, &y).abs() <= 1e-13 * (nx * ny).sqrt());
        let before = dot(&ai, &ai) + dot(&aj, &aj);
        assert!((nx + ny - before).abs() <= 1e-12 * before);
    }

    #[test]
    fn diagonal_svd() {
        let a = DenseMatrix::diag(&[3.0, 1.0, 2.0]);
        let r = hestenes_svd(&a, &JacobiOptions::default(), LayoutKind::Blocked, &GridConfig::new(1)).unwrap();
        assert_eq!(r.sigma, vec![3.0, 2.0, 1.0]);
        assert_eq!(r.rotations, 0);
        assert_eq!(r.sweeps_used, 1);
        let p = DenseMatrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(r.v, p);
    }

    #[test]
    fn orthogonal_columns_need_no_rotation() {
        let a = DenseMatrix::from_rows(&[[3.0, 0.0], [4.0, 0.0], [0.0, 4.0]]).unwrap();
        let r = hestenes_svd(&a, &JacobiOptions::default(), LayoutKind::Scattered, &GridConfig::new(2)).unwrap();
        assert_eq!(r.sigma, vec![5.0, 4.0]);
        assert_eq!(r.v, DenseMatrix::identity(2));
        assert_eq!(r.sweeps_used, 1);
    }

    fn check_svd(a: &DenseMatrix, r: &SvdResult) {
        let fro = a.norm(NormKind::Frobenius);
        let av = a.matmul(&r.v).unwrap();
        let us = r.u_tilde.matmul(&DenseMatrix::diag(&r.sigma)).unwrap();
        assert!(av.sub(&us).unwrap().norm(NormKind::Frobenius) <= 1e-10 * fro);
        let ss: f64 = r.sigma.iter().map(|s| s * s).sum();
        assert!((ss - fro * fro).abs() <= 1e-10 * fro * fro);
        let n = r.v.cols();
        assert!(r.v.transpose().matmul(&r.v).unwrap().sub(&DenseMatrix::identity(n)).unwrap().max_abs() <= 1e-12);
        assert!(r.sigma.windows(2).all(|w| w[0] >= w[1]));
        assert!(r.max_angle <= FRAC_PI_4);
    }

    #[test]
    fn svd_matches_gram_oracle() {
        let a = generate(MatrixKind::RandomUniform, 12, 8, 8).unwrap();
        let (mut lambda, _) = serial_jacobi_oracle(&a.transpose().matmul(&a).unwrap()).unwrap();
        lambda.sort_by(|x, y| y.total_cmp(x));
        for ordering in [Ordering::Tournament, Ordering::CyclicRows] {
            for placement in [LayoutKind::Blocked, LayoutKind::Scattered, LayoutKind::ColumnWrapped] {
                let opts = JacobiOptions {
                    ordering,
                    ..Default::default()
                };
                let r = hestenes_svd(&a, &opts, placement, &GridConfig::new(2)).unwrap();
                check_svd(&a, &r);
                for (s, l) in r.sigma.iter().zip(&lambda) {
                    assert!((s - l.sqrt()).abs() <= 1e-8 * s);
                }
            }
        }
    }

    #[test]
    fn odd_width_and_rank_deficient() {
        let base = generate(MatrixKind::RandomUniform, 9, 7, 3).unwrap();
        let a = DenseMatrix::from_fn(9, 7, |i, j| if j == 6 { base[(i, 0)] * 2.0 } else { base[(i, j)] });
        let r = hestenes_svd(&a, &JacobiOptions::default(), LayoutKind::Scattered, &GridConfig::new(2)).unwrap();
        check_svd(&a, &r);
        assert!(r.sigma[6] < 1e-12 * r.sigma[0]);
    }

    #[test]
    fn sweep_budget_at_24() {
        let a = generate(MatrixKind::RandomUniform, 24, 24, 24).unwrap();
        let r = hestenes_svd(&a, &JacobiOptions::default(), LayoutKind::Blocked, &GridConfig::new(2)).unwrap();
        assert!(r.sweeps_used <= 15, "{}", r.sweeps_used);
        assert!(r.frobenius_drift <= 1e-11);
    }

    #[test]
    fn too_few_sweeps_returns_best_iterate() {
        let a = generate(MatrixKind::RandomUniform, 10, 10, 1).unwrap();
        let opts = JacobiOptions {
            max_sweeps: 1,
            ..Default::default()
        };
        match hestenes_svd(&a, &opts, LayoutKind::Blocked, &GridConfig::new(1)) {
            Err(Error::SvdNoConvergence { sweeps: 1, best }) => assert_eq!(best.sigma.len(), 10),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn row_wrapped_placement_rejected() {
        let a = DenseMatrix::identity(4);
        assert!(hestenes_svd(&a, &JacobiOptions::default(), LayoutKind::RowWrapped, &GridConfig::new(2)).is_err());
    }

    #[test]
    fn eig_examples() {
        let opts = JacobiOptions::default();
        let cfg = GridConfig::new(1);
        let d = DenseMatrix::diag(&[1.0, 4.0, -2.0]);
        let r = jacobi_eig(&d, &opts, LayoutKind::Blocked, &cfg).unwrap();
        assert_eq!(r.eigenvalues, vec![4.0, 1.0, -2.0]);
        assert_eq!(r.rotations, 0);

        let b = DenseMatrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap();
        let r = jacobi_eig(&b, &opts, LayoutKind::Blocked, &cfg).unwrap();
        assert!((r.eigenvalues[0] - 3.0).abs() < 1e-15 && (r.eigenvalues[1] - 1.0).abs() < 1e-15);

        let asym = DenseMatrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]).unwrap();
        assert!(matches!(jacobi_eig(&asym, &opts, LayoutKind::Blocked, &cfg), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn eig_matches_oracle() {
        let a = generate(MatrixKind::RandomUniform, 16, 16, 16).unwrap();
        let b = DenseMatrix::from_fn(16, 16, |i, j| a[(i, j)] + a[(j, i)]);
        let (mut lambda, _) = serial_jacobi_oracle(&b).unwrap();
        lambda.sort_by(|x, y| y.total_cmp(x));
        let fro = b.norm(NormKind::Frobenius);
        for placement in [LayoutKind::Blocked, LayoutKind::Scattered] {
            let r = jacobi_eig(&b, &JacobiOptions::default(), placement, &GridConfig::new(2)).unwrap();
            for (x, y) in r.eigenvalues.iter().zip(&lambda) {
                assert!((x - y).abs() <= 1e-9 * y.abs().max(fro * 1e-3));
            }
            let vbv = r.v.transpose().matmul(&b).unwrap().matmul(&r.v).unwrap();
            assert!(vbv.sub(&DenseMatrix::diag(&r.eigenvalues)).unwrap().norm(NormKind::Frobenius) <= 1e-10 * fro);
            let tr: f64 = r.eigenvalues.iter().sum();
            assert!((tr - b.trace()).abs() <= 1e-10 * fro);
        }
    }

    #[test]
    fn svd_and_eig_agree() {
        let a = generate(MatrixKind::RandomUniform, 14, 10, 5).unwrap();
        let gram = a.transpose().matmul(&a).unwrap();
        let cfg = GridConfig::new(2);
        let s = hestenes_svd(&a, &JacobiOptions::default(), LayoutKind::Blocked, &cfg).unwrap();
        let e = jacobi_eig(&gram, &JacobiOptions::default(), LayoutKind::Blocked, &cfg).unwrap();
        for (sig, lam) in s.sigma.iter().zip(&e.eigenvalues) {
            assert!((sig * sig - lam).abs() <= 1e-8 * lam);
        }
    }

    #[test]
    fn tournament_moves_columns_between_processors() {
        let a = generate(MatrixKind::RandomUniform, 16, 16, 2).unwrap();
        let opts = JacobiOptions::default();
        let cyclic = hestenes_svd(&a, &JacobiOptions { ordering: Ordering::CyclicRows, ..opts.clone() }, LayoutKind::Blocked, &GridConfig::new(2))
            .unwrap();
        assert_eq!(cyclic.ledger.total_words_sent(), 0);
        let par = hestenes_svd(&a, &opts, LayoutKind::Blocked, &GridConfig::new(2)).unwrap();
        assert!(par.ledger.total_words_sent() > 0);
        assert!(par.ledger.makespan < cyclic.ledger.makespan);
    }
}
