//! Gaussian elimination with partial pivoting on the simulated grid.
//!
//! Iteration `k` runs five phases in strict sequence:
//!
//! 1. the holders of column `k` reduce their local pivot candidates with a
//!    scan and announce the winner along their processor rows;
//! 2. the holders of the pivot row broadcast it down their processor columns;
//! 3. the pivot row is exchanged with row `k`; since every holder of row `k`
//!    already received the pivot row, only the old row `k` travels;
//! 4. the holders of column `k` form the multipliers and broadcast them along
//!    their processor rows;
//! 5. every processor applies the rank-1 update to the part of the trailing
//!    submatrix it owns. Rows with a zero multiplier are skipped.
//!
//! With [`BlockParams`] the update in step 5 is confined to a vertical strip
//! of `ω` columns. Once the strip's `ω` pivots are chosen, the matching
//! horizontal strip of `U` is finished and the trailing matrix is updated by
//! one matrix-matrix product.

use crate::dense::{singularity_floor, DenseMatrix, NormKind, PermutationVector};
use crate::error::{Error, Result};
use crate::fabric::{pivot_select, CostLedger, Fabric, GridConfig, PivotCandidate};
use crate::layout::{DistMatrix, Layout};

/// Strip width for blocked elimination.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockParams {
    omega: usize,
}

impl BlockParams {
    pub fn new(omega: usize) -> Result<Self> {
        if omega == 0 {
            return Err(Error::InvalidArgument("block width must be positive".into()));
        }
        Ok(Self { omega })
    }

    /// `ω = ⌈√n⌉`.
    pub fn for_order(n: usize) -> Self {
        let mut w = (n as f64).sqrt().ceil() as usize;
        while w * w < n {
            w += 1;
        }
        while w > 1 && (w - 1) * (w - 1) >= n {
            w -= 1;
        }
        Self { omega: w.max(1) }
    }

    pub fn omega(&self) -> usize {
        self.omega
    }
}

#[derive(Clone, Debug)]
pub struct LuFactorization {
    pub n: usize,
    /// Row `i` of `P·A` is row `perm[i]` of `A`.
    pub perm: PermutationVector,
    /// Strict lower triangle holds the multipliers, upper triangle holds `U`.
    pub packed: DenseMatrix,
    pub ledger: CostLedger,
    /// For each iteration, the largest number of words any one processor sent
    /// or received.
    pub iteration_traffic: Vec<u64>,
}

impl LuFactorization {
    pub fn l(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.n, self.n, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Greater => self.packed[(i, j)],
            std::cmp::Ordering::Equal => 1.0,
            std::cmp::Ordering::Less => 0.0,
        })
    }

    pub fn u(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.n, self.n, |i, j| if j >= i { self.packed[(i, j)] } else { 0.0 })
    }

    /// `‖P·A − L·U‖_∞`.
    pub fn residual(&self, a: &DenseMatrix) -> Result<f64> {
        let pa = a.permute_rows(&self.perm)?;
        let lu = self.l().matmul(&self.u())?;
        Ok(pa.sub(&lu)?.norm(NormKind::Inf))
    }

    pub fn max_multiplier(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.n {
            for j in 0..i {
                m = m.max(self.packed[(i, j)].abs());
            }
        }
        m
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub x: DenseMatrix,
    pub perm: PermutationVector,
    pub ledger: CostLedger,
}

#[derive(Clone, Debug)]
pub struct BackSubstitution {
    pub x: Vec<f64>,
    pub ledger: CostLedger,
}

fn check_grid(layout: &Layout, config: &GridConfig) -> Result<()> {
    if layout.side() != config.s {
        return Err(Error::LayoutMismatch(format!(
            "layout is for a {0}x{0} grid but the fabric is {1}x{1}",
            layout.side(),
            config.s
        )));
    }
    Ok(())
}

fn check_square(a: &DenseMatrix, layout: &Layout) -> Result<usize> {
    if !a.is_square() {
        return Err(Error::InvalidDimensions(format!(
            "elimination needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if layout.shape() != (a.rows(), a.cols()) {
        return Err(Error::LayoutMismatch(format!(
            "{}x{} matrix against a layout for {:?}",
            a.rows(),
            a.cols(),
            layout.shape()
        )));
    }
    Ok(a.rows())
}

pub fn lu_factor(
    a: &DenseMatrix,
    layout: &Layout,
    config: &GridConfig,
    block: Option<BlockParams>,
) -> Result<LuFactorization> {
    let n = check_square(a, layout)?;
    check_grid(layout, config)?;
    let mut fabric = Fabric::new(config.clone())?;
    let mut d = DistMatrix::distribute(a, layout)?;
    let trace = Eliminator::new(&mut d, &mut fabric, n, n).run(block)?;
    Ok(LuFactorization {
        n,
        perm: trace.perm,
        packed: d.collect(),
        ledger: fabric.ledger(),
        iteration_traffic: trace.iteration_traffic,
    })
}

/// Solve `A·x = b` by eliminating the augmented matrix `[A | b]` and back
/// substituting on the grid.
pub fn solve(
    a: &DenseMatrix,
    b: &DenseMatrix,
    layout: &Layout,
    config: &GridConfig,
    block: Option<BlockParams>,
) -> Result<SolveResult> {
    let n = check_square(a, layout)?;
    check_grid(layout, config)?;
    if b.rows() != n || b.cols() != 1 {
        return Err(Error::InvalidDimensions(format!(
            "right-hand side must be {n}x1, got {}x{}",
            b.rows(),
            b.cols()
        )));
    }
    let aug = DenseMatrix::from_fn(n, n + 1, |i, j| if j < n { a[(i, j)] } else { b[(i, 0)] });
    let aug_layout = layout.reshaped(n, n + 1)?;
    let mut fabric = Fabric::new(config.clone())?;
    let mut d = DistMatrix::distribute(&aug, &aug_layout)?;
    let trace = Eliminator::new(&mut d, &mut fabric, n, n + 1).run(block)?;
    let x = back_substitute_distributed(&d, &mut fabric, n)?;
    Ok(SolveResult {
        x: DenseMatrix::column_vector(&x)?,
        perm: trace.perm,
        ledger: fabric.ledger(),
    })
}

/// Solve `U·x = rhs` for upper-triangular `U` (entries below the diagonal are
/// ignored) distributed as `[U | rhs]`.
pub fn back_substitute(
    u: &DenseMatrix,
    rhs: &[f64],
    layout: &Layout,
    config: &GridConfig,
) -> Result<BackSubstitution> {
    let n = check_square(u, layout)?;
    check_grid(layout, config)?;
    if rhs.len() != n {
        return Err(Error::InvalidDimensions(format!(
            "right-hand side of length {} for order {n}",
            rhs.len()
        )));
    }
    let aug = DenseMatrix::from_fn(n, n + 1, |i, j| match j {
        j if j == n => rhs[i],
        j if j >= i => u[(i, j)],
        _ => 0.0,
    });
    let mut fabric = Fabric::new(config.clone())?;
    let d = DistMatrix::distribute(&aug, &layout.reshaped(n, n + 1)?)?;
    let x = back_substitute_distributed(&d, &mut fabric, n)?;
    Ok(BackSubstitution {
        x,
        ledger: fabric.ledger(),
    })
}

/// Back substitution on a distributed `[U | b̄]` whose column `n` holds the
/// right-hand side; rows at or beyond `n` are ignored.
///
/// For each row `i`, from the bottom up, the holders of row `i` form partial
/// dot products against the solution entries they already know, an add-scan
/// combines them, and the diagonal holder broadcasts `x_i` down its column.
/// Per row this moves `O(s)` words.
pub(crate) fn back_substitute_distributed(
    d: &DistMatrix,
    fabric: &mut Fabric,
    n: usize,
) -> Result<Vec<f64>> {
    let layout = d.layout().clone();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let group = layout.row_holders(i);
        let mut inputs = Vec::with_capacity(group.len());
        for &p in &group {
            let b = d.block(p);
            let lr = layout.local_row_of(p, i).expect("row holder holds the row");
            let row = b.row(lr);
            let (lo, hi) = (b.cols_below(i + 1), b.cols_below(n));
            let partial: f64 = (lo..hi).map(|lc| row[lc] * x[b.cols[lc]]).sum();
            fabric.compute(p, 2 * (hi - lo) as u64);
            let rhs = layout.local_col_of(p, n).map_or(0.0, |lc| row[lc]);
            inputs.push((partial, rhs));
        }
        let (sum, rhs) = fabric.scan(&group, inputs, 2, |a, b| (a.0 + b.0, a.1 + b.1))?;
        let diag_owner = layout.owner(i, i)?.proc;
        let uii = d.get(i, i)?;
        if uii == 0.0 {
            return Err(Error::ZeroDiagonal { row: i });
        }
        x[i] = (rhs - sum) / uii;
        fabric.compute(diag_owner, 2);
        fabric.multicast(diag_owner, &layout.col_peers(diag_owner), 1)?;
    }
    Ok(x)
}

/// All-reduce of the largest magnitude among entries `(i, j)` with
/// `i < rows`, `j < cols`.
pub(crate) fn max_abs_allreduce(d: &DistMatrix, fabric: &mut Fabric, rows: usize, cols: usize) -> Result<f64> {
    let group: Vec<_> = d.layout().procs().collect();
    let inputs: Vec<f64> = group
        .iter()
        .map(|&p| {
            let b = d.block(p);
            let (nr, nc) = (b.rows_below(rows), b.cols_below(cols));
            (0..nr)
                .flat_map(|lr| b.row(lr)[..nc].iter())
                .fold(0.0f64, |m, v| m.max(v.abs()))
        })
        .collect();
    fabric.scan(&group, inputs, 1, |a, b| a.max(*b))
}

pub(crate) struct Trace {
    pub perm: PermutationVector,
    pub iteration_traffic: Vec<u64>,
}

/// Elimination state over a distributed matrix whose first `n` columns are
/// being factored and whose remaining columns (up to `ncols`) ride along.
struct Eliminator<'a> {
    d: &'a mut DistMatrix,
    fabric: &'a mut Fabric,
    layout: Layout,
    n: usize,
    ncols: usize,
    perm: Vec<usize>,
    /// Multipliers of the current step, indexed by global row.
    mult: Vec<f64>,
    /// Current pivot row, indexed by global column.
    urow: Vec<f64>,
}

impl<'a> Eliminator<'a> {
    fn new(d: &'a mut DistMatrix, fabric: &'a mut Fabric, n: usize, ncols: usize) -> Self {
        let layout = d.layout().clone();
        Self {
            d,
            fabric,
            layout,
            n,
            ncols,
            perm: (0..n).collect(),
            mult: vec![0.0; n],
            urow: vec![0.0; ncols],
        }
    }

    fn run(mut self, block: Option<BlockParams>) -> Result<Trace> {
        let max_abs = max_abs_allreduce(self.d, self.fabric, self.n, self.n)?;
        let floor = singularity_floor(self.n, max_abs);
        let n = self.n;
        let omega = block.map_or(n, |b| b.omega().min(n));
        let blocked = block.is_some();
        let mut traffic = Vec::with_capacity(n);
        let mut k0 = 0;
        while k0 < n {
            let k1 = if blocked { (k0 + omega).min(n) } else { n };
            for k in k0..k1 {
                let before = self.fabric.traffic();
                let panel_end = if blocked { k1 } else { self.ncols };
                self.step(k, k0, panel_end, blocked, floor)?;
                let after = self.fabric.traffic();
                traffic.push(after.iter().zip(&before).map(|(a, b)| a - b).max().unwrap_or(0));
            }
            if blocked && k1 < self.ncols {
                self.finish_strip(k0, k1)?;
                self.update_trailing(k0, k1);
            }
            k0 = k1;
        }
        Ok(Trace {
            perm: PermutationVector::new(self.perm)?,
            iteration_traffic: traffic,
        })
    }

    fn step(&mut self, k: usize, k0: usize, panel_end: usize, blocked: bool, floor: f64) -> Result<()> {
        let n = self.n;
        let layout = &self.layout;
        if k + 1 == n {
            // Nothing left to eliminate: the owner only checks the last pivot.
            let v = self.d.get(k, k)?;
            if v == 0.0 || v.abs() < floor {
                return Err(Error::SingularMatrix { step: k });
            }
            return Ok(());
        }

        // 1. pivot search down column k
        let group = layout.col_holders(k);
        let inputs: Vec<PivotCandidate> = group
            .iter()
            .map(|&p| {
                let b = self.d.block(p);
                let lc = layout.local_col_of(p, k).expect("column holder");
                let mut best = PivotCandidate::NONE;
                for lr in b.rows_below(k)..b.rows_below(n) {
                    let v = b.get(lr, lc);
                    if best.index == usize::MAX || v.abs() > best.value.abs() {
                        best = PivotCandidate::new(v, b.rows[lr]);
                    }
                }
                best
            })
            .collect();
        let pivot = self.fabric.scan(&group, inputs, 2, |a, b| pivot_select(*a, *b))?;
        if pivot.index == usize::MAX || pivot.value == 0.0 || pivot.value.abs() < floor {
            return Err(Error::SingularMatrix { step: k });
        }
        let r = pivot.index;
        for &h in &group {
            self.fabric.multicast(h, &layout.row_peers(h), 2)?;
        }

        // Blocked runs also carry the pending multipliers of the strip.
        let pending = if blocked { k - k0 } else { 0 };

        // 2. pivot row down the processor columns
        for h in layout.row_holders(r) {
            let words = self.d.block(h).cols_below(self.ncols) + pending;
            if words > 0 {
                self.fabric.multicast(h, &layout.col_peers(h), words)?;
            }
        }

        // 3. explicit exchange; only the old row k is sent
        if r != k {
            for q in layout.row_holders(k) {
                let bq = self.d.block(q);
                let j0 = bq.cols[0];
                let words = bq.cols_below(self.ncols) + pending;
                let dest = layout.owner(r, j0)?.proc;
                if words > 0 {
                    self.fabric.send(q, dest, words)?;
                }
                let lk = layout.local_row_of(q, k).expect("row holder");
                let lr = layout.local_row_of(dest, r).expect("row holder");
                let row_k = self.d.block(q).row(lk).to_vec();
                let row_r = self.d.block(dest).row(lr).to_vec();
                self.d.block_mut(q).row_mut(lk).copy_from_slice(&row_r);
                self.d.block_mut(dest).row_mut(lr).copy_from_slice(&row_k);
            }
            self.perm.swap(k, r);
        }
        for q in layout.row_holders(k) {
            let b = self.d.block(q);
            let lk = layout.local_row_of(q, k).expect("row holder");
            for (lc, &j) in b.cols.iter().enumerate() {
                if j < self.ncols {
                    self.urow[j] = b.get(lk, lc);
                }
            }
        }

        // 4. multipliers along the processor rows
        let pivot_value = self.urow[k];
        for &h in &group {
            let lc = layout.local_col_of(h, k).expect("column holder");
            let b = self.d.block_mut(h);
            let (lo, hi) = (b.rows_below(k + 1), b.rows_below(n));
            for lr in lo..hi {
                let l = b.get(lr, lc) / pivot_value;
                b.set(lr, lc, l);
                self.mult[b.rows[lr]] = l;
            }
            let count = hi - lo;
            self.fabric.compute(h, count as u64);
            if count > 0 {
                self.fabric.multicast(h, &layout.row_peers(h), count)?;
            }
        }

        // 5. rank-1 update of the owned part of the trailing strip
        let end = panel_end.min(self.ncols);
        for p in layout.procs().collect::<Vec<_>>() {
            let b = self.d.block_mut(p);
            let (rlo, rhi) = (b.rows_below(k + 1), b.rows_below(n));
            let (clo, chi) = (b.cols_below(k + 1), b.cols_below(end));
            if rlo >= rhi || clo >= chi {
                continue;
            }
            let u: Vec<f64> = b.cols[clo..chi].iter().map(|&j| self.urow[j]).collect();
            let mut flops = 0u64;
            for lr in rlo..rhi {
                let l = self.mult[b.rows[lr]];
                if l == 0.0 {
                    continue;
                }
                for (a, &uj) in b.row_mut(lr)[clo..chi].iter_mut().zip(&u) {
                    *a -= l * uj;
                }
                flops += 2 * (chi - clo) as u64;
            }
            self.fabric.compute(p, flops);
        }
        Ok(())
    }

    /// Finish rows `k0..k1` of `U` right of the strip:
    /// `U[t, J] = A[t, J] − Σ_{k0 ≤ t' < t} L[t, t']·U[t', J]`.
    fn finish_strip(&mut self, k0: usize, k1: usize) -> Result<()> {
        let layout = self.layout.clone();
        for t in k0..k1 {
            let lrow: Vec<f64> = (k0..t).map(|tp| self.d.get(t, tp)).collect::<Result<_>>()?;
            let holders = layout.row_holders(t);
            for &q in &holders {
                let lt = layout.local_row_of(q, t).expect("row holder");
                let upper: Vec<Vec<f64>> = (k0..t)
                    .map(|tp| {
                        let b = self.d.block(q);
                        let lr = layout.local_row_of(q, tp).map(|lr| b.row(lr).to_vec());
                        lr.unwrap_or_default()
                    })
                    .collect();
                let (clo, chi) = {
                    let b = self.d.block(q);
                    (b.cols_below(k1), b.cols_below(self.ncols))
                };
                let mut flops = 0u64;
                for lc in clo..chi {
                    let j = self.d.block(q).cols[lc];
                    let mut acc = 0.0;
                    for (idx, &l) in lrow.iter().enumerate() {
                        let u = match upper[idx].get(lc) {
                            Some(&u) => u,
                            None => self.d.get(k0 + idx, j)?,
                        };
                        acc += l * u;
                    }
                    flops += 2 * lrow.len() as u64;
                    let b = self.d.block_mut(q);
                    let v = b.get(lt, lc) - acc;
                    b.set(lt, lc, v);
                }
                self.fabric.compute(q, flops);
                if chi > clo {
                    self.fabric.multicast(q, &layout.col_peers(q), chi - clo)?;
                }
            }
        }
        Ok(())
    }

    /// `A[i, J] −= L[i, k0..k1]·U[k0..k1, J]` for every owned row below the strip.
    fn update_trailing(&mut self, k0: usize, k1: usize) {
        let layout = self.layout.clone();
        let width = k1 - k0;
        let mut strip = vec![0.0; width * self.ncols];
        let mut lpanel = vec![0.0; self.n * width];
        for t in k0..k1 {
            for j in k1..self.ncols {
                strip[(t - k0) * self.ncols + j] = self.d.get(t, j).expect("in range");
            }
        }
        for i in k1..self.n {
            for t in k0..k1 {
                lpanel[i * width + t - k0] = self.d.get(i, t).expect("in range");
            }
        }
        for p in layout.procs() {
            let b = self.d.block_mut(p);
            let (rlo, rhi) = (b.rows_below(k1), b.rows_below(self.n));
            let (clo, chi) = (b.cols_below(k1), b.cols_below(self.ncols));
            if rlo >= rhi || clo >= chi {
                continue;
            }
            let cols = b.cols[clo..chi].to_vec();
            let mut flops = 0u64;
            for lr in rlo..rhi {
                let i = b.rows[lr];
                let l = &lpanel[i * width..(i + 1) * width];
                if l.iter().all(|v| *v == 0.0) {
                    continue;
                }
                let row = &mut b.row_mut(lr)[clo..chi];
                for (a, &j) in row.iter_mut().zip(&cols) {
                    let mut acc = 0.0;
                    for (t, &lt) in l.iter().enumerate() {
                        acc += lt * strip[t * self.ncols + j];
                    }
                    *a -= acc;
                }
                flops += 2 * (width * cols.len()) as u64;
            }
            self.fabric.compute(p, flops);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{generate, serial_lu_oracle, serial_upper_solve, MatrixKind};
    use crate::layout::LayoutKind;

    fn m(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    fn layout(kind: LayoutKind, s: usize, n: usize) -> Layout {
        Layout::new(kind, s, n, n).unwrap()
    }

    #[test]
    fn block_params() {
        assert_eq!(BlockParams::for_order(64).omega(), 8);
        assert_eq!(BlockParams::for_order(65).omega(), 9);
        assert_eq!(BlockParams::for_order(1).omega(), 1);
        assert!(BlockParams::new(0).is_err());
    }

    #[test]
    fn identity_factors_trivially() {
        for kind in LayoutKind::ALL {
            let a = DenseMatrix::identity(4);
            let f = lu_factor(&a, &layout(kind, 2, 4), &GridConfig::new(2), None).unwrap();
            assert!(f.perm.is_identity());
            assert_eq!(f.packed, a);
            assert_eq!(f.max_multiplier(), 0.0);
        }
    }

    #[test]
    fn forced_pivot() {
        let a = m(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let f = lu_factor(&a, &layout(LayoutKind::Scattered, 1, 2), &GridConfig::new(1), None)
            .unwrap();
        assert_eq!(f.perm.as_slice(), &[1, 0]);
        assert_eq!(f.l(), DenseMatrix::identity(2));
        assert_eq!(f.u(), DenseMatrix::identity(2));
    }

    #[test]
    fn matches_serial_oracle_bitwise() {
        let a = generate(MatrixKind::RandomUniform, 13, 13, 21).unwrap();
        let oracle = serial_lu_oracle(&a).unwrap();
        for kind in LayoutKind::ALL {
            for s in 1..=3 {
                let f = lu_factor(&a, &layout(kind, s, 13), &GridConfig::new(s), None).unwrap();
                assert_eq!(f.perm, oracle.perm, "{kind:?} s={s}");
                assert_eq!(f.u(), oracle.u);
                assert_eq!(f.l(), oracle.l);
            }
        }
    }

    #[test]
    fn blocked_matches_unblocked() {
        let a = generate(MatrixKind::RandomUniform, 16, 16, 5).unwrap();
        let l = layout(LayoutKind::Scattered, 2, 16);
        let cfg = GridConfig::new(2);
        let plain = lu_factor(&a, &l, &cfg, None).unwrap();
        let blocked = lu_factor(&a, &l, &cfg, Some(BlockParams::new(4).unwrap())).unwrap();
        assert_eq!(plain.perm, blocked.perm);
        assert_eq!(plain.perm, serial_lu_oracle(&a).unwrap().perm);
        let norm = a.norm(NormKind::Inf);
        let r0 = plain.residual(&a).unwrap();
        let r1 = blocked.residual(&a).unwrap();
        assert!((r0 - r1).abs() <= 1e-10 * norm);
        assert!(blocked.packed.sub(&plain.packed).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn blocked_with_odd_widths_and_layouts() {
        let a = generate(MatrixKind::RandomUniform, 11, 11, 8).unwrap();
        let oracle = serial_lu_oracle(&a).unwrap();
        for kind in LayoutKind::ALL {
            for omega in [1, 2, 3, 5, 11, 20] {
                let f = lu_factor(&a, &layout(kind, 2, 11), &GridConfig::new(2), Some(BlockParams::new(omega).unwrap()))
                    .unwrap();
                assert_eq!(f.perm, oracle.perm);
                assert!(f.residual(&a).unwrap() <= 64.0 * 11.0 * f64::EPSILON * a.norm(NormKind::Inf));
            }
        }
    }

    #[test]
    fn singular_matrix_reports_step() {
        let a = m(&[&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0], &[1.0, 0.0, 1.0]]);
        let err = lu_factor(&a, &layout(LayoutKind::Scattered, 2, 3), &GridConfig::new(2), None)
            .unwrap_err();
        assert!(matches!(err, Error::SingularMatrix { step: 2 }), "{err:?}");
        let z = DenseMatrix::zeros(3, 3);
        assert!(matches!(
            lu_factor(&z, &layout(LayoutKind::Blocked, 1, 3), &GridConfig::new(1), None),
            Err(Error::SingularMatrix { step: 0 })
        ));
    }

    #[test]
    fn mismatched_layout_rejected() {
        let a = DenseMatrix::identity(4);
        assert!(matches!(
            lu_factor(&a, &layout(LayoutKind::Scattered, 2, 4), &GridConfig::new(3), None),
            Err(Error::LayoutMismatch(_))
        ));
        assert!(matches!(
            lu_factor(&a, &layout(LayoutKind::Scattered, 2, 5), &GridConfig::new(2), None),
            Err(Error::LayoutMismatch(_))
        ));
    }

    #[test]
    fn solve_examples() {
        let b = DenseMatrix::column_vector(&[3.0, -1.0, 0.5]).unwrap();
        let r = solve(&DenseMatrix::identity(3), &b, &layout(LayoutKind::Scattered, 2, 3), &GridConfig::new(2), None)
            .unwrap();
        assert_eq!(r.x, b);

        let a = DenseMatrix::diag(&[2.0, 4.0]);
        let b = DenseMatrix::column_vector(&[2.0, 8.0]).unwrap();
        let r = solve(&a, &b, &layout(LayoutKind::Blocked, 2, 2), &GridConfig::new(2), None).unwrap();
        assert_eq!(r.x.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn solve_recovers_known_solution() {
        let n = 64;
        let a = generate(MatrixKind::RandomUniform, n, n, 64).unwrap();
        let b = DenseMatrix::column_vector(&a.matvec(&vec![1.0; n]).unwrap()).unwrap();
        for kind in LayoutKind::ALL {
            let r = solve(&a, &b, &layout(kind, 2, n), &GridConfig::new(2), None).unwrap();
            assert!(r.x.as_slice().iter().all(|x| (x - 1.0).abs() < 1e-8), "{kind:?}");
        }
    }

    #[test]
    fn back_substitution_examples() {
        let cfg = GridConfig::new(2);
        let r = back_substitute(&DenseMatrix::identity(3), &[1.0, 2.0, 3.0], &layout(LayoutKind::Scattered, 2, 3), &cfg)
            .unwrap();
        assert_eq!(r.x, vec![1.0, 2.0, 3.0]);
        let u = m(&[&[1.0, 1.0], &[0.0, 1.0]]);
        let r = back_substitute(&u, &[2.0, 1.0], &layout(LayoutKind::Blocked, 2, 2), &cfg).unwrap();
        assert_eq!(r.x, vec![1.0, 1.0]);
        let z = m(&[&[1.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(
            back_substitute(&z, &[1.0, 1.0], &layout(LayoutKind::Blocked, 2, 2), &cfg),
            Err(Error::ZeroDiagonal { row: 1 })
        ));
    }

    #[test]
    fn back_substitution_matches_serial() {
        let n = 32;
        let base = generate(MatrixKind::UpperTriangular, n, n, 4).unwrap();
        let u = DenseMatrix::from_fn(n, n, |i, j| base[(i, j)] + if i == j { 4.0 } else { 0.0 });
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let oracle = serial_upper_solve(&u, &rhs).unwrap();
        for kind in LayoutKind::ALL {
            let r = back_substitute(&u, &rhs, &layout(kind, 4, n), &GridConfig::new(4)).unwrap();
            for (x, y) in r.x.iter().zip(&oracle) {
                assert!((x - y).abs() <= 1e-10 * y.abs().max(1.0), "{kind:?}");
            }
        }
    }

    #[test]
    fn back_substitution_moves_few_words() {
        for s in [2, 4] {
            for n in [32, 64] {
                let a = generate(MatrixKind::RandomUniform, n, n, 2).unwrap();
                let l = layout(LayoutKind::Scattered, s, n);
                let f = lu_factor(&a, &l, &GridConfig::new(s), None).unwrap();
                let bs = back_substitute(&f.u(), &vec![1.0; n], &l, &GridConfig::new(s)).unwrap();
                let words = bs.ledger.total_words_sent();
                assert!(words <= 4 * (n * s) as u64, "n={n} s={s} words={words}");
                assert!(words < f.ledger.total_words_sent());
            }
        }
    }
}
