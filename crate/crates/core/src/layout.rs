//! Mapping of global matrix entries onto the processor grid.
//!
//! Every layout gives each processor a Cartesian product of global rows and
//! global columns. Blocked and scattered layouts pad the matrix with zero rows
//! and columns up to multiples of `s`; the original shape is kept so that
//! [`DistMatrix::collect`] can strip the padding again.

use serde::{Deserialize, Serialize};

use crate::dense::{DenseMatrix, PermutationVector};
use crate::error::{Error, Result};
use crate::fabric::Coord;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayoutKind {
    /// Column `j` lives on processor `j mod P` (ranks row-major over the grid).
    ColumnWrapped,
    /// Row `i` lives on processor `i mod P`.
    RowWrapped,
    /// Contiguous `(m/s) × (n/s)` blocks.
    Blocked,
    /// Entry `(i, j)` lives on processor `(i mod s, j mod s)`.
    Scattered,
}

impl LayoutKind {
    pub const ALL: [LayoutKind; 4] = [
        LayoutKind::ColumnWrapped,
        LayoutKind::RowWrapped,
        LayoutKind::Blocked,
        LayoutKind::Scattered,
    ];

    pub fn is_padded(self) -> bool {
        matches!(self, LayoutKind::Blocked | LayoutKind::Scattered)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Owner {
    pub proc: Coord,
    pub local_row: usize,
    pub local_col: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    kind: LayoutKind,
    s: usize,
    rows: usize,
    cols: usize,
    padded_rows: usize,
    padded_cols: usize,
}

impl Layout {
    pub fn new(kind: LayoutKind, s: usize, rows: usize, cols: usize) -> Result<Self> {
        if s == 0 {
            return Err(Error::InvalidArgument("grid side must be positive".into()));
        }
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidDimensions(format!(
                "cannot lay out a {rows}x{cols} matrix"
            )));
        }
        let (padded_rows, padded_cols) = if kind.is_padded() {
            (rows.next_multiple_of(s), cols.next_multiple_of(s))
        } else {
            (rows, cols)
        };
        Ok(Self {
            kind,
            s,
            rows,
            cols,
            padded_rows,
            padded_cols,
        })
    }

    pub fn kind(&self) -> LayoutKind {
        self.kind
    }

    pub fn side(&self) -> usize {
        self.s
    }

    pub fn nprocs(&self) -> usize {
        self.s * self.s
    }

    /// Unpadded shape.
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn padded_shape(&self) -> (usize, usize) {
        (self.padded_rows, self.padded_cols)
    }

    /// Same kind and grid, different global shape.
    pub fn reshaped(&self, rows: usize, cols: usize) -> Result<Self> {
        Self::new(self.kind, self.s, rows, cols)
    }

    pub fn coord_of(&self, rank: usize) -> Coord {
        Coord::new(rank / self.s, rank % self.s)
    }

    pub fn rank_of(&self, c: Coord) -> usize {
        c.row * self.s + c.col
    }

    pub fn procs(&self) -> impl Iterator<Item = Coord> + '_ {
        (0..self.nprocs()).map(|r| self.coord_of(r))
    }

    fn block_rows(&self) -> usize {
        self.padded_rows / self.s
    }

    fn block_cols(&self) -> usize {
        self.padded_cols / self.s
    }

    pub fn owner(&self, i: usize, j: usize) -> Result<Owner> {
        if i >= self.padded_rows || j >= self.padded_cols {
            return Err(Error::IndexOutOfRange {
                row: i,
                col: j,
                rows: self.padded_rows,
                cols: self.padded_cols,
            });
        }
        let s = self.s;
        let p = self.nprocs();
        let owner = match self.kind {
            LayoutKind::Scattered => Owner {
                proc: Coord::new(i % s, j % s),
                local_row: i / s,
                local_col: j / s,
            },
            LayoutKind::Blocked => {
                let (br, bc) = (self.block_rows(), self.block_cols());
                Owner {
                    proc: Coord::new(i / br, j / bc),
                    local_row: i % br,
                    local_col: j % bc,
                }
            }
            LayoutKind::ColumnWrapped => Owner {
                proc: self.coord_of(j % p),
                local_row: i,
                local_col: j / p,
            },
            LayoutKind::RowWrapped => Owner {
                proc: self.coord_of(i % p),
                local_row: i / p,
                local_col: j,
            },
        };
        Ok(owner)
    }

    /// Inverse of [`Layout::owner`].
    pub fn global(&self, proc: Coord, local_row: usize, local_col: usize) -> Result<(usize, usize)> {
        if proc.row >= self.s || proc.col >= self.s {
            return Err(Error::OffGrid {
                row: proc.row,
                col: proc.col,
                side: self.s,
            });
        }
        let (lr, lc) = self.local_shape(proc);
        if local_row >= lr || local_col >= lc {
            return Err(Error::IndexOutOfRange {
                row: local_row,
                col: local_col,
                rows: lr,
                cols: lc,
            });
        }
        Ok((
            self.global_row(proc, local_row),
            self.global_col(proc, local_col),
        ))
    }

    fn global_row(&self, proc: Coord, lr: usize) -> usize {
        match self.kind {
            LayoutKind::Scattered => proc.row + lr * self.s,
            LayoutKind::Blocked => proc.row * self.block_rows() + lr,
            LayoutKind::ColumnWrapped => lr,
            LayoutKind::RowWrapped => self.rank_of(proc) + lr * self.nprocs(),
        }
    }

    fn global_col(&self, proc: Coord, lc: usize) -> usize {
        match self.kind {
            LayoutKind::Scattered => proc.col + lc * self.s,
            LayoutKind::Blocked => proc.col * self.block_cols() + lc,
            LayoutKind::ColumnWrapped => self.rank_of(proc) + lc * self.nprocs(),
            LayoutKind::RowWrapped => lc,
        }
    }

    fn wrapped_count(total: usize, rank: usize, p: usize) -> usize {
        if rank < total {
            (total - rank).div_ceil(p)
        } else {
            0
        }
    }

    pub fn local_shape(&self, proc: Coord) -> (usize, usize) {
        let rank = self.rank_of(proc);
        match self.kind {
            LayoutKind::Scattered | LayoutKind::Blocked => (self.block_rows(), self.block_cols()),
            LayoutKind::ColumnWrapped => (
                self.rows,
                Self::wrapped_count(self.cols, rank, self.nprocs()),
            ),
            LayoutKind::RowWrapped => (
                Self::wrapped_count(self.rows, rank, self.nprocs()),
                self.cols,
            ),
        }
    }

    /// Global rows held by `proc`, ascending.
    pub fn local_rows(&self, proc: Coord) -> Vec<usize> {
        let (lr, _) = self.local_shape(proc);
        (0..lr).map(|l| self.global_row(proc, l)).collect()
    }

    /// Global columns held by `proc`, ascending.
    pub fn local_cols(&self, proc: Coord) -> Vec<usize> {
        let (_, lc) = self.local_shape(proc);
        (0..lc).map(|l| self.global_col(proc, l)).collect()
    }

    /// Local index of global row `i` on `proc`, if it holds that row.
    pub fn local_row_of(&self, proc: Coord, i: usize) -> Option<usize> {
        let o = self.owner(i, 0).ok()?;
        let held = match self.kind {
            LayoutKind::ColumnWrapped => self.local_shape(proc).1 > 0,
            LayoutKind::Scattered | LayoutKind::Blocked => o.proc.row == proc.row,
            LayoutKind::RowWrapped => o.proc == proc,
        };
        held.then_some(o.local_row)
    }

    /// Local index of global column `j` on `proc`, if it holds that column.
    pub fn local_col_of(&self, proc: Coord, j: usize) -> Option<usize> {
        let o = self.owner(0, j).ok()?;
        let held = match self.kind {
            LayoutKind::RowWrapped => self.local_shape(proc).0 > 0,
            LayoutKind::Scattered | LayoutKind::Blocked => o.proc.col == proc.col,
            LayoutKind::ColumnWrapped => o.proc == proc,
        };
        held.then_some(o.local_col)
    }

    fn holds_anything(&self, proc: Coord) -> bool {
        let (r, c) = self.local_shape(proc);
        r > 0 && c > 0
    }

    /// Processors holding at least one entry of global row `i`, in rank order.
    pub fn row_holders(&self, i: usize) -> Vec<Coord> {
        self.procs()
            .filter(|&p| self.holds_anything(p) && self.local_row_of(p, i).is_some())
            .collect()
    }

    /// Processors holding at least one entry of global column `j`, in rank order.
    pub fn col_holders(&self, j: usize) -> Vec<Coord> {
        self.procs()
            .filter(|&p| self.holds_anything(p) && self.local_col_of(p, j).is_some())
            .collect()
    }

    /// Processors (including `proc`) holding exactly the rows `proc` holds.
    pub fn row_peers(&self, proc: Coord) -> Vec<Coord> {
        match self.local_rows(proc).first() {
            Some(&i) if self.holds_anything(proc) => self.row_holders(i),
            _ => Vec::new(),
        }
    }

    /// Processors (including `proc`) holding exactly the columns `proc` holds.
    pub fn col_peers(&self, proc: Coord) -> Vec<Coord> {
        match self.local_cols(proc).first() {
            Some(&j) if self.holds_anything(proc) => self.col_holders(j),
            _ => Vec::new(),
        }
    }

    /// Partition of the non-empty processors into classes sharing a column set.
    pub fn col_peer_groups(&self) -> Vec<Vec<Coord>> {
        let mut groups: Vec<Vec<Coord>> = Vec::new();
        for p in self.procs() {
            if !self.holds_anything(p) || groups.iter().any(|g| g.contains(&p)) {
                continue;
            }
            groups.push(self.col_peers(p));
        }
        groups
    }
}

/// One processor's share of a distributed matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalBlock {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    data: Vec<f64>,
}

impl LocalBlock {
    fn zeros(rows: Vec<usize>, cols: Vec<usize>) -> Self {
        let data = vec![0.0; rows.len() * cols.len()];
        Self { rows, cols, data }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows.len(), self.cols.len())
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, lr: usize, lc: usize) -> f64 {
        self.data[lr * self.cols.len() + lc]
    }

    #[inline]
    pub fn set(&mut self, lr: usize, lc: usize, v: f64) {
        let w = self.cols.len();
        self.data[lr * w + lc] = v;
    }

    pub fn row(&self, lr: usize) -> &[f64] {
        let w = self.cols.len();
        &self.data[lr * w..(lr + 1) * w]
    }

    pub fn row_mut(&mut self, lr: usize) -> &mut [f64] {
        let w = self.cols.len();
        &mut self.data[lr * w..(lr + 1) * w]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Number of local rows with global index below `bound`.
    pub fn rows_below(&self, bound: usize) -> usize {
        self.rows.partition_point(|&i| i < bound)
    }

    /// Number of local columns with global index below `bound`.
    pub fn cols_below(&self, bound: usize) -> usize {
        self.cols.partition_point(|&j| j < bound)
    }

    pub fn nonzeros(&self) -> usize {
        self.data.iter().filter(|v| **v != 0.0).count()
    }
}

/// A matrix spread over the grid according to a [`Layout`].
#[derive(Clone, Debug, PartialEq)]
pub struct DistMatrix {
    layout: Layout,
    blocks: Vec<LocalBlock>,
}

impl DistMatrix {
    pub fn distribute(a: &DenseMatrix, layout: &Layout) -> Result<Self> {
        if (a.rows(), a.cols()) != layout.shape() {
            return Err(Error::LayoutMismatch(format!(
                "{}x{} matrix against a layout for {}x{}",
                a.rows(),
                a.cols(),
                layout.shape().0,
                layout.shape().1
            )));
        }
        let blocks = layout
            .procs()
            .map(|p| {
                let mut b = LocalBlock::zeros(layout.local_rows(p), layout.local_cols(p));
                for (lr, &i) in b.rows.clone().iter().enumerate() {
                    if i >= a.rows() {
                        continue;
                    }
                    for (lc, &j) in b.cols.clone().iter().enumerate() {
                        if j < a.cols() {
                            b.set(lr, lc, a[(i, j)]);
                        }
                    }
                }
                b
            })
            .collect();
        Ok(Self {
            layout: layout.clone(),
            blocks,
        })
    }

    /// Reassemble the global matrix, dropping padding.
    pub fn collect(&self) -> DenseMatrix {
        let (m, n) = self.layout.shape();
        let mut out = DenseMatrix::zeros(m, n);
        for b in &self.blocks {
            for (lr, &i) in b.rows.iter().enumerate() {
                if i >= m {
                    continue;
                }
                for (lc, &j) in b.cols.iter().enumerate() {
                    if j < n {
                        out[(i, j)] = b.get(lr, lc);
                    }
                }
            }
        }
        out
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn block(&self, p: Coord) -> &LocalBlock {
        &self.blocks[self.layout.rank_of(p)]
    }

    pub fn block_mut(&mut self, p: Coord) -> &mut LocalBlock {
        let r = self.layout.rank_of(p);
        &mut self.blocks[r]
    }

    pub fn blocks(&self) -> &[LocalBlock] {
        &self.blocks
    }

    pub fn get(&self, i: usize, j: usize) -> Result<f64> {
        let o = self.layout.owner(i, j)?;
        Ok(self.block(o.proc).get(o.local_row, o.local_col))
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) -> Result<()> {
        let o = self.layout.owner(i, j)?;
        self.block_mut(o.proc).set(o.local_row, o.local_col, v);
        Ok(())
    }

    pub fn nonzeros_per_proc(&self) -> Vec<usize> {
        self.blocks.iter().map(LocalBlock::nonzeros).collect()
    }
}

/// The `k × k` permutation taking a blocked index to its scattered position:
/// `j(i) = i·s mod (k−1)` for `i < k−1`, and `j(k−1) = k−1`.
pub fn pi_permutation(k: usize, s: usize) -> Result<PermutationVector> {
    if k == 0 || s == 0 || k % s != 0 {
        return Err(Error::InvalidArgument(format!(
            "grid side {s} must divide the dimension {k}"
        )));
    }
    let map = (0..k)
        .map(|i| if i + 1 < k { (i * s) % (k - 1) } else { k - 1 })
        .collect();
    PermutationVector::new(map)
}

/// True iff the scattered distribution of `a` equals, processor by processor
/// and entry by entry, the blocked distribution of `π_m·A·π_n⁻¹`.
pub fn scattered_blocked_equivalence(a: &DenseMatrix, s: usize) -> Result<bool> {
    let (m, n) = (a.rows(), a.cols());
    if s == 0 || m % s != 0 || n % s != 0 {
        return Err(Error::InvalidArgument(format!(
            "grid side {s} must divide both dimensions of a {m}x{n} matrix"
        )));
    }
    let pm = pi_permutation(m, s)?;
    let pn = pi_permutation(n, s)?;
    let permuted = a.permute_rows(&pm)?.permute_cols(&pn)?;
    let scattered = DistMatrix::distribute(a, &Layout::new(LayoutKind::Scattered, s, m, n)?)?;
    let blocked = DistMatrix::distribute(&permuted, &Layout::new(LayoutKind::Blocked, s, m, n)?)?;
    Ok(scattered
        .blocks
        .iter()
        .zip(&blocked.blocks)
        .all(|(x, y)| x.as_slice() == y.as_slice()))
}
