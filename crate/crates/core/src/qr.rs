//! Orthogonal triangularization on the simulated grid.
//!
//! Householder: at step `k` the holders of column `k` reduce its norm, form
//! the unit vector `u` of the reflector `I − 2uuᵀ`, and broadcast it along
//! their processor rows exactly as elimination broadcasts multipliers. Every
//! processor then forms partial products `uᵀA` for its columns, which are
//! summed within each processor column before the update `A −= 2u(uᵀA)`.
//!
//! Givens: adjacent-row rotations annihilate the subdiagonal in diagonal
//! wavefronts. Entry `(i, j)` is zeroed by rotating rows `i − 1` and `i` in
//! round `(m − 1 − i) + 2j`; rotations within one round touch disjoint rows.

use crate::dense::{singularity_floor, DenseMatrix};
use crate::error::{Error, Result};
use crate::fabric::{CostLedger, Fabric, GridConfig};
use crate::layout::{DistMatrix, Layout};
use crate::lu::{back_substitute_distributed, max_abs_allreduce};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation {
    /// The rotation acts on rows `row − 1` and `row`.
    pub row: usize,
    pub c: f64,
    pub s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Reflectors {
    /// Unit vectors `u_k` (length `m`, zero above `k`).
    Householder(Vec<Vec<f64>>),
    /// Rotations in the order they were applied.
    Givens(Vec<Rotation>),
}

#[derive(Clone, Debug)]
pub struct QrFactorization {
    pub m: usize,
    pub n: usize,
    pub r: DenseMatrix,
    pub reflectors: Reflectors,
    pub ledger: CostLedger,
}

impl QrFactorization {
    /// `Qᵀ` applied to the first `cols` columns of the `m × m` identity,
    /// returned as `m × cols` columns of `Q`.
    fn q_columns(&self, cols: usize) -> DenseMatrix {
        let m = self.m;
        match &self.reflectors {
            Reflectors::Householder(us) => {
                // Q = H_0 H_1 ⋯ H_{n−1}; apply right to left to E.
                let mut e = DenseMatrix::from_fn(m, cols, |i, j| if i == j { 1.0 } else { 0.0 });
                for u in us.iter().rev() {
                    for j in 0..cols {
                        let w: f64 = (0..m).map(|i| u[i] * e[(i, j)]).sum();
                        if w != 0.0 {
                            for i in 0..m {
                                e[(i, j)] -= 2.0 * u[i] * w;
                            }
                        }
                    }
                }
                e
            }
            Reflectors::Givens(rots) => {
                // Accumulate Qᵀ = G_last ⋯ G_1 on the identity, keep its first rows.
                let mut qt = DenseMatrix::identity(m);
                for g in rots {
                    for j in 0..m {
                        let x = qt[(g.row - 1, j)];
                        let y = qt[(g.row, j)];
                        qt[(g.row - 1, j)] = g.c * x + g.s * y;
                        qt[(g.row, j)] = -g.s * x + g.c * y;
                    }
                }
                DenseMatrix::from_fn(m, cols, |i, j| qt[(j, i)])
            }
        }
    }

    /// The `m × n` factor with orthonormal columns.
    pub fn q_thin(&self) -> DenseMatrix {
        self.q_columns(self.n)
    }

    /// The full `m × m` orthogonal factor.
    pub fn q_full(&self) -> DenseMatrix {
        self.q_columns(self.m)
    }

    pub fn rotation_count(&self) -> usize {
        match &self.reflectors {
            Reflectors::Householder(us) => us.len(),
            Reflectors::Givens(rots) => rots.len(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LeastSquares {
    pub x: DenseMatrix,
    pub ledger: CostLedger,
}

fn check_input(a: &DenseMatrix, layout: &Layout, config: &GridConfig) -> Result<()> {
    if a.rows() < a.cols() {
        return Err(Error::InvalidDimensions(format!(
            "QR needs rows ≥ cols, got {}x{}",
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
    if layout.side() != config.s {
        return Err(Error::LayoutMismatch(format!(
            "layout is for a {0}x{0} grid but the fabric is {1}x{1}",
            layout.side(),
            config.s
        )));
    }
    Ok(())
}

fn upper_part(d: &DistMatrix, n: usize) -> DenseMatrix {
    let full = d.collect();
    DenseMatrix::from_fn(n, n, |i, j| if j >= i { full[(i, j)] } else { 0.0 })
}

pub fn qr_householder(a: &DenseMatrix, layout: &Layout, config: &GridConfig) -> Result<QrFactorization> {
    check_input(a, layout, config)?;
    let (m, n) = (a.rows(), a.cols());
    let mut fabric = Fabric::new(config.clone())?;
    let mut d = DistMatrix::distribute(a, layout)?;
    let us = householder_distributed(&mut d, &mut fabric, m, n, n)?;
    Ok(QrFactorization {
        m,
        n,
        r: upper_part(&d, n),
        reflectors: Reflectors::Householder(us),
        ledger: fabric.ledger(),
    })
}

pub fn qr_givens(a: &DenseMatrix, layout: &Layout, config: &GridConfig) -> Result<QrFactorization> {
    check_input(a, layout, config)?;
    let (m, n) = (a.rows(), a.cols());
    let mut fabric = Fabric::new(config.clone())?;
    let mut d = DistMatrix::distribute(a, layout)?;
    let rots = givens_distributed(&mut d, &mut fabric, m, n)?;
    Ok(QrFactorization {
        m,
        n,
        r: upper_part(&d, n),
        reflectors: Reflectors::Givens(rots),
        ledger: fabric.ledger(),
    })
}

/// `min ‖Ax − b‖₂` for full-column-rank `A`: reflect the augmented matrix
/// `[A | b]`, then back substitute with the leading `n × n` block.
pub fn least_squares(
    a: &DenseMatrix,
    b: &DenseMatrix,
    layout: &Layout,
    config: &GridConfig,
) -> Result<LeastSquares> {
    check_input(a, layout, config)?;
    let (m, n) = (a.rows(), a.cols());
    if b.rows() != m || b.cols() != 1 {
        return Err(Error::InvalidDimensions(format!(
            "right-hand side must be {m}x1, got {}x{}",
            b.rows(),
            b.cols()
        )));
    }
    let aug = DenseMatrix::from_fn(m, n + 1, |i, j| if j < n { a[(i, j)] } else { b[(i, 0)] });
    let mut fabric = Fabric::new(config.clone())?;
    let mut d = DistMatrix::distribute(&aug, &layout.reshaped(m, n + 1)?)?;
    householder_distributed(&mut d, &mut fabric, m, n, n + 1)?;
    let x = back_substitute_distributed(&d, &mut fabric, n)?;
    Ok(LeastSquares {
        x: DenseMatrix::column_vector(&x)?,
        ledger: fabric.ledger(),
    })
}

/// Householder triangularization of the first `n` columns; columns `n..ncols`
/// are transformed alongside.
fn householder_distributed(
    d: &mut DistMatrix,
    fabric: &mut Fabric,
    m: usize,
    n: usize,
    ncols: usize,
) -> Result<Vec<Vec<f64>>> {
    let layout = d.layout().clone();
    let floor = singularity_floor(m, max_abs_allreduce(d, fabric, m, n)?);
    let groups = layout.col_peer_groups();
    let mut us = Vec::with_capacity(n);
    for k in 0..n {
        // column norm and the diagonal entry
        let holders = layout.col_holders(k);
        let inputs: Vec<(f64, f64)> = holders
            .iter()
            .map(|&h| {
                let b = d.block(h);
                let lc = layout.local_col_of(h, k).expect("column holder");
                let (lo, hi) = (b.rows_below(k), b.rows_below(m));
                let sumsq: f64 = (lo..hi).map(|lr| b.get(lr, lc) * b.get(lr, lc)).sum();
                let diag = layout.local_row_of(h, k).map_or(0.0, |lr| b.get(lr, lc));
                fabric.compute(h, 2 * (hi - lo) as u64);
                (sumsq, diag)
            })
            .collect();
        let (sumsq, akk) = fabric.scan(&holders, inputs, 2, |a, b| (a.0 + b.0, a.1 + b.1))?;
        let norm = sumsq.sqrt();
        if norm == 0.0 || norm < floor {
            return Err(Error::RankDeficient { step: k });
        }
        let alpha = if akk < 0.0 { norm } else { -norm };
        let vnorm = (2.0 * norm * (norm + akk.abs())).sqrt();

        // reflector, then broadcast along processor rows
        let mut u = vec![0.0; m];
        for &h in &holders {
            let lc = layout.local_col_of(h, k).expect("column holder");
            let b = d.block_mut(h);
            let (lo, hi) = (b.rows_below(k), b.rows_below(m));
            for lr in lo..hi {
                let i = b.rows[lr];
                let v = if i == k { b.get(lr, lc) - alpha } else { b.get(lr, lc) };
                u[i] = v / vnorm;
                b.set(lr, lc, if i == k { alpha } else { 0.0 });
            }
            fabric.compute(h, (hi - lo) as u64 + 3);
            if hi > lo {
                fabric.multicast(h, &layout.row_peers(h), hi - lo)?;
            }
        }

        // w = uᵀA on the trailing columns, summed per processor column
        for group in &groups {
            let active: Vec<_> = group
                .iter()
                .copied()
                .filter(|&p| {
                    let b = d.block(p);
                    b.rows_below(m) > b.rows_below(k)
                })
                .collect();
            let Some(&first) = active.first() else { continue };
            let (clo, chi) = {
                let b = d.block(first);
                (b.cols_below(k + 1), b.cols_below(ncols))
            };
            if clo >= chi {
                continue;
            }
            let partials: Vec<Vec<f64>> = active
                .iter()
                .map(|&p| {
                    let b = d.block(p);
                    let (lo, hi) = (b.rows_below(k), b.rows_below(m));
                    let mut w = vec![0.0; chi - clo];
                    for lr in lo..hi {
                        let ui = u[b.rows[lr]];
                        for (wc, a) in w.iter_mut().zip(&b.row(lr)[clo..chi]) {
                            *wc += ui * a;
                        }
                    }
                    fabric.compute(p, 2 * ((hi - lo) * (chi - clo)) as u64);
                    w
                })
                .collect();
            let w = fabric.scan(&active, partials, chi - clo, |a, b| {
                a.iter().zip(b).map(|(x, y)| x + y).collect()
            })?;
            let w2: Vec<f64> = w.iter().map(|x| 2.0 * x).collect();
            for &p in &active {
                let b = d.block_mut(p);
                let (lo, hi) = (b.rows_below(k), b.rows_below(m));
                for lr in lo..hi {
                    let ui = u[b.rows[lr]];
                    for (a, wc) in b.row_mut(lr)[clo..chi].iter_mut().zip(&w2) {
                        *a -= ui * wc;
                    }
                }
                fabric.compute(p, (2 * (hi - lo) * (chi - clo) + (chi - clo)) as u64);
            }
        }
        us.push(u);
    }
    Ok(us)
}

fn givens_distributed(d: &mut DistMatrix, fabric: &mut Fabric, m: usize, n: usize) -> Result<Vec<Rotation>> {
    let layout = d.layout().clone();
    let floor = singularity_floor(m, max_abs_allreduce(d, fabric, m, n)?);
    let mut rots = Vec::new();
    if m >= 2 {
        let last_round = (m - 2) + 2 * (n - 1);
        for t in 0..=last_round {
            for j in 0..n {
                // i = m − 1 − t + 2j, restricted to j < i ≤ m − 1
                let Some(i) = (m - 1 + 2 * j).checked_sub(t) else { continue };
                if i <= j || i >= m {
                    continue;
                }
                if let Some(rot) = rotate_rows(d, fabric, &layout, i, j, n)? {
                    rots.push(rot);
                }
            }
        }
    }
    for k in 0..n {
        let v = d.get(k, k)?;
        if v == 0.0 || v.abs() < floor {
            return Err(Error::RankDeficient { step: k });
        }
    }
    Ok(rots)
}

/// Rotate rows `i − 1` and `i` to annihilate `(i, j)`. Returns `None` when the
/// entry is already zero.
fn rotate_rows(
    d: &mut DistMatrix,
    fabric: &mut Fabric,
    layout: &Layout,
    i: usize,
    j: usize,
    n: usize,
) -> Result<Option<Rotation>> {
    let x = d.get(i - 1, j)?;
    let y = d.get(i, j)?;
    if y == 0.0 {
        return Ok(None);
    }

    // exchange the two row segments right of column j−1
    let upper = layout.row_holders(i - 1);
    let segment = |p| {
        let b: &crate::layout::LocalBlock = d.block(p);
        b.cols_below(n) - b.cols_below(j)
    };
    for &q in &upper {
        let partner = layout.owner(i, d.block(q).cols[0])?.proc;
        let words = segment(q);
        if words > 0 && partner != q {
            fabric.send(q, partner, words)?;
            fabric.send(partner, q, words)?;
        }
    }

    // the owner of (i, j) forms the rotation and shares it with both rows
    let r = x.hypot(y);
    let (c, s) = (x / r, y / r);
    let origin = layout.owner(i, j)?.proc;
    fabric.compute(origin, 6);
    let mut audience = layout.row_holders(i);
    for &q in &upper {
        if !audience.contains(&q) {
            audience.push(q);
        }
    }
    fabric.multicast(origin, &audience, 2)?;

    for &q in &upper {
        let partner = layout.owner(i, d.block(q).cols[0])?.proc;
        let (lo, hi) = {
            let b = d.block(q);
            (b.cols_below(j), b.cols_below(n))
        };
        let lu = layout.local_row_of(q, i - 1).expect("row holder");
        let ll = layout.local_row_of(partner, i).expect("row holder");
        let top = d.block(q).row(lu)[lo..hi].to_vec();
        let bottom = d.block(partner).row(ll)[lo..hi].to_vec();
        let new_top: Vec<f64> = top.iter().zip(&bottom).map(|(a, b)| c * a + s * b).collect();
        let new_bottom: Vec<f64> = top.iter().zip(&bottom).map(|(a, b)| -s * a + c * b).collect();
        d.block_mut(q).row_mut(lu)[lo..hi].copy_from_slice(&new_top);
        d.block_mut(partner).row_mut(ll)[lo..hi].copy_from_slice(&new_bottom);
        fabric.compute(q, 3 * (hi - lo) as u64);
        fabric.compute(partner, 3 * (hi - lo) as u64);
    }
    d.set(i - 1, j, r)?;
    d.set(i, j, 0.0)?;
    Ok(Some(Rotation { row: i, c, s }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{generate, serial_least_squares, MatrixKind, NormKind};
    use crate::layout::LayoutKind;
    use crate::lu::solve;

    fn lay(kind: LayoutKind, s: usize, m: usize, n: usize) -> Layout {
        Layout::new(kind, s, m, n).unwrap()
    }

    fn orthogonality_defect(q: &DenseMatrix) -> f64 {
        let n = q.cols();
        q.transpose().matmul(q).unwrap().sub(&DenseMatrix::identity(n)).unwrap().max_abs()
    }

    fn check(f: &QrFactorization, a: &DenseMatrix) {
        let q = f.q_thin();
        assert!(orthogonality_defect(&q) <= 1e-12);
        let res = a.sub(&q.matmul(&f.r).unwrap()).unwrap().norm(NormKind::Inf);
        assert!(res <= 1e3 * a.rows() as f64 * f64::EPSILON * a.norm(NormKind::Inf));
        let (fa, fr) = (a.norm(NormKind::Frobenius), f.r.norm(NormKind::Frobenius));
        assert!((fa - fr).abs() <= 1e-10 * fa);
    }

    #[test]
    fn identity_is_already_triangular() {
        let a = DenseMatrix::identity(3);
        for f in [
            qr_householder(&a, &lay(LayoutKind::Scattered, 2, 3, 3), &GridConfig::new(2)).unwrap(),
            qr_givens(&a, &lay(LayoutKind::Scattered, 2, 3, 3), &GridConfig::new(2)).unwrap(),
        ] {
            for i in 0..3 {
                for j in 0..3 {
                    assert_eq!(f.r[(i, j)].abs(), a[(i, j)]);
                    assert!((f.q_thin()[(i, j)].abs() - a[(i, j)]).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn single_column_norm() {
        let a = DenseMatrix::from_rows(&[[3.0], [4.0]]).unwrap();
        let l = lay(LayoutKind::Blocked, 1, 2, 1);
        let h = qr_householder(&a, &l, &GridConfig::new(1)).unwrap();
        assert!((h.r[(0, 0)].abs() - 5.0).abs() < 1e-15);
        let g = qr_givens(&a, &l, &GridConfig::new(1)).unwrap();
        assert!((g.r[(0, 0)].abs() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn gram_matrix_preserved() {
        let a = generate(MatrixKind::RandomUniform, 16, 8, 3).unwrap();
        let f = qr_householder(&a, &lay(LayoutKind::Scattered, 2, 16, 8), &GridConfig::new(2)).unwrap();
        let ata = a.transpose().matmul(&a).unwrap();
        let rtr = f.r.transpose().matmul(&f.r).unwrap();
        assert!(ata.sub(&rtr).unwrap().max_abs() <= 1e-10 * ata.max_abs());
        check(&f, &a);
    }

    #[test]
    fn givens_skips_triangular_input() {
        let a = generate(MatrixKind::UpperTriangular, 6, 6, 1).unwrap();
        let a = DenseMatrix::from_fn(6, 6, |i, j| a[(i, j)] + if i == j { 2.0 } else { 0.0 });
        let f = qr_givens(&a, &lay(LayoutKind::Scattered, 2, 6, 6), &GridConfig::new(2)).unwrap();
        assert_eq!(f.rotation_count(), 0);
        assert_eq!(f.r, a);
    }

    #[test]
    fn givens_swap() {
        let a = DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let f = qr_givens(&a, &lay(LayoutKind::Scattered, 2, 2, 2), &GridConfig::new(2)).unwrap();
        let abs = DenseMatrix::from_fn(2, 2, |i, j| f.r[(i, j)].abs());
        assert_eq!(abs, DenseMatrix::identity(2));
    }

    #[test]
    fn both_methods_agree_across_layouts() {
        for (m, n) in [(16, 8), (32, 32), (13, 7)] {
            let a = generate(MatrixKind::RandomUniform, m, n, (m * n) as u64).unwrap();
            for kind in LayoutKind::ALL {
                for s in [1, 2, 3] {
                    let l = lay(kind, s, m, n);
                    let cfg = GridConfig::new(s);
                    let h = qr_householder(&a, &l, &cfg).unwrap();
                    let g = qr_givens(&a, &l, &cfg).unwrap();
                    check(&h, &a);
                    check(&g, &a);
                    for k in 0..n {
                        let (x, y) = (h.r[(k, k)].abs(), g.r[(k, k)].abs());
                        assert!((x - y).abs() <= 1e-9 * x, "{kind:?} s={s} k={k}");
                    }
                }
            }
        }
    }

    #[test]
    fn rank_deficiency_detected() {
        let a = DenseMatrix::from_rows(&[[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]]).unwrap();
        let l = lay(LayoutKind::Scattered, 2, 3, 2);
        assert!(matches!(
            qr_householder(&a, &l, &GridConfig::new(2)),
            Err(Error::RankDeficient { step: 1 })
        ));
        assert!(matches!(qr_givens(&a, &l, &GridConfig::new(2)), Err(Error::RankDeficient { step: 1 })));
    }

    #[test]
    fn mean_of_observations() {
        let a = DenseMatrix::from_rows(&[[1.0], [1.0]]).unwrap();
        let b = DenseMatrix::column_vector(&[0.0, 2.0]).unwrap();
        let x = least_squares(&a, &b, &lay(LayoutKind::Blocked, 2, 2, 1), &GridConfig::new(2)).unwrap();
        assert!((x.x[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn square_system_matches_elimination() {
        let n = 16;
        let a = generate(MatrixKind::RandomUniform, n, n, 77).unwrap();
        let b = generate(MatrixKind::RandomUniform, n, 1, 78).unwrap();
        let l = lay(LayoutKind::Scattered, 2, n, n);
        let cfg = GridConfig::new(2);
        let ls = least_squares(&a, &b, &l, &cfg).unwrap();
        let ge = solve(&a, &b, &l, &cfg, None).unwrap();
        assert!(ls.x.sub(&ge.x).unwrap().max_abs() <= 1e-8 * ge.x.max_abs().max(1.0));
    }

    #[test]
    fn orthogonal_rhs_gives_zero() {
        let (m, n) = (12, 5);
        let a = generate(MatrixKind::RandomUniform, m, n, 9).unwrap();
        let l = lay(LayoutKind::Scattered, 2, m, n);
        let cfg = GridConfig::new(2);
        let q = qr_householder(&a, &l, &cfg).unwrap().q_thin();
        let b0 = generate(MatrixKind::RandomUniform, m, 1, 10).unwrap();
        let proj = q.matmul(&q.transpose().matmul(&b0).unwrap()).unwrap();
        let b = b0.sub(&proj).unwrap();
        let x = least_squares(&a, &b, &l, &cfg).unwrap();
        assert!(x.x.max_abs() < 1e-12);
    }

    #[test]
    fn normal_equations_hold() {
        let (m, n) = (30, 9);
        let a = generate(MatrixKind::RandomUniform, m, n, 31).unwrap();
        let b = generate(MatrixKind::RandomUniform, m, 1, 32).unwrap();
        let oracle = serial_least_squares(&a, b.as_slice()).unwrap();
        for kind in LayoutKind::ALL {
            let x = least_squares(&a, &b, &lay(kind, 2, m, n), &GridConfig::new(2)).unwrap().x;
            let r = a.matmul(&x).unwrap().sub(&b).unwrap();
            let g = a.transpose().matmul(&r).unwrap();
            assert!(g.max_abs() <= 1e-8 * a.norm(NormKind::Frobenius) * b.norm(NormKind::Frobenius));
            for (u, v) in x.as_slice().iter().zip(&oracle) {
                assert!((u - v).abs() <= 1e-10 * v.abs().max(1.0));
            }
        }
    }

    #[test]
    fn wrong_shapes_rejected() {
        let a = DenseMatrix::zeros(2, 3);
        assert!(matches!(
            qr_householder(&a, &lay(LayoutKind::Blocked, 1, 2, 3), &GridConfig::new(1)),
            Err(Error::InvalidDimensions(_))
        ));
    }
}
