//! Infeasible primal-dual path-following interior-point method.
//!
//! Internally every program is put in the form
//!
//! ```text
//!   min <C, X>   s.t.  A(X) = b,  X in K
//!   max b'y      s.t.  C - A'(y) = Z,  Z in K
//! ```
//!
//! with `K` a product of PSD cones and one nonnegative orthant. Search
//! directions use the HKM scaling with a Mehrotra predictor-corrector step,
//! and the Schur complement is formed densely.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::program::{BlockKind, BlockValue, ConeProgram, Sense, Term};
use super::SdpError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iters: usize,
    /// Largest PSD block accepted.
    pub max_block_dim: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { gap_tol: 1e-8, feas_tol: 1e-8, max_iters: 200, max_block_dim: 256 }
    }
}

pub const NEAR_OPTIMAL_FACTOR: f64 = 1e3;
const STALL_ITERS: usize = 15;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// Progress stalled within a factor [`NEAR_OPTIMAL_FACTOR`] of the
    /// tolerances. The best iterate seen is returned.
    NearOptimal,
    /// Iteration budget exhausted, or the iterates broke down numerically,
    /// before the tolerances were met.
    MaxIters,
    Infeasible,
}

/// Primal-dual pair returned by [`solve`].
///
/// Values are reported in the program's own sense. For a maximisation the
/// dual is `min b'y  s.t.  A'(y) - c in K`; for a minimisation it is
/// `max b'y  s.t.  c - A'(y) in K`. `dual_slack` holds that cone element.
#[derive(Clone, Debug)]
pub struct ConeSolution {
    pub status: SolveStatus,
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub primal: Vec<BlockValue>,
    pub dual: Vec<f64>,
    pub dual_slack: Vec<BlockValue>,
    /// `||b - A(X)|| / (1 + ||b||)`.
    pub primal_residual: f64,
    /// `||C - Z - A'(y)|| / (1 + ||C||)`.
    pub dual_residual: f64,
    pub iterations: usize,
    /// Equality rows dropped by presolve as linearly dependent.
    pub dropped_rows: Vec<usize>,
}

impl ConeSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

const DENSE_ROW_FACTOR: usize = 2;
const DIVERGENCE: f64 = 1e10;
const DEPENDENT_ROW_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug)]
enum Slot {
    Psd(usize),
    Lp(usize),
}

/// Constraint row in full symmetric storage: both `(i, j)` and `(j, i)`
/// appear for off-diagonal entries.
#[derive(Clone, Debug, Default)]
struct Row {
    psd: Vec<(usize, Vec<(usize, usize, f64)>)>,
    lp: Vec<(usize, f64)>,
}

impl Row {
    fn dot(&self, other: &Row) -> f64 {
        let mut acc = 0.0;
        for (b, entries) in &self.psd {
            if let Some((_, oe)) = other.psd.iter().find(|(ob, _)| ob == b) {
                acc += sorted_dot3(entries, oe);
            }
        }
        let (mut p, mut q) = (0, 0);
        while p < self.lp.len() && q < other.lp.len() {
            match self.lp[p].0.cmp(&other.lp[q].0) {
                std::cmp::Ordering::Less => p += 1,
                std::cmp::Ordering::Greater => q += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.lp[p].1 * other.lp[q].1;
                    p += 1;
                    q += 1;
                }
            }
        }
        acc
    }
}

fn sorted_dot3(a: &[(usize, usize, f64)], b: &[(usize, usize, f64)]) -> f64 {
    let (mut p, mut q, mut acc) = (0, 0, 0.0);
    while p < a.len() && q < b.len() {
        match (a[p].0, a[p].1).cmp(&(b[q].0, b[q].1)) {
            std::cmp::Ordering::Less => p += 1,
            std::cmp::Ordering::Greater => q += 1,
            std::cmp::Ordering::Equal => {
                acc += a[p].2 * b[q].2;
                p += 1;
                q += 1;
            }
        }
    }
    acc
}

struct Compiled {
    slots: Vec<Slot>,
    psd_sizes: Vec<usize>,
    lp_len: usize,
    c_psd: Vec<DMatrix<f64>>,
    c_lp: DVector<f64>,
    rows: Vec<Row>,
    b: DVector<f64>,
    /// Indices (into the program's equalities) of the rows that were kept.
    kept: Vec<usize>,
    dropped: Vec<usize>,
    sign: f64,
}

/// Collapses terms into per-scalar coefficients keyed by `(slot, i<=j)`.
fn accumulate(
    terms: &[Term],
    program: &ConeProgram,
    slots: &[Slot],
) -> Result<(BTreeMap<(usize, usize, usize), f64>, BTreeMap<usize, f64>), SdpError> {
    let mut psd = BTreeMap::new();
    let mut lp = BTreeMap::new();
    for t in terms {
        match *t {
            Term::Psd { block, i, j, coef } => {
                let Some(&BlockKind::Psd(n)) = program.blocks.get(block.0) else {
                    return Err(SdpError::Malformed(format!("block {} is not a PSD block", block.0)));
                };
                if i >= n || j >= n {
                    return Err(SdpError::Malformed(format!("entry ({i}, {j}) outside PSD block of size {n}")));
                }
                let Slot::Psd(s) = slots[block.0] else { unreachable!() };
                let key = (s, i.min(j), i.max(j));
                *psd.entry(key).or_insert(0.0) += coef;
            }
            Term::Nonneg { block, k, coef } => {
                let Some(&BlockKind::Nonneg(n)) = program.blocks.get(block.0) else {
                    return Err(SdpError::Malformed(format!("block {} is not a nonnegative block", block.0)));
                };
                if k >= n {
                    return Err(SdpError::Malformed(format!("index {k} outside nonnegative block of size {n}")));
                }
                let Slot::Lp(off) = slots[block.0] else { unreachable!() };
                *lp.entry(off + k).or_insert(0.0) += coef;
            }
        }
        let coef = match *t {
            Term::Psd { coef, .. } | Term::Nonneg { coef, .. } => coef,
        };
        if !coef.is_finite() {
            return Err(SdpError::Malformed("non-finite coefficient".into()));
        }
    }
    Ok((psd, lp))
}

fn compile(program: &ConeProgram, opts: &SolveOptions) -> Result<Compiled, SdpError> {
    let mut slots = Vec::with_capacity(program.blocks.len());
    let mut psd_sizes = Vec::new();
    let mut lp_len = 0;
    for kind in &program.blocks {
        match *kind {
            BlockKind::Psd(n) => {
                if n == 0 {
                    return Err(SdpError::Malformed("empty PSD block".into()));
                }
                if n > opts.max_block_dim {
                    return Err(SdpError::DimensionCap { dim: n, cap: opts.max_block_dim });
                }
                slots.push(Slot::Psd(psd_sizes.len()));
                psd_sizes.push(n);
            }
            BlockKind::Nonneg(n) => {
                if n == 0 {
                    return Err(SdpError::Malformed("empty nonnegative block".into()));
                }
                slots.push(Slot::Lp(lp_len));
                lp_len += n;
            }
        }
    }
    if slots.is_empty() {
        return Err(SdpError::Malformed("program has no variables".into()));
    }
    let sign = match program.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };

    let (cp, cl) = accumulate(&program.objective.terms, program, &slots)?;
    let mut c_psd: Vec<DMatrix<f64>> = psd_sizes.iter().map(|&n| DMatrix::zeros(n, n)).collect();
    for ((s, i, j), v) in cp {
        if i == j {
            c_psd[s][(i, i)] += sign * v;
        } else {
            c_psd[s][(i, j)] += sign * v / 2.0;
            c_psd[s][(j, i)] += sign * v / 2.0;
        }
    }
    let mut c_lp = DVector::zeros(lp_len);
    for (k, v) in cl {
        c_lp[k] += sign * v;
    }

    let mut all_rows = Vec::with_capacity(program.equalities.len());
    for eq in &program.equalities {
        if !eq.rhs.is_finite() {
            return Err(SdpError::Malformed("non-finite right-hand side".into()));
        }
        let (p, l) = accumulate(&eq.lhs.terms, program, &slots)?;
        let mut per_block: BTreeMap<usize, Vec<(usize, usize, f64)>> = BTreeMap::new();
        for ((s, i, j), v) in p {
            if v == 0.0 {
                continue;
            }
            let e = per_block.entry(s).or_default();
            if i == j {
                e.push((i, i, v));
            } else {
                e.push((i, j, v / 2.0));
                e.push((j, i, v / 2.0));
            }
        }
        let psd = per_block
            .into_iter()
            .map(|(s, mut e)| {
                e.sort_by_key(|t| (t.0, t.1));
                (s, e)
            })
            .collect();
        let lp = l.into_iter().filter(|&(_, v)| v != 0.0).collect();
        all_rows.push(Row { psd, lp });
    }

    let (kept, dropped) = presolve(&all_rows, program)?;
    let rows: Vec<Row> = kept.iter().map(|&k| all_rows[k].clone()).collect();
    let b = DVector::from_iterator(kept.len(), kept.iter().map(|&k| program.equalities[k].rhs));
    Ok(Compiled { slots, psd_sizes, lp_len, c_psd, c_lp, rows, b, kept, dropped, sign })
}

/// Drops linearly dependent equality rows, using an incremental Cholesky
/// factorisation of the row Gram matrix. A dependent row whose right-hand
/// side disagrees with the kept rows makes the program infeasible.
fn presolve(rows: &[Row], program: &ConeProgram) -> Result<(Vec<usize>, Vec<usize>), SdpError> {
    let mut kept: Vec<usize> = Vec::new();
    let mut dropped = Vec::new();
    // lower-triangular factor of the kept Gram matrix, row by row
    let mut factor: Vec<Vec<f64>> = Vec::new();
    // L^{-1} b restricted to kept rows
    let mut w: Vec<f64> = Vec::new();
    for (k, row) in rows.iter().enumerate() {
        let gkk = row.dot(row);
        let rhs = program.equalities[k].rhs;
        if gkk == 0.0 {
            if rhs.abs() > 1e-9 {
                return Err(SdpError::InconsistentEqualities(k));
            }
            dropped.push(k);
            continue;
        }
        let g: Vec<f64> = kept.iter().map(|&j| rows[j].dot(row)).collect();
        let mut l = vec![0.0; kept.len()];
        for a in 0..kept.len() {
            let s: f64 = (0..a).map(|t| factor[a][t] * l[t]).sum();
            l[a] = (g[a] - s) / factor[a][a];
        }
        let pivot = gkk - l.iter().map(|x| x * x).sum::<f64>();
        let r = rhs - l.iter().zip(&w).map(|(x, y)| x * y).sum::<f64>();
        if pivot <= DEPENDENT_ROW_TOL * gkk {
            if r.abs() > 1e-8 * (1.0 + rhs.abs()) {
                return Err(SdpError::InconsistentEqualities(k));
            }
            dropped.push(k);
            continue;
        }
        let diag = pivot.sqrt();
        l.push(diag);
        factor.push(l);
        w.push(r / diag);
        kept.push(k);
    }
    Ok((kept, dropped))
}

#[derive(Clone)]
struct Iterate {
    xs: Vec<DMatrix<f64>>,
    x: DVector<f64>,
    y: DVector<f64>,
    zs: Vec<DMatrix<f64>>,
    z: DVector<f64>,
}

impl Compiled {
    fn apply_a(&self, xs: &[DMatrix<f64>], x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.rows.len(),
            self.rows.iter().map(|row| {
                let mut acc = 0.0;
                for (s, entries) in &row.psd {
                    let m = &xs[*s];
                    for &(p, q, u) in entries {
                        acc += u * m[(p, q)];
                    }
                }
                for &(j, v) in &row.lp {
                    acc += v * x[j];
                }
                acc
            }),
        )
    }

    fn apply_at(&self, y: &DVector<f64>) -> (Vec<DMatrix<f64>>, DVector<f64>) {
        let mut ms: Vec<DMatrix<f64>> = self.psd_sizes.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        let mut v = DVector::zeros(self.lp_len);
        for (k, row) in self.rows.iter().enumerate() {
            for (s, entries) in &row.psd {
                for &(p, q, u) in entries {
                    ms[*s][(p, q)] += u * y[k];
                }
            }
            for &(j, a) in &row.lp {
                v[j] += a * y[k];
            }
        }
        (ms, v)
    }

    fn objective(&self, xs: &[DMatrix<f64>], x: &DVector<f64>) -> f64 {
        xs.iter().zip(&self.c_psd).map(|(a, b)| a.dot(b)).sum::<f64>() + self.c_lp.dot(x)
    }

    fn c_norm(&self) -> f64 {
        (self.c_psd.iter().map(|m| m.norm_squared()).sum::<f64>() + self.c_lp.norm_squared()).sqrt()
    }

    /// `M_kl = sum_b tr(A_k X A_l W) + sum_j a_kj a_lj x_j / z_j`.
    fn schur(&self, xs: &[DMatrix<f64>], ws: &[DMatrix<f64>], ratio: &DVector<f64>) -> DMatrix<f64> {
        let m = self.rows.len();
        let mut out = DMatrix::zeros(m, m);
        // rows touching each PSD block
        let mut touch: Vec<Vec<(usize, &[(usize, usize, f64)])>> = vec![Vec::new(); self.psd_sizes.len()];
        for (l, row) in self.rows.iter().enumerate() {
            for (s, e) in &row.psd {
                touch[*s].push((l, e.as_slice()));
            }
        }
        for (k, row) in self.rows.iter().enumerate() {
            for (s, ek) in &row.psd {
                let n = self.psd_sizes[*s];
                let x = &xs[*s];
                let w = &ws[*s];
                if ek.len() > DENSE_ROW_FACTOR * n {
                    let mut ak = DMatrix::zeros(n, n);
                    for &(p, q, u) in ek {
                        ak[(p, q)] += u;
                    }
                    let t = w * ak * x;
                    for &(l, el) in &touch[*s] {
                        let mut acc = 0.0;
                        for &(r, c, v) in el {
                            acc += v * t[(c, r)];
                        }
                        out[(k, l)] += acc;
                    }
                } else {
                    for &(l, el) in &touch[*s] {
                        let mut acc = 0.0;
                        for &(p, q, u) in ek.iter() {
                            for &(r, c, v) in el {
                                acc += u * v * x[(q, r)] * w[(c, p)];
                            }
                        }
                        out[(k, l)] += acc;
                    }
                }
            }
        }
        if self.lp_len > 0 {
            let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.lp_len];
            for (k, row) in self.rows.iter().enumerate() {
                for &(j, a) in &row.lp {
                    cols[j].push((k, a));
                }
            }
            for (j, col) in cols.iter().enumerate() {
                let d = ratio[j];
                for &(k, a) in col {
                    for &(l, b) in col {
                        out[(k, l)] += a * b * d;
                    }
                }
            }
        }
        (&out + out.transpose()) * 0.5
    }
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest `alpha` keeping `x + alpha dx` in the PSD cone; `None` when the
/// factorisation of `x` fails.
fn max_step_psd(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> Option<f64> {
    let chol = nalgebra::Cholesky::new(x.clone())?;
    let l = chol.l();
    let a = l.solve_lower_triangular(dx)?;
    let b = l.solve_lower_triangular(&a.transpose())?;
    let lam = nalgebra::SymmetricEigen::new(sym(&b))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Some(if lam < 0.0 { -1.0 / lam } else { f64::INFINITY })
}

fn max_step_lp(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter()
        .zip(dx.iter())
        .filter(|(_, &d)| d < 0.0)
        .map(|(&v, &d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

/// Moves `x` along `dx` by `alpha`, shrinking `alpha` until every block stays
/// positive definite.
fn interior_step(x: &[DMatrix<f64>], dx: &[DMatrix<f64>], alpha: &mut f64) -> Option<Vec<DMatrix<f64>>> {
    for _ in 0..30 {
        let next: Vec<DMatrix<f64>> = x.iter().zip(dx).map(|(a, d)| sym(&(a + d * *alpha))).collect();
        if next.iter().all(|m| nalgebra::Cholesky::new(m.clone()).is_some()) {
            return Some(next);
        }
        *alpha *= 0.8;
    }
    None
}

fn inv_pd(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    nalgebra::Cholesky::new(m.clone()).map(|c| sym(&c.inverse()))
}

fn solve_schur(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if m.nrows() == 0 {
        return Some(DVector::zeros(0));
    }
    let refine = |c: nalgebra::Cholesky<f64, nalgebra::Dyn>| {
        let mut x = c.solve(rhs);
        for _ in 0..3 {
            let r = rhs - m * &x;
            x += c.solve(&r);
        }
        x
    };
    if let Some(c) = nalgebra::Cholesky::new(m.clone()) {
        return Some(refine(c));
    }
    let scale = m.diagonal().iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1.0);
    let mut reg = m.clone();
    for i in 0..reg.nrows() {
        reg[(i, i)] += 1e-13 * scale;
    }
    if let Some(c) = nalgebra::Cholesky::new(reg) {
        return Some(refine(c));
    }
    m.clone().lu().solve(rhs)
}

struct Direction {
    dxs: Vec<DMatrix<f64>>,
    dx: DVector<f64>,
    dy: DVector<f64>,
    dzs: Vec<DMatrix<f64>>,
    dz: DVector<f64>,
}

/// Solves a cone program.
///
/// Fails only for malformed programs or programs over the size cap;
/// convergence problems and infeasibility are reported through
/// [`ConeSolution::status`].
pub fn solve(program: &ConeProgram, opts: &SolveOptions) -> Result<ConeSolution, SdpError> {
    let cp = compile(program, opts)?;
    Ok(run(program, &cp, opts))
}

fn run(program: &ConeProgram, cp: &Compiled, opts: &SolveOptions) -> ConeSolution {
    let m = cp.rows.len();
    let nu = cp.psd_sizes.iter().sum::<usize>() + cp.lp_len;
    let b_norm = cp.b.norm();
    let c_norm = cp.c_norm();

    // starting point
    let mut it = {
        let mut xs = Vec::new();
        let mut zs = Vec::new();
        for (s, &n) in cp.psd_sizes.iter().enumerate() {
            let mut xi = 10f64.max((n as f64).sqrt());
            let mut zeta = 10f64.max((n as f64).sqrt()).max(cp.c_psd[s].norm());
            for (k, row) in cp.rows.iter().enumerate() {
                if let Some((_, e)) = row.psd.iter().find(|(b, _)| *b == s) {
                    let na = e.iter().map(|t| t.2 * t.2).sum::<f64>().sqrt();
                    xi = xi.max(n as f64 * (1.0 + cp.b[k].abs()) / (1.0 + na));
                    zeta = zeta.max(na);
                }
            }
            xs.push(DMatrix::identity(n, n) * xi);
            zs.push(DMatrix::identity(n, n) * zeta);
        }
        let mut xi = 10f64.max((cp.lp_len as f64).sqrt());
        let mut zeta = 10f64.max((cp.lp_len as f64).sqrt()).max(cp.c_lp.norm());
        for (k, row) in cp.rows.iter().enumerate() {
            if !row.lp.is_empty() {
                let na = row.lp.iter().map(|t| t.1 * t.1).sum::<f64>().sqrt();
                xi = xi.max((1.0 + cp.b[k].abs()) / (1.0 + na));
                zeta = zeta.max(na);
            }
        }
        Iterate {
            xs,
            x: DVector::from_element(cp.lp_len, xi),
            y: DVector::zeros(m),
            zs,
            z: DVector::from_element(cp.lp_len, zeta),
        }
    };

    let mut status = SolveStatus::MaxIters;
    let mut iterations = 0;
    let mut best: Option<(f64, Iterate, usize)> = None;
    loop {
        let ax = cp.apply_a(&it.xs, &it.x);
        let rp = &cp.b - &ax;
        let (aty_s, aty_l) = cp.apply_at(&it.y);
        let rds: Vec<DMatrix<f64>> =
            (0..cp.psd_sizes.len()).map(|s| &cp.c_psd[s] - &it.zs[s] - &aty_s[s]).collect();
        let rdl = &cp.c_lp - &it.z - &aty_l;
        let pobj = cp.objective(&it.xs, &it.x);
        let dobj = cp.b.dot(&it.y);
        let prel = rp.norm() / (1.0 + b_norm);
        let drel = (rds.iter().map(|r| r.norm_squared()).sum::<f64>() + rdl.norm_squared()).sqrt() / (1.0 + c_norm);
        let gap_ok = (pobj - dobj).abs() <= opts.gap_tol * (1.0 + pobj.abs());
        if gap_ok && prel <= opts.feas_tol && drel <= opts.feas_tol {
            status = SolveStatus::Optimal;
            break;
        }
        let merit = ((pobj - dobj).abs() / (opts.gap_tol * (1.0 + pobj.abs())))
            .max(prel / opts.feas_tol)
            .max(drel / opts.feas_tol);
        if best.as_ref().is_none_or(|(m, _, _)| merit < *m) {
            best = Some((merit, it.clone(), iterations));
        } else if best.as_ref().is_some_and(|(_, _, k)| iterations >= k + STALL_ITERS) {
            break;
        }
        let y_big = it.y.amax() > DIVERGENCE;
        let x_big = it.xs.iter().any(|x| x.amax() > DIVERGENCE) || (cp.lp_len > 0 && it.x.amax() > DIVERGENCE);
        if y_big || x_big {
            status = SolveStatus::Infeasible;
            break;
        }
        if iterations >= opts.max_iters {
            break;
        }
        iterations += 1;

        let mu = (it.xs.iter().zip(&it.zs).map(|(x, z)| x.dot(z)).sum::<f64>() + it.x.dot(&it.z)) / nu as f64;
        let Some(ws) = it.zs.iter().map(inv_pd).collect::<Option<Vec<_>>>() else { break };
        let zinv_l = it.z.map(|v| 1.0 / v);
        let ratio = it.x.component_mul(&zinv_l);
        let schur = cp.schur(&it.xs, &ws, &ratio);

        let direction = |sigma_mu: f64, gs: Option<(&[DMatrix<f64>], &DVector<f64>)>| -> Option<Direction> {
            // R = sigma mu W - X - G W - X Rd W  (HKM), same for the orthant
            let mut rs = Vec::with_capacity(cp.psd_sizes.len());
            for s in 0..cp.psd_sizes.len() {
                let w = &ws[s];
                let mut r = w * sigma_mu - &it.xs[s] - &it.xs[s] * &rds[s] * w;
                if let Some((g, _)) = gs {
                    r -= &g[s] * w;
                }
                rs.push(r);
            }
            let mut rl = zinv_l.map(|v| v * sigma_mu) - &it.x - ratio.component_mul(&rdl);
            if let Some((_, gl)) = gs {
                rl -= gl.component_mul(&zinv_l);
            }
            let rhs = &rp - cp.apply_a(&rs, &rl);
            let dy = solve_schur(&schur, &rhs)?;
            let (atdy_s, atdy_l) = cp.apply_at(&dy);
            let dzs: Vec<DMatrix<f64>> = (0..cp.psd_sizes.len()).map(|s| &rds[s] - &atdy_s[s]).collect();
            let dz = &rdl - atdy_l;
            let dxs: Vec<DMatrix<f64>> = (0..cp.psd_sizes.len())
                .map(|s| sym(&(&rs[s] - &it.xs[s] * &dzs[s] * &ws[s])))
                .collect();
            let dx = &rl - ratio.component_mul(&dz);
            if dy.iter().chain(dx.iter()).chain(dz.iter()).any(|v| !v.is_finite())
                || dxs.iter().chain(dzs.iter()).any(|m| m.iter().any(|v| !v.is_finite()))
            {
                return None;
            }
            Some(Direction { dxs, dx, dy, dzs, dz })
        };
        let steps = |d: &Direction| -> Option<(f64, f64)> {
            let mut ap = max_step_lp(&it.x, &d.dx);
            let mut ad = max_step_lp(&it.z, &d.dz);
            for s in 0..cp.psd_sizes.len() {
                ap = ap.min(max_step_psd(&it.xs[s], &d.dxs[s])?);
                ad = ad.min(max_step_psd(&it.zs[s], &d.dzs[s])?);
            }
            Some((ap, ad))
        };

        let Some(pred) = direction(0.0, None) else { break };
        let Some((ap_max, ad_max)) = steps(&pred) else { break };
        let (ap, ad) = (ap_max.min(1.0), ad_max.min(1.0));
        let mut mu_aff = 0.0;
        for s in 0..cp.psd_sizes.len() {
            mu_aff += (&it.xs[s] + &pred.dxs[s] * ap).dot(&(&it.zs[s] + &pred.dzs[s] * ad));
        }
        mu_aff += (&it.x + &pred.dx * ap).dot(&(&it.z + &pred.dz * ad));
        mu_aff /= nu as f64;
        let expon = 1f64.max(3.0 * ap.min(ad).powi(2));
        let sigma = if mu > 0.0 { (mu_aff.max(0.0) / mu).powf(expon).min(1.0) } else { 0.0 };

        let gs: Vec<DMatrix<f64>> = (0..cp.psd_sizes.len()).map(|s| &pred.dxs[s] * &pred.dzs[s]).collect();
        let gl = pred.dx.component_mul(&pred.dz);
        let Some(corr) = direction(sigma * mu, Some((&gs, &gl))) else { break };
        let Some((ap_max, ad_max)) = steps(&corr) else { break };
        let gamma = 0.9 + 0.09 * ap.min(ad);
        let mut ap = (gamma * ap_max).min(1.0);
        let mut ad = (gamma * ad_max).min(1.0);
        let Some(xs) = interior_step(&it.xs, &corr.dxs, &mut ap) else { break };
        let Some(zs) = interior_step(&it.zs, &corr.dzs, &mut ad) else { break };
        it.xs = xs;
        it.zs = zs;
        it.x += &corr.dx * ap;
        it.z += &corr.dz * ad;
        it.y += &corr.dy * ad;
    }

    if status == SolveStatus::MaxIters {
        if let Some((merit, b, _)) = best {
            it = b;
            if merit <= NEAR_OPTIMAL_FACTOR {
                status = SolveStatus::NearOptimal;
            }
        }
    }
    let pobj = cp.objective(&it.xs, &it.x);
    let dobj = cp.b.dot(&it.y);
    let rp = &cp.b - cp.apply_a(&it.xs, &it.x);
    let (aty_s, aty_l) = cp.apply_at(&it.y);
    let dres = (0..cp.psd_sizes.len())
        .map(|s| (&cp.c_psd[s] - &it.zs[s] - &aty_s[s]).norm_squared())
        .sum::<f64>()
        + (&cp.c_lp - &it.z - &aty_l).norm_squared();

    let to_user = |mats: &[DMatrix<f64>], vec: &DVector<f64>| -> Vec<BlockValue> {
        program
            .blocks
            .iter()
            .zip(&cp.slots)
            .map(|(kind, slot)| match (kind, slot) {
                (BlockKind::Psd(_), Slot::Psd(s)) => BlockValue::Psd(mats[*s].clone()),
                (BlockKind::Nonneg(n), Slot::Lp(off)) => BlockValue::Nonneg(vec.rows(*off, *n).iter().copied().collect()),
                _ => unreachable!(),
            })
            .collect()
    };
    let mut dual = vec![0.0; program.equalities.len()];
    for (pos, &k) in cp.kept.iter().enumerate() {
        dual[k] = cp.sign * it.y[pos];
    }
    let primal_value = cp.sign * pobj;
    let dual_value = cp.sign * dobj;
    ConeSolution {
        status,
        primal_value,
        dual_value,
        gap: (primal_value - dual_value).abs(),
        primal: to_user(&it.xs, &it.x),
        dual,
        dual_slack: to_user(&it.zs, &it.z),
        primal_residual: rp.norm() / (1.0 + b_norm),
        dual_residual: dres.sqrt() / (1.0 + c_norm),
        iterations,
        dropped_rows: cp.dropped.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_step_stays_positive_definite() {
        let x = vec![DMatrix::identity(2, 2)];
        let dx = vec![DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, 0.0])];
        let mut alpha = 0.99;
        let next = interior_step(&x, &dx, &mut alpha).unwrap();
        assert!(alpha < 0.5);
        assert!(nalgebra::Cholesky::new(next[0].clone()).is_some());
        let mut alpha = 0.4;
        interior_step(&x, &dx, &mut alpha).unwrap();
        assert_eq!(alpha, 0.4);
    }

    #[test]
    fn refined_schur_solve_is_accurate() {
        let m = DMatrix::from_fn(6, 6, |i, j| 1.0 / (i + j + 1) as f64);
        let rhs = DVector::from_element(6, 1.0);
        let x = solve_schur(&m, &rhs).unwrap();
        assert!((&m * &x - &rhs).norm() < 1e-8);
    }
}
