//! One-copy and multi-copy fidelities of distilling a coherence bit, and the
//! related analytic rates and bounds.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{c, entrywise_abs, hermitian_eig, trace_norm, ComplexMatrix, DensityMatrix, DEFAULT_TENSOR_CAP};
use crate::measures::{eta, eta_argmax, q_measure};
use crate::sdp::{realify, solve, trace_norm_epigraph, ConeProgram, LinearFunctional, SdpError, Sense, SolveOptions, SolveStatus, Term};

/// Largest state dimension handed to the cone solver by default.
pub const DEFAULT_SDP_CAP: usize = 256;
/// Slack allowed by [`cn2_check`].
pub const CN2_TOL: f64 = 1e-9;
/// A solve that stalls short of its tolerances is accepted when the repaired
/// bounds are within this multiple of the gap tolerance.
pub const CERTIFIED_GAP_FACTOR: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FidelityOptions {
    pub solver: SolveOptions,
    pub sdp_cap: usize,
}

impl Default for FidelityOptions {
    fn default() -> Self {
        Self { solver: SolveOptions::default(), sdp_cap: DEFAULT_SDP_CAP }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Witness {
    /// Feasible `X` for the maximisation, and `(D, N)` for the minimisation.
    Sio { x: DMatrix<f64>, d: Vec<f64>, n: DMatrix<f64> },
    /// Diagonal `D` attaining `||rho + D||_1`.
    Mio { d: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct FidelityResult {
    pub value: f64,
    /// Objective at the primal witness (a lower bound for SIO).
    pub primal_value: f64,
    /// Objective at the dual witness (an upper bound).
    pub dual_value: f64,
    pub gap: f64,
    pub iterations: usize,
    pub witness: Witness,
}

fn check_cap(dim: usize, cap: usize) -> Result<()> {
    if dim > cap {
        return Err(Error::DimensionCap { dim, cap });
    }
    Ok(())
}

fn solve_checked(program: &ConeProgram, opts: &SolveOptions) -> Result<crate::sdp::ConeSolution> {
    let sol = solve(program, opts)?;
    if !matches!(sol.status, SolveStatus::Optimal | SolveStatus::NearOptimal) {
        return Err(SdpError::NotConverged { status: sol.status, iterations: sol.iterations, gap: sol.gap }.into());
    }
    Ok(sol)
}

/// Accepts a stalled solve only when the repaired bounds are tight.
fn certify(sol: &crate::sdp::ConeSolution, lower: f64, upper: f64, opts: &SolveOptions) -> Result<()> {
    let gap = upper - lower;
    if sol.status != SolveStatus::Optimal && gap > CERTIFIED_GAP_FACTOR * opts.gap_tol * (1.0 + upper.abs()) {
        return Err(SdpError::NotConverged { status: sol.status, iterations: sol.iterations, gap }.into());
    }
    Ok(())
}

/// Index of pair `(i, j)`, `i < j`, in row-major upper-triangular order.
fn pair_index(n: usize, i: usize, j: usize) -> usize {
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// `F_SIO(rho, 2)` by the semidefinite program over `X` with zero diagonal,
/// nonnegative entries and `X <= I`, together with its dual over `(D, N)`.
///
/// The returned witnesses are repaired to be exactly feasible, so
/// `primal_value <= F <= dual_value` holds rigorously up to rounding.
pub fn fidelity_sio_bit(rho: &DensityMatrix, opts: &FidelityOptions) -> Result<FidelityResult> {
    let n = rho.dim();
    check_cap(n, opts.sdp_cap)?;
    let abs = entrywise_abs(rho.matrix());
    let w = |i: usize, j: usize| abs[(i, j)].re;
    if n == 1 {
        let witness = Witness::Sio { x: DMatrix::zeros(1, 1), d: vec![0.0], n: DMatrix::zeros(1, 1) };
        return Ok(FidelityResult { value: 0.5, primal_value: 0.5, dual_value: 0.5, gap: 0.0, iterations: 0, witness });
    }

    // S = I - X is PSD with unit diagonal; x_ij = X_ij = -S_ij >= 0.
    let pairs = n * (n - 1) / 2;
    let mut p = ConeProgram::new(Sense::Maximize);
    let s = p.add_psd_block(n);
    let x = p.add_nonneg_block(pairs);
    let mut obj = LinearFunctional::new();
    for i in 0..n {
        for j in i + 1..n {
            obj.push(Term::Nonneg { block: x, k: pair_index(n, i, j), coef: 2.0 * w(i, j) });
        }
    }
    p.set_objective(obj);
    for i in 0..n {
        p.add_equality(LinearFunctional::new().psd(s, i, i, 1.0), 1.0);
    }
    for i in 0..n {
        for j in i + 1..n {
            p.add_equality(LinearFunctional::new().psd(s, i, j, 1.0).nonneg(x, pair_index(n, i, j), 1.0), 0.0);
        }
    }
    let mut solver = opts.solver;
    solver.max_block_dim = solver.max_block_dim.max(n);
    let sol = solve_checked(&p, &solver)?;

    // primal repair: zero diagonal, clamp, rescale into X <= I
    let xv = sol.primal[x.0].as_nonneg();
    let mut xm = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = xv[pair_index(n, i, j)].max(0.0);
            xm[(i, j)] = v;
            xm[(j, i)] = v;
        }
    }
    let top = nalgebra::SymmetricEigen::new(xm.clone()).eigenvalues.max();
    if top > 1.0 {
        xm /= top;
    }
    let mut inner = 0.0;
    for i in 0..n {
        for j in 0..n {
            inner += w(i, j) * xm[(i, j)];
        }
    }
    let primal_value = 0.5 * (inner + 1.0);

    // dual: M = |rho| + D + N with M_ii = y_i and M_ij = z_ij / 2
    let y = &sol.dual;
    let d: Vec<f64> = (0..n).map(|i| y[i] - rho[(i, i)].re).collect();
    let mut nm = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = (0.5 * y[n + pair_index(n, i, j)] - w(i, j)).max(0.0);
            nm[(i, j)] = v;
            nm[(j, i)] = v;
        }
    }
    let m = ComplexMatrix::from_fn(n, n, |i, j| {
        let dd = if i == j { d[i] } else { 0.0 };
        c(w(i, j) + dd + nm[(i, j)], 0.0)
    });
    let dual_value = 0.5 * (trace_norm(&m)? + 1.0);
    certify(&sol, primal_value, dual_value, &solver)?;

    Ok(FidelityResult {
        value: primal_value,
        primal_value,
        dual_value,
        gap: dual_value - primal_value,
        iterations: sol.iterations,
        witness: Witness::Sio { x: xm, d, n: nm },
    })
}

/// `A = (I + X o omega) / 2` with `omega_ij = rho_ij / |rho_ij|` (1 where
/// `rho_ij = 0`). It satisfies `tr(rho A) = (tr(|rho| X) + 1) / 2`.
pub fn reconstruct_operator(rho: &DensityMatrix, x: &DMatrix<f64>) -> Result<ComplexMatrix> {
    let n = rho.dim();
    if x.nrows() != n || x.ncols() != n {
        return Err(Error::DimensionMismatch(n, x.nrows()));
    }
    Ok(ComplexMatrix::from_fn(n, n, |i, j| {
        let z = rho[(i, j)];
        let phase = if z.norm() > 0.0 { z / z.norm() } else { c(1.0, 0.0) };
        let id = if i == j { 1.0 } else { 0.0 };
        (c(id, 0.0) + phase * x[(i, j)]) * 0.5
    }))
}

/// Whether `2 Delta(a) - |a|` is PSD up to [`CN2_TOL`], i.e. `a` has
/// coherence number at most two.
pub fn cn2_check(a: &ComplexMatrix) -> Result<bool> {
    if !a.is_square() {
        return Err(Error::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    let eig = hermitian_eig(a)?;
    if eig.min() < -crate::matrix::PSD_TOL {
        return Err(Error::NotPsd(eig.min()));
    }
    let n = a.rows();
    let m = ComplexMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j { 2.0 * a[(i, i)].re } else { 0.0 };
        c(diag - a[(i, j)].norm(), 0.0)
    });
    Ok(hermitian_eig(&m)?.min() >= -CN2_TOL)
}

/// `F_MIO(rho, 2) = (min_D ||rho + D||_1 + 1) / 2` over real diagonal `D`.
pub fn fidelity_mio_bit(rho: &DensityMatrix, opts: &FidelityOptions) -> Result<FidelityResult> {
    let n = rho.dim();
    check_cap(n, opts.sdp_cap)?;
    let r = realify(rho.matrix());
    let m_dim = 2 * n;
    let mut p = ConeProgram::new(Sense::Minimize);
    let epi = trace_norm_epigraph(&mut p, m_dim);
    p.set_objective(epi.bound());
    for i in 0..m_dim {
        for j in 0..m_dim {
            if i != j {
                let mut f = LinearFunctional::new();
                f.push(epi.m_entry(i, j, 1.0));
                p.add_equality(f, r[(i, j)]);
            }
        }
    }
    // the diagonal of M is free apart from the tie between its two copies
    for k in 0..n {
        let mut f = LinearFunctional::new();
        f.push(epi.m_entry(k, k, 1.0));
        f.push(epi.m_entry(n + k, n + k, -1.0));
        p.add_equality(f, 0.0);
    }
    let mut solver = opts.solver;
    solver.max_block_dim = solver.max_block_dim.max(2 * m_dim);
    let sol = solve_checked(&p, &solver)?;

    let z = sol.primal[epi.block.0].as_psd();
    let d: Vec<f64> = (0..n).map(|k| 0.5 * (z[(k, m_dim + k)] + z[(n + k, m_dim + n + k)]) - rho[(k, k)].re).collect();
    let shifted = ComplexMatrix::from_fn(n, n, |i, j| if i == j { rho[(i, j)] + d[i] } else { rho[(i, j)] });
    let dual_value = 0.5 * (trace_norm(&shifted)? + 1.0);
    let lower = 0.5 * (0.5 * sol.dual_value + 1.0);
    certify(&sol, lower, dual_value, &solver)?;
    Ok(FidelityResult {
        value: dual_value,
        primal_value: lower,
        dual_value,
        gap: dual_value - lower,
        iterations: sol.iterations,
        witness: Witness::Mio { d },
    })
}

/// `F_SIO(rho^{(x)n}, 2)`.
pub fn fidelity_sio_bit_multicopy(rho: &DensityMatrix, n: usize, opts: &FidelityOptions) -> Result<FidelityResult> {
    if n == 0 {
        return Err(Error::InvalidArgument("at least one copy is needed".into()));
    }
    let dim = (rho.dim() as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if dim > opts.sdp_cap as u128 {
        return Err(Error::DimensionCap { dim: dim.min(usize::MAX as u128) as usize, cap: opts.sdp_cap });
    }
    let power = rho.tensor_power(n, DEFAULT_TENSOR_CAP.max(opts.sdp_cap))?;
    fidelity_sio_bit(&power, opts)
}

/// `(1 + eta(rho)) / 2`, the many-copy limit of the SIO fidelity.
pub fn asymptotic_fidelity(rho: &DensityMatrix) -> f64 {
    (1.0 + eta(rho)) / 2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiCopyBounds {
    pub n: usize,
    pub eta: f64,
    /// `1 - 2 min(rho_ii, rho_jj)` on the maximising pair.
    pub mu: f64,
    pub pair: (usize, usize),
    pub lower: f64,
    pub upper: f64,
    pub exact: Option<f64>,
}

/// `(1 + eta)/2 - (eta/2) mu^n <= F_SIO(rho^{(x)n}, 2) <= (1 + eta)/2`.
pub fn multicopy_bounds(rho: &DensityMatrix, n: usize) -> Result<MultiCopyBounds> {
    let w = eta_argmax(rho)?;
    let e = eta(rho);
    let small = rho[(w.i, w.i)].re.min(rho[(w.j, w.j)].re);
    let mu = (1.0 - 2.0 * small).clamp(0.0, 1.0);
    let upper = (1.0 + e) / 2.0;
    let lower = upper - e / 2.0 * mu.powi(n.min(i32::MAX as usize) as i32);
    Ok(MultiCopyBounds { n, eta: e, mu, pair: (w.i, w.j), lower, upper, exact: None })
}

impl MultiCopyBounds {
    /// Fills `exact` when `d^n` is within the solver cap.
    pub fn with_exact(mut self, rho: &DensityMatrix, opts: &FidelityOptions) -> Result<Self> {
        match fidelity_sio_bit_multicopy(rho, self.n, opts) {
            Ok(r) => self.exact = Some(r.value),
            Err(Error::DimensionCap { .. }) => self.exact = None,
            Err(e) => return Err(e),
        }
        Ok(self)
    }
}

/// Distillable coherence under SIO and PIO, which equals `Q`.
pub fn distillable_coherence(rho: &DensityMatrix) -> Result<f64> {
    q_measure(rho)
}
