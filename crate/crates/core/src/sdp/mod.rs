//! Small dense cone-program solver: PSD blocks, a nonnegative orthant and
//! linear equalities.

mod program;
mod solver;

use nalgebra::DMatrix;
use thiserror::Error;

pub use program::{BlockId, BlockKind, BlockValue, ConeProgram, Equality, LinearFunctional, Sense, Term};
pub use solver::{solve, ConeSolution, SolveOptions, SolveStatus};

use crate::matrix::ComplexMatrix;

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("malformed cone program: {0}")]
    Malformed(String),

    #[error("PSD block of size {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("equality row {0} is inconsistent with the preceding rows")]
    InconsistentEqualities(usize),

    #[error("solver stopped with status {status:?} after {iterations} iterations (gap {gap:e})")]
    NotConverged { status: SolveStatus, iterations: usize, gap: f64 },
}

/// Handle to an epigraph block `[[A, M], [M^T, B]] >= 0` for an `n x n`
/// matrix `M`. With `(tr A + tr B) / 2` minimised this equals `||M||_1`.
#[derive(Clone, Copy, Debug)]
pub struct TraceNormEpigraph {
    pub block: BlockId,
    pub m_dim: usize,
}

impl TraceNormEpigraph {
    /// The scalar variable standing for `M[i][j]`.
    pub fn m_entry(&self, i: usize, j: usize, coef: f64) -> Term {
        Term::Psd { block: self.block, i, j: self.m_dim + j, coef }
    }

    /// `(tr A + tr B) / 2`, an upper bound on `||M||_1`.
    pub fn bound(&self) -> LinearFunctional {
        let mut f = LinearFunctional::new();
        for k in 0..2 * self.m_dim {
            f = f.psd(self.block, k, k, 0.5);
        }
        f
    }
}

/// Adds the PSD block of a trace-norm epigraph to `program`. The caller ties
/// the `M` entries to data or other variables with equality rows.
pub fn trace_norm_epigraph(program: &mut ConeProgram, m_dim: usize) -> TraceNormEpigraph {
    assert!(m_dim >= 1, "epigraph needs m_dim >= 1");
    let block = program.add_psd_block(2 * m_dim);
    TraceNormEpigraph { block, m_dim }
}

/// `min ||M||_1` as a stand-alone program with `M` fixed to `m`.
pub fn trace_norm_program(m: &DMatrix<f64>) -> ConeProgram {
    assert!(m.is_square(), "trace norm program needs a square matrix");
    let n = m.nrows();
    let mut program = ConeProgram::new(Sense::Minimize);
    let epi = trace_norm_epigraph(&mut program, n);
    for i in 0..n {
        for j in 0..n {
            let mut f = LinearFunctional::new();
            f.push(epi.m_entry(i, j, 1.0));
            program.add_equality(f, m[(i, j)]);
        }
    }
    program.set_objective(epi.bound());
    program
}

/// Real symmetric embedding `[[Re H, -Im H], [Im H, Re H]]` of a Hermitian
/// matrix. Its spectrum is that of `H` with every eigenvalue doubled in
/// multiplicity, so trace norms double.
pub fn realify(h: &ComplexMatrix) -> DMatrix<f64> {
    let n = h.rows();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = h[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{hermitian_eig, trace_norm};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn opts() -> SolveOptions {
        SolveOptions::default()
    }

    #[test]
    fn min_trace_with_unit_diagonal() {
        let mut p = ConeProgram::new(Sense::Minimize);
        let x = p.add_psd_block(2);
        p.add_equality(LinearFunctional::new().psd(x, 0, 0, 1.0), 1.0);
        p.add_equality(LinearFunctional::new().psd(x, 1, 1, 1.0), 1.0);
        p.set_objective(LinearFunctional::new().psd(x, 0, 0, 1.0).psd(x, 1, 1, 1.0));
        let sol = solve(&p, &opts()).unwrap();
        assert!(sol.is_optimal());
        assert!((sol.primal_value - 2.0).abs() < 1e-7);
        assert!((sol.dual_value - 2.0).abs() < 1e-7);
    }

    #[test]
    fn zero_objective() {
        let mut p = ConeProgram::new(Sense::Maximize);
        let x = p.add_psd_block(3);
        for i in 0..3 {
            p.add_equality(LinearFunctional::new().psd(x, i, i, 1.0), 1.0);
        }
        let sol = solve(&p, &opts()).unwrap();
        assert!(sol.is_optimal());
        assert!(sol.primal_value.abs() < 1e-8 && sol.dual_value.abs() < 1e-8);
        assert!(sol.primal[0].cone_margin() > -1e-8);
    }

    #[test]
    fn dependent_rows_are_dropped() {
        let mut p = ConeProgram::new(Sense::Minimize);
        let x = p.add_nonneg_block(2);
        p.add_equality(LinearFunctional::new().nonneg(x, 0, 1.0).nonneg(x, 1, 1.0), 1.0);
        p.add_equality(LinearFunctional::new().nonneg(x, 0, 2.0).nonneg(x, 1, 2.0), 2.0);
        p.set_objective(LinearFunctional::new().nonneg(x, 0, 1.0).nonneg(x, 1, 3.0));
        let sol = solve(&p, &opts()).unwrap();
        assert_eq!(sol.dropped_rows, vec![1]);
        assert!(sol.is_optimal());
        assert!((sol.primal_value - 1.0).abs() < 1e-7);
    }

    #[test]
    fn inconsistent_rows_are_infeasible() {
        let mut p = ConeProgram::new(Sense::Minimize);
        let x = p.add_nonneg_block(2);
        p.add_equality(LinearFunctional::new().nonneg(x, 0, 1.0).nonneg(x, 1, 1.0), 1.0);
        p.add_equality(LinearFunctional::new().nonneg(x, 0, 2.0).nonneg(x, 1, 2.0), 3.0);
        assert!(matches!(solve(&p, &opts()), Err(SdpError::InconsistentEqualities(1))));
    }

    #[test]
    fn infeasible_orthant_is_detected() {
        // x0 + x1 = -1 with x >= 0
        let mut p = ConeProgram::new(Sense::Minimize);
        let x = p.add_nonneg_block(2);
        p.add_equality(LinearFunctional::new().nonneg(x, 0, 1.0).nonneg(x, 1, 1.0), -1.0);
        p.set_objective(LinearFunctional::new().nonneg(x, 0, 1.0));
        let sol = solve(&p, &opts()).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn malformed_and_capped_programs() {
        let mut p = ConeProgram::new(Sense::Minimize);
        let x = p.add_psd_block(2);
        p.add_equality(LinearFunctional::new().psd(x, 0, 2, 1.0), 1.0);
        assert!(matches!(solve(&p, &opts()), Err(SdpError::Malformed(_))));
        let mut p = ConeProgram::new(Sense::Minimize);
        p.add_psd_block(300);
        assert!(matches!(solve(&p, &opts()), Err(SdpError::DimensionCap { dim: 300, cap: 256 })));
    }

    /// Vertex enumeration for `min c'x, Ax = b, x >= 0` with two rows.
    fn lp_oracle(a: &[[f64; 4]; 2], b: &[f64; 2], c: &[f64; 4]) -> f64 {
        let mut best = f64::INFINITY;
        for p in 0..4 {
            for q in p + 1..4 {
                let det = a[0][p] * a[1][q] - a[0][q] * a[1][p];
                if det.abs() < 1e-12 {
                    continue;
                }
                let xp = (b[0] * a[1][q] - a[0][q] * b[1]) / det;
                let xq = (a[0][p] * b[1] - b[0] * a[1][p]) / det;
                if xp >= -1e-12 && xq >= -1e-12 {
                    best = best.min(c[p] * xp + c[q] * xq);
                }
            }
        }
        best
    }

    #[test]
    fn random_lps_match_vertex_enumeration() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for _ in 0..25 {
            let a: [[f64; 4]; 2] = std::array::from_fn(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)));
            let x0: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.1..1.0));
            let b = [0, 1].map(|r| (0..4).map(|j| a[r][j] * x0[j]).sum::<f64>());
            let c: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.1..2.0));
            let mut p = ConeProgram::new(Sense::Minimize);
            let x = p.add_nonneg_block(4);
            for r in 0..2 {
                let mut f = LinearFunctional::new();
                for j in 0..4 {
                    f = f.nonneg(x, j, a[r][j]);
                }
                p.add_equality(f, b[r]);
            }
            let mut obj = LinearFunctional::new();
            for j in 0..4 {
                obj = obj.nonneg(x, j, c[j]);
            }
            p.set_objective(obj);
            let sol = solve(&p, &opts()).unwrap();
            assert!(sol.is_optimal(), "{:?}", sol.status);
            let want = lp_oracle(&a, &b, &c);
            assert!((sol.primal_value - want).abs() < 1e-7, "{} vs {}", sol.primal_value, want);
        }
    }

    #[test]
    fn trace_norm_epigraph_examples() {
        let cases = [DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]), DMatrix::zeros(2, 2)];
        for (m, want) in cases.iter().zip([2.0, 0.0]) {
            let sol = solve(&trace_norm_program(m), &opts()).unwrap();
            assert!(sol.is_optimal());
            assert!((sol.primal_value - want).abs() < 1e-7, "{}", sol.primal_value);
        }
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        for _ in 0..10 {
            let g = ComplexMatrix::from_fn(3, 3, |_, _| crate::matrix::c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let h = &g + &g.adjoint();
            let sol = solve(&trace_norm_program(&realify(&h)), &opts()).unwrap();
            assert!(sol.is_optimal());
            let want = trace_norm(&h).unwrap();
            assert!((sol.primal_value / 2.0 - want).abs() < 1e-7);
        }
    }

    #[test]
    fn realify_doubles_spectrum() {
        let h = ComplexMatrix::from_row_major(
            2,
            2,
            vec![crate::matrix::c(1.0, 0.0), crate::matrix::c(0.3, 0.4), crate::matrix::c(0.3, -0.4), crate::matrix::c(-0.5, 0.0)],
        )
        .unwrap();
        let r = realify(&h);
        let mut ev: Vec<f64> = nalgebra::SymmetricEigen::new(r).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let hv = hermitian_eig(&h).unwrap().values;
        for (k, v) in ev.iter().enumerate() {
            assert!((v - hv[k / 2]).abs() < 1e-12);
        }
    }

    #[test]
    fn scaling_objective_scales_values() {
        let build = |s: f64| {
            let mut p = ConeProgram::new(Sense::Maximize);
            let x = p.add_psd_block(2);
            p.add_equality(LinearFunctional::new().psd(x, 0, 0, 1.0), 1.0);
            p.add_equality(LinearFunctional::new().psd(x, 1, 1, 1.0), 1.0);
            p.set_objective(LinearFunctional::new().psd(x, 0, 1, s * 1.0));
            p
        };
        let a = solve(&build(1.0), &opts()).unwrap();
        let b = solve(&build(3.5), &opts()).unwrap();
        assert!((a.primal_value - 1.0).abs() < 1e-7);
        assert!((b.primal_value - 3.5).abs() < 1e-6);
        assert!((b.dual_value - 3.5 * a.dual_value).abs() < 1e-6);
    }

    #[test]
    fn deterministic() {
        let m = DMatrix::from_row_slice(2, 2, &[0.3, -0.2, -0.2, 0.7]);
        let a = solve(&trace_norm_program(&m), &opts()).unwrap();
        let b = solve(&trace_norm_program(&m), &opts()).unwrap();
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(a.primal_value.to_bits(), b.primal_value.to_bits());
        assert_eq!(a.dual_value.to_bits(), b.dual_value.to_bits());
    }
}
