//! Coherence quantifiers: maximal coherence, the `mu_k` family, the
//! coherence graph with its clique partition, the trimmed state and `Q`.

use itertools::Itertools;
use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{c, hermitian_eig, shannon_entropy, von_neumann_entropy, ComplexMatrix, DensityMatrix};

/// Populations at or below this count as zero.
pub const DIAG_ZERO_TOL: f64 = 1e-12;
/// Default relative slack for declaring `|rho_ij| = sqrt(rho_ii rho_jj)`.
pub const DEFAULT_EDGE_TOL: f64 = 1e-7;
/// A block state is pure when `lambda_2 <= RANK_TOL * lambda_1`.
pub const RANK_TOL: f64 = 1e-7;
/// Pairs within this of the maximal ratio are treated as tied.
pub const ETA_TIE_TOL: f64 = 1e-12;
/// Largest number of index subsets [`mu_k`] will enumerate.
pub const MU_SUBSET_BUDGET: u64 = 2_000_000;

fn supported(diag: &[f64]) -> Vec<bool> {
    diag.iter().map(|&p| p > DIAG_ZERO_TOL).collect()
}

/// `Delta(rho)^{-1/2} rho Delta(rho)^{-1/2}` with the inverse taken on the
/// support of the diagonal. Unsupported rows and columns are zero.
pub fn a_matrix(rho: &DensityMatrix) -> ComplexMatrix {
    let diag = rho.diagonal();
    let sup = supported(&diag);
    let inv_sqrt: Vec<f64> = diag.iter().zip(&sup).map(|(&p, &s)| if s { 1.0 / p.sqrt() } else { 0.0 }).collect();
    let n = rho.dim();
    ComplexMatrix::from_fn(n, n, |i, j| {
        if !(sup[i] && sup[j]) {
            c(0.0, 0.0)
        } else if i == j {
            c(1.0, 0.0)
        } else {
            rho[(i, j)] * (inv_sqrt[i] * inv_sqrt[j])
        }
    })
}

fn pair_ratio(rho: &DensityMatrix, diag: &[f64], i: usize, j: usize) -> f64 {
    (rho[(i, j)].norm() / (diag[i] * diag[j]).sqrt()).min(1.0)
}

/// Maximal coherence: the largest `|rho_ij| / sqrt(rho_ii rho_jj)` over
/// `i != j` with both populations nonzero, or 0 when no such pair exists.
pub fn eta(rho: &DensityMatrix) -> f64 {
    let diag = rho.diagonal();
    let sup = supported(&diag);
    let n = rho.dim();
    let mut best = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            if sup[i] && sup[j] {
                best = best.max(pair_ratio(rho, &diag, i, j));
            }
        }
    }
    best
}

/// A pair `(i, j)`, `i < j`, attaining the maximal coherence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaWitness {
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

/// Maximising pair for [`eta`].
///
/// Among pairs within [`ETA_TIE_TOL`] of the maximum, the one with the
/// largest `min(rho_ii, rho_jj)` wins; remaining ties go to the
/// lexicographically first pair.
pub fn eta_argmax(rho: &DensityMatrix) -> Result<EtaWitness> {
    let diag = rho.diagonal();
    let sup = supported(&diag);
    let n = rho.dim();
    let pairs: Vec<(usize, usize, f64)> = (0..n)
        .tuple_combinations()
        .filter(|&(i, j)| sup[i] && sup[j])
        .map(|(i, j)| (i, j, pair_ratio(rho, &diag, i, j)))
        .collect();
    let max = pairs.iter().map(|p| p.2).fold(f64::NEG_INFINITY, f64::max);
    if pairs.is_empty() {
        return Err(Error::NoAdmissiblePair);
    }
    let mut chosen: Option<(usize, usize, f64)> = None;
    for &(i, j, v) in pairs.iter().filter(|p| p.2 >= max - ETA_TIE_TOL) {
        let weight = diag[i].min(diag[j]);
        match chosen {
            Some((ci, cj, _)) if diag[ci].min(diag[cj]) >= weight => {}
            _ => chosen = Some((i, j, v)),
        }
    }
    let (i, j, value) = chosen.expect("non-empty");
    Ok(EtaWitness { i, j, value })
}

fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1u128, |acc, t| acc * (n - t) as u128 / (t + 1) as u128)
}

/// `mu_k(rho) = max_{|I| <= k} log2 || Pi_I A_rho Pi_I ||_inf` by exhaustive
/// search over index subsets.
pub fn mu_k(rho: &DensityMatrix, k: usize) -> Result<f64> {
    let n = rho.dim();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("mu_k needs 1 <= k <= {n}, got {k}")));
    }
    let needed: u128 = (1..=k as u64).map(|s| binomial(n as u64, s)).sum();
    if needed > MU_SUBSET_BUDGET as u128 {
        return Err(Error::SubsetBudget { needed, budget: MU_SUBSET_BUDGET });
    }
    let a = a_matrix(rho);
    let mut best = 0.0f64;
    for size in 1..=k {
        for subset in (0..n).combinations(size) {
            let sub = a.principal_submatrix(&subset);
            let norm = hermitian_eig(&sub.hermitian_part())?.max();
            best = best.max(norm);
        }
    }
    Ok(best.log2())
}

/// Coherence graph of a state together with its clique partition.
#[derive(Clone, Debug)]
pub struct CoherencePartition {
    pub dim: usize,
    pub tolerance: f64,
    /// Edges `(i, j)`, `i < j`, in lexicographic order.
    pub edges: Vec<(usize, usize)>,
    /// Disjoint index sets covering `0..dim`, each sorted, ordered by their
    /// smallest element.
    pub blocks: Vec<Vec<usize>>,
    /// `P(s) = tr(Pi_s rho)`.
    pub block_probs: Vec<f64>,
    /// `Pi_s rho Pi_s / P(s)` restricted to the block.
    pub block_states: Vec<DensityMatrix>,
    /// Block index of every basis index.
    pub block_of: Vec<usize>,
}

impl CoherencePartition {
    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    pub fn is_trivial(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn same_block(&self, i: usize, j: usize) -> bool {
        self.block_of[i] == self.block_of[j]
    }
}

/// Builds the coherence graph at relative tolerance `edge_tol` and checks
/// that its components are cliques with pure block states.
pub fn coherence_partition(rho: &DensityMatrix, edge_tol: f64) -> Result<CoherencePartition> {
    if !(edge_tol > 0.0 && edge_tol < 1.0) {
        return Err(Error::InvalidArgument(format!("edge tolerance must lie in (0, 1), got {edge_tol}")));
    }
    let n = rho.dim();
    let diag = rho.diagonal();
    let sup = supported(&diag);
    let mut edges = Vec::new();
    let mut uf = UnionFind::<usize>::new(n);
    for (i, j) in (0..n).tuple_combinations() {
        if sup[i] && sup[j] && rho[(i, j)].norm() >= (1.0 - edge_tol) * (diag[i] * diag[j]).sqrt() {
            edges.push((i, j));
            uf.union(i, j);
        }
    }

    let labels = uf.into_labeling();
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut block_of = vec![usize::MAX; n];
    for i in 0..n {
        let root = labels[i];
        match (0..i).find(|&p| labels[p] == root) {
            Some(p) => {
                let b = block_of[p];
                block_of[i] = b;
                blocks[b].push(i);
            }
            None => {
                block_of[i] = blocks.len();
                blocks.push(vec![i]);
            }
        }
    }

    let is_edge = |i: usize, j: usize| edges.binary_search(&(i.min(j), i.max(j))).is_ok();
    for block in &blocks {
        for (&i, &j) in block.iter().tuple_combinations() {
            if !is_edge(i, j) {
                return Err(Error::CliqueViolation(i, j));
            }
        }
    }

    let mut block_probs = Vec::with_capacity(blocks.len());
    let mut block_states = Vec::with_capacity(blocks.len());
    for (s, block) in blocks.iter().enumerate() {
        let p: f64 = block.iter().map(|&i| diag[i]).sum();
        block_probs.push(p);
        let state = if block.len() == 1 || p <= 0.0 {
            DensityMatrix::from_diagonal(&vec_with_one(block.len()))?
        } else {
            let sub = rho.matrix().principal_submatrix(block).scale(1.0 / p);
            let sub = renormalise(sub);
            let eig = hermitian_eig(&sub)?;
            let k = eig.values.len();
            let ratio = eig.values[k - 2].max(0.0) / eig.values[k - 1];
            if ratio > RANK_TOL {
                return Err(Error::RankViolation { block: s, ratio });
            }
            DensityMatrix::new(sub)?
        };
        block_states.push(state);
    }

    Ok(CoherencePartition { dim: n, tolerance: edge_tol, edges, blocks, block_probs, block_states, block_of })
}

fn vec_with_one(len: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    v[0] = 1.0;
    v
}

/// Rescales to unit trace; the input already has trace one up to rounding.
fn renormalise(m: ComplexMatrix) -> ComplexMatrix {
    let tr = m.trace().re;
    m.scale(1.0 / tr)
}

/// Keeps the diagonal and the within-block entries of `rho`, zeroing the
/// rest.
pub fn trimmed_state(rho: &DensityMatrix, part: &CoherencePartition) -> Result<DensityMatrix> {
    if part.dim != rho.dim() {
        return Err(Error::DimensionMismatch(part.dim, rho.dim()));
    }
    let n = rho.dim();
    let m = ComplexMatrix::from_fn(n, n, |i, j| if part.same_block(i, j) { rho[(i, j)] } else { c(0.0, 0.0) });
    DensityMatrix::new(m)
}

/// `Q` together with the two routes used to compute it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QMeasure {
    /// `S(Delta(rho)) - S(trimmed)`, clamped at zero.
    pub value: f64,
    pub dephased_entropy: f64,
    pub trimmed_entropy: f64,
    /// `H(P(s))`, which equals `S(trimmed)` because the blocks are pure.
    pub block_entropy: f64,
}

impl QMeasure {
    /// `H(diag) - H(P(s))`.
    pub fn block_route(&self) -> f64 {
        self.dephased_entropy - self.block_entropy
    }
}

pub fn q_measure_with(rho: &DensityMatrix, edge_tol: f64) -> Result<QMeasure> {
    let part = coherence_partition(rho, edge_tol)?;
    let trimmed = trimmed_state(rho, &part)?;
    let dephased_entropy = shannon_entropy(&rho.diagonal());
    let trimmed_entropy = von_neumann_entropy(&trimmed);
    let block_entropy = shannon_entropy(&part.block_probs);
    Ok(QMeasure {
        value: (dephased_entropy - trimmed_entropy).max(0.0),
        dephased_entropy,
        trimmed_entropy,
        block_entropy,
    })
}

/// `Q(rho) = S(Delta(rho)) - S(trimmed state)` in bits, at the default edge
/// tolerance.
pub fn q_measure(rho: &DensityMatrix) -> Result<f64> {
    Ok(q_measure_with(rho, DEFAULT_EDGE_TOL)?.value)
}

/// Relative entropy of coherence `S(Delta(rho)) - S(rho)` in bits.
pub fn rel_entropy_coherence(rho: &DensityMatrix) -> f64 {
    (shannon_entropy(&rho.diagonal()) - von_neumann_entropy(rho)).max(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Distillable,
    Bound,
    Incoherent,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Distillable => "distillable",
            Verdict::Bound => "bound",
            Verdict::Incoherent => "incoherent",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distillability {
    pub verdict: Verdict,
    pub eta: f64,
    /// Saturating pair, present when the verdict is distillable.
    pub witness: Option<EtaWitness>,
}

/// Distillable iff `eta >= 1 - tol`, incoherent iff `eta <= tol`.
pub fn is_distillable(rho: &DensityMatrix, tol: f64) -> Distillability {
    let e = eta(rho);
    if e >= 1.0 - tol {
        Distillability { verdict: Verdict::Distillable, eta: e, witness: eta_argmax(rho).ok() }
    } else if e <= tol {
        Distillability { verdict: Verdict::Incoherent, eta: e, witness: None }
    } else {
        Distillability { verdict: Verdict::Bound, eta: e, witness: None }
    }
}
