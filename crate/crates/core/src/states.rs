//! Named states used throughout the test-suite and the CLI examples.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::{c, ComplexMatrix, DensityMatrix, C64};

/// `lambda * Psi_2 + (1 - lambda) * I / 2`.
pub fn noisy_coherence_bit(lambda: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    let off = lambda / 2.0;
    DensityMatrix::new(ComplexMatrix::from_real_rows(&[&[0.5, off], &[off, 0.5]])?)
}

/// `Psi_2` on `{0, 1}` and on `{2, 3}`, mixed with equal weights.
pub fn two_block_example() -> DensityMatrix {
    let q = 0.25;
    let m = ComplexMatrix::from_real_rows(&[&[q, q, 0.0, 0.0], &[q, q, 0.0, 0.0], &[0.0, 0.0, q, q], &[0.0, 0.0, q, q]])
        .expect("static shape");
    DensityMatrix::new(m).expect("valid state")
}

/// `sum_s p_s |psi_s><psi_s|` where `psi_s` is supported on `blocks[s]`.
/// Each amplitude vector is normalised here.
pub fn block_state(dim: usize, blocks: &[Vec<usize>], probs: &[f64], amplitudes: &[Vec<C64>]) -> Result<DensityMatrix> {
    if blocks.len() != probs.len() || blocks.len() != amplitudes.len() {
        return Err(Error::InvalidArgument("blocks, probabilities and amplitudes differ in length".into()));
    }
    let mut m = ComplexMatrix::zeros(dim, dim).into_dmatrix();
    for ((block, &p), amps) in blocks.iter().zip(probs).zip(amplitudes) {
        if block.len() != amps.len() {
            return Err(Error::DimensionMismatch(block.len(), amps.len()));
        }
        let norm2: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        for (a, &i) in block.iter().enumerate() {
            for (b, &j) in block.iter().enumerate() {
                if i >= dim || j >= dim {
                    return Err(Error::InvalidArgument(format!("index {} out of range", i.max(j))));
                }
                m[(i, j)] += amps[a] * amps[b].conj() * (p / norm2);
            }
        }
    }
    DensityMatrix::new(ComplexMatrix::new(m)?)
}

/// A state made of pure blocks on a random partition of `0..dim`.
///
/// Returns the state and its blocks (each sorted, ordered by smallest
/// element).
pub fn random_block_state(dim: usize, rng: &mut impl Rng) -> Result<(DensityMatrix, Vec<Vec<usize>>)> {
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let mut order: Vec<usize> = (0..dim).collect();
    order.shuffle(rng);
    let mut blocks = Vec::new();
    let mut rest = &order[..];
    while !rest.is_empty() {
        let take = rng.random_range(1..=rest.len());
        let mut b = rest[..take].to_vec();
        b.sort_unstable();
        blocks.push(b);
        rest = &rest[take..];
    }
    blocks.sort_by_key(|b| b[0]);

    let weights: Vec<f64> = blocks.iter().map(|_| Exp1.sample(rng)).collect();
    let total: f64 = weights.iter().sum();
    let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let amplitudes: Vec<Vec<C64>> = blocks
        .iter()
        .map(|b| b.iter().map(|_| c(StandardNormal.sample(rng), StandardNormal.sample(rng))).collect())
        .collect();
    Ok((block_state(dim, &blocks, &probs, &amplitudes)?, blocks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::max_coherent;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn noisy_bit_endpoints() {
        assert_eq!(noisy_coherence_bit(1.0).unwrap(), max_coherent(2).unwrap());
        assert_eq!(noisy_coherence_bit(0.0).unwrap(), DensityMatrix::from_diagonal(&[0.5, 0.5]).unwrap());
        assert!(noisy_coherence_bit(1.5).is_err());
    }

    #[test]
    fn block_states_are_block_diagonal() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (rho, blocks) = random_block_state(6, &mut rng).unwrap();
            let mut owner = [0usize; 6];
            for (s, b) in blocks.iter().enumerate() {
                for &i in b {
                    owner[i] = s;
                }
            }
            for i in 0..6 {
                for j in 0..6 {
                    if owner[i] != owner[j] {
                        assert_eq!(rho[(i, j)], c(0.0, 0.0));
                    }
                }
            }
        }
    }
}
