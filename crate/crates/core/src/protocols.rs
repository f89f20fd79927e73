//! Strictly incoherent channels and instruments, the filtering and block
//! measurement protocols, and seeded random generators.

use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distillation::multicopy_bounds;
use crate::error::{Error, Result};
use crate::matrix::{c, shannon_entropy, ComplexMatrix, DensityMatrix, C64};
use crate::measures::{coherence_partition, eta_argmax, CoherencePartition};

/// Default tolerance for completeness and for treating an entry as zero.
pub const SIO_TOL: f64 = 1e-10;
/// Outcomes below this probability are never sampled into a post state.
pub const MIN_OUTCOME_PROB: f64 = 1e-12;
/// Monte-Carlo runs handled by one stream of the generator.
pub const MC_CHUNK: usize = 4096;

/// Generator for task `stream` of an experiment seeded with `seed`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Monomial form of one Kraus operator: `K = sum_r amps[r] |rows[r]><cols[r]|`.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausStructure {
    /// Output indices carrying a nonzero entry, ascending.
    pub rows: Vec<usize>,
    /// Input index hit by each output row.
    pub cols: Vec<usize>,
    pub amps: Vec<C64>,
}

impl KrausStructure {
    fn to_matrix(&self, out_dim: usize, in_dim: usize) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(out_dim, in_dim).into_dmatrix();
        for ((&r, &col), &a) in self.rows.iter().zip(&self.cols).zip(&self.amps) {
            m[(r, col)] = a;
        }
        ComplexMatrix::from_inner(m)
    }

    /// `tr(K rho K^dagger)`.
    fn probability(&self, rho: &ComplexMatrix) -> f64 {
        self.rows.iter().enumerate().map(|(k, _)| self.amps[k].norm_sqr() * rho[(self.cols[k], self.cols[k])].re).sum()
    }

    fn accumulate(&self, rho: &ComplexMatrix, out: &mut nalgebra::DMatrix<C64>) {
        for (a, (&r, &ca)) in self.rows.iter().zip(&self.cols).enumerate() {
            for (b, (&s, &cb)) in self.rows.iter().zip(&self.cols).enumerate() {
                out[(r, s)] += self.amps[a] * self.amps[b].conj() * rho[(ca, cb)];
            }
        }
    }
}

/// A channel whose Kraus operators have at most one nonzero entry in each
/// row and column.
#[derive(Clone, Debug, PartialEq)]
pub struct SioChannel {
    in_dim: usize,
    out_dim: usize,
    kraus: Vec<ComplexMatrix>,
    structure: Vec<KrausStructure>,
}

impl SioChannel {
    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn kraus(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    pub fn structure(&self) -> &[KrausStructure] {
        &self.structure
    }

    pub fn len(&self) -> usize {
        self.kraus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kraus.is_empty()
    }

    fn from_structure(in_dim: usize, out_dim: usize, structure: Vec<KrausStructure>) -> Self {
        let kraus = structure.iter().map(|s| s.to_matrix(out_dim, in_dim)).collect();
        SioChannel { in_dim, out_dim, kraus, structure }
    }

    /// `sum_a K_a m K_a^dagger` for any square `m` of the input size.
    pub fn apply_to_matrix(&self, m: &ComplexMatrix) -> Result<ComplexMatrix> {
        if !m.is_square() || m.rows() != self.in_dim {
            return Err(Error::DimensionMismatch(self.in_dim, m.rows()));
        }
        let mut out = ComplexMatrix::zeros(self.out_dim, self.out_dim).into_dmatrix();
        for s in &self.structure {
            s.accumulate(m, &mut out);
        }
        Ok(ComplexMatrix::from_inner(out))
    }

    /// Outcome probabilities `tr(K_a rho K_a^dagger)` when the Kraus
    /// operators are read as an instrument.
    pub fn outcome_probabilities(&self, rho: &DensityMatrix) -> Result<Vec<f64>> {
        if rho.dim() != self.in_dim {
            return Err(Error::DimensionMismatch(self.in_dim, rho.dim()));
        }
        Ok(self.structure.iter().map(|s| s.probability(rho.matrix()).max(0.0)).collect())
    }

    /// Normalised `K_a rho K_a^dagger`.
    pub fn post_state(&self, outcome: usize, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let s = self.structure.get(outcome).ok_or_else(|| Error::InvalidArgument(format!("no outcome {outcome}")))?;
        let p = s.probability(rho.matrix());
        if p <= MIN_OUTCOME_PROB {
            return Err(Error::DegenerateInstrument);
        }
        let mut out = ComplexMatrix::zeros(self.out_dim, self.out_dim).into_dmatrix();
        s.accumulate(rho.matrix(), &mut out);
        DensityMatrix::new(ComplexMatrix::from_inner(out / c(p, 0.0)))
    }
}

/// Checks completeness and monomial structure and extracts `(J, pi, d)` for
/// every Kraus operator. Entries of modulus at most `tol` count as zero.
pub fn validate_sio(kraus: Vec<ComplexMatrix>, tol: f64) -> Result<SioChannel> {
    let first = kraus.first().ok_or_else(|| Error::InvalidArgument("empty Kraus list".into()))?;
    let (out_dim, in_dim) = (first.rows(), first.cols());
    let mut gram = ComplexMatrix::zeros(in_dim, in_dim).into_dmatrix();
    let mut structure = Vec::with_capacity(kraus.len());
    for (index, k) in kraus.iter().enumerate() {
        if k.rows() != out_dim || k.cols() != in_dim {
            return Err(Error::KrausShape { index, rows: k.rows(), cols: k.cols(), expected_rows: out_dim, expected_cols: in_dim });
        }
        let km = k.as_dmatrix();
        gram += km.adjoint() * km;
        let mut used_cols = vec![false; in_dim];
        let mut s = KrausStructure { rows: Vec::new(), cols: Vec::new(), amps: Vec::new() };
        for r in 0..out_dim {
            let mut hit = None;
            for col in 0..in_dim {
                if km[(r, col)].norm() > tol {
                    if hit.is_some() || used_cols[col] {
                        return Err(Error::NonMonomial(index));
                    }
                    hit = Some(col);
                    used_cols[col] = true;
                }
            }
            if let Some(col) = hit {
                s.rows.push(r);
                s.cols.push(col);
                s.amps.push(km[(r, col)]);
            }
        }
        structure.push(s);
    }
    let dev = (gram - nalgebra::DMatrix::<C64>::identity(in_dim, in_dim)).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if dev > tol {
        return Err(Error::Completeness(dev));
    }
    Ok(SioChannel::from_structure(in_dim, out_dim, structure))
}

/// `Lambda(rho)`, validated as a density matrix.
pub fn apply_channel(ch: &SioChannel, rho: &DensityMatrix) -> Result<DensityMatrix> {
    DensityMatrix::new(ch.apply_to_matrix(rho.matrix())?)
}

/// The `d -> 2` filtering instrument built on the maximising pair of
/// [`eta_argmax`]. Outcome 0 leaves `[[1/2, eta/2], [eta/2, 1/2]]` with
/// probability `2 min(rho_ii, rho_jj)`; every other outcome maps to `|0>`.
pub fn diagonal_filter(rho: &DensityMatrix) -> Result<SioChannel> {
    let w = eta_argmax(rho)?;
    let (i, j) = (w.i, w.j);
    let (pi, pj) = (rho[(i, i)].re, rho[(j, j)].re);
    let m = pi.min(pj);
    let phase = {
        let z = rho[(i, j)];
        if z.norm() > 0.0 {
            z / z.norm()
        } else {
            c(1.0, 0.0)
        }
    };
    let d = rho.dim();
    let mut structure = vec![KrausStructure {
        rows: vec![0, 1],
        cols: vec![i, j],
        amps: vec![c((m / pi).sqrt(), 0.0), phase * (m / pj).sqrt()],
    }];
    for (idx, p_self, p_other) in [(i, pi, pj), (j, pj, pi)] {
        let keep = (1.0 - (p_other / p_self).min(1.0)).max(0.0);
        structure.push(KrausStructure { rows: vec![0], cols: vec![idx], amps: vec![c(keep.sqrt(), 0.0)] });
    }
    for a in (0..d).filter(|&a| a != i && a != j) {
        structure.push(KrausStructure { rows: vec![0], cols: vec![a], amps: vec![c(1.0, 0.0)] });
    }
    Ok(SioChannel::from_structure(d, 2, structure))
}

/// One sampled outcome of an instrument.
#[derive(Clone, Debug)]
pub struct InstrumentOutcome {
    pub index: usize,
    pub probability: f64,
    pub post_state: DensityMatrix,
}

/// Samples outcome `a` with probability `tr(K_a rho K_a^dagger)`.
pub fn sample_instrument(ch: &SioChannel, rho: &DensityMatrix, rng: &mut impl Rng) -> Result<InstrumentOutcome> {
    let probs = ch.outcome_probabilities(rho)?;
    let index = sample_index(&probs, rng)?;
    Ok(InstrumentOutcome { index, probability: probs[index], post_state: ch.post_state(index, rho)? })
}

fn sample_index(probs: &[f64], rng: &mut impl Rng) -> Result<usize> {
    let weights: Vec<f64> = probs.iter().map(|&p| if p > MIN_OUTCOME_PROB { p } else { 0.0 }).collect();
    let dist = WeightedIndex::new(&weights).map_err(|_| Error::DegenerateInstrument)?;
    Ok(dist.sample(rng))
}

/// Expected fidelity with `Psi_2` of filtering each of `n` copies and
/// stopping at the first success, outputting `|0>` if all fail.
pub fn filter_protocol_fidelity(rho: &DensityMatrix, n: usize) -> Result<f64> {
    Ok(multicopy_bounds(rho, n)?.lower)
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Compensated running sum.
#[derive(Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Runs `runs` independent trials in chunks of [`MC_CHUNK`], chunk `k` on
/// stream `k` of `seed`, and combines them in chunk order.
fn monte_carlo<F>(runs: usize, seed: u64, trial: F) -> Result<Estimate>
where
    F: Fn(&mut ChaCha20Rng) -> Result<f64> + Sync,
{
    if runs == 0 {
        return Err(Error::InvalidArgument("at least one run is needed".into()));
    }
    let chunks = runs.div_ceil(MC_CHUNK);
    // per chunk: count, mean, sum of squared deviations (Welford)
    let partial: Vec<(f64, f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_for(seed, k as u64);
            let len = MC_CHUNK.min(runs - k * MC_CHUNK);
            let (mut mean, mut m2) = (0.0, 0.0);
            for t in 0..len {
                let x = trial(&mut rng)?;
                let delta = x - mean;
                mean += delta / (t + 1) as f64;
                m2 += delta * (x - mean);
            }
            Ok((len as f64, mean, m2))
        })
        .collect::<Result<_>>()?;
    let (mut count, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for (nb, mb, m2b) in partial {
        let total = count + nb;
        let delta = mb - mean;
        mean += delta * nb / total;
        m2 += m2b + delta * delta * count * nb / total;
        count = total;
    }
    let n = runs as f64;
    let var = if runs > 1 { (m2 / (n - 1.0)).max(0.0) } else { 0.0 };
    Ok(Estimate { mean, std_error: (var / n).sqrt(), samples: runs })
}

/// Monte-Carlo estimate of [`filter_protocol_fidelity`].
pub fn filter_protocol_monte_carlo(rho: &DensityMatrix, n: usize, runs: usize, seed: u64) -> Result<Estimate> {
    let filter = diagonal_filter(rho)?;
    let probs = filter.outcome_probabilities(rho)?;
    let success = if probs[0] > MIN_OUTCOME_PROB { Some(filter.post_state(0, rho)?) } else { None };
    let success_fidelity = success.map(|s| 0.5 + s[(0, 1)].re);
    monte_carlo(runs, seed, |rng| {
        for _ in 0..n {
            if sample_index(&probs, rng)? == 0 {
                return Ok(success_fidelity.expect("outcome 0 has positive probability"));
            }
        }
        Ok(0.5)
    })
}

/// The block measurement `{Pi_{I_s}}` of the coherence partition.
pub fn pio_block_instrument(rho: &DensityMatrix, edge_tol: f64) -> Result<(SioChannel, CoherencePartition)> {
    let part = coherence_partition(rho, edge_tol)?;
    let structure = part
        .blocks
        .iter()
        .map(|b| KrausStructure { rows: b.clone(), cols: b.clone(), amps: vec![c(1.0, 0.0); b.len()] })
        .collect();
    Ok((SioChannel::from_structure(rho.dim(), rho.dim(), structure), part))
}

/// Empirical coherence rate of the block-measurement protocol on `n`
/// copies, with the pure post states distilled at `S(Delta(psi))` bits each.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub rate: f64,
    /// `sqrt(Var_P(f) / n)` for the per-copy yield `f`.
    pub std_error: f64,
    pub copies: usize,
}

pub fn pio_rate_estimate(rho: &DensityMatrix, n: usize, edge_tol: f64, rng: &mut impl Rng) -> Result<RateEstimate> {
    if n == 0 {
        return Err(Error::InvalidArgument("at least one copy is needed".into()));
    }
    let (instrument, part) = pio_block_instrument(rho, edge_tol)?;
    let probs = instrument.outcome_probabilities(rho)?;
    let yields: Vec<f64> = part.block_states.iter().map(|s| shannon_entropy(&s.diagonal())).collect();
    let mut counts = vec![0usize; probs.len()];
    for _ in 0..n {
        counts[sample_index(&probs, rng)?] += 1;
    }
    let mut total = Neumaier::default();
    for (&k, &f) in counts.iter().zip(&yields) {
        total.add(k as f64 * f);
    }
    let mean: f64 = probs.iter().zip(&yields).map(|(p, f)| p * f).sum();
    let second: f64 = probs.iter().zip(&yields).map(|(p, f)| p * f * f).sum();
    let var = (second - mean * mean).max(0.0);
    Ok(RateEstimate { rate: total.value() / n as f64, std_error: (var / n as f64).sqrt(), copies: n })
}

/// `G G^dagger / tr(G G^dagger)` for a `d x rank` complex Gaussian `G`.
pub fn random_density(d: usize, rank: usize, rng: &mut impl Rng) -> Result<DensityMatrix> {
    if d == 0 || rank == 0 || rank > d {
        return Err(Error::InvalidArgument(format!("need 1 <= rank <= d, got d = {d}, rank = {rank}")));
    }
    let g = nalgebra::DMatrix::<C64>::from_fn(d, rank, |_, _| c(StandardNormal.sample(rng), StandardNormal.sample(rng)));
    let gg = &g * g.adjoint();
    let tr = gg.trace().re;
    let mut m = gg / c(tr, 0.0);
    for i in 0..d {
        m[(i, i)].im = 0.0;
        for j in 0..i {
            m[(i, j)] = m[(j, i)].conj();
        }
    }
    DensityMatrix::new(ComplexMatrix::new(m)?)
}

/// Random square SIO channel: permutations `pi_a`, weights split across the
/// Kraus operators by a flat Dirichlet draw per input index, random phases.
pub fn random_sio(d: usize, n_kraus: usize, rng: &mut impl Rng) -> Result<SioChannel> {
    if d == 0 || n_kraus == 0 {
        return Err(Error::InvalidArgument("dimension and Kraus count must be positive".into()));
    }
    let mut weights = vec![vec![0.0; d]; n_kraus];
    for i in 0..d {
        let draws: Vec<f64> = (0..n_kraus).map(|_| Exp1.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        for (a, w) in draws.into_iter().enumerate() {
            weights[a][i] = w / total;
        }
    }
    let structure = weights
        .iter()
        .map(|w| {
            let mut perm: Vec<usize> = (0..d).collect();
            perm.shuffle(rng);
            let amps = perm
                .iter()
                .map(|&col| {
                    let theta = rng.random_range(0.0..std::f64::consts::TAU);
                    C64::from_polar(w[col].sqrt(), theta)
                })
                .collect();
            KrausStructure { rows: (0..d).collect(), cols: perm, amps }
        })
        .collect();
    Ok(SioChannel::from_structure(d, d, structure))
}

/// Embeds a `d -> m` channel into a square `d' x d'` one acting as the
/// original on the first `d` inputs, with an extra Kraus operator projecting
/// onto the remaining inputs so that completeness survives.
pub fn lift_compress(ch: &SioChannel, d_prime: usize) -> Result<SioChannel> {
    if d_prime < ch.in_dim.max(ch.out_dim) {
        return Err(Error::InvalidArgument(format!(
            "lifted dimension {d_prime} is below max(in, out) = {}",
            ch.in_dim.max(ch.out_dim)
        )));
    }
    let mut structure = ch.structure.clone();
    if d_prime > ch.in_dim {
        let rest: Vec<usize> = (ch.in_dim..d_prime).collect();
        structure.push(KrausStructure { rows: rest.clone(), cols: rest.clone(), amps: vec![c(1.0, 0.0); rest.len()] });
    }
    Ok(SioChannel::from_structure(d_prime, d_prime, structure))
}

/// `Pi_r^T m Pi_r`: pads an `r x r` matrix with zeros to `d' x d'`.
pub fn embed(m: &ComplexMatrix, d_prime: usize) -> ComplexMatrix {
    let r = m.rows();
    ComplexMatrix::from_fn(d_prime, d_prime, |i, j| if i < r && j < r { m[(i, j)] } else { c(0.0, 0.0) })
}

/// `Pi_r m Pi_r^T`: the leading `r x r` block.
pub fn compress(m: &ComplexMatrix, r: usize) -> ComplexMatrix {
    m.principal_submatrix(&(0..r).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{dephase, max_coherent};
    use crate::measures::{eta, DEFAULT_EDGE_TOL};
    use crate::states::{noisy_coherence_bit, two_block_example};

    fn hadamard() -> ComplexMatrix {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        ComplexMatrix::from_real_rows(&[&[h, h], &[h, -h]]).unwrap()
    }

    #[test]
    fn validate_examples() {
        let perm = ComplexMatrix::from_real_rows(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0]]).unwrap();
        let ch = validate_sio(vec![perm], SIO_TOL).unwrap();
        assert_eq!(ch.structure()[0].cols, vec![1, 2, 0]);
        assert!(ch.structure()[0].amps.iter().all(|&a| a == c(1.0, 0.0)));

        let deph: Vec<ComplexMatrix> = (0..3)
            .map(|i| {
                let mut d = [0.0; 3];
                d[i] = 1.0;
                ComplexMatrix::from_diagonal(&d)
            })
            .collect();
        let ch = validate_sio(deph, SIO_TOL).unwrap();
        assert!(ch.structure().iter().all(|s| s.rows.len() == 1));

        assert!(matches!(validate_sio(vec![hadamard()], SIO_TOL), Err(Error::NonMonomial(0))));
        let half = ComplexMatrix::identity(2).scale(0.5);
        assert!(matches!(validate_sio(vec![half], SIO_TOL), Err(Error::Completeness(_))));
    }

    #[test]
    fn plain_amplitude_damping_is_monomial() {
        let g: f64 = 0.3;
        let k0 = ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, (1.0 - g).sqrt()]]).unwrap();
        let k1 = ComplexMatrix::from_real_rows(&[&[0.0, g.sqrt()], &[0.0, 0.0]]).unwrap();
        assert!(validate_sio(vec![k0, k1], SIO_TOL).is_ok());
    }

    #[test]
    fn apply_examples() {
        let mut rng = rng_for(5, 0);
        let rho = random_density(3, 3, &mut rng).unwrap();
        let id = validate_sio(vec![ComplexMatrix::identity(3)], SIO_TOL).unwrap();
        assert!(apply_channel(&id, &rho).unwrap().matrix().max_abs_diff(rho.matrix()) < 1e-15);
        let deph: Vec<ComplexMatrix> = (0..3)
            .map(|i| {
                let mut d = [0.0; 3];
                d[i] = 1.0;
                ComplexMatrix::from_diagonal(&d)
            })
            .collect();
        let ch = validate_sio(deph, SIO_TOL).unwrap();
        assert_eq!(apply_channel(&ch, &rho).unwrap().into_matrix(), dephase(rho.matrix()).unwrap());
        let wrong = random_density(2, 2, &mut rng).unwrap();
        assert!(apply_channel(&ch, &wrong).is_err());
    }

    #[test]
    fn apply_matches_kraus_products() {
        let mut rng = rng_for(6, 0);
        let ch = random_sio(4, 3, &mut rng).unwrap();
        let rho = random_density(4, 2, &mut rng).unwrap();
        let mut want = ComplexMatrix::zeros(4, 4);
        for k in ch.kraus() {
            want = &want + &(&(k * rho.matrix()) * &k.adjoint());
        }
        assert!(apply_channel(&ch, &rho).unwrap().matrix().max_abs_diff(&want) < 1e-14);
    }

    #[test]
    fn random_sio_is_valid_and_eta_monotone() {
        let mut rng = rng_for(7, 0);
        for d in 2..5 {
            for _ in 0..50 {
                let n_kraus = rng.random_range(1..5);
                let ch = random_sio(d, n_kraus, &mut rng).unwrap();
                let again = validate_sio(ch.kraus().to_vec(), SIO_TOL).unwrap();
                assert_eq!(again.structure().len(), n_kraus);
                let rho = random_density(d, rng.random_range(1..=d), &mut rng).unwrap();
                let out = apply_channel(&ch, &rho).unwrap();
                assert!(eta(&out) <= eta(&rho) + 1e-10);
            }
        }
        let single = random_sio(3, 1, &mut rng).unwrap();
        let k = single.kraus()[0].as_dmatrix();
        let dev = k.adjoint() * k - nalgebra::DMatrix::<C64>::identity(3, 3);
        assert!(dev.iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn filter_examples() {
        let mut rng = rng_for(8, 0);
        for _ in 0..20 {
            let rho = random_density(4, 3, &mut rng).unwrap();
            let f = diagonal_filter(&rho).unwrap();
            assert_eq!(f.len(), 5);
            assert!(validate_sio(f.kraus().to_vec(), SIO_TOL).is_ok());
            let w = eta_argmax(&rho).unwrap();
            let p = f.outcome_probabilities(&rho).unwrap();
            assert!((p[0] - 2.0 * rho[(w.i, w.i)].re.min(rho[(w.j, w.j)].re)).abs() < 1e-14);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            let post = f.post_state(0, &rho).unwrap();
            let e = eta(&rho);
            let want = ComplexMatrix::from_real_rows(&[&[0.5, e / 2.0], &[e / 2.0, 0.5]]).unwrap();
            assert!(post.matrix().max_abs_diff(&want) < 1e-10);
        }
        let f = diagonal_filter(&noisy_coherence_bit(0.4).unwrap()).unwrap();
        let p = f.outcome_probabilities(&noisy_coherence_bit(0.4).unwrap()).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sampling_examples() {
        let mut rng = rng_for(9, 0);
        let rho = random_density(2, 2, &mut rng).unwrap();
        let one = validate_sio(vec![ComplexMatrix::identity(2)], SIO_TOL).unwrap();
        let o = sample_instrument(&one, &rho, &mut rng).unwrap();
        assert_eq!(o.index, 0);
        assert!((o.probability - 1.0).abs() < 1e-12);

        let deph = validate_sio(vec![ComplexMatrix::from_diagonal(&[1.0, 0.0]), ComplexMatrix::from_diagonal(&[0.0, 1.0])], SIO_TOL).unwrap();
        let up = DensityMatrix::from_diagonal(&[1.0, 0.0]).unwrap();
        for _ in 0..100 {
            assert_eq!(sample_instrument(&deph, &up, &mut rng).unwrap().index, 0);
        }

        let rho = noisy_coherence_bit(0.6).unwrap();
        let f = diagonal_filter(&rho).unwrap();
        for _ in 0..10_000 {
            assert_eq!(sample_instrument(&f, &rho, &mut rng).unwrap().index, 0);
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let rho = random_density(3, 3, &mut rng_for(1, 0)).unwrap();
        let f = diagonal_filter(&rho).unwrap();
        let draw = |seed| {
            let mut rng = rng_for(seed, 0);
            (0..200).map(|_| sample_instrument(&f, &rho, &mut rng).unwrap().index).collect::<Vec<_>>()
        };
        assert_eq!(draw(11), draw(11));
        assert_ne!(draw(11), draw(12));
    }

    #[test]
    fn empirical_frequencies_converge() {
        let mut rng = rng_for(10, 0);
        let rho = random_density(3, 3, &mut rng).unwrap();
        let f = diagonal_filter(&rho).unwrap();
        let p = f.outcome_probabilities(&rho).unwrap();
        let n = 100_000;
        let mut counts = vec![0usize; p.len()];
        for _ in 0..n {
            counts[sample_index(&p, &mut rng).unwrap()] += 1;
        }
        for (k, &pk) in counts.iter().zip(&p) {
            let freq = *k as f64 / n as f64;
            assert!((freq - pk).abs() <= 5.0 * (pk * (1.0 - pk) / n as f64).sqrt() + 1e-12);
        }
    }

    #[test]
    fn protocol_fidelity_examples() {
        let rho = noisy_coherence_bit(0.3).unwrap();
        for n in 1..5 {
            assert!((filter_protocol_fidelity(&rho, n).unwrap() - 0.65).abs() < 1e-15);
        }
        let est = filter_protocol_monte_carlo(&rho, 2, 10_000, 4).unwrap();
        assert!((est.mean - 0.65).abs() < 1e-12);
        assert_eq!(est.std_error, 0.0);

        let mut rng = rng_for(12, 0);
        let rho = random_density(3, 3, &mut rng).unwrap();
        let analytic = filter_protocol_fidelity(&rho, 2).unwrap();
        let est = filter_protocol_monte_carlo(&rho, 2, 100_000, 13).unwrap();
        assert!((est.mean - analytic).abs() <= 3.0 * est.std_error + 1e-12);
        assert_eq!(est, filter_protocol_monte_carlo(&rho, 2, 100_000, 13).unwrap());
        // large n approaches the asymptote
        let far = filter_protocol_fidelity(&rho, 200).unwrap();
        assert!((far - (1.0 + eta(&rho)) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn block_instrument_examples() {
        let psi = max_coherent(3).unwrap();
        let (ch, part) = pio_block_instrument(&psi, DEFAULT_EDGE_TOL).unwrap();
        assert_eq!(ch.len(), 1);
        assert!(apply_channel(&ch, &psi).unwrap().matrix().max_abs_diff(psi.matrix()) < 1e-15);
        assert_eq!(part.block_states[0], psi);

        let mut rng = rng_for(14, 0);
        let rho = random_density(3, 3, &mut rng).unwrap();
        let (ch, _) = pio_block_instrument(&rho, DEFAULT_EDGE_TOL).unwrap();
        assert_eq!(ch.len(), 3);
        for k in 0..3 {
            let post = ch.post_state(k, &rho).unwrap();
            assert!((post[(k, k)].re - 1.0).abs() < 1e-12);
        }

        let rho = two_block_example();
        let (ch, part) = pio_block_instrument(&rho, DEFAULT_EDGE_TOL).unwrap();
        let p = ch.outcome_probabilities(&rho).unwrap();
        assert_eq!(p, part.block_probs);
        assert_eq!(part.blocks, vec![vec![0, 1], vec![2, 3]]);
        for s in &part.block_states {
            assert!(s.eig().values[0].abs() < 1e-12);
        }
    }

    #[test]
    fn pio_rate_examples() {
        let mut rng = rng_for(15, 0);
        let r = pio_rate_estimate(&max_coherent(2).unwrap(), 37, DEFAULT_EDGE_TOL, &mut rng).unwrap();
        assert!((r.rate - 1.0).abs() < 1e-15);
        let r = pio_rate_estimate(&noisy_coherence_bit(0.7).unwrap(), 100, DEFAULT_EDGE_TOL, &mut rng).unwrap();
        assert_eq!(r.rate, 0.0);
        let r = pio_rate_estimate(&two_block_example(), 10_000, DEFAULT_EDGE_TOL, &mut rng).unwrap();
        assert!((r.rate - 1.0).abs() <= 3.0 * r.std_error + 1e-9);
    }

    #[test]
    fn random_density_examples() {
        let mut rng = rng_for(16, 0);
        let pure = random_density(4, 1, &mut rng).unwrap();
        assert!((eta(&pure) - 1.0).abs() < 1e-10);
        let full = random_density(4, 4, &mut rng).unwrap();
        assert!(eta(&full) < 1.0 - 1e-9);
        let a = random_density(3, 2, &mut rng_for(99, 0)).unwrap();
        let b = random_density(3, 2, &mut rng_for(99, 0)).unwrap();
        assert_eq!(a, b);
        assert!(random_density(3, 4, &mut rng).is_err());
    }

    #[test]
    fn lift_compress_recovers_channel() {
        let mut rng = rng_for(17, 0);
        let rho3 = random_density(3, 3, &mut rng).unwrap();
        let filter = diagonal_filter(&rho3).unwrap();
        let lifted = lift_compress(&filter, 3).unwrap();
        assert!(validate_sio(lifted.kraus().to_vec(), SIO_TOL).is_ok());
        for _ in 0..100 {
            let rho = random_density(3, rng.random_range(1..=3), &mut rng).unwrap();
            let direct = filter.apply_to_matrix(rho.matrix()).unwrap();
            let via = compress(&lifted.apply_to_matrix(&embed(rho.matrix(), 3)).unwrap(), 2);
            assert!(direct.max_abs_diff(&via) <= 1e-12);
        }
        let sq = random_sio(2, 2, &mut rng).unwrap();
        let lifted = lift_compress(&sq, 4).unwrap();
        assert!(validate_sio(lifted.kraus().to_vec(), SIO_TOL).is_ok());
        let rho = random_density(2, 2, &mut rng).unwrap();
        let via = compress(&lifted.apply_to_matrix(&embed(rho.matrix(), 4)).unwrap(), 2);
        assert!(apply_channel(&sq, &rho).unwrap().matrix().max_abs_diff(&via) <= 1e-15);
        assert!(lift_compress(&filter, 2).is_err());
    }
}
