//! Structured reports emitted by the command-line tool.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distillation::{
    asymptotic_fidelity, fidelity_mio_bit, fidelity_sio_bit_multicopy, multicopy_bounds, FidelityOptions, FidelityResult,
};
use crate::error::{Error, Result};
use crate::matrix::{DensityMatrix, C64};
use crate::measures::{
    coherence_partition, eta, eta_argmax, is_distillable, mu_k, q_measure_with, rel_entropy_coherence, Verdict, DIAG_ZERO_TOL,
};
use crate::protocols::{
    filter_protocol_fidelity, filter_protocol_monte_carlo, pio_rate_estimate, random_density, rng_for, Estimate, SioChannel,
};

/// `eta` at or above `1 - DISTILLABLE_TOL` counts as a coherence-bit source.
pub const DISTILLABLE_TOL: f64 = 1e-9;
/// Stream reserved for the block-measurement simulation.
const PIO_STREAM: u64 = u64::MAX;
const HISTOGRAM_BINS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub dim: usize,
    pub trace: f64,
    pub hermiticity_residual: f64,
}

impl InputDigest {
    pub fn of(rho: &DensityMatrix) -> Self {
        InputDigest { dim: rho.dim(), trace: rho.matrix().trace().re, hermiticity_residual: rho.matrix().hermiticity_residual() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuEntry {
    pub k: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionSummary {
    pub blocks: Vec<Vec<usize>>,
    pub block_sizes: Vec<usize>,
    pub block_probs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureSection {
    pub eta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub argmax: Option<(usize, usize)>,
    pub verdict: Verdict,
    pub q: f64,
    pub c_rel_ent: f64,
    pub mu_k: Vec<MuEntry>,
    pub partition: PartitionSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverEntry {
    pub value: f64,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub iterations: usize,
}

impl From<&FidelityResult> for SolverEntry {
    fn from(r: &FidelityResult) -> Self {
        SolverEntry { value: r.value, primal: r.primal_value, dual: r.dual_value, gap: r.gap, iterations: r.iterations }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsRow {
    pub n: usize,
    pub lower: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<f64>,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelitySection {
    pub copies: usize,
    pub f_sio: SolverEntry,
    pub f_mio: SolverEntry,
    pub asymptote: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    pub bounds: Vec<BoundsRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterSection {
    pub mu: f64,
    pub analytic: f64,
    pub monte_carlo: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PioSection {
    pub copies: usize,
    pub rate: f64,
    pub std_error: f64,
    pub q: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSection {
    pub copies: usize,
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterSection>,
    pub pio: PioSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenericitySection {
    pub dim: usize,
    pub rank: usize,
    pub samples: usize,
    /// Samples with `eta >= 1 - 1e-9` among those with a fully populated diagonal.
    pub distillable: usize,
    /// Samples with some population at or below the zero threshold.
    pub zero_diagonal: usize,
    pub max_eta: f64,
    pub histogram: Vec<HistogramBin>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KrausSummary {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub amps: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SioSection {
    pub valid: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub violation: Option<String>,
    pub kraus: Vec<KrausSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistillationReport {
    pub tool: String,
    pub version: String,
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<InputDigest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measures: Option<MeasureSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<FidelitySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<ProtocolSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub genericity: Option<GenericitySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sio: Option<SioSection>,
}

impl DistillationReport {
    pub fn new(command: &str) -> Self {
        DistillationReport {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed: None,
            input: None,
            measures: None,
            fidelity: None,
            protocol: None,
            genericity: None,
            sio: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serialisable")
    }
}

pub fn measure_section(rho: &DensityMatrix, ks: &[usize], edge_tol: f64) -> Result<MeasureSection> {
    let verdict = is_distillable(rho, DISTILLABLE_TOL);
    let part = coherence_partition(rho, edge_tol)?;
    let q = q_measure_with(rho, edge_tol)?;
    let mu = ks.iter().map(|&k| Ok(MuEntry { k, value: mu_k(rho, k)? })).collect::<Result<_>>()?;
    Ok(MeasureSection {
        eta: verdict.eta,
        argmax: eta_argmax(rho).ok().map(|w| (w.i, w.j)),
        verdict: verdict.verdict,
        q: q.value,
        c_rel_ent: rel_entropy_coherence(rho),
        mu_k: mu,
        partition: PartitionSummary { block_sizes: part.block_sizes(), blocks: part.blocks, block_probs: part.block_probs },
    })
}

/// One-copy MIO fidelity, `n`-copy SIO fidelity and the bounds table for
/// `1..=n` copies.
pub fn fidelity_section(rho: &DensityMatrix, copies: usize, opts: &FidelityOptions) -> Result<FidelitySection> {
    let f_sio = fidelity_sio_bit_multicopy(rho, copies, opts)?;
    let f_mio = fidelity_mio_bit(rho, opts)?;
    let mut bounds = Vec::new();
    let mut mu = None;
    if eta_argmax(rho).is_ok() {
        for n in 1..=copies {
            let b = multicopy_bounds(rho, n)?;
            mu = Some(b.mu);
            let exact = if n == copies { Some(f_sio.value) } else { b.clone().with_exact(rho, opts)?.exact };
            bounds.push(BoundsRow { n, lower: b.lower, exact, upper: b.upper });
        }
    }
    Ok(FidelitySection {
        copies,
        f_sio: (&f_sio).into(),
        f_mio: (&f_mio).into(),
        asymptote: asymptotic_fidelity(rho),
        mu,
        bounds,
    })
}

pub fn protocol_section(rho: &DensityMatrix, copies: usize, samples: usize, seed: u64, edge_tol: f64) -> Result<ProtocolSection> {
    let filter = match multicopy_bounds(rho, copies) {
        Ok(b) => Some(FilterSection {
            mu: b.mu,
            analytic: filter_protocol_fidelity(rho, copies)?,
            monte_carlo: filter_protocol_monte_carlo(rho, copies, samples, seed)?,
        }),
        Err(Error::NoAdmissiblePair) => None,
        Err(e) => return Err(e),
    };
    let mut rng = rng_for(seed, PIO_STREAM);
    let rate = pio_rate_estimate(rho, samples, edge_tol, &mut rng)?;
    let q = q_measure_with(rho, edge_tol)?.value;
    Ok(ProtocolSection {
        copies,
        samples,
        filter,
        pio: PioSection { copies: rate.copies, rate: rate.rate, std_error: rate.std_error, q },
    })
}

/// Samples `samples` states, sample `k` from stream `k` of `seed`, and
/// tallies their maximal coherence.
pub fn genericity_section(dim: usize, rank: usize, samples: usize, seed: u64) -> Result<GenericitySection> {
    if dim < 2 || samples == 0 {
        return Err(Error::InvalidArgument("genericity scan needs dim >= 2 and at least one sample".into()));
    }
    let etas: Vec<(f64, bool)> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let rho = random_density(dim, rank, &mut rng_for(seed, k as u64))?;
            let full = rho.diagonal().iter().all(|&p| p > DIAG_ZERO_TOL);
            Ok((eta(&rho), full))
        })
        .collect::<Result<_>>()?;
    let mut histogram: Vec<HistogramBin> = (0..HISTOGRAM_BINS)
        .map(|b| HistogramBin { lo: b as f64 / HISTOGRAM_BINS as f64, hi: (b + 1) as f64 / HISTOGRAM_BINS as f64, count: 0 })
        .collect();
    let (mut distillable, mut zero_diagonal, mut max_eta) = (0, 0, 0.0f64);
    for &(e, full) in &etas {
        let bin = ((e * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
        histogram[bin].count += 1;
        max_eta = max_eta.max(e);
        if !full {
            zero_diagonal += 1;
        } else if e >= 1.0 - DISTILLABLE_TOL {
            distillable += 1;
        }
    }
    Ok(GenericitySection { dim, rank, samples, distillable, zero_diagonal, max_eta, histogram })
}

pub fn sio_section(result: std::result::Result<SioChannel, Error>) -> SioSection {
    match result {
        Ok(ch) => SioSection {
            valid: true,
            violation: None,
            kraus: ch
                .structure()
                .iter()
                .map(|s| KrausSummary {
                    rows: s.rows.clone(),
                    cols: s.cols.clone(),
                    amps: s.amps.iter().map(|a: &C64| [a.re, a.im]).collect(),
                })
                .collect(),
        },
        Err(e) => SioSection { valid: false, violation: Some(e.to_string()), kraus: Vec::new() },
    }
}
