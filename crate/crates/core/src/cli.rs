//! Command-line front end.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::distillation::{FidelityOptions, DEFAULT_SDP_CAP};
use crate::error::{Error, Result};
use crate::io::{parse_channel, parse_density, read_to_string};
use crate::measures::DEFAULT_EDGE_TOL;
use crate::protocols::SIO_TOL;
use crate::report::{
    fidelity_section, genericity_section, measure_section, protocol_section, sio_section, DistillationReport, InputDigest,
};
use crate::sdp::SdpError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_CAP: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "cohere", version, about = "Coherence distillation measures, fidelities and protocol simulation")]
pub struct Cli {
    /// Relative tolerance for coherence-graph edges.
    #[arg(long, global = true, default_value_t = DEFAULT_EDGE_TOL)]
    pub edge_tol: f64,
    /// Duality-gap tolerance of the cone solver.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub gap_tol: f64,
    /// Largest dimension passed to the cone solver.
    #[arg(long, global = true, env = "COHERE_SDP_CAP", default_value_t = DEFAULT_SDP_CAP)]
    pub sdp_cap: usize,
    /// Seed for every randomised step.
    #[arg(long, global = true, env = "COHERE_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Maximal coherence, verdict, Q, relative entropy of coherence, mu_k and the block partition.
    Measure {
        input: PathBuf,
        /// Orders k for mu_k.
        #[arg(long = "k", value_delimiter = ',', default_value = "2")]
        ks: Vec<usize>,
    },
    /// SIO and MIO fidelities of distilling a coherence bit, with the multi-copy bounds.
    Fidelity {
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        copies: usize,
    },
    /// Filtering protocol and block-measurement protocol simulations.
    Protocol {
        input: PathBuf,
        #[arg(long, default_value_t = 2)]
        copies: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
    /// Maximal coherence of random states.
    Genericity {
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// Rank of the sampled states; defaults to the dimension.
        #[arg(long)]
        rank: Option<usize>,
    },
    /// Checks that a channel file is strictly incoherent.
    ValidateSio {
        channel: PathBuf,
        #[arg(long, default_value_t = SIO_TOL)]
        tol: f64,
    },
}

/// Exit status for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::DimensionCap { .. } | Error::SubsetBudget { .. } | Error::Sdp(SdpError::DimensionCap { .. }) => EXIT_CAP,
        Error::Sdp(_) => EXIT_SOLVER,
        _ => EXIT_INPUT,
    }
}

fn csv_pairs(rows: &[(String, String)]) -> String {
    let mut out = String::from("quantity,value\n");
    for (k, v) in rows {
        out.push_str(&format!("{k},{v}\n"));
    }
    out
}

/// CSV rendering of the main table of a report.
pub fn to_csv(r: &DistillationReport) -> String {
    if let Some(m) = &r.measures {
        let mut rows = vec![
            ("eta".to_string(), m.eta.to_string()),
            ("verdict".into(), m.verdict.to_string()),
            ("q".into(), m.q.to_string()),
            ("c_rel_ent".into(), m.c_rel_ent.to_string()),
        ];
        rows.extend(m.mu_k.iter().map(|e| (format!("mu_{}", e.k), e.value.to_string())));
        rows.push(("blocks".into(), m.partition.blocks.len().to_string()));
        return csv_pairs(&rows);
    }
    if let Some(f) = &r.fidelity {
        let mut out = String::from("n,lower,exact,upper\n");
        for b in &f.bounds {
            let exact = b.exact.map(|x| x.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{}\n", b.n, b.lower, exact, b.upper));
        }
        return out;
    }
    if let Some(p) = &r.protocol {
        let mut rows = Vec::new();
        if let Some(f) = &p.filter {
            rows.push(("filter_mu".to_string(), f.mu.to_string()));
            rows.push(("filter_analytic".into(), f.analytic.to_string()));
            rows.push(("filter_mean".into(), f.monte_carlo.mean.to_string()));
            rows.push(("filter_std_error".into(), f.monte_carlo.std_error.to_string()));
        }
        rows.push(("pio_rate".into(), p.pio.rate.to_string()));
        rows.push(("pio_std_error".into(), p.pio.std_error.to_string()));
        rows.push(("q".into(), p.pio.q.to_string()));
        return csv_pairs(&rows);
    }
    if let Some(g) = &r.genericity {
        let mut out = String::from("lo,hi,count\n");
        for b in &g.histogram {
            out.push_str(&format!("{},{},{}\n", b.lo, b.hi, b.count));
        }
        return out;
    }
    if let Some(s) = &r.sio {
        let mut out = String::from("kraus,row,col,re,im\n");
        for (k, ks) in s.kraus.iter().enumerate() {
            for ((r, c), a) in ks.rows.iter().zip(&ks.cols).zip(&ks.amps) {
                out.push_str(&format!("{k},{r},{c},{},{}\n", a[0], a[1]));
            }
        }
        return out;
    }
    String::new()
}

fn build(cli: &Cli) -> Result<DistillationReport> {
    let opts = {
        let mut o = FidelityOptions { sdp_cap: cli.sdp_cap, ..FidelityOptions::default() };
        o.solver.gap_tol = cli.gap_tol;
        o
    };
    let state = |path: &PathBuf| -> Result<_> { parse_density(&read_to_string(path)?) };
    Ok(match &cli.command {
        Command::Measure { input, ks } => {
            let rho = state(input)?;
            let mut r = DistillationReport::new("measure");
            r.input = Some(InputDigest::of(&rho));
            r.measures = Some(measure_section(&rho, ks, cli.edge_tol)?);
            r
        }
        Command::Fidelity { input, copies } => {
            let rho = state(input)?;
            let mut r = DistillationReport::new("fidelity");
            r.input = Some(InputDigest::of(&rho));
            r.fidelity = Some(fidelity_section(&rho, *copies, &opts)?);
            r
        }
        Command::Protocol { input, copies, samples } => {
            let rho = state(input)?;
            let mut r = DistillationReport::new("protocol");
            r.seed = Some(cli.seed);
            r.input = Some(InputDigest::of(&rho));
            r.protocol = Some(protocol_section(&rho, *copies, *samples, cli.seed, cli.edge_tol)?);
            r
        }
        Command::Genericity { dim, samples, rank } => {
            let mut r = DistillationReport::new("genericity");
            r.seed = Some(cli.seed);
            r.genericity = Some(genericity_section(*dim, rank.unwrap_or(*dim), *samples, cli.seed)?);
            r
        }
        Command::ValidateSio { channel, tol } => {
            let text = read_to_string(channel)?;
            let parsed = parse_channel(&text, *tol);
            if let Err(e @ Error::Parse(_)) = parsed {
                return Err(e);
            }
            let mut r = DistillationReport::new("validate-sio");
            r.sio = Some(sio_section(parsed));
            r
        }
    })
}

/// Runs the tool on `args`, writing the report to `out` and diagnostics to
/// `err`. Returns the process exit status.
pub fn run<I, T>(args: I, out: &mut impl Write, err: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    match build(&cli) {
        Ok(report) => {
            let text = match cli.format {
                Format::Json => report.to_json() + "\n",
                Format::Csv => to_csv(&report),
            };
            match out.write_all(text.as_bytes()) {
                Ok(()) => EXIT_OK,
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    EXIT_INPUT
                }
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::DimensionCap { dim: 9, cap: 8 }), EXIT_CAP);
        assert_eq!(exit_code(&Error::NotPsd(-1.0)), EXIT_INPUT);
        let e = Error::Sdp(SdpError::NotConverged { status: crate::sdp::SolveStatus::MaxIters, iterations: 200, gap: 1.0 });
        assert_eq!(exit_code(&e), EXIT_SOLVER);
    }

    #[test]
    fn bad_flags_are_input_errors() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run(["cohere", "measure"], &mut out, &mut err), EXIT_INPUT);
        assert_eq!(run(["cohere", "genericity", "--dim", "x"], &mut out, &mut err), EXIT_INPUT);
    }
}
