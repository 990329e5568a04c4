//! Batch front door: rate tables, verification sweeps, converse checks,
//! Monte Carlo runs and the wire server/client, all emitting CSV.

use std::fs::File;
use std::io::{self, Write};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use onoff_core::converse::{brute_force_min_exact, lp_minimize};
use onoff_core::markov::{Source, TransitionMatrix};
use onoff_core::rational::{format_fraction, parse_fraction, to_f64, Rat};
use onoff_core::scheme::{optimal_inverse_rate, pi_floor, PrivacyPattern};
use onoff_core::sim::{empirical_leakage, run_session, SessionConfig, SessionStats};
use onoff_core::verifier::{uniform_initial, verify_cell, EncoderKind};

#[derive(Parser)]
#[command(name = "onoff", about = "ON-OFF private retrieval: rates, verification, converse, simulation, wire sessions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct MatrixArgs {
    /// Four fractions row-major, e.g. "3/4 1/4 1/4 3/4"
    #[arg(long, conflicts_with = "alpha")]
    matrix: Option<String>,
    /// Shorthand for the symmetric matrix [[1-a,a],[a,1-a]]
    #[arg(long)]
    alpha: Option<String>,
}

impl MatrixArgs {
    fn resolve(&self) -> onoff_core::Result<TransitionMatrix> {
        match (&self.matrix, &self.alpha) {
            (Some(m), _) => TransitionMatrix::parse(m),
            (None, Some(a)) => TransitionMatrix::parse(&format!("alpha={a}")),
            (None, None) => Err(onoff_core::Error::Parse(
                "need --matrix or --alpha".into(),
            )),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Optimal inverse download rate: per gap, per pattern step, or an alpha sweep
    Rate {
        #[command(flatten)]
        matrix: MatrixArgs,
        /// Single gap to evaluate
        #[arg(long)]
        gap: Option<usize>,
        /// Evaluate every gap 0..=N
        #[arg(long)]
        gap_max: Option<usize>,
        /// Per-timestep profile over this pattern, e.g. "ON,OFF,OFF"
        #[arg(long)]
        pattern: Option<String>,
        /// Sweep alpha over i/(2N) for i in 0..=N at the given --gap (default 1)
        #[arg(long)]
        sweep_alpha: Option<usize>,
        /// Append float columns next to the exact fractions
        #[arg(long)]
        float: bool,
        #[arg(long)]
        out: Option<String>,
    },
    /// Exact decodability/privacy/cost verification sweep; exit 1 on any failure
    Verify {
        #[command(flatten)]
        matrix: MatrixArgs,
        #[arg(long, default_value = "ON,OFF")]
        pattern: String,
        /// Verify every t in 0..=t_max
        #[arg(long, default_value_t = 3)]
        t_max: usize,
        #[arg(long)]
        out: Option<String>,
    },
    /// Converse bound: closed-form LP against the brute-force grid oracle
    Converse {
        #[command(flatten)]
        matrix: MatrixArgs,
        #[arg(long, default_value_t = 1)]
        gap: usize,
        #[arg(long, default_value_t = 101)]
        grid_n: usize,
        #[arg(long)]
        out: Option<String>,
    },
    /// Monte Carlo session against the in-process server
    Simulate {
        #[command(flatten)]
        matrix: MatrixArgs,
        #[command(flatten)]
        session: SessionArgs,
        /// Also report empirical leakage (bits) at each t
        #[arg(long)]
        leakage: bool,
        #[arg(long)]
        out: Option<String>,
    },
    /// Run the reference server
    Serve {
        #[arg(long, default_value = "0.0.0.0:4791")]
        bind: String,
        #[arg(long, default_value_t = 1024)]
        bits: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a live session against a server
    Fetch {
        /// Server address, e.g. 127.0.0.1:4791
        #[arg(long)]
        addr: String,
        #[command(flatten)]
        matrix: MatrixArgs,
        #[command(flatten)]
        session: SessionArgs,
        #[arg(long)]
        out: Option<String>,
    },
}

#[derive(Args)]
struct SessionArgs {
    #[arg(long, default_value = "ON,OFF")]
    pattern: String,
    /// Last query time T
    #[arg(long, default_value_t = 1)]
    horizon: usize,
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Message length in bits
    #[arg(long, default_value_t = 1024)]
    bits: usize,
    /// Use the revealing always-singleton encoder (negative control)
    #[arg(long)]
    adversarial: bool,
}

impl SessionArgs {
    fn config(&self, matrix: TransitionMatrix) -> onoff_core::Result<SessionConfig> {
        let mut cfg = SessionConfig::new(matrix, PrivacyPattern::parse(&self.pattern)?);
        cfg.horizon = self.horizon;
        cfg.trials = self.trials;
        cfg.seed = self.seed;
        cfg.message_bits = self.bits;
        cfg.encoder = if self.adversarial {
            EncoderKind::AlwaysSingleton
        } else {
            EncoderKind::Scheme
        };
        Ok(cfg)
    }
}

fn open_out(path: &Option<String>) -> io::Result<Box<dyn Write>> {
    match path {
        Some(p) => Ok(Box::new(File::create(p)?)),
        None => Ok(Box::new(io::stdout())),
    }
}

fn rate_row(
    out: &mut dyn Write,
    label: &str,
    m: &TransitionMatrix,
    gap: usize,
    float: bool,
) -> onoff_core::Result<()> {
    let pf = pi_floor(m, gap)?;
    let rate = optimal_inverse_rate(m, gap)?;
    write!(
        out,
        "{label},{gap},{},{},{}",
        format_fraction(pf.pi(Source::A)),
        format_fraction(pf.pi(Source::B)),
        format_fraction(&rate)
    )
    .map_err(io_err)?;
    if float {
        write!(out, ",{}", to_f64(&rate)).map_err(io_err)?;
    }
    writeln!(out).map_err(io_err)?;
    Ok(())
}

fn io_err(e: io::Error) -> onoff_core::Error {
    onoff_core::Error::Parse(format!("io error: {e}"))
}

fn cmd_rate(
    matrix: &MatrixArgs,
    gap: Option<usize>,
    gap_max: Option<usize>,
    pattern: &Option<String>,
    sweep_alpha: Option<usize>,
    float: bool,
    out: &Option<String>,
) -> onoff_core::Result<()> {
    let mut w = open_out(out).map_err(io_err)?;
    write!(w, "alpha_or_matrix,gap,pi_a,pi_b,inverse_rate").map_err(io_err)?;
    if float {
        write!(w, ",inverse_rate_float").map_err(io_err)?;
    }
    writeln!(w).map_err(io_err)?;
    if let Some(n) = sweep_alpha {
        let g = gap.unwrap_or(1);
        for i in 0..=n {
            let alpha: Rat = parse_fraction(&format!("{i}/{}", 2 * n))?;
            let m = TransitionMatrix::symmetric(alpha.clone())?;
            rate_row(&mut w, &format_fraction(&alpha), &m, g, float)?;
        }
        return Ok(());
    }
    let m = matrix.resolve()?;
    let label = m.to_string();
    if let Some(p) = pattern {
        let pat = PrivacyPattern::parse(p)?;
        for t in 0..pat.len() {
            rate_row(&mut w, &label, &m, pat.gap(t), float)?;
        }
    } else if let Some(gmax) = gap_max {
        for g in 0..=gmax {
            rate_row(&mut w, &label, &m, g, float)?;
        }
    } else {
        rate_row(&mut w, &label, &m, gap.unwrap_or(1), float)?;
    }
    Ok(())
}

fn cmd_verify(
    matrix: &MatrixArgs,
    pattern: &str,
    t_max: usize,
    out: &Option<String>,
) -> onoff_core::Result<bool> {
    let m = matrix.resolve()?;
    let pat = PrivacyPattern::parse(pattern)?;
    let mut w = open_out(out).map_err(io_err)?;
    writeln!(
        w,
        "matrix,pattern,t,gap,expected_cost,theorem_cost,factorizes,I1,I2,I3"
    )
    .map_err(io_err)?;
    let mut all_pass = true;
    for t in 0..=t_max {
        let row = verify_cell(&m, &pat, &uniform_initial(), t)?;
        all_pass &= row.passed();
        writeln!(
            w,
            "{},\"{}\",{},{},{},{},{},{},{},{}",
            row.matrix,
            row.pattern,
            row.t,
            row.gap,
            format_fraction(&row.expected_cost),
            format_fraction(&row.theorem_cost),
            row.factorizes,
            row.i1,
            row.i2,
            row.i3
        )
        .map_err(io_err)?;
    }
    Ok(all_pass)
}

fn cmd_converse(
    matrix: &MatrixArgs,
    gap: usize,
    grid_n: usize,
    out: &Option<String>,
) -> onoff_core::Result<()> {
    let m = matrix.resolve()?;
    let pf = pi_floor(&m, gap)?;
    let (z1, z2, optimum) = lp_minimize(&m, gap)?;
    let bf = brute_force_min_exact(&m, gap, grid_n)?;
    let mut w = open_out(out).map_err(io_err)?;
    writeln!(
        w,
        "matrix,gap,pi_a,pi_b,z1_star,z2_star,optimum,brute_force_optimum,grid_n"
    )
    .map_err(io_err)?;
    writeln!(
        w,
        "{},{gap},{},{},{},{},{},{},{grid_n}",
        m,
        format_fraction(pf.pi(Source::A)),
        format_fraction(pf.pi(Source::B)),
        format_fraction(&z1),
        format_fraction(&z2),
        format_fraction(&optimum),
        format_fraction(&bf)
    )
    .map_err(io_err)?;
    Ok(())
}

fn write_session_csv(
    w: &mut dyn Write,
    cfg: &SessionConfig,
    stats: &SessionStats,
    leakage: Option<&[f64]>,
) -> onoff_core::Result<()> {
    write!(w, "t,gap,theory_inverse_rate,empirical_inverse_rate,stderr,trials").map_err(io_err)?;
    if leakage.is_some() {
        write!(w, ",leakage_bits").map_err(io_err)?;
    }
    writeln!(w).map_err(io_err)?;
    for t in 0..=cfg.horizon {
        let gap = cfg.pattern.gap(t);
        let theory = optimal_inverse_rate(&cfg.matrix, gap)?;
        let empirical = stats.empirical_inverse_rate(t, cfg.message_bytes());
        let hist = &stats.query_histogram[t];
        let n = (hist[0] + hist[1] + hist[2]) as f64;
        let mean = (hist[0] + hist[1] + 2 * hist[2]) as f64 / n;
        let var = ((hist[0] + hist[1]) as f64 * (1.0 - mean).powi(2)
            + hist[2] as f64 * (2.0 - mean).powi(2))
            / n;
        let stderr = (var / n).sqrt();
        write!(
            w,
            "{t},{gap},{},{empirical},{stderr},{}",
            format_fraction(&theory),
            stats.per_t_bytes[t].1
        )
        .map_err(io_err)?;
        if let Some(l) = leakage {
            write!(w, ",{}", l[t]).map_err(io_err)?;
        }
        writeln!(w).map_err(io_err)?;
    }
    Ok(())
}

fn run() -> onoff_core::Result<bool> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Rate {
            matrix,
            gap,
            gap_max,
            pattern,
            sweep_alpha,
            float,
            out,
        } => {
            cmd_rate(matrix, *gap, *gap_max, pattern, *sweep_alpha, *float, out)?;
            Ok(true)
        }
        Command::Verify {
            matrix,
            pattern,
            t_max,
            out,
        } => cmd_verify(matrix, pattern, *t_max, out),
        Command::Converse {
            matrix,
            gap,
            grid_n,
            out,
        } => {
            cmd_converse(matrix, *gap, *grid_n, out)?;
            Ok(true)
        }
        Command::Simulate {
            matrix,
            session,
            leakage,
            out,
        } => {
            let cfg = session.config(matrix.resolve()?)?;
            let stats = run_session(&cfg)?;
            let leak = if *leakage {
                Some(
                    (0..=cfg.horizon)
                        .map(|t| empirical_leakage(&cfg, t))
                        .collect::<onoff_core::Result<Vec<f64>>>()?,
                )
            } else {
                None
            };
            let mut w = open_out(out).map_err(io_err)?;
            write_session_csv(&mut w, &cfg, &stats, leak.as_deref())?;
            Ok(stats.decode_failures == 0)
        }
        Command::Serve { bind, bits, seed } => {
            let server = onoff_core::net::serve(bind.as_str(), *bits, *seed)
                .map_err(|e| onoff_core::Error::Parse(format!("serve failed: {e}")))?;
            eprintln!("listening on {}", server.addr());
            // run until killed
            loop {
                std::thread::sleep(std::time::Duration::from_secs(3600));
            }
        }
        Command::Fetch {
            addr,
            matrix,
            session,
            out,
        } => {
            let cfg = session.config(matrix.resolve()?)?;
            let addr: std::net::SocketAddr = addr
                .parse()
                .map_err(|e| onoff_core::Error::Parse(format!("bad address: {e}")))?;
            let stats = onoff_core::net::fetch(addr, &cfg)?;
            let mut w = open_out(out).map_err(io_err)?;
            write_session_csv(&mut w, &cfg, &stats, None)?;
            Ok(stats.decode_failures == 0)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
