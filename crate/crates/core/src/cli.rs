//! The `goldcert` command line.
//!
//! All configuration comes from flags; output is line-oriented text and
//! certificates are written only after they verify.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use num_traits::One;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::certify::{self, verify};
use crate::decompose::{decompose, DecomposeConfig, SelectionPolicy};
use crate::factor::{
    check_divisor_congruences, factor_mersenne, omega_report, FactorTable, DEFAULT_RHO_BUDGET,
};
use crate::good::{default_s_max, good_witness, scan_good, theorem1_decomposition, GoodError};
use crate::modarith::{jacobi_u, mersenne, rotkiewicz_symbol, ArithError};
use crate::sweep::{summary_tsv, sweep, SweepConfig};

#[derive(Debug, Parser)]
#[command(name = "goldcert", version, about = "Decompose the inverse map of GF(2^n) into quadratic power maps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct TableArgs {
    /// Factor table file (`n q1 q2 ...` per line)
    #[arg(long, value_name = "FILE", conflicts_with = "bundled_table")]
    pub table: Option<PathBuf>,
    /// Use the factor table shipped with the binary (odd n <= 249)
    #[arg(long)]
    pub bundled_table: bool,
    /// Pollard-rho iteration cap per composite
    #[arg(long, default_value_t = DEFAULT_RHO_BUDGET)]
    pub budget: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PolicyArg {
    Unit,
    Basis,
}

#[derive(Debug, Args, Clone)]
pub struct DecomposeArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Allow cubic exponents 2^a+2^b+1 when quadratics do not span
    #[arg(long)]
    pub cubics: bool,
    #[arg(long, value_enum, default_value = "unit")]
    pub policy: PolicyArg,
    /// Fail instead of falling back when a unit pattern is missing
    #[arg(long)]
    pub strict: bool,
    /// Smallest odd a tried for 2^a+1
    #[arg(long, default_value_t = 1)]
    pub min_a: u32,
    /// Keep multiplicities as y_i * R * Q instead of reducing them
    #[arg(long)]
    pub unreduced: bool,
}

impl DecomposeArgs {
    fn config(&self) -> DecomposeConfig {
        DecomposeConfig {
            policy: match self.policy {
                PolicyArg::Unit => SelectionPolicy::UnitVectorFirst,
                PolicyArg::Basis => SelectionPolicy::AnyBasis,
            },
            fallback: !self.strict,
            include_cubics: self.cubics,
            min_a: self.min_a,
            seed: self.seed,
            reduce_multiplicities: !self.unreduced,
            ..Default::default()
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Factor 2^n - 1 and report radical, lift cofactor and divisor statistics
    Factor {
        n: u64,
        #[command(flatten)]
        table: TableArgs,
    },
    /// Build and verify a quadratic decomposition certificate for odd n
    Decompose {
        n: u64,
        #[command(flatten)]
        table: TableArgs,
        #[command(flatten)]
        opts: DecomposeArgs,
        /// Write the certificate here instead of stdout
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Look for (n-1)/2^v = 2^k 3^s and print the closed-form certificate
    Good {
        n: u64,
        #[arg(long)]
        smax: Option<u64>,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// List all n <= MAX with the 2^k 3^s property
    ScanGood {
        #[arg(long)]
        max: u64,
        #[arg(long)]
        smax: Option<u64>,
    },
    /// Symbol ((2^a+1)/(2^n-1)) via the signed-remainder chain
    Symbol { a: u64, n: u64 },
    /// Re-verify a certificate file
    Verify { file: PathBuf },
    /// Decompose every odd n in [3, MAX]
    Sweep {
        #[arg(long)]
        max: u64,
        #[command(flatten)]
        table: TableArgs,
        #[command(flatten)]
        opts: DecomposeArgs,
        /// Directory for certificates and summary.tsv
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Add a wall-clock column to the summary
        #[arg(long)]
        timings: bool,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failed(String),
    #[error("{path}: {msg}")]
    Io { path: PathBuf, msg: String },
}

/// What a CLI invocation produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliOutput {
    pub status: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> CliOutput
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            let status = if e.use_stderr() { 2 } else { 0 };
            return if status == 0 {
                CliOutput { status, stdout: text, stderr: String::new() }
            } else {
                CliOutput { status, stdout: String::new(), stderr: text }
            };
        }
    };
    let mut out = String::new();
    match execute(&cli.command, &mut out) {
        Ok(()) => CliOutput { status: 0, stdout: out, stderr: String::new() },
        Err(e) => CliOutput {
            status: match e {
                CliError::Usage(_) => 2,
                _ => 1,
            },
            stdout: out,
            stderr: format!("error: {e}\n"),
        },
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io { path: path.to_path_buf(), msg: e.to_string() }
}

fn load_table(args: &TableArgs) -> Result<Option<FactorTable>, CliError> {
    if args.bundled_table {
        return Ok(Some(FactorTable::bundled()));
    }
    match &args.table {
        None => Ok(None),
        Some(path) => {
            let file = fs::File::open(path).map_err(io_err(path))?;
            FactorTable::load(file)
                .map(Some)
                .map_err(|e| CliError::Io { path: path.clone(), msg: e.to_string() })
        }
    }
}

fn execute(cmd: &Command, out: &mut String) -> Result<(), CliError> {
    match cmd {
        Command::Factor { n, table } => cmd_factor(*n, table, out),
        Command::Decompose { n, table, opts, out: file } => {
            cmd_decompose(*n, table, opts, file.as_deref(), out)
        }
        Command::Good { n, smax, out: file } => cmd_good(*n, *smax, file.as_deref(), out),
        Command::ScanGood { max, smax } => {
            if *max < 1 {
                return Err(CliError::Usage("--max must be at least 1".into()));
            }
            let set = scan_good(*max, *smax);
            let list: Vec<String> = set.iter().map(u64::to_string).collect();
            let _ = writeln!(out, "{{{}}}", list.join(", "));
            let _ = writeln!(out, "count = {}", set.len());
            Ok(())
        }
        Command::Symbol { a, n } => cmd_symbol(*a, *n, out),
        Command::Verify { file } => {
            let text = fs::read_to_string(file).map_err(io_err(file))?;
            let cert = certify::deserialize(&text)
                .map_err(|e| CliError::Failed(format!("{}: {e}", file.display())))?;
            match verify(&cert) {
                Ok(()) => {
                    let _ = writeln!(
                        out,
                        "ok: n = {}, method = {}, {} factors, product ≡ -1 (mod 2^{} - 1)",
                        cert.n,
                        cert.method,
                        cert.factors.len(),
                        cert.n
                    );
                    Ok(())
                }
                Err(e) => Err(CliError::Failed(format!("{}: {e}", file.display()))),
            }
        }
        Command::Sweep { max, table, opts, out: dir, timings } => {
            cmd_sweep(*max, table, opts, dir.as_deref(), *timings, out)
        }
    }
}

fn cmd_factor(n: u64, table: &TableArgs, out: &mut String) -> Result<(), CliError> {
    if n < 2 {
        return Err(CliError::Usage("n must be at least 2".into()));
    }
    let tbl = load_table(table)?;
    let mut rng = ChaCha8Rng::seed_from_u64(n);
    let f = factor_mersenne(n, tbl.as_ref(), table.budget, &mut rng);
    let _ = writeln!(out, "n = {n}");
    let _ = writeln!(out, "2^n-1 = {}", mersenne(n));
    let _ = writeln!(out, "factorization = {f}");
    let _ = writeln!(out, "complete = {}", f.complete);
    let _ = writeln!(out, "radical = {}", f.radical);
    let _ = writeln!(out, "lift_Q = {}", f.lift_q);
    if !f.complete {
        return Err(CliError::Failed(format!(
            "could not finish factoring 2^{n} - 1 within the rho budget"
        )));
    }
    let omega = omega_report(&f).expect("complete");
    let _ = writeln!(
        out,
        "omega = {}, bound 1.36*ln(n) = {:.4}, within = {}, squarefree = {}",
        omega.omega, omega.bound, omega.within, omega.squarefree
    );
    let report = check_divisor_congruences(&f).expect("complete");
    for c in &report.checks {
        let show = |v: Option<bool>| v.map_or("skip".to_string(), |b| b.to_string());
        let _ = writeln!(out, "  q = {}: q≡1 (mod n) {}, q≡±1 (mod 8) {}", c.q, show(c.mod_n), show(c.mod_8));
    }
    for note in &report.notes {
        let _ = writeln!(out, "note: {note}");
    }
    Ok(())
}

fn cmd_decompose(
    n: u64,
    table: &TableArgs,
    opts: &DecomposeArgs,
    file: Option<&Path>,
    out: &mut String,
) -> Result<(), CliError> {
    if n < 3 || n % 2 == 0 {
        return Err(CliError::Usage(format!("n must be odd and at least 3, got {n}")));
    }
    let tbl = load_table(table)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ n.rotate_left(32));
    let f = factor_mersenne(n, tbl.as_ref(), table.budget, &mut rng);
    if !f.complete {
        return Err(CliError::Failed(format!(
            "factorization of 2^{n} - 1 incomplete ({f}); supply --table"
        )));
    }
    let d = decompose(n, &f, &opts.config()).map_err(|e| CliError::Failed(e.to_string()))?;
    // never emit anything that does not re-verify from scratch
    verify(&d.certificate).map_err(|e| CliError::Failed(e.to_string()))?;
    let text = certify::serialize(&d.certificate);
    match file {
        Some(path) => {
            fs::write(path, &text).map_err(io_err(path))?;
            let _ = writeln!(
                out,
                "n = {n}: {} factors, fallback = {}, cubics = {}, written to {}",
                d.certificate.factors.len(),
                d.selection.fallback_used,
                d.selection.cubics_used,
                path.display()
            );
        }
        None => out.push_str(&text),
    }
    Ok(())
}

fn cmd_good(n: u64, smax: Option<u64>, file: Option<&Path>, out: &mut String) -> Result<(), CliError> {
    let s_max = smax.unwrap_or_else(|| default_s_max(n));
    match good_witness(n, s_max) {
        Ok(w) => {
            let _ = writeln!(
                out,
                "n = {n}: (n-1)/2^{} = {} ≡ 2^{} * 3^{} (mod 2^{n} - 1), length {}",
                w.nu,
                w.odd_part(),
                w.k,
                w.s,
                w.length()
            );
            let cert = theorem1_decomposition(&w);
            verify(&cert).map_err(|e| CliError::Failed(e.to_string()))?;
            let factors: Vec<String> = cert.factors.iter().map(|f| f.kind.to_string()).collect();
            let _ = writeln!(out, "factors: {}", factors.join(" * "));
            if let Some(path) = file {
                fs::write(path, certify::serialize(&cert)).map_err(io_err(path))?;
            }
            Ok(())
        }
        Err(GoodError::BadN(_)) => Err(CliError::Usage(format!("n must be odd and at least 3, got {n}"))),
        Err(e @ GoodError::NotFoundWithinBound { .. }) => {
            let _ = writeln!(out, "{e}");
            Ok(())
        }
    }
}

fn cmd_symbol(a: u64, n: u64, out: &mut String) -> Result<(), CliError> {
    let big = |e: u64| (BigUint::one() << e) + 1u32;
    match rotkiewicz_symbol(a, n) {
        Ok((sym, chain)) => {
            let generic = jacobi_u(&big(a), &mersenne(n)).expect("odd modulus");
            let _ = writeln!(out, "symbol = {sym}");
            let _ = writeln!(out, "length = {}", chain.len());
            let _ = writeln!(
                out,
                "chain: {}",
                if chain.is_empty() { "(empty)".to_string() } else { chain.render() }
            );
            let _ = writeln!(
                out,
                "jacobi(2^{a}+1, 2^{n}-1) = {generic} ({})",
                if generic == sym { "agrees" } else { "DISAGREES" }
            );
            if generic != sym {
                return Err(CliError::Failed("chain and generic Jacobi disagree".into()));
            }
            Ok(())
        }
        Err(ArithError::NonCoprime { gcd, .. }) => {
            let generic = jacobi_u(&big(a), &mersenne(n)).expect("odd modulus");
            let _ = writeln!(out, "gcd(a, n) = {gcd}: no chain, using generic Jacobi");
            let _ = writeln!(out, "symbol = {generic}");
            Ok(())
        }
        Err(e) => Err(CliError::Usage(e.to_string())),
    }
}

fn cmd_sweep(
    max: u64,
    table: &TableArgs,
    opts: &DecomposeArgs,
    dir: Option<&Path>,
    timings: bool,
    out: &mut String,
) -> Result<(), CliError> {
    let cfg = SweepConfig {
        max,
        table: load_table(table)?,
        budget: table.budget,
        decompose: opts.config(),
        ..Default::default()
    };
    let rows = sweep(&cfg);
    let summary = summary_tsv(&rows, timings);
    if let Some(dir) = dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        for row in &rows {
            if let Ok(s) = &row.outcome {
                verify(&s.certificate).map_err(|e| CliError::Failed(e.to_string()))?;
                let path = dir.join(format!("cert_{:03}.json", row.n));
                fs::write(&path, certify::serialize(&s.certificate)).map_err(io_err(&path))?;
            }
        }
        let path = dir.join("summary.tsv");
        fs::write(&path, &summary).map_err(io_err(&path))?;
    }
    out.push_str(&summary);
    let failed: Vec<String> = rows.iter().filter(|r| !r.ok()).map(|r| r.n.to_string()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("failed for n = {}", failed.join(", "))))
    }
}
