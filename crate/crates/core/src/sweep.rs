//! Batch decomposition over all odd `n` in a range.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::certify::{DecompositionCertificate, Method};
use crate::decompose::{decompose, DecomposeConfig};
use crate::factor::{factor_mersenne_exec, FactorTable, DEFAULT_RHO_BUDGET};
use crate::par::{self, Execution};

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub min: u64,
    pub max: u64,
    pub table: Option<FactorTable>,
    pub budget: u64,
    pub decompose: DecomposeConfig,
    /// Parallelism across `n`. Each `n` runs its own inner steps sequentially.
    pub exec: Execution,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            min: 3,
            max: 3,
            table: None,
            budget: DEFAULT_RHO_BUDGET,
            decompose: DecomposeConfig::default(),
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub n: u64,
    /// Number of distinct primes, 0 if factoring did not finish.
    pub k: usize,
    pub squarefree: bool,
    pub outcome: Result<SweepSuccess, String>,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct SweepSuccess {
    pub certificate: DecompositionCertificate,
    pub fallback_used: bool,
    pub cubics_used: bool,
}

impl SweepRow {
    pub fn ok(&self) -> bool {
        self.outcome.is_ok()
    }
}

fn run_one(n: u64, cfg: &SweepConfig) -> SweepRow {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.decompose.seed ^ n.rotate_left(32));
    let f = factor_mersenne_exec(n, cfg.table.as_ref(), cfg.budget, &mut rng, Execution::Sequential);
    let inner = DecomposeConfig {
        exec: Execution::Sequential,
        ..cfg.decompose.clone()
    };
    let outcome = decompose(n, &f, &inner)
        .map(|d| SweepSuccess {
            fallback_used: d.selection.fallback_used,
            cubics_used: d.selection.cubics_used,
            certificate: d.certificate,
        })
        .map_err(|e| e.to_string());
    SweepRow {
        n,
        k: if f.complete { f.omega() } else { 0 },
        squarefree: f.is_squarefree(),
        outcome,
        elapsed: start.elapsed(),
    }
}

/// Decomposes every odd `n` in `[min, max]`; rows come back sorted by `n`.
pub fn sweep(cfg: &SweepConfig) -> Vec<SweepRow> {
    let ns: Vec<u64> = (cfg.min.max(3)..=cfg.max).filter(|n| n % 2 == 1).collect();
    par::map(cfg.exec, &ns, |&n| run_one(n, cfg))
}

/// Tab-separated summary. Timings are included only on request so the
/// default output is reproducible byte for byte.
pub fn summary_tsv(rows: &[SweepRow], with_timings: bool) -> String {
    let mut out = String::from("n\tk\tsquarefree\tmethod\tfallback\tcubics\tstatus");
    if with_timings {
        out.push_str("\twall_ms");
    }
    out.push('\n');
    for r in rows {
        let (method, fallback, cubics, status) = match &r.outcome {
            Ok(s) => (
                Method::Algorithm1.to_string(),
                s.fallback_used.to_string(),
                s.cubics_used.to_string(),
                "ok".to_string(),
            ),
            Err(e) => (
                "-".into(),
                "-".into(),
                "-".into(),
                format!("error: {}", e.lines().next().unwrap_or("")),
            ),
        };
        let _ = write!(
            out,
            "{}\t{}\t{}\t{method}\t{fallback}\t{cubics}\t{status}",
            r.n, r.k, r.squarefree
        );
        if with_timings {
            let _ = write!(out, "\t{:.3}", r.elapsed.as_secs_f64() * 1e3);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_sweep_is_deterministic() {
        let cfg = SweepConfig {
            max: 41,
            ..Default::default()
        };
        let a = sweep(&cfg);
        let b = sweep(&SweepConfig {
            exec: Execution::Sequential,
            ..cfg.clone()
        });
        assert_eq!(a.len(), 20);
        assert!(a.iter().all(SweepRow::ok));
        assert_eq!(summary_tsv(&a, false), summary_tsv(&b, false));
        let tsv = summary_tsv(&a, true);
        assert!(tsv.starts_with("n\tk\tsquarefree\tmethod\tfallback\tcubics\tstatus\twall_ms\n"));
        assert!(tsv.contains("\n21\t3\tfalse\talgorithm1\t"));
    }
}
