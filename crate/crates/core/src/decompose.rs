//! Decomposition of `-1 mod 2^n - 1` into Gold exponents from quadratic
//! character patterns.
//!
//! With `2^n - 1 = Π q_j^(m_j)`, pick `k` candidates whose non-residue
//! patterns over the `q_j` are independent over GF(2). Taking 2-adic discrete
//! logs `b_ij` of each candidate in the 2-Sylow subgroup modulo `q_j` gives a
//! matrix with odd determinant, so the system
//! `Σ_i y_i b_ij ≡ 2^(α_j - 1) (mod 2^α_j)` has a solution. Then
//! `Π (candidate_i)^(y_i R Q) ≡ -1 (mod 2^n - 1)`, where `R` is the lcm of the
//! odd parts of `q_j - 1` and `Q = (2^n - 1) / radical` lifts the relation
//! from the radical to the full modulus.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::certify::{verify, CertError, DecompositionCertificate, FactorKind, GoldFactor, Method};
use crate::factor::MersenneFactorization;
use crate::lin2k::{
    gf2_rank_select, solve_unit_system, Candidate, DlogMatrix, LinError, ParityVector, MAX_ALPHA,
};
use crate::modarith::{dlog_2sylow, jacobi_u, modpow, nu2, sylow2_generator, ArithError};
use crate::par::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionPolicy {
    /// Look for one candidate per prime with an exact unit pattern first.
    #[default]
    UnitVectorFirst,
    /// Take the first GF(2) basis in candidate order.
    AnyBasis,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecomposeConfig {
    pub policy: SelectionPolicy,
    /// Fall back to [`SelectionPolicy::AnyBasis`] when some unit pattern is
    /// missing. Disable to fail instead.
    pub fallback: bool,
    /// Extend the pool with `2^a + 2^b + 1` when quadratics do not span.
    pub include_cubics: bool,
    /// Smallest odd `a` tried for `2^a + 1`.
    pub min_a: u32,
    pub seed: u64,
    /// Reduce multiplicities modulo the Carmichael function of `2^n - 1`.
    pub reduce_multiplicities: bool,
    pub exec: Execution,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        DecomposeConfig {
            policy: SelectionPolicy::default(),
            fallback: true,
            include_cubics: false,
            min_a: 1,
            seed: 0,
            reduce_multiplicities: true,
            exec: Execution::default(),
        }
    }
}

/// 2-Sylow data for one prime factor `q`: `q - 1 = 2^alpha * r_odd`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SylowData {
    pub q: BigUint,
    pub alpha: u32,
    pub r_odd: BigUint,
    pub generator: BigUint,
}

impl SylowData {
    pub fn new(q: &BigUint, rng: &mut ChaCha8Rng) -> Result<Self, DecomposeError> {
        let q1 = q - 1u32;
        let alpha = nu2(&q1)?;
        let r_odd = &q1 >> alpha;
        let generator = sylow2_generator(q, alpha, &r_odd, rng)?;
        let alpha = u32::try_from(alpha)
            .ok()
            .filter(|&a| a <= MAX_ALPHA)
            .ok_or_else(|| {
                DecomposeError::Internal(format!("2-adic valuation of {q} - 1 exceeds {MAX_ALPHA}"))
            })?;
        Ok(SylowData {
            q: q.clone(),
            alpha,
            r_odd,
            generator,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecomposeError {
    #[error("n must be odd and at least 3, got {0}")]
    BadN(u64),
    #[error("factorization of 2^{0} - 1 is incomplete")]
    IncompleteFactorization(u64),
    #[error("factorization belongs to n = {found}, expected {expected}")]
    WrongFactorization { expected: u64, found: u64 },
    #[error("candidate {0} is divisible by one of the primes")]
    Degenerate(Candidate),
    #[error("no candidate has the unit pattern for prime #{index} ({q})")]
    NoUnitCandidate { index: usize, q: BigUint },
    #[error("candidate pool spans only {rank} of {k} dimensions\n{dump}")]
    SpanFailure { rank: usize, k: usize, dump: String },
    #[error("linear algebra: {0}")]
    Lin(#[from] LinError),
    #[error("arithmetic: {0}")]
    Arith(#[from] ArithError),
    #[error("certificate failed verification: {0}")]
    Verification(#[from] CertError),
    #[error("internal consistency failure: {0}")]
    Internal(String),
}

/// Value of a candidate modulo `m`.
pub fn candidate_residue(c: Candidate, m: &BigUint) -> BigUint {
    let two = BigUint::from(2u32);
    let p = |e: u32| modpow(&two, &BigUint::from(e), m).expect("m >= 2");
    match c {
        Candidate::Quadratic(a) => (p(a) + 1u32) % m,
        Candidate::Cubic(a, b) => (p(a) + p(b) + 1u32) % m,
    }
}

pub fn candidate_kind(c: Candidate) -> FactorKind {
    match c {
        Candidate::Quadratic(a) => FactorKind::Quadratic(a as u64),
        Candidate::Cubic(a, b) => FactorKind::Cubic(a as u64, b as u64),
    }
}

/// Non-residue pattern of `c` over `primes`; `Degenerate` if some prime
/// divides it.
pub fn legendre_parity_vector(
    c: Candidate,
    primes: &[BigUint],
) -> Result<ParityVector, DecomposeError> {
    let mut bits = Vec::with_capacity(primes.len());
    for q in primes {
        match jacobi_u(&candidate_residue(c, q), q)? {
            0 => return Err(DecomposeError::Degenerate(c)),
            s => bits.push(s == -1),
        }
    }
    Ok(ParityVector { candidate: c, bits })
}

/// Selected candidates, ordered so that row `i` of the discrete-log matrix
/// belongs to `vectors[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    pub vectors: Vec<ParityVector>,
    pub fallback_used: bool,
    pub cubics_used: bool,
}

fn quadratic_pool(n: u64, min_a: u32) -> Vec<Candidate> {
    let top = n.saturating_sub(2) as u32;
    (min_a.max(1)..=top)
        .filter(|a| a % 2 == 1)
        .map(Candidate::Quadratic)
        .collect()
}

fn cubic_pool(n: u64) -> Vec<Candidate> {
    let top = n.saturating_sub(2) as u32;
    (2..=top)
        .flat_map(|a| (1..a).map(move |b| Candidate::Cubic(a, b)))
        .collect()
}

fn parity_pool(pool: &[Candidate], primes: &[BigUint], exec: Execution) -> Vec<ParityVector> {
    par::map(exec, pool, |&c| legendre_parity_vector(c, primes).ok())
        .into_iter()
        .flatten()
        .collect()
}

fn dump_pool(vectors: &[ParityVector]) -> String {
    vectors
        .iter()
        .map(|v| format!("  {:<16} {}", v.candidate.to_string(), v.render()))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Chooses `k = primes.len()` candidates whose parity vectors form a basis.
pub fn select_candidates(
    n: u64,
    primes: &[BigUint],
    config: &DecomposeConfig,
) -> Result<Selection, DecomposeError> {
    let k = primes.len();
    let quads = parity_pool(&quadratic_pool(n, config.min_a), primes, config.exec);

    if config.policy == SelectionPolicy::UnitVectorFirst {
        let mut chosen = Vec::with_capacity(k);
        for (i, q) in primes.iter().enumerate() {
            match quads.iter().find(|v| v.is_unit(i)) {
                Some(v) => chosen.push(v.clone()),
                None if config.fallback => break,
                None => return Err(DecomposeError::NoUnitCandidate { index: i, q: q.clone() }),
            }
        }
        if chosen.len() == k {
            return Ok(Selection {
                vectors: chosen,
                fallback_used: false,
                cubics_used: false,
            });
        }
    }
    let fallback_used = config.policy == SelectionPolicy::UnitVectorFirst;

    let rank = match gf2_rank_select(&quads, k) {
        Ok(idx) => {
            return Ok(Selection {
                vectors: idx.into_iter().map(|i| quads[i].clone()).collect(),
                fallback_used,
                cubics_used: false,
            })
        }
        Err(LinError::InsufficientRank { rank, .. }) => rank,
        Err(e) => return Err(e.into()),
    };
    if !config.include_cubics {
        return Err(DecomposeError::SpanFailure {
            rank,
            k,
            dump: dump_pool(&quads),
        });
    }
    let mut pool = quads;
    pool.extend(parity_pool(&cubic_pool(n), primes, config.exec));
    match gf2_rank_select(&pool, k) {
        Ok(idx) => {
            let vectors: Vec<ParityVector> = idx.into_iter().map(|i| pool[i].clone()).collect();
            let cubics_used = vectors
                .iter()
                .any(|v| matches!(v.candidate, Candidate::Cubic(..)));
            Ok(Selection {
                vectors,
                fallback_used,
                cubics_used,
            })
        }
        Err(LinError::InsufficientRank { rank, .. }) => Err(DecomposeError::SpanFailure {
            rank,
            k,
            dump: dump_pool(&pool),
        }),
        Err(e) => Err(e.into()),
    }
}

/// Entry `(i, j)` is the 2-Sylow log of candidate `i` modulo `q_j`. The
/// parity of every entry is checked against the selected pattern.
pub fn build_dlog_matrix(
    selected: &[ParityVector],
    sylow: &[SylowData],
) -> Result<DlogMatrix, DecomposeError> {
    let mut entries = Vec::with_capacity(selected.len());
    for v in selected {
        let mut row = Vec::with_capacity(sylow.len());
        for (j, s) in sylow.iter().enumerate() {
            let x = candidate_residue(v.candidate, &s.q);
            let b = dlog_2sylow(&x, &s.generator, &s.q, s.alpha as u64, &s.r_odd)?;
            let b = b.to_u128().expect("log below 2^128");
            if (b & 1 == 1) != v.bits[j] {
                return Err(DecomposeError::Internal(format!(
                    "log of {} modulo {} has parity {} but the symbol says {}",
                    v.candidate, s.q, b & 1, v.bits[j] as u8
                )));
            }
            row.push(b);
        }
        entries.push(row);
    }
    let alphas = sylow.iter().map(|s| s.alpha).collect();
    Ok(DlogMatrix::new(alphas, entries)?)
}

/// `e_i = y_i · R · Q`, optionally reduced modulo `reduce_mod`.
pub fn assemble_exponents(
    y: &[u128],
    sylow: &[SylowData],
    lift_q: &BigUint,
    reduce_mod: Option<&BigUint>,
) -> Vec<BigUint> {
    let r = sylow
        .iter()
        .fold(BigUint::one(), |acc, s| acc.lcm(&s.r_odd));
    let scale = r * lift_q;
    y.iter()
        .map(|&yi| {
            let e = BigUint::from(yi) * &scale;
            match reduce_mod {
                Some(m) => e % m,
                None => e,
            }
        })
        .collect()
}

/// Full pipeline result: the certificate and the intermediate data that
/// produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition {
    pub certificate: DecompositionCertificate,
    pub selection: Selection,
    pub sylow: Vec<SylowData>,
    pub matrix: DlogMatrix,
    pub solution: Vec<u128>,
}

/// Runs selection, discrete logs, the linear solve and exponent assembly, and
/// returns only a certificate that passes [`verify`].
pub fn decompose(
    n: u64,
    f: &MersenneFactorization,
    config: &DecomposeConfig,
) -> Result<Decomposition, DecomposeError> {
    if n < 3 || n % 2 == 0 {
        return Err(DecomposeError::BadN(n));
    }
    if f.n != n {
        return Err(DecomposeError::WrongFactorization {
            expected: n,
            found: f.n,
        });
    }
    if !f.complete {
        return Err(DecomposeError::IncompleteFactorization(n));
    }
    let primes: Vec<BigUint> = f.primes().cloned().collect();
    let selection = select_candidates(n, &primes, config)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let sylow = primes
        .iter()
        .map(|q| SylowData::new(q, &mut rng))
        .collect::<Result<Vec<_>, _>>()?;

    let matrix = build_dlog_matrix(&selection.vectors, &sylow)?;
    let solution = solve_unit_system(&matrix)?;
    let lambda = config.reduce_multiplicities.then(|| f.carmichael_lambda());
    let exps = assemble_exponents(&solution, &sylow, &f.lift_q, lambda.as_ref());

    let factors = selection
        .vectors
        .iter()
        .zip(exps)
        .filter(|(_, e)| !e.is_zero())
        .map(|(v, e)| GoldFactor::new(candidate_kind(v.candidate), e))
        .collect();
    let certificate = DecompositionCertificate::new(n, Method::Algorithm1, factors);
    verify(&certificate)?;
    Ok(Decomposition {
        certificate,
        selection,
        sylow,
        matrix,
        solution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::{factor_mersenne, FactorTable, DEFAULT_RHO_BUDGET};

    fn b(x: u64) -> BigUint {
        BigUint::from(x)
    }

    fn factorization(n: u64) -> MersenneFactorization {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        factor_mersenne(n, None, DEFAULT_RHO_BUDGET, &mut rng)
    }

    #[test]
    fn parity_vector_examples() {
        let primes = [b(7), b(73)];
        let v = legendre_parity_vector(Candidate::Quadratic(1), &primes).unwrap();
        assert_eq!(v.bits, vec![true, false]);
        let v = legendre_parity_vector(Candidate::Quadratic(3), &primes).unwrap();
        assert_eq!(v.bits, vec![false, false]);
        assert_eq!(
            legendre_parity_vector(Candidate::Cubic(2, 1), &primes),
            Err(DecomposeError::Degenerate(Candidate::Cubic(2, 1)))
        );
    }

    #[test]
    fn selection_examples() {
        let cfg = DecomposeConfig::default();
        let s = select_candidates(5, &[b(31)], &cfg).unwrap();
        assert_eq!(s.vectors[0].candidate, Candidate::Quadratic(1));
        assert!(!s.fallback_used);

        let s = select_candidates(9, &[b(7), b(73)], &cfg).unwrap();
        assert!(s.fallback_used);
        let picked: Vec<_> = s.vectors.iter().map(|v| v.candidate).collect();
        assert_eq!(picked, vec![Candidate::Quadratic(1), Candidate::Quadratic(5)]);
        assert_eq!(s.vectors[1].bits, vec![true, true]);

        // 3 is already a non-residue mod 127, so the ascending scan stops at a = 1
        let s = select_candidates(7, &[b(127)], &cfg).unwrap();
        assert_eq!(s.vectors[0].candidate, Candidate::Quadratic(1));
        let from5 = DecomposeConfig { min_a: 5, ..Default::default() };
        let s = select_candidates(7, &[b(127)], &from5).unwrap();
        assert_eq!(s.vectors[0].candidate, Candidate::Quadratic(5));
    }

    #[test]
    fn strict_policy_fails_without_fallback() {
        let cfg = DecomposeConfig { fallback: false, ..Default::default() };
        assert!(matches!(
            select_candidates(9, &[b(7), b(73)], &cfg),
            Err(DecomposeError::NoUnitCandidate { index: 1, .. })
        ));
    }

    #[test]
    fn span_failure_and_cubic_rescue() {
        // all odd a in [1, 7] for n = 9 with min_a = 3: patterns (0,0), (1,1), (1,1)
        let cfg = DecomposeConfig { min_a: 3, ..Default::default() };
        match select_candidates(9, &[b(7), b(73)], &cfg) {
            Err(DecomposeError::SpanFailure { rank: 1, k: 2, dump }) => {
                assert!(dump.contains("2^5+1"));
            }
            other => panic!("{other:?}"),
        }
        let cfg = DecomposeConfig { min_a: 3, include_cubics: true, ..Default::default() };
        let s = select_candidates(9, &[b(7), b(73)], &cfg).unwrap();
        assert!(s.cubics_used && s.fallback_used);
        let f = factorization(9);
        let d = decompose(9, &f, &cfg).unwrap();
        assert!(d.certificate.verified);
        assert!(d.certificate.uses_cubics());
    }

    #[test]
    fn matrix_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s31 = SylowData::new(&b(31), &mut rng).unwrap();
        let v = legendre_parity_vector(Candidate::Quadratic(1), &[b(31)]).unwrap();
        let m = build_dlog_matrix(&[v], &[s31.clone()]).unwrap();
        assert_eq!(m.entries, vec![vec![1]]);

        let s127 = SylowData::new(&b(127), &mut rng).unwrap();
        let v = legendre_parity_vector(Candidate::Quadratic(5), &[b(127)]).unwrap();
        assert_eq!(build_dlog_matrix(&[v], &[s127]).unwrap().entries, vec![vec![1]]);

        // 9 is a square modulo 31
        let v = legendre_parity_vector(Candidate::Quadratic(3), &[b(31)]).unwrap();
        assert_eq!(build_dlog_matrix(&[v], &[s31]).unwrap().entries, vec![vec![0]]);
    }

    #[test]
    fn parity_mismatch_is_internal_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s31 = SylowData::new(&b(31), &mut rng).unwrap();
        let forged = ParityVector { candidate: Candidate::Quadratic(1), bits: vec![false] };
        assert!(matches!(
            build_dlog_matrix(&[forged], &[s31]),
            Err(DecomposeError::Internal(_))
        ));
    }

    #[test]
    fn assemble_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s31 = SylowData::new(&b(31), &mut rng).unwrap();
        assert_eq!(assemble_exponents(&[1], &[s31.clone()], &b(1), Some(&b(30))), vec![b(15)]);
        let s127 = SylowData::new(&b(127), &mut rng).unwrap();
        assert_eq!(assemble_exponents(&[1], &[s127], &b(1), None), vec![b(63)]);
        assert_eq!(assemble_exponents(&[0], &[s31], &b(1), None), vec![b(0)]);
    }

    #[test]
    fn decompose_examples() {
        let cfg = DecomposeConfig::default();
        let d = decompose(5, &factorization(5), &cfg).unwrap();
        assert_eq!(
            d.certificate.factors,
            vec![GoldFactor::new(FactorKind::Quadratic(1), 15u32)]
        );
        assert!(d.certificate.verified);

        let d = decompose(7, &factorization(7), &cfg).unwrap();
        assert_eq!(
            d.certificate.factors,
            vec![GoldFactor::new(FactorKind::Quadratic(1), 63u32)]
        );
        let from5 = DecomposeConfig { min_a: 5, ..Default::default() };
        let d = decompose(7, &factorization(7), &from5).unwrap();
        assert_eq!(
            d.certificate.factors,
            vec![GoldFactor::new(FactorKind::Quadratic(5), 63u32)]
        );
        // 33^63 ≡ 126 (mod 127)
        assert_eq!(modpow(&b(33), &b(63), &b(127)).unwrap(), b(126));

        assert_eq!(decompose(4, &factorization(4), &cfg).unwrap_err(), DecomposeError::BadN(4));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let partial = factor_mersenne(101, None, 10, &mut rng);
        assert_eq!(
            decompose(101, &partial, &cfg).unwrap_err(),
            DecomposeError::IncompleteFactorization(101)
        );
        assert!(matches!(
            decompose(9, &factorization(7), &cfg),
            Err(DecomposeError::WrongFactorization { .. })
        ));
    }

    #[test]
    fn lift_case_n21() {
        let f = factorization(21);
        assert_eq!(f.lift_q, b(7));
        let d = decompose(21, &f, &DecomposeConfig::default()).unwrap();
        assert!(d.certificate.verified);

        // Raising anything ≡ -1 (mod radical) to the Q-th power gives -1 modulo
        // the full 2^21 - 1, including values that are not -1 mod 49.
        let m = f.modulus();
        let mut hit_non_lifted = false;
        for t in 1u32..40 {
            let p = &f.radical * t - 1u32;
            if (&p + 1u32) % 49u32 != b(0) {
                hit_non_lifted = true;
            }
            assert_eq!(modpow(&p, &f.lift_q, &m).unwrap(), &m - 1u32);
        }
        assert!(hit_non_lifted);

        // Here 7 already divides R (the odd part of 127 - 1), so the unlifted
        // exponents happen to verify as well.
        assert_eq!(d.sylow[1].r_odd.clone() % 7u32, b(0));
        let unlifted =
            assemble_exponents(&d.solution, &d.sylow, &b(1), Some(&f.carmichael_lambda()));
        let factors = d
            .selection
            .vectors
            .iter()
            .zip(unlifted)
            .map(|(v, e)| GoldFactor::new(candidate_kind(v.candidate), e))
            .collect();
        assert_eq!(verify(&DecompositionCertificate::new(21, Method::Algorithm1, factors)), Ok(()));
    }

    #[test]
    fn unreduced_multiplicities_verify() {
        let f = factorization(21);
        let cfg = DecomposeConfig { reduce_multiplicities: false, ..Default::default() };
        let d = decompose(21, &f, &cfg).unwrap();
        assert!(d.certificate.verified);
    }

    #[test]
    fn deterministic_per_seed_and_parity_consistent() {
        let table = FactorTable::bundled();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let f = factor_mersenne(63, Some(&table), DEFAULT_RHO_BUDGET, &mut rng);
        for seed in [0u64, 1, 99] {
            let cfg = DecomposeConfig { seed, ..Default::default() };
            let a = decompose(63, &f, &cfg).unwrap();
            let seq = DecomposeConfig { exec: Execution::Sequential, ..cfg.clone() };
            let b = decompose(63, &f, &seq).unwrap();
            assert_eq!(a, b);
            let rows: Vec<Vec<bool>> = a.selection.vectors.iter().map(|v| v.bits.clone()).collect();
            assert_eq!(a.matrix.parity_rows(), rows);
        }
    }

    #[test]
    fn any_basis_policy() {
        let cfg = DecomposeConfig { policy: SelectionPolicy::AnyBasis, ..Default::default() };
        for n in [9u64, 11, 21, 23, 35] {
            let d = decompose(n, &factorization(n), &cfg).unwrap();
            assert!(d.certificate.verified);
            assert!(!d.selection.fallback_used);
        }
    }
}
