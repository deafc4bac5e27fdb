//! Certified factorizations of `2^n - 1`.
//!
//! `2^n - 1` is first split into its cyclotomic parts `Φ_d(2)`, `d | n`. A
//! prime factor of `Φ_d(2)` either divides `d` or is `≡ 1 (mod d)` (and
//! `≡ 1 (mod 2d)` for odd `d`), which makes trial division along the
//! progression `2dk + 1` cheap. Whatever survives goes to Pollard-Brent rho
//! with an iteration budget. Known factorizations can be supplied as a
//! [`FactorTable`]; its contents are re-validated on load.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::modarith::{is_prime, mersenne};
use crate::par::{self, Execution};

/// Default Pollard-rho iteration cap per composite.
pub const DEFAULT_RHO_BUDGET: u64 = 1 << 26;

const BUNDLED_TABLE: &str = include_str!("../data/mersenne_factors.txt");

/// Divisors of `n` in ascending order.
pub fn divisors(n: u64) -> Vec<u64> {
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1;
    while d * d <= n {
        if n % d == 0 {
            small.push(d);
            if d * d != n {
                large.push(n / d);
            }
        }
        d += 1;
    }
    small.extend(large.into_iter().rev());
    small
}

/// `[(d, Φ_d(2)) for d | n]`, ascending in `d`. The values multiply to
/// `2^n - 1`.
pub fn cyclotomic_split(n: u64) -> Vec<(u64, BigUint)> {
    assert!(n >= 1, "cyclotomic_split needs n >= 1");
    let divs = divisors(n);
    let mut values: Vec<(u64, BigUint)> = Vec::with_capacity(divs.len());
    for &d in &divs {
        let mut v = mersenne(d);
        for (e, phi) in &values {
            if d % e == 0 {
                v /= phi;
            }
        }
        values.push((d, v));
    }
    values
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: duplicate entry for n = {n}")]
    Duplicate { line: usize, n: u64 },
    #[error("line {line}: validation failed for n = {n}: {reason}")]
    ValidationFailed { line: usize, n: u64, reason: String },
    #[error("reading factor table: {0}")]
    Io(String),
}

/// Known factorizations of `2^n - 1`, keyed by `n`. Every entry lists primes
/// with repetition for multiplicity and has been checked on load.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FactorTable {
    entries: BTreeMap<u64, Vec<BigUint>>,
}

impl FactorTable {
    /// Parses and validates a table in the line format
    /// `n q1 q2 ... qm` (`#` starts a comment).
    pub fn parse(text: &str) -> Result<Self, TableError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let mut fields = content.split_whitespace();
            let n_str = fields.next().expect("non-empty line");
            let n: u64 = n_str.parse().map_err(|_| TableError::Parse {
                line,
                msg: format!("bad exponent {n_str:?}"),
            })?;
            if n < 2 {
                return Err(TableError::Parse {
                    line,
                    msg: format!("exponent must be >= 2, got {n}"),
                });
            }
            let primes = fields
                .map(|f| {
                    f.parse::<BigUint>().map_err(|_| TableError::Parse {
                        line,
                        msg: format!("bad factor {f:?}"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            if primes.is_empty() {
                return Err(TableError::Parse {
                    line,
                    msg: format!("no factors listed for n = {n}"),
                });
            }
            if let Some(q) = primes.iter().find(|q| !is_prime(q)) {
                return Err(TableError::ValidationFailed {
                    line,
                    n,
                    reason: format!("{q} is not prime"),
                });
            }
            let product: BigUint = primes.iter().product();
            if product != mersenne(n) {
                return Err(TableError::ValidationFailed {
                    line,
                    n,
                    reason: format!("product {product} != 2^{n} - 1"),
                });
            }
            if entries.insert(n, primes).is_some() {
                return Err(TableError::Duplicate { line, n });
            }
        }
        Ok(FactorTable { entries })
    }

    pub fn load<R: Read>(mut source: R) -> Result<Self, TableError> {
        let mut text = String::new();
        source
            .read_to_string(&mut text)
            .map_err(|e| TableError::Io(e.to_string()))?;
        Self::parse(&text)
    }

    /// The table shipped with the crate: all odd `n` in `[3, 249]`.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_TABLE).expect("bundled factor table is valid")
    }

    pub fn get(&self, n: u64) -> Option<&[BigUint]> {
        self.entries.get(&n).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn exponents(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.keys().copied()
    }
}

/// Prime-power decomposition of `2^n - 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MersenneFactorization {
    pub n: u64,
    /// `(q, m)` sorted by `q`, every `q` certified by [`is_prime`].
    pub prime_powers: Vec<(BigUint, u32)>,
    /// Cofactors that could not be split within the rho budget.
    pub unfactored: Vec<BigUint>,
    /// Product of the distinct primes (and any unfactored cofactors).
    pub radical: BigUint,
    /// `(2^n - 1) / radical`.
    pub lift_q: BigUint,
    pub complete: bool,
}

impl MersenneFactorization {
    fn from_parts(n: u64, mut primes: Vec<BigUint>, mut unfactored: Vec<BigUint>) -> Self {
        primes.sort();
        let mut prime_powers: Vec<(BigUint, u32)> = Vec::new();
        for q in primes {
            match prime_powers.last_mut() {
                Some((last, m)) if *last == q => *m += 1,
                _ => prime_powers.push((q, 1)),
            }
        }
        unfactored.sort();
        unfactored.dedup();
        let radical: BigUint = prime_powers
            .iter()
            .map(|(q, _)| q)
            .chain(unfactored.iter())
            .product();
        let lift_q = mersenne(n) / &radical;
        MersenneFactorization {
            n,
            complete: unfactored.is_empty(),
            prime_powers,
            unfactored,
            radical,
            lift_q,
        }
    }

    pub fn modulus(&self) -> BigUint {
        mersenne(self.n)
    }

    pub fn primes(&self) -> impl Iterator<Item = &BigUint> {
        self.prime_powers.iter().map(|(q, _)| q)
    }

    /// Number of distinct prime factors.
    pub fn omega(&self) -> usize {
        self.prime_powers.len()
    }

    pub fn is_squarefree(&self) -> bool {
        self.prime_powers.iter().all(|&(_, m)| m == 1)
    }

    /// `Π q^m`, recomputed.
    pub fn product(&self) -> BigUint {
        let mut acc: BigUint = self.unfactored.iter().product();
        for (q, m) in &self.prime_powers {
            acc *= q.pow(*m);
        }
        acc
    }

    /// Carmichael function of `2^n - 1`, `lcm q^(m-1) (q-1)`. Only
    /// meaningful for complete factorizations.
    pub fn carmichael_lambda(&self) -> BigUint {
        self.prime_powers
            .iter()
            .fold(BigUint::one(), |acc, (q, m)| {
                acc.lcm(&(q.pow(m - 1) * (q - 1u32)))
            })
    }
}

impl fmt::Display for MersenneFactorization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self
            .prime_powers
            .iter()
            .map(|(q, m)| if *m == 1 { q.to_string() } else { format!("{q}^{m}") })
            .collect();
        parts.extend(self.unfactored.iter().map(|c| format!("[{c}]")));
        if parts.is_empty() {
            parts.push("1".into());
        }
        write!(f, "{}", parts.join(" * "))
    }
}

/// Factors `2^n - 1`, preferring `table` when it has an entry for `n`.
///
/// An exhausted rho budget leaves `complete = false` with the stubborn
/// cofactor recorded; callers that need the full factorization must check.
pub fn factor_mersenne<R: Rng + ?Sized>(
    n: u64,
    table: Option<&FactorTable>,
    budget: u64,
    rng: &mut R,
) -> MersenneFactorization {
    factor_mersenne_exec(n, table, budget, rng, Execution::default())
}

pub fn factor_mersenne_exec<R: Rng + ?Sized>(
    n: u64,
    table: Option<&FactorTable>,
    budget: u64,
    rng: &mut R,
    exec: Execution,
) -> MersenneFactorization {
    assert!(n >= 2, "factor_mersenne needs n >= 2");
    if let Some(primes) = table.and_then(|t| t.get(n)) {
        return MersenneFactorization::from_parts(n, primes.to_vec(), Vec::new());
    }
    let parts: Vec<(u64, BigUint, u64)> = cyclotomic_split(n)
        .into_iter()
        .map(|(d, v)| (d, v, rng.gen()))
        .collect();
    let results = par::map(exec, &parts, |(d, v, seed)| {
        let mut part_rng = ChaCha8Rng::seed_from_u64(*seed);
        factor_cyclotomic_part(*d, v.clone(), budget, &mut part_rng)
    });
    let mut primes = Vec::new();
    let mut unfactored = Vec::new();
    for (p, u) in results {
        primes.extend(p);
        unfactored.extend(u);
    }
    MersenneFactorization::from_parts(n, primes, unfactored)
}

const SMALL_TRIAL_BOUND: u64 = 1 << 12;
const PROGRESSION_TRIAL_STEPS: u64 = 1 << 18;

/// Factors `Φ_d(2)`; returns (primes with repetition, unsplit composites).
fn factor_cyclotomic_part<R: Rng + ?Sized>(
    d: u64,
    mut v: BigUint,
    budget: u64,
    rng: &mut R,
) -> (Vec<BigUint>, Vec<BigUint>) {
    let mut primes = Vec::new();
    if v.is_one() {
        return (primes, Vec::new());
    }
    let mut strip = |v: &mut BigUint, q: u64| {
        while (&*v % q).is_zero() {
            *v /= q;
            primes.push(BigUint::from(q));
        }
    };
    for q in small_primes(SMALL_TRIAL_BOUND) {
        if v.is_one() {
            break;
        }
        strip(&mut v, q);
    }
    // primitive factors lie on 1 + 2dk (d odd) or 1 + dk
    let step = if d % 2 == 1 { 2 * d } else { d };
    let mut q = 1 + step;
    let mut done = v.is_one() || is_prime(&v);
    for _ in 0..PROGRESSION_TRIAL_STEPS {
        if done {
            break;
        }
        if q > SMALL_TRIAL_BOUND && (d % 2 == 0 || matches!(q % 8, 1 | 7)) && (&v % q).is_zero() {
            strip(&mut v, q);
            done = v.is_one() || is_prime(&v);
        }
        q += step;
    }
    let mut unfactored = Vec::new();
    let mut stack = vec![v];
    while let Some(c) = stack.pop() {
        if c.is_one() {
            continue;
        }
        if is_prime(&c) {
            primes.push(c);
            continue;
        }
        match rho_split(&c, budget, rng) {
            Some(f) => {
                let g = &c / &f;
                stack.push(f);
                stack.push(g);
            }
            None => unfactored.push(c),
        }
    }
    (primes, unfactored)
}

fn small_primes(bound: u64) -> Vec<u64> {
    let bound = bound as usize;
    let mut sieve = vec![true; bound];
    let mut out = Vec::new();
    for i in 2..bound {
        if sieve[i] {
            out.push(i as u64);
            for j in (i * i..bound).step_by(i) {
                sieve[j] = false;
            }
        }
    }
    out
}

/// Finds a nontrivial factor of the composite `n` with Brent's variant of
/// Pollard rho, restarting with a fresh polynomial `x^2 + c` when a cycle
/// closes without a split. Gives up after `budget` total iterations.
pub fn rho_split<R: Rng + ?Sized>(n: &BigUint, budget: u64, rng: &mut R) -> Option<BigUint> {
    if n.is_even() {
        return Some(BigUint::from(2u32));
    }
    if let Some(small) = n.to_u128().filter(|&m| m < 1 << 127) {
        let mut spent = 0u64;
        while spent < budget {
            let c = rng.gen_range(1..small.min(u64::MAX as u128) as u64) as u128 % small;
            let x0 = rng.gen::<u64>() as u128 % small;
            if let Some(f) = brent_u128(small, c, x0, budget, &mut spent) {
                return Some(BigUint::from(f));
            }
        }
        return None;
    }
    let mut spent = 0u64;
    while spent < budget {
        let c = BigUint::from(rng.gen::<u64>()) % n;
        let x0 = BigUint::from(rng.gen::<u64>()) % n;
        if c.is_zero() {
            continue;
        }
        if let Some(f) = brent_big(n, &c, x0, budget, &mut spent) {
            return Some(f);
        }
    }
    None
}

const BATCH: u64 = 128;

fn brent_big(
    n: &BigUint,
    c: &BigUint,
    x0: BigUint,
    budget: u64,
    spent: &mut u64,
) -> Option<BigUint> {
    let f = |x: &BigUint| (x * x + c) % n;
    let diff = |a: &BigUint, b: &BigUint| if a > b { a - b } else { b - a };
    let mut y = x0;
    let mut r = 1u64;
    let mut q = BigUint::one();
    let mut g = BigUint::one();
    let mut x = y.clone();
    let mut ys = y.clone();
    while g.is_one() {
        x = y.clone();
        for _ in 0..r {
            y = f(&y);
        }
        *spent += r;
        let mut k = 0;
        while k < r && g.is_one() {
            ys = y.clone();
            let m = BATCH.min(r - k);
            for _ in 0..m {
                y = f(&y);
                q = q * diff(&x, &y) % n;
            }
            *spent += m;
            g = q.gcd(n);
            k += m;
        }
        r *= 2;
        if *spent >= budget && g.is_one() {
            return None;
        }
    }
    if &g == n {
        loop {
            ys = f(&ys);
            *spent += 1;
            g = diff(&x, &ys).gcd(n);
            if !g.is_one() {
                break;
            }
        }
    }
    (&g != n).then_some(g)
}

/// Montgomery arithmetic modulo an odd `n < 2^127` with `R = 2^128`.
#[derive(Debug, Clone, Copy)]
struct Mont {
    n: u128,
    /// `-n^{-1} mod 2^128`
    n_neg_inv: u128,
}

fn mul_wide(a: u128, b: u128) -> (u128, u128) {
    const LO: u128 = u64::MAX as u128;
    let (a0, a1) = (a & LO, a >> 64);
    let (b0, b1) = (b & LO, b >> 64);
    let p00 = a0 * b0;
    let p01 = a0 * b1;
    let p10 = a1 * b0;
    let p11 = a1 * b1;
    let mid = (p00 >> 64) + (p01 & LO) + (p10 & LO);
    let lo = (p00 & LO) | (mid << 64);
    let hi = p11 + (p01 >> 64) + (p10 >> 64) + (mid >> 64);
    (hi, lo)
}

impl Mont {
    fn new(n: u128) -> Self {
        debug_assert!(n % 2 == 1 && n < 1 << 127);
        // Newton: each step doubles the number of correct low bits
        let mut inv = n;
        for _ in 0..7 {
            inv = inv.wrapping_mul(2u128.wrapping_sub(n.wrapping_mul(inv)));
        }
        Mont { n, n_neg_inv: inv.wrapping_neg() }
    }

    /// `a b R^{-1} mod n` for `a, b < n`.
    fn mul(&self, a: u128, b: u128) -> u128 {
        let (hi, lo) = mul_wide(a, b);
        let m = lo.wrapping_mul(self.n_neg_inv);
        let (mh, ml) = mul_wide(m, self.n);
        let carry = u128::from(lo.overflowing_add(ml).1);
        let t = hi + mh + carry;
        if t >= self.n {
            t - self.n
        } else {
            t
        }
    }

    fn add(&self, a: u128, b: u128) -> u128 {
        let s = a + b;
        if s >= self.n {
            s - self.n
        } else {
            s
        }
    }
}

fn gcd_u128(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

// Everything stays in Montgomery form: the iteration is x -> x^2 R^{-1} + c,
// still a quadratic map, and the extra factors of R are units so the gcds
// are unchanged.
fn brent_u128(n: u128, c: u128, x0: u128, budget: u64, spent: &mut u64) -> Option<u128> {
    let mont = Mont::new(n);
    let f = |x: u128| mont.add(mont.mul(x, x), c);
    let mut y = x0;
    let mut r = 1u64;
    let mut q = 1u128;
    let mut g = 1u128;
    let mut x = y;
    let mut ys = y;
    while g == 1 {
        x = y;
        for _ in 0..r {
            y = f(y);
        }
        *spent += r;
        let mut k = 0;
        while k < r && g == 1 {
            ys = y;
            let m = BATCH.min(r - k);
            for _ in 0..m {
                y = f(y);
                q = mont.mul(q, x.abs_diff(y));
            }
            *spent += m;
            g = gcd_u128(q, n);
            k += m;
        }
        r *= 2;
        if *spent >= budget && g == 1 {
            return None;
        }
    }
    if g == n {
        loop {
            ys = f(ys);
            *spent += 1;
            g = gcd_u128(x.abs_diff(ys), n);
            if g != 1 {
                break;
            }
        }
    }
    (g != n).then_some(g)
}

/// Outcome of the divisor congruence checks for one prime factor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DivisorCheck {
    pub q: BigUint,
    /// `q ≡ 1 (mod n)`; `None` when `n` is composite.
    pub mod_n: Option<bool>,
    /// `q ≡ ±1 (mod 8)`; `None` when `n` is even.
    pub mod_8: Option<bool>,
}

impl DivisorCheck {
    pub fn passed(&self) -> bool {
        self.mod_n != Some(false) && self.mod_8 != Some(false)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DivisorReport {
    pub n: u64,
    pub n_is_prime: bool,
    pub checks: Vec<DivisorCheck>,
    pub notes: Vec<String>,
}

impl DivisorReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(DivisorCheck::passed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FactorError {
    #[error("factorization of 2^{0} - 1 is incomplete")]
    Incomplete(u64),
}

/// For prime `n`, every prime `q | 2^n - 1` has `q ≡ 1 (mod n)`; for odd `n`,
/// 2 is a square modulo `q`, so `q ≡ ±1 (mod 8)`.
pub fn check_divisor_congruences(f: &MersenneFactorization) -> Result<DivisorReport, FactorError> {
    if !f.complete {
        return Err(FactorError::Incomplete(f.n));
    }
    let n_is_prime = is_prime(&BigUint::from(f.n));
    let odd = f.n % 2 == 1;
    let mut notes = Vec::new();
    if !n_is_prime {
        notes.push("composite n: mod-n check skipped".to_string());
    }
    if !odd {
        notes.push("even n: mod-8 check skipped".to_string());
    }
    let checks = f
        .primes()
        .map(|q| DivisorCheck {
            q: q.clone(),
            mod_n: n_is_prime.then(|| (q % f.n).is_one()),
            mod_8: odd.then(|| matches!((q % 8u32).to_u32(), Some(1 | 7))),
        })
        .collect();
    Ok(DivisorReport {
        n: f.n,
        n_is_prime,
        checks,
        notes,
    })
}

/// Distinct-prime count against `1.36 ln n`, plus squarefreeness.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaReport {
    pub n: u64,
    pub omega: usize,
    pub bound: f64,
    pub within: bool,
    pub squarefree: bool,
}

pub fn omega_report(f: &MersenneFactorization) -> Result<OmegaReport, FactorError> {
    if !f.complete {
        return Err(FactorError::Incomplete(f.n));
    }
    let omega = f.omega();
    let bound = 1.36 * (f.n as f64).ln();
    Ok(OmegaReport {
        n: f.n,
        omega,
        bound,
        within: (omega as f64) < bound,
        squarefree: f.is_squarefree(),
    })
}
