//! Modular arithmetic primitives over arbitrary-precision naturals.
//!
//! Everything here is a pure function of its arguments; the two randomized
//! routines ([`sylow2_generator`] and the Lucas parameter search inside
//! [`is_prime`], which is deterministic anyway) take their randomness
//! explicitly.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArithError {
    #[error("2-valuation of zero is undefined")]
    ZeroValuation,
    #[error("modulus must be at least 2, got {0}")]
    ModulusTooSmall(BigUint),
    #[error("Jacobi symbol needs an odd positive modulus, got {0}")]
    EvenModulus(BigUint),
    #[error("gcd({a}, {n}) = {gcd} > 1, signed-remainder chain does not reach 1")]
    NonCoprime { a: u64, n: u64, gcd: u64 },
    #[error("invalid chain arguments a = {a}, n = {n}: need odd 1 <= a < n, n >= 3")]
    BadChainArgs { a: u64, n: u64 },
    #[error("{x} is not a unit modulo {q}")]
    NotUnit { x: BigUint, q: BigUint },
    #[error("bad 2-Sylow parameters for q = {q}: {reason}")]
    BadSylowParams { q: BigUint, reason: &'static str },
    #[error("no 2-Sylow generator found for q = {0} after {1} trials (q not prime?)")]
    GeneratorNotFound(BigUint, u32),
}

/// Largest `e` with `2^e | m`.
pub fn nu2(m: &BigUint) -> Result<u64, ArithError> {
    m.trailing_zeros().ok_or(ArithError::ZeroValuation)
}

/// Same as [`nu2`] for machine integers.
pub fn nu2_u64(m: u64) -> Result<u64, ArithError> {
    if m == 0 {
        return Err(ArithError::ZeroValuation);
    }
    Ok(m.trailing_zeros() as u64)
}

/// Odd part of a positive integer.
pub fn odd_part(m: &BigUint) -> Result<BigUint, ArithError> {
    let e = nu2(m)?;
    Ok(m >> e)
}

/// `base^exp mod modulus`, with `exp = 0` giving `1 mod modulus`.
pub fn modpow(base: &BigUint, exp: &BigUint, modulus: &BigUint) -> Result<BigUint, ArithError> {
    if *modulus < BigUint::from(2u32) {
        return Err(ArithError::ModulusTooSmall(modulus.clone()));
    }
    Ok(base.modpow(exp, modulus))
}

/// `2^n - 1`.
pub fn mersenne(n: u64) -> BigUint {
    (BigUint::one() << n) - 1u32
}

/// Jacobi symbol `(a / m)` for odd `m >= 1`, returned as -1, 0 or +1.
///
/// Binary algorithm: strip factors of two using `(2/m)`, then flip with
/// quadratic reciprocity. Works on full-size integers.
pub fn jacobi(a: &BigInt, m: &BigUint) -> Result<i8, ArithError> {
    if m.is_even() || m.is_zero() {
        return Err(ArithError::EvenModulus(m.clone()));
    }
    let mut n = m.clone();
    // reduce a into [0, m)
    let mut a = {
        let mb = BigInt::from_biguint(Sign::Plus, m.clone());
        a.mod_floor(&mb).to_biguint().expect("mod_floor is non-negative")
    };
    let mut t = 1i8;
    while !a.is_zero() {
        let z = a.trailing_zeros().unwrap_or(0);
        if z > 0 {
            a >>= z;
            let r8 = low_u64(&n) & 7;
            if z % 2 == 1 && (r8 == 3 || r8 == 5) {
                t = -t;
            }
        }
        std::mem::swap(&mut a, &mut n);
        if low_u64(&a) & 3 == 3 && low_u64(&n) & 3 == 3 {
            t = -t;
        }
        a %= &n;
    }
    Ok(if n.is_one() { t } else { 0 })
}

/// Jacobi symbol with an unsigned numerator.
pub fn jacobi_u(a: &BigUint, m: &BigUint) -> Result<i8, ArithError> {
    jacobi(&BigInt::from_biguint(Sign::Plus, a.clone()), m)
}

fn low_u64(x: &BigUint) -> u64 {
    x.iter_u64_digits().next().unwrap_or(0)
}

/// One step `prev = (2k) * cur + sign * rem` of the even-quotient Euclidean
/// algorithm with signed odd remainders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainStep {
    pub half_quotient: u64,
    pub sign: i8,
    pub remainder: u64,
}

/// The full signed-remainder chain for a pair `(a, n)`, starting with
/// `n = (2k_1) a + e_1 r_1` and ending at remainder 1.
///
/// When `a = 1` the chain is empty (length 0): the starting value is already 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedRemainderChain {
    pub n: u64,
    pub a: u64,
    pub steps: Vec<ChainStep>,
}

impl SignedRemainderChain {
    /// Number of steps, `ℓ`.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// The symbol value `(-1)^(ℓ+1)`.
    pub fn symbol(&self) -> i8 {
        if self.len() % 2 == 0 {
            -1
        } else {
            1
        }
    }

    /// Replays the recorded steps and checks every identity and ordering
    /// constraint. Returns false on any inconsistency.
    pub fn is_consistent(&self) -> bool {
        let (mut prev, mut cur) = (self.n as i128, self.a as i128);
        for step in &self.steps {
            let r = step.remainder as i128;
            if step.half_quotient == 0 || r % 2 == 0 || r >= cur || r < 1 {
                return false;
            }
            if prev != 2 * step.half_quotient as i128 * cur + step.sign as i128 * r {
                return false;
            }
            prev = cur;
            cur = r;
        }
        cur == 1
    }

    /// Renders the chain as `n=2k·a±r; ...`.
    pub fn render(&self) -> String {
        let (mut prev, mut cur) = (self.n, self.a);
        let mut parts = Vec::with_capacity(self.steps.len());
        for s in &self.steps {
            let op = if s.sign > 0 { '+' } else { '-' };
            parts.push(format!(
                "{prev} = {}*{cur} {op} {}",
                2 * s.half_quotient,
                s.remainder
            ));
            prev = cur;
            cur = s.remainder;
        }
        parts.join("; ")
    }
}

/// `((2^a + 1) / (2^n - 1))` via the signed-remainder chain, never touching
/// the large integers.
///
/// Needs odd `1 <= a < n` with `n >= 3` odd and `gcd(a, n) = 1`; on a common
/// factor it returns [`ArithError::NonCoprime`] and the caller should fall back
/// to [`jacobi`] on the full integers.
pub fn rotkiewicz_symbol(a: u64, n: u64) -> Result<(i8, SignedRemainderChain), ArithError> {
    if a % 2 == 0 || n % 2 == 0 || n < 3 || a == 0 || a >= n {
        return Err(ArithError::BadChainArgs { a, n });
    }
    let g = a.gcd(&n);
    if g > 1 {
        return Err(ArithError::NonCoprime { a, n, gcd: g });
    }
    let mut steps = Vec::new();
    let (mut prev, mut cur) = (n, a);
    while cur != 1 {
        // nearest even multiple of cur; the leftover is odd since prev is odd
        let k = (prev + cur) / (2 * cur);
        let base = 2 * k * cur;
        let (sign, rem) = if base <= prev {
            (1i8, prev - base)
        } else {
            (-1i8, base - prev)
        };
        debug_assert!(k >= 1 && rem % 2 == 1 && rem < cur);
        steps.push(ChainStep {
            half_quotient: k,
            sign,
            remainder: rem,
        });
        prev = cur;
        cur = rem;
    }
    let chain = SignedRemainderChain { n, a, steps };
    Ok((chain.symbol(), chain))
}

const SMALL_PRIMES: [u32; 25] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
];

/// Primality test.
///
/// Deterministic below 2^64 (Miller-Rabin with the first twelve prime bases).
/// Above that it is the Baillie-PSW test: strong base-2 Miller-Rabin plus a
/// strong Lucas test with Selfridge parameters. No BPSW pseudoprime is known,
/// but the result is formally probabilistic there.
pub fn is_prime(m: &BigUint) -> bool {
    if let Some(v) = m.to_u64() {
        if v < 2 {
            return false;
        }
        for &p in &SMALL_PRIMES {
            if v == p as u64 {
                return true;
            }
            if v % p as u64 == 0 {
                return false;
            }
        }
        return [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37]
            .iter()
            .all(|&b| strong_probable_prime(m, &BigUint::from(b)));
    }
    for &p in &SMALL_PRIMES {
        if (m % p).is_zero() {
            return false;
        }
    }
    strong_probable_prime(m, &BigUint::from(2u32)) && strong_lucas_probable_prime(m)
}

fn strong_probable_prime(m: &BigUint, base: &BigUint) -> bool {
    let m1 = m - 1u32;
    let s = m1.trailing_zeros().unwrap_or(0);
    let d = &m1 >> s;
    let mut x = base.modpow(&d, m);
    if x.is_one() || x == m1 {
        return true;
    }
    for _ in 1..s {
        x = &x * &x % m;
        if x == m1 {
            return true;
        }
        if x.is_one() {
            return false;
        }
    }
    false
}

fn is_perfect_square(m: &BigUint) -> bool {
    let r = m.sqrt();
    &r * &r == *m
}

/// Strong Lucas probable-prime test, Selfridge method A parameters
/// (`D` the first of 5, -7, 9, -11, ... with `(D/m) = -1`, `P = 1`, `Q = (1-D)/4`).
fn strong_lucas_probable_prime(m: &BigUint) -> bool {
    if is_perfect_square(m) {
        return false;
    }
    let mb = BigInt::from(m.clone());
    let mut d = BigInt::from(5);
    loop {
        match jacobi(&d, m).expect("odd modulus") {
            -1 => break,
            0 => {
                // d shares a factor with m; prime only if m == |d|
                return d.magnitude() == m;
            }
            _ => {}
        }
        d = if d.sign() == Sign::Plus { -(d + 2u32) } else { -(d - 2u32) };
    }
    let q = (BigInt::one() - &d) / 4;
    let to_res = |x: &BigInt| x.mod_floor(&mb).to_biguint().expect("non-negative");
    let d_res = to_res(&d);
    let q_res = to_res(&q);
    let inv2 = (m + 1u32) >> 1;

    // m + 1 = d_odd * 2^s
    let m1 = m + 1u32;
    let s = m1.trailing_zeros().unwrap_or(0);
    let d_odd = &m1 >> s;

    // binary ladder for U_k, V_k, Q^k with P = 1
    let mut u = BigUint::zero();
    let mut v = BigUint::from(2u32) % m;
    let mut qk = BigUint::one();
    let bits = d_odd.bits();
    for i in (0..bits).rev() {
        // double
        u = &u * &v % m;
        v = (&v * &v + m * 2u32 - (&qk << 1u32) % m) % m;
        qk = &qk * &qk % m;
        if d_odd.bit(i) {
            // k -> k+1 with P = 1
            let nu = (&u + &v) * &inv2 % m;
            let nv = (&d_res * &u + &v) * &inv2 % m;
            u = nu;
            v = nv;
            qk = &qk * &q_res % m;
        }
    }
    if u.is_zero() || v.is_zero() {
        return true;
    }
    for _ in 1..s {
        v = (&v * &v + m * 2u32 - (&qk << 1u32) % m) % m;
        if v.is_zero() {
            return true;
        }
        qk = &qk * &qk % m;
    }
    false
}

/// Draws a generator of the 2-Sylow subgroup of `(Z/q)^*`, where
/// `q - 1 = 2^alpha * r_odd`.
///
/// Returns `h = g^r_odd` for a random `g` with `h^(2^(alpha-1)) != 1`. Half of
/// all `g` qualify, so the loop is capped at 128 draws.
pub fn sylow2_generator<R: Rng + ?Sized>(
    q: &BigUint,
    alpha: u64,
    r_odd: &BigUint,
    rng: &mut R,
) -> Result<BigUint, ArithError> {
    check_sylow_params(q, alpha, r_odd)?;
    let one = BigUint::one();
    let minus_one = q - 1u32;
    let half_order = BigUint::one() << (alpha - 1);
    // the order-2 element is the only possibility when alpha = 1
    if alpha == 1 {
        return Ok(minus_one);
    }
    const TRIALS: u32 = 128;
    for _ in 0..TRIALS {
        let g = rng_below(q, rng);
        if g < BigUint::from(2u32) {
            continue;
        }
        let h = g.modpow(r_odd, q);
        let t = h.modpow(&half_order, q);
        if t != one {
            return Ok(h);
        }
    }
    Err(ArithError::GeneratorNotFound(q.clone(), TRIALS))
}

fn check_sylow_params(q: &BigUint, alpha: u64, r_odd: &BigUint) -> Result<(), ArithError> {
    let bad = |reason| {
        Err(ArithError::BadSylowParams {
            q: q.clone(),
            reason,
        })
    };
    if q.is_even() || *q < BigUint::from(3u32) {
        return bad("q must be an odd prime");
    }
    if alpha == 0 {
        return bad("alpha must be at least 1");
    }
    if r_odd.is_even() || (r_odd << alpha) != q - 1u32 {
        return bad("q - 1 != 2^alpha * r with r odd");
    }
    Ok(())
}

/// Uniform-ish integer in `[0, bound)` from 64-bit draws.
fn rng_below<R: Rng + ?Sized>(bound: &BigUint, rng: &mut R) -> BigUint {
    let words = (bound.bits() as usize).div_ceil(64) + 1;
    let digits: Vec<u64> = (0..words).map(|_| rng.gen()).collect();
    let mut acc = BigUint::zero();
    for d in digits {
        acc = (acc << 64u32) | BigUint::from(d);
    }
    acc % bound
}

/// Discrete logarithm inside the 2-Sylow subgroup: the `b in [0, 2^alpha)`
/// with `x^r_odd = h^b (mod q)`.
///
/// Bitwise Pohlig-Hellman, one bit per squaring level. The low bit of `b` is
/// zero exactly when `x` is a quadratic residue modulo `q`.
pub fn dlog_2sylow(
    x: &BigUint,
    h: &BigUint,
    q: &BigUint,
    alpha: u64,
    r_odd: &BigUint,
) -> Result<BigUint, ArithError> {
    check_sylow_params(q, alpha, r_odd)?;
    let x = x % q;
    if x.is_zero() {
        return Err(ArithError::NotUnit { x, q: q.clone() });
    }
    let minus_one = q - 1u32;
    let y = x.modpow(r_odd, q);
    // inverse of h is h^(2^alpha - 1)
    let order = BigUint::one() << alpha;
    let h_inv = h.modpow(&(&order - 1u32), q);

    let mut b = BigUint::zero();
    // z = y * h^{-b}, kept up to date as bits of b are fixed
    let mut z = y;
    let mut h_inv_pow = h_inv; // h^{-2^i}
    for i in 0..alpha {
        let e = BigUint::one() << (alpha - 1 - i);
        let t = z.modpow(&e, q);
        if t == minus_one {
            b.set_bit(i, true);
            z = &z * &h_inv_pow % q;
        } else if !t.is_one() {
            return Err(ArithError::BadSylowParams {
                q: q.clone(),
                reason: "element outside the 2-Sylow subgroup (q not prime?)",
            });
        }
        h_inv_pow = &h_inv_pow * &h_inv_pow % q;
    }
    debug_assert!(z.is_one());
    Ok(b)
}
