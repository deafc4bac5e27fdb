//! Closed-form decompositions for "good" `n`.
//!
//! Write `m` for the odd part of `n - 1` and `ν = ν₂(n - 1)`. If
//! `m ≡ 2^k 3^s (mod 2^n - 1)` then
//!
//! ```text
//! 2^n - 2 ≡ 2 · Π_{j<k} (2^(2^j) + 1)
//!             · Π_{j<s} (2^(2^(k+1) 3^j) + 2^(2^k 3^j) + 1)
//!             · Π_{1<=j<=ν} (2^((n-1)/2^j) + 1)
//! ```
//!
//! which is a composition of one Frobenius map with `k + s + ν` quadratic
//! and cubic power maps.
//!
//! The `k` search is complete (2 has order `n` modulo `2^n - 1`), but `s` is
//! bounded, so a miss means "not good within the bound" and nothing more.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::certify::{DecompositionCertificate, FactorKind, GoldFactor, Method};
use crate::modarith::{mersenne, modpow, nu2_u64};
use crate::par::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GoodWitness {
    pub n: u64,
    pub k: u64,
    pub s: u64,
    /// `ν₂(n - 1)`
    pub nu: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GoodError {
    #[error("n must be odd and at least 3, got {0}")]
    BadN(u64),
    #[error("n = {n} is not good within s <= {s_max} (not a proof that it is superbad)")]
    NotFoundWithinBound { n: u64, s_max: u64 },
}

/// Default bound on `s`.
pub fn default_s_max(n: u64) -> u64 {
    4 * n
}

impl GoodWitness {
    /// `(n - 1) / 2^ν`.
    pub fn odd_part(&self) -> u64 {
        (self.n - 1) >> self.nu
    }

    /// Rechecks `2^k 3^s ≡ (n-1)/2^ν (mod 2^n - 1)` with [`modpow`].
    pub fn is_valid(&self) -> bool {
        if self.n < 3 || self.n % 2 == 0 || nu2_u64(self.n - 1) != Ok(self.nu) {
            return false;
        }
        let m = mersenne(self.n);
        let lhs = modpow(&BigUint::from(2u32), &BigUint::from(self.k), &m).expect("m >= 7")
            * modpow(&BigUint::from(3u32), &BigUint::from(self.s), &m).expect("m >= 7")
            % &m;
        lhs == BigUint::from(self.odd_part()) % &m
    }

    /// Number of non-affine maps, `k + s + ν`.
    pub fn length(&self) -> u64 {
        self.k + self.s + self.nu
    }
}

/// Smallest `(s, k)` with `2^k 3^s ≡ odd part of n-1 (mod 2^n - 1)`,
/// `k < n`, `s <= s_max`. Works for any `n >= 2`.
fn find_witness(n: u64, s_max: u64) -> Option<(u64, u64)> {
    debug_assert!(n >= 2);
    let m = mersenne(n);
    let target = BigUint::from((n - 1) >> (n - 1).trailing_zeros()) % &m;
    // 3^s ≡ target · 2^{-k}; multiplying by 2^{-1} rotates the n-bit word right
    let mut rotations: HashMap<BigUint, u64> = HashMap::with_capacity(n as usize);
    let mut r = target;
    for k in 0..n {
        rotations.entry(r.clone()).or_insert(k);
        let low = r.bit(0);
        r >>= 1u32;
        if low {
            r.set_bit(n - 1, true);
        }
    }
    let mut pow3 = BigUint::one() % &m;
    for s in 0..=s_max {
        if let Some(&k) = rotations.get(&pow3) {
            return Some((k, s));
        }
        pow3 = pow3 * 3u32 % &m;
        if pow3.is_zero() {
            break;
        }
    }
    None
}

/// Finds a witness for odd `n >= 3`, minimizing `s` first and then `k`.
pub fn good_witness(n: u64, s_max: u64) -> Result<GoodWitness, GoodError> {
    if n < 3 || n % 2 == 0 {
        return Err(GoodError::BadN(n));
    }
    let nu = nu2_u64(n - 1).expect("n - 1 > 0");
    find_witness(n, s_max)
        .map(|(k, s)| GoodWitness { n, k, s, nu })
        .ok_or(GoodError::NotFoundWithinBound { n, s_max })
}

/// Reduces a power-of-two exponent modulo `n` into `[1, n]` (`2^n ≡ 1`).
fn reduce_exp(e: BigUint, n: u64) -> u64 {
    let r = u64::try_from(e % n).expect("residue below n");
    if r == 0 {
        n
    } else {
        r
    }
}

/// The explicit factor list for a witness: one Frobenius square, `k`
/// Fermat-type quadratics, `s` cubics and `ν` quadratics. Parameters are
/// reduced modulo `n`, which leaves every exponent unchanged modulo `2^n - 1`.
pub fn theorem1_decomposition(w: &GoodWitness) -> DecompositionCertificate {
    let n = w.n;
    let nb = BigUint::from(n);
    let pow_mod_n = |base: u32, e: u64| {
        modpow(&BigUint::from(base), &BigUint::from(e), &nb).expect("n >= 3")
    };
    let mut factors = vec![GoldFactor::new(FactorKind::Frobenius(1), 1u32)];
    for j in 0..w.k {
        factors.push(GoldFactor::new(
            FactorKind::Quadratic(reduce_exp(pow_mod_n(2, j), n)),
            1u32,
        ));
    }
    let two_k = pow_mod_n(2, w.k);
    for j in 0..w.s {
        let low = &two_k * pow_mod_n(3, j);
        let high = &low * 2u32;
        factors.push(GoldFactor::new(
            FactorKind::Cubic(reduce_exp(high, n), reduce_exp(low, n)),
            1u32,
        ));
    }
    for j in 1..=w.nu {
        factors.push(GoldFactor::new(
            FactorKind::Quadratic(reduce_exp(BigUint::from((n - 1) >> j), n)),
            1u32,
        ));
    }
    DecompositionCertificate::new(n, Method::Theorem1, factors)
}

/// Whether `n` (any `n >= 1`) has the `2^k 3^s` property within
/// `s <= s_max(n)`. `n = 1` counts by convention.
pub fn is_good(n: u64, s_max: u64) -> bool {
    match n {
        0 => false,
        1 => true,
        _ => find_witness(n, s_max).is_some(),
    }
}

/// All `n <= x_max` with the property, ascending. `s_max` defaults to
/// [`default_s_max`] per `n`.
pub fn scan_good(x_max: u64, s_max: Option<u64>) -> Vec<u64> {
    scan_good_exec(x_max, s_max, Execution::default())
}

pub fn scan_good_exec(x_max: u64, s_max: Option<u64>, exec: Execution) -> Vec<u64> {
    let ns: Vec<u64> = (1..=x_max).collect();
    let hits = par::map(exec, &ns, |&n| {
        is_good(n, s_max.unwrap_or_else(|| default_s_max(n)))
    });
    ns.into_iter()
        .zip(hits)
        .filter_map(|(n, good)| good.then_some(n))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::verify;

    #[test]
    fn witness_examples() {
        assert_eq!(good_witness(3, 12), Ok(GoodWitness { n: 3, k: 0, s: 0, nu: 1 }));
        assert_eq!(good_witness(13, 52), Ok(GoodWitness { n: 13, k: 0, s: 1, nu: 2 }));
        let w = good_witness(37, 148).unwrap();
        assert_eq!(w, GoodWitness { n: 37, k: 0, s: 2, nu: 2 });
        assert_eq!(w.odd_part(), 9);
        assert!(w.is_valid());
        assert_eq!(good_witness(4, 10), Err(GoodError::BadN(4)));
        assert_eq!(good_witness(1, 10), Err(GoodError::BadN(1)));
        assert_eq!(
            good_witness(11, 44),
            Err(GoodError::NotFoundWithinBound { n: 11, s_max: 44 })
        );
    }

    #[test]
    fn invalid_witness_detected() {
        assert!(!GoodWitness { n: 13, k: 1, s: 1, nu: 2 }.is_valid());
        assert!(!GoodWitness { n: 13, k: 0, s: 1, nu: 1 }.is_valid());
    }

    fn exponents(c: &DecompositionCertificate) -> Vec<u64> {
        c.factors
            .iter()
            .map(|f| u64::try_from(f.exponent_value()).unwrap())
            .collect()
    }

    #[test]
    fn decomposition_examples() {
        let c = theorem1_decomposition(&good_witness(7, 28).unwrap());
        assert_eq!(exponents(&c), vec![2, 7, 9]);
        assert!(c.verified);

        let w = good_witness(13, 52).unwrap();
        let c = theorem1_decomposition(&w);
        assert_eq!(exponents(&c), vec![2, 7, 65, 9]);
        assert_eq!(2 * 7 * 65 * 9, (1 << 13) - 2);
        assert_eq!(c.length(), BigUint::from(3u32));
        assert_eq!(w.length(), 3);
        assert!(c.verified);

        let c = theorem1_decomposition(&good_witness(3, 12).unwrap());
        assert_eq!(exponents(&c), vec![2, 3]);
        assert!(c.verified);
    }

    #[test]
    fn fermat_quadratics_for_positive_k() {
        // The product identity only needs the congruence modulo n. For n = 11
        // the odd part 5 ≡ 2^4 (mod 11) although 5 is no 2^k 3^s modulo 2047.
        let w = GoodWitness { n: 11, k: 4, s: 0, nu: 1 };
        assert!(!w.is_valid());
        let c = theorem1_decomposition(&w);
        assert_eq!(exponents(&c), vec![2, 3, 5, 17, 257, 33]);
        assert!(c.verified);
        assert_eq!(c.length(), BigUint::from(5u32));
    }

    #[test]
    fn all_witnesses_to_101_verify() {
        for n in (3..=101).step_by(2) {
            if let Ok(w) = good_witness(n, default_s_max(n)) {
                assert!(w.is_valid());
                let c = theorem1_decomposition(&w);
                assert_eq!(verify(&c), Ok(()), "n={n}");
                assert_eq!(c.length(), BigUint::from(w.length()));
                if w.odd_part().is_power_of_two() {
                    assert_eq!(w.s, 0);
                    assert!(!c.uses_cubics());
                }
            }
        }
    }

    #[test]
    fn scan_examples() {
        assert_eq!(
            scan_good(50, None),
            vec![1, 2, 3, 4, 5, 7, 9, 10, 13, 17, 19, 25, 28, 33, 37, 49]
        );
        assert_eq!(scan_good(3, None), vec![1, 2, 3]);
        let good = scan_good(50, None);
        for n in [11u64, 15, 21] {
            assert!(!good.contains(&n));
        }
        assert_eq!(
            scan_good_exec(120, None, Execution::Sequential),
            scan_good_exec(120, None, Execution::Parallel)
        );
    }
}
