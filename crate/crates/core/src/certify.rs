//! Decomposition certificates and their independent verification.
//!
//! A certificate for `n` is a list of power-map exponents with multiplicities.
//! It is valid when the product of `exponent^multiplicity` is `2^n - 2`, i.e.
//! `-1`, modulo `2^n - 1`. [`verify`] recomputes that product from the factor
//! list alone using [`crate::modarith`]; it never looks at how the
//! certificate was built.
//!
//! On disk a certificate is a JSON object, see `docs/certificate-format.md`.

use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::modarith::{mersenne, modpow};

/// Largest accepted exponent parameter in a certificate.
pub const MAX_PARAM: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FactorKind {
    /// `x -> x^(2^t)`, linear over GF(2).
    Frobenius(u64),
    /// `x -> x^(2^a + 1)`.
    Quadratic(u64),
    /// `x -> x^(2^a + 2^b + 1)` with `a != b`.
    Cubic(u64, u64),
}

impl FactorKind {
    pub fn tag(&self) -> &'static str {
        match self {
            FactorKind::Frobenius(_) => "frobenius",
            FactorKind::Quadratic(_) => "quadratic",
            FactorKind::Cubic(..) => "cubic",
        }
    }

    pub fn params(&self) -> Vec<u64> {
        match *self {
            FactorKind::Frobenius(t) => vec![t],
            FactorKind::Quadratic(a) => vec![a],
            FactorKind::Cubic(a, b) => vec![a, b],
        }
    }

    /// The exponent as an integer.
    pub fn exponent_value(&self) -> BigUint {
        let p = |e: u64| BigUint::one() << e;
        match *self {
            FactorKind::Frobenius(t) => p(t),
            FactorKind::Quadratic(a) => p(a) + 1u32,
            FactorKind::Cubic(a, b) => p(a) + p(b) + 1u32,
        }
    }

    /// The exponent reduced modulo `modulus`, computed without building the
    /// full integer.
    pub fn exponent_residue(&self, modulus: &BigUint) -> BigUint {
        let two = BigUint::from(2u32);
        let p = |e: u64| modpow(&two, &BigUint::from(e), modulus).expect("modulus >= 2");
        match *self {
            FactorKind::Frobenius(t) => p(t),
            FactorKind::Quadratic(a) => (p(a) + 1u32) % modulus,
            FactorKind::Cubic(a, b) => (p(a) + p(b) + 1u32) % modulus,
        }
    }

    /// Whether the map is affine (contributes nothing to the length).
    pub fn is_affine(&self) -> bool {
        matches!(self, FactorKind::Frobenius(_))
    }

    fn validate(&self) -> Result<(), CertError> {
        let params = self.params();
        if let Some(&p) = params.iter().find(|&&p| p > MAX_PARAM) {
            return Err(CertError::Malformed(format!(
                "{} parameter {p} exceeds {MAX_PARAM}",
                self.tag()
            )));
        }
        match *self {
            FactorKind::Quadratic(0) => Err(CertError::Malformed(
                "quadratic parameter must be >= 1".into(),
            )),
            FactorKind::Cubic(a, b) if a == b || a == 0 || b == 0 => Err(CertError::Malformed(
                format!("cubic parameters ({a}, {b}) must be distinct and positive"),
            )),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for FactorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FactorKind::Frobenius(t) => write!(f, "2^{t}"),
            FactorKind::Quadratic(a) => write!(f, "2^{a}+1"),
            FactorKind::Cubic(a, b) => write!(f, "2^{a}+2^{b}+1"),
        }
    }
}

/// One power map in a decomposition, applied `multiplicity` times.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldFactor {
    pub kind: FactorKind,
    pub multiplicity: BigUint,
}

impl GoldFactor {
    pub fn new(kind: FactorKind, multiplicity: impl Into<BigUint>) -> Self {
        GoldFactor {
            kind,
            multiplicity: multiplicity.into(),
        }
    }

    pub fn exponent_value(&self) -> BigUint {
        self.kind.exponent_value()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Theorem1,
    Algorithm1,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Theorem1 => "theorem1",
            Method::Algorithm1 => "algorithm1",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecompositionCertificate {
    pub n: u64,
    pub method: Method,
    pub factors: Vec<GoldFactor>,
    /// Advisory; set from [`verify`] whenever a certificate is built or loaded.
    pub verified: bool,
}

impl DecompositionCertificate {
    /// Builds a certificate and runs [`verify`] on it to set `verified`.
    pub fn new(n: u64, method: Method, factors: Vec<GoldFactor>) -> Self {
        let mut cert = DecompositionCertificate {
            n,
            method,
            factors,
            verified: false,
        };
        cert.verified = verify(&cert).is_ok();
        cert
    }

    /// Number of non-affine maps in the composition, counted per listed factor
    /// with multiplicity.
    pub fn length(&self) -> BigUint {
        self.factors
            .iter()
            .filter(|f| !f.kind.is_affine())
            .map(|f| f.multiplicity.clone())
            .sum()
    }

    pub fn uses_cubics(&self) -> bool {
        self.factors
            .iter()
            .any(|f| matches!(f.kind, FactorKind::Cubic(..)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CertError {
    #[error("n must be at least 3, got {0}")]
    BadN(u64),
    #[error("malformed factor: {0}")]
    Malformed(String),
    #[error("product is {residue} modulo 2^{n} - 1, expected {expected}")]
    WrongResidue {
        n: u64,
        residue: BigUint,
        expected: BigUint,
    },
    #[error("factor {exponent} shares a factor with 2^{n} - 1")]
    NotUnit { n: u64, exponent: String },
    #[error("certificate parse error at line {line}, column {column}: {msg}")]
    Parse {
        line: usize,
        column: usize,
        msg: String,
    },
}

/// Recomputes `Π exponent^multiplicity mod 2^n - 1` and compares it with
/// `2^n - 2`. The error carries the residue actually obtained.
pub fn verify(cert: &DecompositionCertificate) -> Result<(), CertError> {
    if cert.n < 3 {
        return Err(CertError::BadN(cert.n));
    }
    for f in &cert.factors {
        f.kind.validate()?;
    }
    let modulus = mersenne(cert.n);
    let mut acc = BigUint::one();
    for f in &cert.factors {
        let base = f.kind.exponent_residue(&modulus);
        if !f.multiplicity.is_zero() && !base.gcd(&modulus).is_one() {
            return Err(CertError::NotUnit {
                n: cert.n,
                exponent: f.kind.to_string(),
            });
        }
        acc = acc * modpow(&base, &f.multiplicity, &modulus).expect("modulus >= 7") % &modulus;
    }
    let expected = &modulus - 1u32;
    if acc == expected {
        Ok(())
    } else {
        Err(CertError::WrongResidue {
            n: cert.n,
            residue: acc,
            expected,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CertDoc {
    n: u64,
    method: Method,
    factors: Vec<FactorDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FactorDoc {
    kind: String,
    params: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exponent: Option<String>,
    multiplicity: String,
}

/// Canonical JSON rendering; big integers are decimal strings.
pub fn serialize(cert: &DecompositionCertificate) -> String {
    let doc = CertDoc {
        n: cert.n,
        method: cert.method,
        factors: cert
            .factors
            .iter()
            .map(|f| FactorDoc {
                kind: f.kind.tag().to_string(),
                params: f.kind.params(),
                exponent: Some(f.exponent_value().to_string()),
                multiplicity: f.multiplicity.to_string(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("plain data serializes");
    s.push('\n');
    s
}

/// Parses a certificate. `verified` is recomputed, never read from the input.
pub fn deserialize(text: &str) -> Result<DecompositionCertificate, CertError> {
    let doc: CertDoc = serde_json::from_str(text).map_err(|e| CertError::Parse {
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    })?;
    let mut factors = Vec::with_capacity(doc.factors.len());
    for (i, f) in doc.factors.into_iter().enumerate() {
        let kind = match (f.kind.as_str(), f.params.as_slice()) {
            ("frobenius", &[t]) => FactorKind::Frobenius(t),
            ("quadratic", &[a]) => FactorKind::Quadratic(a),
            ("cubic", &[a, b]) => FactorKind::Cubic(a, b),
            ("frobenius" | "quadratic" | "cubic", p) => {
                return Err(CertError::Malformed(format!(
                    "factor {i}: {} takes a different number of params than {}",
                    f.kind,
                    p.len()
                )))
            }
            (other, _) => {
                return Err(CertError::Malformed(format!(
                    "factor {i}: unknown kind {other:?}"
                )))
            }
        };
        kind.validate()?;
        if let Some(e) = &f.exponent {
            let stated: BigUint = e
                .parse()
                .map_err(|_| CertError::Malformed(format!("factor {i}: bad exponent {e:?}")))?;
            if stated != kind.exponent_value() {
                return Err(CertError::Malformed(format!(
                    "factor {i}: exponent {stated} does not match {kind}"
                )));
            }
        }
        let multiplicity: BigUint = f.multiplicity.parse().map_err(|_| {
            CertError::Malformed(format!("factor {i}: bad multiplicity {:?}", f.multiplicity))
        })?;
        factors.push(GoldFactor { kind, multiplicity });
    }
    Ok(DecompositionCertificate::new(doc.n, doc.method, factors))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(a: u64, m: u64) -> GoldFactor {
        GoldFactor::new(FactorKind::Quadratic(a), m)
    }

    fn n7_algorithm1() -> DecompositionCertificate {
        DecompositionCertificate::new(7, Method::Algorithm1, vec![quad(5, 63)])
    }

    #[test]
    fn explicit_n7_identity() {
        // 2 * 3 * 21 = 126 = 2^7 - 2, with 21 = 2^4 + 2^2 + 1
        let c = DecompositionCertificate::new(
            7,
            Method::Theorem1,
            vec![
                GoldFactor::new(FactorKind::Frobenius(1), 1u32),
                quad(1, 1),
                GoldFactor::new(FactorKind::Cubic(4, 2), 1u32),
            ],
        );
        assert_eq!(
            c.factors.iter().map(|f| f.exponent_value()).collect::<Vec<_>>(),
            vec![BigUint::from(2u32), BigUint::from(3u32), BigUint::from(21u32)]
        );
        assert!(c.verified);
        assert_eq!(verify(&c), Ok(()));
        assert_eq!(c.length(), BigUint::from(2u32));
    }

    #[test]
    fn theorem_shape_for_n7() {
        let c = DecompositionCertificate::new(
            7,
            Method::Theorem1,
            vec![
                GoldFactor::new(FactorKind::Frobenius(1), 1u32),
                GoldFactor::new(FactorKind::Cubic(2, 1), 1u32),
                quad(3, 1),
            ],
        );
        assert!(c.verified);
    }

    #[test]
    fn empty_product_fails() {
        let c = DecompositionCertificate::new(5, Method::Algorithm1, vec![]);
        assert!(!c.verified);
        assert_eq!(
            verify(&c),
            Err(CertError::WrongResidue {
                n: 5,
                residue: BigUint::one(),
                expected: BigUint::from(30u32)
            })
        );
    }

    #[test]
    fn algorithm1_n7() {
        assert!(n7_algorithm1().verified);
        assert_eq!(
            BigUint::from(33u32).modpow(&BigUint::from(63u32), &BigUint::from(127u32)),
            BigUint::from(126u32)
        );
    }

    #[test]
    fn malformed_factors_rejected() {
        let bad = |k| DecompositionCertificate {
            n: 7,
            method: Method::Algorithm1,
            factors: vec![GoldFactor::new(k, 1u32)],
            verified: true,
        };
        assert!(matches!(verify(&bad(FactorKind::Cubic(2, 2))), Err(CertError::Malformed(_))));
        assert!(matches!(verify(&bad(FactorKind::Quadratic(0))), Err(CertError::Malformed(_))));
        assert!(matches!(
            verify(&bad(FactorKind::Quadratic(MAX_PARAM + 1))),
            Err(CertError::Malformed(_))
        ));
        let small = DecompositionCertificate { n: 2, ..n7_algorithm1() };
        assert_eq!(verify(&small), Err(CertError::BadN(2)));
    }

    #[test]
    fn non_unit_rejected() {
        // 2^3 + 1 = 9 shares 3 with 2^6 - 1
        let c = DecompositionCertificate::new(6, Method::Algorithm1, vec![quad(3, 1)]);
        assert!(matches!(verify(&c), Err(CertError::NotUnit { .. })));
    }

    #[test]
    fn round_trip() {
        let c = n7_algorithm1();
        let text = serialize(&c);
        assert!(text.contains("\"multiplicity\": \"63\""));
        assert!(text.contains("\"exponent\": \"33\""));
        assert_eq!(deserialize(&text), Ok(c));
    }

    #[test]
    fn tampered_multiplicity_fails_verification() {
        let text = serialize(&n7_algorithm1()).replace("\"63\"", "\"62\"");
        let c = deserialize(&text).unwrap();
        assert!(!c.verified);
        assert!(matches!(verify(&c), Err(CertError::WrongResidue { .. })));
    }

    #[test]
    fn parse_errors() {
        let text = serialize(&n7_algorithm1());
        let truncated = &text[..text.len() / 2];
        assert!(matches!(deserialize(truncated), Err(CertError::Parse { .. })));
        let unknown = text.replace("quadratic", "quartic");
        assert!(matches!(deserialize(&unknown), Err(CertError::Malformed(_))));
        let wrong_exp = text.replace("\"33\"", "\"34\"");
        assert!(matches!(deserialize(&wrong_exp), Err(CertError::Malformed(_))));
        let arity = text.replace("[\n        5\n      ]", "[5, 3]");
        assert!(matches!(deserialize(&arity), Err(CertError::Malformed(_))));
        // exponent is optional on input
        let no_exp = text.replace("\"exponent\": \"33\",", "");
        assert_eq!(deserialize(&no_exp), Ok(n7_algorithm1()));
    }
}
