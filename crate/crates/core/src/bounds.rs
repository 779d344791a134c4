//! Group orders and the explicit bounds on Frobenius powers for CM abelian varieties,
//! and the dimension count behind non-injectivity of the Torelli map on first jets.

use num_bigint::BigUint;
use num_traits::{One, Pow};
use serde::Serialize;
use thiserror::Error;

use crate::base_ring::is_prime;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BoundsError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("genus must be at least {min}, got {g}")]
    Genus { g: u32, min: u32 },
    #[error("degree must be at least 1")]
    Degree,
}

fn prime(l: u64) -> Result<(), BoundsError> {
    if is_prime(l) {
        Ok(())
    } else {
        Err(BoundsError::NotPrime(l))
    }
}

/// `#GSp_{2g}(F_l) = prod_{i=1}^g (l^{2i} - 1) * l^{g^2} * (l - 1)`.
pub fn gsp_order(g: u32, l: u64) -> Result<BigUint, BoundsError> {
    prime(l)?;
    if g < 1 {
        return Err(BoundsError::Genus { g, min: 1 });
    }
    let lb = BigUint::from(l);
    let mut acc = BigUint::one();
    for i in 1..=g {
        acc *= Pow::pow(&lb, 2 * i) - 1u32;
    }
    acc *= Pow::pow(&lb, g * g);
    acc *= l - 1;
    Ok(acc)
}

/// `#GSp_{2g}(F_5)` unless `p = 5`, then `#GSp_{2g}(F_7)`.
pub fn e_const(g: u32, p: u64) -> Result<BigUint, BoundsError> {
    prime(p)?;
    gsp_order(g, if p == 5 { 7 } else { 5 })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FrobPowerBound {
    /// `2g e(g, p) d`
    #[serde(serialize_with = "crate::bounds::ser_big")]
    pub r_bound: BigUint,
    /// `n = p^exponent` with `exponent = 2g e(g, p)`
    #[serde(serialize_with = "crate::bounds::ser_big")]
    pub n_exponent: BigUint,
    /// the same power with the degree factor `d` included
    #[serde(serialize_with = "crate::bounds::ser_big")]
    pub n_exponent_with_degree: BigUint,
    /// decimal expansion of `n` when it has at most `EXPAND_DIGITS` digits
    pub n: Option<String>,
}

pub const EXPAND_DIGITS: u64 = 400;

/// Integers that a double holds exactly are written as numbers, larger ones as decimal strings.
pub fn ser_big<S: serde::Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
    match u64::try_from(v) {
        Ok(n) if n < (1u64 << 53) => s.serialize_u64(n),
        _ => s.serialize_str(&v.to_string()),
    }
}

pub fn frob_power_bound(g: u32, p: u64, d: u64) -> Result<FrobPowerBound, BoundsError> {
    if d < 1 {
        return Err(BoundsError::Degree);
    }
    let e = e_const(g, p)?;
    let n_exponent = &e * (2 * g);
    let r_bound = &n_exponent * d;
    let n_exponent_with_degree = r_bound.clone();
    // p^k has at most k * digits(p) digits
    let digits = n_exponent.clone() * BigUint::from(p.to_string().len() as u64);
    let n = if digits <= BigUint::from(EXPAND_DIGITS) {
        let k: u32 = n_exponent.to_string().parse().unwrap();
        Some(Pow::pow(&BigUint::from(p), k).to_string())
    } else {
        None
    };
    Ok(FrobPowerBound { r_bound, n_exponent, n_exponent_with_degree, n })
}

/// Largest order of an abelian subgroup of `GSp_{2g}(F_l)` used in the bound: `l^{g(2g+1)+1}`.
pub fn abelian_subgroup_bound(g: u32, l: u64) -> Result<BigUint, BoundsError> {
    prime(l)?;
    Ok(Pow::pow(&BigUint::from(l), g * (2 * g + 1) + 1))
}

/// `((2p+1)(g-1) > g^2, (2p+1)(g-1), g^2)`: the tangent spaces of deformations of a curve with
/// a Frobenius lift against those of its Jacobian.
pub fn torelli_noninjective(g: u32, p: u64) -> Result<(bool, u64, u64), BoundsError> {
    prime(p)?;
    if g < 2 {
        return Err(BoundsError::Genus { g, min: 2 });
    }
    let curve = (2 * p + 1) * (g as u64 - 1);
    let ab = (g as u64) * (g as u64);
    Ok((curve > ab, curve, ab))
}

/// `m = lcm(1, ..., N)` as its prime factorization: `p^floor(log_p N)` for every prime `p <= N`.
/// Only meaningful for moderate `N`; larger values are reported by recipe alone.
pub fn lcm_exponents(n: u64) -> Vec<(u64, u32)> {
    (2..=n)
        .filter(|&p| is_prime(p))
        .map(|p| {
            let mut e = 0;
            let mut k = p;
            while k <= n {
                e += 1;
                k = match k.checked_mul(p) {
                    Some(v) => v,
                    None => break,
                };
            }
            (p, e)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gl2_count(l: u64) -> u64 {
        let mut n = 0;
        for a in 0..l {
            for b in 0..l {
                for c in 0..l {
                    for d in 0..l {
                        if (a * d + l * l - b * c) % l != 0 {
                            n += 1;
                        }
                    }
                }
            }
        }
        n
    }

    #[test]
    fn genus_one_is_gl2() {
        for l in [2, 3, 5] {
            assert_eq!(gsp_order(1, l).unwrap(), BigUint::from(gl2_count(l)));
        }
        assert_eq!(gsp_order(1, 5).unwrap(), BigUint::from(480u32));
        assert_eq!(gsp_order(2, 2).unwrap(), BigUint::from(720u32));
    }

    #[test]
    fn gsp4_over_f2() {
        // |Sp_4(F_2)| = 720 = |S_6|, and l - 1 = 1
        assert_eq!(gsp_order(2, 2).unwrap(), BigUint::from((1..=6u32).product::<u32>()));
    }

    #[test]
    fn e_constants() {
        assert_eq!(e_const(1, 3).unwrap(), BigUint::from(480u32));
        assert_eq!(e_const(1, 5).unwrap(), BigUint::from(2016u32));
        assert_eq!(e_const(1, 7).unwrap(), BigUint::from(480u32));
        assert!(e_const(1, 4).is_err());
    }

    #[test]
    fn frobenius_power_bounds() {
        let b = frob_power_bound(1, 3, 1).unwrap();
        assert_eq!(b.r_bound, BigUint::from(960u32));
        assert_eq!(b.n_exponent, BigUint::from(960u32));
        assert_eq!(b.n, None);
        assert_eq!(frob_power_bound(1, 5, 1).unwrap().r_bound, BigUint::from(4032u32));
        assert_eq!(frob_power_bound(1, 3, 2).unwrap().r_bound, BigUint::from(1920u32));
        assert_eq!(frob_power_bound(1, 3, 2).unwrap().n_exponent, BigUint::from(960u32));
    }

    #[test]
    fn abelian_bounds() {
        assert_eq!(abelian_subgroup_bound(1, 5).unwrap(), BigUint::from(625u32));
        assert_eq!(abelian_subgroup_bound(2, 2).unwrap(), BigUint::from(2048u32));
    }

    #[test]
    fn torelli() {
        assert_eq!(torelli_noninjective(2, 2).unwrap(), (true, 5, 4));
        assert_eq!(torelli_noninjective(2, 3).unwrap(), (true, 7, 4));
        assert_eq!(torelli_noninjective(10, 2).unwrap(), (false, 45, 100));
        assert!(torelli_noninjective(1, 2).is_err());
    }

    #[test]
    fn lcm_table() {
        assert_eq!(lcm_exponents(10), vec![(2, 3), (3, 2), (5, 1), (7, 1)]);
    }

    proptest! {
        #[test]
        fn bounds_are_monotone(g in 1u32..4, i in 0usize..4, d in 1u64..5) {
            let ls = [2u64, 3, 5, 7];
            let l = ls[i];
            prop_assert!(abelian_subgroup_bound(g, l).unwrap() < abelian_subgroup_bound(g + 1, l).unwrap());
            if i + 1 < ls.len() {
                prop_assert!(abelian_subgroup_bound(g, l).unwrap() < abelian_subgroup_bound(g, ls[i + 1]).unwrap());
            }
            let a = frob_power_bound(g, 3, d).unwrap().r_bound;
            let b = frob_power_bound(g, 3, 2 * d).unwrap().r_bound;
            prop_assert_eq!(b, a * 2u32);
        }
    }
}
