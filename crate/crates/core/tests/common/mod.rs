//! Oracles shared by the integration tests.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

fn binom(n: i64, k: i64) -> BigInt {
    if k < 0 || k > n {
        return BigInt::zero();
    }
    let mut r = BigInt::one();
    for i in 0..k {
        r = r * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    r
}

/// `L_m(xi) = sum_i C(m - 1, m - i) (-xi)^i / i!` (alpha = -1) in exact
/// arithmetic at `xi = num / den`, rounded once to f64.
pub fn exact_laguerre(m: usize, num: i64, den: i64) -> f64 {
    if m == 0 {
        return 1.0;
    }
    let m = m as i64;
    let xi = BigRational::new(BigInt::from(num), BigInt::from(den));
    let mut sum = BigRational::zero();
    let mut power = BigRational::one();
    let mut fact = BigInt::one();
    for i in 1..=m {
        power *= -xi.clone();
        fact *= BigInt::from(i);
        sum += BigRational::from_integer(binom(m - 1, m - i)) * power.clone() / BigRational::from_integer(fact.clone());
    }
    sum.to_f64().unwrap()
}
