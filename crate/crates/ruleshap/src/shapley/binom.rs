//! Exact binomial coefficients for the attribution kernels, plus the
//! convolution identity their derivation rests on.

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// C(n, k) as an exact integer; 0 when k > n. Panics on overflow beyond
/// u128 rather than wrapping silently. The attribution kernels only ever
/// need arguments up to twice the rule depth.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut result: u128 = 1;
    for i in 1..=k {
        // One step of C(n-k+i, i) = C(n-k+i-1, i-1) * (n-k+i) / i, dividing
        // before the multiply so intermediates stay near the result. The
        // reduced divisor is coprime to the reduced factor yet divides the
        // integer product, so it divides the running value exactly.
        let mut mult = u128::from(n - k + i);
        let mut div = u128::from(i);
        let g = gcd(mult, div);
        mult /= g;
        div /= g;
        debug_assert_eq!(result % div, 0);
        result /= div;
        result = result
            .checked_mul(mult)
            .expect("binomial coefficient overflows u128");
    }
    result
}

/// Whether sum_{u=0}^{c} C(a+u, u) C(b-u, c-u) equals C(a+b+1, c), in exact
/// integer arithmetic. This telescoping of a binomial convolution is what
/// collapses the subset sums behind the closed-form estimators into a
/// single coefficient per data row, so it doubles as a self-test of the
/// shared kernel.
pub fn binom_sum_identity_check(a: u64, b: u64, c: u64) -> bool {
    assert!(c <= b, "the identity requires c <= b");
    let mut lhs: u128 = 0;
    for u in 0..=c {
        let term = binomial(a + u, u)
            .checked_mul(binomial(b - u, c - u))
            .expect("binomial product overflows u128");
        lhs = lhs.checked_add(term).expect("binomial sum overflows u128");
    }
    lhs == binomial(a + b + 1, c)
}
