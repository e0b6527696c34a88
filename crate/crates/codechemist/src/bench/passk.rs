//! Unbiased pass@k estimation.

use super::BenchError;

/// `1 - C(n-c, k) / C(n, k)` computed as an incremental product, so no
/// binomial coefficient is ever materialized. `k = 1` reduces to `c / n`
/// exactly.
pub fn pass_at_k(n: u64, c: u64, k: u64) -> Result<f64, BenchError> {
    if c > n || k < 1 || k > n {
        return Err(BenchError::DomainViolation(format!(
            "pass_at_k requires 0 <= c <= n and 1 <= k <= n, got n={n} c={c} k={k}"
        )));
    }
    if k == 1 {
        return Ok(c as f64 / n as f64);
    }
    if n - c < k {
        // Every k-subset contains at least one correct sample.
        return Ok(1.0);
    }
    let mut product = 1.0_f64;
    for i in 0..k {
        product *= (n - c - i) as f64 / (n - i) as f64;
    }
    Ok(1.0 - product)
}
