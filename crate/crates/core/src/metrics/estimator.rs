#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("invalid estimator input n={n}, c={c}, k={k}: need n >= 1, 0 <= c <= n, 1 <= k <= n")]
pub struct EstimatorError {
    pub n: u64,
    pub c: u64,
    pub k: u64,
}

/// Unbiased estimate of the probability that at least one of `k` samples,
/// drawn without replacement from `n` generated samples of which `c` are
/// correct, is correct: `1 - C(n-c, k) / C(n, k)`.
///
/// Evaluated as `1 - prod_{i=n-c+1}^{n} (1 - k/i)` so no binomial is ever
/// materialized. Returns exactly `0.0` for `c == 0` and exactly `1.0` when
/// `n - c < k`.
pub fn pass_at_k(n: u64, c: u64, k: u64) -> Result<f64, EstimatorError> {
    if n == 0 || c > n || k == 0 || k > n {
        return Err(EstimatorError { n, c, k });
    }
    if c == 0 {
        return Ok(0.0);
    }
    if n - c < k {
        return Ok(1.0);
    }
    let k = k as f64;
    let miss: f64 = (n - c + 1..=n).map(|i| 1.0 - k / i as f64).product();
    Ok(1.0 - miss)
}

/// Same estimator with `c` counting samples that pass the compile gate.
pub fn compilable_at_k(n: u64, c: u64, k: u64) -> Result<f64, EstimatorError> {
    pass_at_k(n, c, k)
}
