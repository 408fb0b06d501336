//! Negative-binomial likelihood in mean/dispersion form (variance μ + αμ²).

use statrs::function::gamma::{digamma, ln_gamma};

use super::CountModelError;

/// Below this dispersion, and for moderate counts, the log-gamma ratio is
/// summed term by term to avoid cancellation between huge log-gamma values.
const SMALL_ALPHA: f64 = 1e-2;
const SUM_LIMIT: f64 = 1000.0;

fn check(c: f64, mu: f64, alpha: f64) -> Result<(), CountModelError> {
    let ok = c >= 0.0 && c.is_finite() && c.fract() == 0.0 && mu > 0.0 && mu.is_finite() && alpha > 0.0 && alpha.is_finite();
    if ok {
        Ok(())
    } else {
        Err(CountModelError::InvalidParams { c, mu, alpha })
    }
}

/// `ln P(c | μ, α)` with
/// `P(c) = Γ(c+1/α) / (Γ(1/α) c!) · (1/(1+αμ))^{1/α} · (αμ/(1+αμ))^c`.
pub fn nb_ln_pmf(c: f64, mu: f64, alpha: f64) -> Result<f64, CountModelError> {
    check(c, mu, alpha)?;
    let r = 1.0 / alpha;
    let l1p = (alpha * mu).ln_1p();
    if alpha < SMALL_ALPHA && c <= SUM_LIMIT {
        // Γ(c+r)/Γ(r) · α^c = Π_{j<c} (1 + jα)
        let ratio: f64 = (0..c as u64).map(|j| (j as f64 * alpha).ln_1p()).sum();
        Ok(ratio + c * mu.ln() - (r + c) * l1p - ln_gamma(c + 1.0))
    } else {
        Ok(ln_gamma(c + r) - ln_gamma(r) - ln_gamma(c + 1.0) - r * l1p + c * ((alpha * mu).ln() - l1p))
    }
}

/// `−ln P(c | μ, α)`.
pub fn nb_nll(c: f64, mu: f64, alpha: f64) -> Result<f64, CountModelError> {
    nb_ln_pmf(c, mu, alpha).map(|v| -v)
}

/// `∂(−ln P)/∂μ = (1 + cα)/(1 + αμ) − c/μ`.
#[inline]
pub fn nb_nll_dmu(c: f64, mu: f64, alpha: f64) -> f64 {
    (1.0 + c * alpha) / (1.0 + alpha * mu) - c / mu
}

/// `∂(−ln P)/∂α`.
pub fn nb_nll_dalpha(c: f64, mu: f64, alpha: f64) -> f64 {
    let r = 1.0 / alpha;
    // ψ(c + r) − ψ(r)
    let dpsi = if c <= 64.0 {
        (0..c as u64).map(|j| 1.0 / (r + j as f64)).sum()
    } else {
        digamma(c + r) - digamma(r)
    };
    let dlogp = r * r * ((alpha * mu).ln_1p() - dpsi) + c * r - (r + c) * mu / (1.0 + alpha * mu);
    -dlogp
}
