//! Expected-infection analysis of TTL-bounded infect-upon-contagion push.
//!
//! Round `r` of the push is the set of peers that receive the pair
//! `(block, r)`. Each of them forwards `f_out` digests, so the expected
//! number of peers reached in round `r + 1` is bounded by `φ(E[X_r])`, where
//! `φ(x) = n(1 − (1 − 1/n)^{f_out·x})`. Iterating from `ψ(0) = 1` gives the
//! expected-informed trajectory `ψ`, whose limit is the carrying capacity
//! `γ`. Summing `f_out·ψ(i)` over the first `ttl` rounds estimates the number
//! of digests `m`, and `n(1 − 1/n)^m` bounds the probability that some peer
//! is missed.
//!
//! Two infection kernels are supported, see [`Kernel`].

use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::math;

/// Largest TTL [`min_ttl`] will try before giving up.
pub const MAX_TTL: u32 = 1000;

/// Fixed-point iterations stop once successive values differ by less than this.
pub const FIXED_POINT_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum AnalysisError {
    /// Network size below two peers.
    NetworkTooSmall(u32),
    /// Fan-out below the minimum the operation needs.
    FanOutTooSmall {
        f_out: u32,
        min: u32,
    },
    /// TTL of zero where at least one round is needed.
    ZeroTtl,
    /// Argument outside the function's domain.
    Domain(&'static str, f64),
    /// Target probability outside (0, 1).
    InvalidTarget(f64),
    /// No TTL up to [`MAX_TTL`] reaches the target.
    NoTtl {
        n: u32,
        f_out: u32,
        p_e_target: f64,
    },
    /// Lookup for more peers than any table entry covers.
    NoTableEntry {
        n: u32,
        max: u32,
    },
    EmptyTable,
}

impl fmt::Display for AnalysisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NetworkTooSmall(n) => write!(f, "network size must be at least 2, got {n}"),
            Self::FanOutTooSmall { f_out, min } => {
                write!(f, "fan-out must be at least {min}, got {f_out}")
            }
            Self::ZeroTtl => f.write_str("ttl must be at least 1"),
            Self::Domain(what, x) => write!(f, "{what}: argument {x} outside domain"),
            Self::InvalidTarget(p) => write!(f, "target probability {p} not in (0, 1)"),
            Self::NoTtl { n, f_out, p_e_target } => {
                write!(f, "no ttl <= {MAX_TTL} reaches p_e <= {p_e_target} with n = {n}, f_out = {f_out}")
            }
            Self::NoTableEntry { n, max } => {
                write!(f, "no table entry covers n = {n} (largest entry is {max})")
            }
            Self::EmptyTable => f.write_str("ttl table has no entries"),
        }
    }
}

impl core::error::Error for AnalysisError {}

/// How one digest infects a uniformly chosen peer.
///
/// Both kernels have the form `φ(x) = n(1 − e^{−c·f_out·x})`:
///
/// - `Exponential` uses `c = 1/n`, the large-network form. The closed-form
///   carrying capacity `γ = n(f_out + W(−f_out e^{−f_out}))/f_out` is exactly
///   its fixed point, and it is the kernel the TTL solver uses.
/// - `Binomial` uses `c = −ln(1 − 1/n)`, i.e. `φ(x) = n(1 − (1 − 1/n)^{f_out·x})`,
///   the finite-`n` probability that a given peer is hit by at least one of
///   `f_out·x` independent uniform digests.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    #[default]
    Exponential,
    Binomial,
}

impl Kernel {
    fn rate(self, n: u32) -> f64 {
        let n = f64::from(n);
        match self {
            Kernel::Exponential => 1.0 / n,
            Kernel::Binomial => -math::ln1p(-1.0 / n),
        }
    }

    /// Effective fan-out `a = c·f_out·n`; equals `f_out` for the exponential kernel.
    fn effective_fan_out(self, n: u32, f_out: u32) -> f64 {
        self.rate(n) * f64::from(f_out) * f64::from(n)
    }
}

/// Parameters of one push dissemination.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PushParams {
    pub n: u32,
    pub f_out: u32,
    pub ttl: u32,
    #[serde(default)]
    pub kernel: Kernel,
}

impl PushParams {
    pub fn new(n: u32, f_out: u32, ttl: u32) -> Result<Self, AnalysisError> {
        if n < 2 {
            return Err(AnalysisError::NetworkTooSmall(n));
        }
        if f_out < 1 {
            return Err(AnalysisError::FanOutTooSmall { f_out, min: 1 });
        }
        Ok(Self { n, f_out, ttl, kernel: Kernel::default() })
    }

    pub fn with_kernel(mut self, kernel: Kernel) -> Self {
        self.kernel = kernel;
        self
    }

    fn check(&self) -> Result<(), AnalysisError> {
        Self::new(self.n, self.f_out, self.ttl).map(|_| ())
    }

    fn check_logistic(&self) -> Result<(), AnalysisError> {
        self.check()?;
        if self.f_out < 2 {
            return Err(AnalysisError::FanOutTooSmall { f_out: self.f_out, min: 2 });
        }
        Ok(())
    }
}

/// Carrying capacity, expected-informed trajectory, digest count and failure
/// bound for one parameter set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub params: PushParams,
    pub gamma: f64,
    /// `ψ(0..=ttl)`.
    pub psi_trajectory: Vec<f64>,
    pub expected_digests: f64,
    pub digests_lower_bound: f64,
    pub p_e_bound: f64,
}

/// One step of the expected-infection map.
pub fn phi(x: f64, params: &PushParams) -> Result<f64, AnalysisError> {
    params.check()?;
    if x.is_nan() || x < 0.0 {
        return Err(AnalysisError::Domain("phi", x));
    }
    Ok(phi_unchecked(x, params))
}

#[inline]
fn phi_unchecked(x: f64, params: &PushParams) -> f64 {
    let c = params.kernel.rate(params.n);
    -f64::from(params.n) * math::expm1(-c * f64::from(params.f_out) * x)
}

/// `ψ(r)`: expected informed peers after `r` rounds, starting from `ψ(0) = 1`.
pub fn psi(r: u32, params: &PushParams) -> Result<f64, AnalysisError> {
    params.check()?;
    Ok(PsiIter::new(params).nth(r as usize).unwrap_or(0.0))
}

/// `ψ(0), ψ(1), …, ψ(rounds)`.
pub fn psi_trajectory(rounds: u32, params: &PushParams) -> Result<Vec<f64>, AnalysisError> {
    params.check()?;
    Ok(PsiIter::new(params).take(rounds as usize + 1).collect())
}

/// Infinite iterator over `ψ(0), ψ(1), …`.
#[derive(Clone, Debug)]
pub struct PsiIter {
    params: PushParams,
    next: f64,
}

impl PsiIter {
    pub fn new(params: &PushParams) -> Self {
        Self { params: *params, next: 1.0 }
    }
}

impl Iterator for PsiIter {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let current = self.next;
        self.next = phi_unchecked(current, &self.params);
        Some(current)
    }
}

/// Principal branch `W₀` of the Lambert W function: the `w ≥ −1` solving
/// `w·e^w = x`.
///
/// Halley iteration, seeded by the branch-point series near `−1/e`, by
/// `ln(1 + x)` for moderate arguments and by `ln x − ln ln x` for large ones.
pub fn lambert_w0(x: f64) -> Result<f64, AnalysisError> {
    const INV_E: f64 = 1.0 / core::f64::consts::E;
    if x.is_nan() || x < -INV_E {
        return Err(AnalysisError::Domain("lambert_w0", x));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == f64::INFINITY {
        return Ok(f64::INFINITY);
    }

    let p2 = 2.0 * (core::f64::consts::E * x + 1.0);
    let mut w = if x < -0.25 {
        let p = math::sqrt(p2.max(0.0));
        // Too close to the branch point for Halley (w'(x) is unbounded there);
        // the series error is O(p^4).
        if p < 1e-5 {
            return Ok(-1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p);
        }
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if x < 3.0 {
        math::ln1p(x)
    } else {
        let l1 = math::ln(x);
        let l2 = math::ln(l1);
        l1 - l2 + l2 / l1
    };

    for _ in 0..64 {
        let ew = math::exp(w);
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let step = f / denom;
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * (1.0 + w.abs()) {
            break;
        }
    }
    Ok(w.max(-1.0))
}

/// Limit `γ` of `ψ(r)`: the positive fixed point of `φ`.
///
/// With effective fan-out `a = c·f_out·n` (see [`Kernel`]) the fixed point of
/// `y = 1 − e^{−a·y}`, `y = γ/n`, is `y = 1 + W₀(−a·e^{−a})/a`.
pub fn carrying_capacity(n: u32, f_out: u32, kernel: Kernel) -> Result<f64, AnalysisError> {
    PushParams::new(n, f_out, 0)?.with_kernel(kernel).check_logistic()?;
    let a = kernel.effective_fan_out(n, f_out);
    let w = lambert_w0(-a * math::exp(-a))?;
    Ok(f64::from(n) * (a + w) / a)
}

/// Logistic curve `X(t) = γ·f_out^t / (γ + f_out^t − 1)` with `X(0) = 1`.
/// For integer `t` it stays below `ψ(t)`.
pub fn logistic_bound(t: f64, n: u32, f_out: u32, kernel: Kernel) -> Result<f64, AnalysisError> {
    if t.is_nan() || t < 0.0 {
        return Err(AnalysisError::Domain("logistic_bound", t));
    }
    let gamma = carrying_capacity(n, f_out, kernel)?;
    Ok(logistic(t, gamma, f64::from(f_out)))
}

#[inline]
fn logistic(t: f64, gamma: f64, f_out: f64) -> f64 {
    // γ / (1 + (γ − 1)·f^{−t}) avoids inf/inf for large t.
    gamma / (1.0 + (gamma - 1.0) * math::powf(f_out, -t))
}

/// Expected number of push messages `m = f_out · Σ_{i<ttl} ψ(i)` sent while
/// the counter runs from 0 to `ttl`.
pub fn expected_digests(params: &PushParams) -> Result<f64, AnalysisError> {
    params.check()?;
    if params.ttl == 0 {
        return Err(AnalysisError::ZeroTtl);
    }
    let sum: f64 = PsiIter::new(params).take(params.ttl as usize).sum();
    let m = f64::from(params.f_out) * sum;
    debug_assert!(
        params.f_out < 2 || digests_lower_bound(params).map_or(true, |lb| lb <= m + 1e-9 * m),
        "closed-form digest bound exceeds the summed count"
    );
    Ok(m)
}

/// Closed-form lower bound `γ·f_out·log_{f_out}((γ + f_out^{ttl−1} − 1)/γ)` on
/// [`expected_digests`], from integrating the logistic curve.
pub fn digests_lower_bound(params: &PushParams) -> Result<f64, AnalysisError> {
    params.check_logistic()?;
    if params.ttl == 0 {
        return Err(AnalysisError::ZeroTtl);
    }
    let gamma = carrying_capacity(params.n, params.f_out, params.kernel)?;
    let f = f64::from(params.f_out);
    let growth = math::powf(f, f64::from(params.ttl - 1));
    Ok(gamma * f * math::ln((gamma + growth - 1.0) / gamma) / math::ln(f))
}

/// `n(1 − 1/n)^m`, clamped to 1.
fn failure_bound(n: u32, m: f64) -> f64 {
    let n = f64::from(n);
    (n * math::exp(m * math::ln1p(-1.0 / n))).min(1.0)
}

/// Upper bound on the probability that some peer receives no push:
/// `min(1, n(1 − 1/n)^m)` with `m` from [`expected_digests`].
pub fn p_e_bound(params: &PushParams) -> Result<f64, AnalysisError> {
    let m = expected_digests(params)?;
    Ok(failure_bound(params.n, m))
}

/// Digest count needed for `n(1 − 1/n)^m ≤ p_e`.
pub fn required_digests(n: u32, p_e_target: f64) -> Result<f64, AnalysisError> {
    if n < 2 {
        return Err(AnalysisError::NetworkTooSmall(n));
    }
    if !(p_e_target > 0.0 && p_e_target < 1.0) {
        return Err(AnalysisError::InvalidTarget(p_e_target));
    }
    let n = f64::from(n);
    Ok(math::ln(p_e_target / n) / math::ln1p(-1.0 / n))
}

/// Closed-form round estimate `log_{f_out}(γ·f_out^{m/(γ·f_out)} − γ + 1) + 1`
/// for the digest count `m` that [`required_digests`] gives. Real-valued;
/// [`min_ttl`] is the authoritative integer answer.
pub fn round_estimate(n: u32, f_out: u32, p_e_target: f64, kernel: Kernel) -> Result<f64, AnalysisError> {
    let m = required_digests(n, p_e_target)?;
    let gamma = carrying_capacity(n, f_out, kernel)?;
    let f = f64::from(f_out);
    let exponent = m / (gamma * f);
    let ln_f = math::ln(f);
    // ln(γ f^e − γ + 1) = ln γ + e ln f + ln(1 − (γ − 1)/(γ f^e))
    let tail = math::ln1p(-(gamma - 1.0) / (gamma * math::exp(exponent * ln_f)));
    Ok((math::ln(gamma) + exponent * ln_f + tail) / ln_f + 1.0)
}

/// Smallest TTL whose [`p_e_bound`] is at most `p_e_target`, using the
/// default kernel.
pub fn min_ttl(n: u32, f_out: u32, p_e_target: f64) -> Result<u32, AnalysisError> {
    min_ttl_with_kernel(n, f_out, p_e_target, Kernel::default())
}

pub fn min_ttl_with_kernel(n: u32, f_out: u32, p_e_target: f64, kernel: Kernel) -> Result<u32, AnalysisError> {
    let params = PushParams::new(n, f_out, 1)?.with_kernel(kernel);
    params.check_logistic()?;
    if !(p_e_target > 0.0 && p_e_target < 1.0) {
        return Err(AnalysisError::InvalidTarget(p_e_target));
    }
    let f = f64::from(f_out);
    let mut m = 0.0;
    for (ttl, psi) in (1..=MAX_TTL).zip(PsiIter::new(&params)) {
        m += f * psi;
        if failure_bound(n, m) <= p_e_target {
            return Ok(ttl);
        }
    }
    Err(AnalysisError::NoTtl { n, f_out, p_e_target })
}

/// Full report for `params`.
pub fn analyze(params: &PushParams) -> Result<AnalysisReport, AnalysisError> {
    params.check_logistic()?;
    Ok(AnalysisReport {
        params: *params,
        gamma: carrying_capacity(params.n, params.f_out, params.kernel)?,
        psi_trajectory: psi_trajectory(params.ttl, params)?,
        expected_digests: expected_digests(params)?,
        digests_lower_bound: digests_lower_bound(params)?,
        p_e_bound: p_e_bound(params)?,
    })
}

/// A row requested for a TTL lookup table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TtlRequest {
    pub n: u32,
    pub p_e_target: f64,
    pub f_out: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TtlTableEntry {
    pub n: u32,
    pub f_out: u32,
    pub p_e_target: f64,
    pub ttl: u32,
}

/// TTL values for a handful of network sizes. A network whose size is not in
/// the table uses the entry for the smallest tabulated size above it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TtlTable {
    entries: Vec<TtlTableEntry>,
}

pub fn build_ttl_table(requests: &[TtlRequest]) -> Result<TtlTable, AnalysisError> {
    if requests.is_empty() {
        return Err(AnalysisError::EmptyTable);
    }
    let mut entries = requests
        .iter()
        .map(|r| {
            Ok(TtlTableEntry {
                n: r.n,
                f_out: r.f_out,
                p_e_target: r.p_e_target,
                ttl: min_ttl(r.n, r.f_out, r.p_e_target)?,
            })
        })
        .collect::<Result<Vec<_>, AnalysisError>>()?;
    entries.sort_by(|a, b| a.n.cmp(&b.n).then(b.p_e_target.total_cmp(&a.p_e_target)).then(a.f_out.cmp(&b.f_out)));
    Ok(TtlTable { entries })
}

impl TtlTable {
    pub fn entries(&self) -> &[TtlTableEntry] {
        &self.entries
    }

    /// Entry with the smallest tabulated `n` at or above `n`.
    pub fn lookup(&self, n: u32) -> Result<&TtlTableEntry, AnalysisError> {
        self.lookup_by(n, |_| true)
    }

    /// Like [`lookup`](Self::lookup), restricted to entries built for `p_e_target`.
    pub fn lookup_target(&self, n: u32, p_e_target: f64) -> Result<&TtlTableEntry, AnalysisError> {
        self.lookup_by(n, |e| e.p_e_target == p_e_target)
    }

    fn lookup_by(&self, n: u32, keep: impl Fn(&TtlTableEntry) -> bool) -> Result<&TtlTableEntry, AnalysisError> {
        let mut candidates = self.entries.iter().filter(|e| keep(e)).peekable();
        let max = match candidates.peek() {
            None => return Err(AnalysisError::EmptyTable),
            Some(_) => self.entries.iter().filter(|e| keep(e)).map(|e| e.n).max().unwrap_or(0),
        };
        candidates.find(|e| e.n >= n).ok_or(AnalysisError::NoTableEntry { n, max })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(n: u32, f_out: u32, ttl: u32) -> PushParams {
        PushParams::new(n, f_out, ttl).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    // Independent fixed-point oracle: iterate the map written out longhand
    // until the step falls below 1e-12.
    fn fixed_point_oracle(n: u32, f_out: u32, binomial: bool) -> f64 {
        let nf = f64::from(n);
        let step = |x: f64| {
            if binomial {
                nf * (1.0 - libm::pow(1.0 - 1.0 / nf, f64::from(f_out) * x))
            } else {
                nf * (1.0 - libm::exp(-f64::from(f_out) * x / nf))
            }
        };
        let mut x = 1.0;
        for _ in 0..100_000 {
            let next = step(x);
            if (next - x).abs() < 1e-12 {
                return next;
            }
            x = next;
        }
        x
    }

    #[test]
    fn phi_examples() {
        let p = params(100, 4, 9);
        assert_eq!(phi(0.0, &p).unwrap(), 0.0);
        // 100·(1 − 0.99⁴)
        let b = p.with_kernel(Kernel::Binomial);
        assert!(close(phi(1.0, &b).unwrap(), 100.0 * (1.0 - 0.99f64.powi(4)), 1e-12));
        assert!(close(phi(1.0, &b).unwrap(), 3.940399, 1e-9));
        // 100·(1 − e^{−0.04})
        assert!(close(phi(1.0, &p).unwrap(), 3.921056084767679, 1e-12));
        assert!(matches!(phi(-0.5, &p), Err(AnalysisError::Domain(..))));
    }

    #[test]
    fn phi_fixed_point_at_gamma() {
        for kernel in [Kernel::Exponential, Kernel::Binomial] {
            let p = params(100, 4, 0).with_kernel(kernel);
            let g = carrying_capacity(100, 4, kernel).unwrap();
            assert!((phi(g, &p).unwrap() - g).abs() < 1e-9);
        }
    }

    #[test]
    fn psi_examples() {
        let p = params(100, 4, 9);
        assert_eq!(psi(0, &p).unwrap(), 1.0);
        assert!(close(psi(1, &p).unwrap(), phi(1.0, &p).unwrap(), 0.0));
        let b = p.with_kernel(Kernel::Binomial);
        assert!(close(psi(1, &b).unwrap(), 3.9404, 1e-4));
        assert!(close(psi(3, &b).unwrap(), 44.508942093068775, 1e-9));
        assert!(close(psi(3, &p).unwrap(), 44.04623052698211, 1e-9));
        for kernel in [Kernel::Exponential, Kernel::Binomial] {
            let p = p.with_kernel(kernel);
            let g = carrying_capacity(100, 4, kernel).unwrap();
            assert!(close(psi(200, &p).unwrap(), g, 1e-6));
        }
    }

    #[test]
    fn lambert_examples() {
        let inv_e = 1.0 / core::f64::consts::E;
        assert_eq!(lambert_w0(0.0).unwrap(), 0.0);
        assert!(close(lambert_w0(-inv_e).unwrap(), -1.0, 1e-7));
        assert!(close(lambert_w0(core::f64::consts::E).unwrap(), 1.0, 1e-15));
        // mpmath reference values
        assert!(close(lambert_w0(1.0).unwrap(), 0.5671432904097838, 1e-15));
        assert!(close(lambert_w0(10.0).unwrap(), 1.7455280027406994, 1e-15));
        assert!(close(lambert_w0(-0.2).unwrap(), -0.25917110181907377, 1e-15));
        assert!(close(lambert_w0(1e6).unwrap(), 11.38335808614005, 1e-13));
        assert!(matches!(lambert_w0(-0.5), Err(AnalysisError::Domain(..))));
        assert!(lambert_w0(f64::NAN).is_err());
    }

    #[test]
    fn lambert_residual_log_grid() {
        let inv_e = 1.0 / core::f64::consts::E;
        let mut xs = std::vec![-inv_e, -0.367, -0.3, -0.1, -1e-3, 1e-9, 1e-3];
        // Logarithmic sweep of the positive axis up to 1e6.
        let mut x = 1e-6;
        while x <= 1e6 {
            xs.push(x);
            x *= 1.37;
        }
        // And of the distance to the branch point.
        let mut d = 1e-12;
        while d < inv_e {
            xs.push(-inv_e + d);
            d *= 3.1;
        }
        for x in xs {
            let w = lambert_w0(x).unwrap();
            assert!(w >= -1.0);
            let residual = (w * libm::exp(w) - x).abs();
            assert!(residual <= 1e-12 * x.abs().max(1.0), "x={x} w={w} residual={residual}");
        }
    }

    #[test]
    fn carrying_capacity_matches_fixed_point_oracle() {
        // mpmath: 98.01725987182215858..., 79.68121300200200461...
        let g4 = carrying_capacity(100, 4, Kernel::Exponential).unwrap();
        let g2 = carrying_capacity(100, 2, Kernel::Exponential).unwrap();
        assert!(close(g4, 98.01725987182216, 1e-10));
        assert!(close(g2, 79.681213002002, 1e-10));
        assert!(close(g4, fixed_point_oracle(100, 4, false), 1e-8));
        assert!(close(g2, fixed_point_oracle(100, 2, false), 1e-8));

        let b4 = carrying_capacity(100, 4, Kernel::Binomial).unwrap();
        assert!(close(b4, 98.05928766717883, 1e-10));
        assert!(close(b4, fixed_point_oracle(100, 4, true), 1e-8));

        let g1000 = carrying_capacity(1000, 4, Kernel::Exponential).unwrap();
        assert!(close(g1000, 10.0 * g4, 1e-9));
    }

    #[test]
    fn carrying_capacity_rejects_unit_fan_out() {
        assert!(matches!(
            carrying_capacity(100, 1, Kernel::Exponential),
            Err(AnalysisError::FanOutTooSmall { min: 2, .. })
        ));
        assert!(carrying_capacity(1, 4, Kernel::Exponential).is_err());
    }

    #[test]
    fn logistic_examples() {
        let k = Kernel::Exponential;
        assert!(close(logistic_bound(0.0, 100, 4, k).unwrap(), 1.0, 1e-12));
        let g = carrying_capacity(100, 4, k).unwrap();
        assert!(close(logistic_bound(1e4, 100, 4, k).unwrap(), g, 1e-9));
        let x3 = logistic_bound(3.0, 100, 4, k).unwrap();
        assert!(x3 <= psi(3, &params(100, 4, 9)).unwrap());
        assert!(logistic_bound(-1.0, 100, 4, k).is_err());
        assert!(logistic_bound(1.0, 100, 1, k).is_err());
    }

    #[test]
    fn expected_digests_examples() {
        assert!(matches!(expected_digests(&params(100, 4, 0)), Err(AnalysisError::ZeroTtl)));
        for f in 1..6 {
            assert_eq!(expected_digests(&params(100, f, 1)).unwrap(), f64::from(f));
        }
        // mpmath: 2146.2981759548901505...
        let m = expected_digests(&params(100, 4, 9)).unwrap();
        assert!(close(m, 2146.29817595489, 1e-8));
        let mb = expected_digests(&params(100, 4, 9).with_kernel(Kernel::Binomial)).unwrap();
        assert!(close(mb, 2151.674464126249, 1e-8));
    }

    #[test]
    fn digest_lower_bound_never_exceeds_sum() {
        for kernel in [Kernel::Exponential, Kernel::Binomial] {
            for f in [2, 4] {
                for ttl in 1..=20 {
                    let p = params(100, f, ttl).with_kernel(kernel);
                    let lb = digests_lower_bound(&p).unwrap();
                    let m = expected_digests(&p).unwrap();
                    assert!(lb <= m, "f={f} ttl={ttl} lb={lb} m={m}");
                }
            }
        }
    }

    #[test]
    fn p_e_bound_examples() {
        assert!(p_e_bound(&params(100, 4, 9)).unwrap() <= 1e-6);
        assert!(p_e_bound(&params(100, 2, 19)).unwrap() <= 1e-6);
        assert!(p_e_bound(&params(100, 4, 12)).unwrap() <= 1e-12);
        // one digest cannot cover 100 peers
        assert_eq!(p_e_bound(&params(100, 1, 1)).unwrap(), 1.0);
    }

    #[test]
    fn min_ttl_examples() {
        assert_eq!(min_ttl(100, 4, 1e-6).unwrap(), 9);
        assert_eq!(min_ttl(100, 2, 1e-6).unwrap(), 19);
        assert_eq!(min_ttl(100, 4, 1e-12).unwrap(), 12);
        // The literal finite-n kernel reaches 1e-6 one round earlier at f_out = 2.
        assert_eq!(min_ttl_with_kernel(100, 4, 1e-6, Kernel::Binomial).unwrap(), 9);
        assert_eq!(min_ttl_with_kernel(100, 2, 1e-6, Kernel::Binomial).unwrap(), 18);
    }

    #[test]
    fn min_ttl_errors() {
        assert!(matches!(min_ttl(100, 1, 1e-6), Err(AnalysisError::FanOutTooSmall { .. })));
        assert!(matches!(min_ttl(100, 4, 0.0), Err(AnalysisError::InvalidTarget(_))));
        assert!(matches!(min_ttl(100, 4, 1.0), Err(AnalysisError::InvalidTarget(_))));
        // the bound underflows to 0 well inside the search range, so even a
        // subnormal target is met
        let deep = min_ttl(100, 2, 1e-320).unwrap();
        assert!(deep > min_ttl(100, 2, 1e-300).unwrap() && deep < MAX_TTL);
    }

    #[test]
    fn round_estimate_is_close_to_min_ttl() {
        for (n, f, pe) in [(100, 4, 1e-6), (100, 2, 1e-6), (100, 4, 1e-12), (1000, 4, 1e-6)] {
            let r = round_estimate(n, f, pe, Kernel::Exponential).unwrap();
            let t = min_ttl(n, f, pe).unwrap();
            assert!((r - f64::from(t)).abs() <= 1.0, "n={n} f={f} r={r} ttl={t}");
        }
    }

    #[test]
    fn ttl_table_lookup() {
        let table = build_ttl_table(&[
            TtlRequest { n: 1000, p_e_target: 1e-6, f_out: 4 },
            TtlRequest { n: 100, p_e_target: 1e-6, f_out: 4 },
        ])
        .unwrap();
        assert_eq!(table.entries()[0].n, 100);
        assert_eq!(table.lookup(100).unwrap().ttl, 9);
        assert_eq!(table.lookup(100).unwrap(), &table.entries()[0]);
        assert_eq!(table.lookup(350).unwrap().n, 1000);
        assert_eq!(table.lookup(350).unwrap().ttl, min_ttl(1000, 4, 1e-6).unwrap());
        assert!(matches!(table.lookup(5000), Err(AnalysisError::NoTableEntry { n: 5000, max: 1000 })));
        assert!(table.lookup_target(100, 1e-12).is_err());
        assert!(build_ttl_table(&[]).is_err());
        assert!(build_ttl_table(&[TtlRequest { n: 100, p_e_target: 2.0, f_out: 4 }]).is_err());
    }

    #[test]
    fn analyze_report_shape() {
        let r = analyze(&params(100, 4, 9)).unwrap();
        assert_eq!(r.psi_trajectory.len(), 10);
        assert!(r.p_e_bound <= 1e-6);
        assert!(r.digests_lower_bound <= r.expected_digests);
        assert!(r.psi_trajectory.iter().all(|&v| v <= r.gamma + 1e-9));
    }

    proptest! {
        #[test]
        // f = 1 is subcritical (φ(1) ≤ 1), where ψ decays instead
        fn psi_monotone_and_bounded(n in 2u32..10_000, f in 2u32..9, binomial: bool) {
            let kernel = if binomial { Kernel::Binomial } else { Kernel::Exponential };
            let p = params(n, f, 0).with_kernel(kernel);
            let traj = psi_trajectory(60, &p).unwrap();
            for w in traj.windows(2) {
                prop_assert!(w[1] >= w[0]);
            }
            prop_assert!(traj.iter().all(|&v| v <= f64::from(n)));
        }

        #[test]
        fn fixed_point_holds(n in 10u32..=10_000, f in 2u32..=8, binomial: bool) {
            let kernel = if binomial { Kernel::Binomial } else { Kernel::Exponential };
            let p = params(n, f, 0).with_kernel(kernel);
            let g = carrying_capacity(n, f, kernel).unwrap();
            prop_assert!(g > 0.0 && g < f64::from(n));
            prop_assert!((phi(g, &p).unwrap() - g).abs() < 1e-9);
        }

        #[test]
        fn psi_dominates_logistic(n in 2u32..=10_000, f in 2u32..=8, r in 0u32..60) {
            let p = params(n, f, 0);
            let x = logistic_bound(f64::from(r), n, f, Kernel::Exponential).unwrap();
            prop_assert!(psi(r, &p).unwrap() >= x - 1e-9 * x);
        }

        #[test]
        fn p_e_monotone(n in 2u32..2000, f in 1u32..8, ttl in 1u32..40) {
            let here = p_e_bound(&params(n, f, ttl)).unwrap();
            prop_assert!(p_e_bound(&params(n, f, ttl + 1)).unwrap() <= here);
            prop_assert!(p_e_bound(&params(n, f + 1, ttl)).unwrap() <= here);
            prop_assert!((0.0..=1.0).contains(&here));
        }

        #[test]
        fn min_ttl_is_minimal(n in 10u32..3000, f in 2u32..8, exp in 1i32..13) {
            let target = libm::pow(10.0, -f64::from(exp));
            let t = min_ttl(n, f, target).unwrap();
            prop_assert!(p_e_bound(&params(n, f, t)).unwrap() <= target);
            if t > 1 {
                prop_assert!(p_e_bound(&params(n, f, t - 1)).unwrap() > target);
            }
        }
    }
}
