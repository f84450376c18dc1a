//! Statistical battery for bit streams.
//!
//! Simplified versions of the frequency (monobit) and runs tests from
//! NIST SP 800-22, a byte-level chi-square goodness-of-fit test, and a
//! lagged serial-correlation test.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;
use thiserror::Error;

pub const MIN_MONOBIT_BITS: usize = 100;
pub const MIN_RUNS_BITS: usize = 100;
pub const MIN_CHI_SQUARE_BITS: usize = 256 * 8 * 10;
pub const MIN_SERIAL_BITS: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RandTestError {
    #[error("{test} needs at least {min} bits, got {got}")]
    TooFewBits { test: &'static str, min: usize, got: usize },
    #[error("runs test skipped: monobit precondition failed (p = {0})")]
    GatePrecondition(f64),
    #[error("lag {lag} invalid for {n} bits (need 1 <= lag < n/10)")]
    BadLag { lag: usize, n: usize },
}

/// Acceptance levels for the battery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    /// Monobit and runs tests.
    pub bit_tests: f64,
    pub chi_square: f64,
    /// Serial correlation passes when `|r| < serial_sigmas / √n`.
    pub serial_sigmas: f64,
}

impl Default for Significance {
    fn default() -> Self {
        Self { bit_tests: 0.01, chi_square: 0.001, serial_sigmas: 4.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    /// Short machine id (`monobit`, `runs`, `chi_square_bytes`, `serial_correlation`).
    pub id: String,
    pub test_name: String,
    pub statistic: f64,
    pub p_value: f64,
    pub pass: bool,
    pub n: usize,
}

impl TestReport {
    fn new(id: &str, test_name: &str, statistic: f64, p_value: f64, alpha: f64, n: usize) -> Self {
        let p_value = if p_value.is_nan() { 0.0 } else { p_value.clamp(0.0, 1.0) };
        Self { id: id.to_string(), test_name: test_name.to_string(), statistic, p_value, pass: p_value >= alpha, n }
    }
}

fn require(test: &'static str, min: usize, got: usize) -> Result<(), RandTestError> {
    if got < min {
        Err(RandTestError::TooFewBits { test, min, got })
    } else {
        Ok(())
    }
}

fn ones(bits: &[u8]) -> usize {
    bits.iter().filter(|&&b| b == 1).count()
}

/// Frequency test: `s_obs = |Σ(2b−1)|/√n`, `p = erfc(s_obs/√2)`.
pub fn monobit_frequency(bits: &[u8], sig: &Significance) -> Result<TestReport, RandTestError> {
    let n = bits.len();
    require("monobit", MIN_MONOBIT_BITS, n)?;
    let sum = 2 * ones(bits) as i64 - n as i64;
    let s_obs = (sum.unsigned_abs() as f64) / (n as f64).sqrt();
    let p = erfc(s_obs / std::f64::consts::SQRT_2);
    Ok(TestReport::new("monobit", "Frequency (monobit)", s_obs, p, sig.bit_tests, n))
}

/// Number of maximal runs of identical bits.
pub fn count_runs(bits: &[u8]) -> usize {
    if bits.is_empty() {
        return 0;
    }
    1 + bits.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Runs test, gated on the monobit test passing.
pub fn runs_test(bits: &[u8], sig: &Significance) -> Result<TestReport, RandTestError> {
    let n = bits.len();
    require("runs", MIN_RUNS_BITS, n)?;
    let gate = monobit_frequency(bits, sig)?;
    if !gate.pass {
        return Err(RandTestError::GatePrecondition(gate.p_value));
    }
    let nf = n as f64;
    let pi = ones(bits) as f64 / nf;
    let v = count_runs(bits) as f64;
    let spread = pi * (1.0 - pi);
    let p = erfc((v - 2.0 * nf * spread).abs() / (2.0 * (2.0 * nf).sqrt() * spread));
    Ok(TestReport::new("runs", "Runs", v, p, sig.bit_tests, n))
}

/// Histogram of non-overlapping MSB-first bytes against a uniform 256-bin law.
pub fn chi_square_bytes(bits: &[u8], sig: &Significance) -> Result<TestReport, RandTestError> {
    let n = bits.len();
    require("chi_square_bytes", MIN_CHI_SQUARE_BITS, n)?;
    let mut counts = [0u64; 256];
    for chunk in bits.chunks_exact(8) {
        let byte = chunk.iter().fold(0usize, |acc, &b| (acc << 1) | usize::from(b));
        counts[byte] += 1;
    }
    let expected = (n / 8) as f64 / 256.0;
    let chi2: f64 = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    let dist = ChiSquared::new(255.0).expect("255 degrees of freedom");
    let p = dist.sf(chi2);
    Ok(TestReport::new("chi_square_bytes", "Chi-square (bytes)", chi2, p, sig.chi_square, n))
}

/// Pearson correlation between the stream and itself shifted by `lag`.
/// A constant stream (zero variance) fails with a NaN statistic.
pub fn serial_correlation(bits: &[u8], lag: usize, sig: &Significance) -> Result<TestReport, RandTestError> {
    let n = bits.len();
    require("serial_correlation", MIN_SERIAL_BITS, n)?;
    if lag == 0 || lag * 10 >= n {
        return Err(RandTestError::BadLag { lag, n });
    }
    let x = &bits[..n - lag];
    let y = &bits[lag..];
    let m = x.len() as f64;
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (a, b) = (f64::from(a), f64::from(b));
        sx += a;
        sy += b;
        sxx += a * a;
        syy += b * b;
        sxy += a * b;
    }
    let cov = sxy - sx * sy / m;
    let vx = sxx - sx * sx / m;
    let vy = syy - sy * sy / m;
    let name = "Serial correlation";
    if vx <= 0.0 || vy <= 0.0 {
        let mut r = TestReport::new("serial_correlation", name, f64::NAN, 0.0, 1.0, n);
        r.pass = false;
        return Ok(r);
    }
    let r = cov / (vx * vy).sqrt();
    // Under independence r·√n is approximately standard normal, so the
    // |r| < k/√n rule is the two-sided normal test at p = erfc(k/√2).
    let z = r.abs() * (n as f64).sqrt();
    let p = erfc(z / std::f64::consts::SQRT_2);
    let mut report = TestReport::new("serial_correlation", name, r, p, 0.0, n);
    report.pass = r.abs() < sig.serial_sigmas / (n as f64).sqrt();
    Ok(report)
}

/// Runs all four tests. Precondition failures of individual tests become
/// failing rows rather than errors; too-short input is an error.
pub fn run_battery(bits: &[u8], sig: &Significance) -> Result<Vec<TestReport>, RandTestError> {
    let n = bits.len();
    require("battery", MIN_CHI_SQUARE_BITS.max(MIN_SERIAL_BITS), n)?;
    let runs = match runs_test(bits, sig) {
        Ok(r) => r,
        Err(RandTestError::GatePrecondition(_)) => {
            let mut r = TestReport::new("runs", "Runs", f64::NAN, 0.0, 1.0, n);
            r.pass = false;
            r
        }
        Err(e) => return Err(e),
    };
    Ok(vec![monobit_frequency(bits, sig)?, runs, chi_square_bytes(bits, sig)?, serial_correlation(bits, 1, sig)?])
}

pub const CSV_HEADER: &str = "test,name,n,statistic,p,pass";

pub fn reports_to_csv(reports: &[TestReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        let _ = writeln!(out, "{},{},{},{},{},{}", r.id, r.test_name, r.n, r.statistic, r.p_value, r.pass);
    }
    out
}
