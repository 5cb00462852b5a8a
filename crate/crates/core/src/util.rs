//! Small numeric and formatting helpers shared across modules.

use sha2::{Digest, Sha256};

/// Neumaier-compensated summation. Keeps the running error term so that
/// long mixed-magnitude sums (state probabilities, MGF terms) stay accurate.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Fixed locale-independent scientific formatting, 6 significant digits.
/// All CSV numeric output goes through here so reruns are byte-identical.
pub fn fmt_sci(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    format!("{:.5e}", x)
}

/// Hex-encoded SHA-256 of raw bytes (fingerprints, output digests).
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{:02x}", b));
    }
    out
}
