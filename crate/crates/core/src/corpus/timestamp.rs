use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed timestamp `{0}` (expected [m:ss] or [h:mm:ss])")]
pub struct BadTimestamp(pub String);

/// Parses `[mm:ss]` / `[h:mm:ss]` stamps into elapsed seconds. Brackets are
/// optional; minutes in the two-field form may exceed 59.
pub fn parse_timestamp(stamp: &str) -> Result<f64, BadTimestamp> {
    let bad = || BadTimestamp(stamp.to_string());
    let trimmed = stamp.trim();
    let inner = match (trimmed.strip_prefix('['), trimmed.strip_suffix(']')) {
        (Some(_), Some(_)) => &trimmed[1..trimmed.len() - 1],
        (None, None) => trimmed,
        _ => return Err(bad()),
    };
    let fields: Vec<&str> = inner.split(':').collect();
    let number = |s: &str, exact_two: bool| -> Result<u64, BadTimestamp> {
        if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) || (exact_two && s.len() != 2) {
            return Err(bad());
        }
        s.parse().map_err(|_| bad())
    };
    let seconds = match fields.as_slice() {
        [m, s] => {
            let (m, s) = (number(m, false)?, number(s, true)?);
            if s >= 60 {
                return Err(bad());
            }
            m * 60 + s
        }
        [h, m, s] => {
            let (h, m, s) = (number(h, false)?, number(m, true)?, number(s, true)?);
            if m >= 60 || s >= 60 {
                return Err(bad());
            }
            h * 3600 + m * 60 + s
        }
        _ => return Err(bad()),
    };
    Ok(seconds as f64)
}

/// Renders elapsed seconds as `[mm:ss]`, truncating fractions.
pub fn format_timestamp(seconds: f64) -> String {
    let total = seconds.max(0.0).floor() as u64;
    format!("[{:02}:{:02}]", total / 60, total % 60)
}
