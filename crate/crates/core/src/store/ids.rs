use std::sync::Mutex;

use chrono::Utc;
use rand::Rng;

/// Lexically sortable ids: 12 hex digits of Unix milliseconds, 4 hex digits
/// of a per-millisecond sequence, and 6 random hex digits. Ids from one
/// generator strictly increase.
#[derive(Debug, Default)]
pub(crate) struct IdGen {
    last: Mutex<(u64, u32)>,
}

impl IdGen {
    /// Start after the largest existing id so reopened stores stay ordered.
    pub(crate) fn after<'a>(existing: impl IntoIterator<Item = &'a str>) -> Self {
        let last = existing.into_iter().filter_map(parse_prefix).max().unwrap_or((0, 0));
        Self { last: Mutex::new(last) }
    }

    pub(crate) fn next(&self) -> String {
        let now = u64::try_from(Utc::now().timestamp_millis()).unwrap_or(0);
        let mut last = self.last.lock().expect("id generator poisoned");
        let (ms, seq) = if now > last.0 {
            (now, 0)
        } else if last.1 < 0xffff {
            (last.0, last.1 + 1)
        } else {
            (last.0 + 1, 0)
        };
        *last = (ms, seq);
        let suffix: u32 = rand::rng().random_range(0..0x100_0000);
        format!("{ms:012x}{seq:04x}{suffix:06x}")
    }
}

fn parse_prefix(id: &str) -> Option<(u64, u32)> {
    if id.len() != 22 {
        return None;
    }
    let ms = u64::from_str_radix(id.get(..12)?, 16).ok()?;
    let seq = u32::from_str_radix(id.get(12..16)?, 16).ok()?;
    Some((ms, seq))
}

/// Ids and category names become file names and URL segments.
pub(crate) fn is_valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_' || b == b'.')
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strictly_increasing() {
        let g = IdGen::default();
        let ids: Vec<String> = (0..2000).map(|_| g.next()).collect();
        assert!(ids.windows(2).all(|w| w[0] < w[1]));
        assert!(ids.iter().all(|i| i.len() == 22 && is_valid_id(i)));
    }

    #[test]
    fn resumes_after_existing() {
        let far = "ffffffffff000000000000";
        let g = IdGen::after([far]);
        assert!(g.next().as_str() > far);
    }

    #[test]
    fn id_charset() {
        assert!(is_valid_id("shoes_2024-b"));
        assert!(!is_valid_id(""));
        assert!(!is_valid_id("../etc"));
        assert!(!is_valid_id("a/b"));
        assert!(!is_valid_id(".hidden"));
    }
}
