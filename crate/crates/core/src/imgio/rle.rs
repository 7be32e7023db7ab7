//! Plain-text run-length form of a [`BinaryMask`].
//!
//! Runs are whitespace-separated counts in row-major order, alternating
//! background/foreground and always starting with background (so a mask whose
//! first pixel is foreground begins with `0`).

use super::{BinaryMask, ImgioError};

/// Canonical encoding: leading background run (possibly `0`), no zero-length
/// runs after it, no trailing zero run.
pub fn encode_rle(mask: &BinaryMask) -> String {
    let mut runs: Vec<usize> = Vec::new();
    let mut current = false;
    let mut count = 0usize;
    for &bit in mask.bits() {
        if bit != current {
            runs.push(count);
            count = 0;
            current = bit;
        }
        count += 1;
    }
    runs.push(count);
    let parts: Vec<String> = runs.iter().map(usize::to_string).collect();
    parts.join(" ")
}

pub fn decode_rle(text: &str, width: usize, height: usize) -> Result<BinaryMask, ImgioError> {
    let total = width
        .checked_mul(height)
        .ok_or_else(|| ImgioError::Dimension("mask too large".into()))?;
    let mut data = Vec::with_capacity(total);
    let mut value = false;
    for token in text.split_whitespace() {
        let run: usize = token
            .parse()
            .map_err(|_| ImgioError::Format(format!("invalid run length {token:?}")))?;
        if data.len() + run > total {
            return Err(ImgioError::Format(format!(
                "runs exceed {width}x{height}={total} pixels"
            )));
        }
        data.extend(std::iter::repeat_n(value, run));
        value = !value;
    }
    if data.len() != total {
        return Err(ImgioError::Format(format!(
            "runs sum to {}, expected {total}",
            data.len()
        )));
    }
    BinaryMask::from_bits(width, height, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Reference canonicalizer written against the run semantics directly:
    /// expand to bits, then re-run-length with a separate loop.
    fn canonical(text: &str) -> String {
        let mut bits = Vec::new();
        let mut v = false;
        for t in text.split_whitespace() {
            let n: usize = t.parse().unwrap();
            bits.extend(std::iter::repeat_n(v, n));
            v = !v;
        }
        let mut out = vec![];
        let mut i = 0;
        let mut want = false;
        while i < bits.len() {
            let start = i;
            while i < bits.len() && bits[i] == want {
                i += 1;
            }
            out.push(i - start);
            want = !want;
        }
        if out.is_empty() {
            out.push(0);
        }
        out.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn single_foreground_run() {
        let m = decode_rle("0 4", 2, 2).unwrap();
        assert_eq!(m.foreground_count(), 4);
    }

    #[test]
    fn trailing_zero_run_is_background() {
        let m = decode_rle("4 0", 2, 2).unwrap();
        assert!(m.is_blank());
        assert_eq!(encode_rle(&m), "4");
    }

    #[test]
    fn sum_mismatch_is_format_error() {
        assert!(matches!(decode_rle("1 2", 2, 2), Err(ImgioError::Format(_))));
        assert!(matches!(decode_rle("3 3", 2, 2), Err(ImgioError::Format(_))));
        assert!(matches!(decode_rle("a", 2, 2), Err(ImgioError::Format(_))));
    }

    proptest! {
        #[test]
        fn decode_encode_roundtrip(w in 1usize..24, h in 1usize..24, seed in any::<u64>()) {
            let mut s = seed | 1;
            let m = BinaryMask::from_fn(w, h, |_, _| {
                s ^= s << 13; s ^= s >> 7; s ^= s << 17;
                s % 3 == 0
            }).unwrap();
            prop_assert_eq!(decode_rle(&encode_rle(&m), w, h).unwrap(), m);
        }

        #[test]
        fn encode_decode_is_canonical(runs in proptest::collection::vec(0usize..6, 1..12)) {
            let total: usize = runs.iter().sum();
            prop_assume!(total > 0);
            let text = runs.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" ");
            let m = decode_rle(&text, total, 1).unwrap();
            prop_assert_eq!(encode_rle(&m), canonical(&text));
        }
    }
}
