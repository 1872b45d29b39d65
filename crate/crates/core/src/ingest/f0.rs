//! F0 text format:
//!
//! ```text
//! #sr=24000 hop=256
//! 0
//! 220.0
//! ```
//!
//! One value in Hz per frame, `0` for unvoiced frames.

use std::fmt::Write as _;
use std::path::Path;

use crate::domain::{F0Contour, FrameGrid};
use crate::error::{Error, Result};
use crate::fsutil;

fn parse_header(line: &str) -> Result<FrameGrid> {
    let bad = || {
        Error::Format(format!(
            "expected header `#sr=<int> hop=<int>`, found {line:?}"
        ))
    };
    let mut tokens = line.split_whitespace();
    let sr = tokens
        .next()
        .and_then(|t| t.strip_prefix("#sr="))
        .and_then(|v| v.parse::<u32>().ok())
        .ok_or_else(bad)?;
    let hop = tokens
        .next()
        .and_then(|t| t.strip_prefix("hop="))
        .and_then(|v| v.parse::<u32>().ok())
        .ok_or_else(bad)?;
    if tokens.next().is_some() {
        return Err(bad());
    }
    FrameGrid::new(sr, hop)
}

pub fn parse_f0(text: &str) -> Result<F0Contour> {
    let mut lines = text.split('\n').enumerate();
    let header = lines
        .next()
        .map(|(_, l)| l.strip_suffix('\r').unwrap_or(l))
        .filter(|l| l.starts_with('#'))
        .ok_or_else(|| Error::Format("missing `#sr=<int> hop=<int>` header".into()))?;
    let grid = parse_header(header)?;
    let nyquist = grid.nyquist();

    let mut values = Vec::new();
    for (i, raw) in lines {
        let field = raw.trim();
        if field.is_empty() {
            continue;
        }
        let line = i + 1;
        let v: f64 = field
            .parse()
            .map_err(|_| Error::parse(line, format!("{field:?} is not a decimal number")))?;
        if !v.is_finite() || v < 0.0 {
            return Err(Error::invalid(format!(
                "f0 value {field} at line {line} must be finite and >= 0"
            )));
        }
        if v >= nyquist {
            return Err(Error::invalid(format!(
                "f0 value {field} at line {line} is at or above Nyquist ({nyquist} Hz)"
            )));
        }
        values.push(v);
    }
    F0Contour::from_values(values, grid)
}

/// Formats `v` with nine significant digits in plain decimal notation.
fn format_hz(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let exponent = v.abs().log10().floor() as i32;
    let decimals = (8 - exponent).max(1) as usize;
    let mut s = format!("{v:.decimals$}");
    let trimmed = s.trim_end_matches('0').len();
    s.truncate(trimmed);
    if s.ends_with('.') {
        s.push('0');
    }
    s
}

pub fn format_f0(contour: &F0Contour) -> String {
    let grid = contour.grid();
    let mut out = String::with_capacity(contour.len() * 12 + 24);
    let _ = writeln!(out, "#sr={} hop={}", grid.sample_rate(), grid.hop());
    for &v in contour.values() {
        out.push_str(&format_hz(v));
        out.push('\n');
    }
    out
}

pub fn read_f0(path: &Path) -> Result<F0Contour> {
    parse_f0(&fsutil::read_text(path)?)
}

pub fn write_f0(path: &Path, contour: &F0Contour) -> Result<()> {
    fsutil::write_atomic(path, format_f0(contour).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::ErrorClass;

    #[test]
    fn two_frames() {
        let c = parse_f0("#sr=24000 hop=256\n0\n220.0").unwrap();
        assert_eq!(c.values(), &[0.0, 220.0]);
        assert_eq!(c.voiced(), &[false, true]);
        assert_eq!(c.grid(), FrameGrid::new(24000, 256).unwrap());
    }

    #[test]
    fn missing_header() {
        let err = parse_f0("0\n220.0\n").unwrap_err();
        assert!(matches!(err, Error::Format(_)));
        assert!(parse_f0("").is_err());
        assert!(parse_f0("#sr=24000\n1\n").is_err());
        assert!(parse_f0("#sr=24000 hop=0\n").is_err());
        assert!(parse_f0("#sr=24000 hop=256 extra\n").is_err());
    }

    #[test]
    fn rejects_bad_values() {
        for body in ["-1", "inf", "NaN", "12000"] {
            let err = parse_f0(&format!("#sr=24000 hop=256\n{body}\n")).unwrap_err();
            assert_eq!(err.class(), ErrorClass::Validation, "{body}: {err}");
        }
        assert!(matches!(
            parse_f0("#sr=24000 hop=256\n1\nabc\n").unwrap_err(),
            Error::Parse { line: 3, .. }
        ));
    }

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_hz(220.0), "220.0");
        assert_eq!(format_hz(261.625_565_300_598_6), "261.625565");
        assert_eq!(format_hz(1.234_567_891_23), "1.23456789");
        assert_eq!(format_hz(0.0), "0");
    }

    #[test]
    fn empty_contour_roundtrip() {
        let c = F0Contour::from_values(vec![], FrameGrid::default()).unwrap();
        assert_eq!(format_f0(&c), "#sr=24000 hop=256\n");
        assert_eq!(parse_f0(&format_f0(&c)).unwrap(), c);
    }
}
