use super::{Minutia, MinutiaeList};
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

/// One `x y direction score` line per minutia, two decimals each.
pub fn format_minutiae(list: &[Minutia]) -> String {
    let mut s = String::new();
    for m in list {
        let mut dir = format!("{:.2}", m.direction);
        if dir == "360.00" {
            dir = "0.00".into();
        }
        writeln!(s, "{:.2} {:.2} {} {:.2}", m.x, m.y, dir, m.score).unwrap();
    }
    s
}

/// Parses the minutiae format; blank lines and `#` comments are skipped.
pub fn parse_minutiae(text: &str, source_name: &str) -> Result<MinutiaeList> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::parse(source_name, i + 1, format!("expected 4 fields, found {}", fields.len())));
        }
        let mut v = [0.0f64; 4];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::parse(source_name, i + 1, format!("bad number {f:?}")))?;
        }
        if !(0.0..360.0).contains(&v[2]) {
            return Err(Error::parse(source_name, i + 1, format!("direction {} outside [0, 360)", v[2])));
        }
        out.push(Minutia {
            x: v[0],
            y: v[1],
            direction: v[2],
            score: v[3],
        });
    }
    Ok(out)
}

pub fn read_minutiae(path: impl AsRef<Path>) -> Result<MinutiaeList> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_minutiae(&text, &path.display().to_string())
}

pub fn write_minutiae(path: impl AsRef<Path>, list: &[Minutia]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_minutiae(list)).map_err(|e| Error::io(path, e))
}
