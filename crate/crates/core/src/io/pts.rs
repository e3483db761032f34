//! The IBUG-style `.pts` landmark container:
//!
//! ```text
//! version: 1
//! n_points: 3
//! {
//! 10.5 20
//! 11 21.25
//! 12 22
//! }
//! ```
//!
//! Blank lines and surrounding whitespace are ignored. Coordinates are raw
//! pixel positions as written.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Point;

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn header_value<'a>(path: &Path, line: usize, text: &'a str, key: &str) -> Result<&'a str> {
    let (k, v) = text
        .split_once(':')
        .ok_or_else(|| parse_error(path, line, format!("expected `{key}: ...`, found `{text}`")))?;
    if k.trim() != key {
        return Err(parse_error(
            path,
            line,
            format!("expected `{key}`, found `{}`", k.trim()),
        ));
    }
    Ok(v.trim())
}

/// Parses pts text; `path` only labels errors.
pub fn parse_pts(text: &str, path: &Path) -> Result<Vec<Point>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let mut next = |what: &str| {
        lines.next().ok_or_else(|| {
            parse_error(
                path,
                text.lines().count().max(1),
                format!("unexpected end of file, expected {what}"),
            )
        })
    };

    let (ln, l) = next("`version: 1`")?;
    let version = header_value(path, ln, l, "version")?;
    if version != "1" {
        return Err(parse_error(path, ln, format!("unsupported version `{version}`")));
    }
    let (ln, l) = next("`n_points: N`")?;
    let declared: usize = header_value(path, ln, l, "n_points")?
        .parse()
        .map_err(|_| parse_error(path, ln, format!("invalid point count in `{l}`")))?;
    let (ln, l) = next("`{`")?;
    if l != "{" {
        return Err(parse_error(path, ln, format!("expected `{{`, found `{l}`")));
    }

    let mut points = Vec::with_capacity(declared);
    loop {
        let (ln, l) = next("`}`")?;
        if l == "}" {
            break;
        }
        let mut fields = l.split_whitespace();
        let mut coord = || -> Result<f64> {
            let f = fields
                .next()
                .ok_or_else(|| parse_error(path, ln, format!("expected `x y`, found `{l}`")))?;
            let v: f64 = f
                .parse()
                .map_err(|_| parse_error(path, ln, format!("invalid coordinate `{f}`")))?;
            if !v.is_finite() {
                return Err(parse_error(path, ln, format!("non-finite coordinate `{f}`")));
            }
            Ok(v)
        };
        let p = [coord()?, coord()?];
        if fields.next().is_some() {
            return Err(parse_error(path, ln, format!("expected two coordinates, found `{l}`")));
        }
        points.push(p);
    }
    if let Some((ln, l)) = lines.next() {
        return Err(parse_error(path, ln, format!("unexpected `{l}` after `}}`")));
    }
    if points.len() != declared {
        return Err(Error::CountMismatch {
            path: path.to_path_buf(),
            declared,
            found: points.len(),
        });
    }
    Ok(points)
}

pub fn load_pts(path: &Path) -> Result<Vec<Point>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pts(&text, path)
}

/// Canonical text form. Coordinates use the shortest representation that
/// parses back to the same `f64`.
pub fn format_pts(points: &[Point]) -> Result<String> {
    let mut s = format!("version: 1\nn_points: {}\n{{\n", points.len());
    for p in points {
        if !(p[0].is_finite() && p[1].is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite landmark {p:?}")));
        }
        let _ = writeln!(s, "{} {}", p[0], p[1]);
    }
    s.push_str("}\n");
    Ok(s)
}

pub fn write_pts(path: &Path, points: &[Point]) -> Result<()> {
    fs::write(path, format_pts(points)?).map_err(|e| Error::io(path, e))
}
