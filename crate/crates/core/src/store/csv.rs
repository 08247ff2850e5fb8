//! Headerless comma-separated matrices: one matrix row per line.

use crate::error::{Error, Result};

pub fn parse(text: &str) -> Result<(usize, usize, Vec<f64>)> {
    let mut data = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    let mut offset = 0;
    for (lineno, line) in text.split_inclusive('\n').enumerate() {
        let line_start = offset;
        offset += line.len();
        let body = line.trim_end_matches(['\n', '\r']);
        if body.trim().is_empty() {
            continue;
        }
        let mut n = 0;
        let mut field_start = line_start;
        for field in body.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::format(
                    field_start,
                    format!("line {}: cannot parse {:?} as a number", lineno + 1, field.trim()),
                )
            })?;
            data.push(v);
            n += 1;
            field_start += field.len() + 1;
        }
        match cols {
            None => cols = Some(n),
            Some(c) if c != n => {
                return Err(Error::format(
                    line_start,
                    format!("line {}: expected {c} fields, found {n}", lineno + 1),
                ))
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::format(0, "CSV contains no rows"))?;
    Ok((rows, cols, data))
}

pub fn render(rows: usize, cols: usize, data: &[f64]) -> String {
    let mut out = String::new();
    for r in 0..rows {
        let line: Vec<String> = data[r * cols..(r + 1) * cols]
            .iter()
            .map(|v| format!("{v:?}"))
            .collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_simple_matrix() {
        let (r, c, d) = parse("1.0,-0.5\n0.25,0.0").unwrap();
        assert_eq!((r, c), (2, 2));
        assert_eq!(d, vec![1.0, -0.5, 0.25, 0.0]);
    }

    #[test]
    fn tolerates_crlf_and_trailing_blank_lines() {
        let (r, c, _) = parse("1, 2\r\n3 ,4\r\n\n").unwrap();
        assert_eq!((r, c), (2, 2));
    }

    #[test]
    fn reports_bad_field_offset() {
        match parse("1,2\n3,x\n") {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 6),
            other => panic!("{other:?}"),
        }
        assert!(parse("1,2\n3\n").is_err());
        assert!(parse("\n\n").is_err());
    }

    #[test]
    fn render_round_trips_exactly() {
        let d = [0.1, -1.0 / 3.0, 1e-300, 12345.678];
        let (_, _, back) = parse(&render(2, 2, &d)).unwrap();
        assert_eq!(back, d);
    }
}
