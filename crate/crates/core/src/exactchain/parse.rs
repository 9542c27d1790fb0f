use super::QMatrix;
use crate::error::{Error, Result};

/// Row sums larger than this in magnitude are rejected by the file reader.
pub const FILE_ROW_SUM_TOL: f64 = 1e-9;

/// Reads a generator in the plain-text layout: a line with the number of
/// states `s`, then `s` rows of `s` whitespace-separated rates, then an
/// optional line of `s` labels. Blank lines are ignored.
///
/// Rows within the tolerance have their diagonal reset to minus the exit
/// rate so the returned generator conserves mass exactly.
pub fn parse_qmatrix(text: &str) -> Result<QMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (first, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty file".into() })?;
    let s: usize = header.parse().map_err(|_| Error::Parse {
        line: first,
        msg: format!("expected the number of states, got {header:?}"),
    })?;
    if s < 2 {
        return Err(Error::Parse { line: first, msg: format!("need at least 2 states, got {s}") });
    }

    let mut rows = Vec::with_capacity(s);
    let mut last_line = first;
    for r in 0..s {
        let (line, text) = lines.next().ok_or(Error::Parse {
            line: last_line + 1,
            msg: format!("missing generator row {} of {s}", r + 1),
        })?;
        last_line = line;
        let row = parse_reals(text, s, line)?;
        for (j, v) in row.iter().enumerate() {
            if j != r && *v < 0.0 {
                return Err(Error::Parse { line, msg: format!("negative off-diagonal rate {v} in column {}", j + 1) });
            }
        }
        let sum: f64 = row.iter().sum();
        if sum.abs() > FILE_ROW_SUM_TOL {
            return Err(Error::Parse { line, msg: format!("row sums to {sum:e}, expected 0") });
        }
        rows.push(row);
    }

    let labels = match lines.next() {
        Some((line, text)) => {
            let labels = parse_reals(text, s, line)?;
            if labels.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Parse { line, msg: "labels must be strictly increasing".into() });
            }
            Some(labels)
        }
        None => None,
    };
    if let Some((line, _)) = lines.next() {
        return Err(Error::Parse { line, msg: "unexpected trailing content".into() });
    }

    QMatrix::from_off_diagonal(rows, labels).map_err(|e| Error::Parse { line: first, msg: e.to_string() })
}

fn parse_reals(text: &str, s: usize, line: usize) -> Result<Vec<f64>> {
    let vals = text
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse { line, msg: format!("not a finite number: {tok:?}") })
        })
        .collect::<Result<Vec<f64>>>()?;
    if vals.len() != s {
        return Err(Error::Parse { line, msg: format!("expected {s} values, found {}", vals.len()) });
    }
    Ok(vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactchain::counterexample_generator;

    const COUNTEREXAMPLE: &str = "3\n-2.5 1.75 0.75\n1.5 -2.5 1\n0.5 0 -0.5\n";

    #[test]
    fn parses_counterexample() {
        assert_eq!(parse_qmatrix(COUNTEREXAMPLE).unwrap(), counterexample_generator());
    }

    #[test]
    fn parses_labels() {
        let q = parse_qmatrix("2\n-1 1\n2 -2\n\n-3.5 7\n").unwrap();
        assert_eq!(q.labels(), &[-3.5, 7.0]);
    }

    fn line_of(text: &str) -> usize {
        match parse_qmatrix(text) {
            Err(Error::Parse { line, .. }) => line,
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn line_numbered_errors() {
        assert_eq!(line_of(""), 1);
        assert_eq!(line_of("x\n"), 1);
        assert_eq!(line_of("3\n-2.5 1.75 0.75\n1.5 -2.5 1.1\n0.5 0 -0.5\n"), 3);
        assert_eq!(line_of("3\n-2.5 1.75 0.75\n1.5 -2.5\n"), 3);
        assert_eq!(line_of("3\n-2.5 1.75 0.75\n1.5 -2.5 1\n"), 4);
        assert_eq!(line_of("2\n-1 1\n-1 1\n"), 3);
        assert_eq!(line_of("2\n-1 1\n1 -1\n0 0\n"), 4);
        assert_eq!(line_of("2\n-1 1\n1 -1\n0 1\nextra\n"), 5);
        assert_eq!(line_of("2\n-1 1\n1 nan\n"), 3);
    }

    #[test]
    fn small_row_sum_noise_is_absorbed() {
        let q = parse_qmatrix("2\n-1 1.0000000001\n1 -1\n").unwrap();
        assert_eq!(q.rate(0, 0), -1.0000000001);
    }
}
