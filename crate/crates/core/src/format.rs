//! Plain-text file formats.
//!
//! Matrix files (`prmat`):
//!
//! ```text
//! # optional comments
//! prmat 2 3
//! 1 0 0.5
//! -2 3.25 1e-3
//! ```
//!
//! Instance files are `key value` lines followed by the basis, either inline
//! (a bare `basis` line, then a prmat block) or by reference
//! (`basis path/to/file.prmat`, relative to the instance file):
//!
//! ```text
//! # carascale instance
//! n 4
//! m 2
//! seed 7
//! generator_id primal_feasible/v1
//! witness_tag PrimalInterior
//! witness 0.5 0.25 0.75 1
//! basis
//! prmat 4 2
//! ...
//! ```
//!
//! `witness_tag none` (and no `witness` line) marks an instance without a
//! witness. Numbers are written with 17 significant digits so parsing a
//! rendered file restores every entry exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::instance::{Instance, Witness, WitnessTag};
use crate::linalg::{DenseMatrix, DenseVector};

/// Formats `v` with 17 significant digits.
pub fn render_number(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_number(token: &str, line: usize) -> Result<f64> {
    let v: f64 = token.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid number `{token}`"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("non-finite number `{token}`"),
        });
    }
    Ok(v)
}

fn render_row(out: &mut String, row: &[f64]) {
    for (i, v) in row.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&render_number(*v));
    }
    out.push('\n');
}

pub fn render_matrix(m: &DenseMatrix) -> String {
    let mut out = format!("prmat {} {}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        render_row(&mut out, m.row(i));
    }
    out
}

/// Non-comment, non-blank lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_matrix_lines<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>) -> Result<DenseMatrix> {
    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 0,
        message: "missing prmat header".into(),
    })?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 || fields[0] != "prmat" {
        return Err(Error::Parse {
            line: hline,
            message: format!("expected `prmat <rows> <cols>`, found `{header}`"),
        });
    }
    let dim = |s: &str| -> Result<usize> {
        s.parse().map_err(|_| Error::Parse {
            line: hline,
            message: format!("invalid dimension `{s}`"),
        })
    };
    let (rows, cols) = (dim(fields[1])?, dim(fields[2])?);
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let (lno, line) = lines.next().ok_or(Error::Parse {
            line: hline,
            message: format!("expected {rows} rows, found {r}"),
        })?;
        let before = data.len();
        for tok in line.split_whitespace() {
            data.push(parse_number(tok, lno)?);
        }
        if data.len() - before != cols {
            return Err(Error::Parse {
                line: lno,
                message: format!("expected {cols} entries, found {}", data.len() - before),
            });
        }
    }
    DenseMatrix::from_row_major(rows, cols, data)
}

pub fn parse_matrix(text: &str) -> Result<DenseMatrix> {
    let mut lines = content_lines(text);
    let m = parse_matrix_lines(&mut lines)?;
    if let Some((lno, extra)) = lines.next() {
        return Err(Error::Parse {
            line: lno,
            message: format!("unexpected trailing content `{extra}`"),
        });
    }
    Ok(m)
}

/// Reads a vector from either a prmat block with a single row or column, or
/// whitespace-separated numbers.
pub fn parse_vector(text: &str) -> Result<DenseVector> {
    let first = content_lines(text).next();
    if matches!(first, Some((_, l)) if l.starts_with("prmat")) {
        let m = parse_matrix(text)?;
        if m.rows() != 1 && m.cols() != 1 {
            return Err(Error::Parse {
                line: first.map_or(0, |(l, _)| l),
                message: format!("expected a single row or column, found {}x{}", m.rows(), m.cols()),
            });
        }
        return Ok(m.as_slice().to_vec());
    }
    let mut out = Vec::new();
    for (lno, line) in content_lines(text) {
        for tok in line.split_whitespace() {
            out.push(parse_number(tok, lno)?);
        }
    }
    Ok(out)
}

/// An n×1 prmat block.
pub fn render_vector(v: &[f64]) -> String {
    let m = DenseMatrix::from_row_major(v.len(), 1, v.to_vec()).expect("finite vector");
    render_matrix(&m)
}

pub fn render_instance(inst: &Instance) -> String {
    let mut out = String::from("# carascale instance\n");
    let _ = writeln!(out, "n {}", inst.n);
    let _ = writeln!(out, "m {}", inst.m);
    let _ = writeln!(out, "seed {}", inst.seed);
    let _ = writeln!(out, "generator_id {}", inst.generator_id);
    match &inst.witness {
        Some(w) => {
            let _ = writeln!(out, "witness_tag {}", w.tag);
            out.push_str("witness ");
            render_row(&mut out, &w.vector);
        }
        None => out.push_str("witness_tag none\n"),
    }
    out.push_str("basis\n");
    out.push_str(&render_matrix(&inst.basis));
    out
}

/// Parses an instance document. `base_dir` resolves `basis <path>`
/// references; without it only inline bases are accepted.
pub fn parse_instance(text: &str, base_dir: Option<&Path>) -> Result<Instance> {
    let mut n = None;
    let mut m = None;
    let mut seed = None;
    let mut generator_id = None;
    let mut tag: Option<Option<WitnessTag>> = None;
    let mut witness = None;
    let mut basis = None;

    let mut lines = content_lines(text);
    while let Some((lno, line)) = lines.next() {
        let (key, value) = match line.split_once(char::is_whitespace) {
            Some((k, v)) => (k, v.trim()),
            None => (line, ""),
        };
        let bad = |message: String| Error::Parse { line: lno, message };
        match key {
            "n" => n = Some(value.parse::<usize>().map_err(|_| bad(format!("invalid n `{value}`")))?),
            "m" => m = Some(value.parse::<usize>().map_err(|_| bad(format!("invalid m `{value}`")))?),
            "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad(format!("invalid seed `{value}`")))?),
            "generator_id" => generator_id = Some(value.to_string()),
            "witness_tag" => {
                tag = Some(if value == "none" {
                    None
                } else {
                    Some(value.parse::<WitnessTag>().map_err(|e| bad(e.to_string()))?)
                })
            }
            "witness" => {
                let v: Result<Vec<f64>> = value.split_whitespace().map(|t| parse_number(t, lno)).collect();
                witness = Some(v?);
            }
            "basis" if value.is_empty() => {
                basis = Some(parse_matrix_lines(&mut lines)?);
            }
            "basis" => {
                let dir = base_dir.ok_or_else(|| bad("basis path given without a base directory".into()))?;
                let path = dir.join(value);
                let body = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                basis = Some(parse_matrix(&body)?);
            }
            other => return Err(bad(format!("unknown field `{other}`"))),
        }
    }

    let missing = |field: &str| Error::Parse {
        line: 0,
        message: format!("missing field `{field}`"),
    };
    let n = n.ok_or_else(|| missing("n"))?;
    let m = m.ok_or_else(|| missing("m"))?;
    let basis = basis.ok_or_else(|| missing("basis"))?;
    if basis.rows() != n || basis.cols() != m {
        return Err(Error::Parse {
            line: 0,
            message: format!(
                "declared {n}x{m} but basis is {}x{}",
                basis.rows(),
                basis.cols()
            ),
        });
    }
    let witness = match (tag.flatten(), witness) {
        (Some(tag), Some(vector)) => Some(Witness { tag, vector }),
        (None, None) => None,
        (Some(_), None) => return Err(missing("witness")),
        (None, Some(_)) => return Err(missing("witness_tag")),
    };
    Instance::new(
        basis,
        witness,
        seed.unwrap_or(0),
        generator_id.unwrap_or_else(|| "external".into()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::gen_primal_feasible;

    #[test]
    fn parses_matrix_with_comments() {
        let text = "# a comment\nprmat 2 2\n1 2\n# inner\n3 4.5\n";
        let m = parse_matrix(text).unwrap();
        assert_eq!(m.as_slice(), &[1.0, 2.0, 3.0, 4.5]);
    }

    #[test]
    fn matrix_errors_carry_line_numbers() {
        assert!(matches!(
            parse_matrix("prmat 2 2\n1 2\n3\n"),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(parse_matrix("prmat 1 1\nabc\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_matrix("matrix 1 1\n1\n"), Err(Error::Parse { line: 1, .. })));
        assert!(parse_matrix("prmat 1 1\nNaN\n").is_err());
        assert!(parse_matrix("prmat 1 1\n1\n2\n").is_err());
    }

    #[test]
    fn rendering_keeps_seventeen_digits() {
        assert_eq!(render_number(0.1), "1.0000000000000001e-1");
        let m = DenseMatrix::from_rows(&[vec![0.1, 1.0 / 3.0], vec![-2.5e-300, 7.0]]).unwrap();
        assert_eq!(parse_matrix(&render_matrix(&m)).unwrap(), m);
    }

    #[test]
    fn vector_forms() {
        assert_eq!(parse_vector("0.5 0.5\n").unwrap(), vec![0.5, 0.5]);
        assert_eq!(parse_vector("# y\nprmat 2 1\n0.5\n0.25\n").unwrap(), vec![0.5, 0.25]);
        assert_eq!(parse_vector("prmat 1 2\n0.5 0.25\n").unwrap(), vec![0.5, 0.25]);
        assert!(parse_vector("prmat 2 2\n1 2\n3 4\n").is_err());
        assert_eq!(parse_vector(&render_vector(&[1.0, 2.0])).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn instance_round_trip() {
        let inst = gen_primal_feasible(6, 2, 3).unwrap();
        let text = render_instance(&inst);
        assert!(text.contains("witness_tag PrimalInterior"));
        assert_eq!(parse_instance(&text, None).unwrap(), inst);
    }

    #[test]
    fn instance_without_witness() {
        let text = "n 2\nm 1\nwitness_tag none\nbasis\nprmat 2 1\n1\n1\n";
        let inst = parse_instance(text, None).unwrap();
        assert!(inst.witness.is_none());
        assert_eq!(inst.generator_id, "external");
    }

    #[test]
    fn instance_dimension_mismatch() {
        let text = "n 3\nm 1\nbasis\nprmat 2 1\n1\n1\n";
        assert!(matches!(parse_instance(text, None), Err(Error::Parse { .. })));
        assert!(parse_instance("n 2\nm 1\n", None).is_err());
        assert!(parse_instance("n 2\nm 1\ncolor red\n", None).is_err());
    }

    #[test]
    fn instance_with_basis_reference() {
        let dir = std::env::temp_dir().join(format!("carascale-format-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("b.prmat"), "prmat 2 1\n1\n-1\n").unwrap();
        let inst = parse_instance("n 2\nm 1\nbasis b.prmat\n", Some(&dir)).unwrap();
        assert_eq!(inst.basis.as_slice(), &[1.0, -1.0]);
        assert!(parse_instance("n 2\nm 1\nbasis b.prmat\n", None).is_err());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
