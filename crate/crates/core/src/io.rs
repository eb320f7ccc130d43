//! CSV storage for sampled and lifted paths.
//!
//! Values are written with 17 significant digits so a write/read cycle
//! reproduces every `f64` bit for bit. Lines starting with `#` are comments;
//! the writers use them for provenance such as `# seed=7,stream=2`.

use std::io::{BufRead, Write};

use crate::algebra::{Level, Shape};
use crate::error::{Error, Result};
use crate::path::{LiftedPath, PiecewiseLinearPath};

/// Comment lines and header of a parsed file, plus its numeric rows.
struct Table {
    comments: Vec<String>,
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn read_table(reader: impl BufRead) -> Result<Table> {
    let mut comments = Vec::new();
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(c) = trimmed.strip_prefix('#') {
            comments.push(c.trim().to_string());
            continue;
        }
        match &header {
            None => header = Some(trimmed.split(',').map(|s| s.trim().to_string()).collect()),
            Some(h) => {
                let row = trimmed
                    .split(',')
                    .map(|s| s.trim().parse::<f64>().map_err(|e| parse_err(lineno, format!("bad number {s:?}: {e}"))))
                    .collect::<Result<Vec<f64>>>()?;
                if row.len() != h.len() {
                    return Err(parse_err(lineno, format!("expected {} fields, found {}", h.len(), row.len())));
                }
                rows.push(row);
            }
        }
    }
    let header = header.ok_or_else(|| parse_err(1, "missing header"))?;
    if header.first().map(String::as_str) != Some("t") {
        return Err(parse_err(1, "first column must be `t`"));
    }
    Ok(Table { comments, header, rows })
}

fn write_row(w: &mut impl Write, t: f64, values: &[f64]) -> std::io::Result<()> {
    write!(w, "{t:.16e}")?;
    for v in values {
        write!(w, ",{v:.16e}")?;
    }
    writeln!(w)
}

fn write_comments(w: &mut impl Write, comments: &[String]) -> std::io::Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    Ok(())
}

/// Writes `t,x1,...,xd` rows.
pub fn write_path_csv(w: &mut impl Write, path: &PiecewiseLinearPath, comments: &[String]) -> Result<()> {
    write_comments(w, comments)?;
    let header: Vec<String> = std::iter::once("t".to_string()).chain((1..=path.dim()).map(|i| format!("x{i}"))).collect();
    writeln!(w, "{}", header.join(","))?;
    for (k, &t) in path.times().iter().enumerate() {
        write_row(w, t, path.value(k))?;
    }
    Ok(())
}

/// Reads a file written by [`write_path_csv`]; returns the path and its comments.
pub fn read_path_csv(r: impl BufRead) -> Result<(PiecewiseLinearPath, Vec<String>)> {
    let table = read_table(r)?;
    let dim = table.header.len() - 1;
    if dim == 0 {
        return Err(parse_err(1, "no value columns"));
    }
    let times = table.rows.iter().map(|r| r[0]).collect();
    let values = table.rows.iter().flat_map(|r| r[1..].iter().copied()).collect();
    Ok((PiecewiseLinearPath::new(times, values, dim)?, table.comments))
}

fn index_label(idx: &[usize], dim: usize) -> String {
    let parts: Vec<String> = idx.iter().map(|i| (i + 1).to_string()).collect();
    if dim < 10 {
        parts.concat()
    } else {
        parts.join("_")
    }
}

/// Column names for a lifted path: `t,g1_1..g1_d,g2_11..g2_dd[,g3_111..]`.
pub fn lifted_header(shape: Shape) -> Vec<String> {
    let d = shape.dim;
    let mut cols = vec!["t".to_string()];
    cols.extend((0..d).map(|i| format!("g1_{}", index_label(&[i], d))));
    for i in 0..d {
        for j in 0..d {
            cols.push(format!("g2_{}", index_label(&[i, j], d)));
        }
    }
    if shape.level == Level::Three {
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    cols.push(format!("g3_{}", index_label(&[i, j, k], d)));
                }
            }
        }
    }
    cols
}

/// Writes one row per grid point holding the non-scalar group components.
pub fn write_lifted_csv(w: &mut impl Write, path: &LiftedPath, comments: &[String]) -> Result<()> {
    write_comments(w, comments)?;
    writeln!(w, "{}", lifted_header(path.shape()).join(","))?;
    for (k, &t) in path.times().iter().enumerate() {
        write_row(w, t, &path.point_slice(k)[1..])?;
    }
    Ok(())
}

/// Reads a file written by [`write_lifted_csv`]. Dimension and level are
/// recovered from the number of columns.
pub fn read_lifted_csv(r: impl BufRead) -> Result<(LiftedPath, Vec<String>)> {
    let table = read_table(r)?;
    let ncomp = table.header.len() - 1;
    let shape = (1..=ncomp)
        .flat_map(|d| [Shape::new(d, Level::Two), Shape::new(d, Level::Three)])
        .find(|s| s.len() - 1 == ncomp)
        .ok_or_else(|| parse_err(1, format!("{ncomp} components match no tensor shape")))?;
    if table.header != lifted_header(shape) {
        return Err(parse_err(1, "header does not match the lifted path layout"));
    }
    let times = table.rows.iter().map(|r| r[0]).collect();
    let mut data = Vec::with_capacity(table.rows.len() * shape.len());
    for r in &table.rows {
        data.push(1.0);
        data.extend_from_slice(&r[1..]);
    }
    Ok((LiftedPath::from_flat(times, shape, data)?, table.comments))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::dyadic_grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn awkward_path() -> PiecewiseLinearPath {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let times = dyadic_grid(5);
        let values = (0..times.len() * 3).map(|_| rng.random::<f64>() * 1e-7 - 0.1 / 3.0).collect();
        PiecewiseLinearPath::new(times, values, 3).unwrap()
    }

    #[test]
    fn path_round_trip_is_bit_exact() {
        let path = awkward_path();
        let mut buf = Vec::new();
        write_path_csv(&mut buf, &path, &["seed=7,stream=2".into()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# seed=7,stream=2\nt,x1,x2,x3\n"));
        let (back, comments) = read_path_csv(buf.as_slice()).unwrap();
        assert_eq!(comments, vec!["seed=7,stream=2".to_string()]);
        assert_eq!(back, path);
    }

    #[test]
    fn lifted_round_trip_is_bit_exact() {
        let lifted = awkward_path().signature_lift(Level::Three);
        let mut buf = Vec::new();
        write_lifted_csv(&mut buf, &lifted, &[]).unwrap();
        let (back, _) = read_lifted_csv(buf.as_slice()).unwrap();
        assert_eq!(back, lifted);
    }

    #[test]
    fn lifted_header_layout() {
        assert_eq!(lifted_header(Shape::new(2, Level::Two)).join(","), "t,g1_1,g1_2,g2_11,g2_12,g2_21,g2_22");
        assert_eq!(lifted_header(Shape::new(1, Level::Three)).join(","), "t,g1_1,g2_11,g3_111");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = "t,x1\n0,1\n0.5,oops\n";
        match read_path_csv(bad.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let ragged = "t,x1\n0,1,2\n";
        assert!(matches!(read_path_csv(ragged.as_bytes()), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(read_path_csv("x,y\n".as_bytes()), Err(Error::Parse { .. })));
    }

    #[test]
    fn invalid_rows_are_rejected() {
        assert!(matches!(read_path_csv("t,x1\n0,1\n0,2\n".as_bytes()), Err(Error::Usage(_))));
        assert!(read_lifted_csv("t,g1_1,g2_11\n0,0,0\n1,1,0.4\n".as_bytes()).is_ok());
        assert!(read_lifted_csv("t,a,b\n0,0,0\n1,1,0.5\n".as_bytes()).is_err());
    }
}
