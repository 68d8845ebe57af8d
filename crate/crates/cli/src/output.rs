use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use riccati_kit::MatrixC;

use crate::CliError;

/// Shortest round-trip decimal form; `nan`, `inf`, `-inf` otherwise.
pub fn num(x: f64) -> String {
    match serde_json::Number::from_f64(x) {
        Some(n) => n.to_string(),
        None if x.is_nan() => "nan".into(),
        None if x > 0.0 => "inf".into(),
        None => "-inf".into(),
    }
}

/// `re_i_j,im_i_j` column names (1-based, row-major) after `prefix`.
pub fn matrix_header(prefix: &str, n: usize) -> String {
    let mut h = prefix.to_string();
    for i in 1..=n {
        for j in 1..=n {
            write!(h, ",re_{i}_{j},im_{i}_{j}").unwrap();
        }
    }
    h
}

pub fn push_matrix(line: &mut String, m: &MatrixC) {
    for c in m.as_slice() {
        write!(line, ",{},{}", num(c.re), num(c.im)).unwrap();
    }
}

/// `t` followed by the row-major real and imaginary parts of `Z(t)`.
pub fn trajectory_csv(n: usize, rows: &[(f64, MatrixC)]) -> String {
    let mut out = matrix_header("t", n);
    out.push('\n');
    for (t, z) in rows {
        let mut line = num(*t);
        push_matrix(&mut line, z);
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Plain numeric table.
pub fn table_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&x| num(x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_all(dir: &Path, files: &[(String, String)]) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn numbers_round_trip() {
        for x in [0.5, -1.0, 1e-300, 123456.789, std::f64::consts::PI] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(f64::NAN), "nan");
        assert_eq!(num(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn trajectory_layout() {
        let z = MatrixC::from_fn(2, |i, j| Complex64::new((2 * i + j) as f64, -1.0));
        let csv = trajectory_csv(2, &[(0.25, z)]);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,re_1_1,im_1_1,re_1_2,im_1_2,re_2_1,im_2_1,re_2_2,im_2_2");
        assert_eq!(lines.next().unwrap(), "0.25,0.0,-1.0,1.0,-1.0,2.0,-1.0,3.0,-1.0");
    }
}
