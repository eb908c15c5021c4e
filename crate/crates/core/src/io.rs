//! Line-oriented text formats.
//!
//! * count tensors: `# zits-tensor v1`, then `N K`, then `i j k c` lines;
//! * real tensors: `# zits-rtensor v1`, same layout with real values;
//! * matrix bundles: `# zits-bundle v1`, then sections `name rows cols`
//!   followed by `rows` lines of space-separated values.
//!
//! Reals are written with 17 significant digits so they read back exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::basis::{BasisKind, BasisMatrix};
use crate::error::{Result, ZitsError};
use crate::fit::{ClusterSolution, FitReport};
use crate::model::logistic;
use crate::model::ModelParams;
use crate::sim::SimTruth;
use crate::tensor::{cp3_sym, CountTensor, DenseTensor3, Mat};

pub const TENSOR_HEADER: &str = "# zits-tensor v1";
pub const RTENSOR_HEADER: &str = "# zits-rtensor v1";
pub const BUNDLE_HEADER: &str = "# zits-bundle v1";

pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_err(line: usize, msg: impl Into<String>) -> ZitsError {
    ZitsError::Parse {
        line,
        msg: msg.into(),
    }
}

/// Non-empty lines with their 1-based numbers; `#` lines other than the first
/// are comments.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn fields<T: std::str::FromStr>(line: usize, s: &str, want: usize, what: &str) -> Result<Vec<T>> {
    let parts: Vec<&str> = s.split_whitespace().collect();
    if parts.len() != want {
        return Err(parse_err(
            line,
            format!("expected {want} fields for {what}, found {}", parts.len()),
        ));
    }
    parts
        .iter()
        .map(|p| {
            p.parse::<T>()
                .map_err(|_| parse_err(line, format!("cannot parse '{p}' in {what}")))
        })
        .collect()
}

pub fn write_tensor_string(t: &CountTensor) -> String {
    let mut s = format!("{TENSOR_HEADER}\n{} {}\n", t.n_loci(), t.n_cells());
    for (i, j, k, c) in t.iter_upper() {
        let _ = writeln!(s, "{i} {j} {k} {c}");
    }
    s
}

/// Parses a count tensor. Lines after the header are `i j k c`; with
/// `one_based` the indices are shifted down by one. The header line may be
/// absent, in which case the first line must be `N K`.
pub fn parse_tensor(text: &str, one_based: bool) -> Result<CountTensor> {
    let mut lines = content_lines(text).peekable();
    if let Some(&(_, first)) = lines.peek() {
        if first.starts_with('#') {
            if first != TENSOR_HEADER {
                return Err(parse_err(1, format!("unsupported header '{first}'")));
            }
            lines.next();
        }
    }
    let (dl, dims) = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing 'N K' line"))?;
    let d: Vec<usize> = fields(dl, dims, 2, "the 'N K' line")?;
    let (n, k) = (d[0], d[1]);
    let mut entries = Vec::new();
    for (ln, l) in lines {
        if l.starts_with('#') {
            continue;
        }
        let v: Vec<u64> = fields(ln, l, 4, "an 'i j k c' entry")?;
        let idx = |x: u64, name: &str| -> Result<usize> {
            if one_based {
                x.checked_sub(1)
                    .map(|y| y as usize)
                    .ok_or_else(|| parse_err(ln, format!("{name} = 0 in 1-based input")))
            } else {
                Ok(x as usize)
            }
        };
        entries.push((idx(v[0], "i")?, idx(v[1], "j")?, idx(v[2], "k")?, v[3]));
    }
    CountTensor::new(n, k, entries).map_err(|e| match e {
        ZitsError::InvalidData(m) | ZitsError::DimensionMismatch(m) => parse_err(0, m),
        other => other,
    })
}

/// Reads a whole file, naming the path in any error.
pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| with_path(e, path))
}

/// Writes a whole file, naming the path in any error.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| with_path(e, path))
}

pub(crate) fn with_path(e: std::io::Error, path: &Path) -> ZitsError {
    ZitsError::Io(std::io::Error::new(
        e.kind(),
        format!("{}: {e}", path.display()),
    ))
}

pub fn read_tensor(path: &Path, one_based: bool) -> Result<CountTensor> {
    parse_tensor(&read_text(path)?, one_based)
}

pub fn write_tensor(path: &Path, t: &CountTensor) -> Result<()> {
    write_text(path, &write_tensor_string(t))
}

/// Real tensor with symmetric frontal slices: stores the nonzero `i <= j` entries.
pub fn write_rtensor_string(t: &DenseTensor3) -> String {
    let (n, _, k) = t.dims();
    let mut s = format!("{RTENSOR_HEADER}\n{n} {k}\n");
    for kk in 0..k {
        for i in 0..n {
            for j in i..n {
                let v = t.get(i, j, kk);
                if v != 0.0 {
                    let _ = writeln!(s, "{i} {j} {kk} {}", fmt_real(v));
                }
            }
        }
    }
    s
}

pub fn parse_rtensor(text: &str) -> Result<DenseTensor3> {
    let mut lines = content_lines(text);
    match lines.next() {
        Some((_, h)) if h == RTENSOR_HEADER => {}
        Some((ln, h)) => {
            return Err(parse_err(
                ln,
                format!("expected '{RTENSOR_HEADER}', found '{h}'"),
            ))
        }
        None => return Err(parse_err(1, "empty file")),
    }
    let (dl, dims) = lines
        .next()
        .ok_or_else(|| parse_err(2, "missing 'N K' line"))?;
    let d: Vec<usize> = fields(dl, dims, 2, "the 'N K' line")?;
    let (n, k) = (d[0], d[1]);
    let mut t = DenseTensor3::zeros(n, n, k);
    for (ln, l) in lines {
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts.len() != 4 {
            return Err(parse_err(ln, "expected 'i j k value'"));
        }
        let ix: Vec<usize> = fields(ln, &parts[..3].join(" "), 3, "indices")?;
        let v: f64 = parts[3]
            .parse()
            .map_err(|_| parse_err(ln, format!("cannot parse '{}'", parts[3])))?;
        let (i, j, kk) = (ix[0], ix[1], ix[2]);
        if i >= n || j >= n || kk >= k {
            return Err(parse_err(
                ln,
                format!("index ({i}, {j}, {kk}) out of range"),
            ));
        }
        t.set(i, j, kk, v);
        t.set(j, i, kk, v);
    }
    Ok(t)
}

pub fn write_rtensor(path: &Path, t: &DenseTensor3) -> Result<()> {
    write_text(path, &write_rtensor_string(t))
}

pub fn read_rtensor(path: &Path) -> Result<DenseTensor3> {
    parse_rtensor(&read_text(path)?)
}

/// Ordered named matrices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bundle {
    pub sections: Vec<(String, Mat)>,
}

impl Bundle {
    pub fn push(&mut self, name: &str, m: Mat) -> &mut Self {
        self.sections.push((name.to_string(), m));
        self
    }

    pub fn get(&self, name: &str) -> Result<&Mat> {
        self.sections
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
            .ok_or_else(|| ZitsError::InvalidData(format!("bundle has no section '{name}'")))
    }

    pub fn scalar(&self, name: &str) -> Result<f64> {
        let m = self.get(name)?;
        if m.len() != 1 {
            return Err(ZitsError::InvalidData(format!(
                "section '{name}' is not a scalar"
            )));
        }
        Ok(m[(0, 0)])
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{BUNDLE_HEADER}\n");
        for (name, m) in &self.sections {
            let _ = writeln!(s, "{name} {} {}", m.nrows(), m.ncols());
            for r in 0..m.nrows() {
                let row: Vec<String> = m.row(r).iter().map(|&v| fmt_real(v)).collect();
                let _ = writeln!(s, "{}", row.join(" "));
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = content_lines(text);
        match lines.next() {
            Some((_, h)) if h == BUNDLE_HEADER => {}
            Some((ln, h)) => {
                return Err(parse_err(
                    ln,
                    format!("expected '{BUNDLE_HEADER}', found '{h}'"),
                ))
            }
            None => return Err(parse_err(1, "empty file")),
        }
        let mut b = Bundle::default();
        while let Some((ln, head)) = lines.next() {
            let parts: Vec<&str> = head.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(parse_err(ln, "expected a 'name rows cols' section header"));
            }
            let dims: Vec<usize> = fields(ln, &parts[1..].join(" "), 2, "section dimensions")?;
            let (rows, cols) = (dims[0], dims[1]);
            let mut m = Mat::zeros(rows, cols);
            for r in 0..rows {
                let (rl, row) = lines.next().ok_or_else(|| {
                    parse_err(ln, format!("section '{}' ends after {r} rows", parts[0]))
                })?;
                if cols == 0 {
                    continue;
                }
                let vals: Vec<f64> = fields(rl, row, cols, "a matrix row")?;
                for (c, v) in vals.into_iter().enumerate() {
                    m[(r, c)] = v;
                }
            }
            b.sections.push((parts[0].to_string(), m));
        }
        Ok(b)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_text())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?)
    }
}

fn scalar(v: f64) -> Mat {
    Mat::from_element(1, 1, v)
}

fn column_of(v: impl ExactSizeIterator<Item = f64>) -> Mat {
    let n = v.len();
    Mat::from_iterator(n, 1, v)
}

fn labels_from(m: &Mat, name: &str) -> Result<Vec<usize>> {
    m.iter()
        .map(|&v| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(ZitsError::InvalidData(format!(
                    "section '{name}' holds non-label value {v}"
                )))
            }
        })
        .collect()
}

fn triples(cells: &[(usize, usize, usize)]) -> Mat {
    Mat::from_fn(cells.len(), 3, |r, c| {
        let t = cells[r];
        [t.0, t.1, t.2][c] as f64
    })
}

fn triples_from(m: &Mat, name: &str) -> Result<Vec<(usize, usize, usize)>> {
    if m.nrows() > 0 && m.ncols() != 3 {
        return Err(ZitsError::InvalidData(format!(
            "section '{name}' must have 3 columns"
        )));
    }
    let flat = labels_from(&m.transpose(), name)?;
    Ok(flat.chunks(3).map(|c| (c[0], c[1], c[2])).collect())
}

fn basis_code(kind: BasisKind) -> f64 {
    match kind {
        BasisKind::CubicBspline => 0.0,
        BasisKind::Fourier => 1.0,
    }
}

pub fn params_bundle(m: &ModelParams) -> Bundle {
    let mut b = Bundle::default();
    b.push("gamma", m.gamma.clone())
        .push("basis", m.basis.h().clone())
        .push("basis_kind", scalar(basis_code(m.basis.kind())))
        .push("w_beta", m.w_beta.clone())
        .push("w_xi", m.w_xi.clone());
    if let Some(bl) = m.blocks {
        b.push(
            "blocks",
            Mat::from_row_slice(1, 2, &[bl.r as f64, bl.l as f64]),
        );
    }
    b
}

pub fn params_from_bundle(b: &Bundle) -> Result<ModelParams> {
    let kind = if b.scalar("basis_kind")? == 1.0 {
        BasisKind::Fourier
    } else {
        BasisKind::CubicBspline
    };
    let basis = BasisMatrix::from_matrix(b.get("basis")?.clone(), kind)?;
    let m = ModelParams::new(
        b.get("gamma")?.clone(),
        basis,
        b.get("w_beta")?.clone(),
        b.get("w_xi")?.clone(),
    )?;
    match b.get("blocks") {
        Ok(bl) if bl.len() == 2 => m.with_blocks(bl[(0, 0)] as usize, bl[(0, 1)] as usize),
        _ => Ok(m),
    }
}

pub fn clusters_bundle(c: &ClusterSolution) -> Bundle {
    let mut b = Bundle::default();
    b.push("labels", column_of(c.labels.iter().map(|&l| l as f64)))
        .push("beta_bar", c.beta_bar.clone())
        .push("xi_bar", c.xi_bar.clone())
        .push("objective", scalar(c.objective));
    b
}

pub fn clusters_from_bundle(b: &Bundle) -> Result<ClusterSolution> {
    Ok(ClusterSolution {
        labels: labels_from(b.get("labels")?, "labels")?,
        beta_bar: b.get("beta_bar")?.clone(),
        xi_bar: b.get("xi_bar")?.clone(),
        objective: b.scalar("objective")?,
    })
}

/// The generating factors, labels and masks; `Λ` and `P` are recomputed on
/// load exactly as the simulator computes them.
pub fn truth_bundle(t: &SimTruth) -> Bundle {
    let mut b = Bundle::default();
    b.push("alpha", t.alpha.clone())
        .push("beta", t.beta.clone())
        .push("xi", t.xi.clone())
        .push("beta_bar", t.beta_bar.clone())
        .push("xi_bar", t.xi_bar.clone())
        .push("labels", column_of(t.labels.iter().map(|&l| l as f64)))
        .push("masked", triples(&t.masked))
        .push("false_zeros", triples(&t.false_zeros));
    b
}

pub fn truth_from_bundle(b: &Bundle) -> Result<SimTruth> {
    let alpha = b.get("alpha")?.clone();
    let beta = b.get("beta")?.clone();
    let xi = b.get("xi")?.clone();
    let lambda = cp3_sym(&alpha, &beta)?.map(f64::exp);
    let p = cp3_sym(&alpha, &xi)?.map(|t| logistic(-t));
    Ok(SimTruth {
        lambda,
        p,
        alpha,
        beta,
        xi,
        beta_bar: b.get("beta_bar")?.clone(),
        xi_bar: b.get("xi_bar")?.clone(),
        masked: triples_from(b.get("masked")?, "masked")?,
        false_zeros: triples_from(b.get("false_zeros")?, "false_zeros")?,
        labels: labels_from(b.get("labels")?, "labels")?,
    })
}

/// `key = value` summary lines followed by a CSV of the trace. Wall time is
/// left out so reruns are byte-identical.
pub fn report_text(r: &FitReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# iterations = {}", r.iterations);
    let _ = writeln!(s, "# converged = {}", r.converged);
    let _ = writeln!(s, "# stalled = {}", r.stalled);
    let _ = writeln!(
        s,
        "# final_steps = {} {} {}",
        fmt_real(r.steps[0]),
        fmt_real(r.steps[1]),
        fmt_real(r.steps[2])
    );
    s.push_str("iteration,nll,rel_gamma,rel_beta,rel_xi\n");
    let _ = writeln!(s, "0,{},,,", fmt_real(r.nll_trace[0]));
    for (it, (f, c)) in r.nll_trace.iter().skip(1).zip(&r.rel_changes).enumerate() {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            it + 1,
            fmt_real(*f),
            fmt_real(c[0]),
            fmt_real(c[1]),
            fmt_real(c[2])
        );
    }
    s
}

/// Reads back the `converged` flag and the nll trace of [`report_text`].
pub fn parse_report(text: &str) -> Result<(bool, Vec<f64>)> {
    let mut converged = None;
    let mut trace = Vec::new();
    for (ln, l) in content_lines(text) {
        if let Some(v) = l.strip_prefix("# converged = ") {
            converged = Some(v == "true");
        } else if l.starts_with('#') || l.starts_with("iteration") {
            continue;
        } else {
            let f = l
                .split(',')
                .nth(1)
                .ok_or_else(|| parse_err(ln, "missing nll column"))?;
            trace.push(
                f.parse()
                    .map_err(|_| parse_err(ln, format!("cannot parse '{f}'")))?,
            );
        }
    }
    Ok((
        converged.ok_or_else(|| parse_err(1, "missing converged line"))?,
        trace,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_round_trip_and_one_based() {
        let t = CountTensor::new(3, 2, [(0, 1, 0, 2), (2, 2, 1, 7)]).unwrap();
        let s = write_tensor_string(&t);
        assert!(s.starts_with("# zits-tensor v1\n3 2\n"));
        assert_eq!(parse_tensor(&s, false).unwrap(), t);
        let ext = "3 2\n2 1 1 2\n3 3 2 7\n";
        assert_eq!(parse_tensor(ext, true).unwrap(), t);
        assert!(parse_tensor("3 2\n0 0 0 1\n", true).is_err());
    }

    #[test]
    fn parse_errors_carry_lines() {
        match parse_tensor("# zits-tensor v1\n2 1\n0 0 0\n", false) {
            Err(ZitsError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(parse_tensor("# other v9\n1 1\n", false).is_err());
    }

    #[test]
    fn reals_round_trip_exactly() {
        let vals = [
            0.1,
            1.0 / 3.0,
            -2.5e-300,
            6.02214076e23,
            f64::MIN_POSITIVE,
            1.0 - f64::EPSILON,
        ];
        let m = Mat::from_row_slice(2, 3, &vals);
        let mut b = Bundle::default();
        b.push("m", m.clone()).push("empty", Mat::zeros(0, 4));
        let back = Bundle::parse(&b.to_text()).unwrap();
        assert_eq!(back, b);
        let t = DenseTensor3::from_fn(2, 2, 1, |i, j, _| if i == j { 0.0 } else { vals[1] });
        assert_eq!(parse_rtensor(&write_rtensor_string(&t)).unwrap(), t);
    }

    #[test]
    fn report_round_trip() {
        let r = FitReport {
            nll_trace: vec![3.0, 2.0, 1.5],
            rel_changes: vec![[0.1, 0.2, 0.3], [0.01, 0.0, 0.0]],
            steps: [1.0, 2.0, 0.5],
            iterations: 2,
            converged: true,
            stalled: false,
            wall_time: 9.0,
        };
        let (c, trace) = parse_report(&report_text(&r)).unwrap();
        assert!(c);
        assert_eq!(trace, r.nll_trace);
    }
}
