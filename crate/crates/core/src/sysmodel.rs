//! The hyperbolic system `A^a ∂_a v + D v = 0`, the characteristic chart, and
//! the text format both are stored in.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::matkit::{determinant, rank_and_nullspaces, Matrix, Vector};
use crate::scalar::Scalar;

pub const MAX_UNKNOWNS: usize = 16;
pub const MIN_COORDS: usize = 2;
pub const MAX_COORDS: usize = 4;

/// Constant-coefficient first-order linear system on `n_coords` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstOrderSystem<T> {
    coord_names: Vec<String>,
    n_unknowns: usize,
    /// One principal matrix per original coordinate, in `coord_names` order.
    a: Vec<Matrix<T>>,
    d: Matrix<T>,
}

impl<T: Scalar> FirstOrderSystem<T> {
    pub fn new(coord_names: Vec<String>, a: Vec<Matrix<T>>, d: Matrix<T>) -> Result<Self> {
        let n_coords = coord_names.len();
        if !(MIN_COORDS..=MAX_COORDS).contains(&n_coords) {
            return Err(Error::Dimension(format!(
                "{n_coords} coordinates; supported range is {MIN_COORDS}..={MAX_COORDS}"
            )));
        }
        for (i, name) in coord_names.iter().enumerate() {
            if coord_names[..i].contains(name) {
                return Err(Error::Precondition(format!("duplicate coordinate name '{name}'")));
            }
        }
        if a.len() != n_coords {
            return Err(Error::Dimension(format!("{} principal matrices for {n_coords} coordinates", a.len())));
        }
        let n = d.rows();
        if n == 0 || n > MAX_UNKNOWNS {
            return Err(Error::Dimension(format!("{n} unknowns; supported range is 1..={MAX_UNKNOWNS}")));
        }
        for m in a.iter().chain(std::iter::once(&d)) {
            if m.rows() != n || m.cols() != n {
                return Err(Error::Dimension(format!(
                    "coefficient matrix is {}x{}, expected {n}x{n}",
                    m.rows(),
                    m.cols()
                )));
            }
        }
        Ok(Self {
            coord_names,
            n_unknowns: n,
            a,
            d,
        })
    }

    pub fn n_coords(&self) -> usize {
        self.coord_names.len()
    }

    pub fn n_unknowns(&self) -> usize {
        self.n_unknowns
    }

    pub fn coord_names(&self) -> &[String] {
        &self.coord_names
    }

    pub fn principal(&self, coord: usize) -> &Matrix<T> {
        &self.a[coord]
    }

    pub fn principals(&self) -> &[Matrix<T>] {
        &self.a
    }

    pub fn lower_order(&self) -> &Matrix<T> {
        &self.d
    }

    pub fn with_lower_order(mut self, d: Matrix<T>) -> Result<Self> {
        if d.rows() != self.n_unknowns || d.cols() != self.n_unknowns {
            return Err(Error::Dimension("lower-order matrix has the wrong shape".into()));
        }
        self.d = d;
        Ok(self)
    }

    pub fn cast<U: Scalar>(&self) -> FirstOrderSystem<U> {
        FirstOrderSystem {
            coord_names: self.coord_names.clone(),
            n_unknowns: self.n_unknowns,
            a: self.a.iter().map(Matrix::cast).collect(),
            d: self.d.cast(),
        }
    }
}

/// Affine change of coordinates `(u, x, x^1, …) = J·y + offsets`.
///
/// Row 0 of `J` is the gradient of the null coordinate `u = φ(y)`, row 1 the
/// gradient of `x = ψ(y)`, the remaining rows the transverse coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart<T> {
    jacobian: Matrix<T>,
    offsets: Vector<T>,
}

impl<T: Scalar> Chart<T> {
    pub fn new(jacobian: Matrix<T>, offsets: Vector<T>) -> Result<Self> {
        if !jacobian.is_square() || offsets.len() != jacobian.rows() {
            return Err(Error::Dimension(format!(
                "chart Jacobian {}x{} with {} offsets",
                jacobian.rows(),
                jacobian.cols(),
                offsets.len()
            )));
        }
        if offsets.iter().any(|x| !x.is_finite()) {
            return Err(Error::Precondition("chart offsets must be finite".into()));
        }
        if determinant(&jacobian)?.abs() <= T::lit(1e-10) {
            return Err(Error::Precondition("singular chart: Jacobian determinant vanishes".into()));
        }
        Ok(Self { jacobian, offsets })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            jacobian: Matrix::identity(n),
            offsets: vec![T::zero(); n],
        }
    }

    pub fn jacobian(&self) -> &Matrix<T> {
        &self.jacobian
    }

    pub fn offsets(&self) -> &[T] {
        &self.offsets
    }

    pub fn dim(&self) -> usize {
        self.jacobian.rows()
    }

    /// Number of transverse coordinates `x^i`.
    pub fn transverse_dim(&self) -> usize {
        self.dim() - 2
    }

    /// New coordinates of a point `y`.
    pub fn apply(&self, y: &[T]) -> Vector<T> {
        self.jacobian
            .mul_vec(y)
            .into_iter()
            .zip(&self.offsets)
            .map(|(a, &b)| a + b)
            .collect()
    }

    pub fn cast<U: Scalar>(&self) -> Chart<U> {
        Chart {
            jacobian: self.jacobian.cast(),
            offsets: self.offsets.iter().map(|&x| U::lit(x.as_f64())).collect(),
        }
    }
}

/// Principal matrices in the chart's coordinates: index 0 is `u`, 1 is `x`,
/// the rest transverse.
#[derive(Debug, Clone, PartialEq)]
pub struct SideMatrices<T> {
    pub b: Vec<Matrix<T>>,
    pub names: Vec<String>,
}

impl<T: Scalar> SideMatrices<T> {
    pub fn bu(&self) -> &Matrix<T> {
        &self.b[0]
    }

    pub fn bx(&self) -> &Matrix<T> {
        &self.b[1]
    }

    pub fn transverse(&self) -> &[Matrix<T>] {
        &self.b[2..]
    }

    pub fn n_unknowns(&self) -> usize {
        self.b[0].rows()
    }
}

/// Assembles `B^a = Σ_b A^b J[a, b]`.
pub fn side_matrices<T: Scalar>(sys: &FirstOrderSystem<T>, chart: &Chart<T>) -> Result<SideMatrices<T>> {
    let nc = sys.n_coords();
    if chart.dim() != nc {
        return Err(Error::Dimension(format!("chart of dimension {} for {nc} coordinates", chart.dim())));
    }
    let n = sys.n_unknowns();
    let j = chart.jacobian();
    let b = (0..nc)
        .map(|a| {
            let mut m = Matrix::zeros(n, n);
            for (c, ac) in sys.principals().iter().enumerate() {
                let w = j[(a, c)];
                if w != T::zero() {
                    m = &m + &ac.scale(w);
                }
            }
            m
        })
        .collect();
    Ok(SideMatrices {
        b,
        names: new_coordinate_names(sys, chart),
    })
}

/// `u`, `x`, then each transverse coordinate named after the original
/// coordinate it copies when its row is a unit vector.
fn new_coordinate_names<T: Scalar>(sys: &FirstOrderSystem<T>, chart: &Chart<T>) -> Vec<String> {
    let mut names = vec!["u".to_string(), "x".to_string()];
    for i in 2..chart.dim() {
        let row = chart.jacobian().row(i);
        let unit = row.iter().position(|&x| x == T::one()).filter(|&p| {
            row.iter()
                .enumerate()
                .all(|(k, &x)| k == p || x == T::zero())
        });
        let candidate = unit.map(|p| sys.coord_names()[p].clone());
        match candidate {
            Some(name) if !names.contains(&name) => names.push(name),
            _ => names.push(format!("x{}", i - 1)),
        }
    }
    names
}

/// Multiplicity of the characteristic surface `u = const`, i.e. the dimension
/// of the null space of `B^u`.
pub fn verify_characteristic<T: Scalar>(b: &SideMatrices<T>, tol: T) -> Result<usize> {
    let ns = rank_and_nullspaces(b.bu(), tol)?;
    match ns.right.len() {
        0 => Err(Error::NotCharacteristic),
        m => Ok(m),
    }
}

// ---------------------------------------------------------------------------
// text format

struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let content = line.split('#').next().unwrap_or("");
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in content.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Token {
                    text: &content[s..i],
                    column: content[..s].chars().count() + 1,
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Token {
            text: &content[s..],
            column: content[..s].chars().count() + 1,
        });
    }
    out
}

fn perr(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

struct Lines<'a> {
    inner: std::iter::Peekable<std::vec::IntoIter<(usize, Vec<Token<'a>>)>>,
    last_line: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let lines: Vec<(usize, Vec<Token<'a>>)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, tokenize(l)))
            .filter(|(_, t)| !t.is_empty())
            .collect();
        let last_line = text.lines().count().max(1);
        Self {
            inner: lines.into_iter().peekable(),
            last_line,
        }
    }

    fn next(&mut self) -> Option<(usize, Vec<Token<'a>>)> {
        self.inner.next()
    }

    /// Reads a row of exactly `n` decimals.
    fn number_row(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let Some((line, toks)) = self.next() else {
            return Err(perr(self.last_line, 1, format!("unexpected end of input while reading {what}")));
        };
        if toks.len() != n {
            return Err(perr(
                line,
                toks.get(n).map_or(1, |t| t.column),
                format!("dimension mismatch: {what} row has {} entries, expected {n}", toks.len()),
            ));
        }
        toks.iter()
            .map(|t| {
                let x: f64 = t
                    .text
                    .parse()
                    .map_err(|_| perr(line, t.column, format!("invalid number '{}'", t.text)))?;
                if x.is_finite() {
                    Ok(x)
                } else {
                    Err(perr(line, t.column, "non-finite number"))
                }
            })
            .collect()
    }

    fn matrix(&mut self, n: usize, what: &str) -> Result<Matrix<f64>> {
        let rows = (0..n).map(|_| self.number_row(n, what)).collect::<Result<Vec<_>>>()?;
        Matrix::from_rows(&rows)
    }
}

fn parse_count(tok: Option<&Token<'_>>, line: usize, key: &str) -> Result<usize> {
    let t = tok.ok_or_else(|| perr(line, 1, format!("'{key}' needs an integer argument")))?;
    t.text
        .parse()
        .map_err(|_| perr(line, t.column, format!("invalid integer '{}' for '{key}'", t.text)))
}

fn expect_arity(toks: &[Token<'_>], line: usize, n: usize, key: &str) -> Result<()> {
    if toks.len() > n {
        return Err(perr(line, toks[n].column, format!("unexpected trailing token after '{key}'")));
    }
    Ok(())
}

/// Parses the system-definition format.
pub fn load_system(text: &str) -> Result<(FirstOrderSystem<f64>, Chart<f64>)> {
    let mut lines = Lines::new(text);
    let mut ncoords: Option<usize> = None;
    let mut nunknowns: Option<usize> = None;
    let mut names: Option<Vec<String>> = None;
    let mut a: Vec<Option<Matrix<f64>>> = Vec::new();
    let mut d: Option<Matrix<f64>> = None;
    let mut chart: Option<(Matrix<f64>, Vec<f64>, usize)> = None;

    while let Some((line, toks)) = lines.next() {
        let key = &toks[0];
        let need = |v: Option<usize>, what: &str| {
            v.ok_or_else(|| perr(line, key.column, format!("'{}' must come after '{what}'", key.text)))
        };
        match key.text {
            "ncoords" => {
                if ncoords.is_some() {
                    return Err(perr(line, key.column, "duplicate 'ncoords'"));
                }
                expect_arity(&toks, line, 2, "ncoords")?;
                let n = parse_count(toks.get(1), line, "ncoords")?;
                if !(MIN_COORDS..=MAX_COORDS).contains(&n) {
                    return Err(perr(line, toks[1].column, format!("ncoords must be in {MIN_COORDS}..={MAX_COORDS}")));
                }
                ncoords = Some(n);
                a = vec![None; n];
            }
            "nunknowns" => {
                if nunknowns.is_some() {
                    return Err(perr(line, key.column, "duplicate 'nunknowns'"));
                }
                expect_arity(&toks, line, 2, "nunknowns")?;
                let n = parse_count(toks.get(1), line, "nunknowns")?;
                if !(1..=MAX_UNKNOWNS).contains(&n) {
                    return Err(perr(line, toks[1].column, format!("nunknowns must be in 1..={MAX_UNKNOWNS}")));
                }
                nunknowns = Some(n);
            }
            "coordnames" => {
                let nc = need(ncoords, "ncoords")?;
                if names.is_some() {
                    return Err(perr(line, key.column, "duplicate 'coordnames'"));
                }
                if toks.len() - 1 != nc {
                    return Err(perr(
                        line,
                        toks.get(nc + 1).map_or(key.column, |t| t.column),
                        format!("dimension mismatch: {} names for {nc} coordinates", toks.len() - 1),
                    ));
                }
                let list: Vec<String> = toks[1..].iter().map(|t| t.text.to_string()).collect();
                for (i, t) in toks[1..].iter().enumerate() {
                    if list[..i].contains(&list[i]) {
                        return Err(perr(line, t.column, format!("duplicate coordinate name '{}'", t.text)));
                    }
                }
                names = Some(list);
            }
            "matrix" => {
                let n = need(nunknowns, "nunknowns")?;
                match toks.get(1).map(|t| t.text) {
                    Some("A") => {
                        let names = names
                            .as_ref()
                            .ok_or_else(|| perr(line, key.column, "'matrix A' must come after 'coordnames'"))?;
                        let coord = toks
                            .get(2)
                            .ok_or_else(|| perr(line, toks[1].column, "'matrix A' needs a coordinate name"))?;
                        expect_arity(&toks, line, 3, "matrix A")?;
                        let idx = names.iter().position(|nm| nm == coord.text).ok_or_else(|| {
                            perr(line, coord.column, format!("unknown coordinate '{}'", coord.text))
                        })?;
                        if a[idx].is_some() {
                            return Err(perr(line, coord.column, format!("duplicate matrix A {}", coord.text)));
                        }
                        a[idx] = Some(lines.matrix(n, &format!("matrix A {}", coord.text))?);
                    }
                    Some("D") => {
                        expect_arity(&toks, line, 2, "matrix D")?;
                        if d.is_some() {
                            return Err(perr(line, toks[1].column, "duplicate matrix D"));
                        }
                        d = Some(lines.matrix(n, "matrix D")?);
                    }
                    Some(other) => {
                        return Err(perr(line, toks[1].column, format!("unknown matrix kind '{other}'")));
                    }
                    None => return Err(perr(line, key.column, "'matrix' needs a kind (A or D)")),
                }
            }
            "chart" => {
                let nc = need(ncoords, "ncoords")?;
                expect_arity(&toks, line, 1, "chart")?;
                if chart.is_some() {
                    return Err(perr(line, key.column, "duplicate 'chart'"));
                }
                let j = lines.matrix(nc, "chart")?;
                let offsets = lines.number_row(nc, "chart offsets")?;
                chart = Some((j, offsets, line));
            }
            other => return Err(perr(line, key.column, format!("unknown key '{other}'"))),
        }
    }

    let end = lines.last_line;
    let nc = ncoords.ok_or_else(|| perr(end, 1, "missing 'ncoords'"))?;
    let n = nunknowns.ok_or_else(|| perr(end, 1, "missing 'nunknowns'"))?;
    let names = names.ok_or_else(|| perr(end, 1, "missing 'coordnames'"))?;
    let (j, offsets, chart_line) = chart.ok_or_else(|| perr(end, 1, "missing 'chart'"))?;
    debug_assert_eq!(a.len(), nc);
    let a = a.into_iter().map(|m| m.unwrap_or_else(|| Matrix::zeros(n, n))).collect();
    let sys = FirstOrderSystem::new(names, a, d.unwrap_or_else(|| Matrix::zeros(n, n)))
        .map_err(|e| perr(end, 1, e.to_string()))?;
    let chart = Chart::new(j, offsets).map_err(|e| match e {
        Error::Precondition(msg) => perr(chart_line, 1, msg),
        other => perr(chart_line, 1, other.to_string()),
    })?;
    Ok((sys, chart))
}

/// Writes the system and chart back in the definition format. Numbers use the
/// shortest representation that parses back to the same `f64`.
pub fn to_text<T: Scalar>(sys: &FirstOrderSystem<T>, chart: &Chart<T>) -> String {
    let mut s = String::new();
    let row = |s: &mut String, r: &[T]| {
        let items: Vec<String> = r.iter().map(|x| format!("{:?}", x.as_f64())).collect();
        let _ = writeln!(s, "{}", items.join(" "));
    };
    let _ = writeln!(s, "ncoords {}", sys.n_coords());
    let _ = writeln!(s, "nunknowns {}", sys.n_unknowns());
    let _ = writeln!(s, "coordnames {}", sys.coord_names().join(" "));
    for (name, m) in sys.coord_names().iter().zip(sys.principals()) {
        let _ = writeln!(s, "matrix A {name}");
        (0..m.rows()).for_each(|i| row(&mut s, m.row(i)));
    }
    let _ = writeln!(s, "matrix D");
    let d = sys.lower_order();
    (0..d.rows()).for_each(|i| row(&mut s, d.row(i)));
    let _ = writeln!(s, "chart");
    let j = chart.jacobian();
    (0..j.rows()).for_each(|i| row(&mut s, j.row(i)));
    row(&mut s, chart.offsets());
    s
}
