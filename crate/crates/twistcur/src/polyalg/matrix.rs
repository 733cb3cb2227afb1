use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num::complex::Complex64;
use num::Zero;

use super::{GaussianRational, PolyError, Polynomial};

/// Relative singular-value threshold for *numeric rank probing only*.
/// Pseudoinverses never threshold; they truncate at a caller-supplied rank.
pub const RANK_PROBE_RELATIVE_THRESHOLD: f64 = 1e-8;

/// Dense matrix of polynomials, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct PolyMatrix {
    pub rows: usize,
    pub cols: usize,
    pub nvars: usize,
    entries: Vec<Polynomial>,
}

impl PolyMatrix {
    pub fn zero(rows: usize, cols: usize, nvars: usize) -> Self {
        PolyMatrix {
            rows,
            cols,
            nvars,
            entries: vec![Polynomial::zero(nvars); rows * cols],
        }
    }

    pub fn identity(n: usize, nvars: usize) -> Self {
        let mut m = Self::zero(n, n, nvars);
        for i in 0..n {
            *m.entry_mut(i, i) = Polynomial::one(nvars);
        }
        m
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        nvars: usize,
        mut f: impl FnMut(usize, usize) -> Polynomial,
    ) -> Self {
        let mut m = Self::zero(rows, cols, nvars);
        for i in 0..rows {
            for j in 0..cols {
                let p = f(i, j);
                assert_eq!(p.nvars(), nvars);
                *m.entry_mut(i, j) = p;
            }
        }
        m
    }

    pub fn entry(&self, i: usize, j: usize) -> &Polynomial {
        &self.entries[i * self.cols + j]
    }

    pub fn entry_mut(&mut self, i: usize, j: usize) -> &mut Polynomial {
        &mut self.entries[i * self.cols + j]
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|p| p.is_zero())
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Max total degree over entries; `None` if the matrix is zero.
    pub fn total_degree(&self) -> Option<usize> {
        self.entries.iter().filter_map(|p| p.total_degree()).max()
    }

    pub fn scale(&self, c: &GaussianRational) -> PolyMatrix {
        self.map(|p| p.scale(c))
    }

    pub fn scale_poly(&self, f: &Polynomial) -> PolyMatrix {
        self.map(|p| p * f)
    }

    pub fn map(&self, f: impl Fn(&Polynomial) -> Polynomial) -> PolyMatrix {
        PolyMatrix {
            rows: self.rows,
            cols: self.cols,
            nvars: self.nvars,
            entries: self.entries.iter().map(f).collect(),
        }
    }

    pub fn matmul(&self, rhs: &PolyMatrix) -> Result<PolyMatrix, PolyError> {
        if self.cols != rhs.rows {
            return Err(PolyError::DimMismatch {
                op: "matmul",
                lhs: format!("{}x{}", self.rows, self.cols),
                rhs: format!("{}x{}", rhs.rows, rhs.cols),
            });
        }
        if self.nvars != rhs.nvars {
            return Err(PolyError::VarMismatch(self.nvars, rhs.nvars));
        }
        let mut out = PolyMatrix::zero(self.rows, rhs.cols, self.nvars);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.entry(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let b = rhs.entry(k, j);
                    if b.is_zero() {
                        continue;
                    }
                    let prod = a * b;
                    *out.entry_mut(i, j) = &*out.entry(i, j) + &prod;
                }
            }
        }
        Ok(out)
    }

    pub fn evaluate(&self, point: &[Complex64]) -> Result<CMatrix, PolyError> {
        if point.len() != self.nvars {
            return Err(PolyError::BadPoint {
                got: point.len(),
                expected: self.nvars,
            });
        }
        Ok(CMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|p| p.eval(point)).collect(),
        })
    }

    /// Exact determinant of a square polynomial matrix (Laplace expansion;
    /// desk-scale sizes only).
    pub fn determinant(&self) -> Result<Polynomial, PolyError> {
        if self.rows != self.cols {
            return Err(PolyError::DimMismatch {
                op: "determinant",
                lhs: format!("{}x{}", self.rows, self.cols),
                rhs: "square".to_string(),
            });
        }
        Ok(det_rec(self, &(0..self.rows).collect::<Vec<_>>(), &(0..self.cols).collect::<Vec<_>>()))
    }

    /// Maximum numeric rank of the evaluated matrix over the trial points.
    /// At least one trial point is required.
    pub fn generic_rank(&self, trials: &[Vec<Complex64>]) -> Result<usize, PolyError> {
        if trials.is_empty() {
            return Err(PolyError::EmptyTrialSet);
        }
        let mut best = 0;
        for point in trials {
            let m = self.evaluate(point)?;
            best = best.max(m.numeric_rank());
        }
        Ok(best)
    }

    /// The gauge field `z -> sum over r x r minors m of |m(z)|^2`, returned
    /// through its list of minor polynomials. `r = 0` yields the constant 1
    /// (the empty minor), matching a differential of generic rank zero.
    pub fn minor_gauge(&self, r: usize) -> Result<MinorGauge, PolyError> {
        if r > self.rows || r > self.cols {
            return Err(PolyError::RankOutOfRange {
                r,
                rows: self.rows,
                cols: self.cols,
            });
        }
        if r == 0 {
            return Ok(MinorGauge {
                minors: vec![Polynomial::one(self.nvars)],
            });
        }
        let mut minors = Vec::new();
        for rows in combinations(self.rows, r) {
            for cols in combinations(self.cols, r) {
                let d = det_rec(self, &rows, &cols);
                if !d.is_zero() {
                    minors.push(d);
                }
            }
        }
        Ok(MinorGauge { minors })
    }
}

fn det_rec(m: &PolyMatrix, rows: &[usize], cols: &[usize]) -> Polynomial {
    debug_assert_eq!(rows.len(), cols.len());
    match rows.len() {
        0 => Polynomial::one(m.nvars),
        1 => m.entry(rows[0], cols[0]).clone(),
        _ => {
            let mut acc = Polynomial::zero(m.nvars);
            let rest: Vec<usize> = rows[1..].to_vec();
            for (pos, &c) in cols.iter().enumerate() {
                let pivot = m.entry(rows[0], c);
                if pivot.is_zero() {
                    continue;
                }
                let sub_cols: Vec<usize> = cols
                    .iter()
                    .copied()
                    .filter(|&x| x != c)
                    .collect();
                let minor = det_rec(m, &rest, &sub_cols);
                let term = pivot * &minor;
                if pos % 2 == 0 {
                    acc = &acc + &term;
                } else {
                    acc = &acc - &term;
                }
            }
            acc
        }
    }
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(n, k, i + 1, cur, out);
            cur.pop();
        }
    }
    rec(n, k, 0, &mut cur, &mut out);
    out
}

/// List of minor polynomials defining the nonnegative field
/// `z -> sum |m_i(z)|^2`.
#[derive(Clone)]
pub struct MinorGauge {
    pub minors: Vec<Polynomial>,
}

impl MinorGauge {
    pub fn value(&self, point: &[Complex64]) -> f64 {
        self.minors.iter().map(|m| m.eval(point).norm_sqr()).sum()
    }
}

/// Dense complex matrix, row-major. The numeric counterpart of `PolyMatrix`.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            entries: vec![Complex64::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        assert!(rows.iter().all(|x| x.len() == c));
        CMatrix {
            rows: r,
            cols: c,
            entries: rows.into_iter().flatten().collect(),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn adjoint(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, rhs.rows, "CMatrix matmul dimension mismatch");
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }

    pub fn scale(&self, c: Complex64) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|e| e * c).collect(),
        }
    }

    pub fn norm_inf(&self) -> f64 {
        self.entries.iter().map(|e| e.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|e| e.re.is_finite() && e.im.is_finite())
    }

    pub fn to_na(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_iterator(self.rows, self.cols, self.entries.iter().copied())
    }

    pub fn from_na(m: &DMatrix<Complex64>) -> CMatrix {
        let mut out = CMatrix::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out[(i, j)] = m[(i, j)];
            }
        }
        out
    }

    /// Numeric rank: singular values above the relative probe threshold.
    pub fn numeric_rank(&self) -> usize {
        if self.rows == 0 || self.cols == 0 {
            return 0;
        }
        let sv = self.to_na().singular_values();
        let max = sv.iter().copied().fold(0.0f64, f64::max);
        if max == 0.0 {
            return 0;
        }
        sv.iter()
            .filter(|&&s| s > RANK_PROBE_RELATIVE_THRESHOLD * max)
            .count()
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.entries[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.entries[i * self.cols + j]
    }
}

impl Add<&CMatrix> for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dims(), rhs.dims());
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .zip(&rhs.entries)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub<&CMatrix> for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dims(), rhs.dims());
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .zip(&rhs.entries)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|e| -e).collect(),
        }
    }
}

impl Mul<&CMatrix> for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs)
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                write!(f, "{:.4}{:+.4}i  ", self[(i, j)].re, self[(i, j)].im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl fmt::Debug for PolyMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "PolyMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                write!(f, "{:?};  ", self.entry(i, j))?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Moore-Penrose inverse truncated at a *fixed* rank `r`: the top `r`
/// singular triples are inverted, the rest discarded. Off the rank-drop locus
/// this is the honest pseudoinverse and varies smoothly with the matrix.
pub fn pinv_fixed_rank(m: &CMatrix, r: usize) -> Result<CMatrix, PolyError> {
    if r == 0 {
        return Ok(CMatrix::zeros(m.cols, m.rows));
    }
    if r > m.rows.min(m.cols) {
        return Err(PolyError::RankOutOfRange {
            r,
            rows: m.rows,
            cols: m.cols,
        });
    }
    let mut svd = m.to_na().svd(true, true);
    svd.sort_by_singular_values();
    let u = svd.u.as_ref().expect("svd with u");
    let v_t = svd.v_t.as_ref().expect("svd with v_t");
    if svd.singular_values[r - 1] == 0.0 {
        return Err(PolyError::RankDeficient { r, index: r - 1 });
    }
    // m = u * diag(s) * v_t, so pinv = v_t^H * diag(1/s) * u^H on the top-r block.
    let mut out = CMatrix::zeros(m.cols, m.rows);
    for k in 0..r {
        let inv_s = Complex64::new(1.0 / svd.singular_values[k], 0.0);
        for i in 0..m.cols {
            let vk = v_t[(k, i)].conj();
            for j in 0..m.rows {
                out[(i, j)] += vk * inv_s * u[(j, k)].conj();
            }
        }
    }
    Ok(out)
}
