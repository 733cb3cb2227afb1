//! The Cech-Hom cochain algebra over a polydisc cover.
//!
//! A cochain assigns to each ordered nerve tuple (repeats allowed, no
//! alternation) a matrix-valued entry: symbolic (`PolyMatrix`) or numeric
//! (`NumericField`, a smooth matrix-valued (0,q)-form off a singular set).
//! Entries carry a triple degree: Cech degree `p` (tuple length minus one),
//! form degree `q`, and Hom degree `r = l - k` for a block mapping source
//! degree `-l` to target degree `-k`. All entries of one cochain share the
//! same total degree `p + q + r`.
//!
//! Sign conventions (fixed here, relied on everywhere else):
//! * product of entries: `(fg) = (-1)^{(q1+r1) p2 + r1 q2} f_{a0..ap} g_{ap..}`
//!   where the first factor is the Cech-level sign and the second the Koszul
//!   sign of moving a Hom-degree past a form-degree;
//! * Cech differential: `(delta f)_{a0..a_{p+1}} = sum_{k=1}^{p} (-1)^k
//!   f_{..hat a_k..}` -- endpoints are never omitted, so `delta` vanishes on
//!   0-cochains and `(delta f)_{abc} = -f_{ac}` in Cech degree 1;
//! * antiholomorphic differential: `(dbar f)_{a0..ap} = (-1)^p dbar(f_{a0..ap})`.
//!
//! Tuples absent from the nerve have empty intersection and carry the zero
//! group: differentials and products silently drop contributions that would
//! land there.

use std::collections::BTreeMap;
use std::fmt;

use num::complex::Complex64;

use crate::current::{add_fields, compose_entries_numeric, dbar_field, NumericField};
use crate::polyalg::{GaussianRational, PolyMatrix};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CochainError {
    #[error("chart index {0} out of range ({1} charts)")]
    BadChart(usize, usize),
    #[error("nerve tuple {0:?} is empty")]
    EmptyTuple(Vec<usize>),
    #[error("nerve is missing singleton tuple ({0})")]
    MissingSingleton(usize),
    #[error("nerve is not closed under interior deletion: {parent:?} needs {child:?}")]
    NerveNotClosed {
        parent: Vec<usize>,
        child: Vec<usize>,
    },
    #[error("tuple {0:?} is not in the nerve")]
    TupleNotInNerve(Vec<usize>),
    #[error("polydisc has {center} center coordinates but {radii} radii")]
    BadPolydisc { center: usize, radii: usize },
    #[error("entry at {tuple:?} has degree p+q+r = {got}, cochain degree is {expected}")]
    DegreeMismatch {
        tuple: Vec<usize>,
        got: i32,
        expected: i32,
    },
    #[error("entry at {tuple:?} ({rows}x{cols}) does not match ranks {want_rows}x{want_cols}")]
    EntryDims {
        tuple: Vec<usize>,
        rows: usize,
        cols: usize,
        want_rows: usize,
        want_cols: usize,
    },
    #[error("source/target bundle families do not match for {0}")]
    FamilyMismatch(&'static str),
    #[error("numeric field at {tuple:?} declares form degree {field_q}, label says {label_q}")]
    FieldDegree {
        tuple: Vec<usize>,
        field_q: usize,
        label_q: usize,
    },
    #[error(transparent)]
    Poly(#[from] crate::polyalg::PolyError),
}

/// Closed polydisc: product of discs `|z_i - c_i| <= rho_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Polydisc {
    pub center: Vec<Complex64>,
    pub radii: Vec<f64>,
}

impl Polydisc {
    pub fn new(center: Vec<Complex64>, radii: Vec<f64>) -> Result<Self, CochainError> {
        if center.len() != radii.len() {
            return Err(CochainError::BadPolydisc {
                center: center.len(),
                radii: radii.len(),
            });
        }
        Ok(Polydisc { center, radii })
    }

    pub fn unit(nvars: usize) -> Self {
        Polydisc {
            center: vec![Complex64::new(0.0, 0.0); nvars],
            radii: vec![1.0; nvars],
        }
    }

    pub fn nvars(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, point: &[Complex64]) -> bool {
        point
            .iter()
            .zip(self.center.iter().zip(&self.radii))
            .all(|(z, (c, r))| (z - c).norm() <= *r)
    }
}

/// Quadrature resolution attached to a nerve cell.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub points_per_axis: usize,
}

impl GridSpec {
    /// Default base resolution: 64 points per real axis in one complex
    /// variable, 24 in two or more.
    pub fn default_for(nvars: usize) -> Self {
        GridSpec {
            points_per_axis: if nvars <= 1 { 64 } else { 24 },
        }
    }
}

/// Ordered tuple of chart indices, repeats allowed.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TupleKey(pub Vec<usize>);

impl TupleKey {
    pub fn p(&self) -> usize {
        self.0.len() - 1
    }

    pub fn first(&self) -> usize {
        self.0[0]
    }

    pub fn last(&self) -> usize {
        *self.0.last().unwrap()
    }

    /// Tuple with the interior position `k` removed (`1 <= k <= p-1`... the
    /// caller guarantees `k` is interior).
    fn delete(&self, k: usize) -> TupleKey {
        let mut v = self.0.clone();
        v.remove(k);
        TupleKey(v)
    }
}

impl fmt::Debug for TupleKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

#[derive(Clone, Debug)]
pub struct NerveCell {
    pub polydisc: Polydisc,
    pub grid: GridSpec,
}

#[derive(Clone, Debug)]
pub struct Chart {
    pub polydisc: Polydisc,
}

/// A finite cover of polydiscs together with its declared nerve: the ordered
/// tuples with nonempty intersection, each carrying an intersection polydisc
/// and a quadrature grid.
#[derive(Clone, Debug)]
pub struct Cover {
    pub nvars: usize,
    pub charts: Vec<Chart>,
    pub nerve: BTreeMap<TupleKey, NerveCell>,
}

impl Cover {
    /// Validates chart indices, singleton presence, and closure of the nerve
    /// under interior deletion and contiguous restriction (so that `delta`
    /// and products never need a missing restriction).
    pub fn validate(&self) -> Result<(), CochainError> {
        for (t, cell) in &self.nerve {
            if t.0.is_empty() {
                return Err(CochainError::EmptyTuple(vec![]));
            }
            for &c in &t.0 {
                if c >= self.charts.len() {
                    return Err(CochainError::BadChart(c, self.charts.len()));
                }
            }
            if cell.polydisc.nvars() != self.nvars {
                return Err(CochainError::BadPolydisc {
                    center: cell.polydisc.nvars(),
                    radii: self.nvars,
                });
            }
            if t.0.len() >= 2 {
                // Interior deletions, the leading prefix, and the trailing
                // suffix together generate all needed subsequences.
                for k in 1..t.0.len() - 1 {
                    let child = t.delete(k);
                    if !self.nerve.contains_key(&child) {
                        return Err(CochainError::NerveNotClosed {
                            parent: t.0.clone(),
                            child: child.0,
                        });
                    }
                }
                for sub in [
                    TupleKey(t.0[..t.0.len() - 1].to_vec()),
                    TupleKey(t.0[1..].to_vec()),
                ] {
                    if !self.nerve.contains_key(&sub) {
                        return Err(CochainError::NerveNotClosed {
                            parent: t.0.clone(),
                            child: sub.0,
                        });
                    }
                }
            }
        }
        for c in 0..self.charts.len() {
            if !self.nerve.contains_key(&TupleKey(vec![c])) {
                return Err(CochainError::MissingSingleton(c));
            }
        }
        Ok(())
    }

    /// Cover by `n_charts` copies of one polydisc with the full nerve up to
    /// tuples of `max_len` indices. Convenient for desk fixtures where all
    /// charts overlap everywhere.
    pub fn full_overlap(
        nvars: usize,
        n_charts: usize,
        max_len: usize,
        polydisc: Polydisc,
    ) -> Cover {
        let grid = GridSpec::default_for(nvars);
        let mut nerve = BTreeMap::new();
        let mut stack: Vec<Vec<usize>> = (0..n_charts).map(|c| vec![c]).collect();
        while let Some(t) = stack.pop() {
            if t.len() < max_len {
                for c in 0..n_charts {
                    let mut longer = t.clone();
                    longer.push(c);
                    stack.push(longer);
                }
            }
            nerve.insert(
                TupleKey(t),
                NerveCell {
                    polydisc: polydisc.clone(),
                    grid: grid.clone(),
                },
            );
        }
        Cover {
            nvars,
            charts: (0..n_charts)
                .map(|_| Chart {
                    polydisc: polydisc.clone(),
                })
                .collect(),
            nerve,
        }
    }

    pub fn cell(&self, tuple: &TupleKey) -> Result<&NerveCell, CochainError> {
        self.nerve
            .get(tuple)
            .ok_or_else(|| CochainError::TupleNotInNerve(tuple.0.clone()))
    }
}

/// Ranks of a bounded graded bundle family: `ranks[chart][j]` is the rank of
/// the degree `-j` piece on that chart. Trailing zeros are allowed.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GradedBundleFamily {
    pub ranks: Vec<Vec<usize>>,
}

impl GradedBundleFamily {
    /// Same ranks on every chart.
    pub fn uniform(n_charts: usize, ranks: Vec<usize>) -> Self {
        GradedBundleFamily {
            ranks: vec![ranks; n_charts],
        }
    }

    /// Rank-one family concentrated in degree zero: sections of the trivial
    /// line bundle. Vector-valued cochains are Hom cochains out of this.
    pub fn unit(n_charts: usize) -> Self {
        Self::uniform(n_charts, vec![1])
    }

    pub fn rank(&self, chart: usize, j: usize) -> usize {
        self.ranks
            .get(chart)
            .and_then(|r| r.get(j))
            .copied()
            .unwrap_or(0)
    }

    /// Largest degree index with nonzero rank on any chart.
    pub fn length(&self) -> usize {
        self.ranks
            .iter()
            .map(|r| {
                r.iter()
                    .rposition(|&x| x > 0)
                    .map_or(0, |i| i)
            })
            .max()
            .unwrap_or(0)
    }

    pub fn n_charts(&self) -> usize {
        self.ranks.len()
    }
}

/// Degree bookkeeping of an entry: form degree `q` and the source/target
/// bundle degrees `-l -> -k`. The Cech degree is implicit in the tuple.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub struct DegreeLabel {
    pub q: usize,
    pub l: usize,
    pub k: usize,
}

impl DegreeLabel {
    pub fn r(&self) -> i32 {
        self.l as i32 - self.k as i32
    }

    pub fn total(&self, p: usize) -> i32 {
        p as i32 + self.q as i32 + self.r()
    }
}

/// One entry of a cochain: exact polynomial block or numeric field.
#[derive(Clone)]
pub enum Entry {
    Poly(PolyMatrix),
    Field(NumericField),
}

impl Entry {
    pub fn dims(&self) -> (usize, usize) {
        match self {
            Entry::Poly(m) => (m.rows, m.cols),
            Entry::Field(f) => (f.rows, f.cols),
        }
    }

    pub fn is_exact_zero(&self) -> bool {
        match self {
            Entry::Poly(m) => m.is_zero(),
            // A field with no wedge components is the zero section; pruning
            // these is what terminates the Neumann-style series assemblies.
            Entry::Field(f) => f.components.is_empty(),
        }
    }

    pub fn negate(&self) -> Entry {
        match self {
            Entry::Poly(m) => Entry::Poly(m.scale(&-GaussianRational::one())),
            Entry::Field(f) => Entry::Field(f.scale(Complex64::new(-1.0, 0.0))),
        }
    }

    pub fn as_poly(&self) -> Option<&PolyMatrix> {
        match self {
            Entry::Poly(m) => Some(m),
            Entry::Field(_) => None,
        }
    }
}

impl fmt::Debug for Entry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Entry::Poly(m) => write!(f, "Poly({}x{})", m.rows, m.cols),
            Entry::Field(x) => write!(f, "Field({}x{}, q={})", x.rows, x.cols, x.q),
        }
    }
}

/// A Cech cochain with values in `Hom(source, target)`.
#[derive(Clone)]
pub struct HomCochain {
    pub source: GradedBundleFamily,
    pub target: GradedBundleFamily,
    pub degree: i32,
    pub entries: BTreeMap<(TupleKey, DegreeLabel), Entry>,
}

impl HomCochain {
    pub fn zero(source: GradedBundleFamily, target: GradedBundleFamily, degree: i32) -> Self {
        HomCochain {
            source,
            target,
            degree,
            entries: BTreeMap::new(),
        }
    }

    /// The identity cochain in `Hom(F, F)`: identity blocks on singleton
    /// tuples in every degree with nonzero rank.
    pub fn identity(family: &GradedBundleFamily, nvars: usize) -> Self {
        let mut out = Self::zero(family.clone(), family.clone(), 0);
        for (chart, ranks) in family.ranks.iter().enumerate() {
            for (j, &r) in ranks.iter().enumerate() {
                if r == 0 {
                    continue;
                }
                out.entries.insert(
                    (TupleKey(vec![chart]), DegreeLabel { q: 0, l: j, k: j }),
                    Entry::Poly(PolyMatrix::identity(r, nvars)),
                );
            }
        }
        out
    }

    /// Inserts (accumulating) an entry after degree and dimension checks.
    pub fn add_entry(
        &mut self,
        tuple: TupleKey,
        label: DegreeLabel,
        entry: Entry,
    ) -> Result<(), CochainError> {
        let p = tuple.p();
        if label.total(p) != self.degree {
            return Err(CochainError::DegreeMismatch {
                tuple: tuple.0.clone(),
                got: label.total(p),
                expected: self.degree,
            });
        }
        let want_rows = self.target.rank(tuple.first(), label.k);
        let want_cols = self.source.rank(tuple.last(), label.l);
        let (rows, cols) = entry.dims();
        if rows != want_rows || cols != want_cols {
            return Err(CochainError::EntryDims {
                tuple: tuple.0.clone(),
                rows,
                cols,
                want_rows,
                want_cols,
            });
        }
        if let Entry::Field(f) = &entry {
            if f.q != label.q {
                return Err(CochainError::FieldDegree {
                    tuple: tuple.0.clone(),
                    field_q: f.q,
                    label_q: label.q,
                });
            }
        }
        self.accumulate(tuple, label, entry);
        Ok(())
    }

    /// Adds `entry` into the slot, merging with an existing value and pruning
    /// exact zeros.
    fn accumulate(&mut self, tuple: TupleKey, label: DegreeLabel, entry: Entry) {
        if entry.is_exact_zero() {
            return;
        }
        let key = (tuple, label);
        match self.entries.remove(&key) {
            None => {
                self.entries.insert(key, entry);
            }
            Some(existing) => {
                let merged = add_entries(&existing, &entry);
                if !merged.is_exact_zero() {
                    self.entries.insert(key, merged);
                }
            }
        }
    }

    pub fn get(&self, tuple: &TupleKey, label: &DegreeLabel) -> Option<&Entry> {
        self.entries.get(&(tuple.clone(), *label))
    }

    /// True when every entry is an exactly zero polynomial block (numeric
    /// fields never count as zero).
    pub fn is_symbolically_zero(&self) -> bool {
        self.entries.values().all(|e| e.is_exact_zero())
    }

    pub fn has_fields(&self) -> bool {
        self.entries
            .values()
            .any(|e| matches!(e, Entry::Field(_)))
    }

    /// Keeps only entries with the given source/target degrees.
    pub fn restrict_component(&self, l: usize, k: usize) -> HomCochain {
        let mut out = Self::zero(self.source.clone(), self.target.clone(), self.degree);
        for ((t, label), e) in &self.entries {
            if label.l == l && label.k == k {
                out.entries.insert((t.clone(), *label), e.clone());
            }
        }
        out
    }

    /// Largest total polynomial degree over symbolic entries.
    pub fn max_poly_degree(&self) -> usize {
        self.entries
            .values()
            .filter_map(|e| e.as_poly().and_then(|m| m.total_degree()))
            .max()
            .unwrap_or(0)
    }

    pub fn scale_i64(&self, c: i64) -> HomCochain {
        let mut out = self.clone();
        let gc = GaussianRational::from_integers(c, 0);
        let fc = Complex64::new(c as f64, 0.0);
        out.entries = self
            .entries
            .iter()
            .filter_map(|(k, e)| {
                if c == 0 {
                    return None;
                }
                let scaled = match e {
                    Entry::Poly(m) => Entry::Poly(m.scale(&gc)),
                    Entry::Field(f) => Entry::Field(f.scale(fc)),
                };
                Some((k.clone(), scaled))
            })
            .collect();
        out
    }
}

impl fmt::Debug for HomCochain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "HomCochain(degree {}) {{", self.degree)?;
        for ((t, label), e) in &self.entries {
            writeln!(
                f,
                "  {:?} q={} l={} k={}: {:?}",
                t, label.q, label.l, label.k, e
            )?;
        }
        write!(f, "}}")
    }
}

pub(crate) fn add_entries(a: &Entry, b: &Entry) -> Entry {
    match (a, b) {
        (Entry::Poly(x), Entry::Poly(y)) => {
            Entry::Poly(PolyMatrix::from_fn(x.rows, x.cols, x.nvars, |i, j| {
                x.entry(i, j) + y.entry(i, j)
            }))
        }
        _ => Entry::Field(add_fields(a, b)),
    }
}

/// Sum of two cochains of the same degree and Hom type.
pub fn cochain_add(f: &HomCochain, g: &HomCochain) -> Result<HomCochain, CochainError> {
    if f.source != g.source || f.target != g.target {
        return Err(CochainError::FamilyMismatch("cochain_add"));
    }
    if f.degree != g.degree {
        return Err(CochainError::DegreeMismatch {
            tuple: vec![],
            got: g.degree,
            expected: f.degree,
        });
    }
    let mut out = f.clone();
    for ((t, label), e) in &g.entries {
        out.accumulate(t.clone(), *label, e.clone());
    }
    Ok(out)
}

pub fn cochain_sub(f: &HomCochain, g: &HomCochain) -> Result<HomCochain, CochainError> {
    cochain_add(f, &g.scale_i64(-1))
}

/// Cochain product `fg` for `f` in `Hom(B, C)` and `g` in `Hom(A, B)`.
///
/// Entries compose along shared end/start charts; output tuples outside the
/// nerve are dropped (they live over the empty set). The sign is
/// `(-1)^{(q1+r1) p2 + r1 q2}` per pair of entries.
pub fn cochain_product(
    f: &HomCochain,
    g: &HomCochain,
    cover: &Cover,
) -> Result<HomCochain, CochainError> {
    if f.source != g.target {
        return Err(CochainError::FamilyMismatch("cochain_product"));
    }
    let mut out = HomCochain::zero(g.source.clone(), f.target.clone(), f.degree + g.degree);
    for ((t1, l1), e1) in &f.entries {
        for ((t2, l2), e2) in &g.entries {
            if t1.last() != t2.first() || l1.l != l2.k {
                continue;
            }
            let mut joined = t1.0.clone();
            joined.extend_from_slice(&t2.0[1..]);
            let joined = TupleKey(joined);
            if !cover.nerve.contains_key(&joined) {
                continue;
            }
            let p2 = t2.p() as i32;
            let exponent = (l1.q as i32 + l1.r()) * p2 + l1.r() * l2.q as i32;
            let sign = if exponent.rem_euclid(2) == 0 { 1 } else { -1 };
            let label = DegreeLabel {
                q: l1.q + l2.q,
                l: l2.l,
                k: l1.k,
            };
            let entry = compose_entries(e1, e2, sign)?;
            out.add_entry(joined, label, entry)?;
        }
    }
    Ok(out)
}

fn compose_entries(a: &Entry, b: &Entry, sign: i32) -> Result<Entry, CochainError> {
    match (a, b) {
        (Entry::Poly(x), Entry::Poly(y)) => {
            let mut prod = x.matmul(y)?;
            if sign < 0 {
                prod = prod.scale(&-GaussianRational::one());
            }
            Ok(Entry::Poly(prod))
        }
        _ => Ok(Entry::Field(compose_entries_numeric(a, b, sign))),
    }
}

/// Cech differential. Endpoint charts are never omitted.
pub fn delta(f: &HomCochain, cover: &Cover) -> Result<HomCochain, CochainError> {
    let mut out = HomCochain::zero(f.source.clone(), f.target.clone(), f.degree + 1);
    for ((t, label), e) in &f.entries {
        // Insert a chart at interior position `k` of the extended tuple; the
        // deletion of position k recovers `t`.
        for k in 1..=t.0.len() - 1 {
            for c in 0..cover.charts.len() {
                let mut v = t.0.clone();
                v.insert(k, c);
                let parent = TupleKey(v);
                if !cover.nerve.contains_key(&parent) {
                    continue;
                }
                let entry = if k % 2 == 0 { e.clone() } else { e.negate() };
                out.add_entry(parent, *label, entry)?;
            }
        }
    }
    Ok(out)
}

/// Antiholomorphic differential, `(-1)^p` per entry. Symbolic entries are
/// holomorphic and contribute nothing; numeric entries are differentiated by
/// central differences with step `fd_step` relative to the domain radii.
pub fn dbar(f: &HomCochain, cover: &Cover, fd_step: f64) -> Result<HomCochain, CochainError> {
    let mut out = HomCochain::zero(f.source.clone(), f.target.clone(), f.degree + 1);
    for ((t, label), e) in &f.entries {
        let field = match e {
            Entry::Poly(_) => continue,
            Entry::Field(field) => field,
        };
        let cell = cover.cell(t)?;
        let sign = if t.p() % 2 == 0 { 1.0 } else { -1.0 };
        let d = dbar_field(field, &cell.polydisc, fd_step, sign);
        if d.components.is_empty() {
            continue;
        }
        let label = DegreeLabel {
            q: label.q + 1,
            ..*label
        };
        out.add_entry(t.clone(), label, Entry::Field(d))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyalg::Polynomial;

    fn unit_cover(n_charts: usize, max_len: usize) -> Cover {
        Cover::full_overlap(1, n_charts, max_len, Polydisc::unit(1))
    }

    fn scalar_entry(c: i64) -> Entry {
        Entry::Poly(PolyMatrix::from_fn(1, 1, 1, |_, _| {
            Polynomial::constant(1, GaussianRational::from_integers(c, 0))
        }))
    }

    fn line(n_charts: usize) -> GradedBundleFamily {
        GradedBundleFamily::uniform(n_charts, vec![1])
    }

    /// Rank-one cochain with a polynomial entry on every nerve tuple of Cech
    /// degree `p`, value depending injectively on the tuple.
    fn dense_cochain(cover: &Cover, p: usize, salt: i64) -> HomCochain {
        let fam = line(cover.charts.len());
        let mut f = HomCochain::zero(fam.clone(), fam, p as i32);
        for t in cover.nerve.keys().filter(|t| t.p() == p) {
            let mut code = salt;
            for &c in &t.0 {
                code = code * 7 + c as i64 + 1;
            }
            f.add_entry(t.clone(), DegreeLabel { q: 0, l: 0, k: 0 }, scalar_entry(code))
                .unwrap();
        }
        f
    }

    fn entry_value(f: &HomCochain, t: &[usize]) -> i64 {
        match f.get(&TupleKey(t.to_vec()), &DegreeLabel { q: 0, l: 0, k: 0 }) {
            None => 0,
            Some(Entry::Poly(m)) => {
                let c = m.entry(0, 0).coefficient(&crate::polyalg::Monomial(vec![0]));
                // test-only: coefficients stay small integers
                let f = c.to_complex();
                f.re.round() as i64
            }
            _ => panic!("expected polynomial entry"),
        }
    }

    #[test]
    fn cover_validation_catches_gaps() {
        let cover = unit_cover(2, 3);
        cover.validate().unwrap();
        let mut broken = cover.clone();
        broken.nerve.remove(&TupleKey(vec![0]));
        assert!(broken.validate().is_err());
        let mut broken2 = cover.clone();
        broken2.nerve.remove(&TupleKey(vec![0, 1]));
        assert!(matches!(
            broken2.validate(),
            Err(CochainError::NerveNotClosed { .. })
        ));
    }

    #[test]
    fn delta_on_degree_one_restricts_middle() {
        // (delta f)_{abc} = -f_{ac}: the only interior deletion.
        let cover = unit_cover(3, 3);
        let f = dense_cochain(&cover, 1, 3);
        let df = delta(&f, &cover).unwrap();
        assert_eq!(entry_value(&df, &[0, 1, 2]), -entry_value(&f, &[0, 2]));
        assert_eq!(entry_value(&df, &[2, 0, 1]), -entry_value(&f, &[2, 1]));
        // Degenerate tuple: (delta f)_{aab} = -f_{ab}.
        assert_eq!(entry_value(&df, &[0, 0, 1]), -entry_value(&f, &[0, 1]));
    }

    #[test]
    fn delta_vanishes_on_chart_cochains() {
        let cover = unit_cover(3, 3);
        let f = dense_cochain(&cover, 0, 5);
        let df = delta(&f, &cover).unwrap();
        assert!(df.entries.is_empty());
    }

    #[test]
    fn delta_squares_to_zero() {
        let cover = unit_cover(3, 4);
        for p in [1usize, 2] {
            let f = dense_cochain(&cover, p, 11);
            let ddf = delta(&delta(&f, &cover).unwrap(), &cover).unwrap();
            assert!(
                ddf.is_symbolically_zero(),
                "delta^2 != 0 on degree {}: {:?}",
                p,
                ddf
            );
        }
    }

    #[test]
    fn product_cech_sign() {
        // f of Hom degree 1 on charts (p=0, r=1), g of Cech degree 1:
        // (fg)_{ab} = -f_a g_{ab}.
        let cover = unit_cover(2, 3);
        let fam0 = GradedBundleFamily::uniform(2, vec![1, 1]);
        let fam = line(2);
        // f: Hom(fam0, fam) with l=1, k=0 blocks on singletons.
        let mut f = HomCochain::zero(fam0.clone(), fam.clone(), 1);
        for c in 0..2 {
            f.add_entry(
                TupleKey(vec![c]),
                DegreeLabel { q: 0, l: 1, k: 0 },
                scalar_entry(c as i64 + 2),
            )
            .unwrap();
        }
        // g: Hom(fam, fam0)-valued of Cech degree 1 landing in degree -1.
        let mut g = HomCochain::zero(fam.clone(), fam0.clone(), 0);
        g.add_entry(
            TupleKey(vec![0, 1]),
            DegreeLabel { q: 0, l: 0, k: 1 },
            scalar_entry(5),
        )
        .unwrap();
        let fg = cochain_product(&f, &g, &cover).unwrap();
        // f_0 = 2, g_{01} = 5, sign -1.
        assert_eq!(entry_value(&fg, &[0, 1]), -10);
    }

    #[test]
    fn product_is_associative() {
        let cover = unit_cover(3, 4);
        let f = dense_cochain(&cover, 1, 2);
        let g = dense_cochain(&cover, 1, 9);
        let h = dense_cochain(&cover, 1, 17);
        let left = cochain_product(&cochain_product(&f, &g, &cover).unwrap(), &h, &cover).unwrap();
        let right =
            cochain_product(&f, &cochain_product(&g, &h, &cover).unwrap(), &cover).unwrap();
        let diff = cochain_sub(&left, &right).unwrap();
        assert!(diff.is_symbolically_zero());
        assert_eq!(left.degree, 3);
    }

    #[test]
    fn delta_is_a_graded_derivation() {
        let cover = unit_cover(3, 4);
        for (pf, pg) in [(0usize, 0usize), (0, 1), (1, 0), (1, 1), (2, 0)] {
            let f = dense_cochain(&cover, pf, 23);
            let g = dense_cochain(&cover, pg, 31);
            let lhs = delta(&cochain_product(&f, &g, &cover).unwrap(), &cover).unwrap();
            let t1 = cochain_product(&delta(&f, &cover).unwrap(), &g, &cover).unwrap();
            let sign = if pf % 2 == 0 { 1 } else { -1 };
            let t2 = cochain_product(&f, &delta(&g, &cover).unwrap(), &cover)
                .unwrap()
                .scale_i64(sign);
            let rhs = cochain_add(&t1, &t2).unwrap();
            let diff = cochain_sub(&lhs, &rhs).unwrap();
            assert!(
                diff.is_symbolically_zero(),
                "Leibniz fails at (pf, pg) = ({pf}, {pg})"
            );
        }
    }

    #[test]
    fn identity_is_neutral() {
        let cover = unit_cover(3, 4);
        let f = dense_cochain(&cover, 1, 41);
        let id = HomCochain::identity(&line(3), 1);
        let left = cochain_product(&id, &f, &cover).unwrap();
        let right = cochain_product(&f, &id, &cover).unwrap();
        assert!(cochain_sub(&left, &f).unwrap().is_symbolically_zero());
        assert!(cochain_sub(&right, &f).unwrap().is_symbolically_zero());
    }

    #[test]
    fn entry_checks_reject_bad_shapes() {
        let fam = line(2);
        let mut f = HomCochain::zero(fam.clone(), fam, 0);
        // wrong total degree
        assert!(f
            .add_entry(
                TupleKey(vec![0, 1]),
                DegreeLabel { q: 0, l: 0, k: 0 },
                scalar_entry(1)
            )
            .is_err());
        // wrong dimensions
        let bad = Entry::Poly(PolyMatrix::zero(2, 2, 1));
        assert!(f
            .add_entry(TupleKey(vec![0]), DegreeLabel { q: 0, l: 0, k: 0 }, bad)
            .is_err());
    }
}
