//! Twisting cochains and the operator `D`, with validators for the structure
//! equations and constructive extension by exact lifting.
//!
//! Everything here stays on the symbolic layer: entries are polynomial
//! matrices and every equation is checked exactly. The numeric layer only
//! enters through `nabla`, which subtracts the finite-difference dbar.

mod lift;

pub use lift::{hom_boundary, lift_preimage, ChartComplex, HomElement};
pub(crate) use lift::mat_sub;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::cochain::{
    cochain_add, cochain_product, cochain_sub, dbar, delta, CochainError, Cover, DegreeLabel,
    Entry, GradedBundleFamily, HomCochain, TupleKey,
};
use crate::current::FD_STEP;
use crate::polyalg::{GaussianRational, PolyError, PolyMatrix};

#[derive(Debug, Error)]
pub enum TwistError {
    #[error("bundle families do not match in {0}")]
    BundleMismatch(&'static str),
    #[error("operation requires exact polynomial entries")]
    NotPolynomial,
    #[error("invalid input: {0}")]
    BadInput(String),
    #[error("equation hypothesis fails at level {k}")]
    HypothesisFailed { k: usize },
    #[error("differential does not square to zero on chart {chart}")]
    DifferentialSquare { chart: usize },
    #[error("gluing map on tuple {tuple:?} does not commute with the differentials")]
    NotChainMap { tuple: Vec<usize> },
    #[error("diagonal gluing on chart {chart} is not the identity")]
    DiagonalNotIdentity { chart: usize },
    #[error("right-hand side is not closed at block ({k}, {l})")]
    NotClosed { k: usize, l: usize },
    #[error("no solution within degree bound {bound} (tuple {tuple:?}, level {level})")]
    NoLift {
        bound: usize,
        tuple: Vec<usize>,
        level: usize,
    },
    #[error("induction finished with a nonzero residual; input data is inconsistent")]
    ResidualAfterInduction,
    #[error(transparent)]
    Cochain(#[from] CochainError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// A twisting cochain: total degree 1, pure Cech/Hom bidegrees, polynomial
/// entries. The structure equations are checked by `validate_twisting`, not
/// by the constructor.
#[derive(Clone, Debug)]
pub struct TwistingCochain {
    pub bundles: GradedBundleFamily,
    pub nvars: usize,
    pub a: HomCochain,
}

impl TwistingCochain {
    pub fn new(
        bundles: GradedBundleFamily,
        nvars: usize,
        a: HomCochain,
    ) -> Result<Self, TwistError> {
        if a.source != bundles || a.target != bundles {
            return Err(TwistError::BundleMismatch("twisting cochain"));
        }
        if a.degree != 1 {
            return Err(TwistError::BadInput(format!(
                "twisting cochain has total degree {}, want 1",
                a.degree
            )));
        }
        for ((t, label), e) in &a.entries {
            let m = e.as_poly().ok_or(TwistError::NotPolynomial)?;
            if label.q != 0 || m.nvars != nvars {
                return Err(TwistError::BadInput(format!(
                    "entry at {:?} has q = {} and {} variables",
                    t.0, label.q, m.nvars
                )));
            }
        }
        Ok(TwistingCochain { bundles, nvars, a })
    }

    /// The Cech-degree-k part `a^k`.
    pub fn level(&self, k: usize) -> HomCochain {
        cech_component(&self.a, k)
    }

    /// The chart's complex `(F_alpha, a0_alpha)`.
    pub fn chart_complex(&self, chart: usize) -> Result<ChartComplex, TwistError> {
        chart_complex_from(&self.a, &self.bundles, self.nvars, chart)
    }
}

/// A morphism of twisted complexes: `D phi = 0` with `a` from the target and
/// `b` from the source.
#[derive(Clone, Debug)]
pub struct Morphism {
    pub source: TwistingCochain,
    pub target: TwistingCochain,
    pub phi: HomCochain,
}

impl Morphism {
    pub fn is_closed(&self, cover: &Cover) -> Result<bool, TwistError> {
        Ok(d_op(&self.phi, &self.target, &self.source, cover)?.is_symbolically_zero())
    }
}

/// A degree `-1` cochain witnessing relations like `phi psi - id = D alpha`.
#[derive(Clone, Debug)]
pub struct Homotopy {
    pub source: TwistingCochain,
    pub target: TwistingCochain,
    pub alpha: HomCochain,
}

/// Entries of `f` in Cech degree `p` only.
pub fn cech_component(f: &HomCochain, p: usize) -> HomCochain {
    let mut out = HomCochain::zero(f.source.clone(), f.target.clone(), f.degree);
    for ((t, label), e) in &f.entries {
        if t.p() == p {
            out.entries.insert((t.clone(), *label), e.clone());
        }
    }
    out
}

/// Largest coefficient magnitude over all polynomial entries; exact zero maps
/// to 0.0.
fn poly_sup_coeff(m: &PolyMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.rows {
        for j in 0..m.cols {
            for (_, c) in m.entry(i, j).terms() {
                worst = worst.max(c.to_complex().norm());
            }
        }
    }
    worst
}

fn chart_complex_from(
    a: &HomCochain,
    bundles: &GradedBundleFamily,
    nvars: usize,
    chart: usize,
) -> Result<ChartComplex, TwistError> {
    let ranks = bundles
        .ranks
        .get(chart)
        .cloned()
        .ok_or_else(|| TwistError::BadInput(format!("no chart {chart}")))?;
    let mut blocks = BTreeMap::new();
    let key = TupleKey(vec![chart]);
    for l in 1..ranks.len() {
        let label = DegreeLabel { q: 0, l, k: l - 1 };
        match a.get(&key, &label) {
            None => {}
            Some(Entry::Poly(m)) => {
                blocks.insert(l, m.clone());
            }
            Some(Entry::Field(_)) => return Err(TwistError::NotPolynomial),
        }
    }
    ChartComplex::new(nvars, ranks, blocks)
}

/// `D phi = delta phi + a phi - (-1)^{deg phi} phi b`.
pub fn d_op(
    phi: &HomCochain,
    a: &TwistingCochain,
    b: &TwistingCochain,
    cover: &Cover,
) -> Result<HomCochain, TwistError> {
    if phi.source != b.bundles {
        return Err(TwistError::BundleMismatch("D: phi source"));
    }
    if phi.target != a.bundles {
        return Err(TwistError::BundleMismatch("D: phi target"));
    }
    let mut out = delta(phi, cover)?;
    out = cochain_add(&out, &cochain_product(&a.a, phi, cover)?)?;
    let sign = if phi.degree.rem_euclid(2) == 0 { -1 } else { 1 };
    let right = cochain_product(phi, &b.a, cover)?.scale_i64(sign);
    Ok(cochain_add(&out, &right)?)
}

/// `nabla = D - dbar`. On holomorphic cochains this is `D` itself.
pub fn nabla(
    phi: &HomCochain,
    a: &TwistingCochain,
    b: &TwistingCochain,
    cover: &Cover,
) -> Result<HomCochain, TwistError> {
    let d = d_op(phi, a, b, cover)?;
    let db = dbar(phi, cover, FD_STEP)?;
    Ok(cochain_sub(&d, &db)?)
}

/// One residual line of `validate_twisting`: the structure equation at Cech
/// level `k` over one tuple. `magnitude` is 0.0 exactly when the residual
/// matrix vanishes identically.
#[derive(Clone, Debug)]
pub struct ResidualItem {
    pub k: usize,
    pub tuple: Vec<usize>,
    pub magnitude: f64,
}

#[derive(Clone, Debug)]
pub struct TwistingReport {
    pub residuals: Vec<ResidualItem>,
    pub diagonal_defects: Vec<usize>,
    pub passes: bool,
}

/// Checks `delta a + a a = 0` per level and tuple, and the identity diagonal.
pub fn validate_twisting(t: &TwistingCochain, cover: &Cover) -> Result<TwistingReport, TwistError> {
    let res = cochain_add(
        &delta(&t.a, cover)?,
        &cochain_product(&t.a, &t.a, cover)?,
    )?;
    let mut by_tuple: BTreeMap<TupleKey, f64> = BTreeMap::new();
    for ((tuple, _), e) in &res.entries {
        let m = e.as_poly().ok_or(TwistError::NotPolynomial)?;
        let mag = poly_sup_coeff(m);
        let slot = by_tuple.entry(tuple.clone()).or_insert(0.0);
        *slot = slot.max(mag);
    }
    let mut residuals = Vec::new();
    for tuple in cover.nerve.keys() {
        residuals.push(ResidualItem {
            k: tuple.p(),
            tuple: tuple.0.clone(),
            magnitude: by_tuple.get(tuple).copied().unwrap_or(0.0),
        });
    }

    let mut diagonal_defects = Vec::new();
    for chart in 0..t.bundles.n_charts() {
        let key = TupleKey(vec![chart, chart]);
        if !cover.nerve.contains_key(&key) {
            continue;
        }
        let mut ok = true;
        for (l, &rank) in t.bundles.ranks[chart].iter().enumerate() {
            if rank == 0 {
                continue;
            }
            let id = PolyMatrix::identity(rank, t.nvars);
            match t.a.get(&key, &DegreeLabel { q: 0, l, k: l }) {
                Some(Entry::Poly(m)) if mat_sub(m, &id).is_zero() => {}
                _ => ok = false,
            }
        }
        if !ok {
            diagonal_defects.push(chart);
        }
    }

    let passes =
        residuals.iter().all(|r| r.magnitude == 0.0) && diagonal_defects.is_empty();
    Ok(TwistingReport {
        residuals,
        diagonal_defects,
        passes,
    })
}

/// The level-`m` obstruction for extending the partial morphism `prefix`
/// (levels below `m`). Errors if the lower-level equations do not hold.
pub fn obstruction_rho(
    prefix: &HomCochain,
    m: usize,
    a: &TwistingCochain,
    b: &TwistingCochain,
    cover: &Cover,
) -> Result<HomCochain, TwistError> {
    if prefix.entries.keys().any(|(t, _)| t.p() >= m) {
        return Err(TwistError::BadInput(format!(
            "prefix carries entries at Cech degree >= {m}"
        )));
    }
    let full = d_op(prefix, a, b, cover)?;
    for k in 0..m {
        if !cech_component(&full, k).is_symbolically_zero() {
            return Err(TwistError::HypothesisFailed { k });
        }
    }
    Ok(cech_component(&full, m))
}

fn default_bound(parts: &[&HomCochain]) -> usize {
    parts.iter().map(|c| c.max_poly_degree()).max().unwrap_or(0) + 2
}

/// Level-by-level solve of `defect(x) = 0` for the Cech components of `x`
/// above `start`, given that lower levels already satisfy their equations.
/// At each level the per-tuple block `x^m_T` obeys `bd(x^m_T) = -(-1)^m
/// defect_T`, an exact lifting problem in the chart-pair Hom complex.
fn induct_levels(
    mut x: HomCochain,
    start: usize,
    defect: &dyn Fn(&HomCochain) -> Result<HomCochain, TwistError>,
    target_cx: &dyn Fn(usize) -> Result<ChartComplex, TwistError>,
    source_cx: &dyn Fn(usize) -> Result<ChartComplex, TwistError>,
    cover: &Cover,
    bound: usize,
) -> Result<HomCochain, TwistError> {
    let max_p = cover.nerve.keys().map(|t| t.p()).max().unwrap_or(0);
    for m in start..=max_p {
        let level = cech_component(&defect(&x)?, m);
        if level.entries.is_empty() {
            continue;
        }
        let mut by_tuple: BTreeMap<TupleKey, Vec<(DegreeLabel, PolyMatrix)>> = BTreeMap::new();
        for ((t, label), e) in &level.entries {
            let m = e.as_poly().ok_or(TwistError::NotPolynomial)?;
            by_tuple.entry(t.clone()).or_default().push((*label, m.clone()));
        }
        let sgn = GaussianRational::from_integers(if m % 2 == 0 { -1 } else { 1 }, 0);
        for (t, items) in by_tuple {
            let mut rho = HomElement::zero(x.degree + 1 - m as i32);
            for (label, mat) in items {
                rho.insert(label.k, label.l, mat.scale(&sgn))?;
            }
            let f_cx = target_cx(t.first())?;
            let e_cx = source_cx(t.last())?;
            let sol = lift_preimage(&rho, &f_cx, &e_cx, bound).map_err(|err| match err {
                TwistError::NoLift { bound, .. } => TwistError::NoLift {
                    bound,
                    tuple: t.0.clone(),
                    level: m,
                },
                other => other,
            })?;
            for ((k, l), block) in sol.blocks {
                x.add_entry(t.clone(), DegreeLabel { q: 0, l, k }, Entry::Poly(block))?;
            }
        }
    }
    if !defect(&x)?.is_symbolically_zero() {
        return Err(TwistError::ResidualAfterInduction);
    }
    Ok(x)
}

/// Extends per-chart chain maps to a full morphism with `D phi = 0`, solving
/// the obstruction equation level by level.
pub fn extend_morphism(
    phi0: &HomCochain,
    source: &TwistingCochain,
    target: &TwistingCochain,
    cover: &Cover,
    degree_bound: Option<usize>,
) -> Result<Morphism, TwistError> {
    if phi0.source != source.bundles || phi0.target != target.bundles {
        return Err(TwistError::BundleMismatch("extend_morphism"));
    }
    if phi0.degree != 0 {
        return Err(TwistError::BadInput(format!(
            "chart maps have total degree {}, want 0",
            phi0.degree
        )));
    }
    for ((t, label), e) in &phi0.entries {
        if t.p() != 0 || label.q != 0 || e.as_poly().is_none() {
            return Err(TwistError::BadInput(
                "chart maps must be polynomial entries on single charts".into(),
            ));
        }
    }
    // Each phi0_alpha must be a chain map before any lifting starts.
    let level0 = cech_component(&d_op(phi0, target, source, cover)?, 0);
    if let Some(((t, _), _)) = level0.entries.iter().next() {
        return Err(TwistError::NotChainMap { tuple: t.0.clone() });
    }

    let bound = degree_bound
        .unwrap_or_else(|| default_bound(&[phi0, &source.a, &target.a]));
    let defect = |x: &HomCochain| d_op(x, target, source, cover);
    let phi = induct_levels(
        phi0.clone(),
        1,
        &defect,
        &|c| target.chart_complex(c),
        &|c| source.chart_complex(c),
        cover,
        bound,
    )?;
    let out = Morphism {
        source: source.clone(),
        target: target.clone(),
        phi,
    };
    // Postcondition, re-verified independently of the solver.
    if !out.is_closed(cover)? {
        return Err(TwistError::ResidualAfterInduction);
    }
    Ok(out)
}

/// Completes per-chart differentials and pair gluings to a full twisting
/// cochain with `delta a + a a = 0`.
pub fn complete_twisting(
    bundles: &GradedBundleFamily,
    a0: &HomCochain,
    a1: &HomCochain,
    cover: &Cover,
    degree_bound: Option<usize>,
) -> Result<TwistingCochain, TwistError> {
    for (part, want) in [(a0, 0usize), (a1, 1usize)] {
        for ((t, label), e) in &part.entries {
            if label.q != 0 || e.as_poly().is_none() {
                return Err(TwistError::NotPolynomial);
            }
            if t.p() != want {
                return Err(TwistError::BadInput(format!(
                    "entry at {:?} sits in Cech degree {}, want {}",
                    t.0,
                    t.p(),
                    want
                )));
            }
        }
    }
    let nvars = cover.nvars;
    let seed = cochain_add(a0, a1)?;

    for chart in 0..bundles.n_charts() {
        let cx = chart_complex_from(&seed, bundles, nvars, chart)?;
        if !cx.squares_to_zero()? {
            return Err(TwistError::DifferentialSquare { chart });
        }
    }
    let draft = TwistingCochain::new(bundles.clone(), nvars, seed.clone())?;
    let pre = validate_twisting(&draft, cover)?;
    if !pre.diagonal_defects.is_empty() {
        return Err(TwistError::DiagonalNotIdentity {
            chart: pre.diagonal_defects[0],
        });
    }
    if let Some(bad) = pre
        .residuals
        .iter()
        .find(|r| r.k == 1 && r.magnitude != 0.0)
    {
        return Err(TwistError::NotChainMap {
            tuple: bad.tuple.clone(),
        });
    }

    let bound = degree_bound.unwrap_or_else(|| default_bound(&[a0, a1]));
    let defect = |x: &HomCochain| {
        Ok(cochain_add(
            &delta(x, cover)?,
            &cochain_product(x, x, cover)?,
        )?)
    };
    let target_cx = |c: usize| chart_complex_from(a0, bundles, nvars, c);
    let a = induct_levels(seed, 2, &defect, &target_cx, &target_cx, cover, bound)?;
    TwistingCochain::new(bundles.clone(), nvars, a)
}

/// Solves `D alpha = rhs` for a degree `-1` cochain, e.g. `rhs = phi psi - id`.
pub fn solve_homotopy(
    rhs: &HomCochain,
    target: &TwistingCochain,
    source: &TwistingCochain,
    cover: &Cover,
    degree_bound: Option<usize>,
) -> Result<Homotopy, TwistError> {
    if rhs.source != source.bundles || rhs.target != target.bundles {
        return Err(TwistError::BundleMismatch("solve_homotopy"));
    }
    if rhs.degree != 0 {
        return Err(TwistError::BadInput(format!(
            "homotopy right-hand side has total degree {}, want 0",
            rhs.degree
        )));
    }
    if !d_op(rhs, target, source, cover)?.is_symbolically_zero() {
        return Err(TwistError::BadInput(
            "homotopy right-hand side is not D-closed".into(),
        ));
    }
    let bound =
        degree_bound.unwrap_or_else(|| default_bound(&[rhs, &source.a, &target.a]));
    let x0 = HomCochain::zero(source.bundles.clone(), target.bundles.clone(), -1);
    let defect = |x: &HomCochain| {
        let d = d_op(x, target, source, cover)?;
        Ok(cochain_sub(&d, rhs)?)
    };
    let alpha = induct_levels(
        x0,
        0,
        &defect,
        &|c| target.chart_complex(c),
        &|c| source.chart_complex(c),
        cover,
        bound,
    )?;
    Ok(Homotopy {
        source: source.clone(),
        target: target.clone(),
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cochain::Polydisc;
    use crate::polyalg::{Monomial, Polynomial};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ucover(n_charts: usize, max_len: usize) -> Cover {
        Cover::full_overlap(1, n_charts, max_len, Polydisc::unit(1))
    }

    fn zpow(p: usize) -> Polynomial {
        let mut q = Polynomial::zero(1);
        q.add_term(Monomial(vec![p as u16]), GaussianRational::one());
        q
    }

    fn scalar_mat(p: Polynomial) -> PolyMatrix {
        PolyMatrix::from_fn(1, 1, 1, |_, _| p.clone())
    }

    /// Two-term complexes `O -z^power-> O` glued by the identity on every
    /// pair; a valid twisting cochain with no higher terms.
    fn koszul_twisting(cover: &Cover, power: usize) -> TwistingCochain {
        let n = cover.charts.len();
        let bundles = GradedBundleFamily::uniform(n, vec![1, 1]);
        let mut a = HomCochain::zero(bundles.clone(), bundles.clone(), 1);
        for c in 0..n {
            a.add_entry(
                TupleKey(vec![c]),
                DegreeLabel { q: 0, l: 1, k: 0 },
                Entry::Poly(scalar_mat(zpow(power))),
            )
            .unwrap();
        }
        for t in cover.nerve.keys().filter(|t| t.p() == 1) {
            for l in 0..2 {
                a.add_entry(
                    t.clone(),
                    DegreeLabel { q: 0, l, k: l },
                    Entry::Poly(PolyMatrix::identity(1, 1)),
                )
                .unwrap();
            }
        }
        TwistingCochain::new(bundles, 1, a).unwrap()
    }

    /// Pair gluings `1 + z^2 u` with `u` depending on the pair, so they are
    /// chain maps but not multiplicative; completion must supply `a^2`.
    fn glued_twisting(cover: &Cover) -> TwistingCochain {
        let n = cover.charts.len();
        let bundles = GradedBundleFamily::uniform(n, vec![1, 1]);
        let mut a0 = HomCochain::zero(bundles.clone(), bundles.clone(), 1);
        for c in 0..n {
            a0.add_entry(
                TupleKey(vec![c]),
                DegreeLabel { q: 0, l: 1, k: 0 },
                Entry::Poly(scalar_mat(zpow(2))),
            )
            .unwrap();
        }
        let mut a1 = HomCochain::zero(bundles.clone(), bundles.clone(), 1);
        for t in cover.nerve.keys().filter(|t| t.p() == 1) {
            let (al, be) = (t.0[0], t.0[1]);
            let u = if al == be { 0 } else { (3 * al + be + 1) as i64 };
            let g = &Polynomial::one(1) + &zpow(2).scale(&GaussianRational::from_integers(u, 0));
            for l in 0..2 {
                a1.add_entry(
                    t.clone(),
                    DegreeLabel { q: 0, l, k: l },
                    Entry::Poly(scalar_mat(g.clone())),
                )
                .unwrap();
            }
        }
        complete_twisting(&bundles, &a0, &a1, cover, None).unwrap()
    }

    fn rand_poly(rng: &mut ChaCha8Rng, deg: usize) -> Polynomial {
        let mut p = Polynomial::zero(1);
        for e in 0..=deg {
            p.add_term(
                Monomial(vec![e as u16]),
                GaussianRational::from_integers(rng.gen_range(-4..=4), 0),
            );
        }
        p
    }

    /// Random polynomial cochain of the given total degree with an entry on
    /// every admissible (tuple, label) slot.
    fn rand_cochain(
        e: &TwistingCochain,
        f: &TwistingCochain,
        total: i32,
        cover: &Cover,
        rng: &mut ChaCha8Rng,
    ) -> HomCochain {
        let mut x = HomCochain::zero(e.bundles.clone(), f.bundles.clone(), total);
        for t in cover.nerve.keys() {
            let p = t.p() as i32;
            for l in 0..e.bundles.ranks[t.last()].len() {
                for k in 0..f.bundles.ranks[t.first()].len() {
                    if l as i32 - k as i32 != total - p {
                        continue;
                    }
                    let rows = f.bundles.rank(t.first(), k);
                    let cols = e.bundles.rank(t.last(), l);
                    if rows == 0 || cols == 0 {
                        continue;
                    }
                    let m = PolyMatrix::from_fn(rows, cols, 1, |_, _| rand_poly(rng, 2));
                    x.add_entry(t.clone(), DegreeLabel { q: 0, l, k }, Entry::Poly(m))
                        .unwrap();
                }
            }
        }
        x
    }

    /// Chain maps over two charts for the projection between the quotients
    /// by z^3 and z^2; the two charts use different liftings.
    fn quotient_phi0(e: &TwistingCochain, f: &TwistingCochain) -> HomCochain {
        let mut phi = HomCochain::zero(e.bundles.clone(), f.bundles.clone(), 0);
        let lifts = [
            (Polynomial::one(1), zpow(1)),
            (&Polynomial::one(1) + &zpow(2), &zpow(1) + &zpow(3)),
        ];
        for (c, (p0, p1)) in lifts.iter().enumerate() {
            phi.add_entry(
                TupleKey(vec![c]),
                DegreeLabel { q: 0, l: 0, k: 0 },
                Entry::Poly(scalar_mat(p0.clone())),
            )
            .unwrap();
            phi.add_entry(
                TupleKey(vec![c]),
                DegreeLabel { q: 0, l: 1, k: 1 },
                Entry::Poly(scalar_mat(p1.clone())),
            )
            .unwrap();
        }
        phi
    }

    #[test]
    fn bundle_mismatch_is_reported() {
        let cover = ucover(2, 2);
        let t = koszul_twisting(&cover, 2);
        let unit = GradedBundleFamily::unit(2);
        let stray = HomCochain::zero(unit.clone(), unit, 0);
        assert!(matches!(
            d_op(&stray, &t, &t, &cover),
            Err(TwistError::BundleMismatch(_))
        ));
    }

    #[test]
    fn identity_morphism_is_d_closed() {
        let cover = ucover(3, 3);
        let t = glued_twisting(&cover);
        let id = HomCochain::identity(&t.bundles, 1);
        assert!(d_op(&id, &t, &t, &cover).unwrap().is_symbolically_zero());
    }

    #[test]
    fn d_squares_to_zero_on_random_cochains() {
        let cover = ucover(3, 3);
        let t = glued_twisting(&cover);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for total in 0..2 {
            let x = rand_cochain(&t, &t, total, &cover, &mut rng);
            let dx = d_op(&x, &t, &t, &cover).unwrap();
            let ddx = d_op(&dx, &t, &t, &cover).unwrap();
            assert!(ddx.is_symbolically_zero(), "D^2 != 0 at degree {total}");
        }
    }

    #[test]
    fn d_is_a_graded_derivation() {
        let cover = ucover(3, 3);
        let t = glued_twisting(&cover);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (df, dg) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let f = rand_cochain(&t, &t, df, &cover, &mut rng);
            let g = rand_cochain(&t, &t, dg, &cover, &mut rng);
            let fg = cochain_product(&f, &g, &cover).unwrap();
            let lhs = d_op(&fg, &t, &t, &cover).unwrap();
            let df_g = cochain_product(&d_op(&f, &t, &t, &cover).unwrap(), &g, &cover).unwrap();
            let f_dg = cochain_product(&f, &d_op(&g, &t, &t, &cover).unwrap(), &cover).unwrap();
            let sign = if df % 2 == 0 { 1 } else { -1 };
            let rhs = cochain_add(&df_g, &f_dg.scale_i64(sign)).unwrap();
            assert!(
                cochain_sub(&lhs, &rhs).unwrap().is_symbolically_zero(),
                "derivation fails at degrees ({df}, {dg})"
            );
        }
    }

    #[test]
    fn symbolic_layer_has_exact_dbar_compatibility() {
        let cover = ucover(2, 3);
        let t = koszul_twisting(&cover, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = rand_cochain(&t, &t, 0, &cover, &mut rng);
        let dx = d_op(&x, &t, &t, &cover).unwrap();
        assert!(!dx.has_fields());
        assert!(dbar(&dx, &cover, FD_STEP).unwrap().entries.is_empty());
        assert!(dbar(&x, &cover, FD_STEP).unwrap().entries.is_empty());
        // On holomorphic inputs nabla is D itself.
        let nb = nabla(&x, &t, &t, &cover).unwrap();
        assert!(cochain_sub(&nb, &dx).unwrap().is_symbolically_zero());
    }

    #[test]
    fn validation_passes_on_completed_twisting() {
        let cover = ucover(3, 3);
        let t = glued_twisting(&cover);
        let rep = validate_twisting(&t, &cover).unwrap();
        assert!(rep.passes);
        assert!(rep.residuals.iter().all(|r| r.magnitude == 0.0));
        assert!(rep.diagonal_defects.is_empty());
    }

    #[test]
    fn validation_catches_a_broken_diagonal() {
        let cover = ucover(3, 3);
        let mut t = glued_twisting(&cover);
        t.a.entries.insert(
            (TupleKey(vec![0, 0]), DegreeLabel { q: 0, l: 0, k: 0 }),
            Entry::Poly(scalar_mat(Polynomial::constant(
                1,
                GaussianRational::from_integers(2, 0),
            ))),
        );
        let rep = validate_twisting(&t, &cover).unwrap();
        assert!(!rep.passes);
        assert_eq!(rep.diagonal_defects, vec![0]);
    }

    #[test]
    fn validation_catches_a_missing_correction() {
        let cover = ucover(3, 3);
        let mut t = glued_twisting(&cover);
        let key = (TupleKey(vec![0, 1, 2]), DegreeLabel { q: 0, l: 0, k: 1 });
        assert!(t.a.entries.remove(&key).is_some());
        let rep = validate_twisting(&t, &cover).unwrap();
        assert!(!rep.passes);
        assert!(rep
            .residuals
            .iter()
            .any(|r| r.k == 2 && r.tuple == vec![0, 1, 2] && r.magnitude > 0.0));
    }

    #[test]
    fn validation_catches_a_gluing_that_is_no_chain_map() {
        let cover = ucover(2, 2);
        let bundles = GradedBundleFamily::uniform(2, vec![1, 1]);
        let mut a = HomCochain::zero(bundles.clone(), bundles.clone(), 1);
        for (c, pow) in [(0usize, 2usize), (1, 3)] {
            a.add_entry(
                TupleKey(vec![c]),
                DegreeLabel { q: 0, l: 1, k: 0 },
                Entry::Poly(scalar_mat(zpow(pow))),
            )
            .unwrap();
        }
        for t in cover.nerve.keys().filter(|t| t.p() == 1) {
            for l in 0..2 {
                a.add_entry(
                    t.clone(),
                    DegreeLabel { q: 0, l, k: l },
                    Entry::Poly(PolyMatrix::identity(1, 1)),
                )
                .unwrap();
            }
        }
        let t = TwistingCochain::new(bundles, 1, a).unwrap();
        let rep = validate_twisting(&t, &cover).unwrap();
        assert!(!rep.passes);
        assert!(rep.residuals.iter().any(|r| r.k == 1 && r.magnitude > 0.0));
    }

    #[test]
    fn obstruction_at_level_one_matches_the_expansion() {
        let cover = ucover(2, 3);
        let e = koszul_twisting(&cover, 3);
        let f = koszul_twisting(&cover, 2);
        let phi0 = quotient_phi0(&e, &f);
        let rho = obstruction_rho(&phi0, 1, &f, &e, &cover).unwrap();
        // With identity gluings, rho^1_{01} = phi0_1 - phi0_0 blockwise.
        let got = rho
            .get(&TupleKey(vec![0, 1]), &DegreeLabel { q: 0, l: 0, k: 0 })
            .unwrap()
            .as_poly()
            .unwrap();
        assert!(mat_sub(got, &scalar_mat(zpow(2))).is_zero());
        let got = rho
            .get(&TupleKey(vec![0, 1]), &DegreeLabel { q: 0, l: 1, k: 1 })
            .unwrap()
            .as_poly()
            .unwrap();
        assert!(mat_sub(got, &scalar_mat(zpow(3))).is_zero());

        // a0 rho + rho b0 = 0 exactly.
        let a0 = cech_component(&f.a, 0);
        let b0 = cech_component(&e.a, 0);
        let closure = cochain_add(
            &cochain_product(&a0, &rho, &cover).unwrap(),
            &cochain_product(&rho, &b0, &cover).unwrap(),
        )
        .unwrap();
        assert!(closure.is_symbolically_zero());
    }

    #[test]
    fn obstruction_reports_broken_hypothesis() {
        let cover = ucover(2, 3);
        let e = koszul_twisting(&cover, 3);
        let f = koszul_twisting(&cover, 2);
        let mut phi0 = quotient_phi0(&e, &f);
        phi0.entries.insert(
            (TupleKey(vec![1]), DegreeLabel { q: 0, l: 1, k: 1 }),
            Entry::Poly(scalar_mat(Polynomial::one(1))),
        );
        match obstruction_rho(&phi0, 1, &f, &e, &cover) {
            Err(TwistError::HypothesisFailed { k: 0 }) => {}
            other => panic!("expected hypothesis failure, got {other:?}"),
        }
    }

    #[test]
    fn extends_quotient_chain_maps_to_a_closed_morphism() {
        let cover = ucover(2, 3);
        let e = koszul_twisting(&cover, 3);
        let f = koszul_twisting(&cover, 2);
        let phi0 = quotient_phi0(&e, &f);
        let m = extend_morphism(&phi0, &e, &f, &cover, None).unwrap();
        assert!(m.is_closed(&cover).unwrap());
        // The level-one correction is nonzero.
        assert!(m
            .phi
            .get(&TupleKey(vec![0, 1]), &DegreeLabel { q: 0, l: 0, k: 1 })
            .is_some());
    }

    #[test]
    fn extension_rejects_non_chain_maps() {
        let cover = ucover(2, 3);
        let e = koszul_twisting(&cover, 3);
        let f = koszul_twisting(&cover, 2);
        let mut phi0 = quotient_phi0(&e, &f);
        phi0.entries.insert(
            (TupleKey(vec![0]), DegreeLabel { q: 0, l: 1, k: 1 }),
            Entry::Poly(scalar_mat(Polynomial::one(1))),
        );
        assert!(matches!(
            extend_morphism(&phi0, &e, &f, &cover, None),
            Err(TwistError::NotChainMap { .. })
        ));
    }

    #[test]
    fn single_chart_extension_returns_the_chart_map() {
        let cover = ucover(1, 1);
        let e = koszul_twisting(&cover, 3);
        let f = koszul_twisting(&cover, 2);
        let mut phi0 = HomCochain::zero(e.bundles.clone(), f.bundles.clone(), 0);
        phi0.add_entry(
            TupleKey(vec![0]),
            DegreeLabel { q: 0, l: 0, k: 0 },
            Entry::Poly(scalar_mat(Polynomial::one(1))),
        )
        .unwrap();
        phi0.add_entry(
            TupleKey(vec![0]),
            DegreeLabel { q: 0, l: 1, k: 1 },
            Entry::Poly(scalar_mat(zpow(1))),
        )
        .unwrap();
        let m = extend_morphism(&phi0, &e, &f, &cover, None).unwrap();
        assert!(cochain_sub(&m.phi, &phi0).unwrap().is_symbolically_zero());
    }

    #[test]
    fn identity_chart_maps_extend_to_the_identity() {
        let cover = ucover(3, 3);
        let t = glued_twisting(&cover);
        let singleton_id = HomCochain::identity(&t.bundles, 1);
        let m = extend_morphism(&singleton_id, &t, &t, &cover, None).unwrap();
        assert!(cochain_sub(&m.phi, &singleton_id)
            .unwrap()
            .is_symbolically_zero());
    }

    #[test]
    fn multiplicative_gluing_completes_with_no_higher_terms() {
        let cover = ucover(2, 3);
        let t = koszul_twisting(&cover, 2);
        let a0 = cech_component(&t.a, 0);
        let a1 = cech_component(&t.a, 1);
        let done = complete_twisting(&t.bundles, &a0, &a1, &cover, None).unwrap();
        assert!(done.a.entries.keys().all(|(tu, _)| tu.p() <= 1));
        assert!(validate_twisting(&done, &cover).unwrap().passes);
    }

    #[test]
    fn nonmultiplicative_gluing_needs_a_nonzero_correction() {
        let cover = ucover(3, 3);
        let t = glued_twisting(&cover);
        assert!(validate_twisting(&t, &cover).unwrap().passes);
        assert!(t.a.entries.keys().any(|(tu, _)| tu.p() == 2));
    }

    #[test]
    fn completion_rejects_broken_inputs() {
        let cover = ucover(2, 2);
        // Differential that does not square to zero.
        let bundles = GradedBundleFamily::uniform(2, vec![1, 1, 1]);
        let mut a0 = HomCochain::zero(bundles.clone(), bundles.clone(), 1);
        for c in 0..2 {
            for l in 1..3 {
                a0.add_entry(
                    TupleKey(vec![c]),
                    DegreeLabel { q: 0, l, k: l - 1 },
                    Entry::Poly(scalar_mat(zpow(1))),
                )
                .unwrap();
            }
        }
        let a1 = HomCochain::zero(bundles.clone(), bundles.clone(), 1);
        assert!(matches!(
            complete_twisting(&bundles, &a0, &a1, &cover, None),
            Err(TwistError::DifferentialSquare { .. })
        ));

        // Diagonal gluing that is not the identity.
        let t = koszul_twisting(&cover, 2);
        let a0 = cech_component(&t.a, 0);
        let mut a1 = cech_component(&t.a, 1);
        a1.entries.insert(
            (TupleKey(vec![1, 1]), DegreeLabel { q: 0, l: 0, k: 0 }),
            Entry::Poly(scalar_mat(Polynomial::constant(
                1,
                GaussianRational::from_integers(3, 0),
            ))),
        );
        assert!(matches!(
            complete_twisting(&t.bundles, &a0, &a1, &cover, None),
            Err(TwistError::DiagonalNotIdentity { chart: 1 })
        ));
    }

    #[test]
    fn homotopy_solves_the_interpolation_defect() {
        let cover = ucover(1, 1);
        let f = koszul_twisting(&cover, 2);
        // phi psi - id for the quotient section/retraction pair: z^2 id.
        let mut rhs = HomCochain::zero(f.bundles.clone(), f.bundles.clone(), 0);
        for l in 0..2 {
            rhs.add_entry(
                TupleKey(vec![0]),
                DegreeLabel { q: 0, l, k: l },
                Entry::Poly(scalar_mat(zpow(2))),
            )
            .unwrap();
        }
        let h = solve_homotopy(&rhs, &f, &f, &cover, None).unwrap();
        let check = d_op(&h.alpha, &f, &f, &cover).unwrap();
        assert!(cochain_sub(&check, &rhs).unwrap().is_symbolically_zero());
        let block = h
            .alpha
            .get(&TupleKey(vec![0]), &DegreeLabel { q: 0, l: 0, k: 1 })
            .unwrap()
            .as_poly()
            .unwrap();
        assert!(mat_sub(block, &PolyMatrix::identity(1, 1)).is_zero());
    }
}
