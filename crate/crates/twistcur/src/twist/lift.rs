//! Exact lifting in the two-sided Hom complex over one chart.
//!
//! The unknown is a ladder of polynomial blocks; the equation `bd(phi) = rho`
//! becomes a linear system over the Gaussian rationals once entries are
//! expanded in monomials up to the degree bound. Free variables are pinned to
//! zero, so the solver is deterministic under the canonical term order.

use std::collections::{BTreeMap, BTreeSet};

use crate::polyalg::{
    monomials_up_to, GaussianRational, Monomial, PolyMatrix, Polynomial,
};

use super::TwistError;

/// A bounded complex of free modules over one chart.
///
/// `ranks[j]` is the rank in degree `-j`; `blocks[l]` maps degree `-l` to
/// `-(l-1)`. Blocks absent from the map are zero.
#[derive(Clone, Debug)]
pub struct ChartComplex {
    pub nvars: usize,
    pub ranks: Vec<usize>,
    pub blocks: BTreeMap<usize, PolyMatrix>,
}

impl ChartComplex {
    pub fn new(
        nvars: usize,
        ranks: Vec<usize>,
        blocks: BTreeMap<usize, PolyMatrix>,
    ) -> Result<Self, TwistError> {
        for (&l, m) in &blocks {
            let want_rows = l.checked_sub(1).and_then(|j| ranks.get(j)).copied();
            let want_cols = ranks.get(l).copied();
            if m.nvars != nvars || Some(m.rows) != want_rows || Some(m.cols) != want_cols {
                return Err(TwistError::BadInput(format!(
                    "differential block at degree {l} has shape {}x{} in {} variables",
                    m.rows, m.cols, m.nvars
                )));
            }
        }
        Ok(ChartComplex {
            nvars,
            ranks,
            blocks,
        })
    }

    pub fn rank(&self, j: usize) -> usize {
        self.ranks.get(j).copied().unwrap_or(0)
    }

    pub fn block(&self, l: usize) -> Option<&PolyMatrix> {
        self.blocks.get(&l)
    }

    /// Composes consecutive blocks and checks they vanish identically.
    pub fn squares_to_zero(&self) -> Result<bool, TwistError> {
        for l in 2..=self.ranks.len() {
            if let (Some(outer), Some(inner)) = (self.block(l - 1), self.block(l)) {
                if !outer.matmul(inner)?.is_zero() {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// A homogeneous Hom-complex element at one tuple: blocks keyed by `(k, l)`,
/// mapping source degree `-l` to target degree `-k`, with `l - k` equal to
/// the Hom degree throughout.
#[derive(Clone, Debug)]
pub struct HomElement {
    pub degree: i32,
    pub blocks: BTreeMap<(usize, usize), PolyMatrix>,
}

impl HomElement {
    pub fn zero(degree: i32) -> Self {
        HomElement {
            degree,
            blocks: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, k: usize, l: usize, m: PolyMatrix) -> Result<(), TwistError> {
        if l as i32 - k as i32 != self.degree {
            return Err(TwistError::BadInput(format!(
                "block ({k}, {l}) does not have Hom degree {}",
                self.degree
            )));
        }
        if !m.is_zero() {
            self.blocks.insert((k, l), m);
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.values().all(|m| m.is_zero())
    }
}

pub(crate) fn mat_add(a: &PolyMatrix, b: &PolyMatrix) -> PolyMatrix {
    PolyMatrix::from_fn(a.rows, a.cols, a.nvars, |i, j| a.entry(i, j) + b.entry(i, j))
}

pub(crate) fn mat_sub(a: &PolyMatrix, b: &PolyMatrix) -> PolyMatrix {
    PolyMatrix::from_fn(a.rows, a.cols, a.nvars, |i, j| a.entry(i, j) - b.entry(i, j))
}

/// `bd(x) = a0 x - (-1)^{deg x} x b0` for `x: E -> F` in one chart pair,
/// where `a0` runs the `target` complex and `b0` the `source` complex.
pub fn hom_boundary(
    x: &HomElement,
    target: &ChartComplex,
    source: &ChartComplex,
) -> Result<HomElement, TwistError> {
    let s = x.degree;
    let nvars = target.nvars;
    let mut out = HomElement::zero(s + 1);
    for k in 0..target.ranks.len() {
        let l = k as i32 + s + 1;
        if l < 0 {
            continue;
        }
        let l = l as usize;
        if target.rank(k) == 0 || source.rank(l) == 0 {
            continue;
        }
        let mut acc = PolyMatrix::zero(target.rank(k), source.rank(l), nvars);
        if let Some(xb) = x.blocks.get(&(k + 1, l)) {
            if let Some(d) = target.block(k + 1) {
                acc = mat_add(&acc, &d.matmul(xb)?);
            }
        }
        if l >= 1 {
            if let Some(xb) = x.blocks.get(&(k, l - 1)) {
                if let Some(d) = source.block(l) {
                    let term = xb.matmul(d)?;
                    acc = if s.rem_euclid(2) == 0 {
                        mat_sub(&acc, &term)
                    } else {
                        mat_add(&acc, &term)
                    };
                }
            }
        }
        out.insert(k, l, acc)?;
    }
    Ok(out)
}

struct UnknownBlock {
    k: usize,
    l: usize,
    rows: usize,
    cols: usize,
    offset: usize,
}

/// Solves `bd(phi) = rho` for `phi` one Hom degree below `rho`, with every
/// entry of `phi` a polynomial of total degree at most `degree_bound`.
///
/// The right-hand side must be exactly closed; a non-closed input is a
/// precondition violation and is reported as such. Infeasibility (no solution
/// within the degree bound) is reported, never approximated.
pub fn lift_preimage(
    rho: &HomElement,
    target: &ChartComplex,
    source: &ChartComplex,
    degree_bound: usize,
) -> Result<HomElement, TwistError> {
    for (&(k, l), m) in &rho.blocks {
        if m.rows != target.rank(k) || m.cols != source.rank(l) || m.nvars != target.nvars {
            return Err(TwistError::BadInput(format!(
                "right-hand block ({k}, {l}) has shape {}x{}",
                m.rows, m.cols
            )));
        }
    }
    let bdry = hom_boundary(rho, target, source)?;
    if let Some((&(k, l), _)) = bdry.blocks.iter().find(|(_, m)| !m.is_zero()) {
        return Err(TwistError::NotClosed { k, l });
    }
    solve_lift_system(rho, target, source, degree_bound)
}

fn mono_add(a: &Monomial, b: &Monomial) -> Monomial {
    Monomial(a.0.iter().zip(&b.0).map(|(x, y)| x + y).collect())
}

fn solve_lift_system(
    rho: &HomElement,
    target: &ChartComplex,
    source: &ChartComplex,
    degree_bound: usize,
) -> Result<HomElement, TwistError> {
    let s_phi = rho.degree - 1;
    let nvars = target.nvars;
    let monos = monomials_up_to(nvars, degree_bound);

    let mut unknowns: Vec<UnknownBlock> = Vec::new();
    let mut block_index: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut offset = 0usize;
    for k in 0..target.ranks.len() {
        let l = k as i32 + s_phi;
        if l < 0 {
            continue;
        }
        let l = l as usize;
        let (rows, cols) = (target.rank(k), source.rank(l));
        if rows == 0 || cols == 0 {
            continue;
        }
        block_index.insert((k, l), unknowns.len());
        unknowns.push(UnknownBlock {
            k,
            l,
            rows,
            cols,
            offset,
        });
        offset += rows * cols * monos.len();
    }

    // One linear constraint per (equation block, matrix entry, monomial).
    let mut rows_sys: Vec<(BTreeMap<usize, GaussianRational>, GaussianRational)> = Vec::new();
    let minus_one = -GaussianRational::one();
    for k_eq in 0..target.ranks.len() {
        let l_eq = k_eq as i32 + rho.degree;
        if l_eq < 0 {
            continue;
        }
        let l_eq = l_eq as usize;
        let (rows_eq, cols_eq) = (target.rank(k_eq), source.rank(l_eq));
        if rows_eq == 0 || cols_eq == 0 {
            continue;
        }
        let rhs_block = rho.blocks.get(&(k_eq, l_eq));
        for r in 0..rows_eq {
            for c in 0..cols_eq {
                let mut lhs: BTreeMap<Monomial, BTreeMap<usize, GaussianRational>> =
                    BTreeMap::new();
                if let (Some(dmat), Some(&bi)) =
                    (target.block(k_eq + 1), block_index.get(&(k_eq + 1, l_eq)))
                {
                    let ub = &unknowns[bi];
                    for t in 0..ub.rows {
                        for (mono_d, coef_d) in dmat.entry(r, t).terms() {
                            for (mi, mono_u) in monos.iter().enumerate() {
                                let col = ub.offset + (t * ub.cols + c) * monos.len() + mi;
                                let cell = lhs
                                    .entry(mono_add(mono_d, mono_u))
                                    .or_default()
                                    .entry(col)
                                    .or_insert_with(GaussianRational::zero);
                                *cell = &*cell + coef_d;
                            }
                        }
                    }
                }
                if l_eq >= 1 {
                    if let (Some(&bi), Some(dmat)) =
                        (block_index.get(&(k_eq, l_eq - 1)), source.block(l_eq))
                    {
                        // Sign -(-1)^{s_phi} on the right-action term.
                        let sgn = if s_phi.rem_euclid(2) == 0 {
                            minus_one.clone()
                        } else {
                            GaussianRational::one()
                        };
                        let ub = &unknowns[bi];
                        for t in 0..ub.cols {
                            for (mono_d, coef_d) in dmat.entry(t, c).terms() {
                                let signed = &sgn * coef_d;
                                for (mi, mono_u) in monos.iter().enumerate() {
                                    let col =
                                        ub.offset + (r * ub.cols + t) * monos.len() + mi;
                                    let cell = lhs
                                        .entry(mono_add(mono_d, mono_u))
                                        .or_default()
                                        .entry(col)
                                        .or_insert_with(GaussianRational::zero);
                                    *cell = &*cell + &signed;
                                }
                            }
                        }
                    }
                }
                let mut rhs_map: BTreeMap<Monomial, GaussianRational> = BTreeMap::new();
                if let Some(b) = rhs_block {
                    for (m, coef) in b.entry(r, c).terms() {
                        rhs_map.insert(m.clone(), coef.clone());
                    }
                }
                let keys: BTreeSet<Monomial> =
                    lhs.keys().chain(rhs_map.keys()).cloned().collect();
                for mu in keys {
                    let row = lhs.remove(&mu).unwrap_or_default();
                    let rhs = rhs_map.remove(&mu).unwrap_or_else(GaussianRational::zero);
                    let row: BTreeMap<usize, GaussianRational> =
                        row.into_iter().filter(|(_, v)| !v.is_zero()).collect();
                    if !row.is_empty() || !rhs.is_zero() {
                        rows_sys.push((row, rhs));
                    }
                }
            }
        }
    }

    // Forward elimination with sparse rows. Pivot rows store their tail only
    // (leading coefficient normalized to 1 and removed).
    let mut pivots: Vec<(usize, BTreeMap<usize, GaussianRational>, GaussianRational)> =
        Vec::new();
    'rows: for (mut row, mut rhs) in rows_sys {
        loop {
            let Some((&col, _)) = row.iter().next() else {
                if rhs.is_zero() {
                    continue 'rows;
                }
                return Err(TwistError::NoLift {
                    bound: degree_bound,
                    tuple: Vec::new(),
                    level: 0,
                });
            };
            match pivots.binary_search_by_key(&col, |p| p.0) {
                Ok(pi) => {
                    let factor = row.remove(&col).expect("leading entry present");
                    let (_, prow, prhs) = &pivots[pi];
                    for (c2, v) in prow {
                        let cell = row.entry(*c2).or_insert_with(GaussianRational::zero);
                        *cell = &*cell - &(&factor * v);
                        if cell.is_zero() {
                            row.remove(c2);
                        }
                    }
                    rhs = &rhs - &(&factor * prhs);
                }
                Err(pos) => {
                    let lead = row.remove(&col).expect("leading entry present");
                    let inv = lead.inverse().expect("nonzero pivot");
                    let tail: BTreeMap<usize, GaussianRational> =
                        row.into_iter().map(|(c2, v)| (c2, &v * &inv)).collect();
                    pivots.insert(pos, (col, tail, &rhs * &inv));
                    continue 'rows;
                }
            }
        }
    }

    // Free variables are zero; pivot values follow by back substitution.
    let mut values: BTreeMap<usize, GaussianRational> = BTreeMap::new();
    for (col, tail, rhs) in pivots.iter().rev() {
        let mut v = rhs.clone();
        for (c2, coef) in tail {
            if let Some(x) = values.get(c2) {
                v = &v - &(coef * x);
            }
        }
        if !v.is_zero() {
            values.insert(*col, v);
        }
    }

    let mut out = HomElement::zero(s_phi);
    for ub in &unknowns {
        let m = PolyMatrix::from_fn(ub.rows, ub.cols, nvars, |i, j| {
            let mut p = Polynomial::zero(nvars);
            let base = ub.offset + (i * ub.cols + j) * monos.len();
            for (mi, mono) in monos.iter().enumerate() {
                if let Some(v) = values.get(&(base + mi)) {
                    p.add_term(mono.clone(), v.clone());
                }
            }
            p
        });
        out.insert(ub.k, ub.l, m)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn poly_1v(coeffs: &[i64]) -> Polynomial {
        let mut p = Polynomial::zero(1);
        for (e, &c) in coeffs.iter().enumerate() {
            p.add_term(Monomial(vec![e as u16]), GaussianRational::from_integers(c, 0));
        }
        p
    }

    fn mat_1x1(coeffs: &[i64]) -> PolyMatrix {
        PolyMatrix::from_fn(1, 1, 1, |_, _| poly_1v(coeffs))
    }

    /// Koszul complex of (z1, z2): ranks (1, 2, 1).
    fn koszul_two_vars() -> ChartComplex {
        let z1 = Polynomial::var(2, 0);
        let z2 = Polynomial::var(2, 1);
        let d1 = PolyMatrix::from_fn(1, 2, 2, |_, j| if j == 0 { z1.clone() } else { z2.clone() });
        let d2 = PolyMatrix::from_fn(2, 1, 2, |i, _| {
            if i == 0 {
                -&z2
            } else {
                z1.clone()
            }
        });
        ChartComplex::new(2, vec![1, 2, 1], BTreeMap::from([(1, d1), (2, d2)])).unwrap()
    }

    fn unit_complex(nvars: usize) -> ChartComplex {
        ChartComplex::new(nvars, vec![1], BTreeMap::new()).unwrap()
    }

    #[test]
    fn koszul_differential_squares_to_zero() {
        assert!(koszul_two_vars().squares_to_zero().unwrap());
    }

    #[test]
    fn zero_preimage_lifts_to_zero() {
        let f = koszul_two_vars();
        let e = unit_complex(2);
        let rho = HomElement::zero(0);
        let phi = lift_preimage(&rho, &f, &e, 3).unwrap();
        assert!(phi.is_zero());
    }

    #[test]
    fn recovers_a_generated_preimage() {
        let f = koszul_two_vars();
        let e = f.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // Random phi* of Hom degree -1, then rho := bd(phi*).
        let mut star = HomElement::zero(-1);
        let mut rand_mat = |rows: usize, cols: usize| {
            PolyMatrix::from_fn(rows, cols, 2, |_, _| {
                let mut p = Polynomial::zero(2);
                for e1 in 0..2u16 {
                    for e2 in 0..2u16 {
                        p.add_term(
                            Monomial(vec![e1, e2]),
                            GaussianRational::from_integers(rng.gen_range(-3..=3), 0),
                        );
                    }
                }
                p
            })
        };
        star.insert(1, 0, rand_mat(2, 1)).unwrap();
        star.insert(2, 1, rand_mat(1, 2)).unwrap();
        let rho = hom_boundary(&star, &f, &e).unwrap();
        assert!(!rho.is_zero());

        let phi = lift_preimage(&rho, &f, &e, 4).unwrap();
        // Substitution oracle: the lift satisfies the equation; it need not
        // equal phi*.
        let back = hom_boundary(&phi, &f, &e).unwrap();
        for (key, m) in &rho.blocks {
            let got = back.blocks.get(key).expect("block present");
            assert!(mat_sub(got, m).is_zero(), "mismatch at {key:?}");
        }
        for (key, m) in &back.blocks {
            if !rho.blocks.contains_key(key) {
                assert!(m.is_zero());
            }
        }
    }

    #[test]
    fn non_closed_preimage_is_rejected() {
        let f = koszul_two_vars();
        let e = unit_complex(2);
        // rho: E_0 -> F_{-1} of Hom degree -1 with bd(rho) != 0.
        let mut rho = HomElement::zero(-1);
        rho.insert(1, 0, PolyMatrix::from_fn(2, 1, 2, |i, _| {
            if i == 0 {
                Polynomial::one(2)
            } else {
                Polynomial::zero(2)
            }
        }))
        .unwrap();
        match lift_preimage(&rho, &f, &e, 3) {
            Err(TwistError::NotClosed { .. }) => {}
            other => panic!("expected closure rejection, got {other:?}"),
        }
    }

    #[test]
    fn degree_bound_is_honored_and_reported() {
        // F: O -z^2-> O, E: O. Solving z^2 * phi = z^3 needs degree 1.
        let f = ChartComplex::new(1, vec![1, 1], BTreeMap::from([(1, mat_1x1(&[0, 0, 1]))]))
            .unwrap();
        let e = unit_complex(1);
        let mut rho = HomElement::zero(0);
        rho.insert(0, 0, mat_1x1(&[0, 0, 0, 1])).unwrap();

        match lift_preimage(&rho, &f, &e, 0) {
            Err(TwistError::NoLift { bound: 0, .. }) => {}
            other => panic!("expected degree-bound failure, got {other:?}"),
        }
        let phi = lift_preimage(&rho, &f, &e, 1).unwrap();
        let block = phi.blocks.get(&(1, 0)).unwrap();
        assert!(mat_sub(block, &mat_1x1(&[0, 1])).is_zero());
    }

    #[test]
    fn infeasible_within_any_degree_is_an_error() {
        // z^2 * phi = 1 has no polynomial solution at all.
        let f = ChartComplex::new(1, vec![1, 1], BTreeMap::from([(1, mat_1x1(&[0, 0, 1]))]))
            .unwrap();
        let e = unit_complex(1);
        let mut rho = HomElement::zero(0);
        rho.insert(0, 0, mat_1x1(&[1])).unwrap();
        assert!(matches!(
            lift_preimage(&rho, &f, &e, 6),
            Err(TwistError::NoLift { bound: 6, .. })
        ));
    }

    #[test]
    fn solver_is_deterministic() {
        let f = koszul_two_vars();
        let e = f.clone();
        let mut rho = HomElement::zero(0);
        // bd of the identity-like degree shift: z1 z2 in the corner blocks.
        let p = {
            let mut q = Polynomial::zero(2);
            q.add_term(Monomial(vec![1, 1]), GaussianRational::from_integers(1, 0));
            q
        };
        rho.insert(0, 0, PolyMatrix::from_fn(1, 1, 2, |_, _| p.clone()))
            .unwrap();
        // Closure holds: bd(rho) lands in blocks annihilated by the Koszul
        // relations only if rho extends; use the full ladder generated from a
        // known solution instead.
        let mut star = HomElement::zero(-1);
        star.insert(1, 0, PolyMatrix::from_fn(2, 1, 2, |i, _| {
            if i == 0 {
                Polynomial::var(2, 1)
            } else {
                Polynomial::zero(2)
            }
        }))
        .unwrap();
        let rho = hom_boundary(&star, &f, &e).unwrap();
        let first = lift_preimage(&rho, &f, &e, 3).unwrap();
        let second = lift_preimage(&rho, &f, &e, 3).unwrap();
        for (key, m) in &first.blocks {
            assert!(mat_sub(m, second.blocks.get(key).unwrap()).is_zero());
        }
        assert_eq!(first.blocks.len(), second.blocks.len());
    }
}
