//! Fixture generators shared by the test suites and the `gen-fixture`
//! command: Koszul twistings, glued multi-chart variants, quotient morphism
//! data, a two-resolution homotopy setup, seeded random instances for the
//! exact-algebra property suite, and bump test forms.

use num::complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cochain::{
    Cover, DegreeLabel, Entry, GradedBundleFamily, HomCochain, Polydisc, TupleKey,
};
use crate::current::TestForm;
use crate::polyalg::{GaussianRational, Monomial, PolyMatrix, Polynomial};
use crate::twist::{
    complete_twisting, extend_morphism, solve_homotopy, Homotopy, Morphism, TwistError,
    TwistingCochain,
};

/// Full-overlap cover of unit polydiscs, the default desk-scale layout.
pub fn overlap_cover(n_charts: usize, nvars: usize, max_len: usize) -> Cover {
    Cover::full_overlap(nvars, n_charts, max_len, Polydisc::unit(nvars))
}

/// Monomial `prod z_i^{exp_i}` with coefficient 1.
pub fn monomial_gen(nvars: usize, exp: &[u16]) -> Polynomial {
    assert_eq!(exp.len(), nvars);
    Polynomial::monomial(nvars, exp, GaussianRational::one())
}

/// The rank-one twisting concentrated in degree zero: no differential,
/// identity gluing. Vector-valued cochains are Hom cochains out of this,
/// which is why the CLI reserves the bundle name "unit" for it.
pub fn unit_twisting(cover: &Cover) -> TwistingCochain {
    let bundles = GradedBundleFamily::unit(cover.charts.len());
    let mut a = HomCochain::zero(bundles.clone(), bundles.clone(), 1);
    for t in cover.nerve.keys().filter(|t| t.p() == 1) {
        a.add_entry(
            t.clone(),
            DegreeLabel { q: 0, l: 0, k: 0 },
            Entry::Poly(PolyMatrix::identity(1, cover.nvars)),
        )
        .expect("unit gluing entry");
    }
    TwistingCochain::new(bundles, cover.nvars, a).expect("unit twisting")
}

fn binom(m: usize, j: usize) -> usize {
    if j > m {
        return 0;
    }
    let mut v = 1usize;
    for i in 0..j {
        v = v * (m - i) / (i + 1);
    }
    v
}

/// Strictly increasing `j`-subsets of `0..m` in lexicographic order; this
/// ordering fixes the basis of the exterior power everywhere below.
fn subsets(m: usize, j: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(binom(m, j));
    let mut cur: Vec<usize> = (0..j).collect();
    if j > m {
        return out;
    }
    loop {
        out.push(cur.clone());
        if j == 0 {
            return out;
        }
        // advance to the next increasing tuple
        let mut i = j;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] != i + m - j {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        cur[i] += 1;
        for t in i + 1..j {
            cur[t] = cur[t - 1] + 1;
        }
    }
}

/// Koszul data for generators `f_0..f_{m-1}`: ranks `C(m,j)` and the
/// contraction blocks `B_j: Lambda^j -> Lambda^{j-1}`,
/// `e_S -> sum_t (-1)^t f_{s_t} e_{S \ s_t}`. Consecutive blocks compose
/// to zero.
pub fn koszul_blocks(gens: &[Polynomial]) -> (Vec<usize>, Vec<PolyMatrix>) {
    assert!(!gens.is_empty(), "koszul_blocks needs generators");
    let m = gens.len();
    let nvars = gens[0].nvars();
    let ranks: Vec<usize> = (0..=m).map(|j| binom(m, j)).collect();
    let mut blocks = Vec::with_capacity(m);
    for j in 1..=m {
        let rows_idx = subsets(m, j - 1);
        let cols_idx = subsets(m, j);
        let mut b = PolyMatrix::zero(rows_idx.len(), cols_idx.len(), nvars);
        for (c, s) in cols_idx.iter().enumerate() {
            for (t, &i) in s.iter().enumerate() {
                let mut rest = s.clone();
                rest.remove(t);
                let r = rows_idx.iter().position(|x| *x == rest).unwrap();
                let signed = if t % 2 == 0 {
                    gens[i].clone()
                } else {
                    -&gens[i]
                };
                *b.entry_mut(r, c) = b.entry(r, c) + &signed;
            }
        }
        blocks.push(b);
    }
    (ranks, blocks)
}

/// Koszul twisting on a full-overlap cover: the same contraction complex on
/// every chart, identity gluing on every pairwise tuple, no higher terms.
pub fn koszul_twisting(cover: &Cover, gens: &[Polynomial]) -> Result<TwistingCochain, TwistError> {
    let (ranks, blocks) = koszul_blocks(gens);
    let n_charts = cover.charts.len();
    let bundles = GradedBundleFamily::uniform(n_charts, ranks.clone());
    let mut a = HomCochain::zero(bundles.clone(), bundles.clone(), 1);
    for chart in 0..n_charts {
        for (i, b) in blocks.iter().enumerate() {
            a.add_entry(
                TupleKey(vec![chart]),
                DegreeLabel {
                    q: 0,
                    l: i + 1,
                    k: i,
                },
                Entry::Poly(b.clone()),
            )
            .map_err(TwistError::from)?;
        }
    }
    for t in cover.nerve.keys().filter(|t| t.p() == 1) {
        for (l, &r) in ranks.iter().enumerate() {
            if r == 0 {
                continue;
            }
            a.add_entry(
                t.clone(),
                DegreeLabel { q: 0, l, k: l },
                Entry::Poly(PolyMatrix::identity(r, cover.nvars)),
            )
            .map_err(TwistError::from)?;
        }
    }
    TwistingCochain::new(bundles, cover.nvars, a)
}

fn scalar_gluing(
    bundles: &GradedBundleFamily,
    cover: &Cover,
    factor: impl Fn(usize, usize) -> Polynomial,
) -> Result<HomCochain, TwistError> {
    let mut a1 = HomCochain::zero(bundles.clone(), bundles.clone(), 1);
    for t in cover.nerve.keys().filter(|t| t.p() == 1) {
        let s = factor(t.first(), t.last());
        for (l, &r) in bundles.ranks[t.first()].iter().enumerate() {
            if r == 0 {
                continue;
            }
            a1.add_entry(
                t.clone(),
                DegreeLabel { q: 0, l, k: l },
                Entry::Poly(PolyMatrix::identity(r, cover.nvars).scale_poly(&s)),
            )
            .map_err(TwistError::from)?;
        }
    }
    Ok(a1)
}

/// Deliberately non-multiplicative gluing over `z^2` on each chart: the
/// pairwise maps are `(1 + z^2 (3a + b + 1)) id`, chain maps but not a
/// cocycle, so completion must produce a nonzero correction.
pub fn synthetic_twist(cover: &Cover) -> Result<TwistingCochain, TwistError> {
    assert_eq!(cover.nvars, 1);
    let n_charts = cover.charts.len();
    let bundles = GradedBundleFamily::uniform(n_charts, vec![1, 1]);
    let z2 = monomial_gen(1, &[2]);
    let mut a0 = HomCochain::zero(bundles.clone(), bundles.clone(), 1);
    for chart in 0..n_charts {
        a0.add_entry(
            TupleKey(vec![chart]),
            DegreeLabel { q: 0, l: 1, k: 0 },
            Entry::Poly(PolyMatrix::from_fn(1, 1, 1, |_, _| z2.clone())),
        )
        .map_err(TwistError::from)?;
    }
    let a1 = scalar_gluing(&bundles, cover, |a, b| {
        if a == b {
            Polynomial::one(1)
        } else {
            let c = GaussianRational::from_integers((3 * a + b + 1) as i64, 0);
            &Polynomial::one(1) + &z2.scale(&c)
        }
    })?;
    complete_twisting(&bundles, &a0, &a1, cover, Some(10))
}

/// Per-chart chain maps over the quotient `O/(z^3) -> O/(z^2)`: source is
/// the Koszul twisting of `z^3`, target of `z^2`, and the second chart's map
/// differs from the first by the boundary of `[1]`, so the extension needs a
/// nonzero pairwise correction.
pub fn quotient_pair(
    cover: &Cover,
) -> Result<(TwistingCochain, TwistingCochain, HomCochain), TwistError> {
    assert_eq!(cover.nvars, 1);
    let source = koszul_twisting(cover, &[monomial_gen(1, &[3])])?;
    let target = koszul_twisting(cover, &[monomial_gen(1, &[2])])?;
    let one = Polynomial::one(1);
    let z = monomial_gen(1, &[1]);
    let z2 = monomial_gen(1, &[2]);
    let z3 = monomial_gen(1, &[3]);
    let mut phi0 = HomCochain::zero(source.bundles.clone(), target.bundles.clone(), 0);
    for chart in 0..cover.charts.len() {
        // chart 0: (1, z); other charts: shifted by the chain homotopy [1].
        let (top, low) = if chart == 0 {
            (one.clone(), z.clone())
        } else {
            (&one + &z2, &z + &z3)
        };
        phi0.add_entry(
            TupleKey(vec![chart]),
            DegreeLabel { q: 0, l: 0, k: 0 },
            Entry::Poly(PolyMatrix::from_fn(1, 1, 1, |_, _| top.clone())),
        )
        .map_err(TwistError::from)?;
        phi0.add_entry(
            TupleKey(vec![chart]),
            DegreeLabel { q: 0, l: 1, k: 1 },
            Entry::Poly(PolyMatrix::from_fn(1, 1, 1, |_, _| low.clone())),
        )
        .map_err(TwistError::from)?;
    }
    Ok((source, target, phi0))
}

/// Two-chart comparison setup in two variables: the target resolves
/// `O/(z1,z2)`, the source `O/(z1^2,z2)`, and the per-chart chain maps lift
/// the quotient; the second chart is shifted by the boundary of the homotopy
/// `e_0 -> z1 e_{0}^{(1)}`. Returns `(source, target, phi0)`.
pub fn comparison_pair(
    cover: &Cover,
) -> Result<(TwistingCochain, TwistingCochain, HomCochain), TwistError> {
    assert_eq!(cover.nvars, 2);
    let z1 = monomial_gen(2, &[1, 0]);
    let z2 = monomial_gen(2, &[0, 1]);
    let z1sq = monomial_gen(2, &[2, 0]);
    let source = koszul_twisting(cover, &[z1sq.clone(), z2.clone()])?;
    let target = koszul_twisting(cover, &[z1.clone(), z2.clone()])?;
    let zero = Polynomial::zero(2);
    let one = Polynomial::one(2);
    // phi_0 = [1], phi_{-1} = diag(z1, 1), phi_{-2} = [z1];
    // the shifted chart adds a0' h with h = [z1; 0].
    let mut phi0 = HomCochain::zero(source.bundles.clone(), target.bundles.clone(), 0);
    for chart in 0..cover.charts.len() {
        let shift = chart != 0;
        let top = if shift { &one + &z1sq } else { one.clone() };
        let mid = PolyMatrix::from_fn(2, 2, 2, |i, j| match (i, j, shift) {
            (0, 0, false) => z1.clone(),
            (0, 0, true) => &z1 + &(&z1 * &z1sq),
            (0, 1, true) => &z1 * &z2,
            (1, 1, _) => one.clone(),
            _ => zero.clone(),
        });
        phi0.add_entry(
            TupleKey(vec![chart]),
            DegreeLabel { q: 0, l: 0, k: 0 },
            Entry::Poly(PolyMatrix::from_fn(1, 1, 2, |_, _| top.clone())),
        )
        .map_err(TwistError::from)?;
        phi0.add_entry(
            TupleKey(vec![chart]),
            DegreeLabel { q: 0, l: 1, k: 1 },
            Entry::Poly(mid),
        )
        .map_err(TwistError::from)?;
        phi0.add_entry(
            TupleKey(vec![chart]),
            DegreeLabel { q: 0, l: 2, k: 2 },
            Entry::Poly(PolyMatrix::from_fn(1, 1, 2, |_, _| z1.clone())),
        )
        .map_err(TwistError::from)?;
    }
    Ok((source, target, phi0))
}

/// Everything the resolution-independence check consumes: two twisted
/// resolutions of `O/(z^2)` on a two-chart cover, the connecting morphisms
/// both ways, and the homotopy witnessing `phi psi - id = D alpha`.
pub struct HomotopyFixture {
    pub f: TwistingCochain,
    pub e: TwistingCochain,
    pub phi: Morphism,
    pub psi: Morphism,
    pub alpha: Homotopy,
}

/// The minimal resolution `[z^2]` with identity gluing, against the padded
/// resolution `diag(z^2, 1)` glued by a unipotent cocycle, so the source
/// twisting has genuine pairwise content.
pub fn homotopy_fixture(cover: &Cover) -> Result<HomotopyFixture, TwistError> {
    assert_eq!(cover.nvars, 1);
    assert_eq!(cover.charts.len(), 2);
    let z2 = monomial_gen(1, &[2]);
    let one = Polynomial::one(1);
    let zero = Polynomial::zero(1);
    let f = koszul_twisting(cover, &[z2.clone()])?;

    let e_bundles = GradedBundleFamily::uniform(2, vec![2, 2]);
    let mut b = HomCochain::zero(e_bundles.clone(), e_bundles.clone(), 1);
    for chart in 0..2 {
        let d = PolyMatrix::from_fn(2, 2, 1, |i, j| match (i, j) {
            (0, 0) => z2.clone(),
            (1, 1) => one.clone(),
            _ => zero.clone(),
        });
        b.add_entry(
            TupleKey(vec![chart]),
            DegreeLabel { q: 0, l: 1, k: 0 },
            Entry::Poly(d),
        )
        .map_err(TwistError::from)?;
    }
    // unipotent gluing: level 0 gets [[1, z^2],[0,1]], level 1 gets
    // [[1, 1],[0,1]]; (0,1) and (1,0) carry inverse signs so the cocycle is
    // exactly multiplicative over the full nerve.
    let upper = |s: &Polynomial| {
        PolyMatrix::from_fn(2, 2, 1, |i, j| match (i, j) {
            (0, 0) | (1, 1) => one.clone(),
            (0, 1) => s.clone(),
            _ => zero.clone(),
        })
    };
    for t in cover.nerve.keys().filter(|t| t.p() == 1) {
        let (a0, b0) = (t.first(), t.last());
        let sign: i64 = match (a0, b0) {
            _ if a0 == b0 => 0,
            (0, 1) => 1,
            _ => -1,
        };
        let lvl0 = upper(&z2.scale(&GaussianRational::from_integers(sign, 0)));
        let lvl1 = upper(&one.scale(&GaussianRational::from_integers(sign, 0)));
        b.add_entry(t.clone(), DegreeLabel { q: 0, l: 0, k: 0 }, Entry::Poly(lvl0))
            .map_err(TwistError::from)?;
        b.add_entry(t.clone(), DegreeLabel { q: 0, l: 1, k: 1 }, Entry::Poly(lvl1))
            .map_err(TwistError::from)?;
    }
    let e = TwistingCochain::new(e_bundles.clone(), 1, b)?;

    // chartwise chain maps: phi collapses the padded summand, psi embeds.
    let mut phi0 = HomCochain::zero(e.bundles.clone(), f.bundles.clone(), 0);
    let mut psi0 = HomCochain::zero(f.bundles.clone(), e.bundles.clone(), 0);
    for chart in 0..2 {
        let row =
            |a: &Polynomial, b2: &Polynomial| PolyMatrix::from_fn(1, 2, 1, |_, j| if j == 0 {
                a.clone()
            } else {
                b2.clone()
            });
        let col =
            |a: &Polynomial, b2: &Polynomial| PolyMatrix::from_fn(2, 1, 1, |i, _| if i == 0 {
                a.clone()
            } else {
                b2.clone()
            });
        phi0.add_entry(
            TupleKey(vec![chart]),
            DegreeLabel { q: 0, l: 0, k: 0 },
            Entry::Poly(row(&one, &z2)),
        )
        .map_err(TwistError::from)?;
        phi0.add_entry(
            TupleKey(vec![chart]),
            DegreeLabel { q: 0, l: 1, k: 1 },
            Entry::Poly(row(&one, &one)),
        )
        .map_err(TwistError::from)?;
        psi0.add_entry(
            TupleKey(vec![chart]),
            DegreeLabel { q: 0, l: 0, k: 0 },
            Entry::Poly(col(&one, &one)),
        )
        .map_err(TwistError::from)?;
        psi0.add_entry(
            TupleKey(vec![chart]),
            DegreeLabel { q: 0, l: 1, k: 1 },
            Entry::Poly(col(&one, &z2)),
        )
        .map_err(TwistError::from)?;
    }
    let phi = extend_morphism(&phi0, &e, &f, cover, Some(10))?;
    let psi = extend_morphism(&psi0, &f, &e, cover, Some(10))?;

    let prod = crate::cochain::cochain_product(&phi.phi, &psi.phi, cover)
        .map_err(TwistError::from)?;
    let rhs = crate::cochain::cochain_sub(
        &prod,
        &HomCochain::identity(&f.bundles, 1),
    )
    .map_err(TwistError::from)?;
    let alpha = solve_homotopy(&rhs, &f, &f, cover, Some(10))?;
    Ok(HomotopyFixture { f, e, phi, psi, alpha })
}

/// Bump test form with constant coefficients `i + j + 1`, supported on the
/// polydisc of radius `radius` about the origin.
pub fn bump_form(
    name: impl Into<String>,
    tuple: TupleKey,
    nvars: usize,
    dzbar_index: Vec<usize>,
    rows: usize,
    cols: usize,
    radius: f64,
) -> TestForm {
    let coeff = PolyMatrix::from_fn(rows, cols, 2 * nvars, |i, j| {
        Polynomial::constant(2 * nvars, GaussianRational::from_integers((i + j + 1) as i64, 0))
    });
    poly_bump_form(name, tuple, nvars, dzbar_index, coeff, radius)
}

/// Bump test form with an explicit polynomial coefficient matrix in
/// `z_1..z_n, zbar_1..zbar_n`.
pub fn poly_bump_form(
    name: impl Into<String>,
    tuple: TupleKey,
    nvars: usize,
    dzbar_index: Vec<usize>,
    coeff: PolyMatrix,
    radius: f64,
) -> TestForm {
    assert_eq!(coeff.nvars, 2 * nvars);
    let support = Polydisc::new(
        vec![Complex64::new(0.0, 0.0); nvars],
        vec![radius; nvars],
    )
    .expect("bump support");
    TestForm {
        name: name.into(),
        tuple,
        nvars,
        dzbar_index,
        coeff,
        support,
    }
}

/// One randomized, validated instance for the exact-algebra suite: a glued
/// Koszul-type twisting (completion fills the correction when the random
/// gluing is not a cocycle) and three composable endomorphism cochains.
pub struct RandomInstance {
    pub cover: Cover,
    pub twisting: TwistingCochain,
    pub x: HomCochain,
    pub y: HomCochain,
    pub z: HomCochain,
}

fn random_poly(rng: &mut ChaCha8Rng, nvars: usize, max_deg: usize) -> Polynomial {
    let mut p = Polynomial::zero(nvars);
    for _ in 0..rng.gen_range(1..=2) {
        let mut exp = vec![0u16; nvars];
        let mut left = max_deg;
        for e in exp.iter_mut() {
            *e = rng.gen_range(0..=left) as u16;
            left -= *e as usize;
        }
        let c = GaussianRational::from_integers(rng.gen_range(-3..=3), rng.gen_range(-1..=1));
        p.add_term(Monomial(exp), c);
    }
    p
}

pub fn random_instance(seed: u64) -> Result<RandomInstance, TwistError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nvars = rng.gen_range(1..=2);
    let n_charts = rng.gen_range(1..=4);
    let cover = overlap_cover(n_charts, nvars, 3);

    let n_gens = rng.gen_range(1..=2);
    let gens: Vec<Polynomial> = (0..n_gens)
        .map(|_| {
            let mut exp = vec![0u16; nvars];
            exp[rng.gen_range(0..nvars)] = rng.gen_range(1..=2);
            monomial_gen(nvars, &exp)
        })
        .collect();
    let (ranks, blocks) = koszul_blocks(&gens);
    let bundles = GradedBundleFamily::uniform(n_charts, ranks);
    let mut a0 = HomCochain::zero(bundles.clone(), bundles.clone(), 1);
    for chart in 0..n_charts {
        for (i, bl) in blocks.iter().enumerate() {
            a0.add_entry(
                TupleKey(vec![chart]),
                DegreeLabel {
                    q: 0,
                    l: i + 1,
                    k: i,
                },
                Entry::Poly(bl.clone()),
            )
            .map_err(TwistError::from)?;
        }
    }
    // scalar gluings 1 + f_0 * r: chain maps by construction; the cocycle
    // defect is divisible by f_0^2, hence liftable through the contraction.
    let mut offsets = std::collections::BTreeMap::new();
    for a in 0..n_charts {
        for b in 0..n_charts {
            offsets.insert(
                (a, b),
                if a == b {
                    Polynomial::zero(nvars)
                } else {
                    random_poly(&mut rng, nvars, 1)
                },
            );
        }
    }
    let a1 = scalar_gluing(&bundles, &cover, |a, b| {
        &Polynomial::one(nvars) + &(&gens[0] * &offsets[&(a, b)])
    })?;
    let twisting = complete_twisting(&bundles, &a0, &a1, &cover, Some(12))?;

    let degs: Vec<i32> = (0..3).map(|_| rng.gen_range(-1..=2)).collect();
    let mut mk = |deg: i32| {
        let mut x = HomCochain::zero(bundles.clone(), bundles.clone(), deg);
        let len = bundles.ranks[0].len();
        for t in cover.nerve.keys() {
            let p = t.p() as i32;
            for l in 0..len {
                for k in 0..len {
                    if p + (l as i32 - k as i32) != deg || !rng.gen_bool(0.5) {
                        continue;
                    }
                    let rows = bundles.rank(t.first(), k);
                    let cols = bundles.rank(t.last(), l);
                    if rows == 0 || cols == 0 {
                        continue;
                    }
                    let m =
                        PolyMatrix::from_fn(rows, cols, nvars, |_, _| random_poly(&mut rng, nvars, 2));
                    x.add_entry(t.clone(), DegreeLabel { q: 0, l, k }, Entry::Poly(m))
                        .expect("random entry");
                }
            }
        }
        x
    };
    let (x, y, z) = (mk(degs[0]), mk(degs[1]), mk(degs[2]));
    Ok(RandomInstance {
        cover,
        twisting,
        x,
        y,
        z,
    })
}
