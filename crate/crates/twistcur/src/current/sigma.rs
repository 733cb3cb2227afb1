//! Pseudoinverse fields and the two Neumann assemblies built from them.
//!
//! sigma0 inverts the chartwise holomorphic differential blockwise at a
//! FIXED generic rank, so each entry is one smooth field off the gauge zero
//! set; thresholded numeric ranks would flip near the zero set and break
//! smoothness. The full right-inverse is the finite alternating series
//! `sigma = sigma0 - sigma0 a' sigma0 + ..` and the current seed is
//! `u = sigma + sigma(dbar sigma) + sigma(dbar sigma)^2 + ..`, both of which
//! terminate on nerve depth and antiholomorphic degree.

use std::collections::BTreeMap;
use std::sync::Arc;

use num::complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cochain::{cochain_add, cochain_product, dbar, Cover, DegreeLabel, Entry, HomCochain};
use crate::polyalg::{pinv_fixed_rank, CMatrix, PolyMatrix};

use super::field::{memoized_eval, NumericField};
use super::gauge::{chart_gauge_from_blocks, Gauge, SingularGauge};
use super::CurrentError;

/// Caches every numeric entry of the cochain at the evaluator level. The
/// assemblies are evaluated repeatedly at the same quadrature points across
/// pairings, series terms and finite-difference stencils.
fn memoize_cochain(x: HomCochain) -> HomCochain {
    let mut out = x;
    for e in out.entries.values_mut() {
        if let Entry::Field(f) = e {
            for ev in f.components.values_mut() {
                *ev = memoized_eval(ev.clone());
            }
        }
    }
    out
}

/// Relative step for every finite-difference dbar in the assemblies.
pub const FD_STEP: f64 = 1e-4;

/// The blockwise pseudoinverse data of a twisting cochain's p = 0, Hom
/// degree +1 part: per (chart, source degree j) the block `E_{-j} ->
/// E_{-(j-1)}` and its generic rank.
pub struct Sigma0 {
    pub nvars: usize,
    /// (chart, j) -> (block of the differential, generic rank).
    pub blocks: BTreeMap<(usize, usize), (PolyMatrix, usize)>,
    /// The sigma0 cochain: degree -1, numeric entries on singletons.
    pub cochain: HomCochain,
}

impl Sigma0 {
    /// Pointwise pseudoinverse with the singular set reported explicitly.
    pub fn eval_checked(
        &self,
        chart: usize,
        j: usize,
        point: &[Complex64],
    ) -> Result<CMatrix, CurrentError> {
        let (block, rank) = self
            .blocks
            .get(&(chart, j))
            .ok_or(CurrentError::MissingBlock {
                chart,
                degree: j as i64,
            })?;
        pinv_eval(block, *rank, point).ok_or_else(|| CurrentError::SingularPoint {
            chart,
            point: point.to_vec(),
        })
    }

    /// Per-chart gauges of the differential: degreewise minor-gauge product.
    pub fn singular_gauge(&self, n_charts: usize) -> Result<SingularGauge, CurrentError> {
        let mut charts = Vec::with_capacity(n_charts);
        for alpha in 0..n_charts {
            let blocks: Vec<(PolyMatrix, usize)> = self
                .blocks
                .iter()
                .filter(|((c, _), _)| *c == alpha)
                .map(|(_, (m, r))| (m.clone(), *r))
                .collect();
            charts.push(chart_gauge_from_blocks(self.nvars, &blocks)?);
        }
        Ok(SingularGauge::from_charts(self.nvars, charts))
    }
}

fn pinv_eval(block: &PolyMatrix, rank: usize, point: &[Complex64]) -> Option<CMatrix> {
    let m = block.evaluate(point).ok()?;
    pinv_fixed_rank(&m, rank).ok()
}

/// Splits a validated twisting cochain into its chartwise Hom-degree +1
/// part and the rest.
pub fn split_differential(a: &HomCochain) -> (HomCochain, HomCochain) {
    let mut a0 = HomCochain::zero(a.source.clone(), a.target.clone(), a.degree);
    let mut rest = HomCochain::zero(a.source.clone(), a.target.clone(), a.degree);
    for ((t, label), e) in &a.entries {
        if t.p() == 0 && label.q == 0 && label.r() == 1 {
            a0.entries.insert((t.clone(), *label), e.clone());
        } else {
            rest.entries.insert((t.clone(), *label), e.clone());
        }
    }
    (a0, rest)
}

/// Builds sigma0 from the chartwise differential of `a`, computing generic
/// ranks from the trial points.
pub fn pseudoinverse_field(
    a: &HomCochain,
    trials: &[Vec<Complex64>],
    nvars: usize,
) -> Result<Sigma0, CurrentError> {
    let (a0, _) = split_differential(a);
    let mut blocks = BTreeMap::new();
    let mut cochain = HomCochain::zero(a.source.clone(), a.target.clone(), -1);
    for ((t, label), e) in &a0.entries {
        let chart = t.first();
        let j = label.l;
        let block = match e {
            Entry::Poly(m) => m.clone(),
            Entry::Field(_) => return Err(CurrentError::DifferentialNotPolynomial { chart }),
        };
        let rank = block.generic_rank(trials)?;
        let eval_block = block.clone();
        let field = NumericField::from_eval(
            block.cols,
            block.rows,
            nvars,
            // zeros off-rank: unreachable under cutoff-gated quadrature, and
            // the checked path reports the singular point instead. Memoized:
            // every composite field built on top bottoms out here.
            memoized_eval(Arc::new(move |z: &[Complex64]| {
                pinv_eval(&eval_block, rank, z)
                    .unwrap_or_else(|| CMatrix::zeros(eval_block.cols, eval_block.rows))
            })),
        );
        cochain.add_entry(
            t.clone(),
            DegreeLabel {
                q: 0,
                l: label.k,
                k: label.l,
            },
            Entry::Field(field),
        )?;
        blocks.insert((chart, j), (block, rank));
    }
    Ok(Sigma0 {
        nvars,
        blocks,
        cochain,
    })
}

/// `sigma = sigma0 (id + a' sigma0)^{-1}` as the finite alternating series.
pub fn sigma_cochain(
    a: &HomCochain,
    cover: &Cover,
    trials: &[Vec<Complex64>],
) -> Result<(HomCochain, Sigma0), CurrentError> {
    let s0 = pseudoinverse_field(a, trials, cover.nvars)?;
    let (_, a_rest) = split_differential(a);
    let max_terms = cover
        .nerve
        .keys()
        .map(|t| t.p())
        .max()
        .unwrap_or(0)
        + 1;
    let mut total = s0.cochain.clone();
    let mut term = s0.cochain.clone();
    for _ in 0..max_terms {
        let step = cochain_product(&a_rest, &term, cover)?;
        if step.entries.is_empty() {
            break;
        }
        term = cochain_product(&s0.cochain, &step, cover)?.scale_i64(-1);
        if term.entries.is_empty() {
            break;
        }
        total = cochain_add(&total, &term)?;
    }
    Ok((memoize_cochain(total), s0))
}

/// `u = sigma (id - dbar sigma)^{-1}`, truncated by antiholomorphic degree
/// and Hom depth.
pub fn u_cochain(sigma: &HomCochain, cover: &Cover) -> Result<HomCochain, CurrentError> {
    let dbar_sigma = dbar(sigma, cover, FD_STEP)?;
    let mut total = sigma.clone();
    let mut term = sigma.clone();
    for _ in 0..cover.nvars {
        term = cochain_product(&term, &dbar_sigma, cover)?;
        if term.entries.is_empty() {
            break;
        }
        total = cochain_add(&total, &term)?;
    }
    Ok(memoize_cochain(total))
}

/// Chartwise exactness probe: `a0 sigma0 + sigma0 a0 = id` on every negative
/// degree at every probe point, to 1e-8.
#[derive(Clone, Debug)]
pub struct ExactnessProbe {
    pub per_chart: Vec<bool>,
    pub worst_defect: f64,
}

impl ExactnessProbe {
    pub fn all(&self) -> bool {
        self.per_chart.iter().all(|&b| b)
    }
}

pub const EXACTNESS_TOL: f64 = 1e-8;

pub fn generically_exact_probe(
    s0: &Sigma0,
    n_charts: usize,
    points: &[Vec<Complex64>],
) -> ExactnessProbe {
    let mut per_chart = Vec::with_capacity(n_charts);
    let mut worst: f64 = 0.0;
    for alpha in 0..n_charts {
        let max_j = s0
            .blocks
            .keys()
            .filter(|(c, _)| *c == alpha)
            .map(|&(_, j)| j)
            .max()
            .unwrap_or(0);
        let mut ok = true;
        for j in 1..=max_j {
            let dim = s0
                .blocks
                .get(&(alpha, j))
                .map(|(m, _)| m.cols)
                .unwrap_or(0);
            if dim == 0 {
                continue;
            }
            for pt in points {
                // incoming: a0_{j+1} sigma0_{j+1}; outgoing: sigma0_j a0_j
                let mut m = CMatrix::zeros(dim, dim);
                if let Some((blk, rank)) = s0.blocks.get(&(alpha, j + 1)) {
                    match (blk.evaluate(pt), pinv_eval(blk, *rank, pt)) {
                        (Ok(av), Some(sv)) => m = &m + &av.matmul(&sv),
                        _ => {
                            ok = false;
                            continue;
                        }
                    }
                }
                if let Some((blk, rank)) = s0.blocks.get(&(alpha, j)) {
                    match (blk.evaluate(pt), pinv_eval(blk, *rank, pt)) {
                        (Ok(av), Some(sv)) => m = &m + &sv.matmul(&av),
                        _ => {
                            ok = false;
                            continue;
                        }
                    }
                }
                let defect = (&m - &CMatrix::identity(dim)).norm_inf();
                worst = worst.max(defect);
                if defect > EXACTNESS_TOL {
                    ok = false;
                }
            }
        }
        per_chart.push(ok);
    }
    ExactnessProbe {
        per_chart,
        worst_defect: worst,
    }
}

/// Deterministic sample points in the polydisc with gauge value at least
/// `min_gauge`; for rank probes and off-Z spot checks.
pub fn sample_points_off_gauge(
    gauge: &Gauge,
    domain: &crate::cochain::Polydisc,
    count: usize,
    min_gauge: f64,
    seed: u64,
) -> Vec<Vec<Complex64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count && attempts < 10_000 * count.max(1) {
        attempts += 1;
        let p: Vec<Complex64> = domain
            .center
            .iter()
            .zip(&domain.radii)
            .map(|(c, r)| {
                c + Complex64::new(
                    rng.gen_range(-0.9..0.9) * r,
                    rng.gen_range(-0.9..0.9) * r,
                )
            })
            .collect();
        if gauge.value(&p) >= min_gauge {
            out.push(p);
        }
    }
    out
}
