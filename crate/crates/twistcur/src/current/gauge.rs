//! Nonnegative polynomial gauges `g(z) = sum_k |p_k(z)|^2` cutting out the
//! singular sets of the pseudoinverse fields.
//!
//! The squares representation is closed under the two operations we need:
//! products (counts multiply) and exact dzbar-gradients
//! (`dg/dzbar_i = sum_k p_k(z) conj(dp_k/dz_i(z))`). It also yields rigorous
//! range enclosures over boxes, which is what steers quadrature refinement
//! toward the cutoff transition shells.

use std::collections::BTreeSet;

use num::complex::Complex64;

use crate::cochain::TupleKey;
use crate::polyalg::{MinorGauge, PolyError, PolyMatrix, Polynomial};

/// Monomial list with f64 coefficients, for tight evaluation loops.
#[derive(Clone, Debug)]
struct CompiledPoly {
    terms: Vec<(Vec<u16>, Complex64)>,
}

impl CompiledPoly {
    fn compile(p: &Polynomial) -> CompiledPoly {
        CompiledPoly {
            terms: p
                .terms()
                .map(|(m, c)| (m.0.clone(), c.to_complex()))
                .collect(),
        }
    }

    fn eval(&self, z: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (exp, c) in &self.terms {
            let mut t = *c;
            for (i, &e) in exp.iter().enumerate() {
                if e > 0 {
                    t *= z[i].powu(e as u32);
                }
            }
            acc += t;
        }
        acc
    }

    /// Range of one term's modulus over per-variable modulus intervals.
    fn term_range(exp: &[u16], c: Complex64, lo: &[f64], hi: &[f64]) -> (f64, f64) {
        let mut tlo = c.norm();
        let mut thi = tlo;
        for (i, &e) in exp.iter().enumerate() {
            if e > 0 {
                tlo *= lo[i].powi(e as i32);
                thi *= hi[i].powi(e as i32);
            }
        }
        (tlo, thi)
    }

    /// Enclosure of `|p|` over any box where `|z_i|` ranges in
    /// `[lo[i], hi[i]]`. Exact for a single term, since the moduli of the
    /// variables range independently; for sums the upper bound is the term
    /// sum and the lower bound peels one term against the rest.
    fn modulus_range(&self, lo: &[f64], hi: &[f64]) -> (f64, f64) {
        if self.terms.is_empty() {
            return (0.0, 0.0);
        }
        let ranges: Vec<(f64, f64)> = self
            .terms
            .iter()
            .map(|(exp, c)| Self::term_range(exp, *c, lo, hi))
            .collect();
        if ranges.len() == 1 {
            return ranges[0];
        }
        let total_hi: f64 = ranges.iter().map(|r| r.1).sum();
        let best_lo = ranges
            .iter()
            .map(|r| r.0 - (total_hi - r.1))
            .fold(0.0f64, f64::max);
        (best_lo, total_hi)
    }
}

#[derive(Clone, Debug)]
struct Square {
    poly: CompiledPoly,
    derivs: Vec<CompiledPoly>,
}

#[derive(Clone, Debug)]
pub struct Gauge {
    pub nvars: usize,
    pub squares: Vec<Polynomial>,
    compiled: Vec<Square>,
}

/// `|p|^2 = |-p|^2`, so squares lists compare up to sign.
fn contains_up_to_sign(list: &[Polynomial], p: &Polynomial) -> bool {
    list.iter().any(|q| q == p || *q == -p)
}

fn same_squares_up_to_sign(a: &[Polynomial], b: &[Polynomial]) -> bool {
    a.len() == b.len() && a.iter().all(|p| contains_up_to_sign(b, p))
}

impl Gauge {
    pub fn new(nvars: usize, squares: Vec<Polynomial>) -> Gauge {
        // Duplicate squares only rescale the gauge between its zero set and
        // the rest; dropping them keeps degrees, and with them shell counts,
        // as low as the zero set allows.
        let mut kept: Vec<Polynomial> = Vec::with_capacity(squares.len());
        for p in squares {
            if p.is_zero() || contains_up_to_sign(&kept, &p) {
                continue;
            }
            kept.push(p);
        }
        if kept.is_empty() {
            kept.push(Polynomial::zero(nvars));
        }
        let compiled = kept
            .iter()
            .map(|p| Square {
                poly: CompiledPoly::compile(p),
                derivs: (0..nvars).map(|i| CompiledPoly::compile(&p.derivative(i))).collect(),
            })
            .collect();
        Gauge {
            nvars,
            squares: kept,
            compiled,
        }
    }

    /// The gauge with value identically 1: empty singular set.
    pub fn one(nvars: usize) -> Gauge {
        Gauge::new(nvars, vec![Polynomial::one(nvars)])
    }

    pub fn is_trivial(&self) -> bool {
        self.squares.len() == 1 && self.squares[0].total_degree() == Some(0)
    }

    pub fn from_minors(nvars: usize, mg: &MinorGauge) -> Gauge {
        Gauge::new(nvars, mg.minors.clone())
    }

    /// Pointwise product: `|a|^2`-sums multiply into an `|ab|^2`-sum. Factors
    /// with the same squares cut out the same set, so the product collapses
    /// to one of them rather than doubling every degree.
    pub fn product(&self, other: &Gauge) -> Gauge {
        if self.is_trivial() {
            return other.clone();
        }
        if other.is_trivial() {
            return self.clone();
        }
        if same_squares_up_to_sign(&self.squares, &other.squares) {
            return self.clone();
        }
        let mut squares = Vec::with_capacity(self.squares.len() * other.squares.len());
        for a in &self.squares {
            for b in &other.squares {
                squares.push(a * b);
            }
        }
        Gauge::new(self.nvars, squares)
    }

    pub fn value(&self, z: &[Complex64]) -> f64 {
        self.compiled.iter().map(|s| s.poly.eval(z).norm_sqr()).sum()
    }

    /// Exact antiholomorphic gradient of the (real) gauge value.
    pub fn grad_zbar(&self, z: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.nvars];
        for s in &self.compiled {
            let v = s.poly.eval(z);
            for (i, d) in s.derivs.iter().enumerate() {
                out[i] += v * d.eval(z).conj();
            }
        }
        out
    }

    /// Rigorous enclosure of the gauge over the box with the given complex
    /// center and per-real-axis half widths (layout `re0, im0, re1, im1, ..`).
    ///
    /// Built from per-variable modulus intervals, so it is exact for single
    /// monomial squares; a loose enclosure here sends the refinement loop
    /// chasing shells that the cell cannot actually meet.
    pub fn cell_range(&self, center: &[Complex64], half: &[f64]) -> (f64, f64) {
        let n = center.len();
        let mut modlo = vec![0.0f64; n];
        let mut modhi = vec![0.0f64; n];
        for (i, c) in center.iter().enumerate() {
            let (hre, him) = (half[2 * i], half[2 * i + 1]);
            let relo = (c.re.abs() - hre).max(0.0);
            let imlo = (c.im.abs() - him).max(0.0);
            let rehi = c.re.abs() + hre;
            let imhi = c.im.abs() + him;
            modlo[i] = (relo * relo + imlo * imlo).sqrt();
            modhi[i] = (rehi * rehi + imhi * imhi).sqrt();
        }
        let mut lo = 0.0;
        let mut hi = 0.0;
        for s in &self.compiled {
            let (plo, phi) = s.poly.modulus_range(&modlo, &modhi);
            lo += plo * plo;
            hi += phi * phi;
        }
        (lo, hi)
    }

    /// Max gauge value over midpoints of a `per_axis`-fold tensor grid on the
    /// box; the scale that anchors automatic schedules.
    pub fn max_on_grid(&self, center: &[Complex64], half: &[f64], per_axis: usize) -> f64 {
        let n = self.nvars;
        let axes = 2 * n;
        let mut best = 0.0f64;
        let total = per_axis.pow(axes as u32);
        let mut z = vec![Complex64::new(0.0, 0.0); n];
        for flat in 0..total {
            let mut rem = flat;
            for ax in 0..axes {
                let idx = rem % per_axis;
                rem /= per_axis;
                let lo = if ax % 2 == 0 {
                    center[ax / 2].re - half[ax]
                } else {
                    center[ax / 2].im - half[ax]
                };
                let x = lo + (2.0 * half[ax]) * (idx as f64 + 0.5) / per_axis as f64;
                if ax % 2 == 0 {
                    z[ax / 2].re = x;
                } else {
                    z[ax / 2].im = x;
                }
            }
            best = best.max(self.value(&z));
        }
        best
    }
}

/// Per-chart gauges for a twisted complex, composed per tuple.
#[derive(Clone, Debug)]
pub struct SingularGauge {
    pub nvars: usize,
    pub per_chart: Vec<Gauge>,
}

impl SingularGauge {
    pub fn from_charts(nvars: usize, per_chart: Vec<Gauge>) -> SingularGauge {
        SingularGauge { nvars, per_chart }
    }

    /// Everything smooth: all charts carry the trivial gauge.
    pub fn trivial(nvars: usize, n_charts: usize) -> SingularGauge {
        SingularGauge {
            nvars,
            per_chart: (0..n_charts).map(|_| Gauge::one(nvars)).collect(),
        }
    }

    pub fn chart(&self, alpha: usize) -> &Gauge {
        &self.per_chart[alpha]
    }

    /// Gauge over a tuple: product over the distinct member charts, so its
    /// zero set contains the union of the member singular sets.
    pub fn tuple_gauge(&self, tuple: &TupleKey) -> Gauge {
        let distinct: BTreeSet<usize> = tuple.0.iter().copied().collect();
        let mut g = Gauge::one(self.nvars);
        for alpha in distinct {
            g = g.product(&self.per_chart[alpha]);
        }
        g
    }
}

/// Gauge of one chart's differential: product over degrees of the minor
/// gauges of the blocks at their generic ranks.
pub fn chart_gauge_from_blocks(
    nvars: usize,
    blocks: &[(PolyMatrix, usize)],
) -> Result<Gauge, PolyError> {
    let mut g = Gauge::one(nvars);
    for (block, rank) in blocks {
        let mg = block.minor_gauge(*rank)?;
        g = g.product(&Gauge::from_minors(nvars, &mg));
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn value_and_gradient_of_norm_squared() {
        // g = |z1|^2 + |z2|^2; dg/dzbar_i = z_i.
        let g = Gauge::new(
            2,
            vec![Polynomial::var(2, 0), Polynomial::var(2, 1)],
        );
        let p = vec![z(0.3, -0.4), z(1.0, 2.0)];
        assert!((g.value(&p) - (0.25 + 5.0)).abs() < 1e-14);
        let grad = g.grad_zbar(&p);
        assert!((grad[0] - p[0]).norm() < 1e-14);
        assert!((grad[1] - p[1]).norm() < 1e-14);
    }

    #[test]
    fn gradient_matches_differences_on_products() {
        // g = |z1 z2|^2 via the product of two gauges.
        let g1 = Gauge::new(2, vec![Polynomial::var(2, 0)]);
        let g2 = Gauge::new(2, vec![Polynomial::var(2, 1)]);
        let g = g1.product(&g2);
        let p = vec![z(0.7, 0.2), z(-0.3, 0.5)];
        let grad = g.grad_zbar(&p);
        let h = 1e-6;
        for i in 0..2 {
            let mut pp = p.clone();
            let mut pm = p.clone();
            pp[i] += z(h, 0.0);
            pm[i] -= z(h, 0.0);
            let dre = (g.value(&pp) - g.value(&pm)) / (2.0 * h);
            pp[i] = p[i] + z(0.0, h);
            pm[i] = p[i] - z(0.0, h);
            let dim = (g.value(&pp) - g.value(&pm)) / (2.0 * h);
            // g real: dg/dzbar = (dg/dx + i dg/dy)/2
            let fd = Complex64::new(dre / 2.0, dim / 2.0);
            assert!((grad[i] - fd).norm() < 1e-6, "var {i}: {:?} vs {:?}", grad[i], fd);
        }
    }

    #[test]
    fn cell_range_encloses_samples() {
        let g = Gauge::new(1, vec![{
            // p = 4 z^2 - 1
            let z2 = Polynomial::var(1, 0) * Polynomial::var(1, 0);
            &z2.scale(&crate::polyalg::GaussianRational::from_integers(4, 0))
                - &Polynomial::one(1)
        }]);
        let center = vec![z(0.4, 0.1)];
        let half = vec![0.15, 0.1];
        let (lo, hi) = g.cell_range(&center, &half);
        for a in -2..=2 {
            for b in -2..=2 {
                let p = vec![z(
                    center[0].re + half[0] * a as f64 / 2.0,
                    center[0].im + half[1] * b as f64 / 2.0,
                )];
                let v = g.value(&p);
                assert!(v >= lo - 1e-12 && v <= hi + 1e-12, "({a},{b}): {v} not in [{lo},{hi}]");
            }
        }
    }

    #[test]
    fn tuple_gauge_collapses_repeats_and_equal_charts() {
        let chart = Gauge::new(1, vec![Polynomial::var(1, 0)]);
        let sg = SingularGauge::from_charts(1, vec![chart.clone(), chart]);
        let diag = sg.tuple_gauge(&TupleKey(vec![0, 0, 0]));
        let p = vec![z(0.5, 0.0)];
        // |z|^2, not |z|^6
        assert!((diag.value(&p) - 0.25).abs() < 1e-14);
        // Distinct charts with the same squares still collapse: same zero set.
        let pair = sg.tuple_gauge(&TupleKey(vec![0, 1]));
        assert!((pair.value(&p) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn squares_dedup_up_to_sign() {
        let g = Gauge::new(
            2,
            vec![
                Polynomial::var(2, 0),
                -&Polynomial::var(2, 0),
                Polynomial::var(2, 1),
            ],
        );
        assert_eq!(g.squares.len(), 2);
        let p = vec![z(0.3, 0.0), z(0.4, 0.0)];
        assert!((g.value(&p) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn cell_range_is_exact_on_monomial_squares() {
        // g = |z1 z2^2|^2 on a box away from the axes.
        let sq = &Polynomial::var(2, 0) * &(&Polynomial::var(2, 1) * &Polynomial::var(2, 1));
        let g = Gauge::new(2, vec![sq]);
        let center = vec![z(0.5, 0.0), z(0.0, 0.4)];
        let half = vec![0.1, 0.1, 0.1, 0.1];
        let (lo, hi) = g.cell_range(&center, &half);
        // |z1| in [0.4, sqrt(0.36+0.01)], |z2| in [0.3, sqrt(0.01+0.25)].
        let m1 = (0.4f64, (0.37f64).sqrt());
        let m2 = (0.3f64, (0.26f64).sqrt());
        assert!((lo - (m1.0 * m2.0 * m2.0).powi(2)).abs() < 1e-12);
        assert!((hi - (m1.1 * m2.1 * m2.1).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn minor_gauge_of_koszul_block() {
        // a0 = [z1 z2], rank 1: gauge |z1|^2 + |z2|^2.
        let a0 = PolyMatrix::from_fn(1, 2, 2, |_, j| Polynomial::var(2, j));
        let g = chart_gauge_from_blocks(2, &[(a0, 1)]).unwrap();
        let p = vec![z(0.6, 0.0), z(0.0, 0.8)];
        assert!((g.value(&p) - 1.0).abs() < 1e-14);
    }
}
