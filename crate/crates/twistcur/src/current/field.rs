//! Matrix-valued (0, q)-forms given by pointwise evaluators.
//!
//! A field stores one evaluator per strictly increasing dzbar multi-index.
//! Components absent from the map are zero. Fields know nothing about the
//! tuple they sit on; domains enter only through the quadrature driver.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use num::complex::Complex64;

use crate::cochain::{Entry, Polydisc};
use crate::polyalg::{CMatrix, PolyMatrix};

pub type FieldEval = Arc<dyn Fn(&[Complex64]) -> CMatrix + Send + Sync>;

/// Wraps an evaluator in a bounded point-value cache.
///
/// The regularization drivers revisit identical points many times within one
/// integrand call: Neumann series terms, finite-difference stencils and the
/// product rule all bottom out in the same pseudoinverse blocks. Caching at
/// the block level collapses that repeat work. A full shard is cleared
/// rather than evicted entry by entry; quadrature visits each point in a
/// burst, so recency is all that matters and values are identical either
/// way.
pub fn memoized_eval(eval: FieldEval) -> FieldEval {
    const SHARDS: usize = 16;
    const CAP_PER_SHARD: usize = 1 << 14;
    let shards: Arc<Vec<Mutex<HashMap<Vec<u64>, CMatrix>>>> =
        Arc::new((0..SHARDS).map(|_| Mutex::new(HashMap::new())).collect());
    Arc::new(move |z: &[Complex64]| {
        let mut key = Vec::with_capacity(z.len() * 2);
        let mut h: u64 = 0xcbf29ce484222325;
        for c in z {
            for bits in [c.re.to_bits(), c.im.to_bits()] {
                key.push(bits);
                h = (h ^ bits).wrapping_mul(0x100000001b3);
            }
        }
        let shard = &shards[(h as usize) % SHARDS];
        if let Some(v) = shard.lock().unwrap().get(&key) {
            return v.clone();
        }
        let v = eval(z);
        let mut g = shard.lock().unwrap();
        if g.len() >= CAP_PER_SHARD {
            g.clear();
        }
        g.insert(key, v.clone());
        v
    })
}

#[derive(Clone)]
pub struct NumericField {
    pub rows: usize,
    pub cols: usize,
    pub nvars: usize,
    pub q: usize,
    pub components: BTreeMap<Vec<usize>, FieldEval>,
}

impl NumericField {
    pub fn new(rows: usize, cols: usize, nvars: usize, q: usize) -> Self {
        NumericField {
            rows,
            cols,
            nvars,
            q,
            components: BTreeMap::new(),
        }
    }

    /// A (0,0)-field from a single evaluator.
    pub fn from_eval(rows: usize, cols: usize, nvars: usize, eval: FieldEval) -> Self {
        let mut f = Self::new(rows, cols, nvars, 0);
        f.components.insert(vec![], eval);
        f
    }

    pub fn from_poly(m: &PolyMatrix) -> Self {
        let mat = m.clone();
        Self::from_eval(
            m.rows,
            m.cols,
            m.nvars,
            Arc::new(move |z| mat.evaluate(z).expect("dimension checked at insertion")),
        )
    }

    pub fn insert_component(&mut self, index: Vec<usize>, eval: FieldEval) {
        debug_assert_eq!(index.len(), self.q);
        debug_assert!(index.windows(2).all(|w| w[0] < w[1]));
        self.components.insert(index, eval);
    }

    /// Coefficient of `dzbar_index` at `point`; zero matrix when absent.
    pub fn component_at(&self, index: &[usize], point: &[Complex64]) -> CMatrix {
        match self.components.get(index) {
            Some(e) => e(point),
            None => CMatrix::zeros(self.rows, self.cols),
        }
    }

    pub fn scale(&self, c: Complex64) -> NumericField {
        let mut out = NumericField::new(self.rows, self.cols, self.nvars, self.q);
        for (idx, e) in &self.components {
            let e = e.clone();
            out.components
                .insert(idx.clone(), Arc::new(move |z| e(z).scale(c)));
        }
        out
    }

    /// Largest componentwise sup-norm over the given sample points. Used by
    /// numeric zero checks on equations that hold only up to roundoff.
    pub fn sample_norm(&self, points: &[Vec<Complex64>]) -> f64 {
        let mut worst: f64 = 0.0;
        for p in points {
            for e in self.components.values() {
                worst = worst.max(e(p).norm_inf());
            }
        }
        worst
    }
}

impl std::fmt::Debug for NumericField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "NumericField({}x{}, q={}, {} components)",
            self.rows,
            self.cols,
            self.q,
            self.components.len()
        )
    }
}

fn as_field(e: &Entry) -> NumericField {
    match e {
        Entry::Poly(m) => NumericField::from_poly(m),
        Entry::Field(f) => f.clone(),
    }
}

/// Sign of sorting the concatenation of two disjoint increasing index sets,
/// with the merged set. `None` when they share an index (the wedge dies).
fn wedge_merge(a: &[usize], b: &[usize]) -> Option<(Vec<usize>, f64)> {
    let mut inversions = 0usize;
    for &x in a {
        for &y in b {
            if x == y {
                return None;
            }
            if y < x {
                inversions += 1;
            }
        }
    }
    let mut merged: Vec<usize> = a.iter().chain(b).copied().collect();
    merged.sort_unstable();
    Some((merged, if inversions % 2 == 0 { 1.0 } else { -1.0 }))
}

/// Pointwise sum of two entries of matching shape and form degree.
pub fn add_fields(a: &Entry, b: &Entry) -> NumericField {
    let fa = as_field(a);
    let fb = as_field(b);
    debug_assert_eq!((fa.rows, fa.cols, fa.q), (fb.rows, fb.cols, fb.q));
    let mut out = NumericField::new(fa.rows, fa.cols, fa.nvars, fa.q);
    let mut keys: Vec<Vec<usize>> = fa.components.keys().cloned().collect();
    for k in fb.components.keys() {
        if !fa.components.contains_key(k) {
            keys.push(k.clone());
        }
    }
    for k in keys {
        let ea = fa.components.get(&k).cloned();
        let eb = fb.components.get(&k).cloned();
        let eval: FieldEval = match (ea, eb) {
            (Some(x), Some(y)) => Arc::new(move |z| &x(z) + &y(z)),
            (Some(x), None) => x,
            (None, Some(y)) => y,
            (None, None) => unreachable!(),
        };
        out.components.insert(k, eval);
    }
    out
}

/// Wedge-compose two entries: matrix product on coefficients, shuffle sign
/// on dzbar indices, `sign` from the cochain-level convention out front.
pub fn compose_entries_numeric(a: &Entry, b: &Entry, sign: i32) -> NumericField {
    let fa = as_field(a);
    let fb = as_field(b);
    debug_assert_eq!(fa.cols, fb.rows);
    let mut buckets: BTreeMap<Vec<usize>, Vec<(f64, FieldEval, FieldEval)>> = BTreeMap::new();
    for (ja, ea) in &fa.components {
        for (jb, eb) in &fb.components {
            if let Some((merged, s)) = wedge_merge(ja, jb) {
                buckets.entry(merged).or_default().push((
                    s * sign as f64,
                    ea.clone(),
                    eb.clone(),
                ));
            }
        }
    }
    let mut out = NumericField::new(fa.rows, fb.cols, fa.nvars, fa.q + fb.q);
    let (rows, cols) = (fa.rows, fb.cols);
    for (k, terms) in buckets {
        out.components.insert(
            k,
            Arc::new(move |z| {
                let mut acc = CMatrix::zeros(rows, cols);
                for (s, ea, eb) in &terms {
                    let prod = ea(z).matmul(&eb(z)).scale(Complex64::new(*s, 0.0));
                    acc = &acc + &prod;
                }
                acc
            }),
        );
    }
    out
}

/// dzbar of a field by central differences, `outer_sign` applied to every
/// component. Steps scale with the polydisc radii. Structurally zero in top
/// antiholomorphic degree.
pub fn dbar_field(
    f: &NumericField,
    domain: &Polydisc,
    fd_step: f64,
    outer_sign: f64,
) -> NumericField {
    let mut out = NumericField::new(f.rows, f.cols, f.nvars, f.q + 1);
    if f.q >= f.nvars {
        return out;
    }
    for (j, e) in &f.components {
        for i in 0..f.nvars {
            if j.contains(&i) {
                continue;
            }
            let smaller = j.iter().filter(|&&x| x < i).count();
            let eps = if smaller % 2 == 0 { 1.0 } else { -1.0 };
            let total = outer_sign * eps;
            let mut merged = j.clone();
            merged.push(i);
            merged.sort_unstable();
            let h = fd_step * domain.radii[i].max(1e-12);
            let e = e.clone();
            let eval: FieldEval = Arc::new(move |z| {
                let mut zp = z.to_vec();
                let mut zm = z.to_vec();
                zp[i] += Complex64::new(h, 0.0);
                zm[i] -= Complex64::new(h, 0.0);
                let dx = &e(&zp) - &e(&zm);
                zp[i] = z[i] + Complex64::new(0.0, h);
                zm[i] = z[i] - Complex64::new(0.0, h);
                let dy = &e(&zp) - &e(&zm);
                let deriv = &dx + &dy.scale(Complex64::new(0.0, 1.0));
                deriv.scale(Complex64::new(total / (4.0 * h), 0.0))
            });
            match out.components.remove(&merged) {
                None => {
                    out.components.insert(merged, eval);
                }
                Some(prev) => {
                    out.components
                        .insert(merged, Arc::new(move |z| &prev(z) + &eval(z)));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(re: f64, im: f64) -> Vec<Complex64> {
        vec![Complex64::new(re, im)]
    }

    #[test]
    fn wedge_merge_signs() {
        assert_eq!(wedge_merge(&[0], &[1]), Some((vec![0, 1], 1.0)));
        assert_eq!(wedge_merge(&[1], &[0]), Some((vec![0, 1], -1.0)));
        assert_eq!(wedge_merge(&[1], &[1]), None);
        assert_eq!(wedge_merge(&[0, 2], &[1]), Some((vec![0, 1, 2], -1.0)));
        assert_eq!(wedge_merge(&[], &[3]), Some((vec![3], 1.0)));
    }

    #[test]
    fn dbar_of_zbar_squared_is_two_zbar() {
        // f(z) = zbar^2, df/dzbar = 2 zbar.
        let f = NumericField::from_eval(
            1,
            1,
            1,
            Arc::new(|z: &[Complex64]| {
                let mut m = CMatrix::zeros(1, 1);
                m[(0, 0)] = z[0].conj() * z[0].conj();
                m
            }),
        );
        let d = dbar_field(&f, &Polydisc::unit(1), 1e-5, 1.0);
        let z = pt(0.3, -0.7);
        let got = d.component_at(&[0], &z)[(0, 0)];
        let want = 2.0 * z[0].conj();
        assert!((got - want).norm() < 1e-8, "got {got}, want {want}");
    }

    #[test]
    fn dbar_of_holomorphic_vanishes() {
        let f = NumericField::from_eval(
            1,
            1,
            1,
            Arc::new(|z: &[Complex64]| {
                let mut m = CMatrix::zeros(1, 1);
                m[(0, 0)] = z[0] * z[0] * z[0];
                m
            }),
        );
        let d = dbar_field(&f, &Polydisc::unit(1), 1e-5, 1.0);
        assert!(d.component_at(&[0], &pt(0.4, 0.2))[(0, 0)].norm() < 1e-8);
    }

    #[test]
    fn dbar_squares_to_zero_in_two_variables() {
        // f = |z1|^2 |z2|^2: dbar dbar f has components [0,1] that must cancel.
        let f = NumericField::from_eval(
            1,
            1,
            2,
            Arc::new(|z: &[Complex64]| {
                let mut m = CMatrix::zeros(1, 1);
                m[(0, 0)] = Complex64::new(z[0].norm_sqr() * z[1].norm_sqr(), 0.0);
                m
            }),
        );
        let domain = Polydisc::unit(2);
        let d = dbar_field(&f, &domain, 1e-4, 1.0);
        let dd = dbar_field(&d, &domain, 1e-4, 1.0);
        let z = vec![Complex64::new(0.3, 0.1), Complex64::new(-0.2, 0.5)];
        assert!(dd.component_at(&[0, 1], &z)[(0, 0)].norm() < 1e-6);
    }

    #[test]
    fn composition_shuffles_dzbar_indices() {
        // (f dzbar_1)(g dzbar_0) = -(fg) dzbar_0 dzbar_1.
        let mk = |idx: usize, val: f64| {
            let mut f = NumericField::new(1, 1, 2, 1);
            f.insert_component(
                vec![idx],
                Arc::new(move |_: &[Complex64]| {
                    let mut m = CMatrix::zeros(1, 1);
                    m[(0, 0)] = Complex64::new(val, 0.0);
                    m
                }),
            );
            f
        };
        let a = Entry::Field(mk(1, 3.0));
        let b = Entry::Field(mk(0, 5.0));
        let ab = compose_entries_numeric(&a, &b, 1);
        let z = vec![Complex64::new(0.0, 0.0); 2];
        assert_eq!(ab.q, 2);
        assert!((ab.component_at(&[0, 1], &z)[(0, 0)] - Complex64::new(-15.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn mixed_poly_field_addition() {
        let one = Entry::Poly(PolyMatrix::identity(1, 1));
        let f = Entry::Field(NumericField::from_eval(
            1,
            1,
            1,
            Arc::new(|z: &[Complex64]| {
                let mut m = CMatrix::zeros(1, 1);
                m[(0, 0)] = z[0];
                m
            }),
        ));
        let s = add_fields(&one, &f);
        let z = pt(0.25, 0.5);
        let got = s.component_at(&[], &z)[(0, 0)];
        assert!((got - (Complex64::new(1.0, 0.0) + z[0])).norm() < 1e-14);
    }
}
