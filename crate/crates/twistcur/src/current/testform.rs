//! Compactly supported test forms and their closure under dzbar.
//!
//! A test form is `P(z, zbar) * b(z) * dz_1..dz_n ^ dzbar_J` with `P` a
//! matrix of polynomials in the 2n variables `(z, zbar)` and `b` a product
//! bump, smooth and identically zero outside its polydisc. Everything a
//! pairing consumes is a `KForm`: coefficient evaluators per dzbar index,
//! holomorphic factor `dz_1..dz_n` implicit. dzbar of a test form stays in
//! that class with the bump differentiated in closed form, so no pairing
//! ever differences across the bump edge.

use std::collections::BTreeMap;
use std::sync::Arc;

use num::complex::Complex64;

use crate::cochain::{Polydisc, TupleKey};
use crate::polyalg::{CMatrix, PolyMatrix};

use super::field::FieldEval;

/// `beta(s) = exp(1 - 1/(1-s))` for `s < 1`, else 0; `beta(0) = 1`.
fn beta(s: f64) -> f64 {
    if s < 1.0 - 1e-12 {
        (1.0 - 1.0 / (1.0 - s)).exp()
    } else {
        0.0
    }
}

fn beta_prime(s: f64) -> f64 {
    if s < 1.0 - 1e-12 {
        let d = 1.0 - s;
        -(1.0 - 1.0 / d).exp() / (d * d)
    } else {
        0.0
    }
}

#[derive(Clone)]
pub struct TestForm {
    pub name: String,
    pub tuple: TupleKey,
    pub nvars: usize,
    /// Antiholomorphic indices J of the form part, strictly increasing.
    pub dzbar_index: Vec<usize>,
    /// Polynomial coefficients in 2n variables: z_1..z_n then zbar_1..zbar_n.
    pub coeff: PolyMatrix,
    /// Support polydisc of the bump; must sit inside the tuple's domain.
    pub support: Polydisc,
}

impl TestForm {
    pub fn antiholomorphic_degree(&self) -> usize {
        self.dzbar_index.len()
    }

    pub fn support_inside(&self, domain: &Polydisc) -> bool {
        self.support
            .center
            .iter()
            .zip(&self.support.radii)
            .zip(domain.center.iter().zip(&domain.radii))
            .all(|((c, r), (dc, dr))| (c - dc).norm() + r <= dr + 1e-12)
    }

    fn doubled(&self, z: &[Complex64]) -> Vec<Complex64> {
        let mut w = Vec::with_capacity(2 * self.nvars);
        w.extend_from_slice(z);
        w.extend(z.iter().map(|x| x.conj()));
        w
    }

    pub fn bump(&self, z: &[Complex64]) -> f64 {
        let mut b = 1.0;
        for (i, x) in z.iter().enumerate() {
            let rho = self.support.radii[i];
            let s = (x - self.support.center[i]).norm_sqr() / (rho * rho);
            b *= beta(s);
            if b == 0.0 {
                return 0.0;
            }
        }
        b
    }

    /// Full coefficient matrix `P(z, zbar) * bump(z)`.
    pub fn coeff_at(&self, z: &[Complex64]) -> CMatrix {
        let b = self.bump(z);
        if b == 0.0 {
            return CMatrix::zeros(self.coeff.rows, self.coeff.cols);
        }
        self.coeff
            .evaluate(&self.doubled(z))
            .expect("coeff matrix is 2n-variate by construction")
            .scale(Complex64::new(b, 0.0))
    }

    pub fn to_kform(&self) -> KForm {
        let this = self.clone();
        let mut components: BTreeMap<Vec<usize>, FieldEval> = BTreeMap::new();
        components.insert(
            self.dzbar_index.clone(),
            Arc::new(move |z: &[Complex64]| this.coeff_at(z)),
        );
        KForm {
            tuple: self.tuple.clone(),
            nvars: self.nvars,
            rows: self.coeff.rows,
            cols: self.coeff.cols,
            support: self.support.clone(),
            components,
        }
    }

    /// dzbar of the form, in closed form: polynomial part differentiated
    /// exactly, bump part via `beta'`. Coefficient of `dz_1..n ^ dzbar_K`
    /// picks up `(-1)^n` from moving each dzbar_i past the dz block and a
    /// shuffle sign from sorting i into J.
    pub fn dbar(&self) -> KForm {
        let n = self.nvars;
        let mut components: BTreeMap<Vec<usize>, FieldEval> = BTreeMap::new();
        for i in 0..n {
            if self.dzbar_index.contains(&i) {
                continue;
            }
            let smaller = self.dzbar_index.iter().filter(|&&j| j < i).count();
            let mut sign = if smaller % 2 == 0 { 1.0 } else { -1.0 };
            if n % 2 == 1 {
                sign = -sign;
            }
            let mut merged = self.dzbar_index.clone();
            merged.push(i);
            merged.sort_unstable();

            let this = self.clone();
            let dpoly = self.coeff.map(|p| p.derivative(n + i));
            let eval: FieldEval = Arc::new(move |z: &[Complex64]| {
                let b = this.bump(z);
                if b == 0.0 {
                    return CMatrix::zeros(this.coeff.rows, this.coeff.cols);
                }
                let w = this.doubled(z);
                let p = this.coeff.evaluate(&w).expect("2n-variate");
                let dp = dpoly.evaluate(&w).expect("2n-variate");
                // d(bump)/dzbar_i = beta'(s_i) (z_i - c_i)/rho_i^2 * rest
                let rho = this.support.radii[i];
                let diff = z[i] - this.support.center[i];
                let s = diff.norm_sqr() / (rho * rho);
                let db_over_b = if beta(s) > 0.0 {
                    beta_prime(s) / beta(s) * diff / (rho * rho)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                let total = &dp.scale(Complex64::new(b, 0.0))
                    + &p.scale(db_over_b * b);
                total.scale(Complex64::new(sign, 0.0))
            });
            match components.remove(&merged) {
                None => {
                    components.insert(merged, eval);
                }
                Some(prev) => {
                    components.insert(merged, Arc::new(move |z| &prev(z) + &eval(z)));
                }
            }
        }
        KForm {
            tuple: self.tuple.clone(),
            nvars: self.nvars,
            rows: self.coeff.rows,
            cols: self.coeff.cols,
            support: self.support.clone(),
            components,
        }
    }
}

/// Coefficients of `dz_1..dz_n ^ dzbar_K` per increasing index K, with a
/// common compact support box.
#[derive(Clone)]
pub struct KForm {
    pub tuple: TupleKey,
    pub nvars: usize,
    pub rows: usize,
    pub cols: usize,
    pub support: Polydisc,
    pub components: BTreeMap<Vec<usize>, FieldEval>,
}

impl KForm {
    pub fn component_at(&self, index: &[usize], z: &[Complex64]) -> CMatrix {
        match self.components.get(index) {
            Some(e) => e(z),
            None => CMatrix::zeros(self.rows, self.cols),
        }
    }

    pub fn scale(&self, c: Complex64) -> KForm {
        let mut out = self.clone();
        out.components = self
            .components
            .iter()
            .map(|(k, e)| {
                let e = e.clone();
                let eval: FieldEval = Arc::new(move |z: &[Complex64]| e(z).scale(c));
                (k.clone(), eval)
            })
            .collect();
        out
    }
}
