//! Deterministic tensor-midpoint quadrature with local dyadic refinement.
//!
//! The regularized integrands are smooth but concentrate on cutoff
//! transition shells that shrink geometrically with the schedule; a fixed
//! grid cannot resolve the late shells, so cells flagged by the refinement
//! predicate (rigorous gauge-range bounds, supplied by the caller) are split
//! dyadically until the predicate releases them or the budget stops them.
//!
//! Determinism: base cells are traversed by flat index, each subtree is a
//! sequential depth-first sum, and base-cell subtotals are combined by a
//! fixed-shape pairwise tree. Results are bit-stable under any thread count.
//!
//! The integrand returns one value per schedule entry so a single traversal
//! serves the whole epsilon schedule.

use num::complex::Complex64;
use rayon::prelude::*;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::OnceLock;

static TRACE_ON: OnceLock<bool> = OnceLock::new();
static TRACE_EVALS: AtomicU64 = AtomicU64::new(0);

fn trace_eval() {
    if !*TRACE_ON.get_or_init(|| std::env::var_os("TWISTCUR_QUAD_TRACE").is_some()) {
        return;
    }
    let n = TRACE_EVALS.fetch_add(1, Ordering::Relaxed) + 1;
    if n % 50_000 == 0 {
        eprintln!("[quad] {}K evals", n / 1000);
    }
}

pub struct QuadBudget {
    pub max_depth: usize,
    pub max_evals_per_cell: usize,
}

impl QuadBudget {
    pub fn default_for(nvars: usize) -> QuadBudget {
        if nvars <= 1 {
            QuadBudget {
                max_depth: 14,
                max_evals_per_cell: 1 << 14,
            }
        } else {
            // One base cell may carry every late shell of the schedule when
            // the zero set sits inside it, so the per-cell allowance has to
            // cover the union of their refinements.
            QuadBudget {
                max_depth: 11,
                max_evals_per_cell: 1 << 18,
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct QuadResult {
    pub values: Vec<Complex64>,
    pub evals: u64,
    pub budget_hit: bool,
}

struct CellRun<'a> {
    axes: usize,
    width: usize,
    budget: &'a QuadBudget,
    refine: &'a (dyn Fn(&[Complex64], &[f64]) -> bool + Sync),
    integrand: &'a (dyn Fn(&[Complex64]) -> Vec<Complex64> + Sync),
    evals: u64,
    budget_hit: bool,
    acc: Vec<Complex64>,
}

impl CellRun<'_> {
    fn to_complex(&self, x: &[f64]) -> Vec<Complex64> {
        (0..self.axes / 2)
            .map(|i| Complex64::new(x[2 * i], x[2 * i + 1]))
            .collect()
    }

    fn leaf(&mut self, center: &[f64], half: &[f64]) {
        let z = self.to_complex(center);
        let vol: f64 = half.iter().map(|h| 2.0 * h).product();
        let v = (self.integrand)(&z);
        debug_assert_eq!(v.len(), self.width);
        for (a, x) in self.acc.iter_mut().zip(v) {
            *a += x * vol;
        }
        self.evals += 1;
        trace_eval();
    }

    fn descend(&mut self, center: &[f64], half: &[f64], depth: usize) {
        let z = self.to_complex(center);
        if (self.refine)(&z, half) {
            if depth >= self.budget.max_depth
                || self.evals + (1 << self.axes) > self.budget.max_evals_per_cell as u64
            {
                self.budget_hit = true;
                self.leaf(center, half);
                return;
            }
            let child_half: Vec<f64> = half.iter().map(|h| h / 2.0).collect();
            let mut child_center = vec![0.0; self.axes];
            for corner in 0..(1usize << self.axes) {
                for ax in 0..self.axes {
                    let side = if corner >> ax & 1 == 0 { -1.0 } else { 1.0 };
                    child_center[ax] = center[ax] + side * child_half[ax];
                }
                let cc = child_center.clone();
                self.descend(&cc, &child_half, depth + 1);
            }
        } else {
            self.leaf(center, half);
        }
    }
}

/// Integrates over the box `center ± half` (real coordinates, two axes per
/// complex variable) with `per_axis` base midpoint cells per axis.
pub fn integrate_adaptive(
    center: &[f64],
    half: &[f64],
    per_axis: usize,
    width: usize,
    refine: &(dyn Fn(&[Complex64], &[f64]) -> bool + Sync),
    integrand: &(dyn Fn(&[Complex64]) -> Vec<Complex64> + Sync),
    budget: &QuadBudget,
) -> QuadResult {
    let axes = center.len();
    assert_eq!(axes % 2, 0);
    assert_eq!(half.len(), axes);
    let total: usize = per_axis.pow(axes as u32);
    let cell_half: Vec<f64> = half.iter().map(|h| h / per_axis as f64).collect();

    let subtotals: Vec<(Vec<Complex64>, u64, bool)> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut c = vec![0.0; axes];
            let mut rem = flat;
            for ax in 0..axes {
                let idx = rem % per_axis;
                rem /= per_axis;
                let lo = center[ax] - half[ax];
                c[ax] = lo + cell_half[ax] * (2 * idx + 1) as f64;
            }
            let mut run = CellRun {
                axes,
                width,
                budget,
                refine,
                integrand,
                evals: 0,
                budget_hit: false,
                acc: vec![Complex64::new(0.0, 0.0); width],
            };
            run.descend(&c, &cell_half, 0);
            (run.acc, run.evals, run.budget_hit)
        })
        .collect();

    let evals = subtotals.iter().map(|s| s.1).sum();
    let budget_hit = subtotals.iter().any(|s| s.2);
    QuadResult {
        values: pairwise_sum(&subtotals, 0, total, width),
        evals,
        budget_hit,
    }
}

fn pairwise_sum(
    parts: &[(Vec<Complex64>, u64, bool)],
    lo: usize,
    hi: usize,
    width: usize,
) -> Vec<Complex64> {
    match hi - lo {
        0 => vec![Complex64::new(0.0, 0.0); width],
        1 => parts[lo].0.clone(),
        n => {
            let mid = lo + n / 2;
            let a = pairwise_sum(parts, lo, mid, width);
            let b = pairwise_sum(parts, mid, hi, width);
            a.iter().zip(b).map(|(x, y)| x + y).collect()
        }
    }
}
