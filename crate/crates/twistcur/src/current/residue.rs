//! The assembled current of a twisted resolution and its action on test
//! forms.
//!
//! `u` is a cochain of smooth fields off the gauge zero set, so both limits
//! below are taken over one shrinking cutoff schedule against the global
//! gauge:
//!
//!   residue part   lim ∂̄χ_eps ∧ u φ        (residue mode, no tuple sign)
//!   smooth part    lim χ_eps (id - ∇u) φ    (principal value, times (-1)^p)
//!
//! The relative sign between the two realizations is the one that makes the
//! cutoff Leibniz rule `∂̄(χ u) = ∂̄χ ∧ u + χ ∂̄u` close at the level of
//! evaluated pairings; the transfer test in the homotopy module pins it
//! against finite differences.

use num::complex::Complex64;

use crate::cochain::{cochain_product, cochain_sub, Cover, Entry, HomCochain, TupleKey};
use crate::twist::{nabla, TwistingCochain};

use super::cutoff::CutoffProfile;
use super::field::NumericField;
use super::gauge::{Gauge, SingularGauge};
use super::pairing::{
    default_grid, gauge_scale, pair_schedule, PairingEvaluation, PairingMode,
    RegularizationSchedule, ResidueReport,
};
use super::quad::QuadBudget;
use super::sigma::{
    generically_exact_probe, sample_points_off_gauge, sigma_cochain, u_cochain, ExactnessProbe,
    Sigma0,
};
use super::testform::{KForm, TestForm};
use super::CurrentError;

/// Schedule and tolerances shared by every pairing of one verification run.
#[derive(Clone, Debug)]
pub struct PairingConfig {
    pub schedule: RegularizationSchedule,
    /// Absolute floor for pass-to-zero decisions.
    pub tol_abs: f64,
    /// Relative floor, against the largest value the schedule attains.
    pub tol_rel: f64,
    /// Evaluation points per real axis; `None` takes the dimension default.
    pub per_axis: Option<usize>,
}

impl Default for PairingConfig {
    fn default() -> Self {
        PairingConfig {
            schedule: RegularizationSchedule::default(),
            tol_abs: 1e-3,
            tol_rel: 1e-2,
            per_axis: None,
        }
    }
}

impl PairingConfig {
    pub fn grid(&self, nvars: usize) -> usize {
        self.per_axis.unwrap_or_else(|| default_grid(nvars))
    }

    pub fn passes(&self, report: &ResidueReport) -> bool {
        report.passes_to_zero(self.tol_abs, self.tol_rel)
    }
}

/// A twisting cochain together with everything its current needs: the
/// pseudoinverse assembly `u`, the chartwise singular gauge, and the record
/// of whether the chart complexes are exact at the probe points.
pub struct ResidueCurrent {
    pub twisting: TwistingCochain,
    pub sigma: HomCochain,
    pub sigma0: Sigma0,
    pub u: HomCochain,
    pub gauge: SingularGauge,
    pub probe: ExactnessProbe,
}

impl ResidueCurrent {
    pub fn assemble(
        twisting: &TwistingCochain,
        cover: &Cover,
        seed: u64,
    ) -> Result<ResidueCurrent, CurrentError> {
        let n_charts = cover.charts.len();
        // Generic ranks come from random trials anywhere in the charts; the
        // rank-drop locus has measure zero, so the max over trials is the
        // generic rank.
        let mut trials = Vec::new();
        for chart in &cover.charts {
            trials.extend(sample_points_off_gauge(
                &Gauge::one(cover.nvars),
                &chart.polydisc,
                6,
                0.0,
                seed,
            ));
        }
        let (sigma, sigma0) = sigma_cochain(&twisting.a, cover, &trials)?;
        let gauge = sigma0.singular_gauge(n_charts)?;
        let u = u_cochain(&sigma, cover)?;
        let mut probe_points = Vec::new();
        for (alpha, chart) in cover.charts.iter().enumerate() {
            probe_points.extend(sample_points_off_gauge(
                gauge.chart(alpha),
                &chart.polydisc,
                6,
                1e-6,
                seed ^ 0x9e3779b97f4a7c15,
            ));
        }
        let probe = generically_exact_probe(&sigma0, n_charts, &probe_points);
        Ok(ResidueCurrent {
            twisting: twisting.clone(),
            sigma,
            sigma0,
            u,
            gauge,
            probe,
        })
    }

    pub fn generically_exact(&self) -> bool {
        self.probe.all()
    }

    /// One gauge for every term of a multi-term check: the product over all
    /// charts. A single cutoff function then commutes with restriction and
    /// products, so current-level identities hold along the whole schedule,
    /// not only in the limit.
    pub fn global_gauge(&self) -> Gauge {
        let n_charts = self.twisting.bundles.n_charts();
        self.gauge.tuple_gauge(&TupleKey((0..n_charts).collect()))
    }

    /// `∇u = Du - ∂̄u`: symbolic differential, finite-difference ∂̄.
    pub fn nabla_u(&self, cover: &Cover) -> Result<HomCochain, CurrentError> {
        Ok(nabla(&self.u, &self.twisting, &self.twisting, cover)?)
    }

    /// The pointwise density of the smooth part, `id - ∇u`.
    pub fn smooth_density(&self, cover: &Cover) -> Result<HomCochain, CurrentError> {
        let id = HomCochain::identity(&self.twisting.bundles, cover.nvars);
        Ok(cochain_sub(&id, &self.nabla_u(cover)?)?)
    }

    /// The smooth part as an evaluator: literally absent when the chart
    /// complexes probe as exact, since `∇u = id` pointwise off the gauge
    /// zero set in that case.
    pub fn smooth_part(&self, cover: &Cover) -> Result<Option<HomCochain>, CurrentError> {
        if self.generically_exact() {
            return Ok(None);
        }
        Ok(Some(self.smooth_density(cover)?))
    }

    /// Max magnitude of `id - ∇u` sampled off the gauge zero set, per tuple.
    /// Exact chart complexes drive this to finite-difference noise, which
    /// grows like the inverse fourth power of the distance to the zero set;
    /// `min_gauge` keeps the samples away from it.
    pub fn smooth_defect(
        &self,
        cover: &Cover,
        points_per_tuple: usize,
        min_gauge: f64,
        seed: u64,
    ) -> Result<f64, CurrentError> {
        let density = self.smooth_density(cover)?;
        let mut worst: f64 = 0.0;
        for ((tuple, _), entry) in &density.entries {
            let cell = cover.cell(tuple)?;
            let points = sample_points_off_gauge(
                &self.gauge.tuple_gauge(tuple),
                &cell.polydisc,
                points_per_tuple,
                min_gauge,
                seed,
            );
            worst = worst.max(entry_sample_norm(entry, &points));
        }
        Ok(worst)
    }
}

fn entry_sample_norm(entry: &Entry, points: &[Vec<Complex64>]) -> f64 {
    match entry {
        Entry::Field(f) => f.sample_norm(points),
        Entry::Poly(m) => points
            .iter()
            .map(|p| m.evaluate(p).map(|v| v.norm_inf()).unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max),
    }
}

fn entry_field(entry: &Entry) -> NumericField {
    match entry {
        Entry::Field(f) => f.clone(),
        Entry::Poly(m) => NumericField::from_poly(m),
    }
}

/// The `(l, k)` blocks of `x` on `tuple` whose shape matches `rows x cols`,
/// each listed once.
pub fn matching_blocks(
    x: &HomCochain,
    tuple: &TupleKey,
    rows: usize,
    cols: usize,
) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = x
        .entries
        .iter()
        .filter(|((t, _), e)| t == tuple && e.dims() == (rows, cols))
        .map(|((_, label), _)| (label.l, label.k))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Pairs every entry of `x` at `(tuple, l, k)` against `psi`, summed over
/// antiholomorphic degrees on one eps schedule. `alternate` scales the
/// degree-q entry by `(-1)^q`: the inner sign of moving ∂̄ from the current
/// onto the test form.
#[allow(clippy::too_many_arguments)]
pub fn component_schedule(
    x: &HomCochain,
    tuple: &TupleKey,
    l: usize,
    k: usize,
    psi: &KForm,
    gauge: &Gauge,
    eps: &[f64],
    mode: PairingMode,
    per_axis: usize,
    budget: &QuadBudget,
    alternate: bool,
) -> Result<PairingEvaluation, CurrentError> {
    let chi = CutoffProfile;
    let mut total = PairingEvaluation::zero(eps.to_vec());
    for ((t, label), entry) in &x.entries {
        if t != tuple || label.l != l || label.k != k || entry.is_exact_zero() {
            continue;
        }
        let mut field = entry_field(entry);
        if alternate && label.q % 2 == 1 {
            field = field.scale(Complex64::new(-1.0, 0.0));
        }
        total.add(&pair_schedule(
            &field, psi, gauge, &chi, eps, mode, per_axis, budget,
        )?);
    }
    Ok(total)
}

/// One verified component of an action report.
#[derive(Clone, Debug)]
pub struct ComponentReport {
    pub l: usize,
    pub k: usize,
    pub report: ResidueReport,
}

/// The action of the full current `id - ∇U` of a twisted resolution on a
/// holomorphic cochain `phi` against one test form: residue components of
/// `u phi`, principal-value components of `(id - ∇u) phi` (absent when the
/// smooth density is literally zero), and their sum.
#[derive(Clone, Debug)]
pub struct ResidueActionReport {
    pub components: Vec<ComponentReport>,
    pub smooth_components: Vec<ComponentReport>,
    pub total: ResidueReport,
    pub generically_exact: bool,
}

pub fn residue_action(
    current: &ResidueCurrent,
    phi: &HomCochain,
    psi: &TestForm,
    cover: &Cover,
    cfg: &PairingConfig,
) -> Result<ResidueActionReport, CurrentError> {
    let cell = cover.cell(&psi.tuple)?;
    if !psi.support_inside(&cell.polydisc) {
        return Err(CurrentError::SupportOutsideDomain);
    }
    let nvars = cover.nvars;
    let per_axis = cfg.grid(nvars);
    let budget = QuadBudget::default_for(nvars);
    let gauge = current.global_gauge();
    let eps = cfg.schedule.eps_list(gauge_scale(&gauge, &psi.support, per_axis));
    let kform = psi.to_kform();

    let u_phi = cochain_product(&current.u, phi, cover)?;
    let tuple_sign = if psi.tuple.p() % 2 == 1 { -1.0 } else { 1.0 };

    let mut total = PairingEvaluation::zero(eps.clone());
    let mut components = Vec::new();
    for (l, k) in matching_blocks(&u_phi, &psi.tuple, kform.rows, kform.cols) {
        let ev = component_schedule(
            &u_phi,
            &psi.tuple,
            l,
            k,
            &kform,
            &gauge,
            &eps,
            PairingMode::Residue,
            per_axis,
            &budget,
            false,
        )?;
        total.add(&ev);
        components.push(ComponentReport {
            l,
            k,
            report: ResidueReport::from_evaluation(
                format!("residue l={l} k={k} vs {}", psi.name),
                &ev,
                cfg.schedule.tol,
            ),
        });
    }

    // The smooth part vanishes identically off the gauge zero set when the
    // chart complexes are exact, so its bulk integrals are only worth paying
    // for when the probe reports a genuine density.
    let mut smooth_components = Vec::new();
    if let Some(density) = current.smooth_part(cover)? {
        let smooth_phi = cochain_product(&density, phi, cover)?;
        for (l, k) in matching_blocks(&smooth_phi, &psi.tuple, kform.rows, kform.cols) {
            let mut ev = component_schedule(
                &smooth_phi,
                &psi.tuple,
                l,
                k,
                &kform,
                &gauge,
                &eps,
                PairingMode::PrincipalValue,
                per_axis,
                &budget,
                false,
            )?;
            ev.scale(Complex64::new(tuple_sign, 0.0));
            total.add(&ev);
            smooth_components.push(ComponentReport {
                l,
                k,
                report: ResidueReport::from_evaluation(
                    format!("smooth l={l} k={k} vs {}", psi.name),
                    &ev,
                    cfg.schedule.tol,
                ),
            });
        }
    }

    let total = ResidueReport::from_evaluation(
        format!("action vs {}", psi.name),
        &total,
        cfg.schedule.tol,
    );
    Ok(ResidueActionReport {
        components,
        smooth_components,
        total,
        generically_exact: current.generically_exact(),
    })
}
