//! Theorem-level checks on assembled currents: duality of the residue
//! action, predicted vanishing from codimension data, the comparison current
//! between two resolutions, and the homotopy reduction between them.
//!
//! Every check realizes current identities as finite schedules of pairings
//! against test forms, all terms of one residual sharing a single gauge and
//! eps schedule so cancellations happen at every eps, not only in the limit.
//! Derivatives of currents are never taken numerically at pairing time: the
//! `D` part is applied symbolically to the cochain and the `∂̄` part is
//! transferred to the test form. The transfer costs `(-1)^q` on the degree-q
//! piece, plus `(-1)^p` on residue-mode terms; for principal values the
//! tuple signs cancel, leaving `(-1)^{q+1}`.

use std::collections::BTreeMap;

use num::complex::Complex64;
use thiserror::Error;

use crate::cochain::{
    cochain_product, cochain_sub, CochainError, Cover, HomCochain, TupleKey,
};
use crate::current::{
    component_schedule, gauge_scale, matching_blocks, residue_action, CurrentError, Gauge, KForm,
    PairingConfig, PairingEvaluation, PairingMode, QuadBudget, ResidueActionReport,
    ResidueCurrent, ResidueReport, TestForm,
};
use crate::fixtures::unit_twisting;
use crate::twist::{d_op, Homotopy, Morphism, TwistError};

#[derive(Debug, Error)]
pub enum HomotopyError {
    /// An exact-layer hypothesis failed; no numerics were run.
    #[error("precondition: {0}")]
    Precondition(String),
    #[error(transparent)]
    Current(#[from] CurrentError),
}

impl From<TwistError> for HomotopyError {
    fn from(e: TwistError) -> Self {
        HomotopyError::Current(e.into())
    }
}

impl From<CochainError> for HomotopyError {
    fn from(e: CochainError) -> Self {
        HomotopyError::Current(e.into())
    }
}

/// What the caller asserts about the section being tested.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MembershipClaim {
    Member,
    NonMember,
    Unstated,
}

/// Outcome of a duality check: the exact-layer facts, the pairing schedules,
/// and whether they are consistent with the claim.
#[derive(Debug)]
pub struct DualityVerdict {
    pub phi_label: String,
    pub claim: MembershipClaim,
    pub phi_closed: bool,
    /// `Some(true)` when a witness was supplied and `D witness = phi`
    /// exactly.
    pub witness_closed: Option<bool>,
    pub generically_exact: bool,
    /// User-asserted hypothesis that the low Hom-degree components of the
    /// current vanish; concluding membership from vanishing pairings needs
    /// it.
    pub low_degree_vanishing_asserted: bool,
    pub actions: Vec<ResidueActionReport>,
    pub all_zero: bool,
    pub any_nonzero: bool,
    pub conclusion: MembershipClaim,
    pub consistent: bool,
}

impl DualityVerdict {
    pub fn summary(&self) -> String {
        let tail = if self.all_zero {
            "R\u{3c6} \u{2192} 0"
        } else if self.any_nonzero {
            "R\u{3c6} \u{2260} 0"
        } else {
            "R\u{3c6} inconclusive"
        };
        let head = match self.conclusion {
            MembershipClaim::Member => "member",
            MembershipClaim::NonMember => "nonmember",
            MembershipClaim::Unstated => "unresolved",
        };
        if self.consistent {
            format!("{head}, {tail}")
        } else {
            format!("inconsistent with claim: {head}, {tail}")
        }
    }
}

/// Tests `phi` against the residue action of a resolution's current: a
/// member of the annihilated ideal pairs to zero against every test form, a
/// nonmember stays nonzero on some form. A witness is a cochain with
/// `D witness = phi`, which forces vanishing.
#[allow(clippy::too_many_arguments)]
pub fn check_duality(
    current: &ResidueCurrent,
    phi: &HomCochain,
    phi_label: &str,
    witness: Option<&HomCochain>,
    claim: MembershipClaim,
    low_degree_vanishing_asserted: bool,
    testforms: &[TestForm],
    cover: &Cover,
    cfg: &PairingConfig,
) -> Result<DualityVerdict, HomotopyError> {
    let source = unit_twisting(cover);
    if phi.source != source.bundles || phi.target != current.twisting.bundles {
        return Err(HomotopyError::Precondition(
            "phi must map the unit family into the resolution".into(),
        ));
    }
    let phi_closed = d_op(phi, &current.twisting, &source, cover)?.is_symbolically_zero();
    let witness_closed = match witness {
        None => None,
        Some(w) => {
            let dw = d_op(w, &current.twisting, &source, cover)?;
            Some(cochain_sub(&dw, phi)?.is_symbolically_zero())
        }
    };

    let mut actions = Vec::with_capacity(testforms.len());
    for psi in testforms {
        actions.push(residue_action(current, phi, psi, cover, cfg)?);
    }
    let all_zero = actions.iter().all(|a| cfg.passes(&a.total));
    let any_nonzero = actions
        .iter()
        .any(|a| a.total.stays_nonzero(cfg.tol_abs, 10.0));

    let conclusion = if any_nonzero {
        MembershipClaim::NonMember
    } else if all_zero
        && phi_closed
        && current.generically_exact()
        && low_degree_vanishing_asserted
    {
        MembershipClaim::Member
    } else {
        MembershipClaim::Unstated
    };
    let consistent = match claim {
        MembershipClaim::Unstated => true,
        MembershipClaim::Member => {
            phi_closed && witness_closed.unwrap_or(true) && all_zero && !any_nonzero
        }
        MembershipClaim::NonMember => any_nonzero,
    };
    Ok(DualityVerdict {
        phi_label: phi_label.into(),
        claim,
        phi_closed,
        witness_closed,
        generically_exact: current.generically_exact(),
        low_degree_vanishing_asserted,
        actions,
        all_zero,
        any_nonzero,
        conclusion,
        consistent,
    })
}

/// Predicted-zero test for component `(k, l)` of a degree `-1` current:
/// every step m = 1..k-l needs the level `l+m` singular locus to have
/// codimension at least m+1. Missing codimension data predicts nothing.
pub fn predicted_vanishing(k: usize, l: usize, codim: &BTreeMap<usize, usize>) -> bool {
    if k <= l {
        return false;
    }
    (1..=k - l).all(|m| codim.get(&(l + m)).is_some_and(|&c| c >= m + 1))
}

/// Two-sided predicted-zero test for component `(k, l)` of the product
/// current of a morphism `source -> target`: the source loci carry the
/// m = 1..k-l-1 steps at codimension m+1, the target loci the m = 2..k-l
/// steps at codimension m.
pub fn predicted_product_vanishing(
    k: usize,
    l: usize,
    codim_source: &BTreeMap<usize, usize>,
    codim_target: &BTreeMap<usize, usize>,
) -> bool {
    if k <= l + 1 {
        return false;
    }
    (1..=k - l - 1).all(|m| codim_source.get(&(l + m)).is_some_and(|&c| c >= m + 1))
        && (2..=k - l).all(|m| codim_target.get(&(l + m)).is_some_and(|&c| c >= m))
}

#[derive(Debug)]
pub struct VanishingItem {
    pub l: usize,
    pub k: usize,
    pub predicted: bool,
    pub reports: Vec<ResidueReport>,
    /// `None` when no supplied test form contracts with this component.
    pub outcome: Option<bool>,
}

#[derive(Debug)]
pub struct VanishingReport {
    pub items: Vec<VanishingItem>,
    /// The smooth part of the current is the literal zero evaluator.
    pub smooth_literal_zero: bool,
    /// Max sampled magnitude of the smooth density off the gauge zero set.
    pub smooth_defect: f64,
    pub consistent: bool,
}

/// Labels `(l, k)` carried by `x`, in order.
fn component_labels(x: &HomCochain) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = x.entries.keys().map(|(_, lb)| (lb.l, lb.k)).collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// True when `x` has an entry at `(tuple, l, k)` whose antiholomorphic
/// degree contracts with a residue-mode pairing against a degree `q_psi`
/// test form.
fn contracts(x: &HomCochain, tuple: &TupleKey, l: usize, k: usize, n: usize, q_psi: usize) -> bool {
    x.entries.iter().any(|((t, lb), e)| {
        t == tuple
            && lb.l == l
            && lb.k == k
            && !e.is_exact_zero()
            && lb.q + 1 + q_psi == n
    })
}

fn residue_items(
    x: &HomCochain,
    predicted: impl Fn(usize, usize) -> bool,
    gauge: &Gauge,
    testforms: &[TestForm],
    cover: &Cover,
    cfg: &PairingConfig,
) -> Result<(Vec<VanishingItem>, bool), HomotopyError> {
    let n = cover.nvars;
    let per_axis = cfg.grid(n);
    let budget = QuadBudget::default_for(n);
    let mut items = Vec::new();
    let mut consistent = true;
    for (l, k) in component_labels(x) {
        let prediction = predicted(k, l);
        let mut reports = Vec::new();
        for psi in testforms {
            let cell = cover.cell(&psi.tuple)?;
            if !psi.support_inside(&cell.polydisc) {
                return Err(HomotopyError::Current(CurrentError::SupportOutsideDomain));
            }
            let kform = psi.to_kform();
            if !matching_blocks(x, &psi.tuple, kform.rows, kform.cols).contains(&(l, k)) {
                continue;
            }
            // A non-contracting pairing is zero for degree reasons and would
            // let a predicted component pass vacuously.
            if !contracts(x, &psi.tuple, l, k, n, psi.antiholomorphic_degree()) {
                continue;
            }
            let eps = cfg.schedule.eps_list(gauge_scale(gauge, &psi.support, per_axis));
            let ev = component_schedule(
                x,
                &psi.tuple,
                l,
                k,
                &kform,
                gauge,
                &eps,
                PairingMode::Residue,
                per_axis,
                &budget,
                false,
            )?;
            reports.push(ResidueReport::from_evaluation(
                format!("component l={l} k={k} vs {}", psi.name),
                &ev,
                cfg.schedule.tol,
            ));
        }
        let outcome = if reports.is_empty() {
            None
        } else {
            Some(reports.iter().all(|r| cfg.passes(r)))
        };
        if prediction && outcome == Some(false) {
            consistent = false;
        }
        items.push(VanishingItem {
            l,
            k,
            predicted: prediction,
            reports,
            outcome,
        });
    }
    Ok((items, consistent))
}

/// Residue reports for every `(l, k)` component of the assembled current,
/// next to the codimension-based prediction. Only the supplied test forms
/// are used; a predicted component with no contracting form is reported
/// with no outcome rather than silently passing.
pub fn vanishing_report(
    current: &ResidueCurrent,
    codim: &BTreeMap<usize, usize>,
    testforms: &[TestForm],
    cover: &Cover,
    cfg: &PairingConfig,
) -> Result<VanishingReport, HomotopyError> {
    let gauge = current.global_gauge();
    let (items, consistent) = residue_items(
        &current.u,
        |k, l| predicted_vanishing(k, l, codim),
        &gauge,
        testforms,
        cover,
        cfg,
    )?;
    let smooth_literal_zero = current.smooth_part(cover)?.is_none();
    let smooth_defect = current.smooth_defect(cover, 4, 1e-2, 17)?;
    Ok(VanishingReport {
        items,
        smooth_literal_zero,
        smooth_defect,
        consistent,
    })
}

/// Two resolutions, a closed morphism between them, and the assembled
/// pieces of the comparison current: the product seed `w = u_target phi
/// u_source`, its symbolic differential, and (only when a side fails the
/// exactness probe) the smooth corrections.
pub struct ComparisonBundle {
    pub target: ResidueCurrent,
    pub source: ResidueCurrent,
    pub morphism: Morphism,
    pub w: HomCochain,
    pub dw: HomCochain,
    pub gauge: Gauge,
    /// `id - ∇u` on each side; absent when that side probes exact.
    pub target_smooth: Option<HomCochain>,
    pub source_smooth: Option<HomCochain>,
    /// `target_smooth phi u_source - u_target phi source_smooth`; absent
    /// when both sides probe exact.
    pub m_prime: Option<HomCochain>,
    pub d_m_prime: Option<HomCochain>,
}

impl ComparisonBundle {
    pub fn m_prime_literal_zero(&self) -> bool {
        self.m_prime.is_none()
    }
}

pub fn comparison_bundle(
    morphism: &Morphism,
    cover: &Cover,
    seed: u64,
) -> Result<ComparisonBundle, HomotopyError> {
    if !morphism.is_closed(cover)? {
        return Err(HomotopyError::Precondition(
            "comparison morphism is not D-closed".into(),
        ));
    }
    let target = ResidueCurrent::assemble(&morphism.target, cover, seed)?;
    let source = ResidueCurrent::assemble(&morphism.source, cover, seed ^ 0x5bf0_3635)?;
    let gauge = target.global_gauge().product(&source.global_gauge());
    let w = cochain_product(
        &cochain_product(&target.u, &morphism.phi, cover)?,
        &source.u,
        cover,
    )?;
    let dw = d_op(&w, &morphism.target, &morphism.source, cover)?;
    let target_smooth = target.smooth_part(cover)?;
    let source_smooth = source.smooth_part(cover)?;
    let (m_prime, d_m_prime) = if target_smooth.is_none() && source_smooth.is_none() {
        (None, None)
    } else {
        let bf = match &target_smooth {
            Some(b) => b.clone(),
            None => target.smooth_density(cover)?,
        };
        let be = match &source_smooth {
            Some(b) => b.clone(),
            None => source.smooth_density(cover)?,
        };
        let left = cochain_product(&cochain_product(&bf, &morphism.phi, cover)?, &source.u, cover)?;
        let right = cochain_product(&cochain_product(&target.u, &morphism.phi, cover)?, &be, cover)?;
        let m_prime = cochain_sub(&left, &right)?;
        let d_m_prime = d_op(&m_prime, &morphism.target, &morphism.source, cover)?;
        (Some(m_prime), Some(d_m_prime))
    };
    Ok(ComparisonBundle {
        target,
        source,
        morphism: morphism.clone(),
        w,
        dw,
        gauge,
        target_smooth,
        source_smooth,
        m_prime,
        d_m_prime,
    })
}

/// One residual component of a current identity.
#[derive(Debug)]
pub struct PairingResidual {
    pub l: usize,
    pub k: usize,
    pub report: ResidueReport,
}

#[derive(Debug)]
pub struct IdentityReport {
    pub psi: String,
    pub items: Vec<PairingResidual>,
    pub all_pass: bool,
}

#[derive(Debug)]
pub struct ComparisonOutcome {
    pub reports: Vec<IdentityReport>,
    pub m_prime_literal_zero: bool,
    pub all_pass: bool,
}

/// Shared context for assembling one multi-term residual schedule.
struct PairingContext<'a> {
    tuple: &'a TupleKey,
    gauge: &'a Gauge,
    eps: Vec<f64>,
    per_axis: usize,
    budget: QuadBudget,
    psi: KForm,
    dbar_psi: KForm,
    /// `(-1)^p` of the test form's tuple.
    tuple_sign: f64,
}

impl<'a> PairingContext<'a> {
    fn new(psi: &'a TestForm, gauge: &'a Gauge, cover: &Cover, cfg: &PairingConfig) -> Self {
        let per_axis = cfg.grid(cover.nvars);
        let eps = cfg
            .schedule
            .eps_list(gauge_scale(gauge, &psi.support, per_axis));
        let tuple_sign = if psi.tuple.p() % 2 == 1 { -1.0 } else { 1.0 };
        PairingContext {
            tuple: &psi.tuple,
            gauge,
            eps,
            per_axis,
            budget: QuadBudget::default_for(cover.nvars),
            psi: psi.to_kform(),
            dbar_psi: psi.dbar(),
            tuple_sign,
        }
    }

    fn zero(&self) -> PairingEvaluation {
        PairingEvaluation::zero(self.eps.clone())
    }

    fn schedule(
        &self,
        x: &HomCochain,
        l: usize,
        k: usize,
        form: &KForm,
        mode: PairingMode,
        alternate: bool,
    ) -> Result<PairingEvaluation, HomotopyError> {
        Ok(component_schedule(
            x,
            self.tuple,
            l,
            k,
            form,
            self.gauge,
            &self.eps,
            mode,
            self.per_axis,
            &self.budget,
            alternate,
        )?)
    }

    fn add_res(
        &self,
        total: &mut PairingEvaluation,
        x: &HomCochain,
        l: usize,
        k: usize,
        sign: f64,
    ) -> Result<(), HomotopyError> {
        let mut ev = self.schedule(x, l, k, &self.psi, PairingMode::Residue, false)?;
        ev.scale(Complex64::new(sign, 0.0));
        total.add(&ev);
        Ok(())
    }

    fn add_pv(
        &self,
        total: &mut PairingEvaluation,
        x: &HomCochain,
        l: usize,
        k: usize,
        sign: f64,
    ) -> Result<(), HomotopyError> {
        let mut ev = self.schedule(x, l, k, &self.psi, PairingMode::PrincipalValue, false)?;
        ev.scale(Complex64::new(sign, 0.0));
        total.add(&ev);
        Ok(())
    }

    /// `sign * sum_q (-1)^q <x^(q), dbar psi>` in residue mode.
    fn add_res_transfer(
        &self,
        total: &mut PairingEvaluation,
        x: &HomCochain,
        l: usize,
        k: usize,
        sign: f64,
    ) -> Result<(), HomotopyError> {
        let mut ev = self.schedule(x, l, k, &self.dbar_psi, PairingMode::Residue, true)?;
        ev.scale(Complex64::new(sign, 0.0));
        total.add(&ev);
        Ok(())
    }

    /// `sign * sum_q (-1)^q <x^(q), dbar psi>` in principal value.
    fn add_pv_transfer(
        &self,
        total: &mut PairingEvaluation,
        x: &HomCochain,
        l: usize,
        k: usize,
        sign: f64,
    ) -> Result<(), HomotopyError> {
        let mut ev = self.schedule(x, l, k, &self.dbar_psi, PairingMode::PrincipalValue, true)?;
        ev.scale(Complex64::new(sign, 0.0));
        total.add(&ev);
        Ok(())
    }
}

fn union_blocks(xs: &[&HomCochain], tuple: &TupleKey, rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for x in xs {
        out.extend(matching_blocks(x, tuple, rows, cols));
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Evaluates the comparison identity componentwise: the action of the
/// target current through the morphism minus the action of the source
/// current minus the bracket of the comparison current, per `(l, k)` and
/// test form. The `D` of the bracket is symbolic; its `∂̄` is transferred
/// onto the test form.
pub fn comparison_m(
    bundle: &ComparisonBundle,
    testforms: &[TestForm],
    cover: &Cover,
    cfg: &PairingConfig,
) -> Result<ComparisonOutcome, HomotopyError> {
    let u_f_phi = cochain_product(&bundle.target.u, &bundle.morphism.phi, cover)?;
    let phi_u_e = cochain_product(&bundle.morphism.phi, &bundle.source.u, cover)?;
    let bf_phi = match &bundle.target_smooth {
        Some(b) => Some(cochain_product(b, &bundle.morphism.phi, cover)?),
        None => None,
    };
    let phi_be = match &bundle.source_smooth {
        Some(b) => Some(cochain_product(&bundle.morphism.phi, b, cover)?),
        None => None,
    };

    let mut reports = Vec::new();
    let mut all_pass = true;
    for psi in testforms {
        let cell = cover.cell(&psi.tuple)?;
        if !psi.support_inside(&cell.polydisc) {
            return Err(HomotopyError::Current(CurrentError::SupportOutsideDomain));
        }
        let ctx = PairingContext::new(psi, &bundle.gauge, cover, cfg);
        let mut sources: Vec<&HomCochain> = vec![&u_f_phi, &phi_u_e, &bundle.dw, &bundle.w];
        if let Some(x) = &bf_phi {
            sources.push(x);
        }
        if let Some(x) = &phi_be {
            sources.push(x);
        }
        if let Some(x) = &bundle.d_m_prime {
            sources.push(x);
        }
        if let Some(x) = &bundle.m_prime {
            sources.push(x);
        }
        let blocks = union_blocks(&sources, &psi.tuple, ctx.psi.rows, ctx.psi.cols);
        let mut items = Vec::new();
        for (l, k) in blocks {
            let mut total = ctx.zero();
            ctx.add_res(&mut total, &u_f_phi, l, k, 1.0)?;
            ctx.add_res(&mut total, &phi_u_e, l, k, -1.0)?;
            ctx.add_res(&mut total, &bundle.dw, l, k, 1.0)?;
            ctx.add_res_transfer(&mut total, &bundle.w, l, k, ctx.tuple_sign)?;
            if let Some(x) = &bf_phi {
                ctx.add_pv(&mut total, x, l, k, ctx.tuple_sign)?;
            }
            if let Some(x) = &phi_be {
                ctx.add_pv(&mut total, x, l, k, -ctx.tuple_sign)?;
            }
            if let Some(x) = &bundle.d_m_prime {
                ctx.add_pv(&mut total, x, l, k, -ctx.tuple_sign)?;
            }
            if let Some(x) = &bundle.m_prime {
                ctx.add_pv_transfer(&mut total, x, l, k, -1.0)?;
            }
            let report = ResidueReport::from_evaluation(
                format!("comparison l={l} k={k} vs {}", psi.name),
                &total,
                cfg.schedule.tol,
            );
            if !cfg.passes(&report) {
                all_pass = false;
            }
            items.push(PairingResidual { l, k, report });
        }
        let pass = items.iter().all(|i| cfg.passes(&i.report));
        reports.push(IdentityReport {
            psi: psi.name.clone(),
            items,
            all_pass: pass,
        });
    }
    Ok(ComparisonOutcome {
        reports,
        m_prime_literal_zero: bundle.m_prime_literal_zero(),
        all_pass,
    })
}

#[derive(Debug)]
pub struct MVanishingReport {
    pub items: Vec<VanishingItem>,
    pub m_prime_literal_zero: bool,
    pub consistent: bool,
}

/// Residue reports of the comparison current's product seed next to the
/// two-sided codimension predictions.
pub fn m_vanishing_report(
    bundle: &ComparisonBundle,
    codim_source: &BTreeMap<usize, usize>,
    codim_target: &BTreeMap<usize, usize>,
    testforms: &[TestForm],
    cover: &Cover,
    cfg: &PairingConfig,
) -> Result<MVanishingReport, HomotopyError> {
    let (items, consistent) = residue_items(
        &bundle.w,
        |k, l| predicted_product_vanishing(k, l, codim_source, codim_target),
        &bundle.gauge,
        testforms,
        cover,
        cfg,
    )?;
    Ok(MVanishingReport {
        items,
        m_prime_literal_zero: bundle.m_prime_literal_zero(),
        consistent,
    })
}

#[derive(Debug)]
pub struct HomotopyReport {
    pub reports: Vec<IdentityReport>,
    pub all_pass: bool,
}

/// Verifies the homotopy reduction between two resolutions of one module:
/// with `phi: E -> F`, `psi: F -> E` closed and `alpha` witnessing
/// `phi psi - id = D alpha` exactly, the residual of
/// `R_F - phi R_E psi - bracket(w psi - u_F alpha)` pairs to zero.
///
/// All exact-layer preconditions are checked, and both sides must probe
/// generically exact, before any schedule is evaluated.
#[allow(clippy::too_many_arguments)]
pub fn verify_r_homotopy(
    phi: &Morphism,
    psi: &Morphism,
    alpha: &Homotopy,
    testforms: &[TestForm],
    cover: &Cover,
    cfg: &PairingConfig,
    seed: u64,
) -> Result<HomotopyReport, HomotopyError> {
    if phi.source.bundles != psi.target.bundles || phi.target.bundles != psi.source.bundles {
        return Err(HomotopyError::Precondition(
            "phi and psi must run between the same two resolutions".into(),
        ));
    }
    if alpha.target.bundles != phi.target.bundles || alpha.source.bundles != phi.target.bundles {
        return Err(HomotopyError::Precondition(
            "alpha must be an endomorphism homotopy of the target resolution".into(),
        ));
    }
    if !phi.is_closed(cover)? {
        return Err(HomotopyError::Precondition("D phi != 0".into()));
    }
    if !psi.is_closed(cover)? {
        return Err(HomotopyError::Precondition("D psi != 0".into()));
    }
    let composite = cochain_product(&phi.phi, &psi.phi, cover)?;
    let id = HomCochain::identity(&phi.target.bundles, cover.nvars);
    let rhs = cochain_sub(&composite, &id)?;
    let d_alpha = d_op(&alpha.alpha, &phi.target, &phi.target, cover)?;
    if !cochain_sub(&d_alpha, &rhs)?.is_symbolically_zero() {
        return Err(HomotopyError::Precondition(
            "D alpha != phi psi - id".into(),
        ));
    }

    let f_cur = ResidueCurrent::assemble(&phi.target, cover, seed)?;
    let e_cur = ResidueCurrent::assemble(&phi.source, cover, seed ^ 0x5bf0_3635)?;
    if !f_cur.generically_exact() || !e_cur.generically_exact() {
        return Err(HomotopyError::Precondition(
            "homotopy reduction needs both chart complexes generically exact".into(),
        ));
    }
    let gauge = f_cur.global_gauge().product(&e_cur.global_gauge());

    let w = cochain_product(&cochain_product(&f_cur.u, &phi.phi, cover)?, &e_cur.u, cover)?;
    let g = cochain_sub(
        &cochain_product(&w, &psi.phi, cover)?,
        &cochain_product(&f_cur.u, &alpha.alpha, cover)?,
    )?;
    let dg = d_op(&g, &phi.target, &phi.target, cover)?;
    let phi_u_e_psi = cochain_product(
        &cochain_product(&phi.phi, &e_cur.u, cover)?,
        &psi.phi,
        cover,
    )?;

    let mut reports = Vec::new();
    let mut all_pass = true;
    for form in testforms {
        let cell = cover.cell(&form.tuple)?;
        if !form.support_inside(&cell.polydisc) {
            return Err(HomotopyError::Current(CurrentError::SupportOutsideDomain));
        }
        let ctx = PairingContext::new(form, &gauge, cover, cfg);
        let blocks = union_blocks(
            &[&f_cur.u, &phi_u_e_psi, &dg, &g],
            &form.tuple,
            ctx.psi.rows,
            ctx.psi.cols,
        );
        let mut items = Vec::new();
        for (l, k) in blocks {
            let mut total = ctx.zero();
            ctx.add_res(&mut total, &f_cur.u, l, k, 1.0)?;
            ctx.add_res(&mut total, &phi_u_e_psi, l, k, -1.0)?;
            ctx.add_res(&mut total, &dg, l, k, 1.0)?;
            ctx.add_res_transfer(&mut total, &g, l, k, ctx.tuple_sign)?;
            let report = ResidueReport::from_evaluation(
                format!("homotopy l={l} k={k} vs {}", form.name),
                &total,
                cfg.schedule.tol,
            );
            if !cfg.passes(&report) {
                all_pass = false;
            }
            items.push(PairingResidual { l, k, report });
        }
        let pass = items.iter().all(|i| cfg.passes(&i.report));
        reports.push(IdentityReport {
            psi: form.name.clone(),
            items,
            all_pass: pass,
        });
    }
    Ok(HomotopyReport { reports, all_pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cochain::{DegreeLabel, Entry, GradedBundleFamily};
    use crate::fixtures::{bump_form, koszul_twisting, monomial_gen, overlap_cover, poly_bump_form};
    use crate::polyalg::{GaussianRational, PolyMatrix, Polynomial};
    use crate::twist::{validate_twisting, TwistingCochain};

    fn section(cover: &Cover, target: &TwistingCochain, f: Polynomial) -> HomCochain {
        let unit = GradedBundleFamily::unit(cover.charts.len());
        let mut phi = HomCochain::zero(unit, target.bundles.clone(), 0);
        let mut m = PolyMatrix::zero(1, 1, cover.nvars);
        *m.entry_mut(0, 0) = f;
        for alpha in 0..cover.charts.len() {
            phi.add_entry(
                TupleKey(vec![alpha]),
                DegreeLabel { q: 0, l: 0, k: 0 },
                Entry::Poly(m.clone()),
            )
            .unwrap();
        }
        phi
    }

    fn z_coeff_form(name: &str, rows: usize, cols: usize) -> TestForm {
        let mut coeff = PolyMatrix::zero(rows, cols, 2);
        for i in 0..rows {
            for j in 0..cols {
                *coeff.entry_mut(i, j) = Polynomial::monomial(2, &[1, 0], GaussianRational::one());
            }
        }
        poly_bump_form(name, TupleKey(vec![0]), 1, vec![], coeff, 0.8)
    }

    #[test]
    fn duality_member_with_witness_is_consistent() {
        let cover = overlap_cover(1, 1, 2);
        let t = koszul_twisting(&cover, &[monomial_gen(1, &[2])]).unwrap();
        let cur = ResidueCurrent::assemble(&t, &cover, 7).unwrap();
        let phi = section(&cover, &t, monomial_gen(1, &[2]));
        // The witness maps the unit generator to the level-one generator.
        let unit = GradedBundleFamily::unit(1);
        let mut w = HomCochain::zero(unit, t.bundles.clone(), -1);
        w.add_entry(
            TupleKey(vec![0]),
            DegreeLabel { q: 0, l: 0, k: 1 },
            Entry::Poly(PolyMatrix::identity(1, 1)),
        )
        .unwrap();
        let forms = [z_coeff_form("z bump", 1, 1)];
        let cfg = PairingConfig::default();
        let verdict = check_duality(
            &cur,
            &phi,
            "z^2",
            Some(&w),
            MembershipClaim::Member,
            true,
            &forms,
            &cover,
            &cfg,
        )
        .unwrap();
        assert!(verdict.phi_closed);
        assert_eq!(verdict.witness_closed, Some(true));
        assert!(verdict.consistent, "{}", verdict.summary());
        assert_eq!(verdict.conclusion, MembershipClaim::Member);
    }

    #[test]
    fn duality_nonmember_stays_nonzero() {
        let cover = overlap_cover(1, 1, 2);
        let t = koszul_twisting(&cover, &[monomial_gen(1, &[2])]).unwrap();
        let cur = ResidueCurrent::assemble(&t, &cover, 7).unwrap();
        let phi = section(&cover, &t, monomial_gen(1, &[0]));
        let forms = [z_coeff_form("z bump", 1, 1)];
        let cfg = PairingConfig::default();
        let verdict = check_duality(
            &cur,
            &phi,
            "1",
            None,
            MembershipClaim::NonMember,
            false,
            &forms,
            &cover,
            &cfg,
        )
        .unwrap();
        assert!(verdict.consistent);
        assert_eq!(verdict.summary(), "nonmember, R\u{3c6} \u{2260} 0");
    }

    #[test]
    fn duality_zero_section_is_trivially_consistent() {
        let cover = overlap_cover(1, 1, 2);
        let t = koszul_twisting(&cover, &[monomial_gen(1, &[2])]).unwrap();
        let cur = ResidueCurrent::assemble(&t, &cover, 7).unwrap();
        let phi = HomCochain::zero(GradedBundleFamily::unit(1), t.bundles.clone(), 0);
        let forms = [z_coeff_form("z bump", 1, 1)];
        let cfg = PairingConfig::default();
        let verdict = check_duality(
            &cur,
            &phi,
            "0",
            None,
            MembershipClaim::Member,
            true,
            &forms,
            &cover,
            &cfg,
        )
        .unwrap();
        assert!(verdict.phi_closed);
        assert!(verdict.all_zero);
        assert!(verdict.consistent);
    }

    #[test]
    fn duality_rejects_a_broken_witness() {
        let cover = overlap_cover(1, 1, 2);
        let t = koszul_twisting(&cover, &[monomial_gen(1, &[2])]).unwrap();
        let cur = ResidueCurrent::assemble(&t, &cover, 7).unwrap();
        let phi = section(&cover, &t, monomial_gen(1, &[2]));
        let unit = GradedBundleFamily::unit(1);
        let mut w = HomCochain::zero(unit, t.bundles.clone(), -1);
        let mut bad = PolyMatrix::zero(1, 1, 1);
        *bad.entry_mut(0, 0) = monomial_gen(1, &[1]);
        w.add_entry(
            TupleKey(vec![0]),
            DegreeLabel { q: 0, l: 0, k: 1 },
            Entry::Poly(bad),
        )
        .unwrap();
        let cfg = PairingConfig::default();
        let verdict = check_duality(
            &cur,
            &phi,
            "z^2",
            Some(&w),
            MembershipClaim::Member,
            true,
            &[],
            &cover,
            &cfg,
        )
        .unwrap();
        assert_eq!(verdict.witness_closed, Some(false));
        assert!(!verdict.consistent);
    }

    #[test]
    fn vanishing_predicates_match_hand_tables() {
        // Point in the plane, both levels codimension two.
        let full: BTreeMap<usize, usize> = [(1, 2), (2, 2)].into();
        assert!(predicted_vanishing(1, 0, &full));
        assert!(predicted_vanishing(2, 1, &full));
        assert!(!predicted_vanishing(2, 0, &full));
        // Hypersurface in the line: nothing is predicted.
        let thin: BTreeMap<usize, usize> = [(1, 1)].into();
        assert!(!predicted_vanishing(1, 0, &thin));
        // Missing data predicts nothing.
        assert!(!predicted_vanishing(1, 0, &BTreeMap::new()));

        // Two-sided predicate needs k - l >= 2 and both chains of bounds.
        assert!(predicted_product_vanishing(2, 0, &full, &full));
        assert!(!predicted_product_vanishing(1, 0, &full, &full));
        assert!(!predicted_product_vanishing(2, 0, &thin, &full));
    }

    #[test]
    fn vanishing_report_lists_unpredicted_nonzero_component() {
        let cover = overlap_cover(1, 1, 2);
        let t = koszul_twisting(&cover, &[monomial_gen(1, &[2])]).unwrap();
        let cur = ResidueCurrent::assemble(&t, &cover, 7).unwrap();
        let codim: BTreeMap<usize, usize> = [(1, 1)].into();
        let forms = [z_coeff_form("z bump", 1, 1)];
        let cfg = PairingConfig::default();
        let report = vanishing_report(&cur, &codim, &forms, &cover, &cfg).unwrap();
        assert!(report.smooth_literal_zero);
        assert!(report.smooth_defect < 1e-3, "defect {}", report.smooth_defect);
        assert!(report.consistent);
        let item = report
            .items
            .iter()
            .find(|i| (i.l, i.k) == (0, 1))
            .expect("component (0,1)");
        assert!(!item.predicted);
        assert_eq!(item.outcome, Some(false));
        assert!(item.reports[0].stays_nonzero(cfg.tol_abs, 10.0));
    }

    #[test]
    fn comparison_of_a_resolution_with_itself_is_literally_zero() {
        let cover = overlap_cover(1, 1, 2);
        let t = koszul_twisting(&cover, &[monomial_gen(1, &[2])]).unwrap();
        let phi = Morphism {
            source: t.clone(),
            target: t.clone(),
            phi: HomCochain::identity(&t.bundles, 1),
        };
        let bundle = comparison_bundle(&phi, &cover, 3).unwrap();
        assert!(bundle.m_prime_literal_zero());
        assert!(bundle.w.is_symbolically_zero());
        let forms = [z_coeff_form("z bump", 1, 1)];
        let cfg = PairingConfig::default();
        let out = comparison_m(&bundle, &forms, &cover, &cfg).unwrap();
        assert!(out.all_pass);
        for report in &out.reports {
            for item in &report.items {
                assert!(item.report.value_scale() < 1e-10);
            }
        }
    }

    /// Target whose differential `[z, 0]` has a generic kernel, so its chart
    /// complex is not exact and the comparison identity only closes through
    /// the smooth corrections. The surviving terms are order one before
    /// cancellation, which pins the relative signs of the principal-value
    /// realizations and both transfers.
    #[test]
    fn comparison_smooth_corrections_cancel_on_a_nonexact_target() {
        let cover = overlap_cover(1, 1, 2);
        let e = koszul_twisting(&cover, &[monomial_gen(1, &[2])]).unwrap();
        let bundles = GradedBundleFamily::uniform(1, vec![1, 2]);
        let mut a = HomCochain::zero(bundles.clone(), bundles.clone(), 1);
        let mut a0 = PolyMatrix::zero(1, 2, 1);
        *a0.entry_mut(0, 0) = monomial_gen(1, &[1]);
        a.add_entry(
            TupleKey(vec![0]),
            DegreeLabel { q: 0, l: 1, k: 0 },
            Entry::Poly(a0),
        )
        .unwrap();
        for (j, rank) in [(0usize, 1usize), (1, 2)] {
            a.add_entry(
                TupleKey(vec![0, 0]),
                DegreeLabel { q: 0, l: j, k: j },
                Entry::Poly(PolyMatrix::identity(rank, 1)),
            )
            .unwrap();
        }
        let f = TwistingCochain::new(bundles, 1, a).unwrap();
        assert!(validate_twisting(&f, &cover).unwrap().passes);
        // Chain map: [z, 0] [z; 1] = z^2, with image meeting the kernel of
        // the target differential so the corrections do not collapse.
        let mut phi0 = HomCochain::zero(e.bundles.clone(), f.bundles.clone(), 0);
        phi0.add_entry(
            TupleKey(vec![0]),
            DegreeLabel { q: 0, l: 0, k: 0 },
            Entry::Poly(PolyMatrix::identity(1, 1)),
        )
        .unwrap();
        let mut phi1 = PolyMatrix::zero(2, 1, 1);
        *phi1.entry_mut(0, 0) = monomial_gen(1, &[1]);
        *phi1.entry_mut(1, 0) = monomial_gen(1, &[0]);
        phi0.add_entry(
            TupleKey(vec![0]),
            DegreeLabel { q: 0, l: 1, k: 1 },
            Entry::Poly(phi1),
        )
        .unwrap();
        let phi = Morphism {
            source: e,
            target: f,
            phi: phi0,
        };
        let bundle = comparison_bundle(&phi, &cover, 3).unwrap();
        assert!(!bundle.target.generically_exact());
        assert!(bundle.source.generically_exact());
        assert!(!bundle.m_prime_literal_zero());
        let forms = [
            z_coeff_form("z bump", 2, 1),
            bump_form("flat", TupleKey(vec![0]), 1, vec![], 2, 1, 0.7),
        ];
        let cfg = PairingConfig::default();
        let out = comparison_m(&bundle, &forms, &cover, &cfg).unwrap();
        for report in &out.reports {
            for item in &report.items {
                assert!(
                    cfg.passes(&item.report),
                    "component ({}, {}) vs {}: {:?}",
                    item.l,
                    item.k,
                    report.psi,
                    item.report.values
                );
            }
        }
        assert!(out.all_pass);
    }

    #[test]
    fn homotopy_of_identity_maps_is_trivial() {
        let cover = overlap_cover(1, 1, 2);
        let t = koszul_twisting(&cover, &[monomial_gen(1, &[2])]).unwrap();
        let id = Morphism {
            source: t.clone(),
            target: t.clone(),
            phi: HomCochain::identity(&t.bundles, 1),
        };
        let alpha = Homotopy {
            source: t.clone(),
            target: t.clone(),
            alpha: HomCochain::zero(t.bundles.clone(), t.bundles.clone(), -1),
        };
        let forms = [z_coeff_form("z bump", 1, 1)];
        let cfg = PairingConfig::default();
        let report = verify_r_homotopy(&id, &id, &alpha, &forms, &cover, &cfg, 5).unwrap();
        assert!(report.all_pass);
        for r in &report.reports {
            for item in &r.items {
                assert!(item.report.value_scale() < 1e-10);
            }
        }
    }

    #[test]
    fn corrupted_homotopy_witness_is_rejected_before_numerics() {
        let cover = overlap_cover(1, 1, 2);
        let t = koszul_twisting(&cover, &[monomial_gen(1, &[2])]).unwrap();
        let id = Morphism {
            source: t.clone(),
            target: t.clone(),
            phi: HomCochain::identity(&t.bundles, 1),
        };
        let mut bad = HomCochain::zero(t.bundles.clone(), t.bundles.clone(), -1);
        bad.add_entry(
            TupleKey(vec![0]),
            DegreeLabel { q: 0, l: 0, k: 1 },
            Entry::Poly(PolyMatrix::identity(1, 1)),
        )
        .unwrap();
        let alpha = Homotopy {
            source: t.clone(),
            target: t.clone(),
            alpha: bad,
        };
        let err = verify_r_homotopy(&id, &id, &alpha, &[], &cover, &PairingConfig::default(), 5)
            .unwrap_err();
        match err {
            HomotopyError::Precondition(msg) => assert!(msg.contains("alpha")),
            other => panic!("expected precondition error, got {other}"),
        }
    }

    /// The assembled current is bracket-closed: applying the symbolic `D`
    /// to `u` and pairing in residue mode vanishes componentwise once the
    /// transfer term is added (absent in one variable for degree reasons).
    #[test]
    fn bracket_closedness_probe_on_an_exact_chart() {
        let cover = overlap_cover(1, 1, 2);
        let t = koszul_twisting(&cover, &[monomial_gen(1, &[2])]).unwrap();
        let cur = ResidueCurrent::assemble(&t, &cover, 7).unwrap();
        let du = d_op(&cur.u, &t, &t, &cover).unwrap();
        let gauge = cur.global_gauge();
        let cfg = PairingConfig::default();
        let psi = z_coeff_form("z bump", 1, 1);
        let ctx = PairingContext::new(&psi, &gauge, &cover, &cfg);
        for (l, k) in union_blocks(&[&du, &cur.u], &psi.tuple, 1, 1) {
            let mut total = ctx.zero();
            ctx.add_res(&mut total, &du, l, k, 1.0).unwrap();
            ctx.add_res_transfer(&mut total, &cur.u, l, k, ctx.tuple_sign)
                .unwrap();
            let report = ResidueReport::from_evaluation(
                format!("bracket l={l} k={k}"),
                &total,
                cfg.schedule.tol,
            );
            assert!(cfg.passes(&report), "({l},{k}): {:?}", report.values);
        }
    }
}
