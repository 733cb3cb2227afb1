//! Command dispatcher: reads a JSON problem file, runs one check, prints a
//! JSON report on standard output.
//!
//! Exit codes are part of the interface: 0 ok, 2 schema error, 3 validation
//! failure, 4 lift failure, 5 schedule did not converge (report still
//! emitted). `TWISTCUR_THREADS` caps the worker pool.

use std::io::Read;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num::complex::Complex64;
use serde_json::{json, Value};

use twistcur::cochain::{Cover, DegreeLabel, Entry, GradedBundleFamily, HomCochain, TupleKey};
use twistcur::current::{
    residue_action, PairingConfig, RegularizationSchedule, ResidueActionReport, ResidueCurrent,
    ResidueReport,
};
use twistcur::homotopy::{
    check_duality, comparison_bundle, comparison_m, m_vanishing_report, vanishing_report,
    verify_r_homotopy, HomotopyError, IdentityReport, MembershipClaim, VanishingItem,
};
use twistcur::polyalg::{PolyMatrix, Polynomial};
use twistcur::problem::{
    entries_to_specs, generate_fixture, parse_monomial, resolve, ClaimSpec, FixtureKind,
    ModeSpec, ProblemError, ProblemFile, Resolved,
};
use twistcur::twist::{
    cech_component, complete_twisting, extend_morphism, validate_twisting, Morphism, TwistError,
    TwistingCochain,
};

#[derive(Parser)]
#[command(name = "twistcur", version, about = "Twisted resolutions and residue currents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the twisting equation with literal-zero residuals.
    Validate(ProblemArgs),
    /// Complete per-chart differentials and gluings to a full twisting.
    CompleteTwisting(ProblemArgs),
    /// Extend per-chart chain maps to a closed morphism.
    ExtendMorphism(ProblemArgs),
    /// Pair the residue current of a twisting against test forms.
    EvalResidue(ProblemArgs),
    /// Membership verdict: residue annihilation against a claim.
    CheckDuality(ProblemArgs),
    /// Residual of the comparison identity between two resolutions.
    CheckComparison(ProblemArgs),
    /// Residual of the resolution-independence homotopy identity.
    CheckHomotopy(ProblemArgs),
    /// Emit a ready-to-run problem file for a bundled generator.
    GenFixture(GenArgs),
}

#[derive(Args)]
struct ProblemArgs {
    /// Problem file path; "-" reads standard input.
    file: String,
    /// Schedule override, e.g. "eps0=0.1,ratio=0.25,steps=8,tol=0.01".
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    tol_abs: Option<f64>,
    #[arg(long)]
    tol_rel: Option<f64>,
    /// Polynomial degree cap for the lifting solvers.
    #[arg(long)]
    degree_bound: Option<usize>,
    /// Quadrature points per axis.
    #[arg(long)]
    grid: Option<usize>,
    /// Restrict eval-residue to one regularization mode.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Cochain or morphism name, or an inline monomial like "z1^2".
    #[arg(long)]
    phi: Option<String>,
    /// Test form names; repeatable, overrides the file's list.
    #[arg(long)]
    testform: Vec<String>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Generators for the koszul kind, e.g. "z1^2,z2".
    #[arg(long, value_delimiter = ',')]
    gens: Vec<String>,
    #[arg(long, default_value_t = 1)]
    charts: usize,
    #[arg(long, default_value_t = 2)]
    max_len: usize,
    #[arg(long)]
    degree_bound: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Residue,
    Pv,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Koszul,
    QuotientPair,
    TwoChartGlue,
    SyntheticTwist,
}

const EXIT_SCHEMA: u8 = 2;
const EXIT_VALIDATION: u8 = 3;
const EXIT_LIFT: u8 = 4;
const EXIT_NONCONVERGENT: u8 = 5;

enum CmdError {
    Schema(String),
    Validation(String),
    Lift(String),
}

impl CmdError {
    fn code(&self) -> u8 {
        match self {
            CmdError::Schema(_) => EXIT_SCHEMA,
            CmdError::Validation(_) => EXIT_VALIDATION,
            CmdError::Lift(_) => EXIT_LIFT,
        }
    }

    fn message(&self) -> &str {
        match self {
            CmdError::Schema(m) | CmdError::Validation(m) | CmdError::Lift(m) => m,
        }
    }
}

impl From<ProblemError> for CmdError {
    fn from(e: ProblemError) -> Self {
        CmdError::Schema(e.to_string())
    }
}

impl From<TwistError> for CmdError {
    fn from(e: TwistError) -> Self {
        match e {
            TwistError::NoLift { .. } => CmdError::Lift(e.to_string()),
            other => CmdError::Validation(other.to_string()),
        }
    }
}

impl From<twistcur::current::CurrentError> for CmdError {
    fn from(e: twistcur::current::CurrentError) -> Self {
        match e {
            twistcur::current::CurrentError::Twist(inner) => CmdError::from(*inner),
            other => CmdError::Validation(other.to_string()),
        }
    }
}

impl From<HomotopyError> for CmdError {
    fn from(e: HomotopyError) -> Self {
        match e {
            HomotopyError::Current(inner) => CmdError::from(inner),
            other => CmdError::Validation(other.to_string()),
        }
    }
}

impl From<twistcur::cochain::CochainError> for CmdError {
    fn from(e: twistcur::cochain::CochainError) -> Self {
        CmdError::Validation(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(s) = std::env::var("TWISTCUR_THREADS") {
        if let Ok(n) = s.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
    let outcome = match &cli.command {
        Command::Validate(a) => with_problem(a, cmd_validate),
        Command::CompleteTwisting(a) => with_problem(a, cmd_complete),
        Command::ExtendMorphism(a) => with_problem(a, cmd_extend),
        Command::EvalResidue(a) => with_problem(a, cmd_eval_residue),
        Command::CheckDuality(a) => with_problem(a, cmd_duality),
        Command::CheckComparison(a) => with_problem(a, cmd_comparison),
        Command::CheckHomotopy(a) => with_problem(a, cmd_homotopy),
        Command::GenFixture(a) => cmd_gen_fixture(a),
    };
    match outcome {
        Ok((report, code)) => {
            println!("{}", serde_json::to_string_pretty(&report).expect("report"));
            ExitCode::from(code)
        }
        Err(e) => {
            let report = json!({ "error": e.message() });
            println!("{}", serde_json::to_string_pretty(&report).expect("report"));
            ExitCode::from(e.code())
        }
    }
}

fn with_problem(
    args: &ProblemArgs,
    run: fn(&ProblemArgs, &ProblemFile, &Resolved) -> Result<(Value, u8), CmdError>,
) -> Result<(Value, u8), CmdError> {
    let text = if args.file == "-" {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .map_err(|e| CmdError::Schema(format!("cannot read standard input: {e}")))?;
        buf
    } else {
        std::fs::read_to_string(&args.file)
            .map_err(|e| CmdError::Schema(format!("cannot read '{}': {e}", args.file)))?
    };
    let file = ProblemFile::parse(&text)?;
    let resolved = resolve(&file)?;
    run(args, &file, &resolved)
}

/// Pairing configuration: file-level schedule first, then flag overrides.
fn pairing_config(args: &ProblemArgs, r: &Resolved) -> Result<PairingConfig, CmdError> {
    let mut schedule = r.schedule()?;
    if let Some(spec) = &args.schedule {
        apply_schedule_string(&mut schedule, spec)?;
    }
    let mut cfg = PairingConfig {
        schedule,
        ..PairingConfig::default()
    };
    if let Some(t) = args.tol_abs.or(r.params.tol_abs) {
        cfg.tol_abs = t;
    }
    if let Some(t) = args.tol_rel.or(r.params.tol_rel) {
        cfg.tol_rel = t;
    }
    if let Some(g) = args.grid.or(r.params.grid) {
        cfg.per_axis = Some(g.max(2));
    }
    Ok(cfg)
}

fn apply_schedule_string(
    s: &mut RegularizationSchedule,
    spec: &str,
) -> Result<(), CmdError> {
    for part in spec.split(',').filter(|p| !p.trim().is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| CmdError::Schema(format!("schedule flag: bad item '{part}'")))?;
        let bad = || CmdError::Schema(format!("schedule flag: bad value in '{part}'"));
        match key.trim() {
            "eps0" => s.eps0 = Some(value.trim().parse().map_err(|_| bad())?),
            "ratio" => s.ratio = value.trim().parse().map_err(|_| bad())?,
            "steps" => s.steps = value.trim().parse().map_err(|_| bad())?,
            "tol" => s.tol = value.trim().parse().map_err(|_| bad())?,
            other => {
                return Err(CmdError::Schema(format!(
                    "schedule flag: unknown key '{other}'"
                )))
            }
        }
    }
    if !(s.ratio > 0.0 && s.ratio < 1.0) || s.steps == 0 {
        return Err(CmdError::Schema(
            "schedule flag: need 0 < ratio < 1 and steps > 0".into(),
        ));
    }
    Ok(())
}

fn named_twisting<'r>(r: &'r Resolved) -> Result<(&'r str, &'r TwistingCochain), CmdError> {
    let name = r
        .params
        .twisting
        .as_deref()
        .ok_or_else(|| CmdError::Schema("params.twisting is required".into()))?;
    Ok((name, r.twisting(name)?))
}

fn testforms(args: &ProblemArgs, r: &Resolved) -> Result<Vec<twistcur::current::TestForm>, CmdError> {
    let names: Vec<String> = if args.testform.is_empty() {
        r.params.testforms.clone()
    } else {
        args.testform.clone()
    };
    if names.is_empty() {
        return Err(CmdError::Schema("no test forms named".into()));
    }
    names
        .iter()
        .map(|n| {
            r.testforms
                .get(n)
                .cloned()
                .ok_or_else(|| CmdError::Schema(format!("unknown test form '{n}'")))
        })
        .collect()
}

/// A named cochain, or an inline monomial turned into the constant section
/// of the resolution's degree-zero bundle.
fn resolve_phi(
    args: &ProblemArgs,
    r: &Resolved,
    t: &TwistingCochain,
    cover: &Cover,
) -> Result<(String, HomCochain), CmdError> {
    let spec = args
        .phi
        .clone()
        .or_else(|| r.params.phi.clone())
        .unwrap_or_else(|| "1".into());
    if let Some(x) = r.cochains.get(&spec) {
        return Ok((spec, x.clone()));
    }
    let poly = parse_monomial(&spec, cover.nvars)?;
    Ok((spec.clone(), scalar_section(t, cover, &poly)?))
}

fn scalar_section(
    t: &TwistingCochain,
    cover: &Cover,
    p: &Polynomial,
) -> Result<HomCochain, CmdError> {
    let n_charts = cover.charts.len();
    if t.bundles.rank(0, 0) != 1 {
        return Err(CmdError::Schema(
            "inline phi needs a rank-one degree-zero bundle".into(),
        ));
    }
    let mut x = HomCochain::zero(GradedBundleFamily::unit(n_charts), t.bundles.clone(), 0);
    for chart in 0..n_charts {
        x.add_entry(
            TupleKey(vec![chart]),
            DegreeLabel { q: 0, l: 0, k: 0 },
            Entry::Poly(PolyMatrix::from_fn(1, 1, cover.nvars, |_, _| p.clone())),
        )?;
    }
    Ok(x)
}

fn seed(r: &Resolved) -> u64 {
    r.params.seed.unwrap_or(7)
}

fn degree_bound(args: &ProblemArgs, r: &Resolved) -> Option<usize> {
    args.degree_bound.or(r.params.degree_bound)
}

fn c64(v: Complex64) -> Value {
    json!([v.re, v.im])
}

fn report_json(rep: &ResidueReport) -> Value {
    json!({
        "label": rep.label,
        "eps": rep.eps,
        "values": rep.values.iter().map(|v| c64(*v)).collect::<Vec<_>>(),
        "extrapolated": c64(rep.extrapolated),
        "successive_difference": rep.successive_difference,
        "grid_error": rep.grid_error,
        "tolerance": rep.tolerance,
        "converged": rep.converged,
        "budget_hit": rep.budget_hit,
    })
}

fn action_json(a: &ResidueActionReport, mode: Option<ModeSpec>) -> (Value, bool) {
    let comps = |list: &[twistcur::current::ComponentReport]| {
        list.iter()
            .map(|c| json!({"l": c.l, "k": c.k, "report": report_json(&c.report)}))
            .collect::<Vec<_>>()
    };
    let mut converged = true;
    let mut body = serde_json::Map::new();
    body.insert("generically_exact".into(), json!(a.generically_exact));
    if mode != Some(ModeSpec::Pv) {
        converged &= a.components.iter().all(|c| c.report.converged);
        body.insert("residue_components".into(), json!(comps(&a.components)));
    }
    if mode != Some(ModeSpec::Residue) {
        converged &= a.smooth_components.iter().all(|c| c.report.converged);
        body.insert(
            "principal_value_components".into(),
            json!(comps(&a.smooth_components)),
        );
    }
    if mode.is_none() {
        converged &= a.total.converged;
        body.insert("total".into(), report_json(&a.total));
    }
    (Value::Object(body), converged)
}

fn identity_json(reports: &[IdentityReport]) -> (Value, bool, bool) {
    let mut converged = true;
    let mut all_pass = true;
    let list = reports
        .iter()
        .map(|r| {
            all_pass &= r.all_pass;
            json!({
                "testform": r.psi,
                "all_pass": r.all_pass,
                "components": r.items.iter().map(|it| {
                    converged &= it.report.converged;
                    json!({"l": it.l, "k": it.k, "report": report_json(&it.report)})
                }).collect::<Vec<_>>(),
            })
        })
        .collect::<Vec<_>>();
    (json!(list), converged, all_pass)
}

fn vanishing_json(items: &[VanishingItem]) -> Value {
    json!(items
        .iter()
        .map(|it| json!({
            "l": it.l,
            "k": it.k,
            "predicted_zero": it.predicted,
            "observed_zero": it.outcome,
            "reports": it.reports.iter().map(report_json).collect::<Vec<_>>(),
        }))
        .collect::<Vec<_>>())
}

fn mode_spec(args: &ProblemArgs, r: &Resolved) -> Option<ModeSpec> {
    match args.mode {
        Some(ModeArg::Residue) => Some(ModeSpec::Residue),
        Some(ModeArg::Pv) => Some(ModeSpec::Pv),
        None => r.params.mode,
    }
}

fn cmd_validate(
    _args: &ProblemArgs,
    _file: &ProblemFile,
    r: &Resolved,
) -> Result<(Value, u8), CmdError> {
    let names: Vec<&str> = match &r.params.twisting {
        Some(n) => vec![n.as_str()],
        None => r.twistings.keys().map(|s| s.as_str()).collect(),
    };
    if names.is_empty() {
        return Err(CmdError::Schema("no twistings to validate".into()));
    }
    let mut all_pass = true;
    let mut out = Vec::new();
    for name in names {
        let report = validate_twisting(r.twisting(name)?, &r.cover)?;
        all_pass &= report.passes;
        out.push(json!({
            "twisting": name,
            "passes": report.passes,
            "residuals": report.residuals.iter().map(|it| json!({
                "level": it.k,
                "tuple": it.tuple,
                "magnitude": it.magnitude,
            })).collect::<Vec<_>>(),
            "diagonal_defects": report.diagonal_defects,
        }));
    }
    let code = if all_pass { 0 } else { EXIT_VALIDATION };
    Ok((json!({"command": "validate", "passes": all_pass, "twistings": out}), code))
}

fn cmd_complete(
    args: &ProblemArgs,
    _file: &ProblemFile,
    r: &Resolved,
) -> Result<(Value, u8), CmdError> {
    let (name, t) = named_twisting(r)?;
    let a0 = cech_component(&t.a, 0);
    let a1 = cech_component(&t.a, 1);
    let completed = complete_twisting(&t.bundles, &a0, &a1, &r.cover, degree_bound(args, r))?;
    let report = validate_twisting(&completed, &r.cover)?;
    let entries = entries_to_specs(&completed.a)?;
    Ok((
        json!({
            "command": "complete-twisting",
            "twisting": name,
            "passes": report.passes,
            "entries": serde_json::to_value(entries).map_err(ProblemError::from)?,
        }),
        if report.passes { 0 } else { EXIT_VALIDATION },
    ))
}

fn cmd_extend(
    args: &ProblemArgs,
    _file: &ProblemFile,
    r: &Resolved,
) -> Result<(Value, u8), CmdError> {
    let source = r.twisting(
        r.params
            .source
            .as_deref()
            .ok_or_else(|| CmdError::Schema("params.source is required".into()))?,
    )?;
    let target = r.twisting(
        r.params
            .target
            .as_deref()
            .ok_or_else(|| CmdError::Schema("params.target is required".into()))?,
    )?;
    let phi_name = args
        .phi
        .clone()
        .or_else(|| r.params.phi.clone())
        .ok_or_else(|| CmdError::Schema("phi (chart maps) is required".into()))?;
    let phi0 = r.cochain(&phi_name)?;
    let morphism = extend_morphism(phi0, source, target, &r.cover, degree_bound(args, r))?;
    let entries = entries_to_specs(&morphism.phi)?;
    Ok((
        json!({
            "command": "extend-morphism",
            "phi": phi_name,
            "closed": true,
            "entries": serde_json::to_value(entries).map_err(ProblemError::from)?,
        }),
        0,
    ))
}

fn cmd_eval_residue(
    args: &ProblemArgs,
    _file: &ProblemFile,
    r: &Resolved,
) -> Result<(Value, u8), CmdError> {
    let (name, t) = named_twisting(r)?;
    let cfg = pairing_config(args, r)?;
    let forms = testforms(args, r)?;
    let mode = mode_spec(args, r);
    let current = ResidueCurrent::assemble(t, &r.cover, seed(r))?;
    let (phi_label, phi) = resolve_phi(args, r, t, &r.cover)?;
    let mut converged = true;
    let mut out = Vec::new();
    for psi in &forms {
        let action = residue_action(&current, &phi, psi, &r.cover, &cfg)?;
        let (body, ok) = action_json(&action, mode);
        converged &= ok;
        out.push(json!({"testform": psi.name, "action": body}));
    }
    let mut body = serde_json::Map::new();
    body.insert("command".into(), json!("eval-residue"));
    body.insert("twisting".into(), json!(name));
    body.insert("phi".into(), json!(phi_label));
    body.insert(
        "generically_exact".into(),
        json!(current.generically_exact()),
    );
    body.insert("pairings".into(), json!(out));
    // With a codim table for this twisting, also grade the components of the
    // bare current against the degree-based vanishing predictions.
    if let Some(codim) = r.codim.get(name) {
        let rep = vanishing_report(&current, codim, &forms, &r.cover, &cfg)?;
        converged &= rep
            .items
            .iter()
            .all(|it| it.reports.iter().all(|x| x.converged));
        body.insert(
            "vanishing".into(),
            json!({
                "consistent": rep.consistent,
                "smooth_literal_zero": rep.smooth_literal_zero,
                "smooth_defect": rep.smooth_defect,
                "items": vanishing_json(&rep.items),
            }),
        );
    }
    Ok((
        Value::Object(body),
        if converged { 0 } else { EXIT_NONCONVERGENT },
    ))
}

fn cmd_duality(
    args: &ProblemArgs,
    _file: &ProblemFile,
    r: &Resolved,
) -> Result<(Value, u8), CmdError> {
    let (name, t) = named_twisting(r)?;
    let cfg = pairing_config(args, r)?;
    let forms = testforms(args, r)?;
    let current = ResidueCurrent::assemble(t, &r.cover, seed(r))?;
    let (phi_label, phi) = resolve_phi(args, r, t, &r.cover)?;
    let witness = match &r.params.witness {
        None => None,
        Some(n) => Some(r.cochain(n)?),
    };
    let claim = match r.params.claim {
        Some(ClaimSpec::Member) => MembershipClaim::Member,
        Some(ClaimSpec::Nonmember) => MembershipClaim::NonMember,
        Some(ClaimSpec::Unstated) | None => MembershipClaim::Unstated,
    };
    let verdict = check_duality(
        &current,
        &phi,
        &phi_label,
        witness,
        claim,
        r.params.low_degree_vanishing_asserted,
        &forms,
        &r.cover,
        &cfg,
    )?;
    let mut converged = true;
    let actions = verdict
        .actions
        .iter()
        .map(|a| {
            let (body, ok) = action_json(a, None);
            converged &= ok;
            body
        })
        .collect::<Vec<_>>();
    let code = if !converged {
        EXIT_NONCONVERGENT
    } else if !verdict.consistent {
        EXIT_VALIDATION
    } else {
        0
    };
    Ok((
        json!({
            "command": "check-duality",
            "twisting": name,
            "phi": verdict.phi_label,
            "verdict": verdict.summary(),
            "phi_closed": verdict.phi_closed,
            "witness_closed": verdict.witness_closed,
            "generically_exact": verdict.generically_exact,
            "all_zero": verdict.all_zero,
            "any_nonzero": verdict.any_nonzero,
            "consistent": verdict.consistent,
            "actions": actions,
        }),
        code,
    ))
}

fn cmd_comparison(
    args: &ProblemArgs,
    file: &ProblemFile,
    r: &Resolved,
) -> Result<(Value, u8), CmdError> {
    let phi_name = args
        .phi
        .clone()
        .or_else(|| r.params.phi.clone())
        .ok_or_else(|| CmdError::Schema("phi (morphism name) is required".into()))?;
    let morphism: &Morphism = r.morphism(&phi_name)?;
    let cfg = pairing_config(args, r)?;
    let forms = testforms(args, r)?;
    let bundle = comparison_bundle(morphism, &r.cover, seed(r))?;
    let outcome = comparison_m(&bundle, &forms, &r.cover, &cfg)?;
    let (reports, converged, all_pass) = identity_json(&outcome.reports);
    let mut body = serde_json::Map::new();
    body.insert("command".into(), json!("check-comparison"));
    body.insert("phi".into(), json!(phi_name));
    body.insert("m_prime_literal_zero".into(), json!(outcome.m_prime_literal_zero));
    body.insert("all_pass".into(), json!(all_pass));
    body.insert("testforms".into(), reports);

    // Degree-based vanishing of M needs codim tables for both sides.
    let spec = &file.morphisms[&phi_name];
    if let (Some(cs), Some(ct)) = (r.codim.get(&spec.source), r.codim.get(&spec.target)) {
        let mv = m_vanishing_report(&bundle, cs, ct, &forms, &r.cover, &cfg)?;
        body.insert(
            "m_vanishing".into(),
            json!({"consistent": mv.consistent, "items": vanishing_json(&mv.items)}),
        );
        body.insert("m_vanishing_consistent".into(), json!(mv.consistent));
    }
    let code = if !converged {
        EXIT_NONCONVERGENT
    } else if !all_pass {
        EXIT_VALIDATION
    } else {
        0
    };
    Ok((Value::Object(body), code))
}

fn cmd_homotopy(
    args: &ProblemArgs,
    _file: &ProblemFile,
    r: &Resolved,
) -> Result<(Value, u8), CmdError> {
    let phi = r.morphism(
        r.params
            .phi
            .as_deref()
            .ok_or_else(|| CmdError::Schema("params.phi (morphism) is required".into()))?,
    )?;
    let psi = r.morphism(
        r.params
            .psi
            .as_deref()
            .ok_or_else(|| CmdError::Schema("params.psi (morphism) is required".into()))?,
    )?;
    let alpha = r.homotopy(
        r.params
            .alpha
            .as_deref()
            .ok_or_else(|| CmdError::Schema("params.alpha (homotopy) is required".into()))?,
    )?;
    let cfg = pairing_config(args, r)?;
    let forms = testforms(args, r)?;
    let report = verify_r_homotopy(phi, psi, alpha, &forms, &r.cover, &cfg, seed(r))?;
    let (reports, converged, all_pass) = identity_json(&report.reports);
    let code = if !converged {
        EXIT_NONCONVERGENT
    } else if !all_pass {
        EXIT_VALIDATION
    } else {
        0
    };
    Ok((
        json!({
            "command": "check-homotopy",
            "all_pass": all_pass,
            "testforms": reports,
        }),
        code,
    ))
}

fn cmd_gen_fixture(args: &GenArgs) -> Result<(Value, u8), CmdError> {
    let kind = match args.kind {
        KindArg::Koszul => FixtureKind::Koszul,
        KindArg::QuotientPair => FixtureKind::QuotientPair,
        KindArg::TwoChartGlue => FixtureKind::TwoChartGlue,
        KindArg::SyntheticTwist => FixtureKind::SyntheticTwist,
    };
    let file = generate_fixture(kind, &args.gens, args.charts, args.max_len, args.degree_bound)?;
    let value = serde_json::to_value(&file).map_err(ProblemError::from)?;
    Ok((value, 0))
}

