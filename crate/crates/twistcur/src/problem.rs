//! JSON problem files, the single interchange format of the command-line
//! tool. Exact coefficients travel as rational strings (`"p/q"`), so a
//! parse/serialize round trip preserves them exactly; radii, tolerances and
//! other schedule knobs are plain floats.
//!
//! `ProblemFile` is the raw schema, `Resolved` the lowered form with every
//! name checked against the cover and every matrix turned into exact
//! polynomial data. Anything wrong at this layer is a `ProblemError`; the
//! executable maps those to exit code 2, keeping them apart from semantic
//! failures found by the commands themselves.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cochain::{
    Cover, DegreeLabel, Entry, GradedBundleFamily, HomCochain, Polydisc, TupleKey,
};
use crate::current::{RegularizationSchedule, TestForm};
use crate::fixtures::{
    homotopy_fixture, koszul_twisting, overlap_cover, poly_bump_form, quotient_pair,
    synthetic_twist,
};
use crate::polyalg::{
    parse_rational, rational_to_string, GaussianRational, Monomial, PolyMatrix, Polynomial,
};
use crate::twist::{Homotopy, Morphism, TwistingCochain};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema: {0}")]
    Schema(String),
}

fn schema(msg: impl Into<String>) -> ProblemError {
    ProblemError::Schema(msg.into())
}

/// Reserved name for the rank-one bundle family with identity gluing;
/// scalar-valued data is phrased as Hom cochains out of it.
pub const UNIT_BUNDLE: &str = "unit";

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CoverSpec {
    pub nvars: usize,
    pub n_charts: usize,
    /// Longest nerve tuple kept, see `Cover::full_overlap`.
    pub max_len: usize,
    #[serde(default = "default_radius")]
    pub radius: f64,
}

fn default_radius() -> f64 {
    1.0
}

/// One monomial term with exact Gaussian-rational coefficient.
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub exp: Vec<u16>,
    pub re: String,
    #[serde(default = "zero_rational")]
    pub im: String,
}

fn zero_rational() -> String {
    "0".into()
}

/// Row-major polynomial matrix; `entries[i][j]` lists the terms of the
/// `(i, j)` entry.
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub rows: usize,
    pub cols: usize,
    pub nvars: usize,
    pub entries: Vec<Vec<Vec<TermSpec>>>,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EntrySpec {
    pub tuple: Vec<usize>,
    #[serde(default)]
    pub q: usize,
    pub l: usize,
    pub k: usize,
    pub matrix: MatrixSpec,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TwistingSpec {
    pub bundles: String,
    pub entries: Vec<EntrySpec>,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CochainSpec {
    /// Bundle family names; `"unit"` is reserved.
    pub source: String,
    pub target: String,
    pub degree: i32,
    pub entries: Vec<EntrySpec>,
}

/// A morphism or homotopy: two twisting names plus the cochain carrying the
/// actual maps. Closedness is a command-level check, not a schema one.
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MorphismSpec {
    pub source: String,
    pub target: String,
    pub cochain: String,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TestFormSpec {
    pub tuple: Vec<usize>,
    #[serde(default)]
    pub dzbar: Vec<usize>,
    /// Coefficients in `z_1..z_n, zbar_1..zbar_n`, so `nvars` here is twice
    /// the cover's.
    pub coeff: MatrixSpec,
    pub radius: f64,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps0: Option<f64>,
    pub ratio: f64,
    pub steps: usize,
    pub tol: f64,
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ClaimSpec {
    Member,
    Nonmember,
    Unstated,
}

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ModeSpec {
    Residue,
    Pv,
}

/// Command parameters. Each command reads the fields it needs; names must
/// resolve regardless, so a problem file never carries dangling references.
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq, Default)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub twisting: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    /// Cochain name for extension and residue pairing, morphism name for the
    /// comparison and homotopy checks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub claim: Option<ClaimSpec>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub low_degree_vanishing_asserted: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub testforms: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_abs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_rel: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degree_bound: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub cover: CoverSpec,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub bundles: BTreeMap<String, Vec<usize>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub twistings: BTreeMap<String, TwistingSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub cochains: BTreeMap<String, CochainSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub morphisms: BTreeMap<String, MorphismSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub homotopies: BTreeMap<String, MorphismSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub testforms: BTreeMap<String, TestFormSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub schedules: BTreeMap<String, ScheduleSpec>,
    /// Per-twisting codimension of the rank-drop locus at each level,
    /// user-supplied metadata for the vanishing predicates.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub codim: BTreeMap<String, BTreeMap<usize, usize>>,
    #[serde(default, skip_serializing_if = "params_is_default")]
    pub params: Params,
}

fn params_is_default(p: &Params) -> bool {
    *p == Params::default()
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<ProblemFile, ProblemError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Canonical serialization: rationals in lowest terms, maps sorted.
    /// Parsing this output reproduces the same resolved objects.
    pub fn to_json(&self) -> Result<String, ProblemError> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn poly_from_terms(nvars: usize, terms: &[TermSpec], at: &str) -> Result<Polynomial, ProblemError> {
    let mut p = Polynomial::zero(nvars);
    for t in terms {
        if t.exp.len() != nvars {
            return Err(schema(format!(
                "{at}: exponent list has length {}, want {nvars}",
                t.exp.len()
            )));
        }
        let re = parse_rational(&t.re).map_err(|e| schema(format!("{at}: {e}")))?;
        let im = parse_rational(&t.im).map_err(|e| schema(format!("{at}: {e}")))?;
        p.add_term(Monomial(t.exp.clone()), GaussianRational::new(re, im));
    }
    Ok(p)
}

pub fn matrix_from_spec(spec: &MatrixSpec, at: &str) -> Result<PolyMatrix, ProblemError> {
    if spec.entries.len() != spec.rows || spec.entries.iter().any(|r| r.len() != spec.cols) {
        return Err(schema(format!("{at}: entry grid does not match rows x cols")));
    }
    let mut m = PolyMatrix::zero(spec.rows, spec.cols, spec.nvars);
    for (i, row) in spec.entries.iter().enumerate() {
        for (j, terms) in row.iter().enumerate() {
            *m.entry_mut(i, j) = poly_from_terms(spec.nvars, terms, at)?;
        }
    }
    Ok(m)
}

fn poly_to_terms(p: &Polynomial) -> Vec<TermSpec> {
    p.terms()
        .map(|(m, c)| TermSpec {
            exp: m.0.clone(),
            re: rational_to_string(&c.re),
            im: rational_to_string(&c.im),
        })
        .collect()
}

pub fn matrix_to_spec(m: &PolyMatrix) -> MatrixSpec {
    MatrixSpec {
        rows: m.rows,
        cols: m.cols,
        nvars: m.nvars,
        entries: (0..m.rows)
            .map(|i| (0..m.cols).map(|j| poly_to_terms(m.entry(i, j))).collect())
            .collect(),
    }
}

/// Polynomial entries of a cochain as schema data. Numeric entries have no
/// exact representation and are rejected.
pub fn entries_to_specs(x: &HomCochain) -> Result<Vec<EntrySpec>, ProblemError> {
    let mut out = Vec::new();
    for ((t, label), e) in &x.entries {
        let m = e
            .as_poly()
            .ok_or_else(|| schema("cochain has non-polynomial entries"))?;
        out.push(EntrySpec {
            tuple: t.0.clone(),
            q: label.q,
            l: label.l,
            k: label.k,
            matrix: matrix_to_spec(m),
        });
    }
    Ok(out)
}

pub struct Resolved {
    pub cover: Cover,
    pub bundles: BTreeMap<String, GradedBundleFamily>,
    pub twistings: BTreeMap<String, TwistingCochain>,
    pub cochains: BTreeMap<String, HomCochain>,
    pub morphisms: BTreeMap<String, Morphism>,
    pub homotopies: BTreeMap<String, Homotopy>,
    pub testforms: BTreeMap<String, TestForm>,
    pub schedules: BTreeMap<String, RegularizationSchedule>,
    pub codim: BTreeMap<String, BTreeMap<usize, usize>>,
    pub params: Params,
}

impl Resolved {
    pub fn twisting(&self, name: &str) -> Result<&TwistingCochain, ProblemError> {
        self.twistings
            .get(name)
            .ok_or_else(|| schema(format!("unknown twisting '{name}'")))
    }

    pub fn cochain(&self, name: &str) -> Result<&HomCochain, ProblemError> {
        self.cochains
            .get(name)
            .ok_or_else(|| schema(format!("unknown cochain '{name}'")))
    }

    pub fn morphism(&self, name: &str) -> Result<&Morphism, ProblemError> {
        self.morphisms
            .get(name)
            .ok_or_else(|| schema(format!("unknown morphism '{name}'")))
    }

    pub fn homotopy(&self, name: &str) -> Result<&Homotopy, ProblemError> {
        self.homotopies
            .get(name)
            .ok_or_else(|| schema(format!("unknown homotopy '{name}'")))
    }

    pub fn named_testforms(&self) -> Result<Vec<TestForm>, ProblemError> {
        self.params
            .testforms
            .iter()
            .map(|n| {
                self.testforms
                    .get(n)
                    .cloned()
                    .ok_or_else(|| schema(format!("unknown test form '{n}'")))
            })
            .collect()
    }

    /// The schedule named in params, or the library default.
    pub fn schedule(&self) -> Result<RegularizationSchedule, ProblemError> {
        match &self.params.schedule {
            None => Ok(RegularizationSchedule::default()),
            Some(n) => self
                .schedules
                .get(n)
                .cloned()
                .ok_or_else(|| schema(format!("unknown schedule '{n}'"))),
        }
    }
}

fn lower_entries(
    mut x: HomCochain,
    entries: &[EntrySpec],
    cover: &Cover,
    at: &str,
) -> Result<HomCochain, ProblemError> {
    for e in entries {
        let tuple = TupleKey(e.tuple.clone());
        cover
            .cell(&tuple)
            .map_err(|_| schema(format!("{at}: tuple {:?} is not in the nerve", e.tuple)))?;
        if e.matrix.nvars != cover.nvars {
            return Err(schema(format!(
                "{at}: matrix in {} variables on a {}-variable cover",
                e.matrix.nvars, cover.nvars
            )));
        }
        let label = DegreeLabel {
            q: e.q,
            l: e.l,
            k: e.k,
        };
        let m = matrix_from_spec(&e.matrix, at)?;
        x.add_entry(tuple, label, Entry::Poly(m))
            .map_err(|err| schema(format!("{at}: {err}")))?;
    }
    Ok(x)
}

pub fn resolve(file: &ProblemFile) -> Result<Resolved, ProblemError> {
    let c = &file.cover;
    if c.nvars == 0 || c.n_charts == 0 || c.max_len == 0 {
        return Err(schema("cover: nvars, n_charts and max_len must be positive"));
    }
    if !(c.radius > 0.0) {
        return Err(schema("cover: radius must be positive"));
    }
    let disc = Polydisc::new(
        vec![num::complex::Complex64::new(0.0, 0.0); c.nvars],
        vec![c.radius; c.nvars],
    )
    .map_err(|e| schema(format!("cover: {e}")))?;
    let cover = Cover::full_overlap(c.nvars, c.n_charts, c.max_len, disc);

    let mut bundles: BTreeMap<String, GradedBundleFamily> = BTreeMap::new();
    bundles.insert(
        UNIT_BUNDLE.into(),
        GradedBundleFamily::unit(c.n_charts),
    );
    for (name, ranks) in &file.bundles {
        if name == UNIT_BUNDLE {
            return Err(schema("bundle name 'unit' is reserved"));
        }
        if ranks.is_empty() {
            return Err(schema(format!("bundle family '{name}' has no levels")));
        }
        bundles.insert(name.clone(), GradedBundleFamily::uniform(c.n_charts, ranks.clone()));
    }
    let family = |name: &str| {
        bundles
            .get(name)
            .cloned()
            .ok_or_else(|| schema(format!("unknown bundle family '{name}'")))
    };

    let mut twistings = BTreeMap::new();
    for (name, spec) in &file.twistings {
        let fam = family(&spec.bundles)?;
        let at = format!("twisting '{name}'");
        if let Some(e) = spec.entries.iter().find(|e| e.q != 0) {
            return Err(schema(format!("{at}: entry at {:?} has q = {}", e.tuple, e.q)));
        }
        let a = lower_entries(
            HomCochain::zero(fam.clone(), fam.clone(), 1),
            &spec.entries,
            &cover,
            &at,
        )?;
        let t = TwistingCochain::new(fam, cover.nvars, a)
            .map_err(|e| schema(format!("{at}: {e}")))?;
        twistings.insert(name.clone(), t);
    }

    let mut cochains = BTreeMap::new();
    for (name, spec) in &file.cochains {
        let at = format!("cochain '{name}'");
        let x = lower_entries(
            HomCochain::zero(family(&spec.source)?, family(&spec.target)?, spec.degree),
            &spec.entries,
            &cover,
            &at,
        )?;
        cochains.insert(name.clone(), x);
    }

    let lower_pair = |spec: &MorphismSpec, at: &str| {
        let source = twistings
            .get(&spec.source)
            .ok_or_else(|| schema(format!("{at}: unknown twisting '{}'", spec.source)))?;
        let target = twistings
            .get(&spec.target)
            .ok_or_else(|| schema(format!("{at}: unknown twisting '{}'", spec.target)))?;
        let x: &HomCochain = cochains
            .get(&spec.cochain)
            .ok_or_else(|| schema(format!("{at}: unknown cochain '{}'", spec.cochain)))?;
        if x.source != source.bundles || x.target != target.bundles {
            return Err(schema(format!(
                "{at}: cochain '{}' does not run between the named twistings",
                spec.cochain
            )));
        }
        Ok((source.clone(), target.clone(), x.clone()))
    };

    let mut morphisms = BTreeMap::new();
    for (name, spec) in &file.morphisms {
        let (source, target, phi) = lower_pair(spec, &format!("morphism '{name}'"))?;
        morphisms.insert(name.clone(), Morphism { source, target, phi });
    }
    let mut homotopies = BTreeMap::new();
    for (name, spec) in &file.homotopies {
        let (source, target, alpha) = lower_pair(spec, &format!("homotopy '{name}'"))?;
        homotopies.insert(name.clone(), Homotopy { source, target, alpha });
    }

    let mut testforms = BTreeMap::new();
    for (name, spec) in &file.testforms {
        let at = format!("test form '{name}'");
        let tuple = TupleKey(spec.tuple.clone());
        cover
            .cell(&tuple)
            .map_err(|_| schema(format!("{at}: tuple {:?} is not in the nerve", spec.tuple)))?;
        if spec.dzbar.windows(2).any(|w| w[0] >= w[1])
            || spec.dzbar.iter().any(|&i| i >= cover.nvars)
        {
            return Err(schema(format!(
                "{at}: dzbar indices must be strictly increasing and below {}",
                cover.nvars
            )));
        }
        if spec.coeff.nvars != 2 * cover.nvars {
            return Err(schema(format!(
                "{at}: coefficients need {} variables (z then zbar)",
                2 * cover.nvars
            )));
        }
        if !(spec.radius > 0.0) {
            return Err(schema(format!("{at}: radius must be positive")));
        }
        let coeff = matrix_from_spec(&spec.coeff, &at)?;
        testforms.insert(
            name.clone(),
            poly_bump_form(name.clone(), tuple, cover.nvars, spec.dzbar.clone(), coeff, spec.radius),
        );
    }

    let mut schedules = BTreeMap::new();
    for (name, s) in &file.schedules {
        if !(s.ratio > 0.0 && s.ratio < 1.0) || s.steps == 0 || !(s.tol > 0.0) {
            return Err(schema(format!(
                "schedule '{name}': need 0 < ratio < 1, steps > 0, tol > 0"
            )));
        }
        schedules.insert(
            name.clone(),
            RegularizationSchedule {
                eps0: s.eps0,
                ratio: s.ratio,
                steps: s.steps,
                tol: s.tol,
            },
        );
    }

    for name in file.codim.keys() {
        if !twistings.contains_key(name) {
            return Err(schema(format!("codim: unknown twisting '{name}'")));
        }
    }

    // Dangling parameter names are schema errors even for commands that will
    // never read them; files stay self-contained.
    let p = &file.params;
    for (field, name) in [
        ("twisting", &p.twisting),
        ("source", &p.source),
        ("target", &p.target),
    ] {
        if let Some(n) = name {
            if !twistings.contains_key(n) {
                return Err(schema(format!("params.{field}: unknown twisting '{n}'")));
            }
        }
    }
    for (field, name) in [("phi", &p.phi), ("psi", &p.psi)] {
        if let Some(n) = name {
            if !cochains.contains_key(n) && !morphisms.contains_key(n) {
                return Err(schema(format!(
                    "params.{field}: '{n}' is neither a cochain nor a morphism"
                )));
            }
        }
    }
    if let Some(n) = &p.alpha {
        if !homotopies.contains_key(n) {
            return Err(schema(format!("params.alpha: unknown homotopy '{n}'")));
        }
    }
    if let Some(n) = &p.witness {
        if !cochains.contains_key(n) {
            return Err(schema(format!("params.witness: unknown cochain '{n}'")));
        }
    }
    if let Some(n) = &p.schedule {
        if !schedules.contains_key(n) {
            return Err(schema(format!("params.schedule: unknown schedule '{n}'")));
        }
    }
    for n in &p.testforms {
        if !testforms.contains_key(n) {
            return Err(schema(format!("params.testforms: unknown test form '{n}'")));
        }
    }

    Ok(Resolved {
        cover,
        bundles,
        twistings,
        cochains,
        morphisms,
        homotopies,
        testforms,
        schedules,
        codim: file.codim.clone(),
        params: file.params.clone(),
    })
}

/// Parses generator strings like `z`, `z^2`, `z1^2*z2` into monomials;
/// indices are 1-based and a bare `z` means `z1`.
pub fn parse_monomial(s: &str, nvars: usize) -> Result<Polynomial, ProblemError> {
    let bad = || schema(format!("cannot parse generator '{s}'"));
    let mut exp = vec![0u16; nvars];
    let mut coeff = GaussianRational::one();
    for factor in s.split('*') {
        let f = factor.trim();
        if f.is_empty() {
            return Err(bad());
        }
        if let Ok(c) = f.parse::<i64>() {
            coeff = &coeff * &GaussianRational::from_integers(c, 0);
            continue;
        }
        let rest = f.strip_prefix('z').ok_or_else(bad)?;
        let (idx_str, pow_str) = match rest.split_once('^') {
            Some((i, p)) => (i, Some(p)),
            None => (rest, None),
        };
        let idx = if idx_str.is_empty() {
            1
        } else {
            idx_str.parse::<usize>().map_err(|_| bad())?
        };
        if idx == 0 || idx > nvars {
            return Err(schema(format!(
                "generator '{s}': variable z{idx} outside 1..={nvars}"
            )));
        }
        let pow: u16 = match pow_str {
            None => 1,
            Some(p) => p.parse().map_err(|_| bad())?,
        };
        exp[idx - 1] += pow;
    }
    let mut p = Polynomial::zero(nvars);
    p.add_term(Monomial(exp), coeff);
    if p.is_zero() {
        return Err(schema(format!("generator '{s}' is zero")));
    }
    Ok(p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FixtureKind {
    Koszul,
    QuotientPair,
    TwoChartGlue,
    SyntheticTwist,
}

impl FixtureKind {
    pub fn parse(s: &str) -> Result<Self, ProblemError> {
        match s {
            "koszul" => Ok(FixtureKind::Koszul),
            "quotient-pair" => Ok(FixtureKind::QuotientPair),
            "two-chart-glue" => Ok(FixtureKind::TwoChartGlue),
            "synthetic-twist" => Ok(FixtureKind::SyntheticTwist),
            other => Err(schema(format!("unknown fixture kind '{other}'"))),
        }
    }
}

fn twisting_to_spec(t: &TwistingCochain, bundles: &str) -> Result<TwistingSpec, ProblemError> {
    Ok(TwistingSpec {
        bundles: bundles.into(),
        entries: entries_to_specs(&t.a)?,
    })
}

fn cochain_to_spec(
    x: &HomCochain,
    source: &str,
    target: &str,
) -> Result<CochainSpec, ProblemError> {
    Ok(CochainSpec {
        source: source.into(),
        target: target.into(),
        degree: x.degree,
        entries: entries_to_specs(x)?,
    })
}

fn level_ranks(t: &TwistingCochain) -> Vec<usize> {
    t.bundles.ranks[0].clone()
}

/// Emits a ready-to-run problem file for one of the bundled generators.
/// Every generated file passes `validate` with literal-zero residuals.
pub fn generate_fixture(
    kind: FixtureKind,
    gens: &[String],
    n_charts: usize,
    max_len: usize,
    degree_bound: Option<usize>,
) -> Result<ProblemFile, ProblemError> {
    let err = |e: crate::twist::TwistError| schema(format!("fixture generation: {e}"));
    match kind {
        FixtureKind::Koszul => {
            if gens.is_empty() {
                return Err(schema("koszul fixture needs at least one generator"));
            }
            // Every variable mentioned in a generator fixes the dimension.
            let nvars = gens
                .iter()
                .map(|g| max_var_index(g))
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .max()
                .unwrap_or(1)
                .max(1);
            let polys = gens
                .iter()
                .map(|g| parse_monomial(g, nvars))
                .collect::<Result<Vec<_>, _>>()?;
            let cover = overlap_cover(n_charts, nvars, max_len);
            let t = koszul_twisting(&cover, &polys).map_err(err)?;
            let mut file = empty_file(nvars, n_charts, max_len);
            file.bundles.insert("E".into(), level_ranks(&t));
            file.twistings.insert("a".into(), twisting_to_spec(&t, "E")?);
            // One matching scalar bump per residue bidegree, so duality and
            // residue pairings run out of the box. The top block of `u phi`
            // is scalar with q = nvars - 1 and pairs against a plain bump;
            // lower blocks have q = nvars - 1 - m and column rank C(m, ...).
            let ranks = level_ranks(&t);
            for (k, rank) in ranks.iter().enumerate().skip(1) {
                // the k-th block of u phi has q = k - 1, so it contracts
                // against antiholomorphic degree nvars - k
                let Some(q_psi) = nvars.checked_sub(k) else {
                    continue;
                };
                let dzbar: Vec<usize> = (0..q_psi).collect();
                let coeff = MatrixSpec {
                    rows: *rank,
                    cols: 1,
                    nvars: 2 * nvars,
                    entries: (0..*rank)
                        .map(|_| {
                            vec![vec![TermSpec {
                                exp: vec![0; 2 * nvars],
                                re: "1".into(),
                                im: "0".into(),
                            }]]
                        })
                        .collect(),
                };
                file.testforms.insert(
                    format!("t{k}"),
                    TestFormSpec {
                        tuple: vec![0],
                        dzbar,
                        coeff,
                        radius: 0.6,
                    },
                );
                file.params.testforms.push(format!("t{k}"));
            }
            file.schedules.insert(
                "default".into(),
                ScheduleSpec {
                    eps0: Some(0.1),
                    ratio: 0.25,
                    steps: 8,
                    tol: 0.01,
                },
            );
            file.params.schedule = Some("default".into());
            file.params.twisting = Some("a".into());
            Ok(file)
        }
        FixtureKind::QuotientPair => {
            let cover = overlap_cover(n_charts, 1, max_len);
            let (source, target, phi0) = quotient_pair(&cover).map_err(err)?;
            let mut file = empty_file(1, n_charts, max_len);
            file.bundles.insert("E".into(), level_ranks(&source));
            file.bundles.insert("F".into(), level_ranks(&target));
            file.twistings.insert("b".into(), twisting_to_spec(&source, "E")?);
            file.twistings.insert("a".into(), twisting_to_spec(&target, "F")?);
            file.cochains.insert("phi0".into(), cochain_to_spec(&phi0, "E", "F")?);
            file.params.source = Some("b".into());
            file.params.target = Some("a".into());
            file.params.phi = Some("phi0".into());
            file.params.degree_bound = degree_bound;
            Ok(file)
        }
        FixtureKind::TwoChartGlue => {
            if n_charts != 2 {
                return Err(schema("two-chart-glue fixture needs exactly 2 charts"));
            }
            let cover = overlap_cover(2, 1, max_len);
            let fx = homotopy_fixture(&cover).map_err(err)?;
            let mut file = empty_file(1, 2, max_len);
            file.bundles.insert("F".into(), level_ranks(&fx.f));
            file.bundles.insert("E".into(), level_ranks(&fx.e));
            file.twistings.insert("f".into(), twisting_to_spec(&fx.f, "F")?);
            file.twistings.insert("e".into(), twisting_to_spec(&fx.e, "E")?);
            file.cochains
                .insert("phi_c".into(), cochain_to_spec(&fx.phi.phi, "E", "F")?);
            file.cochains
                .insert("psi_c".into(), cochain_to_spec(&fx.psi.phi, "F", "E")?);
            file.cochains
                .insert("alpha_c".into(), cochain_to_spec(&fx.alpha.alpha, "F", "F")?);
            file.morphisms.insert(
                "phi".into(),
                MorphismSpec {
                    source: "e".into(),
                    target: "f".into(),
                    cochain: "phi_c".into(),
                },
            );
            file.morphisms.insert(
                "psi".into(),
                MorphismSpec {
                    source: "f".into(),
                    target: "e".into(),
                    cochain: "psi_c".into(),
                },
            );
            file.homotopies.insert(
                "alpha".into(),
                MorphismSpec {
                    source: "f".into(),
                    target: "f".into(),
                    cochain: "alpha_c".into(),
                },
            );
            file.params.twisting = Some("f".into());
            file.params.phi = Some("phi".into());
            file.params.psi = Some("psi".into());
            file.params.alpha = Some("alpha".into());
            Ok(file)
        }
        FixtureKind::SyntheticTwist => {
            let cover = overlap_cover(n_charts, 1, max_len);
            let t = synthetic_twist(&cover).map_err(err)?;
            let mut file = empty_file(1, n_charts, max_len);
            file.bundles.insert("E".into(), level_ranks(&t));
            // complete-twisting re-derives its input from the p <= 1 parts of
            // the named twisting, so one entry serves both commands.
            file.twistings.insert("a".into(), twisting_to_spec(&t, "E")?);
            file.params.twisting = Some("a".into());
            file.params.degree_bound = degree_bound;
            Ok(file)
        }
    }
}

fn empty_file(nvars: usize, n_charts: usize, max_len: usize) -> ProblemFile {
    ProblemFile {
        cover: CoverSpec {
            nvars,
            n_charts,
            max_len,
            radius: 1.0,
        },
        bundles: BTreeMap::new(),
        twistings: BTreeMap::new(),
        cochains: BTreeMap::new(),
        morphisms: BTreeMap::new(),
        homotopies: BTreeMap::new(),
        testforms: BTreeMap::new(),
        schedules: BTreeMap::new(),
        codim: BTreeMap::new(),
        params: Params::default(),
    }
}

fn max_var_index(gen: &str) -> Result<usize, ProblemError> {
    let mut max = 1usize;
    for factor in gen.split('*') {
        let f = factor.trim();
        if f.parse::<i64>().is_ok() {
            continue;
        }
        let rest = f
            .strip_prefix('z')
            .ok_or_else(|| schema(format!("cannot parse generator '{gen}'")))?;
        let idx_str = rest.split('^').next().unwrap_or("");
        if !idx_str.is_empty() {
            let idx: usize = idx_str
                .parse()
                .map_err(|_| schema(format!("cannot parse generator '{gen}'")))?;
            max = max.max(idx);
        }
    }
    Ok(max)
}
