//! Subcommand implementations. Each returns a [`CommandOutput`] holding a
//! JSON document, a tabular view and the overall pass/fail status.

use anyhow::{anyhow, bail, Context, Result};
use dqg_core::amplitude::{
    self, partition_function, path_amplitudes, uniform_table, verify_ap_characterization, z_scan, AmplitudeProcess,
    ApReport, ClassicalProcess, TableEntry, TransitionAmplitudeTable,
};
use dqg_core::causet::{Causet, OffspringKind};
use dqg_core::einstein::{self, dump_operator, random_path, SiteDecoherence};
use dqg_core::example::worked_example;
use dqg_core::growth::{path_literal, Growth, GrowthOptions, Path, SetSpec, SiteId};
use dqg_core::qmeasure::{
    check_consistency, check_grade2, mu_sequence, off_diagonal_max, random_disjoint_triple,
    verify_classical_equivalences, MuOptions, Process, ProbabilityOperator,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{ApChoice, ProcessKind, RunConfig};
use crate::golden::{compare, Golden};
use crate::output::{cnum, num, CommandOutput, Table};

/// Number of unlabeled posets on `n` elements, `n = 1..=9`.
pub const KNOWN_LEVEL_SIZES: [usize; 9] = [1, 2, 5, 16, 63, 318, 2045, 16999, 183231];

pub fn build_growth(levels: usize) -> Result<Growth> {
    Growth::build_with(levels, GrowthOptions::default()).with_context(|| format!("building growth levels 1..={levels}"))
}

pub fn rng(cfg: &RunConfig) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed)
}

/// The transition table selected by `--ap`, covering parents up to `growth.max_level() - 1`.
pub fn load_table(cfg: &RunConfig, growth: &Growth) -> Result<TransitionAmplitudeTable<f64>> {
    let top = growth.max_level().saturating_sub(1);
    Ok(match &cfg.ap {
        ApChoice::Action => amplitude::action_table(growth, top)?,
        ApChoice::Uniform => uniform_table(growth, top)?,
        ApChoice::File(_) => {
            let mut entries = cfg.table_entries()?.expect("file choice has entries");
            // Rows for parents at or above the top level do not enter any operator.
            entries.retain(|e| !e.parent.parse::<Causet>().is_ok_and(|p| p.size() >= growth.max_level()));
            TransitionAmplitudeTable::from_entries(growth, &entries, cfg.tol)?
        }
    })
}

/// The process selected by `--ap` and `--process`.
pub fn load_process<'g>(cfg: &RunConfig, growth: &'g Growth) -> Result<Box<dyn Process<f64> + 'g>> {
    let table = load_table(cfg, growth)?;
    let name = cfg.ap.to_string();
    Ok(match cfg.process {
        ProcessKind::Amplitude => Box::new(AmplitudeProcess::new(growth, table, name, cfg.tol)),
        ProcessKind::Classical => Box::new(ClassicalProcess::new(growth, table, false, name, cfg.tol)?),
    })
}

fn operators(process: &dyn Process<f64>, max_n: usize) -> Result<Vec<ProbabilityOperator<f64>>> {
    (1..=max_n).map(|n| process.operator(n).map_err(Into::into)).collect()
}

/// Resolves a path selector: `chain`, `antichain`, `random`, a path literal,
/// or any of these behind a `path:` prefix. Short paths are continued.
pub fn select_path(growth: &Growth, text: &str, n: usize, rng: &mut ChaCha8Rng) -> Result<Path> {
    let body = text.strip_prefix("path:").unwrap_or(text);
    match body {
        "random" => Ok(random_path(growth, n, rng)?),
        "chain" | "antichain" => match SetSpec::parse(&format!("path:{body}"))? {
            SetSpec::Named(which) => Ok(growth.named_path(which, n)?),
            _ => unreachable!("named path selector"),
        },
        _ => {
            let causets = dqg_core::growth::parse_path(body).with_context(|| format!("path selector '{text}'"))?;
            let prefix = growth.resolve_path(&causets)?;
            Ok(growth.continue_path(&prefix, n)?)
        }
    }
}

fn path_name(growth: &Growth, path: &Path) -> String {
    let causets: Vec<Causet> = (1..=path.len()).map(|k| growth.causet(path.site(k)).clone()).collect();
    path_literal(&causets)
}

// ---------------------------------------------------------------- enum

#[derive(Serialize)]
struct EnumCauset {
    index: usize,
    literal: String,
    size: usize,
    covers: Vec<[usize; 2]>,
    canonical: String,
    h: usize,
    w: usize,
    area: usize,
    /// Offspring count including multiplicity.
    offspring: u32,
    offspring_classes: usize,
    producers: usize,
}

#[derive(Serialize)]
struct EnumLevel {
    n: usize,
    count: usize,
    causets: Vec<EnumCauset>,
}

#[derive(Serialize)]
struct EnumReport {
    max_level: usize,
    level_sizes: Vec<usize>,
    levels: Vec<EnumLevel>,
}

pub fn cmd_enum(cfg: &RunConfig) -> Result<CommandOutput> {
    let g = build_growth(cfg.max_level)?;
    let mut table =
        Table::new(["n", "index", "causet", "h", "w", "area", "offspring", "offspring_classes", "producers"]);
    let mut levels = Vec::new();
    for lvl in g.levels() {
        let mut causets = Vec::with_capacity(lvl.len());
        for (i, c) in lvl.causets.iter().enumerate() {
            let (offspring, classes) = if lvl.n < g.max_level() {
                (lvl.offspring_total(i), lvl.offspring[i].len())
            } else {
                let recs = c.offspring()?;
                (recs.iter().map(|r| r.multiplicity).sum(), recs.len())
            };
            let s = c.summary();
            let entry = EnumCauset {
                index: i,
                literal: c.to_literal(),
                size: s.size,
                covers: s.covers,
                canonical: s.canonical,
                h: s.h,
                w: s.w,
                area: s.area,
                offspring,
                offspring_classes: classes,
                producers: lvl.producers[i].len(),
            };
            table.push([
                lvl.n.to_string(),
                i.to_string(),
                entry.literal.clone(),
                entry.h.to_string(),
                entry.w.to_string(),
                entry.area.to_string(),
                offspring.to_string(),
                classes.to_string(),
                entry.producers.to_string(),
            ]);
            causets.push(entry);
        }
        levels.push(EnumLevel { n: lvl.n, count: lvl.len(), causets });
    }
    let report = EnumReport { max_level: g.max_level(), level_sizes: g.levels().iter().map(|l| l.len()).collect(), levels };
    CommandOutput::new(&report, table, true)
}

// ---------------------------------------------------------------- paths

#[derive(Serialize)]
struct PathEntry {
    index: usize,
    path: String,
    entries: Vec<usize>,
}

#[derive(Serialize)]
struct PathsReport {
    counts: Vec<usize>,
    level: usize,
    listed: usize,
    truncated: bool,
    paths: Vec<PathEntry>,
}

pub fn cmd_paths(cfg: &RunConfig, level: Option<usize>, limit: usize) -> Result<CommandOutput> {
    let level = level.unwrap_or(cfg.max_level);
    let g = build_growth(cfg.max_level.max(level))?;
    let counts = (1..=g.max_level()).map(|n| g.paths(n).map(|p| p.len())).collect::<Result<Vec<_>, _>>()?;
    let pl = g.paths(level)?;
    let mut table = Table::new(["index", "path"]);
    let paths: Vec<PathEntry> = (0..pl.len().min(limit))
        .map(|p| {
            let path = pl.path(p);
            let name = path_name(&g, &path);
            table.push([p.to_string(), name.clone()]);
            PathEntry { index: p, path: name, entries: path.entries }
        })
        .collect();
    let report = PathsReport { counts, level, listed: paths.len(), truncated: paths.len() < pl.len(), paths };
    CommandOutput::new(&report, table, true)
}

// ---------------------------------------------------------------- paper-example

#[derive(Serialize)]
struct ExampleReport {
    values: dqg_core::example::WorkedExample,
    comparison: crate::golden::Comparison,
    passed: bool,
}

pub fn cmd_paper_example(cfg: &RunConfig) -> Result<CommandOutput> {
    let ex = worked_example()?;
    let golden = Golden::bundled()?;
    let comparison = compare(&ex, &golden, cfg.tol);
    let mut table = Table::new(["quantity", "value"]);
    let c = |p: [f64; 2]| cnum(p[0], p[1]);
    for (k, z) in ex.z.iter().enumerate() {
        table.push([format!("z(x{})", k + 1), c(*z)]);
    }
    for f in &ex.factors {
        table.push([format!("factor({} -> {})", f.parent, f.child), c(f.value)]);
    }
    for (k, a) in ex.amplitudes.iter().enumerate() {
        table.push([format!("a3(g{})", k + 1), c(*a)]);
    }
    table.push(["sum a3".to_string(), c(ex.sum_amplitudes)]);
    for (k, m) in ex.mu_paths.iter().enumerate() {
        table.push([format!("mu3(g{})", k + 1), num(*m)]);
    }
    table.push(["mu3({x6})".to_string(), num(ex.mu_x6)]);
    table.push(["mu3({x4,x5})".to_string(), num(ex.mu_x4_x5)]);
    table.push(["mu3({x5,x6})".to_string(), num(ex.mu_x5_x6)]);
    for (k, a) in ex.site_amplitudes.iter().enumerate() {
        table.push([format!("a(x{})", k + 1), c(*a)]);
    }
    for d in &comparison.deviations {
        table.push([format!("DEVIATION {}", d.field), format!("expected {} got {}", d.expected, d.actual)]);
    }
    let passed = comparison.passed();
    CommandOutput::new(&ExampleReport { values: ex, comparison, passed }, table, passed)
}

// ---------------------------------------------------------------- ap

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ApEmit {
    #[default]
    Report,
    Table,
    Amplitudes,
}

impl std::str::FromStr for ApEmit {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "report" => Ok(ApEmit::Report),
            "table" => Ok(ApEmit::Table),
            "amplitudes" => Ok(ApEmit::Amplitudes),
            _ => bail!("unknown --emit value '{s}' (expected report, table or amplitudes)"),
        }
    }
}

#[derive(Serialize)]
struct ApCommandReport {
    process: String,
    max_level: usize,
    fallbacks: Vec<String>,
    characterization: ApReport,
    /// Largest difference between the reconstructed and the input table.
    table_difference: Option<f64>,
    passed: bool,
}

#[derive(Serialize)]
struct AmplitudeRow {
    index: usize,
    path: String,
    re: f64,
    im: f64,
}

pub fn cmd_ap(cfg: &RunConfig, emit: ApEmit) -> Result<CommandOutput> {
    let g = build_growth(cfg.max_level)?;
    let table = load_table(cfg, &g)?;
    match emit {
        ApEmit::Table => {
            let entries = table.to_entries(&g);
            let mut t = Table::new(["parent", "child", "re", "im"]);
            for e in &entries {
                t.push([e.parent.clone(), e.child.clone(), num(e.re), num(e.im)]);
            }
            CommandOutput::new(&entries, t, true)
        }
        ApEmit::Amplitudes => {
            let a = path_amplitudes(&g, &table, g.max_level())?;
            let pl = g.paths(g.max_level())?;
            let mut t = Table::new(["index", "path", "re", "im"]);
            let rows: Vec<AmplitudeRow> = a
                .values
                .iter()
                .enumerate()
                .map(|(p, z)| {
                    let path = path_name(&g, &pl.path(p));
                    t.push([p.to_string(), path.clone(), num(z.re), num(z.im)]);
                    AmplitudeRow { index: p, path, re: z.re, im: z.im }
                })
                .collect();
            CommandOutput::new(&rows, t, true)
        }
        ApEmit::Report => {
            let process = load_process(cfg, &g)?;
            let ops = operators(process.as_ref(), g.max_level())?;
            let (report, rebuilt) = verify_ap_characterization(&g, &ops, cfg.tol)?;
            let table_difference = rebuilt.map(|r| r.max_difference(&table));
            let passed = report.passed && table_difference.is_none_or(|d| d <= cfg.tol);
            let mut t = Table::new(["property", "value"]);
            t.push(["ranks".to_string(), format!("{:?}", report.ranks)]);
            t.push(["rank_ok".to_string(), report.rank_ok.to_string()]);
            t.push(["max_consistency_residual".to_string(), num(report.max_consistency_residual)]);
            t.push(["max_amplitude_identity_residual".to_string(), num(report.max_identity_residual)]);
            if let Some(r) = report.regeneration_residual {
                t.push(["regeneration_residual".to_string(), num(r)]);
            }
            if let Some(d) = table_difference {
                t.push(["table_difference".to_string(), num(d)]);
            }
            if let Some(f) = &report.failure {
                t.push(["failure".to_string(), f.clone()]);
            }
            t.push(["passed".to_string(), passed.to_string()]);
            let fallbacks = table.fallbacks.iter().map(|&s| g.causet(s).to_literal()).collect();
            let out = ApCommandReport {
                process: process.name(),
                max_level: g.max_level(),
                fallbacks,
                characterization: report,
                table_difference,
                passed,
            };
            CommandOutput::new(&out, t, passed)
        }
    }
}

// ---------------------------------------------------------------- mu

#[derive(Serialize)]
struct MuReport {
    process: String,
    kind: String,
    complement: String,
    #[serde(flatten)]
    sequence: dqg_core::qmeasure::MuSequence,
}

pub fn cmd_mu(cfg: &RunConfig, spec_text: &str) -> Result<CommandOutput> {
    let spec = SetSpec::parse(spec_text).map_err(|e| anyhow!("set spec '{spec_text}': {e}"))?;
    let g = build_growth(cfg.max_level)?;
    let process = load_process(cfg, &g)?;
    let opts = MuOptions { complement: cfg.complement_mode(), tol: cfg.tol, ..MuOptions::default() };
    let seq = mu_sequence(process.as_ref(), &spec, g.max_level(), opts)?;
    let mut t = Table::new(["n", "mu"]);
    for (n, v) in &seq.values {
        t.push([n.to_string(), num(*v)]);
    }
    let report = MuReport {
        process: process.name(),
        kind: format!("{:?}", cfg.process).to_lowercase(),
        complement: if cfg.strict_complement { "literal" } else { "computational" }.to_string(),
        sequence: seq,
    };
    CommandOutput::new(&report, t, true)
}

// ---------------------------------------------------------------- verify

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Growth,
    Consistency,
    Ap,
    Grade2,
    Einstein,
    Classical,
    All,
}

impl std::str::FromStr for Suite {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "growth" => Suite::Growth,
            "consistency" => Suite::Consistency,
            "ap" => Suite::Ap,
            "grade2" => Suite::Grade2,
            "einstein" => Suite::Einstein,
            "classical" => Suite::Classical,
            "all" => Suite::All,
            _ => bail!("unknown suite '{s}' (expected growth, consistency, ap, grade2, einstein, classical or all)"),
        })
    }
}

/// Parameters for the path-pair suites and operator dumps.
#[derive(Clone, Debug)]
pub struct PairArgs {
    pub truncation: Option<usize>,
    pub omega: String,
    pub omega_prime: String,
}

impl Default for PairArgs {
    fn default() -> Self {
        PairArgs { truncation: None, omega: "path:chain".into(), omega_prime: "path:antichain".into() }
    }
}

impl PairArgs {
    fn truncation(&self, cfg: &RunConfig) -> usize {
        self.truncation.unwrap_or(cfg.max_level.min(5))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: Option<f64>,
    pub detail: Option<String>,
}

impl Check {
    fn flag(name: &str, passed: bool, detail: Option<String>) -> Check {
        Check { name: name.into(), passed, value: None, detail }
    }

    fn residual(name: &str, value: f64, tol: f64, detail: Option<String>) -> Check {
        Check { name: name.into(), passed: value <= tol, value: Some(value), detail }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
}

#[derive(Serialize)]
struct VerifyReport {
    seed: u64,
    tolerance: f64,
    max_level: usize,
    suites: Vec<SuiteReport>,
    passed: bool,
}

pub fn cmd_verify(cfg: &RunConfig, suite: Suite, pair: &PairArgs, trials: usize) -> Result<CommandOutput> {
    let selected: Vec<Suite> = if suite == Suite::All {
        vec![Suite::Growth, Suite::Consistency, Suite::Ap, Suite::Grade2, Suite::Einstein, Suite::Classical]
    } else {
        vec![suite]
    };
    let levels = cfg.max_level.max(if selected.contains(&Suite::Einstein) { pair.truncation(cfg) } else { 1 });
    let g = build_growth(levels)?;
    let mut suites = Vec::new();
    for s in selected {
        let mut rng = rng(cfg);
        let checks = match s {
            Suite::Growth => suite_growth(&g, cfg)?,
            Suite::Consistency => suite_consistency(&g, cfg)?,
            Suite::Ap => suite_ap(&g, cfg)?,
            Suite::Grade2 => suite_grade2(&g, cfg, trials, &mut rng)?,
            Suite::Einstein => suite_einstein(&g, cfg, pair, &mut rng)?,
            Suite::Classical => suite_classical(&g, cfg, trials, &mut rng)?,
            Suite::All => unreachable!(),
        };
        suites.push(SuiteReport { suite: format!("{s:?}").to_lowercase(), checks });
    }
    let passed = suites.iter().all(|s| s.checks.iter().all(|c| c.passed));
    let mut t = Table::new(["suite", "check", "passed", "value", "detail"]);
    for s in &suites {
        for c in &s.checks {
            t.push([
                s.suite.clone(),
                c.name.clone(),
                if c.passed { "PASS" } else { "FAIL" }.to_string(),
                c.value.map(num).unwrap_or_default(),
                c.detail.clone().unwrap_or_default(),
            ]);
        }
    }
    let report = VerifyReport { seed: cfg.seed, tolerance: cfg.tol, max_level: cfg.max_level, suites, passed };
    CommandOutput::new(&report, t, passed)
}

/// Structural checks on every causet of size `≤ cfg.max_level`.
pub fn suite_growth(g: &Growth, cfg: &RunConfig) -> Result<Vec<Check>> {
    let top = cfg.max_level;
    let sizes: Vec<usize> = (1..=top).map(|n| g.level(n).map(|l| l.len())).collect::<Result<_, _>>()?;
    let known = &KNOWN_LEVEL_SIZES[..top];
    let mut checks = vec![Check::flag(
        "level_sizes",
        sizes == known,
        Some(format!("{sizes:?}")),
    )];
    let mut dedup_fail = None;
    let mut sum_fail = None;
    let mut bound_fail = None;
    let mut kind_fail = None;
    let mut producer_fail = None;
    for n in 1..=top {
        let lvl = g.level(n)?;
        let mut codes: Vec<_> = lvl.causets.iter().map(|c| c.canonical_code().clone()).collect();
        codes.sort();
        codes.dedup();
        if codes.len() != lvl.len() || lvl.causets.iter().any(|c| !c.is_canonically_labeled()) {
            dedup_fail.get_or_insert(format!("level {n} has duplicate or non-canonical entries"));
        }
        for (i, c) in lvl.causets.iter().enumerate() {
            let recs = c.offspring()?;
            let total: u32 = recs.iter().map(|r| r.multiplicity).sum();
            let antichains = c.antichains().len();
            if total as usize != antichains {
                sum_fail.get_or_insert(format!("{c}: sum of multiplicities {total} != {antichains} antichains"));
            }
            let (lo, hi) = (n as u32 + 1, 1u32 << n);
            let is_chain = c.height() == n;
            let is_antichain = c.width() == n;
            if total < lo || total > hi || (total == lo) != is_chain || (total == hi) != is_antichain {
                bound_fail.get_or_insert(format!("{c}: total {total} outside [{lo}, {hi}] or bound attained wrongly"));
            }
            if !recs.iter().any(|r| r.kind == OffspringKind::Height) || !recs.iter().any(|r| r.kind == OffspringKind::Width) {
                kind_fail.get_or_insert(format!("{c}: missing height or width offspring"));
            }
            if n >= 2 {
                let producers = c.producers()?.len();
                let classes = c.chain_equivalence_classes().len();
                if producers != classes || producers != lvl.producers[i].len() {
                    producer_fail.get_or_insert(format!(
                        "{c}: {producers} producers, {classes} chain classes, {} growth producers",
                        lvl.producers[i].len()
                    ));
                }
            }
        }
    }
    checks.push(Check::flag("dedup_consistency", dedup_fail.is_none(), dedup_fail));
    checks.push(Check::flag("offspring_sum_equals_antichains", sum_fail.is_none(), sum_fail));
    checks.push(Check::flag("offspring_bounds", bound_fail.is_none(), bound_fail));
    checks.push(Check::flag("height_and_width_offspring", kind_fail.is_none(), kind_fail));
    checks.push(Check::flag("producers_equal_chain_classes", producer_fail.is_none(), producer_fail));
    Ok(checks)
}

pub fn suite_consistency(g: &Growth, cfg: &RunConfig) -> Result<Vec<Check>> {
    let process = load_process(cfg, g)?;
    let mut checks = Vec::new();
    let mut prev = process.operator(1)?;
    for n in 1..cfg.max_level {
        let next = process.operator(n + 1)?;
        let r = check_consistency(g, &prev, &next)?;
        checks.push(Check::residual(
            &format!("consistency_{n}_{}", n + 1),
            r.max_residual,
            cfg.tol,
            r.witness.map(|(i, j)| format!("worst pair ({i}, {j})")),
        ));
        prev = next;
    }
    let totals = (1..=cfg.max_level)
        .map(|n| process.operator(n).map(|op| (op.total() - dqg_core::C64::new(1.0, 0.0)).norm()))
        .collect::<Result<Vec<_>, _>>()?;
    checks.push(Check::residual("normalization", totals.into_iter().fold(0.0, f64::max), cfg.tol, None));
    Ok(checks)
}

pub fn suite_ap(g: &Growth, cfg: &RunConfig) -> Result<Vec<Check>> {
    let process = load_process(cfg, g)?;
    let ops = operators(process.as_ref(), cfg.max_level)?;
    let (report, rebuilt) = verify_ap_characterization(g, &ops, cfg.tol)?;
    let mut checks = vec![
        Check::flag("rank_one", report.rank_ok, Some(format!("ranks {:?}", report.ranks))),
        Check::residual("consistency", report.max_consistency_residual, cfg.tol, None),
        Check::residual(
            "amplitude_identity",
            report.max_identity_residual,
            cfg.tol,
            report.identity_witness.as_ref().map(|w| format!("{w:?}")),
        ),
    ];
    if let Some(r) = report.regeneration_residual {
        checks.push(Check::residual("regeneration", r, cfg.tol, None));
    }
    if let Some(t) = rebuilt {
        checks.push(Check::residual("table_reconstruction", t.max_difference(&load_table(cfg, g)?), cfg.tol, None));
    }
    checks.push(Check::flag("characterization", report.passed, report.failure));
    Ok(checks)
}

pub fn suite_grade2(g: &Growth, cfg: &RunConfig, trials: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let process = load_process(cfg, g)?;
    let mut checks = Vec::new();
    for n in 1..=cfg.max_level {
        let rho = process.operator(n)?;
        let mut worst = 0.0f64;
        for _ in 0..trials {
            let [a, b, c] = random_disjoint_triple(rng, n, rho.dim());
            worst = worst.max(check_grade2(&rho, &a, &b, &c, cfg.tol)?);
        }
        checks.push(Check::residual(&format!("grade2_level_{n}"), worst, cfg.tol, Some(format!("{trials} triples"))));
    }
    Ok(checks)
}

pub fn suite_einstein(g: &Growth, cfg: &RunConfig, pair: &PairArgs, rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let n = pair.truncation(cfg);
    if n < 2 {
        bail!("the Einstein suite needs a truncation of at least 2");
    }
    let process = load_process(cfg, g)?;
    let sd = SiteDecoherence::from_process(process.as_ref(), n)?;
    let w = select_path(g, &pair.omega, n, rng)?;
    let wp = select_path(g, &pair.omega_prime, n, rng)?;
    let detail = Some(format!("N={n}, omega={}, omega'={}", path_name(g, &w), path_name(g, &wp)));
    let basis = einstein::verify_basis_action(&sd, &w, &wp, cfg.tol)?;
    let contracted = einstein::verify_contracted(&sd, &w, &wp, cfg.tol)?;
    let comm = einstein::commutator_report(&sd, &w, &wp, cfg.tol)?;
    let mut checks = vec![
        Check::residual("einstein_identity", basis.einstein_residual, cfg.tol, detail),
        Check::residual("nabla_d_vanishes", basis.nabla_d_residual, cfg.tol, None),
        Check::residual("metric_closed_form", basis.metric_residual, cfg.tol, None),
        Check::residual("mass_energy_closed_form", basis.mass_energy_residual, cfg.tol, None),
        Check::residual("adjoint_closed_form", basis.adjoint_residual, cfg.tol, None),
        Check::residual("adjoint_identity", basis.adjoint_identity_residual, cfg.tol, None),
        Check::residual("contracted_identity", contracted.identity_residual, cfg.tol, None),
        Check::residual("contracted_metric_form", contracted.metric_form_residual, cfg.tol, None),
        Check::residual("contracted_mass_energy_form", contracted.mass_energy_form_residual, cfg.tol, None),
    ];
    let comm_residual = comm.dds_residual.max(comm.dsd_residual).max(comm.dt_residual).max(comm.td_residual);
    checks.push(Check::residual(
        "commutator_forms",
        comm_residual,
        cfg.tol,
        Some(format!(
            "case counts {:?}; metric/adjoint witness {}; metric/mass witness {}",
            basis.case_counts,
            comm.metric_adjoint_witness.as_ref().map_or("none".into(), |w| format!("{w:?}")),
            comm.metric_mass_witness.as_ref().map_or("none".into(), |w| format!("{w:?}")),
        )),
    ));
    Ok(checks)
}

/// The classical process used by the classical suite and subcommand: the
/// uniform table unless `--ap file:` supplies another real table.
pub fn classical_process<'g>(cfg: &RunConfig, g: &'g Growth) -> Result<ClassicalProcess<'g, f64>> {
    let table = match cfg.ap {
        ApChoice::File(_) => load_table(cfg, g)?,
        _ => uniform_table(g, g.max_level() - 1)?,
    };
    let name = if matches!(cfg.ap, ApChoice::File(_)) { cfg.ap.to_string() } else { "uniform".into() };
    Ok(ClassicalProcess::new(g, table, false, name, cfg.tol)?)
}

pub fn suite_classical(g: &Growth, cfg: &RunConfig, trials: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let process = classical_process(cfg, g)?;
    let mut checks = Vec::new();
    let mut off = 0.0f64;
    for n in 1..=cfg.max_level {
        let rho = process.operator(n)?;
        off = off.max(off_diagonal_max(&rho, |z| z.norm()));
        let r = verify_classical_equivalences(&rho, trials, rng, cfg.tol, false)?;
        checks.push(Check {
            name: format!("equivalences_level_{n}"),
            passed: r.passed,
            value: Some(r.intersection_residual.max(r.disjoint_residual).max(r.additivity_residual)),
            detail: r.failure,
        });
    }
    checks.insert(0, Check::residual("diagonal", off, cfg.tol, None));
    let n = cfg.max_level.min(5);
    let sd = SiteDecoherence::from_process(&process, n)?;
    let flat = einstein::flatness_analysis(&sd, g, trials.min(50), rng, cfg.tol)?;
    let sum_residual = flat.level_sums.iter().map(|(_, s)| (s - 1.0).abs()).fold(0.0, f64::max);
    checks.push(Check::residual("site_measure_sums", sum_residual, cfg.tol, Some(format!("N={n}"))));
    checks.push(Check::residual("incomparable_decoherence", flat.incomparable_max, cfg.tol, None));
    checks.push(Check::residual("contracted_mass_energy", flat.contracted_mass_energy_max, cfg.tol, None));
    Ok(checks)
}

// ---------------------------------------------------------------- einstein

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    Nabla,
    Curvature,
    Metric,
    MassEnergy,
    AdjointMetric,
    ContractedCurvature,
    ContractedMetric,
    ContractedMassEnergy,
}

impl std::str::FromStr for OperatorKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "nabla" => OperatorKind::Nabla,
            "curvature" => OperatorKind::Curvature,
            "metric" => OperatorKind::Metric,
            "mass-energy" => OperatorKind::MassEnergy,
            "adjoint-metric" => OperatorKind::AdjointMetric,
            "contracted-curvature" => OperatorKind::ContractedCurvature,
            "contracted-metric" => OperatorKind::ContractedMetric,
            "contracted-mass-energy" => OperatorKind::ContractedMassEnergy,
            _ => bail!(
                "unknown operator '{s}' (expected nabla, curvature, metric, mass-energy, adjoint-metric, \
                 contracted-curvature, contracted-metric or contracted-mass-energy)"
            ),
        })
    }
}

pub fn cmd_einstein(cfg: &RunConfig, pair: &PairArgs, op: OperatorKind) -> Result<CommandOutput> {
    let n = pair.truncation(cfg);
    let g = build_growth(cfg.max_level.max(n))?;
    let process = load_process(cfg, &g)?;
    let sd = SiteDecoherence::from_process(process.as_ref(), n)?;
    let mut rng = rng(cfg);
    let w = select_path(&g, &pair.omega, n, &mut rng)?;
    let wp = select_path(&g, &pair.omega_prime, n, &mut rng)?;
    let operator = match op {
        OperatorKind::Nabla => einstein::nabla(&sd, &w, &wp)?,
        OperatorKind::Curvature => einstein::curvature(&sd, &w, &wp)?,
        OperatorKind::Metric => einstein::metric_op(&sd, &w, &wp)?,
        OperatorKind::MassEnergy => einstein::mass_energy_op(&sd, &w, &wp)?,
        OperatorKind::AdjointMetric => einstein::adjoint_metric(&sd, &w, &wp)?,
        OperatorKind::ContractedCurvature => einstein::contracted_ops(&sd, &w, &wp)?.curvature,
        OperatorKind::ContractedMetric => einstein::contracted_ops(&sd, &w, &wp)?.metric,
        OperatorKind::ContractedMassEnergy => einstein::contracted_ops(&sd, &w, &wp)?.mass_energy,
    };
    let dump = dump_operator(&operator, &sd, &g);
    let mut t = Table::new(["source_x", "source_y", "target_x", "target_y", "re", "im"]);
    for e in &dump {
        for target in &e.targets {
            t.push([
                e.source[0].clone(),
                e.source[1].clone(),
                target.pair[0].clone(),
                target.pair[1].clone(),
                num(target.re),
                num(target.im),
            ]);
        }
    }
    CommandOutput::new(&dump, t, true)
}

// ---------------------------------------------------------------- zscan

#[derive(Serialize)]
struct ExtremeRow {
    j: usize,
    chain_abs_z: f64,
    chain_bound: f64,
    antichain_abs_z: f64,
    antichain_bound: f64,
    holds: bool,
}

#[derive(Serialize)]
struct ZScanReport {
    levels: Vec<amplitude::ZScanRow>,
    extremes: Vec<ExtremeRow>,
    passed: bool,
}

/// Largest `j` for the chain and antichain bound table.
pub const ZSCAN_EXTREME_MAX: usize = 12;

pub fn cmd_zscan(cfg: &RunConfig) -> Result<CommandOutput> {
    let g = build_growth(cfg.max_level)?;
    let levels = z_scan(&g, cfg.max_level)?;
    let extremes = (2..=ZSCAN_EXTREME_MAX)
        .map(|j| {
            let chain = partition_function(&Causet::chain(j))?.to_complex::<f64>().norm();
            let antichain = partition_function(&Causet::antichain(j))?.to_complex::<f64>().norm();
            let (cb, ab) = ((j - 1) as f64, ((1usize << j) - 2) as f64);
            Ok(ExtremeRow {
                j,
                chain_abs_z: chain,
                chain_bound: cb,
                antichain_abs_z: antichain,
                antichain_bound: ab,
                holds: chain >= cb && antichain >= ab,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let passed = extremes.iter().all(|r| r.holds);
    let mut t = Table::new(["n", "min_abs_z", "min_witness", "max_abs_z", "max_witness"]);
    for r in &levels {
        t.push([r.n.to_string(), num(r.min_abs_z), r.min_witness.clone(), num(r.max_abs_z), r.max_witness.clone()]);
    }
    CommandOutput::new(&ZScanReport { levels, extremes, passed }, t, passed)
}

// ---------------------------------------------------------------- classical

#[derive(Serialize)]
struct SiteMeasure {
    level: usize,
    index: usize,
    causet: String,
    mu: f64,
}

#[derive(Serialize)]
struct ClassicalReport {
    process: String,
    truncation: usize,
    seed: u64,
    sites: Vec<SiteMeasure>,
    flatness: einstein::FlatnessReport,
    checks: Vec<Check>,
    passed: bool,
}

pub fn cmd_classical(cfg: &RunConfig, trials: usize) -> Result<CommandOutput> {
    let g = build_growth(cfg.max_level)?;
    let process = classical_process(cfg, &g)?;
    let n = cfg.max_level;
    let sd = SiteDecoherence::from_process(&process, n)?;
    let mut rng = rng(cfg);
    let flatness = einstein::flatness_analysis(&sd, &g, trials.min(50), &mut rng, cfg.tol)?;
    let mut check_rng = self::rng(cfg);
    let checks = suite_classical(&g, cfg, trials, &mut check_rng)?;
    let mut t = Table::new(["level", "index", "causet", "mu"]);
    let sites: Vec<SiteMeasure> = (0..sd.num_sites())
        .map(|x| {
            let SiteId { level, index } = sd.site(x);
            let causet = g.causet(sd.site(x)).to_literal();
            let mu = sd.mu(x);
            t.push([level.to_string(), index.to_string(), causet.clone(), num(mu)]);
            SiteMeasure { level, index, causet, mu }
        })
        .collect();
    let passed = flatness.passed && checks.iter().all(|c| c.passed);
    let report = ClassicalReport { process: process.name(), truncation: n, seed: cfg.seed, sites, flatness, checks, passed };
    CommandOutput::new(&report, t, passed)
}

/// Parses a transition-table JSON document.
pub fn parse_table_entries(text: &str) -> Result<Vec<TableEntry>> {
    Ok(serde_json::from_str(text)?)
}
