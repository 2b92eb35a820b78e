//! Amplitude processes: transition-amplitude tables, path amplitudes, the
//! quantum-action process and its partition function, and the rank-one
//! characterization of amplitude-generated processes.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::causet::{Causet, CausetError, OffspringKind};
use crate::growth::{Growth, GrowthError, SiteId};
use crate::qmeasure::{
    check_consistency, hermitian_rank, ProbabilityOperator, Process, QMeasureError, Representation,
};
use crate::scalar::{cabs, Complex, Phase, Real, RootSum};

/// Below this modulus the partition function is treated as zero.
pub const Z_ZERO_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AmplitudeError {
    #[error(transparent)]
    Growth(#[from] GrowthError),
    #[error(transparent)]
    Causet(#[from] CausetError),
    #[error(transparent)]
    QMeasure(#[from] QMeasureError),
    #[error("{parent} does not produce {child} but the amplitude is nonzero")]
    Support { parent: String, child: String },
    #[error("row of {parent} sums to {re} + {im}i instead of 1")]
    RowSum { parent: String, re: f64, im: f64 },
    #[error("classical amplitude {parent} -> {child} is {value}, which is not a nonnegative real")]
    NotNonnegative { parent: String, child: String, value: String },
    #[error("table covers parents up to level {covered}, level {needed} is required")]
    Coverage { needed: usize, covered: usize },
    #[error("duplicate entry for {parent} -> {child}")]
    Duplicate { parent: String, child: String },
    #[error("invalid table: {0}")]
    Invalid(String),
}

/// Transition amplitudes `ã(x,y)` for parents at levels `1..=max_parent_level`.
///
/// Row `i` at level `k` is aligned with the offspring list of causet `i` in
/// level `k` of the growth process, so `ã(x,y) = 0` off the support by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionAmplitudeTable<T: Real> {
    rows: Vec<Vec<Vec<Complex<T>>>>,
    /// Parents whose partition function vanished and which fell back to `m/[(x→)]`.
    pub fallbacks: Vec<SiteId>,
}

/// One entry of the transition-table file format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub parent: String,
    pub child: String,
    pub re: f64,
    pub im: f64,
}

impl<T: Real> TransitionAmplitudeTable<T> {
    /// Builds a table from a function of the parent site and the transition.
    pub fn from_fn(
        growth: &Growth,
        max_parent_level: usize,
        mut f: impl FnMut(SiteId, &crate::growth::Transition) -> Complex<T>,
    ) -> Result<Self, AmplitudeError> {
        if max_parent_level >= growth.max_level() {
            return Err(AmplitudeError::Coverage { needed: max_parent_level + 1, covered: growth.max_level() });
        }
        let mut rows = Vec::with_capacity(max_parent_level);
        for k in 1..=max_parent_level {
            let lvl = growth.level(k)?;
            let level_rows = (0..lvl.len())
                .map(|i| lvl.offspring[i].iter().map(|t| f(SiteId { level: k, index: i }, t)).collect())
                .collect();
            rows.push(level_rows);
        }
        Ok(TransitionAmplitudeTable { rows, fallbacks: Vec::new() })
    }

    pub fn max_parent_level(&self) -> usize {
        self.rows.len()
    }

    /// Amplitudes of `x`'s row, aligned with its offspring list.
    pub fn row(&self, parent: SiteId) -> &[Complex<T>] {
        &self.rows[parent.level - 1][parent.index]
    }

    /// `ã(x,y)`; zero when `x` does not produce `y` or the row is not covered.
    pub fn get(&self, growth: &Growth, parent: SiteId, child: SiteId) -> Complex<T> {
        if parent.level > self.rows.len() || child.level != parent.level + 1 {
            return Complex::new(T::zero(), T::zero());
        }
        let offspring = &growth.levels()[parent.level - 1].offspring[parent.index];
        offspring
            .iter()
            .position(|t| t.child == child.index)
            .map_or(Complex::new(T::zero(), T::zero()), |k| self.row(parent)[k])
    }

    /// Checks that every row sums to 1 within `tol`.
    pub fn validate(&self, growth: &Growth, tol: T) -> Result<(), AmplitudeError> {
        for (k, level_rows) in self.rows.iter().enumerate() {
            for (i, row) in level_rows.iter().enumerate() {
                let s = row.iter().fold(Complex::new(T::zero(), T::zero()), |a, z| a + *z);
                if cabs(s - Complex::new(T::one(), T::zero())) > tol {
                    let parent = growth.causet(SiteId { level: k + 1, index: i }).to_literal();
                    return Err(AmplitudeError::RowSum { parent, re: s.re.as_f64(), im: s.im.as_f64() });
                }
            }
        }
        Ok(())
    }

    /// Largest entrywise difference to another table over common rows.
    pub fn max_difference(&self, other: &TransitionAmplitudeTable<T>) -> T {
        let mut worst = T::zero();
        for (a, b) in self.rows.iter().zip(&other.rows) {
            for (ra, rb) in a.iter().zip(b) {
                for (x, y) in ra.iter().zip(rb) {
                    worst = worst.max(cabs(*x - *y));
                }
            }
        }
        worst
    }

    /// Entries in canonical order for the JSON file format.
    pub fn to_entries(&self, growth: &Growth) -> Vec<TableEntry> {
        let mut out = Vec::new();
        for (k, level_rows) in self.rows.iter().enumerate() {
            let lvl = &growth.levels()[k];
            for (i, row) in level_rows.iter().enumerate() {
                for (t, z) in lvl.offspring[i].iter().zip(row) {
                    out.push(TableEntry {
                        parent: lvl.causets[i].to_literal(),
                        child: growth.levels()[k + 1].causets[t.child].to_literal(),
                        re: z.re.as_f64(),
                        im: z.im.as_f64(),
                    });
                }
            }
        }
        out
    }

    /// Reads entries, enforcing support and unit row sums. Covered levels are
    /// those up to the largest parent level mentioned; missing entries are 0.
    pub fn from_entries(growth: &Growth, entries: &[TableEntry], tol: T) -> Result<Self, AmplitudeError> {
        let mut resolved = Vec::with_capacity(entries.len());
        let mut max_level = 0;
        for e in entries {
            let parent: Causet = e.parent.parse()?;
            let child: Causet = e.child.parse()?;
            let p = growth.locate(&parent)?;
            let c = growth.locate(&child)?;
            if growth.multiplicity(p, c) == 0 {
                if e.re != 0.0 || e.im != 0.0 {
                    return Err(AmplitudeError::Support { parent: e.parent.clone(), child: e.child.clone() });
                }
                continue;
            }
            max_level = max_level.max(p.level);
            resolved.push((p, c, Complex::new(T::lit(e.re), T::lit(e.im)), e));
        }
        if max_level == 0 {
            return Err(AmplitudeError::Invalid("no transitions given".into()));
        }
        let mut table = TransitionAmplitudeTable::from_fn(growth, max_level, |_, _| Complex::new(T::zero(), T::zero()))?;
        let mut seen = std::collections::HashSet::new();
        for (p, c, z, e) in resolved {
            if !seen.insert((p, c)) {
                return Err(AmplitudeError::Duplicate { parent: e.parent.clone(), child: e.child.clone() });
            }
            let k = growth.levels()[p.level - 1].offspring[p.index].iter().position(|t| t.child == c.index).expect("support checked");
            table.rows[p.level - 1][p.index][k] = z;
        }
        table.validate(growth, tol)?;
        Ok(table)
    }

    /// Requires every amplitude to be a nonnegative real (within `tol` for the
    /// imaginary part); with `allow_signed`, negative reals are accepted.
    pub fn check_classical(&self, growth: &Growth, tol: T, allow_signed: bool) -> Result<(), AmplitudeError> {
        for (k, level_rows) in self.rows.iter().enumerate() {
            let lvl = &growth.levels()[k];
            for (i, row) in level_rows.iter().enumerate() {
                for (t, z) in lvl.offspring[i].iter().zip(row) {
                    if z.im.abs() > tol || (!allow_signed && z.re < -tol) {
                        return Err(AmplitudeError::NotNonnegative {
                            parent: lvl.causets[i].to_literal(),
                            child: growth.levels()[k + 1].causets[t.child].to_literal(),
                            value: format!("{} + {}i", z.re, z.im),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Height, width, action and partition function of one causet.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionProfile {
    pub site: SiteId,
    pub h: usize,
    pub w: usize,
    pub area: usize,
    /// Offspring class cardinalities with multiplicity.
    pub mild: u32,
    pub height: u32,
    pub width: u32,
    /// `[M] + [H] e^{2πi w/|x|} + [W] e^{2πi h/|x|}`.
    pub z: RootSum,
    /// `Σ_y m(x→y) e^{2πi [A(y) − A(x)]/|x|}` over offspring.
    pub z_defining: RootSum,
}

impl ActionProfile {
    pub fn z_value<T: Real>(&self) -> Complex<T> {
        self.z.to_complex()
    }
}

/// The action profile of a causet in a level whose offspring are built.
pub fn action_profile(growth: &Growth, site: SiteId) -> Result<ActionProfile, AmplitudeError> {
    if site.level >= growth.max_level() {
        return Err(AmplitudeError::Coverage { needed: site.level + 1, covered: growth.max_level() });
    }
    let x = growth.causet(site);
    let n = x.size() as u64;
    let (h, w) = (x.height(), x.width());
    let area = h * w;
    let (mut mild, mut height, mut width) = (0, 0, 0);
    let mut z_defining = RootSum::new();
    for t in &growth.levels()[site.level - 1].offspring[site.index] {
        match t.kind {
            OffspringKind::Mild => mild += t.multiplicity,
            OffspringKind::Height => height += t.multiplicity,
            OffspringKind::Width => width += t.multiplicity,
        }
        let child = growth.causet(SiteId { level: site.level + 1, index: t.child });
        z_defining.add_term(Phase::turns(child.area() as i64 - area as i64, n), t.multiplicity as i64);
    }
    let mut z = RootSum::new();
    z.add_term(Phase::ONE, mild as i64);
    z.add_term(Phase::turns(w as i64, n), height as i64);
    z.add_term(Phase::turns(h as i64, n), width as i64);
    Ok(ActionProfile { site, h, w, area, mild, height, width, z, z_defining })
}

/// `z(x)` from the antichains of `x` directly, without a growth process.
pub fn partition_function(x: &Causet) -> Result<RootSum, CausetError> {
    let n = x.size() as u64;
    let area = x.area() as i64;
    let mut z = RootSum::new();
    for a in x.antichains() {
        let y = x.extend(a)?;
        z.add_term(Phase::turns(y.area() as i64 - area, n), 1);
    }
    Ok(z)
}

/// `ã(x,y) = m(x→y)/z(x) · e^{2πi [A(y)−A(x)]/|x|}`, with `ã = m/[(x→)]` when `|z(x)| < 1e-12`.
pub fn action_table<T: Real>(growth: &Growth, max_parent_level: usize) -> Result<TransitionAmplitudeTable<T>, AmplitudeError> {
    let mut profiles = Vec::new();
    for k in 1..=max_parent_level.min(growth.max_level().saturating_sub(1)) {
        for i in 0..growth.level(k)?.len() {
            profiles.push(action_profile(growth, SiteId { level: k, index: i })?);
        }
    }
    let mut fallbacks = Vec::new();
    let mut cursor = 0;
    let mut table = TransitionAmplitudeTable::from_fn(growth, max_parent_level, |site, t| {
        while profiles[cursor].site != site {
            cursor += 1;
        }
        let prof = &profiles[cursor];
        let z: Complex<T> = prof.z_value();
        let m = T::lit(t.multiplicity as f64);
        if cabs(z).as_f64() < Z_ZERO_THRESHOLD {
            if fallbacks.last() != Some(&site) {
                fallbacks.push(site);
            }
            let r = T::lit((prof.mild + prof.height + prof.width) as f64);
            return Complex::new(m / r, T::zero());
        }
        let delta = match t.kind {
            OffspringKind::Mild => 0,
            OffspringKind::Height => prof.w,
            OffspringKind::Width => prof.h,
        };
        let n = growth.causet(site).size() as u64;
        Phase::turns(delta as i64, n).to_complex::<T>() * m / z
    })?;
    table.fallbacks = fallbacks;
    Ok(table)
}

/// The uniform classical table `ã(x,y) = m(x→y)/[(x→)]`.
pub fn uniform_table<T: Real>(growth: &Growth, max_parent_level: usize) -> Result<TransitionAmplitudeTable<T>, AmplitudeError> {
    TransitionAmplitudeTable::from_fn(growth, max_parent_level, |site, t| {
        let r = growth.levels()[site.level - 1].offspring_total(site.index);
        Complex::new(T::lit(t.multiplicity as f64) / T::lit(r as f64), T::zero())
    })
}

/// Random row-normalized complex table. Raw entries are uniform in the unit
/// square; rows whose raw sum is small are redrawn to keep entries bounded.
pub fn random_table<T: Real, R: Rng>(
    growth: &Growth,
    max_parent_level: usize,
    rng: &mut R,
) -> Result<TransitionAmplitudeTable<T>, AmplitudeError> {
    let mut table = TransitionAmplitudeTable::from_fn(growth, max_parent_level, |_, _| Complex::new(T::zero(), T::zero()))?;
    for level_rows in table.rows.iter_mut() {
        for row in level_rows.iter_mut() {
            loop {
                let raw: Vec<Complex<f64>> =
                    row.iter().map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
                let s: Complex<f64> = raw.iter().sum();
                if s.norm() >= 0.25 {
                    for (dst, z) in row.iter_mut().zip(raw) {
                        let v = z / s;
                        *dst = Complex::new(T::lit(v.re), T::lit(v.im));
                    }
                    break;
                }
            }
        }
    }
    Ok(table)
}

/// Path amplitudes `a_n` in Ω_n enumeration order.
#[derive(Clone, Debug, PartialEq)]
pub struct PathAmplitudeVector<T: Real> {
    pub n: usize,
    pub values: DVector<Complex<T>>,
}

impl<T: Real> PathAmplitudeVector<T> {
    /// `⟨1_n, a_n⟩`.
    pub fn sum(&self) -> Complex<T> {
        self.values.iter().fold(Complex::new(T::zero(), T::zero()), |s, z| s + *z)
    }
}

/// `a_n(ω) = ã(ω_1,ω_2) ⋯ ã(ω_{n−1},ω_n)`.
pub fn path_amplitudes<T: Real>(
    growth: &Growth,
    table: &TransitionAmplitudeTable<T>,
    n: usize,
) -> Result<PathAmplitudeVector<T>, AmplitudeError> {
    if n > table.max_parent_level() + 1 {
        return Err(AmplitudeError::Coverage { needed: n - 1, covered: table.max_parent_level() });
    }
    let mut values = DVector::from_element(1, Complex::new(T::one(), T::zero()));
    for k in 1..n {
        let prev = growth.paths(k)?;
        let next = growth.paths(k + 1)?;
        let mut out = DVector::from_element(next.len(), Complex::new(T::zero(), T::zero()));
        for q in 0..prev.len() {
            let row = table.row(SiteId { level: k, index: prev.last(q) });
            let range = next.children_of(q);
            for (offset, p) in range.enumerate() {
                out[p] = values[q] * row[offset];
            }
        }
        values = out;
    }
    Ok(PathAmplitudeVector { n, values })
}

/// `ρ_n = |a_n⟩⟨a_n|`.
pub fn rank1_operator<T: Real>(a: &PathAmplitudeVector<T>, tol: T) -> Result<ProbabilityOperator<T>, AmplitudeError> {
    Ok(ProbabilityOperator::rank_one(a.n, a.values.clone(), tol)?)
}

/// Site amplitudes `a(x) = Σ{a_{|x|}(ω): ω_{|x|} = x}` for levels `1..=n`,
/// computed by propagating along transitions.
pub fn site_amplitudes<T: Real>(
    growth: &Growth,
    table: &TransitionAmplitudeTable<T>,
    n: usize,
) -> Result<Vec<Vec<Complex<T>>>, AmplitudeError> {
    if n > table.max_parent_level() + 1 {
        return Err(AmplitudeError::Coverage { needed: n - 1, covered: table.max_parent_level() });
    }
    let mut out = vec![vec![Complex::new(T::one(), T::zero())]];
    for k in 1..n {
        let lvl = growth.level(k)?;
        let mut next = vec![Complex::new(T::zero(), T::zero()); growth.level(k + 1)?.len()];
        for (i, a) in out[k - 1].iter().enumerate() {
            for (t, z) in lvl.offspring[i].iter().zip(table.row(SiteId { level: k, index: i })) {
                next[t.child] += *a * *z;
            }
        }
        out.push(next);
    }
    Ok(out)
}

/// `a(x)` for a single causet.
pub fn site_amplitude<T: Real>(
    growth: &Growth,
    table: &TransitionAmplitudeTable<T>,
    x: &Causet,
) -> Result<Complex<T>, AmplitudeError> {
    let site = growth.locate(x)?;
    Ok(site_amplitudes(growth, table, site.level)?[site.level - 1][site.index])
}

/// The rank-one process generated by a transition table.
pub struct AmplitudeProcess<'g, T: Real> {
    growth: &'g Growth,
    table: TransitionAmplitudeTable<T>,
    name: String,
    tol: T,
}

impl<'g, T: Real> AmplitudeProcess<'g, T> {
    pub fn new(growth: &'g Growth, table: TransitionAmplitudeTable<T>, name: impl Into<String>, tol: T) -> Self {
        AmplitudeProcess { growth, table, name: name.into(), tol }
    }

    /// The quantum-action process on all levels the growth supports.
    pub fn action(growth: &'g Growth, tol: T) -> Result<Self, AmplitudeError> {
        let table = action_table(growth, growth.max_level() - 1)?;
        Ok(AmplitudeProcess::new(growth, table, "action", tol))
    }

    pub fn table(&self) -> &TransitionAmplitudeTable<T> {
        &self.table
    }

    pub fn amplitudes(&self, n: usize) -> Result<PathAmplitudeVector<T>, AmplitudeError> {
        path_amplitudes(self.growth, &self.table, n)
    }
}

impl<T: Real> Process<T> for AmplitudeProcess<'_, T> {
    fn growth(&self) -> &Growth {
        self.growth
    }

    fn operator(&self, n: usize) -> Result<ProbabilityOperator<T>, QMeasureError> {
        let a = self.amplitudes(n).map_err(to_qmeasure)?;
        ProbabilityOperator::rank_one(n, a.values, self.tol)
    }

    fn name(&self) -> String {
        self.name.clone()
    }
}

/// The diagonal process `ρ_n(ω,ω′) = a_n(ω) δ_{ω,ω′}` of a real table.
pub struct ClassicalProcess<'g, T: Real> {
    growth: &'g Growth,
    table: TransitionAmplitudeTable<T>,
    allow_signed: bool,
    name: String,
    tol: T,
}

impl<'g, T: Real> ClassicalProcess<'g, T> {
    /// Rejects tables with complex or (unless `allow_signed`) negative entries.
    pub fn new(
        growth: &'g Growth,
        table: TransitionAmplitudeTable<T>,
        allow_signed: bool,
        name: impl Into<String>,
        tol: T,
    ) -> Result<Self, AmplitudeError> {
        table.check_classical(growth, tol, allow_signed)?;
        Ok(ClassicalProcess { growth, table, allow_signed, name: name.into(), tol })
    }

    pub fn uniform(growth: &'g Growth, tol: T) -> Result<Self, AmplitudeError> {
        let table = uniform_table(growth, growth.max_level() - 1)?;
        ClassicalProcess::new(growth, table, false, "uniform", tol)
    }

    pub fn table(&self) -> &TransitionAmplitudeTable<T> {
        &self.table
    }
}

impl<T: Real> Process<T> for ClassicalProcess<'_, T> {
    fn growth(&self) -> &Growth {
        self.growth
    }

    fn operator(&self, n: usize) -> Result<ProbabilityOperator<T>, QMeasureError> {
        let a = path_amplitudes(self.growth, &self.table, n).map_err(to_qmeasure)?;
        ProbabilityOperator::diagonal(n, a.values.map(|z| z.re), self.tol, self.allow_signed)
    }

    fn name(&self) -> String {
        self.name.clone()
    }
}

fn to_qmeasure(e: AmplitudeError) -> QMeasureError {
    match e {
        AmplitudeError::QMeasure(q) => q,
        AmplitudeError::Growth(g) => QMeasureError::Growth(g),
        other => QMeasureError::Process(other.to_string()),
    }
}

/// Witness of a failed amplitude-process identity check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityWitness {
    pub level: usize,
    pub omega: usize,
    pub omega_prime: usize,
    /// Index of the common continuation in the next level.
    pub child: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ApReport {
    pub levels: usize,
    /// Numerical rank per level.
    pub ranks: Vec<usize>,
    pub rank_ok: bool,
    pub max_consistency_residual: f64,
    pub max_identity_residual: f64,
    pub identity_witness: Option<IdentityWitness>,
    /// Max difference between the extracted amplitudes and those regenerated
    /// from the reconstructed table.
    pub regeneration_residual: Option<f64>,
    pub passed: bool,
    pub failure: Option<String>,
}

/// Rank-one factor of a decoherence matrix with the phase fixed so that
/// `⟨1, a⟩` is real and positive.
pub fn extract_amplitudes<T: Real>(rho: &ProbabilityOperator<T>) -> DVector<Complex<T>> {
    let zero = Complex::new(T::zero(), T::zero());
    let raw = match rho.representation() {
        Representation::RankOne(a) => a.clone(),
        _ => {
            let n = rho.dim();
            let j = (0..n).fold(0, |best, i| if rho.entry(i, i).re > rho.entry(best, best).re { i } else { best });
            let pivot = rho.entry(j, j).re.max(T::zero()).sqrt();
            if pivot == T::zero() {
                DVector::from_element(n, zero)
            } else {
                DVector::from_fn(n, |i, _| rho.entry(i, j).conj() / Complex::new(pivot, T::zero()))
            }
        }
    };
    let s = raw.iter().fold(zero, |acc, z| acc + *z);
    let m = cabs(s);
    if m == T::zero() {
        raw
    } else {
        let unit = s.conj() / Complex::new(m, T::zero());
        raw.map(|z| z * unit)
    }
}

/// Tests whether a process is generated by an amplitude process and, if so,
/// reconstructs the transition table.
pub fn verify_ap_characterization<T: Real>(
    growth: &Growth,
    operators: &[ProbabilityOperator<T>],
    tol: T,
) -> Result<(ApReport, Option<TransitionAmplitudeTable<T>>), AmplitudeError> {
    let levels = operators.len();
    let mut report = ApReport {
        levels,
        ranks: Vec::new(),
        rank_ok: true,
        max_consistency_residual: 0.0,
        max_identity_residual: 0.0,
        identity_witness: None,
        regeneration_residual: None,
        passed: false,
        failure: None,
    };
    for (k, op) in operators.iter().enumerate() {
        if op.level() != k + 1 {
            return Err(QMeasureError::LevelMismatch { expected: k + 1, found: op.level() }.into());
        }
        let rank = match op.representation() {
            Representation::RankOne(_) => 1,
            _ => hermitian_rank(&op.matrix(), tol),
        };
        report.ranks.push(rank);
        if rank > 1 && report.rank_ok {
            report.rank_ok = false;
            report.failure = Some(format!("not AP-generated: level {} has rank {rank}", k + 1));
        }
    }
    if !report.rank_ok {
        return Ok((report, None));
    }
    for w in operators.windows(2) {
        let c = check_consistency(growth, &w[0], &w[1])?;
        report.max_consistency_residual = report.max_consistency_residual.max(c.max_residual);
    }
    let amps: Vec<DVector<Complex<T>>> = operators.iter().map(extract_amplitudes).collect();

    let mut worst = T::zero();
    for n in 1..levels {
        let prev = growth.paths(n)?;
        let next = growth.paths(n + 1)?;
        let mut by_last: Vec<Vec<usize>> = vec![Vec::new(); growth.level(n)?.len()];
        for q in 0..prev.len() {
            by_last[prev.last(q)].push(q);
        }
        for group in &by_last {
            for (gi, &q) in group.iter().enumerate() {
                for &r in &group[gi + 1..] {
                    for (pq, pr) in next.children_of(q).zip(next.children_of(r)) {
                        let res = cabs(amps[n - 1][r] * amps[n][pq] - amps[n - 1][q] * amps[n][pr]);
                        if res > worst {
                            worst = res;
                            report.identity_witness = Some(IdentityWitness {
                                level: n,
                                omega: q,
                                omega_prime: r,
                                child: next.last(pq),
                                residual: res.as_f64(),
                            });
                        }
                    }
                }
            }
        }
    }
    report.max_identity_residual = worst.as_f64();
    if worst > tol {
        report.failure = Some(format!("amplitude identity fails with residual {:e}", worst.as_f64()));
        return Ok((report, None));
    }
    if report.identity_witness.is_some() && worst <= tol {
        report.identity_witness = None;
    }
    if levels < 2 {
        report.passed = true;
        return Ok((report, None));
    }

    // ã(x,y) = a_{n+1}(ω y) / a_n(ω) for the path ω ending at x with the largest |a_n(ω)|
    let mut table = TransitionAmplitudeTable::from_fn(growth, levels - 1, |_, _| Complex::new(T::zero(), T::zero()))?;
    for n in 1..levels {
        let prev = growth.paths(n)?;
        let next = growth.paths(n + 1)?;
        let mut best: Vec<Option<usize>> = vec![None; growth.level(n)?.len()];
        for q in 0..prev.len() {
            let x = prev.last(q);
            if best[x].is_none_or(|b| cabs(amps[n - 1][q]) > cabs(amps[n - 1][b])) {
                best[x] = Some(q);
            }
        }
        for (x, q) in best.into_iter().enumerate() {
            let Some(q) = q else { continue };
            let denom = amps[n - 1][q];
            if cabs(denom) <= tol {
                continue;
            }
            for (offset, p) in next.children_of(q).enumerate() {
                table.rows[n - 1][x][offset] = amps[n][p] / denom;
            }
        }
    }
    let mut regen = T::zero();
    for n in 1..=levels {
        let a = path_amplitudes(growth, &table, n)?;
        for (x, y) in a.values.iter().zip(amps[n - 1].iter()) {
            regen = regen.max(cabs(*x - *y));
        }
    }
    report.regeneration_residual = Some(regen.as_f64());
    report.passed = regen <= tol && report.max_consistency_residual <= tol.as_f64();
    if !report.passed {
        report.failure = Some(format!(
            "reconstruction does not regenerate the process (residual {:e}, consistency {:e})",
            regen.as_f64(),
            report.max_consistency_residual
        ));
    }
    Ok((report, Some(table)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZScanRow {
    pub n: usize,
    pub min_abs_z: f64,
    pub min_witness: String,
    pub max_abs_z: f64,
    pub max_witness: String,
}

/// Per-level extremes of `|z(x)|` over all causets with `|x| = n`.
pub fn z_scan(growth: &Growth, max_n: usize) -> Result<Vec<ZScanRow>, AmplitudeError> {
    let top = max_n.min(growth.max_level());
    (1..=top)
        .map(|n| {
            let lvl = growth.level(n)?;
            let mut min = (f64::INFINITY, 0);
            let mut max = (f64::NEG_INFINITY, 0);
            for (i, x) in lvl.causets.iter().enumerate() {
                let z = cabs(partition_function(x)?.to_complex::<f64>());
                if z < min.0 {
                    min = (z, i);
                }
                if z > max.0 {
                    max = (z, i);
                }
            }
            Ok(ZScanRow {
                n,
                min_abs_z: min.0,
                min_witness: lvl.causets[min.1].to_literal(),
                max_abs_z: max.0,
                max_witness: lvl.causets[max.1].to_literal(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::growth::PathSet;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: Complex<f64>, re: f64, im: f64) -> bool {
        (a - Complex::new(re, im)).norm() < 1e-12
    }

    #[test]
    fn partition_functions_of_small_causets() {
        let g = Growth::build(4).unwrap();
        let z: Vec<Complex<f64>> = [(1, 0), (2, 0), (2, 1)]
            .iter()
            .map(|&(l, i)| action_profile(&g, SiteId { level: l, index: i }).unwrap().z_value())
            .collect();
        assert!(close(z[0], 2.0, 0.0) && close(z[1], 1.0, 0.0) && close(z[2], 2.0, 0.0), "{z:?}");
        for k in 1..=3 {
            for i in 0..g.level(k).unwrap().len() {
                let p = action_profile(&g, SiteId { level: k, index: i }).unwrap();
                assert_eq!(p.z, p.z_defining);
                assert_eq!(p.z, partition_function(g.causet(p.site)).unwrap());
            }
        }
    }

    #[test]
    fn worked_example_amplitudes() {
        let g = Growth::build(4).unwrap();
        let table = action_table::<f64>(&g, 3).unwrap();
        table.validate(&g, 1e-12).unwrap();
        assert!(table.fallbacks.is_empty());
        let a3 = path_amplitudes(&g, &table, 3).unwrap();
        let expected = [-0.5, 0.5, 0.5, 0.5, 0.25, -0.25];
        for (v, e) in a3.values.iter().zip(expected) {
            assert!(close(*v, e, 0.0), "{:?}", a3.values);
        }
        assert!(close(a3.sum(), 1.0, 0.0));
        let sites = site_amplitudes(&g, &table, 3).unwrap();
        let flat: Vec<Complex<f64>> = sites.concat();
        for (v, e) in flat.iter().zip([1.0, 0.5, 0.5, -0.5, 0.5, 1.0, 0.25, -0.25]) {
            assert!(close(*v, e, 0.0), "{flat:?}");
        }
        assert!(close(table.get(&g, SiteId { level: 2, index: 1 }, SiteId { level: 3, index: 2 }), 1.0, 0.0));
        let rho = rank1_operator(&a3, 1e-12).unwrap();
        assert!((rho.q_measure(&PathSet::from_indices(3, 6, [4]), 1e-10).unwrap() - 1.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_table_values() {
        let g = Growth::build(3).unwrap();
        let t = uniform_table::<f64>(&g, 2).unwrap();
        assert_eq!(t.row(SiteId { level: 1, index: 0 }), &[Complex::new(0.5, 0.0), Complex::new(0.5, 0.0)]);
        let anti = t.row(SiteId { level: 2, index: 1 });
        assert_eq!(anti, &[Complex::new(0.5, 0.0), Complex::new(0.25, 0.0), Complex::new(0.25, 0.0)]);
    }

    #[test]
    fn table_json_round_trip_and_validation() {
        let g = Growth::build(4).unwrap();
        let t = action_table::<f64>(&g, 3).unwrap();
        let entries = t.to_entries(&g);
        let back = TransitionAmplitudeTable::from_entries(&g, &entries, 1e-10).unwrap();
        assert!(back.max_difference(&t) < 1e-15);
        let mut bad = entries.clone();
        bad[0].re += 0.1;
        assert!(matches!(TransitionAmplitudeTable::<f64>::from_entries(&g, &bad, 1e-10), Err(AmplitudeError::RowSum { .. })));
        let mut off = entries.clone();
        off.push(TableEntry { parent: "2;0<1".into(), child: "3;".into(), re: 0.5, im: 0.0 });
        assert!(matches!(TransitionAmplitudeTable::<f64>::from_entries(&g, &off, 1e-10), Err(AmplitudeError::Support { .. })));
        let mut dup = entries;
        dup.push(dup[0].clone());
        assert!(matches!(TransitionAmplitudeTable::<f64>::from_entries(&g, &dup, 1e-10), Err(AmplitudeError::Duplicate { .. })));
        assert!(ClassicalProcess::new(&g, t, false, "action", 1e-10).is_err());
    }

    #[test]
    fn ap_round_trip() {
        let g = Growth::build(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let table = random_table::<f64, _>(&g, 3, &mut rng).unwrap();
        let process = AmplitudeProcess::new(&g, table.clone(), "random", 1e-10);
        let ops: Vec<_> = (1..=4).map(|n| process.operator(n).unwrap()).collect();
        let (rep, rebuilt) = verify_ap_characterization(&g, &ops, 1e-10).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!(rebuilt.unwrap().max_difference(&table) < 1e-10);
        let dense: Vec<_> = ops.iter().map(|o| ProbabilityOperator::from_matrix(o.level(), o.matrix(), 1e-10).unwrap()).collect();
        let (rep, rebuilt) = verify_ap_characterization(&g, &dense, 1e-10).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!(rebuilt.unwrap().max_difference(&table) < 1e-9);
    }

    #[test]
    fn classical_process_is_diagonal() {
        let g = Growth::build(4).unwrap();
        let p = ClassicalProcess::<f64>::uniform(&g, 1e-10).unwrap();
        let rho = p.operator(4).unwrap();
        assert!(crate::qmeasure::is_classical(&rho, 1e-12));
        assert!((rho.total().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn extreme_partition_functions() {
        for j in 2..=8 {
            let zc = partition_function(&Causet::chain(j)).unwrap();
            let expected = Complex::new(j as f64, 0.0) + Phase::turns(1, j as u64).to_complex::<f64>();
            assert!((zc.to_complex::<f64>() - expected).norm() < 1e-12);
            let za = partition_function(&Causet::antichain(j)).unwrap();
            let expected = Complex::new((1u64 << j) as f64 - 1.0, 0.0) + Phase::turns(1, j as u64).to_complex::<f64>();
            assert!((za.to_complex::<f64>() - expected).norm() < 1e-9);
        }
    }
}
