//! Site decoherence and the discrete geometric operators on pair space:
//! covariant bidifference, curvature, metric and mass-energy operators,
//! their adjoints, contractions and commutators.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::growth::{Growth, GrowthError, Path, SiteId};
use crate::qmeasure::{min_hermitian_eigenvalue, Process, QMeasureError};
use crate::scalar::{cabs, Complex, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EinsteinError {
    #[error(transparent)]
    Growth(#[from] GrowthError),
    #[error(transparent)]
    QMeasure(#[from] QMeasureError),
    #[error("path has length {len}, truncation {n} needs at least {n}")]
    ShortPath { len: usize, n: usize },
    #[error("truncation must be at least 2, got {0}")]
    Truncation(usize),
    #[error("site decoherence is not classical: max |Im D| = {0:e}")]
    NotClassical(f64),
}

/// Global site index: all causets of levels `1..=N` in level-major canonical order.
pub type Pair = (usize, usize);

/// `D(x,y)` for all causets with `|x|,|y| ≤ N`.
#[derive(Clone, Debug)]
pub struct SiteDecoherence<T: Real> {
    n: usize,
    offsets: Vec<usize>,
    table: DMatrix<Complex<T>>,
}

impl<T: Real> SiteDecoherence<T> {
    /// `D(x,y) = D_N(A_x, A_y)` with `A_x = {ω ∈ Ω_N : ω_{|x|} = x}`.
    pub fn from_process<P: Process<T> + ?Sized>(process: &P, n: usize) -> Result<Self, EinsteinError> {
        let growth = process.growth();
        if n < 1 {
            return Err(EinsteinError::Truncation(n));
        }
        let rho = process.operator(n)?;
        let paths = growth.paths(n)?;
        let mut offsets = vec![0];
        for k in 1..=n {
            offsets.push(offsets[k - 1] + growth.level(k)?.len());
        }
        let total = offsets[n];
        let zero = Complex::new(T::zero(), T::zero());
        let offs = &offsets;
        let globals = |p: usize| (1..=n).map(move |k| offs[k - 1] + paths.at(p, k));
        // M[x][ω′] = Σ_{ω ∋ x} D_N(ω, ω′), then D(x,y) = Σ_{ω′ ∋ y} M[x][ω′]
        let mut partial = DMatrix::from_element(total, paths.len(), zero);
        for w in 0..paths.len() {
            for wp in 0..paths.len() {
                let v = rho.entry(w, wp);
                if v == zero {
                    continue;
                }
                for x in globals(w) {
                    partial[(x, wp)] += v;
                }
            }
        }
        let mut table = DMatrix::from_element(total, total, zero);
        for wp in 0..paths.len() {
            for y in globals(wp) {
                for x in 0..total {
                    table[(x, y)] += partial[(x, wp)];
                }
            }
        }
        Ok(SiteDecoherence { n, offsets, table })
    }

    pub fn truncation(&self) -> usize {
        self.n
    }

    pub fn num_sites(&self) -> usize {
        self.offsets[self.n]
    }

    pub fn global(&self, site: SiteId) -> usize {
        self.offsets[site.level - 1] + site.index
    }

    pub fn site(&self, g: usize) -> SiteId {
        let level = self.offsets.partition_point(|&o| o <= g);
        SiteId { level, index: g - self.offsets[level - 1] }
    }

    pub fn level_of(&self, g: usize) -> usize {
        self.offsets.partition_point(|&o| o <= g)
    }

    /// Global indices of the causets of level `k`.
    pub fn level_range(&self, k: usize) -> std::ops::Range<usize> {
        self.offsets[k - 1]..self.offsets[k]
    }

    pub fn d(&self, x: usize, y: usize) -> Complex<T> {
        self.table[(x, y)]
    }

    /// `μ(x) = D(x,x)`.
    pub fn mu(&self, x: usize) -> T {
        self.table[(x, x)].re
    }

    pub fn matrix(&self) -> &DMatrix<Complex<T>> {
        &self.table
    }

    pub fn hermitian_residual(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.num_sites() {
            for j in 0..self.num_sites() {
                worst = worst.max(cabs(self.table[(i, j)] - self.table[(j, i)].conj()));
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> T {
        min_hermitian_eigenvalue(&self.table)
    }

    /// Max `|D(x,y)|` difference to another site decoherence over the common sites.
    pub fn difference(&self, other: &SiteDecoherence<T>) -> T {
        let k = self.num_sites().min(other.num_sites());
        let mut worst = T::zero();
        for i in 0..k {
            for j in 0..k {
                worst = worst.max(cabs(self.table[(i, j)] - other.table[(i, j)]));
            }
        }
        worst
    }

    /// Whether `(x,y)` lies in the region where the operators are faithful:
    /// `2 ≤ |x|,|y|` and `|x|+1, |y|+1 ≤ N`.
    pub fn is_interior(&self, (x, y): Pair) -> bool {
        let (lx, ly) = (self.level_of(x), self.level_of(y));
        lx >= 2 && ly >= 2 && lx < self.n && ly < self.n
    }

    /// All interior basis pairs in index order.
    pub fn interior_pairs(&self) -> Vec<Pair> {
        let range = if self.n >= 3 { self.offsets[1]..self.offsets[self.n - 1] } else { 0..0 };
        range.clone().flat_map(|x| range.clone().map(move |y| (x, y))).collect()
    }
}

/// Global site indices along a path, one per level `1..=N`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathSites(Vec<usize>);

impl PathSites {
    pub fn new<T: Real>(sd: &SiteDecoherence<T>, path: &Path) -> Result<PathSites, EinsteinError> {
        if path.len() < sd.n {
            return Err(EinsteinError::ShortPath { len: path.len(), n: sd.n });
        }
        Ok(PathSites((1..=sd.n).map(|k| sd.global(path.site(k))).collect()))
    }

    /// Site at 1-based level `k`.
    pub fn at(&self, k: usize) -> usize {
        self.0[k - 1]
    }

    pub fn contains<T: Real>(&self, sd: &SiteDecoherence<T>, x: usize) -> bool {
        self.0[sd.level_of(x) - 1] == x
    }
}

/// A sparse linear operator on functions of site pairs, stored by columns:
/// source basis pair `e_x ⊗ e_y` → list of `(target pair, coefficient)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparsePairOperator<T: Real> {
    columns: BTreeMap<Pair, BTreeMap<Pair, Complex<T>>>,
}

impl<T: Real> Default for SparsePairOperator<T> {
    fn default() -> Self {
        SparsePairOperator { columns: BTreeMap::new() }
    }
}

impl<T: Real> SparsePairOperator<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `c` to the coefficient of `target` in the image of `source`.
    pub fn add_entry(&mut self, target: Pair, source: Pair, c: Complex<T>) {
        *self.columns.entry(source).or_default().entry(target).or_insert(Complex::new(T::zero(), T::zero())) += c;
    }

    pub fn entry(&self, target: Pair, source: Pair) -> Complex<T> {
        self.columns
            .get(&source)
            .and_then(|col| col.get(&target))
            .copied()
            .unwrap_or(Complex::new(T::zero(), T::zero()))
    }

    /// Image of the basis vector `e_x ⊗ e_y`, without zero coefficients.
    pub fn apply_basis(&self, source: Pair) -> Vec<(Pair, Complex<T>)> {
        let zero = Complex::new(T::zero(), T::zero());
        self.columns
            .get(&source)
            .map(|col| col.iter().filter(|(_, c)| **c != zero).map(|(t, c)| (*t, *c)).collect())
            .unwrap_or_default()
    }

    /// Image of a finitely supported function.
    pub fn apply(&self, f: &BTreeMap<Pair, Complex<T>>) -> BTreeMap<Pair, Complex<T>> {
        let mut out: BTreeMap<Pair, Complex<T>> = BTreeMap::new();
        for (src, fv) in f {
            if let Some(col) = self.columns.get(src) {
                for (t, c) in col {
                    *out.entry(*t).or_insert(Complex::new(T::zero(), T::zero())) += *c * *fv;
                }
            }
        }
        out
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &SparsePairOperator<T>) -> SparsePairOperator<T> {
        let mut out = SparsePairOperator::new();
        for (src, col) in &other.columns {
            for (mid, c1) in col {
                if let Some(col2) = self.columns.get(mid) {
                    for (t, c2) in col2 {
                        out.add_entry(*t, *src, *c2 * *c1);
                    }
                }
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> SparsePairOperator<T> {
        let mut out = SparsePairOperator::new();
        for (src, col) in &self.columns {
            for (t, c) in col {
                out.add_entry(*src, *t, c.conj());
            }
        }
        out
    }

    pub fn scaled(&self, s: Complex<T>) -> SparsePairOperator<T> {
        let mut out = self.clone();
        for col in out.columns.values_mut() {
            for c in col.values_mut() {
                *c *= s;
            }
        }
        out
    }

    pub fn plus(&self, other: &SparsePairOperator<T>) -> SparsePairOperator<T> {
        let mut out = self.clone();
        for (src, col) in &other.columns {
            for (t, c) in col {
                out.add_entry(*t, *src, *c);
            }
        }
        out
    }

    pub fn minus(&self, other: &SparsePairOperator<T>) -> SparsePairOperator<T> {
        self.plus(&other.scaled(Complex::new(-T::one(), T::zero())))
    }

    /// Keeps only the targets selected by `keep`.
    pub fn restrict_targets(&self, keep: impl Fn(Pair) -> bool) -> SparsePairOperator<T> {
        let mut out = SparsePairOperator::new();
        for (src, col) in &self.columns {
            for (t, c) in col {
                if keep(*t) {
                    out.add_entry(*t, *src, *c);
                }
            }
        }
        out
    }

    /// All stored `(target, source, coefficient)` triples.
    pub fn entries(&self) -> impl Iterator<Item = (Pair, Pair, Complex<T>)> + '_ {
        self.columns.iter().flat_map(|(s, col)| col.iter().map(move |(t, c)| (*t, *s, *c)))
    }

    pub fn sources(&self) -> impl Iterator<Item = Pair> + '_ {
        self.columns.keys().copied()
    }

    /// Max coefficient of `self − other` over the given source columns.
    pub fn max_difference_on(&self, other: &SparsePairOperator<T>, sources: &[Pair]) -> T {
        let mut worst = T::zero();
        for s in sources {
            let mut targets: Vec<Pair> = self.columns.get(s).map(|c| c.keys().copied().collect()).unwrap_or_default();
            if let Some(c) = other.columns.get(s) {
                targets.extend(c.keys().copied());
            }
            for t in targets {
                worst = worst.max(cabs(self.entry(t, *s) - other.entry(t, *s)));
            }
        }
        worst
    }

    /// Max coefficient over the given source columns.
    pub fn max_abs_on(&self, sources: &[Pair]) -> T {
        self.max_difference_on(&SparsePairOperator::new(), sources)
    }

    /// Max coefficient over all entries.
    pub fn max_abs(&self) -> T {
        self.entries().fold(T::zero(), |w, (_, _, c)| w.max(cabs(c)))
    }
}

/// The two paths an operator is built along, as global site indices.
struct PathPair {
    w: PathSites,
    wp: PathSites,
}

impl PathPair {
    fn new<T: Real>(sd: &SiteDecoherence<T>, omega: &Path, omega_prime: &Path) -> Result<PathPair, EinsteinError> {
        if sd.n < 2 {
            return Err(EinsteinError::Truncation(sd.n));
        }
        Ok(PathPair { w: PathSites::new(sd, omega)?, wp: PathSites::new(sd, omega_prime)? })
    }

    /// Rows `(u,v)` with `2 ≤ |u|,|v| ≤ N`, `u` on `a` and `v` on `b`.
    fn rows<'a>(a: &'a PathSites, b: &PathSites, n: usize) -> impl Iterator<Item = (usize, usize, usize, usize)> + 'a {
        let b = b.clone();
        (2..=n).flat_map(move |i| {
            let b = b.clone();
            (2..=n).map(move |j| (i, j, a.at(i), b.at(j)))
        })
    }
}

/// `∇_{ω,ω′} f(x,y) = [D(ω_{|x|−1},ω′_{|y|−1}) f(x,y) − D(x,y) f(ω_{|x|−1},ω′_{|y|−1})] δ_{x,ω_{|x|}} δ_{y,ω′_{|y|}}`.
pub fn nabla<T: Real>(sd: &SiteDecoherence<T>, omega: &Path, omega_prime: &Path) -> Result<SparsePairOperator<T>, EinsteinError> {
    let pp = PathPair::new(sd, omega, omega_prime)?;
    let mut op = SparsePairOperator::new();
    for (i, j, u, v) in PathPair::rows(&pp.w, &pp.wp, sd.n) {
        let (pu, pv) = (pp.w.at(i - 1), pp.wp.at(j - 1));
        op.add_entry((u, v), (u, v), sd.d(pu, pv));
        op.add_entry((u, v), (pu, pv), -sd.d(u, v));
    }
    Ok(op)
}

/// `ℛ_{ω,ω′} = ∇_{ω,ω′} − ∇_{ω′,ω}`.
pub fn curvature<T: Real>(sd: &SiteDecoherence<T>, omega: &Path, omega_prime: &Path) -> Result<SparsePairOperator<T>, EinsteinError> {
    Ok(nabla(sd, omega, omega_prime)?.minus(&nabla(sd, omega_prime, omega)?))
}

/// `𝒟_{ω,ω′} f(x,y) = D(x,y) [f(ω′_{|x|−1},ω_{|y|−1}) δ_{x,ω′_{|x|}} δ_{y,ω_{|y|}} − f(ω_{|x|−1},ω′_{|y|−1}) δ_{x,ω_{|x|}} δ_{y,ω′_{|y|}}]`.
pub fn metric_op<T: Real>(sd: &SiteDecoherence<T>, omega: &Path, omega_prime: &Path) -> Result<SparsePairOperator<T>, EinsteinError> {
    let pp = PathPair::new(sd, omega, omega_prime)?;
    let mut op = SparsePairOperator::new();
    for (i, j, u, v) in PathPair::rows(&pp.wp, &pp.w, sd.n) {
        op.add_entry((u, v), (pp.wp.at(i - 1), pp.w.at(j - 1)), sd.d(u, v));
    }
    for (i, j, u, v) in PathPair::rows(&pp.w, &pp.wp, sd.n) {
        op.add_entry((u, v), (pp.w.at(i - 1), pp.wp.at(j - 1)), -sd.d(u, v));
    }
    Ok(op)
}

/// `𝒯_{ω,ω′} f(x,y) = [D(ω_{|x|−1},ω′_{|y|−1}) δ_{x,ω_{|x|}} δ_{y,ω′_{|y|}} − D(ω′_{|x|−1},ω_{|y|−1}) δ_{x,ω′_{|x|}} δ_{y,ω_{|y|}}] f(x,y)`.
pub fn mass_energy_op<T: Real>(
    sd: &SiteDecoherence<T>,
    omega: &Path,
    omega_prime: &Path,
) -> Result<SparsePairOperator<T>, EinsteinError> {
    let pp = PathPair::new(sd, omega, omega_prime)?;
    let mut op = SparsePairOperator::new();
    for (i, j, u, v) in PathPair::rows(&pp.w, &pp.wp, sd.n) {
        op.add_entry((u, v), (u, v), sd.d(pp.w.at(i - 1), pp.wp.at(j - 1)));
    }
    for (i, j, u, v) in PathPair::rows(&pp.wp, &pp.w, sd.n) {
        op.add_entry((u, v), (u, v), -sd.d(pp.wp.at(i - 1), pp.w.at(j - 1)));
    }
    Ok(op)
}

/// `𝒟*_{ω,ω′}`, the conjugate transpose of the metric operator.
pub fn adjoint_metric<T: Real>(sd: &SiteDecoherence<T>, omega: &Path, omega_prime: &Path) -> Result<SparsePairOperator<T>, EinsteinError> {
    Ok(metric_op(sd, omega, omega_prime)?.adjoint())
}

/// Position of a basis pair relative to the two paths.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PairCase {
    /// `(ω,ω′)` pair only.
    Forward,
    /// `(ω′,ω)` pair only.
    Backward,
    /// Both.
    Both,
    Neither,
}

fn classify<T: Real>(sd: &SiteDecoherence<T>, pp: &PathPair, (x, y): Pair) -> PairCase {
    let fwd = pp.w.contains(sd, x) && pp.wp.contains(sd, y);
    let bwd = pp.wp.contains(sd, x) && pp.w.contains(sd, y);
    match (fwd, bwd) {
        (true, false) => PairCase::Forward,
        (false, true) => PairCase::Backward,
        (true, true) => PairCase::Both,
        (false, false) => PairCase::Neither,
    }
}

/// Case analysis of the metric, mass-energy and adjoint metric operators on
/// basis vectors, for the pair `(x,y)` with `2 ≤ |x|,|y| < N`.
pub struct ClosedForms<'a, T: Real> {
    sd: &'a SiteDecoherence<T>,
    pp: PathPair,
}

impl<'a, T: Real> ClosedForms<'a, T> {
    pub fn new(sd: &'a SiteDecoherence<T>, omega: &Path, omega_prime: &Path) -> Result<Self, EinsteinError> {
        Ok(ClosedForms { sd, pp: PathPair::new(sd, omega, omega_prime)? })
    }

    pub fn case(&self, pair: Pair) -> PairCase {
        classify(self.sd, &self.pp, pair)
    }

    fn levels(&self, (x, y): Pair) -> (usize, usize) {
        (self.sd.level_of(x), self.sd.level_of(y))
    }

    /// `(ω_{|x|+1}, ω′_{|y|+1})`.
    pub fn forward_successor(&self, pair: Pair) -> Pair {
        let (lx, ly) = self.levels(pair);
        (self.pp.w.at(lx + 1), self.pp.wp.at(ly + 1))
    }

    /// `(ω′_{|x|+1}, ω_{|y|+1})`.
    pub fn backward_successor(&self, pair: Pair) -> Pair {
        let (lx, ly) = self.levels(pair);
        (self.pp.wp.at(lx + 1), self.pp.w.at(ly + 1))
    }

    /// `(ω_{|x|−1}, ω′_{|y|−1})`.
    pub fn forward_predecessor(&self, pair: Pair) -> Pair {
        let (lx, ly) = self.levels(pair);
        (self.pp.w.at(lx - 1), self.pp.wp.at(ly - 1))
    }

    /// `(ω′_{|x|−1}, ω_{|y|−1})`.
    pub fn backward_predecessor(&self, pair: Pair) -> Pair {
        let (lx, ly) = self.levels(pair);
        (self.pp.wp.at(lx - 1), self.pp.w.at(ly - 1))
    }

    fn d(&self, (x, y): Pair) -> Complex<T> {
        self.sd.d(x, y)
    }

    /// `𝒟 e_x⊗e_y` by cases (a), (b), (c).
    pub fn metric(&self, pair: Pair) -> Vec<(Pair, Complex<T>)> {
        let f = self.forward_successor(pair);
        let b = self.backward_successor(pair);
        match self.case(pair) {
            PairCase::Forward => vec![(f, -self.d(f))],
            PairCase::Backward => vec![(b, self.d(b))],
            PairCase::Both => vec![(b, self.d(b)), (f, -self.d(f))],
            PairCase::Neither => Vec::new(),
        }
    }

    /// `𝒯 e_x⊗e_y` by cases (a), (b), (c).
    pub fn mass_energy(&self, pair: Pair) -> Vec<(Pair, Complex<T>)> {
        let f = self.forward_predecessor(pair);
        let b = self.backward_predecessor(pair);
        match self.case(pair) {
            PairCase::Forward => vec![(pair, self.d(f))],
            PairCase::Backward => vec![(pair, -self.d(b))],
            PairCase::Both => vec![(pair, self.d(f) - self.d(b))],
            PairCase::Neither => Vec::new(),
        }
    }

    /// `𝒟* e_x⊗e_y` by cases (a), (b), (c).
    pub fn adjoint_metric(&self, pair: Pair) -> Vec<(Pair, Complex<T>)> {
        let dc = self.d(pair).conj();
        let f = self.forward_predecessor(pair);
        let b = self.backward_predecessor(pair);
        match self.case(pair) {
            PairCase::Forward => vec![(f, -dc)],
            PairCase::Backward => vec![(b, dc)],
            PairCase::Both => vec![(b, dc), (f, -dc)],
            PairCase::Neither => Vec::new(),
        }
    }
}

/// Max coefficient difference between an operator column and a list of terms.
fn column_residual<T: Real>(op: &SparsePairOperator<T>, source: Pair, expected: &[(Pair, Complex<T>)]) -> T {
    let mut want = SparsePairOperator::new();
    for (t, c) in expected {
        want.add_entry(*t, source, *c);
    }
    op.max_difference_on(&want, &[source])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BasisActionReport {
    pub truncation: usize,
    pub interior_pairs: usize,
    /// Interior pairs in cases (a), (b), (c) and off both paths.
    pub case_counts: [usize; 4],
    /// Case-(c) pairs of the form `(x,x)`.
    pub entangled_pairs: usize,
    pub metric_residual: f64,
    pub mass_energy_residual: f64,
    pub adjoint_residual: f64,
    /// max `|⟨𝒟f,g⟩ − ⟨f,𝒟*g⟩|` over interior basis vectors, with `𝒟*` from the case formulas.
    pub adjoint_identity_residual: f64,
    /// Largest coefficient of `ℛ − (𝒟 + 𝒯)` on interior columns.
    pub einstein_residual: f64,
    /// Largest coefficient of `∇_{ω,ω′} D` on interior pairs.
    pub nabla_d_residual: f64,
    pub passed: bool,
}

/// Checks the sparse operators against the case formulas on every interior basis pair.
pub fn verify_basis_action<T: Real>(
    sd: &SiteDecoherence<T>,
    omega: &Path,
    omega_prime: &Path,
    tol: T,
) -> Result<BasisActionReport, EinsteinError> {
    let cf = ClosedForms::new(sd, omega, omega_prime)?;
    let dm = metric_op(sd, omega, omega_prime)?;
    let te = mass_energy_op(sd, omega, omega_prime)?;
    let ds = dm.adjoint();
    let r = curvature(sd, omega, omega_prime)?;
    let interior = sd.interior_pairs();
    let mut counts = [0usize; 4];
    let mut entangled = 0;
    let (mut rm, mut rt, mut ra, mut rid) = (T::zero(), T::zero(), T::zero(), T::zero());
    let mut adjoint_cf = SparsePairOperator::new();
    for &pair in &interior {
        let case = cf.case(pair);
        counts[match case {
            PairCase::Forward => 0,
            PairCase::Backward => 1,
            PairCase::Both => 2,
            PairCase::Neither => 3,
        }] += 1;
        if case == PairCase::Both && pair.0 == pair.1 {
            entangled += 1;
        }
        rm = rm.max(column_residual(&dm, pair, &cf.metric(pair)));
        rt = rt.max(column_residual(&te, pair, &cf.mass_energy(pair)));
        let adj = cf.adjoint_metric(pair);
        ra = ra.max(column_residual(&ds, pair, &adj));
        for (t, c) in adj {
            adjoint_cf.add_entry(t, pair, c);
        }
    }
    for &f in &interior {
        for &g in &interior {
            // ⟨𝒟 e_f, e_g⟩ = conj(𝒟[g][f]) and ⟨e_f, 𝒟* e_g⟩ = 𝒟*[f][g]
            rid = rid.max(cabs(dm.entry(g, f).conj() - adjoint_cf.entry(f, g)));
        }
    }
    let einstein = r.minus(&dm.plus(&te)).max_abs_on(&interior);
    let nabla_d = nabla_applied_to_d(sd, omega, omega_prime)?;
    let passed = [rm, rt, ra, rid, einstein, nabla_d].iter().all(|v| *v <= tol);
    Ok(BasisActionReport {
        truncation: sd.n,
        interior_pairs: interior.len(),
        case_counts: counts,
        entangled_pairs: entangled,
        metric_residual: rm.as_f64(),
        mass_energy_residual: rt.as_f64(),
        adjoint_residual: ra.as_f64(),
        adjoint_identity_residual: rid.as_f64(),
        einstein_residual: einstein.as_f64(),
        nabla_d_residual: nabla_d.as_f64(),
        passed,
    })
}

/// Largest value of `∇_{ω,ω′} D` over interior pairs, with `D` as a function on pairs.
pub fn nabla_applied_to_d<T: Real>(sd: &SiteDecoherence<T>, omega: &Path, omega_prime: &Path) -> Result<T, EinsteinError> {
    let op = nabla(sd, omega, omega_prime)?;
    let mut f = BTreeMap::new();
    for x in 0..sd.num_sites() {
        for y in 0..sd.num_sites() {
            f.insert((x, y), sd.d(x, y));
        }
    }
    let out = op.apply(&f);
    Ok(out.iter().filter(|(p, _)| sd.is_interior(**p)).fold(T::zero(), |w, (_, c)| w.max(cabs(*c))))
}

/// Contracted operators `ℛ̂`, `𝒟̂`, `𝒯̂` from pair space into site space. Target
/// `(x,x)` stands for `e_x`.
#[derive(Clone, Debug)]
pub struct ContractedOps<T: Real> {
    pub curvature: SparsePairOperator<T>,
    pub metric: SparsePairOperator<T>,
    pub mass_energy: SparsePairOperator<T>,
    /// `𝒯̂_{ω′,ω}` for the variant with the path order swapped.
    pub mass_energy_swapped: SparsePairOperator<T>,
}

pub fn contracted_ops<T: Real>(sd: &SiteDecoherence<T>, omega: &Path, omega_prime: &Path) -> Result<ContractedOps<T>, EinsteinError> {
    let diag = |p: Pair| p.0 == p.1;
    Ok(ContractedOps {
        curvature: curvature(sd, omega, omega_prime)?.restrict_targets(diag),
        metric: metric_op(sd, omega, omega_prime)?.restrict_targets(diag),
        mass_energy: mass_energy_op(sd, omega, omega_prime)?.restrict_targets(diag),
        mass_energy_swapped: mass_energy_op(sd, omega_prime, omega)?.restrict_targets(diag),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContractedReport {
    /// `ℛ̂ − (𝒟̂ + 𝒯̂_{ω,ω′})` on interior columns.
    pub identity_residual: f64,
    /// `ℛ̂ − (𝒟̂ + 𝒯̂_{ω′,ω})` on interior columns; nonzero unless `𝒯̂` vanishes.
    pub swapped_variant_residual: f64,
    /// `𝒟̂` against its `μ(x)` form.
    pub metric_form_residual: f64,
    /// `𝒯̂` against its `2i Im D` form.
    pub mass_energy_form_residual: f64,
    pub max_mass_energy: f64,
    pub passed: bool,
}

pub fn verify_contracted<T: Real>(
    sd: &SiteDecoherence<T>,
    omega: &Path,
    omega_prime: &Path,
    tol: T,
) -> Result<ContractedReport, EinsteinError> {
    let ops = contracted_ops(sd, omega, omega_prime)?;
    let pp = PathPair::new(sd, omega, omega_prime)?;
    let interior = sd.interior_pairs();
    let identity = ops.curvature.minus(&ops.metric.plus(&ops.mass_energy)).max_abs_on(&interior);
    let swapped = ops.curvature.minus(&ops.metric.plus(&ops.mass_energy_swapped)).max_abs_on(&interior);
    let mut metric_form = SparsePairOperator::new();
    let mut mass_form = SparsePairOperator::new();
    for k in 2..=sd.n {
        let (x, xp) = (pp.w.at(k), pp.wp.at(k));
        if x != xp {
            continue;
        }
        let (a, b) = (pp.w.at(k - 1), pp.wp.at(k - 1));
        let mu = Complex::new(sd.mu(x), T::zero());
        if a != b {
            metric_form.add_entry((x, x), (b, a), mu);
            metric_form.add_entry((x, x), (a, b), -mu);
        }
        let im = sd.d(a, b).im;
        mass_form.add_entry((x, x), (x, x), Complex::new(T::zero(), im + im));
    }
    let all: Vec<Pair> = (0..sd.num_sites()).flat_map(|x| (0..sd.num_sites()).map(move |y| (x, y))).collect();
    let metric_res = ops.metric.max_difference_on(&metric_form, &all);
    let mass_res = ops.mass_energy.max_difference_on(&mass_form, &all);
    let max_mass = ops.mass_energy.max_abs();
    Ok(ContractedReport {
        identity_residual: identity.as_f64(),
        swapped_variant_residual: swapped.as_f64(),
        metric_form_residual: metric_res.as_f64(),
        mass_energy_form_residual: mass_res.as_f64(),
        max_mass_energy: max_mass.as_f64(),
        passed: identity <= tol && metric_res <= tol && mass_res <= tol,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CommutatorWitness {
    pub source: Pair,
    pub d_xy: f64,
    pub d_successor: f64,
    /// Largest coefficient of the commutator applied to the source.
    pub commutator_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CommutatorReport {
    /// Case-(a) interior pairs checked for each product form.
    pub checked: [usize; 4],
    pub dds_residual: f64,
    pub dsd_residual: f64,
    pub dt_residual: f64,
    pub td_residual: f64,
    /// First case-(a) pair on which `𝒟𝒟* ≠ 𝒟*𝒟`.
    pub metric_adjoint_witness: Option<CommutatorWitness>,
    /// First case-(a) pair on which `𝒟𝒯 ≠ 𝒯𝒟`.
    pub metric_mass_witness: Option<CommutatorWitness>,
    pub passed: bool,
}

/// Evaluates the four products on case-(a) pairs and looks for non-commuting witnesses.
/// Each product form is compared only where the intermediate pair is also case (a).
pub fn commutator_report<T: Real>(
    sd: &SiteDecoherence<T>,
    omega: &Path,
    omega_prime: &Path,
    tol: T,
) -> Result<CommutatorReport, EinsteinError> {
    let cf = ClosedForms::new(sd, omega, omega_prime)?;
    let dm = metric_op(sd, omega, omega_prime)?;
    let ds = dm.adjoint();
    let te = mass_energy_op(sd, omega, omega_prime)?;
    let (dds, dsd, dt, td) = (dm.compose(&ds), ds.compose(&dm), dm.compose(&te), te.compose(&dm));
    let mut checked = [0usize; 4];
    let mut res = [T::zero(); 4];
    let mut wit_adj = None;
    let mut wit_mass = None;
    for pair in sd.interior_pairs() {
        if cf.case(pair) != PairCase::Forward {
            continue;
        }
        let succ = cf.forward_successor(pair);
        let pred = cf.forward_predecessor(pair);
        let (dxy, dsucc, dpred) = (sd.d(pair.0, pair.1), sd.d(succ.0, succ.1), sd.d(pred.0, pred.1));
        let succ_forward = cf.case(succ) == PairCase::Forward;
        if cf.case(pred) == PairCase::Forward {
            checked[0] += 1;
            let v = Complex::new(cabs(dxy) * cabs(dxy), T::zero());
            res[0] = res[0].max(column_residual(&dds, pair, &[(pair, v)]));
        }
        if succ_forward {
            checked[1] += 1;
            let v = Complex::new(cabs(dsucc) * cabs(dsucc), T::zero());
            res[1] = res[1].max(column_residual(&dsd, pair, &[(pair, v)]));
        }
        checked[2] += 1;
        res[2] = res[2].max(column_residual(&dt, pair, &[(succ, -(dsucc * dpred))]));
        if succ_forward {
            checked[3] += 1;
            res[3] = res[3].max(column_residual(&td, pair, &[(succ, -(dsucc * dxy))]));
        }
        let comm_adj = column_residual(&dds.minus(&dsd), pair, &[]);
        if comm_adj > tol && wit_adj.is_none() {
            wit_adj = Some(CommutatorWitness {
                source: pair,
                d_xy: cabs(dxy).as_f64(),
                d_successor: cabs(dsucc).as_f64(),
                commutator_norm: comm_adj.as_f64(),
            });
        }
        let comm_mass = column_residual(&dt.minus(&td), pair, &[]);
        if comm_mass > tol && wit_mass.is_none() {
            wit_mass = Some(CommutatorWitness {
                source: pair,
                d_xy: cabs(dxy).as_f64(),
                d_successor: cabs(dsucc).as_f64(),
                commutator_norm: comm_mass.as_f64(),
            });
        }
    }
    Ok(CommutatorReport {
        checked,
        dds_residual: res[0].as_f64(),
        dsd_residual: res[1].as_f64(),
        dt_residual: res[2].as_f64(),
        td_residual: res[3].as_f64(),
        metric_adjoint_witness: wit_adj,
        metric_mass_witness: wit_mass,
        passed: res.iter().all(|r| *r <= tol),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlatnessReport {
    pub truncation: usize,
    /// Causets with more than one producer and `μ(x) ≠ 0`, with `μ(x)`.
    pub multi_producer_sites: Vec<(String, f64)>,
    /// Path pairs (as indices into Ω_N) on which the metric operator is nonzero.
    pub nonflat_witness: Option<(usize, usize, f64)>,
    pub sampled_pairs: usize,
    /// `Σ_{x ∈ 𝒫_n} μ(x)` for each level.
    pub level_sums: Vec<(usize, f64)>,
    /// max `|D(x,y)|` over pairs where neither causet grows into the other.
    pub incomparable_max: f64,
    pub max_imaginary: f64,
    /// max coefficient of `𝒯̂` over the sampled path pairs.
    pub contracted_mass_energy_max: f64,
    pub passed: bool,
}

/// Flatness analysis for a classical process.
pub fn flatness_analysis<T: Real, R: Rng>(
    sd: &SiteDecoherence<T>,
    growth: &Growth,
    samples: usize,
    rng: &mut R,
    tol: T,
) -> Result<FlatnessReport, EinsteinError> {
    let n = sd.n;
    let max_imag = sd.table.iter().fold(T::zero(), |w, z| w.max(z.im.abs()));
    if max_imag > tol {
        return Err(EinsteinError::NotClassical(max_imag.as_f64()));
    }
    let mut multi = Vec::new();
    for g in 0..sd.num_sites() {
        let site = sd.site(g);
        if site.level >= 2 && growth.level(site.level)?.producers[site.index].len() > 1 && sd.mu(g).abs() > tol {
            multi.push((growth.causet(site).to_literal(), sd.mu(g).as_f64()));
        }
    }
    let level_sums: Vec<(usize, f64)> = (1..=n)
        .map(|k| (k, sd.level_range(k).fold(T::zero(), |s, x| s + sd.mu(x)).as_f64()))
        .collect();
    let mut incomparable = T::zero();
    for x in 0..sd.num_sites() {
        for y in 0..sd.num_sites() {
            let (sx, sy) = (sd.site(x), sd.site(y));
            if !growth.reachable(sx, sy) && !growth.reachable(sy, sx) {
                incomparable = incomparable.max(cabs(sd.d(x, y)));
            }
        }
    }
    let paths = growth.paths(n)?;
    let mut witness = None;
    let mut mass_max = T::zero();
    for _ in 0..samples {
        let (i, j) = (rng.gen_range(0..paths.len()), rng.gen_range(0..paths.len()));
        let (w, wp) = (paths.path(i), paths.path(j));
        let dm = metric_op(sd, &w, &wp)?;
        let m = dm.max_abs();
        if m > tol && witness.is_none() {
            witness = Some((i, j, m.as_f64()));
        }
        mass_max = mass_max.max(contracted_ops(sd, &w, &wp)?.mass_energy.max_abs());
    }
    let sums_ok = level_sums_ok(&level_sums, tol.as_f64());
    Ok(FlatnessReport {
        truncation: n,
        passed: sums_ok && incomparable <= tol && mass_max <= tol,
        multi_producer_sites: multi,
        nonflat_witness: witness,
        sampled_pairs: samples,
        level_sums,
        incomparable_max: incomparable.as_f64(),
        max_imaginary: max_imag.as_f64(),
        contracted_mass_energy_max: mass_max.as_f64(),
    })
}

fn level_sums_ok(sums: &[(usize, f64)], tol: f64) -> bool {
    sums.iter().all(|(_, s)| (s - 1.0).abs() <= tol)
}

/// A uniformly random walk of length `n` through the growth process.
pub fn random_path<R: Rng>(growth: &Growth, n: usize, rng: &mut R) -> Result<Path, GrowthError> {
    let mut entries = vec![0];
    for k in 1..n {
        let offspring = &growth.level(k)?.offspring[entries[k - 1]];
        entries.push(offspring[rng.gen_range(0..offspring.len())].child);
    }
    growth.level(n)?;
    Ok(Path { entries })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DumpTarget {
    pub pair: [String; 2],
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DumpEntry {
    pub source: [String; 2],
    pub targets: Vec<DumpTarget>,
}

/// Operator in the JSON dump format, nonzero columns in source order.
pub fn dump_operator<T: Real>(op: &SparsePairOperator<T>, sd: &SiteDecoherence<T>, growth: &Growth) -> Vec<DumpEntry> {
    let name = |g: usize| growth.causet(sd.site(g)).to_literal();
    op.sources()
        .filter_map(|s| {
            let targets: Vec<DumpTarget> = op
                .apply_basis(s)
                .into_iter()
                .map(|(t, c)| DumpTarget { pair: [name(t.0), name(t.1)], re: c.re.as_f64(), im: c.im.as_f64() })
                .collect();
            (!targets.is_empty()).then(|| DumpEntry { source: [name(s.0), name(s.1)], targets })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amplitude::{AmplitudeProcess, ClassicalProcess};
    use crate::growth::NamedPath;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn action_site_decoherence_values() {
        let g = Growth::build(4).unwrap();
        let p = AmplitudeProcess::<f64>::action(&g, 1e-10).unwrap();
        let sd = SiteDecoherence::from_process(&p, 3).unwrap();
        assert_eq!(sd.num_sites(), 8);
        let a = [1.0, 0.5, 0.5, -0.5, 0.5, 1.0, 0.25, -0.25];
        for x in 0..8 {
            for y in 0..8 {
                assert!((sd.d(x, y) - Complex::new(a[x] * a[y], 0.0)).norm() < 1e-12);
            }
        }
        assert!((sd.d(3, 6).re + 0.125).abs() < 1e-12);
        let sd4 = SiteDecoherence::from_process(&p, 4).unwrap();
        assert!(sd.difference(&sd4) < 1e-12);
        assert!(sd4.min_eigenvalue() > -1e-10);
        assert_eq!(sd4.site(sd4.global(SiteId { level: 3, index: 4 })), SiteId { level: 3, index: 4 });
    }

    #[test]
    fn einstein_identity_and_cases() {
        let g = Growth::build(5).unwrap();
        let p = AmplitudeProcess::<f64>::action(&g, 1e-10).unwrap();
        let sd = SiteDecoherence::from_process(&p, 5).unwrap();
        let chain = g.named_path(NamedPath::Chain, 5).unwrap();
        let anti = g.named_path(NamedPath::Antichain, 5).unwrap();
        let rep = verify_basis_action(&sd, &chain, &anti, 1e-12).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!(rep.case_counts[0] > 0 && rep.case_counts[1] > 0 && rep.case_counts[2] == 0);
        let same = verify_basis_action(&sd, &chain, &chain, 1e-12).unwrap();
        assert!(same.passed);
        assert_eq!(curvature(&sd, &chain, &chain).unwrap().max_abs(), 0.0);
        let r1 = curvature(&sd, &chain, &anti).unwrap();
        let r2 = curvature(&sd, &anti, &chain).unwrap();
        assert!(r1.plus(&r2).max_abs() < 1e-15);
        let c = verify_contracted(&sd, &chain, &anti, 1e-12).unwrap();
        assert!(c.passed, "{c:?}");
    }

    #[test]
    fn commutators_have_witness() {
        let g = Growth::build(4).unwrap();
        let p = AmplitudeProcess::<f64>::action(&g, 1e-10).unwrap();
        let sd = SiteDecoherence::from_process(&p, 4).unwrap();
        let chain = g.named_path(NamedPath::Chain, 4).unwrap();
        let anti = g.named_path(NamedPath::Antichain, 4).unwrap();
        let rep = commutator_report(&sd, &chain, &anti, 1e-12).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!(rep.metric_adjoint_witness.is_some());
        let trivial = commutator_report(&sd, &chain, &chain, 1e-12).unwrap();
        assert_eq!(trivial.checked, [0, 0, 0, 0]);
    }

    #[test]
    fn classical_flatness() {
        let g = Growth::build(5).unwrap();
        let p = ClassicalProcess::<f64>::uniform(&g, 1e-10).unwrap();
        let sd = SiteDecoherence::from_process(&p, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rep = flatness_analysis(&sd, &g, 10, &mut rng, 1e-10).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!(rep.multi_producer_sites.iter().any(|(lit, mu)| lit == "3;0<1" && (mu - 5.0 / 12.0).abs() < 1e-12));
        let x2 = sd.global(SiteId { level: 2, index: 0 });
        let x8 = sd.global(g.locate(&crate::causet::Causet::antichain(3)).unwrap());
        assert_eq!(sd.d(x2, x8), Complex::new(0.0, 0.0));
    }

    #[test]
    fn sparse_algebra() {
        let mut a = SparsePairOperator::<f64>::new();
        a.add_entry((1, 1), (0, 0), Complex::new(2.0, 1.0));
        let adj = a.adjoint();
        assert_eq!(adj.entry((0, 0), (1, 1)), Complex::new(2.0, -1.0));
        let prod = adj.compose(&a);
        assert_eq!(prod.apply_basis((0, 0)), vec![((0, 0), Complex::new(5.0, 0.0))]);
        assert_eq!(a.minus(&a).apply_basis((0, 0)), vec![]);
    }
}
