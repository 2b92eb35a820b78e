//! Probability operators on path space, decoherence functionals, q-measures
//! and the checks that relate consecutive levels.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::growth::{ComplementMode, Growth, GrowthError, PathSet, SetSpec};
use crate::scalar::{cabs, cabs2, Complex, Real};

/// Default numerical tolerance for operator validation and identity checks.
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QMeasureError {
    #[error(transparent)]
    Growth(#[from] GrowthError),
    #[error("operator is for level {found}, expected level {expected}")]
    LevelMismatch { expected: usize, found: usize },
    #[error("dimension {found} does not match |Ω_{level}| = {expected}")]
    Dimension { level: usize, expected: usize, found: usize },
    #[error("matrix is not Hermitian at ({i}, {j}): residual {residual:e}")]
    NotHermitian { i: usize, j: usize, residual: f64 },
    #[error("matrix is not positive semidefinite: minimum eigenvalue {min_eigenvalue:e}")]
    NotPositive { min_eigenvalue: f64 },
    #[error("operator is not normalized: D(Ω,Ω) = {re} + {im}i")]
    NotNormalized { re: f64, im: f64 },
    #[error("q-measure {value:e} is negative beyond tolerance")]
    NegativeMeasure { value: f64 },
    #[error("event sets are not mutually disjoint")]
    NotDisjoint,
    #[error("levels {first} and {second} are not consecutive")]
    NotConsecutive { first: usize, second: usize },
    #[error("{0}")]
    Process(String),
}

/// How the decoherence matrix of an operator is stored.
#[derive(Clone, Debug, PartialEq)]
pub enum Representation<T: Real> {
    /// Full decoherence matrix `D[ω][ω′] = D({ω},{ω′})`.
    Dense(DMatrix<Complex<T>>),
    /// `D[ω][ω′] = conj(a(ω)) a(ω′)`.
    RankOne(DVector<Complex<T>>),
    /// `D[ω][ω′] = d(ω) δ_{ω,ω′}`.
    Diagonal(DVector<T>),
}

/// A probability operator on `L₂(Ω_n)`, held through its decoherence matrix.
///
/// The decoherence matrix is the transpose of the operator matrix
/// (`D(A,B) = ⟨ρχ_B, χ_A⟩ = Σ_{ω∈A, ω′∈B} ρ_{ω′ω}`), so it is Hermitian and
/// positive exactly when the operator is.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityOperator<T: Real> {
    level: usize,
    repr: Representation<T>,
    definite: bool,
}

impl<T: Real> ProbabilityOperator<T> {
    /// Validates Hermiticity, positivity and normalization within `tol`.
    pub fn from_matrix(level: usize, matrix: DMatrix<Complex<T>>, tol: T) -> Result<Self, QMeasureError> {
        let op = ProbabilityOperator { level, repr: Representation::Dense(matrix), definite: true };
        op.validate(tol)?;
        Ok(op)
    }

    /// Builds `|a⟩⟨a|`; requires `Σ a = 1` within `tol` up to a phase.
    pub fn rank_one(level: usize, amplitudes: DVector<Complex<T>>, tol: T) -> Result<Self, QMeasureError> {
        let op = ProbabilityOperator { level, repr: Representation::RankOne(amplitudes), definite: true };
        op.check_normalized(tol)?;
        Ok(op)
    }

    /// Diagonal (classical) operator. Negative entries are rejected unless
    /// `allow_signed`, in which case the operator is flagged indefinite.
    pub fn diagonal(level: usize, values: DVector<T>, tol: T, allow_signed: bool) -> Result<Self, QMeasureError> {
        let min = values.iter().copied().fold(T::zero(), |m, v| if v < m { v } else { m });
        if min < -tol && !allow_signed {
            return Err(QMeasureError::NotPositive { min_eigenvalue: min.as_f64() });
        }
        let op = ProbabilityOperator { level, repr: Representation::Diagonal(values), definite: min >= -tol };
        op.check_normalized(tol)?;
        Ok(op)
    }

    /// Wraps a matrix without validation (negative controls, perturbations).
    pub fn from_matrix_unchecked(level: usize, matrix: DMatrix<Complex<T>>) -> Self {
        ProbabilityOperator { level, repr: Representation::Dense(matrix), definite: false }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn representation(&self) -> &Representation<T> {
        &self.repr
    }

    /// False for operators built from signed classical tables or without validation.
    pub fn is_definite(&self) -> bool {
        self.definite
    }

    pub fn dim(&self) -> usize {
        match &self.repr {
            Representation::Dense(m) => m.nrows(),
            Representation::RankOne(a) => a.len(),
            Representation::Diagonal(d) => d.len(),
        }
    }

    /// `D({i},{j})`.
    pub fn entry(&self, i: usize, j: usize) -> Complex<T> {
        match &self.repr {
            Representation::Dense(m) => m[(i, j)],
            Representation::RankOne(a) => a[i].conj() * a[j],
            Representation::Diagonal(d) => {
                if i == j {
                    Complex::new(d[i], T::zero())
                } else {
                    Complex::new(T::zero(), T::zero())
                }
            }
        }
    }

    /// The full decoherence matrix.
    pub fn matrix(&self) -> DMatrix<Complex<T>> {
        match &self.repr {
            Representation::Dense(m) => m.clone(),
            _ => DMatrix::from_fn(self.dim(), self.dim(), |i, j| self.entry(i, j)),
        }
    }

    fn check_set(&self, a: &PathSet) -> Result<(), QMeasureError> {
        if a.level() != self.level {
            return Err(QMeasureError::LevelMismatch { expected: self.level, found: a.level() });
        }
        if a.universe() != self.dim() {
            return Err(QMeasureError::Dimension { level: self.level, expected: self.dim(), found: a.universe() });
        }
        Ok(())
    }

    /// `D_ρ(A,B) = ⟨ρχ_B, χ_A⟩`, conjugate-linear in `A`.
    pub fn decoherence(&self, a: &PathSet, b: &PathSet) -> Result<Complex<T>, QMeasureError> {
        self.check_set(a)?;
        self.check_set(b)?;
        let zero = Complex::new(T::zero(), T::zero());
        Ok(match &self.repr {
            Representation::Dense(m) => {
                let mut acc = zero;
                for i in a.iter() {
                    for j in b.iter() {
                        acc += m[(i, j)];
                    }
                }
                acc
            }
            Representation::RankOne(v) => {
                let sa = a.iter().fold(zero, |s, i| s + v[i]);
                let sb = b.iter().fold(zero, |s, j| s + v[j]);
                sa.conj() * sb
            }
            Representation::Diagonal(d) => Complex::new(a.intersection(b).iter().fold(T::zero(), |s, i| s + d[i]), T::zero()),
        })
    }

    /// `μ_ρ(A) = D_ρ(A,A)`; values within `tol` below zero are clamped to 0.
    pub fn q_measure(&self, a: &PathSet, tol: T) -> Result<T, QMeasureError> {
        let v = self.decoherence(a, a)?.re;
        if v >= T::zero() {
            Ok(v)
        } else if v >= -tol || !self.definite {
            Ok(if self.definite { T::zero() } else { v })
        } else {
            Err(QMeasureError::NegativeMeasure { value: v.as_f64() })
        }
    }

    /// `D(Ω_n, Ω_n)`.
    pub fn total(&self) -> Complex<T> {
        let all = PathSet::full(self.level, self.dim());
        self.decoherence(&all, &all).expect("full set matches the operator")
    }

    fn check_normalized(&self, tol: T) -> Result<(), QMeasureError> {
        let t = self.total();
        if cabs(t - Complex::new(T::one(), T::zero())) > tol {
            return Err(QMeasureError::NotNormalized { re: t.re.as_f64(), im: t.im.as_f64() });
        }
        Ok(())
    }

    /// Smallest eigenvalue of the decoherence matrix.
    pub fn min_eigenvalue(&self) -> T {
        match &self.repr {
            Representation::Dense(m) => min_hermitian_eigenvalue(m),
            Representation::RankOne(_) => T::zero().min(self.norm()),
            Representation::Diagonal(d) => d.iter().copied().fold(T::max_value().unwrap_or(T::one()), |m, v| m.min(v)),
        }
    }

    /// Operator norm; `Σ|a(ω)|²` for rank-one operators.
    pub fn norm(&self) -> T {
        match &self.repr {
            Representation::Dense(m) => {
                let eig = nalgebra::SymmetricEigen::new(m.clone());
                eig.eigenvalues.iter().fold(T::zero(), |acc, v| acc.max(v.abs()))
            }
            Representation::RankOne(a) => a.iter().fold(T::zero(), |s, z| s + cabs2(*z)),
            Representation::Diagonal(d) => d.iter().fold(T::zero(), |acc, v| acc.max(v.abs())),
        }
    }

    /// Checks Hermiticity, positivity and normalization.
    pub fn validate(&self, tol: T) -> Result<(), QMeasureError> {
        if let Representation::Dense(m) = &self.repr {
            if m.nrows() != m.ncols() {
                return Err(QMeasureError::Dimension { level: self.level, expected: m.nrows(), found: m.ncols() });
            }
            for i in 0..m.nrows() {
                for j in i..m.ncols() {
                    let r = cabs(m[(i, j)] - m[(j, i)].conj());
                    if r > tol {
                        return Err(QMeasureError::NotHermitian { i, j, residual: r.as_f64() });
                    }
                }
            }
        }
        let min = self.min_eigenvalue();
        if min < -tol {
            return Err(QMeasureError::NotPositive { min_eigenvalue: min.as_f64() });
        }
        self.check_normalized(tol)
    }

    /// The operator on the previous level induced by summing over one-step
    /// continuations: `D′(ω,ω′) = D((ω→),(ω′→))`.
    pub fn coarse_grain(&self, growth: &Growth) -> Result<ProbabilityOperator<T>, QMeasureError> {
        if self.level < 2 {
            return Err(QMeasureError::Process("level 1 has no previous level".into()));
        }
        let paths = growth.paths(self.level)?;
        if paths.len() != self.dim() {
            return Err(QMeasureError::Dimension { level: self.level, expected: paths.len(), found: self.dim() });
        }
        let prev = growth.paths(self.level - 1)?.len();
        let zero = Complex::new(T::zero(), T::zero());
        let repr = match &self.repr {
            Representation::RankOne(a) => Representation::RankOne(DVector::from_fn(prev, |q, _| {
                paths.children_of(q).fold(zero, |s, p| s + a[p])
            })),
            Representation::Diagonal(d) => Representation::Diagonal(DVector::from_fn(prev, |q, _| {
                paths.children_of(q).fold(T::zero(), |s, p| s + d[p])
            })),
            Representation::Dense(m) => Representation::Dense(DMatrix::from_fn(prev, prev, |q, r| {
                let mut acc = zero;
                for p in paths.children_of(q) {
                    for s in paths.children_of(r) {
                        acc += m[(p, s)];
                    }
                }
                acc
            })),
        };
        Ok(ProbabilityOperator { level: self.level - 1, repr, definite: self.definite })
    }
}

/// Smallest eigenvalue of a Hermitian matrix (0 for an empty matrix).
pub fn min_hermitian_eigenvalue<T: Real>(m: &DMatrix<Complex<T>>) -> T {
    if m.is_empty() {
        return T::zero();
    }
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    eig.eigenvalues.iter().copied().fold(eig.eigenvalues[0], |a, v| a.min(v))
}

/// Numerical rank of a Hermitian matrix: eigenvalues above `tol · max(1, λ_max)`.
pub fn hermitian_rank<T: Real>(m: &DMatrix<Complex<T>>, tol: T) -> usize {
    if m.is_empty() {
        return 0;
    }
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let top = eig.eigenvalues.iter().fold(T::zero(), |a, v| a.max(v.abs()));
    let cut = tol * top.max(T::one());
    eig.eigenvalues.iter().filter(|v| v.abs() > cut).count()
}

/// Grade-2 additivity residual for three mutually disjoint events.
pub fn check_grade2<T: Real>(
    rho: &ProbabilityOperator<T>,
    a: &PathSet,
    b: &PathSet,
    c: &PathSet,
    tol: T,
) -> Result<T, QMeasureError> {
    if !a.is_disjoint(b) || !a.is_disjoint(c) || !b.is_disjoint(c) {
        return Err(QMeasureError::NotDisjoint);
    }
    let mu = |s: &PathSet| rho.q_measure(s, tol);
    let ab = a.union(b);
    let value = mu(&ab.union(c))? - mu(&ab)? - mu(&a.union(c))? - mu(&b.union(c))? + mu(a)? + mu(b)? + mu(c)?;
    Ok(value.abs())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub level: usize,
    pub max_residual: f64,
    /// Singleton pair `(ω, ω′)` attaining the maximum.
    pub witness: Option<(usize, usize)>,
}

/// Max over singleton pairs of `|D_{n+1}((ω→),(ω′→)) − D_n(ω,ω′)|`.
pub fn check_consistency<T: Real>(
    growth: &Growth,
    rho_n: &ProbabilityOperator<T>,
    rho_next: &ProbabilityOperator<T>,
) -> Result<ConsistencyReport, QMeasureError> {
    if rho_next.level() != rho_n.level() + 1 {
        return Err(QMeasureError::NotConsecutive { first: rho_n.level(), second: rho_next.level() });
    }
    let induced = rho_next.coarse_grain(growth)?;
    if induced.dim() != rho_n.dim() {
        return Err(QMeasureError::Dimension { level: rho_n.level(), expected: induced.dim(), found: rho_n.dim() });
    }
    let mut worst = T::zero();
    let mut witness = None;
    for i in 0..rho_n.dim() {
        for j in 0..rho_n.dim() {
            let r = cabs(induced.entry(i, j) - rho_n.entry(i, j));
            if r > worst || witness.is_none() {
                worst = r;
                witness = Some((i, j));
            }
        }
    }
    Ok(ConsistencyReport { level: rho_n.level(), max_residual: worst.as_f64(), witness })
}

/// A sequence of probability operators, one per level.
pub trait Process<T: Real>: Sync {
    fn growth(&self) -> &Growth;

    /// The operator on `L₂(Ω_n)`.
    fn operator(&self, n: usize) -> Result<ProbabilityOperator<T>, QMeasureError>;

    fn name(&self) -> String;
}

/// A process given by an explicit list of operators for levels `1..=len`.
pub struct ExplicitProcess<'g, T: Real> {
    growth: &'g Growth,
    operators: Vec<ProbabilityOperator<T>>,
    name: String,
}

impl<'g, T: Real> ExplicitProcess<'g, T> {
    pub fn new(growth: &'g Growth, operators: Vec<ProbabilityOperator<T>>, name: impl Into<String>) -> Self {
        ExplicitProcess { growth, operators, name: name.into() }
    }

    pub fn operators(&self) -> &[ProbabilityOperator<T>] {
        &self.operators
    }
}

impl<T: Real> Process<T> for ExplicitProcess<'_, T> {
    fn growth(&self) -> &Growth {
        self.growth
    }

    fn operator(&self, n: usize) -> Result<ProbabilityOperator<T>, QMeasureError> {
        self.operators
            .get(n.wrapping_sub(1))
            .cloned()
            .ok_or_else(|| QMeasureError::Process(format!("no operator for level {n}")))
    }

    fn name(&self) -> String {
        self.name.clone()
    }
}

/// Finite-level values `μ_n(A^n)` with a convergence flag.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MuSequence {
    pub spec: String,
    pub values: Vec<(usize, f64)>,
    /// The last `window` relative changes are below the threshold (numerical evidence only).
    pub converged: bool,
    pub limit_estimate: Option<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct MuOptions {
    pub window: usize,
    pub epsilon: f64,
    pub complement: ComplementMode,
    pub tol: f64,
}

impl Default for MuOptions {
    fn default() -> Self {
        MuOptions { window: 3, epsilon: 1e-6, complement: ComplementMode::Computational, tol: DEFAULT_TOL }
    }
}

/// Evaluates `μ_n(A^n)` for `n = 1..=max_n`.
pub fn mu_sequence<T: Real, P: Process<T> + ?Sized>(
    process: &P,
    spec: &SetSpec,
    max_n: usize,
    opts: MuOptions,
) -> Result<MuSequence, QMeasureError> {
    let mut values = Vec::with_capacity(max_n);
    for n in 1..=max_n {
        let set = process.growth().approximate(spec, n, opts.complement)?;
        let rho = process.operator(n)?;
        values.push((n, rho.q_measure(&set, T::lit(opts.tol))?.as_f64()));
    }
    let converged = values.len() > opts.window
        && values.windows(2).rev().take(opts.window).all(|w| {
            let (prev, cur) = (w[0].1, w[1].1);
            let scale = prev.abs().max(f64::MIN_POSITIVE);
            (cur - prev).abs() / scale < opts.epsilon
        });
    let limit_estimate = if converged { values.last().map(|v| v.1) } else { None };
    Ok(MuSequence { spec: spec.to_string(), values, converged, limit_estimate })
}

/// Off-diagonal decoherences vanish within `tol`.
pub fn is_classical<T: Real>(rho: &ProbabilityOperator<T>, tol: T) -> bool {
    match rho.representation() {
        Representation::Diagonal(_) => true,
        _ => off_diagonal_max(rho, |z| cabs(z)) <= tol,
    }
}

/// Real parts of off-diagonal decoherences vanish within `tol`.
pub fn is_semiclassical<T: Real>(rho: &ProbabilityOperator<T>, tol: T) -> bool {
    match rho.representation() {
        Representation::Diagonal(_) => true,
        _ => off_diagonal_max(rho, |z| z.re.abs()) <= tol,
    }
}

/// Largest off-diagonal entry under `f`.
pub fn off_diagonal_max<T: Real>(rho: &ProbabilityOperator<T>, f: impl Fn(Complex<T>) -> T) -> T {
    let n = rho.dim();
    let mut worst = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                worst = worst.max(f(rho.entry(i, j)));
            }
        }
    }
    worst
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassicalEquivalenceReport {
    pub level: usize,
    pub trials: usize,
    pub semiclassical_variant: bool,
    /// max |D(A,B) − μ(A∩B)| (real part of D for the semiclassical variant).
    pub intersection_residual: f64,
    /// max |D(A,B)| over disjoint pairs.
    pub disjoint_residual: f64,
    /// max |μ(A∪B) − μ(A) − μ(B)| over disjoint pairs.
    pub additivity_residual: f64,
    pub passed: bool,
    /// First failing equivalence with the subsets involved.
    pub failure: Option<String>,
}

fn random_subset<R: Rng>(rng: &mut R, level: usize, len: usize) -> PathSet {
    PathSet::from_indices(level, len, (0..len).filter(|_| rng.gen_bool(0.5)))
}

/// Checks `D(A,B) = μ(A∩B)` on random pairs and additivity on random disjoint pairs.
pub fn verify_classical_equivalences<T: Real, R: Rng>(
    rho: &ProbabilityOperator<T>,
    trials: usize,
    rng: &mut R,
    tol: T,
    semiclassical_variant: bool,
) -> Result<ClassicalEquivalenceReport, QMeasureError> {
    let (n, len) = (rho.level(), rho.dim());
    let part = |z: Complex<T>| if semiclassical_variant { Complex::new(z.re, T::zero()) } else { z };
    let mut inter = T::zero();
    let mut disj = T::zero();
    let mut add = T::zero();
    let mut failure = None;
    for t in 0..trials {
        let a = random_subset(rng, n, len);
        let b = random_subset(rng, n, len);
        let r = cabs(part(rho.decoherence(&a, &b)?) - Complex::new(rho.q_measure(&a.intersection(&b), tol)?, T::zero()));
        inter = inter.max(r);
        if r > tol && failure.is_none() {
            failure = Some(format!("trial {t}: D(A,B) != mu(A and B), A={a:?}, B={b:?}, residual {:e}", r.as_f64()));
        }
        let b_disjoint = b.difference(&a);
        let d = cabs(part(rho.decoherence(&a, &b_disjoint)?));
        disj = disj.max(d);
        if d > tol && failure.is_none() {
            failure = Some(format!("trial {t}: D(A,B) != 0 for disjoint A={a:?}, B={b_disjoint:?}, value {:e}", d.as_f64()));
        }
        let s = (rho.q_measure(&a.union(&b_disjoint), tol)? - rho.q_measure(&a, tol)? - rho.q_measure(&b_disjoint, tol)?)
            .abs();
        add = add.max(s);
        if s > tol && failure.is_none() {
            failure = Some(format!("trial {t}: mu not additive on A={a:?}, B={b_disjoint:?}, residual {:e}", s.as_f64()));
        }
    }
    Ok(ClassicalEquivalenceReport {
        level: n,
        trials,
        semiclassical_variant,
        intersection_residual: inter.as_f64(),
        disjoint_residual: disj.as_f64(),
        additivity_residual: add.as_f64(),
        passed: failure.is_none(),
        failure,
    })
}

/// Random normalized PSD decoherence matrix `B B* / ⟨1, B B* 1⟩` of the given rank.
pub fn random_psd<T: Real, R: Rng>(level: usize, dim: usize, rank: usize, rng: &mut R) -> ProbabilityOperator<T> {
    let b = DMatrix::from_fn(dim, rank.max(1), |_, _| {
        Complex::new(T::lit(rng.gen_range(-1.0..1.0)), T::lit(rng.gen_range(-1.0..1.0)))
    });
    let m = &b * b.adjoint();
    let total = m.iter().fold(Complex::new(T::zero(), T::zero()), |s, z| s + *z).re;
    let m = m.map(|z| z / total);
    ProbabilityOperator { level, repr: Representation::Dense(m), definite: true }
}

/// `[D(A_i, A_j)]` over a family of events.
pub fn decoherence_gram<T: Real>(rho: &ProbabilityOperator<T>, family: &[PathSet]) -> Result<DMatrix<Complex<T>>, QMeasureError> {
    let k = family.len();
    let mut out = DMatrix::from_element(k, k, Complex::new(T::zero(), T::zero()));
    for i in 0..k {
        for j in 0..k {
            out[(i, j)] = rho.decoherence(&family[i], &family[j])?;
        }
    }
    Ok(out)
}

/// Random triple of mutually disjoint subsets of Ω_n.
pub fn random_disjoint_triple<R: Rng>(rng: &mut R, level: usize, len: usize) -> [PathSet; 3] {
    let mut sets = [PathSet::empty(level, len), PathSet::empty(level, len), PathSet::empty(level, len)];
    for i in 0..len {
        let slot = rng.gen_range(0..4);
        if slot < 3 {
            sets[slot].insert(i);
        }
    }
    sets
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn worked_example_amplitudes() -> DVector<Complex<f64>> {
        DVector::from_vec(vec![c(-0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(0.25, 0.0), c(-0.25, 0.0)])
    }

    #[test]
    fn rank_one_decoherence() {
        let rho = ProbabilityOperator::rank_one(3, worked_example_amplitudes(), 1e-12).unwrap();
        let g1 = PathSet::from_indices(3, 6, [0]);
        let g2 = PathSet::from_indices(3, 6, [1]);
        assert_eq!(rho.decoherence(&g1, &g2).unwrap(), c(-0.25, 0.0));
        assert_eq!(rho.q_measure(&PathSet::from_indices(3, 6, [0, 1]), 1e-10).unwrap(), 0.0);
        assert_eq!(rho.q_measure(&PathSet::from_indices(3, 6, [2, 3]), 1e-10).unwrap(), 1.0);
        assert_eq!(rho.q_measure(&PathSet::from_indices(3, 6, [1, 2, 3]), 1e-10).unwrap(), 2.25);
        assert!((rho.norm() - 9.0 / 8.0).abs() < 1e-15);
        assert!(!is_classical(&rho, 1e-10));
        assert!(rho.validate(1e-10).is_ok());
        let empty = PathSet::empty(3, 6);
        assert_eq!(check_grade2(&rho, &empty, &empty, &empty, 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn dense_and_rank_one_agree() {
        let rho = ProbabilityOperator::rank_one(3, worked_example_amplitudes(), 1e-12).unwrap();
        let dense = ProbabilityOperator::from_matrix(3, rho.matrix(), 1e-10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let [a, b, cc] = random_disjoint_triple(&mut rng, 3, 6);
            let d1 = rho.decoherence(&a, &b.union(&cc)).unwrap();
            let d2 = dense.decoherence(&a, &b.union(&cc)).unwrap();
            assert!(cabs(d1 - d2) < 1e-14);
            assert!(check_grade2(&dense, &a, &b, &cc, 1e-10).unwrap() < 1e-12);
        }
    }

    #[test]
    fn validation_errors() {
        let bad = DMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.3, 0.0), c(0.0, 0.0), c(0.2, 0.0)]);
        assert!(matches!(ProbabilityOperator::from_matrix(2, bad, 1e-10), Err(QMeasureError::NotHermitian { .. })));
        let indefinite = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(-1.0, 0.0)]);
        assert!(matches!(ProbabilityOperator::from_matrix(2, indefinite, 1e-10), Err(QMeasureError::NotPositive { .. })));
        let unnormalized = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(
            ProbabilityOperator::from_matrix(2, unnormalized, 1e-10),
            Err(QMeasureError::NotNormalized { .. })
        ));
        let signed = DVector::from_vec(vec![1.5, -0.5]);
        assert!(ProbabilityOperator::diagonal(2, signed.clone(), 1e-10, false).is_err());
        assert!(!ProbabilityOperator::diagonal(2, signed, 1e-10, true).unwrap().is_definite());
        let rho = ProbabilityOperator::diagonal(2, DVector::from_vec(vec![0.5, 0.5]), 1e-10, false).unwrap();
        assert!(matches!(
            rho.decoherence(&PathSet::full(3, 6), &PathSet::full(3, 6)),
            Err(QMeasureError::LevelMismatch { expected: 2, found: 3 })
        ));
        let a = PathSet::from_indices(2, 2, [0]);
        assert!(matches!(check_grade2(&rho, &a, &a, &PathSet::empty(2, 2), 1e-10), Err(QMeasureError::NotDisjoint)));
    }

    #[test]
    fn random_psd_is_valid_and_grade2() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho: ProbabilityOperator<f64> = random_psd(3, 6, 3, &mut rng);
        rho.validate(1e-10).unwrap();
        for _ in 0..50 {
            let [a, b, cc] = random_disjoint_triple(&mut rng, 3, 6);
            assert!(check_grade2(&rho, &a, &b, &cc, 1e-10).unwrap() < 1e-10);
        }
        let fam: Vec<PathSet> = (0..5).map(|_| random_subset(&mut rng, 3, 6)).collect();
        assert!(min_hermitian_eigenvalue(&decoherence_gram(&rho, &fam).unwrap()) > -1e-10);
    }

    #[test]
    fn classical_predicates() {
        let diag = ProbabilityOperator::diagonal(2, DVector::from_vec(vec![0.25, 0.75]), 1e-10, false).unwrap();
        assert!(is_classical(&diag, 1e-10) && is_semiclassical(&diag, 1e-10));
        let m = DMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.0, 0.1), c(0.0, -0.1), c(0.5, 0.0)]);
        let imag = ProbabilityOperator::from_matrix(2, m, 1e-10).unwrap();
        assert!(!is_classical(&imag, 1e-10) && is_semiclassical(&imag, 1e-10));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rep = verify_classical_equivalences(&diag, 50, &mut rng, 1e-10, false).unwrap();
        assert!(rep.passed, "{rep:?}");
        let rep = verify_classical_equivalences(&imag, 50, &mut rng, 1e-10, true).unwrap();
        assert!(rep.passed, "{rep:?}");
        let rank_one = ProbabilityOperator::rank_one(3, worked_example_amplitudes(), 1e-12).unwrap();
        let rep = verify_classical_equivalences(&rank_one, 50, &mut rng, 1e-10, false).unwrap();
        assert!(!rep.passed && rep.failure.is_some());
    }

    #[test]
    fn consistency_and_coarse_graining() {
        let g = Growth::build(3).unwrap();
        let rho3 = ProbabilityOperator::rank_one(3, worked_example_amplitudes(), 1e-12).unwrap();
        let rho2 = rho3.coarse_grain(&g).unwrap();
        assert_eq!(rho2.level(), 2);
        let rep = check_consistency(&g, &rho2, &rho3).unwrap();
        assert_eq!(rep.max_residual, 0.0);
        let mut perturbed = rho3.matrix();
        perturbed[(0, 1)] += c(0.01, 0.0);
        let rep = check_consistency(&g, &rho2, &ProbabilityOperator::from_matrix_unchecked(3, perturbed)).unwrap();
        assert!(rep.max_residual > 0.005);
        assert!(matches!(check_consistency(&g, &rho3, &rho3), Err(QMeasureError::NotConsecutive { .. })));
    }

    #[test]
    fn f32_operators() {
        let a = DVector::from_vec(vec![Complex::new(0.5f32, 0.0), Complex::new(0.5, 0.0)]);
        let rho = ProbabilityOperator::rank_one(2, a, 1e-6).unwrap();
        assert!((rho.q_measure(&PathSet::from_indices(2, 2, [0]), 1e-6).unwrap() - 0.25).abs() < 1e-7);
    }
}
