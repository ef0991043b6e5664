//! Spectrometric reconstruction: sample plans, the linear systems `K P = Q`
//! (diagonal states) and `M C = R` (general states), and the step-up scan
//! over the truncation dimension.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fidelity::{fidelity_density_padded, fidelity_distribution_padded};
use crate::params::SystemParams;
use crate::scalar::{from_usize, lit, to_f64, Real};
use crate::spectra::LambdaSource;
use crate::state::{DensityMatrix, MechanicalState, PhononDistribution};

pub const DEFAULT_CONDITION_CAP: f64 = 1e12;
pub const DEFAULT_SCAN_TOLERANCE: f64 = 1e-3;
/// Minimum separation between random plan points, in units of omega_m.
pub const MIN_POINT_GAP: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlanStrategy {
    SidebandPeaks,
    /// Integer sidebands when enough exist, otherwise sideband runs shifted by
    /// sub-harmonic offsets `r / N`.
    SidebandGrid,
    RandomUniform { low: f64, high: f64, seed: u64 },
    Explicit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan<T> {
    points: Vec<T>,
    strategy: PlanStrategy,
}

impl<T: Real> SamplePlan<T> {
    pub fn new(points: Vec<T>, strategy: PlanStrategy) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("sample plan is empty"));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(invalid("sample plan contains non-finite detunings"));
        }
        for (i, a) in points.iter().enumerate() {
            if points[..i].iter().any(|b| b == a) {
                return Err(invalid(format!("duplicate plan point {:e}", to_f64(*a))));
            }
        }
        Ok(Self { points, strategy })
    }

    pub fn explicit(points: Vec<T>) -> Result<Self> {
        Self::new(points, PlanStrategy::Explicit)
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn strategy(&self) -> &PlanStrategy {
        &self.strategy
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn describe(&self) -> String {
        let pts: Vec<String> = self.points.iter().map(|p| format!("{}", to_f64(*p))).collect();
        format!("{:?} [{}]", self.strategy, pts.join(", "))
    }
}

/// `N` consecutive sideband peaks `-delta + j` with
/// `j = -floor(N/2), ..., -floor(N/2) + N - 1`.
pub fn sideband_plan<T: Real>(n: usize, params: &SystemParams<T>) -> Result<SamplePlan<T>> {
    if n == 0 {
        return Err(invalid("plan size must be >= 1"));
    }
    let first = -((n / 2) as isize);
    let points = (0..n as isize)
        .map(|i| -params.delta() + lit::<T>((first + i) as f64) * params.omega_m())
        .collect();
    SamplePlan::new(points, PlanStrategy::SidebandPeaks)
}

/// `N` distinct uniform draws from `[low, high)`, reproducible from `seed`.
pub fn random_plan<T: Real>(n: usize, low: T, high: T, seed: u64) -> Result<SamplePlan<T>> {
    if n == 0 {
        return Err(invalid("plan size must be >= 1"));
    }
    let (lo, hi) = (to_f64(low), to_f64(high));
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(invalid(format!("degenerate sampling range [{lo}, {hi}]")));
    }
    if (hi - lo) / MIN_POINT_GAP < 4.0 * n as f64 {
        return Err(invalid("sampling range too narrow for the requested points"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points: Vec<f64> = Vec::with_capacity(n);
    while points.len() < n {
        let x = rng.gen_range(lo..hi);
        if points.iter().all(|p| (p - x).abs() >= MIN_POINT_GAP) {
            points.push(x);
        }
    }
    SamplePlan::new(
        points.into_iter().map(lit).collect(),
        PlanStrategy::RandomUniform { low: lo, high: hi, seed },
    )
}

/// `N^2` points for the general problem. Uses the integer sideband peaks when
/// `N^2 <= 2 ceil(delta) + 1`, otherwise `N` sideband points repeated at the
/// sub-harmonic offsets `r / N`, `r = 0..N`.
pub fn general_plan<T: Real>(n: usize, params: &SystemParams<T>) -> Result<SamplePlan<T>> {
    if n == 0 {
        return Err(invalid("truncation must be >= 1"));
    }
    let available = 2 * to_f64(params.delta()).ceil() as usize + 1;
    if n * n <= available {
        let plan = sideband_plan(n * n, params)?;
        return SamplePlan::new(plan.points, PlanStrategy::SidebandGrid);
    }
    let base = sideband_plan(n, params)?;
    let mut points = Vec::with_capacity(n * n);
    for r in 0..n {
        let shift = from_usize::<T>(r) / from_usize::<T>(n) * params.omega_m();
        points.extend(base.points.iter().map(|&p| p + shift));
    }
    SamplePlan::new(points, PlanStrategy::SidebandGrid)
}

/// Map from a flat index `l` to the density-matrix element `(m, n)`.
pub fn unflatten(l: usize, n_trunc: usize) -> (usize, usize) {
    let m = l / n_trunc;
    (m, l - m * n_trunc)
}

#[derive(Clone, Debug)]
pub struct DiagonalProblem<T: Real> {
    pub k: DMatrix<T>,
    pub q: DVector<T>,
    pub sigma: Option<Vec<T>>,
    pub plan: SamplePlan<T>,
    pub engine: String,
}

#[derive(Clone, Debug)]
pub struct GeneralProblem<T: Real> {
    pub m: DMatrix<Complex<T>>,
    pub r: DVector<Complex<T>>,
    pub sigma: Option<Vec<T>>,
    pub truncation: usize,
    pub plan: SamplePlan<T>,
    pub engine: String,
}

fn check_observations<T: Real>(
    plan: &SamplePlan<T>,
    values: &[T],
    sigma: Option<&[T]>,
) -> Result<()> {
    if values.len() != plan.len() {
        return Err(invalid(format!(
            "{} observations for a {}-point plan",
            values.len(),
            plan.len()
        )));
    }
    if let Some(s) = sigma {
        if s.len() != values.len() {
            return Err(invalid("sigma length does not match observations"));
        }
        if s.iter().any(|x| !(*x > T::zero()) || !x.is_finite()) {
            return Err(invalid("sigma entries must be finite and > 0"));
        }
    }
    Ok(())
}

/// `K[(j, j')] = Lambda_{j',j'}(Delta_j)` and `Q_j` taken verbatim from
/// `values`.
pub fn build_diagonal_problem<T: Real, S: LambdaSource<T> + ?Sized>(
    plan: &SamplePlan<T>,
    values: &[T],
    sigma: Option<&[T]>,
    source: &S,
) -> Result<DiagonalProblem<T>> {
    check_observations(plan, values, sigma)?;
    let n = plan.len();
    let mut k = DMatrix::zeros(n, n);
    for (j, &d) in plan.points().iter().enumerate() {
        let row = source.lambda_diagonal(n, d)?;
        for (jp, v) in row.into_iter().enumerate() {
            k[(j, jp)] = v;
        }
    }
    Ok(DiagonalProblem {
        k,
        q: DVector::from_column_slice(values),
        sigma: sigma.map(<[T]>::to_vec),
        plan: plan.clone(),
        engine: source.engine(),
    })
}

/// `M[(j, j')] = Lambda_{n,m}(Delta_j)` with `(m, n) = unflatten(j', N)`.
pub fn build_general_problem<T: Real, S: LambdaSource<T> + ?Sized>(
    plan: &SamplePlan<T>,
    values: &[T],
    sigma: Option<&[T]>,
    source: &S,
) -> Result<GeneralProblem<T>> {
    check_observations(plan, values, sigma)?;
    let size = plan.len();
    let n_trunc = (size as f64).sqrt().round() as usize;
    if n_trunc * n_trunc != size {
        return Err(invalid(format!(
            "general reconstruction needs N^2 plan points, got {size}"
        )));
    }
    let mut m = DMatrix::from_element(size, size, Complex::new(T::zero(), T::zero()));
    for (j, &d) in plan.points().iter().enumerate() {
        let lam = source.lambda_matrix(n_trunc, d)?;
        for jp in 0..size {
            let (mm, nn) = unflatten(jp, n_trunc);
            m[(j, jp)] = lam[(nn, mm)];
        }
    }
    Ok(GeneralProblem {
        m,
        r: DVector::from_iterator(size, values.iter().map(|&v| Complex::new(v, T::zero()))),
        sigma: sigma.map(<[T]>::to_vec),
        truncation: n_trunc,
        plan: plan.clone(),
        engine: source.engine(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub condition_cap: f64,
    /// Project the raw solution onto the physical states (flagged in the
    /// result).
    pub project: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            condition_cap: DEFAULT_CONDITION_CAP,
            project: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub condition_number: f64,
    pub residual_norm: f64,
    pub weighted: bool,
    pub projected: bool,
    pub trace: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hermiticity_deviation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ReconstructionResult<T: Real> {
    pub solution: MechanicalState<T>,
    /// Raw linear-system solution before any projection.
    pub raw: MechanicalState<T>,
    pub diagnostics: Diagnostics,
    pub plan: SamplePlan<T>,
    pub engine: String,
}

impl<T: Real> ReconstructionResult<T> {
    pub fn distribution(&self) -> Option<&PhononDistribution<T>> {
        match &self.solution {
            MechanicalState::Diagonal(p) => Some(p),
            MechanicalState::General(_) => None,
        }
    }

    pub fn density(&self) -> Option<&DensityMatrix<T>> {
        match &self.solution {
            MechanicalState::General(rho) => Some(rho),
            MechanicalState::Diagonal(_) => None,
        }
    }

    /// Fidelity against `reference` of the solution made admissible (see
    /// [`admissible_state`]), zero-padding to a common dimension.
    pub fn fidelity_against(&self, reference: &MechanicalState<T>) -> T {
        match (admissible_state(&self.solution), reference) {
            (MechanicalState::Diagonal(p), MechanicalState::Diagonal(q)) => {
                fidelity_distribution_padded(&p, q)
            }
            (a, b) => fidelity_density_padded(&a.to_density(), &b.to_density()),
        }
    }

    /// Records the fidelity against `reference` in the diagnostics.
    pub fn with_reference(mut self, reference: &MechanicalState<T>) -> Self {
        self.diagnostics.fidelity = Some(to_f64(self.fidelity_against(reference)));
        self
    }
}

fn condition_number<N>(a: &DMatrix<N>) -> f64
where
    N: nalgebra::ComplexField,
    N::RealField: Real,
{
    let sv = a.clone().singular_values();
    let max = sv.iter().fold(0.0f64, |acc, s| acc.max(to_f64(*s)));
    let min = sv.iter().fold(f64::INFINITY, |acc, s| acc.min(to_f64(*s)));
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

// Row scaling by 1 / sigma; identity when no sigmas are attached.
fn weights<T: Real>(sigma: Option<&Vec<T>>, n: usize) -> Vec<T> {
    match sigma {
        Some(s) => s.iter().map(|&x| T::one() / x).collect(),
        None => vec![T::one(); n],
    }
}

fn solve_system<N>(a: &DMatrix<N>, b: &DVector<N>, cap: f64, plan: &str) -> Result<(DVector<N>, f64)>
where
    N: nalgebra::ComplexField,
    N::RealField: Real,
{
    let cond = condition_number(a);
    let ill = |condition| Error::IllPosed {
        condition,
        cap,
        plan: plan.to_string(),
    };
    if !(cond <= cap) {
        return Err(ill(cond));
    }
    let x = a.clone().lu().solve(b).ok_or_else(|| ill(f64::INFINITY))?;
    if x.iter().any(|v| !to_f64(v.clone().modulus()).is_finite()) {
        return Err(ill(cond));
    }
    Ok((x, cond))
}

/// Solves `K P = Q` by LU factorization (weighted by `1 / sigma` when present).
/// Negative probabilities are kept.
pub fn solve_diagonal<T: Real>(
    problem: &DiagonalProblem<T>,
    options: &SolveOptions,
) -> Result<ReconstructionResult<T>> {
    let n = problem.q.len();
    let w = weights(problem.sigma.as_ref(), n);
    let a = DMatrix::from_fn(n, n, |i, j| problem.k[(i, j)] * w[i]);
    let b = DVector::from_fn(n, |i, _| problem.q[i] * w[i]);
    let (x, cond) = solve_system(&a, &b, options.condition_cap, &problem.plan.describe())?;
    let residual = (&problem.k * &x - &problem.q).norm();
    let raw = PhononDistribution::unchecked(x.iter().copied().collect());
    let solution = if options.project {
        project_distribution(&raw)
    } else {
        raw.clone()
    };
    Ok(ReconstructionResult {
        diagnostics: Diagnostics {
            condition_number: cond,
            residual_norm: to_f64(residual),
            weighted: problem.sigma.is_some(),
            projected: options.project,
            trace: to_f64(solution.total()),
            hermiticity_deviation: None,
            fidelity: None,
        },
        solution: solution.into(),
        raw: raw.into(),
        plan: problem.plan.clone(),
        engine: problem.engine.clone(),
    })
}

/// Solves `M C = R` and reshapes `C` into `rho[(m, n)]`.
pub fn solve_general<T: Real>(
    problem: &GeneralProblem<T>,
    options: &SolveOptions,
) -> Result<ReconstructionResult<T>> {
    let size = problem.r.len();
    let w = weights(problem.sigma.as_ref(), size);
    let a = DMatrix::from_fn(size, size, |i, j| problem.m[(i, j)] * w[i]);
    let b = DVector::from_fn(size, |i, _| problem.r[i] * w[i]);
    let (x, cond) = solve_system(&a, &b, options.condition_cap, &problem.plan.describe())?;
    let residual = (&problem.m * &x - &problem.r).norm();
    let n_trunc = problem.truncation;
    let mut rho = DMatrix::from_element(n_trunc, n_trunc, Complex::new(T::zero(), T::zero()));
    for (l, c) in x.iter().enumerate() {
        let (m, n) = unflatten(l, n_trunc);
        rho[(m, n)] = *c;
    }
    let raw = DensityMatrix::unchecked(rho);
    let solution = if options.project {
        raw.project_to_physical()?
    } else {
        raw.clone()
    };
    Ok(ReconstructionResult {
        diagnostics: Diagnostics {
            condition_number: cond,
            residual_norm: to_f64(residual),
            weighted: problem.sigma.is_some(),
            projected: options.project,
            trace: to_f64(solution.trace().re),
            hermiticity_deviation: Some(to_f64(raw.hermiticity_deviation())),
            fidelity: None,
        },
        solution: solution.into(),
        raw: raw.into(),
        plan: problem.plan.clone(),
        engine: problem.engine.clone(),
    })
}

/// Negative entries clipped to zero, then renormalized to unit sum.
pub fn project_distribution<T: Real>(p: &PhononDistribution<T>) -> PhononDistribution<T> {
    let clipped: Vec<T> = p.values().iter().map(|&v| v.max(T::zero())).collect();
    let total = clipped.iter().fold(T::zero(), |acc, &v| acc + v);
    if total > T::zero() {
        PhononDistribution::unchecked(clipped.into_iter().map(|v| v / total).collect())
    } else {
        PhononDistribution::unchecked(clipped)
    }
}

/// Nearest state with non-negative weights and total at most one: negative
/// entries (eigenvalues) are clipped, and the rest scaled down only if they
/// sum past one. Truncated references are sub-normalized, so estimates are
/// held to the same rule rather than renormalized. Scoring an unclipped,
/// over-full solution would let fidelities exceed one.
pub fn admissible_state<T: Real>(state: &MechanicalState<T>) -> MechanicalState<T> {
    match state {
        MechanicalState::Diagonal(p) => {
            let clipped: Vec<T> = p.values().iter().map(|&v| v.max(T::zero())).collect();
            let total = clipped.iter().fold(T::zero(), |acc, &v| acc + v);
            let scale = if total > T::one() { total } else { T::one() };
            PhononDistribution::unchecked(clipped.into_iter().map(|v| v / scale).collect()).into()
        }
        MechanicalState::General(rho) => {
            let eig = rho.hermitian_part().eigen();
            let clipped: Vec<T> = eig.eigenvalues.iter().map(|&e| e.max(T::zero())).collect();
            let total = clipped.iter().fold(T::zero(), |acc, &v| acc + v);
            let scale = if total > T::one() { total } else { T::one() };
            let v = &eig.eigenvectors;
            let dim = rho.dim();
            let m = DMatrix::from_fn(dim, dim, |i, j| {
                clipped.iter().enumerate().fold(Complex::new(T::zero(), T::zero()), |acc, (k, &w)| {
                    acc + v[(i, k)] * v[(j, k)].conj() * (w / scale)
                })
            });
            DensityMatrix::unchecked(m).into()
        }
    }
}

/// How the scan picks its plan for each truncation `N`.
#[derive(Clone, Debug, PartialEq)]
pub enum PlanRule<T: Real> {
    Sideband(SystemParams<T>),
    RandomUniform { low: T, high: T, seed: u64 },
}

impl<T: Real> PlanRule<T> {
    pub fn plan(&self, n: usize) -> Result<SamplePlan<T>> {
        match self {
            PlanRule::Sideband(p) => sideband_plan(n, p),
            PlanRule::RandomUniform { low, high, seed } => random_plan(n, *low, *high, *seed),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ScanStep<T: Real> {
    pub n: usize,
    pub outcome: std::result::Result<ReconstructionResult<T>, String>,
    /// L1 distance to the previous step's solution (zero-padded).
    pub l1_to_previous: Option<T>,
}

#[derive(Clone, Debug)]
pub struct ScanReport<T: Real> {
    /// First `N` whose solution agrees with the next two within `tol` in L1.
    pub converged_n: Option<usize>,
    pub history: Vec<ScanStep<T>>,
}

impl<T: Real> ScanReport<T> {
    pub fn step(&self, n: usize) -> Option<&ScanStep<T>> {
        self.history.iter().find(|s| s.n == n)
    }

    /// `Some(true)` when `N` satisfies the convergence test; `None` when the
    /// scan stopped too early to tell.
    pub fn is_converged_at(&self, n: usize, tol: T) -> Option<bool> {
        let next = self.step(n + 1)?.l1_to_previous;
        let after = self.step(n + 2)?.l1_to_previous;
        Some(matches!((next, after), (Some(a), Some(b)) if a < tol && b < tol))
    }
}

/// Diagonal reconstruction for `N = n_min..=n_max`. `provider` supplies the
/// measured spectrum at a plan's points. A step that fails to solve is kept in
/// the history and breaks the convergence chain.
pub fn convergence_scan<T, S, F>(
    mut provider: F,
    n_range: (usize, usize),
    rule: &PlanRule<T>,
    tol: T,
    source: &S,
    options: &SolveOptions,
    reference: Option<&MechanicalState<T>>,
) -> Result<ScanReport<T>>
where
    T: Real,
    S: LambdaSource<T> + ?Sized,
    F: FnMut(&SamplePlan<T>) -> Result<Vec<T>>,
{
    let (n_min, n_max) = n_range;
    if n_min == 0 || n_max < n_min {
        return Err(invalid(format!("invalid scan range {n_min}..={n_max}")));
    }
    let mut history: Vec<ScanStep<T>> = Vec::new();
    let mut previous: Option<PhononDistribution<T>> = None;
    for n in n_min..=n_max {
        let plan = rule.plan(n)?;
        let values = provider(&plan)?;
        let outcome = build_diagonal_problem(&plan, &values, None, source)
            .and_then(|p| solve_diagonal(&p, options));
        let (outcome, current) = match outcome {
            Ok(mut res) => {
                if let Some(r) = reference {
                    res = res.with_reference(r);
                }
                let p = res.distribution().cloned();
                (Ok(res), p)
            }
            Err(Error::IllPosed { .. }) | Err(Error::InternalConsistency(_)) => {
                (Err(outcome.unwrap_err().to_string()), None)
            }
            Err(e) => return Err(e),
        };
        let l1 = match (&previous, &current) {
            (Some(a), Some(b)) => Some(a.l1_distance(b)),
            _ => None,
        };
        history.push(ScanStep {
            n,
            outcome,
            l1_to_previous: l1,
        });
        previous = current;
    }
    let mut report = ScanReport {
        converged_n: None,
        history,
    };
    report.converged_n = (n_min..=n_max).find(|&n| report.is_converged_at(n, tol) == Some(true));
    Ok(report)
}
