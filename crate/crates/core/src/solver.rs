//! Projected Peaceman-Rachford splitting on the facially reduced DNN
//! relaxation.
//!
//! Each iteration performs
//!
//! ```text
//! R    <- P_R( V^T (Y + Z/beta) V )
//! Z    <- Z + gamma*beta * mask(Y - V R V^T)
//! Y    <- P_Y( V R V^T - (Ehat + Z)/beta )
//! Z    <- Z + gamma*beta * mask(Y - V R V^T)
//! ```
//!
//! where `mask` zeroes row 0, column 0 and the diagonal. `Z` starts at the
//! dual values known to be optimal on those positions and the mask keeps
//! them fixed for the whole run.

use std::fmt;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bounds::{lower_bound, relative_gap, upper_bound, BoundRecord, UpperSource};
use crate::error::{Error, Result};
use crate::instance::{Assignment, ScpInstance};
use crate::lifting::LiftedGeometry;
use crate::projections::{mask_za_mut, project_box_gangster, psd_trace_factor};
use crate::scalar::Real;

/// Relative tolerance for declaring the bound gap closed.
pub const GAP_TOL: f64 = 1e-9;

/// Which rounding strategies run at each checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpperStrategy {
    Column,
    Eig,
    Both,
}

impl UpperStrategy {
    pub fn sources(self) -> &'static [UpperSource] {
        match self {
            UpperStrategy::Column => &[UpperSource::FirstColumn],
            UpperStrategy::Eig => &[UpperSource::DominantEigenvector],
            UpperStrategy::Both => &UpperSource::ALL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverParams<T: Real> {
    /// Penalty parameter, at least 1.
    pub beta: T,
    /// Dual step in `(0, 1)`.
    pub gamma: T,
    /// Residual tolerance.
    pub epsilon: T,
    pub max_iter: usize,
    /// Consecutive sub-tolerance iterations required to stop on residuals.
    pub t_consecutive: usize,
    /// Iterations between bound evaluations.
    pub bound_period: usize,
    pub upper: UpperStrategy,
}

impl<T: Real> SolverParams<T> {
    /// Defaults for an instance with `p` residues and `n0` rotamers:
    /// `beta = max(floor(n0 / 2p), 1)`, `gamma = 0.9`, `epsilon = 1e-10`,
    /// `max_iter = p (n0 + 1) + 10^4`, `t = 100`, bounds every 100 iterations.
    pub fn for_dims(p: usize, n0: usize) -> Self {
        let beta = (n0 / (2 * p)).max(1);
        Self {
            beta: T::from_count(beta),
            gamma: T::lit(0.9),
            epsilon: T::lit(1e-10),
            max_iter: p * (n0 + 1) + 10_000,
            t_consecutive: 100,
            bound_period: 100,
            upper: UpperStrategy::Both,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParams(msg.to_string()));
        if !(self.beta >= T::one()) {
            return bad("beta must be at least 1");
        }
        if !(self.gamma > T::zero() && self.gamma < T::one()) {
            return bad("gamma must lie in (0, 1)");
        }
        if !(self.epsilon > T::zero()) {
            return bad("epsilon must be positive");
        }
        if self.max_iter == 0 || self.t_consecutive == 0 || self.bound_period == 0 {
            return bad("max_iter, t and bound_period must be at least 1");
        }
        Ok(())
    }
}

pub fn default_params<T: Real>(instance: &ScpInstance<T>) -> SolverParams<T> {
    SolverParams::for_dims(instance.p(), instance.n0())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxIter,
    Residual,
    GapClosed,
}

impl Termination {
    /// Whether the run ended with a certificate or converged iterates.
    pub fn is_success(self) -> bool {
        !matches!(self, Termination::MaxIter)
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::MaxIter => "max_iter",
            Termination::Residual => "residual",
            Termination::GapClosed => "gap_closed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals<T: Real> {
    /// `||Y - V R V^T||_F / ||Y||_F`
    pub primal: T,
    /// `beta ||Y^k - Y^{k-1}||_F`
    pub dual: T,
}

impl<T: Real> Residuals<T> {
    pub fn max(&self) -> T {
        self.primal.max(self.dual)
    }
}

/// Running extrema of the checkpoint bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct BestBounds<T: Real> {
    pub lower: T,
    pub upper: T,
    pub upper_source: Option<UpperSource>,
    pub assignment: Option<Assignment>,
}

impl<T: Real> BestBounds<T> {
    fn empty() -> Self {
        Self { lower: -T::max_value().unwrap(), upper: T::max_value().unwrap(), upper_source: None, assignment: None }
    }

    pub fn gap_closed(&self) -> bool {
        self.assignment.is_some() && self.lower >= self.upper - T::lit(GAP_TOL) * (T::one() + self.upper.abs())
    }
}

#[derive(Debug, Clone)]
pub struct SolverState<T: Real> {
    pub r: DMatrix<T>,
    pub y: DMatrix<T>,
    pub z: DMatrix<T>,
    pub iter: usize,
    pub consec_ok: usize,
    pub residuals: Option<Residuals<T>>,
    pub bounds: Vec<BoundRecord<T>>,
    pub best: BestBounds<T>,
}

/// Dual matrix with the prescribed values on row 0, column 0 and the
/// diagonal (`Z_ii = -Ehat_ii`, zero elsewhere on those positions) and zero
/// everywhere else.
pub fn dual_template<T: Real>(geometry: &LiftedGeometry<T>) -> DMatrix<T> {
    let n = geometry.lifted_order();
    let mut z = DMatrix::zeros(n, n);
    for i in 1..n {
        // 0 - e rather than -e: no negative zeros, so the fixed entries stay
        // bit-identical under the masked updates
        z[(i, i)] = T::zero() - geometry.ehat[(i, i)];
    }
    z
}

/// `Y = 0`, `Z` from [`dual_template`], counters zeroed.
pub fn initialize<T: Real>(geometry: &LiftedGeometry<T>) -> SolverState<T> {
    let n = geometry.lifted_order();
    let r = geometry.reduced_order();
    SolverState {
        r: DMatrix::zeros(r, r),
        y: DMatrix::zeros(n, n),
        z: dual_template(geometry),
        iter: 0,
        consec_ok: 0,
        residuals: None,
        bounds: Vec::new(),
        best: BestBounds::empty(),
    }
}

/// Result of the `R` subproblem together with its lift `V R V^T`.
#[derive(Debug, Clone)]
pub struct FacialStep<T: Real> {
    pub r: DMatrix<T>,
    pub lifted: DMatrix<T>,
}

/// `R = P_R(V^T (Y + Z / beta) V)` with trace `p + 1`.
pub fn r_update<T: Real>(y: &DMatrix<T>, z: &DMatrix<T>, params: &SolverParams<T>, geometry: &LiftedGeometry<T>) -> Result<FacialStep<T>> {
    let v = &geometry.v;
    let arg = v.transpose() * (y + z / params.beta) * v;
    let factor = psd_trace_factor(&arg, T::from_count(geometry.p() + 1))?;
    Ok(FacialStep { r: factor.to_matrix(), lifted: factor.congruence(v) })
}

/// `Z + gamma beta mask(Y - V R V^T)`; used for both dual half steps.
pub fn dual_update<T: Real>(z: &DMatrix<T>, y: &DMatrix<T>, lifted: &DMatrix<T>, params: &SolverParams<T>) -> DMatrix<T> {
    let mut step = y - lifted;
    mask_za_mut(&mut step);
    z + step * (params.gamma * params.beta)
}

/// `Y = P_box(G(V R V^T - (Ehat + Z) / beta))`.
pub fn y_update<T: Real>(lifted: &DMatrix<T>, z: &DMatrix<T>, params: &SolverParams<T>, geometry: &LiftedGeometry<T>) -> DMatrix<T> {
    let arg = lifted - (&geometry.ehat + z) / params.beta;
    project_box_gangster(&arg, &geometry.gangster)
}

/// Stopping rule, checked after every iteration: gap closure first, then
/// residuals held below `epsilon` for `t` consecutive iterations, then the
/// iteration cap.
pub fn check_stop<T: Real>(state: &SolverState<T>, params: &SolverParams<T>) -> Option<Termination> {
    if state.best.gap_closed() {
        Some(Termination::GapClosed)
    } else if state.consec_ok >= params.t_consecutive {
        Some(Termination::Residual)
    } else if state.iter >= params.max_iter {
        Some(Termination::MaxIter)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport<T: Real> {
    pub lbd: T,
    pub ubd: T,
    pub rel_gap: T,
    pub iterations: usize,
    pub time_sec: f64,
    pub assignment: Assignment,
    pub upper_source: UpperSource,
    pub termination: Termination,
    pub residuals: Residuals<T>,
}

impl<T: Real> SolveReport<T> {
    /// Equality ignoring wall time.
    pub fn same_outcome(&self, other: &Self) -> bool {
        Self { time_sec: 0.0, ..self.clone() } == Self { time_sec: 0.0, ..other.clone() }
    }
}

/// One solve: owns the iterates and the bound history.
pub struct Prsm<'a, T: Real> {
    instance: &'a ScpInstance<T>,
    geometry: LiftedGeometry<T>,
    params: SolverParams<T>,
    state: SolverState<T>,
}

impl<'a, T: Real> Prsm<'a, T> {
    /// Builds the geometry, initializes the iterates and records the
    /// bounds at the starting point.
    pub fn new(instance: &'a ScpInstance<T>, params: SolverParams<T>) -> Result<Self> {
        params.validate()?;
        let geometry = LiftedGeometry::new(instance);
        let state = initialize(&geometry);
        let mut solver = Self { instance, geometry, params, state };
        solver.record_bounds()?;
        Ok(solver)
    }

    pub fn state(&self) -> &SolverState<T> {
        &self.state
    }

    pub fn geometry(&self) -> &LiftedGeometry<T> {
        &self.geometry
    }

    pub fn params(&self) -> &SolverParams<T> {
        &self.params
    }

    /// One full iteration. Returns the termination reason once the run is over.
    pub fn step(&mut self) -> Result<Option<Termination>> {
        let params = &self.params;
        let geo = &self.geometry;
        let st = &mut self.state;

        let facial = r_update(&st.y, &st.z, params, geo)?;
        let z_half = dual_update(&st.z, &st.y, &facial.lifted, params);
        let y_next = y_update(&facial.lifted, &z_half, params, geo);
        let z_next = dual_update(&z_half, &y_next, &facial.lifted, params);

        let primal = (&y_next - &facial.lifted).norm() / y_next.norm();
        let dual = params.beta * (&y_next - &st.y).norm();
        let residuals = Residuals { primal, dual };

        st.r = facial.r;
        st.y = y_next;
        st.z = z_next;
        st.iter += 1;
        st.consec_ok = if residuals.max() < params.epsilon { st.consec_ok + 1 } else { 0 };
        st.residuals = Some(residuals);

        let due = st.iter.is_multiple_of(params.bound_period)
            || st.iter >= params.max_iter
            || st.consec_ok >= params.t_consecutive;
        if due {
            self.record_bounds()?;
        }
        Ok(check_stop(&self.state, &self.params))
    }

    /// Evaluates both bounds at the current iterate and updates the running
    /// extrema. The first checkpoint happens at iteration 0.
    pub fn record_bounds(&mut self) -> Result<()> {
        let st = &mut self.state;
        let lower = lower_bound(&st.z, &self.geometry)?;
        let mut best_here: Option<crate::bounds::UpperBound<T>> = None;
        for &source in self.params.upper.sources() {
            let ub = upper_bound(&st.y, self.instance, source)?;
            if best_here.as_ref().is_none_or(|b| ub.value < b.value) {
                best_here = Some(ub);
            }
        }
        let ub = best_here.expect("at least one upper-bound source");
        if lower > st.best.lower {
            st.best.lower = lower;
        }
        if st.best.assignment.is_none() || ub.value < st.best.upper {
            st.best.upper = ub.value;
            st.best.upper_source = Some(ub.source);
            st.best.assignment = Some(ub.assignment.clone());
        }
        st.bounds.push(BoundRecord {
            iteration: st.iter,
            lower,
            upper: ub.value,
            upper_source: ub.source,
            assignment: ub.assignment,
        });
        Ok(())
    }

    /// Iterates until a stopping rule fires.
    pub fn run(&mut self) -> Result<SolveReport<T>> {
        let start = Instant::now();
        let termination = loop {
            if let Some(t) = self.step()? {
                break t;
            }
        };
        Ok(self.report(termination, start.elapsed().as_secs_f64()))
    }

    fn report(&self, termination: Termination, time_sec: f64) -> SolveReport<T> {
        let best = &self.state.best;
        SolveReport {
            lbd: best.lower,
            ubd: best.upper,
            rel_gap: relative_gap(best.upper, best.lower),
            iterations: self.state.iter,
            time_sec,
            assignment: best.assignment.clone().expect("bounds recorded at start"),
            upper_source: best.upper_source.expect("bounds recorded at start"),
            termination,
            residuals: self.state.residuals.expect("at least one iteration"),
        }
    }
}

/// Solves with the given parameters, or the defaults for the instance.
pub fn solve<T: Real>(instance: &ScpInstance<T>, params: Option<SolverParams<T>>) -> Result<SolveReport<T>> {
    let params = params.unwrap_or_else(|| default_params(instance));
    Prsm::new(instance, params)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::derived_instance;

    #[test]
    fn default_params_follow_dimension_formulas() {
        let p = SolverParams::<f64>::for_dims(8, 16);
        assert_eq!(p.max_iter, 10136);
        assert_eq!(p.beta, 1.0);
        assert_eq!(p.gamma, 0.9);
        assert_eq!(p.epsilon, 1e-10);
        assert_eq!((p.t_consecutive, p.bound_period), (100, 100));
        assert_eq!(SolverParams::<f64>::for_dims(37, 130).beta, 1.0);
        assert_eq!(SolverParams::<f64>::for_dims(5, 10).beta, 1.0);
        assert_eq!(SolverParams::<f64>::for_dims(2, 12).beta, 3.0);
        assert_eq!(SolverParams::<f64>::for_dims(3, 17).beta, 2.0);
    }

    #[test]
    fn invalid_params_rejected() {
        let inst = derived_instance();
        let mut p = default_params(&inst);
        p.gamma = 1.0;
        assert!(matches!(Prsm::new(&inst, p), Err(Error::InvalidParams(_))));
        let mut p = default_params(&inst);
        p.beta = 0.5;
        assert!(solve(&inst, Some(p)).is_err());
        let mut p = default_params(&inst);
        p.bound_period = 0;
        assert!(solve(&inst, Some(p)).is_err());
    }

    #[test]
    fn initial_dual_matches_template() {
        let inst = derived_instance();
        let geo = LiftedGeometry::new(&inst);
        let st = initialize(&geo);
        let expect = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&[0.0, -1.0, -3.0, -2.0, -1.0]));
        assert_eq!(st.z, expect);
        assert_eq!(st.y, DMatrix::zeros(5, 5));
        let zero = ScpInstance::from_raw("z", vec![2, 1], &DMatrix::<f64>::zeros(3, 3)).unwrap();
        assert_eq!(initialize(&LiftedGeometry::new(&zero)).z, DMatrix::zeros(4, 4));
    }

    #[test]
    fn first_r_update_is_scaled_identity() {
        let inst = derived_instance();
        let geo = LiftedGeometry::new(&inst);
        let params = default_params(&inst);
        let y = DMatrix::zeros(5, 5);
        let z = DMatrix::zeros(5, 5);
        let step = r_update(&y, &z, &params, &geo).unwrap();
        let expect = DMatrix::<f64>::identity(3, 3) * (3.0 / 3.0);
        assert!((&step.r - expect).amax() < 1e-14);
        let st = initialize(&geo);
        let step = r_update(&st.y, &st.z, &params, &geo).unwrap();
        assert!((step.r.trace() - 3.0).abs() < 1e-10);
        assert!(step.r.clone().symmetric_eigenvalues().min() >= -1e-10);
    }

    #[test]
    fn dual_update_keeps_fixed_entries() {
        let inst = derived_instance();
        let geo = LiftedGeometry::new(&inst);
        let params = default_params(&inst);
        let st = initialize(&geo);
        let unchanged = dual_update(&st.z, &st.y, &st.y, &params);
        assert_eq!(unchanged, st.z);

        let step = r_update(&st.y, &st.z, &params, &geo).unwrap();
        let z_half = dual_update(&st.z, &st.y, &step.lifted, &params);
        for i in 0..5 {
            assert_eq!(z_half[(0, i)], 0.0);
            assert_eq!(z_half[(i, 0)], 0.0);
            assert_eq!(z_half[(i, i)], st.z[(i, i)]);
        }
        let y = y_update(&step.lifted, &z_half, &params, &geo);
        assert_eq!(y[(0, 0)], 1.0);
        assert_eq!(y[(1, 2)], 0.0);
        assert!(y.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn huge_collision_energy_is_shot_to_zero() {
        let mut raw = DMatrix::<f64>::zeros(4, 4);
        raw[(0, 2)] = 1e9;
        raw[(2, 0)] = 1e9;
        let inst = ScpInstance::from_raw("clash", vec![2, 2], &raw).unwrap();
        let geo = LiftedGeometry::new(&inst);
        let params = default_params(&inst);
        let st = initialize(&geo);
        let step = r_update(&st.y, &st.z, &params, &geo).unwrap();
        let y = y_update(&step.lifted, &st.z, &params, &geo);
        assert_eq!(y[(1, 3)], 0.0);
        assert_eq!(y[(3, 1)], 0.0);
    }

    #[test]
    fn check_stop_rules() {
        let inst = derived_instance();
        let geo = LiftedGeometry::new(&inst);
        let mut params = default_params(&inst);
        params.max_iter = 10;
        params.t_consecutive = 3;
        let mut st = initialize(&geo);
        st.iter = 10;
        assert_eq!(check_stop(&st, &params), Some(Termination::MaxIter));
        st.iter = 5;
        st.consec_ok = 3;
        assert_eq!(check_stop(&st, &params), Some(Termination::Residual));
        st.consec_ok = 0;
        assert_eq!(check_stop(&st, &params), None);
        st.best.lower = -48.46;
        st.best.upper = -48.46;
        st.best.assignment = Some(Assignment::first(inst.partition()));
        assert_eq!(check_stop(&st, &params), Some(Termination::GapClosed));
        st.best.lower = -48.47;
        assert_eq!(check_stop(&st, &params), None);
    }

    #[test]
    fn single_rotamer_instance_closes_gap() {
        let inst = ScpInstance::from_raw("one", vec![1], &DMatrix::from_element(1, 1, -3.25)).unwrap();
        let rep = solve(&inst, None).unwrap();
        assert_eq!(rep.termination, Termination::GapClosed);
        assert_eq!(rep.ubd, -3.25);
        assert!((rep.lbd + 3.25f64).abs() < 1e-12);
        assert_eq!(rep.assignment.choice(), &[0]);
    }

    #[test]
    fn derived_instance_solves_to_six() {
        let inst = derived_instance();
        let rep = solve(&inst, None).unwrap();
        assert_eq!(rep.ubd, 6.0);
        assert_eq!(rep.assignment.choice(), &[0, 1]);
        assert!(rep.lbd <= 6.0 + 1e-6 * 7.0);
        assert!(rep.termination.is_success());
    }

    #[test]
    fn zero_energy_closes_immediately() {
        let inst = ScpInstance::from_raw("z", vec![3, 2, 4], &DMatrix::<f64>::zeros(9, 9)).unwrap();
        let rep = solve(&inst, None).unwrap();
        assert_eq!((rep.lbd, rep.ubd), (0.0, 0.0));
        assert_eq!(rep.termination, Termination::GapClosed);
    }

    #[test]
    fn max_iter_termination() {
        let inst: ScpInstance<f64> = crate::instance::random_instance(4, 4, -10.0, 10.0, 5).unwrap();
        let mut params = default_params(&inst);
        params.max_iter = 1;
        let rep = solve(&inst, Some(params)).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.termination == Termination::MaxIter || rep.termination == Termination::GapClosed);
    }

    #[test]
    fn solves_in_single_precision() {
        let inst = derived_instance();
        let raw = inst.energy().matrix().map(|x| x as f32);
        let inst32 = ScpInstance::<f32>::from_raw("derived32", vec![2, 2], &raw).unwrap();
        let mut params = default_params(&inst32);
        params.epsilon = 1e-5;
        let rep = solve(&inst32, Some(params)).unwrap();
        assert_eq!(rep.ubd, 6.0f32);
        assert!(rep.lbd <= 6.0 + 1e-3);
    }
}
