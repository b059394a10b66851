//! Outer augmented Lagrangian loop with success-gated multiplier updates.
//!
//! Each outer iteration solves the sub-problem for the current `(mu, rho)`,
//! forms the multiplier candidate and the residual index
//! `R = |(y - psi)_+|_inf + |int mu_bar (psi - y)|`. The step is a success
//! when `R <= tau * R+` (last recorded success value): the multiplier is
//! replaced and the penalty kept. Otherwise the penalty grows by `gamma`.
//! The run stops once a success has `R+ <= eps2`.

use std::fmt::Write as _;

use crate::cost::{cost_j, kkt_residuals, residual_index, ProblemSpec};
use crate::error::{Error, Result};
use crate::field::{BoundaryTimeField, NodalField, TimeField};
use crate::msa::{msa_solve, MsaConfig, MsaResult};
use crate::operator::DiscreteOperator;

/// What happens to the multiplier after a failed step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureUpdate {
    /// `mu_{k+1} = mu_k`.
    Keep,
    /// `mu_{k+1} = mu_bar_k`.
    Adopt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlmConfig {
    pub rho0: f64,
    pub mu0: TimeField,
    pub tau: f64,
    pub gamma: f64,
    /// Initial reference value for the success test.
    pub r_plus_0: f64,
    pub eps2: f64,
    pub max_outer: usize,
    pub failure_update: FailureUpdate,
    pub msa: MsaConfig,
}

impl AlmConfig {
    /// Defaults: `tau = 0.9`, `gamma = 2`, `R+_0 = 1e6`, `eps2 = 1e-4`,
    /// 200 outer iterations, multiplier kept on failure.
    pub fn new(rho0: f64, mu0: TimeField) -> Self {
        Self {
            rho0,
            mu0,
            tau: 0.9,
            gamma: 2.0,
            r_plus_0: 1e6,
            eps2: 1e-4,
            max_outer: 200,
            failure_update: FailureUpdate::Keep,
            msa: MsaConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            return Err(Error::invalid("rho0", "must be positive"));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::invalid("tau", "tau must lie in (0,1)"));
        }
        if !(self.gamma > 1.0 && self.gamma.is_finite()) {
            return Err(Error::invalid("gamma", "gamma must exceed 1"));
        }
        if !(self.r_plus_0 > 0.0) {
            return Err(Error::invalid("r_plus_0", "must be positive"));
        }
        if !(self.eps2 >= 0.0) {
            return Err(Error::invalid("eps2", "must be nonnegative"));
        }
        if self.max_outer < 1 {
            return Err(Error::invalid("max_outer", "must be at least 1"));
        }
        if self.mu0.values().iter().any(|&m| !(m >= 0.0 && m.is_finite())) {
            return Err(Error::invalid("mu0", "must be nonnegative and finite"));
        }
        self.msa.validate()
    }
}

/// Multiplier, penalty and success bookkeeping between outer iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct AlmState {
    pub mu: TimeField,
    pub rho: f64,
    pub tau: f64,
    pub gamma: f64,
    /// `R+_0, R+_1, ...`; the last entry is the current success threshold base.
    pub r_plus_history: Vec<f64>,
    /// Number of successful steps so far.
    pub n: usize,
    /// Number of outer iterations completed.
    pub k: usize,
}

impl AlmState {
    pub fn initial(config: &AlmConfig) -> Self {
        Self {
            mu: config.mu0.clone(),
            rho: config.rho0,
            tau: config.tau,
            gamma: config.gamma,
            r_plus_history: vec![config.r_plus_0],
            n: 0,
            k: 0,
        }
    }

    pub fn r_plus(&self) -> f64 {
        *self.r_plus_history.last().expect("history starts with R+_0")
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub result: MsaResult,
    pub r: f64,
    pub success: bool,
    pub state: AlmState,
}

/// One outer iteration from `state`.
pub fn alm_step(
    spec: &ProblemSpec,
    op: &DiscreteOperator,
    state: &AlmState,
    warm_u: &TimeField,
    warm_v: &BoundaryTimeField,
    config: &AlmConfig,
) -> Result<StepOutcome> {
    let result = msa_solve(spec, op, state.rho, &state.mu, warm_u, warm_v, &config.msa)?;
    let r = residual_index(&result.y, &spec.psi, &result.mu_bar)?;
    if !r.is_finite() {
        return Err(Error::NonFinite { context: "residual index", iteration: state.k + 1 });
    }
    let success = r <= state.tau * state.r_plus();
    let mut next = state.clone();
    next.k += 1;
    if success {
        next.mu = result.mu_bar.clone();
        next.r_plus_history.push(r);
        next.n += 1;
    } else {
        if config.failure_update == FailureUpdate::Adopt {
            next.mu = result.mu_bar.clone();
        }
        next.rho *= state.gamma;
    }
    Ok(StepOutcome { result, r, success, state: next })
}

/// One row of the outer trace.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterRecord {
    pub k: usize,
    /// Successes so far, including this step.
    pub n: usize,
    /// Penalty used in this step.
    pub rho: f64,
    pub r: f64,
    pub success: bool,
    pub j: f64,
    pub l_rho: f64,
    pub feasibility: f64,
    pub complementarity: f64,
    pub stationarity_u: f64,
    pub stationarity_v: f64,
    pub inner_iters: usize,
    pub final_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    ToleranceMet,
    MaxOuter,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::ToleranceMet => "tolerance_met",
            Termination::MaxOuter => "max_outer",
        }
    }
}

#[derive(Debug, Clone)]
pub struct AlmTrace {
    pub records: Vec<OuterRecord>,
    /// Latest success snapshot; the lowest-`R` iterate if no step succeeded.
    pub final_result: MsaResult,
    /// Outer iteration (1-based) that produced `final_result`.
    pub final_k: usize,
    pub termination: Termination,
    /// `R+_0, R+_1, ...`.
    pub r_plus: Vec<f64>,
    /// Penalty sequence `rho_1, ..., rho_{K+1}`.
    pub rho_history: Vec<f64>,
    /// Whether every multiplier iterate stayed nonnegative.
    pub mu_nonnegative: bool,
}

/// Runs the outer loop from zero controls.
pub fn alm_run(spec: &ProblemSpec, config: &AlmConfig) -> Result<AlmTrace> {
    let op = DiscreteOperator::assemble(&spec.mesh, &spec.coeffs)?;
    let mesh = spec.mesh;
    alm_run_from(spec, &op, config, &TimeField::zeros(&mesh), &BoundaryTimeField::zeros(&mesh), |_| {})
}

/// Runs the outer loop from the given controls; `on_record` sees every
/// trace row as soon as it exists.
pub fn alm_run_from(
    spec: &ProblemSpec,
    op: &DiscreteOperator,
    config: &AlmConfig,
    init_u: &TimeField,
    init_v: &BoundaryTimeField,
    mut on_record: impl FnMut(&OuterRecord),
) -> Result<AlmTrace> {
    spec.validate()?;
    config.validate()?;
    if config.mu0.mesh() != &spec.mesh {
        return Err(Error::MeshMismatch);
    }

    let mut state = AlmState::initial(config);
    let mut warm_u = init_u.clone();
    let mut warm_v = init_v.clone();
    let mut records = Vec::new();
    let mut rho_history = vec![state.rho];
    let mut mu_nonnegative = true;
    let mut snapshot: Option<(usize, MsaResult)> = None;
    let mut best: Option<(usize, f64, MsaResult)> = None;
    let mut termination = Termination::MaxOuter;

    for k in 1..=config.max_outer {
        let outcome = alm_step(spec, op, &state, &warm_u, &warm_v, config)
            .map_err(|e| Error::Outer { k, source: Box::new(e) })?;
        let res = &outcome.result;
        let kkt = kkt_residuals(spec, &res.y, &res.u, &res.v, &res.p, &res.mu_bar)?;
        let record = OuterRecord {
            k,
            n: outcome.state.n,
            rho: state.rho,
            r: outcome.r,
            success: outcome.success,
            j: cost_j(spec, &res.y, &res.u, &res.v)?,
            l_rho: res.value,
            feasibility: kkt.feasibility,
            complementarity: kkt.complementarity,
            stationarity_u: kkt.stationarity_u,
            stationarity_v: kkt.stationarity_v,
            inner_iters: res.inner_iters,
            final_gap: res.final_gap,
        };
        on_record(&record);
        records.push(record);

        warm_u = res.u.clone();
        warm_v = res.v.clone();
        if best.as_ref().is_none_or(|(_, r, _)| outcome.r < *r) {
            best = Some((k, outcome.r, res.clone()));
        }
        let done = outcome.success && outcome.r <= config.eps2;
        if outcome.success {
            snapshot = Some((k, outcome.result));
        }
        state = outcome.state;
        rho_history.push(state.rho);
        mu_nonnegative &= state.mu.values().iter().all(|&m| m >= 0.0);
        if done {
            termination = Termination::ToleranceMet;
            break;
        }
    }

    let (final_k, final_result) = match snapshot {
        Some(s) => s,
        None => {
            let (k, _, res) = best.expect("at least one outer iteration ran");
            (k, res)
        }
    };
    Ok(AlmTrace {
        records,
        final_result,
        final_k,
        termination,
        r_plus: state.r_plus_history,
        rho_history,
        mu_nonnegative,
    })
}

pub const TRACE_HEADER: &str = "k,n,rho,R,success,J,L_rho,feas,compl,stat_u,stat_v,inner_iters,final_gap";

pub fn trace_row(r: &OuterRecord) -> String {
    let mut s = String::new();
    write!(
        s,
        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.k,
        r.n,
        r.rho,
        r.r,
        u8::from(r.success),
        r.j,
        r.l_rho,
        r.feasibility,
        r.complementarity,
        r.stationarity_u,
        r.stationarity_v,
        r.inner_iters,
        r.final_gap
    )
    .unwrap();
    s
}

/// The whole trace as CSV, header included.
pub fn format_trace_csv(records: &[OuterRecord]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&trace_row(r));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::ProblemSpec;
    use crate::field::{ControlBounds, SpaceField};
    use crate::mesh::Mesh;
    use crate::operator::DiffusionCoefficients;
    use std::f64::consts::PI;

    fn spec(psi: f64) -> ProblemSpec {
        let mesh = Mesh::unit(5, 5, 4, 1.0).unwrap();
        ProblemSpec {
            mesh,
            coeffs: DiffusionCoefficients::unit(&mesh),
            y0: SpaceField::from_fn(&mesh, |x, y| (PI * x).sin() * (PI * y).sin()),
            y_d: SpaceField::zeros(&mesh),
            psi: TimeField::constant(&mesh, psi),
            alpha: 1.0,
            beta: 1.0,
            bounds: ControlBounds::constant(&mesh, -1.0, 1.0, -1.0, 1.0).unwrap(),
            boundary_control: false,
        }
    }

    #[test]
    fn interior_problem_stops_at_first_success() {
        let s = spec(1e6);
        let cfg = AlmConfig::new(1.0, TimeField::zeros(&s.mesh));
        let trace = alm_run(&s, &cfg).unwrap();
        assert_eq!(trace.termination, Termination::ToleranceMet);
        assert_eq!(trace.records.len(), 1);
        assert!(trace.records[0].success);
        assert_eq!(trace.records[0].r, 0.0);
        assert_eq!(trace.final_result.mu_bar.sup_norm(), 0.0);
        assert_eq!(trace.rho_history, vec![1.0, 1.0]);
    }

    #[test]
    fn failure_grows_penalty_and_keeps_counter() {
        let s = spec(0.05);
        let op = DiscreteOperator::assemble(&s.mesh, &s.coeffs).unwrap();
        let cfg = AlmConfig::new(1.0, TimeField::constant(&s.mesh, 1.0));
        let mut state = AlmState::initial(&cfg);
        // force failure with an unreachable threshold
        state.r_plus_history = vec![1e-12];
        let zero_u = TimeField::zeros(&s.mesh);
        let zero_v = BoundaryTimeField::zeros(&s.mesh);
        let out = alm_step(&s, &op, &state, &zero_u, &zero_v, &cfg).unwrap();
        assert!(!out.success);
        assert_eq!(out.state.rho, 2.0);
        assert_eq!(out.state.n, 0);
        assert_eq!(out.state.mu, state.mu);

        let adopt = AlmConfig { failure_update: FailureUpdate::Adopt, ..cfg.clone() };
        let out = alm_step(&s, &op, &state, &zero_u, &zero_v, &adopt).unwrap();
        assert_eq!(out.state.mu, out.result.mu_bar);
        assert_eq!(out.state.rho, 2.0);
    }

    #[test]
    fn outer_cap_is_honoured() {
        let s = spec(0.05);
        let mut cfg = AlmConfig::new(1.0, TimeField::constant(&s.mesh, 10.0));
        cfg.max_outer = 1;
        cfg.eps2 = 0.0;
        let trace = alm_run(&s, &cfg).unwrap();
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.termination, Termination::MaxOuter);
    }

    #[test]
    fn config_validation() {
        let mesh = Mesh::unit(3, 3, 1, 1.0).unwrap();
        let base = AlmConfig::new(1.0, TimeField::zeros(&mesh));
        assert!(base.validate().is_ok());
        let err = AlmConfig { tau: 1.5, ..base.clone() }.validate().unwrap_err();
        assert!(err.to_string().contains("tau must lie in (0,1)"));
        assert!(AlmConfig { gamma: 1.0, ..base.clone() }.validate().is_err());
        assert!(AlmConfig { max_outer: 0, ..base.clone() }.validate().is_err());
        assert!(AlmConfig { mu0: TimeField::constant(&mesh, -1.0), ..base }.validate().is_err());
    }

    #[test]
    fn trace_csv_layout() {
        let rec = OuterRecord {
            k: 3,
            n: 2,
            rho: 4.0,
            r: 0.125,
            success: true,
            j: 1.5,
            l_rho: 2.0,
            feasibility: 0.0,
            complementarity: 0.125,
            stationarity_u: 1e-5,
            stationarity_v: 0.0,
            inner_iters: 17,
            final_gap: 5e-5,
        };
        let csv = format_trace_csv(&[rec]);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), TRACE_HEADER);
        assert_eq!(lines.next().unwrap(), "3,2,4,0.125,1,1.5,2,0,0.125,0.00001,0,17,0.00005");
    }
}
