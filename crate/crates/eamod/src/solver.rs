//! Desk-scale LP solving. The model is handed to an embedded sparse
//! interior-point backend (Clarabel); city-scale instances go through the
//! LP/MPS export path instead.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use thiserror::Error;

use crate::lpcore::{residuals, Family, LpModel, Sense};

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub max_iters: usize,
    pub scaling: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            feasibility_tol: 1e-7,
            optimality_tol: 1e-7,
            max_iters: 1_000_000,
            scaling: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        for tol in [self.feasibility_tol, self.optimality_tol] {
            if !(tol > 0.0 && tol <= 1e-3) {
                return Err(SolveError::Numerical(format!(
                    "tolerance {tol} outside (0, 1e-3]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterLimit,
}

#[derive(Debug, Clone)]
pub struct SolveStats {
    /// Simplex iteration count when the backend reports one.
    pub iterations: Option<u64>,
    pub wall_time: Duration,
    pub objective: f64,
    pub status: SolveStatus,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("infeasible model; relaxing the `{family}` family restores feasibility")]
    Infeasible { family: String },
    #[error("unbounded model: {ray}")]
    Unbounded { ray: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// Model rows plus variable bounds as `Ax + s = b`, `s` in a zero cone
/// (equalities first) followed by a nonnegative cone (all inequalities
/// normalized to `≤`).
fn build_conic(
    model: &LpModel,
    skip: Option<Family>,
) -> (CscMatrix<f64>, Vec<f64>, Vec<SupportedConeT<f64>>) {
    let n = model.n_vars();
    // (row, col, value) triplets and right-hand sides, equalities first
    let mut eq: Vec<(usize, usize, f64)> = Vec::new();
    let mut eq_b: Vec<f64> = Vec::new();
    let mut le: Vec<(usize, usize, f64)> = Vec::new();
    let mut le_b: Vec<f64> = Vec::new();
    for row in &model.rows {
        if Some(row.family) == skip {
            continue;
        }
        match row.sense {
            Sense::Eq => {
                let r = eq_b.len();
                eq.extend(row.coeffs.iter().map(|&(v, c)| (r, v, c)));
                eq_b.push(row.rhs);
            }
            Sense::Le => {
                let r = le_b.len();
                le.extend(row.coeffs.iter().map(|&(v, c)| (r, v, c)));
                le_b.push(row.rhs);
            }
            Sense::Ge => {
                let r = le_b.len();
                le.extend(row.coeffs.iter().map(|&(v, c)| (r, v, -c)));
                le_b.push(-row.rhs);
            }
        }
    }
    for v in 0..n {
        if model.lower[v].is_finite() {
            let r = le_b.len();
            le.push((r, v, -1.0));
            le_b.push(-model.lower[v]);
        }
        if model.upper[v].is_finite() {
            let r = le_b.len();
            le.push((r, v, 1.0));
            le_b.push(model.upper[v]);
        }
    }

    let n_eq = eq_b.len();
    let m = n_eq + le_b.len();
    let mut triplets = eq;
    triplets.extend(le.into_iter().map(|(r, v, c)| (r + n_eq, v, c)));
    triplets.sort_unstable_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));

    let mut colptr = vec![0usize; n + 1];
    for &(_, col, _) in &triplets {
        colptr[col + 1] += 1;
    }
    for c in 0..n {
        colptr[c + 1] += colptr[c];
    }
    let rowval: Vec<usize> = triplets.iter().map(|t| t.0).collect();
    let nzval: Vec<f64> = triplets.iter().map(|t| t.2).collect();
    let a = CscMatrix::new(m, n, colptr, rowval, nzval);

    let mut b = eq_b;
    b.extend(le_b);
    let cones = vec![
        SupportedConeT::ZeroConeT(n_eq),
        SupportedConeT::NonnegativeConeT(m - n_eq),
    ];
    (a, b, cones)
}

fn settings(cfg: &SolverConfig) -> DefaultSettings<f64> {
    let mut s = DefaultSettings::default();
    s.verbose = false;
    s.max_iter = cfg.max_iters.min(u32::MAX as usize) as u32;
    s.equilibrate_enable = cfg.scaling;
    s.tol_feas = (cfg.feasibility_tol / 10.0).min(1e-12);
    s.tol_gap_abs = (cfg.optimality_tol / 10.0).min(1e-12);
    s.tol_gap_rel = (cfg.optimality_tol / 10.0).min(1e-12);
    s
}

enum RawOutcome {
    Solved(Vec<f64>, u64),
    Infeasible,
    Unbounded,
    Failed(String),
}

fn solve_raw(model: &LpModel, skip: Option<Family>, cfg: &SolverConfig) -> RawOutcome {
    let (a, b, cones) = build_conic(model, skip);
    let p = CscMatrix::zeros((model.n_vars(), model.n_vars()));
    let mut solver =
        match DefaultSolver::new(&p, &model.objective, &a, &b, &cones, settings(cfg)) {
            Ok(s) => s,
            Err(e) => return RawOutcome::Failed(format!("{e:?}")),
        };
    solver.solve();
    let iters = u64::from(solver.info.iterations);
    match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => {
            RawOutcome::Solved(solver.solution.x.clone(), iters)
        }
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            RawOutcome::Infeasible
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
            RawOutcome::Unbounded
        }
        other => RawOutcome::Failed(format!("{other:?}")),
    }
}

/// Finds a constraint family whose removal restores feasibility, as an
/// infeasibility witness. Families are probed from the most commonly
/// over-constrained (demand coverage) outward.
fn diagnose_infeasibility(model: &LpModel) -> String {
    let probe_order = [
        Family::RequestCoverage,
        Family::StationCapacity,
        Family::PeakPower,
        Family::Periodicity,
        Family::FleetSize,
        Family::Conservation,
    ];
    for family in probe_order {
        if !model.rows.iter().any(|r| r.family == family) {
            continue;
        }
        if matches!(
            solve_raw(model, Some(family), &SolverConfig::default()),
            RawOutcome::Solved(..)
        ) {
            return family.to_string();
        }
    }
    "unknown (no single family relaxation restores feasibility)".to_string()
}

/// Solves the model to optimality. `Optimal` status guarantees every
/// residual is within `feasibility_tol`.
pub fn solve(model: &LpModel, cfg: &SolverConfig) -> Result<(Vec<f64>, SolveStats), SolveError> {
    cfg.validate()?;
    let start = Instant::now();
    match solve_raw(model, None, cfg) {
        RawOutcome::Solved(x, iterations) => {
            let res = residuals(model, &x);
            let worst = res.values().fold(0.0f64, |a, b| a.max(*b));
            if worst > cfg.feasibility_tol {
                return Err(SolveError::Numerical(format!(
                    "solution violates constraints by {worst:.3e} (> {:.1e})",
                    cfg.feasibility_tol
                )));
            }
            let stats = SolveStats {
                iterations: Some(iterations),
                wall_time: start.elapsed(),
                objective: model.objective_value(&x),
                status: SolveStatus::Optimal,
            };
            Ok((x, stats))
        }
        RawOutcome::Infeasible => Err(SolveError::Infeasible {
            family: diagnose_infeasibility(model),
        }),
        RawOutcome::Unbounded => Err(SolveError::Unbounded {
            ray: "a nonnegative direction with negative cost exists".into(),
        }),
        RawOutcome::Failed(e) => Err(SolveError::Numerical(e)),
    }
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub residuals: BTreeMap<Family, f64>,
    pub max_residual: f64,
    /// Worst peak-variable slack over locations with nonzero charging, when
    /// the demand charge is positive (the objective should pin peaks tight).
    pub peak_slack: Option<f64>,
    pub ok: bool,
}

/// Residual check plus peak-tightness check for a candidate solution.
pub fn verify(model: &LpModel, x: &[f64], cfg: &SolverConfig) -> VerifyReport {
    let res = residuals(model, x);
    let max_residual = res.values().fold(0.0f64, |a, b| a.max(*b));

    let p_demand = (0..model.vars.n_locs)
        .map(|l| model.objective[model.vars.peak(l)])
        .fold(0.0f64, f64::max);
    let peak_slack = if p_demand > 0.0 {
        let mut max_power = vec![0.0f64; model.vars.n_locs];
        for row in &model.rows {
            if row.family != Family::PeakPower {
                continue;
            }
            let (loc, _) = row.key.expect("peak rows carry a (loc, t) key");
            // row lhs is power - peak, so add the peak value back
            let power = row.lhs(x) + x[model.vars.peak(loc)];
            max_power[loc] = max_power[loc].max(power);
        }
        let slack = (0..model.vars.n_locs)
            .filter(|l| max_power[*l] > cfg.feasibility_tol)
            .map(|l| x[model.vars.peak(l)] - max_power[l])
            .fold(0.0f64, f64::max);
        Some(slack)
    } else {
        None
    };

    let ok = max_residual <= cfg.feasibility_tol
        && peak_slack.map_or(true, |s| s <= 1e-6);
    VerifyReport {
        residuals: res,
        max_residual,
        peak_slack,
        ok,
    }
}
