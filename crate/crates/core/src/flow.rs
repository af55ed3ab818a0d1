//! The curvature ODE `Rm' = c·(Rm² + Rm#)` with monitors.

use std::io::Write;

use serde::Serialize;

use crate::error::{CurvError, Result};
use crate::functionals::{flag_pinching, min_complex_sectional, sectional_pinching};
use crate::operator::{sharp, BivectorOperator, CurvatureOperator};
use crate::search::SearchOptions;

/// Relative local error target of the adaptive integrator.
pub const ADAPTIVE_RTOL: f64 = 1e-8;
/// Growth factor of `‖op‖` over `‖op₀‖` declared a blow-up.
pub const BLOW_UP_GROWTH: f64 = 1e12;
/// Adaptive steps below this size end the run.
pub const MIN_STEP: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Rk4,
    Rk4Adaptive,
}

impl std::str::FromStr for Method {
    type Err = CurvError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rk4" => Ok(Method::Rk4),
            "rk4-adaptive" => Ok(Method::Rk4Adaptive),
            other => Err(CurvError::ConfigInvalid(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowConfig {
    pub t_end: f64,
    pub dt: f64,
    pub method: Method,
    /// Coefficient of `Rm² + Rm#`.
    pub factor: f64,
    /// Rescale after each step so that `Scal` keeps its initial value.
    pub normalize: bool,
    /// Search budget of the pinching and CSC monitors; 0 skips them.
    pub monitor_budget: usize,
    pub seed: u64,
    /// Accept factors other than 1 and 2.
    pub allow_any_factor: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            t_end: 0.1,
            dt: 1e-4,
            method: Method::Rk4,
            factor: 2.0,
            normalize: false,
            monitor_budget: 0,
            seed: 0,
            allow_any_factor: false,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CurvError::ConfigInvalid(m));
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if !(self.dt > 0.0) || self.dt > self.t_end {
            return bad(format!("dt must lie in (0, t_end], got {}", self.dt));
        }
        if !self.factor.is_finite() || (!self.allow_any_factor && self.factor != 1.0 && self.factor != 2.0) {
            return bad(format!("factor must be 1 or 2, got {}", self.factor));
        }
        Ok(())
    }
}

/// `factor·(op² + op#op)`.
pub fn ode_rhs(op: &BivectorOperator, factor: f64) -> BivectorOperator {
    let sq = op.square();
    let sh = sharp(op, op).expect("same dimension");
    &(&sq + &sh) * factor
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonitorRow {
    pub t: f64,
    pub scal: f64,
    pub ric_min: f64,
    pub ric_max: f64,
    pub lambda_flag: Option<f64>,
    pub lambda_sec: Option<f64>,
    pub min_csc: Option<f64>,
    pub dist_to_round: Option<f64>,
    pub step_accepted: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    TEnd,
    BlowUp,
    StepUnderflow,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::TEnd => "t_end",
            Termination::BlowUp => "blow_up",
            Termination::StepUnderflow => "step_underflow",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub config: FlowConfig,
    pub steps: Vec<(f64, CurvatureOperator, MonitorRow)>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn last(&self) -> &(f64, CurvatureOperator, MonitorRow) {
        self.steps.last().expect("the initial state is always recorded")
    }

    pub fn rows(&self) -> impl Iterator<Item = &MonitorRow> {
        self.steps.iter().map(|s| &s.2)
    }
}

/// `‖Rm/‖Rm‖ − I/‖I‖‖`, undefined for the zero operator.
pub fn dist_to_round(op: &BivectorOperator) -> Option<f64> {
    let nrm = op.norm();
    if nrm == 0.0 {
        return None;
    }
    let id = BivectorOperator::identity(op.n());
    let idn = id.norm();
    Some((&(op * (1.0 / nrm)) - &(&id * (1.0 / idn))).norm())
}

pub fn monitor(op: &CurvatureOperator, t: f64, cfg: &FlowConfig, accepted: bool) -> MonitorRow {
    let ric = op.ricci().eigenvalues();
    let (lambda_flag, lambda_sec, min_csc) = if cfg.monitor_budget > 0 {
        let opts = SearchOptions::new(cfg.monitor_budget, cfg.seed);
        (
            flag_pinching(op, &opts).ok().and_then(|r| r.value),
            sectional_pinching(op, &opts).value,
            Some(min_complex_sectional(op, &opts).value),
        )
    } else {
        (None, None, None)
    };
    MonitorRow {
        t,
        scal: op.scalar_curvature(),
        ric_min: ric[0],
        ric_max: ric[ric.len() - 1],
        lambda_flag,
        lambda_sec,
        min_csc,
        dist_to_round: dist_to_round(op),
        step_accepted: accepted,
    }
}

fn rk4_step(y: &BivectorOperator, h: f64, factor: f64) -> BivectorOperator {
    let k1 = ode_rhs(y, factor);
    let k2 = ode_rhs(&(y + &(&k1 * (h / 2.0))), factor);
    let k3 = ode_rhs(&(y + &(&k2 * (h / 2.0))), factor);
    let k4 = ode_rhs(&(y + &(&k3 * h)), factor);
    let incr = &(&(&k1 + &(&k2 * 2.0)) + &(&k3 * 2.0)) + &k4;
    y + &(&incr * (h / 6.0))
}

fn finite(op: &BivectorOperator) -> bool {
    op.matrix().iter().all(|v| v.is_finite())
}

/// Integrates from `op0` until `t_end`, a blow-up or a step underflow.
pub fn integrate(op0: &CurvatureOperator, cfg: &FlowConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let norm0 = op0.norm();
    let scal0 = op0.scalar_curvature();
    let mut steps = vec![(0.0, op0.clone(), monitor(op0, 0.0, cfg, true))];
    let mut y = op0.as_operator().clone();
    let mut t = 0.0;
    let mut h = cfg.dt;
    let blown = |y: &BivectorOperator| !finite(y) || y.norm() > BLOW_UP_GROWTH * norm0;
    let termination = loop {
        if t >= cfg.t_end * (1.0 - 1e-14) {
            break Termination::TEnd;
        }
        let step = h.min(cfg.t_end - t);
        let (next, taken) = match cfg.method {
            Method::Rk4 => (rk4_step(&y, step, cfg.factor), step),
            Method::Rk4Adaptive => {
                let full = rk4_step(&y, step, cfg.factor);
                let half = rk4_step(&rk4_step(&y, step / 2.0, cfg.factor), step / 2.0, cfg.factor);
                let scale = half.norm().max(y.norm()).max(f64::MIN_POSITIVE);
                let err = (&half - &full).norm() / 15.0 / scale;
                let grow = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * (ADAPTIVE_RTOL / err).powf(0.2)).clamp(0.2, 5.0)
                };
                if !err.is_finite() || err > ADAPTIVE_RTOL {
                    h = step * if err.is_finite() { grow } else { 0.2 };
                    if h < MIN_STEP {
                        break Termination::StepUnderflow;
                    }
                    continue;
                }
                h = step * grow;
                // Richardson extrapolation of the two estimates
                (&half + &(&(&half - &full) * (1.0 / 15.0)), step)
            }
        };
        let t_next = t + taken;
        if blown(&next) {
            if finite(&next) {
                let op = CurvatureOperator::trusted(next);
                let row = monitor(&op, t_next, &FlowConfig { monitor_budget: 0, ..cfg.clone() }, false);
                steps.push((t_next, op, row));
            }
            break Termination::BlowUp;
        }
        let mut op = CurvatureOperator::trusted(next);
        if cfg.normalize {
            let s = op.scalar_curvature();
            if s != 0.0 && scal0 != 0.0 {
                op = op.scaled(scal0 / s);
            }
        }
        t = t_next;
        let row = monitor(&op, t, cfg, true);
        y = op.as_operator().clone();
        steps.push((t, op, row));
    };
    Ok(Trajectory {
        config: cfg.clone(),
        steps,
        termination,
    })
}

pub const CSV_HEADER: [&str; 9] = [
    "t",
    "scal",
    "ric_min",
    "ric_max",
    "lambda_flag",
    "lambda_sec",
    "min_csc",
    "dist_to_round",
    "step_accepted",
];

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Monitor rows as CSV; undefined values are empty fields.
pub fn write_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in traj.rows() {
        w.write_record([
            r.t.to_string(),
            r.scal.to_string(),
            r.ric_min.to_string(),
            r.ric_max.to_string(),
            fmt_opt(r.lambda_flag),
            fmt_opt(r.lambda_sec),
            fmt_opt(r.min_csc),
            fmt_opt(r.dist_to_round),
            r.step_accepted.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> CurvError {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => CurvError::Io(e),
        other => CurvError::Format(format!("{other:?}")),
    }
}

/// Rounding allowance of the scalar-curvature window, relative to `Scal`.
pub const SCAL_SLACK: f64 = 1e-12;

/// Parameters of the time-dependent family `S(t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StParams {
    pub eps: f64,
    pub c: f64,
    pub c2: f64,
    pub c3: f64,
}

impl StParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(CurvError::BadParams(format!("eps must lie in (0, 1/2), got {}", self.eps)));
        }
        for (name, v) in [("C", self.c), ("C2", self.c2), ("C3", self.c3)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CurvError::BadParams(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// `(1 − ε − C₃t)/4`.
    pub fn flag_floor(&self, t: f64) -> f64 {
        (1.0 - self.eps - self.c3 * t) / 4.0
    }

    /// `C₃·ε·e^{C₃²t}`.
    pub fn csc_shift(&self, t: f64) -> f64 {
        self.c3 * self.eps * (self.c3 * self.c3 * t).exp()
    }
}

/// Membership of `op` in `S(t)`, one verdict per defining condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct StMembership {
    pub scal_ok: bool,
    pub flag_ok: bool,
    pub csc_shift_ok: bool,
}

impl StMembership {
    pub fn all(&self) -> bool {
        self.scal_ok && self.flag_ok && self.csc_shift_ok
    }
}

/// `1 ≤ Scal ≤ C + C₂t`, flag pinching `≥ (1−ε−C₃t)/4`, and
/// `min CSC(op + C₃ε·e^{C₃²t}·I) ≥ −1e−8`.
pub fn s_t_membership(
    op: &CurvatureOperator,
    t: f64,
    params: &StParams,
    opts: &SearchOptions,
) -> Result<StMembership> {
    params.validate()?;
    if !(t >= 0.0) {
        return Err(CurvError::BadParams(format!("t must be nonnegative, got {t}")));
    }
    let scal = op.scalar_curvature();
    let slack = SCAL_SLACK * scal.abs().max(1.0);
    let scal_ok = scal >= 1.0 - slack && scal <= params.c + params.c2 * t + slack;
    let flag_ok = match flag_pinching(op, opts) {
        Ok(r) => r.value.is_some_and(|v| v >= params.flag_floor(t)),
        Err(_) => false,
    };
    let shifted = op.shifted(params.csc_shift(t));
    let csc_shift_ok = min_complex_sectional(&shifted, opts).value >= -1e-8;
    Ok(StMembership {
        scal_ok,
        flag_ok,
        csc_shift_ok,
    })
}

/// Grid `t_max·2^{k−(size−1)}`, `k = 0..size`.
pub fn probe_grid(t_max: f64, size: usize) -> Vec<f64> {
    (0..size)
        .map(|k| t_max * 2f64.powi(k as i32 - (size as i32 - 1)))
        .collect()
}

/// Largest grid `ε` with `min CSC(op + t(op² + op#op)) > 1e−10‖op‖` for all grid `t ≤ ε`.
pub fn epsilon_probe(
    op: &CurvatureOperator,
    t_max: f64,
    grid_size: usize,
    opts: &SearchOptions,
) -> Result<f64> {
    if op.norm() == 0.0 {
        return Err(CurvError::HypothesisNotMet("operator is zero".into()));
    }
    if !(t_max > 0.0) || grid_size == 0 {
        return Err(CurvError::BadParams("t_max must be positive and the grid nonempty".into()));
    }
    let lam = flag_pinching(op, opts)
        .map_err(|e| CurvError::HypothesisNotMet(format!("sectional curvature is not nonnegative: {e}")))?
        .value
        .unwrap_or(0.0);
    if lam < 0.25 - 1e-9 {
        return Err(CurvError::HypothesisNotMet(format!(
            "flag pinching {lam} is below 1/4"
        )));
    }
    let drift = ode_rhs(op, 1.0);
    let floor = 1e-10 * op.norm();
    let mut eps = 0.0;
    for t in probe_grid(t_max, grid_size) {
        let probe = CurvatureOperator::trusted(op.as_operator() + &(&drift * t));
        if min_complex_sectional(&probe, opts).value > floor {
            eps = t;
        } else {
            break;
        }
    }
    Ok(eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;

    #[test]
    fn rhs_examples() {
        let id = CurvatureOperator::identity(4);
        let r = ode_rhs(&id, 2.0);
        assert!((r.matrix() - BivectorOperator::identity(4).matrix() * 6.0).norm() < 1e-12);
        assert_eq!(ode_rhs(&BivectorOperator::zero(4), 2.0), BivectorOperator::zero(4));
        let c = 0.7;
        let r = ode_rhs(&(&BivectorOperator::identity(6) * c), 2.0);
        let want = 2.0 * 5.0 * c * c;
        assert!((r.matrix() - BivectorOperator::identity(6).matrix() * want).norm() < 1e-12);
        let op = gallery::random_bianchi(5, 4);
        assert!(ode_rhs(&op, 2.0).bianchi_residual() <= 1e-10 * (1.0 + op.norm().powi(2)));
    }

    #[test]
    fn round_ray_closed_form() {
        let cfg = FlowConfig::default();
        let tr = integrate(&CurvatureOperator::identity(4), &cfg).unwrap();
        assert_eq!(tr.termination, Termination::TEnd);
        let (t, op, row) = tr.last();
        assert!((t - 0.1).abs() < 1e-12);
        assert!((op.matrix()[(0, 0)] - 2.5).abs() < 1e-6);
        assert!((row.scal - 30.0).abs() < 1e-4);
        assert!(tr.rows().all(|r| r.dist_to_round.unwrap() <= 1e-8));
    }

    #[test]
    fn blow_up_near_pole() {
        let cfg = FlowConfig {
            t_end: 0.2,
            ..FlowConfig::default()
        };
        let tr = integrate(&CurvatureOperator::identity(4), &cfg).unwrap();
        assert_eq!(tr.termination, Termination::BlowUp);
        assert!((tr.last().0 - 1.0 / 6.0).abs() < 1e-3, "{}", tr.last().0);
    }

    #[test]
    fn adaptive_matches_closed_form() {
        let cfg = FlowConfig {
            method: Method::Rk4Adaptive,
            dt: 1e-2,
            ..FlowConfig::default()
        };
        let tr = integrate(&CurvatureOperator::identity(4), &cfg).unwrap();
        assert!((tr.last().1.matrix()[(0, 0)] - 2.5).abs() < 1e-6);
        let cfg = FlowConfig { t_end: 0.2, ..cfg };
        let tr = integrate(&CurvatureOperator::identity(4), &cfg).unwrap();
        assert_ne!(tr.termination, Termination::TEnd);
        assert!((tr.last().0 - 1.0 / 6.0).abs() < 1e-3, "{}", tr.last().0);
    }

    #[test]
    fn zero_and_normalized() {
        let tr = integrate(&CurvatureOperator::zero(4), &FlowConfig::default()).unwrap();
        assert_eq!(tr.termination, Termination::TEnd);
        assert!(tr.steps.iter().all(|s| s.1 == CurvatureOperator::zero(4)));
        let cfg = FlowConfig {
            normalize: true,
            t_end: 0.2,
            ..FlowConfig::default()
        };
        let op = gallery::section4_example(4).unwrap().scaled(0.1);
        let tr = integrate(&op, &cfg).unwrap();
        assert!(tr.rows().all(|r| (r.scal - 2.6).abs() < 1e-10));
    }

    #[test]
    fn config_validation() {
        let bad = [
            FlowConfig { t_end: 0.0, ..FlowConfig::default() },
            FlowConfig { dt: 1.0, ..FlowConfig::default() },
            FlowConfig { factor: 3.0, ..FlowConfig::default() },
        ];
        for cfg in bad {
            assert!(matches!(integrate(&CurvatureOperator::identity(4), &cfg), Err(CurvError::ConfigInvalid(_))));
        }
        let ok = FlowConfig { factor: 3.0, allow_any_factor: true, ..FlowConfig::default() };
        assert!(ok.validate().is_ok());
    }

    #[test]
    fn csv_layout() {
        let cfg = FlowConfig { t_end: 2e-4, ..FlowConfig::default() };
        let tr = integrate(&CurvatureOperator::zero(4), &cfg).unwrap();
        let mut buf = Vec::new();
        write_csv(&tr, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,scal,ric_min,ric_max,lambda_flag,lambda_sec,min_csc,dist_to_round,step_accepted"));
        assert_eq!(lines.next(), Some("0,0,0,0,,,,,true"));
        assert_eq!(lines.count(), 2);
    }

    #[test]
    fn membership_examples() {
        let p = StParams { eps: 0.1, c: 10.0, c2: 1.0, c3: 1.0 };
        let o = SearchOptions::new(10_000, 0);
        let round = CurvatureOperator::identity(5).scaled(1.0 / 20.0);
        assert!(s_t_membership(&round, 0.0, &p, &o).unwrap().all());
        let s4 = gallery::section4_example(4).unwrap().scaled(1.0 / 26.0);
        assert!(s_t_membership(&s4, 0.0, &p, &o).unwrap().flag_ok);
        assert!(!s_t_membership(&CurvatureOperator::zero(5), 0.0, &p, &o).unwrap().scal_ok);
        let bad = StParams { eps: 0.7, ..p };
        assert!(matches!(s_t_membership(&round, 0.0, &bad, &o), Err(CurvError::BadParams(_))));
    }

    #[test]
    fn probe_examples() {
        let o = SearchOptions::new(4_000, 0);
        assert_eq!(epsilon_probe(&CurvatureOperator::identity(4), 0.5, 16, &o).unwrap(), 0.5);
        assert_eq!(epsilon_probe(&gallery::fubini_study(2).unwrap(), 0.5, 16, &o).unwrap(), 0.0);
        assert!(matches!(
            epsilon_probe(&CurvatureOperator::zero(4), 0.5, 16, &o),
            Err(CurvError::HypothesisNotMet(_))
        ));
        let g = probe_grid(1.0, 64);
        assert_eq!((g[0], g[63]), (2f64.powi(-63), 1.0));
    }
}
