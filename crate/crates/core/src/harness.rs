//! Synthetic experiments: phantoms, exact-norm noise, a priori parameter
//! choice, rate tables and the least-squares rate fit.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Signal};
use crate::oracle::{extragradient_solve, SplitConfig};
use crate::rng::{stream_id, NormalStream};
use crate::tv::solve_tv_lavrentiev;
use crate::volterra::{Kernel, VolterraOperator};

/// Piecewise-constant phantom as `(start, value)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhantomSpec {
    pieces: Vec<(f64, f64)>,
}

impl PhantomSpec {
    pub fn new(pieces: Vec<(f64, f64)>) -> Result<Self> {
        match pieces.first() {
            Some(&(0.0, _)) => {}
            _ => {
                return Err(Error::InvalidParameter(
                    "phantom must start with a piece at t = 0".into(),
                ))
            }
        }
        if pieces.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidParameter(
                "phantom starts must be strictly increasing".into(),
            ));
        }
        if pieces.iter().any(|(s, v)| !s.is_finite() || !v.is_finite()) {
            return Err(Error::InvalidParameter("phantom entries must be finite".into()));
        }
        Ok(Self { pieces })
    }

    pub fn pieces(&self) -> &[(f64, f64)] {
        &self.pieces
    }

    /// Interior jump times.
    pub fn jump_times(&self) -> Vec<f64> {
        self.pieces[1..].iter().map(|p| p.0).collect()
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let idx = self.pieces.partition_point(|p| p.0 <= t);
        self.pieces[idx.saturating_sub(1)].1
    }
}

/// Samples the phantom at cell midpoints.
pub fn make_phantom(spec: &PhantomSpec, grid: Grid) -> Result<Signal> {
    if let Some(&(start, _)) = spec.pieces.iter().find(|p| p.0 >= grid.horizon()) {
        return Err(Error::InvalidParameter(format!(
            "phantom piece starts at {start}, beyond the horizon {}",
            grid.horizon()
        )));
    }
    Signal::from_fn(grid, |j| spec.value_at(grid.midpoint(j)))
}

/// `f + e` where `e` is a Gaussian draw from stream `stream` of `seed`,
/// rescaled to `‖e‖₂ = δ` exactly.
pub fn add_noise_stream(f: &Signal, delta: f64, seed: u64, stream: u64) -> Result<Signal> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise level must be nonnegative, got {delta}"
        )));
    }
    if delta == 0.0 {
        return Ok(f.clone());
    }
    let draw = Signal::new(*f.grid(), NormalStream::new(seed, stream).normals(f.len()))?;
    let norm = draw.lp_norm(2.0)?;
    f.add(&draw.scaled(delta / norm))
}

pub fn add_noise(f: &Signal, delta: f64, seed: u64) -> Result<Signal> {
    add_noise_stream(f, delta, seed, 0)
}

/// Hölder-type parameter choice `α = c δ^{r(p-1)/(rp-1)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub r: f64,
    pub p: f64,
    pub c: f64,
}

impl RateParams {
    pub fn new(r: f64, p: f64, c: f64) -> Result<Self> {
        let params = Self { r, p, c };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 1.0 && self.p > 1.0 && self.c > 0.0)
            || !(self.r.is_finite() && self.p.is_finite() && self.c.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "rate parameters need r > 1, p > 1, c > 0; got {self:?}"
            )));
        }
        Ok(())
    }

    /// Conjugate exponent of `p`.
    pub fn q(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    /// Conjugate exponent of `r`.
    pub fn s(&self) -> f64 {
        self.r / (self.r - 1.0)
    }

    pub fn alpha_exponent(&self) -> f64 {
        self.r * (self.p - 1.0) / (self.r * self.p - 1.0)
    }

    /// Predicted exponent of the error, `1 / (rp - 1)`.
    pub fn rate_exponent(&self) -> f64 {
        1.0 / (self.r * self.p - 1.0)
    }
}

pub fn choose_alpha(delta: f64, params: &RateParams) -> Result<f64> {
    params.validate()?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "the a priori rule needs δ > 0, got {delta}"
        )));
    }
    Ok(params.c * delta.powf(params.alpha_exponent()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeltaMode {
    /// `δ` is the absolute noise norm.
    #[default]
    Absolute,
    /// `δ` is a fraction of `‖f‖₂`.
    Relative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaRule {
    Hoelder(RateParams),
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    Dp,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kernel: String,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub n: usize,
    pub phantom: PhantomSpec,
    pub deltas: Vec<f64>,
    #[serde(default)]
    pub delta_mode: DeltaMode,
    pub alpha_rule: AlphaRule,
    pub seeds: u32,
    pub master_seed: u64,
    pub solver: SolverChoice,
    pub tol: f64,
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_reader(std::io::BufReader::new(
            std::fs::File::open(path)?,
        ))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        Grid::new(self.horizon, self.n)?;
        if self.deltas.is_empty() {
            return Err(Error::InvalidParameter("no noise levels given".into()));
        }
        if self.deltas.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return Err(Error::InvalidParameter("noise levels must be nonnegative".into()));
        }
        if self.deltas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidParameter(
                "noise levels must be strictly decreasing".into(),
            ));
        }
        match &self.alpha_rule {
            AlphaRule::Hoelder(p) => {
                p.validate()?;
                if self.deltas.contains(&0.0) {
                    return Err(Error::InvalidParameter(
                        "the Hölder rule needs positive noise levels; give explicit α for δ = 0"
                            .into(),
                    ));
                }
            }
            AlphaRule::Explicit(alphas) => {
                if alphas.len() != self.deltas.len() || alphas.iter().any(|a| !(*a > 0.0)) {
                    return Err(Error::InvalidParameter(
                        "explicit α list must be positive and match the noise levels".into(),
                    ));
                }
            }
        }
        if self.seeds == 0 {
            return Err(Error::InvalidParameter("at least one seed is needed".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        Ok(())
    }

    fn setup(&self) -> Result<Setup> {
        self.validate()?;
        let grid = Grid::new(self.horizon, self.n)?;
        let op = VolterraOperator::discretize(&Kernel::parse(&self.kernel)?, grid)?;
        let truth = make_phantom(&self.phantom, grid)?;
        let exact = op.apply(&truth)?;
        let data_norm = exact.lp_norm(2.0)?;
        Ok(Setup {
            op,
            truth,
            exact,
            data_norm,
        })
    }
}

struct Setup {
    op: VolterraOperator,
    truth: Signal,
    exact: Signal,
    data_norm: f64,
}

/// One noise level, averaged over the successful seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    /// Absolute noise norm `‖f^δ - f‖₂`.
    pub delta: f64,
    pub alpha: f64,
    pub error_l2: f64,
    pub error_l1: f64,
    /// Mean solver work: trace work for the tube solver, iterations for the oracle.
    pub work: f64,
    /// Number of seeds that produced a solution.
    pub seeds: u32,
    /// Number of seeds whose solve failed.
    pub failures: u32,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
}

/// Reconstruction of a single trial, also used by the figure scenarios.
#[derive(Debug, Clone)]
pub struct Trial {
    pub truth: Signal,
    pub data: Signal,
    pub solution: Signal,
    pub delta: f64,
    pub alpha: f64,
    pub work: f64,
}

fn solve_with(
    cfg: &ExperimentConfig,
    op: &VolterraOperator,
    data: &Signal,
    alpha: f64,
) -> Result<(Signal, f64)> {
    match cfg.solver {
        SolverChoice::Dp => {
            let (u, trace) = solve_tv_lavrentiev(op, data, alpha)?;
            Ok((u, trace.work as f64))
        }
        SolverChoice::Oracle => {
            let split = SplitConfig::for_operator(op).with_tol(cfg.tol);
            let out = extragradient_solve(op, data, alpha, &split, None)?;
            if !out.converged {
                return Err(Error::NumericFailure {
                    message: format!("oracle stopped after {} iterations", out.iterations),
                    achieved: out.residual,
                });
            }
            Ok((out.solution, out.iterations as f64))
        }
    }
}

fn absolute_delta(cfg: &ExperimentConfig, setup: &Setup, index: usize) -> f64 {
    match cfg.delta_mode {
        DeltaMode::Absolute => cfg.deltas[index],
        DeltaMode::Relative => cfg.deltas[index] * setup.data_norm,
    }
}

fn alpha_for(cfg: &ExperimentConfig, delta: f64, index: usize) -> Result<f64> {
    match &cfg.alpha_rule {
        AlphaRule::Hoelder(params) => choose_alpha(delta, params),
        AlphaRule::Explicit(alphas) => Ok(alphas[index]),
    }
}

fn run_trial_with(
    cfg: &ExperimentConfig,
    setup: &Setup,
    index: usize,
    trial: u32,
) -> Result<Trial> {
    let delta = absolute_delta(cfg, setup, index);
    let alpha = alpha_for(cfg, delta, index)?;
    let stream = stream_id(index as u32, trial);
    let data = add_noise_stream(&setup.exact, delta, cfg.master_seed, stream)?;
    let (solution, work) = solve_with(cfg, &setup.op, &data, alpha)?;
    Ok(Trial {
        truth: setup.truth.clone(),
        data,
        solution,
        delta,
        alpha,
        work,
    })
}

/// Reconstruction for noise level `index` and seed `trial`.
pub fn run_trial(cfg: &ExperimentConfig, index: usize, trial: u32) -> Result<Trial> {
    let setup = cfg.setup()?;
    if index >= cfg.deltas.len() {
        return Err(Error::InvalidParameter(format!("no noise level {index}")));
    }
    run_trial_with(cfg, &setup, index, trial)
}

fn rate_row(cfg: &ExperimentConfig, setup: &Setup, index: usize) -> Result<RateRow> {
    let delta = absolute_delta(cfg, setup, index);
    let alpha = alpha_for(cfg, delta, index)?;
    let (mut l2, mut l1, mut work) = (0.0, 0.0, 0.0);
    let mut ok = 0u32;
    for trial in 0..cfg.seeds {
        match run_trial_with(cfg, setup, index, trial) {
            Ok(t) => {
                let diff = t.solution.sub(&setup.truth)?;
                l2 += diff.lp_norm(2.0)?;
                l1 += diff.lp_norm(1.0)?;
                work += t.work;
                ok += 1;
            }
            Err(Error::SolverFailure { .. } | Error::NumericFailure { .. } | Error::NonFinite(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let mean = |s: f64| if ok > 0 { s / f64::from(ok) } else { f64::NAN };
    Ok(RateRow {
        delta,
        alpha,
        error_l2: mean(l2),
        error_l1: mean(l1),
        work: mean(work),
        seeds: ok,
        failures: cfg.seeds - ok,
    })
}

/// Regenerates row `index` of the experiment in isolation.
pub fn run_rate_row(cfg: &ExperimentConfig, index: usize) -> Result<RateRow> {
    let setup = cfg.setup()?;
    if index >= cfg.deltas.len() {
        return Err(Error::InvalidParameter(format!("no noise level {index}")));
    }
    rate_row(cfg, &setup, index)
}

/// Runs all noise levels; rows are computed in parallel and kept in config order.
pub fn run_rate_experiment(cfg: &ExperimentConfig) -> Result<RateTable> {
    let setup = cfg.setup()?;
    let rows = (0..cfg.deltas.len())
        .into_par_iter()
        .map(|index| rate_row(cfg, &setup, index))
        .collect::<Result<Vec<_>>>()?;
    Ok(RateTable { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
}

/// Least-squares fit of `log(error_l2)` against `log(δ)`. Rows without a
/// successful seed are skipped.
pub fn estimate_rate(table: &RateTable) -> Result<RateFit> {
    let mut points = Vec::new();
    for row in table.rows.iter().filter(|r| r.error_l2.is_finite()) {
        if !(row.error_l2 > 0.0 && row.delta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "rate fit needs positive δ and errors, got δ = {}, error = {}",
                row.delta, row.error_l2
            )));
        }
        points.push((row.delta.ln(), row.error_l2.ln()));
    }
    let m = points.len();
    if m < 3 {
        return Err(Error::InvalidParameter(format!(
            "rate fit needs at least 3 valid rows, got {m}"
        )));
    }
    let mf = m as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / mf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / mf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("all noise levels coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let stderr = (rss / (mf - 2.0) / sxx).sqrt();
    Ok(RateFit {
        slope,
        intercept,
        stderr,
    })
}

/// Times `t_{j+1}` of the boundaries where `|u_{j+1} - u_j| > threshold`.
pub fn jump_times(u: &Signal, threshold: f64) -> Vec<f64> {
    let grid = u.grid();
    u.values()
        .windows(2)
        .enumerate()
        .filter(|(_, w)| (w[1] - w[0]).abs() > threshold)
        .map(|(j, _)| grid.right_endpoint(j))
        .collect()
}

/// Configurations of the reconstruction scenarios shipped in `scenarios/`.
pub mod scenarios {
    use super::ExperimentConfig;

    const ABEL_THREE_STEP: &str = include_str!("../../../scenarios/abel_three_step.json");
    const EXPONENTIAL_FIGURE: &str = include_str!("../../../scenarios/exponential_figure.json");
    const EXPONENTIAL_RATES: &str = include_str!("../../../scenarios/exponential_rates.json");

    fn parse(text: &str) -> ExperimentConfig {
        let cfg: ExperimentConfig = serde_json::from_str(text).expect("bundled scenario parses");
        cfg.validate().expect("bundled scenario is valid");
        cfg
    }

    /// Abel(1/3) kernel, three-step phantom, 5% relative noise.
    pub fn abel_three_step() -> ExperimentConfig {
        parse(ABEL_THREE_STEP)
    }

    /// Exponential kernel `exp(-t/10)` on `[0, 100]`, 20% relative noise.
    pub fn exponential_figure() -> ExperimentConfig {
        parse(EXPONENTIAL_FIGURE)
    }

    /// Same operator and phantom, ten noise levels from 10% to 0.01%.
    pub fn exponential_rates() -> ExperimentConfig {
        parse(EXPONENTIAL_RATES)
    }
}
