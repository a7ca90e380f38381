//! Reference solver for `A u + α ∂TV(u) ∋ f` by extragradient splitting.
//!
//! One iteration is a predictor and a corrector,
//!
//! ```text
//! ū  = prox(u - τ (A u - f))
//! u⁺ = prox(u - τ (A ū - f))
//! ```
//!
//! with `prox` the taut-string minimiser of `(1/2τ) ‖· - g‖² + α TV`. The
//! operator is monotone and Lipschitz but not cocoercive, which is why the
//! plain forward-backward step is not used. The code path shares nothing with
//! the tube solver except the taut string itself.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Signal;
use crate::tv::taut_string_prox;
use crate::volterra::VolterraOperator;

/// Default power-iteration count for the operator norm.
pub const NORM_ITERATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub tau: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Estimate of `‖A‖` used to validate `tau`.
    pub lipschitz: f64,
    /// Keep the residual of every iteration in the result.
    #[serde(default)]
    pub record_history: bool,
}

impl SplitConfig {
    /// `τ = 0.9 / ‖A‖`, `tol = 1e-10`, `max_iter = 10⁶`.
    pub fn for_operator(op: &VolterraOperator) -> Self {
        let lipschitz = operator_norm_estimate(op, NORM_ITERATIONS);
        let tau = if lipschitz > 0.0 { 0.9 / lipschitz } else { 1.0 };
        Self {
            tau,
            tol: 1e-10,
            max_iter: 1_000_000,
            lipschitz,
            record_history: false,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) || self.tau * self.lipschitz >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "step {} violates τ‖A‖ < 1 with ‖A‖ ≈ {}",
                self.tau, self.lipschitz
            )));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidParameter(
                "tolerance must be positive and max_iter at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Spectral norm of the weight matrix by power iteration on `MᵀM` from the
/// all-ones vector. The uniform cell width cancels, so this is also the
/// operator norm on `L²(0, T)`.
pub fn operator_norm_estimate(op: &VolterraOperator, iters: usize) -> f64 {
    let n = op.grid().cells();
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut estimate = 0.0;
    let mut y = vec![0.0; n];
    for _ in 0..iters.max(1) {
        apply_into(op, &x, &mut y);
        let z = transpose_apply(op, &y);
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        // Rayleigh quotient of MᵀM at the unit vector x
        estimate = x.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt();
        x = z.into_iter().map(|v| v / norm).collect();
    }
    estimate
}

fn apply_into(op: &VolterraOperator, u: &[f64], out: &mut [f64]) {
    let w = op.weights();
    match op.geometric_ratio() {
        Some(rho) => {
            let mut acc = 0.0;
            for (o, &x) in out.iter_mut().zip(u) {
                acc = rho * acc + w[0] * x;
                *o = acc;
            }
        }
        None => {
            for (i, o) in out.iter_mut().enumerate() {
                *o = w[..=i].iter().zip(u[..=i].iter().rev()).map(|(a, b)| a * b).sum();
            }
        }
    }
}

fn transpose_apply(op: &VolterraOperator, v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let w = op.weights();
    (0..n)
        .map(|j| w[..n - j].iter().zip(&v[j..]).map(|(a, b)| a * b).sum())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub solution: Signal,
    pub iterations: usize,
    /// Last `‖u_{k+1} - u_k‖₂`.
    pub residual: f64,
    pub converged: bool,
    /// Residual per iteration when requested in the configuration.
    pub history: Vec<f64>,
}

/// Runs the extragradient iteration from `start` (zero when absent). A run
/// that exhausts `max_iter` is returned with `converged = false`.
pub fn extragradient_solve(
    op: &VolterraOperator,
    f: &Signal,
    alpha: f64,
    cfg: &SplitConfig,
    start: Option<&Signal>,
) -> Result<OracleSolution> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "regularisation parameter must be positive, got {alpha}"
        )));
    }
    cfg.validate()?;
    let grid = *op.grid();
    grid.ensure_compatible(f.grid())?;
    let mut u = match start {
        Some(s) => {
            grid.ensure_compatible(s.grid())?;
            s.clone()
        }
        None => Signal::zeros(grid),
    };
    let n = grid.cells();
    let h = grid.step();
    let lambda = cfg.tau * alpha;
    let data = f.values();
    let mut image = vec![0.0; n];
    let mut history = Vec::new();
    let mut residual = f64::INFINITY;

    let step = |base: &Signal, image: &[f64]| -> Result<Signal> {
        let g: Vec<f64> = base
            .values()
            .iter()
            .zip(image)
            .zip(data)
            .map(|((x, a), y)| x - cfg.tau * (a - y))
            .collect();
        taut_string_prox(&Signal::new(grid, g)?, lambda)
    };

    for iteration in 1..=cfg.max_iter {
        apply_into(op, u.values(), &mut image);
        let predictor = step(&u, &image)?;
        apply_into(op, predictor.values(), &mut image);
        let next = step(&u, &image)?;
        let diff: f64 = next
            .values()
            .iter()
            .zip(u.values())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
        residual = (h * diff).sqrt();
        let size = u.lp_norm(2.0)?;
        if !residual.is_finite() {
            return Err(Error::NonFinite(iteration));
        }
        if cfg.record_history {
            history.push(residual);
        }
        u = next;
        if residual <= cfg.tol * size.max(1.0) {
            return Ok(OracleSolution {
                solution: u,
                iterations: iteration,
                residual,
                converged: true,
                history,
            });
        }
    }
    Ok(OracleSolution {
        solution: u,
        iterations: cfg.max_iter,
        residual,
        converged: false,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::tv::check_optimality;
    use crate::volterra::{Kernel, TableKernel};

    #[test]
    fn norm_of_trivial_operators() {
        let g = Grid::new(1.0, 32).unwrap();
        let zero = Kernel::Table(TableKernel::new(vec![0.0], vec![0.0]).unwrap());
        let op = VolterraOperator::discretize(&zero, g).unwrap();
        assert_eq!(operator_norm_estimate(&op, 200), 0.0);
        let op = VolterraOperator::discretize(&Kernel::identity_spike(g.step()), g).unwrap();
        assert!((operator_norm_estimate(&op, 200) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn norm_matches_singular_values() {
        for (kernel, n) in [
            (Kernel::Constant(1.0), 64),
            (Kernel::Exponential(0.5), 128),
            (Kernel::Abel(0.4), 256),
        ] {
            let op = VolterraOperator::discretize(&kernel, Grid::new(1.0, n).unwrap()).unwrap();
            let svd = op.dense_matrix().svd(false, false);
            let sigma = svd.singular_values.max();
            let est = operator_norm_estimate(&op, 200);
            assert!((est - sigma).abs() <= 0.01 * sigma, "{kernel}: {est} vs {sigma}");
        }
    }

    #[test]
    fn exact_start_is_a_fixed_point() {
        let g = Grid::new(1.0, 40).unwrap();
        let op = VolterraOperator::discretize(&Kernel::Exponential(0.3), g).unwrap();
        let c = Signal::constant(g, 0.8);
        let f = op.apply(&c).unwrap();
        let cfg = SplitConfig::for_operator(&op);
        let out = extragradient_solve(&op, &f, 0.1, &cfg, Some(&c)).unwrap();
        assert_eq!(out.iterations, 1);
        assert!(out.converged);
        assert!(out.solution.sub(&c).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn identity_limit_is_the_taut_string() {
        let g = Grid::new(1.0, 30).unwrap();
        let op = VolterraOperator::discretize(&Kernel::identity_spike(g.step()), g).unwrap();
        let f = Signal::from_fn(g, |j| ((j * 17) % 7) as f64 - 3.0).unwrap();
        let cfg = SplitConfig::for_operator(&op);
        let out = extragradient_solve(&op, &f, 0.05, &cfg, None).unwrap();
        assert!(out.converged);
        let v = taut_string_prox(&f, 0.05).unwrap();
        assert!(out.solution.sub(&v).unwrap().lp_norm(2.0).unwrap() <= 10.0 * cfg.tol);
    }

    #[test]
    fn converged_output_passes_certificate() {
        let g = Grid::new(1.0, 64).unwrap();
        let op = VolterraOperator::discretize(&Kernel::Abel(0.5), g).unwrap();
        let f = Signal::from_fn(g, |j| if j < 20 { 0.2 } else { 0.6 + 0.05 * ((j as f64).sin()) })
            .unwrap();
        let alpha = 1e-2;
        let cfg = SplitConfig::for_operator(&op);
        let out = extragradient_solve(&op, &f, alpha, &cfg, None).unwrap();
        assert!(out.converged, "{} iterations", out.iterations);
        let cert = check_optimality(&op, &out.solution, &f, alpha, 100.0 * cfg.tol).unwrap();
        assert!(cert.passed, "{cert:?}");
    }

    #[test]
    fn rejects_bad_configuration() {
        let g = Grid::new(1.0, 8).unwrap();
        let op = VolterraOperator::discretize(&Kernel::Exponential(1.0), g).unwrap();
        let f = Signal::zeros(g);
        let cfg = SplitConfig::for_operator(&op);
        let too_long = cfg.clone().with_tau(2.0 / cfg.lipschitz);
        assert!(extragradient_solve(&op, &f, 1.0, &too_long, None).is_err());
        assert!(extragradient_solve(&op, &f, 0.0, &cfg, None).is_err());
        assert!(extragradient_solve(&op, &f, 1.0, &cfg.clone().with_max_iter(0), None).is_err());
    }
}
