//! Strict-monotonicity certification for convolution kernels.
//!
//! Three independent pieces of evidence are collected:
//!
//! * an analytic check of the sufficient conditions (strictly convex and
//!   decreasing on `(0, T]` with a strictly positive mean);
//! * the Fourier cosine coefficients `c_n = (2/T) ∫_0^T k(t) cos(2π n t / T) dt`,
//!   whose positivity for all `n` yields `⟨A u, u⟩ = Σ_n (c_n / 2) |û_n|² > 0`;
//! * the minimum of `⟨A u, u⟩ / ‖u‖²` over random probes and, for small grids,
//!   the smallest eigenvalue of the symmetric part of the weight matrix.
//!
//! Only finitely many coefficients can be sampled, so the report keeps the
//! analytic verdict separate from the numeric evidence.

use std::f64::consts::TAU;

use nalgebra::SymmetricEigen;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::grid::Signal;
use crate::quad;
use crate::rng::NormalStream;
use crate::volterra::{Kernel, VolterraOperator};

/// Absolute tolerance per Fourier coefficient.
pub const FOURIER_TOL: f64 = 1e-10;
/// Largest grid for which the exact eigenvalue oracle is evaluated.
pub const EIGEN_LIMIT: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Proven,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticCheck {
    pub verdict: Verdict,
    pub reasons: Vec<String>,
}

pub const REASON_NOT_STRICTLY_CONVEX: &str = "strict convexity fails";

/// Checks the sufficient conditions symbolically for the built-in kernels and
/// on the table values for tabulated kernels.
pub fn analytic_check(kernel: &Kernel, horizon: f64) -> AnalyticCheck {
    let mut reasons = Vec::new();
    let proven = match kernel {
        Kernel::Exponential(c) if *c > 0.0 => {
            reasons.push(format!("exp(-{c} t) is strictly convex on (0, T]"));
            reasons.push(format!("exp(-{c} t) is strictly decreasing on (0, T]"));
            reasons.push("mean over [0, T] is strictly positive".into());
            true
        }
        Kernel::Abel(s) if *s > 0.0 && *s < 1.0 => {
            reasons.push(format!("t^({s} - 1) / Γ({s}) is strictly convex on (0, T]"));
            reasons.push(format!("t^({s} - 1) / Γ({s}) is strictly decreasing on (0, T]"));
            reasons.push("mean over [0, T] is strictly positive".into());
            true
        }
        Kernel::Abel(_) => {
            reasons.push(REASON_NOT_STRICTLY_CONVEX.into());
            reasons.push("order 1 gives the constant kernel 1".into());
            false
        }
        Kernel::Constant(v) => {
            reasons.push(REASON_NOT_STRICTLY_CONVEX.into());
            if *v <= 0.0 {
                reasons.push("mean over [0, T] is not strictly positive".into());
            }
            false
        }
        Kernel::Exponential(_) => {
            reasons.push("exponential rate must be positive".into());
            false
        }
        Kernel::Table(table) => {
            let pieces = table.pieces(horizon);
            let mut ok = true;
            if pieces.len() < 3 {
                reasons.push(format!(
                    "{}: fewer than three breakpoints inside [0, T]",
                    REASON_NOT_STRICTLY_CONVEX
                ));
                ok = false;
            } else {
                let values: Vec<f64> = pieces.iter().map(|p| p.2).collect();
                let knots: Vec<f64> = pieces.iter().map(|p| p.0).collect();
                if values.windows(2).any(|w| w[1] >= w[0]) {
                    reasons.push("table values are not strictly decreasing".into());
                    ok = false;
                } else {
                    reasons.push("table values are strictly decreasing".into());
                }
                let slopes: Vec<f64> = values
                    .windows(2)
                    .zip(knots.windows(2))
                    .map(|(v, t)| (v[1] - v[0]) / (t[1] - t[0]))
                    .collect();
                if slopes.windows(2).any(|s| s[1] <= s[0]) {
                    reasons.push(REASON_NOT_STRICTLY_CONVEX.into());
                    ok = false;
                } else {
                    reasons.push("table values are strictly convex between breakpoints".into());
                }
            }
            if table.antiderivative(horizon) > 0.0 {
                reasons.push("mean over [0, T] is strictly positive".into());
            } else {
                reasons.push("mean over [0, T] is not strictly positive".into());
                ok = false;
            }
            ok
        }
    };
    AnalyticCheck {
        verdict: if proven {
            Verdict::Proven
        } else {
            Verdict::Inconclusive
        },
        reasons,
    }
}

/// Coefficients `c_0, ..., c_N` with the default per-coefficient tolerance.
pub fn fourier_cosine_coeffs(kernel: &Kernel, horizon: f64, count: usize) -> Result<Vec<f64>> {
    fourier_cosine_coeffs_with_tol(kernel, horizon, count, FOURIER_TOL)
}

pub fn fourier_cosine_coeffs_with_tol(
    kernel: &Kernel,
    horizon: f64,
    count: usize,
    tol: f64,
) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::InvalidParameter(
            "need at least one nonconstant coefficient".into(),
        ));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    kernel.validate()?;
    let t = horizon;
    let omega = |n: usize| TAU * n as f64 / t;
    match kernel {
        Kernel::Constant(v) => Ok((0..=count)
            .map(|n| if n == 0 { 2.0 * v } else { 0.0 })
            .collect()),
        Kernel::Exponential(c) => {
            let decay = -(-c * t).exp_m1();
            Ok((0..=count)
                .map(|n| {
                    let w = omega(n);
                    (2.0 / t) * c * decay / (c * c + w * w)
                })
                .collect())
        }
        Kernel::Table(table) => Ok((0..=count)
            .map(|n| {
                let w = omega(n);
                let integral: f64 = table
                    .pieces(t)
                    .iter()
                    .map(|&(a, b, v)| {
                        if n == 0 {
                            v * (b - a)
                        } else {
                            v * ((w * b).sin() - (w * a).sin()) / w
                        }
                    })
                    .sum();
                (2.0 / t) * integral
            })
            .collect()),
        Kernel::Abel(s) => {
            let s = *s;
            let norm = 2.0 / (t * gamma(s));
            // ∫_0^T t^{s-1} cos(ω t) dt = (1/s) ∫_0^{T^s} cos(ω x^{1/s}) dx
            let integral_tol = tol / norm;
            (0..=count)
                .into_par_iter()
                .map(|n| {
                    let w = omega(n);
                    let quarter_periods = (4 * n).max(1);
                    let piece_tol = integral_tol / quarter_periods as f64;
                    let mut total = 0.0;
                    for q in 0..quarter_periods {
                        let lo = (t * q as f64 / quarter_periods as f64).powf(s);
                        let hi = (t * (q + 1) as f64 / quarter_periods as f64).powf(s);
                        let (v, _) =
                            quad::integrate(|x| (w * x.powf(1.0 / s)).cos() / s, lo, hi, piece_tol)?;
                        total += v;
                    }
                    Ok(norm * total)
                })
                .collect()
        }
    }
}

/// Minimum of `⟨A u, u⟩` over `probes` seeded unit-norm Gaussian probes; for
/// grids with at most [`EIGEN_LIMIT`] cells the smallest eigenvalue of
/// `(M + Mᵀ) / 2` is included, so the result is the exact minimum there.
pub fn discrete_psd_check(op: &VolterraOperator, probes: usize, seed: u64) -> f64 {
    let grid = *op.grid();
    let n = grid.cells();
    let mut stream = NormalStream::new(seed, 0);
    let mut best = f64::INFINITY;
    for _ in 0..probes.max(1) {
        let raw = stream.normals(n);
        let probe = Signal::new(grid, raw).expect("finite probe");
        let norm = probe.lp_norm(2.0).expect("p = 2");
        if norm == 0.0 {
            continue;
        }
        let unit = probe.scaled(1.0 / norm);
        let value = op.monotone_pairing(&unit).expect("same grid");
        best = best.min(value);
    }
    if n <= EIGEN_LIMIT {
        let m = op.dense_matrix();
        let sym = (&m + m.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym).eigenvalues.min();
        best = best.min(eig);
    }
    best
}

/// Options for [`check_kernel`].
#[derive(Debug, Clone, Copy)]
pub struct CheckOptions {
    pub coefficients: usize,
    pub cells: usize,
    pub probes: usize,
    pub seed: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            coefficients: 64,
            cells: 256,
            probes: 256,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub analytic_verdict: Verdict,
    pub reasons: Vec<String>,
    pub fourier_coeffs: Vec<f64>,
    pub min_fourier: f64,
    pub discrete_min_quadform: f64,
    #[serde(rename = "N")]
    pub n: usize,
    /// All sampled coefficients positive and no negative quadratic form
    /// found; evidence only, never a proof.
    pub numeric_evidence: bool,
}

pub fn check_kernel(
    kernel: &Kernel,
    horizon: f64,
    opts: CheckOptions,
) -> Result<MonotonicityReport> {
    let analytic = analytic_check(kernel, horizon);
    let coeffs = fourier_cosine_coeffs(kernel, horizon, opts.coefficients)?;
    let min_fourier = coeffs.iter().copied().fold(f64::INFINITY, f64::min);
    let grid = crate::grid::Grid::new(horizon, opts.cells)?;
    let op = VolterraOperator::discretize(kernel, grid)?;
    let quad_min = discrete_psd_check(&op, opts.probes, opts.seed);
    Ok(MonotonicityReport {
        analytic_verdict: analytic.verdict,
        reasons: analytic.reasons,
        min_fourier,
        numeric_evidence: min_fourier > 0.0 && quad_min >= -1e-10,
        fourier_coeffs: coeffs,
        discrete_min_quadform: quad_min,
        n: opts.coefficients,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::volterra::TableKernel;

    /// Midpoint-free oracle: composite Gauss–Legendre on a mesh graded
    /// towards the singularity, written independently of `quad`.
    fn coefficient_oracle(kernel: &Kernel, t: f64, n: usize) -> f64 {
        let nodes = [
            (-0.932_469_514_203_152, 0.171_324_492_379_170_3),
            (-0.661_209_386_466_264_5, 0.360_761_573_048_138_6),
            (-0.238_619_186_083_196_9, 0.467_913_934_572_691),
            (0.238_619_186_083_196_9, 0.467_913_934_572_691),
            (0.661_209_386_466_264_5, 0.360_761_573_048_138_6),
            (0.932_469_514_203_152, 0.171_324_492_379_170_3),
        ];
        let w = TAU * n as f64 / t;
        // graded from t * 1e-12 towards t / 2000, then uniform fine cells
        let mut edges = Vec::new();
        let mut x = t * 1e-12;
        while x < t / 2000.0 {
            edges.push(x);
            x *= 1.5;
        }
        let m = 20_000;
        let start = *edges.last().unwrap();
        for i in 1..=m {
            edges.push(start + (t - start) * i as f64 / m as f64);
        }
        let mut total = 0.0;
        for e in edges.windows(2) {
            let (c, d) = (0.5 * (e[0] + e[1]), 0.5 * (e[1] - e[0]));
            for (xi, wi) in nodes {
                let s = c + d * xi;
                total += wi * d * kernel.eval(s) * (w * s).cos();
            }
        }
        if let Kernel::Abel(s) = kernel {
            // [0, t * 1e-12], where cos ≈ 1
            total += (t * 1e-12).powf(*s) / gamma(s + 1.0);
        }
        2.0 / t * total
    }

    #[test]
    fn constant_kernel_coefficients() {
        let c = fourier_cosine_coeffs(&Kernel::Constant(1.0), 1.0, 8).unwrap();
        assert_eq!(c.len(), 9);
        assert_eq!(c[0], 2.0);
        assert!(c[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn exponential_closed_form_matches_quadrature() {
        let (cr, t) = (0.7, 3.0);
        let k = Kernel::Exponential(cr);
        let c = fourier_cosine_coeffs(&k, t, 10).unwrap();
        for (n, &cn) in c.iter().enumerate() {
            let q = coefficient_oracle(&k, t, n);
            assert!((cn - q).abs() < 1e-9, "n={n}: {cn} vs {q}");
            if n > 0 {
                let w = TAU * n as f64 / t;
                let formula = 2.0 / t * cr / (cr * cr + w * w) * (1.0 - (-cr * t).exp());
                assert!((cn - formula).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn abel_coefficients_positive_and_match_oracle() {
        let k = Kernel::Abel(1.0 / 3.0);
        let c = fourier_cosine_coeffs(&k, 1.0, 64).unwrap();
        assert_eq!(c.len(), 65);
        assert!(c.iter().all(|&v| v > 0.0), "{c:?}");
        for n in [0usize, 1, 2, 7, 31, 64] {
            let q = coefficient_oracle(&k, 1.0, n);
            assert!((c[n] - q).abs() < 1e-7, "n={n}: {} vs {q}", c[n]);
        }
    }

    #[test]
    fn abel_coefficients_stable_under_tighter_tolerance() {
        let k = Kernel::Abel(0.45);
        let loose = fourier_cosine_coeffs(&k, 2.0, 32).unwrap();
        let tight = fourier_cosine_coeffs_with_tol(&k, 2.0, 32, FOURIER_TOL / 10.0).unwrap();
        for (a, b) in loose.iter().zip(&tight) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn zeroth_coefficient_is_twice_the_mean() {
        for k in [Kernel::Abel(0.3), Kernel::Exponential(2.0), Kernel::Constant(0.4)] {
            let t = 1.5;
            let c0 = fourier_cosine_coeffs(&k, t, 1).unwrap()[0];
            let op = VolterraOperator::discretize(&k, Grid::new(t, 4096).unwrap()).unwrap();
            let from_weights = 2.0 / t * op.weights().iter().sum::<f64>();
            assert!((c0 - from_weights).abs() < 1e-8, "{k}: {c0} vs {from_weights}");
        }
    }

    #[test]
    fn table_coefficients_exact() {
        let table = TableKernel::new(vec![0.0, 0.5], vec![2.0, 1.0]).unwrap();
        let k = Kernel::Table(table);
        let c = fourier_cosine_coeffs(&k, 1.0, 3).unwrap();
        assert!((c[0] - 3.0).abs() < 1e-15);
        // ∫_0^.5 2 cos(2π n t) + ∫_.5^1 cos(2π n t) = sin(π n) / (π n) = 0
        assert!(c[1..].iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn analytic_verdicts() {
        assert_eq!(
            analytic_check(&Kernel::Exponential(0.1), 1.0).verdict,
            Verdict::Proven
        );
        assert_eq!(analytic_check(&Kernel::Abel(1.0 / 3.0), 1.0).verdict, Verdict::Proven);
        let c = analytic_check(&Kernel::Constant(1.0), 1.0);
        assert_eq!(c.verdict, Verdict::Inconclusive);
        assert!(c.reasons.iter().any(|r| r == REASON_NOT_STRICTLY_CONVEX));
        let a1 = analytic_check(&Kernel::Abel(1.0), 1.0);
        assert_eq!(a1.verdict, Verdict::Inconclusive);

        let convex = TableKernel::new(vec![0.0, 0.1, 0.3, 0.6], vec![4.0, 2.0, 1.0, 0.5]).unwrap();
        assert_eq!(
            analytic_check(&Kernel::Table(convex), 1.0).verdict,
            Verdict::Proven
        );
        let concave = TableKernel::new(vec![0.0, 0.1, 0.2], vec![4.0, 3.5, 2.0]).unwrap();
        assert_eq!(
            analytic_check(&Kernel::Table(concave), 1.0).verdict,
            Verdict::Inconclusive
        );
        assert_eq!(
            analytic_check(&Kernel::identity_spike(0.01), 1.0).verdict,
            Verdict::Inconclusive
        );
    }

    #[test]
    fn psd_check_examples() {
        let g8 = Grid::new(1.0, 8).unwrap();
        let c = VolterraOperator::discretize(&Kernel::Constant(1.0), g8).unwrap();
        let v = discrete_psd_check(&c, 64, 3);
        assert!(v >= -1e-10);
        // symmetric part h (ones + I) / 2 has smallest eigenvalue h / 2
        assert!((v - g8.step() / 2.0).abs() < 1e-12, "{v}");

        let zero = Kernel::Table(TableKernel::new(vec![0.0], vec![0.0]).unwrap());
        let z = VolterraOperator::discretize(&zero, g8).unwrap();
        assert_eq!(discrete_psd_check(&z, 16, 0), 0.0);

        let g64 = Grid::new(1.0, 64).unwrap();
        let e = VolterraOperator::discretize(&Kernel::Exponential(1.0), g64).unwrap();
        assert!(discrete_psd_check(&e, 32, 1) >= -1e-10);
    }

    #[test]
    fn psd_check_is_deterministic_above_eigen_limit() {
        let g = Grid::new(1.0, 600).unwrap();
        let op = VolterraOperator::discretize(&Kernel::Abel(0.5), g).unwrap();
        let a = discrete_psd_check(&op, 8, 11);
        let b = discrete_psd_check(&op, 8, 11);
        assert_eq!(a.to_bits(), b.to_bits());
        assert!(a > 0.0);
    }

    #[test]
    fn report_invariants() {
        let r = check_kernel(
            &Kernel::Abel(1.0 / 3.0),
            1.0,
            CheckOptions {
                cells: 64,
                probes: 16,
                ..CheckOptions::default()
            },
        )
        .unwrap();
        assert_eq!(r.fourier_coeffs.len(), r.n + 1);
        assert_eq!(r.analytic_verdict, Verdict::Proven);
        assert!(r.min_fourier > 0.0);
        assert!(r.numeric_evidence);
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["analytic_verdict"], "proven");
        assert_eq!(json["N"], 64);
    }
}
