//! Convolution kernels and their lower-triangular Toeplitz discretisation.
//!
//! The operator `(A u)(t) = ∫_0^t k(t - τ) u(τ) dτ` acting on a piecewise-constant
//! `u` and collocated at the right endpoints `t_i` becomes
//! `(A u)_i = Σ_{j <= i} w_{i-j} u_j` with the exact cell integrals
//! `w_m = ∫_{m h}^{(m+1) h} k(σ) dσ`. The weakly singular Abel kernel is
//! integrated in closed form, so no point evaluation at the origin is needed.

use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::grid::{Grid, Signal};

/// Piecewise-constant kernel given by breakpoints `t_0 < t_1 < ...` and
/// values; `k = values[i]` on `[t_i, t_{i+1})`, the last value extends to
/// infinity and `k = 0` before `t_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TableKernel {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl TableKernel {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints.len() != values.len() {
            return Err(Error::InvalidParameter(
                "table kernel needs matching, non-empty breakpoints and values".into(),
            ));
        }
        if breakpoints[0] < 0.0 || !breakpoints.iter().all(|t| t.is_finite()) {
            return Err(Error::InvalidParameter(
                "table breakpoints must be finite and nonnegative".into(),
            ));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "table breakpoints must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter(
                "table values must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { breakpoints, values })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self.breakpoints.iter().rposition(|&b| b <= t) {
            Some(i) => self.values[i],
            None => 0.0,
        }
    }

    /// Exact `∫_0^x k`.
    pub fn antiderivative(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (i, (&t, &v)) in self.breakpoints.iter().zip(&self.values).enumerate() {
            if x <= t {
                break;
            }
            let end = self.breakpoints.get(i + 1).copied().unwrap_or(f64::INFINITY);
            acc += v * (x.min(end) - t);
        }
        acc
    }

    /// Pieces `(start, end, value)` of the kernel restricted to `[0, horizon]`.
    pub fn pieces(&self, horizon: f64) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for (i, (&t, &v)) in self.breakpoints.iter().zip(&self.values).enumerate() {
            if t >= horizon {
                break;
            }
            let end = self
                .breakpoints
                .get(i + 1)
                .copied()
                .unwrap_or(horizon)
                .min(horizon);
            out.push((t, end, v));
        }
        out
    }
}

/// Convolution kernel `k` of a Volterra operator.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    /// `k(t) = v`.
    Constant(f64),
    /// `k(t) = exp(-c t)`, `c > 0`.
    Exponential(f64),
    /// Riemann–Liouville kernel `k(t) = t^{s-1} / Γ(s)`, `0 < s <= 1`.
    Abel(f64),
    Table(TableKernel),
}

impl Kernel {
    pub fn validate(&self) -> Result<()> {
        match self {
            Kernel::Constant(v) if !v.is_finite() => Err(Error::InvalidParameter(format!(
                "constant kernel value must be finite, got {v}"
            ))),
            Kernel::Exponential(c) if !(c.is_finite() && *c > 0.0) => Err(
                Error::InvalidParameter(format!("exponential rate must be positive, got {c}")),
            ),
            Kernel::Abel(s) if !(*s > 0.0 && *s <= 1.0) => Err(Error::InvalidParameter(
                format!("Abel order must lie in (0, 1], got {s}"),
            )),
            _ => Ok(()),
        }
    }

    /// Parses `const:<v>`, `exp:<c>`, `abel:<s>` or `table:<path.csv>`.
    pub fn parse(spec: &str) -> Result<Kernel> {
        let (kind, arg) = spec
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("kernel spec `{spec}` lacks a `:`")))?;
        let number = || -> Result<f64> {
            arg.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("kernel parameter `{arg}`: {e}")))
        };
        let kernel = match kind.trim() {
            "const" => Kernel::Constant(number()?),
            "exp" => Kernel::Exponential(number()?),
            "abel" => Kernel::Abel(number()?),
            "table" => Kernel::Table(crate::io::read_table_kernel(Path::new(arg.trim()))?),
            other => return Err(Error::Parse(format!("unknown kernel kind `{other}`"))),
        };
        kernel.validate()?;
        Ok(kernel)
    }

    /// Table kernel of height `1 / h` on `[0, h)`; its weights are `w_0 = 1`,
    /// `w_m = 0` otherwise, i.e. the discrete identity on a grid with step `h`.
    pub fn identity_spike(h: f64) -> Kernel {
        Kernel::Table(TableKernel::new(vec![0.0, h], vec![1.0 / h, 0.0]).expect("valid spike"))
    }

    /// Pointwise value; the Abel kernel is infinite at `t = 0` for `s < 1`.
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Kernel::Constant(v) => *v,
            Kernel::Exponential(c) => (-c * t).exp(),
            Kernel::Abel(s) => t.powf(s - 1.0) / gamma(*s),
            Kernel::Table(table) => table.eval(t),
        }
    }

    /// Exact `∫_0^x k`.
    pub fn antiderivative(&self, x: f64) -> f64 {
        match self {
            Kernel::Constant(v) => v * x,
            Kernel::Exponential(c) => -(-c * x).exp_m1() / c,
            Kernel::Abel(s) => x.powf(*s) / gamma(s + 1.0),
            Kernel::Table(table) => table.antiderivative(x),
        }
    }

    /// Exact cell integral `∫_{m h}^{(m+1) h} k`.
    fn cell_weight(&self, m: usize, h: f64) -> f64 {
        match self {
            Kernel::Constant(v) => v * h,
            Kernel::Exponential(c) => (-c * m as f64 * h).exp() * (-(-c * h).exp_m1()) / c,
            Kernel::Abel(s) => {
                let scale = h.powf(*s) / gamma(s + 1.0);
                if m == 0 {
                    scale
                } else {
                    // (m+1)^s - m^s without cancellation
                    let mf = m as f64;
                    scale * mf.powf(*s) * (s * (1.0 / mf).ln_1p()).exp_m1()
                }
            }
            Kernel::Table(table) => {
                let a = m as f64 * h;
                table.antiderivative(a + h) - table.antiderivative(a)
            }
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Constant(v) => write!(f, "const:{v}"),
            Kernel::Exponential(c) => write!(f, "exp:{c}"),
            Kernel::Abel(s) => write!(f, "abel:{s}"),
            Kernel::Table(t) => write!(f, "table[{} pieces]", t.breakpoints.len()),
        }
    }
}

/// Discretised convolution operator on a fixed grid.
#[derive(Debug, Clone)]
pub struct VolterraOperator {
    grid: Grid,
    weights: Vec<f64>,
    kernel: Kernel,
    ratio: Option<f64>,
}

impl VolterraOperator {
    pub fn discretize(kernel: &Kernel, grid: Grid) -> Result<Self> {
        kernel.validate()?;
        let h = grid.step();
        let weights: Vec<f64> = (0..grid.cells()).map(|m| kernel.cell_weight(m, h)).collect();
        if let Some(idx) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::NonFinite(idx));
        }
        let ratio = match kernel {
            Kernel::Constant(_) => Some(1.0),
            Kernel::Abel(s) if *s == 1.0 => Some(1.0),
            Kernel::Exponential(c) => Some((-c * h).exp()),
            Kernel::Table(_) if weights.iter().skip(1).all(|&w| w == 0.0) => Some(0.0),
            _ => None,
        };
        Ok(Self {
            grid,
            weights,
            kernel: kernel.clone(),
            ratio,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    /// `Some(ρ)` when `w_m = w_0 ρ^m`, which allows O(1) memory updates.
    pub fn geometric_ratio(&self) -> Option<f64> {
        self.ratio
    }

    /// `f_i = Σ_{j <= i} w_{i-j} u_j`.
    pub fn apply(&self, u: &Signal) -> Result<Signal> {
        self.grid.ensure_compatible(u.grid())?;
        let values = match self.ratio {
            Some(rho) => {
                let w0 = self.weights[0];
                let mut acc = 0.0;
                u.values()
                    .iter()
                    .map(|&x| {
                        acc = rho * acc + w0 * x;
                        acc
                    })
                    .collect()
            }
            None => self.apply_slice(u.values()),
        };
        Signal::new(self.grid, values)
    }

    /// Plain O(n²) sum, used as the reference for [`apply`](Self::apply).
    pub fn apply_direct(&self, u: &Signal) -> Result<Signal> {
        self.grid.ensure_compatible(u.grid())?;
        Signal::new(self.grid, self.apply_slice(u.values()))
    }

    pub(crate) fn apply_slice(&self, u: &[f64]) -> Vec<f64> {
        let w = &self.weights;
        (0..u.len())
            .map(|i| (0..=i).map(|j| w[i - j] * u[j]).sum())
            .collect()
    }

    /// Adjoint action `(Mᵀ v)_j = Σ_{i >= j} w_{i-j} v_i`.
    pub fn apply_transpose(&self, v: &Signal) -> Result<Signal> {
        self.grid.ensure_compatible(v.grid())?;
        let n = v.len();
        let w = &self.weights;
        let x = v.values();
        Signal::new(
            self.grid,
            (0..n)
                .map(|j| (j..n).map(|i| w[i - j] * x[i]).sum())
                .collect(),
        )
    }

    /// Dense lower-triangular matrix `M_{ij} = w_{i-j}`.
    pub fn dense_matrix(&self) -> DMatrix<f64> {
        let n = self.grid.cells();
        DMatrix::from_fn(n, n, |i, j| if j <= i { self.weights[i - j] } else { 0.0 })
    }

    /// `⟨A u, u⟩` in the `L²(0, T)` pairing.
    pub fn monotone_pairing(&self, u: &Signal) -> Result<f64> {
        self.apply(u)?.dual_pairing(u)
    }

    /// Classical Lavrentiev regularisation: solves `(A + α I) u = f + α ū`
    /// by forward substitution (`ū = 0` when no offset is given).
    pub fn solve_classical_lavrentiev(
        &self,
        f: &Signal,
        alpha: f64,
        offset: Option<&Signal>,
    ) -> Result<Signal> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "regularisation parameter must be positive, got {alpha}"
            )));
        }
        self.grid.ensure_compatible(f.grid())?;
        if let Some(o) = offset {
            self.grid.ensure_compatible(o.grid())?;
        }
        let diag = self.weights[0] + alpha;
        if diag <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "w_0 + alpha must be positive, got {diag}"
            )));
        }
        let n = f.len();
        let w = &self.weights;
        let mut u = vec![0.0; n];
        for i in 0..n {
            let history: f64 = (0..i).map(|j| w[i - j] * u[j]).sum();
            let shift = offset.map_or(0.0, |o| alpha * o.values()[i]);
            u[i] = (f.values()[i] + shift - history) / diag;
        }
        Signal::new(self.grid, u)
    }
}
