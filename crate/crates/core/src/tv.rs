//! Total-variation regularisation through tube conditions.
//!
//! For `A u + α ∂TV(u) ∋ f` put `L_i = h Σ_{j <= i} ((A u)_j - f_j)`. The
//! discrete optimality system is
//!
//! * `|L_i| <= α` for every interior boundary `i < n - 1`,
//! * `L_{n-1} = 0` (compatibility at `T`, encoded as a pinched tube),
//! * `L_j = +α` wherever `u_{j+1} > u_j` and `L_j = -α` wherever `u_{j+1} < u_j`.
//!
//! [`solve_tv_lavrentiev`] builds a piecewise-constant solution left to right.
//! From a committed prefix ending before cell `a` it grows a window and tracks
//! the first segment of two envelopes: the largest constant keeping
//! `L <= upper` (first piece of the maximal nondecreasing extension) and the
//! smallest constant keeping `L >= lower` (first piece of the minimal
//! nonincreasing extension). Both are affine in the constant because `L` is
//! causal, so each new cell costs O(1) once the memory term of the committed
//! prefix is known. When a new cell pushes the increasing envelope below the
//! decreasing one, the decreasing envelope's first segment is final and is
//! committed up to its last touch of the lower bound (a down-jump follows);
//! symmetrically for the other envelope. The pinched terminal cell closes the
//! last segment.
//!
//! Kernels need `w_0 > 0` and `w_m >= 0`. Exponential, constant and identity
//! kernels have geometric weights and keep the memory in one scalar, which
//! makes the sweep linear in practice; other kernels update a dense memory
//! array after each commit (quadratic worst case).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{cumulative_integral, Grid, Signal};
use crate::volterra::VolterraOperator;

/// Relative epsilon for feasibility comparisons inside the solver.
const FEASIBILITY_EPS: f64 = 1e-12;

/// The α-tube with a pinched terminal boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tube {
    alpha: f64,
    cells: usize,
}

impl Tube {
    pub fn pinned(grid: &Grid, alpha: f64) -> Self {
        Self {
            alpha,
            cells: grid.cells(),
        }
    }

    /// Upper bound on `L` at boundary `j`.
    #[inline]
    pub fn upper(&self, j: usize) -> f64 {
        if j + 1 == self.cells {
            0.0
        } else {
            self.alpha
        }
    }

    /// Lower bound on `L` at boundary `j`.
    #[inline]
    pub fn lower(&self, j: usize) -> f64 {
        -self.upper(j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentEvent {
    TouchUpper,
    TouchLower,
    Terminal,
}

/// Constant piece `u = value` on cells `start..=end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub value: f64,
    pub event: SegmentEvent,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub segments: Vec<Segment>,
    /// Number of (cell, window) envelope updates.
    pub envelope_evaluations: u64,
    /// Envelope updates plus memory updates.
    pub work: u64,
}

/// Minimiser of `(h/2) ‖u - f‖² + λ TV(u)`, computed with the direct
/// taut-string sweep of Condat.
pub fn taut_string_prox(f: &Signal, lambda: f64) -> Result<Signal> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "taut string needs a positive tube radius, got {lambda}"
        )));
    }
    let h = f.grid().step();
    Signal::new(*f.grid(), taut_string_unit(f.values(), lambda / h))
}

/// `argmin ½ Σ (x - y)² + λ Σ |x_{k+1} - x_k|`.
fn taut_string_unit(y: &[f64], lambda: f64) -> Vec<f64> {
    let n = y.len();
    let mut x = vec![0.0; n];
    if n == 0 {
        return x;
    }
    let (mut k, mut k0, mut kminus, mut kplus) = (0usize, 0usize, 0usize, 0usize);
    let mut vmin = y[0] - lambda;
    let mut vmax = y[0] + lambda;
    let mut umin = lambda;
    let mut umax = -lambda;
    loop {
        while k == n - 1 {
            if umin < 0.0 {
                x[k0..=kminus].fill(vmin);
                k0 = kminus + 1;
                k = k0;
                kminus = k0;
                vmin = y[k];
                umin = lambda;
                umax = vmin + umin - vmax;
            } else if umax > 0.0 {
                x[k0..=kplus].fill(vmax);
                k0 = kplus + 1;
                k = k0;
                kplus = k0;
                vmax = y[k];
                umax = -lambda;
                umin = vmax + umax - vmin;
            } else {
                vmin += umin / (k - k0 + 1) as f64;
                x[k0..=k].fill(vmin);
                return x;
            }
        }
        umin += y[k + 1] - vmin;
        if umin < -lambda {
            x[k0..=kminus].fill(vmin);
            k0 = kminus + 1;
            k = k0;
            kminus = k0;
            kplus = k0;
            vmin = y[k];
            vmax = vmin + 2.0 * lambda;
            umin = lambda;
            umax = -lambda;
            continue;
        }
        umax += y[k + 1] - vmax;
        if umax > lambda {
            x[k0..=kplus].fill(vmax);
            k0 = kplus + 1;
            k = k0;
            kminus = k0;
            kplus = k0;
            vmax = y[k];
            vmin = vmax - 2.0 * lambda;
            umin = lambda;
            umax = -lambda;
            continue;
        }
        k += 1;
        if umin >= lambda {
            kminus = k;
            vmin += (umin - lambda) / (k - k0 + 1) as f64;
            umin = lambda;
        }
        if umax <= -lambda {
            kplus = k;
            vmax += (umax + lambda) / (k - k0 + 1) as f64;
            umax = -lambda;
        }
    }
}

fn ensure_admissible(op: &VolterraOperator) -> Result<()> {
    let w = op.weights();
    if !(w[0] > 0.0) || w.iter().any(|&x| x < 0.0) {
        return Err(Error::UnsupportedKernel(format!(
            "{} has weights that are not nonnegative with w_0 > 0",
            op.kernel()
        )));
    }
    Ok(())
}

fn check_inputs(op: &VolterraOperator, f: &Signal, alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "regularisation parameter must be positive, got {alpha}"
        )));
    }
    op.grid().ensure_compatible(f.grid())
}

fn prefix_sums(w: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    w.iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

/// Contribution of the committed prefix to `(A u)_j` for cells beyond it.
enum Memory<'a> {
    /// `w_m = w_0 ρ^m`; `state = Σ_{m < start} w_0 ρ^{start-1-m} u_m`.
    Geometric { w0: f64, rho: f64, state: f64 },
    /// `contrib[j] = Σ_{committed m} w_{j-m} u_m`.
    Dense {
        cumulative: &'a [f64],
        contrib: Vec<f64>,
    },
}

impl<'a> Memory<'a> {
    fn new(op: &VolterraOperator, cumulative: &'a [f64]) -> Self {
        match op.geometric_ratio() {
            Some(rho) => Memory::Geometric {
                w0: op.weights()[0],
                rho,
                state: 0.0,
            },
            None => Memory::Dense {
                cumulative,
                contrib: vec![0.0; cumulative.len()],
            },
        }
    }

    /// Memory term for cell `j`, given the term `prev` for `j - 1` within the
    /// same sweep (`None` at the sweep start).
    #[inline]
    fn term(&self, j: usize, prev: Option<f64>) -> f64 {
        match self {
            Memory::Geometric { rho, state, .. } => rho * prev.unwrap_or(*state),
            Memory::Dense { contrib, .. } => contrib[j],
        }
    }

    /// Records `u = value` on `start..=end`; returns the number of updates.
    fn commit(&mut self, start: usize, end: usize, value: f64) -> u64 {
        match self {
            Memory::Geometric { w0, rho, state } => {
                for _ in start..=end {
                    *state = *rho * *state + *w0 * value;
                }
                (end - start + 1) as u64
            }
            Memory::Dense {
                cumulative,
                contrib,
            } => {
                let n = contrib.len();
                for j in end + 1..n {
                    contrib[j] += value * (cumulative[j - start] - cumulative[j - end - 1]);
                }
                (n - end - 1) as u64
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    value: f64,
    index: usize,
    base: f64,
    slope: f64,
}

impl Candidate {
    fn level(&self, value: f64) -> f64 {
        self.base + value * self.slope
    }
}

/// Solves `A u + α ∂TV(u) ∋ f` by the tube sweep described in the module docs.
pub fn solve_tv_lavrentiev(
    op: &VolterraOperator,
    f: &Signal,
    alpha: f64,
) -> Result<(Signal, SolverTrace)> {
    check_inputs(op, f, alpha)?;
    ensure_admissible(op)?;
    let grid = *op.grid();
    let n = grid.cells();
    let h = grid.step();
    let data = f.values();
    let tube = Tube::pinned(&grid, alpha);
    let eps = FEASIBILITY_EPS * 1f64.max(alpha).max(f.max_abs() * grid.horizon());
    let cumulative = prefix_sums(op.weights());
    let mut memory = Memory::new(op, &cumulative);

    let mut u = vec![0.0; n];
    let mut trace = SolverTrace::default();
    let mut start = 0;
    let mut level_before = 0.0;

    while start < n {
        let mut base = level_before;
        let mut slope = 0.0;
        let mut term = None;
        let mut hi = Candidate {
            value: f64::INFINITY,
            index: start,
            base: 0.0,
            slope: 0.0,
        };
        let mut lo = Candidate {
            value: f64::NEG_INFINITY,
            ..hi
        };
        let mut decision = None;
        for j in start..n {
            let p = memory.term(j, term);
            term = Some(p);
            base += h * (p - data[j]);
            slope += h * cumulative[j - start];
            trace.envelope_evaluations += 1;

            let up = (tube.upper(j) - base) / slope;
            let down = (tube.lower(j) - base) / slope;
            if !(up.is_finite() && down.is_finite()) {
                return Err(Error::SolverFailure {
                    message: format!("non-finite envelope value at cell {j}"),
                    trace: Box::new(trace),
                });
            }
            let tol = eps / slope;
            let breach_up = up < lo.value - tol;
            let breach_down = down > hi.value + tol;
            if breach_up || breach_down {
                // the envelope that did not move is final up to its last touch
                let take_lower = match (breach_up, breach_down) {
                    (true, false) => true,
                    (false, true) => false,
                    _ => lo.index < hi.index,
                };
                decision = Some(if take_lower {
                    (lo, SegmentEvent::TouchLower)
                } else {
                    (hi, SegmentEvent::TouchUpper)
                });
                break;
            }
            if j == n - 1 {
                let terminal = Candidate {
                    value: up,
                    index: j,
                    base,
                    slope,
                };
                decision = Some((terminal, SegmentEvent::Terminal));
                break;
            }
            if up <= hi.value + tol {
                let value = hi.value.min(up);
                hi = Candidate {
                    value,
                    index: j,
                    base,
                    slope,
                };
            }
            if down >= lo.value - tol {
                let value = lo.value.max(down);
                lo = Candidate {
                    value,
                    index: j,
                    base,
                    slope,
                };
            }
        }
        let (chosen, event) = decision.expect("the pinched terminal cell always closes a segment");
        let end = chosen.index;
        u[start..=end].fill(chosen.value);
        trace.work += memory.commit(start, end, chosen.value);
        trace.segments.push(Segment {
            start,
            end,
            value: chosen.value,
            event,
        });
        level_before = chosen.level(chosen.value);
        start = end + 1;
    }
    trace.work += trace.envelope_evaluations;
    Ok((Signal::new(grid, u)?, trace))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Upper,
    Lower,
}

/// Maximal nondecreasing extension of `prefix` over cells
/// `prefix.len()..window_end` with `L <= upper`, constant wherever
/// `L < upper`. Returns the values on the new cells.
pub fn envelope_plus(
    op: &VolterraOperator,
    f: &Signal,
    alpha: f64,
    prefix: &[f64],
    window_end: usize,
) -> Result<Vec<f64>> {
    envelope(op, f, alpha, prefix, window_end, Side::Upper)
}

/// Minimal nonincreasing extension with `L >= lower`, constant wherever
/// `L > lower`.
pub fn envelope_minus(
    op: &VolterraOperator,
    f: &Signal,
    alpha: f64,
    prefix: &[f64],
    window_end: usize,
) -> Result<Vec<f64>> {
    envelope(op, f, alpha, prefix, window_end, Side::Lower)
}

fn envelope(
    op: &VolterraOperator,
    f: &Signal,
    alpha: f64,
    prefix: &[f64],
    window_end: usize,
    side: Side,
) -> Result<Vec<f64>> {
    check_inputs(op, f, alpha)?;
    ensure_admissible(op)?;
    let grid = *op.grid();
    let n = grid.cells();
    let first = prefix.len();
    if window_end > n || window_end <= first {
        return Err(Error::InvalidParameter(format!(
            "window {first}..{window_end} is empty or exceeds {n} cells"
        )));
    }
    let h = grid.step();
    let tube = Tube::pinned(&grid, alpha);
    let eps = FEASIBILITY_EPS * 1f64.max(alpha).max(f.max_abs() * grid.horizon());
    let w = op.weights();
    let cumulative = prefix_sums(w);
    let data = f.values();

    let residual: Vec<f64> = op
        .apply_slice(prefix)
        .iter()
        .zip(data)
        .map(|(a, b)| a - b)
        .collect();
    let levels = cumulative_integral(&residual, h);
    for (i, &l) in levels.iter().enumerate() {
        if l > tube.upper(i) + eps || l < tube.lower(i) - eps {
            return Err(Error::Infeasible { index: i });
        }
    }

    let mut fixed = prefix.to_vec();
    let mut level = levels.last().copied().unwrap_or(0.0);
    while fixed.len() < window_end {
        let pos = fixed.len();
        let mut base = level;
        let mut slope = 0.0;
        let mut best: Option<(f64, usize, f64)> = None;
        for j in pos..window_end {
            let memory: f64 = (0..pos).map(|m| w[j - m] * fixed[m]).sum();
            base += h * (memory - data[j]);
            slope += h * cumulative[j - pos];
            let bound = match side {
                Side::Upper => tube.upper(j),
                Side::Lower => tube.lower(j),
            };
            let x = (bound - base) / slope;
            let tol = eps / slope;
            best = match best {
                None => Some((x, j, base + x * slope)),
                Some((v, _, _)) => {
                    let tighter = match side {
                        Side::Upper => x <= v + tol,
                        Side::Lower => x >= v - tol,
                    };
                    if tighter {
                        let v = match side {
                            Side::Upper => v.min(x),
                            Side::Lower => v.max(x),
                        };
                        Some((v, j, base + v * slope))
                    } else {
                        best
                    }
                }
            };
        }
        let (value, end, _) = best.expect("non-empty window");
        fixed.resize(end + 1, value);
        // level at the touch, recomputed for the final value
        let residual_sum: f64 = (pos..=end)
            .map(|j| {
                let a: f64 = (0..=j).map(|m| w[j - m] * fixed[m]).sum();
                a - data[j]
            })
            .sum();
        level += h * residual_sum;
    }
    Ok(fixed[first..].to_vec())
}

/// Quantified check of the discrete tube conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityCertificate {
    pub alpha: f64,
    pub tol: f64,
    #[serde(rename = "max_abs_L")]
    pub max_abs_l: f64,
    #[serde(rename = "terminal_L")]
    pub terminal_l: f64,
    /// Largest `α - L_j` over boundaries where `u` jumps up (0 if none).
    pub violation_up: f64,
    /// Largest `L_j + α` over boundaries where `u` jumps down (0 if none).
    pub violation_down: f64,
    /// Boundary `j` separates cells `j` and `j + 1` (0-based).
    pub jump_up_cells: Vec<usize>,
    pub jump_down_cells: Vec<usize>,
    pub total_variation: f64,
    /// `|TV(u) - ⟨ξ, u⟩|` with `ξ = -(A u - f) / α`.
    pub duality_gap: f64,
    pub passed: bool,
}

pub fn check_optimality(
    op: &VolterraOperator,
    u: &Signal,
    f: &Signal,
    alpha: f64,
    tol: f64,
) -> Result<OptimalityCertificate> {
    check_inputs(op, f, alpha)?;
    op.grid().ensure_compatible(u.grid())?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "certificate tolerance must be positive, got {tol}"
        )));
    }
    let residual = op.apply(u)?.sub(f)?;
    let levels = residual.cumulative_integral();
    let n = levels.len();
    let max_abs_l = levels.iter().fold(0.0_f64, |m, l| m.max(l.abs()));
    let terminal_l = levels[n - 1];
    let values = u.values();
    let mut jump_up_cells = Vec::new();
    let mut jump_down_cells = Vec::new();
    let mut violation_up = 0.0_f64;
    let mut violation_down = 0.0_f64;
    for j in 0..n.saturating_sub(1) {
        if values[j + 1] > values[j] {
            jump_up_cells.push(j);
            violation_up = violation_up.max(alpha - levels[j]);
        } else if values[j + 1] < values[j] {
            jump_down_cells.push(j);
            violation_down = violation_down.max(levels[j] + alpha);
        }
    }
    let total_variation = u.total_variation();
    let pairing = -residual.dual_pairing(u)? / alpha;
    let passed = max_abs_l <= alpha + tol
        && terminal_l.abs() <= tol
        && violation_up <= tol
        && violation_down <= tol;
    Ok(OptimalityCertificate {
        alpha,
        tol,
        max_abs_l,
        terminal_l,
        violation_up,
        violation_down,
        jump_up_cells,
        jump_down_cells,
        total_variation,
        duality_gap: (total_variation - pairing).abs(),
        passed,
    })
}
