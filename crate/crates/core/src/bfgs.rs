//! Quasi-Newton (BFGS) maximization with a backtracking Armijo line search.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optimizer tolerances and line-search constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    /// Infinity norm of the gradient at which the ascent stops.
    pub gradient_tolerance: f64,
    /// Relative objective change at which the ascent stops.
    pub relative_ll_tolerance: f64,
    /// Step shrink factor of the backtracking line search.
    pub backtracking_factor: f64,
    /// Armijo sufficient-increase constant.
    pub armijo_constant: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tolerance: 1e-5,
            relative_ll_tolerance: 1e-9,
            backtracking_factor: 0.5,
            armijo_constant: 1e-4,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "max_iterations must be positive".into(),
            ));
        }
        for (name, v) in [
            ("gradient_tolerance", self.gradient_tolerance),
            ("relative_ll_tolerance", self.relative_ll_tolerance),
            ("backtracking_factor", self.backtracking_factor),
            ("armijo_constant", self.armijo_constant),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must lie strictly between 0 and 1, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Why the ascent stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    GradientTolerance,
    RelativeChange,
    IterationLimit,
    LineSearchFailed,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StopReason::GradientTolerance => "gradient tolerance reached",
            StopReason::RelativeChange => "relative objective change below tolerance",
            StopReason::IterationLimit => "iteration limit",
            StopReason::LineSearchFailed => "line search failed to improve",
        };
        f.write_str(s)
    }
}

/// Outcome of a maximization: the best point seen and diagnostics.
#[derive(Clone, Debug)]
pub struct Maximization {
    pub theta: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub reason: StopReason,
    pub evaluations: usize,
    /// Objective at the start and after every accepted step. Non-decreasing
    /// by the Armijo condition.
    pub trajectory: Vec<f64>,
}

/// Maximizes `objective` (which returns the value and its gradient) from
/// `start` by BFGS ascent with backtracking line search.
///
/// Stops on gradient tolerance, relative objective change, or the iteration
/// limit, and always returns the best point seen.
pub fn maximize<F>(
    mut objective: F,
    start: &[f64],
    config: &OptimizerConfig,
) -> Result<Maximization>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    config.validate()?;
    let n = start.len();
    let mut x = DVector::from_column_slice(start);
    let mut evaluations = 0usize;
    let mut eval = |point: &DVector<f64>, evals: &mut usize| -> Result<(f64, DVector<f64>)> {
        *evals += 1;
        let (value, grad) = objective(point.as_slice())?;
        Ok((value, DVector::from_vec(grad)))
    };

    let (mut value, mut grad) = eval(&x, &mut evaluations)?;
    if !value.is_finite() {
        let parameter = start
            .iter()
            .position(|v| !v.is_finite())
            .map(|i| format!("#{i}"));
        return Err(Error::NonFiniteStart { parameter });
    }

    let mut best_x = x.clone();
    let mut best_value = value;
    let mut best_grad = grad.clone();
    let mut trajectory = vec![value];

    // Inverse Hessian approximation of the negated objective.
    let mut h_inv = DMatrix::<f64>::identity(n, n);
    let mut first_update_pending = true;

    let finish = |x: DVector<f64>,
                  value: f64,
                  grad: DVector<f64>,
                  iterations: usize,
                  converged: bool,
                  reason: StopReason,
                  evaluations: usize,
                  trajectory: Vec<f64>| Maximization {
        theta: x.as_slice().to_vec(),
        value,
        gradient: grad.as_slice().to_vec(),
        iterations,
        converged,
        reason,
        evaluations,
        trajectory,
    };

    if inf_norm(&grad) <= config.gradient_tolerance {
        return Ok(finish(
            x,
            value,
            grad,
            0,
            true,
            StopReason::GradientTolerance,
            evaluations,
            trajectory,
        ));
    }

    for iteration in 1..=config.max_iterations {
        // Ascent direction; fall back to steepest ascent if curvature
        // information has gone bad.
        let mut direction = &h_inv * &grad;
        let mut slope = grad.dot(&direction);
        let usable = slope.is_finite() && slope > 0.0 && direction.iter().all(|d| d.is_finite());
        if !usable {
            h_inv = DMatrix::identity(n, n);
            first_update_pending = true;
            direction = grad.clone();
            slope = grad.dot(&direction);
        }

        // Backtracking Armijo line search.
        let mut step = 1.0;
        let mut accepted = None;
        while step > 1e-20 {
            let candidate = &x + &direction * step;
            let (cand_value, cand_grad) = eval(&candidate, &mut evaluations)?;
            if cand_value.is_finite() && cand_value > best_value {
                best_value = cand_value;
                best_x = candidate.clone();
                best_grad = cand_grad.clone();
            }
            if cand_value.is_finite() && cand_value >= value + config.armijo_constant * step * slope
            {
                accepted = Some((candidate, cand_value, cand_grad));
                break;
            }
            step *= config.backtracking_factor;
        }

        let Some((new_x, new_value, new_grad)) = accepted else {
            return Ok(finish(
                best_x,
                best_value,
                best_grad,
                iteration,
                false,
                StopReason::LineSearchFailed,
                evaluations,
                std::mem::take(&mut trajectory),
            ));
        };
        trajectory.push(new_value);

        // BFGS update in minimization form: s = Δx, y = -(Δgrad).
        let s = &new_x - &x;
        let y = &grad - &new_grad;
        let curvature = s.dot(&y);
        if curvature > 1e-12 {
            if first_update_pending {
                // Nocedal–Wright scaling of the initial inverse Hessian.
                let scale = curvature / y.dot(&y);
                if scale.is_finite() && scale > 0.0 {
                    h_inv = DMatrix::identity(n, n) * scale;
                }
                first_update_pending = false;
            }
            let rho = 1.0 / curvature;
            let hy = &h_inv * &y;
            let yhy = y.dot(&hy);
            // H ← H - ρ(s yᵀH + H y sᵀ) + ρ²(yᵀHy)s sᵀ + ρ s sᵀ
            let s_hyt = &s * hy.transpose();
            h_inv -= &s_hyt * rho;
            h_inv -= s_hyt.transpose() * rho;
            h_inv += &s * s.transpose() * (rho * rho * yhy + rho);
        }

        let rel_change = (new_value - value).abs() / value.abs().max(1.0);
        x = new_x;
        value = new_value;
        grad = new_grad;
        if value > best_value {
            best_value = value;
            best_x = x.clone();
            best_grad = grad.clone();
        }

        if inf_norm(&grad) <= config.gradient_tolerance {
            return Ok(finish(
                best_x,
                best_value,
                best_grad,
                iteration,
                true,
                StopReason::GradientTolerance,
                evaluations,
                std::mem::take(&mut trajectory),
            ));
        }
        if rel_change <= config.relative_ll_tolerance {
            return Ok(finish(
                best_x,
                best_value,
                best_grad,
                iteration,
                true,
                StopReason::RelativeChange,
                evaluations,
                std::mem::take(&mut trajectory),
            ));
        }
    }

    Ok(finish(
        best_x,
        best_value,
        best_grad,
        config.max_iterations,
        false,
        StopReason::IterationLimit,
        evaluations,
        trajectory,
    ))
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}
