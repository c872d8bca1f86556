//! Simulated maximum likelihood estimation: optimizer driver, covariance and
//! t-statistics, fit statistics, and random-parameter distribution shares.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bfgs::{maximize, Maximization, OptimizerConfig, StopReason};
use crate::data::Dataset;
use crate::draws::{generate_draw_block, DrawBlock, DrawConfig};
use crate::error::{Error, Result};
use crate::likelihood::{ModelContext, ParameterVector};
use crate::model::{ModelSpec, ParamRole};
use crate::stats::{chi_square_upper_tail, normal_cdf};

/// How the parameter covariance was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CovarianceMethod {
    /// Inverse of the negative numerical Hessian (central differences).
    Hessian,
    /// Inverse of the summed outer products of per-observation scores;
    /// fallback when the Hessian is not positive definite.
    Bhhh,
}

/// Population share of a random coefficient above/below zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomShare {
    /// Layout name of the coefficient's mean parameter.
    pub parameter: String,
    pub mean: f64,
    /// Reported standard deviation |s| of the raw scale.
    pub sd: f64,
    pub above_zero: f64,
    pub below_zero: f64,
    /// Set when the scale is exactly zero (point mass).
    pub degenerate: bool,
}

/// Full estimation output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub theta_hat: ParameterVector,
    pub covariance: Vec<Vec<f64>>,
    pub t_stats: Vec<f64>,
    pub ll_zero: f64,
    pub ll_beta: f64,
    pub rho_squared: f64,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub iterations: usize,
    pub covariance_method: CovarianceMethod,
    pub draw_config: DrawConfig,
    pub shares: Vec<RandomShare>,
}

/// Fraction of a Normal(mean, |scale|) population lying above zero.
pub fn share_above_zero(mean: f64, scale: f64) -> Result<f64> {
    if scale == 0.0 {
        return Err(Error::DegenerateScale {
            share_above: if mean > 0.0 { 1.0 } else { 0.0 },
        });
    }
    Ok(normal_cdf(mean / scale.abs()))
}

/// Fit statistics of an estimated model against a restricted baseline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitStatistics {
    /// 1 − LL(β)/LL(0).
    pub rho_squared: f64,
    /// Likelihood-ratio statistic 2·(LL(β) − LL(0)).
    pub lr_chi2: f64,
    pub df: usize,
    /// Chi-square upper tail; absent when df = 0.
    pub p_value: Option<f64>,
}

pub fn fit_statistics(ll_zero: f64, ll_beta: f64, df_diff: usize) -> Result<FitStatistics> {
    if ll_zero > 0.0 {
        return Err(Error::InvalidConfig(format!(
            "log-likelihood at zero must be non-positive, got {ll_zero}"
        )));
    }
    if ll_beta < ll_zero {
        return Err(Error::RestrictedBetter {
            restricted: ll_zero,
            unrestricted: ll_beta,
        });
    }
    let lr_chi2 = 2.0 * (ll_beta - ll_zero);
    let p_value = if df_diff > 0 {
        Some(chi_square_upper_tail(lr_chi2, df_diff)?)
    } else {
        None
    };
    Ok(FitStatistics {
        rho_squared: 1.0 - ll_beta / ll_zero,
        lr_chi2,
        df: df_diff,
        p_value,
    })
}

/// Central-difference Hessian with per-coordinate step
/// h = max(1e-4, 1e-4·|xᵢ|) (looser than the gradient step; second
/// differences are noisier).
pub fn numerical_hessian<F>(mut f: F, x: &[f64]) -> Result<DMatrix<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let n = x.len();
    let step = |v: f64| 1e-4_f64.max(1e-4 * v.abs());
    let center = f(x)?;
    let mut probe = x.to_vec();
    let mut hessian = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let hi = step(x[i]);
        probe[i] = x[i] + hi;
        let up = f(&probe)?;
        probe[i] = x[i] - hi;
        let down = f(&probe)?;
        probe[i] = x[i];
        hessian[(i, i)] = (up - 2.0 * center + down) / (hi * hi);
        for j in 0..i {
            let hj = step(x[j]);
            probe[i] = x[i] + hi;
            probe[j] = x[j] + hj;
            let pp = f(&probe)?;
            probe[j] = x[j] - hj;
            let pm = f(&probe)?;
            probe[i] = x[i] - hi;
            probe[j] = x[j] + hj;
            let mp = f(&probe)?;
            probe[j] = x[j] - hj;
            let mm = f(&probe)?;
            probe[i] = x[i];
            probe[j] = x[j];
            let value = (pp - pm - mp + mm) / (4.0 * hi * hj);
            hessian[(i, j)] = value;
            hessian[(j, i)] = value;
        }
    }
    Ok(hessian)
}

/// Inverts a symmetric positive definite matrix via Cholesky; `None` when the
/// matrix is not positive definite.
pub fn invert_spd(matrix: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    nalgebra::linalg::Cholesky::new(matrix.clone()).map(|c| c.inverse())
}

fn near_null_direction(matrix: &DMatrix<f64>) -> Vec<f64> {
    let eigen = matrix.clone().symmetric_eigen();
    let mut best = 0;
    for i in 1..eigen.eigenvalues.len() {
        if eigen.eigenvalues[i].abs() < eigen.eigenvalues[best].abs() {
            best = i;
        }
    }
    eigen.eigenvectors.column(best).iter().copied().collect()
}

/// Covariance matrix, signed t-statistics, and the method used.
pub struct CovarianceEstimate {
    pub covariance: Vec<Vec<f64>>,
    pub t_stats: Vec<f64>,
    pub method: CovarianceMethod,
}

pub fn covariance_and_tstats(
    ctx: &ModelContext<'_>,
    theta_hat: &ParameterVector,
    block: &DrawBlock,
) -> Result<CovarianceEstimate> {
    let hessian = numerical_hessian(
        |t| {
            let pv = ParameterVector::new(t.to_vec(), ctx.layout())?;
            Ok(ctx.simulated_loglik(&pv, block)?.loglik)
        },
        theta_hat.as_slice(),
    )?;
    let neg_hessian = -&hessian;
    let (inverse, method) = match invert_spd(&neg_hessian) {
        Some(inv) => (inv, CovarianceMethod::Hessian),
        None => {
            let (_, scores) = ctx.simulated_loglik_with_scores(theta_hat, block)?;
            let n = theta_hat.len();
            let mut bhhh = DMatrix::<f64>::zeros(n, n);
            for score in &scores {
                for i in 0..n {
                    for j in 0..=i {
                        bhhh[(i, j)] += score[i] * score[j];
                    }
                }
            }
            for i in 0..n {
                for j in 0..i {
                    bhhh[(j, i)] = bhhh[(i, j)];
                }
            }
            match invert_spd(&bhhh) {
                Some(inv) => (inv, CovarianceMethod::Bhhh),
                None => {
                    return Err(Error::SingularCovariance {
                        direction: near_null_direction(&neg_hessian),
                    })
                }
            }
        }
    };
    let t_stats = theta_hat
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, &est)| est / inverse[(i, i)].sqrt())
        .collect();
    let covariance = (0..theta_hat.len())
        .map(|i| (0..theta_hat.len()).map(|j| inverse[(i, j)]).collect())
        .collect();
    Ok(CovarianceEstimate {
        covariance,
        t_stats,
        method,
    })
}

/// Maximizes the simulated log-likelihood. The starting point comes from a
/// fixed-parameter logit fit: random means seeded from its estimates, scales
/// at 0.1, shifter coefficients at 0.
pub fn maximize_loglik(
    ctx: &ModelContext<'_>,
    block: &DrawBlock,
    config: &OptimizerConfig,
) -> Result<Maximization> {
    let start = starting_point(ctx, config)?;
    let n = ctx.layout().len();
    maximize(
        |t| {
            let Ok(pv) = ParameterVector::new(t.to_vec(), ctx.layout()) else {
                // Off-the-map probe (overflowed step): reject, don't abort.
                return Ok((f64::NEG_INFINITY, vec![0.0; n]));
            };
            let (value, scores) = ctx.simulated_loglik_with_scores(&pv, block)?;
            let mut grad = vec![0.0; n];
            for score in &scores {
                for (g, s) in grad.iter_mut().zip(score.iter()) {
                    *g += s;
                }
            }
            Ok((value.loglik, grad))
        },
        &start,
        config,
    )
}

fn starting_point(ctx: &ModelContext<'_>, config: &OptimizerConfig) -> Result<Vec<f64>> {
    let fixed_spec = ctx.spec().to_all_fixed();
    let fixed_ctx = ModelContext::new(&fixed_spec, ctx.dataset())?;
    let empty_block = generate_draw_block(
        ctx.dataset().n_observations(),
        0,
        &DrawConfig {
            n_draws: 1,
            burn_in: 0,
            primes: Vec::new(),
            shuffle_seed: None,
        },
    )?;
    let n = fixed_ctx.layout().len();
    let prefit = maximize(
        |t| {
            let Ok(pv) = ParameterVector::new(t.to_vec(), fixed_ctx.layout()) else {
                return Ok((f64::NEG_INFINITY, vec![0.0; n]));
            };
            let (value, scores) = fixed_ctx.simulated_loglik_with_scores(&pv, &empty_block)?;
            let mut grad = vec![0.0; n];
            for score in &scores {
                for (g, s) in grad.iter_mut().zip(score.iter()) {
                    *g += s;
                }
            }
            Ok((value.loglik, grad))
        },
        &vec![0.0; n],
        config,
    )?;

    let mut start = vec![0.0; ctx.layout().len()];
    for descriptor in ctx.layout().descriptors() {
        start[descriptor.index] = match descriptor.role {
            ParamRole::FixedBeta | ParamRole::RandomMean => fixed_ctx
                .layout()
                .position(&descriptor.name)
                .map(|i| prefit.theta[i])
                .unwrap_or(0.0),
            ParamRole::RandomScale => 0.1,
            ParamRole::MeanShifter | ParamRole::VarianceShifter => 0.0,
        };
    }
    Ok(start)
}

/// Runs the whole estimation pipeline: draw generation, starting values,
/// BFGS ascent, covariance, fit statistics, and distribution shares.
/// Deterministic given (dataset, spec, draw config, optimizer config).
pub fn estimate(
    dataset: &Dataset,
    spec: &ModelSpec,
    draw_config: &DrawConfig,
    optimizer: &OptimizerConfig,
) -> Result<EstimationResult> {
    let ctx = ModelContext::new(spec, dataset)?;
    let block = generate_draw_block(dataset.n_observations(), spec.n_random(), draw_config)?;
    let maximization = maximize_loglik(&ctx, &block, optimizer)?;
    let theta_hat = ParameterVector::new(maximization.theta.clone(), ctx.layout())?;

    let ll_zero = ctx
        .mnl_loglik(&ParameterVector::zeros(ctx.layout()))?
        .loglik;
    let ll_beta = maximization.value;
    let rho_squared = 1.0 - ll_beta / ll_zero;

    let cov = covariance_and_tstats(&ctx, &theta_hat, &block)?;

    let mut shares = Vec::new();
    for descriptor in ctx.layout().descriptors() {
        if descriptor.role != ParamRole::RandomMean {
            continue;
        }
        let mean = theta_hat.get(descriptor.index);
        let scale_index = ctx
            .layout()
            .index_of_role(descriptor.entry, ParamRole::RandomScale)
            .expect("random entry has a scale");
        let scale = theta_hat.get(scale_index);
        let (above, degenerate) = match share_above_zero(mean, scale) {
            Ok(share) => (share, false),
            Err(Error::DegenerateScale { share_above }) => (share_above, true),
            Err(other) => return Err(other),
        };
        shares.push(RandomShare {
            parameter: descriptor.name.clone(),
            mean,
            sd: scale.abs(),
            above_zero: above,
            below_zero: 1.0 - above,
            degenerate,
        });
    }

    Ok(EstimationResult {
        theta_hat,
        covariance: cov.covariance,
        t_stats: cov.t_stats,
        ll_zero,
        ll_beta,
        rho_squared,
        converged: maximization.converged,
        stop_reason: maximization.reason,
        iterations: maximization.iterations,
        covariance_method: cov.method,
        draw_config: draw_config.clone(),
        shares,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Observation;
    use crate::model::{AlternativeSet, UtilityEntry};
    use crate::rng::SplitMix64;

    #[test]
    fn shares_match_z_table_values() {
        // Frozen reference shares: Φ(0.268/1.946) and Φ(0.297/1.069).
        let male = share_above_zero(0.268, 1.946).unwrap();
        assert!((male - 0.5548).abs() < 0.0005, "male share {male}");
        let rural = share_above_zero(0.297, 1.069).unwrap();
        assert!((rural - 0.6094).abs() < 0.0005, "rural share {rural}");
    }

    #[test]
    fn share_is_half_at_zero_mean() {
        for &s in &[0.3, 1.0, -2.5] {
            assert!((share_above_zero(0.0, s).unwrap() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn share_symmetry() {
        let mut rng = SplitMix64::new(8);
        for _ in 0..100 {
            let m = rng.next_normal();
            let s = rng.next_normal().abs() + 0.01;
            let up = share_above_zero(m, s).unwrap();
            let down = share_above_zero(-m, s).unwrap();
            assert!((up + down - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_scale_is_degenerate() {
        match share_above_zero(0.4, 0.0) {
            Err(Error::DegenerateScale { share_above }) => assert_eq!(share_above, 1.0),
            other => panic!("expected degenerate error, got {other:?}"),
        }
        match share_above_zero(-0.4, 0.0) {
            Err(Error::DegenerateScale { share_above }) => assert_eq!(share_above, 0.0),
            other => panic!("expected degenerate error, got {other:?}"),
        }
    }

    #[test]
    fn fit_statistics_reference_pair() {
        let fit = fit_statistics(-429.86, -341.52, 19).unwrap();
        assert!(
            (fit.rho_squared - 0.2055).abs() < 0.0005,
            "{}",
            fit.rho_squared
        );
        assert!((fit.lr_chi2 - 176.68).abs() < 0.01, "{}", fit.lr_chi2);
        assert!(fit.p_value.unwrap() < 1e-6);
    }

    #[test]
    fn fit_statistics_identity_case() {
        let fit = fit_statistics(-100.0, -100.0, 3).unwrap();
        assert_eq!(fit.rho_squared, 0.0);
        assert_eq!(fit.lr_chi2, 0.0);
        assert!((fit.p_value.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn restricted_better_is_an_error() {
        assert!(matches!(
            fit_statistics(-100.0, -120.0, 2),
            Err(Error::RestrictedBetter { .. })
        ));
    }

    #[test]
    fn rho_squared_is_duplication_invariant() {
        // Doubling every observation doubles both log likelihoods.
        let fit_once = fit_statistics(-200.0, -150.0, 4).unwrap();
        let fit_twice = fit_statistics(-400.0, -300.0, 4).unwrap();
        assert!((fit_once.rho_squared - fit_twice.rho_squared).abs() < 1e-15);
    }

    #[test]
    fn rho_squared_stays_in_unit_interval() {
        let mut rng = SplitMix64::new(19);
        for _ in 0..200 {
            let ll_zero = -1.0 - 500.0 * rng.next_f64();
            let ll_beta = ll_zero * rng.next_f64_open();
            let fit = fit_statistics(ll_zero, ll_beta, 2).unwrap();
            assert!(
                (0.0..1.0).contains(&fit.rho_squared),
                "rho^2 {} for ({ll_zero}, {ll_beta})",
                fit.rho_squared
            );
        }
    }

    #[test]
    fn quadratic_hessian_gives_quarter_variance() {
        // loglik = -½·4·θ² has Hessian -4, so the variance is 1/4.
        let hessian = numerical_hessian(|x| Ok(-2.0 * x[0] * x[0]), &[0.3]).unwrap();
        assert!((hessian[(0, 0)] + 4.0).abs() < 1e-4, "{}", hessian[(0, 0)]);
        let cov = invert_spd(&-&hessian).unwrap();
        assert!((cov[(0, 0)] - 0.25).abs() < 1e-4, "{}", cov[(0, 0)]);
    }

    #[test]
    fn hessian_cross_terms() {
        // f = -x² - 3y² + xy: Hessian [[-2, 1], [1, -6]].
        let f = |x: &[f64]| Ok(-x[0] * x[0] - 3.0 * x[1] * x[1] + x[0] * x[1]);
        let h = numerical_hessian(f, &[0.7, -0.4]).unwrap();
        assert!((h[(0, 0)] + 2.0).abs() < 1e-3);
        assert!((h[(1, 1)] + 6.0).abs() < 1e-3);
        assert!((h[(0, 1)] - 1.0).abs() < 1e-3);
        assert_eq!(h[(0, 1)], h[(1, 0)]);
    }

    fn one_param_model() -> (ModelSpec, Dataset) {
        let alts = AlternativeSet::new(vec!["a".into(), "b".into()], 0).unwrap();
        let spec = ModelSpec::new(alts, vec![UtilityEntry::fixed("b", "x")], "outcome").unwrap();
        // Logistic data with a positive effect of x on choosing b.
        let mut rng = SplitMix64::new(314);
        let beta_true = 0.9_f64;
        let observations: Vec<Observation> = (0..200)
            .map(|_| {
                let x = if rng.next_f64() < 0.5 { 1.0 } else { 0.0 };
                let p_b = (beta_true * x).exp() / (1.0 + (beta_true * x).exp());
                Observation {
                    chosen: if rng.next_f64() < p_b { 1 } else { 0 },
                    values: vec![x],
                }
            })
            .collect();
        let ds = Dataset::from_parts(vec!["x".to_string()], observations, 2, "synthetic").unwrap();
        (spec, ds)
    }

    // Grid-search oracle for the one-parameter logit.
    #[test]
    fn one_parameter_fit_matches_grid_search() {
        let (spec, ds) = one_param_model();
        let ctx = ModelContext::new(&spec, &ds).unwrap();
        let block = generate_draw_block(
            ds.n_observations(),
            0,
            &DrawConfig {
                n_draws: 1,
                burn_in: 0,
                primes: Vec::new(),
                shuffle_seed: None,
            },
        )
        .unwrap();
        let out = maximize_loglik(&ctx, &block, &OptimizerConfig::default()).unwrap();
        assert!(out.converged);
        // Optimizer fixed point: the gradient vanishes at the optimum.
        let grad_norm = out.gradient.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        assert!(grad_norm < 1e-4, "gradient at optimum {grad_norm}");

        let mut best_beta = f64::NAN;
        let mut best_ll = f64::NEG_INFINITY;
        let mut beta = -3.0;
        while beta <= 3.0 {
            let pv = ParameterVector::new(vec![beta], ctx.layout()).unwrap();
            let ll = ctx.mnl_loglik(&pv).unwrap().loglik;
            if ll > best_ll {
                best_ll = ll;
                best_beta = beta;
            }
            beta += 1e-4;
        }
        assert!(
            (out.theta[0] - best_beta).abs() < 1e-3,
            "bfgs {} vs grid {best_beta}",
            out.theta[0]
        );
    }

    #[test]
    fn estimate_is_deterministic() {
        let (spec, ds) = one_param_model();
        let draw_config = DrawConfig::with_draws(25);
        let optimizer = OptimizerConfig::default();
        let a = estimate(&ds, &spec, &draw_config, &optimizer).unwrap();
        let b = estimate(&ds, &spec, &draw_config, &optimizer).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn estimate_reports_iteration_limit() {
        let (spec, ds) = one_param_model();
        let optimizer = OptimizerConfig {
            max_iterations: 1,
            gradient_tolerance: 1e-300,
            relative_ll_tolerance: 1e-300,
            ..OptimizerConfig::default()
        };
        let result = estimate(&ds, &spec, &DrawConfig::with_draws(5), &optimizer).unwrap();
        assert!(!result.converged);
        assert_eq!(result.stop_reason, StopReason::IterationLimit);
    }

    #[test]
    fn t_stat_sign_matches_estimate_sign() {
        let (spec, ds) = one_param_model();
        let result = estimate(
            &ds,
            &spec,
            &DrawConfig::with_draws(5),
            &OptimizerConfig::default(),
        )
        .unwrap();
        for (est, t) in result
            .theta_hat
            .as_slice()
            .iter()
            .zip(result.t_stats.iter())
        {
            if *t != 0.0 {
                assert_eq!(est.signum(), t.signum());
            }
        }
        // Covariance diagonal is positive, rho-squared consistent.
        for (i, row) in result.covariance.iter().enumerate() {
            assert!(row[i] > 0.0);
        }
        assert_eq!(result.rho_squared, 1.0 - result.ll_beta / result.ll_zero);
    }
}
