//! The `(eps, theta)`-approximation space, the projection `Phi` onto the
//! scaled Stiefel manifold, empirical Lipschitz constants, the
//! push-forward test and the Prohorov lower-bound experiment.

use serde::Serialize;

use crate::algebra::{FMatrix, Field};
use crate::bounds::{l_bound, theta, tightest_sigma};
use crate::decomp::{singular_values, stiefel_gap, thin_svd};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::sampling::{
    child_seed, gaussian_at, haar_at, rng_for, sample_restricted_gaussian, stiefel_radius, SamplerConfig,
    DEFAULT_ACCEPTANCE_FLOOR,
};
use crate::stats::{ks_two_sample, ks_critical_value, EmpiricalSample};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ApproxSpaceParams {
    pub field: Field,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub n: usize,
    pub epsilon: f64,
    pub theta_val: f64,
    /// `sigma` used for the `L` bound that licenses `Phi`.
    pub sigma: f64,
}

impl ApproxSpaceParams {
    /// `theta_val = theta(eps)` and the tightest admissible `sigma`.
    pub fn new(field: Field, big_n: usize, n: usize, eps: f64) -> Result<Self> {
        Self::with_theta(field, big_n, n, eps, theta(eps)?)
    }

    pub fn with_theta(field: Field, big_n: usize, n: usize, eps: f64, theta_val: f64) -> Result<Self> {
        if n == 0 || n > big_n {
            return Err(Error::InvalidSize { n, max: big_n });
        }
        for (name, v) in [("epsilon", eps), ("theta", theta_val)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::OutOfRange {
                    name,
                    value: v,
                    range: "(0, 1)",
                });
            }
        }
        let sigma = tightest_sigma(n as u64, eps).unwrap_or(1.0);
        Ok(ApproxSpaceParams {
            field,
            big_n,
            n,
            epsilon: eps,
            theta_val,
            sigma,
        })
    }

    pub fn with_sigma(self, sigma: f64) -> Self {
        ApproxSpaceParams { sigma, ..self }
    }

    pub fn radius(&self) -> f64 {
        stiefel_radius(self.field, self.big_n)
    }

    /// Bound on `L(n, eps, theta)` at this `sigma`.
    pub fn l_bound(&self) -> Result<f64> {
        l_bound(self.n as u64, self.epsilon, self.sigma)
    }

    fn check_shape(&self, z: &FMatrix) -> Result<()> {
        if z.field() != self.field {
            return Err(Error::FieldMismatch {
                left: z.field(),
                right: self.field,
            });
        }
        if z.shape() != (self.big_n, self.n) {
            return Err(Error::ShapeMismatch {
                left: z.shape(),
                right: (self.big_n, self.n),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Membership {
    pub member: bool,
    /// Columns whose norm falls outside the open annulus.
    pub norm_violations: Vec<usize>,
    /// Pairs `(l, m, |<z_l/|z_l|, z_m/|z_m|>|)` at or above `theta_val`.
    pub angle_violations: Vec<(usize, usize, f64)>,
    pub zero_columns: Vec<usize>,
}

pub fn membership(z: &FMatrix, params: &ApproxSpaceParams) -> Result<Membership> {
    params.check_shape(z)?;
    let r = params.radius();
    let (lo, hi) = ((1.0 - params.epsilon) * r, (1.0 + params.epsilon) * r);
    let norms: Vec<f64> = (0..z.cols()).map(|j| z.col_norm(j)).collect();
    let norm_violations: Vec<usize> = norms
        .iter()
        .enumerate()
        .filter(|(_, &v)| !(v > lo && v < hi))
        .map(|(j, _)| j)
        .collect();
    let zero_columns: Vec<usize> = norms
        .iter()
        .enumerate()
        .filter(|(_, &v)| v == 0.0)
        .map(|(j, _)| j)
        .collect();
    let mut angle_violations = Vec::new();
    for l in 0..z.cols() {
        for m in (l + 1)..z.cols() {
            if norms[l] == 0.0 || norms[m] == 0.0 {
                continue;
            }
            let c = z.col_inner(l, m).norm() / (norms[l] * norms[m]);
            if !(c < params.theta_val) {
                angle_violations.push((l, m, c));
            }
        }
    }
    let member = norm_violations.is_empty() && angle_violations.is_empty() && zero_columns.is_empty();
    Ok(Membership {
        member,
        norm_violations,
        angle_violations,
        zero_columns,
    })
}

/// Membership without diagnostics; shape mismatches count as non-members.
pub fn is_member(z: &FMatrix, params: &ApproxSpaceParams) -> bool {
    if params.check_shape(z).is_err() {
        return false;
    }
    let r = params.radius();
    let (lo, hi) = ((1.0 - params.epsilon) * r, (1.0 + params.epsilon) * r);
    let norms: Vec<f64> = (0..z.cols()).map(|j| z.col_norm(j)).collect();
    if norms.iter().any(|&v| !(v > lo && v < hi)) {
        return false;
    }
    for l in 0..z.cols() {
        for m in (l + 1)..z.cols() {
            if !(z.col_inner(l, m).norm() / (norms[l] * norms[m]) < params.theta_val) {
                return false;
            }
        }
    }
    true
}

/// `sqrt(N^F - 1) Q(Z)` for any full-rank `Z`, without the membership or
/// `L < 1` hypotheses.
pub fn polar_project(z: &FMatrix) -> Result<FMatrix> {
    let svd = thin_svd(z)?;
    if !(svd.smallest() > 0.0) {
        return Err(Error::Invalid("polar projection of a rank-deficient matrix".into()));
    }
    Ok(svd.polar().q.scale(stiefel_radius(z.field(), z.rows())))
}

/// `Phi(Z) = sqrt(N^F - 1) Q(Z)` on the approximation space.
pub fn phi_project(z: &FMatrix, params: &ApproxSpaceParams) -> Result<FMatrix> {
    let m = membership(z, params)?;
    if !m.member {
        return Err(Error::NotMember(format!(
            "norm violations {:?}, angle violations {:?}",
            m.norm_violations, m.angle_violations
        )));
    }
    let l = params.l_bound()?;
    if l >= 1.0 {
        return Err(Error::LipschitzHypothesis { l_bound: l });
    }
    polar_project(z)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LipschitzEstimate {
    pub max_ratio: f64,
    pub pairs_used: usize,
    pub skipped: usize,
}

/// `max |f(Z) - f(W)| / |Z - W|` over the given pairs, in the Frobenius
/// metric.
pub fn empirical_lipschitz<F>(f: F, pairs: &[(FMatrix, FMatrix)]) -> Result<LipschitzEstimate>
where
    F: Fn(&FMatrix) -> Result<FMatrix>,
{
    empirical_lipschitz_with(f, pairs, |a, b| Ok(a.sub(b)?.norm()))
}

/// As `empirical_lipschitz` with a caller-supplied metric, used both on the
/// domain and the target.
pub fn empirical_lipschitz_with<F, D>(f: F, pairs: &[(FMatrix, FMatrix)], dist: D) -> Result<LipschitzEstimate>
where
    F: Fn(&FMatrix) -> Result<FMatrix>,
    D: Fn(&FMatrix, &FMatrix) -> Result<f64>,
{
    let mut max_ratio: f64 = 0.0;
    let mut used = 0;
    let mut skipped = 0;
    for (z, w) in pairs {
        let d = dist(z, w)?;
        if d == 0.0 {
            log::warn!("coincident pair skipped in Lipschitz estimate");
            skipped += 1;
            continue;
        }
        let ratio = dist(&f(z)?, &f(w)?)? / d;
        max_ratio = max_ratio.max(ratio);
        used += 1;
    }
    Ok(LipschitzEstimate {
        max_ratio,
        pairs_used: used,
        skipped,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PushforwardConfig {
    pub field: Field,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub n: usize,
    pub epsilon: f64,
    pub theta_val: f64,
    pub sample_size: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PushforwardReport {
    /// `(statistic, KS)` for `Phi`-pushforward against scaled Haar.
    pub ks: Vec<(String, f64)>,
    /// Same panel against unscaled Haar; expected to fail.
    pub control_ks: Vec<(String, f64)>,
    pub critical: f64,
    pub pass: bool,
    pub control_fails: bool,
    pub acceptance_rate: f64,
}

struct Panel {
    functional: FMatrix,
    block_rows: usize,
}

impl Panel {
    fn new(field: Field, big_n: usize, n: usize, seed: u64) -> Panel {
        let mut rng = rng_for(child_seed(seed, 0x70_616e_656c), 0);
        let a = crate::sampling::gaussian_matrix(field, big_n, n, &mut rng);
        let norm = a.norm();
        Panel {
            functional: a.scale(1.0 / norm),
            block_rows: (big_n / 2).max(n),
        }
    }

    fn names() -> [&'static str; 3] {
        ["re_inner_fixed", "top_singular_row_block", "first_component"]
    }

    fn eval(&self, z: &FMatrix) -> [f64; 3] {
        let block = z.top_rows(self.block_rows);
        [
            self.functional.re_inner(z),
            singular_values(&block).map(|s| s[0]).unwrap_or(f64::NAN),
            z[(0, 0)].re(),
        ]
    }
}

fn panel_ks(left: &[[f64; 3]], right: &[[f64; 3]]) -> Vec<(String, f64)> {
    Panel::names()
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let a = EmpiricalSample::new(left.iter().map(|v| v[k]).collect());
            let b = EmpiricalSample::new(right.iter().map(|v| v[k]).collect());
            (name.to_string(), ks_two_sample(&a, &b))
        })
        .collect()
}

/// Compares `Phi` applied to restricted-Gaussian samples with direct Haar
/// samples on a panel of real statistics, plus a scaling negative control.
pub fn pushforward_test(cfg: &PushforwardConfig, exec: Exec) -> Result<PushforwardReport> {
    if cfg.sample_size < 1000 {
        return Err(Error::TooFewSamples {
            got: cfg.sample_size,
            min: 1000,
        });
    }
    let base = SamplerConfig::new(cfg.field, cfg.big_n, cfg.n, true, cfg.seed, cfg.sample_size)?;
    let restricted = sample_restricted_gaussian(
        &base.with_seed(child_seed(cfg.seed, 1)),
        cfg.epsilon,
        cfg.theta_val,
        DEFAULT_ACCEPTANCE_FLOOR,
        exec,
    )?;
    let panel = Panel::new(cfg.field, cfg.big_n, cfg.n, cfg.seed);
    let pushed: Vec<[f64; 3]> = exec
        .map_slice(&restricted.samples, |z| polar_project(z).map(|q| panel.eval(&q)))
        .into_iter()
        .collect::<Result<_>>()?;
    let haar_cfg = base.with_seed(child_seed(cfg.seed, 2));
    let haar: Vec<[f64; 3]> = exec.map_indexed(cfg.sample_size, |i| panel.eval(&haar_at(&haar_cfg, i)));
    let unit_cfg = SamplerConfig {
        scaled: false,
        ..base.with_seed(child_seed(cfg.seed, 3))
    };
    let unit: Vec<[f64; 3]> = exec.map_indexed(cfg.sample_size, |i| panel.eval(&haar_at(&unit_cfg, i)));

    let critical = ks_critical_value(0.01, cfg.sample_size, cfg.sample_size);
    let ks = panel_ks(&pushed, &haar);
    let control_ks = panel_ks(&pushed, &unit);
    let pass = ks.iter().all(|(_, v)| *v < critical);
    let control_fails = !control_ks.iter().all(|(_, v)| *v < critical);
    Ok(PushforwardReport {
        ks,
        control_ks,
        critical,
        pass,
        control_fails,
        acceptance_rate: restricted.acceptance_rate,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ProkReport {
    /// `(level, quantile)` of `d(Z, X)`.
    pub distance_quantiles: Vec<(f64, f64)>,
    /// Exact `inf { eps : P(d < eps) >= 1 - eps }` for the empirical law.
    pub dp_lower: f64,
    /// Same quantity from the 200-point grid with bisection refinement.
    pub dp_lower_grid: f64,
}

/// Exact empirical `inf { eps : #{d_i < eps} / S >= 1 - eps }` from the
/// sorted distances: `min_k max(d_(k), 1 - k/S)`.
pub fn dp_lower_exact(sorted: &[f64]) -> f64 {
    let s = sorted.len() as f64;
    let mut best = 1.0_f64;
    for (i, &d) in sorted.iter().enumerate() {
        let k = (i + 1) as f64;
        best = best.min(d.max(1.0 - k / s));
    }
    best
}

/// Grid over `(0, 2]` followed by bisection in the first feasible cell.
pub fn dp_lower_grid(sorted: &[f64]) -> f64 {
    let s = sorted.len() as f64;
    let feasible = |eps: f64| {
        let below = sorted.partition_point(|&d| d < eps) as f64;
        below / s >= 1.0 - eps
    };
    let step = 2.0 / 200.0;
    let mut hi = 2.0;
    let mut lo = 0.0;
    for k in 1..=200 {
        let e = k as f64 * step;
        if feasible(e) {
            hi = e;
            lo = e - step;
            break;
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Distances from Gaussian samples to the scaled Stiefel manifold and the
/// resulting lower bound on their Prohorov distance.
pub fn prok_experiment(
    field: Field,
    big_n: usize,
    n: usize,
    sample_size: usize,
    seed: u64,
    exec: Exec,
) -> Result<ProkReport> {
    let cfg = SamplerConfig::new(field, big_n, n, false, seed, sample_size)?;
    let r = stiefel_radius(field, big_n);
    let mut d: Vec<f64> = exec
        .map_indexed(sample_size, |i| {
            singular_values(&gaussian_at(&cfg, i)).map(|l| stiefel_gap(&l, r))
        })
        .into_iter()
        .collect::<Result<_>>()?;
    d.sort_by(f64::total_cmp);
    let q = |p: f64| d[(((d.len() - 1) as f64) * p).round() as usize];
    let distance_quantiles = [0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99]
        .iter()
        .map(|&p| (p, q(p)))
        .collect();
    Ok(ProkReport {
        distance_quantiles,
        dp_lower: dp_lower_exact(&d),
        dp_lower_grid: dp_lower_grid(&d),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Quat;

    #[test]
    fn zero_matrix_is_not_a_member() {
        let p = ApproxSpaceParams::new(Field::C, 5, 2, 0.3).unwrap();
        let m = membership(&FMatrix::zeros(Field::C, 5, 2), &p).unwrap();
        assert!(!m.member);
        assert_eq!(m.zero_columns, vec![0, 1]);
    }

    #[test]
    fn hand_polar_example() {
        let z = FMatrix::from_real(2, 1, &[2.0, 0.0]).unwrap();
        let p = ApproxSpaceParams::new(Field::R, 2, 1, 0.5).unwrap();
        // |z| = 2 is outside (0.5, 1.5), so Phi is not defined there
        assert!(matches!(phi_project(&z, &p), Err(Error::NotMember(_))));
        let wide = ApproxSpaceParams::with_theta(Field::R, 2, 1, 0.5, 0.5).unwrap();
        let q = polar_project(&z).unwrap();
        assert_eq!(q, FMatrix::from_real(2, 1, &[1.0, 0.0]).unwrap());
        let inside = FMatrix::from_real(2, 1, &[1.2, 0.0]).unwrap();
        assert_eq!(phi_project(&inside, &wide).unwrap(), q);
    }

    #[test]
    fn frame_is_fixed_by_phi() {
        let r = stiefel_radius(Field::H, 4);
        let z = FMatrix::embedded_identity(Field::H, 4, 2).scale(r);
        let p = ApproxSpaceParams::new(Field::H, 4, 2, 0.1).unwrap();
        let phi = phi_project(&z, &p).unwrap();
        assert!(phi.sub(&z).unwrap().norm() < 1e-12);
    }

    #[test]
    fn lipschitz_trivial_maps() {
        let a = FMatrix::from_fn(Field::C, 3, 1, |i, _| Quat::new(i as f64, 1.0, 0.0, 0.0));
        let b = FMatrix::zeros(Field::C, 3, 1);
        let pairs = vec![(a.clone(), b.clone()), (a.clone(), a.clone())];
        let id = empirical_lipschitz(|z| Ok(z.clone()), &pairs).unwrap();
        assert!((id.max_ratio - 1.0).abs() < 1e-15);
        assert_eq!(id.skipped, 1);
        let two = empirical_lipschitz(|z| Ok(z.scale(2.0)), &pairs).unwrap();
        assert!((two.max_ratio - 2.0).abs() < 1e-15);
    }

    #[test]
    fn dp_estimators_agree() {
        let d: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        let e = dp_lower_exact(&d);
        assert!((e - 0.5).abs() < 2e-3);
        assert!((dp_lower_grid(&d) - e).abs() < 1e-9);
    }
}
