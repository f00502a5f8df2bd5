//! Explicit schedules and bounds: the angle function, the growth
//! conditions on `n_N`, the `eps_{N,l}`/`T_{N,l}` sequences, the
//! `n_sigma(delta)` recursion, the bound on `L(n, eps, theta)` and the
//! product lower bound for the mass of the approximation space.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::algebra::Field;
use crate::error::{Error, Result};
use crate::gaussian::{annulus_mass, ball_mass};

/// `theta(eps) = sqrt(5 eps^2 (1+eps) / ((1-eps) + 5 eps^2 (1+eps)))`.
pub fn theta(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::OutOfRange {
            name: "epsilon",
            value: eps,
            range: "(0, 1)",
        });
    }
    let top = 5.0 * eps * eps * (1.0 + eps);
    Ok((top / ((1.0 - eps) + top)).sqrt())
}

/// Growth condition on `n_N`. The constant `c` of condition (*) and `a'`
/// are the same parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Condition {
    Ass { a: f64, a_prime: f64 },
    Condi { a_prime: f64 },
}

impl Default for Condition {
    fn default() -> Self {
        Condition::Condi { a_prime: 0.9 }
    }
}

impl Condition {
    pub fn a_prime(&self) -> f64 {
        match *self {
            Condition::Ass { a_prime, .. } | Condition::Condi { a_prime } => a_prime,
        }
    }

    fn validate(&self) -> Result<()> {
        let check = |name: &'static str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::OutOfRange {
                    name,
                    value: v,
                    range: "(0, 1)",
                })
            }
        };
        match *self {
            Condition::Ass { a, a_prime } => {
                check("a", a)?;
                check("a_prime", a_prime)
            }
            Condition::Condi { a_prime } => check("a_prime", a_prime),
        }
    }

    /// `a_N` as a function of `p_N`.
    pub fn a_n(&self, p: f64) -> f64 {
        match *self {
            Condition::Ass { a, .. } => 0.5 * a * (1.0 - p),
            Condition::Condi { .. } => 0.25 * (1.0 + p),
        }
    }

    /// Summand of the supremum defining the condition.
    pub fn expression(&self, big_n: f64, n: f64) -> f64 {
        match *self {
            Condition::Ass { a, a_prime } => {
                2.0 * n.ln() - 0.25 * a_prime * (big_n / n).powf(1.0 - a)
            }
            Condition::Condi { a_prime } => {
                2.0 * n.ln() - 0.25 * a_prime * (big_n / (n * n * n)).sqrt()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    #[serde(rename = "N")]
    pub big_n: u64,
    pub n: u64,
    pub condition: Condition,
    pub p: f64,
    pub a: f64,
    pub epsilon: f64,
    pub b: f64,
    /// `eps_{N,l}` for `l = 1 .. n-1`.
    pub eps_l: Vec<f64>,
    /// `T_{N,l}` for `l = 1 .. n-1`.
    pub t_l: Vec<f64>,
    pub theta: f64,
    pub q: f64,
    pub sigma: f64,
    /// Square root of the right side of the `L(n, eps, theta)` bound at
    /// `(n, eps_N, sigma_N)`; absent when `n > n_sigma(theta_N)`.
    pub l_bound: Option<f64>,
    /// `(1 - L)^{-1}`, present only when `L < 1`.
    pub lip_bound: Option<f64>,
}

/// `eps_{N,l}`, evaluated in the cancellation-free form.
pub fn eps_nl(big_n: u64, l: u64, eps: f64, b: f64) -> f64 {
    let s1 = ((big_n - 1) as f64).sqrt();
    let s2 = ((big_n - l - 1) as f64).sqrt();
    (b * eps * s1 - l as f64 / (s1 + s2)) / s2
}

/// `T_{N,l}`.
pub fn t_nl(big_n: u64, l: u64, eps: f64, eps_l: f64) -> f64 {
    let k = (big_n - l - 1) as f64 / l as f64;
    (k * (eps - eps_l) * (eps + eps_l + 2.0)).max(0.0).sqrt()
}

pub fn make_schedule(big_n: u64, n: u64, condition: Condition) -> Result<Schedule> {
    condition.validate()?;
    if big_n < 3 {
        return Err(Error::InvalidSize { n: big_n as usize, max: usize::MAX });
    }
    if n < 1 || n > big_n - 1 {
        return Err(Error::InvalidSize {
            n: n as usize,
            max: (big_n - 1) as usize,
        });
    }
    let log_base = ((big_n - 1) as f64).ln();
    let p = (n as f64).ln() / log_base;
    let a = condition.a_n(p);
    let epsilon = (-a * log_base).exp();
    let b = 1.0 - epsilon;
    let eps_l: Vec<f64> = (1..n).map(|l| eps_nl(big_n, l, epsilon, b)).collect();
    let t_l = (1..n)
        .zip(&eps_l)
        .map(|(l, &e)| t_nl(big_n, l, epsilon, e))
        .collect();
    let th = theta(epsilon)?;
    let q = 2.0 * (p + 1.0 / 3.0) / (1.0 + p);
    let sigma = th.powf(2.0 - q);
    let l = l_bound(n, epsilon, sigma.min(1.0)).ok();
    let lip = l.and_then(lip_from_l);
    Ok(Schedule {
        big_n,
        n,
        condition,
        p,
        a,
        epsilon,
        b,
        eps_l,
        t_l,
        theta: th,
        q,
        sigma,
        l_bound: l,
        lip_bound: lip,
    })
}

pub fn lip_from_l(l: f64) -> Option<f64> {
    (l < 1.0).then(|| 1.0 / (1.0 - l))
}

impl Schedule {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }

    /// Necessary lower bound on `theta(eps_N)^2` for the subset argument,
    /// one value per `l = 1 .. n-1`. Reported only, never used as `theta`.
    pub fn angle_diagnostic(&self, field: Field) -> Vec<f64> {
        self.t_l
            .iter()
            .zip(&self.eps_l)
            .enumerate()
            .map(|(i, (&t, &e))| {
                let l = (i + 1) as f64;
                let rest = field.real_size((self.big_n - i as u64 - 1) as usize) as f64 - 1.0;
                let w = l * t * t;
                w / (w + (1.0 - e).powi(2) * rest)
            })
            .collect()
    }

    /// `eps_{N,l} sqrt((N-l)^F - 1) >= a' eps_N sqrt(N - 1)` for every `l`.
    pub fn cor_en_holds(&self, field: Field, a_prime: f64) -> bool {
        let rhs = a_prime * self.epsilon * ((self.big_n - 1) as f64).sqrt();
        self.eps_l.iter().enumerate().all(|(i, &e)| {
            let rest = field.real_size((self.big_n - (i as u64 + 1)) as usize) as f64 - 1.0;
            e * rest.sqrt() >= rhs
        })
    }

    /// `eps_N <= theta_N <= 3 eps_N`.
    pub fn theta_chain_holds(&self) -> bool {
        self.epsilon <= self.theta && self.theta <= 3.0 * self.epsilon
    }

    /// `n_N <= sigma_N / (2 theta_N^2) <= n_{sigma_N}(theta_N)`.
    pub fn claim(&self) -> ClaimCheck {
        let middle = self.sigma / (2.0 * self.theta * self.theta);
        let n_sigma = sigma_recursion(self.theta, self.sigma.min(1.0))
            .map(|r| r.n_sigma)
            .unwrap_or(0);
        ClaimCheck {
            n: self.n,
            middle,
            n_sigma,
            holds: (self.n as f64) <= middle && middle <= n_sigma as f64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClaimCheck {
    pub n: u64,
    pub middle: f64,
    pub n_sigma: u64,
    pub holds: bool,
}

/// First `N` in `[3, n_max]` at which the claim and the `theta` chain hold
/// for the given rule, scanning every `N`.
pub fn claim_threshold(rule: &NRule, condition: Condition, n_max: u64) -> Option<u64> {
    (3..=n_max).find(|&big_n| {
        let n = rule.eval(big_n).min(big_n - 1);
        make_schedule(big_n, n, condition)
            .map(|s| s.theta_chain_holds() && s.claim().holds)
            .unwrap_or(false)
    })
}

/// Rule `N -> n_N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "arg", rename_all = "lowercase")]
pub enum NRule {
    Const(u64),
    /// `floor(N^p)`
    Power(f64),
    /// `floor((N / ln N)^p + 1)`
    PowerLog(f64),
    /// Explicit values; `N` outside the table uses the nearest smaller key.
    Table(BTreeMap<u64, u64>),
}

impl NRule {
    pub fn eval(&self, big_n: u64) -> u64 {
        let x = big_n as f64;
        let v = match self {
            NRule::Const(k) => *k,
            NRule::Power(p) => x.powf(*p).floor() as u64,
            NRule::PowerLog(p) => ((x / x.ln()).powf(*p) + 1.0).floor() as u64,
            NRule::Table(t) => t
                .range(..=big_n)
                .next_back()
                .or_else(|| t.iter().next())
                .map(|(_, &v)| v)
                .unwrap_or(1),
        };
        v.max(1)
    }

    /// Values of `N` at which the rule is evaluated up to `n_max`.
    fn domain(&self, n_max: u64) -> Vec<u64> {
        match self {
            NRule::Table(t) => t.keys().copied().filter(|&k| k >= 2 && k <= n_max).collect(),
            _ => (2..=n_max).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    Bounded,
    Increasing,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    pub sup_value: f64,
    pub sup_at: u64,
    pub trend: Trend,
}

/// Running supremum of the condition's expression over `N <= n_max`.
///
/// The trend is a heuristic: the tail is flagged as increasing when the
/// maximum over the last decade still gains on the previous one by at least
/// 95% of that decade's own gain.
pub fn condition_check(rule: &NRule, n_max: u64, condition: Condition) -> ConditionReport {
    let mut sup_value = f64::NEG_INFINITY;
    let mut sup_at = 0;
    let top = (n_max as f64).log10();
    let mut decade_max = [f64::NEG_INFINITY; 3];
    for big_n in rule.domain(n_max) {
        let n = rule.eval(big_n);
        let v = condition.expression(big_n as f64, n as f64);
        if v > sup_value {
            sup_value = v;
            sup_at = big_n;
        }
        let back = top - (big_n as f64).log10();
        if back <= 1.0 {
            decade_max[2] = decade_max[2].max(v);
        } else if back <= 2.0 {
            decade_max[1] = decade_max[1].max(v);
        } else if back <= 3.0 {
            decade_max[0] = decade_max[0].max(v);
        }
    }
    let late = decade_max[2] - decade_max[1];
    let early = decade_max[1] - decade_max[0];
    let trend = if late.is_finite() && early.is_finite() && late > 0.0 && late >= 0.95 * early {
        Trend::Increasing
    } else {
        Trend::Bounded
    };
    ConditionReport {
        sup_value,
        sup_at,
        trend,
    }
}

/// `phi_delta(s) = (delta + s)^2 / (1 - s)`.
pub fn phi_delta(delta: f64, s: f64) -> f64 {
    (delta + s).powi(2) / (1.0 - s)
}

/// `R_delta(s) = 2 (delta + s) / (1 - s)`.
pub fn r_delta(delta: f64, s: f64) -> f64 {
    2.0 * (delta + s) / (1.0 - s)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SigmaRecursion {
    pub delta: f64,
    pub sigma: f64,
    /// `s_1 .. s_{n_sigma}`.
    pub s: Vec<f64>,
    /// `c_1 .. c_{n_sigma}`.
    pub c: Vec<f64>,
    pub n_sigma: u64,
}

impl SigmaRecursion {
    /// `s_l`, with `s_0 = 0`.
    pub fn s_at(&self, l: usize) -> f64 {
        if l == 0 {
            0.0
        } else {
            self.s[l - 1]
        }
    }

    /// Largest deviation `|delta^2 sum_{m<=l} c_m^2 - s_l| / max(1, s_l)`
    /// over `l`; the last step may overshoot 1 by a wide margin.
    pub fn rel_residual(&self) -> f64 {
        let d2 = self.delta * self.delta;
        let mut acc = 0.0;
        let mut worst: f64 = 0.0;
        for (c, s) in self.c.iter().zip(&self.s) {
            acc += c * c;
            worst = worst.max((d2 * acc - s).abs() / s.max(1.0));
        }
        worst
    }
}

pub fn sigma_recursion(delta: f64, sigma: f64) -> Result<SigmaRecursion> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::OutOfRange {
            name: "delta",
            value: delta,
            range: "(0, inf)",
        });
    }
    if !(0.0..=1.0).contains(&sigma) {
        return Err(Error::OutOfRange {
            name: "sigma",
            value: sigma,
            range: "[0, 1]",
        });
    }
    let d2 = delta * delta;
    let mut s = Vec::new();
    let mut c = Vec::new();
    let mut prev = 0.0;
    let mut sum_c2 = 0.0;
    loop {
        let next = prev + phi_delta(delta, prev);
        let cl = (1.0 + delta * sum_c2) / (1.0 - d2 * sum_c2).sqrt();
        sum_c2 += cl * cl;
        s.push(next);
        c.push(cl);
        if next >= sigma {
            break;
        }
        prev = next;
    }
    let n_sigma = s.len() as u64;
    Ok(SigmaRecursion {
        delta,
        sigma,
        s,
        c,
        n_sigma,
    })
}

/// Bracket on `n_sigma(delta)`: the lower end is absent for `sigma = 1`.
pub fn itere_bounds(delta: f64, sigma: f64) -> (Option<f64>, f64) {
    let ratio = sigma / (delta * delta);
    let r0 = r_delta(delta, 0.0);
    let upper = (1.0 + r0 * ratio).ln() / (1.0 + r0).ln() + 1.0;
    let lower = (sigma < 1.0).then(|| {
        let rs = r_delta(delta, sigma);
        (1.0 + rs * ratio).ln() / (1.0 + rs).ln()
    });
    (lower, upper)
}

/// `sqrt(n eps^2 + 2 n (1 + eps) sigma / (1 + sqrt(1 - sigma)))`, valid for
/// `n <= n_sigma(theta(eps))`.
pub fn l_bound(n: u64, eps: f64, sigma: f64) -> Result<f64> {
    let th = theta(eps)?;
    let rec = sigma_recursion(th, sigma)?;
    if n > rec.n_sigma {
        return Err(Error::SigmaPrecondition {
            n: n as usize,
            n_sigma: rec.n_sigma as usize,
        });
    }
    Ok(l_bound_value(n, eps, sigma))
}

pub fn l_bound_value(n: u64, eps: f64, sigma: f64) -> f64 {
    let n = n as f64;
    (n * eps * eps + 2.0 * n * (1.0 + eps) * sigma / (1.0 + (1.0 - sigma).sqrt())).sqrt()
}

/// Smallest admissible `sigma` for `n` columns at angle `theta(eps)`:
/// just above `s_{n-1}`, or `0` for a single column.
pub fn tightest_sigma(n: u64, eps: f64) -> Result<f64> {
    if n <= 1 {
        return Ok(0.0);
    }
    let th = theta(eps)?;
    let mut prev = 0.0;
    for _ in 1..n {
        if prev >= 1.0 {
            return Err(Error::SigmaPrecondition {
                n: n as usize,
                n_sigma: 0,
            });
        }
        prev += phi_delta(th, prev);
    }
    if prev >= 1.0 {
        return Err(Error::SigmaPrecondition {
            n: n as usize,
            n_sigma: 0,
        });
    }
    Ok(prev * (1.0 + 4.0 * f64::EPSILON))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VBound {
    /// `v_{N,l}` for `l = 0 .. n-1`.
    pub v: Vec<f64>,
    pub product_lower: f64,
}

/// Per-factor masses and their product, a lower bound on the Gaussian
/// mass of the approximation space.
pub fn v_bound(schedule: &Schedule, field: Field) -> Result<VBound> {
    let big_n = schedule.big_n;
    let mut v = Vec::with_capacity(schedule.n as usize);
    let m0 = field.real_size(big_n as usize) as u64;
    v.push(1.0 - annulus_mass(m0, schedule.epsilon)?.mass);
    for (i, (&e, &t)) in schedule.eps_l.iter().zip(&schedule.t_l).enumerate() {
        let l = (i + 1) as u64;
        let m = field.real_size((big_n - l) as usize) as u64;
        let ring = if e > 0.0 { annulus_mass(m, e)?.mass } else { 0.0 };
        let ball = ball_mass(field.dim(), t)?;
        v.push(1.0 - ball.powi(l as i32) * ring);
    }
    let product_lower = v.iter().map(|x| 1.0 - x).product();
    Ok(VBound { v, product_lower })
}
