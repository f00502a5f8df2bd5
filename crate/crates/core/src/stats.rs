//! Estimators on empirical data: Kolmogorov–Smirnov, exact Prohorov
//! distance in one dimension, binned total variation, Ky Fan, partial
//! diameter, and witness lower bounds for the observable diameter.

use serde::Serialize;

use crate::algebra::FMatrix;
use crate::error::{Error, Result};
use crate::exec::Exec;

/// Sorted one-dimensional sample with uniform weights.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmpiricalSample {
    values: Vec<f64>,
    pub meta: String,
}

impl EmpiricalSample {
    pub fn new(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        EmpiricalSample {
            values,
            meta: String::new(),
        }
    }

    pub fn with_meta(mut self, meta: impl Into<String>) -> Self {
        self.meta = meta.into();
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Distinct support points with their multiplicities.
    fn atoms(&self) -> Atoms {
        let mut x: Vec<f64> = Vec::new();
        let mut w: Vec<i64> = Vec::new();
        for &v in &self.values {
            if x.last() == Some(&v) {
                *w.last_mut().unwrap() += 1;
            } else {
                x.push(v);
                w.push(1);
            }
        }
        let mut cum = Vec::with_capacity(w.len() + 1);
        cum.push(0);
        for &m in &w {
            cum.push(cum.last().unwrap() + m);
        }
        Atoms { x, w, cum, total: self.values.len() as i64 }
    }
}

impl From<Vec<f64>> for EmpiricalSample {
    fn from(values: Vec<f64>) -> Self {
        EmpiricalSample::new(values)
    }
}

/// Number of points a window of mass `1 - kappa` must hold.
fn window_size(kappa: f64, s: usize) -> usize {
    let t = (1.0 - kappa) * s as f64;
    let r = t.round();
    let k = if (t - r).abs() <= 1e-9 * (s as f64).max(1.0) {
        r
    } else {
        t.ceil()
    };
    (k as usize).clamp(1, s)
}

/// `diam(mu; 1 - kappa)` of an empirical measure: the shortest window of
/// consecutive sorted points carrying mass at least `1 - kappa`.
pub fn partial_diameter(sample: &EmpiricalSample, kappa: f64) -> Result<f64> {
    let v = sample.values();
    if v.is_empty() {
        return Err(Error::TooFewSamples { got: 0, min: 1 });
    }
    if kappa >= 1.0 {
        log::warn!("partial diameter with kappa >= 1 is 0");
        return Ok(0.0);
    }
    if kappa <= 0.0 {
        return Ok(v[v.len() - 1] - v[0]);
    }
    let k = window_size(kappa, v.len());
    Ok((0..=v.len() - k)
        .map(|i| v[i + k - 1] - v[i])
        .fold(f64::INFINITY, f64::min))
}

struct Atoms {
    x: Vec<f64>,
    w: Vec<i64>,
    cum: Vec<i64>,
    total: i64,
}

impl Atoms {
    /// `#{x : x - y < eps}`, comparing distances rather than shifted
    /// endpoints so radii below one ulp of `y` behave.
    fn below(&self, y: f64, eps: f64) -> i64 {
        self.cum[self.x.partition_point(|&v| v - y < eps)]
    }

    /// `#{x : y - x >= eps}`.
    fn at_most(&self, y: f64, eps: f64) -> i64 {
        self.cum[self.x.partition_point(|&v| y - v >= eps)]
    }
}

/// `max_A nu(A) - mu(B_eps(A))` over subsets of `nu`'s atoms, with open
/// balls. Since balls share a radius, the new mass contributed by the next
/// chosen atom depends only on the previously chosen one. Masses are kept
/// as integers scaled by `|mu| |nu|` so ties are exact.
fn excess(mu: &Atoms, nu: &Atoms, eps: f64) -> i64 {
    let (sm, sn) = (nu.total, mu.total);
    let mut best = 0i64;
    let mut max_f = i64::MIN / 4;
    let mut max_g = i64::MIN / 4;
    for (&y, &w) in nu.x.iter().zip(&nu.w) {
        let left = mu.at_most(y, eps);
        let right = mu.below(y, eps);
        let carry = 0i64.max(max_f).max(max_g - sm * left);
        let f = sn * w - sm * (right - left) + carry;
        best = best.max(f);
        max_f = max_f.max(f);
        max_g = max_g.max(f + sm * right);
    }
    best
}

fn prohorov_gap(a: &Atoms, b: &Atoms, eps: f64) -> f64 {
    let scaled = excess(a, b, eps).max(excess(b, a, eps));
    scaled as f64 / (a.total as f64 * b.total as f64)
}

/// Exact Prohorov distance between two empirical measures on the line.
pub fn prohorov_1d(a: &EmpiricalSample, b: &EmpiricalSample) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::TooFewSamples { got: 0, min: 1 });
    }
    let (ma, mb) = (a.atoms(), b.atoms());
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if prohorov_gap(&ma, &mb, mid) <= mid {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // the gap is a step function of eps that only moves at pairwise
    // distances; the infimum is a plateau value or such a distance
    let plateau = prohorov_gap(&ma, &mb, hi);
    let d = snap_distance(&ma, &mb, hi);
    if d >= lo && d <= hi {
        return Ok(plateau.max(d));
    }
    if plateau >= lo {
        return Ok(plateau);
    }
    Ok(hi)
}

/// Pairwise distance `|x - y|` closest to `target`.
fn snap_distance(a: &Atoms, b: &Atoms, target: f64) -> f64 {
    let mut best = target;
    let mut gap = f64::INFINITY;
    for &x in &a.x {
        for t in [x - target, x + target] {
            let i = b.x.partition_point(|&v| v < t);
            for j in [i.wrapping_sub(1), i] {
                if let Some(&y) = b.x.get(j) {
                    let d = (x - y).abs();
                    if (d - target).abs() < gap {
                        gap = (d - target).abs();
                        best = d;
                    }
                }
            }
        }
    }
    best
}

/// Uniform bins on `[lo, hi)` with one overflow bin on each side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Binning {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Binning {
    pub fn new(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !(hi > lo) || count == 0 {
            return Err(Error::Invalid("binning needs lo < hi and at least one bin".into()));
        }
        Ok(Binning { lo, hi, count })
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.count as f64
    }

    fn index(&self, x: f64) -> usize {
        if x < self.lo {
            0
        } else if x >= self.hi {
            self.count + 1
        } else {
            1 + (((x - self.lo) / self.width()) as usize).min(self.count - 1)
        }
    }

    fn frequencies(&self, s: &EmpiricalSample) -> Vec<f64> {
        let mut f = vec![0.0; self.count + 2];
        let unit = 1.0 / s.len() as f64;
        for &x in s.values() {
            f[self.index(x)] += unit;
        }
        f
    }
}

/// Half the L1 distance between bin frequencies.
pub fn tv_binned(a: &EmpiricalSample, b: &EmpiricalSample, bins: &Binning) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::TooFewSamples { got: 0, min: 1 });
    }
    let (fa, fb) = (bins.frequencies(a), bins.frequencies(b));
    Ok(0.5 * fa.iter().zip(&fb).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

/// Smallest `eps` with `#{d_i > eps} / S <= eps`.
pub fn ky_fan(distances: &[f64]) -> f64 {
    if distances.is_empty() {
        return 0.0;
    }
    let mut d = distances.to_vec();
    d.sort_by(|a, b| b.total_cmp(a));
    let s = d.len() as f64;
    (0..=d.len())
        .map(|k| {
            let next = d.get(k).copied().unwrap_or(0.0);
            next.max(k as f64 / s)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &EmpiricalSample, b: &EmpiricalSample) -> f64 {
    let (x, y) = (a.values(), b.values());
    if x.is_empty() || y.is_empty() {
        return 1.0;
    }
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// One-sample Kolmogorov–Smirnov statistic against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(sample: &EmpiricalSample, cdf: F) -> f64 {
    let n = sample.len() as f64;
    sample
        .values()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic two-sample critical value at level `alpha`.
pub fn ks_critical_value(alpha: f64, n: usize, m: usize) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// Asymptotic one-sample critical value at level `alpha`.
pub fn ks_critical_one_sample(alpha: f64, n: usize) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// A 1-Lipschitz real function on the matrix space.
#[derive(Clone, Debug, PartialEq)]
pub enum Witness {
    /// `Re <E, Z>` with `E` the unit matrix at one real coordinate.
    Coordinate { row: usize, col: usize, component: usize },
    /// `Re <E, Z>` for a fixed `E`, normalized to `|E| = 1`.
    Functional { name: String, e: FMatrix },
    /// `Z -> |z_l|`.
    ColumnNorm(usize),
    /// `Z -> |Z - Z_0|`.
    DistanceTo { name: String, center: FMatrix },
    /// `Z -> |Z|`, well defined on every quotient by unitary actions.
    QuotientNorm,
}

impl Witness {
    pub fn functional(name: impl Into<String>, e: &FMatrix) -> Result<Self> {
        let norm = e.norm();
        if norm == 0.0 {
            return Err(Error::Invalid("zero functional".into()));
        }
        Ok(Witness::Functional {
            name: name.into(),
            e: e.scale(1.0 / norm),
        })
    }

    pub fn name(&self) -> String {
        match self {
            Witness::Coordinate { row, col, component } => format!("coord_{row}_{col}_{component}"),
            Witness::Functional { name, .. } => format!("functional_{name}"),
            Witness::ColumnNorm(l) => format!("column_norm_{l}"),
            Witness::DistanceTo { name, .. } => format!("distance_{name}"),
            Witness::QuotientNorm => "quotient_norm".to_string(),
        }
    }

    pub fn eval(&self, z: &FMatrix) -> f64 {
        match self {
            Witness::Coordinate { row, col, component } => z[(*row, *col)].0[*component],
            Witness::Functional { e, .. } => e.re_inner(z),
            Witness::ColumnNorm(l) => z.col_norm(*l),
            Witness::DistanceTo { center, .. } => z.sub(center).map(|d| d.norm()).unwrap_or(f64::NAN),
            Witness::QuotientNorm => z.norm(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct WitnessFamily(pub Vec<Witness>);

impl WitnessFamily {
    pub fn coordinate() -> Self {
        WitnessFamily(vec![Witness::Coordinate {
            row: 0,
            col: 0,
            component: 0,
        }])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObsDiamReport {
    pub per_witness: Vec<(String, f64)>,
    /// Lower bound on `ObsDiam(X; -kappa)`.
    pub max: f64,
}

/// Max over the family of partial diameters of the push-forwards; a lower
/// bound for the observable diameter, never an estimate of it.
pub fn obs_diam_lower(samples: &[FMatrix], family: &WitnessFamily, kappa: f64, exec: Exec) -> Result<ObsDiamReport> {
    if samples.is_empty() {
        return Err(Error::TooFewSamples { got: 0, min: 1 });
    }
    let mut per_witness = Vec::with_capacity(family.0.len());
    for w in &family.0 {
        let values = exec.map_slice(samples, |z| w.eval(z));
        let pd = partial_diameter(&EmpiricalSample::new(values), kappa)?;
        per_witness.push((w.name(), pd));
    }
    let max = per_witness.iter().map(|(_, v)| *v).fold(0.0, f64::max);
    Ok(ObsDiamReport { per_witness, max })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[f64]) -> EmpiricalSample {
        EmpiricalSample::new(v.to_vec())
    }

    #[test]
    fn partial_diameter_examples() {
        assert_eq!(partial_diameter(&s(&[3.0]), 0.3).unwrap(), 0.0);
        let n = 101;
        let grid: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let pd = partial_diameter(&s(&grid), 0.1).unwrap();
        let k = (0.9 * n as f64).ceil();
        assert!((pd - (k - 1.0) / (n - 1) as f64).abs() < 1e-12);
        assert_eq!(partial_diameter(&s(&[0.0, 1.0, 5.0]), 1.0).unwrap(), 0.0);
        assert_eq!(partial_diameter(&s(&[0.0, 1.0, 5.0]), 0.0).unwrap(), 5.0);
        // exactly half of ten points: the window holds five
        let ten: Vec<f64> = (0..10).map(f64::from).collect();
        assert_eq!(partial_diameter(&s(&ten), 0.5).unwrap(), 4.0);
    }

    #[test]
    fn point_mass_prohorov() {
        assert_eq!(prohorov_1d(&s(&[0.0]), &s(&[0.3])).unwrap(), 0.3);
        assert_eq!(prohorov_1d(&s(&[0.0]), &s(&[1.0])).unwrap(), 1.0);
        assert_eq!(prohorov_1d(&s(&[0.0]), &s(&[7.0])).unwrap(), 1.0);
        let a = s(&[0.1, 0.5, 0.2]);
        assert_eq!(prohorov_1d(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn tv_examples() {
        let b = Binning::new(0.0, 1.0, 10).unwrap();
        let a = s(&[0.05, 0.15, 0.95]);
        assert_eq!(tv_binned(&a, &a, &b).unwrap(), 0.0);
        assert!((tv_binned(&s(&[0.05]), &s(&[0.55]), &b).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ky_fan_examples() {
        assert_eq!(ky_fan(&[0.0; 5]), 0.0);
        assert_eq!(ky_fan(&[1.0; 5]), 1.0);
        let n = 100;
        let d: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
        assert!((ky_fan(&d) - 0.5).abs() <= 1.0 / n as f64);
    }

    #[test]
    fn ks_ties_and_identity() {
        let a = s(&[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        assert_eq!(ks_two_sample(&s(&[0.0, 1.0]), &s(&[2.0, 3.0])), 1.0);
        assert!((ks_critical_value(0.01, 10_000, 10_000) - 1.6276 * (2.0f64 / 10_000.0).sqrt()).abs() < 1e-4);
    }

    #[test]
    fn one_point_space_has_zero_obs_diam() {
        let z = FMatrix::identity(crate::algebra::Field::C, 2);
        let fam = WitnessFamily(vec![
            Witness::Coordinate { row: 0, col: 0, component: 0 },
            Witness::ColumnNorm(1),
            Witness::QuotientNorm,
        ]);
        for kappa in [0.1, 0.5, 0.9] {
            let r = obs_diam_lower(&[z.clone(), z.clone()], &fam, kappa, Exec::Serial).unwrap();
            assert_eq!(r.max, 0.0);
        }
    }
}
