//! Radial law of the standard Gaussian measure, the one-dimensional CDF
//! and its quantile, annulus and ball masses, the root of `G`, and the
//! remainder term of Stirling's formula.

use std::f64::consts::{FRAC_1_SQRT_2, LN_2, PI};

use serde::Serialize;

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
/// Beyond this many units from the mode the radial density is below
/// `exp(-1250)` times its peak (log-concavity with curvature >= 1).
const TRUNCATION: f64 = 50.0;

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Stirling remainder `rho(x) = ln Gamma(x) - ln(sqrt(2 pi / x) (x / e)^x)`.
pub fn rho(x: f64) -> f64 {
    assert!(x > 0.0, "rho needs x > 0");
    if x >= 10.0 {
        return rho_series(x);
    }
    // shift up by the recurrence Gamma(x + 1) = x Gamma(x)
    let k = (10.0 - x).ceil();
    let y = x + k;
    let mut log_prod = 0.0;
    let mut prod = 1.0;
    let mut i = 0.0;
    while i < k {
        prod *= x + i;
        if prod > 1e200 {
            log_prod += prod.ln();
            prod = 1.0;
        }
        i += 1.0;
    }
    log_prod += prod.ln();
    rho_series(y) + stirling_main(y) - stirling_main(x) - log_prod
}

fn stirling_main(x: f64) -> f64 {
    (x - 0.5) * x.ln() - x
}

fn rho_series(x: f64) -> f64 {
    const C: [f64; 7] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
    ];
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut acc = 0.0;
    for c in C.iter().rev() {
        acc = acc * inv2 + c;
    }
    acc * inv
}

/// `ln Gamma(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    stirling_main(x) + LN_SQRT_2PI + rho(x)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StirlingCheck {
    pub rho: f64,
    pub in_bracket: bool,
}

pub fn stirling_check(x: f64) -> Result<StirlingCheck> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::OutOfRange {
            name: "x",
            value: x,
            range: "(0, inf)",
        });
    }
    let r = rho(x);
    Ok(StirlingCheck {
        rho: r,
        in_bracket: r > 0.0 && r < 1.0 / (12.0 * x),
    })
}

/// `ln(x^a e^{-x} / Gamma(a))`, arranged so large `a` does not cancel.
fn ln_gamma_prefactor(a: f64, x: f64) -> f64 {
    if x == 0.0 {
        return f64::NEG_INFINITY;
    }
    let t = (x - a) / a;
    -a * (t - t.ln_1p()) + 0.5 * a.ln() - LN_SQRT_2PI - rho(a)
}

/// Regularized lower and upper incomplete gamma functions `(P, Q)`.
pub fn reg_gamma(a: f64, x: f64) -> (f64, f64) {
    assert!(a > 0.0 && x >= 0.0, "reg_gamma domain");
    if x == 0.0 {
        return (0.0, 1.0);
    }
    if x.is_infinite() {
        return (1.0, 0.0);
    }
    let log_pre = ln_gamma_prefactor(a, x);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..1_000_000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        let p = (log_pre + sum.ln()).exp();
        (p, 1.0 - p)
    } else {
        // modified Lentz evaluation of the continued fraction for Q
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..1_000_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        let q = (log_pre + h.ln()).exp();
        (1.0 - q, q)
    }
}

/// Standard normal CDF `D`.
pub fn gauss_cdf(r: f64) -> f64 {
    0.5 * erfc(-r * FRAC_1_SQRT_2)
}

fn gauss_pdf(r: f64) -> f64 {
    (-0.5 * r * r - LN_SQRT_2PI).exp()
}

/// Wichura's AS241 rational approximation of the normal quantile.
pub(crate) fn as241(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((r * 2509.080_928_730_122_7 + 33430.575_583_588_128) * r
                + 67265.770_927_008_700_853)
                * r
                + 45921.953_931_549_871_457)
                * r
                + 13731.693_765_509_461_125)
                * r
                + 1971.590_950_306_551_442_7)
                * r
                + 133.141_667_891_784_377_37)
                * r
                + 3.387_132_872_796_366_608)
            / (((((((r * 5226.495_278_852_545_925 + 28729.085_735_721_942_674) * r
                + 39307.895_800_092_710_61)
                * r
                + 21213.794_301_586_595_867)
                * r
                + 5394.196_021_424_751_077_1)
                * r
                + 687.187_007_492_057_908_95)
                * r
                + 42.313_330_701_600_911_252)
                * r
                + 1.0);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        (((((((r * 7.745_450_142_783_414_076_4e-4 + 0.022_723_844_989_269_184_583) * r
            + 0.241_780_725_177_450_611_77)
            * r
            + 1.270_458_252_452_368_382_58)
            * r
            + 3.647_848_324_763_204_605_04)
            * r
            + 5.769_497_221_460_691_405_5)
            * r
            + 4.630_337_846_156_545_295_9)
            * r
            + 1.423_437_110_749_683_577_34)
            / (((((((r * 1.050_750_071_644_416_843_24e-9 + 5.475_938_084_995_344_946e-4)
                * r
                + 0.015_198_666_563_616_457_2)
                * r
                + 0.148_103_976_427_480_074_59)
                * r
                + 0.689_767_334_985_100_004_55)
                * r
                + 1.676_384_830_183_803_849_4)
                * r
                + 2.053_191_626_637_758_821_87)
                * r
                + 1.0)
    } else {
        r -= 5.0;
        (((((((r * 2.010_334_399_292_288_132_65e-7 + 2.711_555_568_743_487_578_87e-5) * r
            + 0.001_242_660_947_388_078_438_6)
            * r
            + 0.026_532_189_526_576_123_093)
            * r
            + 0.296_560_571_828_504_891_23)
            * r
            + 1.784_826_539_917_291_335_8)
            * r
            + 5.463_784_911_164_114_369_9)
            * r
            + 6.657_904_643_501_103_777_2)
            / (((((((r * 2.044_263_103_389_939_785_64e-15 + 1.421_511_758_316_445_887_8e-7)
                * r
                + 1.846_318_317_510_054_681_8e-5)
                * r
                + 7.868_691_311_456_132_591e-4)
                * r
                + 0.014_875_361_290_850_614_852)
                * r
                + 0.136_929_880_922_735_805_31)
                * r
                + 0.599_832_206_555_887_937_69)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Standard normal quantile `D^{-1}`: rational initial guess polished by
/// safeguarded Newton steps inside a shrinking bracket.
pub fn gauss_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::OutOfRange {
            name: "p",
            value: p,
            range: "(0, 1)",
        });
    }
    let mut x = as241(p);
    if p.min(1.0 - p) < 1e-250 {
        // the CDF itself underflows nearby; the rational form is already exact
        return Ok(x);
    }
    let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
    for _ in 0..100 {
        let f = gauss_cdf(x) - p;
        if f.abs() <= 1e-15 * p.min(1.0 - p).max(1e-300) {
            break;
        }
        if f > 0.0 {
            hi = hi.min(x);
        } else {
            lo = lo.max(x);
        }
        let mut next = x - f / gauss_pdf(x);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if next == x {
            break;
        }
        x = next;
    }
    Ok(x)
}

/// `ln g_m(sqrt(m - 1))`.
fn ln_peak_density(m: u64) -> f64 {
    if m == 1 {
        return 0.5 * (2.0 / PI).ln();
    }
    let mf = m as f64;
    -rho(0.5 * mf) - 0.5 * PI.ln() + 0.5 + 0.5 * (mf - 1.0) * (-1.0 / mf).ln_1p()
}

pub fn radial_mode(m: u64) -> f64 {
    ((m.max(1) - 1) as f64).sqrt()
}

/// Peak value `g_m(sqrt(m - 1))`.
pub fn peak_density(m: u64) -> f64 {
    ln_peak_density(m).exp()
}

/// `ln g_m(r)`, stable for very large `m`.
pub fn ln_radial_density(m: u64, r: f64) -> f64 {
    assert!(m >= 1, "radial density needs m >= 1");
    if m == 1 {
        return ln_peak_density(1) - 0.5 * r * r;
    }
    if r <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let k = (m - 1) as f64;
    let u = r / k.sqrt();
    // k (ln u - (u^2 - 1) / 2), written to keep precision near u = 1
    let d = u - 1.0;
    let shape = k * (d.ln_1p() - d - 0.5 * d * d);
    ln_peak_density(m) + shape
}

/// Radial density `g_m(r) = vol(S^{m-1}) (2 pi)^{-m/2} r^{m-1} e^{-r^2/2}`.
pub fn radial_density(m: u64, r: f64) -> f64 {
    if r < 0.0 {
        return 0.0;
    }
    ln_radial_density(m, r).exp()
}

/// Radial law of `gamma^m` as a reusable object.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RadialLaw {
    pub dim: u64,
    /// `ln(2^{(2-m)/2} / Gamma(m/2))`.
    pub ln_norm: f64,
}

impl RadialLaw {
    pub fn new(dim: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::UnsupportedDim(0));
        }
        let half = 0.5 * dim as f64;
        Ok(RadialLaw {
            dim,
            ln_norm: (1.0 - half) * LN_2 - ln_gamma(half),
        })
    }

    pub fn density(&self, r: f64) -> f64 {
        radial_density(self.dim, r)
    }

    pub fn cdf(&self, r: f64) -> f64 {
        chi_cdf(self.dim, r)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        chi_quantile(self.dim, p)
    }

    pub fn mode(&self) -> f64 {
        radial_mode(self.dim)
    }
}

/// `gamma^m(B(r))`, the chi CDF.
pub fn chi_cdf(m: u64, r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    reg_gamma(0.5 * m as f64, 0.5 * r * r).0
}

fn chi_sf(m: u64, r: f64) -> f64 {
    if r <= 0.0 {
        return 1.0;
    }
    reg_gamma(0.5 * m as f64, 0.5 * r * r).1
}

/// Chi quantile by bracketed Newton on the CDF.
pub fn chi_quantile(m: u64, p: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p) || m == 0 {
        return Err(Error::OutOfRange {
            name: "p",
            value: p,
            range: "[0, 1)",
        });
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0_f64;
    let mut hi = radial_mode(m) + TRUNCATION;
    let mut x = (radial_mode(m) + gauss_quantile(p)?).clamp(lo + 1e-3, hi - 1e-3);
    for _ in 0..200 {
        let f = if p < 0.5 {
            chi_cdf(m, x) - p
        } else {
            (1.0 - p) - chi_sf(m, x)
        };
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let g = radial_density(m, x);
        let mut next = if g > 0.0 { x - f / g } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.max(1.0) || hi - lo <= 1e-15 * hi {
            x = next;
            break;
        }
        x = next;
    }
    Ok(x)
}

/// Adaptive Gauss–Kronrod (7, 15) quadrature to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let mut stack = vec![(a, b, tol)];
    let mut total = 0.0;
    let mut splits = 0usize;
    while let Some((lo, hi, eps)) = stack.pop() {
        let (k, g) = gk15(&f, lo, hi);
        if (k - g).abs() <= eps || splits > 20_000 || (hi - lo).abs() < 1e-12 {
            total += k;
        } else {
            splits += 1;
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, 0.5 * eps));
            stack.push((mid, hi, 0.5 * eps));
        }
    }
    total
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    const XK: [f64; 8] = [
        0.991_455_371_120_812_6,
        0.949_107_912_342_758_5,
        0.864_864_423_359_769_1,
        0.741_531_185_599_394_4,
        0.586_087_235_467_691_1,
        0.405_845_151_377_397_2,
        0.207_784_955_007_898_5,
        0.0,
    ];
    const WK: [f64; 8] = [
        0.022_935_322_010_529_22,
        0.063_092_092_629_978_55,
        0.104_790_010_322_250_2,
        0.140_653_259_715_525_9,
        0.169_004_726_639_267_9,
        0.190_350_578_064_785_4,
        0.204_432_940_075_298_9,
        0.209_482_141_084_728_0,
    ];
    const WG: [f64; 4] = [
        0.129_484_966_168_869_7,
        0.279_705_391_489_276_7,
        0.381_830_050_505_118_9,
        0.417_959_183_673_469_4,
    ];
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XK[i];
        let s = f(c - dx) + f(c + dx);
        k += WK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, g * h)
}

/// Integral of `g_m` over `[lo, hi]`, split at the mode and truncated where
/// the density is negligible.
pub fn radial_integral(m: u64, lo: f64, hi: f64) -> f64 {
    let mode = radial_mode(m);
    let lo = lo.max(0.0).max(mode - TRUNCATION);
    let hi = hi.min(mode + TRUNCATION);
    if hi <= lo {
        return 0.0;
    }
    let f = |r: f64| radial_density(m, r);
    const TOL: f64 = 1e-13;
    if lo < mode && mode < hi {
        integrate(f, lo, mode, TOL) + integrate(f, mode, hi, TOL)
    } else {
        integrate(f, lo, hi, TOL)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AnnulusMass {
    pub mass: f64,
    /// `g_m(sqrt(m-1)) * 2 eps sqrt(m-1)`, written with the Stirling factor.
    pub density_bound: f64,
    pub lower_tail: f64,
    pub upper_tail: f64,
}

pub fn annulus_radii(m: u64, eps: f64) -> (f64, f64) {
    let s = radial_mode(m);
    (((1.0 - eps) * s).max(0.0), (1.0 + eps) * s)
}

/// `gamma^m(A^m_eps)` by quadrature, together with both tails and the
/// analytic upper bound.
pub fn annulus_mass(m: u64, eps: f64) -> Result<AnnulusMass> {
    if m < 2 {
        return Err(Error::UnsupportedDim(m as usize));
    }
    if !(eps >= 0.0) {
        return Err(Error::OutOfRange {
            name: "epsilon",
            value: eps,
            range: "[0, inf)",
        });
    }
    let (lo, hi) = annulus_radii(m, eps);
    let mass = if eps == 0.0 {
        0.0
    } else {
        radial_integral(m, lo, hi)
    };
    Ok(AnnulusMass {
        mass,
        density_bound: peak_density(m) * 2.0 * eps * radial_mode(m),
        lower_tail: radial_integral(m, 0.0, lo),
        upper_tail: radial_integral(m, hi, f64::INFINITY),
    })
}

/// `gamma^m(A^m_eps)` from the incomplete gamma function.
pub fn annulus_mass_closed(m: u64, eps: f64) -> f64 {
    let (lo, hi) = annulus_radii(m, eps);
    let upper_out = chi_sf(m, hi);
    let lower_in = chi_cdf(m, lo);
    (1.0 - upper_out - lower_in).max(0.0)
}

/// `gamma^{dim}(B(T))` for `dim` in `{1, 2, 4}`.
pub fn ball_mass(dim: usize, t: f64) -> Result<f64> {
    if !matches!(dim, 1 | 2 | 4) {
        return Err(Error::UnsupportedDim(dim));
    }
    if !(t >= 0.0) {
        return Err(Error::OutOfRange {
            name: "T",
            value: t,
            range: "[0, inf)",
        });
    }
    Ok(chi_cdf(dim as u64, t))
}

/// `G(t) = e^{-t^2/2} - int_t^inf e^{-s^2/2} ds`.
pub fn big_g(t: f64) -> f64 {
    (-0.5 * t * t).exp() - (PI / 2.0).sqrt() * erfc(t * FRAC_1_SQRT_2)
}

/// The unique zero of `G` in `(0, 1)`, by bisection to `1e-10`.
pub fn g_root() -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if big_g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Exact partial diameter `diam(g_m dr; 1 - kappa)`: the shortest interval
/// of radial mass `1 - kappa`, found by golden-section search over the
/// lower CDF level.
pub fn radial_partial_diameter(m: u64, kappa: f64) -> Result<f64> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::OutOfRange {
            name: "kappa",
            value: kappa,
            range: "(0, 1)",
        });
    }
    let width = |u: f64| -> f64 {
        let a = chi_quantile(m, u).unwrap_or(0.0);
        let b = chi_quantile(m, (u + 1.0 - kappa).min(1.0 - 1e-16)).unwrap_or(f64::INFINITY);
        b - a
    };
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, kappa);
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    let (mut fc, mut fd) = (width(c), width(d));
    while b - a > 1e-12 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = width(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = width(d);
        }
    }
    Ok(width(0.0).min(width(kappa)).min(width(0.5 * (a + b))))
}

/// Lower constant `e^{1/2} (1 - kappa)` for the observable diameter.
pub fn obs_diam_lower_constant(kappa: f64) -> f64 {
    0.5f64.exp() * (1.0 - kappa)
}
