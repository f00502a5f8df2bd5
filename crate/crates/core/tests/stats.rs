use mmconc::algebra::{FMatrix, Field};
use mmconc::gaussian::gauss_quantile;
use mmconc::sampling::{haar_at, project_pi, rng_for, sample_gaussian, sample_haar_stiefel, SamplerConfig};
use mmconc::stats::{
    ky_fan, ks_two_sample, obs_diam_lower, partial_diameter, prohorov_1d, tv_binned, Binning, EmpiricalSample,
    Witness, WitnessFamily,
};
use mmconc::Exec;
use rand::Rng;

fn sample(v: &[f64]) -> EmpiricalSample {
    EmpiricalSample::new(v.to_vec())
}

/// Prohorov distance between two empirical laws by enumerating every subset
/// of the second law's support. Between consecutive pairwise distances the
/// open-ball masses are constant, so the infimum is one of finitely many
/// values.
fn prohorov_brute(mu: &[f64], nu: &[f64]) -> f64 {
    let one_side = |a: &[f64], b: &[f64]| {
        let mut support: Vec<f64> = b.to_vec();
        support.sort_by(f64::total_cmp);
        support.dedup();
        let mass = |pts: &[f64], pred: &dyn Fn(f64) -> bool| {
            pts.iter().filter(|&&x| pred(x)).count() as f64 / pts.len() as f64
        };
        let mut cuts: Vec<f64> = vec![0.0];
        for &x in a {
            for &y in &support {
                cuts.push((x - y).abs());
            }
        }
        cuts.push(2.0);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut best: f64 = 1.0;
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            // on (lo, hi] a point is within eps of y iff its distance is <= lo
            let mut need: f64 = 0.0;
            for set in 1u32..(1 << support.len()) {
                let chosen: Vec<f64> = (0..support.len())
                    .filter(|k| set & (1 << k) != 0)
                    .map(|k| support[k])
                    .collect();
                let nu_a = mass(b, &|y| chosen.contains(&y));
                let mu_ball = mass(a, &|x| chosen.iter().any(|&y| (x - y).abs() <= lo));
                need = need.max(nu_a - mu_ball);
            }
            let cand = need.max(lo);
            if cand <= hi {
                best = best.min(cand);
            }
        }
        best
    };
    one_side(mu, nu).max(one_side(nu, mu))
}

#[test]
fn prohorov_point_masses() {
    assert_eq!(prohorov_1d(&sample(&[0.0]), &sample(&[0.3])).unwrap(), 0.3);
    assert_eq!(prohorov_1d(&sample(&[0.0]), &sample(&[1.0])).unwrap(), 1.0);
    assert_eq!(prohorov_1d(&sample(&[0.0]), &sample(&[5.0])).unwrap(), 1.0);
    let a = sample(&[0.1, 0.7, 0.7, 2.0]);
    assert_eq!(prohorov_1d(&a, &a).unwrap(), 0.0);
}

#[test]
fn prohorov_matches_brute_force() {
    let mut rng = rng_for(11, 0);
    for case in 0..400 {
        let la = rng.random_range(1..=5);
        let lb = rng.random_range(1..=5);
        let scale = [0.05, 0.25, 1.0][case % 3];
        let mut draw = |len: usize| -> Vec<f64> {
            (0..len)
                .map(|_| (rng.random_range(0..8) as f64) * scale)
                .collect()
        };
        let a = draw(la);
        let b = draw(lb);
        let fast = prohorov_1d(&sample(&a), &sample(&b)).unwrap();
        let slow = prohorov_brute(&a, &b);
        assert!((fast - slow).abs() < 1e-12, "a={a:?} b={b:?} fast={fast} slow={slow}");
        let back = prohorov_1d(&sample(&b), &sample(&a)).unwrap();
        assert_eq!(fast, back);
    }
}

#[test]
fn prohorov_below_total_variation() {
    let mut rng = rng_for(12, 0);
    for _ in 0..100 {
        let shift = rng.random_range(-1.0..1.0);
        let spread = rng.random_range(0.2..2.0);
        let a: Vec<f64> = (0..200).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..150).map(|_| shift + spread * rng.random_range(-1.0..1.0)).collect();
        let bins = Binning::new(-4.0, 4.0, 40).unwrap();
        let (sa, sb) = (sample(&a), sample(&b));
        let dp = prohorov_1d(&sa, &sb).unwrap();
        let tv = tv_binned(&sa, &sb, &bins).unwrap();
        assert!(dp <= tv + bins.width(), "dp={dp} tv={tv}");
    }
}

#[test]
fn total_variation_cases() {
    let bins = Binning::new(0.0, 1.0, 10).unwrap();
    let a = sample(&[0.05, 0.5, 0.95]);
    assert_eq!(tv_binned(&a, &a, &bins).unwrap(), 0.0);
    let b = sample(&[-3.0, 7.0]);
    assert!((tv_binned(&a, &b, &bins).unwrap() - 1.0).abs() < 1e-15);
    assert!(Binning::new(1.0, 1.0, 3).is_err());

    let cfg = SamplerConfig::new(Field::R, 1, 1, false, 13, 100_000).unwrap();
    let x: Vec<f64> = sample_gaussian(&cfg, Exec::Parallel).unwrap().iter().map(|z| z[(0, 0)].re()).collect();
    let y: Vec<f64> = sample_gaussian(&cfg.with_seed(14), Exec::Parallel)
        .unwrap()
        .iter()
        .map(|z| z[(0, 0)].re())
        .collect();
    let bins = Binning::new(-4.0, 4.0, 100).unwrap();
    assert!(tv_binned(&sample(&x), &sample(&y), &bins).unwrap() <= 0.03);
}

#[test]
fn ky_fan_cases() {
    assert_eq!(ky_fan(&[0.0; 10]), 0.0);
    assert_eq!(ky_fan(&[1.0; 10]), 1.0);
    for s in [1usize, 2, 3, 10, 11, 100, 101] {
        let d: Vec<f64> = (1..=s).map(|i| i as f64 / s as f64).collect();
        // smallest eps with #{d > eps} / S <= eps by scanning every candidate
        let mut cands: Vec<f64> = d.clone();
        cands.extend((0..=s).map(|k| k as f64 / s as f64));
        cands.sort_by(f64::total_cmp);
        let want = cands
            .into_iter()
            .find(|&e| d.iter().filter(|&&x| x > e).count() as f64 / s as f64 <= e)
            .unwrap();
        assert_eq!(ky_fan(&d), want, "S={s}");
        assert!((ky_fan(&d) - 0.5).abs() <= 0.5 / s as f64 + 1e-15);
    }
}

#[test]
fn partial_diameter_properties() {
    let mut rng = rng_for(15, 0);
    let v: Vec<f64> = (0..500).map(|_| rng.random::<f64>().powi(3) * 10.0).collect();
    let s = sample(&v);
    let mut prev = f64::INFINITY;
    for k in 0..=20 {
        let kappa = k as f64 / 20.0;
        let pd = partial_diameter(&s, kappa).unwrap();
        assert!(pd <= prev);
        assert!(pd <= s.values()[499] - s.values()[0]);
        prev = pd;
    }
    assert!(partial_diameter(&EmpiricalSample::new(vec![]), 0.5).is_err());
}

#[test]
fn gaussian_partial_diameter() {
    let cfg = SamplerConfig::new(Field::R, 1, 1, false, 16, 100_000).unwrap();
    let x: Vec<f64> = sample_gaussian(&cfg, Exec::Parallel).unwrap().iter().map(|z| z[(0, 0)].re()).collect();
    let pd = partial_diameter(&sample(&x), 0.5).unwrap();
    let target = 2.0 * gauss_quantile(0.75).unwrap();
    assert!((pd - target).abs() <= 0.03, "pd={pd}");
}

#[test]
fn witnesses_are_one_lipschitz() {
    let mut rng = rng_for(17, 0);
    for field in Field::ALL {
        let e = mmconc::sampling::gaussian_matrix(field, 5, 2, &mut rng);
        let c = mmconc::sampling::gaussian_matrix(field, 5, 2, &mut rng);
        let family = WitnessFamily(vec![
            Witness::Coordinate { row: 2, col: 1, component: field.dim() - 1 },
            Witness::functional("e", &e).unwrap(),
            Witness::ColumnNorm(1),
            Witness::DistanceTo { name: "c".into(), center: c },
            Witness::QuotientNorm,
        ]);
        for _ in 0..500 {
            let z = mmconc::sampling::gaussian_matrix(field, 5, 2, &mut rng);
            let w = mmconc::sampling::gaussian_matrix(field, 5, 2, &mut rng).scale(rng.random_range(0.01..1.0));
            let w = z.add(&w).unwrap();
            let d = z.sub(&w).unwrap().norm();
            for f in &family.0 {
                assert!((f.eval(&z) - f.eval(&w)).abs() <= d * (1.0 + 1e-9), "{}", f.name());
            }
        }
    }
    assert!(Witness::functional("zero", &FMatrix::zeros(Field::R, 2, 2)).is_err());
}

#[test]
fn obs_diam_basic_cases() {
    let point = vec![FMatrix::identity(Field::C, 2); 20];
    let family = WitnessFamily(vec![Witness::QuotientNorm, Witness::ColumnNorm(0)]);
    for kappa in [0.1, 0.5, 0.9] {
        let rep = obs_diam_lower(&point, &family, kappa, Exec::Serial).unwrap();
        assert_eq!(rep.max, 0.0);
    }
    let cfg = SamplerConfig::new(Field::R, 30, 1, true, 18, 2000).unwrap();
    let zs = sample_haar_stiefel(&cfg, Exec::Parallel).unwrap();
    let rep = obs_diam_lower(&zs, &WitnessFamily::coordinate(), 0.3, Exec::Parallel).unwrap();
    let vals: Vec<f64> = zs.iter().map(|z| z[(0, 0)].re()).collect();
    let range = vals.iter().cloned().fold(f64::MIN, f64::max) - vals.iter().cloned().fold(f64::MAX, f64::min);
    assert!(rep.max <= range);
    assert_eq!(rep.per_witness[0].0, "coord_0_0_0");
}

#[test]
fn truncation_does_not_increase_witness_diameter() {
    for field in Field::ALL {
        let cfg = SamplerConfig::new(field, 20, 2, true, 19, 4000).unwrap();
        let zs: Vec<FMatrix> = (0..cfg.count).map(|i| haar_at(&cfg, i)).collect();
        let projected: Vec<FMatrix> = zs.iter().map(|z| project_pi(z, 5).unwrap()).collect();
        let mut rng = rng_for(20, 0);
        let small: Vec<FMatrix> = (0..3)
            .map(|_| mmconc::sampling::gaussian_matrix(field, 5, 2, &mut rng))
            .collect();
        // a functional on the image pulled back along the truncation
        let lift = |e: &FMatrix| {
            FMatrix::from_fn(field, 20, 2, |i, j| if i < 5 { e[(i, j)] } else { mmconc::Quat::ZERO })
        };
        let on_image = WitnessFamily(small.iter().map(|e| Witness::functional("e", e).unwrap()).collect());
        let mut pulled: Vec<Witness> = small.iter().map(|e| Witness::functional("e", &lift(e)).unwrap()).collect();
        pulled.push(Witness::QuotientNorm);
        let on_source = WitnessFamily(pulled);
        for kappa in [0.2, 0.5] {
            let img = obs_diam_lower(&projected, &on_image, kappa, Exec::Parallel).unwrap();
            let src = obs_diam_lower(&zs, &on_source, kappa, Exec::Parallel).unwrap();
            for (a, b) in img.per_witness.iter().zip(&src.per_witness) {
                assert!((a.1 - b.1).abs() < 1e-9);
            }
            assert!(img.max <= src.max + 1e-12);
        }
    }
}

#[test]
fn ks_basic() {
    let a = sample(&[1.0, 2.0, 3.0]);
    assert_eq!(ks_two_sample(&a, &a), 0.0);
    assert_eq!(ks_two_sample(&a, &sample(&[10.0, 11.0])), 1.0);
}
