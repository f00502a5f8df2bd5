use mmconc::algebra::{FMatrix, Field};
use mmconc::bounds::theta;
use mmconc::concentration::{
    dp_lower_exact, dp_lower_grid, empirical_lipschitz, empirical_lipschitz_with, is_member, membership,
    phi_project, polar_project, prok_experiment, pushforward_test, ApproxSpaceParams, PushforwardConfig,
};
use mmconc::decomp::{dist_to_scaled_stiefel, grassmann_dist, hopf_dist, singular_values};
use mmconc::sampling::{gaussian_at, gaussian_matrix, haar_at, rng_for, stiefel_radius, SamplerConfig};
use mmconc::{Error, Exec, Quat};
use rand::Rng;

fn unitary(field: Field, n: usize, seed: u64) -> FMatrix {
    haar_at(&SamplerConfig::new(field, n, n, false, seed, 1).unwrap(), 0)
}

fn unit_scalar(field: Field, seed: u64) -> Quat {
    let g = gaussian_matrix(field, 1, 1, &mut rng_for(seed, 9))[(0, 0)];
    g.scale(1.0 / g.norm())
}

/// Permutation times unit diagonal: the right actions that preserve column
/// norms and pairwise angles.
fn monomial(field: Field, n: usize, seed: u64) -> FMatrix {
    let mut rng = rng_for(seed, 3);
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    let mut v = FMatrix::zeros(field, n, n);
    for (j, &i) in perm.iter().enumerate() {
        v.set(i, j, unit_scalar(field, seed * 31 + j as u64));
    }
    v
}

fn members(params: &ApproxSpaceParams, seed: u64, count: usize) -> Vec<FMatrix> {
    let cfg = SamplerConfig::new(params.field, params.big_n, params.n, false, seed, 1).unwrap();
    (0..)
        .map(|i| gaussian_at(&cfg, i))
        .filter(|z| is_member(z, params))
        .take(count)
        .collect()
}

#[test]
fn scaled_frames_are_members() {
    for field in Field::ALL {
        let cfg = SamplerConfig::new(field, 8, 3, true, 4, 1).unwrap();
        for i in 0..50 {
            let z = haar_at(&cfg, i);
            for eps in [1e-3, 0.1, 0.5] {
                let p = ApproxSpaceParams::with_theta(field, 8, 3, eps, 1e-3).unwrap();
                assert!(membership(&z, &p).unwrap().member);
            }
        }
    }
}

#[test]
fn membership_group_invariance() {
    for field in Field::ALL {
        let (big_n, n) = (6, 3);
        let p = ApproxSpaceParams::with_theta(field, big_n, n, 0.3, 0.45).unwrap();
        let cfg = SamplerConfig::new(field, big_n, n, false, 30, 1).unwrap();
        let (mut inside, mut outside) = (0, 0);
        for i in 0..1000u64 {
            let z = gaussian_at(&cfg, i as usize);
            let u = unitary(field, big_n, 2 * i + 1);
            let v = monomial(field, n, 2 * i + 2);
            let t = unit_scalar(field, i);
            let m = is_member(&z, &p);
            assert_eq!(m, is_member(&u.matmul(&z).unwrap(), &p));
            assert_eq!(m, is_member(&z.matmul(&v).unwrap(), &p));
            assert_eq!(m, is_member(&z.left_scalar_mul(t), &p));
            if m {
                inside += 1;
            } else {
                outside += 1;
            }
        }
        assert!(inside > 0 && outside > 0);
    }
}

#[test]
fn membership_errors_and_diagnostics() {
    let p = ApproxSpaceParams::new(Field::R, 5, 2, 0.2).unwrap();
    assert!(matches!(
        membership(&FMatrix::zeros(Field::C, 5, 2), &p),
        Err(Error::FieldMismatch { .. })
    ));
    assert!(membership(&FMatrix::zeros(Field::R, 4, 2), &p).is_err());
    let r = stiefel_radius(Field::R, 5);
    let z = FMatrix::from_fn(Field::R, 5, 2, |i, _| if i == 0 { Quat::real(r) } else { Quat::ZERO });
    let m = membership(&z, &p).unwrap();
    assert!(!m.member);
    assert_eq!(m.angle_violations.len(), 1);
    assert!((m.angle_violations[0].2 - 1.0).abs() < 1e-15);
    assert!(ApproxSpaceParams::new(Field::R, 5, 6, 0.2).is_err());
    assert!(ApproxSpaceParams::with_theta(Field::R, 5, 2, 0.2, 1.0).is_err());
}

#[test]
fn phi_is_equivariant() {
    for field in Field::ALL {
        let p = ApproxSpaceParams::new(field, 12, 2, 0.2).unwrap();
        for (k, z) in members(&p, 40, 100).into_iter().enumerate() {
            let k = k as u64;
            let phi = phi_project(&z, &p).unwrap();
            let u = unitary(field, 12, 100 + k);
            let v = unitary(field, 2, 200 + k);
            let t = unit_scalar(field, 300 + k);
            let lhs = phi_project(&u.matmul(&z).unwrap(), &p).unwrap();
            assert!(lhs.sub(&u.matmul(&phi).unwrap()).unwrap().norm() < 1e-8);
            // general V mixes columns and can leave the space; the polar
            // factor itself is equivariant
            let lhs = polar_project(&z.matmul(&v).unwrap()).unwrap();
            assert!(lhs.sub(&phi.matmul(&v).unwrap()).unwrap().norm() < 1e-8);
            let w = monomial(field, 2, 400 + k);
            let lhs = phi_project(&z.matmul(&w).unwrap(), &p).unwrap();
            assert!(lhs.sub(&phi.matmul(&w).unwrap()).unwrap().norm() < 1e-8);
            let lhs = phi_project(&z.left_scalar_mul(t), &p).unwrap();
            assert!(lhs.sub(&phi.left_scalar_mul(t)).unwrap().norm() < 1e-8);
            let r2 = field.real_size(12) as f64 - 1.0;
            let gram = phi.adjoint_mul(&phi).unwrap();
            assert!(gram.sub(&FMatrix::identity(field, 2).scale(r2)).unwrap().norm() < 1e-8 * r2);
        }
    }
}

#[test]
fn phi_hypotheses() {
    let p = ApproxSpaceParams::new(Field::R, 50, 2, 0.6).unwrap();
    let z = members(&p, 1, 1).pop().unwrap();
    assert!(p.l_bound().unwrap() >= 1.0);
    assert!(matches!(phi_project(&z, &p), Err(Error::LipschitzHypothesis { .. })));
    assert!(polar_project(&z).is_ok());
    assert!(polar_project(&FMatrix::zeros(Field::R, 3, 2)).is_err());
}

#[test]
fn smallest_singular_value_bound() {
    for field in Field::ALL {
        let p = ApproxSpaceParams::new(field, 50, 2, 0.1).unwrap();
        let l = p.l_bound().unwrap();
        assert!(l < 1.0);
        let floor = p.radius() * (1.0 - l);
        for z in members(&p, 50, 1000) {
            let s = singular_values(&z).unwrap();
            assert!(s[1] >= floor, "{field} lambda_n={} floor={floor}", s[1]);
        }
    }
}

#[test]
fn lipschitz_estimates() {
    let mut rng = rng_for(2, 2);
    let pairs: Vec<(FMatrix, FMatrix)> = (0..50)
        .map(|_| {
            (
                gaussian_matrix(Field::C, 4, 2, &mut rng),
                gaussian_matrix(Field::C, 4, 2, &mut rng),
            )
        })
        .collect();
    let id = empirical_lipschitz(|z| Ok(z.clone()), &pairs).unwrap();
    assert!((id.max_ratio - 1.0).abs() < 1e-14);
    let double = empirical_lipschitz(|z| Ok(z.scale(2.0)), &pairs).unwrap();
    assert!((double.max_ratio - 2.0).abs() < 1e-14);
    let same = vec![(pairs[0].0.clone(), pairs[0].0.clone())];
    let e = empirical_lipschitz(|z| Ok(z.clone()), &same).unwrap();
    assert_eq!((e.pairs_used, e.skipped), (0, 1));
}

#[test]
fn phi_lipschitz_on_space_and_quotients() {
    for field in Field::ALL {
        let p = ApproxSpaceParams::new(field, 50, 2, 0.1).unwrap();
        let lip = 1.0 / (1.0 - p.l_bound().unwrap());
        let base = members(&p, 60, 400);
        let mut rng = rng_for(61, 0);
        let mut pairs = Vec::new();
        for (i, z) in base.iter().enumerate() {
            pairs.push((z.clone(), base[(i + 1) % base.len()].clone()));
            // nearby member
            loop {
                let g = gaussian_matrix(field, 50, 2, &mut rng);
                let step = rng.random_range(0.01..1.0);
                let w = z.add(&g.scale(step / g.norm())).unwrap();
                if is_member(&w, &p) {
                    pairs.push((z.clone(), w));
                    break;
                }
            }
        }
        let phi = |z: &FMatrix| phi_project(z, &p);
        let flat = empirical_lipschitz(phi, &pairs).unwrap();
        assert!(flat.max_ratio <= lip, "{field} {}", flat.max_ratio);
        let hopf = empirical_lipschitz_with(phi, &pairs, hopf_dist).unwrap();
        assert!(hopf.max_ratio <= lip, "{field} hopf {}", hopf.max_ratio);
        let grass = empirical_lipschitz_with(phi, &pairs, grassmann_dist).unwrap();
        assert!(grass.max_ratio <= lip, "{field} grassmann {}", grass.max_ratio);
    }
}

#[test]
fn pushforward_small_case() {
    let cfg = PushforwardConfig {
        field: Field::R,
        big_n: 20,
        n: 1,
        epsilon: 0.5,
        theta_val: theta(0.5).unwrap(),
        sample_size: 2000,
        seed: 3,
    };
    let rep = pushforward_test(&cfg, Exec::Parallel).unwrap();
    assert!(rep.pass, "{:?}", rep.ks);
    assert!(rep.control_fails);
    assert_eq!(rep.ks.len(), 3);
    let few = PushforwardConfig { sample_size: 999, ..cfg };
    assert!(pushforward_test(&few, Exec::Serial).is_err());
}

#[test]
fn prok_single_column_formula() {
    for field in Field::ALL {
        let (big_n, size, seed) = (30, 5000, 8);
        let rep = prok_experiment(field, big_n, 1, size, seed, Exec::Parallel).unwrap();
        let cfg = SamplerConfig::new(field, big_n, 1, false, seed, size).unwrap();
        let r = stiefel_radius(field, big_n);
        let mut d: Vec<f64> = (0..size)
            .map(|i| {
                let z = gaussian_at(&cfg, i);
                let exact = (z.norm() - r).abs();
                assert!((dist_to_scaled_stiefel(&z, r).unwrap() - exact).abs() < 1e-12);
                exact
            })
            .collect();
        d.sort_by(f64::total_cmp);
        let median = d[((size - 1) as f64 * 0.5).round() as usize];
        let got = rep.distance_quantiles.iter().find(|(p, _)| *p == 0.5).unwrap().1;
        assert!((got - median).abs() < 1e-12);
        assert!((rep.dp_lower - dp_lower_exact(&d)).abs() < 1e-12);
        assert!((rep.dp_lower - rep.dp_lower_grid).abs() < 1e-9);
    }
}

#[test]
fn dp_lower_forms_agree() {
    let mut rng = rng_for(70, 0);
    for _ in 0..200 {
        let s = rng.random_range(1..300);
        let scale = rng.random_range(0.01..3.0);
        let mut d: Vec<f64> = (0..s).map(|_| rng.random::<f64>() * scale).collect();
        d.sort_by(f64::total_cmp);
        let exact = dp_lower_exact(&d);
        let grid = dp_lower_grid(&d);
        assert!((exact - grid).abs() < 1e-9, "exact={exact} grid={grid}");
        // defining property on the exact value
        let below = |e: f64| d.iter().filter(|&&x| x < e).count() as f64 / s as f64;
        assert!(below(exact + 1e-9) >= 1.0 - exact - 1e-9);
        assert!(below(exact - 1e-7) < 1.0 - (exact - 1e-7));
    }
}
