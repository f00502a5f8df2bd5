//! Named experiments. Each returns rendered CSV bodies plus one summary
//! line per `(N, n, field)` group.

use mmconc::bounds::{claim_threshold, lip_from_l, make_schedule, theta, v_bound, Schedule};
use mmconc::concentration::{
    is_member, phi_project, prok_experiment, pushforward_test, ApproxSpaceParams, PushforwardConfig,
};
use mmconc::decomp::{dist_to_scaled_stiefel, hermitian_eig, thin_svd};
use mmconc::gaussian::{gauss_cdf, gauss_quantile, obs_diam_lower_constant, radial_partial_diameter};
use mmconc::sampling::{
    child_seed, gaussian_matrix, haar_at, project_pi, rng_for, sample_haar_stiefel,
    sample_restricted_gaussian, stiefel_radius, SamplerConfig, DEFAULT_ACCEPTANCE_FLOOR,
};
use mmconc::sampling::member_fraction;
use mmconc::stats::{
    ks_critical_one_sample, ks_one_sample, obs_diam_lower, EmpiricalSample, WitnessFamily,
};
use mmconc::{Error, Exec, FMatrix, Field};
use rand::Rng;
use serde::Serialize;

use crate::config::{Experiment, RunConfig};
use crate::error::{CliError, Result};
use crate::output::{input_digest, num, opt_num, Table};

pub const STAT_COLUMNS: [&str; 7] = ["N", "n", "field", "epsilon", "theta", "stat_name", "value"];
pub const OBSDIAM_COLUMNS: [&str; 8] = ["N", "n", "field", "kappa", "witness", "value", "scaled_value", "target"];

/// Random frames compared against the closed-form nearest point, per
/// matrix, in `decomp-props`.
pub const NEAREST_FRAMES: usize = 100;

#[derive(Clone, Debug)]
pub struct Outcome {
    pub experiment: Experiment,
    pub digest: String,
    /// `(file name, body)`.
    pub files: Vec<(String, String)>,
    pub summaries: Vec<String>,
}

/// Seed for one `(field, N, n)` cell, independent of the other cells in
/// the run.
pub fn cell_seed(seed: u64, field: Field, big_n: u64, n: u64) -> u64 {
    child_seed(child_seed(child_seed(seed, field.dim() as u64), big_n), n)
}

struct Stats<'a> {
    table: &'a mut Table,
    big_n: u64,
    n: u64,
    field: Field,
    eps: Option<f64>,
    theta: Option<f64>,
}

impl Stats<'_> {
    fn put(&mut self, name: &str, value: f64) {
        self.table.push(vec![
            self.big_n.to_string(),
            self.n.to_string(),
            self.field.tag().to_string(),
            opt_num(self.eps),
            opt_num(self.theta),
            name.to_string(),
            num(value),
        ]);
    }
}

fn stats<'a>(table: &'a mut Table, big_n: u64, n: u64, field: Field) -> Stats<'a> {
    Stats {
        table,
        big_n,
        n,
        field,
        eps: None,
        theta: None,
    }
}

pub fn run(experiment: Experiment, cfg: &RunConfig, exec: Exec) -> Result<Outcome> {
    let mut cfg = cfg.clone();
    cfg.experiment = Some(experiment);
    cfg.check()?;
    let digest = input_digest(&cfg);
    let mut summaries = Vec::new();
    let mut extra = Vec::new();
    let table = match experiment {
        Experiment::Mbdist => mbdist(&cfg, exec, &mut summaries)?,
        Experiment::Fullmeas => fullmeas(&cfg, exec, &mut summaries)?,
        Experiment::Prok => prok(&cfg, exec, &mut summaries)?,
        Experiment::Lipschitz => lipschitz(&cfg, exec, &mut summaries)?,
        Experiment::Pushforward => pushforward(&cfg, exec, &mut summaries)?,
        Experiment::Obsdiam => obsdiam(&cfg, exec, &mut summaries)?,
        Experiment::Bounds => {
            let (table, json) = bounds(&cfg, &mut summaries)?;
            extra.push(("bounds.json".to_string(), json));
            table
        }
        Experiment::DecompProps => decomp_props(&cfg, exec, &mut summaries)?,
    };
    let mut files = vec![(format!("{}.csv", experiment.name()), table.render(&digest))];
    files.extend(extra);
    Ok(Outcome {
        experiment,
        digest,
        files,
        summaries,
    })
}

fn each_cell(cfg: &RunConfig) -> impl Iterator<Item = (Field, u64, u64)> + '_ {
    cfg.fields
        .iter()
        .flat_map(move |&f| cfg.cells().into_iter().map(move |(big_n, n)| (f, big_n, n)))
}

fn mbdist(cfg: &RunConfig, exec: Exec, summaries: &mut Vec<String>) -> Result<Table> {
    let mut table = Table::new(&STAT_COLUMNS);
    for (field, big_n, n) in each_cell(cfg) {
        let seed = cell_seed(cfg.seed, field, big_n, n);
        let sc = SamplerConfig::new(field, big_n as usize, n as usize, true, seed, cfg.samples)?;
        let blocks: Vec<FMatrix> = sample_haar_stiefel(&sc, exec)?
            .iter()
            .map(|z| project_pi(z, cfg.l))
            .collect::<std::result::Result<_, _>>()?;
        let mut coords = Vec::new();
        for i in 0..cfg.l {
            for j in 0..n as usize {
                for c in 0..field.dim() {
                    coords.push((i, j, c));
                }
            }
        }
        let ks = exec.map_slice(&coords, |&(i, j, c)| {
            let values = blocks.iter().map(|b| b[(i, j)].0[c]).collect();
            ks_one_sample(&EmpiricalSample::new(values), gauss_cdf)
        });
        let critical = ks_critical_one_sample(0.01, cfg.samples);
        let ks_max = ks.iter().copied().fold(0.0, f64::max);
        let mut s = stats(&mut table, big_n, n, field);
        s.put("ks_first", ks[0]);
        s.put("ks_max", ks_max);
        s.put("ks_critical", critical);
        summaries.push(format!(
            "mbdist N={big_n} n={n} field={field} l={}: ks_first={:.5} ks_max={:.5} critical={:.5}",
            cfg.l, ks[0], ks_max, critical
        ));
    }
    Ok(table)
}

fn fullmeas(cfg: &RunConfig, exec: Exec, summaries: &mut Vec<String>) -> Result<Table> {
    let mut table = Table::new(&STAT_COLUMNS);
    for (field, big_n, n) in each_cell(cfg) {
        let sched = make_schedule(big_n, n, cfg.condition())?;
        let vb = v_bound(&sched, field)?;
        let params = ApproxSpaceParams::with_theta(field, big_n as usize, n as usize, sched.epsilon, sched.theta)?;
        let seed = cell_seed(cfg.seed, field, big_n, n);
        let sc = SamplerConfig::new(field, big_n as usize, n as usize, false, seed, cfg.samples)?;
        let mass = member_fraction(&sc, &params, exec)?;
        let stderr = (mass * (1.0 - mass) / cfg.samples as f64).sqrt();
        let mut s = stats(&mut table, big_n, n, field);
        s.eps = Some(sched.epsilon);
        s.theta = Some(sched.theta);
        s.put("product_lower", vb.product_lower);
        s.put("mc_mass", mass);
        s.put("mc_stderr", stderr);
        for (l, v) in vb.v.iter().enumerate() {
            s.put(&format!("v_{l}"), *v);
        }
        s.put("theta_chain", if sched.theta_chain_holds() { 1.0 } else { 0.0 });
        summaries.push(format!(
            "fullmeas N={big_n} n={n} field={field}: eps={:.5} mc_mass={:.4}±{:.4} product_lower={:.4}",
            sched.epsilon, mass, stderr, vb.product_lower
        ));
    }
    Ok(table)
}

fn prok(cfg: &RunConfig, exec: Exec, summaries: &mut Vec<String>) -> Result<Table> {
    let mut table = Table::new(&STAT_COLUMNS);
    for (field, big_n, n) in each_cell(cfg) {
        let seed = cell_seed(cfg.seed, field, big_n, n);
        let rep = prok_experiment(field, big_n as usize, n as usize, cfg.samples, seed, exec)?;
        let mut s = stats(&mut table, big_n, n, field);
        s.put("dp_lower", rep.dp_lower);
        s.put("dp_lower_grid", rep.dp_lower_grid);
        for (p, q) in &rep.distance_quantiles {
            s.put(&format!("quantile_{p}"), *q);
        }
        summaries.push(format!(
            "prok N={big_n} n={n} field={field}: dp_lower={:.5}",
            rep.dp_lower
        ));
    }
    Ok(table)
}

/// Pairs of members: consecutive draws, and each draw with a random nearby
/// member.
fn member_pairs(members: &[FMatrix], params: &ApproxSpaceParams, seed: u64, exec: Exec) -> Vec<(usize, FMatrix)> {
    let nearby = exec.map_indexed(members.len(), |i| {
        let z = &members[i];
        let mut rng = rng_for(seed, i as u64);
        for _ in 0..64 {
            let g = gaussian_matrix(params.field, params.big_n, params.n, &mut rng);
            let step = rng.random_range(0.01..1.0);
            let w = z.add(&g.scale(step / g.norm())).expect("same shape");
            if is_member(&w, params) {
                return Some(w);
            }
        }
        None
    });
    nearby
        .into_iter()
        .enumerate()
        .filter_map(|(i, w)| w.map(|w| (i, w)))
        .collect()
}

fn lipschitz(cfg: &RunConfig, exec: Exec, summaries: &mut Vec<String>) -> Result<Table> {
    let mut table = Table::new(&STAT_COLUMNS);
    let threshold = claim_threshold(&cfg.rule, cfg.condition(), 1_000_000);
    for (field, big_n, n) in each_cell(cfg) {
        let sched = make_schedule(big_n, n, cfg.condition())?;
        let (eps, th) = match cfg.epsilon {
            Some(e) => (e, theta(e)?),
            None => (sched.epsilon, sched.theta),
        };
        let params = ApproxSpaceParams::with_theta(field, big_n as usize, n as usize, eps, th)?;
        let l = params.l_bound()?;
        let lip = lip_from_l(l).ok_or(Error::LipschitzHypothesis { l_bound: l })?;
        let seed = cell_seed(cfg.seed, field, big_n, n);
        let sc = SamplerConfig::new(field, big_n as usize, n as usize, false, seed, cfg.samples)?;
        let rs = sample_restricted_gaussian(&sc, eps, th, DEFAULT_ACCEPTANCE_FLOOR, exec)?;
        let members = rs.samples;
        let near = member_pairs(&members, &params, child_seed(seed, 0x6e656172), exec);
        let phi = exec
            .map_slice(&members, |z| phi_project(z, &params))
            .into_iter()
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let phi_near = exec
            .map_slice(&near, |(_, w)| phi_project(w, &params))
            .into_iter()
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let ratio = |z: &FMatrix, w: &FMatrix, fz: &FMatrix, fw: &FMatrix| {
            let d = z.sub(w).expect("same shape").norm();
            if d == 0.0 {
                None
            } else {
                Some(fz.sub(fw).expect("same shape").norm() / d)
            }
        };
        let m = members.len();
        let mut ratios: Vec<f64> = if m > 1 {
            (0..m)
                .filter_map(|i| {
                    let j = (i + 1) % m;
                    ratio(&members[i], &members[j], &phi[i], &phi[j])
                })
                .collect()
        } else {
            Vec::new()
        };
        ratios.extend(
            near.iter()
                .zip(&phi_near)
                .filter_map(|((i, w), fw)| ratio(&members[*i], w, &phi[*i], fw)),
        );
        let empirical = ratios.iter().copied().fold(0.0, f64::max);
        let claim = sched.claim();
        let mut s = stats(&mut table, big_n, n, field);
        s.eps = Some(eps);
        s.theta = Some(th);
        s.put("l_bound", l);
        s.put("lip_bound", lip);
        s.put("lip_empirical", empirical);
        s.put("pairs", ratios.len() as f64);
        s.put("acceptance_rate", rs.acceptance_rate);
        s.put("theta_chain", if sched.theta_chain_holds() { 1.0 } else { 0.0 });
        s.put("claim_middle", claim.middle);
        s.put("claim_n_sigma", claim.n_sigma as f64);
        s.put("claim_holds", if claim.holds { 1.0 } else { 0.0 });
        summaries.push(format!(
            "lipschitz N={big_n} n={n} field={field}: eps={eps:.5} lip_empirical={empirical:.5} lip_bound={lip:.5} pairs={}",
            ratios.len()
        ));
    }
    if let Some(n0) = threshold {
        let n = cfg.rule.eval(n0).min(n0 - 1);
        let sched = make_schedule(n0, n, cfg.condition())?;
        for &field in &cfg.fields {
            let mut s = stats(&mut table, n0, n, field);
            s.eps = Some(sched.epsilon);
            s.theta = Some(sched.theta);
            s.put("claim_threshold", n0 as f64);
            s.put("theta_chain_at_threshold", if sched.theta_chain_holds() { 1.0 } else { 0.0 });
            s.put("claim_at_threshold", if sched.claim().holds { 1.0 } else { 0.0 });
        }
        summaries.push(format!("lipschitz: claim and theta chain first hold at N0={n0} (n={n})"));
    } else {
        summaries.push("lipschitz: claim does not hold for any N <= 1000000".to_string());
    }
    Ok(table)
}

fn pushforward(cfg: &RunConfig, exec: Exec, summaries: &mut Vec<String>) -> Result<Table> {
    let mut table = Table::new(&STAT_COLUMNS);
    let eps = cfg.epsilon.unwrap_or(0.5);
    let th = theta(eps)?;
    for (field, big_n, n) in each_cell(cfg) {
        let pc = PushforwardConfig {
            field,
            big_n: big_n as usize,
            n: n as usize,
            epsilon: eps,
            theta_val: th,
            sample_size: cfg.samples,
            seed: cell_seed(cfg.seed, field, big_n, n),
        };
        let rep = match pushforward_test(&pc, exec) {
            Err(Error::AcceptanceFloor { rate, floor, proposals }) => {
                let estimate = make_schedule(big_n, n.min(big_n - 1), cfg.condition())
                    .and_then(|s| v_bound(&s, field))
                    .map(|v| format!("{:.6e}", v.product_lower))
                    .unwrap_or_else(|e| format!("unavailable ({e})"));
                return Err(CliError::Infeasible(format!(
                    "pushforward N={big_n} n={n} field={field}: acceptance rate {rate:.3e} below floor {floor:.0e} after {proposals} proposals; v_bound product_lower = {estimate}"
                )));
            }
            other => other?,
        };
        let mut s = stats(&mut table, big_n, n, field);
        s.eps = Some(eps);
        s.theta = Some(th);
        for (name, v) in &rep.ks {
            s.put(&format!("ks_{name}"), *v);
        }
        for (name, v) in &rep.control_ks {
            s.put(&format!("control_ks_{name}"), *v);
        }
        s.put("critical", rep.critical);
        s.put("pass", if rep.pass { 1.0 } else { 0.0 });
        s.put("control_fails", if rep.control_fails { 1.0 } else { 0.0 });
        s.put("acceptance_rate", rep.acceptance_rate);
        let worst = rep.ks.iter().map(|(_, v)| *v).fold(0.0, f64::max);
        summaries.push(format!(
            "pushforward N={big_n} n={n} field={field}: max_ks={worst:.5} critical={:.5} pass={} control_fails={}",
            rep.critical, rep.pass, rep.control_fails
        ));
    }
    Ok(table)
}

fn obsdiam(cfg: &RunConfig, exec: Exec, summaries: &mut Vec<String>) -> Result<Table> {
    let mut table = Table::new(&OBSDIAM_COLUMNS);
    let family = WitnessFamily::coordinate();
    for (field, big_n, n) in each_cell(cfg) {
        let seed = cell_seed(cfg.seed, field, big_n, n);
        let sc = SamplerConfig::new(field, big_n as usize, n as usize, true, seed, cfg.samples)?;
        let zs = sample_haar_stiefel(&sc, exec)?;
        let big_nf = field.real_size(big_n as usize) as f64;
        let scale = big_nf.sqrt() / (big_nf - 1.0).sqrt();
        let mut line = format!("obsdiam N={big_n} n={n} field={field}:");
        for &kappa in &cfg.kappa {
            let rep = obs_diam_lower(&zs, &family, kappa, exec)?;
            let target = 2.0 * gauss_quantile(1.0 - kappa / 2.0)?;
            let mut row = |witness: &str, value: f64, scaled: f64, target: f64| {
                table.push(vec![
                    big_n.to_string(),
                    n.to_string(),
                    field.tag().to_string(),
                    num(kappa),
                    witness.to_string(),
                    num(value),
                    num(scaled),
                    num(target),
                ]);
            };
            for (name, v) in &rep.per_witness {
                row(name, *v, v * scale, target);
            }
            let radial = radial_partial_diameter(field.dim() as u64, kappa)?;
            row("radial_quotient", radial, radial, obs_diam_lower_constant(kappa));
            line.push_str(&format!(
                " kappa={kappa} scaled={:.5} target={target:.5} radial={radial:.5}",
                rep.max * scale
            ));
        }
        summaries.push(line);
    }
    Ok(table)
}

fn schedule_rows(s: &mut Stats<'_>, sched: &Schedule, field: Field, a_prime: f64) -> Result<()> {
    s.put("p", sched.p);
    s.put("a", sched.a);
    s.put("b", sched.b);
    s.put("q", sched.q);
    s.put("sigma", sched.sigma);
    if let Some(l) = sched.l_bound {
        s.put("l_bound", l);
    }
    if let Some(l) = sched.lip_bound {
        s.put("lip_bound", l);
    }
    for (i, (e, t)) in sched.eps_l.iter().zip(&sched.t_l).enumerate() {
        s.put(&format!("eps_l_{}", i + 1), *e);
        s.put(&format!("t_l_{}", i + 1), *t);
    }
    for (i, d) in sched.angle_diagnostic(field).iter().enumerate() {
        s.put(&format!("angle_lower_{}", i + 1), *d);
    }
    s.put("cor_en", if sched.cor_en_holds(field, a_prime) { 1.0 } else { 0.0 });
    s.put("theta_chain", if sched.theta_chain_holds() { 1.0 } else { 0.0 });
    let claim = sched.claim();
    s.put("claim_middle", claim.middle);
    s.put("claim_n_sigma", claim.n_sigma as f64);
    s.put("claim_holds", if claim.holds { 1.0 } else { 0.0 });
    s.put("product_lower", v_bound(sched, field)?.product_lower);
    Ok(())
}

fn bounds(cfg: &RunConfig, summaries: &mut Vec<String>) -> Result<(Table, String)> {
    let mut table = Table::new(&STAT_COLUMNS);
    let schedules: Vec<Schedule> = cfg
        .cells()
        .into_iter()
        .map(|(big_n, n)| make_schedule(big_n, n, cfg.condition()))
        .collect::<std::result::Result<_, _>>()?;
    for &field in &cfg.fields {
        for sched in &schedules {
            let mut s = stats(&mut table, sched.big_n, sched.n, field);
            s.eps = Some(sched.epsilon);
            s.theta = Some(sched.theta);
            schedule_rows(&mut s, sched, field, cfg.a_prime)?;
            summaries.push(format!(
                "bounds N={} n={} field={field}: epsilon={:.5} theta={:.5} sigma={:.5}",
                sched.big_n, sched.n, sched.epsilon, sched.theta, sched.sigma
            ));
        }
    }
    let mut json = serde_json::to_string_pretty(&schedules).expect("schedules serialize");
    json.push('\n');
    Ok((table, json))
}

/// Property sweep over random Gaussian matrices of one shape.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DecompCell {
    pub matrices: usize,
    /// `max |Z - QH| / max(1, |Z|)`.
    pub recon: f64,
    /// `max |Q*Q - I|`.
    pub unitary: f64,
    /// `max |lambda_l - sqrt(eig_l(Z*Z))| / max(1, |Z|)`.
    pub sv_mismatch: f64,
    pub li_pairs: usize,
    pub li_violations: usize,
    /// `max | dist(Z, rV) - |Z - rQ| |`.
    pub nearest_gap: f64,
    pub frames: usize,
    pub nearest_violations: usize,
}

struct MatrixProps {
    z: FMatrix,
    q: FMatrix,
    lambda_min: f64,
    recon: f64,
    unitary: f64,
    sv: f64,
    gap: f64,
    violations: usize,
}

pub fn decomp_cell(
    field: Field,
    big_n: usize,
    n: usize,
    count: usize,
    frames: usize,
    seed: u64,
    exec: Exec,
) -> Result<DecompCell> {
    let r = stiefel_radius(field, big_n);
    let props = exec
        .map_indexed(count, |i| -> std::result::Result<MatrixProps, Error> {
            let z = gaussian_matrix(field, big_n, n, &mut rng_for(seed, i as u64));
            let scale = z.norm().max(1.0);
            let svd = thin_svd(&z)?;
            let pf = svd.polar();
            let recon = z.sub(&pf.q.matmul(&pf.h)?)?.norm() / scale;
            let eig = hermitian_eig(&z.adjoint_mul(&z)?)?;
            let sv = svd
                .lambda
                .iter()
                .zip(&eig.values)
                .map(|(l, e)| (l - e.max(0.0).sqrt()).abs())
                .fold(0.0, f64::max)
                / scale;
            let d = dist_to_scaled_stiefel(&z, r)?;
            let gap = (d - z.sub(&pf.q.scale(r))?.norm()).abs();
            let fc = SamplerConfig::new(field, big_n, n, false, child_seed(seed, i as u64), frames.max(1))?;
            let mut violations = 0;
            for k in 0..frames {
                let other = haar_at(&fc, k);
                if z.sub(&other.scale(r))?.norm() < d - 1e-9 {
                    violations += 1;
                }
            }
            Ok(MatrixProps {
                unitary: pf.q.unitary_deviation(),
                lambda_min: svd.smallest(),
                z,
                q: pf.q,
                recon,
                sv,
                gap,
                violations,
            })
        })
        .into_iter()
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut cell = DecompCell {
        matrices: count,
        frames: count * frames,
        ..Default::default()
    };
    for p in &props {
        cell.recon = cell.recon.max(p.recon);
        cell.unitary = cell.unitary.max(p.unitary);
        cell.sv_mismatch = cell.sv_mismatch.max(p.sv);
        cell.nearest_gap = cell.nearest_gap.max(p.gap);
        cell.nearest_violations += p.violations;
    }
    let li = exec.map_indexed(count.saturating_sub(1), |i| {
        let (a, b) = (&props[i], &props[i + 1]);
        let lambda = a.lambda_min.min(b.lambda_min);
        let lhs = a.z.sub(&b.z).expect("same shape").norm();
        let rhs = lambda * a.q.sub(&b.q).expect("same shape").norm();
        let tol = 1e-12 * a.z.norm().max(b.z.norm()).max(1.0);
        lhs + tol < rhs
    });
    cell.li_pairs = li.len();
    cell.li_violations = li.iter().filter(|&&v| v).count();
    Ok(cell)
}

fn decomp_props(cfg: &RunConfig, exec: Exec, summaries: &mut Vec<String>) -> Result<Table> {
    let mut table = Table::new(&STAT_COLUMNS);
    for (field, big_n, n) in each_cell(cfg) {
        let seed = cell_seed(cfg.seed, field, big_n, n);
        let c = decomp_cell(field, big_n as usize, n as usize, cfg.samples, NEAREST_FRAMES, seed, exec)?;
        let mut s = stats(&mut table, big_n, n, field);
        s.put("recon_error", c.recon);
        s.put("unitary_error", c.unitary);
        s.put("sv_mismatch", c.sv_mismatch);
        s.put("li_pairs", c.li_pairs as f64);
        s.put("li_violations", c.li_violations as f64);
        s.put("nearest_gap", c.nearest_gap);
        s.put("nearest_frames", c.frames as f64);
        s.put("nearest_violations", c.nearest_violations as f64);
        summaries.push(format!(
            "decomp-props N={big_n} n={n} field={field}: recon={:.2e} unitary={:.2e} sv={:.2e} li_violations={} nearest_violations={}",
            c.recon, c.unitary, c.sv_mismatch, c.li_violations, c.nearest_violations
        ));
    }
    Ok(table)
}
