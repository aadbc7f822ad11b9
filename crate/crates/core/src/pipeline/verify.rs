//! The release gate: every module's invariants, each with a measured value
//! and the tolerance it was held to.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::ledger::csv_err;
use super::runner::run_scdgsc;
use crate::channel::{self, FadingParams, GainSampler, LinkBudget};
use crate::diffusion::toy::ToyExperiment;
use crate::diffusion::{
    cfg_combine, forward_marginal, forward_step, loss_with_draws, posterior_mean_from_x0,
    posterior_params, Denoiser, NoiseDraw, TrainConfig, VarianceSchedule,
};
use crate::error::{Error, Result};
use crate::quadrature::integrate_half_line;
use crate::sampling::{change_degree, SemanticMap};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    /// Passes when `measured <= tolerance`.
    fn at_most(name: &str, measured: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            measured,
            tolerance,
            pass: measured <= tolerance,
            detail: detail.into(),
        }
    }

    /// Passes when `measured < tolerance`.
    fn below(name: &str, measured: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self {
            pass: measured < tolerance,
            ..Self::at_most(name, measured, tolerance, detail)
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {} measured={:e} tolerance={:e} {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.tolerance,
            self.detail
        )
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Replaces the configured diffusion schedule, e.g. with a corrupted one.
    pub schedule_override: Option<VarianceSchedule>,
    /// Only checks whose name contains this substring are run.
    pub filter: Option<String>,
    /// Guided samples per condition for the toy generation check.
    pub toy_samples_per_condition: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            schedule_override: None,
            filter: None,
            toy_samples_per_condition: 10_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for c in &self.checks {
            w.serialize(c).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| Error::Contract(e.to_string()))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?).map_err(|e| Error::io(path, e))
    }
}

type Group = fn(&ExperimentConfig, &VerifyOptions, &VarianceSchedule) -> Result<Vec<Check>>;

const GROUPS: &[(&[&str], Group)] = &[
    (&["channel.moments_vs_quadrature", "channel.power_closed_form"], channel_closed_forms),
    (&["channel.mc_mean_gain", "channel.mc_average_power"], channel_monte_carlo),
    (&["sampling.change_degree_laws", "sampling.change_degree_endpoints"], change_degree_laws),
    (&["pipeline.energy_ratios", "pipeline.mask_vs_worst_frame"], energy_ratios),
    (&["pipeline.threshold_monotonicity"], threshold_monotonicity),
    (
        &[
            "diffusion.schedule_consistency",
            "diffusion.posterior_identity",
            "diffusion.forward_composition",
            "diffusion.cfg_identities",
        ],
        diffusion_math,
    ),
    (&["diffusion.gradient_check"], gradient_check),
    (&["diffusion.toy_loss_reduction", "diffusion.toy_conditional_means"], toy_generation),
];

/// Runs the suite. Check failures are reported, not returned as errors.
pub fn verify(cfg: &ExperimentConfig, opts: &VerifyOptions) -> Result<VerifyReport> {
    let sched = match &opts.schedule_override {
        Some(s) => s.clone(),
        None => cfg.schedule()?,
    };
    let wanted = |name: &str| opts.filter.as_deref().is_none_or(|f| name.contains(f));
    let mut checks = Vec::new();
    for (names, group) in GROUPS {
        if names.iter().any(|n| wanted(n)) {
            checks.extend(group(cfg, opts, &sched)?.into_iter().filter(|c| wanted(&c.name)));
        }
    }
    Ok(VerifyReport { checks })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn channel_closed_forms(_: &ExperimentConfig, _: &VerifyOptions, _: &VarianceSchedule) -> Result<Vec<Check>> {
    let shapes = [1.5, 2.0, 6.0, 20.0];
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    let mut cases = 0;
    for &m in &shapes {
        for &m_s in &shapes {
            let p = FadingParams::new(m, m_s, 1.0)?;
            for n in [-1.0, 1.0, 2.0] {
                let Ok(closed) = channel::moment(n, &p) else { continue };
                let q = integrate_half_line(
                    |g| g.powf(n) * channel::pdf(g, &p).unwrap_or(0.0),
                    1.0,
                    1e-10,
                );
                let e = rel(q.value, closed);
                cases += 1;
                if e > worst {
                    worst = e;
                    worst_at = format!("m={m} m_s={m_s} n={n}");
                }
            }
        }
    }
    let lb = LinkBudget::from_db(1e6, 15.0, -90.0, 100.0)?;
    let mut worst_power = 0.0f64;
    for &m in &shapes {
        for &m_s in &shapes {
            let p = FadingParams::new(m, m_s, lb.avg_gain())?;
            let via_moment = lb.target_rx_power() * channel::moment(-1.0, &p)?;
            worst_power = worst_power.max(rel(channel::average_power_closed_form(&p, &lb), via_moment));
        }
    }
    Ok(vec![
        Check::at_most(
            "channel.moments_vs_quadrature",
            worst,
            1e-5,
            format!("{cases} cases; worst at {worst_at}"),
        ),
        Check::at_most("channel.power_closed_form", worst_power, 1e-12, "16 shape pairs"),
    ])
}

fn channel_monte_carlo(cfg: &ExperimentConfig, _: &VerifyOptions, _: &VarianceSchedule) -> Result<Vec<Check>> {
    const SAMPLES: usize = 1_000_000;
    let link = cfg.link()?;
    let p = FadingParams::new(6.0, 6.0, link.budget.avg_gain())?;
    let sampler = GainSampler::new(&p);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6d63);
    let (mut s, mut s_inv) = (0.0, 0.0);
    for _ in 0..SAMPLES {
        let g: f64 = rng.sample(&sampler);
        s += g;
        s_inv += 1.0 / g;
    }
    let mean = s / SAMPLES as f64;
    let inv = s_inv / SAMPLES as f64;
    let analytic = channel::average_power(&p, &link.budget)?;
    let mc = link.budget.target_rx_power() * inv;
    Ok(vec![
        Check::below(
            "channel.mc_mean_gain",
            rel(mean, p.avg_gain()),
            0.01,
            format!("mean={mean:e} avg_gain={:e}", p.avg_gain()),
        ),
        Check::below(
            "channel.mc_average_power",
            rel(mc, analytic),
            0.02,
            format!("analytic_w={analytic:e} monte_carlo_w={mc:e} (m=m_s=6, {SAMPLES} draws)"),
        ),
    ])
}

fn random_map<R: Rng>(rng: &mut R, w: usize, h: usize) -> SemanticMap {
    let density: f64 = rng.random();
    let cells = (0..w * h).map(|_| rng.random::<f64>() < density).collect();
    SemanticMap::new(w, h, 0, cells).expect("shape matches")
}

fn change_degree_laws(cfg: &ExperimentConfig, _: &VerifyOptions, _: &VarianceSchedule) -> Result<Vec<Check>> {
    const PAIRS: usize = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6364);
    let mut violations = 0usize;
    for _ in 0..PAIRS {
        let w = rng.random_range(1..=12);
        let h = rng.random_range(1..=12);
        let a = random_map(&mut rng, w, h);
        let b = random_map(&mut rng, w, h);
        let ab = change_degree(&a, &b)?;
        let ba = change_degree(&b, &a)?;
        let aa = change_degree(&a, &a)?;
        let na = a.count() as u64;
        let nb = b.count() as u64;
        let both = a.cells().iter().zip(b.cells()).filter(|(x, y)| **x && **y).count() as u64;
        let expect = if na + nb == 0 { 0.0 } else { (na + nb - 2 * both) as f64 / (na + nb) as f64 };
        let ok = (0.0..=1.0).contains(&ab) && ab == ba && aa == 0.0 && ab == expect;
        let disjoint_ok = both > 0 || na + nb == 0 || ab == 1.0;
        violations += (!ok || !disjoint_ok) as usize;
    }
    let full = SemanticMap::from_fn(8, 8, 0, |x, _| x < 4)?;
    let other = SemanticMap::from_fn(8, 8, 0, |x, _| x >= 4)?;
    let endpoints = [change_degree(&full, &full)? == 0.0, change_degree(&full, &other)? == 1.0];
    Ok(vec![
        Check::at_most(
            "sampling.change_degree_laws",
            violations as f64,
            0.0,
            format!("{PAIRS} random pairs: range, symmetry, self-zero, disjoint-one, 1-Dice"),
        ),
        Check::at_most(
            "sampling.change_degree_endpoints",
            endpoints.iter().filter(|ok| !**ok).count() as f64,
            0.0,
            "identical maps give 0, separated maps give 1",
        ),
    ])
}

fn energy_ratios(cfg: &ExperimentConfig, _: &VerifyOptions, _: &VarianceSchedule) -> Result<Vec<Check>> {
    let link = cfg.link()?;
    let sizes = [93_000u64, 96_000, 82_000, 128_000, 5_000];
    let energies: Vec<f64> = sizes.iter().map(|&b| link.energy_for_bytes(b)).collect();
    let mut worst = 0.0f64;
    for i in 0..sizes.len() {
        for j in 0..sizes.len() {
            worst = worst.max(rel(energies[i] / energies[j], sizes[i] as f64 / sizes[j] as f64));
        }
    }
    let mask_share = energies[4] / energies[2];
    Ok(vec![
        Check::at_most(
            "pipeline.energy_ratios",
            worst,
            1e-12,
            format!("payloads 93/96/82/128/5 kB; clear frame = {:e} J", energies[0]),
        ),
        Check::below(
            "pipeline.mask_vs_worst_frame",
            mask_share,
            0.061,
            "semantic map energy over the smallest full-frame energy",
        ),
    ])
}

fn threshold_monotonicity(cfg: &ExperimentConfig, _: &VerifyOptions, _: &VarianceSchedule) -> Result<Vec<Check>> {
    let runs = cfg
        .sweep
        .voi_thresholds
        .iter()
        .map(|&t| {
            let mut c = cfg.clone();
            c.diffusion.generation_samples = 0;
            run_scdgsc(&c, t)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut violations = 0;
    let mut strict = false;
    for w in runs.windows(2) {
        violations += (w[1].total_energy_j() > w[0].total_energy_j()) as usize;
        violations += (w[1].transmit_count() > w[0].transmit_count()) as usize;
        strict |= w[1].total_energy_j() < w[0].total_energy_j();
    }
    let counts: Vec<String> = runs.iter().map(|r| r.transmit_count().to_string()).collect();
    Ok(vec![Check::at_most(
        "pipeline.threshold_monotonicity",
        (violations + (!strict) as usize) as f64,
        0.0,
        format!("transmits per threshold: {}", counts.join("/")),
    )])
}

fn diffusion_math(cfg: &ExperimentConfig, _: &VerifyOptions, sched: &VarianceSchedule) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6466);
    let n_steps = sched.steps();

    let mut worst_post = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=n_steps);
        let dim = rng.random_range(1..=4);
        let x0: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal) * 2.0).collect();
        let eps: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let x_n = forward_marginal(&x0, n, &eps, sched)?;
        let (from_eps, _) = posterior_params(&x_n, &eps, n, sched)?;
        let from_x0 = posterior_mean_from_x0(&x0, &x_n, n, sched)?;
        for (a, b) in from_eps.iter().zip(&from_x0) {
            worst_post = worst_post.max((a - b).abs());
        }
    }

    // Forward composition against the closed-form marginal.
    const TRAJ: usize = 100_000;
    let x0 = [0.8];
    let mut worst_z = 0.0f64;
    let mut probes = vec![1, 10.min(n_steps), n_steps];
    probes.dedup();
    let mut xs: Vec<Vec<f64>> = vec![x0.to_vec(); TRAJ];
    let mut step = 0;
    for &target in &probes {
        while step < target {
            step += 1;
            for x in xs.iter_mut() {
                *x = forward_step(x, step, sched, &mut rng)?;
            }
        }
        let mean = xs.iter().map(|x| x[0]).sum::<f64>() / TRAJ as f64;
        let var = xs.iter().map(|x| (x[0] - mean).powi(2)).sum::<f64>() / (TRAJ - 1) as f64;
        let a = sched.alpha_bar(target);
        let (mu, v) = (a.sqrt() * x0[0], 1.0 - a);
        let z_mean = (mean - mu).abs() / (v / TRAJ as f64).sqrt();
        let z_var = (var - v).abs() / (v * (2.0 / (TRAJ - 1) as f64).sqrt());
        worst_z = worst_z.max(z_mean).max(z_var);
    }

    let mut cfg_violations = 0usize;
    for _ in 0..1000 {
        let c: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
        let u: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
        let k = rng.random_range(0.0..8.0);
        cfg_violations += (cfg_combine(&c, &u, 0.0)? != c) as usize;
        cfg_violations += (cfg_combine(&c, &c, k)? != c) as usize;
    }

    Ok(vec![
        Check::at_most(
            "diffusion.schedule_consistency",
            sched.consistency_error(),
            1e-12,
            format!("{n_steps} steps; stored alpha-bar vs recomputed cumulative product"),
        ),
        Check::at_most(
            "diffusion.posterior_identity",
            worst_post,
            1e-10,
            "1000 random (x0, eps, n): noise form vs x0 form",
        ),
        Check::at_most(
            "diffusion.forward_composition",
            worst_z,
            3.0,
            format!("max |z| of mean and variance at steps {probes:?}, {TRAJ} trajectories"),
        ),
        Check::at_most(
            "diffusion.cfg_identities",
            cfg_violations as f64,
            0.0,
            "k = 0 and equal branches return the conditional prediction",
        ),
    ])
}

fn gradient_check(cfg: &ExperimentConfig, _: &VerifyOptions, sched: &VarianceSchedule) -> Result<Vec<Check>> {
    let toy = ToyExperiment::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6763);
    let batch = toy.task.dataset(4, &mut rng);
    let mut den = Denoiser::new(toy.denoiser.clone(), cfg.seed)?;
    let dim = toy.denoiser.data_dim;
    let draws: Vec<NoiseDraw> = batch.iter().map(|_| NoiseDraw::sample(dim, sched, &mut rng)).collect();
    let (worst, count) = finite_difference_error(&mut den, &batch, &draws, sched)?;
    Ok(vec![Check::below(
        "diffusion.gradient_check",
        worst,
        1e-4,
        format!("default toy net, {count} parameters, 4th-order central differences h=1e-3"),
    )])
}

/// Largest relative gap between analytic and finite-difference gradients.
///
/// Uses the fourth-order central stencil with `h = 1e-3`. The plain
/// two-point stencil at `h = 1e-5` loses about `eps * loss / h ~ 1e-11`
/// to cancellation, which exceeds 1e-4 relative on parameters whose
/// gradient is near 1e-7.
pub fn finite_difference_error(
    den: &mut Denoiser,
    batch: &[crate::diffusion::TrainingItem],
    draws: &[NoiseDraw],
    sched: &VarianceSchedule,
) -> Result<(f64, usize)> {
    const H: f64 = 1e-3;
    const FLOOR: f64 = 1e-8;
    den.zero_grads();
    loss_with_draws(batch, draws, den, sched, true)?;
    let analytic = den.grads().to_vec();
    let mut worst = 0.0f64;
    for (i, &g) in analytic.iter().enumerate() {
        let orig = den.params()[i];
        let mut at = |d: f64| -> Result<f64> {
            den.params_mut()[i] = orig + d;
            loss_with_draws(batch, draws, den, sched, false)
        };
        let fd = (-at(2.0 * H)? + 8.0 * at(H)? - 8.0 * at(-H)? + at(-2.0 * H)?) / (12.0 * H);
        den.params_mut()[i] = orig;
        worst = worst.max((g - fd).abs() / g.abs().max(fd.abs()).max(FLOOR));
    }
    Ok((worst, analytic.len()))
}

fn toy_generation(cfg: &ExperimentConfig, opts: &VerifyOptions, sched: &VarianceSchedule) -> Result<Vec<Check>> {
    let d = &cfg.diffusion;
    let exp = ToyExperiment {
        steps: d.steps,
        beta_min: d.beta_min,
        beta_max: d.beta_max,
        train: TrainConfig {
            epochs: d.epochs,
            batch_size: d.batch_size,
            lr: d.learning_rate,
            null_prob: d.null_prob,
            ..TrainConfig::default()
        },
        ..ToyExperiment::default()
    };
    let mut trained = exp.run()?;
    trained.schedule = sched.clone();
    let first = trained.report.epoch_loss.first().copied().unwrap_or(f64::NAN);
    let last = trained.report.epoch_loss.last().copied().unwrap_or(f64::NAN);
    let ratio = last / first;

    let mut worst = 0.0f64;
    let mut idx = 0u64;
    for &offset in &exp.task.offsets {
        for comp in 0..2 {
            let cond = exp.task.condition(offset, comp);
            let m = trained.sample_mean(&cond, 1.0, opts.toy_samples_per_condition, cfg.seed + idx)?;
            let t = exp.task.target_mean(offset, comp);
            worst = worst.max((m[0] - t[0]).abs()).max((m[1] - t[1]).abs());
            idx += 1;
        }
    }
    Ok(vec![
        Check::at_most(
            "diffusion.toy_loss_reduction",
            ratio,
            0.5,
            format!("last/first epoch loss = {last:e}/{first:e} over {} epochs", d.epochs),
        ),
        Check::below(
            "diffusion.toy_conditional_means",
            worst,
            0.1,
            format!(
                "max abs error of per-condition means, k=1, {} samples x {idx} conditions",
                opts.toy_samples_per_condition
            ),
        ),
    ])
}
