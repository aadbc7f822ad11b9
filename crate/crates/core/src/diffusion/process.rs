//! Forward noising, the Gaussian forward posterior, and guidance.

use rand::Rng;
use rand_distr::StandardNormal;

use super::schedule::VarianceSchedule;
use crate::error::{Error, Result};

fn check_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Contract(format!(
            "vector lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Draws `x_n` directly from `x_0`: `sqrt(abar_n) x0 + sqrt(1 - abar_n) eps`.
pub fn forward_marginal(
    x0: &[f64],
    n: usize,
    eps: &[f64],
    sched: &VarianceSchedule,
) -> Result<Vec<f64>> {
    sched.check_step(n)?;
    check_len(x0, eps)?;
    let a = sched.alpha_bar(n);
    let (sa, sb) = (a.sqrt(), (1.0 - a).sqrt());
    Ok(x0.iter().zip(eps).map(|(x, e)| sa * x + sb * e).collect())
}

/// One noising step from `x_{n-1}`: mean `sqrt(1 - beta_n) x_{n-1}`, variance `beta_n`.
pub fn forward_step<R: Rng + ?Sized>(
    x_prev: &[f64],
    n: usize,
    sched: &VarianceSchedule,
    rng: &mut R,
) -> Result<Vec<f64>> {
    sched.check_step(n)?;
    let b = sched.beta(n);
    let (keep, noise) = ((1.0 - b).sqrt(), b.sqrt());
    Ok(x_prev
        .iter()
        .map(|x| keep * x + noise * rng.sample::<f64, _>(StandardNormal))
        .collect())
}

/// Mean and variance of `q(x_{n-1} | x_n, x_0)` with `x_0` expressed through the noise `eps`.
pub fn posterior_params(
    x_n: &[f64],
    eps: &[f64],
    n: usize,
    sched: &VarianceSchedule,
) -> Result<(Vec<f64>, f64)> {
    sched.check_step(n)?;
    check_len(x_n, eps)?;
    let beta = sched.beta(n);
    let inv_keep = 1.0 / (1.0 - beta).sqrt();
    let eps_coef = beta * inv_keep / (1.0 - sched.alpha_bar(n)).sqrt();
    let mean = x_n
        .iter()
        .zip(eps)
        .map(|(x, e)| inv_keep * x - eps_coef * e)
        .collect();
    Ok((mean, sched.posterior_variance(n)))
}

/// Posterior mean written in terms of `x_0` and `x_n` directly.
pub fn posterior_mean_from_x0(
    x0: &[f64],
    x_n: &[f64],
    n: usize,
    sched: &VarianceSchedule,
) -> Result<Vec<f64>> {
    sched.check_step(n)?;
    check_len(x0, x_n)?;
    let beta = sched.beta(n);
    let (a_prev, a) = (sched.alpha_bar(n - 1), sched.alpha_bar(n));
    let c0 = a_prev.sqrt() * beta / (1.0 - a);
    let cn = (1.0 - beta).sqrt() * (1.0 - a_prev) / (1.0 - a);
    Ok(x0.iter().zip(x_n).map(|(x0, xn)| c0 * x0 + cn * xn).collect())
}

/// Classifier-free guidance: `eps_cond + k (eps_cond - eps_uncond)`.
pub fn cfg_combine(eps_cond: &[f64], eps_uncond: &[f64], k: f64) -> Result<Vec<f64>> {
    check_len(eps_cond, eps_uncond)?;
    if !(k.is_finite() && k >= 0.0) {
        return Err(Error::Contract(format!("guidance scale must be >= 0, got {k}")));
    }
    Ok(eps_cond
        .iter()
        .zip(eps_uncond)
        .map(|(c, u)| c + k * (c - u))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sched() -> VarianceSchedule {
        VarianceSchedule::linear(100, 1e-3, 0.1).unwrap()
    }

    #[test]
    fn noiseless_marginal() {
        let s = sched();
        let x = forward_marginal(&[2.0, -1.0], 10, &[0.0, 0.0], &s).unwrap();
        let a = s.alpha_bar(10).sqrt();
        assert_eq!(x, vec![2.0 * a, -a]);
        assert!(forward_marginal(&[1.0], 0, &[0.0], &s).is_err());
        assert!(forward_marginal(&[1.0], 101, &[0.0], &s).is_err());
    }

    #[test]
    fn pure_noise_limit() {
        let s = VarianceSchedule::linear(1000, 1e-4, 2e-2).unwrap();
        let x = forward_marginal(&[3.0], 1000, &[0.7], &s).unwrap();
        assert!((x[0] - 0.7).abs() < 0.03);
    }

    #[test]
    fn tiny_beta_step_is_identity() {
        let s = VarianceSchedule::from_betas(vec![1e-300]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = forward_step(&[1.5, -2.0], 1, &s, &mut rng).unwrap();
        assert_eq!(x, vec![1.5, -2.0]);
    }

    #[test]
    fn step_is_reproducible() {
        let s = sched();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let mut x = vec![1.0, 2.0, 3.0];
            for n in 1..=100 {
                x = forward_step(&x, n, &s, &mut rng).unwrap();
            }
            x
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn posterior_forms_agree() {
        let s = sched();
        let x0 = [0.3, -1.2];
        let eps = [1.1, 0.4];
        for n in 1..=100 {
            let xn = forward_marginal(&x0, n, &eps, &s).unwrap();
            let (m_eps, _) = posterior_params(&xn, &eps, n, &s).unwrap();
            let m_x0 = posterior_mean_from_x0(&x0, &xn, n, &s).unwrap();
            for (a, b) in m_eps.iter().zip(&m_x0) {
                assert!((a - b).abs() < 1e-10, "n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn last_step_variance_is_zero() {
        let (_, v) = posterior_params(&[0.0], &[0.0], 1, &sched()).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn guidance_identities() {
        let c = [0.5, -1.0, 2.0];
        let u = [0.1, 0.3, -0.2];
        assert_eq!(cfg_combine(&c, &u, 0.0).unwrap(), c.to_vec());
        assert_eq!(cfg_combine(&c, &c, 7.5).unwrap(), c.to_vec());
        assert_eq!(cfg_combine(&[1.0], &[0.0], 4.0).unwrap(), vec![5.0]);
        assert!(cfg_combine(&c, &u, -1.0).is_err());
        assert!(cfg_combine(&c, &u[..2], 1.0).is_err());
    }
}
