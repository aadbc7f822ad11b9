//! F-composite fading link with channel-inversion power control.
//!
//! The instantaneous channel power gain follows the Fisher-Snedecor F
//! composite law with multipath shape `m`, shadowing shape `m_s` and mean
//! `avg_gain`. The transmitter inverts the channel so the received SNR sits
//! exactly at the decoding threshold, which makes the instantaneous transmit
//! power `theta * sigma^2 / g`. Payload energy is average power times airtime
//! at the capacity-achieving rate `W log2(1 + theta)`.

use libm::lgamma;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};

/// Statistics of the F-composite channel gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingParams {
    m: f64,
    m_s: f64,
    avg_gain: f64,
}

impl FadingParams {
    pub fn new(m: f64, m_s: f64, avg_gain: f64) -> Result<Self> {
        if !(m.is_finite() && m > 1.0) {
            return Err(Error::Domain(format!("multipath shape m must exceed 1, got {m}")));
        }
        if !(m_s.is_finite() && m_s > 1.0) {
            return Err(Error::Domain(format!(
                "shadowing shape m_s must exceed 1, got {m_s}"
            )));
        }
        if !(avg_gain.is_finite() && avg_gain > 0.0) {
            return Err(Error::Domain(format!(
                "average gain must be positive, got {avg_gain}"
            )));
        }
        Ok(Self { m, m_s, avg_gain })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn m_s(&self) -> f64 {
        self.m_s
    }

    pub fn avg_gain(&self) -> f64 {
        self.avg_gain
    }

    /// Same shapes, different mean gain.
    pub fn with_avg_gain(&self, avg_gain: f64) -> Result<Self> {
        Self::new(self.m, self.m_s, avg_gain)
    }
}

/// Path loss in dB for the urban macro-cell model `35.3 + 37.6 log10(d)`.
pub fn path_loss_db(distance_m: f64) -> f64 {
    35.3 + 37.6 * distance_m.log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// dBm/Hz to W/Hz.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Radio-link constants. The SNR threshold is held linear.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    bandwidth_hz: f64,
    snr_threshold: f64,
    noise_psd_w_per_hz: f64,
    distance_m: f64,
}

impl LinkBudget {
    pub fn new(
        bandwidth_hz: f64,
        snr_threshold: f64,
        noise_psd_w_per_hz: f64,
        distance_m: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("bandwidth_hz", bandwidth_hz),
            ("snr_threshold", snr_threshold),
            ("noise_psd_w_per_hz", noise_psd_w_per_hz),
            ("distance_m", distance_m),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(name, format!("must be finite and > 0, got {v}")));
            }
        }
        Ok(Self {
            bandwidth_hz,
            snr_threshold,
            noise_psd_w_per_hz,
            distance_m,
        })
    }

    /// Builds a budget from the units used in config files.
    pub fn from_db(
        bandwidth_hz: f64,
        snr_threshold_db: f64,
        noise_psd_dbm_per_hz: f64,
        distance_m: f64,
    ) -> Result<Self> {
        Self::new(
            bandwidth_hz,
            db_to_linear(snr_threshold_db),
            dbm_to_watts(noise_psd_dbm_per_hz),
            distance_m,
        )
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz
    }

    pub fn snr_threshold(&self) -> f64 {
        self.snr_threshold
    }

    pub fn noise_psd(&self) -> f64 {
        self.noise_psd_w_per_hz
    }

    pub fn distance_m(&self) -> f64 {
        self.distance_m
    }

    /// sigma^2 = N0 * W.
    pub fn noise_power(&self) -> f64 {
        self.noise_psd_w_per_hz * self.bandwidth_hz
    }

    /// Mean channel gain implied by path loss at the configured distance.
    pub fn avg_gain(&self) -> f64 {
        db_to_linear(-path_loss_db(self.distance_m))
    }

    /// theta * sigma^2, the received power the controller targets.
    pub fn target_rx_power(&self) -> f64 {
        self.snr_threshold * self.noise_power()
    }
}

fn ln_beta(a: f64, b: f64) -> f64 {
    lgamma(a) + lgamma(b) - lgamma(a + b)
}

/// Density of the F-composite gain at `g`.
pub fn pdf(g: f64, p: &FadingParams) -> Result<f64> {
    if !g.is_finite() || g < 0.0 {
        return Err(Error::Domain(format!("gain must be finite and >= 0, got {g}")));
    }
    if g == 0.0 {
        return Ok(0.0);
    }
    let FadingParams { m, m_s, avg_gain } = *p;
    let scale = (m_s - 1.0) * avg_gain;
    let ln_f = m * m.ln() + m_s * scale.ln() + (m - 1.0) * g.ln()
        - ln_beta(m, m_s)
        - (m + m_s) * (m * g + scale).ln();
    Ok(ln_f.exp())
}

/// `E[g^n]`, finite for `-m < n < m_s`.
pub fn moment(n: f64, p: &FadingParams) -> Result<f64> {
    let FadingParams { m, m_s, avg_gain } = *p;
    if !n.is_finite() {
        return Err(Error::Domain(format!("moment order must be finite, got {n}")));
    }
    if n <= -m {
        return Err(Error::Domain(format!(
            "moment order {n} violates lower bound n > -m = {}",
            -m
        )));
    }
    if n >= m_s {
        return Err(Error::Domain(format!(
            "moment order {n} violates upper bound n < m_s = {m_s}"
        )));
    }
    let ln = n * ((m_s - 1.0) * avg_gain / m).ln() + lgamma(m + n) + lgamma(m_s - n)
        - lgamma(m)
        - lgamma(m_s);
    Ok(ln.exp())
}

/// Mean transmit power under channel inversion, `theta sigma^2 E[1/g]`.
pub fn average_power(p: &FadingParams, lb: &LinkBudget) -> Result<f64> {
    Ok(lb.target_rx_power() * moment(-1.0, p)?)
}

/// The same mean power written out with explicit gamma functions rather
/// than through the general moment.
pub fn average_power_closed_form(p: &FadingParams, lb: &LinkBudget) -> f64 {
    let FadingParams { m, m_s, avg_gain } = *p;
    let ln_gammas = lgamma(m - 1.0) + lgamma(m_s + 1.0) - lgamma(m) - lgamma(m_s);
    lb.target_rx_power() * m * ln_gammas.exp() / ((m_s - 1.0) * avg_gain)
}

/// Capacity-achieving rate in bit/s.
pub fn rate(lb: &LinkBudget) -> f64 {
    lb.bandwidth_hz * (1.0 + lb.snr_threshold).log2()
}

/// Draws one gain as a scaled ratio of unit-scale gamma variates.
pub fn sample_gain<R: Rng + ?Sized>(p: &FadingParams, rng: &mut R) -> f64 {
    GainSampler::new(p).sample(rng)
}

/// Reusable sampler; avoids rebuilding the gamma distributions per draw.
#[derive(Debug, Clone)]
pub struct GainSampler {
    multipath: Gamma<f64>,
    shadowing: Gamma<f64>,
    scale: f64,
}

impl GainSampler {
    pub fn new(p: &FadingParams) -> Self {
        Self {
            multipath: Gamma::new(p.m, 1.0).expect("m > 1 checked at construction"),
            shadowing: Gamma::new(p.m_s, 1.0).expect("m_s > 1 checked at construction"),
            scale: (p.m_s - 1.0) * p.avg_gain / p.m,
        }
    }
}

impl Distribution<f64> for GainSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let x = self.multipath.sample(rng);
        let y = self.shadowing.sample(rng);
        self.scale * x / y
    }
}

/// Transmit power that holds the received SNR at threshold for gain `g`.
pub fn instantaneous_power(g: f64, lb: &LinkBudget) -> Result<f64> {
    if !(g.is_finite() && g > 0.0) {
        return Err(Error::Domain(format!("gain must be positive, got {g}")));
    }
    Ok(lb.target_rx_power() / g)
}

/// Energy to deliver `payload_bits` at mean power and the link rate.
pub fn transmission_energy(payload_bits: u64, p: &FadingParams, lb: &LinkBudget) -> Result<f64> {
    Ok(energy_per_bit(p, lb)? * payload_bits as f64)
}

/// Joules per delivered bit.
pub fn energy_per_bit(p: &FadingParams, lb: &LinkBudget) -> Result<f64> {
    Ok(average_power(p, lb)? / rate(lb))
}

/// A fading law paired with a budget, with the per-bit energy cached.
#[derive(Debug, Clone, Copy)]
pub struct Link {
    pub fading: FadingParams,
    pub budget: LinkBudget,
    joules_per_bit: f64,
}

impl Link {
    /// Fading shapes plus a budget; the mean gain comes from path loss.
    pub fn from_budget(m: f64, m_s: f64, budget: LinkBudget) -> Result<Self> {
        let fading = FadingParams::new(m, m_s, budget.avg_gain())?;
        Self::new(fading, budget)
    }

    pub fn new(fading: FadingParams, budget: LinkBudget) -> Result<Self> {
        let joules_per_bit = energy_per_bit(&fading, &budget)?;
        Ok(Self {
            fading,
            budget,
            joules_per_bit,
        })
    }

    pub fn joules_per_bit(&self) -> f64 {
        self.joules_per_bit
    }

    pub fn average_power(&self) -> f64 {
        self.joules_per_bit * rate(&self.budget)
    }

    pub fn energy_for_bytes(&self, bytes: u64) -> f64 {
        self.joules_per_bit * (bytes * 8) as f64
    }
}
