//! Mean transmit power and per-payload energy on the F-composite link.
//!
//! cargo run --example channel_energy

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use scdgsc::channel::{self, FadingParams, GainSampler, Link, LinkBudget};
use rand::Rng;

fn main() -> scdgsc::Result<()> {
    let budget = LinkBudget::from_db(1e6, 15.0, -90.0, 100.0)?;
    println!("path loss at 100 m: {:.1} dB", channel::path_loss_db(100.0));
    println!("noise power: {:e} W, mean gain: {:e}", budget.noise_power(), budget.avg_gain());

    for (m, m_s) in [(1.5, 1.5), (2.0, 6.0), (6.0, 6.0), (20.0, 20.0)] {
        let p = FadingParams::new(m, m_s, budget.avg_gain())?;
        let e_inv = channel::moment(-1.0, &p)? * budget.avg_gain();
        println!(
            "m={m:<4} m_s={m_s:<4} E[1/g]*g_bar={e_inv:.4}  mean power={:.4e} W",
            channel::average_power(&p, &budget)?
        );
    }

    // Monte Carlo against the closed form at m = m_s = 6.
    let p = FadingParams::new(6.0, 6.0, budget.avg_gain())?;
    let sampler = GainSampler::new(&p);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 200_000;
    let mc: f64 = (0..n).map(|_| 1.0 / rng.sample(&sampler)).sum::<f64>() / n as f64;
    println!(
        "E[1/g]: closed form {:.4e}, Monte Carlo {:.4e}",
        channel::moment(-1.0, &p)?,
        mc
    );

    let link = Link::from_budget(6.0, 6.0, budget)?;
    println!("\nrate {:.3} Mbit/s, {:.4e} J/bit", channel::rate(&budget) / 1e6, link.joules_per_bit());
    for (label, bytes) in [("clear", 93_000), ("rain", 96_000), ("snow", 82_000), ("fog", 128_000), ("map", 5_000)] {
        println!("{label:<6} {bytes:>7} B -> {:.4e} J", link.energy_for_bytes(bytes));
    }
    Ok(())
}
