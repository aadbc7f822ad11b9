//! Trains the small conditional denoiser on the 2-D mixture task and
//! compares guided sample means with the known conditional means.
//!
//! cargo run --release --example diffusion_toy

use scdgsc::diffusion::toy::ToyExperiment;

fn main() -> scdgsc::Result<()> {
    let exp = ToyExperiment::default();
    let trained = exp.run()?;
    let loss = &trained.report.epoch_loss;
    println!(
        "{} epochs: loss {:.4} -> {:.4}",
        loss.len(),
        loss[0],
        loss[loss.len() - 1]
    );

    for k in [0.0, 1.0, 4.0] {
        println!("\nguidance k = {k}");
        for (i, &offset) in exp.task.offsets.iter().enumerate().take(3) {
            for comp in 0..2 {
                let cond = exp.task.condition(offset, comp);
                let m = trained.sample_mean(&cond, k, 2000, 100 + i as u64)?;
                let t = exp.task.target_mean(offset, comp);
                println!(
                    "  offset {offset:?} component {comp}: mean ({:+.3}, {:+.3}) target ({:+.3}, {:+.3})",
                    m[0], m[1], t[0], t[1]
                );
            }
        }
    }
    Ok(())
}
