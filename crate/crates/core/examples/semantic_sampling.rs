//! The VoI gate on a hand-made sequence of semantic maps.
//!
//! cargo run --example semantic_sampling

use scdgsc::sampling::{change_degree, Decision, SamplerState, SemanticMap, VoiParams};

fn square(t: u64, x0: usize) -> SemanticMap {
    SemanticMap::from_fn(16, 16, t, |x, y| (x0..x0 + 4).contains(&x) && (6..10).contains(&y)).unwrap()
}

fn main() -> scdgsc::Result<()> {
    let a = square(0, 2);
    println!("change(a, a)       = {}", change_degree(&a, &a)?);
    println!("change(a, shift 1) = {:.4}", change_degree(&a, &square(0, 3))?);
    println!("change(a, shift 4) = {}", change_degree(&a, &square(0, 6))?);

    // Weight only the change degree; send when it reaches 0.3.
    let mut gate = SamplerState::new(VoiParams::new(0.3, 0.0, 1.0)?);
    for t in 0..10 {
        let map = square(t, 2 + t as usize);
        let d = gate.offer(&map)?;
        let what = match d {
            Decision::Prime => "prime".to_string(),
            Decision::Transmit(s) => format!("send    voi={:.3} aoi={}", s.value, s.aoi),
            Decision::Discard(s) => format!("discard voi={:.3} aoi={}", s.value, s.aoi),
        };
        println!("t={t} {what}  (cache from t={})", gate.cached_time().unwrap());
    }
    Ok(())
}
