//! Synthetic scene: moving objects, weather, and the payload sizes that
//! each tick would cost.
//!
//! cargo run --example scene_stream -- [out_dir]

use scdgsc::sampling::change_degree;
use scdgsc::scene::{
    decode_mask, encode_frame, encode_mask, generate_stream, mask_mode, mask_to_pgm, FrameEncoding,
    SceneConfig, Weather,
};

fn main() -> scdgsc::Result<()> {
    let out = std::env::args().nth(1);
    for weather in Weather::ALL {
        let mut cfg = SceneConfig::with_random_objects(128, 96, 3, 1.5, 40, 7)?;
        cfg.weather = weather;
        let mut prev = None;
        let (mut change_sum, mut mask_bytes) = (0.0, 0);
        let mut frame_bytes = 0;
        for (frame, mask) in generate_stream(&cfg)? {
            let payload = encode_mask(&mask)?;
            assert_eq!(decode_mask(&payload)?.cells(), mask.cells());
            mask_bytes += payload.len();
            frame_bytes += encode_frame(&frame, &FrameEncoding::default());
            if let Some(p) = &prev {
                change_sum += change_degree(&mask, p)?;
            }
            if let (Some(dir), 20) = (&out, frame.timestamp) {
                std::fs::create_dir_all(dir).unwrap();
                std::fs::write(format!("{dir}/{weather}_frame.pgm"), frame.to_pgm()).unwrap();
                std::fs::write(format!("{dir}/{weather}_mask.pgm"), mask_to_pgm(&mask)).unwrap();
                println!("  mask encoding at t=20: {:?}", mask_mode(&payload)?);
            }
            prev = Some(mask);
        }
        println!(
            "{weather:<5} mean tick-to-tick change {:.3}; 40 ticks cost {frame_bytes} B as frames, {mask_bytes} B as maps",
            change_sum / 39.0
        );
    }
    Ok(())
}
