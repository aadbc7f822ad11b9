//! Synthetic monitoring scenes with ground-truth semantic maps.
//!
//! A fixed background is overlaid with axis-aligned moving objects that
//! bounce off the frame edges. Weather is painted onto the frame only, so the
//! semantic map depends on object positions alone.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::SemanticMap;

/// Frame geometry the tabulated payload sizes were measured at.
pub const REFERENCE_WIDTH: usize = 128;
pub const REFERENCE_HEIGHT: usize = 96;

/// Size of every mask payload header in bytes.
pub const MASK_HEADER_LEN: usize = 16;
/// Size of the raw-frame payload header in bytes.
pub const FRAME_HEADER_LEN: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weather {
    Clear,
    Rain,
    Snow,
    Fog,
}

impl Weather {
    pub const ALL: [Weather; 4] = [Weather::Clear, Weather::Rain, Weather::Snow, Weather::Fog];

    pub fn as_str(&self) -> &'static str {
        match self {
            Weather::Clear => "clear",
            Weather::Rain => "rain",
            Weather::Snow => "snow",
            Weather::Fog => "fog",
        }
    }
}

impl fmt::Display for Weather {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Weather {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clear" => Ok(Weather::Clear),
            "rain" => Ok(Weather::Rain),
            "snow" => Ok(Weather::Snow),
            "fog" => Ok(Weather::Fog),
            other => Err(Error::config("weather", format!("unknown weather `{other}`"))),
        }
    }
}

/// Initial kinematics of one rectangular object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    #[serde(rename = "x_px")]
    pub x: f64,
    #[serde(rename = "y_px")]
    pub y: f64,
    #[serde(rename = "vx_px_per_tick")]
    pub vx: f64,
    #[serde(rename = "vy_px_per_tick")]
    pub vy: f64,
    #[serde(rename = "width_px")]
    pub width: usize,
    #[serde(rename = "height_px")]
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub width: usize,
    pub height: usize,
    pub duration: u64,
    pub weather: Weather,
    pub seed: u64,
    pub objects: Vec<ObjectSpec>,
}

impl SceneConfig {
    /// A scene with `num_objects` objects whose sizes and motion are drawn from `seed`.
    pub fn with_random_objects(
        width: usize,
        height: usize,
        num_objects: usize,
        max_speed: f64,
        duration: u64,
        seed: u64,
    ) -> Result<Self> {
        if width < 8 || height < 8 {
            return Err(Error::config("scene.width/height", "random objects need at least 8x8"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6f62_6a65_6374_7321);
        let objects = (0..num_objects)
            .map(|_| {
                let w = rng.random_range((width / 12).max(2)..=(width / 6).max(2));
                let h = rng.random_range((height / 12).max(2)..=(height / 6).max(2));
                ObjectSpec {
                    x: rng.random_range(0.0..(width - w) as f64),
                    y: rng.random_range(0.0..(height - h) as f64),
                    vx: rng.random_range(-max_speed..=max_speed),
                    vy: rng.random_range(-max_speed..=max_speed) * 0.5,
                    width: w,
                    height: h,
                }
            })
            .collect();
        let cfg = Self {
            width,
            height,
            duration,
            weather: Weather::Clear,
            seed,
            objects,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::config(
                "scene.width/height",
                format!("frame must be non-empty, got {}x{}", self.width, self.height),
            ));
        }
        if self.width > u16::MAX as usize || self.height > u16::MAX as usize {
            return Err(Error::config("scene.width/height", "dimensions must fit in 16 bits"));
        }
        for (i, o) in self.objects.iter().enumerate() {
            let field = format!("scene.objects[{i}]");
            if o.width == 0 || o.height == 0 || o.width > self.width || o.height > self.height {
                return Err(Error::config(field, "object size must be non-zero and fit the frame"));
            }
            let max_x = (self.width - o.width) as f64;
            let max_y = (self.height - o.height) as f64;
            if !(0.0..=max_x).contains(&o.x) || !(0.0..=max_y).contains(&o.y) {
                return Err(Error::config(field, "object must start inside the frame"));
            }
            if !(o.vx.is_finite() && o.vy.is_finite()) {
                return Err(Error::config(field, "velocity must be finite"));
            }
        }
        Ok(())
    }
}

/// An 8-bit grayscale capture.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub timestamp: u64,
    pub weather: Weather,
    pub pixels: Vec<u8>,
}

impl Frame {
    pub fn pixel(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Binary PGM (P5).
    pub fn to_pgm(&self) -> Vec<u8> {
        pgm(self.width, self.height, &self.pixels)
    }
}

/// Binary PGM with object pixels white.
pub fn mask_to_pgm(map: &SemanticMap) -> Vec<u8> {
    let px: Vec<u8> = map.cells().iter().map(|&c| if c { 255 } else { 0 }).collect();
    pgm(map.width(), map.height(), &px)
}

fn pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

#[derive(Debug, Clone, Copy)]
struct Body {
    x: f64,
    y: f64,
    vx: f64,
    vy: f64,
    w: usize,
    h: usize,
}

fn reflect(pos: &mut f64, vel: &mut f64, max: f64) {
    // repeated folding handles steps longer than the free span
    if max <= 0.0 {
        *pos = 0.0;
        return;
    }
    loop {
        if *pos < 0.0 {
            *pos = -*pos;
            *vel = -*vel;
        } else if *pos > max {
            *pos = 2.0 * max - *pos;
            *vel = -*vel;
        } else {
            break;
        }
    }
}

impl Body {
    fn advance(&mut self, width: usize, height: usize) {
        self.x += self.vx;
        self.y += self.vy;
        reflect(&mut self.x, &mut self.vx, (width - self.w) as f64);
        reflect(&mut self.y, &mut self.vy, (height - self.h) as f64);
    }

    fn pixel_rect(&self) -> (usize, usize) {
        (self.x.floor() as usize, self.y.floor() as usize)
    }
}

/// Iterator over `(Frame, SemanticMap)` pairs, one per tick.
#[derive(Debug, Clone)]
pub struct SceneStream {
    cfg: SceneConfig,
    background: Vec<u8>,
    bodies: Vec<Body>,
    tick: u64,
}

/// Starts the deterministic stream described by `cfg`.
pub fn generate_stream(cfg: &SceneConfig) -> Result<SceneStream> {
    cfg.validate()?;
    let bodies = cfg
        .objects
        .iter()
        .map(|o| Body {
            x: o.x,
            y: o.y,
            vx: o.vx,
            vy: o.vy,
            w: o.width,
            h: o.height,
        })
        .collect();
    Ok(SceneStream {
        background: background(cfg.width, cfg.height, cfg.seed),
        cfg: cfg.clone(),
        bodies,
        tick: 0,
    })
}

/// The static reference view of the scene: background with weather, no objects.
pub fn reference_frame(cfg: &SceneConfig) -> Result<Frame> {
    cfg.validate()?;
    let mut pixels = background(cfg.width, cfg.height, cfg.seed);
    apply_weather(&mut pixels, cfg.width, cfg.height, cfg.weather, cfg.seed, 0);
    Ok(Frame {
        width: cfg.width,
        height: cfg.height,
        timestamp: 0,
        weather: cfg.weather,
        pixels,
    })
}

impl SceneStream {
    pub fn config(&self) -> &SceneConfig {
        &self.cfg
    }

    fn render(&self) -> (Frame, SemanticMap) {
        let (w, h) = (self.cfg.width, self.cfg.height);
        let mut pixels = self.background.clone();
        let mut cells = vec![false; w * h];
        for (i, b) in self.bodies.iter().enumerate() {
            let (x0, y0) = b.pixel_rect();
            let shade = 190u8.saturating_add((i as u8).wrapping_mul(23) % 60);
            for y in y0..(y0 + b.h).min(h) {
                for x in x0..(x0 + b.w).min(w) {
                    pixels[y * w + x] = shade;
                    cells[y * w + x] = true;
                }
            }
        }
        apply_weather(&mut pixels, w, h, self.cfg.weather, self.cfg.seed, self.tick);
        let frame = Frame {
            width: w,
            height: h,
            timestamp: self.tick,
            weather: self.cfg.weather,
            pixels,
        };
        let map = SemanticMap::new(w, h, self.tick, cells).expect("dimensions validated");
        (frame, map)
    }
}

impl Iterator for SceneStream {
    type Item = (Frame, SemanticMap);

    fn next(&mut self) -> Option<Self::Item> {
        if self.tick >= self.cfg.duration {
            return None;
        }
        let out = self.render();
        self.tick += 1;
        for b in &mut self.bodies {
            b.advance(self.cfg.width, self.cfg.height);
        }
        Some(out)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.cfg.duration - self.tick) as usize;
        (left, Some(left))
    }
}

fn background(width: usize, height: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6267_726f_756e_6421);
    let mut px = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let sky = 60.0 + 60.0 * (1.0 - y as f64 / height as f64);
            let lane = if (x / 8) % 4 == 0 && y > height / 2 { 25.0 } else { 0.0 };
            let grain: f64 = rng.random_range(-6.0..6.0);
            px.push((sky + lane + grain).clamp(0.0, 255.0) as u8);
        }
    }
    px
}

fn apply_weather(px: &mut [u8], width: usize, height: usize, weather: Weather, seed: u64, tick: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ tick.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ 0x7765_6174);
    match weather {
        Weather::Clear => {}
        Weather::Rain => {
            for _ in 0..(width * height / 64) {
                let x0 = rng.random_range(0..width);
                let y0 = rng.random_range(0..height);
                for k in 0..4 {
                    let (x, y) = (x0 + k / 2, y0 + k);
                    if x < width && y < height {
                        let p = &mut px[y * width + x];
                        *p = p.saturating_add(50);
                    }
                }
            }
        }
        Weather::Snow => {
            for _ in 0..(width * height / 40) {
                let x = rng.random_range(0..width);
                let y = rng.random_range(0..height);
                px[y * width + x] = 245;
            }
        }
        Weather::Fog => {
            for p in px.iter_mut() {
                *p = ((*p as u16 * 3 + 200 * 2) / 5) as u8;
            }
        }
    }
}

// Mask payload: 16-byte header then either LEB128 run lengths or a packed bitmap.
//   0..2   magic "SM"
//   2      mode (0 = runs, 1 = bitmap)
//   3      value of the first run (runs mode), 0 otherwise
//   4..6   width  u16 LE
//   6..8   height u16 LE
//   8..16  timestamp u64 LE
const MASK_MAGIC: &[u8; 2] = b"SM";
const MODE_RUNS: u8 = 0;
const MODE_BITMAP: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskMode {
    Runs,
    Bitmap,
}

fn push_varint(out: &mut Vec<u8>, mut v: u64) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

fn read_varint(bytes: &[u8], pos: &mut usize) -> Result<u64> {
    let mut v = 0u64;
    for shift in (0..64).step_by(7) {
        let b = *bytes
            .get(*pos)
            .ok_or_else(|| Error::Payload("truncated run length".into()))?;
        *pos += 1;
        v |= ((b & 0x7f) as u64) << shift;
        if b & 0x80 == 0 {
            return Ok(v);
        }
    }
    Err(Error::Payload("run length overflows u64".into()))
}

/// Lossless run-length payload for a mask, falling back to a packed bitmap
/// when runs would be larger.
pub fn encode_mask(map: &SemanticMap) -> Result<Vec<u8>> {
    let (w, h) = (map.width(), map.height());
    if w > u16::MAX as usize || h > u16::MAX as usize {
        return Err(Error::Payload(format!("{w}x{h} exceeds 16-bit header fields")));
    }
    let cells = map.cells();
    let mut runs = Vec::new();
    let mut current = cells[0];
    let mut len = 0u64;
    for &c in cells {
        if c == current {
            len += 1;
        } else {
            push_varint(&mut runs, len);
            current = c;
            len = 1;
        }
    }
    push_varint(&mut runs, len);

    let bitmap_len = cells.len().div_ceil(8);
    let (mode, first, body) = if runs.len() <= bitmap_len {
        (MODE_RUNS, cells[0] as u8, runs)
    } else {
        let mut bits = vec![0u8; bitmap_len];
        for (i, _) in cells.iter().enumerate().filter(|(_, &c)| c) {
            bits[i / 8] |= 0x80 >> (i % 8);
        }
        (MODE_BITMAP, 0, bits)
    };

    let mut out = Vec::with_capacity(MASK_HEADER_LEN + body.len());
    out.extend_from_slice(MASK_MAGIC);
    out.push(mode);
    out.push(first);
    out.extend_from_slice(&(w as u16).to_le_bytes());
    out.extend_from_slice(&(h as u16).to_le_bytes());
    out.extend_from_slice(&map.timestamp().to_le_bytes());
    out.extend_from_slice(&body);
    Ok(out)
}

/// Which body layout a mask payload uses.
pub fn mask_mode(payload: &[u8]) -> Result<MaskMode> {
    match payload.get(2) {
        Some(&MODE_RUNS) => Ok(MaskMode::Runs),
        Some(&MODE_BITMAP) => Ok(MaskMode::Bitmap),
        Some(m) => Err(Error::Payload(format!("unknown mask mode {m}"))),
        None => Err(Error::Payload("truncated header".into())),
    }
}

pub fn decode_mask(payload: &[u8]) -> Result<SemanticMap> {
    if payload.len() < MASK_HEADER_LEN {
        return Err(Error::Payload("truncated header".into()));
    }
    if &payload[0..2] != MASK_MAGIC {
        return Err(Error::Payload("bad magic".into()));
    }
    let mode = mask_mode(payload)?;
    let w = u16::from_le_bytes([payload[4], payload[5]]) as usize;
    let h = u16::from_le_bytes([payload[6], payload[7]]) as usize;
    let t = u64::from_le_bytes(payload[8..16].try_into().expect("8 bytes"));
    let n = w * h;
    let body = &payload[MASK_HEADER_LEN..];
    let cells = match mode {
        MaskMode::Bitmap => {
            if body.len() != n.div_ceil(8) {
                return Err(Error::Payload("bitmap length mismatch".into()));
            }
            (0..n).map(|i| body[i / 8] & (0x80 >> (i % 8)) != 0).collect()
        }
        MaskMode::Runs => {
            let mut cells = Vec::with_capacity(n);
            let mut value = payload[3] != 0;
            let mut pos = 0;
            while pos < body.len() {
                let len = read_varint(body, &mut pos)? as usize;
                if len == 0 || cells.len() + len > n {
                    return Err(Error::Payload("run lengths do not tile the mask".into()));
                }
                cells.extend(std::iter::repeat_n(value, len));
                value = !value;
            }
            if cells.len() != n {
                return Err(Error::Payload("run lengths do not tile the mask".into()));
            }
            cells
        }
    };
    SemanticMap::new(w, h, t, cells)
}

/// Payload sizes in bytes at the reference geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TabulatedSizes {
    pub clear: u64,
    pub rain: u64,
    pub snow: u64,
    pub fog: u64,
}

impl TabulatedSizes {
    /// Measured JPEG sizes for 128x96 captures: 93, 96, 82 and 128 kB.
    pub const MEASURED: TabulatedSizes = TabulatedSizes {
        clear: 93_000,
        rain: 96_000,
        snow: 82_000,
        fog: 128_000,
    };

    pub fn for_weather(&self, w: Weather) -> u64 {
        match w {
            Weather::Clear => self.clear,
            Weather::Rain => self.rain,
            Weather::Snow => self.snow,
            Weather::Fog => self.fog,
        }
    }
}

/// Measured JPEG size of a 128x96 semantic map, in bytes.
pub const TABULATED_MASK_BYTES: u64 = 5_000;

/// How a full frame is sized for the conventional-transmission baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum FrameEncoding {
    /// Measured sizes scaled linearly with pixel count.
    Tabulated(TabulatedSizes),
    /// One byte per pixel plus header.
    Raw,
}

impl Default for FrameEncoding {
    fn default() -> Self {
        FrameEncoding::Tabulated(TabulatedSizes::MEASURED)
    }
}

/// Scales a size measured at 128x96 to `width x height`, rounding to nearest.
pub fn scale_to_geometry(bytes_at_reference: u64, width: usize, height: usize) -> u64 {
    let reference = (REFERENCE_WIDTH * REFERENCE_HEIGHT) as u128;
    let px = (width * height) as u128;
    ((bytes_at_reference as u128 * px + reference / 2) / reference) as u64
}

/// Payload byte count of a frame.
pub fn encode_frame(frame: &Frame, encoding: &FrameEncoding) -> u64 {
    match encoding {
        FrameEncoding::Raw => (frame.width * frame.height) as u64 + FRAME_HEADER_LEN,
        FrameEncoding::Tabulated(sizes) => {
            scale_to_geometry(sizes.for_weather(frame.weather), frame.width, frame.height)
        }
    }
}
