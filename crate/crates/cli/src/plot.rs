//! Binary PPM (P6) rendering of Mel dumps and loss curves.

use anyhow::{bail, Result};

use rfspeech_core::signal::MatrixDump;

/// Side length in pixels of one Mel cell.
pub const CELL_PX: usize = 4;
pub const LOSS_WIDTH: usize = 640;
pub const LOSS_HEIGHT: usize = 320;

/// Viridis sampled at 17 evenly spaced points.
const VIRIDIS: [[u8; 3]; 17] = [
    [68, 1, 84],
    [72, 24, 106],
    [71, 45, 123],
    [66, 64, 134],
    [59, 82, 139],
    [51, 99, 141],
    [44, 114, 142],
    [38, 130, 142],
    [33, 145, 140],
    [31, 160, 136],
    [40, 174, 128],
    [63, 188, 115],
    [94, 201, 98],
    [132, 212, 75],
    [173, 220, 48],
    [216, 226, 25],
    [253, 231, 37],
];

/// Colour of `t` ∈ [0, 1], linearly interpolated between anchors.
pub fn colormap(t: f64) -> [u8; 3] {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let x = t * (VIRIDIS.len() - 1) as f64;
    let i = (x.floor() as usize).min(VIRIDIS.len() - 2);
    let f = x - i as f64;
    let mut out = [0u8; 3];
    for c in 0..3 {
        let (a, b) = (VIRIDIS[i][c] as f64, VIRIDIS[i + 1][c] as f64);
        out[c] = (a + f * (b - a)).round() as u8;
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<u8>,
}

impl Image {
    fn filled(width: usize, height: usize, c: [u8; 3]) -> Self {
        Image {
            width,
            height,
            rgb: c.iter().copied().cycle().take(width * height * 3).collect(),
        }
    }

    #[cfg(test)]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    fn set(&mut self, x: usize, y: usize, c: [u8; 3]) {
        if x < self.width && y < self.height {
            let i = (y * self.width + x) * 3;
            self.rgb[i..i + 3].copy_from_slice(&c);
        }
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.rgb);
        out
    }
}

/// Heatmap of a bands × frames dump: time runs left to right, the lowest
/// band sits at the bottom, and values map linearly from the dump's
/// minimum to its maximum. Size is `frames·CELL_PX × bands·CELL_PX`.
pub fn mel_heatmap(d: &MatrixDump) -> Image {
    let (bands, frames) = (d.rows, d.cols);
    let lo = d.data.iter().cloned().fold(f32::INFINITY, f32::min) as f64;
    let hi = d.data.iter().cloned().fold(f32::NEG_INFINITY, f32::max) as f64;
    let span = hi - lo;
    let mut img = Image::filled(frames * CELL_PX, bands * CELL_PX, [0, 0, 0]);
    for b in 0..bands {
        let row = bands - 1 - b;
        for t in 0..frames {
            let v = d.data[b * frames + t] as f64;
            let c = colormap(if span > 0.0 { (v - lo) / span } else { 0.0 });
            for dy in 0..CELL_PX {
                for dx in 0..CELL_PX {
                    img.set(t * CELL_PX + dx, row * CELL_PX + dy, c);
                }
            }
        }
    }
    img
}

/// Loss against step on a white `LOSS_WIDTH × LOSS_HEIGHT` canvas.
pub fn loss_curve(rows: &[(u64, f32)]) -> Result<Image> {
    if rows.is_empty() {
        bail!("loss log has no rows");
    }
    let mut img = Image::filled(LOSS_WIDTH, LOSS_HEIGHT, [255, 255, 255]);
    let margin = 10.0;
    let lo = rows.iter().map(|r| r.1).fold(f32::INFINITY, f32::min) as f64;
    let hi = rows.iter().map(|r| r.1).fold(f32::NEG_INFINITY, f32::max) as f64;
    let (s0, s1) = (rows[0].0 as f64, rows[rows.len() - 1].0 as f64);
    let to_px = |step: u64, loss: f32| -> (f64, f64) {
        let x = if s1 > s0 { (step as f64 - s0) / (s1 - s0) } else { 0.5 };
        let y = if hi > lo { (loss as f64 - lo) / (hi - lo) } else { 0.5 };
        (
            margin + x * (LOSS_WIDTH as f64 - 2.0 * margin),
            LOSS_HEIGHT as f64 - margin - y * (LOSS_HEIGHT as f64 - 2.0 * margin),
        )
    };
    let axis = [160, 160, 160];
    for x in 0..LOSS_WIDTH {
        img.set(x, LOSS_HEIGHT - margin as usize, axis);
    }
    for y in 0..LOSS_HEIGHT {
        img.set(margin as usize, y, axis);
    }
    let ink = colormap(0.0);
    let mut prev = to_px(rows[0].0, rows[0].1);
    img.set(prev.0.round() as usize, prev.1.round() as usize, ink);
    for &(s, l) in &rows[1..] {
        let p = to_px(s, l);
        let n = ((p.0 - prev.0).abs().max((p.1 - prev.1).abs()).ceil() as usize).max(1);
        for k in 0..=n {
            let f = k as f64 / n as f64;
            let (x, y) = (prev.0 + f * (p.0 - prev.0), prev.1 + f * (p.1 - prev.1));
            img.set(x.round() as usize, y.round() as usize, ink);
        }
        prev = p;
    }
    Ok(img)
}
