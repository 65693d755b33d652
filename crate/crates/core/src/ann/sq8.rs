//! Per-dimension 8-bit scalar quantization.
//!
//! `code = round((v - min) / (max - min) * 255)` with half-up rounding and
//! clamping to `0..=255`. A dimension with `max == min` encodes to 0 and
//! decodes to `min`.

#[derive(Debug, Clone, PartialEq)]
pub struct Quantizer {
    pub min: Vec<f32>,
    pub max: Vec<f32>,
}

impl Quantizer {
    /// Fits per-dimension bounds over row-major `data`.
    pub fn fit(data: &[f32], dim: usize) -> Self {
        let mut min = vec![f32::INFINITY; dim];
        let mut max = vec![f32::NEG_INFINITY; dim];
        for row in data.chunks_exact(dim) {
            for d in 0..dim {
                min[d] = min[d].min(row[d]);
                max[d] = max[d].max(row[d]);
            }
        }
        if data.is_empty() {
            min.fill(0.0);
            max.fill(0.0);
        }
        Self { min, max }
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    /// Quantization step `(max - min) / 255` for dimension `d`.
    pub fn step(&self, d: usize) -> f64 {
        (f64::from(self.max[d]) - f64::from(self.min[d])) / 255.0
    }

    pub fn encode_value(&self, d: usize, v: f32) -> u8 {
        let (lo, hi) = (f64::from(self.min[d]), f64::from(self.max[d]));
        if hi <= lo {
            return 0;
        }
        let scaled = (f64::from(v) - lo) / (hi - lo) * 255.0;
        (scaled + 0.5).floor().clamp(0.0, 255.0) as u8
    }

    pub fn decode_value(&self, d: usize, code: u8) -> f64 {
        let (lo, hi) = (f64::from(self.min[d]), f64::from(self.max[d]));
        if hi <= lo {
            return lo;
        }
        lo + f64::from(code) / 255.0 * (hi - lo)
    }

    pub fn encode(&self, v: &[f32]) -> Vec<u8> {
        v.iter().enumerate().map(|(d, &x)| self.encode_value(d, x)).collect()
    }

    pub fn decode(&self, codes: &[u8]) -> Vec<f64> {
        codes.iter().enumerate().map(|(d, &c)| self.decode_value(d, c)).collect()
    }

    /// Inner product of `query` with the decoded vector for `codes`.
    pub fn decoded_dot(&self, query: &[f32], codes: &[u8]) -> f64 {
        codes
            .iter()
            .enumerate()
            .map(|(d, &c)| f64::from(query[d]) * self.decode_value(d, c))
            .sum()
    }
}
