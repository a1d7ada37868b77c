use std::f64::consts::PI;

use super::{CorpusError, Recording, MIN_TARGET_RATE};

/// Zero crossings of the interpolation kernel on each side.
const KERNEL_ZEROS: f64 = 32.0;

/// Band-limited resampling by windowed-sinc interpolation (Blackman window).
///
/// The kernel cutoff follows the lower of the two Nyquist frequencies, so
/// downsampling is anti-aliased. Equal rates return the samples unchanged.
pub fn resample(rec: &Recording, target_rate: u32) -> Result<Recording, CorpusError> {
    if target_rate < MIN_TARGET_RATE {
        return Err(CorpusError::RateTooLow(target_rate));
    }
    if target_rate == rec.sample_rate() {
        return Ok(rec.clone());
    }
    let input = rec.samples();
    let ratio = target_rate as f64 / rec.sample_rate() as f64;
    let out_len = (input.len() as f64 * ratio).round() as usize;
    let cutoff = ratio.min(1.0);
    let half_width = KERNEL_ZEROS / cutoff;

    let mut out = Vec::with_capacity(out_len);
    for j in 0..out_len {
        let center = j as f64 / ratio;
        let lo = ((center - half_width).ceil().max(0.0)) as usize;
        let hi = ((center + half_width).floor() as usize).min(input.len().saturating_sub(1));
        let mut acc = 0.0;
        for (i, &x) in input.iter().enumerate().take(hi + 1).skip(lo) {
            let d = center - i as f64;
            acc += x * cutoff * sinc(cutoff * d) * blackman(d / half_width);
        }
        out.push(acc);
    }

    // Ringing can push a few samples marginally past full scale.
    for x in out.iter_mut() {
        *x = x.clamp(-1.0, 1.0);
    }
    let resampled = Recording::new(rec.id(), out, target_rate, rec.source)?;
    Ok(resampled.with_sc_label(rec.sc_label))
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Blackman window on `u` in [-1, 1], zero outside.
fn blackman(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        return 0.0;
    }
    let t = PI * (u + 1.0);
    0.42 - 0.5 * t.cos() + 0.08 * (2.0 * t).cos()
}
