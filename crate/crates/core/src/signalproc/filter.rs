use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use super::SignalError;

/// One second-order section in direct form II transposed, `a[0] == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + z_inv * self.b[1] + z2 * self.b[2])
            / (self.a[0] + z_inv * self.a[1] + z2 * self.a[2])
    }

    fn dc_gain(&self) -> f64 {
        let den = self.a.iter().sum::<f64>();
        if den.abs() < 1e-300 {
            0.0
        } else {
            self.b.iter().sum::<f64>() / den
        }
    }
}

/// Cascade of second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    pub sections: Vec<Biquad>,
}

impl SosFilter {
    /// Complex frequency response at `freq` Hz.
    pub fn response(&self, freq: f64, fs: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * freq / fs);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    pub fn magnitude(&self, freq: f64, fs: f64) -> f64 {
        self.response(freq, fs).norm()
    }

    /// Causal filtering from rest, or from `init` section states.
    pub fn apply(&self, input: &[f64], init: Option<&[[f64; 2]]>) -> Vec<f64> {
        let mut state: Vec<[f64; 2]> = match init {
            Some(zi) => zi.to_vec(),
            None => vec![[0.0; 2]; self.sections.len()],
        };
        let mut out = input.to_vec();
        for (sec, z) in self.sections.iter().zip(state.iter_mut()) {
            for x in out.iter_mut() {
                let xin = *x;
                let y = sec.b[0] * xin + z[0];
                z[0] = sec.b[1] * xin - sec.a[1] * y + z[1];
                z[1] = sec.b[2] * xin - sec.a[2] * y;
                *x = y;
            }
        }
        out
    }

    /// Section states that make a constant input of 1 look like it has
    /// always been present.
    fn steady_state(&self) -> Vec<[f64; 2]> {
        let mut level = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let g = s.dc_gain();
                let z2 = (s.b[2] - s.a[2] * g) * level;
                let z1 = (s.b[1] - s.a[1] * g) * level + z2;
                level *= g;
                [z1, z2]
            })
            .collect()
    }

    /// Zero-phase forward-backward filtering with odd-symmetric edge padding.
    pub fn filtfilt(&self, input: &[f64]) -> Vec<f64> {
        let n = input.len();
        if n == 0 {
            return Vec::new();
        }
        let ntaps = 2 * self.sections.len() + 1;
        let pad = (3 * ntaps).min(n - 1);

        let mut ext = Vec::with_capacity(n + 2 * pad);
        let first = input[0];
        let last = input[n - 1];
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - input[i]));
        ext.extend_from_slice(input);
        ext.extend((1..=pad).map(|i| 2.0 * last - input[n - 1 - i]));

        let zi = self.steady_state();
        let scaled = |x0: f64| -> Vec<[f64; 2]> {
            zi.iter().map(|z| [z[0] * x0, z[1] * x0]).collect()
        };

        let mut fwd = self.apply(&ext, Some(&scaled(ext[0])));
        fwd.reverse();
        let mut back = self.apply(&fwd, Some(&scaled(fwd[0])));
        back.reverse();
        back[pad..pad + n].to_vec()
    }
}

/// Digital Butterworth band-pass as second-order sections.
///
/// `order` is the order of the band-pass filter (twice the low-pass
/// prototype order), so `order / 2` sections are produced. Band edges are
/// pre-warped and mapped with the bilinear transform; gain is 1 at the
/// geometric band center.
pub fn butterworth_bandpass(
    order: usize,
    fs: f64,
    f_lo: f64,
    f_hi: f64,
) -> Result<SosFilter, SignalError> {
    if !matches!(order, 2 | 4 | 6 | 8) {
        return Err(SignalError::InvalidOrder(order));
    }
    if !(fs > 0.0 && f_lo > 0.0 && f_lo < f_hi && f_hi < fs / 2.0) {
        return Err(SignalError::InvalidBand { f_lo, f_hi, fs });
    }
    let proto_order = order / 2;
    let two_fs = 2.0 * fs;
    let w_lo = two_fs * (PI * f_lo / fs).tan();
    let w_hi = two_fs * (PI * f_hi / fs).tan();
    let bandwidth = w_hi - w_lo;
    let w0_sq = w_lo * w_hi;

    let mut poles = Vec::with_capacity(order);
    for k in 0..proto_order {
        let theta = PI * (2 * k + proto_order + 1) as f64 / (2 * proto_order) as f64;
        let p = Complex64::from_polar(1.0, theta);
        let half = p * (bandwidth / 2.0);
        let root = (half * half - w0_sq).sqrt();
        for s in [half + root, half - root] {
            poles.push((two_fs + s) / (two_fs - s));
        }
    }

    let mut sections: Vec<Biquad> = pair_poles(poles)
        .into_iter()
        .map(|(p1, p2)| Biquad {
            b: [1.0, 0.0, -1.0],
            a: [1.0, -(p1 + p2).re, (p1 * p2).re],
        })
        .collect();

    let center = (w0_sq.sqrt() / two_fs).atan() * fs / PI;
    let mut filter = SosFilter {
        sections: sections.clone(),
    };
    let gain = filter.magnitude(center, fs);
    for c in sections[0].b.iter_mut() {
        *c /= gain;
    }
    filter.sections = sections;
    Ok(filter)
}

/// Groups poles into conjugate pairs; leftover real poles pair with each other.
fn pair_poles(poles: Vec<Complex64>) -> Vec<(Complex64, Complex64)> {
    const EPS: f64 = 1e-10;
    let mut complex: Vec<Complex64> = poles.iter().copied().filter(|p| p.im > EPS).collect();
    complex.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
    let mut real: Vec<f64> = poles
        .iter()
        .filter(|p| p.im.abs() <= EPS)
        .map(|p| p.re)
        .collect();
    real.sort_by(f64::total_cmp);

    let mut pairs: Vec<(Complex64, Complex64)> =
        complex.into_iter().map(|p| (p, p.conj())).collect();
    for chunk in real.chunks(2) {
        let a = Complex64::new(chunk[0], 0.0);
        let b = Complex64::new(*chunk.get(1).unwrap_or(&0.0), 0.0);
        pairs.push((a, b));
    }
    pairs
}

/// Butterworth band-pass applied forward and backward (zero phase).
pub fn bandpass(
    signal: &[f64],
    fs: f64,
    f_lo: f64,
    f_hi: f64,
    order: usize,
) -> Result<Vec<f64>, SignalError> {
    if signal.iter().any(|x| !x.is_finite()) {
        return Err(SignalError::NonFinite);
    }
    let filter = butterworth_bandpass(order, fs, f_lo, f_hi)?;
    Ok(filter.filtfilt(signal))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * PI * freq * i as f64 / fs).sin())
            .collect()
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    #[test]
    fn design_is_stable_with_unit_center_gain() {
        for order in [2, 4, 6, 8] {
            let f = butterworth_bandpass(order, 4000.0, 50.0, 500.0).unwrap();
            assert_eq!(f.sections.len(), order / 2);
            for s in &f.sections {
                // Both roots of 1 + a1 z^-1 + a2 z^-2 inside the unit circle.
                assert!(s.a[2].abs() < 1.0);
                assert!(s.a[1].abs() < 1.0 + s.a[2]);
            }
            let center = (50.0f64 * 500.0).sqrt();
            let g = f.magnitude(center, 4000.0);
            assert!((g - 1.0).abs() < 0.05, "order {order}: {g}");
            // Half-power at the band edges.
            for edge in [50.0, 500.0] {
                let m = f.magnitude(edge, 4000.0);
                assert!((m - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6, "{order} {edge} {m}");
            }
        }
    }

    #[test]
    fn response_matches_direct_filtering() {
        // Steady-state amplitude of the causal filter equals |H(f)|.
        let f = butterworth_bandpass(4, 4000.0, 50.0, 500.0).unwrap();
        for freq in [30.0, 120.0, 700.0] {
            let x = sine(freq, 4000.0, 16_000);
            let y = f.apply(&x, None);
            let measured = rms(&y[8000..]) / rms(&x[8000..]);
            let expected = f.magnitude(freq, 4000.0);
            assert!((measured - expected).abs() < 1e-3, "{freq}: {measured} vs {expected}");
        }
    }

    #[test]
    fn passband_and_stopband() {
        let fs = 4000.0;
        let n = 40_000;
        let margin = 4000;
        let x200 = sine(200.0, fs, n);
        let y200 = bandpass(&x200, fs, 50.0, 500.0, 4).unwrap();
        let gain_db = 20.0 * (rms(&y200[margin..n - margin]) / rms(&x200[margin..n - margin])).log10();
        assert!(gain_db.abs() <= 1.0, "passband gain {gain_db} dB");

        let x10 = sine(10.0, fs, n);
        let y10 = bandpass(&x10, fs, 50.0, 500.0, 4).unwrap();
        let atten_db = 20.0 * (rms(&y10[margin..n - margin]) / rms(&x10[margin..n - margin])).log10();
        assert!(atten_db <= -40.0, "stopband {atten_db} dB");
    }

    #[test]
    fn zero_in_zero_out() {
        let y = bandpass(&vec![0.0; 1000], 4000.0, 50.0, 500.0, 4).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
        assert_eq!(y.len(), 1000);
    }

    #[test]
    fn output_length_matches_short_inputs() {
        for n in [1, 2, 5, 20] {
            let y = bandpass(&vec![0.3; n], 4000.0, 50.0, 500.0, 8).unwrap();
            assert_eq!(y.len(), n);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            bandpass(&[0.0; 10], 4000.0, 500.0, 50.0, 4),
            Err(SignalError::InvalidBand { .. })
        ));
        assert!(bandpass(&[0.0; 10], 4000.0, 50.0, 2000.0, 4).is_err());
        assert!(bandpass(&[0.0; 10], 4000.0, 0.0, 500.0, 4).is_err());
        assert!(matches!(
            bandpass(&[0.0; 10], 4000.0, 50.0, 500.0, 3),
            Err(SignalError::InvalidOrder(3))
        ));
        assert!(matches!(
            bandpass(&[0.0, f64::NAN], 4000.0, 50.0, 500.0, 4),
            Err(SignalError::NonFinite)
        ));
    }
}
