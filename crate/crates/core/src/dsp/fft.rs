//! In-place iterative radix-2 FFT, sized once and reused per frame.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Fft {
    size: usize,
    // (cos, -sin) of 2πk/size for k in 0..size/2
    twiddles: Vec<(f64, f64)>,
    bit_reverse: Vec<usize>,
}

impl Fft {
    pub fn new(size: usize) -> Result<Self> {
        if size < 2 || !size.is_power_of_two() {
            return Err(Error::Config(format!(
                "FFT size must be a power of two >= 2, got {size}"
            )));
        }
        let bits = size.trailing_zeros();
        let bit_reverse = (0..size)
            .map(|i| i.reverse_bits() >> (usize::BITS - bits))
            .collect();
        let twiddles = (0..size / 2)
            .map(|k| {
                let angle = 2.0 * PI * k as f64 / size as f64;
                (angle.cos(), -angle.sin())
            })
            .collect();
        Ok(Fft {
            size,
            twiddles,
            bit_reverse,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Forward transform of interleaved (re, im) pairs.
    pub fn transform(&self, re: &mut [f64], im: &mut [f64]) {
        assert_eq!(re.len(), self.size);
        assert_eq!(im.len(), self.size);
        for i in 0..self.size {
            let j = self.bit_reverse[i];
            if j > i {
                re.swap(i, j);
                im.swap(i, j);
            }
        }
        let mut half = 1;
        while half < self.size {
            let stride = self.size / (2 * half);
            for start in (0..self.size).step_by(2 * half) {
                for k in 0..half {
                    let (wr, wi) = self.twiddles[k * stride];
                    let a = start + k;
                    let b = a + half;
                    let tr = re[b] * wr - im[b] * wi;
                    let ti = re[b] * wi + im[b] * wr;
                    re[b] = re[a] - tr;
                    im[b] = im[a] - ti;
                    re[a] += tr;
                    im[a] += ti;
                }
            }
            half *= 2;
        }
    }

    /// One-sided power spectrum |X[b]|² for b in 0..=size/2 of a real frame,
    /// zero-padded to the transform size.
    pub fn power_spectrum(&self, frame: &[f64]) -> Vec<f64> {
        assert!(
            frame.len() <= self.size,
            "frame of {} samples exceeds FFT size {}",
            frame.len(),
            self.size
        );
        let mut re = vec![0.0; self.size];
        let mut im = vec![0.0; self.size];
        re[..frame.len()].copy_from_slice(frame);
        self.transform(&mut re, &mut im);
        (0..=self.size / 2)
            .map(|b| re[b] * re[b] + im[b] * im[b])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_power_of_two() {
        assert!(Fft::new(400).is_err());
        assert!(Fft::new(1).is_err());
        assert!(Fft::new(512).is_ok());
    }

    #[test]
    fn impulse_is_flat() {
        let fft = Fft::new(16).unwrap();
        let mut frame = vec![0.0; 16];
        frame[0] = 1.0;
        for bin in fft.power_spectrum(&frame) {
            assert!((bin - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn shorter_frame_is_zero_padded() {
        let fft = Fft::new(8).unwrap();
        let spec = fft.power_spectrum(&[1.0, 1.0]);
        assert_eq!(spec.len(), 5);
        assert!((spec[0] - 4.0).abs() < 1e-12);
    }
}
