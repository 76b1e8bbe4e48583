//! Periodic three-dimensional FFT on `n³` complex arrays, axis 0 fastest.

use std::sync::Arc;

use num_complex::Complex;

use crate::scalar::{LineFft, Real};

pub struct Fft3<T: Real> {
    n: usize,
    fwd: Arc<dyn LineFft<T>>,
    inv: Arc<dyn LineFft<T>>,
}

impl<T: Real> std::fmt::Debug for Fft3<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft3").field("n", &self.n).finish()
    }
}

impl<T: Real> Fft3<T> {
    pub fn new(n: usize) -> Self {
        Self { n, fwd: T::plan_fft(n, false), inv: T::plan_fft(n, true) }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Wave number of index `m` on a period of `2π`, with the Nyquist index
    /// mapped to `n/2` (its sign is irrelevant once callers zero it).
    pub fn wavenumber(&self, m: usize) -> i64 {
        let n = self.n as i64;
        let m = m as i64;
        if m <= n / 2 {
            m
        } else {
            m - n
        }
    }

    pub fn forward(&self, data: &mut [Complex<T>]) {
        self.run(data, &*self.fwd);
    }

    /// Inverse transform including the `1/n³` normalisation.
    pub fn inverse(&self, data: &mut [Complex<T>]) {
        self.run(data, &*self.inv);
        let s = T::one() / T::from_usize_lossy(self.len());
        for z in data.iter_mut() {
            z.re *= s;
            z.im *= s;
        }
    }

    fn run(&self, data: &mut [Complex<T>], plan: &dyn LineFft<T>) {
        let n = self.n;
        assert_eq!(data.len(), n * n * n, "FFT buffer has wrong length");
        let zero = Complex::new(T::zero(), T::zero());
        let mut scratch = vec![zero; plan.scratch_len()];
        plan.process(data, &mut scratch);

        let mut plane = vec![zero; n * n];
        // axis 1
        for k in 0..n {
            let slab = &mut data[k * n * n..(k + 1) * n * n];
            for j in 0..n {
                for i in 0..n {
                    plane[i * n + j] = slab[i + n * j];
                }
            }
            plan.process(&mut plane, &mut scratch);
            for j in 0..n {
                for i in 0..n {
                    slab[i + n * j] = plane[i * n + j];
                }
            }
        }
        // axis 2
        for j in 0..n {
            for k in 0..n {
                let row = n * (j + n * k);
                for i in 0..n {
                    plane[i * n + k] = data[row + i];
                }
            }
            plan.process(&mut plane, &mut scratch);
            for k in 0..n {
                let row = n * (j + n * k);
                for i in 0..n {
                    data[row + i] = plane[i * n + k];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_mode_lands_in_one_bin() {
        let n = 8;
        let fft = Fft3::<f64>::new(n);
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut data: Vec<Complex<f64>> = (0..n * n * n)
            .map(|idx| {
                let (i, j, k) = (idx % n, (idx / n) % n, idx / (n * n));
                let ph = two_pi * (i as f64 + 2.0 * j as f64 + 3.0 * k as f64) / n as f64;
                Complex::new(ph.cos(), ph.sin())
            })
            .collect();
        let orig = data.clone();
        fft.forward(&mut data);
        let peak = 1 + n * (2 + n * 3);
        for (idx, z) in data.iter().enumerate() {
            let want = if idx == peak { (n * n * n) as f64 } else { 0.0 };
            assert!((z.re - want).abs() < 1e-9 && z.im.abs() < 1e-9);
        }
        fft.inverse(&mut data);
        for (a, b) in data.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
