//! Discrete Fourier transform of one windowed frame.
//!
//! Power-of-two lengths go through an iterative radix-2 FFT; other lengths
//! fall back to the direct O(N^2) sum, which is still fine at analysis-window
//! scale. Everything runs in f64.

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub fn magnitude(self) -> f64 {
        self.re.hypot(self.im)
    }
}

/// DFT of a real frame: X[k] = sum_n x[n] * exp(-2*pi*i*k*n/N) for k = 0..N-1.
pub(crate) fn dft_real(frame: &[f64]) -> Vec<Complex> {
    let n = frame.len();
    if n.is_power_of_two() && n >= 2 {
        let mut buf: Vec<Complex> = frame.iter().map(|&re| Complex { re, im: 0.0 }).collect();
        fft_in_place(&mut buf);
        buf
    } else {
        dft_direct(frame)
    }
}

fn dft_direct(frame: &[f64]) -> Vec<Complex> {
    let n = frame.len();
    let step = -2.0 * std::f64::consts::PI / n as f64;
    (0..n)
        .map(|k| {
            let mut re = 0.0;
            let mut im = 0.0;
            for (idx, &x) in frame.iter().enumerate() {
                let angle = step * (k * idx % n) as f64;
                re += x * angle.cos();
                im += x * angle.sin();
            }
            Complex { re, im }
        })
        .collect()
}

/// Iterative radix-2 Cooley-Tukey, decimation in time.
fn fft_in_place(buf: &mut [Complex]) {
    let n = buf.len();
    debug_assert!(n.is_power_of_two());

    // Bit-reversal permutation.
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = (i as u32).reverse_bits() >> (32 - bits);
        let j = j as usize;
        if j > i {
            buf.swap(i, j);
        }
    }

    let mut len = 2;
    while len <= n {
        let angle = -2.0 * std::f64::consts::PI / len as f64;
        let half = len / 2;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let w_re = (angle * k as f64).cos();
                let w_im = (angle * k as f64).sin();
                let a = buf[start + k];
                let b = buf[start + k + half];
                let t_re = w_re * b.re - w_im * b.im;
                let t_im = w_re * b.im + w_im * b.re;
                buf[start + k] = Complex {
                    re: a.re + t_re,
                    im: a.im + t_im,
                };
                buf[start + k + half] = Complex {
                    re: a.re - t_re,
                    im: a.im - t_im,
                };
            }
        }
        len *= 2;
    }
}
