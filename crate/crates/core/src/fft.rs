//! Discrete Fourier transforms: an iterative radix-2 kernel for power-of-two
//! sizes and Bluestein's chirp-z algorithm for everything else, so whole-signal
//! spectra of arbitrary-length recordings use the exact length-n DFT grid.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

/// Smallest power of two `>= n`.
pub fn next_pow2(n: usize) -> usize {
    let mut m = 1;
    while m < n {
        m <<= 1;
    }
    m
}

pub struct Dft {
    n: usize,
    plan: Plan,
}

enum Plan {
    Pow2(Pow2Plan),
    Bluestein {
        pow2: Pow2Plan,
        m: usize,
        // chirp w[n] = exp(-i*pi*n^2/N)
        chirp_re: Vec<f64>,
        chirp_im: Vec<f64>,
        // FFT of the zero-padded conjugate chirp, reused every call
        bfft_re: Vec<f64>,
        bfft_im: Vec<f64>,
    },
}

struct Pow2Plan {
    n: usize,
    // w_n^k for k < n/2, forward sign convention
    tw_re: Vec<f64>,
    tw_im: Vec<f64>,
    rev: Vec<u32>,
}

impl Pow2Plan {
    fn new(n: usize) -> Self {
        debug_assert!(n.is_power_of_two());
        let half = n / 2;
        let mut tw_re = Vec::with_capacity(half.max(1));
        let mut tw_im = Vec::with_capacity(half.max(1));
        for k in 0..half.max(1) {
            let ang = -2.0 * core::f64::consts::PI * k as f64 / n as f64;
            tw_re.push(ang.cos());
            tw_im.push(ang.sin());
        }
        let bits = n.trailing_zeros();
        let mut rev = vec![0u32; n];
        for (i, r) in rev.iter_mut().enumerate() {
            *r = (i as u32).reverse_bits() >> (32 - bits.max(1));
        }
        if n == 1 {
            rev[0] = 0;
        }
        Pow2Plan { n, tw_re, tw_im, rev }
    }

    fn fft(&self, re: &mut [f64], im: &mut [f64], inverse: bool) {
        let n = self.n;
        debug_assert_eq!(re.len(), n);
        debug_assert_eq!(im.len(), n);
        if n <= 1 {
            return;
        }
        for i in 0..n {
            let j = self.rev[i] as usize;
            if j > i {
                re.swap(i, j);
                im.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let step = n / len;
            let mut base = 0;
            while base < n {
                for j in 0..half {
                    let (wr, wi0) = (self.tw_re[j * step], self.tw_im[j * step]);
                    let wi = if inverse { -wi0 } else { wi0 };
                    let (a, b) = (base + j, base + j + half);
                    let tr = re[b] * wr - im[b] * wi;
                    let ti = re[b] * wi + im[b] * wr;
                    re[b] = re[a] - tr;
                    im[b] = im[a] - ti;
                    re[a] += tr;
                    im[a] += ti;
                }
                base += len;
            }
            len <<= 1;
        }
        if inverse {
            let s = 1.0 / n as f64;
            for v in re.iter_mut() {
                *v *= s;
            }
            for v in im.iter_mut() {
                *v *= s;
            }
        }
    }
}

impl Dft {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "DFT size must be >= 1");
        if n.is_power_of_two() {
            return Dft { n, plan: Plan::Pow2(Pow2Plan::new(n)) };
        }
        let m = next_pow2(2 * n - 1);
        let mut chirp_re = Vec::with_capacity(n);
        let mut chirp_im = Vec::with_capacity(n);
        for k in 0..n {
            // Reduce k^2 mod 2n in integers first; sin/cos of huge arguments
            // would otherwise lose the low bits that matter.
            let q = (k * k) % (2 * n);
            let ang = -core::f64::consts::PI * q as f64 / n as f64;
            chirp_re.push(ang.cos());
            chirp_im.push(ang.sin());
        }
        let mut bfft_re = vec![0.0; m];
        let mut bfft_im = vec![0.0; m];
        bfft_re[0] = chirp_re[0];
        bfft_im[0] = -chirp_im[0];
        for k in 1..n {
            bfft_re[k] = chirp_re[k];
            bfft_im[k] = -chirp_im[k];
            bfft_re[m - k] = chirp_re[k];
            bfft_im[m - k] = -chirp_im[k];
        }
        let pow2 = Pow2Plan::new(m);
        pow2.fft(&mut bfft_re, &mut bfft_im, false);
        Dft { n, plan: Plan::Bluestein { pow2, m, chirp_re, chirp_im, bfft_re, bfft_im } }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place forward DFT: `X[k] = sum_n x[n] exp(-2*pi*i*k*n/N)`.
    pub fn forward(&self, re: &mut [f64], im: &mut [f64]) {
        self.run(re, im, false);
    }

    /// In-place inverse DFT, including the `1/N` factor.
    pub fn inverse(&self, re: &mut [f64], im: &mut [f64]) {
        self.run(re, im, true);
    }

    fn run(&self, re: &mut [f64], im: &mut [f64], inverse: bool) {
        debug_assert_eq!(re.len(), self.n);
        debug_assert_eq!(im.len(), self.n);
        match &self.plan {
            Plan::Pow2(p) => p.fft(re, im, inverse),
            Plan::Bluestein { pow2, m, chirp_re, chirp_im, bfft_re, bfft_im } => {
                // inverse(x) = conj(forward(conj(x))) / n
                if inverse {
                    for v in im.iter_mut() {
                        *v = -*v;
                    }
                }
                let n = self.n;
                let mut ar = vec![0.0; *m];
                let mut ai = vec![0.0; *m];
                for k in 0..n {
                    ar[k] = re[k] * chirp_re[k] - im[k] * chirp_im[k];
                    ai[k] = re[k] * chirp_im[k] + im[k] * chirp_re[k];
                }
                pow2.fft(&mut ar, &mut ai, false);
                for k in 0..*m {
                    let r = ar[k] * bfft_re[k] - ai[k] * bfft_im[k];
                    let i = ar[k] * bfft_im[k] + ai[k] * bfft_re[k];
                    ar[k] = r;
                    ai[k] = i;
                }
                pow2.fft(&mut ar, &mut ai, true);
                for k in 0..n {
                    re[k] = ar[k] * chirp_re[k] - ai[k] * chirp_im[k];
                    im[k] = ar[k] * chirp_im[k] + ai[k] * chirp_re[k];
                }
                if inverse {
                    let s = 1.0 / n as f64;
                    for v in re.iter_mut() {
                        *v *= s;
                    }
                    for v in im.iter_mut() {
                        *v = -*v * s;
                    }
                }
            }
        }
    }
}

/// Forward DFT of a real signal. Returns full-length `(re, im)`.
pub fn dft_real(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut re = x.to_vec();
    let mut im = vec![0.0; x.len()];
    Dft::new(x.len()).forward(&mut re, &mut im);
    (re, im)
}
