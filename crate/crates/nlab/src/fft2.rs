//! Zero-padded 2D linear convolution with a fixed kernel through complex FFTs.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Scalar;

/// Smallest `p >= n` whose prime factors are 2, 3, 5 or 7.
pub fn good_size(n: usize) -> usize {
    let mut p = n.max(1);
    loop {
        let mut q = p;
        for f in [2, 3, 5, 7] {
            while q % f == 0 {
                q /= f;
            }
        }
        if q == 1 {
            return p;
        }
        p += 1;
    }
}

pub struct Convolver<T: Scalar> {
    n: usize,
    m: usize,
    p: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    /// Kernel spectrum in the transposed layout produced by `forward_transform`.
    spectrum: Vec<Complex<T>>,
}

impl<T: Scalar> std::fmt::Debug for Convolver<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "Convolver {{ n: {}, m: {}, p: {} }}",
            self.n, self.m, self.p
        )
    }
}

impl<T: Scalar> Convolver<T> {
    /// `kernel` is the `(2m+1)^2` row-major weight array, `n` the grid size.
    pub fn new(kernel: &[T], m: usize, n: usize) -> Self {
        let p = good_size(n + 2 * m);
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(p);
        let inverse = planner.plan_fft_inverse(p);
        let mut c = Convolver {
            n,
            m,
            p,
            forward,
            inverse,
            spectrum: Vec::new(),
        };
        let w = 2 * m + 1;
        let mut buf = vec![Complex::new(T::zero(), T::zero()); p * p];
        // offset o goes to -o so the cyclic product computes sum_o w(o) input(x + o)
        for a in 0..w {
            for b in 0..w {
                let i = (p + m - a) % p;
                let j = (p + m - b) % p;
                buf[i * p + j] = Complex::new(kernel[a * w + b], T::zero());
            }
        }
        c.forward_transform(&mut buf);
        let scale = T::one() / T::idx(p * p);
        for z in buf.iter_mut() {
            *z = *z * scale;
        }
        c.spectrum = buf;
        c
    }

    /// Row transforms, transpose, row transforms: the spectrum ends up transposed.
    fn forward_transform(&self, buf: &mut [Complex<T>]) {
        let mut scratch =
            vec![Complex::new(T::zero(), T::zero()); self.forward.get_inplace_scratch_len()];
        self.forward.process_with_scratch(buf, &mut scratch);
        transpose(buf, self.p);
        self.forward.process_with_scratch(buf, &mut scratch);
    }

    /// `out[x] = sum_o w(o) input[x + o]`, with `input` taken as zero outside the grid.
    pub fn convolve(&self, input: &[T]) -> Vec<T> {
        let (n, p) = (self.n, self.p);
        let mut buf = vec![Complex::new(T::zero(), T::zero()); p * p];
        for i in 0..n {
            for j in 0..n {
                buf[i * p + j] = Complex::new(input[i * n + j], T::zero());
            }
        }
        self.forward_transform(&mut buf);
        for (z, k) in buf.iter_mut().zip(&self.spectrum) {
            *z = *z * *k;
        }
        // the forward transform left the data transposed; undo it symmetrically
        transpose(&mut buf, p);
        let mut scratch =
            vec![Complex::new(T::zero(), T::zero()); self.inverse.get_inplace_scratch_len()];
        self.inverse.process_with_scratch(&mut buf, &mut scratch);
        transpose(&mut buf, p);
        self.inverse.process_with_scratch(&mut buf, &mut scratch);
        transpose(&mut buf, p);
        let mut out = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = buf[i * p + j].re;
            }
        }
        out
    }
}

fn transpose<T: Copy>(buf: &mut [T], p: usize) {
    for i in 0..p {
        for j in (i + 1)..p {
            buf.swap(i * p + j, j * p + i);
        }
    }
}
