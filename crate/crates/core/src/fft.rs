//! Radix-2 FFT used by the frequency-domain convolution path.

use alloc::vec::Vec;

use num_complex::Complex64;

/// In-place iterative Cooley-Tukey transform of one power-of-two length.
#[derive(Debug, Clone)]
pub struct Radix2 {
    len: usize,
    twiddles: Vec<Complex64>,
    bit_rev: Vec<usize>,
}

impl Radix2 {
    /// Plan for `len`, which must be a power of two.
    pub fn new(len: usize) -> Self {
        assert!(len.is_power_of_two(), "FFT length {len} is not a power of two");
        let bits = len.trailing_zeros();
        let bit_rev = (0..len)
            .map(|i| {
                if bits == 0 {
                    0
                } else {
                    i.reverse_bits() >> (usize::BITS - bits)
                }
            })
            .collect();
        let twiddles = (0..len / 2)
            .map(|k| {
                let angle = -2.0 * core::f64::consts::PI * k as f64 / len as f64;
                Complex64::new(libm::cos(angle), libm::sin(angle))
            })
            .collect();
        Self { len, twiddles, bit_rev }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Forward transform (no scaling).
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.run(buf, false);
    }

    /// Inverse transform, scaled by `1 / len`.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.run(buf, true);
        let scale = 1.0 / self.len as f64;
        buf.iter_mut().for_each(|v| *v *= scale);
    }

    fn run(&self, buf: &mut [Complex64], inverse: bool) {
        debug_assert_eq!(buf.len(), self.len);
        for i in 0..self.len {
            let j = self.bit_rev[i];
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut half = 1;
        while half < self.len {
            let stride = self.len / (2 * half);
            for start in (0..self.len).step_by(2 * half) {
                for k in 0..half {
                    let mut t = self.twiddles[k * stride];
                    if inverse {
                        t = t.conj();
                    }
                    let a = buf[start + k];
                    let b = buf[start + k + half] * t;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            half *= 2;
        }
    }
}

/// Row-major 2D transform over a `rows`x`cols` grid of powers of two.
#[derive(Debug, Clone)]
pub struct Fft2d {
    rows: Radix2,
    cols: Radix2,
}

impl Fft2d {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows: Radix2::new(rows),
            cols: Radix2::new(cols),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows.len(), self.cols.len())
    }

    pub fn forward(&self, grid: &mut [Complex64]) {
        self.apply(grid, false);
    }

    pub fn inverse(&self, grid: &mut [Complex64]) {
        self.apply(grid, true);
    }

    fn apply(&self, grid: &mut [Complex64], inverse: bool) {
        let (rows, cols) = self.shape();
        debug_assert_eq!(grid.len(), rows * cols);
        for row in grid.chunks_exact_mut(cols) {
            if inverse {
                self.cols.inverse(row);
            } else {
                self.cols.forward(row);
            }
        }
        let mut column = alloc::vec![Complex64::new(0.0, 0.0); rows];
        for c in 0..cols {
            for r in 0..rows {
                column[r] = grid[r * cols + c];
            }
            if inverse {
                self.rows.inverse(&mut column);
            } else {
                self.rows.forward(&mut column);
            }
            for r in 0..rows {
                grid[r * cols + c] = column[r];
            }
        }
    }
}
