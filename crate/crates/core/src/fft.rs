//! Self-contained 1-D complex-to-complex FFT engine.
//!
//! Any length n >= 1 is supported. Power-of-two lengths use an iterative
//! radix-2 kernel; other composites peel off their smallest prime factor with
//! a generic mixed-radix step; lengths whose smallest prime factor is large
//! (including large primes themselves) fall back to the Bluestein chirp-z
//! transform over a padded power-of-two convolution.
//!
//! Convention: `Forward` computes `X[k] = sum_j x[j] * exp(-2*pi*i*j*k/n)`;
//! `Backward` uses the opposite sign and applies no normalization, so
//! forward followed by backward scales by n.

use std::f64::consts::TAU;

use num_complex::Complex64;
use thiserror::Error;

use crate::grid::ComplexBuf;

/// Smallest prime factor above which the chirp-z fallback wins over the
/// generic O(r^2) mixed-radix butterfly.
const MAX_BUTTERFLY_RADIX: usize = 31;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FftError {
    #[error("buffer holds {got} points, expected a multiple of the transform length {n}")]
    LengthMismatch { n: usize, got: usize },
    #[error("scratch buffer holds {got} points, plan needs {need}")]
    ScratchTooSmall { need: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FftDirection {
    Forward,
    Backward,
}

impl FftDirection {
    fn sign(self) -> f64 {
        match self {
            FftDirection::Forward => -1.0,
            FftDirection::Backward => 1.0,
        }
    }
}

fn root(sign: f64, num: usize, den: usize) -> Complex64 {
    Complex64::from_polar(1.0, sign * TAU * num as f64 / den as f64)
}

#[derive(Debug, Clone)]
enum Algo {
    /// n == 1.
    Identity,
    /// Direct DFT via a root table; used for small prime lengths.
    Direct { roots: Vec<Complex64> },
    /// Iterative radix-2, in place; `roots` holds n/2 twiddles.
    Radix2 { roots: Vec<Complex64> },
    /// n = radix * m with a small prime radix.
    MixedRadix {
        radix: usize,
        m: usize,
        /// W_n^(l*q), flattened as [l * m + q].
        cross: Vec<Complex64>,
        /// W_radix^t for t < radix.
        radix_roots: Vec<Complex64>,
        sub: Box<FftPlan1D>,
    },
    /// Chirp-z over a power-of-two convolution of length `m`.
    Bluestein {
        m: usize,
        chirp: Vec<Complex64>,
        /// Forward transform of the symmetric chirp kernel, length m.
        kernel: Vec<Complex64>,
        fwd: Box<FftPlan1D>,
        inv: Box<FftPlan1D>,
    },
}

/// Reusable plan for 1-D transforms of a fixed length and direction.
/// Applying a plan never mutates it; scratch space is supplied by the caller
/// so repeated executions allocate nothing.
#[derive(Debug, Clone)]
pub struct FftPlan1D {
    n: usize,
    direction: FftDirection,
    algo: Algo,
    scratch_len: usize,
}

fn smallest_prime_factor(n: usize) -> usize {
    if n.is_multiple_of(2) {
        return 2;
    }
    let mut p = 3;
    while p * p <= n {
        if n.is_multiple_of(p) {
            return p;
        }
        p += 2;
    }
    n
}

impl FftPlan1D {
    pub fn new(n: usize, direction: FftDirection) -> Self {
        assert!(n >= 1, "transform length must be at least 1");
        let sign = direction.sign();
        let (algo, scratch_len) = if n == 1 {
            (Algo::Identity, 0)
        } else if n.is_power_of_two() {
            let roots = (0..n / 2).map(|k| root(sign, k, n)).collect();
            (Algo::Radix2 { roots }, 0)
        } else {
            let p = smallest_prime_factor(n);
            if p > MAX_BUTTERFLY_RADIX {
                Self::bluestein(n, direction)
            } else if p == n {
                let roots = (0..n).map(|k| root(sign, k, n)).collect();
                (Algo::Direct { roots }, n)
            } else {
                let m = n / p;
                let sub = Box::new(FftPlan1D::new(m, direction));
                let mut cross = Vec::with_capacity(n);
                for l in 0..p {
                    for q in 0..m {
                        cross.push(root(sign, (l * q) % n, n));
                    }
                }
                let radix_roots = (0..p).map(|t| root(sign, t, p)).collect();
                let scratch = n + sub.scratch_len;
                (
                    Algo::MixedRadix {
                        radix: p,
                        m,
                        cross,
                        radix_roots,
                        sub,
                    },
                    scratch,
                )
            }
        };
        Self {
            n,
            direction,
            algo,
            scratch_len,
        }
    }

    fn bluestein(n: usize, direction: FftDirection) -> (Algo, usize) {
        let m = (2 * n - 1).next_power_of_two();
        let sign = direction.sign();
        // chirp[j] = exp(sign * pi * i * j^2 / n); exponents reduced mod 2n.
        let chirp: Vec<Complex64> = (0..n)
            .map(|j| root(sign / 2.0, (j * j) % (2 * n), n))
            .collect();
        let fwd = Box::new(FftPlan1D::new(m, FftDirection::Forward));
        let inv = Box::new(FftPlan1D::new(m, FftDirection::Backward));
        let mut kernel = vec![Complex64::new(0.0, 0.0); m];
        for j in 0..n {
            let b = chirp[j].conj();
            kernel[j] = b;
            if j > 0 {
                kernel[m - j] = b;
            }
        }
        let mut none: [Complex64; 0] = [];
        fwd.process(&mut kernel, &mut none)
            .expect("padded kernel transform");
        (
            Algo::Bluestein {
                m,
                chirp,
                kernel,
                fwd,
                inv,
            },
            m,
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn direction(&self) -> FftDirection {
        self.direction
    }

    /// Scratch points [`FftPlan1D::process`] needs.
    pub fn scratch_len(&self) -> usize {
        self.scratch_len
    }

    /// Transform one row of length n in place.
    pub fn process(&self, row: &mut [Complex64], scratch: &mut [Complex64]) -> Result<(), FftError> {
        if row.len() != self.n {
            return Err(FftError::LengthMismatch {
                n: self.n,
                got: row.len(),
            });
        }
        if scratch.len() < self.scratch_len {
            return Err(FftError::ScratchTooSmall {
                need: self.scratch_len,
                got: scratch.len(),
            });
        }
        self.run(row, scratch);
        Ok(())
    }

    /// Transform `data.len() / n` contiguous rows independently, in place.
    pub fn process_rows(
        &self,
        data: &mut [Complex64],
        scratch: &mut [Complex64],
    ) -> Result<(), FftError> {
        if !data.len().is_multiple_of(self.n) {
            return Err(FftError::LengthMismatch {
                n: self.n,
                got: data.len(),
            });
        }
        if scratch.len() < self.scratch_len {
            return Err(FftError::ScratchTooSmall {
                need: self.scratch_len,
                got: scratch.len(),
            });
        }
        for row in data.chunks_exact_mut(self.n) {
            self.run(row, scratch);
        }
        Ok(())
    }

    fn run(&self, row: &mut [Complex64], scratch: &mut [Complex64]) {
        match &self.algo {
            Algo::Identity => {}
            Algo::Direct { roots } => {
                let n = self.n;
                let (work, _) = scratch.split_at_mut(n);
                work.copy_from_slice(row);
                for (k, out) in row.iter_mut().enumerate() {
                    let mut acc = work[0];
                    for (j, &w) in work.iter().enumerate().skip(1) {
                        acc += w * roots[(j * k) % n];
                    }
                    *out = acc;
                }
            }
            Algo::Radix2 { roots } => radix2_in_place(row, roots),
            Algo::MixedRadix {
                radix,
                m,
                cross,
                radix_roots,
                sub,
            } => {
                let (r, m) = (*radix, *m);
                let n = self.n;
                let (work, rest) = scratch.split_at_mut(n);
                // Decimate in time: residue-l subsequence becomes contiguous.
                for l in 0..r {
                    for q in 0..m {
                        work[l * m + q] = row[q * r + l];
                    }
                }
                for l in 0..r {
                    sub.run(&mut work[l * m..(l + 1) * m], rest);
                }
                // Recombine: X[q + s*m] = sum_l W_r^(l*s) * W_n^(l*q) * Y_l[q].
                let mut tmp = [Complex64::new(0.0, 0.0); MAX_BUTTERFLY_RADIX];
                for q in 0..m {
                    for l in 0..r {
                        tmp[l] = work[l * m + q] * cross[l * m + q];
                    }
                    for s in 0..r {
                        let mut acc = tmp[0];
                        for (l, &t) in tmp.iter().enumerate().take(r).skip(1) {
                            acc += t * radix_roots[(l * s) % r];
                        }
                        row[q + s * m] = acc;
                    }
                }
            }
            Algo::Bluestein {
                m,
                chirp,
                kernel,
                fwd,
                inv,
            } => {
                let n = self.n;
                let (work, _) = scratch.split_at_mut(*m);
                for j in 0..n {
                    work[j] = row[j] * chirp[j];
                }
                work[n..].fill(Complex64::new(0.0, 0.0));
                fwd.run(work, &mut []);
                for (w, &k) in work.iter_mut().zip(kernel.iter()) {
                    *w *= k;
                }
                inv.run(work, &mut []);
                let scale = 1.0 / *m as f64;
                for k in 0..n {
                    row[k] = work[k] * chirp[k] * scale;
                }
            }
        }
    }
}

fn radix2_in_place(row: &mut [Complex64], roots: &[Complex64]) {
    let n = row.len();
    // Bit-reversal permutation.
    let mut j = 0;
    for i in 0..n {
        if i < j {
            row.swap(i, j);
        }
        let mut bit = n >> 1;
        while bit > 0 && j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
    }
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let step = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let w = roots[k * step];
                let u = row[start + k];
                let v = row[start + k + half] * w;
                row[start + k] = u + v;
                row[start + k + half] = u - v;
            }
        }
        len <<= 1;
    }
}

/// Transform one row, returning a fresh buffer. Allocates; hot paths use
/// [`FftPlan1D::process`] with caller-owned scratch instead.
pub fn fft1d(plan: &FftPlan1D, row: &ComplexBuf) -> Result<ComplexBuf, FftError> {
    let mut out = row.clone();
    let mut scratch = vec![Complex64::new(0.0, 0.0); plan.scratch_len()];
    plan.process(&mut out, &mut scratch)?;
    Ok(out)
}

/// Transform `row_count` contiguous rows, returning a fresh buffer.
pub fn fft_rows(
    plan: &FftPlan1D,
    slab_data: &ComplexBuf,
    row_count: usize,
) -> Result<ComplexBuf, FftError> {
    if slab_data.len() != row_count * plan.n() {
        return Err(FftError::LengthMismatch {
            n: plan.n(),
            got: slab_data.len(),
        });
    }
    let mut out = slab_data.clone();
    let mut scratch = vec![Complex64::new(0.0, 0.0); plan.scratch_len()];
    plan.process_rows(&mut out, &mut scratch)?;
    Ok(out)
}
