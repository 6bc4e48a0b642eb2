//! Independent references the pipeline is checked against: a direct
//! triple-sum 3-D DFT and a permutation-generic relocation counter. Both are
//! deliberately written without touching the plan or engine code paths.

use std::f64::consts::TAU;

use num_complex::Complex64;
use slabfft::GridDims;

/// Default ceiling on `dims.total()` for the O(total^2) reference DFT.
pub const DEFAULT_ORACLE_CAP: usize = 4096;

/// Compensated complex accumulator; keeps the brute-force sum accurate to a
/// few ulps so it can serve as a 1e-10 oracle even on the largest test grids.
#[derive(Default, Clone, Copy)]
struct KahanSum {
    sum_re: f64,
    sum_im: f64,
    c_re: f64,
    c_im: f64,
}

impl KahanSum {
    fn add(&mut self, v: Complex64) {
        let y = v.re - self.c_re;
        let t = self.sum_re + y;
        self.c_re = (t - self.sum_re) - y;
        self.sum_re = t;

        let y = v.im - self.c_im;
        let t = self.sum_im + y;
        self.c_im = (t - self.sum_im) - y;
        self.sum_im = t;
    }

    fn value(&self) -> Complex64 {
        Complex64::new(self.sum_re, self.sum_im)
    }
}

fn twiddle_table(n: usize) -> Vec<Complex64> {
    // table[k * n + j] = exp(-2 pi i k j / n)
    (0..n * n)
        .map(|idx| {
            let (k, j) = (idx / n, idx % n);
            Complex64::from_polar(1.0, -TAU * ((k * j) % n) as f64 / n as f64)
        })
        .collect()
}

/// Forward 3-D DFT by direct triple-sum evaluation, O(total^2) work:
/// `X[k1,k2,k3] = sum x[a,b,c] exp(-2 pi i (k1 a/N1 + k2 b/N2 + k3 c/N3))`.
/// Input is in abc linear order; output is in cba linear order, matching the
/// layout the engine gathers onto rank 0.
pub fn dft3_naive(dims: GridDims, input: &[Complex64]) -> Vec<Complex64> {
    let (n1, n2, n3) = (dims.n1(), dims.n2(), dims.n3());
    assert_eq!(input.len(), dims.total());
    let w1 = twiddle_table(n1);
    let w2 = twiddle_table(n2);
    let w3 = twiddle_table(n3);

    let mut out = vec![Complex64::new(0.0, 0.0); dims.total()];
    for k1 in 0..n1 {
        for k2 in 0..n2 {
            for k3 in 0..n3 {
                let mut acc = KahanSum::default();
                for a in 0..n1 {
                    let wa = w1[k1 * n1 + a];
                    for b in 0..n2 {
                        let wab = wa * w2[k2 * n2 + b];
                        let row = &input[(a * n2 + b) * n3..(a * n2 + b + 1) * n3];
                        for (c, &x) in row.iter().enumerate() {
                            acc.add(x * wab * w3[k3 * n3 + c]);
                        }
                    }
                }
                out[(k3 * n2 + k2) * n1 + k1] = acc.value();
            }
        }
    }
    out
}

pub fn max_abs_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Axis permutation, outermost first: index 0/1/2 names the a/b/c axis.
pub type AxisPerm = [usize; 3];

pub const PERM_ABC: AxisPerm = [0, 1, 2];
pub const PERM_CAB: AxisPerm = [2, 0, 1];
pub const PERM_BCA: AxisPerm = [1, 2, 0];
pub const PERM_CBA: AxisPerm = [2, 1, 0];

/// Points that change their owning rank between the `src` and `dst`
/// decompositions, re-deriving the row-block boundaries from scratch.
/// Returns `None` when `np` exceeds either decomposition's capacity.
pub fn relocated_points(
    dims: GridDims,
    np: usize,
    src: AxisPerm,
    dst: AxisPerm,
) -> Option<usize> {
    let lens = [dims.n1(), dims.n2(), dims.n3()];
    let owner = |perm: AxisPerm, axes: [usize; 3]| -> Option<usize> {
        let [l1, l2, l3] = [lens[perm[0]], lens[perm[1]], lens[perm[2]]];
        if np > l1 * l2 {
            return None;
        }
        let x = axes[perm[0]] * l2 * l3 + axes[perm[1]] * l3 + axes[perm[2]];
        let start = |m: usize| {
            if np <= l1 {
                l1 * m / np * l2 * l3
            } else {
                l1 * l2 * m / np * l3
            }
        };
        (0..np).rev().find(|&m| start(m) <= x)
    };
    let mut moved = 0;
    for a in 0..lens[0] {
        for b in 0..lens[1] {
            for c in 0..lens[2] {
                let axes = [a, b, c];
                if owner(src, axes)? != owner(dst, axes)? {
                    moved += 1;
                }
            }
        }
    }
    Some(moved)
}

/// Total wire bytes of a transpose chain: 16 bytes per relocated point,
/// summed over consecutive decomposition pairs.
pub fn chain_relocated_bytes(dims: GridDims, np: usize, chain: &[AxisPerm]) -> Option<u64> {
    let mut total = 0u64;
    for pair in chain.windows(2) {
        total += 16 * relocated_points(dims, np, pair[0], pair[1])? as u64;
    }
    Some(total)
}
