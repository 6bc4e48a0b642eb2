//! Grid geometry: dimension orderings and 3-D <-> 1-D coordinate translation.
//!
//! Every decomposition in this crate is defined over a *linearized* view of
//! the 3-D grid. A [`DimOrder`] fixes which axis is outermost, middle, and
//! innermost; [`linearize`]/[`delinearize`] convert between a 3-D coordinate
//! under that ordering and its row-major linear index.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use thiserror::Error;

/// Storage for complex samples: a flat buffer of interleaved re/im doubles.
pub type ComplexBuf = Vec<Complex64>;

/// Bytes occupied by one complex sample on the wire and in memory.
pub const POINT_BYTES: usize = std::mem::size_of::<Complex64>();

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GridError {
    #[error("grid dimensions must all be at least 1, got {0}x{1}x{2}")]
    EmptyDims(usize, usize, usize),
    #[error("grid {0}x{1}x{2} overflows the platform index type")]
    TooLarge(usize, usize, usize),
    #[error("coordinate ({i}, {j}, {k}) out of bounds for lengths {p1}x{p2}x{p3}")]
    CoordOutOfBounds {
        i: usize,
        j: usize,
        k: usize,
        p1: usize,
        p2: usize,
        p3: usize,
    },
    #[error("linear index {index} out of range for a grid of {total} points")]
    IndexOutOfRange { index: usize, total: usize },
    #[error("cannot parse '{0}' as dimensions (expected e.g. 4x6x8)")]
    Parse(String),
}

/// The three transform lengths along the a-, b-, and c-axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridDims {
    n1: usize,
    n2: usize,
    n3: usize,
}

impl GridDims {
    pub fn new(n1: usize, n2: usize, n3: usize) -> Result<Self, GridError> {
        if n1 == 0 || n2 == 0 || n3 == 0 {
            return Err(GridError::EmptyDims(n1, n2, n3));
        }
        n1.checked_mul(n2)
            .and_then(|p| p.checked_mul(n3))
            .ok_or(GridError::TooLarge(n1, n2, n3))?;
        Ok(Self { n1, n2, n3 })
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn n3(&self) -> usize {
        self.n3
    }

    /// Total number of grid points.
    pub fn total(&self) -> usize {
        self.n1 * self.n2 * self.n3
    }
}

impl fmt::Display for GridDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.n1, self.n2, self.n3)
    }
}

impl FromStr for GridDims {
    type Err = GridError;

    fn from_str(s: &str) -> Result<Self, GridError> {
        let mut it = s.split(['x', 'X']);
        let parse = |part: Option<&str>| -> Result<usize, GridError> {
            part.and_then(|p| p.trim().parse().ok())
                .ok_or_else(|| GridError::Parse(s.to_string()))
        };
        let (n1, n2, n3) = (parse(it.next())?, parse(it.next())?, parse(it.next())?);
        if it.next().is_some() {
            return Err(GridError::Parse(s.to_string()));
        }
        GridDims::new(n1, n2, n3)
    }
}

/// The dimension orderings used by the transpose pipeline.
///
/// An ordering lists the axes from outermost to innermost under row-major
/// linearization; e.g. under `Cab` the c-axis is outermost and the b-axis is
/// the contiguous innermost one. Only the three orderings the pipeline needs
/// are constructible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DimOrder {
    Abc,
    Cab,
    Cba,
}

impl DimOrder {
    pub const ALL: [DimOrder; 3] = [DimOrder::Abc, DimOrder::Cab, DimOrder::Cba];

    /// Grid lengths permuted into this ordering, outermost first.
    pub fn permuted_lens(self, dims: GridDims) -> [usize; 3] {
        match self {
            DimOrder::Abc => [dims.n1, dims.n2, dims.n3],
            DimOrder::Cab => [dims.n3, dims.n1, dims.n2],
            DimOrder::Cba => [dims.n3, dims.n2, dims.n1],
        }
    }

    /// Length of the innermost (contiguous) dimension.
    pub fn inner_len(self, dims: GridDims) -> usize {
        self.permuted_lens(dims)[2]
    }

    /// Map a coordinate under this ordering to `[a, b, c]` axis indices.
    pub fn to_axes(self, c: Coord3) -> [usize; 3] {
        match self {
            DimOrder::Abc => [c.i, c.j, c.k],
            DimOrder::Cab => [c.j, c.k, c.i],
            DimOrder::Cba => [c.k, c.j, c.i],
        }
    }

    /// Inverse of [`DimOrder::to_axes`].
    pub fn from_axes(self, axes: [usize; 3]) -> Coord3 {
        let [a, b, c] = axes;
        match self {
            DimOrder::Abc => Coord3::new(a, b, c),
            DimOrder::Cab => Coord3::new(c, a, b),
            DimOrder::Cba => Coord3::new(c, b, a),
        }
    }
}

impl fmt::Display for DimOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DimOrder::Abc => "abc",
            DimOrder::Cab => "cab",
            DimOrder::Cba => "cba",
        })
    }
}

/// A 0-based 3-D coordinate relative to the active [`DimOrder`]: `i` runs
/// along the outermost permuted dimension, `k` along the innermost.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Coord3 {
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

impl Coord3 {
    pub fn new(i: usize, j: usize, k: usize) -> Self {
        Self { i, j, k }
    }
}

/// Row-major linear index of `c` under `order`.
pub fn linearize(order: DimOrder, dims: GridDims, c: Coord3) -> Result<usize, GridError> {
    let [p1, p2, p3] = order.permuted_lens(dims);
    if c.i >= p1 || c.j >= p2 || c.k >= p3 {
        return Err(GridError::CoordOutOfBounds {
            i: c.i,
            j: c.j,
            k: c.k,
            p1,
            p2,
            p3,
        });
    }
    Ok(c.i * p2 * p3 + c.j * p3 + c.k)
}

/// Inverse of [`linearize`].
pub fn delinearize(order: DimOrder, dims: GridDims, x: usize) -> Result<Coord3, GridError> {
    let total = dims.total();
    if x >= total {
        return Err(GridError::IndexOutOfRange { index: x, total });
    }
    let [_, p2, p3] = order.permuted_lens(dims);
    let i = x / (p2 * p3);
    let rem = x - i * p2 * p3;
    let j = rem / p3;
    let k = rem - j * p3;
    Ok(Coord3::new(i, j, k))
}

/// Linear index under `dst` of the grid point that sits at linear index `x`
/// under `src`. Callers guarantee `x < dims.total()`.
pub(crate) fn relinearize(src: DimOrder, dst: DimOrder, dims: GridDims, x: usize) -> usize {
    let [_, s2, s3] = src.permuted_lens(dims);
    let i = x / (s2 * s3);
    let rem = x - i * s2 * s3;
    let c = src.to_axes(Coord3::new(i, rem / s3, rem % s3));
    let d = dst.from_axes(c);
    let [_, d2, d3] = dst.permuted_lens(dims);
    d.i * d2 * d3 + d.j * d3 + d.k
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dims(n1: usize, n2: usize, n3: usize) -> GridDims {
        GridDims::new(n1, n2, n3).unwrap()
    }

    #[test]
    fn linearize_abc_matches_row_major() {
        let d = dims(4, 4, 4);
        assert_eq!(linearize(DimOrder::Abc, d, Coord3::new(1, 2, 3)).unwrap(), 27);
        assert_eq!(linearize(DimOrder::Abc, d, Coord3::new(0, 0, 0)).unwrap(), 0);
    }

    #[test]
    fn linearize_cba_uses_permuted_lengths() {
        // 2x3x4 grid under cba has permuted lengths (4, 3, 2); the point with
        // c=1, b=2, a=0 sits at 1*6 + 2*2 + 0 = 10.
        let d = dims(2, 3, 4);
        assert_eq!(
            linearize(DimOrder::Cba, d, Coord3::new(1, 2, 0)).unwrap(),
            10
        );
    }

    #[test]
    fn delinearize_abc_examples() {
        let d = dims(4, 4, 4);
        assert_eq!(
            delinearize(DimOrder::Abc, d, 27).unwrap(),
            Coord3::new(1, 2, 3)
        );
        assert_eq!(
            delinearize(DimOrder::Abc, d, 0).unwrap(),
            Coord3::new(0, 0, 0)
        );
        assert_eq!(
            delinearize(DimOrder::Abc, d, 24).unwrap(),
            Coord3::new(1, 2, 0)
        );
    }

    #[test]
    fn out_of_bounds_coordinate_is_rejected() {
        let d = dims(4, 4, 4);
        assert!(matches!(
            linearize(DimOrder::Abc, d, Coord3::new(4, 0, 0)),
            Err(GridError::CoordOutOfBounds { .. })
        ));
        assert!(matches!(
            delinearize(DimOrder::Abc, d, 64),
            Err(GridError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn zero_or_overflowing_dims_are_rejected() {
        assert!(GridDims::new(0, 4, 4).is_err());
        assert!(GridDims::new(usize::MAX, 2, 2).is_err());
    }

    #[test]
    fn parse_dims_round_trips() {
        let d: GridDims = "4x6x8".parse().unwrap();
        assert_eq!((d.n1(), d.n2(), d.n3()), (4, 6, 8));
        assert_eq!(d.to_string(), "4x6x8");
        assert!("4x6".parse::<GridDims>().is_err());
        assert!("4x6x8x2".parse::<GridDims>().is_err());
        assert!("axbxc".parse::<GridDims>().is_err());
    }

    #[test]
    fn bijectivity_on_small_grid() {
        let d = dims(3, 4, 5);
        for order in DimOrder::ALL {
            let mut seen = vec![false; d.total()];
            let [p1, p2, p3] = order.permuted_lens(d);
            for i in 0..p1 {
                for j in 0..p2 {
                    for k in 0..p3 {
                        let x = linearize(order, d, Coord3::new(i, j, k)).unwrap();
                        assert!(!seen[x], "index {x} hit twice under {order}");
                        seen[x] = true;
                    }
                }
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn monotone_in_lexicographic_coordinate_order() {
        let d = dims(2, 3, 4);
        for order in DimOrder::ALL {
            let [p1, p2, p3] = order.permuted_lens(d);
            let mut prev = None;
            for i in 0..p1 {
                for j in 0..p2 {
                    for k in 0..p3 {
                        let x = linearize(order, d, Coord3::new(i, j, k)).unwrap();
                        if let Some(p) = prev {
                            assert!(x == p + 1, "linear index must advance by one");
                        }
                        prev = Some(x);
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn round_trip_all_orders(
            n1 in 1usize..=8, n2 in 1usize..=8, n3 in 1usize..=8,
            sel in 0usize..512,
        ) {
            let d = dims(n1, n2, n3);
            for order in DimOrder::ALL {
                let x = sel % d.total();
                let c = delinearize(order, d, x).unwrap();
                prop_assert_eq!(linearize(order, d, c).unwrap(), x);
                // axis mapping must also round-trip
                prop_assert_eq!(order.from_axes(order.to_axes(c)), c);
            }
        }

        #[test]
        fn relinearize_agrees_with_axis_mapping(
            n1 in 1usize..=6, n2 in 1usize..=6, n3 in 1usize..=6,
            sel in 0usize..216,
        ) {
            let d = dims(n1, n2, n3);
            let x = sel % d.total();
            for src in DimOrder::ALL {
                for dst in DimOrder::ALL {
                    let c = delinearize(src, d, x).unwrap();
                    let expect = linearize(dst, d, dst.from_axes(src.to_axes(c))).unwrap();
                    prop_assert_eq!(relinearize(src, dst, d, x), expect);
                }
            }
        }
    }
}
