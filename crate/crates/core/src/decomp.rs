//! Adaptive slab decomposition.
//!
//! The grid is linearized under a [`DimOrder`] and split into contiguous,
//! row-aligned index ranges, one per rank. The split degree adapts to the
//! rank count: with `np <= P1` (the outermost permuted length) each rank gets
//! whole outer planes (1-D form); with `P1 < np <= P1*P2` each rank gets
//! whole innermost rows (2-D form). Larger rank counts are rejected.

use std::ops::Range;

use thiserror::Error;

use crate::grid::{delinearize, Coord3, DimOrder, GridDims};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecompError {
    #[error(
        "{np} ranks exceed the {cap} row blocks available for {dims} under the {order} ordering"
    )]
    UnsupportedScale {
        np: usize,
        cap: usize,
        dims: GridDims,
        order: DimOrder,
    },
}

/// Identity of one rank within a world of `np`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankInfo {
    pub rank: usize,
    pub np: usize,
}

impl RankInfo {
    /// Panics if `rank >= np` or `np == 0`; both are programmer errors.
    pub fn new(rank: usize, np: usize) -> Self {
        assert!(np >= 1, "world must contain at least one rank");
        assert!(rank < np, "rank {rank} out of range for {np} ranks");
        Self { rank, np }
    }
}

/// Whether a decomposition splits along one or two leading dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SlabForm {
    OneD,
    TwoD,
}

impl std::fmt::Display for SlabForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SlabForm::OneD => "1d",
            SlabForm::TwoD => "2d",
        })
    }
}

/// The contiguous linear index range `[x_start, x_end]` a rank owns under a
/// given ordering. Slabs always contain whole innermost rows, so the local
/// 1-D transforms along that dimension never touch remote data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slab {
    pub order: DimOrder,
    pub x_start: usize,
    /// Inclusive end index. Only meaningful when `count > 0`.
    pub x_end: usize,
    pub count: usize,
    pub form: SlabForm,
}

impl Slab {
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// The owned indices as a half-open range.
    pub fn x_range(&self) -> Range<usize> {
        self.x_start..self.x_start + self.count
    }
}

/// Largest rank count the decomposition supports for `dims` under `order`.
pub fn max_ranks(dims: GridDims, order: DimOrder) -> usize {
    let [p1, p2, _] = order.permuted_lens(dims);
    p1 * p2
}

/// The linear index where rank `myid`'s block starts.
///
/// With `P1..P3` the permuted lengths this is `floor(P1*myid/np) * P2*P3`
/// when `np <= P1`, and `floor(P1*P2*myid/np) * P3` when `P1 < np <= P1*P2`.
/// `myid` may equal `np`, which yields the total point count.
pub fn boundary(
    dims: GridDims,
    order: DimOrder,
    np: usize,
    myid: usize,
) -> Result<usize, DecompError> {
    let [p1, p2, p3] = order.permuted_lens(dims);
    if np == 0 || np > p1 * p2 {
        return Err(DecompError::UnsupportedScale {
            np,
            cap: p1 * p2,
            dims,
            order,
        });
    }
    debug_assert!(myid <= np);
    if np <= p1 {
        Ok(p1 * myid / np * p2 * p3)
    } else {
        Ok(p1 * p2 * myid / np * p3)
    }
}

/// The slab owned by `rank` for `dims` linearized under `order`.
pub fn slab_of(dims: GridDims, order: DimOrder, rank: RankInfo) -> Result<Slab, DecompError> {
    let x_start = boundary(dims, order, rank.np, rank.rank)?;
    let next = boundary(dims, order, rank.np, rank.rank + 1)?;
    let [p1, _, _] = order.permuted_lens(dims);
    let form = if rank.np <= p1 {
        SlabForm::OneD
    } else {
        SlabForm::TwoD
    };
    debug_assert!(next > x_start, "block boundaries are strictly increasing");
    Ok(Slab {
        order,
        x_start,
        x_end: next.wrapping_sub(1),
        count: next - x_start,
        form,
    })
}

/// Starting and ending 3-D coordinates of a non-empty slab under its order.
pub fn slab_corners(slab: &Slab, dims: GridDims) -> (Coord3, Coord3) {
    debug_assert!(!slab.is_empty(), "corners of an empty slab are undefined");
    let start = delinearize(slab.order, dims, slab.x_start).expect("slab start in range");
    let end = delinearize(slab.order, dims, slab.x_end).expect("slab end in range");
    (start, end)
}
