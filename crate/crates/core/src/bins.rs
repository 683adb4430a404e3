//! Displacement-space discretizers.
//!
//! A grid covers a square (or cubic) region of displacement space centered
//! on zero and assigns every displacement vector an integer class label.
//! The grid side `n` is required to be odd so the center cell is the
//! stationary trajectory. Out-of-range displacements clamp to edge cells,
//! so labeling is total over finite inputs.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BinError {
    #[error("grid side must be odd and positive, got {0}")]
    EvenGridSide(usize),
    #[error("grid extent must be positive and finite, got {0}")]
    BadExtent(f64),
    #[error("non-finite displacement component: {0}")]
    NonFinite(f64),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: u32, classes: usize },
}

/// Clamped floor-convention cell index along one axis.
///
/// A displacement exactly on an interior cell edge belongs to the
/// higher-index cell.
fn axis_cell(n: usize, extent: f64, d: f64) -> Result<usize, BinError> {
    if !d.is_finite() {
        return Err(BinError::NonFinite(d));
    }
    let cell = extent / n as f64;
    let raw = ((d + extent / 2.0) / cell).floor();
    Ok(raw.clamp(0.0, (n - 1) as f64) as usize)
}

fn axis_center(n: usize, extent: f64, idx: usize) -> f64 {
    let cell = extent / n as f64;
    -extent / 2.0 + (idx as f64 + 0.5) * cell
}

fn check_grid(n: usize, extent: f64) -> Result<(), BinError> {
    if n == 0 || n.is_multiple_of(2) {
        return Err(BinError::EvenGridSide(n));
    }
    if !(extent.is_finite() && extent > 0.0) {
        return Err(BinError::BadExtent(extent));
    }
    Ok(())
}

/// `n x n` grid over a square of side `extent` (feet) in 2-D displacement
/// space. Labels are zero-based, `label = row * n + col` with `col` from
/// the x displacement and `row` from the y displacement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinGrid2D {
    n: usize,
    extent: f64,
}

impl BinGrid2D {
    pub fn new(n: usize, extent: f64) -> Result<Self, BinError> {
        check_grid(n, extent)?;
        Ok(Self { n, extent })
    }

    /// 11 x 11 grid of 1 ft cells, 121 player trajectory labels.
    pub fn players_default() -> Self {
        Self { n: 11, extent: 11.0 }
    }

    pub fn side(&self) -> usize {
        self.n
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn label_count(&self) -> usize {
        self.n * self.n
    }

    pub fn bin(&self, dx: f64, dy: f64) -> Result<u32, BinError> {
        let col = axis_cell(self.n, self.extent, dx)?;
        let row = axis_cell(self.n, self.extent, dy)?;
        Ok((row * self.n + col) as u32)
    }

    /// Geometric center of the labeled cell; `bin(center(l)) == l`.
    pub fn center(&self, label: u32) -> Result<(f64, f64), BinError> {
        if label as usize >= self.label_count() {
            return Err(BinError::LabelOutOfRange { label, classes: self.label_count() });
        }
        let row = label as usize / self.n;
        let col = label as usize % self.n;
        Ok((axis_center(self.n, self.extent, col), axis_center(self.n, self.extent, row)))
    }
}

/// `n x n x n` grid over a cube of side `extent` (feet) in 3-D displacement
/// space. `label = (zrow * n + row) * n + col`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinGrid3D {
    n: usize,
    extent: f64,
}

impl BinGrid3D {
    pub fn new(n: usize, extent: f64) -> Result<Self, BinError> {
        check_grid(n, extent)?;
        Ok(Self { n, extent })
    }

    /// 19 x 19 x 19 grid of 1 ft cells, 6,859 ball trajectory labels.
    pub fn ball_default() -> Self {
        Self { n: 19, extent: 19.0 }
    }

    pub fn side(&self) -> usize {
        self.n
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn label_count(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn bin(&self, dx: f64, dy: f64, dz: f64) -> Result<u32, BinError> {
        let col = axis_cell(self.n, self.extent, dx)?;
        let row = axis_cell(self.n, self.extent, dy)?;
        let zrow = axis_cell(self.n, self.extent, dz)?;
        Ok(((zrow * self.n + row) * self.n + col) as u32)
    }

    pub fn center(&self, label: u32) -> Result<(f64, f64, f64), BinError> {
        if label as usize >= self.label_count() {
            return Err(BinError::LabelOutOfRange { label, classes: self.label_count() });
        }
        let col = label as usize % self.n;
        let row = (label as usize / self.n) % self.n;
        let zrow = label as usize / (self.n * self.n);
        Ok((
            axis_center(self.n, self.extent, col),
            axis_center(self.n, self.extent, row),
            axis_center(self.n, self.extent, zrow),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute-force oracle: scan every cell and test membership directly,
    /// clamping out-of-range displacements to the nearest edge cell.
    fn oracle_axis(n: usize, extent: f64, d: f64) -> usize {
        let cell = extent / n as f64;
        let lo = -extent / 2.0;
        if d < lo {
            return 0;
        }
        for i in 0..n {
            let hi = lo + (i + 1) as f64 * cell;
            // floor convention: edge values belong to the higher cell
            if d < hi {
                return i;
            }
        }
        n - 1
    }

    #[test]
    fn center_cell_is_stationary() {
        let g = BinGrid2D::players_default();
        assert_eq!(g.bin(0.0, 0.0).unwrap(), 60);
        let b = BinGrid3D::ball_default();
        assert_eq!(b.bin(0.0, 0.0, 0.0).unwrap(), 3429);
        assert_eq!(3429, (9 * 19 + 9) * 19 + 9);
    }

    #[test]
    fn clamps_out_of_range() {
        let g = BinGrid2D::players_default();
        // col clamped to 10, row 5
        assert_eq!(g.bin(5.6, 0.0).unwrap(), 65);
        assert_eq!(oracle_axis(11, 11.0, 5.6), 10);
    }

    #[test]
    fn minimum_corner_is_label_zero() {
        let g = BinGrid2D::players_default();
        assert_eq!(g.bin(-5.5, -5.5).unwrap(), 0);
        let b = BinGrid3D::ball_default();
        assert_eq!(b.bin(-9.5, -9.5, -9.5).unwrap(), 0);
    }

    #[test]
    fn matches_cell_membership_oracle_3d() {
        let b = BinGrid3D::ball_default();
        let (dx, dy, dz) = (1.2, -0.7, 3.4);
        let expect = ((oracle_axis(19, 19.0, dz) * 19 + oracle_axis(19, 19.0, dy)) * 19
            + oracle_axis(19, 19.0, dx)) as u32;
        assert_eq!(b.bin(dx, dy, dz).unwrap(), expect);
    }

    #[test]
    fn interior_edges_round_up() {
        let g = BinGrid2D::players_default();
        // -4.5 sits exactly on the edge between cells 0 and 1
        assert_eq!(g.bin(-4.5, 0.0).unwrap(), 5 * 11 + 1);
    }

    #[test]
    fn centers_round_trip() {
        let g = BinGrid2D::players_default();
        assert_eq!(g.center(60).unwrap(), (0.0, 0.0));
        assert_eq!(g.center(0).unwrap(), (-5.0, -5.0));
        for label in 0..g.label_count() as u32 {
            let (x, y) = g.center(label).unwrap();
            assert_eq!(g.bin(x, y).unwrap(), label);
        }
        let b = BinGrid3D::ball_default();
        assert_eq!(b.center(3429).unwrap(), (0.0, 0.0, 0.0));
        for label in 0..b.label_count() as u32 {
            let (x, y, z) = b.center(label).unwrap();
            assert_eq!(b.bin(x, y, z).unwrap(), label);
        }
    }

    #[test]
    fn rejects_bad_grids_and_inputs() {
        assert_eq!(BinGrid2D::new(10, 11.0).unwrap_err(), BinError::EvenGridSide(10));
        assert_eq!(BinGrid2D::new(0, 11.0).unwrap_err(), BinError::EvenGridSide(0));
        assert!(matches!(BinGrid2D::new(11, 0.0), Err(BinError::BadExtent(_))));
        let g = BinGrid2D::players_default();
        assert!(matches!(g.bin(f64::NAN, 0.0), Err(BinError::NonFinite(_))));
        assert!(matches!(g.bin(0.0, f64::INFINITY), Err(BinError::NonFinite(_))));
        assert!(matches!(g.center(121), Err(BinError::LabelOutOfRange { .. })));
        let b = BinGrid3D::ball_default();
        assert!(matches!(b.center(6859), Err(BinError::LabelOutOfRange { .. })));
    }

    proptest! {
        #[test]
        fn labels_always_valid(dx in -100.0f64..100.0, dy in -100.0f64..100.0) {
            let g = BinGrid2D::players_default();
            let l = g.bin(dx, dy).unwrap();
            prop_assert!((l as usize) < g.label_count());
        }

        #[test]
        fn col_monotone_in_dx(dx1 in -5.5f64..5.5, dx2 in -5.5f64..5.5, dy in -5.5f64..5.5) {
            let g = BinGrid2D::players_default();
            let (lo, hi) = if dx1 <= dx2 { (dx1, dx2) } else { (dx2, dx1) };
            let c1 = g.bin(lo, dy).unwrap() % 11;
            let c2 = g.bin(hi, dy).unwrap() % 11;
            prop_assert!(c1 <= c2);
        }

        #[test]
        fn oracle_agreement_2d(dx in -8.0f64..8.0, dy in -8.0f64..8.0) {
            let g = BinGrid2D::players_default();
            let expect = (oracle_axis(11, 11.0, dy) * 11 + oracle_axis(11, 11.0, dx)) as u32;
            prop_assert_eq!(g.bin(dx, dy).unwrap(), expect);
        }
    }
}
