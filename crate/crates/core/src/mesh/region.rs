use crate::fields::{GridDesc, ScalarField, StaggeredVelocityField};
use crate::{Error, Result};

/// An axis-aligned window of background cells that translates with its own
/// grid velocity. Cell values inside the window live at the displaced
/// positions `center + offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct MovingRegion {
    /// First cell index of the window per axis.
    pub min: [usize; 2],
    /// One past the last cell index per axis.
    pub max: [usize; 2],
    /// Axes along which the window is allowed to move.
    pub axis_mask: [bool; 2],
    /// Sub-cell displacement, each component in `[-dx/2, dx/2)`.
    pub offset: [f64; 2],
    pub u_g: [f64; 2],
}

/// Minimum number of background cells between a window and the domain wall.
pub const WINDOW_MARGIN: usize = 2;

impl MovingRegion {
    pub fn new(min: [usize; 2], max: [usize; 2], axis_mask: [bool; 2], u_g: [f64; 2]) -> Self {
        let mut r = MovingRegion {
            min,
            max,
            axis_mask,
            offset: [0.0; 2],
            u_g,
        };
        for a in 0..2 {
            if !axis_mask[a] {
                r.u_g[a] = 0.0;
            }
        }
        r
    }

    #[inline]
    pub fn contains_cell(&self, i: usize, j: usize) -> bool {
        i >= self.min[0] && i < self.max[0] && j >= self.min[1] && j < self.max[1]
    }

    /// Cell lies on the outermost ring of the window.
    pub fn is_boundary_cell(&self, i: usize, j: usize) -> bool {
        self.contains_cell(i, j)
            && (i == self.min[0] || i + 1 == self.max[0] || j == self.min[1] || j + 1 == self.max[1])
    }

    /// Cell lies in the window grown by one cell on every side.
    pub fn halo_contains(&self, i: usize, j: usize) -> bool {
        i + 1 >= self.min[0] && i <= self.max[0] && j + 1 >= self.min[1] && j <= self.max[1]
    }

    fn check(&self, desc: &GridDesc, index: usize) -> Result<()> {
        let bad = |reason: String| Err(Error::InvalidRegion { index, reason });
        for a in 0..2 {
            if self.max[a] < self.min[a] + 2 {
                return bad(format!("window must span at least 2 cells on axis {a}"));
            }
            if self.min[a] < WINDOW_MARGIN || self.max[a] + WINDOW_MARGIN > desc.counts[a] {
                return bad(format!(
                    "window [{}, {}) on axis {a} needs {WINDOW_MARGIN} cells of margin in a grid of {}",
                    self.min[a], self.max[a], desc.counts[a]
                ));
            }
            if !(self.offset[a] >= -0.5 * desc.dx && self.offset[a] < 0.5 * desc.dx) {
                return bad(format!("offset {} on axis {a} outside [-dx/2, dx/2)", self.offset[a]));
            }
            if !self.axis_mask[a] && (self.offset[a] != 0.0 || self.u_g[a] != 0.0) {
                return bad(format!("axis {a} is fixed but has nonzero offset or velocity"));
            }
            if !self.u_g[a].is_finite() {
                return bad("grid velocity is not finite".into());
            }
        }
        Ok(())
    }

    fn halos_overlap(&self, other: &MovingRegion) -> bool {
        // halos are the windows grown by one cell each
        (0..2).all(|a| self.min[a] < other.max[a] + 2 && other.min[a] < self.max[a] + 2)
    }
}

/// Checks every region invariant, including pairwise separation of the
/// one-cell seam halos.
pub fn validate_regions(desc: &GridDesc, regions: &[MovingRegion]) -> Result<()> {
    for (n, r) in regions.iter().enumerate() {
        r.check(desc, n)?;
    }
    for a in 0..regions.len() {
        for b in a + 1..regions.len() {
            if regions[a].halos_overlap(&regions[b]) {
                return Err(Error::InvalidRegion {
                    index: b,
                    reason: format!("seam halo overlaps region {a}"),
                });
            }
        }
    }
    Ok(())
}

/// Advances the window by `u_g * dt` on its masked axes. Whole-cell parts of
/// the displacement shift the window indices so the offset stays in
/// `[-dx/2, dx/2)`; larger offsets would fold the corner seam elements. Returns the new region and the integer shift.
pub fn update_region_position(
    region: &MovingRegion,
    dt: f64,
    desc: &GridDesc,
    index: usize,
) -> Result<(MovingRegion, [i64; 2])> {
    let dx = desc.dx;
    let mut out = region.clone();
    let mut shift = [0i64; 2];
    for a in 0..2 {
        if !region.axis_mask[a] {
            continue;
        }
        let raw = region.offset[a] + region.u_g[a] * dt;
        let mut s = (raw / dx).round();
        let mut off = raw - s * dx;
        if off >= 0.5 * dx {
            off -= dx;
            s += 1.0;
        }
        if off < -0.5 * dx {
            off += dx;
            s -= 1.0;
        }
        shift[a] = s as i64;
        out.offset[a] = off;
        let lo = region.min[a] as i64 + shift[a];
        let hi = region.max[a] as i64 + shift[a];
        if lo < WINDOW_MARGIN as i64 || hi + WINDOW_MARGIN as i64 > desc.counts[a] as i64 {
            return Err(Error::RegionOutOfBounds { index, shift });
        }
        out.min[a] = lo as usize;
        out.max[a] = hi as usize;
    }
    Ok((out, shift))
}

/// Sets the grid velocity to the largest-magnitude face velocity among the
/// window's interior faces that touch a liquid cell, per masked axis.
pub fn update_region_velocity(region: &MovingRegion, u: &StaggeredVelocityField, phi: &ScalarField) -> MovingRegion {
    let mut out = region.clone();
    for axis in 0..2 {
        if !region.axis_mask[axis] {
            out.u_g[axis] = 0.0;
            continue;
        }
        let mut best = 0.0_f64;
        let (lo_i, lo_j) = if axis == 0 {
            (region.min[0] + 1, region.min[1])
        } else {
            (region.min[0], region.min[1] + 1)
        };
        for j in lo_j..region.max[1] {
            for i in lo_i..region.max[0] {
                let (ci, cj) = if axis == 0 { (i - 1, j) } else { (i, j - 1) };
                if phi.at(ci, cj) < 0.0 || phi.at(i, j) < 0.0 {
                    let v = u.at(axis, i, j);
                    if v.abs() > best.abs() {
                        best = v;
                    }
                }
            }
        }
        out.u_g[axis] = best;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn desc() -> GridDesc {
        GridDesc::new_2d(16, 16, 1.0, [0.0, 0.0]).unwrap()
    }

    #[test]
    fn zero_velocity_is_identity() {
        let r = MovingRegion::new([4, 4], [8, 8], [true, true], [0.0, 0.0]);
        let (out, shift) = update_region_position(&r, 0.3, &desc(), 0).unwrap();
        assert_eq!(out, r);
        assert_eq!(shift, [0, 0]);
    }

    #[test]
    fn offset_wraps_into_window_shift() {
        let mut r = MovingRegion::new([4, 4], [8, 8], [true, false], [0.2, 0.0]);
        r.offset = [0.4, 0.0];
        let (out, shift) = update_region_position(&r, 1.0, &desc(), 0).unwrap();
        assert_eq!(shift, [1, 0]);
        assert_eq!(out.min, [5, 4]);
        assert_eq!(out.max, [9, 8]);
        assert_relative_eq!(out.offset[0], -0.4, epsilon = 1e-12);
        assert_eq!(out.offset[1], 0.0);
    }

    #[test]
    fn negative_motion_shifts_down() {
        let r = MovingRegion::new([4, 4], [8, 8], [false, true], [0.0, -1.25]);
        let (out, shift) = update_region_position(&r, 1.0, &desc(), 0).unwrap();
        assert_eq!(shift, [0, -1]);
        assert_eq!(out.min, [4, 3]);
        assert_relative_eq!(out.offset[1], -0.25, epsilon = 1e-12);
    }

    #[test]
    fn leaving_margin_is_an_error() {
        let r = MovingRegion::new([10, 4], [14, 8], [true, false], [1.0, 0.0]);
        assert!(matches!(
            update_region_position(&r, 1.0, &desc(), 3),
            Err(Error::RegionOutOfBounds { index: 3, .. })
        ));
    }

    #[test]
    fn validation_rules() {
        let d = desc();
        let ok = MovingRegion::new([4, 4], [8, 8], [true, true], [0.0, 0.0]);
        assert!(validate_regions(&d, std::slice::from_ref(&ok)).is_ok());
        let edge = MovingRegion::new([1, 4], [8, 8], [true, true], [0.0, 0.0]);
        assert!(validate_regions(&d, &[edge]).is_err());
        let near = MovingRegion::new([9, 4], [13, 8], [true, true], [0.0, 0.0]);
        assert!(validate_regions(&d, &[ok.clone(), near]).is_err());
        let far = MovingRegion::new([10, 4], [14, 8], [true, true], [0.0, 0.0]);
        assert!(validate_regions(&d, &[ok, far]).is_ok());
    }

    #[test]
    fn grid_velocity_takes_largest_magnitude() {
        let d = desc();
        let r = MovingRegion::new([4, 4], [12, 12], [true, true], [0.0, 0.0]);
        let mut phi = ScalarField::new(d, 1.0);
        let mut u = StaggeredVelocityField::zeros(d);
        // no liquid: stays zero
        assert_eq!(update_region_velocity(&r, &u, &phi).u_g, [0.0, 0.0]);
        // blob A at x-velocity +1, blob B at -3
        for (cells, vx) in [((5..7), 1.0), ((9..11), -3.0)] {
            for i in cells {
                phi.set(i, 6, -1.0);
                u.set(0, i, 6, vx);
                u.set(0, i + 1, 6, vx);
                u.set(1, i, 6, -1.0);
                u.set(1, i, 7, -1.0);
            }
        }
        let out = update_region_velocity(&r, &u, &phi);
        assert_eq!(out.u_g, [-3.0, -1.0]);
        let masked = MovingRegion::new([4, 4], [12, 12], [false, true], [0.0, 0.0]);
        assert_eq!(update_region_velocity(&masked, &u, &phi).u_g, [0.0, -1.0]);
    }
}
