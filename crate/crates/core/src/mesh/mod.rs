//! Moving windows, cell labels and the finite-element seam band.
//!
//! Geometry of one window (cells `[i0, i1) x [j0, j1)`, offset `o`):
//!
//! - moving nodes are window cell centers shifted by `o`;
//! - the seam band is every dual quad (four adjacent cell centers) that mixes
//!   moving and static nodes. It fills the annulus between the outer square
//!   `S_out` through the surrounding static centers and the inner square
//!   `S_in` through the displaced boundary centers of the window;
//! - finite volumes cover everything else: static cells outside `S_out` and
//!   moving cells inside `S_in`.
//!
//! Control volumes are clipped against these squares so the FVM and FEM
//! integration domains never overlap.

mod element;
mod region;

pub use element::{eval_point, gauss_points, jacobian, map_point, shape, shape_grad_unit, Element, QuadPoint, CORNERS};
pub use region::{update_region_position, update_region_velocity, validate_regions, MovingRegion, WINDOW_MARGIN};

use crate::fields::{GridDesc, ScalarField};
use crate::{Result, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellLabel {
    FvmStatic,
    FvmMoving,
    FemBand,
}

/// Frame a face belongs to. Seam faces join a static and a moving cell and
/// carry no finite-volume unknown.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaceFrame {
    Static,
    Moving(usize),
    Seam,
}

/// Where a world point falls relative to the windows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Zone {
    Static,
    /// Inside `S_in` of the region.
    Region(usize),
    /// Inside the seam annulus of the region.
    Ring(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub lo: Vec2,
    pub hi: Vec2,
}

impl Rect {
    pub fn area(&self) -> f64 {
        (self.hi.x - self.lo.x).max(0.0) * (self.hi.y - self.lo.y).max(0.0)
    }

    pub fn overlap(&self, other: &Rect) -> f64 {
        let w = self.hi.x.min(other.hi.x) - self.lo.x.max(other.lo.x);
        let h = self.hi.y.min(other.hi.y) - self.lo.y.max(other.lo.y);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    pub fn contains(&self, x: Vec2) -> bool {
        x.x >= self.lo.x && x.x <= self.hi.x && x.y >= self.lo.y && x.y <= self.hi.y
    }
}

/// Cell labels, seam elements and clipped control volumes for one
/// configuration of moving regions.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridLayout {
    pub desc: GridDesc,
    pub regions: Vec<MovingRegion>,
    pub labels: Vec<CellLabel>,
    /// Owning region per cell, if any.
    pub cell_region: Vec<Option<usize>>,
    /// Full seam band (no air culling).
    pub elements: Vec<Element>,
    /// Element index per grid node.
    pub node_element: Vec<Option<usize>>,
    /// Per-cell FVM control volume after clipping.
    pub control_volume: Vec<f64>,
    /// Per-face FVM control volume for the x and y face arrays. Zero on walls
    /// and seam faces.
    pub face_volume: [Vec<f64>; 2],
    /// Global unknown per liquid cell (set by [`HybridLayout::assign_unknowns`]).
    pub pressure_index: Vec<Option<usize>>,
    pub n_unknowns: usize,
}

/// Labels cells: window interiors are `FvmMoving`; the window's boundary ring
/// and the background ring around it are `FemBand`; everything else is
/// `FvmStatic`.
pub fn label_cells(desc: &GridDesc, regions: &[MovingRegion]) -> Result<(Vec<CellLabel>, Vec<Option<usize>>)> {
    desc.require_2d()?;
    validate_regions(desc, regions)?;
    let mut labels = vec![CellLabel::FvmStatic; desc.cell_count()];
    let mut owner = vec![None; desc.cell_count()];
    for (r, reg) in regions.iter().enumerate() {
        for j in reg.min[1] - 1..=reg.max[1] {
            for i in reg.min[0] - 1..=reg.max[0] {
                let c = desc.idx(i, j);
                if reg.contains_cell(i, j) {
                    owner[c] = Some(r);
                    labels[c] = if reg.is_boundary_cell(i, j) {
                        CellLabel::FemBand
                    } else {
                        CellLabel::FvmMoving
                    };
                } else {
                    labels[c] = CellLabel::FemBand;
                }
            }
        }
    }
    Ok((labels, owner))
}

fn node_pos(desc: &GridDesc, regions: &[MovingRegion], owner: &[Option<usize>], i: usize, j: usize) -> Vec2 {
    let c = desc.center2(i, j);
    match owner[desc.idx(i, j)] {
        Some(r) => c + Vec2::new(regions[r].offset[0], regions[r].offset[1]),
        None => c,
    }
}

/// Builds the seam band: every dual quad around a window that mixes static
/// and moving nodes. With `phi`, elements without a liquid node are dropped.
pub fn build_seam_elements(
    desc: &GridDesc,
    regions: &[MovingRegion],
    owner: &[Option<usize>],
    phi: Option<&ScalarField>,
) -> Result<Vec<Element>> {
    let mut out = Vec::new();
    for reg in regions {
        for b in reg.min[1] - 1..reg.max[1] {
            for a in reg.min[0] - 1..reg.max[0] {
                let interior = a >= reg.min[0] && a + 2 <= reg.max[0] && b >= reg.min[1] && b + 2 <= reg.max[1];
                if interior {
                    continue;
                }
                let ij = [(a, b), (a + 1, b), (a + 1, b + 1), (a, b + 1)];
                let cells = ij.map(|(i, j)| desc.idx(i, j));
                if let Some(phi) = phi {
                    if !cells.iter().any(|&c| phi.values[c] < 0.0) {
                        continue;
                    }
                }
                let positions = ij.map(|(i, j)| node_pos(desc, regions, owner, i, j));
                let node = desc.node_idx(a + 1, b + 1);
                out.push(Element::new(node, [a, b], cells, positions)?);
            }
        }
    }
    Ok(out)
}

fn s_out(desc: &GridDesc, reg: &MovingRegion) -> Rect {
    Rect {
        lo: desc.center2(reg.min[0] - 1, reg.min[1] - 1),
        hi: desc.center2(reg.max[0], reg.max[1]),
    }
}

fn s_in(desc: &GridDesc, reg: &MovingRegion) -> Rect {
    let o = Vec2::new(reg.offset[0], reg.offset[1]);
    Rect {
        lo: desc.center2(reg.min[0], reg.min[1]) + o,
        hi: desc.center2(reg.max[0] - 1, reg.max[1] - 1) + o,
    }
}

/// Clips cell and face control volumes against the seam band.
///
/// Static cells and faces lose their overlap with `S_out`; moving ones keep
/// only their overlap with `S_in`. A face's control volume is its dual
/// rectangle (between the two cell centers along the face normal, one cell
/// wide across it).
pub fn adjust_control_volumes(layout: &mut HybridLayout) {
    let d = layout.desc;
    let h = d.dx;
    let outs: Vec<Rect> = layout.regions.iter().map(|r| s_out(&d, r)).collect();
    let ins: Vec<Rect> = layout.regions.iter().map(|r| s_in(&d, r)).collect();
    let clip = |rect: Rect, owner: Option<usize>| -> f64 {
        match owner {
            None => {
                let mut v = rect.area();
                for o in &outs {
                    v -= rect.overlap(o);
                }
                v.max(0.0)
            }
            Some(r) => rect.overlap(&ins[r]),
        }
    };
    let half = Vec2::new(0.5 * h, 0.5 * h);
    for j in 0..d.ny() {
        for i in 0..d.nx() {
            let c = d.idx(i, j);
            let p = layout.node_position(i, j);
            layout.control_volume[c] = clip(
                Rect {
                    lo: p - half,
                    hi: p + half,
                },
                layout.cell_region[c],
            );
        }
    }
    for axis in 0..2 {
        let fc = d.face_counts(axis);
        for j in 0..fc[1] {
            for i in 0..fc[0] {
                let idx = d.face_index(axis, i, j, 0);
                let vol = match (layout.face_frame(axis, i, j), layout.face_cells(axis, i, j)) {
                    (FaceFrame::Seam, _) => 0.0,
                    (frame, (Some(lo), Some(hi))) => {
                        let [li, lj, _] = d.cell_coords(lo);
                        let [hi_i, hi_j, _] = d.cell_coords(hi);
                        let a = layout.node_position(li, lj);
                        let b = layout.node_position(hi_i, hi_j);
                        let rect = if axis == 0 {
                            Rect {
                                lo: Vec2::new(a.x, a.y - 0.5 * h),
                                hi: Vec2::new(b.x, a.y + 0.5 * h),
                            }
                        } else {
                            Rect {
                                lo: Vec2::new(a.x - 0.5 * h, a.y),
                                hi: Vec2::new(a.x + 0.5 * h, b.y),
                            }
                        };
                        let owner = match frame {
                            FaceFrame::Moving(r) => Some(r),
                            _ => None,
                        };
                        clip(rect, owner)
                    }
                    // walls
                    _ => 0.0,
                };
                layout.face_volume[axis][idx] = vol;
            }
        }
    }
}

impl HybridLayout {
    /// Labels cells, builds the full seam band and clips control volumes.
    pub fn build(desc: GridDesc, regions: &[MovingRegion]) -> Result<Self> {
        let (labels, cell_region) = label_cells(&desc, regions)?;
        let elements = build_seam_elements(&desc, regions, &cell_region, None)?;
        let mut node_element = vec![None; desc.node_count_2d()];
        for (k, e) in elements.iter().enumerate() {
            node_element[e.node] = Some(k);
        }
        let mut layout = HybridLayout {
            desc,
            regions: regions.to_vec(),
            labels,
            cell_region,
            elements,
            node_element,
            control_volume: vec![0.0; desc.cell_count()],
            face_volume: [vec![0.0; desc.face_count(0)], vec![0.0; desc.face_count(1)]],
            pressure_index: vec![None; desc.cell_count()],
            n_unknowns: 0,
        };
        adjust_control_volumes(&mut layout);
        Ok(layout)
    }

    /// World position of the value stored for cell `(i, j)`.
    #[inline]
    pub fn node_position(&self, i: usize, j: usize) -> Vec2 {
        node_pos(&self.desc, &self.regions, &self.cell_region, i, j)
    }

    pub fn cell_position(&self, cell: usize) -> Vec2 {
        let [i, j, _] = self.desc.cell_coords(cell);
        self.node_position(i, j)
    }

    pub fn region_offset(&self, r: usize) -> Vec2 {
        Vec2::new(self.regions[r].offset[0], self.regions[r].offset[1])
    }

    /// Cells below and above a face along its axis (`None` past a wall).
    #[inline]
    pub fn face_cells(&self, axis: usize, i: usize, j: usize) -> (Option<usize>, Option<usize>) {
        let d = &self.desc;
        let n = d.counts[axis];
        let k = if axis == 0 { i } else { j };
        let at = |kk: usize| {
            if axis == 0 {
                d.idx(kk, j)
            } else {
                d.idx(i, kk)
            }
        };
        let lo = if k > 0 { Some(at(k - 1)) } else { None };
        let hi = if k < n { Some(at(k)) } else { None };
        (lo, hi)
    }

    #[inline]
    pub fn face_frame(&self, axis: usize, i: usize, j: usize) -> FaceFrame {
        match self.face_cells(axis, i, j) {
            (Some(a), Some(b)) => match (self.cell_region[a], self.cell_region[b]) {
                (None, None) => FaceFrame::Static,
                (Some(r), Some(s)) if r == s => FaceFrame::Moving(r),
                _ => FaceFrame::Seam,
            },
            (Some(c), None) | (None, Some(c)) => match self.cell_region[c] {
                None => FaceFrame::Static,
                Some(r) => FaceFrame::Moving(r),
            },
            (None, None) => FaceFrame::Static,
        }
    }

    #[inline]
    pub fn is_wall_face(&self, axis: usize, i: usize, j: usize) -> bool {
        let k = if axis == 0 { i } else { j };
        k == 0 || k == self.desc.counts[axis]
    }

    /// World position of a face value. Seam faces sit midway between their
    /// two (differently displaced) cell positions.
    pub fn face_position(&self, axis: usize, i: usize, j: usize) -> Vec2 {
        let base = self.desc.face_center2(axis, i, j);
        match self.face_frame(axis, i, j) {
            FaceFrame::Static => base,
            FaceFrame::Moving(r) => base + self.region_offset(r),
            FaceFrame::Seam => {
                let (a, b) = self.face_cells(axis, i, j);
                (self.cell_position(a.unwrap()) + self.cell_position(b.unwrap())) * 0.5
            }
        }
    }

    /// Mean frame velocity of an element's nodes.
    pub fn element_frame_velocity(&self, e: &Element) -> [f64; 2] {
        let mut v = [0.0; 2];
        for &c in &e.cells {
            if let Some(r) = self.cell_region[c] {
                v[0] += 0.25 * self.regions[r].u_g[0];
                v[1] += 0.25 * self.regions[r].u_g[1];
            }
        }
        v
    }

    pub fn outer_square(&self, r: usize) -> Rect {
        s_out(&self.desc, &self.regions[r])
    }

    pub fn inner_square(&self, r: usize) -> Rect {
        s_in(&self.desc, &self.regions[r])
    }

    pub fn zone(&self, x: Vec2) -> Zone {
        for r in 0..self.regions.len() {
            if self.inner_square(r).contains(x) {
                return Zone::Region(r);
            }
            if self.outer_square(r).contains(x) {
                return Zone::Ring(r);
            }
        }
        Zone::Static
    }

    /// Corner of a virtual interpolation element: the seam element center
    /// when one is centered on this grid node, otherwise the grid node itself
    /// (displaced when it lies strictly inside a window).
    pub fn virtual_node_position(&self, p: usize, q: usize) -> Vec2 {
        let d = &self.desc;
        if let Some(e) = self.node_element[d.node_idx(p, q)] {
            return self.elements[e].center();
        }
        for (r, reg) in self.regions.iter().enumerate() {
            if p > reg.min[0] && p < reg.max[0] && q > reg.min[1] && q < reg.max[1] {
                return d.node2(p, q) + self.region_offset(r);
            }
        }
        d.node2(p, q)
    }

    /// Numbers liquid cells (`phi < 0`) in cell order.
    pub fn assign_unknowns(&mut self, phi: &ScalarField) {
        let mut n = 0;
        for (c, slot) in self.pressure_index.iter_mut().enumerate() {
            if phi.values[c] < 0.0 {
                *slot = Some(n);
                n += 1;
            } else {
                *slot = None;
            }
        }
        self.n_unknowns = n;
    }

    /// Elements with at least one liquid node.
    pub fn wet_elements(&self, phi: &ScalarField) -> Vec<&Element> {
        self.elements
            .iter()
            .filter(|e| e.cells.iter().any(|&c| phi.values[c] < 0.0))
            .collect()
    }

    /// FVM control volumes plus seam quadrature volumes.
    pub fn total_volume(&self) -> f64 {
        self.control_volume.iter().sum::<f64>() + self.elements.iter().map(|e| e.volume()).sum::<f64>()
    }

    pub fn domain_volume(&self) -> f64 {
        let d = &self.desc;
        d.nx() as f64 * d.ny() as f64 * d.dx * d.dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::collections::HashSet;

    fn desc16(dx: f64) -> GridDesc {
        GridDesc::new_2d(16, 16, dx, [0.0, 0.0]).unwrap()
    }

    #[test]
    fn no_regions_all_static() {
        let layout = HybridLayout::build(desc16(1.0), &[]).unwrap();
        assert!(layout.labels.iter().all(|l| *l == CellLabel::FvmStatic));
        assert!(layout.elements.is_empty());
        assert!(layout.control_volume.iter().all(|v| *v == 1.0));
    }

    #[test]
    fn four_by_four_window_ring() {
        let r = MovingRegion::new([6, 6], [10, 10], [true, true], [0.0, 0.0]);
        let layout = HybridLayout::build(desc16(1.0), &[r]).unwrap();
        let moving = layout.labels.iter().filter(|l| **l == CellLabel::FvmMoving).count();
        let band = layout.labels.iter().filter(|l| **l == CellLabel::FemBand).count();
        assert_eq!(moving, 4);
        assert_eq!(band, 12 + 20);
        // 5x5 dual quads minus the 3x3 interior
        assert_eq!(layout.elements.len(), 16);
        // Euler characteristic of the element ring (an annulus) is zero
        let mut verts = HashSet::new();
        let mut edges = HashSet::new();
        for e in &layout.elements {
            for k in 0..4 {
                let a = e.cells[k];
                let b = e.cells[(k + 1) % 4];
                verts.insert(a);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        let chi = verts.len() as i64 - edges.len() as i64 + layout.elements.len() as i64;
        assert_eq!(chi, 0);
        for e in &layout.elements {
            for q in &e.quad {
                assert_relative_eq!(q.det_j, 0.25, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn half_offset_element_widths() {
        let dx = 0.5;
        let mut r = MovingRegion::new([6, 6], [10, 10], [true, false], [0.0, 0.0]);
        r.offset = [-dx / 2.0, 0.0];
        let layout = HybridLayout::build(desc16(dx), &[r]).unwrap();
        let mut seen_wide = 0;
        let mut seen_narrow = 0;
        for e in &layout.elements {
            // side strips (not touching top/bottom rows)
            if e.dual[1] < 6 || e.dual[1] > 8 {
                continue;
            }
            let det = e.quad[0].det_j;
            if e.dual[0] == 9 {
                assert_relative_eq!(det, (1.5 * dx / 2.0) * (dx / 2.0), epsilon = 1e-14);
                seen_wide += 1;
            } else if e.dual[0] == 5 {
                assert_relative_eq!(det, (0.5 * dx / 2.0) * (dx / 2.0), epsilon = 1e-14);
                seen_narrow += 1;
            }
            for q in &e.quad {
                assert_relative_eq!(q.det_j, det, epsilon = 1e-14);
            }
        }
        assert_eq!((seen_wide, seen_narrow), (3, 3));
    }

    #[test]
    fn all_air_window_emits_no_wet_elements() {
        let d = desc16(1.0);
        let r = MovingRegion::new([6, 6], [10, 10], [true, true], [0.0, 0.0]);
        let layout = HybridLayout::build(d, std::slice::from_ref(&r)).unwrap();
        let air = ScalarField::new(d, 1.0);
        assert!(layout.wet_elements(&air).is_empty());
        let els = build_seam_elements(&d, &[r], &layout.cell_region, Some(&air)).unwrap();
        assert!(els.is_empty());
    }

    #[test]
    fn control_volume_adjustment_at_zero_offset() {
        let r = MovingRegion::new([6, 6], [10, 10], [true, true], [0.0, 0.0]);
        let layout = HybridLayout::build(desc16(1.0), &[r]).unwrap();
        let d = layout.desc;
        assert_eq!(layout.control_volume[d.idx(0, 0)], 1.0);
        // static cell left of the window: inner half covered
        assert_relative_eq!(layout.control_volume[d.idx(5, 7)], 0.5);
        assert_relative_eq!(layout.control_volume[d.idx(5, 5)], 0.75);
        // moving boundary cells
        assert_relative_eq!(layout.control_volume[d.idx(6, 7)], 0.5);
        assert_relative_eq!(layout.control_volume[d.idx(6, 6)], 0.25);
        assert_relative_eq!(layout.control_volume[d.idx(7, 7)], 1.0);
        // face volumes: x-face into the static ring cell stays whole,
        // tangential faces along the ring are halved
        assert_relative_eq!(layout.face_volume[0][d.face_index(0, 5, 7, 0)], 1.0);
        assert_relative_eq!(layout.face_volume[1][d.face_index(1, 5, 7, 0)], 0.5);
        assert_eq!(layout.face_volume[0][d.face_index(0, 6, 7, 0)], 0.0);
        assert_eq!(layout.face_frame(0, 6, 7), FaceFrame::Seam);
        assert_eq!(layout.face_volume[0][d.face_index(0, 0, 3, 0)], 0.0);
    }

    #[test]
    fn volume_is_conserved_for_any_offset() {
        let d = desc16(0.1);
        for &(ox, oy) in &[
            (0.0, 0.0),
            (0.0499, 0.0),
            (-0.05, 0.031),
            (0.013, -0.047),
            (-0.05, -0.05),
        ] {
            let mut r = MovingRegion::new([5, 4], [11, 12], [true, true], [0.0, 0.0]);
            r.offset = [ox, oy];
            let layout = HybridLayout::build(d, &[r]).unwrap();
            let rel = (layout.total_volume() - layout.domain_volume()).abs() / layout.domain_volume();
            assert!(rel < 1e-10, "offset ({ox}, {oy}): rel err {rel}");
            for e in &layout.elements {
                assert!(e.quad.iter().all(|q| q.det_j > 0.0));
            }
        }
    }

    #[test]
    fn layout_is_deterministic() {
        let d = desc16(0.1);
        let mut r = MovingRegion::new([5, 4], [11, 12], [true, true], [0.3, 0.1]);
        r.offset = [0.037, -0.039];
        let a = HybridLayout::build(d, &[r.clone()]).unwrap();
        let b = HybridLayout::build(d, &[r]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn overlapping_regions_rejected() {
        let d = desc16(1.0);
        let a = MovingRegion::new([2, 2], [6, 6], [true, true], [0.0, 0.0]);
        let b = MovingRegion::new([7, 2], [11, 6], [true, true], [0.0, 0.0]);
        assert!(HybridLayout::build(d, &[a, b]).is_err());
    }
}
