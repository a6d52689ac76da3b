use crate::{Error, Result, Vec2};

/// Uniform grid description. Cells are cubes of side `dx`; cell `(i, j, k)`
/// has its lower corner at `origin + (i, j, k) * dx`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridDesc {
    pub dim: usize,
    /// Cell counts per axis; unused axes hold 1.
    pub counts: [usize; 3],
    pub dx: f64,
    pub origin: [f64; 3],
}

impl GridDesc {
    pub fn new_2d(nx: usize, ny: usize, dx: f64, origin: [f64; 2]) -> Result<Self> {
        let desc = GridDesc {
            dim: 2,
            counts: [nx, ny, 1],
            dx,
            origin: [origin[0], origin[1], 0.0],
        };
        desc.validate()?;
        Ok(desc)
    }

    pub fn new_3d(counts: [usize; 3], dx: f64, origin: [f64; 3]) -> Result<Self> {
        let desc = GridDesc {
            dim: 3,
            counts,
            dx,
            origin,
        };
        desc.validate()?;
        Ok(desc)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 2 && self.dim != 3 {
            return Err(Error::InvalidGrid(format!("dim must be 2 or 3, got {}", self.dim)));
        }
        if !(self.dx > 0.0 && self.dx.is_finite()) {
            return Err(Error::InvalidGrid(format!("dx must be positive, got {}", self.dx)));
        }
        for a in 0..self.dim {
            if self.counts[a] < 4 {
                return Err(Error::InvalidGrid(format!(
                    "axis {a} has {} cells, need at least 4",
                    self.counts[a]
                )));
            }
        }
        if self.dim == 2 && self.counts[2] != 1 {
            return Err(Error::InvalidGrid("2D grid must have counts[2] == 1".into()));
        }
        Ok(())
    }

    pub fn require_2d(&self) -> Result<()> {
        if self.dim == 2 {
            Ok(())
        } else {
            Err(Error::UnsupportedDim(self.dim))
        }
    }

    pub fn nx(&self) -> usize {
        self.counts[0]
    }

    pub fn ny(&self) -> usize {
        self.counts[1]
    }

    pub fn cell_count(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn cell_index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.counts[1] + j) * self.counts[0] + i
    }

    pub fn cell_coords(&self, idx: usize) -> [usize; 3] {
        let nx = self.counts[0];
        let ny = self.counts[1];
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    /// 2D shorthand for [`cell_index`](Self::cell_index).
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.counts[0] + i
    }

    pub fn cell_center(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        let mut c = [0.0; 3];
        let ijk = [i, j, k];
        for a in 0..self.dim {
            c[a] = self.origin[a] + (ijk[a] as f64 + 0.5) * self.dx;
        }
        c
    }

    #[inline]
    pub fn center2(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(
            self.origin[0] + (i as f64 + 0.5) * self.dx,
            self.origin[1] + (j as f64 + 0.5) * self.dx,
        )
    }

    /// Grid node (cell corner) position in 2D.
    #[inline]
    pub fn node2(&self, p: usize, q: usize) -> Vec2 {
        Vec2::new(self.origin[0] + p as f64 * self.dx, self.origin[1] + q as f64 * self.dx)
    }

    pub fn node_count_2d(&self) -> usize {
        (self.counts[0] + 1) * (self.counts[1] + 1)
    }

    #[inline]
    pub fn node_idx(&self, p: usize, q: usize) -> usize {
        q * (self.counts[0] + 1) + p
    }

    /// Face counts for the staggered array of `axis`.
    pub fn face_counts(&self, axis: usize) -> [usize; 3] {
        let mut c = self.counts;
        c[axis] += 1;
        c
    }

    pub fn face_count(&self, axis: usize) -> usize {
        if axis >= self.dim {
            return 0;
        }
        self.face_counts(axis).iter().product()
    }

    pub fn face_index(&self, axis: usize, i: usize, j: usize, k: usize) -> usize {
        let c = self.face_counts(axis);
        (k * c[1] + j) * c[0] + i
    }

    /// Static-frame position of a 2D face.
    pub fn face_center2(&self, axis: usize, i: usize, j: usize) -> Vec2 {
        let (ox, oy) = if axis == 0 { (0.0, 0.5) } else { (0.5, 0.0) };
        Vec2::new(
            self.origin[0] + (i as f64 + ox) * self.dx,
            self.origin[1] + (j as f64 + oy) * self.dx,
        )
    }

    pub fn lower(&self) -> Vec2 {
        Vec2::new(self.origin[0], self.origin[1])
    }

    pub fn upper(&self) -> Vec2 {
        Vec2::new(
            self.origin[0] + self.counts[0] as f64 * self.dx,
            self.origin[1] + self.counts[1] as f64 * self.dx,
        )
    }

    pub fn clamp_to_domain(&self, x: Vec2) -> Vec2 {
        let lo = self.lower();
        let hi = self.upper();
        Vec2::new(x.x.clamp(lo.x, hi.x), x.y.clamp(lo.y, hi.y))
    }
}

/// One scalar per cell center.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub desc: GridDesc,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(desc: GridDesc, value: f64) -> Self {
        ScalarField {
            values: vec![value; desc.cell_count()],
            desc,
        }
    }

    pub fn from_values(desc: GridDesc, values: Vec<f64>) -> Result<Self> {
        if values.len() != desc.cell_count() {
            return Err(Error::InvalidGrid(format!(
                "scalar field has {} values, grid has {} cells",
                values.len(),
                desc.cell_count()
            )));
        }
        Ok(ScalarField { desc, values })
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.desc.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let idx = self.desc.idx(i, j);
        self.values[idx] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Face-centered velocity components on the MAC layout. The axis-`a` array
/// has `counts[a] + 1` faces along `a`.
#[derive(Clone, Debug, PartialEq)]
pub struct StaggeredVelocityField {
    pub desc: GridDesc,
    pub faces: [Vec<f64>; 3],
}

impl StaggeredVelocityField {
    pub fn zeros(desc: GridDesc) -> Self {
        StaggeredVelocityField {
            faces: [
                vec![0.0; desc.face_count(0)],
                vec![0.0; desc.face_count(1)],
                vec![0.0; desc.face_count(2)],
            ],
            desc,
        }
    }

    pub fn check_layout(&self) -> Result<()> {
        for a in 0..3 {
            if self.faces[a].len() != self.desc.face_count(a) {
                return Err(Error::InvalidGrid(format!(
                    "axis {a} face array has {} entries, expected {}",
                    self.faces[a].len(),
                    self.desc.face_count(a)
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn at(&self, axis: usize, i: usize, j: usize) -> f64 {
        self.faces[axis][self.desc.face_index(axis, i, j, 0)]
    }

    #[inline]
    pub fn set(&mut self, axis: usize, i: usize, j: usize, v: f64) {
        let idx = self.desc.face_index(axis, i, j, 0);
        self.faces[axis][idx] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.faces
            .iter()
            .flat_map(|f| f.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// A 2-vector per grid node (cell corner). Seam elements are centered on
/// grid nodes, so element-centered velocities live here.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeVectorField {
    pub desc: GridDesc,
    pub values: Vec<[f64; 2]>,
}

impl NodeVectorField {
    pub fn zeros(desc: GridDesc) -> Self {
        NodeVectorField {
            values: vec![[0.0; 2]; desc.node_count_2d()],
            desc,
        }
    }
}
