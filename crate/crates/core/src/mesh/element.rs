use nalgebra::Matrix2;

use crate::{Error, Result, Vec2};

/// Unit-square corner coordinates, counter-clockwise from `(-1, -1)`.
pub const CORNERS: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

/// Bilinear shape functions at unit coordinate `xi`.
#[inline]
pub fn shape(xi: [f64; 2]) -> [f64; 4] {
    let mut n = [0.0; 4];
    for (k, c) in CORNERS.iter().enumerate() {
        n[k] = 0.25 * (1.0 + c[0] * xi[0]) * (1.0 + c[1] * xi[1]);
    }
    n
}

/// Shape-function derivatives with respect to the unit coordinates.
#[inline]
pub fn shape_grad_unit(xi: [f64; 2]) -> [[f64; 2]; 4] {
    let mut g = [[0.0; 2]; 4];
    for (k, c) in CORNERS.iter().enumerate() {
        g[k][0] = 0.25 * c[0] * (1.0 + c[1] * xi[1]);
        g[k][1] = 0.25 * c[1] * (1.0 + c[0] * xi[0]);
    }
    g
}

/// Bilinear map of the unit square onto four node positions.
#[inline]
pub fn map_point(nodes: &[Vec2; 4], xi: [f64; 2]) -> Vec2 {
    let n = shape(xi);
    nodes
        .iter()
        .zip(n.iter())
        .fold(Vec2::zeros(), |acc, (p, w)| acc + p * *w)
}

/// Jacobian `d x / d xi` (columns are derivatives along xi and eta).
#[inline]
pub fn jacobian(nodes: &[Vec2; 4], xi: [f64; 2]) -> Matrix2<f64> {
    let g = shape_grad_unit(xi);
    let mut j = Matrix2::zeros();
    for k in 0..4 {
        for r in 0..2 {
            j[(r, 0)] += nodes[k][r] * g[k][0];
            j[(r, 1)] += nodes[k][r] * g[k][1];
        }
    }
    j
}

/// Tensor-product Gauss-Legendre points on `[-1, 1]^2`.
pub fn gauss_points(order: usize) -> Vec<([f64; 2], f64)> {
    let (pts, wts): (&[f64], &[f64]) = match order {
        1 => (&[0.0], &[2.0]),
        2 => {
            const P: f64 = 0.577_350_269_189_625_8;
            (&[-P, P], &[1.0, 1.0])
        }
        3 => (
            &[-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4],
            &[5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0],
        ),
        4 => (
            &[
                -0.861_136_311_594_052_6,
                -0.339_981_043_584_856_3,
                0.339_981_043_584_856_3,
                0.861_136_311_594_052_6,
            ],
            &[
                0.347_854_845_137_453_9,
                0.652_145_154_862_546_1,
                0.652_145_154_862_546_1,
                0.347_854_845_137_453_9,
            ],
        ),
        _ => panic!("unsupported Gauss order {order}"),
    };
    let mut out = Vec::with_capacity(order * order);
    for (a, wa) in pts.iter().zip(wts) {
        for (b, wb) in pts.iter().zip(wts) {
            out.push(([*b, *a], wa * wb));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadPoint {
    pub xi: [f64; 2],
    pub weight: f64,
    pub det_j: f64,
    pub position: Vec2,
    /// World-frame shape-function gradients, one per node.
    pub grad: [Vec2; 4],
}

/// Evaluates determinant, position and world gradients at `xi`.
pub fn eval_point(nodes: &[Vec2; 4], xi: [f64; 2], weight: f64) -> Option<QuadPoint> {
    let j = jacobian(nodes, xi);
    let det = j.determinant();
    let inv = j.try_inverse()?;
    let g = shape_grad_unit(xi);
    let mut grad = [Vec2::zeros(); 4];
    for k in 0..4 {
        // grad_x N = J^{-T} grad_xi N
        let gu = Vec2::new(g[k][0], g[k][1]);
        grad[k] = inv.transpose() * gu;
    }
    Some(QuadPoint {
        xi,
        weight,
        det_j: det,
        position: map_point(nodes, xi),
        grad,
    })
}

/// A bilinear seam element whose nodes are cell centers. The element is
/// centered on grid node `node`; `dual` is its lower-left cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    pub node: usize,
    pub dual: [usize; 2],
    /// Linear cell indices of the four nodes (counter-clockwise).
    pub cells: [usize; 4],
    pub positions: [Vec2; 4],
    pub quad: [QuadPoint; 4],
}

impl Element {
    pub fn new(node: usize, dual: [usize; 2], cells: [usize; 4], positions: [Vec2; 4]) -> Result<Self> {
        let pts = gauss_points(2);
        let mut quad = Vec::with_capacity(4);
        for (xi, w) in pts {
            let q = eval_point(&positions, xi, w).ok_or(Error::InvertedElement { node, det_j: 0.0 })?;
            if !(q.det_j > 0.0) {
                return Err(Error::InvertedElement { node, det_j: q.det_j });
            }
            quad.push(q);
        }
        let quad: [QuadPoint; 4] = quad.try_into().expect("four Gauss points");
        Ok(Element {
            node,
            dual,
            cells,
            positions,
            quad,
        })
    }

    pub fn center(&self) -> Vec2 {
        self.positions.iter().sum::<Vec2>() * 0.25
    }

    /// Quadrature volume `sum w |J|`.
    pub fn volume(&self) -> f64 {
        self.quad.iter().map(|q| q.weight * q.det_j).sum()
    }

    pub fn map(&self, xi: [f64; 2]) -> Vec2 {
        map_point(&self.positions, xi)
    }

    pub fn bbox(&self) -> (Vec2, Vec2) {
        let mut lo = self.positions[0];
        let mut hi = self.positions[0];
        for p in &self.positions[1..] {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (lo, hi)
    }

    /// `K_e = sum_q w |J| B^T B`: the unit-coefficient stiffness matrix.
    pub fn stiffness(&self) -> [[f64; 4]; 4] {
        let mut k = [[0.0; 4]; 4];
        for q in &self.quad {
            let s = q.weight * q.det_j;
            for a in 0..4 {
                for b in 0..4 {
                    k[a][b] += s * q.grad[a].dot(&q.grad[b]);
                }
            }
        }
        k
    }

    /// `G_e = sum_q w |J| B^T`: maps a constant element velocity to nodal
    /// right-hand-side contributions.
    pub fn gradient_moments(&self) -> [Vec2; 4] {
        let mut g = [Vec2::zeros(); 4];
        for q in &self.quad {
            let s = q.weight * q.det_j;
            for a in 0..4 {
                g[a] += q.grad[a] * s;
            }
        }
        g
    }
}
