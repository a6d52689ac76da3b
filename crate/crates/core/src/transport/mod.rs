//! Semi-Lagrangian advection across moving windows and velocity
//! extrapolation into air.
//!
//! Every target of the post-step layout (cell, face, element center) is
//! traced back through samplers bound to the pre-step layout. Window
//! re-indexing after an integer shift and the filling of cells that enter a
//! window both fall out of this.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::fields::{NodeVectorField, ScalarField, StaggeredVelocityField};
use crate::interp::{Bounded, Sampler};
use crate::mesh::HybridLayout;
use crate::Vec2;


/// Default number of extrapolation layers (`ceil(CFL) + 2` at CFL 2).
pub const DEFAULT_LAYERS: usize = 4;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Backtrace {
    /// Single forward-Euler step, `x - u(x) dt`.
    #[default]
    Euler,
    /// Second-order midpoint rule.
    Midpoint,
}

/// Pre-step velocity state together with its layout.
#[derive(Clone, Copy)]
pub struct Flow<'a> {
    pub layout: &'a HybridLayout,
    pub u: &'a StaggeredVelocityField,
    pub seam_u: &'a NodeVectorField,
}

/// Departure point of `x` after `dt`, clamped to the domain.
pub fn departure_point(x: Vec2, vel: impl Fn(Vec2) -> Vec2, dt: f64, scheme: Backtrace, layout: &HybridLayout) -> Vec2 {
    let d = &layout.desc;
    let v = match scheme {
        Backtrace::Euler => vel(x),
        Backtrace::Midpoint => {
            let mid = d.clamp_to_domain(x - vel(x) * (0.5 * dt));
            vel(mid)
        }
    };
    d.clamp_to_domain(x - v * dt)
}

/// `q(x - u(x) dt)` with `q` clamped to its stencil bounds.
///
/// For targets on a moving window the relative-velocity form
/// `x - u_g dt - (u - u_g) dt` is the same point, so no frame velocity is
/// needed here.
pub fn semi_lagrangian(
    q: impl Fn(Vec2) -> Bounded,
    vel: impl Fn(Vec2) -> Vec2,
    x_target: Vec2,
    dt: f64,
    scheme: Backtrace,
    layout: &HybridLayout,
) -> f64 {
    q(departure_point(x_target, vel, dt, scheme, layout)).clamped()
}

/// Advects the level set onto the cell positions of `target`.
pub fn advect_levelset(
    phi: &ScalarField,
    flow: Flow,
    target: &HybridLayout,
    dt: f64,
    scheme: Backtrace,
) -> ScalarField {
    let s = Sampler::new(flow.layout);
    let vel = |x: Vec2| s.velocity(flow.u, flow.seam_u, x);
    let values = (0..target.desc.cell_count())
        .into_par_iter()
        .map(|c| {
            semi_lagrangian(
                |x| s.cell_bounded(phi, x),
                vel,
                target.cell_position(c),
                dt,
                scheme,
                flow.layout,
            )
        })
        .collect();
    ScalarField {
        desc: target.desc,
        values,
    }
}

/// Advects both velocity components onto the face positions and element
/// centers of `target`. Each component is advected on its own.
pub fn advect_velocity(
    flow: Flow,
    target: &HybridLayout,
    dt: f64,
    scheme: Backtrace,
) -> (StaggeredVelocityField, NodeVectorField) {
    let d = target.desc;
    let s = Sampler::new(flow.layout);
    let vel = |x: Vec2| s.velocity(flow.u, flow.seam_u, x);
    let comp = |x: Vec2, axis: usize| {
        semi_lagrangian(
            |y| s.face_bounded(flow.u, flow.seam_u, y, axis),
            vel,
            x,
            dt,
            scheme,
            flow.layout,
        )
    };

    let mut u = StaggeredVelocityField::zeros(d);
    for axis in 0..2 {
        let fc = d.face_counts(axis);
        u.faces[axis] = (0..fc[0] * fc[1])
            .into_par_iter()
            .map(|f| {
                let (i, j) = (f % fc[0], f / fc[0]);
                if target.is_wall_face(axis, i, j) {
                    0.0
                } else {
                    comp(target.face_position(axis, i, j), axis)
                }
            })
            .collect();
    }

    let mut seam = NodeVectorField::zeros(d);
    let vals: Vec<(usize, [f64; 2])> = target
        .elements
        .par_iter()
        .map(|e| {
            let c = e.center();
            (e.node, [comp(c, 0), comp(c, 1)])
        })
        .collect();
    for (node, v) in vals {
        seam.values[node] = v;
    }
    (u, seam)
}

/// One velocity unknown of the extrapolation graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Slot {
    Face(usize, usize, usize),
    Element(usize),
}

/// Sweeps `layers` breadth-first layers outwards from the liquid. An air
/// face (or element) next to a known one gets the mean of its known
/// neighbours, per component. Faces and elements not reached are zeroed.
///
/// Neighbours are same-axis faces one index away and, for elements, the
/// adjacent elements plus the faces meeting at the element's node.
pub fn extrapolate_velocity(
    u: &mut StaggeredVelocityField,
    seam_u: &mut NodeVectorField,
    phi: &ScalarField,
    layout: &HybridLayout,
    layers: usize,
) {
    let d = layout.desc;
    let liquid = |c: Option<usize>| c.is_some_and(|c| phi.values[c] < 0.0);
    let fc = [d.face_counts(0), d.face_counts(1)];
    let fidx = |axis: usize, i: usize, j: usize| j * fc[axis][0] + i;

    let mut known_face = [vec![false; d.face_count(0)], vec![false; d.face_count(1)]];
    for axis in 0..2 {
        for j in 0..fc[axis][1] {
            for i in 0..fc[axis][0] {
                let (a, b) = layout.face_cells(axis, i, j);
                // walls keep their boundary value and do not feed neighbours
                known_face[axis][fidx(axis, i, j)] = !layout.is_wall_face(axis, i, j) && (liquid(a) || liquid(b));
            }
        }
    }
    let known_elem: Vec<bool> = layout
        .elements
        .iter()
        .map(|e| e.cells.iter().any(|&c| phi.values[c] < 0.0))
        .collect();
    extrapolate_from(u, seam_u, layout, known_face, known_elem, layers);
}

/// Extrapolation core: `known_face[axis]` (face-index order) and
/// `known_elem` (element order) mark the source values.
pub fn extrapolate_from(
    u: &mut StaggeredVelocityField,
    seam_u: &mut NodeVectorField,
    layout: &HybridLayout,
    mut known_face: [Vec<bool>; 2],
    mut known_elem: Vec<bool>,
    layers: usize,
) {
    let d = layout.desc;
    let fc = [d.face_counts(0), d.face_counts(1)];
    let fidx = |axis: usize, i: usize, j: usize| j * fc[axis][0] + i;

    let neighbours = |slot: Slot, axis: usize| -> Vec<Slot> {
        let mut out = Vec::with_capacity(8);
        match slot {
            Slot::Face(a, i, j) => {
                let [w, h, _] = fc[a];
                if i > 0 {
                    out.push(Slot::Face(a, i - 1, j));
                }
                if i + 1 < w {
                    out.push(Slot::Face(a, i + 1, j));
                }
                if j > 0 {
                    out.push(Slot::Face(a, i, j - 1));
                }
                if j + 1 < h {
                    out.push(Slot::Face(a, i, j + 1));
                }
                // elements whose node touches this face
                let nodes: [(i64, i64); 2] = if a == 0 {
                    [(i as i64, j as i64), (i as i64, j as i64 + 1)]
                } else {
                    [(i as i64, j as i64), (i as i64 + 1, j as i64)]
                };
                for (p, q) in nodes {
                    if p >= 0 && q >= 0 && (p as usize) <= d.nx() && (q as usize) <= d.ny() {
                        if let Some(e) = layout.node_element[d.node_idx(p as usize, q as usize)] {
                            out.push(Slot::Element(e));
                        }
                    }
                }
            }
            Slot::Element(e) => {
                let node = layout.elements[e].node;
                let (p, q) = (node % (d.nx() + 1), node / (d.nx() + 1));
                for (dp, dq) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                    let (pp, qq) = (p as i64 + dp, q as i64 + dq);
                    if pp < 0 || qq < 0 || pp as usize > d.nx() || qq as usize > d.ny() {
                        continue;
                    }
                    if let Some(n) = layout.node_element[d.node_idx(pp as usize, qq as usize)] {
                        out.push(Slot::Element(n));
                    }
                }
                // faces of component `axis` meeting at the node
                let cand: [(i64, i64); 2] = if axis == 0 {
                    [(p as i64, q as i64 - 1), (p as i64, q as i64)]
                } else {
                    [(p as i64 - 1, q as i64), (p as i64, q as i64)]
                };
                for (i, j) in cand {
                    if i >= 0 && j >= 0 && (i as usize) < fc[axis][0] && (j as usize) < fc[axis][1] {
                        out.push(Slot::Face(axis, i as usize, j as usize));
                    }
                }
            }
        }
        out
    };

    let is_known = |s: Slot, kf: &[Vec<bool>; 2], ke: &[bool]| match s {
        Slot::Face(a, i, j) => kf[a][fidx(a, i, j)],
        Slot::Element(e) => ke[e],
    };

    // Breadth-first fronts; each layer only reads values known before it.
    let mut front: VecDeque<Slot> = VecDeque::new();
    for axis in 0..2 {
        for j in 0..fc[axis][1] {
            for i in 0..fc[axis][0] {
                if known_face[axis][fidx(axis, i, j)] {
                    front.push_back(Slot::Face(axis, i, j));
                }
            }
        }
    }
    for (e, k) in known_elem.iter().enumerate() {
        if *k {
            front.push_back(Slot::Element(e));
        }
    }

    for _ in 0..layers {
        let mut candidates: Vec<Slot> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for &s in &front {
            for axis in 0..2 {
                for n in neighbours(s, axis) {
                    if matches!(n, Slot::Face(a, i, j) if layout.is_wall_face(a, i, j)) {
                        continue;
                    }
                    if !is_known(n, &known_face, &known_elem) && seen.insert(n) {
                        candidates.push(n);
                    }
                }
            }
        }
        if candidates.is_empty() {
            break;
        }
        let mut updates: Vec<(Slot, [Option<f64>; 2])> = Vec::with_capacity(candidates.len());
        for &c in &candidates {
            let mut out = [None, None];
            for axis in 0..2 {
                if let Slot::Face(a, _, _) = c {
                    if a != axis {
                        continue;
                    }
                }
                let (mut sum, mut cnt) = (0.0, 0usize);
                for n in neighbours(c, axis) {
                    if !is_known(n, &known_face, &known_elem) {
                        continue;
                    }
                    let v = match n {
                        Slot::Face(a, i, j) if a == axis => u.at(a, i, j),
                        Slot::Element(e) => seam_u.values[layout.elements[e].node][axis],
                        Slot::Face(..) => continue,
                    };
                    sum += v;
                    cnt += 1;
                }
                if cnt > 0 {
                    out[axis] = Some(sum / cnt as f64);
                }
            }
            updates.push((c, out));
        }
        front.clear();
        for (c, v) in updates {
            match c {
                Slot::Face(a, i, j) => {
                    if let Some(x) = v[a] {
                        u.set(a, i, j, x);
                        known_face[a][fidx(a, i, j)] = true;
                        front.push_back(c);
                    }
                }
                Slot::Element(e) => {
                    if v[0].is_some() || v[1].is_some() {
                        let node = layout.elements[e].node;
                        let old = seam_u.values[node];
                        seam_u.values[node] = [v[0].unwrap_or(old[0]), v[1].unwrap_or(old[1])];
                        known_elem[e] = true;
                        front.push_back(c);
                    }
                }
            }
        }
    }

    for axis in 0..2 {
        for j in 0..fc[axis][1] {
            for i in 0..fc[axis][0] {
                if !known_face[axis][fidx(axis, i, j)] && !layout.is_wall_face(axis, i, j) {
                    u.set(axis, i, j, 0.0);
                }
            }
        }
    }
    for (e, k) in known_elem.iter().enumerate() {
        if !k {
            seam_u.values[layout.elements[e].node] = [0.0, 0.0];
        }
    }
}
