//! Geometric primitives shared by the simulator, the perception maps, and
//! the evaluator: ray/box intersection, BEV polygons of oriented boxes, and
//! convex polygon clipping.

use crate::scene::{OrientedBox, Vec3};

/// The four BEV (x, y) corners of an oriented box, counterclockwise.
pub fn bev_corners(b: &OrientedBox) -> [[f64; 2]; 4] {
    let (s, c) = b.yaw.sin_cos();
    let (hx, hy) = (b.half_extents.x, b.half_extents.y);
    let mut out = [[0.0; 2]; 4];
    for (k, (ux, uy)) in [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]
        .into_iter()
        .enumerate()
    {
        let lx = ux * hx;
        let ly = uy * hy;
        out[k] = [
            b.center.x + c * lx - s * ly,
            b.center.y + s * lx + c * ly,
        ];
    }
    out
}

/// Signed area of a simple polygon (positive when counterclockwise).
pub fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for k in 0..poly.len() {
        let [x0, y0] = poly[k];
        let [x1, y1] = poly[(k + 1) % poly.len()];
        acc += x0 * y1 - x1 * y0;
    }
    0.5 * acc
}

/// Clips convex `subject` against convex counterclockwise `clip`
/// (Sutherland-Hodgman). Returns the intersection polygon, possibly empty.
pub fn convex_clip(subject: &[[f64; 2]], clip: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut poly: Vec<[f64; 2]> = subject.to_vec();
    for k in 0..clip.len() {
        if poly.is_empty() {
            break;
        }
        let a = clip[k];
        let b = clip[(k + 1) % clip.len()];
        let inside = |p: [f64; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= 0.0;
        let intersect = |p: [f64; 2], q: [f64; 2]| -> [f64; 2] {
            let dx = q[0] - p[0];
            let dy = q[1] - p[1];
            let ex = b[0] - a[0];
            let ey = b[1] - a[1];
            let denom = ex * dy - ey * dx;
            let t = if denom.abs() < 1e-300 {
                0.0
            } else {
                (ex * (a[1] - p[1]) - ey * (a[0] - p[0])) / denom
            };
            [p[0] + t * dx, p[1] + t * dy]
        };
        let mut next = Vec::with_capacity(poly.len() + 2);
        for i in 0..poly.len() {
            let cur = poly[i];
            let prev = poly[(i + poly.len() - 1) % poly.len()];
            match (inside(prev), inside(cur)) {
                (true, true) => next.push(cur),
                (true, false) => next.push(intersect(prev, cur)),
                (false, true) => {
                    next.push(intersect(prev, cur));
                    next.push(cur);
                }
                (false, false) => {}
            }
        }
        poly = next;
    }
    poly
}

/// Intersection area of the BEV footprints of two oriented boxes.
pub fn bev_intersection_area(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let pa = bev_corners(a);
    let pb = bev_corners(b);
    polygon_area(&convex_clip(&pa, &pb)).abs()
}

/// Whether the BEV footprint of `b` overlaps the axis-aligned cell
/// `[x0, x1] x [y0, y1]` with positive area.
pub fn bev_overlaps_cell(b: &OrientedBox, x: (f64, f64), y: (f64, f64)) -> bool {
    let cell = [
        [x.0, y.0],
        [x.1, y.0],
        [x.1, y.1],
        [x.0, y.1],
    ];
    polygon_area(&convex_clip(&bev_corners(b), &cell)).abs() > 1e-12
}

/// Whether BEV point `(x, y)` lies inside the footprint of `b` (closed).
pub fn point_in_bev(b: &OrientedBox, x: f64, y: f64) -> bool {
    let (s, c) = b.yaw.sin_cos();
    let dx = x - b.center.x;
    let dy = y - b.center.y;
    let lx = c * dx + s * dy;
    let ly = -s * dx + c * dy;
    lx.abs() <= b.half_extents.x && ly.abs() <= b.half_extents.y
}

/// Distance along the ray `origin + t * dir` to the oriented box, if it is
/// hit with `t > t_min`. Slab method in the box's local frame; `dir` must
/// be unit length for `t` to be metric distance.
pub fn ray_box_intersection(origin: Vec3, dir: Vec3, b: &OrientedBox, t_min: f64) -> Option<f64> {
    let (s, c) = b.yaw.sin_cos();
    // Rotate into the box frame (yaw-only, z unchanged).
    let ox = origin.x - b.center.x;
    let oy = origin.y - b.center.y;
    let oz = origin.z - b.center.z;
    let lo = [c * ox + s * oy, -s * ox + c * oy, oz];
    let ld = [
        c * dir.x + s * dir.y,
        -s * dir.x + c * dir.y,
        dir.z,
    ];
    let half = [b.half_extents.x, b.half_extents.y, b.half_extents.z];
    let mut t0 = t_min;
    let mut t1 = f64::INFINITY;
    for axis in 0..3 {
        if ld[axis].abs() < 1e-15 {
            if lo[axis].abs() > half[axis] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / ld[axis];
        let mut ta = (-half[axis] - lo[axis]) * inv;
        let mut tb = (half[axis] - lo[axis]) * inv;
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
        if t0 > t1 {
            return None;
        }
    }
    Some(t0)
}

/// Distance along the ray to the ground plane z = 0, if hit with `t > t_min`.
pub fn ray_ground_intersection(origin: Vec3, dir: Vec3, t_min: f64) -> Option<f64> {
    if dir.z.abs() < 1e-15 {
        return None;
    }
    let t = -origin.z / dir.z;
    if t > t_min {
        Some(t)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{OrientedBox, Vec3};

    fn boxed(cx: f64, cy: f64, hx: f64, hy: f64, yaw: f64) -> OrientedBox {
        OrientedBox::new(Vec3::new(cx, cy, 1.0), Vec3::new(hx, hy, 1.0), yaw)
    }

    #[test]
    fn corners_of_an_axis_aligned_box() {
        let b = boxed(1.0, 2.0, 3.0, 0.5, 0.0);
        let cs = bev_corners(&b);
        assert_eq!(cs[0], [4.0, 2.5]);
        assert_eq!(cs[1], [-2.0, 2.5]);
        assert_eq!(cs[2], [-2.0, 1.5]);
        assert_eq!(cs[3], [4.0, 1.5]);
        assert!((polygon_area(&cs) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn clip_of_offset_unit_squares() {
        // Two unit squares offset by 0.5 in x overlap in a 0.5 x 1 strip.
        let a = boxed(0.0, 0.0, 0.5, 0.5, 0.0);
        let b = boxed(0.5, 0.0, 0.5, 0.5, 0.0);
        assert!((bev_intersection_area(&a, &b) - 0.5).abs() < 1e-12);
        // Identical squares: full area.
        assert!((bev_intersection_area(&a, &a) - 1.0).abs() < 1e-12);
        // Disjoint: zero.
        let c = boxed(5.0, 0.0, 0.5, 0.5, 0.0);
        assert_eq!(bev_intersection_area(&a, &c), 0.0);
    }

    #[test]
    fn clip_handles_rotation() {
        // A 45-degree square inscribed in a unit square: intersection is
        // the rotated square itself when it fits inside.
        let outer = boxed(0.0, 0.0, 1.0, 1.0, 0.0);
        let inner = boxed(0.0, 0.0, 0.5, 0.5, std::f64::consts::FRAC_PI_4);
        let area = bev_intersection_area(&outer, &inner);
        assert!((area - 1.0).abs() < 1e-9, "area {area}");
    }

    #[test]
    fn point_in_bev_respects_yaw() {
        let b = boxed(0.0, 0.0, 2.0, 0.5, std::f64::consts::FRAC_PI_2);
        // Box is long along y after rotation.
        assert!(point_in_bev(&b, 0.0, 1.9));
        assert!(!point_in_bev(&b, 1.0, 0.0));
    }

    #[test]
    fn slab_test_agrees_with_hand_cases() {
        let b = OrientedBox::new(Vec3::new(10.0, 0.0, 1.0), Vec3::new(1.0, 2.0, 1.0), 0.0);
        let t = ray_box_intersection(
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(1.0, 0.0, 0.0),
            &b,
            1e-9,
        )
        .unwrap();
        assert!((t - 9.0).abs() < 1e-12);
        // Miss above the box.
        assert!(ray_box_intersection(
            Vec3::new(0.0, 0.0, 5.0),
            Vec3::new(1.0, 0.0, 0.0),
            &b,
            1e-9
        )
        .is_none());
        // Ray starting inside: entry clamp is t_min, still a hit.
        let t = ray_box_intersection(
            Vec3::new(10.0, 0.0, 1.0),
            Vec3::new(1.0, 0.0, 0.0),
            &b,
            1e-9,
        )
        .unwrap();
        assert!(t >= 1e-9);
    }

    #[test]
    fn ground_hits_only_descend() {
        let up = ray_ground_intersection(Vec3::new(0.0, 0.0, 5.0), Vec3::new(0.0, 0.0, 1.0), 1e-9);
        assert!(up.is_none());
        let down = ray_ground_intersection(
            Vec3::new(0.0, 0.0, 5.0),
            Vec3::new(0.6, 0.0, -0.8),
            1e-9,
        )
        .unwrap();
        assert!((down - 6.25).abs() < 1e-12);
    }
}
