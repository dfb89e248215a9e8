//! Analytic contact detection between finger links and the box object.
//!
//! Every finger link carrying sphere or capsule geometry is tested against the
//! box. A link in contact yields exactly one [`ContactPoint`] at its deepest
//! point, with a quasi-static spring force `k · depth`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::kinematics::{all_link_poses, JointState, Pose};
use crate::model::{Geometry, KinematicChain};
use crate::scene::{Scene, SceneObject};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactPoint {
    #[serde(default)]
    pub finger: String,
    #[serde(default)]
    pub link: usize,
    /// Point on the object surface, meters.
    pub position: Vector3<f64>,
    /// Unit normal pointing out of the object.
    pub normal: Vector3<f64>,
    #[serde(default)]
    pub penetration_depth: f64,
    /// Newtons.
    pub normal_force: f64,
}

/// Closest point on a box surface to a query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxProjection {
    pub point: Vector3<f64>,
    pub normal: Vector3<f64>,
    /// Negative inside the box.
    pub distance: f64,
}

/// Exact closest surface point, outward normal and signed distance.
///
/// Outside the box the normal is the normalised offset from the surface point
/// (a face normal in face regions). Inside, the nearest face wins, ties going
/// to x, then y, then z.
pub fn closest_point_box(point: &Vector3<f64>, object: &SceneObject) -> BoxProjection {
    let local = object.pose.inverse().transform_point(point);
    let h = object.half_extents;
    let (local_point, local_normal, distance) = project_local(&local, &h);
    BoxProjection {
        point: object.pose.transform_point(&local_point),
        normal: object.pose.orientation * local_normal,
        distance,
    }
}

fn project_local(q: &Vector3<f64>, h: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>, f64) {
    let clamped = Vector3::new(
        q.x.clamp(-h.x, h.x),
        q.y.clamp(-h.y, h.y),
        q.z.clamp(-h.z, h.z),
    );
    let offset = q - clamped;
    let outside = offset.norm();
    if outside > 0.0 {
        return (clamped, offset / outside, outside);
    }
    let mut axis = 0;
    let mut depth = h[0] - q[0].abs();
    for i in 1..3 {
        let d = h[i] - q[i].abs();
        if d < depth {
            depth = d;
            axis = i;
        }
    }
    let sign = if q[axis] < 0.0 { -1.0 } else { 1.0 };
    let mut surface = *q;
    surface[axis] = sign * h[axis];
    let mut normal = Vector3::zeros();
    normal[axis] = sign;
    (surface, normal, -depth)
}

/// Signed distance from a point to the box.
pub fn box_signed_distance(point: &Vector3<f64>, object: &SceneObject) -> f64 {
    closest_point_box(point, object).distance
}

/// Point on segment `a`–`b` with the smallest signed distance to the box.
/// The box's signed distance is convex, so its restriction to the segment is
/// unimodal and a golden-section search finds the minimum.
pub fn deepest_point_on_segment(
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    object: &SceneObject,
) -> (Vector3<f64>, BoxProjection) {
    let at = |t: f64| a + (b - a) * t;
    let f = |t: f64| box_signed_distance(&at(t), object);
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..90 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    // Endpoints are not sampled by the search, compare them explicitly.
    let mut best_t = 0.5 * (lo + hi);
    let mut best = f(best_t);
    for t in [0.0, 1.0] {
        let v = f(t);
        if v < best {
            best = v;
            best_t = t;
        }
    }
    let p = at(best_t);
    (p, closest_point_box(&p, object))
}

/// World-frame primitive of a link's collision geometry.
#[derive(Debug, Clone, Copy)]
enum Primitive {
    Sphere { center: Vector3<f64>, radius: f64 },
    Capsule { a: Vector3<f64>, b: Vector3<f64>, radius: f64 },
}

fn link_primitive(chain: &KinematicChain, link: usize, pose: &Pose) -> Option<Primitive> {
    let spec = &chain.links()[link];
    let frame = pose.compose(&Pose::from_isometry(&spec.geometry_origin.isometry()));
    match spec.geometry? {
        Geometry::Sphere { radius } => Some(Primitive::Sphere {
            center: frame.position,
            radius,
        }),
        Geometry::Capsule { radius, length } => {
            let half = Vector3::new(0.0, 0.0, 0.5 * length);
            Some(Primitive::Capsule {
                a: frame.transform_point(&-half),
                b: frame.transform_point(&half),
                radius,
            })
        }
        Geometry::Box { .. } => None,
    }
}

/// Contact of a single sphere or capsule with the box, if their surfaces touch.
fn primitive_contact(prim: Primitive, object: &SceneObject) -> Option<(BoxProjection, f64)> {
    let (proj, radius) = match prim {
        Primitive::Sphere { center, radius } => (closest_point_box(&center, object), radius),
        Primitive::Capsule { a, b, radius } => (deepest_point_on_segment(&a, &b, object).1, radius),
    };
    let gap = proj.distance - radius;
    (gap <= 0.0).then_some((proj, -gap))
}

/// All finger-link contacts with the scene object, in finger order then
/// base-to-tip link order.
pub fn detect_contacts(scene: &Scene, state: &JointState) -> Vec<ContactPoint> {
    let chain = &scene.chain;
    let poses = all_link_poses(chain, state);
    let stiffness = scene.object.params.contact_stiffness;
    let mut contacts = Vec::new();
    for finger in chain.finger_names() {
        let Ok(links) = chain.finger_links(finger) else { continue };
        for link in links {
            let Some(local) = poses[link] else { continue };
            let world = scene.hand_base.compose(&local);
            let Some(prim) = link_primitive(chain, link, &world) else { continue };
            if let Some((proj, depth)) = primitive_contact(prim, &scene.object) {
                contacts.push(ContactPoint {
                    finger: finger.to_string(),
                    link,
                    position: proj.point,
                    normal: proj.normal,
                    penetration_depth: depth,
                    normal_force: stiffness * depth,
                });
            }
        }
    }
    contacts
}

/// Deepest overlap between any hand link with collision geometry (palm
/// included) and the object, in meters; zero when nothing touches.
pub fn max_hand_penetration(scene: &Scene, state: &JointState) -> f64 {
    let chain = &scene.chain;
    let poses = all_link_poses(chain, state);
    let mut deepest = 0.0_f64;
    for (link, pose) in poses.iter().enumerate() {
        let Some(local) = pose else { continue };
        let world = scene.hand_base.compose(local);
        let spec = &chain.links()[link];
        let depth = match spec.geometry {
            None => 0.0,
            Some(Geometry::Box { half_extents }) => {
                let frame = world.compose(&Pose::from_isometry(&spec.geometry_origin.isometry()));
                box_box_overlap(&frame, &half_extents, &scene.object.pose, &scene.object.half_extents)
            }
            Some(_) => link_primitive(chain, link, &world)
                .and_then(|p| primitive_contact(p, &scene.object))
                .map_or(0.0, |(_, d)| d),
        };
        deepest = deepest.max(depth);
    }
    deepest
}

/// Penetration depth of two oriented boxes by the separating axis test;
/// zero when they are separated.
fn box_box_overlap(pa: &Pose, ha: &Vector3<f64>, pb: &Pose, hb: &Vector3<f64>) -> f64 {
    let axes_a: Vec<Vector3<f64>> = (0..3).map(|i| pa.orientation * Vector3::ith(i, 1.0)).collect();
    let axes_b: Vec<Vector3<f64>> = (0..3).map(|i| pb.orientation * Vector3::ith(i, 1.0)).collect();
    let mut candidates: Vec<Vector3<f64>> = axes_a.iter().chain(axes_b.iter()).copied().collect();
    for a in &axes_a {
        for b in &axes_b {
            let c = a.cross(b);
            if c.norm() > 1e-9 {
                candidates.push(c.normalize());
            }
        }
    }
    let d = pb.position - pa.position;
    let mut min_overlap = f64::INFINITY;
    for axis in candidates {
        let ra: f64 = (0..3).map(|i| ha[i] * axes_a[i].dot(&axis).abs()).sum();
        let rb: f64 = (0..3).map(|i| hb[i] * axes_b[i].dot(&axis).abs()).sum();
        let overlap = ra + rb - d.dot(&axis).abs();
        if overlap <= 0.0 {
            return 0.0;
        }
        min_overlap = min_overlap.min(overlap);
    }
    min_overlap
}
