//! Robot description parsing.
//!
//! A deliberately small URDF subset is accepted: `link`, `joint` (revolute or
//! fixed), `origin`, `axis`, `limit`, `dynamics`, and `box`/`capsule`/`sphere`
//! collision geometry. `visual`, `material` and `inertial` blocks are skipped.
//! Finger membership is declared with a `<finger name=".." end_effector=".."/>`
//! element directly under `<robot>`; the finger's joints are the movable joints
//! on the path from the root link to the end-effector link.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of movable joints expected on the thumb of a five-finger hand.
pub const THUMB_DOF: usize = 5;
/// Number of movable joints expected on every non-thumb finger.
pub const FINGER_DOF: usize = 4;
/// Finger names of the five-finger layout, thumb first.
pub const HAND_FINGERS: [&str; 5] = ["thumb", "index", "middle", "ring", "pinky"];

/// Bundled five-finger hand description.
pub const BUNDLED_HAND_URDF: &str = include_str!("../data/dexhand.urdf");
/// File name of the bundled hand inside the data directory.
pub const BUNDLED_HAND_FILE: &str = "dexhand.urdf";

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("malformed document: {0}")]
    Xml(#[from] roxmltree::Error),
    #[error("line {line}, <{element}>: {message}")]
    Parse {
        line: u32,
        element: String,
        message: String,
    },
    #[error("{invariant}: {detail}")]
    Validation {
        invariant: &'static str,
        detail: String,
    },
    #[error("unknown finger `{0}`")]
    UnknownFinger(String),
}

impl ModelError {
    fn invalid(invariant: &'static str, detail: impl Into<String>) -> Self {
        ModelError::Validation {
            invariant,
            detail: detail.into(),
        }
    }

    /// Name of the violated chain invariant, if this is a validation error.
    pub fn invariant(&self) -> Option<&'static str> {
        match self {
            ModelError::Validation { invariant, .. } => Some(invariant),
            _ => None,
        }
    }
}

/// Translation plus roll-pitch-yaw rotation, kept in the form it was written
/// so that a description survives a parse/serialize round trip unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Origin {
    pub xyz: [f64; 3],
    pub rpy: [f64; 3],
}

impl Origin {
    pub fn isometry(&self) -> Isometry3<f64> {
        let [x, y, z] = self.xyz;
        let [r, p, w] = self.rpy;
        Isometry3::from_parts(
            Translation3::new(x, y, z),
            UnitQuaternion::from_euler_angles(r, p, w),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointKind {
    Revolute,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub name: String,
    pub kind: JointKind,
    pub parent: usize,
    pub child: usize,
    pub axis: Vector3<f64>,
    pub origin: Origin,
    pub lower_limit: f64,
    pub upper_limit: f64,
    pub damping: f64,
}

impl JointSpec {
    pub fn is_movable(&self) -> bool {
        self.kind == JointKind::Revolute
    }

    pub fn clamp(&self, angle: f64) -> f64 {
        angle.clamp(self.lower_limit, self.upper_limit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    Box { half_extents: Vector3<f64> },
    /// Capsule along the local z axis; `length` is the distance between the
    /// two hemisphere centres.
    Capsule { radius: f64, length: f64 },
    Sphere { radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub name: String,
    pub geometry: Option<Geometry>,
    pub geometry_origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finger {
    /// Movable joints, base to tip.
    pub joints: Vec<usize>,
    pub end_effector: usize,
}

/// Immutable kinematic tree.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicChain {
    name: String,
    links: Vec<LinkSpec>,
    joints: Vec<JointSpec>,
    fingers: BTreeMap<String, Finger>,
    root: usize,
    parent_joint: Vec<Option<usize>>,
    // joints from the root down to each link, in traversal order
    paths: Vec<Vec<usize>>,
}

impl KinematicChain {
    /// Builds a chain, checking every tree and finger invariant.
    pub fn new(
        name: impl Into<String>,
        links: Vec<LinkSpec>,
        joints: Vec<JointSpec>,
        fingers: BTreeMap<String, Finger>,
    ) -> Result<Self, ModelError> {
        if links.is_empty() {
            return Err(ModelError::invalid("empty", "description has no links"));
        }
        for link in &links {
            if let Some(g) = &link.geometry {
                validate_geometry(&link.name, g)?;
            }
        }
        let mut parent_joint: Vec<Option<usize>> = vec![None; links.len()];
        for (j, joint) in joints.iter().enumerate() {
            if joint.parent >= links.len() || joint.child >= links.len() {
                return Err(ModelError::invalid(
                    "link index",
                    format!("joint `{}` references a missing link", joint.name),
                ));
            }
            if joint.parent == joint.child {
                return Err(ModelError::invalid(
                    "cycle",
                    format!("joint `{}` connects link `{}` to itself", joint.name, links[joint.child].name),
                ));
            }
            if (joint.axis.norm() - 1.0).abs() > 1e-9 {
                return Err(ModelError::invalid(
                    "unit axis",
                    format!("joint `{}` axis norm is {}", joint.name, joint.axis.norm()),
                ));
            }
            if joint.is_movable() && !(joint.lower_limit <= joint.upper_limit) {
                return Err(ModelError::invalid(
                    "limit order",
                    format!(
                        "joint `{}` has lower {} > upper {}",
                        joint.name, joint.lower_limit, joint.upper_limit
                    ),
                ));
            }
            if let Some(other) = parent_joint[joint.child] {
                return Err(ModelError::invalid(
                    "multiple parents",
                    format!(
                        "link `{}` is the child of both `{}` and `{}`",
                        links[joint.child].name, joints[other].name, joint.name
                    ),
                ));
            }
            parent_joint[joint.child] = Some(j);
        }

        // Walking parents from any link must terminate within links.len() hops.
        for start in 0..links.len() {
            let mut link = start;
            let mut hops = 0;
            while let Some(j) = parent_joint[link] {
                link = joints[j].parent;
                hops += 1;
                if hops > links.len() {
                    return Err(ModelError::invalid(
                        "cycle",
                        format!("link `{}` is part of a joint cycle", links[start].name),
                    ));
                }
            }
        }
        let roots: Vec<usize> = (0..links.len()).filter(|&l| parent_joint[l].is_none()).collect();
        if roots.len() != 1 {
            let names: Vec<&str> = roots.iter().map(|&l| links[l].name.as_str()).collect();
            return Err(ModelError::invalid(
                "single root",
                format!("expected one root link, found {names:?}"),
            ));
        }
        let root = roots[0];

        let paths = (0..links.len())
            .map(|l| {
                let mut path = Vec::new();
                let mut link = l;
                while let Some(j) = parent_joint[link] {
                    path.push(j);
                    link = joints[j].parent;
                }
                path.reverse();
                path
            })
            .collect::<Vec<_>>();

        let mut owner: BTreeMap<usize, &str> = BTreeMap::new();
        for (name, finger) in &fingers {
            if finger.end_effector >= links.len() {
                return Err(ModelError::invalid(
                    "end effector",
                    format!("finger `{name}` references a missing link"),
                ));
            }
            if joints.iter().any(|j| j.parent == finger.end_effector) {
                return Err(ModelError::invalid(
                    "end effector leaf",
                    format!(
                        "end effector `{}` of finger `{name}` has child links",
                        links[finger.end_effector].name
                    ),
                ));
            }
            let expected: Vec<usize> = paths[finger.end_effector]
                .iter()
                .copied()
                .filter(|&j| joints[j].is_movable())
                .collect();
            if expected != finger.joints {
                return Err(ModelError::invalid(
                    "finger joints",
                    format!("finger `{name}` joints do not match the path to its end effector"),
                ));
            }
            for &j in &finger.joints {
                if let Some(prev) = owner.insert(j, name) {
                    return Err(ModelError::invalid(
                        "shared joint",
                        format!("joint `{}` belongs to fingers `{prev}` and `{name}`", joints[j].name),
                    ));
                }
            }
        }

        Ok(Self {
            name: name.into(),
            links,
            joints,
            fingers,
            root,
            parent_joint,
            paths,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn links(&self) -> &[LinkSpec] {
        &self.links
    }

    pub fn joints(&self) -> &[JointSpec] {
        &self.joints
    }

    pub fn fingers(&self) -> &BTreeMap<String, Finger> {
        &self.fingers
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn finger(&self, name: &str) -> Result<&Finger, ModelError> {
        self.fingers
            .get(name)
            .ok_or_else(|| ModelError::UnknownFinger(name.to_string()))
    }

    /// Finger names in canonical order: the five-finger layout first, then any
    /// remaining fingers alphabetically.
    pub fn finger_names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = HAND_FINGERS
            .iter()
            .copied()
            .filter(|f| self.fingers.contains_key(*f))
            .collect();
        names.extend(
            self.fingers
                .keys()
                .map(String::as_str)
                .filter(|f| !HAND_FINGERS.contains(f)),
        );
        names
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.links.iter().position(|l| l.name == name)
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    pub fn parent_joint(&self, link: usize) -> Option<usize> {
        self.parent_joint.get(link).copied().flatten()
    }

    /// Joints on the path from the root to `link`, root first.
    pub fn path_to(&self, link: usize) -> Option<&[usize]> {
        self.paths.get(link).map(Vec::as_slice)
    }

    /// Indices of all revolute joints, in declaration order.
    pub fn movable_joints(&self) -> Vec<usize> {
        (0..self.joints.len())
            .filter(|&j| self.joints[j].is_movable())
            .collect()
    }

    /// Finger that owns `link`, i.e. whose end-effector path contains the
    /// link's parent joint.
    pub fn finger_of_link(&self, link: usize) -> Option<&str> {
        let j = self.parent_joint(link)?;
        self.fingers
            .iter()
            .find(|(_, f)| self.paths[f.end_effector].contains(&j))
            .map(|(name, _)| name.as_str())
    }

    /// Links belonging to a finger that carry collision geometry, base to tip.
    pub fn finger_links(&self, finger: &str) -> Result<Vec<usize>, ModelError> {
        let f = self.finger(finger)?;
        Ok(self.paths[f.end_effector]
            .iter()
            .map(|&j| self.joints[j].child)
            .filter(|&l| self.links[l].geometry.is_some())
            .collect())
    }

    /// Checks the five-finger layout: thumb with five movable joints and
    /// index, middle, ring and pinky with four each.
    pub fn check_hand_layout(&self) -> Result<(), ModelError> {
        for name in HAND_FINGERS {
            let finger = self
                .fingers
                .get(name)
                .ok_or_else(|| ModelError::invalid("finger map", format!("missing finger `{name}`")))?;
            let expected = if name == "thumb" { THUMB_DOF } else { FINGER_DOF };
            if finger.joints.len() != expected {
                return Err(ModelError::invalid(
                    "finger dof",
                    format!(
                        "finger `{name}` has {} movable joints, expected {expected}",
                        finger.joints.len()
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Writes the chain back out in the accepted description subset.
    pub fn to_urdf(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "<?xml version=\"1.0\"?>");
        let _ = writeln!(out, "<robot name=\"{}\">", self.name);
        for link in &self.links {
            match &link.geometry {
                None => {
                    let _ = writeln!(out, "  <link name=\"{}\"/>", link.name);
                }
                Some(g) => {
                    let _ = writeln!(out, "  <link name=\"{}\">", link.name);
                    let _ = writeln!(out, "    <collision>");
                    let _ = writeln!(out, "      {}", origin_tag(&link.geometry_origin));
                    let shape = match g {
                        Geometry::Box { half_extents: h } => format!(
                            "<box size=\"{} {} {}\"/>",
                            2.0 * h.x,
                            2.0 * h.y,
                            2.0 * h.z
                        ),
                        Geometry::Capsule { radius, length } => {
                            format!("<capsule radius=\"{radius}\" length=\"{length}\"/>")
                        }
                        Geometry::Sphere { radius } => format!("<sphere radius=\"{radius}\"/>"),
                    };
                    let _ = writeln!(out, "      <geometry>{shape}</geometry>");
                    let _ = writeln!(out, "    </collision>");
                    let _ = writeln!(out, "  </link>");
                }
            }
        }
        for joint in &self.joints {
            let kind = match joint.kind {
                JointKind::Revolute => "revolute",
                JointKind::Fixed => "fixed",
            };
            let _ = writeln!(out, "  <joint name=\"{}\" type=\"{kind}\">", joint.name);
            let _ = writeln!(out, "    <parent link=\"{}\"/>", self.links[joint.parent].name);
            let _ = writeln!(out, "    <child link=\"{}\"/>", self.links[joint.child].name);
            let _ = writeln!(out, "    {}", origin_tag(&joint.origin));
            if joint.is_movable() {
                let a = joint.axis;
                let _ = writeln!(out, "    <axis xyz=\"{} {} {}\"/>", a.x, a.y, a.z);
                let _ = writeln!(
                    out,
                    "    <limit lower=\"{}\" upper=\"{}\"/>",
                    joint.lower_limit, joint.upper_limit
                );
                let _ = writeln!(out, "    <dynamics damping=\"{}\"/>", joint.damping);
            }
            let _ = writeln!(out, "  </joint>");
        }
        for (name, finger) in &self.fingers {
            let _ = writeln!(
                out,
                "  <finger name=\"{name}\" end_effector=\"{}\"/>",
                self.links[finger.end_effector].name
            );
        }
        let _ = writeln!(out, "</robot>");
        out
    }
}

fn origin_tag(o: &Origin) -> String {
    format!(
        "<origin xyz=\"{} {} {}\" rpy=\"{} {} {}\"/>",
        o.xyz[0], o.xyz[1], o.xyz[2], o.rpy[0], o.rpy[1], o.rpy[2]
    )
}

fn validate_geometry(link: &str, g: &Geometry) -> Result<(), ModelError> {
    let dims: Vec<f64> = match g {
        Geometry::Box { half_extents } => half_extents.iter().copied().collect(),
        Geometry::Capsule { radius, length } => vec![*radius, *length],
        Geometry::Sphere { radius } => vec![*radius],
    };
    if dims.iter().all(|d| d.is_finite() && *d > 0.0) {
        Ok(())
    } else {
        Err(ModelError::invalid(
            "positive geometry",
            format!("link `{link}` has a non-positive or non-finite dimension"),
        ))
    }
}

/// Per-joint `(lower, upper)` limits of a finger, base to tip.
pub fn finger_joint_limits(
    chain: &KinematicChain,
    finger: &str,
) -> Result<Vec<(f64, f64)>, ModelError> {
    let f = chain.finger(finger)?;
    Ok(f.joints
        .iter()
        .map(|&j| (chain.joints[j].lower_limit, chain.joints[j].upper_limit))
        .collect())
}

/// The bundled five-finger hand.
pub fn bundled_hand() -> KinematicChain {
    let chain = parse_robot_description(BUNDLED_HAND_URDF).expect("bundled hand description parses");
    chain.check_hand_layout().expect("bundled hand has the five-finger layout");
    chain
}

struct Ctx<'a> {
    doc: &'a roxmltree::Document<'a>,
}

impl Ctx<'_> {
    fn err(&self, node: roxmltree::Node, message: impl Into<String>) -> ModelError {
        ModelError::Parse {
            line: self.doc.text_pos_at(node.range().start).row,
            element: node.tag_name().name().to_string(),
            message: message.into(),
        }
    }

    fn attr<'n>(&self, node: roxmltree::Node<'n, '_>, name: &str) -> Result<&'n str, ModelError> {
        node.attribute(name)
            .ok_or_else(|| self.err(node, format!("missing attribute `{name}`")))
    }

    fn float(&self, node: roxmltree::Node, name: &str) -> Result<f64, ModelError> {
        let raw = self.attr(node, name)?;
        raw.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.err(node, format!("attribute `{name}` is not a finite number: `{raw}`")))
    }

    fn vec3(&self, node: roxmltree::Node, name: &str) -> Result<[f64; 3], ModelError> {
        let raw = self.attr(node, name)?;
        let parts: Vec<f64> = raw
            .split_whitespace()
            .map(str::parse::<f64>)
            .collect::<Result<_, _>>()
            .map_err(|_| self.err(node, format!("attribute `{name}` is not a number triple: `{raw}`")))?;
        match parts.as_slice() {
            [a, b, c] if parts.iter().all(|v| v.is_finite()) => Ok([*a, *b, *c]),
            _ => Err(self.err(node, format!("attribute `{name}` needs three finite numbers: `{raw}`"))),
        }
    }

    fn origin(&self, parent: roxmltree::Node) -> Result<Origin, ModelError> {
        match child(parent, "origin") {
            None => Ok(Origin::default()),
            Some(o) => Ok(Origin {
                xyz: if o.has_attribute("xyz") { self.vec3(o, "xyz")? } else { [0.0; 3] },
                rpy: if o.has_attribute("rpy") { self.vec3(o, "rpy")? } else { [0.0; 3] },
            }),
        }
    }
}

fn child<'a, 'i>(node: roxmltree::Node<'a, 'i>, name: &str) -> Option<roxmltree::Node<'a, 'i>> {
    node.children().find(|c| c.is_element() && c.tag_name().name() == name)
}

const IGNORED: [&str; 3] = ["visual", "material", "inertial"];

/// Parses a robot description into a validated chain.
pub fn parse_robot_description(text: &str) -> Result<KinematicChain, ModelError> {
    let doc = roxmltree::Document::parse(text)?;
    let ctx = Ctx { doc: &doc };
    let robot = doc.root_element();
    if robot.tag_name().name() != "robot" {
        return Err(ctx.err(robot, "root element must be <robot>"));
    }
    let name = robot.attribute("name").unwrap_or("robot").to_string();

    let mut links = Vec::new();
    let mut link_nodes = BTreeMap::new();
    for node in robot.children().filter(|n| n.is_element()) {
        match node.tag_name().name() {
            "link" => {
                let link_name = ctx.attr(node, "name")?.to_string();
                if link_nodes.insert(link_name.clone(), links.len()).is_some() {
                    return Err(ctx.err(node, format!("duplicate link `{link_name}`")));
                }
                links.push(parse_link(&ctx, node, link_name)?);
            }
            "joint" | "finger" => {}
            other if IGNORED.contains(&other) => {}
            other => return Err(ctx.err(node, format!("unsupported element <{other}>"))),
        }
    }

    let mut joints = Vec::new();
    let mut joint_names = BTreeMap::new();
    for node in robot.children().filter(|n| n.is_element() && n.tag_name().name() == "joint") {
        let joint_name = ctx.attr(node, "name")?.to_string();
        if joint_names.insert(joint_name.clone(), joints.len()).is_some() {
            return Err(ctx.err(node, format!("duplicate joint `{joint_name}`")));
        }
        joints.push(parse_joint(&ctx, node, joint_name, &link_nodes)?);
    }

    // Finger joints come from the tree, so resolve them after it is known to
    // be acyclic: build once without fingers, then attach them.
    let bare = KinematicChain::new(name.clone(), links.clone(), joints.clone(), BTreeMap::new())?;
    let mut fingers = BTreeMap::new();
    for node in robot.children().filter(|n| n.is_element() && n.tag_name().name() == "finger") {
        let finger_name = ctx.attr(node, "name")?.to_string();
        let ee_name = ctx.attr(node, "end_effector")?;
        let end_effector = *link_nodes
            .get(ee_name)
            .ok_or_else(|| ctx.err(node, format!("unknown end-effector link `{ee_name}`")))?;
        let finger_joints = bare.paths[end_effector]
            .iter()
            .copied()
            .filter(|&j| joints[j].is_movable())
            .collect();
        let finger = Finger {
            joints: finger_joints,
            end_effector,
        };
        if fingers.insert(finger_name.clone(), finger).is_some() {
            return Err(ctx.err(node, format!("duplicate finger `{finger_name}`")));
        }
    }
    if fingers.is_empty() {
        return Ok(bare);
    }
    KinematicChain::new(name, links, joints, fingers)
}

fn parse_link(ctx: &Ctx, node: roxmltree::Node, name: String) -> Result<LinkSpec, ModelError> {
    let mut geometry = None;
    let mut geometry_origin = Origin::default();
    for c in node.children().filter(|n| n.is_element()) {
        match c.tag_name().name() {
            "collision" => {
                if geometry.is_some() {
                    return Err(ctx.err(c, "only one <collision> per link is supported"));
                }
                geometry_origin = ctx.origin(c)?;
                let g = child(c, "geometry").ok_or_else(|| ctx.err(c, "missing <geometry>"))?;
                let shape = g
                    .children()
                    .find(|n| n.is_element())
                    .ok_or_else(|| ctx.err(g, "empty <geometry>"))?;
                let parsed = match shape.tag_name().name() {
                    "box" => {
                        let [x, y, z] = ctx.vec3(shape, "size")?;
                        Geometry::Box {
                            half_extents: Vector3::new(x, y, z) * 0.5,
                        }
                    }
                    "capsule" => Geometry::Capsule {
                        radius: ctx.float(shape, "radius")?,
                        length: ctx.float(shape, "length")?,
                    },
                    "sphere" => Geometry::Sphere {
                        radius: ctx.float(shape, "radius")?,
                    },
                    other => return Err(ctx.err(shape, format!("unsupported geometry <{other}>"))),
                };
                validate_geometry(&name, &parsed).map_err(|e| ctx.err(shape, e.to_string()))?;
                geometry = Some(parsed);
            }
            other if IGNORED.contains(&other) => {}
            other => return Err(ctx.err(c, format!("unsupported element <{other}> in link"))),
        }
    }
    Ok(LinkSpec {
        name,
        geometry,
        geometry_origin,
    })
}

fn parse_joint(
    ctx: &Ctx,
    node: roxmltree::Node,
    name: String,
    links: &BTreeMap<String, usize>,
) -> Result<JointSpec, ModelError> {
    let kind = match ctx.attr(node, "type")? {
        "revolute" => JointKind::Revolute,
        "fixed" => JointKind::Fixed,
        other => return Err(ctx.err(node, format!("unsupported joint type `{other}`"))),
    };
    let link_ref = |tag: &str| -> Result<usize, ModelError> {
        let n = child(node, tag).ok_or_else(|| ctx.err(node, format!("missing <{tag}>")))?;
        let l = ctx.attr(n, "link")?;
        links
            .get(l)
            .copied()
            .ok_or_else(|| ctx.err(n, format!("unknown link `{l}`")))
    };
    let parent = link_ref("parent")?;
    let child_link = link_ref("child")?;
    for c in node.children().filter(|n| n.is_element()) {
        if !matches!(
            c.tag_name().name(),
            "parent" | "child" | "origin" | "axis" | "limit" | "dynamics"
        ) {
            return Err(ctx.err(c, format!("unsupported element <{}> in joint", c.tag_name().name())));
        }
    }
    let origin = ctx.origin(node)?;

    let (mut axis, mut lower, mut upper, mut damping) = (Vector3::x(), 0.0, 0.0, 0.0);
    if kind == JointKind::Revolute {
        if let Some(a) = child(node, "axis") {
            let [x, y, z] = ctx.vec3(a, "xyz")?;
            let v = Vector3::new(x, y, z);
            let n = v.norm();
            if n < 1e-12 {
                return Err(ctx.err(a, "joint axis has zero length"));
            }
            axis = v / n;
        }
        let limit = child(node, "limit").ok_or_else(|| {
            ModelError::invalid("missing limit", format!("revolute joint `{name}` has no <limit>"))
        })?;
        lower = ctx.float(limit, "lower")?;
        upper = ctx.float(limit, "upper")?;
        if let Some(d) = child(node, "dynamics") {
            if d.has_attribute("damping") {
                damping = ctx.float(d, "damping")?;
            }
        }
    }
    Ok(JointSpec {
        name,
        kind,
        parent,
        child: child_link,
        axis,
        origin,
        lower_limit: lower,
        upper_limit: upper,
        damping,
    })
}
