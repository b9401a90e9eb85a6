//! Triangulations of polygonal domains with tagged boundary parts.
//!
//! A [`Mesh`] stores leaf triangles, a registry of edge midpoints created by
//! red refinement, and the derived face structure. Faces are the maximal
//! segments shared by at most two triangles: on an edge carrying a hanging
//! node the coarse triangle contributes two faces, one per fine neighbor.
//! Meshes are immutable; [`Mesh::refine`] returns a new mesh together with
//! the element genealogy.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::dg_space::quadrature::{EDGE, EDGE_POINTS_PER_FACE};
use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Boundary part a boundary edge belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    /// Γ1: homogeneous Dirichlet part.
    Dirichlet,
    /// Γ2: friction part.
    Friction,
}

impl BoundaryTag {
    pub fn parse(token: &str) -> Option<Self> {
        match token {
            "G1" => Some(BoundaryTag::Dirichlet),
            "G2" => Some(BoundaryTag::Friction),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::Dirichlet => "G1",
            BoundaryTag::Friction => "G2",
        }
    }
}

/// Edge-set membership of a face: interior, on Γ1, or on Γ2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaceKind {
    Interior,
    Dirichlet,
    Friction,
}

impl FaceKind {
    /// Membership in the set of edges not lying on Γ2.
    pub fn not_on_friction(self) -> bool {
        !matches!(self, FaceKind::Friction)
    }
}

/// Quadrature point on a face, with barycentric coordinates with respect to
/// both adjacent triangles (the `minus` entry is zero on boundary faces).
#[derive(Debug, Clone, Copy)]
pub struct FacePoint {
    pub x: Point,
    /// Quadrature weight already scaled by the face length.
    pub weight: f64,
    pub bary_plus: [f64; 3],
    pub bary_minus: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct Face {
    /// Endpoints, smaller vertex id first.
    pub vertices: [usize; 2],
    /// Adjacent triangle with the smaller id.
    pub plus: usize,
    pub minus: Option<usize>,
    pub kind: FaceKind,
    /// Unit normal pointing out of `plus`.
    pub normal: Point,
    pub length: f64,
    pub quad: [FacePoint; EDGE_POINTS_PER_FACE],
}

impl Face {
    /// `(element, sign of its outward normal relative to self.normal, side index)`
    pub fn sides(&self) -> impl Iterator<Item = FaceSide> + '_ {
        std::iter::once(FaceSide {
            element: self.plus,
            sign: 1.0,
            is_plus: true,
        })
        .chain(self.minus.map(|m| FaceSide {
            element: m,
            sign: -1.0,
            is_plus: false,
        }))
    }

    pub fn is_interior(&self) -> bool {
        self.minus.is_some()
    }

    /// Weight of one side in the average: ½ on interior faces, 1 on the boundary.
    pub fn average_weight(&self) -> f64 {
        if self.is_interior() {
            0.5
        } else {
            1.0
        }
    }

    /// Barycentric coordinates of quadrature point `q` in the triangle on `side`.
    #[inline]
    pub fn bary(&self, side: &FaceSide, q: usize) -> [f64; 3] {
        if side.is_plus {
            self.quad[q].bary_plus
        } else {
            self.quad[q].bary_minus
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FaceSide {
    pub element: usize,
    pub sign: f64,
    pub is_plus: bool,
}

/// Triangle geometry.
#[derive(Debug, Clone)]
pub struct Element {
    /// Counter-clockwise vertex ids.
    pub vertices: [usize; 3],
    pub area: f64,
    pub diameter: f64,
    /// Gradients of the barycentric coordinates (constant on the triangle).
    pub grad_bary: [Point; 3],
}

/// Patch tables.
#[derive(Debug, Clone)]
pub struct Patches {
    /// ω_K: triangles touching K (including K).
    pub element: Vec<Vec<usize>>,
    /// ω_e: the triangles adjacent to each face.
    pub face: Vec<Vec<usize>>,
    /// ω_ν: triangles having ν as a vertex.
    pub node: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy)]
pub struct MeshOptions {
    pub min_angle_deg: f64,
}

impl Default for MeshOptions {
    fn default() -> Self {
        Self { min_angle_deg: 20.0 }
    }
}

type EdgeKey = (usize, usize);

fn key(a: usize, b: usize) -> EdgeKey {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    elements: Vec<Element>,
    faces: Vec<Face>,
    element_faces: Vec<Vec<usize>>,
    boundary: BTreeMap<EdgeKey, BoundaryTag>,
    midpoints: HashMap<EdgeKey, usize>,
    hanging: BTreeMap<usize, EdgeKey>,
    parents: Vec<usize>,
    friction_faces: Vec<usize>,
    options: MeshOptions,
}

impl fmt::Debug for Mesh {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Mesh")
            .field("vertices", &self.vertices.len())
            .field("triangles", &self.elements.len())
            .field("faces", &self.faces.len())
            .field("hanging_nodes", &self.hanging.len())
            .finish()
    }
}

impl Mesh {
    /// Builds and validates a conforming mesh.
    pub fn new(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary: &[(usize, usize, BoundaryTag)],
        options: MeshOptions,
    ) -> Result<Self> {
        let nv = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidMesh(format!("triangle {t} references a missing vertex")));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidMesh(format!("triangle {t} is degenerate")));
            }
        }
        let mut tags = BTreeMap::new();
        for &(a, b, tag) in boundary {
            if a >= nv || b >= nv || a == b {
                return Err(Error::InvalidMesh(format!("boundary edge ({a}, {b}) is invalid")));
            }
            if tags.insert(key(a, b), tag).is_some() {
                return Err(Error::InvalidMesh(format!("boundary edge ({a}, {b}) tagged twice")));
            }
        }
        let midpoints = hanging_midpoints(&vertices, &triangles, &tags);
        let parents = (0..triangles.len()).collect();
        let mesh = Self::assemble(vertices, triangles, tags, midpoints, parents, options)?;
        let min_angle = mesh.min_angle_deg();
        if min_angle < options.min_angle_deg {
            return Err(Error::InvalidMesh(format!(
                "minimal angle {min_angle:.2}° is below the threshold {:.2}°",
                options.min_angle_deg
            )));
        }
        Ok(mesh)
    }

    fn assemble(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary: BTreeMap<EdgeKey, BoundaryTag>,
        midpoints: HashMap<EdgeKey, usize>,
        parents: Vec<usize>,
        options: MeshOptions,
    ) -> Result<Self> {
        let mut elements = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let el = element_geometry(&vertices, *tri);
            if el.area <= 0.0 {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} is inverted or degenerate (signed area {:e})",
                    el.area
                )));
            }
            elements.push(el);
        }
        let mut mesh = Mesh {
            vertices,
            elements,
            faces: Vec::new(),
            element_faces: Vec::new(),
            boundary,
            midpoints,
            hanging: BTreeMap::new(),
            parents,
            friction_faces: Vec::new(),
            options,
        };
        mesh.build_faces()?;
        if !mesh.faces.iter().any(|f| f.kind == FaceKind::Dirichlet) {
            return Err(Error::InvalidMesh("the Dirichlet part Γ1 is empty".into()));
        }
        Ok(mesh)
    }

    fn build_faces(&mut self) -> Result<()> {
        let mut edge_map: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
        for (t, el) in self.elements.iter().enumerate() {
            for le in 0..3 {
                let (a, b) = (el.vertices[le], el.vertices[(le + 1) % 3]);
                edge_map.entry(key(a, b)).or_default().push(t);
            }
        }
        let parent_edge: HashMap<usize, EdgeKey> =
            self.midpoints.iter().map(|(&e, &m)| (m, e)).collect();

        let mut done: HashMap<EdgeKey, ()> = HashMap::new();
        let mut used_tags = 0usize;
        self.element_faces = vec![Vec::new(); self.elements.len()];

        for t in 0..self.elements.len() {
            for le in 0..3 {
                let vs = self.elements[t].vertices;
                let k = key(vs[le], vs[(le + 1) % 3]);
                if done.contains_key(&k) {
                    continue;
                }
                let owners = &edge_map[&k];
                match owners.len() {
                    2 => {
                        let (p, m) = (owners[0].min(owners[1]), owners[0].max(owners[1]));
                        if self.boundary.contains_key(&k) {
                            return Err(Error::InvalidMesh(format!(
                                "edge ({}, {}) is interior but tagged as boundary",
                                k.0, k.1
                            )));
                        }
                        self.push_face(k, p, Some(m), FaceKind::Interior);
                        done.insert(k, ());
                    }
                    1 => {
                        if let Some(&tag) = self.boundary.get(&k) {
                            let kind = match tag {
                                BoundaryTag::Dirichlet => FaceKind::Dirichlet,
                                BoundaryTag::Friction => FaceKind::Friction,
                            };
                            self.push_face(k, owners[0], None, kind);
                            used_tags += 1;
                            done.insert(k, ());
                            continue;
                        }
                        // Either a coarse edge carrying a hanging node, or one
                        // half of such an edge seen from the fine side.
                        let coarse = if self.is_split(&k, &edge_map) {
                            Some(k)
                        } else {
                            [k.0, k.1].iter().find_map(|v| {
                                parent_edge
                                    .get(v)
                                    .copied()
                                    .filter(|pe| (pe.0 == k.0 || pe.0 == k.1 || pe.1 == k.0 || pe.1 == k.1)
                                        && self.is_split(pe, &edge_map))
                            })
                        };
                        let Some(coarse) = coarse else {
                            return Err(Error::InvalidMesh(format!(
                                "boundary edge ({}, {}) carries no tag",
                                k.0, k.1
                            )));
                        };
                        let m = self.midpoints[&coarse];
                        let coarse_owner = edge_map[&coarse][0];
                        for half in [key(coarse.0, m), key(m, coarse.1)] {
                            let fine_owner = edge_map[&half][0];
                            let (p, q) = (coarse_owner.min(fine_owner), coarse_owner.max(fine_owner));
                            self.push_face(half, p, Some(q), FaceKind::Interior);
                            done.insert(half, ());
                        }
                        done.insert(coarse, ());
                        self.hanging.insert(m, coarse);
                    }
                    _ => {
                        return Err(Error::InvalidMesh(format!(
                            "edge ({}, {}) is shared by {} triangles",
                            k.0,
                            k.1,
                            owners.len()
                        )))
                    }
                }
            }
        }
        if used_tags != self.boundary.len() {
            let stray = self
                .boundary
                .keys()
                .find(|k| edge_map.get(k).map_or(true, |o| o.len() != 1))
                .copied()
                .unwrap_or((0, 0));
            return Err(Error::InvalidMesh(format!(
                "tagged edge ({}, {}) is not a boundary edge of the triangulation",
                stray.0, stray.1
            )));
        }
        self.friction_faces = (0..self.faces.len())
            .filter(|&f| self.faces[f].kind == FaceKind::Friction)
            .collect();
        Ok(())
    }

    fn is_split(&self, k: &EdgeKey, edge_map: &HashMap<EdgeKey, Vec<usize>>) -> bool {
        let Some(&m) = self.midpoints.get(k) else {
            return false;
        };
        edge_map.get(k).is_some_and(|o| o.len() == 1)
            && edge_map.get(&key(k.0, m)).is_some_and(|o| o.len() == 1)
            && edge_map.get(&key(m, k.1)).is_some_and(|o| o.len() == 1)
    }

    fn push_face(&mut self, k: EdgeKey, plus: usize, minus: Option<usize>, kind: FaceKind) {
        let a = self.vertices[k.0];
        let b = self.vertices[k.1];
        let d = [b[0] - a[0], b[1] - a[1]];
        let length = d[0].hypot(d[1]);
        let mut normal = [d[1] / length, -d[0] / length];
        let c = self.centroid(plus);
        let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        if (mid[0] - c[0]) * normal[0] + (mid[1] - c[1]) * normal[1] < 0.0 {
            normal = [-normal[0], -normal[1]];
        }
        let quad = std::array::from_fn(|q| {
            let t = EDGE.points[q];
            let x = [a[0] + t * d[0], a[1] + t * d[1]];
            FacePoint {
                x,
                weight: EDGE.weights[q] * length,
                bary_plus: self.barycentric(plus, x),
                bary_minus: minus.map_or([0.0; 3], |m| self.barycentric(m, x)),
            }
        });
        let id = self.faces.len();
        self.faces.push(Face {
            vertices: [k.0, k.1],
            plus,
            minus,
            kind,
            normal,
            length,
            quad,
        });
        self.element_faces[plus].push(id);
        if let Some(m) = minus {
            self.element_faces[m].push(id);
        }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn element(&self, k: usize) -> &Element {
        &self.elements[k]
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face(&self, f: usize) -> &Face {
        &self.faces[f]
    }

    /// Face ids of triangle `k` (three, or more when hanging nodes sit on its edges).
    pub fn element_faces(&self, k: usize) -> &[usize] {
        &self.element_faces[k]
    }

    /// Ids of the faces on Γ2, in increasing order. Multipliers are laid out
    /// along this list.
    pub fn friction_faces(&self) -> &[usize] {
        &self.friction_faces
    }

    pub fn faces_of_kind(&self, kind: FaceKind) -> impl Iterator<Item = usize> + '_ {
        (0..self.faces.len()).filter(move |&f| self.faces[f].kind == kind)
    }

    /// Hanging vertices mapped to the endpoints of the coarse edge they split.
    pub fn hanging_nodes(&self) -> &BTreeMap<usize, (usize, usize)> {
        &self.hanging
    }

    /// For each triangle, the index of the triangle of the previous mesh it
    /// was obtained from (itself if unrefined). Identity for loaded meshes.
    pub fn parents(&self) -> &[usize] {
        &self.parents
    }

    pub fn boundary_tags(&self) -> impl Iterator<Item = ((usize, usize), BoundaryTag)> + '_ {
        self.boundary.iter().map(|(&k, &t)| (k, t))
    }

    pub fn options(&self) -> MeshOptions {
        self.options
    }

    pub fn centroid(&self, k: usize) -> Point {
        let [a, b, c] = self.elements[k].vertices.map(|v| self.vertices[v]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn element_points(&self, k: usize) -> [Point; 3] {
        self.elements[k].vertices.map(|v| self.vertices[v])
    }

    /// Barycentric coordinates of `x` with respect to triangle `k`.
    pub fn barycentric(&self, k: usize, x: Point) -> [f64; 3] {
        let el = &self.elements[k];
        let p0 = self.vertices[el.vertices[0]];
        let g = el.grad_bary;
        let l1 = g[1][0] * (x[0] - p0[0]) + g[1][1] * (x[1] - p0[1]);
        let l2 = g[2][0] * (x[0] - p0[0]) + g[2][1] * (x[1] - p0[1]);
        [1.0 - l1 - l2, l1, l2]
    }

    /// Physical point for barycentric coordinates on triangle `k`.
    pub fn point(&self, k: usize, bary: &[f64; 3]) -> Point {
        let pts = self.element_points(k);
        [
            bary[0] * pts[0][0] + bary[1] * pts[1][0] + bary[2] * pts[2][0],
            bary[0] * pts[0][1] + bary[1] * pts[1][1] + bary[2] * pts[2][1],
        ]
    }

    pub fn area(&self) -> f64 {
        self.elements.iter().map(|e| e.area).sum()
    }

    pub fn min_angle_deg(&self) -> f64 {
        (0..self.elements.len())
            .map(|k| element_min_angle(&self.element_points(k)))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn element_min_angle_deg(&self, k: usize) -> f64 {
        element_min_angle(&self.element_points(k))
    }

    pub fn max_diameter(&self) -> f64 {
        self.elements.iter().map(|e| e.diameter).fold(0.0, f64::max)
    }

    /// Vertices lying on Γ1 (endpoints of Dirichlet faces).
    pub fn dirichlet_vertices(&self) -> BTreeSet<usize> {
        self.faces
            .iter()
            .filter(|f| f.kind == FaceKind::Dirichlet)
            .flat_map(|f| f.vertices)
            .collect()
    }

    /// True if no edge carries more than one hanging node.
    pub fn is_one_irregular(&self) -> bool {
        self.elements.iter().all(|el| !needs_closure(&el.vertices, &self.midpoints))
    }

    pub fn patches(&self) -> Patches {
        let mut node = vec![Vec::new(); self.vertices.len()];
        for (k, el) in self.elements.iter().enumerate() {
            for &v in &el.vertices {
                node[v].push(k);
            }
        }
        let mut touching: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); self.elements.len()];
        for (k, el) in self.elements.iter().enumerate() {
            for &v in &el.vertices {
                touching[k].extend(node[v].iter().copied());
            }
        }
        // Triangles meeting a coarse edge only at its hanging node.
        for (&m, &(a, b)) in &self.hanging {
            let coarse: Vec<usize> = node[a]
                .iter()
                .copied()
                .filter(|k| node[b].contains(k))
                .collect();
            for &c in &coarse {
                for &fine in &node[m] {
                    touching[c].insert(fine);
                    touching[fine].insert(c);
                }
            }
        }
        let face = self
            .faces
            .iter()
            .map(|f| f.sides().map(|s| s.element).collect())
            .collect();
        Patches {
            element: touching.into_iter().map(|s| s.into_iter().collect()).collect(),
            face,
            node,
        }
    }

    /// Red-refines every marked triangle and the triangles needed to keep
    /// the mesh 1-irregular.
    ///
    /// # Panics
    /// If a marked id is not a triangle of this mesh.
    pub fn refine(&self, marked: &[usize]) -> Mesh {
        let n = self.elements.len();
        let mut vertices = self.vertices.clone();
        let mut midpoints = self.midpoints.clone();
        let mut boundary = self.boundary.clone();
        let mut tris: Vec<[usize; 3]> = self.elements.iter().map(|e| e.vertices).collect();
        let mut origin: Vec<usize> = (0..n).collect();

        let mut queue: Vec<usize> = marked.to_vec();
        queue.sort_unstable();
        queue.dedup();
        if let Some(&bad) = queue.iter().find(|&&t| t >= n) {
            panic!("marked triangle {bad} does not exist (mesh has {n})");
        }

        while !queue.is_empty() {
            for &t in &queue {
                let [a, b, c] = tris[t];
                let mab = midpoint(a, b, &mut vertices, &mut midpoints, &mut boundary);
                let mbc = midpoint(b, c, &mut vertices, &mut midpoints, &mut boundary);
                let mca = midpoint(c, a, &mut vertices, &mut midpoints, &mut boundary);
                tris[t] = [a, mab, mca];
                for child in [[mab, b, mbc], [mca, mbc, c], [mab, mbc, mca]] {
                    tris.push(child);
                    origin.push(origin[t]);
                }
            }
            queue = (0..tris.len())
                .filter(|&t| needs_closure(&tris[t], &midpoints))
                .collect();
        }

        Mesh::assemble(vertices, tris, boundary, midpoints, origin, self.options)
            .expect("red refinement of a valid mesh is valid")
    }

    /// Refines every triangle once.
    pub fn refine_uniform(&self) -> Mesh {
        let all: Vec<usize> = (0..self.elements.len()).collect();
        self.refine(&all)
    }

    /// Serializes the leaf mesh in the plain-text mesh format.
    pub fn to_mesh_string(&self) -> String {
        use std::fmt::Write;
        let mut s = String::from("dgmesh 1\n");
        let _ = writeln!(s, "vertices {}", self.vertices.len());
        for v in &self.vertices {
            let _ = writeln!(s, "{:.17e} {:.17e}", v[0], v[1]);
        }
        let _ = writeln!(s, "triangles {}", self.elements.len());
        for el in &self.elements {
            let _ = writeln!(s, "{} {} {}", el.vertices[0], el.vertices[1], el.vertices[2]);
        }
        let _ = writeln!(s, "boundary {}", self.boundary.len());
        for (&(a, b), tag) in &self.boundary {
            let _ = writeln!(s, "{a} {b} {}", tag.as_str());
        }
        s
    }
}

/// Hanging nodes of a leaf triangulation given without its history: an
/// untagged edge with a single triangle whose exact midpoint is a vertex
/// joined to both endpoints by single-triangle edges.
fn hanging_midpoints(
    vertices: &[Point],
    triangles: &[[usize; 3]],
    tags: &BTreeMap<EdgeKey, BoundaryTag>,
) -> HashMap<EdgeKey, usize> {
    let mut owners: HashMap<EdgeKey, usize> = HashMap::new();
    for tri in triangles {
        for le in 0..3 {
            *owners.entry(key(tri[le], tri[(le + 1) % 3])).or_default() += 1;
        }
    }
    let at: HashMap<(u64, u64), usize> = vertices
        .iter()
        .enumerate()
        .map(|(i, p)| ((p[0].to_bits(), p[1].to_bits()), i))
        .collect();
    let single = |k: &EdgeKey| owners.get(k) == Some(&1);
    let mut out = HashMap::new();
    for (&(a, b), &n) in &owners {
        if n != 1 || tags.contains_key(&(a, b)) {
            continue;
        }
        let (pa, pb) = (vertices[a], vertices[b]);
        let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
        if let Some(&m) = at.get(&(mid[0].to_bits(), mid[1].to_bits())) {
            if single(&key(a, m)) && single(&key(m, b)) {
                out.insert((a, b), m);
            }
        }
    }
    out
}

fn midpoint(
    a: usize,
    b: usize,
    vertices: &mut Vec<Point>,
    midpoints: &mut HashMap<EdgeKey, usize>,
    boundary: &mut BTreeMap<EdgeKey, BoundaryTag>,
) -> usize {
    let k = key(a, b);
    if let Some(&m) = midpoints.get(&k) {
        return m;
    }
    let (pa, pb) = (vertices[a], vertices[b]);
    let m = vertices.len();
    vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
    midpoints.insert(k, m);
    if let Some(tag) = boundary.remove(&k) {
        boundary.insert(key(a, m), tag);
        boundary.insert(key(m, b), tag);
    }
    m
}

/// A leaf triangle must be refined when one of its edges carries a hanging
/// node which itself splits a finer edge.
fn needs_closure(tri: &[usize; 3], midpoints: &HashMap<EdgeKey, usize>) -> bool {
    (0..3).any(|le| {
        let (a, b) = (tri[le], tri[(le + 1) % 3]);
        midpoints.get(&key(a, b)).is_some_and(|&m| {
            midpoints.contains_key(&key(a, m)) || midpoints.contains_key(&key(m, b))
        })
    })
}

fn element_geometry(vertices: &[Point], tri: [usize; 3]) -> Element {
    let [p0, p1, p2] = tri.map(|v| vertices[v]);
    let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    let area = 0.5 * det;
    // ∇λ_i = rot(p_{i+2} − p_{i+1}) / (2|K|)
    let grad = |pa: Point, pb: Point| [(pa[1] - pb[1]) / det, (pb[0] - pa[0]) / det];
    let grad_bary = [grad(p1, p2), grad(p2, p0), grad(p0, p1)];
    let len = |a: Point, b: Point| (a[0] - b[0]).hypot(a[1] - b[1]);
    let diameter = len(p0, p1).max(len(p1, p2)).max(len(p2, p0));
    Element {
        vertices: tri,
        area,
        diameter,
        grad_bary,
    }
}

fn element_min_angle(p: &[Point; 3]) -> f64 {
    (0..3)
        .map(|i| {
            let (a, b, c) = (p[i], p[(i + 1) % 3], p[(i + 2) % 3]);
            let u = [b[0] - a[0], b[1] - a[1]];
            let v = [c[0] - a[0], c[1] - a[1]];
            let cos = (u[0] * v[0] + u[1] * v[1]) / (u[0].hypot(u[1]) * v[0].hypot(v[1]));
            cos.clamp(-1.0, 1.0).acos().to_degrees()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Parses the plain-text mesh format:
///
/// ```text
/// dgmesh 1
/// vertices N      then N lines `x y`
/// triangles M     then M lines `i j k` (0-based, counter-clockwise)
/// boundary B      then B lines `i j TAG` with TAG in {G1, G2}
/// ```
///
/// Tokens are whitespace separated and `#` starts a comment.
pub fn load_mesh(source: &str) -> Result<Mesh> {
    load_mesh_with(source, MeshOptions::default())
}

pub fn load_mesh_with(source: &str, options: MeshOptions) -> Result<Mesh> {
    let mut lines = source
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let last_line = source.lines().count();

    let mut next = |what: &str| -> Result<(usize, Vec<&str>)> {
        lines
            .next()
            .map(|(n, l)| (n, l.split_whitespace().collect()))
            .ok_or_else(|| Error::Parse {
                line: last_line,
                msg: format!("unexpected end of file, expected {what}"),
            })
    };
    fn perr(line: usize, msg: impl Into<String>) -> Error {
        Error::Parse { line, msg: msg.into() }
    }
    fn section(line: usize, toks: &[&str], name: &str) -> Result<usize> {
        if toks.len() != 2 || toks[0] != name {
            return Err(perr(line, format!("expected `{name} <count>`")));
        }
        toks[1]
            .parse()
            .map_err(|_| perr(line, format!("invalid {name} count `{}`", toks[1])))
    }

    let (line, header) = next("header")?;
    if header != ["dgmesh", "1"] {
        return Err(perr(line, "expected header `dgmesh 1`"));
    }

    let (line, toks) = next("vertices section")?;
    let nv = section(line, &toks, "vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, toks) = next("vertex coordinates")?;
        if toks.len() != 2 {
            return Err(perr(line, "expected two coordinates"));
        }
        let x: f64 = toks[0].parse().map_err(|_| perr(line, format!("invalid number `{}`", toks[0])))?;
        let y: f64 = toks[1].parse().map_err(|_| perr(line, format!("invalid number `{}`", toks[1])))?;
        if !x.is_finite() || !y.is_finite() {
            return Err(perr(line, "non-finite coordinate"));
        }
        vertices.push([x, y]);
    }

    let parse_index = |line: usize, tok: &str| -> Result<usize> {
        let v: usize = tok.parse().map_err(|_| perr(line, format!("invalid index `{tok}`")))?;
        if v >= nv {
            return Err(perr(line, format!("vertex index {v} out of range")));
        }
        Ok(v)
    };

    let (line, toks) = next("triangles section")?;
    let nt = section(line, &toks, "triangles")?;
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (line, toks) = next("triangle")?;
        if toks.len() != 3 {
            return Err(perr(line, "expected three vertex indices"));
        }
        triangles.push([
            parse_index(line, toks[0])?,
            parse_index(line, toks[1])?,
            parse_index(line, toks[2])?,
        ]);
    }

    let (line, toks) = next("boundary section")?;
    let nb = section(line, &toks, "boundary")?;
    let mut boundary = Vec::with_capacity(nb);
    for _ in 0..nb {
        let (line, toks) = next("boundary edge")?;
        if toks.len() != 3 {
            return Err(perr(line, "expected `i j TAG`"));
        }
        let tag = BoundaryTag::parse(toks[2])
            .ok_or_else(|| perr(line, format!("unknown boundary tag `{}` (expected G1 or G2)", toks[2])))?;
        boundary.push((parse_index(line, toks[0])?, parse_index(line, toks[1])?, tag));
    }
    if let Some((line, _)) = lines.next() {
        return Err(perr(line, "trailing content after boundary section"));
    }

    Mesh::new(vertices, triangles, &boundary, options)
}

/// Structured triangulation of `[x0, x1] × [y0, y1]` with `nx × ny` cells, each
/// split along its rising diagonal. `tag` assigns a boundary part from the
/// midpoint of each boundary edge.
pub fn structured_rectangle(
    (x0, x1): (f64, f64),
    (y0, y1): (f64, f64),
    nx: usize,
    ny: usize,
    tag: impl Fn(Point) -> BoundaryTag,
) -> Result<Mesh> {
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([
                x0 + (x1 - x0) * i as f64 / nx as f64,
                y0 + (y1 - y0) * j as f64 / ny as f64,
            ]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    let mut boundary = Vec::new();
    let mut push = |a: usize, b: usize, vertices: &Vec<Point>| {
        let (pa, pb) = (vertices[a], vertices[b]);
        let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
        boundary.push((a, b, tag(mid)));
    };
    for i in 0..nx {
        push(id(i, 0), id(i + 1, 0), &vertices);
        push(id(i, ny), id(i + 1, ny), &vertices);
    }
    for j in 0..ny {
        push(id(0, j), id(0, j + 1), &vertices);
        push(id(nx, j), id(nx, j + 1), &vertices);
    }
    Mesh::new(vertices, triangles, &boundary, MeshOptions::default())
}

/// Unit square, `n × n` cells, Γ2 = bottom edge `{y = 0}`, Γ1 = the rest.
pub fn unit_square_bottom_friction(n: usize) -> Result<Mesh> {
    structured_rectangle((0.0, 1.0), (0.0, 1.0), n, n, |m| {
        if m[1] == 0.0 {
            BoundaryTag::Friction
        } else {
            BoundaryTag::Dirichlet
        }
    })
}

/// L-shaped domain `(0,1)² \ [½,1)×(0,½]` made of three squares of side ½,
/// each split in two. Γ2 is the left side `{x = 0}`.
pub fn l_shape() -> Result<Mesh> {
    let vertices = vec![
        [0.0, 0.0], // 0
        [0.5, 0.0], // 1
        [0.0, 0.5], // 2
        [0.5, 0.5], // 3
        [1.0, 0.5], // 4
        [0.0, 1.0], // 5
        [0.5, 1.0], // 6
        [1.0, 1.0], // 7
    ];
    let triangles = vec![[0, 1, 3], [0, 3, 2], [2, 3, 6], [2, 6, 5], [3, 4, 7], [3, 7, 6]];
    use BoundaryTag::*;
    let boundary = [
        (0, 1, Dirichlet),
        (1, 3, Dirichlet),
        (3, 4, Dirichlet),
        (4, 7, Dirichlet),
        (7, 6, Dirichlet),
        (6, 5, Dirichlet),
        (5, 2, Friction),
        (2, 0, Friction),
    ];
    Mesh::new(vertices, triangles, &boundary, MeshOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE2: &str = "dgmesh 1
vertices 4
0 0
1 0
1 1
0 1
triangles 2
0 1 2
0 2 3
boundary 4
0 1 G2
1 2 G1
2 3 G1
3 0 G1
";

    fn count(m: &Mesh, kind: FaceKind) -> usize {
        m.faces_of_kind(kind).count()
    }

    #[test]
    fn smallest_square_classification() {
        let m = load_mesh(SQUARE2).unwrap();
        assert_eq!(count(&m, FaceKind::Interior), 1);
        assert_eq!(count(&m, FaceKind::Friction), 1);
        assert_eq!(count(&m, FaceKind::Dirichlet), 3);
        let diag = m.faces().iter().find(|f| f.is_interior()).unwrap();
        assert_eq!(diag.plus, 0);
        assert_eq!(diag.minus, Some(1));
        // outward from triangle 0 (below the diagonal)
        let s = 0.5f64.sqrt();
        assert!((diag.normal[0] + s).abs() < 1e-15 && (diag.normal[1] - s).abs() < 1e-15);
    }

    #[test]
    fn untagged_boundary_edge_is_rejected() {
        let src = SQUARE2.replace("boundary 4", "boundary 3").replace("3 0 G1\n", "");
        let err = load_mesh(&src).unwrap_err();
        assert!(matches!(err, Error::InvalidMesh(ref m) if m.contains("no tag")), "{err}");
    }

    #[test]
    fn inverted_triangle_is_rejected() {
        let src = SQUARE2.replace("0 1 2\n", "0 2 1\n");
        assert!(matches!(load_mesh(&src), Err(Error::InvalidMesh(_))));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let src = SQUARE2.replace("1 1\n", "1 x\n");
        match load_mesh(&src) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
        let src = SQUARE2.replace("2 3 G1", "2 3 G7");
        assert!(matches!(load_mesh(&src), Err(Error::Parse { line: 13, .. })));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let src = format!("# a mesh\n\n{}", SQUARE2.replace("0 0\n", "0 0 # origin\n"));
        assert_eq!(load_mesh(&src).unwrap().num_elements(), 2);
    }

    #[test]
    fn missing_dirichlet_part_is_rejected() {
        let src = SQUARE2.replace("G1", "G2");
        assert!(matches!(load_mesh(&src), Err(Error::InvalidMesh(ref m)) if m.contains("Γ1")));
    }

    #[test]
    fn lshape_has_eight_boundary_edges() {
        let m = l_shape().unwrap();
        let nb = m.faces().iter().filter(|f| !f.is_interior()).count();
        assert_eq!(nb, 8);
        assert!((m.area() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn refining_one_triangle_creates_one_hanging_node() {
        let m = load_mesh(SQUARE2).unwrap();
        let r = m.refine(&[0]);
        assert_eq!(r.num_elements(), 5);
        assert_eq!(r.hanging_nodes().len(), 1);
        let (&h, &(a, b)) = r.hanging_nodes().iter().next().unwrap();
        assert_eq!(r.vertices()[h], [0.5, 0.5]);
        assert_eq!(key(a, b), (0, 2));
        // the diagonal is now two faces, both adjacent to the untouched sibling
        let sibling_faces: Vec<_> = r.element_faces(1).iter().map(|&f| r.face(f)).collect();
        assert_eq!(sibling_faces.len(), 4);
        assert_eq!(sibling_faces.iter().filter(|f| f.is_interior()).count(), 2);
        assert!(r.is_one_irregular());
        assert_eq!(r.parents(), &[0, 1, 0, 0, 0]);
    }

    #[test]
    fn empty_marking_is_identity() {
        let m = unit_square_bottom_friction(2).unwrap();
        let r = m.refine(&[]);
        assert_eq!(r.num_elements(), m.num_elements());
        assert_eq!(r.vertices(), m.vertices());
        assert_eq!(r.faces().len(), m.faces().len());
    }

    #[test]
    fn uniform_refinement_preserves_angles_and_area() {
        let m = l_shape().unwrap();
        let r = m.refine_uniform();
        assert_eq!(r.num_elements(), 4 * m.num_elements());
        assert!((r.min_angle_deg() - m.min_angle_deg()).abs() < 1e-12);
        assert!((r.area() - m.area()).abs() < 1e-14);
        assert!(r.hanging_nodes().is_empty());
    }

    #[test]
    fn closure_restores_one_irregularity() {
        let mut m = unit_square_bottom_friction(2).unwrap();
        // repeatedly refine the triangle touching the origin
        for _ in 0..5 {
            let k = (0..m.num_elements())
                .find(|&k| m.element(k).vertices.iter().any(|&v| m.vertices()[v] == [0.0, 0.0]))
                .unwrap();
            m = m.refine(&[k]);
            assert!(m.is_one_irregular());
            assert!((m.area() - 1.0).abs() < 1e-13);
            for f in m.faces() {
                let n = f.sides().count();
                assert_eq!(n, if f.kind == FaceKind::Interior { 2 } else { 1 });
            }
        }
        assert!(!m.hanging_nodes().is_empty());
        assert!((m.min_angle_deg() - 45.0).abs() < 1e-9);
    }

    #[test]
    fn face_quadrature_points_match_in_both_triangles() {
        let mut m = unit_square_bottom_friction(2).unwrap();
        m = m.refine(&[0, 3]);
        m = m.refine(&[1]);
        for f in m.faces() {
            for q in &f.quad {
                assert!((m.point(f.plus, &q.bary_plus)[0] - q.x[0]).abs() < 1e-14);
                if let Some(mi) = f.minus {
                    let p = m.point(mi, &q.bary_minus);
                    assert!((p[0] - q.x[0]).abs() < 1e-14 && (p[1] - q.x[1]).abs() < 1e-14);
                    assert!(q.bary_minus.iter().all(|&l| l > -1e-14));
                }
            }
        }
    }

    #[test]
    fn patches_of_small_meshes() {
        let m = load_mesh(SQUARE2).unwrap();
        let p = m.patches();
        assert_eq!(p.element[0], vec![0, 1]);
        assert_eq!(p.element[1], vec![0, 1]);
        let diag = m.faces().iter().position(|f| f.is_interior()).unwrap();
        assert_eq!(p.face[diag], vec![0, 1]);

        // 2×2 cells with rising diagonals: the centre node touches 6 triangles
        let m = unit_square_bottom_friction(2).unwrap();
        let centre = m.vertices().iter().position(|&v| v == [0.5, 0.5]).unwrap();
        assert_eq!(m.patches().node[centre].len(), 6);
    }

    #[test]
    fn hanging_node_patches_link_coarse_and_fine() {
        let m = load_mesh(SQUARE2).unwrap().refine(&[0]);
        let p = m.patches();
        // the sibling, the children at (0,0) and (1,1), and the middle child
        // which meets it only at the hanging node; the child at (1,0) is apart
        assert_eq!(p.element[1], vec![0, 1, 3, 4]);
    }

    #[test]
    fn round_trip_through_text_format() {
        let m = l_shape().unwrap().refine_uniform();
        let again = load_mesh(&m.to_mesh_string()).unwrap();
        assert_eq!(again.num_elements(), m.num_elements());
        assert_eq!(again.faces().len(), m.faces().len());
    }

    #[test]
    fn saved_adaptive_mesh_keeps_its_hanging_nodes() {
        let m = unit_square_bottom_friction(2).unwrap().refine(&[0]);
        assert!(!m.hanging_nodes().is_empty());
        let again = load_mesh(&m.to_mesh_string()).unwrap();
        assert_eq!(again.hanging_nodes(), m.hanging_nodes());
        assert_eq!(again.faces().len(), m.faces().len());
        // and it refines like the original
        assert_eq!(again.refine(&[1]).num_elements(), m.refine(&[1]).num_elements());
    }
}
