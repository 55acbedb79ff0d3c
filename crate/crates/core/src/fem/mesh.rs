//! Quadrilateral meshes and their line-oriented text format.

use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use super::element::Quad;
use crate::error::{Error, Result};

/// Material id of brick units in generated masonry meshes.
pub const BRICK: usize = 0;
/// Material id of mortar joints in generated masonry meshes.
pub const MORTAR: usize = 1;

/// Plane-stress mesh of 4-node quadrilaterals with counter-clockwise connectivity.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    pub elements: Vec<[usize; 4]>,
    pub material: Vec<usize>,
    pub thickness: f64,
}

impl Mesh {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn element_coords(&self, e: usize) -> [[f64; 2]; 4] {
        self.elements[e].map(|n| self.nodes[n])
    }

    pub fn element_area(&self, e: usize) -> f64 {
        let c = self.element_coords(e);
        0.5 * (0..4)
            .map(|i| {
                let (a, b) = (c[i], c[(i + 1) % 4]);
                a[0] * b[1] - b[0] * a[1]
            })
            .sum::<f64>()
    }

    pub fn centroid(&self, e: usize) -> [f64; 2] {
        let c = self.element_coords(e);
        [
            c.iter().map(|p| p[0]).sum::<f64>() / 4.0,
            c.iter().map(|p| p[1]).sum::<f64>() / 4.0,
        ]
    }

    pub fn area(&self) -> f64 {
        (0..self.element_count()).map(|e| self.element_area(e)).sum()
    }

    /// `(x_min, y_min, x_max, y_max)`.
    pub fn bounding_box(&self) -> [f64; 4] {
        self.nodes.iter().fold(
            [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY],
            |b, p| [b[0].min(p[0]), b[1].min(p[1]), b[2].max(p[0]), b[3].max(p[1])],
        )
    }

    fn edge_tolerance(&self) -> f64 {
        let b = self.bounding_box();
        1e-9 * (b[2] - b[0]).max(b[3] - b[1])
    }

    /// Nodes on the outer edges of the bounding box, ascending.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        let b = self.bounding_box();
        let tol = self.edge_tolerance();
        (0..self.node_count())
            .filter(|&n| {
                let [x, y] = self.nodes[n];
                (x - b[0]).abs() <= tol || (x - b[2]).abs() <= tol || (y - b[1]).abs() <= tol || (y - b[3]).abs() <= tol
            })
            .collect()
    }

    /// Nodes on the bottom edge, ascending.
    pub fn bottom_nodes(&self) -> Vec<usize> {
        let (y0, tol) = (self.bounding_box()[1], self.edge_tolerance());
        (0..self.node_count()).filter(|&n| (self.nodes[n][1] - y0).abs() <= tol).collect()
    }

    /// Nodes on the top edge, ascending.
    pub fn top_nodes(&self) -> Vec<usize> {
        let (y1, tol) = (self.bounding_box()[3], self.edge_tolerance());
        (0..self.node_count()).filter(|&n| (self.nodes[n][1] - y1).abs() <= tol).collect()
    }

    /// Structural checks: node references, positive Jacobians, material ids.
    pub fn validate(&self, material_count: usize) -> Result<()> {
        if self.elements.len() != self.material.len() {
            return Err(Error::Geometry("material list length differs from element count".into()));
        }
        if !(self.thickness > 0.0) {
            return Err(Error::Geometry(format!("thickness {} must be positive", self.thickness)));
        }
        for (e, conn) in self.elements.iter().enumerate() {
            if conn.iter().any(|&n| n >= self.nodes.len()) {
                return Err(Error::Geometry(format!("element {e} references a missing node")));
            }
            if self.material[e] >= material_count {
                return Err(Error::Geometry(format!(
                    "element {e} has material id {} but only {material_count} materials are defined",
                    self.material[e]
                )));
            }
            if !Quad::new(self.element_coords(e)).jacobians_positive() {
                return Err(Error::Geometry(format!("element {e} has a non-positive Jacobian")));
            }
        }
        Ok(())
    }

    /// Fraction of the mesh area carrying material `id`.
    pub fn volume_fraction(&self, id: usize) -> f64 {
        let part: f64 = (0..self.element_count())
            .filter(|&e| self.material[e] == id)
            .map(|e| self.element_area(e))
            .sum();
        part / self.area()
    }

    /// Text serialization: node count, `x y` lines, element count,
    /// `n1 n2 n3 n4 mat_id` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{}", self.nodes.len()).unwrap();
        for [x, y] in &self.nodes {
            writeln!(s, "{x} {y}").unwrap();
        }
        writeln!(s, "{}", self.elements.len()).unwrap();
        for (conn, m) in self.elements.iter().zip(&self.material) {
            writeln!(s, "{} {} {} {} {m}", conn[0], conn[1], conn[2], conn[3]).unwrap();
        }
        s
    }

    /// Parse the text format; thickness is not part of the file.
    pub fn from_text(text: &str, thickness: f64) -> Result<Self> {
        let bad = |msg: String| Error::Parse {
            what: "mesh file".into(),
            message: msg,
        };
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty()).enumerate();
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| bad(format!("unexpected end of file while reading {what}")))
        };
        let count = |(i, l): (usize, &str), what: &str| {
            l.parse::<usize>()
                .map_err(|_| bad(format!("line {}: expected {what} count, found `{l}`", i + 1)))
        };
        let nn = count(next("node count")?, "node")?;
        let mut nodes = Vec::with_capacity(nn);
        for _ in 0..nn {
            let (i, l) = next("nodes")?;
            let v: Vec<f64> = l
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(format!("line {}: malformed node `{l}`", i + 1)))?;
            if v.len() != 2 {
                return Err(bad(format!("line {}: node needs 2 coordinates", i + 1)));
            }
            nodes.push([v[0], v[1]]);
        }
        let ne = count(next("element count")?, "element")?;
        let mut elements = Vec::with_capacity(ne);
        let mut material = Vec::with_capacity(ne);
        for _ in 0..ne {
            let (i, l) = next("elements")?;
            let v: Vec<usize> = l
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(format!("line {}: malformed element `{l}`", i + 1)))?;
            if v.len() != 5 {
                return Err(bad(format!("line {}: element needs 4 nodes and a material id", i + 1)));
            }
            elements.push([v[0], v[1], v[2], v[3]]);
            material.push(v[4]);
        }
        Ok(Self {
            nodes,
            elements,
            material,
            thickness,
        })
    }

    /// SHA-256 of the text serialization, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }
}

/// Per-element crack-band lengths `√A_e` and their mean.
pub fn characteristic_lengths(mesh: &Mesh) -> (Vec<f64>, f64) {
    let l: Vec<f64> = (0..mesh.element_count()).map(|e| mesh.element_area(e).sqrt()).collect();
    let mean = l.iter().sum::<f64>() / l.len().max(1) as f64;
    (l, mean)
}

/// Structured rectangular grid over breakpoint lists, material by centroid.
pub fn structured_grid(xs: &[f64], ys: &[f64], thickness: f64, material: impl Fn(f64, f64) -> usize) -> Mesh {
    let nx = xs.len();
    let nodes: Vec<[f64; 2]> = ys.iter().flat_map(|&y| xs.iter().map(move |&x| [x, y])).collect();
    let mut elements = Vec::new();
    let mut mats = Vec::new();
    for j in 0..ys.len() - 1 {
        for i in 0..nx - 1 {
            let n1 = j * nx + i;
            elements.push([n1, n1 + 1, n1 + 1 + nx, n1 + nx]);
            mats.push(material(0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])));
        }
    }
    Mesh {
        nodes,
        elements,
        material: mats,
        thickness,
    }
}

/// Uniform `nx × ny` grid of a single material.
pub fn uniform_grid(width: f64, height: f64, nx: usize, ny: usize, thickness: f64) -> Result<Mesh> {
    if !(width > 0.0 && height > 0.0) || nx == 0 || ny == 0 {
        return Err(Error::Geometry(format!(
            "grid needs positive size and counts, got {width} x {height} with {nx} x {ny}"
        )));
    }
    let xs: Vec<f64> = (0..=nx).map(|i| width * i as f64 / nx as f64).collect();
    let ys: Vec<f64> = (0..=ny).map(|j| height * j as f64 / ny as f64).collect();
    Ok(structured_grid(&xs, &ys, thickness, |_, _| 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lengths_of_squares() {
        let m = uniform_grid(1.0, 0.5, 4, 2, 1.0).unwrap();
        let (l, mean) = characteristic_lengths(&m);
        assert!(l.iter().all(|&v| (v - 0.25).abs() < 1e-15));
        assert!((mean - 0.25).abs() < 1e-15);
        let extra = Mesh {
            nodes: vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [2.0, 0.0], [6.0, 0.0], [6.0, 4.0], [2.0, 4.0]],
            elements: vec![[0, 1, 2, 3], [4, 5, 6, 7]],
            material: vec![0, 0],
            thickness: 1.0,
        };
        assert_eq!(characteristic_lengths(&extra).1, 2.5);
    }

    #[test]
    fn text_round_trip() {
        let m = uniform_grid(0.3, 0.2, 3, 2, 1.0).unwrap();
        let back = Mesh::from_text(&m.to_text(), 1.0).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.hash(), m.hash());
        assert!(Mesh::from_text("2\n0 0\n", 1.0).is_err());
        assert!(Mesh::from_text("1\n0 x\n0\n", 1.0).is_err());
    }

    #[test]
    fn validation_catches_inverted_elements() {
        let mut m = uniform_grid(1.0, 1.0, 1, 1, 1.0).unwrap();
        assert!(m.validate(1).is_ok());
        m.elements[0] = [0, 2, 1, 3];
        assert!(matches!(m.validate(1), Err(Error::Geometry(_))));
        let m = uniform_grid(1.0, 1.0, 1, 1, 1.0).unwrap();
        assert!(m.validate(0).is_err());
    }

    #[test]
    fn boundary_detection() {
        let m = uniform_grid(1.0, 1.0, 3, 3, 1.0).unwrap();
        assert_eq!(m.boundary_nodes().len(), 12);
        assert_eq!(m.bottom_nodes(), vec![0, 1, 2, 3]);
        assert_eq!(m.top_nodes(), vec![12, 13, 14, 15]);
    }
}
