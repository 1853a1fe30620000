//! Uniform rectangular partition of an axis-aligned domain.
//!
//! Cells are indexed row-major, `cell = j * nx + i`, and nodes likewise,
//! `node = j * (nx + 1) + i`. The four nodes of a cell are listed
//! counterclockwise starting from the lower-left corner.

use crate::error::{Error, Result};

/// A point in the plane.
pub type Point = [f64; 2];

/// The rectangle `(xmin, xmax) × (ymin, ymax)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Domain {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Result<Self> {
        let ok = [xmin, xmax, ymin, ymax].iter().all(|v| v.is_finite());
        if !ok || xmax <= xmin || ymax <= ymin {
            return Err(Error::InvalidDomain { xmin, xmax, ymin, ymax });
        }
        Ok(Self { xmin, xmax, ymin, ymax })
    }

    /// `(0, side)²`.
    pub fn square(side: f64) -> Result<Self> {
        Self::new(0.0, side, 0.0, side)
    }

    pub fn area(&self) -> f64 {
        (self.xmax - self.xmin) * (self.ymax - self.ymin)
    }

    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.xmin && p[0] <= self.xmax && p[1] >= self.ymin && p[1] <= self.ymax
    }

    /// Componentwise projection onto the closed rectangle.
    pub fn clamp(&self, p: Point) -> Point {
        [p[0].clamp(self.xmin, self.xmax), p[1].clamp(self.ymin, self.ymax)]
    }
}

/// Result of point location.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Location {
    Inside { cell: usize, local: Point },
    Outside,
}

/// Which side of the domain boundary an edge lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Bottom, Side::Right, Side::Top, Side::Left];

    /// Outward unit normal.
    pub fn normal(self) -> Point {
        match self {
            Side::Bottom => [0.0, -1.0],
            Side::Right => [1.0, 0.0],
            Side::Top => [0.0, 1.0],
            Side::Left => [-1.0, 0.0],
        }
    }
}

/// A boundary edge of the mesh: owning cell, side, and global endpoints.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryEdge {
    pub cell: usize,
    pub side: Side,
    pub start: Point,
    pub end: Point,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub domain: Domain,
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
}

impl Mesh {
    pub fn new(domain: Domain, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidMesh { nx, ny });
        }
        // re-validate in case the caller built the struct literally
        let domain = Domain::new(domain.xmin, domain.xmax, domain.ymin, domain.ymax)?;
        Ok(Self {
            domain,
            nx,
            ny,
            hx: (domain.xmax - domain.xmin) / nx as f64,
            hy: (domain.ymax - domain.ymin) / ny as f64,
        })
    }

    /// Mesh parameter `h = max(hx, hy)`.
    pub fn h(&self) -> f64 {
        self.hx.max(self.hy)
    }

    pub fn num_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn num_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// `(i, j)` grid position of a cell.
    pub fn cell_ij(&self, cell: usize) -> (usize, usize) {
        (cell % self.nx, cell / self.nx)
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn node_ij(&self, node: usize) -> (usize, usize) {
        (node % (self.nx + 1), node / (self.nx + 1))
    }

    pub fn node_coords(&self, node: usize) -> Point {
        let (i, j) = self.node_ij(node);
        [self.x_at(i), self.y_at(j)]
    }

    /// x-coordinate of grid line `i`, exact at the last line.
    pub fn x_at(&self, i: usize) -> f64 {
        if i == self.nx {
            self.domain.xmax
        } else {
            self.domain.xmin + i as f64 * self.hx
        }
    }

    pub fn y_at(&self, j: usize) -> f64 {
        if j == self.ny {
            self.domain.ymax
        } else {
            self.domain.ymin + j as f64 * self.hy
        }
    }

    /// Counterclockwise node indices from lower-left.
    pub fn cell_nodes(&self, cell: usize) -> [usize; 4] {
        let (i, j) = self.cell_ij(cell);
        [
            self.node_index(i, j),
            self.node_index(i + 1, j),
            self.node_index(i + 1, j + 1),
            self.node_index(i, j + 1),
        ]
    }

    /// Lower-left corner of a cell.
    pub fn cell_origin(&self, cell: usize) -> Point {
        let (i, j) = self.cell_ij(cell);
        [self.domain.xmin + i as f64 * self.hx, self.domain.ymin + j as f64 * self.hy]
    }

    pub fn map_to_global(&self, cell: usize, local: Point) -> Point {
        let o = self.cell_origin(cell);
        [o[0] + local[0] * self.hx, o[1] + local[1] * self.hy]
    }

    /// Diagonal Jacobian of the reference-to-physical map.
    pub fn jacobian(&self) -> (f64, f64) {
        (self.hx, self.hy)
    }

    /// Finds the cell containing `p`. Points on shared edges go to the
    /// lower-index neighbour.
    pub fn locate(&self, p: Point) -> Location {
        if !self.domain.contains(p) {
            return Location::Outside;
        }
        let (i, xi) = Self::locate_axis(p[0] - self.domain.xmin, self.hx, self.nx);
        let (j, eta) = Self::locate_axis(p[1] - self.domain.ymin, self.hy, self.ny);
        Location::Inside { cell: self.cell_index(i, j), local: [xi, eta] }
    }

    fn locate_axis(offset: f64, h: f64, n: usize) -> (usize, f64) {
        let s = offset / h;
        let idx = (s.ceil() as i64 - 1).clamp(0, n as i64 - 1) as usize;
        let local = (s - idx as f64).clamp(0.0, 1.0);
        (idx, local)
    }

    /// All boundary edges, ordered bottom, right, top, left and by position
    /// along each side.
    pub fn boundary_edges(&self) -> Vec<BoundaryEdge> {
        let mut edges = Vec::with_capacity(2 * (self.nx + self.ny));
        for i in 0..self.nx {
            edges.push(BoundaryEdge {
                cell: self.cell_index(i, 0),
                side: Side::Bottom,
                start: [self.x_at(i), self.domain.ymin],
                end: [self.x_at(i + 1), self.domain.ymin],
            });
        }
        for j in 0..self.ny {
            edges.push(BoundaryEdge {
                cell: self.cell_index(self.nx - 1, j),
                side: Side::Right,
                start: [self.domain.xmax, self.y_at(j)],
                end: [self.domain.xmax, self.y_at(j + 1)],
            });
        }
        for i in 0..self.nx {
            edges.push(BoundaryEdge {
                cell: self.cell_index(i, self.ny - 1),
                side: Side::Top,
                start: [self.x_at(i), self.domain.ymax],
                end: [self.x_at(i + 1), self.domain.ymax],
            });
        }
        for j in 0..self.ny {
            edges.push(BoundaryEdge {
                cell: self.cell_index(0, j),
                side: Side::Left,
                start: [self.domain.xmin, self.y_at(j)],
                end: [self.domain.xmin, self.y_at(j + 1)],
            });
        }
        edges
    }

    /// True when node `(i, j)` lies on the vertical sides `x = xmin` or `x = xmax`.
    pub fn on_vertical_boundary(&self, node: usize) -> bool {
        let (i, _) = self.node_ij(node);
        i == 0 || i == self.nx
    }

    pub fn on_horizontal_boundary(&self, node: usize) -> bool {
        let (_, j) = self.node_ij(node);
        j == 0 || j == self.ny
    }
}
