use std::collections::VecDeque;

use super::domain::{BoundaryKind, DomainSpec, Point};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    West,
    East,
    South,
    North,
}

/// A cell face on the boundary of the inside region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFace {
    pub cell: usize,
    pub side: Side,
    pub kind: BoundaryKind,
    /// Face length, meters.
    pub length: f64,
}

/// Up to four cells with bilinear weights summing to one.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    pub cells: [usize; 4],
    pub weights: [f64; 4],
    pub len: usize,
}

impl Stencil {
    pub fn apply(&self, values: &[f64]) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.len {
            acc += self.weights[k] * values[self.cells[k]];
        }
        acc
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.len).map(|k| (self.cells[k], self.weights[k]))
    }
}

/// Structured cell-centered discretization of a [`DomainSpec`].
///
/// Cells are indexed `i * ny + j` with `i` along the corridor and `j` across it,
/// so that x-neighbors are `ny` apart and the diffusion matrix has bandwidth `ny`.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub domain: DomainSpec,
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    inside: Vec<bool>,
    boundary: Vec<BoundaryFace>,
}

impl GridSpec {
    pub fn build(domain: DomainSpec, nx: usize, ny: usize) -> Result<Self> {
        domain.validate()?;
        if nx < 4 || ny < 4 {
            return Err(Error::InvalidGrid(format!(
                "need at least 4 x 4 cells, got {nx} x {ny}"
            )));
        }
        let dx = domain.length / nx as f64;
        let dy = 2.0 * domain.half_width / ny as f64;
        let mut grid = Self {
            domain,
            nx,
            ny,
            dx,
            dy,
            inside: vec![true; nx * ny],
            boundary: Vec::new(),
        };

        if let Some(b) = grid.domain.bottleneck {
            for i in 0..nx {
                let x = grid.x_center(i);
                if x < b.x_start || x > b.x_end {
                    continue;
                }
                let mut open = 0;
                for j in 0..ny {
                    let k = grid.index(i, j);
                    grid.inside[k] = grid.y_center(j).abs() <= b.half_width;
                    open += grid.inside[k] as usize;
                }
                if open < 2 {
                    return Err(Error::InvalidGrid(format!(
                        "bottleneck of half-width {} resolved by {open} cell(s); need at least 2 (dy = {dy})",
                        b.half_width
                    )));
                }
            }
        }

        grid.boundary = grid.classify_faces();
        grid.check_connectivity()?;
        Ok(grid)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    #[inline]
    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k / self.ny, k % self.ny)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx
    }

    pub fn y_center(&self, j: usize) -> f64 {
        -self.domain.half_width + (j as f64 + 0.5) * self.dy
    }

    pub fn center(&self, k: usize) -> Point {
        let (i, j) = self.coords(k);
        Point::new(self.x_center(i), self.y_center(j))
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    #[inline]
    pub fn is_inside(&self, k: usize) -> bool {
        self.inside[k]
    }

    pub fn inside_mask(&self) -> &[bool] {
        &self.inside
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.boundary
    }

    /// Inside neighbor across `side`, if any.
    pub fn neighbor(&self, k: usize, side: Side) -> Option<usize> {
        let (i, j) = self.coords(k);
        let n = match side {
            Side::West if i > 0 => self.index(i - 1, j),
            Side::East if i + 1 < self.nx => self.index(i + 1, j),
            Side::South if j > 0 => self.index(i, j - 1),
            Side::North if j + 1 < self.ny => self.index(i, j + 1),
            _ => return None,
        };
        self.inside[n].then_some(n)
    }

    fn classify_faces(&self) -> Vec<BoundaryFace> {
        let door = self.domain.door_half_width();
        let mut faces = Vec::new();
        for k in 0..self.len() {
            if !self.inside[k] {
                continue;
            }
            let (i, j) = self.coords(k);
            for side in [Side::West, Side::East, Side::South, Side::North] {
                if self.neighbor(k, side).is_some() {
                    continue;
                }
                let kind = match side {
                    Side::West if i == 0 => BoundaryKind::Inflow,
                    Side::East if i + 1 == self.nx && self.y_center(j).abs() < door => {
                        BoundaryKind::Outflow
                    }
                    _ => BoundaryKind::Wall,
                };
                let length = match side {
                    Side::West | Side::East => self.dy,
                    Side::South | Side::North => self.dx,
                };
                faces.push(BoundaryFace {
                    cell: k,
                    side,
                    kind,
                    length,
                });
            }
        }
        faces
    }

    fn check_connectivity(&self) -> Result<()> {
        let mut seen = vec![false; self.len()];
        let mut queue: VecDeque<usize> = self
            .boundary
            .iter()
            .filter(|f| f.kind == BoundaryKind::Inflow)
            .map(|f| f.cell)
            .collect();
        if queue.is_empty() {
            return Err(Error::InvalidGrid("grid has no inflow face".into()));
        }
        for &k in &queue {
            seen[k] = true;
        }
        while let Some(k) = queue.pop_front() {
            for side in [Side::West, Side::East, Side::South, Side::North] {
                if let Some(n) = self.neighbor(k, side) {
                    if !seen[n] {
                        seen[n] = true;
                        queue.push_back(n);
                    }
                }
            }
        }
        if (0..self.len()).any(|k| self.inside[k] && !seen[k]) {
            return Err(Error::InvalidGrid(
                "inside cells not reachable from the inflow face".into(),
            ));
        }
        if !self
            .boundary
            .iter()
            .any(|f| f.kind == BoundaryKind::Outflow && seen[f.cell])
        {
            return Err(Error::InvalidGrid("no outflow face on the grid".into()));
        }
        Ok(())
    }

    /// Bilinear stencil over inside cell centers. Points beyond the outermost
    /// centers take the edge values; masked cells are dropped and the remaining
    /// weights renormalized.
    pub fn stencil(&self, p: Point) -> Stencil {
        let sx = snap(p.x / self.dx - 0.5).clamp(0.0, (self.nx - 1) as f64);
        let sy =
            snap((p.y + self.domain.half_width) / self.dy - 0.5).clamp(0.0, (self.ny - 1) as f64);
        let i0 = (sx.floor() as usize).min(self.nx - 2);
        let j0 = (sy.floor() as usize).min(self.ny - 2);
        let fx = sx - i0 as f64;
        let fy = sy - j0 as f64;

        let corners = [
            (self.index(i0, j0), (1.0 - fx) * (1.0 - fy)),
            (self.index(i0 + 1, j0), fx * (1.0 - fy)),
            (self.index(i0, j0 + 1), (1.0 - fx) * fy),
            (self.index(i0 + 1, j0 + 1), fx * fy),
        ];
        let mut st = Stencil {
            cells: [0; 4],
            weights: [0.0; 4],
            len: 0,
        };
        let mut total = 0.0;
        for (k, w) in corners {
            if self.inside[k] && w > 0.0 {
                st.cells[st.len] = k;
                st.weights[st.len] = w;
                st.len += 1;
                total += w;
            }
        }
        if st.len == 0 {
            st.cells[0] = self.nearest_inside(p);
            st.weights[0] = 1.0;
            st.len = 1;
            return st;
        }
        if total != 1.0 {
            for w in &mut st.weights[..st.len] {
                *w /= total;
            }
        }
        st
    }

    fn nearest_inside(&self, p: Point) -> usize {
        (0..self.len())
            .filter(|&k| self.inside[k])
            .min_by(|&a, &b| {
                let da = (self.center(a) - p).norm();
                let db = (self.center(b) - p).norm();
                da.total_cmp(&db)
            })
            .expect("grid has inside cells")
    }
}

/// Rounds fractional grid coordinates that sit on a cell center up to rounding noise.
fn snap(s: f64) -> f64 {
    let r = s.round();
    if (s - r).abs() < 1e-9 {
        r
    } else {
        s
    }
}
