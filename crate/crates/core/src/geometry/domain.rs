use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A position in the corridor, meters. `x` runs along the walking direction,
/// `y` across the corridor with the axis at `y = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Mul<f64> for Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

/// Rectangular constriction of the corridor between `x_start` and `x_end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bottleneck {
    pub half_width: f64,
    pub x_start: f64,
    pub x_end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryKind {
    Inflow,
    Outflow,
    Wall,
}

/// Axis-aligned boundary segment of the continuous domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub from: Point,
    pub to: Point,
    pub kind: BoundaryKind,
}

impl Segment {
    fn new(from: Point, to: Point, kind: BoundaryKind) -> Self {
        Self { from, to, kind }
    }

    pub fn is_vertical(&self) -> bool {
        self.from.x == self.to.x
    }
}

/// Corridor `[0, L] x [-half_width, half_width]`, optionally with a bottleneck
/// and an exit door narrower than the corridor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub length: f64,
    pub half_width: f64,
    pub bottleneck: Option<Bottleneck>,
    pub exit_door_half_width: f64,
}

impl DomainSpec {
    pub fn corridor(length: f64, half_width: f64) -> Result<Self> {
        let spec = Self {
            length,
            half_width,
            bottleneck: None,
            exit_door_half_width: half_width,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_bottleneck(mut self, bottleneck: Bottleneck) -> Result<Self> {
        self.bottleneck = Some(bottleneck);
        self.validate()?;
        Ok(self)
    }

    pub fn with_exit_door(mut self, half_width: f64) -> Result<Self> {
        self.exit_door_half_width = half_width;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDomain(msg));
        if !(self.length > 0.0 && self.length.is_finite()) {
            return bad(format!("length must be positive, got {}", self.length));
        }
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return bad(format!(
                "half_width must be positive, got {}",
                self.half_width
            ));
        }
        if !(self.exit_door_half_width > 0.0 && self.exit_door_half_width <= self.half_width) {
            return bad(format!(
                "exit door half-width must lie in (0, {}], got {}",
                self.half_width, self.exit_door_half_width
            ));
        }
        if let Some(b) = self.bottleneck {
            if !(b.half_width > 0.0 && b.half_width < self.half_width) {
                return bad(format!(
                    "bottleneck half-width must lie in (0, {}), got {}",
                    self.half_width, b.half_width
                ));
            }
            if !(0.0 <= b.x_start && b.x_start < b.x_end && b.x_end <= self.length) {
                return bad(format!(
                    "bottleneck extent [{}, {}] must satisfy 0 <= start < end <= {}",
                    b.x_start, b.x_end, self.length
                ));
            }
        }
        Ok(())
    }

    pub fn is_straight(&self) -> bool {
        self.bottleneck.is_none() && self.exit_door_half_width == self.half_width
    }

    /// Half-width of the walkable region at abscissa `x`.
    pub fn half_width_at(&self, x: f64) -> f64 {
        match self.bottleneck {
            Some(b) if x >= b.x_start && x <= b.x_end => b.half_width,
            _ => self.half_width,
        }
    }

    /// Closed-set membership.
    pub fn contains(&self, p: Point) -> bool {
        p.x >= 0.0 && p.x <= self.length && p.y.abs() <= self.half_width_at(p.x)
    }

    pub fn area(&self) -> f64 {
        let full = self.length * 2.0 * self.half_width;
        match self.bottleneck {
            Some(b) => full - (b.x_end - b.x_start) * 2.0 * (self.half_width - b.half_width),
            None => full,
        }
    }

    /// Boundary polygon, counter-clockwise, as axis-aligned segments.
    pub fn segments(&self) -> Vec<Segment> {
        use BoundaryKind::*;
        let (l, h, d) = (self.length, self.half_width, self.exit_door_half_width);
        let mut out = Vec::with_capacity(16);
        let mut push = |a: (f64, f64), b: (f64, f64), kind| {
            if a != b {
                out.push(Segment::new(
                    Point::new(a.0, a.1),
                    Point::new(b.0, b.1),
                    kind,
                ));
            }
        };
        match self.bottleneck {
            None => push((0.0, -h), (l, -h), Wall),
            Some(b) => {
                push((0.0, -h), (b.x_start, -h), Wall);
                push((b.x_start, -h), (b.x_start, -b.half_width), Wall);
                push((b.x_start, -b.half_width), (b.x_end, -b.half_width), Wall);
                push((b.x_end, -b.half_width), (b.x_end, -h), Wall);
                push((b.x_end, -h), (l, -h), Wall);
            }
        }
        // Exit side; if the bottleneck reaches x = L the exit face is narrower.
        let exit_h = self.half_width_at(l);
        let door = d.min(exit_h);
        push((l, -exit_h), (l, -door), Wall);
        push((l, -door), (l, door), Outflow);
        push((l, door), (l, exit_h), Wall);
        match self.bottleneck {
            None => push((l, h), (0.0, h), Wall),
            Some(b) => {
                push((l, h), (b.x_end, h), Wall);
                push((b.x_end, h), (b.x_end, b.half_width), Wall);
                push((b.x_end, b.half_width), (b.x_start, b.half_width), Wall);
                push((b.x_start, b.half_width), (b.x_start, h), Wall);
                push((b.x_start, h), (0.0, h), Wall);
            }
        }
        let entry_h = self.half_width_at(0.0);
        push((0.0, entry_h), (0.0, -entry_h), Inflow);
        out
    }

    /// Half-width of the inflow face.
    pub fn inflow_half_width(&self) -> f64 {
        self.half_width_at(0.0)
    }

    /// Half-width of the outflow face (the exit door).
    pub fn door_half_width(&self) -> f64 {
        self.exit_door_half_width
            .min(self.half_width_at(self.length))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bottleneck_domain() -> DomainSpec {
        DomainSpec::corridor(3.0, 0.25)
            .unwrap()
            .with_bottleneck(Bottleneck {
                half_width: 0.05,
                x_start: 1.2,
                x_end: 1.8,
            })
            .unwrap()
            .with_exit_door(0.15)
            .unwrap()
    }

    #[test]
    fn rejects_bad_geometry() {
        assert!(DomainSpec::corridor(0.0, 0.25).is_err());
        assert!(DomainSpec::corridor(3.0, -1.0).is_err());
        let c = DomainSpec::corridor(3.0, 0.25).unwrap();
        assert!(c.clone().with_exit_door(0.3).is_err());
        assert!(c
            .clone()
            .with_bottleneck(Bottleneck {
                half_width: 0.3,
                x_start: 1.0,
                x_end: 2.0
            })
            .is_err());
        assert!(c
            .with_bottleneck(Bottleneck {
                half_width: 0.1,
                x_start: 2.0,
                x_end: 1.0
            })
            .is_err());
    }

    #[test]
    fn bottleneck_membership() {
        let d = bottleneck_domain();
        assert!(d.contains(Point::new(0.5, 0.2)));
        assert!(!d.contains(Point::new(1.5, 0.2)));
        assert!(d.contains(Point::new(1.5, 0.05)));
        assert!(!d.contains(Point::new(3.1, 0.0)));
        assert!((d.area() - (1.5 - 0.6 * 0.4)).abs() < 1e-12);
    }

    #[test]
    fn segments_close_the_polygon() {
        for d in [
            DomainSpec::corridor(3.0, 0.25).unwrap(),
            bottleneck_domain(),
        ] {
            let segs = d.segments();
            for w in segs.windows(2) {
                assert_eq!(w[0].to, w[1].from);
            }
            assert_eq!(segs.last().unwrap().to, segs[0].from);
            for s in &segs {
                assert!(s.from.x == s.to.x || s.from.y == s.to.y);
            }
            let outflow: f64 = segs
                .iter()
                .filter(|s| s.kind == BoundaryKind::Outflow)
                .map(|s| (s.to - s.from).norm())
                .sum();
            assert!((outflow - 2.0 * d.door_half_width()).abs() < 1e-12);
        }
    }
}
