//! Homogeneous marked Poisson point processes on planar regions.

use std::cmp::Ordering;
use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::stream::StreamSpec;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dist_sq(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn translate(self, dx: f64, dy: f64) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }
}

/// Canonical vertex order: distance from the origin, ties broken
/// lexicographically by coordinates.
pub fn canonical_cmp(a: &Point, b: &Point) -> Ordering {
    a.norm_sq()
        .total_cmp(&b.norm_sq())
        .then(a.x.total_cmp(&b.x))
        .then(a.y.total_cmp(&b.y))
}

/// The two uniform marks carried by every vertex: `site` decides red/closed,
/// `enhance` decides whether a correctly configured closed vertex turns green.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Marks {
    pub site: f64,
    pub enhance: f64,
}

impl Marks {
    pub fn new(site: f64, enhance: f64) -> Self {
        Self { site, enhance }
    }
}

/// Planar region. Disks are open, annuli are `inner <= r < outer` and boxes
/// are half-open `[min, max)` in each coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Region {
    Disk {
        center: Point,
        radius: f64,
    },
    Annulus {
        center: Point,
        inner_radius: f64,
        outer_radius: f64,
    },
    Box {
        min: Point,
        max: Point,
    },
}

impl Region {
    pub fn disk(radius: f64) -> Self {
        Region::Disk {
            center: Point::ORIGIN,
            radius,
        }
    }

    pub fn annulus(inner_radius: f64, outer_radius: f64) -> Self {
        Region::Annulus {
            center: Point::ORIGIN,
            inner_radius,
            outer_radius,
        }
    }

    pub fn square(half_width: f64) -> Self {
        Region::Box {
            min: Point::new(-half_width, -half_width),
            max: Point::new(half_width, half_width),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64| v.is_finite();
        match *self {
            Region::Disk { center, radius } => {
                if !(finite(center.x) && finite(center.y) && finite(radius)) || radius <= 0.0 {
                    return invalid(format!("degenerate disk of radius {radius}"));
                }
            }
            Region::Annulus {
                center,
                inner_radius,
                outer_radius,
            } => {
                if !(finite(center.x) && finite(center.y) && finite(inner_radius) && finite(outer_radius))
                    || inner_radius < 0.0
                    || inner_radius >= outer_radius
                {
                    return invalid(format!(
                        "degenerate annulus with radii {inner_radius}, {outer_radius}"
                    ));
                }
            }
            Region::Box { min, max } => {
                if !(finite(min.x) && finite(min.y) && finite(max.x) && finite(max.y))
                    || min.x >= max.x
                    || min.y >= max.y
                {
                    return invalid("box corners must be finite and strictly ordered");
                }
            }
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        use std::f64::consts::PI;
        match *self {
            Region::Disk { radius, .. } => PI * radius * radius,
            Region::Annulus {
                inner_radius,
                outer_radius,
                ..
            } => PI * (outer_radius * outer_radius - inner_radius * inner_radius),
            Region::Box { min, max } => (max.x - min.x) * (max.y - min.y),
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        match *self {
            Region::Disk { center, radius } => p.dist_sq(center) < radius * radius,
            Region::Annulus {
                center,
                inner_radius,
                outer_radius,
            } => {
                let d = p.dist_sq(center);
                d >= inner_radius * inner_radius && d < outer_radius * outer_radius
            }
            Region::Box { min, max } => p.x >= min.x && p.x < max.x && p.y >= min.y && p.y < max.y,
        }
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        match *self {
            Region::Disk { center, radius }
            | Region::Annulus {
                center,
                outer_radius: radius,
                ..
            } => (
                Point::new(center.x - radius, center.y - radius),
                Point::new(center.x + radius, center.y + radius),
            ),
            Region::Box { min, max } => (min, max),
        }
    }

    /// Conservative containment test: true only when `inner` is certainly a
    /// subset of `self`.
    pub fn contains_region(&self, inner: &Region) -> bool {
        // Reduce the inner region to its outer boundary shape.
        let inner_outline = match *inner {
            Region::Annulus {
                center,
                outer_radius,
                ..
            } => Region::Disk {
                center,
                radius: outer_radius,
            },
            other => other,
        };
        match (*self, inner_outline) {
            (Region::Disk { center: c, radius: r }, Region::Disk { center: c2, radius: r2 }) => {
                c.dist_sq(c2).sqrt() + r2 <= r
            }
            (Region::Disk { center: c, radius: r }, Region::Box { min, max }) => {
                [min, max, Point::new(min.x, max.y), Point::new(max.x, min.y)]
                    .iter()
                    .all(|corner| corner.dist_sq(c) <= r * r)
            }
            (Region::Box { min, max }, Region::Disk { center: c, radius: r }) => {
                c.x - r >= min.x && c.x + r <= max.x && c.y - r >= min.y && c.y + r <= max.y
            }
            (Region::Box { min, max }, Region::Box { min: a, max: b }) => {
                a.x >= min.x && a.y >= min.y && b.x <= max.x && b.y <= max.y
            }
            (
                Region::Annulus {
                    center,
                    inner_radius,
                    outer_radius,
                },
                Region::Disk { center: c2, radius: r2 },
            ) => {
                // A disk fits inside an annulus only if it avoids the hole.
                let d = center.dist_sq(c2).sqrt();
                d + r2 <= outer_radius && d - r2 >= inner_radius
            }
            (Region::Annulus { .. }, Region::Box { .. }) => false,
            (_, Region::Annulus { .. }) => unreachable!(),
        }
    }
}

/// A finite sample of a marked Poisson process, listed in canonical order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkedPointSet {
    pub points: Vec<Point>,
    pub marks: Vec<Marks>,
    pub region: Region,
    pub intensity: f64,
    pub seed: u64,
}

impl MarkedPointSet {
    /// Builds a set from unordered parts, sorting into canonical order.
    pub fn from_parts(
        points: Vec<Point>,
        marks: Vec<Marks>,
        region: Region,
        intensity: f64,
        seed: u64,
    ) -> Self {
        assert_eq!(points.len(), marks.len(), "one mark pair per point");
        let mut pairs: Vec<(Point, Marks)> = points.into_iter().zip(marks).collect();
        pairs.sort_by(|a, b| canonical_cmp(&a.0, &b.0));
        let (points, marks) = pairs.into_iter().unzip();
        Self {
            points,
            marks,
            region,
            intensity,
            seed,
        }
    }

    /// Point set with placeholder marks (all zero), for geometry-only use.
    pub fn unmarked(points: Vec<Point>, region: Region) -> Self {
        let marks = vec![Marks::new(0.0, 0.0); points.len()];
        Self::from_parts(points, marks, region, 0.0, 0)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Replaces the marks, keeping geometry and order.
    pub fn with_marks(&self, marks: Vec<Marks>) -> Self {
        assert_eq!(marks.len(), self.len());
        Self {
            marks,
            ..self.clone()
        }
    }

    /// Keeps the points that lie in `region`, preserving order.
    pub fn restrict_to(&self, region: &Region) -> Self {
        let (points, marks) = self
            .points
            .iter()
            .zip(&self.marks)
            .filter(|(p, _)| region.contains(**p))
            .map(|(p, m)| (*p, *m))
            .unzip();
        Self {
            points,
            marks,
            region: *region,
            intensity: self.intensity,
            seed: self.seed,
        }
    }

    /// Inserts one vertex and returns the new set with the inserted index.
    pub fn insert(&self, point: Point, marks: Marks) -> (Self, usize) {
        let idx = self
            .points
            .partition_point(|q| canonical_cmp(q, &point) == Ordering::Less);
        let mut out = self.clone();
        out.points.insert(idx, point);
        out.marks.insert(idx, marks);
        (out, idx)
    }

    pub fn remove(&self, index: usize) -> Self {
        let mut out = self.clone();
        out.points.remove(index);
        out.marks.remove(index);
        out
    }

    /// Union of two samples (for example an annulus sample and an inner disk
    /// sample), re-sorted into canonical order.
    pub fn merge(&self, other: &MarkedPointSet, region: Region) -> Self {
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        let mut marks = self.marks.clone();
        marks.extend_from_slice(&other.marks);
        Self::from_parts(points, marks, region, self.intensity, self.seed)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["index", "x", "y", "Y", "Z"])?;
        for (i, (p, m)) in self.points.iter().zip(&self.marks).enumerate() {
            w.write_record([
                i.to_string(),
                p.x.to_string(),
                p.y.to_string(),
                m.site.to_string(),
                m.enhance.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the `index,x,y,Y,Z` format. Rows are re-sorted canonically; the
    /// index column is informational.
    pub fn read_csv<R: Read>(reader: R, region: Region) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            #[allow(dead_code)]
            index: usize,
            x: f64,
            y: f64,
            #[serde(rename = "Y")]
            site: f64,
            #[serde(rename = "Z")]
            enhance: f64,
        }
        let mut r = csv::Reader::from_reader(reader);
        let mut points = Vec::new();
        let mut marks = Vec::new();
        for row in r.deserialize() {
            let row: Row = row?;
            if !(row.x.is_finite() && row.y.is_finite()) {
                return invalid("point coordinates must be finite");
            }
            points.push(Point::new(row.x, row.y));
            marks.push(Marks::new(row.site, row.enhance));
        }
        Ok(Self::from_parts(points, marks, region, 0.0, 0))
    }
}

fn check_intensity(intensity: f64) -> Result<()> {
    if !intensity.is_finite() || intensity < 0.0 {
        return invalid(format!("intensity must be finite and nonnegative, got {intensity}"));
    }
    Ok(())
}

fn sample_uniform_in<R: Rng>(
    rng: &mut R,
    outer: &Region,
    exclude: Option<&Region>,
) -> Point {
    let (lo, hi) = outer.bounding_box();
    loop {
        let p = Point::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
        if outer.contains(p) && !exclude.is_some_and(|e| e.contains(p)) {
            return p;
        }
    }
}

fn sample_counted<R: Rng>(rng: &mut R, mean: f64, outer: &Region, exclude: Option<&Region>) -> (Vec<Point>, Vec<Marks>) {
    let count = if mean > 0.0 {
        Poisson::new(mean).expect("positive finite mean").sample(rng) as usize
    } else {
        0
    };
    let points: Vec<Point> = (0..count).map(|_| sample_uniform_in(rng, outer, exclude)).collect();
    let marks = (0..count)
        .map(|_| Marks::new(rng.random::<f64>(), rng.random::<f64>()))
        .collect();
    (points, marks)
}

/// Samples a homogeneous Poisson process of the given intensity on `region`,
/// with independent uniform marks, in canonical order.
pub fn sample_poisson(region: &Region, intensity: f64, stream: &StreamSpec) -> Result<MarkedPointSet> {
    check_intensity(intensity)?;
    region.validate()?;
    let mut rng = stream.rng();
    let (points, marks) = sample_counted(&mut rng, intensity * region.area(), region, None);
    Ok(MarkedPointSet::from_parts(
        points,
        marks,
        *region,
        intensity,
        stream.master_seed,
    ))
}

/// Samples the process restricted to `outer \ inner`.
pub fn sample_in_difference(
    outer: &Region,
    inner: &Region,
    intensity: f64,
    stream: &StreamSpec,
) -> Result<MarkedPointSet> {
    check_intensity(intensity)?;
    outer.validate()?;
    inner.validate()?;
    if !outer.contains_region(inner) {
        return invalid("inner region is not contained in the outer region");
    }
    let mean = intensity * (outer.area() - inner.area()).max(0.0);
    let mut rng = stream.rng();
    let (points, marks) = sample_counted(&mut rng, mean, outer, Some(inner));
    Ok(MarkedPointSet::from_parts(
        points,
        marks,
        *outer,
        intensity,
        stream.master_seed,
    ))
}
