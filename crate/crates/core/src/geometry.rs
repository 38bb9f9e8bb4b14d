//! Outer domain, immersed cavity shapes and the a-priori geometric checks.

use std::ops::{Add, Mul, Sub};

use thiserror::Error;

use crate::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("domain side must be positive, got {0}")]
    NonPositiveSide(f64),
    #[error("cavity has zero or negative measure")]
    Degenerate,
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon boundary self-intersects (edges {0} and {1})")]
    SelfIntersecting(usize, usize),
    #[error("cavity is not strictly inside the domain (distance {0:.3e})")]
    NotInside(f64),
    #[error("polygonalization needs at least 3 segments, got {0}")]
    TooFewSegments(usize),
    #[error("shape lies outside the domain")]
    OutsideDomain,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the planar cross product.
    pub fn cross(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Self) -> T {
        (self - o).norm()
    }

    pub fn midpoint(self, o: Self) -> Self {
        let half = T::lit(0.5);
        Self::new((self.x + o.x) * half, (self.y + o.y) * half)
    }

    pub fn to_f64(self) -> [f64; 2] {
        [self.x.as_f64(), self.y.as_f64()]
    }
}

impl<T: Real> Add for Point<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Real> Sub for Point<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Real> Mul<T> for Point<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

/// Exact orientation of `(a, b, c)`: positive when counterclockwise.
pub fn orient<T: Real>(a: Point<T>, b: Point<T>, c: Point<T>) -> f64 {
    let [ax, ay] = a.to_f64();
    let [bx, by] = b.to_f64();
    let [cx, cy] = c.to_f64();
    robust::orient2d(
        robust::Coord { x: ax, y: ay },
        robust::Coord { x: bx, y: by },
        robust::Coord { x: cx, y: cy },
    )
}

/// Exact in-circle test: positive when `d` lies strictly inside the circle
/// through the counterclockwise triangle `(a, b, c)`.
pub fn incircle<T: Real>(a: Point<T>, b: Point<T>, c: Point<T>, d: Point<T>) -> f64 {
    let p = |q: Point<T>| {
        let [x, y] = q.to_f64();
        robust::Coord { x, y }
    };
    robust::incircle(p(a), p(b), p(c), p(d))
}

/// The outer square domain Ω.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSpec<T> {
    pub side: T,
    pub corner: Point<T>,
}

impl<T: Real> Default for DomainSpec<T> {
    fn default() -> Self {
        Self::unit_square()
    }
}

impl<T: Real> DomainSpec<T> {
    pub fn unit_square() -> Self {
        Self {
            side: T::one(),
            corner: Point::new(T::zero(), T::zero()),
        }
    }

    pub fn new(side: T, corner: Point<T>) -> Result<Self, GeometryError> {
        if !(side > T::zero()) || !side.is_finite() {
            return Err(GeometryError::NonPositiveSide(side.as_f64()));
        }
        Ok(Self { side, corner })
    }

    pub fn area(&self) -> T {
        self.side * self.side
    }

    pub fn perimeter(&self) -> T {
        T::lit(4.0) * self.side
    }

    /// Corners in counterclockwise order starting at `corner`.
    pub fn corners(&self) -> [Point<T>; 4] {
        let (x0, y0) = (self.corner.x, self.corner.y);
        let (x1, y1) = (x0 + self.side, y0 + self.side);
        [
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ]
    }

    pub fn center(&self) -> Point<T> {
        let half = self.side * T::lit(0.5);
        Point::new(self.corner.x + half, self.corner.y + half)
    }

    /// Signed distance from `p` to ∂Ω, positive inside.
    pub fn inner_distance(&self, p: Point<T>) -> T {
        let [c0, _, c2, _] = self.corners();
        (p.x - c0.x).min(c2.x - p.x).min(p.y - c0.y).min(c2.y - p.y)
    }

    /// Normalized coordinates in `[0,1]²`.
    pub fn local(&self, p: Point<T>) -> (T, T) {
        ((p.x - self.corner.x) / self.side, (p.y - self.corner.y) / self.side)
    }
}

/// The immersed obstacle D.
#[derive(Debug, Clone, PartialEq)]
pub enum CavityShape<T> {
    Circle {
        center: Point<T>,
        radius: T,
    },
    /// Ellipse with semi-axes `a` (along the rotated x axis) and `b`, rotated by `angle`.
    Ellipse {
        center: Point<T>,
        a: T,
        b: T,
        angle: T,
    },
    Polygon {
        vertices: Vec<Point<T>>,
    },
}

impl<T: Real> CavityShape<T> {
    pub fn circle(center: Point<T>, radius: T) -> Self {
        Self::Circle { center, radius }
    }

    /// Disk centered at `center` covering the fraction `frac` of `domain`.
    pub fn disk_with_fraction(domain: &DomainSpec<T>, center: Point<T>, frac: T) -> Self {
        let radius = (frac * domain.area() / T::PI()).sqrt();
        Self::Circle { center, radius }
    }

    /// Scale constant of the C^{2,α} regularity assumption.
    ///
    /// Circles use the radius, ellipses the minor semi-axis and polygons the
    /// radius of the circle about the vertex centroid that circumscribes them.
    pub fn rho(&self) -> T {
        match self {
            Self::Circle { radius, .. } => *radius,
            Self::Ellipse { a, b, .. } => a.min(*b),
            Self::Polygon { vertices } => {
                let c = vertex_centroid(vertices);
                vertices
                    .iter()
                    .map(|v| v.dist(c))
                    .fold(T::zero(), T::max)
            }
        }
    }

    pub fn diameter(&self) -> T {
        match self {
            Self::Circle { radius, .. } => T::lit(2.0) * *radius,
            Self::Ellipse { a, b, .. } => T::lit(2.0) * a.max(*b),
            Self::Polygon { vertices } => {
                let mut d = T::zero();
                for (i, p) in vertices.iter().enumerate() {
                    for q in &vertices[i + 1..] {
                        d = d.max(p.dist(*q));
                    }
                }
                d
            }
        }
    }

    /// Whether `p` lies in the closed shape.
    pub fn contains(&self, p: Point<T>) -> bool {
        match self {
            Self::Circle { center, radius } => (p - *center).norm() <= *radius,
            Self::Ellipse {
                center,
                a,
                b,
                angle,
            } => {
                let d = p - *center;
                let (s, c) = angle.sin_cos();
                let u = c * d.x + s * d.y;
                let v = -s * d.x + c * d.y;
                (u / *a).powi(2) + (v / *b).powi(2) <= T::one()
            }
            Self::Polygon { vertices } => point_in_polygon(vertices, p),
        }
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bbox(&self) -> (Point<T>, Point<T>) {
        match self {
            Self::Circle { center, radius } => (
                Point::new(center.x - *radius, center.y - *radius),
                Point::new(center.x + *radius, center.y + *radius),
            ),
            Self::Ellipse { center, .. } => {
                let (ex, ey) = self.half_extents();
                (
                    Point::new(center.x - ex, center.y - ey),
                    Point::new(center.x + ex, center.y + ey),
                )
            }
            Self::Polygon { vertices } => {
                let mut lo = vertices[0];
                let mut hi = vertices[0];
                for v in vertices {
                    lo = Point::new(lo.x.min(v.x), lo.y.min(v.y));
                    hi = Point::new(hi.x.max(v.x), hi.y.max(v.y));
                }
                (lo, hi)
            }
        }
    }

    fn half_extents(&self) -> (T, T) {
        match self {
            Self::Ellipse { a, b, angle, .. } => {
                let (s, c) = angle.sin_cos();
                (
                    (*a * *a * c * c + *b * *b * s * s).sqrt(),
                    (*a * *a * s * s + *b * *b * c * c).sqrt(),
                )
            }
            _ => {
                let (lo, hi) = self.bbox();
                ((hi.x - lo.x) * T::lit(0.5), (hi.y - lo.y) * T::lit(0.5))
            }
        }
    }

    /// Structural validity: positive measure and a simple boundary.
    pub fn check(&self) -> Result<(), GeometryError> {
        match self {
            Self::Circle { radius, .. } => {
                if !(*radius > T::zero()) {
                    return Err(GeometryError::Degenerate);
                }
            }
            Self::Ellipse { a, b, .. } => {
                if !(*a > T::zero() && *b > T::zero()) {
                    return Err(GeometryError::Degenerate);
                }
            }
            Self::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(GeometryError::TooFewVertices(vertices.len()));
                }
                check_simple(vertices)?;
                if !(shoelace(vertices).abs() > T::zero()) {
                    return Err(GeometryError::Degenerate);
                }
            }
        }
        Ok(())
    }
}

/// Exact area of the shape (analytic for circles and ellipses, shoelace for polygons).
pub fn cavity_area<T: Real>(shape: &CavityShape<T>) -> Result<T, GeometryError> {
    shape.check()?;
    let area = match shape {
        CavityShape::Circle { radius, .. } => T::PI() * *radius * *radius,
        CavityShape::Ellipse { a, b, .. } => T::PI() * *a * *b,
        CavityShape::Polygon { vertices } => shoelace(vertices).abs(),
    };
    Ok(area)
}

/// Signed distance from the shape to ∂Ω (negative when the shape crosses ∂Ω).
fn signed_boundary_distance<T: Real>(domain: &DomainSpec<T>, shape: &CavityShape<T>) -> T {
    match shape {
        CavityShape::Circle { center, radius } => domain.inner_distance(*center) - *radius,
        CavityShape::Ellipse { center, .. } => {
            let (ex, ey) = shape.half_extents();
            let [c0, _, c2, _] = domain.corners();
            (center.x - ex - c0.x)
                .min(c2.x - center.x - ex)
                .min(center.y - ey - c0.y)
                .min(c2.y - center.y - ey)
        }
        CavityShape::Polygon { vertices } => vertices
            .iter()
            .map(|v| domain.inner_distance(*v))
            .fold(T::infinity(), T::min),
    }
}

/// Euclidean distance d(D, ∂Ω). Fails when the shape touches or crosses ∂Ω.
pub fn boundary_distance<T: Real>(
    domain: &DomainSpec<T>,
    shape: &CavityShape<T>,
) -> Result<T, GeometryError> {
    shape.check()?;
    let d = signed_boundary_distance(domain, shape);
    if d > T::zero() {
        Ok(d)
    } else {
        Err(GeometryError::NotInside(d.as_f64()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionLimits<T> {
    pub q_max: T,
    pub d0_min: T,
    /// User supplied a-priori bounds, recorded verbatim in the report.
    pub m0: Option<T>,
    pub m1: Option<T>,
    pub l: Option<T>,
}

impl<T: Real> AssumptionLimits<T> {
    pub fn new(q_max: T, d0_min: T) -> Self {
        Self {
            q_max,
            d0_min,
            m0: None,
            m1: None,
            l: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssumptionFlags {
    /// Bounded domain with connected boundary.
    pub h1: bool,
    /// Cavity strictly inside with `d(D, ∂Ω) ≥ d0_min`.
    pub h2: bool,
    /// Fatness `diam(D) ≤ Q_max ρ`.
    pub h3: bool,
}

impl AssumptionFlags {
    pub fn all(&self) -> bool {
        self.h1 && self.h2 && self.h3
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport<T> {
    pub d0: T,
    pub diam: T,
    pub q: T,
    pub area: T,
    pub rho: T,
    pub flags: AssumptionFlags,
    pub limits: AssumptionLimits<T>,
    pub notes: Vec<String>,
}

/// Checks the geometric a-priori assumptions, reporting failures instead of raising.
pub fn validate_assumptions<T: Real>(
    domain: &DomainSpec<T>,
    shape: &CavityShape<T>,
    limits: AssumptionLimits<T>,
) -> Result<AssumptionReport<T>, GeometryError> {
    DomainSpec::new(domain.side, domain.corner)?;
    let area = cavity_area(shape)?;
    let d0 = signed_boundary_distance(domain, shape);
    let diam = shape.diameter();
    let rho = shape.rho();
    let q = diam / rho;
    let flags = AssumptionFlags {
        h1: true,
        h2: d0 > T::zero() && d0 >= limits.d0_min,
        h3: q <= limits.q_max,
    };
    let mut notes = Vec::new();
    if !flags.h2 {
        notes.push(format!(
            "d(D, boundary) = {:.6e} below required {:.6e}",
            d0, limits.d0_min
        ));
    }
    if !flags.h3 {
        notes.push(format!("diam/rho = {:.6e} exceeds Q_max = {:.6e}", q, limits.q_max));
    }
    if matches!(shape, CavityShape::Polygon { .. }) {
        notes.push("polygon: rho from circumscribing circle, C2,alpha regularity not checked".into());
    }
    Ok(AssumptionReport {
        d0,
        diam,
        q,
        area,
        rho,
        flags,
        limits,
        notes,
    })
}

/// Inscribed polygon with vertices uniformly spaced in the curve parameter,
/// counterclockwise. Polygons are returned unchanged.
pub fn polygonalize<T: Real>(
    shape: &CavityShape<T>,
    n_segments: usize,
) -> Result<Vec<Point<T>>, GeometryError> {
    if n_segments < 3 {
        return Err(GeometryError::TooFewSegments(n_segments));
    }
    shape.check()?;
    let n = T::from_usize_lossy(n_segments);
    let poly = match shape {
        CavityShape::Circle { center, radius } => (0..n_segments)
            .map(|k| {
                let t = T::TAU() * T::from_usize_lossy(k) / n;
                Point::new(center.x + *radius * t.cos(), center.y + *radius * t.sin())
            })
            .collect(),
        CavityShape::Ellipse {
            center,
            a,
            b,
            angle,
        } => {
            let (s, c) = angle.sin_cos();
            (0..n_segments)
                .map(|k| {
                    let t = T::TAU() * T::from_usize_lossy(k) / n;
                    let (u, v) = (*a * t.cos(), *b * t.sin());
                    Point::new(center.x + c * u - s * v, center.y + s * u + c * v)
                })
                .collect()
        }
        CavityShape::Polygon { vertices } => vertices.clone(),
    };
    Ok(poly)
}

/// Signed polygon area, positive for counterclockwise vertex order.
pub fn shoelace<T: Real>(poly: &[Point<T>]) -> T {
    let n = poly.len();
    let mut s = T::zero();
    for i in 0..n {
        s += poly[i].cross(poly[(i + 1) % n]);
    }
    s * T::lit(0.5)
}

fn vertex_centroid<T: Real>(poly: &[Point<T>]) -> Point<T> {
    let n = T::from_usize_lossy(poly.len());
    let (sx, sy) = poly
        .iter()
        .fold((T::zero(), T::zero()), |(x, y), p| (x + p.x, y + p.y));
    Point::new(sx / n, sy / n)
}

/// Even-odd rule; points on the boundary count as inside.
pub fn point_in_polygon<T: Real>(poly: &[Point<T>], p: Point<T>) -> bool {
    let n = poly.len();
    let mut inside = false;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if orient(a, b, p) == 0.0
            && p.x >= a.x.min(b.x)
            && p.x <= a.x.max(b.x)
            && p.y >= a.y.min(b.y)
            && p.y <= a.y.max(b.y)
        {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let xi = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < xi {
                inside = !inside;
            }
        }
    }
    inside
}

fn segments_intersect<T: Real>(a: Point<T>, b: Point<T>, c: Point<T>, d: Point<T>) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return true;
    }
    let on = |p: Point<T>, q: Point<T>, r: Point<T>| {
        r.x >= p.x.min(q.x) && r.x <= p.x.max(q.x) && r.y >= p.y.min(q.y) && r.y <= p.y.max(q.y)
    };
    (o1 == 0.0 && on(a, b, c))
        || (o2 == 0.0 && on(a, b, d))
        || (o3 == 0.0 && on(c, d, a))
        || (o4 == 0.0 && on(c, d, b))
}

fn check_simple<T: Real>(poly: &[Point<T>]) -> Result<(), GeometryError> {
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if a == b {
            return Err(GeometryError::SelfIntersecting(i, i));
        }
        for j in i + 1..n {
            // adjacent edges share an endpoint by construction
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (c, d) = (poly[j], poly[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return Err(GeometryError::SelfIntersecting(i, j));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Point<f64> {
        Point::new(x, y)
    }

    #[test]
    fn areas() {
        let c = CavityShape::circle(p(0.5, 0.5), 0.1);
        assert!((cavity_area(&c).unwrap() - 0.031_415_926_535_897_93).abs() < 1e-15);
        let sq = CavityShape::Polygon {
            vertices: vec![p(0., 0.), p(1., 0.), p(1., 1.), p(0., 1.)],
        };
        assert_eq!(cavity_area(&sq).unwrap(), 1.0);
        let dom = DomainSpec::unit_square();
        let d = CavityShape::disk_with_fraction(&dom, p(0.5, 0.5), 0.031);
        assert!((cavity_area(&d).unwrap() / dom.area() - 0.031).abs() < 1e-15);
        assert_eq!(
            cavity_area(&CavityShape::circle(p(0.5, 0.5), 0.0)),
            Err(GeometryError::Degenerate)
        );
    }

    #[test]
    fn distances() {
        let dom = DomainSpec::unit_square();
        let d = |cx, cy, r| boundary_distance(&dom, &CavityShape::circle(p(cx, cy), r));
        assert!((d(0.5, 0.5, 0.1).unwrap() - 0.4).abs() < 1e-15);
        assert!((d(0.2, 0.5, 0.1).unwrap() - 0.1).abs() < 1e-15);
        assert!((d(0.5, 0.5, 0.45).unwrap() - 0.05).abs() < 1e-15);
        assert!(matches!(d(0.1, 0.5, 0.1), Err(GeometryError::NotInside(_))));
        assert!(matches!(d(0.05, 0.5, 0.1), Err(GeometryError::NotInside(_))));
    }

    #[test]
    fn assumptions() {
        let dom = DomainSpec::unit_square();
        let lim = AssumptionLimits::new(10.0, 0.01);
        let r = validate_assumptions(&dom, &CavityShape::circle(p(0.5, 0.5), 0.1), lim).unwrap();
        assert!(r.flags.all());
        assert_eq!(r.q, 2.0);
        let r = validate_assumptions(&dom, &CavityShape::circle(p(0.0015, 0.5), 0.001), lim).unwrap();
        assert!(!r.flags.h2 && r.flags.h3);
        let bow = CavityShape::Polygon {
            vertices: vec![p(0.2, 0.2), p(0.4, 0.4), p(0.4, 0.2), p(0.2, 0.4)],
        };
        assert!(matches!(
            validate_assumptions(&dom, &bow, lim),
            Err(GeometryError::SelfIntersecting(..))
        ));
    }

    #[test]
    fn polygonalize_cases() {
        let sq = polygonalize(&CavityShape::circle(p(0., 0.), 1.0), 4).unwrap();
        let want = [p(1., 0.), p(0., 1.), p(-1., 0.), p(0., -1.)];
        for (a, b) in sq.iter().zip(want) {
            assert!(a.dist(b) < 1e-15);
        }
        // max distance from chord to arc is the sagitta r(1 - cos(pi/n))
        let r = 0.1;
        let n = 64;
        let poly = polygonalize(&CavityShape::circle(p(0., 0.), r), n).unwrap();
        let sagitta = r * (1.0 - (std::f64::consts::PI / n as f64).cos());
        assert!(sagitta <= 1.21e-4);
        let worst = (0..n)
            .map(|i| r - poly[i].midpoint(poly[(i + 1) % n]).norm())
            .fold(0.0, f64::max);
        assert!(worst <= sagitta * (1.0 + 1e-12));
        let tri = vec![p(0.2, 0.2), p(0.3, 0.2), p(0.25, 0.3)];
        let shape = CavityShape::Polygon { vertices: tri.clone() };
        assert_eq!(polygonalize(&shape, 7).unwrap(), tri);
        assert_eq!(
            polygonalize(&shape, 2),
            Err(GeometryError::TooFewSegments(2))
        );
    }

    #[test]
    fn polygon_area_converges_quadratically() {
        let c = CavityShape::circle(p(0.5, 0.5), 0.3);
        let exact = cavity_area(&c).unwrap();
        let err = |n| exact - shoelace(&polygonalize(&c, n).unwrap());
        let mut n = 8;
        while n < 1024 {
            assert!(err(n) / err(2 * n) >= 3.5, "n = {n}");
            n *= 2;
        }
    }

    #[test]
    fn ellipse_extent() {
        let dom = DomainSpec::unit_square();
        let e = CavityShape::Ellipse {
            center: p(0.5, 0.5),
            a: 0.2,
            b: 0.1,
            angle: 0.0,
        };
        assert!((boundary_distance(&dom, &e).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(e.rho(), 0.1);
        assert!((cavity_area(&e).unwrap() - std::f64::consts::PI * 0.02).abs() < 1e-15);
    }

    #[test]
    fn report_is_pure() {
        let dom = DomainSpec::unit_square();
        let c = CavityShape::circle(p(0.3, 0.6), 0.12);
        let lim = AssumptionLimits::new(3.0, 0.05);
        assert_eq!(
            validate_assumptions(&dom, &c, lim).unwrap(),
            validate_assumptions(&dom, &c, lim).unwrap()
        );
    }

    #[test]
    fn single_precision_area() {
        let c = CavityShape::circle(Point::new(0.5f32, 0.5), 0.1);
        assert!((cavity_area(&c).unwrap() - 0.031_415_93).abs() < 1e-7);
    }
}
