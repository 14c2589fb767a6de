//! Convex test domains described by signed-distance functions.
//!
//! Each domain carries the metadata the mesher needs (bounding box, pinned
//! corner points) together with its area |Ω|.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::MaeError;

/// A point in the plane.
pub type Point = [f64; 2];

/// The four domains supported by the solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DomainKind {
    /// x² + y² < 1
    #[serde(rename = "disk")]
    UnitDisk,
    /// x² + 2y² < 1
    #[serde(rename = "ellipse")]
    Ellipse,
    /// |x|³ + |y|³ < 1
    #[serde(rename = "smoothsq")]
    SmoothedSquare,
    /// (0, 1)²
    #[serde(rename = "square")]
    UnitSquare,
}

impl DomainKind {
    pub const ALL: [DomainKind; 4] = [
        DomainKind::UnitDisk,
        DomainKind::Ellipse,
        DomainKind::SmoothedSquare,
        DomainKind::UnitSquare,
    ];

    /// Command-line token for this domain.
    pub fn token(self) -> &'static str {
        match self {
            DomainKind::UnitDisk => "disk",
            DomainKind::Ellipse => "ellipse",
            DomainKind::SmoothedSquare => "smoothsq",
            DomainKind::UnitSquare => "square",
        }
    }
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for DomainKind {
    type Err = MaeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "disk" => Ok(DomainKind::UnitDisk),
            "ellipse" => Ok(DomainKind::Ellipse),
            "smoothsq" => Ok(DomainKind::SmoothedSquare),
            "square" => Ok(DomainKind::UnitSquare),
            other => Err(MaeError::UnknownDomain(other.to_string())),
        }
    }
}

/// Axis-aligned bounding box `(xmin, xmax, ymin, ymax)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl BoundingBox {
    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    /// Length of the diagonal; used as the domain diameter scale.
    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.xmin && p[0] <= self.xmax && p[1] >= self.ymin && p[1] <= self.ymax
    }
}

/// One of the four test domains together with its meshing metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub bounding_box: BoundingBox,
    /// Corner points pinned during meshing; only the unit square has any.
    pub fixed_points: Vec<Point>,
    /// Area |Ω|.
    pub analytic_area: f64,
}

impl DomainSpec {
    pub fn new(kind: DomainKind) -> Self {
        let bounding_box = match kind {
            DomainKind::UnitDisk | DomainKind::SmoothedSquare => BoundingBox {
                xmin: -1.0,
                xmax: 1.0,
                ymin: -1.0,
                ymax: 1.0,
            },
            DomainKind::Ellipse => {
                let b = std::f64::consts::FRAC_1_SQRT_2;
                BoundingBox {
                    xmin: -1.0,
                    xmax: 1.0,
                    ymin: -b,
                    ymax: b,
                }
            }
            DomainKind::UnitSquare => BoundingBox {
                xmin: 0.0,
                xmax: 1.0,
                ymin: 0.0,
                ymax: 1.0,
            },
        };
        let fixed_points = match kind {
            DomainKind::UnitSquare => vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            _ => Vec::new(),
        };
        DomainSpec {
            kind,
            bounding_box,
            fixed_points,
            analytic_area: reference_area(kind),
        }
    }

    pub fn signed_distance(&self, p: Point) -> f64 {
        signed_distance(self.kind, p)
    }

    /// Diameter scale used for relative geometric tolerances.
    pub fn diameter(&self) -> f64 {
        self.bounding_box.diagonal()
    }

    /// Maps a boundary parameter `t ∈ [0, 1)` to a point on ∂Ω.
    ///
    /// The parametrization is not arc-length but covers the whole boundary.
    pub fn boundary_point(&self, t: f64) -> Point {
        let theta = 2.0 * PI * t;
        let (s, c) = theta.sin_cos();
        match self.kind {
            DomainKind::UnitDisk => [c, s],
            DomainKind::Ellipse => [c, s * std::f64::consts::FRAC_1_SQRT_2],
            DomainKind::SmoothedSquare => {
                let rho = (c.abs().powi(3) + s.abs().powi(3)).cbrt();
                [c / rho, s / rho]
            }
            DomainKind::UnitSquare => {
                let u = 4.0 * t.rem_euclid(1.0);
                let side = u.floor() as usize;
                let f = u - u.floor();
                match side {
                    0 => [f, 0.0],
                    1 => [1.0, f],
                    2 => [1.0 - f, 1.0],
                    _ => [0.0, 1.0 - f],
                }
            }
        }
    }
}

impl From<DomainKind> for DomainSpec {
    fn from(kind: DomainKind) -> Self {
        DomainSpec::new(kind)
    }
}

/// Signed distance to ∂Ω: negative inside, positive outside.
///
/// Exact for the disk and the square. The ellipse and the smoothed square use
/// level-set normalizations, `sqrt(x² + 2y²) − 1` and `(|x|³ + |y|³)^(1/3) − 1`.
pub fn signed_distance(kind: DomainKind, p: Point) -> f64 {
    let [x, y] = p;
    match kind {
        DomainKind::UnitDisk => x.hypot(y) - 1.0,
        DomainKind::Ellipse => (x * x + 2.0 * y * y).sqrt() - 1.0,
        DomainKind::SmoothedSquare => (x.abs().powi(3) + y.abs().powi(3)).cbrt() - 1.0,
        DomainKind::UnitSquare => {
            let qx = (x - 0.5).abs() - 0.5;
            let qy = (y - 0.5).abs() - 0.5;
            let outside = qx.max(0.0).hypot(qy.max(0.0));
            outside + qx.max(qy).min(0.0)
        }
    }
}

/// Area |Ω| of the domain.
///
/// The smoothed square has no elementary closed form; its area is integrated
/// once with adaptive Simpson quadrature and cached.
pub fn reference_area(kind: DomainKind) -> f64 {
    match kind {
        DomainKind::UnitDisk => PI,
        DomainKind::Ellipse => PI * std::f64::consts::FRAC_1_SQRT_2,
        DomainKind::UnitSquare => 1.0,
        DomainKind::SmoothedSquare => {
            static AREA: OnceLock<f64> = OnceLock::new();
            *AREA.get_or_init(|| {
                // Column height of the first-quadrant region is (1 - x³)^(1/3).
                4.0 * adaptive_simpson(&|x: f64| (1.0 - x * x * x).max(0.0).cbrt(), 0.0, 1.0, 1e-8)
            })
        }
    }
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }

    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, a, b);
    let tol = rel_tol * whole.abs().max(f64::MIN_POSITIVE);
    recurse(f, a, b, fa, fm, fb, whole, tol, 60)
}
