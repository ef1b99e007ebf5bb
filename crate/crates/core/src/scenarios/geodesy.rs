//! WGS84 geodetic / ECEF / local north-east-down conversions.

use nalgebra::{Matrix3, Vector3};

/// WGS84 semi-major axis in meters.
const WGS84_A: f64 = 6_378_137.0;
/// WGS84 flattening.
const WGS84_F: f64 = 1.0 / 298.257_223_563;
/// First eccentricity squared, e^2 = (2 - f) f.
const WGS84_E2: f64 = WGS84_F * (2.0 - WGS84_F);

/// Geodetic coordinates: latitude/longitude in degrees, altitude in meters
/// above the ellipsoid.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Geodetic {
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub alt_m: f64,
}

impl Geodetic {
    pub fn new(lat_deg: f64, lon_deg: f64, alt_m: f64) -> Self {
        Self { lat_deg, lon_deg, alt_m }
    }
}

/// Prime vertical radius of curvature at geodetic latitude `lat` (radians).
fn prime_vertical_radius(lat: f64) -> f64 {
    WGS84_A / (1.0 - WGS84_E2 * lat.sin() * lat.sin()).sqrt()
}

pub fn geodetic_to_ecef(g: &Geodetic) -> Vector3<f64> {
    let lat = g.lat_deg.to_radians();
    let lon = g.lon_deg.to_radians();
    let n = prime_vertical_radius(lat);
    let (slat, clat) = lat.sin_cos();
    let (slon, clon) = lon.sin_cos();
    Vector3::new(
        (n + g.alt_m) * clat * clon,
        (n + g.alt_m) * clat * slon,
        (n * (1.0 - WGS84_E2) + g.alt_m) * slat,
    )
}

pub fn ecef_to_geodetic(p: &Vector3<f64>) -> Geodetic {
    let lon = p.y.atan2(p.x);
    let rho = (p.x * p.x + p.y * p.y).sqrt();
    // Iterative latitude solution; converges to well below 1e-9 m quickly.
    let mut lat = p.z.atan2(rho * (1.0 - WGS84_E2));
    let mut alt = 0.0;
    for _ in 0..10 {
        let n = prime_vertical_radius(lat);
        alt = rho / lat.cos() - n;
        lat = p.z.atan2(rho * (1.0 - WGS84_E2 * n / (n + alt)));
    }
    Geodetic::new(lat.to_degrees(), lon.to_degrees(), alt)
}

/// Local tangent frame with north-east-down axes anchored at an origin.
#[derive(Debug, Clone)]
pub struct LocalFrame {
    origin_ecef: Vector3<f64>,
    /// Rotation taking ECEF offsets into NED coordinates.
    to_ned: Matrix3<f64>,
}

impl LocalFrame {
    pub fn new(origin: &Geodetic) -> Self {
        let lat = origin.lat_deg.to_radians();
        let lon = origin.lon_deg.to_radians();
        let (slat, clat) = lat.sin_cos();
        let (slon, clon) = lon.sin_cos();
        let to_ned = Matrix3::new(
            -slat * clon, -slat * slon, clat, //
            -slon, clon, 0.0, //
            -clat * clon, -clat * slon, -slat,
        );
        Self { origin_ecef: geodetic_to_ecef(origin), to_ned }
    }

    /// Geodetic point to local [north, east, down] in meters.
    pub fn to_ned(&self, g: &Geodetic) -> Vector3<f64> {
        self.to_ned * (geodetic_to_ecef(g) - self.origin_ecef)
    }

    /// Local [north, east, down] back to geodetic.
    pub fn from_ned(&self, ned: &Vector3<f64>) -> Geodetic {
        ecef_to_geodetic(&(self.origin_ecef + self.to_ned.transpose() * ned))
    }
}
