//! Generates the synthetic ADS-B fixture used by the replay scenario tests:
//! five aircraft flying straight, level-ish legs for 300 s near the default
//! scene, reported every 10 s. Writes CSV to stdout.

use airtrack_core::scenarios::geodesy::{Geodetic, LocalFrame};
use nalgebra::Vector3;

fn main() {
    let origin = Geodetic::new(52.41185, -1.36465, 0.0);
    let frame = LocalFrame::new(&origin);

    // Flight legs in scene NED coordinates, clustered so every aircraft stays
    // inside the 111 km range of the airborne sensor for the whole window.
    // (id, start north, start east, altitude m, speed m/s, heading deg from north)
    let legs = [
        ("ac0001", -34_000.0, 55_000.0, 8_000.0, 150.0, 85.0),
        ("ac0002", -26_000.0, 58_000.0, 9_500.0, 170.0, 95.0),
        ("ac0003", -18_000.0, 55_000.0, 7_000.0, 140.0, 80.0),
        ("ac0004", -10_000.0, 57_000.0, 10_500.0, 160.0, 100.0),
        ("ac0005", -2_000.0, 55_000.0, 8_800.0, 155.0, 90.0),
    ];

    println!("time,icao24,lat,lon,geoaltitude");
    let t0 = 1_600_000_000u64;
    for step in 0..=30u64 {
        let t = step as f64 * 10.0;
        for (id, n0, e0, alt, speed, heading_deg) in legs {
            let h = f64::to_radians(heading_deg);
            let north = n0 + speed * h.cos() * t;
            let east = e0 + speed * h.sin() * t;
            // Gentle climb/descent so altitude is not constant.
            let altitude = alt + 2.0 * (t / 300.0) * 100.0 * h.sin();
            let g = frame.from_ned(&Vector3::new(north, east, -altitude));
            println!(
                "{},{},{:.8},{:.8},{:.2}",
                t0 + step * 10,
                id,
                g.lat_deg,
                g.lon_deg,
                g.alt_m
            );
        }
    }
}
