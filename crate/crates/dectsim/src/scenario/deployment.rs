//! Hexagonal site layout and node placement.
//!
//! Sites sit on a hex grid with inter-site distance `isd_m`; each site's
//! service cell is a hexagon of area (sqrt(3)/2)*ISD^2. Every site hosts
//! three co-located sinks so that single- and multi-channel runs compare
//! like for like. A site operates one carrier: in multi-channel runs the
//! carriers are reused site-by-site, so extra channels relieve inter-site
//! interference but never split a site's own load.

use rand::Rng;

use crate::propagation::Endpoint;

/// Co-located sinks at every site (one per carrier when three are in use).
pub const SINKS_PER_SITE: usize = 3;

/// Spiral hex-grid centers: the origin, then full rings outward, `isd_m`
/// between neighbours. Supports the standard 1/7/19-site layouts and any
/// other prefix of the spiral.
pub fn hex_site_centers(n_sites: usize, isd_m: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n_sites);
    out.push((0.0, 0.0));
    // Axial directions for a pointy-top hex grid.
    let dirs = [(1.0, 0.0), (0.5, 0.75f64.sqrt()), (-0.5, 0.75f64.sqrt()),
                (-1.0, 0.0), (-0.5, -(0.75f64.sqrt())), (0.5, -(0.75f64.sqrt()))];
    let mut ring = 1;
    while out.len() < n_sites {
        // Start at the "south-east" corner of the ring and walk its edge.
        let (mut x, mut y) = (ring as f64 * isd_m, 0.0);
        for &(dx, dy) in dirs.iter().cycle().skip(2).take(6) {
            for _ in 0..ring {
                if out.len() == n_sites {
                    return out;
                }
                out.push((x, y));
                x += dx * isd_m;
                y += dy * isd_m;
            }
        }
        ring += 1;
    }
    out
}

/// Total service area of the layout in km^2.
pub fn deployment_area_km2(n_sites: usize, isd_m: f64) -> f64 {
    let cell_m2 = 0.75f64.sqrt() * isd_m * isd_m;
    n_sites as f64 * cell_m2 / 1e6
}

/// Radius of each of the per-site discs when `total_area_km2` is split
/// evenly over `n_sites` discs.
pub fn disc_radius_m(total_area_km2: f64, n_sites: usize) -> f64 {
    (total_area_km2 * 1e6 / (n_sites as f64 * std::f64::consts::PI)).sqrt()
}

/// Where the mesh nodes go, relative to the site layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Placement {
    /// Uniform over the union of the hexagonal service cells.
    FullArea,
    /// Uniform over equal discs centred on the sites, `total_area_km2`
    /// summed over all discs.
    SiteDiscs { total_area_km2: f64 },
}

/// Position and role of one device, before radio state is attached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceSpec {
    pub endpoint: Endpoint,
    pub site: usize,
    /// Carrier index for sinks; nodes scan, so this is meaningful only
    /// when `endpoint.is_sink`.
    pub carrier: u8,
}

/// True when the point lies inside the pointy-top hexagon of circumradius
/// `isd / sqrt(3)` centred at the origin (cell of a grid with spacing isd).
fn in_hex_cell(x: f64, y: f64, isd_m: f64) -> bool {
    let r = isd_m / 3.0f64.sqrt(); // circumradius; inradius is isd/2
    let (ax, ay) = (x.abs(), y.abs());
    // Flat sides face +-x at distance isd/2; sloped sides complete the hull.
    ax <= isd_m / 2.0 + 1e-9 && ax / 3.0f64.sqrt() + ay <= r + 1e-9
}

/// Build the full device list: `SINKS_PER_SITE` sinks per site followed by
/// `n_nodes` placed nodes with the given indoor fraction.
#[allow(clippy::too_many_arguments)]
pub fn place_nodes(
    centers: &[(f64, f64)],
    isd_m: f64,
    placement: Placement,
    n_nodes: usize,
    indoor_fraction: f64,
    sink_height_m: f64,
    node_height_m: f64,
    n_carriers: u8,
    rng: &mut impl Rng,
) -> Vec<DeviceSpec> {
    let mut out = Vec::with_capacity(centers.len() * SINKS_PER_SITE + n_nodes);
    for (site, &(cx, cy)) in centers.iter().enumerate() {
        for _ in 0..SINKS_PER_SITE {
            out.push(DeviceSpec {
                endpoint: Endpoint {
                    x: cx,
                    y: cy,
                    height_m: sink_height_m,
                    indoor: false,
                    is_sink: true,
                },
                site,
                carrier: (site % n_carriers as usize) as u8,
            });
        }
    }
    for _ in 0..n_nodes {
        let (site, x, y) = match placement {
            Placement::FullArea => loop {
                let site = rng.gen_range(0..centers.len());
                let r = isd_m / 3.0f64.sqrt();
                let dx = rng.gen_range(-r..r);
                let dy = rng.gen_range(-r..r);
                if in_hex_cell(dx, dy, isd_m) {
                    break (site, centers[site].0 + dx, centers[site].1 + dy);
                }
            },
            Placement::SiteDiscs { total_area_km2 } => {
                let site = rng.gen_range(0..centers.len());
                let radius = disc_radius_m(total_area_km2, centers.len());
                let rr = radius * rng.gen::<f64>().sqrt();
                let th = rng.gen_range(0.0..std::f64::consts::TAU);
                (site, centers[site].0 + rr * th.cos(), centers[site].1 + rr * th.sin())
            }
        };
        let indoor = rng.gen::<f64>() < indoor_fraction;
        out.push(DeviceSpec {
            endpoint: Endpoint { x, y, height_m: node_height_m, indoor, is_sink: false },
            site,
            carrier: 0,
        });
    }
    out
}
