use dectsim::engine::named_stream;
use dectsim::propagation::{sensitivity_dbm, noise_floor_dbm, LinkSampler, PerCurve};
use dectsim::numerology::channel_bandwidth_hz;
use dectsim::scenario::{hex_site_centers, place_nodes, Placement};

fn pct(v: &mut Vec<f64>, p: f64) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((p / 100.0) * v.len() as f64).ceil().max(1.0) as usize;
    v[rank.min(v.len()) - 1]
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let area: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(0.05);
    let npow: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(7.0);
    let spow: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(7.0);
    let n: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(2000);

    let centers = hex_site_centers(7, 500.0);
    let mut rng = named_stream(9, "placement", 0);
    let specs = place_nodes(
        &centers, 500.0,
        Placement::SiteDiscs { total_area_km2: area },
        n, 0.8, 5.0, 1.5, 1, &mut rng,
    );
    let links = LinkSampler::new(9, 1.9);
    let noise = noise_floor_dbm(channel_bandwidth_hz(1, 1).unwrap() as f64, 7.0);
    let sens = sensitivity_dbm(noise, &PerCurve::default());
    println!("sens = {sens:.2} dBm; minq(b3) = {:.2}; minq(b20) = {:.2}", sens + 3.0, sens + 20.0);

    let sinks: Vec<usize> = specs.iter().enumerate().filter(|(_, s)| s.endpoint.is_sink).map(|(i, _)| i).collect();
    let nodes: Vec<usize> = specs.iter().enumerate().filter(|(_, s)| !s.endpoint.is_sink).map(|(i, _)| i).collect();

    let mut beacon_rx = Vec::new(); // best sink beacon at node
    let mut uplink_rx = Vec::new(); // node -> that sink
    let mut nbr_rx = Vec::new();    // best same-site neighbor beacon (node power)
    let (mut dir_ok_raw, mut dir_ok_b3, mut dir_ok_b20) = (0, 0, 0);
    let mut uplink_dead_of_assoc0 = 0;

    for &i in &nodes {
        let si = specs[i].site;
        let mut best = f64::NEG_INFINITY;
        for &s in &sinks {
            let rx = links.rx_power_dbm(spow, s as u32, &specs[s].endpoint, i as u32, &specs[i].endpoint);
            if rx > best { best = rx; }
        }
        beacon_rx.push(best);
        if best >= sens { dir_ok_raw += 1; }
        if best >= sens + 3.0 { dir_ok_b3 += 1; }
        if best >= sens + 20.0 { dir_ok_b20 += 1; }
        // uplink to the closest same-site sink (symmetric loss, power differs)
        let up = best - spow + npow;
        uplink_rx.push(up);
        if best >= sens && up < sens { uplink_dead_of_assoc0 += 1; }

        let mut bestn = f64::NEG_INFINITY;
        for &j in nodes.iter() {
            if j == i || specs[j].site != si { continue; }
            let rx = links.rx_power_dbm(npow, j as u32, &specs[j].endpoint, i as u32, &specs[i].endpoint);
            if rx > bestn { bestn = rx; }
        }
        nbr_rx.push(bestn);
    }
    let n_f = nodes.len() as f64;
    println!("direct assoc possible: bias0 {:.1}% bias3 {:.1}% bias20 {:.1}%",
        100.0 * dir_ok_raw as f64 / n_f, 100.0 * dir_ok_b3 as f64 / n_f, 100.0 * dir_ok_b20 as f64 / n_f);
    println!("uplink dead among bias0-associable: {:.1}%", 100.0 * uplink_dead_of_assoc0 as f64 / dir_ok_raw.max(1) as f64);
    println!("beacon rx p10/p50/p90: {:.1} {:.1} {:.1}",
        pct(&mut beacon_rx.clone(), 10.0), pct(&mut beacon_rx.clone(), 50.0), pct(&mut beacon_rx.clone(), 90.0));
    println!("uplink rx p10/p50/p90: {:.1} {:.1} {:.1}",
        pct(&mut uplink_rx.clone(), 10.0), pct(&mut uplink_rx.clone(), 50.0), pct(&mut uplink_rx.clone(), 90.0));
    println!("best nbr beacon p10/p50/p90: {:.1} {:.1} {:.1}",
        pct(&mut nbr_rx.clone(), 10.0), pct(&mut nbr_rx.clone(), 50.0), pct(&mut nbr_rx.clone(), 90.0));
    let nbr20 = nbr_rx.iter().filter(|&&v| v >= sens + 20.0).count();
    println!("nodes with a bias20-usable neighbor: {:.1}%", 100.0 * nbr20 as f64 / n_f);
}
