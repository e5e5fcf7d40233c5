use dectsim::scenario::Placement;
use dectsim::sim::{run_simulation, SimParams};

fn main() {
    let mut p = SimParams {
        seed: 42,
        n_sites: 7,
        placement: Placement::SiteDiscs { total_area_km2: 0.0075 },
        n_nodes: 15000,
        n_carriers: 1,
        rssi_bias_db: 3.0,
        sink_power_dbm: 7.0,
        sink_height_m: 5.0,
        node_power_dbm: 7.0,
        beacon_period_s: 60.0,
        msgs_per_node_per_hour: 60.0,
        duration_s: 300.0,
        drain_s: 60.0,
        window_s: 30.0,
        ..SimParams::default()
    };
    for arg in std::env::args().skip(1) {
        let (k, v) = arg.split_once('=').expect("key=value");
        match k {
            "n" => p.n_nodes = v.parse().unwrap(),
            "bias" => p.rssi_bias_db = v.parse().unwrap(),
            "sites" => p.n_sites = v.parse().unwrap(),
            "dur" => p.duration_s = v.parse().unwrap(),
            "drain" => p.drain_s = v.parse().unwrap(),
            "rate" => p.msgs_per_node_per_hour = v.parse().unwrap(),
            "ch" => p.n_carriers = v.parse().unwrap(),
            "area" => {
                p.placement = Placement::SiteDiscs { total_area_km2: v.parse().unwrap() }
            }
            "seed" => p.seed = v.parse().unwrap(),
            "npow" => p.node_power_dbm = v.parse().unwrap(),
            "spow" => p.sink_power_dbm = v.parse().unwrap(),
            "maxhops" => p.max_hops = v.parse().unwrap(),
            "beacon" => p.beacon_period_s = v.parse().unwrap(),
            "window" => p.window_s = v.parse().unwrap(),
            _ => panic!("unknown key {k}"),
        }
    }
    let s = run_simulation(p);
    println!("{}", toml::to_string(&s).unwrap());
}
