//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use pipenet_core::composite::{
    make_branch, make_gain, make_joint, make_pipe, NominalCheck, PipeMember,
};
use pipenet_core::interconnect::{Network, PortRef};
use pipenet_core::steady_state::isothermal_nominal;
use pipenet_core::{GasProperties, PipeParams, SignalLabel};

pub const P_NOMINAL: f64 = 25e5;
pub const Q_NOMINAL: f64 = 21.0;
pub const T0: f64 = 300.0;

pub fn gas() -> GasProperties {
    GasProperties::new(518.28, 0.95, 1700.0, T0, T0).unwrap()
}

pub fn loop_params() -> PipeParams {
    PipeParams::new(10.0, 0.7, 0.0111).unwrap()
}

/// Pipe `id` of the loop, linearized at the shared nominal point.
pub fn loop_pipe(id: &str) -> PipeMember {
    let params = loop_params();
    let op = isothermal_nominal(P_NOMINAL, Q_NOMINAL, T0, &params, &gas()).unwrap();
    PipeMember::new(id, params, op)
}

pub fn port(s: &str) -> PortRef {
    s.parse().unwrap()
}

/// The ten-pipe compressor/valve loop: joint J (P1, P2 into P3), compressor
/// C, pipe P4, valve V, branches B1 (P5 into P6, P7) and B2 (P8 into P9, P10).
pub fn loop_network(kc: f64, kv: f64) -> Network {
    let g = gas();
    let p = |i: usize| loop_pipe(&format!("P{i}"));
    let mut net = Network::new();
    net.add(make_joint("J", &p(3), &p(1), &p(2), &g, NominalCheck::Skip).unwrap())
        .add(make_gain("C", kc).unwrap())
        .add(make_pipe(&p(4), &g).unwrap())
        .add(make_gain("V", kv).unwrap())
        .add(make_branch("B1", &p(5), &p(6), &p(7), &g, NominalCheck::Skip).unwrap())
        .add(make_branch("B2", &p(8), &p(9), &p(10), &g, NominalCheck::Skip).unwrap())
        .link(port("J.r"), port("C.l"))
        .link(port("C.r"), port("P4.l"))
        .link(port("P4.r"), port("V.l"))
        .link(port("V.r"), port("B1.l"))
        .link(port("B1.r2"), port("B2.l"))
        .link(port("B2.r2"), port("J.l2"))
        .external("fill", port("J.l1"))
        .external("dist", port("B1.r1"))
        .external("vent", port("B2.r1"));
    net
}

pub fn label(s: &str) -> SignalLabel {
    s.parse().unwrap()
}

/// Reference loop flow gains, rows `q_{i,l}` for i = 1..10, columns (fill, vent, dist).
pub const REFERENCE_FLOW_GAINS: [[f64; 3]; 10] = [
    [0.0, 1.0, 1.0],
    [0.184, -1.022, -0.8],
    [0.184, -0.022, 0.2],
    [0.184, -0.022, 0.2],
    [0.184, -0.022, 0.2],
    [0.0, 0.0, 1.0],
    [0.184, -0.022, -0.8],
    [0.184, -0.022, -0.8],
    [0.0, 1.0, 0.0],
    [0.184, -1.022, -0.8],
];

/// A random well-formed network of at most six elements: either an open
/// chain of pipes, gains and series, or a ring closed by a joint and a
/// branch. Every pipe flows forward.
pub fn random_network(rng: &mut rand_chacha::ChaCha8Rng) -> Network {
    use pipenet_core::composite::make_series;
    use rand::Rng;

    let g = gas();
    let mut next = 0usize;
    let mut fresh = |rng: &mut rand_chacha::ChaCha8Rng, p_l: f64, q: f64| {
        next += 1;
        let params = PipeParams::new(
            rng.random_range(1.0..100.0),
            rng.random_range(0.3..1.0),
            rng.random_range(0.005..0.05),
        )
        .unwrap();
        let op = isothermal_nominal(p_l, q, T0, &params, &g).unwrap();
        PipeMember::new(format!("P{next}"), params, op)
    };
    let q = rng.random_range(1.0..20.0);
    let p_l = rng.random_range(1e6..5e6);
    let ring = rng.random_bool(0.5);
    let middle = if ring { rng.random_range(0..=4) } else { rng.random_range(1..=6) };

    let mut elems = Vec::new();
    for i in 0..middle {
        let e = match rng.random_range(0..3) {
            0 => make_pipe(&fresh(rng, p_l, q), &g).unwrap(),
            1 => {
                let k = rng.random_range(0.5..5.0) * if rng.random_bool(0.2) { -1.0 } else { 1.0 };
                make_gain(&format!("G{i}"), k).unwrap()
            }
            _ => {
                let n = rng.random_range(2..=3);
                let mut members: Vec<PipeMember> = Vec::new();
                for _ in 0..n {
                    let pl = members.last().map_or(p_l, |m| m.op.p_r());
                    members.push(fresh(rng, pl, q));
                }
                make_series(&format!("S{i}"), &members, &g).unwrap()
            }
        };
        elems.push(e);
    }

    let mut net = Network::new();
    let ids: Vec<String> = if ring {
        let j = make_joint("J", &fresh(rng, p_l, q), &fresh(rng, p_l, q), &fresh(rng, p_l, q), &g, NominalCheck::Skip)
            .unwrap();
        let b = make_branch("B", &fresh(rng, p_l, q), &fresh(rng, p_l, q), &fresh(rng, p_l, q), &g, NominalCheck::Skip)
            .unwrap();
        net.add(j);
        let mut ids = vec!["J".to_string()];
        for e in elems {
            ids.push(e.id().to_string());
            net.add(e);
        }
        net.add(b);
        ids.push("B".into());
        ids
    } else {
        elems
            .into_iter()
            .map(|e| {
                let id = e.id().to_string();
                net.add(e);
                id
            })
            .collect()
    };
    for w in ids.windows(2) {
        net.link(port(&format!("{}.r", w[0])), port(&format!("{}.l", w[1])));
    }
    if ring {
        net.link(port("B.r2"), port("J.l2"))
            .external("a", port("J.l1"))
            .external("b", port("B.r1"));
    } else {
        net.external("pin", port(&format!("{}.l", ids[0])))
            .external("qout", port(&format!("{}.r", ids[ids.len() - 1])));
    }
    net
}
