mod common;

use common::*;
use nalgebra::DMatrix;
use pipenet_core::analysis::{freq_response, mason_check, log_points};
use pipenet_core::composite::{make_gain, make_pipe};
use pipenet_core::interconnect::{
    build_fg, close, select_outputs, stack, ExternalInput, Link, Network, PortRef,
};
use pipenet_core::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn port_refs_parse_and_print() {
    let p: PortRef = "B1.r2".parse().unwrap();
    assert_eq!((p.element.as_str(), p.port.as_str()), ("B1", "r2"));
    assert_eq!(p.to_string(), "B1.r2");
    for bad in ["", "B1", ".r", "B1.", "B1.r.x", "1B.r"] {
        assert!(bad.parse::<PortRef>().is_err(), "{bad}");
    }
}

#[test]
fn stacking_is_block_diagonal() {
    let g = gas();
    let comps = [make_pipe(&loop_pipe("A"), &g).unwrap(), make_gain("K", 2.0).unwrap(), make_pipe(&loop_pipe("B"), &g).unwrap()];
    let s = stack(&comps).unwrap();
    let m = s.model();
    assert_eq!((m.n_states(), m.n_inputs(), m.n_outputs()), (4, 6, 6));
    assert_eq!(m.a().view((0, 2), (2, 2)), DMatrix::<f64>::zeros(2, 2));
    assert_eq!(m.d()[(2, 2)], 2.0);
    assert_eq!(s.component("K").unwrap().inputs, 2..4);
    assert_eq!(s.components()[2].states, 2..4);

    let dup = [make_gain("K", 1.0).unwrap(), make_gain("K", 2.0).unwrap()];
    assert!(matches!(stack(&dup), Err(Error::Config(_))));
    assert!(stack(&[]).is_err());
}

fn two_pipes() -> Network {
    let g = gas();
    let mut net = Network::new();
    net.add(make_pipe(&loop_pipe("A"), &g).unwrap())
        .add(make_pipe(&loop_pipe("B"), &g).unwrap());
    net
}

#[test]
fn wiring_errors() {
    let net = two_pipes();
    let s = net.stacked().unwrap();
    let link = |r: &str, l: &str| Link { right: port(r), left: port(l) };
    let ext = |n: &str, p: &str| ExternalInput { name: n.into(), port: port(p) };

    let err = build_fg(&s, &[link("A.l", "B.l")], &[]).unwrap_err();
    assert!(matches!(err, Error::Config(ref m) if m.contains("incompatible flanges")), "{err}");

    let err = build_fg(&s, &[link("A.r", "B.l")], &[ext("a", "A.l")]).unwrap_err();
    assert_eq!(err, Error::UnconnectedInput(label("B.r.q")));

    let err = build_fg(&s, &[link("A.r", "B.l")], &[ext("a", "A.l"), ext("b", "B.r"), ext("c", "B.l")])
        .unwrap_err();
    assert_eq!(err, Error::ConflictingDrivers(label("B.l.p")));

    let err = build_fg(&s, &[link("A.r", "B.l")], &[ext("a", "A.l"), ext("a", "B.r")]).unwrap_err();
    assert!(matches!(err, Error::Config(ref m) if m.contains("duplicate external")));

    assert!(build_fg(&s, &[link("A.r", "C.l")], &[]).is_err());
    assert!(build_fg(&s, &[link("A.x", "B.l")], &[]).is_err());
}

#[test]
fn closure_of_two_pipes() {
    let mut net = two_pipes();
    net.link(port("A.r"), port("B.l"))
        .external("pin", port("A.l"))
        .external("qout", port("B.r"));
    let (stacked, conn, closed) = net.build().unwrap();
    assert_eq!(conn.f.iter().filter(|v| **v != 0.0).count(), 2);
    assert_eq!(closed.input_names, ["pin", "qout"]);
    assert_eq!(closed.model.input_labels(), [label("A.l.p"), label("B.r.q")]);
    assert_eq!(closed.model.n_states(), 4);
    // No static feedthrough: closure only couples the state matrices.
    let b = &closed.model;
    assert_eq!(b.d(), &DMatrix::zeros(4, 2));
    let direct = stacked.model().a() + stacked.model().b() * &conn.f * stacked.model().c();
    assert_eq!(b.a(), &direct);
    let sel = select_outputs(b, &[label("B.r.p")]).unwrap();
    assert_eq!(sel.n_outputs(), 1);
    assert!(select_outputs(b, &[label("Z.r.p")]).is_err());
}

#[test]
fn gain_ring_is_ill_posed() {
    let mut net = Network::new();
    net.add(make_gain("G1", 2.0).unwrap())
        .add(make_gain("G2", 0.5).unwrap())
        .link(port("G1.r"), port("G2.l"))
        .link(port("G2.r"), port("G1.l"));
    let (s, c) = {
        let s = net.stacked().unwrap();
        let c = build_fg(&s, net.links(), net.externals()).unwrap();
        (s, c)
    };
    assert!(matches!(close(&s, &c), Err(Error::IllPosedLoop(_))));
}

#[test]
fn subnetwork_as_element() {
    // Wrap two linked pipes as one element and link a third pipe behind it.
    let mut inner = two_pipes();
    inner
        .link(port("A.r"), port("B.l"))
        .external("pin", port("A.l"))
        .external("qout", port("B.r"));
    let sub = inner.into_element("N").unwrap();
    let names: Vec<_> = sub.ports().iter().map(|p| p.name.as_str()).collect();
    assert_eq!(names, ["A_l", "B_r"]);

    let g = gas();
    let mut outer = Network::new();
    outer
        .add(sub)
        .add(make_pipe(&loop_pipe("C"), &g).unwrap())
        .link(port("N.B_r"), port("C.l"))
        .external("pin", port("N.A_l"))
        .external("qout", port("C.r"));
    let (_, _, nested) = outer.build().unwrap();

    let mut flat = two_pipes();
    flat.add(make_pipe(&loop_pipe("C"), &g).unwrap())
        .link(port("A.r"), port("B.l"))
        .link(port("B.r"), port("C.l"))
        .external("pin", port("A.l"))
        .external("qout", port("C.r"));
    let (_, _, flat) = flat.build().unwrap();

    let outs = [label("C.r.p"), label("A.l.q")];
    let a = select_outputs(&nested.model, &outs).unwrap();
    let b = select_outputs(&flat.model, &outs).unwrap();
    let w = log_points(1e-2, 1e2, 9);
    let (ha, hb) = (freq_response(&a, &w).unwrap(), freq_response(&b, &w).unwrap());
    for (x, y) in ha.h.iter().zip(&hb.h) {
        assert!((x - y).norm() <= 1e-9 * (1.0 + y.norm()));
    }
}

#[test]
fn random_networks_close_consistently() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let omegas = log_points(1e-3, 1e3, 20);
    for _ in 0..50 {
        let net = random_network(&mut rng);
        let (stacked, conn, closed) = net.build().unwrap();
        assert_eq!(closed.model.n_states(), stacked.model().n_states());
        let report = mason_check(&stacked, &conn, &omegas).unwrap();
        assert!(report.max_deviation < 1e-8, "{}", report.max_deviation);
    }
}
