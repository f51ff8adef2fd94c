mod common;

use common::*;
use pipenet_core::netspec::{
    elaborate, parse, render, Decl, GasDecl, NetworkSpec, NominalDecl, NominalTarget, OutputDecl,
    PipeDecl,
};
use pipenet_core::interconnect::{ExternalInput, Link};
use pipenet_core::{Error, Side, SignalLabel};
use proptest::prelude::*;

const LOOP: &str = include_str!("../../../networks/loop.pipenet");

fn diagnostics(text: &str) -> Vec<(usize, usize, String)> {
    match parse(text) {
        Err(Error::Parse(d)) => d.into_iter().map(|d| (d.line, d.column, d.message)).collect(),
        other => panic!("expected diagnostics, got {other:?}"),
    }
}

fn first_message(text: &str) -> String {
    diagnostics(text).remove(0).2
}

const GAS: &str = "gas Rs=518.28 z0=0.95 T0=300\n";

#[test]
fn loop_file_structure() {
    let spec = parse(LOOP).unwrap();
    assert_eq!(spec.elements().len(), 6);
    assert_eq!(spec.links.len(), 6);
    assert_eq!(spec.inputs.len(), 3);
    let ids: Vec<_> = spec.elements().iter().map(|d| d.id().to_string()).collect();
    assert_eq!(ids, ["J", "C", "P4", "V", "B1", "B2"]);
}

#[test]
fn loop_file_matches_programmatic_build() {
    let built = elaborate(&parse(LOOP).unwrap()).unwrap();
    let (stacked, _, closed) = loop_network(4.0, 0.8).build().unwrap();
    assert_eq!(built.stacked.model().n_states(), 19);
    assert_eq!(built.closed.model.n_inputs(), 3);
    assert_eq!(built.closed.model.n_outputs(), 15);
    assert_eq!(built.closed.input_names, closed.input_names);
    assert_eq!(built.stacked.model().state_labels(), stacked.model().state_labels());
    let diff = (built.closed.model.a() - closed.model.a()).amax();
    assert!(diff <= 1e-9 * closed.model.a().amax(), "{diff}");
    assert!(built.warnings.is_empty(), "{:?}", built.warnings);
}

#[test]
fn builds_are_bit_identical() {
    let a = elaborate(&parse(LOOP).unwrap()).unwrap();
    let b = elaborate(&parse(LOOP).unwrap()).unwrap();
    assert_eq!(a.closed.model, b.closed.model);
    assert_eq!(a.connections, b.connections);
}

#[test]
fn empty_file_has_no_gas() {
    assert_eq!(diagnostics(""), [(1, 1, "no gas block".to_string())]);
    assert_eq!(first_message("# only a comment\n\n"), "no gas block");
}

#[test]
fn left_to_left_link_is_rejected() {
    let text = format!(
        "{GAS}pipe A L=1 d=0.1 lambda=0.01\npipe B L=1 d=0.1 lambda=0.01\nnominal * pl=1e5 q=1\n\
         link A.l B.l\ninput a = A.r\ninput b = B.r\n"
    );
    let d = diagnostics(&text);
    assert!(d.iter().any(|(l, c, m)| *l == 5 && *c == 6 && m.contains("incompatible flanges")), "{d:?}");
}

#[test]
fn standalone_pipe_with_external_ports() {
    let text = format!("{GAS}pipe A L=5 d=0.2 lambda=0.02\nnominal * pl=1e5 q=1\ninput pin = A.l\ninput qout = A.r\n");
    let m = elaborate(&parse(&text).unwrap()).unwrap();
    assert!(m.connections.f.iter().all(|v| *v == 0.0));
    assert_eq!(m.connections.g, nalgebra::DMatrix::identity(2, 2));
    assert_eq!(m.closed.input_names, ["pin", "qout"]);
}

#[test]
fn missing_external_is_reported() {
    let text = format!("{GAS}pipe A L=5 d=0.2 lambda=0.02\nnominal * pl=1e5 q=1\ninput pin = A.l\n");
    let d = diagnostics(&text);
    assert_eq!(d.len(), 1);
    assert!(d[0].2.starts_with("unconnected component input A.r.q"), "{d:?}");
    assert_eq!((d[0].0, d[0].1), (2, 1));
}

#[test]
fn consumed_pipes_cannot_be_linked() {
    let text = format!(
        "{GAS}pipe A L=1 d=0.1 lambda=0.01\npipe B L=1 d=0.1 lambda=0.01\npipe Z L=1 d=0.1 lambda=0.01\n\
         series S pipes=[A,B]\nnominal * pl=1e5 q=1\nlink B.r Z.l\n"
    );
    let msg = first_message(&text);
    assert!(msg.contains("belongs to 'S'"), "{msg}");
}

#[test]
fn syntax_errors_are_positioned() {
    let text = format!("{GAS}pipe A L=abc d=0.1 lambda=0.01\n");
    assert_eq!(diagnostics(&text)[0], (2, 10, "'abc' is not a number".to_string()));

    let text = format!("{GAS}pipe A L=1 d=0.1 lambda=0.01 colour=red\n");
    assert_eq!(diagnostics(&text)[0].1, 30);

    let text = format!("{GAS}valve V k=1\n");
    assert_eq!(diagnostics(&text)[0], (2, 1, "unknown keyword 'valve'".to_string()));

    let text = format!("{GAS}joint J feeds=[A,B into=C\n");
    assert_eq!(diagnostics(&text)[0], (2, 9, "unterminated '['".to_string()));

    let text = format!("{GAS}pipe A L=1 d=0.1\n");
    assert!(diagnostics(&text)[0].2.contains("'lambda' or 'Re'"));

    let text = format!("{GAS}pipe A L=-1 d=0.1 lambda=0.01\n");
    assert!(diagnostics(&text)[0].2.contains("positive"));

    let text = format!("{GAS}gain K k=0\n");
    assert!(diagnostics(&text)[0].2.contains("nonzero"));

    let text = format!("{GAS}{GAS}");
    assert_eq!(diagnostics(&text)[0], (2, 1, "duplicate gas line".to_string()));
}

#[test]
fn semantic_errors() {
    let two = "pipe A L=1 d=0.1 lambda=0.01\npipe B L=1 d=0.1 lambda=0.01\n";
    let cases = [
        (format!("{GAS}{two}pipe A L=2 d=0.1 lambda=0.01\n"), "duplicate name 'A'"),
        (format!("{GAS}{two}series S pipes=[A,Q]\n"), "undeclared pipe 'Q'"),
        (format!("{GAS}{two}series S pipes=[A,A]\n"), "twice"),
        (format!("{GAS}{two}series S pipes=[A]\nseries T pipes=[A,B]\n"), "already belongs"),
        (format!("{GAS}{two}"), "has no nominal point"),
        (format!("{GAS}{two}series S pipes=[A,B]\nnominal B pl=1e5 q=1\n"), "follows from its predecessor"),
        (format!("{GAS}{two}nominal * pl=1e5 q=1\nnominal * pl=1e5 q=2\n"), "duplicate nominal"),
        (format!("{GAS}{two}nominal * pl=1e5 q=1\nlink A.r B.x\n"), "unknown port 'B.x'"),
        (
            format!("{GAS}{two}nominal * pl=1e5 q=1\nlink A.r B.l\ninput a = A.r\n"),
            "used more than once",
        ),
        (
            format!("{GAS}{two}nominal * pl=1e5 q=1\nlink A.r B.l\ninput a = A.l\ninput a = B.r\n"),
            "duplicate input name",
        ),
        (
            format!("{GAS}{two}nominal * pl=1e5 q=1\nlink A.r B.l\ninput a = A.l\ninput b = B.r\noutput x = A.r.q\n"),
            "not an output",
        ),
    ];
    for (text, want) in cases {
        let d = diagnostics(&text);
        assert!(d.iter().any(|(_, _, m)| m.contains(want)), "{want}: {d:?}");
    }
}

#[test]
fn series_nominals_are_chained() {
    let text = include_str!("../../../networks/cascade3.pipenet");
    let m = elaborate(&parse(text).unwrap()).unwrap();
    assert_eq!(m.closed.model.n_inputs(), 2);
    assert_eq!(m.selected().unwrap().n_outputs(), 2);
    assert_eq!(m.output_label("pout").unwrap(), label("S3.r.p"));
    assert_eq!(m.output_label("S1.l.q").unwrap(), label("S1.l.q"));
    assert!(m.output_label("S2.r.p").is_err());
}

#[test]
fn inconsistent_explicit_nominals_fail_the_node_check() {
    let text = format!(
        "{GAS}pipe A L=1 d=0.1 lambda=0.01\npipe B L=1 d=0.1 lambda=0.01\npipe C L=1 d=0.1 lambda=0.01\n\
         joint J feeds=[A,B] into=C\nnominal * pl=1e5 q=1\nnominal C pl=1e5 q=3\n\
         input a = J.l1\ninput b = J.l2\ninput c = J.r\n"
    );
    assert!(elaborate(&parse(&text).unwrap()).is_err());
}

#[test]
fn haaland_pipes_resolve() {
    let text = format!(
        "{GAS}pipe A L=10 d=0.7 eps=4.57e-5 Re=1.168e8\nnominal * pl=25e5 q=21\ninput a = A.l\ninput b = A.r\n"
    );
    let m = elaborate(&parse(&text).unwrap()).unwrap();
    assert_eq!(m.closed.model.n_states(), 2);
}

#[test]
fn loop_round_trips() {
    let spec = parse(LOOP).unwrap();
    let text = render(&spec);
    assert_eq!(parse(&text).unwrap(), spec);
    assert_eq!(render(&parse(&text).unwrap()), text);
}

fn opt_pos() -> impl Strategy<Value = Option<f64>> {
    prop::option::of(1e-6..1e7f64)
}

prop_compose! {
    fn pipe_decl(id: String)(
        length in 1e-3..1e5f64,
        diameter in 1e-3..3.0f64,
        grow in prop::option::of(1.0..2.0f64),
        eps in opt_pos(),
        dh in prop::option::of(-1e3..1e3f64),
        lambda in 1e-4..0.2f64,
        re in opt_pos(),
        krad in prop::option::of(0.0..100.0f64),
    ) -> PipeDecl {
        PipeDecl {
            id: id.clone(),
            length,
            diameter,
            dout: grow.map(|g| g * diameter),
            eps,
            dh,
            lambda: Some(lambda),
            re,
            krad,
        }
    }
}

fn chain_spec() -> impl Strategy<Value = NetworkSpec> {
    (1usize..5, any::<bool>()).prop_flat_map(|(n, with_gain)| {
        let pipes: Vec<_> = (0..n).map(|i| pipe_decl(format!("P{i}"))).collect();
        (
            pipes,
            opt_pos(),
            opt_pos(),
            1e5..1e7f64,
            -50.0..50.0f64,
            prop::option::of(200.0..400.0f64),
            -1e3..1e3f64,
            prop::bool::weighted(0.5),
        )
            .prop_map(move |(pipes, cv, tamb, pl, q, tl, k, select)| {
                let k = if k == 0.0 { 1.0 } else { k };
                let mut decls: Vec<Decl> = pipes.into_iter().map(Decl::Pipe).collect();
                let mut chain: Vec<String> = (0..n).map(|i| format!("P{i}")).collect();
                if with_gain {
                    decls.insert(1, Decl::Gain { id: "K".into(), k });
                    chain.insert(1, "K".into());
                }
                let links = chain
                    .windows(2)
                    .map(|w| Link {
                        right: format!("{}.r", w[0]).parse().unwrap(),
                        left: format!("{}.l", w[1]).parse().unwrap(),
                    })
                    .collect();
                let outputs = if select {
                    vec![OutputDecl {
                        name: "out".into(),
                        label: SignalLabel::pressure(&chain[chain.len() - 1], Side::Right),
                    }]
                } else {
                    Vec::new()
                };
                NetworkSpec {
                    gas: GasDecl { rs: 518.28, z0: 0.95, t0: 300.0, cv, tamb },
                    decls,
                    nominals: vec![NominalDecl {
                        target: NominalTarget::Default,
                        pl,
                        q,
                        tl,
                        tr: None,
                    }],
                    links,
                    inputs: vec![
                        ExternalInput {
                            name: "pin".into(),
                            port: format!("{}.l", chain[0]).parse().unwrap(),
                        },
                        ExternalInput {
                            name: "qout".into(),
                            port: format!("{}.r", chain[chain.len() - 1]).parse().unwrap(),
                        },
                    ],
                    outputs,
                }
            })
    })
}

proptest! {
    #[test]
    fn render_parse_round_trip(spec in chain_spec()) {
        let text = render(&spec);
        let back = parse(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(back, spec);
    }

    #[test]
    fn parser_never_panics(text in "[a-zA-Z0-9=.\\[\\],*# \n-]{0,200}") {
        let _ = parse(&text);
    }
}
