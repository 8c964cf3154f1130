//! End-to-end checks through the public API against values worked out by
//! hand on small graphs.

use ndarray::{array, Array2};
use pgso_core::graph::{parse_dataset, parse_graph, write_bundle, GraphFormat, Labels};
use pgso_core::nn::{Model, ModelSpec, Architecture, OperatorMode, ReadoutMode, Task};
use pgso_core::operator::{build_operator, ClampEpsilon, ParamSet, Preset};
use pgso_core::rng::seeded;
use pgso_core::spectral::{eigenvalues, gershgorin, SpectralOptions};
use pgso_core::train::{run, TaskData, Telemetry, TrainConfig};
use pgso_core::AttributedGraph;

fn star3() -> AttributedGraph {
    // centre 0 joined to 1, 2, 3
    AttributedGraph::from_edges(4, [(0, 1), (0, 2), (0, 3)]).unwrap()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

#[test]
fn star_laplacians_by_hand() {
    let g = star3();
    let l = build_operator(&g, Preset::UnnormalisedLaplacian.params(), ClampEpsilon::default()).to_dense();
    let expected = array![[3., -1., -1., -1.], [-1., 1., 0., 0.], [-1., 0., 1., 0.], [-1., 0., 0., 1.]];
    assert_eq!(l, expected);

    let rw = build_operator(&g, Preset::RandomWalkLaplacian.params(), ClampEpsilon::default()).to_dense();
    let t = -1.0 / 3.0;
    let expected = array![[1., t, t, t], [-1., 1., 0., 0.], [-1., 0., 1., 0.], [-1., 0., 0., 1.]];
    assert!(close(rw.as_slice().unwrap(), expected.as_slice().unwrap(), 1e-15));
}

#[test]
fn star_gcn_operator_by_hand() {
    // augmented degrees 4, 2, 2, 2
    let g = star3();
    let m = build_operator(&g, Preset::GcnNorm.params(), ClampEpsilon::default()).to_dense();
    let c = 1.0 / 8f64.sqrt();
    let expected = array![[0.25, c, c, c], [c, 0.5, 0., 0.], [c, 0., 0.5, 0.], [c, 0., 0., 0.5]];
    assert!(close(m.as_slice().unwrap(), expected.as_slice().unwrap(), 1e-15));
}

#[test]
fn star_spectra_by_hand() {
    let g = star3();
    let opts = SpectralOptions::default();
    // adjacency of K_{1,3}: +-sqrt(3) and 0 twice
    let ev = eigenvalues(&g, Preset::Adjacency.params(), &opts).unwrap();
    assert!(close(&ev, &[-3f64.sqrt(), 0.0, 0.0, 3f64.sqrt()], 1e-12), "{ev:?}");
    // Laplacian of K_{1,3}: 0, 1, 1, 4
    let ev = eigenvalues(&g, Preset::UnnormalisedLaplacian.params(), &opts).unwrap();
    assert!(close(&ev, &[0.0, 1.0, 1.0, 4.0], 1e-12), "{ev:?}");
    // normalised Laplacians of a bipartite graph: 0, 1, 1, 2
    for p in [Preset::SymmetricLaplacian, Preset::RandomWalkLaplacian] {
        let ev = eigenvalues(&g, p.params(), &opts).unwrap();
        assert!(close(&ev, &[0.0, 1.0, 1.0, 2.0], 1e-12), "{p}: {ev:?}");
    }
}

#[test]
fn star_bounds_by_hand() {
    let g = star3();
    // Laplacian: centres = degrees, radii = degrees
    let b = gershgorin(&g, Preset::UnnormalisedLaplacian.params(), ClampEpsilon::default());
    assert_eq!(b.centers, vec![3.0, 1.0, 1.0, 1.0]);
    assert_eq!(b.radii, vec![3.0, 1.0, 1.0, 1.0]);
    assert_eq!((b.support_lo, b.support_hi), (0.0, 6.0));
    // GCN operator: [-(3 - 1)/(3 + 1), 1]
    let b = gershgorin(&g, Preset::GcnNorm.params(), ClampEpsilon::default());
    assert!((b.support_lo + 0.5).abs() < 1e-15 && (b.support_hi - 1.0).abs() < 1e-15);
}

#[test]
fn clamping_an_isolated_node() {
    // node 2 is isolated: D^-1 would divide by zero without the clamp
    let g = AttributedGraph::from_edges(3, [(0, 1)]).unwrap();
    let eps = ClampEpsilon::new(1e-3).unwrap();
    let m = build_operator(&g, Preset::MeanAggregation.params(), eps);
    assert_eq!(m.clamp_count, 1);
    let d = m.to_dense();
    assert!(d.iter().all(|v| v.is_finite()));
    assert_eq!(d.row(2).to_vec(), vec![0.0, 0.0, 0.0]);
}

#[test]
fn bundle_text_round_trip() {
    let text = "n 3 d 2 classes 2\nE\n0 1\n1 2\nX\n1 0\n0.5 0.25\n0 1\nY\n0 1 1\n";
    let g = parse_graph(text, GraphFormat::Bundle).unwrap();
    assert_eq!((g.n(), g.attribute_dim(), g.num_classes()), (3, 2, 2));
    assert_eq!(g.node_labels(), Some(&[0, 1, 1][..]));
    let mut out = Vec::new();
    write_bundle(&g, &mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), text);

    let two = format!("{text}{text}");
    assert!(parse_graph(&two, GraphFormat::Bundle).is_err());
    let graphs = parse_dataset("n 2 d 1 classes 2\nE\n0 1\nX\n1\n1\nY\n1\nn 1 d 1 classes 2\nE\nX\n1\nY\n0\n").unwrap();
    assert_eq!(graphs.len(), 2);
    assert!(matches!(graphs[0].labels(), Labels::Graph(1)));
}

#[test]
fn checkpoint_reload_predicts_identically() {
    let g = pgso_core::graph::sample_sbm(&pgso_core::SbmSpec { k: 2, community_size: 15, p: 0.5, q: 0.1, seed: 3 }).unwrap();
    let split = pgso_core::graph::split_nodes(&g, Default::default(), true, 1).unwrap();
    let config = TrainConfig { epochs: 15, hidden: 8, telemetry: Telemetry::Off, ..TrainConfig::node_default() };
    let trained = run(&config, &TaskData::Node { graph: g.clone(), split }).unwrap();
    let text = trained.model.to_checkpoint();
    let back = Model::from_checkpoint(&text).unwrap();
    assert_eq!(back.to_checkpoint(), text);
    let x = pgso_core::graph::standardize_columns(g.attributes());
    let a = trained.model.predict(&g, &x).unwrap();
    let b = back.predict(&g, &x).unwrap();
    assert!(a.iter().zip(b.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
}

#[test]
fn mpgso_tuples_train_independently() {
    let g = pgso_core::graph::sample_sbm(&pgso_core::SbmSpec { k: 2, community_size: 12, p: 0.6, q: 0.1, seed: 8 }).unwrap();
    let spec = ModelSpec {
        arch: Architecture::Gcn,
        task: Task::Node,
        in_dim: g.attribute_dim(),
        hidden: 6,
        classes: 2,
        depth: 3,
        readout: ReadoutMode::Sum,
        dropout: 0.0,
        clamp: ClampEpsilon::default(),
        mode: OperatorMode::Mpgso,
        init: Preset::GcnNorm.params(),
    };
    let model = Model::new(&spec, &mut seeded(0)).unwrap();
    assert_eq!(model.operator_params().len(), 3);
    let x: Array2<f64> = pgso_core::graph::standardize_columns(g.attributes());
    let cache = model.forward(&g, &x, None).unwrap();
    let d = Array2::from_elem(cache.output.raw_dim(), 0.1);
    let grads = model.backward(&cache, &d).unwrap();
    assert_eq!(grads.ops.len(), 3);
    assert_ne!(grads.ops[0], grads.ops[2]);
    let s: ParamSet = "m1=0 m2=1 m3=0 e1=0 e2=-0.5 e3=-0.5 a=1".parse().unwrap();
    assert_eq!(model.operator_params(), &[s, s, s]);
}
