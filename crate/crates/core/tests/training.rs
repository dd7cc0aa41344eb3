use segia_core::defense::accuracy;
use segia_core::graph::{generate_synthetic, SyntheticSpec};
use segia_core::surrogate::{train, SurrogateModel, TrainConfig, Variant};
use segia_core::{Error, Graph, GraphF32};

fn separable() -> SyntheticSpec {
    SyntheticSpec {
        n: 200,
        c: 2,
        class_sep: 3.0,
        ..Default::default()
    }
}

#[test]
fn separable_two_class_graph_is_learned() {
    let g: Graph = generate_synthetic(&separable()).unwrap();
    let cfg = TrainConfig { epochs: 200, ..Default::default() };
    for variant in [Variant::Sgc, Variant::PrSgc, Variant::Gcn2] {
        let init = SurrogateModel::init(variant, g.n_features(), 2, 16, 0.1, 0).unwrap();
        let trained = train(&init, &g, &cfg).unwrap();
        assert_eq!(trained.losses.len(), 201);
        assert!(trained.final_loss() < 2f64.ln());
        let acc = accuracy(&trained.model, g.view(), g.labeled_set(), g.labels()).unwrap();
        assert!(acc >= 0.95, "{variant}: training accuracy {acc}");
        assert_eq!(trained.model.trained_on(), Some(g.fingerprint().as_str()));
    }
}

#[test]
fn single_precision_pipeline_runs() {
    let g: GraphF32 = generate_synthetic(&separable()).unwrap();
    let trained = train(&SurrogateModel::sgc(g.n_features(), 2), &g, &TrainConfig::default()).unwrap();
    assert!(trained.final_loss() < 2f32.ln());
}

#[test]
fn divergence_names_the_epoch() {
    let g: Graph = generate_synthetic(&separable()).unwrap();
    let cfg = TrainConfig { lr: f64::MAX, epochs: 10 };
    match train(&SurrogateModel::sgc(g.n_features(), 2), &g, &cfg) {
        Err(Error::Divergence { step, .. }) => assert!(step >= 1),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn checkpoints_round_trip_through_files() {
    let g: Graph = generate_synthetic(&separable()).unwrap();
    let trained = train(&SurrogateModel::gcn2(g.n_features(), 8, 2, 4), &g, &TrainConfig { epochs: 20, ..Default::default() })
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    trained.model.save(&path).unwrap();
    assert_eq!(SurrogateModel::load(&path).unwrap(), trained.model);
}
