use angpn_core::data::{load_csv, stratified_split};
use angpn_core::graphlearn::{auto_gamma, pairwise_euclidean, GraphMode};
use angpn_core::propagation::{GradMode, HyperParams};
use angpn_core::train::{accuracy, fit, init_model, TrainConfig};
use angpn_core::model::network_forward;
use angpn_core::Variant;
use std::path::Path;

fn run(ds: &angpn_core::Dataset, dist: &angpn_core::DistanceMatrix, gamma: f64, k: usize, variant: Variant, seeds: std::ops::Range<u64>) -> Vec<f64> {
    let mut accs = vec![];
    for seed in seeds {
        let split = stratified_split(ds, 0.1, 0.05, seed).unwrap();
        let beta = if variant == Variant::Angpn { 0.3 } else { 0.0 };
        let hyper = HyperParams::new(0.5, beta, gamma, k, 2, GraphMode::default(), GradMode::Unrolled).unwrap();
        let model = init_model(&[ds.dim(), 50, 50, ds.class_count], hyper, variant, seed).unwrap();
        let cfg = TrainConfig { max_epochs: 300, patience: 40, seed, ..TrainConfig::default() };
        let out = fit(model, &ds.features, dist, &split, &cfg).unwrap();
        let z = network_forward(&out.model, dist, &ds.features).unwrap();
        accs.push(accuracy(&z, &split.labels, &split.test_idx).unwrap());
    }
    accs
}

#[test]
fn gamma_confirm() {
    let ds = load_csv(Path::new("../../data/docwords_features.csv"), Path::new("../../data/docwords_labels.txt")).unwrap();
    let dist = pairwise_euclidean(&ds.features).unwrap();
    let auto = auto_gamma(&dist, 10).unwrap();
    for mult in [3.0, 4.0, 5.0] {
        let gamma = auto * mult;
        let a = run(&ds, &dist, gamma, 10, Variant::Angpn, 0..5);
        let n = run(&ds, &dist, gamma, 10, Variant::Ngpn, 0..5);
        let am = a.iter().sum::<f64>() / 5.0;
        let nm = n.iter().sum::<f64>() / 5.0;
        let wins = a.iter().zip(&n).filter(|(x, y)| x > y).count();
        println!("mult {mult}: gamma {gamma:.3} angpn {am:.4} ngpn {nm:.4} diff {:+.4} paired wins {wins}/5", am - nm);
    }
}
