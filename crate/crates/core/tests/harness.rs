mod common;

use common::instance;
use pgpr::harness::{
    generate_synthetic, mnlp, rmse, run_experiment, run_instances, summarize_results, sweep, write_summary, Algorithm,
    DataSource, ExperimentConfig, SweepAxis,
};
use pgpr::parallel::PartitionMode;
use pgpr::{fgp_predict, Dataset, Hyperparameters, SetId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small(algorithm: Algorithm) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::synthetic(algorithm, 128, 32, 2).unwrap();
    cfg.instances = 2;
    cfg.seed = 5;
    cfg
}

#[test]
fn metrics_match_loops() {
    let (train, test) = instance(1, 40, 25, 2);
    let h = Hyperparameters::isotropic(1.0, 0.05, 0.3, 2).unwrap();
    let p = fgp_predict(&train, &test, &h, false).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let truth: Vec<f64> = (0..25).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    let var = p.variances();
    let mut sse = 0.0;
    let mut nlp = 0.0;
    for i in 0..25 {
        let e = truth[i] - p.mean[i];
        sse += e * e;
        nlp += 0.5 * (e * e / var[i] + (2.0 * std::f64::consts::PI * var[i]).ln());
    }
    assert!((rmse(&p, &truth).unwrap() - (sse / 25.0).sqrt()).abs() < 1e-14);
    assert!((mnlp(&p, &truth).unwrap() - nlp / 25.0).abs() < 1e-12);
}

#[test]
fn single_worker_ppic_reproduces_full_gp_rmse() {
    let mut cfg = small(Algorithm::Ppic);
    cfg.support_size = Some(8);
    let ppic = run_instances(&cfg).unwrap();
    let fgp = run_instances(&small(Algorithm::Fgp)).unwrap();
    for (a, b) in ppic.instances.iter().zip(&fgp.instances) {
        assert!((a.rmse.unwrap() - b.rmse.unwrap()).abs() < 1e-8);
        assert!(a.rmse_vs_fgp.unwrap() < 1e-8);
        assert!(a.log.is_empty());
    }
}

#[test]
fn csv_output_is_deterministic_apart_from_timings() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(Algorithm::Ppic);
    cfg.workers = 4;
    cfg.support_size = Some(8);
    cfg.partition = PartitionMode::Clustered;
    let strip = |path: &std::path::Path| -> Vec<Vec<String>> {
        let mut rdr = csv::Reader::from_path(path).unwrap();
        let headers = rdr.headers().unwrap().clone();
        rdr.records()
            .map(|r| {
                let r = r.unwrap();
                headers
                    .iter()
                    .zip(r.iter())
                    .filter(|(h, _)| !h.starts_with("time_") && *h != "speedup")
                    .map(|(_, v)| v.to_string())
                    .collect()
            })
            .collect()
    };
    let mut outs = Vec::new();
    for k in 0..2 {
        cfg.results = Some(dir.path().join(format!("r{k}.csv")));
        cfg.messages = Some(dir.path().join(format!("m{k}.csv")));
        run_experiment(&cfg).unwrap();
        outs.push((strip(cfg.results.as_ref().unwrap()), std::fs::read(cfg.messages.as_ref().unwrap()).unwrap()));
    }
    assert_eq!(outs[0], outs[1]);
    assert_eq!(outs[0].0.len(), 2);
    assert!(!outs[0].1.is_empty());
}

#[test]
fn support_sweep_improves_accuracy() {
    let mut cfg = small(Algorithm::Ppic);
    cfg.workers = 4;
    cfg.support_size = Some(4);
    cfg.instances = 1;
    let reports = sweep(&cfg, SweepAxis::SupportSize, &[4, 8, 16, 32]).unwrap();
    let errs: Vec<f64> = reports.iter().map(|r| r.rmse_vs_fgp().unwrap()).collect();
    for w in errs.windows(2) {
        assert!(w[1] <= w[0] * 1.05, "{errs:?}");
    }
}

#[test]
fn small_rank_icf_reports_instead_of_scoring() {
    let mut cfg = ExperimentConfig::synthetic(Algorithm::Picf, 128, 64, 1).unwrap();
    cfg.hyperparameters = Hyperparameters::isotropic(1.0, 1e-4, 0.05, 1).unwrap();
    cfg.workers = 4;
    cfg.rank = Some(2);
    cfg.instances = 1;
    let r = run_instances(&cfg).unwrap();
    assert!(r.negative_variance_count() > 0);
    assert!(r.mnlp().is_none());
    assert!(r.rmse().is_some());
}

#[test]
fn csv_sources_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let h = Hyperparameters::isotropic(1.0, 0.01, 0.2, 2).unwrap();
    let (train, test) = generate_synthetic(100, 20, 2, &h, 3).unwrap();
    let (tp, up) = (dir.path().join("train.csv"), dir.path().join("test.csv"));
    train.write_csv(&tp).unwrap();
    test.write_csv(&up).unwrap();
    let back = Dataset::read_csv(&tp, SetId::TRAIN).unwrap();
    assert_eq!(back.outputs(), train.outputs());

    let text = format!(
        "algorithm = picf\nworkers = 3\nrank = 10\ntrain_csv = train.csv\ntest_csv = test.csv\n\
         signal_variance = 1\nnoise_variance = 0.01\nlength_scales = 0.2, 0.2\ninstances = 2\n\
         results = out.csv\nmessages = msg.csv\n"
    );
    let cfg_path = dir.path().join("exp.cfg");
    std::fs::write(&cfg_path, text).unwrap();
    let cfg = ExperimentConfig::read(&cfg_path).unwrap();
    assert!(matches!(cfg.source, DataSource::Files { .. }));
    let report = run_experiment(&cfg).unwrap();
    assert!(report.speedup().is_some());
    // Same data both times: only the partition seed changes.
    assert_eq!(report.instances[0].n_train, 100);

    let mut fgp = cfg.clone();
    fgp.algorithm = Algorithm::Fgp;
    fgp.rank = None;
    fgp.results = Some(dir.path().join("fgp.csv"));
    fgp.messages = None;
    run_experiment(&fgp).unwrap();
    let rows = summarize_results(&[dir.path().join("out.csv"), dir.path().join("fgp.csv")]).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].key[0], "fgp");
    assert_eq!(rows[1].rows, 2);
    let mut buf = Vec::new();
    write_summary(&mut buf, &rows).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);
}
