//! Scratch: training speed/accuracy probe (will be replaced by real tests).
use std::time::Instant;
use surreptix_core::pipeline::{train, PipelineKind, PipelineModel, TrainConfig};
use surreptix_core::synth::generate_corpus;

#[test]
#[ignore]
fn probe_training() {
    let t0 = Instant::now();
    let data = generate_corpus(10, 30, 1.0, 42).unwrap();
    eprintln!("corpus gen: {:?}", t0.elapsed());
    for kind in [PipelineKind::Abp, PipelineKind::Dbp, PipelineKind::Sbp] {
        let t = Instant::now();
        let mut model = PipelineModel::build(kind, 10, 7).unwrap();
        let cfg = TrainConfig { epochs: 6, seed: 7, ..Default::default() };
        let report = train(&mut model, &data, &cfg).unwrap();
        eprintln!(
            "{:?}: {:?} train_acc {:.3} test_acc {:.3} loss {:.4}",
            kind,
            t.elapsed(),
            report.train_accuracy,
            report.test_accuracy,
            report.final_loss
        );
    }
}
