use std::path::Path;
use std::process::{Command, Output};

use qbert::checkpoint::Checkpoint;
use qbert::ctensor::CTensor;
use qbert::data::{synthetic_classification, synthetic_corpus, write_tsv, LabeledText, Vocab};
use qbert::models::{AnyClassifier, Arch, ModelConfig};

fn qbert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qbert")).args(args).env("QBERT_LOG", "warn").output().expect("spawn qbert")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn last_train_accuracy(csv: &str) -> f64 {
    let line = csv.lines().filter(|l| l.contains(",train,")).last().expect("train row");
    line.rsplit(',').next().unwrap().parse().unwrap()
}

#[test]
fn finetune_fits_separable_data() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.tsv");
    write_tsv(&train, &synthetic_classification(200, 2, 9)).unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(&config, "epochs = 50\n").unwrap();
    let out = dir.path().join("ft");
    let o = qbert(&["finetune", "--config", s(&config), "--ckpt", "none", "--train", s(&train), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(csv.starts_with("epoch,split,loss,accuracy\n"));
    assert!(last_train_accuracy(&csv) >= 0.95, "{csv}");
}

#[test]
fn end2end_arch_trains_from_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.tsv");
    write_tsv(&train, &synthetic_classification(120, 2, 4)).unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(&config, "epochs = 30\nfinetune_batch = 32\n").unwrap();
    let out = dir.path().join("bow");
    let o = qbert(&["finetune", "--config", s(&config), "--arch", "qcls-end2end", "--train", s(&train), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ckpt = Checkpoint::load(&out.join("model.ckpt")).unwrap();
    assert_eq!(ckpt.header.arch, "qcls-end2end");

    let o = qbert(&["eval", "--ckpt", s(&out.join("model.ckpt")), "--data", s(&train)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    for key in ["accuracy", "f1", "mcc"] {
        assert!(text.lines().any(|l| l.starts_with(key)), "{text}");
    }
}

#[test]
fn eval_of_constant_predictor_is_majority_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<LabeledText> = (0..10)
        .map(|i| LabeledText {
            label: usize::from(i >= 7),
            text: format!("word{} other", i % 3),
        })
        .collect();
    let data = dir.path().join("data.tsv");
    write_tsv(&data, &rows).unwrap();

    // a zero projection gives equal logits, so every prediction is class 0
    let vocab = Vocab::build(rows.iter().map(|r| r.text.as_str()), 1, 64).unwrap();
    let cfg = ModelConfig { vocab_size: vocab.len(), d_model: 8, ..ModelConfig::default() };
    let (_, mut store) = AnyClassifier::initialized(Arch::QclsEnd2End, cfg.clone()).unwrap();
    let proj = store.id("cls.projection").unwrap();
    *store.value_mut(proj) = CTensor::zeros(&[2, 8]);
    let ckpt = dir.path().join("const.ckpt");
    Checkpoint::from_store(&store, &cfg, "qcls-end2end", "finetune", 0, vocab.tokens().to_vec()).save(&ckpt).unwrap();

    let o = qbert(&["eval", "--ckpt", s(&ckpt), "--data", s(&data)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("accuracy 0.700000"), "{}", stdout(&o));
}

#[test]
fn pretrain_then_finetune_from_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    std::fs::write(&corpus, synthetic_corpus(60, 1).join("\n")).unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(&config, "d_model = 8\nd_hidden = 8\npretrain_steps = 12\npretrain_batch = 4\nepochs = 2\n").unwrap();
    let pre = dir.path().join("pre");
    let o = qbert(&["pretrain", "--config", s(&config), "--corpus", s(&corpus), "--out", s(&pre)]);
    assert!(o.status.success(), "{}", stderr(&o));

    let csv = std::fs::read_to_string(pre.join("metrics.csv")).unwrap();
    let steps: Vec<u64> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(csv.lines().next(), Some("step,loss_mlm,loss_nsp,loss_total"));
    assert_eq!(steps, (1..=12).collect::<Vec<_>>());
    assert!(pre.join("config.toml").exists());

    let train = dir.path().join("train.tsv");
    write_tsv(&train, &synthetic_classification(20, 2, 1)).unwrap();
    let ckpt = pre.join("model.ckpt");
    let o = qbert(&["finetune", "--config", s(&config), "--ckpt", s(&ckpt), "--train", s(&train), "--dev", s(&train), "--out", s(&dir.path().join("ft"))]);
    assert!(o.status.success(), "{}", stderr(&o));

    // a different architecture key is refused with the key named
    let other = dir.path().join("other.toml");
    std::fs::write(&other, "d_model = 8\nd_hidden = 8\nn_layers = 1\n").unwrap();
    let o = qbert(&["finetune", "--config", s(&other), "--ckpt", s(&ckpt), "--train", s(&train), "--out", s(&dir.path().join("x"))]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("n_layers"), "{}", stderr(&o));
}

#[test]
fn malformed_inputs_report_lines() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "d_model = 8\nbogus_key = 1\n").unwrap();
    let train = dir.path().join("train.tsv");
    std::fs::write(&train, "0\tfine row\n1 missing tab\n").unwrap();
    let out = dir.path().join("o");

    let o = qbert(&["finetune", "--config", s(&config), "--train", s(&train), "--out", s(&out)]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("bad.toml:2"), "{}", stderr(&o));

    std::fs::write(&config, "d_model = 8\n").unwrap();
    let o = qbert(&["finetune", "--config", s(&config), "--train", s(&train), "--out", s(&out)]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("train.tsv:2"), "{}", stderr(&o));

    let o = qbert(&["finetune", "--config", s(&dir.path().join("missing.toml")), "--train", s(&train), "--out", s(&out)]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("missing.toml"), "{}", stderr(&o));
}

#[test]
fn gradcheck_single_layer_and_unknown_layer() {
    let o = qbert(&["gradcheck", "--layer", "unitary", "--seeds", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("0 failed"));
    let o = qbert(&["gradcheck", "--layer", "conv2d"]);
    assert!(!o.status.success());
}

#[test]
fn compare_optimizers_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("curves.csv");
    let o = qbert(&["compare-optimizers", "--problem", "lsq", "--dim", "4", "--steps", "10", "--seeds", "2", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().next(), Some("seed,step,cadamw,radamw"));
    assert_eq!(csv.lines().count(), 1 + 2 * 10);
}

#[test]
fn simulate_circuit_defaults() {
    let o = qbert(&["simulate-circuit"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("n_qubits = 3") && text.contains("shots = 100000"), "{text}");
    let mse: f64 = text.lines().find(|l| l.starts_with("mse_sampled")).unwrap().split('=').nth(1).unwrap().trim().parse().unwrap();
    assert!(mse < 1e-8);
    assert_eq!(stdout(&qbert(&["simulate-circuit"])), text);
}
