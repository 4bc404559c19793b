/// Classification quality of predicted vs. true labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    /// Binary F1 of class 1 for two classes, macro-averaged F1 otherwise.
    pub f1: f64,
    /// Matthews correlation (multi-class generalization for k > 2).
    pub mcc: f64,
}

pub fn argmax(v: &[f64]) -> usize {
    v.iter().enumerate().fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best }).0
}

pub fn classification_metrics(pred: &[usize], truth: &[usize], n_classes: usize) -> Metrics {
    let n = pred.len();
    if n == 0 {
        return Metrics { accuracy: 0.0, f1: 0.0, mcc: 0.0 };
    }
    let k = n_classes.max(pred.iter().chain(truth).max().map_or(0, |m| m + 1));
    let mut conf = vec![vec![0f64; k]; k];
    for (&p, &t) in pred.iter().zip(truth) {
        conf[t][p] += 1.0;
    }
    let correct: f64 = (0..k).map(|i| conf[i][i]).sum();
    let f1_of = |c: usize| {
        let tp = conf[c][c];
        let fp: f64 = (0..k).map(|t| conf[t][c]).sum::<f64>() - tp;
        let fneg: f64 = conf[c].iter().sum::<f64>() - tp;
        if tp == 0.0 {
            0.0
        } else {
            2.0 * tp / (2.0 * tp + fp + fneg)
        }
    };
    let f1 = if k == 2 { f1_of(1) } else { (0..k).map(f1_of).sum::<f64>() / k as f64 };
    // Gorodkin's R_K, equal to the usual MCC for two classes
    let s = n as f64;
    let t_k: Vec<f64> = (0..k).map(|i| conf[i].iter().sum()).collect();
    let p_k: Vec<f64> = (0..k).map(|j| (0..k).map(|i| conf[i][j]).sum()).collect();
    let tp_dot: f64 = t_k.iter().zip(&p_k).map(|(a, b)| a * b).sum();
    let num = correct * s - tp_dot;
    let den = ((s * s - p_k.iter().map(|x| x * x).sum::<f64>()) * (s * s - t_k.iter().map(|x| x * x).sum::<f64>())).sqrt();
    let mcc = if den == 0.0 { 0.0 } else { num / den };
    Metrics {
        accuracy: correct / s,
        f1,
        mcc,
    }
}
