//! Confusion matrices and classification reports.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::model::{Classifier, Example, InputKind};

const K: usize = Label::COUNT;

/// Rows are true labels, columns predicted labels, both in label order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; K]; K],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..K).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        self.counts.iter().map(|r| r[c]).sum()
    }

    pub fn transpose(&self) -> Self {
        let mut counts = [[0; K]; K];
        for (i, row) in self.counts.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                counts[j][i] = *v;
            }
        }
        Self { counts }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("true\\pred");
        for l in Label::ALL {
            write!(out, ",{l}").unwrap();
        }
        out.push('\n');
        for (l, row) in Label::ALL.iter().zip(&self.counts) {
            out.push_str(l.as_str());
            for v in row {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Counts `(truth, prediction)` pairs given as label codes.
pub fn confusion_matrix(predictions: &[usize], truths: &[usize]) -> Result<ConfusionMatrix> {
    if predictions.len() != truths.len() {
        return Err(Error::shape(format!(
            "{} predictions vs {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    let mut m = ConfusionMatrix::default();
    for (&p, &t) in predictions.iter().zip(truths) {
        if p >= K || t >= K {
            return Err(Error::shape(format!("label code out of range: pred {p}, truth {t}")));
        }
        m.counts[t][p] += 1;
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: Label,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub classes: Vec<ClassMetrics>,
    /// Support-weighted averages; the headline numbers.
    pub weighted: Averages,
    pub macro_avg: Averages,
    pub accuracy: f64,
    pub total: u64,
    /// Zero denominators that were reported as 0.
    pub warnings: Vec<String>,
    pub confusion: ConfusionMatrix,
}

fn ratio(num: u64, den: u64, what: &str, label: Label, warnings: &mut Vec<String>) -> f64 {
    if den == 0 {
        warnings.push(format!("{what} undefined for `{label}` (zero denominator), reported as 0"));
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn class_report(matrix: &ConfusionMatrix) -> Result<ClassReport> {
    let total = matrix.total();
    if total == 0 {
        return Err(Error::Empty);
    }
    let mut warnings = Vec::new();
    let classes: Vec<ClassMetrics> = Label::ALL
        .iter()
        .enumerate()
        .map(|(c, &label)| {
            let tp = matrix.counts[c][c];
            let precision = ratio(tp, matrix.col_sum(c), "precision", label, &mut warnings);
            let recall = ratio(tp, matrix.row_sum(c), "recall", label, &mut warnings);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                label,
                precision,
                recall,
                f1,
                support: matrix.row_sum(c),
            }
        })
        .collect();
    let mut weighted = Averages::default();
    let mut macro_avg = Averages::default();
    for m in &classes {
        let w = m.support as f64 / total as f64;
        weighted.precision += w * m.precision;
        weighted.recall += w * m.recall;
        weighted.f1 += w * m.f1;
        macro_avg.precision += m.precision / K as f64;
        macro_avg.recall += m.recall / K as f64;
        macro_avg.f1 += m.f1 / K as f64;
    }
    Ok(ClassReport {
        classes,
        weighted,
        macro_avg,
        accuracy: matrix.trace() as f64 / total as f64,
        total,
        warnings,
        confusion: *matrix,
    })
}

impl ClassReport {
    pub fn class(&self, label: Label) -> &ClassMetrics {
        &self.classes[label.code()]
    }

    /// Per-class table at two decimals.
    pub fn summary(&self) -> String {
        let mut out = String::from("class        P     R     F1    support\n");
        for m in &self.classes {
            writeln!(
                out,
                "{:<12} {:.2}  {:.2}  {:.2}  {}",
                m.label.as_str(),
                m.precision,
                m.recall,
                m.f1,
                m.support
            )
            .unwrap();
        }
        writeln!(
            out,
            "{:<12} {:.2}  {:.2}  {:.2}  {}",
            "weighted", self.weighted.precision, self.weighted.recall, self.weighted.f1, self.total
        )
        .unwrap();
        writeln!(
            out,
            "{:<12} {:.2}  {:.2}  {:.2}  {}",
            "macro", self.macro_avg.precision, self.macro_avg.recall, self.macro_avg.f1, self.total
        )
        .unwrap();
        writeln!(out, "accuracy     {:.2}", self.accuracy).unwrap();
        out
    }
}

pub fn predict_all(model: &Classifier, examples: &[Example]) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut preds = Vec::with_capacity(examples.len());
    for ex in examples {
        preds.push(model.predict(&ex.input)?);
    }
    Ok((preds, examples.iter().map(|e| e.label).collect()))
}

pub fn evaluate(model: &Classifier, examples: &[Example]) -> Result<ClassReport> {
    let (p, t) = predict_all(model, examples)?;
    class_report(&confusion_matrix(&p, &t)?)
}

/// One cell of the model × input-kind comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

impl From<&ClassReport> for GridCell {
    fn from(r: &ClassReport) -> Self {
        Self {
            precision: r.weighted.precision,
            recall: r.weighted.recall,
            f1: r.weighted.f1,
            accuracy: r.accuracy,
        }
    }
}

/// Models as rows (first-seen order), input kinds as columns in the fixed
/// order posts, titles, posts+titles; only kinds that occur get a column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonGrid {
    pub models: Vec<String>,
    pub kinds: Vec<InputKind>,
    pub cells: Vec<Vec<Option<GridCell>>>,
}

pub fn aggregate_report(reports: &[(String, InputKind, ClassReport)]) -> ComparisonGrid {
    let mut models: Vec<String> = Vec::new();
    for (m, _, _) in reports {
        if !models.contains(m) {
            models.push(m.clone());
        }
    }
    let kinds: Vec<InputKind> = InputKind::ALL
        .into_iter()
        .filter(|k| reports.iter().any(|(_, rk, _)| rk == k))
        .collect();
    let mut cells = vec![vec![None; kinds.len()]; models.len()];
    for (m, k, r) in reports {
        let row = models.iter().position(|x| x == m).unwrap();
        let col = kinds.iter().position(|x| x == k).unwrap();
        cells[row][col] = Some(GridCell::from(r));
    }
    ComparisonGrid { models, kinds, cells }
}

impl ComparisonGrid {
    pub fn rows(&self) -> usize {
        self.models.len()
    }

    pub fn cols(&self) -> usize {
        self.kinds.len()
    }

    pub fn render(&self) -> String {
        let mut out = format!("{:<12}", "model");
        for k in &self.kinds {
            write!(out, "| {:<23}", k.as_str()).unwrap();
        }
        out.push('\n');
        write!(out, "{:<12}", "").unwrap();
        for _ in &self.kinds {
            out.push_str("| P    R    F1   Acc    ");
        }
        out.push('\n');
        for (m, row) in self.models.iter().zip(&self.cells) {
            write!(out, "{m:<12}").unwrap();
            for c in row {
                match c {
                    Some(c) => write!(out, "| {:.2} {:.2} {:.2} {:.2}   ", c.precision, c.recall, c.f1, c.accuracy).unwrap(),
                    None => out.push_str("| -    -    -    -      "),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,input_kind,precision,recall,f1,accuracy\n");
        for (m, row) in self.models.iter().zip(&self.cells) {
            for (k, c) in self.kinds.iter().zip(row) {
                if let Some(c) = c {
                    writeln!(out, "{m},{k},{:.4},{:.4},{:.4},{:.4}", c.precision, c.recall, c.f1, c.accuracy).unwrap();
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use proptest::prelude::*;
    use rand::Rng;

    fn r2(x: f64) -> f64 {
        (x * 100.0).round() / 100.0
    }

    #[test]
    fn perfect_predictions_are_diagonal() {
        let labels: Vec<usize> = (0..60).map(|i| i % 6).collect();
        let m = confusion_matrix(&labels, &labels).unwrap();
        assert_eq!(m.trace(), 60);
        let r = class_report(&m).unwrap();
        assert!(r.classes.iter().all(|c| c.precision == 1.0 && c.recall == 1.0 && c.f1 == 1.0));
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn small_hand_counted_case() {
        // a = adhd (0), b = anxiety (1)
        let truths = [0, 0, 1, 1, 1];
        let preds = [0, 1, 1, 1, 1];
        let m = confusion_matrix(&preds, &truths).unwrap();
        assert_eq!((m.counts[0][0], m.counts[0][1], m.counts[1][1]), (1, 1, 3));
        let r = class_report(&m).unwrap();
        let a = r.class(Label::Adhd);
        let b = r.class(Label::Anxiety);
        assert_eq!((r2(a.precision), r2(a.recall), r2(a.f1)), (1.00, 0.50, 0.67));
        assert_eq!((r2(b.precision), r2(b.recall), r2(b.f1)), (0.75, 1.00, 0.86));
        // four absent classes: precision and recall both undefined
        assert_eq!(r.warnings.len(), 8);
        assert_eq!(r.class(Label::Ptsd).f1, 0.0);
    }

    #[test]
    fn three_pair_case() {
        let m = confusion_matrix(&[0, 1, 1], &[0, 0, 1]).unwrap();
        assert_eq!((m.counts[0][0], m.counts[0][1], m.counts[1][1]), (1, 1, 1));
    }

    #[test]
    fn errors() {
        assert!(matches!(confusion_matrix(&[0], &[0, 1]), Err(Error::Shape(_))));
        assert!(matches!(confusion_matrix(&[6], &[0]), Err(Error::Shape(_))));
        assert!(matches!(class_report(&ConfusionMatrix::default()), Err(Error::Empty)));
    }

    #[test]
    fn grid_layout() {
        let m = confusion_matrix(&[0, 1], &[0, 1]).unwrap();
        let r = class_report(&m).unwrap();
        let one = aggregate_report(&[("lstm".into(), InputKind::Posts, r.clone())]);
        assert_eq!((one.rows(), one.cols()), (1, 1));
        let mut all = Vec::new();
        for model in ["lstm", "bert", "roberta"] {
            for kind in [InputKind::PostsTitles, InputKind::Titles, InputKind::Posts] {
                all.push((model.to_string(), kind, r.clone()));
            }
        }
        let g = aggregate_report(&all);
        assert_eq!((g.rows(), g.cols()), (3, 3));
        assert_eq!(g.kinds, InputKind::ALL.to_vec());
        assert_eq!(g.models, vec!["lstm", "bert", "roberta"]);
        assert!(g.render().lines().next().unwrap().contains("posts"));
    }

    fn random_pairs(n: usize, s: u64) -> (Vec<usize>, Vec<usize>) {
        let mut rng = seed::rng(s);
        (0..n).map(|_| (rng.gen_range(0..6), rng.gen_range(0..6))).unzip()
    }

    proptest! {
        #[test]
        fn weighted_recall_is_accuracy(s in any::<u64>(), n in 1usize..300) {
            let (p, t) = random_pairs(n, s);
            let r = class_report(&confusion_matrix(&p, &t).unwrap()).unwrap();
            prop_assert!((r.weighted.recall - r.accuracy).abs() < 1e-12);
            for c in &r.classes {
                for v in [c.precision, c.recall, c.f1] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }

        #[test]
        fn pair_order_does_not_matter(s in any::<u64>(), n in 1usize..200, rot in 0usize..200) {
            let (p, t) = random_pairs(n, s);
            let mut pairs: Vec<(usize, usize)> = p.into_iter().zip(t).collect();
            let a = class_report(&confusion_matrix(
                &pairs.iter().map(|x| x.0).collect::<Vec<_>>(),
                &pairs.iter().map(|x| x.1).collect::<Vec<_>>()).unwrap()).unwrap();
            pairs.rotate_left(rot % n);
            pairs.reverse();
            let b = class_report(&confusion_matrix(
                &pairs.iter().map(|x| x.0).collect::<Vec<_>>(),
                &pairs.iter().map(|x| x.1).collect::<Vec<_>>()).unwrap()).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn transpose_swaps_precision_and_recall(s in any::<u64>(), n in 1usize..200) {
            let (p, t) = random_pairs(n, s);
            let m = confusion_matrix(&p, &t).unwrap();
            let a = class_report(&m).unwrap();
            let b = class_report(&m.transpose()).unwrap();
            for (x, y) in a.classes.iter().zip(&b.classes) {
                prop_assert_eq!(x.precision, y.recall);
                prop_assert_eq!(x.recall, y.precision);
            }
        }
    }
}
