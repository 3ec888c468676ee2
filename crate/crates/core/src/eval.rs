//! STS-style evaluation: cosine scoring of sentence pairs against human
//! similarity judgements, with Pearson and Spearman correlation.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use ndarray::{Array1, ArrayView1};

use crate::embeddings::SentenceEmbedder;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::trainer::{refine_vector, TransitionMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct StsPair {
    pub sentence_a: String,
    pub sentence_b: String,
    pub gold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StsDataset {
    pub name: String,
    pub pairs: Vec<StsPair>,
    /// Lines whose gold score was blank.
    pub skipped: usize,
}

impl StsDataset {
    pub fn new(name: impl Into<String>, pairs: Vec<StsPair>) -> Self {
        StsDataset {
            name: name.into(),
            pairs,
            skipped: 0,
        }
    }

    /// Pairs plus skipped lines.
    pub fn size(&self) -> usize {
        self.pairs.len() + self.skipped
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_gold(field: &str, path: &Path, line: usize) -> Result<Option<f64>> {
    let field = field.trim();
    if field.is_empty() {
        return Ok(None);
    }
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(Error::parse(
            path,
            line,
            format!("unparseable score {field:?}"),
        )),
    }
}

fn sentences<'a>(
    fields: &mut impl Iterator<Item = &'a str>,
    path: &Path,
    line: usize,
) -> Result<(String, String)> {
    let a = fields.next().map(str::trim).unwrap_or_default();
    let b = fields.next().map(str::trim).unwrap_or_default();
    if a.is_empty() || b.is_empty() {
        return Err(Error::parse(path, line, "expected two non-empty sentences"));
    }
    Ok((a.to_owned(), b.to_owned()))
}

/// Loads either a combined `gold<TAB>sent_a<TAB>sent_b` file (no `gold_path`)
/// or a SemEval pair file `sent_a<TAB>sent_b[<TAB>...]` with a parallel file
/// of one gold score per line. Blank gold scores skip the pair.
pub fn load_sts_dataset(
    name: impl Into<String>,
    input_path: impl AsRef<Path>,
    gold_path: Option<&Path>,
) -> Result<StsDataset> {
    let input_path = input_path.as_ref();
    let input = read(input_path)?;
    let mut data = StsDataset::new(name, Vec::new());

    match gold_path {
        None => {
            for (i, line) in input.lines().enumerate() {
                let ln = i + 1;
                if line.trim().is_empty() {
                    continue;
                }
                let mut fields = line.split('\t');
                let gold = parse_gold(fields.next().unwrap_or_default(), input_path, ln)?;
                let (a, b) = sentences(&mut fields, input_path, ln)?;
                match gold {
                    Some(gold) => data.pairs.push(StsPair {
                        sentence_a: a,
                        sentence_b: b,
                        gold,
                    }),
                    None => data.skipped += 1,
                }
            }
        }
        Some(gold_path) => {
            let gold_text = read(gold_path)?;
            let strip = |t: &str| -> Vec<String> {
                let mut v: Vec<String> = t.lines().map(str::to_owned).collect();
                while v.last().is_some_and(|l| l.trim().is_empty()) {
                    v.pop();
                }
                v
            };
            let pair_lines = strip(&input);
            let gold_lines = strip(&gold_text);
            if pair_lines.len() != gold_lines.len() {
                return Err(Error::Data(format!(
                    "{} has {} lines but {} has {}",
                    input_path.display(),
                    pair_lines.len(),
                    gold_path.display(),
                    gold_lines.len()
                )));
            }
            for (i, (pair, gold)) in pair_lines.iter().zip(&gold_lines).enumerate() {
                let ln = i + 1;
                let Some(gold) = parse_gold(gold, gold_path, ln)? else {
                    data.skipped += 1;
                    continue;
                };
                let (a, b) = sentences(&mut pair.split('\t'), input_path, ln)?;
                data.pairs.push(StsPair {
                    sentence_a: a,
                    sentence_b: b,
                    gold,
                });
            }
        }
    }
    if data.pairs.is_empty() && data.skipped == 0 {
        return Err(Error::Empty(input_path.to_path_buf()));
    }
    Ok(data)
}

/// `<u, v> / (|u| |v|)`.
pub fn cosine<F: Scalar>(u: ArrayView1<'_, F>, v: ArrayView1<'_, F>) -> Result<F> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    let nu = u.dot(&u).sqrt();
    let nv = v.dot(&v).sqrt();
    if !(nu > F::zero()) {
        return Err(Error::DegenerateVector {
            side: "left",
            row: 0,
        });
    }
    if !(nv > F::zero()) {
        return Err(Error::DegenerateVector {
            side: "right",
            row: 0,
        });
    }
    Ok(u.dot(&v) / (nu * nv))
}

fn check_series<F>(x: &[F], y: &[F]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::TooFewValues {
            needed: 2,
            actual: x.len(),
        });
    }
    Ok(())
}

/// Sample Pearson correlation coefficient.
pub fn pearson<F: Scalar>(x: &[F], y: &[F]) -> Result<F> {
    check_series(x, y)?;
    let n = F::from_count(x.len());
    let mx = x.iter().copied().sum::<F>() / n;
    let my = y.iter().copied().sum::<F>() / n;
    let (mut sxy, mut sxx, mut syy) = (F::zero(), F::zero(), F::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy = sxy + da * db;
        sxx = sxx + da * da;
        syy = syy + db * db;
    }
    if sxx == F::zero() || syy == F::zero() {
        return Err(Error::ConstantSeries);
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks<F: Scalar>(x: &[F]) -> Vec<F> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut ranks = vec![F::zero(); x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end
        let rank = F::from_count(start + end + 1) / F::lit(2.0);
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Pearson correlation of average ranks.
pub fn spearman<F: Scalar>(x: &[F], y: &[F]) -> Result<F> {
    check_series(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub dataset: String,
    pub n_scored: usize,
    pub n_skipped: usize,
    pub pearson_r: f64,
    pub spearman_rho: f64,
    /// `(predicted, gold)` for every scored pair.
    pub scores: Vec<(f64, f64)>,
}

fn sentence_vector<F, E>(
    embedder: &E,
    w: Option<&TransitionMatrix<F>>,
    sentence: &str,
) -> Result<Array1<F>>
where
    F: Scalar,
    E: SentenceEmbedder<F> + ?Sized,
{
    let v = embedder.embed(sentence)?.values;
    match w {
        Some(w) => refine_vector(w, v.view()),
        None => Ok(v),
    }
}

/// Scores every pair by cosine of (optionally refined) sentence vectors.
/// Pairs with an unembeddable or zero-vector side are skipped and counted.
pub fn evaluate<F, E>(
    embedder: &E,
    w: Option<&TransitionMatrix<F>>,
    dataset: &StsDataset,
) -> Result<EvalReport>
where
    F: Scalar,
    E: SentenceEmbedder<F> + ?Sized,
{
    if let Some(w) = w {
        if w.dim() != embedder.dim() {
            return Err(Error::DimensionMismatch {
                expected: embedder.dim(),
                actual: w.dim(),
            });
        }
    }
    let mut predicted = Vec::with_capacity(dataset.pairs.len());
    let mut gold = Vec::with_capacity(dataset.pairs.len());
    let mut skipped = dataset.skipped;
    for pair in &dataset.pairs {
        let score = sentence_vector(embedder, w, &pair.sentence_a).and_then(|a| {
            let b = sentence_vector(embedder, w, &pair.sentence_b)?;
            cosine(a.view(), b.view())
        });
        match score {
            Ok(s) => {
                predicted.push(s);
                gold.push(F::lit(pair.gold));
            }
            Err(Error::AllTokensUnknown { .. } | Error::DegenerateVector { .. }) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if predicted.len() < 2 {
        return Err(Error::TooFewValues {
            needed: 2,
            actual: predicted.len(),
        });
    }
    let pearson_r = pearson(&predicted, &gold)?.to_f64_lossy();
    let spearman_rho = spearman(&predicted, &gold)?.to_f64_lossy();
    Ok(EvalReport {
        dataset: dataset.name.clone(),
        n_scored: predicted.len(),
        n_skipped: skipped,
        pearson_r,
        spearman_rho,
        scores: predicted
            .iter()
            .zip(&gold)
            .map(|(p, g)| (p.to_f64_lossy(), g.to_f64_lossy()))
            .collect(),
    })
}

/// Writes `dataset n skipped pearson spearman` rows with a header.
pub fn write_reports_tsv<W: Write>(reports: &[EvalReport], mut out: W) -> io::Result<()> {
    writeln!(out, "dataset\tn\tskipped\tpearson\tspearman")?;
    for r in reports {
        writeln!(
            out,
            "{}\t{}\t{}\t{:.6}\t{:.6}",
            r.dataset, r.n_scored, r.n_skipped, r.pearson_r, r.spearman_rho
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub baseline: EvalReport,
    pub refined: EvalReport,
}

impl ComparisonRow {
    pub fn dataset(&self) -> &str {
        &self.baseline.dataset
    }

    pub fn pearson_delta(&self) -> f64 {
        self.refined.pearson_r - self.baseline.pearson_r
    }

    pub fn spearman_delta(&self) -> f64 {
        self.refined.spearman_rho - self.baseline.spearman_rho
    }
}

/// Aggregate over datasets sharing a `group/` name prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSummary {
    pub group: String,
    pub members: usize,
    /// Unweighted mean of member correlations: `(baseline, refined)`.
    pub mean_pearson: (f64, f64),
    pub mean_spearman: (f64, f64),
    /// Correlations over all member pairs pooled together.
    pub pooled_pearson: (f64, f64),
    pub pooled_spearman: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub groups: Vec<GroupSummary>,
}

/// Baseline (average only) versus refined correlations for every dataset.
pub fn compare<F, E>(
    embedder: &E,
    w: &TransitionMatrix<F>,
    datasets: &[StsDataset],
) -> Result<Comparison>
where
    F: Scalar,
    E: SentenceEmbedder<F> + ?Sized,
{
    if datasets.is_empty() {
        return Err(Error::Config("no evaluation datasets given".into()));
    }
    let rows = datasets
        .iter()
        .map(|d| {
            Ok(ComparisonRow {
                baseline: evaluate(embedder, None, d)?,
                refined: evaluate(embedder, Some(w), d)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let groups = summarize_groups(&rows)?;
    Ok(Comparison { rows, groups })
}

fn group_of(name: &str) -> Option<&str> {
    name.split_once('/').map(|(g, _)| g)
}

fn pooled(reports: &[&EvalReport]) -> Result<(f64, f64)> {
    let (p, g): (Vec<f64>, Vec<f64>) = reports
        .iter()
        .flat_map(|r| r.scores.iter().copied())
        .unzip();
    Ok((pearson(&p, &g)?, spearman(&p, &g)?))
}

fn summarize_groups(rows: &[ComparisonRow]) -> Result<Vec<GroupSummary>> {
    let mut names: Vec<&str> = rows.iter().filter_map(|r| group_of(r.dataset())).collect();
    names.dedup();
    let mut seen = std::collections::HashSet::new();
    names.retain(|n| seen.insert(*n));
    names
        .into_iter()
        .map(|group| {
            let members: Vec<&ComparisonRow> = rows
                .iter()
                .filter(|r| group_of(r.dataset()) == Some(group))
                .collect();
            let k = members.len() as f64;
            let mean =
                |f: &dyn Fn(&ComparisonRow) -> f64| members.iter().map(|r| f(r)).sum::<f64>() / k;
            let base: Vec<&EvalReport> = members.iter().map(|r| &r.baseline).collect();
            let refined: Vec<&EvalReport> = members.iter().map(|r| &r.refined).collect();
            let (bp, bs) = pooled(&base)?;
            let (rp, rs) = pooled(&refined)?;
            Ok(GroupSummary {
                group: group.to_owned(),
                members: members.len(),
                mean_pearson: (
                    mean(&|r| r.baseline.pearson_r),
                    mean(&|r| r.refined.pearson_r),
                ),
                mean_spearman: (
                    mean(&|r| r.baseline.spearman_rho),
                    mean(&|r| r.refined.spearman_rho),
                ),
                pooled_pearson: (bp, rp),
                pooled_spearman: (bs, rs),
            })
        })
        .collect()
}

impl Comparison {
    /// One row per dataset and per group aggregate.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(
            out,
            "dataset\tn\tskipped\tpearson_avg\tpearson_tm\tpearson_delta\tspearman_avg\tspearman_tm\tspearman_delta"
        )?;
        for r in &self.rows {
            writeln!(
                out,
                "{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
                r.dataset(),
                r.refined.n_scored,
                r.refined.n_skipped,
                r.baseline.pearson_r,
                r.refined.pearson_r,
                r.pearson_delta(),
                r.baseline.spearman_rho,
                r.refined.spearman_rho,
                r.spearman_delta()
            )?;
        }
        for g in &self.groups {
            for (label, p, s) in [
                ("mean", g.mean_pearson, g.mean_spearman),
                ("pooled", g.pooled_pearson, g.pooled_spearman),
            ] {
                writeln!(
                    out,
                    "{}[{label}]\t{}\t-\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
                    g.group,
                    g.members,
                    p.0,
                    p.1,
                    p.1 - p.0,
                    s.0,
                    s.1,
                    s.1 - s.0
                )?;
            }
        }
        Ok(())
    }

    /// Pearson table in a fixed-width layout: one column per dataset, rows
    /// `Avg`, `Avg+TM` and the difference.
    pub fn render_table(&self) -> String {
        let mut cols: Vec<(String, f64, f64)> = self
            .rows
            .iter()
            .map(|r| {
                (
                    r.dataset().to_owned(),
                    r.baseline.pearson_r,
                    r.refined.pearson_r,
                )
            })
            .collect();
        cols.extend(self.groups.iter().map(|g| {
            (
                format!("{} (mean)", g.group),
                g.mean_pearson.0,
                g.mean_pearson.1,
            )
        }));
        let width = cols.iter().map(|c| c.0.len()).max().unwrap_or(0).max(7);
        let mut out = format!("{:<8}", "Model");
        for c in &cols {
            out.push_str(&format!(" {:>width$}", c.0));
        }
        out.push('\n');
        for (label, pick) in [("Avg", 0), ("Avg+TM", 1), ("Delta", 2)] {
            out.push_str(&format!("{label:<8}"));
            for c in &cols {
                let v = match pick {
                    0 => c.1,
                    1 => c.2,
                    _ => c.2 - c.1,
                };
                out.push_str(&format!(" {v:>width$.3}"));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::WordVectorTable;
    use ndarray::array;

    #[test]
    fn cosine_examples() {
        let u = array![1.0, 2.0, 3.0];
        assert!((cosine(u.view(), u.view()).unwrap() - 1.0f64).abs() < 1e-15);
        assert_eq!(
            cosine(array![1.0, 0.0].view(), array![0.0, 1.0].view()).unwrap(),
            0.0
        );
        let c = cosine(array![1.0, 1.0].view(), array![1.0, 0.0].view()).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(matches!(
            cosine(array![0.0, 0.0].view(), u.slice(ndarray::s![..2])),
            Err(Error::DegenerateVector { .. })
        ));
        assert!(cosine(array![1.0].view(), u.view()).is_err());
    }

    #[test]
    fn pearson_examples() {
        assert!((pearson(&[1.0f64, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0f64, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        assert!(
            (pearson(&[1.0f64, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-15
        );
        assert!(matches!(
            pearson(&[1.0, 1.0], &[1.0, 2.0]),
            Err(Error::ConstantSeries)
        ));
        assert!(matches!(
            pearson(&[1.0], &[1.0]),
            Err(Error::TooFewValues { .. })
        ));
        assert!(pearson(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn spearman_examples() {
        let x = [0.3, -1.0, 2.5, 7.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| v.exp()).collect();
        assert!((spearman(&x, &y).unwrap() - 1.0).abs() < 1e-15);
        assert!(
            (spearman(&[1.0f64, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs()
                < 1e-15
        );
        // ranks (1, 2.5, 2.5, 4) vs (1, 2, 3, 4): cov 4.5 / sqrt(4.5 * 5)
        let tied = spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((tied - 4.5 / (4.5f64 * 5.0).sqrt()).abs() < 1e-15);
        assert!(matches!(
            spearman(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(Error::ConstantSeries)
        ));
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(
            average_ranks(&[10.0, 20.0, 20.0, 5.0]),
            vec![2.0, 3.5, 3.5, 1.0]
        );
        assert_eq!(average_ranks(&[1.0f64; 3]), vec![2.0; 3]);
    }

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::File::create(&p)
            .unwrap()
            .write_all(body.as_bytes())
            .unwrap();
        p
    }

    #[test]
    fn loads_combined_tsv() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "d.tsv",
            "4.0\ta cat\ta dog\n1.5\tx\ty\n0\tp\tq\n",
        );
        let d = load_sts_dataset("d", &p, None).unwrap();
        assert_eq!(d.pairs.len(), 3);
        assert_eq!(d.pairs[1].gold, 1.5);
        let bad = write(dir.path(), "bad.tsv", "4.0\ta\tb\nfour\tc\td\n");
        assert!(matches!(
            load_sts_dataset("d", &bad, None),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn loads_pair_and_gold_files() {
        let dir = tempfile::tempdir().unwrap();
        let pairs: String = (0..10).map(|i| format!("s{i} a\ts{i} b\tsrc\n")).collect();
        let p = write(dir.path(), "input.txt", &pairs);
        let gold: String = (0..10)
            .map(|i| {
                if i == 3 {
                    "\n".into()
                } else {
                    format!("{}.0\n", i % 5)
                }
            })
            .collect();
        let g = write(dir.path(), "gs.txt", &gold);
        let d = load_sts_dataset("x", &p, Some(&g)).unwrap();
        assert_eq!((d.pairs.len(), d.skipped, d.size()), (9, 1, 10));
        assert_eq!(d.pairs[3].sentence_a, "s4 a");

        let short: String = gold.lines().take(9).map(|l| format!("{l}\n")).collect();
        let g9 = write(dir.path(), "gs9.txt", &short.replace("\n\n", "\n0\n"));
        assert!(matches!(
            load_sts_dataset("x", &p, Some(&g9)),
            Err(Error::Data(_))
        ));
        assert!(load_sts_dataset("x", dir.path().join("missing"), None).is_err());
    }

    fn table() -> WordVectorTable<f64> {
        WordVectorTable::from_entries(
            3,
            [
                ("a", vec![1.0, 0.0, 0.2]),
                ("b", vec![0.3, 1.0, 0.0]),
                ("c", vec![0.0, 0.4, 1.0]),
                ("d", vec![0.5, 0.5, -0.5]),
            ],
        )
        .unwrap()
    }

    fn self_consistent(table: &WordVectorTable<f64>) -> StsDataset {
        let sents = ["a", "a b", "b c", "c", "d a", "d c b", "a c"];
        let mut pairs = Vec::new();
        for (i, s) in sents.iter().enumerate() {
            let t = sents[(i * 3 + 1) % sents.len()];
            let va = table.embed(s).unwrap().values;
            let vb = table.embed(t).unwrap().values;
            pairs.push(StsPair {
                sentence_a: s.to_string(),
                sentence_b: t.to_string(),
                gold: cosine(va.view(), vb.view()).unwrap(),
            });
        }
        StsDataset::new("self", pairs)
    }

    #[test]
    fn gold_equal_to_prediction_gives_unit_correlation() {
        let t = table();
        let r = evaluate(&t, None, &self_consistent(&t)).unwrap();
        assert!((r.pearson_r - 1.0).abs() < 1e-12);
        assert!((r.spearman_rho - 1.0).abs() < 1e-12);
        assert_eq!(r.n_skipped, 0);
    }

    #[test]
    fn oov_pairs_are_skipped() {
        let t = table();
        let mut d = self_consistent(&t);
        d.pairs.push(StsPair {
            sentence_a: "zzz".into(),
            sentence_b: "a".into(),
            gold: 3.0,
        });
        d.skipped = 2;
        let r = evaluate(&t, None, &d).unwrap();
        assert_eq!(r.n_skipped, 3);
        assert_eq!(r.n_scored + r.n_skipped, d.size());

        let tiny = StsDataset::new("t", d.pairs[..1].to_vec());
        assert!(evaluate(&t, None, &tiny).is_err());
    }

    #[test]
    fn identity_matrix_matches_baseline() {
        let t = table();
        let d = self_consistent(&t);
        let base = evaluate(&t, None, &d).unwrap();
        let id = TransitionMatrix::identity(3);
        assert_eq!(evaluate(&t, Some(&id), &d).unwrap(), base);
        let scaled = evaluate(&t, Some(&id.scaled(4.0)), &d).unwrap();
        assert_eq!(scaled, base);
        assert!(evaluate(&t, Some(&TransitionMatrix::identity(2)), &d).is_err());
    }

    #[test]
    fn comparison_deltas_and_groups() {
        let t = table();
        let mut d1 = self_consistent(&t);
        d1.name = "sts14/a".into();
        let mut d2 = self_consistent(&t);
        d2.name = "sts14/b".into();
        d2.pairs
            .iter_mut()
            .enumerate()
            .for_each(|(i, p)| p.gold += (i % 2) as f64 * 0.1);
        let w = TransitionMatrix::from_weights(
            array![[1.0, 0.2, 0.0], [0.0, 0.5, 0.1], [0.3, 0.0, 2.0]],
            Default::default(),
        )
        .unwrap();
        let cmp = compare(&t, &w, &[d1, d2]).unwrap();
        for r in &cmp.rows {
            assert_eq!(
                r.pearson_delta(),
                r.refined.pearson_r - r.baseline.pearson_r
            );
        }
        assert_eq!(cmp.groups.len(), 1);
        let g = &cmp.groups[0];
        assert_eq!(g.members, 2);
        let want = (cmp.rows[0].refined.pearson_r + cmp.rows[1].refined.pearson_r) / 2.0;
        assert!((g.mean_pearson.1 - want).abs() < 1e-15);

        let mut tsv = Vec::new();
        cmp.write_tsv(&mut tsv).unwrap();
        let tsv = String::from_utf8(tsv).unwrap();
        assert_eq!(tsv.lines().count(), 1 + 2 + 2);
        assert!(cmp.render_table().contains("Avg+TM"));
        assert!(compare(&t, &w, &[]).is_err());
    }

    #[test]
    fn report_tsv() {
        let r = EvalReport {
            dataset: "sick".into(),
            n_scored: 3,
            n_skipped: 1,
            pearson_r: 0.5,
            spearman_rho: -0.25,
            scores: vec![],
        };
        let mut buf = Vec::new();
        write_reports_tsv(&[r], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "dataset\tn\tskipped\tpearson\tspearman\nsick\t3\t1\t0.500000\t-0.250000\n"
        );
    }
}
