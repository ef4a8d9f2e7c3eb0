use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{
    anova_f, correlation, descriptive_stats, f1_score, knn_fit, pca_2d, Classifier, ColumnStats,
    CorrelationKind, CurvePoint, FeatureImportance, ValidationError, DEFAULT_HISTOGRAM_BINS,
    DEFAULT_NEIGHBORS,
};
use crate::annotate::{Dataset, SplitTag};
use crate::design_space::FeatureKind;
use crate::metrics::{
    dpp_log_det, hull_and_box, kl_divergence_hist, nn_distance_stats, set_distance,
    shannon_entropy, Binning, NnStats, SetDistanceKind, SimilarityKernel,
};

/// Square matrix with row and column names. Undefined entries are NaN
/// (`null` in JSON).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl NamedMatrix {
    pub fn new(names: &[String], values: Vec<Vec<f64>>) -> Self {
        NamedMatrix {
            names: names.to_vec(),
            values,
        }
    }
}

/// Knobs of [`evaluate_dataset`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportOptions {
    pub histogram_bins: usize,
    /// Bins per axis for entropy and KL on the 2-D embedding.
    pub embedding_bins: usize,
    /// Rows in the random subset scored by the DPP log-determinant.
    pub dpp_subset: usize,
    /// Bins per axis of the working-share table.
    pub share_bins: usize,
    pub share_axes: (String, String),
    pub k_neighbors: usize,
    pub seed: u64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            histogram_bins: DEFAULT_HISTOGRAM_BINS,
            embedding_bins: 10,
            dpp_subset: 100,
            share_bins: 10,
            share_axes: ("Ma21".into(), "Ma41".into()),
            k_neighbors: DEFAULT_NEIGHBORS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PcaSummary {
    pub columns: Vec<String>,
    pub dropped: Vec<String>,
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiversityBlock {
    /// Areas on the 2-D principal-component embedding.
    pub hull_area: f64,
    pub box_area: f64,
    pub circle_area: f64,
    pub hull_degenerate: bool,
    /// Nearest-neighbor distances in the normalized design space.
    pub nn: NnStats,
    /// Shannon entropy (nats) of the 2-D embedding histogram.
    pub entropy: f64,
    pub dpp_log_det: f64,
    pub dpp_subset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealismBlock {
    pub reference: String,
    pub reference_rows: usize,
    /// KL(dataset || reference) on the shared 2-D embedding histogram.
    pub kl: f64,
    /// Set distances in the normalized design space.
    pub hausdorff: f64,
    pub chamfer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassBalance {
    pub working: usize,
    pub non_working: usize,
    pub working_fraction: f64,
    pub errors: BTreeMap<String, usize>,
}

/// Share of working rows per cell of an equal-width grid over two
/// features' bounds. The last bin of each axis includes its upper edge.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkingShare {
    pub x_feature: String,
    pub y_feature: String,
    pub x_edges: Vec<f64>,
    pub y_edges: Vec<f64>,
    /// `[x bin][y bin]`.
    pub total: Vec<Vec<usize>>,
    pub working: Vec<Vec<usize>>,
    /// `None` for empty cells.
    pub share: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestScore {
    pub test_set: String,
    pub rows: usize,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub dataset: String,
    pub rows: usize,
    pub features: Vec<ColumnStats>,
    pub pearson: NamedMatrix,
    pub spearman: NamedMatrix,
    pub pca: PcaSummary,
    pub diversity: DiversityBlock,
    pub realism: Option<RealismBlock>,
    pub class_balance: Option<ClassBalance>,
    pub working_share: Option<WorkingShare>,
    /// One-way F statistic of each feature against the working flag.
    pub anova_f: Option<Vec<(String, f64)>>,
    pub classifier: Vec<TestScore>,
    pub notices: Vec<String>,
}

/// Characterize `dataset`; with `reference`, also compare against it.
pub fn evaluate_dataset(
    dataset: &Dataset,
    reference: Option<&Dataset>,
    options: &ReportOptions,
) -> Result<EvalReport, ValidationError> {
    if dataset.is_empty() {
        return Err(ValidationError::Empty);
    }
    let names = dataset.space.names();
    let raw: Vec<Vec<f64>> = dataset.rows.iter().map(|r| r.0.clone()).collect();
    let normalized = dataset
        .normalized()
        .map_err(|_| ValidationError::LengthMismatch(names.len(), raw[0].len()))?;
    let mut notices = Vec::new();

    let mut features = descriptive_stats(&names, &raw)?;
    if options.histogram_bins != DEFAULT_HISTOGRAM_BINS {
        for (f, stats) in features.iter_mut().enumerate() {
            let column: Vec<f64> = raw.iter().map(|r| r[f]).collect();
            *stats = super::describe_column(&stats.name, &column, options.histogram_bins)?;
        }
    }
    let (pearson, spearman) = if raw.len() >= 2 {
        (
            NamedMatrix::new(&names, correlation(&raw, CorrelationKind::Pearson)?),
            NamedMatrix::new(&names, correlation(&raw, CorrelationKind::Spearman)?),
        )
    } else {
        notices.push("correlations need at least 2 rows".into());
        (NamedMatrix::new(&[], vec![]), NamedMatrix::new(&[], vec![]))
    };

    let (model, embedded) = pca_2d(&normalized)?;
    let pick = |cols: &[usize]| cols.iter().map(|&c| names[c].clone()).collect::<Vec<_>>();
    if !model.dropped.is_empty() {
        notices.push(format!(
            "PCA dropped constant columns: {}",
            pick(&model.dropped).join(", ")
        ));
    }
    let pca = PcaSummary {
        columns: pick(&model.columns),
        dropped: pick(&model.dropped),
        components: model.components.clone(),
        explained_variance: model.explained_variance.clone(),
        explained_variance_ratio: model.explained_variance_ratio.clone(),
    };

    let hull = hull_and_box(&embedded)?;
    let embedded_rows: Vec<Vec<f64>> = embedded.iter().map(|p| p.to_vec()).collect();
    let nn = if normalized.len() >= 2 {
        nn_distance_stats(&normalized)?
    } else {
        notices.push("nearest-neighbor statistics need at least 2 rows".into());
        NnStats {
            mean: 0.0,
            std: 0.0,
            min: 0.0,
            max: 0.0,
        }
    };
    let own_binning = Binning::spanning(options.embedding_bins, &[&embedded_rows]);
    let entropy = shannon_entropy(&embedded_rows, &own_binning)?;
    let subset_size = options.dpp_subset.min(normalized.len());
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut subset = sample(&mut rng, normalized.len(), subset_size).into_vec();
    subset.sort_unstable();
    let subset_rows: Vec<Vec<f64>> = subset.iter().map(|&i| normalized[i].clone()).collect();
    let kernel = SimilarityKernel::Rbf.matrix(&subset_rows);
    let all: Vec<usize> = (0..subset_size).collect();
    let diversity = DiversityBlock {
        hull_area: hull.hull_area,
        box_area: hull.box_area,
        circle_area: hull.circle_area,
        hull_degenerate: hull.degenerate,
        nn,
        entropy,
        dpp_log_det: dpp_log_det(&all, &kernel)?,
        dpp_subset: subset_size,
    };

    let realism = match reference {
        Some(reference) if reference.is_empty() => {
            notices.push("reference set is empty; realism block skipped".into());
            None
        }
        Some(reference) => {
            if reference.space.names() != names {
                return Err(ValidationError::LengthMismatch(
                    names.len(),
                    reference.space.dim(),
                ));
            }
            let ref_norm = reference
                .normalized()
                .map_err(|_| ValidationError::LengthMismatch(names.len(), reference.space.dim()))?;
            let ref_embedded: Vec<Vec<f64>> = model.transform(&ref_norm);
            let binning =
                Binning::spanning(options.embedding_bins, &[&embedded_rows, &ref_embedded]);
            Some(RealismBlock {
                reference: reference.name.clone(),
                reference_rows: reference.len(),
                kl: kl_divergence_hist(&embedded_rows, &ref_embedded, &binning)?,
                hausdorff: set_distance(&normalized, &ref_norm, SetDistanceKind::Hausdorff)?,
                chamfer: set_distance(&normalized, &ref_norm, SetDistanceKind::Chamfer)?,
            })
        }
        None => None,
    };

    let mut class_balance = None;
    let mut working_share = None;
    let mut anova = None;
    let mut classifier = Vec::new();
    match &dataset.labels {
        None => notices.push("dataset has no labels; label-dependent metrics skipped".into()),
        Some(labels) => {
            let working: Vec<bool> = labels.iter().map(|l| l.working).collect();
            let positives = working.iter().filter(|&&w| w).count();
            let mut errors = BTreeMap::new();
            for code in labels.iter().filter_map(|l| l.error) {
                *errors.entry(code.to_string()).or_insert(0) += 1;
            }
            class_balance = Some(ClassBalance {
                working: positives,
                non_working: working.len() - positives,
                working_fraction: positives as f64 / working.len() as f64,
                errors,
            });
            working_share = share_table(dataset, &working, options, &mut notices);
            if positives > 0 && positives < working.len() {
                let f = anova_f(&raw, &working)?;
                anova = Some(names.iter().cloned().zip(f).collect());
            }
            classifier = split_scores(dataset, &normalized, &working, options.k_neighbors)?;
        }
    }

    Ok(EvalReport {
        dataset: dataset.name.clone(),
        rows: dataset.len(),
        features,
        pearson,
        spearman,
        pca,
        diversity,
        realism,
        class_balance,
        working_share,
        anova_f: anova,
        classifier,
        notices,
    })
}

fn share_table(
    dataset: &Dataset,
    working: &[bool],
    options: &ReportOptions,
    notices: &mut Vec<String>,
) -> Option<WorkingShare> {
    let (xn, yn) = &options.share_axes;
    let axis = |name: &str| -> Option<(usize, f64, f64)> {
        let i = dataset.space.index_of(name)?;
        if dataset.space.features[i].kind == FeatureKind::Categorical {
            return None;
        }
        let (lo, hi) = dataset.space.resolve_bounds(&[], i).ok()?;
        (hi > lo).then_some((i, lo, hi))
    };
    let (Some((xi, xlo, xhi)), Some((yi, ylo, yhi))) = (axis(xn), axis(yn)) else {
        notices.push(format!(
            "working-share table skipped: `{xn}` or `{yn}` is not a bounded numeric feature"
        ));
        return None;
    };
    let b = options.share_bins.max(1);
    let edges = |lo: f64, hi: f64| {
        (0..=b)
            .map(|k| lo + (hi - lo) * k as f64 / b as f64)
            .collect::<Vec<_>>()
    };
    let bin = |v: f64, lo: f64, hi: f64| {
        (((v - lo) / (hi - lo) * b as f64).floor().max(0.0) as usize).min(b - 1)
    };
    let mut total = vec![vec![0; b]; b];
    let mut good = vec![vec![0; b]; b];
    for (row, &w) in dataset.rows.iter().zip(working) {
        let (i, j) = (bin(row[xi], xlo, xhi), bin(row[yi], ylo, yhi));
        total[i][j] += 1;
        good[i][j] += w as usize;
    }
    let share = total
        .iter()
        .zip(&good)
        .map(|(t, g)| {
            t.iter()
                .zip(g)
                .map(|(&t, &g)| (t > 0).then(|| g as f64 / t as f64))
                .collect()
        })
        .collect();
    Some(WorkingShare {
        x_feature: xn.clone(),
        y_feature: yn.clone(),
        x_edges: edges(xlo, xhi),
        y_edges: edges(ylo, yhi),
        total,
        working: good,
        share,
    })
}

fn split_scores(
    dataset: &Dataset,
    normalized: &[Vec<f64>],
    working: &[bool],
    k: usize,
) -> Result<Vec<TestScore>, ValidationError> {
    let tests = dataset.test_names();
    let train = dataset.indices_with(&SplitTag::Train);
    if tests.is_empty() || train.is_empty() {
        return Ok(Vec::new());
    }
    let model = knn_fit(
        train.iter().map(|&i| normalized[i].clone()).collect(),
        train.iter().map(|&i| working[i]).collect(),
        k,
    )?;
    tests
        .into_iter()
        .map(|name| {
            let rows = dataset.indices_with(&SplitTag::Test(name.clone()));
            let x: Vec<Vec<f64>> = rows.iter().map(|&i| normalized[i].clone()).collect();
            let truth: Vec<bool> = rows.iter().map(|&i| working[i]).collect();
            Ok(TestScore {
                test_set: name,
                rows: rows.len(),
                f1: f1_score(&model.predict(&x), &truth)?,
            })
        })
        .collect()
}

fn number(v: f64) -> String {
    if v.is_nan() {
        "undefined".into()
    } else {
        format!("{v:.4}")
    }
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_markdown(&self) -> String {
        let mut md = String::new();
        let _ = writeln!(
            md,
            "# Dataset report: {}\n\n{} rows, {} features.\n",
            self.dataset,
            self.rows,
            self.features.len()
        );
        if let Some(b) = &self.class_balance {
            let _ = writeln!(md, "## Class balance\n");
            let _ = writeln!(
                md,
                "working: {} ({:.2}%), non-working: {}\n",
                b.working,
                100.0 * b.working_fraction,
                b.non_working
            );
            for (code, n) in &b.errors {
                let _ = writeln!(md, "- {code}: {n}");
            }
            md.push('\n');
        }
        let _ = writeln!(md, "## Features\n\n| feature | mean | variance | median | IQR | min | max |\n|---|---|---|---|---|---|---|");
        for f in &self.features {
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} | {} | {} | {} |",
                f.name,
                number(f.mean),
                number(f.variance),
                number(f.median),
                number(f.iqr),
                number(f.min),
                number(f.max)
            );
        }
        let _ = writeln!(md, "\n## PCA\n");
        for (i, r) in self.pca.explained_variance_ratio.iter().enumerate() {
            let _ = writeln!(md, "- PC{}: {:.2}% of variance", i + 1, 100.0 * r);
        }
        let d = &self.diversity;
        let _ = writeln!(md, "\n## Diversity\n");
        let _ = writeln!(md, "- convex hull area (PCA-2D): {}", number(d.hull_area));
        let _ = writeln!(md, "- bounding box area (PCA-2D): {}", number(d.box_area));
        let _ = writeln!(
            md,
            "- enclosing circle area (PCA-2D): {}",
            number(d.circle_area)
        );
        let _ = writeln!(
            md,
            "- nearest-neighbor distance: mean {} std {} min {} max {}",
            number(d.nn.mean),
            number(d.nn.std),
            number(d.nn.min),
            number(d.nn.max)
        );
        let _ = writeln!(md, "- entropy (PCA-2D histogram): {}", number(d.entropy));
        let _ = writeln!(
            md,
            "- DPP log-det ({} rows): {}",
            d.dpp_subset,
            number(d.dpp_log_det)
        );
        if let Some(r) = &self.realism {
            let _ = writeln!(
                md,
                "\n## Realism against {} ({} rows)\n",
                r.reference, r.reference_rows
            );
            let _ = writeln!(md, "- KL divergence: {}", number(r.kl));
            let _ = writeln!(md, "- Hausdorff distance: {}", number(r.hausdorff));
            let _ = writeln!(md, "- Chamfer distance: {}", number(r.chamfer));
        }
        if let Some(s) = &self.working_share {
            let _ = writeln!(
                md,
                "\n## Working share by {} (rows) and {} (columns)\n",
                s.x_feature, s.y_feature
            );
            let header: Vec<String> = s
                .y_edges
                .windows(2)
                .map(|w| format!("{:.3}", w[0]))
                .collect();
            let _ = writeln!(
                md,
                "| {} \\ {} | {} |",
                s.x_feature,
                s.y_feature,
                header.join(" | ")
            );
            let _ = writeln!(md, "|---|{}", "---|".repeat(header.len()));
            for (i, row) in s.share.iter().enumerate() {
                let cells: Vec<String> = row
                    .iter()
                    .map(|c| c.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into()))
                    .collect();
                let _ = writeln!(md, "| {:.3} | {} |", s.x_edges[i], cells.join(" | "));
            }
        }
        if !self.classifier.is_empty() {
            let _ = writeln!(
                md,
                "\n## k-NN scores\n\n| test set | rows | F1 |\n|---|---|---|"
            );
            for t in &self.classifier {
                let _ = writeln!(md, "| {} | {} | {:.4} |", t.test_set, t.rows, t.f1);
            }
        }
        if !self.notices.is_empty() {
            let _ = writeln!(md, "\n## Notices\n");
            for n in &self.notices {
                let _ = writeln!(md, "- {n}");
            }
        }
        md
    }
}

/// Learning-curve table, one row per (size, test set).
pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("size,test_set,mean_f1,std_f1,repeats,degenerate\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            p.size,
            p.test_set,
            p.mean_f1,
            p.std_f1,
            p.scores.len(),
            p.degenerate
        );
    }
    out
}

/// Permutation-importance table with feature names.
pub fn importance_csv(names: &[String], importances: &[FeatureImportance]) -> String {
    let mut out = String::from("feature,importance,std\n");
    for f in importances {
        let _ = writeln!(out, "{},{},{}", names[f.feature], f.importance, f.std);
    }
    out
}
