//! Balanced test sets (random, augmented and boundary-focused) and
//! leakage-free train/test tagging.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::annotate::{batch_annotate, AnnotateError, Dataset, Evaluator, SplitTag};
use crate::design_space::{DesignSpace, DesignVector, SpaceError};
use crate::sampling::Method;

pub const UNIFORM_TEST: &str = "uniform";
pub const REAL_TEST: &str = "real";
pub const SPECIALIZED_TEST: &str = "specialized";
pub const DEFAULT_GRID_POINTS: usize = 50;

/// Fourteen illustrative compressor designs (not measured hardware), each
/// working and close enough to a working boundary that small perturbations
/// produce both classes.
pub const REFERENCE_DESIGNS_CSV: &str = include_str!("../assets/reference_designs.csv");

/// [`REFERENCE_DESIGNS_CSV`] on the bundled compressor space.
pub fn reference_designs() -> Dataset {
    Dataset::from_csv_str(
        "reference_designs",
        DesignSpace::compressor(),
        REFERENCE_DESIGNS_CSV,
    )
    .expect("bundled reference designs parse")
}

#[derive(Debug, Error)]
pub enum TestsetError {
    #[error("dataset has no labels")]
    MissingLabels,
    #[error("need {needed} {class} rows, only {available} available")]
    InsufficientClass {
        class: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("dataset has no augmentation rows")]
    NoAugmentedRows,
    #[error("{marked} boundary points cannot give {requested} per class; achievable per class: {achievable}")]
    TooFewMarked {
        requested: usize,
        achievable: usize,
        marked: usize,
    },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("row {row} is in both `{first}` and `{second}`")]
    Overlap {
        row: usize,
        first: String,
        second: String,
    },
    #[error("row {row} out of range for {rows} rows")]
    IndexOutOfRange { row: usize, rows: usize },
    #[error("test set name `{0}` is empty or repeated")]
    BadName(String),
    #[error(transparent)]
    Annotate(#[from] AnnotateError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

fn class_name(working: bool) -> &'static str {
    if working {
        "working"
    } else {
        "non-working"
    }
}

/// Draw `n_per_class` rows of each class from `candidates` without
/// replacement. Output is sorted.
fn balanced_draw(
    candidates: &[usize],
    working: &[bool],
    n_per_class: usize,
    seed: u64,
) -> Result<Vec<usize>, TestsetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = Vec::with_capacity(2 * n_per_class);
    for class in [true, false] {
        let mut pool: Vec<usize> = candidates
            .iter()
            .copied()
            .filter(|&i| working[i] == class)
            .collect();
        if pool.len() < n_per_class {
            return Err(TestsetError::InsufficientClass {
                class: class_name(class),
                needed: n_per_class,
                available: pool.len(),
            });
        }
        let (chosen, _) = pool.partial_shuffle(&mut rng, n_per_class);
        picked.extend_from_slice(chosen);
    }
    picked.sort_unstable();
    Ok(picked)
}

/// Rows not already reserved for a test set.
fn untested(dataset: &Dataset) -> impl Iterator<Item = usize> + '_ {
    (0..dataset.len()).filter(|&i| !matches!(dataset.splits[i], SplitTag::Test(_)))
}

/// Balanced draw from rows made by a random or space-filling generator
/// (anything except augmentation and grid sweeps).
pub fn build_uniform_testset(
    dataset: &Dataset,
    n_per_class: usize,
    seed: u64,
) -> Result<Vec<usize>, TestsetError> {
    let working = dataset.working().map_err(|_| TestsetError::MissingLabels)?;
    let candidates: Vec<usize> = untested(dataset)
        .filter(|&i| {
            !matches!(
                dataset.provenance.method_of(i),
                Method::Augment | Method::Grid
            )
        })
        .collect();
    balanced_draw(&candidates, &working, n_per_class, seed)
}

/// Balanced draw from augmentation rows only.
pub fn build_real_testset(
    dataset: &Dataset,
    n_per_class: usize,
    seed: u64,
) -> Result<Vec<usize>, TestsetError> {
    let working = dataset.working().map_err(|_| TestsetError::MissingLabels)?;
    let augmented: Vec<usize> = (0..dataset.len())
        .filter(|&i| dataset.provenance.method_of(i) == Method::Augment)
        .collect();
    if augmented.is_empty() {
        return Err(TestsetError::NoAugmentedRows);
    }
    let candidates: Vec<usize> = augmented
        .into_iter()
        .filter(|&i| !matches!(dataset.splits[i], SplitTag::Test(_)))
        .collect();
    balanced_draw(&candidates, &working, n_per_class, seed)
}

/// One swept operating variable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridAxis {
    pub feature: String,
    pub lower: f64,
    pub upper: f64,
    pub points: usize,
}

impl GridAxis {
    pub fn value(&self, step: usize) -> f64 {
        self.lower + (self.upper - self.lower) * step as f64 / (self.points - 1) as f64
    }
}

/// Cartesian sweep; features not listed keep the real design's values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub axes: Vec<GridAxis>,
}

impl GridSpec {
    /// 50 x 50 over the inlet and tip Mach numbers of the compressor space.
    pub fn mach_default() -> Self {
        GridSpec {
            axes: vec![
                GridAxis {
                    feature: "Ma21".into(),
                    lower: 0.05,
                    upper: 0.7,
                    points: DEFAULT_GRID_POINTS,
                },
                GridAxis {
                    feature: "Ma41".into(),
                    lower: 0.05,
                    upper: 2.5,
                    points: DEFAULT_GRID_POINTS,
                },
            ],
        }
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.points).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Grid points with at least one axis-adjacent neighbor of the opposite
/// label. `labels` is laid out row-major over `shape` (last axis fastest).
pub fn mark_boundary(labels: &[bool], shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for a in (0..shape.len().saturating_sub(1)).rev() {
        strides[a] = strides[a + 1] * shape[a + 1];
    }
    (0..labels.len())
        .filter(|&i| {
            shape.iter().zip(&strides).any(|(&n, &stride)| {
                let pos = (i / stride) % n;
                (pos > 0 && labels[i - stride] != labels[i])
                    || (pos + 1 < n && labels[i + stride] != labels[i])
            })
        })
        .collect()
}

/// A labeled sweep around real designs and the balanced boundary sample.
#[derive(Debug, Clone)]
pub struct SpecializedSet {
    /// All grid points of all designs, design-major; `row_parent` holds the
    /// design index.
    pub grid: Dataset,
    pub marked: Vec<usize>,
    pub selected: Vec<usize>,
}

impl SpecializedSet {
    /// Selected rows as their own dataset.
    pub fn selected_dataset(&self, name: &str) -> Result<Dataset, TestsetError> {
        Ok(self.grid.subset(name, &self.selected)?)
    }
}

/// Sweep each real design over `grid`, label every point, keep points next
/// to a label change and draw `n_per_class` of each class from them.
pub fn build_specialized_testset(
    real: &Dataset,
    evaluator: &dyn Evaluator,
    grid: &GridSpec,
    n_per_class: usize,
    seed: u64,
    workers: usize,
) -> Result<SpecializedSet, TestsetError> {
    let space = &real.space;
    let mut columns = Vec::with_capacity(grid.axes.len());
    for axis in &grid.axes {
        if axis.points < 3 {
            return Err(TestsetError::InvalidGrid(format!(
                "`{}` needs at least 3 points, got {}",
                axis.feature, axis.points
            )));
        }
        // Rejects unknown, dependent-out-of-range and categorical axes.
        space.restrict(&axis.feature, axis.lower, axis.upper)?;
        let index = space.index_of(&axis.feature).expect("checked by restrict");
        if columns.contains(&index) {
            return Err(TestsetError::InvalidGrid(format!(
                "`{}` swept twice",
                axis.feature
            )));
        }
        columns.push(index);
    }
    let shape = grid.shape();
    let per_design = grid.len();
    let mut rows = Vec::with_capacity(real.len() * per_design);
    let mut parents = Vec::with_capacity(rows.capacity());
    for (d, design) in real.rows.iter().enumerate() {
        for flat in 0..per_design {
            let mut x = design.clone();
            let mut rest = flat;
            for (a, &col) in columns.iter().enumerate().rev() {
                x[col] = grid.axes[a].value(rest % shape[a]);
                rest /= shape[a];
            }
            rows.push(x);
            parents.push(Some(d as u32));
        }
    }
    let mut dataset = Dataset::new(
        &format!("{}-grid", real.name),
        space.clone(),
        rows,
        Method::Grid,
        seed,
    );
    dataset.provenance.row_parent = parents;
    dataset.provenance.segments[0].parents_source = Some(real.name.clone());
    let (dataset, _) = batch_annotate(dataset, evaluator, workers)?;
    let working = dataset.working()?;
    let mut marked = Vec::new();
    for d in 0..real.len() {
        let start = d * per_design;
        marked.extend(
            mark_boundary(&working[start..start + per_design], &shape)
                .into_iter()
                .map(|i| i + start),
        );
    }
    let selected = balanced_draw(&marked, &working, n_per_class, seed).map_err(|_| {
        let positives = marked.iter().filter(|&&i| working[i]).count();
        TestsetError::TooFewMarked {
            requested: n_per_class,
            achievable: positives.min(marked.len() - positives),
            marked: marked.len(),
        }
    })?;
    Ok(SpecializedSet {
        grid: dataset,
        marked,
        selected,
    })
}

/// A named test set to carve out of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestSpec {
    pub name: String,
    pub indices: Vec<usize>,
    /// Whether the set was drawn with equal class counts.
    pub balanced: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SplitPlan {
    pub tests: Vec<TestSpec>,
}

impl SplitPlan {
    pub fn with(mut self, name: &str, indices: Vec<usize>, balanced: bool) -> Self {
        self.tests.push(TestSpec {
            name: name.to_string(),
            indices,
            balanced,
        });
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitSummary {
    pub train: usize,
    pub tests: Vec<(String, usize)>,
    /// Rows in both the train split and some test split. Always zero after
    /// [`apply_split`]; kept so reports can show the check.
    pub index_overlap: usize,
    pub warnings: Vec<String>,
}

/// Tag plan rows `test:<name>` and every other row `train`.
pub fn apply_split(
    dataset: &Dataset,
    plan: &SplitPlan,
) -> Result<(Dataset, SplitSummary), TestsetError> {
    let n = dataset.len();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    let mut names = BTreeSet::new();
    for (t, spec) in plan.tests.iter().enumerate() {
        if spec.name.is_empty() || spec.name.contains(',') || !names.insert(spec.name.as_str()) {
            return Err(TestsetError::BadName(spec.name.clone()));
        }
        for &row in &spec.indices {
            if row >= n {
                return Err(TestsetError::IndexOutOfRange { row, rows: n });
            }
            if let Some(prev) = owner[row] {
                return Err(TestsetError::Overlap {
                    row,
                    first: plan.tests[prev].name.clone(),
                    second: spec.name.clone(),
                });
            }
            owner[row] = Some(t);
        }
    }
    let mut out = dataset.clone();
    out.splits = owner
        .iter()
        .map(|o| match o {
            Some(t) => SplitTag::Test(plan.tests[*t].name.clone()),
            None => SplitTag::Train,
        })
        .collect();
    let summary = split_summary(&out);
    Ok((out, summary))
}

/// Counts per tag and the train/test index intersection.
pub fn split_summary(dataset: &Dataset) -> SplitSummary {
    let train: BTreeSet<usize> = dataset.indices_with(&SplitTag::Train).into_iter().collect();
    let mut tests = Vec::new();
    let mut index_overlap = 0;
    for name in dataset.test_names() {
        let rows = dataset.indices_with(&SplitTag::Test(name.clone()));
        index_overlap += rows.iter().filter(|r| train.contains(r)).count();
        tests.push((name, rows.len()));
    }
    let mut warnings = Vec::new();
    if train.is_empty() {
        warnings.push("train split is empty".to_string());
    }
    SplitSummary {
        train: train.len(),
        tests,
        index_overlap,
        warnings,
    }
}

/// Write each test split as `<dir>/<dataset>.<testset>.csv` (with sidecar).
pub fn export_testsets(dataset: &Dataset, dir: &Path) -> Result<Vec<PathBuf>, TestsetError> {
    let mut written = Vec::new();
    for name in dataset.test_names() {
        let rows = dataset.indices_with(&SplitTag::Test(name.clone()));
        let file = format!("{}.{}", dataset.name, name);
        let path = dir.join(format!("{file}.csv"));
        dataset.subset(&file, &rows)?.write(&path)?;
        written.push(path);
    }
    Ok(written)
}

/// Rows of `dataset` in the given split, with their working flags.
pub fn split_rows(
    dataset: &Dataset,
    tag: &SplitTag,
) -> Result<(Vec<DesignVector>, Vec<bool>), TestsetError> {
    let working = dataset.working().map_err(|_| TestsetError::MissingLabels)?;
    let idx = dataset.indices_with(tag);
    Ok((
        idx.iter().map(|&i| dataset.rows[i].clone()).collect(),
        idx.iter().map(|&i| working[i]).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotate::{ErrorCode, Labels};
    use crate::design_space::parse_space;

    fn labeled(working: &[bool], method: Method) -> Dataset {
        let space = parse_space("x | continuous | 0 | 1000000 | - | uniform |").unwrap();
        let rows = (0..working.len()).map(|i| vec![i as f64].into()).collect();
        let mut ds = Dataset::new("t", space, rows, method, 0);
        ds.labels = Some(
            working
                .iter()
                .map(|&w| {
                    if w {
                        Labels::working(0.8, 2.0)
                    } else {
                        Labels::failed(ErrorCode::Choke)
                    }
                })
                .collect(),
        );
        ds
    }

    struct Constant;
    impl Evaluator for Constant {
        fn id(&self) -> &str {
            "constant"
        }
        fn evaluate(&self, _: &[f64]) -> Labels {
            Labels::working(0.8, 2.0)
        }
    }

    #[test]
    fn uniform_testset_small_cases() {
        let ds = labeled(&[true, false], Method::Uniform);
        assert_eq!(build_uniform_testset(&ds, 1, 0).unwrap(), vec![0, 1]);
        let one_class = labeled(&[true, true], Method::Uniform);
        assert!(matches!(
            build_uniform_testset(&one_class, 1, 0),
            Err(TestsetError::InsufficientClass { available: 0, .. })
        ));
    }

    #[test]
    fn uniform_testset_is_balanced_and_seeded() {
        let flags: Vec<bool> = (0..100_000).map(|i| i % 7 == 0).collect();
        let ds = labeled(&flags, Method::Uniform);
        let a = build_uniform_testset(&ds, 1000, 5).unwrap();
        let pos = a.iter().filter(|&&i| flags[i]).count();
        assert_eq!((pos, a.len() - pos), (1000, 1000));
        assert_eq!(a, build_uniform_testset(&ds, 1000, 5).unwrap());
        assert_ne!(a, build_uniform_testset(&ds, 1000, 6).unwrap());
    }

    #[test]
    fn real_testset_needs_augmented_rows() {
        let ds = labeled(&[true, false, true, false], Method::Uniform);
        assert!(matches!(
            build_real_testset(&ds, 1, 0),
            Err(TestsetError::NoAugmentedRows)
        ));
        let aug = labeled(&[true, false, true, false], Method::Augment);
        let merged = Dataset::concat("m", &[&ds, &aug]).unwrap();
        let picked = build_real_testset(&merged, 2, 0).unwrap();
        assert_eq!(picked, vec![4, 5, 6, 7]);
        // And the uniform builder stays away from them.
        assert!(build_uniform_testset(&merged, 2, 0)
            .unwrap()
            .iter()
            .all(|&i| i < 4));
    }

    #[test]
    fn bundled_reference_designs_are_valid_and_working() {
        let refs = reference_designs();
        assert_eq!(refs.len(), 14);
        let space = DesignSpace::compressor();
        let ev = crate::annotate::CompressorEvaluator::for_space(&space).unwrap();
        for row in &refs.rows {
            assert!(space.validate_vector(row).unwrap().valid);
            assert!(ev.evaluate(row).working);
        }
    }

    #[test]
    fn boundary_marking_in_one_dimension() {
        assert_eq!(mark_boundary(&[true, true, false, false], &[4]), vec![1, 2]);
        assert!(mark_boundary(&[true; 5], &[5]).is_empty());
    }

    #[test]
    fn boundary_marking_matches_brute_force() {
        let shape = [7, 9];
        let labels: Vec<bool> = (0..63).map(|i| (i * 37 + i / 5) % 3 == 0).collect();
        let at = |r: i64, c: i64| labels[(r * 9 + c) as usize];
        let mut expected = Vec::new();
        for r in 0..7i64 {
            for c in 0..9i64 {
                let here = at(r, c);
                let opposite =
                    [(r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)]
                        .iter()
                        .any(|&(rr, cc)| {
                            (0..7).contains(&rr) && (0..9).contains(&cc) && at(rr, cc) != here
                        });
                if opposite {
                    expected.push((r * 9 + c) as usize);
                }
            }
        }
        assert_eq!(mark_boundary(&labels, &shape), expected);
    }

    #[test]
    fn constant_evaluator_leaves_nothing_to_mark() {
        let space = DesignSpace::compressor();
        let real =
            Dataset::from_batch("r", &crate::sampling::sample_uniform(&space, 1, 0).unwrap());
        let grid = GridSpec {
            axes: vec![GridAxis {
                feature: "Ma21".into(),
                lower: 0.1,
                upper: 0.5,
                points: 5,
            }],
        };
        match build_specialized_testset(&real, &Constant, &grid, 1, 0, 2) {
            Err(TestsetError::TooFewMarked {
                achievable: 0,
                marked: 0,
                ..
            }) => {}
            other => panic!("{other:?}"),
        }
        let coarse = GridSpec {
            axes: vec![GridAxis {
                points: 2,
                ..grid.axes[0].clone()
            }],
        };
        assert!(matches!(
            build_specialized_testset(&real, &Constant, &coarse, 1, 0, 2),
            Err(TestsetError::InvalidGrid(_))
        ));
    }

    #[test]
    fn split_tags_and_overlap() {
        let ds = labeled(&[true, false, true, false, true], Method::Uniform);
        let (all_train, summary) = apply_split(&ds, &SplitPlan::default()).unwrap();
        assert!(all_train.splits.iter().all(|t| *t == SplitTag::Train));
        assert_eq!(summary.train, 5);

        let plan = SplitPlan::default()
            .with("a", vec![0, 1], true)
            .with("b", vec![3], false);
        let (split, summary) = apply_split(&ds, &plan).unwrap();
        assert_eq!(split.splits[1], SplitTag::Test("a".into()));
        assert_eq!(split.splits[2], SplitTag::Train);
        assert_eq!(summary.index_overlap, 0);
        assert_eq!(summary.tests, vec![("a".into(), 2), ("b".into(), 1)]);

        let clash = SplitPlan::default()
            .with("a", vec![0, 1], true)
            .with("b", vec![1], false);
        assert!(matches!(
            apply_split(&ds, &clash),
            Err(TestsetError::Overlap { row: 1, .. })
        ));

        let everything = SplitPlan::default().with("a", (0..5).collect(), false);
        let (_, summary) = apply_split(&ds, &everything).unwrap();
        assert_eq!(summary.train, 0);
        assert_eq!(summary.warnings.len(), 1);
    }

    #[test]
    fn export_writes_one_file_per_test_set() {
        let ds = labeled(&[true, false, true, false], Method::Uniform);
        let plan = SplitPlan::default().with("uniform", vec![0, 1], true);
        let (split, _) = apply_split(&ds, &plan).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = export_testsets(&split, dir.path()).unwrap();
        assert_eq!(files, vec![dir.path().join("t.uniform.csv")]);
        let back = Dataset::read(&files[0]).unwrap();
        assert_eq!(back.len(), 2);
    }
}
