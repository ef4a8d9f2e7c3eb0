use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use tabsynth::annotate::{
    batch_annotate, evaluator_by_id, postprocess_labels, AnnotateError, Dataset, Evaluator,
    SplitTag, COMPRESSOR_EVALUATOR_ID,
};
use tabsynth::design_space::{parse_space, DesignSpace};
use tabsynth::metrics::SimilarityKernel;
use tabsynth::sampling::{
    augment, cluster_select, dpp_greedy_select, sample_lhs, sample_sobol, sample_uniform,
    KernelBlend, Method, DEFAULT_SIGMA_FRAC,
};
use tabsynth::testsets::{
    apply_split, build_real_testset, build_specialized_testset, build_uniform_testset,
    export_testsets, reference_designs, split_summary, GridSpec, SplitPlan, SplitSummary,
    REAL_TEST, SPECIALIZED_TEST, UNIFORM_TEST,
};
use tabsynth::validation::{
    curve_csv, evaluate_dataset, importance_csv, knn_fit, learning_curve, permutation_importance,
    LabeledSet, ReportOptions, DEFAULT_NEIGHBORS,
};

use crate::config::{layered, FileConfig};
use crate::{
    AnnotateArgs, CliError, MergeArgs, SampleArgs, SpaceArgs, SpaceSelection, SplitArgs,
    ValidateArgs, VerifyArgs, WORKERS_ENV,
};

const BUNDLED_SPACE: &str = "compressor";
const REFERENCE_DESIGNS: &str = "reference";
const DEFAULT_SIZES: [usize; 3] = [100, 1_000, 10_000];
const DEFAULT_REPEATS: usize = 10;
const DEFAULT_IMPORTANCE_REPEATS: usize = 5;

pub struct Context {
    pub config: FileConfig,
    pub workers: Option<usize>,
}

impl Context {
    fn get<T: DeserializeOwned>(
        &self,
        section: &str,
        key: &str,
        flag: Option<T>,
    ) -> Result<Option<T>, CliError> {
        layered(flag, &self.config, section, key)
    }

    /// `--workers`, then the config file, then `$TABSYNTH_WORKERS`, then
    /// the available cores.
    fn workers(&self, section: &str) -> Result<usize, CliError> {
        let workers = match self.get(section, "workers", self.workers)? {
            Some(w) => w,
            None => match std::env::var(WORKERS_ENV) {
                Ok(v) => v.trim().parse().map_err(|_| {
                    CliError::Usage(format!("{WORKERS_ENV}={v} is not a worker count"))
                })?,
                Err(_) => std::thread::available_parallelism()
                    .map(|n| n.get())
                    .unwrap_or(1),
            },
        };
        if workers == 0 {
            return Err(CliError::Usage("worker count must be at least 1".into()));
        }
        Ok(workers)
    }
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("--{flag} is required")))
}

fn usage_if(condition: bool, message: &str) -> Result<(), CliError> {
    if condition {
        Err(CliError::Usage(message.to_string()))
    } else {
        Ok(())
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))
}

/// Everything needed to rerun a command, written next to its outputs as
/// `<stem>.run.json`.
#[derive(Debug, Serialize)]
struct RunConfig {
    command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    space: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    bounds: Vec<String>,
    inputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    method: Option<String>,
    params: BTreeMap<&'static str, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    workers: Option<usize>,
    output: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    formats: Vec<String>,
    toolkit_version: &'static str,
}

impl RunConfig {
    fn new(command: &'static str, output: &Path) -> Self {
        RunConfig {
            command,
            space: None,
            bounds: Vec::new(),
            inputs: Vec::new(),
            method: None,
            params: BTreeMap::new(),
            seed: None,
            workers: None,
            output: output.display().to_string(),
            formats: Vec::new(),
            toolkit_version: env!("CARGO_PKG_VERSION"),
        }
    }

    fn param(&mut self, key: &'static str, value: impl Serialize) {
        self.params
            .insert(key, serde_json::to_value(value).unwrap_or(Value::Null));
    }

    fn input(&mut self, path: &Path) {
        self.inputs.push(path.display().to_string());
    }

    /// Record the seed and announce it.
    fn seed(&mut self, seed: u64) {
        println!("seed: {seed}");
        self.seed = Some(seed);
    }

    fn write(&self, path: &Path) -> Result<(), CliError> {
        write_text(path, &to_json(self)?)
    }
}

fn run_path(dir: &Path, stem: &str) -> PathBuf {
    dir.join(format!("{stem}.run.json"))
}

fn run_path_for(output: &Path) -> PathBuf {
    output.with_file_name(format!("{}.run.json", stem(output)))
}

fn load_space(source: &str) -> Result<DesignSpace, CliError> {
    if source == BUNDLED_SPACE {
        return Ok(DesignSpace::compressor());
    }
    let text = fs::read_to_string(source)
        .map_err(|e| CliError::Data(format!("cannot read space {source}: {e}")))?;
    Ok(parse_space(&text)?)
}

fn parse_bound(text: &str) -> Result<(String, f64, f64), CliError> {
    let bad = || CliError::Usage(format!("bound `{text}` is not NAME=LOWER:UPPER"));
    let (name, range) = text.split_once('=').ok_or_else(bad)?;
    let (lower, upper) = range.split_once(':').ok_or_else(bad)?;
    let lower = lower.trim().parse().map_err(|_| bad())?;
    let upper = upper.trim().parse().map_err(|_| bad())?;
    Ok((name.trim().to_string(), lower, upper))
}

/// The selected space with all `--bound` restrictions applied.
fn resolve_space(
    ctx: &Context,
    section: &str,
    selection: &SpaceSelection,
) -> Result<(String, Vec<String>, DesignSpace), CliError> {
    let source = ctx
        .get(section, "space", selection.space.clone())?
        .unwrap_or_else(|| BUNDLED_SPACE.to_string());
    let bounds = if selection.bounds.is_empty() {
        ctx.get(section, "bound", None)?.unwrap_or_default()
    } else {
        selection.bounds.clone()
    };
    let mut space = load_space(&source)?;
    for b in &bounds {
        let (name, lower, upper) = parse_bound(b)?;
        space = space.restrict(&name, lower, upper)?;
    }
    Ok((source, bounds, space))
}

fn load_designs(source: &str, space: &DesignSpace) -> Result<Dataset, CliError> {
    if source == REFERENCE_DESIGNS {
        return Ok(reference_designs());
    }
    Ok(Dataset::read_with_space(Path::new(source), space)?)
}

fn load_evaluator(id: &str, space: &DesignSpace) -> Result<Box<dyn Evaluator>, CliError> {
    evaluator_by_id(id, space).map_err(|e| match e {
        AnnotateError::UnknownEvaluator(_) => CliError::Usage(e.to_string()),
        other => other.into(),
    })
}

fn parse_kernel(name: &str) -> Result<SimilarityKernel, CliError> {
    match name {
        "rbf" => Ok(SimilarityKernel::Rbf),
        "cosine" => Ok(SimilarityKernel::Cosine),
        other => Err(CliError::Usage(format!(
            "unknown kernel `{other}` (rbf or cosine)"
        ))),
    }
}

pub fn space(ctx: &Context, args: SpaceArgs) -> Result<(), CliError> {
    let (_, _, space) = resolve_space(ctx, "space", &args.selection)?;
    let document = space.to_document();
    match ctx.get("space", "out", args.out)? {
        Some(path) => {
            write_text(&path, &document)?;
            println!(
                "wrote space `{}` ({} features) to {}",
                space.name,
                space.dim(),
                path.display()
            );
        }
        None => print!("{document}"),
    }
    Ok(())
}

pub fn sample(ctx: &Context, args: SampleArgs) -> Result<(), CliError> {
    const S: &str = "sample";
    let (source, bounds, space) = resolve_space(ctx, S, &args.selection)?;
    let method: Method = required(ctx.get::<String>(S, "method", args.method)?, "method")?
        .parse()
        .map_err(CliError::Usage)?;
    let out: PathBuf = required(ctx.get(S, "out", args.out)?, "out")?;
    let name = ctx.get(S, "name", args.name)?.unwrap_or_else(|| stem(&out));
    let seed = ctx.get(S, "seed", args.seed)?.unwrap_or(0);
    let n: Option<usize> = ctx.get(S, "n", args.n)?;
    let m: Option<u32> = ctx.get(S, "m", args.m)?;

    let mut run = RunConfig::new("sample", &out);
    run.space = Some(source);
    run.bounds = bounds;
    run.method = Some(method.to_string());

    let dataset = match method {
        Method::Uniform | Method::Lhs => {
            usage_if(m.is_some(), "--m applies to sobol only")?;
            let n = required(n, "n")?;
            run.param("n", n);
            run.seed(seed);
            let batch = if method == Method::Uniform {
                sample_uniform(&space, n, seed)?
            } else {
                sample_lhs(&space, n, seed)?
            };
            Dataset::from_batch(&name, &batch)
        }
        Method::Sobol => {
            usage_if(n.is_some(), "sobol draws 2^m rows; pass --m instead of --n")?;
            let m = required(m, "m")?;
            run.param("m", m);
            run.seed(seed);
            Dataset::from_batch(&name, &sample_sobol(&space, m, seed)?)
        }
        Method::Augment => {
            let parents_arg: String = ctx.get(S, "parents", args.parents)?.ok_or_else(|| {
                CliError::Usage("--method augment needs --parents <file|reference>".into())
            })?;
            let n = required(n, "n")?;
            let sigma = ctx
                .get(S, "sigma", args.sigma)?
                .unwrap_or(DEFAULT_SIGMA_FRAC);
            let parents = load_designs(&parents_arg, &space)?;
            run.inputs.push(parents_arg.clone());
            run.param("n", n);
            run.param("sigma", sigma);
            run.seed(seed);
            let mut ds =
                Dataset::from_batch(&name, &augment(&space, &parents.rows, n, sigma, seed)?);
            ds.provenance.segments[0].parents_source = Some(parents_arg);
            ds
        }
        Method::Dpp | Method::Cluster => {
            usage_if(
                n.is_some() || m.is_some(),
                "dpp and cluster select --k rows from --candidates",
            )?;
            let path: PathBuf = required(ctx.get(S, "candidates", args.candidates)?, "candidates")?;
            let k = required(ctx.get(S, "k", args.k)?, "k")?;
            let pool = Dataset::read_with_space(&path, &space)?;
            run.input(&path);
            run.param("k", k);
            let indices = if method == Method::Dpp {
                let kernel = parse_kernel(
                    &ctx.get(S, "kernel", args.kernel)?
                        .unwrap_or_else(|| "rbf".into()),
                )?;
                let weight = ctx.get(S, "weight", args.weight)?.unwrap_or(0.0);
                run.param("kernel", kernel);
                run.param("weight", weight);
                let labels: Option<Vec<Vec<f64>>> = pool
                    .labels
                    .as_ref()
                    .map(|ls| ls.iter().map(|l| vec![l.eta_tt, l.pr_tt]).collect());
                let blend = KernelBlend {
                    design: kernel,
                    weight,
                    ..KernelBlend::default()
                };
                let selection =
                    dpp_greedy_select(&pool.space, &pool.rows, labels.as_deref(), k, blend)?;
                if selection.psd.clipped > 0 {
                    println!(
                        "kernel: clipped {} slightly negative eigenvalues",
                        selection.psd.clipped
                    );
                }
                selection.indices
            } else {
                let clusters = required(ctx.get(S, "clusters", args.clusters)?, "clusters")?;
                run.param("clusters", clusters);
                run.seed(seed);
                cluster_select(&pool.space, &pool.rows, k, clusters, seed)?
            };
            pool.subset(&name, &indices)?
        }
        Method::Grid => {
            return Err(CliError::Usage(
                "grid sweeps are built by `split --specialized`".into(),
            ))
        }
    };
    dataset.write(&out)?;
    run.write(&run_path_for(&out))?;
    println!("wrote {} rows to {}", dataset.len(), out.display());
    Ok(())
}

pub fn annotate(ctx: &Context, args: AnnotateArgs) -> Result<(), CliError> {
    const S: &str = "annotate";
    let input: PathBuf = required(ctx.get(S, "input", args.input)?, "input")?;
    let out: PathBuf = required(ctx.get(S, "out", args.out)?, "out")?;
    let space_arg = ctx
        .get(S, "space", args.space)?
        .unwrap_or_else(|| BUNDLED_SPACE.into());
    let id = ctx
        .get(S, "evaluator", args.evaluator)?
        .unwrap_or_else(|| COMPRESSOR_EVALUATOR_ID.into());
    let workers = ctx.workers(S)?;

    let dataset = Dataset::read_with_space(&input, &load_space(&space_arg)?)?;
    let evaluator = load_evaluator(&id, &dataset.space)?;
    let (dataset, summary) = batch_annotate(dataset, evaluator.as_ref(), workers)?;
    let (dataset, anomalies) = postprocess_labels(dataset)?;
    dataset.write(&out)?;
    let anomaly_path = out.with_file_name(format!("{}.anomalies.json", stem(&out)));
    write_text(&anomaly_path, &to_json(&anomalies)?)?;

    let mut run = RunConfig::new("annotate", &out);
    run.input(&input);
    run.param("evaluator", &id);
    run.workers = Some(workers);
    run.write(&run_path_for(&out))?;

    println!(
        "annotated {} rows with {id}: {} working ({:.2}%)",
        summary.rows,
        summary.working,
        100.0 * summary.working_fraction()
    );
    for (code, count) in &summary.errors {
        println!("  {code}: {count}");
    }
    if summary.panics > 0 {
        println!("  evaluator panics: {}", summary.panics);
    }
    println!(
        "anomalies: eta out of range {}, pr below one {}, non-finite {}, sentinel mismatch {}, rows flagged {}",
        anomalies.eta_out_of_range,
        anomalies.pr_below_one,
        anomalies.non_finite,
        anomalies.sentinel_mismatch,
        anomalies.flagged_rows.len()
    );
    println!("wrote {} and {}", out.display(), anomaly_path.display());
    Ok(())
}

pub fn validate(ctx: &Context, args: ValidateArgs) -> Result<(), CliError> {
    const S: &str = "validate";
    let input: PathBuf = required(ctx.get(S, "input", args.input)?, "input")?;
    let space_arg = ctx
        .get(S, "space", args.space)?
        .unwrap_or_else(|| BUNDLED_SPACE.into());
    let formats: Vec<String> = ctx
        .get(S, "format", args.format)?
        .unwrap_or_else(|| vec!["json".into(), "md".into()]);
    if let Some(bad) = formats
        .iter()
        .find(|f| !matches!(f.as_str(), "json" | "md"))
    {
        return Err(CliError::Usage(format!(
            "unknown report format `{bad}` (json or md)"
        )));
    }
    let reference_path: Option<PathBuf> = ctx.get(S, "reference", args.reference)?;
    let out_dir: PathBuf = ctx
        .get(S, "out-dir", args.out_dir)?
        .unwrap_or_else(|| input.parent().map(Path::to_path_buf).unwrap_or_default());
    let mut options = ReportOptions::default();
    options.seed = ctx.get(S, "seed", args.seed)?.unwrap_or(options.seed);
    options.histogram_bins = ctx
        .get(S, "bins", args.bins)?
        .unwrap_or(options.histogram_bins);
    options.k_neighbors = ctx.get(S, "k", args.k)?.unwrap_or(options.k_neighbors);

    let dataset = Dataset::read_with_space(&input, &load_space(&space_arg)?)?;
    let reference = match &reference_path {
        Some(p) => Some(Dataset::read_with_space(p, &dataset.space)?),
        None => None,
    };
    let mut run = RunConfig::new("validate", &out_dir);
    run.input(&input);
    if let Some(p) = &reference_path {
        run.input(p);
    }
    run.space = Some(space_arg);
    run.formats = formats.clone();
    run.param("bins", options.histogram_bins);
    run.param("k", options.k_neighbors);
    run.seed(options.seed);

    let report = evaluate_dataset(&dataset, reference.as_ref(), &options)?;
    let base = format!("{}.report", dataset.name);
    for format in &formats {
        let (path, text) = match format.as_str() {
            "json" => (out_dir.join(format!("{base}.json")), report.to_json()),
            _ => (out_dir.join(format!("{base}.md")), report.to_markdown()),
        };
        write_text(&path, &text)?;
        println!("wrote {}", path.display());
    }
    run.write(&run_path(&out_dir, &base))?;

    println!("{} rows, {} features", report.rows, report.features.len());
    if let Some(balance) = &report.class_balance {
        println!(
            "working {} / non-working {} ({:.2}% working)",
            balance.working,
            balance.non_working,
            100.0 * balance.working_fraction
        );
    }
    if let Some(realism) = &report.realism {
        println!(
            "realism: {}",
            serde_json::to_string(realism).map_err(|e| CliError::Internal(e.to_string()))?
        );
    }
    for notice in &report.notices {
        println!("notice: {notice}");
    }
    Ok(())
}

fn print_split(summary: &SplitSummary) {
    println!("train: {}", summary.train);
    for (name, rows) in &summary.tests {
        println!("test {name}: {rows}");
    }
    println!("index overlap: {}", summary.index_overlap);
    for warning in &summary.warnings {
        println!("warning: {warning}");
    }
}

pub fn split(ctx: &Context, args: SplitArgs) -> Result<(), CliError> {
    const S: &str = "split";
    let input: PathBuf = required(ctx.get(S, "input", args.input)?, "input")?;
    let out: PathBuf = required(ctx.get(S, "out", args.out)?, "out")?;
    let seed = ctx.get(S, "seed", args.seed)?.unwrap_or(0);
    let uniform: usize = ctx.get(S, "uniform", args.uniform)?.unwrap_or(0);
    let real: usize = ctx.get(S, "real", args.real)?.unwrap_or(0);
    let specialized: usize = ctx.get(S, "specialized", args.specialized)?.unwrap_or(0);
    usage_if(
        uniform + real + specialized == 0,
        "request at least one test set with --uniform, --real or --specialized",
    )?;
    let export_dir: Option<PathBuf> = ctx.get(S, "export-dir", args.export_dir)?;

    let dataset = Dataset::read(&input)?;
    let mut run = RunConfig::new("split", &out);
    run.input(&input);
    run.param("uniform", uniform);
    run.param("real", real);
    run.param("specialized", specialized);
    run.seed(seed);

    // Test sets already in the file are kept.
    let mut plan = SplitPlan::default();
    for name in dataset.test_names() {
        let rows = dataset.indices_with(&SplitTag::Test(name.clone()));
        plan = plan.with(&name, rows, false);
    }
    if uniform > 0 {
        plan = plan.with(
            UNIFORM_TEST,
            build_uniform_testset(&dataset, uniform, seed)?,
            true,
        );
    }
    if real > 0 {
        plan = plan.with(
            REAL_TEST,
            build_real_testset(&dataset, real, seed.wrapping_add(1))?,
            true,
        );
    }
    let combined = if specialized > 0 {
        let designs_arg = ctx
            .get(S, "designs", args.designs)?
            .unwrap_or_else(|| REFERENCE_DESIGNS.into());
        let id = match ctx.get(S, "evaluator", args.evaluator)? {
            Some(id) => id,
            None => dataset
                .provenance
                .evaluator
                .clone()
                .unwrap_or_else(|| COMPRESSOR_EVALUATOR_ID.into()),
        };
        let mut grid = GridSpec::mach_default();
        if let Some(points) = ctx.get(S, "grid-points", args.grid_points)? {
            for axis in &mut grid.axes {
                axis.points = points;
            }
        }
        let workers = ctx.workers(S)?;
        let designs = load_designs(&designs_arg, &dataset.space)?;
        let evaluator = load_evaluator(&id, &dataset.space)?;
        run.inputs.push(designs_arg);
        run.param("evaluator", &id);
        run.param("grid", &grid);
        run.workers = Some(workers);
        let set = build_specialized_testset(
            &designs,
            evaluator.as_ref(),
            &grid,
            specialized,
            seed.wrapping_add(2),
            workers,
        )?;
        println!(
            "specialized sweep: {} designs, {} grid points, {} on the boundary",
            designs.len(),
            set.grid.len(),
            set.marked.len()
        );
        let boundary = set.selected_dataset(SPECIALIZED_TEST)?;
        let combined = Dataset::concat(&dataset.name, &[&dataset, &boundary])?;
        plan = plan.with(
            SPECIALIZED_TEST,
            (dataset.len()..combined.len()).collect(),
            true,
        );
        combined
    } else {
        dataset
    };
    let (split, summary) = apply_split(&combined, &plan)?;
    split.write(&out)?;
    run.write(&run_path_for(&out))?;
    print_split(&summary);
    println!("wrote {}", out.display());
    if let Some(dir) = export_dir {
        for path in export_testsets(&split, &dir)? {
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

pub fn verify(ctx: &Context, args: VerifyArgs) -> Result<(), CliError> {
    const S: &str = "verify";
    let input: PathBuf = required(ctx.get(S, "input", args.input)?, "input")?;
    let sizes: Vec<usize> = ctx
        .get(S, "sizes", args.sizes)?
        .unwrap_or_else(|| DEFAULT_SIZES.to_vec());
    usage_if(sizes.is_empty(), "--sizes needs at least one size")?;
    let repeats = ctx
        .get(S, "repeats", args.repeats)?
        .unwrap_or(DEFAULT_REPEATS);
    let k = ctx.get(S, "k", args.k)?.unwrap_or(DEFAULT_NEIGHBORS);
    let seed = ctx.get(S, "seed", args.seed)?.unwrap_or(0);
    let importance_repeats = ctx
        .get(S, "importance-repeats", args.importance_repeats)?
        .unwrap_or(DEFAULT_IMPORTANCE_REPEATS);
    let out_dir: PathBuf = ctx
        .get(S, "out-dir", args.out_dir)?
        .unwrap_or_else(|| input.parent().map(Path::to_path_buf).unwrap_or_default());

    let dataset = Dataset::read(&input)?;
    let summary = split_summary(&dataset);
    print_split(&summary);
    if summary.tests.is_empty() {
        return Err(CliError::Data(format!(
            "{} has no test sets; run `tabsynth split` first",
            input.display()
        )));
    }
    if summary.index_overlap > 0 {
        return Err(CliError::Data(format!(
            "{} rows are tagged both train and test",
            summary.index_overlap
        )));
    }

    let mut run = RunConfig::new("verify", &out_dir);
    run.input(&input);
    run.param("sizes", &sizes);
    run.param("repeats", repeats);
    run.param("k", k);
    run.param("importance_repeats", importance_repeats);
    run.seed(seed);

    let normalized = dataset.normalized()?;
    let working = dataset.working()?;
    let labeled = |name: &str, tag: &SplitTag| {
        let rows = dataset.indices_with(tag);
        LabeledSet::new(
            name,
            rows.iter().map(|&i| normalized[i].clone()).collect(),
            rows.iter().map(|&i| working[i]).collect(),
        )
    };
    let pool = labeled("train", &SplitTag::Train);
    let tests: Vec<LabeledSet> = summary
        .tests
        .iter()
        .map(|(name, _)| labeled(name, &SplitTag::Test(name.clone())))
        .collect();

    let curve = learning_curve(&pool, &tests, &sizes, repeats, seed, k)?;
    println!("size,test_set,mean_f1,std_f1");
    for p in &curve {
        println!("{},{},{:.4},{:.4}", p.size, p.test_set, p.mean_f1, p.std_f1);
    }
    let curve_path = out_dir.join(format!("{}.curve.csv", dataset.name));
    write_text(&curve_path, &curve_csv(&curve))?;
    println!("wrote {}", curve_path.display());

    if importance_repeats > 0 {
        let largest = sizes
            .iter()
            .copied()
            .max()
            .expect("sizes checked non-empty");
        let train = pool.subsample(largest, seed)?;
        let model = knn_fit(train.rows, train.labels, k)?;
        let rows: Vec<Vec<f64>> = tests.iter().flat_map(|t| t.rows.iter().cloned()).collect();
        let truth: Vec<bool> = tests
            .iter()
            .flat_map(|t| t.labels.iter().copied())
            .collect();
        let mut importances =
            permutation_importance(&model, &rows, &truth, importance_repeats, seed)?;
        importances.sort_by(|a, b| b.importance.total_cmp(&a.importance));
        let names = dataset.space.names();
        let path = out_dir.join(format!("{}.importance.csv", dataset.name));
        write_text(&path, &importance_csv(&names, &importances))?;
        let top: Vec<String> = importances
            .iter()
            .take(5)
            .map(|f| format!("{} {:.4}", names[f.feature], f.importance))
            .collect();
        println!("top features (model on {largest} rows): {}", top.join(", "));
        println!("wrote {}", path.display());
    }
    run.write(&run_path(&out_dir, &format!("{}.verify", dataset.name)))?;
    Ok(())
}

pub fn merge(ctx: &Context, args: MergeArgs) -> Result<(), CliError> {
    const S: &str = "merge";
    let inputs: Vec<PathBuf> = if args.inputs.is_empty() {
        ctx.get(S, "inputs", None)?.unwrap_or_default()
    } else {
        args.inputs
    };
    usage_if(inputs.is_empty(), "merge needs at least one input dataset")?;
    let out: PathBuf = required(ctx.get(S, "out", args.out)?, "out")?;
    let name = ctx.get(S, "name", args.name)?.unwrap_or_else(|| stem(&out));
    let space_arg: Option<String> = ctx.get(S, "space", args.space)?;
    let fallback = load_space(space_arg.as_deref().unwrap_or(BUNDLED_SPACE))?;

    let parts = inputs
        .iter()
        .map(|p| Dataset::read_with_space(p, &fallback))
        .collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&Dataset> = parts.iter().collect();
    let mut merged = Dataset::concat(&name, &refs)?;
    if space_arg.is_some() {
        if fallback.names() != merged.space.names() {
            return Err(CliError::Data(
                "--space has different features from the inputs".into(),
            ));
        }
        for (i, row) in merged.rows.iter().enumerate() {
            let report = fallback.validate_vector(row)?;
            if let Some(v) = report.violations.first() {
                return Err(CliError::Data(format!(
                    "row {i}: `{}` = {} lies outside [{}, {}] of the requested space",
                    v.feature, v.value, v.lower, v.upper
                )));
            }
        }
        merged.space = fallback;
    }
    merged.write(&out)?;
    let mut run = RunConfig::new("merge", &out);
    for p in &inputs {
        run.input(p);
    }
    run.space = space_arg;
    run.write(&run_path_for(&out))?;
    println!(
        "merged {} datasets, {} rows, into {}",
        parts.len(),
        merged.len(),
        out.display()
    );
    Ok(())
}
