use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::parser::ValueSource;
use clap::ArgMatches;
use serde_json::json;
use ssmlab::datagen::{
    generate_dataset, load_manifest, load_split, load_xyzl, save_xyzl, shape_file_name, DatasetConfig, Downsample,
    LabeledCloud, Split,
};
use ssmlab::eval::evaluate_dataset;
use ssmlab::labeling::{run_study, transfer_labels, AggregationPolicy, AnnotationSet};
use ssmlab::mesh::{
    load_class_table, load_labels, load_mesh, save_class_table, save_labels, save_mesh, validate_cohort, MeshFormat,
};
use ssmlab::segmenter::{load_segmenter, save_segmenter, train, TrainConfig};
use ssmlab::ssm::{build_ssm, gpa_align, load_model, save_model, Retention};
use ssmlab::{exec, fixture, ClassTable, LabelMap, PipelineConfig, TriangleMesh, Workers};

use crate::args::*;
use crate::serve;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(ssmlab::Error),
    Internal(String),
}

impl From<ssmlab::Error> for CliError {
    fn from(e: ssmlab::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_data_error() => 2,
            CliError::Core(_) | CliError::Internal(_) => 3,
        }
    }

    /// One JSON object on one line.
    pub fn json_line(&self) -> String {
        let body = match self {
            CliError::Usage(m) => json!({"code": "cli.usage", "message": m}),
            CliError::Internal(m) => json!({"code": "cli.internal", "message": m}),
            CliError::Core(e @ ssmlab::Error::MissingPredictions(ids)) => {
                json!({"code": e.code(), "message": e.to_string(), "shape_ids": ids})
            }
            CliError::Core(e) => json!({"code": e.code(), "message": e.to_string()}),
        };
        json!({ "error": body }).to_string()
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn explicit(m: &ArgMatches, id: &str) -> bool {
    m.value_source(id) == Some(ValueSource::CommandLine)
}

/// Config file contents, and whether a file was given at all.
fn pipeline_config(path: &Option<PathBuf>) -> Result<(PipelineConfig, bool)> {
    match path {
        Some(p) => Ok((PipelineConfig::load(p)?, true)),
        None => Ok((PipelineConfig::default(), false)),
    }
}

// Take the flag unless a config file supplied the value and the flag was
// left at its default.
macro_rules! merge {
    ($m:expr, $from_file:expr, $id:literal, $dst:expr, $flag:expr) => {
        if !$from_file || explicit($m, $id) {
            $dst = $flag;
        }
    };
}

fn class_table(path: &Option<PathBuf>) -> Result<ClassTable> {
    Ok(match path {
        Some(p) => load_class_table(p)?,
        None => ClassTable::landmarks(),
    })
}

fn mesh_format(path: &Path) -> Result<MeshFormat> {
    MeshFormat::from_path(path)
        .ok_or_else(|| CliError::Usage(format!("{}: unknown mesh extension (expected .obj or .ply)", path.display())))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| CliError::Core(ssmlab::Error::Io { path: path.into(), source: e }))
}

fn split_of(s: SplitArg) -> Split {
    match s {
        SplitArg::Train => Split::Train,
        SplitArg::Val => Split::Val,
        SplitArg::Test => Split::Test,
    }
}

pub fn run(cli: Cli, matches: &ArgMatches) -> Result<()> {
    let sub = matches.subcommand().map(|(_, m)| m).expect("subcommand required");
    match cli.command {
        Command::Fixture(a) => cmd_fixture(a),
        Command::BuildSsm(a) => cmd_build_ssm(a, sub),
        Command::TransferLabels(a) => cmd_transfer(a),
        Command::Generate(a) => cmd_generate(a, sub),
        Command::Train(a) => cmd_train(a, sub),
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a, sub),
        Command::Study(a) => cmd_study(a),
        Command::AnnotateServe(a) => cmd_serve(a),
    }
}

fn cmd_fixture(a: FixtureArgs) -> Result<()> {
    let fx = fixture::generate(a.shapes, a.vertices, a.seed)?;
    create_dir(&a.out)?;
    let (fmt, ext) = match a.format {
        MeshFormatArg::Obj => (MeshFormat::Obj, "obj"),
        MeshFormatArg::Ply => (MeshFormat::Ply, "ply"),
    };
    for (i, m) in fx.meshes.iter().enumerate() {
        save_mesh(m, a.out.join(format!("shape_{i:03}.{ext}")), fmt)?;
    }
    save_labels(&fx.labels, a.out.join("mean_labels.csv"))?;
    save_class_table(fx.labels.classes(), a.out.join("classes.json"))?;
    println!(
        "wrote {} meshes with {} vertices, labels and class table to {}",
        fx.meshes.len(),
        fx.labels.len(),
        a.out.display()
    );
    Ok(())
}

fn collect_meshes(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| ssmlab::Error::Io { path: p.clone(), source: e })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && MeshFormat::from_path(f).is_some())
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn cmd_build_ssm(a: BuildSsmArgs, m: &ArgMatches) -> Result<()> {
    let (mut cfg, from_file) = pipeline_config(&a.config)?;
    merge!(m, from_file, "scaling", cfg.model.scaling, a.scaling);
    if let Some(f) = a.variance_fraction {
        cfg.model.retention = Retention::VarianceFraction { fraction: f };
    }
    let paths = collect_meshes(&a.inputs)?;
    if paths.len() < 2 {
        return Err(CliError::Usage(format!("need at least 2 meshes, found {}", paths.len())));
    }
    let meshes = paths
        .iter()
        .map(|p| Ok(load_mesh(p, mesh_format(p)?)?))
        .collect::<Result<Vec<TriangleMesh>>>()?;
    let cohort = validate_cohort(meshes)?;
    let aligned = gpa_align(&cohort, cfg.model.scaling)?;
    let model = build_ssm(&aligned, cfg.model.retention, cfg.model.scaling)?;
    save_model(&model, &a.out)?;
    if let Some(p) = &a.mean_mesh {
        save_mesh(&model.mean_mesh(), p, mesh_format(p)?)?;
    }
    println!(
        "model from {} shapes: {} vertices, {} modes -> {}",
        model.n_shapes(),
        model.n_vertices(),
        model.n_modes(),
        a.out.display()
    );
    Ok(())
}

fn cmd_transfer(a: TransferArgs) -> Result<()> {
    let classes = class_table(&a.classes)?;
    let n = match (&a.mesh, &a.model) {
        (Some(p), _) => load_mesh(p, mesh_format(p)?)?.n_vertices(),
        (None, Some(p)) => load_model(p)?.n_vertices(),
        (None, None) => unreachable!("clap requires one of --mesh/--model"),
    };
    let mean = load_labels(&a.labels, &classes)?.fit_to(n)?;
    let out = transfer_labels(&mean, n)?;
    save_labels(&out, &a.out)?;
    println!("transferred {} labels -> {}", n, a.out.display());
    Ok(())
}

fn cmd_generate(a: GenerateArgs, m: &ArgMatches) -> Result<()> {
    let (cfg, from_file) = pipeline_config(&a.config)?;
    let mut seed = cfg.seed;
    let mut d: DatasetConfig = cfg.dataset;
    merge!(m, from_file, "seed", seed, a.seed);
    merge!(m, from_file, "train", d.n_train, a.train);
    merge!(m, from_file, "val", d.n_val, a.val);
    merge!(m, from_file, "test", d.n_test, a.test);
    merge!(m, from_file, "points", d.n_points, a.points);
    merge!(m, from_file, "sigma_lo", d.sigma_lo, a.sigma_lo);
    merge!(m, from_file, "sigma_hi", d.sigma_hi, a.sigma_hi);
    merge!(m, from_file, "rotate_train", d.rotate.train, a.rotate_train);
    merge!(m, from_file, "rotate_val", d.rotate.val, a.rotate_val);
    merge!(m, from_file, "rotate_test", d.rotate.test, a.rotate_test);
    merge!(m, from_file, "fps_start", d.fps_start, a.fps_start);
    merge!(
        m,
        from_file,
        "downsample",
        d.downsample,
        match a.downsample {
            DownsampleArg::Fps => Downsample::Fps,
            DownsampleArg::Random => Downsample::Random,
        }
    );

    let model = load_model(&a.model)?;
    let classes = class_table(&a.classes)?;
    let labels = load_labels(&a.labels, &classes)?.fit_to(model.n_vertices())?;
    create_dir(&a.out)?;
    let manifest = generate_dataset(&model, &labels, &d, seed, &a.out, Workers::from_count(a.workers))?;
    println!(
        "generated {} train / {} val / {} test clouds of {} points -> {}",
        d.n_train,
        d.n_val,
        d.n_test,
        d.n_points,
        a.out.display()
    );
    debug_assert!(manifest.complete);
    Ok(())
}

fn cmd_train(a: TrainArgs, m: &ArgMatches) -> Result<()> {
    let (cfg, from_file) = pipeline_config(&a.config)?;
    let mut t: TrainConfig = cfg.training;
    merge!(m, from_file, "epochs", t.epochs, a.epochs);
    merge!(m, from_file, "lr", t.lr, a.lr);
    merge!(m, from_file, "batch_size", t.batch_size, a.batch_size);
    merge!(m, from_file, "seed", t.seed, a.seed);
    merge!(m, from_file, "hidden", t.hidden, a.hidden);
    merge!(m, from_file, "scales", t.scales, a.scales);
    merge!(m, from_file, "weight_cap", t.weight_cap, a.weight_cap);

    let workers = Workers::from_count(a.workers);
    let manifest = load_manifest(&a.data)?;
    let train_set = load_split(&a.data, &manifest, Split::Train, workers)?;
    let val_set = load_split(&a.data, &manifest, Split::Val, workers)?;
    let model = train(&train_set, &val_set, &manifest.classes, &t, workers)?;
    save_segmenter(&model, &a.out)?;
    let last = |v: &[f64]| v.last().map_or("n/a".to_string(), |x| format!("{x:.4}"));
    println!(
        "trained {} epochs on {} shapes: train loss {}, val loss {} -> {}",
        t.epochs,
        train_set.len(),
        last(&model.meta.train_loss),
        last(&model.meta.val_loss),
        a.out.display()
    );
    Ok(())
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let model = load_segmenter(&a.model)?;
    let workers = Workers::from_count(a.workers);
    if let (Some(input), Some(output)) = (&a.input, &a.output) {
        let cloud = load_xyzl(input, &model.classes, 0)?;
        let pred = model.predict(&cloud.cloud, workers)?;
        save_xyzl(&LabeledCloud::new(cloud.cloud, pred, 0)?, output)?;
        println!("labeled {} points -> {}", cloud.labels.len(), output.display());
        return Ok(());
    }
    let (Some(data), Some(out)) = (&a.data, &a.out) else {
        return Err(CliError::Usage("--data needs --out (or use --input/--output)".into()));
    };
    let manifest = load_manifest(data)?;
    let records: Vec<_> = manifest.split(split_of(a.split)).collect();
    create_dir(out)?;
    exec::try_map(workers, &records, |r| {
        let cloud = load_xyzl(data.join(&r.file), &manifest.classes, r.id)?;
        let pred = model.predict(&cloud.cloud, Workers::Sequential)?;
        save_xyzl(&LabeledCloud::new(cloud.cloud, pred, r.id)?, out.join(shape_file_name(r.id)))
    })?;
    println!("labeled {} clouds -> {}", records.len(), out.display());
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs, m: &ArgMatches) -> Result<()> {
    let (mut cfg, from_file) = pipeline_config(&a.config)?;
    merge!(m, from_file, "include_background", cfg.eval.include_background, a.include_background);
    let manifest = load_manifest(&a.data)?;
    let report = evaluate_dataset(
        &a.data,
        &manifest,
        split_of(a.split),
        &a.predictions,
        cfg.eval.include_background,
        Workers::from_count(a.workers),
    )?;
    print!("{}", report.to_text());
    if let Some(p) = &a.out {
        fs::write(p, report.to_json() + "\n").map_err(|e| ssmlab::Error::Io { path: p.clone(), source: e })?;
    }
    if let Some(p) = &a.csv {
        fs::write(p, report.to_csv()).map_err(|e| ssmlab::Error::Io { path: p.clone(), source: e })?;
    }
    Ok(())
}

fn sorted_entries(dir: &Path, want_dirs: bool) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| ssmlab::Error::Io { path: dir.into(), source: e })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| if want_dirs { p.is_dir() } else { p.extension().is_some_and(|e| e == "csv") })
        .collect();
    v.sort();
    Ok(v)
}

fn file_stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn cmd_study(a: StudyArgs) -> Result<()> {
    let classes = class_table(&a.classes)?;
    let truth = load_labels(&a.truth, &classes)?;
    let mut sets = Vec::new();
    for dir in sorted_entries(&a.annotations, true)? {
        let files = sorted_entries(&dir, false)?;
        let names = files.iter().map(|f| file_stem(f)).collect();
        let maps = files
            .iter()
            .map(|f| Ok(load_labels(f, &classes)?.fit_to(truth.len())?))
            .collect::<Result<Vec<LabelMap>>>()?;
        sets.push(AnnotationSet::new(file_stem(&dir), names, maps)?);
    }
    if sets.is_empty() {
        return Err(CliError::Usage(format!("{} has no shape subdirectories", a.annotations.display())));
    }
    let policy = match a.policy {
        PolicyArg::Union => AggregationPolicy::Union,
        PolicyArg::Majority => AggregationPolicy::Majority,
    };
    let truths = vec![truth; sets.len()];
    let report = run_study(&sets, &truths, policy)?;
    fs::write(&a.out, report.to_csv()).map_err(|e| ssmlab::Error::Io { path: a.out.clone(), source: e })?;
    if let Some(p) = &a.json {
        let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Internal(e.to_string()))?;
        fs::write(p, text + "\n").map_err(|e| ssmlab::Error::Io { path: p.clone(), source: e })?;
    }
    println!("overall accuracy {:.4} over {} shapes", report.overall, sets.len());
    for (c, acc) in &report.per_class {
        println!("  {} ({c}): {acc:.4}", classes.name(*c).unwrap_or("?"));
    }
    Ok(())
}

fn cmd_serve(a: ServeArgs) -> Result<()> {
    let mesh = match (&a.mesh, &a.model) {
        (Some(p), _) => load_mesh(p, mesh_format(p)?)?,
        (None, Some(p)) => load_model(p)?.mean_mesh(),
        (None, None) => unreachable!("clap requires one of --mesh/--model"),
    };
    let classes = class_table(&a.classes)?;
    let labels = match &a.labels {
        Some(p) if p.exists() => load_labels(p, &classes)?.fit_to(mesh.n_vertices())?,
        _ => LabelMap::background(mesh.n_vertices(), classes.clone()),
    };
    let save_to = a.save.clone().or(a.labels.clone());
    let session = Arc::new(serve::Session::new(mesh, classes, labels, save_to)?);
    let app = serve::router(session, a.static_dir.clone());

    let rt = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind((a.host.as_str(), a.port))
            .await
            .map_err(|e| CliError::Usage(format!("cannot bind {}:{}: {e}", a.host, a.port)))?;
        let addr = listener.local_addr().map_err(|e| CliError::Internal(e.to_string()))?;
        eprintln!("annotate-serve listening on http://{addr}");
        axum::serve(listener, app).await.map_err(|e| CliError::Internal(e.to_string()))
    })
}
