use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use paveval_core::augment::{parse_pipeline_spec, pipeline, ProvenanceEntry};
use paveval_core::autolabel::{diff_annotations, draft_labels, DiffConfig};
use paveval_core::dataset::{
    find_image_file, load_annotations, load_darknet_dir, load_dataset_dir, load_pixels,
    load_submission, load_voc_dir, split, write_darknet_dir, write_ground_truth, write_submission,
    write_voc_dir, DirFormat, SplitFractions,
};
use paveval_core::postprocess::{bundles_from, tta_emit, tta_fuse_all, TtaCopySpec};
use paveval_core::scoring::annotation_confusion;
use paveval_core::{evaluate, Dataset, DistressClass, EvalReport, ImageRecord};
use paveval_service::{serve, ServiceConfig, ServiceError};
use serde::Serialize;

use crate::{AutolabelCommand, Cli, Command, Format, QaCommand, ServeArgs, TtaCommand};

pub const TTA_SIDECAR: &str = "tta_copies.json";
pub const TTA_PREDICTIONS: &str = "predictions.json";
pub const PROVENANCE_FILE: &str = "provenance.json";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] paveval_core::Error),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        let io = match self {
            CliError::Core(e) => e.is_io(),
            CliError::Service(ServiceError::Io { .. }) => true,
            CliError::Service(ServiceError::BadSubmission(e)) => e.is_io(),
            CliError::Io { .. } => true,
            _ => false,
        };
        if io {
            2
        } else {
            1
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

fn emit<T: Serialize>(json: bool, value: &T, text: impl FnOnce() -> String) {
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(value).expect("output serializes")
        );
    } else {
        print!("{}", text());
    }
}

fn load(format: Format, path: &Path) -> Result<Dataset> {
    Ok(match format {
        Format::Voc => load_voc_dir(path, true)?,
        Format::Darknet => load_darknet_dir(path, true)?,
        Format::Submission => load_annotations(path)?,
    })
}

fn save(dataset: &Dataset, format: Format, path: &Path) -> Result<()> {
    match format {
        Format::Voc => write_voc_dir(dataset, path)?,
        Format::Darknet => write_darknet_dir(dataset, path)?,
        Format::Submission => write(path, &write_ground_truth(dataset))?,
    }
    Ok(())
}

fn dir_format(f: DirFormat) -> Format {
    match f {
        DirFormat::Voc => Format::Voc,
        DirFormat::Darknet => Format::Darknet,
    }
}

#[derive(Serialize)]
struct Summary {
    images: usize,
    annotations: usize,
}

impl Summary {
    fn of(d: &Dataset) -> Self {
        Self {
            images: d.len(),
            annotations: d.annotation_count(),
        }
    }

    fn line(&self, verb: &str, dest: &Path) -> String {
        format!(
            "{verb} {} images, {} annotations -> {}\n",
            self.images,
            self.annotations,
            dest.display()
        )
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let json = cli.json;
    match cli.command {
        Command::Convert {
            from,
            to,
            input,
            output,
        } => {
            let d = load(from, &input)?;
            save(&d, to, &output)?;
            let s = Summary::of(&d);
            emit(json, &s, || s.line("converted", &output));
        }
        Command::Split {
            input,
            output,
            fractions,
            seed,
        } => run_split(json, &input, &output, &fractions, seed)?,
        Command::Evaluate { gt, pred, iou } => {
            let report = evaluate(&load_annotations(&gt)?, &load_submission(&pred)?, iou)?;
            if json {
                println!("{}", report.to_json());
            } else {
                print!("{}", report.to_table());
            }
        }
        Command::Compare { gt, pred, iou } => {
            let gt = load_annotations(&gt)?;
            let mut reports = Vec::with_capacity(pred.len());
            for p in &pred {
                reports.push(evaluate(&gt, &load_submission(p)?, iou)?);
            }
            let names: Vec<String> = pred.iter().map(|p| p.display().to_string()).collect();
            let table = Comparison::new(&names, &reports);
            emit(json, &table, || table.to_table());
        }
        Command::Augment {
            spec,
            seed,
            multiplier,
            input,
            output,
        } => {
            let steps = parse_pipeline_spec(&read(&spec)?)?;
            let (d, format) = load_dataset_dir(&input, true)?;
            let out = pipeline(&d, &steps, seed, multiplier)?;
            let mut provenance: BTreeMap<String, Vec<ProvenanceEntry>> = BTreeMap::new();
            let mut images = Vec::with_capacity(out.len());
            for a in out {
                provenance.insert(a.image.image_id.clone(), a.provenance);
                images.push(a.image);
            }
            let augmented = Dataset::new(images)?;
            save(&augmented, dir_format(format), &output)?;
            write(
                &output.join(PROVENANCE_FILE),
                &serde_json::to_string_pretty(&provenance).expect("provenance serializes"),
            )?;
            let s = Summary::of(&augmented);
            emit(json, &s, || s.line("augmented", &output));
        }
        Command::Tta { command } => run_tta(json, command)?,
        Command::Autolabel { command } => run_autolabel(json, command)?,
        Command::Qa {
            command:
                QaCommand::Confusion {
                    reference,
                    candidate,
                    iou,
                },
        } => {
            let agreement = annotation_confusion(
                &load_annotations(&reference)?,
                &load_annotations(&candidate)?,
                iou,
            )?;
            emit(json, &agreement, || {
                format!(
                    "{}accuracy {:.6}%\n",
                    agreement.confusion.to_table(),
                    agreement.accuracy_percent
                )
            });
        }
        Command::Serve(args) => run_serve(args)?,
    }
    Ok(())
}

fn parse_fractions(s: &str) -> Result<SplitFractions> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("bad --fractions {s:?}: {e}")))?;
    let [a, b, c] = parts[..] else {
        return Err(CliError::Usage(format!(
            "--fractions needs three values, got {}",
            parts.len()
        )));
    };
    Ok(SplitFractions::new(a, b, c)?)
}

fn run_split(json: bool, input: &Path, output: &Path, fractions: &str, seed: u64) -> Result<()> {
    let fractions = parse_fractions(fractions)?;
    let (d, format) = load_dataset_dir(input, true)?;
    let (a, b, c) = split(&d, fractions, seed)?;
    let mut counts = BTreeMap::new();
    for (name, part) in [("train1", &a), ("train2", &b), ("test", &c)] {
        save(part, dir_format(format), &output.join(name))?;
        counts.insert(name, Summary::of(part));
    }
    emit(json, &counts, || {
        let mut s = String::new();
        for (name, c) in &counts {
            let _ = writeln!(
                s,
                "{name:<7} {:>6} images {:>7} annotations",
                c.images, c.annotations
            );
        }
        s
    });
    Ok(())
}

/// Images of a directory: a labeled VOC/DarkNet dataset when labels exist,
/// otherwise every raster as an unannotated record.
fn load_images(dir: &Path) -> Result<Dataset> {
    let (labeled, _) = load_dataset_dir(dir, true)?;
    if !labeled.is_empty() {
        return Ok(labeled);
    }
    let mut stems: Vec<String> = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            if find_image_file(dir, stem).as_deref() == Some(path.as_path()) {
                stems.push(stem.to_string());
            }
        }
    }
    stems.sort();
    let records = stems
        .into_iter()
        .map(|stem| {
            let path = find_image_file(dir, &stem).expect("listed above");
            Ok(ImageRecord::with_pixels(stem, load_pixels(&path)?, vec![])?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset::new(records)?)
}

fn run_tta(json: bool, command: TtaCommand) -> Result<()> {
    match command {
        TtaCommand::Emit {
            input,
            output,
            seed,
        } => {
            let d = load_images(&input)?;
            let copies = tta_emit(&d, seed)?;
            fs::create_dir_all(&output).map_err(io_err(&output))?;
            let mut specs = Vec::with_capacity(copies.len());
            for (img, spec) in copies {
                let px = img.require_pixels()?;
                paveval_core::dataset::save_pixels(
                    px,
                    &output.join(format!("{}.png", img.image_id)),
                )?;
                specs.push(spec);
            }
            write(
                &output.join(TTA_SIDECAR),
                &serde_json::to_string_pretty(&specs).expect("specs serialize"),
            )?;
            #[derive(Serialize)]
            struct Emitted {
                images: usize,
                copies: usize,
            }
            let e = Emitted {
                images: d.len(),
                copies: specs.len(),
            };
            emit(json, &e, || {
                format!(
                    "emitted {} copies of {} images -> {}\n",
                    e.copies,
                    e.images,
                    output.display()
                )
            });
        }
        TtaCommand::Fuse {
            bundle,
            pred,
            conf,
            nms_iou,
            output,
        } => {
            let sidecar = bundle.join(TTA_SIDECAR);
            let specs: Vec<TtaCopySpec> =
                serde_json::from_str(&read(&sidecar)?).map_err(|e| paveval_core::Error::Parse {
                    source_name: sidecar.display().to_string(),
                    line: Some(e.line()),
                    message: e.to_string(),
                })?;
            let pred = pred.unwrap_or_else(|| bundle.join(TTA_PREDICTIONS));
            let bundles = bundles_from(&specs, &load_submission(&pred)?)?;
            let fused = tta_fuse_all(&bundles, conf, nms_iou)?;
            let text = write_submission(&fused);
            match output {
                Some(path) => write(&path, &text)?,
                None => println!("{text}"),
            }
        }
    }
    Ok(())
}

fn run_autolabel(json: bool, command: AutolabelCommand) -> Result<()> {
    match command {
        AutolabelCommand::Draft {
            pred,
            conf,
            images,
            output,
            format,
        } => {
            let preds = load_submission(&pred)?;
            let sizes = match images {
                Some(dir) => {
                    let mut sizes = BTreeMap::new();
                    for id in preds.keys() {
                        if let Some(path) = find_image_file(&dir, id) {
                            let wh = image::image_dimensions(&path)
                                .map_err(|source| paveval_core::Error::Image { path, source })?;
                            sizes.insert(id.clone(), wh);
                        }
                    }
                    Some(sizes)
                }
                None => None,
            };
            let d = draft_labels(&preds, conf, sizes.as_ref())?;
            save(&d, format, &output)?;
            let s = Summary::of(&d);
            emit(json, &s, || s.line("drafted", &output));
        }
        AutolabelCommand::Diff {
            draft,
            corrected,
            match_iou,
            keep_iou,
        } => {
            let cfg = DiffConfig {
                match_iou,
                keep_iou,
            };
            let stats = diff_annotations(
                &load_annotations(&draft)?,
                &load_annotations(&corrected)?,
                &cfg,
            )?;
            emit(json, &stats, || stats.to_table());
        }
    }
    Ok(())
}

fn run_serve(args: ServeArgs) -> Result<()> {
    let config = ServiceConfig {
        ground_truth: args.gt,
        teams: args.teams,
        addr: args.addr,
        data_dir: args.data,
    };
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(io_err(Path::new("tokio runtime")))?;
    rt.block_on(serve(config))?;
    Ok(())
}

/// Per-class F1 of several reports, with differences against the first.
#[derive(Debug, Serialize)]
pub struct Comparison {
    pub files: Vec<String>,
    pub rows: Vec<ComparisonRow>,
}

#[derive(Debug, Serialize)]
pub struct ComparisonRow {
    pub name: String,
    pub f1: Vec<f64>,
    /// `f1[i] - f1[0]` for every file after the first.
    pub delta: Vec<f64>,
}

impl Comparison {
    pub fn new(files: &[String], reports: &[EvalReport]) -> Self {
        let row = |name: &str, f1: Vec<f64>| ComparisonRow {
            name: name.to_string(),
            delta: f1.iter().skip(1).map(|v| v - f1[0]).collect(),
            f1,
        };
        let mut rows: Vec<ComparisonRow> = DistressClass::ALL
            .iter()
            .map(|&c| row(c.name(), reports.iter().map(|r| r.class(c).f1).collect()))
            .collect();
        rows.push(row("mean_f1", reports.iter().map(|r| r.mean_f1).collect()));
        Self {
            files: files.to_vec(),
            rows,
        }
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        for (i, f) in self.files.iter().enumerate() {
            let _ = writeln!(s, "[{}] {f}", i + 1);
        }
        let _ = write!(s, "{:<13}", "class");
        for i in 1..=self.files.len() {
            let _ = write!(s, " {:>10}", format!("[{i}]"));
        }
        for i in 2..=self.files.len() {
            let _ = write!(s, " {:>10}", format!("[{i}]-[1]"));
        }
        s.push('\n');
        for r in &self.rows {
            let _ = write!(s, "{:<13}", r.name);
            for v in &r.f1 {
                let _ = write!(s, " {v:>10.6}");
            }
            for d in &r.delta {
                let _ = write!(s, " {d:>+10.6}");
            }
            s.push('\n');
        }
        s
    }
}
