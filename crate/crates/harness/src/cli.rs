//! Command line front end.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use subsnake_core::synth::{generate, Shape};
use subsnake_core::{jaccard_distance, ControlPolygon, Mask, OptimizerConfig, Point, Polarity, SnakeOptimizer, Status};

use crate::error::{HarnessError, Result};
use crate::formats::{self, circle_polygon, parse_alpha, parse_box, parse_circle, parse_scheme, PolygonFile};
use crate::io::{load_gray, load_mask, save_gray, save_mask};
use crate::setup::{Setup, TableCache};

#[derive(Debug, Parser)]
#[command(name = "subsnake", version, about = "Subdivision-curve snake segmentation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a snake to an image and write polygon, trace, boundary and mask.
    Segment(SegmentArgs),
    /// Write a synthetic image and its ground-truth mask.
    Synth(SynthArgs),
    /// Jaccard distance between two masks.
    Eval(EvalArgs),
    /// Run the HTTP session service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolarityArg {
    Dark,
    Bright,
}

impl From<PolarityArg> for Polarity {
    fn from(p: PolarityArg) -> Self {
        match p {
            PolarityArg::Dark => Polarity::DarkObject,
            PolarityArg::Bright => Polarity::BrightObject,
        }
    }
}

#[derive(Debug, Clone, Args)]
#[command(group(ArgGroup::new("initial").required(true).args(["init", "init_circle"])))]
pub struct SegmentArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// four-point or cubic-bspline.
    #[arg(long, default_value = formats::FOUR_POINT)]
    pub scheme: String,
    /// Four-point tension.
    #[arg(long)]
    pub omega: Option<f64>,
    /// Polygon JSON file.
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// row,col,radius,count
    #[arg(long)]
    pub init_circle: Option<String>,
    /// fixed:V, two-phase or two-phase:A1,A2
    #[arg(long, default_value = "two-phase")]
    pub alpha: String,
    #[arg(long, default_value_t = 4)]
    pub depth: u32,
    /// r0,r1,c0,c1 (inclusive); defaults to the whole image.
    #[arg(long = "box")]
    pub region: Option<String>,
    #[arg(long, value_enum, default_value_t = PolarityArg::Dark)]
    pub polarity: PolarityArg,
    /// Derivative filter half-width; defaults from the image size.
    #[arg(long)]
    pub filter_halfwidth: Option<usize>,
    #[arg(long, default_value_t = OptimizerConfig::default().max_iters)]
    pub max_iters: usize,
    #[arg(long, default_value_t = OptimizerConfig::default().grad_tol)]
    pub grad_tol: f64,
    /// Pixels.
    #[arg(long, default_value_t = OptimizerConfig::default().step_tol)]
    pub step_tol: f64,
    /// Ground-truth mask; adds the Jaccard distance to the summary.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

impl SegmentArgs {
    pub fn setup(&self) -> Result<Setup> {
        let config = OptimizerConfig {
            schedule: parse_alpha(&self.alpha)?,
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            step_tol: self.step_tol,
            ..OptimizerConfig::default()
        };
        Ok(Setup {
            depth: self.depth,
            region: self.region.as_deref().map(parse_box).transpose()?,
            polarity: self.polarity.into(),
            filter_halfwidth: self.filter_halfwidth,
            config,
        })
    }

    pub fn initial_polygon(&self) -> Result<ControlPolygon> {
        let scheme = parse_scheme(&self.scheme, self.omega)?;
        match (&self.init, &self.init_circle) {
            (Some(path), None) => {
                let file = read_polygon(path)?;
                if file.scheme()? != scheme {
                    return Err(HarnessError::invalid("initial polygon file uses a different scheme"));
                }
                file.to_control()
            }
            (None, Some(c)) => {
                let c = parse_circle(c)?;
                circle_polygon(scheme, c.center, c.radius, c.count)
            }
            _ => Err(HarnessError::invalid("give exactly one of --init and --init-circle")),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// disc:ROW,COL,R | ellipse:ROW,COL,RROW,RCOL | curve:POLYGON.json
    #[arg(long)]
    pub shape: String,
    #[arg(long, default_value_t = 256)]
    pub rows: usize,
    #[arg(long, default_value_t = 256)]
    pub cols: usize,
    #[arg(long, default_value_t = 30.0)]
    pub fg: f64,
    #[arg(long, default_value_t = 220.0)]
    pub bg: f64,
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: String,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSummary {
    pub scheme: String,
    pub status: String,
    pub iterations: usize,
    pub energy: f64,
    pub e_grad: f64,
    pub e_reg: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jaccard: Option<f64>,
}

pub const POLYGON_FILE: &str = "polygon.json";
pub const TRACE_FILE: &str = "trace.jsonl";
pub const BOUNDARY_FILE: &str = "boundary.csv";
pub const MASK_FILE: &str = "mask.png";
pub const SUMMARY_FILE: &str = "summary.json";

pub fn read_polygon(path: &Path) -> Result<PolygonFile> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

/// Runs to a terminal status and writes the output directory.
pub fn segment(args: &SegmentArgs, cache: &TableCache) -> Result<SegmentSummary> {
    let image = load_gray(&args.image)?;
    let init = args.initial_polygon()?;
    let mut opt = args.setup()?.start(&image, &init, cache)?;
    while opt.step() == Status::Running {}
    let truth = args.truth.as_deref().map(load_mask).transpose()?;
    write_outputs(&opt, truth.as_ref(), &args.out)
}

/// Final polygon, trace, boundary pixels, filled mask and summary of `opt`.
pub fn write_outputs(opt: &SnakeOptimizer, truth: Option<&Mask>, dir: &Path) -> Result<SegmentSummary> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let model = opt.model();
    let raster = model.raster(&model.sample(opt.polygon().vertices()))?;
    let mask = raster.fill_mask();
    let jaccard = truth.map(|t| jaccard_distance(&mask, t)).transpose()?;
    let current = opt.current();
    let summary = SegmentSummary {
        scheme: formats::scheme_name(opt.polygon().scheme()).to_owned(),
        status: formats::status_name(opt.status()).to_owned(),
        iterations: opt.iterations(),
        energy: current.value,
        e_grad: current.e_grad,
        e_reg: current.e_reg,
        jaccard,
    };
    write(&dir.join(POLYGON_FILE), serde_json::to_string_pretty(&PolygonFile::from_control(opt.polygon()))? + "\n")?;
    write(&dir.join(TRACE_FILE), formats::trace_jsonl(opt.records())?)?;
    write(&dir.join(BOUNDARY_FILE), formats::boundary_csv(raster.pixels()))?;
    save_mask(&mask, &dir.join(MASK_FILE))?;
    write(&dir.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(summary)
}

pub fn parse_shape(s: &str) -> Result<Shape> {
    let (kind, rest) = s.split_once(':').ok_or_else(|| HarnessError::invalid(format!("bad shape {s:?}")))?;
    let nums = |n: usize| -> Result<Vec<f64>> {
        let v: Vec<f64> = rest.split(',').map(|t| t.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| HarnessError::invalid(format!("bad shape {s:?}")))?;
        if v.len() == n {
            Ok(v)
        } else {
            Err(HarnessError::invalid(format!("shape {kind} takes {n} numbers")))
        }
    };
    match kind {
        "disc" => {
            let v = nums(3)?;
            Ok(Shape::Disc { center: Point::new(v[0], v[1]), radius: v[2] })
        }
        "ellipse" => {
            let v = nums(4)?;
            Ok(Shape::Ellipse { center: Point::new(v[0], v[1]), row_radius: v[2], col_radius: v[3] })
        }
        "curve" => Ok(Shape::Curve(read_polygon(Path::new(rest))?.to_control()?)),
        _ => Err(HarnessError::invalid(format!("unknown shape {kind:?}"))),
    }
}

/// Returns the number of pixels in the mask.
pub fn synth(args: &SynthArgs) -> Result<usize> {
    let (image, mask) = generate(&parse_shape(&args.shape)?, args.rows, args.cols, args.fg, args.bg)?;
    save_gray(&image, &args.image)?;
    save_mask(&mask, &args.mask)?;
    Ok(mask.count())
}

pub fn eval(args: &EvalArgs) -> Result<f64> {
    Ok(jaccard_distance(&load_mask(&args.mask)?, &load_mask(&args.truth)?)?)
}

/// Runs one command, printing its result on stdout.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Segment(args) => {
            let summary = segment(&args, &TableCache::new())?;
            println!("{}", serde_json::to_string(&summary)?);
        }
        Command::Synth(args) => {
            let count = synth(&args)?;
            println!("{count}");
        }
        Command::Eval(args) => println!("{}", eval(&args)?),
        Command::Serve(args) => crate::server::serve_blocking(&args.bind)?,
    }
    Ok(())
}
