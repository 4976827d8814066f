//! Command-line front end. Every invocation writes a run manifest next to its output.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::composition::{compose_sequence, ComposeMode, GateWithError};
use crate::correction::{cz_corrections, parse_set, suggest_correction};
use crate::error::{invalid, Error, Result};
use crate::error_matrix::{coherent_split, convert_convention, kraus_decompose, to_error_matrix, Convention, ErrorMatrix, SplitVariant};
use crate::gates;
use crate::io::{self, *};
use crate::linalg::Mat;
use crate::lindblad::{self, AnalyticChannel, FirstOrderOptions};
use crate::pauli_basis;
use crate::process_matrix::{chi_from_kraus, chi_from_unitary, ProcessMatrix};
use crate::spam::{identify_spam, identify_spam_subset, spam_fidelity_ratio, subtract_spam, SpamModel, SubtractMode};
use crate::tomo_harness::{self, ExtractionRoute, GateSource, Reconstruction, Shots, TomographySetup};

pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(name = "chi", version, about = "Process and error matrices for quantum process tomography")]
pub struct Cli {
    /// Overrides every validation tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Worker threads for trajectory and tomography simulation.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Manifest path; defaults to `<output>.manifest.json` or `chi-manifest.json`.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Process matrix of a unitary.
    FromUnitary(FromUnitary),
    /// Process matrix of a Kraus set.
    FromKraus {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        allow_non_tp: bool,
    },
    /// Closed-form decoherence channels.
    Analytic(AnalyticArgs),
    /// Error matrix of a process matrix relative to a desired unitary.
    ToErr {
        #[arg(long)]
        chi: PathBuf,
        #[command(flatten)]
        unitary: UnitaryArg,
        #[arg(long, default_value = "after")]
        convention: String,
    },
    /// Operations on error matrices.
    Err {
        #[command(subcommand)]
        op: ErrOp,
    },
    /// Composes gates with errors in time order.
    Compose {
        #[arg(long, default_value = "exact")]
        mode: String,
        /// Gate files, or a single file holding an array of gates.
        files: Vec<PathBuf>,
    },
    /// Suggests a unitary correction.
    Correct {
        #[arg(long)]
        err: PathBuf,
        #[arg(long)]
        set: Option<String>,
        /// CZ phase corrections instead of the generic plan.
        #[arg(long)]
        cz: bool,
        /// With --cz, also corrects the controlled-phase angle.
        #[arg(long)]
        cz_angle: bool,
    },
    /// Lindblad schedules.
    Lindblad {
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long, default_value = "exact")]
        mode: String,
        #[arg(long, default_value = "after")]
        convention: String,
        #[arg(long, default_value_t = 100_000)]
        ntraj: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        second_order: bool,
    },
    /// SPAM identification and subtraction.
    Spam {
        #[command(subcommand)]
        op: SpamOp,
    },
    /// Simulated tomography.
    Tomo {
        #[command(subcommand)]
        op: TomoOp,
    },
    /// Summary of an error matrix.
    Report {
        #[arg(long)]
        err: PathBuf,
        #[arg(long)]
        set: Option<String>,
    },
    /// CSV export of a process or error matrix.
    Plot {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Args, Debug)]
pub struct UnitaryArg {
    /// Built-in gate name.
    #[arg(long)]
    pub gate: Option<String>,
    /// Unitary JSON file.
    #[arg(long)]
    pub unitary: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FromUnitary {
    #[arg(long)]
    pub gate: Option<String>,
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AnalyticArgs {
    #[arg(long)]
    pub kind: String,
    #[arg(long, default_value_t = 0.0)]
    pub t: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t1: f64,
    /// `E/T`; `inf` for zero temperature.
    #[arg(long, default_value = "inf")]
    pub e_over_t: String,
    #[arg(long, default_value_t = 1.0)]
    pub cos_avg: f64,
    #[arg(long, default_value_t = 0.0)]
    pub sin_avg: f64,
}

#[derive(Subcommand, Debug)]
pub enum ErrOp {
    Convert {
        #[arg(long)]
        err: PathBuf,
    },
    Kraus {
        #[arg(long)]
        err: PathBuf,
    },
    Split {
        #[arg(long)]
        err: PathBuf,
        #[arg(long, default_value = "lambda0")]
        variant: String,
    },
}

#[derive(Subcommand, Debug)]
pub enum SpamOp {
    Identify {
        #[arg(long)]
        cal: PathBuf,
        #[arg(long)]
        subset_size: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    Subtract {
        #[arg(long)]
        err: PathBuf,
        #[arg(long)]
        spam: PathBuf,
        #[arg(long, default_value = "full")]
        mode: String,
    },
    Ratio {
        #[arg(long)]
        f_exp: f64,
        #[arg(long)]
        f_identity: f64,
    },
}

#[derive(Args, Debug)]
pub struct ChannelArg {
    #[arg(long)]
    pub chi: Option<PathBuf>,
    #[arg(long)]
    pub gate: Option<String>,
    #[arg(long)]
    pub schedule: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum TomoOp {
    Simulate {
        #[command(flatten)]
        channel: ChannelArg,
        #[arg(long)]
        spam: Option<PathBuf>,
        #[arg(long, default_value = "inf")]
        shots: String,
        #[arg(long)]
        seed: Option<u64>,
    },
    Reconstruct {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        project: bool,
    },
    Run {
        #[command(flatten)]
        channel: ChannelArg,
        /// Desired gate name, defaults to --gate.
        #[arg(long)]
        desired: Option<String>,
        #[arg(long)]
        spam: Option<PathBuf>,
        #[arg(long, default_value = "inf")]
        shots: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "after")]
        convention: String,
        #[arg(long, default_value = "chi")]
        route: String,
    },
}

#[derive(Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct RunManifest {
    command: Vec<String>,
    inputs: Vec<InputDigest>,
    seed: Option<u64>,
    tool_version: &'static str,
    started_unix: u64,
    wall_clock_seconds: f64,
    exit_code: i32,
}

struct Ctx {
    inputs: Vec<PathBuf>,
    seed: Option<u64>,
}

impl Ctx {
    fn read<T: serde::de::DeserializeOwned>(&mut self, p: &Path) -> Result<T> {
        self.inputs.push(p.to_path_buf());
        io::read_json(p)
    }

    fn seed(&mut self, flag: Option<u64>) -> Result<u64> {
        let s = match flag {
            Some(s) => s,
            None => match std::env::var("CHI_SEED") {
                Ok(v) => v.trim().parse().map_err(|_| Error::Validation(format!("CHI_SEED={v:?} is not an integer")))?,
                Err(_) => 0,
            },
        };
        self.seed = Some(s);
        Ok(s)
    }
}

fn parse_convention(s: &str) -> Result<Convention> {
    match s {
        "after" => Ok(Convention::ErrorAfter),
        "before" => Ok(Convention::ErrorBefore),
        other => Convention::parse(other),
    }
}

fn parse_e_over_t(s: &str) -> Result<f64> {
    match s {
        "inf" | "infinity" => Ok(f64::INFINITY),
        _ => s.parse().map_err(|_| Error::Validation(format!("bad E/T value {s:?}"))),
    }
}

fn pretty<T: Serialize>(v: &T) -> Result<String> {
    io::to_json_text(v)
}

fn load_unitary(ctx: &mut Ctx, arg: &UnitaryArg) -> Result<Mat> {
    match (&arg.gate, &arg.unitary) {
        (Some(g), None) => gates::by_name(g),
        (None, Some(p)) => ctx.read::<UnitaryJson>(p)?.into_model(),
        _ => invalid("give exactly one of --gate or --unitary"),
    }
}

fn load_err(ctx: &mut Ctx, p: &Path) -> Result<ErrorMatrix> {
    ctx.read::<ErrorMatrixJson>(p)?.into_model()
}

fn load_channel(ctx: &mut Ctx, arg: &ChannelArg) -> Result<GateSource> {
    match (&arg.chi, &arg.gate, &arg.schedule) {
        (Some(p), None, None) => Ok(GateSource::Channel(ctx.read::<ProcessMatrixJson>(p)?.into_model()?)),
        (None, Some(g), None) => Ok(GateSource::Unitary(gates::by_name(g)?)),
        (None, None, Some(p)) => Ok(GateSource::Schedule(ctx.read::<ScheduleJson>(p)?.into_model()?)),
        _ => invalid("give exactly one of --chi, --gate or --schedule"),
    }
}

fn load_spam(ctx: &mut Ctx, p: &Option<PathBuf>, n: usize) -> Result<SpamModel> {
    match p {
        Some(p) => ctx.read::<SpamModelJson>(p)?.into_model(),
        None => Ok(SpamModel::trivial(n)),
    }
}

fn csv(chi: &ProcessMatrix) -> String {
    let mut s = String::from("row,col,re,im,magnitude\n");
    let n = chi.n_qubits;
    for m in 0..chi.d2() {
        for k in 0..chi.d2() {
            let z = chi.entries[(m, k)];
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                pauli_basis::label(m, n),
                pauli_basis::label(k, n),
                z.re,
                z.im,
                z.norm()
            ));
        }
    }
    s
}

/// CSV with one row per element in canonical order.
pub fn emit_plot_data(chi: &ProcessMatrix, path: &Path) -> Result<()> {
    std::fs::write(path, csv(chi))?;
    Ok(())
}

fn report(err: &ErrorMatrix, set: Option<&str>) -> Result<serde_json::Value> {
    let n = err.n_qubits();
    let d2 = err.chi.d2();
    let split = coherent_split(err, SplitVariant::Lambda0)?;
    let mut peaks: Vec<(usize, usize, f64)> =
        (0..d2).flat_map(|m| (m..d2).map(move |k| (m, k))).map(|(m, k)| (m, k, err.chi.entries[(m, k)].norm())).collect();
    peaks.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let peaks: Vec<_> = peaks
        .iter()
        .take(10)
        .map(|&(m, k, _)| {
            let z = err.chi.entries[(m, k)];
            json!({"row": pauli_basis::label(m, n), "col": pauli_basis::label(k, n), "value": [z.re, z.im]})
        })
        .collect();
    let set = match set {
        Some(s) => parse_set(s)?,
        None => (1..d2).collect(),
    };
    let correction = match suggest_correction(err, &set) {
        Ok(plan) => {
            let coefficients: Vec<_> = set
                .iter()
                .map(|&k| json!({"label": pauli_basis::label(k, n), "u": [plan.u_corr[k].re, plan.u_corr[k].im]}))
                .collect();
            json!({"coefficients": coefficients, "predicted_gain": plan.predicted_gain})
        }
        Err(e @ Error::Numerical(_)) => json!({"unavailable": e.to_string()}),
        Err(e) => return Err(e),
    };
    Ok(json!({
        "convention": err.convention.as_str(),
        "fidelity": err.fidelity(),
        "unitary_error": split.unitary_error,
        "decoherence_error": split.decoherence_error,
        "split_warning": split.warning,
        "top_peaks": peaks,
        "suggested_correction": correction,
    }))
}

fn run(cli: &Cli, ctx: &mut Ctx) -> Result<String> {
    match &cli.command {
        Command::FromUnitary(a) => {
            let u = match (&a.gate, &a.input) {
                (Some(g), None) => gates::by_name(g)?,
                (None, Some(p)) => ctx.read::<UnitaryJson>(p)?.into_model()?,
                _ => return invalid("give exactly one of --gate or --input"),
            };
            pretty(&ProcessMatrixJson::from(&chi_from_unitary(&u)?))
        }
        Command::FromKraus { input, allow_non_tp } => {
            let terms = ctx.read::<KrausJson>(input)?.into_model()?;
            pretty(&ProcessMatrixJson::from(&chi_from_kraus(&terms, *allow_non_tp)?))
        }
        Command::Analytic(a) => {
            let e = parse_e_over_t(&a.e_over_t)?;
            let kind = match a.kind.as_str() {
                "dephasing" => AnalyticChannel::Dephasing { cos_avg: a.cos_avg, sin_avg: a.sin_avg },
                "relaxation" => AnalyticChannel::Relaxation { t: a.t, t1: a.t1, e_over_t: e },
                "combined" => AnalyticChannel::Combined { t: a.t, t1: a.t1, e_over_t: e, cos_avg: a.cos_avg },
                "short-time" => AnalyticChannel::ShortTime { t: a.t, t1: a.t1, e_over_t: e, cos_avg: a.cos_avg },
                "cz-fluctuation" => AnalyticChannel::CzAngleFluctuation { cos_avg: a.cos_avg },
                k => return invalid(format!("unknown channel kind {k:?}")),
            };
            pretty(&ProcessMatrixJson::from(&lindblad::analytic_channel(kind)?))
        }
        Command::ToErr { chi, unitary, convention } => {
            let chi = ctx.read::<ProcessMatrixJson>(chi)?.into_model()?;
            let u = load_unitary(ctx, unitary)?;
            pretty(&ErrorMatrixJson::from(&to_error_matrix(&chi, &u, parse_convention(convention)?)?))
        }
        Command::Err { op } => match op {
            ErrOp::Convert { err } => pretty(&ErrorMatrixJson::from(&convert_convention(&load_err(ctx, err)?)?)),
            ErrOp::Kraus { err } => {
                let k = kraus_decompose(&load_err(ctx, err)?)?;
                let ops: Vec<_> = (0..k.weights.len())
                    .map(|i| json!({"weight": k.weights[i], "matrix": matrix_to_json(&k.operator_matrix(i))}))
                    .collect();
                pretty(&json!({"n_qubits": k.n_qubits, "operators": ops}))
            }
            ErrOp::Split { err, variant } => {
                let v = match variant.as_str() {
                    "lambda0" => SplitVariant::Lambda0,
                    "simplified" => SplitVariant::Simplified,
                    _ => return invalid(format!("unknown split variant {variant:?}")),
                };
                let s = coherent_split(&load_err(ctx, err)?, v)?;
                pretty(&json!({
                    "lambda0": s.lambda0,
                    "unitary_error": s.unitary_error,
                    "decoherence_error": s.decoherence_error,
                    "warning": s.warning,
                    "chi_coh": ProcessMatrixJson::from(&s.chi_coh),
                    "chi_dec": ProcessMatrixJson::from(&s.chi_dec),
                }))
            }
        },
        Command::Compose { mode, files } => {
            let mode = ComposeMode::parse(mode)?;
            let mut gates_in: Vec<GateWithError> = Vec::new();
            for f in files {
                let v: serde_json::Value = ctx.read(f)?;
                if v.is_array() {
                    for g in serde_json::from_value::<Vec<GateWithErrorJson>>(v)? {
                        gates_in.push(g.into_model()?);
                    }
                } else {
                    gates_in.push(serde_json::from_value::<GateWithErrorJson>(v)?.into_model()?);
                }
            }
            pretty(&GateWithErrorJson::from(&compose_sequence(&gates_in, mode)?))
        }
        Command::Correct { err, set, cz, cz_angle } => {
            let err = load_err(ctx, err)?;
            if *cz {
                let c = cz_corrections(&err, *cz_angle)?;
                return pretty(&json!({
                    "phi1": c.phi1, "phi2": c.phi2, "phi_cz": c.phi_cz, "phi3": c.phi3(),
                    "predicted_gain": c.predicted_gain, "warning": c.warning,
                    "unitary": matrix_to_json(&c.unitary()),
                }));
            }
            let set = match set {
                Some(s) => parse_set(s)?,
                None => (1..err.chi.d2()).collect(),
            };
            let p = suggest_correction(&err, &set)?;
            let n = p.n_qubits;
            pretty(&json!({
                "placement": match p.placement { crate::correction::Placement::AfterGate => "after", _ => "before" },
                "set": p.correctable_set.iter().map(|&k| pauli_basis::label(k, n)).collect::<Vec<_>>(),
                "u_corr": p.u_corr.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
                "predicted_gain": p.predicted_gain,
                "unitary": matrix_to_json(&p.unitary),
            }))
        }
        Command::Lindblad { schedule, mode, convention, ntraj, seed, second_order } => {
            let s = ctx.read::<ScheduleJson>(schedule)?.into_model()?;
            let conv = parse_convention(convention)?;
            match mode.as_str() {
                "exact" => pretty(&ErrorMatrixJson::from(&lindblad::exact_error_matrix(&s, conv)?)),
                "first-order" => pretty(&ErrorMatrixJson::from(&lindblad::first_order_error_with(
                    &s,
                    conv,
                    FirstOrderOptions { second_order_patch: *second_order },
                )?)),
                "trajectories" => {
                    let seed = ctx.seed(*seed)?;
                    let chi = lindblad::trajectory_channel_estimate(&s, *ntraj, seed)?;
                    pretty(&ErrorMatrixJson::from(&to_error_matrix(&chi, &s.unitary(), conv)?))
                }
                m => invalid(format!("unknown mode {m:?}")),
            }
        }
        Command::Spam { op } => match op {
            SpamOp::Identify { cal, subset_size, seed } => {
                let cal = ctx.read::<CalibrationSetJson>(cal)?.into_model()?;
                let id = match subset_size {
                    Some(k) => {
                        let seed = ctx.seed(*seed)?;
                        identify_spam_subset(&cal, seed, *k)?
                    }
                    None => identify_spam(&cal)?,
                };
                let v = id.model.validity(1e-10);
                pretty(&json!({
                    "spam": SpamModelJson::from(&id.model),
                    "residual": id.residual,
                    "gates": id.labels,
                    "negative_eigenvalues": {"prep": v.prep_negative, "meas": v.meas_negative},
                }))
            }
            SpamOp::Subtract { err, spam, mode } => {
                let e = load_err(ctx, err)?;
                let s = ctx.read::<SpamModelJson>(spam)?.into_model()?;
                let out = subtract_spam(&e, &s, SubtractMode::parse(mode)?)?;
                for w in &out.warnings {
                    eprintln!("warning: {w}");
                }
                pretty(&ErrorMatrixJson::from(&out.err))
            }
            SpamOp::Ratio { f_exp, f_identity } => {
                let (r, w) = spam_fidelity_ratio(*f_exp, *f_identity)?;
                pretty(&json!({"fidelity": r, "warning": w}))
            }
        },
        Command::Tomo { op } => match op {
            TomoOp::Simulate { channel, spam, shots, seed } => {
                let chi = load_channel(ctx, channel)?.channel()?;
                let setup = TomographySetup::new(chi.n_qubits, Shots::parse(shots)?)?;
                let spam = load_spam(ctx, spam, chi.n_qubits)?;
                let seed = ctx.seed(*seed)?;
                pretty(&DatasetJson::from(&tomo_harness::simulate_dataset(&chi, &spam, &setup, seed)?))
            }
            TomoOp::Reconstruct { dataset, project } => {
                let data = ctx.read::<DatasetJson>(dataset)?.into_model()?;
                let setup = TomographySetup::new(data.n_qubits, data.shots)?;
                let mode = if *project { Reconstruction::Projected } else { Reconstruction::LinearInversion };
                pretty(&ProcessMatrixJson::from(&tomo_harness::reconstruct_chi_with(&data, &setup, mode)?))
            }
            TomoOp::Run { channel, desired, spam, shots, seed, convention, route } => {
                let gate = load_channel(ctx, channel)?;
                let u_des = match (desired, &gate) {
                    (Some(g), _) => gates::by_name(g)?,
                    (None, GateSource::Unitary(u)) => u.clone(),
                    (None, GateSource::Schedule(s)) => s.unitary(),
                    (None, GateSource::Channel(_)) => return invalid("--desired is required with --chi"),
                };
                let Some(n) = crate::linalg::qubits_for_dim(u_des.nrows()) else {
                    return invalid("desired unitary is not a qubit gate");
                };
                let setup = TomographySetup::new(n, Shots::parse(shots)?)?;
                let spam = load_spam(ctx, spam, n)?;
                let seed = ctx.seed(*seed)?;
                let route = match route.as_str() {
                    "chi" => ExtractionRoute::TransformChi,
                    "rho" => ExtractionRoute::TransformRho,
                    r => return invalid(format!("unknown route {r:?}")),
                };
                let err = tomo_harness::run_qpt_experiment(&gate, &u_des, &spam, &setup, seed, parse_convention(convention)?, route)?;
                pretty(&ErrorMatrixJson::from(&err))
            }
        },
        Command::Report { err, set } => pretty(&report(&load_err(ctx, err)?, set.as_deref())?),
        Command::Plot { input } => {
            let v: serde_json::Value = ctx.read(input)?;
            let chi = if v.get("reference_unitary").is_some() {
                serde_json::from_value::<ErrorMatrixJson>(v)?.into_model()?.chi
            } else {
                serde_json::from_value::<ProcessMatrixJson>(v)?.into_model()?
            };
            Ok(csv(&chi))
        }
    }
}

fn digest(p: &Path) -> String {
    match std::fs::read(p) {
        Ok(bytes) => Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect(),
        Err(_) => String::new(),
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    crate::tol::set_override(cli.tol);
    if let Some(n) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let mut ctx = Ctx { inputs: Vec::new(), seed: None };
    let result = run(&cli, &mut ctx).and_then(|text| {
        match &cli.output {
            Some(p) => std::fs::write(p, text)?,
            None => print!("{text}"),
        }
        Ok(())
    });
    let code = match &result {
        Ok(()) => 0,
        Err(e) => {
            let body = json!({"error": e.kind(), "message": e.to_string(), "exit_code": e.exit_code()});
            eprintln!("{body}");
            e.exit_code()
        }
    };
    let manifest = RunManifest {
        command: argv.iter().map(|a| a.to_string_lossy().into_owned()).collect(),
        inputs: ctx
            .inputs
            .iter()
            .map(|p| InputDigest { path: p.display().to_string(), sha256: digest(p) })
            .collect(),
        seed: ctx.seed,
        tool_version: env!("CARGO_PKG_VERSION"),
        started_unix,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        exit_code: code,
    };
    let path = cli.manifest.clone().unwrap_or_else(|| match &cli.output {
        Some(o) => {
            let mut s = o.clone().into_os_string();
            s.push(".manifest.json");
            PathBuf::from(s)
        }
        None => PathBuf::from("chi-manifest.json"),
    });
    if let Ok(text) = pretty(&manifest) {
        if let Err(e) = std::fs::write(&path, text) {
            eprintln!("{}", json!({"error": "io", "message": format!("manifest: {e}")}));
        }
    }
    crate::tol::set_override(None);
    code
}
