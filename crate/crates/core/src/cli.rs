//! Command-line front end.
//!
//! Settings resolve as built-in defaults, then `--config` (JSON), then flags.
//! A seed missing from both falls back to `POLARKIT_SEED`, then 0.
//! Exit codes: 0 ok, 2 usage or validation, 3 runtime.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::Error;
use crate::format::sig6;
use crate::kernel::{is_prime, permutation_kernel, reed_solomon_kernel, standard_kernel, Kernel, Permutation};
use crate::polar::{genie_reliabilities, select_information_set, PolarCodeConfig, StageAssignment};
use crate::search::{optimize_pam3_shift, optimize_quad_rotation, search_permutations, SearchOptions};
use crate::signal_set::SignalSet;
use crate::sim::{
    overlay_bounds, parse_snr_grid, simulate_bad_channel, simulate_fer, simulate_good_channel, Construction,
    SimOptions, SimResult,
};
use crate::channel::ChannelParams;
use crate::spectrum::{bad_spectrum, bound_curve, good_spectrum, report, ChannelRole, DistanceSpectrum};

pub const SEED_ENV: &str = "POLARKIT_SEED";
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

const DEFAULT_TRIALS: u64 = 100_000;
const DEFAULT_CAMPAIGN: &str = "polarkit";

#[derive(Parser, Debug)]
#[command(name = "polarkit", version, about = "Non-binary polar codes with equidistant polarizing kernels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print a signal set, or design one of the equidistant sets.
    Signalset(SignalsetArgs),
    /// Print a kernel table.
    Kernel(KernelArgs),
    /// One-step distance spectrum of a kernel over a signal set.
    Spectrum(SpectrumArgs),
    /// Union bound over an SNR grid.
    Bound(BoundArgs),
    /// Exhaustive search over permutation kernels.
    Search(SearchArgs),
    /// Monte Carlo SER of the one-step good or bad channel.
    Simulate(SimulateArgs),
    /// Genie-aided reliabilities of a polar code.
    Construct(ConstructArgs),
    /// Frame error rate of a polar code under SC decoding.
    Fer(FerArgs),
}

#[derive(Args, Debug, Default, Clone)]
pub struct Common {
    /// JSON document with default settings.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output file, or directory for campaign files.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Emit JSON instead of CSV.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug, Default, Clone)]
pub struct KernelSel {
    /// Permutation `π` of `u1 + π(u2)`, e.g. `0,2,4,1,3` or `identity`.
    #[arg(long)]
    pub pi: Option<String>,
    /// Multiplier of `u1 + γ·u2` (prime q only).
    #[arg(long)]
    pub gamma: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Design {
    Quad,
    Pam3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    /// The kernel at every stage.
    Uniform,
    /// The kernel at the channel stage, standard elsewhere.
    ChannelStage,
}

#[derive(Args, Debug)]
pub struct SignalsetArgs {
    /// Preset (`psk:<q>`, `quad-eq`, `pam3-eq`) or JSON file.
    #[arg(long)]
    pub set: Option<String>,
    /// Solve for an equidistant set instead of loading one.
    #[arg(long)]
    pub design: Option<Design>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct KernelArgs {
    /// Alphabet size; taken from `--set` or `--pi` when omitted.
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub set: Option<String>,
    #[command(flatten)]
    pub kernel: KernelSel,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub set: Option<String>,
    #[command(flatten)]
    pub kernel: KernelSel,
    #[arg(long)]
    pub role: Option<ChannelRole>,
    /// Reference `u1,u2`; defaults to the worst reference.
    #[arg(long)]
    pub reference: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct BoundArgs {
    #[arg(long)]
    pub set: Option<String>,
    #[command(flatten)]
    pub kernel: KernelSel,
    #[arg(long)]
    pub role: Option<ChannelRole>,
    /// `start:stop:step` in dB, or a single value.
    #[arg(long = "snr-db", allow_hyphen_values = true)]
    pub snr_db: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct SearchArgs {
    #[arg(long)]
    pub set: Option<String>,
    /// List every optimal permutation.
    #[arg(long)]
    pub all_optima: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub set: Option<String>,
    #[command(flatten)]
    pub kernel: KernelSel,
    #[arg(long)]
    pub role: Option<ChannelRole>,
    #[arg(long = "snr-db", allow_hyphen_values = true)]
    pub snr_db: Option<String>,
    /// Trial budget per SNR point.
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Stop a point after this many errors.
    #[arg(long)]
    pub early_stop: Option<u64>,
    /// Name used for `<campaign>.<role>.csv` when `--out` is a directory.
    #[arg(long)]
    pub campaign: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct ConstructArgs {
    #[arg(long)]
    pub set: Option<String>,
    #[command(flatten)]
    pub kernel: KernelSel,
    #[arg(long)]
    pub placement: Option<Placement>,
    /// Number of stages; N = 2^n.
    #[arg(short = 'n', long = "stages")]
    pub n: Option<usize>,
    /// Information symbols; adds the frozen set to the output.
    #[arg(short = 'k', long = "info")]
    pub k: Option<usize>,
    #[arg(long = "snr-db", allow_hyphen_values = true)]
    pub snr_db: Option<String>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct FerArgs {
    #[arg(long)]
    pub set: Option<String>,
    #[command(flatten)]
    pub kernel: KernelSel,
    #[arg(long)]
    pub placement: Option<Placement>,
    #[arg(short = 'n', long = "stages")]
    pub n: Option<usize>,
    /// Information symbols (default N/2).
    #[arg(short = 'k', long = "info")]
    pub k: Option<usize>,
    #[arg(long = "snr-db", allow_hyphen_values = true)]
    pub snr_db: Option<String>,
    #[arg(long)]
    pub trials: Option<u64>,
    /// Genie trials per construction (default: `--trials`).
    #[arg(long)]
    pub construct_trials: Option<u64>,
    /// Construct once at this SNR instead of at every point.
    #[arg(long, allow_hyphen_values = true)]
    pub construct_snr_db: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub early_stop: Option<u64>,
    #[arg(long)]
    pub campaign: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum PiSpec {
    Text(String),
    Image(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum SnrSpec {
    Grid(String),
    Single(f64),
    List(Vec<f64>),
}

/// Declarative settings shared by every subcommand. Fields a subcommand does
/// not use are ignored; unknown fields are rejected.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub set: Option<String>,
    pub pi: Option<PiSpec>,
    pub gamma: Option<usize>,
    pub q: Option<usize>,
    pub role: Option<ChannelRole>,
    pub reference: Option<[usize; 2]>,
    pub snr_db: Option<SnrSpec>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub json: Option<bool>,
    pub all_optima: Option<bool>,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub placement: Option<Placement>,
    pub design: Option<Design>,
    pub early_stop: Option<u64>,
    pub construct_trials: Option<u64>,
    pub construct_snr_db: Option<f64>,
    pub campaign: Option<String>,
}

impl CampaignConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("--config: cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::usage(format!("--config: {}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_RUNTIME,
            message: message.into(),
        }
    }

    /// Attributes a library error to `flag`.
    fn at(flag: &str, e: Error) -> Self {
        let code = match e {
            Error::SearchTooLarge { .. } | Error::Io(_) => EXIT_RUNTIME,
            _ => EXIT_USAGE,
        };
        CliError {
            code,
            message: format!("{flag}: {e}"),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Settings after merging the config document.
struct Ctx {
    cfg: CampaignConfig,
    threads: Option<usize>,
    out: Option<PathBuf>,
    json: bool,
}

impl Ctx {
    fn new(common: &Common) -> CliResult<Self> {
        let cfg = match &common.config {
            Some(p) => CampaignConfig::load(p)?,
            None => CampaignConfig::default(),
        };
        let threads = common.threads.or(cfg.threads);
        if threads == Some(0) {
            return Err(CliError::usage("--threads: must be at least 1"));
        }
        Ok(Ctx {
            threads,
            out: common.out.clone().or_else(|| cfg.out.clone()),
            json: common.json || cfg.json.unwrap_or(false),
            cfg,
        })
    }

    fn set(&self, flag: &Option<String>) -> CliResult<SignalSet> {
        let spec = flag
            .clone()
            .or_else(|| self.cfg.set.clone())
            .ok_or_else(|| CliError::usage("--set: required (flag or config)"))?;
        load_set(&spec)
    }

    fn kernel(&self, sel: &KernelSel, q: usize, notes: &mut Vec<String>) -> CliResult<Kernel> {
        let pi = sel.pi.clone().or_else(|| {
            self.cfg.pi.as_ref().map(|p| match p {
                PiSpec::Text(t) => t.clone(),
                PiSpec::Image(v) => v.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
            })
        });
        let gamma = sel.gamma.or(self.cfg.gamma);
        build_kernel(q, pi.as_deref(), gamma, notes)
    }

    fn role(&self, flag: Option<ChannelRole>) -> ChannelRole {
        flag.or(self.cfg.role).unwrap_or(ChannelRole::Good)
    }

    fn snr(&self, flag: &Option<String>) -> CliResult<Vec<f64>> {
        let at = |e| CliError::at("--snr-db", e);
        match (flag, &self.cfg.snr_db) {
            (Some(text), _) => parse_snr_grid(text).map_err(at),
            (None, Some(SnrSpec::Grid(text))) => parse_snr_grid(text).map_err(at),
            (None, Some(SnrSpec::Single(v))) => Ok(vec![*v]),
            (None, Some(SnrSpec::List(v))) if !v.is_empty() => Ok(v.clone()),
            (None, Some(SnrSpec::List(_))) => Err(CliError::usage("--snr-db: empty list")),
            (None, None) => Err(CliError::usage("--snr-db: required (flag or config)")),
        }
    }

    fn trials(&self, flag: Option<u64>) -> CliResult<u64> {
        let t = flag.or(self.cfg.trials).unwrap_or(DEFAULT_TRIALS);
        if t == 0 {
            return Err(CliError::usage("--trials: must be at least 1"));
        }
        Ok(t)
    }

    fn seed(&self, flag: Option<u64>) -> CliResult<u64> {
        if let Some(s) = flag.or(self.cfg.seed) {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| CliError::usage(format!("--seed: {SEED_ENV}=`{v}` is not an unsigned integer"))),
            Err(_) => Ok(0),
        }
    }

    fn early_stop(&self, flag: Option<u64>) -> CliResult<Option<u64>> {
        match flag.or(self.cfg.early_stop) {
            Some(0) => Err(CliError::usage("--early-stop: must be at least 1")),
            v => Ok(v),
        }
    }

    fn stages(&self, flag: Option<usize>) -> CliResult<usize> {
        let n = flag
            .or(self.cfg.n)
            .ok_or_else(|| CliError::usage("--stages: required (flag or config)"))?;
        if !(1..=24).contains(&n) {
            return Err(CliError::usage(format!("--stages: {n} is outside 1..=24")));
        }
        Ok(n)
    }

    fn assignment(&self, flag: Option<Placement>, kernel: Kernel) -> StageAssignment {
        match flag.or(self.cfg.placement).unwrap_or(Placement::ChannelStage) {
            Placement::Uniform => StageAssignment::Uniform(kernel),
            Placement::ChannelStage => StageAssignment::ChannelStageOnly(kernel),
        }
    }

    fn campaign(&self, flag: &Option<String>) -> String {
        flag.clone()
            .or_else(|| self.cfg.campaign.clone())
            .unwrap_or_else(|| DEFAULT_CAMPAIGN.to_string())
    }
}

fn load_set(spec: &str) -> CliResult<SignalSet> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("--set: cannot read {spec}: {e}")))?;
        return serde_json::from_str(&text).map_err(|e| CliError::usage(format!("--set: {spec}: {e}")));
    }
    SignalSet::from_preset(spec).map_err(|e| CliError::at("--set", e))
}

fn build_kernel(q: usize, pi: Option<&str>, gamma: Option<usize>, notes: &mut Vec<String>) -> CliResult<Kernel> {
    match (pi, gamma) {
        (Some(_), Some(_)) => Err(CliError::usage("--pi: cannot be combined with --gamma")),
        (Some(text), None) => {
            let p = Permutation::parse_with_q(text, q).map_err(|e| CliError::at("--pi", e))?;
            Ok(permutation_kernel(&p))
        }
        (None, Some(g)) => {
            let k = reed_solomon_kernel(q, g).map_err(|e| CliError::at("--gamma", e))?;
            if !is_prime(g) {
                notes.push(format!(
                    "note: gamma={g} is not prime; the kernel only needs gamma invertible mod {q}"
                ));
            }
            Ok(k)
        }
        (None, None) => standard_kernel(q).map_err(|e| CliError::at("--set", e)),
    }
}

fn parse_reference(text: &str, q: usize) -> CliResult<(usize, usize)> {
    let bad = || CliError::usage(format!("--reference: expected `u1,u2` below q={q}, got `{text}`"));
    let (a, b) = text.split_once(',').ok_or_else(bad)?;
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a >= q || b >= q {
        return Err(bad());
    }
    Ok((a, b))
}

/// Where and what to write.
struct Output<'a> {
    stdout: &'a mut dyn Write,
    notes: Vec<String>,
}

impl Output<'_> {
    /// Writes `body` to `--out` (a file, or `default_name` inside a
    /// directory) or to stdout.
    fn emit(&mut self, ctx: &Ctx, body: &str, default_name: &str) -> CliResult<()> {
        match &ctx.out {
            Some(path) => {
                let target = if path.is_dir() {
                    path.join(default_name)
                } else {
                    path.clone()
                };
                std::fs::write(&target, body)
                    .map_err(|e| CliError::runtime(format!("--out: cannot write {}: {e}", target.display())))
            }
            None => self
                .stdout
                .write_all(body.as_bytes())
                .map_err(|e| CliError::runtime(format!("cannot write output: {e}"))),
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("output types serialize");
    s.push('\n');
    s
}

fn points_csv(set: &SignalSet) -> String {
    let mut s = String::from(if set.dimension() == 1 { "label,x\n" } else { "label,x,y\n" });
    for (i, p) in set.points().enumerate() {
        let coords: Vec<String> = p.iter().map(|&c| sig6(c)).collect();
        s.push_str(&format!("{i},{}\n", coords.join(",")));
    }
    s
}

fn spectrum_csv(s: &DistanceSpectrum) -> String {
    let mut out = String::from("d_over_sqrtEs,count\n");
    for l in s.entries() {
        out.push_str(&format!("{},{}\n", sig6(l.d()), l.count));
    }
    out
}

fn run_signalset(a: &SignalsetArgs, out: &mut Output<'_>) -> CliResult<()> {
    let ctx = Ctx::new(&a.common)?;
    let set = match a.design.or(ctx.cfg.design) {
        Some(Design::Quad) => {
            let (x, set) = optimize_quad_rotation();
            out.notes.push(format!("rotation |s0-s1| = {}", sig6(x)));
            set
        }
        Some(Design::Pam3) => {
            let (r, set) = optimize_pam3_shift();
            out.notes.push(format!("gap ratio beta/alpha = {}", sig6(r)));
            set
        }
        None => ctx.set(&a.set)?,
    };
    let body = if ctx.json { to_json(&set) } else { points_csv(&set) };
    out.emit(&ctx, &body, if ctx.json { "signalset.json" } else { "signalset.csv" })
}

fn run_kernel(a: &KernelArgs, out: &mut Output<'_>) -> CliResult<()> {
    let ctx = Ctx::new(&a.common)?;
    let pi_len = a
        .kernel
        .pi
        .as_deref()
        .filter(|p| *p != "identity")
        .map(|p| p.split(',').count());
    let q = match (a.q.or(ctx.cfg.q), a.set.as_ref().or(ctx.cfg.set.as_ref())) {
        (Some(q), _) => q,
        (None, Some(_)) => ctx.set(&a.set)?.q(),
        (None, None) => pi_len.ok_or_else(|| CliError::usage("--q: required when neither --set nor --pi gives it"))?,
    };
    let k = ctx.kernel(&a.kernel, q, &mut out.notes)?;
    let body = if ctx.json {
        to_json(&k)
    } else {
        k.rows()
            .iter()
            .map(|r| r.iter().map(usize::to_string).collect::<Vec<_>>().join(",") + "\n")
            .collect()
    };
    out.emit(&ctx, &body, if ctx.json { "kernel.json" } else { "kernel.csv" })
}

/// Spectrum at `reference`, or at the worst reference.
fn spectrum_for(
    set: &SignalSet,
    k: &Kernel,
    role: ChannelRole,
    reference: Option<(usize, usize)>,
) -> CliResult<DistanceSpectrum> {
    match reference {
        Some((u1, u2)) => match role {
            ChannelRole::Good => good_spectrum(set, k, u1, u2),
            ChannelRole::Bad => bad_spectrum(set, k, u1, u2),
        }
        .map_err(|e| CliError::at("--reference", e)),
        None => report(set, k, role)
            .map(|r| r.worst().clone())
            .map_err(|e| CliError::at("--pi", e)),
    }
}

fn run_spectrum(a: &SpectrumArgs, out: &mut Output<'_>) -> CliResult<()> {
    let ctx = Ctx::new(&a.common)?;
    let set = ctx.set(&a.set)?;
    let k = ctx.kernel(&a.kernel, set.q(), &mut out.notes)?;
    let reference = match (&a.reference, ctx.cfg.reference) {
        (Some(t), _) => Some(parse_reference(t, set.q())?),
        (None, Some([u1, u2])) => Some(parse_reference(&format!("{u1},{u2}"), set.q())?),
        (None, None) => None,
    };
    let s = spectrum_for(&set, &k, ctx.role(a.role), reference)?;
    let body = if ctx.json { to_json(&s) } else { spectrum_csv(&s) };
    out.emit(&ctx, &body, if ctx.json { "spectrum.json" } else { "spectrum.csv" })
}

fn run_bound(a: &BoundArgs, out: &mut Output<'_>) -> CliResult<()> {
    let ctx = Ctx::new(&a.common)?;
    let set = ctx.set(&a.set)?;
    let k = ctx.kernel(&a.kernel, set.q(), &mut out.notes)?;
    let snr = ctx.snr(&a.snr_db)?;
    let s = spectrum_for(&set, &k, ctx.role(a.role), None)?;
    let curve = bound_curve(&s, &snr);
    let body = if ctx.json {
        let points: Vec<_> = curve.iter().map(|(x, b)| json!({"snr_db": x, "pe_bound": b})).collect();
        to_json(&json!({"spectrum": s, "points": points}))
    } else {
        let mut t = String::from("snr_db,pe_bound\n");
        for (x, b) in &curve {
            t.push_str(&format!("{},{}\n", sig6(*x), sig6(*b)));
        }
        t
    };
    out.emit(&ctx, &body, if ctx.json { "bound.json" } else { "bound.csv" })
}

fn run_search(a: &SearchArgs, out: &mut Output<'_>) -> CliResult<()> {
    let ctx = Ctx::new(&a.common)?;
    let set = ctx.set(&a.set)?;
    let opts = SearchOptions {
        all_optima: a.all_optima || ctx.cfg.all_optima.unwrap_or(false),
        threads: ctx.threads,
    };
    let r = search_permutations(&set, opts).map_err(|e| CliError::at("--set", e))?;
    out.emit(&ctx, &to_json(&r), "search.json")
}

fn write_sim(ctx: &Ctx, r: &SimResult, campaign: &str, out: &mut Output<'_>) -> CliResult<()> {
    let csv_name = r.csv_file_name(campaign);
    if ctx.json {
        let name = csv_name.trim_end_matches(".csv").to_string() + ".json";
        out.emit(ctx, &to_json(r), &name)
    } else {
        out.emit(ctx, &r.to_csv(), &csv_name)
    }
}

fn run_simulate(a: &SimulateArgs, out: &mut Output<'_>) -> CliResult<()> {
    let ctx = Ctx::new(&a.common)?;
    let set = ctx.set(&a.set)?;
    let k = ctx.kernel(&a.kernel, set.q(), &mut out.notes)?;
    let role = ctx.role(a.role);
    let snr = ctx.snr(&a.snr_db)?;
    let opts = SimOptions {
        trials: ctx.trials(a.trials)?,
        seed: ctx.seed(a.seed)?,
        early_stop_errors: ctx.early_stop(a.early_stop)?,
        threads: ctx.threads,
    };
    let r = match role {
        ChannelRole::Good => simulate_good_channel(&set, &k, &snr, &opts),
        ChannelRole::Bad => simulate_bad_channel(&set, &k, &snr, &opts),
    }
    .map_err(|e| CliError::at("--snr-db", e))?;
    let s = spectrum_for(&set, &k, role, None)?;
    let r = overlay_bounds(&r, &s).map_err(|e| CliError::at("--role", e))?;
    write_sim(&ctx, &r, &ctx.campaign(&a.campaign), out)
}

fn run_construct(a: &ConstructArgs, out: &mut Output<'_>) -> CliResult<()> {
    let ctx = Ctx::new(&a.common)?;
    let set = ctx.set(&a.set)?;
    let k = ctx.kernel(&a.kernel, set.q(), &mut out.notes)?;
    let n = ctx.stages(a.n)?;
    let assignment = ctx.assignment(a.placement, k);
    let mut cfg = PolarCodeConfig::with_assignment(set, n, &assignment, vec![]).map_err(|e| CliError::at("--stages", e))?;
    let snr = ctx.snr(&a.snr_db)?;
    if snr.len() != 1 {
        return Err(CliError::usage("--snr-db: construction takes a single SNR"));
    }
    let params = ChannelParams::for_set(cfg.set(), snr[0]).map_err(|e| CliError::at("--snr-db", e))?;
    let rel = genie_reliabilities(&cfg, &params, ctx.trials(a.trials)?, ctx.seed(a.seed)?, 0, ctx.threads)
        .map_err(|e| CliError::at("--trials", e))?;
    if let Some(k) = a.k.or(ctx.cfg.k) {
        let frozen = select_information_set(&rel.error_rate, k).map_err(|e| CliError::at("--info", e))?;
        cfg.set_frozen(frozen).map_err(|e| CliError::at("--info", e))?;
    }
    let body = if ctx.json {
        to_json(&json!({"config": cfg, "snr_db": snr[0], "reliabilities": rel}))
    } else {
        let mut t = String::from("index,error_rate,stderr\n");
        for i in 0..rel.error_rate.len() {
            t.push_str(&format!("{i},{},{}\n", sig6(rel.error_rate[i]), sig6(rel.stderr[i])));
        }
        t
    };
    out.emit(&ctx, &body, if ctx.json { "construct.json" } else { "construct.csv" })
}

fn run_fer(a: &FerArgs, out: &mut Output<'_>) -> CliResult<()> {
    let ctx = Ctx::new(&a.common)?;
    let set = ctx.set(&a.set)?;
    let k = ctx.kernel(&a.kernel, set.q(), &mut out.notes)?;
    let n = ctx.stages(a.n)?;
    let assignment = ctx.assignment(a.placement, k);
    let cfg = PolarCodeConfig::with_assignment(set, n, &assignment, vec![]).map_err(|e| CliError::at("--stages", e))?;
    let info = a.k.or(ctx.cfg.k).unwrap_or(cfg.block_len() / 2);
    if info > cfg.block_len() {
        return Err(CliError::usage(format!("--info: K={info} exceeds N={}", cfg.block_len())));
    }
    let snr = ctx.snr(&a.snr_db)?;
    let trials = ctx.trials(a.trials)?;
    let construct_trials = a.construct_trials.or(ctx.cfg.construct_trials).unwrap_or(trials);
    if construct_trials == 0 {
        return Err(CliError::usage("--construct-trials: must be at least 1"));
    }
    let construction = Construction {
        trials: construct_trials,
        snr_db: a.construct_snr_db.or(ctx.cfg.construct_snr_db),
    };
    let opts = SimOptions {
        trials,
        seed: ctx.seed(a.seed)?,
        early_stop_errors: ctx.early_stop(a.early_stop)?,
        threads: ctx.threads,
    };
    let r = simulate_fer(&cfg, info, &snr, &opts, Some(construction)).map_err(|e| CliError::at("--snr-db", e))?;
    write_sim(&ctx, &r, &ctx.campaign(&a.campaign), out)
}

fn dispatch(cli: &Cli, out: &mut Output<'_>) -> CliResult<()> {
    match &cli.command {
        Command::Signalset(a) => run_signalset(a, out),
        Command::Kernel(a) => run_kernel(a, out),
        Command::Spectrum(a) => run_spectrum(a, out),
        Command::Bound(a) => run_bound(a, out),
        Command::Search(a) => run_search(a, out),
        Command::Simulate(a) => run_simulate(a, out),
        Command::Construct(a) => run_construct(a, out),
        Command::Fer(a) => run_fer(a, out),
    }
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the exit code. Notes and errors go to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind::{DisplayHelp, DisplayVersion};
            let text = e.render().to_string();
            return if matches!(e.kind(), DisplayHelp | DisplayVersion) {
                let _ = stdout.write_all(text.as_bytes());
                EXIT_OK
            } else {
                let _ = stderr.write_all(text.as_bytes());
                EXIT_USAGE
            };
        }
    };
    let mut out = Output {
        stdout,
        notes: Vec::new(),
    };
    let result = dispatch(&cli, &mut out);
    for n in &out.notes {
        let _ = writeln!(stderr, "{n}");
    }
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message);
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("polarkit").chain(args.iter().copied()), &mut o, &mut e);
        (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
    }

    #[test]
    fn kernel_q_from_pi() {
        let (code, out, _) = run_str(&["kernel", "--pi", "0,2,1"]);
        assert_eq!(code, 0);
        assert_eq!(out, "0,2,1\n1,0,2\n2,1,0\n");
    }

    #[test]
    fn gamma_note_for_composite() {
        let (code, _, err) = run_str(&["kernel", "--q", "5", "--gamma", "4"]);
        assert_eq!(code, 0);
        assert!(err.contains("not prime"), "{err}");
        let (code, _, err) = run_str(&["kernel", "--q", "5", "--gamma", "3"]);
        assert_eq!(code, 0);
        assert!(err.is_empty());
    }

    #[test]
    fn pi_and_gamma_conflict() {
        let (code, _, err) = run_str(&["spectrum", "--set", "psk:5", "--pi", "0,2,4,1,3", "--gamma", "2"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("--pi"));
    }

    #[test]
    fn reference_parsing() {
        assert_eq!(parse_reference("1, 2", 3).unwrap(), (1, 2));
        assert!(parse_reference("1,3", 3).is_err());
        assert!(parse_reference("12", 3).is_err());
    }
}
