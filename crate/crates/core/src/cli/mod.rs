//! The `deltakit` command-line front end.
//!
//! Exit codes: 0 success or property holds, 1 legitimate negative answer
//! (nothing found, verification failed, property false), 2 input or usage
//! error, 3 an exhaustive cap was exceeded.
//!
//! Default caps may be overridden through `DELTAKIT_CAP_<NAME>` environment
//! variables (for example `DELTAKIT_CAP_EXACT_FAMILY=16`) and per run with
//! `--cap name=value`.

pub mod codec;

use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::doubledelta::{
    extract_double_delta, find_double_delta_exact, verify_double_delta, ConditionReport,
    DoubleDeltaCertificate, DoubleFamily, ExtractionParams,
};
use crate::error::Error;
use crate::gen::{gen_double_family, gen_family, gen_instance, gen_space, GenParams};
use crate::precal::{has_centeredness_property, has_linked_property, PropertyQuery};
use crate::setfam::{
    find_delta_system_er, find_delta_system_exact, find_largest_delta_system, verify_delta_system,
    DeltaSystemCertificate, IndexedFamily,
};
use crate::topo::{boxes_centered, is_centered, FiniteSpace, ProductInstance};
use crate::witness::{run_pipeline, PipelineParams};
use crate::Caps;

pub use codec::{emit_report, parse_instance, CodecError, Document, Mode, FORMAT_VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_CAP: i32 = 3;

type CapField = fn(&mut Caps) -> &mut usize;

const CAP_NAMES: [(&str, CapField); 6] = [
    ("exact-family", |c| &mut c.exact_family),
    ("double-exact-sets", |c| &mut c.double_exact_sets),
    ("double-exact-blocks", |c| &mut c.double_exact_blocks),
    ("property-basis", |c| &mut c.property_basis),
    ("property-n", |c| &mut c.property_n),
    ("selection-points", |c| &mut c.selection_points),
];

fn env_name(cap: &str) -> String {
    format!("DELTAKIT_CAP_{}", cap.replace('-', "_").to_uppercase())
}

fn parse_cap(s: &str) -> Result<(String, usize), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=value, got {s:?}"))?;
    if !CAP_NAMES.iter().any(|(n, _)| *n == name) {
        let known: Vec<_> = CAP_NAMES.iter().map(|(n, _)| *n).collect();
        return Err(format!(
            "unknown cap {name:?} (known: {})",
            known.join(", ")
        ));
    }
    let value = value.parse().map_err(|e| format!("cap {name}: {e}"))?;
    Ok((name.to_string(), value))
}

#[derive(Debug, Parser)]
#[command(
    name = "deltakit",
    version,
    about = "Delta-system extraction and witness construction"
)]
pub struct Cli {
    /// Worker threads for the parallel stages (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Accept unknown input fields instead of rejecting them.
    #[arg(long, global = true)]
    pub lax: bool,
    /// Expected input format version.
    #[arg(long, global = true, default_value_t = FORMAT_VERSION)]
    pub format_version: u64,
    /// Override an exhaustive cap, e.g. `--cap exact-family=16`.
    #[arg(long = "cap", global = true, value_name = "NAME=VALUE", value_parser = parse_cap)]
    pub caps: Vec<(String, usize)>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Input {
    /// Input JSON file, `-` for standard input.
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct Targets {
    /// Blocks required in the double delta-system.
    #[arg(short = 's', long, default_value_t = 2)]
    pub blocks: usize,
    /// Sets required per block.
    #[arg(short = 't', long, default_value_t = 2)]
    pub per_block: usize,
    /// Use the exhaustive oracle instead of the constructive extractor.
    #[arg(long)]
    pub oracle: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    Family,
    DoubleFamily,
    Space,
    Instance,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find a delta-system in a family.
    ExtractDelta {
        #[command(flatten)]
        input: Input,
        /// Required size; without it the largest delta-system is returned.
        #[arg(short = 'r', long)]
        size: Option<usize>,
        /// Use the exhaustive oracle instead of the constructive recursion.
        #[arg(long)]
        oracle: bool,
    },
    /// Find a double delta-system in a block-indexed family.
    ExtractDoubleDelta {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        targets: Targets,
    },
    /// Check a delta-system or double delta-system certificate.
    Verify {
        #[command(flatten)]
        input: Input,
    },
    /// Check that opens of a space, or boxes of an instance, have a common point.
    Centered {
        #[command(flatten)]
        input: Input,
    },
    /// Decide the (n, k)-centeredness or linkedness property of a space.
    Property {
        #[command(flatten)]
        input: Input,
        #[arg(short = 'n', long)]
        n: usize,
        #[arg(short = 'k', long)]
        k: usize,
        /// Check linkedness instead of centeredness.
        #[arg(long)]
        linked: bool,
    },
    /// Run the witness pipeline on a product instance.
    Pipeline {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        targets: Targets,
        #[arg(long, default_value_t = 2)]
        kernel_target: usize,
        #[arg(long, default_value_t = 2)]
        block_target: usize,
        #[arg(long, default_value_t = 0)]
        shift: usize,
        #[arg(long, default_value_t = 4)]
        subset_cap: usize,
    },
    /// Generate a seeded random input document.
    Gen {
        kind: GenKind,
        /// Generator parameters (JSON); defaults apply when omitted.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Cap(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Input(_) => EXIT_INPUT,
            Failure::Cap(_) => EXIT_CAP,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Cap(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::CapExceeded { .. } => Failure::Cap(e.to_string()),
            other => Failure::Input(other.to_string()),
        }
    }
}

impl From<CodecError> for Failure {
    fn from(e: CodecError) -> Self {
        Failure::Input(e.to_string())
    }
}

/// A verb's JSON answer and whether it is a positive one.
struct Outcome {
    body: Vec<u8>,
    positive: bool,
}

impl Outcome {
    fn new<T: Serialize>(value: &T, positive: bool) -> Self {
        Outcome {
            body: emit_report(value),
            positive,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct DeltaVerifyInput {
    family: IndexedFamily,
    certificate: DeltaSystemCertificate,
}

#[derive(Serialize, Deserialize)]
struct DoubleVerifyInput {
    double_family: DoubleFamily,
    certificate: DoubleDeltaCertificate,
}

#[derive(Serialize, Deserialize)]
struct SpaceOpens {
    space: FiniteSpace,
    opens: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct InstanceBoxes {
    instance: ProductInstance,
    indices: Vec<usize>,
}

#[derive(Serialize)]
struct CertificateOutput<'a, C> {
    certificate: Option<&'a C>,
}

#[derive(Serialize)]
struct DeltaVerifyOutput {
    valid: bool,
}

#[derive(Serialize)]
struct DoubleVerifyOutput<'a> {
    report: &'a ConditionReport,
}

#[derive(Serialize)]
struct CenteredOutput {
    centered: bool,
}

#[derive(Serialize)]
struct PropertyOutput {
    property: &'static str,
    n: usize,
    k: usize,
    holds: bool,
    counterexample: Option<Vec<usize>>,
}

struct Context {
    mode: Mode,
    format_version: u64,
    caps: Caps,
}

impl Context {
    fn read(&self, path: &PathBuf) -> Result<Vec<u8>, Failure> {
        let mut buf = Vec::new();
        let res = if path.as_os_str() == "-" {
            std::io::stdin().read_to_end(&mut buf).map(|_| ())
        } else {
            std::fs::read(path).map(|b| buf = b)
        };
        res.map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
        Ok(buf)
    }

    fn load<T: DeserializeOwned + Serialize>(&self, path: &PathBuf) -> Result<T, Failure> {
        let bytes = self.read(path)?;
        Ok(parse_instance::<T>(&bytes, self.mode)?.into_inner())
    }

    /// Peeks at the top-level keys to pick between two input shapes.
    fn has_key(&self, bytes: &[u8], key: &str) -> Result<bool, Failure> {
        let v: Value = serde_json::from_slice(bytes).map_err(|e| CodecError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Ok(v.get(key).is_some())
    }

    fn dispatch(&self, command: &Command) -> Result<Outcome, Failure> {
        match command {
            Command::ExtractDelta {
                input,
                size,
                oracle,
            } => {
                let family: IndexedFamily = self.load(&input.input)?;
                let cert = match (size, oracle) {
                    (None, _) => find_largest_delta_system(&family, self.caps.exact_family),
                    (Some(r), true) => {
                        find_delta_system_exact(&family, *r, self.caps.exact_family)?
                    }
                    (Some(r), false) => {
                        if *r < 2 {
                            return Err(Error::DegenerateSize(*r).into());
                        }
                        find_delta_system_er(&family, *r)
                    }
                };
                let found = cert.is_some();
                Ok(Outcome::new(
                    &CertificateOutput {
                        certificate: cert.as_ref(),
                    },
                    found,
                ))
            }
            Command::ExtractDoubleDelta { input, targets } => {
                let dfam: DoubleFamily = self.load(&input.input)?;
                let params = ExtractionParams::new(targets.blocks, targets.per_block)?;
                let cert = if targets.oracle {
                    find_double_delta_exact(&dfam, &params, &self.caps)?
                } else {
                    extract_double_delta(&dfam, &params, &self.caps)
                };
                let found = cert.is_some();
                Ok(Outcome::new(
                    &CertificateOutput {
                        certificate: cert.as_ref(),
                    },
                    found,
                ))
            }
            Command::Verify { input } => {
                let bytes = self.read(&input.input)?;
                if self.has_key(&bytes, "double_family")? {
                    let doc: DoubleVerifyInput = parse_instance(&bytes, self.mode)?.into_inner();
                    let report = verify_double_delta(&doc.double_family, &doc.certificate)?;
                    Ok(Outcome::new(
                        &DoubleVerifyOutput { report: &report },
                        report.passed,
                    ))
                } else {
                    let doc: DeltaVerifyInput = parse_instance(&bytes, self.mode)?.into_inner();
                    let valid = verify_delta_system(&doc.family, &doc.certificate)?;
                    Ok(Outcome::new(&DeltaVerifyOutput { valid }, valid))
                }
            }
            Command::Centered { input } => {
                let bytes = self.read(&input.input)?;
                let centered = if self.has_key(&bytes, "instance")? {
                    let doc: InstanceBoxes = parse_instance(&bytes, self.mode)?.into_inner();
                    boxes_centered(&doc.instance, &doc.indices)?
                } else {
                    let doc: SpaceOpens = parse_instance(&bytes, self.mode)?.into_inner();
                    is_centered(&doc.space, &doc.opens)?
                };
                Ok(Outcome::new(&CenteredOutput { centered }, centered))
            }
            Command::Property {
                input,
                n,
                k,
                linked,
            } => {
                let space: FiniteSpace = self.load(&input.input)?;
                let q = PropertyQuery::new(*n, *k)?;
                let report = if *linked {
                    has_linked_property(&space, &q, &self.caps)?
                } else {
                    has_centeredness_property(&space, &q, &self.caps)?
                };
                let holds = report.holds;
                let out = PropertyOutput {
                    property: if *linked { "linked" } else { "centered" },
                    n: *n,
                    k: *k,
                    holds,
                    counterexample: report.counterexample,
                };
                Ok(Outcome::new(&out, holds))
            }
            Command::Pipeline {
                input,
                targets,
                kernel_target,
                block_target,
                shift,
                subset_cap,
            } => {
                let instance: ProductInstance = self.load(&input.input)?;
                let params = PipelineParams {
                    extraction: ExtractionParams::new(targets.blocks, targets.per_block)?,
                    kernel_target: *kernel_target,
                    block_target: *block_target,
                    shift: *shift,
                    subset_cap: *subset_cap,
                    use_oracle: targets.oracle,
                };
                let report = run_pipeline(&instance, &params, &self.caps)?;
                Ok(Outcome::new(&report, report.passed()))
            }
            Command::Gen { kind, params, seed } => {
                let mut p: GenParams = match params {
                    Some(path) => self.load(path)?,
                    None => GenParams::default(),
                };
                if let Some(seed) = seed {
                    p.seed = *seed;
                }
                let body = match kind {
                    GenKind::Family => emit_report(&gen_family(&p)?),
                    GenKind::DoubleFamily => emit_report(&gen_double_family(&p)?),
                    GenKind::Space => emit_report(&gen_space(&p)?),
                    GenKind::Instance => emit_report(&gen_instance(&p)?),
                };
                Ok(Outcome {
                    body,
                    positive: true,
                })
            }
        }
    }
}

fn resolve_caps(overrides: &[(String, usize)]) -> Result<Caps, Failure> {
    let mut caps = Caps::default();
    for (name, field) in CAP_NAMES {
        let var = env_name(name);
        if let Ok(raw) = std::env::var(&var) {
            *field(&mut caps) = raw
                .trim()
                .parse()
                .map_err(|e| Failure::Input(format!("{var}: {e}")))?;
        }
    }
    for (name, value) in overrides {
        if let Some((_, field)) = CAP_NAMES.iter().find(|(n, _)| n == name) {
            *field(&mut caps) = *value;
        }
    }
    Ok(caps)
}

fn execute(cli: &Cli) -> Result<Outcome, Failure> {
    if cli.format_version != FORMAT_VERSION {
        return Err(Failure::Input(format!(
            "format version {} not supported (current {FORMAT_VERSION})",
            cli.format_version
        )));
    }
    let ctx = Context {
        mode: if cli.lax { Mode::Lax } else { Mode::Strict },
        format_version: cli.format_version,
        caps: resolve_caps(&cli.caps)?,
    };
    debug_assert_eq!(ctx.format_version, FORMAT_VERSION);
    match cli.threads {
        None => ctx.dispatch(&cli.command),
        Some(0) => Err(Failure::Input("--threads must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure::Input(e.to_string()))?
            .install(|| ctx.dispatch(&cli.command)),
    }
}

/// Parses `args`, runs the command and returns the exit code. The JSON answer
/// goes to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            let written = out
                .write_all(&outcome.body)
                .and_then(|_| out.write_all(b"\n"))
                .and_then(|_| out.flush());
            match written {
                Err(e) => {
                    let _ = writeln!(err, "deltakit: {e}");
                    EXIT_INPUT
                }
                Ok(()) if outcome.positive => EXIT_OK,
                Ok(()) => EXIT_NEGATIVE,
            }
        }
        Err(f) => {
            let _ = writeln!(err, "deltakit: {}", f.message());
            f.code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str], input: &str) -> (i32, String, String) {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(input.as_bytes()).unwrap();
        let path = file.path().to_str().unwrap().to_string();
        let mut argv = vec!["deltakit"];
        argv.extend(
            args.iter()
                .map(|a| if *a == "@" { path.as_str() } else { a }),
        );
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(argv, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    const DOUBLE: &str =
        r#"{"format":1,"ground_size":7,"blocks":[[[0,1],[0,2],[0,3]],[[0,4],[0,5],[0,6]]]}"#;

    #[test]
    fn extract_delta() {
        let fam = r#"{"format":1,"ground_size":5,"sets":[[1,2],[1,3],[2,3],[1,4]]}"#;
        let (code, out, _) = call(&["extract-delta", "-r", "3", "@"], fam);
        assert_eq!(code, 0);
        assert_eq!(
            out,
            "{\"certificate\":{\"indices\":[0,1,3],\"kernel\":[1]},\"format\":1}\n"
        );
        let (code, out, _) = call(&["extract-delta", "-r", "4", "--oracle", "@"], fam);
        assert_eq!(
            (code, out.as_str()),
            (1, "{\"certificate\":null,\"format\":1}\n")
        );
    }

    #[test]
    fn verify_exit_codes() {
        let good = r#"{"format":1,"double_family":{"ground_size":7,"blocks":[[[0,1],[0,2],[0,3]],[[0,4],[0,5],[0,6]]]},"certificate":{"m":1,"I":[0,1],"J":{"0":[0,1,2],"1":[0,1,2]},"A_blocks":{"0":[0],"1":[0]},"A":[0]}}"#;
        let (code, _, err) = call(&["verify", "@"], good);
        assert_eq!(code, 0, "{err}");
        let tampered = good.replace(r#""A_blocks":{"0":[0]"#, r#""A_blocks":{"0":[1]"#);
        let (code, out, _) = call(&["verify", "@"], &tampered);
        assert_eq!(code, 1);
        assert!(
            out.contains("\"kernels_meet_in_global\":false")
                || out.contains("\"within_block\":false")
        );
        let (code, _, err) = call(&["verify", "@"], "{not json");
        assert_eq!(code, 2);
        assert!(err.contains("line 1"));
    }

    #[test]
    fn cap_exceeded_exit() {
        let fam = r#"{"format":1,"ground_size":2,"sets":[[0],[1],[0],[1]]}"#;
        let (code, _, err) = call(
            &[
                "--cap",
                "exact-family=3",
                "extract-delta",
                "-r",
                "2",
                "--oracle",
                "@",
            ],
            fam,
        );
        assert_eq!(code, 3, "{err}");
    }

    #[test]
    fn usage_errors() {
        assert_eq!(call(&["frobnicate"], "").0, 2);
        assert_eq!(call(&["property", "@"], "{}").0, 2);
        assert_eq!(call(&["--cap", "nope=1", "verify", "@"], "{}").0, 2);
        assert_eq!(call(&["--format-version", "2", "verify", "@"], "{}").0, 2);
        assert_eq!(call(&["--help"], "").0, 0);
    }

    #[test]
    fn strict_and_lax() {
        let space = r#"{"format":1,"points":2,"basis":[[0],[1],[0,1]],"note":1}"#;
        assert_eq!(call(&["property", "-n", "2", "-k", "2", "@"], space).0, 2);
        let (code, out, _) = call(&["--lax", "property", "-n", "2", "-k", "2", "@"], space);
        assert_eq!(code, 1);
        assert!(out.contains("\"holds\":false"));
    }

    #[test]
    fn centered_shapes() {
        let (code, _, _) = call(
            &["centered", "@"],
            r#"{"format":1,"space":{"points":2,"basis":[[0],[1],[0,1]]},"opens":[0,2]}"#,
        );
        assert_eq!(code, 0);
        let (code, out, _) = call(
            &["centered", "@"],
            r#"{"format":1,"space":{"points":2,"basis":[[0],[1],[0,1]]},"opens":[0,1]}"#,
        );
        assert_eq!(
            (code, out.as_str()),
            (1, "{\"centered\":false,\"format\":1}\n")
        );
    }

    #[test]
    fn gen_feeds_other_verbs() {
        let (code, fam, _) = call(&["gen", "family", "--seed", "3"], "");
        assert_eq!(code, 0);
        let (code, _, err) = call(&["extract-delta", "@"], &fam);
        assert!(code == 0 || code == 1, "{err}");
        let (code, inst, _) = call(&["gen", "instance", "--seed", "3"], "");
        assert_eq!(code, 0);
        let (code, _, err) = call(&["pipeline", "@"], &inst);
        assert!(code == 0 || code == 1, "{err}");
    }

    #[test]
    fn extract_double_delta_verb() {
        let (code, out, _) = call(&["extract-double-delta", "-s", "2", "-t", "3", "@"], DOUBLE);
        assert_eq!(code, 0);
        assert_eq!(
            out,
            "{\"certificate\":{\"A\":[0],\"A_blocks\":{\"0\":[0],\"1\":[0]},\"I\":[0,1],\"J\":{\"0\":[0,1,2],\"1\":[0,1,2]},\"m\":1},\"format\":1}\n"
        );
    }
}
