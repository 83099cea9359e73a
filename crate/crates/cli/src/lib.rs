//! Command dispatch for the `debriefkit` binary. Exit codes: 0 success,
//! 2 usage, 3 data error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use debriefkit_core::analytics::{get_analytics, select_window, AnalyticsParams};
use debriefkit_core::ingest::{SessionStatus, SessionStore, VadParams, LAYOUT_FILE, MANIFEST_FILE};
use debriefkit_core::interaction::{ExternalCoder, RuleCoder, UtteranceCoder};
use debriefkit_core::interactions::{phase_selections, read_interactions};
use debriefkit_core::model::{EntityRole, Millis, Phase, WardLayout};
use debriefkit_core::render::render_svg;
use debriefkit_core::usage::{classify_strategy, coverage_csv, parse_theme_counts, strategies_csv, StrategyRow};
use debriefkit_core::Session;
use debriefkit_lab::{generate_session, random_script, run_campaign, CheckKind, ScenarioScript};
use debriefkit_service::{Server, ServiceConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

pub const VIZ_NAMES: [&str; 4] = ["priority", "wardmap", "sociogram", "network"];

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

fn data(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "debriefkit", version, about = "Team simulation debrief analytics")]
pub struct Cli {
    /// Directory holding session directories.
    #[arg(long, global = true, env = "DEBRIEFKIT_SESSION_ROOT")]
    pub session_root: Option<PathBuf>,
    #[command(flatten)]
    pub params: ParamFlags,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Default, Clone, Args)]
pub struct ParamFlags {
    #[arg(long, global = true, env = "DEBRIEFKIT_HEX_RADIUS_MM")]
    pub hex_radius_mm: Option<f64>,
    #[arg(long, global = true, env = "DEBRIEFKIT_SPEED_THRESHOLD_MM_S")]
    pub speed_threshold_mm_s: Option<f64>,
    #[arg(long, global = true, env = "DEBRIEFKIT_DISCUSSION_DIST_MM")]
    pub discussion_dist_mm: Option<f64>,
    #[arg(long, global = true, env = "DEBRIEFKIT_DIST_FACE_MM")]
    pub dist_face_mm: Option<f64>,
    #[arg(long, global = true, env = "DEBRIEFKIT_DIST_SIDE_MM")]
    pub dist_side_mm: Option<f64>,
    #[arg(long, global = true, env = "DEBRIEFKIT_ANGLE_TOL_DEG")]
    pub angle_tol_deg: Option<f64>,
    #[arg(long, global = true, env = "DEBRIEFKIT_NETWORK_WINDOW_SIZE")]
    pub network_window_size: Option<usize>,
    #[arg(long, global = true, env = "DEBRIEFKIT_VAD_FRAME_MS")]
    pub vad_frame_ms: Option<u32>,
    #[arg(long, global = true, env = "DEBRIEFKIT_VAD_ENERGY_RATIO")]
    pub vad_energy_ratio: Option<f64>,
    #[arg(long, global = true, env = "DEBRIEFKIT_VAD_MIN_SEGMENT_MS")]
    pub vad_min_segment_ms: Option<u32>,
    #[arg(long, global = true, env = "DEBRIEFKIT_VAD_MERGE_GAP_MS")]
    pub vad_merge_gap_ms: Option<u32>,
}

impl ParamFlags {
    pub fn analytics(&self, base: AnalyticsParams) -> CliResult<AnalyticsParams> {
        let p = AnalyticsParams {
            hex_radius_mm: self.hex_radius_mm.unwrap_or(base.hex_radius_mm),
            speed_threshold_mm_s: self.speed_threshold_mm_s.unwrap_or(base.speed_threshold_mm_s),
            discussion_dist_mm: self.discussion_dist_mm.unwrap_or(base.discussion_dist_mm),
            dist_face_mm: self.dist_face_mm.unwrap_or(base.dist_face_mm),
            dist_side_mm: self.dist_side_mm.unwrap_or(base.dist_side_mm),
            angle_tol_deg: self.angle_tol_deg.unwrap_or(base.angle_tol_deg),
            network_window_size: self.network_window_size.unwrap_or(base.network_window_size),
        };
        p.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(p)
    }

    pub fn vad(&self, base: VadParams) -> CliResult<VadParams> {
        let v = VadParams {
            frame_ms: self.vad_frame_ms.unwrap_or(base.frame_ms),
            energy_ratio_threshold: self.vad_energy_ratio.unwrap_or(base.energy_ratio_threshold),
            min_segment_ms: self.vad_min_segment_ms.unwrap_or(base.min_segment_ms),
            merge_gap_ms: self.vad_merge_gap_ms.unwrap_or(base.merge_gap_ms),
        };
        if v.frame_ms == 0 || !(v.energy_ratio_threshold > 0.0) {
            return Err(CliError::Usage("vad frame and energy ratio must be positive".into()));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Args)]
pub struct WindowFlags {
    /// Phase filter: all, p1, p2, p3 or the full marker names.
    #[arg(long, value_parser = parse_phase)]
    pub phase: Option<Phase>,
    #[arg(long)]
    pub from_ms: Option<Millis>,
    #[arg(long)]
    pub to_ms: Option<Millis>,
}

fn parse_phase(s: &str) -> Result<Phase, String> {
    s.parse().map_err(|e: debriefkit_core::model::ModelError| e.to_string())
}

fn parse_viz(s: &str) -> Result<String, String> {
    if VIZ_NAMES.contains(&s) {
        Ok(s.to_owned())
    } else {
        Err(format!("unknown visualisation `{s}` (expected one of {})", VIZ_NAMES.join(", ")))
    }
}

fn parse_export_viz(s: &str) -> Result<String, String> {
    if s == "all" {
        Ok(s.to_owned())
    } else {
        parse_viz(s)
    }
}

fn parse_audio(s: &str) -> Result<(EntityRole, PathBuf), String> {
    let (role, path) = s.split_once('=').ok_or("expected ROLE=FILE")?;
    let role: EntityRole = role.parse().map_err(|e: debriefkit_core::model::ModelError| e.to_string())?;
    Ok((role, PathBuf::from(path)))
}

fn parse_roles(s: &str) -> Result<Vec<EntityRole>, String> {
    s.split(',')
        .filter(|r| !r.trim().is_empty())
        .map(|r| r.trim().parse().map_err(|e: debriefkit_core::model::ModelError| e.to_string()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Svg,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Add stream files to a session directory and seal it.
    Ingest {
        /// Session directory, or a session id under the session root.
        session: String,
        #[arg(long)]
        positions: Option<PathBuf>,
        #[arg(long)]
        voice: Option<PathBuf>,
        #[arg(long)]
        utterances: Option<PathBuf>,
        /// Per-speaker WAV run through the voice detector, as ROLE=FILE.
        #[arg(long, value_parser = parse_audio)]
        audio: Vec<(EntityRole, PathBuf)>,
        /// Clock offset added to every uploaded timestamp.
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        offset_ms: i64,
        /// Comma-separated roles declared present.
        #[arg(long, value_parser = parse_roles)]
        cast: Option<Vec<EntityRole>>,
        #[arg(long)]
        end_ms: Option<Millis>,
        /// Leave the session recording.
        #[arg(long)]
        no_seal: bool,
        /// External utterance coder command line.
        #[arg(long, env = "DEBRIEFKIT_CODER")]
        coder: Option<String>,
    },
    /// Print one analytics payload.
    Analyze {
        session: String,
        #[arg(value_parser = parse_viz)]
        viz: String,
        #[command(flatten)]
        window: WindowFlags,
    },
    /// Write payloads or SVG renderings to a directory.
    Export {
        session: String,
        #[arg(long, default_value = "all", value_parser = parse_export_viz)]
        viz: String,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        window: WindowFlags,
    },
    /// Generate a synthetic session directory from a script or a seed.
    Simulate {
        script: Option<PathBuf>,
        #[arg(long, conflicts_with = "script")]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Engine against oracles on seeded sessions.
    Campaign {
        #[arg(long, default_value_t = 1000)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        start: u64,
    },
    /// Navigation strategy per debrief, as CSV.
    Strategies { sessions: Vec<String> },
    /// Coverage index per theme from a `theme,frequency,sessions` CSV.
    Coverage { themes: PathBuf },
    /// Run the HTTP and room service until interrupted.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, env = "DEBRIEFKIT_PORT")]
        port: Option<u16>,
        #[arg(long, env = "DEBRIEFKIT_BIND")]
        bind: Option<String>,
    },
}

pub struct Io<'a> {
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
}

impl Cli {
    fn root(&self) -> PathBuf {
        self.session_root.clone().unwrap_or_else(|| PathBuf::from("sessions"))
    }

    /// A path to an existing directory wins over an id under the root.
    fn session_dir(&self, session: &str) -> PathBuf {
        let p = PathBuf::from(session);
        if p.is_dir() {
            p
        } else {
            self.root().join(session)
        }
    }

    fn open(&self, session: &str) -> CliResult<SessionStore> {
        let dir = self.session_dir(session);
        if !dir.join(LAYOUT_FILE).exists() {
            return Err(CliError::Data(format!("{}: not a session directory", dir.display())));
        }
        SessionStore::open(&dir).map_err(data)
    }
}

fn load(store: &SessionStore, io: &mut Io) -> CliResult<Session> {
    if store.status() == SessionStatus::Recording {
        let _ = writeln!(io.err, "note: {} is still recording; using a live snapshot", store.session_id());
    }
    store.snapshot().map_err(data)
}

fn read(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> CliResult {
    fs::write(path, bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn split_out(out: &Path) -> CliResult<(PathBuf, String)> {
    let id = out
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| CliError::Usage(format!("{}: needs a directory name", out.display())))?
        .to_owned();
    let parent = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    Ok((parent.to_owned(), id))
}

fn json_line(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serializes") + "\n"
}

pub fn run_cli(cli: &Cli, io: &mut Io) -> CliResult {
    match &cli.command {
        Command::Ingest {
            session,
            positions,
            voice,
            utterances,
            audio,
            offset_ms,
            cast,
            end_ms,
            no_seal,
            coder,
        } => {
            let vad = cli.params.vad(VadParams::default())?;
            let dir = cli.session_dir(session);
            let mut store = if dir.join(LAYOUT_FILE).exists() || dir.join(MANIFEST_FILE).exists() {
                SessionStore::open(&dir).map_err(data)?
            } else {
                let (root, id) = split_out(&dir)?;
                SessionStore::create(&root, &id, WardLayout::standard(), None).map_err(data)?
            };
            if let Some(cast) = cast {
                store.declare_cast(cast).map_err(data)?;
            }
            if let Some(p) = positions {
                store.ingest_positions(&read(p)?, *offset_ms).map_err(data)?;
            }
            if let Some(p) = voice {
                store.ingest_voice(&read(p)?, *offset_ms).map_err(data)?;
            }
            for (role, p) in audio {
                store.ingest_audio(*role, &read(p)?, *offset_ms, &vad).map_err(data)?;
            }
            if let Some(p) = utterances {
                let coder: Box<dyn UtteranceCoder> = match coder {
                    Some(cmd) => {
                        let argv: Vec<String> = cmd.split_whitespace().map(str::to_owned).collect();
                        let (prog, rest) = argv
                            .split_first()
                            .ok_or_else(|| CliError::Usage("empty --coder".into()))?;
                        Box::new(ExternalCoder::spawn(prog, rest).map_err(data)?)
                    }
                    None => Box::new(RuleCoder),
                };
                store.ingest_utterances(&read(p)?, *offset_ms, coder.as_ref()).map_err(data)?;
            }
            if let Some(end) = end_ms {
                if store.status() == SessionStatus::Recording {
                    store.set_planned_end(*end).map_err(data)?;
                }
            }
            if !no_seal && store.status() == SessionStatus::Recording {
                let timeline = store.proposed_timeline().map_err(data)?;
                let summary = store.seal(&timeline).map_err(data)?;
                write!(io.out, "{}", json_line(&summary)).map_err(data)?;
            } else {
                write!(io.out, "{}", json_line(store.manifest())).map_err(data)?;
            }
            Ok(())
        }
        Command::Analyze { session, viz, window } => {
            let params = cli.params.analytics(AnalyticsParams::default())?;
            let store = cli.open(session)?;
            let s = load(&store, io)?;
            let w = select_window(s.timeline(), window.phase, window.from_ms, window.to_ms).map_err(data)?;
            let payload = get_analytics(&s, viz, &w, &params).map_err(data)?;
            io.out.write_all(&payload.to_json_bytes()).map_err(data)
        }
        Command::Export {
            session,
            viz,
            format,
            out,
            window,
        } => {
            let params = cli.params.analytics(AnalyticsParams::default())?;
            let store = cli.open(session)?;
            let s = load(&store, io)?;
            let w = select_window(s.timeline(), window.phase, window.from_ms, window.to_ms).map_err(data)?;
            fs::create_dir_all(out).map_err(|e| CliError::Data(format!("{}: {e}", out.display())))?;
            let names: Vec<&str> = if viz == "all" { VIZ_NAMES.to_vec() } else { vec![viz.as_str()] };
            for name in names {
                let payload = get_analytics(&s, name, &w, &params).map_err(data)?;
                let (file, bytes) = match format {
                    Format::Json => (format!("{name}.json"), payload.to_json_bytes()),
                    Format::Svg => (format!("{name}.svg"), render_svg(&payload, s.layout()).into_bytes()),
                };
                let path = out.join(file);
                write(&path, &bytes)?;
                writeln!(io.out, "{}", path.display()).map_err(data)?;
            }
            Ok(())
        }
        Command::Simulate { script, seed, out } => {
            let script = match (script, seed) {
                (Some(p), None) => ScenarioScript::from_json(&read(p)?).map_err(data)?,
                (None, Some(seed)) => random_script(*seed),
                _ => return Err(CliError::Usage("give a script file or --seed".into())),
            };
            let generated = generate_session(&script).map_err(data)?;
            let (root, id) = split_out(out)?;
            fs::create_dir_all(&root).map_err(|e| CliError::Data(format!("{}: {e}", root.display())))?;
            generated.write_session_dir(&root, &id).map_err(data)?;
            let summary = serde_json::json!({
                "session_dir": out,
                "seed": script.seed,
                "duration_ms": script.duration_ms,
                "cast": script.cast,
                "positions": generated.positions.len(),
                "voice_segments": generated.voice.len(),
                "utterances": generated.utterances.len(),
            });
            write!(io.out, "{}", json_line(&summary)).map_err(data)
        }
        Command::Campaign { seeds, start } => {
            let t0 = std::time::Instant::now();
            let report = run_campaign(*start..*start + *seeds);
            write!(io.out, "{}", report.summary()).map_err(data)?;
            writeln!(io.out, "elapsed {:.1} s", t0.elapsed().as_secs_f64()).map_err(data)?;
            if report.passed() {
                Ok(())
            } else {
                let worst = CheckKind::ALL
                    .into_iter()
                    .filter(|k| report.failures_of(*k) > 0)
                    .map(|k| format!("{k:?}"))
                    .collect::<Vec<_>>()
                    .join(", ");
                Err(CliError::Data(format!("campaign failed: {worst}")))
            }
        }
        Command::Strategies { sessions } => {
            let mut rows = Vec::new();
            for s in sessions {
                let dir = cli.session_dir(s);
                let store = SessionStore::open(&dir).map_err(data)?;
                let events = read_interactions(&store.interactions_path()).map_err(data)?;
                match classify_strategy(&phase_selections(&events)) {
                    Ok(label) => rows.push(StrategyRow {
                        session_id: store.session_id().to_owned(),
                        label,
                    }),
                    Err(e) => {
                        let _ = writeln!(io.err, "skipping {}: {e}", store.session_id());
                    }
                }
            }
            write!(io.out, "{}", strategies_csv(&rows).map_err(data)?).map_err(data)
        }
        Command::Coverage { themes } => {
            let text = String::from_utf8(read(themes)?).map_err(data)?;
            let counts = parse_theme_counts(&text).map_err(data)?;
            write!(io.out, "{}", coverage_csv(&counts).map_err(data)?).map_err(data)
        }
        Command::Serve { config, port, bind } => {
            let mut cfg = ServiceConfig::load(config.as_deref()).map_err(|e| CliError::Usage(e.to_string()))?;
            if let Some(p) = port {
                cfg.port = *p;
            }
            if let Some(b) = bind {
                cfg.bind = b.clone();
            }
            if let Some(root) = &cli.session_root {
                cfg.session_root = root.clone();
            }
            cfg.analytics = cli.params.analytics(cfg.analytics)?;
            cfg.vad = cli.params.vad(cfg.vad)?;
            let rt = tokio::runtime::Runtime::new().map_err(data)?;
            rt.block_on(async {
                let server = Server::bind(cfg).await.map_err(data)?;
                let addr = server.local_addr().map_err(data)?;
                let _ = writeln!(io.err, "listening on http://{addr}");
                server
                    .run(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await
                    .map_err(data)
            })?;
            rt.shutdown_timeout(Duration::from_secs(2));
            Ok(())
        }
    }
}

/// Parses `args` and runs the command, returning the exit code.
pub fn run(args: impl IntoIterator<Item = impl Into<OsString> + Clone>, io: &mut Io) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = write!(io.err, "{}", e.render());
            if !e.use_stderr() {
                let _ = write!(io.out, "{}", e.render());
            }
            return code;
        }
    };
    match run_cli(&cli, io) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let msg = match &e {
                CliError::Usage(m) | CliError::Data(m) => m,
            };
            let _ = writeln!(io.err, "error: {msg}");
            e.exit_code()
        }
    }
}
