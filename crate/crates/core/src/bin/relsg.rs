//! Command-line front end for the relativistic Stern-Gerlach toolkit.
//!
//! Configuration is a flat `key=value` text file (one pair per line, `#`
//! comments) selected with `--config`; individual keys can be overridden
//! on the command line with repeated `--set key=value` flags, which take
//! precedence. Every run prints a `config_echo` field containing the
//! effective configuration; feeding it back through `--config` reproduces
//! the run exactly. All numbers are printed with 15 significant digits.
//!
//! Exit codes: 0 success, 1 configuration error (the message names the
//! offending key), 2 numerical or domain error from the computation.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_complex::Complex;

use relsg::lorentz::{FourVector, LorentzPair, SpinorAmplitude};
use relsg::observable::{compare_operators, rest_frame_b, sg_field_tensor, sg_operator, SGConfig};
use relsg::spinor::Spinor;
use relsg::tomography::{
    momentum_sensitivity_experiment, parse_records, predict_mean, reconstruct, reconstruct_naive,
    BlochState,
};
use relsg::wkbsim::{run_measurement, write_trajectory_csv, FieldProfile, RunParams};

/// Relativistic Stern-Gerlach spin toolkit.
#[derive(Parser)]
#[command(name = "relsg", version, about, long_about = CONFIG_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

const CONFIG_HELP: &str = "\
Relativistic Stern-Gerlach spin toolkit.

Configuration keys (flat key=value file via --config, overridden by --set):

  Common:
    mass              particle mass (default 1)
    rapidity          particle boost rapidity (default 0)
    beta              particle speed; alternative to rapidity
    boost_axis        particle boost axis, e.g. 1,0,0 (default)
    psi               spinor amplitude re0,im0,re1,im1 at momentum p, or
                      one of the keywords plus | minus | equal (eigenstates
                      of the apparatus operator, or their equal-weight
                      superposition); default 1,0,0,0
    device_beta       apparatus speed (default 0)
    device_axis       apparatus boost axis (default 1,0,0)
    field_dir         apparatus-frame field direction (default 0,0,1)
    field_magnitude   apparatus-frame |B| (default 1)

  simulate only:
    gradient          device-frame magnitude slope G (default 0.05)
    gradient_dir      gradient direction (default 0,0,1)
    slab_axis         beam axis of the field slab (default 1,0,0)
    slab_min/slab_max slab extent along slab_axis (default 0.5 / 2.5)
    edge_width        smooth ramp width at the slab edges (default 0.4)
    origin            slab origin, device frame (default 0,0,0)
    charge            electric charge e (default 0)
    coupling          magnetic-moment coupling mu (default 1)
    detector_plane    detector coordinate along slab_axis (default 4)
    x0                initial event t,x,y,z (default 0,0,0,0)
    dtau              integrator step (default 1e-3)
    max_steps         step budget (default 10000000)
    packet_width      resolution threshold for `resolved` (default 0.1)
    sample_every      trajectory sampling stride (default 10)

  tomography only:
    records           path to a JSON-lines measurement records file
    naive             true = also reconstruct ignoring momentum (default false)
    scan              true = momentum-sensitivity scan instead of
                      reconstruction
    bloch             Bloch vector r1,r2,r3 for the scan (default 0,0,1)
    scan_axis         momentum axis for the scan (default 1,0,0)
    scan_max          largest rapidity in the scan (default 2)
    scan_steps        number of grid points (default 9)

Output directory for simulate artifacts: --out-dir, the RELSG_OUT_DIR
environment variable, or the current directory, in that order.";

#[derive(Subcommand)]
enum Command {
    /// Expectation value of the covariant Stern-Gerlach observable.
    Expectation(CommonArgs),
    /// Measurement axis n and rest-frame field B_RF for the configuration.
    Direction(CommonArgs),
    /// Expectations of the covariant operator and the two rival operators.
    Compare(CommonArgs),
    /// Split a packet and integrate both branches to the detector plane.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Directory for trajectory CSV files.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Reconstruct a Bloch vector from a measurement records file, or run
    /// a momentum-sensitivity scan.
    Tomography(CommonArgs),
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Flat key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. --set rapidity=1.2 (repeatable).
    #[arg(short, long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

/// User-facing failure, carrying which exit code it maps to.
enum Failure {
    /// Bad configuration; the string names the offending key.
    Config(String),
    /// Numerical or domain error from the computation.
    Numerical(String),
}

impl From<relsg::Error> for Failure {
    fn from(e: relsg::Error) -> Self {
        Failure::Numerical(e.to_string())
    }
}

type RunResult<T> = std::result::Result<T, Failure>;

fn bad_key(key: &str, why: impl std::fmt::Display) -> Failure {
    Failure::Config(format!("config key `{key}`: {why}"))
}

// ---------------------------------------------------------------------------
// Flat key=value configuration.

struct Config {
    map: BTreeMap<String, String>,
}

impl Config {
    fn load(args: &CommonArgs) -> RunResult<Self> {
        let mut map = BTreeMap::new();
        if let Some(path) = &args.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("config file {}: {e}", path.display())))?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| {
                    Failure::Config(format!(
                        "config file line {}: expected key=value, got `{line}`",
                        lineno + 1
                    ))
                })?;
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        for item in &args.set {
            let (k, v) = item.split_once('=').ok_or_else(|| {
                Failure::Config(format!("--set `{item}`: expected key=value"))
            })?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Config { map })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn f64(&self, key: &str, default: f64) -> RunResult<f64> {
        match self.raw(key) {
            None => Ok(default),
            Some(s) => s.parse().map_err(|e| bad_key(key, e)),
        }
    }

    fn usize(&self, key: &str, default: usize) -> RunResult<usize> {
        match self.raw(key) {
            None => Ok(default),
            Some(s) => s.parse().map_err(|e| bad_key(key, e)),
        }
    }

    fn bool(&self, key: &str, default: bool) -> RunResult<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some("true") | Some("1") => Ok(true),
            Some("false") | Some("0") => Ok(false),
            Some(other) => Err(bad_key(key, format!("expected true/false, got `{other}`"))),
        }
    }

    fn floats(&self, key: &str, n: usize, default: &[f64]) -> RunResult<Vec<f64>> {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(s) => {
                let vals: std::result::Result<Vec<f64>, _> =
                    s.split(',').map(|p| p.trim().parse()).collect();
                let vals = vals.map_err(|e| bad_key(key, e))?;
                if vals.len() != n {
                    return Err(bad_key(key, format!("expected {n} numbers, got {}", vals.len())));
                }
                Ok(vals)
            }
        }
    }

    fn vec3(&self, key: &str, default: [f64; 3]) -> RunResult<[f64; 3]> {
        let v = self.floats(key, 3, &default)?;
        Ok([v[0], v[1], v[2]])
    }

    /// The effective configuration as flat key=value text; re-parsing it
    /// reproduces this run.
    fn echo(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.map {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    /// Records a defaulted value so the echo is self-contained.
    fn default_key(&mut self, key: &str, value: String) {
        self.map.entry(key.to_string()).or_insert(value);
    }
}

// ---------------------------------------------------------------------------
// JSON emission with 15 significant digits.

fn num(x: f64) -> String {
    format!("{:.14e}", x)
}

fn arr(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| num(*x)).collect();
    format!("[{}]", parts.join(","))
}

fn jstr(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization")
}

// ---------------------------------------------------------------------------
// Shared physics setup.

struct Setup {
    cfg: SGConfig,
    p: FourVector,
    mass: f64,
    psi: Spinor,
}

fn normalize_axis(key: &str, a: [f64; 3]) -> RunResult<[f64; 3]> {
    let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    if n == 0.0 {
        return Err(bad_key(key, "axis is zero"));
    }
    Ok([a[0] / n, a[1] / n, a[2] / n])
}

fn build_setup(config: &mut Config) -> RunResult<Setup> {
    let mass = config.f64("mass", 1.0)?;
    if mass <= 0.0 {
        return Err(bad_key("mass", "must be positive"));
    }

    let rapidity = match (config.raw("rapidity"), config.raw("beta")) {
        (Some(_), Some(_)) => {
            return Err(Failure::Config(
                "config keys `rapidity` and `beta` are mutually exclusive".into(),
            ))
        }
        (None, Some(_)) => {
            let beta = config.f64("beta", 0.0)?;
            if beta.abs() >= 1.0 {
                return Err(bad_key("beta", "must satisfy |beta| < 1"));
            }
            beta.atanh()
        }
        _ => config.f64("rapidity", 0.0)?,
    };
    let axis = normalize_axis("boost_axis", config.vec3("boost_axis", [1.0, 0.0, 0.0])?)?;
    let p = FourVector::new(
        mass * rapidity.cosh(),
        mass * rapidity.sinh() * axis[0],
        mass * rapidity.sinh() * axis[1],
        mass * rapidity.sinh() * axis[2],
    );

    let field_dir = config.vec3("field_dir", [0.0, 0.0, 1.0])?;
    let field_mag = config.f64("field_magnitude", 1.0)?;
    let device_beta = config.f64("device_beta", 0.0)?;
    if device_beta.abs() >= 1.0 {
        return Err(bad_key("device_beta", "must satisfy |beta| < 1"));
    }
    let device_axis =
        normalize_axis("device_axis", config.vec3("device_axis", [1.0, 0.0, 0.0])?)?;
    let rest_cfg = SGConfig::device_rest(field_dir, field_mag)
        .map_err(|e| bad_key("field_dir", e))?;
    let cfg = if device_beta == 0.0 {
        rest_cfg
    } else {
        let boost = LorentzPair::boost(device_axis, device_beta.atanh())
            .map_err(|e| bad_key("device_axis", e))?;
        rest_cfg.transform(&boost).map_err(|e| bad_key("device_beta", e))?
    };

    let psi_key = config.raw("psi").unwrap_or("1,0,0,0").to_string();
    let psi = match psi_key.as_str() {
        "plus" | "minus" | "equal" => {
            let obs = sg_operator(&cfg, &p, mass)?;
            let (plus, minus) = obs.eigenstates()?;
            match psi_key.as_str() {
                "plus" => plus,
                "minus" => minus,
                _ => {
                    let s = std::f64::consts::FRAC_1_SQRT_2;
                    Spinor::new(plus.psi * Complex::new(s, 0.0) + minus.psi * Complex::new(s, 0.0), p, mass)?
                }
            }
        }
        _ => {
            let v = config.floats("psi", 4, &[1.0, 0.0, 0.0, 0.0])?;
            Spinor::new(
                SpinorAmplitude::new(Complex::new(v[0], v[1]), Complex::new(v[2], v[3])),
                p,
                mass,
            )
            .map_err(|e| bad_key("psi", e))?
        }
    };

    // Make the echo self-contained.
    config.default_key("mass", format!("{mass}"));
    if config.raw("beta").is_none() {
        config.default_key("rapidity", format!("{rapidity}"));
    }
    config.default_key("boost_axis", format!("{},{},{}", axis[0], axis[1], axis[2]));
    config.default_key(
        "field_dir",
        format!("{},{},{}", field_dir[0], field_dir[1], field_dir[2]),
    );
    config.default_key("field_magnitude", format!("{field_mag}"));
    config.default_key("device_beta", format!("{device_beta}"));
    config.default_key("psi", psi_key);

    Ok(Setup { cfg, p, mass, psi })
}

// ---------------------------------------------------------------------------
// Subcommands.

fn cmd_expectation(mut config: Config) -> RunResult<String> {
    let s = build_setup(&mut config)?;
    let obs = sg_operator(&s.cfg, &s.p, s.mass)?;
    let value = obs.expectation(&s.psi)?;
    Ok(format!(
        "{{\"expectation\":{},\"axis_adjusted\":{},\"config_echo\":{}}}",
        num(value),
        obs.adjusted,
        jstr(&config.echo())
    ))
}

fn cmd_direction(mut config: Config) -> RunResult<String> {
    let s = build_setup(&mut config)?;
    let obs = sg_operator(&s.cfg, &s.p, s.mass)?;
    let f = sg_field_tensor(&s.cfg);
    let u = s.p.scale(1.0 / s.mass);
    let b_rf = rest_frame_b(&f, &u);
    let b_mag = (-b_rf.norm_sqr()).max(0.0).sqrt();
    Ok(format!(
        "{{\"n\":{},\"b_rf\":{},\"b_rf_magnitude\":{},\"config_echo\":{}}}",
        arr(&obs.n.0),
        arr(&b_rf.0),
        num(b_mag),
        jstr(&config.echo())
    ))
}

fn cmd_compare(mut config: Config) -> RunResult<String> {
    let s = build_setup(&mut config)?;
    let c = compare_operators(&s.cfg, &s.p, s.mass, &s.psi)?;
    Ok(format!(
        "{{\"sg\":{},\"sprime\":{},\"sdoubleprime\":{},\"sprime_hermiticity_defect\":{},\"sdoubleprime_hermiticity_defect\":{},\"config_echo\":{}}}",
        num(c.sg),
        num(c.sprime),
        num(c.sdoubleprime),
        num(c.sprime_defect),
        num(c.sdoubleprime_defect),
        jstr(&config.echo())
    ))
}

fn branch_json(out: &relsg::wkbsim::BranchOutcome, csv: &str) -> String {
    format!(
        "{{\"branch\":{},\"weight\":{},\"arrival_transverse\":{},\"deflection\":{},\"arrival_tau\":{},\"final_wavevector\":{},\"conservation_drift\":{},\"trajectory_csv\":{}}}",
        if out.branch > 0.0 { "1" } else { "-1" },
        num(out.weight),
        arr(&out.arrival_transverse),
        arr(&out.deflection),
        num(out.arrival_tau),
        arr(&out.final_wavevector.0),
        num(out.conservation_drift),
        jstr(csv)
    )
}

fn cmd_simulate(mut config: Config, out_dir: Option<PathBuf>) -> RunResult<String> {
    let s = build_setup(&mut config)?;

    let gradient = config.f64("gradient", 0.05)?;
    let gradient_dir =
        normalize_axis("gradient_dir", config.vec3("gradient_dir", [0.0, 0.0, 1.0])?)?;
    let mut profile = FieldProfile::new(s.cfg.clone(), gradient, gradient_dir)
        .map_err(|e| bad_key("gradient_dir", e))?;
    profile.slab_axis =
        normalize_axis("slab_axis", config.vec3("slab_axis", [1.0, 0.0, 0.0])?)?;
    profile.slab_range = [config.f64("slab_min", 0.5)?, config.f64("slab_max", 2.5)?];
    if profile.slab_range[1] <= profile.slab_range[0] {
        return Err(bad_key("slab_max", "must exceed slab_min"));
    }
    profile.edge_width = config.f64("edge_width", 0.4)?;
    profile.origin = config.vec3("origin", [0.0; 3])?;
    profile.charge = config.f64("charge", 0.0)?;
    profile.coupling = config.f64("coupling", 1.0)?;
    profile.validate().map_err(|e| bad_key("edge_width", e))?;

    let plane = config.f64("detector_plane", 4.0)?;
    if plane <= profile.slab_range[1] {
        return Err(bad_key("detector_plane", "must lie beyond slab_max"));
    }
    let x0v = config.floats("x0", 4, &[0.0; 4])?;
    let x0 = FourVector::new(x0v[0], x0v[1], x0v[2], x0v[3]);
    let params = RunParams {
        dtau: config.f64("dtau", 1e-3)?,
        max_steps: config.usize("max_steps", 10_000_000)?,
        packet_width: config.f64("packet_width", 0.1)?,
        sample_every: config.usize("sample_every", 10)?,
    };
    if params.dtau <= 0.0 {
        return Err(bad_key("dtau", "must be positive"));
    }

    let report = run_measurement(&s.psi, &profile, &x0, plane, &params)?;

    let dir = out_dir
        .or_else(|| std::env::var_os("RELSG_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)
        .map_err(|e| Failure::Config(format!("--out-dir {}: {e}", dir.display())))?;
    let mut paths = Vec::new();
    for (name, branch) in [("branch_plus.csv", &report.plus), ("branch_minus.csv", &report.minus)]
    {
        let path = dir.join(name);
        let mut file = std::fs::File::create(&path)
            .map_err(|e| Failure::Config(format!("--out-dir {}: {e}", path.display())))?;
        write_trajectory_csv(&branch.samples, &mut file)
            .map_err(|e| Failure::Numerical(format!("writing {}: {e}", path.display())))?;
        paths.push(path.display().to_string());
    }

    Ok(format!(
        "{{\"plus\":{},\"minus\":{},\"separation\":{},\"resolved\":{},\"maxwell_violation\":{},\"config_echo\":{}}}",
        branch_json(&report.plus, &paths[0]),
        branch_json(&report.minus, &paths[1]),
        num(report.separation),
        report.resolved,
        num(report.maxwell_violation),
        jstr(&config.echo())
    ))
}

fn cmd_tomography(mut config: Config) -> RunResult<String> {
    let mass = config.f64("mass", 1.0)?;
    if config.bool("scan", false)? {
        let s = build_setup(&mut config)?;
        let bloch = BlochState::new(config.vec3("bloch", [0.0, 0.0, 1.0])?)
            .map_err(|e| bad_key("bloch", e))?;
        let scan_axis =
            normalize_axis("scan_axis", config.vec3("scan_axis", [1.0, 0.0, 0.0])?)?;
        let scan_max = config.f64("scan_max", 2.0)?;
        let steps = config.usize("scan_steps", 9)?;
        if steps < 2 {
            return Err(bad_key("scan_steps", "need at least 2 grid points"));
        }
        let etas: Vec<f64> = (0..steps)
            .map(|i| scan_max * i as f64 / (steps - 1) as f64)
            .collect();
        let table = momentum_sensitivity_experiment(
            &bloch,
            &s.cfg,
            &[s.cfg.clone()],
            scan_axis,
            &etas,
            mass,
        )?;
        let rows: Vec<String> = table
            .rows
            .iter()
            .map(|r| format!("{{\"rapidity\":{},\"mean\":{}}}", num(r.rapidity), num(r.means[0])))
            .collect();
        return Ok(format!(
            "{{\"scan\":[{}],\"spread\":{},\"config_echo\":{}}}",
            rows.join(","),
            num(table.spread[0]),
            jstr(&config.echo())
        ));
    }

    let path = config
        .raw("records")
        .ok_or_else(|| bad_key("records", "required for tomography"))?
        .to_string();
    let mut text = String::new();
    std::fs::File::open(&path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| bad_key("records", format!("{path}: {e}")))?;
    let records = parse_records(&text)?;
    let rec = reconstruct(&records, mass)?;

    let mut naive_part = String::new();
    if config.bool("naive", false)? {
        let n = reconstruct_naive(&records, mass)?;
        let diff = (0..3)
            .map(|i| (n.state.r[i] - rec.state.r[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        naive_part = format!(
            ",\"naive_bloch\":{},\"naive_residual\":{},\"naive_vs_corrected\":{}",
            arr(&n.state.r),
            num(n.residual),
            num(diff)
        );
    }
    // Residuals of the corrected fit, per record, as a diagnostic.
    let mut predicted = Vec::new();
    for r in &records {
        let cfg = r.config()?;
        let p = FourVector(r.p.expect("reconstruct checked momenta"));
        predicted.push(predict_mean(&rec.state, &cfg, &p, mass)?);
    }
    let resid: Vec<f64> = records
        .iter()
        .zip(&predicted)
        .map(|(r, m)| r.mean - m)
        .collect();

    Ok(format!(
        "{{\"bloch\":{},\"residual\":{},\"rank\":{},\"singular_values\":{},\"record_residuals\":{}{},\"config_echo\":{}}}",
        arr(&rec.state.r),
        num(rec.residual),
        rec.rank,
        arr(&rec.singular_values),
        arr(&resid),
        naive_part,
        jstr(&config.echo())
    ))
}

// ---------------------------------------------------------------------------

fn run() -> RunResult<String> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            return Err(Failure::Config(e.to_string()));
        }
    };
    match cli.command {
        Command::Expectation(a) => cmd_expectation(Config::load(&a)?),
        Command::Direction(a) => cmd_direction(Config::load(&a)?),
        Command::Compare(a) => cmd_compare(Config::load(&a)?),
        Command::Simulate { common, out_dir } => cmd_simulate(Config::load(&common)?, out_dir),
        Command::Tomography(a) => cmd_tomography(Config::load(&a)?),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(json) => {
            println!("{json}");
            ExitCode::SUCCESS
        }
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical error: {msg}");
            ExitCode::from(2)
        }
    }
}
