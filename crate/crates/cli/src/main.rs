//! `regflow` command-line tool.
//!
//! Exit codes: 0 regular / agree, 1 collision, 2 inconclusive / untestable,
//! 3 error, 4 validation disagreement.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use regflow::field::{field_grid, mass_at, write_field_csv, Flow, Window};
use regflow::scenario::{assumptions_report, read_scenario};
use regflow::simulator::{simulate_ensemble, write_trajectory_csv};
use regflow::{
    check_auto, detect_collisions, report_text, validate, validation_text, verdict_text, Agreement,
    Error, Scenario, Settings,
};

const EXIT_ERROR: u8 = 3;

#[derive(Parser)]
#[command(
    name = "regflow",
    version,
    about = "Collision analysis for continua of point particles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every applicable analytic criterion and print the verdict.
    Check(RunArgs),
    /// Propagate the particle grid, write trajectories and the collision scan.
    Simulate(RunArgs),
    /// Compare the analytic verdict with the simulation (a file or a directory of files).
    Validate(RunArgs),
    /// Rebuild the Euler velocity field and densities (line scenarios).
    Field(RunArgs),
    /// List the hypotheses of every matching criterion and their status.
    Report(RunArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Directory for output files; stdout only when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Particles per coordinate.
    #[arg(long)]
    grid: Option<usize>,
    /// Time horizon (a number or "inf").
    #[arg(long)]
    horizon: Option<f64>,
    /// Seed for randomized probes.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Multi-d collision threshold relative to the initial pair distance.
    #[arg(long)]
    tol_collision: Option<f64>,
}

impl RunArgs {
    fn settings(&self) -> Settings {
        let mut s = Settings::default().with_seed(self.seed);
        if let Some(e) = self.tol_collision {
            s.eps_collision = e;
        }
        s
    }

    fn load(&self, path: &Path) -> regflow::Result<Scenario> {
        let mut s = read_scenario(path).map_err(|e| match e {
            Error::Parse {
                line,
                column,
                message,
            } => Error::Parse {
                line,
                column,
                message: format!("{}: {message}", path.display()),
            },
            other => other,
        })?;
        if let Some(n) = self.grid {
            if n < 2 {
                return Err(Error::InvalidParameter("--grid must be at least 2".into()));
            }
            let d = s.grid.counts.len();
            s = s.with_grid(vec![n; d]);
        }
        if let Some(h) = self.horizon {
            s = s.with_horizon(h);
        }
        Ok(s)
    }

    fn emit(&self, name: &str, text: &str) -> regflow::Result<()> {
        print!("{text}");
        if let Some(dir) = &self.out {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(name), text)?;
        }
        Ok(())
    }

    fn out_file(&self, name: &str) -> regflow::Result<Option<std::io::BufWriter<fs::File>>> {
        match &self.out {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                Ok(Some(std::io::BufWriter::new(fs::File::create(
                    dir.join(name),
                )?)))
            }
            None => Ok(None),
        }
    }
}

fn cmd_check(a: &RunArgs) -> regflow::Result<u8> {
    let s = a.load(&a.scenario)?;
    let auto = check_auto(&s, &a.settings())?;
    let mut text = verdict_text(&auto.verdict);
    for v in &auto.trace {
        text.push_str(&format!(
            "trace: {} {} {}\n",
            v.criterion, v.outcome, v.margin
        ));
    }
    a.emit("verdict.txt", &text)?;
    Ok(auto.verdict.outcome.exit_code() as u8)
}

fn cmd_simulate(a: &RunArgs) -> regflow::Result<u8> {
    let s = a.load(&a.scenario)?;
    let settings = a.settings();
    let report = detect_collisions(&s, &settings)?;
    if s.horizon.is_finite() {
        if let Some(mut w) = a.out_file("trajectory.csv")? {
            let e = simulate_ensemble(&s, s.horizon, settings.output_times)?;
            write_trajectory_csv(&e, &mut w)?;
            w.flush()?;
        }
    }
    a.emit("collisions.txt", &report_text(&report))?;
    Ok(0)
}

fn scenario_files(path: &Path) -> regflow::Result<Vec<PathBuf>> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    Ok(files)
}

fn cmd_validate(a: &RunArgs) -> regflow::Result<u8> {
    let files = scenario_files(&a.scenario)?;
    let settings = a.settings();
    let mut text = String::new();
    let mut code = 0;
    for f in &files {
        let name = f
            .file_stem()
            .map_or_else(String::new, |n| n.to_string_lossy().into_owned());
        text.push_str(&format!("== {name} ==\n"));
        let r = a.load(f).and_then(|s| validate(&s, &settings));
        match r {
            Ok(r) => {
                text.push_str(&validation_text(&r));
                code = code.max(r.agreement.exit_code());
            }
            Err(e) => {
                text.push_str(&format!("error: {e}\n"));
                code = code.max(EXIT_ERROR as i32);
            }
        }
    }
    if code == EXIT_ERROR as i32 && files.len() > 1 {
        // a disagreement outranks errors elsewhere in the suite
        if text.contains(&format!("agreement: {}", Agreement::Disagree)) {
            code = Agreement::Disagree.exit_code();
        }
    }
    a.emit("validation.txt", &text)?;
    Ok(code as u8)
}

fn cmd_field(a: &RunArgs) -> regflow::Result<u8> {
    let s = a.load(&a.scenario)?;
    let settings = a.settings();
    let flow = Flow::new(&s, s.horizon, &settings)?;
    let mut t1 = s.horizon;
    let mut text = String::new();
    if flow.t_limit() <= t1 {
        t1 = 0.99 * flow.t_limit();
        text.push_str(&format!(
            "note: first collision at t = {}; field sampled up to {t1}\n",
            flow.t_limit()
        ));
    }
    let g = field_grid(&flow, &Window::new(0.0, t1))?;
    if let Some(mut w) = a.out_file("field.csv")? {
        write_field_csv(&g, &mut w)?;
        w.flush()?;
    }
    let e = g.max_euler();
    let (tr, co) = (g.max_transport(), g.max_continuity());
    text.push_str(&format!("t_end: {t1}\n"));
    text.push_str(&format!(
        "res_euler: {} at t = {}, y = {}\n",
        e.max, e.t, e.y
    ));
    text.push_str(&format!(
        "res_transport: {} at t = {}, y = {}\n",
        tr.max, tr.t, tr.y
    ));
    text.push_str(&format!(
        "res_continuity: {} at t = {}, y = {}\n",
        co.max, co.t, co.y
    ));
    for (t, m) in g.times.iter().zip(g.max_density()) {
        text.push_str(&format!(
            "t = {t}: mass {} max_density {m}\n",
            mass_at(&flow, *t)?
        ));
    }
    a.emit("field_summary.txt", &text)?;
    Ok(0)
}

fn cmd_report(a: &RunArgs) -> regflow::Result<u8> {
    let s = a.load(&a.scenario)?;
    let mut text = String::new();
    for r in assumptions_report(&s, &a.settings()) {
        text.push_str(&format!("[{}] {}\n", r.criterion, r.status()));
        for h in &r.hypotheses {
            match &h.witness {
                Some(w) => text.push_str(&format!("  {}: {} ({w})\n", h.name, h.status)),
                None => text.push_str(&format!("  {}: {}\n", h.name, h.status)),
            }
        }
    }
    a.emit("assumptions.txt", &text)?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Check(a) => cmd_check(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Field(a) => cmd_field(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
