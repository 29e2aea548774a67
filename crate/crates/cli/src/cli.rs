//! Argument parsing and dispatch.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use slelab::excursions::{GridMask, Region};

use crate::error::{exit, require, CliError, CliResult};
use crate::experiments::{
    cardy, excursion, exponents, powers_of_two, sle, universality, walk, Outcome,
};
use crate::manifest::{Parameter, Run, RunManifest};
use crate::report::report;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "SLELAB_WORKERS";

#[derive(Debug, Parser)]
#[command(
    name = "slelab",
    version,
    about = "Monte Carlo and exact checks of planar intersection exponents"
)]
pub struct Cli {
    /// Directory for the manifest, CSV tables and plots.
    #[arg(long, global = true, default_value = "slelab-out")]
    pub out: PathBuf,
    /// Seed of every random stream in the run.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = WORKERS_ENV)]
    pub workers: Option<usize>,
    /// Also render SVG plots of the fitted tables.
    #[arg(long, global = true)]
    pub plot: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact intersection exponents.
    #[command(subcommand)]
    Exponents(ExponentsCmd),
    /// Radial SLE and its angular diffusion.
    #[command(subcommand)]
    Sle(SleCmd),
    /// Cardy's formula and SLE₆ crossings.
    #[command(subcommand)]
    Cardy(CardyCmd),
    /// Brownian excursion masses and extremal distances.
    #[command(subcommand)]
    Excursion(ExcursionCmd),
    /// Simple random walk non-intersection and dimensions.
    #[command(subcommand)]
    Walk(WalkCmd),
    /// Hull-excursion avoidance exponent by two independent routes.
    Universality(UniversalityArgs),
    /// Summarize stored runs from their manifests.
    Report(ReportArgs),
}

#[derive(Debug, Subcommand)]
pub enum ExponentsCmd {
    /// Evaluate one closed form: zeta-n, zeta-2-lambda, xi-1-lambda, xi, xi-tilde, eta or nu.
    Eval {
        formula: String,
        /// Arguments as integers, fractions `p/q` or decimals.
        #[arg(allow_negative_numbers = true)]
        args: Vec<String>,
    },
    /// The landmark exponents and dimensions.
    Table,
    /// Residual of the cascade relation for one split.
    Cascade {
        #[arg(long, value_delimiter = ',', required = true)]
        packs: Vec<String>,
        #[arg(long)]
        q: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum SleCmd {
    /// Decay rate of the surviving boundary arc length.
    NuEstimate {
        #[arg(long, default_value_t = 6.0)]
        kappa: f64,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        b: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 256)]
        grid: usize,
        #[arg(long, default_value_t = 1e-2)]
        dt: f64,
        #[arg(long, value_delimiter = ',', default_value = "1,1.5,2,2.5,3,3.5,4")]
        times: Vec<f64>,
        /// Slope tolerance per moment.
        #[arg(long, value_delimiter = ',')]
        tolerance: Vec<f64>,
    },
    /// Monte Carlo f(x, t) against the closed-form solution h*.
    Sandwich {
        #[arg(long, default_value_t = 6.0)]
        kappa: f64,
        #[arg(long, default_value_t = 1.0)]
        b: f64,
        /// Starting angles; `pi`, `pi/4` and `3pi/4` are accepted.
        #[arg(long, value_delimiter = ',', value_parser = parse_real, default_value = "pi/4,pi/2,pi")]
        x: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
        times: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 10.0)]
        upper: f64,
    },
    /// Generator residual of h* on a grid, at h and h/2.
    Residual {
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        #[arg(long, default_value_t = 20)]
        nx: usize,
        #[arg(long, default_value_t = 20)]
        nt: usize,
    },
    /// One radial hull with its Koebe bracket.
    Trace {
        #[arg(long, default_value_t = 6.0)]
        kappa: f64,
        #[arg(long, default_value_t = 3.0)]
        t_max: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
    },
}

#[derive(Debug, Subcommand)]
pub enum CardyCmd {
    /// Closed-form crossing probabilities on a θ × α grid.
    Eval {
        #[arg(long, value_delimiter = ',', value_parser = parse_real, default_value = "0.5")]
        theta: Vec<f64>,
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            default_value = "0"
        )]
        alpha: Vec<f64>,
    },
    /// Chordal SLE₆ estimate of the crossing probabilities.
    Mc {
        #[arg(long, value_parser = parse_real, default_value = "0.5")]
        theta: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        alpha: f64,
        #[arg(long, default_value_t = 10_000)]
        runs: usize,
        #[arg(long, default_value_t = 3.0)]
        z_max: f64,
    },
}

#[derive(Debug, Subcommand)]
pub enum ExcursionCmd {
    /// Crossing mass of the rectangle (0, L) × (0, π).
    Rectangle {
        #[arg(long = "l", value_delimiter = ',', default_value = "1,2,3,4")]
        lengths: Vec<f64>,
        #[arg(long, default_value_t = 1_000_000)]
        paths: usize,
        #[arg(long, default_value_t = slelab::excursions::DEFAULT_OFFSET)]
        s: f64,
        #[arg(long, default_value_t = slelab::excursions::DEFAULT_DT_SCALE)]
        dt: f64,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Mass of disk excursions reaching radius r.
    Annulus {
        #[arg(long = "r", value_delimiter = ',', value_parser = parse_real, default_value = "0.5,0.1")]
        radii: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = slelab::excursions::DEFAULT_OFFSET)]
        s: f64,
        #[arg(long, default_value_t = slelab::excursions::DEFAULT_DT_SCALE)]
        dt: f64,
    },
    /// π-extremal distance of `rectangle:L`, `annulus:r`, `slit:r`, or a mask file.
    Extremal {
        #[arg(long, conflicts_with = "mask")]
        region: Option<String>,
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long, default_value_t = 128)]
        resolution: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum WalkCmd {
    /// Probability that two packs stay disjoint for k steps.
    Nonintersection {
        #[arg(long, value_parser = parse_packs, default_value = "1,1")]
        packs: (usize, usize),
        #[arg(long, default_value_t = 256)]
        kmin: usize,
        #[arg(long, default_value_t = 16_384)]
        kmax: usize,
        #[arg(long, default_value_t = 200_000)]
        paths: usize,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Probability that two packs stay disjoint until leaving radius R.
    Radial {
        #[arg(long, value_parser = parse_packs, default_value = "1,1")]
        packs: (usize, usize),
        #[arg(long, value_delimiter = ',', value_parser = parse_real, default_value = "8,16,32,64,128")]
        radii: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Box-counting dimensions of cut points and frontier.
    Dimensions {
        #[arg(long, default_value_t = 100_000)]
        steps: usize,
        #[arg(long, default_value_t = 200)]
        walks: usize,
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,32,64,128")]
        scales: Vec<u32>,
        #[arg(long)]
        tolerance: Option<f64>,
    },
}

#[derive(Debug, Args)]
pub struct UniversalityArgs {
    /// Decreasing radii in (0, 1/8); `2^-4` style is accepted.
    #[arg(long, value_delimiter = ',', value_parser = parse_real, default_value = "2^-4,2^-5,2^-6,2^-7,2^-8,2^-9")]
    pub radii: Vec<f64>,
    #[arg(long, default_value_t = universality::FULL_PATHS)]
    pub paths: usize,
    #[arg(long, default_value_t = 1e-2)]
    pub dt: f64,
    #[arg(long, default_value_t = 256)]
    pub grid: usize,
    #[arg(long, default_value_t = 64)]
    pub resolution: usize,
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Allow fewer paths per radius than a full run needs.
    #[arg(long)]
    pub pilot: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory searched recursively for manifests.
    #[arg(long, default_value = ".")]
    pub dir: PathBuf,
}

/// Reals such as `0.5`, `pi`, `3pi/4` or `2^-4`.
pub fn parse_real(s: &str) -> Result<f64, String> {
    let t = s.trim().replace(' ', "");
    if let Ok(v) = t.parse::<f64>() {
        return Ok(v);
    }
    if let Some((base, power)) = t.split_once('^') {
        let base: f64 = base.parse().map_err(|_| format!("bad base in `{s}`"))?;
        let power: f64 = power
            .parse()
            .map_err(|_| format!("bad exponent in `{s}`"))?;
        return Ok(base.powf(power));
    }
    let (num, den) = match t.split_once('/') {
        Some((n, d)) => (
            n,
            d.parse::<f64>()
                .map_err(|_| format!("bad denominator in `{s}`"))?,
        ),
        None => (t.as_str(), 1.0),
    };
    let factor = match num.strip_suffix("pi") {
        Some("") => 1.0,
        Some("-") => -1.0,
        Some(f) => f
            .trim_end_matches('*')
            .parse::<f64>()
            .map_err(|_| format!("bad multiple of pi in `{s}`"))?,
        None => num
            .parse::<f64>()
            .map_err(|_| format!("not a number: `{s}`"))?,
    };
    let scale = if num.ends_with("pi") {
        std::f64::consts::PI
    } else {
        1.0
    };
    Ok(factor * scale / den)
}

/// Two pack sizes `n,m`.
pub fn parse_packs(s: &str) -> Result<(usize, usize), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => {
            let n = a
                .parse::<usize>()
                .map_err(|_| format!("bad pack size `{a}`"))?;
            let m = b
                .parse::<usize>()
                .map_err(|_| format!("bad pack size `{b}`"))?;
            if n == 0 || m == 0 {
                return Err("pack sizes must be ≥ 1".into());
            }
            Ok((n, m))
        }
        _ => Err(format!("expected two pack sizes `n,m`, got `{s}`")),
    }
}

/// Subcommand path and every argument value, defaults included, in declaration order.
fn describe(cmd: &clap::Command, matches: &ArgMatches) -> (String, Vec<Parameter>) {
    let mut names = Vec::new();
    let mut params: Vec<Parameter> = Vec::new();
    let mut current = Some((cmd, matches));
    while let Some((c, m)) = current {
        for arg in c.get_arguments() {
            let id = arg.get_id().as_str();
            let Ok(Some(raw)) = m.try_get_raw(id) else {
                continue;
            };
            if params.iter().any(|p| p.name == id) {
                continue;
            }
            let values: Vec<String> = raw.map(|v| v.to_string_lossy().into_owned()).collect();
            params.push(Parameter {
                name: id.to_string(),
                value: values.join(","),
            });
        }
        current = m.subcommand().and_then(|(name, sub)| {
            names.push(name.to_string());
            c.find_subcommand(name).map(|sc| (sc, sub))
        });
    }
    (names.join(" "), params)
}

fn region_from(text: &str) -> CliResult<(Region, Option<f64>)> {
    let (kind, value) = text
        .split_once(':')
        .ok_or_else(|| CliError::Usage(format!("region must be kind:value, got `{text}`")))?;
    let v = parse_real(value).map_err(CliError::Usage)?;
    let half_log = |r: f64| 0.5 * (1.0 / r).ln();
    match kind {
        "rectangle" => Ok((Region::Rectangle { l: v }, Some(v))),
        "annulus" => Ok((
            Region::Annulus { r: v },
            (v > 0.0 && v < 1.0).then(|| half_log(v)),
        )),
        "slit" => Ok((Region::SlitAnnulus { r: v }, None)),
        other => Err(CliError::Usage(format!(
            "unknown region kind `{other}`; expected rectangle, annulus or slit"
        ))),
    }
}

/// Runs the experiment selected by `cli` on the current rayon pool.
pub fn compute(cli: &Cli) -> CliResult<Outcome> {
    let seed = cli.seed;
    match &cli.command {
        Command::Exponents(cmd) => match cmd {
            ExponentsCmd::Eval { formula, args } => exponents::eval(formula, args),
            ExponentsCmd::Table => Ok(exponents::table()),
            ExponentsCmd::Cascade { packs, q } => exponents::cascade(packs, *q),
        },
        Command::Sle(cmd) => match cmd {
            SleCmd::NuEstimate {
                kappa,
                b,
                paths,
                grid,
                dt,
                times,
                tolerance,
            } => sle::nu_estimate(&sle::NuConfig {
                kappa: *kappa,
                moments: b.clone(),
                times: times.clone(),
                paths: *paths,
                grid: *grid,
                dt: *dt,
                seed,
                tolerances: tolerance.clone(),
            }),
            SleCmd::Sandwich {
                kappa,
                b,
                x,
                times,
                paths,
                dt,
                upper,
            } => sle::sandwich(&sle::SandwichConfig {
                kappa: *kappa,
                b: *b,
                xs: x.clone(),
                times: times.clone(),
                paths: *paths,
                dt: *dt,
                seed,
                upper: *upper,
            }),
            SleCmd::Residual { h, nx, nt } => sle::residual(&sle::ResidualConfig {
                h: *h,
                nx: *nx,
                nt: *nt,
                ..sle::ResidualConfig::default()
            }),
            SleCmd::Trace { kappa, t_max, dt } => sle::trace(&sle::TraceConfig {
                kappa: *kappa,
                t_max: *t_max,
                dt: *dt,
                seed,
            }),
        },
        Command::Cardy(cmd) => match cmd {
            CardyCmd::Eval { theta, alpha } => cardy::eval(theta, alpha),
            CardyCmd::Mc {
                theta,
                alpha,
                runs,
                z_max,
            } => cardy::monte_carlo(&cardy::CardyMcConfig {
                theta: *theta,
                alpha: *alpha,
                runs: *runs,
                seed,
                z_max: *z_max,
            }),
        },
        Command::Excursion(cmd) => match cmd {
            ExcursionCmd::Rectangle {
                lengths,
                paths,
                s,
                dt,
                tolerance,
            } => excursion::rectangle(&excursion::RectangleConfig {
                lengths: lengths.clone(),
                paths: *paths,
                offset: *s,
                dt: *dt,
                seed,
                tolerance: *tolerance,
            }),
            ExcursionCmd::Annulus {
                radii,
                paths,
                s,
                dt,
            } => excursion::annulus(&excursion::AnnulusConfig {
                radii: radii.clone(),
                paths: *paths,
                offset: *s,
                dt: *dt,
                seed,
            }),
            ExcursionCmd::Extremal {
                region,
                mask,
                resolution,
            } => match (region, mask) {
                (Some(text), None) => {
                    let (r, exact) = region_from(text)?;
                    excursion::extremal(text, &r, *resolution, exact)
                }
                (None, Some(path)) => {
                    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                    let mask = GridMask::parse(&text)?;
                    excursion::extremal(
                        &path.display().to_string(),
                        &Region::Mask(mask),
                        *resolution,
                        None,
                    )
                }
                _ => Err(CliError::Usage(
                    "give exactly one of --region or --mask".into(),
                )),
            },
        },
        Command::Walk(cmd) => match cmd {
            WalkCmd::Nonintersection {
                packs,
                kmin,
                kmax,
                paths,
                tolerance,
            } => walk::nonintersection(&walk::WalkTimeConfig {
                packs: *packs,
                ks: powers_of_two(*kmin, *kmax),
                trials: *paths,
                seed,
                tolerance: *tolerance,
            }),
            WalkCmd::Radial {
                packs,
                radii,
                paths,
                tolerance,
            } => walk::radial(&walk::WalkRadialConfig {
                packs: *packs,
                radii: radii.clone(),
                trials: *paths,
                seed,
                tolerance: *tolerance,
            }),
            WalkCmd::Dimensions {
                steps,
                walks,
                scales,
                tolerance,
            } => walk::dimensions_experiment(&walk::DimensionsConfig {
                steps: *steps,
                walks: *walks,
                scales: scales.clone(),
                seed,
                tolerance: *tolerance,
            }),
        },
        Command::Universality(a) => {
            require(a.pilot || a.paths >= universality::FULL_PATHS, || {
                format!(
                    "paths per radius must be ≥ {} (got {}); pass --pilot for a smaller run",
                    universality::FULL_PATHS,
                    a.paths
                )
            })?;
            universality::universality(&universality::UniversalityConfig {
                radii: a.radii.clone(),
                paths: a.paths,
                dt: a.dt,
                grid: a.grid,
                resolution: a.resolution,
                seed,
                tolerance: a.tolerance,
            })
        }
        Command::Report(a) => report(&a.dir, Some(&cli.out)),
    }
}

/// Runs `outcome_of` with the manifest written first and the results synced before returning.
pub fn execute_with(
    out: &Path,
    command: &str,
    params: Vec<Parameter>,
    seed: u64,
    plot: bool,
    outcome_of: impl FnOnce() -> CliResult<Outcome>,
) -> CliResult<RunManifest> {
    let mut run = Run::start(out, command, params, seed)?;
    let outcome = match outcome_of() {
        Ok(o) => o,
        Err(e) => {
            run.fail(&e)?;
            return Err(e);
        }
    };
    run.set_layout(outcome.layout.clone());
    for t in &outcome.tables {
        run.write_table(t)?;
    }
    if plot {
        for p in &outcome.plots {
            run.write_plot(p)?;
        }
    }
    run.finish(outcome.metrics)
}

fn pool(workers: Option<usize>) -> CliResult<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        require(w >= 1, || "workers must be ≥ 1".into())?;
        b = b.num_threads(w);
    }
    b.build()
        .map_err(|e| CliError::Input(format!("cannot start worker pool: {e}")))
}

fn summarize(m: &RunManifest, out: &Path) {
    println!(
        "{}: {} outputs in {}",
        m.command,
        m.outputs.len(),
        out.display()
    );
    for r in &m.results {
        let mut line = format!("  {} = {}", r.name, r.value);
        if let Some(se) = r.stderr {
            line.push_str(&format!(" ± {se:.3e}"));
        }
        if let (Some(t), Some(tol)) = (r.target, r.tolerance) {
            line.push_str(&format!("  (target {t} ± {tol})"));
        } else if let Some(t) = r.target {
            line.push_str(&format!("  (expected {t})"));
        }
        match r.passed {
            Some(true) => line.push_str("  PASS"),
            Some(false) => line.push_str("  FAIL"),
            None => {}
        }
        println!("{line}");
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                exit::USAGE
            } else {
                exit::SUCCESS
            };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return exit::USAGE;
        }
    };
    let (command, params) = describe(&Cli::command(), &matches);
    let result = pool(cli.workers).and_then(|p| {
        p.install(|| {
            execute_with(&cli.out, &command, params, cli.seed, cli.plot, || {
                compute(&cli)
            })
        })
    });
    match result {
        Ok(m) => {
            summarize(&m, &cli.out);
            exit::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn reals() {
        assert_eq!(parse_real("0.25").unwrap(), 0.25);
        assert_eq!(parse_real("pi").unwrap(), PI);
        assert_eq!(parse_real("pi/4").unwrap(), PI / 4.0);
        assert_eq!(parse_real("3pi/4").unwrap(), 3.0 * PI / 4.0);
        assert_eq!(parse_real("2^-4").unwrap(), 0.0625);
        assert!(parse_real("tau").is_err());
        assert_eq!(parse_packs("1, 2").unwrap(), (1, 2));
        assert!(parse_packs("1").is_err());
        assert!(parse_packs("0,1").is_err());
    }

    #[test]
    fn describe_includes_defaults_in_order() {
        let m = Cli::command()
            .try_get_matches_from(["slelab", "walk", "nonintersection", "--kmax", "1024"])
            .unwrap();
        let (name, params) = describe(&Cli::command(), &m);
        assert_eq!(name, "walk nonintersection");
        let names: Vec<&str> = params.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(
            names,
            ["out", "seed", "plot", "packs", "kmin", "kmax", "paths"]
        );
        assert_eq!(
            params.iter().find(|p| p.name == "kmax").unwrap().value,
            "1024"
        );
    }

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
