//! The sectioned `key = value` configuration format with explicit unit
//! suffixes (`L = 0.330 m`, `Omega = 2.27 mHz`). Every frequency is
//! converted to rad/s once, at the boundary; an empty file resolves to the
//! published apparatus.

use pendula::experiments::{Engine, SpectraRegime};
use pendula::model::{Apparatus, UpperMagnets};
use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt::Write as _;

/// A configuration problem, with the line it came from when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub message: String,
    pub line: Option<usize>,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(n) => write!(f, "config line {}: {}", n, self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError { message: message.into(), line: Some(line) }
}

/// Where the effective drive parameters come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriveSource {
    /// Fourier projection of the corrected coupling of the apparatus.
    Apparatus,
    /// Explicit `eps0` and `amplitude` from the file.
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriveSection {
    pub source: DriveSource,
    /// Mean coupling (rad/s), used when the source is explicit.
    pub eps0: f64,
    /// Modulation amplitude (rad/s), used when the source is explicit.
    pub amplitude: f64,
    /// Quadrature points per period for the apparatus projection.
    pub fourier_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSection {
    pub engine: Engine,
    /// Start deflection (rad).
    pub amplitude: f64,
    /// Admixture phase of the out-of-phase start (rad).
    pub relative_phase: f64,
    /// Step size (s); `None` means engine defaults.
    pub dt: Option<f64>,
    /// Drive periods to simulate.
    pub periods: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RabiSection {
    /// Drive angular frequency (rad/s).
    pub drive_omega: f64,
    /// Rabi frequency (rad/s); `None` derives it from the apparatus.
    pub rabi_frequency: Option<f64>,
    /// Detuning half-span in units of the Rabi frequency.
    pub span: f64,
    pub points: usize,
    /// Run length in resonant beat periods.
    pub beats: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FanSection {
    /// Grid maxima (rad/s); both grids start at zero.
    pub eps0_max: f64,
    pub amplitude_max: f64,
    pub eps0_points: usize,
    pub amplitude_points: usize,
    pub periods: usize,
    /// Frequency difference (rad/s); `None` uses the apparatus detuning.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectraSection {
    pub regime: SpectraRegime,
    /// Gaussian smoothing of the spectra (Hz).
    pub smoothing: f64,
    /// Relative peak threshold.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigencheckSection {
    /// Frequency difference `f1 - f2` (rad/s after conversion).
    pub frequency_difference: f64,
    /// Coupling half-range (rad/s); `None` means `0.05 * omega0`.
    pub coupling_max: Option<f64>,
    pub points: usize,
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub apparatus: Apparatus,
    pub drive: DriveSection,
    pub run: RunSection,
    pub rabi: RabiSection,
    pub fan: FanSection,
    pub spectra: SpectraSection,
    pub eigencheck: EigencheckSection,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            apparatus: Apparatus::paper_default(),
            drive: DriveSection {
                source: DriveSource::Apparatus,
                eps0: 0.0,
                amplitude: 0.213,
                fourier_samples: 1024,
            },
            run: RunSection {
                engine: Engine::Schrodinger,
                amplitude: 0.01,
                relative_phase: 0.0,
                dt: None,
                periods: 1,
            },
            rabi: RabiSection {
                drive_omega: 2.0 * PI * 11.8e-3,
                rabi_frequency: None,
                span: 5.0,
                points: 21,
                beats: 6.0,
            },
            fan: FanSection {
                eps0_max: 2.0,
                amplitude_max: 2.0,
                eps0_points: 60,
                amplitude_points: 60,
                periods: 5,
                delta: None,
            },
            spectra: SpectraSection {
                regime: SpectraRegime::Lzsm,
                smoothing: 0.025,
                threshold: 0.05,
            },
            eigencheck: EigencheckSection {
                frequency_difference: 2.0 * PI * 24.0e-3,
                coupling_max: None,
                points: 101,
            },
        }
    }
}

/// Dimension a value must carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Unit {
    Frequency,
    Length,
    Mass,
    Acceleration,
    MagneticMoment,
    Time,
    Angle,
    Bare,
}

/// Parse `number [unit]`, converting to the internal unit of the dimension
/// (rad/s, m, kg, m/s^2, A m^2, s, rad, or none).
fn parse_value(raw: &str, unit: Unit, line: usize, key: &str) -> Result<f64, ConfigError> {
    let raw = raw.trim();
    let (num_str, suffix) = match raw.find(|c: char| c.is_ascii_alphabetic()) {
        Some(pos) => (&raw[..pos], raw[pos..].trim()),
        None => (raw, ""),
    };
    let value: f64 = num_str.trim().parse().map_err(|_| {
        err(line, format!("key '{key}': cannot parse number from '{raw}'"))
    })?;
    let converted = match (unit, suffix) {
        (Unit::Frequency, "Hz") => Some(2.0 * PI * value),
        (Unit::Frequency, "mHz") => Some(2.0 * PI * value * 1e-3),
        (Unit::Frequency, "rad/s") => Some(value),
        (Unit::Length, "m") => Some(value),
        (Unit::Length, "mm") => Some(value * 1e-3),
        (Unit::Length, "cm") => Some(value * 1e-2),
        (Unit::Mass, "kg") => Some(value),
        (Unit::Mass, "g") => Some(value * 1e-3),
        (Unit::Acceleration, "m/s^2") => Some(value),
        (Unit::MagneticMoment, "Am^2") | (Unit::MagneticMoment, "A m^2") => Some(value),
        (Unit::Time, "s") => Some(value),
        (Unit::Time, "ms") => Some(value * 1e-3),
        (Unit::Angle, "rad") => Some(value),
        (Unit::Angle, "deg") => Some(value * PI / 180.0),
        (Unit::Angle, "") => Some(value),
        (Unit::Bare, "") => Some(value),
        _ => None,
    };
    converted.ok_or_else(|| {
        let expected = match unit {
            Unit::Frequency => "Hz, mHz or rad/s",
            Unit::Length => "m, mm or cm",
            Unit::Mass => "kg or g",
            Unit::Acceleration => "m/s^2",
            Unit::MagneticMoment => "Am^2",
            Unit::Time => "s or ms",
            Unit::Angle => "rad or deg",
            Unit::Bare => "no unit",
        };
        err(
            line,
            format!("key '{key}': unit '{suffix}' invalid, expected {expected}"),
        )
    })
}

fn parse_count(raw: &str, line: usize, key: &str) -> Result<usize, ConfigError> {
    raw.trim()
        .parse()
        .map_err(|_| err(line, format!("key '{key}': expected a positive integer, got '{raw}'")))
}

/// Parse a configuration file body. Unknown sections or keys, malformed
/// values and unit violations are reported with their line number.
pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let mut config = Config::default();
    let mut upper_on = config.apparatus.magnets.upper.is_some();
    let mut upper = UpperMagnets { moment: 6.544, separation: 0.130 };
    let mut section = String::from("apparatus");
    let mut seen = BTreeSet::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err(line, format!("unterminated section header '{content}'")))?
                .trim();
            match name {
                "apparatus" | "drive" | "run" | "rabi" | "fan" | "spectra" | "eigencheck" => {
                    section = name.to_string();
                }
                other => return Err(err(line, format!("unknown section '[{other}]'"))),
            }
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected 'key = value', got '{content}'")))?;
        let key = key.trim();
        let value = value.trim();
        if !seen.insert(format!("{section}.{key}")) {
            return Err(err(line, format!("duplicate key '{key}' in [{section}]")));
        }

        let positive = |v: f64| -> Result<f64, ConfigError> {
            if v > 0.0 {
                Ok(v)
            } else {
                Err(err(line, format!("key '{key}' must be positive, got {v}")))
            }
        };
        let app = &mut config.apparatus;
        match (section.as_str(), key) {
            ("apparatus", "mass") => {
                app.pendula.mass = positive(parse_value(value, Unit::Mass, line, key)?)?
            }
            ("apparatus", "gravity") => {
                app.constants.g =
                    positive(parse_value(value, Unit::Acceleration, line, key)?)?
            }
            ("apparatus", "f1") => {
                app.pendula.omega1 = positive(parse_value(value, Unit::Frequency, line, key)?)?
            }
            ("apparatus", "f2") => {
                app.pendula.omega2 = positive(parse_value(value, Unit::Frequency, line, key)?)?
            }
            ("apparatus", "com1") => {
                app.pendula.com1 = positive(parse_value(value, Unit::Length, line, key)?)?
            }
            ("apparatus", "com2") => {
                app.pendula.com2 = positive(parse_value(value, Unit::Length, line, key)?)?
            }
            ("apparatus", "l_l") => {
                app.pendula.lower_arm = positive(parse_value(value, Unit::Length, line, key)?)?
            }
            ("apparatus", "l_u") => {
                app.pendula.upper_arm = positive(parse_value(value, Unit::Length, line, key)?)?
            }
            ("apparatus", "m_l") => {
                app.magnets.lower_moment =
                    parse_value(value, Unit::MagneticMoment, line, key)?
            }
            ("apparatus", "L") => {
                app.magnets.pivot_separation =
                    positive(parse_value(value, Unit::Length, line, key)?)?
            }
            ("apparatus", "Omega") => {
                app.magnets.drive_omega = parse_value(value, Unit::Frequency, line, key)?
            }
            ("apparatus", "upper_magnets") => match value {
                "on" => upper_on = true,
                "off" => upper_on = false,
                other => {
                    return Err(err(
                        line,
                        format!("key 'upper_magnets': expected on or off, got '{other}'"),
                    ))
                }
            },
            ("apparatus", "m_u") => {
                upper.moment = parse_value(value, Unit::MagneticMoment, line, key)?
            }
            ("apparatus", "L_u") => {
                upper.separation = positive(parse_value(value, Unit::Length, line, key)?)?
            }

            ("drive", "source") => match value {
                "apparatus" => config.drive.source = DriveSource::Apparatus,
                "explicit" => config.drive.source = DriveSource::Explicit,
                other => {
                    return Err(err(
                        line,
                        format!("key 'source': expected apparatus or explicit, got '{other}'"),
                    ))
                }
            },
            ("drive", "eps0") => {
                config.drive.eps0 = parse_value(value, Unit::Frequency, line, key)?
            }
            ("drive", "amplitude") => {
                config.drive.amplitude = parse_value(value, Unit::Frequency, line, key)?
            }
            ("drive", "fourier_samples") => {
                config.drive.fourier_samples = parse_count(value, line, key)?
            }

            ("run", "engine") => {
                config.run.engine = Engine::parse(value).map_err(|e| err(line, e.to_string()))?
            }
            ("run", "amplitude") => {
                config.run.amplitude = parse_value(value, Unit::Angle, line, key)?
            }
            ("run", "relative_phase") => {
                config.run.relative_phase = parse_value(value, Unit::Angle, line, key)?
            }
            ("run", "dt") => {
                config.run.dt = match value {
                    "auto" => None,
                    v => Some(parse_value(v, Unit::Time, line, key)?),
                }
            }
            ("run", "periods") => config.run.periods = parse_count(value, line, key)?,

            ("rabi", "drive_frequency") => {
                config.rabi.drive_omega = parse_value(value, Unit::Frequency, line, key)?
            }
            ("rabi", "rabi_frequency") => {
                config.rabi.rabi_frequency = match value {
                    "auto" => None,
                    v => Some(parse_value(v, Unit::Frequency, line, key)?),
                }
            }
            ("rabi", "span") => config.rabi.span = parse_value(value, Unit::Bare, line, key)?,
            ("rabi", "points") => config.rabi.points = parse_count(value, line, key)?,
            ("rabi", "beats") => {
                config.rabi.beats = parse_value(value, Unit::Bare, line, key)?
            }

            ("fan", "eps0_max") => {
                config.fan.eps0_max = parse_value(value, Unit::Frequency, line, key)?
            }
            ("fan", "amplitude_max") => {
                config.fan.amplitude_max = parse_value(value, Unit::Frequency, line, key)?
            }
            ("fan", "eps0_points") => config.fan.eps0_points = parse_count(value, line, key)?,
            ("fan", "amplitude_points") => {
                config.fan.amplitude_points = parse_count(value, line, key)?
            }
            ("fan", "periods") => config.fan.periods = parse_count(value, line, key)?,
            ("fan", "delta") => {
                config.fan.delta = match value {
                    "auto" => None,
                    v => Some(parse_value(v, Unit::Frequency, line, key)?),
                }
            }

            ("spectra", "regime") => {
                config.spectra.regime = match value {
                    "rabi" => SpectraRegime::Rabi,
                    "lzsm" => SpectraRegime::Lzsm,
                    other => {
                        return Err(err(
                            line,
                            format!("key 'regime': expected rabi or lzsm, got '{other}'"),
                        ))
                    }
                }
            }
            ("spectra", "smoothing") => {
                // spectra smoothing is quoted in Hz, not angular
                config.spectra.smoothing =
                    parse_value(value, Unit::Frequency, line, key)? / (2.0 * PI)
            }
            ("spectra", "threshold") => {
                config.spectra.threshold = parse_value(value, Unit::Bare, line, key)?
            }

            ("eigencheck", "frequency_difference") => {
                config.eigencheck.frequency_difference =
                    parse_value(value, Unit::Frequency, line, key)?
            }
            ("eigencheck", "coupling_max") => {
                config.eigencheck.coupling_max = match value {
                    "auto" => None,
                    v => Some(parse_value(v, Unit::Frequency, line, key)?),
                }
            }
            ("eigencheck", "points") => {
                config.eigencheck.points = parse_count(value, line, key)?
            }

            (section, key) => {
                return Err(err(line, format!("unknown key '{key}' in [{section}]")))
            }
        }
    }

    config.apparatus.magnets.upper = upper_on.then_some(upper);
    config
        .apparatus
        .validate()
        .map_err(|e| ConfigError { message: e.to_string(), line: None })?;
    validate(&config)?;
    Ok(config)
}

fn validate(config: &Config) -> Result<(), ConfigError> {
    let bad = |message: String| ConfigError { message, line: None };
    if config.drive.fourier_samples < 64 {
        return Err(bad("drive.fourier_samples must be at least 64".to_string()));
    }
    for (name, n) in [
        ("rabi.points", config.rabi.points),
        ("fan.eps0_points", config.fan.eps0_points),
        ("fan.amplitude_points", config.fan.amplitude_points),
        ("fan.periods", config.fan.periods),
        ("run.periods", config.run.periods),
        ("eigencheck.points", config.eigencheck.points),
    ] {
        if n == 0 {
            return Err(bad(format!("{name} must be positive")));
        }
    }
    if let Some(dt) = config.run.dt {
        if !(dt > 0.0) {
            return Err(bad(format!("run.dt must be positive, got {dt}")));
        }
    }
    if !(config.spectra.threshold > 0.0 && config.spectra.threshold < 1.0) {
        return Err(bad(format!(
            "spectra.threshold must lie in (0, 1), got {}",
            config.spectra.threshold
        )));
    }
    Ok(())
}

/// Serialize the resolved configuration; `parse_config` reads it back to an
/// identical value. Internal units are written out (rad/s, m, kg, s, rad).
pub fn serialize_config(config: &Config) -> String {
    let mut s = String::new();
    let app = &config.apparatus;
    let opt_freq = |v: Option<f64>| match v {
        None => "auto".to_string(),
        Some(x) => format!("{x} rad/s"),
    };
    writeln!(s, "[apparatus]").unwrap();
    writeln!(s, "mass = {} kg", app.pendula.mass).unwrap();
    writeln!(s, "gravity = {} m/s^2", app.constants.g).unwrap();
    writeln!(s, "f1 = {} rad/s", app.pendula.omega1).unwrap();
    writeln!(s, "f2 = {} rad/s", app.pendula.omega2).unwrap();
    writeln!(s, "com1 = {} m", app.pendula.com1).unwrap();
    writeln!(s, "com2 = {} m", app.pendula.com2).unwrap();
    writeln!(s, "l_l = {} m", app.pendula.lower_arm).unwrap();
    writeln!(s, "l_u = {} m", app.pendula.upper_arm).unwrap();
    writeln!(s, "m_l = {} Am^2", app.magnets.lower_moment).unwrap();
    writeln!(s, "L = {} m", app.magnets.pivot_separation).unwrap();
    writeln!(s, "Omega = {} rad/s", app.magnets.drive_omega).unwrap();
    match &app.magnets.upper {
        Some(u) => {
            writeln!(s, "upper_magnets = on").unwrap();
            writeln!(s, "m_u = {} Am^2", u.moment).unwrap();
            writeln!(s, "L_u = {} m", u.separation).unwrap();
        }
        None => writeln!(s, "upper_magnets = off").unwrap(),
    }
    writeln!(s).unwrap();
    writeln!(s, "[drive]").unwrap();
    let source = match config.drive.source {
        DriveSource::Apparatus => "apparatus",
        DriveSource::Explicit => "explicit",
    };
    writeln!(s, "source = {source}").unwrap();
    writeln!(s, "eps0 = {} rad/s", config.drive.eps0).unwrap();
    writeln!(s, "amplitude = {} rad/s", config.drive.amplitude).unwrap();
    writeln!(s, "fourier_samples = {}", config.drive.fourier_samples).unwrap();
    writeln!(s).unwrap();
    writeln!(s, "[run]").unwrap();
    writeln!(s, "engine = {}", config.run.engine.label()).unwrap();
    writeln!(s, "amplitude = {} rad", config.run.amplitude).unwrap();
    writeln!(s, "relative_phase = {} rad", config.run.relative_phase).unwrap();
    match config.run.dt {
        None => writeln!(s, "dt = auto").unwrap(),
        Some(dt) => writeln!(s, "dt = {dt} s").unwrap(),
    }
    writeln!(s, "periods = {}", config.run.periods).unwrap();
    writeln!(s).unwrap();
    writeln!(s, "[rabi]").unwrap();
    writeln!(s, "drive_frequency = {} rad/s", config.rabi.drive_omega).unwrap();
    writeln!(s, "rabi_frequency = {}", opt_freq(config.rabi.rabi_frequency)).unwrap();
    writeln!(s, "span = {}", config.rabi.span).unwrap();
    writeln!(s, "points = {}", config.rabi.points).unwrap();
    writeln!(s, "beats = {}", config.rabi.beats).unwrap();
    writeln!(s).unwrap();
    writeln!(s, "[fan]").unwrap();
    writeln!(s, "eps0_max = {} rad/s", config.fan.eps0_max).unwrap();
    writeln!(s, "amplitude_max = {} rad/s", config.fan.amplitude_max).unwrap();
    writeln!(s, "eps0_points = {}", config.fan.eps0_points).unwrap();
    writeln!(s, "amplitude_points = {}", config.fan.amplitude_points).unwrap();
    writeln!(s, "periods = {}", config.fan.periods).unwrap();
    writeln!(s, "delta = {}", opt_freq(config.fan.delta)).unwrap();
    writeln!(s).unwrap();
    writeln!(s, "[spectra]").unwrap();
    writeln!(s, "regime = {}", config.spectra.regime.label()).unwrap();
    writeln!(s, "smoothing = {} rad/s", config.spectra.smoothing * 2.0 * PI).unwrap();
    writeln!(s, "threshold = {}", config.spectra.threshold).unwrap();
    writeln!(s).unwrap();
    writeln!(s, "[eigencheck]").unwrap();
    writeln!(
        s,
        "frequency_difference = {} rad/s",
        config.eigencheck.frequency_difference
    )
    .unwrap();
    writeln!(s, "coupling_max = {}", opt_freq(config.eigencheck.coupling_max)).unwrap();
    writeln!(s, "points = {}", config.eigencheck.points).unwrap();
    s
}
