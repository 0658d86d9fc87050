//! JSON experiment specification: one document per run, flags overriding
//! the top-level scalar fields, validated into a resolved plan before any
//! work starts.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use btl_core::analytic::Orientation;
use btl_core::{BaseGrain, ConvexPolygon, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Simulate,
    Analytic,
    Estimate,
    Reconstruct,
    Oracle,
    Window,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mode::Simulate => "simulate",
            Mode::Analytic => "analytic",
            Mode::Estimate => "estimate",
            Mode::Reconstruct => "reconstruct",
            Mode::Oracle => "oracle",
            Mode::Window => "window",
        };
        f.write_str(s)
    }
}

/// Orientation parameter as it appears in a spec file: a nonnegative
/// number, or one of the strings "inf" / "aligned" for the degenerate
/// aligned model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaSpec(pub Orientation);

impl Serialize for AlphaSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Orientation::Finite(a) => s.serialize_f64(a),
            Orientation::Aligned => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for AlphaSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(a) if a.is_finite() && a >= 0.0 => Ok(AlphaSpec(Orientation::Finite(a))),
            Raw::Num(a) => Err(D::Error::custom(format!(
                "orientation exponent must be finite and nonnegative, got {a}"
            ))),
            Raw::Str(s)
                if matches!(s.to_ascii_lowercase().as_str(), "inf" | "infinity" | "aligned") =>
            {
                Ok(AlphaSpec(Orientation::Aligned))
            }
            Raw::Str(s) => Err(D::Error::custom(format!(
                "unrecognized orientation value {s:?}; use a number or \"inf\""
            ))),
        }
    }
}

/// Base grain as it appears in a spec file. Ellipse semi-axes are (p, q);
/// rectangle sides (a, b) are full side lengths; polygon vertices must be
/// strictly convex and counterclockwise.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum GrainSpec {
    Ellipse {
        p: f64,
        q: f64,
        #[serde(default = "default_vertices")]
        vertices: usize,
    },
    Rectangle {
        a: f64,
        b: f64,
    },
    Polygon {
        points: Vec<[f64; 2]>,
    },
}

fn default_vertices() -> usize {
    30
}

impl GrainSpec {
    pub fn to_grain(&self) -> Result<BaseGrain, String> {
        let g = match self {
            GrainSpec::Ellipse { p, q, vertices } => BaseGrain::Ellipse {
                p: *p,
                q: *q,
                m: *vertices,
            },
            GrainSpec::Rectangle { a, b } => BaseGrain::Rectangle { a: *a, b: *b },
            GrainSpec::Polygon { points } => BaseGrain::Polygon(
                ConvexPolygon::new(points.iter().map(|p| Vec2::new(p[0], p[1])).collect())
                    .map_err(|e| format!("invalid polygon grain: {e}"))?,
            ),
        };
        g.validate().map_err(|e| format!("invalid grain: {e}"))?;
        Ok(g)
    }
}

/// Grain shape used to evaluate the analytic formulas in estimate mode:
/// the simulated polygon (default, unbiased) or the ideal smooth shape
/// (exposes the discretization bias when the grain is an ellipse).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorShape {
    #[default]
    Simulated,
    Ideal,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Optional mode pin; when present it must agree with the mode given
    /// on the command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub grains: Vec<GrainSpec>,
    #[serde(default)]
    pub alphas: Vec<AlphaSpec>,
    /// Target area fractions; mutually exclusive with `gammas`.
    #[serde(default)]
    pub phi_targets: Vec<f64>,
    /// Explicit intensities; mutually exclusive with `phi_targets`.
    #[serde(default)]
    pub gammas: Vec<f64>,
    /// Side of the periodic simulation window.
    #[serde(default = "default_window_side")]
    pub window_side: f64,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    /// Bootstrap resamples per reported standard error.
    #[serde(default = "default_n_boot")]
    pub n_boot: usize,
    // Destination and parallelism never influence the numbers, so they
    // stay out of the config echo: identical experiments produce
    // byte-identical files wherever they are written.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing)]
    pub threads: Option<usize>,
    /// estimate mode: analytics used for the inversion formulas.
    #[serde(default)]
    pub estimator_shape: EstimatorShape,
    /// reconstruct mode: largest Fourier frequency.
    #[serde(default = "default_frequencies")]
    pub frequencies: usize,
    /// reconstruct mode: angular grid size of the output table.
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// oracle mode: number of random polygon pairs.
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    /// window mode: observation square side as a multiple of the grain
    /// diameter.
    #[serde(default = "default_window_factor")]
    pub window_factor: f64,
    /// window mode: (j, r, s) triples to compare; defaults to the full
    /// supported set.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub combos: Vec<[usize; 3]>,
    /// window mode: experimental dilation factors for the mixed-density
    /// extraction by a quadratic fit of mean Euler values.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dilations: Vec<f64>,
}

fn default_window_side() -> f64 {
    1.0
}
fn default_reps() -> usize {
    100
}
fn default_n_boot() -> usize {
    10_000
}
fn default_frequencies() -> usize {
    32
}
fn default_grid() -> usize {
    256
}
fn default_pairs() -> usize {
    20
}
fn default_window_factor() -> f64 {
    5.0
}

/// Command-line overrides applied on top of the spec file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

/// Fully validated run plan: the echoed spec (overrides applied), the
/// concrete grains and orientations, and the output path.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub mode: Mode,
    pub spec: ExperimentSpec,
    pub grains: Vec<BaseGrain>,
    pub alphas: Vec<Orientation>,
    pub out: PathBuf,
}

/// (area fraction, intensity) pairs of the sweep for a grain of the given
/// area, from whichever of the two intensity lists the spec file uses.
pub fn intensity_pairs(spec: &ExperimentSpec, area: f64) -> Result<Vec<(f64, f64)>, String> {
    if !spec.phi_targets.is_empty() && !spec.gammas.is_empty() {
        return Err("give phi_targets or gammas, not both".into());
    }
    if !spec.phi_targets.is_empty() {
        return spec
            .phi_targets
            .iter()
            .map(|&phi| {
                if !(0.0 < phi && phi < 1.0) {
                    return Err(format!("phi target must lie in (0,1), got {phi}"));
                }
                Ok((phi, -(-phi).ln_1p() / area))
            })
            .collect();
    }
    if !spec.gammas.is_empty() {
        return spec
            .gammas
            .iter()
            .map(|&gamma| {
                if !(gamma > 0.0 && gamma.is_finite()) {
                    return Err(format!("intensity must be positive and finite, got {gamma}"));
                }
                Ok((1.0 - (-gamma * area).exp(), gamma))
            })
            .collect();
    }
    Err("the sweep needs phi_targets or gammas".into())
}

pub fn resolve(
    cli_mode: Mode,
    mut spec: ExperimentSpec,
    overrides: &Overrides,
) -> Result<Resolved, String> {
    if let Some(m) = spec.mode {
        if m != cli_mode {
            return Err(format!(
                "spec file pins mode {m} but the command line asked for {cli_mode}"
            ));
        }
    }
    spec.mode = Some(cli_mode);
    if let Some(s) = overrides.seed {
        spec.seed = s;
    }
    if let Some(r) = overrides.reps {
        spec.reps = r;
    }
    if let Some(ref o) = overrides.out {
        spec.out = Some(o.clone());
    }
    if let Some(t) = overrides.threads {
        spec.threads = Some(t);
    }

    let grains: Vec<BaseGrain> = spec
        .grains
        .iter()
        .map(|g| g.to_grain())
        .collect::<Result<_, _>>()?;
    let alphas: Vec<Orientation> = spec.alphas.iter().map(|a| a.0).collect();

    let needs_model = !matches!(cli_mode, Mode::Oracle);
    if needs_model {
        if grains.is_empty() {
            return Err("the sweep needs at least one grain".into());
        }
        if alphas.is_empty() {
            return Err("the sweep needs at least one orientation value".into());
        }
    }
    let single_cell = matches!(cli_mode, Mode::Estimate | Mode::Reconstruct | Mode::Window);
    if single_cell {
        if grains.len() != 1 || alphas.len() != 1 {
            return Err(format!(
                "{cli_mode} mode runs one cell: give exactly one grain and one orientation"
            ));
        }
        let n_intensity = spec.phi_targets.len() + spec.gammas.len();
        if n_intensity != 1 {
            return Err(format!(
                "{cli_mode} mode runs one cell: give exactly one phi target or one intensity"
            ));
        }
    }
    match cli_mode {
        Mode::Simulate | Mode::Estimate | Mode::Window => {
            if spec.reps == 0 {
                return Err("simulation modes need reps >= 1".into());
            }
            // The intensity lists must be coherent; probe with the first
            // grain's simulated area.
            let poly = grains[0]
                .discretize()
                .map_err(|e| format!("grain cannot be discretized: {e}"))?;
            intensity_pairs(&spec, poly.area())?;
        }
        Mode::Analytic => {
            // Either list is accepted; an empty sweep falls back to a
            // dense default grid at run time.
            if !spec.phi_targets.is_empty() && !spec.gammas.is_empty() {
                return Err("give phi_targets or gammas, not both".into());
            }
        }
        Mode::Reconstruct => {
            intensity_pairs(&spec, grains[0].area())?;
            if spec.grid == 0 {
                return Err("reconstruction grid must be nonempty".into());
            }
        }
        Mode::Oracle => {
            if spec.pairs == 0 {
                return Err("oracle mode needs pairs >= 1".into());
            }
        }
    }
    if cli_mode == Mode::Simulate {
        // The periodic union requires every grain to fit well inside the
        // window; fail fast instead of failing every replicate.
        for g in &grains {
            let poly = g
                .discretize()
                .map_err(|e| format!("grain cannot be discretized: {e}"))?;
            if 2.0 * poly.circumradius() >= spec.window_side {
                return Err(format!(
                    "window side {} does not admit a grain of circumradius {}",
                    spec.window_side,
                    poly.circumradius()
                ));
            }
        }
    }
    if cli_mode == Mode::Window {
        if spec.window_factor < 1.0 {
            return Err(format!(
                "window_factor must be >= 1, got {}",
                spec.window_factor
            ));
        }
        for c in &spec.combos {
            let [j, r, s] = *c;
            let ok = j <= 2
                && r <= 1
                && (s == 0 || s == 2)
                && !(j == 2 && s != 0)
                && !(j == 0 && r != 0);
            if !ok {
                return Err(format!(
                    "unsupported window combo (j={j}, r={r}, s={s}); j<=2, r<=1, s in {{0,2}}, j=2 needs s=0, j=0 needs r=0"
                ));
            }
        }
        for &d in &spec.dilations {
            if !(d > 0.0 && d.is_finite()) {
                return Err(format!("dilation factors must be positive, got {d}"));
            }
        }
    }

    let out = spec
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("btl_{cli_mode}.csv")));
    Ok(Resolved {
        mode: cli_mode,
        spec,
        grains,
        alphas,
        out,
    })
}
