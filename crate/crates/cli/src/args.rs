use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "rtm", version, about = "Microtron longitudinal phase map toolkit")]
pub struct Cli {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true, env = "RTM_WORKERS")]
    pub workers: Option<usize>,

    /// Write the CSV result here instead of stdout.
    #[arg(long, short, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

/// `a:b:step`, inclusive of `b` up to rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct Range(pub Vec<f64>);

pub fn parse_range(s: &str) -> Result<Range, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("{t:?} is not a number"));
    match parts.as_slice() {
        [a] => Ok(Range(vec![num(a)?])),
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if !(a.is_finite() && b.is_finite() && step > 0.0 && step.is_finite()) || b < a {
                return Err(format!("{s:?} needs finite a <= b and step > 0"));
            }
            let n = ((b - a) / step + 1e-9).floor() as usize;
            if n > 1_000_000 {
                return Err(format!("{s:?} has more than 10^6 values"));
            }
            Ok(Range((0..=n).map(|k| ((a + k as f64 * step) * 1e12).round() / 1e12).collect()))
        }
        _ => Err(format!("{s:?} is neither a number nor a:b:step")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Window {
    /// [-0.45, 0.35] x [-0.8, 0.8]
    Auto,
    /// Around the homoclinic loop, for small mu.
    SaddleCenter,
    /// Around the triangle, for mu near 3.
    ThirdOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Line {
    R0,
    R1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BranchArg {
    Unstable,
    Stable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    Positive,
    Negative,
    Both,
}

#[derive(Debug, Args)]
pub struct RasterArgs {
    /// Cell side.
    #[arg(long, default_value_t = 1.0 / 400.0)]
    pub ell: f64,
    #[arg(long, value_enum, default_value_t = Window::Auto)]
    pub window: Window,
    /// Explicit window, overrides --window: psi range a:b.
    #[arg(long, value_parser = parse_pair)]
    pub psi_range: Option<(f64, f64)>,
    /// Explicit window: half height in w.
    #[arg(long)]
    pub w_half: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub fast_budget: u64,
    #[arg(long, default_value_t = 100_000)]
    pub deep_budget: u64,
    #[arg(long, default_value_t = 1.0)]
    pub control_w: f64,
    /// Classify surviving cells by rotation number.
    #[arg(long)]
    pub classify: bool,
}

pub fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("{s:?} is not a:b"))?;
    let a: f64 = a.trim().parse().map_err(|_| format!("{a:?} is not a number"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("{b:?} is not a number"))?;
    if !(a < b) {
        return Err(format!("{s:?} needs a < b"));
    }
    Ok((a, b))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Iterate the map from one point.
    Map {
        #[arg(long, allow_hyphen_values = true)]
        mu: f64,
        #[arg(long, allow_hyphen_values = true)]
        psi: f64,
        #[arg(long, allow_hyphen_values = true)]
        w: f64,
        /// Iterates to print; negative values iterate the inverse.
        #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
        steps: i64,
    },
    /// Fixed points, their linear types and the local stability verdict.
    Classify {
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        mu: Range,
    },
    /// Refined rotation number of one orbit and its class.
    Rotnum {
        #[arg(long)]
        mu: f64,
        #[arg(long, allow_hyphen_values = true)]
        psi: f64,
        #[arg(long, allow_hyphen_values = true)]
        w: f64,
        #[arg(long, default_value_t = 7)]
        p: u32,
        #[arg(long, default_value_t = 15)]
        q: u32,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Stability raster of one parameter value: PPM image and CSV summary.
    Raster {
        #[arg(long)]
        mu: f64,
        #[command(flatten)]
        raster: RasterArgs,
        /// Write the raster as binary PPM.
        #[arg(long)]
        ppm: Option<PathBuf>,
    },
    /// Areas of A and D over a parameter list.
    Sweep {
        #[arg(long, value_parser = parse_range)]
        mu: Range,
        #[command(flatten)]
        raster: RasterArgs,
    },
    /// Classes of the symmetry-line points over a (mu, psi) grid.
    Sections {
        #[arg(long, value_parser = parse_range)]
        mu: Range,
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        psi: Range,
        #[arg(long, default_value_t = 100_000)]
        budget: u64,
        /// PPM of the Fix(r0) set; rows run from the largest mu down.
        #[arg(long)]
        ppm_s0: Option<PathBuf>,
        /// PPM of the Fix(r1) set.
        #[arg(long)]
        ppm_s1: Option<PathBuf>,
    },
    /// Extents and capture efficiency of D.
    Extents {
        #[arg(long, value_parser = parse_range)]
        mu: Range,
        #[command(flatten)]
        raster: RasterArgs,
    },
    /// Level curves of an approximating Hamiltonian in (psi, w).
    Hamiltonian {
        /// saddle-center[:1..4], fourth-order[:4..6] or third-order.
        #[arg(long)]
        id: String,
        #[arg(long)]
        mu: f64,
        #[arg(long, allow_hyphen_values = true)]
        level: f64,
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true, default_value = "-0.5:0.5")]
        psi_range: (f64, f64),
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true, default_value = "-0.5:0.5")]
        w_range: (f64, f64),
        #[arg(long, default_value_t = 401)]
        nodes: usize,
    },
    /// Globalized invariant curve of p_h as a polyline.
    Manifold {
        #[arg(long)]
        mu: f64,
        #[arg(long, value_enum, default_value_t = BranchArg::Unstable)]
        branch: BranchArg,
        #[arg(long, value_enum, default_value_t = SideArg::Both)]
        side: SideArg,
        #[arg(long, default_value_t = 8)]
        domains: usize,
        #[arg(long, default_value_t = 256)]
        bits: u32,
    },
    /// Area of the lobe between the two primary homoclinic points.
    Lobe {
        #[arg(long, value_parser = parse_range)]
        mu: Range,
        #[arg(long, default_value_t = 256)]
        bits: u32,
        /// Series order; default depends on the precision.
        #[arg(long)]
        order: Option<usize>,
    },
    /// Fit of the scaled lobe area over a grid of h.
    Splitfit {
        #[arg(long, default_value_t = 0.6)]
        h_max: f64,
        #[arg(long, default_value_t = 0.3)]
        h_min: f64,
        #[arg(long, default_value_t = 8)]
        points: usize,
        #[arg(long, default_value_t = 512)]
        bits: u32,
    },
    /// Symmetric periodic orbits of rotation number m/n.
    Spo {
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        m: u32,
        #[arg(long)]
        n: u32,
        #[arg(long, value_enum, default_value_t = Line::R0)]
        line: Line,
    },
    /// Crossing test of W^u(p_h) against W^s of the hyperbolic m/n SPO.
    Obstruct {
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        m: u32,
        #[arg(long)]
        n: u32,
        #[arg(long, default_value_t = 256)]
        bits: u32,
        #[arg(long, default_value_t = 12)]
        unstable_domains: usize,
        #[arg(long, default_value_t = 60)]
        stable_domains: usize,
    },
    /// Run a named reproduction recipe.
    Repro {
        /// Recipe id, see --list.
        #[arg(required_unless_present = "list")]
        id: Option<String>,
        #[arg(long)]
        list: bool,
        /// Override the deep escape budget of raster recipes.
        #[arg(long)]
        deep_budget: Option<u64>,
        /// Override the precision of multiprecision recipes.
        #[arg(long)]
        bits: Option<u32>,
    },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("0.05:0.30:0.05").unwrap().0, vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3]);
        assert_eq!(parse_range("2").unwrap().0, vec![2.0]);
        assert!(parse_range("1:0:0.1").is_err());
        assert!(parse_range("0:1:0").is_err());
        assert!(parse_range("0:1").is_err());
        assert_eq!(parse_pair("-0.5:0.5").unwrap(), (-0.5, 0.5));
        assert!(parse_pair("1:1").is_err());
    }

    #[test]
    fn definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
