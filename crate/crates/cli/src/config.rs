//! Command-line arguments and their validation.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use qwres::graph::{Graph, TailedGraph};
use qwres::spectral::{DEFAULT_TOL_CIRCLE, DEFAULT_TOL_CLUSTER};
use qwres::{Error, Result};
use serde_json::{json, Value};

use crate::format::Format;

#[derive(Parser, Debug)]
#[command(
    name = "qwres",
    version,
    about = "Resonances and scattering of the tunable Grover walk on graphs with tails"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Eigenvalues of the internal walk for each tuning parameter.
    Resonances(GraphArgs),
    /// Transmission out of one tail over a grid of quasi-energies.
    Transmission {
        #[command(flatten)]
        graph: GraphArgs,
        /// Number of quasi-energies on [0, 2 pi).
        #[arg(long, default_value_t = 512)]
        grid: usize,
        /// Inflow tail, numbered from 1.
        #[arg(long, default_value_t = 1)]
        inflow: usize,
    },
    /// Reduction ledger and comparison of the perturbative asymptotics with the true eigenvalues.
    Perturb(GraphArgs),
    /// Runs the acceptance checks on the built-in fixtures.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Clone)]
pub struct GraphArgs {
    /// Built-in internal graph, `cycle:<n>` or `complete:<n>`.
    #[arg(long, conflicts_with = "graph")]
    pub preset: Option<String>,
    /// JSON graph file with `vertices`, `edges` and optional `tails`.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Tail attachment vertices, e.g. `v0,v1,v2`. Repeating a vertex attaches several tails.
    #[arg(long)]
    pub tails: Option<String>,
    /// Tuning parameters, a list `0.1,0.25` or a range `a:b:n`.
    #[arg(long)]
    pub eps: Option<String>,
    /// Output directory. Without it the main table is written to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[arg(long, default_value_t = DEFAULT_TOL_CLUSTER)]
    pub tol_cluster: f64,
    #[arg(long, default_value_t = DEFAULT_TOL_CIRCLE)]
    pub tol_circle: f64,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    /// Restrict to the named fixtures (repeatable).
    #[arg(long)]
    pub fixture: Vec<String>,
    /// Replace every residual tolerance by this value.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `json` prints the machine-readable summary instead of the report lines.
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

/// Validated configuration shared by the sweep commands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub graph: TailedGraph,
    pub source: String,
    pub eps: Vec<f64>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub tol_cluster: f64,
    pub tol_circle: f64,
}

impl RunConfig {
    pub fn new(args: &GraphArgs, default_eps: &str) -> Result<Self> {
        let (graph, source) = load_graph(args)?;
        let eps = parse_eps(args.eps.as_deref().unwrap_or(default_eps))?;
        for (name, v) in [("tol-cluster", args.tol_cluster), ("tol-circle", args.tol_circle)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Input(format!("{name} must be a non-negative number")));
            }
        }
        Ok(RunConfig {
            graph,
            source,
            eps,
            out: args.out.clone(),
            format: args.format,
            tol_cluster: args.tol_cluster,
            tol_circle: args.tol_circle,
        })
    }

    /// Common part of every sidecar.
    pub fn meta(&self, command: &str) -> Value {
        let g = &self.graph;
        json!({
            "software": format!("qwres {}", env!("CARGO_PKG_VERSION")),
            "command": command,
            "graph": {
                "source": self.source,
                "vertices": g.num_vertices(),
                "edges": g.graph().edges(),
                "tail_vertices": (0..g.num_tails()).map(|j| g.tail_vertex(j)).collect::<Vec<_>>(),
            },
            "eps": self.eps,
            "tolerances": { "cluster": self.tol_cluster, "circle": self.tol_circle },
        })
    }
}

fn load_graph(args: &GraphArgs) -> Result<(TailedGraph, String)> {
    let tails = args.tails.as_deref().map(parse_tails).transpose()?;
    let (internal, file_tails, source) = match (&args.preset, &args.graph) {
        (Some(p), None) => (Graph::preset(p)?, Vec::new(), format!("preset {p}")),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
            let tg = TailedGraph::from_json(&text)?;
            let ft: Vec<usize> = (0..tg.num_tails()).map(|j| tg.tail_vertex(j)).collect();
            (tg.graph().clone(), ft, format!("file {}", path.display()))
        }
        _ => return Err(Error::Input("exactly one of --preset or --graph is required".into())),
    };
    let vertices = tails.unwrap_or(file_tails);
    if vertices.is_empty() {
        return Err(Error::Input("no tails given".into()));
    }
    Ok((TailedGraph::with_single_tails(internal, &vertices)?, source))
}

/// Parses `v0,v1,2` into vertex indices.
pub fn parse_tails(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.strip_prefix('v')
                .unwrap_or(t)
                .parse()
                .map_err(|_| Error::Input(format!("bad tail vertex `{t}`")))
        })
        .collect()
}

/// Parses `a,b,c` or `a:b:n` (n evenly spaced points, both ends included).
pub fn parse_eps(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Input(format!("bad eps specification `{s}`"));
    let vals: Vec<f64> = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        match n {
            0 => return Err(bad()),
            1 => vec![a],
            _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
        }
    } else {
        s.split(',')
            .map(|t| t.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?
    };
    if let Some(&v) = vals.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::ParamOutOfRange { name: "eps", value: v });
    }
    Ok(vals)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eps_forms() {
        assert_eq!(parse_eps("0.1,0.25").unwrap(), vec![0.1, 0.25]);
        assert_eq!(parse_eps("0:1:5").unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(parse_eps("0.3:0.3:1").unwrap(), vec![0.3]);
        assert!(matches!(parse_eps("1.5"), Err(Error::ParamOutOfRange { .. })));
        assert!(parse_eps("0:1").is_err());
        assert!(parse_eps("x").is_err());
    }

    #[test]
    fn tail_lists() {
        assert_eq!(parse_tails("v0,v1, 2").unwrap(), vec![0, 1, 2]);
        assert!(parse_tails("w1").is_err());
    }
}
