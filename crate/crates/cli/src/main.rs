//! `nisim`: command-line front end.
//!
//! Exit codes: 0 success, 1 domain or input error, 2 usage error.

mod args;

use std::fs;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use serde_json::{json, Map, Value};

use nisim_core::corpus;
use nisim_core::decision::{decide_2x2, n0_chain, SearchOptions};
use nisim_core::fourier::{FourierPolynomial, FunctionFile};
use nisim_core::maxcorr::{maximal_correlation, witsenhausen_bounds};
use nisim_core::prob::JointDistribution;
use nisim_core::regularity::{high_influence_set, restriction_regular_probability, RegularityParams, SweepMode};
use nisim_core::rounding::{estimate_strategy_stats, Strategy};
use nisim_core::Error;

use args::{Cli, Command, Format, Report};

const FORMAT_VERSION: u32 = 1;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.render().to_string();
            let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("error: invalid arguments");
            eprintln!("{first} (see --help)");
            return ExitCode::from(2);
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot start {t} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(body) => {
            let out = envelope(&cli, body);
            print!("{}", render(&out, cli.format));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::from(1)
        }
    }
}

fn envelope(cli: &Cli, body: Value) -> Value {
    let mut m = Map::new();
    m.insert("nisim_format".into(), json!(FORMAT_VERSION));
    m.insert("command".into(), json!(cli.command.name()));
    m.insert("seed".into(), json!(cli.command.seed()));
    if let Value::Object(b) = body {
        m.extend(b);
    } else {
        m.insert("result".into(), body);
    }
    Value::Object(m)
}

fn render(v: &Value, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(v).expect("json value") + "\n",
        Format::Text => {
            let mut lines = Vec::new();
            flatten("", v, &mut lines);
            lines.join("\n") + "\n"
        }
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<String>) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => m.iter().for_each(|(k, x)| flatten(&join(k), x, out)),
        Value::Array(a) if a.iter().any(|x| x.is_object() || x.is_array()) => {
            a.iter().enumerate().for_each(|(i, x)| flatten(&join(&i.to_string()), x, out))
        }
        _ => out.push(format!("{prefix} = {v}")),
    }
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))
}

fn load_dist(path: &Path) -> Result<JointDistribution, Error> {
    JointDistribution::from_json(&read(path)?).map_err(|e| in_file(path, e))
}

fn in_file(path: &Path, e: Error) -> Error {
    Error::Input(format!("{}: {e}", path.display()))
}

fn load_function(path: &Path) -> Result<FourierPolynomial, Error> {
    FunctionFile::from_json(&read(path)?).and_then(FunctionFile::into_polynomial).map_err(|e| in_file(path, e))
}

/// A strategy file is either a tagged strategy or a function value table.
fn load_strategy(path: &Path) -> Result<Strategy, Error> {
    let text = read(path)?;
    if let Ok(s) = serde_json::from_str::<Strategy>(&text) {
        return Ok(s);
    }
    let table = FunctionFile::from_json(&text).and_then(FunctionFile::into_values).map_err(|e| in_file(path, e))?;
    Ok(Strategy::Table { n: table.n, values: table.values })
}

fn to_value<T: serde::Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("serializable report")
}

fn run(cli: &Cli) -> Result<Value, Error> {
    match &cli.command {
        Command::Maxcorr { dist } => {
            let r = maximal_correlation(&load_dist(dist)?)?;
            Ok(json!({
                "rho": r.rho,
                "dsbs_lower": r.dsbs_lower,
                "dsbs_upper": r.dsbs_upper,
                "f": r.f_witness,
                "g": r.g_witness,
                "singular_values": r.singular_values,
                "degenerate": r.degenerate,
                "multiplicity": r.multiplicity,
            }))
        }
        Command::Bounds { dist } => {
            let rho = maximal_correlation(&load_dist(dist)?)?.rho;
            let (lower, upper) = witsenhausen_bounds(rho)?;
            Ok(json!({ "rho": rho, "lower": lower, "upper": upper }))
        }
        Command::Fourier { function, report } => {
            let p = load_function(function)?;
            let mut m = Map::new();
            m.insert("n".into(), json!(p.n()));
            m.insert("q".into(), json!(p.q()));
            m.insert("degree".into(), json!(p.degree()));
            for r in report {
                match r {
                    Report::Influences => {
                        m.insert("influences".into(), json!(p.influences()));
                        m.insert("total_influence".into(), json!(p.total_influence()));
                    }
                    Report::Tail(d) => {
                        m.insert(format!("tail_{d}"), json!(p.degree_tail_mass(*d)));
                    }
                    Report::Mean => {
                        m.insert("mean".into(), json!(p.mean()));
                    }
                    Report::Var => {
                        m.insert("variance".into(), json!(p.variance()));
                    }
                }
            }
            Ok(Value::Object(m))
        }
        Command::Regularity { function, d, tau, exact, mc, seed } => {
            let p = load_function(function)?;
            let params = RegularityParams::single(p.basis().space().alpha(), *d, *tau)?;
            let h = high_influence_set(&p.truncate_degree(*d), params.beta());
            let mode = match (exact, mc) {
                (true, _) => SweepMode::Exact,
                (false, Some(s)) => SweepMode::MonteCarlo { samples: *s, seed: *seed },
                (false, None) => SweepMode::Auto { samples: 100_000, seed: *seed },
            };
            let est = restriction_regular_probability(&p, &h, *tau, mode)?;
            Ok(json!({
                "params": to_value(&params),
                "tail_mass": p.degree_tail_mass(*d),
                "high_influence": h,
                "regular_probability": to_value(&est),
            }))
        }
        Command::N0 { dist, delta, constants } => {
            let chain = n0_chain(&load_dist(dist)?, *delta, constants.0)?;
            Ok(json!({ "chain": to_value(&chain) }))
        }
        Command::Decide { dist, target, delta, n, report_n0, constants, work_cap } => {
            let opts = SearchOptions { work_cap: *work_cap, constants: constants.0, report_n0: *report_n0 };
            let v = decide_2x2(&load_dist(dist)?, target, *delta, *n, &opts)?;
            Ok(json!({ "target": to_value(&target), "verdict": to_value(&v) }))
        }
        Command::Simulate { dist, f, g, samples, seed, target, mode } => {
            let d = load_dist(dist)?;
            let (f, g) = (load_strategy(f)?, load_strategy(g)?);
            let stats = estimate_strategy_stats(&f, &g, &d, *samples, *seed, (*mode).into())?;
            let mut out = json!({ "stats": to_value(&stats) });
            if let Some(t) = target {
                let tv = stats.table.tv_distance(&t.table);
                out["target"] = to_value(&t);
                out["tv_to_target"] = json!(tv);
            }
            Ok(out)
        }
        Command::Examples { name, rho, alpha, low_corr, out } => {
            let d = corpus::by_name(name, rho.or(*alpha), *low_corr)?;
            if let Some(path) = out {
                fs::write(path, d.to_json() + "\n")
                    .map_err(|e| Error::Input(format!("cannot write {}: {e}", path.display())))?;
            }
            // distribution fields sit at top level so the output loads as a dist file
            let mut body = to_value(&d);
            body["name"] = json!(name);
            Ok(body)
        }
    }
}
