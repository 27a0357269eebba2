use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use num_bigint::BigInt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use tfg::elekmonod::{entropy_row, pattern_count, reduced_words, word_acts_nontrivially, word_string, VerticalStrategy};
use tfg::folner::{
    consecutive_blocks, delta_schedule, extract_folner_set, folner_bound_zd, phi_recursion, psi_tilde_recursion,
    ZdOracle,
};
use tfg::fullgroup::{CocycleTable, FullGroup};
use tfg::groups::{box_elements, GroupContext, GroupElement};
use tfg::hyperfinite::{folner_graph_partition, quasitile, tile_tower, verify_certificate, HypothesisPolicy};
use tfg::lef::{check_residually_finite, lef_search, odometer_finite_model, sample_points};
use tfg::rational::{parse_rational, serde_pq, Rational};
use tfg::sofic::{build_theta, check_injective_almost_action, schreier_graph, shift};
use tfg::systems::{BaseSequence, SystemContext};

#[derive(Parser)]
#[command(name = "tfg", version, about = "Finite approximation experiments for topological full groups")]
struct Cli {
    /// Seed for sampled points.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Work budget (group elements, patterns, explicit tuples).
    #[arg(long, global = true, default_value_t = 1 << 22)]
    budget: u64,
    /// Write the artifact here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Emit JSON instead of CSV/text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pattern counts of the Elek–Monod coloring against the entropy bound.
    Entropy(EntropyArgs),
    /// Nontriviality witnesses for reduced words in the involutions.
    Freewords(FreewordsArgs),
    /// Injective almost action of a ball of the full group of an odometer.
    SoficCheck(SoficArgs),
    /// Quasi-tiling of a box and the induced graph partition.
    Quasitile(QuasitileArgs),
    /// Closed-form Følner bound for ℤ^d actions.
    FolnerBound(FolnerBoundArgs),
    /// Følner set of ⟨+1⟩ extracted from a partition certificate.
    FolnerExtract(FolnerExtractArgs),
    /// Φ/φ recursion table (CSV).
    PhiTable(PhiArgs),
    /// Ψ recursion table (CSV).
    PsiTable(PsiArgs),
    /// Minimal LEF level for an odometer ball.
    Lef(LefArgs),
    /// Run an experiment described by a JSON config.
    Run {
        config: PathBuf,
    },
}

fn rational(s: &str) -> Result<Rational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

macro_rules! parser_default {
    ($t:ty, $name:literal) => {
        impl Default for $t {
            fn default() -> Self {
                <$t>::parse_from([$name])
            }
        }
    };
}

#[derive(Parser, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EntropyArgs {
    /// Largest pattern size.
    #[arg(long, default_value_t = 3)]
    n: u32,
    /// Smallest pattern size.
    #[arg(long)]
    n_min: Option<u32>,
}
parser_default!(EntropyArgs, "entropy");

#[derive(Parser, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FreewordsArgs {
    #[arg(long, default_value_t = 6)]
    max_len: usize,
    #[arg(long, default_value_t = 32)]
    radius: i64,
}
parser_default!(FreewordsArgs, "freewords");

#[derive(Parser, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SoficArgs {
    /// Odometer bases, e.g. "2" or "2,3".
    #[arg(long, default_value = "2")]
    bases: String,
    /// Generators: "+k" constant shifts and "swap".
    #[arg(long, default_value = "+1,-1,swap")]
    generators: String,
    #[arg(long, default_value_t = 12)]
    n: u32,
    #[arg(long, default_value_t = 2)]
    radius: u32,
    #[arg(long, value_parser = rational, default_value = "3/4")]
    #[serde(with = "serde_pq")]
    eps: Rational,
}
parser_default!(SoficArgs, "sofic-check");

#[derive(Parser, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct QuasitileArgs {
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// `A = [1, side]^d`.
    #[arg(long, default_value_t = 64)]
    side: i64,
    /// Single cube tile `[1, tile]^d`; a tile tower is built when absent.
    #[arg(long)]
    tile: Option<i64>,
    #[arg(long, value_parser = rational, default_value = "1/4")]
    #[serde(with = "serde_pq")]
    eps: Rational,
    /// Crossing-fraction threshold for the graph partition.
    #[arg(long, value_parser = rational, default_value = "1")]
    #[serde(with = "serde_pq")]
    partition_eps: Rational,
    /// Largest cube radius tried by the tower search.
    #[arg(long, default_value = "1099511627776")]
    tower_radius: String,
}
parser_default!(QuasitileArgs, "quasitile");

#[derive(Parser, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FolnerBoundArgs {
    #[arg(long, default_value_t = 1)]
    d: u32,
    #[arg(long, default_value_t = 1)]
    l: u32,
    /// Cocycle range `S ⊂ ℤ^d` as vectors separated by ';'.
    #[arg(long, default_value = "0;1;-1")]
    s: String,
    #[arg(long, default_value_t = 2)]
    t_len: usize,
    #[arg(long, value_parser = rational, default_value = "1/2")]
    #[serde(with = "serde_pq")]
    eps: Rational,
}
parser_default!(FolnerBoundArgs, "folner-bound");

#[derive(Parser, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FolnerExtractArgs {
    #[arg(long, default_value = "2")]
    bases: String,
    #[arg(long, default_value_t = 6)]
    n: u32,
    /// Certificate block length along the orbit.
    #[arg(long, default_value_t = 8)]
    block: usize,
    #[arg(long, default_value_t = 8)]
    ball: u32,
    #[arg(long, value_parser = rational, default_value = "1/2")]
    #[serde(with = "serde_pq")]
    eps: Rational,
}
parser_default!(FolnerExtractArgs, "folner-extract");

#[derive(Parser, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PhiArgs {
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long, value_parser = rational, default_value = "1/2")]
    #[serde(with = "serde_pq")]
    eps: Rational,
    #[arg(long, default_value_t = 3)]
    steps: u32,
    /// Also report δ(ε) and n for this `l` and `|T|`.
    #[arg(long)]
    l: Option<u32>,
    #[arg(long)]
    t_len: Option<usize>,
    #[arg(long, default_value = "1000000000000000000000000000000")]
    max_side: String,
}
parser_default!(PhiArgs, "phi-table");

#[derive(Parser, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PsiArgs {
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long, value_parser = rational, default_value = "1/2")]
    #[serde(with = "serde_pq")]
    eps: Rational,
    #[arg(long, default_value_t = 3)]
    steps: u32,
    #[arg(long, default_value = "1000000000000000000000000000000")]
    max_radius: String,
}
parser_default!(PsiArgs, "psi-table");

#[derive(Parser, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct LefArgs {
    #[arg(long, default_value = "odometer")]
    system: String,
    #[arg(long, default_value = "2")]
    bases: String,
    #[arg(long, default_value = "+1,swap")]
    generators: String,
    #[arg(long, default_value_t = 1)]
    ball: u32,
    #[arg(long, default_value_t = 8)]
    max_n: usize,
    /// Displacement threshold for nontrivial elements.
    #[arg(long, value_parser = rational, default_value = "0")]
    #[serde(with = "serde_pq")]
    eps: Rational,
}
parser_default!(LefArgs, "lef");

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentConfig {
    command: String,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    budget: Option<u64>,
    #[serde(default)]
    out: Option<PathBuf>,
    #[serde(default)]
    json: Option<bool>,
    #[serde(default)]
    params: Option<Value>,
}

struct Settings {
    seed: u64,
    budget: u64,
    json: bool,
}

/// A command result: the JSON report, the text artifact and whether every
/// asserted check held.
struct Outcome {
    report: Value,
    text: String,
    pass: bool,
}

fn parse_generators(spec: &str, bases: &BaseSequence) -> Result<Vec<CocycleTable>> {
    spec.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|g| {
            if g == "swap" {
                Ok(CocycleTable::digit_swap(bases))
            } else if g == "id" {
                Ok(shift(0))
            } else {
                let k: i64 = g.trim_start_matches('+').parse().with_context(|| format!("bad generator {g:?}"))?;
                Ok(shift(k))
            }
        })
        .collect()
}

fn odometer_group(bases: &str, budget: u64) -> Result<(BaseSequence, FullGroup)> {
    let b = BaseSequence::parse(bases).map_err(|e| anyhow::anyhow!("{e}"))?;
    let sys = SystemContext::odometer(b.clone());
    let fg = FullGroup::with_params(sys, 72, budget as usize);
    Ok((b, fg))
}

fn entropy(a: &EntropyArgs, s: &Settings) -> Result<Outcome> {
    let mut rows = Vec::new();
    let mut text = String::from("n,count,bound,bound_full,within_bound,normalized_log_count\n");
    let mut pass = true;
    for n in a.n_min.unwrap_or(a.n)..=a.n {
        let h = 1i64 << (n + 6);
        let pc = pattern_count(n, (-h, h), VerticalStrategy::ExactPeriod, s.budget)
            .map_err(|b| anyhow::anyhow!("pattern budget {b} exceeded"))?;
        let row = entropy_row(n, pc.count);
        let within = row.count_within_bound;
        pass &= within;
        text += &format!(
            "{},{},{},{},{},{:.6}\n",
            row.n, row.count, row.bound, row.full_bound, within, row.normalized_log_count
        );
        rows.push(serde_json::to_value(&row)?);
    }
    Ok(Outcome {
        report: json!({ "rows": rows }),
        text,
        pass,
    })
}

fn freewords(a: &FreewordsArgs) -> Result<Outcome> {
    let mut text = String::from("word,point,image\n");
    let mut items = Vec::new();
    let mut pass = true;
    for w in reduced_words(a.max_len) {
        let wit = word_acts_nontrivially(&w, a.radius);
        let name = word_string(&w);
        match &wit {
            Some(x) => text += &format!("{name},{:?},{:?}\n", x.point, x.image),
            None => {
                pass = false;
                text += &format!("{name},none,none\n");
            }
        }
        items.push(json!({ "word": name, "witness": wit }));
    }
    Ok(Outcome {
        report: json!({ "radius": a.radius, "words": items }),
        text,
        pass,
    })
}

fn sofic_check(a: &SoficArgs, s: &Settings) -> Result<Outcome> {
    let (bases, fg) = odometer_group(&a.bases, s.budget)?;
    let gens = parse_generators(&a.generators, &bases)?;
    let ball = fg.subgroup_ball(&gens, a.radius)?;
    let x = fg.sys.origin_point();
    let mut theta = build_theta(&fg, &x, a.n, &ball)?;
    let rep = check_injective_almost_action(&mut theta, &ball, &a.eps, s.budget as usize)?;
    let text = format!(
        "n={} ball={} mult_defect={} min_displacement={} identity_ok={} pass={}\n",
        rep.n,
        ball.len(),
        rep.conditions.mult_defect,
        rep.conditions.min_displacement.as_ref().map(|d| d.to_string()).unwrap_or_else(|| "none".into()),
        rep.conditions.identity_ok,
        rep.pass
    );
    Ok(Outcome {
        pass: rep.pass,
        report: serde_json::to_value(&rep)?,
        text,
    })
}

fn quasitile_cmd(a: &QuasitileArgs, s: &Settings) -> Result<Outcome> {
    let ctx = GroupContext::standard_zd(a.d);
    let cap = s.budget as usize;
    let area = box_elements(&vec![1; a.d], &vec![a.side; a.d], cap)?;
    let tiles: Vec<Vec<GroupElement>> = match a.tile {
        Some(t) => vec![box_elements(&vec![1; a.d], &vec![t; a.d], cap)?],
        None => {
            let mut sgen = vec![GroupElement::Vector(vec![0; a.d])];
            sgen.extend(ctx.generators.iter().cloned());
            let radius: BigInt = a.tower_radius.parse().context("tower radius")?;
            let tower = tile_tower(&ctx, &sgen, &a.eps, &radius)?;
            tower.explicit_tiles(cap)?
        }
    };
    let q = quasitile(&ctx, &area, &tiles, &a.eps, HypothesisPolicy::Report)?;
    let mut s_set = vec![GroupElement::Vector(vec![0; a.d])];
    s_set.extend(ctx.generators.iter().cloned());
    let part = folner_graph_partition(&ctx, &area, &s_set, &q, &a.partition_eps, HypothesisPolicy::Report);
    let (pass, cert_json, frac_text) = match &part {
        Ok(p) => (true, json!({"K": p.cert.k, "blocks": p.cert.blocks.len(), "singletons": p.singletons, "crossing_edges": p.cert.crossing_edges, "fraction": p.cert.fraction.to_string(), "hypotheses": p.hypotheses}), p.cert.fraction.to_string()),
        Err(e) => (false, json!({ "error": e.to_string() }), "failed".to_string()),
    };
    let centers: Vec<Vec<&GroupElement>> = (0..q.tiles.len()).map(|k| q.centers(k)).collect();
    let report = json!({
        "tiles": q.tiles.iter().map(|t| t.len()).collect::<Vec<_>>(),
        "centers": centers,
        "exact_tiles": q.placements.iter().map(|p| p.exact.len()).collect::<Vec<_>>(),
        "coverage": q.coverage.to_string(),
        "hypotheses": q.hypotheses,
        "partition": cert_json,
    });
    let text = format!(
        "tiles={} placements={} coverage={} partition_fraction={}\n",
        q.tiles.len(),
        q.placements.len(),
        q.coverage,
        frac_text
    );
    Ok(Outcome { report, text, pass })
}

fn parse_vectors(s: &str, d: u32) -> Result<Vec<Vec<i64>>> {
    s.split(';')
        .map(|v| {
            let xs: Vec<i64> = v.split(',').map(|x| x.trim().parse()).collect::<Result<_, _>>()?;
            if xs.len() != d as usize {
                bail!("vector {v:?} does not have {d} coordinates");
            }
            Ok(xs)
        })
        .collect()
}

fn folner_bound_cmd(a: &FolnerBoundArgs) -> Result<Outcome> {
    let s = parse_vectors(&a.s, a.d)?;
    let b = folner_bound_zd(a.d, a.l, &s, a.t_len, &a.eps)?;
    let text = format!(
        "m={} C={} k_statement={} k_proof={} bound_statement={} bound_proof={}\n",
        b.m, b.c, b.k_statement, b.k_proof, b.bound_statement, b.bound_proof
    );
    Ok(Outcome {
        report: serde_json::to_value(&b)?,
        text,
        pass: true,
    })
}

fn folner_extract_cmd(a: &FolnerExtractArgs, s: &Settings) -> Result<Outcome> {
    let (_, fg) = odometer_group(&a.bases, s.budget)?;
    let t = vec![shift(1), shift(-1)];
    let x = fg.sys.origin_point();
    let mut theta = build_theta(&fg, &x, a.n, &t)?;
    let g = schreier_graph(&mut theta, &t, s.budget as usize)?;
    let carrier = theta.carrier_len();
    let cert = verify_certificate(&g, consecutive_blocks(carrier, a.block), a.block, &Rational::from_integer(1.into()))?;
    let r = extract_folner_set(&mut theta, &g, &cert, &t, a.ball, &a.eps)?;
    let bound = folner_bound_zd(1, 1, &[vec![0], vec![1], vec![-1]], t.len(), &a.eps)?;
    let proof: BigInt = bound.bound_proof.parse()?;
    let pass = r.defect <= a.eps && BigInt::from(r.size) <= proof;
    let text = format!(
        "size={} defect={} bound_statement={} bound_proof={} pass={}\n",
        r.size, r.defect, bound.bound_statement, bound.bound_proof, pass
    );
    Ok(Outcome {
        report: json!({ "report": r, "bound": bound, "certificate_fraction": cert.fraction.to_string() }),
        text,
        pass,
    })
}

fn phi_cmd(a: &PhiArgs) -> Result<Outcome> {
    let oracle = ZdOracle::new(a.d, a.max_side.parse().context("max side")?);
    let table = phi_recursion(&oracle, &a.eps, a.steps);
    let mut text = String::from("i,Phi,phi,verified\n");
    for r in &table.rows {
        text += &format!("{},{},{},{}\n", r.i, r.big_phi, r.phi, r.verified);
    }
    let delta = match (a.l, a.t_len) {
        (Some(l), Some(t)) => Some(delta_schedule(&a.eps, l, t, 2 * a.d + 1)),
        _ => None,
    };
    let pass = table.partial.is_none() && table.rows.iter().all(|r| r.verified);
    Ok(Outcome {
        report: json!({ "table": table, "delta": delta }),
        text,
        pass,
    })
}

fn psi_cmd(a: &PsiArgs) -> Result<Outcome> {
    let rows = psi_tilde_recursion(a.d, &a.eps, a.steps, &a.max_radius.parse().context("max radius")?)?;
    let mut text = String::from("i,Psi,radius,verified\n");
    for r in &rows {
        text += &format!("{},{},{},{}\n", r.i, r.psi, r.radius, r.verified);
    }
    let pass = rows.iter().all(|r| r.verified);
    Ok(Outcome {
        report: json!({ "rows": rows }),
        text,
        pass,
    })
}

fn lef_cmd(a: &LefArgs, s: &Settings) -> Result<Outcome> {
    if a.system != "odometer" {
        bail!("only the odometer model provider is available");
    }
    let (bases, fg) = odometer_group(&a.bases, s.budget)?;
    let gens = parse_generators(&a.generators, &bases)?;
    let search = lef_search(&fg, &gens, a.ball, a.max_n, &a.eps)?;
    let residual = match search.minimal_n {
        Some(n) => {
            let model = odometer_finite_model(&bases, n)?;
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
            let samples = sample_points(&bases, n, 64, &mut rng);
            let eps = model.epsilon.clone();
            Some(check_residually_finite(&fg.sys, &model, &samples, &[1, -1], &eps, n as u32 + 8)?)
        }
        None => None,
    };
    let witnesses: Vec<_> = search
        .conditions
        .iter()
        .filter(|c| !c.pass)
        .map(|c| json!({ "n": c.n, "product_failures": c.product_failures.len(), "displacement_failures": c.displacement_failures }))
        .collect();
    let pass = search.minimal_n.is_some() && search.monotone;
    let text = format!(
        "minimal_n={} monotone={}\n",
        search.minimal_n.map(|n| n.to_string()).unwrap_or_else(|| "none".into()),
        search.monotone
    );
    Ok(Outcome {
        report: json!({
            "minimal_n": search.minimal_n,
            "monotone": search.monotone,
            "conditions": search.conditions,
            "witnesses": witnesses,
            "residual": residual,
        }),
        text,
        pass,
    })
}

fn dispatch(cmd: &Command, s: &Settings) -> Result<Outcome> {
    match cmd {
        Command::Entropy(a) => entropy(a, s),
        Command::Freewords(a) => freewords(a),
        Command::SoficCheck(a) => sofic_check(a, s),
        Command::Quasitile(a) => quasitile_cmd(a, s),
        Command::FolnerBound(a) => folner_bound_cmd(a),
        Command::FolnerExtract(a) => folner_extract_cmd(a, s),
        Command::PhiTable(a) => phi_cmd(a),
        Command::PsiTable(a) => psi_cmd(a),
        Command::Lef(a) => lef_cmd(a, s),
        Command::Run { .. } => bail!("nested run"),
    }
}

fn params<T: for<'de> Deserialize<'de> + Default>(v: Option<Value>) -> Result<T, serde_json::Error> {
    match v {
        Some(v) => serde_json::from_value(v),
        None => Ok(T::default()),
    }
}

fn config_command(cfg: ExperimentConfig) -> Result<Command, String> {
    let p = cfg.params;
    let e = |x: serde_json::Error| x.to_string();
    Ok(match cfg.command.as_str() {
        "entropy" => Command::Entropy(params(p).map_err(e)?),
        "freewords" => Command::Freewords(params(p).map_err(e)?),
        "sofic-check" => Command::SoficCheck(params(p).map_err(e)?),
        "quasitile" => Command::Quasitile(params(p).map_err(e)?),
        "folner-bound" => Command::FolnerBound(params(p).map_err(e)?),
        "folner-extract" => Command::FolnerExtract(params(p).map_err(e)?),
        "phi-table" => Command::PhiTable(params(p).map_err(e)?),
        "psi-table" => Command::PsiTable(params(p).map_err(e)?),
        "lef" => Command::Lef(params(p).map_err(e)?),
        other => return Err(format!("unknown command {other:?}")),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut settings = Settings {
        seed: cli.seed,
        budget: cli.budget,
        json: cli.json,
    };
    let mut out = cli.out.clone();
    let command = match cli.command {
        Command::Run { config } => {
            let parsed = fs::read_to_string(&config)
                .map_err(|e| e.to_string())
                .and_then(|t| serde_json::from_str::<ExperimentConfig>(&t).map_err(|e| e.to_string()));
            let cfg = match parsed {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: config {}: {e}", config.display());
                    return ExitCode::from(2);
                }
            };
            settings.seed = cfg.seed.unwrap_or(settings.seed);
            settings.budget = cfg.budget.unwrap_or(settings.budget);
            settings.json = cfg.json.unwrap_or(settings.json);
            out = cfg.out.clone().or(out);
            match config_command(cfg) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: config {}: {e}", config.display());
                    return ExitCode::from(2);
                }
            }
        }
        c => c,
    };
    let outcome = match dispatch(&command, &settings) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let artifact = if settings.json {
        let mut v = outcome.report;
        if let Value::Object(m) = &mut v {
            m.insert("pass".into(), Value::Bool(outcome.pass));
        }
        serde_json::to_string_pretty(&v).unwrap() + "\n"
    } else {
        outcome.text
    };
    match out {
        Some(p) => {
            if let Err(e) = fs::write(&p, artifact) {
                eprintln!("error: writing {}: {e}", p.display());
                return ExitCode::from(1);
            }
        }
        None => print!("{artifact}"),
    }
    if outcome.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
